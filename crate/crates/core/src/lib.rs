/*
Copyright 2026 The sadmm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Consensus ADMM with sensitivity-based subproblem updates.
//!
//! [`consensus`] drives the master loop, [`subproblem`] holds the exact and
//! predictor-corrector worker solves, [`transport`] moves rounds between
//! processes and [`data`] covers CSV, configs and metrics files.

pub mod consensus;
pub mod data;
pub mod linalg;
pub mod model;
pub mod subproblem;
pub mod transport;
