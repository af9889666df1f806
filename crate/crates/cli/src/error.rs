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

use std::fmt;

use sadmm_core::consensus::ConsensusError;
use sadmm_core::data::DataError;
use sadmm_core::transport::TransportError;

/// Exit code for command lines that do not parse.
pub const USAGE_EXIT: u8 = 1;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    Data(String),
    Solver(String),
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Transport(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            CliError::Data(m) => ("data/config error", m),
            CliError::Solver(m) => ("solver error", m),
            CliError::Transport(m) => ("transport error", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> Self {
        CliError::Transport(e.to_string())
    }
}

impl From<ConsensusError> for CliError {
    fn from(e: ConsensusError) -> Self {
        match e {
            ConsensusError::Config(_) => CliError::Data(e.to_string()),
            ConsensusError::Transport(_) | ConsensusError::Protocol(_) => CliError::Transport(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
