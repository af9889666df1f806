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

//! Master-worker messages and their wire format.
//!
//! Every message travels in one frame:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SADM"
//! 4       1     version (1)
//! 5       1     message type
//! 6       4     payload length, u32 little-endian
//! 10      n     payload
//! ```
//!
//! Integers are little-endian. A real array is a u32 element count followed
//! by the IEEE-754 bit patterns, so every f64 survives the trip bit for bit.

pub mod cluster;
mod codec;

use std::io;

use thiserror::Error;

use crate::consensus::{RoundParams, RoundResult, WorkerSettings};
use crate::linalg::Vector;
use crate::model::{ModelSpec, Shard};

pub use cluster::{serve_worker, Cluster, SeqEvent, TcpLink, WorkerLink};
pub use codec::{decode, encode, read_frame};

pub const MAGIC: [u8; 4] = *b"SADM";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("truncated frame: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("worker {worker_id} answered round {got} while round {expected} is outstanding")]
    StaleRound { worker_id: u32, expected: u64, got: u64 },
    #[error("worker {worker_id} disconnected")]
    Disconnected { worker_id: u32 },
    #[error("unexpected {0} message")]
    Unexpected(&'static str),
    #[error("worker id {0} is out of range or already taken")]
    UnknownWorker(u32),
    #[error("worker {worker_id} reported: {message}")]
    Remote { worker_id: u32, message: String },
    #[error("a round is already outstanding")]
    RoundOutstanding,
}

impl From<io::Error> for TransportError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::UnexpectedEof => TransportError::Truncated { needed: HEADER_LEN, available: 0 },
            _ => TransportError::Io(e.to_string()),
        }
    }
}

/// Shard assignment, sent once per worker before round 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignShard {
    pub worker_id: u32,
    pub spec: ModelSpec,
    pub shard: Shard,
    pub settings: WorkerSettings,
    pub initial_x: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello { worker_id: u32 },
    AssignShard(Box<AssignShard>),
    RoundParams(RoundParams),
    RoundResult(RoundResult),
    Shutdown,
    WorkerError { worker_id: u32, k: u64, message: String },
}

impl Message {
    pub fn type_code(&self) -> u8 {
        match self {
            Message::Hello { .. } => 1,
            Message::AssignShard(_) => 2,
            Message::RoundParams(_) => 3,
            Message::RoundResult(_) => 4,
            Message::Shutdown => 5,
            Message::WorkerError { .. } => 6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::AssignShard(_) => "assign-shard",
            Message::RoundParams(_) => "round-params",
            Message::RoundResult(_) => "round-result",
            Message::Shutdown => "shutdown",
            Message::WorkerError { .. } => "worker-error",
        }
    }
}
