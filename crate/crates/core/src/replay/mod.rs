//! Replay storage and sampling: a uniform FIFO ring, a prioritized buffer on a
//! sum tree, and the contrastive buffer with its admission rule.

mod cer;
mod per;
mod ring;
mod sum_tree;

pub use cer::{
    admit_episode, assemble_batch, cer_share, find_contrastive, percentile_gate,
    significant_transitions, write_cer_csv, Admission, PercentileCuts,
};
pub use per::{PerBuffer, PerSample};
pub use ring::RingBuffer;
pub use sum_tree::SumTree;

use thiserror::Error;

use crate::gridworld::Observation;

/// Default capacity for every buffer: 2^16 transitions.
pub const DEFAULT_CAPACITY: usize = 1 << 16;

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("index {index} out of range for buffer of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0} and {1} have different lengths")]
    LengthMismatch(&'static str, &'static str),
}

/// One stored sample with its Monte-Carlo target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub target: f64,
    pub episode_id: u64,
    pub step_index: usize,
}

pub type MemBuffer = RingBuffer<Transition>;
pub type CerBuffer = RingBuffer<Transition>;
