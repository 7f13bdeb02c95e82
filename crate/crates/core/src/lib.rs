//! Contrastive experience replay on waypoint gridworlds.
//!
//! - [`gridworld`]: the environment and its BFS optimal-return oracle.
//! - [`qnet`]: the Q-network, its gradients and Adam.
//! - [`replay`]: uniform, prioritized and contrastive replay.
//! - [`agent`]: the episodic training loop for all four algorithms.
//! - [`harness`]: experiment configs, multi-seed runs, CSV output.

pub mod agent;
pub mod gridworld;
pub mod harness;
pub mod probe;
pub mod qnet;
pub mod replay;

pub use agent::{train_run, AgentConfig, Algorithm, RunMetrics, Trainer};
pub use gridworld::{Action, Cell, GridConfig, GridWorld};
