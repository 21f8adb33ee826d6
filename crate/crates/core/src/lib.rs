//! Reinforcement learning of quantum strategies for Bell non-local games.
//!
//! The crate is organized bottom-up:
//!
//! * [`qsim`]: dense states, operators and an extreme-eigenvalue solver;
//! * [`bellenv`]: Bell inequalities exposed as reward functions;
//! * [`ansatz`]: the layered RY + CNOT-ring variational circuit;
//! * [`neuralnet`]: small tanh networks with analytic gradients and Adam;
//! * [`rl`]: sequential angle selection, GAE, clipped PPO and vanilla PG;
//! * [`harness`]: configuration, oracles, CSV/JSON telemetry and the CLI.

pub mod ansatz;
pub mod bellenv;
pub mod error;
pub mod harness;
pub mod neuralnet;
pub mod qsim;
pub mod rl;

pub use error::{Error, Result};
