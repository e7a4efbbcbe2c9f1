//! Dynamic linear UCB (dLinUCB) for piecewise-stationary contextual bandits.
//!
//! A master bandit maintains a set of LinUCB "slave" models. Each slave's
//! recent rate of out-of-bound prediction errors (its badness) is tracked over
//! a sliding window; slaves whose badness is statistically too high are
//! discarded, and a new slave is started when no existing one looks
//! up to date. The crate also ships a piecewise-stationary simulator,
//! baseline policies, an experiment harness and an offline replay evaluator.
//!
//! ```
//! use dlinucb::{Arm, Hyperparams, MasterState, Vector};
//!
//! let mut master = MasterState::new(Hyperparams { dim: 2, ..Default::default() }, 0).unwrap();
//! let pool = vec![
//!     Arm::new(0, Vector::new(vec![1.0, 0.0]).unwrap()),
//!     Arm::new(1, Vector::new(vec![0.0, 1.0]).unwrap()),
//! ];
//! let choice = master.choose_arm(&pool).unwrap();
//! let events = master.observe(&pool[choice.arm].features, 0.4).unwrap();
//! assert_eq!(events.n_slaves, 1);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod arm;
pub mod env;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod master;
pub mod slave;

pub use agents::{Agent, AgentSpec, DLinUcbAgent, LinUcbAgent, OracleLinUcbAgent, RandomAgent};
pub use arm::{Arm, ArmId};
pub use env::{EnvConfig, EnvTrajectory, Environment};
pub use error::{Error, Result};
pub use linalg::{mahalanobis_norm, rank_one_inverse_update, solve_estimate, SquareMatrix, Vector};
pub use master::{BadnessStats, BadnessWindow, Choice, Hyperparams, MasterState, StepEvents};
pub use slave::{noise_threshold, NoiseSpec, SlaveModel};
