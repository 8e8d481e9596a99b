//! Total positivity tools: minor-based classification of totally
//! nonnegative and totally positive matrices, sign-variation counts,
//! linear time-varying systems with totally nonnegative transition
//! matrices, and entrainment checks for periodically forced cooperative
//! systems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coop_sim;
pub mod error;
pub mod forms;
pub mod matrix;
pub mod ode;
pub mod par;
pub mod signvar;
pub mod tn;
pub mod tnds;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use par::Exec;
