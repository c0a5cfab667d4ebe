#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chemistry;
pub mod config;
pub mod error;
pub mod fokker_planck;
pub mod history_state;
pub mod linalg;
pub mod moment_meas;
pub mod qlsa;
pub mod qsim;
pub mod run;

pub use error::{Error, Result};
