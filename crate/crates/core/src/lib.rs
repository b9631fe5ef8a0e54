#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod cli;
pub mod deformation;
pub mod error;
pub mod groups;
pub mod inoue;
pub mod kernel;
pub mod ode;
pub mod oracle;
pub mod parallel;
pub mod potentials;
pub mod stats;
pub mod tolerances;

pub use error::{BihermError, Result};
