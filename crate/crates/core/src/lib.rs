//! Pentagon inner bound of the CRB-rate region for point-to-point MIMO ISAC links,
//! with the operator, optimisation, rate and waveform pieces it is built from.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bfim;
pub mod cli;
pub mod comm;
pub mod covopt;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod region;
pub mod waveform;

pub use error::{Error, Result};
