//! Numerical laboratory for cascading (triangular) Fisher-KPP systems and the associated
//! multitype branching Brownian motion.

pub mod bbm;
pub mod cascade;
pub mod error;
pub mod experiments;
pub mod front;
pub mod heat;
pub mod kpp;
pub mod selfsim;
pub mod table;
pub mod tridiag;
pub mod wave;

pub use error::{Error, ErrorCategory, Result};
