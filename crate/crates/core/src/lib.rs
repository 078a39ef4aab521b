//! Numerical toolkit for the Anomaly flow on Hermitian 3-folds.

pub mod cli_io;
pub mod error;
pub mod flow;
pub mod form_oracle;
pub mod grid;
pub mod linalg;
pub mod linearize;
pub mod pointwise;

pub use error::{AnomalyError, Result};
