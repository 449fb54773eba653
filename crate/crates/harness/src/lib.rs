//! Experiment harness over the core library: scenario configuration,
//! Monte Carlo filter comparisons, convergence studies, the validation
//! suite, expansion inspection, and deterministic CSV/SVG/manifest
//! reports. The `qpf` binary is a thin command-line layer over these
//! modules.

#![forbid(unsafe_code)]

pub mod comparison;
pub mod convergence;
pub mod error;
pub mod expand;
pub mod report;
pub mod scenario;
pub mod svg;
pub mod validate;

pub use error::{HarnessError, Result};
