//! Granger causality tests on multivariate time series: kernel ridge
//! regression with a sign test, and a linear F-test baseline.

pub mod bench;
pub mod cao;
pub mod engine;
pub mod error;
pub mod eval;
pub mod krr;
pub mod simnet;
pub mod stats;
pub mod ts;

pub use error::{Error, Result};

pub use engine::{gc_network, gc_test, gc_test_linear, GcConfig, GcTestResult, PValueMatrix};
pub use simnet::{generate, GroundTruth, NetworkName, NetworkSpec};
pub use ts::{build_lag_design, LagDesign, SplitSpec, TimeSeriesPanel};
