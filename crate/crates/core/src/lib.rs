//! Approximate opacity verification for finite metric systems and for
//! discrete-time control systems through finite abstractions.

pub mod abstraction;
pub mod barrier;
pub mod boxes;
pub mod compositional;
pub mod control;
pub mod dot;
pub mod error;
pub mod expr;
pub mod estimator;
pub mod observer;
pub mod oracle;
pub mod polynomial;
pub mod simulation;
pub mod system;
#[cfg(feature = "testing")]
pub mod testing;
pub mod verdict;
pub mod verify;

pub use error::{Error, Result};
pub use observer::{build_observer, ObserverConfig, DEFAULT_STATE_CAP};
pub use system::{MetricSystem, OpacityNotion, OutputMetric, Path, StateId, StateSet};
pub use verdict::{Verdict, Verification, Witness};
pub use verify::verify;
