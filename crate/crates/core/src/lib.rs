//! Parameter sensitivity analysis and auto-tuning for dataflow image
//! analysis pipelines.
//!
//! The crate is organised around the study loop: a [`design`] is drawn from
//! a [`space`], every point is executed through a [`graph`] of stages on the
//! [`runtime`], outputs are scored with [`spatial`] metrics, and the scores
//! feed either [`sa`] statistics or a [`tune`] search. [`bench`] provides
//! synthetic workflows so that studies run without external data.

pub mod bench;
pub mod design;
pub mod graph;
pub mod rng;
pub mod runtime;
pub mod sa;
pub mod space;
pub mod spatial;
pub mod tune;

pub use design::{DesignKind, DesignMeta, SampleDesign};
pub use space::{AxisValue, ParamSet, ParameterAxis, ParameterSpace, SpaceError};
