//! Sensitivity statistics computed from `(ParamSet, y)` result tables.
//!
//! * [`moat`]: Morris elementary effects and their `mu`, `mu*`, `sigma`.
//! * [`correlations`]: Pearson and Spearman, simple and partial.
//! * [`sobol`]: first-order and total Sobol indices from a Saltelli design.

mod correlation;
mod moat;
mod sobol;
mod stats;

use thiserror::Error;

use crate::design::SampleDesign;
use crate::space::{ParamSet, ParameterSpace};

pub use correlation::{correlations, AxisCorrelation, CorrelationResult};
pub use moat::{elementary_effects, moat, MoatAxis, MoatResult};
pub use sobol::{sobol, SobolAxis, SobolResult, SOBOL_ESTIMATOR};
pub use stats::{average_ranks, mean, pearson, sample_std};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SaError {
    #[error("result table incomplete: {rows} outputs for {points} design points")]
    IncompleteTable { rows: usize, points: usize },
    #[error("non-finite output at row {0}")]
    NonFinite(usize),
    #[error("analysis expects a {expected} design, got {found}")]
    WrongDesign {
        expected: &'static str,
        found: String,
    },
    #[error("corrupt design: {0}")]
    CorruptDesign(String),
    #[error("not enough rows: {0}")]
    TooFewRows(String),
}

/// Outputs of a design, row `i` realizing `design.points[i]`.
#[derive(Debug, Clone)]
pub struct ResultTable {
    space: ParameterSpace,
    design: SampleDesign,
    ys: Vec<f64>,
}

impl ResultTable {
    pub fn new(space: ParameterSpace, design: SampleDesign, ys: Vec<f64>) -> Result<Self, SaError> {
        if ys.len() != design.points.len() {
            return Err(SaError::IncompleteTable {
                rows: ys.len(),
                points: design.points.len(),
            });
        }
        if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
            return Err(SaError::NonFinite(i));
        }
        Ok(Self { space, design, ys })
    }

    /// Evaluates `f` on every design point.
    pub fn evaluate(
        space: ParameterSpace,
        design: SampleDesign,
        mut f: impl FnMut(&ParamSet) -> f64,
    ) -> Result<Self, SaError> {
        let ys = design.points.iter().map(&mut f).collect();
        Self::new(space, design, ys)
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn design(&self) -> &SampleDesign {
        &self.design
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn rows(&self) -> impl Iterator<Item = (&ParamSet, f64)> {
        self.design.points.iter().zip(self.ys.iter().copied())
    }
}
