use serde::Serialize;

use super::{ResultTable, SaError};
use crate::design::{DesignMeta, SaltelliBlock};

pub const SOBOL_ESTIMATOR: &str = "main: Saltelli 2002 on mean-centred outputs, total: Jansen";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolAxis {
    pub name: String,
    pub s_i: Option<f64>,
    pub s_ti: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolResult {
    pub n: usize,
    pub variance_hat: f64,
    pub axes: Vec<SobolAxis>,
    /// Sum of the first-order indices; close to one for additive models.
    pub sum_s_i: Option<f64>,
    pub estimator: &'static str,
    pub flags: Vec<String>,
}

/// First-order and total Sobol indices from a Saltelli design.
///
/// With `f_A`, `f_B`, `f_ABi` the output blocks and `V` the sample variance
/// of the outputs over `A ∪ B`, and `m` their mean:
///
/// ```text
/// S_i  = mean((f_B - m) * (f_ABi - f_A)) / V
/// S_Ti = mean((f_A - f_ABi)^2) / (2 V)
/// ```
///
/// Centring `f_B` leaves the expectation unchanged but makes the estimate
/// invariant to adding a constant to the output, which removes most of its
/// sampling noise when the output mean is large relative to its spread.
/// Estimates are reported raw and may be slightly negative.
pub fn sobol(table: &ResultTable) -> Result<SobolResult, SaError> {
    let DesignMeta::Saltelli(meta) = table.design().meta else {
        return Err(SaError::WrongDesign {
            expected: "saltelli",
            found: format!("{:?}", table.design().kind),
        });
    };
    let k = table.space().k();
    if meta.k != k {
        return Err(SaError::CorruptDesign(format!(
            "design has {} axes, space has {k}",
            meta.k
        )));
    }
    let ys = table.ys();
    if ys.len() != meta.n * (k + 2) {
        return Err(SaError::IncompleteTable {
            rows: ys.len(),
            points: meta.n * (k + 2),
        });
    }
    let n = meta.n;
    let f_a = &ys[meta.block(SaltelliBlock::A)];
    let f_b = &ys[meta.block(SaltelliBlock::B)];

    let pooled = &ys[..2 * n];
    let pooled_mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let variance_hat = pooled
        .iter()
        .map(|y| (y - pooled_mean).powi(2))
        .sum::<f64>()
        / (pooled.len() - 1) as f64;

    let mut flags = Vec::new();
    let defined = variance_hat > 0.0;
    if !defined {
        flags.push("output variance is zero; indices undefined".to_string());
    }

    let axes: Vec<SobolAxis> = table
        .space()
        .axes()
        .iter()
        .enumerate()
        .map(|(i, axis)| {
            let f_ab = &ys[meta.block(SaltelliBlock::AB(i))];
            let (mut first, mut total) = (0.0, 0.0);
            for j in 0..n {
                first += (f_b[j] - pooled_mean) * (f_ab[j] - f_a[j]);
                total += (f_a[j] - f_ab[j]).powi(2);
            }
            SobolAxis {
                name: axis.name().to_string(),
                s_i: defined.then(|| first / n as f64 / variance_hat),
                s_ti: defined.then(|| total / (2.0 * n as f64) / variance_hat),
            }
        })
        .collect();
    let sum_s_i = defined.then(|| axes.iter().filter_map(|a| a.s_i).sum());
    Ok(SobolResult {
        n,
        variance_hat,
        axes,
        sum_s_i,
        estimator: SOBOL_ESTIMATOR,
        flags,
    })
}
