use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::stats::{average_ranks, pearson};
use super::{ResultTable, SaError};
use crate::space::scale_to_unit;

/// Smallest eigenvalue ratio of the correlation matrix still treated as full rank.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisCorrelation {
    pub name: String,
    pub cc: Option<f64>,
    pub pcc: Option<f64>,
    pub rcc: Option<f64>,
    pub prcc: Option<f64>,
    /// Why a coefficient is missing, when one is.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub axes: Vec<AxisCorrelation>,
    pub flags: Vec<String>,
}

/// Simple and partial Pearson (on unit-scaled levels) and Spearman (on
/// average ranks) correlations between each axis and the output.
///
/// Partial coefficients come from the precision matrix `P` of the joint
/// correlation matrix, `-P_iy / sqrt(P_ii P_yy)`. When that matrix is rank
/// deficient they are computed from least-squares residuals via the
/// pseudo-inverse instead, and the result is flagged.
pub fn correlations(table: &ResultTable) -> Result<CorrelationResult, SaError> {
    let n = table.ys().len();
    if n < 3 {
        return Err(SaError::TooFewRows(format!(
            "correlations need at least 3 rows, got {n}"
        )));
    }
    let space = table.space();
    let k = space.k();
    let mut columns = vec![Vec::with_capacity(n); k];
    for (p, _) in table.rows() {
        let u = scale_to_unit(space, p).map_err(|e| SaError::CorruptDesign(e.to_string()))?;
        for (col, v) in columns.iter_mut().zip(u) {
            col.push(v);
        }
    }
    let y = table.ys().to_vec();
    let mut flags = Vec::new();

    let constant: Vec<bool> = columns
        .iter()
        .map(|c| c.iter().all(|&v| v == c[0]))
        .collect();
    let y_constant = y.iter().all(|&v| v == y[0]);
    if y_constant {
        flags.push("output is constant; all coefficients undefined".to_string());
    }

    let valid: Vec<usize> = (0..k).filter(|&i| !constant[i]).collect();
    let (mut pcc, mut prcc) = (vec![None; k], vec![None; k]);
    if !y_constant && !valid.is_empty() {
        let cols: Vec<&[f64]> = valid.iter().map(|&i| columns[i].as_slice()).collect();
        let (values, singular) = partial(&cols, &y);
        if singular {
            flags.push(
                "correlation matrix is singular; partial CC from pseudo-inverse residuals"
                    .to_string(),
            );
        }
        for (&i, v) in valid.iter().zip(values) {
            pcc[i] = v;
        }

        let ranked: Vec<Vec<f64>> = valid.iter().map(|&i| average_ranks(&columns[i])).collect();
        let ranked_refs: Vec<&[f64]> = ranked.iter().map(Vec::as_slice).collect();
        let (values, singular) = partial(&ranked_refs, &average_ranks(&y));
        if singular {
            flags.push(
                "rank correlation matrix is singular; partial RCC from pseudo-inverse residuals"
                    .to_string(),
            );
        }
        for (&i, v) in valid.iter().zip(values) {
            prcc[i] = v;
        }
    }

    let y_ranks = average_ranks(&y);
    let axes = space
        .axes()
        .iter()
        .enumerate()
        .map(|(i, axis)| {
            let note = if constant[i] {
                Some("constant column".to_string())
            } else if y_constant {
                Some("constant output".to_string())
            } else if pcc[i].is_none() || prcc[i].is_none() {
                Some("degenerate after conditioning on other axes".to_string())
            } else {
                None
            };
            let defined = !constant[i] && !y_constant;
            AxisCorrelation {
                name: axis.name().to_string(),
                cc: defined.then(|| pearson(&columns[i], &y)).flatten(),
                rcc: defined
                    .then(|| pearson(&average_ranks(&columns[i]), &y_ranks))
                    .flatten(),
                pcc: pcc[i],
                prcc: prcc[i],
                note,
            }
        })
        .collect();
    Ok(CorrelationResult { axes, flags })
}

/// Partial correlation of every column with `y` given all other columns.
/// Returns the coefficients and whether the rank-deficient path was taken.
fn partial(columns: &[&[f64]], y: &[f64]) -> (Vec<Option<f64>>, bool) {
    let m = columns.len();
    if m == 1 {
        return (vec![pearson(columns[0], y)], false);
    }
    let mut all: Vec<&[f64]> = columns.to_vec();
    all.push(y);
    let corr = DMatrix::from_fn(m + 1, m + 1, |a, b| {
        if a == b {
            1.0
        } else {
            pearson(all[a], all[b]).unwrap_or(0.0)
        }
    });
    let eigen = corr.clone().symmetric_eigen();
    let max = eigen.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eigen.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if min > RANK_TOLERANCE * max {
        if let Some(precision) = corr.try_inverse() {
            let values = (0..m)
                .map(|i| {
                    let denom = (precision[(i, i)] * precision[(m, m)]).sqrt();
                    Some((-precision[(i, m)] / denom).clamp(-1.0, 1.0))
                })
                .collect();
            return (values, false);
        }
    }
    let values = (0..m)
        .map(|i| residual_correlation(columns, i, y))
        .collect();
    (values, true)
}

fn residual_correlation(columns: &[&[f64]], target: usize, y: &[f64]) -> Option<f64> {
    let n = y.len();
    let controls: Vec<&[f64]> = columns
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target)
        .map(|(_, c)| *c)
        .collect();
    let design = DMatrix::from_fn(n, controls.len() + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            controls[c - 1][r]
        }
    });
    let svd = design.clone().svd(true, true);
    let residual = |v: &[f64]| -> Option<Vec<f64>> {
        let rhs = DVector::from_column_slice(v);
        let beta = svd.solve(&rhs, 1e-12).ok()?;
        let fitted = &design * beta;
        let res: Vec<f64> = v.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
        let scale: f64 = {
            let m = v.iter().sum::<f64>() / n as f64;
            v.iter().map(|x| (x - m).powi(2)).sum()
        };
        let energy: f64 = res.iter().map(|r| r * r).sum();
        (energy > 1e-20 * scale.max(f64::MIN_POSITIVE)).then_some(res)
    };
    let rx = residual(columns[target])?;
    let ry = residual(y)?;
    pearson(&rx, &ry)
}
