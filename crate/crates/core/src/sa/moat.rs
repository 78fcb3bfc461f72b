use serde::Serialize;

use super::stats::{mean, sample_std};
use super::{ResultTable, SaError};
use crate::design::DesignMeta;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoatAxis {
    pub name: String,
    pub mu: f64,
    pub mu_star: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoatResult {
    pub r: usize,
    pub axes: Vec<MoatAxis>,
    pub warnings: Vec<String>,
}

/// Elementary effects `(y_after - y_before) / delta` for every step of every
/// trajectory, as `(axis, effect)` pairs in trajectory order.
pub fn elementary_effects(table: &ResultTable) -> Result<Vec<Vec<(usize, f64)>>, SaError> {
    let DesignMeta::Morris(meta) = &table.design().meta else {
        return Err(SaError::WrongDesign {
            expected: "morris",
            found: format!("{:?}", table.design().kind),
        });
    };
    let k = table.space().k();
    let ys = table.ys();
    if ys.len() != meta.r * (k + 1) || meta.trajectories.len() != meta.r {
        return Err(SaError::IncompleteTable {
            rows: ys.len(),
            points: meta.r * (k + 1),
        });
    }
    meta.trajectories
        .iter()
        .enumerate()
        .map(|(t, steps)| {
            if steps.len() != k {
                return Err(SaError::CorruptDesign(format!(
                    "trajectory {t} has {} steps, expected {k}",
                    steps.len()
                )));
            }
            steps
                .iter()
                .enumerate()
                .map(|(j, step)| {
                    if step.delta == 0.0 || !step.delta.is_finite() {
                        return Err(SaError::CorruptDesign(format!(
                            "zero delta in trajectory {t}, step {j}"
                        )));
                    }
                    let before = ys[t * (k + 1) + j];
                    let after = ys[t * (k + 1) + j + 1];
                    Ok((step.axis, (after - before) / step.delta))
                })
                .collect()
        })
        .collect()
}

pub fn moat(table: &ResultTable) -> Result<MoatResult, SaError> {
    let effects = elementary_effects(table)?;
    let k = table.space().k();
    let mut per_axis = vec![Vec::with_capacity(effects.len()); k];
    for (axis, ee) in effects.iter().flatten() {
        if *axis >= k {
            return Err(SaError::CorruptDesign(format!(
                "step moves unknown axis {axis}"
            )));
        }
        per_axis[*axis].push(*ee);
    }
    let r = effects.len();
    let mut warnings = Vec::new();
    if r == 1 {
        warnings.push("r = 1: sigma is undefined and reported as 0".to_string());
    }
    let axes = table
        .space()
        .axes()
        .iter()
        .zip(&per_axis)
        .map(|(axis, ee)| {
            let all_equal = ee.iter().all(|&x| x == ee[0]);
            let (mu, mu_star) = if all_equal {
                (ee[0], ee[0].abs())
            } else {
                (
                    mean(ee),
                    ee.iter().map(|x| x.abs()).sum::<f64>() / ee.len() as f64,
                )
            };
            MoatAxis {
                name: axis.name().to_string(),
                mu,
                mu_star,
                sigma: sample_std(ee),
            }
        })
        .collect();
    Ok(MoatResult { r, axes, warnings })
}
