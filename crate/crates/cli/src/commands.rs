//! Subcommand implementations. Every study writes deterministic CSV files
//! plus a `report.json`; wall time appears only in the JSON.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use log::info;
use paramstudy_core::bench::run_pipeline;
use paramstudy_core::design::{sample_lhs, sample_monte_carlo, sample_morris, sample_saltelli};
use paramstudy_core::sa::{correlations, moat, sobol, ResultTable};
use paramstudy_core::spatial::{compare, read_pgm, write_pgm, MetricKind, SpatialError};
use paramstudy_core::tune::tune;
use paramstudy_core::{ParamSet, ParameterSpace, SampleDesign};
use serde::Serialize;
use serde_json::json;

use crate::config::{point_from_values, MethodConfig, Sampling, Study};
use crate::study::Evaluator;
use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<File>, CliError> {
    let path = dir.join(name);
    csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|e| io_err(&path, e))
}

/// Writes `report.json`, recording the effective configuration (after
/// command-line overrides) alongside the results.
fn write_report(study: &Study, dir: &Path, mut report: serde_json::Value) -> Result<(), CliError> {
    report["config"] = json!(study.config);
    write_json(dir, "report.json", &report)
}

fn out_dir(study: &Study) -> Result<&Path, CliError> {
    let dir = study.config.output.dir.as_path();
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    Ok(dir)
}

/// One row per point: axis values and the metric (empty when it failed).
fn write_points_csv(
    dir: &Path,
    name: &str,
    space: &ParameterSpace,
    points: &[ParamSet],
    ys: &[Result<f64, String>],
) -> Result<(), CliError> {
    let mut w = csv_writer(dir, name)?;
    let mut header = vec!["point".to_string()];
    header.extend(space.axes().iter().map(|a| a.name().to_string()));
    header.extend(["metric".to_string(), "error".to_string()]);
    let path = dir.join(name);
    w.write_record(&header).map_err(|e| io_err(&path, e))?;
    for (i, (p, y)) in points.iter().zip(ys).enumerate() {
        let mut row = vec![i.to_string()];
        let values = space.values(p).expect("design points are on the grid");
        row.extend(values.iter().map(|v| v.to_string()));
        match y {
            Ok(v) => row.extend([v.to_string(), String::new()]),
            Err(e) => row.extend([String::new(), e.clone()]),
        }
        w.write_record(&row).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

fn write_events(study: &Study, dir: &Path, eval: &Evaluator) -> Result<(), CliError> {
    if study.config.output.events {
        let path = dir.join("events.csv");
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        eval.write_events_csv(BufWriter::new(file))
            .map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

/// Shared flow of the sensitivity-analysis commands: draw the design,
/// evaluate it, then summarize. Failed points abort with exit code 3 after
/// the partial results are written.
fn sensitivity(
    study: &Study,
    design: SampleDesign,
    analyze: impl FnOnce(&ResultTable, &Path) -> Result<serde_json::Value, CliError>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let dir = out_dir(study)?;
    let mut eval = Evaluator::new(study)?;
    info!(
        "{}: {} design points",
        study.config.method.name(),
        design.len()
    );
    let ys = eval.evaluate(&design.points)?;
    write_points_csv(dir, "design.csv", &study.space, &design.points, &ys)?;
    write_events(study, dir, &eval)?;
    let failed: Vec<String> = ys
        .iter()
        .enumerate()
        .filter_map(|(i, y)| y.as_ref().err().map(|e| format!("point {i}: {e}")))
        .collect();
    let mut report = json!({
        "method": study.config.method.name(),
        "seed": study.config.seed,
        "design": design.kind,
        "evaluations": ys.len(),
        "failed": failed,
        "execution": eval.summary(),
    });
    if !failed.is_empty() {
        report["partial"] = json!(true);
        report["wall_time_ms"] = json!(started.elapsed().as_secs_f64() * 1e3);
        write_report(study, dir, report)?;
        return Err(CliError::Execution(format!(
            "{} of {} points failed; partial results in {}",
            failed.len(),
            ys.len(),
            dir.display()
        )));
    }
    let values: Vec<f64> = ys.into_iter().map(|y| y.expect("checked above")).collect();
    let n = values.len();
    let table = ResultTable::new(study.space.clone(), design, values)
        .map_err(|e| CliError::Execution(e.to_string()))?;
    report["result"] = analyze(&table, dir)?;
    report["wall_time_ms"] = json!(started.elapsed().as_secs_f64() * 1e3);
    write_report(study, dir, report)?;
    println!(
        "{}: {n} evaluations, results in {}",
        study.config.method.name(),
        dir.display()
    );
    Ok(())
}

fn design_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("method: {e}"))
}

pub fn cmd_moat(study: &Study) -> Result<(), CliError> {
    let MethodConfig::Moat { r, p } = study.config.method else {
        unreachable!()
    };
    let design = sample_morris(&study.space, r, p, study.config.seed).map_err(design_error)?;
    sensitivity(study, design, |table, dir| {
        let res = moat(table).map_err(|e| CliError::Execution(e.to_string()))?;
        let path = dir.join("moat.csv");
        let mut w = csv_writer(dir, "moat.csv")?;
        w.write_record(["axis", "mu", "mu_star", "sigma"])
            .map_err(|e| io_err(&path, e))?;
        for a in &res.axes {
            w.write_record([
                a.name.clone(),
                a.mu.to_string(),
                a.mu_star.to_string(),
                a.sigma.to_string(),
            ])
            .map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(serde_json::to_value(res).expect("serializable"))
    })
}

pub fn cmd_correlate(study: &Study) -> Result<(), CliError> {
    let MethodConfig::Correlate { sample, n } = study.config.method else {
        unreachable!()
    };
    let design = match sample {
        Sampling::Lhs => sample_lhs(&study.space, n, study.config.seed),
        Sampling::MonteCarlo => sample_monte_carlo(&study.space, n, study.config.seed),
    }
    .map_err(design_error)?;
    sensitivity(study, design, |table, dir| {
        let res = correlations(table).map_err(|e| CliError::Execution(e.to_string()))?;
        let path = dir.join("correlations.csv");
        let mut w = csv_writer(dir, "correlations.csv")?;
        w.write_record(["axis", "cc", "pcc", "rcc", "prcc", "note"])
            .map_err(|e| io_err(&path, e))?;
        for a in &res.axes {
            w.write_record([
                a.name.clone(),
                num(a.cc),
                num(a.pcc),
                num(a.rcc),
                num(a.prcc),
                a.note.clone().unwrap_or_default(),
            ])
            .map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(serde_json::to_value(res).expect("serializable"))
    })
}

pub fn cmd_vbd(study: &Study) -> Result<(), CliError> {
    let MethodConfig::Vbd { n } = study.config.method else {
        unreachable!()
    };
    let design = sample_saltelli(&study.space, n, study.config.seed).map_err(design_error)?;
    sensitivity(study, design, |table, dir| {
        let res = sobol(table).map_err(|e| CliError::Execution(e.to_string()))?;
        let path = dir.join("sobol.csv");
        let mut w = csv_writer(dir, "sobol.csv")?;
        w.write_record(["axis", "s_i", "s_ti"])
            .map_err(|e| io_err(&path, e))?;
        for a in &res.axes {
            w.write_record([a.name.clone(), num(a.s_i), num(a.s_ti)])
                .map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(serde_json::to_value(res).expect("serializable"))
    })
}

pub fn cmd_tune(study: &Study) -> Result<(), CliError> {
    let MethodConfig::Tune { tuner } = &study.config.method else {
        unreachable!()
    };
    let started = Instant::now();
    let dir = out_dir(study)?;
    let mut eval = Evaluator::new(study)?;
    let mut fatal = None;
    let res = tune(&study.space, tuner, |batch| match eval.evaluate(batch) {
        Ok(ys) => ys,
        Err(e) => {
            let msg = e.to_string();
            fatal.get_or_insert(e);
            vec![Err(msg); batch.len()]
        }
    })
    .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(e) = fatal {
        return Err(e);
    }

    let path = dir.join("trace.csv");
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    res.write_trace_csv(BufWriter::new(file))
        .map_err(|e| io_err(&path, e))?;
    write_events(study, dir, &eval)?;
    let best_values = res.best.as_ref().map(|p| {
        study
            .space
            .axes()
            .iter()
            .zip(study.space.values(p).expect("on grid"))
            .map(|(a, v)| (a.name().to_string(), v.to_string()))
            .collect::<std::collections::BTreeMap<_, _>>()
    });
    let report = json!({
        "method": "tune",
        "seed": study.config.seed,
        "metric": study.config.workflow.metric,
        "result": res,
        "best_params": best_values,
        "execution": eval.summary(),
        "wall_time_ms": started.elapsed().as_secs_f64() * 1e3,
    });
    write_report(study, dir, report)?;
    match (&res.best_key, res.best_value) {
        (Some(key), Some(v)) => {
            println!(
                "best {} = {v:.6} at {key}",
                study.config.workflow.metric.as_str()
            );
            println!(
                "{} evaluations ({:.3e}% of {:.3e} grid points), stop: {:?}",
                res.evaluations, res.fraction_visited_percent, res.grid_size, res.stop
            );
            Ok(())
        }
        _ => Err(CliError::Execution("every evaluation failed".into())),
    }
}

pub fn cmd_run(study: &Study) -> Result<(), CliError> {
    let MethodConfig::Run { points } = &study.config.method else {
        unreachable!()
    };
    let started = Instant::now();
    let dir = out_dir(study)?;
    let sets: Vec<ParamSet> = if points.is_empty() {
        vec![study.space.center()]
    } else {
        points
            .iter()
            .map(|p| point_from_values(&study.space, p).map_err(CliError::Config))
            .collect::<Result<_, _>>()?
    };
    let mut eval = Evaluator::new(study)?;
    let ys = eval.evaluate(&sets)?;
    write_points_csv(dir, "results.csv", &study.space, &sets, &ys)?;
    write_events(study, dir, &eval)?;
    if study.config.output.masks {
        let masks = dir.join("masks");
        fs::create_dir_all(&masks).map_err(|e| io_err(&masks, e))?;
        for (i, p) in sets.iter().enumerate() {
            let wf = &study.workflow;
            if let Ok(params) = wf.bindings.resolve_set(&wf.defaults, &study.space, p) {
                let path = masks.join(format!("point{i}.pgm"));
                write_pgm(&path, &run_pipeline(&wf.scene, &params).mask)
                    .map_err(|e| io_err(&path, e))?;
            }
        }
    }
    let failed = ys.iter().filter(|y| y.is_err()).count();
    let report = json!({
        "method": "run",
        "metric": study.config.workflow.metric,
        "points": sets.iter().map(|p| study.space.key(p)).collect::<Vec<_>>(),
        "failed": failed,
        "partial": failed > 0,
        "execution": eval.summary(),
        "wall_time_ms": started.elapsed().as_secs_f64() * 1e3,
    });
    write_report(study, dir, report)?;
    for (p, y) in sets.iter().zip(&ys) {
        match y {
            Ok(v) => println!("{} {v:.6}", study.space.key(p)),
            Err(e) => println!("{} failed: {e}", study.space.key(p)),
        }
    }
    if failed > 0 {
        return Err(CliError::Execution(format!(
            "{failed} of {} points failed",
            sets.len()
        )));
    }
    Ok(())
}

pub fn cmd_compare(a: &Path, b: &Path, metric: MetricKind) -> Result<(), CliError> {
    let ma = read_pgm(a).map_err(|e| CliError::Config(format!("{}: {e}", a.display())))?;
    let mb = read_pgm(b).map_err(|e| CliError::Config(format!("{}: {e}", b.display())))?;
    match compare(metric, &ma, &mb) {
        Ok(v) => {
            println!("{:.6}", v.value);
            Ok(())
        }
        Err(e @ SpatialError::ShapeMismatch { .. }) => Err(CliError::Config(e.to_string())),
        Err(e) => Err(CliError::Execution(e.to_string())),
    }
}
