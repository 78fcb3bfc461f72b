//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::Instant;

use paramstudy_core::bench::{
    levelset_space, synthetic_space, watershed_space, watershed_vbd_space, SceneSpec,
    SyntheticParams, SyntheticScene, SyntheticWorkflow,
};
use paramstudy_core::design::{sample_lhs, sample_morris, sample_saltelli, DesignKind, DesignMeta};
use paramstudy_core::graph::{build_compact, build_replica, replay_equivalence, Workflow};
use paramstudy_core::rng::seeded;
use paramstudy_core::runtime::{
    run, Device, LevelConfig, Policy, RegionId, RuntimeConfig, SchedulerKind, Storage,
    StorageConfig, Visibility,
};
use paramstudy_core::sa::{correlations, moat, sobol, ResultTable};
use paramstudy_core::space::scale_to_unit;
use paramstudy_core::spatial::{
    brute_force_join, compare, extract_objects, spatial_join, write_pgm, Connectivity, Mask,
    MetricKind,
};
use paramstudy_core::{ParamSet, ParameterAxis, ParameterSpace, SampleDesign};
use rand::Rng;
use serde_json::{json, Value};
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);
type Transform = (&'static str, fn(f64) -> f64);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------- helpers

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_paramstudy")
}

fn paramstudy(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn paramstudy")
}

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

/// Runs a study subcommand and returns its `report.json`.
fn study(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Result<Value, String> {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = paramstudy(&args);
    if !o.status.success() {
        return Err(format!(
            "`paramstudy {}` exited with {:?}: {}",
            args.join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    let text = fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn unit_space(k: usize, levels: i64) -> ParameterSpace {
    ParameterSpace::new(
        (0..k)
            .map(|i| ParameterAxis::integer(format!("u{}", i + 1), 0, levels - 1, 1).unwrap())
            .collect(),
    )
    .unwrap()
}

fn evaluate(
    space: &ParameterSpace,
    design: SampleDesign,
    f: impl Fn(&[f64]) -> f64,
) -> ResultTable {
    let s = space.clone();
    ResultTable::evaluate(space.clone(), design, |p| f(&scale_to_unit(&s, p).unwrap())).unwrap()
}

// ------------------------------------------------------------ criteria

fn design_cardinalities() -> Outcome {
    let morris15 = sample_morris(&watershed_space(), 15, None, 1).map_err(|e| e.to_string())?;
    ensure(watershed_space().k() == 15 && morris15.len() == 240, || {
        format!("Morris k=15 r=15 gave {} points", morris15.len())
    })?;
    let morris7 = sample_morris(&levelset_space(), 5, None, 1).map_err(|e| e.to_string())?;
    ensure(levelset_space().k() == 7 && morris7.len() == 40, || {
        format!("Morris k=7 r=5 gave {} points", morris7.len())
    })?;
    let saltelli = sample_saltelli(&watershed_vbd_space(), 200, 1).map_err(|e| e.to_string())?;
    ensure(
        watershed_vbd_space().k() == 8 && saltelli.len() == 2000,
        || format!("Saltelli k=8 n=200 gave {} points", saltelli.len()),
    )?;
    let lhs = sample_lhs(&synthetic_space(), 400, 1).map_err(|e| e.to_string())?;
    ensure(lhs.len() == 400, || {
        format!("LHS n=400 gave {} points", lhs.len())
    })?;

    // the same counts as evaluations logged by the CLI
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "moat.json",
        &json!({"space": {"preset": "levelset"}, "workflow": {"metric": "pixel-diff",
            "bindings": {"min_size": "MinSize", "max_size": "MaxSize"}},
            "method": {"kind": "moat", "r": 5}, "output": {"events": false}}),
    );
    let r = study("moat", &cfg, &tmp.path().join("moat"), &[])?;
    ensure(r["evaluations"] == 40, || {
        format!("CLI moat logged {}", r["evaluations"])
    })?;
    let cfg = write_config(
        tmp.path(),
        "vbd.json",
        &json!({"space": {"preset": "levelset-vbd"}, "workflow": {"bindings": {"min_size": "MinSize"}},
            "method": {"kind": "vbd", "n": 50}, "output": {"events": false}}),
    );
    let r = study("vbd", &cfg, &tmp.path().join("vbd"), &[])?;
    ensure(r["evaluations"] == 350, || {
        format!("CLI vbd k=5 n=50 logged {}", r["evaluations"])
    })?;
    let cfg = write_config(
        tmp.path(),
        "cor.json",
        &json!({"space": {"preset": "synthetic"}, "method": {"kind": "correlate", "n": 400},
            "output": {"events": false}}),
    );
    let r = study("correlate", &cfg, &tmp.path().join("cor"), &[])?;
    ensure(r["evaluations"] == 400, || {
        format!("CLI correlate logged {}", r["evaluations"])
    })?;
    Ok("240 / 40 / 2000 / 400 points; CLI logged 40, 350, 400 evaluations".into())
}

fn moat_oracle() -> Outcome {
    let space = unit_space(3, 11);
    let design = sample_morris(&space, 20, None, 7).map_err(|e| e.to_string())?;
    let res = moat(&evaluate(&space, design.clone(), |u| {
        3.0 * u[0] + u[1] + 0.0 * u[2]
    }))
    .map_err(|e| e.to_string())?;
    let expect = [3.0, 1.0, 0.0];
    for (a, e) in res.axes.iter().zip(expect) {
        ensure(
            close(a.mu_star, e, 1e-9) && close(a.sigma, 0.0, 1e-9),
            || {
                format!(
                    "{}: mu*={} sigma={} (expected {e}, 0)",
                    a.name, a.mu_star, a.sigma
                )
            },
        )?;
    }
    let res = moat(&evaluate(&space, design, |u| u[0] * u[1] + u[2])).map_err(|e| e.to_string())?;
    let s: Vec<f64> = res.axes.iter().map(|a| a.sigma).collect();
    ensure(s[0] > 0.0 && s[1] > 0.0 && close(s[2], 0.0, 1e-9), || {
        format!("multiplicative term sigmas {s:?}")
    })?;
    Ok(format!(
        "linear mu*=(3,1,0), sigma=0 within 1e-9; u1*u2 sigma=({:.3}, {:.3}, {:.1e})",
        s[0], s[1], s[2]
    ))
}

fn sobol_oracle() -> Outcome {
    let space = unit_space(2, 1001);
    let design = sample_saltelli(&space, 4096, 3).map_err(|e| e.to_string())?;
    let add = sobol(&evaluate(&space, design.clone(), |u| 2.0 * u[0] + u[1]))
        .map_err(|e| e.to_string())?;
    let si: Vec<f64> = add.axes.iter().map(|a| a.s_i.unwrap()).collect();
    let sti: Vec<f64> = add.axes.iter().map(|a| a.s_ti.unwrap()).collect();
    ensure(close(si[0], 0.8, 0.05) && close(si[1], 0.2, 0.05), || {
        format!("additive S_i {si:?}")
    })?;
    ensure(
        close(sti[0], si[0], 0.05) && close(sti[1], si[1], 0.05),
        || format!("additive S_Ti {sti:?} vs S_i {si:?}"),
    )?;
    let sum = add.sum_s_i.unwrap();
    ensure((0.9..=1.1).contains(&sum), || format!("sum S_i = {sum}"))?;
    let inter = sobol(&evaluate(&space, design, |u| (u[0] - 0.5) * (u[1] - 0.5)))
        .map_err(|e| e.to_string())?;
    for a in &inter.axes {
        let (s, st) = (a.s_i.unwrap(), a.s_ti.unwrap());
        ensure(close(s, 0.0, 0.1) && close(st, 1.0, 0.1), || {
            format!("interaction {}: S_i={s} S_Ti={st}", a.name)
        })?;
    }
    Ok(format!(
        "S=({:.3}, {:.3}), S_T=({:.3}, {:.3}), sum {:.3}; interaction S_T=({:.3}, {:.3})",
        si[0],
        si[1],
        sti[0],
        sti[1],
        sum,
        inter.axes[0].s_ti.unwrap(),
        inter.axes[1].s_ti.unwrap()
    ))
}

fn full_factorial(space: &ParameterSpace) -> SampleDesign {
    let mut points = vec![vec![]];
    for axis in space.axes() {
        points = points
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..axis.level_count()).map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    SampleDesign {
        kind: DesignKind::MonteCarlo,
        seed: 0,
        points: points.into_iter().map(ParamSet::new).collect(),
        meta: DesignMeta::MonteCarlo,
    }
}

fn correlation_oracle() -> Outcome {
    let space = unit_space(2, 101);
    let d = sample_lhs(&space, 200, 4).map_err(|e| e.to_string())?;
    let pos = correlations(&evaluate(&space, d.clone(), |u| u[0])).map_err(|e| e.to_string())?;
    let neg = correlations(&evaluate(&space, d, |u| -u[0])).map_err(|e| e.to_string())?;
    let (cp, cn) = (pos.axes[0].cc.unwrap(), neg.axes[0].cc.unwrap());
    ensure(close(cp, 1.0, 1e-9) && close(cn, -1.0, 1e-9), || {
        format!("cc = {cp}, {cn}")
    })?;

    let space3 = unit_space(3, 51);
    let d = sample_lhs(&space3, 120, 8).map_err(|e| e.to_string())?;
    let f = |u: &[f64]| u[0] - 0.5 * u[1] + 0.2 * u[2] * u[0];
    let base = correlations(&evaluate(&space3, d.clone(), f)).map_err(|e| e.to_string())?;
    let transforms: [Transform; 3] = [
        ("exp", f64::exp),
        ("cube", |v| v * v * v),
        ("affine", |v| 4.0 * v + 2.0),
    ];
    for (name, g) in transforms {
        let r =
            correlations(&evaluate(&space3, d.clone(), |u| g(f(u)))).map_err(|e| e.to_string())?;
        for (a, b) in base.axes.iter().zip(&r.axes) {
            ensure(a.rcc == b.rcc, || {
                format!("rcc changed under {name}: {:?} vs {:?}", a.rcc, b.rcc)
            })?;
        }
    }

    // full factorial: mutually orthogonal columns, and the non-linear terms
    // are orthogonal to the other axes
    let space_o = unit_space(3, 5);
    let t = evaluate(&space_o, full_factorial(&space_o), |u| {
        u[0] + 0.3 * (u[1] - 0.5).powi(2) + 0.1 * u[0] * u[0]
    });
    let r = correlations(&t).map_err(|e| e.to_string())?;
    for a in &r.axes {
        let (pcc, cc) = (a.pcc.unwrap(), a.cc.unwrap());
        ensure(close(pcc, cc, 1e-9), || {
            format!("{}: pcc {pcc} vs cc {cc}", a.name)
        })?;
    }
    Ok(
        "cc = ±1 within 1e-9; rcc exact under exp/cube/affine; pcc = cc on orthogonal design"
            .into(),
    )
}

fn tune_config(variant: &str, seed: u64) -> Value {
    json!({
        "space": {"preset": "synthetic"},
        "workflow": {"metric": "dice", "reference": "default-params"},
        "method": {"kind": "tune", "tuner": {"variant": variant, "budget": 100}},
        "runtime": {"workers": 2, "scheduler": "dlas"},
        "output": {"events": false},
        "seed": seed,
    })
}

fn tuning() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let mut lines = Vec::new();
    for variant in ["nelder-mead", "pro", "ga"] {
        let cfg = write_config(
            tmp.path(),
            &format!("{variant}.json"),
            &tune_config(variant, 1),
        );
        let r = study("tune", &cfg, &tmp.path().join(variant), &[])?;
        let res = &r["result"];
        let best = res["best_value"].as_f64().ok_or("no best value")?;
        let evals = res["evaluations"].as_u64().unwrap();
        let grid = res["grid_size"].as_f64().unwrap();
        let fraction = res["fraction_visited_percent"].as_f64().unwrap();
        ensure(best >= 0.95, || format!("{variant}: best Dice {best}"))?;
        ensure(evals <= 100, || format!("{variant}: {evals} evaluations"))?;
        ensure(grid >= 1e7 && fraction <= 0.0009, || {
            format!("{variant}: visited {fraction}% of {grid}")
        })?;
        let trace = fs::read_to_string(tmp.path().join(variant).join("trace.csv")).unwrap();
        let fresh = trace
            .lines()
            .skip(1)
            .filter(|l| l.contains(",false,"))
            .count();
        ensure(fresh as u64 == evals, || {
            format!("{variant}: trace has {fresh} fresh rows for {evals}")
        })?;
        lines.push(format!(
            "{variant} {best:.4} in {evals} evals ({fraction:.2e}%)"
        ));
    }
    let mut bests = Vec::new();
    for seed in 0..50u64 {
        let cfg = write_config(tmp.path(), "ga-seed.json", &tune_config("ga", seed));
        let r = study("tune", &cfg, &tmp.path().join("ga-seed"), &[])?;
        ensure(r["result"]["evaluations"].as_u64().unwrap() <= 100, || {
            format!("seed {seed} over budget")
        })?;
        bests.push(r["result"]["best_value"].as_f64().unwrap());
    }
    let mean = bests.iter().sum::<f64>() / bests.len() as f64;
    let sd =
        (bests.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (bests.len() - 1) as f64).sqrt();
    ensure(sd.is_finite(), || "GA std-dev is not finite".into())?;
    lines.push(format!(
        "GA over 50 seeds: mean {mean:.4}, std-dev {:.2}%",
        100.0 * sd
    ));
    Ok(lines.join("; "))
}

fn compact_graph() -> Outcome {
    let scene = SyntheticScene::render(&SceneSpec::default()).map_err(|e| e.to_string())?;
    let wf =
        SyntheticWorkflow::self_referential(scene, SyntheticParams::default(), MetricKind::Dice)
            .map_err(|e| e.to_string())?;
    let space = synthetic_space();
    let workflow = Workflow::new(space.clone(), wf.stages(&space)).map_err(|e| e.to_string())?;
    let (ti, _) = space.axis("threshold").unwrap();
    let mut counts = Vec::new();
    for m in [2usize, 4, 8, 16, 32] {
        // one normalization, m distinct thresholds
        let sets: Vec<ParamSet> = (0..m)
            .map(|i| {
                let mut p = space.center();
                p.levels_mut()[ti] = 100 + 3 * i;
                p
            })
            .collect();
        let compact = build_compact(&workflow, &sets).map_err(|e| e.to_string())?;
        let replica = build_replica(&workflow, &sets).map_err(|e| e.to_string())?;
        ensure(compact.stage_vertex_count() == 1 + 2 * m, || {
            format!("m={m}: compact {}", compact.stage_vertex_count())
        })?;
        ensure(replica.stage_vertex_count() == 3 * m, || {
            format!("m={m}: replica {}", replica.stage_vertex_count())
        })?;
        let same = replay_equivalence(&workflow, &sets, &wf).map_err(|e| e.to_string())?;
        ensure(same, || {
            format!("m={m}: replica and compact outputs differ")
        })?;
        counts.push(format!(
            "{}/{}",
            compact.stage_vertex_count(),
            replica.stage_vertex_count()
        ));
    }
    Ok(format!(
        "compact/replica vertices {}; outputs bit-identical",
        counts.join(", ")
    ))
}

fn storage_and_scheduling() -> Outcome {
    let trace_hits = |policy: Policy| {
        let cfg = StorageConfig {
            levels: vec![
                LevelConfig::new(Device::Ram, 2, Visibility::Local, policy, 1.0),
                LevelConfig::new(
                    Device::Disk,
                    1 << 20,
                    Visibility::Global,
                    Policy::Fifo,
                    10.0,
                ),
            ],
        };
        let mut s = Storage::new(&cfg, 1).unwrap();
        let one = || Arc::new(vec![1u8]);
        let (a, b, c) = (RegionId(0), RegionId(1), RegionId(2));
        s.put(a, one(), 0).unwrap();
        s.put(b, one(), 0).unwrap();
        s.get(a, 0).unwrap();
        s.put(c, one(), 0).unwrap();
        s.get(a, 0).unwrap();
        s.stats()[0].hits
    };
    let (lru, fifo) = (trace_hits(Policy::Lru), trace_hits(Policy::Fifo));
    ensure(lru == 2 && fifo == 1, || {
        format!("A B A C A: LRU {lru} hits, FIFO {fifo}")
    })?;

    // 4 normalizations, each shared by 8 segmentations, on 2 workers
    let scene = SyntheticScene::render(&SceneSpec::default()).map_err(|e| e.to_string())?;
    let wf =
        SyntheticWorkflow::self_referential(scene, SyntheticParams::default(), MetricKind::Dice)
            .map_err(|e| e.to_string())?;
    let space = synthetic_space();
    let workflow = Workflow::new(space.clone(), wf.stages(&space)).map_err(|e| e.to_string())?;
    let (ti, _) = space.axis("threshold").unwrap();
    let (mi, _) = space.axis("target_mean").unwrap();
    let sets: Vec<ParamSet> = (0..32)
        .map(|i| {
            let mut p = space.center();
            p.levels_mut()[mi] = 30 + 10 * (i / 8);
            p.levels_mut()[ti] = 100 + 4 * (i % 8);
            p
        })
        .collect();
    let graph = build_compact(&workflow, &sets).map_err(|e| e.to_string())?;
    let cfg = |scheduler| RuntimeConfig {
        workers: 2,
        scheduler,
        ..RuntimeConfig::default()
    };
    let fcfs = run(&graph, &wf, &cfg(SchedulerKind::Fcfs)).map_err(|e| e.to_string())?;
    let dlas = run(&graph, &wf, &cfg(SchedulerKind::Dlas)).map_err(|e| e.to_string())?;
    let (hf, hd) = (fcfs.level0_hit_rate(), dlas.level0_hit_rate());
    ensure(hd > hf, || {
        format!("level-0 hit rate DLAS {hd} vs FCFS {hf}")
    })?;
    ensure(dlas.virtual_time_ns <= fcfs.virtual_time_ns, || {
        format!(
            "virtual time DLAS {} vs FCFS {}",
            dlas.virtual_time_ns, fcfs.virtual_time_ns
        )
    })?;

    // capacity invariant on fuzzed runs
    let mut rng = seeded(99);
    let mut fuzzed = 0;
    for _ in 0..40 {
        let n = rng.random_range(1..24);
        let sets: Vec<ParamSet> = (0..n)
            .map(|_| {
                let mut p = space.center();
                p.levels_mut()[mi] = rng.random_range(30..34);
                p.levels_mut()[ti] = rng.random_range(100..110);
                p
            })
            .collect();
        let graph = build_compact(&workflow, &sets).map_err(|e| e.to_string())?;
        let ram = rng.random_range(40_000..200_000u64);
        let ssd = rng.random_range(80_000..400_000u64);
        let config = RuntimeConfig {
            workers: rng.random_range(1..5),
            scheduler: if rng.random_bool(0.5) {
                SchedulerKind::Dlas
            } else {
                SchedulerKind::Fcfs
            },
            storage: StorageConfig {
                levels: vec![
                    LevelConfig::new(Device::Ram, ram, Visibility::Local, Policy::Lru, 0.1),
                    LevelConfig::new(Device::Ssd, ssd, Visibility::Global, Policy::Fifo, 1.0),
                    LevelConfig::new(
                        Device::Disk,
                        u64::MAX,
                        Visibility::Global,
                        Policy::Fifo,
                        5.0,
                    ),
                ],
            },
            ..RuntimeConfig::default()
        };
        let report = run(&graph, &wf, &config).map_err(|e| e.to_string())?;
        let caps = [ram, ssd, u64::MAX];
        for e in &report.events {
            if let (Some(level), Some(occ)) = (e.level, e.occupied) {
                ensure(occ <= caps[level], || {
                    format!("level {level} holds {occ} > {}", caps[level])
                })?;
            }
        }
        fuzzed += 1;
    }
    Ok(format!(
        "LRU 2 vs FIFO 1 hits; level-0 hit rate DLAS {hd:.3} > FCFS {hf:.3}; virtual time {} <= {} ns; {fuzzed} fuzzed runs within capacity",
        dlas.virtual_time_ns, fcfs.virtual_time_ns
    ))
}

fn square(x0: usize, y0: usize, side: usize) -> Mask {
    Mask::from_fn(8, 8, |x, y| {
        (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y)
    })
}

fn random_mask(rng: &mut impl Rng) -> Mask {
    let discs: Vec<(f64, f64, f64)> = (0..rng.random_range(0..8))
        .map(|_| {
            (
                rng.random_range(0.0..64.0),
                rng.random_range(0.0..64.0),
                rng.random_range(1.0..12.0),
            )
        })
        .collect();
    let noise = rng.random_range(0.0..0.1);
    Mask::from_fn(64, 64, |x, y| {
        let (x, y) = (x as f64, y as f64);
        discs
            .iter()
            .any(|&(cx, cy, r)| (x - cx).powi(2) + (y - cy).powi(2) <= r * r)
            || rng.random_bool(noise)
    })
}

fn spatial_metrics() -> Outcome {
    let (a, b) = (square(0, 0, 2), square(1, 1, 2));
    let value = |k| compare(k, &a, &b).unwrap().value;
    let got = [
        value(MetricKind::Dice),
        value(MetricKind::Jaccard),
        value(MetricKind::OverlapRatio),
        value(MetricKind::PixelDiff),
    ];
    ensure(got == [0.25, 1.0 / 7.0, 0.25, 6.0], || {
        format!("squares fixture gave {got:?}")
    })?;

    // the CLI prints the same values
    let tmp = TempDir::new().unwrap();
    let (pa, pb) = (tmp.path().join("a.pgm"), tmp.path().join("b.pgm"));
    write_pgm(&pa, &a).unwrap();
    write_pgm(&pb, &b).unwrap();
    let o = paramstudy(&[
        "compare",
        pa.to_str().unwrap(),
        pb.to_str().unwrap(),
        "--metric",
        "jaccard",
    ]);
    let printed = String::from_utf8_lossy(&o.stdout).trim().to_string();
    ensure(o.status.success() && printed == "0.142857", || {
        format!("CLI jaccard printed `{printed}`")
    })?;

    let mut rng = seeded(2024);
    let mut pairs = 0;
    for i in 0..100 {
        let (ma, mb) = (random_mask(&mut rng), random_mask(&mut rng));
        let conn = if i % 2 == 0 {
            Connectivity::Four
        } else {
            Connectivity::Eight
        };
        let (oa, ob) = (extract_objects(&ma, conn), extract_objects(&mb, conn));
        let fast = spatial_join(&oa, &ob).map_err(|e| e.to_string())?;
        let slow = brute_force_join(&oa, &ob).map_err(|e| e.to_string())?;
        ensure(fast == slow, || {
            format!("pair {i}: join differs from brute force")
        })?;
        pairs += fast.len();
        let d = compare(MetricKind::Dice, &ma, &mb).unwrap().value;
        let j = compare(MetricKind::Jaccard, &ma, &mb).unwrap().value;
        ensure(close(j, d / (2.0 - d), 1e-12), || {
            format!("pair {i}: jaccard {j} vs dice {d}")
        })?;
    }
    Ok(format!(
        "squares 0.25 / 1/7 / 0.25 / 6; 100 random pairs ({pairs} intersecting objects) match brute force; jaccard = dice/(2-dice)"
    ))
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension().is_some_and(|x| x == "csv")).then(|| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let base = json!({"space": {"preset": "synthetic"}, "runtime": {"workers": 3, "scheduler": "dlas"}, "seed": 17, "batch": 20});
    let methods = [
        ("moat", json!({"kind": "moat", "r": 4})),
        (
            "correlate",
            json!({"kind": "correlate", "sample": "monte-carlo", "n": 60}),
        ),
        ("vbd", json!({"kind": "vbd", "n": 12})),
        (
            "tune",
            json!({"kind": "tune", "tuner": {"variant": "pro", "budget": 40}}),
        ),
        (
            "run",
            json!({"kind": "run", "points": [{"threshold": 110}, {"threshold": 130, "connectivity": "4-conn"}]}),
        ),
    ];
    let mut checked = Vec::new();
    for (sub, method) in methods {
        let mut cfg = base.clone();
        cfg["method"] = method;
        let path = write_config(tmp.path(), &format!("{sub}.json"), &cfg);
        let (o1, o2) = (
            tmp.path().join(format!("{sub}-1")),
            tmp.path().join(format!("{sub}-2")),
        );
        study(sub, &path, &o1, &[])?;
        study(sub, &path, &o2, &[])?;
        let (c1, c2) = (csv_files(&o1), csv_files(&o2));
        ensure(!c1.is_empty() && c1.contains_key("events.csv"), || {
            format!("{sub}: no CSV output")
        })?;
        ensure(c1 == c2, || {
            format!("{sub}: CSV outputs differ between runs")
        })?;
        checked.push(format!("{sub} ({} files)", c1.len()));
    }
    let (pa, pb) = (tmp.path().join("a.pgm"), tmp.path().join("b.pgm"));
    write_pgm(&pa, &square(0, 0, 3)).unwrap();
    write_pgm(&pb, &square(2, 1, 4)).unwrap();
    let args = [
        "compare",
        pa.to_str().unwrap(),
        pb.to_str().unwrap(),
        "--metric",
        "dice",
    ];
    let (o1, o2) = (paramstudy(&args), paramstudy(&args));
    ensure(o1.status.success() && o1.stdout == o2.stdout, || {
        "compare output differs".into()
    })?;
    checked.push("compare".into());
    Ok(format!("byte-identical CSVs for {}", checked.join(", ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "design cardinalities", design_cardinalities),
        (2, "MOAT oracle", moat_oracle),
        (3, "Sobol oracle", sobol_oracle),
        (4, "correlation oracle", correlation_oracle),
        (5, "tuning", tuning),
        (6, "compact graph", compact_graph),
        (7, "storage and scheduling", storage_and_scheduling),
        (8, "spatial metrics", spatial_metrics),
        (9, "determinism", determinism),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n} ({name}): PASS [{secs:.1}s] {detail}"),
            Err(reason) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.1}s] {reason}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
