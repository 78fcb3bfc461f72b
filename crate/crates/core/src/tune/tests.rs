use std::cell::RefCell;

use proptest::prelude::*;

use super::*;
use crate::bench::{
    synthetic_space, Bindings, SceneSpec, SyntheticParams, SyntheticScene, SyntheticWorkflow,
};
use crate::rng::seeded;
use crate::space::{AxisValue, ParameterAxis};
use crate::spatial::MetricKind;

fn unit_axis(levels: usize) -> ParameterSpace {
    ParameterSpace::new(vec![ParameterAxis::continuous(
        "x",
        0.0,
        1.0,
        1.0 / (levels - 1) as f64,
    )
    .unwrap()])
    .unwrap()
}

fn grid(dims: &[i64]) -> ParameterSpace {
    let axes = dims
        .iter()
        .enumerate()
        .map(|(i, &n)| ParameterAxis::integer(format!("x{i}"), 0, n - 1, 1).unwrap())
        .collect();
    ParameterSpace::new(axes).unwrap()
}

/// Concave quadratic with its maximum at `target` (grid levels).
fn bowl(target: &[usize]) -> impl Fn(&ParamSet) -> Result<f64, String> + '_ {
    move |p| {
        Ok(-p
            .levels()
            .iter()
            .zip(target)
            .map(|(&x, &t)| (x as f64 - t as f64).powi(2))
            .sum::<f64>())
    }
}

fn all_variants() -> [Variant; 3] {
    [Variant::NelderMead, Variant::Pro, Variant::Ga]
}

#[test]
fn nm_contraction_lands_halfway() {
    let space = unit_axis(11);
    let p = nm_step(&space, &[0.0], &[1.0], 0.5);
    assert_eq!(space.values(&p).unwrap(), vec![AxisValue::Number(0.5)]);
    let r = nm_step(&space, &[0.0], &[1.0], 2.0);
    assert_eq!(r.levels(), &[10], "reflection past the boundary clamps");
    let e = nm_step(&space, &[0.6], &[0.5], 3.0);
    assert_eq!(e.levels(), &[3]);
}

#[test]
fn pro_reflection_onto_best_falls_back_to_shrink() {
    let space = unit_axis(11);
    let r = pro_step(&space, &[1.0], &[0.4], ProMove::Reflect);
    assert_eq!(r.levels(), &[10], "reflection clamps onto the best vertex");
    let s = pro_step(&space, &[1.0], &[0.4], ProMove::Shrink);
    assert_eq!(s.levels(), &[7]);
    let e = pro_step(&space, &[0.5], &[0.6], ProMove::Expand);
    assert_eq!(e.levels(), &[7]);
}

#[test]
fn pro_round_structure() {
    // Round 0 evaluates only the centre, round 1 the other K - 1 vertices.
    let space = grid(&[21, 21]);
    let mut pro = Pro::new(space.clone(), 4, 0.25);
    let Proposal::Batch(b0) = pro.propose() else {
        panic!()
    };
    assert_eq!(b0, vec![space.center()]);
    pro.update(&[0.0]);
    let Proposal::Batch(b1) = pro.propose() else {
        panic!()
    };
    assert_eq!(b1.len(), 3);
    assert!(!b1.contains(&space.center()));
}

#[test]
fn one_point_crossover() {
    let a = ParamSet::new(vec![1, 2, 3, 4]);
    let b = ParamSet::new(vec![5, 6, 7, 8]);
    let (x, y) = crossover(&a, &b, 2);
    assert_eq!(x.levels(), &[1, 2, 3, 8]);
    assert_eq!(y.levels(), &[5, 6, 7, 4]);
    let (x, y) = crossover(&a, &b, 3);
    assert_eq!((x, y), (a, b));
}

#[test]
fn ga_without_operators_is_identity() {
    let space = grid(&[10, 10, 10, 10]);
    let cfg = GaConfig {
        population: 6,
        selection: 0.0,
        mutation: 0.0,
        fixed_cut: Some(3),
        ..GaConfig::default()
    };
    let pop: Vec<ParamSet> = (0..6)
        .map(|i| ParamSet::new(vec![i, i + 1, i + 2, i + 3]))
        .collect();
    let fit: Vec<f64> = (0..6).map(|i| i as f64).collect();
    let (next, flags) = ga_step(&space, &pop, &fit, &cfg, &mut seeded(3));
    assert_eq!(next, pop);
    assert!(flags.is_empty());
}

#[test]
fn ga_selection_replaces_the_worst() {
    let space = grid(&[10, 10]);
    let cfg = GaConfig {
        population: 10,
        selection: 0.2,
        mutation: 0.0,
        fixed_cut: Some(1),
        ..GaConfig::default()
    };
    let pop: Vec<ParamSet> = (0..10).map(|i| ParamSet::new(vec![i, 0])).collect();
    let fit = [5.0, 9.0, 1.0, 7.0, 0.0, 3.0, 8.0, 2.0, 6.0, 4.0];
    let (next, _) = ga_step(&space, &pop, &fit, &cfg, &mut seeded(3));
    // worst (index 4) gets the best (index 1), second worst (2) the second best (6)
    assert_eq!(next[4], pop[1]);
    assert_eq!(next[2], pop[6]);
    for i in [0, 1, 3, 5, 6, 7, 8, 9] {
        assert_eq!(next[i], pop[i]);
    }
}

#[test]
fn ga_tiny_population_is_flagged() {
    let space = grid(&[10, 10]);
    let mut cfg = TuneConfig::new(Variant::Ga);
    cfg.ga.population = 1;
    cfg.ga.generations = 3;
    let target = [3, 4];
    let res = tune_fn(&space, &cfg, bowl(&target)).unwrap();
    assert!(res.flags.iter().any(|f| f.contains("crossover skipped")));
    assert_eq!(res.stop, StopReason::Converged);
}

#[test]
fn concave_grids_reach_the_brute_force_optimum() {
    let cases: [(&[i64], &[usize]); 4] = [
        (&[31], &[4]),
        (&[21, 17], &[15, 3]),
        (&[11, 13, 9], &[2, 9, 7]),
        (&[41, 41], &[33, 30]),
    ];
    for (dims, target) in cases {
        let space = grid(dims);
        for variant in [Variant::NelderMead, Variant::Pro] {
            let mut cfg = TuneConfig::new(variant);
            cfg.budget = 500;
            let res = tune_fn(&space, &cfg, bowl(target)).unwrap();
            assert_eq!(
                res.best.as_ref().unwrap().levels(),
                target,
                "{variant:?} on {dims:?}: {res:?}"
            );
            assert_eq!(res.best_value, Some(0.0));
        }
    }
}

#[test]
fn ga_improves_on_its_initial_population() {
    let space = grid(&[21, 21, 21]);
    let target = [17, 2, 11];
    let mut cfg = TuneConfig::new(Variant::Ga);
    cfg.ga.generations = 30;
    cfg.budget = 300;
    let res = tune_fn(&space, &cfg, bowl(&target)).unwrap();
    let first_gen_best = res
        .trace
        .iter()
        .take(10)
        .filter_map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(res.best_value.unwrap() > first_gen_best);
    assert!(res.best_value.unwrap() >= -6.0, "{:?}", res.best_value);
}

#[test]
fn threshold_stops_after_the_first_batch() {
    let space = grid(&[10, 10]);
    for variant in all_variants() {
        let mut cfg = TuneConfig::new(variant);
        cfg.threshold = Some(-1e9);
        let res = tune_fn(&space, &cfg, bowl(&[1, 1])).unwrap();
        assert_eq!(res.stop, StopReason::Threshold);
        assert_eq!(res.iterations, 1);
    }
}

#[test]
fn minimization_mirrors_maximization() {
    let space = grid(&[21, 21]);
    let target = [5, 16];
    let f = bowl(&target);
    for variant in [Variant::NelderMead, Variant::Pro] {
        let mut cfg = TuneConfig::new(variant);
        cfg.budget = 300;
        let max = tune_fn(&space, &cfg, &f).unwrap();
        cfg.direction = Direction::Minimize;
        let min = tune_fn(&space, &cfg, |p| f(p).map(|v| -v)).unwrap();
        assert_eq!(max.best, min.best);
        assert_eq!(max.evaluations, min.evaluations);
        assert_eq!(min.best_value, Some(0.0));
    }
}

#[test]
fn failures_are_flagged_and_never_best() {
    let space = grid(&[21, 21]);
    for variant in all_variants() {
        let cfg = TuneConfig::new(variant);
        let res = tune_fn(&space, &cfg, |p| {
            if p.levels()[0] >= 12 {
                Err("boom".to_string())
            } else if p.levels()[0] == 11 {
                Ok(f64::NAN)
            } else {
                bowl(&[15, 15])(p)
            }
        })
        .unwrap();
        assert!(res.best.as_ref().unwrap().levels()[0] < 11);
        let failed = res.trace.iter().filter(|r| r.value.is_none()).count();
        assert!(failed > 0, "{variant:?} never touched the failing region");
        assert!(!res.flags.is_empty());
    }
}

#[test]
fn objective_contract_is_checked() {
    let space = grid(&[5]);
    let cfg = TuneConfig::new(Variant::Pro);
    let err = tune(&space, &cfg, |_| Vec::new()).unwrap_err();
    assert_eq!(
        err,
        TuneError::ObjectiveContract {
            expected: 1,
            got: 0
        }
    );
}

#[test]
fn invalid_configs_are_rejected() {
    let space = grid(&[5, 5]);
    let mut cfg = TuneConfig::new(Variant::Pro);
    cfg.pro_points = Some(2);
    assert!(matches!(
        make_tuner(&space, &cfg),
        Err(TuneError::InvalidConfig(_))
    ));
    let mut cfg = TuneConfig::new(Variant::Ga);
    cfg.ga.mutation = 1.5;
    assert!(make_tuner(&space, &cfg).is_err());
    let mut cfg = TuneConfig::new(Variant::NelderMead);
    cfg.budget = 0;
    assert!(make_tuner(&space, &cfg).is_err());
}

#[test]
fn config_json_defaults() {
    let cfg: TuneConfig = serde_json::from_str(r#"{"variant": "nelder-mead"}"#).unwrap();
    assert_eq!(cfg, TuneConfig::new(Variant::NelderMead));
    let cfg: TuneConfig = serde_json::from_str(
        r#"{"variant": "ga", "budget": 50, "ga": {"population": 5, "mutation": 0.1}}"#,
    )
    .unwrap();
    assert_eq!(cfg.ga.population, 5);
    assert_eq!(cfg.ga.generations, 10);
    assert!(serde_json::from_str::<TuneConfig>(r#"{"variant": "ga", "bogus": 1}"#).is_err());
}

#[test]
fn trace_marks_memo_hits() {
    let space = grid(&[9, 9]);
    let calls = RefCell::new(Vec::new());
    let mut cfg = TuneConfig::new(Variant::Ga);
    cfg.ga.generations = 20;
    cfg.budget = 1000;
    let res = tune_fn(&space, &cfg, |p| {
        calls.borrow_mut().push(p.clone());
        bowl(&[4, 4])(p)
    })
    .unwrap();
    let calls = calls.into_inner();
    let mut unique = calls.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), calls.len(), "a point was evaluated twice");
    assert_eq!(res.evaluations, calls.len());
    assert_eq!(res.trace.iter().filter(|r| !r.cached).count(), calls.len());
    assert_eq!(res.trace.len(), 200);

    let mut csv = Vec::new();
    res.write_trace_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("iteration,paramset,value,cached,best\n"));
    assert_eq!(text.lines().count(), 201);
}

fn synthetic_workflow() -> SyntheticWorkflow {
    let scene = SyntheticScene::render(&SceneSpec::default()).unwrap();
    SyntheticWorkflow::self_referential(scene, SyntheticParams::default(), MetricKind::Dice)
        .unwrap()
}

#[test]
fn tuners_recover_the_synthetic_reference() {
    let wf = synthetic_workflow();
    let space = synthetic_space();
    let bindings = Bindings::default();
    for variant in all_variants() {
        let mut cfg = TuneConfig::new(variant);
        cfg.budget = 100;
        cfg.seed = 11;
        let res = tune_fn(&space, &cfg, |p| {
            let params = bindings
                .resolve_set(&wf.defaults, &space, p)
                .map_err(|e| e.to_string())?;
            wf.evaluate(&params).map_err(|e| e.to_string())
        })
        .unwrap();
        assert!(res.evaluations <= 100);
        let best = res.best_value.unwrap();
        assert!(
            best >= 0.95,
            "{variant:?} reached only {best} ({})",
            res.best_key.unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tuners_stay_on_grid_within_budget(
        dims in prop::collection::vec(2i64..12, 1..4),
        target_seed in 0u64..1000,
        budget in 1usize..60,
        seed in 0u64..1000,
        v in 0usize..3,
    ) {
        let space = grid(&dims);
        let target: Vec<usize> = dims.iter().enumerate().map(|(i, &n)| ((target_seed as usize) * (i + 7)) % n as usize).collect();
        let mut cfg = TuneConfig::new(all_variants()[v]);
        cfg.budget = budget;
        cfg.seed = seed;
        cfg.pro_points = Some(space.k() + 1 + (seed as usize % 3));
        let mut calls = 0usize;
        let f = bowl(&target);
        let res = tune(&space, &cfg, |batch| {
            calls += batch.len();
            batch.iter().map(|p| {
                space.validate(p).map_err(|e| e.to_string())?;
                f(p)
            }).collect()
        }).unwrap();
        prop_assert!(calls <= budget);
        prop_assert_eq!(calls, res.evaluations);
        prop_assert!(res.trace.iter().all(|r| r.value.is_some()));
        let mut prev = f64::NEG_INFINITY;
        for r in &res.trace {
            let b = r.best.unwrap();
            prop_assert!(b >= prev);
            prev = b;
        }
        let again = tune(&space, &cfg, |batch| batch.iter().map(&f).collect()).unwrap();
        prop_assert_eq!(res, again);
    }
}
