use super::*;
use crate::bench::{bnh, retrofit, schaffer};
use crate::pareto::hypervolume_exact;

fn small_config(doe: usize, budget: usize, seed: u64) -> (RunConfig, crate::bench::BenchmarkProblem) {
    let p = bnh();
    let mut cfg = RunConfig::new(p.space.clone(), 2, 2, doe, budget);
    cfg.seed = seed;
    cfg.nsga2 = Nsga2Config {
        pop_size: 20,
        generations: 10,
        ..Nsga2Config::default()
    };
    (cfg, p)
}

#[test]
fn doe_asks_replay_the_lhs_sample() {
    let (cfg, p) = small_config(13, 14, 7);
    let expected = lhs_sample(&cfg.space, 13, 7);
    let mut run = Run::new(cfg).unwrap();
    for e in &expected {
        assert_eq!(run.phase(), Phase::Doe);
        let q = run.ask().unwrap();
        assert_eq!(&q, e);
        let (f, g) = p.evaluate(&q);
        run.tell(&q, f, g, EvalStatus::Ok).unwrap();
    }
    assert_eq!(run.phase(), Phase::Enrich);
}

#[test]
fn protocol_errors_leave_state_unchanged() {
    let (cfg, p) = small_config(3, 3, 1);
    let mut run = Run::new(cfg).unwrap();
    assert!(matches!(
        run.tell(&run.doe_points()[0].clone(), vec![0.0; 2], vec![0.0; 2], EvalStatus::Ok),
        Err(DriverError::NoPendingAsk)
    ));
    let q = run.ask().unwrap();
    assert!(matches!(run.ask(), Err(DriverError::PendingEvaluation)));
    let other = run.doe_points()[1].clone();
    assert!(matches!(run.tell(&other, vec![0.0; 2], vec![0.0; 2], EvalStatus::Ok), Err(DriverError::PointMismatch)));
    assert!(matches!(run.tell(&q, vec![0.0; 3], vec![0.0; 2], EvalStatus::Ok), Err(DriverError::Arity { .. })));
    assert!(matches!(run.tell(&q, vec![0.0; 2], vec![0.0; 1], EvalStatus::Ok), Err(DriverError::Arity { .. })));
    assert!(run.history().is_empty());
    assert_eq!(run.pending(), Some(&q));
    let (f, g) = p.evaluate(&q);
    run.tell(&q, f, g, EvalStatus::Ok).unwrap();
    assert_eq!(run.history().len(), 1);
    for _ in 0..2 {
        let q = run.ask().unwrap();
        let (f, g) = p.evaluate(&q);
        run.tell(&q, f, g, EvalStatus::Ok).unwrap();
    }
    assert_eq!(run.phase(), Phase::Done);
    assert!(matches!(run.ask(), Err(DriverError::BudgetExhausted)));
}

#[test]
fn failures_are_recorded_but_not_trained_on() {
    let (cfg, p) = small_config(5, 8, 2);
    let mut calls = 0;
    let (run, out) = super::run(cfg, |q| {
        calls += 1;
        match calls {
            2 => Err("solver crashed".into()),
            3 => Ok((vec![f64::NAN, 1.0], vec![0.0, 0.0])),
            _ => Ok(p.evaluate(q)),
        }
    })
    .unwrap();
    let h = run.history();
    assert_eq!(h.len(), 8);
    assert_eq!(h[1].status, EvalStatus::Failed);
    assert_eq!(h[2].status, EvalStatus::Failed);
    assert!(!h[1].feasible && !h[2].feasible);
    assert_eq!(run.archive().len(), 6);
    assert!(out.pf_database.iter().all(|fp| fp.id != 1 && fp.id != 2));
}

#[test]
fn pure_doe_run_reports_nondominated_doe_subset() {
    let (cfg, p) = small_config(12, 12, 3);
    let (run, out) = super::run(cfg, |q| Ok(p.evaluate(q))).unwrap();
    assert!(run.history().iter().all(|r| r.origin == Origin::Doe));
    let feasible: Vec<&Record> = run.history().iter().filter(|r| r.feasible).collect();
    let fs: Vec<Vec<f64>> = feasible.iter().map(|r| r.f.clone()).collect();
    let ids: Vec<usize> = nondominated_filter(&fs).into_iter().map(|i| feasible[i].id).collect();
    assert_eq!(out.pf_database.iter().map(|p| p.id).collect::<Vec<_>>(), ids);
    assert!(!out.predicted_pf.is_empty());
    assert_eq!(out.proximity.distances.len(), out.predicted_pf.len());
    assert!(out.proximity.summary().ends_with("predicted points survive in the merged front"));
}

#[test]
fn seeded_runs_are_identical_and_valid() {
    let (cfg, p) = small_config(6, 12, 5);
    let (a, oa) = super::run(cfg.clone(), |q| Ok(p.evaluate(q))).unwrap();
    let (b, ob) = super::run(cfg, |q| Ok(p.evaluate(q))).unwrap();
    assert_eq!(a.history(), b.history());
    assert_eq!(oa, ob);
    for r in a.history() {
        a.config().space.validate(&r.point).unwrap();
    }
    assert!(a.history()[6..].iter().all(|r| r.origin == Origin::Infill));
    assert_eq!(a.finalize(&a.config().nsga2), oa);
}

#[test]
fn enrichment_never_loses_hypervolume() {
    let p = schaffer();
    let mut cfg = RunConfig::new(p.space.clone(), 2, 0, 4, 14);
    cfg.seed = 9;
    let mut run = Run::new(cfg).unwrap();
    let mut fronts = Vec::new();
    while run.phase() != Phase::Done {
        let q = run.ask().unwrap();
        let (f, g) = p.evaluate(&q);
        run.tell(&q, f, g, EvalStatus::Ok).unwrap();
        fronts.push(run.archive().front());
    }
    let r = run.archive().ref_point().unwrap().to_vec();
    let hv: Vec<f64> = fronts.iter().map(|f| hypervolume_exact(f, &r).unwrap()).collect();
    assert!(hv.windows(2).all(|w| w[1] >= w[0]), "{hv:?}");
    // the loop moved towards the front
    assert!(hv[13] > hv[3]);
}

#[test]
fn maximized_objectives_keep_user_signs() {
    let p = retrofit();
    let mut cfg = RunConfig::new(p.space.clone(), 4, 4, 10, 10);
    cfg.maximize = p.maximize.clone();
    cfg.nsga2 = Nsga2Config {
        pop_size: 20,
        generations: 5,
        ..Nsga2Config::default()
    };
    let (run, out) = super::run(cfg, |q| Ok(p.evaluate(q))).unwrap();
    for e in run.archive().entries() {
        let r = &run.history()[e.id];
        assert_eq!(e.f[3], -r.f[3]);
        assert_eq!(e.f[0], r.f[0]);
    }
    for fp in &out.pf_database {
        assert_eq!(fp.f, run.history()[fp.id].f);
    }
}

#[test]
fn history_csv_round_trip() {
    let p = retrofit();
    let mut cfg = RunConfig::new(p.space.clone(), 4, 4, 6, 8);
    cfg.maximize = p.maximize.clone();
    let mut calls = 0;
    let (run, _) = super::run(cfg.clone(), |q| {
        calls += 1;
        if calls == 4 {
            Err("boom".into())
        } else {
            Ok(p.evaluate(q))
        }
    })
    .unwrap();
    let mut buf = Vec::new();
    write_history(&run, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("id,origin,status,span_extension,"));
    let records = read_history(&cfg, buf.as_slice()).unwrap();
    assert_eq!(records.len(), 8);
    for (a, b) in records.iter().zip(run.history()) {
        assert_eq!(a.point, b.point);
        assert_eq!(a.status, b.status);
        if a.status == EvalStatus::Ok {
            assert_eq!(a.f, b.f);
            assert_eq!(a.g, b.g);
        }
    }
    let rebuilt = Run::with_history(cfg.clone(), records).unwrap();
    assert_eq!(rebuilt.archive(), run.archive());
    // truncated file
    let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
    let partial = read_history(&cfg, cut.as_bytes()).unwrap();
    assert_eq!(partial.len(), 3);
    assert_eq!(Run::with_history(cfg, partial).unwrap().phase(), Phase::Doe);
}

#[test]
fn config_json_round_trip_and_validation() {
    let (cfg, _) = small_config(4, 10, 3);
    let text = cfg.to_json();
    assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["surprise"] = serde_json::json!(1);
    assert!(RunConfig::from_json(&v.to_string()).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["budget"] = serde_json::json!(2);
    assert!(RunConfig::from_json(&v.to_string()).is_err());
    let minimal = serde_json::json!({
        "space": {"name": "s", "variables": [{"name": "x", "kind": "continuous", "bounds": [0.0, 1.0]}]},
        "n_objectives": 2,
        "doe_size": 3,
        "budget": 5
    });
    let c = RunConfig::from_json(&minimal.to_string()).unwrap();
    assert_eq!(c.objective_names, vec!["f1", "f2"]);
    assert_eq!(c.n_constraints(), 0);
}

#[test]
fn artifacts_are_written() {
    let (cfg, p) = small_config(5, 7, 4);
    let (run, out) = super::run(cfg, |q| Ok(p.evaluate(q))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_artifacts(dir.path(), &run, &out).unwrap();
    for f in [&paths.config, &paths.history, &paths.pf_database, &paths.predicted_pf, &paths.proximity, &paths.log] {
        assert!(f.exists(), "{f:?}");
    }
    let hist = std::fs::read_to_string(&paths.history).unwrap();
    assert_eq!(hist.lines().count(), 8);
    let log = std::fs::read_to_string(&paths.log).unwrap();
    assert!(log.contains("survive in the merged front"));
}

#[test]
fn restored_asks_continue_like_live_ones() {
    let (cfg, p) = small_config(4, 7, 8);
    let (live, _) = super::run(cfg.clone(), |q| Ok(p.evaluate(q))).unwrap();
    let mut replay = Run::new(cfg).unwrap();
    for r in &live.history()[..5] {
        replay.restore_pending(r.point.clone()).unwrap();
        assert!(matches!(replay.restore_pending(r.point.clone()), Err(DriverError::PendingEvaluation)));
        replay.tell(&r.point, r.f.clone(), r.g.clone(), EvalStatus::Ok).unwrap();
    }
    while replay.phase() != Phase::Done {
        let q = replay.ask().unwrap();
        let (f, g) = p.evaluate(&q);
        replay.tell(&q, f, g, EvalStatus::Ok).unwrap();
    }
    assert_eq!(replay.history(), live.history());
    assert!(matches!(replay.restore_pending(live.history()[0].point.clone()), Err(DriverError::BudgetExhausted)));
}
