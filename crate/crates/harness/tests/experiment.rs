use std::collections::BTreeMap;
use std::sync::Arc;

use adapt_core::engine::{fit_player_model, Domain};
use adapt_core::DesignPoint;
use adapt_harness::experiment::{build_context, buckets, sim_player, simulate_session};
use adapt_harness::population::model_curve;
use adapt_harness::{
    fit_population_model, mae, run_experiment, welch_t_test, write_outputs, ExperimentConfig,
    PlaytraceRecord,
};

fn small(domain: Domain, policies: &[&str], n_players: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(domain);
    cfg.policies = policies.iter().map(|s| s.to_string()).collect();
    cfg.n_players = n_players;
    cfg
}

#[test]
fn identical_config_gives_identical_files() {
    let mut cfg = small(Domain::Roguelike, &["fbca", "hillclimb", "random"], 3);
    cfg.iterations = 10;
    cfg.corpus_size = 80;
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_outputs(&a, da.path()).unwrap();
    write_outputs(&b, db.path()).unwrap();
    for f in ["mae_report.csv", "playtraces.jsonl", "population_model.csv"] {
        let x = std::fs::read(da.path().join(f)).unwrap();
        assert!(!x.is_empty(), "{f}");
        assert_eq!(x, std::fs::read(db.path().join(f)).unwrap(), "{f}");
    }
    let lines = std::fs::read_to_string(da.path().join("playtraces.jsonl")).unwrap();
    let parsed: Vec<PlaytraceRecord> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed, a.records);
}

#[test]
fn report_rows_cover_the_configured_buckets() {
    let run = run_experiment(&small(Domain::Sudoku, &["fbca", "binary"], 4)).unwrap();
    let mut want: Vec<String> = (1..=8).map(|i| i.to_string()).collect();
    want.push("all".into());
    assert_eq!(run.report.buckets, want);
    for b in &want {
        for p in ["fbca", "binary"] {
            let row = run.report.row(b, p).unwrap();
            assert!(row.n > 0);
        }
    }
    assert_eq!(run.report.rows.len(), want.len() * 2);
    let c = run.report.comparison("all", "binary").unwrap();
    assert!((0.0..=1.0).contains(&c.p));
    assert_eq!(buckets(Domain::Roguelike, 35).len(), 7);
}

#[test]
fn single_noiseless_fbca_player_is_close_by_iteration_five() {
    let mut cfg = small(Domain::Sudoku, &["fbca"], 1);
    cfg.noise_sigma = 0.0;
    let run = run_experiment(&cfg).unwrap();
    assert!(run.report.row("5", "fbca").unwrap().mae <= 18.0, "{:?}", run.report.row("5", "fbca"));
}

/// Per-session MAE, keyed by session id.
fn session_errors(records: &[PlaytraceRecord], goal: f64) -> Vec<f64> {
    let mut by: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        by.entry(&r.session_id).or_default().push(r.elapsed_seconds());
    }
    by.values().map(|t| mae(t, goal).unwrap()).collect()
}

#[test]
fn identical_arms_rarely_reject() {
    let mut rejected = 0;
    for run in 0..100u64 {
        let mut a = small(Domain::Sudoku, &["binary"], 20);
        a.seeds = vec![2 * run + 1];
        let mut b = a.clone();
        b.seeds = vec![2 * run + 2];
        let (ra, rb) = (run_experiment(&a).unwrap(), run_experiment(&b).unwrap());
        let w = welch_t_test(&session_errors(&ra.records, 180.0), &session_errors(&rb.records, 180.0)).unwrap();
        if w.p < 0.05 {
            rejected += 1;
        }
    }
    assert!(rejected <= 10, "{rejected} of 100 runs rejected");
}

#[test]
fn pooled_single_player_equals_session_model() {
    let cfg = ExperimentConfig::defaults(Domain::Sudoku);
    let ctx = Arc::new(build_context(&cfg).unwrap());
    let p = sim_player(Domain::Sudoku, 0.25, 3, 0, 0);
    let recs = simulate_session(&ctx, "fbca", &p, 180.0, 8, "one", 1, 2).unwrap();
    let pooled = fit_population_model(&recs, &ctx, &ctx.default_kernel).unwrap();
    let data: Vec<(DesignPoint, f64)> = recs.iter().map(|r| (r.design_point.clone(), r.elapsed_seconds())).collect();
    let own = fit_player_model(&ctx, &ctx.default_kernel, &data).unwrap();
    let curve = model_curve(&pooled, &ctx.space).unwrap();
    assert_eq!(curve.len(), 64);
    for c in &curve {
        let q = own.posterior(&c.design_point).unwrap();
        assert!((q.seconds() - c.predicted_seconds).abs() < 1e-9 * q.seconds());
        assert!((q.std - c.std_log).abs() < 1e-12);
    }
}

#[test]
fn pooled_model_is_monotone_in_hints() {
    let run = run_experiment(&small(Domain::Sudoku, &["fbca"], 100)).unwrap();
    let kept = adapt_harness::filter_outliers(&run.records, Domain::Sudoku);
    assert!(kept.len() > adapt_harness::population::HYPER_SUBSAMPLE);
    let model = fit_population_model(&kept, &run.context, &run.context.default_kernel).unwrap();
    let curve = model_curve(&model, &run.context.space).unwrap();
    for w in curve.windows(2) {
        assert!(w[0].design_point.coords()[0] < w[1].design_point.coords()[0]);
        assert!(w[1].predicted_seconds <= w[0].predicted_seconds, "{:?} -> {:?}", w[0], w[1]);
    }
}
