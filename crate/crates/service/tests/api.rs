mod common;

use std::sync::Arc;

use adapt_core::engine::{fit_player_model, Observation, PolicyKind, SessionState};
use adapt_core::roguelike::Level;
use adapt_core::sudoku;
use adapt_core::DesignPoint;
use adapt_harness::PlaytraceRecord;
use adapt_service::{router, Content, ModelResponse, Serve, Service, Submitted};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::{service, solution_for, ManualClock};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(svc: &Arc<Service>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(Arc::clone(svc)).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn create(svc: &Arc<Service>, body: Value) -> Serve {
    let (status, v) = call(svc, "POST", "/api/session", Some(body)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    serde_json::from_value(v).unwrap()
}

async fn submit(svc: &Arc<Service>, serve: &Serve, body: Value) -> (StatusCode, Value) {
    let uri = format!("/api/session/{}/result", serve.session_id);
    call(svc, "POST", &uri, Some(body)).await
}

fn hints(serve: &Serve) -> u8 {
    match serve.content {
        Content::Sudoku { hint_count, .. } => hint_count,
        _ => panic!("expected sudoku"),
    }
}

fn offline_fbca(seed: u64) -> SessionState {
    let ctx = Arc::new(sudoku::context());
    let kind = ctx.default_policy("fbca").unwrap();
    SessionState::new("offline", ctx, kind, 180.0, seed).unwrap()
}

#[tokio::test]
async fn healthz_reports_ok() {
    let svc = Arc::new(service(1, &ManualClock::new(), None));
    let (status, v) = call(&svc, "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
}

#[tokio::test]
async fn binary_search_starts_at_ceil_midpoint() {
    let svc = Arc::new(service(1, &ManualClock::new(), None));
    let serve = create(&svc, json!({"domain": "sudoku", "policy": "binary"})).await;
    assert_eq!(serve.policy, "binary");
    assert_eq!(serve.iteration, 1);
    assert_eq!(serve.design_point, DesignPoint::scalar(49.0));
    assert_eq!(hints(&serve), 49);
    let Content::Sudoku { givens, .. } = &serve.content else { unreachable!() };
    assert_eq!(givens.filled(), 49);
}

#[tokio::test]
async fn bad_requests_are_client_errors() {
    let svc = Arc::new(service(1, &ManualClock::new(), None));
    for body in [
        json!({"domain": "chess"}),
        json!({"domain": "sudoku", "policy": "annealing"}),
        json!({"domain": "roguelike", "policy": "binary"}),
        json!({"domain": "sudoku", "goal_seconds": -3.0}),
        json!({"policy": "fbca"}),
    ] {
        let (status, v) = call(&svc, "POST", "/api/session", Some(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body} -> {v}");
        assert!(v["error"].is_string());
    }
    assert_eq!(svc.session_count(), 0);
}

#[tokio::test]
async fn omitted_policy_is_assigned_deterministically() {
    let clock = ManualClock::new();
    let mut runs = Vec::new();
    for _ in 0..2 {
        let svc = Arc::new(service(42, &clock, None));
        let mut names = Vec::new();
        for _ in 0..12 {
            names.push(create(&svc, json!({"domain": "roguelike"})).await.policy);
        }
        let pool = svc.policy_pool(adapt_core::engine::Domain::Roguelike);
        assert!(names.iter().all(|n| pool.contains(n)));
        runs.push(names);
    }
    assert_eq!(runs[0], runs[1]);
    let distinct: std::collections::HashSet<_> = runs[0].iter().collect();
    assert!(distinct.len() > 1, "{:?}", runs[0]);
}

#[tokio::test]
async fn correct_solution_advances_like_the_engine() {
    let clock = ManualClock::new();
    let svc = Arc::new(service(1, &clock, None));
    let first = create(&svc, json!({"domain": "sudoku", "policy": "fbca", "seed": 9})).await;
    let mut offline = offline_fbca(9);
    let cold = offline.next_content().unwrap();
    assert_eq!(first.design_point, cold.candidate.point);

    clock.advance(95_000);
    let solution = solution_for(&first).to_string();
    let (status, v) = submit(
        &svc,
        &first,
        json!({"content_id": first.content_id, "elapsed_ms": 92_000, "solved": true, "solution": solution}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let out: Submitted = serde_json::from_value(v).unwrap();
    assert!(out.recorded.solved);
    assert_eq!(out.recorded.elapsed_ms, 92_000);
    assert_eq!(out.recorded.iteration, 1);

    offline
        .record_result(Observation {
            design_point: cold.candidate.point.clone(),
            content_id: first.content_id.clone(),
            elapsed: 92.0,
            solved: true,
            recorded_at: 0,
        })
        .unwrap();
    let expected = offline.next_content().unwrap();
    assert_eq!(out.next.design_point, expected.candidate.point);
    assert_eq!(out.next.iteration, 2);
}

#[tokio::test]
async fn wrong_solution_is_unsolved_and_reserves_a_fresh_puzzle() {
    let clock = ManualClock::new();
    let svc = Arc::new(service(1, &clock, None));
    let first = create(&svc, json!({"domain": "sudoku", "policy": "fbca"})).await;
    let mut grid = solution_for(&first);
    let blank = match &first.content {
        Content::Sudoku { givens, .. } => givens.0.iter().position(|&v| v == 0).unwrap(),
        _ => unreachable!(),
    };
    grid.0[blank] = grid.0[blank] % 9 + 1;
    clock.advance(60_000);
    let (status, v) = submit(
        &svc,
        &first,
        json!({"content_id": first.content_id, "elapsed_ms": 50_000, "solved": true, "solution": grid.to_string()}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let out: Submitted = serde_json::from_value(v).unwrap();
    assert!(!out.recorded.solved);
    assert_eq!(out.next.design_point, first.design_point);
    assert_ne!(out.next.content_id, first.content_id);
    assert_ne!(out.next.content, first.content);

    // A give-up without a grid is also unsolved.
    clock.advance(10_000);
    let (status, v) = submit(
        &svc,
        &out.next,
        json!({"content_id": out.next.content_id, "elapsed_ms": 9_000, "solved": false}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let again: Submitted = serde_json::from_value(v).unwrap();
    assert!(!again.recorded.solved);
    assert_eq!(again.next.design_point, first.design_point);
}

#[tokio::test]
async fn duplicate_and_stale_submissions_conflict() {
    let clock = ManualClock::new();
    let svc = Arc::new(service(1, &clock, None));
    let first = create(&svc, json!({"domain": "sudoku", "policy": "linear"})).await;
    clock.advance(100_000);
    let body = serde_json::to_value(json!({
        "content_id": first.content_id,
        "elapsed_ms": 90_000,
        "solved": true,
        "solution": solution_for(&first).to_string(),
    }))
    .unwrap();
    let (status, v) = submit(&svc, &first, body.clone()).await;
    assert_eq!(status, StatusCode::OK);
    let out: Submitted = serde_json::from_value(v).unwrap();

    let (status, _) = submit(&svc, &first, body).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = submit(
        &svc,
        &first,
        json!({"content_id": "sudoku-1-1", "elapsed_ms": 1000, "solved": false}),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(svc.current(&first.session_id).unwrap(), out.next);
}

#[tokio::test]
async fn malformed_solutions_are_rejected_without_side_effects() {
    let clock = ManualClock::new();
    let svc = Arc::new(service(1, &clock, None));
    let first = create(&svc, json!({"domain": "sudoku", "policy": "random"})).await;
    clock.advance(30_000);
    for body in [
        json!({"content_id": first.content_id, "elapsed_ms": 20_000, "solved": true, "solution": "123"}),
        json!({"content_id": first.content_id, "elapsed_ms": 20_000, "solved": true, "solution": "x".repeat(81)}),
        json!({"content_id": first.content_id, "elapsed_ms": 20_000, "solved": true}),
        json!({"content_id": first.content_id, "elapsed_ms": 0, "solved": false}),
        json!({"content_id": first.content_id}),
    ] {
        let (status, v) = submit(&svc, &first, body.clone()).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body} -> {v}");
    }
    assert_eq!(svc.current(&first.session_id).unwrap(), first);
}

#[tokio::test]
async fn elapsed_time_is_bounded_by_wall_clock() {
    let clock = ManualClock::new();
    let svc = Arc::new(service(1, &clock, None));
    let first = create(&svc, json!({"domain": "roguelike", "policy": "random"})).await;
    clock.advance(10_000);
    let (_, v) = submit(
        &svc,
        &first,
        json!({"content_id": first.content_id, "elapsed_ms": 60_000, "solved": true}),
    )
    .await;
    let out: Submitted = serde_json::from_value(v).unwrap();
    assert_eq!(out.recorded.elapsed_ms, 10_000);

    clock.advance(10_000);
    let (_, v) = submit(
        &svc,
        &out.next,
        json!({"content_id": out.next.content_id, "elapsed_ms": 14_900, "solved": true}),
    )
    .await;
    let out: Submitted = serde_json::from_value(v).unwrap();
    assert_eq!(out.recorded.elapsed_ms, 14_900);
}

#[tokio::test]
async fn roguelike_payload_matches_the_design_point() {
    let svc = Arc::new(service(3, &ManualClock::new(), None));
    let a = create(&svc, json!({"domain": "roguelike", "policy": "fbca", "seed": 5})).await;
    let b = create(&svc, json!({"domain": "roguelike", "policy": "fbca", "seed": 5})).await;
    let Content::Roguelike { level, game_seed, leniency, reachability } = &a.content else {
        panic!("expected roguelike");
    };
    let parsed: Level = level.parse().unwrap();
    assert_eq!(parsed.features(), (*leniency, *reachability));
    assert_eq!(
        a.design_point,
        DesignPoint::new(vec![*leniency as f64, *reachability as f64])
    );
    assert_eq!(a.content, b.content);
    assert!(*game_seed < 1 << 53);
    assert_eq!(*game_seed, match b.content {
        Content::Roguelike { game_seed, .. } => game_seed,
        _ => unreachable!(),
    });
}

#[tokio::test]
async fn model_endpoint() {
    let clock = ManualClock::new();
    let svc = Arc::new(service(1, &clock, None));

    let binary = create(&svc, json!({"domain": "sudoku", "policy": "binary"})).await;
    let (status, v) = call(&svc, "GET", &format!("/api/session/{}/model", binary.session_id), None).await;
    assert_eq!(status, StatusCode::OK);
    let m: ModelResponse = serde_json::from_value(v).unwrap();
    assert_eq!(m.policy, "binary");
    assert!(m.curve.is_empty());

    let fbca = create(&svc, json!({"domain": "sudoku", "policy": "fbca", "seed": 4})).await;
    let uri = format!("/api/session/{}/model", fbca.session_id);
    let (_, v) = call(&svc, "GET", &uri, None).await;
    let fresh: ModelResponse = serde_json::from_value(v).unwrap();
    assert_eq!(fresh.curve.len(), 64);
    let prior = sudoku::prior_mean();
    for p in &fresh.curve {
        let expected = prior.seconds(p.design_point.coords());
        assert!((p.predicted_seconds - expected).abs() < 1e-9 * expected);
        assert!(p.std_log > 0.0 && p.std_seconds > 0.0);
    }

    let mut serve = fbca;
    let mut history = Vec::new();
    for _ in 0..3 {
        let out = common::play(&svc, &clock, &serve);
        history.push((out.recorded.design_point.clone(), out.recorded.elapsed_seconds()));
        serve = out.next;
    }
    let (_, v) = call(&svc, "GET", &uri, None).await;
    let fitted: ModelResponse = serde_json::from_value(v).unwrap();
    let ctx = sudoku::context();
    let PolicyKind::Fbca { kernel, .. } = ctx.default_policy("fbca").unwrap() else {
        unreachable!()
    };
    let oracle = fit_player_model(&ctx, &kernel, &history).unwrap();
    for p in &fitted.curve {
        let post = oracle.posterior(&p.design_point).unwrap();
        assert!((p.predicted_seconds.ln() - post.mean).abs() < 1e-9);
        assert!((p.std_log - post.std).abs() < 1e-9);
    }
    let first = &fitted.curve[0];
    let s2 = first.std_log.powi(2);
    let lognormal = (first.predicted_seconds.ln() + s2 / 2.0).exp() * (s2.exp() - 1.0).sqrt();
    assert!((first.std_seconds - lognormal).abs() < 1e-9 * lognormal);
}

#[tokio::test]
async fn unknown_and_idle_sessions() {
    let clock = ManualClock::new();
    let svc = Arc::new(service(1, &clock, None));
    let (status, _) = call(&svc, "GET", "/api/session/nope/model", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let s = create(&svc, json!({"domain": "sudoku", "policy": "binary"})).await;
    clock.advance(50 * 60 * 1000);
    let out = common::play(&svc, &clock, &s);
    clock.advance(59 * 60 * 1000);
    assert_eq!(svc.current(&s.session_id).unwrap(), out.next);
    clock.advance(2 * 60 * 1000);
    let (status, _) = submit(&svc, &out.next, serde_json::to_value(json!({
        "content_id": out.next.content_id, "elapsed_ms": 1000, "solved": false
    })).unwrap()).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(svc.session_count(), 0);
}

#[tokio::test]
async fn log_lines_are_playtrace_records_and_append_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let clock = ManualClock::new();
    let svc = Arc::new(service(1, &clock, Some(&path)));
    let mut serve = create(&svc, json!({"domain": "sudoku", "policy": "fbca"})).await;
    serve = common::play(&svc, &clock, &serve).next;
    let before = std::fs::read_to_string(&path).unwrap();
    clock.advance(1000);
    let wrong = json!({"content_id": serve.content_id, "elapsed_ms": 500, "solved": false});
    assert_eq!(submit(&svc, &serve, wrong).await.0, StatusCode::OK);
    serve = svc.current(&serve.session_id).unwrap();
    common::play(&svc, &clock, &serve);
    let after = std::fs::read_to_string(&path).unwrap();
    assert!(after.starts_with(&before));

    let mut results = Vec::new();
    for line in after.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        match v["kind"].as_str().unwrap() {
            "session" => assert!(v["seed"].is_u64()),
            "result" => results.push(serde_json::from_value::<PlaytraceRecord>(v).unwrap()),
            other => panic!("unexpected kind {other}"),
        }
    }
    assert_eq!(results.len(), 3);
    for (i, r) in results.iter().enumerate() {
        assert_eq!(r.iteration as usize, i + 1);
        assert!(r.elapsed_ms > 0);
        assert_eq!(r.policy, "fbca");
    }
    assert!(!results[1].solved);
    assert_eq!(results[1].design_point, results[2].design_point);
}
