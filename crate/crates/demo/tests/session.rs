use chowfilter_demo::{schedule, IcfSession};
use serde_json::Value;

#[test]
fn filter_removes_the_displaced_cluster() {
    let mut s = IcfSession::new(3, 600, 0.25, 3.0).unwrap();
    let before = s.points();
    assert_eq!(before.len(), 4 * (600 + 600));
    assert!(before.chunks(4).skip(600).all(|p| p[2] == 1.0));
    assert!(s.heatmap(10, 4.0).unwrap().iter().all(|&c| c == 2));

    let summary: Value = serde_json::from_str(&s.run(2, 2.0, 0.1).unwrap()).unwrap();
    let shifted_total = summary["shifted_total"].as_u64().unwrap();
    let shifted_removed = summary["shifted_removed"].as_u64().unwrap();
    let clean_removed = summary["clean_removed"].as_u64().unwrap();
    assert!(shifted_total > 100);
    assert!(shifted_removed as f64 >= 0.8 * shifted_total as f64, "{summary}");
    let clean_total = 600 - shifted_total;
    assert!((clean_removed as f64) < 0.5 * clean_total as f64, "{summary}");

    let pts = s.points();
    let removed = pts.chunks(4).filter(|p| p[2] == 2.0).count() as u64;
    assert_eq!(removed, shifted_removed + clean_removed);

    let grid = s.heatmap(40, 4.0).unwrap();
    assert_eq!(grid.len(), 1600);
    assert!(grid.iter().all(|&c| c <= 3));
    assert!(grid.iter().any(|&c| c < 2), "some region is rejected");
    assert!(grid.iter().any(|&c| c >= 2), "some region is accepted");
}

#[test]
fn sessions_are_reproducible() {
    let run = || {
        let mut s = IcfSession::new(9, 300, 0.2, 2.0).unwrap();
        s.run(1, 2.0, 0.2).unwrap();
        (s.points(), s.heatmap(20, 3.0).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn invalid_inputs_are_errors() {
    assert!(IcfSession::new(0, 5, 0.1, 1.0).is_err());
    assert!(IcfSession::new(0, 100, 1.5, 1.0).is_err());
    let mut s = IcfSession::new(0, 100, 0.1, 1.0).unwrap();
    assert!(s.run(0, 2.0, 0.1).is_err());
    assert!(s.run(2, 1.0, 0.1).is_err());
    assert!(s.heatmap(1, 4.0).is_err());
    assert!(schedule(2, 2, 0.5, 0.1).is_err());
}

#[test]
fn schedule_matches_the_closed_form() {
    let v: Value = serde_json::from_str(&schedule(2, 1, 2.0, 0.5).unwrap()).unwrap();
    // beta = 4 * 2^2 = 16, B = 2 sqrt(2*2*3*16/0.5) = 2 sqrt(384), Delta = 0.25 / (B * 4.5)
    let b = 2.0 * 384f64.sqrt();
    assert!((v["beta"].as_f64().unwrap() - 16.0).abs() < 1e-12);
    assert!((v["bound"].as_f64().unwrap() - b).abs() < 1e-9);
    assert!((v["delta"].as_f64().unwrap() - 0.25 / (b * 4.5)).abs() < 1e-15);
    assert_eq!(v["iteration_limit"].as_u64().unwrap(), (b * 4.5 / 0.25).floor() as u64);
}
