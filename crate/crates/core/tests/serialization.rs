use ewens_pitman_core::frequencies::sample_pd_theta0;
use ewens_pitman_core::stats::{ReplicateSummary, TestReport};
use ewens_pitman_core::{FrequencyRealization, Grid, TrajectoryGrid, TrajectoryKind};

#[test]
fn realization_round_trips_through_json() {
    let real = sample_pd_theta0(0.4, 500, 3).unwrap();
    let text = serde_json::to_string(&real).unwrap();
    let back: FrequencyRealization = serde_json::from_str(&text).unwrap();
    assert_eq!(back, real);
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["freqs"].as_array().unwrap().len(), 500);
    assert_eq!(doc["arrivals"][0].as_f64().unwrap(), real.arrivals().unwrap()[0]);
}

#[test]
fn invalid_realizations_are_rejected() {
    let real = sample_pd_theta0(0.4, 50, 3).unwrap();
    let mut doc = serde_json::to_value(&real).unwrap();
    doc["diversity"] = serde_json::json!(-1.0);
    assert!(serde_json::from_value::<FrequencyRealization>(doc.clone()).is_err());
    let mut doc = serde_json::to_value(&real).unwrap();
    doc["freqs"][3] = serde_json::json!(0.9);
    assert!(serde_json::from_value::<FrequencyRealization>(doc).is_err());
    let mut doc = serde_json::to_value(&real).unwrap();
    doc["extra"] = serde_json::json!(1);
    assert!(serde_json::from_value::<FrequencyRealization>(doc).is_err());
}

#[test]
fn records_round_trip() {
    let t = TrajectoryGrid {
        kind: TrajectoryKind::PoissonizedY,
        n: 10,
        grid: Grid::uniform(4),
        values: vec![0.0, 0.1, -0.2, 0.3, 0.25],
    };
    let back: TrajectoryGrid = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
    assert_eq!(back, t);
    let r = TestReport::closeness("x", 1.0, 1.1, 0.2, 5);
    let back: TestReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
    assert!(r.passed);
    let mut s = ReplicateSummary::new(4, Some(9), 100);
    s.w1 = Some(0.5);
    let back: ReplicateSummary = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(back, s);
}
