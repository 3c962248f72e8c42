use vaguemarkov_web::{fuzzy_curves, fuzzy_curves_json, hit_ratio_sweep, predict, predict_json, sweep_json};

#[test]
fn curves_cover_the_domain_and_saturate_past_max() {
    let v = fuzzy_curves_json(1800.0, 121).unwrap();
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 121);
    assert_eq!(v["labels"], serde_json::json!(["short", "medium", "long"]));
    for p in points {
        let sum: f64 = p["normalized"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let (t, f) = (p["t"].as_f64().unwrap(), p["f"].as_f64().unwrap());
        assert!(t + f <= 1.0 + 1e-12);
    }
    let last = points.last().unwrap();
    assert_eq!(last["t"], 1.0);
    assert_eq!(last["f"], 0.0);
}

#[test]
fn prediction_follows_the_dominant_successor() {
    let v = predict_json(10, 0.9, 500, 4, 1, "3", 3, 1.0).unwrap();
    let preds = v["predictions"].as_array().unwrap();
    assert!(!preds.is_empty() && preds.len() <= 3);
    assert_eq!(preds[0]["page"], "/page4.html");
}

#[test]
fn sweep_reports_each_capacity() {
    let rows = sweep_json(10, 0.8, 300, 2, 4, 1).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r["capacity"], i + 1);
        let on = r["on"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&on));
    }
}

#[test]
fn exports_encode_errors_as_json() {
    let bad: serde_json::Value = serde_json::from_str(&fuzzy_curves(-1.0, 10)).unwrap();
    assert!(bad["error"].is_string());
    let bad: serde_json::Value = serde_json::from_str(&predict(5, 0.8, 10, 1, 1, "x", 3, 1.0)).unwrap();
    assert!(bad["error"].is_string());
    let good: serde_json::Value = serde_json::from_str(&hit_ratio_sweep(5, 0.8, 50, 1, 2, 1)).unwrap();
    assert!(good.is_array());
}
