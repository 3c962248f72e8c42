//! Browser bindings for the interactive demo page in `www/`.
//!
//! Every export returns a JSON string; failures come back as `{"error": "..."}`
//! so the page never has to catch exceptions.

use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use vaguemarkov::pipeline::{run_on_sessions, sessions_from_log, PipelineConfig};
use vaguemarkov::rules::mine;
use vaguemarkov::synth::{generate, GeneratorSpec};
use vaguemarkov::vague::from_memberships;
use vaguemarkov::{FuzzyTimePartition, Predictor, Session, SimConfig, TransitionModel, VagueDatabase};

#[derive(Serialize)]
struct CurvePoint {
    tau: f64,
    raw: Vec<f64>,
    normalized: Vec<f64>,
    t: f64,
    f: f64,
    median: f64,
    imprecision: f64,
}

/// Sample the default partition and the resulting vague value on `[0, 1.2 * max_td]`.
pub fn fuzzy_curves_json(max_td: f64, samples: usize) -> Result<Value, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let partition = FuzzyTimePartition::default_partition(max_td).map_err(|e| e.to_string())?;
    let upper = 1.2 * max_td;
    let mut points = Vec::with_capacity(samples);
    for i in 0..samples {
        let tau = upper * i as f64 / (samples - 1) as f64;
        let m = partition.memberships(tau).map_err(|e| e.to_string())?;
        let v = from_memberships(&m).map_err(|e| e.to_string())?;
        points.push(CurvePoint {
            tau,
            raw: m.raw.clone(),
            normalized: m.normalized.clone(),
            t: v.t(),
            f: v.f(),
            median: v.median(),
            imprecision: v.imprecision(),
        });
    }
    Ok(json!({ "labels": partition.labels(), "max_td_s": max_td, "points": points }))
}

fn synthetic_sessions(pages: usize, dominant: f64, sessions: usize, seed: u64) -> Result<Vec<Session>, String> {
    let spec = GeneratorSpec::dominant(pages, dominant, sessions, seed);
    let lines = generate(&spec).map_err(|e| e.to_string())?;
    let mut log = lines.join("\n");
    log.push('\n');
    let config = PipelineConfig {
        timeout_s: spec.timeout_s,
        ..PipelineConfig::default()
    };
    Ok(sessions_from_log(log.as_bytes(), &config).0)
}

/// Rank next pages for `context` (comma-separated page indices) on a generated site.
#[allow(clippy::too_many_arguments)]
pub fn predict_json(
    pages: usize,
    dominant: f64,
    sessions: usize,
    seed: u64,
    order: usize,
    context: &str,
    top: usize,
    beta: f64,
) -> Result<Value, String> {
    let data = synthetic_sessions(pages, dominant, sessions, seed)?;
    let model = TransitionModel::train(&data, order).map_err(|e| e.to_string())?;
    let config = PipelineConfig::default();
    let db = VagueDatabase::build(&data, &config.fuzzy).map_err(|e| e.to_string())?;
    let rules = mine(&db, &config.mining).map_err(|e| e.to_string())?;
    let rule_count = rules.len();
    let predictor = Predictor::build(model, rules, beta, config.gamma).map_err(|e| e.to_string())?;
    let context = context
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map(GeneratorSpec::page_name)
                .map_err(|_| format!("bad page index {s:?}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(json!({
        "context": context,
        "rules": rule_count,
        "predictions": predictor.predict(&context, top),
    }))
}

/// Hit ratio with and without prefetching for each cache size in `1..=max_capacity`.
pub fn sweep_json(
    pages: usize,
    dominant: f64,
    sessions: usize,
    seed: u64,
    max_capacity: usize,
    prefetch_k: usize,
) -> Result<Value, String> {
    let data = synthetic_sessions(pages, dominant, sessions, seed)?;
    let mut rows = Vec::with_capacity(max_capacity);
    for capacity in 1..=max_capacity {
        let config = PipelineConfig {
            sim: SimConfig { capacity, prefetch_k, context_len: 1 },
            ..PipelineConfig::default()
        };
        let run = run_on_sessions(data.clone(), Default::default(), &config).map_err(|e| e.to_string())?;
        let off = run.report.prefetch_off.as_ref().map(|r| r.hit_ratio);
        rows.push(json!({
            "capacity": capacity,
            "on": run.report.prefetch_on.hit_ratio,
            "off": off,
            "precision": run.report.prefetch_on.prefetch_precision,
        }));
    }
    Ok(Value::Array(rows))
}

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen]
pub fn fuzzy_curves(max_td: f64, samples: u32) -> String {
    respond(fuzzy_curves_json(max_td, samples as usize))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn predict(
    pages: u32,
    dominant: f64,
    sessions: u32,
    seed: u32,
    order: u32,
    context: &str,
    top: u32,
    beta: f64,
) -> String {
    respond(predict_json(
        pages as usize,
        dominant,
        sessions as usize,
        seed as u64,
        order as usize,
        context,
        top as usize,
        beta,
    ))
}

#[wasm_bindgen]
pub fn hit_ratio_sweep(
    pages: u32,
    dominant: f64,
    sessions: u32,
    seed: u32,
    max_capacity: u32,
    prefetch_k: u32,
) -> String {
    respond(sweep_json(
        pages as usize,
        dominant,
        sessions as usize,
        seed as u64,
        max_capacity as usize,
        prefetch_k as usize,
    ))
}
