//! End-to-end wiring: log -> sessions -> model + rules -> cache replay.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{FuzzyError, FuzzyTimePartition, DEFAULT_MAX_TD_S};
use crate::log_ingest::{filter_page_views, parse_log_bytes, FilterConfig, IngestReport, LogFormat};
use crate::markov::{MarkovError, TransitionModel};
use crate::predictor::{Predictor, PredictorError, DEFAULT_BETA, DEFAULT_GAMMA};
use crate::rules::{mine, MiningError, MiningParams, VagueDatabase, VagueRule};
use crate::session::{sessionize, Session, DEFAULT_TIMEOUT_S};
use crate::sim::{simulate, split_sessions, SimConfig, SimError, SimReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub format: LogFormat,
    pub timeout_s: i64,
    pub filter: FilterConfig,
    pub fuzzy: FuzzyTimePartition,
    pub order: usize,
    pub mining: MiningParams,
    pub beta: f64,
    pub gamma: f64,
    pub sim: SimConfig,
    pub split: f64,
    pub seed: u64,
    pub log: Option<String>,
    pub out_dir: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            format: LogFormat::Common,
            timeout_s: DEFAULT_TIMEOUT_S,
            filter: FilterConfig::default(),
            fuzzy: FuzzyTimePartition::default_partition(DEFAULT_MAX_TD_S)
                .expect("default partition is valid"),
            order: 1,
            mining: MiningParams::default(),
            beta: DEFAULT_BETA,
            gamma: DEFAULT_GAMMA,
            sim: SimConfig::default(),
            split: 0.8,
            seed: 42,
            log: None,
            out_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.timeout_s <= 0 {
            return Err(PipelineError::Config("timeout_s must be positive".into()));
        }
        self.fuzzy.validate()?;
        if self.fuzzy.len() != 3 {
            return Err(PipelineError::Config(
                "fuzzy partition must have exactly 3 sets (short, medium, long)".into(),
            ));
        }
        if self.order == 0 {
            return Err(MarkovError::ZeroOrder.into());
        }
        self.mining.validate()?;
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(SimError::Fraction(self.split).into());
        }
        Ok(())
    }
}

/// Prefetch-on result alongside the prefetch-off baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub prefetch_on: SimReport,
    pub prefetch_off: Option<SimReport>,
    pub hit_ratio_delta: Option<f64>,
}

impl ComparisonReport {
    pub fn new(on: SimReport, off: Option<SimReport>) -> Self {
        let hit_ratio_delta = off.as_ref().map(|o| on.hit_ratio - o.hit_ratio);
        ComparisonReport {
            prefetch_on: on,
            prefetch_off: off,
            hit_ratio_delta,
        }
    }

    pub fn render_text(&self) -> String {
        let on = &self.prefetch_on;
        let mut out = format!("hit ratio (prefetch on):  {:.4}\n", on.hit_ratio);
        match (&self.prefetch_off, self.hit_ratio_delta) {
            (Some(off), Some(delta)) => {
                out.push_str(&format!("hit ratio (prefetch off): {:.4}\n", off.hit_ratio));
                out.push_str(&format!("delta:                    {delta:+.4}\n"));
            }
            _ => {
                out.push_str("hit ratio (prefetch off): n/a\n");
                out.push_str("delta:                    n/a\n");
            }
        }
        out.push_str(&format!(
            "prefetch precision:       {:.4} ({} of {} prefetches used)\n",
            on.prefetch_precision, on.useful_prefetches, on.prefetches_issued
        ));
        out.push_str(&format!("extra fetch overhead:     {:.4}\n", on.extra_fetch_overhead));
        out
    }
}

pub fn emit_report(on: SimReport, off: Option<SimReport>) -> (String, serde_json::Value) {
    let report = ComparisonReport::new(on, off);
    let json = serde_json::to_value(&report).expect("report serialises");
    (report.render_text(), json)
}

pub fn sessions_from_log(data: &[u8], config: &PipelineConfig) -> (Vec<Session>, IngestReport) {
    let (entries, report) = parse_log_bytes(data, config.format);
    let views = filter_page_views(&entries, &config.filter);
    (sessionize(&views, config.timeout_s), report)
}

pub fn mine_sessions(
    sessions: &[Session],
    config: &PipelineConfig,
) -> Result<Vec<VagueRule>, PipelineError> {
    let db = VagueDatabase::build(sessions, &config.fuzzy)?;
    Ok(mine(&db, &config.mining)?)
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub ingest: IngestReport,
    pub sessions: Vec<Session>,
    pub train: Vec<Session>,
    pub test: Vec<Session>,
    pub model: TransitionModel,
    pub rules: Vec<VagueRule>,
    pub report: ComparisonReport,
}

/// Train on the chronologically first sessions, replay the rest.
pub fn run_on_sessions(
    sessions: Vec<Session>,
    ingest: IngestReport,
    config: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    config.validate()?;
    let (train, test) = split_sessions(&sessions, config.split)?;
    let model = TransitionModel::train(&train, config.order)?;
    let rules = mine_sessions(&train, config)?;
    let predictor = Predictor::build(model.clone(), rules.clone(), config.beta, config.gamma)?;
    let on = simulate(&test, &predictor, config.sim)?;
    let off = simulate(&test, &predictor, SimConfig { prefetch_k: 0, ..config.sim })?;
    Ok(PipelineRun {
        ingest,
        sessions,
        train,
        test,
        model,
        rules,
        report: ComparisonReport::new(on, Some(off)),
    })
}

pub fn run(data: &[u8], config: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    config.validate()?;
    let (sessions, ingest) = sessions_from_log(data, config);
    run_on_sessions(sessions, ingest, config)
}
