//! Next-page prediction from web access logs.
//!
//! Access logs are parsed and split into sessions; an order-k Markov model
//! proposes next pages, and association rules mined from vague (interval)
//! dwell-time evidence re-score those proposals. A trace-driven cache
//! simulator measures what prefetching the predictions buys.

pub mod fuzzy;
pub mod jsonl;
pub mod log_ingest;
pub mod markov;
pub mod pipeline;
pub mod predictor;
pub mod rules;
pub mod session;
pub mod sim;
pub mod synth;
pub mod vague;

pub use fuzzy::{FuzzyTimePartition, MembershipVector, Trapezoid};
pub use log_ingest::{filter_page_views, parse_line, parse_log, FilterConfig, LogEntry, LogFormat};
pub use markov::TransitionModel;
pub use pipeline::{ComparisonReport, PipelineConfig};
pub use predictor::{PagePredictor, Prediction, Predictor};
pub use rules::{mine, MiningParams, VagueDatabase, VagueRule};
pub use session::{sessionize, PageVisit, Session};
pub use sim::{simulate, split_sessions, SimConfig, SimReport};
pub use synth::GeneratorSpec;
pub use vague::VagueValue;
