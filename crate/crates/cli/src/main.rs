use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use vaguemarkov::fuzzy::FuzzyTimePartition;
use vaguemarkov::jsonl::{from_jsonl, to_jsonl};
use vaguemarkov::log_ingest::{filter_page_views, parse_log_bytes, LogEntry, LogFormat};
use vaguemarkov::pipeline::{self, emit_report, PipelineConfig};
use vaguemarkov::predictor::Predictor;
use vaguemarkov::rules::{mine, VagueDatabase, VagueRule};
use vaguemarkov::session::{sessionize, Session};
use vaguemarkov::sim::{simulate, split_sessions, SimConfig, SimReport};
use vaguemarkov::synth::{self, GeneratorSpec};
use vaguemarkov::TransitionModel;

const VERBOSITY_ENV: &str = "VAGUEMARKOV_LOG";

#[derive(Parser)]
#[command(name = "vaguemarkov", version, about = "Next-page prediction and prefetch simulation from access logs")]
struct Cli {
    /// JSON pipeline configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an access log into JSON-lines entries.
    Parse {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        format: Option<LogFormat>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter page views and group entries into sessions.
    Sessionize {
        #[arg(long)]
        entries: PathBuf,
        #[arg(long)]
        timeout: Option<i64>,
        /// Keep every entry, not just page views.
        #[arg(long)]
        no_filter: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train an order-k Markov model on sessions.
    Train {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mine vague association rules from session dwell times.
    Mine {
        #[arg(long)]
        sessions: PathBuf,
        #[command(flatten)]
        mining: MiningFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank next-page candidates for a context.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Comma-separated recent pages, oldest first.
        #[arg(long)]
        context: String,
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[command(flatten)]
        scoring: ScoringFlags,
    },
    /// Train on the early sessions and replay the rest through the cache.
    Simulate {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        #[command(flatten)]
        mining: MiningFlags,
        #[command(flatten)]
        scoring: ScoringFlags,
        #[command(flatten)]
        sim: SimFlags,
        /// Append the prefetch-on report as a CSV row (header written for new files).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate a synthetic access log from a known Markov chain.
    Gen {
        #[arg(long, default_value_t = 50)]
        pages: usize,
        #[arg(long, default_value_t = 10_000)]
        sessions: usize,
        /// Defaults to the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Probability of each page's dominant successor.
        #[arg(long, default_value_t = 0.8)]
        dominant: f64,
        /// Full generator spec as JSON; overrides the other generator flags.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage on a log and print the simulation report.
    Pipeline {
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        format: Option<LogFormat>,
        #[arg(long)]
        timeout: Option<i64>,
        #[arg(long)]
        order: Option<usize>,
        #[command(flatten)]
        mining: MiningFlags,
        #[command(flatten)]
        scoring: ScoringFlags,
        #[command(flatten)]
        sim: SimFlags,
        /// Directory for intermediates and the run manifest.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MiningFlags {
    #[arg(long)]
    min_supp: Option<f64>,
    #[arg(long)]
    min_conf: Option<f64>,
    #[arg(long)]
    min_attr: Option<f64>,
    #[arg(long)]
    max_hesitation: Option<f64>,
    #[arg(long)]
    max_antecedent: Option<usize>,
    /// Fuzzy partition JSON: {max_td_s, sets: [{label, a, b, c, d}]}.
    #[arg(long)]
    fuzzy_config: Option<PathBuf>,
}

#[derive(Args)]
struct ScoringFlags {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct SimFlags {
    #[arg(long)]
    cache_size: Option<usize>,
    #[arg(long)]
    prefetch_k: Option<usize>,
    #[arg(long)]
    context_len: Option<usize>,
    #[arg(long)]
    split: Option<f64>,
}

#[derive(Debug)]
enum CliError {
    /// Bad parameters: exit 2.
    Usage(String),
    /// Unreadable or invalid input: exit 1.
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }

    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl MiningFlags {
    fn apply(&self, config: &mut PipelineConfig) -> CliResult<()> {
        set(&mut config.mining.min_support, self.min_supp);
        set(&mut config.mining.min_confidence, self.min_conf);
        set(&mut config.mining.min_attractiveness, self.min_attr);
        set(&mut config.mining.max_antecedent, self.max_antecedent);
        if self.max_hesitation.is_some() {
            config.mining.max_hesitation = self.max_hesitation;
        }
        if let Some(path) = &self.fuzzy_config {
            let partition: FuzzyTimePartition = read_json(path)?;
            partition.validate().map_err(CliError::usage)?;
            config.fuzzy = partition;
        }
        Ok(())
    }
}

impl ScoringFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        set(&mut config.beta, self.beta);
        set(&mut config.gamma, self.gamma);
    }
}

impl SimFlags {
    fn apply(&self, config: &mut PipelineConfig) {
        set(&mut config.sim.capacity, self.cache_size);
        set(&mut config.sim.prefetch_k, self.prefetch_k);
        set(&mut config.sim.context_len, self.context_len);
        set(&mut config.split, self.split);
    }
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf).map_err(CliError::data)?;
        return Ok(buf);
    }
    fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    String::from_utf8(read_bytes(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    from_jsonl(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        }
        _ => io::stdout().write_all(text.as_bytes()).map_err(CliError::data),
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    match path {
        Some(p) => read_json(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn validated(config: PipelineConfig) -> CliResult<PipelineConfig> {
    config.validate().map_err(CliError::usage)?;
    Ok(config)
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a PipelineConfig,
    inputs: Vec<InputDigest>,
    ingest: &'a vaguemarkov::log_ingest::IngestReport,
    sessions: usize,
    train_sessions: usize,
    test_sessions: usize,
    rules: usize,
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Parse { log, format, out } => {
            set(&mut config.format, format);
            let (entries, report) = parse_log_bytes(&read_bytes(&log)?, config.format);
            log::info!("parsed {} lines, rejected {}", report.parsed_count, report.rejected_count);
            eprintln!("{}", serde_json::to_string(&report).expect("serialisable"));
            write_output(out.as_deref(), &to_jsonl(&entries))
        }
        Command::Sessionize { entries, timeout, no_filter, out } => {
            set(&mut config.timeout_s, timeout);
            let config = validated(config)?;
            let entries: Vec<LogEntry> = read_jsonl(&entries)?;
            let views = if no_filter {
                entries
            } else {
                filter_page_views(&entries, &config.filter)
            };
            let sessions = sessionize(&views, config.timeout_s);
            log::info!("{} page views -> {} sessions", views.len(), sessions.len());
            write_output(out.as_deref(), &to_jsonl(&sessions))
        }
        Command::Train { sessions, order, out } => {
            set(&mut config.order, order);
            let config = validated(config)?;
            let sessions: Vec<Session> = read_jsonl(&sessions)?;
            let model = TransitionModel::train(&sessions, config.order).map_err(CliError::usage)?;
            write_output(out.as_deref(), &pretty(&model))
        }
        Command::Mine { sessions, mining, out } => {
            mining.apply(&mut config)?;
            let config = validated(config)?;
            let sessions: Vec<Session> = read_jsonl(&sessions)?;
            let db = VagueDatabase::build(&sessions, &config.fuzzy).map_err(CliError::data)?;
            let rules = mine(&db, &config.mining).map_err(CliError::usage)?;
            log::info!("{} vague sessions -> {} rules", db.session_count(), rules.len());
            write_output(out.as_deref(), &to_jsonl(&rules))
        }
        Command::Predict { model, rules, context, top, scoring } => {
            scoring.apply(&mut config);
            if top == 0 {
                return Err(CliError::Usage("--top must be at least 1".into()));
            }
            let model: TransitionModel = read_json(&model)?;
            let rules: Vec<VagueRule> = match rules {
                Some(path) => read_jsonl(&path)?,
                None => Vec::new(),
            };
            let predictor =
                Predictor::build(model, rules, config.beta, config.gamma).map_err(CliError::usage)?;
            let context: Vec<String> = context
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(String::from)
                .collect();
            write_output(None, &pretty(&predictor.predict(&context, top)))
        }
        Command::Simulate { sessions, order, mining, scoring, sim, csv } => {
            set(&mut config.order, order);
            mining.apply(&mut config)?;
            scoring.apply(&mut config);
            sim.apply(&mut config);
            let config = validated(config)?;
            let sessions: Vec<Session> = read_jsonl(&sessions)?;
            let (train, test) = split_sessions(&sessions, config.split).map_err(CliError::data)?;
            let model = TransitionModel::train(&train, config.order).map_err(CliError::usage)?;
            let rules = pipeline::mine_sessions(&train, &config).map_err(CliError::data)?;
            let predictor =
                Predictor::build(model, rules, config.beta, config.gamma).map_err(CliError::usage)?;
            let on = simulate(&test, &predictor, config.sim).map_err(CliError::usage)?;
            let off = simulate(&test, &predictor, SimConfig { prefetch_k: 0, ..config.sim })
                .map_err(CliError::usage)?;
            if let Some(path) = csv {
                append_csv(&path, &on)?;
            }
            let (text, json) = emit_report(on, Some(off));
            eprint!("{text}");
            write_output(None, &pretty(&json))
        }
        Command::Gen { pages, sessions, seed, dominant, spec, out } => {
            let spec = match spec {
                Some(path) => read_json::<GeneratorSpec>(&path)?,
                None => GeneratorSpec::dominant(pages, dominant, sessions, seed.unwrap_or(config.seed)),
            };
            let lines = synth::generate(&spec).map_err(CliError::usage)?;
            let mut text = lines.join("\n");
            if !text.is_empty() {
                text.push('\n');
            }
            write_output(out.as_deref(), &text)
        }
        Command::Pipeline { log, format, timeout, order, mining, scoring, sim, out_dir } => {
            if let Some(path) = log {
                config.log = Some(path.display().to_string());
            }
            if let Some(dir) = out_dir {
                config.out_dir = Some(dir.display().to_string());
            }
            set(&mut config.format, format);
            set(&mut config.timeout_s, timeout);
            set(&mut config.order, order);
            mining.apply(&mut config)?;
            scoring.apply(&mut config);
            sim.apply(&mut config);
            let config = validated(config)?;
            let log_path = config
                .log
                .clone()
                .ok_or_else(|| CliError::Usage("--log is required (flag or config)".into()))?;
            let data = read_bytes(Path::new(&log_path))?;
            let run = pipeline::run(&data, &config).map_err(CliError::data)?;
            let manifest = Manifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                config: &config,
                inputs: vec![InputDigest {
                    path: log_path,
                    sha256: digest(&data),
                }],
                ingest: &run.ingest,
                sessions: run.sessions.len(),
                train_sessions: run.train.len(),
                test_sessions: run.test.len(),
                rules: run.rules.len(),
            };
            match &config.out_dir {
                Some(dir) => {
                    let dir = PathBuf::from(dir);
                    fs::create_dir_all(&dir).map_err(CliError::data)?;
                    let put = |name: &str, text: String| write_output(Some(&dir.join(name)), &text);
                    put("sessions.jsonl", to_jsonl(&run.sessions))?;
                    put("model.json", pretty(&run.model))?;
                    put("rules.jsonl", to_jsonl(&run.rules))?;
                    put("report.json", pretty(&run.report))?;
                    put("manifest.json", pretty(&manifest))?;
                }
                None => eprintln!("{}", serde_json::to_string(&manifest).expect("serialisable")),
            }
            eprint!("{}", run.report.render_text());
            write_output(None, &pretty(&run.report))
        }
    }
}

fn append_csv(path: &Path, report: &SimReport) -> CliResult<()> {
    let fresh = !path.exists();
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if fresh {
        writeln!(file, "{}", SimReport::CSV_HEADER).map_err(CliError::data)?;
    }
    writeln!(file, "{}", report.csv_row()).map_err(CliError::data)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(VERBOSITY_ENV, "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, message, code) = match err {
                CliError::Usage(m) => ("usage", m, 2),
                CliError::Data(m) => ("data", m, 1),
            };
            eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
            ExitCode::from(code)
        }
    }
}
