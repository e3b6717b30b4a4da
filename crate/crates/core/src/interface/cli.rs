use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::constraints::validate_batch;
use crate::corpus::{default_constraints, generate_corpus, synthesize_catalog, CorpusConfig, Dataset};
use crate::diffusion::{
    quantize, sample_across, Checkpoint, DenoiserModel, LossContext, ModelConfig, TrainConfig, Trainer, TrainingSet,
};
use crate::domain::io::{load_fixture, load_json, load_jsonl, save_json, save_jsonl};
use crate::domain::Planogram;
use crate::edgesim::{run_load, table2, LatencyModel, LoadScenario, TABLE2_CONCURRENCY};
use crate::evaluation::{build_report, RevenueModel};

use super::{serve, ModelSnapshot, ServiceConfig, ServiceState};

#[derive(Debug, Parser)]
#[command(name = "planoforge", version, about = "Constraint-aware diffusion for retail planograms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags every command accepts.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-store corpus directory.
    CorpusGen {
        #[command(flatten)]
        common: Common,
    },
    /// Train a denoiser on a corpus and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        /// Overrides the configured step count.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Sample planograms from a checkpoint.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Fixture JSON file; defaults to cycling over the corpus stores.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Hard-validate planograms against a corpus's constraint set.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        /// Planogram JSONL file; defaults to the corpus planograms.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Satisfaction, utilization and revenue report for a set of planograms.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Write an 8-bit copy of a checkpoint.
    Quantize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Serverless latency simulation.
    Edgesim {
        #[command(flatten)]
        common: Common,
        /// Print the five-row scalability table.
        #[arg(long)]
        table2: bool,
        /// Scenario JSON file to replay.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Poisson arrival rate per second for a generated scenario.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, default_value_t = 60_000.0)]
        duration_ms: f64,
        #[arg(long, default_value_t = 1)]
        batch: usize,
    },
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        /// Checkpoints to load in order; the last one is active.
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

/// Model, optimizer and revenue settings for `train`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingPlan {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub revenue_model: RevenueModel,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgesimConfig {
    pub model: LatencyModel,
}

fn config_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => load_json(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(T::default()),
    }
}

fn require_out<'a>(common: &'a Common, what: &str) -> Result<&'a Path> {
    common
        .out
        .as_deref()
        .with_context(|| format!("--out is required: {what}"))
}

fn load_planograms(corpus: &Dataset, input: &Option<PathBuf>) -> Result<Vec<Planogram>> {
    match input {
        Some(p) => Ok(load_jsonl(p).with_context(|| format!("reading {}", p.display()))?),
        None => Ok(corpus.planograms().cloned().collect()),
    }
}

fn emit(common: &Common, value: serde_json::Value, text: impl FnOnce() -> String) {
    if common.json {
        println!("{value}");
    } else {
        println!("{}", text());
    }
}

/// Runs one command; printing happens here, errors are returned.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::CorpusGen { common } => {
            let mut config: CorpusConfig = config_or_default(&common.config)?;
            if let Some(seed) = common.seed {
                config.rng_seed = seed;
            }
            let out = require_out(&common, "corpus directory")?;
            let catalog = synthesize_catalog(config.catalog_size, config.rng_seed)?;
            let data = generate_corpus(&config, &default_constraints(&catalog))?;
            std::fs::create_dir_all(out)?;
            data.save(out)?;
            emit(
                &common,
                json!({ "planograms": data.len(), "stores": data.stores.len(), "out": out }),
                || format!("wrote {} planograms for {} stores to {}", data.len(), data.stores.len(), out.display()),
            );
        }
        Command::Train { common, corpus, steps } => {
            let mut plan: TrainingPlan = config_or_default(&common.config)?;
            if let Some(seed) = common.seed {
                plan.train.rng_seed = seed;
            }
            if let Some(steps) = steps {
                plan.train.steps = steps;
            }
            let out = require_out(&common, "checkpoint path")?;
            let data = Dataset::load(&corpus)?;
            let set = TrainingSet::from_planograms(data.planograms(), &data.catalog)?;
            let mut rng = ChaCha8Rng::seed_from_u64(plan.train.rng_seed);
            let model = DenoiserModel::new(plan.model.clone(), &mut rng)?;
            let mut trainer = Trainer::new(model, plan.train.clone())?;
            let ctx = LossContext {
                catalog: &data.catalog,
                constraints: &data.constraints,
                revenue_model: &plan.revenue_model,
                lambda1: plan.train.lambda1,
                lambda2: plan.train.lambda2,
            };
            let start = Instant::now();
            let log_every = (plan.train.steps / 20).max(1);
            trainer.run(&set, &ctx, |step, loss| {
                if step % log_every == 0 {
                    tracing::info!(step, diffusion = loss.diffusion, constraint = loss.constraint, revenue = loss.revenue, "train");
                }
            })?;
            let checkpoint = Checkpoint::new(trainer.model.clone(), plan.train.schedule());
            let bytes = checkpoint.save(out)?;
            let last = trainer.history.last().copied();
            emit(
                &common,
                json!({ "steps": trainer.steps_taken(), "bytes": bytes, "final_loss": last, "seconds": start.elapsed().as_secs_f64() }),
                || {
                    format!(
                        "trained {} steps in {:.1}s, wrote {bytes} bytes to {}",
                        trainer.steps_taken(),
                        start.elapsed().as_secs_f64(),
                        out.display()
                    )
                },
            );
        }
        Command::Sample {
            common,
            checkpoint,
            corpus,
            count,
            fixture,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let data = Dataset::load(&corpus)?;
            let fixtures = match fixture {
                Some(p) => vec![load_fixture(p)?],
                None => data.stores.iter().map(|s| s.fixture.clone()).collect(),
            };
            let schedule = ck.schedule.build()?;
            let seed = common.seed.unwrap_or(0);
            let start = Instant::now();
            let samples = sample_across(&ck.model, &schedule, &fixtures, &data.catalog, seed, count)?;
            let seconds = start.elapsed().as_secs_f64();
            if let Some(out) = &common.out {
                save_jsonl(&samples, out)?;
            }
            let report = validate_batch(&samples, &data.constraints, &data.catalog)?;
            emit(
                &common,
                json!({ "count": samples.len(), "seconds": seconds, "overall": report.overall }),
                || format!("sampled {} planograms in {seconds:.1}s, overall satisfaction {:.3}", samples.len(), report.overall),
            );
        }
        Command::Validate { common, corpus, input } => {
            let data = Dataset::load(&corpus)?;
            let planograms = load_planograms(&data, &input)?;
            let report = validate_batch(&planograms, &data.constraints, &data.catalog)?;
            if let Some(out) = &common.out {
                save_json(&report, out)?;
            }
            let rates = json!({ "overall": report.overall, "per_category_rate": report.per_category_rate, "planograms": planograms.len() });
            emit(&common, rates, || {
                let mut s = format!("{} planograms\n", planograms.len());
                for (kind, rate) in &report.per_category_rate {
                    s.push_str(&format!("{kind:<18} {:.3}\n", rate));
                }
                s.push_str(&format!("{:<18} {:.3}", "overall", report.overall));
                s
            });
        }
        Command::Report { common, corpus, input } => {
            let revenue_model: RevenueModel = config_or_default(&common.config)?;
            let data = Dataset::load(&corpus)?;
            let planograms = load_planograms(&data, &input)?;
            let report = build_report(&planograms, &data.constraints, &data.catalog, &revenue_model)?;
            if let Some(out) = &common.out {
                save_json(&report, out)?;
            }
            emit(&common, serde_json::to_value(&report)?, || report.to_table());
        }
        Command::Quantize { common, checkpoint } => {
            let out = require_out(&common, "quantized checkpoint path")?;
            let ck = Checkpoint::load(&checkpoint)?;
            let (quantized, report) = quantize(&ck)?;
            quantized.save(out)?;
            emit(&common, serde_json::to_value(&report)?, || {
                format!(
                    "{} -> {} bytes (ratio {:.3}), worst tensor error {:.2e}",
                    report.f32_bytes,
                    report.int8_bytes,
                    report.size_ratio,
                    report.tensors.iter().map(|t| t.max_abs_error).fold(0.0, f64::max)
                )
            });
        }
        Command::Edgesim {
            common,
            table2: show_table,
            scenario,
            rate,
            duration_ms,
            batch,
        } => {
            let config: EdgesimConfig = config_or_default(&common.config)?;
            let model = config.model;
            model.validate()?;
            let scenario = match (scenario, rate) {
                (Some(p), _) => Some(load_json::<LoadScenario>(p)?),
                (None, Some(r)) => Some(LoadScenario::poisson(r, duration_ms, batch, common.seed.unwrap_or(0))?),
                (None, None) => None,
            };
            if !show_table && scenario.is_none() {
                bail!("nothing to do: pass --table2, --scenario or --rate");
            }
            let mut out = json!({});
            let mut text = Vec::new();
            if show_table {
                let rows = table2(&model);
                out["table2"] = serde_json::to_value(&rows)?;
                text.push(format!("{:>19} | {:>18} | {:>16}", "Concurrent Requests", "Response Time (ms)", "Latency Increase"));
                text.extend(rows.iter().map(ToString::to_string));
                debug_assert_eq!(rows.len(), TABLE2_CONCURRENCY.len());
            }
            if let Some(s) = scenario {
                let stats = run_load(&s, &model)?;
                out["load"] = serde_json::to_value(&stats)?;
                text.push(format!(
                    "{} requests: p50 {:.0} ms, p95 {:.0} ms, p99 {:.0} ms, {} cold starts, peak in-flight {}",
                    stats.requests, stats.p50_ms, stats.p95_ms, stats.p99_ms, stats.cold_starts, stats.max_in_flight
                ));
            }
            if let Some(path) = &common.out {
                save_json(&out, path)?;
            }
            emit(&common, out, || text.join("\n"));
        }
        Command::Serve {
            common,
            corpus,
            checkpoint,
            addr,
        } => {
            let config: ServiceConfig = config_or_default(&common.config)?;
            let data = Dataset::load(&corpus)?;
            let state = Arc::new(ServiceState::new(data.catalog, data.constraints, config));
            for path in &checkpoint {
                let version = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                state.load(ModelSnapshot::new(version, Checkpoint::load(path)?)?);
            }
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?
                .block_on(serve(addr, state))?;
        }
    }
    Ok(())
}

/// Entry point for the binary: exit code 0 on success, otherwise 1 with
/// one JSON error line on stderr.
pub fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "planoforge=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": format!("{e:#}") }));
            std::process::ExitCode::FAILURE
        }
    }
}
