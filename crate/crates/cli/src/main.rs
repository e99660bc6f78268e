use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use sevlogit_core::data::{load_dataset, save_dataset, summarize};
use sevlogit_core::estimate::{estimate, EstimationOptions};
use sevlogit_core::halton::build_draws;
use sevlogit_core::inference::{lr_pooled_test, lr_transferability, marginal_effects_at, pooled_df, transferability_matrix, LrTestResult};
use sevlogit_core::model::parameter_layout;
use sevlogit_core::synthetic::{generate_dataset, GenConfig};
use sevlogit_core::{EstimationResult, MarginalEffectsTable, ModelSpec};
use sevlogit_cli::pipeline::{self, AtStage, StageError, EXIT_INVALID, EXIT_NOT_CONVERGED};
use sevlogit_cli::report::{render_estimation_table, render_transfer, ReportDocument};
use sevlogit_cli::{Overrides, RunConfig};

/// Mixed logit injury severity models: ingestion, estimation, tests, reports.
///
/// Log verbosity is read from SEVLOGIT_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "sevlogit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct DrawArgs {
    /// Halton draws per observation
    #[arg(long)]
    draws: Option<usize>,
    /// Leading Halton points discarded
    #[arg(long)]
    skip: Option<u64>,
}

impl From<DrawArgs> for Overrides {
    fn from(a: DrawArgs) -> Self {
        Overrides { draws: a.draws, skip: a.skip }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a crash CSV, code indicators and split by weather
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Treat any rejected row as fatal
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Descriptive statistics of a dataset file
    Summarize {
        dataset: PathBuf,
        /// Also write the table as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Fit a specification to a dataset
    Estimate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Estimation options JSON
        #[arg(long)]
        options: Option<PathBuf>,
        #[command(flatten)]
        draws: DrawArgs,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Marginal effects at an estimation result
    Margins {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Likelihood ratio tests from log-likelihoods or result files
    #[command(subcommand)]
    Lrtest(LrCommand),
    /// Cross-stratum transferability tests for every pair of strata
    Transfer {
        config: PathBuf,
        #[command(flatten)]
        draws: DrawArgs,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Generate a synthetic dataset from known parameters
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Re-render a JSON report as text after checking it
    Report { report: PathBuf },
    /// Full pipeline from a config file
    Run {
        config: PathBuf,
        #[command(flatten)]
        draws: DrawArgs,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Halton draw utilities
    #[command(subcommand)]
    Draws(DrawsCommand),
}

#[derive(Subcommand)]
enum LrCommand {
    /// Pooled model against separate strata models
    Pooled {
        /// Pooled log-likelihood or result file
        #[arg(long, allow_negative_numbers = true)]
        full: String,
        /// Stratum log-likelihoods or result files
        #[arg(long, num_args = 1.., allow_negative_numbers = true, required = true)]
        strata: Vec<String>,
        /// Required when any input is a bare number
        #[arg(long)]
        df: Option<u32>,
    },
    /// Specification of one stratum re-estimated on another's data
    Transfer {
        /// Log-likelihood of the foreign specification on the data, or result file
        #[arg(long, allow_negative_numbers = true)]
        foreign: String,
        /// The data stratum's own log-likelihood, or result file
        #[arg(long, allow_negative_numbers = true)]
        own: String,
        #[arg(long)]
        df: Option<u32>,
    },
}

#[derive(Subcommand)]
enum DrawsCommand {
    /// Write a draw matrix and its configuration as JSON
    Export {
        #[arg(long)]
        obs: usize,
        #[arg(long)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        dims: usize,
        #[arg(long, default_value_t = sevlogit_core::halton::DEFAULT_SKIP)]
        skip: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// A log-likelihood given inline, or read from an estimation result file.
fn ll_source(arg: &str) -> anyhow::Result<(f64, Option<ModelSpec>)> {
    if let Ok(v) = arg.parse::<f64>() {
        return Ok((v, None));
    }
    let r: EstimationResult = read_json(Path::new(arg))?;
    Ok((r.ll_converged, Some(r.spec)))
}

fn lrtest(cmd: LrCommand) -> anyhow::Result<LrTestResult> {
    match cmd {
        LrCommand::Pooled { full, strata, df } => {
            let (ll_full, full_spec) = ll_source(&full)?;
            let parts = strata.iter().map(|s| ll_source(s)).collect::<anyhow::Result<Vec<_>>>()?;
            let df = match (df, &full_spec) {
                (Some(d), _) => d,
                (None, Some(f)) if parts.iter().all(|p| p.1.is_some()) => {
                    let specs: Vec<&ModelSpec> = parts.iter().filter_map(|p| p.1.as_ref()).collect();
                    pooled_df(f, &specs)?
                }
                _ => bail!("--df is required when log-likelihoods are given as numbers"),
            };
            let lls: Vec<f64> = parts.iter().map(|p| p.0).collect();
            Ok(lr_pooled_test(ll_full, &lls, df)?)
        }
        LrCommand::Transfer { foreign, own, df } => {
            let (ll_a, spec_a) = ll_source(&foreign)?;
            let (ll_b, _) = ll_source(&own)?;
            let df = match (df, spec_a) {
                (Some(d), _) => d,
                (None, Some(s)) => s.n_parameters() as u32,
                (None, None) => bail!("--df is required when the foreign log-likelihood is a number"),
            };
            Ok(lr_transferability(ll_a, ll_b, df)?)
        }
    }
}

fn load_config(path: &Path, draws: DrawArgs, output_dir: Option<PathBuf>) -> Result<RunConfig, StageError> {
    let mut cfg = RunConfig::load(path).at("config")?;
    Overrides::from(draws).apply(&mut cfg.options);
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    cfg.validate().at("config")?;
    Ok(cfg)
}

fn transfer(cfg: &RunConfig) -> Result<(), StageError> {
    let ing = pipeline::ingest(&cfg.input, cfg.schema.as_deref(), cfg.strict).at("ingest")?;
    let mut specs = Vec::new();
    for &s in &cfg.strata {
        let spec = cfg.load_spec(s).at("config")?.expect("validated");
        pipeline::check_spec(s, &spec, ing.strata.get(s)).at("validate")?;
        specs.push((s, spec));
    }
    let own = specs
        .iter()
        .map(|(s, spec)| estimate(spec, ing.strata.get(*s), &cfg.options).at(format!("estimate {s}")))
        .collect::<Result<Vec<_>, _>>()?;
    let strata: Vec<_> = specs.iter().map(|(s, spec)| (*s, spec, ing.strata.get(*s))).collect();
    let cells = transferability_matrix(&strata, &own.iter().collect::<Vec<_>>(), &cfg.options).at("transfer")?;
    write_json(&cfg.output_dir.join("transfer.json"), &cells).at("transfer")?;
    print!("{}", render_transfer(&cells));
    Ok(())
}

fn execute(command: Command) -> Result<u8, StageError> {
    match command {
        Command::Ingest {
            input,
            schema,
            strict,
            output_dir,
        } => {
            let ing = pipeline::ingest(&input, schema.as_deref(), strict).at("ingest")?;
            pipeline::write_ingest(&output_dir, &ing).at("ingest")?;
            println!(
                "parsed {} records, {} rejected, {} excluded; normal {}, rain {}, snow {}",
                ing.parse.records.len(),
                ing.parse.rejects.len(),
                ing.strata.excluded.len(),
                ing.strata.normal.len(),
                ing.strata.rain.len(),
                ing.strata.snow.len()
            );
            Ok(0)
        }
        Command::Summarize { dataset, json } => {
            let ds = load_dataset(&dataset).at("summarize")?;
            let table = summarize(&ds).at("summarize")?;
            print!("{}", table.render());
            if let Some(p) = json {
                write_json(&p, &table).at("summarize")?;
            }
            Ok(0)
        }
        Command::Estimate {
            dataset,
            spec,
            options,
            draws,
            max_iterations,
            output,
        } => {
            let ds = load_dataset(&dataset).at("estimate")?;
            let spec = ModelSpec::from_path(&spec).at("config")?;
            let mut opts = match options {
                Some(p) => read_json::<EstimationOptions>(&p).at("config")?,
                None => EstimationOptions::default(),
            };
            Overrides::from(draws).apply(&mut opts);
            if let Some(m) = max_iterations {
                opts.max_iterations = m;
            }
            pipeline::check_spec(ds.stratum, &spec, &ds).at("validate")?;
            let result = estimate(&spec, &ds, &opts).at("estimate")?;
            write_json(&output, &result).at("estimate")?;
            let empty = MarginalEffectsTable { rows: Vec::new() };
            print!("{}", render_estimation_table(ds.stratum, &result, &empty).at("report")?);
            Ok(if result.converged { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::Margins { dataset, result, output } => {
            let ds = load_dataset(&dataset).at("margins")?;
            let result: EstimationResult = read_json(&result).at("margins")?;
            let table = marginal_effects_at(&result, &ds).at("margins")?;
            print!("{}", render_estimation_table(ds.stratum, &result, &table).at("report")?);
            if let Some(p) = output {
                write_json(&p, &table).at("margins")?;
            }
            Ok(0)
        }
        Command::Lrtest(cmd) => {
            let r = lrtest(cmd).at("lrtest")?;
            println!("{}", serde_json::to_string_pretty(&r).at("lrtest")?);
            println!("{r}");
            Ok(0)
        }
        Command::Transfer {
            config,
            draws,
            output_dir,
        } => {
            let cfg = load_config(&config, draws, output_dir)?;
            transfer(&cfg)?;
            Ok(0)
        }
        Command::Simulate { config, seed, output } => {
            let mut gen: GenConfig = read_json(&config).at("config")?;
            if let Some(s) = seed {
                gen.seed = s;
            }
            let ds = generate_dataset(&gen).at("simulate")?;
            if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).at("simulate")?;
            }
            save_dataset(&ds, &output).at("simulate")?;
            let truth = serde_json::json!({
                "parameter_names": parameter_layout(&gen.spec).names(),
                "theta_true": gen.theta_true,
                "spec": gen.spec,
                "seed": gen.seed,
                "n_obs": gen.n_obs,
            });
            write_json(&output.with_extension("truth.json"), &truth).at("simulate")?;
            let c = ds.level_counts();
            println!("{} observations (major {}, minor {}, none {})", ds.len(), c[0], c[1], c[2]);
            Ok(0)
        }
        Command::Report { report } => {
            let text = fs::read_to_string(&report).at("report")?;
            let doc = ReportDocument::from_json(&text).at("report")?;
            doc.check().at("report")?;
            print!("{}", doc.render_text());
            Ok(0)
        }
        Command::Run {
            config,
            draws,
            output_dir,
        } => {
            let cfg = load_config(&config, draws, output_dir)?;
            let summary = pipeline::run_pipeline(&cfg)?;
            print!("{}", summary.document.render_text());
            Ok(summary.exit_code())
        }
        Command::Draws(DrawsCommand::Export {
            obs,
            draws,
            dims,
            skip,
            output,
        }) => {
            let m = build_draws(obs, draws, dims, skip).at("draws")?;
            let doc = serde_json::json!({
                "header": {
                    "generator": "halton",
                    "transform": "standard normal quantile",
                    "index": "skip + 1 + observation * n_draws + draw",
                    "n_obs": m.n_obs(),
                    "n_draws": m.n_draws(),
                    "n_dims": m.n_dims(),
                    "skip": m.skip(),
                    "bases": m.bases(),
                },
                "values": m.values(),
            });
            write_json(&output, &doc).at("draws")?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEVLOGIT_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
