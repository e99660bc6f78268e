//! Config-driven pipeline: ingest, stratify, estimate, test, report.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sevlogit_core::data::schema::{parse_records_path, CrashSchema, ParseOutcome, RejectedRow};
use sevlogit_core::data::{save_dataset, stratify, summarize, Exclusion, Stratification};
use sevlogit_core::estimate::{estimate, EstimationOptions};
use sevlogit_core::inference::{lr_pooled_test, marginal_effects_at, pooled_df, transferability_matrix};
use sevlogit_core::model::validate_spec;
use sevlogit_core::{Dataset, EstimationResult, ModelSpec, Stratum};

use crate::config::RunConfig;
use crate::report::{render_comparison, render_stratum, PooledSection, ReportDocument, StratumReport, FORMAT_TAG};

/// Exit status for a failed input or specification check.
pub const EXIT_INVALID: u8 = 1;
/// Exit status when an estimation stopped without converging.
pub const EXIT_NOT_CONVERGED: u8 = 2;

/// A failure tagged with the pipeline stage it came from.
#[derive(Debug)]
pub struct StageError {
    pub stage: String,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:#}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

pub trait AtStage<T> {
    fn at(self, stage: impl Into<String>) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> AtStage<T> for Result<T, E> {
    fn at(self, stage: impl Into<String>) -> Result<T, StageError> {
        self.map_err(|e| StageError {
            stage: stage.into(),
            source: e.into(),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct IngestLog<'a> {
    pub parsed: usize,
    pub filtered_non_truck: usize,
    pub rejects: &'a [RejectedRow],
    pub excluded: &'a [Exclusion],
    pub sizes: Vec<(Stratum, usize)>,
    pub warnings: &'a [String],
}

pub struct Ingested {
    pub parse: ParseOutcome,
    pub strata: Stratification,
}

pub fn ingest(input: &Path, schema: Option<&Path>, strict: bool) -> anyhow::Result<Ingested> {
    let schema = match schema {
        Some(p) => CrashSchema::from_path(p)?,
        None => CrashSchema::default(),
    };
    let parse = parse_records_path(input, &schema, strict)?;
    let strata = stratify(&parse.records)?;
    Ok(Ingested { parse, strata })
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes one dataset file per stratum plus `ingest.json`.
pub fn write_ingest(dir: &Path, ing: &Ingested) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut sizes = Vec::new();
    for s in [Stratum::Normal, Stratum::Rain, Stratum::Snow, Stratum::Pooled] {
        let ds = ing.strata.get(s);
        save_dataset(ds, &dir.join(format!("dataset_{s}.jsonl")))?;
        sizes.push((s, ds.len()));
    }
    write_json(
        &dir.join("ingest.json"),
        &IngestLog {
            parsed: ing.parse.records.len(),
            filtered_non_truck: ing.parse.filtered_non_truck,
            rejects: &ing.parse.rejects,
            excluded: &ing.strata.excluded,
            sizes,
            warnings: &ing.strata.warnings,
        },
    )
}

/// Rejects any spec naming a variable the data does not carry.
pub fn check_spec(stratum: Stratum, spec: &ModelSpec, dataset: &Dataset) -> anyhow::Result<()> {
    validate_spec(spec, dataset.indicator_names()).map_err(|v| {
        let list: Vec<String> = v.iter().map(ToString::to_string).collect();
        anyhow::anyhow!("invalid {stratum} specification: {}", list.join("; "))
    })
}

pub struct RunSummary {
    pub document: ReportDocument,
    /// Own-stratum and pooled fits all converged.
    pub converged: bool,
    pub output_dir: PathBuf,
}

impl RunSummary {
    pub fn exit_code(&self) -> u8 {
        if self.converged {
            0
        } else {
            EXIT_NOT_CONVERGED
        }
    }
}

fn fit(stratum: Stratum, spec: &ModelSpec, data: &Dataset, options: &EstimationOptions) -> Result<EstimationResult, StageError> {
    let r = estimate(spec, data, options).at(format!("estimate {stratum}"))?;
    if !r.converged {
        log::warn!("{stratum}: estimation stopped without converging ({:?})", r.termination);
    }
    Ok(r)
}

/// Runs every configured stage and writes its artifacts to the output
/// directory. Non-convergence is not an error: artifacts are written and the
/// summary reports it.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary, StageError> {
    let out = &cfg.output_dir;
    let mut specs = Vec::new();
    for &s in &cfg.strata {
        let spec = cfg.load_spec(s).at("config")?.expect("validated");
        specs.push((s, spec));
    }
    let pooled_spec = cfg.load_spec(Stratum::Pooled).at("config")?;

    let ing = ingest(&cfg.input, cfg.schema.as_deref(), cfg.strict).at("ingest")?;
    for (s, spec) in &specs {
        check_spec(*s, spec, ing.strata.get(*s)).at("validate")?;
    }
    if let Some(p) = &pooled_spec {
        check_spec(Stratum::Pooled, p, &ing.strata.pooled).at("validate")?;
    }
    write_ingest(out, &ing).at("ingest")?;

    let mut warnings = ing.strata.warnings.clone();
    let mut converged = true;
    let mut own = Vec::new();
    let mut reports = Vec::new();
    for (s, spec) in &specs {
        let data = ing.strata.get(*s);
        let summary = summarize(data).at(format!("summarize {s}"))?;
        let result = fit(*s, spec, data, &cfg.options)?;
        converged &= result.converged;
        if !result.converged {
            warnings.push(format!("{s}: estimation did not converge ({:?})", result.termination));
        }
        write_json(&out.join(format!("estimate_{s}.json")), &result).at(format!("estimate {s}"))?;
        let margins = marginal_effects_at(&result, data).at(format!("margins {s}"))?;
        write_json(&out.join(format!("margins_{s}.json")), &margins).at(format!("margins {s}"))?;
        let mut rep = StratumReport::new(*s, &result, &margins).at(format!("report {s}"))?;
        rep.level_shares = summary.levels;
        fs::write(out.join(format!("report_{s}.txt")), render_stratum(&rep)).at(format!("report {s}"))?;
        reports.push(rep);
        own.push(result);
    }

    let pooled = match &pooled_spec {
        None => None,
        Some(p) => {
            let result = fit(Stratum::Pooled, p, &ing.strata.pooled, &cfg.options)?;
            converged &= result.converged;
            if !result.converged {
                warnings.push(format!("pooled: estimation did not converge ({:?})", result.termination));
            }
            write_json(&out.join("estimate_pooled.json"), &result).at("estimate pooled")?;
            let strata_specs: Vec<&ModelSpec> = specs.iter().map(|(_, s)| s).collect();
            let ll_strata: Vec<(Stratum, f64)> = specs.iter().zip(&own).map(|((s, _), r)| (*s, r.ll_converged)).collect();
            let lls: Vec<f64> = ll_strata.iter().map(|(_, l)| *l).collect();
            let test = pooled_df(p, &strata_specs).and_then(|df| lr_pooled_test(result.ll_converged, &lls, df));
            let (test, error) = match test {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Some(PooledSection {
                ll_full: result.ll_converged,
                converged: result.converged,
                ll_strata,
                test,
                error,
            })
        }
    };

    let transfer = if cfg.transfer && specs.len() >= 2 {
        let strata: Vec<_> = specs.iter().map(|(s, spec)| (*s, spec, ing.strata.get(*s))).collect();
        let own_refs: Vec<&EstimationResult> = own.iter().collect();
        let cells = transferability_matrix(&strata, &own_refs, &cfg.options).at("transfer")?;
        for c in &cells {
            if !c.converged {
                warnings.push(format!("transfer {} on {}: estimation did not converge", c.model, c.data));
            }
        }
        write_json(&out.join("transfer.json"), &cells).at("transfer")?;
        cells
    } else {
        Vec::new()
    };

    let comparison = (reports.len() >= 2).then(|| render_comparison(&reports, cfg.significance_t, cfg.arrows));
    let document = ReportDocument {
        format: FORMAT_TAG.to_string(),
        strata: reports,
        pooled,
        transfer,
        comparison,
        excluded: ing.strata.excluded.len(),
        rejected: ing.parse.rejects.len(),
        warnings,
    };
    document.check().at("report")?;
    fs::write(out.join("report.json"), document.to_json().at("report")?).at("report")?;
    fs::write(out.join("report.txt"), document.render_text()).at("report")?;
    Ok(RunSummary {
        document,
        converged,
        output_dir: out.clone(),
    })
}
