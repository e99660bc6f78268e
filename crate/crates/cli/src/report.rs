//! Estimation tables, model comparison and the full run report.
//!
//! The JSON document is the contract; the text rendering is derived from it
//! and can be regenerated with `sevlogit report`.

use std::fmt::Write;

use anyhow::{anyhow, bail};
use serde::{Deserialize, Serialize};
use sevlogit_core::data::summary::LevelShare;
use sevlogit_core::estimate::pseudo_r2;
use sevlogit_core::inference::{chi_square_sf, share_below_zero, LrTestResult, TransferCell};
use sevlogit_core::model::{parameter_layout, SlotRole};
use sevlogit_core::optim::Termination;
use sevlogit_core::{EstimationResult, Level, MarginalEffectsTable, MixingDistribution, Stratum, N_LEVELS};

pub const FORMAT_TAG: &str = "sevlogit-report/1";

/// Tolerance for the zero-sum check on marginal effects.
const ZERO_SUM: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRow {
    pub slot: String,
    pub def: String,
    pub variable: String,
    pub level: Level,
    pub role: SlotRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<MixingDistribution>,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub retained: bool,
    /// `P(β < 0)` on the mean row of a normally distributed parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share_below_zero: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStatistics {
    pub n_obs: usize,
    pub ll_zero: f64,
    pub ll_converged: f64,
    pub rho_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    pub stratum: Stratum,
    #[serde(default)]
    pub level_shares: Vec<LevelShare>,
    pub rows: Vec<EstimationRow>,
    pub margins: MarginalEffectsTable,
    pub statistics: ModelStatistics,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub gradient_max: f64,
    pub fingerprint: String,
}

impl StratumReport {
    /// Fails when the margins do not belong to the result's specification.
    pub fn new(stratum: Stratum, result: &EstimationResult, margins: &MarginalEffectsTable) -> anyhow::Result<Self> {
        let vars = result.spec.variables();
        for row in &margins.rows {
            if !vars.contains(&row.variable.as_str()) {
                bail!("marginal effect for '{}' which is not in the {stratum} specification", row.variable);
            }
        }
        let layout = parameter_layout(&result.spec);
        if layout.len() != result.n_parameters() {
            bail!("estimation result does not match its specification");
        }
        let mut rows = Vec::with_capacity(layout.len());
        for (k, slot) in layout.slots.iter().enumerate() {
            let def = &result.spec.defs[slot.def];
            let estimate = result.theta_hat.0[k];
            let share = match (slot.role, def.distribution) {
                (SlotRole::Mean, Some(MixingDistribution::Normal)) => {
                    let sd = result.theta_hat.0[k + 1];
                    share_below_zero(estimate, sd).ok()
                }
                _ => None,
            };
            rows.push(EstimationRow {
                slot: slot.name.clone(),
                def: def.name.clone(),
                variable: def.variable.clone(),
                level: def.level,
                role: slot.role,
                distribution: def.distribution,
                estimate,
                std_error: result.std_errors[k],
                t_stat: result.t_stats[k],
                p_value: result.p_values[k],
                retained: result.retained[k],
                share_below_zero: share,
            });
        }
        Ok(Self {
            stratum,
            level_shares: Vec::new(),
            rows,
            margins: margins.clone(),
            statistics: ModelStatistics {
                n_obs: result.n_obs,
                ll_zero: result.ll_zero,
                ll_converged: result.ll_converged,
                rho_squared: result.rho_squared,
            },
            converged: result.converged,
            termination: result.termination,
            iterations: result.iterations,
            gradient_max: result.gradient_max,
            fingerprint: result.fingerprint.clone(),
        })
    }

    /// Levels on which `variable` has a slot with |t| at or above the
    /// threshold. A random parameter counts if its mean or its spread does.
    pub fn significant(&self, variable: &str, threshold: f64) -> Vec<Level> {
        let mut levels = Vec::new();
        for r in self.rows.iter().filter(|r| r.variable == variable) {
            if r.t_stat.is_some_and(|t| t.abs() >= threshold) && !levels.contains(&r.level) {
                levels.push(r.level);
            }
        }
        levels
    }
}

fn fmt_opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.decimals$}"))
}

fn level_heading(level: Level) -> String {
    format!("Defined for {}", level.label())
}

/// Publication-style parameter table for one stratum.
pub fn render_stratum(report: &StratumReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Parameter estimates and marginal effects: {}", report.stratum);
    let _ = writeln!(
        out,
        "{:<28}{:>12}{:>13}{:>9}{:>10}{:>10}{:>11}",
        "Variable", "Coefficient", "t-statistic", "p-value", "Major", "Minor", "No injury"
    );
    for level in Level::ALL {
        let rows: Vec<&EstimationRow> = report.rows.iter().filter(|r| r.level == level).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{}", level_heading(level));
        for r in rows {
            let stats = format!(
                "{:>12.2}{:>13}{:>9}",
                r.estimate,
                fmt_opt(r.t_stat, 2),
                fmt_opt(r.p_value, 3)
            );
            match r.role {
                SlotRole::Spread => {
                    let _ = writeln!(out, "    (standard deviation of parameter distribution)");
                    let _ = writeln!(out, "{:<28}{stats}", "");
                }
                _ => {
                    let label = if r.variable == sevlogit_core::model::CONSTANT {
                        "Constant".to_string()
                    } else if r.role == SlotRole::Mean {
                        format!("{} ({})", r.variable, r.distribution.map_or("random", |d| d.as_str()))
                    } else {
                        r.variable.clone()
                    };
                    let _ = write!(out, "  {label:<26}{stats}");
                    if let Some(me) = report.margins.get(&r.variable) {
                        let _ = write!(out, "{:>10.3}{:>10.3}{:>11.3}", me[0], me[1], me[2]);
                    }
                    let _ = writeln!(out);
                }
            }
            if let Some(s) = r.share_below_zero {
                let _ = writeln!(out, "    share below zero: {:.1}%", 100.0 * s);
            }
        }
    }
    let st = &report.statistics;
    let ll0 = format!("{:.2}", st.ll_zero);
    let llb = format!("{:.2}", st.ll_converged);
    // ρ² is printed from the printed pair so the two can be checked by hand.
    let rho = pseudo_r2(ll0.parse().unwrap_or(st.ll_zero), llb.parse().unwrap_or(st.ll_converged))
        .unwrap_or(st.rho_squared);
    let _ = writeln!(out, "Model statistics");
    let _ = writeln!(out, "  {:<24}{:>14}", "Number of observations", st.n_obs);
    let _ = writeln!(out, "  {:<24}{:>14}", "LL(0)", ll0);
    let _ = writeln!(out, "  {:<24}{:>14}", "LL(beta)", llb);
    let _ = writeln!(out, "  {:<24}{:>14.2}", "rho-squared", rho);
    let conv = if report.converged { "yes" } else { "NO" };
    let _ = writeln!(
        out,
        "  {:<24}{:>14}",
        "Converged",
        format!("{conv} ({:?}, {} it.)", report.termination, report.iterations)
    );
    out
}

/// Renders one estimation result with its marginal effects.
pub fn render_estimation_table(
    stratum: Stratum,
    result: &EstimationResult,
    margins: &MarginalEffectsTable,
) -> anyhow::Result<String> {
    Ok(render_stratum(&StratumReport::new(stratum, result, margins)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrow {
    Up,
    Down,
    Absent,
}

impl Arrow {
    fn symbol(self) -> &'static str {
        match self {
            Arrow::Up => "↑",
            Arrow::Down => "↓",
            Arrow::Absent => "",
        }
    }
}

/// Which levels of a significant variable receive an arrow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrowScope {
    /// Every level, by the sign of its marginal effect.
    #[default]
    AllLevels,
    /// Only the levels whose utility the variable enters.
    TargetLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variable: String,
    /// One triple per stratum, in the matrix's stratum order.
    pub cells: Vec<[Arrow; N_LEVELS]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMatrix {
    pub strata: Vec<Stratum>,
    pub significance_t: f64,
    pub scope: ArrowScope,
    pub rows: Vec<ComparisonRow>,
}

/// Derives the arrows from each stratum's estimates and marginal effects.
pub fn render_comparison(reports: &[StratumReport], significance_t: f64, scope: ArrowScope) -> ComparisonMatrix {
    let mut variables: Vec<String> = Vec::new();
    for r in reports {
        for row in &r.rows {
            if row.variable != sevlogit_core::model::CONSTANT && !variables.contains(&row.variable) {
                variables.push(row.variable.clone());
            }
        }
    }
    let rows = variables
        .into_iter()
        .map(|variable| {
            let cells = reports
                .iter()
                .map(|r| {
                    let levels = r.significant(&variable, significance_t);
                    let mut cell = [Arrow::Absent; N_LEVELS];
                    if levels.is_empty() {
                        return cell;
                    }
                    let Some(me) = r.margins.get(&variable) else {
                        return cell;
                    };
                    for level in Level::ALL {
                        if scope == ArrowScope::TargetLevel && !levels.contains(&level) {
                            continue;
                        }
                        let e = me[level.index()];
                        cell[level.index()] = if e > 0.0 {
                            Arrow::Up
                        } else if e < 0.0 {
                            Arrow::Down
                        } else {
                            Arrow::Absent
                        };
                    }
                    cell
                })
                .collect();
            ComparisonRow { variable, cells }
        })
        .collect();
    ComparisonMatrix {
        strata: reports.iter().map(|r| r.stratum).collect(),
        significance_t,
        scope,
        rows,
    }
}

impl ComparisonMatrix {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Model comparisons (|t| >= {})", self.significance_t);
        let _ = write!(out, "{:<18}", "Variable");
        for s in &self.strata {
            let _ = write!(out, "{:<21}", s.as_str());
        }
        let _ = writeln!(out);
        let _ = write!(out, "{:<18}", "");
        for _ in &self.strata {
            let _ = write!(out, "{:<7}{:<7}{:<7}", "Major", "Minor", "No");
        }
        let _ = writeln!(out);
        for row in &self.rows {
            let _ = write!(out, "{:<18}", row.variable);
            for cell in &row.cells {
                for a in cell {
                    let _ = write!(out, "{:<7}", a.symbol());
                }
            }
            let _ = writeln!(out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledSection {
    pub ll_full: f64,
    pub converged: bool,
    pub ll_strata: Vec<(Stratum, f64)>,
    pub test: Option<LrTestResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub format: String,
    pub strata: Vec<StratumReport>,
    pub pooled: Option<PooledSection>,
    pub transfer: Vec<TransferCell>,
    pub comparison: Option<ComparisonMatrix>,
    pub excluded: usize,
    pub rejected: usize,
    pub warnings: Vec<String>,
}

impl ReportDocument {
    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format != FORMAT_TAG {
            bail!("unsupported report format '{}'", doc.format);
        }
        Ok(doc)
    }

    /// Recomputes the derived numbers from the document's own fields.
    pub fn check(&self) -> anyhow::Result<()> {
        let mut problems = Vec::new();
        for s in &self.strata {
            let st = &s.statistics;
            match pseudo_r2(st.ll_zero, st.ll_converged) {
                Ok(r) if r == st.rho_squared => {}
                _ => problems.push(format!("{}: rho-squared does not match its LL pair", s.stratum)),
            }
            for r in &s.rows {
                let t = (r.std_error > 0.0).then(|| r.estimate / r.std_error);
                if t != r.t_stat {
                    problems.push(format!("{}: t of {} is not estimate / se", s.stratum, r.slot));
                }
            }
            for m in &s.margins.rows {
                let sum: f64 = m.effects.iter().sum();
                if sum.abs() >= ZERO_SUM {
                    problems.push(format!("{}: effects of {} sum to {sum:e}", s.stratum, m.variable));
                }
            }
        }
        let tests = self
            .pooled
            .iter()
            .filter_map(|p| p.test.as_ref())
            .chain(self.transfer.iter().filter_map(|c| c.test.as_ref()));
        for t in tests {
            let p = chi_square_sf(t.statistic, t.df)?;
            if (p - t.p_value).abs() > 1e-12 {
                problems.push(format!("LR p-value {} does not match its statistic", t.p_value));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(anyhow!(problems.join("; ")))
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for s in &self.strata {
            if !s.level_shares.is_empty() {
                let _ = writeln!(out, "Injury severity distribution: {}", s.stratum);
                for l in &s.level_shares {
                    let _ = writeln!(out, "  {:<14}{:>8}{:>7.1}%", l.level.label(), l.count, l.percent);
                }
                let _ = writeln!(out);
            }
            out.push_str(&render_stratum(s));
            let _ = writeln!(out);
        }
        if let Some(p) = &self.pooled {
            let _ = writeln!(out, "Pooled versus separate weather models");
            let _ = writeln!(out, "  LL(pooled) = {:.2}", p.ll_full);
            for (s, ll) in &p.ll_strata {
                let _ = writeln!(out, "  LL({s}) = {ll:.2}");
            }
            match (&p.test, &p.error) {
                (Some(t), _) => {
                    let _ = writeln!(out, "  LR statistic {t}");
                }
                (None, Some(e)) => {
                    let _ = writeln!(out, "  not available: {e}");
                }
                _ => {}
            }
            let _ = writeln!(out);
        }
        if !self.transfer.is_empty() {
            out.push_str(&render_transfer(&self.transfer));
            let _ = writeln!(out);
        }
        if let Some(c) = &self.comparison {
            out.push_str(&c.render());
            let _ = writeln!(out);
        }
        let _ = writeln!(out, "Excluded records: {}; rejected rows: {}", self.excluded, self.rejected);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Rows are the specification applied (a), columns the data (b).
pub fn render_transfer(cells: &[TransferCell]) -> String {
    let mut strata: Vec<Stratum> = Vec::new();
    for c in cells {
        for s in [c.model, c.data] {
            if !strata.contains(&s) {
                strata.push(s);
            }
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "Transferability tests (row: model, column: data)");
    let _ = write!(out, "{:<8}", "");
    for s in &strata {
        let _ = write!(out, "{:<34}", s.as_str());
    }
    let _ = writeln!(out);
    for a in &strata {
        let _ = write!(out, "{:<8}", a.as_str());
        for b in &strata {
            let text = if a == b {
                "0".to_string()
            } else {
                match cells.iter().find(|c| c.model == *a && c.data == *b) {
                    Some(TransferCell { test: Some(t), .. }) => t.to_string(),
                    Some(TransferCell { error: Some(_), .. }) => "n/a (foreign fit better)".to_string(),
                    _ => "-".to_string(),
                }
            };
            let _ = write!(out, "{text:<34}");
        }
        let _ = writeln!(out);
    }
    out
}
