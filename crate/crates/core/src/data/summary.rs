use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Stratum};
use crate::error::{Error, Result};
use crate::level::Level;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelShare {
    pub level: Level,
    pub count: usize,
    /// Unrounded percentage of observations.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSummary {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single observation.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub stratum: Stratum,
    pub n: usize,
    pub levels: Vec<LevelShare>,
    pub indicators: Vec<IndicatorSummary>,
}

pub fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

/// Per-level frequencies and per-indicator mean/SD. Values are summed in
/// sorted order so the table does not depend on observation order.
pub fn summarize(dataset: &Dataset) -> Result<SummaryTable> {
    let n = dataset.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let counts = dataset.level_counts();
    let levels = Level::ALL
        .iter()
        .map(|&level| LevelShare {
            level,
            count: counts[level.index()],
            percent: 100.0 * counts[level.index()] as f64 / n as f64,
        })
        .collect();

    let mut column = Vec::with_capacity(n);
    let indicators = dataset
        .indicator_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            column.clear();
            column.extend(dataset.observations().iter().map(|o| o.covariates[j]));
            column.sort_by(f64::total_cmp);
            let mean = column.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                let mut dev: Vec<f64> = column.iter().map(|x| (x - mean) * (x - mean)).collect();
                dev.sort_by(f64::total_cmp);
                (dev.iter().sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            IndicatorSummary {
                name: name.clone(),
                mean,
                sd,
            }
        })
        .collect();

    Ok(SummaryTable {
        stratum: dataset.stratum,
        n,
        levels,
        indicators,
    })
}

impl SummaryTable {
    pub fn render(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "Stratum: {} (N = {})", self.stratum, self.n);
        let _ = writeln!(out, "{:<14}{:>10}{:>9}", "Level", "Count", "%");
        for l in &self.levels {
            let _ = writeln!(out, "{:<14}{:>10}{:>9.1}", l.level.label(), l.count, l.percent);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<16}{:>8}{:>8}", "Indicator", "Mean", "SD");
        for s in &self.indicators {
            let _ = writeln!(out, "{:<16}{:>8.2}{:>8.2}", s.name, s.mean, s.sd);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::ChoiceObservation;

    fn ds(rows: &[(Level, f64)]) -> Dataset {
        let obs = rows
            .iter()
            .map(|&(chosen, male)| ChoiceObservation {
                chosen,
                covariates: vec![male],
            })
            .collect();
        Dataset::new(Stratum::Normal, vec!["male".into()], vec![], obs).unwrap()
    }

    #[test]
    fn two_observation_sample_sd() {
        let t = summarize(&ds(&[(Level::None, 1.0), (Level::Minor, 0.0)])).unwrap();
        assert_eq!(t.indicators[0].mean, 0.5);
        // sqrt(((0.5)^2 + (0.5)^2) / 1)
        assert!((t.indicators[0].sd - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identical_observations_have_zero_sd() {
        let t = summarize(&ds(&[(Level::None, 1.0); 5])).unwrap();
        assert_eq!(t.indicators[0].sd, 0.0);
        assert_eq!(t.levels[2].percent, 100.0);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(summarize(&ds(&[])), Err(Error::Empty)));
    }

    #[test]
    fn sd_matches_bernoulli_formula() {
        let rows: Vec<_> = (0..37).map(|i| (Level::None, if i % 3 == 0 { 1.0 } else { 0.0 })).collect();
        let t = summarize(&ds(&rows)).unwrap();
        let p = t.indicators[0].mean;
        let n = rows.len() as f64;
        let expect = (p * (1.0 - p)).sqrt() * (n / (n - 1.0)).sqrt();
        assert!((t.indicators[0].sd - expect).abs() < 1e-12);
    }
}
