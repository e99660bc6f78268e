use serde::Serialize;

use super::dataset::{ChoiceObservation, Dataset, Stratum};
use super::indicators::{crash_groups, derive_indicators, indicator_names};
use super::record::{consolidate_severity, CrashRecord, LocationType, Weather};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub crash_id: String,
    pub reason: &'static str,
}

/// Weather strata plus the pooled union, all in ingestion order.
#[derive(Debug, Clone)]
pub struct Stratification {
    pub normal: Dataset,
    pub rain: Dataset,
    pub snow: Dataset,
    pub pooled: Dataset,
    pub excluded: Vec<Exclusion>,
    pub warnings: Vec<String>,
}

impl Stratification {
    pub fn get(&self, stratum: Stratum) -> &Dataset {
        match stratum {
            Stratum::Normal => &self.normal,
            Stratum::Rain => &self.rain,
            Stratum::Snow => &self.snow,
            Stratum::Pooled => &self.pooled,
        }
    }
}

pub fn code_record(record: &CrashRecord) -> ChoiceObservation {
    ChoiceObservation {
        chosen: consolidate_severity(record.severity5),
        covariates: derive_indicators(record),
    }
}

/// Drops intersection crashes and uncovered weather, then splits by weather.
pub fn stratify(records: &[CrashRecord]) -> Result<Stratification> {
    let mut parts: [Vec<ChoiceObservation>; 3] = Default::default();
    let mut pooled = Vec::new();
    let mut excluded = Vec::new();
    for r in records {
        if r.location_type == LocationType::Intersection {
            excluded.push(Exclusion {
                crash_id: r.crash_id.clone(),
                reason: "intersection",
            });
            continue;
        }
        let slot = match r.weather {
            Weather::Normal => 0,
            Weather::Rain => 1,
            Weather::Snow => 2,
            Weather::Other => {
                excluded.push(Exclusion {
                    crash_id: r.crash_id.clone(),
                    reason: "weather other",
                });
                continue;
            }
        };
        let obs = code_record(r);
        parts[slot].push(obs.clone());
        pooled.push(obs);
    }

    let names = indicator_names();
    let groups = crash_groups();
    let mut warnings = Vec::new();
    let [normal, rain, snow] = parts;
    let mut build = |stratum: Stratum, obs: Vec<ChoiceObservation>| {
        if obs.is_empty() {
            let msg = format!("stratum {stratum} is empty");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Dataset::new(stratum, names.clone(), groups.clone(), obs)
    };
    let normal = build(Stratum::Normal, normal)?;
    let rain = build(Stratum::Rain, rain)?;
    let snow = build(Stratum::Snow, snow)?;
    let pooled = build(Stratum::Pooled, pooled)?;
    Ok(Stratification {
        normal,
        rain,
        snow,
        pooled,
        excluded,
        warnings,
    })
}
