//! Canonical dataset file: JSON lines. The first line is a header carrying the
//! stratum, indicator order and exclusive groups; every further line is one
//! observation `{"chosen": ..., "covariates": {name: value, ...}}` with
//! covariates in header order.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use super::dataset::{ChoiceObservation, Dataset, IndicatorGroup, Stratum};
use crate::error::{Error, Result};
use crate::level::Level;

pub const FORMAT_TAG: &str = "sevlogit-dataset/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    stratum: Stratum,
    n_observations: usize,
    indicator_names: Vec<String>,
    groups: Vec<IndicatorGroup>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    chosen: Level,
    covariates: Map<String, Value>,
}

fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        Value::Number(Number::from(v as i64))
    } else {
        Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
    }
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let header = Header {
        format: FORMAT_TAG.to_string(),
        stratum: dataset.stratum,
        n_observations: dataset.len(),
        indicator_names: dataset.indicator_names().to_vec(),
        groups: dataset.groups().to_vec(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for obs in dataset.observations() {
        let covariates = dataset
            .indicator_names()
            .iter()
            .zip(&obs.covariates)
            .map(|(n, &v)| (n.clone(), number(v)))
            .collect();
        serde_json::to_writer(&mut out, &Line { chosen: obs.chosen, covariates })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::Schema("empty dataset file".into()))??;
    let header: Header = serde_json::from_str(&first)?;
    if header.format != FORMAT_TAG {
        return Err(Error::Schema(format!("unsupported dataset format '{}'", header.format)));
    }
    let mut observations = Vec::with_capacity(header.n_observations);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line)
            .map_err(|e| Error::Row { line: i + 2, reason: e.to_string() })?;
        let mut covariates = Vec::with_capacity(header.indicator_names.len());
        for name in &header.indicator_names {
            let v = parsed
                .covariates
                .get(name)
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Row {
                    line: i + 2,
                    reason: format!("missing or non-numeric covariate '{name}'"),
                })?;
            covariates.push(v);
        }
        if parsed.covariates.len() != header.indicator_names.len() {
            return Err(Error::Row {
                line: i + 2,
                reason: "covariates not in the header's indicator list".into(),
            });
        }
        observations.push(ChoiceObservation { chosen: parsed.chosen, covariates });
    }
    if observations.len() != header.n_observations {
        return Err(Error::Schema(format!(
            "header announces {} observations, file holds {}",
            header.n_observations,
            observations.len()
        )));
    }
    Dataset::new(header.stratum, header.indicator_names, header.groups, observations)
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset(dataset, std::io::BufWriter::new(file))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file))
}
