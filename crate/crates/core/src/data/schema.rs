//! Column mapping from a crash CSV onto [`CrashRecord`] fields.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::record::*;
use crate::error::{Error, Result};

/// Every `CrashRecord` field, in declaration order.
pub const FIELDS: [&str; 19] = [
    "crash_id",
    "severity5",
    "weather",
    "area",
    "alignment",
    "manner",
    "harmful_event",
    "lighting",
    "truck_type",
    "speed_limit",
    "lane_count",
    "aadt",
    "surface",
    "route",
    "crash_time",
    "day",
    "driver_sex",
    "restraint_used",
    "location_type",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFormat {
    /// `HH:MM` when the cell contains a colon, minutes since midnight otherwise.
    #[default]
    Auto,
    Minutes,
    HhMm,
    /// Military time without separator, e.g. `0830`.
    Hhmm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMapping {
    /// Source column; defaults to the field name.
    #[serde(default)]
    pub column: Option<String>,
    /// Raw cell value → canonical code. Unlisted values are tried as canonical codes.
    #[serde(default)]
    pub codes: BTreeMap<String, String>,
    /// For `day`: parse the column as a calendar date and derive weekday/weekend.
    #[serde(default)]
    pub date_format: Option<String>,
    /// For `crash_time`.
    #[serde(default)]
    pub time_format: TimeFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleFilter {
    pub column: String,
    /// Raw values identifying the truck configurations to keep.
    pub keep: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashSchema {
    #[serde(default)]
    pub fields: BTreeMap<String, FieldMapping>,
    #[serde(default)]
    pub vehicle_filter: Option<VehicleFilter>,
}

impl CrashSchema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: CrashSchema = serde_json::from_str(text)?;
        for key in schema.fields.keys() {
            if !FIELDS.contains(&key.as_str()) {
                return Err(Error::Schema(format!("unknown record field '{key}'")));
            }
        }
        Ok(schema)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn mapping(&self, field: &str) -> FieldMapping {
        self.fields.get(field).cloned().unwrap_or_default()
    }

    fn column_name(&self, field: &str) -> String {
        self.mapping(field).column.unwrap_or_else(|| field.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub crash_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<CrashRecord>,
    pub rejects: Vec<RejectedRow>,
    /// Rows dropped by the vehicle-type filter.
    pub filtered_non_truck: usize,
}

struct ResolvedField {
    index: usize,
    mapping: FieldMapping,
}

struct Resolved {
    fields: Vec<ResolvedField>,
    vehicle: Option<(usize, Vec<String>)>,
}

fn resolve(schema: &CrashSchema, headers: &csv::StringRecord) -> Result<Resolved> {
    let find = |col: &str| headers.iter().position(|h| h.trim() == col);
    let mut fields = Vec::with_capacity(FIELDS.len());
    for field in FIELDS {
        let column = schema.column_name(field);
        let index = find(&column).ok_or_else(|| {
            Error::Schema(format!("missing required column '{column}' (field {field})"))
        })?;
        fields.push(ResolvedField {
            index,
            mapping: schema.mapping(field),
        });
    }
    let vehicle = match &schema.vehicle_filter {
        Some(vf) => {
            let index = find(&vf.column).ok_or_else(|| {
                Error::Schema(format!("missing vehicle filter column '{}'", vf.column))
            })?;
            Some((index, vf.keep.clone()))
        }
        None => None,
    };
    Ok(Resolved { fields, vehicle })
}

fn unparseable(field: &str) -> String {
    format!("{field} unparseable")
}

fn coded<'a>(mapping: &'a FieldMapping, raw: &'a str) -> &'a str {
    mapping.codes.get(raw).map(String::as_str).unwrap_or(raw)
}

fn enum_field<T>(field: &str, mapping: &FieldMapping, raw: &str, parse: fn(&str) -> Option<T>) -> std::result::Result<T, String> {
    parse(coded(mapping, raw)).ok_or_else(|| unparseable(field))
}

fn int_field<T: std::str::FromStr>(field: &str, mapping: &FieldMapping, raw: &str) -> std::result::Result<T, String> {
    coded(mapping, raw)
        .replace(',', "")
        .parse::<T>()
        .map_err(|_| unparseable(field))
}

fn bool_field(field: &str, mapping: &FieldMapping, raw: &str) -> std::result::Result<bool, String> {
    match coded(mapping, raw).to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Ok(true),
        "false" | "0" | "no" | "n" => Ok(false),
        _ => Err(unparseable(field)),
    }
}

fn time_field(mapping: &FieldMapping, raw: &str) -> std::result::Result<u32, String> {
    let bad = || unparseable("crash_time");
    let raw = coded(mapping, raw);
    let hm = |h: &str, m: &str| -> std::result::Result<u32, String> {
        let h: u32 = h.parse().map_err(|_| bad())?;
        let m: u32 = m.parse().map_err(|_| bad())?;
        if h > 23 || m > 59 {
            return Err(bad());
        }
        Ok(h * 60 + m)
    };
    match mapping.time_format {
        TimeFormat::Minutes => raw.parse().map_err(|_| bad()),
        TimeFormat::HhMm => {
            let (h, m) = raw.split_once(':').ok_or_else(bad)?;
            hm(h, m)
        }
        TimeFormat::Hhmm => {
            if raw.len() != 4 || !raw.is_ascii() {
                return Err(bad());
            }
            hm(&raw[..2], &raw[2..])
        }
        TimeFormat::Auto => match raw.split_once(':') {
            Some((h, m)) => hm(h, m),
            None => raw.parse().map_err(|_| bad()),
        },
    }
}

fn day_field(mapping: &FieldMapping, raw: &str) -> std::result::Result<Day, String> {
    match &mapping.date_format {
        Some(fmt) => {
            let date = NaiveDate::parse_from_str(raw, fmt).map_err(|_| unparseable("day"))?;
            Ok(match date.weekday() {
                Weekday::Sat | Weekday::Sun => Day::Weekend,
                _ => Day::Weekday,
            })
        }
        None => enum_field("day", mapping, raw, Day::from_code),
    }
}

fn parse_row(resolved: &Resolved, row: &csv::StringRecord) -> std::result::Result<CrashRecord, String> {
    let cell = |i: usize| -> (&FieldMapping, &str) {
        let f = &resolved.fields[i];
        (&f.mapping, row.get(f.index).unwrap_or("").trim())
    };
    macro_rules! e {
        ($i:expr, $ty:ident) => {{
            let (m, raw) = cell($i);
            enum_field(FIELDS[$i], m, raw, $ty::from_code)?
        }};
    }
    let (_, id) = cell(0);
    let (m, raw) = cell(9);
    let speed_limit: u32 = int_field("speed_limit", m, raw)?;
    let (m, raw) = cell(10);
    let lane_count: u32 = int_field("lane_count", m, raw)?;
    let (m, raw) = cell(11);
    let aadt: u64 = int_field("aadt", m, raw)?;
    let (m, raw) = cell(14);
    let crash_time = time_field(m, raw)?;
    let (m, raw) = cell(15);
    let day = day_field(m, raw)?;
    let (m, raw) = cell(17);
    let restraint_used = bool_field("restraint_used", m, raw)?;

    let record = CrashRecord {
        crash_id: id.to_string(),
        severity5: e!(1, Severity5),
        weather: e!(2, Weather),
        area: e!(3, Area),
        alignment: e!(4, Alignment),
        manner: e!(5, Manner),
        harmful_event: e!(6, HarmfulEvent),
        lighting: e!(7, Lighting),
        truck_type: e!(8, TruckType),
        speed_limit,
        lane_count,
        aadt,
        surface: e!(12, Surface),
        route: e!(13, Route),
        crash_time,
        day,
        driver_sex: e!(16, Sex),
        restraint_used,
        location_type: e!(18, LocationType),
    };
    record.check()?;
    Ok(record)
}

/// Parses a crash CSV. Unparseable rows are collected as rejects unless
/// `strict` is set, in which case the first reject is fatal.
pub fn parse_records<R: Read>(input: R, schema: &CrashSchema, strict: bool) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let resolved = resolve(schema, &headers)?;

    let mut out = ParseOutcome::default();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        if let Some((idx, keep)) = &resolved.vehicle {
            let v = row.get(*idx).unwrap_or("").trim();
            if !keep.iter().any(|k| k == v) {
                out.filtered_non_truck += 1;
                continue;
            }
        }
        match parse_row(&resolved, &row) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => {
                if strict {
                    return Err(Error::Row { line: row_no, reason });
                }
                let crash_id = row
                    .get(resolved.fields[0].index)
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty());
                log::warn!("rejected row {row_no}: {reason}");
                out.rejects.push(RejectedRow {
                    row: row_no,
                    crash_id,
                    reason,
                });
            }
        }
    }
    Ok(out)
}

pub fn parse_records_path(path: &Path, schema: &CrashSchema, strict: bool) -> Result<ParseOutcome> {
    let file = std::fs::File::open(path)?;
    parse_records(std::io::BufReader::new(file), schema, strict)
}
