//! Crash data ingestion: parsing, indicator coding, weather stratification
//! and descriptive summaries.

pub mod dataset;
pub mod indicators;
pub mod io;
pub mod record;
pub mod schema;
pub mod stratify;
pub mod summary;

pub use dataset::{ChoiceObservation, Dataset, IndicatorGroup, Stratum};
pub use indicators::{crash_groups, derive_indicators, indicator_names};
pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use record::{consolidate_severity, CrashRecord, Severity5};
pub use schema::{parse_records, parse_records_path, CrashSchema, ParseOutcome, RejectedRow};
pub use stratify::{code_record, stratify, Exclusion, Stratification};
pub use summary::{round_to, summarize, SummaryTable};
