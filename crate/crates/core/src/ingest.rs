//! CSV ingestion for the input tables.
//!
//! Every table is a UTF-8, comma-delimited CSV file with a header row and
//! RFC 4180 quoting. Columns are located by header name, so column order in
//! the file does not matter. Row numbers in errors and warnings count data
//! rows from 1 (the header row is row 0).
//!
//! In [`ValidationMode::Strict`] the first invalid row aborts the load. In
//! [`ValidationMode::Lenient`] invalid rows are skipped and reported as
//! warnings; missing columns are always fatal.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, SubsecRound, Utc};
use thiserror::Error;

use crate::report::Warning;

/// SNOMED-CT type id of the IS-A relationship.
pub const IS_A: &str = "116680003";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub event_id: String,
    pub timestamp: DateTime<Utc>,
    pub activity: String,
    pub patient_id: String,
    pub admission_id: String,
    /// Additional columns (e.g. lab values), raw text keyed by header name.
    /// Empty cells are not stored.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosisRecord {
    pub patient_id: String,
    pub admission_id: String,
    pub icd_code: String,
    pub seq_num: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IcdCodeRecord {
    pub icd_code: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnomedConceptRecord {
    pub concept_id: String,
    pub fsn: String,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnomedRelationshipRecord {
    pub source_id: String,
    pub destination_id: String,
    pub type_id: String,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityAttributeRecord {
    pub entity_type: String,
    pub entity_id: String,
    pub attribute: String,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MappingKind {
    IcdToSnomed,
    ActivityToSnomed,
    ActivityToDomain,
    DomainToSnomed,
    ActivityTreats,
}

impl MappingKind {
    pub const ALL: [MappingKind; 5] = [
        MappingKind::IcdToSnomed,
        MappingKind::ActivityToSnomed,
        MappingKind::ActivityToDomain,
        MappingKind::DomainToSnomed,
        MappingKind::ActivityTreats,
    ];

    /// Conventional file name of the table.
    pub fn file_name(self) -> &'static str {
        match self {
            MappingKind::IcdToSnomed => "map_icd_snomed.csv",
            MappingKind::ActivityToSnomed => "map_activity_snomed.csv",
            MappingKind::ActivityToDomain => "map_activity_domain.csv",
            MappingKind::DomainToSnomed => "map_domain_snomed.csv",
            MappingKind::ActivityTreats => "map_activity_treats.csv",
        }
    }

    fn target_is_concept(self) -> bool {
        self != MappingKind::ActivityToDomain
    }
}

impl fmt::Display for MappingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MappingKind::IcdToSnomed => "icd->snomed",
            MappingKind::ActivityToSnomed => "activity->snomed",
            MappingKind::ActivityToDomain => "activity->domain",
            MappingKind::DomainToSnomed => "domain->snomed",
            MappingKind::ActivityTreats => "activity->treats",
        })
    }
}

/// A constrained node mapping: `(source, target)` rows of one kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingTable {
    pub kind: MappingKind,
    pub rows: Vec<(String, String)>,
}

impl MappingTable {
    pub fn new(kind: MappingKind) -> Self {
        MappingTable {
            kind,
            rows: Vec::new(),
        }
    }

    pub fn with_rows<S: Into<String>>(kind: MappingKind, rows: impl IntoIterator<Item = (S, S)>) -> Self {
        MappingTable {
            kind,
            rows: rows.into_iter().map(|(s, t)| (s.into(), t.into())).collect(),
        }
    }

    /// Targets of `source`, in row order.
    pub fn targets<'a>(&'a self, source: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.rows
            .iter()
            .filter(move |(s, _)| s == source)
            .map(|(_, t)| t.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Terminology {
    pub icd_codes: Vec<IcdCodeRecord>,
    pub concepts: Vec<SnomedConceptRecord>,
    pub relationships: Vec<SnomedRelationshipRecord>,
}

/// Header names for the event log's required columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventColumns {
    pub event_id: String,
    pub timestamp: String,
    pub activity: String,
    pub patient_id: String,
    pub admission_id: String,
}

impl Default for EventColumns {
    fn default() -> Self {
        EventColumns {
            event_id: "event_id".into(),
            timestamp: "timestamp".into(),
            activity: "activity".into(),
            patient_id: "patient_id".into(),
            admission_id: "admission_id".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOptions {
    pub columns: EventColumns,
    /// Keep unknown event-log columns in [`EventRecord::extra`].
    pub include_extra: bool,
    pub mode: ValidationMode,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            columns: EventColumns::default(),
            include_extra: true,
            mode: ValidationMode::Strict,
        }
    }
}

/// Records of one table plus the warnings raised while loading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{table}: malformed CSV at row {row}: {message}")]
    Csv {
        table: String,
        row: usize,
        message: String,
    },
    #[error("{table}: missing column {column:?}")]
    MissingColumn { table: String, column: String },
    #[error("{table} row {row}: empty value in column {column:?}")]
    EmptyField {
        table: String,
        row: usize,
        column: String,
    },
    #[error("duplicate event_id {id:?} on rows {rows:?}")]
    DuplicateEventId { id: String, rows: Vec<usize> },
    #[error("event log row {row}: cannot parse timestamp {value:?} in column {column:?}")]
    BadTimestamp {
        row: usize,
        column: String,
        value: String,
    },
    #[error("diagnosis row {row}: seq_num {value:?} is not a positive integer")]
    BadSeqNum { row: usize, value: String },
    #[error("diagnosis row {row}: ({patient_id}, {admission_id}, {icd_code}) already listed on row {first_row}")]
    DuplicateDiagnosis {
        row: usize,
        first_row: usize,
        patient_id: String,
        admission_id: String,
        icd_code: String,
    },
    #[error("{table} row {row}: {value:?} in column {column:?} is not an ICD-10 code")]
    BadIcdCode {
        table: String,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{table} row {row}: {value:?} in column {column:?} is not a SNOMED-CT identifier")]
    BadConceptId {
        table: String,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{table} row {row}: {value:?} in column {column:?} is not a boolean")]
    BadBoolean {
        table: String,
        row: usize,
        column: String,
        value: String,
    },
    #[error("icd10 row {row}: duplicate icd_code {code:?}")]
    DuplicateIcdCode { row: usize, code: String },
    #[error("snomed_concepts row {row}: duplicate concept_id {concept_id:?}")]
    DuplicateConceptId { row: usize, concept_id: String },
    #[error("snomed_relationships row {row}: concept {concept_id:?} relates to itself")]
    SelfRelationship { row: usize, concept_id: String },
    #[error("snomed_relationships row {row}: {column} {concept_id:?} is not in the concept table")]
    UnknownConceptInRelationship {
        row: usize,
        column: String,
        concept_id: String,
    },
    #[error("{kind} row {row}: duplicate pair ({source_key}, {target_key})")]
    DuplicatePair {
        kind: MappingKind,
        row: usize,
        source_key: String,
        target_key: String,
    },
    #[error("activity {activity:?} is mapped to several domains: {domains:?}")]
    NonFunctionalMapping { activity: String, domains: Vec<String> },
    #[error("entity_attributes row {row}: ({entity_type}, {entity_id}, {attribute}) already set")]
    DuplicateAttribute {
        row: usize,
        entity_type: String,
        entity_id: String,
        attribute: String,
    },
}

impl IngestError {
    /// Row-level errors can be downgraded to warnings in lenient mode.
    fn is_row_level(&self) -> bool {
        !matches!(
            self,
            IngestError::Io { .. } | IngestError::Csv { .. } | IngestError::MissingColumn { .. }
        )
    }
}

/// Collects row failures according to the validation mode.
struct Outcome {
    mode: ValidationMode,
    warnings: Vec<Warning>,
}

impl Outcome {
    fn new(mode: ValidationMode) -> Self {
        Outcome {
            mode,
            warnings: Vec::new(),
        }
    }

    /// `Ok(())` when the row should be skipped, `Err` when the load aborts.
    fn reject(&mut self, err: IngestError) -> Result<(), IngestError> {
        if self.mode == ValidationMode::Lenient && err.is_row_level() {
            self.warnings.push(Warning::ingest(format!("skipped: {err}")));
            Ok(())
        } else {
            Err(err)
        }
    }
}

/// A CSV table with columns resolved by header name.
struct Table {
    name: String,
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
    allow_empty: bool,
}

impl Table {
    fn read<R: Read>(name: &str, reader: R, allow_empty: bool) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let csv_err = |e: csv::Error, row: usize| IngestError::Csv {
            table: name.to_owned(),
            row,
            message: e.to_string(),
        };
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(e, 0))?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').trim().to_owned())
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            rows.push(rec.map_err(|e| csv_err(e, i + 1))?);
        }
        let is_blank = headers.iter().all(String::is_empty);
        Ok(Table {
            name: name.to_owned(),
            headers: if is_blank { Vec::new() } else { headers },
            rows,
            allow_empty,
        })
    }

    /// Resolves required columns. A completely empty file is accepted for
    /// tables that allow it (relationships, mappings).
    fn columns(&self, required: &[&str]) -> Result<Option<Vec<usize>>, IngestError> {
        if self.headers.is_empty() && self.rows.is_empty() && self.allow_empty {
            return Ok(None);
        }
        required
            .iter()
            .map(|col| {
                self.headers
                    .iter()
                    .position(|h| h == col)
                    .ok_or_else(|| IngestError::MissingColumn {
                        table: self.name.clone(),
                        column: (*col).to_owned(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn field(&self, row: usize, rec: &csv::StringRecord, idx: usize) -> Result<String, IngestError> {
        let value = rec.get(idx).unwrap_or("").trim();
        if value.is_empty() {
            return Err(IngestError::EmptyField {
                table: self.name.clone(),
                row,
                column: self.headers[idx].clone(),
            });
        }
        Ok(value.to_owned())
    }

    fn concept_field(&self, row: usize, rec: &csv::StringRecord, idx: usize) -> Result<String, IngestError> {
        let value = self.field(row, rec, idx)?;
        if !is_sctid(&value) {
            return Err(IngestError::BadConceptId {
                table: self.name.clone(),
                row,
                column: self.headers[idx].clone(),
                value,
            });
        }
        Ok(value)
    }

    fn icd_field(&self, row: usize, rec: &csv::StringRecord, idx: usize) -> Result<String, IngestError> {
        let value = self.field(row, rec, idx)?;
        if !is_icd10_code(&value) {
            return Err(IngestError::BadIcdCode {
                table: self.name.clone(),
                row,
                column: self.headers[idx].clone(),
                value,
            });
        }
        Ok(value)
    }

    fn bool_field(&self, row: usize, rec: &csv::StringRecord, idx: usize) -> Result<bool, IngestError> {
        let value = self.field(row, rec, idx)?;
        parse_bool(&value).ok_or_else(|| IngestError::BadBoolean {
            table: self.name.clone(),
            row,
            column: self.headers[idx].clone(),
            value,
        })
    }

    /// Data rows with their 1-based row numbers.
    fn numbered(&self) -> impl Iterator<Item = (usize, &csv::StringRecord)> {
        self.rows.iter().enumerate().map(|(i, r)| (i + 1, r))
    }
}

/// True for a SNOMED-CT identifier: a non-empty string of decimal digits.
pub fn is_sctid(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// True for an ICD-10 code: a letter, two digits, then optionally a dot
/// followed by one to four alphanumeric characters.
pub fn is_icd10_code(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() < 3 || !b[0].is_ascii_alphabetic() || !b[1].is_ascii_digit() || !b[2].is_ascii_digit() {
        return false;
    }
    match &b[3..] {
        [] => true,
        [b'.', rest @ ..] => (1..=4).contains(&rest.len()) && rest.iter().all(u8::is_ascii_alphanumeric),
        _ => false,
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Parses an ISO-8601 timestamp. Values without an offset are taken as UTC.
/// The result is truncated to millisecond precision.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc).trunc_subsecs(3));
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(&s.replacen(' ', "T", 1)) {
        return Some(t.with_timezone(&Utc).trunc_subsecs(3));
    }
    const NAIVE: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    for fmt in NAIVE {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().trunc_subsecs(3));
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
}

/// Canonical text form of a timestamp, as written by the table writers.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_event_table<R: Read>(reader: R, opts: &IngestOptions) -> Result<Loaded<EventRecord>, IngestError> {
    let table = Table::read("event_log", reader, false)?;
    let c = &opts.columns;
    let required = [
        c.event_id.as_str(),
        c.timestamp.as_str(),
        c.activity.as_str(),
        c.patient_id.as_str(),
        c.admission_id.as_str(),
    ];
    let cols = table
        .columns(&required)?
        .expect("event log never allows an empty file");
    let extra_cols: Vec<usize> = (0..table.headers.len())
        .filter(|i| !cols.contains(i) && !table.headers[*i].is_empty())
        .collect();

    if opts.mode == ValidationMode::Strict {
        let mut seen: HashMap<&str, Vec<usize>> = HashMap::new();
        for (row, rec) in table.numbered() {
            let id = rec.get(cols[0]).unwrap_or("").trim();
            if !id.is_empty() {
                seen.entry(id).or_default().push(row);
            }
        }
        // report the duplicate that occurs first in the file
        if let Some((id, rows)) = seen
            .into_iter()
            .filter(|(_, rows)| rows.len() > 1)
            .min_by_key(|(_, rows)| rows[1])
        {
            return Err(IngestError::DuplicateEventId {
                id: id.to_owned(),
                rows,
            });
        }
    }

    let mut outcome = Outcome::new(opts.mode);
    let mut records = Vec::with_capacity(table.rows.len());
    let mut first_row: HashMap<String, usize> = HashMap::new();
    for (row, rec) in table.numbered() {
        let parsed = (|| {
            let event_id = table.field(row, rec, cols[0])?;
            let raw_ts = table.field(row, rec, cols[1])?;
            let timestamp = parse_timestamp(&raw_ts).ok_or_else(|| IngestError::BadTimestamp {
                row,
                column: table.headers[cols[1]].clone(),
                value: raw_ts.clone(),
            })?;
            if let Some(first) = first_row.get(&event_id) {
                return Err(IngestError::DuplicateEventId {
                    id: event_id,
                    rows: vec![*first, row],
                });
            }
            let extra = if opts.include_extra {
                extra_cols
                    .iter()
                    .filter_map(|i| {
                        let v = rec.get(*i).unwrap_or("").trim();
                        (!v.is_empty()).then(|| (table.headers[*i].clone(), v.to_owned()))
                    })
                    .collect()
            } else {
                BTreeMap::new()
            };
            Ok(EventRecord {
                event_id,
                timestamp,
                activity: table.field(row, rec, cols[2])?,
                patient_id: table.field(row, rec, cols[3])?,
                admission_id: table.field(row, rec, cols[4])?,
                extra,
            })
        })();
        match parsed {
            Ok(record) => {
                first_row.insert(record.event_id.clone(), row);
                records.push(record);
            }
            Err(e) => outcome.reject(e)?,
        }
    }
    Ok(Loaded {
        records,
        warnings: outcome.warnings,
    })
}

pub fn load_event_table(path: &Path, opts: &IngestOptions) -> Result<Loaded<EventRecord>, IngestError> {
    read_event_table(open(path)?, opts)
}

pub fn read_diagnosis_table<R: Read>(reader: R, mode: ValidationMode) -> Result<Loaded<DiagnosisRecord>, IngestError> {
    let table = Table::read("diagnosis", reader, false)?;
    let cols = table
        .columns(&["patient_id", "admission_id", "icd_code", "seq_num"])?
        .expect("non-empty");
    let mut outcome = Outcome::new(mode);
    let mut records = Vec::new();
    let mut seen: HashMap<(String, String, String), usize> = HashMap::new();
    for (row, rec) in table.numbered() {
        let parsed = (|| {
            let patient_id = table.field(row, rec, cols[0])?;
            let admission_id = table.field(row, rec, cols[1])?;
            let icd_code = table.icd_field(row, rec, cols[2])?;
            let raw_seq = table.field(row, rec, cols[3])?;
            let seq_num = raw_seq
                .parse::<u32>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or(IngestError::BadSeqNum {
                    row,
                    value: raw_seq.clone(),
                })?;
            let key = (patient_id.clone(), admission_id.clone(), icd_code.clone());
            if let Some(first_row) = seen.get(&key) {
                return Err(IngestError::DuplicateDiagnosis {
                    row,
                    first_row: *first_row,
                    patient_id,
                    admission_id,
                    icd_code,
                });
            }
            seen.insert(key, row);
            Ok(DiagnosisRecord {
                patient_id,
                admission_id,
                icd_code,
                seq_num,
            })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(e) => outcome.reject(e)?,
        }
    }
    Ok(Loaded {
        records,
        warnings: outcome.warnings,
    })
}

pub fn load_diagnosis_table(path: &Path, mode: ValidationMode) -> Result<Loaded<DiagnosisRecord>, IngestError> {
    read_diagnosis_table(open(path)?, mode)
}

pub fn read_entity_attributes<R: Read>(
    reader: R,
    mode: ValidationMode,
) -> Result<Loaded<EntityAttributeRecord>, IngestError> {
    let table = Table::read("entity_attributes", reader, true)?;
    let Some(cols) = table.columns(&["entity_type", "entity_id", "attribute", "value"])? else {
        return Ok(Loaded {
            records: Vec::new(),
            warnings: Vec::new(),
        });
    };
    let mut outcome = Outcome::new(mode);
    let mut records = Vec::new();
    let mut seen: HashMap<(String, String, String), usize> = HashMap::new();
    for (row, rec) in table.numbered() {
        let parsed = (|| {
            let record = EntityAttributeRecord {
                entity_type: table.field(row, rec, cols[0])?,
                entity_id: table.field(row, rec, cols[1])?,
                attribute: table.field(row, rec, cols[2])?,
                value: table.field(row, rec, cols[3])?,
            };
            let key = (
                record.entity_type.clone(),
                record.entity_id.clone(),
                record.attribute.clone(),
            );
            if seen.contains_key(&key) {
                return Err(IngestError::DuplicateAttribute {
                    row,
                    entity_type: key.0,
                    entity_id: key.1,
                    attribute: key.2,
                });
            }
            seen.insert(key, row);
            Ok(record)
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(e) => outcome.reject(e)?,
        }
    }
    Ok(Loaded {
        records,
        warnings: outcome.warnings,
    })
}

pub fn load_entity_attributes(path: &Path, mode: ValidationMode) -> Result<Loaded<EntityAttributeRecord>, IngestError> {
    read_entity_attributes(open(path)?, mode)
}

pub fn read_icd_table<R: Read>(reader: R, mode: ValidationMode) -> Result<Loaded<IcdCodeRecord>, IngestError> {
    let table = Table::read("icd10", reader, false)?;
    let cols = table.columns(&["icd_code", "title"])?.expect("non-empty");
    let mut outcome = Outcome::new(mode);
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (row, rec) in table.numbered() {
        let parsed = (|| {
            let icd_code = table.icd_field(row, rec, cols[0])?;
            let title = table.field(row, rec, cols[1])?;
            if !seen.insert(icd_code.clone()) {
                return Err(IngestError::DuplicateIcdCode { row, code: icd_code });
            }
            Ok(IcdCodeRecord { icd_code, title })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(e) => outcome.reject(e)?,
        }
    }
    Ok(Loaded {
        records,
        warnings: outcome.warnings,
    })
}

pub fn read_concept_table<R: Read>(reader: R, mode: ValidationMode) -> Result<Loaded<SnomedConceptRecord>, IngestError> {
    let table = Table::read("snomed_concepts", reader, false)?;
    let cols = table
        .columns(&["concept_id", "fsn", "active"])?
        .expect("non-empty");
    let mut outcome = Outcome::new(mode);
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (row, rec) in table.numbered() {
        let parsed = (|| {
            let concept_id = table.concept_field(row, rec, cols[0])?;
            let fsn = table.field(row, rec, cols[1])?;
            let active = table.bool_field(row, rec, cols[2])?;
            if !seen.insert(concept_id.clone()) {
                return Err(IngestError::DuplicateConceptId { row, concept_id });
            }
            Ok(SnomedConceptRecord {
                concept_id,
                fsn,
                active,
            })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(e) => outcome.reject(e)?,
        }
    }
    Ok(Loaded {
        records,
        warnings: outcome.warnings,
    })
}

/// Reads relationship rows and checks both endpoints against `concepts`.
/// Inactive rows are kept with `active == false`.
pub fn read_relationship_table<R: Read>(
    reader: R,
    concepts: &[SnomedConceptRecord],
    mode: ValidationMode,
) -> Result<Loaded<SnomedRelationshipRecord>, IngestError> {
    let table = Table::read("snomed_relationships", reader, true)?;
    let Some(cols) = table.columns(&["source_id", "destination_id", "type_id", "active"])? else {
        return Ok(Loaded {
            records: Vec::new(),
            warnings: Vec::new(),
        });
    };
    let known: BTreeSet<&str> = concepts.iter().map(|c| c.concept_id.as_str()).collect();
    let mut outcome = Outcome::new(mode);
    let mut records = Vec::new();
    for (row, rec) in table.numbered() {
        let parsed = (|| {
            let source_id = table.concept_field(row, rec, cols[0])?;
            let destination_id = table.concept_field(row, rec, cols[1])?;
            let type_id = table.concept_field(row, rec, cols[2])?;
            let active = table.bool_field(row, rec, cols[3])?;
            if source_id == destination_id {
                return Err(IngestError::SelfRelationship {
                    row,
                    concept_id: source_id,
                });
            }
            for (column, id) in [("source_id", &source_id), ("destination_id", &destination_id)] {
                if !known.contains(id.as_str()) {
                    return Err(IngestError::UnknownConceptInRelationship {
                        row,
                        column: column.to_owned(),
                        concept_id: id.clone(),
                    });
                }
            }
            Ok(SnomedRelationshipRecord {
                source_id,
                destination_id,
                type_id,
                active,
            })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(e) => outcome.reject(e)?,
        }
    }
    Ok(Loaded {
        records,
        warnings: outcome.warnings,
    })
}

/// Loads the ICD-10 table, the SNOMED-CT concepts and the SNOMED-CT
/// relationships, cross-validating relationship endpoints.
pub fn load_terminology(
    icd_path: &Path,
    concepts_path: &Path,
    relationships_path: &Path,
    mode: ValidationMode,
) -> Result<(Terminology, Vec<Warning>), IngestError> {
    let icd = read_icd_table(open(icd_path)?, mode)?;
    let concepts = read_concept_table(open(concepts_path)?, mode)?;
    let relationships = read_relationship_table(open(relationships_path)?, &concepts.records, mode)?;
    let mut warnings = icd.warnings;
    warnings.extend(concepts.warnings);
    warnings.extend(relationships.warnings);
    let terminology = Terminology {
        icd_codes: icd.records,
        concepts: concepts.records,
        relationships: relationships.records,
    };
    Ok((terminology, warnings))
}

/// Reads one mapping table. `activity->domain` must be functional; targets
/// of the concept-valued kinds must be SNOMED-CT identifiers.
pub fn read_mapping<R: Read>(
    kind: MappingKind,
    reader: R,
    mode: ValidationMode,
) -> Result<(MappingTable, Vec<Warning>), IngestError> {
    let table = Table::read(&kind.to_string(), reader, true)?;
    let mut mapping = MappingTable::new(kind);
    let Some(cols) = table.columns(&["source", "target"])? else {
        return Ok((mapping, Vec::new()));
    };
    let mut outcome = Outcome::new(mode);
    let mut seen = BTreeSet::new();
    let mut domains: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (row, rec) in table.numbered() {
        let parsed = (|| {
            let source = if kind == MappingKind::IcdToSnomed {
                table.icd_field(row, rec, cols[0])?
            } else {
                table.field(row, rec, cols[0])?
            };
            let target = if kind.target_is_concept() {
                table.concept_field(row, rec, cols[1])?
            } else {
                table.field(row, rec, cols[1])?
            };
            if seen.contains(&(source.clone(), target.clone())) {
                return Err(IngestError::DuplicatePair {
                    kind,
                    row,
                    source_key: source,
                    target_key: target,
                });
            }
            Ok((source, target))
        })();
        match parsed {
            Ok((source, target)) => {
                if kind == MappingKind::ActivityToDomain {
                    let assigned = domains.entry(source.clone()).or_default();
                    if !assigned.is_empty() {
                        assigned.push(target.clone());
                        continue;
                    }
                    assigned.push(target.clone());
                }
                seen.insert((source.clone(), target.clone()));
                mapping.rows.push((source, target));
            }
            Err(e) => outcome.reject(e)?,
        }
    }
    for (activity, assigned) in domains {
        if assigned.len() > 1 {
            outcome.reject(IngestError::NonFunctionalMapping {
                activity,
                domains: assigned,
            })?;
        }
    }
    Ok((mapping, outcome.warnings))
}

/// Loads every given mapping file, one [`MappingTable`] per entry.
pub fn load_mappings(paths: &[(MappingKind, PathBuf)], mode: ValidationMode) -> Result<Loaded<MappingTable>, IngestError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (kind, path) in paths {
        let (table, table_warnings) = read_mapping(*kind, open(path)?, mode)?;
        records.push(table);
        warnings.extend(table_warnings);
    }
    Ok(Loaded { records, warnings })
}

/// A record type that can be written back as a CSV row.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

impl CsvRow for DiagnosisRecord {
    const HEADER: &'static [&'static str] = &["patient_id", "admission_id", "icd_code", "seq_num"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.patient_id.clone(),
            self.admission_id.clone(),
            self.icd_code.clone(),
            self.seq_num.to_string(),
        ]
    }
}

impl CsvRow for IcdCodeRecord {
    const HEADER: &'static [&'static str] = &["icd_code", "title"];
    fn fields(&self) -> Vec<String> {
        vec![self.icd_code.clone(), self.title.clone()]
    }
}

impl CsvRow for SnomedConceptRecord {
    const HEADER: &'static [&'static str] = &["concept_id", "fsn", "active"];
    fn fields(&self) -> Vec<String> {
        vec![self.concept_id.clone(), self.fsn.clone(), self.active.to_string()]
    }
}

impl CsvRow for SnomedRelationshipRecord {
    const HEADER: &'static [&'static str] = &["source_id", "destination_id", "type_id", "active"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.source_id.clone(),
            self.destination_id.clone(),
            self.type_id.clone(),
            self.active.to_string(),
        ]
    }
}

impl CsvRow for EntityAttributeRecord {
    const HEADER: &'static [&'static str] = &["entity_type", "entity_id", "attribute", "value"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.entity_type.clone(),
            self.entity_id.clone(),
            self.attribute.clone(),
            self.value.clone(),
        ]
    }
}

impl CsvRow for (String, String) {
    const HEADER: &'static [&'static str] = &["source", "target"];
    fn fields(&self) -> Vec<String> {
        vec![self.0.clone(), self.1.clone()]
    }
}

pub fn write_table<W: Write, T: CsvRow>(writer: W, records: &[T]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(T::HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an event log. Extra columns are the sorted union of all records'
/// extra keys; absent values become empty cells.
pub fn write_event_table<W: Write>(writer: W, records: &[EventRecord]) -> csv::Result<()> {
    let extra: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.extra.keys().map(String::as_str))
        .collect();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["event_id", "timestamp", "activity", "patient_id", "admission_id"];
    header.extend(extra.iter().copied());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.event_id.clone(),
            format_timestamp(&r.timestamp),
            r.activity.clone(),
            r.patient_id.clone(),
            r.admission_id.clone(),
        ];
        row.extend(extra.iter().map(|k| r.extra.get(*k).cloned().unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
