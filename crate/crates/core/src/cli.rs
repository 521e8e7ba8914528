//! Manifest parsing and the `cekg` command-line driver.
//!
//! A manifest is a flat text file of `key = value` lines. Blank lines and
//! lines starting with `#` are ignored. Relative paths resolve against the
//! manifest's directory.
//!
//! ```text
//! event_log = events.csv              # required
//! diagnosis = diagnosis.csv           # required
//! icd10 = icd10.csv                   # required
//! snomed_concepts = concepts.csv      # required
//! snomed_relationships = rels.csv     # required
//! map_icd_snomed = ...                # optional, as are all tables below
//! map_activity_snomed = ...
//! map_activity_domain = ...
//! map_domain_snomed = ...
//! map_activity_treats = ...
//! entity_attributes = ...
//! column.event_id = row_id            # event-log column overrides
//! include_event_properties = true
//! include_domains = true
//! reify_disorders = true
//! strict = true                       # ingest validation and linking
//! strict_linking = true               # linking only
//! df_entity_types = PATIENT,ADMISSION
//! out_dir = out
//! output = C3 patients=P1,P2 entity_type=ADMISSION formats=dot,json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::construct::{build_all, entity_types, BuildConfig, BuildError, BuildInputs, Mappings};
use crate::discover::{self, CohortSelector, DiscoverError, PathwayGraph, Variant};
use crate::export::{self, ExportTarget, StyleMap};
use crate::graph::PropertyGraph;
use crate::ingest::{self, EventColumns, IngestError, IngestOptions, MappingKind, ValidationMode};
use crate::report::{BuildReport, Warning};

#[derive(Debug, Parser)]
#[command(name = "cekg", version, about = "Build clinical event knowledge graphs and care pathways")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Manifest naming input tables, options and requested outputs.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Abort on the first invalid row or broken reference.
    #[arg(long, global = true, conflicts_with = "lenient")]
    pub strict: bool,
    /// Skip invalid rows and report broken references as warnings.
    #[arg(long, global = true)]
    pub lenient: bool,
    /// Output directory.
    #[arg(long, global = true, env = "CEKG_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the input tables without building anything.
    Validate,
    /// Write cekg.graphml, cekg.cypher and report.json.
    Build,
    /// Write the requested pathway graphs as JSON.
    Discover,
    /// Write the requested pathway graphs as DOT or GraphML.
    Export,
    /// Build, discover and export.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Format {
    Dot,
    Graphml,
    Cypher,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dot" => Ok(Format::Dot),
            "graphml" => Ok(Format::Graphml),
            "cypher" => Ok(Format::Cypher),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

/// One `output = ...` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputRequest {
    pub variant: Variant,
    pub selector: CohortSelector,
    pub entity_type: Option<String>,
    pub formats: BTreeSet<Format>,
}

impl OutputRequest {
    /// File name stem shared by every format of this request.
    pub fn stem(&self) -> String {
        let mut stem = self.variant.to_string().to_lowercase();
        match &self.selector {
            CohortSelector::All => {}
            CohortSelector::SinglePatient(p) => stem += &format!("_{p}"),
            CohortSelector::PatientSet(set) => {
                stem += "_";
                stem += &set.iter().cloned().collect::<Vec<_>>().join("-");
            }
            CohortSelector::SameMultimorbidity(set) => {
                stem += "_mm-";
                stem += &set.iter().cloned().collect::<Vec<_>>().join("-");
            }
        }
        if let Some(t) = &self.entity_type {
            stem += &format!("_{}", t.to_lowercase());
        }
        sanitize(&stem)
    }

    fn aggregate_entity_type(&self) -> &str {
        match (&self.entity_type, self.variant) {
            (Some(t), _) => t,
            (None, Variant::C4) => entity_types::DISORDER,
            (None, _) => entity_types::ADMISSION,
        }
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

impl FromStr for OutputRequest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut words = s.split_whitespace();
        let variant: Variant = words
            .next()
            .ok_or("empty output request")?
            .parse()
            .map_err(|e: String| e)?;
        let mut request = OutputRequest {
            variant,
            selector: CohortSelector::All,
            entity_type: None,
            formats: BTreeSet::from([Format::Json]),
        };
        let mut selector_set = false;
        for word in words {
            let (key, value) = word
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {word:?}"))?;
            let list = || -> BTreeSet<String> {
                value.split(',').map(str::trim).filter(|v| !v.is_empty()).map(str::to_owned).collect()
            };
            match key {
                "patient" | "patients" | "multimorbidity" if selector_set => {
                    return Err("only one cohort selector per output".into())
                }
                "patient" | "patients" => {
                    let ids = list();
                    request.selector = match ids.len() {
                        0 => return Err("empty patient list".into()),
                        1 => CohortSelector::SinglePatient(ids.into_iter().next().unwrap_or_default()),
                        _ => CohortSelector::PatientSet(ids),
                    };
                    selector_set = true;
                }
                "multimorbidity" => {
                    request.selector = CohortSelector::SameMultimorbidity(list());
                    selector_set = true;
                }
                "entity_type" => request.entity_type = Some(value.to_owned()),
                "formats" => {
                    request.formats = value.split(',').map(Format::from_str).collect::<Result<_, _>>()?;
                    if request.formats.is_empty() {
                        return Err("empty format list".into());
                    }
                }
                other => return Err(format!("unknown output option {other:?}")),
            }
        }
        request.check()?;
        Ok(request)
    }
}

impl OutputRequest {
    fn check(&self) -> Result<(), String> {
        let v = self.variant;
        if self.formats.contains(&Format::Cypher) {
            return Err(format!("{v}: the cypher format applies only to the knowledge graph"));
        }
        match v {
            Variant::C1 | Variant::C2 | Variant::C6 if self.entity_type.is_some() => {
                Err(format!("{v} takes no entity_type"))
            }
            Variant::C1 | Variant::C2 if matches!(self.selector, CohortSelector::SameMultimorbidity(_)) => {
                Err(format!("{v} selects patients by id, not by multimorbidity"))
            }
            Variant::C6 if self.selector != CohortSelector::All => Err("C6 covers every patient".into()),
            Variant::C5 if !matches!(self.selector, CohortSelector::SameMultimorbidity(_)) => {
                Err("C5 requires multimorbidity=<concept ids>".into())
            }
            Variant::C3 | Variant::C4 if matches!(self.selector, CohortSelector::SameMultimorbidity(_)) => {
                Err(format!("{v} selects patients by id; use C5 for a multimorbidity cohort"))
            }
            _ => Ok(()),
        }
    }
}

/// Table keys in the order they are read.
pub const TABLE_KEYS: [&str; 11] = [
    "event_log",
    "diagnosis",
    "icd10",
    "snomed_concepts",
    "snomed_relationships",
    "map_icd_snomed",
    "map_activity_snomed",
    "map_activity_domain",
    "map_domain_snomed",
    "map_activity_treats",
    "entity_attributes",
];

const REQUIRED_TABLES: [&str; 5] = ["event_log", "diagnosis", "icd10", "snomed_concepts", "snomed_relationships"];

fn mapping_key(kind: MappingKind) -> &'static str {
    match kind {
        MappingKind::IcdToSnomed => "map_icd_snomed",
        MappingKind::ActivityToSnomed => "map_activity_snomed",
        MappingKind::ActivityToDomain => "map_activity_domain",
        MappingKind::DomainToSnomed => "map_domain_snomed",
        MappingKind::ActivityTreats => "map_activity_treats",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub tables: BTreeMap<String, PathBuf>,
    pub columns: EventColumns,
    pub config: BuildConfig,
    pub mode: ValidationMode,
    pub out_dir: Option<PathBuf>,
    pub outputs: Vec<OutputRequest>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key {0:?}")]
    MissingKey(&'static str),
    #[error("two outputs share the file name {0:?}")]
    DuplicateOutput(String),
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ManifestError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ManifestError::Syntax {
            line,
            message: format!("{key} expects true or false, got {value:?}"),
        }),
    }
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ManifestError> {
        let mut manifest = Manifest {
            tables: BTreeMap::new(),
            columns: EventColumns::default(),
            config: BuildConfig::default(),
            mode: ValidationMode::Strict,
            out_dir: None,
            outputs: Vec::new(),
        };
        let mut strict_linking = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let syntax = |message: String| ManifestError::Syntax { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key = value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                k if TABLE_KEYS.contains(&k) => {
                    manifest.tables.insert(k.to_owned(), base.join(value));
                }
                "include_event_properties" => manifest.config.include_event_properties = parse_bool(line, key, value)?,
                "include_domains" => manifest.config.include_domains = parse_bool(line, key, value)?,
                "reify_disorders" => manifest.config.reify_disorders = parse_bool(line, key, value)?,
                "strict_linking" => strict_linking = Some(parse_bool(line, key, value)?),
                "strict" => {
                    manifest.mode = if parse_bool(line, key, value)? {
                        ValidationMode::Strict
                    } else {
                        ValidationMode::Lenient
                    }
                }
                "df_entity_types" => {
                    manifest.config.df_entity_types =
                        Some(value.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::to_owned).collect())
                }
                "out_dir" => manifest.out_dir = Some(base.join(value)),
                "output" => manifest.outputs.push(value.parse().map_err(syntax)?),
                "column.event_id" => manifest.columns.event_id = value.to_owned(),
                "column.timestamp" => manifest.columns.timestamp = value.to_owned(),
                "column.activity" => manifest.columns.activity = value.to_owned(),
                "column.patient_id" => manifest.columns.patient_id = value.to_owned(),
                "column.admission_id" => manifest.columns.admission_id = value.to_owned(),
                other => return Err(syntax(format!("unknown key {other:?}"))),
            }
        }
        manifest.config.strict_linking = strict_linking.unwrap_or(manifest.mode == ValidationMode::Strict);
        for key in REQUIRED_TABLES {
            if !manifest.tables.contains_key(key) {
                return Err(ManifestError::MissingKey(key));
            }
        }
        let mut stems = BTreeSet::new();
        for request in &manifest.outputs {
            if !stems.insert(request.stem()) {
                return Err(ManifestError::DuplicateOutput(request.stem()));
            }
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|_| CliError::MissingFile(path.to_owned()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Manifest::parse(&text, base).map_err(|e| CliError::Manifest {
            path: path.to_owned(),
            source: e,
        })
    }

    /// Switches validation and linking together, as `--strict` and
    /// `--lenient` do.
    pub fn set_mode(&mut self, mode: ValidationMode) {
        self.mode = mode;
        self.config.strict_linking = mode == ValidationMode::Strict;
    }

    fn check_paths(&self) -> Result<(), CliError> {
        for path in self.tables.values() {
            if !path.is_file() {
                return Err(CliError::MissingFile(path.clone()));
            }
        }
        Ok(())
    }

    /// Reads every table named in the manifest.
    pub fn ingest(&self) -> Result<(BuildInputs, Vec<Warning>), CliError> {
        self.check_paths()?;
        let mut warnings = Vec::new();
        let opts = IngestOptions {
            columns: self.columns.clone(),
            include_extra: self.config.include_event_properties,
            mode: self.mode,
        };
        let mut take = |w: Vec<Warning>| warnings.extend(w);
        let events = ingest::load_event_table(&self.tables["event_log"], &opts)?;
        take(events.warnings);
        let diagnoses = ingest::load_diagnosis_table(&self.tables["diagnosis"], self.mode)?;
        take(diagnoses.warnings);
        let attributes = match self.tables.get("entity_attributes") {
            Some(p) => {
                let loaded = ingest::load_entity_attributes(p, self.mode)?;
                take(loaded.warnings);
                loaded.records
            }
            None => Vec::new(),
        };
        let (terminology, w) = ingest::load_terminology(
            &self.tables["icd10"],
            &self.tables["snomed_concepts"],
            &self.tables["snomed_relationships"],
            self.mode,
        )?;
        take(w);
        let paths: Vec<(MappingKind, PathBuf)> = MappingKind::ALL
            .iter()
            .filter_map(|k| Some((*k, self.tables.get(mapping_key(*k))?.clone())))
            .collect();
        let loaded = ingest::load_mappings(&paths, self.mode)?;
        take(loaded.warnings);
        Ok((
            BuildInputs {
                events: events.records,
                attributes,
                diagnoses: diagnoses.records,
                terminology,
                mappings: Mappings::from_tables(loaded.records),
            },
            warnings,
        ))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("MissingFile({})", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {source}", path.display())]
    Manifest { path: PathBuf, source: ManifestError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("output {request}: {source}")]
    Discover { request: String, source: DiscoverError },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for invalid input data, 2 for misuse of the command line or
    /// manifest options.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingFile(_) | CliError::Ingest(_) | CliError::Build(_) | CliError::Write { .. } => 1,
            CliError::Manifest { .. } | CliError::Usage(_) | CliError::Discover { .. } => 2,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Dot => "dot",
            Format::Graphml => "graphml",
            Format::Cypher => "cypher",
            Format::Json => "json",
        })
    }
}

/// Files written by a run, relative to the output directory.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub warnings: Vec<Warning>,
    pub report: Option<BuildReport>,
    pub written: Vec<PathBuf>,
}

/// Output files staged in memory and written only once every output has
/// been produced, so a failing request leaves no partial results.
#[derive(Default)]
struct Staged {
    files: Vec<(String, String)>,
}

impl Staged {
    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn flush(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_owned(),
            source,
        })?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = dir.join(&name);
            std::fs::write(&path, contents).map_err(|source| CliError::Write { path, source })?;
            written.push(PathBuf::from(name));
        }
        Ok(written)
    }
}

/// Pathway graphs for one request with the file stem of each. C1 yields
/// one graph per patient.
fn discover_request(graph: &PropertyGraph, request: &OutputRequest) -> Result<Vec<(String, PathwayGraph)>, CliError> {
    let stem = request.stem();
    let wrap = |source| CliError::Discover {
        request: stem.clone(),
        source,
    };
    let graphs = match request.variant {
        Variant::C1 => {
            let list = discover::instance_pathways(graph, &request.selector, false).map_err(wrap)?;
            return Ok(list
                .into_iter()
                .map(|p| {
                    let patient = p.title.strip_prefix("patient ").unwrap_or(&p.title).to_owned();
                    (sanitize(&format!("{stem}_{patient}")), p)
                })
                .collect());
        }
        Variant::C2 => discover::instance_pathways(graph, &request.selector, true).map_err(wrap)?,
        Variant::C3 | Variant::C4 | Variant::C5 => vec![discover::aggregate_pathway(
            graph,
            &request.selector,
            request.aggregate_entity_type(),
            request.variant == Variant::C4,
        )
        .map_err(wrap)?],
        Variant::C6 => vec![discover::status_pathway(graph).map_err(wrap)?],
    };
    Ok(graphs.into_iter().map(|p| (stem.clone(), p)).collect())
}

/// Runs one command. `out` overrides the manifest's output directory.
pub fn run(command: Command, manifest: &Manifest, out: Option<&Path>) -> Result<RunOutcome, CliError> {
    let (inputs, warnings) = manifest.ingest()?;
    let mut outcome = RunOutcome {
        warnings,
        ..RunOutcome::default()
    };
    if command == Command::Validate {
        return Ok(outcome);
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| manifest.out_dir.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set out_dir in the manifest".into()))?;
    let (graph, report) = build_all(&inputs, &manifest.config)?;
    let mut staged = Staged::default();

    if matches!(command, Command::Build | Command::All) {
        let style = StyleMap::for_graph(&graph);
        staged.add("cekg.graphml", export::emit_graphml(&ExportTarget::Cekg(&graph, &style)));
        staged.add("cekg.cypher", export::emit_query_script(&graph));
        staged.add("report.json", report.to_json());
    }
    if matches!(command, Command::Discover | Command::Export | Command::All) {
        let json = command != Command::Export;
        let render = command != Command::Discover;
        for request in &manifest.outputs {
            let graphs = discover_request(&graph, request)?;
            for (stem, pathway) in &graphs {
                if json && request.formats.contains(&Format::Json) {
                    staged.add(format!("{stem}.json"), pathway.to_json());
                }
                if render && request.formats.contains(&Format::Dot) {
                    staged.add(format!("{stem}.dot"), export::emit_dot(&ExportTarget::Pathway(pathway)));
                }
                if render && request.formats.contains(&Format::Graphml) {
                    staged.add(
                        format!("{stem}.graphml"),
                        export::emit_graphml(&ExportTarget::Pathway(pathway)),
                    );
                }
            }
            if json && request.variant == Variant::C6 && request.formats.contains(&Format::Json) {
                let table = discover::admission_disorder_status(&graph).map_err(|source| CliError::Discover {
                    request: request.stem(),
                    source,
                })?;
                staged.add(format!("{}_status.json", request.stem()), table.to_json());
            }
        }
    }
    outcome.warnings.extend(report.warnings.iter().cloned());
    outcome.report = Some(report);
    outcome.written = staged.flush(&dir)?;
    Ok(outcome)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let Some(manifest_path) = cli.manifest.as_deref() else {
        eprintln!("error: missing required flag --manifest <path>");
        return 2;
    };
    let result = Manifest::load(manifest_path).and_then(|mut manifest| {
        if cli.strict {
            manifest.set_mode(ValidationMode::Strict);
        } else if cli.lenient {
            manifest.set_mode(ValidationMode::Lenient);
        }
        run(cli.command, &manifest, cli.out.as_deref())
    });
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if cli.command == Command::Validate {
                println!("ok: {} warning(s)", outcome.warnings.len());
            }
            for path in &outcome.written {
                println!("{}", path.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
