//! Construction of a clinical event knowledge graph from ingested records.
//!
//! [`CekgBuilder`] runs the fourteen construction steps as separate
//! operations so that each layer can be built and inspected on its own;
//! [`build_all`] runs them in order and freezes the result.
//!
//! | step | operation |
//! |------|-----------|
//! | 1-3  | [`CekgBuilder::build_events_and_entities`] |
//! | 4    | [`CekgBuilder::build_activity_classes`] |
//! | 5    | [`CekgBuilder::build_domains`] |
//! | 6-8  | [`CekgBuilder::build_terminology_graph`] |
//! | 9-12 | [`CekgBuilder::link_terminology`] |
//! | 13   | [`CekgBuilder::reify_disorders`] |
//! | 14   | [`CekgBuilder::compute_df`] |

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::graph::{edge_types, labels, props, Direction, GraphError, NodeId, Properties, PropertyGraph, PropertyValue};
use crate::ingest::{
    DiagnosisRecord, EntityAttributeRecord, EventRecord, MappingKind, MappingTable, Terminology,
};
use crate::report::{BuildReport, Warning};

/// Entity types known to the construction pipeline.
pub mod entity_types {
    pub const PATIENT: &str = "PATIENT";
    pub const ADMISSION: &str = "ADMISSION";
    pub const DISORDER: &str = "Disorder";
}

/// Graph metadata keys written by the builder.
pub mod meta {
    pub const DOMAINS_BUILT: &str = "domains_built";
    pub const DISORDERS_REIFIED: &str = "disorders_reified";
    pub const DF_ENTITY_TYPES: &str = "df_entity_types";
}

pub const STEP_NAMES: [&str; 15] = [
    "Creating a Labeled Property Graph for the Event Log",
    "Creating a Labeled Property Graph for Entities Attributes",
    "Creating Relationships Between Entities and Entities Attributes",
    "Creating a Labeled Property Graph for Activity Attributes",
    "Creating a Labeled Property Graph for Activities Domains",
    "Creating a Labeled Property Graph for ICD Codes",
    "Creating Nodes for SNOMED-CT Concepts",
    "Creating Relationships Between Nodes of SNOMED-CT Concepts",
    "Connecting Diagnosed Disorders to ICD Codes",
    "Connecting ICD Codes to SNOMED-CT ID",
    "Connecting Activities to SNOMED-CT Codes",
    "Connecting Activities to Domains and Connecting Domains to SNOMED-CT Codes",
    "Connecting Events to Disorders and Defining Diagnosed Disorders as New Entities",
    "Creating Directly Follows (DF) Relationships and Finalizing the Clinical Event Knowledge Graph",
    "Discovering Care Pathways from the Clinical Event Knowledge Graph",
];

pub fn step_name(step: u8) -> &'static str {
    STEP_NAMES
        .get(usize::from(step).wrapping_sub(1))
        .copied()
        .unwrap_or("unknown step")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildConfig {
    /// Copy extra event-log columns (test results etc.) onto Event nodes.
    pub include_event_properties: bool,
    pub include_domains: bool,
    /// Referential problems are errors when set, warnings otherwise.
    pub strict_linking: bool,
    pub reify_disorders: bool,
    /// Entity types that receive DF edges; `None` means every type.
    pub df_entity_types: Option<BTreeSet<String>>,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            include_event_properties: true,
            include_domains: true,
            strict_linking: true,
            reify_disorders: true,
            df_entity_types: None,
        }
    }
}

impl BuildConfig {
    /// Entity types that exist after construction under this config.
    pub fn entity_types(&self) -> Vec<&'static str> {
        let mut types = vec![entity_types::PATIENT, entity_types::ADMISSION];
        if self.reify_disorders {
            types.push(entity_types::DISORDER);
        }
        types
    }
}

/// All mapping tables, one per kind. Missing kinds are empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mappings {
    pub icd_snomed: MappingTable,
    pub activity_snomed: MappingTable,
    pub activity_domain: MappingTable,
    pub domain_snomed: MappingTable,
    pub activity_treats: MappingTable,
}

impl Default for Mappings {
    fn default() -> Self {
        Mappings {
            icd_snomed: MappingTable::new(MappingKind::IcdToSnomed),
            activity_snomed: MappingTable::new(MappingKind::ActivityToSnomed),
            activity_domain: MappingTable::new(MappingKind::ActivityToDomain),
            domain_snomed: MappingTable::new(MappingKind::DomainToSnomed),
            activity_treats: MappingTable::new(MappingKind::ActivityTreats),
        }
    }
}

impl Mappings {
    /// Collects tables by kind; rows of repeated kinds are concatenated.
    pub fn from_tables(tables: impl IntoIterator<Item = MappingTable>) -> Self {
        let mut m = Mappings::default();
        for t in tables {
            m.get_mut(t.kind).rows.extend(t.rows);
        }
        m
    }

    pub fn get(&self, kind: MappingKind) -> &MappingTable {
        match kind {
            MappingKind::IcdToSnomed => &self.icd_snomed,
            MappingKind::ActivityToSnomed => &self.activity_snomed,
            MappingKind::ActivityToDomain => &self.activity_domain,
            MappingKind::DomainToSnomed => &self.domain_snomed,
            MappingKind::ActivityTreats => &self.activity_treats,
        }
    }

    fn get_mut(&mut self, kind: MappingKind) -> &mut MappingTable {
        match kind {
            MappingKind::IcdToSnomed => &mut self.icd_snomed,
            MappingKind::ActivityToSnomed => &mut self.activity_snomed,
            MappingKind::ActivityToDomain => &mut self.activity_domain,
            MappingKind::DomainToSnomed => &mut self.domain_snomed,
            MappingKind::ActivityTreats => &mut self.activity_treats,
        }
    }
}

/// Every record the pipeline consumes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildInputs {
    pub events: Vec<EventRecord>,
    pub attributes: Vec<EntityAttributeRecord>,
    pub diagnoses: Vec<DiagnosisRecord>,
    pub terminology: Terminology,
    pub mappings: Mappings,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConstructError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("the graph already holds Event or Entity nodes")]
    GraphNotEmpty,
    #[error("admission {admission_id:?} appears with patients {first:?} and {second:?}")]
    AdmissionPatientConflict {
        admission_id: String,
        first: String,
        second: String,
    },
    #[error("attribute {attribute:?} refers to unknown entity ({entity_type}, {entity_id})")]
    AttributeForUnknownEntity {
        entity_type: String,
        entity_id: String,
        attribute: String,
    },
    #[error("relationship refers to unknown concept {concept_id:?}")]
    UnknownConcept { concept_id: String },
    #[error("diagnosis ({patient_id}, {admission_id}) refers to an admission of that patient with no events")]
    DiagnosisForUnknownAdmission {
        patient_id: String,
        admission_id: String,
    },
    #[error("diagnosis ({patient_id}, {admission_id}) uses ICD code {icd_code:?} missing from the ICD table")]
    DiagnosisCodeNotInIcdTable {
        patient_id: String,
        admission_id: String,
        icd_code: String,
    },
    #[error("diagnosed ICD code {icd_code:?} has no SNOMED-CT mapping")]
    IcdCodeUnmappedToSnomed { icd_code: String },
    #[error("{kind} mapping row ({source_key}, {target_key}) refers to unknown {missing:?}")]
    UnknownMappingKey {
        kind: MappingKind,
        source_key: String,
        target_key: String,
        missing: String,
    },
    #[error("activity {activity:?} is mapped to treat {concept_id:?}, which is not a known concept")]
    TreatsTargetNotAConcept { activity: String, concept_id: String },
    #[error("DF edges have already been computed")]
    DfAlreadyComputed,
    #[error("cannot compute DF for entity type {entity_type:?}; available types: {available:?}")]
    InvalidDfEntityType {
        entity_type: String,
        available: Vec<String>,
    },
}

/// A construction failure tagged with the step that raised it.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("step {step} ({}): {source}", step_name(*.step))]
pub struct BuildError {
    pub step: u8,
    pub source: ConstructError,
}

/// An item tagged with its start time, for chronological sorting.
type Stamped<K> = (Option<DateTime<Utc>>, K, NodeId);

/// Text values that parse as numbers become numeric properties.
pub fn infer_value(raw: &str) -> PropertyValue {
    if let Ok(i) = raw.parse::<i64>() {
        return PropertyValue::Integer(i);
    }
    let numeric = raw
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
        && raw.bytes().any(|b| b.is_ascii_digit());
    if numeric {
        if let Ok(d) = raw.parse::<f64>() {
            if d.is_finite() {
                return PropertyValue::Decimal(d);
            }
        }
    }
    PropertyValue::Text(raw.to_owned())
}

/// Entity id given to a reified disorder of one patient.
pub fn disorder_entity_id(patient_id: &str, concept_id: &str) -> String {
    format!("{patient_id}:{concept_id}")
}

/// Runs the construction steps against a graph.
pub struct CekgBuilder<'c> {
    graph: PropertyGraph,
    config: &'c BuildConfig,
}

impl<'c> CekgBuilder<'c> {
    pub fn new(config: &'c BuildConfig) -> Self {
        Self::on(PropertyGraph::new(), config)
    }

    pub fn on(graph: PropertyGraph, config: &'c BuildConfig) -> Self {
        CekgBuilder { graph, config }
    }

    pub fn graph(&self) -> &PropertyGraph {
        &self.graph
    }

    pub fn into_graph(self) -> PropertyGraph {
        self.graph
    }

    /// Records a referential problem: an error in strict mode, a warning
    /// otherwise.
    fn referential(&self, report: &mut BuildReport, step: u8, err: ConstructError) -> Result<(), ConstructError> {
        if self.config.strict_linking {
            Err(err)
        } else {
            report.warnings.push(Warning::at_step(step, err.to_string()));
            Ok(())
        }
    }

    fn entity(&self, entity_type: &str, entity_id: &str) -> Option<NodeId> {
        self.graph
            .match_nodes(
                labels::ENTITY,
                &[
                    ("entity_id", entity_id.into()),
                    ("entity_type", entity_type.into()),
                ],
            )
            .into_iter()
            .next()
    }

    fn class(&self, activity: &str) -> Option<NodeId> {
        self.graph.find_node(labels::CLASS, "activity", activity)
    }

    fn concept(&self, concept_id: &str) -> Option<NodeId> {
        self.graph.find_node(labels::SNOMED_CONCEPT, "concept_id", concept_id)
    }

    fn domain(&self, name: &str) -> Option<NodeId> {
        self.graph
            .match_nodes(labels::DOMAIN, &[("name", name.into())])
            .into_iter()
            .next()
    }

    fn icd(&self, code: &str) -> Option<NodeId> {
        self.graph.find_node(labels::ICD_CODE, "icd_code", code)
    }

    /// Steps 1-3: Event nodes, PATIENT/ADMISSION entities with CORR edges,
    /// and entity attribute values.
    pub fn build_events_and_entities(
        &mut self,
        events: &[EventRecord],
        attributes: &[EntityAttributeRecord],
    ) -> Result<BuildReport, BuildError> {
        let at = |step: u8| move |source: ConstructError| BuildError { step, source };
        let mut report = BuildReport::default();
        if !self.graph.match_nodes(labels::EVENT, &[]).is_empty()
            || !self.graph.match_nodes(labels::ENTITY, &[]).is_empty()
        {
            return Err(at(1)(ConstructError::GraphNotEmpty));
        }

        let mut admission_patient: HashMap<&str, &str> = HashMap::new();
        for e in events {
            let first = *admission_patient.entry(&e.admission_id).or_insert(&e.patient_id);
            if first != e.patient_id {
                self.referential(
                    &mut report,
                    1,
                    ConstructError::AdmissionPatientConflict {
                        admission_id: e.admission_id.clone(),
                        first: first.to_owned(),
                        second: e.patient_id.clone(),
                    },
                )
                .map_err(at(1))?;
            }
        }

        let mut event_nodes = Vec::with_capacity(events.len());
        for e in events {
            let mut properties = props([
                ("event_id", PropertyValue::from(e.event_id.as_str())),
                ("timestamp", PropertyValue::timestamp(e.timestamp)),
                ("activity", e.activity.as_str().into()),
            ]);
            if self.config.include_event_properties {
                for (k, v) in &e.extra {
                    properties.entry(k.clone()).or_insert_with(|| infer_value(v));
                }
            }
            event_nodes.push(self.graph.add_node([labels::EVENT], properties).map_err(|g| at(1)(g.into()))?);
        }

        let mut entities: HashMap<(&str, &str), NodeId> = HashMap::new();
        for e in events {
            for (entity_type, entity_id) in [
                (entity_types::PATIENT, e.patient_id.as_str()),
                (entity_types::ADMISSION, e.admission_id.as_str()),
            ] {
                if entities.contains_key(&(entity_type, entity_id)) {
                    continue;
                }
                let mut properties = props([("entity_type", entity_type), ("entity_id", entity_id)]);
                if entity_type == entity_types::ADMISSION {
                    properties.insert("patient_id".into(), admission_patient[entity_id].into());
                }
                let id = self.graph.add_node([labels::ENTITY], properties).map_err(|g| at(1)(g.into()))?;
                entities.insert((entity_type, entity_id), id);
            }
        }
        for (e, node) in events.iter().zip(&event_nodes) {
            for key in [
                (entity_types::PATIENT, e.patient_id.as_str()),
                (entity_types::ADMISSION, e.admission_id.as_str()),
            ] {
                self.graph
                    .add_edge(edge_types::CORR, *node, entities[&key], Properties::new())
                    .map_err(|g| at(1)(g.into()))?;
            }
        }

        for a in attributes {
            let Some(owner) = entities.get(&(a.entity_type.as_str(), a.entity_id.as_str())).copied() else {
                self.referential(
                    &mut report,
                    2,
                    ConstructError::AttributeForUnknownEntity {
                        entity_type: a.entity_type.clone(),
                        entity_id: a.entity_id.clone(),
                        attribute: a.attribute.clone(),
                    },
                )
                .map_err(at(2))?;
                continue;
            };
            let value = self
                .graph
                .add_node(
                    [labels::ATTRIBUTE_VALUE],
                    props([
                        ("entity_type", a.entity_type.as_str()),
                        ("entity_id", a.entity_id.as_str()),
                        ("attribute", a.attribute.as_str()),
                        ("value", a.value.as_str()),
                    ]),
                )
                .map_err(|g| at(2)(g.into()))?;
            self.graph
                .add_edge(edge_types::HAS_ATTRIBUTE, owner, value, Properties::new())
                .map_err(|g| at(3)(g.into()))?;
        }
        report.recount(&self.graph);
        Ok(report)
    }

    /// Step 4: one Class node per distinct activity, OBSERVED from each event.
    pub fn build_activity_classes(&mut self) -> Result<BuildReport, BuildError> {
        let at = |source: ConstructError| BuildError { step: 4, source };
        let events = self.graph.match_nodes(labels::EVENT, &[]);
        let mut classes: HashMap<String, NodeId> = HashMap::new();
        for event in events {
            let activity = self.graph.node(event).and_then(|n| n.text("activity")).unwrap_or_default().to_owned();
            let class = match classes.get(&activity) {
                Some(c) => *c,
                None => {
                    let c = self
                        .graph
                        .add_node(
                            [labels::CLASS],
                            props([("activity", activity.as_str()), ("display", activity.as_str())]),
                        )
                        .map_err(|g| at(g.into()))?;
                    classes.insert(activity, c);
                    c
                }
            };
            self.graph
                .add_edge(edge_types::OBSERVED, event, class, Properties::new())
                .map_err(|g| at(g.into()))?;
        }
        let mut report = BuildReport::default();
        report.recount(&self.graph);
        Ok(report)
    }

    /// Step 5: Domain nodes and Class→Domain edges. Skipped entirely when
    /// domains are disabled.
    pub fn build_domains(&mut self, activity_domain: &MappingTable) -> Result<BuildReport, BuildError> {
        let at = |source: ConstructError| BuildError { step: 5, source };
        let mut report = BuildReport::default();
        if !self.config.include_domains {
            return Ok(report);
        }
        for (activity, domain) in &activity_domain.rows {
            let Some(class) = self.class(activity) else {
                report.warnings.push(Warning::at_step(
                    5,
                    format!("activity {activity:?} mapped to domain {domain:?} does not occur in the event log"),
                ));
                continue;
            };
            let domain_node = match self.domain(domain) {
                Some(d) => d,
                None => self
                    .graph
                    .add_node([labels::DOMAIN], props([("name", domain.as_str())]))
                    .map_err(|g| at(g.into()))?,
            };
            self.graph
                .add_edge(edge_types::HAS_DOMAIN, class, domain_node, Properties::new())
                .map_err(|g| at(g.into()))?;
        }
        for class in self.graph.match_nodes(labels::CLASS, &[]) {
            if self.graph.adjacent(class, edge_types::HAS_DOMAIN, Direction::Out).map_err(|g| at(g.into()))?.is_empty() {
                let activity = self.graph.node(class).and_then(|n| n.text("activity")).unwrap_or_default();
                report.activities_without_domain.push(activity.to_owned());
            }
        }
        report.activities_without_domain.sort();
        self.graph
            .set_metadata(meta::DOMAINS_BUILT, "true")
            .map_err(|g| at(g.into()))?;
        report.recount(&self.graph);
        Ok(report)
    }

    /// Steps 6-8: ICD code nodes, SNOMED-CT concept nodes, and one SCT_REL
    /// edge per active relationship row.
    pub fn build_terminology_graph(&mut self, terminology: &Terminology) -> Result<BuildReport, BuildError> {
        let at = |step: u8| move |source: ConstructError| BuildError { step, source };
        let mut report = BuildReport::default();
        for icd in &terminology.icd_codes {
            self.graph
                .add_node(
                    [labels::ICD_CODE],
                    props([("icd_code", icd.icd_code.as_str()), ("title", icd.title.as_str())]),
                )
                .map_err(|g| at(6)(g.into()))?;
        }
        let mut concepts: HashMap<&str, NodeId> = HashMap::new();
        for c in &terminology.concepts {
            let id = self
                .graph
                .add_node(
                    [labels::SNOMED_CONCEPT],
                    props([
                        ("concept_id", PropertyValue::from(c.concept_id.as_str())),
                        ("fsn", c.fsn.as_str().into()),
                        ("active", c.active.into()),
                    ]),
                )
                .map_err(|g| at(7)(g.into()))?;
            concepts.insert(&c.concept_id, id);
        }
        for r in terminology.relationships.iter().filter(|r| r.active) {
            let ends = (concepts.get(r.source_id.as_str()), concepts.get(r.destination_id.as_str()));
            let (Some(source), Some(target)) = ends else {
                let missing = if ends.0.is_none() { &r.source_id } else { &r.destination_id };
                self.referential(
                    &mut report,
                    8,
                    ConstructError::UnknownConcept {
                        concept_id: missing.clone(),
                    },
                )
                .map_err(at(8))?;
                continue;
            };
            self.graph
                .add_edge(
                    edge_types::SCT_REL,
                    *source,
                    *target,
                    props([("type_id", r.type_id.as_str())]),
                )
                .map_err(|g| at(8)(g.into()))?;
        }
        report.recount(&self.graph);
        Ok(report)
    }

    /// Checks both ends of a mapping row. Unknown activities and domains
    /// are dead rows (warnings); unknown concepts and ICD codes are
    /// referential errors.
    fn mapping_ends(
        &self,
        report: &mut BuildReport,
        step: u8,
        kind: MappingKind,
        source_key: &str,
        target_key: &str,
    ) -> Result<Option<(NodeId, NodeId)>, ConstructError> {
        let (source, source_is_log_derived) = match kind {
            MappingKind::IcdToSnomed => (self.icd(source_key), false),
            MappingKind::ActivityToSnomed | MappingKind::ActivityTreats | MappingKind::ActivityToDomain => {
                (self.class(source_key), true)
            }
            MappingKind::DomainToSnomed => (self.domain(source_key), true),
        };
        let target = self.concept(target_key);
        let missing = |what: &str| ConstructError::UnknownMappingKey {
            kind,
            source_key: source_key.to_owned(),
            target_key: target_key.to_owned(),
            missing: what.to_owned(),
        };
        if target.is_none() {
            let err = if kind == MappingKind::ActivityTreats {
                ConstructError::TreatsTargetNotAConcept {
                    activity: source_key.to_owned(),
                    concept_id: target_key.to_owned(),
                }
            } else {
                missing(target_key)
            };
            self.referential(report, step, err)?;
            return Ok(None);
        }
        match source {
            Some(s) => Ok(target.map(|t| (s, t))),
            None if source_is_log_derived => {
                report.warnings.push(Warning::at_step(
                    step,
                    format!("{kind} mapping row ({source_key}, {target_key}) ignored: {source_key:?} does not occur in the graph"),
                ));
                Ok(None)
            }
            None => {
                self.referential(report, step, missing(source_key))?;
                Ok(None)
            }
        }
    }

    /// Steps 9-12: diagnoses to ICD codes, ICD codes to concepts, activity
    /// classes to concepts, domains to concepts.
    pub fn link_terminology(
        &mut self,
        diagnoses: &[DiagnosisRecord],
        mappings: &Mappings,
    ) -> Result<BuildReport, BuildError> {
        let at = |step: u8| move |source: ConstructError| BuildError { step, source };
        let mut report = BuildReport::default();

        let mut diagnosed_codes: Vec<NodeId> = Vec::new();
        for d in diagnoses {
            let admission = self
                .entity(entity_types::ADMISSION, &d.admission_id)
                .filter(|a| self.graph.node(*a).and_then(|n| n.text("patient_id")) == Some(d.patient_id.as_str()));
            let Some(admission) = admission else {
                self.referential(
                    &mut report,
                    9,
                    ConstructError::DiagnosisForUnknownAdmission {
                        patient_id: d.patient_id.clone(),
                        admission_id: d.admission_id.clone(),
                    },
                )
                .map_err(at(9))?;
                continue;
            };
            let Some(code) = self.icd(&d.icd_code) else {
                self.referential(
                    &mut report,
                    9,
                    ConstructError::DiagnosisCodeNotInIcdTable {
                        patient_id: d.patient_id.clone(),
                        admission_id: d.admission_id.clone(),
                        icd_code: d.icd_code.clone(),
                    },
                )
                .map_err(at(9))?;
                report.unlinked_icd_codes.push(d.icd_code.clone());
                continue;
            };
            self.graph
                .add_edge(
                    edge_types::DIAGNOSED_AS,
                    admission,
                    code,
                    props([
                        ("seq_num", PropertyValue::Integer(i64::from(d.seq_num))),
                        ("patient_id", d.patient_id.as_str().into()),
                    ]),
                )
                .map_err(|g| at(9)(g.into()))?;
            diagnosed_codes.push(code);
        }

        for (icd, concept) in &mappings.icd_snomed.rows {
            if let Some((s, t)) = self
                .mapping_ends(&mut report, 10, MappingKind::IcdToSnomed, icd, concept)
                .map_err(at(10))?
            {
                self.graph
                    .add_edge(edge_types::MAPS_TO, s, t, Properties::new())
                    .map_err(|g| at(10)(g.into()))?;
            }
        }
        diagnosed_codes.sort();
        diagnosed_codes.dedup();
        for code in diagnosed_codes {
            if self.graph.adjacent(code, edge_types::MAPS_TO, Direction::Out).map_err(|g| at(10)(g.into()))?.is_empty() {
                let icd_code = self.graph.node(code).and_then(|n| n.text("icd_code")).unwrap_or_default().to_owned();
                report.unlinked_icd_codes.push(icd_code.clone());
                self.referential(&mut report, 10, ConstructError::IcdCodeUnmappedToSnomed { icd_code })
                    .map_err(at(10))?;
            }
        }

        for (activity, concept) in &mappings.activity_snomed.rows {
            if let Some((class, target)) = self
                .mapping_ends(&mut report, 11, MappingKind::ActivityToSnomed, activity, concept)
                .map_err(at(11))?
            {
                let first_code = self
                    .graph
                    .adjacent(class, edge_types::CODED_AS, Direction::Out)
                    .map_err(|g| at(11)(g.into()))?
                    .is_empty();
                self.graph
                    .add_edge(edge_types::CODED_AS, class, target, Properties::new())
                    .map_err(|g| at(11)(g.into()))?;
                if first_code {
                    let fsn = self.graph.node(target).and_then(|n| n.text("fsn")).unwrap_or_default().to_owned();
                    self.graph
                        .set_node_property(class, "display", fsn.into())
                        .map_err(|g| at(11)(g.into()))?;
                }
            }
        }
        for class in self.graph.match_nodes(labels::CLASS, &[]) {
            if self.graph.adjacent(class, edge_types::CODED_AS, Direction::Out).map_err(|g| at(11)(g.into()))?.is_empty() {
                let activity = self.graph.node(class).and_then(|n| n.text("activity")).unwrap_or_default();
                report.unlinked_activities.push(activity.to_owned());
            }
        }

        if self.config.include_domains {
            for (domain, concept) in &mappings.domain_snomed.rows {
                if let Some((s, t)) = self
                    .mapping_ends(&mut report, 12, MappingKind::DomainToSnomed, domain, concept)
                    .map_err(at(12))?
                {
                    self.graph
                        .add_edge(edge_types::CODED_AS, s, t, Properties::new())
                        .map_err(|g| at(12)(g.into()))?;
                }
            }
        }
        report.unlinked_activities.sort();
        report.unlinked_icd_codes.sort();
        report.unlinked_icd_codes.dedup();
        report.recount(&self.graph);
        Ok(report)
    }

    /// Earliest correlated event timestamp of an entity.
    fn first_event_time(&self, entity: NodeId) -> Option<DateTime<Utc>> {
        self.graph
            .adjacent(entity, edge_types::CORR, Direction::In)
            .ok()?
            .into_iter()
            .filter_map(|(_, e)| self.graph.node(e)?.get("timestamp")?.as_timestamp())
            .min()
    }

    /// Step 13: Disorder entities per (patient, concept) reachable through
    /// DIAGNOSED_AS then MAPS_TO, TREATS edges from classes to concepts, and
    /// CORR edges from each event to the disorders its activity treats.
    pub fn reify_disorders(&mut self, treats: &MappingTable) -> Result<BuildReport, BuildError> {
        let at = |source: ConstructError| BuildError { step: 13, source };
        let g = |e: GraphError| at(e.into());
        let mut report = BuildReport::default();
        if !self.config.reify_disorders {
            return Ok(report);
        }

        let admissions = self.graph.match_nodes(labels::ENTITY, &[("entity_type", entity_types::ADMISSION.into())]);
        let mut by_patient: BTreeMap<NodeId, Vec<Stamped<String>>> = BTreeMap::new();
        for admission in admissions {
            let node = self.graph.node(admission).expect("indexed node exists");
            let patient_id = node.text("patient_id").unwrap_or_default();
            let admission_id = node.text("entity_id").unwrap_or_default().to_owned();
            let Some(patient) = self.entity(entity_types::PATIENT, patient_id) else {
                continue;
            };
            by_patient
                .entry(patient)
                .or_default()
                .push((self.first_event_time(admission), admission_id, admission));
        }

        let mut disorders: HashMap<(NodeId, String), NodeId> = HashMap::new();
        for (patient, mut admissions) in by_patient {
            admissions.sort();
            let patient_id = self.graph.node(patient).and_then(|n| n.text("entity_id")).unwrap_or_default().to_owned();
            for (_, admission_id, admission) in admissions {
                let mut diagnosed: Vec<(i64, NodeId)> = self
                    .graph
                    .adjacent(admission, edge_types::DIAGNOSED_AS, Direction::Out)
                    .map_err(g)?
                    .into_iter()
                    .map(|(edge, code)| {
                        let seq = self.graph.edge(edge).and_then(|e| e.get("seq_num")?.as_integer()).unwrap_or(i64::MAX);
                        (seq, code)
                    })
                    .collect();
                diagnosed.sort();
                for (_, code) in diagnosed {
                    for (_, concept) in self.graph.adjacent(code, edge_types::MAPS_TO, Direction::Out).map_err(g)? {
                        let concept_id = self
                            .graph
                            .node(concept)
                            .and_then(|n| n.text("concept_id"))
                            .unwrap_or_default()
                            .to_owned();
                        if disorders.contains_key(&(patient, concept_id.clone())) {
                            continue;
                        }
                        let entity = self
                            .graph
                            .add_node(
                                [labels::ENTITY],
                                props([
                                    ("entity_type", entity_types::DISORDER),
                                    ("entity_id", disorder_entity_id(&patient_id, &concept_id).as_str()),
                                    ("patient_id", patient_id.as_str()),
                                    ("concept_id", concept_id.as_str()),
                                    ("first_admission_id", admission_id.as_str()),
                                ]),
                            )
                            .map_err(g)?;
                        self.graph
                            .add_edge(edge_types::CODED_AS, entity, concept, Properties::new())
                            .map_err(g)?;
                        disorders.insert((patient, concept_id), entity);
                    }
                }
            }
        }

        let mut treated_by: HashMap<&str, Vec<&str>> = HashMap::new();
        for (activity, concept_id) in &treats.rows {
            if let Some((class, concept)) = self
                .mapping_ends(&mut report, 13, MappingKind::ActivityTreats, activity, concept_id)
                .map_err(at)?
            {
                self.graph
                    .add_edge(edge_types::TREATS, class, concept, Properties::new())
                    .map_err(g)?;
                treated_by.entry(activity.as_str()).or_default().push(concept_id.as_str());
            }
        }

        for event in self.graph.match_nodes(labels::EVENT, &[]) {
            let node = self.graph.node(event).expect("indexed node exists");
            let Some(concepts) = node.text("activity").and_then(|a| treated_by.get(a)) else {
                continue;
            };
            let patient = self
                .graph
                .adjacent(event, edge_types::CORR, Direction::Out)
                .map_err(g)?
                .into_iter()
                .map(|(_, n)| n)
                .find(|n| {
                    self.graph.node(*n).and_then(|n| n.text("entity_type")) == Some(entity_types::PATIENT)
                });
            let Some(patient) = patient else { continue };
            for concept_id in concepts.clone() {
                if let Some(disorder) = disorders.get(&(patient, concept_id.to_owned())) {
                    self.graph
                        .add_edge(edge_types::CORR, event, *disorder, Properties::new())
                        .map_err(g)?;
                }
            }
        }
        self.graph.set_metadata(meta::DISORDERS_REIFIED, "true").map_err(g)?;
        report.recount(&self.graph);
        Ok(report)
    }

    /// Step 14: per entity, DF edges between consecutive correlated events
    /// ordered by (timestamp, event_id).
    pub fn compute_df(&mut self) -> Result<BuildReport, BuildError> {
        let at = |source: ConstructError| BuildError { step: 14, source };
        let g = |e: GraphError| at(e.into());
        if self.graph.edges_of_type(edge_types::DF).next().is_some()
            || self.graph.metadata().contains_key(meta::DF_ENTITY_TYPES)
        {
            return Err(at(ConstructError::DfAlreadyComputed));
        }
        let mut available: Vec<String> = vec![entity_types::PATIENT.into(), entity_types::ADMISSION.into()];
        if self.graph.metadata().contains_key(meta::DISORDERS_REIFIED) {
            available.push(entity_types::DISORDER.into());
        }
        let selected: BTreeSet<String> = match &self.config.df_entity_types {
            Some(types) => {
                if let Some(bad) = types.iter().find(|t| !available.contains(t)) {
                    return Err(at(ConstructError::InvalidDfEntityType {
                        entity_type: bad.clone(),
                        available,
                    }));
                }
                types.clone()
            }
            None => available.into_iter().collect(),
        };

        for entity in self.graph.match_nodes(labels::ENTITY, &[]) {
            let node = self.graph.node(entity).expect("indexed node exists");
            let entity_type = node.text("entity_type").unwrap_or_default().to_owned();
            if !selected.contains(&entity_type) {
                continue;
            }
            let entity_id = node.text("entity_id").unwrap_or_default().to_owned();
            let mut events: Vec<(DateTime<Utc>, &str, NodeId)> = self
                .graph
                .adjacent(entity, edge_types::CORR, Direction::In)
                .map_err(g)?
                .into_iter()
                .filter_map(|(_, e)| {
                    let n = self.graph.node(e)?;
                    Some((n.get("timestamp")?.as_timestamp()?, n.text("event_id")?, e))
                })
                .collect();
            events.sort();
            let pairs: Vec<(NodeId, NodeId)> = events.windows(2).map(|w| (w[0].2, w[1].2)).collect();
            for (from, to) in pairs {
                self.graph
                    .add_edge(
                        edge_types::DF,
                        from,
                        to,
                        props([("entity_type", entity_type.as_str()), ("entity_id", entity_id.as_str())]),
                    )
                    .map_err(g)?;
            }
        }
        let joined = selected.into_iter().collect::<Vec<_>>().join(",");
        self.graph.set_metadata(meta::DF_ENTITY_TYPES, joined).map_err(g)?;
        let mut report = BuildReport::default();
        report.recount(&self.graph);
        Ok(report)
    }
}

/// Runs steps 1-14 in order and freezes the graph.
pub fn build_all(inputs: &BuildInputs, config: &BuildConfig) -> Result<(PropertyGraph, BuildReport), BuildError> {
    let mut builder = CekgBuilder::new(config);
    let mut report = BuildReport::default();
    let mut absorb = |fragment: BuildReport| {
        report.warnings.extend(fragment.warnings);
        report.unlinked_activities.extend(fragment.unlinked_activities);
        report.activities_without_domain.extend(fragment.activities_without_domain);
        report.unlinked_icd_codes.extend(fragment.unlinked_icd_codes);
    };
    log::info!("steps 1-3: events, entities and entity attributes");
    absorb(builder.build_events_and_entities(&inputs.events, &inputs.attributes)?);
    log::info!("step 4: activity classes");
    absorb(builder.build_activity_classes()?);
    log::info!("step 5: activity domains");
    absorb(builder.build_domains(&inputs.mappings.activity_domain)?);
    log::info!("steps 6-8: ICD-10 and SNOMED-CT terminology");
    absorb(builder.build_terminology_graph(&inputs.terminology)?);
    log::info!("steps 9-12: linking diagnoses, ICD codes, activities and domains to terminology");
    absorb(builder.link_terminology(&inputs.diagnoses, &inputs.mappings)?);
    log::info!("step 13: reifying disorders");
    absorb(builder.reify_disorders(&inputs.mappings.activity_treats)?);
    log::info!("step 14: directly-follows relations");
    absorb(builder.compute_df()?);

    let mut graph = builder.into_graph();
    graph.freeze();
    for list in [
        &mut report.unlinked_activities,
        &mut report.activities_without_domain,
        &mut report.unlinked_icd_codes,
    ] {
        list.sort();
        list.dedup();
    }
    report.recount(&graph);
    Ok((graph, report))
}
