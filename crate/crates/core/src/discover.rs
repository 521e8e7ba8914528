//! Care-pathway discovery over a finished knowledge graph.
//!
//! | variant | operation | scope |
//! |---------|-----------|-------|
//! | C1 | [`instance_pathways`] with `combined = false` | one event-level graph per patient |
//! | C2 | [`instance_pathways`] with `combined = true` | one merged event-level graph |
//! | C3 | [`aggregate_pathway`] | class-level DF frequencies for a patient or patient set |
//! | C4 | [`aggregate_pathway`] with `per_disorder = true` | C3 over Disorder DF edges, split by disorder concept |
//! | C5 | [`aggregate_pathway`] with a same-multimorbidity cohort | C3 for patients sharing one disorder set |
//! | C6 | [`admission_disorder_status`], [`status_pathway`] | treated / untreated / newly discovered per admission |
//!
//! Every operation only reads the graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::construct::{entity_types, meta};
use crate::export::StyleMap;
use crate::graph::{edge_types, labels, Direction, NodeId, PropertyGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Variant {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
}

impl Variant {
    pub const ALL: [Variant; 6] = [Variant::C1, Variant::C2, Variant::C3, Variant::C4, Variant::C5, Variant::C6];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown pathway variant {s:?} (expected C1-C6)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Event,
    Class,
    Entity,
    Annotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Df,
    Corr,
    Status,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PathwayNode {
    pub key: String,
    pub label: String,
    pub kind: NodeKind,
    /// Entity type for entity nodes, domain name for event and class nodes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PathwayEdge {
    pub source: String,
    pub target: String,
    pub kind: EdgeKind,
    pub weight: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entity_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concept_id: Option<String>,
    /// DF edges: the entity id. Status edges: the rendered status.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl PathwayEdge {
    fn sort_key(&self) -> (&str, &str, Option<&str>, EdgeKind, Option<&str>, Option<&str>) {
        (
            &self.source,
            &self.target,
            self.concept_id.as_deref(),
            self.kind,
            self.entity_type.as_deref(),
            self.label.as_deref(),
        )
    }
}

/// A discovered care pathway. Nodes are sorted by key and edges by
/// (source, target, concept id).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathwayGraph {
    pub variant: Variant,
    pub title: String,
    pub nodes: Vec<PathwayNode>,
    pub edges: Vec<PathwayEdge>,
}

impl PathwayGraph {
    fn new(variant: Variant, title: impl Into<String>) -> Self {
        PathwayGraph {
            variant,
            title: title.into(),
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    fn finish(mut self) -> Self {
        self.nodes.sort_by(|a, b| a.key.cmp(&b.key));
        self.nodes.dedup_by(|a, b| a.key == b.key);
        self.edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        self
    }

    pub fn node(&self, key: &str) -> Option<&PathwayNode> {
        self.nodes
            .binary_search_by(|n| n.key.as_str().cmp(key))
            .ok()
            .map(|i| &self.nodes[i])
    }

    /// Edges by descending weight, ties in key order.
    pub fn ranked_edges(&self) -> Vec<&PathwayEdge> {
        let mut ranked: Vec<&PathwayEdge> = self.edges.iter().collect();
        ranked.sort_by(|a, b| b.weight.cmp(&a.weight).then_with(|| a.sort_key().cmp(&b.sort_key())));
        ranked
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("pathway serializes");
        text.push('\n');
        text
    }
}

/// Which patients a discovery operation covers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CohortSelector {
    /// Every patient in the graph.
    All,
    SinglePatient(String),
    PatientSet(BTreeSet<String>),
    /// Patients whose set of disorder concept ids equals this set exactly.
    SameMultimorbidity(BTreeSet<String>),
}

impl CohortSelector {
    pub fn patients<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        CohortSelector::PatientSet(ids.into_iter().map(Into::into).collect())
    }

    pub fn multimorbidity<S: Into<String>>(concepts: impl IntoIterator<Item = S>) -> Self {
        CohortSelector::SameMultimorbidity(concepts.into_iter().map(Into::into).collect())
    }
}

/// One (patient, admission, disorder) row of the C6 table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DisorderStatus {
    pub patient_id: String,
    pub admission_id: String,
    pub concept_id: String,
    pub newly_discovered: bool,
    pub treated: bool,
}

impl DisorderStatus {
    pub fn label(&self) -> String {
        let care = if self.treated { "treated" } else { "untreated" };
        if self.newly_discovered {
            format!("new, {care}")
        } else {
            care.to_owned()
        }
    }
}

/// Rows are grouped by patient (ascending id), then admissions in
/// chronological order, then concept id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DisorderStatusReport {
    pub rows: Vec<DisorderStatus>,
}

impl DisorderStatusReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiscoverError {
    #[error("unknown patient {0:?}")]
    UnknownPatient(String),
    #[error("no activity class with label {0:?}")]
    UnknownClass(String),
    #[error("no DF edges were computed for entity type {0:?}")]
    EntityTypeWithoutDf(String),
    #[error("per-disorder aggregation requires entity type \"Disorder\", got {0:?}")]
    PerDisorderRequiresDisorderType(String),
    #[error("disorders were not reified in this graph")]
    DisordersNotReified,
    #[error("the graph has no DF layer; run construction to completion first")]
    GraphNotFinished,
}

struct EventInfo {
    node: NodeId,
    event_id: String,
    timestamp: Option<DateTime<Utc>>,
    class: Option<NodeId>,
    patient: Option<String>,
}

/// Lookup tables derived from one scan of the graph.
struct View<'g> {
    graph: &'g PropertyGraph,
    style: StyleMap,
    events: HashMap<NodeId, EventInfo>,
    /// entity node → (entity_type, entity_id, patient_id)
    entities: BTreeMap<NodeId, (String, String, String)>,
    patients: BTreeSet<String>,
    class_domain: HashMap<NodeId, String>,
}

impl<'g> View<'g> {
    fn new(graph: &'g PropertyGraph) -> Self {
        let mut entities = BTreeMap::new();
        let mut patients = BTreeSet::new();
        for id in graph.match_nodes(labels::ENTITY, &[]) {
            let node = graph.node(id).expect("indexed node exists");
            let entity_type = node.text("entity_type").unwrap_or_default().to_owned();
            let entity_id = node.text("entity_id").unwrap_or_default().to_owned();
            let patient = if entity_type == entity_types::PATIENT {
                patients.insert(entity_id.clone());
                entity_id.clone()
            } else {
                node.text("patient_id").unwrap_or_default().to_owned()
            };
            entities.insert(id, (entity_type, entity_id, patient));
        }
        let mut events = HashMap::new();
        for id in graph.match_nodes(labels::EVENT, &[]) {
            let node = graph.node(id).expect("indexed node exists");
            let class = graph
                .adjacent(id, edge_types::OBSERVED, Direction::Out)
                .ok()
                .and_then(|v| v.first().map(|(_, c)| *c));
            let patient = graph
                .adjacent(id, edge_types::CORR, Direction::Out)
                .ok()
                .into_iter()
                .flatten()
                .find_map(|(_, n)| match entities.get(&n) {
                    Some((t, eid, _)) if t == entity_types::PATIENT => Some(eid.clone()),
                    _ => None,
                });
            events.insert(
                id,
                EventInfo {
                    node: id,
                    event_id: node.text("event_id").unwrap_or_default().to_owned(),
                    timestamp: node.get("timestamp").and_then(|v| v.as_timestamp()),
                    class,
                    patient,
                },
            );
        }
        let mut class_domain = HashMap::new();
        for edge in graph.edges_of_type(edge_types::HAS_DOMAIN) {
            if let Some(name) = graph.node(edge.target).and_then(|n| n.text("name")) {
                class_domain.insert(edge.source, name.to_owned());
            }
        }
        View {
            graph,
            style: StyleMap::for_graph(graph),
            events,
            entities,
            patients,
            class_domain,
        }
    }

    fn df_types(&self) -> Option<BTreeSet<String>> {
        self.graph
            .metadata()
            .get(meta::DF_ENTITY_TYPES)
            .map(|s| s.split(',').filter(|t| !t.is_empty()).map(str::to_owned).collect())
    }

    fn reified(&self) -> bool {
        self.graph.metadata().contains_key(meta::DISORDERS_REIFIED)
    }

    /// Disorder concept ids per patient.
    fn multimorbidity(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut sets: BTreeMap<&str, BTreeSet<&str>> =
            self.patients.iter().map(|p| (p.as_str(), BTreeSet::new())).collect();
        for (id, (entity_type, _, patient)) in &self.entities {
            if entity_type == entity_types::DISORDER {
                if let Some(concept) = self.graph.node(*id).and_then(|n| n.text("concept_id")) {
                    sets.entry(patient.as_str()).or_default().insert(concept);
                }
            }
        }
        sets
    }

    fn resolve(&self, selector: &CohortSelector) -> Result<BTreeSet<String>, DiscoverError> {
        let check = |p: &String| {
            if self.patients.contains(p) {
                Ok(p.clone())
            } else {
                Err(DiscoverError::UnknownPatient(p.clone()))
            }
        };
        match selector {
            CohortSelector::All => Ok(self.patients.clone()),
            CohortSelector::SinglePatient(p) => Ok(BTreeSet::from([check(p)?])),
            CohortSelector::PatientSet(set) => set.iter().map(check).collect(),
            CohortSelector::SameMultimorbidity(concepts) => {
                if !self.reified() {
                    return Err(DiscoverError::DisordersNotReified);
                }
                let wanted: BTreeSet<&str> = concepts.iter().map(String::as_str).collect();
                Ok(self
                    .multimorbidity()
                    .into_iter()
                    .filter(|(_, set)| *set == wanted)
                    .map(|(p, _)| p.to_owned())
                    .collect())
            }
        }
    }

    fn class_display(&self, class: Option<NodeId>) -> String {
        class
            .and_then(|c| self.graph.node(c))
            .and_then(|n| n.text("display").or_else(|| n.text("activity")))
            .unwrap_or("?")
            .to_owned()
    }

    fn class_key(&self, class: NodeId) -> String {
        let activity = self.graph.node(class).and_then(|n| n.text("activity")).unwrap_or_default();
        format!("cls:{activity}")
    }

    fn entity_node(&self, id: NodeId) -> PathwayNode {
        let (entity_type, entity_id, _) = &self.entities[&id];
        let label = if entity_type == entity_types::DISORDER {
            let node = self.graph.node(id).expect("entity exists");
            let concept = node.text("concept_id").unwrap_or_default();
            let fsn = self
                .graph
                .adjacent(id, edge_types::CODED_AS, Direction::Out)
                .ok()
                .and_then(|v| v.first().copied())
                .and_then(|(_, c)| self.graph.node(c)?.text("fsn"));
            match fsn {
                Some(fsn) => format!("{fsn} [{concept}]"),
                None => concept.to_owned(),
            }
        } else {
            entity_id.clone()
        };
        PathwayNode {
            key: format!("ent:{entity_type}:{entity_id}"),
            label,
            kind: NodeKind::Entity,
            group: Some(entity_type.clone()),
            color: self.style.entity_color(entity_type).map(str::to_owned),
        }
    }

    fn event_node(&self, info: &EventInfo) -> PathwayNode {
        let domain = info.class.and_then(|c| self.class_domain.get(&c)).cloned();
        PathwayNode {
            key: format!("evt:{}", info.event_id),
            label: format!("{} ({})", self.class_display(info.class), info.event_id),
            kind: NodeKind::Event,
            color: domain.as_deref().and_then(|d| self.style.domain_color(d)).map(str::to_owned),
            group: domain,
        }
    }

    fn class_node(&self, class: NodeId) -> PathwayNode {
        let domain = self.class_domain.get(&class).cloned();
        PathwayNode {
            key: self.class_key(class),
            label: self.class_display(Some(class)),
            kind: NodeKind::Class,
            color: domain.as_deref().and_then(|d| self.style.domain_color(d)).map(str::to_owned),
            group: domain,
        }
    }

    fn event_key(&self, node: NodeId) -> String {
        format!("evt:{}", self.events[&node].event_id)
    }

    fn entity_key(&self, node: NodeId) -> String {
        let (t, id, _) = &self.entities[&node];
        format!("ent:{t}:{id}")
    }

    /// Event-level graph over the given patients.
    fn instance_graph(&self, variant: Variant, title: String, patients: &BTreeSet<String>) -> PathwayGraph {
        let mut graph = PathwayGraph::new(variant, title);
        for (id, (_, _, patient)) in &self.entities {
            if patients.contains(patient) {
                graph.nodes.push(self.entity_node(*id));
            }
        }
        let mut included: Vec<&EventInfo> = self
            .events
            .values()
            .filter(|e| e.patient.as_ref().is_some_and(|p| patients.contains(p)))
            .collect();
        included.sort_by_key(|e| e.node);
        for info in included {
            graph.nodes.push(self.event_node(info));
            let key = self.event_key(info.node);
            for (_, entity) in self.graph.adjacent(info.node, edge_types::CORR, Direction::Out).unwrap_or_default() {
                if !self.entities.contains_key(&entity) {
                    continue;
                }
                graph.edges.push(PathwayEdge {
                    source: key.clone(),
                    target: self.entity_key(entity),
                    kind: EdgeKind::Corr,
                    weight: 1,
                    entity_type: Some(self.entities[&entity].0.clone()),
                    concept_id: None,
                    label: None,
                });
            }
            for (edge, next) in self.graph.adjacent(info.node, edge_types::DF, Direction::Out).unwrap_or_default() {
                let edge = self.graph.edge(edge).expect("adjacent edge exists");
                graph.edges.push(PathwayEdge {
                    source: key.clone(),
                    target: self.event_key(next),
                    kind: EdgeKind::Df,
                    weight: 1,
                    entity_type: edge.text("entity_type").map(str::to_owned),
                    concept_id: None,
                    label: edge.text("entity_id").map(str::to_owned),
                });
            }
        }
        graph.finish()
    }

    /// Concept id of a Disorder entity, looked up by entity id.
    fn disorder_concepts(&self) -> HashMap<&str, &str> {
        self.entities
            .iter()
            .filter(|(_, (t, _, _))| t == entity_types::DISORDER)
            .filter_map(|(id, (_, eid, _))| Some((eid.as_str(), self.graph.node(*id)?.text("concept_id")?)))
            .collect()
    }
}

fn require_finished(view: &View<'_>) -> Result<BTreeSet<String>, DiscoverError> {
    view.df_types().ok_or(DiscoverError::GraphNotFinished)
}

fn selector_title(selector: &CohortSelector) -> String {
    match selector {
        CohortSelector::All => "all patients".to_owned(),
        CohortSelector::SinglePatient(p) => format!("patient {p}"),
        CohortSelector::PatientSet(set) => format!("patients {}", set.iter().cloned().collect::<Vec<_>>().join(", ")),
        CohortSelector::SameMultimorbidity(set) => {
            format!("multimorbidity {{{}}}", set.iter().cloned().collect::<Vec<_>>().join(", "))
        }
    }
}

/// C1 (`combined = false`, one graph per selected patient) or C2
/// (`combined = true`, a single graph). Event nodes keep their identity;
/// nothing is aggregated.
pub fn instance_pathways(
    graph: &PropertyGraph,
    selector: &CohortSelector,
    combined: bool,
) -> Result<Vec<PathwayGraph>, DiscoverError> {
    let view = View::new(graph);
    require_finished(&view)?;
    let patients = view.resolve(selector)?;
    if combined {
        Ok(vec![view.instance_graph(Variant::C2, selector_title(selector), &patients)])
    } else {
        Ok(patients
            .iter()
            .map(|p| view.instance_graph(Variant::C1, format!("patient {p}"), &BTreeSet::from([p.clone()])))
            .collect())
    }
}

/// Class-level directly-follows frequencies (C3, C4, C5).
///
/// Each edge weight counts the event-level DF edges of `entity_type` whose
/// endpoints' classes are the edge's endpoints, restricted to the selected
/// patients. With `per_disorder`, edges are additionally split by the
/// disorder concept of the DF edge's entity.
pub fn aggregate_pathway(
    graph: &PropertyGraph,
    selector: &CohortSelector,
    entity_type: &str,
    per_disorder: bool,
) -> Result<PathwayGraph, DiscoverError> {
    if per_disorder && entity_type != entity_types::DISORDER {
        return Err(DiscoverError::PerDisorderRequiresDisorderType(entity_type.to_owned()));
    }
    let view = View::new(graph);
    if !require_finished(&view)?.contains(entity_type) {
        return Err(DiscoverError::EntityTypeWithoutDf(entity_type.to_owned()));
    }
    let patients = view.resolve(selector)?;
    let variant = if per_disorder {
        Variant::C4
    } else if matches!(selector, CohortSelector::SameMultimorbidity(_)) {
        Variant::C5
    } else {
        Variant::C3
    };
    let mut pathway = PathwayGraph::new(variant, format!("{entity_type} DF, {}", selector_title(selector)));

    let mut classes = BTreeSet::new();
    for info in view.events.values() {
        if info.patient.as_ref().is_some_and(|p| patients.contains(p)) {
            classes.extend(info.class);
        }
    }
    pathway.nodes = classes.iter().map(|c| view.class_node(*c)).collect();

    let concepts = if per_disorder { view.disorder_concepts() } else { HashMap::new() };
    let mut weights: BTreeMap<(NodeId, NodeId, Option<&str>), u64> = BTreeMap::new();
    for edge in graph.edges_of_type(edge_types::DF) {
        if edge.text("entity_type") != Some(entity_type) {
            continue;
        }
        let (Some(src), Some(dst)) = (view.events.get(&edge.source), view.events.get(&edge.target)) else {
            continue;
        };
        if !src.patient.as_ref().is_some_and(|p| patients.contains(p)) {
            continue;
        }
        let (Some(a), Some(b)) = (src.class, dst.class) else { continue };
        let concept = if per_disorder {
            edge.text("entity_id").and_then(|id| concepts.get(id).copied())
        } else {
            None
        };
        *weights.entry((a, b, concept)).or_insert(0) += 1;
    }
    pathway.edges = weights
        .into_iter()
        .map(|((a, b, concept), weight)| PathwayEdge {
            source: view.class_key(a),
            target: view.class_key(b),
            kind: EdgeKind::Df,
            weight,
            entity_type: Some(entity_type.to_owned()),
            concept_id: concept.map(str::to_owned),
            label: None,
        })
        .collect();
    Ok(pathway.finish())
}

/// How often `class_b` directly follows `class_a` for one entity type
/// within the scope. Classes are matched by raw activity or display label.
pub fn df_count(
    graph: &PropertyGraph,
    class_a: &str,
    class_b: &str,
    entity_type: &str,
    scope: &CohortSelector,
) -> Result<u64, DiscoverError> {
    let keys = |label: &str| -> Result<BTreeSet<String>, DiscoverError> {
        let found: BTreeSet<String> = graph
            .match_nodes(labels::CLASS, &[])
            .into_iter()
            .filter_map(|c| graph.node(c))
            .filter(|n| n.text("activity") == Some(label) || n.text("display") == Some(label))
            .map(|n| format!("cls:{}", n.text("activity").unwrap_or_default()))
            .collect();
        if found.is_empty() {
            Err(DiscoverError::UnknownClass(label.to_owned()))
        } else {
            Ok(found)
        }
    };
    let (from, to) = (keys(class_a)?, keys(class_b)?);
    let pathway = aggregate_pathway(graph, scope, entity_type, false)?;
    Ok(pathway
        .edges
        .iter()
        .filter(|e| from.contains(&e.source) && to.contains(&e.target))
        .map(|e| e.weight)
        .sum())
}

type Stamped<'a> = (Option<DateTime<Utc>>, &'a str, NodeId);

/// C6 table: for each admission, every disorder diagnosed in it or in an
/// earlier admission of the same patient, flagged as newly discovered
/// and/or treated.
pub fn admission_disorder_status(graph: &PropertyGraph) -> Result<DisorderStatusReport, DiscoverError> {
    let view = View::new(graph);
    if !view.reified() {
        return Err(DiscoverError::DisordersNotReified);
    }
    // (patient, concept) → disorder entity node
    let mut disorder_nodes: HashMap<(&str, &str), NodeId> = HashMap::new();
    for (id, (t, _, patient)) in &view.entities {
        if t == entity_types::DISORDER {
            if let Some(concept) = graph.node(*id).and_then(|n| n.text("concept_id")) {
                disorder_nodes.insert((patient.as_str(), concept), *id);
            }
        }
    }
    let mut admissions: BTreeMap<&str, Vec<Stamped<'_>>> = BTreeMap::new();
    for (id, (t, admission_id, patient)) in &view.entities {
        if t != entity_types::ADMISSION {
            continue;
        }
        let first = graph
            .adjacent(*id, edge_types::CORR, Direction::In)
            .unwrap_or_default()
            .into_iter()
            .filter_map(|(_, e)| view.events.get(&e)?.timestamp)
            .min();
        admissions.entry(patient.as_str()).or_default().push((first, admission_id.as_str(), *id));
    }

    let mut report = DisorderStatusReport::default();
    for (patient, mut list) in admissions {
        list.sort();
        let mut known: BTreeSet<&str> = BTreeSet::new();
        for (_, admission_id, admission) in list {
            let diagnosed: BTreeSet<&str> = graph
                .adjacent(admission, edge_types::DIAGNOSED_AS, Direction::Out)
                .unwrap_or_default()
                .into_iter()
                .flat_map(|(_, code)| graph.adjacent(code, edge_types::MAPS_TO, Direction::Out).unwrap_or_default())
                .filter_map(|(_, concept)| graph.node(concept)?.text("concept_id"))
                .collect();
            let admission_events: BTreeSet<NodeId> = graph
                .adjacent(admission, edge_types::CORR, Direction::In)
                .unwrap_or_default()
                .into_iter()
                .map(|(_, e)| e)
                .collect();
            let newly: BTreeSet<&str> = diagnosed.difference(&known).copied().collect();
            known.extend(diagnosed);
            for concept in &known {
                let treated = disorder_nodes.get(&(patient, *concept)).is_some_and(|d| {
                    graph
                        .adjacent(*d, edge_types::CORR, Direction::In)
                        .unwrap_or_default()
                        .iter()
                        .any(|(_, e)| admission_events.contains(e))
                });
                report.rows.push(DisorderStatus {
                    patient_id: patient.to_owned(),
                    admission_id: admission_id.to_owned(),
                    concept_id: (*concept).to_owned(),
                    newly_discovered: newly.contains(concept),
                    treated,
                });
            }
        }
    }
    Ok(report)
}

/// C6 as a graph: the C2 graph of all patients plus one status edge from
/// each admission to each disorder row of [`admission_disorder_status`].
pub fn status_pathway(graph: &PropertyGraph) -> Result<PathwayGraph, DiscoverError> {
    let report = admission_disorder_status(graph)?;
    let view = View::new(graph);
    require_finished(&view)?;
    let mut pathway = view.instance_graph(Variant::C6, "disorder status per admission".to_owned(), &view.patients);
    for row in &report.rows {
        pathway.edges.push(PathwayEdge {
            source: format!("ent:{}:{}", entity_types::ADMISSION, row.admission_id),
            target: format!(
                "ent:{}:{}",
                entity_types::DISORDER,
                crate::construct::disorder_entity_id(&row.patient_id, &row.concept_id)
            ),
            kind: EdgeKind::Status,
            weight: 1,
            entity_type: None,
            concept_id: Some(row.concept_id.clone()),
            label: Some(row.label()),
        });
    }
    Ok(pathway.finish())
}
