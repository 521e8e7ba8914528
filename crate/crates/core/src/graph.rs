//! Embedded labeled property graph.
//!
//! The store is append-only: nodes and edges receive dense sequential ids
//! starting at 0 and are never removed individually. [`PropertyGraph::reset`]
//! clears everything and starts a fresh session. All collections are kept in
//! insertion order (or in `BTreeMap`s) so that two identical build sessions
//! produce identical graphs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::{DateTime, SubsecRound, Utc};
use thiserror::Error;

/// Node labels of the clinical event knowledge graph vocabulary.
pub mod labels {
    pub const EVENT: &str = "Event";
    pub const ENTITY: &str = "Entity";
    pub const CLASS: &str = "Class";
    pub const DOMAIN: &str = "Domain";
    pub const ICD_CODE: &str = "ICDCode";
    pub const SNOMED_CONCEPT: &str = "SNOMEDConcept";
    pub const ATTRIBUTE_VALUE: &str = "AttributeValue";

    pub const ALL: [&str; 7] = [
        EVENT,
        ENTITY,
        CLASS,
        DOMAIN,
        ICD_CODE,
        SNOMED_CONCEPT,
        ATTRIBUTE_VALUE,
    ];
}

/// Edge types of the clinical event knowledge graph vocabulary.
pub mod edge_types {
    pub const CORR: &str = "CORR";
    pub const DF: &str = "DF";
    pub const OBSERVED: &str = "OBSERVED";
    pub const HAS_ATTRIBUTE: &str = "HAS_ATTRIBUTE";
    pub const HAS_DOMAIN: &str = "HAS_DOMAIN";
    pub const DIAGNOSED_AS: &str = "DIAGNOSED_AS";
    pub const MAPS_TO: &str = "MAPS_TO";
    pub const CODED_AS: &str = "CODED_AS";
    pub const SCT_REL: &str = "SCT_REL";
    pub const TREATS: &str = "TREATS";

    pub const ALL: [&str; 10] = [
        CORR,
        DF,
        OBSERVED,
        HAS_ATTRIBUTE,
        HAS_DOMAIN,
        DIAGNOSED_AS,
        MAPS_TO,
        CODED_AS,
        SCT_REL,
        TREATS,
    ];
}

/// Property keys maintained in the property index.
pub const INDEXED_KEYS: [&str; 5] = ["event_id", "entity_id", "concept_id", "icd_code", "activity"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// A property value. Timestamps are UTC with millisecond precision.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyValue {
    Text(String),
    Integer(i64),
    Decimal(f64),
    Boolean(bool),
    Timestamp(DateTime<Utc>),
}

impl PropertyValue {
    /// Builds a timestamp value, truncating to millisecond precision.
    pub fn timestamp(ts: DateTime<Utc>) -> Self {
        PropertyValue::Timestamp(ts.trunc_subsecs(3))
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            PropertyValue::Integer(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            PropertyValue::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_timestamp(&self) -> Option<DateTime<Utc>> {
        match self {
            PropertyValue::Timestamp(t) => Some(*t),
            _ => None,
        }
    }

    /// Short name of the value's type, as used by the exporters.
    pub fn type_name(&self) -> &'static str {
        match self {
            PropertyValue::Text(_) => "text",
            PropertyValue::Integer(_) => "integer",
            PropertyValue::Decimal(_) => "decimal",
            PropertyValue::Boolean(_) => "boolean",
            PropertyValue::Timestamp(_) => "timestamp",
        }
    }
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Text(s) => f.write_str(s),
            PropertyValue::Integer(i) => write!(f, "{i}"),
            PropertyValue::Decimal(d) => write!(f, "{d}"),
            PropertyValue::Boolean(b) => write!(f, "{b}"),
            PropertyValue::Timestamp(t) => {
                write!(f, "{}", t.to_rfc3339_opts(chrono::SecondsFormat::Millis, true))
            }
        }
    }
}

impl From<&str> for PropertyValue {
    fn from(s: &str) -> Self {
        PropertyValue::Text(s.to_owned())
    }
}

impl From<String> for PropertyValue {
    fn from(s: String) -> Self {
        PropertyValue::Text(s)
    }
}

impl From<i64> for PropertyValue {
    fn from(i: i64) -> Self {
        PropertyValue::Integer(i)
    }
}

impl From<f64> for PropertyValue {
    fn from(d: f64) -> Self {
        PropertyValue::Decimal(d)
    }
}

impl From<bool> for PropertyValue {
    fn from(b: bool) -> Self {
        PropertyValue::Boolean(b)
    }
}

impl From<DateTime<Utc>> for PropertyValue {
    fn from(t: DateTime<Utc>) -> Self {
        PropertyValue::timestamp(t)
    }
}

pub type Properties = BTreeMap<String, PropertyValue>;

/// Builds a property map from `(key, value)` pairs.
pub fn props<K, V, I>(pairs: I) -> Properties
where
    K: Into<String>,
    V: Into<PropertyValue>,
    I: IntoIterator<Item = (K, V)>,
{
    pairs
        .into_iter()
        .map(|(k, v)| (k.into(), v.into()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub labels: BTreeSet<String>,
    pub properties: Properties,
}

impl Node {
    pub fn has_label(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn get(&self, key: &str) -> Option<&PropertyValue> {
        self.properties.get(key)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(PropertyValue::as_text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub edge_type: String,
    pub source: NodeId,
    pub target: NodeId,
    pub properties: Properties,
}

impl Edge {
    pub fn get(&self, key: &str) -> Option<&PropertyValue> {
        self.properties.get(key)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(PropertyValue::as_text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("a node needs at least one label")]
    EmptyLabelSet,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("graph is frozen; no further mutation allowed")]
    Frozen,
}

/// Inconsistency found by [`PropertyGraph::audit`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuditError {
    #[error("label index for {label:?} disagrees with a full scan")]
    LabelIndex { label: String },
    #[error("property index for {key:?}={value:?} disagrees with a full scan")]
    PropertyIndex { key: String, value: String },
    #[error("edge {edge} has a dangling endpoint")]
    DanglingEdge { edge: EdgeId },
    #[error("adjacency list of {node} disagrees with the edge list")]
    Adjacency { node: NodeId },
    #[error("node {node} has no labels")]
    Unlabeled { node: NodeId },
    #[error("id of element at position {position} is out of sequence")]
    IdSequence { position: usize },
}

/// In-memory labeled property graph with label and property indexes.
#[derive(Debug, Clone, Default)]
pub struct PropertyGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    label_index: BTreeMap<String, Vec<NodeId>>,
    property_index: HashMap<&'static str, HashMap<String, Vec<NodeId>>>,
    metadata: BTreeMap<String, String>,
    frozen: bool,
}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops every node, edge and metadata entry. Ids restart at 0.
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    /// Marks the graph read-only. Later mutations fail with [`GraphError::Frozen`].
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.index())
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(id.index())
    }

    /// Graph-level key/value annotations (for example, which entity types
    /// carry directly-follows edges).
    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) -> Result<(), GraphError> {
        self.check_mutable()?;
        self.metadata.insert(key.into(), value.into());
        Ok(())
    }

    fn check_mutable(&self) -> Result<(), GraphError> {
        if self.frozen {
            Err(GraphError::Frozen)
        } else {
            Ok(())
        }
    }

    pub fn add_node<L, S>(&mut self, labels: L, properties: Properties) -> Result<NodeId, GraphError>
    where
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.check_mutable()?;
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(GraphError::EmptyLabelSet);
        }
        let id = NodeId(self.nodes.len() as u32);
        for label in &labels {
            self.label_index.entry(label.clone()).or_default().push(id);
        }
        for (key, value) in &properties {
            self.index_property(key, value, id);
        }
        self.nodes.push(Node {
            id,
            labels,
            properties,
        });
        self.out_edges.push(Vec::new());
        self.in_edges.push(Vec::new());
        Ok(id)
    }

    /// Sets (or replaces) one property of an existing node, keeping the
    /// property index in sync.
    pub fn set_node_property(
        &mut self,
        node: NodeId,
        key: &str,
        value: PropertyValue,
    ) -> Result<(), GraphError> {
        self.check_mutable()?;
        if self.node(node).is_none() {
            return Err(GraphError::UnknownNode(node));
        }
        if let Some(old) = self.nodes[node.index()].properties.get(key).cloned() {
            self.unindex_property(key, &old, node);
        }
        self.index_property(key, &value, node);
        self.nodes[node.index()].properties.insert(key.to_owned(), value);
        Ok(())
    }

    pub fn add_edge(
        &mut self,
        edge_type: impl Into<String>,
        source: NodeId,
        target: NodeId,
        properties: Properties,
    ) -> Result<EdgeId, GraphError> {
        self.check_mutable()?;
        for endpoint in [source, target] {
            if self.node(endpoint).is_none() {
                return Err(GraphError::UnknownNode(endpoint));
            }
        }
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push(Edge {
            id,
            edge_type: edge_type.into(),
            source,
            target,
            properties,
        });
        self.out_edges[source.index()].push(id);
        self.in_edges[target.index()].push(id);
        Ok(id)
    }

    fn indexed_key(key: &str) -> Option<&'static str> {
        INDEXED_KEYS.iter().copied().find(|k| *k == key)
    }

    fn index_property(&mut self, key: &str, value: &PropertyValue, id: NodeId) {
        if let (Some(key), Some(text)) = (Self::indexed_key(key), value.as_text()) {
            let ids = self
                .property_index
                .entry(key)
                .or_default()
                .entry(text.to_owned())
                .or_default();
            // ids arrive in ascending order except after set_node_property
            match ids.binary_search(&id) {
                Ok(_) => {}
                Err(pos) => ids.insert(pos, id),
            }
        }
    }

    fn unindex_property(&mut self, key: &str, value: &PropertyValue, id: NodeId) {
        if let (Some(key), Some(text)) = (Self::indexed_key(key), value.as_text()) {
            if let Some(ids) = self.property_index.get_mut(key).and_then(|m| m.get_mut(text)) {
                ids.retain(|n| *n != id);
            }
        }
    }

    /// Nodes carrying `label` whose properties equal every entry of
    /// `predicate`, in ascending id order.
    pub fn match_nodes(&self, label: &str, predicate: &[(&str, PropertyValue)]) -> Vec<NodeId> {
        let indexed = predicate.iter().find_map(|(key, value)| {
            let key = Self::indexed_key(key)?;
            let text = value.as_text()?;
            Some(
                self.property_index
                    .get(key)
                    .and_then(|m| m.get(text))
                    .map(Vec::as_slice)
                    .unwrap_or(&[]),
            )
        });
        let candidates: &[NodeId] = match indexed {
            Some(ids) => ids,
            None => self.label_index.get(label).map(Vec::as_slice).unwrap_or(&[]),
        };
        candidates
            .iter()
            .copied()
            .filter(|id| {
                let node = &self.nodes[id.index()];
                node.has_label(label)
                    && predicate
                        .iter()
                        .all(|(key, value)| node.properties.get(*key) == Some(value))
            })
            .collect()
    }

    /// Convenience for a single-constraint lookup expected to be unique.
    pub fn find_node(&self, label: &str, key: &str, value: &str) -> Option<NodeId> {
        self.match_nodes(label, &[(key, PropertyValue::from(value))])
            .into_iter()
            .next()
    }

    /// Incident edges of `edge_type` in the given direction, paired with the
    /// opposite endpoint, ascending by edge id.
    pub fn adjacent(
        &self,
        node: NodeId,
        edge_type: &str,
        direction: Direction,
    ) -> Result<Vec<(EdgeId, NodeId)>, GraphError> {
        let incident = match direction {
            Direction::Out => self.out_edges.get(node.index()),
            Direction::In => self.in_edges.get(node.index()),
        }
        .ok_or(GraphError::UnknownNode(node))?;
        Ok(incident
            .iter()
            .map(|id| &self.edges[id.index()])
            .filter(|e| e.edge_type == edge_type)
            .map(|e| {
                let other = match direction {
                    Direction::Out => e.target,
                    Direction::In => e.source,
                };
                (e.id, other)
            })
            .collect())
    }

    /// Iterates the edges of one type in ascending id order.
    pub fn edges_of_type<'a>(&'a self, edge_type: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.edge_type == edge_type)
    }

    /// Node counts per label.
    pub fn label_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for node in &self.nodes {
            for label in &node.labels {
                *counts.entry(label.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Edge counts per type.
    pub fn edge_type_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for edge in &self.edges {
            *counts.entry(edge.edge_type.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Cross-checks every index and adjacency list against a full scan.
    pub fn audit(&self) -> Result<(), AuditError> {
        let mut by_label: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
        let mut by_property: HashMap<(&str, &str), Vec<NodeId>> = HashMap::new();
        for (position, node) in self.nodes.iter().enumerate() {
            if node.id.index() != position {
                return Err(AuditError::IdSequence { position });
            }
            if node.labels.is_empty() {
                return Err(AuditError::Unlabeled { node: node.id });
            }
            for label in &node.labels {
                by_label.entry(label).or_default().push(node.id);
            }
            for (key, value) in &node.properties {
                if let (Some(key), Some(text)) = (Self::indexed_key(key), value.as_text()) {
                    by_property.entry((key, text)).or_default().push(node.id);
                }
            }
        }
        for (label, ids) in &self.label_index {
            if by_label.get(label.as_str()).map(Vec::as_slice).unwrap_or(&[]) != ids.as_slice() {
                return Err(AuditError::LabelIndex {
                    label: label.clone(),
                });
            }
        }
        for label in by_label.keys() {
            if !self.label_index.contains_key(*label) {
                return Err(AuditError::LabelIndex {
                    label: label.to_string(),
                });
            }
        }
        let mut indexed_entries = 0;
        for (key, values) in &self.property_index {
            for (value, ids) in values {
                if ids.is_empty() {
                    continue;
                }
                indexed_entries += 1;
                if by_property.get(&(*key, value.as_str())).map(Vec::as_slice).unwrap_or(&[])
                    != ids.as_slice()
                {
                    return Err(AuditError::PropertyIndex {
                        key: key.to_string(),
                        value: value.clone(),
                    });
                }
            }
        }
        if indexed_entries != by_property.len() {
            let ((key, value), _) = by_property
                .iter()
                .find(|((k, v), _)| {
                    self.property_index
                        .get(*k)
                        .and_then(|m| m.get(*v))
                        .is_none_or(Vec::is_empty)
                })
                .expect("a scanned entry is missing from the index");
            return Err(AuditError::PropertyIndex {
                key: key.to_string(),
                value: value.to_string(),
            });
        }
        let mut out: Vec<Vec<EdgeId>> = vec![Vec::new(); self.nodes.len()];
        let mut inc: Vec<Vec<EdgeId>> = vec![Vec::new(); self.nodes.len()];
        for (position, edge) in self.edges.iter().enumerate() {
            if edge.id.index() != position {
                return Err(AuditError::IdSequence { position });
            }
            if edge.source.index() >= self.nodes.len() || edge.target.index() >= self.nodes.len() {
                return Err(AuditError::DanglingEdge { edge: edge.id });
            }
            out[edge.source.index()].push(edge.id);
            inc[edge.target.index()].push(edge.id);
        }
        for (i, (o, n)) in out.iter().zip(&inc).enumerate() {
            if self.out_edges.get(i) != Some(o) || self.in_edges.get(i) != Some(n) {
                return Err(AuditError::Adjacency {
                    node: NodeId(i as u32),
                });
            }
        }
        Ok(())
    }
}
