//! DOT, GraphML and openCypher exports.
//!
//! Knowledge graphs and pathway graphs are first flattened into an
//! [`ExportGraph`] whose nodes carry stable string keys (`evt:<event_id>`,
//! `ent:<type>:<id>`, `cls:<activity>`, `sct:<concept_id>`, `icd:<code>`,
//! `dom:<name>`, `att:<type>:<id>:<attribute>`). Nodes are emitted in key
//! order and edges in (source, target, type, properties) order, so output
//! does not depend on node id allocation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::DateTime;
use quick_xml::events::Event as XmlEvent;
use quick_xml::Reader;
use thiserror::Error;

use crate::construct::entity_types;
use crate::discover::{EdgeKind, NodeKind, PathwayGraph};
use crate::graph::{edge_types, labels, Node, NodeId, Properties, PropertyGraph, PropertyValue};

pub const PATIENT_COLOR: &str = "#E74C3C";
pub const ADMISSION_COLOR: &str = "#3498DB";
pub const DISORDER_COLOR: &str = "#2ECC71";

/// Domain colors, assigned by the domain's position in sorted order and
/// cycled when there are more than twelve domains.
pub const DOMAIN_PALETTE: [&str; 12] = [
    "#F1C40F", "#9B59B6", "#1ABC9C", "#E67E22", "#F5B7B1", "#AED6F1", "#A3E4D7", "#D7BDE2", "#F9E79F",
    "#EDBB99", "#BFC9CA", "#ABEBC6",
];

/// Fill colors for entity types and activity domains.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StyleMap {
    entity_colors: BTreeMap<String, String>,
    domain_colors: BTreeMap<String, String>,
}

impl StyleMap {
    pub fn new<S: AsRef<str>>(domains: impl IntoIterator<Item = S>) -> Self {
        let entity_colors = [
            (entity_types::PATIENT, PATIENT_COLOR),
            (entity_types::ADMISSION, ADMISSION_COLOR),
            (entity_types::DISORDER, DISORDER_COLOR),
        ]
        .into_iter()
        .map(|(t, c)| (t.to_owned(), c.to_owned()))
        .collect();
        let sorted: BTreeSet<String> = domains.into_iter().map(|d| d.as_ref().to_owned()).collect();
        let domain_colors = sorted
            .into_iter()
            .enumerate()
            .map(|(i, d)| (d, DOMAIN_PALETTE[i % DOMAIN_PALETTE.len()].to_owned()))
            .collect();
        StyleMap {
            entity_colors,
            domain_colors,
        }
    }

    /// Style map over the Domain nodes of a graph.
    pub fn for_graph(graph: &PropertyGraph) -> Self {
        let domains: Vec<&str> = graph
            .match_nodes(labels::DOMAIN, &[])
            .into_iter()
            .filter_map(|d| graph.node(d)?.text("name"))
            .collect();
        Self::new(domains)
    }

    pub fn entity_color(&self, entity_type: &str) -> Option<&str> {
        self.entity_colors.get(entity_type).map(String::as_str)
    }

    pub fn domain_color(&self, domain: &str) -> Option<&str> {
        self.domain_colors.get(domain).map(String::as_str)
    }
}

/// Stable export key of a knowledge-graph node.
pub fn node_key(node: &Node) -> String {
    let t = |k: &str| node.text(k).unwrap_or_default();
    if node.has_label(labels::EVENT) {
        format!("evt:{}", t("event_id"))
    } else if node.has_label(labels::ENTITY) {
        format!("ent:{}:{}", t("entity_type"), t("entity_id"))
    } else if node.has_label(labels::CLASS) {
        format!("cls:{}", t("activity"))
    } else if node.has_label(labels::SNOMED_CONCEPT) {
        format!("sct:{}", t("concept_id"))
    } else if node.has_label(labels::ICD_CODE) {
        format!("icd:{}", t("icd_code"))
    } else if node.has_label(labels::DOMAIN) {
        format!("dom:{}", t("name"))
    } else if node.has_label(labels::ATTRIBUTE_VALUE) {
        format!("att:{}:{}:{}", t("entity_type"), t("entity_id"), t("attribute"))
    } else {
        format!("node:{}", node.id.0)
    }
}

/// Properties that identify a node of the given labels when matching it
/// in a query script.
fn identity_keys(node: &Node) -> Vec<&str> {
    let keys: &[&str] = if node.has_label(labels::EVENT) {
        &["event_id"]
    } else if node.has_label(labels::ENTITY) {
        &["entity_type", "entity_id"]
    } else if node.has_label(labels::CLASS) {
        &["activity"]
    } else if node.has_label(labels::SNOMED_CONCEPT) {
        &["concept_id"]
    } else if node.has_label(labels::ICD_CODE) {
        &["icd_code"]
    } else if node.has_label(labels::DOMAIN) {
        &["name"]
    } else if node.has_label(labels::ATTRIBUTE_VALUE) {
        &["entity_type", "entity_id", "attribute"]
    } else {
        return node.properties.keys().map(String::as_str).collect();
    };
    keys.to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportNode {
    pub key: String,
    pub labels: Vec<String>,
    pub properties: Properties,
    pub display: String,
    pub shape: &'static str,
    pub fill: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportEdge {
    pub edge_type: String,
    pub source: String,
    pub target: String,
    pub properties: Properties,
    pub display: Option<String>,
    pub color: Option<String>,
    pub dashed: bool,
}

/// A graph flattened for serialization: nodes sorted by key, edges by
/// (source, target, type, properties).
#[derive(Debug, Clone, PartialEq)]
pub struct ExportGraph {
    pub name: String,
    pub metadata: BTreeMap<String, String>,
    pub nodes: Vec<ExportNode>,
    pub edges: Vec<ExportEdge>,
}

fn canonical_props(props: &Properties) -> String {
    let mut out = String::new();
    for (k, v) in props {
        let _ = write!(out, "{k}\u{1f}{}\u{1f}{v}\u{1e}", v.type_name());
    }
    out
}

impl ExportGraph {
    fn sort(mut self) -> Self {
        self.nodes.sort_by(|a, b| a.key.cmp(&b.key));
        self.edges.sort_by_cached_key(|e| {
            (
                e.source.clone(),
                e.target.clone(),
                e.edge_type.clone(),
                canonical_props(&e.properties),
            )
        });
        self
    }

    pub fn from_cekg(graph: &PropertyGraph, style: &StyleMap) -> Self {
        let keys: Vec<String> = graph.nodes().iter().map(node_key).collect();
        let mut class_domain: BTreeMap<NodeId, &str> = BTreeMap::new();
        for e in graph.edges_of_type(edge_types::HAS_DOMAIN) {
            if let Some(name) = graph.node(e.target).and_then(|n| n.text("name")) {
                class_domain.insert(e.source, name);
            }
        }
        let mut event_class: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for e in graph.edges_of_type(edge_types::OBSERVED) {
            event_class.insert(e.source, e.target);
        }
        let nodes = graph
            .nodes()
            .iter()
            .map(|n| {
                let t = |k: &str| n.text(k).unwrap_or_default().to_owned();
                let (display, shape, fill) = if n.has_label(labels::EVENT) {
                    let class = event_class.get(&n.id);
                    let label = class
                        .and_then(|c| graph.node(*c)?.text("display"))
                        .map(str::to_owned)
                        .unwrap_or_else(|| t("activity"));
                    let fill = class
                        .and_then(|c| class_domain.get(c))
                        .and_then(|d| style.domain_color(d));
                    (format!("{label} ({})", t("event_id")), "box", fill)
                } else if n.has_label(labels::ENTITY) {
                    let et = t("entity_type");
                    let label = if et == entity_types::DISORDER { t("concept_id") } else { t("entity_id") };
                    (format!("{et}\n{label}"), "circle", style.entity_color(&et))
                } else if n.has_label(labels::CLASS) {
                    let fill = class_domain.get(&n.id).and_then(|d| style.domain_color(d));
                    (t("display"), "box", fill)
                } else if n.has_label(labels::SNOMED_CONCEPT) {
                    (format!("{}\n{}", t("fsn"), t("concept_id")), "ellipse", None)
                } else if n.has_label(labels::ICD_CODE) {
                    (format!("{}\n{}", t("icd_code"), t("title")), "note", None)
                } else if n.has_label(labels::DOMAIN) {
                    (t("name"), "tab", style.domain_color(&t("name")))
                } else if n.has_label(labels::ATTRIBUTE_VALUE) {
                    (format!("{}={}", t("attribute"), t("value")), "plaintext", None)
                } else {
                    (keys[n.id.index()].clone(), "ellipse", None)
                };
                ExportNode {
                    key: keys[n.id.index()].clone(),
                    labels: n.labels.iter().cloned().collect(),
                    properties: n.properties.clone(),
                    display,
                    shape,
                    fill: fill.map(str::to_owned),
                }
            })
            .collect();
        let edges = graph
            .edges()
            .iter()
            .map(|e| {
                let entity_type = e.text("entity_type");
                let display = match (e.edge_type.as_str(), entity_type) {
                    (edge_types::DF, Some(t)) => format!("DF {t}"),
                    (other, _) => other.to_owned(),
                };
                let color = if e.edge_type == edge_types::DF {
                    entity_type.and_then(|t| style.entity_color(t)).map(str::to_owned)
                } else {
                    None
                };
                ExportEdge {
                    edge_type: e.edge_type.clone(),
                    source: keys[e.source.index()].clone(),
                    target: keys[e.target.index()].clone(),
                    properties: e.properties.clone(),
                    display: Some(display),
                    color,
                    dashed: e.edge_type != edge_types::DF,
                }
            })
            .collect();
        ExportGraph {
            name: "cekg".to_owned(),
            metadata: graph.metadata().clone(),
            nodes,
            edges,
        }
        .sort()
    }

    pub fn from_pathway(pathway: &PathwayGraph) -> Self {
        let nodes = pathway
            .nodes
            .iter()
            .map(|n| {
                let (label, shape) = match n.kind {
                    NodeKind::Event => ("Event", "box"),
                    NodeKind::Class => ("Class", "box"),
                    NodeKind::Entity => ("Entity", "circle"),
                    NodeKind::Annotation => ("Annotation", "note"),
                };
                let mut properties = Properties::new();
                properties.insert("label".into(), n.label.clone().into());
                if let Some(g) = &n.group {
                    properties.insert("group".into(), g.clone().into());
                }
                if let Some(c) = &n.color {
                    properties.insert("color".into(), c.clone().into());
                }
                ExportNode {
                    key: n.key.clone(),
                    labels: vec![label.to_owned()],
                    properties,
                    display: n.label.clone(),
                    shape,
                    fill: n.color.clone(),
                }
            })
            .collect();
        let style = StyleMap::new(Vec::<String>::new());
        let edges = pathway
            .edges
            .iter()
            .map(|e| {
                let edge_type = match e.kind {
                    EdgeKind::Df => "DF",
                    EdgeKind::Corr => "CORR",
                    EdgeKind::Status => "STATUS",
                };
                let mut properties = Properties::new();
                properties.insert("weight".into(), PropertyValue::Integer(e.weight as i64));
                for (k, v) in [("entity_type", &e.entity_type), ("concept_id", &e.concept_id), ("label", &e.label)] {
                    if let Some(v) = v {
                        properties.insert(k.into(), v.clone().into());
                    }
                }
                let mut parts = Vec::new();
                if e.kind == EdgeKind::Status {
                    parts.extend(e.label.clone());
                } else {
                    if e.weight > 1 {
                        parts.push(e.weight.to_string());
                    }
                    parts.extend(e.concept_id.clone());
                }
                ExportEdge {
                    edge_type: edge_type.to_owned(),
                    source: e.source.clone(),
                    target: e.target.clone(),
                    properties,
                    display: (!parts.is_empty()).then(|| parts.join(" ")),
                    color: e
                        .entity_type
                        .as_deref()
                        .filter(|_| e.kind == EdgeKind::Df)
                        .and_then(|t| style.entity_color(t))
                        .map(str::to_owned),
                    dashed: e.kind != EdgeKind::Df,
                }
            })
            .collect();
        ExportGraph {
            name: pathway.variant.to_string().to_lowercase(),
            metadata: BTreeMap::from([
                ("variant".to_owned(), pathway.variant.to_string()),
                ("title".to_owned(), pathway.title.clone()),
            ]),
            nodes,
            edges,
        }
        .sort()
    }
}

/// Anything the DOT and GraphML emitters accept.
pub enum ExportTarget<'a> {
    Cekg(&'a PropertyGraph, &'a StyleMap),
    Pathway(&'a PathwayGraph),
}

impl ExportTarget<'_> {
    pub fn flatten(&self) -> ExportGraph {
        match self {
            ExportTarget::Cekg(g, style) => ExportGraph::from_cekg(g, style),
            ExportTarget::Pathway(p) => ExportGraph::from_pathway(p),
        }
    }
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out
}

/// Graphviz DOT text: one line per node and one line per edge.
pub fn emit_dot(target: &ExportTarget<'_>) -> String {
    let g = target.flatten();
    let mut out = format!("// {}: {} nodes, {} edges\n", g.name, g.nodes.len(), g.edges.len());
    if g.nodes.is_empty() && g.edges.is_empty() {
        let _ = writeln!(out, "digraph {} {{ }}", g.name);
        return out;
    }
    let _ = writeln!(out, "digraph {} {{", g.name);
    out.push_str("  graph [rankdir=LR, fontname=\"Helvetica\"];\n");
    out.push_str("  node [fontname=\"Helvetica\", style=filled, fillcolor=\"#FFFFFF\"];\n");
    out.push_str("  edge [fontname=\"Helvetica\"];\n");
    for n in &g.nodes {
        let _ = write!(
            out,
            "  \"{}\" [label=\"{}\", shape={}",
            dot_escape(&n.key),
            dot_escape(&n.display),
            n.shape
        );
        if let Some(fill) = &n.fill {
            let _ = write!(out, ", fillcolor=\"{fill}\"");
        }
        out.push_str("];\n");
    }
    for e in &g.edges {
        let _ = write!(out, "  \"{}\" -> \"{}\" [", dot_escape(&e.source), dot_escape(&e.target));
        let mut attrs = Vec::new();
        if let Some(d) = &e.display {
            attrs.push(format!("label=\"{}\"", dot_escape(d)));
        }
        if let Some(c) = &e.color {
            attrs.push(format!("color=\"{c}\""));
        }
        if e.dashed {
            attrs.push("style=dashed".to_owned());
        }
        out.push_str(&attrs.join(", "));
        out.push_str("];\n");
    }
    out.push_str("}\n");
    out
}

fn xml_escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

const GRAPHML_HEADER: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<graphml xmlns="http://graphml.graphdrawing.org/xmlns" xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" xsi:schemaLocation="http://graphml.graphdrawing.org/xmlns http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd">
"#;

/// Key ids carry the value type as a suffix (`n3.timestamp`) because
/// GraphML has no timestamp type; timestamps are stored as strings.
fn graphml_type(type_name: &str) -> &'static str {
    match type_name {
        "integer" => "long",
        "decimal" => "double",
        "boolean" => "boolean",
        _ => "string",
    }
}

/// GraphML 1.0 document. Every property (name, value type) pair is
/// declared once as a `<key>`.
pub fn emit_graphml(target: &ExportTarget<'_>) -> String {
    let g = target.flatten();
    let mut node_keys: BTreeMap<(&str, &str), String> = BTreeMap::new();
    let mut edge_keys: BTreeMap<(&str, &str), String> = BTreeMap::new();
    for n in &g.nodes {
        for (k, v) in &n.properties {
            let next = node_keys.len();
            node_keys.entry((k, v.type_name())).or_insert_with(|| format!("n{next}.{}", v.type_name()));
        }
    }
    for e in &g.edges {
        for (k, v) in &e.properties {
            let next = edge_keys.len();
            edge_keys.entry((k, v.type_name())).or_insert_with(|| format!("e{next}.{}", v.type_name()));
        }
    }
    let mut out = String::from(GRAPHML_HEADER);
    out.push_str("  <key id=\"key\" for=\"node\" attr.name=\"key\" attr.type=\"string\"/>\n");
    out.push_str("  <key id=\"labels\" for=\"node\" attr.name=\"labels\" attr.type=\"string\"/>\n");
    out.push_str("  <key id=\"type\" for=\"edge\" attr.name=\"type\" attr.type=\"string\"/>\n");
    for (i, k) in g.metadata.keys().enumerate() {
        let _ = writeln!(
            out,
            "  <key id=\"g{i}.text\" for=\"graph\" attr.name=\"{}\" attr.type=\"string\"/>",
            xml_escape(k)
        );
    }
    for (domain, keys) in [("node", &node_keys), ("edge", &edge_keys)] {
        for ((name, type_name), id) in keys {
            let _ = writeln!(
                out,
                "  <key id=\"{id}\" for=\"{domain}\" attr.name=\"{}\" attr.type=\"{}\"/>",
                xml_escape(name),
                graphml_type(type_name)
            );
        }
    }
    let _ = writeln!(out, "  <graph id=\"{}\" edgedefault=\"directed\">", xml_escape(&g.name));
    for (i, v) in g.metadata.values().enumerate() {
        let _ = writeln!(out, "    <data key=\"g{i}.text\">{}</data>", xml_escape(v));
    }
    let mut node_ids: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, n) in g.nodes.iter().enumerate() {
        node_ids.insert(&n.key, i);
        let _ = writeln!(out, "    <node id=\"n{i}\">");
        let _ = writeln!(out, "      <data key=\"key\">{}</data>", xml_escape(&n.key));
        let labels: String = n.labels.iter().map(|l| format!(":{l}")).collect();
        let _ = writeln!(out, "      <data key=\"labels\">{}</data>", xml_escape(&labels));
        for (k, v) in &n.properties {
            let _ = writeln!(
                out,
                "      <data key=\"{}\">{}</data>",
                node_keys[&(k.as_str(), v.type_name())],
                xml_escape(&v.to_string())
            );
        }
        out.push_str("    </node>\n");
    }
    for (i, e) in g.edges.iter().enumerate() {
        let _ = writeln!(
            out,
            "    <edge id=\"e{i}\" source=\"n{}\" target=\"n{}\">",
            node_ids[e.source.as_str()],
            node_ids[e.target.as_str()]
        );
        let _ = writeln!(out, "      <data key=\"type\">{}</data>", xml_escape(&e.edge_type));
        for (k, v) in &e.properties {
            let _ = writeln!(
                out,
                "      <data key=\"{}\">{}</data>",
                edge_keys[&(k.as_str(), v.type_name())],
                xml_escape(&v.to_string())
            );
        }
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

#[derive(Debug, Error)]
pub enum GraphMlError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("undeclared data key {0:?}")]
    UnknownKey(String),
    #[error("edge refers to unknown node {0:?}")]
    UnknownNode(String),
    #[error("cannot parse {value:?} as {type_name}")]
    BadValue { value: String, type_name: String },
    #[error("element <{0}> is missing attribute {1:?}")]
    MissingAttribute(String, String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

fn parse_typed(type_name: &str, raw: &str) -> Result<PropertyValue, GraphMlError> {
    let bad = || GraphMlError::BadValue {
        value: raw.to_owned(),
        type_name: type_name.to_owned(),
    };
    Ok(match type_name {
        "integer" => PropertyValue::Integer(raw.parse().map_err(|_| bad())?),
        "decimal" => PropertyValue::Decimal(raw.parse().map_err(|_| bad())?),
        "boolean" => PropertyValue::Boolean(raw.parse().map_err(|_| bad())?),
        "timestamp" => PropertyValue::timestamp(
            DateTime::parse_from_rfc3339(raw)
                .map_err(|_| bad())?
                .with_timezone(&chrono::Utc),
        ),
        _ => PropertyValue::Text(raw.to_owned()),
    })
}

enum Owner {
    Graph,
    Node(String, Vec<String>, Properties),
    Edge(String, String, String, Properties),
}

/// Reads a document produced by [`emit_graphml`] back into a property
/// graph. Nodes are created in document order.
pub fn read_graphml(text: &str) -> Result<PropertyGraph, GraphMlError> {
    let mut reader = Reader::from_str(text);
    let xml_err = |e: &dyn std::fmt::Display| GraphMlError::Xml(e.to_string());
    // key id -> (attr.name, value type)
    let mut keys: BTreeMap<String, (String, String)> = BTreeMap::new();
    let mut nodes: Vec<(String, Vec<String>, Properties)> = Vec::new();
    let mut edges: Vec<(String, String, String, Properties)> = Vec::new();
    let mut metadata = BTreeMap::new();
    let mut owner: Option<Owner> = None;
    let mut data_key: Option<String> = None;
    let mut data_text = String::new();

    let attr = |e: &quick_xml::events::BytesStart<'_>, name: &str| -> Result<Option<String>, GraphMlError> {
        for a in e.attributes() {
            let a = a.map_err(|e| xml_err(&e))?;
            if a.key.as_ref() == name.as_bytes() {
                return Ok(Some(a.unescape_value().map_err(|e| xml_err(&e))?.into_owned()));
            }
        }
        Ok(None)
    };
    let required = |e: &quick_xml::events::BytesStart<'_>, el: &str, name: &str| {
        attr(e, name)?.ok_or_else(|| GraphMlError::MissingAttribute(el.to_owned(), name.to_owned()))
    };

    loop {
        let event = reader.read_event().map_err(|e| xml_err(&e))?;
        match event {
            XmlEvent::Eof => break,
            XmlEvent::Empty(e) if matches!(e.local_name().as_ref(), b"node" | b"edge") => {
                if e.local_name().as_ref() == b"node" {
                    nodes.push((required(&e, "node", "id")?, Vec::new(), Properties::new()));
                } else {
                    edges.push((
                        required(&e, "edge", "source")?,
                        required(&e, "edge", "target")?,
                        String::new(),
                        Properties::new(),
                    ));
                }
            }
            XmlEvent::Start(e) | XmlEvent::Empty(e) => match e.local_name().as_ref() {
                b"key" => {
                    let id = required(&e, "key", "id")?;
                    let name = required(&e, "key", "attr.name")?;
                    let type_name = id.rsplit_once('.').map(|(_, t)| t.to_owned()).unwrap_or_else(|| "text".into());
                    keys.insert(id, (name, type_name));
                }
                b"graph" => owner = Some(Owner::Graph),
                b"node" => owner = Some(Owner::Node(required(&e, "node", "id")?, Vec::new(), Properties::new())),
                b"edge" => {
                    owner = Some(Owner::Edge(
                        required(&e, "edge", "source")?,
                        required(&e, "edge", "target")?,
                        String::new(),
                        Properties::new(),
                    ))
                }
                b"data" => {
                    data_key = Some(required(&e, "data", "key")?);
                    data_text.clear();
                }
                _ => {}
            },
            XmlEvent::Text(t) => {
                if data_key.is_some() {
                    data_text.push_str(&t.xml_content().map_err(|e| xml_err(&e))?);
                }
            }
            XmlEvent::GeneralRef(r) => {
                if data_key.is_some() {
                    let name = r.decode().map_err(|e| xml_err(&e))?;
                    let entity = format!("&{name};");
                    let resolved = quick_xml::escape::unescape(&entity).map_err(|e| xml_err(&e))?;
                    data_text.push_str(&resolved);
                }
            }
            XmlEvent::End(e) => match e.local_name().as_ref() {
                b"data" => {
                    let key = data_key.take().unwrap_or_default();
                    let raw = std::mem::take(&mut data_text);
                    match (&mut owner, key.as_str()) {
                        (Some(Owner::Node(..)), "key") => {}
                        (Some(Owner::Node(_, labels, _)), "labels") => {
                            *labels = raw.split(':').filter(|l| !l.is_empty()).map(str::to_owned).collect();
                        }
                        (Some(Owner::Edge(_, _, t, _)), "type") => *t = raw,
                        (Some(Owner::Graph), _) => {
                            let (name, _) = keys.get(&key).ok_or_else(|| GraphMlError::UnknownKey(key.clone()))?;
                            metadata.insert(name.clone(), raw);
                        }
                        (Some(Owner::Node(_, _, props)), _) | (Some(Owner::Edge(_, _, _, props)), _) => {
                            let (name, type_name) =
                                keys.get(&key).ok_or_else(|| GraphMlError::UnknownKey(key.clone()))?;
                            props.insert(name.clone(), parse_typed(type_name, &raw)?);
                        }
                        (None, _) => return Err(GraphMlError::UnknownKey(key)),
                    }
                }
                b"node" => {
                    if let Some(Owner::Node(id, labels, props)) = owner.take() {
                        nodes.push((id, labels, props));
                    }
                    owner = Some(Owner::Graph);
                }
                b"edge" => {
                    if let Some(Owner::Edge(s, t, ty, props)) = owner.take() {
                        edges.push((s, t, ty, props));
                    }
                    owner = Some(Owner::Graph);
                }
                b"graph" => owner = None,
                _ => {}
            },
            _ => {}
        }
    }

    let mut graph = PropertyGraph::new();
    let mut ids = BTreeMap::new();
    for (id, labels, props) in nodes {
        let node = graph.add_node(labels, props)?;
        ids.insert(id, node);
    }
    for (s, t, ty, props) in edges {
        let source = *ids.get(&s).ok_or(GraphMlError::UnknownNode(s))?;
        let target = *ids.get(&t).ok_or(GraphMlError::UnknownNode(t))?;
        graph.add_edge(ty, source, target, props)?;
    }
    for (k, v) in metadata {
        graph.set_metadata(k, v)?;
    }
    Ok(graph)
}

/// Canonical description of a graph independent of node ids: nodes as
/// (key, labels, properties) and edges as (type, source key, target key,
/// properties), both sorted. Two graphs are isomorphic under the export
/// keys exactly when their canonical forms are equal.
pub fn canonical_form(graph: &PropertyGraph) -> (Vec<String>, Vec<String>) {
    let keys: Vec<String> = graph.nodes().iter().map(node_key).collect();
    let mut nodes: Vec<String> = graph
        .nodes()
        .iter()
        .map(|n| {
            let labels: Vec<&str> = n.labels.iter().map(String::as_str).collect();
            format!("{}|{}|{}", keys[n.id.index()], labels.join(":"), canonical_props(&n.properties))
        })
        .collect();
    let mut edges: Vec<String> = graph
        .edges()
        .iter()
        .map(|e| {
            format!(
                "{}|{}|{}|{}",
                e.edge_type,
                keys[e.source.index()],
                keys[e.target.index()],
                canonical_props(&e.properties)
            )
        })
        .collect();
    nodes.sort();
    edges.sort();
    (nodes, edges)
}

fn cypher_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn cypher_value(v: &PropertyValue) -> String {
    match v {
        PropertyValue::Text(s) => cypher_string(s),
        PropertyValue::Integer(i) => i.to_string(),
        PropertyValue::Decimal(d) => {
            let s = d.to_string();
            if s.contains(['.', 'e', 'E']) {
                s
            } else {
                format!("{s}.0")
            }
        }
        PropertyValue::Boolean(b) => b.to_string(),
        PropertyValue::Timestamp(_) => format!("datetime({})", cypher_string(&v.to_string())),
    }
}

fn cypher_name(name: &str) -> String {
    let simple = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if simple {
        name.to_owned()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

fn cypher_map<'a>(pairs: impl IntoIterator<Item = (&'a String, &'a PropertyValue)>) -> String {
    let body: Vec<String> = pairs
        .into_iter()
        .map(|(k, v)| format!("{}: {}", cypher_name(k), cypher_value(v)))
        .collect();
    if body.is_empty() {
        String::new()
    } else {
        format!(" {{{}}}", body.join(", "))
    }
}

/// Schema and cleanup statements that open every query script.
pub const SCRIPT_PREAMBLE: [&str; 7] = [
    "DROP CONSTRAINT cekg_event_id IF EXISTS;",
    "DROP CONSTRAINT cekg_concept_id IF EXISTS;",
    "DROP CONSTRAINT cekg_icd_code IF EXISTS;",
    "MATCH (n) WHERE n:Event OR n:Entity OR n:Class OR n:Domain OR n:ICDCode OR n:SNOMEDConcept OR n:AttributeValue DETACH DELETE n;",
    "CREATE CONSTRAINT cekg_event_id IF NOT EXISTS FOR (n:Event) REQUIRE n.event_id IS UNIQUE;",
    "CREATE CONSTRAINT cekg_concept_id IF NOT EXISTS FOR (n:SNOMEDConcept) REQUIRE n.concept_id IS UNIQUE;",
    "CREATE CONSTRAINT cekg_icd_code IF NOT EXISTS FOR (n:ICDCode) REQUIRE n.icd_code IS UNIQUE;",
];

/// Query script that recreates the graph in an empty property-graph
/// database: the preamble, one `CREATE` per node, then one `MATCH ...
/// CREATE` per edge. One statement per line, each ending in `;`.
pub fn emit_query_script(graph: &PropertyGraph) -> String {
    let keys: Vec<String> = graph.nodes().iter().map(node_key).collect();
    let mut out = format!(
        "// CEKG import script: {} nodes, {} relationships\n",
        graph.node_count(),
        graph.edge_count()
    );
    for line in SCRIPT_PREAMBLE {
        out.push_str(line);
        out.push('\n');
    }
    let mut order: Vec<&Node> = graph.nodes().iter().collect();
    order.sort_by(|a, b| keys[a.id.index()].cmp(&keys[b.id.index()]));
    let label_text = |n: &Node| -> String { n.labels.iter().map(|l| format!(":{}", cypher_name(l))).collect() };
    for n in &order {
        let _ = writeln!(out, "CREATE ({}{});", label_text(n), cypher_map(&n.properties));
    }
    let pattern = |var: &str, n: &Node| -> String {
        let ident = identity_keys(n);
        let pairs = n.properties.iter().filter(|(k, _)| ident.contains(&k.as_str()));
        format!("({var}{}{})", label_text(n), cypher_map(pairs))
    };
    let mut edges: Vec<_> = graph.edges().iter().collect();
    edges.sort_by_cached_key(|e| {
        (
            keys[e.source.index()].clone(),
            keys[e.target.index()].clone(),
            e.edge_type.clone(),
            canonical_props(&e.properties),
        )
    });
    for e in edges {
        let (s, t) = (&graph.nodes()[e.source.index()], &graph.nodes()[e.target.index()]);
        let _ = writeln!(
            out,
            "MATCH {}, {} CREATE (a)-[:{}{}]->(b);",
            pattern("a", s),
            pattern("b", t),
            cypher_name(&e.edge_type),
            cypher_map(&e.properties)
        );
    }
    out
}
