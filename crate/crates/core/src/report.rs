//! Build report and warnings shared by ingest and construction.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::graph::PropertyGraph;

/// A non-fatal finding. `step` is the construction step (1-15) the warning
/// belongs to; ingest warnings carry no step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<u8>,
    pub message: String,
}

impl Warning {
    pub fn ingest(message: impl Into<String>) -> Self {
        Warning {
            step: None,
            message: message.into(),
        }
    }

    pub fn at_step(step: u8, message: impl Into<String>) -> Self {
        Warning {
            step: Some(step),
            message: message.into(),
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(step) => write!(f, "step {step}: {}", self.message),
            None => write!(f, "ingest: {}", self.message),
        }
    }
}

/// Summary of a construction run. Field order is the JSON key order.
///
/// Reports returned by individual construction steps carry the counts of
/// the whole graph after that step and only that step's findings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    pub node_counts: BTreeMap<String, usize>,
    pub edge_counts: BTreeMap<String, usize>,
    pub warnings: Vec<Warning>,
    /// Activities without a SNOMED-CT concept.
    pub unlinked_activities: Vec<String>,
    /// Activities without a domain (only when domains are built).
    pub activities_without_domain: Vec<String>,
    /// Diagnosed ICD codes that are missing from the ICD table or carry no
    /// SNOMED-CT mapping.
    pub unlinked_icd_codes: Vec<String>,
}

impl BuildReport {
    /// Replaces the counts with the result of a full graph scan.
    pub fn recount(&mut self, graph: &PropertyGraph) {
        self.node_counts = graph.label_counts();
        self.edge_counts = graph.edge_type_counts();
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}
