//! Bundled two-patient sample dataset.
//!
//! Two multi-morbid patients (P1 with admissions A11 and A12, P2 with A21)
//! and thirteen events. The data is synthetic; codes and concept ids are
//! there to exercise the pipeline, not as clinical reference material.

use std::io;
use std::path::Path;

use crate::construct::{BuildInputs, Mappings};
use crate::ingest::{self, IngestOptions, MappingKind, ValidationMode};

/// `(file name, contents)` of every sample table.
pub const FILES: [(&str, &str); 11] = [
    ("event_log.csv", include_str!("../data/sample/event_log.csv")),
    ("diagnosis.csv", include_str!("../data/sample/diagnosis.csv")),
    ("icd10.csv", include_str!("../data/sample/icd10.csv")),
    ("snomed_concepts.csv", include_str!("../data/sample/snomed_concepts.csv")),
    ("snomed_relationships.csv", include_str!("../data/sample/snomed_relationships.csv")),
    ("map_icd_snomed.csv", include_str!("../data/sample/map_icd_snomed.csv")),
    ("map_activity_snomed.csv", include_str!("../data/sample/map_activity_snomed.csv")),
    ("map_activity_domain.csv", include_str!("../data/sample/map_activity_domain.csv")),
    ("map_domain_snomed.csv", include_str!("../data/sample/map_domain_snomed.csv")),
    ("map_activity_treats.csv", include_str!("../data/sample/map_activity_treats.csv")),
    ("entity_attributes.csv", include_str!("../data/sample/entity_attributes.csv")),
];

/// Manifest that builds the sample and requests C2 and C3 pathways.
pub const MANIFEST: &str = include_str!("../data/sample/sample.manifest");

fn file(name: &str) -> &'static str {
    FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .expect("bundled sample file")
}

/// Parses the bundled sample into build inputs.
pub fn inputs() -> BuildInputs {
    let strict = ValidationMode::Strict;
    let events = ingest::read_event_table(file("event_log.csv").as_bytes(), &IngestOptions::default())
        .expect("sample event log is valid")
        .records;
    let attributes = ingest::read_entity_attributes(file("entity_attributes.csv").as_bytes(), strict)
        .expect("sample attributes are valid")
        .records;
    let diagnoses = ingest::read_diagnosis_table(file("diagnosis.csv").as_bytes(), strict)
        .expect("sample diagnoses are valid")
        .records;
    let icd_codes = ingest::read_icd_table(file("icd10.csv").as_bytes(), strict)
        .expect("sample ICD table is valid")
        .records;
    let concepts = ingest::read_concept_table(file("snomed_concepts.csv").as_bytes(), strict)
        .expect("sample concepts are valid")
        .records;
    let relationships =
        ingest::read_relationship_table(file("snomed_relationships.csv").as_bytes(), &concepts, strict)
            .expect("sample relationships are valid")
            .records;
    let mappings = Mappings::from_tables(MappingKind::ALL.iter().map(|kind| {
        ingest::read_mapping(*kind, file(kind.file_name()).as_bytes(), strict)
            .expect("sample mapping is valid")
            .0
    }));
    BuildInputs {
        events,
        attributes,
        diagnoses,
        terminology: ingest::Terminology {
            icd_codes,
            concepts,
            relationships,
        },
        mappings,
    }
}

/// Writes the sample tables and `sample.manifest` into `dir`.
pub fn write_to(dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in FILES {
        std::fs::write(dir.join(name), text)?;
    }
    std::fs::write(dir.join("sample.manifest"), MANIFEST)
}
