use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, TimeZone, Utc};

use cekg::construct::{
    build_all, disorder_entity_id, entity_types, infer_value, BuildConfig, BuildInputs, CekgBuilder,
    ConstructError, Mappings,
};
use cekg::export::{emit_graphml, emit_query_script, ExportTarget, StyleMap};
use cekg::graph::{edge_types, labels, Direction, PropertyGraph, PropertyValue};
use cekg::ingest::{
    DiagnosisRecord, EntityAttributeRecord, EventRecord, IcdCodeRecord, MappingKind, MappingTable,
    SnomedConceptRecord, SnomedRelationshipRecord, Terminology, IS_A,
};

fn t(minutes: i64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2150, 6, 1, 9, 0, 0).unwrap() + Duration::minutes(minutes)
}

fn event(id: &str, minutes: i64, activity: &str, patient: &str, admission: &str) -> EventRecord {
    EventRecord {
        event_id: id.into(),
        timestamp: t(minutes),
        activity: activity.into(),
        patient_id: patient.into(),
        admission_id: admission.into(),
        extra: BTreeMap::new(),
    }
}

fn concept(id: &str, fsn: &str) -> SnomedConceptRecord {
    SnomedConceptRecord {
        concept_id: id.into(),
        fsn: fsn.into(),
        active: true,
    }
}

fn entity_types_of(graph: &PropertyGraph) -> BTreeSet<String> {
    graph
        .match_nodes(labels::ENTITY, &[])
        .into_iter()
        .filter_map(|n| graph.node(n)?.text("entity_type").map(str::to_owned))
        .collect()
}

fn text<'g>(graph: &'g PropertyGraph, node: cekg::graph::NodeId, key: &str) -> &'g str {
    graph.node(node).unwrap().text(key).unwrap()
}

fn six_events() -> Vec<EventRecord> {
    vec![
        event("E1", 0, "ABG", "P1", "A1"),
        event("E2", 1, "MICRO", "P1", "A1"),
        event("E3", 2, "ABG", "P1", "A1"),
        event("E4", 0, "CBC", "P2", "A2"),
        event("E5", 3, "ABG", "P2", "A2"),
        event("E6", 4, "MICRO", "P2", "A2"),
    ]
}

#[test]
fn events_and_entities_counts() {
    let config = BuildConfig::default();
    let mut b = CekgBuilder::new(&config);
    let report = b.build_events_and_entities(&six_events(), &[]).unwrap();
    assert_eq!(report.node_counts.get("Event"), Some(&6));
    assert_eq!(report.node_counts.get("Entity"), Some(&4));
    assert_eq!(report.edge_counts.get("CORR"), Some(&12));
    let g = b.graph();
    let a1 = g.find_node(labels::ENTITY, "entity_id", "A1").unwrap();
    assert_eq!(text(g, a1, "patient_id"), "P1");
    assert_eq!(text(g, a1, "entity_type"), "ADMISSION");
}

#[test]
fn empty_event_list_gives_empty_fragment() {
    let config = BuildConfig::default();
    let mut b = CekgBuilder::new(&config);
    let report = b.build_events_and_entities(&[], &[]).unwrap();
    assert!(report.node_counts.is_empty());
    assert_eq!(b.graph().node_count(), 0);
}

#[test]
fn attribute_for_unknown_entity_is_strict_error_or_lenient_warning() {
    let attrs = [EntityAttributeRecord {
        entity_type: "PATIENT".into(),
        entity_id: "P9".into(),
        attribute: "gender".into(),
        value: "F".into(),
    }];
    let strict = BuildConfig::default();
    let err = CekgBuilder::new(&strict)
        .build_events_and_entities(&six_events(), &attrs)
        .unwrap_err();
    assert!(matches!(err.source, ConstructError::AttributeForUnknownEntity { .. }));
    assert!(err.step <= 3);

    let lenient = BuildConfig {
        strict_linking: false,
        ..BuildConfig::default()
    };
    let mut b = CekgBuilder::new(&lenient);
    let report = b.build_events_and_entities(&six_events(), &attrs).unwrap();
    assert_eq!(report.warnings.len(), 1);
    assert!(report.warnings[0].message.contains("P9"));
    assert!(b.graph().match_nodes(labels::ATTRIBUTE_VALUE, &[]).is_empty());
}

#[test]
fn attributes_hang_off_their_entity() {
    let attrs = [EntityAttributeRecord {
        entity_type: "ADMISSION".into(),
        entity_id: "A2".into(),
        attribute: "admission_type".into(),
        value: "URGENT".into(),
    }];
    let config = BuildConfig::default();
    let mut b = CekgBuilder::new(&config);
    b.build_events_and_entities(&six_events(), &attrs).unwrap();
    let g = b.graph();
    let a2 = g.find_node(labels::ENTITY, "entity_id", "A2").unwrap();
    let attached = g.adjacent(a2, edge_types::HAS_ATTRIBUTE, Direction::Out).unwrap();
    assert_eq!(attached.len(), 1);
    assert_eq!(text(g, attached[0].1, "value"), "URGENT");
}

#[test]
fn second_event_layer_is_rejected() {
    let config = BuildConfig::default();
    let mut b = CekgBuilder::new(&config);
    b.build_events_and_entities(&six_events(), &[]).unwrap();
    let err = b.build_events_and_entities(&six_events(), &[]).unwrap_err();
    assert_eq!(err.source, ConstructError::GraphNotEmpty);
}

#[test]
fn admission_shared_by_two_patients_is_rejected() {
    let events = [event("E1", 0, "ABG", "P1", "A1"), event("E2", 1, "ABG", "P2", "A1")];
    let config = BuildConfig::default();
    let err = CekgBuilder::new(&config).build_events_and_entities(&events, &[]).unwrap_err();
    assert!(matches!(err.source, ConstructError::AdmissionPatientConflict { .. }));
}

#[test]
fn extra_columns_become_typed_event_properties() {
    let mut e = event("E1", 0, "ABG", "P1", "A1");
    e.extra.insert("Oxygen".into(), "97".into());
    e.extra.insert("Hemoglobin".into(), "12.5".into());
    e.extra.insert("note".into(), "stat".into());
    let config = BuildConfig::default();
    let mut b = CekgBuilder::new(&config);
    b.build_events_and_entities(std::slice::from_ref(&e), &[]).unwrap();
    let node = b.graph().node(b.graph().find_node(labels::EVENT, "event_id", "E1").unwrap()).unwrap();
    assert_eq!(node.get("Oxygen"), Some(&PropertyValue::Integer(97)));
    assert_eq!(node.get("Hemoglobin"), Some(&PropertyValue::Decimal(12.5)));
    assert_eq!(node.text("note"), Some("stat"));

    let without = BuildConfig {
        include_event_properties: false,
        ..BuildConfig::default()
    };
    let mut b = CekgBuilder::new(&without);
    b.build_events_and_entities(&[e], &[]).unwrap();
    let node = b.graph().node(b.graph().find_node(labels::EVENT, "event_id", "E1").unwrap()).unwrap();
    assert_eq!(node.properties.len(), 3);
}

#[test]
fn value_inference() {
    assert_eq!(infer_value("42"), PropertyValue::Integer(42));
    assert_eq!(infer_value("-3.5"), PropertyValue::Decimal(-3.5));
    assert_eq!(infer_value("inf"), PropertyValue::Text("inf".into()));
    assert_eq!(infer_value("NaN"), PropertyValue::Text("NaN".into()));
    assert_eq!(infer_value("7 mg"), PropertyValue::Text("7 mg".into()));
}

#[test]
fn one_class_per_distinct_activity() {
    let config = BuildConfig::default();
    for (activities, classes) in [(vec!["ABG", "ABG", "MICRO"], 2), (vec!["ABG", "ABG"], 1), (vec![], 0)] {
        let events: Vec<_> = activities
            .iter()
            .enumerate()
            .map(|(i, a)| event(&format!("E{i}"), i as i64, a, "P1", "A1"))
            .collect();
        let mut b = CekgBuilder::new(&config);
        b.build_events_and_entities(&events, &[]).unwrap();
        let report = b.build_activity_classes().unwrap();
        assert_eq!(report.node_counts.get("Class").copied().unwrap_or(0), classes);
        assert_eq!(report.edge_counts.get("OBSERVED").copied().unwrap_or(0), activities.len());
    }
}

#[test]
fn domains_from_mapping() {
    let config = BuildConfig::default();
    let events = [event("E1", 0, "ABG", "P1", "A1"), event("E2", 1, "MICRO", "P1", "A1")];
    let mut b = CekgBuilder::new(&config);
    b.build_events_and_entities(&events, &[]).unwrap();
    b.build_activity_classes().unwrap();
    let map = MappingTable::with_rows(
        MappingKind::ActivityToDomain,
        [("ABG", "Lab"), ("MICRO", "Lab"), ("XRAY", "Imaging")],
    );
    let report = b.build_domains(&map).unwrap();
    assert_eq!(report.node_counts.get("Domain"), Some(&1));
    assert_eq!(report.edge_counts.get("HAS_DOMAIN"), Some(&2));
    assert_eq!(report.warnings.len(), 1, "dead XRAY row warns");
    assert_eq!(report.warnings[0].step, Some(5));
    assert!(report.activities_without_domain.is_empty());
}

#[test]
fn domains_skipped_when_disabled() {
    let config = BuildConfig {
        include_domains: false,
        ..BuildConfig::default()
    };
    let mut b = CekgBuilder::new(&config);
    b.build_events_and_entities(&six_events(), &[]).unwrap();
    b.build_activity_classes().unwrap();
    let report = b.build_domains(&MappingTable::new(MappingKind::ActivityToDomain)).unwrap();
    assert!(report.warnings.is_empty());
    assert!(report.activities_without_domain.is_empty());
    assert!(b.graph().match_nodes(labels::DOMAIN, &[]).is_empty());
}

#[test]
fn unmapped_activity_is_listed() {
    let config = BuildConfig::default();
    let mut b = CekgBuilder::new(&config);
    b.build_events_and_entities(&six_events(), &[]).unwrap();
    b.build_activity_classes().unwrap();
    let map = MappingTable::with_rows(MappingKind::ActivityToDomain, [("ABG", "Lab")]);
    let report = b.build_domains(&map).unwrap();
    assert_eq!(report.activities_without_domain, vec!["CBC".to_owned(), "MICRO".to_owned()]);
}

fn terminology(icd: usize, concepts: usize, active_rels: usize, inactive_rels: usize) -> Terminology {
    let concepts: Vec<_> = (0..concepts)
        .map(|i| concept(&format!("{}", 100000 + i * 10 + 1), &format!("Concept {i}")))
        .collect();
    let mut relationships = Vec::new();
    for i in 0..active_rels + inactive_rels {
        relationships.push(SnomedRelationshipRecord {
            source_id: concepts[i % concepts.len()].concept_id.clone(),
            destination_id: concepts[(i + 1) % concepts.len()].concept_id.clone(),
            type_id: IS_A.into(),
            active: i < active_rels,
        });
    }
    Terminology {
        icd_codes: (0..icd)
            .map(|i| IcdCodeRecord {
                icd_code: format!("J4{i}.9"),
                title: format!("Code {i}"),
            })
            .collect(),
        concepts,
        relationships,
    }
}

#[test]
fn terminology_counts_skip_inactive_relationships() {
    let config = BuildConfig::default();
    let mut b = CekgBuilder::new(&config);
    let report = b.build_terminology_graph(&terminology(4, 10, 6, 1)).unwrap();
    assert_eq!(report.node_counts.get("ICDCode"), Some(&4));
    assert_eq!(report.node_counts.get("SNOMEDConcept"), Some(&10));
    assert_eq!(report.edge_counts.get("SCT_REL"), Some(&6));
    assert!(b
        .graph()
        .edges_of_type(edge_types::SCT_REL)
        .all(|e| e.text("type_id") == Some(IS_A)));
}

#[test]
fn concepts_without_relationships_are_isolated() {
    let config = BuildConfig::default();
    let mut b = CekgBuilder::new(&config);
    b.build_terminology_graph(&terminology(1, 3, 0, 0)).unwrap();
    assert_eq!(b.graph().edge_count(), 0);
    assert_eq!(b.graph().node_count(), 4);
}

/// Minimal inputs: one patient, one admission, J44.9 → COPD, ABG coded.
fn linked_inputs() -> BuildInputs {
    BuildInputs {
        events: vec![event("E1", 0, "ABG", "P1", "A1"), event("E2", 5, "ABG", "P1", "A1")],
        attributes: vec![],
        diagnoses: vec![DiagnosisRecord {
            patient_id: "P1".into(),
            admission_id: "A1".into(),
            icd_code: "J44.9".into(),
            seq_num: 1,
        }],
        terminology: Terminology {
            icd_codes: vec![IcdCodeRecord {
                icd_code: "J44.9".into(),
                title: "COPD, unspecified".into(),
            }],
            concepts: vec![
                concept("13645005", "Chronic obstructive lung disease (disorder)"),
                concept("91308007", "Analysis of arterial blood gases and pH"),
            ],
            relationships: vec![],
        },
        mappings: Mappings::from_tables([
            MappingTable::with_rows(MappingKind::IcdToSnomed, [("J44.9", "13645005")]),
            MappingTable::with_rows(MappingKind::ActivityToSnomed, [("ABG", "91308007")]),
        ]),
    }
}

#[test]
fn diagnosis_reaches_concept_through_icd_code() {
    let (g, report) = build_all(&linked_inputs(), &BuildConfig::default()).unwrap();
    let a1 = g.find_node(labels::ENTITY, "entity_id", "A1").unwrap();
    let diagnosed = g.adjacent(a1, edge_types::DIAGNOSED_AS, Direction::Out).unwrap();
    assert_eq!(diagnosed.len(), 1);
    let edge = g.edge(diagnosed[0].0).unwrap();
    assert_eq!(edge.get("seq_num"), Some(&PropertyValue::Integer(1)));
    assert_eq!(edge.text("patient_id"), Some("P1"));
    let mapped = g.adjacent(diagnosed[0].1, edge_types::MAPS_TO, Direction::Out).unwrap();
    assert_eq!(text(&g, mapped[0].1, "concept_id"), "13645005");
    assert!(report.unlinked_icd_codes.is_empty());
}

#[test]
fn class_display_becomes_fsn() {
    let (g, _) = build_all(&linked_inputs(), &BuildConfig::default()).unwrap();
    let class = g.find_node(labels::CLASS, "activity", "ABG").unwrap();
    assert_eq!(text(&g, class, "display"), "Analysis of arterial blood gases and pH");
    assert_eq!(g.adjacent(class, edge_types::CODED_AS, Direction::Out).unwrap().len(), 1);
}

#[test]
fn uncoded_class_keeps_activity_label() {
    let mut inputs = linked_inputs();
    inputs.mappings.activity_snomed = MappingTable::new(MappingKind::ActivityToSnomed);
    let (g, report) = build_all(&inputs, &BuildConfig::default()).unwrap();
    let class = g.find_node(labels::CLASS, "activity", "ABG").unwrap();
    assert_eq!(text(&g, class, "display"), "ABG");
    assert_eq!(report.unlinked_activities, vec!["ABG".to_owned()]);
}

#[test]
fn diagnosis_code_missing_from_icd_table() {
    let mut inputs = linked_inputs();
    inputs.diagnoses[0].icd_code = "J45.0".into();
    let err = build_all(&inputs, &BuildConfig::default()).unwrap_err();
    assert!(matches!(err.source, ConstructError::DiagnosisCodeNotInIcdTable { .. }));
    assert_eq!(err.step, 9);
    assert!(err.to_string().starts_with("step 9"));

    let lenient = BuildConfig {
        strict_linking: false,
        ..BuildConfig::default()
    };
    let (_, report) = build_all(&inputs, &lenient).unwrap();
    assert_eq!(report.unlinked_icd_codes, vec!["J45.0".to_owned()]);
    assert!(report.warnings.iter().any(|w| w.step == Some(9)));
}

#[test]
fn diagnosed_code_without_snomed_mapping() {
    let mut inputs = linked_inputs();
    inputs.mappings.icd_snomed = MappingTable::new(MappingKind::IcdToSnomed);
    let err = build_all(&inputs, &BuildConfig::default()).unwrap_err();
    assert_eq!(
        err.source,
        ConstructError::IcdCodeUnmappedToSnomed {
            icd_code: "J44.9".into()
        }
    );
}

#[test]
fn treats_target_must_be_a_concept() {
    let mut inputs = linked_inputs();
    inputs.mappings.activity_treats = MappingTable::with_rows(MappingKind::ActivityTreats, [("ABG", "999999001")]);
    let err = build_all(&inputs, &BuildConfig::default()).unwrap_err();
    assert_eq!(err.step, 13);
    assert!(matches!(err.source, ConstructError::TreatsTargetNotAConcept { .. }));
}

#[test]
fn sample_abg_event_links_two_disorders() {
    let (g, _) = build_all(&cekg::sample::inputs(), &BuildConfig::default()).unwrap();
    let abg = g
        .match_nodes(labels::CLASS, &[])
        .into_iter()
        .find(|c| g.node(*c).unwrap().text("display") == Some("Analysis of arterial blood gases and pH"))
        .unwrap();
    for (_, e) in g.adjacent(abg, edge_types::OBSERVED, Direction::In).unwrap() {
        let disorders: BTreeSet<&str> = g
            .adjacent(e, edge_types::CORR, Direction::Out)
            .unwrap()
            .into_iter()
            .map(|(_, n)| g.node(n).unwrap())
            .filter(|n| n.text("entity_type") == Some(entity_types::DISORDER))
            .map(|n| n.text("concept_id").unwrap())
            .collect();
        assert_eq!(disorders, BTreeSet::from(["1085006", "94181007"]));
    }
}

#[test]
fn empty_treats_map_leaves_disorders_uncorrelated() {
    let (g, _) = build_all(&linked_inputs(), &BuildConfig::default()).unwrap();
    let disorders = g.match_nodes(labels::ENTITY, &[("entity_type", "Disorder".into())]);
    assert_eq!(disorders.len(), 1);
    let d = g.node(disorders[0]).unwrap();
    assert_eq!(d.text("entity_id"), Some(disorder_entity_id("P1", "13645005").as_str()));
    assert_eq!(d.text("first_admission_id"), Some("A1"));
    assert!(g.adjacent(disorders[0], edge_types::CORR, Direction::In).unwrap().is_empty());
}

#[test]
fn disorders_are_keyed_per_patient() {
    let (g, _) = build_all(&cekg::sample::inputs(), &BuildConfig::default()).unwrap();
    let shared = g.match_nodes(
        labels::ENTITY,
        &[("entity_type", "Disorder".into()), ("concept_id", "1085006".into())],
    );
    let patients: BTreeSet<&str> = shared.iter().map(|d| text(&g, *d, "patient_id")).collect();
    assert_eq!(patients, BTreeSet::from(["P1", "P2"]));
}

#[test]
fn first_admission_follows_chronology_not_file_order() {
    let mut inputs = linked_inputs();
    inputs.events.push(event("E0", -60, "ABG", "P1", "A0"));
    inputs.diagnoses.push(DiagnosisRecord {
        patient_id: "P1".into(),
        admission_id: "A0".into(),
        icd_code: "J44.9".into(),
        seq_num: 1,
    });
    let (g, _) = build_all(&inputs, &BuildConfig::default()).unwrap();
    let d = g.find_node(labels::ENTITY, "entity_id", "P1:13645005").unwrap();
    assert_eq!(text(&g, d, "first_admission_id"), "A0");
}

fn df_of(g: &PropertyGraph, entity_id: &str) -> Vec<(String, String)> {
    let mut out: Vec<_> = g
        .edges_of_type(edge_types::DF)
        .filter(|e| e.text("entity_id") == Some(entity_id))
        .map(|e| (text(g, e.source, "event_id").to_owned(), text(g, e.target, "event_id").to_owned()))
        .collect();
    out.sort();
    out
}

#[test]
fn df_follows_timestamps() {
    let mut inputs = linked_inputs();
    inputs.events = vec![
        event("E3", 30, "ABG", "P1", "A1"),
        event("E1", 10, "ABG", "P1", "A1"),
        event("E2", 20, "ABG", "P1", "A1"),
    ];
    let (g, _) = build_all(&inputs, &BuildConfig::default()).unwrap();
    assert_eq!(
        df_of(&g, "A1"),
        vec![("E1".into(), "E2".into()), ("E2".into(), "E3".into())]
    );
    let df_a1: Vec<_> = g
        .edges_of_type(edge_types::DF)
        .filter(|e| e.text("entity_type") == Some("ADMISSION"))
        .collect();
    assert!(df_a1.iter().all(|e| e.text("entity_id") == Some("A1")));
}

#[test]
fn single_event_entity_has_no_df() {
    let mut inputs = linked_inputs();
    inputs.events.truncate(1);
    let (g, _) = build_all(&inputs, &BuildConfig::default()).unwrap();
    assert_eq!(g.edges_of_type(edge_types::DF).count(), 0);
}

#[test]
fn equal_timestamps_break_ties_by_event_id_text() {
    let mut inputs = linked_inputs();
    inputs.events = vec![event("E9", 0, "ABG", "P1", "A1"), event("E10", 0, "ABG", "P1", "A1")];
    let (g, _) = build_all(&inputs, &BuildConfig::default()).unwrap();
    assert_eq!(df_of(&g, "A1"), vec![("E10".into(), "E9".into())]);
}

#[test]
fn df_twice_is_rejected() {
    let inputs = linked_inputs();
    let config = BuildConfig::default();
    let mut b = CekgBuilder::new(&config);
    b.build_events_and_entities(&inputs.events, &[]).unwrap();
    b.build_activity_classes().unwrap();
    b.compute_df().unwrap();
    assert_eq!(b.compute_df().unwrap_err().source, ConstructError::DfAlreadyComputed);
}

#[test]
fn df_restricted_to_configured_types() {
    let config = BuildConfig {
        df_entity_types: Some(BTreeSet::from(["ADMISSION".to_owned()])),
        ..BuildConfig::default()
    };
    let (g, _) = build_all(&cekg::sample::inputs(), &config).unwrap();
    let types: BTreeSet<&str> = g.edges_of_type(edge_types::DF).filter_map(|e| e.text("entity_type")).collect();
    assert_eq!(types, BTreeSet::from(["ADMISSION"]));
    assert_eq!(g.metadata().get("df_entity_types").map(String::as_str), Some("ADMISSION"));

    let bad = BuildConfig {
        df_entity_types: Some(BTreeSet::from(["WARD".to_owned()])),
        ..BuildConfig::default()
    };
    let err = build_all(&cekg::sample::inputs(), &bad).unwrap_err();
    assert_eq!(err.step, 14);
    assert!(matches!(err.source, ConstructError::InvalidDfEntityType { .. }));
}

#[test]
fn disorder_df_requires_reification() {
    let config = BuildConfig {
        reify_disorders: false,
        df_entity_types: Some(BTreeSet::from(["Disorder".to_owned()])),
        ..BuildConfig::default()
    };
    let err = build_all(&cekg::sample::inputs(), &config).unwrap_err();
    assert!(matches!(err.source, ConstructError::InvalidDfEntityType { .. }));
}

#[test]
fn sample_has_three_entity_types() {
    let (g, report) = build_all(&cekg::sample::inputs(), &BuildConfig::default()).unwrap();
    assert_eq!(
        entity_types_of(&g),
        BTreeSet::from(["ADMISSION".to_owned(), "Disorder".to_owned(), "PATIENT".to_owned()])
    );
    assert!(g.is_frozen());
    assert!(report.warnings.is_empty());
    assert_eq!(report.node_counts, g.label_counts());
    assert_eq!(report.edge_counts, g.edge_type_counts());
}

#[test]
fn sample_without_reification_has_two_entity_types() {
    let config = BuildConfig {
        reify_disorders: false,
        ..BuildConfig::default()
    };
    let (g, _) = build_all(&cekg::sample::inputs(), &config).unwrap();
    assert_eq!(
        entity_types_of(&g),
        BTreeSet::from(["ADMISSION".to_owned(), "PATIENT".to_owned()])
    );
}

#[test]
fn rebuilds_export_identically() {
    let build = || build_all(&cekg::sample::inputs(), &BuildConfig::default()).unwrap().0;
    let (a, b) = (build(), build());
    let (sa, sb) = (StyleMap::for_graph(&a), StyleMap::for_graph(&b));
    assert_eq!(emit_graphml(&ExportTarget::Cekg(&a, &sa)), emit_graphml(&ExportTarget::Cekg(&b, &sb)));
    assert_eq!(emit_query_script(&a), emit_query_script(&b));
}

#[test]
fn frozen_graph_rejects_mutation() {
    let (mut g, _) = build_all(&linked_inputs(), &BuildConfig::default()).unwrap();
    let err = g.add_node([labels::EVENT], Default::default()).unwrap_err();
    assert_eq!(err, cekg::graph::GraphError::Frozen);
}
