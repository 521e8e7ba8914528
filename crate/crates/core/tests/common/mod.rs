//! Random log generation and record-level oracles shared by the property
//! tests and the acceptance suite. Nothing here reads the graph except the
//! structural checks at the bottom.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cekg::construct::{BuildInputs, Mappings};
use cekg::graph::{edge_types, labels, Direction, PropertyGraph};
use cekg::ingest::{
    DiagnosisRecord, EventRecord, IcdCodeRecord, MappingKind, MappingTable, SnomedConceptRecord,
    SnomedRelationshipRecord, Terminology, IS_A,
};

pub const ACTIVITIES: [&str; 4] = ["ABG", "MICRO", "CBC", "XRAY"];
const ACTIVITY_CONCEPTS: [&str; 4] = ["91308007", "19851009", "26604007", "399208008"];
const DISORDERS: [&str; 4] = ["1085006", "94181007", "84114007", "44054006"];
const ICD: [&str; 5] = ["B37.3", "J18.9", "I50.9", "E11.9", "J44.9"];
/// ICD code index → disorder index. Two codes share a concept.
const ICD_TO_DISORDER: [usize; 5] = [0, 1, 2, 3, 1];

/// Shape limits of a generated log.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_events: usize,
    pub max_patients: usize,
    pub max_admissions: usize,
    pub max_disorders: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_events: 20,
            max_patients: 4,
            max_admissions: 4,
            max_disorders: 4,
        }
    }
}

fn terminology() -> Terminology {
    let mut concepts: Vec<SnomedConceptRecord> = DISORDERS
        .iter()
        .chain(ACTIVITY_CONCEPTS.iter())
        .map(|c| SnomedConceptRecord {
            concept_id: (*c).to_owned(),
            fsn: format!("Concept {c}"),
            active: true,
        })
        .collect();
    concepts.push(SnomedConceptRecord {
        concept_id: "64572001".into(),
        fsn: "Disease (disorder)".into(),
        active: true,
    });
    let relationships = DISORDERS
        .iter()
        .map(|d| SnomedRelationshipRecord {
            source_id: (*d).to_owned(),
            destination_id: "64572001".into(),
            type_id: IS_A.into(),
            active: true,
        })
        .collect();
    Terminology {
        icd_codes: ICD
            .iter()
            .map(|c| IcdCodeRecord {
                icd_code: (*c).to_owned(),
                title: format!("Title {c}"),
            })
            .collect(),
        concepts,
        relationships,
    }
}

/// A random but referentially valid set of build inputs. Event ids are
/// unpadded (`E10` sorts before `E9`) and timestamps collide often, so
/// tie-breaking is exercised.
pub fn random_inputs(seed: u64, shape: Shape) -> BuildInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_patients = rng.gen_range(1..=shape.max_patients);
    let n_admissions = rng.gen_range(n_patients..=shape.max_admissions.max(n_patients));
    // admission index → patient index; the first n_patients admissions
    // cover every patient once
    let owner: Vec<usize> = (0..n_admissions)
        .map(|a| if a < n_patients { a } else { rng.gen_range(0..n_patients) })
        .collect();
    let n_events = rng.gen_range(0..=shape.max_events);
    let n_activities = rng.gen_range(1..=ACTIVITIES.len());
    let base = Utc.with_ymd_and_hms(2150, 3, 1, 8, 0, 0).single().expect("valid date");
    let spread = rng.gen_range(1..=30);
    let events: Vec<EventRecord> = (0..n_events)
        .map(|i| {
            let a = rng.gen_range(0..n_admissions);
            EventRecord {
                event_id: format!("E{}", i + 1),
                timestamp: base + Duration::minutes(rng.gen_range(0..spread)),
                activity: ACTIVITIES[rng.gen_range(0..n_activities)].to_owned(),
                patient_id: format!("P{}", owner[a] + 1),
                admission_id: format!("A{}", a + 1),
                extra: BTreeMap::new(),
            }
        })
        .collect();

    let with_events: BTreeSet<(String, String)> = events
        .iter()
        .map(|e| (e.patient_id.clone(), e.admission_id.clone()))
        .collect();
    let mut diagnoses = Vec::new();
    let mut disorders: BTreeSet<(String, usize)> = BTreeSet::new();
    for (patient, admission) in &with_events {
        let mut codes: Vec<usize> = (0..ICD.len()).collect();
        codes.shuffle(&mut rng);
        codes.truncate(rng.gen_range(0..=3));
        let mut seq = 0;
        for code in codes {
            let key = (patient.clone(), ICD_TO_DISORDER[code]);
            if !disorders.contains(&key) && disorders.len() >= shape.max_disorders {
                continue;
            }
            disorders.insert(key);
            seq += 1;
            diagnoses.push(DiagnosisRecord {
                patient_id: patient.clone(),
                admission_id: admission.clone(),
                icd_code: ICD[code].to_owned(),
                seq_num: seq,
            });
        }
    }

    let mut treats = Vec::new();
    for activity in &ACTIVITIES[..n_activities] {
        for disorder in DISORDERS {
            if rng.gen_bool(0.3) {
                treats.push(((*activity).to_owned(), disorder.to_owned()));
            }
        }
    }
    let mappings = Mappings::from_tables([
        MappingTable::with_rows(
            MappingKind::IcdToSnomed,
            ICD.iter().zip(ICD_TO_DISORDER).map(|(c, d)| ((*c).to_owned(), DISORDERS[d].to_owned())),
        ),
        MappingTable::with_rows(
            MappingKind::ActivityToSnomed,
            ACTIVITIES[..n_activities]
                .iter()
                .zip(ACTIVITY_CONCEPTS)
                .map(|(a, c)| ((*a).to_owned(), c.to_owned())),
        ),
        MappingTable::with_rows(
            MappingKind::ActivityToDomain,
            ACTIVITIES[..n_activities]
                .iter()
                .map(|a| ((*a).to_owned(), if *a == "XRAY" { "Imaging" } else { "Laboratory" }.to_owned())),
        ),
        MappingTable::with_rows(MappingKind::ActivityTreats, treats),
    ]);
    BuildInputs {
        events,
        attributes: Vec::new(),
        diagnoses,
        terminology: terminology(),
        mappings,
    }
}

/// Concept of an ICD code according to the icd→snomed table.
fn concepts_of<'a>(inputs: &'a BuildInputs, icd: &'a str) -> impl Iterator<Item = &'a str> + 'a {
    inputs.mappings.get(MappingKind::IcdToSnomed).targets(icd)
}

/// (patient, concept) pairs diagnosed anywhere in the inputs.
pub fn diagnosed_disorders(inputs: &BuildInputs) -> BTreeSet<(String, String)> {
    inputs
        .diagnoses
        .iter()
        .flat_map(|d| concepts_of(inputs, &d.icd_code).map(move |c| (d.patient_id.clone(), c.to_owned())))
        .collect()
}

/// Entity id → its events, for one entity type, straight from the records.
pub fn entity_events<'a>(inputs: &'a BuildInputs, entity_type: &str) -> BTreeMap<String, Vec<&'a EventRecord>> {
    let mut groups: BTreeMap<String, Vec<&EventRecord>> = BTreeMap::new();
    match entity_type {
        "PATIENT" => {
            for e in &inputs.events {
                groups.entry(e.patient_id.clone()).or_default().push(e);
            }
        }
        "ADMISSION" => {
            for e in &inputs.events {
                groups.entry(e.admission_id.clone()).or_default().push(e);
            }
        }
        "Disorder" => {
            let treats = inputs.mappings.get(MappingKind::ActivityTreats);
            for (patient, concept) in diagnosed_disorders(inputs) {
                let list = groups.entry(format!("{patient}:{concept}")).or_default();
                for e in &inputs.events {
                    if e.patient_id == patient && treats.targets(&e.activity).any(|t| t == concept) {
                        list.push(e);
                    }
                }
            }
        }
        other => panic!("unknown entity type {other}"),
    }
    for list in groups.values_mut() {
        list.sort_by(|a, b| (a.timestamp, &a.event_id).cmp(&(b.timestamp, &b.event_id)));
    }
    groups
}

/// Directly-follows pairs (source event, target event, entity id).
pub fn df_pairs(inputs: &BuildInputs, entity_type: &str) -> BTreeSet<(String, String, String)> {
    let mut out = BTreeSet::new();
    for (entity, list) in entity_events(inputs, entity_type) {
        for w in list.windows(2) {
            out.insert((w[0].event_id.clone(), w[1].event_id.clone(), entity.clone()));
        }
    }
    out
}

fn patient_of_entity<'a>(inputs: &'a BuildInputs, entity_type: &str, entity_id: &'a str) -> &'a str {
    match entity_type {
        "PATIENT" => entity_id,
        "ADMISSION" => inputs
            .events
            .iter()
            .find(|e| e.admission_id == entity_id)
            .map(|e| e.patient_id.as_str())
            .expect("admission has events"),
        _ => entity_id.split(':').next().expect("disorder id has a patient prefix"),
    }
}

/// Class-pair DF counts, optionally split by disorder concept. Brute
/// force over sorted event lists.
pub fn class_pair_counts(
    inputs: &BuildInputs,
    entity_type: &str,
    patients: &BTreeSet<String>,
    per_disorder: bool,
) -> BTreeMap<(String, String, Option<String>), u64> {
    let mut counts = BTreeMap::new();
    for (entity, list) in entity_events(inputs, entity_type) {
        if !patients.contains(patient_of_entity(inputs, entity_type, &entity)) {
            continue;
        }
        let concept = per_disorder.then(|| entity.split(':').nth(1).unwrap_or_default().to_owned());
        for w in list.windows(2) {
            *counts
                .entry((w[0].activity.clone(), w[1].activity.clone(), concept.clone()))
                .or_insert(0) += 1;
        }
    }
    counts
}

pub fn all_patients(inputs: &BuildInputs) -> BTreeSet<String> {
    inputs.events.iter().map(|e| e.patient_id.clone()).collect()
}

/// Patients whose diagnosed concept set equals `set`.
pub fn multimorbidity_cohort(inputs: &BuildInputs, set: &BTreeSet<String>) -> BTreeSet<String> {
    let mut per_patient: BTreeMap<String, BTreeSet<String>> =
        all_patients(inputs).into_iter().map(|p| (p, BTreeSet::new())).collect();
    for (p, c) in diagnosed_disorders(inputs) {
        per_patient.entry(p).or_default().insert(c);
    }
    per_patient.into_iter().filter(|(_, s)| s == set).map(|(p, _)| p).collect()
}

/// (patient, admission, concept, newly_discovered, treated), computed
/// from the definitions alone.
pub fn status_oracle(inputs: &BuildInputs) -> Vec<(String, String, String, bool, bool)> {
    let treats = inputs.mappings.get(MappingKind::ActivityTreats);
    let mut admissions: BTreeMap<String, BTreeMap<String, chrono::DateTime<Utc>>> = BTreeMap::new();
    for e in &inputs.events {
        let first = admissions
            .entry(e.patient_id.clone())
            .or_default()
            .entry(e.admission_id.clone())
            .or_insert(e.timestamp);
        *first = (*first).min(e.timestamp);
    }
    let mut rows = Vec::new();
    for (patient, map) in admissions {
        let mut order: Vec<(chrono::DateTime<Utc>, String)> = map.into_iter().map(|(a, t)| (t, a)).collect();
        order.sort();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for (_, admission) in order {
            let here: BTreeSet<String> = inputs
                .diagnoses
                .iter()
                .filter(|d| d.patient_id == patient && d.admission_id == admission)
                .flat_map(|d| concepts_of(inputs, &d.icd_code).map(str::to_owned))
                .collect();
            let previously = seen.clone();
            seen.extend(here.iter().cloned());
            for concept in &seen {
                let treated = inputs.events.iter().any(|e| {
                    e.admission_id == admission && treats.targets(&e.activity).any(|t| t == concept)
                });
                rows.push((
                    patient.clone(),
                    admission.clone(),
                    concept.clone(),
                    !previously.contains(concept),
                    treated,
                ));
            }
        }
    }
    rows
}

/// Violations of the DF path, locality and monotonicity properties.
pub fn df_violations(graph: &PropertyGraph) -> Vec<String> {
    let mut problems = Vec::new();
    for entity in graph.match_nodes(labels::ENTITY, &[]) {
        let node = graph.node(entity).expect("entity exists");
        let (Some(etype), Some(eid)) = (node.text("entity_type"), node.text("entity_id")) else {
            problems.push(format!("entity {entity} lacks type or id"));
            continue;
        };
        let events: BTreeSet<_> = graph
            .adjacent(entity, edge_types::CORR, Direction::In)
            .expect("entity exists")
            .into_iter()
            .map(|(_, e)| e)
            .collect();
        let df: Vec<_> = graph
            .edges_of_type(edge_types::DF)
            .filter(|e| e.text("entity_type") == Some(etype) && e.text("entity_id") == Some(eid))
            .collect();
        if events.is_empty() {
            if !df.is_empty() {
                problems.push(format!("{etype} {eid}: DF edges without events"));
            }
            continue;
        }
        if df.len() != events.len() - 1 {
            problems.push(format!("{etype} {eid}: {} DF edges for {} events", df.len(), events.len()));
            continue;
        }
        let mut next = BTreeMap::new();
        let mut has_pred = BTreeSet::new();
        for e in &df {
            if !events.contains(&e.source) || !events.contains(&e.target) {
                problems.push(format!("{etype} {eid}: DF edge {} leaves the entity", e.id));
            }
            let ts = |n| graph.node(n).and_then(|n| n.get("timestamp")).and_then(|v| v.as_timestamp());
            if ts(e.source) > ts(e.target) {
                problems.push(format!("{etype} {eid}: DF edge {} goes back in time", e.id));
            }
            if next.insert(e.source, e.target).is_some() || !has_pred.insert(e.target) {
                problems.push(format!("{etype} {eid}: DF edges branch"));
            }
        }
        let starts: Vec<_> = events.iter().filter(|e| !has_pred.contains(e)).collect();
        if starts.len() != 1 {
            problems.push(format!("{etype} {eid}: {} path starts", starts.len()));
            continue;
        }
        let mut visited = BTreeSet::from([*starts[0]]);
        let mut at = *starts[0];
        while let Some(n) = next.get(&at) {
            if !visited.insert(*n) {
                problems.push(format!("{etype} {eid}: DF cycle"));
                break;
            }
            at = *n;
        }
        if visited != events {
            problems.push(format!("{etype} {eid}: DF path misses events"));
        }
    }
    problems
}

/// DF edges of the graph as (source event id, target event id, entity id).
pub fn graph_df_pairs(graph: &PropertyGraph, entity_type: &str) -> BTreeSet<(String, String, String)> {
    let event_id = |n| graph.node(n).and_then(|n| n.text("event_id")).unwrap_or_default().to_owned();
    graph
        .edges_of_type(edge_types::DF)
        .filter(|e| e.text("entity_type") == Some(entity_type))
        .map(|e| (event_id(e.source), event_id(e.target), e.text("entity_id").unwrap_or_default().to_owned()))
        .collect()
}
