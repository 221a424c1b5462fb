use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use proptest::prelude::*;

use lexalign_core::config::MergeConfig;
use lexalign_core::hiermatch::load_seeds;
use lexalign_core::ingest::{
    monolingual_bytes, parse_bilingual, parse_monolingual, read_monolingual, FieldCodeInventory, StemmerRules,
};
use lexalign_core::lexmodel::{Match, Phase, Resource, Sense, SenseId, GENUS, HYPERNYM};
use lexalign_core::pipeline::{
    self, export_ontology, load_run, remove_matched, run_merge, write_run, MergeInputs, PipelineError,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture_inputs() -> MergeInputs {
    let left = parse_monolingual(&fixtures().join("ldoce-fixture.jsonl")).unwrap();
    let right = parse_monolingual(&fixtures().join("wn-fixture.jsonl")).unwrap();
    let seeds = load_seeds(&fixtures().join("seeds.jsonl"), &left, &right).unwrap();
    MergeInputs {
        left,
        right,
        seeds,
        bilingual: None,
        table: None,
    }
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != pipeline::TIMING)
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn rerun_is_byte_identical() {
    let config = MergeConfig::load(&fixtures().join("merge.toml")).unwrap();
    let rules = StemmerRules::shipped();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_run(&run_merge(fixture_inputs(), &rules, &config).unwrap(), a.path(), false).unwrap();
    write_run(&run_merge(fixture_inputs(), &rules, &config).unwrap(), b.path(), false).unwrap();
    let (x, y) = (dir_contents(a.path()), dir_contents(b.path()));
    assert!(x.contains_key(pipeline::MANIFEST));
    assert!(x.contains_key(pipeline::HIERMATCH_STATS));
    assert_eq!(x, y);
    assert!(a.path().join(pipeline::TIMING).exists());
}

#[test]
fn run_directory_round_trips() {
    let config = MergeConfig::default();
    let run = run_merge(fixture_inputs(), &StemmerRules::shipped(), &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(&run, dir.path(), false).unwrap();
    let loaded = load_run(dir.path()).unwrap();
    assert_eq!(loaded.manifest, run.manifest);
    assert_eq!(loaded.hiermatch, run.hier.m3.as_slice());
    assert_eq!(loaded.defmatch, run.defmatch.matches.as_slice());
    assert_eq!(loaded.evidence, run.defmatch.evidence);
    assert_eq!(monolingual_bytes(&loaded.left), monolingual_bytes(&run.left));

    let line = std::fs::read_to_string(dir.path().join(pipeline::HIERMATCH)).unwrap();
    assert!(line.lines().all(|l| l.starts_with("{\"schema_version\":1,")));
}

#[test]
fn changed_inputs_are_refused() {
    let config = MergeConfig::default();
    let rules = StemmerRules::shipped();
    let dir = tempfile::tempdir().unwrap();
    write_run(
        &run_merge(fixture_inputs(), &rules, &config).unwrap(),
        dir.path(),
        false,
    )
    .unwrap();

    let mut inputs = fixture_inputs();
    inputs.seeds.pop();
    let changed = run_merge(inputs, &rules, &config).unwrap();
    let err = write_run(&changed, dir.path(), false).unwrap_err();
    assert!(matches!(err, PipelineError::DigestMismatch { .. }), "{err}");
    write_run(&changed, dir.path(), true).unwrap();
}

#[test]
fn tampered_snapshot_is_detected() {
    let run = run_merge(fixture_inputs(), &StemmerRules::shipped(), &MergeConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(&run, dir.path(), false).unwrap();
    let path = dir.path().join(pipeline::LEFT);
    let text = std::fs::read_to_string(&path).unwrap().replace("flour", "sugar");
    std::fs::write(&path, text).unwrap();
    assert!(matches!(
        load_run(dir.path()),
        Err(PipelineError::DigestMismatch { .. })
    ));
}

#[test]
fn bilingual_stage_writes_table_and_mappings() {
    let dir = fixtures().join("banco");
    let onto = parse_monolingual(&dir.join("onto-fixture.jsonl")).unwrap();
    let dict = parse_bilingual(&dir.join("es-en.jsonl"), &FieldCodeInventory::shipped()).unwrap();
    let left = Resource::new("nothing", vec![]).unwrap();
    let inputs = MergeInputs {
        left,
        right: onto,
        seeds: vec![],
        bilingual: Some(dict),
        table: None,
    };
    let run = run_merge(inputs, &StemmerRules::shipped(), &MergeConfig::default()).unwrap();
    assert!(run.bimatch.iter().any(|m| m.phase == Phase::FieldCode));
    let out = tempfile::tempdir().unwrap();
    write_run(&run, out.path(), false).unwrap();
    let table = std::fs::read_to_string(out.path().join(pipeline::FIELD_TABLE)).unwrap();
    assert!(table.starts_with("bilingual_code\tmono_code\tcount\tsurviving\n"));
    let loaded = load_run(out.path()).unwrap();
    assert_eq!(loaded.bimatch, run.bimatch);
    assert!(loaded.bilingual.is_some());
}

#[test]
fn empty_seeds_and_no_shared_unambiguous_words_reduce_to_defmatch() {
    let left = parse_monolingual(&fixtures().join("ldoce-fixture.jsonl")).unwrap();
    let right = parse_monolingual(&fixtures().join("wn-fixture.jsonl")).unwrap();
    // keep only words that are ambiguous on at least one side
    let keep = |r: &Resource| -> Vec<Sense> {
        r.senses()
            .filter(|s| ["batter", "seal", "plant", "tree"].contains(&s.word()))
            .map(|s| {
                let mut s = s.clone();
                s.genus.clear();
                s.hypernyms.clear();
                s
            })
            .collect()
    };
    let left = Resource::new("ldoce-fixture", keep(&left)).unwrap();
    let right = Resource::new("wn-fixture", keep(&right)).unwrap();
    let rules = StemmerRules::shipped();
    let params = MergeConfig::default();
    let plain = lexalign_core::defmatch::run_definition_match(&left, &right, None, &rules, &params.defmatch);
    let inputs = MergeInputs {
        left,
        right,
        seeds: vec![],
        bilingual: None,
        table: None,
    };
    let run = run_merge(inputs, &rules, &params).unwrap();
    assert!(run.hier.m3.is_empty());
    assert_eq!(run.defmatch.matches.as_slice(), plain.matches.as_slice());
}

// ---------------------------------------------------------------------------
// Properties over generated resources

fn arb_resource(name: &'static str) -> impl Strategy<Value = Resource> {
    let words = prop::sample::select(vec!["bank", "seal", "dive", "swan dive", "café", "plant"]);
    prop::collection::vec(
        (words, 0u32..3, 1u32..4, prop::option::of(0usize..20), "[a-z ]{0,30}"),
        0..20,
    )
    .prop_map(move |raw| {
        let mut senses: Vec<Sense> = Vec::new();
        let mut seen = BTreeSet::new();
        for (word, h, s, parent, def) in raw {
            let id = SenseId::new(name, word, h, s);
            if !seen.insert(id.clone()) {
                continue;
            }
            let mut sense = Sense::new(id, "n", def.trim());
            // links only point at earlier senses, so there are no cycles
            if let Some(p) = parent.filter(|p| *p < senses.len()) {
                sense.genus.push(senses[p].id.clone());
                sense.hypernyms.push(senses[p].id.clone());
            }
            if s == 2 {
                sense.synset = Some(format!("{word}.n.01"));
            }
            senses.push(sense);
        }
        Resource::new(name, senses).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialization_round_trips(resource in arb_resource("res")) {
        let bytes = monolingual_bytes(&resource);
        let back = read_monolingual(bytes.as_slice(), "res").unwrap();
        prop_assert_eq!(monolingual_bytes(&back), bytes);
    }

    #[test]
    fn removal_partitions_senses(resource in arb_resource("res"), pick in prop::collection::vec(any::<bool>(), 20)) {
        let all: Vec<SenseId> = resource.senses().map(|s| s.id.clone()).collect();
        let removed: Vec<SenseId> = all.iter().zip(pick.iter().cycle()).filter(|(_, p)| **p).map(|(id, _)| id.clone()).collect();
        let view = remove_matched(&resource, removed.clone()).unwrap();
        let kept: BTreeSet<SenseId> = view.senses().map(|s| s.id.clone()).collect();
        let removed: BTreeSet<SenseId> = removed.into_iter().collect();
        prop_assert!(kept.is_disjoint(&removed));
        let union: BTreeSet<SenseId> = kept.union(&removed).cloned().collect();
        prop_assert_eq!(union, all.into_iter().collect::<BTreeSet<_>>());
        for word in view.words() {
            for s in view.senses_of_word(word) {
                prop_assert!(!removed.contains(&s.id));
            }
        }
        // hierarchy queries still see through hidden senses
        for id in &kept {
            prop_assert_eq!(view.ancestors(GENUS, id).unwrap(), resource.ancestors(GENUS, id).unwrap());
        }
    }

    #[test]
    fn export_is_acyclic(left in arb_resource("l"), right in arb_resource("r"), picks in prop::collection::vec((0usize..20, 0usize..20), 0..10)) {
        let ls: Vec<SenseId> = left.senses().map(|s| s.id.clone()).collect();
        let rs: Vec<SenseId> = right.senses().map(|s| s.id.clone()).collect();
        let mut matches = Vec::new();
        if !ls.is_empty() && !rs.is_empty() {
            for (a, b) in picks {
                matches.push(Match::new(ls[a % ls.len()].clone(), rs[b % rs.len()].clone(), 1.0, Phase::Seed).unwrap());
            }
        }
        let nodes = export_ontology(&left, &right, &matches, false, GENUS, HYPERNYM).unwrap();
        let graph: BTreeMap<&str, Vec<&str>> = nodes.iter().map(|n| (n.concept.as_str(), n.parents.iter().map(String::as_str).collect())).collect();
        // Kahn's algorithm consumes every node exactly when there is no cycle
        let mut indegree: BTreeMap<&str, usize> = graph.keys().map(|k| (*k, 0)).collect();
        for ps in graph.values() {
            for p in ps {
                *indegree.entry(p).or_default() += 1;
            }
        }
        let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
        let mut seen = 0;
        while let Some(n) = ready.pop() {
            seen += 1;
            for p in graph.get(n).into_iter().flatten() {
                let d = indegree.get_mut(p).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(p);
                }
            }
        }
        prop_assert_eq!(seen, indegree.len());
        for n in &nodes {
            prop_assert!(n.names.len() <= 2);
        }
    }
}
