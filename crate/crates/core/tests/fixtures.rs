use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use lexalign_core::bimatch::{build_field_code_table, run_bilingual_match, BiParams, Concept};
use lexalign_core::config::MergeConfig;
use lexalign_core::defmatch::{run_definition_match, similarity, DefMatchParams};
use lexalign_core::hiermatch::{load_seeds, run_hierarchy_match, HierParams, Step};
use lexalign_core::ingest::{parse_bilingual, parse_monolingual, FieldCodeInventory, StemmerRules};
use lexalign_core::lexmodel::{Phase, Resource, SenseId, GENUS, HYPERNYM};
use lexalign_core::pipeline::{detect_inconsistencies, export_ontology, run_merge, InconsistencyKind, MergeInputs};
use lexalign_core::store;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load(name: &str) -> Resource {
    parse_monolingual(&fixtures().join(name)).unwrap()
}

fn ld(word: &str, h: u32, s: u32) -> SenseId {
    SenseId::new("ldoce-fixture", word, h, s)
}

fn wn(word: &str, s: u32) -> SenseId {
    SenseId::new("wn-fixture", word, 0, s)
}

fn pairs<'a>(matches: impl IntoIterator<Item = &'a lexalign_core::lexmodel::Match>) -> BTreeSet<(SenseId, SenseId)> {
    matches.into_iter().map(|m| (m.left.clone(), m.right.clone())).collect()
}

#[test]
fn batter_definitions_pair_up() {
    let (left, right) = (load("ldoce-fixture.jsonl"), load("wn-fixture.jsonl"));
    let rules = StemmerRules::shipped();
    let words = ["batter".to_string()];
    let out = run_definition_match(&left, &right, Some(&words), &rules, &DefMatchParams::default());
    assert_eq!(
        pairs(&out.matches),
        BTreeSet::from([
            (ld("batter", 2, 0), wn("batter", 2)),
            (ld("batter", 3, 0), wn("batter", 1))
        ])
    );
    for m in &out.matches {
        assert!(m.confidence >= 0.8, "{m:?}");
        assert_eq!(m.phase, Phase::Defmatch);
    }
}

#[test]
fn batter_similarity_values() {
    let (left, right) = (load("ldoce-fixture.jsonl"), load("wn-fixture.jsonl"));
    let sim = similarity(
        "batter",
        &left,
        &right,
        &StemmerRules::shipped(),
        &DefMatchParams::default(),
    )
    .unwrap();
    let stems: Vec<&str> = sim.context.stems.iter().map(String::as_str).collect();
    assert_eq!(stems, ["baseball", "batsman", "flour", "mixture"]);
    // each row scores two present stems at W 1.0 and 0.8 against its partner
    let strong = 1.0 + 0.8 + 2.0 * 0.01 * 0.01;
    let weak = 2.0 * 0.01 + 0.01 * 0.8 + 0.01;
    let v = |l, r| sim.value(&l, &r).unwrap();
    assert!((v(ld("batter", 2, 0), wn("batter", 2)) - strong).abs() < 1e-12);
    assert!((v(ld("batter", 3, 0), wn("batter", 1)) - strong).abs() < 1e-12);
    assert!((v(ld("batter", 2, 0), wn("batter", 1)) - weak).abs() < 1e-12);
    assert!((v(ld("batter", 3, 0), wn("batter", 2)) - weak).abs() < 1e-12);
}

#[test]
fn hierarchy_match_walkthrough() {
    let (left, right) = (load("ldoce-fixture.jsonl"), load("wn-fixture.jsonl"));
    let seeds = load_seeds(&fixtures().join("seeds.jsonl"), &left, &right).unwrap();
    let out = run_hierarchy_match(&left, &right, &seeds, &HierParams::default()).unwrap();
    let found: Vec<_> = out
        .m3
        .iter()
        .map(|m| (m.left.clone(), m.right.clone(), m.phase))
        .collect();

    let expect = [
        (ld("seal", 1, 1), wn("seal", 7), Phase::LocalUnambiguous),
        (ld("bat", 2, 1), wn("bat", 1), Phase::LocalUnambiguous),
        (ld("tree", 0, 1), wn("tree", 1), Phase::LocalUnambiguous),
        (ld("dive", 2, 1), wn("dive", 3), Phase::AncestorScan),
        (ld("bat", 1, 1), wn("bat", 2), Phase::LocalUnambiguous),
        (ld("jump", 2, 1), wn("jump", 1), Phase::Unambiguous),
        (ld("stick", 1, 1), wn("stick", 1), Phase::Unambiguous),
        (ld("swan dive", 0, 0), wn("swan dive", 1), Phase::Unambiguous),
        (ld("animal", 1, 2), wn("animal", 1), Phase::Seed),
    ];
    for e in &expect {
        assert!(found.contains(e), "missing {e:?} in {found:?}");
    }
    assert_eq!(out.m3.len(), 11);
    // the swan dive seed repeats an unambiguous match
    assert_eq!(out.warnings.len(), 1);

    let lefts: BTreeSet<_> = out.m3.iter().map(|m| &m.left).collect();
    let rights: BTreeSet<_> = out.m3.iter().map(|m| &m.right).collect();
    assert_eq!(lefts.len(), out.m3.len());
    assert_eq!(rights.len(), out.m3.len());

    let steps: Vec<(&str, usize)> = out.stats.iter().map(|s| (s.step.label(), s.proposed)).collect();
    assert_eq!(
        steps,
        [
            ("1(a)", 3),
            ("1(b)", 3),
            ("2(a)", 3),
            ("2(c)", 1),
            ("2(a)", 1),
            ("2(c)", 0),
            ("2(a)", 0),
            ("2(c)", 0)
        ]
    );
    assert_eq!(out.iterations, 3);
    assert!(out.stats.iter().any(|s| s.step == Step::Ancestors && s.proposed == 1));
}

#[test]
fn hierarchy_match_without_seeds_finds_only_unambiguous_chain() {
    let (left, right) = (load("ldoce-fixture.jsonl"), load("wn-fixture.jsonl"));
    let out = run_hierarchy_match(&left, &right, &[], &HierParams::default()).unwrap();
    let got = pairs(&out.m3);
    assert!(got.contains(&(ld("dive", 2, 1), wn("dive", 3))));
    assert!(got.contains(&(ld("bat", 1, 1), wn("bat", 2))));
    assert!(!got.iter().any(|(l, _)| l.word == "seal"));
}

#[test]
fn hierarchy_match_is_idempotent_on_its_output() {
    let (left, right) = (load("ldoce-fixture.jsonl"), load("wn-fixture.jsonl"));
    let seeds = load_seeds(&fixtures().join("seeds.jsonl"), &left, &right).unwrap();
    let first = run_hierarchy_match(&left, &right, &seeds, &HierParams::default()).unwrap();
    let again = run_hierarchy_match(&left, &right, first.m3.as_slice(), &HierParams::default()).unwrap();
    assert_eq!(pairs(&first.m3), pairs(&again.m3));
}

#[test]
fn savings_bank_error_is_flagged_once() {
    let dir = fixtures().join("savings-bank");
    let left = parse_monolingual(&dir.join("ldoce-bank.jsonl")).unwrap();
    let right = parse_monolingual(&dir.join("wn-bank.jsonl")).unwrap();
    let verified = store::read_matches(&dir.join("verified.jsonl")).unwrap();
    let found = detect_inconsistencies(&left, &right, &verified, GENUS, HYPERNYM).unwrap();
    assert_eq!(found.len(), 1, "{found:?}");
    let only = &found[0];
    assert_eq!(only.kind, InconsistencyKind::DivergentAncestry);
    assert_eq!(only.left.word, "savings bank");
    assert_eq!(only.left_parent.as_ref().unwrap().to_string(), "ldoce-bank:bank:1:1");
    assert_eq!(only.right_parent.as_ref().unwrap().to_string(), "wn-bank:bank:0:2");
}

#[test]
fn savings_bank_hierarchy_match_inherits_the_bad_genus() {
    let dir = fixtures().join("savings-bank");
    let left = parse_monolingual(&dir.join("ldoce-bank.jsonl")).unwrap();
    let right = parse_monolingual(&dir.join("wn-bank.jsonl")).unwrap();
    let out = run_hierarchy_match(&left, &right, &[], &HierParams::default()).unwrap();
    let got: BTreeSet<String> = out.m3.iter().map(|m| format!("{} {}", m.left, m.right)).collect();
    assert!(got.contains("ldoce-bank:bank:1:1 wn-bank:bank:0:2"), "{got:?}");
}

#[test]
fn banco_walkthrough() {
    let dir = fixtures().join("banco");
    let onto = parse_monolingual(&dir.join("onto-fixture.jsonl")).unwrap();
    let dict = parse_bilingual(&dir.join("es-en.jsonl"), &FieldCodeInventory::shipped()).unwrap();
    assert!(dict.warnings.is_empty(), "{:?}", dict.warnings);
    let params = BiParams::default();
    let table = build_field_code_table(&dict.entries, &onto, params.threshold);
    assert_eq!(table.count("COM", "ECZB"), 7);
    assert_eq!(table.count("ZOOL", "BSBL"), 1);
    assert!(!table.survives("ZOOL", "BSBL"));
    for (_, count) in table.surviving() {
        assert!(count >= 6);
    }

    let mappings = run_bilingual_match(&dict.entries, &onto, &table, &params);
    let banco: Vec<_> = mappings.iter().filter(|m| m.source_word == "banco").collect();
    let group = |g: usize| banco.iter().find(|m| m.group == g).unwrap();

    assert_eq!(group(3).concept, Concept::Synset("school.n.07".into()));
    assert_eq!(group(3).confidence, 1.0);
    assert_eq!(group(3).phase, Phase::SynsetCoincide);

    assert_eq!(group(1).concept, Concept::Synset("furniture.n.01".into()));
    assert!((group(1).confidence - 0.64).abs() < 1e-12);
    assert_eq!(group(1).phase, Phase::NearSynset);

    assert_eq!(group(5).right.to_string(), "onto-fixture:bank:0:1");
    assert_eq!(group(5).phase, Phase::FieldCode);

    // palo -> bat carries no usable code
    assert!(!mappings.iter().any(|m| m.source_word == "palo" && m.group == 2));
    assert!(!mappings.iter().any(|m| m.source_word == "murciélago"));
}

#[test]
fn pipeline_keeps_stages_apart() {
    let config = MergeConfig::load(&fixtures().join("merge.toml")).unwrap();
    let (left, right) = (load("ldoce-fixture.jsonl"), load("wn-fixture.jsonl"));
    let seeds = load_seeds(&fixtures().join("seeds.jsonl"), &left, &right).unwrap();
    let inputs = MergeInputs {
        left,
        right,
        seeds,
        bilingual: None,
        table: None,
    };
    let run = run_merge(inputs, &StemmerRules::shipped(), &config).unwrap();

    let hier: BTreeSet<&SenseId> = run.hier.m3.iter().flat_map(|m| [&m.left, &m.right]).collect();
    let mut candidates = BTreeSet::new();
    for e in &run.defmatch.evidence {
        candidates.insert(&e.left);
        candidates.extend(e.scores.iter().map(|(r, _)| r));
    }
    assert!(!candidates.is_empty());
    assert!(hier.is_disjoint(&candidates));

    let def = pairs(&run.defmatch.matches);
    assert!(def.contains(&(ld("batter", 2, 0), wn("batter", 2))));
    assert!(def.contains(&(ld("batter", 3, 0), wn("batter", 1))));
    assert!(candidates.contains(&ld("seal", 2, 1)));
    assert!(!candidates.contains(&ld("seal", 1, 1)));
}

#[test]
fn export_names_concepts_from_both_sides() {
    let (left, right) = (load("ldoce-fixture.jsonl"), load("wn-fixture.jsonl"));
    let words = ["batter".to_string()];
    let out = run_definition_match(
        &left,
        &right,
        Some(&words),
        &StemmerRules::shipped(),
        &DefMatchParams::default(),
    );
    let nodes = export_ontology(&left, &right, out.matches.as_slice(), false, GENUS, HYPERNYM).unwrap();
    let node = nodes.iter().find(|n| n.concept == "wn-fixture:batter:0:2").unwrap();
    assert_eq!(node.names, vec![wn("batter", 2), ld("batter", 2, 0)]);
    assert_eq!(node.parents, vec!["wn-fixture:concoction:0:1"]);
    assert!(nodes.iter().all(|n| n.names.len() <= 2));

    let separate = export_ontology(&left, &right, out.matches.as_slice(), true, GENUS, HYPERNYM).unwrap();
    assert_eq!(separate.len(), left.len() + right.len());
}
