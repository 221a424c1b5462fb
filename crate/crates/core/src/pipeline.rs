//! End-to-end merge: Hierarchy Match, then Definition Match over the senses
//! it left unmatched, then optionally Bilingual Match against the merged
//! ontology. Also detects hierarchy disagreements between matched senses and
//! exports the merged concept graph.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bimatch::{build_field_code_table, run_bilingual_match, FieldCodeTable, LexicalMapping};
use crate::config::MergeConfig;
use crate::defmatch::{run_definition_match, DefMatchError, DefMatchOutput, SenseEvidence};
use crate::hiermatch::{run_hierarchy_match, write_stats_tsv, HierMatchError, HierOutput};
use crate::ingest::{self, BilingualDictionary, BilingualEntry, IngestError, StemmerRules};
use crate::lexmodel::{Match, MatchStatus, ModelError, Resource, Sense, SenseId};
use crate::store::{self, StoreError};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    HierMatch(#[from] HierMatchError),
    #[error(transparent)]
    DefMatch(#[from] DefMatchError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{what} changed since the run in {dir} was written (expected {expected}, found {found})")]
    DigestMismatch {
        dir: PathBuf,
        what: String,
        expected: String,
        found: String,
    },
    #[error("{0} is not a run directory")]
    NotARun(PathBuf),
}

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";
pub const LEFT: &str = "left.jsonl";
pub const RIGHT: &str = "right.jsonl";
pub const SEEDS: &str = "seeds.jsonl";
pub const BILINGUAL: &str = "bilingual.jsonl";
pub const HIERMATCH: &str = "hiermatch.jsonl";
pub const HIERMATCH_STATS: &str = "hiermatch_stats.tsv";
pub const DEFMATCH: &str = "defmatch.jsonl";
pub const DEFMATCH_EVIDENCE: &str = "defmatch_evidence.jsonl";
pub const BIMATCH: &str = "bimatch.jsonl";
pub const FIELD_TABLE: &str = "fieldcodes.tsv";
pub const INCONSISTENCIES: &str = "inconsistencies.jsonl";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInputs {
    pub left: InputDigest,
    pub right: InputDigest,
    pub seeds: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bilingual: Option<InputDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_table: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub hiermatch: usize,
    pub defmatch: usize,
    pub bimatch: usize,
    pub inconsistencies: usize,
}

/// Everything that identifies a run. Contains no timestamps, so identical
/// inputs produce an identical manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub run_id: String,
    pub inputs: RunInputs,
    pub config: MergeConfig,
    pub counts: RunCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InconsistencyKind {
    DivergentAncestry,
    CodeConflict,
}

/// A matched pair whose surroundings disagree across the two resources.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Inconsistency {
    pub kind: InconsistencyKind,
    pub left: SenseId,
    pub right: SenseId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_parent: Option<SenseId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_parent: Option<SenseId>,
}

/// Inputs to [`run_merge`].
#[derive(Debug, Clone)]
pub struct MergeInputs {
    pub left: Resource,
    pub right: Resource,
    pub seeds: Vec<Match>,
    pub bilingual: Option<BilingualDictionary>,
    /// A prebuilt field-code table; built from the dictionary when absent.
    pub table: Option<FieldCodeTable>,
}

#[derive(Debug, Clone)]
pub struct MergeRun {
    pub manifest: Manifest,
    pub timing: Timing,
    pub left: Resource,
    pub right: Resource,
    pub seeds: Vec<Match>,
    pub hier: HierOutput,
    pub defmatch: DefMatchOutput,
    pub bilingual: Option<BilingualDictionary>,
    pub table: Option<FieldCodeTable>,
    pub bimatch: Vec<LexicalMapping>,
    pub inconsistencies: Vec<Inconsistency>,
}

impl MergeRun {
    /// Hierarchy matches followed by definition matches.
    pub fn matches(&self) -> Vec<Match> {
        self.hier
            .m3
            .iter()
            .chain(self.defmatch.matches.iter())
            .cloned()
            .collect()
    }
}

/// A view of `resource` with the given senses hidden.
/// Hierarchy links through hidden senses stay traversable.
pub fn remove_matched(resource: &Resource, ids: impl IntoIterator<Item = SenseId>) -> Result<Resource, ModelError> {
    let ids: Vec<SenseId> = ids.into_iter().collect();
    resource.hide(&ids)
}

/// Copies the field codes of matched left senses onto their right partners,
/// giving the ontology consulted by Bilingual Match.
pub fn annotate_field_codes(right: &Resource, left: &Resource, matches: &[Match]) -> Result<Resource, ModelError> {
    let mut extra: BTreeMap<&SenseId, BTreeSet<String>> = BTreeMap::new();
    for m in matches {
        if m.status == MatchStatus::Rejected {
            continue;
        }
        if let Some(l) = left.get(&m.left) {
            extra
                .entry(m.final_right())
                .or_default()
                .extend(l.field_codes.iter().cloned());
        }
    }
    let senses: Vec<Sense> = right
        .all_senses()
        .map(|s| {
            let mut s = s.clone();
            if let Some(codes) = extra.get(&s.id) {
                let merged: BTreeSet<String> = s.field_codes.iter().cloned().chain(codes.iter().cloned()).collect();
                s.field_codes = merged.into_iter().collect();
            }
            s
        })
        .collect();
    Resource::new(right.name(), senses)
}

fn seeds_digest(seeds: &[Match]) -> String {
    let mut buf = Vec::new();
    store::write_seeds(seeds.iter().map(|m| (&m.left, &m.right)), &mut buf).expect("in-memory write");
    sha256_hex(&buf)
}

fn table_digest(table: &FieldCodeTable) -> String {
    let mut buf = Vec::new();
    table.write_tsv(&mut buf).expect("in-memory write");
    sha256_hex(&buf)
}

fn bilingual_bytes(entries: &[BilingualEntry]) -> Vec<u8> {
    let mut buf = Vec::new();
    ingest::write_bilingual(entries, &mut buf).expect("in-memory write");
    buf
}

pub fn run_inputs(inputs: &MergeInputs) -> RunInputs {
    RunInputs {
        left: InputDigest {
            name: inputs.left.name().to_string(),
            sha256: sha256_hex(&ingest::monolingual_bytes(&inputs.left)),
        },
        right: InputDigest {
            name: inputs.right.name().to_string(),
            sha256: sha256_hex(&ingest::monolingual_bytes(&inputs.right)),
        },
        seeds: seeds_digest(&inputs.seeds),
        bilingual: inputs.bilingual.as_ref().map(|b| InputDigest {
            name: b.name.clone(),
            sha256: sha256_hex(&bilingual_bytes(&b.entries)),
        }),
        field_table: inputs.table.as_ref().map(table_digest),
    }
}

fn run_id(inputs: &RunInputs, config: &MergeConfig) -> String {
    let body = serde_json::to_vec(&(inputs, config)).expect("serializable");
    sha256_hex(&body)[..16].to_string()
}

/// Runs every stage in order and collects the results.
pub fn run_merge(inputs: MergeInputs, rules: &StemmerRules, config: &MergeConfig) -> Result<MergeRun, PipelineError> {
    let started = now_ms();
    let digests = run_inputs(&inputs);
    let MergeInputs {
        left,
        right,
        seeds,
        bilingual,
        table,
    } = inputs;

    let hier = run_hierarchy_match(&left, &right, &seeds, &config.hiermatch)?;
    log::info!(
        "hierarchy match: {} matches in {} rounds",
        hier.m3.len(),
        hier.iterations
    );

    let left_view = remove_matched(&left, hier.m3.iter().map(|m| m.left.clone()))?;
    let right_view = remove_matched(&right, hier.m3.iter().map(|m| m.right.clone()))?;
    let defmatch = run_definition_match(&left_view, &right_view, None, rules, &config.defmatch);
    log::info!("definition match: {} matches", defmatch.matches.len());

    let all: Vec<Match> = hier.m3.iter().chain(defmatch.matches.iter()).cloned().collect();

    let (table, bimatch) = match &bilingual {
        Some(dict) => {
            let onto = annotate_field_codes(&right, &left, &all)?;
            let table = match table {
                Some(t) => t.with_threshold(config.bimatch.threshold),
                None => build_field_code_table(&dict.entries, &onto, config.bimatch.threshold),
            };
            let mappings = run_bilingual_match(&dict.entries, &onto, &table, &config.bimatch);
            log::info!("bilingual match: {} mappings", mappings.len());
            (Some(table), mappings)
        }
        None => (table, Vec::new()),
    };

    let inconsistencies = detect_inconsistencies(
        &left,
        &right,
        &all,
        &config.hiermatch.left_relation,
        &config.hiermatch.right_relation,
    )?;

    let counts = RunCounts {
        hiermatch: hier.m3.len(),
        defmatch: defmatch.matches.len(),
        bimatch: bimatch.len(),
        inconsistencies: inconsistencies.len(),
    };
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        run_id: run_id(&digests, config),
        inputs: digests,
        config: config.clone(),
        counts,
    };
    Ok(MergeRun {
        manifest,
        timing: Timing {
            started_unix_ms: started,
            finished_unix_ms: now_ms(),
        },
        left,
        right,
        seeds,
        hier,
        defmatch,
        bilingual,
        table,
        bimatch,
        inconsistencies,
    })
}

/// Flags matched pairs whose parents are matched elsewhere: the left
/// parent's partner differs from the right parent, and neither parent is an
/// ancestor of the other's partner. Also flags pairs with clashing semantic
/// codes. Rejected matches are ignored; corrected ones use the correction.
pub fn detect_inconsistencies(
    left: &Resource,
    right: &Resource,
    matches: &[Match],
    left_relation: &str,
    right_relation: &str,
) -> Result<Vec<Inconsistency>, ModelError> {
    let live: Vec<(&SenseId, &SenseId)> = matches
        .iter()
        .filter(|m| m.status != MatchStatus::Rejected)
        .map(|m| (&m.left, m.final_right()))
        .collect();
    let partner_of_left: BTreeMap<&SenseId, &SenseId> = live.iter().copied().collect();
    let partner_of_right: BTreeMap<&SenseId, &SenseId> = live.iter().map(|(l, r)| (*r, *l)).collect();

    let mut out = BTreeSet::new();
    for (l, r) in &live {
        let (Some(ls), Some(rs)) = (left.get(l), right.get(r)) else {
            continue;
        };
        if let (Some(a), Some(b)) = (&ls.semantic_code, &rs.semantic_code) {
            if a != b {
                out.insert(Inconsistency {
                    kind: InconsistencyKind::CodeConflict,
                    left: (*l).clone(),
                    right: (*r).clone(),
                    left_parent: None,
                    right_parent: None,
                });
            }
        }
        for pl in left.parents(left_relation, l)? {
            let Some(pl_partner) = partner_of_left.get(pl) else {
                continue;
            };
            for pr in right.parents(right_relation, r)? {
                let Some(pr_partner) = partner_of_right.get(pr) else {
                    continue;
                };
                if *pl_partner == pr {
                    continue;
                }
                let pl_above = left.ancestors(left_relation, pr_partner)?.contains(pl);
                let pr_above = right.ancestors(right_relation, pl_partner)?.contains(pr);
                if !pl_above && !pr_above {
                    out.insert(Inconsistency {
                        kind: InconsistencyKind::DivergentAncestry,
                        left: (*l).clone(),
                        right: (*r).clone(),
                        left_parent: Some(pl.clone()),
                        right_parent: Some(pr.clone()),
                    });
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// One node of the merged ontology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub concept: String,
    /// Right-side sense first, then the left-side alias.
    pub names: Vec<SenseId>,
    pub parents: Vec<String>,
}

fn reaches(graph: &BTreeMap<String, BTreeSet<String>>, from: &str, target: &str) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(node) = stack.pop() {
        if node == target {
            return true;
        }
        if seen.insert(node) {
            stack.extend(graph.get(node).into_iter().flatten().map(String::as_str));
        }
    }
    false
}

/// Builds one concept per match and per unmatched sense. Parent links come
/// from both resources, right side first; a left link that would close a
/// cycle is dropped. With `verified_only`, only accepted or corrected matches
/// merge senses.
pub fn export_ontology(
    left: &Resource,
    right: &Resource,
    matches: &[Match],
    verified_only: bool,
    left_relation: &str,
    right_relation: &str,
) -> Result<Vec<ConceptNode>, ModelError> {
    let mut partner: BTreeMap<&SenseId, &SenseId> = BTreeMap::new();
    let mut taken: BTreeSet<&SenseId> = BTreeSet::new();
    for m in matches {
        let keep = match m.status {
            MatchStatus::Accepted | MatchStatus::Corrected => true,
            MatchStatus::Proposed => !verified_only,
            MatchStatus::Rejected => false,
        };
        let r = m.final_right();
        if !keep || !left.contains(&m.left) || !right.contains(r) {
            continue;
        }
        if partner.contains_key(&m.left) || taken.contains(r) {
            continue;
        }
        partner.insert(&m.left, r);
        taken.insert(r);
    }

    let concept_of_left = |id: &SenseId| match partner.get(id) {
        Some(r) => r.to_string(),
        None => id.to_string(),
    };
    let mut names: BTreeMap<String, Vec<SenseId>> = BTreeMap::new();
    for s in right.all_senses() {
        names.entry(s.id.to_string()).or_default().push(s.id.clone());
    }
    for s in left.all_senses() {
        names.entry(concept_of_left(&s.id)).or_default().push(s.id.clone());
    }

    let mut graph: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for s in right.all_senses() {
        let child = s.id.to_string();
        for p in right.parents(right_relation, &s.id)? {
            graph.entry(child.clone()).or_default().insert(p.to_string());
        }
    }
    for s in left.all_senses() {
        let child = concept_of_left(&s.id);
        for p in left.parents(left_relation, &s.id)? {
            let parent = concept_of_left(p);
            if parent == child || graph.get(&child).is_some_and(|ps| ps.contains(&parent)) {
                continue;
            }
            if reaches(&graph, &parent, &child) {
                log::debug!("dropping {child} -> {parent}: would close a cycle");
                continue;
            }
            graph.entry(child.clone()).or_default().insert(parent);
        }
    }

    Ok(names
        .into_iter()
        .map(|(concept, names)| ConceptNode {
            parents: graph
                .get(&concept)
                .map(|ps| ps.iter().cloned().collect())
                .unwrap_or_default(),
            concept,
            names,
        })
        .collect())
}

/// A run as read back from its directory.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub left: Resource,
    pub right: Resource,
    pub hiermatch: Vec<Match>,
    pub defmatch: Vec<Match>,
    pub evidence: Vec<SenseEvidence>,
    pub bilingual: Option<BilingualDictionary>,
    pub bimatch: Vec<LexicalMapping>,
    pub inconsistencies: Vec<Inconsistency>,
}

fn read_manifest(dir: &Path) -> Result<Option<Manifest>, PipelineError> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| StoreError::io(&path, e))?;
    let manifest = serde_json::from_str(&text).map_err(|e| StoreError::Format {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    Ok(Some(manifest))
}

fn json_pretty(value: &impl Serialize) -> io::Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

fn compare(dir: &Path, what: &str, expected: &str, found: &str) -> Result<(), PipelineError> {
    if expected == found {
        Ok(())
    } else {
        Err(PipelineError::DigestMismatch {
            dir: dir.to_path_buf(),
            what: what.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }
}

/// Writes every artifact of `run` into `dir`. An existing run in `dir` built
/// from different inputs is refused unless `force` is set.
pub fn write_run(run: &MergeRun, dir: &Path, force: bool) -> Result<(), PipelineError> {
    if let Some(existing) = read_manifest(dir)? {
        if !force {
            let (old, new) = (&existing.inputs, &run.manifest.inputs);
            compare(dir, "left resource", &old.left.sha256, &new.left.sha256)?;
            compare(dir, "right resource", &old.right.sha256, &new.right.sha256)?;
            compare(dir, "seeds", &old.seeds, &new.seeds)?;
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
    let file = |name: &str| dir.join(name);

    store::write_file(&file(MANIFEST), |w| w.write_all(&json_pretty(&run.manifest)?))?;
    store::write_file(&file(TIMING), |w| w.write_all(&json_pretty(&run.timing)?))?;
    store::write_file(&file(LEFT), |w| ingest::write_monolingual(&run.left, w))?;
    store::write_file(&file(RIGHT), |w| ingest::write_monolingual(&run.right, w))?;
    store::write_file(&file(SEEDS), |w| {
        store::write_seeds(run.seeds.iter().map(|m| (&m.left, &m.right)), w)
    })?;
    store::write_file(&file(HIERMATCH), |w| store::write_matches(run.hier.m3.iter(), w))?;
    store::write_file(&file(HIERMATCH_STATS), |w| write_stats_tsv(&run.hier.stats, None, w))?;
    store::write_file(&file(DEFMATCH), |w| {
        store::write_matches(run.defmatch.matches.iter(), w)
    })?;
    store::write_file(&file(DEFMATCH_EVIDENCE), |w| {
        store::write_versioned(run.defmatch.evidence.iter(), w)
    })?;
    store::write_file(&file(INCONSISTENCIES), |w| {
        store::write_versioned(run.inconsistencies.iter(), w)
    })?;
    if let Some(dict) = &run.bilingual {
        store::write_file(&file(BILINGUAL), |w| ingest::write_bilingual(&dict.entries, w))?;
        store::write_file(&file(BIMATCH), |w| store::write_versioned(run.bimatch.iter(), w))?;
    }
    if let Some(table) = &run.table {
        store::write_file(&file(FIELD_TABLE), |w| table.write_tsv(w))?;
    }
    Ok(())
}

/// Reads a run directory, checking the resource snapshots against the
/// manifest digests.
pub fn load_run(dir: &Path) -> Result<LoadedRun, PipelineError> {
    let manifest = read_manifest(dir)?.ok_or_else(|| PipelineError::NotARun(dir.to_path_buf()))?;
    let read_resource = |file: &str, expected: &InputDigest| -> Result<Resource, PipelineError> {
        let path = dir.join(file);
        let reader = io::BufReader::new(std::fs::File::open(&path).map_err(|e| StoreError::io(&path, e))?);
        let resource = ingest::read_monolingual(reader, &expected.name)?;
        let found = sha256_hex(&ingest::monolingual_bytes(&resource));
        compare(dir, file, &expected.sha256, &found)?;
        Ok(resource)
    };
    let left = read_resource(LEFT, &manifest.inputs.left)?;
    let right = read_resource(RIGHT, &manifest.inputs.right)?;

    let optional = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
    let bilingual = match (&manifest.inputs.bilingual, optional(BILINGUAL)) {
        (Some(digest), Some(path)) => {
            let reader = io::BufReader::new(std::fs::File::open(&path).map_err(|e| StoreError::io(&path, e))?);
            Some(ingest::read_bilingual(
                reader,
                &digest.name,
                &ingest::FieldCodeInventory::shipped(),
            )?)
        }
        _ => None,
    };
    let bimatch = match optional(BIMATCH) {
        Some(path) => store::read_versioned(&path)?,
        None => Vec::new(),
    };
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        hiermatch: store::read_matches(&dir.join(HIERMATCH))?,
        defmatch: store::read_matches(&dir.join(DEFMATCH))?,
        evidence: store::read_versioned(&dir.join(DEFMATCH_EVIDENCE))?,
        inconsistencies: store::read_versioned(&dir.join(INCONSISTENCIES))?,
        manifest,
        left,
        right,
        bilingual,
        bimatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexmodel::{Phase, GENUS, HYPERNYM};

    fn sense(res: &str, word: &str, h: u32, s: u32, parent: Option<(&str, u32, u32)>) -> Sense {
        let mut sense = Sense::new(SenseId::new(res, word, h, s), "n", "");
        let links: Vec<SenseId> = parent.into_iter().map(|(w, h, s)| SenseId::new(res, w, h, s)).collect();
        if res == "l" {
            sense.genus = links;
        } else {
            sense.hypernyms = links;
        }
        sense
    }

    fn pair(l: (&str, u32, u32), r: (&str, u32, u32)) -> Match {
        Match::new(
            SenseId::new("l", l.0, l.1, l.2),
            SenseId::new("r", r.0, r.1, r.2),
            1.0,
            Phase::Seed,
        )
        .unwrap()
    }

    fn chain(res: &str) -> Resource {
        let (h, s) = if res == "l" { (1, 1) } else { (0, 1) };
        Resource::new(
            res,
            vec![
                sense(res, "a", h, s, None),
                sense(res, "b", h, s, Some(("a", h, s))),
                sense(res, "c", h, s, Some(("b", h, s))),
            ],
        )
        .unwrap()
    }

    #[test]
    fn parallel_hierarchies_are_consistent() {
        let matches = vec![
            pair(("a", 1, 1), ("a", 0, 1)),
            pair(("b", 1, 1), ("b", 0, 1)),
            pair(("c", 1, 1), ("c", 0, 1)),
        ];
        let found = detect_inconsistencies(&chain("l"), &chain("r"), &matches, GENUS, HYPERNYM).unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn skipped_level_is_not_divergent() {
        // c's left parent b is matched, c's right parent is b too but
        // matching a->b on the right only skips a level.
        let matches = vec![pair(("b", 1, 1), ("a", 0, 1)), pair(("c", 1, 1), ("b", 0, 1))];
        let found = detect_inconsistencies(&chain("l"), &chain("r"), &matches, GENUS, HYPERNYM).unwrap();
        assert!(found.is_empty(), "{found:?}");
    }

    #[test]
    fn export_merges_matched_senses() {
        let matches = vec![pair(("b", 1, 1), ("b", 0, 1))];
        let nodes = export_ontology(&chain("l"), &chain("r"), &matches, false, GENUS, HYPERNYM).unwrap();
        assert_eq!(nodes.len(), 5);
        let b = nodes.iter().find(|n| n.concept == "r:b:0:1").unwrap();
        assert_eq!(b.names.len(), 2);
        let c = nodes.iter().find(|n| n.concept == "l:c:1:1").unwrap();
        assert_eq!(c.parents, vec!["r:b:0:1"]);
        let verified = export_ontology(&chain("l"), &chain("r"), &matches, true, GENUS, HYPERNYM).unwrap();
        assert_eq!(verified.len(), 6);
    }

    #[test]
    fn export_drops_cycle_closing_links() {
        // a<-b<-c on both sides, but matched crosswise so the left links
        // would point downward in the right hierarchy.
        let matches = vec![pair(("a", 1, 1), ("c", 0, 1)), pair(("c", 1, 1), ("a", 0, 1))];
        let nodes = export_ontology(&chain("l"), &chain("r"), &matches, false, GENUS, HYPERNYM).unwrap();
        let graph: BTreeMap<String, BTreeSet<String>> = nodes
            .iter()
            .map(|n| (n.concept.clone(), n.parents.iter().cloned().collect()))
            .collect();
        for n in &nodes {
            for p in &n.parents {
                assert!(!reaches(&graph, p, &n.concept), "cycle through {}", n.concept);
            }
        }
    }
}
