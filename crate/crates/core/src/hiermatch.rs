//! Hierarchy Match: grow sense matches outward through the two resources'
//! taxonomies, ignoring definitions.
//!
//! Three lists drive the search. `M1` holds matches whose ancestors have not
//! been scanned, `M2` holds matches whose subtrees have not been scanned,
//! and `M3` collects finished matches. Each round scans `M2` subtrees for
//! locally unambiguous words (new matches to `M1`), retires `M2` into `M3`,
//! scans `M1` ancestor chains for shared words (new matches to `M2`) and
//! finally moves `M1` onto `M2`. The loop stops when `M1` and `M2` are both
//! empty.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexmodel::{ListLabel, Match, MatchList, ModelError, Phase, Resource, Sense, SenseId, GENUS, HYPERNYM};
use crate::store::{self, StoreError};

#[derive(Debug, Error)]
pub enum HierMatchError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("seed {line}: {id} is not a sense of {resource}")]
    UnresolvedSeed { line: usize, id: SenseId, resource: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierParams {
    pub left_relation: String,
    pub right_relation: String,
    /// Confidence of unambiguous-word and hand-seeded matches.
    pub seed_confidence: f64,
    /// Confidence of matches found in a subtree scan.
    pub local_confidence: f64,
    /// Confidence of matches found in an ancestor scan.
    pub ancestor_confidence: f64,
    /// Require equal semantic codes when both senses carry one.
    pub semcode_filter: bool,
    pub pos: Option<String>,
}

impl Default for HierParams {
    fn default() -> Self {
        HierParams {
            left_relation: GENUS.to_string(),
            right_relation: HYPERNYM.to_string(),
            seed_confidence: 1.0,
            local_confidence: 0.9,
            ancestor_confidence: 0.8,
            semcode_filter: false,
            pos: None,
        }
    }
}

/// The algorithm step a stats row reports on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    #[serde(rename = "1(a)")]
    Unambiguous,
    #[serde(rename = "1(b)")]
    Seeds,
    #[serde(rename = "2(a)")]
    Subtrees,
    #[serde(rename = "2(c)")]
    Ancestors,
}

impl Step {
    pub const ALL: [Step; 4] = [Step::Unambiguous, Step::Seeds, Step::Subtrees, Step::Ancestors];

    pub fn from_label(label: &str) -> Option<Step> {
        Step::ALL.into_iter().find(|s| s.label() == label)
    }

    pub fn label(self) -> &'static str {
        match self {
            Step::Unambiguous => "1(a)",
            Step::Seeds => "1(b)",
            Step::Subtrees => "2(a)",
            Step::Ancestors => "2(c)",
        }
    }

    pub fn phase(self) -> Phase {
        match self {
            Step::Unambiguous => Phase::Unambiguous,
            Step::Seeds => Phase::Seed,
            Step::Subtrees => Phase::LocalUnambiguous,
            Step::Ancestors => Phase::AncestorScan,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStat {
    pub step: Step,
    pub proposed: usize,
}

/// Working state of one run.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub m1: MatchList,
    pub m2: MatchList,
    pub m3: MatchList,
    matched_left: BTreeSet<SenseId>,
    matched_right: BTreeSet<SenseId>,
    pub iteration: usize,
    pub stats: Vec<PhaseStat>,
    pub warnings: Vec<String>,
}

impl Default for PhaseState {
    fn default() -> Self {
        PhaseState {
            m1: MatchList::new(ListLabel::M1),
            m2: MatchList::new(ListLabel::M2),
            m3: MatchList::new(ListLabel::M3),
            matched_left: BTreeSet::new(),
            matched_right: BTreeSet::new(),
            iteration: 0,
            stats: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

impl PhaseState {
    pub fn is_matched(&self, left: &SenseId, right: &SenseId) -> bool {
        self.matched_left.contains(left) || self.matched_right.contains(right)
    }

    pub fn matched_left(&self) -> &BTreeSet<SenseId> {
        &self.matched_left
    }

    pub fn matched_right(&self) -> &BTreeSet<SenseId> {
        &self.matched_right
    }

    fn reserve(&mut self, m: &Match) {
        self.matched_left.insert(m.left.clone());
        self.matched_right.insert(m.right.clone());
    }

    fn record(&mut self, step: Step, proposed: usize) {
        self.stats.push(PhaseStat { step, proposed });
    }
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct HierOutput {
    pub m3: MatchList,
    pub stats: Vec<PhaseStat>,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

fn eligible<'a>(resource: &'a Resource, id: &SenseId, pos: Option<&str>) -> Option<&'a Sense> {
    if resource.is_hidden(id) {
        return None;
    }
    resource.get(id).filter(|s| pos.is_none_or(|p| s.pos == p))
}

fn compatible(left: &Sense, right: &Sense, params: &HierParams) -> bool {
    if !params.semcode_filter {
        return true;
    }
    match (&left.semantic_code, &right.semantic_code) {
        (Some(a), Some(b)) => a == b,
        _ => true,
    }
}

fn propose(
    state: &mut PhaseState,
    left: &Sense,
    right: &Sense,
    confidence: f64,
    phase: Phase,
    params: &HierParams,
) -> Option<Match> {
    if state.is_matched(&left.id, &right.id) || !compatible(left, right, params) {
        return None;
    }
    let m = Match::new(left.id.clone(), right.id.clone(), confidence, phase).ok()?;
    state.reserve(&m);
    Some(m)
}

/// Step 1(a): pair the senses of every headword with exactly one sense on
/// each side. Matches go to `M1`.
pub fn seed_unambiguous(state: &mut PhaseState, left: &Resource, right: &Resource, params: &HierParams) -> usize {
    let pos = params.pos.as_deref();
    let mut count = 0;
    for word in left.words() {
        let ls: Vec<&Sense> = left
            .senses_of_word(word)
            .into_iter()
            .filter(|s| pos.is_none_or(|p| s.pos == p))
            .collect();
        let rs: Vec<&Sense> = right
            .senses_of_word(word)
            .into_iter()
            .filter(|s| pos.is_none_or(|p| s.pos == p))
            .collect();
        if let ([l], [r]) = (ls.as_slice(), rs.as_slice()) {
            if let Some(m) = propose(state, l, r, params.seed_confidence, Phase::Unambiguous, params) {
                state.m1.push(m).expect("reserved senses are unique");
                count += 1;
            }
        }
    }
    count
}

/// Reads a seed file and resolves every id against the two resources.
pub fn load_seeds(path: &Path, left: &Resource, right: &Resource) -> Result<Vec<Match>, HierMatchError> {
    let lines = store::read_seeds(path)?;
    let mut out = Vec::with_capacity(lines.len());
    for (idx, line) in lines.into_iter().enumerate() {
        for (id, resource) in [(&line.left, left), (&line.right, right)] {
            if !resource.contains(id) {
                return Err(HierMatchError::UnresolvedSeed {
                    line: idx + 1,
                    id: id.clone(),
                    resource: resource.name().to_string(),
                });
            }
        }
        out.push(Match::new(line.left, line.right, 1.0, Phase::Seed)?);
    }
    Ok(out)
}

/// Step 1(b): place hand-crafted matches on `M2`. Seeds that repeat or clash
/// with an existing match are dropped with a warning.
pub fn add_seeds(state: &mut PhaseState, seeds: &[Match], params: &HierParams) -> usize {
    let mut count = 0;
    for seed in seeds {
        if state.is_matched(&seed.left, &seed.right) {
            let msg = format!(
                "seed {} -> {} dropped: a sense is already matched",
                seed.left, seed.right
            );
            log::warn!("{msg}");
            state.warnings.push(msg);
            continue;
        }
        let mut m = seed.clone();
        m.phase = Phase::Seed;
        m.confidence = params.seed_confidence;
        state.reserve(&m);
        state.m2.push(m).expect("reserved senses are unique");
        count += 1;
    }
    count
}

fn group_by_word<'a>(
    resource: &'a Resource,
    ids: impl IntoIterator<Item = &'a SenseId>,
    pos: Option<&str>,
) -> BTreeMap<&'a str, Vec<&'a Sense>> {
    let mut out: BTreeMap<&str, Vec<&Sense>> = BTreeMap::new();
    for id in ids {
        if let Some(sense) = eligible(resource, id, pos) {
            out.entry(sense.word()).or_default().push(sense);
        }
    }
    out
}

/// Step 2(a): for each match on `M2`, pair words that have exactly one sense
/// inside each of the two subtrees rooted at the matched senses. New matches
/// go to `M1`.
pub fn local_unambiguous_pass(
    state: &mut PhaseState,
    left: &Resource,
    right: &Resource,
    params: &HierParams,
) -> Result<usize, HierMatchError> {
    let pos = params.pos.as_deref();
    let roots: Vec<(SenseId, SenseId)> = state.m2.iter().map(|m| (m.left.clone(), m.right.clone())).collect();
    let mut count = 0;
    for (l, r) in roots {
        let left_tree = left.subtree(&params.left_relation, &l)?;
        let right_tree = right.subtree(&params.right_relation, &r)?;
        let left_words = group_by_word(left, &left_tree, pos);
        let right_words = group_by_word(right, &right_tree, pos);
        for (word, ls) in &left_words {
            let Some(rs) = right_words.get(word) else {
                continue;
            };
            if let ([ls], [rs]) = (ls.as_slice(), rs.as_slice()) {
                if let Some(m) = propose(state, ls, rs, params.local_confidence, Phase::LocalUnambiguous, params) {
                    state.m1.push(m).expect("reserved senses are unique");
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

/// Step 2(c): for each match on `M1`, walk both ancestor chains and pair any
/// headword that labels exactly one sense on each chain. New matches go to
/// `M2`.
pub fn ancestor_scan_pass(
    state: &mut PhaseState,
    left: &Resource,
    right: &Resource,
    params: &HierParams,
) -> Result<usize, HierMatchError> {
    let pos = params.pos.as_deref();
    let starts: Vec<(SenseId, SenseId)> = state.m1.iter().map(|m| (m.left.clone(), m.right.clone())).collect();
    let mut count = 0;
    for (l, r) in starts {
        let left_chain = left.ancestors(&params.left_relation, &l)?;
        let right_chain = right.ancestors(&params.right_relation, &r)?;
        let left_words = group_by_word(left, &left_chain, pos);
        let right_words = group_by_word(right, &right_chain, pos);
        for id in &left_chain {
            let Some(ls) = left_words.get(id.word.as_str()) else {
                continue;
            };
            let Some(rs) = right_words.get(id.word.as_str()) else {
                continue;
            };
            if let ([ls], [rs]) = (ls.as_slice(), rs.as_slice()) {
                if let Some(m) = propose(state, ls, rs, params.ancestor_confidence, Phase::AncestorScan, params) {
                    state.m2.push(m).expect("reserved senses are unique");
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

fn move_all(from: &mut MatchList, to: &mut MatchList) {
    for m in from.drain() {
        to.push(m).expect("matched senses are globally unique");
    }
}

/// Runs steps 1(a) and 1(b), then loops over 2(a)-2(d) until `M1` and `M2`
/// are both empty. Returns `M3` with one stats row per executed pass.
pub fn run_hierarchy_match(
    left: &Resource,
    right: &Resource,
    seeds: &[Match],
    params: &HierParams,
) -> Result<HierOutput, HierMatchError> {
    // fail early on unknown relation names
    for (resource, relation) in [(left, &params.left_relation), (right, &params.right_relation)] {
        if !resource.relation_names().any(|r| r == relation.as_str()) {
            return Err(ModelError::UnknownRelation(relation.clone()).into());
        }
    }

    let mut state = PhaseState::default();
    let unambiguous = seed_unambiguous(&mut state, left, right, params);
    state.record(Step::Unambiguous, unambiguous);
    let seeded = add_seeds(&mut state, seeds, params);
    state.record(Step::Seeds, seeded);

    // every round that continues past the second must propose something new
    let bound = left.len() + right.len() + 2;
    while !(state.m1.is_empty() && state.m2.is_empty()) {
        state.iteration += 1;
        assert!(state.iteration <= bound, "hierarchy match exceeded {bound} rounds");
        let local = local_unambiguous_pass(&mut state, left, right, params)?;
        state.record(Step::Subtrees, local);
        move_all(&mut state.m2, &mut state.m3);
        let upward = ancestor_scan_pass(&mut state, left, right, params)?;
        state.record(Step::Ancestors, upward);
        move_all(&mut state.m1, &mut state.m2);
    }

    Ok(HierOutput {
        m3: state.m3,
        stats: state.stats,
        iterations: state.iteration,
        warnings: state.warnings,
    })
}

/// Stats as TSV: `phase`, `matches_proposed`, `pct_correct`. The last column
/// stays empty until verification results are merged in.
pub fn write_stats_tsv(
    stats: &[PhaseStat],
    pct_correct: Option<&BTreeMap<Phase, f64>>,
    mut out: impl Write,
) -> io::Result<()> {
    writeln!(out, "phase\tmatches_proposed\tpct_correct")?;
    for row in stats {
        let pct = pct_correct
            .and_then(|m| m.get(&row.step.phase()))
            .map(|p| format!("{p:.1}"))
            .unwrap_or_default();
        writeln!(out, "Step {}\t{}\t{}", row.step, row.proposed, pct)?;
    }
    Ok(())
}

/// Reads back the step rows written by [`write_stats_tsv`], ignoring the
/// percentage column.
pub fn read_stats_tsv(text: &str, origin: &Path) -> Result<Vec<PhaseStat>, StoreError> {
    let bad = |line: usize, message: String| StoreError::Format {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let step = cols
            .first()
            .and_then(|c| c.strip_prefix("Step "))
            .and_then(Step::from_label)
            .ok_or_else(|| bad(idx + 1, format!("unknown step '{}'", cols[0])))?;
        let proposed = cols
            .get(1)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad(idx + 1, "matches_proposed is not a count".into()))?;
        out.push(PhaseStat { step, proposed });
    }
    Ok(out)
}
