//! Bilingual Match: attach source-language headwords to ontology concepts.
//!
//! Each sense group of a bilingual entry lists one or more target-language
//! translations. Groups with several translations are resolved through the
//! ontology's synsets (two translations in one synset) or, failing that,
//! through the nearest shared ancestor. Single translations map directly
//! when unambiguous and otherwise through a learned correspondence between
//! the dictionary's field codes and the ontology's subject codes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BilingualEntry, TranslationSense};
use crate::lexmodel::{Match, ModelError, Phase, Resource, SenseId, HYPERNYM};

#[derive(Debug, Error)]
pub enum BiMatchError {
    #[error("field-code table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiParams {
    /// Confidence factor applied once per hypernym link.
    pub penalty: f64,
    /// Minimum count for a field-code pair to survive.
    pub threshold: usize,
    /// Confidence of a synset coincidence.
    pub base: f64,
    /// Confidence of an unambiguous single translation.
    pub single: f64,
    /// Confidence of the best field-code candidate.
    pub field_code: f64,
    /// Largest combined link count for a near-synset match.
    pub max_links: usize,
}

impl Default for BiParams {
    fn default() -> Self {
        BiParams {
            penalty: 0.8,
            threshold: 6,
            base: 1.0,
            single: 0.95,
            field_code: 0.9,
            max_links: 4,
        }
    }
}

/// A node of the ontology as seen by this matcher: a synset, or a sense
/// that belongs to none.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Concept {
    Synset(String),
    Sense(SenseId),
}

impl Concept {
    pub fn of(onto: &Resource, id: &SenseId) -> Concept {
        match onto.synset_of(id) {
            Some(synset) => Concept::Synset(synset.to_string()),
            None => Concept::Sense(id.clone()),
        }
    }

    pub fn members(&self, onto: &Resource) -> Vec<SenseId> {
        match self {
            Concept::Synset(s) => onto
                .synset_members(s)
                .map(|m| m.iter().cloned().collect())
                .unwrap_or_default(),
            Concept::Sense(id) => vec![id.clone()],
        }
    }

    /// The smallest member sense, used when a single sense is required.
    pub fn representative(&self, onto: &Resource) -> Option<SenseId> {
        self.members(onto).into_iter().min()
    }

    fn parents(&self, onto: &Resource) -> BTreeSet<Concept> {
        let mut out = BTreeSet::new();
        for member in self.members(onto) {
            if let Ok(parents) = onto.parents(HYPERNYM, &member) {
                out.extend(parents.iter().map(|p| Concept::of(onto, p)));
            }
        }
        out
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Concept::Synset(s) => f.write_str(s),
            Concept::Sense(id) => id.fmt(f),
        }
    }
}

/// Correspondence counts between bilingual field codes and ontology codes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FieldCodeTable {
    counts: BTreeMap<(String, String), usize>,
    threshold: usize,
}

impl FieldCodeTable {
    pub fn from_counts(counts: BTreeMap<(String, String), usize>, threshold: usize) -> Self {
        FieldCodeTable { counts, threshold }
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn with_threshold(&self, threshold: usize) -> Self {
        FieldCodeTable {
            counts: self.counts.clone(),
            threshold,
        }
    }

    pub fn count(&self, bilingual: &str, mono: &str) -> usize {
        self.counts
            .get(&(bilingual.to_string(), mono.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn survives(&self, bilingual: &str, mono: &str) -> bool {
        let count = self.count(bilingual, mono);
        count > 0 && count >= self.threshold
    }

    pub fn counts(&self) -> &BTreeMap<(String, String), usize> {
        &self.counts
    }

    pub fn surviving(&self) -> impl Iterator<Item = (&(String, String), usize)> {
        self.counts
            .iter()
            .filter(|(_, c)| **c >= self.threshold)
            .map(|(k, c)| (k, *c))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Columns `bilingual_code`, `mono_code`, `count`, `surviving`.
    pub fn write_tsv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "bilingual_code\tmono_code\tcount\tsurviving")?;
        for ((c, d), n) in &self.counts {
            writeln!(out, "{c}\t{d}\t{n}\t{}", *n >= self.threshold)?;
        }
        Ok(())
    }

    /// Reads counts back from TSV. Survival is recomputed from `threshold`.
    pub fn read_tsv(reader: impl BufRead, threshold: usize) -> Result<Self, BiMatchError> {
        let mut counts = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if idx == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |message: &str| BiMatchError::Table {
                line: idx + 1,
                message: message.to_string(),
            };
            if cols.len() < 3 {
                return Err(bad("expected at least three columns"));
            }
            let n: usize = cols[2].trim().parse().map_err(|_| bad("count is not an integer"))?;
            counts.insert((cols[0].to_string(), cols[1].to_string()), n);
        }
        Ok(FieldCodeTable { counts, threshold })
    }
}

fn distinct_translations(group: &TranslationSense) -> Vec<&str> {
    let mut seen = BTreeSet::new();
    group
        .translations
        .iter()
        .map(String::as_str)
        .filter(|t| seen.insert(*t))
        .collect()
}

/// Counts every (group code, sense code) pair reachable through a group's
/// translations. Each translation sense is counted once per group.
pub fn build_field_code_table(entries: &[BilingualEntry], onto: &Resource, threshold: usize) -> FieldCodeTable {
    let counts = entries
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<(String, String), usize>, entry| {
            for group in &entry.senses {
                let Some(code) = &group.field_code else {
                    continue;
                };
                let mut senses = BTreeSet::new();
                for t in distinct_translations(group) {
                    senses.extend(onto.senses_of_word(t).into_iter().map(|s| &s.id));
                }
                for id in senses {
                    let sense = onto.get(id).expect("listed sense exists");
                    let codes: BTreeSet<&String> = sense.field_codes.iter().collect();
                    for d in codes {
                        *acc.entry((code.clone(), d.clone())).or_default() += 1;
                    }
                }
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    FieldCodeTable { counts, threshold }
}

/// Synsets holding senses of at least two distinct translations, ranked by
/// the number of translations they cover and then by id.
pub fn synset_coincidence(group: &TranslationSense, onto: &Resource) -> Vec<(Concept, usize)> {
    let words = distinct_translations(group);
    if words.len() < 2 {
        return Vec::new();
    }
    let mut coverage: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for t in &words {
        for sense in onto.senses_of_word(t) {
            if let Some(synset) = &sense.synset {
                coverage.entry(synset.as_str()).or_default().insert(t);
            }
        }
    }
    let mut out: Vec<(Concept, usize)> = coverage
        .into_iter()
        .filter(|(_, ws)| ws.len() >= 2)
        .map(|(s, ws)| (Concept::Synset(s.to_string()), ws.len()))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Distance in links from the concept of `id` to every concept above it,
/// up to `max` links.
pub fn concept_distances(onto: &Resource, id: &SenseId, max: usize) -> BTreeMap<Concept, usize> {
    let start = Concept::of(onto, id);
    let mut dist = BTreeMap::from([(start.clone(), 0)]);
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        let d = dist[&node];
        if d == max {
            continue;
        }
        for parent in node.parents(onto) {
            if !dist.contains_key(&parent) {
                dist.insert(parent.clone(), d + 1);
                queue.push_back(parent);
            }
        }
    }
    dist
}

/// The closest pair of senses from two different translations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NearPair {
    pub links: usize,
    pub ancestor: Concept,
    pub senses: (SenseId, SenseId),
}

/// Finds the sense pair, one from each of two distinct translations, with
/// the fewest combined links to a shared ancestor. Ties go to fewest links,
/// then ancestor id, then sense ids.
pub fn near_synset(group: &TranslationSense, onto: &Resource, max_links: usize) -> Option<NearPair> {
    let words = distinct_translations(group);
    if words.len() < 2 {
        return None;
    }
    let per_word: Vec<Vec<(SenseId, BTreeMap<Concept, usize>)>> = words
        .iter()
        .map(|t| {
            onto.senses_of_word(t)
                .into_iter()
                .map(|s| (s.id.clone(), concept_distances(onto, &s.id, max_links)))
                .collect()
        })
        .collect();
    let mut best: Option<NearPair> = None;
    for (i, a_senses) in per_word.iter().enumerate() {
        for b_senses in &per_word[i + 1..] {
            for (a, da) in a_senses {
                for (b, db) in b_senses {
                    for (concept, x) in da {
                        let Some(y) = db.get(concept) else {
                            continue;
                        };
                        if x + y > max_links {
                            continue;
                        }
                        let pair = if a <= b {
                            (a.clone(), b.clone())
                        } else {
                            (b.clone(), a.clone())
                        };
                        let candidate = NearPair {
                            links: x + y,
                            ancestor: concept.clone(),
                            senses: pair,
                        };
                        if best.as_ref().is_none_or(|b| candidate < *b) {
                            best = Some(candidate);
                        }
                    }
                }
            }
        }
    }
    best
}

/// A proposed attachment of one sense group to an ontology concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalMapping {
    pub source_word: String,
    /// 1-based position of the sense group within its entry.
    pub group: usize,
    pub concept: Concept,
    /// Representative sense of `concept`.
    pub right: SenseId,
    pub confidence: f64,
    pub phase: Phase,
}

impl LexicalMapping {
    /// The pseudo sense id naming this group on the dictionary side.
    pub fn left_id(&self, dictionary: &str) -> SenseId {
        SenseId::new(dictionary, &self.source_word, 0, self.group as u32)
    }

    pub fn to_match(&self, dictionary: &str) -> Result<Match, ModelError> {
        Match::new(
            self.left_id(dictionary),
            self.right.clone(),
            self.confidence,
            self.phase,
        )
    }
}

/// Single-translation candidates: the unambiguous sense, or senses whose
/// codes pair with the group code in the table, best count first.
pub fn single_translation(
    group: &TranslationSense,
    onto: &Resource,
    table: &FieldCodeTable,
    params: &BiParams,
) -> Vec<(SenseId, f64, Phase)> {
    let words = distinct_translations(group);
    let [t] = words.as_slice() else {
        return Vec::new();
    };
    let senses = onto.senses_of_word(t);
    if let [only] = senses.as_slice() {
        return vec![(only.id.clone(), params.single, Phase::SingleTranslation)];
    }
    let Some(code) = &group.field_code else {
        return Vec::new();
    };
    let mut hits: Vec<(SenseId, usize)> = senses
        .iter()
        .filter_map(|s| {
            s.field_codes
                .iter()
                .filter(|d| table.survives(code, d))
                .map(|d| table.count(code, d))
                .max()
                .map(|n| (s.id.clone(), n))
        })
        .collect();
    hits.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let top = hits.first().map(|h| h.1).unwrap_or(0);
    hits.into_iter()
        .map(|(id, n)| (id, params.field_code * n as f64 / top as f64, Phase::FieldCode))
        .collect()
}

fn map_group(
    entry: &BilingualEntry,
    index: usize,
    group: &TranslationSense,
    onto: &Resource,
    table: &FieldCodeTable,
    params: &BiParams,
) -> Vec<LexicalMapping> {
    let mapping = |concept: Concept, right: SenseId, confidence: f64, phase: Phase| LexicalMapping {
        source_word: entry.headword.clone(),
        group: index + 1,
        concept,
        right,
        confidence,
        phase,
    };
    let coincidences = synset_coincidence(group, onto);
    if !coincidences.is_empty() {
        return coincidences
            .into_iter()
            .filter_map(|(concept, _)| {
                let right = concept.representative(onto)?;
                Some(mapping(concept, right, params.base, Phase::SynsetCoincide))
            })
            .collect();
    }
    if let Some(near) = near_synset(group, onto, params.max_links) {
        let confidence = params.base * params.penalty.powi(near.links as i32);
        return near
            .ancestor
            .representative(onto)
            .map(|right| mapping(near.ancestor, right, confidence, Phase::NearSynset))
            .into_iter()
            .collect();
    }
    single_translation(group, onto, table, params)
        .into_iter()
        .map(|(id, confidence, phase)| mapping(Concept::Sense(id.clone()), id, confidence, phase))
        .collect()
}

/// Maps every sense group of every entry and returns the mappings sorted by
/// confidence (descending), then headword and group.
pub fn run_bilingual_match(
    entries: &[BilingualEntry],
    onto: &Resource,
    table: &FieldCodeTable,
    params: &BiParams,
) -> Vec<LexicalMapping> {
    let mut out: Vec<(usize, LexicalMapping)> = entries
        .par_iter()
        .flat_map_iter(|entry| {
            entry
                .senses
                .iter()
                .enumerate()
                .flat_map(move |(i, g)| map_group(entry, i, g, onto, table, params))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .enumerate()
        .collect();
    out.sort_by(|(ia, a), (ib, b)| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.source_word.cmp(&b.source_word))
            .then_with(|| a.group.cmp(&b.group))
            .then_with(|| ia.cmp(ib))
    });
    out.into_iter().map(|(_, m)| m).collect()
}
