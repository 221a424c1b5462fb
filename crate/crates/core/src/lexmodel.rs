//! In-memory model of lexical resources: senses, named hierarchies, synsets
//! and the match records that flow between the alignment stages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Is-a links of synset-style resources.
pub const HYPERNYM: &str = "hypernym";
/// Genus-sense links of dictionary-style resources.
pub const GENUS: &str = "genus";
/// Every resource carries these relations, possibly empty.
pub const RELATIONS: [&str; 2] = [GENUS, HYPERNYM];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("sense {0} is defined twice")]
    DuplicateSense(SenseId),
    #[error("sense {id} does not belong to resource '{resource}'")]
    ForeignSense { id: SenseId, resource: String },
    #[error("{relation} link from {from} points to unknown sense {to}")]
    DanglingReference {
        from: Box<SenseId>,
        to: Box<SenseId>,
        relation: String,
    },
    #[error("{relation} relation has a cycle: {}", display_path(.path))]
    Cycle { relation: String, path: Vec<SenseId> },
    #[error("unknown relation '{0}'")]
    UnknownRelation(String),
    #[error("unknown synset '{0}'")]
    UnknownSynset(String),
    #[error("unknown sense {0}")]
    UnknownSense(SenseId),
    #[error("headword must not be empty")]
    EmptyWord,
    #[error("invalid sense id '{0}': expected resource:word:homograph:sense")]
    InvalidId(String),
    #[error("match {left} -> {right} does not cross resources")]
    SameResource { left: Box<SenseId>, right: Box<SenseId> },
    #[error("confidence {0} is not a finite non-negative number")]
    InvalidConfidence(f64),
}

fn display_path(path: &[SenseId]) -> String {
    path.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> ")
}

/// Lowercases a headword and collapses runs of whitespace. Diacritics are kept.
pub fn normalize_headword(word: &str) -> String {
    word.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Identifies one sense as `(resource, word, homograph, sense number)`.
///
/// Dictionary-style resources use the homograph/sense triple directly
/// (`batter 2 0`); synset-style resources fix the homograph at 0 and use the
/// sense number (`BATTER-2` is `batter:0:2`). The textual form is
/// `resource:word:homograph:sense`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SenseId {
    pub resource: String,
    pub word: String,
    pub homograph: u32,
    pub sense_no: u32,
}

impl SenseId {
    pub fn new(resource: impl Into<String>, word: &str, homograph: u32, sense_no: u32) -> Self {
        SenseId {
            resource: resource.into(),
            word: normalize_headword(word),
            homograph,
            sense_no,
        }
    }
}

impl fmt::Display for SenseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}",
            self.resource, self.word, self.homograph, self.sense_no
        )
    }
}

impl FromStr for SenseId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidId(s.to_string());
        let (resource, rest) = s.split_once(':').ok_or_else(bad)?;
        let mut tail = rest.rsplitn(3, ':');
        let sense_no = tail.next().ok_or_else(bad)?;
        let homograph = tail.next().ok_or_else(bad)?;
        let word = tail.next().ok_or_else(bad)?;
        let word = normalize_headword(word);
        if resource.is_empty() || word.is_empty() {
            return Err(bad());
        }
        Ok(SenseId {
            resource: resource.to_string(),
            word,
            homograph: homograph.parse().map_err(|_| bad())?,
            sense_no: sense_no.parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for SenseId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SenseId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One meaning of a headword in one resource.
#[derive(Debug, Clone, PartialEq)]
pub struct Sense {
    pub id: SenseId,
    pub pos: String,
    pub definition: String,
    pub examples: Vec<String>,
    pub synset: Option<String>,
    pub hypernyms: Vec<SenseId>,
    pub genus: Vec<SenseId>,
    pub semantic_code: Option<String>,
    pub field_codes: Vec<String>,
    pub synonyms: Vec<String>,
}

impl Sense {
    /// A bare sense with no links or codes.
    pub fn new(id: SenseId, pos: &str, definition: &str) -> Self {
        Sense {
            id,
            pos: pos.to_string(),
            definition: definition.to_string(),
            examples: Vec::new(),
            synset: None,
            hypernyms: Vec::new(),
            genus: Vec::new(),
            semantic_code: None,
            field_codes: Vec::new(),
            synonyms: Vec::new(),
        }
    }

    pub fn word(&self) -> &str {
        &self.id.word
    }

    /// Outgoing links of the named relation.
    pub fn links(&self, relation: &str) -> Option<&[SenseId]> {
        match relation {
            HYPERNYM => Some(&self.hypernyms),
            GENUS => Some(&self.genus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Hierarchy {
    parents: BTreeMap<SenseId, Vec<SenseId>>,
    children: BTreeMap<SenseId, Vec<SenseId>>,
}

/// A named, validated collection of senses.
///
/// A resource can also act as a filtered view (see [`Resource::hide`]):
/// hidden senses disappear from word lookups and enumeration but stay
/// reachable through the hierarchy queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Resource {
    name: String,
    senses: BTreeMap<SenseId, Sense>,
    by_word: BTreeMap<String, Vec<SenseId>>,
    relations: BTreeMap<String, Hierarchy>,
    synsets: BTreeMap<String, BTreeSet<SenseId>>,
    hidden: BTreeSet<SenseId>,
}

impl Resource {
    /// Builds and validates a resource. Fails on duplicate ids, senses from
    /// another resource, dangling links and cyclic relations.
    pub fn new(name: &str, senses: impl IntoIterator<Item = Sense>) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for mut sense in senses {
            sense.id.word = normalize_headword(&sense.id.word);
            if sense.id.word.is_empty() {
                return Err(ModelError::EmptyWord);
            }
            if sense.id.resource != name {
                return Err(ModelError::ForeignSense {
                    id: sense.id,
                    resource: name.to_string(),
                });
            }
            if map.contains_key(&sense.id) {
                return Err(ModelError::DuplicateSense(sense.id));
            }
            map.insert(sense.id.clone(), sense);
        }

        let mut by_word: BTreeMap<String, Vec<SenseId>> = BTreeMap::new();
        let mut synsets: BTreeMap<String, BTreeSet<SenseId>> = BTreeMap::new();
        let mut relations = BTreeMap::new();
        for relation in RELATIONS {
            relations.insert(relation.to_string(), Hierarchy::default());
        }

        for (id, sense) in &map {
            by_word.entry(id.word.clone()).or_default().push(id.clone());
            if let Some(synset) = &sense.synset {
                synsets.entry(synset.clone()).or_default().insert(id.clone());
            }
            for relation in RELATIONS {
                let links = sense.links(relation).unwrap_or_default();
                let hierarchy = relations.get_mut(relation).expect("relation registered");
                for target in links {
                    if !map.contains_key(target) {
                        return Err(ModelError::DanglingReference {
                            from: Box::new(id.clone()),
                            to: Box::new(target.clone()),
                            relation: relation.to_string(),
                        });
                    }
                    let parents = hierarchy.parents.entry(id.clone()).or_default();
                    if !parents.contains(target) {
                        parents.push(target.clone());
                        hierarchy.children.entry(target.clone()).or_default().push(id.clone());
                    }
                }
            }
        }
        for hierarchy in relations.values_mut() {
            hierarchy.parents.values_mut().for_each(|v| v.sort());
            hierarchy.children.values_mut().for_each(|v| v.sort());
        }

        let resource = Resource {
            name: name.to_string(),
            senses: map,
            by_word,
            relations,
            synsets,
            hidden: BTreeSet::new(),
        };
        for relation in RELATIONS {
            if let Some(path) = resource.find_cycle(relation) {
                return Err(ModelError::Cycle {
                    relation: relation.to_string(),
                    path,
                });
            }
        }
        Ok(resource)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of visible senses.
    pub fn len(&self) -> usize {
        self.senses.len() - self.hidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Looks up a sense, hidden or not.
    pub fn get(&self, id: &SenseId) -> Option<&Sense> {
        self.senses.get(id)
    }

    pub fn contains(&self, id: &SenseId) -> bool {
        self.senses.contains_key(id)
    }

    pub fn is_hidden(&self, id: &SenseId) -> bool {
        self.hidden.contains(id)
    }

    pub fn hidden(&self) -> &BTreeSet<SenseId> {
        &self.hidden
    }

    /// Visible senses in id order.
    pub fn senses(&self) -> impl Iterator<Item = &Sense> {
        self.senses.values().filter(|s| !self.hidden.contains(&s.id))
    }

    /// Every sense including hidden ones, in id order.
    pub fn all_senses(&self) -> impl Iterator<Item = &Sense> {
        self.senses.values()
    }

    /// Headwords with at least one visible sense, in lexical order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.by_word
            .iter()
            .filter(|(_, ids)| ids.iter().any(|id| !self.hidden.contains(id)))
            .map(|(w, _)| w.as_str())
    }

    /// Visible senses of a headword in (homograph, sense number) order.
    /// Absent words give an empty list.
    pub fn senses_of_word(&self, word: &str) -> Vec<&Sense> {
        let key = normalize_headword(word);
        self.by_word
            .get(&key)
            .map(|ids| {
                ids.iter()
                    .filter(|id| !self.hidden.contains(*id))
                    .map(|id| &self.senses[id])
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn is_unambiguous(&self, word: &str) -> bool {
        self.senses_of_word(word).len() == 1
    }

    fn hierarchy(&self, relation: &str) -> Result<&Hierarchy, ModelError> {
        self.relations
            .get(relation)
            .ok_or_else(|| ModelError::UnknownRelation(relation.to_string()))
    }

    fn require(&self, id: &SenseId) -> Result<(), ModelError> {
        if self.senses.contains_key(id) {
            Ok(())
        } else {
            Err(ModelError::UnknownSense(id.clone()))
        }
    }

    pub fn relation_names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    /// Immediate parents under a relation, in id order.
    pub fn parents(&self, relation: &str, id: &SenseId) -> Result<&[SenseId], ModelError> {
        let hierarchy = self.hierarchy(relation)?;
        self.require(id)?;
        Ok(hierarchy.parents.get(id).map(Vec::as_slice).unwrap_or_default())
    }

    /// Immediate children under a relation, in id order.
    pub fn children(&self, relation: &str, id: &SenseId) -> Result<&[SenseId], ModelError> {
        let hierarchy = self.hierarchy(relation)?;
        self.require(id)?;
        Ok(hierarchy.children.get(id).map(Vec::as_slice).unwrap_or_default())
    }

    /// Transitive ancestors, nearest first. Each breadth-first level is
    /// emitted in id order; a sense reachable along several paths appears
    /// once, at its shortest distance.
    pub fn ancestors(&self, relation: &str, id: &SenseId) -> Result<Vec<SenseId>, ModelError> {
        let hierarchy = self.hierarchy(relation)?;
        self.require(id)?;
        let mut seen = BTreeSet::from([id.clone()]);
        let mut out = Vec::new();
        let mut frontier = vec![id.clone()];
        while !frontier.is_empty() {
            let mut next = BTreeSet::new();
            for node in &frontier {
                for parent in hierarchy.parents.get(node).into_iter().flatten() {
                    if !seen.contains(parent) {
                        next.insert(parent.clone());
                    }
                }
            }
            seen.extend(next.iter().cloned());
            out.extend(next.iter().cloned());
            frontier = next.into_iter().collect();
        }
        Ok(out)
    }

    /// Ancestors paired with their link distance from `id`.
    pub fn ancestor_depths(&self, relation: &str, id: &SenseId) -> Result<Vec<(SenseId, usize)>, ModelError> {
        let hierarchy = self.hierarchy(relation)?;
        self.require(id)?;
        let mut seen = BTreeSet::from([id.clone()]);
        let mut out = Vec::new();
        let mut frontier = vec![id.clone()];
        let mut depth = 0;
        while !frontier.is_empty() {
            depth += 1;
            let mut next = BTreeSet::new();
            for node in &frontier {
                for parent in hierarchy.parents.get(node).into_iter().flatten() {
                    if !seen.contains(parent) {
                        next.insert(parent.clone());
                    }
                }
            }
            seen.extend(next.iter().cloned());
            out.extend(next.iter().map(|p| (p.clone(), depth)));
            frontier = next.into_iter().collect();
        }
        Ok(out)
    }

    /// The root plus every transitive descendant.
    pub fn subtree(&self, relation: &str, root: &SenseId) -> Result<BTreeSet<SenseId>, ModelError> {
        let hierarchy = self.hierarchy(relation)?;
        self.require(root)?;
        let mut out = BTreeSet::from([root.clone()]);
        let mut stack = vec![root.clone()];
        while let Some(node) = stack.pop() {
            for child in hierarchy.children.get(&node).into_iter().flatten() {
                if out.insert(child.clone()) {
                    stack.push(child.clone());
                }
            }
        }
        Ok(out)
    }

    pub fn synset_of(&self, id: &SenseId) -> Option<&str> {
        self.senses.get(id).and_then(|s| s.synset.as_deref())
    }

    pub fn synset_members(&self, synset: &str) -> Result<&BTreeSet<SenseId>, ModelError> {
        self.synsets
            .get(synset)
            .ok_or_else(|| ModelError::UnknownSynset(synset.to_string()))
    }

    pub fn synset_ids(&self) -> impl Iterator<Item = &str> {
        self.synsets.keys().map(String::as_str)
    }

    /// The sense together with its synset mates; just the sense when it has
    /// no synset.
    pub fn concept_members(&self, id: &SenseId) -> Vec<SenseId> {
        match self.synset_of(id) {
            Some(synset) => self.synsets[synset].iter().cloned().collect(),
            None => vec![id.clone()],
        }
    }

    /// A view of this resource with the given senses hidden from lookups.
    /// Hierarchy links through hidden senses remain traversable.
    pub fn hide<'a>(&self, ids: impl IntoIterator<Item = &'a SenseId>) -> Result<Resource, ModelError> {
        let mut view = self.clone();
        for id in ids {
            self.require(id)?;
            view.hidden.insert(id.clone());
        }
        Ok(view)
    }

    fn find_cycle(&self, relation: &str) -> Option<Vec<SenseId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let hierarchy = &self.relations[relation];
        let mut marks: BTreeMap<&SenseId, Mark> = BTreeMap::new();
        for start in self.senses.keys() {
            if marks.contains_key(start) {
                continue;
            }
            // explicit stack of (node, next parent index)
            let mut stack: Vec<(&SenseId, usize)> = vec![(start, 0)];
            marks.insert(start, Mark::Open);
            while let Some((node, idx)) = stack.pop() {
                let parents = hierarchy.parents.get(node).map(Vec::as_slice).unwrap_or_default();
                if idx < parents.len() {
                    stack.push((node, idx + 1));
                    let parent = &parents[idx];
                    match marks.get(parent) {
                        Some(Mark::Open) => {
                            let pos = stack.iter().position(|(n, _)| *n == parent).unwrap_or(0);
                            let mut path: Vec<SenseId> = stack[pos..].iter().map(|(n, _)| (*n).clone()).collect();
                            path.push(parent.clone());
                            return Some(path);
                        }
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(parent, Mark::Open);
                            stack.push((parent, 0));
                        }
                    }
                } else {
                    marks.insert(node, Mark::Done);
                }
            }
        }
        None
    }
}

/// Which algorithm step proposed a match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Seed,
    Unambiguous,
    LocalUnambiguous,
    AncestorScan,
    Defmatch,
    SynsetCoincide,
    NearSynset,
    SingleTranslation,
    FieldCode,
}

impl Phase {
    pub const ALL: [Phase; 9] = [
        Phase::Seed,
        Phase::Unambiguous,
        Phase::LocalUnambiguous,
        Phase::AncestorScan,
        Phase::Defmatch,
        Phase::SynsetCoincide,
        Phase::NearSynset,
        Phase::SingleTranslation,
        Phase::FieldCode,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Seed => "seed",
            Phase::Unambiguous => "unambiguous",
            Phase::LocalUnambiguous => "local-unambiguous",
            Phase::AncestorScan => "ancestor-scan",
            Phase::Defmatch => "defmatch",
            Phase::SynsetCoincide => "synset-coincide",
            Phase::NearSynset => "near-synset",
            Phase::SingleTranslation => "single-translation",
            Phase::FieldCode => "field-code",
        }
    }

    /// Phases produced by the bilingual matcher, whose left side is a
    /// translation group rather than a monolingual sense.
    pub fn is_bilingual(self) -> bool {
        matches!(
            self,
            Phase::SynsetCoincide | Phase::NearSynset | Phase::SingleTranslation | Phase::FieldCode
        )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown phase '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchStatus {
    #[default]
    Proposed,
    Accepted,
    Rejected,
    Corrected,
}

/// A proposed pairing of senses from two different resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub left: SenseId,
    pub right: SenseId,
    pub confidence: f64,
    pub phase: Phase,
    #[serde(default)]
    pub status: MatchStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_right: Option<SenseId>,
}

impl Match {
    pub fn new(left: SenseId, right: SenseId, confidence: f64, phase: Phase) -> Result<Self, ModelError> {
        if left.resource == right.resource {
            return Err(ModelError::SameResource {
                left: Box::new(left),
                right: Box::new(right),
            });
        }
        if !confidence.is_finite() || confidence < 0.0 {
            return Err(ModelError::InvalidConfidence(confidence));
        }
        Ok(Match {
            left,
            right,
            confidence,
            phase,
            status: MatchStatus::Proposed,
            corrected_right: None,
        })
    }

    /// The right-hand sense after any correction.
    pub fn final_right(&self) -> &SenseId {
        self.corrected_right.as_ref().unwrap_or(&self.right)
    }

    pub fn accept(&mut self) {
        self.status = MatchStatus::Accepted;
        self.corrected_right = None;
    }

    pub fn reject(&mut self) {
        self.status = MatchStatus::Rejected;
        self.corrected_right = None;
    }

    pub fn correct(&mut self, right: SenseId) -> Result<(), ModelError> {
        if right.resource == self.left.resource {
            return Err(ModelError::SameResource {
                left: Box::new(self.left.clone()),
                right: Box::new(right),
            });
        }
        self.status = MatchStatus::Corrected;
        self.corrected_right = Some(right);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ListLabel {
    M1,
    M2,
    M3,
    #[serde(rename = "output")]
    Output,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{side} sense {id} is already matched in list {label:?}")]
pub struct MatchConflict {
    pub label: ListLabel,
    pub side: &'static str,
    pub id: SenseId,
}

/// An ordered, one-to-one list of matches.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchList {
    label: ListLabel,
    entries: Vec<Match>,
    lefts: BTreeSet<SenseId>,
    rights: BTreeSet<SenseId>,
}

impl MatchList {
    pub fn new(label: ListLabel) -> Self {
        MatchList {
            label,
            entries: Vec::new(),
            lefts: BTreeSet::new(),
            rights: BTreeSet::new(),
        }
    }

    pub fn label(&self) -> ListLabel {
        self.label
    }

    pub fn push(&mut self, m: Match) -> Result<(), MatchConflict> {
        if self.lefts.contains(&m.left) {
            return Err(MatchConflict {
                label: self.label,
                side: "left",
                id: m.left,
            });
        }
        if self.rights.contains(&m.right) {
            return Err(MatchConflict {
                label: self.label,
                side: "right",
                id: m.right,
            });
        }
        self.lefts.insert(m.left.clone());
        self.rights.insert(m.right.clone());
        self.entries.push(m);
        Ok(())
    }

    pub fn contains_left(&self, id: &SenseId) -> bool {
        self.lefts.contains(id)
    }

    pub fn contains_right(&self, id: &SenseId) -> bool {
        self.rights.contains(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Match> {
        self.entries.iter()
    }

    pub fn as_slice(&self) -> &[Match] {
        &self.entries
    }

    /// Removes and returns every entry, leaving the list empty.
    pub fn drain(&mut self) -> Vec<Match> {
        self.lefts.clear();
        self.rights.clear();
        std::mem::take(&mut self.entries)
    }

    pub fn into_vec(self) -> Vec<Match> {
        self.entries
    }

    /// Stable sort of the entries; the one-to-one index is unaffected.
    pub fn sort_by(&mut self, cmp: impl FnMut(&Match, &Match) -> std::cmp::Ordering) {
        self.entries.sort_by(cmp);
    }
}

impl<'a> IntoIterator for &'a MatchList {
    type Item = &'a Match;
    type IntoIter = std::slice::Iter<'a, Match>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(word: &str, h: u32, s: u32) -> SenseId {
        SenseId::new("r", word, h, s)
    }

    fn sense(word: &str, h: u32, s: u32, parents: &[SenseId]) -> Sense {
        let mut sense = Sense::new(id(word, h, s), "n", "");
        sense.hypernyms = parents.to_vec();
        sense
    }

    fn chain() -> Resource {
        // c -> b -> a
        Resource::new(
            "r",
            vec![
                sense("a", 0, 1, &[]),
                sense("b", 0, 1, &[id("a", 0, 1)]),
                sense("c", 0, 1, &[id("b", 0, 1)]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn sense_id_round_trips_multiword_headwords() {
        let s = SenseId::new("wn", "Swan  Dive", 0, 1);
        assert_eq!(s.to_string(), "wn:swan dive:0:1");
        assert_eq!("wn:swan dive:0:1".parse::<SenseId>().unwrap(), s);
        assert!("wn:batter:x:1".parse::<SenseId>().is_err());
        assert!("batter".parse::<SenseId>().is_err());
        assert!(":batter:0:1".parse::<SenseId>().is_err());
    }

    #[test]
    fn headwords_keep_diacritics() {
        assert_eq!(normalize_headword("Murciélago"), "murciélago");
    }

    #[test]
    fn subtree_of_chain_root_is_whole_chain() {
        let r = chain();
        let all: BTreeSet<_> = [id("a", 0, 1), id("b", 0, 1), id("c", 0, 1)].into();
        assert_eq!(r.subtree(HYPERNYM, &id("a", 0, 1)).unwrap(), all);
        assert_eq!(
            r.subtree(HYPERNYM, &id("c", 0, 1)).unwrap(),
            BTreeSet::from([id("c", 0, 1)])
        );
    }

    #[test]
    fn ancestors_nearest_first() {
        let r = chain();
        assert_eq!(
            r.ancestors(HYPERNYM, &id("c", 0, 1)).unwrap(),
            vec![id("b", 0, 1), id("a", 0, 1)]
        );
        assert!(r.ancestors(HYPERNYM, &id("a", 0, 1)).unwrap().is_empty());
        assert!(matches!(
            r.ancestors("meronym", &id("a", 0, 1)),
            Err(ModelError::UnknownRelation(_))
        ));
    }

    #[test]
    fn dag_ancestors_are_level_ordered_and_deduplicated() {
        // d has parents c and b; both reach a
        let r = Resource::new(
            "r",
            vec![
                sense("a", 0, 1, &[]),
                sense("b", 0, 1, &[id("a", 0, 1)]),
                sense("c", 0, 1, &[id("a", 0, 1)]),
                sense("d", 0, 1, &[id("c", 0, 1), id("b", 0, 1)]),
            ],
        )
        .unwrap();
        assert_eq!(
            r.ancestors(HYPERNYM, &id("d", 0, 1)).unwrap(),
            vec![id("b", 0, 1), id("c", 0, 1), id("a", 0, 1)]
        );
    }

    #[test]
    fn cycles_are_rejected_with_path() {
        let err = Resource::new(
            "r",
            vec![
                sense("a", 0, 1, &[id("c", 0, 1)]),
                sense("b", 0, 1, &[id("a", 0, 1)]),
                sense("c", 0, 1, &[id("b", 0, 1)]),
            ],
        )
        .unwrap_err();
        match err {
            ModelError::Cycle { relation, path } => {
                assert_eq!(relation, HYPERNYM);
                assert_eq!(path.first(), path.last());
                assert_eq!(path.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loop_is_a_cycle() {
        assert!(matches!(
            Resource::new("r", vec![sense("a", 0, 1, &[id("a", 0, 1)])]),
            Err(ModelError::Cycle { .. })
        ));
    }

    #[test]
    fn dangling_and_foreign_ids_are_rejected() {
        assert!(matches!(
            Resource::new("r", vec![sense("a", 0, 1, &[id("zz", 0, 1)])]),
            Err(ModelError::DanglingReference { .. })
        ));
        let foreign = Sense::new(SenseId::new("other", "a", 0, 1), "n", "");
        assert!(matches!(
            Resource::new("r", vec![foreign]),
            Err(ModelError::ForeignSense { .. })
        ));
        assert!(matches!(
            Resource::new("r", vec![sense("a", 0, 1, &[]), sense("a", 0, 1, &[])]),
            Err(ModelError::DuplicateSense(_))
        ));
    }

    #[test]
    fn synset_lookup_both_directions() {
        let mut a = sense("school", 0, 2, &[]);
        a.synset = Some("school-of-fish".into());
        let mut b = sense("shoal", 0, 1, &[]);
        b.synset = Some("school-of-fish".into());
        let c = sense("bench", 0, 1, &[]);
        let r = Resource::new("r", vec![a, b, c]).unwrap();
        assert_eq!(r.synset_of(&id("school", 0, 2)), Some("school-of-fish"));
        assert_eq!(r.synset_of(&id("bench", 0, 1)), None);
        let members = r.synset_members("school-of-fish").unwrap();
        assert!(members.contains(&id("shoal", 0, 1)));
        assert!(matches!(r.synset_members("nope"), Err(ModelError::UnknownSynset(_))));
    }

    #[test]
    fn hidden_senses_leave_lookups_but_not_hierarchy() {
        let r = chain();
        let view = r.hide([&id("b", 0, 1)]).unwrap();
        assert!(view.senses_of_word("b").is_empty());
        assert_eq!(view.len(), 2);
        assert_eq!(
            view.ancestors(HYPERNYM, &id("c", 0, 1)).unwrap(),
            vec![id("b", 0, 1), id("a", 0, 1)]
        );
        assert!(!view.words().any(|w| w == "b"));
        assert!(r.hide([&id("zz", 0, 1)]).is_err());
    }

    #[test]
    fn match_list_is_one_to_one() {
        let l = SenseId::new("a", "x", 0, 0);
        let r1 = SenseId::new("b", "x", 0, 1);
        let r2 = SenseId::new("b", "x", 0, 2);
        let mut list = MatchList::new(ListLabel::M1);
        list.push(Match::new(l.clone(), r1.clone(), 1.0, Phase::Seed).unwrap())
            .unwrap();
        assert!(list.push(Match::new(l.clone(), r2, 1.0, Phase::Seed).unwrap()).is_err());
        assert!(list
            .push(Match::new(SenseId::new("a", "y", 0, 0), r1, 1.0, Phase::Seed).unwrap())
            .is_err());
        assert_eq!(list.len(), 1);
        assert!(Match::new(l.clone(), l, 1.0, Phase::Seed).is_err());
    }

    #[test]
    fn correction_records_new_target() {
        let mut m = Match::new(
            SenseId::new("a", "x", 0, 0),
            SenseId::new("b", "x", 0, 1),
            0.5,
            Phase::Defmatch,
        )
        .unwrap();
        m.correct(SenseId::new("b", "x", 0, 2)).unwrap();
        assert_eq!(m.status, MatchStatus::Corrected);
        assert_eq!(m.final_right(), &SenseId::new("b", "x", 0, 2));
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"phase\":\"defmatch\""));
        let back: Match = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
