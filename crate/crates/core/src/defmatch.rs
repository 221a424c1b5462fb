//! Definition Match: align the senses of one headword across two resources
//! by the words their definitions (and neighbourhoods) have in common.
//!
//! For a word `w` the matcher collects a context set of stems shared by both
//! resources, scores each left sense against each stem (`L`), each stem
//! against each right sense (`W`), multiplies the two into a similarity
//! matrix and then greedily reads matches off the largest cells.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Index, IndexMut};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{content_words, StemmerRules};
use crate::lexmodel::{ListLabel, Match, MatchList, Phase, Resource, Sense, SenseId, HYPERNYM};

/// Evidence weight when a stem is present in a left sense.
pub const L_PRESENT: f64 = 1.0;
/// Weight of a stem that is a synonym or immediate superordinate.
pub const W_SYNONYM: f64 = 1.0;
/// Weight of a stem found in the right sense's definition.
pub const W_DEFINITION: f64 = 0.8;
/// Weight of a stem naming a sibling or grandparent.
pub const W_SIBLING: f64 = 0.6;
/// Weight given to absent evidence on either side.
pub const ABSENT: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum DefMatchError {
    #[error("'{word}' has no senses in {resource}")]
    NoSenses { word: String, resource: String },
    #[error("cannot multiply {0}x{1} by {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// How the greedy extractor retires a chosen cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Deletion {
    /// Remove the chosen row and column: one-to-one matching.
    #[default]
    RowAndColumn,
    /// Remove only the chosen cell.
    CellOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefMatchParams {
    /// Cells below this value are never proposed.
    pub floor: f64,
    /// Score example-sentence stems like definition stems.
    pub include_examples: bool,
    pub deletion: Deletion,
    /// Relation used for superordinates and siblings on the right side.
    pub right_relation: String,
    /// Restrict to senses with this part of speech.
    pub pos: Option<String>,
}

impl Default for DefMatchParams {
    fn default() -> Self {
        DefMatchParams {
            floor: 0.0,
            include_examples: true,
            deletion: Deletion::RowAndColumn,
            right_relation: HYPERNYM.to_string(),
            pos: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Definition,
    Example,
    Synonym,
    Superordinate,
    Sibling,
    SuperSuperordinate,
}

/// Stems that occur around a word in both resources, minus the word itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    pub word: String,
    pub stems: Vec<String>,
    pub provenance: BTreeMap<String, BTreeSet<Provenance>>,
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// Matrix product `a * b`.
pub fn multiply(a: &Matrix, b: &Matrix) -> Result<Matrix, DefMatchError> {
    if a.cols != b.rows {
        return Err(DefMatchError::DimensionMismatch(a.rows, a.cols, b.rows, b.cols));
    }
    let mut out = Matrix::filled(a.rows, b.cols, 0.0);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            for j in 0..b.cols {
                out[(i, j)] += aik * b[(k, j)];
            }
        }
    }
    Ok(out)
}

/// One cell chosen by the greedy extractor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extraction {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Repeatedly takes the largest remaining cell (ties to the smallest
/// `(row, col)`) until the maximum drops below `floor` or nothing is left.
pub fn greedy_extract(sim: &Matrix, floor: f64, deletion: Deletion) -> Vec<Extraction> {
    let mut cells: Vec<Extraction> = (0..sim.rows)
        .flat_map(|row| {
            (0..sim.cols).map(move |col| Extraction {
                row,
                col,
                value: sim[(row, col)],
            })
        })
        .collect();
    cells.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.row.cmp(&b.row))
            .then(a.col.cmp(&b.col))
    });

    let mut used_rows = vec![false; sim.rows];
    let mut used_cols = vec![false; sim.cols];
    let mut out = Vec::new();
    for cell in cells {
        if cell.value.is_nan() || cell.value < floor {
            break;
        }
        if deletion == Deletion::RowAndColumn {
            if used_rows[cell.row] || used_cols[cell.col] {
                continue;
            }
            used_rows[cell.row] = true;
            used_cols[cell.col] = true;
        }
        out.push(cell);
    }
    out
}

/// Stems describing one right-hand sense through its hierarchy neighbourhood.
#[derive(Debug, Default)]
struct Neighbourhood {
    definition: BTreeSet<String>,
    examples: BTreeSet<String>,
    synonyms: BTreeSet<String>,
    superordinates: BTreeSet<String>,
    siblings: BTreeSet<String>,
    grandparents: BTreeSet<String>,
}

fn words_of(resource: &Resource, ids: &BTreeSet<SenseId>, rules: &StemmerRules) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for id in ids {
        out.extend(content_words(&id.word, rules));
        if let Some(sense) = resource.get(id) {
            for syn in &sense.synonyms {
                out.extend(content_words(syn, rules));
            }
        }
    }
    out
}

fn expand(resource: &Resource, ids: impl IntoIterator<Item = SenseId>) -> BTreeSet<SenseId> {
    ids.into_iter().flat_map(|id| resource.concept_members(&id)).collect()
}

fn parents_of(resource: &Resource, relation: &str, ids: &BTreeSet<SenseId>) -> BTreeSet<SenseId> {
    let direct = ids.iter().flat_map(|id| {
        resource
            .parents(relation, id)
            .map(<[SenseId]>::to_vec)
            .unwrap_or_default()
    });
    expand(resource, direct.collect::<Vec<_>>())
}

fn neighbourhood(resource: &Resource, sense: &Sense, relation: &str, rules: &StemmerRules) -> Neighbourhood {
    let members = expand(resource, [sense.id.clone()]);
    let parents = parents_of(resource, relation, &members);
    let grandparents = parents_of(resource, relation, &parents);
    let mut siblings = BTreeSet::new();
    for parent in &parents {
        for child in resource.children(relation, parent).unwrap_or_default() {
            siblings.extend(resource.concept_members(child));
        }
    }
    siblings.retain(|s| !members.contains(s));

    let mut synonyms = words_of(resource, &members, rules);
    for syn in &sense.synonyms {
        synonyms.extend(content_words(syn, rules));
    }
    Neighbourhood {
        definition: content_words(&sense.definition, rules),
        examples: sense.examples.iter().flat_map(|e| content_words(e, rules)).collect(),
        synonyms,
        superordinates: words_of(resource, &parents, rules),
        siblings: words_of(resource, &siblings, rules),
        grandparents: words_of(resource, &grandparents, rules),
    }
}

fn left_stems(sense: &Sense, rules: &StemmerRules, include_examples: bool) -> BTreeSet<String> {
    let mut stems = content_words(&sense.definition, rules);
    if include_examples {
        for example in &sense.examples {
            stems.extend(content_words(example, rules));
        }
    }
    stems
}

fn senses_for<'a>(resource: &'a Resource, word: &str, pos: Option<&str>) -> Vec<&'a Sense> {
    resource
        .senses_of_word(word)
        .into_iter()
        .filter(|s| pos.is_none_or(|p| s.pos == p))
        .collect()
}

/// Gathers the context set for `word` from the left senses' definitions and
/// examples, and the right senses' definitions, examples, synonyms,
/// superordinates, siblings and grandparents; keeps stems seen on both sides.
pub fn build_context_set(
    word: &str,
    left: &Resource,
    right: &Resource,
    rules: &StemmerRules,
    params: &DefMatchParams,
) -> Result<ContextSet, DefMatchError> {
    let lefts = senses_for(left, word, params.pos.as_deref());
    let rights = senses_for(right, word, params.pos.as_deref());
    for (senses, resource) in [(&lefts, left), (&rights, right)] {
        if senses.is_empty() {
            return Err(DefMatchError::NoSenses {
                word: word.to_string(),
                resource: resource.name().to_string(),
            });
        }
    }
    let neighbourhoods: Vec<Neighbourhood> = rights
        .iter()
        .map(|s| neighbourhood(right, s, &params.right_relation, rules))
        .collect();
    Ok(context_from(word, &lefts, &neighbourhoods, rules))
}

fn context_from(word: &str, lefts: &[&Sense], rights: &[Neighbourhood], rules: &StemmerRules) -> ContextSet {
    let mut left_side: BTreeMap<String, BTreeSet<Provenance>> = BTreeMap::new();
    for sense in lefts {
        for stem in content_words(&sense.definition, rules) {
            left_side.entry(stem).or_default().insert(Provenance::Definition);
        }
        for example in &sense.examples {
            for stem in content_words(example, rules) {
                left_side.entry(stem).or_default().insert(Provenance::Example);
            }
        }
    }
    let mut right_side: BTreeMap<String, BTreeSet<Provenance>> = BTreeMap::new();
    for n in rights {
        let groups = [
            (&n.definition, Provenance::Definition),
            (&n.examples, Provenance::Example),
            (&n.synonyms, Provenance::Synonym),
            (&n.superordinates, Provenance::Superordinate),
            (&n.siblings, Provenance::Sibling),
            (&n.grandparents, Provenance::SuperSuperordinate),
        ];
        for (stems, prov) in groups {
            for stem in stems {
                right_side.entry(stem.clone()).or_default().insert(prov);
            }
        }
    }
    let own = content_words(word, rules);
    let mut provenance = BTreeMap::new();
    for (stem, mut provs) in left_side {
        if own.contains(&stem) {
            continue;
        }
        if let Some(more) = right_side.get(&stem) {
            provs.extend(more.iter().copied());
            provenance.insert(stem, provs);
        }
    }
    ContextSet {
        word: word.to_string(),
        stems: provenance.keys().cloned().collect(),
        provenance,
    }
}

/// Rows are left senses, columns are context stems.
pub fn build_l(senses: &[&Sense], ctx: &ContextSet, rules: &StemmerRules, include_examples: bool) -> Matrix {
    let mut l = Matrix::filled(senses.len(), ctx.stems.len(), ABSENT);
    for (i, sense) in senses.iter().enumerate() {
        let stems = left_stems(sense, rules, include_examples);
        for (x, stem) in ctx.stems.iter().enumerate() {
            if stems.contains(stem) {
                l[(i, x)] = L_PRESENT;
            }
        }
    }
    l
}

/// Rows are context stems, columns are right senses. Each entry takes the
/// strongest applicable relation between the stem and the sense.
pub fn build_w(
    ctx: &ContextSet,
    senses: &[&Sense],
    resource: &Resource,
    rules: &StemmerRules,
    params: &DefMatchParams,
) -> Matrix {
    let hoods: Vec<Neighbourhood> = senses
        .iter()
        .map(|s| neighbourhood(resource, s, &params.right_relation, rules))
        .collect();
    weights(ctx, &hoods, params.include_examples)
}

fn weights(ctx: &ContextSet, hoods: &[Neighbourhood], include_examples: bool) -> Matrix {
    let mut w = Matrix::filled(ctx.stems.len(), hoods.len(), ABSENT);
    for (x, stem) in ctx.stems.iter().enumerate() {
        for (j, n) in hoods.iter().enumerate() {
            w[(x, j)] = if n.synonyms.contains(stem) || n.superordinates.contains(stem) {
                W_SYNONYM
            } else if n.definition.contains(stem) || (include_examples && n.examples.contains(stem)) {
                W_DEFINITION
            } else if n.siblings.contains(stem) || n.grandparents.contains(stem) {
                W_SIBLING
            } else {
                ABSENT
            };
        }
    }
    w
}

/// The evidence matrices for one headword.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub word: String,
    pub rows: Vec<SenseId>,
    pub cols: Vec<SenseId>,
    pub context: ContextSet,
    pub l: Matrix,
    pub w: Matrix,
    pub sim: Matrix,
}

impl SimilarityMatrix {
    pub fn value(&self, left: &SenseId, right: &SenseId) -> Option<f64> {
        let i = self.rows.iter().position(|r| r == left)?;
        let j = self.cols.iter().position(|c| c == right)?;
        Some(self.sim[(i, j)])
    }
}

/// Builds context set, `L`, `W` and `SIM` for one headword.
pub fn similarity(
    word: &str,
    left: &Resource,
    right: &Resource,
    rules: &StemmerRules,
    params: &DefMatchParams,
) -> Result<SimilarityMatrix, DefMatchError> {
    let lefts = senses_for(left, word, params.pos.as_deref());
    let rights = senses_for(right, word, params.pos.as_deref());
    for (senses, resource) in [(&lefts, left), (&rights, right)] {
        if senses.is_empty() {
            return Err(DefMatchError::NoSenses {
                word: word.to_string(),
                resource: resource.name().to_string(),
            });
        }
    }
    let hoods: Vec<Neighbourhood> = rights
        .iter()
        .map(|s| neighbourhood(right, s, &params.right_relation, rules))
        .collect();
    let context = context_from(word, &lefts, &hoods, rules);
    let l = build_l(&lefts, &context, rules, params.include_examples);
    let w = weights(&context, &hoods, params.include_examples);
    let sim = multiply(&l, &w)?;
    Ok(SimilarityMatrix {
        word: word.to_string(),
        rows: lefts.iter().map(|s| s.id.clone()).collect(),
        cols: rights.iter().map(|s| s.id.clone()).collect(),
        context,
        l,
        w,
        sim,
    })
}

/// Similarity of one left sense to every right sense of the same word,
/// strongest first. Kept so reviewers can be shown ranked alternatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseEvidence {
    pub left: SenseId,
    pub scores: Vec<(SenseId, f64)>,
}

#[derive(Debug, Clone)]
pub struct DefMatchOutput {
    pub matches: MatchList,
    pub evidence: Vec<SenseEvidence>,
}

fn word_matches(sim: &SimilarityMatrix, params: &DefMatchParams) -> (Vec<Match>, Vec<SenseEvidence>) {
    let matches = greedy_extract(&sim.sim, params.floor, params.deletion)
        .into_iter()
        .map(|cell| {
            Match::new(
                sim.rows[cell.row].clone(),
                sim.cols[cell.col].clone(),
                cell.value,
                Phase::Defmatch,
            )
            .expect("rows and columns come from different resources")
        })
        .collect();
    let evidence = sim
        .rows
        .iter()
        .enumerate()
        .map(|(i, left)| {
            let mut scores: Vec<(SenseId, f64)> =
                sim.cols.iter().cloned().zip(sim.sim.row(i).iter().copied()).collect();
            scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            SenseEvidence {
                left: left.clone(),
                scores,
            }
        })
        .collect();
    (matches, evidence)
}

pub fn by_confidence(a: &Match, b: &Match) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.left.word.cmp(&b.left.word))
        .then_with(|| a.left.cmp(&b.left))
        .then_with(|| a.right.cmp(&b.right))
}

/// Runs the matcher over every headword present in both resources (or just
/// `words`), returning matches sorted by confidence, highest first.
pub fn run_definition_match(
    left: &Resource,
    right: &Resource,
    words: Option<&[String]>,
    rules: &StemmerRules,
    params: &DefMatchParams,
) -> DefMatchOutput {
    let candidates: Vec<String> = match words {
        Some(list) => list
            .iter()
            .map(|w| crate::lexmodel::normalize_headword(w))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        None => left
            .words()
            .filter(|w| !right.senses_of_word(w).is_empty())
            .map(str::to_string)
            .collect(),
    };
    let per_word: Vec<(Vec<Match>, Vec<SenseEvidence>)> = candidates
        .par_iter()
        .filter_map(|w| similarity(w, left, right, rules, params).ok())
        .map(|sim| word_matches(&sim, params))
        .collect();

    let mut all = Vec::new();
    let mut evidence = Vec::new();
    for (m, e) in per_word {
        all.extend(m);
        evidence.extend(e);
    }
    all.sort_by(by_confidence);
    let mut matches = MatchList::new(ListLabel::Output);
    for m in all {
        if let Err(conflict) = matches.push(m) {
            // only reachable with cell-only deletion
            log::debug!("dropping non one-to-one proposal: {conflict}");
        }
    }
    DefMatchOutput { matches, evidence }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_product() {
        let sim = multiply(&Matrix::from_rows(&[vec![1.0]]), &Matrix::from_rows(&[vec![0.8]])).unwrap();
        assert_eq!(sim.to_rows(), vec![vec![0.8]]);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Matrix::filled(2, 3, 1.0);
        assert_eq!(multiply(&a, &a), Err(DefMatchError::DimensionMismatch(2, 3, 2, 3)));
    }

    #[test]
    fn greedy_on_diagonal() {
        let sim = Matrix::from_rows(&[vec![2.0, 0.01], vec![0.01, 1.0]]);
        let got = greedy_extract(&sim, 0.0, Deletion::RowAndColumn);
        assert_eq!(
            got,
            vec![
                Extraction {
                    row: 0,
                    col: 0,
                    value: 2.0
                },
                Extraction {
                    row: 1,
                    col: 1,
                    value: 1.0
                },
            ]
        );
    }

    #[test]
    fn greedy_floor_stops_extraction() {
        let sim = Matrix::from_rows(&[vec![0.3, 0.2], vec![0.1, 0.05]]);
        assert!(greedy_extract(&sim, 0.5, Deletion::RowAndColumn).is_empty());
        // the floor itself is admitted
        assert_eq!(greedy_extract(&sim, 0.3, Deletion::RowAndColumn).len(), 1);
    }

    #[test]
    fn greedy_ties_take_smallest_index() {
        let sim = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let got = greedy_extract(&sim, 0.0, Deletion::RowAndColumn);
        assert_eq!((got[0].row, got[0].col), (0, 0));
        assert_eq!((got[1].row, got[1].col), (1, 1));
    }

    #[test]
    fn cell_only_deletion_keeps_rows() {
        let sim = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 0.1]]);
        let got = greedy_extract(&sim, 0.4, Deletion::CellOnly);
        assert_eq!(got.len(), 3);
        assert_eq!((got[1].row, got[1].col), (0, 1));
    }

    #[test]
    fn empty_matrix_extracts_nothing() {
        assert!(greedy_extract(&Matrix::filled(0, 3, 0.0), 0.0, Deletion::RowAndColumn).is_empty());
    }

    fn toy_resources() -> (Resource, Resource) {
        let mut l1 = Sense::new(SenseId::new("ld", "batter", 2, 0), "n", "mixture of flour and eggs");
        l1.examples = vec!["stir the mixture".into()];
        let l2 = Sense::new(SenseId::new("ld", "batter", 3, 0), "n", "a person who bats");
        let left = Resource::new("ld", vec![l1, l2]).unwrap();
        let r1 = Sense::new(SenseId::new("wn", "batter", 0, 1), "n", "ballplayer who bats");
        let r2 = Sense::new(
            SenseId::new("wn", "batter", 0, 2),
            "n",
            "a flour mixture thin enough to pour",
        );
        let right = Resource::new("wn", vec![r1, r2]).unwrap();
        (left, right)
    }

    #[test]
    fn context_set_is_shared_minus_word() {
        let (left, right) = toy_resources();
        let rules = StemmerRules::shipped();
        let ctx = build_context_set("batter", &left, &right, &rules, &DefMatchParams::default()).unwrap();
        assert_eq!(ctx.stems, vec!["bat", "flour", "mixture"]);
        assert!(!ctx.stems.contains(&rules.stem("batter")));
        // "egg" appears only on the left
        assert!(!ctx.stems.iter().any(|s| s == "egg"));
        assert!(ctx.provenance["mixture"].contains(&Provenance::Example));
    }

    #[test]
    fn no_senses_error() {
        let (left, right) = toy_resources();
        let rules = StemmerRules::shipped();
        assert!(matches!(
            build_context_set("absent", &left, &right, &rules, &DefMatchParams::default()),
            Err(DefMatchError::NoSenses { .. })
        ));
    }

    #[test]
    fn definition_only_mode_ignores_examples() {
        let mut l1 = Sense::new(SenseId::new("ld", "x", 0, 1), "n", "nothing shared here");
        l1.examples = vec!["flour".into()];
        let left = Resource::new("ld", vec![l1]).unwrap();
        let right = Resource::new("wn", vec![Sense::new(SenseId::new("wn", "x", 0, 1), "n", "flour")]).unwrap();
        let rules = StemmerRules::shipped();
        let with = similarity("x", &left, &right, &rules, &DefMatchParams::default()).unwrap();
        assert_eq!(with.sim.to_rows(), vec![vec![L_PRESENT * W_DEFINITION]]);
        let params = DefMatchParams {
            include_examples: false,
            ..Default::default()
        };
        let without = similarity("x", &left, &right, &rules, &params).unwrap();
        assert_eq!(without.sim.to_rows(), vec![vec![ABSENT * W_DEFINITION]]);
    }

    #[test]
    fn disjoint_definitions_give_empty_context() {
        let left = Resource::new("ld", vec![Sense::new(SenseId::new("ld", "x", 0, 1), "n", "apples")]).unwrap();
        let right = Resource::new("wn", vec![Sense::new(SenseId::new("wn", "x", 0, 1), "n", "oranges")]).unwrap();
        let rules = StemmerRules::shipped();
        let sim = similarity("x", &left, &right, &rules, &DefMatchParams::default()).unwrap();
        assert!(sim.context.stems.is_empty());
        assert_eq!(sim.sim.to_rows(), vec![vec![0.0]]);
    }
}
