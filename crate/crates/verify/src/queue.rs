//! The verification queue as a pure state machine over [`Event`]s.
//!
//! Every change goes through [`Queue::apply`], so replaying the event log
//! rebuilds the exact state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use lexalign_core::bimatch::LexicalMapping;
use lexalign_core::lexmodel::{Match, MatchStatus, ModelError, Phase, Resource, SenseId};
use lexalign_core::pipeline::LoadedRun;

pub const DEFAULT_LEASE_MS: u64 = 10 * 60 * 1000;

pub type ItemId = u64;

#[derive(Debug, Error, PartialEq)]
pub enum QueueError {
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("item {item} is leased to {holder}")]
    StaleLease { item: ItemId, holder: String },
    #[error("run {0} is already enqueued")]
    DuplicateRun(String),
    #[error("no run has been enqueued")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What a reviewer sees of one sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseCard {
    pub id: SenseId,
    pub word: String,
    pub pos: String,
    pub definition: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub field_codes: Vec<String>,
}

impl SenseCard {
    fn of(resource: &Resource, id: &SenseId) -> Option<SenseCard> {
        resource.get(id).map(|s| SenseCard {
            id: s.id.clone(),
            word: s.word().to_string(),
            pos: s.pos.clone(),
            definition: s.definition.clone(),
            examples: s.examples.clone(),
            field_codes: s.field_codes.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub right: SenseId,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub card: Option<SenseCard>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationItem {
    pub id: ItemId,
    pub position: usize,
    pub proposal: Match,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<SenseCard>,
    /// The proposal first, then other candidates by confidence.
    pub alternatives: Vec<Alternative>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
    Correct { corrected: SenseId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub item: ItemId,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub verifier: String,
    pub at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lease {
    pub verifier: String,
    pub expires_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Enqueued {
        run_id: String,
        items: Vec<VerificationItem>,
    },
    Leased {
        item: ItemId,
        verifier: String,
        at_ms: u64,
    },
    Judged(VerdictRecord),
}

/// Accuracy for one phase. `pct_correct` counts corrections as correct and
/// is absent until something has been judged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub phase: Phase,
    pub proposed: usize,
    pub judged: usize,
    pub accepted: usize,
    pub corrected: usize,
    pub rejected: usize,
    pub pct_correct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Queue {
    pub run_id: Option<String>,
    pub lease_ms: u64,
    items: Vec<VerificationItem>,
    history: BTreeMap<ItemId, Vec<VerdictRecord>>,
    leases: BTreeMap<ItemId, Lease>,
    events: u64,
}

impl Default for Queue {
    fn default() -> Self {
        Queue::new(DEFAULT_LEASE_MS)
    }
}

impl Queue {
    pub fn new(lease_ms: u64) -> Self {
        Queue {
            run_id: None,
            lease_ms,
            items: Vec::new(),
            history: BTreeMap::new(),
            leases: BTreeMap::new(),
            events: 0,
        }
    }

    /// Number of events applied so far.
    pub fn events_applied(&self) -> u64 {
        self.events
    }

    pub fn items(&self) -> &[VerificationItem] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> Option<&VerificationItem> {
        self.items.get(usize::try_from(id).ok()?)
    }

    pub fn history(&self, id: ItemId) -> &[VerdictRecord] {
        self.history.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The latest verdict on an item.
    pub fn verdict(&self, id: ItemId) -> Option<&VerdictRecord> {
        self.history.get(&id).and_then(|h| h.last())
    }

    pub fn pending(&self) -> usize {
        self.items.iter().filter(|i| self.verdict(i.id).is_none()).count()
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), QueueError> {
        match event {
            Event::Enqueued { run_id, items } => {
                if let Some(existing) = &self.run_id {
                    return Err(QueueError::DuplicateRun(existing.clone()));
                }
                self.run_id = Some(run_id.clone());
                self.items = items.clone();
            }
            Event::Leased { item, verifier, at_ms } => {
                self.require(*item)?;
                self.leases.insert(
                    *item,
                    Lease {
                        verifier: verifier.clone(),
                        expires_ms: at_ms + self.lease_ms,
                    },
                );
            }
            Event::Judged(record) => {
                self.check_lease(record.item, &record.verifier, record.at_ms)?;
                self.check_correction(record.item, &record.verdict)?;
                self.leases.remove(&record.item);
                self.history.entry(record.item).or_default().push(record.clone());
            }
        }
        self.events += 1;
        Ok(())
    }

    fn require(&self, id: ItemId) -> Result<&VerificationItem, QueueError> {
        self.item(id).ok_or(QueueError::UnknownItem(id))
    }

    fn check_lease(&self, id: ItemId, verifier: &str, now_ms: u64) -> Result<(), QueueError> {
        self.require(id)?;
        match self.leases.get(&id) {
            Some(lease) if lease.verifier != verifier && lease.expires_ms > now_ms => Err(QueueError::StaleLease {
                item: id,
                holder: lease.verifier.clone(),
            }),
            _ => Ok(()),
        }
    }

    fn check_correction(&self, id: ItemId, verdict: &Verdict) -> Result<(), QueueError> {
        if let Verdict::Correct { corrected } = verdict {
            let mut m = self.require(id)?.proposal.clone();
            m.correct(corrected.clone())?;
        }
        Ok(())
    }

    /// The event that leases the next pending item to `verifier`, or `None`
    /// when nothing is available. A verifier holding a live lease gets the
    /// same item back.
    pub fn next_event(&self, verifier: &str, now_ms: u64) -> Option<Event> {
        let free = |item: &VerificationItem| match self.leases.get(&item.id) {
            Some(lease) => lease.verifier == verifier || lease.expires_ms <= now_ms,
            None => true,
        };
        let pending = || self.items.iter().filter(|i| self.verdict(i.id).is_none());
        let held = pending().find(|i| {
            self.leases
                .get(&i.id)
                .is_some_and(|l| l.verifier == verifier && l.expires_ms > now_ms)
        });
        let item = held.or_else(|| pending().find(|i| free(i)))?;
        Some(Event::Leased {
            item: item.id,
            verifier: verifier.to_string(),
            at_ms: now_ms,
        })
    }

    pub fn verdict_event(
        &self,
        id: ItemId,
        verdict: Verdict,
        verifier: &str,
        now_ms: u64,
    ) -> Result<Event, QueueError> {
        self.check_lease(id, verifier, now_ms)?;
        self.check_correction(id, &verdict)?;
        Ok(Event::Judged(VerdictRecord {
            item: id,
            verdict,
            verifier: verifier.to_string(),
            at_ms: now_ms,
        }))
    }

    /// Every proposal with its current status applied.
    pub fn final_matches(&self) -> Vec<Match> {
        self.items
            .iter()
            .map(|item| {
                let mut m = item.proposal.clone();
                match self.verdict(item.id).map(|r| &r.verdict) {
                    Some(Verdict::Accept) => m.accept(),
                    Some(Verdict::Reject) => m.reject(),
                    Some(Verdict::Correct { corrected }) => {
                        // checked when the verdict was applied
                        let _ = m.correct(corrected.clone());
                    }
                    None => {}
                }
                m
            })
            .collect()
    }

    pub fn stats(&self) -> Vec<PhaseStats> {
        let mut by_phase: BTreeMap<Phase, PhaseStats> = BTreeMap::new();
        for item in &self.items {
            let phase = item.proposal.phase;
            let row = by_phase.entry(phase).or_insert_with(|| PhaseStats {
                phase,
                proposed: 0,
                judged: 0,
                accepted: 0,
                corrected: 0,
                rejected: 0,
                pct_correct: None,
            });
            row.proposed += 1;
            match self.verdict(item.id).map(|r| &r.verdict) {
                Some(Verdict::Accept) => row.accepted += 1,
                Some(Verdict::Correct { .. }) => row.corrected += 1,
                Some(Verdict::Reject) => row.rejected += 1,
                None => continue,
            }
            row.judged += 1;
        }
        Phase::ALL
            .iter()
            .filter_map(|p| by_phase.remove(p))
            .map(|mut row| {
                if row.judged > 0 {
                    row.pct_correct = Some(100.0 * (row.accepted + row.corrected) as f64 / row.judged as f64);
                }
                row
            })
            .collect()
    }

    /// Accepted and corrected sense pairs, ready to seed a later run.
    /// Bilingual mappings are left out because their left side is not a
    /// sense of either resource.
    pub fn export_seeds(&self) -> Vec<(SenseId, SenseId)> {
        self.final_matches()
            .into_iter()
            .filter(|m| !m.phase.is_bilingual())
            .filter(|m| matches!(m.status, MatchStatus::Accepted | MatchStatus::Corrected))
            .map(|m| {
                let right = m.final_right().clone();
                (m.left, right)
            })
            .collect()
    }
}

fn rank(mut rest: Vec<Alternative>) -> Vec<Alternative> {
    rest.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.right.cmp(&b.right))
    });
    rest
}

/// Builds the items for a stored run: hierarchy matches, then definition
/// matches, then bilingual mappings.
pub fn items_for_run(run: &LoadedRun) -> Result<Vec<VerificationItem>, QueueError> {
    let right = &run.right;
    let card = |id: &SenseId| SenseCard::of(right, id);
    let same_word = |proposal: &SenseId| -> Vec<Alternative> {
        right
            .senses_of_word(&proposal.word)
            .into_iter()
            .filter(|s| &s.id != proposal)
            .map(|s| Alternative {
                right: s.id.clone(),
                confidence: 0.0,
                card: card(&s.id),
            })
            .collect()
    };
    let lead = |m: &Match| Alternative {
        right: m.right.clone(),
        confidence: m.confidence,
        card: card(&m.right),
    };

    let mut out: Vec<(Match, Option<SenseCard>, Vec<Alternative>)> = Vec::new();
    for m in &run.hiermatch {
        let mut alts = vec![lead(m)];
        alts.extend(rank(same_word(&m.right)));
        out.push((m.clone(), SenseCard::of(&run.left, &m.left), alts));
    }

    let evidence: BTreeMap<&SenseId, &Vec<(SenseId, f64)>> =
        run.evidence.iter().map(|e| (&e.left, &e.scores)).collect();
    for m in &run.defmatch {
        let mut alts = vec![lead(m)];
        let mut rest: Vec<Alternative> = evidence
            .get(&m.left)
            .into_iter()
            .flat_map(|scores| scores.iter())
            .filter(|(r, _)| r != &m.right)
            .map(|(r, c)| Alternative {
                right: r.clone(),
                confidence: *c,
                card: card(r),
            })
            .collect();
        for extra in same_word(&m.right) {
            if !rest.iter().any(|a| a.right == extra.right) {
                rest.push(extra);
            }
        }
        alts.extend(rank(rest));
        out.push((m.clone(), SenseCard::of(&run.left, &m.left), alts));
    }

    if let Some(dict) = &run.bilingual {
        let mut groups: BTreeMap<(&str, usize), Vec<&LexicalMapping>> = BTreeMap::new();
        for mapping in &run.bimatch {
            groups
                .entry((&mapping.source_word, mapping.group))
                .or_default()
                .push(mapping);
        }
        for mapping in &run.bimatch {
            let m = mapping.to_match(&dict.name)?;
            let mut alts = vec![lead(&m)];
            let mut rest: Vec<Alternative> = groups[&(mapping.source_word.as_str(), mapping.group)]
                .iter()
                .filter(|other| other.right != mapping.right)
                .map(|other| Alternative {
                    right: other.right.clone(),
                    confidence: other.confidence,
                    card: card(&other.right),
                })
                .collect();
            for extra in same_word(&m.right) {
                if !rest.iter().any(|a| a.right == extra.right) {
                    rest.push(extra);
                }
            }
            alts.extend(rank(rest));
            let left = dict
                .entries
                .iter()
                .find(|e| e.headword == mapping.source_word)
                .and_then(|e| Some((e, e.senses.get(mapping.group.checked_sub(1)?)?)))
                .map(|(entry, group)| SenseCard {
                    id: m.left.clone(),
                    word: entry.headword.clone(),
                    pos: entry.pos.clone(),
                    definition: group.translations.join(", "),
                    examples: Vec::new(),
                    field_codes: group.field_code.iter().cloned().collect(),
                });
            out.push((m, left, alts));
        }
    }

    Ok(out
        .into_iter()
        .enumerate()
        .map(|(position, (proposal, left, alternatives))| VerificationItem {
            id: position as ItemId,
            position,
            proposal,
            left,
            alternatives,
        })
        .collect())
}
