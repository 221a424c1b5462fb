//! Reading and writing resource files, bilingual dictionaries, and the
//! suffix-stripping stemmer used to pick out content words.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexmodel::{normalize_headword, ModelError, Resource, Sense, SenseId};

const SHIPPED_RULES: &str = include_str!("../data/stem_rules.txt");
const SHIPPED_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const SHIPPED_FIELD_CODES: &str = include_str!("../data/field_codes.txt");

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: reference to unknown sense {id}")]
    Reference { line: usize, id: String },
    #[error("line {line}: sense {id} is defined twice")]
    Duplicate { line: usize, id: SenseId },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rule file line {line}: {message}")]
    Rules { line: usize, message: String },
}

impl IngestError {
    fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        IngestError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn from_json(line: usize, err: serde_json::Error) -> Self {
        IngestError::syntax(line, err.column(), err.to_string())
    }
}

fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path).map(BufReader::new).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Resource name derived from a file name: `wn-fixture.jsonl` -> `wn-fixture`.
pub fn resource_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Stemming

/// Ordered suffix-rewrite rules plus a closed-class stopword list.
///
/// Stemming repeatedly applies the first matching rule until none applies,
/// so `stem(stem(w)) == stem(w)` for every word. A rule that rewrites a
/// suffix to itself stops the process, which keeps words like `glass`
/// intact.
#[derive(Debug, Clone)]
pub struct StemmerRules {
    rules: Vec<(String, String)>,
    stopwords: BTreeSet<String>,
    min_stem: usize,
}

impl StemmerRules {
    pub fn from_text(rules: &str, stopwords: &str) -> Result<Self, IngestError> {
        let mut parsed = Vec::new();
        for (idx, raw) in rules.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (suffix, replacement) = line.split_once("->").ok_or(IngestError::Rules {
                line: idx + 1,
                message: "expected 'suffix -> replacement'".into(),
            })?;
            let suffix = suffix.trim().to_lowercase();
            let replacement = replacement.trim().to_lowercase();
            if suffix.is_empty() {
                return Err(IngestError::Rules {
                    line: idx + 1,
                    message: "empty suffix".into(),
                });
            }
            if replacement != suffix && replacement.chars().count() >= suffix.chars().count() {
                return Err(IngestError::Rules {
                    line: idx + 1,
                    message: format!("replacement '{replacement}' must be shorter than '{suffix}'"),
                });
            }
            parsed.push((suffix, replacement));
        }
        let stopwords = stopwords
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Ok(StemmerRules {
            rules: parsed,
            stopwords,
            min_stem: 3,
        })
    }

    /// The rule table and stopword list bundled with the crate.
    pub fn shipped() -> Self {
        Self::from_text(SHIPPED_RULES, SHIPPED_STOPWORDS).expect("bundled rule files are valid")
    }

    pub fn load(rules: &Path, stopwords: &Path) -> Result<Self, IngestError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| IngestError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        Self::from_text(&read(rules)?, &read(stopwords)?)
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn stem(&self, word: &str) -> String {
        let mut w = word.to_lowercase();
        loop {
            let len = w.chars().count();
            let rule = self
                .rules
                .iter()
                .find(|(suffix, _)| w.ends_with(suffix.as_str()) && len - suffix.chars().count() >= self.min_stem);
            match rule {
                Some((suffix, replacement)) if suffix != replacement => {
                    w.truncate(w.len() - suffix.len());
                    w.push_str(replacement);
                }
                _ => return w,
            }
        }
    }
}

/// Lowercased alphanumeric runs; everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Stems of the open-class words in `text`. Stopwords, single letters and
/// numbers are dropped, both before and after stemming.
pub fn content_words(text: &str, rules: &StemmerRules) -> BTreeSet<String> {
    let keep = |t: &str| t.chars().count() > 1 && !rules.is_stopword(t) && !t.chars().all(|c| c.is_numeric());
    tokenize(text)
        .into_iter()
        .filter(|t| keep(t))
        .map(|t| rules.stem(&t))
        .filter(|s| keep(s))
        .collect()
}

// ---------------------------------------------------------------------------
// Monolingual resources

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TextField {
    Text(String),
    Tokens(Vec<String>),
}

impl TextField {
    fn into_text(self) -> String {
        match self {
            TextField::Text(s) => s,
            TextField::Tokens(t) => t.join(" "),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SenseLineIn {
    word: String,
    homograph: u32,
    sense_no: u32,
    pos: String,
    definition: TextField,
    #[serde(default)]
    examples: Vec<TextField>,
    #[serde(default)]
    synset: Option<String>,
    #[serde(default)]
    hypernyms: Vec<SenseId>,
    #[serde(default)]
    genus: Vec<SenseId>,
    #[serde(default)]
    semantic_code: Option<String>,
    #[serde(default)]
    field_codes: Vec<String>,
    #[serde(default)]
    synonyms: Vec<String>,
    #[serde(default)]
    schema_version: Option<u32>,
}

#[derive(Debug, Serialize)]
struct SenseLineOut<'a> {
    word: &'a str,
    homograph: u32,
    sense_no: u32,
    pos: &'a str,
    definition: &'a str,
    examples: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    synset: Option<&'a str>,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    hypernyms: &'a [SenseId],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    genus: &'a [SenseId],
    #[serde(skip_serializing_if = "Option::is_none")]
    semantic_code: Option<&'a str>,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    field_codes: &'a [String],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    synonyms: &'a [String],
}

/// Parses a monolingual resource file, naming the resource after the file.
pub fn parse_monolingual(path: &Path) -> Result<Resource, IngestError> {
    read_monolingual(open(path)?, &resource_name(path))
}

/// Parses one sense per line. Blank lines are skipped.
pub fn read_monolingual(reader: impl BufRead, name: &str) -> Result<Resource, IngestError> {
    let mut senses = Vec::new();
    let mut line_of: BTreeMap<SenseId, usize> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: PathBuf::from(name),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: SenseLineIn = serde_json::from_str(&line).map_err(|e| IngestError::from_json(lineno, e))?;
        if let Some(v) = raw.schema_version {
            if v != crate::SCHEMA_VERSION {
                return Err(IngestError::syntax(
                    lineno,
                    1,
                    format!("unsupported schema_version {v}"),
                ));
            }
        }
        if normalize_headword(&raw.word).is_empty() {
            return Err(IngestError::syntax(lineno, 1, "empty headword"));
        }
        let id = SenseId::new(name, &raw.word, raw.homograph, raw.sense_no);
        if line_of.insert(id.clone(), lineno).is_some() {
            return Err(IngestError::Duplicate { line: lineno, id });
        }
        senses.push(Sense {
            id,
            pos: raw.pos,
            definition: raw.definition.into_text(),
            examples: raw.examples.into_iter().map(TextField::into_text).collect(),
            synset: raw.synset,
            hypernyms: raw.hypernyms,
            genus: raw.genus,
            semantic_code: raw.semantic_code,
            field_codes: raw.field_codes,
            synonyms: raw.synonyms.iter().map(|s| normalize_headword(s)).collect(),
        });
    }
    Resource::new(name, senses).map_err(|err| match err {
        ModelError::DanglingReference { from, to, .. } => IngestError::Reference {
            line: line_of.get(&*from).copied().unwrap_or(0),
            id: to.to_string(),
        },
        other => IngestError::Model(other),
    })
}

/// Writes every sense (hidden ones included) in id order.
pub fn write_monolingual(resource: &Resource, mut out: impl Write) -> io::Result<()> {
    for sense in resource.all_senses() {
        let line = SenseLineOut {
            word: &sense.id.word,
            homograph: sense.id.homograph,
            sense_no: sense.id.sense_no,
            pos: &sense.pos,
            definition: &sense.definition,
            examples: &sense.examples,
            synset: sense.synset.as_deref(),
            hypernyms: &sense.hypernyms,
            genus: &sense.genus,
            semantic_code: sense.semantic_code.as_deref(),
            field_codes: &sense.field_codes,
            synonyms: &sense.synonyms,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// The canonical serialization of a resource as bytes.
pub fn monolingual_bytes(resource: &Resource) -> Vec<u8> {
    let mut buf = Vec::new();
    write_monolingual(resource, &mut buf).expect("writing to memory");
    buf
}

// ---------------------------------------------------------------------------
// Bilingual dictionaries

/// One semicolon-delimited sense group of a bilingual entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationSense {
    pub translations: Vec<String>,
    #[serde(default)]
    pub field_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilingualEntry {
    pub headword: String,
    pub pos: String,
    pub senses: Vec<TranslationSense>,
}

impl BilingualEntry {
    /// Parses the printed dictionary layout, e.g.
    /// `banco. nm. bench, seat; bank, shoal; bank [COM]; ...`.
    /// A trailing `...` group is ignored.
    pub fn from_dictionary_text(text: &str) -> Option<BilingualEntry> {
        let (headword, rest) = text.split_once('.')?;
        let (pos, body) = rest.split_once('.')?;
        let headword = normalize_headword(headword);
        if headword.is_empty() {
            return None;
        }
        let mut senses = Vec::new();
        for group in body.split(';') {
            let mut group = group.trim();
            if group.is_empty() || group.trim_matches('.').is_empty() {
                continue;
            }
            let mut field_code = None;
            if let (Some(open), true) = (group.rfind('['), group.ends_with(']')) {
                field_code = Some(group[open + 1..group.len() - 1].trim().to_string());
                group = group[..open].trim();
            }
            let translations: Vec<String> = group
                .split(',')
                .map(normalize_headword)
                .filter(|w| !w.is_empty())
                .collect();
            if translations.is_empty() {
                return None;
            }
            senses.push(TranslationSense {
                translations,
                field_code,
            });
        }
        if senses.is_empty() {
            return None;
        }
        Some(BilingualEntry {
            headword,
            pos: pos.trim().to_string(),
            senses,
        })
    }
}

/// The declared set of subject field codes.
#[derive(Debug, Clone)]
pub struct FieldCodeInventory(BTreeSet<String>);

impl FieldCodeInventory {
    pub fn from_text(text: &str) -> Self {
        FieldCodeInventory(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn shipped() -> Self {
        Self::from_text(SHIPPED_FIELD_CODES)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.0.contains(code)
    }
}

/// A non-fatal finding while reading a bilingual file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct BilingualDictionary {
    pub name: String,
    pub entries: Vec<BilingualEntry>,
    pub warnings: Vec<IngestWarning>,
}

pub fn parse_bilingual(path: &Path, inventory: &FieldCodeInventory) -> Result<BilingualDictionary, IngestError> {
    read_bilingual(open(path)?, &resource_name(path), inventory)
}

/// Reads one entry per line. Unknown field codes are kept and reported as
/// warnings.
pub fn read_bilingual(
    reader: impl BufRead,
    name: &str,
    inventory: &FieldCodeInventory,
) -> Result<BilingualDictionary, IngestError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct EntryLine {
        headword: String,
        pos: String,
        senses: Vec<TranslationSense>,
        #[serde(default)]
        #[allow(dead_code)]
        schema_version: Option<u32>,
    }

    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: PathBuf::from(name),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: EntryLine = serde_json::from_str(&line).map_err(|e| IngestError::from_json(lineno, e))?;
        let headword = normalize_headword(&raw.headword);
        if headword.is_empty() {
            return Err(IngestError::syntax(lineno, 1, "empty headword"));
        }
        if raw.senses.is_empty() {
            return Err(IngestError::syntax(lineno, 1, "entry has no sense groups"));
        }
        let mut senses = Vec::with_capacity(raw.senses.len());
        for (g, group) in raw.senses.into_iter().enumerate() {
            let translations: Vec<String> = group
                .translations
                .iter()
                .map(|t| normalize_headword(t))
                .filter(|t| !t.is_empty())
                .collect();
            if translations.is_empty() {
                return Err(IngestError::syntax(
                    lineno,
                    1,
                    format!("sense group {} has no translations", g + 1),
                ));
            }
            if let Some(code) = &group.field_code {
                if !inventory.contains(code) {
                    log::warn!("{name} line {lineno}: unknown field code [{code}]");
                    warnings.push(IngestWarning {
                        line: lineno,
                        message: format!("unknown field code [{code}]"),
                    });
                }
            }
            senses.push(TranslationSense {
                translations,
                field_code: group.field_code,
            });
        }
        entries.push(BilingualEntry {
            headword,
            pos: raw.pos,
            senses,
        });
    }
    Ok(BilingualDictionary {
        name: name.to_string(),
        entries,
        warnings,
    })
}

pub fn write_bilingual(entries: &[BilingualEntry], mut out: impl Write) -> io::Result<()> {
    for entry in entries {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rules() -> StemmerRules {
        StemmerRules::shipped()
    }

    #[test]
    fn bats_and_bat_collide() {
        let r = rules();
        assert_eq!(r.stem("bats"), "bat");
        assert_eq!(r.stem("bat"), "bat");
        let a = content_words("a person who bats", &r);
        let b = content_words("ballplayer who bats", &r);
        assert!(a.contains("bat") && b.contains("bat"));
    }

    #[test]
    fn batter_definition_content_words() {
        let words = content_words(
            "mixture of flour, eggs, and milk, beaten together and used in cooking",
            &rules(),
        );
        for w in ["mixture", "flour", "egg", "milk", "beat", "cook"] {
            assert!(words.contains(w), "missing {w} in {words:?}");
        }
        assert!(!words.contains("of") && !words.contains("and"));
    }

    #[test]
    fn empty_text_has_no_content_words() {
        assert!(content_words("", &rules()).is_empty());
    }

    #[test]
    fn protect_rules_stop_stripping() {
        let r = rules();
        assert_eq!(r.stem("glass"), "glass");
        assert_eq!(r.stem("classes"), "class");
        assert_eq!(r.stem("berries"), "berry");
    }

    #[test]
    fn bad_rules_are_rejected() {
        assert!(StemmerRules::from_text("s -> ss", "").is_err());
        assert!(StemmerRules::from_text("nonsense", "").is_err());
        assert!(StemmerRules::from_text(" -> x", "").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn stemming_is_idempotent(word in "[a-z]{1,14}") {
            let r = rules();
            let once = r.stem(&word);
            prop_assert_eq!(r.stem(&once), once);
        }
    }

    proptest! {
        #[test]
        fn content_words_exclude_stopwords(words in prop::collection::vec("(the|of|and|[a-z]{1,9})", 0..20)) {
            let r = rules();
            let text = words.join(" ");
            for w in content_words(&text, &r) {
                prop_assert!(!r.is_stopword(&w));
            }
        }
    }

    #[test]
    fn monolingual_line_parses() {
        let text = r#"{"word":"Batter","homograph":2,"sense_no":0,"pos":"n","definition":"mixture of flour","examples":[]}
{"word":"batter","homograph":3,"sense_no":0,"pos":"n","definition":["a","person","who","bats"],"examples":["he bats"],"genus":["ldoce:person:0:1"]}
{"word":"person","homograph":0,"sense_no":1,"pos":"n","definition":"a human being"}
"#;
        let r = read_monolingual(text.as_bytes(), "ldoce").unwrap();
        assert_eq!(r.senses_of_word("batter").len(), 2);
        let s = &r.senses_of_word("batter")[1];
        assert_eq!(s.definition, "a person who bats");
        assert_eq!(s.genus, vec![SenseId::new("ldoce", "person", 0, 1)]);
    }

    #[test]
    fn empty_file_is_empty_resource() {
        let r = read_monolingual(&b""[..], "empty").unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn dangling_reference_names_the_id() {
        let text = r#"{"word":"a","homograph":0,"sense_no":1,"pos":"n","definition":""}
{"word":"b","homograph":0,"sense_no":1,"pos":"n","definition":"","hypernyms":["r:zz:0:9"]}"#;
        match read_monolingual(text.as_bytes(), "r").unwrap_err() {
            IngestError::Reference { line, id } => {
                assert_eq!(line, 2);
                assert_eq!(id, "r:zz:0:9");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let text =
            "{\"word\":\"a\",\"homograph\":0,\"sense_no\":1,\"pos\":\"n\",\"definition\":\"\"}\n{\"word\": oops}";
        match read_monolingual(text.as_bytes(), "r").unwrap_err() {
            IngestError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other}"),
        }
        let dup = "{\"word\":\"a\",\"homograph\":0,\"sense_no\":1,\"pos\":\"n\",\"definition\":\"\"}\n{\"word\":\"A\",\"homograph\":0,\"sense_no\":1,\"pos\":\"n\",\"definition\":\"\"}";
        assert!(matches!(
            read_monolingual(dup.as_bytes(), "r"),
            Err(IngestError::Duplicate { line: 2, .. })
        ));
    }

    #[test]
    fn cycle_is_reported() {
        let text = r#"{"word":"a","homograph":0,"sense_no":1,"pos":"n","definition":"","genus":["r:b:0:1"]}
{"word":"b","homograph":0,"sense_no":1,"pos":"n","definition":"","genus":["r:a:0:1"]}"#;
        let err = read_monolingual(text.as_bytes(), "r").unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
    }

    #[test]
    fn banco_dictionary_text() {
        let e = BilingualEntry::from_dictionary_text(
            "banco. nm. bench, seat; bank, shoal; school, shoal; layer, stratum; bank [COM]; ...",
        )
        .unwrap();
        assert_eq!(e.headword, "banco");
        assert_eq!(e.pos, "nm");
        assert_eq!(e.senses.len(), 5);
        assert_eq!(e.senses[4].translations, vec!["bank"]);
        assert_eq!(e.senses[4].field_code.as_deref(), Some("COM"));
        assert_eq!(e.senses[0].translations, vec!["bench", "seat"]);
    }

    #[test]
    fn bilingual_lines() {
        let inv = FieldCodeInventory::shipped();
        let ok = r#"{"headword":"palo","pos":"nm","senses":[{"translations":["stick"],"field_code":null}]}
{"headword":"x","pos":"nm","senses":[{"translations":["y"],"field_code":"QQQ"}]}"#;
        let d = read_bilingual(ok.as_bytes(), "es-en", &inv).unwrap();
        assert_eq!(d.entries.len(), 2);
        assert_eq!(d.entries[0].senses.len(), 1);
        assert_eq!(d.entries[1].senses[0].field_code.as_deref(), Some("QQQ"));
        assert_eq!(d.warnings.len(), 1);

        let missing = r#"{"pos":"nm","senses":[{"translations":["stick"]}]}"#;
        assert!(matches!(
            read_bilingual(missing.as_bytes(), "es-en", &inv),
            Err(IngestError::Syntax { line: 1, .. })
        ));
        let empty_group = r#"{"headword":"a","pos":"nm","senses":[{"translations":[]}]}"#;
        assert!(read_bilingual(empty_group.as_bytes(), "es-en", &inv).is_err());
    }
}
