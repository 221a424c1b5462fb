//! Merge configuration, read from a TOML file with one table per stage.
//!
//! ```toml
//! [defmatch]
//! floor = 0.0
//!
//! [hiermatch]
//! left_relation = "genus"
//!
//! [bimatch]
//! penalty = 0.8
//! threshold = 6
//!
//! [paths]
//! left = "ldoce-fixture.jsonl"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bimatch::BiParams;
use crate::defmatch::DefMatchParams;
use crate::hiermatch::HierParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid setting {key} = {value}: {reason}")]
    Invalid {
        key: &'static str,
        value: String,
        reason: &'static str,
    },
}

/// Input and output locations. Relative paths in a config file are
/// resolved against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bilingual: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_table: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.left,
            &mut self.right,
            &mut self.seeds,
            &mut self.bilingual,
            &mut self.field_table,
            &mut self.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    pub defmatch: DefMatchParams,
    pub hiermatch: HierParams,
    pub bimatch: BiParams,
    /// Not part of the run fingerprint.
    #[serde(skip_serializing)]
    pub paths: Paths,
}

impl MergeConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let config: MergeConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.paths.resolve(base);
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, key: &'static str, value: impl ToString, reason: &'static str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    key,
                    value: value.to_string(),
                    reason,
                })
            }
        }
        let b = &self.bimatch;
        check(
            b.penalty > 0.0 && b.penalty <= 1.0,
            "bimatch.penalty",
            b.penalty,
            "must lie in (0, 1]",
        )?;
        check(b.threshold >= 1, "bimatch.threshold", b.threshold, "must be at least 1")?;
        for (key, value) in [
            ("bimatch.base", b.base),
            ("bimatch.single", b.single),
            ("bimatch.field_code", b.field_code),
        ] {
            check(value > 0.0 && value <= 1.0, key, value, "must lie in (0, 1]")?;
        }
        let floor = self.defmatch.floor;
        check(
            floor.is_finite() && floor >= 0.0,
            "defmatch.floor",
            floor,
            "must be non-negative",
        )?;
        let h = &self.hiermatch;
        for (key, value) in [
            ("hiermatch.seed_confidence", h.seed_confidence),
            ("hiermatch.local_confidence", h.local_confidence),
            ("hiermatch.ancestor_confidence", h.ancestor_confidence),
        ] {
            check(value.is_finite() && value >= 0.0, key, value, "must be non-negative")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let config = MergeConfig::parse("", Path::new("m.toml")).unwrap();
        assert_eq!(config, MergeConfig::default());
        assert_eq!(config.bimatch.threshold, 6);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for text in [
            "[bimatch]\npenalty = 0.0",
            "[bimatch]\npenalty = 1.5",
            "[bimatch]\nthreshold = 0",
            "[defmatch]\nfloor = -0.1",
        ] {
            let err = MergeConfig::parse(text, Path::new("m.toml")).unwrap_err();
            assert!(matches!(err, ConfigError::Invalid { .. }), "{text}: {err}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(MergeConfig::parse("[defmatch]\nflor = 0.1", Path::new("m.toml")).is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("merge.toml");
        std::fs::write(&path, "[paths]\nleft = \"l.jsonl\"\n").unwrap();
        let config = MergeConfig::load(&path).unwrap();
        assert_eq!(config.paths.left.unwrap(), dir.path().join("l.jsonl"));
    }
}
