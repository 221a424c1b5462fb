use std::path::{Path, PathBuf};

use lexalign_core::config::MergeConfig;
use lexalign_core::hiermatch::load_seeds;
use lexalign_core::ingest::{parse_monolingual, StemmerRules};
use lexalign_core::pipeline::{load_run, run_merge, write_run, LoadedRun, MergeInputs};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Runs the merge over the combined fixture into `dir` and loads it back.
pub fn fixture_run(dir: &Path) -> LoadedRun {
    let left = parse_monolingual(&fixtures().join("ldoce-fixture.jsonl")).unwrap();
    let right = parse_monolingual(&fixtures().join("wn-fixture.jsonl")).unwrap();
    let seeds = load_seeds(&fixtures().join("seeds.jsonl"), &left, &right).unwrap();
    let config = MergeConfig::load(&fixtures().join("merge.toml")).unwrap();
    let inputs = MergeInputs {
        left,
        right,
        seeds,
        bilingual: None,
        table: None,
    };
    let run = run_merge(inputs, &StemmerRules::shipped(), &config).unwrap();
    write_run(&run, dir, false).unwrap();
    load_run(dir).unwrap()
}
