use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use lexalign_core::bimatch::{build_field_code_table, run_bilingual_match, FieldCodeTable};
use lexalign_core::config::MergeConfig;
use lexalign_core::defmatch::{run_definition_match, Deletion};
use lexalign_core::hiermatch::{load_seeds, run_hierarchy_match, write_stats_tsv};
use lexalign_core::ingest::{parse_bilingual, parse_monolingual, FieldCodeInventory, StemmerRules};
use lexalign_core::lexmodel::{Match, Resource};
use lexalign_core::pipeline::{
    detect_inconsistencies, export_ontology, load_run, run_merge, write_run, LoadedRun, MergeInputs,
};
use lexalign_core::store::{self, write_file, write_matches, write_versioned};
use lexalign_verify::queue::DEFAULT_LEASE_MS;
use lexalign_verify::server::{self, AppState, BIND_ENV};
use lexalign_verify::store::EVENTS;
use lexalign_verify::{open_run_queue, queue_dir, write_verified_stats, QueueStore};

use crate::{
    BimatchArgs, CliError, Command, DefmatchArgs, ExportArgs, FieldtableArgs, HiermatchArgs, IngestCheckArgs, Out,
    PipelineArgs, RunArgs, ServeArgs,
};

pub(crate) fn dispatch(command: Command, stdout: &mut Out, stderr: &mut Out) -> Result<(), CliError> {
    match command {
        Command::IngestCheck(a) => ingest_check(a, stdout, stderr),
        Command::Defmatch(a) => defmatch(a, stdout, stderr),
        Command::Hiermatch(a) => hiermatch(a, stdout, stderr),
        Command::Bimatch(a) => bimatch(a, stdout, stderr),
        Command::Fieldtable(a) => fieldtable(a, stdout),
        Command::Pipeline(a) => pipeline(a, stdout, stderr),
        Command::Inconsistencies(a) => inconsistencies(a, stdout),
        Command::Export(a) => export(a, stdout, stderr),
        Command::VerifyServe(a) => verify_serve(a, stderr),
    }
}

/// Writes to `path`, or to stdout when no path is given.
fn emit(
    path: Option<&Path>,
    stdout: &mut Out,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    match path {
        Some(p) => Ok(write_file(p, body)?),
        None => body(stdout).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn note(stderr: &mut Out, text: std::fmt::Arguments<'_>) {
    let _ = writeln!(stderr, "{text}");
}

fn config_or_default(path: Option<&Path>) -> Result<MergeConfig, CliError> {
    Ok(match path {
        Some(p) => MergeConfig::load(p)?,
        None => MergeConfig::default(),
    })
}

fn ingest_check(args: IngestCheckArgs, stdout: &mut Out, stderr: &mut Out) -> Result<(), CliError> {
    let total = args.files.len() + args.bilingual.len();
    if total == 0 {
        return Err(CliError::Usage("ingest-check needs at least one file".into()));
    }
    let mut failed = 0;
    for path in &args.files {
        match parse_monolingual(path) {
            Ok(r) => {
                let relations: Vec<&str> = r.relation_names().collect();
                let _ = writeln!(
                    stdout,
                    "{}: ok, {} senses, {} headwords, relations {}",
                    path.display(),
                    r.len(),
                    r.words().count(),
                    relations.join(", ")
                );
            }
            Err(e) => {
                failed += 1;
                note(stderr, format_args!("{}: {e}", path.display()));
            }
        }
    }
    let inventory = FieldCodeInventory::shipped();
    for path in &args.bilingual {
        match parse_bilingual(path, &inventory) {
            Ok(d) => {
                let groups: usize = d.entries.iter().map(|e| e.senses.len()).sum();
                let _ = writeln!(
                    stdout,
                    "{}: ok, {} entries, {} sense groups, {} warnings",
                    path.display(),
                    d.entries.len(),
                    groups,
                    d.warnings.len()
                );
                for w in &d.warnings {
                    note(
                        stderr,
                        format_args!("{} line {}: {}", path.display(), w.line, w.message),
                    );
                }
            }
            Err(e) => {
                failed += 1;
                note(stderr, format_args!("{}: {e}", path.display()));
            }
        }
    }
    if failed > 0 {
        return Err(CliError::CheckFailed(failed, total));
    }
    Ok(())
}

fn defmatch(args: DefmatchArgs, stdout: &mut Out, stderr: &mut Out) -> Result<(), CliError> {
    let mut config = config_or_default(args.config.as_deref())?;
    if let Some(floor) = args.floor {
        config.defmatch.floor = floor;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut params = config.defmatch;
    if args.no_examples {
        params.include_examples = false;
    }
    if args.cell_only {
        params.deletion = Deletion::CellOnly;
    }
    let left = parse_monolingual(&args.left)?;
    let right = parse_monolingual(&args.right)?;
    let output = run_definition_match(&left, &right, args.words.as_deref(), &StemmerRules::shipped(), &params);
    emit(args.out.as_deref(), stdout, |w| write_matches(output.matches.iter(), w))?;
    if let Some(path) = &args.evidence {
        write_file(path, |w| write_versioned(output.evidence.iter(), w))?;
    }
    note(stderr, format_args!("{} matches", output.matches.len()));
    Ok(())
}

fn hiermatch(args: HiermatchArgs, stdout: &mut Out, stderr: &mut Out) -> Result<(), CliError> {
    let mut params = config_or_default(args.config.as_deref())?.hiermatch;
    if let Some(r) = args.left_relation {
        params.left_relation = r;
    }
    if let Some(r) = args.right_relation {
        params.right_relation = r;
    }
    let left = parse_monolingual(&args.left)?;
    let right = parse_monolingual(&args.right)?;
    let seeds = match &args.seeds {
        Some(p) => load_seeds(p, &left, &right)?,
        None => Vec::new(),
    };
    let output = run_hierarchy_match(&left, &right, &seeds, &params)?;
    for w in &output.warnings {
        note(stderr, format_args!("warning: {w}"));
    }
    emit(args.out.as_deref(), stdout, |w| write_matches(output.m3.iter(), w))?;
    if let Some(path) = &args.stats {
        write_file(path, |w| write_stats_tsv(&output.stats, None, w))?;
    }
    note(
        stderr,
        format_args!("{} matches in {} rounds", output.m3.len(), output.iterations),
    );
    Ok(())
}

fn read_table(path: &Path, threshold: usize) -> Result<FieldCodeTable, CliError> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(FieldCodeTable::read_tsv(BufReader::new(file), threshold)?)
}

fn bimatch(args: BimatchArgs, stdout: &mut Out, stderr: &mut Out) -> Result<(), CliError> {
    let mut config = config_or_default(args.config.as_deref())?;
    if let Some(p) = args.penalty {
        config.bimatch.penalty = p;
    }
    if let Some(t) = args.threshold {
        config.bimatch.threshold = t;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let params = config.bimatch;

    let dict = parse_bilingual(&args.bilingual, &FieldCodeInventory::shipped())?;
    for w in &dict.warnings {
        note(
            stderr,
            format_args!("{} line {}: {}", args.bilingual.display(), w.line, w.message),
        );
    }
    let onto = parse_monolingual(&args.onto)?;
    let table = match &args.use_table {
        Some(p) => read_table(p, params.threshold)?,
        None => build_field_code_table(&dict.entries, &onto, params.threshold),
    };
    if let Some(p) = &args.table {
        write_file(p, |w| table.write_tsv(w))?;
    }
    let mappings = run_bilingual_match(&dict.entries, &onto, &table, &params);
    emit(args.out.as_deref(), stdout, |w| write_versioned(mappings.iter(), w))?;
    note(stderr, format_args!("{} mappings", mappings.len()));
    Ok(())
}

fn fieldtable(args: FieldtableArgs, stdout: &mut Out) -> Result<(), CliError> {
    let threshold = args.threshold.unwrap_or(MergeConfig::default().bimatch.threshold);
    if threshold == 0 {
        return Err(CliError::Usage("--threshold must be at least 1".into()));
    }
    let dict = parse_bilingual(&args.bilingual, &FieldCodeInventory::shipped())?;
    let onto = parse_monolingual(&args.onto)?;
    let table = build_field_code_table(&dict.entries, &onto, threshold);
    emit(args.out.as_deref(), stdout, |w| table.write_tsv(w))
}

fn pipeline(args: PipelineArgs, stdout: &mut Out, stderr: &mut Out) -> Result<(), CliError> {
    let mut config = config_or_default(args.config.as_deref())?;
    let paths = &mut config.paths;
    for (slot, flag) in [
        (&mut paths.left, args.left),
        (&mut paths.right, args.right),
        (&mut paths.seeds, args.seeds),
        (&mut paths.bilingual, args.bilingual),
        (&mut paths.field_table, args.field_table),
        (&mut paths.out_dir, args.out_dir),
    ] {
        if flag.is_some() {
            *slot = flag;
        }
    }
    if let Some(f) = args.floor {
        config.defmatch.floor = f;
    }
    if let Some(p) = args.penalty {
        config.bimatch.penalty = p;
    }
    if let Some(t) = args.threshold {
        config.bimatch.threshold = t;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let required = |slot: &Option<PathBuf>, flag: &str| {
        slot.clone().ok_or_else(|| {
            CliError::Usage(format!(
                "pipeline needs {flag} (or the matching [paths] key in --config)"
            ))
        })
    };
    let left_path = required(&config.paths.left, "--left")?;
    let right_path = required(&config.paths.right, "--right")?;
    let out_dir = required(&config.paths.out_dir, "--out-dir")?;

    let left = parse_monolingual(&left_path)?;
    let right = parse_monolingual(&right_path)?;
    let seeds = match &config.paths.seeds {
        Some(p) => load_seeds(p, &left, &right)?,
        None => Vec::new(),
    };
    let bilingual = match &config.paths.bilingual {
        Some(p) => {
            let dict = parse_bilingual(p, &FieldCodeInventory::shipped())?;
            for w in &dict.warnings {
                note(stderr, format_args!("{} line {}: {}", p.display(), w.line, w.message));
            }
            Some(dict)
        }
        None => None,
    };
    let table = match &config.paths.field_table {
        Some(p) => Some(read_table(p, config.bimatch.threshold)?),
        None => None,
    };
    let run = run_merge(
        MergeInputs {
            left,
            right,
            seeds,
            bilingual,
            table,
        },
        &StemmerRules::shipped(),
        &config,
    )?;
    for w in &run.hier.warnings {
        note(stderr, format_args!("warning: {w}"));
    }
    write_run(&run, &out_dir, args.force)?;
    let c = &run.manifest.counts;
    let _ = writeln!(
        stdout,
        "run {} written to {}: {} hierarchy, {} definition, {} bilingual matches, {} inconsistencies",
        run.manifest.run_id,
        out_dir.display(),
        c.hiermatch,
        c.defmatch,
        c.bimatch,
        c.inconsistencies
    );
    Ok(())
}

/// Matches of a run between its two resources, with reviewer verdicts
/// applied when the run has a verification log.
fn current_matches(run: &LoadedRun, reviewed: Option<&QueueStore>) -> Vec<Match> {
    let matches = match reviewed {
        Some(store) => store.queue().final_matches(),
        None => run.hiermatch.iter().chain(run.defmatch.iter()).cloned().collect(),
    };
    matches.into_iter().filter(|m| in_resource(&run.left, m)).collect()
}

/// The run's verification queue, if anyone has started reviewing it.
fn reviewed_queue(run: &LoadedRun) -> Result<Option<QueueStore>, CliError> {
    let qdir = queue_dir(&run.dir);
    if !qdir.join(EVENTS).exists() {
        return Ok(None);
    }
    Ok(Some(QueueStore::open(&qdir, DEFAULT_LEASE_MS)?))
}

fn in_resource(left: &Resource, m: &Match) -> bool {
    m.left.resource == left.name()
}

fn inconsistencies(args: RunArgs, stdout: &mut Out) -> Result<(), CliError> {
    let run = load_run(&args.run)?;
    let rel = &run.manifest.config.hiermatch;
    let reviewed = reviewed_queue(&run)?;
    let matches = current_matches(&run, reviewed.as_ref());
    let found = detect_inconsistencies(&run.left, &run.right, &matches, &rel.left_relation, &rel.right_relation)?;
    emit(args.out.as_deref(), stdout, |w| store::write_jsonl(found.iter(), w))
}

fn export(args: ExportArgs, stdout: &mut Out, stderr: &mut Out) -> Result<(), CliError> {
    let run = load_run(&args.run)?;
    let rel = &run.manifest.config.hiermatch;
    let reviewed = reviewed_queue(&run)?;
    let matches = current_matches(&run, reviewed.as_ref());
    if let Some(store) = &reviewed {
        let path = write_verified_stats(&run.dir, store.queue())?;
        note(stderr, format_args!("step accuracy written to {}", path.display()));
    }
    let nodes = export_ontology(
        &run.left,
        &run.right,
        &matches,
        args.verified_only,
        &rel.left_relation,
        &rel.right_relation,
    )?;
    emit(args.out.as_deref(), stdout, |w| store::write_jsonl(nodes.iter(), w))
}

fn verify_serve(args: ServeArgs, stderr: &mut Out) -> Result<(), CliError> {
    let run = load_run(&args.run)?;
    let store = open_run_queue(&run, args.lease_secs.saturating_mul(1000))?;
    let env = std::env::var(BIND_ENV).ok();
    let addr = server::bind_address(env.as_deref(), args.port);
    let app = server::router(AppState::new(store, server::system_clock()), args.static_dir);
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
        path: PathBuf::from("<runtime>"),
        source,
    })?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|source| CliError::Io {
                path: PathBuf::from(&addr),
                source,
            })?;
        note(
            stderr,
            format_args!("serving queue {} on http://{addr}", run.manifest.run_id),
        );
        server::serve(listener, app).await.map_err(|source| CliError::Io {
            path: PathBuf::from(&addr),
            source,
        })
    })
}
