//! `lexalign`: one entry point for ingest checks, the three matchers, the
//! merge pipeline, exports and the verification server.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 when the data is bad.

mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use lexalign_core::bimatch::BiMatchError;
use lexalign_core::config::ConfigError;
use lexalign_core::hiermatch::HierMatchError;
use lexalign_core::ingest::IngestError;
use lexalign_core::lexmodel::ModelError;
use lexalign_core::pipeline::PipelineError;
use lexalign_core::store::StoreError;

/// Where commands write their output and messages.
pub type Out = dyn Write + Send;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    HierMatch(#[from] HierMatchError),
    #[error(transparent)]
    BiMatch(#[from] BiMatchError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Verify(#[from] lexalign_verify::StoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} of {1} files failed the check")]
    CheckFailed(usize, usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lexalign",
    about = "Align and merge lexical resources",
    disable_version_flag = true
)]
pub struct Cli {
    /// Print the tool version and the schema version of every file format.
    #[arg(long, short = 'V')]
    version: bool,

    /// Worker threads for per-word matching (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse resource files and report what they contain.
    IngestCheck(IngestCheckArgs),
    /// Match senses of shared headwords by comparing definitions.
    Defmatch(DefmatchArgs),
    /// Match senses by walking both hierarchies outward from anchors.
    Hiermatch(HiermatchArgs),
    /// Map bilingual sense groups onto an ontology.
    Bimatch(BimatchArgs),
    /// Build the field-code correspondence table.
    Fieldtable(FieldtableArgs),
    /// Run the full merge into a run directory.
    Pipeline(PipelineArgs),
    /// List hierarchy disagreements among the matches of a run.
    Inconsistencies(RunArgs),
    /// Write the merged ontology of a run.
    Export(ExportArgs),
    /// Serve the verification queue of a run over HTTP.
    VerifyServe(ServeArgs),
}

#[derive(Debug, Args)]
struct IngestCheckArgs {
    /// Monolingual resource files.
    files: Vec<PathBuf>,
    /// Bilingual dictionary files.
    #[arg(long, value_name = "FILE")]
    bilingual: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct DefmatchArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Smallest similarity that may be proposed.
    #[arg(long)]
    floor: Option<f64>,
    /// Only these headwords (comma separated).
    #[arg(long, value_delimiter = ',')]
    words: Option<Vec<String>>,
    /// Ignore example sentences.
    #[arg(long)]
    no_examples: bool,
    /// Retire only the chosen cell instead of its row and column.
    #[arg(long)]
    cell_only: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-sense similarity scores here.
    #[arg(long)]
    evidence: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HiermatchArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    left_relation: Option<String>,
    #[arg(long)]
    right_relation: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-step counts as TSV.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BimatchArgs {
    #[arg(long)]
    bilingual: PathBuf,
    #[arg(long)]
    onto: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the field-code table built for this run here.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Read a prebuilt field-code table instead of building one.
    #[arg(long, conflicts_with = "table")]
    use_table: Option<PathBuf>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    threshold: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FieldtableArgs {
    #[arg(long)]
    bilingual: PathBuf,
    #[arg(long)]
    onto: PathBuf,
    #[arg(long)]
    threshold: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    left: Option<PathBuf>,
    #[arg(long)]
    right: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<PathBuf>,
    #[arg(long)]
    bilingual: Option<PathBuf>,
    #[arg(long)]
    field_table: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    threshold: Option<usize>,
    /// Overwrite a run directory built from different inputs.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    run: PathBuf,
    /// Merge only matches a reviewer accepted or corrected.
    #[arg(long)]
    verified_only: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    run: PathBuf,
    /// Overrides the port of the bind address.
    #[arg(long)]
    port: Option<u16>,
    /// Directory holding the reviewer UI bundle.
    #[arg(long = "static", value_name = "DIR")]
    static_dir: Option<PathBuf>,
    /// Lease length in seconds.
    #[arg(long, default_value_t = 600)]
    lease_secs: u64,
}

pub fn version_text() -> String {
    let v = lexalign_core::SCHEMA_VERSION;
    format!(
        "lexalign {}\nschema versions: resource {v}, bilingual {v}, seeds {v}, matches {v}, mappings {v}, run manifest {v}, verification log {v}\n",
        env!("CARGO_PKG_VERSION")
    )
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Messages go to `stdout`/`stderr`.
pub fn run<I, T>(argv: I, stdout: &mut Out, stderr: &mut Out) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    // warnings reach stderr through the command itself; RUST_LOG=info shows progress
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = err.render().to_string();
            let _ = if err.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    if cli.version {
        let _ = write!(stdout, "{}", version_text());
        return EXIT_OK;
    }
    let Some(command) = cli.command else {
        let _ = writeln!(stderr, "error: no subcommand given\n\nUsage: lexalign [OPTIONS] <COMMAND>\nRun 'lexalign --help' for the list of commands.");
        return EXIT_USAGE;
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start worker threads: {e}");
            return EXIT_DATA;
        }
    };
    match pool.install(|| commands::dispatch(command, stdout, stderr)) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            if let CliError::Usage(_) = err {
                let _ = writeln!(stderr, "Run 'lexalign --help' for usage.");
            }
            err.exit_code()
        }
    }
}
