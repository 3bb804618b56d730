//! `detscope`: batch access to ingest validation, metrics reports, totem
//! exports and session replay, without the service.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use detscope_core::correction::{export_annotations, read_event_log, replay, write_export};
use detscope_core::dataset::{load_dataset, DatasetPaths, LoadedDataset};
use detscope_core::ingest::IngestOptions;
use detscope_core::report::metrics_report;
use detscope_core::totem::{build_graph, enumerate_cliques, find_groups, similarity_matrix};

#[derive(Debug, Parser)]
#[command(name = "detscope", version, about = "Introspect and correct object-detection output")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Dataset directory (detections.jsonl, vocabulary.txt, optional
    /// captions.jsonl, ground_truth.jsonl, stopwords.txt, lemmas.tsv).
    #[arg(long, global = true, default_value = ".")]
    data_dir: PathBuf,
    /// Write data here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Skip malformed lines (reported on stderr) instead of failing.
    #[arg(long, global = true)]
    lenient: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every input file and report all diagnostics.
    Validate,
    /// Emit the metrics report.
    Metrics {
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
    },
    /// People graph, cliques, similarity matrix and group finder.
    #[command(subcommand)]
    Totem(TotemCommand),
    /// Fold a correction event log.
    #[command(subcommand)]
    Session(SessionCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphFormat {
    Json,
    Tsv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MatrixFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum TotemCommand {
    /// Co-occurrence graph as node-link JSON or a weighted edge list.
    Graph {
        #[arg(long, default_value_t = 1)]
        threshold: usize,
        #[arg(long, value_enum, default_value_t = GraphFormat::Json)]
        format: GraphFormat,
    },
    /// Maximal cliques of the people graph, largest first.
    Cliques {
        #[arg(long, default_value_t = 1)]
        threshold: usize,
        #[arg(long, default_value_t = 2)]
        min_size: usize,
    },
    /// Pairwise cosine similarity of per-person object counts.
    Similarity {
        #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
        format: MatrixFormat,
    },
    /// Candidate groups: maximal cliques of the thresholded similarity graph.
    Groups {
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        #[arg(long, default_value_t = 8)]
        size: usize,
    },
}

#[derive(Debug, Subcommand)]
enum SessionCommand {
    /// Replay a log and print the folded session state as JSON.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Replay a log and print corrected annotations in ground-truth format.
    Export {
        #[arg(long)]
        log: PathBuf,
    },
}

/// Failure of the inputs themselves (exit 1), as opposed to usage errors.
struct Invalid(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Invalid {
    fn from(e: E) -> Self {
        Invalid(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(common: &Common, lenient: bool) -> Result<LoadedDataset, Invalid> {
    let paths = DatasetPaths::from_dir(&common.data_dir);
    let opts = IngestOptions {
        lenient,
        ..Default::default()
    };
    let loaded = load_dataset(&paths, &opts)?;
    for d in &loaded.diagnostics {
        eprintln!("{d}");
    }
    Ok(loaded)
}

fn emit(out: Option<&Path>, body: &[u8]) -> Result<(), Invalid> {
    match out {
        Some(path) => std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(body)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn json_line(value: &impl serde::Serialize) -> Result<Vec<u8>, Invalid> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    Ok(buf)
}

fn run(cli: Cli) -> Result<(), Invalid> {
    let common = &cli.common;
    let out = common.out.as_deref();
    match &cli.command {
        Command::Validate => {
            // Always collect every problem; any diagnostic fails validation.
            let loaded = load(common, true)?;
            let n = loaded.diagnostics.len();
            if n > 0 {
                return Err(Invalid(anyhow::anyhow!("{n} invalid line(s)")));
            }
            let ds = &loaded.dataset;
            eprintln!(
                "ok: {} detections, {} classes, {} ground-truth annotations, {} captions",
                ds.detections.len(),
                ds.vocabulary.len(),
                ds.ground_truth.len(),
                ds.captions.len()
            );
            Ok(())
        }
        Command::Metrics { format } => {
            let loaded = load(common, common.lenient)?;
            let report = metrics_report(&loaded.dataset.detections)?;
            let mut buf = Vec::new();
            match format {
                TableFormat::Csv => report.write_csv(&mut buf)?,
                TableFormat::Jsonl => report.write_jsonl(&mut buf)?,
            }
            emit(out, &buf)
        }
        Command::Totem(cmd) => {
            let loaded = load(common, common.lenient)?;
            let profiles = loaded.dataset.profiles();
            let body = match cmd {
                TotemCommand::Graph { threshold, format } => {
                    let graph = build_graph(&profiles, *threshold)?;
                    match format {
                        GraphFormat::Json => json_line(&graph.to_node_link())?,
                        GraphFormat::Tsv => {
                            let mut buf = Vec::new();
                            graph.write_edge_list(&mut buf)?;
                            buf
                        }
                    }
                }
                TotemCommand::Cliques { threshold, min_size } => {
                    let graph = build_graph(&profiles, *threshold)?;
                    json_line(&enumerate_cliques(&graph, *min_size)?)?
                }
                TotemCommand::Similarity { format } => {
                    let matrix = similarity_matrix(&profiles)?;
                    match format {
                        MatrixFormat::Json => json_line(&matrix)?,
                        MatrixFormat::Csv => {
                            let mut buf = Vec::new();
                            matrix.write_csv(&mut buf)?;
                            buf
                        }
                    }
                }
                TotemCommand::Groups { threshold, size } => {
                    let matrix = similarity_matrix(&profiles)?;
                    json_line(&find_groups(&matrix, *threshold, *size)?)?
                }
            };
            emit(out, &body)
        }
        Command::Session(cmd) => {
            let loaded = load(common, common.lenient)?;
            let log = match cmd {
                SessionCommand::Replay { log } | SessionCommand::Export { log } => log,
            };
            let file = File::open(log).with_context(|| format!("opening {}", log.display()))?;
            let events = read_event_log(BufReader::new(file)).with_context(|| log.display().to_string())?;
            let state = replay(&events, &loaded.dataset).with_context(|| log.display().to_string())?;
            let body = match cmd {
                SessionCommand::Replay { .. } => json_line(&serde_json::json!({
                    "event_count": events.len(),
                    "state": state,
                }))?,
                SessionCommand::Export { .. } => {
                    let mut buf = Vec::new();
                    write_export(&mut buf, &export_annotations(&loaded.dataset, &state))?;
                    buf
                }
            };
            emit(out, &body)
        }
    }
}
