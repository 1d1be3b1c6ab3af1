//! Thin CLI over the tlsmap library. Each subcommand maps onto one pipeline
//! stage (or query); `run` executes the whole pipeline behind the manifest.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tlsmap::error::Error;
use tlsmap::features::HeaderMode;
use tlsmap::ingest::parse_label;
use tlsmap::pipeline::{self, PipelineConfig};
use tlsmap::query;

#[derive(Parser)]
#[command(name = "tlsmap", version, about = "Enriched TLS fingerprint similarity mapping")]
struct Cli {
    /// Pipeline configuration file (sectioned key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for stage artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prepare a records store from a domain list CSV (pre-scan flow).
    Ingest {
        /// Input CSV: domain[,ip].
        #[arg(long)]
        input: PathBuf,
        /// Provenance tag stored on every record.
        #[arg(long)]
        source: String,
        /// Label: good/bad/unknown or 0/1/3.
        #[arg(long)]
        label: String,
        /// Optional pyasn-style database for AS enrichment.
        #[arg(long)]
        asn: Option<PathBuf>,
        /// Output path (defaults to <out-dir>/records.jsonl).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Parse raw fingerprints from the configured scan input.
    Parse,
    /// Capture or load HTTP headers for ingested records.
    Headers {
        /// Read captures from a JSON-lines store instead of the network.
        #[arg(long)]
        offline: Option<PathBuf>,
        /// Fetch live over the network.
        #[arg(long)]
        network: bool,
        #[arg(long)]
        timeout_secs: Option<u64>,
        #[arg(long)]
        concurrency: Option<usize>,
        #[arg(long)]
        user_agent: Option<String>,
        /// Retry plain HTTP after a TLS failure.
        #[arg(long)]
        allow_http_fallback: bool,
    },
    /// Build vocabularies and binary vectors.
    Vectorize {
        /// Header contribution: none, hash-only or per-key.
        #[arg(long)]
        header_mode: Option<String>,
    },
    /// Compute MinHash signatures.
    Index {
        /// Number of hash functions (d).
        #[arg(long)]
        hash_functions: Option<usize>,
    },
    /// Build the c-k-NN similarity graph.
    Graph {
        /// Nearest neighbors per node (k).
        #[arg(long)]
        neighbors: Option<usize>,
        /// Number of prefix trees (l).
        #[arg(long)]
        prefix_trees: Option<usize>,
        /// Candidate widening factor (c).
        #[arg(long)]
        widening: Option<usize>,
    },
    /// Extract the spanning forest and lay it out on the plane.
    Layout,
    /// Emit the HTML map plus GraphML/CSV exports.
    Render {
        /// Basename for rendered files.
        #[arg(long)]
        name: Option<String>,
    },
    /// Granularity and distance-stability reports.
    Stats,
    /// Query built artifacts.
    Query {
        /// Nearest neighbors of this domain.
        #[arg(long)]
        domain: Option<String>,
        /// Neighbor count.
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        /// List outlier (degree-zero) nodes instead.
        #[arg(long)]
        outliers: bool,
        /// Output format: plain or csv.
        #[arg(long, default_value = "plain")]
        format: String,
    },
    /// Run the full pipeline.
    Run,
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => pipeline::load_config(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    let out_dir = &cli.out_dir;
    match &cli.command {
        Command::Ingest {
            input,
            source,
            label,
            asn,
            output,
        } => {
            let label = parse_label(label)?;
            let seed = cli.seed.unwrap_or(1);
            std::fs::create_dir_all(out_dir).map_err(|e| Error::Config(e.to_string()))?;
            let output = output
                .clone()
                .unwrap_or_else(|| out_dir.join(pipeline::files::RECORDS));
            let (total, unresolved) =
                pipeline::ingest_domain_list(input, source, label, asn.as_deref(), seed, &output)?;
            println!(
                "ingested {total} records ({unresolved} unresolved) -> {}",
                output.display()
            );
        }
        Command::Parse => {
            let config = effective_config(cli)?;
            ensure_out_dir(out_dir)?;
            pipeline::stage_ingest(&config, out_dir)?;
            pipeline::stage_parse(&config, out_dir)?;
            println!("parsed fingerprints -> {}", out_dir.join(pipeline::files::TLS).display());
        }
        Command::Headers {
            offline,
            network,
            timeout_secs,
            concurrency,
            user_agent,
            allow_http_fallback,
        } => {
            let mut config = effective_config(cli)?;
            if let Some(path) = offline {
                config.headers = Some(path.clone());
                config.network = false;
            }
            if *network {
                config.network = true;
            }
            if let Some(t) = timeout_secs {
                config.timeout_secs = *t;
            }
            if let Some(c) = concurrency {
                config.concurrency = *c;
            }
            if let Some(agent) = user_agent {
                config.user_agent = Some(agent.clone());
            }
            if *allow_http_fallback {
                config.allow_http_fallback = true;
            }
            ensure_out_dir(out_dir)?;
            pipeline::stage_headers(&config, out_dir)?;
            println!("headers -> {}", out_dir.join(pipeline::files::HEADERS).display());
        }
        Command::Vectorize { header_mode } => {
            let mut config = effective_config(cli)?;
            if let Some(mode) = header_mode {
                config.header_mode = mode.parse::<HeaderMode>()?;
            }
            pipeline::stage_vectorize(&config, out_dir)?;
            println!("vectors -> {}", out_dir.join(pipeline::files::VECTORS).display());
        }
        Command::Index { hash_functions } => {
            let mut config = effective_config(cli)?;
            if let Some(d) = hash_functions {
                config.hash_functions = *d;
            }
            pipeline::stage_index(&config, out_dir)?;
            println!("signatures -> {}", out_dir.join(pipeline::files::SIGNATURES).display());
        }
        Command::Graph {
            neighbors,
            prefix_trees,
            widening,
        } => {
            let mut config = effective_config(cli)?;
            if let Some(k) = neighbors {
                config.neighbors = *k;
            }
            if let Some(l) = prefix_trees {
                config.prefix_trees = *l;
            }
            if let Some(c) = widening {
                config.widening = *c;
            }
            pipeline::stage_graph(&config, out_dir)?;
            println!("edges -> {}", out_dir.join(pipeline::files::EDGES).display());
        }
        Command::Layout => {
            let config = effective_config(cli)?;
            pipeline::stage_layout(&config, out_dir)?;
            println!("layout -> {}", out_dir.join(pipeline::files::LAYOUT).display());
        }
        Command::Render { name } => {
            let mut config = effective_config(cli)?;
            if let Some(name) = name {
                config.name = name.clone();
            }
            pipeline::stage_render(&config, out_dir)?;
            println!("map -> {}", out_dir.join(format!("{}.html", config.name)).display());
        }
        Command::Stats => {
            let config = effective_config(cli)?;
            pipeline::stage_stats(&config, out_dir)?;
            println!(
                "reports -> {}, {}",
                out_dir.join(pipeline::files::GRANULARITY_TXT).display(),
                out_dir.join(pipeline::files::STABILITY).display()
            );
        }
        Command::Query {
            domain,
            k,
            outliers,
            format,
        } => {
            let artifacts = query::load_artifacts(out_dir)?;
            match (domain, outliers) {
                (Some(domain), false) => {
                    let table = query::query_domain(&artifacts, domain, *k)?;
                    match format.as_str() {
                        "csv" => print!("{}", table.to_csv()),
                        _ => print!("{}", table.to_text()),
                    }
                }
                (None, true) => {
                    let outliers = query::list_outliers(&artifacts.graph);
                    match format.as_str() {
                        "csv" => {
                            println!("id,domain");
                            for id in outliers {
                                println!("{id},{}", artifacts.records[id].domain);
                            }
                        }
                        _ => {
                            for id in outliers {
                                println!("{id}  {}", artifacts.records[id].domain);
                            }
                        }
                    }
                }
                _ => {
                    return Err(Error::Invalid(
                        "pass exactly one of --domain <name> or --outliers".into(),
                    ))
                }
            }
        }
        Command::Run => {
            let config = effective_config(cli)?;
            let manifest = pipeline::run_pipeline(&config, out_dir)?;
            println!(
                "pipeline complete: {} stages, map -> {}",
                manifest.stages.len(),
                out_dir.join(format!("{}.html", config.name)).display()
            );
        }
    }
    Ok(())
}

fn ensure_out_dir(out_dir: &PathBuf) -> Result<(), Error> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.clone(),
        source: e,
    })
}
