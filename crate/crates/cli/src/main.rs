//! `hierfdr` — adjust hypothesis files for multiplicity, run seeded
//! Monte Carlo experiments, and render replication-analysis reports.
//!
//! Exit codes: 0 success, 2 validation or usage error, 3 internal error.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hierfdr::io::render_results_text;
use hierfdr::sim::{per_replication_csv, run_full_experiment, SimulationConfig};
use hierfdr::{
    parse_tree, render_report, serialize_results, treebh, AdjustmentResult, DocumentFormat,
    FlatMethod, HypothesisTree, Node, ReportFormat,
};

#[derive(Parser)]
#[command(
    name = "hierfdr",
    version,
    about = "Multiplicity adjustment for families and trees of p-values",
    long_about = "Adjusts hypothesis files for multiplicity (bonferroni, bh, by, treebh), runs \
seeded Monte Carlo FDR/replicability experiments, and renders replication-analysis reports.\n\
Inputs are read from a file path or from standard input when the path is omitted or \"-\".\n\
Set HIERFDR_THREADS to cap simulation parallelism."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adjust the p-values in a hypothesis document
    Adjust(AdjustArgs),
    /// Run the Monte Carlo experiments described by a JSON config
    Simulate(SimulateArgs),
    /// Analyze a replication results table (CSV)
    Report(ReportArgs),
}

#[derive(Args)]
struct AdjustArgs {
    /// Input document (JSON or CSV, sniffed); "-" or absent = stdin
    input: Option<PathBuf>,
    /// Adjustment method. Flat methods pool the leaves as one family;
    /// treebh runs the hierarchical procedure over the whole tree.
    #[arg(long, value_enum)]
    method: Method,
    /// Target FDR level
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    /// Write here instead of stdout (atomic: write-then-rename)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation config (JSON); "-" or absent = stdin
    config: Option<PathBuf>,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// text = summary table, json = full report,
    /// csv = per-replication rows for external plotting
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Replication results table (CSV); "-" or absent = stdin
    input: Option<PathBuf>,
    /// Target FDR level; doubles as the replication alpha
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    /// Replication alpha, when it must differ from --q
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Bonferroni,
    Bh,
    By,
    Treebh,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("unknown internal error");
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Adjust(args) => adjust(args),
        Command::Simulate(args) => simulate(args),
        Command::Report(args) => report(args),
    }
}

fn read_input(path: &Option<PathBuf>) -> Result<String> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display())),
        _ => {
            let mut text = String::new();
            std::io::stdin()
                .read_to_string(&mut text)
                .context("reading standard input")?;
            Ok(text)
        }
    }
}

/// Writes output atomically: a temporary file in the destination
/// directory, then a rename. Partial files never land on the final path.
fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
            let tmp = dir
                .unwrap_or_else(|| Path::new("."))
                .join(format!(".{}.tmp", std::process::id()));
            std::fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
            std::fs::rename(&tmp, path)
                .with_context(|| format!("renaming into {}", path.display()))?;
            Ok(())
        }
    }
}

fn sniff_format(text: &str) -> DocumentFormat {
    if text.trim_start().starts_with('{') {
        DocumentFormat::Json
    } else {
        DocumentFormat::Csv
    }
}

fn adjust(args: AdjustArgs) -> Result<()> {
    let text = read_input(&args.input)?;
    let tree = parse_tree(&text, sniff_format(&text))?;

    let (tree, results) = match args.method {
        Method::Treebh => {
            let results = treebh(&tree, args.q)?;
            (tree, results)
        }
        flat => {
            let method = match flat {
                Method::Bonferroni => FlatMethod::Bonferroni,
                Method::Bh => FlatMethod::Bh,
                Method::By => FlatMethod::By,
                Method::Treebh => unreachable!(),
            };
            flat_adjust_leaves(&tree, method, args.q)?
        }
    };

    let rendered = match args.format {
        OutputFormat::Text => {
            let mut out = format!(
                "adjustment: method = {}, q = {}\n",
                method_name(args.method),
                args.q
            );
            if args.method == Method::Treebh {
                out.push_str(&format!(
                    "adjusted p-values are valid at q = {} (selection fractions depend on q)\n",
                    args.q
                ));
            } else if tree_has_internal_nodes_pruned(&text) {
                out.push_str("note: flat methods adjust the pooled leaves as one family\n");
            }
            out.push('\n');
            out.push_str(&render_results_text(&tree, &results)?);
            let off = hierfdr::turned_off_branches(&tree, &results);
            if !off.is_empty() {
                out.push_str(&format!("\nturned-off branches: {}\n", off.join(", ")));
            }
            out
        }
        OutputFormat::Json => serialize_results(&tree, &results, DocumentFormat::Json)?,
        OutputFormat::Csv => serialize_results(&tree, &results, DocumentFormat::Csv)?,
    };
    emit(&args.output, &rendered)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Bonferroni => "bonferroni",
        Method::Bh => "bh",
        Method::By => "by",
        Method::Treebh => "treebh",
    }
}

// The note only matters when pooling actually dropped internal nodes; a
// quick reparse-free heuristic is not worth it, so check the parsed tree.
fn tree_has_internal_nodes_pruned(text: &str) -> bool {
    parse_tree(text, sniff_format(text))
        .map(|t| t.node_count() != t.leaf_count())
        .unwrap_or(false)
}

/// Flat methods treat the pooled leaf set as one family; internal nodes
/// are dropped from the output.
fn flat_adjust_leaves(
    tree: &HypothesisTree,
    method: FlatMethod,
    q: f64,
) -> Result<(HypothesisTree, Vec<AdjustmentResult>)> {
    if !(q > 0.0 && q < 1.0) {
        bail!("level {q} outside (0,1)");
    }
    let mut leaves: Vec<hierfdr::Hypothesis> = Vec::new();
    tree.visit(|node, _| {
        if node.is_leaf() {
            leaves.push(node.hypothesis.clone());
        }
    });
    let pvals: Vec<f64> = leaves
        .iter()
        .map(|h| h.p.ok_or_else(|| anyhow!("leaf \"{}\" has no p-value", h.id)))
        .collect::<Result<_>>()?;
    let adjusted = method.adjust(&pvals)?;
    let results: Vec<AdjustmentResult> = leaves
        .iter()
        .zip(pvals.iter().zip(&adjusted))
        .map(|(h, (&raw, &adj))| AdjustmentResult {
            node_id: h.id.clone(),
            raw_p: raw,
            adjusted_p: adj,
            rejected: adj <= q,
            family_level: q,
            tested: true,
            selection_fraction: 1.0,
        })
        .collect();
    let flat_tree = HypothesisTree::new(leaves.into_iter().map(Node::leaf).collect(), q);
    Ok((flat_tree, results))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let text = read_input(&args.config)?;
    let mut config = SimulationConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    let pool = thread_pool()?;
    let rendered = pool.install(|| -> Result<String> {
        Ok(match args.format {
            OutputFormat::Text => run_full_experiment(&config)?.to_text(),
            OutputFormat::Json => run_full_experiment(&config)?.to_json(),
            OutputFormat::Csv => per_replication_csv(&config)?,
        })
    })?;
    emit(&args.output, &rendered)
}

/// Simulation parallelism, capped by HIERFDR_THREADS when set.
fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("HIERFDR_THREADS") {
        let threads: usize = raw
            .parse()
            .map_err(|_| anyhow!("HIERFDR_THREADS must be a positive integer, got \"{raw}\""))?;
        if threads == 0 {
            bail!("HIERFDR_THREADS must be >= 1");
        }
        builder = builder.num_threads(threads);
    }
    builder.build().context("building thread pool")
}

fn report(args: ReportArgs) -> Result<()> {
    let text = read_input(&args.input)?;
    let records = hierfdr::ingest_records(&text)?;
    let alpha = args.alpha.unwrap_or(args.q);
    let format = match args.format {
        OutputFormat::Text => ReportFormat::Text,
        OutputFormat::Json => ReportFormat::Json,
        OutputFormat::Csv => bail!("report supports text or json output"),
    };
    let rendered = render_report(&records, alpha, format)?;
    emit(&args.output, &rendered)
}
