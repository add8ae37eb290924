//! Command-line front end: single runs, sweeps and graph generation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccache_sim::experiments::{all_passed, ExperimentPlan, LlcOverride};
use ccache_sim::report::emit_csv;
use ccache_sim::workloads::graph::gen_graph;
use ccache_sim::workloads::{GraphKind, Variant, WorkloadConfig, WorkloadKind};
use ccache_sim::{ConfigFile, Result, SimConfig, SimError};

#[derive(Parser)]
#[command(
    name = "ccache-sim",
    version,
    about = "Multicore cache simulator with on-demand privatization of commutative data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every combination of the given workloads, variants, fractions and seeds.
    Run(RunArgs),
    /// Run the standard sweep: all workloads and variants at 0.25x to 4x LLC.
    Sweep(RunArgs),
    /// Generate a graph and write it as a CSR file.
    GenGraph(GenGraphArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Workloads (kv, kmeans, pagerank, bfs), comma separated.
    #[arg(long, value_delimiter = ',')]
    workload: Vec<WorkloadKind>,
    /// Variants (fgl, dup, ccache), comma separated.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    /// Working-set sizes as fractions of LLC capacity, comma separated.
    #[arg(long, value_delimiter = ',')]
    ws_fraction: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    cores: Option<usize>,
    #[arg(long)]
    llc_bytes: Option<usize>,
    #[arg(long)]
    sb_entries: Option<usize>,
    /// CData operations between cadence points.
    #[arg(long)]
    merge_cadence: Option<usize>,
    /// Merge at cadence points instead of marking lines mergeable.
    #[arg(long)]
    no_soft_merge: bool,
    /// Merge clean privatized lines too.
    #[arg(long)]
    no_dirty_merge: bool,
    /// Start from the desk-scale machine (4 cores, 8KB L1, 256KB LLC).
    #[arg(long)]
    scaled: bool,
    /// TOML file with machine and workload keys; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// LLC capacity used instead for the variants in --override-variants.
    #[arg(long)]
    llc_override_bytes: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "ccache")]
    override_variants: Vec<Variant>,
    /// KV key count (default: derived from the working-set fraction).
    #[arg(long)]
    keys: Option<usize>,
    #[arg(long)]
    kmeans_k: Option<usize>,
    #[arg(long)]
    kmeans_dims: Option<usize>,
    #[arg(long)]
    kmeans_iterations: Option<usize>,
    /// Floating-point K-means points and accumulators.
    #[arg(long)]
    kmeans_float: bool,
    /// Drop probability of approximate K-means merges.
    #[arg(long)]
    drop_p: Option<f64>,
    #[arg(long)]
    graph_kind: Option<GraphKind>,
    #[arg(long)]
    graph_scale: Option<u32>,
    #[arg(long)]
    edge_factor: Option<usize>,
    #[arg(long)]
    graph_file: Option<PathBuf>,
    #[arg(long)]
    pagerank_iterations: Option<usize>,
    #[arg(long)]
    bfs_source: Option<u64>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long, default_value = "kronecker")]
    kind: GraphKind,
    #[arg(long)]
    scale: u32,
    #[arg(long, default_value_t = 16)]
    edge_factor: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn build_plan(a: &RunArgs, sweep: bool) -> Result<ExperimentPlan> {
    let mut cfg = if a.scaled {
        SimConfig::scaled()
    } else {
        SimConfig::default()
    };
    let mut wl = WorkloadConfig::new(WorkloadKind::Kv, Variant::Ccache);
    let mut workloads = Vec::new();
    let mut variants = Vec::new();
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let file = ConfigFile::parse(&text)?;
        file.apply(&mut cfg);
        if let Some(w) = &file.workload {
            workloads.push(w.parse()?);
        }
        if let Some(v) = &file.variant {
            variants.push(v.parse()?);
        }
        if let Some(f) = file.ws_fraction {
            wl.ws_fraction = f;
        }
        if let Some(s) = file.seed {
            wl.seed = s;
        }
        wl.merge_cadence = file.merge_cadence.or(wl.merge_cadence);
        wl.soft_merge = file.soft_merge.unwrap_or(wl.soft_merge);
    }
    if let Some(c) = a.cores {
        cfg.cache.cores = c;
    }
    if let Some(b) = a.llc_bytes {
        cfg.cache.llc.capacity_bytes = b;
    }
    if let Some(s) = a.sb_entries {
        cfg.ccache.sb_entries = s;
    }
    if a.no_dirty_merge {
        cfg.ccache.dirty_merge = false;
    }
    if a.no_soft_merge {
        wl.soft_merge = false;
    }
    wl.merge_cadence = a.merge_cadence.or(wl.merge_cadence);
    wl.keys = a.keys;
    let k = &mut wl.kmeans;
    k.k = a.kmeans_k.unwrap_or(k.k);
    k.dims = a.kmeans_dims.unwrap_or(k.dims);
    k.iterations = a.kmeans_iterations.unwrap_or(k.iterations);
    k.float |= a.kmeans_float;
    k.drop_p = a.drop_p;
    let g = &mut wl.graph;
    g.kind = a.graph_kind.unwrap_or(g.kind);
    g.scale = a.graph_scale;
    g.edge_factor = a.edge_factor.unwrap_or(g.edge_factor);
    g.file = a.graph_file.clone();
    wl.pagerank_iterations = a.pagerank_iterations.unwrap_or(wl.pagerank_iterations);
    wl.bfs_source = a.bfs_source;

    let mut plan = ExperimentPlan::new(cfg, wl.clone());
    plan.workloads = pick(&a.workload, workloads, sweep.then(|| WorkloadKind::ALL.to_vec()));
    plan.variants = pick(&a.variant, variants, Some(Variant::ALL.to_vec()));
    let fraction_default = if sweep {
        vec![0.25, 0.5, 1.0, 2.0, 4.0]
    } else {
        vec![wl.ws_fraction]
    };
    plan.fractions = pick(&a.ws_fraction, Vec::new(), Some(fraction_default));
    plan.seeds = pick(&a.seed, Vec::new(), Some(vec![wl.seed]));
    plan.llc_override = a.llc_override_bytes.map(|bytes| LlcOverride {
        bytes,
        variants: a.override_variants.clone(),
    });
    if plan.workloads.is_empty() && !sweep {
        return Err(SimError::Config("--workload is required".into()));
    }
    Ok(plan)
}

/// Flag values, else config-file values, else the default.
fn pick<T: Clone>(flags: &[T], file: Vec<T>, default: Option<Vec<T>>) -> Vec<T> {
    if !flags.is_empty() {
        flags.to_vec()
    } else if !file.is_empty() {
        file
    } else {
        default.unwrap_or_default()
    }
}

fn run(a: &RunArgs, sweep: bool) -> Result<bool> {
    let plan = build_plan(a, sweep)?;
    let reports = plan.run();
    match &a.out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
            emit_csv(&reports, std::io::BufWriter::new(f))?;
        }
        None => emit_csv(&reports, std::io::stdout().lock())?,
    }
    for r in reports.iter().filter(|r| !r.passed()) {
        eprintln!(
            "FAILED {}/{} fraction {} seed {}: {}",
            r.workload,
            r.variant,
            r.ws_fraction,
            r.seed,
            r.error.as_deref().unwrap_or("oracle mismatch")
        );
    }
    Ok(all_passed(&reports))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a, false),
        Command::Sweep(a) => run(a, true),
        Command::GenGraph(a) => gen_graph(a.kind, a.scale, a.edge_factor, a.seed)
            .and_then(|g| g.save(&a.out))
            .map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
