//! `dsf`: double sparse factorization from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O or file-format error,
//! 3 numerical failure.

mod json;
mod parse;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsf_core::bench::{run_bench, BenchSpec};
use dsf_core::dsf::{
    dsf_project, split_budget, DsfConfig, FactorPair, SplitPolicy, DEFAULT_INNER, DEFAULT_OUTER,
};
use dsf_core::formats::{encode_sparse, read_any, read_dense, Container, VERSION};
use dsf_core::layerwise::{
    accumulate_gram, prune_layer, random_shared_mask, LayerCalibration, PruneOptions,
    DEFAULT_FINALIZE_ITERS,
};
use dsf_core::numerics::frobenius_error;
use dsf_core::{DsfError, SparseFactor};

use parse::{List, Switch};

#[derive(Parser)]
#[command(
    name = "dsf",
    version,
    about = "Double sparse factorization of dense matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor a matrix into two sparse factors under a nonzero budget.
    Project(ProjectArgs),
    /// Compress a layer against its calibration statistics.
    PruneLayer(PruneLayerArgs),
    /// Compare compression methods on generated matrices.
    Bench(BenchArgs),
    /// Describe a DSFM or DSFS file.
    Info(InfoArgs),
}

#[derive(Args)]
struct Factorization {
    /// Total density of the two factors relative to the input size.
    #[arg(long)]
    density: f64,
    /// Budget split: third, density:<a> or obc:<s>.
    #[arg(long, default_value = "third", value_parser = parse_split)]
    split: SplitPolicy,
    #[arg(long, default_value_t = DEFAULT_OUTER)]
    outer: usize,
    #[arg(long, default_value_t = DEFAULT_INNER)]
    inner: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use ρ₀ = 1 in every outer iteration.
    #[arg(long)]
    no_anneal: bool,
    /// Left factor output (DSFS).
    #[arg(long)]
    out_a: Option<PathBuf>,
    /// Right factor output (DSFS).
    #[arg(long)]
    out_b: Option<PathBuf>,
}

impl Factorization {
    fn config(&self) -> DsfConfig {
        DsfConfig {
            anneal: !self.no_anneal,
            seed: self.seed,
            ..DsfConfig::new(self.outer, self.inner)
        }
    }
}

#[derive(Args)]
struct ProjectArgs {
    /// Input matrix (DSFM).
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    fac: Factorization,
}

#[derive(Args)]
struct PruneLayerArgs {
    /// Layer weights (DSFM), input features along rows.
    #[arg(long)]
    weights: PathBuf,
    /// Calibration inputs X (DSFM), one sample per row.
    #[arg(long, conflicts_with = "gram", required_unless_present = "gram")]
    calib: Option<PathBuf>,
    /// Precomputed Gram XᵀX (DSFM).
    #[arg(long)]
    gram: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "on")]
    wanda: Switch,
    #[arg(long, value_enum, default_value = "on")]
    finalize: Switch,
    #[arg(long, default_value_t = DEFAULT_FINALIZE_ITERS)]
    finalize_iters: usize,
    #[arg(long, value_enum, default_value = "off")]
    optimize_a: Switch,
    /// Freeze the square factor to a random mask drawn from this seed.
    #[arg(long)]
    fixed_a_mask_seed: Option<u64>,
    #[command(flatten)]
    fac: Factorization,
}

#[derive(Args)]
struct BenchArgs {
    /// gaussian, planted[:a,b,sigma], lowrank:k,spikes,sigma or file:<path>.
    #[arg(long, default_value = "gaussian")]
    generator: String,
    /// Comma list of n or nxm.
    #[arg(long, default_value = "64,256", value_parser = parse::sizes)]
    sizes: List<(usize, usize)>,
    #[arg(long, default_value_t = 0.25)]
    density: f64,
    /// Inclusive range a..b or comma list.
    #[arg(long, default_value = "1..20", value_parser = parse::seeds)]
    seeds: List<u64>,
    #[arg(long, default_value = "dsf,magnitude,svd,monarch", value_parser = parse::methods)]
    methods: List<dsf_core::bench::Method>,
    #[arg(long, default_value = "third", value_parser = parse_split)]
    split: SplitPolicy,
    #[arg(long, default_value_t = DEFAULT_OUTER)]
    outer: usize,
    #[arg(long, default_value_t = DEFAULT_INNER)]
    inner: usize,
    /// Monarch block count; derived from the density when omitted.
    #[arg(long)]
    monarch_blocks: Option<usize>,
    /// JSON report output.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    input: PathBuf,
}

fn parse_split(s: &str) -> Result<SplitPolicy, String> {
    s.parse().map_err(|e: DsfError| e.to_string())
}

enum CliError {
    Usage(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<DsfError> for CliError {
    fn from(e: DsfError) -> Self {
        match e {
            DsfError::Io(_) | DsfError::Format(_) => CliError::Io(e.to_string()),
            DsfError::Numerical { .. } => CliError::Numerical(e.to_string()),
            DsfError::Shape(_) | DsfError::Precondition(_) => CliError::Usage(e.to_string()),
        }
    }
}

fn read_input(path: &Path) -> Result<dsf_core::DenseMatrix, CliError> {
    read_dense(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn budget(density: f64, n: usize, m: usize) -> Result<usize, CliError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(CliError::Usage(format!(
            "--density {density} outside (0, 1]"
        )));
    }
    Ok((density * (n * m) as f64).round() as usize)
}

/// Writes `(L, R)` with `L·R` equal to the represented matrix.
fn write_factors(
    pair: &FactorPair,
    fac: &Factorization,
) -> Result<(SparseFactor, SparseFactor), CliError> {
    let (left, right) = pair.left_right();
    if let Some(p) = &fac.out_a {
        write_atomic(p, &encode_sparse(&left))?;
    }
    if let Some(p) = &fac.out_b {
        write_atomic(p, &encode_sparse(&right))?;
    }
    Ok((left, right))
}

fn cmd_project(args: &ProjectArgs) -> Result<(), CliError> {
    let w = read_input(&args.input)?;
    let (n, m) = w.shape();
    let z = budget(args.fac.density, n, m)?;
    let split = split_budget(n, m, z, args.fac.split)?;
    let pair = dsf_project(&w, &split, &args.fac.config())?;
    let (left, right) = write_factors(&pair, &args.fac)?;
    let norm = w.frobenius_norm();
    let err = frobenius_error(&pair.product(), &w)?;
    let rel = if norm > 0.0 { err / norm } else { err };
    println!(
        "rel_error={} nnz_a={} nnz_b={}",
        json::format_float(rel),
        left.nnz(),
        right.nnz()
    );
    Ok(())
}

fn cmd_prune_layer(args: &PruneLayerArgs) -> Result<(), CliError> {
    let w = read_input(&args.weights)?;
    let calib = match (&args.calib, &args.gram) {
        (Some(x), None) => accumulate_gram(&[read_input(x)?])?,
        (None, Some(g)) => LayerCalibration::from_gram(read_input(g)?, 0)?,
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --calib and --gram".into(),
            ))
        }
    };
    let (n, m) = w.shape();
    let z = budget(args.fac.density, n, m)?;
    let fixed_a_mask = match args.fixed_a_mask_seed {
        Some(seed) => {
            let split = split_budget(n, m, z, args.fac.split)?;
            Some(random_shared_mask(seed, n.min(m), split.z_a)?)
        }
        None => None,
    };
    let opts = PruneOptions {
        wanda: args.wanda.is_on(),
        finalize: args.finalize.is_on(),
        finalize_iters: args.finalize_iters,
        optimize_a: args.optimize_a.is_on(),
        fixed_a_mask,
        ..Default::default()
    };
    let pruned = prune_layer(&w, &calib, z, args.fac.split, &args.fac.config(), &opts)?;
    let (left, right) = write_factors(&pruned.pair, &args.fac)?;
    println!(
        "layer_error={} nnz_a={} nnz_b={}",
        json::format_float(pruned.layer_error),
        left.nnz(),
        right.nnz()
    );
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let generator = parse::generator(&args.generator, args.density).map_err(CliError::Usage)?;
    let mut spec = BenchSpec::new(
        generator,
        args.sizes.0.clone(),
        args.density,
        args.seeds.0.clone(),
        args.methods.0.clone(),
    );
    spec.dsf = DsfConfig::new(args.outer, args.inner);
    spec.split = args.split;
    spec.monarch_blocks = args.monarch_blocks;
    let report = run_bench(&spec, args.jobs)?;
    let value = serde_json::to_value(&report).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&args.report, json::to_string_pretty(&value).as_bytes())?;
    let failed = report.trials.iter().filter(|t| t.error.is_some()).count();
    println!(
        "trials={} failed={} report={}",
        report.trials.len(),
        failed,
        args.report.display()
    );
    Ok(())
}

fn cmd_info(args: &InfoArgs) -> Result<(), CliError> {
    let container = read_any(&args.input)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.input.display())))?;
    let (kind, rows, cols, nnz) = match &container {
        Container::Dense(m) => ("DSFM", m.rows(), m.cols(), m.count_nonzero()),
        Container::Sparse(f) => ("DSFS", f.rows(), f.cols(), f.nnz()),
    };
    let total = rows * cols;
    let density = if total == 0 {
        0.0
    } else {
        nnz as f64 / total as f64
    };
    println!(
        "format={kind} version={VERSION} rows={rows} cols={cols} nnz={nnz} density={density:.6}"
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Project(a) => cmd_project(a),
        Command::PruneLayer(a) => cmd_prune_layer(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Info(a) => cmd_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
