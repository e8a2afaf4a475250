//! Reconstruction-error benchmark: generators, method runners and reports.
//!
//! Every method in a trial gets the same budget `round(density·n·m)`; errors
//! are reported raw (`‖Ŵ − W‖_F / ‖W‖_F`) and divided by the magnitude-pruning
//! error on the same matrix.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    low_rank_project, magnitude_prune, monarch_block_count, monarch_density, monarch_project,
    rank_for_budget,
};
use crate::dsf::{dsf_project, split_budget, DsfConfig, SplitPolicy};
use crate::error::{DsfError, Result};
use crate::formats::read_dense;
use crate::layerwise::LayerCalibration;
use crate::numerics::{frobenius_error, gram, matmul, DenseMatrix};
use crate::rng::DetRng;

/// Achieved Monarch density may differ from the target by this much and
/// still count as comparable.
pub const MONARCH_DENSITY_SLACK: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// I.i.d. standard normal entries.
    Gaussian,
    /// `A*B* + σ·noise` with `A*` (`k×k`, `k = min(n,m)`) holding
    /// `round(a_density·k²)` and `B*` holding `round(b_density·k·max(n,m))`
    /// Gaussian entries at uniformly random positions. Transposed when `n > m`.
    PlantedDsf {
        a_density: f64,
        b_density: f64,
        noise: f64,
    },
    /// Rank-`rank` Gaussian product scaled by `1/√rank`, plus
    /// `round(spike_density·n·m)` spikes of size `3·N(0,1)`, plus `σ·noise`.
    LowrankPlusSparse {
        rank: usize,
        spike_density: f64,
        noise: f64,
    },
    /// Top-left `n×m` block of a dense matrix file. The seed is ignored.
    File { path: PathBuf },
}

impl Generator {
    /// Planted factors sized for `density` under the third split.
    pub fn planted_for(density: f64) -> Self {
        Generator::PlantedDsf {
            a_density: density / 3.0,
            b_density: density * 2.0 / 3.0,
            noise: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let frac = |v: f64, what: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(DsfError::pre(format!("{what} {v} outside [0, 1]")))
            }
        };
        let sigma = |v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(DsfError::pre(format!("noise {v} must be finite and >= 0")))
            }
        };
        match self {
            Generator::Gaussian | Generator::File { .. } => Ok(()),
            Generator::PlantedDsf {
                a_density,
                b_density,
                noise,
            } => {
                frac(*a_density, "a_density")?;
                frac(*b_density, "b_density")?;
                sigma(*noise)
            }
            Generator::LowrankPlusSparse {
                spike_density,
                noise,
                ..
            } => {
                frac(*spike_density, "spike_density")?;
                sigma(*noise)
            }
        }
    }
}

fn sparse_gaussian(rng: &mut DetRng, rows: usize, cols: usize, count: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols);
    for idx in rng.sample_indices(rows * cols, count) {
        m.set(idx / cols, idx % cols, rng.gaussian());
    }
    m
}

fn add_noise(rng: &mut DetRng, w: DenseMatrix, sigma: f64) -> DenseMatrix {
    if sigma == 0.0 {
        return w;
    }
    let (n, m) = w.shape();
    let noise = rng.gaussian_matrix(n, m);
    w.zip_with(&noise, |a, b| a + sigma * b)
        .expect("same shape")
}

/// Deterministic per `(generator, seed, n, m)`.
pub fn generate_matrix(gen: &Generator, seed: u64, n: usize, m: usize) -> Result<DenseMatrix> {
    gen.validate()?;
    if n == 0 || m == 0 {
        return Err(DsfError::pre(format!("empty size {n}x{m}")));
    }
    let mut rng = DetRng::new(seed);
    match gen {
        Generator::Gaussian => Ok(rng.gaussian_matrix(n, m)),
        Generator::PlantedDsf {
            a_density,
            b_density,
            noise,
        } => {
            let (k, l) = (n.min(m), n.max(m));
            let za = (a_density * (k * k) as f64).round() as usize;
            let zb = (b_density * (k * l) as f64).round() as usize;
            let a = sparse_gaussian(&mut rng, k, k, za);
            let b = sparse_gaussian(&mut rng, k, l, zb);
            let ab = matmul(&a, &b)?;
            let w = if n > m { ab.transpose() } else { ab };
            Ok(add_noise(&mut rng, w, *noise))
        }
        Generator::LowrankPlusSparse {
            rank,
            spike_density,
            noise,
        } => {
            let w = if *rank == 0 {
                DenseMatrix::zeros(n, m)
            } else {
                let left = rng.gaussian_matrix(n, *rank);
                let right = rng.gaussian_matrix(*rank, m);
                matmul(&left, &right)?.scaled(1.0 / (*rank as f64).sqrt())
            };
            let z = (spike_density * (n * m) as f64).round() as usize;
            let spikes = sparse_gaussian(&mut rng, n, m, z).scaled(3.0);
            let w = w.add(&spikes)?;
            Ok(add_noise(&mut rng, w, *noise))
        }
        Generator::File { path } => {
            let full = read_dense(path)?;
            if full.rows() < n || full.cols() < m {
                return Err(DsfError::pre(format!(
                    "{} is {}x{}, smaller than requested {n}x{m}",
                    path.display(),
                    full.rows(),
                    full.cols()
                )));
            }
            full.block(0, 0, n, m)
        }
    }
}

/// A layer-wise instance: Gaussian weights and the Gram of correlated,
/// unevenly scaled calibration inputs `X = Z·(I + M/√n)·diag(s)` with
/// `s_i = exp(N(0, 0.25))` and `2n` samples.
pub fn synthetic_layer(seed: u64, n: usize, m: usize) -> Result<(DenseMatrix, LayerCalibration)> {
    let mut rng = DetRng::new(seed);
    let w = rng.gaussian_matrix(n, m);
    let samples = 2 * n;
    let z = rng.gaussian_matrix(samples, n);
    let inv = 1.0 / (n as f64).sqrt();
    let mix = rng
        .gaussian_matrix(n, n)
        .scaled(inv)
        .add(&DenseMatrix::identity(n))?;
    let scales: Vec<f64> = (0..n).map(|_| (0.5 * rng.gaussian()).exp()).collect();
    let mixed = matmul(&z, &mix)?;
    let x = DenseMatrix::from_fn(samples, n, |i, j| mixed.get(i, j) * scales[j]);
    let calib = LayerCalibration::from_gram(gram(&x)?, samples)?;
    Ok((w, calib))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dsf,
    DsfNoAnneal,
    Magnitude,
    Svd,
    Monarch,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Dsf,
        Method::DsfNoAnneal,
        Method::Magnitude,
        Method::Svd,
        Method::Monarch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dsf => "dsf",
            Method::DsfNoAnneal => "dsf_no_anneal",
            Method::Magnitude => "magnitude",
            Method::Svd => "svd",
            Method::Monarch => "monarch",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = DsfError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| DsfError::pre(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub generator: Generator,
    pub sizes: Vec<(usize, usize)>,
    pub density: f64,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub dsf: DsfConfig,
    pub split: SplitPolicy,
    /// Monarch block count; chosen from the density when absent.
    pub monarch_blocks: Option<usize>,
}

impl BenchSpec {
    pub fn new(
        generator: Generator,
        sizes: Vec<(usize, usize)>,
        density: f64,
        seeds: Vec<u64>,
        methods: Vec<Method>,
    ) -> Self {
        BenchSpec {
            generator,
            sizes,
            density,
            seeds,
            methods,
            dsf: DsfConfig::default(),
            split: SplitPolicy::ThirdSplit,
            monarch_blocks: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(DsfError::pre(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        if self.sizes.is_empty() || self.seeds.is_empty() || self.methods.is_empty() {
            return Err(DsfError::pre("need at least one size, seed and method"));
        }
        if self.sizes.iter().any(|&(n, m)| n == 0 || m == 0) {
            return Err(DsfError::pre("sizes must be non-empty"));
        }
        self.generator.validate()
    }

    pub fn budget(&self, n: usize, m: usize) -> usize {
        (self.density * (n * m) as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub nnz_used: usize,
    pub rel_error: Option<f64>,
    pub normalized_error: Option<f64>,
    pub wall_seconds: f64,
    pub error: Option<String>,
    /// False when the method could not meet the budget closely enough for
    /// its normalized error to be compared with the others.
    pub comparable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub stddev: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub spec: BenchSpec,
    pub trials: Vec<Trial>,
    /// Keyed `"method:nxm"`, over comparable trials with a normalized error.
    pub aggregates: BTreeMap<String, Aggregate>,
}

impl BenchReport {
    pub fn aggregate(&self, method: Method, n: usize, m: usize) -> Option<&Aggregate> {
        self.aggregates.get(&aggregate_key(method, n, m))
    }

    /// The report with every `wall_seconds` zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> BenchReport {
        let mut r = self.clone();
        for t in &mut r.trials {
            t.wall_seconds = 0.0;
        }
        r
    }
}

pub fn aggregate_key(method: Method, n: usize, m: usize) -> String {
    format!("{method}:{n}x{m}")
}

struct Outcome {
    nnz: usize,
    rel_error: f64,
    comparable: bool,
}

fn run_method(spec: &BenchSpec, method: Method, w: &DenseMatrix, norm: f64) -> Result<Outcome> {
    let (n, m) = w.shape();
    let z = spec.budget(n, m);
    let rel = |approx: &DenseMatrix| -> Result<f64> { Ok(frobenius_error(approx, w)? / norm) };
    match method {
        Method::Magnitude => {
            let p = magnitude_prune(w, z)?;
            Ok(Outcome {
                nnz: p.nnz(),
                rel_error: rel(&p.to_dense())?,
                comparable: true,
            })
        }
        Method::Dsf | Method::DsfNoAnneal => {
            let split = split_budget(n, m, z, spec.split)?;
            let cfg = DsfConfig {
                anneal: method == Method::Dsf,
                ..spec.dsf
            };
            let pair = dsf_project(w, &split, &cfg)?;
            Ok(Outcome {
                nnz: pair.nnz(),
                rel_error: rel(&pair.product())?,
                comparable: true,
            })
        }
        Method::Svd => {
            let pair = low_rank_project(w, rank_for_budget(n, m, z))?;
            Ok(Outcome {
                nnz: pair.nnz(),
                rel_error: rel(&pair.product())?,
                comparable: true,
            })
        }
        Method::Monarch => {
            if n != m {
                return Err(DsfError::pre(format!(
                    "monarch needs a square matrix, got {n}x{m}"
                )));
            }
            let b = match spec.monarch_blocks {
                Some(b) => b,
                None => monarch_block_count(n, spec.density).ok_or_else(|| {
                    DsfError::pre(format!(
                        "no block count reaches density {} at n = {n}",
                        spec.density
                    ))
                })?,
            };
            let pair = monarch_project(w, b)?;
            let achieved = monarch_density(n, b);
            Ok(Outcome {
                nnz: pair.nnz(),
                rel_error: rel(&pair.product())?,
                comparable: (achieved - spec.density).abs() <= MONARCH_DENSITY_SLACK + 1e-12,
            })
        }
    }
}

fn run_trial(spec: &BenchSpec, (n, m): (usize, usize), seed: u64, method: Method) -> Trial {
    let start = Instant::now();
    let mut trial = Trial {
        method,
        n,
        m,
        seed,
        nnz_used: 0,
        rel_error: None,
        normalized_error: None,
        wall_seconds: 0.0,
        error: None,
        comparable: false,
    };
    let result = (|| -> Result<()> {
        let w = generate_matrix(&spec.generator, seed, n, m)?;
        let norm = w.frobenius_norm();
        if norm == 0.0 {
            return Err(DsfError::pre("generated matrix is zero"));
        }
        let out = run_method(spec, method, &w, norm)?;
        trial.nnz_used = out.nnz;
        trial.rel_error = Some(out.rel_error);
        trial.comparable = out.comparable;
        let anchor = if method == Method::Magnitude {
            out.rel_error
        } else {
            run_method(spec, Method::Magnitude, &w, norm)?.rel_error
        };
        trial.normalized_error = if method == Method::Magnitude {
            Some(1.0)
        } else if anchor > 0.0 {
            Some(out.rel_error / anchor)
        } else if out.rel_error == 0.0 {
            Some(1.0)
        } else {
            return Err(DsfError::pre(
                "magnitude pruning is exact; normalized error undefined",
            ));
        };
        Ok(())
    })();
    if let Err(e) = result {
        trial.error = Some(e.to_string());
        trial.comparable = false;
    }
    trial.wall_seconds = start.elapsed().as_secs_f64();
    trial
}

/// Runs every `(size, seed, method)` trial on a pool of `jobs` threads.
///
/// Trial order in the report is sizes, then seeds, then methods, regardless
/// of completion order. Failed trials carry an error message.
pub fn run_bench(spec: &BenchSpec, jobs: usize) -> Result<BenchReport> {
    spec.validate()?;
    let tasks: Vec<((usize, usize), u64, Method)> = spec
        .sizes
        .iter()
        .flat_map(|&size| {
            spec.seeds
                .iter()
                .flat_map(move |&seed| spec.methods.iter().map(move |&method| (size, seed, method)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| DsfError::pre(format!("cannot start worker pool: {e}")))?;
    let trials: Vec<Trial> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(size, seed, method)| run_trial(spec, size, seed, method))
            .collect()
    });
    let aggregates = aggregate(&trials);
    Ok(BenchReport {
        spec: spec.clone(),
        trials,
        aggregates,
    })
}

fn aggregate(trials: &[Trial]) -> BTreeMap<String, Aggregate> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in trials {
        if let (Some(v), true) = (t.normalized_error, t.comparable) {
            groups
                .entry(aggregate_key(t.method, t.n, t.m))
                .or_default()
                .push(v);
        }
    }
    groups
        .into_iter()
        .map(|(k, v)| {
            let count = v.len();
            let mean = v.iter().sum::<f64>() / count as f64;
            let stddev = if count > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
            } else {
                0.0
            };
            (
                k,
                Aggregate {
                    mean,
                    stddev,
                    count,
                },
            )
        })
        .collect()
}
