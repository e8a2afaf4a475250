//! Double sparse factorization of a dense matrix.
//!
//! Finds `A` (`n×n`) and `B` (`n×m`) with `‖A‖₀ ≤ z_a`, `‖B‖₀ ≤ z_b` that make
//! `‖AB − W‖_F` small, by alternating ADMM mask searches on `B` and `A`.
//! Each inner solve is warm-started from the previous outer step's iterate
//! and duals, and its first ADMM step uses an annealed penalty `ρ₀`.

use serde::{Deserialize, Serialize};

use crate::admm::{
    admm_fixed_mask, admm_search_mask, precondition, scale_rows, unscale_rows, AdmmState, Schedule,
    ScheduleMode, SparseRegressionProblem, SparsityMask,
};
use crate::baselines::magnitude_prune;
use crate::error::{DsfError, Result};
use crate::numerics::{frobenius_error, matmul, matmul_nt, matmul_tn, DenseMatrix};
use crate::sparse::SparseFactor;

pub const DEFAULT_OUTER: usize = 40;
pub const DEFAULT_INNER: usize = 5;
pub const DEFAULT_RHO0_FLOOR: f64 = 0.01;

/// How the total budget is divided between the square and the other factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SplitPolicy {
    /// About a third of the nonzeros go to the square factor.
    ThirdSplit,
    /// The square factor gets density `α` of its `n²` entries.
    FixedDensity(f64),
    /// Density `max(0.16, s/2)` for the square factor, `s` being the sparsity.
    ObcRule(f64),
}

impl std::fmt::Display for SplitPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitPolicy::ThirdSplit => write!(f, "third"),
            SplitPolicy::FixedDensity(a) => write!(f, "density:{a}"),
            SplitPolicy::ObcRule(s) => write!(f, "obc:{s}"),
        }
    }
}

impl std::str::FromStr for SplitPolicy {
    type Err = DsfError;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| DsfError::pre(format!("bad split parameter {v:?}")))
        };
        match s.split_once(':') {
            None if s == "third" => Ok(SplitPolicy::ThirdSplit),
            Some(("density", v)) => Ok(SplitPolicy::FixedDensity(parse(v)?)),
            Some(("obc", v)) => Ok(SplitPolicy::ObcRule(parse(v)?)),
            _ => Err(DsfError::pre(format!(
                "unknown split {s:?}; expected third, density:<a> or obc:<s>"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSplit {
    pub z_a: usize,
    pub z_b: usize,
    pub policy: Option<SplitPolicy>,
}

impl BudgetSplit {
    /// An explicit split, bypassing any policy.
    pub fn new(z_a: usize, z_b: usize) -> Self {
        BudgetSplit {
            z_a,
            z_b,
            policy: None,
        }
    }

    pub fn total(&self) -> usize {
        self.z_a + self.z_b
    }

    pub fn swapped(&self) -> Self {
        BudgetSplit {
            z_a: self.z_b,
            z_b: self.z_a,
            policy: None,
        }
    }
}

/// Divides `z_total` between the factors. `z_b` absorbs all rounding.
pub fn split_budget(
    rows: usize,
    cols: usize,
    z_total: usize,
    policy: SplitPolicy,
) -> Result<BudgetSplit> {
    let n = rows.min(cols);
    if z_total < n {
        return Err(DsfError::pre(format!(
            "budget {z_total} cannot hold an identity factor of size {n}"
        )));
    }
    let square = (n * n) as f64;
    let z_a = match policy {
        SplitPolicy::ThirdSplit => (z_total as f64 / 3.0).round(),
        SplitPolicy::FixedDensity(alpha) => {
            check_fraction(alpha)?;
            (alpha * square).round()
        }
        SplitPolicy::ObcRule(s) => {
            check_fraction(s)?;
            (0.16f64.max(s / 2.0) * square).round()
        }
    } as usize;
    let z_a = z_a.min(n * n);
    if z_a < n {
        return Err(DsfError::pre(format!(
            "split gives {z_a} nonzeros to the square factor, its identity start needs {n}"
        )));
    }
    if z_a >= z_total {
        return Err(DsfError::pre(format!(
            "split gives {z_a} of {z_total} nonzeros to the square factor, none left"
        )));
    }
    Ok(BudgetSplit {
        z_a,
        z_b: z_total - z_a,
        policy: Some(policy),
    })
}

fn check_fraction(v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(DsfError::pre(format!("split parameter {v} outside (0, 1]")))
    }
}

/// Iteration counts and options for the alternating solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsfConfig {
    pub outer: usize,
    pub inner: usize,
    /// Budget ramp across outer iterations. `Constant` holds the final budgets.
    pub schedule: ScheduleMode,
    /// When false, every first inner step uses `ρ₀ = 1`.
    pub anneal: bool,
    /// Lower bound on the annealed `ρ₀`.
    pub rho0_floor: f64,
    pub seed: u64,
}

impl Default for DsfConfig {
    fn default() -> Self {
        DsfConfig {
            outer: DEFAULT_OUTER,
            inner: DEFAULT_INNER,
            schedule: ScheduleMode::Constant,
            anneal: true,
            rho0_floor: DEFAULT_RHO0_FLOOR,
            seed: 0,
        }
    }
}

impl DsfConfig {
    pub fn new(outer: usize, inner: usize) -> Self {
        DsfConfig {
            outer,
            inner,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho0_floor >= 0.0 && self.rho0_floor <= 1.0) {
            return Err(DsfError::pre(format!(
                "rho0 floor {} outside [0, 1]",
                self.rho0_floor
            )));
        }
        if self.outer == 0 || self.inner == 0 {
            return Err(DsfError::pre(format!(
                "outer ({}) and inner ({}) must be at least 1",
                self.outer, self.inner
            )));
        }
        Ok(())
    }
}

/// Two sparse factors. When `transposed`, the pair represents `(AB)ᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPair {
    pub a: SparseFactor,
    pub b: SparseFactor,
    pub transposed: bool,
}

impl FactorPair {
    pub fn new(a: SparseFactor, b: SparseFactor, transposed: bool) -> Result<Self> {
        if a.cols() != b.rows() {
            return Err(DsfError::shape(format!(
                "factors {:?} and {:?} do not chain",
                a.shape(),
                b.shape()
            )));
        }
        Ok(FactorPair { a, b, transposed })
    }

    pub fn nnz(&self) -> usize {
        self.a.nnz() + self.b.nnz()
    }

    /// Shape of the represented matrix.
    pub fn shape(&self) -> (usize, usize) {
        if self.transposed {
            (self.b.cols(), self.a.rows())
        } else {
            (self.a.rows(), self.b.cols())
        }
    }

    /// The represented matrix `AB` (or `(AB)ᵀ`).
    pub fn product(&self) -> DenseMatrix {
        let ab = self
            .a
            .mul_dense(&self.b.to_dense())
            .expect("validated chain");
        if self.transposed {
            ab.transpose()
        } else {
            ab
        }
    }

    /// `(L, R)` with `L·R` equal to the represented matrix.
    pub fn left_right(&self) -> (SparseFactor, SparseFactor) {
        if self.transposed {
            (self.b.transpose(), self.a.transpose())
        } else {
            (self.a.clone(), self.b.clone())
        }
    }

    /// Inverse of [`FactorPair::left_right`], preserving orientation.
    pub fn from_left_right(
        left: SparseFactor,
        right: SparseFactor,
        transposed: bool,
    ) -> Result<Self> {
        if transposed {
            Self::new(right.transpose(), left.transpose(), true)
        } else {
            Self::new(left, right, false)
        }
    }
}

/// Penalty for the first ADMM step of outer iteration `k` (1-based).
///
/// `min(1, k/(n−3))³`, or 1 when `n ≤ 3`.
pub fn anneal_rho0(k: usize, n_outer: usize) -> f64 {
    if n_outer <= 3 {
        return 1.0;
    }
    let r = (k as f64 / (n_outer - 3) as f64).min(1.0);
    let rho0 = r * r * r;
    if rho0 > 0.0 {
        rho0
    } else {
        f64::MIN_POSITIVE
    }
}

/// Working state of one factor during alternation.
#[derive(Debug, Clone)]
pub struct FactorState {
    pub values: DenseMatrix,
    pub mask: SparsityMask,
    pub admm: AdmmState,
}

impl FactorState {
    fn new(values: DenseMatrix, mask: SparsityMask) -> Self {
        let (r, c) = values.shape();
        let admm = AdmmState {
            z: values.clone(),
            u: DenseMatrix::zeros(r, c),
            rho: crate::admm::RHO,
        };
        FactorState { values, mask, admm }
    }

    fn into_sparse(self, budget: usize) -> Result<SparseFactor> {
        SparseFactor::from_masked(&self.values, &self.mask, budget)
    }
}

/// Identity for `A`, magnitude pruning of `W` for `B`, zero duals.
///
/// `W` must be `n×m` with `n ≤ m`.
pub fn init_factors(
    w: &DenseMatrix,
    split: &BudgetSplit,
) -> Result<(FactorPair, (AdmmState, AdmmState))> {
    let (a, b) = init_states(w, split)?;
    let states = (a.admm.clone(), b.admm.clone());
    let pair = FactorPair::new(a.into_sparse(split.z_a)?, b.into_sparse(split.z_b)?, false)?;
    Ok((pair, states))
}

fn init_states(w: &DenseMatrix, split: &BudgetSplit) -> Result<(FactorState, FactorState)> {
    let (n, m) = w.shape();
    if n > m {
        return Err(DsfError::pre(format!(
            "init_factors expects rows <= cols, got {n}x{m}"
        )));
    }
    if split.z_a < n {
        return Err(DsfError::pre(format!(
            "identity factor needs {n} nonzeros, budget is {}",
            split.z_a
        )));
    }
    let a = FactorState::new(DenseMatrix::identity(n), identity_mask(n));
    let b_sparse = magnitude_prune(w, split.z_b.min(n * m))?;
    let b = FactorState::new(b_sparse.to_dense(), b_sparse.pattern());
    Ok((a, b))
}

fn identity_mask(n: usize) -> SparsityMask {
    let idx: Vec<usize> = (0..n).map(|i| i * n + i).collect();
    SparsityMask::from_indices(n, n, &idx).expect("diagonal indices are distinct")
}

/// Result of a traced run.
#[derive(Debug, Clone)]
pub struct DsfRun {
    pub pair: FactorPair,
    /// `‖A⁽ᵏ⁾B⁽ᵏ⁾ − W‖_F` after each outer iteration.
    pub history: Vec<f64>,
}

/// Runs the alternating factorization and returns the factors.
pub fn dsf_project(w: &DenseMatrix, split: &BudgetSplit, cfg: &DsfConfig) -> Result<FactorPair> {
    Ok(run(w, split, cfg, None, false)?.pair)
}

/// Like [`dsf_project`] but also records the objective after every outer step.
pub fn dsf_project_traced(w: &DenseMatrix, split: &BudgetSplit, cfg: &DsfConfig) -> Result<DsfRun> {
    run(w, split, cfg, None, true)
}

/// Alternation with `A`'s pattern frozen to `a_mask` (given for the `n×n`
/// factor of the possibly transposed problem). `split.z_a` is ignored in
/// favour of the mask's popcount.
pub fn dsf_project_fixed_a(
    w: &DenseMatrix,
    a_mask: &SparsityMask,
    z_b: usize,
    cfg: &DsfConfig,
) -> Result<FactorPair> {
    let split = BudgetSplit::new(a_mask.nnz(), z_b);
    Ok(run(w, &split, cfg, Some(a_mask), false)?.pair)
}

fn run(
    w: &DenseMatrix,
    split: &BudgetSplit,
    cfg: &DsfConfig,
    fixed_a: Option<&SparsityMask>,
    trace: bool,
) -> Result<DsfRun> {
    cfg.validate()?;
    if w.is_empty() {
        return Err(DsfError::pre("cannot factor an empty matrix"));
    }
    let transposed = w.rows() > w.cols();
    let target = if transposed { w.transpose() } else { w.clone() };
    let (n, m) = target.shape();

    let (mut a, mut b) = match fixed_a {
        None => init_states(&target, split)?,
        Some(mask) => {
            if mask.shape() != (n, n) {
                return Err(DsfError::shape(format!(
                    "fixed mask {:?} for square factor of size {n}",
                    mask.shape()
                )));
            }
            let a0 = mask.apply(&DenseMatrix::identity(n));
            let b_sparse = magnitude_prune(&target, split.z_b.min(n * m))?;
            (
                FactorState::new(a0, mask.clone()),
                FactorState::new(b_sparse.to_dense(), b_sparse.pattern()),
            )
        }
    };

    let za_final = split.z_a.min(n * n);
    let zb_final = split.z_b.min(n * m);
    let mut history = Vec::new();

    for k in 1..=cfg.outer {
        let rho0 = if cfg.anneal {
            anneal_rho0(k, cfg.outer).max(cfg.rho0_floor)
        } else {
            1.0
        };
        let za = scheduled_budget(cfg, k, za_final, n * n)?;
        let zb = scheduled_budget(cfg, k, zb_final, n * m)?;

        // B-step: min ‖AB − W‖ over B, Gram AᵀA.
        let prob_b = SparseRegressionProblem::new(
            matmul_tn(&a.values, &a.values)?.symmetrized(),
            matmul_tn(&a.values, &target)?,
            b.values.clone(),
        )?;
        let sched_b = inner_schedule(cfg.inner, zb, n * m);
        let (bz, bmask, bstate) =
            search_preconditioned(&prob_b, zb, cfg.inner, &sched_b, &b.admm, rho0)?;
        b = FactorState {
            values: bz,
            mask: bmask,
            admm: bstate,
        };

        // A-step through ‖BᵀAᵀ − Wᵀ‖: Gram BBᵀ, variable Aᵀ.
        let prob_a = SparseRegressionProblem::new(
            matmul_nt(&b.values, &b.values)?.symmetrized(),
            matmul_nt(&b.values, &target)?,
            a.values.transpose(),
        )?;
        let warm_a = a.admm.transpose();
        a = match fixed_a {
            None => {
                let sched_a = inner_schedule(cfg.inner, za, n * n);
                let (az, amask, astate) =
                    search_preconditioned(&prob_a, za, cfg.inner, &sched_a, &warm_a, rho0)?;
                FactorState {
                    values: az.transpose(),
                    mask: amask.transpose(),
                    admm: astate.transpose(),
                }
            }
            Some(mask) => {
                let mask_t = mask.transpose();
                let (az, astate) =
                    admm_fixed_mask(&prob_a, &mask_t, cfg.inner, Some(&warm_a), rho0)?;
                FactorState {
                    values: az.transpose(),
                    mask: mask.clone(),
                    admm: astate.transpose(),
                }
            }
        };

        debug_assert!(a.mask.nnz() + b.mask.nnz() <= split.z_a.max(a.mask.nnz()) + split.z_b);
        if trace {
            history.push(frobenius_error(&matmul(&a.values, &b.values)?, &target)?);
        }
    }

    let budget_a = if fixed_a.is_some() {
        a.mask.nnz()
    } else {
        split.z_a
    };
    let pair = FactorPair::new(
        a.into_sparse(budget_a)?,
        b.into_sparse(split.z_b)?,
        transposed,
    )?;
    Ok(DsfRun { pair, history })
}

fn search_preconditioned(
    prob: &SparseRegressionProblem,
    z: usize,
    iters: usize,
    sched: &Schedule,
    warm: &AdmmState,
    rho0: f64,
) -> Result<(DenseMatrix, SparsityMask, AdmmState)> {
    let (gp, _, d) = precondition(&prob.g, &prob.w_ref)?;
    let scaled =
        SparseRegressionProblem::new(gp, unscale_rows(&prob.t, &d), scale_rows(&prob.w_ref, &d))?;
    let warm_s = AdmmState {
        z: scale_rows(&warm.z, &d),
        u: scale_rows(&warm.u, &d),
        rho: warm.rho,
    };
    let (z_s, mask, st) = admm_search_mask(&scaled, z, iters, sched, Some(&warm_s), rho0)?;
    let state = AdmmState {
        z: unscale_rows(&st.z, &d),
        u: unscale_rows(&st.u, &d),
        rho: st.rho,
    };
    Ok((unscale_rows(&z_s, &d), mask, state))
}

/// Budget at outer step `k`, ramping from dense under a cubic schedule.
fn scheduled_budget(cfg: &DsfConfig, k: usize, z_final: usize, total: usize) -> Result<usize> {
    if cfg.schedule == ScheduleMode::Constant || z_final == 0 || k >= cfg.outer {
        return Ok(z_final);
    }
    let sched = Schedule::cubic(cfg.outer, z_final as f64 / total as f64);
    let d = sched.density_at(k)?;
    Ok(((d * total as f64).round() as usize).clamp(z_final, total))
}

fn inner_schedule(inner: usize, z: usize, total: usize) -> Schedule {
    let density = if total == 0 {
        1.0
    } else {
        z as f64 / total as f64
    };
    Schedule::constant(inner, density.clamp(f64::MIN_POSITIVE, 1.0))
}
