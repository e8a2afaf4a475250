//! ADMM for L0-constrained least squares.
//!
//! The problem is `min ½‖X(W − W*)‖²` subject to a sparsity constraint on `W`,
//! expressed through the Gram `G = XᵀX` and `T = G·W*`. One iteration is
//!
//! ```text
//! Ŵ ← (G + ρI)⁻¹ (T + ρ(Z − U))
//! Z ← Π(Ŵ + U)
//! U ← U + Ŵ − Z
//! ```
//!
//! where `Π` is either a fixed mask or a top-k projection. The first
//! iteration uses a caller-supplied penalty `rho0`, later ones use 1.

use serde::{Deserialize, Serialize};

use crate::error::{DsfError, Result};
use crate::numerics::{matmul, matmul_tn, DenseMatrix, SpdFactor};

/// Penalty used after the first iteration.
pub const RHO: f64 = 1.0;

/// Floor applied to Gram diagonals before taking square roots.
pub const DIAG_EPS: f64 = 1e-12;

/// Boolean sparsity pattern with a cached popcount.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparsityMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    nnz: usize,
}

impl SparsityMask {
    pub fn empty(rows: usize, cols: usize) -> Self {
        SparsityMask {
            rows,
            cols,
            bits: vec![false; rows * cols],
            nnz: 0,
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        SparsityMask {
            rows,
            cols,
            bits: vec![true; rows * cols],
            nnz: rows * cols,
        }
    }

    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(DsfError::shape(format!(
                "mask of {} bits for {rows}x{cols}",
                bits.len()
            )));
        }
        let nnz = bits.iter().filter(|b| **b).count();
        Ok(SparsityMask {
            rows,
            cols,
            bits,
            nnz,
        })
    }

    /// Mask from row-major linear indices. Duplicates are an error.
    pub fn from_indices(rows: usize, cols: usize, idx: &[usize]) -> Result<Self> {
        let mut bits = vec![false; rows * cols];
        for &i in idx {
            if i >= bits.len() || bits[i] {
                return Err(DsfError::pre(format!("bad or repeated mask index {i}")));
            }
            bits[i] = true;
        }
        Ok(SparsityMask {
            rows,
            cols,
            bits,
            nnz: idx.len(),
        })
    }

    /// Pattern of the nonzero entries of `m`.
    pub fn support_of(m: &DenseMatrix) -> Self {
        let bits: Vec<bool> = m.as_slice().iter().map(|v| *v != 0.0).collect();
        let nnz = bits.iter().filter(|b| **b).count();
        SparsityMask {
            rows: m.rows(),
            cols: m.cols(),
            bits,
            nnz,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn transpose(&self) -> Self {
        let mut bits = vec![false; self.bits.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                bits[j * self.rows + i] = self.bits[i * self.cols + j];
            }
        }
        SparsityMask {
            rows: self.cols,
            cols: self.rows,
            bits,
            nnz: self.nnz,
        }
    }

    /// `M ⊙ m`.
    pub fn apply(&self, m: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.shape(), m.shape());
        let data = m
            .as_slice()
            .iter()
            .zip(&self.bits)
            .map(|(&v, &b)| if b { v } else { 0.0 })
            .collect();
        DenseMatrix::from_vec(m.rows(), m.cols(), data).expect("finite input")
    }

    /// Row indices kept in column `j`.
    pub fn column_support(&self, j: usize) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.get(i, j)).collect()
    }

    /// True when every nonzero of `m` lies inside the mask.
    pub fn covers(&self, m: &DenseMatrix) -> bool {
        m.shape() == self.shape()
            && m.as_slice()
                .iter()
                .zip(&self.bits)
                .all(|(&v, &b)| b || v == 0.0)
    }
}

impl std::fmt::Debug for SparsityMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "SparsityMask {}x{} nnz={}",
            self.rows, self.cols, self.nnz
        )
    }
}

/// Auxiliary iterate `Z`, scaled duals `U`, and the penalty of the last step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub z: DenseMatrix,
    pub u: DenseMatrix,
    pub rho: f64,
}

impl AdmmState {
    pub fn cold(rows: usize, cols: usize) -> Self {
        AdmmState {
            z: DenseMatrix::zeros(rows, cols),
            u: DenseMatrix::zeros(rows, cols),
            rho: RHO,
        }
    }

    pub fn transpose(&self) -> Self {
        AdmmState {
            z: self.z.transpose(),
            u: self.u.transpose(),
            rho: self.rho,
        }
    }
}

/// Quadratic sparse-regression instance in Gram form.
#[derive(Debug, Clone)]
pub struct SparseRegressionProblem {
    /// `n×n` Gram of the design matrix.
    pub g: DenseMatrix,
    /// `n×m` right-hand side `G·W*`.
    pub t: DenseMatrix,
    /// `n×m` reference weights, used for cold-start scoring and diagnostics.
    pub w_ref: DenseMatrix,
}

impl SparseRegressionProblem {
    pub fn new(g: DenseMatrix, t: DenseMatrix, w_ref: DenseMatrix) -> Result<Self> {
        if !g.is_square() {
            return Err(DsfError::shape(format!("gram {:?} not square", g.shape())));
        }
        if t.rows() != g.rows() || t.shape() != w_ref.shape() {
            return Err(DsfError::shape(format!(
                "gram {:?}, target {:?}, reference {:?}",
                g.shape(),
                t.shape(),
                w_ref.shape()
            )));
        }
        let asym = crate::numerics::frobenius_error(&g, &g.transpose())?;
        if asym > 1e-8 * g.frobenius_norm() {
            return Err(DsfError::pre("gram is not symmetric"));
        }
        Ok(SparseRegressionProblem { g, t, w_ref })
    }

    /// Builds the problem for target `w` under Gram `g`, so `T = G·W`.
    pub fn from_gram(g: DenseMatrix, w: DenseMatrix) -> Result<Self> {
        let t = matmul(&g, &w)?;
        Self::new(g, t, w)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.t.shape()
    }

    /// `tr(WᵀGW) − 2·tr(WᵀT)`, the objective up to the constant `tr(W*ᵀGW*)`.
    pub fn reduced_objective(&self, w: &DenseMatrix) -> Result<f64> {
        let gw = matmul(&self.g, w)?;
        let mut acc = 0.0;
        for ((&wi, &gwi), &ti) in w
            .as_slice()
            .iter()
            .zip(gw.as_slice())
            .zip(self.t.as_slice())
        {
            acc += wi * gwi - 2.0 * wi * ti;
        }
        Ok(acc)
    }

    /// Largest per-column residual of the normal equations restricted to the
    /// column's support: `‖G[S,S]·W[S,j] − T[S,j]‖₂`.
    pub fn masked_normal_residual(&self, w: &DenseMatrix, mask: &SparsityMask) -> Result<f64> {
        let gw = matmul(&self.g, w)?;
        let mut worst: f64 = 0.0;
        for j in 0..w.cols() {
            let mut acc = 0.0;
            for i in mask.column_support(j) {
                // Off-support entries of W are zero, so (G·W)[i,j] = (G[S,S]·W[S,j])[i].
                let r = gw.get(i, j) - self.t.get(i, j);
                acc += r * r;
            }
            worst = worst.max(acc.sqrt());
        }
        Ok(worst)
    }
}

/// `tr(ΔᵀGΔ)`, i.e. `‖XΔ‖²`, clamped at zero.
pub fn weighted_sq_error(g: &DenseMatrix, delta: &DenseMatrix) -> Result<f64> {
    let gd = matmul(g, delta)?;
    let v: f64 = delta
        .as_slice()
        .iter()
        .zip(gd.as_slice())
        .map(|(a, b)| a * b)
        .sum();
    Ok(v.max(0.0))
}

/// Diagonal rescaling that gives the Gram a unit diagonal.
///
/// Returns `(D⁻¹GD⁻¹, D·W, d)` with `d_i = √max(G_ii, ε)`.
pub fn precondition(
    g: &DenseMatrix,
    w: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix, Vec<f64>)> {
    if !g.is_square() || g.rows() != w.rows() {
        return Err(DsfError::shape(format!(
            "precondition gram {:?} with weights {:?}",
            g.shape(),
            w.shape()
        )));
    }
    let d: Vec<f64> = g.diag().iter().map(|&x| x.max(DIAG_EPS).sqrt()).collect();
    let gp = DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| g.get(i, j) / d[i] / d[j]);
    let wp = scale_rows(w, &d);
    Ok((gp, wp, d))
}

/// Multiplies row `i` of `m` by `d[i]`.
pub fn scale_rows(m: &DenseMatrix, d: &[f64]) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) * d[i])
}

/// Divides row `i` of `m` by `d[i]`.
pub fn unscale_rows(m: &DenseMatrix, d: &[f64]) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) / d[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Constant,
    Cubic,
}

/// Density ramp for gradual pruning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    pub total_steps: usize,
    pub final_density: f64,
}

impl Schedule {
    pub fn constant(total_steps: usize, final_density: f64) -> Self {
        Schedule {
            mode: ScheduleMode::Constant,
            total_steps,
            final_density,
        }
    }

    pub fn cubic(total_steps: usize, final_density: f64) -> Self {
        Schedule {
            mode: ScheduleMode::Cubic,
            total_steps,
            final_density,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(DsfError::pre("schedule needs at least one step"));
        }
        if !(self.final_density > 0.0 && self.final_density <= 1.0) {
            return Err(DsfError::pre(format!(
                "final density {} outside (0, 1]",
                self.final_density
            )));
        }
        Ok(())
    }

    pub fn density_at(&self, t: usize) -> Result<f64> {
        cubic_density(t, self)
    }
}

/// Kept fraction at step `t`.
///
/// Cubic mode prunes `s_f·(1 − (1 − t/T)³)` of the entries, with
/// `s_f = 1 − final_density`.
pub fn cubic_density(t: usize, sched: &Schedule) -> Result<f64> {
    sched.validate()?;
    if t > sched.total_steps {
        return Err(DsfError::pre(format!(
            "step {t} beyond schedule length {}",
            sched.total_steps
        )));
    }
    if t == sched.total_steps {
        return Ok(sched.final_density);
    }
    match sched.mode {
        ScheduleMode::Constant => Ok(if t == 0 { 1.0 } else { sched.final_density }),
        ScheduleMode::Cubic => {
            let s_f = 1.0 - sched.final_density;
            let frac = 1.0 - t as f64 / sched.total_steps as f64;
            Ok(1.0 - s_f * (1.0 - frac * frac * frac))
        }
    }
}

/// Keeps the `z` largest scores; ties go to the smaller row-major index.
pub fn topk_mask(scores: &DenseMatrix, z: usize) -> Result<SparsityMask> {
    let (rows, cols) = scores.shape();
    let bits = topk_bits(scores.as_slice(), z)?;
    Ok(SparsityMask {
        rows,
        cols,
        bits,
        nnz: z,
    })
}

fn topk_bits(scores: &[f64], z: usize) -> Result<Vec<bool>> {
    let total = scores.len();
    if z > total {
        return Err(DsfError::pre(format!("top-{z} of {total} entries")));
    }
    let mut bits = vec![false; total];
    if z == total {
        bits.iter_mut().for_each(|b| *b = true);
        return Ok(bits);
    }
    if z == 0 {
        return Ok(bits);
    }
    let mut idx: Vec<usize> = (0..total).collect();
    let order = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    idx.select_nth_unstable_by(z - 1, order);
    for &i in &idx[..z] {
        bits[i] = true;
    }
    Ok(bits)
}

/// Caches the Cholesky factors for the two penalties in play.
struct PenaltySolver<'a> {
    g: &'a DenseMatrix,
    rho0: f64,
    first: Option<SpdFactor>,
    rest: Option<SpdFactor>,
}

impl<'a> PenaltySolver<'a> {
    fn new(g: &'a DenseMatrix, rho0: f64) -> Self {
        PenaltySolver {
            g,
            rho0,
            first: None,
            rest: None,
        }
    }

    fn factor(&mut self, iteration: usize) -> Result<&SpdFactor> {
        let use_first = iteration == 0 && self.rho0 != RHO;
        let (slot, rho) = if use_first {
            (&mut self.first, self.rho0)
        } else {
            (&mut self.rest, RHO)
        };
        if slot.is_none() {
            *slot = Some(SpdFactor::new(self.g, rho)?);
        }
        Ok(slot.as_ref().expect("just filled"))
    }

    fn rho(&self, iteration: usize) -> f64 {
        if iteration == 0 {
            self.rho0
        } else {
            RHO
        }
    }
}

fn check_common(
    prob: &SparseRegressionProblem,
    iters: usize,
    warm: Option<&AdmmState>,
    rho0: f64,
) -> Result<()> {
    if iters == 0 {
        return Err(DsfError::pre("ADMM needs at least one iteration"));
    }
    if !(rho0 > 0.0 && rho0 <= 1.0) {
        return Err(DsfError::pre(format!("rho0 {rho0} outside (0, 1]")));
    }
    if let Some(w) = warm {
        if w.z.shape() != prob.shape() || w.u.shape() != prob.shape() {
            return Err(DsfError::shape(format!(
                "warm state {:?}/{:?} for problem {:?}",
                w.z.shape(),
                w.u.shape(),
                prob.shape()
            )));
        }
    }
    Ok(())
}

/// `Ŵ = (G + ρI)⁻¹ (T + ρ(Z − U))` with the penalty for this iteration.
fn primal_step(
    solver: &mut PenaltySolver<'_>,
    prob: &SparseRegressionProblem,
    state: &AdmmState,
    iteration: usize,
) -> Result<DenseMatrix> {
    let rho = solver.rho(iteration);
    let mut rhs = prob.t.clone();
    for ((r, &z), &u) in rhs
        .as_mut_slice()
        .iter_mut()
        .zip(state.z.as_slice())
        .zip(state.u.as_slice())
    {
        *r += rho * (z - u);
    }
    solver.factor(iteration)?.solve(&rhs)
}

/// `Z ← keep ⊙ (Ŵ + U)`, `U ← U + Ŵ − Z`.
fn dual_update(state: &mut AdmmState, w_hat: &DenseMatrix, keep: &[bool]) {
    let z = state.z.as_mut_slice();
    let u = state.u.as_mut_slice();
    for i in 0..z.len() {
        let v = w_hat.as_slice()[i] + u[i];
        z[i] = if keep[i] { v } else { 0.0 };
        u[i] = v - z[i];
    }
}

/// Masked ADMM with the sparsity pattern held fixed.
///
/// Returns the final `Z`, whose support lies inside `mask`, and the state for
/// warm-starting a later call.
pub fn admm_fixed_mask(
    prob: &SparseRegressionProblem,
    mask: &SparsityMask,
    iters: usize,
    warm: Option<&AdmmState>,
    rho0: f64,
) -> Result<(DenseMatrix, AdmmState)> {
    check_common(prob, iters, warm, rho0)?;
    if mask.shape() != prob.shape() {
        return Err(DsfError::shape(format!(
            "mask {:?} for problem {:?}",
            mask.shape(),
            prob.shape()
        )));
    }
    let (n, m) = prob.shape();
    let mut state = warm.cloned().unwrap_or_else(|| AdmmState::cold(n, m));
    if mask.nnz() == 0 {
        state.z = DenseMatrix::zeros(n, m);
        state.rho = RHO;
        return Ok((state.z.clone(), state));
    }
    let mut solver = PenaltySolver::new(&prob.g, rho0);
    for it in 0..iters {
        let w_hat = primal_step(&mut solver, prob, &state, it)?;
        dual_update(&mut state, &w_hat, mask.bits());
    }
    state.rho = RHO;
    Ok((state.z.clone(), state))
}

/// Target nonzero count at iteration `t` (1-based) of a mask search.
fn scheduled_count(
    t: usize,
    iters: usize,
    z: usize,
    total: usize,
    sched: &Schedule,
) -> Result<usize> {
    if t >= iters {
        return Ok(z);
    }
    let step = t.min(sched.total_steps);
    let density = cubic_density(step, sched)?;
    // f64::round is half-away-from-zero.
    let count = (density * total as f64).round() as usize;
    Ok(count.clamp(z, total))
}

/// ADMM whose Z-step projects onto the top entries of `|Ŵ + U|`.
///
/// The kept count follows `sched` (indexed by ADMM iteration) and never drops
/// below `z`; the last iteration keeps exactly `z`.
pub fn admm_search_mask(
    prob: &SparseRegressionProblem,
    z: usize,
    iters: usize,
    sched: &Schedule,
    warm: Option<&AdmmState>,
    rho0: f64,
) -> Result<(DenseMatrix, SparsityMask, AdmmState)> {
    check_common(prob, iters, warm, rho0)?;
    sched.validate()?;
    let (n, m) = prob.shape();
    let total = n * m;
    if z > total {
        return Err(DsfError::pre(format!("budget {z} exceeds {total} entries")));
    }
    let mut state = warm.cloned().unwrap_or_else(|| AdmmState::cold(n, m));
    if z == 0 {
        state.z = DenseMatrix::zeros(n, m);
        state.rho = RHO;
        return Ok((state.z.clone(), SparsityMask::empty(n, m), state));
    }
    let mut solver = PenaltySolver::new(&prob.g, rho0);
    let mut keep = vec![true; total];
    let mut scores = vec![0.0; total];
    for it in 0..iters {
        let w_hat = primal_step(&mut solver, prob, &state, it)?;
        for ((s, &w), &u) in scores
            .iter_mut()
            .zip(w_hat.as_slice())
            .zip(state.u.as_slice())
        {
            *s = (w + u).abs();
        }
        let count = scheduled_count(it + 1, iters, z, total, sched)?;
        keep = topk_bits(&scores, count)?;
        dual_update(&mut state, &w_hat, &keep);
    }
    state.rho = RHO;
    let mask = SparsityMask {
        rows: n,
        cols: m,
        bits: keep,
        nnz: z,
    };
    Ok((state.z.clone(), mask, state))
}

/// Convenience: solves the masked problem for design matrix `x` directly.
pub fn problem_from_design(x: &DenseMatrix, w: &DenseMatrix) -> Result<SparseRegressionProblem> {
    let g = crate::numerics::gram(x)?;
    let t = matmul_tn(x, &matmul(x, w)?)?;
    SparseRegressionProblem::new(g, t, w.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{frobenius_error, gram};
    use crate::rng::DetRng;

    fn random_problem(rng: &mut DetRng, n: usize, m: usize) -> SparseRegressionProblem {
        let x = rng.gaussian_matrix(4 * n, n);
        let g = gram(&x).unwrap();
        let w = rng.gaussian_matrix(n, m);
        let (gp, wp, _) = precondition(&g, &w).unwrap();
        SparseRegressionProblem::from_gram(gp, wp).unwrap()
    }

    #[test]
    fn precondition_cases() {
        let mut rng = DetRng::new(2);
        let w = rng.gaussian_matrix(3, 2);
        let (gp, wp, d) = precondition(&DenseMatrix::identity(3), &w).unwrap();
        assert_eq!(gp, DenseMatrix::identity(3));
        assert_eq!(wp, w);
        assert_eq!(d, vec![1.0; 3]);

        let g = DenseMatrix::from_diag(&[4.0, 9.0]);
        let (gp, wp, d) = precondition(&g, &DenseMatrix::from_rows(&[[1.0], [1.0]])).unwrap();
        assert_eq!(d, vec![2.0, 3.0]);
        assert_eq!(gp, DenseMatrix::identity(2));
        assert_eq!(wp, DenseMatrix::from_rows(&[[2.0], [3.0]]));

        let x = rng.gaussian_matrix(12, 5);
        let g = gram(&x).unwrap();
        let (gp, _, _) = precondition(&g, &DenseMatrix::zeros(5, 1)).unwrap();
        assert!(gp.diag().iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn precondition_floors_dead_features() {
        let g = DenseMatrix::from_diag(&[0.0, 4.0]);
        let (gp, _, d) = precondition(&g, &DenseMatrix::zeros(2, 1)).unwrap();
        assert_eq!(d[0], DIAG_EPS.sqrt());
        assert_eq!(gp.get(0, 0), 0.0);
        assert_eq!(gp.get(1, 1), 1.0);
    }

    #[test]
    fn cubic_density_points() {
        let s = Schedule::cubic(10, 0.2);
        assert_eq!(cubic_density(0, &s).unwrap(), 1.0);
        assert_eq!(cubic_density(10, &s).unwrap(), 0.2);
        let mid = cubic_density(5, &s).unwrap();
        assert!((mid - 0.3).abs() < 1e-15, "{mid}");
        assert!(cubic_density(11, &s).is_err());
        let c = Schedule::constant(4, 0.5);
        assert_eq!(cubic_density(1, &c).unwrap(), 0.5);
        assert!(Schedule::cubic(0, 0.5).density_at(0).is_err());
        assert!(Schedule::cubic(3, 0.0).density_at(0).is_err());
    }

    #[test]
    fn topk_hand_cases() {
        let s = DenseMatrix::from_rows(&[[3.0, 1.0], [2.0, 0.0]]);
        let m = topk_mask(&s, 2).unwrap();
        assert!(m.get(0, 0) && m.get(1, 0) && !m.get(0, 1) && !m.get(1, 1));
        assert_eq!(topk_mask(&s, 4).unwrap(), SparsityMask::full(2, 2));
        assert_eq!(topk_mask(&s, 0).unwrap().nnz(), 0);
        assert!(topk_mask(&s, 5).is_err());
        let ties = DenseMatrix::from_rows(&[[1.0, 1.0, 1.0]]);
        let m = topk_mask(&ties, 2).unwrap();
        assert_eq!(m.bits(), &[true, true, false]);
    }

    #[test]
    fn topk_matches_full_sort() {
        let mut rng = DetRng::new(20);
        let s = rng.gaussian_matrix(20, 20);
        let m = topk_mask(&s, 57).unwrap();
        let mut idx: Vec<usize> = (0..400).collect();
        idx.sort_by(|&a, &b| {
            s.as_slice()[b]
                .partial_cmp(&s.as_slice()[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let oracle = SparsityMask::from_indices(20, 20, &idx[..57]).unwrap();
        assert_eq!(m, oracle);
        assert_eq!(m.nnz(), 57);
    }

    #[test]
    fn fixed_mask_unconstrained_recovers_target() {
        let mut rng = DetRng::new(3);
        let w = rng.gaussian_matrix(5, 3);
        let prob = SparseRegressionProblem::from_gram(DenseMatrix::identity(5), w.clone()).unwrap();
        let (wp, _) = admm_fixed_mask(&prob, &SparsityMask::full(5, 3), 30, None, 1.0).unwrap();
        assert!(frobenius_error(&wp, &w).unwrap() <= 1e-6 * w.frobenius_norm());
    }

    #[test]
    fn fixed_mask_empty_gives_zero() {
        let mut rng = DetRng::new(4);
        let prob = random_problem(&mut rng, 4, 3);
        let (wp, st) = admm_fixed_mask(&prob, &SparsityMask::empty(4, 3), 10, None, 1.0).unwrap();
        assert_eq!(wp, DenseMatrix::zeros(4, 3));
        assert_eq!(st.z, wp);
    }

    #[test]
    fn fixed_mask_solves_masked_normal_equations() {
        let mut rng = DetRng::new(5);
        let prob = random_problem(&mut rng, 8, 4);
        let bits: Vec<bool> = (0..32).map(|_| rng.uniform() < 0.5).collect();
        let mask = SparsityMask::from_bits(8, 4, bits).unwrap();
        let (wp, _) = admm_fixed_mask(&prob, &mask, 500, None, 1.0).unwrap();
        assert!(mask.covers(&wp));
        let r = prob.masked_normal_residual(&wp, &mask).unwrap();
        assert!(r <= 1e-5, "residual {r:e}");
    }

    #[test]
    fn search_extremes() {
        let mut rng = DetRng::new(6);
        let prob = random_problem(&mut rng, 4, 3);
        let sched = Schedule::constant(50, 1.0);
        let (wp, mask, _) = admm_search_mask(&prob, 12, 50, &sched, None, 1.0).unwrap();
        assert_eq!(mask.nnz(), 12);
        assert!(frobenius_error(&wp, &prob.w_ref).unwrap() <= 1e-6 * prob.w_ref.frobenius_norm());

        let (wp, mask, _) = admm_search_mask(&prob, 0, 5, &sched, None, 1.0).unwrap();
        assert_eq!(mask.nnz(), 0);
        assert_eq!(wp, DenseMatrix::zeros(4, 3));
    }

    #[test]
    fn search_with_cubic_schedule_hits_budget() {
        let mut rng = DetRng::new(8);
        let prob = random_problem(&mut rng, 6, 5);
        let sched = Schedule::cubic(40, 0.3);
        let (wp, mask, _) = admm_search_mask(&prob, 9, 40, &sched, None, 1.0).unwrap();
        assert_eq!(mask.nnz(), 9);
        assert!(wp.count_nonzero() <= 9);
        assert!(mask.covers(&wp));
    }

    #[test]
    fn argument_validation() {
        let mut rng = DetRng::new(9);
        let prob = random_problem(&mut rng, 3, 2);
        let mask = SparsityMask::full(3, 2);
        assert!(admm_fixed_mask(&prob, &mask, 0, None, 1.0).is_err());
        assert!(admm_fixed_mask(&prob, &mask, 3, None, 0.0).is_err());
        assert!(admm_fixed_mask(&prob, &mask, 3, None, 1.5).is_err());
        assert!(admm_fixed_mask(&prob, &SparsityMask::full(2, 2), 3, None, 1.0).is_err());
        let sched = Schedule::constant(3, 0.5);
        assert!(admm_search_mask(&prob, 7, 3, &sched, None, 1.0).is_err());
    }
}
