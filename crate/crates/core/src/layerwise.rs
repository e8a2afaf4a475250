//! Layer-wise pruning with calibration statistics.
//!
//! A layer computes `XW`; the objective is `‖XW − XLR‖²` where `L·R` is the
//! represented factor product (see [`FactorPair::left_right`]). Everything is
//! evaluated through `G = XᵀX`, so raw calibration inputs are never stored.
//!
//! The pipeline projects the (optionally Wanda-scaled) weights with DSF,
//! scales the left factor back, then optionally re-solves the right factor
//! against the layer objective with all masks frozen, and optionally runs the
//! Sylvester-equation ADMM on the left factor.

use crate::admm::{
    admm_fixed_mask, precondition, scale_rows, unscale_rows, weighted_sq_error, AdmmState,
    SparseRegressionProblem, SparsityMask, DIAG_EPS,
};
use crate::dsf::{
    dsf_project, dsf_project_fixed_a, split_budget, DsfConfig, FactorPair, SplitPolicy,
};
use crate::error::{DsfError, Result};
use crate::numerics::{
    gram, matmul, matmul_nt, matmul_tn, sym_eigen, DenseMatrix, EigenDecomposition,
};
use crate::rng::DetRng;
use crate::sparse::SparseFactor;

pub const DEFAULT_FINALIZE_ITERS: usize = 30;
pub const DEFAULT_OPTIMIZE_A_ITERS: usize = 30;

/// Sufficient statistics of the calibration inputs of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCalibration {
    pub g: DenseMatrix,
    /// `√G_ii`.
    pub feature_norms: Vec<f64>,
    pub nsamples: usize,
}

impl LayerCalibration {
    /// Wraps a precomputed Gram. It is symmetrized; asymmetry beyond
    /// `1e-8·‖G‖_F` or a negative diagonal is rejected.
    pub fn from_gram(g: DenseMatrix, nsamples: usize) -> Result<Self> {
        if !g.is_square() || g.is_empty() {
            return Err(DsfError::shape(format!(
                "gram {:?} must be square and non-empty",
                g.shape()
            )));
        }
        let asym = crate::numerics::frobenius_error(&g, &g.transpose())?;
        if asym > 1e-8 * g.frobenius_norm() {
            return Err(DsfError::pre("gram is not symmetric"));
        }
        let g = g.symmetrized();
        let scale = g.diag().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if g.diag().iter().any(|&v| v < -1e-8 * scale.max(1.0)) {
            return Err(DsfError::pre("gram has a negative diagonal entry"));
        }
        let feature_norms = g.diag().iter().map(|&v| v.max(0.0).sqrt()).collect();
        Ok(LayerCalibration {
            g,
            feature_norms,
            nsamples,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.rows()
    }
}

/// `G = Σ XᵦᵀXᵦ`, accumulated in batch order.
pub fn accumulate_gram(batches: &[DenseMatrix]) -> Result<LayerCalibration> {
    let first = batches
        .first()
        .ok_or_else(|| DsfError::pre("no calibration batches"))?;
    let n = first.cols();
    let mut g = DenseMatrix::zeros(n, n);
    let mut nsamples = 0;
    for (i, x) in batches.iter().enumerate() {
        if x.cols() != n {
            return Err(DsfError::shape(format!(
                "batch {i} has {} columns, expected {n}",
                x.cols()
            )));
        }
        if x.rows() == 0 {
            continue;
        }
        g = g.add(&gram(x)?)?;
        nsamples += x.rows();
    }
    if nsamples == 0 {
        return Err(DsfError::pre("calibration batches hold no rows"));
    }
    LayerCalibration::from_gram(g, nsamples)
}

fn check_layer(calib: &LayerCalibration, w: &DenseMatrix) -> Result<()> {
    if w.rows() != calib.dim() {
        return Err(DsfError::shape(format!(
            "weights {:?} for {} input features",
            w.shape(),
            calib.dim()
        )));
    }
    Ok(())
}

/// `tr(ΔᵀGΔ)` with `Δ = W − LR`, i.e. `‖XW − XLR‖²`.
pub fn layer_error(calib: &LayerCalibration, w: &DenseMatrix, pair: &FactorPair) -> Result<f64> {
    check_layer(calib, w)?;
    if pair.shape() != w.shape() {
        return Err(DsfError::shape(format!(
            "factors represent {:?}, weights are {:?}",
            pair.shape(),
            w.shape()
        )));
    }
    weighted_sq_error(&calib.g, &w.sub(&pair.product())?)
}

/// Multiplies row `i` of `W` by `max(d_i, ε)`. Returns the floored norms.
pub fn wanda_scale(w: &DenseMatrix, d: &[f64]) -> Result<(DenseMatrix, Vec<f64>)> {
    if d.len() != w.rows() {
        return Err(DsfError::shape(format!(
            "{} norms for {} rows",
            d.len(),
            w.rows()
        )));
    }
    let d: Vec<f64> = d.iter().map(|&v| v.max(DIAG_EPS)).collect();
    Ok((scale_rows(w, &d), d))
}

/// Undoes [`wanda_scale`] on a factorization of the scaled weights by
/// dividing the rows of the left factor by `d`.
pub fn wanda_unscale(pair: &FactorPair, d: &[f64]) -> Result<FactorPair> {
    let (left, right) = pair.left_right();
    if d.len() != left.rows() {
        return Err(DsfError::shape(format!(
            "{} norms for {} rows",
            d.len(),
            left.rows()
        )));
    }
    let left = left.map_values(|i, _, v| v / d[i]);
    FactorPair::from_left_right(left, right, pair.transposed)
}

/// Re-solves the right factor against the layer objective, pattern fixed.
///
/// Reduces `min ‖XW − XLR‖²` over `R` to a masked regression with Gram
/// `LᵀGL` and target `LᵀGW`, warm-started from the current `R`.
pub fn finalize_b(
    calib: &LayerCalibration,
    w: &DenseMatrix,
    pair: &FactorPair,
    iters: usize,
) -> Result<FactorPair> {
    check_layer(calib, w)?;
    let (left, right) = pair.left_right();
    let mask = right.pattern();
    let l = left.to_dense();
    let gl = matmul(&calib.g, &l)?;
    let gram_l = matmul_tn(&l, &gl)?.symmetrized();
    let target = matmul_tn(&gl, w)?;
    let r0 = right.to_dense();

    let (gp, r0p, d) = precondition(&gram_l, &r0)?;
    let prob = SparseRegressionProblem::new(gp, unscale_rows(&target, &d), r0p.clone())?;
    let warm = AdmmState {
        z: r0p,
        u: DenseMatrix::zeros(r0.rows(), r0.cols()),
        rho: crate::admm::RHO,
    };
    let (rp, _) = admm_fixed_mask(&prob, &mask, iters, Some(&warm), 1.0)?;
    let r = SparseFactor::from_masked(&unscale_rows(&rp, &d), &mask, right.budget())?;
    FactorPair::from_left_right(left, r, pair.transposed)
}

/// Solves `G·A·BBᵀ + ρA = RHS` given `G = QDQᵀ` and `BBᵀ = RERᵀ`:
/// `A = Q((Qᵀ·RHS·R) ⊘ (d⊗e + ρ))Rᵀ`.
pub fn sylvester_solve(
    geig: &EigenDecomposition,
    bbt_eig: &EigenDecomposition,
    rhs: &DenseMatrix,
    rho: f64,
) -> Result<DenseMatrix> {
    let (n, k) = (geig.dim(), bbt_eig.dim());
    if rhs.shape() != (n, k) {
        return Err(DsfError::shape(format!(
            "rhs {:?} for eigensystems of size {n} and {k}",
            rhs.shape()
        )));
    }
    if !(rho > 0.0) {
        return Err(DsfError::pre(format!("rho must be positive, got {rho}")));
    }
    let inner = matmul(&matmul_tn(&geig.q, rhs)?, &bbt_eig.q)?;
    let mut y = inner;
    for i in 0..n {
        for j in 0..k {
            let denom = geig.eigvals[i] * bbt_eig.eigvals[j] + rho;
            if !(denom > 0.0) {
                return Err(DsfError::Numerical {
                    what: "sylvester denominator",
                    residual: denom,
                });
            }
            y.set(i, j, y.get(i, j) / denom);
        }
    }
    matmul_nt(&matmul(&geig.q, &y)?, &bbt_eig.q)
}

/// Masked ADMM on the left factor with the right factor fixed.
///
/// Both sides are diagonally rescaled so `G` and `RRᵀ` have unit diagonals;
/// `rho` is the penalty in those coordinates.
pub fn optimize_a(
    calib: &LayerCalibration,
    w: &DenseMatrix,
    pair: &FactorPair,
    iters: usize,
    rho: f64,
) -> Result<FactorPair> {
    check_layer(calib, w)?;
    if iters == 0 {
        return Err(DsfError::pre("optimize_a needs at least one iteration"));
    }
    let (left, right) = pair.left_right();
    let mask = left.pattern();
    let r = right.to_dense();

    let (gp, wp, d) = precondition(&calib.g, w)?;
    let rrt = matmul_nt(&r, &r)?.symmetrized();
    let e: Vec<f64> = rrt.diag().iter().map(|&v| v.max(DIAG_EPS).sqrt()).collect();
    let rp = unscale_rows(&r, &e);
    let rrtp = matmul_nt(&rp, &rp)?.symmetrized();

    let geig = sym_eigen(&gp)?;
    let reig = sym_eigen(&rrtp)?;
    let fixed_rhs = matmul_nt(&matmul(&gp, &wp)?, &rp)?;

    // L = D⁻¹·L'·E⁻¹.
    let l0 = left.to_dense();
    let mut z = DenseMatrix::from_fn(l0.rows(), l0.cols(), |i, j| l0.get(i, j) * d[i] * e[j]);
    let mut u = DenseMatrix::zeros(z.rows(), z.cols());
    for _ in 0..iters {
        let rhs = fixed_rhs.add(&z.sub(&u)?.scaled(rho))?;
        let a_hat = sylvester_solve(&geig, &reig, &rhs, rho)?;
        let v = a_hat.add(&u)?;
        z = mask.apply(&v);
        u = v.sub(&z)?;
    }
    let l = DenseMatrix::from_fn(z.rows(), z.cols(), |i, j| z.get(i, j) / d[i] / e[j]);
    let left = SparseFactor::from_masked(&l, &mask, left.budget())?;
    FactorPair::from_left_right(left, right, pair.transposed)
}

/// A uniformly random `z_a`-subset of the `n×n` positions.
pub fn random_shared_mask(seed: u64, n: usize, z_a: usize) -> Result<SparsityMask> {
    if z_a > n * n {
        return Err(DsfError::pre(format!(
            "{z_a} positions requested of {}",
            n * n
        )));
    }
    let idx = DetRng::new(seed).sample_indices(n * n, z_a);
    SparsityMask::from_indices(n, n, &idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOptions {
    pub wanda: bool,
    pub finalize: bool,
    pub finalize_iters: usize,
    pub optimize_a: bool,
    pub optimize_a_iters: usize,
    pub optimize_a_rho: f64,
    /// Frozen pattern for the square factor (`min(n,m)` on a side).
    pub fixed_a_mask: Option<SparsityMask>,
}

impl Default for PruneOptions {
    fn default() -> Self {
        PruneOptions {
            wanda: true,
            finalize: true,
            finalize_iters: DEFAULT_FINALIZE_ITERS,
            optimize_a: false,
            optimize_a_iters: DEFAULT_OPTIMIZE_A_ITERS,
            optimize_a_rho: 1.0,
            fixed_a_mask: None,
        }
    }
}

impl PruneOptions {
    /// Pure projection: no scaling, no finalization.
    pub fn projection_only() -> Self {
        PruneOptions {
            wanda: false,
            finalize: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrunedLayer {
    pub pair: FactorPair,
    pub layer_error: f64,
}

/// Compresses one layer's weights to `z_total` nonzeros.
pub fn prune_layer(
    w: &DenseMatrix,
    calib: &LayerCalibration,
    z_total: usize,
    policy: SplitPolicy,
    cfg: &DsfConfig,
    opts: &PruneOptions,
) -> Result<PrunedLayer> {
    check_layer(calib, w)?;
    let (n, m) = w.shape();
    let (target, d) = if opts.wanda {
        let (ws, d) = wanda_scale(w, &calib.feature_norms)?;
        (ws, Some(d))
    } else {
        (w.clone(), None)
    };

    let pair = match &opts.fixed_a_mask {
        None => {
            let split = split_budget(n, m, z_total, policy)?;
            dsf_project(&target, &split, cfg)?
        }
        Some(mask) => {
            if mask.nnz() >= z_total {
                return Err(DsfError::pre(format!(
                    "fixed mask holds {} of {z_total} nonzeros, none left",
                    mask.nnz()
                )));
            }
            dsf_project_fixed_a(&target, mask, z_total - mask.nnz(), cfg)?
        }
    };
    let mut pair = match &d {
        Some(d) => wanda_unscale(&pair, d)?,
        None => pair,
    };
    if opts.finalize {
        pair = finalize_b(calib, w, &pair, opts.finalize_iters)?;
    }
    if opts.optimize_a {
        pair = optimize_a(calib, w, &pair, opts.optimize_a_iters, opts.optimize_a_rho)?;
    }
    let layer_error = layer_error(calib, w, &pair)?;
    Ok(PrunedLayer { pair, layer_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsf::BudgetSplit;
    use crate::numerics::frobenius_error;

    fn random_psd(rng: &mut DetRng, n: usize) -> DenseMatrix {
        gram(&rng.gaussian_matrix(2 * n, n)).unwrap()
    }

    #[test]
    fn gram_accumulation() {
        let c = accumulate_gram(&[DenseMatrix::identity(3)]).unwrap();
        assert_eq!(c.g, DenseMatrix::identity(3));
        assert_eq!(c.feature_norms, vec![1.0; 3]);
        let c2 = accumulate_gram(&[DenseMatrix::identity(3), DenseMatrix::identity(3)]).unwrap();
        assert_eq!(c2.g, DenseMatrix::identity(3).scaled(2.0));
        assert_eq!(c2.nsamples, 6);
        assert!(accumulate_gram(&[]).is_err());
        assert!(accumulate_gram(&[DenseMatrix::zeros(0, 3)]).is_err());
        assert!(accumulate_gram(&[DenseMatrix::identity(3), DenseMatrix::identity(2)]).is_err());
    }

    #[test]
    fn gram_matches_stacked_batches() {
        let mut rng = DetRng::new(4);
        let a = rng.gaussian_matrix(5, 4);
        let b = rng.gaussian_matrix(7, 4);
        let stacked =
            DenseMatrix::from_fn(
                12,
                4,
                |i, j| if i < 5 { a.get(i, j) } else { b.get(i - 5, j) },
            );
        let c = accumulate_gram(&[a, b]).unwrap();
        let oracle = gram(&stacked).unwrap();
        assert!(frobenius_error(&c.g, &oracle).unwrap() <= 1e-12 * oracle.frobenius_norm());
    }

    #[test]
    fn layer_error_against_explicit_inputs() {
        let mut rng = DetRng::new(5);
        let x = rng.gaussian_matrix(9, 4);
        let w = rng.gaussian_matrix(4, 6);
        let calib = accumulate_gram(&[x.clone()]).unwrap();
        let split = BudgetSplit::new(4, 10);
        let pair = dsf_project(&w, &split, &DsfConfig::new(5, 3)).unwrap();
        let got = layer_error(&calib, &w, &pair).unwrap();
        let diff = matmul(&x, &w.sub(&pair.product()).unwrap()).unwrap();
        let oracle = diff.frobenius_norm().powi(2);
        assert!((got - oracle).abs() <= 1e-9 * oracle);

        let exact = FactorPair::new(
            SparseFactor::identity(4, 4).unwrap(),
            SparseFactor::dense_stored(&w),
            false,
        )
        .unwrap();
        assert_eq!(layer_error(&calib, &w, &exact).unwrap(), 0.0);
    }

    #[test]
    fn wanda_examples() {
        let w = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        let (ws, _) = wanda_scale(&w, &[2.0, 3.0]).unwrap();
        assert_eq!(ws, DenseMatrix::from_rows(&[[2.0, 2.0], [3.0, 3.0]]));
        assert_eq!(wanda_scale(&w, &[1.0, 1.0]).unwrap().0, w);
        assert!(wanda_scale(&w, &[1.0]).is_err());
    }

    #[test]
    fn wanda_round_trip_both_orientations() {
        let mut rng = DetRng::new(6);
        for (n, m) in [(5, 8), (8, 5)] {
            let w = rng.gaussian_matrix(n, m);
            let d: Vec<f64> = (0..n).map(|i| 0.5 + i as f64).collect();
            let (ws, d) = wanda_scale(&w, &d).unwrap();
            let pair = dsf_project(
                &ws,
                &BudgetSplit::new(n.min(m) * n.min(m), n * m),
                &DsfConfig::new(3, 2),
            )
            .unwrap();
            let back = wanda_unscale(&pair, &d).unwrap();
            let expect = unscale_rows(&pair.product(), &d);
            assert!(
                frobenius_error(&back.product(), &expect).unwrap()
                    <= 1e-12 * expect.frobenius_norm()
            );
        }
    }

    #[test]
    fn sylvester_scalar_cases() {
        let mut rng = DetRng::new(7);
        let rhs = rng.gaussian_matrix(4, 4);
        let ident = sym_eigen(&DenseMatrix::identity(4)).unwrap();
        let a = sylvester_solve(&ident, &ident, &rhs, 0.5).unwrap();
        assert!(frobenius_error(&a, &rhs.scaled(1.0 / 1.5)).unwrap() <= 1e-12);
        let zero = sym_eigen(&DenseMatrix::zeros(4, 4)).unwrap();
        let a = sylvester_solve(&zero, &ident, &rhs, 2.0).unwrap();
        assert!(frobenius_error(&a, &rhs.scaled(0.5)).unwrap() <= 1e-12);
        assert!(sylvester_solve(&ident, &ident, &rhs, 0.0).is_err());
    }

    #[test]
    fn sylvester_satisfies_equation() {
        let mut rng = DetRng::new(8);
        let g = random_psd(&mut rng, 5);
        let b = random_psd(&mut rng, 3);
        let rhs = rng.gaussian_matrix(5, 3);
        let a =
            sylvester_solve(&sym_eigen(&g).unwrap(), &sym_eigen(&b).unwrap(), &rhs, 0.3).unwrap();
        let lhs = matmul(&matmul(&g, &a).unwrap(), &b)
            .unwrap()
            .add(&a.scaled(0.3))
            .unwrap();
        assert!(frobenius_error(&lhs, &rhs).unwrap() <= 1e-8 * rhs.frobenius_norm());
    }

    #[test]
    fn finalize_recovers_dense_target() {
        let mut rng = DetRng::new(9);
        let w = rng.gaussian_matrix(5, 7);
        let calib = LayerCalibration::from_gram(random_psd(&mut rng, 5), 10).unwrap();
        let pair = FactorPair::new(
            SparseFactor::identity(5, 5).unwrap(),
            SparseFactor::from_masked(&DenseMatrix::zeros(5, 7), &SparsityMask::full(5, 7), 35)
                .unwrap(),
            false,
        )
        .unwrap();
        let fin = finalize_b(&calib, &w, &pair, 200).unwrap();
        assert!(
            layer_error(&calib, &w, &fin).unwrap()
                <= 1e-12 * weighted_sq_error(&calib.g, &w).unwrap()
        );

        let empty = FactorPair::new(
            SparseFactor::identity(5, 5).unwrap(),
            SparseFactor::zeros(5, 7, 0),
            false,
        )
        .unwrap();
        let fin = finalize_b(&calib, &w, &empty, 10).unwrap();
        assert_eq!(fin.b.nnz(), 0);
    }

    #[test]
    fn optimize_a_recovers_identity() {
        let mut rng = DetRng::new(10);
        let w = rng.gaussian_matrix(6, 6);
        let calib = LayerCalibration::from_gram(random_psd(&mut rng, 6), 12).unwrap();
        let start = DenseMatrix::from_diag(&[0.5, 2.0, 1.0, 0.1, 3.0, 1.5]);
        let pair = FactorPair::new(
            SparseFactor::from_dense(&start, 6).unwrap(),
            SparseFactor::dense_stored(&w),
            false,
        )
        .unwrap();
        let opt = optimize_a(&calib, &w, &pair, 300, 1.0).unwrap();
        assert!(frobenius_error(&opt.a.to_dense(), &DenseMatrix::identity(6)).unwrap() <= 1e-6);
        assert_eq!(opt.a.pattern(), pair.a.pattern());
    }

    #[test]
    fn shared_mask_cases() {
        assert_eq!(
            random_shared_mask(1, 4, 16).unwrap(),
            SparsityMask::full(4, 4)
        );
        assert_eq!(random_shared_mask(1, 4, 0).unwrap().nnz(), 0);
        assert_eq!(
            random_shared_mask(3, 16, 64).unwrap(),
            random_shared_mask(3, 16, 64).unwrap()
        );
        assert_eq!(random_shared_mask(3, 16, 64).unwrap().nnz(), 64);
        assert!(random_shared_mask(1, 4, 17).is_err());
    }

    #[test]
    fn identity_gram_with_wanda_matches_projection() {
        let mut rng = DetRng::new(11);
        let w = rng.gaussian_matrix(8, 8);
        let calib = LayerCalibration::from_gram(DenseMatrix::identity(8), 8).unwrap();
        let cfg = DsfConfig::new(6, 3);
        let opts = PruneOptions {
            finalize: false,
            ..Default::default()
        };
        let got = prune_layer(&w, &calib, 24, SplitPolicy::ThirdSplit, &cfg, &opts).unwrap();
        let split = split_budget(8, 8, 24, SplitPolicy::ThirdSplit).unwrap();
        let direct = dsf_project(&w, &split, &cfg).unwrap();
        assert_eq!(got.pair, direct);
        let proj = frobenius_error(&direct.product(), &w).unwrap().powi(2);
        assert!((got.layer_error - proj).abs() <= 1e-9 * proj);
    }
}
