//! Fixtures shared by the kernel benchmarks.

use dsf_core::bench::{generate_matrix, synthetic_layer, Generator};
use dsf_core::dsf::{split_budget, BudgetSplit, SplitPolicy};
use dsf_core::{DenseMatrix, LayerCalibration};

pub fn gaussian(seed: u64, n: usize, m: usize) -> DenseMatrix {
    generate_matrix(&Generator::Gaussian, seed, n, m).expect("valid size")
}

/// Symmetric positive definite `XᵀX` from a `2n × n` Gaussian design.
pub fn spd(seed: u64, n: usize) -> DenseMatrix {
    let x = gaussian(seed, 2 * n, n);
    dsf_core::numerics::gram(&x).expect("square gram")
}

pub fn third_split(n: usize, m: usize, density: f64) -> BudgetSplit {
    let z = (density * (n * m) as f64).round() as usize;
    split_budget(n, m, z, SplitPolicy::ThirdSplit).expect("feasible split")
}

pub fn layer(seed: u64, n: usize) -> (DenseMatrix, LayerCalibration) {
    synthetic_layer(seed, n, n).expect("valid layer")
}
