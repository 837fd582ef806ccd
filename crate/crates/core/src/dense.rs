//! Dense reference implementations built from explicit circulant matrices.
//!
//! Everything here works in the spatial domain with materialized shifted
//! copies of the training map and plain linear algebra, so it shares no code
//! path with the Fourier-domain closed forms it is used to check. Sizes are
//! meant to stay tiny (a few hundred unknowns).

use nalgebra::{DMatrix, DVector};

use crate::feature_map::FeatureMap;
use crate::optimizer::Kernel;

/// Sample for shift `t`: the map shifted back by `t`, `out[p] = x[p + t]`.
pub fn shifted_sample(x: &FeatureMap, tx: usize, ty: usize) -> FeatureMap {
    x.cyclic_shift(-(tx as isize), -(ty as isize))
}

fn all_samples(x: &FeatureMap) -> Vec<FeatureMap> {
    let mut out = Vec::with_capacity(x.plane_len());
    for ty in 0..x.height() {
        for tx in 0..x.width() {
            out.push(shifted_sample(x, tx, ty));
        }
    }
    out
}

/// Data matrix whose column `t` is the flattened shifted sample `t`.
pub fn circulant_matrix(x: &FeatureMap) -> DMatrix<f64> {
    let samples = all_samples(x);
    let n = x.as_slice().len();
    DMatrix::from_fn(n, samples.len(), |i, j| samples[j].as_slice()[i])
}

/// `corr[t] = <a, b shifted back by t>` for every shift, row-major.
pub fn cross_correlation(a: &FeatureMap, b: &FeatureMap) -> Vec<f64> {
    all_samples(b).iter().map(|s| a.dot(s)).collect()
}

/// Ridge solution `argmin_w 1/2 |w|^2 + C |Phi' w - u|^2`, solved through
/// the normal equations `(I + 2C Phi Phi') w = 2C Phi u`.
pub fn primal_solve(x: &FeatureMap, u: &[f64], c: f64) -> FeatureMap {
    let phi = circulant_matrix(x);
    let n = phi.nrows();
    let u = DVector::from_column_slice(u);
    let lhs = DMatrix::identity(n, n) + &phi * phi.transpose() * (2.0 * c);
    let rhs = &phi * u * (2.0 * c);
    let w = lhs
        .lu()
        .solve(&rhs)
        .expect("regularized normal equations are non-singular");
    FeatureMap::from_vec(x.width(), x.height(), x.channels(), w.as_slice().to_vec()).expect("shape")
}

/// `r[t] = <w, z shifted back by t>` computed as `Phi_z' w`.
pub fn primal_response(w: &FeatureMap, z: &FeatureMap) -> Vec<f64> {
    let phi = circulant_matrix(z);
    let w = DVector::from_column_slice(w.as_slice());
    (phi.transpose() * w).as_slice().to_vec()
}

pub fn kernel_eval(a: &FeatureMap, b: &FeatureMap, kernel: Kernel) -> f64 {
    match kernel {
        Kernel::Linear => a.dot(b),
        Kernel::Gaussian { sigma } => {
            let dist: f64 = a
                .as_slice()
                .iter()
                .zip(b.as_slice())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            (-dist / (sigma * sigma * a.as_slice().len() as f64)).exp()
        }
    }
}

/// Explicit kernel matrix `K_ij = k(sample_i, sample_j)`.
pub fn kernel_matrix(x: &FeatureMap, kernel: Kernel) -> DMatrix<f64> {
    let samples = all_samples(x);
    let m = samples.len();
    DMatrix::from_fn(m, m, |i, j| kernel_eval(&samples[i], &samples[j], kernel))
}

/// Dual solution of `(K + I/(2C)) alpha = u`.
pub fn dual_solve(k: &DMatrix<f64>, u: &[f64], c: f64) -> Vec<f64> {
    let m = k.nrows();
    let lhs = k + DMatrix::identity(m, m) / (2.0 * c);
    lhs.lu()
        .solve(&DVector::from_column_slice(u))
        .expect("regularized kernel system is non-singular")
        .as_slice()
        .to_vec()
}

/// `F[t] = sum_j alpha_j k(x sample j, z sample t)`.
pub fn kernel_response(x: &FeatureMap, z: &FeatureMap, alpha: &[f64], kernel: Kernel) -> Vec<f64> {
    let xs = all_samples(x);
    all_samples(z)
        .iter()
        .map(|zt| {
            xs.iter()
                .zip(alpha)
                .map(|(xj, a)| a * kernel_eval(xj, zt, kernel))
                .sum()
        })
        .collect()
}

/// Slack update evaluated element by element: `u0 = max r`,
/// `z = max(u0 - r - upsilon, 0)`.
pub fn slack_update(r: &[f64], upsilon: &[f64]) -> (Vec<f64>, f64) {
    let u0 = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = r
        .iter()
        .zip(upsilon)
        .map(|(rv, ups)| {
            let target = u0 - rv - ups;
            // minimizer of (z - target)^2 over z >= 0 by comparing the two candidates
            if target > 0.0 {
                target
            } else {
                0.0
            }
        })
        .collect();
    (z, u0)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(k: &DMatrix<f64>) -> f64 {
    k.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Largest asymmetry `|K_ij - K_ji|`.
pub fn asymmetry(k: &DMatrix<f64>) -> f64 {
    (k - k.transpose()).abs().max()
}
