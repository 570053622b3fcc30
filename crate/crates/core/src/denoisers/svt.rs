//! Singular value thresholding and its extrinsic, SURE-tuned variant.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative gap `|σᵢ² − σⱼ²| < TIE_TOLERANCE·σ₁²` below which two singular
/// values are treated as equal in the divergence formula.
pub const TIE_TOLERANCE: f64 = 1e-10;

pub const DEFAULT_GRID_SIZE: usize = 256;

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

/// Shape of the matrix a length-`n` signal is reshaped into (column-major).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvtConfig {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
}

impl SvtConfig {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, grid_size: DEFAULT_GRID_SIZE }
    }

    pub fn validate(&self, n: Option<usize>) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidDimensions("SVT shape must be nonempty".into()));
        }
        if let Some(n) = n {
            if self.rows * self.cols != n {
                return Err(Error::InvalidDimensions(format!(
                    "SVT shape {}×{} does not match signal length {n}",
                    self.rows, self.cols
                )));
            }
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidParameter("SVT grid needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn to_matrix(&self, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, v)
    }
}

/// Thin SVD with singular values sorted nonincreasing.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

impl SvdFactors {
    pub fn new(r: &DMatrix<f64>) -> Result<Self> {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("SVD input".into()));
        }
        let svd = SVD::try_new(r.clone(), true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::SolveFailure("SVD did not converge".into()))?;
        Ok(Self {
            u: svd.u.expect("requested U"),
            sigma: svd.singular_values.iter().copied().collect(),
            v_t: svd.v_t.expect("requested Vᵀ"),
        })
    }

    /// `U·diag(d)·Vᵀ`
    pub fn compose(&self, d: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= d[k];
        }
        scaled * &self.v_t
    }
}

pub fn shrink(sigma: &[f64], theta: f64) -> Vec<f64> {
    sigma.iter().map(|s| (s - theta).max(0.0)).collect()
}

/// `argmin_X ½‖R − X‖²_F + θ‖X‖_*`
pub fn svt(r: &DMatrix<f64>, theta: f64) -> Result<DMatrix<f64>> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter(format!("SVT threshold must be ≥ 0, got {theta}")));
    }
    let f = SvdFactors::new(r)?;
    Ok(f.compose(&shrink(&f.sigma, theta)))
}

/// Divergence of `R ↦ svt(R, θ)` for an `n1 × n2` matrix with singular
/// values `sigma` (nonincreasing).
pub fn svt_divergence(sigma: &[f64], theta: f64, n1: usize, n2: usize) -> f64 {
    let gap = n1.abs_diff(n2) as f64;
    let top = sigma.first().copied().unwrap_or(0.0);
    let tie = TIE_TOLERANCE * top * top;
    let mut div = 0.0;
    for (i, &si) in sigma.iter().enumerate() {
        if si > theta {
            div += gap * (1.0 - theta / si) + 1.0;
        }
        for &sj in &sigma[i + 1..] {
            let denom = si * si - sj * sj;
            if denom.abs() < tie {
                // Both ordered terms together tend to 2 − θ/s as σⱼ → σᵢ = s.
                let s = 0.5 * (si + sj);
                if s > theta {
                    div += 2.0 - theta / s;
                }
            } else {
                let num = si * (si - theta).max(0.0) - sj * (sj - theta).max(0.0);
                div += 2.0 * num / denom;
            }
        }
    }
    div
}

#[derive(Clone, Debug)]
pub struct SvtExtrinsic {
    pub theta: f64,
    pub c: f64,
    /// SURE of `x_ext`.
    pub sure: f64,
    pub divergence: f64,
    /// `divergence / n`
    pub alpha: f64,
    pub x_ext: DMatrix<f64>,
    /// `svt(R, θ*)`
    pub x_post: DMatrix<f64>,
}

impl SvtExtrinsic {
    /// `c·(svt(R′, θ*) − α·R′)` with `θ*`, `c`, `α` held fixed.
    pub fn apply_frozen(&self, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok((svt(r, self.theta)? - r * self.alpha) * self.c)
    }
}

fn extrinsic_profile(sigma: &[f64], theta: f64, n1: usize, n2: usize) -> (Vec<f64>, f64) {
    let n = (n1 * n2) as f64;
    let div = svt_divergence(sigma, theta, n1, n2);
    let phi = sigma.iter().map(|s| (s - theta).max(0.0) - div / n * s).collect();
    (phi, div)
}

/// Picks `θ` on a uniform grid over `[0, σ₁]` to minimize the SURE of the
/// extrinsic SVT estimate, then returns that estimate.
pub fn svt_extrinsic(r: &DMatrix<f64>, tau_sq: f64, grid_size: usize) -> Result<SvtExtrinsic> {
    if !(tau_sq > 0.0) || !tau_sq.is_finite() {
        return Err(Error::InvalidParameter(format!("noise variance must be positive, got {tau_sq}")));
    }
    if grid_size < 2 {
        return Err(Error::InvalidParameter("SVT grid needs at least 2 points".into()));
    }
    let (n1, n2) = r.shape();
    let n = (n1 * n2) as f64;
    let f = SvdFactors::new(r)?;
    let sigma = &f.sigma;
    let top = sigma.first().copied().unwrap_or(0.0);
    let energy: f64 = sigma.iter().map(|s| s * s).sum();

    let mut best: Option<(f64, f64, Vec<f64>, f64)> = None;
    for g in 0..grid_size {
        let theta = top * g as f64 / (grid_size - 1) as f64;
        let (phi, div) = extrinsic_profile(sigma, theta, n1, n2);
        let phi_sq: f64 = phi.iter().map(|p| p * p).sum();
        if !(phi_sq > 0.0) {
            continue;
        }
        let proj: f64 = phi.iter().zip(sigma).map(|(p, s)| p * s).sum();
        let objective = proj * proj / phi_sq;
        if best.as_ref().is_none_or(|b| objective > b.1) {
            best = Some((theta, objective, phi, div));
        }
    }
    let (theta, objective, phi, divergence) = best.ok_or(Error::DegenerateExtrinsic {
        norm: 0.0,
        direction: vec![0.0; r.len()],
    })?;

    let phi_sq: f64 = phi.iter().map(|p| p * p).sum();
    let c = phi.iter().zip(sigma).map(|(p, s)| p * s).sum::<f64>() / phi_sq;
    let x_ext = f.compose(&phi.iter().map(|p| c * p).collect::<Vec<_>>());
    Ok(SvtExtrinsic {
        theta,
        c,
        sure: (energy - objective) / n - tau_sq,
        divergence,
        alpha: divergence / n,
        x_ext,
        x_post: f.compose(&shrink(sigma, theta)),
    })
}

/// Column-major flattening.
pub fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    m.as_slice().to_vec()
}

#[cfg(test)]
pub(crate) fn singular_values(r: &DMatrix<f64>) -> Result<nalgebra::DVector<f64>> {
    Ok(nalgebra::DVector::from_vec(SvdFactors::new(r)?.sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::DVector;

    fn random_matrix(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_vec(rows, cols, rng::gaussian_vec(&mut rng::stream(seed, 0), rows * cols))
    }

    #[test]
    fn zero_threshold_is_identity() {
        let r = random_matrix(1, 5, 4);
        assert!((svt(&r, 0.0).unwrap() - &r).norm() < 1e-10);
    }

    #[test]
    fn large_threshold_is_zero() {
        let r = random_matrix(2, 6, 3);
        let top = singular_values(&r).unwrap()[0];
        assert_eq!(svt(&r, top).unwrap().norm(), 0.0);
        assert!(svt(&r, -1.0).is_err());
    }

    #[test]
    fn identity_divergence() {
        for (n1, n2) in [(4, 4), (7, 3), (3, 9)] {
            let r = random_matrix(3, n1, n2);
            let s = singular_values(&r).unwrap();
            let div = svt_divergence(s.as_slice(), 0.0, n1, n2);
            assert!((div - (n1 * n2) as f64).abs() < 1e-9, "{n1}×{n2}: {div}");
            assert_eq!(svt_divergence(s.as_slice(), s[0] * 1.0001, n1, n2), 0.0);
        }
    }

    #[test]
    fn divergence_matches_jacobian_trace() {
        // Central differences over every entry: exact up to O(h²).
        let (n1, n2) = (8, 6);
        let r = random_matrix(4, n1, n2);
        let s = singular_values(&r).unwrap();
        let theta = 0.5 * s[2];
        let h = 1e-6;
        let mut trace = 0.0;
        for j in 0..n2 {
            for i in 0..n1 {
                let mut up = r.clone();
                up[(i, j)] += h;
                let mut dn = r.clone();
                dn[(i, j)] -= h;
                trace += (svt(&up, theta).unwrap()[(i, j)] - svt(&dn, theta).unwrap()[(i, j)]) / (2.0 * h);
            }
        }
        let div = svt_divergence(s.as_slice(), theta, n1, n2);
        assert!((trace - div).abs() < 1e-5 * div, "{trace} vs {div}");
    }

    #[test]
    fn tied_singular_values_use_limit() {
        let sigma = [3.0, 2.0, 2.0, 1.0];
        let near = [3.0, 2.0 + 1e-7, 2.0 - 1e-7, 1.0];
        let a = svt_divergence(&sigma, 0.5, 4, 6);
        let b = svt_divergence(&near, 0.5, 4, 6);
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }

    #[test]
    fn extrinsic_rank_one() {
        let u = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]).normalize();
        let v = DVector::from_vec(vec![0.3, -1.0, 2.0]).normalize();
        let r = &u * v.transpose() * 5.0;
        let ext = svt_extrinsic(&r, 0.1, 64).unwrap();
        let rank_one = &u * v.transpose();
        let coeff = (ext.x_ext.component_mul(&rank_one)).sum();
        assert!((&ext.x_ext - &rank_one * coeff).norm() < 1e-9 * ext.x_ext.norm().max(1.0));
    }

    #[test]
    fn sure_matches_closed_forms() {
        let r = random_matrix(5, 10, 7);
        let tau_sq = 0.3;
        let ext = svt_extrinsic(&r, tau_sq, 128).unwrap();
        let n = 70.0;
        let direct = (&ext.x_ext - &r).norm_squared() / n - tau_sq;
        assert!((direct - ext.sure).abs() < 1e-10);
        let frozen = ext.apply_frozen(&r).unwrap();
        assert!((frozen - &ext.x_ext).norm() < 1e-9);
    }
}
