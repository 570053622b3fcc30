//! SURE-LET denoising with three piecewise-linear thresholding kernels.
//!
//! The denoiser is `D(r) = Σₖ θₖ·O·ψₖ(Oᵀr)` for an orthonormal basis `O`.
//! Its extrinsic version replaces each kernel by the divergence-corrected
//! kernel `ψₖ − (div ψₖ / n)·r̃` and solves the weights in closed form.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::dist_sq;
use crate::transform::{OrthoTransform, TransformKind};

/// Relative eigenvalue cutoff of the 3×3 pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LetKernelParams {
    pub beta1: f64,
    pub beta2: f64,
}

impl LetKernelParams {
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        if !(beta1 > 0.0 && beta2 > beta1 && beta2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < beta1 < beta2, got beta1={beta1}, beta2={beta2}"
            )));
        }
        Ok(Self { beta1, beta2 })
    }
}

fn default_beta1_scale() -> f64 {
    2.0
}

fn default_beta2_scale() -> f64 {
    4.0
}

fn default_transform() -> TransformKind {
    TransformKind::Dct
}

/// How a SURE-LET denoiser picks its basis and thresholds. Thresholds scale
/// with the input noise standard deviation: `β₁ = beta1_scale·τ`,
/// `β₂ = beta2_scale·τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SureLetConfig {
    #[serde(default = "default_transform")]
    pub transform: TransformKind,
    /// Apply the basis separably over a column-major `[rows, cols]` grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<[usize; 2]>,
    #[serde(default = "default_beta1_scale")]
    pub beta1_scale: f64,
    #[serde(default = "default_beta2_scale")]
    pub beta2_scale: f64,
}

impl Default for SureLetConfig {
    fn default() -> Self {
        Self {
            transform: default_transform(),
            shape: None,
            beta1_scale: default_beta1_scale(),
            beta2_scale: default_beta2_scale(),
        }
    }
}

impl SureLetConfig {
    pub fn validate(&self) -> Result<()> {
        LetKernelParams::new(self.beta1_scale, self.beta2_scale).map(|_| ())
    }

    pub fn params(&self, tau_sq: f64) -> Result<LetKernelParams> {
        let tau = tau_sq.sqrt();
        LetKernelParams::new(self.beta1_scale * tau, self.beta2_scale * tau)
    }

    pub fn basis(&self, n: usize) -> Result<OrthoTransform> {
        match self.shape {
            Some([rows, cols]) => {
                if rows * cols != n {
                    return Err(Error::InvalidDimensions(format!(
                        "LET shape {rows}×{cols} does not match signal length {n}"
                    )));
                }
                OrthoTransform::separable(self.transform, rows, cols)
            }
            None => OrthoTransform::new(self.transform, n),
        }
    }
}

/// Kernel values and their divergences `Σᵢ ∂ψₖ,ᵢ/∂r̃ᵢ`.
#[derive(Clone, Debug)]
pub struct LetKernels {
    pub psi: [Vec<f64>; 3],
    pub divergence: [f64; 3],
}

fn kernel_values(t: f64, p: &LetKernelParams) -> ([f64; 3], [f64; 3]) {
    let (b1, b2) = (p.beta1, p.beta2);
    let a = t.abs();
    let s = t.signum();

    let (psi1, d1) = if a <= b1 {
        (t / b1, 1.0 / b1)
    } else if a < 2.0 * b1 {
        (s * (2.0 - a / b1), -1.0 / b1)
    } else {
        (0.0, 0.0)
    };
    let (psi2, d2) = if a <= b1 {
        (0.0, 0.0)
    } else if a < b2 {
        (s * (a - b1) / (b2 - b1), 1.0 / (b2 - b1))
    } else {
        (s, 0.0)
    };
    let (psi3, d3) = if a < b2 { (0.0, 0.0) } else { (t - s * b2, 1.0) };
    ([psi1, psi2, psi3], [d1, d2, d3])
}

pub fn let_kernels(rt: &[f64], params: &LetKernelParams) -> LetKernels {
    let n = rt.len();
    let mut psi = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut divergence = [0.0; 3];
    for (i, &t) in rt.iter().enumerate() {
        let (v, d) = kernel_values(t, params);
        for k in 0..3 {
            psi[k][i] = v[k];
            divergence[k] += d[k];
        }
    }
    LetKernels { psi, divergence }
}

/// Minimum-norm solution of `M·θ = b` for symmetric positive semidefinite `M`.
pub(crate) fn pinv_solve(m: &Matrix3<f64>, b: &Vector3<f64>) -> Result<Vector3<f64>> {
    if m.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::SolveFailure("non-finite LET normal equations".into()));
    }
    let eig = SymmetricEigen::new(*m);
    let top = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let mut theta = Vector3::zeros();
    if top == 0.0 {
        return Ok(theta);
    }
    for k in 0..3 {
        let lambda = eig.eigenvalues[k];
        if lambda.abs() > PINV_CUTOFF * top {
            let v = eig.eigenvectors.column(k);
            theta += v * (v.dot(b) / lambda);
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolveFailure("LET weights are not finite".into()));
    }
    Ok(theta)
}

#[derive(Clone, Debug)]
pub struct LetSolution {
    pub params: LetKernelParams,
    /// Weights of the divergence-corrected kernels; the extrinsic scale `c`
    /// is folded in.
    pub theta_ext: [f64; 3],
    /// `div ψₖ / n`
    pub alphas: [f64; 3],
    pub x_ext: Vec<f64>,
    /// SURE of `x_ext`.
    pub sure: f64,
    /// Weights of the plain SURE-LET estimate.
    pub theta_post: [f64; 3],
    pub x_post: Vec<f64>,
    /// Divergence of the plain estimate, `Σₖ θₖ·div ψₖ`.
    pub post_divergence: f64,
}

impl LetSolution {
    /// The extrinsic map with weights and divergence corrections held fixed,
    /// evaluated at a new input.
    pub fn apply_frozen(&self, r: &[f64], basis: &OrthoTransform) -> Vec<f64> {
        apply_let_extrinsic(&self.params, &self.theta_ext, &self.alphas, r, basis)
    }
}

/// `O·Σₖ θₖ·(ψₖ(Oᵀr) − αₖ·Oᵀr)`
pub fn apply_let_extrinsic(
    params: &LetKernelParams,
    theta: &[f64; 3],
    alphas: &[f64; 3],
    r: &[f64],
    basis: &OrthoTransform,
) -> Vec<f64> {
    let rt = basis.analyze(r);
    let kernels = let_kernels(&rt, params);
    let mut out = vec![0.0; rt.len()];
    for k in 0..3 {
        let (w, a) = (theta[k], alphas[k]);
        for ((o, p), t) in out.iter_mut().zip(&kernels.psi[k]).zip(&rt) {
            *o += w * (p - a * t);
        }
    }
    basis.synthesize(&out)
}

/// Solves for the SURE-optimal extrinsic SURE-LET estimate of `r`.
pub fn let_extrinsic_solve(
    r: &[f64],
    tau_sq: f64,
    params: &LetKernelParams,
    basis: &OrthoTransform,
) -> Result<LetSolution> {
    check_len(basis.len(), r.len())?;
    if !(tau_sq > 0.0) || !tau_sq.is_finite() {
        return Err(Error::InvalidParameter(format!("noise variance must be positive, got {tau_sq}")));
    }
    let n = r.len() as f64;
    let rt = basis.analyze(r);
    let kernels = let_kernels(&rt, params);
    let alphas = kernels.divergence.map(|d| d / n);
    let ext: Vec<Vec<f64>> = (0..3)
        .map(|k| kernels.psi[k].iter().zip(&rt).map(|(p, t)| p - alphas[k] * t).collect())
        .collect();

    let gram = |vs: &[Vec<f64>]| {
        let mut m = Matrix3::zeros();
        let mut b = Vector3::zeros();
        for i in 0..3 {
            b[i] = vs[i].iter().zip(&rt).map(|(p, t)| p * t).sum();
            for j in i..3 {
                let v: f64 = vs[i].iter().zip(&vs[j]).map(|(a, c)| a * c).sum();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        (m, b)
    };

    let (m_ext, b_ext) = gram(&ext);
    let theta_ext = pinv_solve(&m_ext, &b_ext)?;
    let mut est = vec![0.0; rt.len()];
    for k in 0..3 {
        est.iter_mut().zip(&ext[k]).for_each(|(e, p)| *e += theta_ext[k] * p);
    }
    let sure = dist_sq(&est, &rt) / n - tau_sq;
    let x_ext = basis.synthesize(&est);

    // Plain SURE-LET: minimize ‖Σθψ − r̃‖² + 2τ²·Σθₖ·div ψₖ.
    let (m_post, b_post) = gram(&kernels.psi);
    let rhs = b_post - Vector3::from(kernels.divergence) * tau_sq;
    let theta_post = pinv_solve(&m_post, &rhs)?;
    let mut post = vec![0.0; rt.len()];
    for k in 0..3 {
        post.iter_mut().zip(&kernels.psi[k]).for_each(|(e, p)| *e += theta_post[k] * p);
    }
    let post_divergence = (0..3).map(|k| theta_post[k] * kernels.divergence[k]).sum();

    Ok(LetSolution {
        params: *params,
        theta_ext: theta_ext.into(),
        alphas,
        x_ext,
        sure,
        theta_post: theta_post.into(),
        x_post: basis.synthesize(&post),
        post_divergence,
    })
}
