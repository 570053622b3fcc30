//! Partial orthogonal sensing operators.
//!
//! An operator is `A = S·W` (plain) or `A = S·W·Θ` (sign-flipped), where `W`
//! is an orthonormal transform, `S` keeps `m` of its `n` rows and `Θ` is a
//! random ±1 diagonal. Rows of `A` are orthonormal, so `A·Aᵀ = I`.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dist_sq, dot, norm_sq};
use crate::rng;
use crate::transform::{OrthoTransform, TransformKind};

/// Whether the signal's signs are randomized before the transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `S·W`
    Plain,
    /// `S·W·Θ`
    SignFlipped,
}

/// Serializable description of an operator. The matrix itself is never
/// stored; it is regenerated from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub n: usize,
    pub m: usize,
    pub transform: TransformKind,
    pub variant: Variant,
    pub seed: u64,
}

impl OperatorSpec {
    pub fn build(&self) -> Result<SensingOperator> {
        SensingOperator::build(self.n, self.m, self.transform, self.variant, self.seed)
    }
}

#[derive(Clone, Debug)]
pub struct SensingOperator {
    spec: OperatorSpec,
    transform: OrthoTransform,
    rows: Vec<usize>,
    signs: Option<Vec<f64>>,
}

impl SensingOperator {
    /// Draws a random row selection (and sign diagonal for
    /// [`Variant::SignFlipped`]) from independent streams of `seed`.
    pub fn build(
        n: usize,
        m: usize,
        transform: TransformKind,
        variant: Variant,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 || m == 0 || m > n {
            return Err(Error::InvalidDimensions(format!("need 1 ≤ m ≤ n, got n={n}, m={m}")));
        }
        if transform == TransformKind::Identity {
            return Err(Error::InvalidParameter(
                "sensing transform must be dct or haar".into(),
            ));
        }
        let tf = OrthoTransform::new(transform, n)?;
        let rows = index::sample(&mut rng::stream(seed, rng::ROW_SELECTION), n, m).into_vec();
        let signs = match variant {
            Variant::Plain => None,
            Variant::SignFlipped => {
                let mut r = rng::stream(seed, rng::SIGN_DIAGONAL);
                Some((0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect())
            }
        };
        Ok(Self { spec: OperatorSpec { n, m, transform, variant, seed }, transform: tf, rows, signs })
    }

    /// Assembles an operator from explicit parts. `signs`, when given, must
    /// be ±1 entries of length `n`.
    pub fn from_parts(
        transform: TransformKind,
        n: usize,
        rows: Vec<usize>,
        signs: Option<Vec<f64>>,
    ) -> Result<Self> {
        let m = rows.len();
        if m == 0 || m > n {
            return Err(Error::InvalidDimensions(format!("need 1 ≤ m ≤ n, got n={n}, m={m}")));
        }
        let mut seen = vec![false; n];
        for &r in &rows {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::InvalidDimensions(format!("bad or repeated row index {r}")));
            }
        }
        if let Some(s) = &signs {
            check_len(n, s.len())?;
            if s.iter().any(|v| v.abs() != 1.0) {
                return Err(Error::InvalidParameter("sign diagonal must be ±1".into()));
            }
        }
        let variant = if signs.is_some() { Variant::SignFlipped } else { Variant::Plain };
        Ok(Self {
            spec: OperatorSpec { n, m, transform, variant, seed: 0 },
            transform: OrthoTransform::new(transform, n)?,
            rows,
            signs,
        })
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    /// `n / m`
    pub fn undersampling(&self) -> f64 {
        self.spec.n as f64 / self.spec.m as f64
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn signs(&self) -> Option<&[f64]> {
        self.signs.as_deref()
    }

    /// `A·x`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), x.len())?;
        let mut buf = x.to_vec();
        if let Some(signs) = &self.signs {
            buf.iter_mut().zip(signs).for_each(|(v, s)| *v *= s);
        }
        self.transform.forward(&mut buf);
        Ok(self.rows.iter().map(|&r| buf[r]).collect())
    }

    /// `Aᵀ·y`
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m(), y.len())?;
        let mut buf = vec![0.0; self.n()];
        for (&r, &v) in self.rows.iter().zip(y) {
            buf[r] = v;
        }
        self.transform.inverse(&mut buf);
        if let Some(signs) = &self.signs {
            buf.iter_mut().zip(signs).for_each(|(v, s)| *v *= s);
        }
        Ok(buf)
    }

    /// Dense `m × n` matrix (row-major) built by applying the operator to
    /// the canonical basis. Only sensible for small `n`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut cols = Vec::with_capacity(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            cols.push(self.apply(&e).expect("length n"));
            e[j] = 0.0;
        }
        (0..self.m()).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
    }
}

/// `y = A·x + w` with `w ~ N(0, σ²·I)` drawn from the noise stream of `noise_seed`.
#[derive(Clone, Debug)]
pub struct MeasurementModel {
    pub operator: SensingOperator,
    pub noise_variance: f64,
    pub noise_seed: u64,
}

impl MeasurementModel {
    pub fn new(operator: SensingOperator, noise_variance: f64, noise_seed: u64) -> Result<Self> {
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be finite and ≥ 0, got {noise_variance}"
            )));
        }
        Ok(Self { operator, noise_variance, noise_seed })
    }

    pub fn measure(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.operator.apply(x)?;
        if self.noise_variance > 0.0 {
            let sd = self.noise_variance.sqrt();
            let mut r = rng::stream(self.noise_seed, rng::MEASUREMENT_NOISE);
            let w = rng::gaussian_vec(&mut r, y.len());
            y.iter_mut().zip(w).for_each(|(v, e)| *v += sd * e);
        }
        Ok(y)
    }
}

/// Worst-case deviations found by [`check_orthonormality`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalityReport {
    /// `max |⟨A·x, y⟩ − ⟨x, Aᵀ·y⟩| / (‖x‖·‖y‖)`
    pub adjoint_error: f64,
    /// `max ‖A·Aᵀ·y − y‖ / ‖y‖`
    pub projection_error: f64,
    pub trials: usize,
    pub tolerance: f64,
}

impl OrthonormalityReport {
    pub fn passed(&self) -> bool {
        self.adjoint_error <= self.tolerance && self.projection_error <= self.tolerance
    }
}

/// Probes `op` with `trials` random vector pairs.
pub fn check_orthonormality(op: &SensingOperator, trials: usize, seed: u64, tolerance: f64) -> Result<OrthonormalityReport> {
    let mut r = rng::stream(seed, rng::SIGNAL);
    let (mut adjoint_error, mut projection_error) = (0.0_f64, 0.0_f64);
    for _ in 0..trials {
        let x = rng::gaussian_vec(&mut r, op.n());
        let y = rng::gaussian_vec(&mut r, op.m());
        let ax = op.apply(&x)?;
        let aty = op.adjoint(&y)?;
        let scale = (norm_sq(&x) * norm_sq(&y)).sqrt();
        adjoint_error = adjoint_error.max((dot(&ax, &y) - dot(&x, &aty)).abs() / scale);
        let back = op.apply(&aty)?;
        projection_error =
            projection_error.max((dist_sq(&back, &y) / norm_sq(&y)).sqrt());
    }
    Ok(OrthonormalityReport { adjoint_error, projection_error, trials, tolerance })
}
