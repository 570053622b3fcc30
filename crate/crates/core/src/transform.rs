//! Orthonormal fast transforms.
//!
//! Every transform here is an n×n orthonormal matrix `W` applied in
//! O(n log n): [`OrthoTransform::forward`] computes `W·x` and
//! [`OrthoTransform::inverse`] computes `Wᵀ·y`.

use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which orthonormal transform to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// Orthonormal type-II DCT (any length).
    Dct,
    /// Full-depth orthonormal Haar wavelet (power-of-two length).
    Haar,
    /// No transform.
    Identity,
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformKind::Dct => f.write_str("dct"),
            TransformKind::Haar => f.write_str("haar"),
            TransformKind::Identity => f.write_str("identity"),
        }
    }
}

#[derive(Clone)]
enum Kernel {
    Identity,
    Dct(Arc<dyn TransformType2And3<f64>>),
    Haar,
}

#[derive(Clone)]
struct Axis {
    len: usize,
    kernel: Kernel,
}

impl Axis {
    fn new(kind: TransformKind, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidDimensions("transform length must be positive".into()));
        }
        let kernel = match kind {
            TransformKind::Identity => Kernel::Identity,
            TransformKind::Dct => Kernel::Dct(DctPlanner::new().plan_dct2(len)),
            TransformKind::Haar => {
                if !len.is_power_of_two() {
                    return Err(Error::InvalidDimensions(format!(
                        "Haar transform needs a power-of-two length, got {len}"
                    )));
                }
                Kernel::Haar
            }
        };
        Ok(Self { len, kernel })
    }

    fn scratch_len(&self) -> usize {
        match &self.kernel {
            Kernel::Dct(plan) => plan.get_scratch_len().max(self.len),
            _ => self.len,
        }
    }

    fn forward(&self, buf: &mut [f64], scratch: &mut [f64]) {
        match &self.kernel {
            Kernel::Identity => {}
            Kernel::Dct(plan) => {
                plan.process_dct2_with_scratch(buf, &mut scratch[..plan.get_scratch_len()]);
                let n = self.len as f64;
                buf[0] *= (1.0 / n).sqrt();
                let s = (2.0 / n).sqrt();
                buf[1..].iter_mut().for_each(|v| *v *= s);
            }
            Kernel::Haar => haar_forward(buf, scratch),
        }
    }

    fn inverse(&self, buf: &mut [f64], scratch: &mut [f64]) {
        match &self.kernel {
            Kernel::Identity => {}
            Kernel::Dct(plan) => {
                // rustdct's DCT-III halves the DC term.
                let n = self.len as f64;
                buf[0] *= 2.0 * (1.0 / n).sqrt();
                let s = (2.0 / n).sqrt();
                buf[1..].iter_mut().for_each(|v| *v *= s);
                plan.process_dct3_with_scratch(buf, &mut scratch[..plan.get_scratch_len()]);
            }
            Kernel::Haar => haar_inverse(buf, scratch),
        }
    }
}

fn haar_forward(buf: &mut [f64], scratch: &mut [f64]) {
    let mut len = buf.len();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            let (a, b) = (buf[2 * i], buf[2 * i + 1]);
            scratch[i] = (a + b) * h;
            scratch[half + i] = (a - b) * h;
        }
        buf[..len].copy_from_slice(&scratch[..len]);
        len = half;
    }
}

fn haar_inverse(buf: &mut [f64], scratch: &mut [f64]) {
    let n = buf.len();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for i in 0..half {
            let (a, d) = (buf[i], buf[half + i]);
            scratch[2 * i] = (a + d) * h;
            scratch[2 * i + 1] = (a - d) * h;
        }
        buf[..len].copy_from_slice(&scratch[..len]);
        len *= 2;
    }
}

/// An orthonormal transform on vectors, optionally separable over a
/// column-major `rows × cols` grid.
#[derive(Clone)]
pub struct OrthoTransform {
    kind: TransformKind,
    // (column transform over `rows`, row transform over `cols`)
    axes: (Axis, Option<Axis>),
}

impl fmt::Debug for OrthoTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OrthoTransform")
            .field("kind", &self.kind)
            .field("shape", &self.shape())
            .finish()
    }
}

impl OrthoTransform {
    /// One-dimensional transform of length `n`.
    pub fn new(kind: TransformKind, n: usize) -> Result<Self> {
        Ok(Self { kind, axes: (Axis::new(kind, n)?, None) })
    }

    /// Separable two-dimensional transform of a column-major `rows × cols`
    /// array flattened to a vector of length `rows·cols`.
    pub fn separable(kind: TransformKind, rows: usize, cols: usize) -> Result<Self> {
        Ok(Self { kind, axes: (Axis::new(kind, rows)?, Some(Axis::new(kind, cols)?)) })
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.axes.0.len * self.axes.1.as_ref().map_or(1, |a| a.len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(rows, cols)` for separable transforms.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.axes.1.as_ref().map(|c| (self.axes.0.len, c.len))
    }

    /// In-place analysis `x ← W·x`.
    pub fn forward(&self, x: &mut [f64]) {
        self.run(x, true);
    }

    /// In-place synthesis `y ← Wᵀ·y`.
    pub fn inverse(&self, y: &mut [f64]) {
        self.run(y, false);
    }

    fn run(&self, buf: &mut [f64], forward: bool) {
        assert_eq!(buf.len(), self.len(), "transform length mismatch");
        let (col_axis, row_axis) = (&self.axes.0, self.axes.1.as_ref());
        let apply = |axis: &Axis, v: &mut [f64], s: &mut [f64]| {
            if forward {
                axis.forward(v, s)
            } else {
                axis.inverse(v, s)
            }
        };
        let mut scratch = vec![0.0; col_axis.scratch_len().max(row_axis.map_or(0, Axis::scratch_len))];
        let rows = col_axis.len;
        for column in buf.chunks_exact_mut(rows) {
            apply(col_axis, column, &mut scratch);
        }
        if let Some(row_axis) = row_axis {
            let cols = row_axis.len;
            let mut line = vec![0.0; cols];
            for r in 0..rows {
                for (c, v) in line.iter_mut().enumerate() {
                    *v = buf[r + c * rows];
                }
                apply(row_axis, &mut line, &mut scratch);
                for (c, v) in line.iter().enumerate() {
                    buf[r + c * rows] = *v;
                }
            }
        }
    }

    /// Out-of-place analysis.
    pub fn analyze(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.forward(&mut out);
        out
    }

    /// Out-of-place synthesis.
    pub fn synthesize(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        self.inverse(&mut out);
        out
    }
}
