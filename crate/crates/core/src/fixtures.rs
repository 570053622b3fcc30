//! Seeded synthetic test signals.

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::pgm::GrayImage;
use crate::rng;

/// A piecewise-smooth 8-bit image: a shaded background with a handful of
/// overlapping ellipses and rectangles, each with its own linear shading.
pub fn piecewise_smooth(width: usize, height: usize, seed: u64) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions(format!("empty image {width}×{height}")));
    }
    let mut rng = rng::stream(seed, rng::SIGNAL);
    let mut shapes = Vec::new();
    for k in 0..8 {
        shapes.push(Shape {
            ellipse: k % 3 != 2,
            cx: rng.random_range(0.1..0.9),
            cy: rng.random_range(0.1..0.9),
            rx: rng.random_range(0.08..0.3),
            ry: rng.random_range(0.08..0.3),
            level: rng.random_range(20.0..235.0),
            gx: rng.random_range(-40.0..40.0),
            gy: rng.random_range(-40.0..40.0),
        });
    }
    let (bg, bgx, bgy) = (rng.random_range(70.0..150.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
    let mut pixels = Vec::with_capacity(width * height);
    for r in 0..height {
        let y = (r as f64 + 0.5) / height as f64;
        for c in 0..width {
            let x = (c as f64 + 0.5) / width as f64;
            let mut v = bg + bgx * (x - 0.5) + bgy * (y - 0.5) + 8.0 * (3.0 * x + 2.0 * y).sin();
            for s in &shapes {
                if s.contains(x, y) {
                    v = s.level + s.gx * (x - s.cx) + s.gy * (y - s.cy);
                }
            }
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(width, height, pixels)
}

struct Shape {
    ellipse: bool,
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    level: f64,
    gx: f64,
    gy: f64,
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = ((x - self.cx) / self.rx, (y - self.cy) / self.ry);
        if self.ellipse {
            dx * dx + dy * dy <= 1.0
        } else {
            dx.abs() <= 1.0 && dy.abs() <= 1.0
        }
    }
}

/// `G₁·G₂` with standard Gaussian `rows × rank` and `rank × cols` factors,
/// flattened column-major.
pub fn low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> Result<Vec<f64>> {
    if rows == 0 || cols == 0 || rank == 0 || rank > rows.min(cols) {
        return Err(Error::InvalidDimensions(format!("rank {rank} for a {rows}×{cols} matrix")));
    }
    let mut rng = rng::stream(seed, rng::SIGNAL);
    let g1 = DMatrix::from_vec(rows, rank, rng::gaussian_vec(&mut rng, rows * rank));
    let g2 = DMatrix::from_vec(rank, cols, rng::gaussian_vec(&mut rng, rank * cols));
    Ok((g1 * g2).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoisers::svt::singular_values;

    #[test]
    fn image_is_deterministic_and_varied() {
        let a = piecewise_smooth(64, 48, 1).unwrap();
        assert_eq!(a, piecewise_smooth(64, 48, 1).unwrap());
        assert_ne!(a, piecewise_smooth(64, 48, 2).unwrap());
        let distinct: std::collections::BTreeSet<u8> = a.pixels.iter().copied().collect();
        assert!(distinct.len() > 30);
    }

    #[test]
    fn low_rank_has_the_requested_rank() {
        let x = low_rank(20, 15, 3, 4).unwrap();
        let mut s: Vec<f64> = singular_values(&DMatrix::from_column_slice(20, 15, &x)).unwrap().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!(s[2] > 1e-6 * s[0]);
        assert!(s[3] < 1e-10 * s[0]);
        assert!(low_rank(4, 4, 5, 0).is_err());
    }
}
