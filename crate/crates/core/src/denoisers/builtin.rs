//! Simple black-box denoisers. They have no closed-form divergence, so the
//! extrinsic wrapper estimates it by Monte-Carlo probing.

use serde::{Deserialize, Serialize};

use super::Denoiser;

/// `(2·radius+1)²` median filter on a column-major `rows × cols` image,
/// replicating edge pixels. In an image experiment a zero shape is replaced
/// by the image's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedianFilter {
    #[serde(default)]
    pub rows: usize,
    #[serde(default)]
    pub cols: usize,
    #[serde(default = "one")]
    pub radius: usize,
}

fn one() -> usize {
    1
}

impl Denoiser for MedianFilter {
    fn denoise(&self, r: &[f64], _tau_sq: f64) -> Vec<f64> {
        assert_eq!(r.len(), self.rows * self.cols, "median filter shape mismatch");
        let rad = self.radius as isize;
        let (rows, cols) = (self.rows as isize, self.cols as isize);
        let mut window = Vec::with_capacity((2 * self.radius + 1).pow(2));
        let mut out = vec![0.0; r.len()];
        for c in 0..cols {
            for row in 0..rows {
                window.clear();
                for dc in -rad..=rad {
                    let cc = (c + dc).clamp(0, cols - 1);
                    for dr in -rad..=rad {
                        let rr = (row + dr).clamp(0, rows - 1);
                        window.push(r[(rr + cc * rows) as usize]);
                    }
                }
                let mid = window.len() / 2;
                let (_, m, _) = window.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
                out[(row + c * rows) as usize] = *m;
            }
        }
        out
    }
}

/// Componentwise soft thresholding at `scale·τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftThreshold {
    pub scale: f64,
}

pub fn soft_threshold(v: f64, theta: f64) -> f64 {
    if v > theta {
        v - theta
    } else if v < -theta {
        v + theta
    } else {
        0.0
    }
}

impl Denoiser for SoftThreshold {
    fn denoise(&self, r: &[f64], tau_sq: f64) -> Vec<f64> {
        let theta = self.scale * tau_sq.sqrt();
        r.iter().map(|&v| soft_threshold(v, theta)).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Identity;

impl Denoiser for Identity {
    fn denoise(&self, r: &[f64], _tau_sq: f64) -> Vec<f64> {
        r.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_removes_salt() {
        let mut img = vec![10.0; 25];
        img[12] = 255.0;
        let out = MedianFilter { rows: 5, cols: 5, radius: 1 }.denoise(&img, 1.0);
        assert!(out.iter().all(|v| *v == 10.0));
    }

    #[test]
    fn median_keeps_vertical_edge() {
        // column-major: first two columns dark, rest bright
        let img: Vec<f64> = (0..16).map(|i| if i / 4 < 2 { 0.0 } else { 9.0 }).collect();
        let out = MedianFilter { rows: 4, cols: 4, radius: 1 }.denoise(&img, 1.0);
        assert_eq!(out, img);
    }

    #[test]
    fn soft_threshold_values() {
        let out = SoftThreshold { scale: 2.0 }.denoise(&[3.0, -0.5, -4.0], 0.25);
        assert_eq!(out, vec![2.0, 0.0, -3.0]);
    }
}
