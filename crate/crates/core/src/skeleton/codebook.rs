use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{axis_sum, response_from_frequency, Angles, ArrayConfig};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Bs,
    Ue,
}

/// Oversampled DFT steering codebook for a planar array.
///
/// Codewords sit on a uniform grid of phase slopes `(a, b) ∈ [-1, 1)²` with
/// `oversampling` points per array element along each axis; codeword `k`
/// is `u(a, b) / √N`. Index layout is `ia · grid_b + ib`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub side: Side,
    pub rows: usize,
    pub cols: usize,
    grid_a: Vec<f64>,
    grid_b: Vec<f64>,
    norm: f64,
}

impl Codebook {
    pub fn new(side: Side, rows: usize, cols: usize, oversampling: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || oversampling == 0 {
            return invalid("codebook dimensions must be positive");
        }
        let grid = |n: usize| -> Vec<f64> {
            let k = n * oversampling;
            (0..k).map(|i| -1.0 + 2.0 * i as f64 / k as f64).collect()
        };
        Ok(Codebook {
            side,
            rows,
            cols,
            grid_a: grid(rows),
            grid_b: grid(cols),
            norm: 1.0 / ((rows * cols) as f64).sqrt(),
        })
    }

    pub fn for_arrays(arrays: &ArrayConfig, oversampling: usize) -> Result<(Codebook, Codebook)> {
        Ok((
            Codebook::new(Side::Bs, arrays.bs_rows, arrays.bs_cols, oversampling)?,
            Codebook::new(Side::Ue, arrays.ue_rows, arrays.ue_cols, oversampling)?,
        ))
    }

    pub fn len(&self) -> usize {
        self.grid_a.len() * self.grid_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        self.rows * self.cols
    }

    /// Phase slopes of codeword `idx`.
    #[inline]
    pub fn slopes(&self, idx: usize) -> (f64, f64) {
        let nb = self.grid_b.len();
        (self.grid_a[idx / nb], self.grid_b[idx % nb])
    }

    pub fn codeword(&self, idx: usize) -> Vec<Complex64> {
        let (a, b) = self.slopes(idx);
        let mut v = response_from_frequency(a, b, self.rows, self.cols);
        v.iter_mut().for_each(|z| *z *= self.norm);
        v
    }

    /// `cᴴ u(a, b)` for codeword `idx` and a response with slopes `(a, b)`.
    #[inline]
    pub fn inner(&self, idx: usize, slopes: (f64, f64)) -> Complex64 {
        let (ca, cb) = self.slopes(idx);
        axis_sum(slopes.0 - ca, self.rows) * axis_sum(slopes.1 - cb, self.cols) * self.norm
    }

    fn nearest_on_axis(grid: &[f64], x: f64) -> usize {
        let k = grid.len() as f64;
        // Phases are 2-periodic in the slope.
        let pos = ((x + 1.0) * k / 2.0).round().rem_euclid(k);
        pos as usize % grid.len()
    }

    /// Codeword with the largest `|cᴴ u(a, b)|`.
    pub fn nearest_to_slopes(&self, slopes: (f64, f64)) -> usize {
        Self::nearest_on_axis(&self.grid_a, slopes.0) * self.grid_b.len()
            + Self::nearest_on_axis(&self.grid_b, slopes.1)
    }

    pub fn nearest(&self, direction: &Angles) -> usize {
        self.nearest_to_slopes(direction.spatial_frequency())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::array_response;
    use proptest::prelude::*;

    #[test]
    fn codewords_have_unit_norm() {
        let cb = Codebook::new(Side::Bs, 8, 8, 2).unwrap();
        assert_eq!(cb.len(), 256);
        for idx in [0, 17, 255] {
            let n: f64 = cb.codeword(idx).iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(Codebook::new(Side::Ue, 0, 4, 2).is_err());
    }

    proptest! {
        #[test]
        fn nearest_maximizes_inner_product(az in -3.0f64..3.0, el in -1.5f64..1.5) {
            let cb = Codebook::new(Side::Ue, 4, 4, 2).unwrap();
            let u = array_response(az, el, 4, 4);
            let mags: Vec<f64> = (0..cb.len())
                .map(|k| cb.codeword(k).iter().zip(&u).map(|(c, x)| c.conj() * x).sum::<Complex64>().norm())
                .collect();
            let best = mags.iter().cloned().fold(0.0, f64::max);
            let pick = cb.nearest(&Angles::new(az, el));
            prop_assert!(mags[pick] >= best - 1e-9);
            let fast = cb.inner(pick, Angles::new(az, el).spatial_frequency()).norm();
            prop_assert!((fast - mags[pick]).abs() < 1e-9);
        }
    }
}
