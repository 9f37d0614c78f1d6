//! Periodic collocation grid on the square torus and its Fourier transforms.
//!
//! Physical values are stored row-major with the `x2` index as the row:
//! `data[i2 * n + i1]` is the value at `(i1 * dx, i2 * dx)`. Spectral
//! coefficients use the same layout over integer frequencies `(m1, m2)` in
//! FFT order. Forward transforms are normalized so that coefficients are the
//! Fourier coefficients of the trigonometric interpolant.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Coordinate direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

pub struct Grid {
    n: usize,
    length: f64,
    freqs: Vec<i64>,
    wavenumbers: Vec<f64>,
    deriv_wavenumbers: Vec<f64>,
    dealias_mask: Vec<bool>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl Grid {
    /// Build an `n x n` grid on `[0, length)^2`.
    pub fn new(n: usize, length: f64) -> Result<Arc<Grid>> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n must be even and at least 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "length must be positive, got {length}"
            )));
        }
        let half = (n / 2) as i64;
        let freqs: Vec<i64> = (0..n as i64)
            .map(|i| if i < half { i } else { i - n as i64 })
            .collect();
        let scale = 2.0 * std::f64::consts::PI / length;
        let wavenumbers: Vec<f64> = freqs.iter().map(|&m| m as f64 * scale).collect();
        // The Nyquist mode has no real-valued odd derivative.
        let deriv_wavenumbers: Vec<f64> = freqs
            .iter()
            .map(|&m| if m == -half { 0.0 } else { m as f64 * scale })
            .collect();
        let cut = (n / 3) as i64;
        let mut dealias_mask = vec![false; n * n];
        for i2 in 0..n {
            for i1 in 0..n {
                dealias_mask[i2 * n + i1] = freqs[i1].abs() <= cut && freqs[i2].abs() <= cut;
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Arc::new(Grid {
            n,
            length,
            freqs,
            wavenumbers,
            deriv_wavenumbers,
            dealias_mask,
            fwd,
            inv,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Domain area.
    pub fn area(&self) -> f64 {
        self.length * self.length
    }

    /// Integer frequencies per axis in FFT order, spanning `-n/2..n/2`.
    pub fn freqs(&self) -> &[i64] {
        &self.freqs
    }

    /// Largest retained integer frequency per axis under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias_mask
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Physical wavenumber pair of spectral index `idx`.
    #[inline]
    pub fn k(&self, idx: usize) -> (f64, f64) {
        (
            self.wavenumbers[idx % self.n],
            self.wavenumbers[idx / self.n],
        )
    }

    /// Wavenumber pair used by differential operators (Nyquist zeroed).
    #[inline]
    pub fn kd(&self, idx: usize) -> (f64, f64) {
        (
            self.deriv_wavenumbers[idx % self.n],
            self.deriv_wavenumbers[idx / self.n],
        )
    }

    /// Integer frequency pair of spectral index `idx`.
    #[inline]
    pub fn mode(&self, idx: usize) -> (i64, i64) {
        (self.freqs[idx % self.n], self.freqs[idx / self.n])
    }

    /// Spectral index of integer frequency pair `(m1, m2)`.
    pub fn index_of(&self, m1: i64, m2: i64) -> usize {
        let n = self.n as i64;
        let wrap = |m: i64| (((m % n) + n) % n) as usize;
        wrap(m2) * self.n + wrap(m1)
    }

    /// Row transforms, then row transforms of the transpose, using `tmp` and
    /// `scratch` as work space. Leaves the result in `buf`.
    fn transform_2d(&self, plan: &dyn Fft<f64>, buf: &mut [Complex64]) {
        let n = self.n;
        let mut tmp = vec![Complex64::new(0.0, 0.0); buf.len()];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        transpose_into(buf, &mut tmp, n);
        plan.process_with_scratch(&mut tmp, &mut scratch);
        transpose_into(&tmp, buf, n);
    }

    /// Forward 2D transform of real grid values.
    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(data.len(), self.len());
        let norm = 1.0 / self.len() as f64;
        let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x * norm, 0.0)).collect();
        self.transform_2d(self.fwd.as_ref(), &mut buf);
        buf
    }

    /// Inverse 2D transform; the imaginary part is discarded, which projects
    /// the coefficients onto their Hermitian-symmetric part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.len());
        let mut buf = coeffs.to_vec();
        self.transform_2d(self.inv.as_ref(), &mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}

/// Blocked out-of-place transpose of an `n x n` matrix.
fn transpose_into(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 16;
    for rb in (0..n).step_by(B) {
        for cb in (0..n).step_by(B) {
            for r in rb..(rb + B).min(n) {
                for c in cb..(cb + B).min(n) {
                    dst[c * n + r] = src[r * n + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn frequencies_for_n8() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let mut f = g.freqs().to_vec();
        f.sort();
        assert_eq!(f, vec![-4, -3, -2, -1, 0, 1, 2, 3]);
    }

    #[test]
    fn dealias_cutoff_n64() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        assert_eq!(g.dealias_cutoff(), 21);
        assert!(g.dealias_mask()[g.index_of(21, -21)]);
        assert!(!g.dealias_mask()[g.index_of(22, 0)]);
        let kept = g.dealias_mask().iter().filter(|&&b| b).count();
        assert_eq!(kept, 43 * 43);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(7, 2.0 * PI).is_err());
        assert!(Grid::new(6, 2.0 * PI).is_err());
        assert!(Grid::new(16, 0.0).is_err());
        assert!(Grid::new(16, -1.0).is_err());
    }

    #[test]
    fn single_mode_coefficient() {
        let g = Grid::new(16, 2.0 * PI).unwrap();
        let n = g.n();
        let data: Vec<f64> = (0..g.len())
            .map(|idx| (2.0 * g.coord(idx % n)).cos())
            .collect();
        let c = g.forward(&data);
        assert!((c[g.index_of(2, 0)].re - 0.5).abs() < 1e-15);
        assert!((c[g.index_of(-2, 0)].re - 0.5).abs() < 1e-15);
        let back = g.inverse(&c);
        for (a, b) in back.iter().zip(&data) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
