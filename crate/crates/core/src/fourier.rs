//! Periodic Fourier tools on a uniform grid of `n` points over `[0, 2π)`.
//!
//! Coefficients are normalized so that `f_j = Σ c_k e^{i k θ_j}` with
//! `k` in `-n/2+1 ..= n/2`. The Nyquist mode is treated as `cos(nθ/2)`:
//! even symbols act on it, odd symbols (derivatives, conjugation) kill it.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fourier {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("n", &self.n).finish()
    }
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fourier {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Signed wavenumber stored at FFT index `idx`.
    pub fn wavenumber(&self, idx: usize) -> i64 {
        if idx <= self.n / 2 {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Applies a real, even Fourier multiplier `symbol(k)`.
    pub fn apply_even_symbol(&self, values: &[f64], symbol: impl Fn(i64) -> f64) -> Vec<f64> {
        let mut c = self.forward(values);
        for (idx, ck) in c.iter_mut().enumerate() {
            *ck *= symbol(self.wavenumber(idx));
        }
        self.inverse(&c)
    }

    /// Applies `cos kθ ↦ even(k) cos kθ` and `sin kθ ↦ odd(k) sin kθ` for `k ≥ 0`.
    pub fn apply_parity_symbol(
        &self,
        values: &[f64],
        symbol: impl Fn(u64) -> (f64, f64),
    ) -> Vec<f64> {
        let c = self.forward(values);
        let mut out = c.clone();
        for (idx, o) in out.iter_mut().enumerate() {
            let k = self.wavenumber(idx);
            let (even, odd) = symbol(k.unsigned_abs());
            if k == 0 || 2 * k.unsigned_abs() as usize == self.n {
                *o = c[idx] * even;
            } else {
                let mirror = (self.n - idx) % self.n;
                *o = 0.5 * (even + odd) * c[idx] + 0.5 * (even - odd) * c[mirror];
            }
        }
        self.inverse(&out)
    }

    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        let mut c = self.forward(values);
        for (idx, ck) in c.iter_mut().enumerate() {
            let k = self.wavenumber(idx);
            *ck = if 2 * k.unsigned_abs() as usize == self.n {
                Complex64::new(0.0, 0.0)
            } else {
                *ck * Complex64::new(0.0, k as f64)
            };
        }
        self.inverse(&c)
    }

    /// Harmonic conjugate: `cos kθ ↦ sin kθ`, `sin kθ ↦ -cos kθ`, constants ↦ 0.
    pub fn conjugate(&self, values: &[f64]) -> Vec<f64> {
        let mut c = self.forward(values);
        for (idx, ck) in c.iter_mut().enumerate() {
            let k = self.wavenumber(idx);
            *ck = if k == 0 || 2 * k.unsigned_abs() as usize == self.n {
                Complex64::new(0.0, 0.0)
            } else {
                *ck * Complex64::new(0.0, -(k.signum() as f64))
            };
        }
        self.inverse(&c)
    }

    /// Periodic antiderivative of the zero-mean part; the mean is returned separately.
    pub fn antiderivative(&self, values: &[f64]) -> (f64, Vec<f64>) {
        let mut c = self.forward(values);
        let mean = c[0].re;
        for (idx, ck) in c.iter_mut().enumerate() {
            let k = self.wavenumber(idx);
            *ck = if k == 0 || 2 * k.unsigned_abs() as usize == self.n {
                Complex64::new(0.0, 0.0)
            } else {
                *ck / Complex64::new(0.0, k as f64)
            };
        }
        (mean, self.inverse(&c))
    }

    /// Cardinal function of trigonometric interpolation centred at node 0.
    pub fn cardinal(&self, x: f64) -> f64 {
        let n = self.n as f64;
        let half = 0.5 * x;
        let s = half.sin();
        if s.abs() < 1e-14 {
            // x is a multiple of 2π
            return 1.0;
        }
        (n * half).sin() * half.cos() / (n * s)
    }

    /// Cardinal weights of all nodes for evaluation at `theta`.
    pub fn cardinal_weights(&self, theta: f64) -> Vec<f64> {
        let h = 2.0 * PI / self.n as f64;
        let mut out = vec![0.0; self.n];
        let t = theta.rem_euclid(2.0 * PI);
        let pos = t / h;
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-12 {
            out[(nearest as usize) % self.n] = 1.0;
            return out;
        }
        let sin_term = (0.5 * self.n as f64 * t).sin();
        for (j, o) in out.iter_mut().enumerate() {
            let half = 0.5 * (t - h * j as f64);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            *o = sign * sin_term * half.cos() / (self.n as f64 * half.sin());
        }
        out
    }

    /// Evaluates the trigonometric interpolant of `values` at `theta`.
    pub fn interpolate(&self, values: &[f64], theta: f64) -> f64 {
        self.cardinal_weights(theta)
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Largest coefficient magnitude with `|k| >= from`, relative to the largest overall.
    pub fn relative_tail(&self, values: &[f64], from: usize) -> f64 {
        let c = self.forward(values);
        let max = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        let tail = c
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.wavenumber(*idx).unsigned_abs() as usize >= from)
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max);
        tail / max
    }
}

pub fn grid_angle(n: usize, j: usize) -> f64 {
    2.0 * PI * j as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_trig_polynomial() {
        let f = Fourier::new(32);
        let x: Vec<f64> = (0..32).map(|j| (3.0 * grid_angle(32, j)).sin()).collect();
        let d = f.derivative(&x);
        for j in 0..32 {
            let expected = 3.0 * (3.0 * grid_angle(32, j)).cos();
            assert!((d[j] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_maps_cos_to_sin() {
        let f = Fourier::new(16);
        let x: Vec<f64> = (0..16).map(|j| (2.0 * grid_angle(16, j)).cos()).collect();
        let c = f.conjugate(&x);
        for j in 0..16 {
            assert!((c[j] - (2.0 * grid_angle(16, j)).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_is_exact_for_band_limited() {
        let f = Fourier::new(16);
        let g = |t: f64| 1.0 + (t).cos() - 0.5 * (5.0 * t).sin() + 0.25 * (8.0 * t).cos();
        let x: Vec<f64> = (0..16).map(|j| g(grid_angle(16, j))).collect();
        for &t in &[0.1f64, 1.3, 2.9, 6.0] {
            let exact = 1.0 + t.cos() - 0.5 * (5.0 * t).sin();
            // the Nyquist cosine interpolates as cos(8t) only at grid points
            let nyq = 0.25 * (8.0 * t).cos();
            assert!((f.interpolate(&x, t) - exact - nyq).abs() < 1e-12);
        }
        let w = f.cardinal_weights(0.77);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn parity_symbol_acts_on_cos_and_sin_separately() {
        let f = Fourier::new(32);
        let x: Vec<f64> = (0..32)
            .map(|j| (3.0 * grid_angle(32, j)).cos() + (5.0 * grid_angle(32, j)).sin())
            .collect();
        let y = f.apply_parity_symbol(&x, |k| (k as f64, -2.0 * k as f64));
        for j in 0..32 {
            let t = grid_angle(32, j);
            let e = 3.0 * (3.0 * t).cos() - 10.0 * (5.0 * t).sin();
            assert!((y[j] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let f = Fourier::new(64);
        let x: Vec<f64> = (0..64)
            .map(|j| (grid_angle(64, j)).sin() + 0.3 * (4.0 * grid_angle(64, j)).cos())
            .collect();
        let (_, a) = f.antiderivative(&f.derivative(&x));
        for j in 0..64 {
            assert!((a[j] - x[j]).abs() < 1e-12);
        }
    }
}
