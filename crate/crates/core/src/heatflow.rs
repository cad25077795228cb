//! Boundary heat semigroup `e^{tΔ}` and exponential-Euler integration.
//!
//! The Laplace–Beltrami operator is `∂²_s` in arclength, assembled in the
//! weak form `⟨Δf, g⟩ = -⟨∂_s f, ∂_s g⟩` with spectral arclength derivatives.
//! That matrix is symmetric in the weighted inner product by construction and
//! is diagonalized once, so every semigroup, Duhamel or Laplacian action is an
//! exact function of a fixed spectrum: mass conservation, self-adjointness
//! and the semigroup law then hold to rounding. On the disk it reduces to the
//! Fourier symbol `-k²`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryField, ClosedCurve};
use crate::rng;
use crate::steklov::SteklovBasis;

#[derive(Debug, Clone)]
pub struct HeatPropagator {
    grid_id: u64,
    sqrt_w: Vec<f64>,
    inv_sqrt_w: Vec<f64>,
    /// Orthonormal eigenvectors of the weighted-symmetric Laplacian, in columns.
    modes: DMatrix<f64>,
    /// Nonnegative decay rates, `Δ v_k = -rate_k v_k`.
    rates: Vec<f64>,
}

impl HeatPropagator {
    pub fn new(curve: &ClosedCurve) -> Result<Self> {
        let n = curve.len();
        let w = curve.normalized_measure();
        let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let inv_sqrt_w: Vec<f64> = sqrt_w.iter().map(|x| x.recip()).collect();

        // M = W^{1/2} ∂_s W^{-1/2}, so that -MᵀM = W^{1/2} Δ W^{-1/2}
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let d = curve.arclength_derivative(&e);
            for i in 0..n {
                m[(i, j)] = sqrt_w[i] * d[i] * inv_sqrt_w[j];
            }
            e[j] = 0.0;
        }
        let mut sym = -(m.transpose() * &m);

        // ∂_θ annihilates the sampled cos(Nθ/2); give it its arclength rate
        let v0 = DVector::from_column_slice(&sqrt_w);
        let mut nyq = DVector::from_fn(n, |j, _| if j % 2 == 0 { sqrt_w[j] } else { -sqrt_w[j] });
        nyq -= &v0 * v0.dot(&nyq);
        nyq /= nyq.norm();
        let h = curve.conformal_weight();
        let kappa = (n as f64 / 2.0).powi(2)
            * w.iter().zip(h).map(|(w, h)| w / (h * h)).sum::<f64>();
        sym -= (&nyq * nyq.transpose()) * kappa;

        // constants are exactly harmonic: deflate W^{1/2}·1
        let sv = &sym * &v0;
        let c = v0.dot(&sv);
        sym -= &sv * v0.transpose() + &v0 * sv.transpose();
        sym += (&v0 * v0.transpose()) * c;

        let eig = SymmetricEigen::try_new(sym, 1e-15, 10_000)
            .ok_or_else(|| Error::Numerical("Laplace–Beltrami eigensolver failed".into()))?;
        let null = (0..n)
            .max_by(|&a, &b| {
                let da = eig.eigenvectors.column(a).dot(&v0).abs();
                let db = eig.eigenvectors.column(b).dot(&v0).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        let mut order: Vec<usize> = (0..n).filter(|&i| i != null).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut modes = DMatrix::zeros(n, n);
        let mut rates = Vec::with_capacity(n);
        modes.set_column(0, &v0);
        rates.push(0.0);
        for (k, &idx) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(idx).into_owned();
            v -= &v0 * v0.dot(&v);
            v /= v.norm();
            modes.set_column(k + 1, &v);
            rates.push((-eig.eigenvalues[idx]).max(0.0));
        }
        if rates.get(1).is_some_and(|r| *r < 1e-8) {
            return Err(Error::Numerical(
                "Laplace–Beltrami kernel is not one-dimensional".into(),
            ));
        }
        Ok(HeatPropagator {
            grid_id: curve.id(),
            sqrt_w,
            inv_sqrt_w,
            modes,
            rates,
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    /// Decay rates `-spec(Δ)` in increasing order; the first is 0.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Orthonormal mode coefficients; the first is the weighted mean, and
    /// constants map exactly onto it.
    pub fn to_modes(&self, f: &[f64]) -> Vec<f64> {
        let mean: f64 = f.iter().zip(&self.sqrt_w).map(|(a, s)| a * s * s).sum();
        let v = DVector::from_iterator(
            f.len(),
            f.iter().zip(&self.sqrt_w).map(|(a, s)| (a - mean) * s),
        );
        let mut c: Vec<f64> = self.modes.tr_mul(&v).iter().copied().collect();
        c[0] = mean;
        c
    }

    pub fn from_modes(&self, c: &[f64]) -> Vec<f64> {
        let mut rest = DVector::from_column_slice(c);
        rest[0] = 0.0;
        let v = &self.modes * rest;
        v.iter().zip(&self.inv_sqrt_w).map(|(a, s)| c[0] + a * s).collect()
    }

    /// `m(-Δ) f` for a function of the decay rate.
    pub fn apply_symbol(&self, f: &[f64], m: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut c = self.to_modes(f);
        c.iter_mut().zip(&self.rates).for_each(|(c, r)| *c *= m(*r));
        self.from_modes(&c)
    }

    pub fn heat(&self, f: &[f64], t: f64) -> Vec<f64> {
        self.apply_symbol(f, |r| (-r * t).exp())
    }

    pub fn heat_apply(&self, f: &BoundaryField, t: f64) -> Result<BoundaryField> {
        self.check(f)?;
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("heat time must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(f.clone());
        }
        Ok(BoundaryField::from_raw(self.heat(f.values(), t), self.grid_id))
    }

    /// Dense matrix of `e^{tΔ}` acting on nodal values.
    pub fn operator(&self, t: f64) -> DMatrix<f64> {
        let n = self.len();
        let scaled = DMatrix::from_fn(n, n, |i, k| {
            self.inv_sqrt_w[i] * self.modes[(i, k)] * (-self.rates[k] * t).exp()
        });
        let right = DMatrix::from_fn(n, n, |k, j| self.modes[(j, k)] * self.sqrt_w[j]);
        scaled * right
    }

    pub fn laplace_beltrami(&self, f: &[f64]) -> Vec<f64> {
        self.apply_symbol(f, |r| -r)
    }

    /// Midpoint-rule weights of `∫₀^{dt} e^{(dt-s)Δ} ds` for every mode.
    pub fn duhamel_weights(&self, dt: f64, substeps: usize) -> Vec<f64> {
        let m = substeps.max(1);
        let h = dt / m as f64;
        self.rates
            .iter()
            .map(|r| {
                (0..m)
                    .map(|i| h * (-r * (dt - (i as f64 + 0.5) * h)).exp())
                    .sum()
            })
            .collect()
    }

    /// Exponential-Euler step with forcing sampled at the midpoint of each substep.
    pub fn duhamel_step(
        &self,
        state: &BoundaryField,
        forcing: impl Fn(f64) -> BoundaryField,
        t0: f64,
        t1: f64,
        substeps: usize,
    ) -> Result<BoundaryField> {
        self.check(state)?;
        if !(t1 > t0) {
            return Err(Error::Domain(format!("need t1 > t0, got [{t0}, {t1}]")));
        }
        let dt = t1 - t0;
        let m = substeps.max(1);
        let h = dt / m as f64;
        let mut c = self.to_modes(state.values());
        c.iter_mut()
            .zip(&self.rates)
            .for_each(|(c, r)| *c *= (-r * dt).exp());
        for i in 0..m {
            let s = t0 + (i as f64 + 0.5) * h;
            let g = forcing(s);
            self.check(&g)?;
            let gc = self.to_modes(g.values());
            for ((c, g), r) in c.iter_mut().zip(&gc).zip(&self.rates) {
                *c += h * (-r * (t1 - s)).exp() * g;
            }
        }
        Ok(BoundaryField::from_raw(self.from_modes(&c), self.grid_id))
    }

    /// Precomputed exponential-Euler step of fixed size with frozen forcing.
    pub fn stepper(&self, dt: f64, substeps: usize) -> ExpEuler<'_> {
        ExpEuler {
            prop: self,
            decay: self.rates.iter().map(|r| (-r * dt).exp()).collect(),
            duhamel: self.duhamel_weights(dt, substeps),
        }
    }

    fn check(&self, f: &BoundaryField) -> Result<()> {
        if f.grid_id() != self.grid_id || f.len() != self.len() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Compares the `H^{α1} → H^{α2}` norm of `e^{tΔ}` with `t^{-(α2-α1)/2}`.
    pub fn smoothing_norm_check(
        &self,
        basis: &SteklovBasis,
        alpha1: f64,
        alpha2: f64,
        t: f64,
        samples: usize,
        seed: u64,
    ) -> Result<SmoothingReport> {
        if basis.grid_id() != self.grid_id {
            return Err(Error::GridMismatch);
        }
        if !(alpha2 >= alpha1) || !(t > 0.0) {
            return Err(Error::Domain(format!(
                "need α2 ≥ α1 and t > 0, got α1={alpha1}, α2={alpha2}, t={t}"
            )));
        }
        let k_max = basis.resolved_modes();
        let n = self.len();
        let weight = |k: usize, a: f64| (1.0 + basis.eigenvalue(k)).powf(a);

        // Galerkin matrix of the weighted heat operator on resolved Steklov modes
        let mut m = DMatrix::zeros(k_max + 1, k_max + 1);
        for j in 0..=k_max {
            let psi: Vec<f64> = basis.eigenfield_values(j).iter().copied().collect();
            let hp = self.heat(&psi, t);
            let c = basis.coefficients(&hp);
            for i in 0..=k_max {
                m[(i, j)] = weight(i, alpha2) * c[i] / weight(j, alpha1);
            }
        }
        let operator_norm = m.singular_values().max();

        let mut random_norm: f64 = 0.0;
        for s in 0..samples {
            let mut c = vec![0.0; n];
            for (k, ck) in c.iter_mut().enumerate().take(k_max + 1) {
                *ck = rng::normal(seed, rng::stream(rng::tag::TEST_FIELD, s as u64), k as u64)
                    / weight(k, alpha1);
            }
            let f = basis.synthesize(&c, 0..=k_max);
            let hf = self.heat(&f, t);
            let ratio = basis.sobolev_norm(&hf, alpha2) / basis.sobolev_norm(&f, alpha1);
            random_norm = random_norm.max(ratio);
        }
        let reference = t.powf(-(alpha2 - alpha1) / 2.0);
        Ok(SmoothingReport {
            alpha1,
            alpha2,
            t,
            operator_norm,
            random_norm,
            reference,
            ratio: operator_norm / reference,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingReport {
    pub alpha1: f64,
    pub alpha2: f64,
    pub t: f64,
    /// Spectral norm of the operator on resolved modes.
    pub operator_norm: f64,
    /// Largest ratio observed on random band-limited fields.
    pub random_norm: f64,
    pub reference: f64,
    pub ratio: f64,
}

/// `F ↦ e^{dtΔ}F + Σ_i h e^{(dt - s_i)Δ} G` for a forcing `G` frozen over the step.
#[derive(Debug, Clone)]
pub struct ExpEuler<'a> {
    prop: &'a HeatPropagator,
    decay: Vec<f64>,
    duhamel: Vec<f64>,
}

impl ExpEuler<'_> {
    pub fn advance(&self, state: &[f64], forcing: &[f64]) -> Vec<f64> {
        let c = self.prop.to_modes(state);
        let g = self.prop.to_modes(forcing);
        let out: Vec<f64> = c
            .iter()
            .zip(&g)
            .zip(self.decay.iter().zip(&self.duhamel))
            .map(|((c, g), (e, d))| e * c + d * g)
            .collect();
        self.prop.from_modes(&out)
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    pub fn duhamel(&self) -> &[f64] {
        &self.duhamel
    }

    /// Duhamel term alone.
    pub fn integrate(&self, forcing: &[f64]) -> Vec<f64> {
        let g = self.prop.to_modes(forcing);
        let out: Vec<f64> = g.iter().zip(&self.duhamel).map(|(g, d)| d * g).collect();
        self.prop.from_modes(&out)
    }

    pub fn propagate(&self, state: &[f64]) -> Vec<f64> {
        let c = self.prop.to_modes(state);
        let out: Vec<f64> = c.iter().zip(&self.decay).map(|(c, e)| e * c).collect();
        self.prop.from_modes(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(p: &str, n: usize) -> (ClosedCurve, HeatPropagator) {
        let c = ClosedCurve::from_preset(&p.parse().unwrap(), n).unwrap();
        let h = HeatPropagator::new(&c).unwrap();
        (c, h)
    }

    #[test]
    fn circle_modes_decay_by_symbol() {
        let (c, h) = setup("disk", 64);
        for k in [1.0, 3.0, 7.0] {
            let f = c.field_fn(|t| (k * t).cos());
            let out = h.heat_apply(&f, 0.05).unwrap();
            for (a, b) in out.values().iter().zip(f.values()) {
                assert!((a - (-k * k * 0.05f64).exp() * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constants_and_identity() {
        for p in ["disk", "ellipse:2:1"] {
            let (c, h) = setup(p, 128);
            let out = h.heat_apply(&c.constant(3.0), 0.7).unwrap();
            assert!(out.values().iter().all(|v| (v - 3.0).abs() < 1e-10), "{p}");
            let f = c.field_fn(|t| t.sin() + 0.2 * (5.0 * t).cos());
            assert_eq!(h.heat_apply(&f, 0.0).unwrap().values(), f.values());
            assert!(h.heat_apply(&f, -1.0).is_err());
        }
    }

    #[test]
    fn ellipse_laplacian_matches_arclength_second_derivative() {
        let (c, h) = setup("ellipse:1.5:1", 256);
        // f = x-coordinate restricted to the curve: ∂²_s x = -κ n_x
        let x: Vec<f64> = c.nodes().iter().map(|p| p[0]).collect();
        let lap = h.laplace_beltrami(&x);
        let d1 = c.arclength_derivative(&x);
        let d2 = c.arclength_derivative(&d1);
        let err = lap.iter().zip(&d2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn duhamel_with_constant_forcing_is_linear_growth() {
        let (c, h) = setup("ellipse:1.5:1", 64);
        let out = h
            .duhamel_step(&c.zeros(), |_| c.constant(2.0), 0.0, 0.3, 4)
            .unwrap();
        assert!(out.values().iter().all(|v| (v - 0.6).abs() < 1e-12));
    }

    #[test]
    fn duhamel_frozen_mode_matches_ode() {
        let (c, h) = setup("disk", 32);
        let g = c.field_fn(f64::cos);
        let t = 0.5;
        let out = h.duhamel_step(&c.zeros(), |_| g.clone(), 0.0, t, 64).unwrap();
        let exact = 1.0 - (-t).exp();
        for (a, b) in out.values().iter().zip(g.values()) {
            // midpoint rule error ~ t³/24/m²
            assert!((a - exact * b).abs() < 1e-5);
        }
    }

    #[test]
    fn smoothing_contracts_on_equal_indices() {
        let (c, h) = setup("disk", 64);
        let b = SteklovBasis::from_curve(&c).unwrap();
        let r = h.smoothing_norm_check(&b, 0.5, 0.5, 0.1, 20, 1).unwrap();
        assert!(r.operator_norm <= 1.0 + 1e-12);
        assert!(r.random_norm <= r.operator_norm + 1e-12);
    }
}
