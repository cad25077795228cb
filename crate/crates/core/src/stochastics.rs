//! Gaussian ingredients of the singular equation: Brownian mode increments,
//! the Ornstein–Uhlenbeck coefficient system of the linear solution, the
//! renormalization constant and the pieces of the renormalized square.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::geometry::BoundaryField;
use crate::rng::{self, tag};
use crate::steklov::{ModeCutoff, SteklovBasis};

/// Drift of `dz = -a(λ) z dt + λ^{-1/2} db`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dissipation {
    /// `a = λ²/2`; stationary variance `λ^{-3}`.
    #[default]
    HalfSquare,
    /// `a = λ²`, the `-L²` dissipation of the linear part of the split; stationary variance `λ^{-3}/2`.
    Square,
}

impl Dissipation {
    pub fn rate(self, lambda: f64) -> f64 {
        match self {
            Dissipation::HalfSquare => 0.5 * lambda * lambda,
            Dissipation::Square => lambda * lambda,
        }
    }

    pub fn stationary_variance(self, lambda: f64) -> f64 {
        1.0 / (lambda * 2.0 * self.rate(lambda))
    }
}

/// Brownian motions `b_k` sampled on a fine clock, so that runs at `Δt` and
/// `Δt/2` driven by paths with the same seed see the same motions.
#[derive(Debug, Clone)]
pub struct NoisePath {
    seed: u64,
    fine_dt: f64,
    bound: Option<(f64, u64)>,
    last_step: Option<u64>,
}

impl NoisePath {
    pub fn new(seed: u64, fine_dt: f64) -> Result<Self> {
        if !(fine_dt > 0.0 && fine_dt.is_finite()) {
            return Err(Error::Domain(format!("fine step must be positive, got {fine_dt}")));
        }
        Ok(NoisePath {
            seed,
            fine_dt,
            bound: None,
            last_step: None,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fine_dt(&self) -> f64 {
        self.fine_dt
    }

    /// Fine substeps per coarse step of size `dt`, binding the path to `dt`.
    fn bind(&mut self, dt: f64, step: u64) -> Result<u64> {
        let ratio = (dt / self.fine_dt).round();
        if ratio < 1.0 || (ratio * self.fine_dt - dt).abs() > 1e-9 * dt {
            return Err(Error::PathConsistency(format!(
                "step {dt} is not a multiple of the path's fine step {}",
                self.fine_dt
            )));
        }
        let ratio = ratio as u64;
        match self.bound {
            Some((bound, _)) if (bound - dt).abs() > 1e-12 * dt => {
                return Err(Error::PathConsistency(format!(
                    "path already consumed with Δt = {bound}, requested Δt = {dt}"
                )))
            }
            None => self.bound = Some((dt, ratio)),
            _ => {}
        }
        if self.last_step.is_some_and(|last| step < last) {
            return Err(Error::PathConsistency(format!(
                "step {step} requested after step {}",
                self.last_step.unwrap_or(0)
            )));
        }
        self.last_step = Some(step);
        Ok(ratio)
    }

    fn fine(&self, mode: usize, index: u64) -> f64 {
        self.fine_dt.sqrt() * rng::normal(self.seed, rng::stream(tag::BROWNIAN, mode as u64), index)
    }

    /// `b_k((step+1)Δt) - b_k(step·Δt)`.
    pub fn increment(&mut self, mode: usize, step: u64, dt: f64) -> Result<f64> {
        let r = self.bind(dt, step)?;
        Ok((step * r..(step + 1) * r).map(|i| self.fine(mode, i)).sum())
    }

    /// The fine increments making up one coarse step.
    pub fn fine_increments(&mut self, mode: usize, step: u64, dt: f64) -> Result<Vec<f64>> {
        let r = self.bind(dt, step)?;
        Ok((step * r..(step + 1) * r).map(|i| self.fine(mode, i)).collect())
    }

    /// Independent standard normal attached to a fine interval, for joint sampling.
    fn auxiliary(&self, mode: usize, index: u64) -> f64 {
        rng::normal(self.seed, rng::stream(tag::OU_AUX, mode as u64), index)
    }
}

/// Mode coefficients `z_1..z_K` of the linear solution `h^{lin} = Σ z_k ψ_k`.
#[derive(Debug, Clone)]
pub struct OuEnsemble {
    cutoff: ModeCutoff,
    lambdas: Vec<f64>,
    z: Vec<f64>,
    seed: u64,
    steps: u64,
    time: f64,
    dissipation: Dissipation,
    grid_id: u64,
}

/// `z_k ~ N(0, λ_k^{-3})` independently; mode `k` always uses the same stream,
/// so ensembles at different cutoffs agree on their common modes.
pub fn sample_stationary(basis: &SteklovBasis, cutoff: ModeCutoff, seed: u64) -> Result<OuEnsemble> {
    basis.check_cutoff(cutoff)?;
    let lambdas: Vec<f64> = (1..=cutoff.count()).map(|k| basis.eigenvalue(k)).collect();
    let z = lambdas
        .iter()
        .enumerate()
        .map(|(i, l)| l.powf(-1.5) * rng::normal(seed, rng::stream(tag::OU_INIT, i as u64 + 1), 0))
        .collect();
    Ok(OuEnsemble {
        cutoff,
        lambdas,
        z,
        seed,
        steps: 0,
        time: 0.0,
        dissipation: Dissipation::default(),
        grid_id: basis.grid_id(),
    })
}

impl OuEnsemble {
    pub fn with_dissipation(mut self, dissipation: Dissipation) -> Self {
        self.dissipation = dissipation;
        self
    }

    /// Zero coefficients (the degenerate coupling).
    pub fn zeroed(mut self) -> Self {
        self.z.iter_mut().for_each(|z| *z = 0.0);
        self
    }

    pub fn cutoff(&self) -> ModeCutoff {
        self.cutoff
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.z
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.z
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dissipation(&self) -> Dissipation {
        self.dissipation
    }

    /// Exact Gaussian transition over `dt` with the ensemble's own noise.
    pub fn ou_step(&mut self, dt: f64) -> Result<()> {
        if !(dt >= 0.0) {
            return Err(Error::Domain(format!("OU step must be nonnegative, got {dt}")));
        }
        if dt == 0.0 {
            return Ok(());
        }
        for (i, (z, l)) in self.z.iter_mut().zip(&self.lambdas).enumerate() {
            let a = self.dissipation.rate(*l);
            let decay = (-a * dt).exp();
            let var = (1.0 - (-2.0 * a * dt).exp()) / (2.0 * a * l);
            let xi = rng::normal(self.seed, rng::stream(tag::OU_STEP, i as u64 + 1), self.steps);
            *z = decay * *z + var.sqrt() * xi;
        }
        self.steps += 1;
        self.time += dt;
        Ok(())
    }

    /// Exact transition driven by the Brownian motions of `path`.
    ///
    /// On each fine interval of length `h` the pair `(Δb, ∫e^{-a(h-s)}db)` is
    /// jointly Gaussian; the stochastic convolution is drawn conditionally on
    /// the increment the path already fixes.
    pub fn ou_step_driven(&mut self, path: &mut NoisePath, step: u64, dt: f64) -> Result<()> {
        self.ou_step_driven_scaled(path, step, dt, 1.0)
    }

    /// As [`Self::ou_step_driven`] with the noise multiplied by `amplitude`.
    pub fn ou_step_driven_scaled(
        &mut self,
        path: &mut NoisePath,
        step: u64,
        dt: f64,
        amplitude: f64,
    ) -> Result<()> {
        let h = path.fine_dt();
        for (i, (z, l)) in self.z.iter_mut().zip(&self.lambdas).enumerate() {
            let mode = i + 1;
            let a = self.dissipation.rate(*l);
            let db = path.fine_increments(mode, step, dt)?;
            let r = db.len() as u64;
            let c = (1.0 - (-a * h).exp()) / (a * h);
            let var_i = (1.0 - (-2.0 * a * h).exp()) / (2.0 * a);
            let sd = (var_i - c * c * h).max(0.0).sqrt();
            let mut acc = 0.0;
            for (j, b) in db.iter().enumerate() {
                let conv = c * b + sd * path.auxiliary(mode, step * r + j as u64);
                acc += (-a * (dt - (j as f64 + 1.0) * h)).exp() * conv;
            }
            *z = (-a * dt).exp() * *z + amplitude * acc / l.sqrt();
        }
        self.steps += 1;
        self.time += dt;
        Ok(())
    }

    pub fn linear_field(&self, basis: &SteklovBasis) -> Result<BoundaryField> {
        if basis.grid_id() != self.grid_id {
            return Err(Error::GridMismatch);
        }
        let mut c = vec![0.0; basis.len()];
        c[1..=self.z.len()].copy_from_slice(&self.z);
        Ok(BoundaryField::from_raw(
            basis.synthesize(&c, 1..=self.z.len()),
            self.grid_id,
        ))
    }

    /// `Σ z_k ∂_s ψ_k`.
    pub fn linear_gradient(&self, basis: &SteklovBasis) -> Vec<f64> {
        let mut g = vec![0.0; basis.len()];
        for (i, z) in self.z.iter().enumerate() {
            for (o, d) in g.iter_mut().zip(basis.gradient_values(i + 1).iter()) {
                *o += z * d;
            }
        }
        g
    }
}

/// `C_η = (π/2) Σ_{ℓ=1}^{K} (λ_{ℓ+1} - λ_ℓ) / λ_{ℓ+1}` with `K = ⌊η⁻¹⌋`,
/// eigenvalues counted with multiplicity.
pub fn renorm_constant(basis: &SteklovBasis, cutoff: ModeCutoff) -> Result<f64> {
    let k = cutoff.count();
    if k + 1 > basis.resolved_modes() {
        return Err(Error::Resolution(format!(
            "C_η needs λ_{} but only {} modes are resolved",
            k + 1,
            basis.resolved_modes()
        )));
    }
    let l = basis.eigenvalues();
    Ok(FRAC_PI_2 * (1..=k).map(|i| (l[i + 1] - l[i]) / l[i + 1]).sum::<f64>())
}

/// The three parts of `|∇h^{lin}|² = R + F1 + F2`.
#[derive(Debug, Clone)]
pub struct SquareParts {
    /// `Σ λ_j^{-3} |∇ψ_j|²`.
    pub r: Vec<f64>,
    /// `Σ_{j≠ℓ} z_j z_ℓ ∇ψ_j·∇ψ_ℓ`.
    pub f1: Vec<f64>,
    /// `Σ (z_j² - λ_j^{-3}) |∇ψ_j|²`.
    pub f2: Vec<f64>,
}

pub fn renormalized_square_parts(ens: &OuEnsemble, basis: &SteklovBasis) -> Result<SquareParts> {
    if basis.grid_id() != ens.grid_id {
        return Err(Error::GridMismatch);
    }
    let n = basis.len();
    let k = ens.z.len();
    let grads: Vec<Vec<f64>> = (1..=k)
        .map(|j| basis.gradient_values(j).iter().copied().collect())
        .collect();
    let mut r = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    for j in 0..k {
        let v = ens.lambdas[j].powi(-3);
        let zz = ens.z[j] * ens.z[j];
        for x in 0..n {
            let g2 = grads[j][x] * grads[j][x];
            r[x] += v * g2;
            f2[x] += (zz - v) * g2;
        }
        for l in 0..k {
            if l == j {
                continue;
            }
            let zjl = ens.z[j] * ens.z[l];
            for x in 0..n {
                f1[x] += zjl * grads[j][x] * grads[l][x];
            }
        }
    }
    Ok(SquareParts { r, f1, f2 })
}

/// `Σ_{k≤K} λ_k^{-1/2} Δb_k ψ_k` for step `step` of size `dt`.
pub fn noise_increment(
    path: &mut NoisePath,
    basis: &SteklovBasis,
    cutoff: ModeCutoff,
    dt: f64,
    step: u64,
) -> Result<BoundaryField> {
    basis.check_cutoff(cutoff)?;
    let mut c = vec![0.0; basis.len()];
    for (k, ck) in c.iter_mut().enumerate().take(cutoff.count() + 1).skip(1) {
        *ck = path.increment(k, step, dt)? / basis.eigenvalue(k).sqrt();
    }
    Ok(BoundaryField::from_raw(
        basis.synthesize(&c, 1..=cutoff.count()),
        basis.grid_id(),
    ))
}

/// Analytic `E‖h^{K1,lin} - h^{K2,lin}‖²_{H^α} = Σ_{K1<k≤K2} (1+λ_k)^{2α} λ_k^{-3}`.
pub fn tail_sum(basis: &SteklovBasis, k1: ModeCutoff, k2: ModeCutoff, alpha: f64) -> f64 {
    (k1.count() + 1..=k2.count())
        .map(|k| {
            let l = basis.eigenvalue(k);
            (1.0 + l).powf(2.0 * alpha) * l.powi(-3)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ClosedCurve;
    use std::f64::consts::PI;

    fn disk(n: usize) -> (ClosedCurve, SteklovBasis) {
        let c = ClosedCurve::from_preset(&"disk".parse().unwrap(), n).unwrap();
        let b = SteklovBasis::from_curve(&c).unwrap();
        (c, b)
    }

    #[test]
    fn renorm_constant_on_disk() {
        let (_, b) = disk(64);
        assert!((renorm_constant(&b, ModeCutoff(3)).unwrap() - PI / 4.0).abs() < 1e-10);
        assert!((renorm_constant(&b, ModeCutoff(4)).unwrap() - 5.0 * PI / 12.0).abs() < 1e-10);
        assert!(renorm_constant(&b, ModeCutoff(16)).is_err());
    }

    #[test]
    fn ensemble_is_reproducible_and_coupled() {
        let (_, b) = disk(64);
        let a = sample_stationary(&b, ModeCutoff(4), 9).unwrap();
        let c = sample_stationary(&b, ModeCutoff(8), 9).unwrap();
        assert_eq!(a.coefficients(), &c.coefficients()[..4]);
        let mut a2 = a.clone();
        a2.ou_step(0.0).unwrap();
        assert_eq!(a2.coefficients(), a.coefficients());
    }

    #[test]
    fn square_parts_sum_to_square_gradient() {
        let (c, b) = disk(64);
        let ens = sample_stationary(&b, ModeCutoff(6), 3).unwrap();
        let p = renormalized_square_parts(&ens, &b).unwrap();
        let h = ens.linear_field(&b).unwrap();
        let g = c.arclength_derivative(h.values());
        for x in 0..64 {
            assert!((g[x] * g[x] - p.r[x] - p.f1[x] - p.f2[x]).abs() < 1e-10);
        }
    }

    #[test]
    fn single_mode_parts() {
        let (c, b) = disk(64);
        let ens = sample_stationary(&b, ModeCutoff(1), 3).unwrap();
        let p = renormalized_square_parts(&ens, &b).unwrap();
        assert!(p.f1.iter().all(|v| *v == 0.0));
        // ψ₁ spans the λ=1 space: |∇ψ₁|² = 2 sin²(θ - θ₀) for some phase
        let mean_r = c.mean(&p.r);
        assert!((mean_r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn path_rejects_mixed_steps() {
        let mut p = NoisePath::new(1, 1e-3).unwrap();
        let a = p.increment(1, 0, 2e-3).unwrap();
        assert!(matches!(p.increment(1, 1, 1e-3), Err(Error::PathConsistency(_))));
        let mut q = NoisePath::new(1, 1e-3).unwrap();
        let b = q.increment(1, 0, 1e-3).unwrap() + q.increment(1, 1, 1e-3).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(matches!(q.increment(1, 0, 1e-3), Err(Error::PathConsistency(_))));
        assert!(NoisePath::new(1, 1e-3).unwrap().increment(1, 0, 1.5e-3).is_err());
    }

    #[test]
    fn noise_has_no_mean() {
        let (c, b) = disk(64);
        let mut p = NoisePath::new(4, 0.01).unwrap();
        let f = noise_increment(&mut p, &b, ModeCutoff(10), 0.01, 0).unwrap();
        assert!(c.mean(f.values()).abs() < 1e-12);
    }

    #[test]
    fn driven_step_has_exact_variance() {
        let (_, b) = disk(64);
        let reps = 20_000u64;
        let (dt, fine) = (0.2, 0.05);
        let mut s = 0.0;
        for r in 0..reps {
            let mut e = sample_stationary(&b, ModeCutoff(3), r).unwrap().zeroed();
            e = e.with_dissipation(Dissipation::Square);
            let mut p = NoisePath::new(r + 1_000_000, fine).unwrap();
            e.ou_step_driven(&mut p, 0, dt).unwrap();
            s += e.coefficients()[2].powi(2);
        }
        let l: f64 = 2.0;
        let a = l * l;
        let exact = (1.0 - (-2.0 * a * dt).exp()) / (2.0 * a * l);
        let est = s / reps as f64;
        assert!((est / exact - 1.0).abs() < 0.05, "{est} vs {exact}");
    }
}
