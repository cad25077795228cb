//! Mild-form integrators for the regularized KPZ limit, the Galerkin singular
//! equation and its Da Prato–Debussche split, plus the renormalized square `Ψ^η`.
//!
//! Every solver uses exponential Euler: the forcing is frozen at the start of
//! a step and integrated against the heat semigroup with the midpoint rule.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryField, ClosedCurve};
use crate::heatflow::HeatPropagator;
use crate::parallel;
use crate::rng;
use crate::steklov::{ModeCutoff, SteklovBasis};
use crate::stochastics::{renorm_constant, sample_stationary, NoisePath, OuEnsemble};

/// Symmetric kernel `K(x, z)` with unit mass `Σ_j K(x, z_j) w_j = 1`.
#[derive(Debug, Clone)]
pub struct KernelK {
    matrix: DMatrix<f64>,
    weights: Vec<f64>,
    rho: Option<f64>,
    grid_id: u64,
}

const LOBE_TOLERANCE: f64 = 1e-6;

/// Heat-kernel bump `e^{ρΔ}(x, z)`, symmetrized and balanced to unit mass.
pub fn make_kernel(curve: &ClosedCurve, heat: &HeatPropagator, rho: f64) -> Result<KernelK> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("kernel bandwidth must be positive, got {rho}")));
    }
    if heat.grid_id() != curve.id() {
        return Err(Error::GridMismatch);
    }
    let n = curve.len();
    let w = curve.normalized_measure();
    let h = heat.operator(rho);
    let mut k = DMatrix::from_fn(n, n, |i, j| h[(i, j)] / w[j]);
    let min = k.min();
    if min < -LOBE_TOLERANCE {
        return Err(Error::Resolution(format!(
            "kernel with ρ = {rho} has negative lobes down to {min:.2e}; increase ρ or N"
        )));
    }
    // symmetric Sinkhorn: K ← D K D with D = diag(row mass)^{-1/2}
    for _ in 0..200 {
        k = 0.5 * (&k + k.transpose());
        let mass: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| k[(i, j)] * w[j]).sum())
            .collect();
        let worst = mass.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
        if worst < 1e-15 {
            break;
        }
        let d: Vec<f64> = mass.iter().map(|m| m.sqrt().recip()).collect();
        k = DMatrix::from_fn(n, n, |i, j| d[i] * k[(i, j)] * d[j]);
    }
    Ok(KernelK {
        matrix: k,
        weights: w.to_vec(),
        rho: Some(rho),
        grid_id: curve.id(),
    })
}

impl KernelK {
    /// `K ≡ 1`, the infinite-bandwidth limit.
    pub fn constant(curve: &ClosedCurve) -> Self {
        let n = curve.len();
        KernelK {
            matrix: DMatrix::from_element(n, n, 1.0),
            weights: curve.normalized_measure().to_vec(),
            rho: None,
            grid_id: curve.id(),
        }
    }

    /// `K = 1 + a ψ_k ⊗ ψ_k`.
    pub fn one_mode(basis: &SteklovBasis, k: usize, a: f64) -> Result<Self> {
        if k == 0 || k >= basis.len() {
            return Err(Error::Domain(format!("mode {k} must be a nonzero Steklov mode")));
        }
        let psi = basis.eigenfield_values(k);
        let n = basis.len();
        Ok(KernelK {
            matrix: DMatrix::from_fn(n, n, |i, j| 1.0 + a * psi[i] * psi[j]),
            weights: basis.measure().to_vec(),
            rho: None,
            grid_id: basis.grid_id(),
        })
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Column `K(·, z_j)`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.column(j).iter().copied().collect()
    }

    /// `∫ K(x, z) f(z) dz` at every node.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let wf = nalgebra::DVector::from_iterator(
            f.len(),
            f.iter().zip(&self.weights).map(|(a, w)| a * w),
        );
        (&self.matrix * wf).iter().copied().collect()
    }

    /// `∫ [K(x, z) - 1] f(z) dz`.
    pub fn smear(&self, f: &[f64]) -> Vec<f64> {
        let mean: f64 = f.iter().zip(&self.weights).map(|(a, w)| a * w).sum();
        self.apply(f).into_iter().map(|v| v - mean).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).abs().max()
    }

    pub fn max_mass_error(&self) -> f64 {
        let ones = vec![1.0; self.weights.len()];
        self.apply(&ones).iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Kpz,
    #[default]
    Singular,
    Dpd,
    Psi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdeConfig {
    pub curve: String,
    pub n: usize,
    pub eta: f64,
    pub rho: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub solver: SolverKind,
    /// Blowup guard on the sup norm.
    pub blowup: f64,
    pub substeps: usize,
    /// Snapshot decimation, in steps.
    pub record_every: usize,
    /// Regularity excess for the `H^{1+γ}` diagnostic.
    pub gamma: f64,
    /// Multiplier of the driving noise; 0 switches it off.
    pub noise: f64,
    /// Brownian sampling step; defaults to `dt`.
    pub fine_dt: Option<f64>,
}

impl Default for SpdeConfig {
    fn default() -> Self {
        SpdeConfig {
            curve: "disk".into(),
            n: 256,
            eta: 1.0 / 32.0,
            rho: 0.05,
            dt: 1e-4,
            horizon: 0.1,
            seed: 0,
            solver: SolverKind::Singular,
            blowup: 1e3,
            substeps: 4,
            record_every: 100,
            gamma: 0.1,
            noise: 1.0,
            fine_dt: None,
        }
    }
}

impl SpdeConfig {
    pub fn cutoff(&self) -> Result<ModeCutoff> {
        ModeCutoff::from_eta(self.eta).map_err(|e| Error::config("eta", e.to_string()))
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn fine_dt(&self) -> f64 {
        self.fine_dt.unwrap_or(self.dt)
    }

    pub fn noise_path(&self) -> Result<NoisePath> {
        NoisePath::new(self.seed, self.fine_dt())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("eta", self.eta)?;
        positive("rho", self.rho)?;
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        positive("blowup", self.blowup)?;
        positive("fine_dt", self.fine_dt())?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise", "must be a finite nonnegative multiplier"));
        }
        if self.substeps == 0 {
            return Err(Error::config("substeps", "must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::config("record_every", "must be at least 1"));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::config("horizon", "must be a whole number of steps `dt`"));
        }
        let ratio = self.dt / self.fine_dt();
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::config("fine_dt", "must divide dt"));
        }
        if matches!(self.solver, SolverKind::Singular | SolverKind::Dpd)
            && self.dt > self.eta * self.eta * (1.0 + 1e-12)
        {
            return Err(Error::config(
                "dt",
                format!("the singular solver needs dt ≤ η² = {}", self.eta * self.eta),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

/// Per-step scalar series and decimated snapshots of one trajectory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub sup_norm: Vec<f64>,
    /// `H^{1+γ}` norm.
    pub sobolev_norm: Vec<f64>,
    /// `∫ |∇h|² dz`.
    pub gradient_energy: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub blowup: Option<f64>,
    pub gamma: f64,
}

impl TrajectoryRecord {
    fn new(gamma: f64) -> Self {
        TrajectoryRecord {
            gamma,
            ..Default::default()
        }
    }

    fn push(&mut self, domain: &Domain, t: f64, h: &[f64], gradient: &[f64], snapshot: bool) {
        self.times.push(t);
        self.mean.push(domain.curve.mean(h));
        self.sup_norm.push(h.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
        self.sobolev_norm.push(domain.basis.sobolev_norm(h, 1.0 + self.gamma));
        self.gradient_energy.push(domain.curve.inner(gradient, gradient));
        if snapshot {
            self.snapshots.push(Snapshot { t, values: h.to_vec() });
        }
    }

    pub fn final_values(&self) -> Option<&[f64]> {
        self.snapshots.last().map(|s| s.values.as_slice())
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn is_truncated(&self) -> bool {
        self.blowup.is_some()
    }
}

fn check_field(domain: &Domain, f: &BoundaryField) -> Result<()> {
    if f.grid_id() != domain.curve.id() || f.len() != domain.len() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn squared(v: &[f64]) -> Vec<f64> {
    v.iter().map(|g| g * g).collect()
}

fn is_snapshot(step: usize, steps: usize, every: usize) -> bool {
    step.is_multiple_of(every) || step == steps
}

/// `Σ_{k ≤ K} λ_k^{-1/2} Δb_k ψ_k` scaled by `amplitude`.
fn spectral_noise(
    path: &mut NoisePath,
    basis: &SteklovBasis,
    modes: usize,
    dt: f64,
    step: u64,
    amplitude: f64,
) -> Result<Vec<f64>> {
    let mut c = vec![0.0; basis.len()];
    if amplitude == 0.0 {
        return Ok(c);
    }
    for (k, ck) in c.iter_mut().enumerate().take(modes + 1).skip(1) {
        *ck = amplitude * path.increment(k, step, dt)? / basis.eigenvalue(k).sqrt();
    }
    Ok(basis.synthesize(&c, 1..=modes))
}

/// `∂h = Δh + ∫K|∇h|² + ∫[K - 1](-L)^{-1/2}ξ`, noise resolved up to mode `N/4`.
pub fn solve_regularized_kpz(
    cfg: &SpdeConfig,
    domain: &Domain,
    kernel: &KernelK,
    init: &BoundaryField,
    path: &mut NoisePath,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    check_field(domain, init)?;
    if kernel.grid_id() != domain.curve.id() {
        return Err(Error::GridMismatch);
    }
    let steps = cfg.steps();
    let stepper = domain.heat.stepper(cfg.dt, cfg.substeps);
    let modes = domain.basis.resolved_modes();
    let mut h = init.values().to_vec();
    let mut rec = TrajectoryRecord::new(cfg.gamma);
    let mut grad = domain.curve.arclength_derivative(&h);
    rec.push(domain, 0.0, &h, &grad, true);
    for step in 0..steps {
        let forcing = kernel.apply(&squared(&grad));
        let xi = spectral_noise(path, &domain.basis, modes, cfg.dt, step as u64, cfg.noise)?;
        let smeared = kernel.smear(&xi);
        let kicked: Vec<f64> = h.iter().zip(&smeared).map(|(a, b)| a + b).collect();
        h = stepper.advance(&kicked, &forcing);
        grad = domain.curve.arclength_derivative(&h);
        let t = (step + 1) as f64 * cfg.dt;
        if !h.iter().all(|v| v.abs() <= cfg.blowup) {
            rec.blowup = Some(t);
            break;
        }
        rec.push(domain, t, &h, &grad, is_snapshot(step + 1, steps, cfg.record_every));
    }
    Ok(rec)
}

/// `∂h = Δh + |∇h|² - C_η + Π^η(-L)^{-1/2}ξ`.
pub fn solve_singular_galerkin(
    cfg: &SpdeConfig,
    domain: &Domain,
    init: &BoundaryField,
    path: &mut NoisePath,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    check_field(domain, init)?;
    let cutoff = cfg.cutoff()?;
    domain.basis.check_cutoff(cutoff)?;
    let c_eta = renorm_constant(&domain.basis, cutoff)?;
    let steps = cfg.steps();
    let stepper = domain.heat.stepper(cfg.dt, cfg.substeps);
    let mut h = init.values().to_vec();
    let mut rec = TrajectoryRecord::new(cfg.gamma);
    let mut grad = domain.curve.arclength_derivative(&h);
    rec.push(domain, 0.0, &h, &grad, true);
    for step in 0..steps {
        let forcing: Vec<f64> = grad.iter().map(|g| g * g - c_eta).collect();
        let xi = spectral_noise(path, &domain.basis, cutoff.count(), cfg.dt, step as u64, cfg.noise)?;
        let kicked: Vec<f64> = h.iter().zip(&xi).map(|(a, b)| a + b).collect();
        h = stepper.advance(&kicked, &forcing);
        grad = domain.curve.arclength_derivative(&h);
        let t = (step + 1) as f64 * cfg.dt;
        if !h.iter().all(|v| v.abs() <= cfg.blowup) {
            rec.blowup = Some(t);
            break;
        }
        rec.push(domain, t, &h, &grad, is_snapshot(step + 1, steps, cfg.record_every));
    }
    Ok(rec)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpdRecord {
    pub linear: TrajectoryRecord,
    pub reg1: TrajectoryRecord,
    pub reg2: TrajectoryRecord,
    pub sum: TrajectoryRecord,
}

/// Da Prato–Debussche split `h = h^{lin} + h^{reg,1} + h^{reg,2}`.
///
/// `h^{lin}` is the exact OU system with `-L²` dissipation driven by `path`;
/// `h^{reg,1}` absorbs `(Δ + L²)h^{lin}` so that `h^{lin} + h^{reg,1}` solves
/// the linear heat equation; `h^{reg,2}` carries the renormalized nonlinearity.
pub fn solve_dpd(
    cfg: &SpdeConfig,
    domain: &Domain,
    init: &BoundaryField,
    mut ens: OuEnsemble,
    path: &mut NoisePath,
) -> Result<DpdRecord> {
    cfg.validate()?;
    check_field(domain, init)?;
    let cutoff = cfg.cutoff()?;
    if ens.cutoff() != cutoff {
        return Err(Error::Domain(format!(
            "ensemble has {} modes, config asks for {}",
            ens.cutoff().count(),
            cutoff.count()
        )));
    }
    let c_eta = renorm_constant(&domain.basis, cutoff)?;
    let basis = &domain.basis;
    let n = domain.len();
    let k = cutoff.count();
    // (Δ + L²)ψ_k, the order-zero defect of each mode
    let defects: Vec<Vec<f64>> = (1..=k)
        .map(|j| {
            let psi: Vec<f64> = basis.eigenfield_values(j).iter().copied().collect();
            let l2 = basis.eigenvalue(j).powi(2);
            domain
                .heat
                .laplace_beltrami(&psi)
                .iter()
                .zip(&psi)
                .map(|(a, p)| a + l2 * p)
                .collect()
        })
        .collect();
    let lin_of = |ens: &OuEnsemble| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let z = ens.coefficients();
        let mut h = vec![0.0; n];
        let mut d = vec![0.0; n];
        for (j, zj) in z.iter().enumerate() {
            for (x, p) in basis.eigenfield_values(j + 1).iter().enumerate() {
                h[x] += zj * p;
                d[x] += zj * defects[j][x];
            }
        }
        let g = ens.linear_gradient(basis);
        (h, g, d)
    };

    let steps = cfg.steps();
    let stepper = domain.heat.stepper(cfg.dt, cfg.substeps);
    let (mut lin, mut lin_grad, mut defect) = lin_of(&ens);
    let mut reg1 = vec![0.0; n];
    let mut reg2: Vec<f64> = init.values().iter().zip(&lin).map(|(a, b)| a - b).collect();
    let mut out = DpdRecord {
        linear: TrajectoryRecord::new(cfg.gamma),
        reg1: TrajectoryRecord::new(cfg.gamma),
        reg2: TrajectoryRecord::new(cfg.gamma),
        sum: TrajectoryRecord::new(cfg.gamma),
    };
    let record = |out: &mut DpdRecord, t: f64, lin: &[f64], lg: &[f64], r1: &[f64], r2: &[f64], snap: bool| {
        let g1 = domain.curve.arclength_derivative(r1);
        let g2 = domain.curve.arclength_derivative(r2);
        let sum: Vec<f64> = (0..n).map(|x| lin[x] + r1[x] + r2[x]).collect();
        let gs: Vec<f64> = (0..n).map(|x| lg[x] + g1[x] + g2[x]).collect();
        out.linear.push(domain, t, lin, lg, snap);
        out.reg1.push(domain, t, r1, &g1, snap);
        out.reg2.push(domain, t, r2, &g2, snap);
        out.sum.push(domain, t, &sum, &gs, snap);
        gs
    };
    let mut grad_sum = record(&mut out, 0.0, &lin, &lin_grad, &reg1, &reg2, true);
    for step in 0..steps {
        let forcing2: Vec<f64> = grad_sum.iter().map(|g| g * g - c_eta).collect();
        reg1 = stepper.advance(&reg1, &defect);
        reg2 = stepper.advance(&reg2, &forcing2);
        ens.ou_step_driven_scaled(path, step as u64, cfg.dt, cfg.noise)?;
        (lin, lin_grad, defect) = lin_of(&ens);
        let t = (step + 1) as f64 * cfg.dt;
        if !reg2.iter().all(|v| v.abs() <= cfg.blowup) {
            for r in [&mut out.linear, &mut out.reg1, &mut out.reg2, &mut out.sum] {
                r.blowup = Some(t);
            }
            break;
        }
        grad_sum = record(
            &mut out,
            t,
            &lin,
            &lin_grad,
            &reg1,
            &reg2,
            is_snapshot(step + 1, steps, cfg.record_every),
        );
    }
    Ok(out)
}

/// `Ψ^η_t = ∫₀ᵗ e^{(t-s)Δ}(|∇h^{η,lin}_s|² - C_η) ds` along a stationary ensemble.
pub fn psi_eta(cfg: &SpdeConfig, domain: &Domain, mut ens: OuEnsemble) -> Result<TrajectoryRecord> {
    let snaps = psi_snapshots(cfg, domain, &mut ens)?;
    let mut rec = TrajectoryRecord::new(cfg.gamma);
    for (t, values) in snaps {
        let grad = domain.curve.arclength_derivative(&values);
        rec.push(domain, t, &values, &grad, true);
    }
    Ok(rec)
}

/// Snapshots `(t, Ψ_t)` every `record_every` steps, including `t = 0`.
fn psi_snapshots(cfg: &SpdeConfig, domain: &Domain, ens: &mut OuEnsemble) -> Result<Vec<(f64, Vec<f64>)>> {
    if !(cfg.dt > 0.0 && cfg.horizon > 0.0 && cfg.record_every > 0) {
        return Err(Error::config("dt", "Ψ^η needs positive dt, horizon and record_every"));
    }
    let c_eta = renorm_constant(&domain.basis, ens.cutoff())?;
    let stepper = domain.heat.stepper(cfg.dt, cfg.substeps);
    let steps = cfg.steps();
    let n = domain.len();
    let mut modes = vec![0.0; n];
    let mut out = vec![(0.0, vec![0.0; n])];
    for step in 0..steps {
        let g = ens.linear_gradient(&domain.basis);
        let forcing: Vec<f64> = g.iter().map(|g| g * g - c_eta).collect();
        let fc = domain.heat.to_modes(&forcing);
        for ((m, f), (e, d)) in modes
            .iter_mut()
            .zip(&fc)
            .zip(stepper.decay().iter().zip(stepper.duhamel()))
        {
            *m = e * *m + d * f;
        }
        ens.ou_step(cfg.dt)?;
        if is_snapshot(step + 1, steps, cfg.record_every) {
            out.push(((step + 1) as f64 * cfg.dt, domain.heat.from_modes(&modes)));
        }
    }
    Ok(out)
}

/// Coupled `Ψ^η` refinement study: for consecutive levels, the replica mean
/// and standard error of `sup_t ‖Ψ^{η_i}_t - Ψ^{η_{i+1}}_t‖_{H^{1+γ}}`.
#[derive(Debug, Clone, Serialize)]
pub struct PsiRefinement {
    pub levels: Vec<usize>,
    pub mean_difference: Vec<f64>,
    pub std_error: Vec<f64>,
}

pub fn psi_refinement(
    cfg: &SpdeConfig,
    domain: &Domain,
    levels: &[ModeCutoff],
    replicas: usize,
) -> Result<PsiRefinement> {
    if levels.len() < 2 || replicas == 0 {
        return Err(Error::Domain("need at least two levels and one replica".into()));
    }
    for l in levels {
        renorm_constant(&domain.basis, *l)?;
    }
    let per_replica: Vec<Result<Vec<f64>>> = parallel::map_indices(replicas, |r| {
        let seed = rng::replica_seed(cfg.seed, r as u64);
        let mut paths = Vec::with_capacity(levels.len());
        for level in levels {
            let mut ens = sample_stationary(&domain.basis, *level, seed)?;
            paths.push(psi_snapshots(cfg, domain, &mut ens)?);
        }
        Ok(paths
            .windows(2)
            .map(|pair| {
                pair[0]
                    .iter()
                    .zip(&pair[1])
                    .map(|((_, a), (_, b))| {
                        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                        domain.basis.sobolev_norm(&d, 1.0 + cfg.gamma)
                    })
                    .fold(0.0, f64::max)
            })
            .collect())
    });
    let rows: Vec<Vec<f64>> = per_replica.into_iter().collect::<Result<_>>()?;
    let pairs = levels.len() - 1;
    let mut mean_difference = Vec::with_capacity(pairs);
    let mut std_error = Vec::with_capacity(pairs);
    for p in 0..pairs {
        let xs: Vec<f64> = rows.iter().map(|r| r[p]).collect();
        let m = xs.iter().sum::<f64>() / replicas as f64;
        let var = if replicas > 1 {
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (replicas - 1) as f64
        } else {
            0.0
        };
        mean_difference.push(m);
        std_error.push((var / replicas as f64).sqrt());
    }
    Ok(PsiRefinement {
        levels: levels.iter().map(|l| l.count()).collect(),
        mean_difference,
        std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastics::Dissipation;

    fn disk(n: usize) -> Domain {
        Domain::from_preset(&"disk".parse().unwrap(), n).unwrap()
    }

    #[test]
    fn kernel_mass_and_symmetry() {
        for p in ["disk", "ellipse:1.5:1"] {
            let d = Domain::from_preset(&p.parse().unwrap(), 64).unwrap();
            let k = make_kernel(&d.curve, &d.heat, 0.05).unwrap();
            assert!(k.max_asymmetry() < 1e-10, "{p}");
            assert!(k.max_mass_error() < 1e-12, "{p}");
        }
    }

    #[test]
    fn wide_kernel_is_flat_and_narrow_kernel_is_refused() {
        let d = disk(64);
        let k = make_kernel(&d.curve, &d.heat, 50.0).unwrap();
        assert!((k.matrix() - DMatrix::from_element(64, 64, 1.0)).abs().max() < 1e-12);
        assert!(matches!(
            make_kernel(&d.curve, &d.heat, 1e-5),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn smear_kills_constants() {
        let d = disk(32);
        let k = make_kernel(&d.curve, &d.heat, 0.1).unwrap();
        assert!(k.smear(&[2.5; 32]).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn trivial_drift_is_exact() {
        let d = disk(64);
        let cfg = SpdeConfig {
            n: 64,
            eta: 1.0 / 8.0,
            dt: 1e-3,
            horizon: 0.05,
            noise: 0.0,
            ..Default::default()
        };
        let c = renorm_constant(&d.basis, ModeCutoff(8)).unwrap();
        let mut path = cfg.noise_path().unwrap();
        let rec = solve_singular_galerkin(&cfg, &d, &d.curve.zeros(), &mut path).unwrap();
        for (t, v) in rec.snapshots.iter().flat_map(|s| s.values.iter().map(move |v| (s.t, v))) {
            assert!((v + c * t).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_solver_needs_small_steps() {
        let cfg = SpdeConfig {
            eta: 0.1,
            dt: 0.02,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = toml::from_str::<SpdeConfig>("epsilonn = 0.2").unwrap_err();
        assert!(err.to_string().contains("epsilonn"));
    }

    #[test]
    fn dpd_on_disk_has_no_reg1() {
        let d = disk(64);
        let cfg = SpdeConfig {
            n: 64,
            eta: 1.0 / 8.0,
            dt: 1e-3,
            horizon: 0.02,
            solver: SolverKind::Dpd,
            ..Default::default()
        };
        let ens = sample_stationary(&d.basis, ModeCutoff(8), 3)
            .unwrap()
            .with_dissipation(Dissipation::Square);
        let mut path = cfg.noise_path().unwrap();
        let out = solve_dpd(&cfg, &d, &d.curve.zeros(), ens, &mut path).unwrap();
        assert!(out.reg1.sup_norm.iter().all(|v| *v < 1e-8));
    }
}
