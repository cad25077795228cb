//! Microscopic growth model on the unit disk.
//!
//! A Brownian particle with generator `½Δ_G` reflects off the unit circle.
//! Its boundary local time is the interface clock: macro time `t` corresponds
//! to local time `ε^{-4/3} t`, and every unit of local time spent at boundary
//! angle `θ` inflates the interface by `ε^{-1/3} Vol_I K(·, θ)` in macro time.
//!
//! The metric `G = I + χ(r) |∂_s I(φ)|² ττᵀ` extends the boundary graph metric
//! into the disk, with `τ` the angular direction and `χ` a smooth cutoff equal
//! to 0 for `r < 0.5` and 1 for `r > 0.8`. Local time is accrued by the
//! projection scheme: a step that lands outside the disk is projected back
//! along the radius and the overshoot is added to the local time.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::geometry::BoundaryField;
use crate::parallel;
use crate::rng::{self, tag, GaussianStream};
use crate::spde::KernelK;
use crate::steklov::{SteklovBasis, ZeroMode};

/// Largest particle step accepted by [`reflected_bm_run`].
pub const MAX_PARTICLE_STEP: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: [f64; 2],
    pub local_time: f64,
    /// Angle of the last boundary contact, if any.
    pub boundary_angle: Option<f64>,
    /// Elapsed particle time.
    pub time: f64,
}

impl ParticleState {
    pub fn at_center() -> Self {
        ParticleState {
            position: [0.0, 0.0],
            local_time: 0.0,
            boundary_angle: None,
            time: 0.0,
        }
    }

    pub fn on_boundary(angle: f64) -> Self {
        ParticleState {
            position: [angle.cos(), angle.sin()],
            local_time: 0.0,
            boundary_angle: Some(angle),
            time: 0.0,
        }
    }
}

/// Local time `dℓ` collected at boundary angle `angle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub angle: f64,
    pub local_time: f64,
}

/// Real trigonometric series `a₀ + Σ a_k cos kφ + b_k sin kφ`.
#[derive(Debug, Clone)]
struct TrigSeries {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigSeries {
    fn from_samples(domain: &Domain, values: &[f64]) -> Self {
        let n = values.len();
        let c = domain.curve.fourier().forward(values);
        let half = n / 2;
        let mut a = vec![0.0; half + 1];
        let mut b = vec![0.0; half + 1];
        a[0] = c[0].re;
        for k in 1..half {
            a[k] = 2.0 * c[k].re;
            b[k] = -2.0 * c[k].im;
        }
        a[half] = c[half].re;
        TrigSeries { a, b }
    }

    fn eval(&self, phi: f64) -> f64 {
        let (s1, c1) = phi.sin_cos();
        let (mut c, mut s) = (1.0, 0.0);
        let mut sum = self.a[0];
        for k in 1..self.a.len() {
            (c, s) = (c * c1 - s * s1, s * c1 + c * s1);
            sum += self.a[k] * c + self.b[k] * s;
        }
        sum
    }
}

/// Frozen metric `G[∇I]` extended into the disk.
#[derive(Debug, Clone)]
pub struct DiskMetric {
    slope: Option<TrigSeries>,
}

fn cutoff(r: f64) -> f64 {
    let s = (r - 0.5) / 0.3;
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

impl DiskMetric {
    pub fn flat() -> Self {
        DiskMetric { slope: None }
    }

    pub fn from_interface(domain: &Domain, interface: &[f64]) -> Self {
        let d = domain.curve.arclength_derivative(interface);
        if d.iter().all(|v| v.abs() < 1e-14) {
            return Self::flat();
        }
        DiskMetric {
            slope: Some(TrigSeries::from_samples(domain, &d)),
        }
    }

    pub fn is_flat(&self) -> bool {
        self.slope.is_none()
    }

    /// Graph correction `χ(r)|∂_s I(φ)|²` at a point.
    fn excess(&self, x: [f64; 2]) -> f64 {
        match &self.slope {
            None => 0.0,
            Some(series) => {
                let r = x[0].hypot(x[1]);
                let chi = cutoff(r);
                if chi == 0.0 {
                    return 0.0;
                }
                let v = series.eval(x[1].atan2(x[0]));
                chi * v * v
            }
        }
    }

    /// `√|G| G^{-1}` as `[xx, xy, yy]`.
    fn flux_matrix(&self, x: [f64; 2]) -> [f64; 3] {
        let g = self.excess(x);
        if g == 0.0 {
            return [1.0, 0.0, 1.0];
        }
        let r = x[0].hypot(x[1]);
        let (tx, ty) = (-x[1] / r, x[0] / r);
        let sq = (1.0 + g).sqrt();
        let c = g / (1.0 + g);
        [sq * (1.0 - c * tx * tx), -sq * c * tx * ty, sq * (1.0 - c * ty * ty)]
    }

    /// Drift `½|G|^{-1/2} div(√|G| G^{-1})` and the factor `G^{-1/2}`.
    fn coefficients(&self, x: [f64; 2]) -> ([f64; 2], [f64; 3]) {
        let g = self.excess(x);
        let r = x[0].hypot(x[1]);
        let near_collar = r > 0.5 - 1e-4;
        if self.slope.is_none() || !near_collar {
            return ([0.0, 0.0], [1.0, 0.0, 1.0]);
        }
        let h = 1e-5;
        let fx_p = self.flux_matrix([x[0] + h, x[1]]);
        let fx_m = self.flux_matrix([x[0] - h, x[1]]);
        let fy_p = self.flux_matrix([x[0], x[1] + h]);
        let fy_m = self.flux_matrix([x[0], x[1] - h]);
        let div_x = (fx_p[0] - fx_m[0] + fy_p[1] - fy_m[1]) / (2.0 * h);
        let div_y = (fx_p[1] - fx_m[1] + fy_p[2] - fy_m[2]) / (2.0 * h);
        let inv_sqrt_det = 1.0 / (1.0 + g).sqrt();
        let drift = [0.5 * inv_sqrt_det * div_x, 0.5 * inv_sqrt_det * div_y];
        if g == 0.0 {
            return (drift, [1.0, 0.0, 1.0]);
        }
        let (tx, ty) = (-x[1] / r, x[0] / r);
        let s = inv_sqrt_det - 1.0;
        (drift, [1.0 + s * tx * tx, s * tx * ty, 1.0 + s * ty * ty])
    }
}

/// Runs the particle until its local time reaches `target_local_time`.
///
/// Contacts are reported with their local-time increments; the last one is
/// clipped so that the increments add up exactly to the local time gained
/// up to the target. The particle keeps the full overshoot in its state.
pub fn reflected_bm_run(
    p: ParticleState,
    metric: &DiskMetric,
    target_local_time: f64,
    delta: f64,
    noise: &mut GaussianStream,
    contacts: &mut Vec<Contact>,
) -> Result<ParticleState> {
    if !(delta > 0.0) || delta > MAX_PARTICLE_STEP {
        return Err(Error::Domain(format!(
            "particle step {delta} outside (0, {MAX_PARTICLE_STEP}]"
        )));
    }
    if !(target_local_time > p.local_time) {
        return Err(Error::Domain(format!(
            "target local time {target_local_time} must exceed the current {}",
            p.local_time
        )));
    }
    let sd = delta.sqrt();
    let mut p = p;
    while p.local_time < target_local_time {
        let x = p.position;
        let (b, s) = metric.coefficients(x);
        let (z1, z2) = (noise.next(), noise.next());
        let mut y = [
            x[0] + b[0] * delta + sd * (s[0] * z1 + s[1] * z2),
            x[1] + b[1] * delta + sd * (s[1] * z1 + s[2] * z2),
        ];
        p.time += delta;
        let r = y[0].hypot(y[1]);
        if r > 1.0 {
            y = [y[0] / r, y[1] / r];
            let angle = y[1].atan2(y[0]).rem_euclid(TAU);
            let gained = r - 1.0;
            let credited = gained.min(target_local_time - p.local_time);
            contacts.push(Contact {
                angle,
                local_time: credited,
            });
            p.local_time += gained;
            p.boundary_angle = Some(angle);
        }
        p.position = y;
    }
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct InterfaceState {
    pub values: BoundaryField,
    pub t: f64,
    pub eps: f64,
}

impl InterfaceState {
    pub fn flat(domain: &Domain, eps: f64) -> Self {
        InterfaceState {
            values: domain.curve.zeros(),
            t: 0.0,
            eps,
        }
    }
}

/// `I ← e^{ΔtΔ}I + Δt ε^{-1/3} Vol_I K(·, q)` for a single contact angle `q`.
pub fn step_interface(
    domain: &Domain,
    s: &InterfaceState,
    q_angle: f64,
    kernel: &KernelK,
    dt: f64,
) -> Result<InterfaceState> {
    step_interface_occupation(
        domain,
        s,
        &[Contact {
            angle: q_angle,
            local_time: 1.0,
        }],
        1.0,
        kernel,
        dt,
    )
}

/// Interpolation weights of a boundary occupation measure: `Σ_i m_i δ_{θ_i}`
/// seen through trigonometric interpolation on the grid nodes.
fn occupation_weights(domain: &Domain, contacts: &[Contact], scale: f64) -> Vec<f64> {
    let mut acc = vec![0.0; domain.len()];
    let fourier = domain.curve.fourier();
    for c in contacts {
        let w = fourier.cardinal_weights(c.angle);
        for (a, wj) in acc.iter_mut().zip(w) {
            *a += scale * c.local_time * wj;
        }
    }
    acc
}

/// `∫ K(x, z) μ(dz)` for an occupation vector on the nodes.
fn kernel_against(kernel: &KernelK, occupation: &[f64]) -> Vec<f64> {
    let m = kernel.matrix();
    let n = occupation.len();
    (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)] * occupation[j]).sum())
        .collect()
}

/// Interface update over `dt` driven by the contacts of one macro step.
///
/// Contact `i` occupies macro time `local_time_i / total`·`dt` (for
/// `total = Σ local_time`), so the weighted mean always grows by
/// `dt ε^{-1/3} Vol_I`.
pub fn step_interface_occupation(
    domain: &Domain,
    s: &InterfaceState,
    contacts: &[Contact],
    total_local_time: f64,
    kernel: &KernelK,
    dt: f64,
) -> Result<InterfaceState> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("interface step must be positive, got {dt}")));
    }
    if s.values.grid_id() != domain.curve.id() || kernel.grid_id() != domain.curve.id() {
        return Err(Error::GridMismatch);
    }
    let vol = domain.curve.volume_functional(&s.values)?;
    let occupation = occupation_weights(domain, contacts, dt / total_local_time);
    let bump = kernel_against(kernel, &occupation);
    let smoothed = domain.heat.heat(s.values.values(), dt);
    let amp = s.eps.powf(-1.0 / 3.0) * vol;
    let values = smoothed.iter().zip(&bump).map(|(a, b)| a + amp * b).collect();
    Ok(InterfaceState {
        values: BoundaryField::from_raw(values, domain.curve.id()),
        t: s.t + dt,
        eps: s.eps,
    })
}

/// `Y = ε^{-1/3}[I - ε^{-1/3} t]`.
pub fn fluctuation_field(s: &InterfaceState) -> BoundaryField {
    let e = s.eps.powf(-1.0 / 3.0);
    s.values.map(|v| e * (v - e * s.t))
}

/// `[M^{limit}]_{t,x} = 2t Σ_{k≥1} λ_k^{-1} ⟨ψ_k, K(x, ·)⟩²`.
pub fn limit_bracket(basis: &SteklovBasis, kernel: &KernelK, probe: usize, t: f64) -> f64 {
    let col = kernel.column(probe);
    let c = basis.coefficients(&col);
    2.0 * t
        * (1..basis.len())
            .map(|k| c[k] * c[k] / basis.eigenvalue(k))
            .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Constant,
    OneMode { mode: usize, amplitude: f64 },
    Heat { rho: f64 },
}

impl KernelSpec {
    pub fn build(&self, domain: &Domain) -> Result<KernelK> {
        match *self {
            KernelSpec::Constant => Ok(KernelK::constant(&domain.curve)),
            KernelSpec::OneMode { mode, amplitude } => KernelK::one_mode(&domain.basis, mode, amplitude),
            KernelSpec::Heat { rho } => crate::spde::make_kernel(&domain.curve, &domain.heat, rho),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthConfig {
    pub eps: f64,
    pub horizon: f64,
    /// Interface step; defaults to `horizon / 64`.
    pub macro_dt: Option<f64>,
    /// Particle step; defaults to `ε^{4/3}·10⁻³`.
    pub delta: Option<f64>,
    pub n: usize,
    pub kernel: KernelSpec,
    /// Probe nodes for the noise integral; empty means the node maximizing `|ψ₁|`.
    pub probes: Vec<usize>,
    /// Number of mesh intervals for the realized quadratic variation.
    pub mesh: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Multiplies the projection-scheme local time.
    pub local_time_scale: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            eps: 0.2,
            horizon: 0.25,
            macro_dt: None,
            delta: None,
            n: 64,
            kernel: KernelSpec::OneMode {
                mode: 1,
                amplitude: 1.0,
            },
            probes: Vec::new(),
            mesh: 4,
            replicas: 200,
            seed: 0,
            local_time_scale: 1.0,
        }
    }
}

impl GrowthConfig {
    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(self.eps.powf(4.0 / 3.0) * 1e-3)
    }

    pub fn macro_dt(&self) -> f64 {
        self.macro_dt.unwrap_or(self.horizon / 64.0)
    }

    pub fn macro_steps(&self) -> usize {
        (self.horizon / self.macro_dt()).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::config("eps", "must lie in (0, 1)"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::config("horizon", "must be positive"));
        }
        let dt = self.macro_dt();
        let steps = self.horizon / dt;
        if !(dt > 0.0) || (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::config("macro_dt", "must divide the horizon"));
        }
        let d = self.delta();
        if !(d > 0.0) || d > MAX_PARTICLE_STEP {
            return Err(Error::config(
                "delta",
                format!("particle step must lie in (0, {MAX_PARTICLE_STEP}]"),
            ));
        }
        if self.mesh == 0 || !self.macro_steps().is_multiple_of(self.mesh) {
            return Err(Error::config("mesh", "must divide the number of macro steps"));
        }
        if !(self.local_time_scale > 0.0) {
            return Err(Error::config("local_time_scale", "must be positive"));
        }
        if self.probes.iter().any(|&p| p >= self.n) {
            return Err(Error::config("probes", "probe index outside the grid"));
        }
        Ok(())
    }

    pub fn resolved_probes(&self, domain: &Domain) -> Vec<usize> {
        if !self.probes.is_empty() {
            return self.probes.clone();
        }
        let psi = domain.basis.eigenfield_values(1);
        let best = (0..psi.len())
            .max_by(|&a, &b| psi[a].abs().total_cmp(&psi[b].abs()))
            .unwrap_or(0);
        vec![best]
    }
}

/// One replica: noise integral and corrected martingale at every probe and
/// macro time, plus interface summaries.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthRun {
    pub times: Vec<f64>,
    /// `int_noise[p][i]` at probe `p`, macro time `times[i]`.
    pub int_noise: Vec<Vec<f64>>,
    pub martingale: Vec<Vec<f64>>,
    pub fluctuation_sup: f64,
    pub max_flat_deviation: f64,
    pub final_interface: Vec<f64>,
    pub particle: ParticleState,
}

/// Weighted occupation measure of one macro step and the interface data it saw.
struct MacroStep {
    occupation: Vec<f64>,
    vol: f64,
    /// `∫ K(x, z)(1 + |∇I(z)|²)^{1/2} dz` at every node.
    metric_mass: Vec<f64>,
    last_angle: Option<f64>,
}

/// `Int^{noise}` increments at the probes for recorded macro steps.
pub fn noise_integral_path(
    kernel: &KernelK,
    eps: f64,
    dt: f64,
    probes: &[usize],
    occupation: &[Vec<f64>],
    vol: &[f64],
    metric_mass: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let scale = eps.powf(-2.0 / 3.0);
    let m = kernel.matrix();
    probes
        .iter()
        .map(|&x| {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(occupation.len() + 1);
            out.push(0.0);
            for ((occ, v), mass) in occupation.iter().zip(vol).zip(metric_mass) {
                let hit: f64 = occ.iter().enumerate().map(|(j, o)| m[(x, j)] * o).sum();
                acc += scale * (v * hit - dt * mass[x]);
                out.push(acc);
            }
            out
        })
        .collect()
}

/// Simulates one replica of the coupled particle/interface system.
pub fn run_growth(cfg: &GrowthConfig, domain: &Domain, kernel: &KernelK, seed: u64) -> Result<GrowthRun> {
    cfg.validate()?;
    let dt = cfg.macro_dt();
    let steps = cfg.macro_steps();
    let delta = cfg.delta();
    let probes = cfg.resolved_probes(domain);
    let eps = cfg.eps;
    let per_unit = eps.powf(-4.0 / 3.0) / cfg.local_time_scale;

    // corrector g = (-L)^{-1}[K(x, ·) - 1] for the martingale
    let correctors: Vec<Vec<f64>> = probes
        .iter()
        .map(|&x| {
            let f = BoundaryField::from_raw(kernel.column(x), domain.curve.id());
            domain
                .basis
                .spectral_apply(&f, |l| 1.0 / l, ZeroMode::Drop)
                .map(|g| g.into_values())
        })
        .collect::<Result<_>>()?;

    let mut noise = GaussianStream::new(seed, rng::stream(tag::PARTICLE, 0));
    // uniform boundary start: stationary for the boundary trace process
    let start = TAU * rng::uniform(seed, rng::stream(tag::PARTICLE, 2), 0);
    let mut particle = ParticleState::on_boundary(start);
    let mut state = InterfaceState::flat(domain, eps);
    let mut carry: Option<Contact> = None;
    let mut records = Vec::with_capacity(steps);
    let mut fluctuation_sup: f64 = 0.0;
    let mut max_flat_deviation: f64 = 0.0;
    let mut contacts = Vec::new();
    let drift = eps.powf(-1.0 / 3.0);

    for step in 0..steps {
        let target = per_unit * (step + 1) as f64 * dt;
        let metric = DiskMetric::from_interface(domain, state.values.values());
        contacts.clear();
        let credited_before = per_unit * step as f64 * dt;
        if let Some(c) = carry.take() {
            // overshoot from the previous step, itself clipped at this target
            let amount = c.local_time.min(target - credited_before);
            contacts.push(Contact { angle: c.angle, local_time: amount });
            if c.local_time > amount {
                carry = Some(Contact { angle: c.angle, local_time: c.local_time - amount });
            }
        }
        if particle.local_time < target {
            particle = reflected_bm_run(particle, &metric, target, delta, &mut noise, &mut contacts)?;
            if particle.local_time > target {
                let angle = particle.boundary_angle.unwrap_or(0.0);
                carry = Some(Contact {
                    angle,
                    local_time: particle.local_time - target,
                });
            }
        }
        let total = target - credited_before;
        let density = domain.curve.graph_metric_weight(&state.values)?;
        let metric_mass = kernel.apply(density.values());
        let vol = domain.curve.volume_functional(&state.values)?;
        let occupation = occupation_weights(domain, &contacts, dt / total);
        state = step_interface_occupation(domain, &state, &contacts, total, kernel, dt)?;
        records.push(MacroStep {
            occupation,
            vol,
            metric_mass,
            last_angle: particle.boundary_angle,
        });
        let y = fluctuation_field(&state);
        fluctuation_sup = fluctuation_sup.max(y.sup_norm());
        let flat = drift * state.t;
        max_flat_deviation = state
            .values
            .values()
            .iter()
            .fold(max_flat_deviation, |m, v| m.max((v - flat).abs()));
    }

    let occupation: Vec<Vec<f64>> = records.iter().map(|r| r.occupation.clone()).collect();
    let vols: Vec<f64> = records.iter().map(|r| r.vol).collect();
    let masses: Vec<Vec<f64>> = records.iter().map(|r| r.metric_mass.clone()).collect();
    let int_noise = noise_integral_path(kernel, eps, dt, &probes, &occupation, &vols, &masses);
    let fourier = domain.curve.fourier();
    let martingale = int_noise
        .iter()
        .zip(&correctors)
        .map(|(series, g)| {
            let scale = eps.powf(2.0 / 3.0);
            let g0 = fourier.interpolate(g, start);
            let mut out = Vec::with_capacity(series.len());
            out.push(series[0]);
            for (value, rec) in series[1..].iter().zip(&records) {
                let q = rec.last_angle.unwrap_or(start);
                out.push(value + scale * (fourier.interpolate(g, q) - g0));
            }
            out
        })
        .collect();
    Ok(GrowthRun {
        times: (0..=steps).map(|i| i as f64 * dt).collect(),
        int_noise,
        martingale,
        fluctuation_sup,
        max_flat_deviation,
        final_interface: state.values.into_values(),
        particle,
    })
}

/// Sum of squared increments of `series` over `mesh` equal intervals.
pub fn realized_qv(series: &[f64], mesh: usize) -> f64 {
    let steps = series.len() - 1;
    let stride = steps / mesh;
    (0..mesh)
        .map(|i| {
            let d = series[(i + 1) * stride] - series[i * stride];
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketRow {
    pub eps: f64,
    pub probe: usize,
    pub oracle: f64,
    pub raw_mean: f64,
    pub raw_std_error: f64,
    pub raw_relative_bias: f64,
    pub martingale_mean: f64,
    pub martingale_std_error: f64,
    pub martingale_relative_bias: f64,
    pub replicas: usize,
}

/// Replicas of [`run_growth`] at one `ε`, with seeds derived from `(seed, ε)`.
pub fn bracket_runs(cfg: &GrowthConfig, domain: &Domain, kernel: &KernelK, eps: f64) -> Result<Vec<GrowthRun>> {
    let c = GrowthConfig { eps, ..cfg.clone() };
    c.validate()?;
    let eps_seed = rng::splitmix64(cfg.seed ^ eps.to_bits());
    parallel::map_indices(cfg.replicas, |r| {
        run_growth(&c, domain, kernel, rng::replica_seed(eps_seed, r as u64))
    })
    .into_iter()
    .collect()
}

/// Realized quadratic variation over `mesh` intervals against the spectral
/// bracket, one row per probe.
pub fn bracket_rows(
    cfg: &GrowthConfig,
    domain: &Domain,
    kernel: &KernelK,
    eps: f64,
    runs: &[GrowthRun],
) -> Vec<BracketRow> {
    cfg.resolved_probes(domain)
        .iter()
        .enumerate()
        .map(|(p, &x)| {
            let oracle = limit_bracket(&domain.basis, kernel, x, cfg.horizon);
            let raw: Vec<f64> = runs.iter().map(|r| realized_qv(&r.int_noise[p], cfg.mesh)).collect();
            let mart: Vec<f64> = runs.iter().map(|r| realized_qv(&r.martingale[p], cfg.mesh)).collect();
            let (rm, rs) = mean_and_error(&raw);
            let (mm, ms) = mean_and_error(&mart);
            let rel = |m: f64| if oracle > 0.0 { (m - oracle) / oracle } else { m };
            BracketRow {
                eps,
                probe: x,
                oracle,
                raw_mean: rm,
                raw_std_error: rs,
                raw_relative_bias: rel(rm),
                martingale_mean: mm,
                martingale_std_error: ms,
                martingale_relative_bias: rel(mm),
                replicas: runs.len(),
            }
        })
        .collect()
}

/// Realized quadratic variation of `Int^{noise}` (and of the corrected
/// martingale) against the spectral bracket, one row per `(ε, probe)`.
pub fn empirical_bracket_compare(
    cfg: &GrowthConfig,
    domain: &Domain,
    eps_list: &[f64],
) -> Result<Vec<BracketRow>> {
    let kernel = cfg.kernel.build(domain)?;
    let mut rows = Vec::new();
    for &eps in eps_list {
        let runs = bracket_runs(cfg, domain, &kernel, eps)?;
        rows.extend(bracket_rows(cfg, domain, &kernel, eps, &runs));
    }
    Ok(rows)
}

pub fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Local time accrued by the flat reflected particle over `horizon`, started
/// uniformly in the disk; the stationary rate is perimeter/(2·area) = 1.
pub fn flat_local_time(horizon: f64, delta: f64, seed: u64) -> Result<f64> {
    if !(delta > 0.0) || delta > MAX_PARTICLE_STEP {
        return Err(Error::Domain(format!("particle step {delta} outside (0, {MAX_PARTICLE_STEP}]")));
    }
    let mut noise = GaussianStream::new(seed, rng::stream(tag::PARTICLE, 1));
    let u = rng::uniform(seed, rng::stream(tag::PARTICLE, 2), 0);
    let v = rng::uniform(seed, rng::stream(tag::PARTICLE, 2), 1);
    let r = u.sqrt();
    let mut x = [r * (TAU * v).cos(), r * (TAU * v).sin()];
    let sd = delta.sqrt();
    let steps = (horizon / delta).round() as u64;
    let mut local = 0.0;
    for _ in 0..steps {
        let y = [x[0] + sd * noise.next(), x[1] + sd * noise.next()];
        let r = y[0].hypot(y[1]);
        x = if r > 1.0 {
            local += r - 1.0;
            [y[0] / r, y[1] / r]
        } else {
            y
        };
    }
    Ok(local)
}

/// Boundary angle of first exit from the center under the flat metric.
pub fn first_exit_angle(delta: f64, seed: u64) -> Result<f64> {
    let mut noise = GaussianStream::new(seed, rng::stream(tag::PARTICLE, 3));
    let mut contacts = Vec::new();
    let p = reflected_bm_run(
        ParticleState::at_center(),
        &DiskMetric::flat(),
        f64::MIN_POSITIVE,
        delta,
        &mut noise,
        &mut contacts,
    )?;
    Ok(p.boundary_angle.unwrap_or(0.0).rem_euclid(2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(n: usize) -> Domain {
        Domain::from_preset(&"disk".parse().unwrap(), n).unwrap()
    }

    #[test]
    fn trig_series_reproduces_samples() {
        let d = disk(32);
        let f: Vec<f64> = (0..32)
            .map(|j| {
                let t = crate::fourier::grid_angle(32, j);
                0.3 + t.cos() - 2.0 * (3.0 * t).sin()
            })
            .collect();
        let s = TrigSeries::from_samples(&d, &f);
        for &t in &[0.2f64, 1.7, 4.0] {
            let e = 0.3 + t.cos() - 2.0 * (3.0 * t).sin();
            assert!((s.eval(t) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn particle_stays_in_disk_and_clips_contacts() {
        let d = disk(32);
        let mut i = d.curve.field_fn(|t| 0.5 * (2.0 * t).cos());
        i.values_mut()[0] += 0.0;
        let metric = DiskMetric::from_interface(&d, i.values());
        let mut noise = GaussianStream::new(5, 0);
        let mut contacts = Vec::new();
        let p = reflected_bm_run(ParticleState::at_center(), &metric, 0.5, 1e-4, &mut noise, &mut contacts)
            .unwrap();
        assert!(p.position[0].hypot(p.position[1]) <= 1.0 + 1e-15);
        let total: f64 = contacts.iter().map(|c| c.local_time).sum();
        assert!((total - 0.5).abs() < 1e-12);
        assert!(p.local_time >= 0.5);
    }

    #[test]
    fn step_guard() {
        let mut noise = GaussianStream::new(5, 0);
        let mut c = Vec::new();
        let r = reflected_bm_run(ParticleState::at_center(), &DiskMetric::flat(), 1.0, 0.02, &mut noise, &mut c);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn flat_kernel_inflates_uniformly() {
        let d = disk(32);
        let k = KernelK::constant(&d.curve);
        let s = InterfaceState::flat(&d, 0.2);
        let next = step_interface(&d, &s, 1.0, &k, 0.01).unwrap();
        let e = 0.2f64.powf(-1.0 / 3.0) * 0.01;
        assert!(next.values.values().iter().all(|v| (v - e).abs() < 1e-14));
        assert!(fluctuation_field(&next).sup_norm() < 1e-12);
    }

    #[test]
    fn one_hit_adds_exact_mass() {
        let d = disk(64);
        let k = crate::spde::make_kernel(&d.curve, &d.heat, 0.05).unwrap();
        let mut s = InterfaceState::flat(&d, 0.3);
        s.values = d.curve.field_fn(|t| 0.1 * t.sin());
        let vol = d.curve.volume_functional(&s.values).unwrap();
        let before = d.curve.mean(s.values.values());
        let next = step_interface(&d, &s, 2.0, &k, 0.01).unwrap();
        let gain = d.curve.mean(next.values.values()) - before;
        assert!((gain - 0.01 * 0.3f64.powf(-1.0 / 3.0) * vol).abs() < 1e-12);
    }

    #[test]
    fn one_mode_bracket_oracle() {
        let d = disk(64);
        let k = KernelK::one_mode(&d.basis, 1, 1.0).unwrap();
        let x = GrowthConfig::default().resolved_probes(&d)[0];
        let psi = d.basis.eigenfield_values(1)[x];
        let b = limit_bracket(&d.basis, &k, x, 0.25);
        assert!((b - 0.5 * psi * psi).abs() < 1e-10);
        assert!(limit_bracket(&d.basis, &KernelK::constant(&d.curve), x, 0.25) < 1e-20);
    }

    #[test]
    fn constant_kernel_has_no_noise() {
        let d = disk(32);
        let cfg = GrowthConfig {
            eps: 0.4,
            horizon: 0.05,
            kernel: KernelSpec::Constant,
            mesh: 1,
            ..Default::default()
        };
        let k = cfg.kernel.build(&d).unwrap();
        let run = run_growth(&cfg, &d, &k, 1).unwrap();
        assert!(run.int_noise[0].iter().all(|v| v.abs() < 1e-12));
        assert!(run.max_flat_deviation < 1e-10);
    }
}
