//! Boundary curves, boundary fields and the tangential calculus on them.
//!
//! A curve is stored through a conformal parameterization: node `j` sits at
//! `γ(θ_j)` with `θ_j = 2πj/N`, and `conformal_weight[j] = |γ'(θ_j)|` is the
//! arclength density relative to the reference parameter. The reference is
//! the unit circle, except for ellipses, which use elliptic coordinates
//! `c·cosh(μ + iν)`: that map is conformal as well, keeps the nodes
//! band-limited, and changes the Dirichlet-to-Neumann symbol from `|k|` to
//! `k·tanh(kμ₀)` on cosines and `k·coth(kμ₀)` on sines. Presets are scaled to
//! total length `2π`, so the disk, the ellipse and the perturbed disk share
//! the same Weyl slope.

use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{grid_angle, Fourier};

const SMOOTHNESS_GUARD: f64 = 1e-10;

/// Fourier symbol of the Dirichlet-to-Neumann map in the curve parameter,
/// before division by the conformal weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ReferenceSymbol {
    /// `|k|` on the unit circle.
    Circle,
    /// `k·tanh(kμ₀)` on `cos kν` and `k·coth(kμ₀)` on `sin kν`.
    Elliptic { mu0: f64 },
}

impl ReferenceSymbol {
    /// Multipliers `(cosine, sine)` at frequency `k ≥ 0`.
    pub fn multipliers(&self, k: u64) -> (f64, f64) {
        let kf = k as f64;
        match *self {
            ReferenceSymbol::Circle => (kf, kf),
            ReferenceSymbol::Elliptic { mu0 } => {
                if k == 0 {
                    (0.0, 0.0)
                } else {
                    let t = (kf * mu0).tanh();
                    (kf * t, kf / t)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CurvePreset {
    Disk,
    Ellipse { a: f64, b: f64 },
    PerturbedDisk { amplitude: f64, mode: u32 },
}

impl FromStr for CurvePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| -> Result<f64> {
            p.parse::<f64>()
                .map_err(|_| Error::InvalidCurve(format!("bad number `{p}` in preset `{s}`")))
        };
        match parts.as_slice() {
            ["disk"] => Ok(CurvePreset::Disk),
            ["ellipse", a, b] => {
                let (a, b) = (num(a)?, num(b)?);
                if !(a > 0.0 && b > 0.0) {
                    return Err(Error::InvalidCurve("ellipse axes must be positive".into()));
                }
                Ok(CurvePreset::Ellipse { a, b })
            }
            ["perturbed-disk", amp, mode] => {
                let amplitude = num(amp)?;
                let mode = mode
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidCurve(format!("bad mode in preset `{s}`")))?;
                if amplitude.abs() * (1 + mode) as f64 >= 1.0 {
                    return Err(Error::InvalidCurve(
                        "perturbed disk is not star-shaped enough (|amp|·(mode+1) must be < 1)"
                            .into(),
                    ));
                }
                Ok(CurvePreset::PerturbedDisk { amplitude, mode })
            }
            _ => Err(Error::InvalidCurve(format!("unknown curve preset `{s}`"))),
        }
    }
}

impl std::fmt::Display for CurvePreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurvePreset::Disk => write!(f, "disk"),
            CurvePreset::Ellipse { a, b } => write!(f, "ellipse:{a}:{b}"),
            CurvePreset::PerturbedDisk { amplitude, mode } => {
                write!(f, "perturbed-disk:{amplitude}:{mode}")
            }
        }
    }
}

impl CurvePreset {
    /// Polar radius `r(σ)` of the star-shaped preset.
    fn radius(&self, sigma: f64) -> f64 {
        match *self {
            CurvePreset::Disk => 1.0,
            CurvePreset::Ellipse { a, b } => {
                a * b / ((b * sigma.cos()).powi(2) + (a * sigma.sin()).powi(2)).sqrt()
            }
            CurvePreset::PerturbedDisk { amplitude, mode } => {
                1.0 + amplitude * (mode as f64 * sigma).cos()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClosedCurve {
    nodes: Vec<[f64; 2]>,
    conformal_weight: Vec<f64>,
    total_length: f64,
    measure: Vec<f64>,
    fourier: Fourier,
    symbol: ReferenceSymbol,
    id: u64,
}

impl ClosedCurve {
    pub fn from_preset(preset: &CurvePreset, n: usize) -> Result<Self> {
        check_grid_size(n)?;
        if let CurvePreset::Disk = preset {
            let nodes = (0..n)
                .map(|j| {
                    let t = grid_angle(n, j);
                    [t.cos(), t.sin()]
                })
                .collect();
            return Self::from_samples(nodes, vec![1.0; n]);
        }
        if let CurvePreset::Ellipse { a, b } = *preset {
            return Self::ellipse(a, b, n);
        }
        let fourier = Fourier::new(n);
        let sigma = theodorsen(preset, &fourier)?;
        let r: Vec<f64> = sigma.iter().map(|&s| preset.radius(s)).collect();
        let x: Vec<f64> = r.iter().zip(&sigma).map(|(r, s)| r * s.cos()).collect();
        let y: Vec<f64> = r.iter().zip(&sigma).map(|(r, s)| r * s.sin()).collect();
        let dx = fourier.derivative(&x);
        let dy = fourier.derivative(&y);
        let weight: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).collect();
        let length = 2.0 * PI / n as f64 * weight.iter().sum::<f64>();
        let scale = 2.0 * PI / length;
        let nodes = x.iter().zip(&y).map(|(x, y)| [scale * x, scale * y]).collect();
        let weight = weight.into_iter().map(|w| scale * w).collect();
        Self::from_samples(nodes, weight)
    }

    /// Elliptic coordinates with foci on the major axis, boundary `μ = μ₀`.
    fn ellipse(a: f64, b: f64, n: usize) -> Result<Self> {
        let (major, minor) = (a.max(b), a.min(b));
        if major == minor {
            return Self::from_preset(&CurvePreset::Disk, n);
        }
        let mu0 = (minor / major).atanh();
        let raw: Vec<([f64; 2], f64)> = (0..n)
            .map(|j| {
                let (s, c) = grid_angle(n, j).sin_cos();
                let weight = (major * major * s * s + minor * minor * c * c).sqrt();
                if a >= b {
                    ([a * c, b * s], weight)
                } else {
                    ([-a * s, b * c], weight)
                }
            })
            .collect();
        let length = 2.0 * PI / n as f64 * raw.iter().map(|r| r.1).sum::<f64>();
        let scale = 2.0 * PI / length;
        let nodes = raw.iter().map(|(p, _)| [scale * p[0], scale * p[1]]).collect();
        let weight = raw.iter().map(|(_, w)| scale * w).collect();
        Self::with_symbol(nodes, weight, ReferenceSymbol::Elliptic { mu0 })
    }

    /// Builds a curve from conformally parameterized samples `(γ(θ_j), |γ'(θ_j)|)`.
    pub fn from_samples(nodes: Vec<[f64; 2]>, conformal_weight: Vec<f64>) -> Result<Self> {
        Self::with_symbol(nodes, conformal_weight, ReferenceSymbol::Circle)
    }

    fn with_symbol(
        nodes: Vec<[f64; 2]>,
        conformal_weight: Vec<f64>,
        symbol: ReferenceSymbol,
    ) -> Result<Self> {
        let n = nodes.len();
        check_grid_size(n)?;
        if conformal_weight.len() != n {
            return Err(Error::InvalidCurve(format!(
                "{} nodes but {} conformal weights",
                n,
                conformal_weight.len()
            )));
        }
        if let Some(j) = conformal_weight.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidCurve(format!(
                "conformal weight at node {j} is not strictly positive"
            )));
        }
        if nodes.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidCurve("non-finite node coordinate".into()));
        }
        let fourier = Fourier::new(n);
        let xs: Vec<f64> = nodes.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = nodes.iter().map(|p| p[1]).collect();
        for (name, coord) in [("x", &xs), ("y", &ys)] {
            let tail = fourier.relative_tail(coord, n / 4);
            if tail > SMOOTHNESS_GUARD {
                return Err(Error::InvalidCurve(format!(
                    "{name}-coordinate Fourier tail {tail:.2e} above {SMOOTHNESS_GUARD:e} at mode N/4; refine the grid"
                )));
            }
        }
        let sum: f64 = conformal_weight.iter().sum();
        let total_length = 2.0 * PI / n as f64 * sum;
        let mut measure: Vec<f64> = conformal_weight.iter().map(|w| w / sum).collect();
        let s: f64 = measure.iter().sum();
        measure.iter_mut().for_each(|m| *m /= s);

        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        n.hash(&mut hasher);
        if let ReferenceSymbol::Elliptic { mu0 } = symbol {
            mu0.to_bits().hash(&mut hasher);
        }
        for (p, w) in nodes.iter().zip(&conformal_weight) {
            p[0].to_bits().hash(&mut hasher);
            p[1].to_bits().hash(&mut hasher);
            w.to_bits().hash(&mut hasher);
        }
        Ok(ClosedCurve {
            nodes,
            conformal_weight,
            total_length,
            measure,
            fourier,
            symbol,
            id: hasher.finish(),
        })
    }

    /// Reads `x,y,weight` rows (an optional header line is skipped).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut nodes = Vec::new();
        let mut weight = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(|s| s.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 3 => {
                    nodes.push([v[0], v[1]]);
                    weight.push(v[2]);
                }
                Err(_) if line == 0 => continue,
                _ => {
                    return Err(Error::InvalidCurve(format!(
                        "row {} is not an `x,y,weight` triple",
                        line + 1
                    )))
                }
            }
        }
        Self::from_samples(nodes, weight)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn conformal_weight(&self) -> &[f64] {
        &self.conformal_weight
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn reference_symbol(&self) -> ReferenceSymbol {
        self.symbol
    }

    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    /// True when nodes are equally spaced in arclength (constant conformal weight).
    pub fn is_arclength_uniform(&self) -> bool {
        let w0 = self.conformal_weight[0];
        self.conformal_weight
            .iter()
            .all(|w| (w - w0).abs() <= 1e-14 * w0)
    }

    /// Quadrature weights of the boundary measure, normalized to unit mass.
    pub fn normalized_measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn field(&self, values: Vec<f64>) -> Result<BoundaryField> {
        BoundaryField::new(self, values)
    }

    pub fn field_fn(&self, f: impl Fn(f64) -> f64) -> BoundaryField {
        let n = self.len();
        BoundaryField {
            values: (0..n).map(|j| f(grid_angle(n, j))).collect(),
            grid_id: self.id,
        }
    }

    pub fn zeros(&self) -> BoundaryField {
        BoundaryField {
            values: vec![0.0; self.len()],
            grid_id: self.id,
        }
    }

    pub fn constant(&self, c: f64) -> BoundaryField {
        BoundaryField {
            values: vec![c; self.len()],
            grid_id: self.id,
        }
    }

    pub(crate) fn check(&self, f: &BoundaryField) -> Result<()> {
        if f.grid_id != self.id || f.values.len() != self.len() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `∫ f g dz` under the normalized measure.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.measure
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.measure.iter().zip(f).map(|(w, a)| w * a).sum()
    }

    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Arclength derivative `∂_s f = (∂_θ f) / |γ'|`.
    pub fn arclength_derivative(&self, f: &[f64]) -> Vec<f64> {
        let mut d = self.fourier.derivative(f);
        d.iter_mut()
            .zip(&self.conformal_weight)
            .for_each(|(d, w)| *d /= w);
        d
    }

    pub fn tangential_gradient(&self, field: &BoundaryField) -> Result<BoundaryField> {
        self.check(field)?;
        Ok(BoundaryField {
            values: self.arclength_derivative(&field.values),
            grid_id: self.id,
        })
    }

    /// `Vol_I = ∫ (1 + |∂_s I|²)^{1/2} dz`.
    pub fn volume_functional(&self, field: &BoundaryField) -> Result<f64> {
        self.check(field)?;
        Ok(self.volume_of(&field.values))
    }

    pub(crate) fn volume_of(&self, values: &[f64]) -> f64 {
        let d = self.arclength_derivative(values);
        self.measure
            .iter()
            .zip(&d)
            .map(|(w, g)| w * (1.0 + g * g).sqrt())
            .sum()
    }

    /// Pointwise line-element density `(1 + |∂_s I|²)^{1/2}` of the graph metric.
    pub fn graph_metric_weight(&self, field: &BoundaryField) -> Result<BoundaryField> {
        self.check(field)?;
        let d = self.arclength_derivative(&field.values);
        Ok(BoundaryField {
            values: d.iter().map(|g| (1.0 + g * g).sqrt()).collect(),
            grid_id: self.id,
        })
    }
}

fn check_grid_size(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::InvalidCurve(format!(
            "grid size {n} must be a power of two and at least 8"
        )));
    }
    Ok(())
}

/// Boundary correspondence `σ(θ)` of the conformal map from the unit disk onto a
/// star-shaped domain `r = r(σ)`, by fixed-point iteration of
/// `σ = θ + conj[log r(σ)]`.
fn theodorsen(preset: &CurvePreset, fourier: &Fourier) -> Result<Vec<f64>> {
    let n = fourier.len();
    let theta: Vec<f64> = (0..n).map(|j| grid_angle(n, j)).collect();
    let mut sigma = theta.clone();
    for _ in 0..5000 {
        let log_r: Vec<f64> = sigma.iter().map(|&s| preset.radius(s).ln()).collect();
        let conj = fourier.conjugate(&log_r);
        let mut change = 0.0f64;
        for j in 0..n {
            let next = theta[j] + conj[j];
            change = change.max((next - sigma[j]).abs());
            sigma[j] = next;
        }
        if change < 1e-14 {
            return Ok(sigma);
        }
    }
    Err(Error::InvalidCurve(format!(
        "conformal boundary correspondence did not converge for `{preset}`"
    )))
}

/// Real function sampled on the nodes of one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    values: Vec<f64>,
    grid_id: u64,
}

impl BoundaryField {
    pub fn new(curve: &ClosedCurve, values: Vec<f64>) -> Result<Self> {
        if values.len() != curve.len() {
            return Err(Error::Domain(format!(
                "field has {} values for a grid of {}",
                values.len(),
                curve.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field contains non-finite values".into()));
        }
        Ok(BoundaryField {
            values,
            grid_id: curve.id(),
        })
    }

    pub(crate) fn from_raw(values: Vec<f64>, grid_id: u64) -> Self {
        BoundaryField { values, grid_id }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BoundaryField {
        BoundaryField {
            values: self.values.iter().map(|&v| f(v)).collect(),
            grid_id: self.grid_id,
        }
    }

    pub fn zip_with(&self, other: &BoundaryField, f: impl Fn(f64, f64) -> f64) -> BoundaryField {
        debug_assert_eq!(self.grid_id, other.grid_id);
        BoundaryField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            grid_id: self.grid_id,
        }
    }

    pub fn scaled(&self, c: f64) -> BoundaryField {
        self.map(|v| c * v)
    }

    /// `self += c·other`
    pub fn axpy(&mut self, c: f64, other: &BoundaryField) {
        debug_assert_eq!(self.grid_id, other.grid_id);
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a += c * b);
    }
}
