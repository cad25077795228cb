//! Dirichlet-to-Neumann operator and its spectral calculus.
//!
//! Harmonicity is conformally invariant in the plane, so in the conformal
//! parameterization the DtN map of the domain is `|γ'|⁻¹ Λ₀`, where `Λ₀` is the
//! reference Fourier multiplier (`|k|` on the circle). Steklov pairs solve the
//! symmetric generalized problem `Λ₀ ψ = λ diag(|γ'|) ψ`, and eigenfields are
//! orthonormal in the normalized boundary measure.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryField, ClosedCurve};
use crate::heatflow::HeatPropagator;

/// Number of nonzero Steklov modes kept by a Galerkin projection `Π^η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ModeCutoff(pub usize);

impl ModeCutoff {
    /// `⌊η⁻¹⌋`, tolerant to the rounding of `1/(1/k)`.
    pub fn from_eta(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Domain(format!("η must be positive, got {eta}")));
        }
        Ok(ModeCutoff((1.0 / eta + 1e-9).floor() as usize))
    }

    pub fn count(self) -> usize {
        self.0
    }

    pub fn eta(self) -> f64 {
        1.0 / self.0 as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroMode {
    Keep,
    Drop,
}

/// Generalized-symmetric form of the DtN map on one curve.
#[derive(Debug, Clone)]
pub struct DtnOperator {
    stiffness: DMatrix<f64>,
    conformal_weight: Vec<f64>,
    grid_id: u64,
}

pub fn build_dtn(curve: &ClosedCurve) -> Result<DtnOperator> {
    let n = curve.len();
    let symbol = curve.reference_symbol();
    let mut stiffness = DMatrix::zeros(n, n);
    let mut delta = vec![0.0; n];
    for j in 0..n {
        delta[j] = 1.0;
        let column = curve
            .fourier()
            .apply_parity_symbol(&delta, |k| symbol.multipliers(k));
        stiffness.set_column(j, &nalgebra::DVector::from_vec(column));
        delta[j] = 0.0;
    }
    let asym = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| (stiffness[(i, j)] - stiffness[(j, i)]).abs())
        .fold(0.0, f64::max);
    if asym > 1e-10 {
        return Err(Error::Numerical(format!(
            "DtN stiffness asymmetric by {asym:.2e}"
        )));
    }
    Ok(DtnOperator {
        stiffness,
        conformal_weight: curve.conformal_weight().to_vec(),
        grid_id: curve.id(),
    })
}

impl DtnOperator {
    /// `Λ₀`, the reference multiplier as an `N × N` symmetric matrix.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// `-L f = |γ'|⁻¹ Λ₀ f`.
    pub fn apply(&self, f: &BoundaryField) -> Result<BoundaryField> {
        if f.grid_id() != self.grid_id {
            return Err(Error::GridMismatch);
        }
        let v = nalgebra::DVector::from_column_slice(f.values());
        let out = &self.stiffness * v;
        Ok(BoundaryField::from_raw(
            out.iter()
                .zip(&self.conformal_weight)
                .map(|(a, w)| a / w)
                .collect(),
            self.grid_id,
        ))
    }
}

/// Steklov eigenpairs `(λ_k, ψ_k)` sampled on the curve, with arclength
/// gradients of every eigenfield.
#[derive(Debug, Clone)]
pub struct SteklovBasis {
    eigenvalues: Vec<f64>,
    eigenfields: DMatrix<f64>,
    gradients: DMatrix<f64>,
    measure: Vec<f64>,
    grid_id: u64,
}

/// Numerically degenerate pairs come back in an arbitrary rotation; turn each
/// into the unique one whose second member vanishes at node 0.
fn canonicalize_pairs(eigenvalues: &[f64], fields: &mut DMatrix<f64>) {
    let n = eigenvalues.len();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
    let mut k = 1;
    while k + 1 < n {
        let pair = close(eigenvalues[k], eigenvalues[k + 1]);
        let triple = k + 2 < n && close(eigenvalues[k + 1], eigenvalues[k + 2]);
        if !pair || triple {
            k += 1;
            continue;
        }
        let (u0, v0) = (fields[(0, k)], fields[(0, k + 1)]);
        let r = u0.hypot(v0);
        if r > 1e-12 {
            let (c, s) = (u0 / r, v0 / r);
            for j in 0..n {
                let (u, v) = (fields[(j, k)], fields[(j, k + 1)]);
                fields[(j, k)] = c * u + s * v;
                fields[(j, k + 1)] = -s * u + c * v;
            }
            let scale = fields.column(k + 1).amax();
            let first = fields.column(k + 1).iter().copied().find(|p| p.abs() > 1e-8 * scale);
            if first.is_some_and(|f| f < 0.0) {
                fields.column_mut(k + 1).neg_mut();
            }
        }
        k += 2;
    }
}

pub fn eigendecompose(dtn: &DtnOperator, curve: &ClosedCurve) -> Result<SteklovBasis> {
    if dtn.grid_id != curve.id() {
        return Err(Error::GridMismatch);
    }
    let n = curve.len();
    let inv_sqrt: Vec<f64> = dtn.conformal_weight.iter().map(|w| w.sqrt().recip()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| {
        let v = 0.5 * (dtn.stiffness[(i, j)] + dtn.stiffness[(j, i)]);
        inv_sqrt[i] * v * inv_sqrt[j]
    });
    let eig = SymmetricEigen::try_new(sym, 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let measure = curve.normalized_measure().to_vec();
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenfields = DMatrix::zeros(n, n);
    for (k, &idx) in order.iter().enumerate() {
        let mut psi: Vec<f64> = (0..n)
            .map(|j| eig.eigenvectors[(j, idx)] * inv_sqrt[j])
            .collect();
        let norm = measure
            .iter()
            .zip(&psi)
            .map(|(w, p)| w * p * p)
            .sum::<f64>()
            .sqrt();
        psi.iter_mut().for_each(|p| *p /= norm);
        let scale = psi.iter().fold(0.0, |m: f64, p| m.max(p.abs()));
        if let Some(first) = psi.iter().find(|p| p.abs() > 1e-8 * scale) {
            if *first < 0.0 {
                psi.iter_mut().for_each(|p| *p = -*p);
            }
        }
        eigenvalues.push(eig.eigenvalues[idx]);
        eigenfields.set_column(k, &nalgebra::DVector::from_vec(psi));
    }
    if eigenvalues[0].abs() > 1e-8 || eigenvalues.get(1).is_some_and(|l| *l <= 1e-8) {
        return Err(Error::Numerical(format!(
            "DtN kernel is not one-dimensional (λ₀ = {:.2e}, λ₁ = {:.2e})",
            eigenvalues[0],
            eigenvalues.get(1).copied().unwrap_or(f64::NAN)
        )));
    }
    // constants are harmonic: the null pair is known exactly
    eigenvalues[0] = 0.0;
    eigenfields.set_column(0, &nalgebra::DVector::from_element(n, 1.0));
    canonicalize_pairs(&eigenvalues, &mut eigenfields);

    let mut gradients = DMatrix::zeros(n, n);
    for k in 0..n {
        let col: Vec<f64> = eigenfields.column(k).iter().copied().collect();
        let g = curve.arclength_derivative(&col);
        gradients.set_column(k, &nalgebra::DVector::from_vec(g));
    }
    Ok(SteklovBasis {
        eigenvalues,
        eigenfields,
        gradients,
        measure,
        grid_id: curve.id(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylRow {
    pub ell: usize,
    pub lambda: f64,
    pub slope: f64,
    pub sup_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylReport {
    /// `(k, λ_k, λ_k / k)` for `1 ≤ k ≤ ℓ_max`.
    pub ratios: Vec<(usize, f64, f64)>,
    pub rows: Vec<WeylRow>,
    /// Mean of the per-node least-squares slopes.
    pub slope: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    pub sup_residual: f64,
}

impl SteklovBasis {
    pub fn from_curve(curve: &ClosedCurve) -> Result<Self> {
        eigendecompose(&build_dtn(curve)?, curve)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Largest mode index trusted by diagnostics and cutoffs.
    pub fn resolved_modes(&self) -> usize {
        self.len() / 4
    }

    pub fn eigenfield(&self, k: usize) -> BoundaryField {
        BoundaryField::from_raw(self.eigenfields.column(k).iter().copied().collect(), self.grid_id)
    }

    pub fn eigenfield_values(&self, k: usize) -> nalgebra::DVectorView<'_, f64> {
        self.eigenfields.column(k)
    }

    pub fn gradient_values(&self, k: usize) -> nalgebra::DVectorView<'_, f64> {
        self.gradients.column(k)
    }

    pub fn check_cutoff(&self, cutoff: ModeCutoff) -> Result<()> {
        if cutoff.0 == 0 || cutoff.0 > self.resolved_modes() {
            return Err(Error::Resolution(format!(
                "cutoff {} outside the resolved range 1..={} of a {}-point grid",
                cutoff.0,
                self.resolved_modes(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Weighted coefficients `⟨ψ_k, f⟩` for every mode.
    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let wf = nalgebra::DVector::from_iterator(
            f.len(),
            f.iter().zip(&self.measure).map(|(a, w)| a * w),
        );
        (self.eigenfields.tr_mul(&wf)).iter().copied().collect()
    }

    /// `Σ_k c_k ψ_k` over the given modes.
    pub fn synthesize(&self, coeffs: &[f64], modes: RangeInclusive<usize>) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for k in modes {
            let c = coeffs[k];
            if c == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.eigenfields.column(k).iter()) {
                *o += c * p;
            }
        }
        out
    }

    pub fn spectral_apply(
        &self,
        f: &BoundaryField,
        multiplier: impl Fn(f64) -> f64,
        zero_mode: ZeroMode,
    ) -> Result<BoundaryField> {
        let first = match zero_mode {
            ZeroMode::Keep => {
                if !multiplier(0.0).is_finite() {
                    return Err(Error::Domain(
                        "multiplier is singular at λ = 0; use the drop policy".into(),
                    ));
                }
                0
            }
            ZeroMode::Drop => 1,
        };
        self.spectral_apply_modes(f, multiplier, first..=self.len() - 1)
    }

    pub fn spectral_apply_modes(
        &self,
        f: &BoundaryField,
        multiplier: impl Fn(f64) -> f64,
        modes: RangeInclusive<usize>,
    ) -> Result<BoundaryField> {
        if f.grid_id() != self.grid_id {
            return Err(Error::GridMismatch);
        }
        let mut c = self.coefficients(f.values());
        for k in modes.clone() {
            let m = multiplier(self.eigenvalues[k]);
            if !m.is_finite() {
                return Err(Error::Domain(format!(
                    "multiplier is not finite at λ_{k} = {}",
                    self.eigenvalues[k]
                )));
            }
            c[k] *= m;
        }
        Ok(BoundaryField::from_raw(self.synthesize(&c, modes), self.grid_id))
    }

    /// `Π^η f`: projection on the first `cutoff` nonzero modes.
    pub fn project(&self, f: &BoundaryField, cutoff: ModeCutoff) -> Result<BoundaryField> {
        self.check_cutoff(cutoff)?;
        self.spectral_apply_modes(f, |_| 1.0, 1..=cutoff.0)
    }

    /// `Π^⊥ f`: removes the constant mode.
    pub fn project_perp(&self, f: &BoundaryField) -> Result<BoundaryField> {
        self.spectral_apply(f, |_| 1.0, ZeroMode::Drop)
    }

    /// `(μ - L)^{-1} f`.
    pub fn resolvent(&self, f: &BoundaryField, mu: f64) -> Result<BoundaryField> {
        if mu <= 0.0 {
            return Err(Error::Domain(format!("resolvent needs μ > 0, got {mu}")));
        }
        self.spectral_apply(f, |l| 1.0 / (mu + l), ZeroMode::Keep)
    }

    /// `(Σ_k (1+λ_k)^{2α} ⟨ψ_k, f⟩²)^{1/2}`.
    pub fn sobolev_norm(&self, f: &[f64], alpha: f64) -> f64 {
        let c = self.coefficients(f);
        self.sobolev_norm_from_coefficients(&c, alpha)
    }

    pub fn sobolev_norm_from_coefficients(&self, c: &[f64], alpha: f64) -> f64 {
        c.iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| (1.0 + l.max(0.0)).powf(2.0 * alpha) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn weyl_diagnostics(&self, ell_max: usize) -> Result<WeylReport> {
        if ell_max == 0 || ell_max > self.resolved_modes() {
            return Err(Error::Resolution(format!(
                "ℓ_max = {ell_max} outside the resolved range 1..={}",
                self.resolved_modes()
            )));
        }
        let n = self.len();
        let lambdas: Vec<f64> = (1..=ell_max).map(|l| self.eigenvalues[l]).collect();
        let lam_sq: f64 = lambdas.iter().map(|l| l * l).sum();

        // partial[ℓ-1][z] = Σ_{j ≤ ℓ} ψ_j(z)²
        let mut partial = vec![vec![0.0; n]; ell_max];
        let mut running: Vec<f64> = self.eigenfields.column(0).iter().map(|p| p * p).collect();
        for ell in 1..=ell_max {
            for (r, p) in running.iter_mut().zip(self.eigenfields.column(ell).iter()) {
                *r += p * p;
            }
            partial[ell - 1].clone_from(&running);
        }
        let slopes: Vec<f64> = (0..n)
            .map(|z| {
                (0..ell_max)
                    .map(|i| partial[i][z] * lambdas[i])
                    .sum::<f64>()
                    / lam_sq
            })
            .collect();
        let slope = slopes.iter().sum::<f64>() / n as f64;
        let slope_min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
        let slope_max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let rows: Vec<WeylRow> = (0..ell_max)
            .map(|i| {
                let sup = (0..n)
                    .map(|z| (partial[i][z] - slopes[z] * lambdas[i]).abs())
                    .fold(0.0, f64::max);
                WeylRow {
                    ell: i + 1,
                    lambda: lambdas[i],
                    slope,
                    sup_residual: sup,
                }
            })
            .collect();
        let sup_residual = rows.iter().map(|r| r.sup_residual).fold(0.0, f64::max);
        let ratios = (1..=ell_max)
            .map(|k| (k, self.eigenvalues[k], self.eigenvalues[k] / k as f64))
            .collect();
        Ok(WeylReport {
            ratios,
            rows,
            slope,
            slope_min,
            slope_max,
            sup_residual,
        })
    }

    /// `‖(Δ_{∂M} + L²) ψ_k‖_{L²}`, the action of the order-zero remainder on one mode.
    pub fn pdo_defect(&self, heat: &HeatPropagator, k: usize) -> Result<f64> {
        if k > self.resolved_modes() {
            return Err(Error::Resolution(format!(
                "mode {k} beyond the resolved range of {}",
                self.resolved_modes()
            )));
        }
        let psi: Vec<f64> = self.eigenfields.column(k).iter().copied().collect();
        let lap = heat.laplace_beltrami(&psi);
        let l2 = self.eigenvalues[k] * self.eigenvalues[k];
        let r: Vec<f64> = lap.iter().zip(&psi).map(|(a, p)| a + l2 * p).collect();
        Ok(self
            .measure
            .iter()
            .zip(&r)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurvePreset;

    fn basis(preset: &str, n: usize) -> (ClosedCurve, SteklovBasis) {
        let c = ClosedCurve::from_preset(&preset.parse().unwrap(), n).unwrap();
        let b = SteklovBasis::from_curve(&c).unwrap();
        (c, b)
    }

    #[test]
    fn disk_spectrum_pairs() {
        let (_, b) = basis("disk", 64);
        assert_eq!(b.eigenvalue(0), 0.0);
        for k in 1..=16 {
            assert!((b.eigenvalue(2 * k - 1) - k as f64).abs() < 1e-10);
            assert!((b.eigenvalue(2 * k) - k as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn dtn_kills_constants() {
        let c = ClosedCurve::from_preset(&CurvePreset::Disk, 32).unwrap();
        let dtn = build_dtn(&c).unwrap();
        assert!(dtn.apply(&c.constant(2.0)).unwrap().sup_norm() < 1e-13);
        let s = dtn.apply(&c.field_fn(|t| (3.0 * t).sin())).unwrap();
        for (a, j) in s.values().iter().zip(0..) {
            let t = crate::fourier::grid_angle(32, j);
            assert!((a - 3.0 * (3.0 * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        for p in ["disk", "ellipse:1.5:1"] {
            let (_, b) = basis(p, 64);
            let n = b.len();
            let mut worst = 0.0f64;
            for j in 0..n {
                for k in 0..n {
                    let g: f64 = (0..n)
                        .map(|i| b.measure[i] * b.eigenfields[(i, j)] * b.eigenfields[(i, k)])
                        .sum();
                    let target = if j == k { 1.0 } else { 0.0 };
                    worst = worst.max((g - target).abs());
                }
            }
            assert!(worst < 1e-8, "{p}: {worst}");
        }
    }

    #[test]
    fn zero_mode_policy() {
        let (c, b) = basis("disk", 32);
        let f = c.field_fn(|t| 1.0 + t.cos());
        assert!(matches!(
            b.spectral_apply(&f, |l| l.powf(-0.5), ZeroMode::Keep),
            Err(Error::Domain(_))
        ));
        let same = b.spectral_apply(&f, |_| 1.0, ZeroMode::Keep).unwrap();
        for (a, e) in same.values().iter().zip(f.values()) {
            assert!((a - e).abs() < 1e-12);
        }
        let g = b.spectral_apply(&f, |l| l.powf(-0.5), ZeroMode::Drop).unwrap();
        assert!(c.mean(g.values()).abs() < 1e-12);
    }

    #[test]
    fn eigenrelation_for_fractional_power() {
        let (_, b) = basis("ellipse:1.5:1", 64);
        for k in [1, 5, 12] {
            let psi = b.eigenfield(k);
            let out = b.spectral_apply(&psi, |l| l.powf(-0.5), ZeroMode::Drop).unwrap();
            let s = b.eigenvalue(k).powf(-0.5);
            for (a, p) in out.values().iter().zip(psi.values()) {
                assert!((a - s * p).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn resolvent_on_first_disk_mode() {
        let (_, b) = basis("disk", 32);
        let psi = b.eigenfield(1);
        let r = b.resolvent(&psi, 2.0).unwrap();
        for (a, p) in r.values().iter().zip(psi.values()) {
            assert!((a - p / 3.0).abs() < 1e-12);
        }
        assert!(b.resolvent(&psi, 0.0).is_err());
    }

    #[test]
    fn sobolev_norm_simple_cases() {
        let (c, b) = basis("disk", 64);
        for alpha in [-1.0, 0.0, 0.5, 2.0] {
            assert!((b.sobolev_norm(c.constant(-3.0).values(), alpha) - 3.0).abs() < 1e-12);
        }
        for k in [1usize, 4, 7] {
            let freq = k.div_ceil(2) as f64;
            let v: Vec<f64> = b.eigenfield_values(k).iter().copied().collect();
            assert!((b.sobolev_norm(&v, 1.0) - (1.0 + freq)).abs() < 1e-10);
        }
    }

    #[test]
    fn cutoff_from_eta_rounding() {
        for k in 1..200usize {
            assert_eq!(ModeCutoff::from_eta(1.0 / k as f64).unwrap().count(), k);
        }
        assert!(ModeCutoff::from_eta(0.0).is_err());
        let (_, b) = basis("disk", 64);
        assert!(b.check_cutoff(ModeCutoff(16)).is_ok());
        assert!(matches!(b.check_cutoff(ModeCutoff(17)), Err(Error::Resolution(_))));
    }
}
