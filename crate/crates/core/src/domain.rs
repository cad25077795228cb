use crate::error::Result;
use crate::geometry::{ClosedCurve, CurvePreset};
use crate::heatflow::HeatPropagator;
use crate::steklov::SteklovBasis;

/// A curve together with its Steklov basis and heat propagator, built once
/// and shared read-only by every solver and replica.
#[derive(Debug, Clone)]
pub struct Domain {
    pub curve: ClosedCurve,
    pub basis: SteklovBasis,
    pub heat: HeatPropagator,
}

impl Domain {
    pub fn new(curve: ClosedCurve) -> Result<Self> {
        let basis = SteklovBasis::from_curve(&curve)?;
        let heat = HeatPropagator::new(&curve)?;
        Ok(Domain { curve, basis, heat })
    }

    pub fn from_preset(preset: &CurvePreset, n: usize) -> Result<Self> {
        Self::new(ClosedCurve::from_preset(preset, n)?)
    }

    pub fn len(&self) -> usize {
        self.curve.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curve.is_empty()
    }
}
