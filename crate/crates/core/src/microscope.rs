//! Heisenberg's gamma-ray microscope: resolution-limited position
//! uncertainty, the transverse momentum kick of the scattered photon and
//! their product, which does not depend on the apparatus geometry.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quantum::Eta;

/// Largest half-aperture `D/2F` for which the small-angle reading holds.
pub const SMALL_ANGLE_LIMIT: f64 = 0.3;

/// Factor in the Rayleigh resolution criterion `1.22 λ/D`.
pub const RAYLEIGH_FACTOR: f64 = 1.22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolutionConvention {
    /// `δθ ≈ λ/D`.
    #[default]
    Plain,
    /// `δθ ≈ 1.22 λ/D`.
    Rayleigh,
}

impl ResolutionConvention {
    pub fn factor(self) -> f64 {
        match self {
            ResolutionConvention::Plain => 1.0,
            ResolutionConvention::Rayleigh => RAYLEIGH_FACTOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicroscopeSetup {
    pub wavelength: f64,
    pub diameter: f64,
    pub focal_length: f64,
    pub convention: ResolutionConvention,
    pub h: f64,
}

impl MicroscopeSetup {
    pub fn new(
        wavelength: f64,
        diameter: f64,
        focal_length: f64,
        convention: ResolutionConvention,
        h: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("wavelength", wavelength),
            ("diameter", diameter),
            ("focal_length", focal_length),
            ("h", h),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(Self {
            wavelength,
            diameter,
            focal_length,
            convention,
            h,
        })
    }

    /// Whether `D/2F` is small enough for `sin φ ≈ tan φ`.
    pub fn small_angle_valid(&self) -> bool {
        self.diameter / (2.0 * self.focal_length) <= SMALL_ANGLE_LIMIT
    }
}

/// `δq = c_R λF/D`.
pub fn position_uncertainty(setup: &MicroscopeSetup) -> f64 {
    setup.convention.factor() * setup.wavelength * setup.focal_length / setup.diameter
}

/// `δp = hD/(λF)`: the photon momentum `h/λ` times the aperture angle `D/F`.
pub fn momentum_uncertainty(setup: &MicroscopeSetup) -> f64 {
    setup.h * setup.diameter / (setup.wavelength * setup.focal_length)
}

/// `δq δp`, which reduces to `c_R h`.
pub fn indeterminacy_product(setup: &MicroscopeSetup) -> f64 {
    position_uncertainty(setup) * momentum_uncertainty(setup)
}

/// The original estimate before the aperture correction: `δq ∼ λ`, `δp ∼ h/λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WavelengthEstimate {
    pub position: f64,
    pub momentum: f64,
    pub product: f64,
}

pub fn wavelength_estimate(wavelength: f64, h: f64) -> WavelengthEstimate {
    let momentum = h / wavelength;
    WavelengthEstimate {
        position: wavelength,
        momentum,
        product: wavelength * momentum,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicroscopeSummary {
    pub setup: MicroscopeSetup,
    pub position_uncertainty: f64,
    pub momentum_uncertainty: f64,
    pub product: f64,
    pub small_angle_valid: bool,
    pub wavelength_estimate: WavelengthEstimate,
    pub eta: f64,
    /// `h/η`, the calibrated minimum of `δq δp_H`.
    pub h_over_eta: f64,
}

pub fn summarize(setup: &MicroscopeSetup, eta: Eta) -> MicroscopeSummary {
    MicroscopeSummary {
        setup: *setup,
        position_uncertainty: position_uncertainty(setup),
        momentum_uncertainty: momentum_uncertainty(setup),
        product: indeterminacy_product(setup),
        small_angle_valid: setup.small_angle_valid(),
        wavelength_estimate: wavelength_estimate(setup.wavelength, setup.h),
        eta: eta.value(),
        h_over_eta: setup.h / eta.value(),
    }
}
