//! Quantum ensembles built from the Fisher length: Heisenberg momentum
//! spread, quadrature-sum momentum variance, the Fisher-augmented Hamiltonian
//! and its Madelung-form evolution.
//!
//! The field equations follow from `Ṡ = −δH_Q/δP`:
//!
//! ```text
//! Ṗ = −(P S'/m)'
//! Ṡ = −(S')²/2m + (4h²/2mη²) (√P)''/√P
//! ```
//!
//! With `η = 4π` the curvature coefficient is `ħ²/2m` and the pair is the
//! free Schrödinger equation under `ψ = √P e^{iS/ħ}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::classical::{classical_momentum_stats, ClassicalFlow, PotentialSpec};
use crate::dynamics::{self, Flow, Observer, Support};
use crate::error::{invalid, Result};
use crate::estimation::{fisher_length, FISHER_DENSITY_FLOOR};
use crate::fields::{DensityField, EnsembleState, Grid1D};

/// Heisenberg's dimensionless constant in `δq δp_H = h/η`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Eta(f64);

impl Eta {
    /// The calibration that reproduces standard quantum mechanics.
    pub const STANDARD: Eta = Eta(4.0 * PI);

    /// Accepts any positive value, including `+inf` for the classical limit.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value <= 0.0 {
            return Err(invalid("eta", format!("must be positive, got {value}")));
        }
        Ok(Eta(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `h²/η²`; equals `ħ²/4` at `η = 4π`.
    pub fn h_over_eta_squared(self, h: f64) -> f64 {
        let r = h / self.0;
        r * r
    }

    /// Coefficient `h²/(2mη²)` of the Fisher term in `H_Q`.
    pub fn fisher_coefficient(self, h: f64, mass: f64) -> f64 {
        self.h_over_eta_squared(h) / (2.0 * mass)
    }

    /// Coefficient `4h²/(2mη²)` of the quantum-potential term; `ħ²/2m` at `η = 4π`.
    pub fn curvature_coefficient(self, h: f64, mass: f64) -> f64 {
        4.0 * self.fisher_coefficient(h, mass)
    }
}

impl Default for Eta {
    fn default() -> Self {
        Eta::STANDARD
    }
}

impl TryFrom<f64> for Eta {
    type Error = crate::error::Error;

    fn try_from(v: f64) -> Result<Self> {
        Eta::new(v)
    }
}

impl From<Eta> for f64 {
    fn from(e: Eta) -> f64 {
        e.0
    }
}

/// `∫ P (P'/P)² dq` without resolvability checks.
fn fisher_integral(p: &DensityField) -> f64 {
    let values = p.values();
    let dp = p.grid().first_derivative(values);
    let total: f64 = values
        .iter()
        .zip(&dp)
        .filter(|(&v, _)| v >= FISHER_DENSITY_FLOOR)
        .map(|(&v, &d)| d * d / v)
        .sum();
    total * p.grid().spacing()
}

/// `δp_H = (h/η) / δq`.
pub fn heisenberg_momentum_spread(p: &DensityField, eta: Eta, h: f64) -> Result<f64> {
    Ok((h / eta.value()) / fisher_length(p)?)
}

/// `(δp_Q)² = ∫P[(S')² + (h²/η²)(P'/P)²] − (∫P S')²`.
pub fn quantum_momentum_variance(state: &EnsembleState, eta: Eta) -> f64 {
    let grad = state.phase_gradient();
    let p = state.density();
    let grid = state.grid();
    let second: Vec<f64> = p.values().iter().zip(&grad).map(|(p, g)| p * g * g).collect();
    let first: Vec<f64> = p.values().iter().zip(&grad).map(|(p, g)| p * g).collect();
    let mean = grid.sum(&first);
    let fisher = eta.h_over_eta_squared(state.constants().h()) * fisher_integral(p);
    grid.sum(&second) + fisher - mean * mean
}

/// `H_Q = ∫P[(S')²/2m + (h²/2mη²)(P'/P)²]`.
pub fn quantum_hamiltonian(state: &EnsembleState, eta: Eta) -> f64 {
    let m = state.mass();
    let grad = state.phase_gradient();
    let p = state.density();
    let kinetic: Vec<f64> = p
        .values()
        .iter()
        .zip(&grad)
        .map(|(p, g)| p * g * g / (2.0 * m))
        .collect();
    state.grid().sum(&kinetic)
        + eta.fisher_coefficient(state.constants().h(), m) * fisher_integral(p)
}

/// Snapshot of the uncertainty bookkeeping of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintySummary {
    pub fisher_length: f64,
    pub heisenberg_spread: f64,
    pub classical_variance: f64,
    pub quantum_variance: f64,
    pub mean_momentum: f64,
    pub hamiltonian: f64,
    /// `δq · δp_Q`.
    pub product: f64,
}

pub fn uncertainty_summary(state: &EnsembleState, eta: Eta) -> Result<UncertaintySummary> {
    let h = state.constants().h();
    let dq = fisher_length(state.density())?;
    let classical = classical_momentum_stats(state);
    let quantum_variance = quantum_momentum_variance(state, eta);
    Ok(UncertaintySummary {
        fisher_length: dq,
        heisenberg_spread: (h / eta.value()) / dq,
        classical_variance: classical.variance,
        quantum_variance,
        mean_momentum: classical.mean,
        hamiltonian: quantum_hamiltonian(state, eta),
        product: dq * quantum_variance.sqrt(),
    })
}

/// Safety factor on the dispersive step bound.
pub const DISPERSIVE_SAFETY: f64 = 0.5;

struct MadelungFlow {
    inner: ClassicalFlow,
    grid: Grid1D,
    curvature: f64,
    dispersive_bound: f64,
}

impl MadelungFlow {
    fn new(state: &EnsembleState, eta: Eta) -> Result<Self> {
        let grid = *state.grid();
        let h = state.constants().h();
        let m = state.mass();
        let dq = grid.spacing();
        let dispersive_bound = DISPERSIVE_SAFETY * m * dq * dq * eta.value().powi(2) / (8.0 * h);
        Ok(Self {
            inner: ClassicalFlow::new(state, &PotentialSpec::Zero)?,
            grid,
            curvature: eta.curvature_coefficient(h, m),
            dispersive_bound,
        })
    }
}

impl Flow for MadelungFlow {
    fn rates(&self, p: &[f64], s: &[f64], dp: &mut [f64], ds: &mut [f64]) {
        let n = p.len();
        let mut grad = vec![0.0; n];
        self.inner.continuity(p, s, dp, &mut grad);
        let m = self.inner.mass;
        if self.curvature == 0.0 {
            for i in 0..n {
                ds[i] = -grad[i] * grad[i] / (2.0 * m);
            }
            return;
        }
        let p1 = self.grid.first_derivative(p);
        let p2 = self.grid.second_derivative(p);
        for i in 0..n {
            // (√P)''/√P = P''/2P − P'²/4P²
            let r1 = p1[i] / p[i];
            let quantum = 0.5 * p2[i] / p[i] - 0.25 * r1 * r1;
            ds[i] = -grad[i] * grad[i] / (2.0 * m) + self.curvature * quantum;
        }
    }

    fn stable_dt(&self, _p: &[f64], s: &[f64], support: &Support) -> f64 {
        self.inner
            .velocity_bound(s, support)
            .min(self.dispersive_bound)
    }
}

/// Largest step accepted by [`evolve_madelung`] for the current state.
pub fn madelung_stable_dt(state: &EnsembleState, eta: Eta) -> Result<f64> {
    let flow = MadelungFlow::new(state, eta)?;
    let support = dynamics::find_support(state.density().values())?;
    let mut p = state.density().values().to_vec();
    let mut s = state.phase().values().to_vec();
    dynamics::fill_vacuum(&support, state.constants().h(), &mut p, &mut s);
    Ok(flow.stable_dt(&p, &s, &support))
}

/// Advances the Madelung pair generated by `H_Q` with RK4.
pub fn evolve_madelung(state: &EnsembleState, eta: Eta, dt: f64, steps: usize) -> Result<EnsembleState> {
    evolve_madelung_observed(state, eta, dt, steps, usize::MAX, &mut |_, _| {})
}

/// [`evolve_madelung`] reporting every `record_every`-th state to `observer`.
pub fn evolve_madelung_observed(
    state: &EnsembleState,
    eta: Eta,
    dt: f64,
    steps: usize,
    record_every: usize,
    observer: &mut Observer<'_>,
) -> Result<EnsembleState> {
    let flow = MadelungFlow::new(state, eta)?;
    dynamics::integrate_rk4(&flow, state, dt, steps, record_every, observer)
}
