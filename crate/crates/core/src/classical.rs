//! Classical Hamilton-Jacobi ensembles: continuity plus Hamilton-Jacobi
//! equation for `(P, S)`, energy and momentum statistics.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, advective_bound, Flow, Observer, Support};
use crate::error::{invalid, Error, Result};
use crate::fields::{EnsembleState, Grid1D};

/// External potential, in energy units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    /// `V = k q^2 / 2`.
    Harmonic { spring: f64 },
    Sampled { values: Vec<f64> },
}

impl PotentialSpec {
    pub fn sample(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        match self {
            PotentialSpec::Zero => Ok(vec![0.0; grid.len()]),
            PotentialSpec::Harmonic { spring } => {
                if !spring.is_finite() {
                    return Err(invalid("spring", "must be finite"));
                }
                Ok(grid
                    .coordinates()
                    .into_iter()
                    .map(|q| 0.5 * spring * q * q)
                    .collect())
            }
            PotentialSpec::Sampled { values } => {
                if values.len() != grid.len() {
                    return Err(Error::LengthMismatch {
                        expected: grid.len(),
                        got: values.len(),
                    });
                }
                if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { index });
                }
                Ok(values.clone())
            }
        }
    }
}

/// `v = S'/m`.
pub fn velocity_field(state: &EnsembleState) -> Vec<f64> {
    let m = state.mass();
    state.phase_gradient().into_iter().map(|g| g / m).collect()
}

/// `⟨E⟩ = ∫ P [(S')^2/2m + V] dq`.
pub fn classical_energy(state: &EnsembleState, potential: &PotentialSpec) -> Result<f64> {
    let v = potential.sample(state.grid())?;
    let grad = state.phase_gradient();
    let m = state.mass();
    let p = state.density().values();
    let integrand: Vec<f64> = (0..p.len())
        .map(|i| p[i] * (grad[i] * grad[i] / (2.0 * m) + v[i]))
        .collect();
    Ok(state.grid().sum(&integrand))
}

/// Free classical Hamiltonian `H_C`.
pub fn classical_hamiltonian(state: &EnsembleState) -> f64 {
    kinetic_energy(state)
}

pub(crate) fn kinetic_energy(state: &EnsembleState) -> f64 {
    let grad = state.phase_gradient();
    let m = state.mass();
    let p = state.density().values();
    let integrand: Vec<f64> = p
        .iter()
        .zip(&grad)
        .map(|(p, g)| p * g * g / (2.0 * m))
        .collect();
    state.grid().sum(&integrand)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumStats {
    pub mean: f64,
    pub variance: f64,
}

/// `⟨p⟩ = ∫ P S'` and `var(p_C) = ∫ P S'^2 − ⟨p⟩^2`.
pub fn classical_momentum_stats(state: &EnsembleState) -> MomentumStats {
    let grad = state.phase_gradient();
    let p = state.density().values();
    let grid = state.grid();
    let first: Vec<f64> = p.iter().zip(&grad).map(|(p, g)| p * g).collect();
    let second: Vec<f64> = p.iter().zip(&grad).map(|(p, g)| p * g * g).collect();
    let mean = grid.sum(&first);
    MomentumStats {
        mean,
        variance: grid.sum(&second) - mean * mean,
    }
}

/// Caustic threshold on `max|v'| dt`.
pub const CAUSTIC_LIMIT: f64 = 0.5;

pub(crate) struct ClassicalFlow {
    pub grid: Grid1D,
    pub mass: f64,
    pub h: f64,
    pub potential: Vec<f64>,
}

impl ClassicalFlow {
    pub fn new(state: &EnsembleState, potential: &PotentialSpec) -> Result<Self> {
        Ok(Self {
            grid: *state.grid(),
            mass: state.mass(),
            h: state.constants().h(),
            potential: potential.sample(state.grid())?,
        })
    }

    /// Continuity rate `-(P S'/m)'`; also leaves `S'` in `grad`.
    pub fn continuity(&self, p: &[f64], s: &[f64], dp: &mut [f64], grad: &mut [f64]) {
        self.grid.wrapped_first_derivative_into(s, self.h, grad);
        let flux: Vec<f64> = p.iter().zip(grad.iter()).map(|(p, g)| p * g / self.mass).collect();
        self.grid.first_derivative_into(&flux, dp);
        dp.iter_mut().for_each(|v| *v = -*v);
    }

    pub fn velocity_bound(&self, s: &[f64], support: &Support) -> f64 {
        let v: Vec<f64> = self
            .grid
            .first_derivative_with_modulus(s, self.h)
            .into_iter()
            .map(|g| g / self.mass)
            .collect();
        advective_bound(&self.grid, &v, support)
    }
}

impl Grid1D {
    pub(crate) fn first_derivative_with_modulus(&self, f: &[f64], modulus: f64) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.wrapped_first_derivative_into(f, modulus, &mut out);
        out
    }
}

// Without dispersion nothing refills the far tails of an advected packet, and
// the flux form loses positivity there once `ln P` changes by order one per
// cell. The classical engine therefore evolves `ln P`:
// d(ln P)/dt = -(v (ln P)' + v').
impl Flow for ClassicalFlow {
    fn log_density(&self) -> bool {
        true
    }

    fn rates(&self, ln_p: &[f64], s: &[f64], dl: &mut [f64], ds: &mut [f64]) {
        let n = ln_p.len();
        let mut grad = vec![0.0; n];
        let mut curvature = vec![0.0; n];
        let mut slope = vec![0.0; n];
        self.grid.wrapped_first_derivative_into(s, self.h, &mut grad);
        self.grid.wrapped_second_derivative_into(s, self.h, &mut curvature);
        self.grid.first_derivative_into(ln_p, &mut slope);
        for i in 0..n {
            dl[i] = -(grad[i] * slope[i] + curvature[i]) / self.mass;
            ds[i] = -grad[i] * grad[i] / (2.0 * self.mass) - self.potential[i];
        }
    }

    fn stable_dt(&self, _p: &[f64], s: &[f64], support: &Support) -> f64 {
        self.velocity_bound(s, support)
    }

    fn check(&self, s: &[f64], support: &Support, dt: f64, step: usize) -> Result<()> {
        let mut curvature = vec![0.0; s.len()];
        self.grid
            .wrapped_second_derivative_into(s, self.h, &mut curvature);
        let max = support
            .indices()
            .map(|i| curvature[i].abs() / self.mass)
            .fold(0.0, f64::max);
        let measure = max * dt;
        if measure > CAUSTIC_LIMIT {
            return Err(Error::Caustic { step, measure });
        }
        Ok(())
    }
}

/// Largest step accepted by [`evolve_classical`] for the current state.
pub fn classical_stable_dt(state: &EnsembleState) -> Result<f64> {
    let flow = ClassicalFlow::new(state, &PotentialSpec::Zero)?;
    let support = dynamics::find_support(state.density().values())?;
    let mut s = state.phase().values().to_vec();
    let mut p = state.density().values().to_vec();
    dynamics::fill_vacuum(&support, flow.h, &mut p, &mut s);
    Ok(flow.velocity_bound(&s, &support))
}

/// Advances `Ṗ = −(P S'/m)'`, `Ṡ = −S'^2/2m − V` with RK4.
pub fn evolve_classical(
    state: &EnsembleState,
    potential: &PotentialSpec,
    dt: f64,
    steps: usize,
) -> Result<EnsembleState> {
    evolve_classical_observed(state, potential, dt, steps, usize::MAX, &mut |_, _| {})
}

/// [`evolve_classical`] reporting every `record_every`-th state to `observer`.
pub fn evolve_classical_observed(
    state: &EnsembleState,
    potential: &PotentialSpec,
    dt: f64,
    steps: usize,
    record_every: usize,
    observer: &mut Observer<'_>,
) -> Result<EnsembleState> {
    let flow = ClassicalFlow::new(state, potential)?;
    dynamics::integrate_rk4(&flow, state, dt, steps, record_every, observer)
}
