//! Direct wavefunction reference: the Madelung map in both directions,
//! exact spectral propagation of the free Schrödinger equation and standard
//! quantum expectation values.
//!
//! The spectral stepper shares no numerics with the Madelung engine, so
//! agreement between the two is evidence rather than shared bias. A
//! Crank–Nicolson integrator on the 3-point Laplacian ([`CrankNicolson`])
//! provides an independent check on the spectral stepper itself.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::dynamics::{fill_vacuum, find_support};
use crate::error::{invalid, Error, Result};
use crate::fields::{fold, moments, Constants, DensityField, EnsembleState, Grid1D, PhaseField};

/// Complex samples of a free-particle wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid1D,
    values: Vec<Complex64>,
    hbar: f64,
    mass: f64,
    time: f64,
}

impl WaveFunction {
    /// Rescales `values` to unit norm.
    pub fn normalized(grid: Grid1D, mut values: Vec<Complex64>, hbar: f64, mass: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Constants::new(hbar)?;
        if !(mass.is_finite() && mass > 0.0) {
            return Err(invalid("mass", format!("must be positive, got {mass}")));
        }
        let norm = grid.sum(&values.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>());
        if norm <= 0.0 {
            return Err(invalid("psi", "wavefunction vanishes"));
        }
        let scale = norm.sqrt().recip();
        values.iter_mut().for_each(|z| *z *= scale);
        Ok(Self {
            grid,
            values,
            hbar,
            mass,
            time: 0.0,
        })
    }

    pub fn from_fn(grid: Grid1D, hbar: f64, mass: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.coordinates().into_iter().map(f).collect();
        Self::normalized(grid, values, hbar, mass)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn norm(&self) -> f64 {
        self.grid.sum(&self.probability())
    }

    /// `|ψ|²` sample by sample.
    pub fn probability(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn density(&self) -> DensityField {
        DensityField::from_evolved(self.grid, self.probability())
    }

    /// Multiplies by a global phase `e^{iθ}`.
    pub fn with_global_phase(mut self, theta: f64) -> Self {
        let w = Complex64::from_polar(1.0, theta);
        self.values.iter_mut().for_each(|z| *z *= w);
        self
    }
}

/// `ψ = √P e^{iS/ħ}`.
pub fn to_wavefunction(state: &EnsembleState) -> Result<WaveFunction> {
    let p = state.density().values();
    if let Some(i) = p.iter().position(|&v| v < 0.0) {
        return Err(invalid("density", format!("negative value {:e} at index {i}", p[i])));
    }
    let hbar = state.constants().hbar;
    let values = p
        .iter()
        .zip(state.phase().values())
        .map(|(&p, &s)| Complex64::from_polar(p.sqrt(), s / hbar))
        .collect();
    Ok(WaveFunction {
        grid: *state.grid(),
        values,
        hbar,
        mass: state.mass(),
        time: state.time(),
    })
}

/// Inverse Madelung map: `P = |ψ|²`, `S = ħ · unwrapped arg ψ`.
///
/// The phase is unwrapped across the support of `|ψ|²` starting from its
/// first index (index 0 when `ψ` has no vacuum), so `S` there equals
/// `ħ arg ψ`. Outside the support the phase of `ψ` is numerically
/// meaningless and `S` is continued smoothly from the support edges.
/// A sub-floor sample inside the support is a node and is rejected.
pub fn from_wavefunction(psi: &WaveFunction) -> Result<EnsembleState> {
    let p = psi.probability();
    let support = find_support(&p)?;
    let n = p.len();
    let h = 2.0 * PI * psi.hbar;
    let mut s = vec![0.0; n];
    let mut prev_arg = psi.values[support.start].arg();
    let mut acc = prev_arg;
    for i in support.indices() {
        let arg = psi.values[i].arg();
        acc += fold(arg - prev_arg, 2.0 * PI);
        prev_arg = arg;
        s[i] = psi.hbar * acc;
    }
    let mut p_fill = p.clone();
    fill_vacuum(&support, h, &mut p_fill, &mut s);
    let grid = psi.grid;
    Ok(EnsembleState {
        density: DensityField::from_evolved(grid, p),
        phase: PhaseField::from_evolved(grid, s),
        mass: psi.mass,
        time: psi.time,
        constants: Constants { hbar: psi.hbar },
    })
}

/// Angular wavenumbers in FFT order. The Nyquist entry is `−π/dq`.
pub fn wavenumbers(grid: &Grid1D) -> Vec<f64> {
    let n = grid.len() as isize;
    let k0 = grid.fundamental_wavenumber();
    (0..n)
        .map(|j| if j < n / 2 { j } else { j - n })
        .map(|j| j as f64 * k0)
        .collect()
}

struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl Spectral {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            n,
        }
    }

    fn to_momentum(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    fn to_position(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / self.n as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }
}

/// Free evolution by exact spectral stepping.
pub fn evolve_schrodinger(psi: &WaveFunction, dt: f64, steps: usize) -> Result<WaveFunction> {
    evolve_schrodinger_observed(psi, dt, steps, usize::MAX, &mut |_, _| {})
}

/// [`evolve_schrodinger`] reporting step 0, every `record_every`-th step and the last step.
///
/// Each step multiplies the discrete Fourier coefficients by
/// `exp(−iħk²dt/2m)`; the state returns to position space only when observed.
pub fn evolve_schrodinger_observed(
    psi: &WaveFunction,
    dt: f64,
    steps: usize,
    record_every: usize,
    observer: &mut dyn FnMut(usize, &WaveFunction),
) -> Result<WaveFunction> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let record_every = record_every.max(1);
    let spectral = Spectral::new(psi.grid.len());
    let propagator: Vec<Complex64> = wavenumbers(&psi.grid)
        .into_iter()
        .map(|k| Complex64::from_polar(1.0, -psi.hbar * k * k * dt / (2.0 * psi.mass)))
        .collect();
    observer(0, psi);
    let mut coeffs = psi.values.clone();
    spectral.to_momentum(&mut coeffs);
    let mut current = psi.clone();
    for step in 1..=steps {
        coeffs
            .iter_mut()
            .zip(&propagator)
            .for_each(|(c, u)| *c *= u);
        if step % record_every == 0 || step == steps {
            let mut values = coeffs.clone();
            spectral.to_position(&mut values);
            current = WaveFunction {
                values,
                time: psi.time + step as f64 * dt,
                ..psi.clone()
            };
            observer(step, &current);
        }
    }
    Ok(current)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QmMomentum {
    pub mean: f64,
    pub variance: f64,
}

/// `⟨p⟩` and `var(p)` of `−iħ∂_q` from the discrete Fourier spectrum.
///
/// The Nyquist mode is its own mirror image, so it contributes `(ħπ/dq)²` to
/// `⟨p²⟩` and nothing to `⟨p⟩`.
pub fn qm_momentum_stats(psi: &WaveFunction) -> QmMomentum {
    let n = psi.grid.len();
    let spectral = Spectral::new(n);
    let mut coeffs = psi.values.clone();
    spectral.to_momentum(&mut coeffs);
    let k = wavenumbers(&psi.grid);
    let (mut w0, mut w1, mut w2) = (0.0, 0.0, 0.0);
    for (j, (c, kj)) in coeffs.iter().zip(&k).enumerate() {
        let w = c.norm_sqr();
        let p = psi.hbar * kj;
        w0 += w;
        if j != n / 2 {
            w1 += w * p;
        }
        w2 += w * p * p;
    }
    let mean = w1 / w0;
    QmMomentum {
        mean,
        variance: w2 / w0 - mean * mean,
    }
}

/// `Δq Δp` for a normalized wavefunction.
pub fn kennard_product(psi: &WaveFunction) -> f64 {
    let var_q = moments(&psi.density()).variance;
    let var_p = qm_momentum_stats(psi).variance;
    (var_q * var_p).sqrt()
}

/// `(∫ (P_a − P_b)² dq)^{1/2}`.
pub fn density_l2(a: &DensityField, b: &DensityField) -> Result<f64> {
    if !a.grid().same_sampling(b.grid()) {
        return Err(Error::GridMismatch);
    }
    let sq: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .collect();
    Ok(a.grid().sum(&sq).sqrt())
}

/// Disagreement between an ensemble and a wavefunction on the same grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    /// L² distance between `P` and `|ψ|²`.
    pub density_l2: f64,
    /// L² distance between the two `S'` over the support of `|ψ|²`.
    pub gradient_l2: f64,
}

pub fn compare_with_oracle(state: &EnsembleState, psi: &WaveFunction) -> Result<Discrepancy> {
    let mapped = from_wavefunction(psi)?;
    let density_l2 = density_l2(state.density(), mapped.density())?;
    let support = find_support(mapped.density().values())?;
    let (ga, gb) = (state.phase_gradient(), mapped.phase_gradient());
    let sq: Vec<f64> = support.indices().map(|i| (ga[i] - gb[i]).powi(2)).collect();
    Ok(Discrepancy {
        density_l2,
        gradient_l2: (sq.iter().sum::<f64>() * state.grid().spacing()).sqrt(),
    })
}

/// Snapshot row `(q, Re ψ, Im ψ, |ψ|², S)`.
pub type SnapshotRow = [f64; 5];

/// Export rows; `S` is the inverse-map phase when it exists, otherwise the
/// phase unwrapped from index 0 over the whole grid.
pub fn snapshot_rows(psi: &WaveFunction) -> Vec<SnapshotRow> {
    let phase = match from_wavefunction(psi) {
        Ok(state) => state.phase.values().to_vec(),
        Err(_) => {
            let mut acc = psi.values[0].arg();
            let mut prev = acc;
            psi.values
                .iter()
                .map(|z| {
                    acc += fold(z.arg() - prev, 2.0 * PI);
                    prev = z.arg();
                    psi.hbar * acc
                })
                .collect()
        }
    };
    psi.values
        .iter()
        .enumerate()
        .map(|(i, z)| [psi.grid.coordinate(i), z.re, z.im, z.norm_sqr(), phase[i]])
        .collect()
}

/// Crank–Nicolson stepper for `iħψ̇ = −(ħ²/2m)ψ''` with the periodic
/// 3-point Laplacian, solved as a cyclic tridiagonal system by
/// Sherman–Morrison. Second order in `dq` and `dt`, exactly unitary.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    n: usize,
    /// Off-diagonal of the implicit matrix `1 + iHdt/2ħ`.
    off: Complex64,
    /// Off-diagonal of the explicit matrix `1 − iHdt/2ħ`.
    explicit_off: Complex64,
    explicit_diag: Complex64,
    gamma: Complex64,
    /// Thomas-algorithm factors of the modified tridiagonal matrix.
    c_prime: Vec<Complex64>,
    denom: Vec<Complex64>,
    /// Solution of the correction system.
    z: Vec<Complex64>,
    dt: f64,
}

impl CrankNicolson {
    pub fn new(grid: &Grid1D, hbar: f64, mass: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let n = grid.len();
        let dq = grid.spacing();
        let a = Complex64::new(0.0, hbar * dt / (4.0 * mass * dq * dq));
        let one = Complex64::new(1.0, 0.0);
        let diag = one + 2.0 * a;
        let off = -a;
        let gamma = -diag;
        let mut b = vec![diag; n];
        b[0] = diag - gamma;
        b[n - 1] = diag - off * off / gamma;

        let mut c_prime = vec![Complex64::default(); n];
        let mut denom = vec![Complex64::default(); n];
        denom[0] = b[0];
        c_prime[0] = off / denom[0];
        for i in 1..n {
            denom[i] = b[i] - off * c_prime[i - 1];
            c_prime[i] = off / denom[i];
        }
        let mut cn = Self {
            n,
            off,
            explicit_off: a,
            explicit_diag: one - 2.0 * a,
            gamma,
            c_prime,
            denom,
            z: Vec::new(),
            dt,
        };
        let mut u = vec![Complex64::default(); n];
        u[0] = gamma;
        u[n - 1] = off;
        cn.z = cn.thomas(&u);
        Ok(cn)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn thomas(&self, r: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x = vec![Complex64::default(); n];
        x[0] = r[0] / self.denom[0];
        for i in 1..n {
            x[i] = (r[i] - self.off * x[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= self.c_prime[i] * next;
        }
        x
    }

    pub fn step(&self, psi: &mut WaveFunction) {
        let n = self.n;
        let v = &psi.values;
        let rhs: Vec<Complex64> = (0..n)
            .map(|i| {
                let l = v[(i + n - 1) % n];
                let r = v[(i + 1) % n];
                self.explicit_diag * v[i] + self.explicit_off * (l + r)
            })
            .collect();
        let mut x = self.thomas(&rhs);
        let beta = self.off;
        let fact = (x[0] + beta * x[n - 1] / self.gamma)
            / (Complex64::new(1.0, 0.0) + self.z[0] + beta * self.z[n - 1] / self.gamma);
        x.iter_mut().zip(&self.z).for_each(|(xi, zi)| *xi -= fact * zi);
        psi.values = x;
        psi.time += self.dt;
    }

    pub fn evolve(&self, psi: &WaveFunction, steps: usize) -> WaveFunction {
        let mut out = psi.clone();
        for _ in 0..steps {
            self.step(&mut out);
        }
        out
    }
}
