//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Reference resolution: L = 40, N = 2048, ħ = m = 1, dt from the stability rules.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use uncertainty_lab::classical::{
    classical_hamiltonian, classical_momentum_stats, evolve_classical_observed, PotentialSpec,
};
use uncertainty_lab::estimation::{benchmark_estimator, fisher_length, Estimator, LocationModel};
use uncertainty_lab::fields::{
    gaussian_density, make_grid, moments, Constants, DensityField, EnsembleState, Grid1D, PhaseField,
};
use uncertainty_lab::microscope::{indeterminacy_product, MicroscopeSetup, ResolutionConvention};
use uncertainty_lab::oracle::{
    compare_with_oracle, density_l2, evolve_schrodinger, evolve_schrodinger_observed, kennard_product,
    qm_momentum_stats, to_wavefunction, CrankNicolson, WaveFunction,
};
use uncertainty_lab::quantum::{
    evolve_madelung, evolve_madelung_observed, heisenberg_momentum_spread, madelung_stable_dt,
    quantum_hamiltonian, quantum_momentum_variance, Eta,
};

const L: f64 = 40.0;
const N: usize = 2048;
const HBAR: f64 = 1.0;
const T: f64 = 2.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn h() -> f64 {
    Constants::default().h()
}

fn gaussian_state(grid: Grid1D, s: f64, phase: PhaseField) -> EnsembleState {
    EnsembleState::new(gaussian_density(&grid, 0.0, s).unwrap(), phase, 1.0, Constants::default()).unwrap()
}

fn reference_state() -> EnsembleState {
    let g = make_grid(L, N).unwrap();
    gaussian_state(g, 1.0, PhaseField::zero(g))
}

/// `(dt, steps)` reaching `t` exactly with `dt` at or below the stability bound.
fn plan(state: &EnsembleState, eta: Eta, t: f64) -> (f64, usize) {
    let bound = madelung_stable_dt(state, eta).unwrap();
    let steps = (t / bound).ceil() as usize;
    (t / steps as f64, steps)
}

/// Node-free random state: Gaussian mixture density with a smooth random
/// Fourier phase plus a commensurate boost.
fn random_state(rng: &mut ChaCha20Rng) -> EnsembleState {
    let g = make_grid(L, N).unwrap();
    let components = rng.random_range(1..=3);
    let mix: Vec<(f64, f64, f64)> = (0..components)
        .map(|_| {
            (
                rng.random_range(0.2..1.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(0.8..2.0),
            )
        })
        .collect();
    let density = DensityField::from_fn(g, |q| {
        mix.iter()
            .map(|(w, c, s)| w / s * (-0.5 * ((q - c) / s).powi(2)).exp())
            .sum()
    })
    .unwrap();
    let k0 = 2.0 * PI / L;
    let modes: Vec<(f64, f64, f64)> = (1..=4)
        .map(|k| (k as f64 * k0, rng.random_range(-0.8..0.8), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let boost = rng.random_range(-3i32..=3) as f64 * h() / L;
    let phase = PhaseField::from_fn(g, |q| {
        boost * q + modes.iter().map(|(k, a, ph)| a * (k * q + ph).sin()).sum::<f64>()
    })
    .unwrap();
    EnsembleState::new(density, phase, 1.0, Constants::default()).unwrap()
}

fn random_states() -> Vec<EnsembleState> {
    let mut rng = ChaCha20Rng::seed_from_u64(20260);
    (0..12).map(|_| random_state(&mut rng)).collect()
}

fn criterion_1() -> Outcome {
    let g = make_grid(L, N).unwrap();
    let mut worst = 0.0f64;
    let mut fisher_dev = 0.0f64;
    for s in [0.5, 1.0, 2.0] {
        let p = gaussian_density(&g, 0.0, s).unwrap();
        let dq = fisher_length(&p).unwrap();
        let dp = heisenberg_momentum_spread(&p, Eta::STANDARD, h()).unwrap();
        worst = worst.max(rel(dq * dp, 0.5 * HBAR));
        fisher_dev = fisher_dev.max(rel(dq, s));
    }
    outcome(
        worst < 1e-8,
        format!("max rel |δq δp_H − ħ/2| = {worst:.2e} (limit 1e-8); max rel |δq − s| = {fisher_dev:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let states = random_states();
    let mut worst = 0.0f64;
    for st in &states {
        let ensemble = quantum_momentum_variance(st, Eta::STANDARD);
        let wave = qm_momentum_stats(&to_wavefunction(st).unwrap()).variance;
        worst = worst.max(rel(ensemble, wave));
    }
    outcome(
        worst < 1e-6,
        format!("{} random states, max rel discrepancy {worst:.2e} (limit 1e-6)", states.len()),
    )
}

/// Madelung vs oracle density L² at `t = 2` on an `n`-point grid.
fn equivalence_at(n: usize) -> (f64, f64) {
    let g = make_grid(L, n).unwrap();
    let st = gaussian_state(g, 1.0, PhaseField::zero(g));
    let (dt, steps) = plan(&st, Eta::STANDARD, T);
    let m = evolve_madelung(&st, Eta::STANDARD, dt, steps).unwrap();
    let psi = evolve_schrodinger(&to_wavefunction(&st).unwrap(), dt, steps).unwrap();
    (compare_with_oracle(&m, &psi).unwrap().density_l2, dt)
}

fn criterion_3() -> Outcome {
    let (coarse, dt_coarse) = equivalence_at(N);
    let (fine, dt_fine) = equivalence_at(2 * N);
    let ratio = coarse / fine;
    outcome(
        coarse < 1e-3 && ratio >= 4.0,
        format!(
            "L2(N={N}) = {coarse:.3e} (limit 1e-3), L2(N={}) = {fine:.3e}, decrease {ratio:.1}x (need >= 4), dt ratio {:.4}",
            2 * N,
            dt_fine / dt_coarse
        ),
    )
}

fn criterion_4() -> Outcome {
    let st = reference_state();
    let (dt, steps) = plan(&st, Eta::STANDARD, T);
    let madelung = moments(evolve_madelung(&st, Eta::STANDARD, dt, steps).unwrap().density()).variance;
    let psi0 = to_wavefunction(&st).unwrap();
    let oracle = moments(&evolve_schrodinger(&psi0, dt, steps).unwrap().density()).variance;
    let cn = CrankNicolson::new(st.grid(), HBAR, 1.0, 1e-3).unwrap();
    let cn_var = moments(&cn.evolve(&psi0, 2000).density()).variance;
    let (em, eo, ec) = (rel(madelung, 2.0), rel(oracle, 2.0), rel(cn_var, oracle));
    outcome(
        em < 1e-3 && eo < 1e-8 && ec < 1e-4,
        format!(
            "Madelung var = {madelung:.12} (rel {em:.1e}, limit 1e-3); oracle var = {oracle:.12} (rel {eo:.1e}, limit 1e-8); Crank-Nicolson vs oracle rel {ec:.1e} (limit 1e-4)"
        ),
    )
}

fn criterion_5() -> Outcome {
    let st = reference_state();
    let (dt, steps) = plan(&st, Eta::STANDARD, T);
    let var0 = moments(st.density()).variance;
    let evolve = |eta: f64| evolve_madelung(&st, Eta::new(eta).unwrap(), dt, steps).unwrap();
    let growth = |s: &EnsembleState| moments(s.density()).variance - var0;
    let standard = growth(&evolve(4.0 * PI));
    let classical_limit = growth(&evolve(4.0 * PI * 1e3));
    let ratio = classical_limit / standard;

    let classical = evolve_classical_observed(&st, &PotentialSpec::Zero, dt, steps, usize::MAX, &mut |_, _| {})
        .unwrap();
    let distances: Vec<f64> = [4.0 * PI, 40.0 * PI, 400.0 * PI]
        .iter()
        .map(|&eta| density_l2(evolve(eta).density(), classical.density()).unwrap())
        .collect();
    let monotone = distances.windows(2).all(|w| w[1] < w[0]);
    outcome(
        ratio <= 1e-6 * (1.0 + 1e-9) && monotone,
        format!(
            "growth ratio {ratio:.10e} (limit 1e-6, exact value 1e-6); L2 to classical over eta = 4pi, 40pi, 400pi: {:.3e}, {:.3e}, {:.3e}",
            distances[0], distances[1], distances[2]
        ),
    )
}

fn criterion_6() -> Outcome {
    let model = LocationModel::gaussian(1.0).unwrap();
    let trials = 10_000;
    let mean = benchmark_estimator(&model, Estimator::Mean, 0.0, 100, trials, 1).unwrap();
    let median = benchmark_estimator(&model, Estimator::Median, 0.0, 100, trials, 1).unwrap();
    // Each run is judged against its own statistical slack 1 + 3/sqrt(trials).
    let slack_of = |trials: usize| 1.0 + 3.0 / (trials as f64).sqrt();
    let mut worst = mean.efficiency / slack_of(mean.trials);
    worst = worst.max(median.efficiency / slack_of(median.trials));
    for seed in 0..5 {
        for est in Estimator::ALL {
            for n in [2, 10, 100] {
                let r = benchmark_estimator(&model, est, 0.0, n, 2_000, seed).unwrap();
                worst = worst.max(r.efficiency / slack_of(r.trials));
            }
        }
    }
    let mean_err = rel(mean.variance, 0.01);
    let median_ratio = median.variance / median.bound;
    outcome(
        mean_err < 0.05 && (1.45..=1.70).contains(&median_ratio) && worst <= 1.0,
        format!(
            "mean var {:.5e} (rel {mean_err:.3}, limit 0.05); median var/bound {median_ratio:.4} (range [1.45, 1.70]); max efficiency/slack {worst:.4} over 47 runs (limit 1)",
            mean.variance
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut worst_c = 0.0f64;
    let mut worst_q = 0.0f64;
    let mut records = 0usize;
    let g = make_grid(L, N).unwrap();
    let classical_cases = [
        gaussian_state(g, 1.0, PhaseField::quadratic(g, 0.3).unwrap()),
        gaussian_state(g, 1.5, PhaseField::linear(g, 2.0 * h() / L).unwrap()),
    ];
    for st in &classical_cases {
        let bound = uncertainty_lab::classical::classical_stable_dt(st).unwrap();
        evolve_classical_observed(st, &PotentialSpec::Zero, 0.9 * bound, 400, 1, &mut |_, s| {
            let mp = classical_momentum_stats(s);
            let two_m_h = 2.0 * s.mass() * classical_hamiltonian(s);
            worst_c = worst_c.max((mp.variance - (two_m_h - mp.mean * mp.mean)).abs() / two_m_h);
            records += 1;
        })
        .unwrap();
    }
    let mut quantum_cases = vec![reference_state()];
    quantum_cases.extend(random_states().into_iter().take(3));
    for st in &quantum_cases {
        let (dt, _) = plan(st, Eta::STANDARD, 1.0);
        evolve_madelung_observed(st, Eta::STANDARD, dt, 400, 1, &mut |_, s| {
            let two_m_h = 2.0 * s.mass() * quantum_hamiltonian(s, Eta::STANDARD);
            let mean = classical_momentum_stats(s).mean;
            let var = quantum_momentum_variance(s, Eta::STANDARD);
            worst_q = worst_q.max((var - (two_m_h - mean * mean)).abs() / two_m_h);
            records += 1;
        })
        .unwrap();
    }
    outcome(
        worst_c < 1e-10 && worst_q < 1e-10,
        format!("{records} recorded steps; classical identity {worst_c:.2e}, quantum identity {worst_q:.2e} (limit 1e-10)"),
    )
}

fn criterion_8() -> Outcome {
    let st = reference_state();
    let psi0 = to_wavefunction(&st).unwrap();
    let initial = rel(kennard_product(&psi0), 0.5 * HBAR);
    let mut min_ratio = f64::INFINITY;
    let mut count = 0usize;
    let mut visit = |psi: &WaveFunction| {
        min_ratio = min_ratio.min(kennard_product(psi) / (0.5 * HBAR));
        count += 1;
    };
    let (dt, steps) = plan(&st, Eta::STANDARD, T);
    evolve_schrodinger_observed(&psi0, dt, steps, 50, &mut |_, psi| visit(psi)).unwrap();
    evolve_madelung_observed(&st, Eta::STANDARD, dt, steps, 50, &mut |_, s| visit(&to_wavefunction(s).unwrap()))
        .unwrap();
    for s in random_states() {
        visit(&to_wavefunction(&s).unwrap());
    }
    // Random complex wavefunctions with independent real and imaginary parts.
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let g = make_grid(L, N).unwrap();
    for _ in 0..20 {
        let (c1, c2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let (s1, s2) = (rng.random_range(0.6..2.0), rng.random_range(0.6..2.0));
        let k = rng.random_range(-3.0..3.0);
        let psi = WaveFunction::from_fn(g, HBAR, 1.0, |q| {
            let a = (-0.5 * ((q - c1) / s1).powi(2)).exp();
            let b = (-0.5 * ((q - c2) / s2).powi(2)).exp();
            Complex64::new(a, 0.0) + Complex64::from_polar(b, k * q)
        })
        .unwrap();
        visit(&psi);
    }
    outcome(
        min_ratio >= 1.0 - 1e-9 && initial < 1e-8,
        format!(
            "{count} wavefunctions, min Δq Δp / (ħ/2) = {min_ratio:.12} (limit 1 - 1e-9); initial Gaussian rel deviation {initial:.1e} (limit 1e-8)"
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let lambda = 10f64.powf(rng.random_range(-3.0..1.0));
        let f = 10f64.powf(rng.random_range(-1.0..2.0));
        let d = 10f64.powf(rng.random_range(-2.0..1.0));
        for (conv, factor) in [(ResolutionConvention::Plain, 1.0), (ResolutionConvention::Rayleigh, 1.22)] {
            let setup = MicroscopeSetup::new(lambda, d, f, conv, h()).unwrap();
            worst = worst.max(rel(indeterminacy_product(&setup), factor * h()));
        }
    }
    outcome(worst < 1e-12, format!("100 setups x 2 conventions, max rel error {worst:.2e} (limit 1e-12)"))
}

fn criterion_10() -> Outcome {
    let g = make_grid(L, N).unwrap();
    let cases = [
        reference_state(),
        gaussian_state(g, 1.0, PhaseField::linear(g, 4.0 * h() / L).unwrap()),
    ];
    let steps = 1000;
    let (mut norm, mut energy, mut oracle) = (0.0f64, 0.0f64, 0.0f64);
    for st in &cases {
        let (dt, _) = plan(st, Eta::STANDARD, 1.0);
        let h0 = quantum_hamiltonian(st, Eta::STANDARD);
        evolve_madelung_observed(st, Eta::STANDARD, dt, steps, 1, &mut |_, s| {
            norm = norm.max((s.density().norm() - 1.0).abs());
            energy = energy.max(rel(quantum_hamiltonian(s, Eta::STANDARD), h0));
        })
        .unwrap();
        let psi = to_wavefunction(st).unwrap();
        evolve_schrodinger_observed(&psi, dt, steps, 1, &mut |_, p| {
            oracle = oracle.max((p.norm() - 1.0).abs());
        })
        .unwrap();
    }
    outcome(
        norm < 1e-8 && energy < 1e-6 && oracle < 1e-9,
        format!("over {steps} steps: norm drift {norm:.2e} (limit 1e-8), H_Q drift {energy:.2e} (limit 1e-6), oracle norm drift {oracle:.2e} (limit 1e-9)"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("minimum-uncertainty identity", criterion_1),
        ("momentum-variance consistency", criterion_2),
        ("Madelung-Schrödinger equivalence", criterion_3),
        ("free-packet spreading", criterion_4),
        ("classical limit", criterion_5),
        ("Cramér-Rao compliance", criterion_6),
        ("identity ledger", criterion_7),
        ("Kennard bound", criterion_8),
        ("microscope algebra", criterion_9),
        ("conservation suite", criterion_10),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let status = if o.passed { "PASS" } else { "FAIL" };
        failures += usize::from(!o.passed);
        println!(
            "criterion {:>2} {status}  {name} [{:.1}s]: {}",
            k + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
