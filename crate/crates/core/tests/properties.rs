//! Property tests for the field algebra, Fisher information, the Kennard
//! bound, the microscope relation and estimator efficiency.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use uncertainty_lab::estimation::{
    benchmark_estimator, cramer_rao_bound, fisher_information, fisher_length, Estimator, LocationModel,
};
use uncertainty_lab::fields::{
    differentiate, gaussian_density, integrate, make_grid, moments, DensityField, Grid1D, SampledField,
};
use uncertainty_lab::microscope::{
    indeterminacy_product, momentum_uncertainty, position_uncertainty, MicroscopeSetup, ResolutionConvention,
};
use uncertainty_lab::oracle::{kennard_product, WaveFunction};

fn grid() -> Grid1D {
    make_grid(80.0, 4096).unwrap()
}

/// Band-limited periodic field from `(mode, amplitude, phase)` triples.
fn trig_field(g: Grid1D, modes: &[(u32, f64, f64)]) -> SampledField {
    let k0 = 2.0 * PI / g.length();
    SampledField::from_fn(g, |q| {
        modes
            .iter()
            .map(|&(m, a, ph)| a * (m as f64 * k0 * q + ph).cos())
            .sum()
    })
    .unwrap()
}

fn modes() -> impl Strategy<Value = Vec<(u32, f64, f64)>> {
    prop::collection::vec((0u32..40, -2.0..2.0f64, 0.0..2.0 * PI), 1..6)
}

/// Mixture of up to three Gaussians as `(weight, center, width)`.
fn mixture() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.2..1.0f64, -2.0..2.0f64, 0.8..1.6f64), 1..4)
}

fn mixture_density(g: Grid1D, mix: &[(f64, f64, f64)], dilation: f64) -> DensityField {
    DensityField::from_fn(g, |q| {
        let x = q / dilation;
        mix.iter()
            .map(|(w, c, s)| w / s * (-0.5 * ((x - c) / s).powi(2)).exp())
            .sum()
    })
    .unwrap()
}

fn setup_params() -> impl Strategy<Value = (f64, f64, f64)> {
    (-3.0..1.0f64, -1.0..2.0f64, -2.0..1.0f64).prop_map(|(l, f, d)| (10f64.powf(l), 10f64.powf(f), 10f64.powf(d)))
}

fn convention() -> impl Strategy<Value = ResolutionConvention> {
    prop_oneof![Just(ResolutionConvention::Plain), Just(ResolutionConvention::Rayleigh)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_of_a_periodic_field_integrates_to_zero(m in modes()) {
        let f = trig_field(grid(), &m);
        prop_assert!(integrate(&differentiate(&f)).unwrap().abs() < 1e-10);
    }

    #[test]
    fn differentiation_is_linear(m1 in modes(), m2 in modes(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let g = grid();
        let (f, h) = (trig_field(g, &m1), trig_field(g, &m2));
        let combo: Vec<f64> = f.values().iter().zip(h.values()).map(|(x, y)| a * x + b * y).collect();
        let lhs = differentiate(&SampledField::new(g, combo).unwrap());
        let (df, dh) = (differentiate(&f), differentiate(&h));
        for ((l, x), y) in lhs.values().iter().zip(df.values()).zip(dh.values()) {
            prop_assert!((l - (a * x + b * y)).abs() < 1e-12 * (1.0 + l.abs()));
        }
    }

    #[test]
    fn gaussian_moments_recover_parameters(center in -3.0..3.0f64, s in 0.2..3.0f64) {
        let m = moments(&gaussian_density(&grid(), center, s).unwrap());
        prop_assert!((m.mean - center).abs() < 1e-8);
        prop_assert!((m.variance - s * s).abs() < 1e-8);
    }

    #[test]
    fn fisher_length_of_a_gaussian_is_its_width(s in 0.2..3.0f64) {
        let dq = fisher_length(&gaussian_density(&grid(), 0.0, s).unwrap()).unwrap();
        prop_assert!((dq - s).abs() / s < 1e-6);
    }

    #[test]
    fn fisher_information_is_translation_invariant(mix in mixture(), cells in -200isize..200) {
        let p = mixture_density(grid(), &mix, 1.0);
        let a = fisher_information(&p).unwrap();
        let b = fisher_information(&p.shifted(cells)).unwrap();
        prop_assert!((a - b).abs() / a < 1e-12);
    }

    #[test]
    fn fisher_information_scales_inversely_with_dilation(mix in mixture(), c in 0.5..2.0f64) {
        let g = grid();
        let a = fisher_information(&mixture_density(g, &mix, 1.0)).unwrap();
        let b = fisher_information(&mixture_density(g, &mix, c)).unwrap();
        prop_assert!((b * c * c - a).abs() / a < 1e-6, "I = {a}, I_c c^2 = {}", b * c * c);
    }

    #[test]
    fn microscope_product_is_scale_free(
        (lambda, f, d) in setup_params(),
        k in 0.01..100.0f64,
        conv in convention(),
    ) {
        let h = 2.0 * PI;
        let base = MicroscopeSetup::new(lambda, d, f, conv, h).unwrap();
        let scaled = MicroscopeSetup::new(k * lambda, k * d, k * f, conv, h).unwrap();
        let (a, b) = (indeterminacy_product(&base), indeterminacy_product(&scaled));
        prop_assert!((a - b).abs() / a < 1e-12);
        prop_assert_eq!(position_uncertainty(&base) * momentum_uncertainty(&base), a);
    }

    #[test]
    fn random_wavefunctions_respect_the_kennard_bound(
        parts in prop::collection::vec((-3.0..3.0f64, 0.6..2.0f64, -3.0..3.0f64, 0.1..1.0f64, 0.0..2.0 * PI), 1..4),
    ) {
        let psi = WaveFunction::from_fn(grid(), 1.0, 1.0, |q| {
            parts
                .iter()
                .map(|&(c, s, k, a, ph)| Complex64::from_polar(a * (-0.5 * ((q - c) / s).powi(2)).exp(), k * q + ph))
                .sum()
        });
        // Destructive interference can leave nothing to normalize.
        if let Ok(psi) = psi {
            prop_assert!(kennard_product(&psi) >= 0.5 * (1.0 - 1e-9));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn unbiased_estimators_never_beat_the_bound(
        sigma in 0.5..2.0f64,
        n in 2usize..40,
        seed in any::<u64>(),
        est in prop_oneof![Just(Estimator::Mean), Just(Estimator::Median), Just(Estimator::Ml)],
    ) {
        let model = LocationModel::gaussian(sigma).unwrap();
        let trials = 2000;
        let slack = 3.0 / (trials as f64).sqrt();
        let r = benchmark_estimator(&model, est, 0.3, n, trials, seed).unwrap();
        prop_assert!(r.efficiency > 0.0 && r.efficiency <= 1.0 + slack, "efficiency {}", r.efficiency);
        prop_assert!(r.variance >= cramer_rao_bound(&model, n).unwrap() * (1.0 - slack));
    }
}
