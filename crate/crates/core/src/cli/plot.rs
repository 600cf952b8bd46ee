//! gnuplot scripts for the CSV outputs. Run from the output directory:
//! `gnuplot plots.gp` writes one PNG per plot.

use std::fmt::Write;

use super::config::{Experiment, PhaseSpec};
use super::report::{RunReport, Table};

const PREAMBLE: &str = "\
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,600
set grid
";

/// Builds a script that plots the run's tables by relative path.
pub fn emit_plot_script(report: &RunReport, tables: &[Table]) -> String {
    let config = &report.config;
    let mut s = String::new();
    writeln!(s, "# {} plots for {}", report.generator.name, config.experiment.name()).unwrap();
    s.push_str(PREAMBLE);
    let has = |file: &str| tables.iter().any(|t| t.file == file);
    let hbar = config.constants.hbar;
    let h = 2.0 * std::f64::consts::PI * hbar;
    let eta = config.quantum.eta.value();

    match config.experiment {
        Experiment::EvolveQuantum | Experiment::EvolveClassical if has("timeseries.csv") => {
            let s0 = config.initial.width;
            let m = config.constants.mass;
            // The quantum term acts like ħ_eff = 2h/η; it vanishes classically.
            let hbar_eff = if config.experiment == Experiment::EvolveQuantum { 2.0 * h / eta } else { 0.0 };
            writeln!(s, "\nset output 'variance.png'").unwrap();
            writeln!(s, "set title 'Position variance'\nset xlabel 't'\nset ylabel 'var(q)'").unwrap();
            let analytic = !matches!(config.initial.phase, PhaseSpec::Quadratic { .. });
            if analytic {
                writeln!(
                    s,
                    "analytic(t) = {s0:e}**2 * (1 + ({hbar_eff:e} * t / (2 * {m:e} * {s0:e}**2))**2)"
                )
                .unwrap();
                writeln!(
                    s,
                    "plot 'timeseries.csv' using 1:3 with lines title 'evolved', \\\n     analytic(x) with lines dashtype 2 title 'free Gaussian'"
                )
                .unwrap();
            } else {
                writeln!(s, "plot 'timeseries.csv' using 1:3 with lines title 'evolved'").unwrap();
            }
            if config.experiment == Experiment::EvolveQuantum {
                writeln!(s, "\nset output 'product.png'").unwrap();
                writeln!(s, "set title 'Fisher length times quantum momentum spread'\nset ylabel 'δq δp_Q'").unwrap();
                writeln!(
                    s,
                    "plot 'timeseries.csv' using 1:8 with lines title 'δq δp_Q', \\\n     {:e} with lines dashtype 2 title 'h/η', \\\n     {:e} with lines dashtype 3 title 'ħ/2'",
                    h / eta,
                    0.5 * hbar
                )
                .unwrap();
            }
        }
        Experiment::UncertaintyReport if has("uncertainty.csv") => {
            writeln!(s, "\nset output 'product.png'").unwrap();
            writeln!(s, "set title 'Uncertainty products'\nset xlabel 't'\nset ylabel 'action'").unwrap();
            writeln!(
                s,
                "plot 'uncertainty.csv' using 1:5 with lines title 'δq δp_Q', \\\n     'uncertainty.csv' using 1:6 with lines title 'Δq Δp', \\\n     {:e} with lines dashtype 2 title 'ħ/2'",
                0.5 * hbar
            )
            .unwrap();
        }
        Experiment::Compare if has("final_density.csv") => {
            writeln!(s, "\nset output 'overlay.png'").unwrap();
            writeln!(s, "set title 'Final density: Madelung vs wavefunction'\nset xlabel 'q'\nset ylabel 'P'").unwrap();
            writeln!(
                s,
                "plot 'final_density.csv' using 1:2 with lines title 'Madelung', \\\n     'final_density.csv' using 1:3 with lines dashtype 2 title 'oracle'"
            )
            .unwrap();
            writeln!(s, "\nset output 'discrepancy.png'").unwrap();
            writeln!(s, "set title 'Density discrepancy'\nset xlabel 't'\nset ylabel 'L2'\nset logscale y").unwrap();
            writeln!(s, "plot 'compare.csv' using 1:4 with lines title 'L2(P)'\nunset logscale y").unwrap();
        }
        Experiment::Estimate if has("estimators.csv") => {
            writeln!(s, "\nset output 'estimators.png'").unwrap();
            writeln!(s, "set title 'Estimator variance vs Cramér–Rao bound'\nset ylabel 'variance'").unwrap();
            writeln!(s, "set style data histograms\nset style fill solid 0.6 border -1\nset yrange [0:*]").unwrap();
            writeln!(
                s,
                "plot 'estimators.csv' using 4:xtic(1) title 'variance', '' using 5 title 'bound'"
            )
            .unwrap();
        }
        Experiment::Microscope if has("microscope.csv") => {
            writeln!(s, "\nset output 'microscope.png'").unwrap();
            writeln!(s, "set title 'Indeterminacy product'\nset style data histograms\nset style fill solid 0.6 border -1\nset yrange [0:*]").unwrap();
            writeln!(s, "plot 'microscope.csv' using 7 title 'δq δp', '' using 8 title 'h', '' using 9 title 'h/η'").unwrap();
        }
        _ => s.push_str("# no CSV tables were written for this run\n"),
    }
    s
}
