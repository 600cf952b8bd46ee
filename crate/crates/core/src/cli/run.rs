use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{Experiment, ExperimentConfig};
use super::plot::emit_plot_script;
use super::report::{Cell, Check, RunReport, Table};
use super::CliError;
use crate::classical::{
    classical_energy, classical_hamiltonian, classical_momentum_stats, evolve_classical_observed,
};
use crate::estimation::{benchmark_estimator, cramer_rao_bound};
use crate::fields::{moments, EnsembleState};
use crate::microscope::summarize;
use crate::oracle::{
    compare_with_oracle, evolve_schrodinger_observed, kennard_product, snapshot_rows,
    to_wavefunction, WaveFunction,
};
use crate::quantum::{evolve_madelung_observed, uncertainty_summary, Eta};

/// Tolerance of the per-record algebraic identities.
const IDENTITY_TOLERANCE: f64 = 1e-10;
/// Relative slack on lower bounds that hold with equality for Gaussians.
const BOUND_SLACK: f64 = 1e-9;
const NORM_TOLERANCE: f64 = 1e-8;
const ORACLE_NORM_TOLERANCE: f64 = 1e-9;
const ENERGY_TOLERANCE: f64 = 1e-6;
const DENSITY_L2_TOLERANCE: f64 = 1e-3;
const GRADIENT_L2_TOLERANCE: f64 = 1e-2;
const MICROSCOPE_TOLERANCE: f64 = 1e-12;

/// Everything a run produces, before anything touches the filesystem.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub tables: Vec<Table>,
    pub plot_script: Option<String>,
}

/// Executes the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let mut report = RunReport::new(config);
    let mut tables = Vec::new();
    match config.experiment {
        Experiment::Estimate => estimate(config, &mut report, &mut tables)?,
        Experiment::EvolveClassical => evolve_classical(config, &mut report, &mut tables)?,
        Experiment::EvolveQuantum => evolve_quantum(config, &mut report, &mut tables)?,
        Experiment::Compare => compare(config, &mut report, &mut tables)?,
        Experiment::Microscope => microscope(config, &mut report, &mut tables)?,
        Experiment::UncertaintyReport => uncertainty(config, &mut report, &mut tables)?,
    }
    if config.output.format.csv() {
        report.files = tables.iter().map(|t| t.file.clone()).collect();
    }
    let plot_script = config.output.emit_plots.then(|| {
        report.files.push(PLOT_FILE.to_string());
        emit_plot_script(&report, &tables)
    });
    Ok(RunOutput {
        report,
        tables,
        plot_script,
    })
}

const PLOT_FILE: &str = "plots.gp";

/// Writes the selected outputs into `dir`. Wall-clock time goes to a
/// separate `timing.json` so that `report.json` is reproducible.
pub fn write_outputs(output: &RunOutput, dir: &Path, seconds: f64) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let format = output.report.config.output.format;
    let mut written = Vec::new();
    let mut write = |name: &str, text: &str| -> Result<(), CliError> {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    if format.csv() {
        for t in &output.tables {
            write(&t.file, &t.to_csv())?;
        }
    }
    if format.json() {
        write("report.json", &output.report.to_json())?;
        let timing = serde_json::json!({ "wall_clock_seconds": seconds });
        write("timing.json", &format!("{timing:#}\n"))?;
    }
    if let Some(script) = &output.plot_script {
        write(PLOT_FILE, script)?;
    }
    Ok(written)
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn standard_eta(eta: Eta) -> bool {
    relative(eta.value(), Eta::STANDARD.value()) < 1e-12
}

fn state_table(file: &str, state: &EnsembleState) -> Table {
    let mut t = Table::new(file, &["q", "density", "phase"]);
    let grid = state.grid();
    for (i, (p, s)) in state
        .density()
        .values()
        .iter()
        .zip(state.phase().values())
        .enumerate()
    {
        t.push([grid.coordinate(i), *p, *s]);
    }
    t
}

fn time_results(report: &mut RunReport, config: &ExperimentConfig) -> Result<(f64, usize), CliError> {
    let plan = config.time_plan()?;
    report.result("dt", plan.dt, "time");
    report.result("steps", plan.steps as f64, "count");
    report.result("t_final", plan.dt * plan.steps as f64, "time");
    Ok((plan.dt, plan.steps))
}

fn estimate(config: &ExperimentConfig, report: &mut RunReport, tables: &mut Vec<Table>) -> Result<(), CliError> {
    let e = &config.estimation;
    let model = config.location_model()?;
    let bound = cramer_rao_bound(&model, e.sample_size).map_err(CliError::engine("estimation"))?;
    report.result("fisher_information", model.information(), "1/length^2");
    report.result("cramer_rao_bound", bound, "length^2");
    let slack = 1.0 + 3.0 / (e.trials as f64).sqrt();
    let mut table = Table::new(
        "estimators.csv",
        &["estimator", "sample_size", "trials", "variance", "bound", "efficiency", "bias"],
    );
    for &estimator in &e.estimators {
        let r = benchmark_estimator(&model, estimator, e.location, e.sample_size, e.trials, config.seed)
            .map_err(CliError::engine("estimation"))?;
        let name = estimator.name();
        report.result(format!("{name}.variance"), r.variance, "length^2");
        report.result(format!("{name}.bias"), r.bias, "length");
        report.result(format!("{name}.efficiency"), r.efficiency, "dimensionless");
        report.check(Check::at_most(
            format!("{name}.efficiency_bound"),
            r.efficiency,
            slack,
            "Cramér–Rao: efficiency of an unbiased estimator <= 1 + 3/sqrt(trials)",
        ));
        table.push_cells(vec![
            Cell::Text(name.to_string()),
            Cell::Num(r.sample_size as f64),
            Cell::Num(r.trials as f64),
            Cell::Num(r.variance),
            Cell::Num(r.bound),
            Cell::Num(r.efficiency),
            Cell::Num(r.bias),
        ]);
    }
    tables.push(table);
    Ok(())
}

fn evolve_classical(config: &ExperimentConfig, report: &mut RunReport, tables: &mut Vec<Table>) -> Result<(), CliError> {
    let state = config.initial_state()?;
    let (dt, steps) = time_results(report, config)?;
    let potential = &config.potential;
    let engine = CliError::engine("classical_ensemble");
    let energy0 = classical_energy(&state, potential).map_err(CliError::engine("classical_ensemble"))?;
    let m = state.mass();

    let mut table = Table::new(
        "timeseries.csv",
        &["t", "mean_q", "var_q", "mean_p", "var_p_classical", "hamiltonian_classical"],
    );
    let (mut norm_drift, mut identity, mut energy_drift) = (0.0f64, 0.0f64, 0.0f64);
    let final_state = evolve_classical_observed(&state, potential, dt, steps, config.time.record_every, &mut |_, s| {
        let mq = moments(s.density());
        let mp = classical_momentum_stats(s);
        let hc = classical_hamiltonian(s);
        table.push([s.time(), mq.mean, mq.variance, mp.mean, mp.variance, hc]);
        norm_drift = norm_drift.max((s.density().norm() - 1.0).abs());
        let rhs = 2.0 * m * hc - mp.mean * mp.mean;
        identity = identity.max((mp.variance - rhs).abs() / (2.0 * m * hc).max(f64::MIN_POSITIVE));
        if let Ok(e) = classical_energy(s, potential) {
            let scale = if energy0 == 0.0 { 1.0 } else { energy0.abs() };
            energy_drift = energy_drift.max((e - energy0).abs() / scale);
        }
    })
    .map_err(engine)?;

    let mq = moments(final_state.density());
    let mp = classical_momentum_stats(&final_state);
    report.result("mean_q", mq.mean, "length");
    report.result("var_q", mq.variance, "length^2");
    report.result("mean_p", mp.mean, "momentum");
    report.result("var_p_classical", mp.variance, "momentum^2");
    report.result("hamiltonian_classical", classical_hamiltonian(&final_state), "energy");
    report.result("norm_drift", norm_drift, "dimensionless");
    report.result("energy_drift", energy_drift, "dimensionless");
    report.check(Check::at_most("norm_conservation", norm_drift, NORM_TOLERANCE, "max |∫P dq − 1| over recorded steps"));
    report.check(Check::at_most("energy_conservation", energy_drift, ENERGY_TOLERANCE, "max relative drift of ∫P[(S')²/2m + V] dq"));
    report.check(Check::at_most(
        "variance_identity",
        identity,
        IDENTITY_TOLERANCE,
        "var(p_C) = 2m H_C − ⟨p⟩² at every recorded step (relative)",
    ));
    tables.push(table);
    tables.push(state_table("final_state.csv", &final_state));
    Ok(())
}

/// Per-record diagnostics shared by the Madelung experiments.
#[derive(Default)]
struct QuantumLedger {
    norm_drift: f64,
    hamiltonian_drift: f64,
    identity: f64,
    fisher_identity: f64,
    /// Smallest `δq δp_Q / (h/η)`.
    fisher_bound_ratio: f64,
    /// Smallest Kennard product over `ħ/2`.
    kennard_ratio: f64,
    error: Option<CliError>,
}

impl QuantumLedger {
    fn new() -> Self {
        Self {
            fisher_bound_ratio: f64::INFINITY,
            kennard_ratio: f64::INFINITY,
            ..Default::default()
        }
    }

    fn finish(self, report: &mut RunReport, eta: Eta) -> Result<(), CliError> {
        if let Some(e) = self.error {
            return Err(e);
        }
        report.result("norm_drift", self.norm_drift, "dimensionless");
        report.result("hamiltonian_drift", self.hamiltonian_drift, "dimensionless");
        report.check(Check::at_most("norm_conservation", self.norm_drift, NORM_TOLERANCE, "max |∫P dq − 1| over recorded steps"));
        report.check(Check::at_most(
            "hamiltonian_conservation",
            self.hamiltonian_drift,
            ENERGY_TOLERANCE,
            "max relative drift of H_Q over recorded steps",
        ));
        report.check(Check::at_most(
            "variance_identity",
            self.identity,
            IDENTITY_TOLERANCE,
            "(δp_Q)² = 2m H_Q − ⟨p⟩² at every recorded step (relative)",
        ));
        report.check(Check::at_most(
            "fisher_identity",
            self.fisher_identity,
            IDENTITY_TOLERANCE,
            "δq · δp_H = h/η at every recorded step (relative)",
        ));
        report.check(Check::at_least(
            "fisher_bound",
            self.fisher_bound_ratio,
            1.0 - BOUND_SLACK,
            "δq · δp_Q >= h/η at every recorded step (ratio)",
        ));
        if standard_eta(eta) {
            report.check(Check::at_least(
                "kennard_bound",
                self.kennard_ratio,
                1.0 - BOUND_SLACK,
                "sqrt(var q) · δp_Q >= ħ/2 at every recorded step (ratio)",
            ));
        }
        Ok(())
    }
}

fn evolve_quantum(config: &ExperimentConfig, report: &mut RunReport, tables: &mut Vec<Table>) -> Result<(), CliError> {
    let state = config.initial_state()?;
    let (dt, steps) = time_results(report, config)?;
    let eta = config.quantum.eta;
    let h = state.constants().h();
    let hbar = state.constants().hbar;
    let m = state.mass();
    let h0 = uncertainty_summary(&state, eta).map_err(CliError::engine("quantum_ensemble"))?.hamiltonian;

    let mut table = Table::new(
        "timeseries.csv",
        &["t", "mean_q", "var_q", "mean_p", "dp_heisenberg_sq", "dp_quantum_sq", "hamiltonian_quantum", "fisher_product"],
    );
    let mut ledger = QuantumLedger::new();
    let final_state = evolve_madelung_observed(&state, eta, dt, steps, config.time.record_every, &mut |_, s| {
        let u = match uncertainty_summary(s, eta) {
            Ok(u) => u,
            Err(e) => {
                ledger.error.get_or_insert(CliError::Engine { module: "quantum_ensemble", source: e });
                return;
            }
        };
        let mq = moments(s.density());
        table.push([
            s.time(),
            mq.mean,
            mq.variance,
            u.mean_momentum,
            u.heisenberg_spread.powi(2),
            u.quantum_variance,
            u.hamiltonian,
            u.product,
        ]);
        record_quantum(&mut ledger, s, &u, mq.variance, h0, h, hbar, m, eta);
    })
    .map_err(CliError::engine("quantum_ensemble"))?;
    ledger.finish(report, eta)?;

    let u = uncertainty_summary(&final_state, eta).map_err(CliError::engine("quantum_ensemble"))?;
    let mq = moments(final_state.density());
    report.result("mean_q", mq.mean, "length");
    report.result("var_q", mq.variance, "length^2");
    report.result("mean_p", u.mean_momentum, "momentum");
    report.result("fisher_length", u.fisher_length, "length");
    report.result("dp_heisenberg", u.heisenberg_spread, "momentum");
    report.result("dp_quantum_sq", u.quantum_variance, "momentum^2");
    report.result("hamiltonian_quantum", u.hamiltonian, "energy");
    report.result("fisher_product", u.product, "action");
    report.result("eta", eta.value(), "dimensionless");
    report.result("h_over_eta", h / eta.value(), "action");
    tables.push(table);
    tables.push(state_table("final_state.csv", &final_state));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn record_quantum(
    ledger: &mut QuantumLedger,
    s: &EnsembleState,
    u: &crate::quantum::UncertaintySummary,
    var_q: f64,
    h0: f64,
    h: f64,
    hbar: f64,
    m: f64,
    eta: Eta,
) {
    ledger.norm_drift = ledger.norm_drift.max((s.density().norm() - 1.0).abs());
    ledger.hamiltonian_drift = ledger.hamiltonian_drift.max(relative(u.hamiltonian, h0));
    let rhs = 2.0 * m * u.hamiltonian - u.mean_momentum * u.mean_momentum;
    ledger.identity = ledger
        .identity
        .max((u.quantum_variance - rhs).abs() / (2.0 * m * u.hamiltonian).max(f64::MIN_POSITIVE));
    let h_eta = h / eta.value();
    ledger.fisher_identity = ledger
        .fisher_identity
        .max(relative(u.fisher_length * u.heisenberg_spread, h_eta));
    ledger.fisher_bound_ratio = ledger.fisher_bound_ratio.min(u.product / h_eta);
    let kennard = (var_q * u.quantum_variance).sqrt();
    ledger.kennard_ratio = ledger.kennard_ratio.min(kennard / (0.5 * hbar));
}

fn compare(config: &ExperimentConfig, report: &mut RunReport, tables: &mut Vec<Table>) -> Result<(), CliError> {
    let state = config.initial_state()?;
    let (dt, steps) = time_results(report, config)?;
    let eta = config.quantum.eta;
    let hbar = state.constants().hbar;
    let every = config.time.record_every;

    let psi0 = to_wavefunction(&state).map_err(CliError::engine("wavefunction_oracle"))?;
    let mut oracle: BTreeMap<usize, WaveFunction> = BTreeMap::new();
    let mut oracle_drift = 0.0f64;
    let psi_final = evolve_schrodinger_observed(&psi0, dt, steps, every, &mut |step, psi| {
        oracle_drift = oracle_drift.max((psi.norm() - 1.0).abs());
        oracle.insert(step, psi.clone());
    })
    .map_err(CliError::engine("wavefunction_oracle"))?;

    let mut table = Table::new(
        "compare.csv",
        &["t", "var_q_madelung", "var_q_oracle", "density_l2", "gradient_l2", "kennard_oracle"],
    );
    let (mut norm_drift, mut kennard_ratio) = (0.0f64, f64::INFINITY);
    let mut last = None;
    let mut error = None;
    let final_state = evolve_madelung_observed(&state, eta, dt, steps, every, &mut |step, s| {
        let psi = &oracle[&step];
        let d = match compare_with_oracle(s, psi) {
            Ok(d) => d,
            Err(e) => {
                error.get_or_insert(CliError::Engine { module: "wavefunction_oracle", source: e });
                return;
            }
        };
        let kennard = kennard_product(psi);
        kennard_ratio = kennard_ratio.min(kennard / (0.5 * hbar));
        norm_drift = norm_drift.max((s.density().norm() - 1.0).abs());
        table.push([
            s.time(),
            moments(s.density()).variance,
            moments(&psi.density()).variance,
            d.density_l2,
            d.gradient_l2,
            kennard,
        ]);
        last = Some(d);
    })
    .map_err(CliError::engine("quantum_ensemble"))?;
    if let Some(e) = error {
        return Err(e);
    }
    let d = last.expect("final step is always recorded");

    report.result("density_l2", d.density_l2, "1/length^(1/2)");
    report.result("gradient_l2", d.gradient_l2, "momentum·length^(1/2)");
    report.result("var_q_madelung", moments(final_state.density()).variance, "length^2");
    report.result("var_q_oracle", moments(&psi_final.density()).variance, "length^2");
    report.result("norm_drift", norm_drift, "dimensionless");
    report.result("oracle_norm_drift", oracle_drift, "dimensionless");
    report.result("eta", eta.value(), "dimensionless");
    report.check(Check::at_most("norm_conservation", norm_drift, NORM_TOLERANCE, "max |∫P dq − 1| over recorded steps"));
    report.check(Check::at_most(
        "oracle_unitarity",
        oracle_drift,
        ORACLE_NORM_TOLERANCE,
        "max |∫|ψ|² dq − 1| over recorded steps",
    ));
    report.check(Check::at_least(
        "kennard_bound",
        kennard_ratio,
        1.0 - BOUND_SLACK,
        "Δq Δp >= ħ/2 for the oracle wavefunction at every recorded step (ratio)",
    ));
    let equivalent = standard_eta(eta);
    report.flags.insert("equivalence_checked".into(), equivalent);
    if equivalent {
        report.check(Check::at_most(
            "density_equivalence",
            d.density_l2,
            DENSITY_L2_TOLERANCE,
            "L² distance between Madelung P and oracle |ψ|² at the final time",
        ));
        report.check(Check::at_most(
            "gradient_equivalence",
            d.gradient_l2,
            GRADIENT_L2_TOLERANCE,
            "L² distance between Madelung S' and oracle S' over the support at the final time",
        ));
    }

    let mut overlay = Table::new("final_density.csv", &["q", "density_madelung", "density_oracle"]);
    let grid = state.grid();
    for (i, (a, b)) in final_state
        .density()
        .values()
        .iter()
        .zip(psi_final.probability())
        .enumerate()
    {
        overlay.push([grid.coordinate(i), *a, b]);
    }
    let mut psi_table = Table::new("wavefunction.csv", &["q", "re_psi", "im_psi", "abs_psi_sq", "phase"]);
    for row in snapshot_rows(&psi_final) {
        psi_table.push(row);
    }
    tables.push(table);
    tables.push(overlay);
    tables.push(psi_table);
    Ok(())
}

fn uncertainty(config: &ExperimentConfig, report: &mut RunReport, tables: &mut Vec<Table>) -> Result<(), CliError> {
    let state = config.initial_state()?;
    let (dt, steps) = time_results(report, config)?;
    let eta = config.quantum.eta;
    let h = state.constants().h();
    let hbar = state.constants().hbar;
    let m = state.mass();
    let h0 = uncertainty_summary(&state, eta).map_err(CliError::engine("quantum_ensemble"))?.hamiltonian;

    let mut table = Table::new(
        "uncertainty.csv",
        &["t", "dq_fisher", "dp_heisenberg", "dp_quantum", "fisher_product", "kennard_product"],
    );
    let mut ledger = QuantumLedger::new();
    let mut oracle_kennard = f64::INFINITY;
    evolve_madelung_observed(&state, eta, dt, steps, config.time.record_every, &mut |_, s| {
        let u = match uncertainty_summary(s, eta) {
            Ok(u) => u,
            Err(e) => {
                ledger.error.get_or_insert(CliError::Engine { module: "quantum_ensemble", source: e });
                return;
            }
        };
        let kennard = match to_wavefunction(s) {
            Ok(psi) => kennard_product(&psi),
            Err(e) => {
                ledger.error.get_or_insert(CliError::Engine { module: "wavefunction_oracle", source: e });
                return;
            }
        };
        oracle_kennard = oracle_kennard.min(kennard / (0.5 * hbar));
        table.push([
            s.time(),
            u.fisher_length,
            u.heisenberg_spread,
            u.quantum_variance.sqrt(),
            u.product,
            kennard,
        ]);
        record_quantum(&mut ledger, s, &u, moments(s.density()).variance, h0, h, hbar, m, eta);
    })
    .map_err(CliError::engine("quantum_ensemble"))?;
    ledger.finish(report, eta)?;
    report.result("h_over_eta", h / eta.value(), "action");
    report.result("hbar_over_2", 0.5 * hbar, "action");
    report.result("min_kennard_ratio", oracle_kennard, "dimensionless");
    if standard_eta(eta) {
        report.check(Check::at_least(
            "kennard_bound_wavefunction",
            oracle_kennard,
            1.0 - BOUND_SLACK,
            "Δq Δp >= ħ/2 for the Madelung-mapped wavefunction at every recorded step (ratio)",
        ));
    }
    tables.push(table);
    Ok(())
}

fn microscope(config: &ExperimentConfig, report: &mut RunReport, tables: &mut Vec<Table>) -> Result<(), CliError> {
    let setup = config.microscope_setup()?;
    let s = summarize(&setup, config.quantum.eta);
    let factor = setup.convention.factor();
    report.result("position_uncertainty", s.position_uncertainty, "length");
    report.result("momentum_uncertainty", s.momentum_uncertainty, "momentum");
    report.result("product", s.product, "action");
    report.result("h", setup.h, "action");
    report.result("h_over_eta", s.h_over_eta, "action");
    report.result("resolution_factor", factor, "dimensionless");
    report.result("wavelength_estimate.position", s.wavelength_estimate.position, "length");
    report.result("wavelength_estimate.momentum", s.wavelength_estimate.momentum, "momentum");
    report.result("wavelength_estimate.product", s.wavelength_estimate.product, "action");
    report.flags.insert("small_angle_valid".into(), s.small_angle_valid);
    report.check(Check::at_most(
        "product_equals_resolution_factor_times_h",
        relative(s.product, factor * setup.h),
        MICROSCOPE_TOLERANCE,
        "δq δp = c_R h, independent of the geometry (relative)",
    ));
    let mut t = Table::new(
        "microscope.csv",
        &[
            "wavelength",
            "focal_length",
            "diameter",
            "resolution_factor",
            "position_uncertainty",
            "momentum_uncertainty",
            "product",
            "h",
            "h_over_eta",
            "small_angle_valid",
        ],
    );
    t.push([
        setup.wavelength,
        setup.focal_length,
        setup.diameter,
        factor,
        s.position_uncertainty,
        s.momentum_uncertainty,
        s.product,
        setup.h,
        s.h_over_eta,
        if s.small_angle_valid { 1.0 } else { 0.0 },
    ]);
    tables.push(t);
    Ok(())
}
