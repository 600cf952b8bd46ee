//! Shared machinery for the ensemble engines: density support tracking,
//! vacuum extrapolation and the explicit RK4 driver.
//!
//! Only the arc where `P >= DENSITY_FLOOR * max P` is evolved. Outside it the
//! density is below any resolvable level and the hydrodynamic fields carry no
//! information, so `ln P` and `S` are continued there by a quadratic fit to the
//! edge of the support. The continuation supplies the ghost values the
//! stencils need at the support boundary and keeps the periodic seam (where a
//! spreading Gaussian's log-density and phase are kinked) out of the dynamics.

use crate::error::{Error, Result};
use crate::fields::{fold, DensityField, EnsembleState, Grid1D, PhaseField};

/// Density floor relative to the peak density.
pub const DENSITY_FLOOR: f64 = 1e-14;

/// Points on each edge of the support used for the vacuum continuation.
pub const EDGE_FIT_POINTS: usize = 6;

/// Density more negative than this aborts an evolution.
pub const NEGATIVE_DENSITY_LIMIT: f64 = -1e-12;

/// Largest change in total probability tolerated in a single step.
pub const NORM_STEP_TOLERANCE: f64 = 1e-10;

/// Circular arc `start, start+1, ..., start+len-1` (mod n).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Support {
    pub start: usize,
    pub len: usize,
    pub n: usize,
}

impl Support {
    pub fn full(n: usize) -> Self {
        Self { start: 0, len: n, n }
    }

    pub fn is_full(&self) -> bool {
        self.len == self.n
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).map(move |k| (self.start + k) % self.n)
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n];
        self.indices().for_each(|i| m[i] = true);
        m
    }
}

/// Locates the single arc above the density floor.
///
/// A sub-floor point with above-floor points on both sides is a node and is
/// reported as [`Error::NodeDetected`].
pub fn find_support(p: &[f64]) -> Result<Support> {
    let n = p.len();
    let peak = p.iter().copied().fold(0.0, f64::max);
    let threshold = DENSITY_FLOOR * peak;
    let above: Vec<bool> = p.iter().map(|&v| v >= threshold && v > 0.0).collect();
    let Some(gap) = above.iter().position(|a| !a) else {
        return Ok(Support::full(n));
    };
    let mut runs = Vec::new();
    let mut k = 0;
    while k < n {
        let i = (gap + k) % n;
        if above[i] {
            let start = i;
            let mut len = 0;
            while k < n && above[(gap + k) % n] {
                len += 1;
                k += 1;
            }
            runs.push((start, len));
        } else {
            k += 1;
        }
    }
    match runs.as_slice() {
        [] => Err(Error::SupportTooNarrow { points: 0 }),
        [(start, len)] => Ok(Support {
            start: *start,
            len: *len,
            n,
        }),
        [(s0, l0), ..] => {
            let index = (s0 + l0) % n;
            Err(Error::NodeDetected {
                index,
                value: p[index],
            })
        }
    }
}

/// Least-squares quadratic through `(k, y_k)`, `k = 0..y.len()`.
fn fit_quadratic(y: &[f64]) -> [f64; 3] {
    // Normal equations for a + b k + c k^2.
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (k, &yk) in y.iter().enumerate() {
        let x = k as f64;
        let pows = [1.0, x, x * x];
        for a in 0..3 {
            r[a] += pows[a] * yk;
            for b in 0..3 {
                m[a][b] += pows[a] * pows[b];
            }
        }
    }
    solve3(m, r)
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        r.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (dst, src) in m[row].iter_mut().zip(pivot_row).skip(col) {
                *dst -= f * src;
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|c| m[row][c] * x[c]).sum();
        x[row] = (r[row] - tail) / m[row][row];
    }
    x
}

fn eval_quadratic(c: &[f64; 3], x: f64) -> f64 {
    c[0] + x * (c[1] + x * c[2])
}

/// Overwrites the vacuum (complement of `support`) with the continuation of
/// `ln p` and `s` from the two support edges. `s` differences are unwrapped
/// modulo `h` before fitting.
pub fn fill_vacuum(support: &Support, h: f64, p: &mut [f64], s: &mut [f64]) {
    for (i, lp, si) in vacuum_continuation(support, h, |i| p[i].max(f64::MIN_POSITIVE).ln(), s) {
        p[i] = lp.exp();
        s[i] = si;
    }
}

/// [`fill_vacuum`] for a density already stored as `ln p`.
pub fn fill_vacuum_log(support: &Support, h: f64, ln_p: &mut [f64], s: &mut [f64]) {
    for (i, lp, si) in vacuum_continuation(support, h, |i| ln_p[i], s) {
        ln_p[i] = lp;
        s[i] = si;
    }
}

/// `(index, ln p, s)` for every vacuum point.
fn vacuum_continuation(
    support: &Support,
    h: f64,
    ln_p_at: impl Fn(usize) -> f64,
    s: &[f64],
) -> Vec<(usize, f64, f64)> {
    if support.is_full() {
        return Vec::new();
    }
    let n = support.n;
    let vacuum = n - support.len;
    let right = vacuum.div_ceil(2);
    let left = vacuum - right;
    let last = support.start + support.len - 1;
    let mut out = Vec::with_capacity(vacuum);

    // Right edge walks outward with increasing index, left edge with decreasing.
    for (edge, count, dir) in [(last, right, 1isize), (support.start, left, -1isize)] {
        if count == 0 {
            continue;
        }
        let k_fit = EDGE_FIT_POINTS.min(support.len);
        let inward = |k: usize| (edge as isize - dir * k as isize).rem_euclid(n as isize) as usize;
        // Fit coordinates run outward: x = -k for the k-th point inside the edge.
        let mut ln_p = Vec::with_capacity(k_fit);
        let mut phase = Vec::with_capacity(k_fit);
        for k in 0..k_fit {
            let i = inward(k_fit - 1 - k);
            ln_p.push(ln_p_at(i));
            let v = match phase.last() {
                None => s[i],
                Some(&prev) => {
                    let j = inward(k_fit - k);
                    prev + fold(s[i] - s[j], h)
                }
            };
            phase.push(v);
        }
        let cp = fit_quadratic(&ln_p);
        let cs = fit_quadratic(&phase);
        let x_edge = (k_fit - 1) as f64;
        let mut prev = ln_p[k_fit - 1];
        for j in 1..=count {
            let i = (edge as isize + dir * j as isize).rem_euclid(n as isize) as usize;
            let x = x_edge + j as f64;
            let lp = eval_quadratic(&cp, x).min(prev);
            prev = lp;
            out.push((i, lp, eval_quadratic(&cs, x)));
        }
    }
    out
}

/// Right-hand side of a coupled `(P, S)` flow.
pub trait Flow {
    /// Whether the density variable handed to [`Flow::rates`] is `ln P`
    /// rather than `P`.
    fn log_density(&self) -> bool {
        false
    }

    /// Writes the time derivatives of the density variable and of `S` for
    /// every grid point. Values outside the support are discarded by the caller.
    fn rates(&self, u: &[f64], s: &[f64], du: &mut [f64], ds: &mut [f64]);

    /// Largest admissible step for the current fields on `support`.
    fn stable_dt(&self, p: &[f64], s: &[f64], support: &Support) -> f64;

    /// Extra per-step admissibility checks.
    fn check(&self, _s: &[f64], _support: &Support, _dt: f64, _step: usize) -> Result<()> {
        Ok(())
    }
}

/// Receives `(step, state)` at every recorded step.
pub type Observer<'a> = dyn FnMut(usize, &EnsembleState) + 'a;

fn snapshot(template: &EnsembleState, p: &[f64], s: &[f64], time: f64) -> EnsembleState {
    let grid = *template.grid();
    EnsembleState {
        density: DensityField::from_evolved(grid, p.to_vec()),
        phase: PhaseField::from_evolved(grid, s.to_vec()),
        time,
        ..template.clone()
    }
}

fn map_support_error(e: Error, step: usize) -> Error {
    match e {
        Error::NodeDetected { index, .. } => Error::DensityFloorBreach { step, index },
        other => other,
    }
}

/// Integrates `flow` with classical RK4 for `steps` steps of size `dt`.
///
/// The observer sees step 0, every `record_every`-th step and the last step.
pub fn integrate_rk4<F: Flow>(
    flow: &F,
    initial: &EnsembleState,
    dt: f64,
    steps: usize,
    record_every: usize,
    observer: &mut Observer<'_>,
) -> Result<EnsembleState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(crate::error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let record_every = record_every.max(1);
    let grid: Grid1D = *initial.grid();
    let h = initial.constants().h();
    let n = grid.len();
    let mut p = initial.density().values().to_vec();
    let mut s = initial.phase().values().to_vec();
    let mut time = initial.time();

    let support = find_support(&p).map_err(|e| map_support_error(e, 0))?;
    check_width(&support)?;
    fill_vacuum(&support, h, &mut p, &mut s);
    observer(0, &snapshot(initial, &p, &s, time));

    let log = flow.log_density();
    let fill_stage = |support: &Support, u: &mut [f64], s: &mut [f64]| {
        if log {
            fill_vacuum_log(support, h, u, s)
        } else {
            fill_vacuum(support, h, u, s)
        }
    };
    // Evolved density variable: `ln P` or `P`.
    let mut u = p.clone();
    let mut k_p = vec![vec![0.0; n]; 4];
    let mut k_s = vec![vec![0.0; n]; 4];
    let mut stage_p = vec![0.0; n];
    let mut stage_s = vec![0.0; n];

    for step in 1..=steps {
        let support = find_support(&p).map_err(|e| map_support_error(e, step))?;
        check_width(&support)?;
        fill_vacuum(&support, h, &mut p, &mut s);
        let bound = flow.stable_dt(&p, &s, &support);
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::StabilityViolation { step, dt, bound });
        }
        flow.check(&s, &support, dt, step)?;
        let mask = support.mask();
        let norm_before = grid.sum(&p);
        for i in 0..n {
            u[i] = if log { p[i].ln() } else { p[i] };
        }

        for stage in 0..4 {
            let scale = match stage {
                0 => 0.0,
                1 | 2 => 0.5 * dt,
                _ => dt,
            };
            if stage == 0 {
                stage_p.copy_from_slice(&u);
                stage_s.copy_from_slice(&s);
            } else {
                for i in 0..n {
                    stage_p[i] = u[i] + scale * k_p[stage - 1][i];
                    stage_s[i] = s[i] + scale * k_s[stage - 1][i];
                }
                fill_stage(&support, &mut stage_p, &mut stage_s);
            }
            let (dp, ds) = (&mut k_p[stage], &mut k_s[stage]);
            flow.rates(&stage_p, &stage_s, dp, ds);
            for i in 0..n {
                if !mask[i] {
                    dp[i] = 0.0;
                    ds[i] = 0.0;
                }
            }
        }
        for i in 0..n {
            if mask[i] {
                u[i] += dt / 6.0 * (k_p[0][i] + 2.0 * k_p[1][i] + 2.0 * k_p[2][i] + k_p[3][i]);
                s[i] += dt / 6.0 * (k_s[0][i] + 2.0 * k_s[1][i] + 2.0 * k_s[2][i] + k_s[3][i]);
            }
        }
        // Continue the advanced state before the support is recomputed, so
        // points joining the support do not carry last step's values.
        fill_stage(&support, &mut u, &mut s);
        for i in 0..n {
            p[i] = if log { u[i].exp() } else { u[i] };
        }
        time += dt;

        if p.iter().chain(s.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step });
        }
        if let Some((index, &value)) = p
            .iter()
            .enumerate()
            .find(|(_, &v)| v < NEGATIVE_DENSITY_LIMIT)
        {
            return Err(Error::NegativeDensity { step, index, value });
        }
        let support = find_support(&p).map_err(|e| map_support_error(e, step))?;
        check_width(&support)?;
        fill_vacuum(&support, h, &mut p, &mut s);
        let drift = grid.sum(&p) - norm_before;
        if drift.abs() > NORM_STEP_TOLERANCE {
            return Err(Error::NormDrift { step, drift });
        }
        if step % record_every == 0 || step == steps {
            observer(step, &snapshot(initial, &p, &s, time));
        }
    }
    Ok(snapshot(initial, &p, &s, time))
}

fn check_width(support: &Support) -> Result<()> {
    if support.len < EDGE_FIT_POINTS + 2 {
        return Err(Error::SupportTooNarrow {
            points: support.len,
        });
    }
    Ok(())
}

/// `dq / (4 max|v|)` over the support; infinite for a resting ensemble.
pub fn advective_bound(grid: &Grid1D, velocity: &[f64], support: &Support) -> f64 {
    let vmax = support
        .indices()
        .map(|i| velocity[i].abs())
        .fold(0.0, f64::max);
    if vmax == 0.0 {
        f64::INFINITY
    } else {
        grid.spacing() / (4.0 * vmax)
    }
}
