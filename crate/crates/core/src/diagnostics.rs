//! Post-processing statistics over recorded trajectories.
//!
//! Everything here is pure read-only analysis: energy and moment averages,
//! the dual-norm time-translation statistic, smoothed nonnegativity and
//! upper-bound measures, and the discrete weak-form residual. Expectations
//! are realized as ensemble means with standard errors where meaningful.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::galerkin::{assemble_diffusion, assemble_drift, Trajectory};
use crate::model::ModelParams;
use crate::noise::{Equation, NoiseModel};
use crate::spectral::BasisSet;

/// Smooth approximation of `w -> (w^-)^2` with its first two derivatives.
///
/// Piecewise:
///
/// ```text
/// w < -eps:        w^2 - eps^2/6
/// -eps <= w < 0:   -w^4/(2 eps^2) - 4 w^3/(3 eps)
/// w >= 0:          0
/// ```
///
/// The pieces match in value, first, and second derivative at `-eps` and 0,
/// so the function is C^2 with S >= 0, S' <= 0, S'' >= 0.
pub fn stampacchia_s(w: f64, eps: f64) -> (f64, f64, f64) {
    if w >= 0.0 {
        (0.0, 0.0, 0.0)
    } else if w >= -eps {
        let value = -w * w * w * w / (2.0 * eps * eps) - 4.0 * w * w * w / (3.0 * eps);
        let d1 = -2.0 * w * w * w / (eps * eps) - 4.0 * w * w / eps;
        let d2 = -6.0 * w * w / (eps * eps) - 8.0 * w / eps;
        (value, d1, d2)
    } else {
        (w * w - eps * eps / 6.0, 2.0 * w, 2.0)
    }
}

/// Nonnegativity and upper-bound violation masses, time-averaged over a
/// trajectory. `neg_mass_sq[i]` is the mean of `||u_i^-||^2_{L^2}`, and
/// `excess_mass_sq[i]` the mean of `||(M_i - u_i)^-||^2_{L^2}`; the smoothed
/// variants replace `(w^-)^2` by `S_eps(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub neg_mass_sq: [f64; 2],
    pub excess_mass_sq: [f64; 2],
    pub smoothed_neg_mass: [f64; 2],
    pub smoothed_excess_mass: [f64; 2],
    pub stampacchia_eps: f64,
}

/// Scans a trajectory for sign and ceiling violations on the grid.
pub fn positivity_scan(
    traj: &Trajectory,
    eps: f64,
    basis: &BasisSet,
    params: &ModelParams,
) -> Result<PositivityReport, Error> {
    if traj.states.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("stampacchia eps must be positive".into()));
    }
    let mut report = PositivityReport {
        neg_mass_sq: [0.0; 2],
        excess_mass_sq: [0.0; 2],
        smoothed_neg_mass: [0.0; 2],
        smoothed_excess_mass: [0.0; 2],
        stampacchia_eps: eps,
    };
    let ceilings = [params.m1, params.m2];
    for state in &traj.states {
        for (i, coeffs) in [&state.c1, &state.c2].into_iter().enumerate() {
            let field = basis.reconstruct(coeffs)?;
            let neg = basis.integral(&field.map(|v| {
                let m = v.min(0.0);
                m * m
            }));
            let excess = basis.integral(&field.map(|v| {
                let m = (ceilings[i] - v).min(0.0);
                m * m
            }));
            let s_neg = basis.integral(&field.map(|v| stampacchia_s(v, eps).0));
            let s_excess = basis.integral(&field.map(|v| stampacchia_s(ceilings[i] - v, eps).0));
            report.neg_mass_sq[i] += neg;
            report.excess_mass_sq[i] += excess;
            report.smoothed_neg_mass[i] += s_neg;
            report.smoothed_excess_mass[i] += s_excess;
        }
    }
    let n = traj.states.len() as f64;
    for i in 0..2 {
        report.neg_mass_sq[i] /= n;
        report.excess_mass_sq[i] /= n;
        report.smoothed_neg_mass[i] /= n;
        report.smoothed_excess_mass[i] /= n;
    }
    Ok(report)
}

/// Ensemble energy and moment statistics, indexed `[equation]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// Mean over trajectories of `sup_t ||u_i||^2_{L^2}`.
    pub sup_l2_sq: [f64; 2],
    /// Standard error of `sup_l2_sq`.
    pub sup_l2_sq_se: [f64; 2],
    /// Mean of `||u_i(t)||^2` on the recorded time grid.
    pub mean_l2_sq_at: [Vec<f64>; 2],
    /// Mean of the trapezoid-integrated gradient energy
    /// `int_0^T ||grad u_i||^2 dt`.
    pub grad_energy: [f64; 2],
    pub grad_energy_se: [f64; 2],
    /// Mean of `sup_t ||u_i||^q`.
    pub moment_q: [f64; 2],
    pub moment_q_se: [f64; 2],
    pub q: f64,
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// Monte Carlo averages of the energy functionals and the `q`-th moment
/// over an ensemble sharing one recording grid.
pub fn energy_scan(
    trajs: &[Trajectory],
    basis: &BasisSet,
    q: f64,
) -> Result<EstimateReport, Error> {
    if trajs.is_empty() {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    if !(q >= 2.0) {
        return Err(Error::InvalidParameter(format!("moment order q must be >= 2, got {q}")));
    }
    let n_times = trajs[0].states.len();
    if trajs.iter().any(|t| t.states.len() != n_times) {
        return Err(Error::ShapeMismatch("trajectories have mismatched recording grids".into()));
    }
    let dt_rec = trajs[0].recorded_dt();

    let mut sup_samples = [Vec::new(), Vec::new()];
    let mut grad_samples = [Vec::new(), Vec::new()];
    let mut moment_samples = [Vec::new(), Vec::new()];
    let mut mean_l2_sq_at = [vec![0.0; n_times], vec![0.0; n_times]];

    for traj in trajs {
        let mut sup_sq = [0.0f64; 2];
        let mut grad = [0.0f64; 2];
        for (m, state) in traj.states.iter().enumerate() {
            for (i, coeffs) in [&state.c1, &state.c2].into_iter().enumerate() {
                let norms = basis.norms(coeffs)?;
                let l2_sq = norms.l2 * norms.l2;
                sup_sq[i] = sup_sq[i].max(l2_sq);
                mean_l2_sq_at[i][m] += l2_sq;
                // trapezoid in time: half weight at the ends
                let w = if m == 0 || m == n_times - 1 { 0.5 } else { 1.0 };
                grad[i] += w * dt_rec * norms.h1_semi * norms.h1_semi;
            }
        }
        for i in 0..2 {
            sup_samples[i].push(sup_sq[i]);
            grad_samples[i].push(grad[i]);
            moment_samples[i].push(libm::pow(libm::sqrt(sup_sq[i]), q));
        }
    }

    let n_traj = trajs.len() as f64;
    for i in 0..2 {
        for v in mean_l2_sq_at[i].iter_mut() {
            *v /= n_traj;
        }
    }
    let mut report = EstimateReport {
        sup_l2_sq: [0.0; 2],
        sup_l2_sq_se: [0.0; 2],
        mean_l2_sq_at,
        grad_energy: [0.0; 2],
        grad_energy_se: [0.0; 2],
        moment_q: [0.0; 2],
        moment_q_se: [0.0; 2],
        q,
    };
    for i in 0..2 {
        (report.sup_l2_sq[i], report.sup_l2_sq_se[i]) = mean_and_se(&sup_samples[i]);
        (report.grad_energy[i], report.grad_energy_se[i]) = mean_and_se(&grad_samples[i]);
        (report.moment_q[i], report.moment_q_se[i]) = mean_and_se(&moment_samples[i]);
    }
    Ok(report)
}

/// Dual-norm time-translation statistic per lag `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationReport {
    pub deltas: Vec<f64>,
    /// `stat[i][j]`: mean over ensemble and base times of
    /// `sup_{tau <= deltas[j]} ||u_i(t + tau) - u_i(t)||_dual`.
    pub stat: [Vec<f64>; 2],
    /// Log-log slope of `stat` against `delta`, per equation.
    pub fitted_exponent: [f64; 2],
}

/// Least-squares slope of `log y` against `log x`. Nonpositive values are
/// skipped; returns NaN with fewer than two usable points.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (libm::log(x), libm::log(y)))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// Computes the translation statistic for each lag in `deltas`.
///
/// Lags must be positive multiples of the recording interval (within
/// round-off) and fit inside the recorded horizon; the sup over `tau` runs
/// over recorded offsets only, and base times are restricted so that
/// `t + tau` stays within the horizon.
pub fn translation_scan(
    trajs: &[Trajectory],
    basis: &BasisSet,
    deltas: &[f64],
) -> Result<TranslationReport, Error> {
    if trajs.is_empty() || deltas.is_empty() {
        return Err(Error::InvalidParameter("empty ensemble or delta list".into()));
    }
    let n_times = trajs[0].states.len();
    if trajs.iter().any(|t| t.states.len() != n_times) {
        return Err(Error::ShapeMismatch("trajectories have mismatched recording grids".into()));
    }
    let dt_rec = trajs[0].recorded_dt();
    let mut lag_steps = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let steps = libm::round(delta / dt_rec);
        if !(delta > 0.0) || libm::fabs(steps * dt_rec - delta) > 1e-9 * dt_rec.max(delta) {
            return Err(Error::InvalidParameter(format!(
                "delta {delta} is not a positive multiple of the recording interval {dt_rec}"
            )));
        }
        let steps = steps as usize;
        if steps >= n_times {
            return Err(Error::InvalidParameter(format!(
                "delta {delta} exceeds the recorded horizon"
            )));
        }
        lag_steps.push(steps);
    }

    let mut stat = [vec![0.0; deltas.len()], vec![0.0; deltas.len()]];
    for (j, &max_lag) in lag_steps.iter().enumerate() {
        let mut acc = [0.0f64; 2];
        let mut count = 0usize;
        for traj in trajs {
            for t in 0..n_times - max_lag {
                let mut sup = [0.0f64; 2];
                for lag in 1..=max_lag {
                    let a = &traj.states[t];
                    let b = &traj.states[t + lag];
                    for (i, (ca, cb)) in
                        [(&a.c1, &b.c1), (&a.c2, &b.c2)].into_iter().enumerate()
                    {
                        let diff: Vec<f64> =
                            ca.iter().zip(cb).map(|(x, y)| y - x).collect();
                        sup[i] = sup[i].max(basis.norms(&diff)?.h1_dual);
                    }
                }
                acc[0] += sup[0];
                acc[1] += sup[1];
                count += 1;
            }
        }
        stat[0][j] = acc[0] / count as f64;
        stat[1][j] = acc[1] / count as f64;
    }
    let fitted_exponent = [fit_power_law(deltas, &stat[0]), fit_power_law(deltas, &stat[1])];
    Ok(TranslationReport { deltas: deltas.to_vec(), stat, fitted_exponent })
}

/// Subsamples a full-resolution trajectory to a coarser recording grid,
/// keeping the per-step increments so the weak-form residual can be
/// replayed with left-point quadrature on the coarse grid.
pub fn coarsen_trajectory(traj: &Trajectory, factor: usize) -> Result<Trajectory, Error> {
    if factor == 0 || (traj.states.len() - 1) % factor != 0 {
        return Err(Error::InvalidParameter(format!(
            "coarsening factor {factor} does not divide the recorded step count {}",
            traj.states.len() - 1
        )));
    }
    Ok(Trajectory {
        dt: traj.dt,
        record_every: traj.record_every * factor,
        states: traj.states.iter().step_by(factor).cloned().collect(),
        increments: traj.increments.clone(),
    })
}

/// Residual of the discrete weak identity
/// `<u_i(t) - u_i(0), phi> = sum drift(t_s) . phi dt + sum (Gamma(t_s) dW_s) . phi`
/// with left-point quadrature on the recorded grid, one magnitude per
/// recorded time. Wiener increments inside a recorded window are summed.
///
/// At the integrator's own resolution the residual vanishes to round-off;
/// on a coarsened replay it measures the quadrature error.
pub fn weak_form_residual(
    traj: &Trajectory,
    basis: &BasisSet,
    params: &ModelParams,
    noise_model: &NoiseModel,
    phi: &[f64],
    equation: Equation,
) -> Result<Vec<f64>, Error> {
    let increments = traj
        .increments
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("trajectory has no recorded increments".into()))?;
    if phi.len() != basis.n_modes {
        return Err(Error::ShapeMismatch(format!(
            "test function has {} coefficients, basis has {} modes",
            phi.len(),
            basis.n_modes
        )));
    }
    let window = traj.record_every;
    let n_rec = traj.states.len() - 1;
    if increments.len() != n_rec * window {
        return Err(Error::ShapeMismatch(format!(
            "increment count {} does not match {} recorded steps of {} sub-steps",
            increments.len(),
            n_rec,
            window
        )));
    }
    let i = equation.index();
    let dt_rec = traj.recorded_dt();
    fn coeffs(s: &crate::spectral::SpectralState, i: usize) -> &[f64] {
        if i == 0 {
            &s.c1
        } else {
            &s.c2
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let c0 = dot(coeffs(&traj.states[0], i), phi);
    let mut out = Vec::with_capacity(traj.states.len());
    out.push(0.0);
    let mut accumulated = 0.0;
    for m in 0..n_rec {
        let left = &traj.states[m];
        let (drift1, drift2) = assemble_drift(left, basis, params)?;
        let drift = if i == 0 { &drift1 } else { &drift2 };
        let gammas = assemble_diffusion(left, basis, noise_model)?;
        let gamma = &gammas[i];
        let mut dw_window = vec![0.0; noise_model.n_noise_modes];
        for s in m * window..(m + 1) * window {
            for (acc, &v) in dw_window.iter_mut().zip(increments[s].for_equation(equation)) {
                *acc += v;
            }
        }
        accumulated += dot(drift, phi) * dt_rec + dot(&gamma.apply(&dw_window)?, phi);
        let lhs = dot(coeffs(&traj.states[m + 1], i), phi) - c0;
        out.push(libm::fabs(lhs - accumulated));
    }
    Ok(out)
}
