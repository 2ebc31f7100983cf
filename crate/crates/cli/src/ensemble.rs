//! Monte Carlo orchestration: admissible initial conditions, parallel
//! trajectory batches, the paired-run stability experiment, and refinement
//! studies in mode count and time step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use preytaxis_core::diagnostics::fit_power_law;
use preytaxis_core::galerkin::{integrate, integrate_with, StepConfig, Trajectory};
use preytaxis_core::noise::{sample_increments, SeedPolicy, WienerIncrements};
use preytaxis_core::spectral::{build_basis, BasisSet};
use preytaxis_core::{Domain, ModelParams, NoiseModel, SpectralState};

use crate::Error;

const IC_SEED_TAG: u64 = 0x1c;

/// Initial-condition generator. Every variant produces fields that are
/// nonnegative and below the expected ceilings `M_i` on the whole grid;
/// violations are rejected at build time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Spatially constant densities.
    Constant { u1: f64, u2: f64 },
    /// `base + amp cos(pi x / L)` along the first axis.
    SmoothBump { u1_base: f64, u1_amp: f64, u2_base: f64, u2_amp: f64 },
    /// Constant mean plus a random low-mode perturbation whose sup norm is
    /// capped at `relative_amplitude * min(mean, M - mean)`, so the field
    /// stays inside `[0, M]` by construction. Varies per trajectory.
    RandomInSpan { u1_mean: f64, u2_mean: f64, relative_amplitude: f64 },
}

impl InitialCondition {
    /// Builds the spectral initial state for one trajectory.
    pub fn build(
        &self,
        basis: &BasisSet,
        params: &ModelParams,
        policy: &SeedPolicy,
        trajectory: u64,
    ) -> Result<SpectralState, Error> {
        let n = basis.n_modes;
        let sqrt_volume = basis.domain.volume().sqrt();
        let mut state = SpectralState::zeros(0.0, n);
        match *self {
            InitialCondition::Constant { u1, u2 } => {
                state.c1[0] = u1 * sqrt_volume;
                state.c2[0] = u2 * sqrt_volume;
            }
            InitialCondition::SmoothBump { u1_base, u1_amp, u2_base, u2_amp } => {
                let coords = basis.axis_coords(0).to_vec();
                let length = basis.domain.lengths[0];
                let fill = |base: f64, amp: f64, out: &mut Vec<f64>| -> Result<(), Error> {
                    let values = (0..basis.n_grid())
                        .map(|j| {
                            // row-major grid: the first axis is the slow index
                            let stride = basis.n_grid() / coords.len();
                            let x = coords[j / stride];
                            base + amp * (core::f64::consts::PI * x / length).cos()
                        })
                        .collect();
                    *out = basis
                        .project(&preytaxis_core::Field { values })
                        .map_err(Error::Core)?;
                    Ok(())
                };
                fill(u1_base, u1_amp, &mut state.c1)?;
                fill(u2_base, u2_amp, &mut state.c2)?;
            }
            InitialCondition::RandomInSpan { u1_mean, u2_mean, relative_amplitude } => {
                if !(0.0..=1.0).contains(&relative_amplitude) {
                    return Err(Error::Inadmissible(format!(
                        "relative_amplitude must lie in [0, 1], got {relative_amplitude}"
                    )));
                }
                use rand::SeedableRng;
                use rand_distr::{Distribution, StandardNormal};
                let seed = policy.auxiliary_seed(IC_SEED_TAG, trajectory);
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let n_pert = (n - 1).min(6);
                let mut fill = |mean: f64, ceiling: f64, out: &mut [f64]| {
                    out[0] = mean * sqrt_volume;
                    if n_pert == 0 {
                        return;
                    }
                    let raw: Vec<f64> = (0..n_pert)
                        .map(|j| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            g / ((j + 1) * (j + 1)) as f64
                        })
                        .collect();
                    // cap the worst-case pointwise excursion
                    let sup: f64 = raw
                        .iter()
                        .enumerate()
                        .map(|(j, a)| {
                            let max_phi = basis
                                .mode_values(j + 1)
                                .iter()
                                .fold(0.0f64, |m, &v| m.max(v.abs()));
                            a.abs() * max_phi
                        })
                        .sum();
                    let budget = relative_amplitude * mean.min(ceiling - mean).max(0.0);
                    let scale = if sup > 0.0 { budget / sup } else { 0.0 };
                    for (j, a) in raw.iter().enumerate() {
                        out[j + 1] = a * scale;
                    }
                };
                fill(u1_mean, params.m1, &mut state.c1);
                fill(u2_mean, params.m2, &mut state.c2);
            }
        }
        validate_admissible(&state, basis, params)?;
        Ok(state)
    }
}

/// Checks `0 <= u_i <= M_i` pointwise on the quadrature grid.
pub fn validate_admissible(
    state: &SpectralState,
    basis: &BasisSet,
    params: &ModelParams,
) -> Result<(), Error> {
    let tol = 1e-9;
    for (name, coeffs, ceiling) in
        [("u1", &state.c1, params.m1), ("u2", &state.c2, params.m2)]
    {
        let field = basis.reconstruct(coeffs).map_err(Error::Core)?;
        let min = field.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = field.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min < -tol || max > ceiling + tol {
            return Err(Error::Inadmissible(format!(
                "{name} ranges over [{min:.6}, {max:.6}], outside [0, {ceiling}]"
            )));
        }
    }
    Ok(())
}

/// Runs `n_traj` independent trajectories. Results are ordered by
/// trajectory index regardless of scheduling.
pub fn run_ensemble(
    initial: &InitialCondition,
    cfg: &StepConfig,
    basis: &BasisSet,
    params: &ModelParams,
    noise: &NoiseModel,
    policy: &SeedPolicy,
    n_traj: usize,
) -> Result<Vec<Trajectory>, Error> {
    (0..n_traj as u64)
        .into_par_iter()
        .map(|trajectory| {
            let state = initial.build(basis, params, policy, trajectory)?;
            integrate(&state, cfg, basis, params, noise, policy, trajectory)
                .map_err(|source| Error::Trajectory { trajectory, source })
        })
        .collect()
}

/// Direction of the initial-data perturbation in the stability experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Shift of the spatial mean (constant mode) of both densities.
    ConstantShift,
    /// Bump in the first nonconstant mode of both densities.
    FirstModeBump,
}

impl Perturbation {
    fn mode(self) -> usize {
        match self {
            Perturbation::ConstantShift => 0,
            Perturbation::FirstModeBump => 1,
        }
    }
}

/// Two sides of the pathwise stability inequality and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityResult {
    pub eps_ic: f64,
    /// `sum_i E[ ||u_i - v_i||^2_{L^2 over space and time} ]`.
    pub lhs: f64,
    /// `sum_i E[ ||u_i(0) - v_i(0)||^2_{L^2} ]`.
    pub rhs: f64,
    /// `lhs / rhs`; zero when both runs coincide.
    pub ratio: f64,
}

fn space_time_gap_sq(a: &Trajectory, b: &Trajectory) -> f64 {
    let dt_rec = a.recorded_dt();
    let n_times = a.states.len();
    let mut total = 0.0;
    for m in 0..n_times {
        let (sa, sb) = (&a.states[m], &b.states[m]);
        let gap: f64 = sa
            .c1
            .iter()
            .zip(&sb.c1)
            .chain(sa.c2.iter().zip(&sb.c2))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let w = if m == 0 || m == n_times - 1 { 0.5 } else { 1.0 };
        total += w * dt_rec * gap;
    }
    total
}

/// Paired trajectories with identical noise streams, differing only in the
/// initial data by `eps_ic` along the perturbation direction.
pub fn stability_experiment(
    initial: &InitialCondition,
    perturbation: Perturbation,
    eps_ic: f64,
    cfg: &StepConfig,
    basis: &BasisSet,
    params: &ModelParams,
    noise: &NoiseModel,
    policy: &SeedPolicy,
    n_traj: usize,
) -> Result<StabilityResult, Error> {
    let mode = perturbation.mode();
    if mode >= basis.n_modes {
        return Err(Error::Config("perturbation mode outside the basis".into()));
    }
    let results: Vec<(f64, f64)> = (0..n_traj as u64)
        .into_par_iter()
        .map(|trajectory| -> Result<(f64, f64), Error> {
            let base = initial.build(basis, params, policy, trajectory)?;
            let mut perturbed = base.clone();
            perturbed.c1[mode] += eps_ic;
            perturbed.c2[mode] += eps_ic;
            validate_admissible(&perturbed, basis, params)?;
            let wrap = |source| Error::Trajectory { trajectory, source };
            // same trajectory index, hence bitwise-identical increments
            let a = integrate(&base, cfg, basis, params, noise, policy, trajectory)
                .map_err(wrap)?;
            let b = integrate(&perturbed, cfg, basis, params, noise, policy, trajectory)
                .map_err(wrap)?;
            let rhs: f64 = {
                let (sa, sb) = (&a.states[0], &b.states[0]);
                sa.c1
                    .iter()
                    .zip(&sb.c1)
                    .chain(sa.c2.iter().zip(&sb.c2))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum()
            };
            Ok((space_time_gap_sq(&a, &b), rhs))
        })
        .collect::<Result<_, _>>()?;
    let n = results.len() as f64;
    let lhs = results.iter().map(|r| r.0).sum::<f64>() / n;
    let rhs = results.iter().map(|r| r.1).sum::<f64>() / n;
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(StabilityResult { eps_ic, lhs, rhs, ratio })
}

/// Which discretization parameter a refinement study sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementAxis {
    Modes,
    Dt,
}

/// Gaps between consecutive refinement levels and the fitted rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub axis: RefinementAxis,
    /// Parameter value per level (mode count or dt).
    pub levels: Vec<f64>,
    /// Final-time L2 gap between level `j` and level `j + 1`.
    pub gaps: Vec<f64>,
    /// Slope of `log gap` against `log parameter`; positive means the gaps
    /// shrink under refinement on both axes.
    pub observed_order: f64,
}

fn final_gap_common_modes(a: &SpectralState, b: &SpectralState, n_common: usize) -> f64 {
    let mut gap_sq = 0.0;
    for l in 0..n_common {
        let d1 = a.c1[l] - b.c1[l];
        let d2 = a.c2[l] - b.c2[l];
        gap_sq += d1 * d1 + d2 * d2;
    }
    gap_sq.sqrt()
}

/// Reruns one trajectory across refinement levels with shared noise and
/// tabulates the consecutive final-time gaps.
#[allow(clippy::too_many_arguments)]
pub fn refinement_study(
    axis: RefinementAxis,
    n_levels: usize,
    initial: &InitialCondition,
    cfg: &StepConfig,
    domain: &Domain,
    base_n_modes: usize,
    params: &ModelParams,
    noise: &NoiseModel,
    policy: &SeedPolicy,
    trajectory: u64,
) -> Result<ConvergenceTable, Error> {
    if n_levels < 3 {
        return Err(Error::Config("refinement studies need at least 3 levels".into()));
    }
    match axis {
        RefinementAxis::Modes => {
            // the initial state lives in the coarsest span; finer levels
            // zero-pad it so every level starts from the same field
            let coarse = build_basis(domain, base_n_modes).map_err(Error::Core)?;
            let base_state = initial.build(&coarse, params, policy, trajectory)?;
            let mut finals = Vec::with_capacity(n_levels);
            let mut levels = Vec::with_capacity(n_levels);
            for j in 0..n_levels {
                let n = base_n_modes << j;
                let basis = build_basis(domain, n).map_err(Error::Core)?;
                let mut state = SpectralState::zeros(0.0, n);
                state.c1[..base_n_modes].copy_from_slice(&base_state.c1);
                state.c2[..base_n_modes].copy_from_slice(&base_state.c2);
                let traj = integrate(&state, cfg, &basis, params, noise, policy, trajectory)
                    .map_err(|source| Error::Trajectory { trajectory, source })?;
                finals.push(traj.final_state().clone());
                levels.push(n as f64);
            }
            let gaps: Vec<f64> = finals
                .windows(2)
                .enumerate()
                .map(|(j, w)| final_gap_common_modes(&w[0], &w[1], base_n_modes << j))
                .collect();
            // gaps shrink as n grows: report the decay rate as positive
            let observed_order = -fit_power_law(&levels[..gaps.len()], &gaps);
            Ok(ConvergenceTable { axis, levels, gaps, observed_order })
        }
        RefinementAxis::Dt => {
            let basis = build_basis(domain, base_n_modes).map_err(Error::Core)?;
            let state = initial.build(&basis, params, policy, trajectory)?;
            let finest_div = 1usize << (n_levels - 1);
            let mut fine_cfg = cfg.clone();
            fine_cfg.dt = cfg.dt / finest_div as f64;
            fine_cfg.record_every = fine_cfg.n_steps().max(1);
            fine_cfg.record_increments = true;
            let fine = integrate(&state, &fine_cfg, &basis, params, noise, policy, trajectory)
                .map_err(|source| Error::Trajectory { trajectory, source })?;
            let increments = fine.increments.as_ref().expect("recorded above");

            let mut finals = Vec::with_capacity(n_levels);
            let mut levels = Vec::with_capacity(n_levels);
            for j in 0..n_levels {
                let window = finest_div >> j;
                let mut level_cfg = cfg.clone();
                level_cfg.dt = cfg.dt / (1usize << j) as f64;
                level_cfg.record_every = level_cfg.n_steps().max(1);
                let traj = if window == 1 {
                    fine.clone()
                } else {
                    // coarse steps consume window-summed fine increments,
                    // realizing the same Wiener path at every level
                    integrate_with(&state, &level_cfg, &basis, params, noise, |step| {
                        let mut agg =
                            WienerIncrements::zeros(level_cfg.dt, noise.n_noise_modes);
                        for s in step * window..(step + 1) * window {
                            for (acc, &v) in agg.dw1.iter_mut().zip(&increments[s].dw1) {
                                *acc += v;
                            }
                            for (acc, &v) in agg.dw2.iter_mut().zip(&increments[s].dw2) {
                                *acc += v;
                            }
                        }
                        agg
                    })
                    .map_err(|source| Error::Trajectory { trajectory, source })?
                };
                finals.push(traj.final_state().clone());
                levels.push(level_cfg.dt);
            }
            let gaps: Vec<f64> = finals
                .windows(2)
                .map(|w| final_gap_common_modes(&w[0], &w[1], base_n_modes))
                .collect();
            let observed_order = fit_power_law(&levels[..gaps.len()], &gaps);
            Ok(ConvergenceTable { axis, levels, gaps, observed_order })
        }
    }
}

/// Deterministic noise-free increments helper for tests and studies.
pub fn shared_increments(
    dt: f64,
    trajectory: u64,
    policy: &SeedPolicy,
    noise: &NoiseModel,
) -> impl Fn(usize) -> WienerIncrements {
    let noise = noise.clone();
    let policy = *policy;
    move |step| sample_increments(dt, trajectory, step as u64, &policy, &noise)
}
