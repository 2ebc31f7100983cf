//! Finite-dimensional drift/diffusion assembly and Euler-Maruyama stepping.
//!
//! Coefficient dynamics per mode `l`:
//!
//! ```text
//! dc1_l = [-d1 lambda_l c1_l + (chi(u1) grad u2, grad e_l) + (F1, e_l)] dt
//!         + sum_k (sigma_{u1,k}, e_l) dW_{u1,k}
//! dc2_l = [-d2 lambda_l c2_l + (F2, e_l)] dt
//!         + sum_k (sigma_{u2,k}, e_l) dW_{u2,k}
//! ```
//!
//! Nonlinear terms are evaluated pseudospectrally (reconstruct to the grid,
//! apply pointwise, project back). The taxis term uses the weak pairing
//! `(chi grad u2, grad e_l)` directly, so the divergence of the
//! discontinuous-derivative `chi` flux is never formed pointwise.
//!
//! Divergence policy: any nonfinite coefficient aborts with a structured
//! error; densities are never clipped, so the maximum-principle diagnostics
//! observe the raw discrete behavior.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Error;
use crate::model::{self, ModelParams};
use crate::noise::{
    project_noise, sample_increments, NoiseModel, SeedPolicy, SigmaMatrix, WienerIncrements,
};
use crate::spectral::{BasisSet, Field, SpectralState};

/// Explicit-Euler stability ceiling `0.5 / (max(d1,d2) lambda_max)`.
pub fn dt_ceiling(basis: &BasisSet, params: &ModelParams) -> f64 {
    0.5 / (params.d1.max(params.d2) * basis.lambda_max())
}

/// Time-stepping configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between recorded states.
    pub record_every: usize,
    /// Keep the per-step Wiener increments in the trajectory (needed for
    /// weak-form residual replay).
    #[cfg_attr(feature = "serde", serde(default))]
    pub record_increments: bool,
    /// Vacuous safety flag: `chi` already truncates negative densities.
    #[cfg_attr(feature = "serde", serde(default = "default_true"))]
    pub clip_negative_in_chi: bool,
}

#[cfg(feature = "serde")]
fn default_true() -> bool {
    true
}

impl StepConfig {
    pub fn new(dt: f64, t_end: f64, record_every: usize) -> Self {
        StepConfig { dt, t_end, record_every, record_increments: false, clip_negative_in_chi: true }
    }

    pub fn n_steps(&self) -> usize {
        libm::round(self.t_end / self.dt) as usize
    }

    pub fn validate(&self, basis: &BasisSet, params: &ModelParams) -> Result<(), Error> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidParameter("t_end must be nonnegative".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        let ceiling = dt_ceiling(basis, params);
        if self.dt > ceiling {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds the stability ceiling {ceiling:.6e} (0.5 / (max(d1,d2) * lambda_max))",
                self.dt
            )));
        }
        let n = self.n_steps();
        if n > 0 && n % self.record_every != 0 {
            return Err(Error::InvalidParameter(format!(
                "step count {n} is not a multiple of record_every = {}",
                self.record_every
            )));
        }
        Ok(())
    }
}

/// A recorded path of the Galerkin system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub record_every: usize,
    /// States at `t = 0, record_every * dt, ...` up to `t_end`.
    pub states: Vec<SpectralState>,
    /// Per-step increments at full resolution, when recorded.
    pub increments: Option<Vec<WienerIncrements>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &SpectralState {
        self.states.last().unwrap()
    }

    /// Spacing of the recorded time grid.
    pub fn recorded_dt(&self) -> f64 {
        self.dt * self.record_every as f64
    }
}

/// Drift coefficient vectors of both equations.
pub fn assemble_drift(
    state: &SpectralState,
    basis: &BasisSet,
    params: &ModelParams,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let u1 = basis.reconstruct(&state.c1)?;
    let u2 = basis.reconstruct(&state.c2)?;

    // taxis flux chi(u1) grad u2, paired weakly against grad e_l
    let grad_u2 = basis.gradient_field(&state.c2)?;
    let flux: Vec<Field> = grad_u2
        .iter()
        .map(|g| Field {
            values: u1
                .values
                .iter()
                .zip(&g.values)
                .map(|(&a, &gv)| model::chi(a, params) * gv)
                .collect(),
        })
        .collect();
    let taxis = basis.weak_pairing(&flux)?;

    let f1 = basis.project(&Field {
        values: u1
            .values
            .iter()
            .zip(&u2.values)
            .map(|(&a, &b)| model::reaction_f1(a, b, params))
            .collect(),
    })?;
    let f2 = basis.project(&Field {
        values: u1
            .values
            .iter()
            .zip(&u2.values)
            .map(|(&a, &b)| model::reaction_f2(a, b, params))
            .collect(),
    })?;

    let drift1: Vec<f64> = (0..basis.n_modes)
        .map(|l| -params.d1 * basis.eigenvalues[l] * state.c1[l] + taxis[l] + f1[l])
        .collect();
    let drift2: Vec<f64> = (0..basis.n_modes)
        .map(|l| -params.d2 * basis.eigenvalues[l] * state.c2[l] + f2[l])
        .collect();
    Ok((drift1, drift2))
}

/// Diffusion operators of both equations (the projected noise amplitudes,
/// reshaped as maps from increments to coefficient updates).
pub fn assemble_diffusion(
    state: &SpectralState,
    basis: &BasisSet,
    noise_model: &NoiseModel,
) -> Result<[SigmaMatrix; 2], Error> {
    project_noise(state, basis, noise_model)
}

/// One Euler-Maruyama step `c <- c + drift dt + diffusion dW`.
pub fn em_step(
    state: &SpectralState,
    dt: f64,
    increments: &WienerIncrements,
    basis: &BasisSet,
    params: &ModelParams,
    noise_model: &NoiseModel,
) -> Result<SpectralState, Error> {
    let (drift1, drift2) = assemble_drift(state, basis, params)?;
    let [g1, g2] = assemble_diffusion(state, basis, noise_model)?;
    let n1 = g1.apply(&increments.dw1)?;
    let n2 = g2.apply(&increments.dw2)?;

    let c1: Vec<f64> = state
        .c1
        .iter()
        .zip(&drift1)
        .zip(&n1)
        .map(|((c, d), w)| c + d * dt + w)
        .collect();
    let c2: Vec<f64> = state
        .c2
        .iter()
        .zip(&drift2)
        .zip(&n2)
        .map(|((c, d), w)| c + d * dt + w)
        .collect();
    for (equation, coeffs) in [(1usize, &c1), (2usize, &c2)] {
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { step: 0, equation });
        }
    }
    Ok(SpectralState::new(state.time + dt, c1, c2))
}

/// Integrates with increments supplied per step index.
///
/// This is the generic driver behind [`integrate`]; refinement studies use
/// it to feed window-aggregated fine-grid increments into coarse runs.
pub fn integrate_with(
    initial: &SpectralState,
    cfg: &StepConfig,
    basis: &BasisSet,
    params: &ModelParams,
    noise_model: &NoiseModel,
    mut increments_for: impl FnMut(usize) -> WienerIncrements,
) -> Result<Trajectory, Error> {
    cfg.validate(basis, params)?;
    params.validate()?;
    let n_steps = cfg.n_steps();
    let mut states = Vec::with_capacity(n_steps / cfg.record_every + 1);
    let mut recorded_increments = cfg.record_increments.then(|| Vec::with_capacity(n_steps));

    let mut state = initial.clone();
    state.time = 0.0;
    states.push(state.clone());
    for step in 0..n_steps {
        let dw = increments_for(step);
        state = em_step(&state, cfg.dt, &dw, basis, params, noise_model).map_err(|e| match e {
            Error::IntegrationDiverged { equation, .. } => {
                Error::IntegrationDiverged { step, equation }
            }
            other => other,
        })?;
        // keep the time grid exactly uniform
        state.time = (step + 1) as f64 * cfg.dt;
        if let Some(inc) = recorded_increments.as_mut() {
            inc.push(dw);
        }
        if (step + 1) % cfg.record_every == 0 {
            states.push(state.clone());
        }
    }
    Ok(Trajectory {
        dt: cfg.dt,
        record_every: cfg.record_every,
        states,
        increments: recorded_increments,
    })
}

/// Integrates one trajectory with seeded increments.
pub fn integrate(
    initial: &SpectralState,
    cfg: &StepConfig,
    basis: &BasisSet,
    params: &ModelParams,
    noise_model: &NoiseModel,
    policy: &SeedPolicy,
    trajectory: u64,
) -> Result<Trajectory, Error> {
    integrate_with(initial, cfg, basis, params, noise_model, |step| {
        sample_increments(cfg.dt, trajectory, step as u64, policy, noise_model)
    })
}

/// Sampling report for the weak coercivity inequality
/// `2 (M(C), C) + ||Gamma(C)||^2 <= K (1 + ||C||^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    pub samples: usize,
    /// Largest observed `lhs / (1 + ||C||^2)`; finite iff the inequality
    /// holds with some constant over the sample.
    pub max_ratio: f64,
    /// Least-squares fit of `lhs` against `1 + ||C||^2` through the origin;
    /// the reported constant `K`. Much more seed-stable than the max.
    pub fitted_k: f64,
}

/// Sampling report for local weak monotonicity
/// `2 (M(C1) - M(C2), C1 - C2) + ||Gamma(C1) - Gamma(C2)||^2 <= K(r) ||C1 - C2||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub radius: f64,
    /// Largest observed `lhs / ||C1 - C2||^2`.
    pub max_ratio: f64,
    /// Least-squares fit of `lhs` against `||C1 - C2||^2` through the
    /// origin; the reported constant `K(r)`.
    pub fitted_k: f64,
}

/// Origin-constrained least-squares slope of `lhs` against `x`.
fn fit_through_origin(points: &[(f64, f64)]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &(x, lhs) in points {
        num += lhs * x;
        den += x * x;
    }
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

fn random_state(rng: &mut ChaCha8Rng, n_modes: usize, radius: f64) -> SpectralState {
    let component = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let g: Vec<f64> = (0..n_modes).map(|_| StandardNormal.sample(rng)).collect();
        let norm = libm::sqrt(g.iter().map(|v| v * v).sum::<f64>()).max(1e-300);
        let u: f64 = StandardNormal.sample(rng);
        // uniform radius in (0, r]
        let scale = radius * libm::fabs(libm::tanh(u));
        g.into_iter().map(|v| v * scale / norm).collect()
    };
    SpectralState::new(0.0, component(rng), component(rng))
}

fn coercivity_lhs(
    state: &SpectralState,
    basis: &BasisSet,
    params: &ModelParams,
    noise_model: &NoiseModel,
) -> Result<f64, Error> {
    let (d1, d2) = assemble_drift(state, basis, params)?;
    let [g1, g2] = assemble_diffusion(state, basis, noise_model)?;
    let dot: f64 = d1.iter().zip(&state.c1).map(|(a, b)| a * b).sum::<f64>()
        + d2.iter().zip(&state.c2).map(|(a, b)| a * b).sum::<f64>();
    Ok(2.0 * dot + g1.hs_norm_sq() + g2.hs_norm_sq())
}

/// Samples the weak coercivity inequality over random states.
pub fn check_coercivity(
    samples: usize,
    radius: f64,
    basis: &BasisSet,
    params: &ModelParams,
    noise_model: &NoiseModel,
    seed: u64,
) -> Result<CoercivityReport, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = f64::NEG_INFINITY;
    let mut points = Vec::with_capacity(samples);
    for _ in 0..samples {
        let state = random_state(&mut rng, basis.n_modes, radius);
        let lhs = coercivity_lhs(&state, basis, params, noise_model)?;
        let norm_sq: f64 = state.c1.iter().chain(&state.c2).map(|v| v * v).sum();
        max_ratio = max_ratio.max(lhs / (1.0 + norm_sq));
        points.push((1.0 + norm_sq, lhs));
    }
    Ok(CoercivityReport { samples, max_ratio, fitted_k: fit_through_origin(&points) })
}

/// Samples the local weak monotonicity inequality over random pairs with
/// component norms at most `radius`.
pub fn check_monotonicity(
    samples: usize,
    radius: f64,
    basis: &BasisSet,
    params: &ModelParams,
    noise_model: &NoiseModel,
    seed: u64,
) -> Result<MonotonicityReport, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = f64::NEG_INFINITY;
    let mut points = Vec::with_capacity(samples);
    for _ in 0..samples {
        let s1 = random_state(&mut rng, basis.n_modes, radius);
        let s2 = random_state(&mut rng, basis.n_modes, radius);
        let (m1a, m1b) = assemble_drift(&s1, basis, params)?;
        let (m2a, m2b) = assemble_drift(&s2, basis, params)?;
        let [g1a, g1b] = assemble_diffusion(&s1, basis, noise_model)?;
        let [g2a, g2b] = assemble_diffusion(&s2, basis, noise_model)?;

        let mut dot = 0.0;
        let mut gap_sq = 0.0;
        for l in 0..basis.n_modes {
            let dc1 = s1.c1[l] - s2.c1[l];
            let dc2 = s1.c2[l] - s2.c2[l];
            dot += (m1a[l] - m2a[l]) * dc1 + (m1b[l] - m2b[l]) * dc2;
            gap_sq += dc1 * dc1 + dc2 * dc2;
        }
        let mut gamma_gap = 0.0;
        for k in 0..noise_model.n_noise_modes {
            for l in 0..basis.n_modes {
                let a = g1a.get(k, l) - g2a.get(k, l);
                let b = g1b.get(k, l) - g2b.get(k, l);
                gamma_gap += a * a + b * b;
            }
        }
        if gap_sq > 1e-14 {
            max_ratio = max_ratio.max((2.0 * dot + gamma_gap) / gap_sq);
            points.push((gap_sq, 2.0 * dot + gamma_gap));
        }
    }
    Ok(MonotonicityReport { samples, radius, max_ratio, fitted_k: fit_through_origin(&points) })
}

/// Fits the monotonicity constant for several radii from one sample pool.
///
/// All pairs are drawn in the largest ball; the constant for radius `r` is
/// the worst ratio over the pairs whose component norms stay within `r`.
/// The nested sub-ball structure makes the fitted constants nondecreasing
/// in `r` by construction, matching the local character of the bound.
pub fn check_monotonicity_sweep(
    samples: usize,
    radii: &[f64],
    basis: &BasisSet,
    params: &ModelParams,
    noise_model: &NoiseModel,
    seed: u64,
) -> Result<Vec<MonotonicityReport>, Error> {
    let r_max = radii.iter().cloned().fold(0.0f64, f64::max);
    if !(r_max > 0.0) {
        return Err(Error::InvalidParameter("radii must contain a positive entry".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let component_norm = |c: &[f64]| libm::sqrt(c.iter().map(|v| v * v).sum::<f64>());
    // (effective radius of the pair, ||C1 - C2||^2, observed lhs)
    let mut pool: Vec<(f64, f64, f64)> = Vec::with_capacity(samples);
    for _ in 0..samples {
        // per-pair target radius, uniform in (0, r_max], so every sub-ball
        // receives a proportional share of the pool
        let rho = r_max * (1.0 - rng.random::<f64>());
        let s1 = random_state(&mut rng, basis.n_modes, rho);
        let s2 = random_state(&mut rng, basis.n_modes, rho);
        let reach = component_norm(&s1.c1)
            .max(component_norm(&s1.c2))
            .max(component_norm(&s2.c1))
            .max(component_norm(&s2.c2));
        let (m1a, m1b) = assemble_drift(&s1, basis, params)?;
        let (m2a, m2b) = assemble_drift(&s2, basis, params)?;
        let [g1a, g1b] = assemble_diffusion(&s1, basis, noise_model)?;
        let [g2a, g2b] = assemble_diffusion(&s2, basis, noise_model)?;
        let mut dot = 0.0;
        let mut gap_sq = 0.0;
        for l in 0..basis.n_modes {
            let dc1 = s1.c1[l] - s2.c1[l];
            let dc2 = s1.c2[l] - s2.c2[l];
            dot += (m1a[l] - m2a[l]) * dc1 + (m1b[l] - m2b[l]) * dc2;
            gap_sq += dc1 * dc1 + dc2 * dc2;
        }
        let mut gamma_gap = 0.0;
        for k in 0..noise_model.n_noise_modes {
            for l in 0..basis.n_modes {
                let a = g1a.get(k, l) - g2a.get(k, l);
                let b = g1b.get(k, l) - g2b.get(k, l);
                gamma_gap += a * a + b * b;
            }
        }
        if gap_sq > 1e-14 {
            pool.push((reach, gap_sq, 2.0 * dot + gamma_gap));
        }
    }
    radii
        .iter()
        .map(|&r| {
            let mut max_ratio = f64::NEG_INFINITY;
            let mut points = Vec::new();
            for &(reach, gap_sq, lhs) in &pool {
                if reach <= r {
                    max_ratio = max_ratio.max(lhs / gap_sq);
                    points.push((gap_sq, lhs));
                }
            }
            if points.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "no sampled pairs fell inside radius {r}; increase samples"
                )));
            }
            Ok(MonotonicityReport {
                samples: points.len(),
                radius: r,
                max_ratio,
                fitted_k: fit_through_origin(&points),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseShape;
    use crate::spectral::{build_basis, Domain};
    use alloc::vec;

    fn setup(n_modes: usize, grid: usize) -> (BasisSet, ModelParams) {
        let basis = build_basis(&Domain::new_1d(1.0, grid).unwrap(), n_modes).unwrap();
        (basis, ModelParams::default_set())
    }

    #[test]
    fn zero_state_zero_drift() {
        let (basis, params) = setup(6, 64);
        let state = SpectralState::zeros(0.0, 6);
        let (d1, d2) = assemble_drift(&state, &basis, &params).unwrap();
        assert!(d1.iter().all(|v| v.abs() < 1e-14));
        assert!(d2.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn constant_predator_no_prey_drift() {
        // u1 constant positive <= u_m, u2 = 0: equation-1 drift is
        // -a u1 projected, i.e. mode 0 only.
        let (basis, params) = setup(5, 64);
        let mut state = SpectralState::zeros(0.0, 5);
        state.c1[0] = 1.5; // u1 = 1.5 everywhere (e_0 = 1 on the unit interval)
        let (d1, _) = assemble_drift(&state, &basis, &params).unwrap();
        assert!((d1[0] + params.a * 1.5).abs() < 1e-10);
        for &v in &d1[1..] {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn drift_matches_refined_quadrature_oracle() {
        // Same smooth in-range state assembled on the working grid and on a
        // much finer grid; the pseudospectral pairings must agree.
        let (coarse, params) = setup(6, 128);
        let fine = build_basis(&Domain::new_1d(1.0, 4096).unwrap(), 6).unwrap();
        // kept well inside (0, u_m) x (0, inf) so every nonlinearity is smooth
        let c1 = vec![1.0, 0.15, -0.1, 0.05, 0.08, -0.04];
        let c2 = vec![2.0, 0.3, 0.2, -0.15, 0.1, 0.05];
        let state = SpectralState::new(0.0, c1, c2);
        let (a1, a2) = assemble_drift(&state, &coarse, &params).unwrap();
        let (b1, b2) = assemble_drift(&state, &fine, &params).unwrap();
        for l in 0..6 {
            assert!((a1[l] - b1[l]).abs() < 1e-7, "eq1 mode {l}: {} vs {}", a1[l], b1[l]);
            assert!((a2[l] - b2[l]).abs() < 1e-7, "eq2 mode {l}: {} vs {}", a2[l], b2[l]);
        }
    }

    #[test]
    fn diffusion_is_projected_noise() {
        let (basis, _) = setup(4, 64);
        let m = NoiseModel::new(3, 0.2, 1.0, NoiseShape::Coupled).unwrap();
        let state = SpectralState::new(0.0, vec![0.5, 0.1, -0.2, 0.3], vec![1.0, -0.4, 0.2, 0.0]);
        let a = assemble_diffusion(&state, &basis, &m).unwrap();
        let b = project_noise(&state, &basis, &m).unwrap();
        assert_eq!(a, b);
        // additive shape: state-independent
        let add = NoiseModel::new(3, 0.2, 1.0, NoiseShape::AdditiveBounded).unwrap();
        let g0 = assemble_diffusion(&SpectralState::zeros(0.0, 4), &basis, &add).unwrap();
        let g1 = assemble_diffusion(&state, &basis, &add).unwrap();
        assert_eq!(g0, g1);
    }

    #[test]
    fn em_step_mode_decay() {
        // u2 = 0 and u1 a positive in-span field: each mode obeys
        // c <- c (1 - d1 lambda dt) - a c dt exactly.
        let (basis, params) = setup(4, 128);
        let c1 = vec![2.0, 0.3, -0.2, 0.1]; // u1 in (0, u_m)? min 2 - 0.6*sqrt2 > 0
        let state = SpectralState::new(0.0, c1.clone(), vec![0.0; 4]);
        let dt = 1e-4;
        let m = NoiseModel::new(2, 0.0, 1.0, NoiseShape::Linear).unwrap();
        let dw = WienerIncrements::zeros(dt, 2);
        let next = em_step(&state, dt, &dw, &basis, &params, &m).unwrap();
        for l in 0..4 {
            let expected = c1[l] * (1.0 - params.d1 * basis.eigenvalues[l] * dt - params.a * dt);
            assert!((next.c1[l] - expected).abs() < 1e-12);
        }
        assert!(next.c2.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn em_step_zero_dt_identity() {
        let (basis, params) = setup(4, 64);
        let state = SpectralState::new(0.0, vec![0.5, 0.2, 0.1, 0.0], vec![1.0, 0.0, 0.3, 0.1]);
        let m = NoiseModel::default_linear();
        let dw = WienerIncrements::zeros(0.0, m.n_noise_modes);
        let next = em_step(&state, 0.0, &dw, &basis, &params, &m).unwrap();
        assert_eq!(next.c1, state.c1);
        assert_eq!(next.c2, state.c2);
    }

    #[test]
    fn em_step_single_mode_hand_computation() {
        // n = 1 on the unit interval: the system is the scalar SDE pair
        // du1 = F1(u1,u2) dt + sigma dW1, du2 = F2(u1,u2) dt + sigma dW2.
        let (basis, params) = setup(1, 64);
        let m = NoiseModel::new(2, 0.3, 1.0, NoiseShape::Linear).unwrap();
        let (u1, u2) = (0.8, 1.7);
        let state = SpectralState::new(0.0, vec![u1], vec![u2]);
        let dt = 1e-3;
        let mut dw = WienerIncrements::zeros(dt, 2);
        dw.dw1 = vec![0.02, -0.01];
        dw.dw2 = vec![-0.005, 0.03];
        let next = em_step(&state, dt, &dw, &basis, &params, &m).unwrap();
        let f1 = model::reaction_f1(u1, u2, &params);
        let f2 = model::reaction_f2(u1, u2, &params);
        let exp1 = u1 + f1 * dt + m.beta(0) * u1 * dw.dw1[0] + m.beta(1) * u1 * dw.dw1[1];
        let exp2 = u2 + f2 * dt + m.beta(0) * u2 * dw.dw2[0] + m.beta(1) * u2 * dw.dw2[1];
        assert!((next.c1[0] - exp1).abs() < 1e-12);
        assert!((next.c2[0] - exp2).abs() < 1e-12);
    }

    #[test]
    fn em_step_divergence_reported() {
        let (basis, params) = setup(2, 64);
        let state = SpectralState::new(0.0, vec![f64::INFINITY, 0.0], vec![0.0, 0.0]);
        let m = NoiseModel::new(1, 0.0, 1.0, NoiseShape::Linear).unwrap();
        let dw = WienerIncrements::zeros(1e-4, 1);
        // infinite input makes drift nonfinite
        let err = em_step(&state, 1e-4, &dw, &basis, &params, &m);
        assert!(matches!(err, Err(Error::IntegrationDiverged { .. })));
    }

    #[test]
    fn integrate_zero_horizon() {
        let (basis, params) = setup(4, 64);
        let m = NoiseModel::default_linear();
        let policy = SeedPolicy::new(1);
        let cfg = StepConfig::new(1e-4, 0.0, 1);
        let initial = SpectralState::new(0.0, vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]);
        let traj = integrate(&initial, &cfg, &basis, &params, &m, &policy, 0).unwrap();
        assert_eq!(traj.states.len(), 1);
    }

    #[test]
    fn integrate_deterministic_replay() {
        let (basis, params) = setup(4, 64);
        let m = NoiseModel::default_linear();
        let policy = SeedPolicy::new(7);
        let cfg = StepConfig::new(1e-3, 0.05, 10);
        let initial = SpectralState::new(0.0, vec![1.0, 0.1, 0.0, 0.0], vec![2.0, 0.0, 0.1, 0.0]);
        let a = integrate(&initial, &cfg, &basis, &params, &m, &policy, 3).unwrap();
        let b = integrate(&initial, &cfg, &basis, &params, &m, &policy, 3).unwrap();
        assert_eq!(a, b);
        let c = integrate(&initial, &cfg, &basis, &params, &m, &policy, 4).unwrap();
        assert_ne!(a.final_state(), c.final_state());
    }

    #[test]
    fn integrate_logistic_reference() {
        // u1 = 0, u2 spatially constant, zero noise: mode 0 of u2 follows
        // the logistic ODE. Compare with the closed-form solution at t = 1.
        let (basis, params) = setup(1, 64);
        let m = NoiseModel::new(1, 0.0, 1.0, NoiseShape::Linear).unwrap();
        let policy = SeedPolicy::new(0);
        let cfg = StepConfig::new(1e-4, 1.0, 100);
        let u0 = 0.5;
        let initial = SpectralState::new(0.0, vec![0.0], vec![u0]);
        let traj = integrate(&initial, &cfg, &basis, &params, &m, &policy, 0).unwrap();
        let k = params.k;
        let exact = k * u0 / (u0 + (k - u0) * libm::exp(-params.r * 1.0));
        let got = traj.final_state().c2[0];
        assert!((got - exact).abs() < 1e-3, "{got} vs {exact}");
        assert!(traj.final_state().c1[0].abs() < 1e-14);
    }

    #[test]
    fn dt_ceiling_enforced() {
        let (basis, params) = setup(16, 128);
        let cfg = StepConfig::new(1.0, 1.0, 1);
        assert!(cfg.validate(&basis, &params).is_err());
        let cfg = StepConfig::new(0.9 * dt_ceiling(&basis, &params), 0.0, 1);
        assert!(cfg.validate(&basis, &params).is_ok());
    }

    #[test]
    fn diffusion_only_energy_decay() {
        // chi and F switched off (u_m tiny, reaction evaluated at zero by
        // keeping both fields at zero is trivial) -- instead verify the
        // explicit-Euler diagonal decay directly: under the dt ceiling every
        // mode factor |1 - d lambda dt| <= 1.
        let (basis, params) = setup(16, 128);
        let dt = dt_ceiling(&basis, &params);
        for (l, &lam) in basis.eigenvalues.iter().enumerate() {
            let f1 = 1.0 - params.d1 * lam * dt;
            let f2 = 1.0 - params.d2 * lam * dt;
            assert!(f1.abs() <= 1.0 && f2.abs() <= 1.0, "mode {l}");
        }
        // and a stepped pure-diffusion run is nonincreasing in energy
        let mut c: Vec<f64> = (0..16).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let energy: f64 = c.iter().map(|v| v * v).sum();
            assert!(energy <= prev + 1e-15);
            prev = energy;
            c = c
                .iter()
                .zip(&basis.eigenvalues)
                .map(|(v, lam)| v * (1.0 - params.d1 * lam * dt))
                .collect();
        }
    }

    #[test]
    fn taxis_energy_identity() {
        // <weak_pairing(chi(u1) grad u2), c1> equals the direct quadrature
        // of chi(u1) grad u2 . grad u1.
        let (basis, params) = setup(6, 256);
        let c1 = vec![1.0, 0.2, -0.15, 0.1, 0.05, -0.08];
        let c2 = vec![2.0, 0.4, 0.3, -0.2, 0.15, 0.1];
        let state = SpectralState::new(0.0, c1.clone(), c2.clone());
        let u1 = basis.reconstruct(&c1).unwrap();
        let grad_u2 = basis.gradient_field(&c2).unwrap();
        let flux = vec![Field {
            values: u1
                .values
                .iter()
                .zip(&grad_u2[0].values)
                .map(|(&a, &g)| model::chi(a, &params) * g)
                .collect(),
        }];
        let pairing = basis.weak_pairing(&flux).unwrap();
        let via_coeffs: f64 = pairing.iter().zip(&state.c1).map(|(a, b)| a * b).sum();
        let grad_u1 = basis.gradient_field(&c1).unwrap();
        let direct = basis.inner(
            &flux[0],
            &Field { values: grad_u1[0].values.clone() },
        );
        assert!((via_coeffs - direct).abs() < 1e-7, "{via_coeffs} vs {direct}");
    }

    #[test]
    fn coercivity_zero_state_additive() {
        let (basis, params) = setup(4, 64);
        let m = NoiseModel::new(3, 0.2, 1.0, NoiseShape::AdditiveBounded).unwrap();
        let state = SpectralState::zeros(0.0, 4);
        let lhs = coercivity_lhs(&state, &basis, &params, &m).unwrap();
        // |Omega| = 1: HS norm per equation is sum beta_k^2
        let expected = 2.0 * m.sum_beta_sq();
        assert!((lhs - expected).abs() < 1e-10);
    }

    #[test]
    fn coercivity_sampled_finite() {
        let (basis, params) = setup(8, 64);
        let m = NoiseModel::default_linear();
        let rep = check_coercivity(1000, 4.0, &basis, &params, &m, 11).unwrap();
        assert!(rep.max_ratio.is_finite());
        // the fit tracks the bulk, the max the tail
        assert!(rep.fitted_k.is_finite() && rep.fitted_k <= rep.max_ratio);
        let other = check_coercivity(1000, 4.0, &basis, &params, &m, 12).unwrap();
        let rel = (rep.fitted_k - other.fitted_k).abs()
            / rep.fitted_k.abs().max(other.fitted_k.abs());
        assert!(rel < 0.10, "fitted K = {} vs {}", rep.fitted_k, other.fitted_k);
    }

    #[test]
    fn monotonicity_sampled_and_seed_stable() {
        let (basis, params) = setup(8, 64);
        let m = NoiseModel::default_linear();
        let a = check_monotonicity(1000, 4.0, &basis, &params, &m, 5).unwrap();
        assert!(a.max_ratio.is_finite() && a.max_ratio > 0.0);
        // same seed replays exactly
        let b = check_monotonicity(1000, 4.0, &basis, &params, &m, 5).unwrap();
        assert_eq!(a, b);
        // worst ratio is only loosely seed-stable; the fit is tight
        let c = check_monotonicity(1000, 4.0, &basis, &params, &m, 6).unwrap();
        let rel = (a.max_ratio - c.max_ratio).abs() / a.max_ratio.max(c.max_ratio);
        assert!(rel < 0.25, "K = {} vs {}", a.max_ratio, c.max_ratio);
        let rel_fit =
            (a.fitted_k - c.fitted_k).abs() / a.fitted_k.abs().max(c.fitted_k.abs());
        assert!(rel_fit < 0.10, "fitted K = {} vs {}", a.fitted_k, c.fitted_k);
    }

    #[test]
    fn monotonicity_sweep_is_monotone_in_radius() {
        let (basis, params) = setup(6, 64);
        let m = NoiseModel::default_linear();
        let reports =
            check_monotonicity_sweep(2000, &[1.0, 2.0, 4.0], &basis, &params, &m, 5).unwrap();
        assert_eq!(reports.len(), 3);
        for w in reports.windows(2) {
            assert!(
                w[1].max_ratio >= w[0].max_ratio,
                "K({}) = {} < K({}) = {}",
                w[1].radius,
                w[1].max_ratio,
                w[0].radius,
                w[0].max_ratio
            );
        }
    }

    #[test]
    fn monotonicity_scalar_prey_analytic_crosscheck() {
        // n = 1, u1 = 0, pairs differing only in the prey value y: the drift
        // gap is the logistic difference and the noise gap (linear shape) is
        // sum beta_k^2 (y1 - y2)^2, so the ratio has the closed form
        // 2 (logistic(y1) - logistic(y2)) / (y1 - y2) + sum beta_k^2.
        let (basis, params) = setup(1, 64);
        let m = NoiseModel::new(4, 0.2, 1.0, NoiseShape::Linear).unwrap();
        for (y1, y2) in [(0.5, 1.5), (2.0, 0.1), (3.0, 3.5)] {
            let s1 = SpectralState::new(0.0, vec![0.0], vec![y1]);
            let s2 = SpectralState::new(0.0, vec![0.0], vec![y2]);
            let (d1a, d1b) = assemble_drift(&s1, &basis, &params).unwrap();
            let (d2a, d2b) = assemble_drift(&s2, &basis, &params).unwrap();
            let [g1a, g1b] = assemble_diffusion(&s1, &basis, &m).unwrap();
            let [g2a, g2b] = assemble_diffusion(&s2, &basis, &m).unwrap();
            let dy = y1 - y2;
            let lhs = 2.0 * ((d1a[0] - d2a[0]) * 0.0 + (d1b[0] - d2b[0]) * dy)
                + (0..m.n_noise_modes)
                    .map(|k| {
                        let a = g1a.get(k, 0) - g2a.get(k, 0);
                        let b = g1b.get(k, 0) - g2b.get(k, 0);
                        a * a + b * b
                    })
                    .sum::<f64>();
            let ratio = lhs / (dy * dy);
            let logi = |y: f64| model::logistic_growth(y, &params);
            let expected = 2.0 * (logi(y1) - logi(y2)) / dy + m.sum_beta_sq();
            assert!((ratio - expected).abs() < 1e-10, "{ratio} vs {expected}");
        }
    }
}
