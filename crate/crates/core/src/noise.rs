//! Truncated cylindrical Wiener process and noise amplitude operators.
//!
//! The paper-level noise is `sigma_{u_i} dW_{u_i} = sum_k sigma_{u_i,k} dW_{u_i,k}`
//! with independent scalar Brownian motions per mode and equation. We keep
//! `n_noise_modes` directions with decay weights `beta_k = beta0 k^{-gamma}`
//! (`gamma > 1/2` so the noise energy is summable) and offer three amplitude
//! shapes covering the admissible class: multiplicative in the own density,
//! coupled in both densities, and state-independent additive.
//!
//! Increments are generated counter-based: each `(trajectory, equation,
//! mode, step)` tuple is hashed into a ChaCha8 stream, so concurrent
//! trajectories reproduce bit-identically without shared generators.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Error;
use crate::spectral::{BasisSet, SpectralState};

/// Which equation a noise term drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// Predator density `u1`.
    Predator,
    /// Prey density `u2`.
    Prey,
}

impl Equation {
    pub const BOTH: [Equation; 2] = [Equation::Predator, Equation::Prey];

    /// Zero-based index (0 for `u1`, 1 for `u2`).
    pub fn index(self) -> usize {
        match self {
            Equation::Predator => 0,
            Equation::Prey => 1,
        }
    }
}

/// Pointwise amplitude shape of `sigma_{u_i,k}(u1, u2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseShape {
    /// `beta_k * u_i`: multiplicative, vanishes at zero density.
    Linear,
    /// `beta_k * (u1 + u2) / 2`: couples the two densities.
    Coupled,
    /// `beta_k`: state-independent.
    AdditiveBounded,
}

/// Truncated cylindrical-Wiener description.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct NoiseModel {
    /// Retained Wiener directions.
    pub n_noise_modes: usize,
    /// Weight scale `beta0`.
    pub beta0: f64,
    /// Weight decay exponent; must exceed 1/2 for summable noise energy.
    pub gamma: f64,
    pub shape: NoiseShape,
    /// Growth/Lipschitz constant implied by `(beta0, gamma, shape)`.
    pub c_sigma: f64,
}

impl NoiseModel {
    /// Builds a noise model, rejecting non-summable weight sequences.
    pub fn new(
        n_noise_modes: usize,
        beta0: f64,
        gamma: f64,
        shape: NoiseShape,
    ) -> Result<Self, Error> {
        if n_noise_modes == 0 {
            return Err(Error::InvalidParameter("n_noise_modes must be >= 1".into()));
        }
        // beta0 = 0 is allowed: it switches the noise off entirely, which
        // the deterministic reference runs rely on.
        if !(beta0 >= 0.0) || !beta0.is_finite() {
            return Err(Error::InvalidParameter(format!("beta0 must be nonnegative, got {beta0}")));
        }
        if !(gamma > 0.5) {
            return Err(Error::InvalidParameter(format!(
                "gamma must exceed 1/2 for summable noise weights (sum beta_k^2 diverges), got {gamma}"
            )));
        }
        let c_sigma = beta0 * beta0 * zeta_upper_bound(2.0 * gamma);
        Ok(NoiseModel { n_noise_modes, beta0, gamma, shape, c_sigma })
    }

    /// Default noise: 16 modes, `beta0 = 0.1`, `gamma = 1`, linear shape.
    pub fn default_linear() -> Self {
        NoiseModel::new(16, 0.1, 1.0, NoiseShape::Linear).unwrap()
    }

    /// Weight of mode `k` (zero-based slot; the decay law counts from 1).
    pub fn beta(&self, k: usize) -> f64 {
        self.beta0 * libm::pow((k + 1) as f64, -self.gamma)
    }

    /// Sum of squared weights over the retained modes.
    pub fn sum_beta_sq(&self) -> f64 {
        (0..self.n_noise_modes).map(|k| self.beta(k) * self.beta(k)).sum()
    }

    /// Amplitude `sigma_{u_i,k}(u1, u2)` of the configured shape.
    pub fn sigma_coefficient(
        &self,
        equation: Equation,
        k: usize,
        u1: f64,
        u2: f64,
    ) -> Result<f64, Error> {
        if k >= self.n_noise_modes {
            return Err(Error::ModeOutOfRange { index: k, n_noise_modes: self.n_noise_modes });
        }
        let beta = self.beta(k);
        Ok(match self.shape {
            NoiseShape::Linear => {
                beta * match equation {
                    Equation::Predator => u1,
                    Equation::Prey => u2,
                }
            }
            NoiseShape::Coupled => beta * 0.5 * (u1 + u2),
            NoiseShape::AdditiveBounded => beta,
        })
    }
}

/// Upper bound on `zeta(s)` for `s > 1`: partial sum plus integral tail.
fn zeta_upper_bound(s: f64) -> f64 {
    let cut = 64usize;
    let partial: f64 = (1..=cut).map(|k| libm::pow(k as f64, -s)).sum();
    partial + libm::pow(cut as f64, 1.0 - s) / (s - 1.0)
}

/// One batch of Gaussian increments, `N(0, dt)` per (equation, mode).
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrements {
    pub dt: f64,
    pub dw1: Vec<f64>,
    pub dw2: Vec<f64>,
}

impl WienerIncrements {
    pub fn zeros(dt: f64, n_noise_modes: usize) -> Self {
        WienerIncrements { dt, dw1: vec![0.0; n_noise_modes], dw2: vec![0.0; n_noise_modes] }
    }

    pub fn for_equation(&self, equation: Equation) -> &[f64] {
        match equation {
            Equation::Predator => &self.dw1,
            Equation::Prey => &self.dw2,
        }
    }
}

/// Counter-based stream derivation for reproducible parallel sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SeedPolicy {
    pub master_seed: u64,
}

impl SeedPolicy {
    pub fn new(master_seed: u64) -> Self {
        SeedPolicy { master_seed }
    }

    /// Mixes the counters into a stream seed (SplitMix64 over the tuple).
    pub fn stream_seed(&self, trajectory: u64, equation: Equation, mode: u64, step: u64) -> u64 {
        let mut h = self.master_seed;
        for v in [trajectory, equation.index() as u64 + 1, mode, step] {
            h = splitmix64(h ^ splitmix64(v));
        }
        h
    }

    /// Seed for auxiliary draws (initial conditions, sampling checks) kept
    /// disjoint from increment streams by a tag.
    pub fn auxiliary_seed(&self, tag: u64, index: u64) -> u64 {
        let mut h = splitmix64(self.master_seed ^ 0x5851f42d4c957f2d);
        for v in [tag, index] {
            h = splitmix64(h ^ splitmix64(v));
        }
        h
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// One standard-normal draw from the stream of a counter tuple.
fn standard_normal(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StandardNormal.sample(&mut rng)
}

/// Samples the Gaussian increments of one Euler-Maruyama step.
///
/// Deterministic in `(policy, trajectory, step)`; streams for distinct
/// (equation, mode) pairs never overlap.
pub fn sample_increments(
    dt: f64,
    trajectory: u64,
    step: u64,
    policy: &SeedPolicy,
    model: &NoiseModel,
) -> WienerIncrements {
    debug_assert!(dt > 0.0);
    let scale = libm::sqrt(dt);
    let draw = |equation: Equation| -> Vec<f64> {
        (0..model.n_noise_modes)
            .map(|k| scale * standard_normal(policy.stream_seed(trajectory, equation, k as u64, step)))
            .collect()
    };
    WienerIncrements { dt, dw1: draw(Equation::Predator), dw2: draw(Equation::Prey) }
}

/// Projected noise coefficients for one equation: entry `(k, l)` is
/// `(sigma_{u_i,k}(u1^n, u2^n), e_l)` by quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaMatrix {
    pub n_noise_modes: usize,
    pub n_modes: usize,
    /// Row-major over noise modes.
    data: Vec<f64>,
}

impl SigmaMatrix {
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[k * self.n_modes + l]
    }

    /// Applies the map from increments to coefficient updates:
    /// `out_l = sum_k entry(k, l) dw_k`.
    pub fn apply(&self, dw: &[f64]) -> Result<Vec<f64>, Error> {
        if dw.len() != self.n_noise_modes {
            return Err(Error::ShapeMismatch(format!(
                "{} increments for {} noise modes",
                dw.len(),
                self.n_noise_modes
            )));
        }
        let mut out = vec![0.0; self.n_modes];
        for (k, &w) in dw.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = &self.data[k * self.n_modes..(k + 1) * self.n_modes];
            for (o, &e) in out.iter_mut().zip(row) {
                *o += w * e;
            }
        }
        Ok(out)
    }

    /// Squared Hilbert-Schmidt norm `sum_{k,l} entry^2`, i.e. the squared
    /// L2 noise energy of the projected operator.
    pub fn hs_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Projects the pointwise noise amplitudes of both equations onto the basis.
///
/// Every shipped shape is affine in the densities with spatially constant
/// weights, so the L2 projection acts directly on the coefficients; the
/// pseudospectral route (reconstruct, apply, project) reproduces these rows
/// to round-off but costs a quadrature per noise mode, which dominates the
/// time-stepping loop.
pub fn project_noise(
    state: &SpectralState,
    basis: &BasisSet,
    model: &NoiseModel,
) -> Result<[SigmaMatrix; 2], Error> {
    let n = basis.n_modes;
    if state.c1.len() != n || state.c2.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "state has {}/{} coefficients, basis has {n} modes",
            state.c1.len(),
            state.c2.len()
        )));
    }
    // projection of the constant 1 onto the constant mode
    let sqrt_volume = libm::sqrt(basis.domain.volume());
    let build = |equation: Equation| -> SigmaMatrix {
        let mut data = Vec::with_capacity(model.n_noise_modes * n);
        for k in 0..model.n_noise_modes {
            let beta = model.beta(k);
            match model.shape {
                NoiseShape::Linear => {
                    let c = if equation == Equation::Predator { &state.c1 } else { &state.c2 };
                    data.extend(c.iter().map(|&v| beta * v));
                }
                NoiseShape::Coupled => {
                    data.extend(
                        state.c1.iter().zip(&state.c2).map(|(&a, &b)| beta * (a + b) / 2.0),
                    );
                }
                NoiseShape::AdditiveBounded => {
                    data.push(beta * sqrt_volume);
                    data.extend(core::iter::repeat(0.0).take(n - 1));
                }
            }
        }
        SigmaMatrix { n_noise_modes: model.n_noise_modes, n_modes: n, data }
    };
    Ok([build(Equation::Predator), build(Equation::Prey)])
}

/// Verifies the sampled growth and Lipschitz inequalities on random points
/// with the stored `c_sigma`. Returns the worst observed ratios
/// `(growth, lipschitz)`; both must be `<= 1` for an admissible model.
pub fn check_admissibility(model: &NoiseModel, samples: usize, seed: u64) -> (f64, f64) {
    if model.c_sigma == 0.0 {
        return (0.0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = move || {
        let normal: f64 = StandardNormal.sample(&mut rng);
        // map a normal draw into [-10, 10] deterministically
        10.0 * libm::tanh(normal)
    };
    let mut worst_growth: f64 = 0.0;
    let mut worst_lip: f64 = 0.0;
    for _ in 0..samples {
        let (u1, u2) = (uniform(), uniform());
        let (v1, v2) = (uniform(), uniform());
        for eq in Equation::BOTH {
            let mut sum_sq = 0.0;
            let mut diff_sq = 0.0;
            for k in 0..model.n_noise_modes {
                let s = model.sigma_coefficient(eq, k, u1, u2).unwrap();
                let t = model.sigma_coefficient(eq, k, v1, v2).unwrap();
                sum_sq += s * s;
                diff_sq += (s - t) * (s - t);
            }
            let growth = sum_sq / (model.c_sigma * (1.0 + u1 * u1 + u2 * u2));
            worst_growth = worst_growth.max(growth);
            let gap = (u1 - v1) * (u1 - v1) + (u2 - v2) * (u2 - v2);
            if gap > 1e-12 {
                worst_lip = worst_lip.max(diff_sq / (model.c_sigma * gap));
            }
        }
    }
    (worst_growth, worst_lip)
}
