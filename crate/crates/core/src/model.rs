//! Model constants and pointwise nonlinearities.
//!
//! The reaction terms use the sign-extended definitions so that they are
//! globally Lipschitz on all of R^2: the predation/conversion branches are
//! only active where both densities are nonnegative.

use alloc::format;

use crate::error::Error;

/// Physical and model constants of the predator-prey system.
///
/// `m1` and `m2` are the expected L-infinity ceilings for `u1` and `u2`;
/// `m1` doubles as the taxis cutoff check (`chi` vanishes above `u_m`,
/// and the maximum principle needs `m1 >= u_m`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ModelParams {
    /// Predator diffusion coefficient.
    pub d1: f64,
    /// Prey diffusion coefficient.
    pub d2: f64,
    /// Prey-to-predator conversion rate.
    pub e: f64,
    /// Predator decay rate.
    pub a: f64,
    /// Prey natural growth rate.
    pub r: f64,
    /// Carrying capacity.
    pub k: f64,
    /// Predation-rate scale.
    pub p: f64,
    /// Handling-time ratio.
    pub q: f64,
    /// Predator saturation threshold for the taxis sensitivity.
    pub u_m: f64,
    /// Expected L-infinity bound for the predator density.
    pub m1: f64,
    /// Expected L-infinity bound for the prey density.
    pub m2: f64,
}

impl ModelParams {
    /// Default parameter set used by examples and tests.
    pub fn default_set() -> Self {
        ModelParams {
            d1: 0.1,
            d2: 0.1,
            e: 1.0,
            a: 0.25,
            r: 2.0,
            k: 4.0,
            p: 1.0,
            q: 1.0,
            u_m: 2.0,
            m1: 2.0,
            m2: 4.0,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let positive = [
            ("d1", self.d1),
            ("d2", self.d2),
            ("e", self.e),
            ("a", self.a),
            ("r", self.r),
            ("k", self.k),
            ("p", self.p),
            ("u_m", self.u_m),
            ("m2", self.m2),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.q >= 0.0) || !self.q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must be nonnegative, got {}", self.q)));
        }
        if !(self.m1 >= self.u_m) {
            return Err(Error::InvalidParameter(format!(
                "m1 must be >= u_m ({} < {})",
                self.m1, self.u_m
            )));
        }
        Ok(())
    }
}

/// Holling type II predation rate `p u2 / (1 + q u2)`.
///
/// Negative prey densities return 0; the extended reaction terms never
/// evaluate the predation rate there, so the value is not load-bearing.
pub fn predation_rate(u2: f64, params: &ModelParams) -> f64 {
    if u2 < 0.0 {
        0.0
    } else {
        params.p * u2 / (1.0 + params.q * u2)
    }
}

/// Logistic growth `r u2 (1 - u2/K)` of the prey.
pub fn logistic_growth(u2: f64, params: &ModelParams) -> f64 {
    params.r * u2 * (1.0 - u2 / params.k)
}

/// Prey-tactic sensitivity `u1 (u_m - u1)` on `[0, u_m]`, zero outside.
pub fn chi(u1: f64, params: &ModelParams) -> f64 {
    if u1 >= 0.0 && u1 <= params.u_m {
        u1 * (params.u_m - u1)
    } else {
        0.0
    }
}

/// Sign-extended predator reaction term.
pub fn reaction_f1(u1: f64, u2: f64, params: &ModelParams) -> f64 {
    if u1 < 0.0 {
        0.0
    } else if u2 < 0.0 {
        -params.a * u1
    } else {
        params.e * predation_rate(u2, params) * u1 - params.a * u1
    }
}

/// Sign-extended prey reaction term.
pub fn reaction_f2(u1: f64, u2: f64, params: &ModelParams) -> f64 {
    if u2 < 0.0 {
        0.0
    } else if u1 < 0.0 {
        logistic_growth(u2, params)
    } else {
        logistic_growth(u2, params) - predation_rate(u2, params) * u1
    }
}
