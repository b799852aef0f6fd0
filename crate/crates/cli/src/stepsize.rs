//! Step-size selection for the denoising runs.
//!
//! Inputs are the extreme moduli of the two-operator reduction: `alpha`,
//! the smallest data-fit modulus, and `beta < 0`, the aggregated penalty
//! modulus. Both modes return step sizes that the multioperator
//! certificate accepts with uniform weights; callers re-verify through
//! `certify_multi` before running.

use opsplit::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepsizeMode {
    /// `gamma = (alpha - beta)/(eta - 1)`, `delta = eta * gamma`: the
    /// midpoint-style choice inside the per-block validity interval
    /// `[-2 beta/(eta-1), 2 sigma_i/(eta-1)]`.
    Unequal,
    /// `gamma = delta = 1.01 * 2 alpha |beta| / (alpha + beta)`, which
    /// puts every block threshold at `kappa_i^* >= 1 - 1/(2*1.01)`,
    /// just above the implied relaxation `kappa = 1/2`.
    Equal,
}

impl StepsizeMode {
    pub fn name(self) -> &'static str {
        match self {
            StepsizeMode::Unequal => "unequal",
            StepsizeMode::Equal => "equal",
        }
    }
}

/// Returns `(gamma, delta)` for the given mode. Requires
/// `alpha > 0 > beta` and a strictly positive aggregate `alpha + beta`;
/// `eta` only enters in unequal mode and must exceed 1.
pub fn certified_stepsizes(
    alpha: f64,
    beta: f64,
    mode: StepsizeMode,
    eta: f64,
) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha.is_finite() && beta < 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "moduli must satisfy alpha > 0 > beta, got alpha = {alpha}, beta = {beta}"
        )));
    }
    if alpha + beta <= 0.0 {
        return Err(Error::NotCertified(format!(
            "aggregate modulus alpha + beta = {} is not positive; no step size is certified",
            alpha + beta
        )));
    }
    match mode {
        StepsizeMode::Unequal => {
            if !(eta > 1.0 && eta.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "unequal mode needs eta > 1, got {eta}"
                )));
            }
            let gamma = (alpha - beta) / (eta - 1.0);
            Ok((gamma, eta * gamma))
        }
        StepsizeMode::Equal => {
            // beta enters by magnitude: gamma must stay positive, and
            // alpha + beta > 0 makes it so.
            let gamma = 1.01 * 2.0 * alpha * (-beta) / (alpha + beta);
            Ok((gamma, gamma))
        }
    }
}
