//! Adaptive Douglas-Rachford splitting.
//!
//! The two-operator iteration with parameters `(gamma, delta, lambda, mu,
//! kappa)` is
//!
//! ```text
//!     y^k     = J_{gamma A}(x^k)
//!     z^k     = J_{delta B}((1 - lambda) x^k + lambda y^k)
//!     x^{k+1} = x^k + kappa mu (z^k - y^k)
//! ```
//!
//! subject to the coupling `(lambda - 1)(mu - 1) = 1` and
//! `delta = gamma (lambda - 1)`. The module provides:
//!
//! * [`AdrParams`]: the coupled parameter tuple and its dual transform;
//! * [`certify_two_op`] / [`certify_multi`]: convergence certificates for
//!   comonotone moduli, reporting the admissible relaxation bound
//!   `kappa_star` (and the per-block `kappa_i_star` in the weakly
//!   comonotone regime);
//! * [`adr_run`]: the two-operator engine;
//! * [`dual_operators`] / [`primal_dual_replay`]: the dual inclusion whose
//!   iterates replay the primal ones under an explicit change of
//!   variables;
//! * [`build_product_ops`], [`multi_adr_run`],
//!   [`multi_adr_run_switched`]: the product-space reformulation that
//!   solves `0 ∈ A_1(x) + ... + A_m(x)` with one resolvent per operator
//!   per iteration.
//!
//! Certification is advisory: the run functions execute whatever
//! parameters they are given, and callers decide how to treat an
//! uncertified regime.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::operators::{resolvent_of_inverse, ResolventOp};
use std::time::Instant;

/// Tolerance for the algebraic parameter couplings.
pub const PARAM_TOL: f64 = 1e-12;
/// Tie tolerance deciding the equal-moduli certificate branch.
const TIE_TOL: f64 = 1e-12;
/// Iterates beyond this norm abort the run as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;
/// Default relative stopping tolerance for inclusion runs.
pub const DEFAULT_EPS: f64 = 1e-10;
/// Default iteration cap for inclusion runs.
pub const DEFAULT_MAX_ITER: usize = 100_000;

fn near_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// The coupled parameter tuple of the adaptive iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdrParams {
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    pub mu: f64,
    pub kappa: f64,
}

impl AdrParams {
    /// Builds the tuple from `(gamma, lambda, kappa)`; the coupling fixes
    /// `delta = gamma (lambda - 1)` and `mu = lambda / (lambda - 1)`.
    pub fn new(gamma: f64, lambda: f64, kappa: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
        if !(lambda > 1.0 && lambda.is_finite()) {
            return Err(Error::InvalidParams(format!("lambda must exceed 1, got {lambda}")));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::InvalidParams(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        Ok(AdrParams {
            gamma,
            delta: gamma * (lambda - 1.0),
            lambda,
            mu: lambda / (lambda - 1.0),
            kappa,
        })
    }

    /// Builds the tuple from the two step sizes; `lambda = 1 + delta/gamma`
    /// and `mu = 1 + gamma/delta` then satisfy the coupling by
    /// construction.
    pub fn from_stepsizes(gamma: f64, delta: f64, kappa: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite() && delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "step sizes must be positive, got gamma = {gamma}, delta = {delta}"
            )));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::InvalidParams(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        Ok(AdrParams {
            gamma,
            delta,
            lambda: 1.0 + delta / gamma,
            mu: 1.0 + gamma / delta,
            kappa,
        })
    }

    /// The relaxation used by the derived splitting method that makes the
    /// multiplier update explicit: `kappa = (lambda - 1) / lambda`, i.e.
    /// `kappa = delta / (gamma + delta)`.
    pub fn with_special_kappa(gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite() && delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "step sizes must be positive, got gamma = {gamma}, delta = {delta}"
            )));
        }
        Self::from_stepsizes(gamma, delta, delta / (gamma + delta))
    }

    /// Checks positivity and the two coupling identities.
    pub fn validate(&self) -> Result<()> {
        let AdrParams { gamma, delta, lambda, mu, kappa } = *self;
        for (name, v) in [("gamma", gamma), ("delta", delta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda", lambda), ("mu", mu)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must exceed 1, got {v}")));
            }
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::InvalidParams(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        let coupling = (lambda - 1.0) * (mu - 1.0);
        if (coupling - 1.0).abs() > PARAM_TOL {
            return Err(Error::InvalidParams(format!(
                "(lambda - 1)(mu - 1) = {coupling}, expected 1"
            )));
        }
        if !near_rel(delta, gamma * (lambda - 1.0), PARAM_TOL) {
            return Err(Error::InvalidParams(format!(
                "delta = {delta} differs from gamma (lambda - 1) = {}",
                gamma * (lambda - 1.0)
            )));
        }
        Ok(())
    }

    /// Parameters of the dual iteration: `(1/gamma, 1/delta, lambda
    /// gamma/delta, mu delta/gamma, kappa)`. Applying the transform twice
    /// returns the original tuple.
    pub fn dual(&self) -> AdrParams {
        AdrParams {
            gamma: 1.0 / self.gamma,
            delta: 1.0 / self.delta,
            lambda: self.lambda * self.gamma / self.delta,
            mu: self.mu * self.delta / self.gamma,
            kappa: self.kappa,
        }
    }
}

/// Which convergence condition a certificate established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Two operators, moduli summing to zero, `delta = gamma + 2 alpha`.
    TwoOpEqual,
    /// Two operators, moduli summing to a positive value, strict
    /// discriminant inequality.
    TwoOpStrict,
    /// Equal-moduli multioperator branch.
    C1,
    /// Strictly positive aggregate moduli branch.
    C2,
    /// Weakly comonotone last operator, certified through splitting
    /// weights.
    C3,
    /// No condition holds for the supplied parameters.
    Invalid,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Condition::TwoOpEqual => "TwoOpEqual",
            Condition::TwoOpStrict => "TwoOpStrict",
            Condition::C1 => "C1",
            Condition::C2 => "C2",
            Condition::C3 => "C3",
            Condition::Invalid => "INVALID",
        };
        f.write_str(s)
    }
}

/// Outcome of a convergence certification.
///
/// `condition != Invalid` guarantees `kappa_star > 0` and that the
/// supplied `kappa` is strictly below it.
#[derive(Debug, Clone)]
pub struct RegimeCertificate {
    pub condition: Condition,
    /// Strict upper bound on the admissible relaxation `kappa`: 1 in the
    /// equal-moduli and weight-certified branches, the discriminant ratio
    /// in the strict branches.
    pub kappa_star: f64,
    /// Per-block relaxation bounds, present only when splitting weights
    /// entered the certification.
    pub kappa_i_star: Option<Vec<f64>>,
    /// The splitting weights used, when any.
    pub theta: Option<Vec<f64>>,
    /// Whether the side conditions for strong convergence of the shadow
    /// sequence hold.
    pub strong_shadow: bool,
    /// Human-readable notes: violated inequalities for invalid
    /// certificates, the established condition otherwise.
    pub diagnostics: Vec<String>,
}

impl RegimeCertificate {
    pub fn is_certified(&self) -> bool {
        self.condition != Condition::Invalid
    }

    fn invalid(kappa_star: f64, diagnostics: Vec<String>) -> Self {
        RegimeCertificate {
            condition: Condition::Invalid,
            kappa_star,
            kappa_i_star: None,
            theta: None,
            strong_shadow: false,
            diagnostics,
        }
    }
}

/// Certifies the two-operator iteration for an `alpha`-comonotone `A` and
/// `beta`-comonotone `B`.
///
/// `alpha + beta = 0` requires the exact stepsize coupling
/// `delta = gamma + 2 alpha`; `alpha + beta > 0` requires the strict
/// discriminant inequality `(gamma + delta)^2 < 4 (gamma + alpha)(delta +
/// beta)` and reports `kappa_star` as the discriminant ratio. A negative
/// sum of moduli is outside the supported theory and errors.
pub fn certify_two_op(alpha: f64, beta: f64, p: &AdrParams) -> Result<RegimeCertificate> {
    p.validate()?;
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "moduli must be finite, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let s = alpha + beta;
    if s < -TIE_TOL {
        return Err(Error::NotCertified(format!(
            "sum of moduli alpha + beta = {s} is negative; no convergence condition applies"
        )));
    }
    let mut diags = Vec::new();
    if p.gamma + alpha <= 0.0 {
        diags.push(format!("resolvent of A needs gamma + alpha > 0, got {}", p.gamma + alpha));
    }
    if p.delta + beta <= 0.0 {
        diags.push(format!("resolvent of B needs delta + beta > 0, got {}", p.delta + beta));
    }
    if !diags.is_empty() {
        return Ok(RegimeCertificate::invalid(0.0, diags));
    }

    if s.abs() <= TIE_TOL {
        let target = p.gamma + 2.0 * alpha;
        if !near_rel(p.delta, target, PARAM_TOL) {
            diags.push(format!(
                "equal-moduli branch needs delta = gamma + 2 alpha = {target}, got delta = {}",
                p.delta
            ));
            return Ok(RegimeCertificate::invalid(0.0, diags));
        }
        if p.kappa >= 1.0 {
            diags.push("equal-moduli branch needs kappa < 1".into());
            return Ok(RegimeCertificate::invalid(1.0, diags));
        }
        return Ok(RegimeCertificate {
            condition: Condition::TwoOpEqual,
            kappa_star: 1.0,
            kappa_i_star: None,
            theta: None,
            strong_shadow: false,
            diagnostics: vec!["equal-moduli branch with matched step sizes".into()],
        });
    }

    let lhs = (p.gamma + p.delta) * (p.gamma + p.delta);
    let rhs = 4.0 * (p.gamma + alpha) * (p.delta + beta);
    let kappa_star = (rhs - lhs) / (2.0 * (p.gamma + p.delta) * s);
    if lhs >= rhs {
        diags.push(format!(
            "discriminant inequality fails: (gamma + delta)^2 = {lhs} >= 4 (gamma + alpha)(delta + beta) = {rhs}"
        ));
        return Ok(RegimeCertificate::invalid(kappa_star, diags));
    }
    if p.kappa >= kappa_star {
        diags.push(format!("kappa = {} must be below kappa_star = {kappa_star}", p.kappa));
        return Ok(RegimeCertificate::invalid(kappa_star, diags));
    }
    let gamma_eq_delta = near_rel(p.gamma, p.delta, PARAM_TOL)
        && (p.lambda - 2.0).abs() <= PARAM_TOL
        && (p.mu - 2.0).abs() <= PARAM_TOL;
    let strong_shadow = p.kappa < 1.0
        && ((p.gamma + 2.0 * alpha > 0.0 && kappa_star >= 1.0)
            || (gamma_eq_delta && kappa_star > p.kappa));
    Ok(RegimeCertificate {
        condition: Condition::TwoOpStrict,
        kappa_star,
        kappa_i_star: None,
        theta: None,
        strong_shadow,
        diagnostics: vec!["strict discriminant branch".into()],
    })
}

/// How [`default_theta`] constructs splitting weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaStrategy {
    /// `theta_i = m - 1` for every block; feasible exactly when
    /// `sigma_i + (m - 1) sigma_m > 0` for all leading blocks.
    Uniform,
    /// An interior point of the feasibility region, available whenever the
    /// weakly comonotone prerequisites hold.
    Feasible,
}

/// Constructs splitting weights `theta` with `sum 1/theta_i = 1`,
/// `theta_i > 0`, and `sigma_i + sigma_m theta_i > 0`.
pub fn default_theta(sigmas: &[f64], strategy: ThetaStrategy) -> Result<Vec<f64>> {
    let m = sigmas.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 moduli, got {m}")));
    }
    let sigma_m = sigmas[m - 1];
    let lead = &sigmas[..m - 1];
    match strategy {
        ThetaStrategy::Uniform => {
            let t = (m - 1) as f64;
            for (i, &s) in lead.iter().enumerate() {
                if s + t * sigma_m <= 0.0 {
                    return Err(Error::ThetaInfeasible(format!(
                        "uniform weights need sigma_{} + (m-1) sigma_m > 0, got {} + {} = {}",
                        i + 1,
                        s,
                        t * sigma_m,
                        s + t * sigma_m
                    )));
                }
            }
            Ok(vec![t; m - 1])
        }
        ThetaStrategy::Feasible => {
            for (i, &s) in lead.iter().enumerate() {
                if s <= 0.0 {
                    return Err(Error::ThetaInfeasible(format!(
                        "feasible-weight construction needs sigma_{} > 0, got {s}",
                        i + 1
                    )));
                }
            }
            if sigma_m >= 0.0 {
                return Err(Error::ThetaInfeasible(format!(
                    "feasible-weight construction needs sigma_m < 0, got {sigma_m}"
                )));
            }
            let inv_sum: f64 = sigmas.iter().map(|&s| 1.0 / s).sum();
            if inv_sum >= 0.0 {
                return Err(Error::ThetaInfeasible(format!(
                    "feasible-weight construction needs sum of 1/sigma_i < 0, got {inv_sum}"
                )));
            }
            // Reciprocal weights delta_i = |sigma_m|/sigma_i + slack/(m-1)
            // sum to 1 and stay strictly above |sigma_m|/sigma_i, which is
            // exactly the interior of the feasibility region.
            let lead_inv: f64 = lead.iter().map(|&s| 1.0 / s).sum();
            let slack = 1.0 - sigma_m.abs() * lead_inv;
            let share = slack / (m - 1) as f64;
            Ok(lead.iter().map(|&s| 1.0 / (sigma_m.abs() / s + share)).collect())
        }
    }
}

fn check_theta(sigmas: &[f64], theta: &[f64]) -> Result<()> {
    let m = sigmas.len();
    if theta.len() != m - 1 {
        return Err(Error::ThetaInfeasible(format!(
            "need {} weights for {m} operators, got {}",
            m - 1,
            theta.len()
        )));
    }
    let sigma_m = sigmas[m - 1];
    let mut inv_sum = 0.0;
    for (i, (&t, &s)) in theta.iter().zip(sigmas.iter()).enumerate() {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::ThetaInfeasible(format!("theta_{} = {t} must be positive", i + 1)));
        }
        if s + sigma_m * t <= 0.0 {
            return Err(Error::ThetaInfeasible(format!(
                "weight feasibility needs sigma_{} + sigma_m theta_{} > 0, got {}",
                i + 1,
                i + 1,
                s + sigma_m * t
            )));
        }
        inv_sum += 1.0 / t;
    }
    if (inv_sum - 1.0).abs() > 1e-9 {
        return Err(Error::ThetaInfeasible(format!(
            "weights must satisfy sum of 1/theta_i = 1, got {inv_sum}"
        )));
    }
    Ok(())
}

/// The weight-certified branch shared by explicit and derived weights.
/// `theta` must already be feasible.
fn certify_c3(
    sigmas: &[f64],
    p: &AdrParams,
    theta: Vec<f64>,
    mut diags: Vec<String>,
) -> RegimeCertificate {
    let m = sigmas.len();
    let sigma_m = sigmas[m - 1];
    let lead = &sigmas[..m - 1];
    let mut ok = true;
    for (i, &s) in lead.iter().enumerate() {
        if s <= 0.0 {
            diags.push(format!("weight-certified branch needs sigma_{} > 0, got {s}", i + 1));
            ok = false;
        }
    }
    if sigma_m >= 0.0 {
        diags.push(format!("weight-certified branch needs sigma_m < 0, got {sigma_m}"));
        ok = false;
    }
    let inv_sum: f64 = sigmas.iter().map(|&s| 1.0 / s).sum();
    if ok && inv_sum >= 0.0 {
        diags.push(format!(
            "weight-certified branch needs sum of 1/sigma_i < 0, got {inv_sum}"
        ));
        ok = false;
    }
    if !ok {
        return RegimeCertificate::invalid(0.0, diags);
    }

    let kappa_i: Vec<f64> = lead
        .iter()
        .zip(theta.iter())
        .map(|(&s, &t)| {
            let num = 4.0 * (p.gamma + s) * (p.delta + sigma_m * t)
                - (p.gamma + p.delta) * (p.gamma + p.delta);
            num / (2.0 * (p.gamma + p.delta) * (s + sigma_m * t))
        })
        .collect();
    let min_ki = kappa_i.iter().cloned().fold(f64::INFINITY, f64::min);

    let gamma_eq_delta = near_rel(p.gamma, p.delta, PARAM_TOL)
        && (p.lambda - 2.0).abs() <= PARAM_TOL
        && (p.mu - 2.0).abs() <= PARAM_TOL;
    let case_a = min_ki >= 1.0;
    let case_b = gamma_eq_delta && min_ki > p.kappa;
    if p.kappa >= 1.0 {
        diags.push("weight-certified branch needs kappa < 1".into());
    } else if case_a || case_b {
        return RegimeCertificate {
            condition: Condition::C3,
            kappa_star: 1.0,
            kappa_i_star: Some(kappa_i),
            theta: Some(theta),
            strong_shadow: true,
            diagnostics: vec![if case_a {
                format!("weight-certified branch (a): min kappa_i_star = {min_ki} >= 1")
            } else {
                format!("weight-certified branch (b): min kappa_i_star = {min_ki} > kappa")
            }],
        };
    } else {
        diags.push(format!(
            "neither sub-condition holds: min kappa_i_star = {min_ki} < 1 and the equal-stepsize relaxation bound is not met"
        ));
    }
    RegimeCertificate {
        kappa_i_star: Some(kappa_i),
        theta: Some(theta),
        ..RegimeCertificate::invalid(0.0, diags)
    }
}

/// Certifies the product-space iteration for `m` operators with
/// comonotonicity moduli `sigmas` (the last entry is the averaged block).
///
/// With explicit weights `theta` only the weight-certified branch is
/// examined; otherwise the equal-moduli branch, the strict branch, and
/// finally the weight-certified branch with derived weights are tried in
/// order. Ties between the first two at `sigma_min + (m-1) sigma_m = 0`
/// resolve to the equal-moduli branch.
pub fn certify_multi(
    sigmas: &[f64],
    p: &AdrParams,
    theta: Option<&[f64]>,
) -> Result<RegimeCertificate> {
    p.validate()?;
    let m = sigmas.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 moduli, got {m}")));
    }
    if sigmas.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("moduli must be finite".into()));
    }
    let sigma_m = sigmas[m - 1];
    let lead = &sigmas[..m - 1];
    let sig_min = lead.iter().cloned().fold(f64::INFINITY, f64::min);
    let bsum = (m - 1) as f64 * sigma_m;

    let mut diags = Vec::new();
    for (i, &s) in lead.iter().enumerate() {
        if p.gamma + s <= 0.0 {
            diags.push(format!(
                "resolvent of operator {} needs gamma + sigma > 0, got {}",
                i + 1,
                p.gamma + s
            ));
        }
    }
    if p.delta / (m - 1) as f64 + sigma_m <= 0.0 {
        diags.push(format!(
            "averaged-block resolvent needs delta/(m-1) + sigma_m > 0, got {}",
            p.delta / (m - 1) as f64 + sigma_m
        ));
    }
    if !diags.is_empty() {
        return Ok(RegimeCertificate::invalid(0.0, diags));
    }

    if let Some(t) = theta {
        check_theta(sigmas, t)?;
        return Ok(certify_c3(sigmas, p, t.to_vec(), diags));
    }

    // Equal-moduli branch.
    if (sig_min + bsum).abs() <= TIE_TOL && sig_min >= -TIE_TOL {
        let target = p.gamma + 2.0 * sig_min;
        if near_rel(p.delta, target, PARAM_TOL) {
            if p.kappa < 1.0 {
                return Ok(RegimeCertificate {
                    condition: Condition::C1,
                    kappa_star: 1.0,
                    kappa_i_star: None,
                    theta: None,
                    strong_shadow: false,
                    diagnostics: vec!["equal-moduli branch with matched step sizes".into()],
                });
            }
            diags.push("equal-moduli branch needs kappa < 1".into());
        } else {
            diags.push(format!(
                "equal-moduli branch needs delta = gamma + 2 min(sigma) = {target}, got delta = {}",
                p.delta
            ));
        }
    }

    // Strict branch.
    let mut c2_kappa_star = None;
    if sig_min + bsum > TIE_TOL && sigma_m <= TIE_TOL && sig_min > 0.0 {
        let lhs = (p.gamma + p.delta) * (p.gamma + p.delta);
        let rhs = 4.0 * (p.gamma + sig_min) * (p.delta + bsum);
        let ks = (rhs - lhs) / (2.0 * (p.gamma + p.delta) * (sig_min + bsum));
        c2_kappa_star = Some(ks);
        if lhs < rhs && p.kappa < ks {
            return Ok(RegimeCertificate {
                condition: Condition::C2,
                kappa_star: ks,
                kappa_i_star: None,
                theta: None,
                strong_shadow: sigma_m.abs() <= TIE_TOL && p.kappa < 1.0,
                diagnostics: vec!["strict discriminant branch".into()],
            });
        }
        if lhs >= rhs {
            diags.push(format!(
                "discriminant inequality fails: (gamma + delta)^2 = {lhs} >= {rhs}"
            ));
        } else {
            diags.push(format!("kappa = {} must be below kappa_star = {ks}", p.kappa));
        }
    }

    // Weight-certified branch with derived weights.
    let c3_ready =
        lead.iter().all(|&s| s > 0.0) && sigma_m < 0.0 && sigmas.iter().map(|&s| 1.0 / s).sum::<f64>() < 0.0;
    if c3_ready {
        let derived = default_theta(sigmas, ThetaStrategy::Uniform)
            .or_else(|_| default_theta(sigmas, ThetaStrategy::Feasible));
        match derived {
            Ok(t) => {
                let cert = certify_c3(sigmas, p, t, diags.clone());
                if cert.is_certified() {
                    return Ok(cert);
                }
                diags = cert.diagnostics;
            }
            Err(e) => diags.push(e.to_string()),
        }
    } else {
        diags.push(
            "weight-certified branch needs positive leading moduli, a negative last modulus, \
             and a negative sum of reciprocal moduli"
                .into(),
        );
    }

    Ok(RegimeCertificate::invalid(c2_kappa_star.unwrap_or(0.0), diags))
}

/// Iterate history of a two-operator run.
///
/// `xs` holds `x^0 .. x^K`; `ys`, `zs`, and `step_norms` hold one entry
/// per completed iteration.
#[derive(Debug, Clone)]
pub struct AdrTrace {
    pub xs: Vec<Vector>,
    pub ys: Vec<Vector>,
    pub zs: Vec<Vector>,
    pub step_norms: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl AdrTrace {
    pub fn final_x(&self) -> &Vector {
        self.xs.last().expect("trace holds at least the initial point")
    }

    /// Last shadow point `y = J_{gamma A}(x)`.
    pub fn final_y(&self) -> Option<&Vector> {
        self.ys.last()
    }

    pub fn final_z(&self) -> Option<&Vector> {
        self.zs.last()
    }
}

/// Runs the two-operator iteration from `x0`.
///
/// Stops when `||x^{k+1} - x^k|| <= eps (1 + ||x^k||)` or after
/// `max_iter` iterations; errors out if the iterates exceed
/// [`DIVERGENCE_NORM`]. Resolvent failures carry the iteration index.
pub fn adr_run(
    a: &ResolventOp,
    b: &ResolventOp,
    p: &AdrParams,
    x0: &Vector,
    max_iter: usize,
    eps: f64,
) -> Result<AdrTrace> {
    p.validate()?;
    if a.dim() != b.dim() || a.dim() != x0.len() {
        return Err(Error::DimensionMismatch(format!(
            "operators of dim {} and {} with start of length {}",
            a.dim(),
            b.dim(),
            x0.len()
        )));
    }
    let mut trace = AdrTrace {
        xs: vec![x0.clone()],
        ys: Vec::new(),
        zs: Vec::new(),
        step_norms: Vec::new(),
        iterations: 0,
        converged: false,
    };
    let mut x = x0.clone();
    for k in 0..max_iter {
        let y = a.resolve(p.gamma, &x).map_err(|e| Error::at_iteration(k, e))?;
        let arg = &x * (1.0 - p.lambda) + &y * p.lambda;
        let z = b.resolve(p.delta, &arg).map_err(|e| Error::at_iteration(k, e))?;
        let xn = &x + (&z - &y) * (p.kappa * p.mu);
        let step = (&xn - &x).norm();
        trace.ys.push(y);
        trace.zs.push(z);
        trace.step_norms.push(step);
        trace.iterations = k + 1;
        if xn.norm() > DIVERGENCE_NORM {
            return Err(Error::Diverged(format!(
                "iterate norm {:.3e} exceeded {DIVERGENCE_NORM:.0e} at iteration {k}",
                xn.norm()
            )));
        }
        let stop = step <= eps * (1.0 + x.norm());
        trace.xs.push(xn.clone());
        x = xn;
        if stop {
            trace.converged = true;
            break;
        }
    }
    Ok(trace)
}

/// Builds resolvent evaluators for the dual pair: `A' = -A^{-1}(-Id)` and
/// `B' = B^{-1}`, each expressed through the primal resolvents only.
///
/// Comonotonicity and monotonicity moduli swap roles under inversion, so
/// the returned operators carry the swapped metadata.
pub fn dual_operators(a: &ResolventOp, b: &ResolventOp) -> (ResolventOp, ResolventOp) {
    let a_inner = a.clone();
    let a_valid = a.clone();
    let mut a_dual = ResolventOp::new(a.dim(), move |g: f64, u: &Vector| {
        let inner = a_inner.resolve(1.0 / g, &(u * (-1.0 / g)))?;
        Ok(u + inner * g)
    })
    .with_valid_gamma(move |g| g > 0.0 && g.is_finite() && a_valid.valid_gamma(1.0 / g));
    if let Some(s) = a.rho() {
        a_dual = a_dual.with_sigma(s);
    }
    if let Some(r) = a.sigma() {
        a_dual = a_dual.with_rho(r);
    }

    let b_inner = b.clone();
    let b_valid = b.clone();
    let mut b_dual = ResolventOp::new(b.dim(), move |g: f64, u: &Vector| {
        resolvent_of_inverse(&b_inner, g, u)
    })
    .with_valid_gamma(move |g| g > 0.0 && g.is_finite() && b_valid.valid_gamma(1.0 / g));
    if let Some(s) = b.rho() {
        b_dual = b_dual.with_sigma(s);
    }
    if let Some(r) = b.sigma() {
        b_dual = b_dual.with_rho(r);
    }
    (a_dual, b_dual)
}

/// Runs the primal and the dual iterations side by side for `iters` steps
/// and returns the largest deviation in the three change-of-variable
/// identities
///
/// ```text
///     x^k = -u^k / gamma'
///     y^k = (v^k - u^k) / gamma'
///     z^k = ((1 - lambda') u^k + lambda' v^k - w^k) / delta'
/// ```
///
/// with the dual started at `u^0 = -x^0 / gamma`.
pub fn primal_dual_replay(
    a: &ResolventOp,
    b: &ResolventOp,
    p: &AdrParams,
    x0: &Vector,
    iters: usize,
) -> Result<f64> {
    p.validate()?;
    let pd = p.dual();
    let (ad, bd) = dual_operators(a, b);
    let mut x = x0.clone();
    let mut u = x0 * (-1.0 / p.gamma);
    let mut max_dev: f64 = (&x + &u * (1.0 / pd.gamma)).norm();
    for k in 0..iters {
        let y = a.resolve(p.gamma, &x).map_err(|e| Error::at_iteration(k, e))?;
        let z = b
            .resolve(p.delta, &(&x * (1.0 - p.lambda) + &y * p.lambda))
            .map_err(|e| Error::at_iteration(k, e))?;
        let v = ad.resolve(pd.gamma, &u).map_err(|e| Error::at_iteration(k, e))?;
        let w = bd
            .resolve(pd.delta, &(&u * (1.0 - pd.lambda) + &v * pd.lambda))
            .map_err(|e| Error::at_iteration(k, e))?;

        let dev_y = (&y - (&v - &u) * (1.0 / pd.gamma)).norm();
        let dev_z =
            (&z - (&u * (1.0 - pd.lambda) + &v * pd.lambda - &w) * (1.0 / pd.delta)).norm();
        x += (&z - &y) * (p.kappa * p.mu);
        u += (&w - &v) * (pd.kappa * pd.mu);
        let dev_x = (&x + &u * (1.0 / pd.gamma)).norm();
        max_dev = max_dev.max(dev_x).max(dev_y).max(dev_z);
    }
    Ok(max_dev)
}

fn common_dim(ops: &[ResolventOp]) -> Result<usize> {
    let m = ops.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 operators, got {m}")));
    }
    let d = ops[0].dim();
    if ops.iter().any(|o| o.dim() != d) {
        return Err(Error::DimensionMismatch(
            "all operators must act on the same space".into(),
        ));
    }
    Ok(d)
}

/// Assembles the product-space pair for `0 ∈ A_1(x) + ... + A_m(x)`: the
/// blockwise operator applies `J_{gamma A_i}` to each of the `m - 1`
/// copies, and the averaging operator applies `J_{(delta/(m-1)) A_m}` to
/// the block mean and replicates the result.
pub fn build_product_ops(
    ops: &[ResolventOp],
    gamma: f64,
    delta: f64,
) -> Result<(ResolventOp, ResolventOp)> {
    let d = common_dim(ops)?;
    let m = ops.len();
    for (i, op) in ops[..m - 1].iter().enumerate() {
        if !op.valid_gamma(gamma) {
            return Err(Error::InvalidParams(format!(
                "operator {} does not admit step size {gamma}",
                i + 1
            )));
        }
    }
    if !ops[m - 1].valid_gamma(delta / (m - 1) as f64) {
        return Err(Error::InvalidParams(format!(
            "last operator does not admit step size {}",
            delta / (m - 1) as f64
        )));
    }

    let blocks: Vec<ResolventOp> = ops[..m - 1].to_vec();
    let mut f = ResolventOp::new(d * (m - 1), move |g: f64, x: &Vector| {
        let mut out = Vector::zeros(x.len());
        for (i, op) in blocks.iter().enumerate() {
            let piece = op.resolve(g, &x.rows(i * d, d).into_owned())?;
            out.rows_mut(i * d, d).copy_from(&piece);
        }
        Ok(out)
    });
    if let Some(s) = ops[..m - 1].iter().map(|o| o.sigma()).try_fold(f64::INFINITY, |acc, s| {
        s.map(|v| acc.min(v))
    }) {
        f = f.with_sigma(s);
    }

    let last = ops[m - 1].clone();
    let copies = m - 1;
    let mut g_op = ResolventOp::new(d * copies, move |g: f64, x: &Vector| {
        let mut mean = Vector::zeros(d);
        for i in 0..copies {
            mean += x.rows(i * d, d);
        }
        mean /= copies as f64;
        let u = last.resolve(g / copies as f64, &mean)?;
        let mut out = Vector::zeros(x.len());
        for i in 0..copies {
            out.rows_mut(i * d, d).copy_from(&u);
        }
        Ok(out)
    });
    if let Some(s) = ops[m - 1].sigma() {
        g_op = g_op.with_sigma((m - 1) as f64 * s);
    }
    Ok((f, g_op))
}

/// Iterate history of a product-space run on `m` operators.
///
/// `xs` holds the block iterates `x^0 .. x^K` (each entry is `m - 1`
/// vectors); `ys` holds the per-block images of the leading operators'
/// resolvents; `zs` holds the shared image of the averaged last operator,
/// which is the shadow sequence converging to the solution.
#[derive(Debug, Clone)]
pub struct MultiTrace {
    pub xs: Vec<Vec<Vector>>,
    pub ys: Vec<Vec<Vector>>,
    pub zs: Vec<Vector>,
    pub step_norms: Vec<f64>,
    pub elapsed_ms: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl MultiTrace {
    pub fn final_x(&self) -> &[Vector] {
        self.xs.last().expect("trace holds at least the initial point")
    }

    /// Latest shadow point: the shared resolvent image of the averaged
    /// last operator.
    pub fn shadow(&self) -> Option<&Vector> {
        self.zs.last()
    }
}

fn product_norm(blocks: &[Vector]) -> f64 {
    blocks.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

fn check_multi_inputs(ops: &[ResolventOp], x0: &[Vector]) -> Result<usize> {
    let d = common_dim(ops)?;
    if x0.len() != ops.len() - 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected {} start blocks, got {}",
            ops.len() - 1,
            x0.len()
        )));
    }
    if x0.iter().any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch("start block dimension mismatch".into()));
    }
    Ok(d)
}

/// Product-space run, blockwise resolvents first:
///
/// ```text
///     y_i^k   = J_{gamma A_i}(x_i^k)
///     z^k     = J_{(delta/(m-1)) A_m}( mean_i ((1 - lambda) x_i^k + lambda y_i^k) )
///     x_i^{k+1} = x_i^k + kappa mu (z^k - y_i^k)
/// ```
pub fn multi_adr_run(
    ops: &[ResolventOp],
    p: &AdrParams,
    x0: &[Vector],
    max_iter: usize,
    eps: f64,
) -> Result<MultiTrace> {
    p.validate()?;
    check_multi_inputs(ops, x0)?;
    let m = ops.len();
    let copies = m - 1;
    let delta_block = p.delta / copies as f64;

    let mut trace = MultiTrace {
        xs: vec![x0.to_vec()],
        ys: Vec::new(),
        zs: Vec::new(),
        step_norms: Vec::new(),
        elapsed_ms: Vec::new(),
        iterations: 0,
        converged: false,
    };
    let mut x: Vec<Vector> = x0.to_vec();
    for k in 0..max_iter {
        let tick = Instant::now();
        let mut ys = Vec::with_capacity(copies);
        for (i, xi) in x.iter().enumerate() {
            ys.push(ops[i].resolve(p.gamma, xi).map_err(|e| Error::at_iteration(k, e))?);
        }
        let mut avg = Vector::zeros(ys[0].len());
        for (xi, yi) in x.iter().zip(ys.iter()) {
            avg += xi * (1.0 - p.lambda) + yi * p.lambda;
        }
        avg /= copies as f64;
        let z = ops[m - 1]
            .resolve(delta_block, &avg)
            .map_err(|e| Error::at_iteration(k, e))?;

        let mut step_sq = 0.0;
        let prev_norm = product_norm(&x);
        for (xi, yi) in x.iter_mut().zip(ys.iter()) {
            let xn = &*xi + (&z - yi) * (p.kappa * p.mu);
            step_sq += (&xn - &*xi).norm_squared();
            *xi = xn;
        }
        let step = step_sq.sqrt();
        trace.ys.push(ys);
        trace.zs.push(z);
        trace.step_norms.push(step);
        trace.elapsed_ms.push(tick.elapsed().as_secs_f64() * 1e3);
        trace.iterations = k + 1;
        if product_norm(&x) > DIVERGENCE_NORM {
            return Err(Error::Diverged(format!(
                "iterate norm {:.3e} exceeded {DIVERGENCE_NORM:.0e} at iteration {k}",
                product_norm(&x)
            )));
        }
        trace.xs.push(x.clone());
        if step <= eps * (1.0 + prev_norm) {
            trace.converged = true;
            break;
        }
    }
    Ok(trace)
}

/// Product-space run with the averaged operator applied first, the order
/// under which the multiplier-method derivation proceeds:
///
/// ```text
///     z^k     = J_{(delta/(m-1)) A_m}( mean_i x_i^k )
///     y_i^k   = J_{gamma A_i}((1 - mu) x_i^k + mu z^k)
///     x_i^{k+1} = x_i^k + kappa lambda (y_i^k - z^k)
/// ```
///
/// The shadow sequence is again `z^k` (stored in `zs`); `ys` holds the
/// second-stage per-block images.
pub fn multi_adr_run_switched(
    ops: &[ResolventOp],
    p: &AdrParams,
    x0: &[Vector],
    max_iter: usize,
    eps: f64,
) -> Result<MultiTrace> {
    p.validate()?;
    check_multi_inputs(ops, x0)?;
    let m = ops.len();
    let copies = m - 1;
    let delta_block = p.delta / copies as f64;

    let mut trace = MultiTrace {
        xs: vec![x0.to_vec()],
        ys: Vec::new(),
        zs: Vec::new(),
        step_norms: Vec::new(),
        elapsed_ms: Vec::new(),
        iterations: 0,
        converged: false,
    };
    let mut x: Vec<Vector> = x0.to_vec();
    for k in 0..max_iter {
        let tick = Instant::now();
        let mut mean = Vector::zeros(x[0].len());
        for xi in x.iter() {
            mean += xi;
        }
        mean /= copies as f64;
        let z = ops[m - 1]
            .resolve(delta_block, &mean)
            .map_err(|e| Error::at_iteration(k, e))?;
        let mut ys = Vec::with_capacity(copies);
        for (i, xi) in x.iter().enumerate() {
            let arg = xi * (1.0 - p.mu) + &z * p.mu;
            ys.push(ops[i].resolve(p.gamma, &arg).map_err(|e| Error::at_iteration(k, e))?);
        }

        let mut step_sq = 0.0;
        let prev_norm = product_norm(&x);
        for (xi, yi) in x.iter_mut().zip(ys.iter()) {
            let xn = &*xi + (yi - &z) * (p.kappa * p.lambda);
            step_sq += (&xn - &*xi).norm_squared();
            *xi = xn;
        }
        let step = step_sq.sqrt();
        trace.ys.push(ys);
        trace.zs.push(z);
        trace.step_norms.push(step);
        trace.elapsed_ms.push(tick.elapsed().as_secs_f64() * 1e3);
        trace.iterations = k + 1;
        if product_norm(&x) > DIVERGENCE_NORM {
            return Err(Error::Diverged(format!(
                "iterate norm {:.3e} exceeded {DIVERGENCE_NORM:.0e} at iteration {k}",
                product_norm(&x)
            )));
        }
        trace.xs.push(x.clone());
        if step <= eps * (1.0 + prev_norm) {
            trace.converged = true;
            break;
        }
    }
    Ok(trace)
}

/// Operationalized tail-rate check for `o(1/sqrt(k))` step decay: over
/// the second half of the run, `sqrt(k) * ||x^{k+1} - x^k||` must not
/// grow, comparing the maxima of the two halves of that tail with 10%
/// slack.
pub fn tail_rate_ok(step_norms: &[f64]) -> bool {
    let n = step_norms.len();
    if n < 8 {
        return true;
    }
    let tail: Vec<f64> = (n / 2..n).map(|k| ((k + 1) as f64).sqrt() * step_norms[k]).collect();
    let mid = tail.len() / 2;
    let first = tail[..mid].iter().cloned().fold(0.0_f64, f64::max);
    let second = tail[mid..].iter().cloned().fold(0.0_f64, f64::max);
    second <= 1.1 * first + 1e-300
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::operators::{resolvent_affine, AffineOperator};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng) -> AdrParams {
        let gamma = rng.random_range(0.2..3.0);
        let lambda = rng.random_range(1.1..4.0);
        let kappa = rng.random_range(0.05..1.0);
        AdrParams::new(gamma, lambda, kappa).unwrap()
    }

    #[test]
    fn params_construction_examples() {
        let p = AdrParams::new(1.0, 2.0, 0.5).unwrap();
        assert_eq!((p.gamma, p.delta, p.lambda, p.mu, p.kappa), (1.0, 1.0, 2.0, 2.0, 0.5));

        let p = AdrParams::new(2.0, 1.5, 0.9).unwrap();
        assert_abs_diff_eq!(p.delta, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.mu, 3.0, epsilon = 1e-15);
        p.validate().unwrap();

        assert!(AdrParams::new(1.0, 1.0, 0.5).is_err());
        assert!(AdrParams::new(-1.0, 2.0, 0.5).is_err());
        assert!(AdrParams::new(1.0, 2.0, 0.0).is_err());

        let q = AdrParams::from_stepsizes(2.0, 1.0, 0.9).unwrap();
        assert_abs_diff_eq!(q.lambda, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q.mu, 3.0, epsilon = 1e-15);

        // kappa = (lambda - 1)/lambda = delta/(gamma + delta).
        let s = AdrParams::with_special_kappa(1.0, 3.0).unwrap();
        assert_abs_diff_eq!(s.kappa, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(s.kappa, (s.lambda - 1.0) / s.lambda, epsilon = 1e-15);
    }

    #[test]
    fn params_dual_examples_and_involution() {
        let p = AdrParams::new(1.0, 2.0, 0.3).unwrap();
        let d = p.dual();
        assert_eq!((d.gamma, d.delta, d.lambda, d.mu), (1.0, 1.0, 2.0, 2.0));

        let p = AdrParams::from_stepsizes(2.0, 1.0, 0.9).unwrap();
        let d = p.dual();
        assert_abs_diff_eq!(d.gamma, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.delta, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.lambda, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.mu, 1.5, epsilon = 1e-15);
        d.validate().unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..100 {
            let p = random_params(&mut rng);
            let d = p.dual();
            d.validate().unwrap();
            // Coupling identities of the transformed tuple.
            assert!(((d.lambda - 1.0) * (d.mu - 1.0) - 1.0).abs() <= 1e-12);
            assert!((d.delta - d.gamma * (d.lambda - 1.0)).abs() <= 1e-12 * d.delta.max(1.0));
            // Involution.
            let dd = d.dual();
            assert!((dd.gamma - p.gamma).abs() <= 1e-14 * p.gamma.max(1.0));
            assert!((dd.delta - p.delta).abs() <= 1e-14 * p.delta.max(1.0));
            assert!((dd.lambda - p.lambda).abs() <= 1e-14 * p.lambda);
            assert!((dd.mu - p.mu).abs() <= 1e-14 * p.mu);
        }
    }

    #[test]
    fn certify_two_op_worked_examples() {
        let p = AdrParams::new(1.0, 2.0, 0.5).unwrap();

        let c = certify_two_op(0.0, 0.0, &p).unwrap();
        assert_eq!(c.condition, Condition::TwoOpEqual);
        assert_eq!(c.kappa_star, 1.0);
        assert!(!c.strong_shadow);

        let c = certify_two_op(1.0, 0.0, &p).unwrap();
        assert_eq!(c.condition, Condition::TwoOpStrict);
        assert_abs_diff_eq!(c.kappa_star, 1.0, epsilon = 1e-12);
        // gamma + 2 alpha = 3 > 0 and kappa_star >= 1.
        assert!(c.strong_shadow);

        let c = certify_two_op(1.0, -0.5, &p).unwrap();
        assert_eq!(c.condition, Condition::Invalid);
        assert_abs_diff_eq!(c.kappa_star, 0.0, epsilon = 1e-12);
        assert!(!c.diagnostics.is_empty());

        match certify_two_op(-0.5, 0.2, &p) {
            Err(Error::NotCertified(_)) => {}
            other => panic!("expected NotCertified, got {other:?}"),
        }

        // Equal-moduli branch with nonzero alpha: delta = gamma + 2 alpha.
        let p2 = AdrParams::from_stepsizes(1.0, 2.0, 0.5).unwrap();
        let c = certify_two_op(0.5, -0.5, &p2).unwrap();
        assert_eq!(c.condition, Condition::TwoOpEqual);

        // Same moduli with mismatched stepsizes fail.
        let c = certify_two_op(0.5, -0.5, &p).unwrap();
        assert_eq!(c.condition, Condition::Invalid);
    }

    #[test]
    fn certify_multi_worked_examples() {
        let p1 = AdrParams::new(1.0, 2.0, 0.5).unwrap();
        let c = certify_multi(&[0.0, 0.0, 0.0], &p1, None).unwrap();
        assert_eq!(c.condition, Condition::C1);
        assert_eq!(c.kappa_star, 1.0);

        let c = certify_multi(&[1.0, 1.0, 0.0], &p1, None).unwrap();
        assert_eq!(c.condition, Condition::C2);
        assert_abs_diff_eq!(c.kappa_star, 1.0, epsilon = 1e-12);
        assert!(c.strong_shadow);

        let p3 = AdrParams::new(8.0, 2.0, 0.5).unwrap();
        let c = certify_multi(&[2.0, 2.0, -0.5], &p3, Some(&[2.0, 2.0])).unwrap();
        assert_eq!(c.condition, Condition::C3);
        assert_eq!(c.kappa_star, 1.0);
        let ki = c.kappa_i_star.unwrap();
        assert_eq!(ki.len(), 2);
        for &k in &ki {
            assert_abs_diff_eq!(k, 0.75, epsilon = 1e-12);
            // Equal-stepsize simplification of the same quantity.
            let simplified = 1.0 + (2.0 * (-0.5) * 2.0) / (8.0 * (2.0 + (-0.5) * 2.0));
            assert_abs_diff_eq!(k, simplified, epsilon = 1e-12);
        }
        assert!(c.strong_shadow);
    }

    #[test]
    fn certify_multi_classification_edges() {
        // Tie sigma_min + (m-1) sigma_m = 0 resolves to the equal-moduli
        // branch when the stepsizes match it.
        let p = AdrParams::from_stepsizes(1.0, 2.0, 0.5).unwrap();
        let c = certify_multi(&[0.5, 1.0, -0.25], &p, None).unwrap();
        assert_eq!(c.condition, Condition::C1);

        // Same moduli with unmatched stepsizes: the derived weights do
        // not certify at these parameters either, so the result is
        // invalid.
        let p2 = AdrParams::new(1.0, 2.0, 0.5).unwrap();
        let c = certify_multi(&[0.5, 1.0, -0.25], &p2, None).unwrap();
        assert_eq!(c.condition, Condition::Invalid);

        // Explicit infeasible weights are an error, not an invalid
        // certificate.
        let p3 = AdrParams::new(8.0, 2.0, 0.5).unwrap();
        match certify_multi(&[2.0, 2.0, -2.0], &p3, Some(&[2.0, 2.0])) {
            Err(Error::ThetaInfeasible(_)) => {}
            other => panic!("expected ThetaInfeasible, got {other:?}"),
        }

        // Without explicit weights the same instance already satisfies
        // the strict branch: min(sigma) = 2 exceeds -(m-1) sigma_m = 1
        // and the discriminant holds.
        let c = certify_multi(&[2.0, 2.0, -0.5], &p3, None).unwrap();
        assert_eq!(c.condition, Condition::C2);
        assert_abs_diff_eq!(c.kappa_star, 0.75, epsilon = 1e-12);
        // Strong shadow convergence in the strict branch needs
        // sigma_m = 0.
        assert!(!c.strong_shadow);

        // Weight branch reached through derived weights when the strict
        // branch cannot apply: min(sigma) = 0.3 is below
        // -(m-1) sigma_m = 0.4, but the reciprocal moduli still sum to a
        // negative value.
        let p5 = AdrParams::new(100.0, 2.0, 0.5).unwrap();
        let c = certify_multi(&[0.3, 5.0, -0.2], &p5, None).unwrap();
        assert_eq!(c.condition, Condition::C3);
        assert_eq!(c.kappa_star, 1.0);
        let theta = c.theta.clone().unwrap();
        check_theta(&[0.3, 5.0, -0.2], &theta).unwrap();
        for k in c.kappa_i_star.unwrap() {
            assert!(k > 0.98 && k < 0.99, "kappa_i_star = {k}");
        }
        assert!(c.strong_shadow);

        // kappa above the strict bound: invalid with the bound reported.
        let p4 = AdrParams::new(1.0, 2.0, 1.0).unwrap();
        let c = certify_multi(&[1.0, 1.0, 0.0], &p4, None).unwrap();
        assert_eq!(c.condition, Condition::Invalid);
        assert_abs_diff_eq!(c.kappa_star, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn default_theta_examples() {
        let t = default_theta(&[2.0, 2.0, -0.5], ThetaStrategy::Uniform).unwrap();
        assert_eq!(t, vec![2.0, 2.0]);

        let t = default_theta(&[3.0, 1.2, -0.5], ThetaStrategy::Uniform).unwrap();
        assert_eq!(t, vec![2.0, 2.0]);

        let t = default_theta(&[1.0, 0.0], ThetaStrategy::Uniform).unwrap();
        assert_eq!(t, vec![1.0]);

        // Uniform infeasible, interior-point construction still works.
        assert!(default_theta(&[0.3, 5.0, -0.2], ThetaStrategy::Uniform).is_err());
        let t = default_theta(&[0.3, 5.0, -0.2], ThetaStrategy::Feasible).unwrap();
        check_theta(&[0.3, 5.0, -0.2], &t).unwrap();

        // The interior-point construction matches the uniform weights on
        // the symmetric example.
        let t = default_theta(&[2.0, 2.0, -0.5], ThetaStrategy::Feasible).unwrap();
        check_theta(&[2.0, 2.0, -0.5], &t).unwrap();
        for v in t {
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn adr_run_zero_operators_terminate_immediately() {
        let a = ResolventOp::zero(3);
        let b = ResolventOp::zero(3);
        let p = AdrParams::new(1.0, 2.0, 0.5).unwrap();
        let x0 = Vector::from_vec(vec![1.0, -2.0, 3.0]);
        let t = adr_run(&a, &b, &p, &x0, 100, 1e-10).unwrap();
        assert_eq!(t.iterations, 1);
        assert!(t.converged);
        assert_eq!(t.final_x(), &x0);
        assert_eq!(t.final_y().unwrap(), &x0);
    }

    /// Affine operators A(x) = M x + c for the oracle-checked runs.
    fn affine_pair(dim: usize, rng: &mut ChaCha8Rng) -> (AffineOperator, AffineOperator) {
        // Symmetric positive semidefinite parts keep both operators
        // monotone so certified parameters exist.
        let mk = |rng: &mut ChaCha8Rng| {
            let b = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
            let m = &b * b.transpose() + Matrix::identity(dim, dim) * 0.5;
            let c = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
            AffineOperator::new(m, c).unwrap()
        };
        (mk(rng), mk(rng))
    }

    #[test]
    fn adr_run_affine_shadow_solves_inclusion() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let (a_aff, b_aff) = affine_pair(4, &mut rng);
        let a = a_aff.resolvent_op();
        let b = b_aff.resolvent_op();
        let p = AdrParams::new(0.7, 2.0, 0.5).unwrap();
        let x0 = Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let t = adr_run(&a, &b, &p, &x0, 20_000, 1e-13).unwrap();
        assert!(t.converged);

        // zer(A + B) solves (M_A + M_B) x = -(c_A + c_B).
        let msum = a_aff.matrix() + b_aff.matrix();
        let csum = -(a_aff.offset() + b_aff.offset());
        let xbar = msum.lu().solve(&csum).unwrap();
        assert!((t.final_y().unwrap() - &xbar).norm() <= 1e-8);
        assert!((t.final_z().unwrap() - &xbar).norm() <= 1e-8);
    }

    #[test]
    fn adr_run_fejer_monotone_on_certified_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let (a_aff, b_aff) = affine_pair(3, &mut rng);
        let a = a_aff.resolvent_op();
        let b = b_aff.resolvent_op();
        let p = AdrParams::new(1.0, 2.0, 0.5).unwrap();

        // The iteration map of affine operators is affine; probe it to
        // solve for its fixed point directly.
        let one_step = |x0: &Vector| -> Vector {
            adr_run(&a, &b, &p, x0, 1, 0.0).unwrap().final_x().clone()
        };
        let t0 = one_step(&Vector::zeros(3));
        let mut mt = Matrix::zeros(3, 3);
        for j in 0..3 {
            let mut e = Vector::zeros(3);
            e[j] = 1.0;
            mt.set_column(j, &(one_step(&e) - &t0));
        }
        let xfix = (Matrix::identity(3, 3) - &mt).lu().solve(&t0).unwrap();
        assert!((one_step(&xfix) - &xfix).norm() <= 1e-10);

        let x0 = Vector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let t = adr_run(&a, &b, &p, &x0, 2_000, 1e-12).unwrap();
        let mut prev = (&t.xs[0] - &xfix).norm();
        for x in &t.xs[1..] {
            let d = (x - &xfix).norm();
            assert!(d <= prev + 1e-10, "Fejer monotonicity violated: {d} > {prev}");
            prev = d;
        }
        assert!(tail_rate_ok(&t.step_norms));
    }

    #[test]
    fn adr_run_divergence_guard_fires() {
        // A non-monotone affine operator with a strongly expansive
        // iteration map: J = (I + gamma M)^{-1} with M = -0.9 I gives
        // resolvent 1/(1 - 0.9 gamma) which exceeds 1 for gamma near 1.
        let m = Matrix::identity(2, 2) * -0.9;
        let a = AffineOperator::new(m, Vector::zeros(2)).unwrap().resolvent_op();
        let b = ResolventOp::new(2, |_g, x: &Vector| Ok(x * 3.0));
        let p = AdrParams::new(1.0, 2.0, 1.0).unwrap();
        let x0 = Vector::from_vec(vec![1.0, 1.0]);
        match adr_run(&a, &b, &p, &x0, 100_000, 1e-12) {
            Err(Error::Diverged(_)) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn dual_operators_worked_examples() {
        // A = 0: the dual resolvent collapses to 0 for every input.
        let (ad, _) = dual_operators(&ResolventOp::zero(2), &ResolventOp::zero(2));
        let u = Vector::from_vec(vec![3.0, -4.0]);
        assert!(ad.resolve(0.7, &u).unwrap().norm() <= 1e-14);

        // B = Id: B' = Id, so J_{g B'}(u) = u/(1 + g).
        let (_, bd) = dual_operators(&ResolventOp::zero(2), &ResolventOp::identity(2));
        let r = bd.resolve(0.5, &u).unwrap();
        assert!((&r - &u / 1.5).norm() <= 1e-12);

        // Affine A: compare against the explicitly inverted affine map
        // A'(u) = -A^{-1}(-u) = M^{-1} u + M^{-1} c.
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let b = Matrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let m = &b * b.transpose() + Matrix::identity(3, 3);
        let c = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let a_aff = AffineOperator::new(m.clone(), c.clone()).unwrap();
        let (ad, _) = dual_operators(&a_aff.resolvent_op(), &ResolventOp::zero(3));
        let minv = m.try_inverse().unwrap();
        let cprime = &minv * &c;
        for _ in 0..5 {
            let u = Vector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let g = rng.random_range(0.2..2.0);
            let got = ad.resolve(g, &u).unwrap();
            let want = resolvent_affine(&minv, &cprime, g, &u).unwrap();
            assert!((&got - &want).norm() <= 1e-10);
        }
    }

    #[test]
    fn primal_dual_replay_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let (a_aff, b_aff) = affine_pair(3, &mut rng);
        let a = a_aff.resolvent_op();
        let b = b_aff.resolvent_op();
        let x0 = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));

        // Zero iterations: only the initialization identity, exact.
        let p = AdrParams::new(1.0, 2.0, 0.5).unwrap();
        assert_eq!(primal_dual_replay(&a, &b, &p, &x0, 0).unwrap(), 0.0);

        // Symmetric parameters.
        assert!(primal_dual_replay(&a, &b, &p, &x0, 50).unwrap() <= 1e-10);

        // Asymmetric stepsizes.
        for _ in 0..5 {
            let p = random_params(&mut rng);
            let dev = primal_dual_replay(&a, &b, &p, &x0, 50).unwrap();
            assert!(dev <= 1e-9, "replay deviation {dev} with {p:?}");
        }
    }

    #[test]
    fn dual_fixed_points_scale_to_primal_fixed_points() {
        // For affine pairs, if u is fixed for the dual map then -gamma u
        // is fixed for the primal map.
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let (a_aff, b_aff) = affine_pair(3, &mut rng);
        let a = a_aff.resolvent_op();
        let b = b_aff.resolvent_op();
        let p = AdrParams::from_stepsizes(0.8, 1.3, 0.6).unwrap();
        let pd = p.dual();
        let (ad, bd) = dual_operators(&a, &b);

        let dual_step = |u0: &Vector| -> Vector {
            adr_run(&ad, &bd, &pd, u0, 1, 0.0).unwrap().final_x().clone()
        };
        let t0 = dual_step(&Vector::zeros(3));
        let mut mt = Matrix::zeros(3, 3);
        for j in 0..3 {
            let mut e = Vector::zeros(3);
            e[j] = 1.0;
            mt.set_column(j, &(dual_step(&e) - &t0));
        }
        let ufix = (Matrix::identity(3, 3) - &mt).lu().solve(&t0).unwrap();

        let xcand = &ufix * (-p.gamma);
        let t = adr_run(&a, &b, &p, &xcand, 1, 0.0).unwrap();
        assert!((t.final_x() - &xcand).norm() <= 1e-9);
    }

    #[test]
    fn product_ops_structure() {
        // m = 3, all zero operators: the averaging resolvent replicates
        // the block mean exactly.
        let ops = vec![ResolventOp::zero(2), ResolventOp::zero(2), ResolventOp::zero(2)];
        let (_, g) = build_product_ops(&ops, 1.0, 1.0).unwrap();
        let x = Vector::from_vec(vec![1.0, 2.0, 5.0, 4.0]);
        let out = g.resolve(1.0, &x).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 3.0, 3.0, 3.0]);

        // Blockwise resolvent matches the per-block affine resolvent.
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        let (a1, a2) = affine_pair(2, &mut rng);
        let ops = vec![a1.resolvent_op(), a2.resolvent_op(), ResolventOp::zero(2)];
        let (f, _) = build_product_ops(&ops, 0.9, 1.4).unwrap();
        let x = Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let out = f.resolve(0.9, &x).unwrap();
        let top = a1.resolvent(0.9, &x.rows(0, 2).into_owned()).unwrap();
        let bot = a2.resolvent(0.9, &x.rows(2, 2).into_owned()).unwrap();
        assert!((out.rows(0, 2) - top).norm() <= 1e-14);
        assert!((out.rows(2, 2) - bot).norm() <= 1e-14);

        // m = 2: the averaging operator is the plain last-block resolvent.
        let ops2 = vec![a1.resolvent_op(), a2.resolvent_op()];
        let (_, g2) = build_product_ops(&ops2, 0.9, 1.4).unwrap();
        let x2 = Vector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let got = g2.resolve(1.4, &x2).unwrap();
        let want = a2.resolvent(1.4, &x2).unwrap();
        assert!((got - want).norm() <= 1e-14);
    }

    #[test]
    fn multi_run_matches_two_op_run_on_product_ops() {
        // The blockwise driver and the explicit product-space pair are
        // two routes to the same iteration.
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let (ops, p, _) = certified_c2_instance(&mut rng);
        let d = 3;
        let x0 = vec![
            Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
            Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
        ];
        let multi = multi_adr_run(&ops, &p, &x0, 60, 0.0).unwrap();

        let (f, g) = build_product_ops(&ops, p.gamma, p.delta).unwrap();
        let mut packed = Vector::zeros(2 * d);
        packed.rows_mut(0, d).copy_from(&x0[0]);
        packed.rows_mut(d, d).copy_from(&x0[1]);
        let two = adr_run(&f, &g, &p, &packed, 60, 0.0).unwrap();

        assert_eq!(two.iterations, multi.iterations);
        for k in 0..multi.xs.len() {
            for i in 0..2 {
                assert!((two.xs[k].rows(i * d, d) - &multi.xs[k][i]).norm() <= 1e-12);
            }
        }
        for k in 0..multi.zs.len() {
            // The product-space z replicates the shared shadow block.
            for i in 0..2 {
                assert!((two.zs[k].rows(i * d, d) - &multi.zs[k]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn multi_run_zero_operators_average_once() {
        let ops = vec![ResolventOp::zero(2), ResolventOp::zero(2), ResolventOp::zero(2)];
        let p = AdrParams::new(1.0, 2.0, 0.5).unwrap();
        let x0 = vec![Vector::from_vec(vec![2.0, 0.0]), Vector::from_vec(vec![0.0, 4.0])];
        let t = multi_adr_run(&ops, &p, &x0, 10, 1e-12).unwrap();
        // kappa mu = 1: every block jumps to the mean in one step and the
        // run is stationary from there.
        let mean = Vector::from_vec(vec![1.0, 2.0]);
        assert!((&t.xs[1][0] - &mean).norm() <= 1e-14);
        assert!((&t.xs[1][1] - &mean).norm() <= 1e-14);
        assert!(t.converged);
        assert!(t.iterations <= 2);
    }

    #[test]
    fn multi_run_collapses_to_two_op_run_at_m2() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let (a_aff, b_aff) = affine_pair(3, &mut rng);
        let a = a_aff.resolvent_op();
        let b = b_aff.resolvent_op();
        let p = AdrParams::from_stepsizes(0.9, 1.7, 0.45).unwrap();
        let x0 = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));

        let two = adr_run(&a, &b, &p, &x0, 200, 0.0).unwrap();
        let multi = multi_adr_run(&[a, b], &p, &[x0], 200, 0.0).unwrap();
        assert_eq!(two.iterations, multi.iterations);
        for k in 0..two.xs.len() {
            assert!((&two.xs[k] - &multi.xs[k][0]).norm() <= 1e-12);
        }
        for k in 0..two.zs.len() {
            assert!((&two.zs[k] - &multi.zs[k]).norm() <= 1e-12);
        }
    }

    /// Certified three-operator affine instance: two shifted identities
    /// (modulus 1) and the zero operator (modulus 0).
    fn certified_c2_instance(
        rng: &mut ChaCha8Rng,
    ) -> (Vec<ResolventOp>, AdrParams, Vector) {
        let dim = 3;
        let c1 = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let c2 = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let a1 = AffineOperator::new(Matrix::identity(dim, dim), c1.clone()).unwrap();
        let a2 = AffineOperator::new(Matrix::identity(dim, dim), c2.clone()).unwrap();
        let ops = vec![
            a1.resolvent_op().with_sigma(1.0),
            a2.resolvent_op().with_sigma(1.0),
            ResolventOp::zero(dim),
        ];
        let p = AdrParams::new(1.0, 2.0, 0.5).unwrap();
        let cert = certify_multi(&[1.0, 1.0, 0.0], &p, None).unwrap();
        assert_eq!(cert.condition, Condition::C2);
        // zer(A1 + A2 + A3): 2x + c1 + c2 = 0.
        let solution = -(c1 + c2) / 2.0;
        (ops, p, solution)
    }

    #[test]
    fn multi_run_certified_instance_reaches_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let (ops, p, solution) = certified_c2_instance(&mut rng);
        let x0 = vec![
            Vector::from_fn(3, |_, _| rng.random_range(-2.0..2.0)),
            Vector::from_fn(3, |_, _| rng.random_range(-2.0..2.0)),
        ];
        let t = multi_adr_run(&ops, &p, &x0, 50_000, 1e-12).unwrap();
        assert!(t.converged);
        assert!((t.shadow().unwrap() - &solution).norm() <= 1e-6);
        assert!(tail_rate_ok(&t.step_norms));

        // Switched order converges to the same zero.
        let ts = multi_adr_run_switched(&ops, &p, &x0, 50_000, 1e-12).unwrap();
        assert!(ts.converged);
        assert!((ts.shadow().unwrap() - &solution).norm() <= 1e-6);
    }

    #[test]
    fn multi_run_fejer_monotone_on_certified_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let (ops, p, _) = certified_c2_instance(&mut rng);
        let d = 3;
        let product_dim = 2 * d;

        let one_step = |x: &Vector| -> Vector {
            let blocks = vec![x.rows(0, d).into_owned(), x.rows(d, d).into_owned()];
            let t = multi_adr_run(&ops, &p, &blocks, 1, 0.0).unwrap();
            let fx = t.final_x();
            let mut out = Vector::zeros(product_dim);
            out.rows_mut(0, d).copy_from(&fx[0]);
            out.rows_mut(d, d).copy_from(&fx[1]);
            out
        };
        let t0 = one_step(&Vector::zeros(product_dim));
        let mut mt = Matrix::zeros(product_dim, product_dim);
        for j in 0..product_dim {
            let mut e = Vector::zeros(product_dim);
            e[j] = 1.0;
            mt.set_column(j, &(one_step(&e) - &t0));
        }
        let xfix = (Matrix::identity(product_dim, product_dim) - &mt).lu().solve(&t0).unwrap();
        assert!((one_step(&xfix) - &xfix).norm() <= 1e-9);

        let x0 = vec![
            Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)),
            Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)),
        ];
        let t = multi_adr_run(&ops, &p, &x0, 5_000, 1e-12).unwrap();
        let dist = |blocks: &Vec<Vector>| -> f64 {
            let d1 = (&blocks[0] - xfix.rows(0, d).into_owned()).norm_squared();
            let d2 = (&blocks[1] - xfix.rows(d, d).into_owned()).norm_squared();
            (d1 + d2).sqrt()
        };
        let mut prev = dist(&t.xs[0]);
        for x in &t.xs[1..] {
            let dnow = dist(x);
            assert!(dnow <= prev + 1e-10);
            prev = dnow;
        }
    }

    #[test]
    fn tail_rate_flag_behaviour() {
        // Decaying steps pass.
        let decaying: Vec<f64> = (1..200).map(|k| 1.0 / (k as f64)).collect();
        assert!(tail_rate_ok(&decaying));
        // Constant steps fail: sqrt(k) * c grows.
        let constant = vec![0.5; 200];
        assert!(!tail_rate_ok(&constant));
        // Short histories are vacuously fine.
        assert!(tail_rate_ok(&[1.0, 2.0]));
    }
}
