//! Proximable functions and regularized linear-composite subproblems.
//!
//! The splitting algorithms repeatedly minimize
//!
//! ```text
//!     f(w) + (g/2) * || L w + x/g ||^2
//! ```
//!
//! over `w` for a fixed step `g > 0`. [`subproblem_solve`] handles the three
//! structures that admit a closed-form or single-factorization answer:
//!
//! 1. `L = s * I` with `s != 0`: reduces to the proximity operator of `f`;
//! 2. quadratic `f(w) = (rho/2) ||w - d||^2`: a symmetric positive definite
//!    solve `(rho I + g L^T L) w = rho d - L^T x`, factored once per
//!    `(f, L, g)` and reused across iterations;
//! 3. `f = 0` with `L^T L` invertible: a least-squares solve.
//!
//! The minimally concave penalty used for sparsity-promoting denoising is
//! weakly convex with modulus `-omega/tau`; its prox therefore exists and
//! is unique only when the quadratic term is strong enough, which every
//! entry point checks explicitly.

use crate::error::{Error, Result};
use crate::linalg::{LinearMap, SpdSolver, Vector};

/// Margin by which the quadratic curvature must beat the concavity of the
/// minimally concave penalty before its prox is accepted as single-valued.
const MCP_STRICTNESS: f64 = 1.0 + 1e-12;

/// A function with enough structure to evaluate, proximate, and bound its
/// subdifferential distance.
#[derive(Debug, Clone)]
pub enum ProxFunction {
    /// `(rho/2) * ||w - center||^2` with `rho > 0`.
    Quadratic { rho: f64, center: Vector },
    /// `omega * sum_j p_tau(w_j)` where `p_tau` is the minimally concave
    /// penalty with threshold `tau`.
    Mcp { omega: f64, tau: f64, dim: usize },
    /// The zero function.
    Zero { dim: usize },
}

impl ProxFunction {
    pub fn quadratic(rho: f64, center: Vector) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "quadratic curvature must be positive, got {rho}"
            )));
        }
        if center.is_empty() {
            return Err(Error::InvalidArgument("quadratic center must be nonempty".into()));
        }
        Ok(ProxFunction::Quadratic { rho, center })
    }

    pub fn mcp(omega: f64, tau: f64, dim: usize) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite() && tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "minimally concave penalty needs omega > 0 and tau > 0, got omega = {omega}, tau = {tau}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("penalty dimension must be positive".into()));
        }
        Ok(ProxFunction::Mcp { omega, tau, dim })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("function dimension must be positive".into()));
        }
        Ok(ProxFunction::Zero { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            ProxFunction::Quadratic { center, .. } => center.len(),
            ProxFunction::Mcp { dim, .. } => *dim,
            ProxFunction::Zero { dim } => *dim,
        }
    }

    /// Weak-convexity modulus: the largest `r` such that
    /// `f - (r/2)||.||^2` is convex. Negative for the concave penalty.
    pub fn convexity_modulus(&self) -> f64 {
        match self {
            ProxFunction::Quadratic { rho, .. } => *rho,
            ProxFunction::Mcp { omega, tau, .. } => -omega / tau,
            ProxFunction::Zero { .. } => 0.0,
        }
    }

    pub fn eval(&self, w: &Vector) -> f64 {
        assert_eq!(w.len(), self.dim(), "ProxFunction::eval dimension mismatch");
        match self {
            ProxFunction::Quadratic { rho, center } => 0.5 * rho * (w - center).norm_squared(),
            ProxFunction::Mcp { omega, tau, .. } => {
                omega * w.iter().map(|&t| mcp_value(t, *tau)).sum::<f64>()
            }
            ProxFunction::Zero { .. } => 0.0,
        }
    }

    /// Proximity operator: `argmin_w f(w) + 1/(2t) ||w - a||^2`.
    pub fn prox(&self, t: f64, a: &Vector) -> Result<Vector> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("prox step must be positive, got {t}")));
        }
        if a.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "prox of dim {} at a vector of length {}",
                self.dim(),
                a.len()
            )));
        }
        match self {
            ProxFunction::Quadratic { rho, center } => {
                Ok((center * (t * rho) + a) / (1.0 + t * rho))
            }
            ProxFunction::Mcp { omega, tau, .. } => {
                let c = 1.0 / t;
                let mut out = Vector::zeros(a.len());
                for (o, &aj) in out.iter_mut().zip(a.iter()) {
                    *o = prox_mcp_scalar(aj, *omega, c, *tau)?;
                }
                Ok(out)
            }
            ProxFunction::Zero { .. } => Ok(a.clone()),
        }
    }

    /// Distance from `0` to `∂f(u) + g`, the natural first-order
    /// stationarity measure at `u` with linear part `g`.
    pub fn subgrad_dist(&self, u: &Vector, g: &Vector) -> f64 {
        assert_eq!(u.len(), self.dim(), "subgrad_dist dimension mismatch");
        assert_eq!(g.len(), self.dim(), "subgrad_dist dimension mismatch");
        match self {
            ProxFunction::Quadratic { rho, center } => ((u - center) * *rho + g).norm(),
            ProxFunction::Zero { .. } => g.norm(),
            ProxFunction::Mcp { omega, tau, .. } => {
                let mut acc = 0.0;
                for (&uj, &gj) in u.iter().zip(g.iter()) {
                    let d = if uj == 0.0 {
                        // Subdifferential at the kink is [-omega, omega].
                        (gj.abs() - omega).max(0.0)
                    } else {
                        let slope = if uj.abs() >= *tau {
                            0.0
                        } else {
                            omega * (uj.signum() - uj / tau)
                        };
                        (slope + gj).abs()
                    };
                    acc += d * d;
                }
                acc.sqrt()
            }
        }
    }
}

/// Minimally concave penalty of a scalar:
/// `|t| - t^2 / (2 tau)` for `|t| <= tau`, saturating at `tau / 2` beyond.
pub fn mcp_value(t: f64, tau: f64) -> f64 {
    let a = t.abs();
    if a <= tau {
        a - t * t / (2.0 * tau)
    } else {
        tau / 2.0
    }
}

/// Minimizer of `omega * p_tau(t) + (c/2) (t - a)^2` over scalars.
///
/// Requires `c` to exceed `omega / tau` with a small safety margin so the
/// objective is strongly convex and the minimizer unique. The solution is
/// odd in `a` and has three regimes: dead zone at zero for
/// `|a| <= omega/c`, a linear rescaling on the concave stretch, and the
/// identity once `|a| >= tau`.
pub fn prox_mcp_scalar(a: f64, omega: f64, c: f64, tau: f64) -> Result<f64> {
    if !(omega > 0.0 && tau > 0.0 && c > 0.0)
        || !(omega.is_finite() && tau.is_finite() && c.is_finite())
    {
        return Err(Error::InvalidArgument(format!(
            "prox_mcp_scalar needs positive finite omega, c, tau; got omega = {omega}, c = {c}, tau = {tau}"
        )));
    }
    if c < MCP_STRICTNESS * omega / tau {
        return Err(Error::NotStronglyConvex(format!(
            "quadratic curvature {c} does not dominate penalty concavity {}",
            omega / tau
        )));
    }
    let mag = a.abs();
    let t = if mag <= omega / c {
        0.0
    } else if mag >= tau {
        mag
    } else {
        (c * mag - omega) / (c - omega / tau)
    };
    Ok(t.copysign(a))
}

enum Plan {
    /// `L = s I`, `s != 0`: prox of `f` at `-x/(g s)` with step `1/(g s^2)`.
    ScaledProx { f: ProxFunction, s: f64, gamma: f64 },
    /// Quadratic `f`: pre-factored `(rho I + g L^T L)`.
    Spd { solver: SpdSolver, rho: f64, center: Vector, l: LinearMap },
    /// `f = 0`: pre-factored `gamma * L^T L`.
    LeastSquares { solver: SpdSolver, l: LinearMap },
}

/// A regularized subproblem with its factorization work done up front.
///
/// Immutable after construction, so a handle can be shared freely across
/// threads; iterative solvers build one per block and reuse it every
/// iteration.
pub struct SubproblemSolver {
    plan: Plan,
    in_dim: usize,
    out_dim: usize,
}

impl std::fmt::Debug for SubproblemSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.plan {
            Plan::ScaledProx { .. } => "ScaledProx",
            Plan::Spd { .. } => "Spd",
            Plan::LeastSquares { .. } => "LeastSquares",
        };
        write!(f, "SubproblemSolver::{kind}({} -> {})", self.out_dim, self.in_dim)
    }
}

impl SubproblemSolver {
    /// Plans `argmin_w f(w) + (gamma/2) ||L w + x/gamma||^2` for varying `x`.
    pub fn new(f: &ProxFunction, l: &LinearMap, gamma: f64) -> Result<Self> {
        if f.dim() != l.in_dim() {
            return Err(Error::DimensionMismatch(format!(
                "function dim {} differs from map input dim {}",
                f.dim(),
                l.in_dim()
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "subproblem step must be positive, got {gamma}"
            )));
        }
        let in_dim = l.in_dim();
        let out_dim = l.out_dim();
        let plan = match (f, l.as_scaled_identity()) {
            (_, Some(s)) if s != 0.0 => {
                if let ProxFunction::Mcp { omega, tau, .. } = f {
                    let c = gamma * s * s;
                    if c < MCP_STRICTNESS * omega / tau {
                        return Err(Error::NotStronglyConvex(format!(
                            "effective curvature {c} below penalty concavity {}",
                            omega / tau
                        )));
                    }
                }
                Plan::ScaledProx { f: f.clone(), s, gamma }
            }
            (ProxFunction::Quadratic { rho, center }, _) => {
                let solver = regularized_gram_solver(l, *rho, gamma)?;
                Plan::Spd {
                    solver,
                    rho: *rho,
                    center: center.clone(),
                    l: l.clone(),
                }
            }
            (ProxFunction::Zero { .. }, _) => {
                let solver = regularized_gram_solver(l, 0.0, gamma).map_err(|e| match e {
                    Error::NotPositiveDefinite(msg) => Error::NotStronglyConvex(format!(
                        "least-squares subproblem needs an injective map: {msg}"
                    )),
                    other => other,
                })?;
                Plan::LeastSquares { solver, l: l.clone() }
            }
            _ => {
                return Err(Error::UnsupportedSubproblem(format!(
                    "no closed-form plan for {f:?} composed with {l:?}"
                )))
            }
        };
        Ok(SubproblemSolver { plan, in_dim, out_dim })
    }

    /// Input dimension of `x` (the output space of `L`).
    pub fn rhs_dim(&self) -> usize {
        self.out_dim
    }

    /// Solves the planned subproblem at offset `x`.
    pub fn solve(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.out_dim {
            return Err(Error::DimensionMismatch(format!(
                "subproblem offset has length {}, expected {}",
                x.len(),
                self.out_dim
            )));
        }
        match &self.plan {
            Plan::ScaledProx { f, s, gamma } => {
                let t = 1.0 / (gamma * s * s);
                let a = x * (-1.0 / (gamma * s));
                f.prox(t, &a)
            }
            Plan::Spd { solver, rho, center, l, .. } => {
                let rhs = center * *rho - l.adjoint_apply(x);
                Ok(solver.solve(&rhs))
            }
            Plan::LeastSquares { solver, l, .. } => {
                // The factored matrix is gamma * L^T L, so the optimality
                // condition gamma L^T L w = -L^T x needs no rescaling.
                let rhs = -l.adjoint_apply(x);
                Ok(solver.solve(&rhs))
            }
        }
    }
}

/// Factors `rho I + gamma L^T L`, using the tridiagonal Gram structure
/// when the map provides one.
fn regularized_gram_solver(l: &LinearMap, rho: f64, gamma: f64) -> Result<SpdSolver> {
    if let Some((diag, sub)) = l.gram_tridiag() {
        let d: Vec<f64> = diag.iter().map(|&v| rho + gamma * v).collect();
        let s: Vec<f64> = sub.iter().map(|&v| gamma * v).collect();
        SpdSolver::tridiagonal(&d, &s)
    } else {
        let dense = l.to_dense();
        let mut gram = dense.transpose() * &dense * gamma;
        for i in 0..gram.nrows() {
            gram[(i, i)] += rho;
        }
        SpdSolver::dense(&gram)
    }
}

/// One-shot form of [`SubproblemSolver`]: plans and solves immediately.
pub fn subproblem_solve(f: &ProxFunction, l: &LinearMap, x: &Vector, gamma: f64) -> Result<Vector> {
    SubproblemSolver::new(f, l, gamma)?.solve(x)
}

/// Resolvent of the operator `-L ∘ (∂f)^{-1} ∘ (-L^T)`, optionally shifted
/// by a constant `b`, evaluated through the regularized subproblem:
/// the resolvent point is `x' + gamma * L u` where `x' = x - gamma * b`
/// and `u` minimizes the subproblem at `x'`.
///
/// Returns `(resolvent point, block minimizer u)`.
pub fn resolvent_from_subproblem(
    f: &ProxFunction,
    l: &LinearMap,
    b: Option<&Vector>,
    gamma: f64,
    x: &Vector,
) -> Result<(Vector, Vector)> {
    let shifted = match b {
        Some(b) => {
            if b.len() != x.len() {
                return Err(Error::DimensionMismatch(format!(
                    "shift has length {}, state has length {}",
                    b.len(),
                    x.len()
                )));
            }
            x - b * gamma
        }
        None => x.clone(),
    };
    let u = subproblem_solve(f, l, &shifted, gamma)?;
    let y = &shifted + l.apply(&u) * gamma;
    Ok((y, u))
}

/// First-order stationarity residual of `w` for the regularized
/// subproblem: distance from `0` to `∂f(w) + L^T (gamma L w + x)`.
pub fn stationarity_residual(
    f: &ProxFunction,
    l: &LinearMap,
    x: &Vector,
    gamma: f64,
    w: &Vector,
) -> f64 {
    let g = l.adjoint_apply(&(l.apply(w) * gamma + x));
    f.subgrad_dist(w, &g)
}
