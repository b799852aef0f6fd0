//! Set-valued operators represented by their resolvents.
//!
//! An operator `A` enters the splitting algorithms only through its
//! resolvent `J_{gA} = (I + gA)^{-1}`, evaluated at varying step sizes
//! `g > 0`. For a maximally comonotone operator with modulus `sigma` the
//! resolvent is single-valued with full domain whenever `g + sigma > 0`,
//! which is exactly the admissibility rule [`ResolventOp::valid_gamma`]
//! encodes when no custom rule is installed.
//!
//! Comonotonicity with modulus `sigma` means
//! `<x - y, u - v> >= sigma * ||u - v||^2` for all graph pairs `(u, x)`,
//! `(v, y)`; negative moduli describe a controlled amount of
//! nonmonotonicity, positive moduli are cocoercivity. Monotonicity moduli
//! `rho` (`<x - y, u - v> >= rho * ||u - v||^2` with the roles of points
//! and values exchanged) are carried alongside because inversion swaps the
//! two notions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

type ResolveFn = Arc<dyn Fn(f64, &Vector) -> Result<Vector> + Send + Sync>;
type ValidFn = Arc<dyn Fn(f64) -> bool + Send + Sync>;

/// An operator accessed through its resolvent.
///
/// `sigma` and `rho` are metadata: the comonotonicity and monotonicity
/// moduli when the caller knows them. They feed the convergence
/// certificates and the default step-size admissibility rule, but the
/// resolvent closure is the ground truth for what the operator does.
#[derive(Clone)]
pub struct ResolventOp {
    dim: usize,
    sigma: Option<f64>,
    rho: Option<f64>,
    resolve: ResolveFn,
    valid: Option<ValidFn>,
}

impl std::fmt::Debug for ResolventOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResolventOp")
            .field("dim", &self.dim)
            .field("sigma", &self.sigma)
            .field("rho", &self.rho)
            .finish_non_exhaustive()
    }
}

impl ResolventOp {
    /// Wraps a resolvent evaluator. `resolve(g, x)` must return
    /// `(I + gA)^{-1} x` for admissible `g`.
    pub fn new<F>(dim: usize, resolve: F) -> Self
    where
        F: Fn(f64, &Vector) -> Result<Vector> + Send + Sync + 'static,
    {
        ResolventOp { dim, sigma: None, rho: None, resolve: Arc::new(resolve), valid: None }
    }

    /// Declares a comonotonicity modulus.
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    /// Declares a monotonicity modulus.
    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    /// Installs a custom step-size admissibility rule, replacing the
    /// modulus-based default.
    pub fn with_valid_gamma<F>(mut self, valid: F) -> Self
    where
        F: Fn(f64) -> bool + Send + Sync + 'static,
    {
        self.valid = Some(Arc::new(valid));
        self
    }

    /// The zero operator; its resolvent is the identity.
    pub fn zero(dim: usize) -> Self {
        ResolventOp::new(dim, |_, x: &Vector| Ok(x.clone())).with_sigma(0.0).with_rho(0.0)
    }

    /// The identity operator; `J_{gA} x = x / (1 + g)`.
    pub fn identity(dim: usize) -> Self {
        ResolventOp::new(dim, |g: f64, x: &Vector| Ok(x / (1.0 + g)))
            .with_sigma(1.0)
            .with_rho(1.0)
    }

    /// The affine operator `x -> Mx + c`.
    pub fn affine(m: Matrix, c: Vector) -> Result<Self> {
        let op = AffineOperator::new(m, c)?;
        let dim = op.dim();
        Ok(ResolventOp::new(dim, move |g, x| op.resolvent(g, x)))
    }

    /// Space dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared comonotonicity modulus, when known.
    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    /// Declared monotonicity modulus, when known.
    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    /// Whether the resolvent is trusted at step size `gamma`.
    ///
    /// Without a custom rule this requires `gamma > 0`, `gamma + sigma > 0`
    /// when a comonotonicity modulus is declared, and `1 + gamma * rho > 0`
    /// when a monotonicity modulus is declared.
    pub fn valid_gamma(&self, gamma: f64) -> bool {
        if let Some(valid) = &self.valid {
            return valid(gamma);
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return false;
        }
        if let Some(s) = self.sigma {
            if gamma + s <= 0.0 {
                return false;
            }
        }
        if let Some(r) = self.rho {
            if 1.0 + gamma * r <= 0.0 {
                return false;
            }
        }
        true
    }

    /// Evaluates `J_{gamma A}(x)`.
    pub fn resolve(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "resolvent on dim {} evaluated at a vector of length {}",
                self.dim,
                x.len()
            )));
        }
        if !self.valid_gamma(gamma) {
            return Err(Error::SingularResolvent {
                gamma,
                reason: "step size outside the operator's admissible range".into(),
            });
        }
        let y = (self.resolve)(gamma, x)?;
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "resolvent closure returned length {} on dim {}",
                y.len(),
                self.dim
            )));
        }
        Ok(y)
    }
}

/// The affine operator `x -> Mx + c` with a dense matrix.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    m: Matrix,
    c: Vector,
}

impl AffineOperator {
    pub fn new(m: Matrix, c: Vector) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "affine operator matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() != c.len() {
            return Err(Error::DimensionMismatch(format!(
                "affine operator offset has length {} for a {0}x{0} matrix",
                c.len()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("affine operator must be nonempty".into()));
        }
        Ok(AffineOperator { m, c })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn offset(&self) -> &Vector {
        &self.c
    }

    /// Applies the operator.
    pub fn apply(&self, x: &Vector) -> Vector {
        &self.m * x + &self.c
    }

    /// Evaluates the resolvent by solving `(I + gM) y = x - gc`.
    pub fn resolvent(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        resolvent_affine(&self.m, &self.c, gamma, x)
    }

    /// Wraps the operator as a [`ResolventOp`]. No moduli are declared;
    /// callers attach them when known.
    pub fn resolvent_op(&self) -> ResolventOp {
        let op = self.clone();
        ResolventOp::new(self.dim(), move |g, x| op.resolvent(g, x))
    }

    /// The inverse operator `y -> M^{-1}(y - c)`, when `M` is invertible.
    pub fn inverse(&self) -> Result<AffineOperator> {
        let minv = self.m.clone().try_inverse().ok_or_else(|| {
            Error::InvalidArgument("affine operator matrix is singular".into())
        })?;
        let c = -(&minv * &self.c);
        AffineOperator::new(minv, c)
    }
}

/// Resolvent of the affine operator `x -> Mx + c`: solves
/// `(I + gamma M) y = x - gamma c` by LU decomposition.
pub fn resolvent_affine(m: &Matrix, c: &Vector, gamma: f64, x: &Vector) -> Result<Vector> {
    if m.nrows() != m.ncols() || m.nrows() != c.len() || c.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "resolvent_affine with M {}x{}, c of {}, x of {}",
            m.nrows(),
            m.ncols(),
            c.len(),
            x.len()
        )));
    }
    let n = m.nrows();
    let sys = Matrix::identity(n, n) + m * gamma;
    let rhs = x - c * gamma;
    sys.lu().solve(&rhs).ok_or(Error::SingularResolvent {
        gamma,
        reason: "I + gamma M is singular".into(),
    })
}

/// Yosida regularization `(x - J_{gamma A} x) / gamma` of the operator at
/// `x`. Coincides with `J_{(1/gamma) A^{-1}}` applied to `x / gamma`.
pub fn yosida(op: &ResolventOp, gamma: f64, x: &Vector) -> Result<Vector> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Yosida regularization needs a nonzero finite step, got {gamma}"
        )));
    }
    let j = op.resolve(gamma, x)?;
    Ok((x - j) / gamma)
}

/// Resolvent of the inverse operator without forming the inverse:
/// `J_{delta A^{-1}}(u) = u - delta * J_{(1/delta) A}(u / delta)`.
pub fn resolvent_of_inverse(op: &ResolventOp, delta: f64, u: &Vector) -> Result<Vector> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "resolvent of inverse needs a nonzero finite step, got {delta}"
        )));
    }
    let inner = op.resolve(1.0 / delta, &(u / delta))?;
    Ok(u - inner * delta)
}

/// Smallest comonotonicity margin over all pairs of graph samples:
/// `min <x - y, u - v> - sigma ||u - v||^2` over unordered pairs of
/// `(value, point)` entries `(u, x)`, `(v, y)`.
///
/// Nonnegative output is consistent with the operator being
/// `sigma`-comonotone on the samples; a negative output refutes the claim.
pub fn check_comonotone(pairs: &[(Vector, Vector)], sigma: f64) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument(
            "comonotonicity check needs at least two graph samples".into(),
        ));
    }
    let dim = pairs[0].0.len();
    for (u, x) in pairs {
        if u.len() != dim || x.len() != dim {
            return Err(Error::DimensionMismatch(
                "comonotonicity samples must share one dimension".into(),
            ));
        }
    }
    let mut worst = f64::INFINITY;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (u, x) = &pairs[i];
            let (v, y) = &pairs[j];
            let du = u - v;
            let dx = x - y;
            let margin = dx.dot(&du) - sigma * du.norm_squared();
            if margin < worst {
                worst = margin;
            }
        }
    }
    Ok(worst)
}
