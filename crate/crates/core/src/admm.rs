//! Multiplier methods for linearly constrained block-separable
//! minimization
//!
//! ```text
//!     minimize   f_1(u_1) + ... + f_m(u_m)
//!     subject to L_1 u_1 + ... + L_m u_m = b
//! ```
//!
//! where the leading `f_i` are convex and the last block may be weakly
//! convex (an MCP penalty, say). Attaching each block to the operator
//! `A_i = -L_i (∂f_i)^{-1} (-L_i^T ·)` turns the KKT system into the
//! inclusion `0 ∈ A_1(y) + ... + A_m(y)` for the multiplier `y`, and the
//! adaptive splitting iteration on that inclusion yields the multiplier
//! methods implemented here:
//!
//! * [`admm_general_run`]: the general form with an explicit relaxation
//!   `kappa`; its per-iteration state is `(y, s_1, ..., s_{m-1})`.
//! * [`admm_special_run`]: the specialization at
//!   `kappa = (lambda - 1)/lambda`, whose state is the primal blocks and
//!   the multiplier `(u, y)` and whose updates are the familiar
//!   alternating proximal steps.
//! * [`gs_admm_run`]: the sequential Gauss-Seidel baseline with a single
//!   step size.
//!
//! All three report the same stopping quantity: the maximum of the
//! feasibility residual `||sum_i L_i u_i - b||` and the per-block dual
//! residual norms, so runs are comparable across methods.

use crate::error::{Error, Result};
use crate::functions::{resolvent_from_subproblem, subproblem_solve, ProxFunction, SubproblemSolver};
use crate::linalg::{LinearMap, Vector};
use crate::operators::ResolventOp;
use crate::splitting::{AdrParams, DEFAULT_EPS, DEFAULT_MAX_ITER};
use std::time::Instant;

/// A block-separable problem instance.
#[derive(Debug, Clone)]
pub struct BlockProblem {
    f: Vec<ProxFunction>,
    l: Vec<LinearMap>,
    b: Vector,
}

impl BlockProblem {
    /// Validates and stores the instance. The leading functions must be
    /// convex (`rho >= 0`), the last one at most concave by a bounded
    /// amount (`rho <= 0`); every map must write into the constraint
    /// space of `b`.
    pub fn new(f: Vec<ProxFunction>, l: Vec<LinearMap>, b: Vector) -> Result<Self> {
        let m = f.len();
        if m < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 blocks, got {m}")));
        }
        if l.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{m} functions but {} maps",
                l.len()
            )));
        }
        let q = b.len();
        for (i, (fi, li)) in f.iter().zip(l.iter()).enumerate() {
            if li.out_dim() != q {
                return Err(Error::DimensionMismatch(format!(
                    "map {} writes into dimension {}, constraint has {q}",
                    i + 1,
                    li.out_dim()
                )));
            }
            if fi.dim() != li.in_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "block {}: function on dimension {}, map reads {}",
                    i + 1,
                    fi.dim(),
                    li.in_dim()
                )));
            }
            let rho = fi.convexity_modulus();
            if i + 1 < m && rho < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "leading block {} must be convex, got modulus {rho}",
                    i + 1
                )));
            }
            if i + 1 == m && rho > 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "last block must have nonpositive modulus, got {rho}"
                )));
            }
        }
        Ok(BlockProblem { f, l, b })
    }

    /// Number of blocks `m`.
    pub fn block_count(&self) -> usize {
        self.f.len()
    }

    /// Dimension of the constraint space.
    pub fn constraint_dim(&self) -> usize {
        self.b.len()
    }

    pub fn functions(&self) -> &[ProxFunction] {
        &self.f
    }

    pub fn maps(&self) -> &[LinearMap] {
        &self.l
    }

    pub fn offset(&self) -> &Vector {
        &self.b
    }

    /// Per-block primal dimensions.
    pub fn block_dims(&self) -> Vec<usize> {
        self.l.iter().map(|li| li.in_dim()).collect()
    }

    /// All-zero primal blocks, the default start.
    pub fn zero_blocks(&self) -> Vec<Vector> {
        self.l.iter().map(|li| Vector::zeros(li.in_dim())).collect()
    }

    /// Feasibility gap `||sum_i L_i u_i - b||`.
    pub fn primal_residual(&self, u: &[Vector]) -> Result<f64> {
        Ok(self.constraint_image(u)?.norm())
    }

    fn constraint_image(&self, u: &[Vector]) -> Result<Vector> {
        if u.len() != self.f.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} blocks, got {}",
                self.f.len(),
                u.len()
            )));
        }
        let mut acc = -self.b.clone();
        for (li, ui) in self.l.iter().zip(u.iter()) {
            if ui.len() != li.in_dim() {
                return Err(Error::DimensionMismatch("block dimension mismatch".into()));
            }
            acc += li.apply(ui);
        }
        Ok(acc)
    }

    /// Comonotonicity moduli of the operators `A_i` attached to the
    /// blocks: `rho_i / ||L_i||^2` for the leading blocks, and for the
    /// last block `0` when it is convex, `rho_m ||L_m^{-1}||^2` when it
    /// is weakly convex (which requires an invertible map).
    pub fn comonotone_moduli(&self) -> Result<Vec<f64>> {
        let m = self.f.len();
        let mut sigmas = Vec::with_capacity(m);
        for (i, (fi, li)) in self.f.iter().zip(self.l.iter()).enumerate().take(m - 1) {
            let norm = li.norm();
            if norm == 0.0 {
                return Err(Error::InvalidArgument(format!("map {} is zero", i + 1)));
            }
            sigmas.push(fi.convexity_modulus() / (norm * norm));
        }
        let rho_m = self.f[m - 1].convexity_modulus();
        if rho_m == 0.0 {
            sigmas.push(0.0);
        } else {
            let inv = self.l[m - 1].inverse_map().map_err(|e| {
                Error::InvalidArgument(format!(
                    "weakly convex last block needs an invertible map: {e}"
                ))
            })?;
            let ninv = inv.norm();
            sigmas.push(rho_m * ninv * ninv);
        }
        Ok(sigmas)
    }
}

/// The `m` inclusion operators attached to the blocks, each evaluated
/// through the corresponding regularized subproblem; the constraint
/// offset `b` rides on the last operator. Declared moduli come from
/// [`BlockProblem::comonotone_moduli`].
pub fn inclusion_operators(prob: &BlockProblem) -> Result<Vec<ResolventOp>> {
    let m = prob.block_count();
    let q = prob.constraint_dim();
    let sigmas = prob.comonotone_moduli()?;
    let mut ops = Vec::with_capacity(m);
    for (i, &sigma) in sigmas.iter().enumerate() {
        let f = prob.f[i].clone();
        let l = prob.l[i].clone();
        let shift = (i + 1 == m).then(|| prob.b.clone());
        let op = ResolventOp::new(q, move |g, x: &Vector| {
            resolvent_from_subproblem(&f, &l, shift.as_ref(), g, x).map(|(y, _)| y)
        })
        .with_sigma(sigma);
        ops.push(op);
    }
    Ok(ops)
}

/// Knobs shared by the three run functions.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub max_iter: usize,
    /// Threshold for the combined primal/dual residual.
    pub eps: f64,
    /// Reference signal; when present, each iteration logs the mean
    /// absolute error of the concatenated leading blocks against it.
    pub mae_ref: Option<Vector>,
    /// Record the full `(u, y)` history, not only the final state.
    pub record_iterates: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_iter: DEFAULT_MAX_ITER,
            eps: DEFAULT_EPS,
            mae_ref: None,
            record_iterates: false,
        }
    }
}

/// Per-iteration progress log.
#[derive(Debug, Clone, Copy)]
pub struct IterStats {
    /// 1-based iteration count at which the row was recorded.
    pub iter: usize,
    pub primal_residual: f64,
    /// Largest dual residual norm over the leading blocks.
    pub dual_residual: f64,
    pub mae: Option<f64>,
    /// Milliseconds since the run started.
    pub elapsed_ms: f64,
}

/// Final state and log of a multiplier-method run.
#[derive(Debug, Clone)]
pub struct AdmmRun {
    /// Primal blocks after the last completed iteration.
    pub u: Vec<Vector>,
    /// Multiplier iterate.
    pub y: Vector,
    /// Auxiliary state of the general form (empty for the other runs).
    pub s: Vec<Vector>,
    /// Dual residual norms of the last completed iteration, one per
    /// leading block.
    pub dual_residual_norms: Vec<f64>,
    pub history: Vec<IterStats>,
    /// Present when `record_iterates` was set: `u_history[k]` holds the
    /// blocks after iteration `k+1`.
    pub u_history: Vec<Vec<Vector>>,
    pub y_history: Vec<Vector>,
    pub iterations: usize,
    pub converged: bool,
}

/// Combined stopping quantity of the run's final state: the maximum of
/// the feasibility residual recomputed from `run.u` and the recorded
/// dual residual norms. Errs until at least one iteration has completed.
pub fn stopping_residual(prob: &BlockProblem, run: &AdmmRun) -> Result<f64> {
    if run.iterations == 0 {
        return Err(Error::NotReady(
            "stopping residual is defined after the first iteration".into(),
        ));
    }
    let primal = prob.primal_residual(&run.u)?;
    Ok(run.dual_residual_norms.iter().cloned().fold(primal, f64::max))
}

/// KKT residual of a candidate primal-dual pair: the maximum of the
/// feasibility gap and the per-block residuals of `0 ∈ ∂f_i(u_i) +
/// L_i^T y`.
pub fn kkt_residual(prob: &BlockProblem, u: &[Vector], y: &Vector) -> Result<f64> {
    if y.len() != prob.constraint_dim() {
        return Err(Error::DimensionMismatch(format!(
            "multiplier of length {} on a constraint of dimension {}",
            y.len(),
            prob.constraint_dim()
        )));
    }
    let mut worst = prob.primal_residual(u)?;
    for ((fi, li), ui) in prob.f.iter().zip(prob.l.iter()).zip(u.iter()) {
        worst = worst.max(fi.subgrad_dist(ui, &li.adjoint_apply(y)));
    }
    Ok(worst)
}

fn mae_against(u: &[Vector], m: usize, reference: &Vector) -> f64 {
    let mut acc = 0.0;
    let mut pos = 0;
    for ui in &u[..m - 1] {
        for &v in ui.iter() {
            acc += (v - reference[pos]).abs();
            pos += 1;
        }
    }
    acc / pos as f64
}

fn check_mae_ref(prob: &BlockProblem, opts: &RunOptions) -> Result<()> {
    if let Some(r) = &opts.mae_ref {
        let lead: usize = prob.block_dims()[..prob.block_count() - 1].iter().sum();
        if r.len() != lead {
            return Err(Error::DimensionMismatch(format!(
                "reference of length {} against {} leading coordinates",
                r.len(),
                lead
            )));
        }
    }
    Ok(())
}

struct RunRecorder {
    start: Instant,
    history: Vec<IterStats>,
    u_history: Vec<Vec<Vector>>,
    y_history: Vec<Vector>,
    record: bool,
}

impl RunRecorder {
    fn new(record: bool) -> Self {
        RunRecorder {
            start: Instant::now(),
            history: Vec::new(),
            u_history: Vec::new(),
            y_history: Vec::new(),
            record,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn log(
        &mut self,
        iter: usize,
        primal: f64,
        dual: f64,
        opts: &RunOptions,
        m: usize,
        u: &[Vector],
        y: &Vector,
    ) {
        let mae = opts.mae_ref.as_ref().map(|r| mae_against(u, m, r));
        self.history.push(IterStats {
            iter,
            primal_residual: primal,
            dual_residual: dual,
            mae,
            elapsed_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
        if self.record {
            self.u_history.push(u.to_vec());
            self.y_history.push(y.clone());
        }
    }
}

fn leading_solvers(prob: &BlockProblem, gamma: f64) -> Result<Vec<SubproblemSolver>> {
    let m = prob.block_count();
    prob.f[..m - 1]
        .iter()
        .zip(prob.l[..m - 1].iter())
        .map(|(fi, li)| SubproblemSolver::new(fi, li, gamma))
        .collect()
}

/// General multiplier method for [`BlockProblem`], parametrized by the
/// full tuple `p` including the relaxation `kappa`.
///
/// State is the multiplier `y` and one auxiliary vector `s_i` per leading
/// block; `init` supplies `(y0, s0)` and defaults to zeros. One iteration
/// reads
///
/// ```text
///     u_i = argmin f_i + (gamma/2) || L_i w + (y + (mu-1) s_i)/gamma ||^2
///     z_i = y + (mu-1) s_i + gamma L_i u_i
///     v_i = (1 - kappa lambda) y + kappa lambda z_i - s_i
///     u_m = argmin f_m + (delta/(2(m-1))) || L_m w + (sum_i v_i)/delta - b ||^2
///     y'  = (sum_i v_i - delta b + delta L_m u_m) / (m - 1)
///     s_i' = s_i - (1 - kappa lambda) y + y' - kappa lambda z_i
/// ```
///
/// and the dual residual of block `i` is `L_i^T (z_i - y')`.
pub fn admm_general_run(
    prob: &BlockProblem,
    p: &AdrParams,
    init: Option<(Vector, Vec<Vector>)>,
    opts: &RunOptions,
) -> Result<AdmmRun> {
    p.validate()?;
    check_mae_ref(prob, opts)?;
    let m = prob.block_count();
    let q = prob.constraint_dim();
    let copies = (m - 1) as f64;
    let delta_m = p.delta / copies;
    let kl = p.kappa * p.lambda;

    let solvers = leading_solvers(prob, p.gamma)?;
    let solver_m = SubproblemSolver::new(&prob.f[m - 1], &prob.l[m - 1], delta_m)?;

    let (mut y, mut s) = match init {
        Some((y0, s0)) => {
            if y0.len() != q || s0.len() != m - 1 || s0.iter().any(|v| v.len() != q) {
                return Err(Error::DimensionMismatch(
                    "init state must hold y and m-1 auxiliary vectors in the constraint space"
                        .into(),
                ));
            }
            (y0, s0)
        }
        None => (Vector::zeros(q), vec![Vector::zeros(q); m - 1]),
    };

    let mut u: Vec<Vector> = prob.zero_blocks();
    let mut rec = RunRecorder::new(opts.record_iterates);
    let mut dual_norms = vec![f64::INFINITY; m - 1];
    let mut iterations = 0;
    let mut converged = false;

    for k in 0..opts.max_iter {
        let mut zs = Vec::with_capacity(m - 1);
        let mut sum_v = Vector::zeros(q);
        for i in 0..m - 1 {
            let x = &y + &s[i] * (p.mu - 1.0);
            let ui = solvers[i].solve(&x).map_err(|e| Error::at_iteration(k, e))?;
            let z = &x + prob.l[i].apply(&ui) * p.gamma;
            sum_v += &y * (1.0 - kl) + &z * kl - &s[i];
            u[i] = ui;
            zs.push(z);
        }
        let input_m = (&sum_v - &prob.b * p.delta) / copies;
        let um = solver_m.solve(&input_m).map_err(|e| Error::at_iteration(k, e))?;
        let y_next = &input_m + prob.l[m - 1].apply(&um) * delta_m;
        u[m - 1] = um;

        for i in 0..m - 1 {
            let si_next = &s[i] - &y * (1.0 - kl) + &y_next - &zs[i] * kl;
            s[i] = si_next;
            dual_norms[i] = prob.l[i].adjoint_apply(&(&zs[i] - &y_next)).norm();
        }
        y = y_next;

        let primal = prob.primal_residual(&u)?;
        let dual = dual_norms.iter().cloned().fold(0.0_f64, f64::max);
        iterations = k + 1;
        rec.log(iterations, primal, dual, opts, m, &u, &y);
        if primal.max(dual) <= opts.eps {
            converged = true;
            break;
        }
    }

    Ok(AdmmRun {
        u,
        y,
        s,
        dual_residual_norms: if iterations == 0 { Vec::new() } else { dual_norms },
        history: rec.history,
        u_history: rec.u_history,
        y_history: rec.y_history,
        iterations,
        converged,
    })
}

/// Specialized multiplier method: the general form at
/// `kappa = (lambda - 1)/lambda`, where the auxiliary state collapses
/// onto the primal blocks. `init` supplies `(u0, y0)` and defaults to
/// zeros. With `gamma' = gamma/(m-1)`, `delta' = delta/(m-1)` and the
/// coupling residual `r = sum_j L_j u_j - b`, one iteration reads
///
/// ```text
///     u_i' = argmin f_i + (gamma/2) || L_i w + (y + gamma' r - gamma L_i u_i)/gamma ||^2
///     u_m' = argmin f_m + (delta'/2) || L_m w + sum_{j<m} L_j u_j' - b + y/delta' ||^2
///     y'   = y + delta' (sum_j L_j u_j' - b)
/// ```
///
/// and the dual residual of block `i` is
/// `gamma L_i^T L_i (u_i' - u_i) + L_i^T (gamma r - delta r') / (m-1)`.
pub fn admm_special_run(
    prob: &BlockProblem,
    gamma: f64,
    delta: f64,
    init: Option<(Vec<Vector>, Vector)>,
    opts: &RunOptions,
) -> Result<AdmmRun> {
    if !(gamma > 0.0 && gamma.is_finite() && delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "step sizes must be positive, got gamma = {gamma}, delta = {delta}"
        )));
    }
    check_mae_ref(prob, opts)?;
    let m = prob.block_count();
    let q = prob.constraint_dim();
    let copies = (m - 1) as f64;
    let gamma_p = gamma / copies;
    let delta_p = delta / copies;

    let solvers = leading_solvers(prob, gamma)?;
    let solver_m = SubproblemSolver::new(&prob.f[m - 1], &prob.l[m - 1], delta_p)?;

    let (mut u, mut y) = match init {
        Some((u0, y0)) => {
            if u0.len() != m
                || y0.len() != q
                || u0.iter().zip(prob.l.iter()).any(|(v, li)| v.len() != li.in_dim())
            {
                return Err(Error::DimensionMismatch(
                    "init state must hold m primal blocks and a multiplier".into(),
                ));
            }
            (u0, y0)
        }
        None => (prob.zero_blocks(), Vector::zeros(q)),
    };

    let mut images: Vec<Vector> = prob.l.iter().zip(u.iter()).map(|(li, ui)| li.apply(ui)).collect();
    let mut rec = RunRecorder::new(opts.record_iterates);
    let mut dual_norms = vec![f64::INFINITY; m - 1];
    let mut iterations = 0;
    let mut converged = false;

    for k in 0..opts.max_iter {
        let mut r = -(&prob.b);
        for img in &images {
            r += img;
        }

        let mut new_u = Vec::with_capacity(m);
        let mut new_images = Vec::with_capacity(m);
        let mut p_sum = Vector::zeros(q);
        for i in 0..m - 1 {
            let x = &y + &r * gamma_p - &images[i] * gamma;
            let ui = solvers[i].solve(&x).map_err(|e| Error::at_iteration(k, e))?;
            let img = prob.l[i].apply(&ui);
            p_sum += &img;
            new_u.push(ui);
            new_images.push(img);
        }
        let input_m = &y + (&p_sum - &prob.b) * delta_p;
        let um = solver_m.solve(&input_m).map_err(|e| Error::at_iteration(k, e))?;
        let img_m = prob.l[m - 1].apply(&um);
        let r_next = &p_sum + &img_m - &prob.b;
        let y_next = &y + &r_next * delta_p;
        new_u.push(um);
        new_images.push(img_m);

        for i in 0..m - 1 {
            let w = (&new_images[i] - &images[i]) * gamma + (&r * gamma - &r_next * delta) / copies;
            dual_norms[i] = prob.l[i].adjoint_apply(&w).norm();
        }

        u = new_u;
        images = new_images;
        y = y_next;

        let primal = r_next.norm();
        let dual = dual_norms.iter().cloned().fold(0.0_f64, f64::max);
        iterations = k + 1;
        rec.log(iterations, primal, dual, opts, m, &u, &y);
        if primal.max(dual) <= opts.eps {
            converged = true;
            break;
        }
    }

    Ok(AdmmRun {
        u,
        y,
        s: Vec::new(),
        dual_residual_norms: if iterations == 0 { Vec::new() } else { dual_norms },
        history: rec.history,
        u_history: rec.u_history,
        y_history: rec.y_history,
        iterations,
        converged,
    })
}

/// Sequential Gauss-Seidel multiplier baseline with a single step size:
/// each block minimizes the augmented Lagrangian with every other block
/// frozen at its most recent value, then the multiplier takes a gradient
/// step. The dual residual of leading block `i` is
/// `(m-1) g L_i^T sum_{j>i} L_j (u_j - u_j')`.
pub fn gs_admm_run(
    prob: &BlockProblem,
    gamma_gs: f64,
    init: Option<(Vec<Vector>, Vector)>,
    opts: &RunOptions,
) -> Result<AdmmRun> {
    if !(gamma_gs > 0.0 && gamma_gs.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "step size must be positive, got {gamma_gs}"
        )));
    }
    check_mae_ref(prob, opts)?;
    let m = prob.block_count();
    let q = prob.constraint_dim();

    let solvers: Vec<SubproblemSolver> = prob
        .f
        .iter()
        .zip(prob.l.iter())
        .map(|(fi, li)| SubproblemSolver::new(fi, li, gamma_gs))
        .collect::<Result<_>>()?;

    let (mut u, mut y) = match init {
        Some((u0, y0)) => {
            if u0.len() != m
                || y0.len() != q
                || u0.iter().zip(prob.l.iter()).any(|(v, li)| v.len() != li.in_dim())
            {
                return Err(Error::DimensionMismatch(
                    "init state must hold m primal blocks and a multiplier".into(),
                ));
            }
            (u0, y0)
        }
        None => (prob.zero_blocks(), Vector::zeros(q)),
    };

    let mut rec = RunRecorder::new(opts.record_iterates);
    let mut dual_norms = vec![f64::INFINITY; m - 1];
    let mut iterations = 0;
    let mut converged = false;

    for k in 0..opts.max_iter {
        let images_old: Vec<Vector> =
            prob.l.iter().zip(u.iter()).map(|(li, ui)| li.apply(ui)).collect();
        let mut tail: Vector = images_old.iter().fold(Vector::zeros(q), |acc, v| acc + v);
        let mut head = Vector::zeros(q);
        let mut new_u = Vec::with_capacity(m);
        let mut new_images = Vec::with_capacity(m);
        for i in 0..m {
            tail -= &images_old[i];
            let coupling = &head + &tail - &prob.b;
            let x = coupling * gamma_gs + &y;
            let ui = solvers[i].solve(&x).map_err(|e| Error::at_iteration(k, e))?;
            let img = prob.l[i].apply(&ui);
            head += &img;
            new_u.push(ui);
            new_images.push(img);
        }
        let r_next = &head - &prob.b;
        y += &r_next * gamma_gs;

        // Suffix sums of L_j (u_j - u_j') feed the dual residuals.
        let mut suffix = Vector::zeros(q);
        let mut dual_vecs: Vec<Vector> = vec![Vector::zeros(0); m - 1];
        for j in (0..m).rev() {
            if j < m - 1 {
                dual_vecs[j] = prob.l[j].adjoint_apply(&suffix) * ((m - 1) as f64 * gamma_gs);
            }
            suffix += &images_old[j] - &new_images[j];
        }
        for i in 0..m - 1 {
            dual_norms[i] = dual_vecs[i].norm();
        }
        u = new_u;

        let primal = r_next.norm();
        let dual = dual_norms.iter().cloned().fold(0.0_f64, f64::max);
        iterations = k + 1;
        rec.log(iterations, primal, dual, opts, m, &u, &y);
        if primal.max(dual) <= opts.eps {
            converged = true;
            break;
        }
    }

    Ok(AdmmRun {
        u,
        y,
        s: Vec::new(),
        dual_residual_norms: if iterations == 0 { Vec::new() } else { dual_norms },
        history: rec.history,
        u_history: rec.u_history,
        y_history: rec.y_history,
        iterations,
        converged,
    })
}

/// Recovers a KKT candidate from a fixed point `xbar` of the
/// product-space splitting map over [`inclusion_operators`] in the
/// shared-block-first order of
/// [`multi_adr_run_switched`](crate::splitting::multi_adr_run_switched),
/// the order under which the multiplier methods are derived:
///
/// ```text
///     u_m = argmin f_m + (delta'/2) || L_m w + (sum_i xbar_i - delta b)/delta ... ||^2
///     y   = (sum_i xbar_i - delta b + delta L_m u_m) / (m - 1)
///     u_i = argmin f_i + (gamma/2) || L_i w + ((1 - mu) xbar_i + mu y)/gamma ||^2
/// ```
///
/// At an exact fixed point the pair `(u, y)` satisfies the KKT system and
/// `y = xbar_i - delta L_i u_i` for every leading block.
pub fn extract_kkt_from_fixed_point(
    prob: &BlockProblem,
    xbar: &[Vector],
    p: &AdrParams,
) -> Result<(Vec<Vector>, Vector)> {
    p.validate()?;
    let m = prob.block_count();
    let q = prob.constraint_dim();
    if xbar.len() != m - 1 || xbar.iter().any(|v| v.len() != q) {
        return Err(Error::DimensionMismatch(format!(
            "fixed point must hold {} blocks in the constraint space",
            m - 1
        )));
    }
    let copies = (m - 1) as f64;
    let delta_p = p.delta / copies;

    let mut sum_x = Vector::zeros(q);
    for x in xbar {
        sum_x += x;
    }
    let input_m = (&sum_x - &prob.b * p.delta) / copies;
    let um = subproblem_solve(&prob.f[m - 1], &prob.l[m - 1], &input_m, delta_p)?;
    let ybar = &input_m + prob.l[m - 1].apply(&um) * delta_p;

    let mut u = Vec::with_capacity(m);
    for (i, xb) in xbar.iter().enumerate() {
        let x = xb * (1.0 - p.mu) + &ybar * p.mu;
        u.push(subproblem_solve(&prob.f[i], &prob.l[i], &x, p.gamma)?);
    }
    u.push(um);
    Ok((u, ybar))
}
