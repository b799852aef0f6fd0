//! Denoising problem assembly.
//!
//! The model splits a noisy length-`n` signal into `N` contiguous
//! coordinate groups, attaches a quadratic data-fit term to each, and
//! couples them through the first-difference map against a concave
//! sparsity penalty on the differences:
//!
//! ```text
//!     minimize  sum_i 1/2 ||u_i - noisy_i||^2 + omega P_tau(w)
//!     subject to D_1 u_1 + ... + D_N u_N - w = 0
//! ```
//!
//! where `D_i` holds the columns of the difference matrix belonging to
//! group `i` and `P_tau` is the minimax concave penalty. The threshold
//! `tau` is not free: [`certified_threshold`] picks it so that the
//! weights `theta = (N, ..., N)` are feasible for the multioperator
//! certificate with a 1% margin.
//!
//! Certification deliberately understates the data-fit moduli, scoring
//! each block as `1/(N ||D_i||^2)` instead of the true `1/||D_i||^2`.
//! A modulus-`sigma` comonotone operator is also comonotone for any
//! smaller modulus, so stepsizes certified against the understated
//! moduli remain certified for the problem actually solved; the slack
//! keeps the derived `tau` and stepsizes stable when the split, and
//! with it the true moduli, changes.

use opsplit::admm::BlockProblem;
use opsplit::functions::ProxFunction;
use opsplit::linalg::LinearMap;
use opsplit::{Error, Result, Vector};

/// Contiguous near-equal split of `n` coordinates into `blocks` groups;
/// earlier groups take the remainder.
pub fn split_sizes(n: usize, blocks: usize) -> Result<Vec<usize>> {
    if blocks == 0 || n < blocks {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} coordinates into {blocks} nonempty groups"
        )));
    }
    let base = n / blocks;
    let rem = n % blocks;
    Ok((0..blocks).map(|i| base + usize::from(i < rem)).collect())
}

/// Penalty threshold `tau = 1.01 N omega / alpha` with
/// `alpha = (1/N) min_i ||D_i||^{-2}`; returns `(tau, alpha)`.
///
/// With this choice every data-fit modulus satisfies
/// `sigma_i + N sigma_m >= alpha (1 - 1/1.01) > 0`, so the uniform
/// weights are feasible.
pub fn certified_threshold(blocks: usize, omega: f64, d_norms: &[f64]) -> Result<(f64, f64)> {
    if blocks == 0 || d_norms.len() != blocks {
        return Err(Error::InvalidArgument(format!(
            "expected {blocks} map norms, got {}",
            d_norms.len()
        )));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("penalty weight must be positive, got {omega}")));
    }
    if d_norms.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("map norms must be positive".into()));
    }
    let nf = blocks as f64;
    let alpha = d_norms.iter().map(|&v| 1.0 / (v * v)).fold(f64::INFINITY, f64::min) / nf;
    let tau = 1.01 * nf * omega / alpha;
    Ok((tau, alpha))
}

fn leading_maps(n: usize, blocks: usize) -> Result<Vec<LinearMap>> {
    let sizes = split_sizes(n, blocks)?;
    let mut maps = Vec::with_capacity(blocks);
    let mut start = 0;
    for len in sizes {
        maps.push(LinearMap::diff_block(n, start, len)?);
        start += len;
    }
    Ok(maps)
}

/// Assembles the `N + 1` block problem for a given threshold `tau`.
pub fn build_denoise_problem(
    noisy: &Vector,
    blocks: usize,
    omega: f64,
    tau: f64,
) -> Result<BlockProblem> {
    let n = noisy.len();
    if n < blocks + 1 {
        return Err(Error::InvalidArgument(format!(
            "signal of length {n} too short for {blocks} data blocks"
        )));
    }
    let maps = leading_maps(n, blocks)?;
    let mut f = Vec::with_capacity(blocks + 1);
    let mut start = 0;
    for map in &maps {
        let len = map.in_dim();
        // Unit modulus: each group keeps its full share of the data-fit
        // term, so concatenating the blocks solves the unsplit model.
        f.push(ProxFunction::quadratic(1.0, noisy.rows(start, len).into_owned())?);
        start += len;
    }
    f.push(ProxFunction::mcp(omega, tau, n - 1)?);
    let mut l = maps;
    l.push(LinearMap::scaled_identity(n - 1, -1.0)?);
    BlockProblem::new(f, l, Vector::zeros(n - 1))
}

/// A fully derived instance: the problem plus the quantities the
/// step-size rules and certificates consume.
#[derive(Debug, Clone)]
pub struct DenoiseSetup {
    pub problem: BlockProblem,
    pub tau: f64,
    /// Smallest certified data-fit modulus, `(1/N) min_i ||D_i||^{-2}`.
    pub alpha: f64,
    /// Aggregate penalty modulus `N sigma_m = -N omega / tau`.
    pub beta: f64,
    /// Certified per-operator moduli, data blocks first. These
    /// understate the problem's true moduli, so every certificate they
    /// yield covers the run.
    pub sigmas: Vec<f64>,
}

/// Derives `tau` from the difference-block norms, then assembles the
/// problem and its moduli.
pub fn build_denoise_setup(noisy: &Vector, blocks: usize, omega: f64) -> Result<DenoiseSetup> {
    let n = noisy.len();
    if n < blocks + 1 {
        return Err(Error::InvalidArgument(format!(
            "signal of length {n} too short for {blocks} data blocks"
        )));
    }
    let norms: Vec<f64> = leading_maps(n, blocks)?.iter().map(|m| m.norm()).collect();
    let (tau, alpha) = certified_threshold(blocks, omega, &norms)?;
    let problem = build_denoise_problem(noisy, blocks, omega, tau)?;
    let nf = blocks as f64;
    let mut sigmas: Vec<f64> = norms.iter().map(|&v| 1.0 / (nf * v * v)).collect();
    sigmas.push(-omega / tau);
    let beta = -nf * omega / tau;
    Ok(DenoiseSetup { problem, tau, alpha, beta, sigmas })
}
