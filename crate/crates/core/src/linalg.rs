//! Dense vectors, structured linear maps and positive definite solves.
//!
//! Everything downstream works against [`LinearMap`] instead of raw
//! matrices: the map knows how to apply itself and its adjoint, estimate
//! its operator norm, and expose structure (a first-order difference block
//! has a tridiagonal Gram matrix) that the subproblem solvers exploit.

use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Column vector over `f64`.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix over `f64`.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Default relative tolerance for operator-norm estimation.
pub const OP_NORM_TOL: f64 = 1e-10;
/// Default iteration cap for operator-norm estimation.
pub const OP_NORM_MAX_ITER: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
enum MapKind {
    /// Explicit dense matrix.
    Dense(Matrix),
    /// `scale * I` on `dim` coordinates.
    ScaledIdentity { dim: usize, scale: f64 },
    /// Columns `[start, start + len)` of the (n-1) x n first-order
    /// difference matrix with rows `e_i - e_{i+1}`.
    DiffBlock { n: usize, start: usize, len: usize },
}

/// A linear operator between finite-dimensional spaces.
///
/// The operator norm is estimated once on demand and cached; the cache is
/// safe to share across threads because the map is immutable after
/// construction.
pub struct LinearMap {
    kind: MapKind,
    norm_cache: OnceLock<f64>,
}

impl Clone for LinearMap {
    fn clone(&self) -> Self {
        let norm_cache = OnceLock::new();
        if let Some(v) = self.norm_cache.get() {
            let _ = norm_cache.set(*v);
        }
        LinearMap { kind: self.kind.clone(), norm_cache }
    }
}

impl std::fmt::Debug for LinearMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            MapKind::Dense(m) => write!(f, "LinearMap::Dense({}x{})", m.nrows(), m.ncols()),
            MapKind::ScaledIdentity { dim, scale } => {
                write!(f, "LinearMap::ScaledIdentity({scale} * I_{dim})")
            }
            MapKind::DiffBlock { n, start, len } => {
                write!(f, "LinearMap::DiffBlock(n={n}, cols {start}..{})", start + len)
            }
        }
    }
}

impl LinearMap {
    /// Wraps a dense matrix. Empty matrices are rejected.
    pub fn dense(mat: Matrix) -> Result<Self> {
        if mat.nrows() == 0 || mat.ncols() == 0 {
            return Err(Error::InvalidArgument("dense map must be nonempty".into()));
        }
        Ok(LinearMap { kind: MapKind::Dense(mat), norm_cache: OnceLock::new() })
    }

    /// The map `scale * I` on `dim` coordinates. `scale` may be zero or
    /// negative; invertibility is checked where it is needed.
    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("identity map needs dim >= 1".into()));
        }
        if !scale.is_finite() {
            return Err(Error::InvalidArgument("identity scale must be finite".into()));
        }
        Ok(LinearMap { kind: MapKind::ScaledIdentity { dim, scale }, norm_cache: OnceLock::new() })
    }

    /// Identity on `dim` coordinates.
    pub fn identity(dim: usize) -> Result<Self> {
        Self::scaled_identity(dim, 1.0)
    }

    /// Columns `[start, start + len)` of the first-order difference matrix
    /// on `n` points (shape `(n-1) x len`).
    pub fn diff_block(n: usize, start: usize, len: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "difference matrix needs n >= 2, got n = {n}"
            )));
        }
        if len == 0 || start + len > n {
            return Err(Error::InvalidArgument(format!(
                "column range {start}..{} out of bounds for {n} columns",
                start + len
            )));
        }
        Ok(LinearMap { kind: MapKind::DiffBlock { n, start, len }, norm_cache: OnceLock::new() })
    }

    /// Number of input coordinates.
    pub fn in_dim(&self) -> usize {
        match &self.kind {
            MapKind::Dense(m) => m.ncols(),
            MapKind::ScaledIdentity { dim, .. } => *dim,
            MapKind::DiffBlock { len, .. } => *len,
        }
    }

    /// Number of output coordinates.
    pub fn out_dim(&self) -> usize {
        match &self.kind {
            MapKind::Dense(m) => m.nrows(),
            MapKind::ScaledIdentity { dim, .. } => *dim,
            MapKind::DiffBlock { n, .. } => *n - 1,
        }
    }

    /// Applies the map. Panics on a dimension mismatch; constructors are
    /// the checked boundary.
    pub fn apply(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.in_dim(), "LinearMap::apply dimension mismatch");
        match &self.kind {
            MapKind::Dense(m) => m * x,
            MapKind::ScaledIdentity { scale, .. } => x * *scale,
            MapKind::DiffBlock { n, start, len } => {
                // Row i of the full matrix reads +x[i] - x[i+1]; only the
                // columns inside [start, start+len) contribute here.
                let mut out = Vector::zeros(*n - 1);
                for j in 0..*len {
                    let g = start + j;
                    if g < n - 1 {
                        out[g] += x[j];
                    }
                    if g > 0 {
                        out[g - 1] -= x[j];
                    }
                }
                out
            }
        }
    }

    /// Applies the adjoint (transpose). Panics on a dimension mismatch.
    pub fn adjoint_apply(&self, y: &Vector) -> Vector {
        assert_eq!(y.len(), self.out_dim(), "LinearMap::adjoint_apply dimension mismatch");
        match &self.kind {
            MapKind::Dense(m) => m.transpose() * y,
            MapKind::ScaledIdentity { scale, .. } => y * *scale,
            MapKind::DiffBlock { n, start, len } => {
                let mut out = Vector::zeros(*len);
                for j in 0..*len {
                    let g = start + j;
                    let mut v = 0.0;
                    if g < n - 1 {
                        v += y[g];
                    }
                    if g > 0 {
                        v -= y[g - 1];
                    }
                    out[j] = v;
                }
                out
            }
        }
    }

    /// Materializes the map as a dense matrix.
    pub fn to_dense(&self) -> Matrix {
        match &self.kind {
            MapKind::Dense(m) => m.clone(),
            MapKind::ScaledIdentity { dim, scale } => Matrix::identity(*dim, *dim) * *scale,
            MapKind::DiffBlock { n, start, len } => {
                let mut m = Matrix::zeros(*n - 1, *len);
                for j in 0..*len {
                    let g = start + j;
                    if g < n - 1 {
                        m[(g, j)] = 1.0;
                    }
                    if g > 0 {
                        m[(g - 1, j)] = -1.0;
                    }
                }
                m
            }
        }
    }

    /// True when the map is `scale * I`; returns the scale.
    pub fn as_scaled_identity(&self) -> Option<f64> {
        match &self.kind {
            MapKind::ScaledIdentity { scale, .. } => Some(*scale),
            _ => None,
        }
    }

    /// Tridiagonal representation of the Gram matrix `L^T L` when the map
    /// structure provides one: `(diagonal, subdiagonal)`.
    pub fn gram_tridiag(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.kind {
            MapKind::ScaledIdentity { dim, scale } => {
                Some((vec![scale * scale; *dim], vec![0.0; dim.saturating_sub(1)]))
            }
            MapKind::DiffBlock { n, start, len } => {
                // Column g of the difference matrix has a +1 in row g
                // (absent for the last column overall) and a -1 in row g-1
                // (absent for the first); adjacent in-block columns share
                // exactly one row.
                let mut diag = vec![2.0; *len];
                if *start == 0 {
                    diag[0] = 1.0;
                }
                if start + len == *n {
                    diag[*len - 1] = 1.0;
                }
                let off = vec![-1.0; len - 1];
                Some((diag, off))
            }
            MapKind::Dense(_) => None,
        }
    }

    /// The inverse as a map, for square invertible structures.
    pub fn inverse_map(&self) -> Result<LinearMap> {
        match &self.kind {
            MapKind::ScaledIdentity { dim, scale } => {
                if *scale == 0.0 {
                    return Err(Error::InvalidArgument("zero map has no inverse".into()));
                }
                LinearMap::scaled_identity(*dim, 1.0 / scale)
            }
            MapKind::Dense(m) => {
                if m.nrows() != m.ncols() {
                    return Err(Error::DimensionMismatch(format!(
                        "inverse of a {}x{} map",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                let inv = m.clone().try_inverse().ok_or_else(|| {
                    Error::InvalidArgument("dense map is singular".into())
                })?;
                LinearMap::dense(inv)
            }
            MapKind::DiffBlock { .. } => Err(Error::DimensionMismatch(
                "difference block is not square".into(),
            )),
        }
    }

    /// Operator norm with default tolerance and iteration cap; the value
    /// is computed once and cached.
    pub fn norm(&self) -> f64 {
        *self
            .norm_cache
            .get_or_init(|| op_norm(self, OP_NORM_TOL, OP_NORM_MAX_ITER).value)
    }
}

/// Outcome of the power-iteration norm estimate.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    /// Largest singular value estimate.
    pub value: f64,
    /// False when the iteration cap was reached before the Rayleigh
    /// quotient settled; the value is still the best estimate found.
    pub converged: bool,
    /// Iterations actually performed.
    pub iterations: usize,
}

/// Estimates the largest singular value of `map` by power iteration on
/// `L^T L` with a deterministic seeded start vector.
///
/// A scaled identity is returned exactly. Convergence is declared when the
/// Rayleigh quotient changes by at most `tol` in relative terms; spectra
/// with clustered leading singular values may exhaust `max_iter` first, in
/// which case the estimate is returned with `converged = false`.
pub fn op_norm(map: &LinearMap, tol: f64, max_iter: usize) -> NormEstimate {
    if let Some(s) = map.as_scaled_identity() {
        return NormEstimate { value: s.abs(), converged: true, iterations: 0 };
    }
    let dim = map.in_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0001);
    let mut v = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    let nv = v.norm();
    if nv == 0.0 {
        v[0] = 1.0;
    } else {
        v /= nv;
    }
    let mut lambda_prev = f64::NAN;
    for k in 1..=max_iter {
        let lv = map.apply(&v);
        let lambda = lv.norm_squared();
        if lambda == 0.0 {
            // The start vector lies in the kernel only if the map is zero
            // on its span; a second random vector resolves the ambiguity
            // cheaply, and a genuinely zero map returns zero.
            let w = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
            let lw = map.apply(&w);
            if lw.norm() == 0.0 {
                return NormEstimate { value: 0.0, converged: true, iterations: k };
            }
            let wn = w.norm();
            v = w / wn;
            continue;
        }
        let mut next = map.adjoint_apply(&lv);
        let nn = next.norm();
        if nn == 0.0 {
            return NormEstimate { value: lambda.sqrt(), converged: true, iterations: k };
        }
        next /= nn;
        if !lambda_prev.is_nan() {
            let rel = (lambda - lambda_prev).abs() / lambda.max(f64::MIN_POSITIVE);
            if rel <= tol {
                return NormEstimate { value: lambda.sqrt(), converged: true, iterations: k };
            }
        }
        lambda_prev = lambda;
        v = next;
    }
    NormEstimate {
        value: map.apply(&v).norm(),
        converged: false,
        iterations: max_iter,
    }
}

/// The `(n-1) x n` first-order difference matrix with rows `e_i - e_{i+1}`,
/// as a structured map.
pub fn difference_matrix(n: usize) -> Result<LinearMap> {
    LinearMap::diff_block(n, 0, n)
}

/// A reusable symmetric positive definite solve: factor once, solve many.
pub enum SpdSolver {
    /// Dense Cholesky factorization.
    Dense { chol: nalgebra::Cholesky<f64, nalgebra::Dyn> },
    /// LDL^T factorization of a tridiagonal matrix: `sub[i]` couples rows
    /// `i` and `i+1`.
    Tridiag { diag: Vec<f64>, sub: Vec<f64> },
}

impl std::fmt::Debug for SpdSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpdSolver::Dense { chol } => write!(f, "SpdSolver::Dense(dim={})", chol.l_dirty().nrows()),
            SpdSolver::Tridiag { diag, .. } => write!(f, "SpdSolver::Tridiag(dim={})", diag.len()),
        }
    }
}

impl SpdSolver {
    /// Factors a dense symmetric positive definite matrix.
    pub fn dense(mat: &Matrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "SPD solve needs a square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let chol = nalgebra::Cholesky::new(mat.clone()).ok_or_else(|| {
            Error::NotPositiveDefinite(format!("{}x{} Cholesky failed", mat.nrows(), mat.ncols()))
        })?;
        Ok(SpdSolver::Dense { chol })
    }

    /// Factors a symmetric positive definite tridiagonal matrix given by
    /// its diagonal and subdiagonal.
    pub fn tridiagonal(diag: &[f64], sub: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty tridiagonal system".into()));
        }
        if sub.len() + 1 != n {
            return Err(Error::DimensionMismatch(format!(
                "tridiagonal subdiagonal has {} entries for dimension {n}",
                sub.len()
            )));
        }
        // LDL^T without pivoting; positive pivots certify positive
        // definiteness for symmetric tridiagonal input.
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = diag[0];
        if d[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite("tridiagonal pivot 0 <= 0".into()));
        }
        for i in 0..n - 1 {
            l[i] = sub[i] / d[i];
            d[i + 1] = diag[i + 1] - l[i] * sub[i];
            if d[i + 1] <= 0.0 {
                return Err(Error::NotPositiveDefinite(format!(
                    "tridiagonal pivot {} <= 0",
                    i + 1
                )));
            }
        }
        Ok(SpdSolver::Tridiag { diag: d, sub: l })
    }

    /// Dimension of the factored matrix.
    pub fn dim(&self) -> usize {
        match self {
            SpdSolver::Dense { chol } => chol.l_dirty().nrows(),
            SpdSolver::Tridiag { diag, .. } => diag.len(),
        }
    }

    /// Solves `M x = rhs` against the stored factorization.
    pub fn solve(&self, rhs: &Vector) -> Vector {
        assert_eq!(rhs.len(), self.dim(), "SpdSolver::solve dimension mismatch");
        match self {
            SpdSolver::Dense { chol } => chol.solve(rhs),
            SpdSolver::Tridiag { diag, sub } => {
                let n = diag.len();
                let mut x = rhs.clone();
                for i in 1..n {
                    let t = sub[i - 1] * x[i - 1];
                    x[i] -= t;
                }
                for i in 0..n {
                    x[i] /= diag[i];
                }
                for i in (0..n - 1).rev() {
                    let t = sub[i] * x[i + 1];
                    x[i] -= t;
                }
                x
            }
        }
    }
}

/// Factors a dense symmetric positive definite matrix into a reusable
/// solver handle. Non-SPD input is a distinct error.
pub fn cached_spd_solver(mat: &Matrix) -> Result<SpdSolver> {
    SpdSolver::dense(mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dense_op_norm(map: &LinearMap) -> f64 {
        map.to_dense().svd(false, false).singular_values.max()
    }

    #[test]
    fn difference_matrix_small() {
        let d = difference_matrix(3).unwrap();
        let m = d.to_dense();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m.ncols(), 3);
        let expected = Matrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        assert_eq!(m, expected);
    }

    #[test]
    fn difference_matrix_annihilates_constants() {
        for n in 2..50 {
            let d = difference_matrix(n).unwrap();
            let ones = Vector::from_element(n, 1.0);
            assert_eq!(d.apply(&ones).norm(), 0.0);
        }
    }

    #[test]
    fn difference_matrix_rejects_degenerate_sizes() {
        assert!(difference_matrix(1).is_err());
        assert!(difference_matrix(0).is_err());
    }

    #[test]
    fn diff_block_matches_dense_column_slice() {
        let n = 9;
        let full = difference_matrix(n).unwrap().to_dense();
        for (start, len) in [(0usize, 4usize), (4, 3), (7, 2), (0, 9)] {
            let block = LinearMap::diff_block(n, start, len).unwrap();
            let dense = block.to_dense();
            assert_eq!(dense, full.columns(start, len).into_owned());
        }
    }

    #[test]
    fn apply_and_adjoint_are_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let maps = vec![
            LinearMap::dense(Matrix::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0))).unwrap(),
            LinearMap::scaled_identity(5, -2.5).unwrap(),
            LinearMap::diff_block(8, 2, 4).unwrap(),
            difference_matrix(6).unwrap(),
        ];
        for map in &maps {
            for _ in 0..100 {
                let x = Vector::from_fn(map.in_dim(), |_, _| rng.random_range(-1.0..1.0));
                let y = Vector::from_fn(map.out_dim(), |_, _| rng.random_range(-1.0..1.0));
                let lhs = map.apply(&x).dot(&y);
                let rhs = x.dot(&map.adjoint_apply(&y));
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * (1.0 + lhs.abs()));
            }
        }
    }

    #[test]
    fn op_norm_identity_is_one() {
        let id = LinearMap::identity(7).unwrap();
        let est = op_norm(&id, 1e-10, 5000);
        assert_eq!(est.value, 1.0);
        assert!(est.converged);
    }

    #[test]
    fn op_norm_diagonal_picks_largest_entry() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 1.0]));
        let map = LinearMap::dense(m).unwrap();
        let est = op_norm(&map, 1e-12, 5000);
        assert_abs_diff_eq!(est.value, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn op_norm_zero_map() {
        let map = LinearMap::dense(Matrix::zeros(3, 4)).unwrap();
        let est = op_norm(&map, 1e-10, 100);
        assert_eq!(est.value, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn op_norm_matches_svd_on_difference_matrix() {
        let d = difference_matrix(5).unwrap();
        let est = op_norm(&d, 1e-12, 5000);
        assert!(est.converged);
        assert_abs_diff_eq!(est.value, dense_op_norm(&d), epsilon = 1e-8);
    }

    #[test]
    fn op_norm_of_difference_matrix_below_two_and_monotone() {
        let mut prev = 0.0;
        for n in 2..50 {
            let d = difference_matrix(n).unwrap();
            let v = op_norm(&d, 1e-12, 5000).value;
            assert!(v < 2.0, "norm {v} at n = {n}");
            assert!(v >= prev - 1e-9, "norm decreased at n = {n}");
            prev = v;
        }
    }

    #[test]
    fn gram_tridiag_matches_dense_gram() {
        let n = 10;
        for (start, len) in [(0usize, 5usize), (5, 5), (2, 6), (0, 10)] {
            let block = LinearMap::diff_block(n, start, len).unwrap();
            let (diag, sub) = block.gram_tridiag().unwrap();
            let dense = block.to_dense();
            let gram = dense.transpose() * &dense;
            for j in 0..len {
                assert_abs_diff_eq!(gram[(j, j)], diag[j], epsilon = 1e-14);
                if j + 1 < len {
                    assert_abs_diff_eq!(gram[(j + 1, j)], sub[j], epsilon = 1e-14);
                }
            }
            // No coupling beyond the first off-diagonal.
            for j in 0..len {
                for i in j + 2..len {
                    assert_eq!(gram[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn spd_solver_identity_and_scaled() {
        let s = cached_spd_solver(&Matrix::identity(3, 3)).unwrap();
        let b = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.solve(&b), b);

        let s2 = cached_spd_solver(&(Matrix::identity(2, 2) * 2.0)).unwrap();
        let b2 = Vector::from_vec(vec![4.0, 6.0]);
        assert!((s2.solve(&b2) - Vector::from_vec(vec![2.0, 3.0])).norm() <= 1e-12);
    }

    #[test]
    fn spd_solver_random_system_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = Matrix::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
        let m = &a.transpose() * &a + Matrix::identity(10, 10);
        let solver = cached_spd_solver(&m).unwrap();
        let b = Vector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
        let x = solver.solve(&b);
        assert!((&m * &x - &b).norm() <= 1e-10);
    }

    #[test]
    fn spd_solver_rejects_indefinite() {
        // Eigenvalues -1 and 3.
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cached_spd_solver(&m) {
            Err(Error::NotPositiveDefinite(_)) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn tridiagonal_solver_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in [1usize, 2, 3, 17, 80] {
            let diag: Vec<f64> = (0..n).map(|_| rng.random_range(2.0..4.0)).collect();
            let sub: Vec<f64> = (0..n.saturating_sub(1))
                .map(|_| rng.random_range(-0.9..0.9))
                .collect();
            let mut dense = Matrix::zeros(n, n);
            for i in 0..n {
                dense[(i, i)] = diag[i];
                if i + 1 < n {
                    dense[(i + 1, i)] = sub[i];
                    dense[(i, i + 1)] = sub[i];
                }
            }
            let tri = SpdSolver::tridiagonal(&diag, &sub).unwrap();
            let full = cached_spd_solver(&dense).unwrap();
            let b = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            assert!((tri.solve(&b) - full.solve(&b)).norm() <= 1e-10);
        }
    }

    #[test]
    fn tridiagonal_solver_rejects_indefinite() {
        assert!(SpdSolver::tridiagonal(&[1.0, 1.0], &[2.0]).is_err());
    }
}
