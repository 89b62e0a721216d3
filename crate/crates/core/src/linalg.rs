//! Symmetric matrix functions and the polar projection onto the Stiefel manifold.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Columns with singular value ratio below this are treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;
const ORTHO_TOL: f64 = 1e-10;
const SYM_TOL: f64 = 1e-12;
const PD_EPS: f64 = 1e-12;

/// A p×k matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiOrthogonalMatrix(DMatrix<f64>);

impl SemiOrthogonalMatrix {
    /// Checks `QᵀQ = I` to 1e-10 in max-abs norm.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (p, k) = m.shape();
        if k == 0 || p < k {
            return Err(Error::DimensionMismatch(format!(
                "semi-orthogonal matrix needs p >= k >= 1, got {p}x{k}"
            )));
        }
        let dev = orthogonality_defect(&m);
        if dev > ORTHO_TOL {
            return Err(Error::NotOrthogonal { deviation: dev });
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// A symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Checks squareness and symmetry. Definiteness is checked by the functions that need it.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > SYM_TOL * scale {
            return Err(Error::Domain(format!(
                "matrix is not symmetric (defect {asym:e})"
            )));
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// `X = Q · S^{1/2}` with `S = XᵀX`.
#[derive(Debug, Clone)]
pub struct PolarFactors {
    pub q: SemiOrthogonalMatrix,
    pub s_sqrt: SpdMatrix,
}

/// max |QᵀQ − I|.
pub fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let k = g.nrows();
    (g - DMatrix::<f64>::identity(k, k)).amax()
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigendecomposition with a positive-definiteness check.
fn checked_eigen(s: &SpdMatrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let eig = SymmetricEigen::new(s.0.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let threshold = PD_EPS * max.abs().max(f64::MIN_POSITIVE);
    if !(min > threshold) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
            threshold,
        });
    }
    Ok(eig)
}

fn reassemble(vecs: &DMatrix<f64>, vals: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= vals[j];
    }
    symmetrize(&(scaled * vecs.transpose()))
}

/// Symmetric square root.
pub fn sqrt_spd(s: &SpdMatrix) -> Result<SpdMatrix> {
    let eig = checked_eigen(s)?;
    let vals = eig.eigenvalues.map(f64::sqrt);
    Ok(SpdMatrix(reassemble(&eig.eigenvectors, &vals)))
}

/// Symmetric inverse square root.
pub fn inv_sqrt_spd(s: &SpdMatrix) -> Result<SpdMatrix> {
    let eig = checked_eigen(s)?;
    let vals = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Ok(SpdMatrix(reassemble(&eig.eigenvectors, &vals)))
}

/// Square root of a symmetric PSD matrix; eigenvalues down to `-tol·λmax` are clamped to zero.
pub fn sqrt_psd(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.max().max(0.0);
    let min = eig.eigenvalues.min();
    if min < -tol * max.max(1.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(reassemble(&eig.eigenvectors, &vals))
}

/// Directional derivative of `s ↦ s^{-1/2}` along the symmetric direction `e`.
///
/// Daleckii–Krein on the eigenbasis. The divided difference of `λ^{-1/2}` is written as
/// `-1 / (√λi √λj (√λi + √λj))`, which has no cancellation for close eigenvalues.
pub fn frechet_inv_sqrt(s: &SpdMatrix, e: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if e.shape() != s.0.shape() {
        return Err(Error::DimensionMismatch(format!(
            "direction is {}x{}, matrix is {}x{}",
            e.nrows(),
            e.ncols(),
            s.dim(),
            s.dim()
        )));
    }
    let eig = checked_eigen(s)?;
    let r = eig.eigenvalues.map(f64::sqrt);
    Ok(frechet_in_basis(&eig.eigenvectors, &r, e, |a, b| {
        -1.0 / (a * b * (a + b))
    }))
}

/// `V (D ∘ VᵀEV) Vᵀ` where `D_ij = dd(r_i, r_j)` and `r` holds square roots of eigenvalues.
pub(crate) fn frechet_in_basis(
    vecs: &DMatrix<f64>,
    r: &DVector<f64>,
    e: &DMatrix<f64>,
    dd: impl Fn(f64, f64) -> f64,
) -> DMatrix<f64> {
    let mut t = vecs.transpose() * symmetrize(e) * vecs;
    let k = r.len();
    for j in 0..k {
        for i in 0..k {
            t[(i, j)] *= dd(r[i], r[j]);
        }
    }
    symmetrize(&(vecs * t * vecs.transpose()))
}

/// Thin SVD pieces of a full-rank p×k matrix: `X = U diag(d) Vᵀ`.
#[derive(Debug, Clone)]
pub(crate) struct Polar {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl Polar {
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (p, k) = x.shape();
        if k == 0 || p < k {
            return Err(Error::DimensionMismatch(format!(
                "polar projection needs p >= k >= 1, got {p}x{k}"
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let svd = x.clone().svd(true, true);
        let d = svd.singular_values;
        let (dmax, dmin) = (d.max(), d.min());
        let ratio = if dmax > 0.0 { dmin / dmax } else { 0.0 };
        if !(ratio >= RANK_TOL) {
            return Err(Error::RankDeficient { ratio });
        }
        let u = svd.u.expect("u requested");
        let v = svd.v_t.expect("v requested").transpose();
        Ok(Self { u, v, d })
    }

    pub fn q(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }

    /// `S^{-1/2} = V diag(1/d) Vᵀ`.
    pub fn inv_sqrt_s(&self) -> DMatrix<f64> {
        reassemble(&self.v, &self.d.map(|x| 1.0 / x))
    }
}

/// Nearest semi-orthogonal matrix `Q = X(XᵀX)^{-1/2}` and `S^{1/2}`.
pub fn polar_project(x: &DMatrix<f64>) -> Result<PolarFactors> {
    let polar = Polar::new(x)?;
    Ok(PolarFactors {
        q: SemiOrthogonalMatrix(polar.q()),
        s_sqrt: SpdMatrix(reassemble(&polar.v, &polar.d)),
    })
}

/// Polar factor only.
pub fn polar_q(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Polar::new(x).map(|p| p.q())
}

/// Gradient with respect to `X` of `g(Q(X))`, given `∇_Q g` at `Q(X)`.
pub fn polar_pullback_grad(x: &DMatrix<f64>, grad_q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let polar = Polar::new(x)?;
    pullback_with(&polar, x, grad_q)
}

pub(crate) fn pullback_with(
    polar: &Polar,
    x: &DMatrix<f64>,
    grad_q: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if grad_q.shape() != x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "gradient is {}x{}, matrix is {}x{}",
            grad_q.nrows(),
            grad_q.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    // ∇X = G S^{-1/2} + 2 X F(S, sym(XᵀG)), using F self-adjoint.
    let xtg = x.transpose() * grad_q;
    let m = frechet_in_basis(&polar.v, &polar.d, &xtg, |a, b| -1.0 / (a * b * (a + b)));
    Ok(grad_q * polar.inv_sqrt_s() + x * m * 2.0)
}

/// Matrix with i.i.d. standard normal entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed semi-orthogonal p×k matrix.
pub fn random_semi_orthogonal<R: Rng + ?Sized>(
    p: usize,
    k: usize,
    rng: &mut R,
) -> Result<SemiOrthogonalMatrix> {
    let x = gaussian_matrix(p, k, rng);
    polar_project(&x).map(|f| f.q)
}

/// log det of an SPD matrix via Cholesky.
pub fn logdet_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            min_eigenvalue: SymmetricEigen::new(m.clone()).eigenvalues.min(),
            threshold: 0.0,
        })?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>())
}

/// Cholesky factor `L` of `a` and its derivative `dL` along the symmetric direction `da`.
///
/// Forward-mode differentiation of the row-oriented recurrence. Returns `None` when `a` is
/// not numerically positive definite.
pub fn cholesky_with_tangent(a: &DMatrix<f64>, da: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n != a.ncols() || da.shape() != a.shape() {
        return None;
    }
    // Row-major lower triangles so the inner products run over contiguous memory.
    let mut l = vec![0.0; n * n];
    let mut dl = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (li, lj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            let (dli, dlj) = (&dl[i * n..i * n + j], &dl[j * n..j * n + j]);
            let (dot, ddot) = dot_with_tangent(li, lj, dli, dlj);
            let s = a[(i, j)] - dot;
            let ds = da[(i, j)] - ddot;
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                let d = s.sqrt();
                l[i * n + i] = d;
                dl[i * n + i] = 0.5 * ds / d;
            } else {
                let (d, dd) = (l[j * n + j], dl[j * n + j]);
                let v = s / d;
                l[i * n + j] = v;
                dl[i * n + j] = (ds - v * dd) / d;
            }
        }
    }
    Some((DMatrix::from_row_slice(n, n, &l), DMatrix::from_row_slice(n, n, &dl)))
}

/// `(x·y, dx·y + x·dy)` with independent partial sums so the loop vectorizes.
fn dot_with_tangent(x: &[f64], y: &[f64], dx: &[f64], dy: &[f64]) -> (f64, f64) {
    const W: usize = 4;
    let mut s = [0.0; W];
    let mut ds = [0.0; W];
    let chunks = x
        .chunks_exact(W)
        .zip(y.chunks_exact(W))
        .zip(dx.chunks_exact(W).zip(dy.chunks_exact(W)));
    for ((x, y), (dx, dy)) in chunks {
        for w in 0..W {
            s[w] += x[w] * y[w];
            ds[w] += dx[w] * y[w] + x[w] * dy[w];
        }
    }
    let (mut s, mut ds) = (s.iter().sum::<f64>(), ds.iter().sum::<f64>());
    let body = x.len() - x.len() % W;
    for m in body..x.len() {
        s += x[m] * y[m];
        ds += dx[m] * y[m] + x[m] * dy[m];
    }
    (s, ds)
}

/// Cholesky factor of the symmetric Toeplitz matrix with first row `t`, and its derivative
/// along the Toeplitz direction with first row `dt`, by the Schur algorithm in O(n²).
///
/// The hyperbolic rotations use the mixed form, which is stable for positive definite input.
pub fn toeplitz_cholesky_with_tangent(t: &[f64], dt: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n = t.len();
    if n == 0 || dt.len() != n || !(t[0] > 0.0) {
        return None;
    }
    let r0 = t[0].sqrt();
    let dr0 = 0.5 * dt[0] / r0;
    // Generators, valid from index k on at step k.
    let mut u: Vec<f64> = t.iter().map(|x| x / r0).collect();
    let mut du: Vec<f64> = t.iter().zip(dt).map(|(x, dx)| (dx - x * dr0 / r0) / r0).collect();
    let mut v = u.clone();
    let mut dv = du.clone();
    v[0] = 0.0;
    dv[0] = 0.0;
    let mut l = DMatrix::zeros(n, n);
    let mut dl = DMatrix::zeros(n, n);
    for k in 0..n {
        if !(u[k] > 0.0) {
            return None;
        }
        l.view_mut((k, k), (n - k, 1)).copy_from_slice(&u[k..]);
        dl.view_mut((k, k), (n - k, 1)).copy_from_slice(&du[k..]);
        if k + 1 == n {
            break;
        }
        u.copy_within(k..n - 1, k + 1);
        du.copy_within(k..n - 1, k + 1);
        let g = v[k + 1] / u[k + 1];
        if !(g.abs() < 1.0) {
            return None;
        }
        let dg = (dv[k + 1] - g * du[k + 1]) / u[k + 1];
        let s = ((1.0 - g) * (1.0 + g)).sqrt();
        let ds = -g * dg / s;
        for i in k + 1..n {
            let un = (u[i] - g * v[i]) / s;
            let dun = (du[i] - dg * v[i] - g * dv[i] - un * ds) / s;
            let vn = s * v[i] - g * un;
            let dvn = ds * v[i] + s * dv[i] - dg * un - g * dun;
            u[i] = un;
            du[i] = dun;
            v[i] = vn;
            dv[i] = dvn;
        }
        v[k + 1] = 0.0;
        dv[k + 1] = 0.0;
    }
    Some((l, dl))
}

/// Largest |eigenvalue| of a symmetric matrix.
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
