//! Dense complex matrices and the handful of linear-algebra primitives the
//! rest of the crate is built on.
//!
//! Tensor products use the row-major block convention: in `kron(a, b)` the
//! indices of `a` are major, so entry `((i,k),(j,l))` sits at row
//! `i * b.rows() + k` and column `j * b.cols() + l`. Composite spaces are
//! always laid out as `H ⊗ K` with the partial trace taken over `K`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default absolute tolerance.
pub const DEFAULT_ATOL: f64 = 1e-9;

/// Environment variable overriding the default tolerance.
pub const TOL_ENV_VAR: &str = "QCOND_TOL";

/// Absolute tolerance applied entrywise and to eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    atol: f64,
}

impl Tolerance {
    pub fn new(atol: f64) -> Result<Self> {
        if atol.is_finite() && atol > 0.0 {
            Ok(Tolerance { atol })
        } else {
            Err(Error::invariant(
                "tolerance",
                format!("atol must be finite and positive, got {atol}"),
            ))
        }
    }

    pub fn atol(self) -> f64 {
        self.atol
    }

    /// Default tolerance, overridden by `QCOND_TOL` when it parses to a valid value.
    pub fn from_env() -> Self {
        std::env::var(TOL_ENV_VAR)
            .ok()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .and_then(|v| Tolerance::new(v).ok())
            .unwrap_or_default()
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { atol: DEFAULT_ATOL }
    }
}

/// Dense complex matrix. Entries are always finite.
#[derive(Clone, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMatrix {}x{} ", self.rows(), self.cols())?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl CMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dims("matrix dimensions must be positive"));
        }
        if entries.len() != rows * cols {
            return Err(Error::dims(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::invariant(
                "finiteness",
                "matrix has NaN or infinite entries",
            ));
        }
        Ok(CMatrix(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::dims("ragged rows"));
        }
        CMatrix::from_row_major(rows.len(), ncols, rows.concat())
    }

    /// Real-valued convenience constructor. Panics on ragged or empty input.
    pub fn real(rows: &[&[f64]]) -> Self {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        CMatrix::from_rows(&rows).expect("real matrix literal")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        CMatrix(m)
    }

    /// The matrix unit `|i⟩⟨j|` of the given shape.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(rows, cols);
        m[(i, j)] = ONE;
        CMatrix(m)
    }

    /// Column vector.
    pub fn ket(entries: &[C64]) -> Self {
        CMatrix(DMatrix::from_column_slice(entries.len(), 1, entries))
    }

    /// Computational basis vector `|i⟩` in dimension `n`.
    pub fn basis_ket(n: usize, i: usize) -> Self {
        CMatrix::unit(n, 1, i, 0)
    }

    /// Rank-one projector `|v⟩⟨v|` for a column vector `v`.
    pub fn projector(v: &CMatrix) -> Self {
        v * &v.adjoint()
    }

    pub(crate) fn from_inner(m: DMatrix<C64>) -> Self {
        CMatrix(m)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> C64 {
        self.0.diagonal().iter().sum()
    }

    pub fn adjoint(&self) -> Self {
        CMatrix(self.0.adjoint())
    }

    pub fn scale(&self, factor: f64) -> Self {
        CMatrix(self.0.map(|z| z * factor))
    }

    pub fn scale_complex(&self, factor: C64) -> Self {
        CMatrix(self.0.map(|z| z * factor))
    }

    /// `(m + m†)/2`.
    pub fn hermitian_part(&self) -> Self {
        CMatrix((&self.0 + self.0.adjoint()).map(|z| z * 0.5))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Largest entrywise modulus of `self - other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn approx_eq(&self, other: &CMatrix, tol: Tolerance) -> bool {
        self.max_abs_diff(other) <= tol.atol()
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// Column `j` as a column vector.
    pub fn column(&self, j: usize) -> Self {
        CMatrix(DMatrix::from_iterator(
            self.rows(),
            1,
            self.0.column(j).iter().copied(),
        ))
    }

    /// Sum of a nonempty iterator of equally shaped matrices.
    pub fn sum<'a>(mut items: impl Iterator<Item = &'a CMatrix>) -> Option<CMatrix> {
        let first = items.next()?.clone();
        Some(items.fold(first, |acc, m| &acc + m))
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl Add for CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: CMatrix) -> CMatrix {
        CMatrix(self.0 + rhs.0)
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        self.0 += &rhs.0;
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

impl Sub for CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: CMatrix) -> CMatrix {
        CMatrix(self.0 - rhs.0)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl Mul for CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: CMatrix) -> CMatrix {
        CMatrix(self.0 * rhs.0)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

/// Conjugate transpose.
pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Kronecker product, `a`'s indices major.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a.0[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b.0[(k, l)];
                }
            }
        }
    }
    CMatrix(out)
}

/// Partial trace over the right factor of `H ⊗ K`.
pub fn partial_trace_right(m: &CMatrix, dim_h: usize, dim_k: usize) -> Result<CMatrix> {
    let n = dim_h * dim_k;
    if dim_h == 0 || dim_k == 0 || m.shape() != (n, n) {
        return Err(Error::dims(format!(
            "partial trace of a {}x{} matrix over {dim_h}x{dim_k}",
            m.rows(),
            m.cols()
        )));
    }
    let mut out = DMatrix::zeros(dim_h, dim_h);
    for i in 0..dim_h {
        for j in 0..dim_h {
            out[(i, j)] = (0..dim_k)
                .map(|k| m.0[(i * dim_k + k, j * dim_k + k)])
                .sum();
        }
    }
    Ok(CMatrix(out))
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    debug_assert_eq!(a.cols(), b.rows());
    debug_assert_eq!(a.rows(), b.cols());
    let mut acc = ZERO;
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            acc += a.0[(i, k)] * b.0[(k, i)];
        }
    }
    acc
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.rows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m.0[(i, j)] - m.0[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
///
/// Eigenvectors are returned as the columns of the second component.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = m.hermitian_part();
    let eig = h.0.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.rows(), m.rows(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, CMatrix(vectors))
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).0.first().copied().unwrap_or(0.0)
}

/// Spectral factors `(λ, |v⟩)` of a PSD operator with `λ > 0`.
///
/// Eigenvalues within `[-atol, 0)` are clipped to zero and dropped together
/// with exact zeros; anything more negative is an error.
pub fn psd_factors(m: &CMatrix, tol: Tolerance) -> Result<Vec<(f64, CMatrix)>> {
    let (values, vectors) = eigh(m);
    let mut out = Vec::new();
    for (k, &lambda) in values.iter().enumerate() {
        if lambda < -tol.atol() {
            return Err(Error::invariant(
                "positivity",
                format!("eigenvalue {lambda:e} below -{:e}", tol.atol()),
            ));
        }
        if lambda > 0.0 {
            out.push((lambda, vectors.column(k)));
        }
    }
    Ok(out)
}

/// Positive square root of a PSD operator (clipped spectrum).
pub fn psd_sqrt(m: &CMatrix, tol: Tolerance) -> Result<CMatrix> {
    let n = m.rows();
    let mut out = CMatrix::zeros(n, n);
    for (lambda, v) in psd_factors(m, tol)? {
        out += &CMatrix::projector(&v).scale(lambda.sqrt());
    }
    Ok(out)
}

/// `m^{-1/2}` for a positive definite `m`; fails when the smallest eigenvalue is not above `atol`.
pub fn inverse_sqrt(m: &CMatrix, tol: Tolerance) -> Result<CMatrix> {
    let (values, vectors) = eigh(m);
    if values.first().is_none_or(|&v| v <= tol.atol()) {
        return Err(Error::Decomposition(
            "matrix is singular or not positive definite".into(),
        ));
    }
    let n = m.rows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        out += &CMatrix::projector(&vectors.column(k)).scale(lambda.sqrt().recip());
    }
    Ok(out)
}

/// Hermitian within `atol` and smallest eigenvalue of `(m+m†)/2` at least `-atol`.
pub fn is_psd(m: &CMatrix, tol: Tolerance) -> bool {
    m.is_square() && hermiticity_defect(m) <= tol.atol() && min_eigenvalue(m) >= -tol.atol()
}

/// `0 ≤ m ≤ I` within tolerance.
pub fn is_effect(m: &CMatrix, tol: Tolerance) -> bool {
    is_psd(m, tol) && is_psd(&(&CMatrix::identity(m.rows()) - m), tol)
}

/// A Hermitian spanning set of the `n×n` matrices: `|i⟩⟨i|`, `|i⟩⟨j|+|j⟩⟨i|`
/// and `i(|i⟩⟨j|-|j⟩⟨i|)` for `i < j`. Linear maps agree iff they agree here.
pub fn hermitian_basis(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(CMatrix::unit(n, n, i, i));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let eij = CMatrix::unit(n, n, i, j);
            let eji = CMatrix::unit(n, n, j, i);
            out.push(&eij + &eji);
            out.push((&eij - &eji).scale_complex(I));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample(rows: usize, cols: usize, salt: f64) -> CMatrix {
        let entries = (0..rows * cols)
            .map(|k| {
                let t = k as f64 + salt;
                c((1.3 * t).sin(), (0.7 * t + 0.2).cos())
            })
            .collect();
        CMatrix::from_row_major(rows, cols, entries).unwrap()
    }

    #[test]
    fn adjoint_examples() {
        let n = CMatrix::real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(adjoint(&n), CMatrix::real(&[&[0.0, 0.0], &[1.0, 0.0]]));
        assert_eq!(adjoint(&CMatrix::identity(3)), CMatrix::identity(3));
        let i1 = CMatrix::from_rows(&[vec![c(0.0, 1.0)]]).unwrap();
        assert_eq!(adjoint(&i1).get(0, 0), c(0.0, -1.0));
        let m = sample(3, 2, 0.1);
        assert_eq!(adjoint(&adjoint(&m)), m);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(CMatrix::from_row_major(2, 2, vec![ONE; 3]).is_err());
        assert!(CMatrix::from_row_major(0, 2, vec![]).is_err());
        assert!(CMatrix::from_row_major(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
        assert!(CMatrix::from_rows(&[vec![ONE], vec![ONE, ONE]]).is_err());
    }

    #[test]
    fn kron_examples() {
        assert_eq!(
            kron(&CMatrix::identity(2), &CMatrix::identity(2)),
            CMatrix::identity(4)
        );
        assert_eq!(
            kron(&CMatrix::diag(&[1.0, 0.0]), &CMatrix::diag(&[0.0, 1.0])),
            CMatrix::diag(&[0.0, 1.0, 0.0, 0.0])
        );
        let a = sample(2, 2, 0.3);
        let b = sample(2, 2, 1.9);
        let lhs = kron(&a, &b).trace();
        let rhs = a.trace() * b.trace();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn kron_block_layout_and_associativity() {
        let a = sample(2, 3, 0.0);
        let b = sample(3, 2, 5.0);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 6));
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..2 {
                        assert_eq!(k.get(i * 3 + p, j * 2 + q), a.get(i, j) * b.get(p, q));
                    }
                }
            }
        }
        let cm = sample(2, 2, 9.0);
        let left = kron(&kron(&a, &b), &cm);
        let right = kron(&a, &kron(&b, &cm));
        assert!(left.max_abs_diff(&right) < 1e-15);
    }

    #[test]
    fn partial_trace_examples() {
        let rho = CMatrix::real(&[&[0.25, 0.1], &[0.1, 0.75]]);
        let sigma = CMatrix::real(&[&[0.6, 0.0], &[0.0, 0.4]]);
        let pt = partial_trace_right(&kron(&rho, &sigma), 2, 2).unwrap();
        assert!(pt.max_abs_diff(&rho) < 1e-15);

        let pt = partial_trace_right(&CMatrix::identity(4), 2, 2).unwrap();
        assert_eq!(pt, CMatrix::identity(2).scale(2.0));

        assert!(partial_trace_right(&CMatrix::identity(4), 3, 2).is_err());
    }

    #[test]
    fn partial_trace_matches_index_summation() {
        let g = sample(4, 4, 2.2);
        let m = (&g + &g.adjoint()).scale(0.5);
        let pt = partial_trace_right(&m, 2, 2).unwrap();
        // entry (i,j) = Σ_k m[(i,k),(j,k)]
        let mut oracle = [[ZERO; 2]; 2];
        for (i, row) in oracle.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                for k in 0..2 {
                    *e += m.to_rows()[2 * i + k][2 * j + k];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((pt.get(i, j) - oracle[i][j]).norm() < 1e-14);
            }
        }
        assert!((pt.trace() - m.trace()).norm() < 1e-14);
    }

    #[test]
    fn psd_and_effect_examples() {
        let tol = Tolerance::default();
        assert!(is_psd(&CMatrix::diag(&[1.0, 0.0]), tol));
        assert!(!is_psd(&CMatrix::diag(&[1.0, -1e-3]), tol));
        assert!(!is_psd(&CMatrix::real(&[&[0.0, 1.0], &[0.0, 0.0]]), tol));
        assert!(!is_psd(&sample(2, 3, 0.0), tol));

        for n in 1..5 {
            assert!(is_effect(&CMatrix::identity(n).scale(0.5), tol));
            assert!(!is_effect(&CMatrix::identity(n).scale(2.0), tol));
        }
        let v = CMatrix::ket(&[c(0.6, 0.0), c(0.0, 0.8)]);
        let p = CMatrix::projector(&v);
        assert!(is_effect(&p, tol));
        assert!(is_effect(&(&CMatrix::identity(2) - &p), tol));
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerance::new(0.0).is_err());
        assert!(Tolerance::new(-1.0).is_err());
        assert!(Tolerance::new(f64::NAN).is_err());
        assert_eq!(Tolerance::default().atol(), 1e-9);
    }

    #[test]
    fn eigh_reconstructs() {
        let g = sample(3, 3, 4.0);
        let h = &g * &g.adjoint();
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMatrix::diag(&vals);
        let back = &(&vecs * &d) * &vecs.adjoint();
        assert!(back.max_abs_diff(&h) < 1e-12);
        let s = psd_sqrt(&h, Tolerance::default()).unwrap();
        assert!((&s * &s).max_abs_diff(&h) < 1e-12);
        let r = inverse_sqrt(&h, Tolerance::default()).unwrap();
        assert!((&(&r * &h) * &r).max_abs_diff(&CMatrix::identity(3)) < 1e-10);
    }

    #[test]
    fn hermitian_basis_spans() {
        let basis = hermitian_basis(3);
        assert_eq!(basis.len(), 9);
        for b in &basis {
            assert!(hermiticity_defect(b) == 0.0);
        }
        // Rank of the vectorised basis is 9.
        let rows: Vec<C64> = basis.iter().flat_map(|b| b.to_rows().concat()).collect();
        let m = DMatrix::from_row_slice(9, 9, &rows);
        assert_eq!(m.rank(1e-10), 9);
    }
}
