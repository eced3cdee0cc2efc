//! Dense complex matrices and the tensor calculus used throughout the crate.
//!
//! Composite indices are lexicographic with the leftmost factor most
//! significant. A Choi matrix of a map `M_in -> M_out` has rows indexed by
//! `(in, out)` and columns by `(in', out')`, so the block at `(i, j)` is the
//! image of the matrix unit `e_i e_j^*`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for algebraic identities on constructed data.
pub const TOL_ALG: f64 = 1e-9;
/// Eigenvalues below this magnitude are treated as zero.
pub const EIG_CLAMP: f64 = 1e-10;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl TryFrom<MatrixJson> for Matrix {
    type Error = Error;

    fn try_from(m: MatrixJson) -> Result<Self> {
        let data = m.data.iter().map(|&[re, im]| c64(re, im)).collect();
        Matrix::new(m.rows, m.cols, data)
    }
}

impl From<Matrix> for MatrixJson {
    fn from(m: Matrix) -> Self {
        MatrixJson {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Matrix::new(rows, cols, values.iter().map(|&v| c64(v, 0.0)).collect())
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&v| c64(v, 0.0)).collect();
        Matrix::from_diag(&d)
    }

    /// Matrix unit `e_i e_j^*` in `M_n`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        m[(i, j)] = ONE;
        m
    }

    /// Rank-one operator `u v^*`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Matrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    /// Column vector.
    pub fn column_vector(v: &[C64]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn require_square(&self, what: &str) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::Dimension(format!(
                "{what} must be square, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    pub fn adjoint(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c64(s, 0.0))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch in max_abs_diff"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let svd = self.to_nalgebra().svd(false, false);
        svd.singular_values.iter().cloned().fold(0.0, f64::max)
    }

    /// `max |M - M^*|`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M^*) / 2`, provided the asymmetry is within [`TOL_ALG`].
    pub fn hermitian_part(&self) -> Result<Matrix> {
        self.require_square("Hermitian operand")?;
        let defect = self.hermitian_defect();
        if defect > TOL_ALG {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Matrix::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        }))
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "shape mismatch in mul_vec");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Sub-matrix with top-left corner `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_submatrix(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Matrix) -> C64 {
        assert_eq!(self.cols, other.rows, "shape mismatch in trace_product");
        assert_eq!(self.rows, other.cols, "shape mismatch in trace_product");
        let mut s = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                s += self[(i, k)] * other[(k, i)];
            }
        }
        s
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Matrix> for Matrix {
    fn sub_assign(&mut self, rhs: &Matrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.scale_real(-1.0)
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "shape mismatch in matrix product");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Ordered tensor factor dimensions with optional labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub labels: Vec<String>,
}

impl SystemDims {
    pub fn new(dims: &[usize]) -> Self {
        SystemDims {
            dims: dims.to_vec(),
            labels: Vec::new(),
        }
    }

    pub fn labelled(dims: &[usize], labels: &[&str]) -> Self {
        SystemDims {
            dims: dims.to_vec(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Checks that `m` is square with side equal to the product of dims.
    pub fn check(&self, m: &Matrix) -> Result<()> {
        check_dims(m, &self.dims)
    }
}

fn check_dims(m: &Matrix, dims: &[usize]) -> Result<()> {
    let n: usize = dims.iter().product();
    if m.rows != n || m.cols != n {
        return Err(Error::Dimension(format!(
            "factor dims {:?} need a {n}x{n} matrix, got {}x{}",
            dims, m.rows, m.cols
        )));
    }
    Ok(())
}

/// Kronecker product; the left factor is most significant.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac, br, bc) = (a.rows, a.cols, b.rows, b.cols);
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list, left to right.
pub fn kron_all(factors: &[&Matrix]) -> Matrix {
    let mut out = Matrix::identity(1);
    for f in factors {
        out = kron(&out, f);
    }
    out
}

/// Kronecker product of vectors.
pub fn kron_vec(u: &[C64], v: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(u.len() * v.len());
    for a in u {
        for b in v {
            out.push(a * b);
        }
    }
    out
}

/// Standard basis vector `e_i` in `C^n`.
pub fn basis_vector(n: usize, i: usize) -> Vec<C64> {
    let mut v = vec![ZERO; n];
    v[i] = ONE;
    v
}

/// `<u, v>` conjugate-linear in the first argument.
pub fn vdot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Trace over factor `which`; remaining factors keep their order.
pub fn partial_trace(m: &Matrix, dims: &[usize], which: usize) -> Result<Matrix> {
    check_dims(m, dims)?;
    if which >= dims.len() {
        return Err(Error::Dimension(format!(
            "factor {which} out of range for {} factors",
            dims.len()
        )));
    }
    let left: usize = dims[..which].iter().product();
    let mid = dims[which];
    let right: usize = dims[which + 1..].iter().product();
    let n = left * right;
    let mut out = Matrix::zeros(n, n);
    for l1 in 0..left {
        for r1 in 0..right {
            let oi = l1 * right + r1;
            for l2 in 0..left {
                for r2 in 0..right {
                    let oj = l2 * right + r2;
                    let mut s = ZERO;
                    for t in 0..mid {
                        s += m[((l1 * mid + t) * right + r1, (l2 * mid + t) * right + r2)];
                    }
                    out[(oi, oj)] = s;
                }
            }
        }
    }
    Ok(out)
}

/// Traces out every factor listed in `which`.
pub fn trace_out(m: &Matrix, dims: &[usize], which: &[usize]) -> Result<Matrix> {
    let mut order: Vec<usize> = which.to_vec();
    order.sort_unstable();
    order.dedup();
    let mut cur = m.clone();
    let mut cur_dims = dims.to_vec();
    for &w in order.iter().rev() {
        cur = partial_trace(&cur, &cur_dims, w)?;
        cur_dims.remove(w);
    }
    Ok(cur)
}

fn permutation_map(dims: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    let k = dims.len();
    let mut seen = vec![false; k];
    if perm.len() != k {
        return Err(Error::Dimension(format!(
            "permutation of length {} for {k} factors",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= k || seen[p] {
            return Err(Error::Invalid(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let n: usize = dims.iter().product();
    let mut map = vec![0; n];
    let mut idx = vec![0usize; k];
    for (flat, slot) in map.iter_mut().enumerate() {
        let mut r = flat;
        for f in (0..k).rev() {
            idx[f] = r % dims[f];
            r /= dims[f];
        }
        let mut out = 0;
        for f in 0..k {
            out = out * new_dims[f] + idx[perm[f]];
        }
        *slot = out;
    }
    Ok(map)
}

/// Reorders tensor factors: factor `k` of the result is factor `perm[k]` of
/// the input.
pub fn permute_systems(m: &Matrix, dims: &[usize], perm: &[usize]) -> Result<Matrix> {
    check_dims(m, dims)?;
    let map = permutation_map(dims, perm)?;
    let n = m.rows;
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Reorders the tensor factors of a vector.
pub fn permute_vector(v: &[C64], dims: &[usize], perm: &[usize]) -> Result<Vec<C64>> {
    let n: usize = dims.iter().product();
    if v.len() != n {
        return Err(Error::Dimension(format!(
            "vector of length {} for factor dims {dims:?}",
            v.len()
        )));
    }
    let map = permutation_map(dims, perm)?;
    let mut out = vec![ZERO; n];
    for (i, &z) in v.iter().enumerate() {
        out[map[i]] = z;
    }
    Ok(out)
}

/// Spectral decomposition of a Hermitian matrix: eigenvalues ascending,
/// eigenvectors as columns.
pub fn eigh(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let h = m.hermitian_part()?;
    if h.rows == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    let eig = h.to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..h.rows).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Matrix::from_fn(h.rows, h.rows, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

pub fn min_eigenvalue(m: &Matrix) -> Result<f64> {
    let (vals, _) = eigh(m)?;
    Ok(vals.first().copied().unwrap_or(0.0))
}

/// True iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd(m: &Matrix, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(m)? >= -tol)
}

/// PSD square root with negative eigenvalues clamped to zero.
pub fn herm_sqrt(m: &Matrix) -> Result<Matrix> {
    let (vals, vecs) = eigh(m)?;
    let n = vals.len();
    let roots: Vec<f64> = vals.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        if roots[k] == 0.0 {
            continue;
        }
        for i in 0..n {
            let a = vecs[(i, k)] * roots[k];
            for j in 0..n {
                out[(i, j)] += a * vecs[(j, k)].conj();
            }
        }
    }
    Ok(out)
}

/// Returns `R` of shape `r x n` with `R^* R = M`, keeping only eigenvalues
/// above `cutoff`.
pub fn psd_factor(m: &Matrix, cutoff: f64) -> Result<Matrix> {
    let (vals, vecs) = eigh(m)?;
    let n = vals.len();
    let keep: Vec<usize> = (0..n).rev().filter(|&k| vals[k] > cutoff).collect();
    Ok(Matrix::from_fn(keep.len(), n, |r, j| {
        let k = keep[r];
        vecs[(j, k)].conj() * vals[k].sqrt()
    }))
}

/// Non-normalised maximally entangled matrix `sum_{a,b} e_a e_b^* ⊗ e_a e_b^*`.
pub fn omega(n: usize) -> Matrix {
    let mut m = Matrix::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            m[(a * n + a, b * n + b)] = ONE;
        }
    }
    m
}

/// `sum_a e_a ⊗ e_a`.
pub fn max_entangled_vector(n: usize) -> Vec<C64> {
    let mut v = vec![ZERO; n * n];
    for a in 0..n {
        v[a * n + a] = ONE;
    }
    v
}

/// Applies the map with Choi matrix `choi` (input dim `dim_in`, output dim
/// `dim_out`) to `rho`.
pub fn apply_choi(choi: &Matrix, dim_in: usize, dim_out: usize, rho: &Matrix) -> Result<Matrix> {
    check_dims(choi, &[dim_in, dim_out])?;
    if rho.rows != dim_in || rho.cols != dim_in {
        return Err(Error::Dimension(format!(
            "input operator must be {dim_in}x{dim_in}, got {}x{}",
            rho.rows, rho.cols
        )));
    }
    let mut out = Matrix::zeros(dim_out, dim_out);
    for i in 0..dim_in {
        for j in 0..dim_in {
            let r = rho[(i, j)];
            if r == ZERO {
                continue;
            }
            for a in 0..dim_out {
                for b in 0..dim_out {
                    out[(a, b)] += r * choi[(i * dim_out + a, j * dim_out + b)];
                }
            }
        }
    }
    Ok(out)
}

/// Choi matrix of a linear map given as a closure on `M_{dim_in}`.
pub fn choi_of_map(dim_in: usize, dim_out: usize, f: impl Fn(&Matrix) -> Matrix) -> Matrix {
    let mut choi = Matrix::zeros(dim_in * dim_out, dim_in * dim_out);
    for i in 0..dim_in {
        for j in 0..dim_in {
            let img = f(&Matrix::unit(dim_in, i, j));
            assert_eq!((img.rows, img.cols), (dim_out, dim_out), "map output shape");
            choi.set_submatrix(i * dim_out, j * dim_out, &img);
        }
    }
    choi
}

/// Choi matrix of `second ∘ first` for `first: M_n -> M_m`, `second: M_m -> M_k`.
pub fn compose_choi(
    second: &Matrix,
    first: &Matrix,
    dim_in: usize,
    dim_mid: usize,
    dim_out: usize,
) -> Result<Matrix> {
    check_dims(first, &[dim_in, dim_mid])?;
    check_dims(second, &[dim_mid, dim_out])?;
    let mut out = Matrix::zeros(dim_in * dim_out, dim_in * dim_out);
    for i in 0..dim_in {
        for j in 0..dim_in {
            let mid = first.submatrix(i * dim_mid, j * dim_mid, dim_mid, dim_mid);
            let img = apply_choi(second, dim_mid, dim_out, &mid)?;
            out.set_submatrix(i * dim_out, j * dim_out, &img);
        }
    }
    Ok(out)
}

/// Residuals of a Choi matrix as a channel: `(min eigenvalue, max |Tr_out C - I|)`.
pub fn channel_residuals(choi: &Matrix, dim_in: usize, dim_out: usize) -> Result<(f64, f64)> {
    check_dims(choi, &[dim_in, dim_out])?;
    let min_eig = min_eigenvalue(choi)?;
    let marg = partial_trace(choi, &[dim_in, dim_out], 1)?;
    let tp = marg.max_abs_diff(&Matrix::identity(dim_in));
    Ok((min_eig, tp))
}

/// True iff `choi` is the Choi matrix of a CPTP map within `tol`.
pub fn is_channel(choi: &Matrix, dim_in: usize, dim_out: usize, tol: f64) -> Result<bool> {
    let (min_eig, tp) = channel_residuals(choi, dim_in, dim_out)?;
    Ok(min_eig >= -tol && tp <= tol)
}

fn svd_threshold(values: &[f64], tol: f64) -> f64 {
    tol * values.iter().cloned().fold(1.0, f64::max)
}

/// Orthonormal basis of the kernel of `m`; singular values below
/// `tol * max(1, sigma_max)` count as zero.
pub fn nullspace(m: &Matrix, tol: f64) -> Vec<Vec<C64>> {
    let n = m.cols;
    if n == 0 {
        return Vec::new();
    }
    let padded = if m.rows < n {
        let mut p = Matrix::zeros(n, n);
        p.set_submatrix(0, 0, m);
        p
    } else {
        m.clone()
    };
    let svd = padded.to_nalgebra().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let values: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let cut = svd_threshold(&values, tol);
    let mut out: Vec<Vec<C64>> = Vec::new();
    for (k, &s) in values.iter().enumerate() {
        if s < cut {
            out.push((0..n).map(|j| v_t[(k, j)].conj()).collect());
        }
    }
    out
}

/// Orthonormal basis of the span of `vectors` in `C^n`.
pub fn orthonormal_basis(vectors: &[Vec<C64>], n: usize, tol: f64) -> Result<Vec<Vec<C64>>> {
    if vectors.is_empty() {
        return Ok(Vec::new());
    }
    for v in vectors {
        if v.len() != n {
            return Err(Error::Dimension(format!(
                "vector of length {} in a space of dimension {n}",
                v.len()
            )));
        }
    }
    let k = vectors.len();
    let m = Matrix::from_fn(n, k, |i, j| vectors[j][i]);
    let svd = m.to_nalgebra().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let values: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let cut = svd_threshold(&values, tol);
    let mut order: Vec<usize> = (0..values.len()).filter(|&j| values[j] >= cut).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    Ok(order
        .into_iter()
        .map(|j| (0..n).map(|i| u[(i, j)]).collect())
        .collect())
}

/// Orthogonal projection `sum v v^*` onto the span of an orthonormal family.
pub fn projection(basis: &[Vec<C64>], n: usize) -> Matrix {
    let mut p = Matrix::zeros(n, n);
    for v in basis {
        p += &Matrix::outer(v, v);
    }
    p
}
