//! Stochastic operator matrices: positive block operators `E` on `X ⊗ A ⊗ H`
//! with `Tr_A E = I_{X⊗H}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, kron, partial_trace, permute_systems, Matrix, EIG_CLAMP, TOL_ALG,
};

/// Commutation tolerance for the commuting-pair product.
pub const TOL_COMM: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StochasticJson", into = "StochasticJson")]
pub struct StochasticMatrix {
    dim_x: usize,
    dim_a: usize,
    dim_h: usize,
    matrix: Matrix,
}

#[derive(Serialize, Deserialize)]
struct StochasticJson {
    #[serde(rename = "dimX")]
    dim_x: usize,
    #[serde(rename = "dimA")]
    dim_a: usize,
    #[serde(rename = "dimH")]
    dim_h: usize,
    matrix: Matrix,
}

impl TryFrom<StochasticJson> for StochasticMatrix {
    type Error = Error;

    fn try_from(j: StochasticJson) -> Result<Self> {
        StochasticMatrix::from_matrix_unchecked(j.dim_x, j.dim_a, j.dim_h, j.matrix)
    }
}

impl From<StochasticMatrix> for StochasticJson {
    fn from(e: StochasticMatrix) -> Self {
        StochasticJson {
            dim_x: e.dim_x,
            dim_a: e.dim_a,
            dim_h: e.dim_h,
            matrix: e.matrix,
        }
    }
}

/// Residuals of the defining conditions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StochasticReport {
    pub min_eigenvalue: f64,
    pub marginal_residual: f64,
    pub povm_residual: f64,
    pub pass: bool,
}

impl StochasticMatrix {
    /// Builds and verifies.
    pub fn new(dim_x: usize, dim_a: usize, dim_h: usize, matrix: Matrix) -> Result<Self> {
        let e = StochasticMatrix::from_matrix_unchecked(dim_x, dim_a, dim_h, matrix)?;
        e.require_valid(TOL_ALG)?;
        Ok(e)
    }

    /// Builds after checking shapes only.
    pub fn from_matrix_unchecked(
        dim_x: usize,
        dim_a: usize,
        dim_h: usize,
        matrix: Matrix,
    ) -> Result<Self> {
        if dim_x == 0 || dim_a == 0 || dim_h == 0 {
            return Err(Error::Dimension("stochastic dimensions must be positive".into()));
        }
        let n = dim_x * dim_a * dim_h;
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::Dimension(format!(
                "dimX*dimA*dimH = {n} but matrix is {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(StochasticMatrix {
            dim_x,
            dim_a,
            dim_h,
            matrix,
        })
    }

    /// Assembles `E` from its blocks `E_{x,x',a,a'}`.
    pub fn from_blocks(
        dim_x: usize,
        dim_a: usize,
        dim_h: usize,
        mut block: impl FnMut(usize, usize, usize, usize) -> Matrix,
    ) -> Result<Self> {
        let n = dim_x * dim_a * dim_h;
        let mut m = Matrix::zeros(n, n);
        for x in 0..dim_x {
            for xp in 0..dim_x {
                for a in 0..dim_a {
                    for ap in 0..dim_a {
                        let b = block(x, xp, a, ap);
                        if b.rows() != dim_h || b.cols() != dim_h {
                            return Err(Error::Dimension(format!(
                                "block must be {dim_h}x{dim_h}, got {}x{}",
                                b.rows(),
                                b.cols()
                            )));
                        }
                        m.set_submatrix(
                            (x * dim_a + a) * dim_h,
                            (xp * dim_a + ap) * dim_h,
                            &b,
                        );
                    }
                }
            }
        }
        StochasticMatrix::from_matrix_unchecked(dim_x, dim_a, dim_h, m)
    }

    /// `Ω_n` viewed as a stochastic matrix with `X = A = n`, `H = C`.
    pub fn identity_witness(n: usize) -> Self {
        StochasticMatrix {
            dim_x: n,
            dim_a: n,
            dim_h: 1,
            matrix: linalg::omega(n),
        }
    }

    /// `I_X ⊗ I_A/|A| ⊗ I_H`.
    pub fn depolarizing(dim_x: usize, dim_a: usize, dim_h: usize) -> Self {
        StochasticMatrix {
            dim_x,
            dim_a,
            dim_h,
            matrix: Matrix::identity(dim_x * dim_a * dim_h).scale_real(1.0 / dim_a as f64),
        }
    }

    /// A channel `M_X -> M_A` viewed as a stochastic matrix with `H = C`.
    pub fn from_channel_choi(choi: &Matrix, dim_x: usize, dim_a: usize) -> Result<Self> {
        StochasticMatrix::new(dim_x, dim_a, 1, choi.clone())
    }

    /// Classical matrix built from POVMs `families[x] = (E_{x,a})_a`.
    pub fn from_povms(families: &[Vec<Matrix>]) -> Result<Self> {
        let dim_x = families.len();
        if dim_x == 0 || families[0].is_empty() {
            return Err(Error::Invalid("empty POVM family".into()));
        }
        let dim_a = families[0].len();
        let dim_h = families[0][0].rows();
        let mut cleaned: Vec<Vec<Matrix>> = Vec::with_capacity(dim_x);
        for (x, fam) in families.iter().enumerate() {
            if fam.len() != dim_a {
                return Err(Error::Dimension(format!(
                    "POVM {x} has {} outcomes, expected {dim_a}",
                    fam.len()
                )));
            }
            let mut sum = Matrix::zeros(dim_h, dim_h);
            let mut herm = Vec::with_capacity(dim_a);
            for el in fam {
                if el.rows() != dim_h || el.cols() != dim_h {
                    return Err(Error::Dimension("POVM elements of differing size".into()));
                }
                let h = el.hermitian_part()?;
                if linalg::min_eigenvalue(&h)? < -TOL_ALG {
                    return Err(Error::Invalid(format!("POVM {x} has a non-positive element")));
                }
                sum += &h;
                herm.push(h);
            }
            let dev = sum.max_abs_diff(&Matrix::identity(dim_h));
            if dev > TOL_ALG {
                return Err(Error::Invalid(format!(
                    "POVM {x} sums to identity only within {dev:.3e}"
                )));
            }
            cleaned.push(herm);
        }
        StochasticMatrix::from_blocks(dim_x, dim_a, dim_h, |x, xp, a, ap| {
            if x == xp && a == ap {
                cleaned[x][a].clone()
            } else {
                Matrix::zeros(dim_h, dim_h)
            }
        })
    }

    /// Classical matrix with `H = C` from a row-stochastic table `p[x][a]`.
    pub fn from_conditional(table: &[Vec<f64>]) -> Result<Self> {
        let fams: Vec<Vec<Matrix>> = table
            .iter()
            .map(|row| row.iter().map(|&p| Matrix::from_real_diag(&[p])).collect())
            .collect();
        StochasticMatrix::from_povms(&fams)
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.dim_x, self.dim_a, self.dim_h]
    }

    /// `E_{x,x',a,a'}` as an operator on `H`.
    pub fn block(&self, x: usize, xp: usize, a: usize, ap: usize) -> Matrix {
        let h = self.dim_h;
        self.matrix
            .submatrix((x * self.dim_a + a) * h, (xp * self.dim_a + ap) * h, h, h)
    }

    /// The POVM `(E_{x,x,a,a})_a`.
    pub fn povm(&self, x: usize) -> Vec<Matrix> {
        (0..self.dim_a).map(|a| self.block(x, x, a, a)).collect()
    }

    pub fn verify(&self, tol: f64) -> Result<StochasticReport> {
        let min_eigenvalue = linalg::min_eigenvalue(&self.matrix)?;
        let marg = partial_trace(&self.matrix, &self.dims(), 1)?;
        let marginal_residual = marg.max_abs_diff(&Matrix::identity(self.dim_x * self.dim_h));
        let mut povm_residual: f64 = 0.0;
        let id = Matrix::identity(self.dim_h);
        for x in 0..self.dim_x {
            let mut sum = Matrix::zeros(self.dim_h, self.dim_h);
            for el in self.povm(x) {
                let m = linalg::min_eigenvalue(&el)?;
                povm_residual = povm_residual.max(-m);
                sum += &el;
            }
            povm_residual = povm_residual.max(sum.max_abs_diff(&id));
        }
        let pass = min_eigenvalue >= -tol && marginal_residual <= tol && povm_residual <= tol;
        Ok(StochasticReport {
            min_eigenvalue,
            marginal_residual,
            povm_residual,
            pass,
        })
    }

    fn require_valid(&self, tol: f64) -> Result<()> {
        let r = self.verify(tol)?;
        if r.pass {
            Ok(())
        } else {
            Err(Error::NotStochastic(format!(
                "min eigenvalue {:.3e}, marginal residual {:.3e}, POVM residual {:.3e}",
                r.min_eigenvalue, r.marginal_residual, r.povm_residual
            )))
        }
    }

    /// Isometric dilation `E_{x,x',a,a'} = V_{a,x}^* V_{a',x'}`. With
    /// `truncate` the dilation space is cut to the numerical rank of `E`;
    /// otherwise `K = X ⊗ A ⊗ H` and `V` is read from `E^{1/2}`.
    pub fn dilate(&self, truncate: bool) -> Result<Dilation> {
        self.require_valid(TOL_ALG)?;
        let root = if truncate {
            linalg::psd_factor(&self.matrix, EIG_CLAMP)?
        } else {
            linalg::herm_sqrt(&self.matrix)?
        };
        let dim_k = root.rows();
        let h = self.dim_h;
        let mut blocks = Vec::with_capacity(self.dim_a * self.dim_x);
        for a in 0..self.dim_a {
            for x in 0..self.dim_x {
                blocks.push(root.submatrix(0, (x * self.dim_a + a) * h, dim_k, h));
            }
        }
        Ok(Dilation {
            dim_x: self.dim_x,
            dim_a: self.dim_a,
            dim_h: h,
            dim_k,
            blocks,
        })
    }

    /// Choi matrix of `Γ_{E,σ}: M_X -> M_A`,
    /// `Γ(e_x e_{x'}^*) = sum_{a,a'} Tr(E_{x,x',a,a'} σ) e_a e_{a'}^*`.
    pub fn channel(&self, sigma: &Matrix) -> Result<Matrix> {
        let sigma = check_state(sigma, self.dim_h)?;
        let (dx, da) = (self.dim_x, self.dim_a);
        Ok(Matrix::from_fn(dx * da, dx * da, |r, c| {
            let (x, a) = (r / da, r % da);
            let (xp, ap) = (c / da, c % da);
            self.block(x, xp, a, ap).trace_product(&sigma)
        }))
    }

    pub fn is_semiclassical(&self, tol: f64) -> bool {
        self.off_diagonal_defect(true, false) <= tol
    }

    pub fn is_classical(&self, tol: f64) -> bool {
        self.off_diagonal_defect(true, true) <= tol
    }

    fn off_diagonal_defect(&self, in_x: bool, in_a: bool) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.dim_x {
            for xp in 0..self.dim_x {
                for a in 0..self.dim_a {
                    for ap in 0..self.dim_a {
                        if (in_x && x != xp) || (in_a && a != ap) {
                            worst = worst.max(self.block(x, xp, a, ap).max_abs());
                        }
                    }
                }
            }
        }
        worst
    }

    fn masked(&self, keep: impl Fn(usize, usize, usize, usize) -> bool) -> StochasticMatrix {
        let h = self.dim_h;
        let mut m = self.matrix.clone();
        for x in 0..self.dim_x {
            for xp in 0..self.dim_x {
                for a in 0..self.dim_a {
                    for ap in 0..self.dim_a {
                        if !keep(x, xp, a, ap) {
                            m.set_submatrix(
                                (x * self.dim_a + a) * h,
                                (xp * self.dim_a + ap) * h,
                                &Matrix::zeros(h, h),
                            );
                        }
                    }
                }
            }
        }
        StochasticMatrix {
            dim_x: self.dim_x,
            dim_a: self.dim_a,
            dim_h: h,
            matrix: m,
        }
    }

    /// Zeroes the blocks with `x != x'`.
    pub fn delta_x(&self) -> StochasticMatrix {
        self.masked(|x, xp, _, _| x == xp)
    }

    /// Zeroes the blocks with `a != a'`.
    pub fn delta_a(&self) -> StochasticMatrix {
        self.masked(|_, _, a, ap| a == ap)
    }

    /// Zeroes the blocks with `x != x'` or `a != a'`.
    pub fn delta_xa(&self) -> StochasticMatrix {
        self.masked(|x, xp, a, ap| x == xp && a == ap)
    }

    /// `E ⊗ I_n` acting on `H ⊗ C^n`.
    pub fn extend_right(&self, n: usize) -> StochasticMatrix {
        StochasticMatrix {
            dim_x: self.dim_x,
            dim_a: self.dim_a,
            dim_h: self.dim_h * n,
            matrix: kron(&self.matrix, &Matrix::identity(n)),
        }
    }

    /// `I_n ⊗ E` acting on `C^n ⊗ H`.
    pub fn extend_left(&self, n: usize) -> StochasticMatrix {
        let m = kron(&self.matrix, &Matrix::identity(n));
        let m = permute_systems(&m, &[self.dim_x, self.dim_a, self.dim_h, n], &[0, 1, 3, 2])
            .expect("consistent dims");
        StochasticMatrix {
            dim_x: self.dim_x,
            dim_a: self.dim_a,
            dim_h: self.dim_h * n,
            matrix: m,
        }
    }
}

/// Checks `sigma` is a state on `C^n` and returns its Hermitian part.
pub fn check_state(sigma: &Matrix, n: usize) -> Result<Matrix> {
    if sigma.rows() != n || sigma.cols() != n {
        return Err(Error::Dimension(format!(
            "state must be {n}x{n}, got {}x{}",
            sigma.rows(),
            sigma.cols()
        )));
    }
    let h = sigma
        .hermitian_part()
        .map_err(|_| Error::NotState("not Hermitian".into()))?;
    let min = linalg::min_eigenvalue(&h)?;
    if min < -TOL_ALG {
        return Err(Error::NotState(format!("min eigenvalue {min:.3e}")));
    }
    let tr = h.trace().re;
    if (tr - 1.0).abs() > TOL_ALG {
        return Err(Error::NotState(format!("trace {tr}")));
    }
    Ok(h)
}

/// `V_{a,x}: H -> K` with `E_{x,x',a,a'} = V_{a,x}^* V_{a',x'}`.
#[derive(Clone, Debug)]
pub struct Dilation {
    pub dim_x: usize,
    pub dim_a: usize,
    pub dim_h: usize,
    pub dim_k: usize,
    blocks: Vec<Matrix>,
}

impl Dilation {
    pub fn block(&self, a: usize, x: usize) -> &Matrix {
        &self.blocks[a * self.dim_x + x]
    }

    pub fn reconstruct(&self) -> StochasticMatrix {
        StochasticMatrix::from_blocks(self.dim_x, self.dim_a, self.dim_h, |x, xp, a, ap| {
            &self.block(a, x).adjoint() * self.block(ap, xp)
        })
        .expect("dilation blocks have consistent shapes")
    }

    /// `max |sum_a V_{a,x}^* V_{a,x'} - δ_{x,x'} I|`.
    pub fn isometry_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.dim_x {
            for xp in 0..self.dim_x {
                let mut s = Matrix::zeros(self.dim_h, self.dim_h);
                for a in 0..self.dim_a {
                    s += &(&self.block(a, x).adjoint() * self.block(a, xp));
                }
                let target = if x == xp {
                    Matrix::identity(self.dim_h)
                } else {
                    Matrix::zeros(self.dim_h, self.dim_h)
                };
                worst = worst.max(s.max_abs_diff(&target));
            }
        }
        worst
    }
}

fn require_inputs(list: &[&StochasticMatrix]) -> Result<()> {
    for e in list {
        e.require_valid(TOL_ALG)?;
    }
    Ok(())
}

/// `E ⊙ F`: `E ⊗ F` reordered to `X, Y, A, B, H_1, H_2`.
pub fn odot(e: &StochasticMatrix, f: &StochasticMatrix) -> Result<StochasticMatrix> {
    require_inputs(&[e, f])?;
    let k = kron(&e.matrix, &f.matrix);
    let dims = [e.dim_x, e.dim_a, e.dim_h, f.dim_x, f.dim_a, f.dim_h];
    let m = permute_systems(&k, &dims, &[0, 3, 1, 4, 2, 5])?;
    StochasticMatrix::from_matrix_unchecked(e.dim_x * f.dim_x, e.dim_a * f.dim_a, e.dim_h * f.dim_h, m)
}

/// Largest commutator norm between blocks of `e` and blocks of `f`.
pub fn max_commutator(e: &StochasticMatrix, f: &StochasticMatrix) -> Result<f64> {
    if e.dim_h != f.dim_h {
        return Err(Error::Dimension(format!(
            "commuting product needs a common H, got {} and {}",
            e.dim_h, f.dim_h
        )));
    }
    let eb = all_blocks(e);
    let fb = all_blocks(f);
    let mut worst: f64 = 0.0;
    for a in &eb {
        for b in &fb {
            let c = &(a * b) - &(b * a);
            if c.frobenius_norm() > 0.0 {
                worst = worst.max(c.op_norm());
            }
        }
    }
    Ok(worst)
}

fn all_blocks(e: &StochasticMatrix) -> Vec<Matrix> {
    let mut out = Vec::new();
    for x in 0..e.dim_x {
        for xp in 0..e.dim_x {
            for a in 0..e.dim_a {
                for ap in 0..e.dim_a {
                    out.push(e.block(x, xp, a, ap));
                }
            }
        }
    }
    out
}

/// `E · F` for a commuting pair on a common `H`: blocks
/// `E_{x,x',a,a'} F_{y,y',b,b'}` over `(XY, AB, H)`.
pub fn dot(e: &StochasticMatrix, f: &StochasticMatrix, tol_comm: f64) -> Result<StochasticMatrix> {
    require_inputs(&[e, f])?;
    let worst = max_commutator(e, f)?;
    if worst > tol_comm {
        return Err(Error::NonCommuting(worst));
    }
    let (dy, db) = (f.dim_x, f.dim_a);
    StochasticMatrix::from_blocks(e.dim_x * dy, e.dim_a * db, e.dim_h, |xy, xyp, ab, abp| {
        let (x, y) = (xy / dy, xy % dy);
        let (xp, yp) = (xyp / dy, xyp % dy);
        let (a, b) = (ab / db, ab % db);
        let (ap, bp) = (abp / db, abp % db);
        &e.block(x, xp, a, ap) * &f.block(y, yp, b, bp)
    })
}

/// `F ∘ E` for `E` over `(X, A, H)` and `F` over `(A, Z, K)`: blocks
/// `G_{x,x',z,z'} = sum_{a,a'} F_{a,a',z,z'} ⊗ E_{x,x',a,a'}` on `K ⊗ H`.
pub fn compose(f: &StochasticMatrix, e: &StochasticMatrix) -> Result<StochasticMatrix> {
    if f.dim_x != e.dim_a {
        return Err(Error::Dimension(format!(
            "inner dimension mismatch: outer input {} vs inner output {}",
            f.dim_x, e.dim_a
        )));
    }
    require_inputs(&[e, f])?;
    let (dk, dh) = (f.dim_h, e.dim_h);
    let eb: Vec<Matrix> = all_blocks(e);
    let fb: Vec<Matrix> = all_blocks(f);
    let (dx, da, dz) = (e.dim_x, e.dim_a, f.dim_a);
    let e_at = |x: usize, xp: usize, a: usize, ap: usize| &eb[((x * dx + xp) * da + a) * da + ap];
    let f_at = |a: usize, ap: usize, z: usize, zp: usize| &fb[((a * da + ap) * dz + z) * dz + zp];
    StochasticMatrix::from_blocks(dx, dz, dk * dh, |x, xp, z, zp| {
        let mut g = Matrix::zeros(dk * dh, dk * dh);
        for a in 0..da {
            for ap in 0..da {
                let fa = f_at(a, ap, z, zp);
                if fa.max_abs() == 0.0 {
                    continue;
                }
                g += &kron(fa, e_at(x, xp, a, ap));
            }
        }
        g
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, omega, ZERO};
    use crate::random::{random_channel, random_pvm, random_state, random_stochastic};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn rng() -> StdRng {
        StdRng::seed_from_u64(11)
    }

    #[test]
    fn verify_examples() {
        assert!(StochasticMatrix::identity_witness(3).verify(TOL_ALG).unwrap().pass);
        assert!(StochasticMatrix::depolarizing(2, 3, 2).verify(TOL_ALG).unwrap().pass);
        let scaled =
            StochasticMatrix::from_matrix_unchecked(2, 2, 1, omega(2).scale_real(2.0)).unwrap();
        let r = scaled.verify(TOL_ALG).unwrap();
        assert!(!r.pass);
        assert!((r.marginal_residual - 1.0).abs() < 1e-12);
        assert!(StochasticMatrix::new(2, 2, 1, omega(2).scale_real(2.0)).is_err());
    }

    #[test]
    fn shape_checks() {
        assert!(StochasticMatrix::from_matrix_unchecked(2, 2, 2, Matrix::identity(4)).is_err());
        assert!(StochasticMatrix::from_matrix_unchecked(0, 2, 2, Matrix::identity(0)).is_err());
    }

    #[test]
    fn dilation_of_identity_witness() {
        let d = StochasticMatrix::identity_witness(3).dilate(true).unwrap();
        assert_eq!(d.dim_k, 1);
        for a in 0..3 {
            for x in 0..3 {
                let v = d.block(a, x)[(0, 0)].norm();
                assert!((v - if a == x { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dilation_reconstructs_random() {
        let mut r = rng();
        for truncate in [true, false] {
            let e = random_stochastic(&mut r, 2, 3, 2);
            let d = e.dilate(truncate).unwrap();
            assert!(d.reconstruct().matrix().max_abs_diff(e.matrix()) < 1e-8);
            assert!(d.isometry_residual() < 1e-8);
        }
    }

    #[test]
    fn dilation_of_pvm_matrix_gives_partial_isometries() {
        let mut r = rng();
        let fams = vec![random_pvm(&mut r, 2, 3), random_pvm(&mut r, 2, 3)];
        let e = StochasticMatrix::from_povms(&fams).unwrap();
        let d = e.dilate(false).unwrap();
        for a in 0..2 {
            for x in 0..2 {
                let v = d.block(a, x);
                let vv = &v.adjoint() * v;
                assert!((&vv * &vv).max_abs_diff(&vv) < 1e-8);
            }
        }
    }

    #[test]
    fn channel_examples() {
        let mut r = rng();
        let choi = random_channel(&mut r, 2, 3);
        let e = StochasticMatrix::from_channel_choi(&choi, 2, 3).unwrap();
        let one = Matrix::identity(1);
        assert!(e.channel(&one).unwrap().max_abs_diff(&choi) < 1e-15);
        let dep = StochasticMatrix::depolarizing(2, 3, 2);
        let sigma = random_state(&mut r, 2);
        let c = dep.channel(&sigma).unwrap();
        let expected = Matrix::identity(6).scale_real(1.0 / 3.0);
        assert!(c.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn channel_rejects_non_states() {
        let e = StochasticMatrix::depolarizing(2, 2, 2);
        assert!(e.channel(&Matrix::identity(2)).is_err());
        assert!(e.channel(&Matrix::identity(3)).is_err());
    }

    #[test]
    fn random_channels_are_cptp() {
        let mut r = rng();
        for _ in 0..5 {
            let e = random_stochastic(&mut r, 2, 3, 2);
            let sigma = random_state(&mut r, 2);
            let c = e.channel(&sigma).unwrap();
            assert!(linalg::is_channel(&c, 2, 3, 1e-9).unwrap());
        }
    }

    #[test]
    fn odot_of_identities() {
        let o = odot(
            &StochasticMatrix::identity_witness(2),
            &StochasticMatrix::identity_witness(3),
        )
        .unwrap();
        assert!(o.matrix().max_abs_diff(&omega(6)) < 1e-15);
    }

    #[test]
    fn odot_splits_channels() {
        let mut r = rng();
        let e = random_stochastic(&mut r, 2, 2, 2);
        let f = random_stochastic(&mut r, 3, 2, 2);
        let s1 = random_state(&mut r, 2);
        let s2 = random_state(&mut r, 2);
        let o = odot(&e, &f).unwrap();
        assert!(o.verify(1e-8).unwrap().pass);
        let lhs = o.channel(&kron(&s1, &s2)).unwrap();
        let ce = e.channel(&s1).unwrap();
        let cf = f.channel(&s2).unwrap();
        let rhs = permute_systems(&kron(&ce, &cf), &[2, 2, 3, 2], &[0, 2, 1, 3]).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn dot_of_extended_pair_equals_odot() {
        let mut r = rng();
        let e = random_stochastic(&mut r, 2, 2, 2);
        let f = random_stochastic(&mut r, 2, 3, 3);
        let et = e.extend_right(3);
        let ft = f.extend_left(2);
        let d = dot(&et, &ft, TOL_COMM).unwrap();
        assert!(d.matrix().max_abs_diff(odot(&e, &f).unwrap().matrix()) < 1e-12);
    }

    #[test]
    fn dot_of_diagonal_pvms() {
        let diag = |v: &[f64]| Matrix::from_real_diag(v);
        let e = StochasticMatrix::from_povms(&[
            vec![diag(&[1.0, 0.0, 1.0]), diag(&[0.0, 1.0, 0.0])],
            vec![diag(&[1.0, 1.0, 0.0]), diag(&[0.0, 0.0, 1.0])],
        ])
        .unwrap();
        let f = StochasticMatrix::from_povms(&[vec![diag(&[0.0, 1.0, 1.0]), diag(&[1.0, 0.0, 0.0])]])
            .unwrap();
        let d = dot(&e, &f, TOL_COMM).unwrap();
        assert!(d.verify(1e-8).unwrap().pass);
    }

    #[test]
    fn dot_rejects_pauli_pair() {
        // E_{x,x',a,a'} = δ_{a,x} δ_{a',x'} U_x^* U_{x'} with U = (I, σ_x), likewise F with σ_z.
        let zero = c64(0.0, 0.0);
        let one = c64(1.0, 0.0);
        let sx = Matrix::new(2, 2, vec![zero, one, one, zero]).unwrap();
        let sz = Matrix::from_real_diag(&[1.0, -1.0]);
        let build = |u: &Matrix| {
            let us = [Matrix::identity(2), u.clone()];
            StochasticMatrix::from_blocks(2, 2, 2, |x, xp, a, ap| {
                if a == x && ap == xp {
                    &us[x].adjoint() * &us[xp]
                } else {
                    Matrix::zeros(2, 2)
                }
            })
            .unwrap()
        };
        let e = build(&sx);
        let f = build(&sz);
        assert!(e.verify(TOL_ALG).unwrap().pass && f.verify(TOL_ALG).unwrap().pass);
        match dot(&e, &f, TOL_COMM) {
            Err(Error::NonCommuting(n)) => assert!((n - 2.0).abs() < 1e-12),
            other => panic!("expected commutation failure, got {other:?}"),
        }
    }

    #[test]
    fn compose_classical_is_matrix_product() {
        let p = vec![vec![0.2, 0.8], vec![0.6, 0.4]];
        let q = vec![vec![0.1, 0.3, 0.6], vec![0.5, 0.5, 0.0]];
        let e = StochasticMatrix::from_conditional(&p).unwrap();
        let f = StochasticMatrix::from_conditional(&q).unwrap();
        let g = compose(&f, &e).unwrap();
        assert!(g.is_classical(1e-15));
        for x in 0..2 {
            for z in 0..3 {
                let expected: f64 = (0..2).map(|a| p[x][a] * q[a][z]).sum();
                assert!((g.block(x, x, z, z)[(0, 0)].re - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn compose_with_identity_witness() {
        let mut r = rng();
        let e = random_stochastic(&mut r, 2, 3, 2);
        let after = compose(&StochasticMatrix::identity_witness(3), &e).unwrap();
        assert!(after.matrix().max_abs_diff(e.matrix()) < 1e-12);
        let before = compose(&e, &StochasticMatrix::identity_witness(2)).unwrap();
        assert!(before.matrix().max_abs_diff(e.matrix()) < 1e-12);
    }

    #[test]
    fn compose_verifies_and_rejects_mismatch() {
        let mut r = rng();
        let e = random_stochastic(&mut r, 2, 3, 2);
        let f = random_stochastic(&mut r, 3, 2, 2);
        assert!(compose(&f, &e).unwrap().verify(1e-8).unwrap().pass);
        assert!(matches!(compose(&e, &e), Err(Error::Dimension(_))));
    }

    #[test]
    fn classicality_predicates() {
        let t = StochasticMatrix::from_povms(&[vec![Matrix::identity(2)]]).unwrap();
        assert!(t.is_classical(TOL_ALG) && t.is_semiclassical(TOL_ALG));
        let o = StochasticMatrix::identity_witness(2);
        assert!(!o.is_semiclassical(TOL_ALG));
        assert!(StochasticMatrix::from_povms(&[vec![Matrix::identity(2).scale_real(0.5)]]).is_err());
    }

    #[test]
    fn delta_maps() {
        let mut r = rng();
        let e = random_stochastic(&mut r, 3, 2, 2);
        let dxa = e.delta_xa();
        assert!(dxa.is_classical(0.0));
        assert!(dxa.verify(1e-9).unwrap().pass);
        assert!(e.delta_x().verify(1e-9).unwrap().pass);
        assert_eq!(e.delta_x().delta_x(), e.delta_x());
        assert_eq!(e.delta_x().delta_a(), dxa);
        let sigma = random_state(&mut r, 2);
        let lhs = e.delta_x().channel(&sigma).unwrap();
        let c = e.channel(&sigma).unwrap();
        let rhs = linalg::choi_of_map(3, 2, |rho| {
            let d = Matrix::from_fn(3, 3, |i, j| if i == j { rho[(i, j)] } else { ZERO });
            linalg::apply_choi(&c, 3, 2, &d).unwrap()
        });
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let e = StochasticMatrix::depolarizing(1, 2, 1);
        let s = serde_json::to_string(&e).unwrap();
        assert!(s.starts_with("{\"dimX\":1,\"dimA\":2,\"dimH\":1,\"matrix\":"));
        let back: StochasticMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }
}
