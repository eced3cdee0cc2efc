//! Small dense semidefinite programs over real symmetric matrices.
//!
//! Solves `min <C,X>` s.t. `<A_k,X> = b_k`, `X ⪰ 0` together with its dual
//! `max b^T y` s.t. `C - sum y_k A_k = Z ⪰ 0`, using a primal-dual
//! interior-point method (HKM search direction, Mehrotra predictor-corrector).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric matrix given by its upper-triangular entries `(i, j, v)`,
/// `i <= j`; an off-diagonal entry stands for `v (E_ij + E_ji)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((i, j, v));
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// `<A, M> = Tr(A M)` for a (not necessarily symmetric) dense `M`.
    pub fn inner(&self, m: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| {
                if i == j {
                    v * m[(i, i)]
                } else {
                    v * (m[(i, j)] + m[(j, i)])
                }
            })
            .sum()
    }

    /// `M += s A`.
    fn add_to(&self, m: &mut DMatrix<f64>, s: f64) {
        for &(i, j, v) in &self.entries {
            m[(i, j)] += s * v;
            if i != j {
                m[(j, i)] += s * v;
            }
        }
    }

    /// `M A` for dense `M`.
    fn right_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let mut out = DMatrix::zeros(n, m.ncols());
        for &(i, j, v) in &self.entries {
            for r in 0..n {
                out[(r, j)] += v * m[(r, i)];
                if i != j {
                    out[(r, i)] += v * m[(r, j)];
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub c: DMatrix<f64>,
    pub constraints: Vec<SparseSym>,
    pub b: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct SdpOptions {
    pub max_iter: usize,
    pub feas_tol: f64,
    pub gap_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            max_iter: 200,
            feas_tol: 1e-8,
            gap_tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub z: DMatrix<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `alpha` with `X + alpha dX ⪰ 0` (infinite if every step keeps
/// `X` positive), given a Cholesky factor `L` of `X`.
fn max_step(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
        .expect("non-singular Cholesky factor");
    let m = symmetrize(&(&linv * dx * linv.transpose()));
    let lmin = m.symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

struct Direction {
    dx: DMatrix<f64>,
    dy: DVector<f64>,
    dz: DMatrix<f64>,
}

impl SdpProblem {
    fn dim(&self) -> usize {
        self.c.nrows()
    }

    fn check(&self) -> Result<()> {
        let n = self.dim();
        if self.c.ncols() != n {
            return Err(Error::Dimension("SDP cost matrix is not square".into()));
        }
        if self.constraints.len() != self.b.len() {
            return Err(Error::Dimension(format!(
                "{} constraint matrices but {} right-hand sides",
                self.constraints.len(),
                self.b.len()
            )));
        }
        for a in &self.constraints {
            if a.entries.iter().any(|&(_, j, _)| j >= n) {
                return Err(Error::Dimension("constraint entry out of range".into()));
            }
        }
        Ok(())
    }

    fn apply_constraints(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.b.len(), self.constraints.iter().map(|a| a.inner(x)))
    }

    fn combine(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (a, &yk) in self.constraints.iter().zip(y.iter()) {
            a.add_to(&mut m, yk);
        }
        m
    }
}

/// Solves the primal-dual pair; fails if the tolerances are not met within
/// `opts.max_iter` iterations.
pub fn solve(problem: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    problem.check()?;
    let n = problem.dim();
    let m = problem.b.len();
    let b = DVector::from_column_slice(&problem.b);
    let c = symmetrize(&problem.c);
    let c_norm = c.norm();
    let b_norm = b.norm();

    let mut x = DMatrix::<f64>::identity(n, n);
    let mut y = DVector::<f64>::zeros(m);
    let mut z = DMatrix::<f64>::identity(n, n) * (1.0 + c_norm);

    for iter in 0..opts.max_iter {
        let rp = &b - problem.apply_constraints(&x);
        let rd = &c - problem.combine(&y) - &z;
        let mu = dot(&x, &z) / n as f64;
        let pobj = dot(&c, &x);
        let dobj = b.dot(&y);
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = rd.norm() / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if pinf <= opts.feas_tol && dinf <= opts.feas_tol && gap <= opts.gap_tol {
            return Ok(SdpSolution {
                x,
                y: y.iter().cloned().collect(),
                z,
                primal_objective: pobj,
                dual_objective: dobj,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                iterations: iter,
            });
        }

        let lz = z
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NoConvergence("dual iterate lost definiteness".into()))?;
        let zinv = symmetrize(&lz.inverse());
        let lx = x
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NoConvergence("primal iterate lost definiteness".into()))?
            .l();
        let lzl = lz.l();

        // Schur complement M_kl = Tr(A_k X A_l Z^-1).
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for (l, al) in problem.constraints.iter().enumerate() {
            let g = al.right_mul(&x) * &zinv;
            for (k, ak) in problem.constraints.iter().enumerate() {
                schur[(k, l)] = ak.inner(&g);
            }
        }
        let schur = symmetrize(&schur);
        let lu = schur.clone().lu();
        let x_rd_zinv = &x * &rd * &zinv;

        let direction = |rc: &DMatrix<f64>| -> Result<Direction> {
            let mut rhs = rp.clone();
            for (k, ak) in problem.constraints.iter().enumerate() {
                rhs[k] += ak.inner(&x_rd_zinv) - ak.inner(rc);
            }
            let dy = lu
                .solve(&rhs)
                .ok_or_else(|| Error::NoConvergence("singular Schur complement".into()))?;
            let dz = &rd - problem.combine(&dy);
            let dx = symmetrize(&(rc - &x * &dz * &zinv));
            Ok(Direction { dx, dy, dz })
        };

        let predictor = direction(&(-&x))?;
        let ap = (max_step(&lx, &predictor.dx)).min(1.0);
        let ad = (max_step(&lzl, &predictor.dz)).min(1.0);
        let mu_aff = dot(&(&x + &predictor.dx * ap), &(&z + &predictor.dz * ad)) / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let rc = &zinv * (sigma * mu) - &x - symmetrize(&(&predictor.dx * &predictor.dz * &zinv));
        let corr = direction(&rc)?;
        let step = 0.95;
        let ap = (step * max_step(&lx, &corr.dx)).min(1.0);
        let ad = (step * max_step(&lzl, &corr.dz)).min(1.0);
        x = symmetrize(&(&x + &corr.dx * ap));
        y += &corr.dy * ad;
        z = symmetrize(&(&z + &corr.dz * ad));
    }
    Err(Error::NoConvergence(format!(
        "no convergence within {} iterations",
        opts.max_iter
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theta_problem(n: usize, edges: &[(usize, usize)]) -> SdpProblem {
        let mut constraints = Vec::new();
        let mut b = Vec::new();
        let mut tr = SparseSym::new();
        for i in 0..n {
            tr.push(i, i, 1.0);
        }
        constraints.push(tr);
        b.push(1.0);
        for &(i, j) in edges {
            let mut a = SparseSym::new();
            a.push(i, j, 1.0);
            constraints.push(a);
            b.push(0.0);
        }
        SdpProblem {
            c: -DMatrix::from_element(n, n, 1.0),
            constraints,
            b,
        }
    }

    #[test]
    fn trace_constrained_max_eigenvalue() {
        // min <C,X> s.t. Tr X = 1 is the smallest eigenvalue of C.
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let mut tr = SparseSym::new();
        for i in 0..3 {
            tr.push(i, i, 1.0);
        }
        let p = SdpProblem {
            c: c.clone(),
            constraints: vec![tr],
            b: vec![1.0],
        };
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        let lmin = c.symmetric_eigenvalues().min();
        assert!((sol.primal_objective - lmin).abs() < 1e-6);
        assert!((sol.dual_objective - lmin).abs() < 1e-6);
    }

    #[test]
    fn pentagon_theta() {
        let edges: Vec<(usize, usize)> = (0..5).map(|i| (i, (i + 1) % 5)).collect();
        let sol = solve(&theta_problem(5, &edges), &SdpOptions::default()).unwrap();
        assert!((-sol.primal_objective - 5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn complete_and_edgeless() {
        let complete: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
            .collect();
        let sol = solve(&theta_problem(4, &complete), &SdpOptions::default()).unwrap();
        assert!((-sol.dual_objective - 1.0).abs() < 1e-6);
        let sol = solve(&theta_problem(4, &[]), &SdpOptions::default()).unwrap();
        assert!((-sol.dual_objective - 4.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_mismatched_rhs() {
        let p = SdpProblem {
            c: DMatrix::identity(2, 2),
            constraints: vec![SparseSym::new()],
            b: vec![],
        };
        assert!(matches!(solve(&p, &SdpOptions::default()), Err(Error::Dimension(_))));
    }
}
