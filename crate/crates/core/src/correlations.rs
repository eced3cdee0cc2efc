//! No-signalling correlations in three flavours: quantum (a channel
//! `M_{XY} -> M_{AB}` stored by its Choi matrix), classical-to-quantum (a
//! family of bipartite states) and classical (a probability table).
//!
//! Choi matrices use rows `(x, y, a, b)` and columns `(x', y', a', b')`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, apply_choi, compose_choi, kron, partial_trace, permute_systems, Matrix, TOL_ALG, ZERO,
};
use crate::stochastic::{self, StochasticMatrix, TOL_COMM};
use crate::symmetry::{self, AlgStochasticMatrix, TracialAlgebra};

/// Tolerance for probability tables.
pub const TOL_PROB: f64 = 1e-9;
/// Negative table entries above this are clamped to zero.
pub const NEG_CLAMP: f64 = 1e-12;

/// Input sizes `X, Y` and output sizes `A, B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrDims {
    pub x: usize,
    pub y: usize,
    pub a: usize,
    pub b: usize,
}

impl CorrDims {
    pub fn new(x: usize, y: usize, a: usize, b: usize) -> Self {
        CorrDims { x, y, a, b }
    }

    /// `|X| |Y|`.
    pub fn input(&self) -> usize {
        self.x * self.y
    }

    /// `|A| |B|`.
    pub fn output(&self) -> usize {
        self.a * self.b
    }

    pub fn factors(&self) -> [usize; 4] {
        [self.x, self.y, self.a, self.b]
    }

    fn check_positive(&self) -> Result<()> {
        if self.factors().contains(&0) {
            return Err(Error::Dimension(format!("all of {self:?} must be positive")));
        }
        Ok(())
    }
}

/// One term `weight · Φ ⊗ Ψ` of a local decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalTerm {
    pub weight: f64,
    pub phi: Matrix,
    pub psi: Matrix,
}

/// Construction data certifying membership in a correlation class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum Witness {
    /// Convex combination of product channels.
    #[serde(rename = "loc")]
    Local { terms: Vec<LocalTerm> },
    /// `Γ_{E⊙F,σ}` with `σ` on `H_A ⊗ H_B`.
    #[serde(rename = "q")]
    Quantum {
        e: StochasticMatrix,
        f: StochasticMatrix,
        sigma: Matrix,
    },
    /// `Γ_{E·F,σ}` for a commuting pair on a common `H`.
    #[serde(rename = "qc")]
    QuantumCommuting {
        e: StochasticMatrix,
        f: StochasticMatrix,
        sigma: Matrix,
    },
    /// Tracial construction over a finite-dimensional tracial algebra.
    #[serde(rename = "tracial")]
    Tracial {
        algebra: TracialAlgebra,
        e: AlgStochasticMatrix,
    },
}

impl Witness {
    pub fn class_tag(&self) -> &'static str {
        match self {
            Witness::Local { .. } => "loc",
            Witness::Quantum { .. } => "q",
            Witness::QuantumCommuting { .. } => "qc",
            Witness::Tracial { .. } => "tracial",
        }
    }
}

/// Quantum no-signalling correlation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QnsCorrelation {
    dims: CorrDims,
    choi: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<Witness>,
}

/// Per-condition residuals of the QNS membership test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QnsReport {
    pub min_eigenvalue: f64,
    pub trace_residual: f64,
    /// Dependence of Bob's reduced output on Alice's input.
    pub signalling_a_to_b: f64,
    /// Dependence of Alice's reduced output on Bob's input.
    pub signalling_b_to_a: f64,
    pub pass: bool,
}

impl QnsCorrelation {
    /// Wraps a Choi matrix after checking its shape only.
    pub fn from_choi_unchecked(dims: CorrDims, choi: Matrix) -> Result<Self> {
        check_choi_shape(dims, &choi)?;
        Ok(QnsCorrelation {
            dims,
            choi,
            witness: None,
        })
    }

    /// Wraps a Choi matrix and requires it to pass [`is_qns`].
    pub fn from_choi(dims: CorrDims, choi: Matrix) -> Result<Self> {
        let q = QnsCorrelation::from_choi_unchecked(dims, choi)?;
        let r = q.verify(TOL_ALG)?;
        if !r.pass {
            return Err(Error::Invalid(format!("not a QNS correlation: {r:?}")));
        }
        Ok(q)
    }

    pub fn with_witness(mut self, witness: Witness) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn dims(&self) -> CorrDims {
        self.dims
    }

    pub fn choi(&self) -> &Matrix {
        &self.choi
    }

    pub fn witness(&self) -> Option<&Witness> {
        self.witness.as_ref()
    }

    /// `C^{x,x',y,y'}_{a,a',b,b'}`.
    #[allow(clippy::too_many_arguments)]
    pub fn entry(
        &self,
        x: usize,
        xp: usize,
        y: usize,
        yp: usize,
        a: usize,
        ap: usize,
        b: usize,
        bp: usize,
    ) -> linalg::C64 {
        let d = self.dims;
        let row = ((x * d.y + y) * d.a + a) * d.b + b;
        let col = ((xp * d.y + yp) * d.a + ap) * d.b + bp;
        self.choi[(row, col)]
    }

    /// `Γ(ρ)` for `ρ` on `X ⊗ Y`.
    pub fn apply(&self, rho: &Matrix) -> Result<Matrix> {
        apply_choi(&self.choi, self.dims.input(), self.dims.output(), rho)
    }

    pub fn verify(&self, tol: f64) -> Result<QnsReport> {
        is_qns(&self.choi, self.dims, tol)
    }
}

fn check_choi_shape(dims: CorrDims, choi: &Matrix) -> Result<()> {
    dims.check_positive()?;
    let n = dims.input() * dims.output();
    if choi.rows() != n || choi.cols() != n {
        return Err(Error::Dimension(format!(
            "dims {dims:?} need a {n}x{n} Choi matrix, got {}x{}",
            choi.rows(),
            choi.cols()
        )));
    }
    Ok(())
}

/// Checks positivity, trace preservation and both no-signalling conditions
/// of a Choi matrix.
pub fn is_qns(choi: &Matrix, dims: CorrDims, tol: f64) -> Result<QnsReport> {
    check_choi_shape(dims, choi)?;
    let f = dims.factors();
    let min_eigenvalue = linalg::min_eigenvalue(choi)?;
    let tp = linalg::trace_out(choi, &f, &[2, 3])?;
    let trace_residual = tp.max_abs_diff(&Matrix::identity(dims.input()));

    // Tr_A: indices (x, y, b); must equal δ_{x,x'} c^{y,y'}_{b,b'}.
    let t_b = partial_trace(choi, &f, 2)?;
    let mut signalling_a_to_b: f64 = 0.0;
    for x in 0..dims.x {
        for xp in 0..dims.x {
            for yb in 0..dims.y * dims.b {
                for ybp in 0..dims.y * dims.b {
                    let v = t_b[(x * dims.y * dims.b + yb, xp * dims.y * dims.b + ybp)];
                    let target = if x == xp { t_b[(yb, ybp)] } else { ZERO };
                    signalling_a_to_b = signalling_a_to_b.max((v - target).norm());
                }
            }
        }
    }

    // Tr_B: indices (x, y, a); must equal δ_{y,y'} d^{x,x'}_{a,a'}.
    let t_a = partial_trace(choi, &f, 3)?;
    let idx = |x: usize, y: usize, a: usize| (x * dims.y + y) * dims.a + a;
    let mut signalling_b_to_a: f64 = 0.0;
    for x in 0..dims.x {
        for xp in 0..dims.x {
            for y in 0..dims.y {
                for yp in 0..dims.y {
                    for a in 0..dims.a {
                        for ap in 0..dims.a {
                            let v = t_a[(idx(x, y, a), idx(xp, yp, ap))];
                            let target = if y == yp {
                                t_a[(idx(x, 0, a), idx(xp, 0, ap))]
                            } else {
                                ZERO
                            };
                            signalling_b_to_a = signalling_b_to_a.max((v - target).norm());
                        }
                    }
                }
            }
        }
    }
    let pass = min_eigenvalue >= -tol
        && trace_residual <= tol
        && signalling_a_to_b <= tol
        && signalling_b_to_a <= tol;
    Ok(QnsReport {
        min_eigenvalue,
        trace_residual,
        signalling_a_to_b,
        signalling_b_to_a,
        pass,
    })
}

/// Classical-to-quantum no-signalling correlation `(σ_{x,y})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CqnsCorrelation {
    dims: CorrDims,
    states: Vec<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CqnsReport {
    pub min_eigenvalue: f64,
    pub trace_residual: f64,
    /// Dependence of `Tr_A σ_{x,y}` on `x`.
    pub marginal_b_residual: f64,
    /// Dependence of `Tr_B σ_{x,y}` on `y`.
    pub marginal_a_residual: f64,
    pub pass: bool,
}

impl CqnsCorrelation {
    pub fn from_states_unchecked(dims: CorrDims, states: Vec<Matrix>) -> Result<Self> {
        dims.check_positive()?;
        if states.len() != dims.input() {
            return Err(Error::Dimension(format!(
                "{} states for {} input pairs",
                states.len(),
                dims.input()
            )));
        }
        for s in &states {
            if s.rows() != dims.output() || s.cols() != dims.output() {
                return Err(Error::Dimension(format!(
                    "states must be {0}x{0}, got {1}x{2}",
                    dims.output(),
                    s.rows(),
                    s.cols()
                )));
            }
        }
        Ok(CqnsCorrelation {
            dims,
            states,
            witness: None,
        })
    }

    pub fn from_states(dims: CorrDims, states: Vec<Matrix>) -> Result<Self> {
        let c = CqnsCorrelation::from_states_unchecked(dims, states)?;
        let r = c.verify(TOL_ALG)?;
        if !r.pass {
            return Err(Error::Invalid(format!("not a CQNS correlation: {r:?}")));
        }
        Ok(c)
    }

    pub fn with_witness(mut self, witness: Witness) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn dims(&self) -> CorrDims {
        self.dims
    }

    pub fn witness(&self) -> Option<&Witness> {
        self.witness.as_ref()
    }

    pub fn states(&self) -> &[Matrix] {
        &self.states
    }

    /// `σ_{x,y}`.
    pub fn state(&self, x: usize, y: usize) -> &Matrix {
        &self.states[x * self.dims.y + y]
    }

    /// `Γ(ρ) = sum_{x,y} <ρ (e_x⊗e_y), e_x⊗e_y> σ_{x,y}`.
    pub fn apply(&self, rho: &Matrix) -> Result<Matrix> {
        let n = self.dims.input();
        if rho.rows() != n || rho.cols() != n {
            return Err(Error::Dimension(format!("input must be {n}x{n}")));
        }
        let m = self.dims.output();
        let mut out = Matrix::zeros(m, m);
        for (i, s) in self.states.iter().enumerate() {
            out += &s.scale(rho[(i, i)]);
        }
        Ok(out)
    }

    pub fn verify(&self, tol: f64) -> Result<CqnsReport> {
        let d = self.dims;
        let mut min_eigenvalue = f64::INFINITY;
        let mut trace_residual: f64 = 0.0;
        for s in &self.states {
            min_eigenvalue = min_eigenvalue.min(linalg::min_eigenvalue(s)?);
            trace_residual = trace_residual.max((s.trace() - 1.0).norm());
        }
        let mut marginal_b_residual: f64 = 0.0;
        let mut marginal_a_residual: f64 = 0.0;
        for y in 0..d.y {
            let reference = partial_trace(self.state(0, y), &[d.a, d.b], 0)?;
            for x in 1..d.x {
                let m = partial_trace(self.state(x, y), &[d.a, d.b], 0)?;
                marginal_b_residual = marginal_b_residual.max(m.max_abs_diff(&reference));
            }
        }
        for x in 0..d.x {
            let reference = partial_trace(self.state(x, 0), &[d.a, d.b], 1)?;
            for y in 1..d.y {
                let m = partial_trace(self.state(x, y), &[d.a, d.b], 1)?;
                marginal_a_residual = marginal_a_residual.max(m.max_abs_diff(&reference));
            }
        }
        let pass = min_eigenvalue >= -tol
            && trace_residual <= tol
            && marginal_a_residual <= tol
            && marginal_b_residual <= tol;
        Ok(CqnsReport {
            min_eigenvalue,
            trace_residual,
            marginal_b_residual,
            marginal_a_residual,
            pass,
        })
    }
}

/// Classical no-signalling correlation `p(a,b|x,y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NsJson", into = "NsJson")]
pub struct NsCorrelation {
    dims: CorrDims,
    table: Vec<f64>,
    witness: Option<Witness>,
}

#[derive(Serialize, Deserialize)]
struct NsJson {
    dims: CorrDims,
    table: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<Witness>,
}

impl TryFrom<NsJson> for NsCorrelation {
    type Error = Error;

    fn try_from(j: NsJson) -> Result<Self> {
        let d = j.dims;
        let shape_err = || Error::Dimension(format!("table shape does not match {d:?}"));
        if j.table.len() != d.x {
            return Err(shape_err());
        }
        let mut flat = Vec::with_capacity(d.input() * d.output());
        for tx in &j.table {
            if tx.len() != d.y {
                return Err(shape_err());
            }
            for ty in tx {
                if ty.len() != d.a {
                    return Err(shape_err());
                }
                for ta in ty {
                    if ta.len() != d.b {
                        return Err(shape_err());
                    }
                    flat.extend_from_slice(ta);
                }
            }
        }
        let mut p = NsCorrelation::from_table_unchecked(d, flat)?;
        p.witness = j.witness;
        Ok(p)
    }
}

impl From<NsCorrelation> for NsJson {
    fn from(p: NsCorrelation) -> Self {
        let d = p.dims;
        let table = (0..d.x)
            .map(|x| {
                (0..d.y)
                    .map(|y| {
                        (0..d.a)
                            .map(|a| (0..d.b).map(|b| p.p(a, b, x, y)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        NsJson {
            dims: d,
            table,
            witness: p.witness,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NsReport {
    pub min_entry: f64,
    pub normalization_residual: f64,
    /// Dependence of `sum_a p(a,b|x,y)` on `x`.
    pub signalling_a_to_b: f64,
    /// Dependence of `sum_b p(a,b|x,y)` on `y`.
    pub signalling_b_to_a: f64,
    pub pass: bool,
}

impl NsCorrelation {
    /// Flat table indexed `((x * |Y| + y) * |A| + a) * |B| + b`, shape-checked only.
    pub fn from_table_unchecked(dims: CorrDims, table: Vec<f64>) -> Result<Self> {
        dims.check_positive()?;
        if table.len() != dims.input() * dims.output() {
            return Err(Error::Dimension(format!(
                "{} entries for dims {dims:?}",
                table.len()
            )));
        }
        Ok(NsCorrelation {
            dims,
            table,
            witness: None,
        })
    }

    /// Validates within [`TOL_PROB`]; tiny negative entries are clamped to zero.
    pub fn new(dims: CorrDims, mut table: Vec<f64>) -> Result<Self> {
        for v in table.iter_mut() {
            if *v < 0.0 && *v > -NEG_CLAMP {
                *v = 0.0;
            }
        }
        let p = NsCorrelation::from_table_unchecked(dims, table)?;
        let r = p.verify(TOL_PROB);
        if !r.pass {
            return Err(Error::Invalid(format!("not a no-signalling table: {r:?}")));
        }
        Ok(p)
    }

    /// `p(a,b|x,y) = δ_{a,f(x)} δ_{b,g(y)}`.
    pub fn deterministic(dims: CorrDims, f: &[usize], g: &[usize]) -> Result<Self> {
        if f.len() != dims.x || g.len() != dims.y {
            return Err(Error::Dimension("strategy length does not match inputs".into()));
        }
        if f.iter().any(|&a| a >= dims.a) || g.iter().any(|&b| b >= dims.b) {
            return Err(Error::Invalid("strategy value out of range".into()));
        }
        let mut t = vec![0.0; dims.input() * dims.output()];
        for x in 0..dims.x {
            for y in 0..dims.y {
                t[((x * dims.y + y) * dims.a + f[x]) * dims.b + g[y]] = 1.0;
            }
        }
        NsCorrelation::new(dims, t)
    }

    pub fn uniform(dims: CorrDims) -> Self {
        let v = 1.0 / dims.output() as f64;
        NsCorrelation {
            dims,
            table: vec![v; dims.input() * dims.output()],
            witness: None,
        }
    }

    pub fn with_witness(mut self, witness: Witness) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn witness(&self) -> Option<&Witness> {
        self.witness.as_ref()
    }

    pub fn dims(&self) -> CorrDims {
        self.dims
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// `p(a,b|x,y)`.
    pub fn p(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        let d = self.dims;
        self.table[((x * d.y + y) * d.a + a) * d.b + b]
    }

    pub fn verify(&self, tol: f64) -> NsReport {
        let d = self.dims;
        let min_entry = self.table.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut normalization_residual: f64 = 0.0;
        for x in 0..d.x {
            for y in 0..d.y {
                let s: f64 = (0..d.a)
                    .flat_map(|a| (0..d.b).map(move |b| (a, b)))
                    .map(|(a, b)| self.p(a, b, x, y))
                    .sum();
                normalization_residual = normalization_residual.max((s - 1.0).abs());
            }
        }
        let bob = |b: usize, x: usize, y: usize| (0..d.a).map(|a| self.p(a, b, x, y)).sum::<f64>();
        let alice =
            |a: usize, x: usize, y: usize| (0..d.b).map(|b| self.p(a, b, x, y)).sum::<f64>();
        let mut signalling_a_to_b: f64 = 0.0;
        let mut signalling_b_to_a: f64 = 0.0;
        for x in 0..d.x {
            for y in 0..d.y {
                for b in 0..d.b {
                    signalling_a_to_b = signalling_a_to_b.max((bob(b, x, y) - bob(b, 0, y)).abs());
                }
                for a in 0..d.a {
                    signalling_b_to_a =
                        signalling_b_to_a.max((alice(a, x, y) - alice(a, x, 0)).abs());
                }
            }
        }
        let pass = min_entry >= -tol
            && normalization_residual <= tol
            && signalling_a_to_b <= tol
            && signalling_b_to_a <= tol;
        NsReport {
            min_entry,
            normalization_residual,
            signalling_a_to_b,
            signalling_b_to_a,
            pass,
        }
    }

    /// `max_{x, a != b} p(a,b|x,x)`; zero for synchronous correlations.
    pub fn synchronicity_defect(&self) -> Result<f64> {
        let d = self.dims;
        if d.x != d.y || d.a != d.b {
            return Err(Error::Dimension("synchronicity needs X = Y and A = B".into()));
        }
        let mut worst: f64 = 0.0;
        for x in 0..d.x {
            for a in 0..d.a {
                for b in 0..d.b {
                    if a != b {
                        worst = worst.max(self.p(a, b, x, x));
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// `(p_2 ∘ p_1)(z,w|x,y) = sum_{a,b} p_2(z,w|a,b) p_1(a,b|x,y)`.
pub fn compose_ns(p2: &NsCorrelation, p1: &NsCorrelation) -> Result<NsCorrelation> {
    let (d1, d2) = (p1.dims, p2.dims);
    if d2.x != d1.a || d2.y != d1.b {
        return Err(Error::Dimension(format!(
            "cannot compose {d2:?} after {d1:?}"
        )));
    }
    let d = CorrDims::new(d1.x, d1.y, d2.a, d2.b);
    let mut t = vec![0.0; d.input() * d.output()];
    for x in 0..d.x {
        for y in 0..d.y {
            for z in 0..d.a {
                for w in 0..d.b {
                    let mut s = 0.0;
                    for a in 0..d1.a {
                        for b in 0..d1.b {
                            s += p2.p(z, w, a, b) * p1.p(a, b, x, y);
                        }
                    }
                    t[((x * d.y + y) * d.a + z) * d.b + w] = s;
                }
            }
        }
    }
    NsCorrelation::new(d, t)
}

/// `Γ_p`: the channel with diagonal Choi entries `p(a,b|x,y)`.
pub fn from_classical(p: &NsCorrelation) -> QnsCorrelation {
    let d = p.dims;
    let n = d.input() * d.output();
    let mut choi = Matrix::zeros(n, n);
    for x in 0..d.x {
        for y in 0..d.y {
            for a in 0..d.a {
                for b in 0..d.b {
                    let i = ((x * d.y + y) * d.a + a) * d.b + b;
                    choi[(i, i)] = linalg::c64(p.p(a, b, x, y), 0.0);
                }
            }
        }
    }
    QnsCorrelation {
        dims: d,
        choi,
        witness: None,
    }
}

/// `σ_{x,y} = Γ(e_x e_x^* ⊗ e_y e_y^*)`.
pub fn reduce_e(g: &QnsCorrelation) -> CqnsCorrelation {
    let d = g.dims;
    let m = d.output();
    let states = (0..d.input())
        .map(|i| g.choi.submatrix(i * m, i * m, m, m))
        .collect();
    CqnsCorrelation {
        dims: d,
        states,
        witness: None,
    }
}

/// `p(a,b|x,y) = <σ_{x,y} (e_a⊗e_b), e_a⊗e_b>`.
pub fn reduce_n(c: &CqnsCorrelation) -> NsCorrelation {
    let d = c.dims;
    let mut t = Vec::with_capacity(d.input() * d.output());
    for s in &c.states {
        for i in 0..d.output() {
            t.push(s[(i, i)].re);
        }
    }
    NsCorrelation {
        dims: d,
        table: t,
        witness: None,
    }
}

/// `Γ = 𝔈 ∘ Δ_{XY}`.
pub fn lift_cqns(c: &CqnsCorrelation) -> QnsCorrelation {
    let d = c.dims;
    let m = d.output();
    let n = d.input() * m;
    let mut choi = Matrix::zeros(n, n);
    for (i, s) in c.states.iter().enumerate() {
        choi.set_submatrix(i * m, i * m, s);
    }
    QnsCorrelation {
        dims: d,
        choi,
        witness: None,
    }
}

/// Choi matrix of `Φ ⊗ Ψ` in `(X, Y, A, B)` order.
pub fn product_choi(phi: &Matrix, psi: &Matrix, dims: CorrDims) -> Result<Matrix> {
    let k = kron(phi, psi);
    permute_systems(&k, &[dims.x, dims.a, dims.y, dims.b], &[0, 2, 1, 3])
}

/// `sum_i λ_i Φ_i ⊗ Ψ_i`.
pub fn build_local(dims: CorrDims, terms: &[LocalTerm]) -> Result<QnsCorrelation> {
    dims.check_positive()?;
    if terms.is_empty() {
        return Err(Error::Invalid("local decomposition needs at least one term".into()));
    }
    let total: f64 = terms.iter().map(|t| t.weight).sum();
    if terms.iter().any(|t| t.weight < 0.0) || (total - 1.0).abs() > TOL_ALG {
        return Err(Error::Invalid(format!(
            "weights must be non-negative and sum to 1 (sum {total})"
        )));
    }
    let n = dims.input() * dims.output();
    let mut choi = Matrix::zeros(n, n);
    for (i, t) in terms.iter().enumerate() {
        if !linalg::is_channel(&t.phi, dims.x, dims.a, TOL_ALG)? {
            return Err(Error::NotChannel(format!("term {i}: first factor")));
        }
        if !linalg::is_channel(&t.psi, dims.y, dims.b, TOL_ALG)? {
            return Err(Error::NotChannel(format!("term {i}: second factor")));
        }
        choi += &product_choi(&t.phi, &t.psi, dims)?.scale_real(t.weight);
    }
    Ok(QnsCorrelation {
        dims,
        choi,
        witness: Some(Witness::Local {
            terms: terms.to_vec(),
        }),
    })
}

/// `Γ_{E⊙F,σ}`.
pub fn build_quantum(
    e: &StochasticMatrix,
    f: &StochasticMatrix,
    sigma: &Matrix,
) -> Result<QnsCorrelation> {
    let o = stochastic::odot(e, f)?;
    let choi = o.channel(sigma)?;
    Ok(QnsCorrelation {
        dims: CorrDims::new(e.dim_x(), f.dim_x(), e.dim_a(), f.dim_a()),
        choi,
        witness: Some(Witness::Quantum {
            e: e.clone(),
            f: f.clone(),
            sigma: sigma.clone(),
        }),
    })
}

/// `Γ_{E·F,σ}` for a commuting pair.
pub fn build_qc(
    e: &StochasticMatrix,
    f: &StochasticMatrix,
    sigma: &Matrix,
    tol_comm: f64,
) -> Result<QnsCorrelation> {
    let p = stochastic::dot(e, f, tol_comm)?;
    let choi = p.channel(sigma)?;
    Ok(QnsCorrelation {
        dims: CorrDims::new(e.dim_x(), f.dim_x(), e.dim_a(), f.dim_a()),
        choi,
        witness: Some(Witness::QuantumCommuting {
            e: e.clone(),
            f: f.clone(),
            sigma: sigma.clone(),
        }),
    })
}

/// Rebuilds the Choi matrix described by a witness.
pub fn rebuild_from_witness(dims: CorrDims, w: &Witness) -> Result<Matrix> {
    let rebuilt = match w {
        Witness::Local { terms } => build_local(dims, terms)?,
        Witness::Quantum { e, f, sigma } => build_quantum(e, f, sigma)?,
        Witness::QuantumCommuting { e, f, sigma } => build_qc(e, f, sigma, TOL_COMM)?,
        Witness::Tracial { algebra, e } => symmetry::build_tracial(e, algebra)?,
    };
    if rebuilt.dims != dims {
        return Err(Error::Dimension(format!(
            "witness describes {:?}, correlation has {dims:?}",
            rebuilt.dims
        )));
    }
    Ok(rebuilt.choi)
}

/// Max entrywise deviation between the stored Choi matrix and the one
/// rebuilt from the attached witness, if any.
pub fn witness_residual(g: &QnsCorrelation) -> Result<Option<f64>> {
    match &g.witness {
        None => Ok(None),
        Some(w) => Ok(Some(rebuild_from_witness(g.dims, w)?.max_abs_diff(&g.choi))),
    }
}

/// `Γ_2 ∘ Γ_1`; the witness is composed when both carry one of the same class.
pub fn compose_correlations(g2: &QnsCorrelation, g1: &QnsCorrelation) -> Result<QnsCorrelation> {
    let (d1, d2) = (g1.dims, g2.dims);
    if d2.x != d1.a || d2.y != d1.b {
        return Err(Error::Dimension(format!(
            "cannot compose {d2:?} after {d1:?}"
        )));
    }
    let dims = CorrDims::new(d1.x, d1.y, d2.a, d2.b);
    let choi = compose_choi(&g2.choi, &g1.choi, d1.input(), d1.output(), d2.output())?;
    let witness = match (&g2.witness, &g1.witness) {
        (Some(w2), Some(w1)) => compose_witnesses(w2, w1, d2, d1)?,
        _ => None,
    };
    Ok(QnsCorrelation {
        dims,
        choi,
        witness,
    })
}

fn compose_witnesses(
    w2: &Witness,
    w1: &Witness,
    d2: CorrDims,
    d1: CorrDims,
) -> Result<Option<Witness>> {
    let w = match (w2, w1) {
        (Witness::Local { terms: t2 }, Witness::Local { terms: t1 }) => {
            let mut terms = Vec::with_capacity(t1.len() * t2.len());
            for b in t2 {
                for a in t1 {
                    let weight = a.weight * b.weight;
                    if weight == 0.0 {
                        continue;
                    }
                    terms.push(LocalTerm {
                        weight,
                        phi: compose_choi(&b.phi, &a.phi, d1.x, d1.a, d2.a)?,
                        psi: compose_choi(&b.psi, &a.psi, d1.y, d1.b, d2.b)?,
                    });
                }
            }
            Witness::Local { terms }
        }
        (
            Witness::Quantum {
                e: e2,
                f: f2,
                sigma: s2,
            },
            Witness::Quantum {
                e: e1,
                f: f1,
                sigma: s1,
            },
        ) => {
            let e = stochastic::compose(e2, e1)?;
            let f = stochastic::compose(f2, f1)?;
            let dims = [e2.dim_h(), f2.dim_h(), e1.dim_h(), f1.dim_h()];
            let sigma = permute_systems(&kron(s2, s1), &dims, &[0, 2, 1, 3])?;
            Witness::Quantum { e, f, sigma }
        }
        (
            Witness::QuantumCommuting {
                e: e2,
                f: f2,
                sigma: s2,
            },
            Witness::QuantumCommuting {
                e: e1,
                f: f1,
                sigma: s1,
            },
        ) => Witness::QuantumCommuting {
            e: stochastic::compose(e2, e1)?,
            f: stochastic::compose(f2, f1)?,
            sigma: kron(s2, s1),
        },
        (
            Witness::Tracial {
                algebra: a2,
                e: e2,
            },
            Witness::Tracial {
                algebra: a1,
                e: e1,
            },
        ) => {
            let (algebra, e) = symmetry::compose_tracial(e2, a2, e1, a1)?;
            Witness::Tracial { algebra, e }
        }
        _ => return Ok(None),
    };
    Ok(Some(w))
}

/// A correlation of any of the three kinds, as stored in JSON files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Correlation {
    Qns(QnsCorrelation),
    Cqns(CqnsCorrelation),
    Ns(NsCorrelation),
}

impl Correlation {
    pub fn dims(&self) -> CorrDims {
        match self {
            Correlation::Qns(g) => g.dims,
            Correlation::Cqns(c) => c.dims,
            Correlation::Ns(p) => p.dims,
        }
    }

    /// The correlation as a channel `M_{XY} -> M_{AB}`.
    pub fn to_qns(&self) -> QnsCorrelation {
        match self {
            Correlation::Qns(g) => g.clone(),
            Correlation::Cqns(c) => lift_cqns(c),
            Correlation::Ns(p) => from_classical(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, omega};
    use crate::random::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn rng() -> StdRng {
        StdRng::seed_from_u64(23)
    }

    fn swap_choi(n: usize) -> Matrix {
        linalg::choi_of_map(n * n, n * n, |rho| {
            permute_systems(rho, &[n, n], &[1, 0]).unwrap()
        })
    }

    #[test]
    fn identity_channel_is_qns() {
        let d = CorrDims::new(2, 3, 2, 3);
        let r = is_qns(&omega(6), d, TOL_ALG).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn swap_channel_signals() {
        let d = CorrDims::new(2, 2, 2, 2);
        let r = is_qns(&swap_choi(2), d, TOL_ALG).unwrap();
        assert!(!r.pass);
        assert!(r.signalling_a_to_b > 0.5);
        assert!(r.min_eigenvalue > -1e-12 && r.trace_residual < 1e-12);
    }

    #[test]
    fn classical_lift_is_qns() {
        let mut r = rng();
        let d = CorrDims::new(2, 3, 2, 2);
        for _ in 0..5 {
            let p = random_ns(&mut r, d);
            let rep = from_classical(&p).verify(TOL_ALG).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn from_classical_examples() {
        let d = CorrDims::new(2, 2, 2, 3);
        let p = NsCorrelation::deterministic(d, &[1, 0], &[2, 1]).unwrap();
        let c = from_classical(&p);
        for i in 0..c.choi().rows() {
            for j in 0..c.choi().cols() {
                let v = c.choi()[(i, j)];
                assert!(v == ZERO || v == c64(1.0, 0.0));
                if i != j {
                    assert_eq!(v, ZERO);
                }
            }
        }
        let u = from_classical(&NsCorrelation::uniform(d));
        assert!(u.choi().max_abs_diff(&Matrix::identity(24).scale_real(1.0 / 6.0)) < 1e-15);
    }

    #[test]
    fn reductions_round_trip() {
        let mut r = rng();
        let d = CorrDims::new(3, 2, 2, 2);
        let p = random_ns(&mut r, d);
        let back = reduce_n(&reduce_e(&from_classical(&p)));
        assert_eq!(back.table(), p.table());
        let g = from_classical(&p);
        assert_eq!(lift_cqns(&reduce_e(&g)).choi(), g.choi());
        let e = reduce_e(&g);
        for x in 0..3 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        assert_eq!(e.state(x, y)[(a * 2 + b, a * 2 + b)].re, p.p(a, b, x, y));
                    }
                }
            }
        }
    }

    #[test]
    fn quantum_reduction_is_cqns() {
        let mut r = rng();
        let e = random_stochastic(&mut r, 2, 2, 2);
        let f = random_stochastic(&mut r, 3, 2, 2);
        let sigma = random_state(&mut r, 4);
        let g = build_quantum(&e, &f, &sigma).unwrap();
        let c = reduce_e(&g);
        assert!(c.verify(TOL_ALG).unwrap().pass);
        assert!(reduce_n(&c).verify(TOL_ALG).pass);
    }

    #[test]
    fn local_examples() {
        let d = CorrDims::new(2, 3, 2, 3);
        let single = build_local(
            d,
            &[LocalTerm {
                weight: 1.0,
                phi: omega(2),
                psi: omega(3),
            }],
        )
        .unwrap();
        assert!(single.choi().max_abs_diff(&omega(6)) < 1e-15);
        let dep = |x: usize, a: usize| Matrix::identity(x * a).scale_real(1.0 / a as f64);
        let two = build_local(
            d,
            &[
                LocalTerm {
                    weight: 0.3,
                    phi: dep(2, 2),
                    psi: dep(3, 3),
                },
                LocalTerm {
                    weight: 0.7,
                    phi: dep(2, 2),
                    psi: dep(3, 3),
                },
            ],
        )
        .unwrap();
        assert!(two.choi().max_abs_diff(&dep(6, 6)) < 1e-15);
    }

    #[test]
    fn local_mixture_verifies() {
        let mut r = rng();
        let d = CorrDims::new(2, 2, 3, 2);
        let terms: Vec<LocalTerm> = [0.2, 0.5, 0.3]
            .iter()
            .map(|&w| LocalTerm {
                weight: w,
                phi: random_channel(&mut r, 2, 3),
                psi: random_channel(&mut r, 2, 2),
            })
            .collect();
        let g = build_local(d, &terms).unwrap();
        assert!(g.verify(TOL_ALG).unwrap().pass);
        assert!(witness_residual(&g).unwrap().unwrap() < 1e-15);
    }

    #[test]
    fn local_rejects_bad_terms() {
        let d = CorrDims::new(2, 2, 2, 2);
        let bad = LocalTerm {
            weight: 1.0,
            phi: omega(2).scale_real(2.0),
            psi: omega(2),
        };
        assert!(build_local(d, &[bad]).is_err());
        let ok = LocalTerm {
            weight: 0.5,
            phi: omega(2),
            psi: omega(2),
        };
        assert!(build_local(d, &[ok]).is_err());
    }

    #[test]
    fn quantum_classical_pvm_example() {
        // p(a,b|x,y) = <(E_{x,a} ⊗ F_{y,b}) ξ, ξ> for classical E, F.
        let mut r = rng();
        let fe = vec![random_pvm(&mut r, 2, 2), random_pvm(&mut r, 2, 2)];
        let ff = vec![random_pvm(&mut r, 2, 2), random_pvm(&mut r, 2, 2)];
        let e = StochasticMatrix::from_povms(&fe).unwrap();
        let f = StochasticMatrix::from_povms(&ff).unwrap();
        let xi = random_unit_vector(&mut r, 4);
        let sigma = Matrix::outer(&xi, &xi);
        let g = build_quantum(&e, &f, &sigma).unwrap();
        let p = reduce_n(&reduce_e(&g));
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        let op = kron(&fe[x][a], &ff[y][b]);
                        let v = linalg::vdot(&xi, &op.mul_vec(&xi)).re;
                        assert!((p.p(a, b, x, y) - v).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn quantum_with_trivial_spaces_is_local() {
        let mut r = rng();
        let phi = random_channel(&mut r, 2, 2);
        let psi = random_channel(&mut r, 3, 2);
        let e = StochasticMatrix::from_channel_choi(&phi, 2, 2).unwrap();
        let f = StochasticMatrix::from_channel_choi(&psi, 3, 2).unwrap();
        let q = build_quantum(&e, &f, &Matrix::identity(1)).unwrap();
        let l = build_local(
            CorrDims::new(2, 3, 2, 2),
            &[LocalTerm {
                weight: 1.0,
                phi,
                psi,
            }],
        )
        .unwrap();
        assert!(q.choi().max_abs_diff(l.choi()) < 1e-14);
    }

    #[test]
    fn quantum_product_state_splits() {
        let mut r = rng();
        let e = random_stochastic(&mut r, 2, 2, 2);
        let f = random_stochastic(&mut r, 2, 3, 3);
        let s1 = random_state(&mut r, 2);
        let s2 = random_state(&mut r, 3);
        let g = build_quantum(&e, &f, &kron(&s1, &s2)).unwrap();
        let expected = product_choi(
            &e.channel(&s1).unwrap(),
            &f.channel(&s2).unwrap(),
            g.dims(),
        )
        .unwrap();
        assert!(g.choi().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn random_quantum_and_qc_are_qns() {
        let mut r = rng();
        for _ in 0..3 {
            let e = random_stochastic(&mut r, 2, 2, 2);
            let f = random_stochastic(&mut r, 2, 2, 2);
            let sigma = random_state(&mut r, 4);
            let g = build_quantum(&e, &f, &sigma).unwrap();
            assert!(g.verify(TOL_ALG).unwrap().pass);
            let qc = build_qc(&e.extend_right(2), &f.extend_left(2), &sigma, TOL_COMM).unwrap();
            assert!(qc.choi().max_abs_diff(g.choi()) < 1e-12);
            assert!(witness_residual(&qc).unwrap().unwrap() < 1e-15);
        }
    }

    #[test]
    fn compose_with_identity_is_unchanged() {
        let mut r = rng();
        let d = CorrDims::new(2, 2, 2, 3);
        let g = from_classical(&random_ns(&mut r, d));
        let id_out = QnsCorrelation::from_choi(CorrDims::new(2, 3, 2, 3), omega(6)).unwrap();
        let id_in = QnsCorrelation::from_choi(CorrDims::new(2, 2, 2, 2), omega(4)).unwrap();
        assert!(compose_correlations(&id_out, &g).unwrap().choi().max_abs_diff(g.choi()) < 1e-15);
        assert!(compose_correlations(&g, &id_in).unwrap().choi().max_abs_diff(g.choi()) < 1e-15);
    }

    #[test]
    fn classical_composition_matches_table_product() {
        let mut r = rng();
        let p1 = random_ns(&mut r, CorrDims::new(2, 2, 3, 2));
        let p2 = random_ns(&mut r, CorrDims::new(3, 2, 2, 2));
        let lhs = compose_correlations(&from_classical(&p2), &from_classical(&p1)).unwrap();
        let rhs = from_classical(&compose_ns(&p2, &p1).unwrap());
        assert!(lhs.choi().max_abs_diff(rhs.choi()) < 1e-15);
    }

    #[test]
    fn composed_witnesses_rebuild() {
        let mut r = rng();
        let (e1, f1) = (random_stochastic(&mut r, 2, 2, 2), random_stochastic(&mut r, 2, 2, 1));
        let (e2, f2) = (random_stochastic(&mut r, 2, 3, 1), random_stochastic(&mut r, 2, 2, 2));
        let g1 = build_quantum(&e1, &f1, &random_state(&mut r, 2)).unwrap();
        let g2 = build_quantum(&e2, &f2, &random_state(&mut r, 2)).unwrap();
        let g = compose_correlations(&g2, &g1).unwrap();
        assert_eq!(g.witness().unwrap().class_tag(), "q");
        assert!(witness_residual(&g).unwrap().unwrap() < 1e-8);
        assert!(g.verify(TOL_ALG).unwrap().pass);

        let l1 = build_local(
            CorrDims::new(2, 2, 2, 2),
            &[LocalTerm {
                weight: 1.0,
                phi: random_channel(&mut r, 2, 2),
                psi: random_channel(&mut r, 2, 2),
            }],
        )
        .unwrap();
        let l2 = build_local(
            CorrDims::new(2, 2, 2, 2),
            &[
                LocalTerm {
                    weight: 0.4,
                    phi: random_channel(&mut r, 2, 2),
                    psi: random_channel(&mut r, 2, 2),
                },
                LocalTerm {
                    weight: 0.6,
                    phi: random_channel(&mut r, 2, 2),
                    psi: random_channel(&mut r, 2, 2),
                },
            ],
        )
        .unwrap();
        let l = compose_correlations(&l2, &l1).unwrap();
        assert_eq!(l.witness().unwrap().class_tag(), "loc");
        assert!(witness_residual(&l).unwrap().unwrap() < 1e-12);
        let mixed = compose_correlations(&l2, &from_classical(&random_ns(&mut r, CorrDims::new(2, 2, 2, 2)))).unwrap();
        assert!(mixed.witness().is_none());
    }

    #[test]
    fn ns_validation() {
        let d = CorrDims::new(1, 1, 2, 1);
        assert!(NsCorrelation::new(d, vec![1.0, -1e-13]).is_ok());
        assert!(NsCorrelation::new(d, vec![1.0 + 1e-6, 0.0]).is_err());
        assert!(NsCorrelation::new(d, vec![1.1, -0.1]).is_err());
        let signalling = NsCorrelation::from_table_unchecked(
            CorrDims::new(2, 1, 1, 2),
            vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let rep = signalling.verify(TOL_PROB);
        assert!(!rep.pass && rep.signalling_a_to_b == 1.0);
    }

    #[test]
    fn cqns_marginal_failure() {
        let d = CorrDims::new(2, 1, 2, 1);
        let states = vec![Matrix::unit(2, 0, 0), Matrix::unit(2, 1, 1)];
        let c = CqnsCorrelation::from_states_unchecked(d, states).unwrap();
        assert!(c.verify(TOL_ALG).unwrap().pass);
        let d2 = CorrDims::new(2, 1, 1, 2);
        let c2 = CqnsCorrelation::from_states_unchecked(
            d2,
            vec![Matrix::unit(2, 0, 0), Matrix::unit(2, 1, 1)],
        )
        .unwrap();
        let r = c2.verify(TOL_ALG).unwrap();
        assert!(!r.pass && r.marginal_b_residual == 1.0);
    }

    #[test]
    fn json_round_trips() {
        let mut r = rng();
        let d = CorrDims::new(2, 2, 2, 2);
        let p = random_ns(&mut r, d);
        let items = vec![
            Correlation::Ns(p.clone()),
            Correlation::Cqns(reduce_e(&from_classical(&p))),
            Correlation::Qns(
                build_quantum(
                    &random_stochastic(&mut r, 2, 2, 1),
                    &random_stochastic(&mut r, 2, 2, 1),
                    &Matrix::identity(1),
                )
                .unwrap(),
            ),
        ];
        for c in items {
            let s = serde_json::to_string(&c).unwrap();
            let back: Correlation = serde_json::from_str(&s).unwrap();
            assert_eq!(back, c);
        }
        let s = serde_json::to_string(&Correlation::Ns(p)).unwrap();
        assert!(s.starts_with("{\"kind\":\"ns\",\"dims\":{\"x\":2,\"y\":2,\"a\":2,\"b\":2},\"table\":[[[["));
    }
}
