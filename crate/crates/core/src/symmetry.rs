//! Fair states and correlations, the involution `Φ ↦ Φ^♯`, and tracial
//! constructions over finite-dimensional tracial algebras `⊕_i M_{d_i}`.

use serde::{Deserialize, Serialize};

use crate::correlations::{
    CorrDims, CqnsCorrelation, LocalTerm, NsCorrelation, QnsCorrelation, Witness,
};
use crate::error::{Error, Result};
use crate::linalg::{c64, kron, partial_trace, Matrix, C64, TOL_ALG, ZERO};
use crate::stochastic::{self, StochasticMatrix};

/// `⊕_i M_{d_i}` with the trace `τ(⊕ u_i) = sum_i λ_i Tr(u_i) / d_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlgebraJson", into = "AlgebraJson")]
pub struct TracialAlgebra {
    blocks: Vec<usize>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AlgebraJson {
    blocks: Vec<usize>,
    weights: Vec<f64>,
}

impl TryFrom<AlgebraJson> for TracialAlgebra {
    type Error = Error;

    fn try_from(j: AlgebraJson) -> Result<Self> {
        TracialAlgebra::new(j.blocks, j.weights)
    }
}

impl From<TracialAlgebra> for AlgebraJson {
    fn from(a: TracialAlgebra) -> Self {
        AlgebraJson {
            blocks: a.blocks,
            weights: a.weights,
        }
    }
}

impl TracialAlgebra {
    pub fn new(blocks: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if blocks.is_empty() || blocks.len() != weights.len() {
            return Err(Error::Invalid(format!(
                "{} blocks with {} weights",
                blocks.len(),
                weights.len()
            )));
        }
        if blocks.contains(&0) {
            return Err(Error::Invalid("block dimensions must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w <= 0.0) || (total - 1.0).abs() > TOL_ALG {
            return Err(Error::Invalid(format!(
                "weights must be positive and sum to 1 (sum {total})"
            )));
        }
        Ok(TracialAlgebra { blocks, weights })
    }

    /// The scalars `C` with `τ = id`.
    pub fn scalars() -> Self {
        TracialAlgebra {
            blocks: vec![1],
            weights: vec![1.0],
        }
    }

    /// `M_d` with the normalised trace.
    pub fn matrix_algebra(d: usize) -> Self {
        TracialAlgebra {
            blocks: vec![d],
            weights: vec![1.0],
        }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_abelian(&self) -> bool {
        self.blocks.iter().all(|&d| d == 1)
    }

    /// `τ(u)` for `u` given block by block.
    pub fn trace(&self, element: &[Matrix]) -> C64 {
        element
            .iter()
            .zip(self.blocks.iter().zip(&self.weights))
            .map(|(u, (&d, &w))| u.trace() * (w / d as f64))
            .sum()
    }

    /// `τ(u v)` without forming the product.
    pub fn trace_product(&self, u: &[Matrix], v: &[Matrix]) -> C64 {
        let mut s = ZERO;
        for (i, (&d, &w)) in self.blocks.iter().zip(&self.weights).enumerate() {
            s += u[i].trace_product(&v[i]) * (w / d as f64);
        }
        s
    }

    /// `A ⊗ B` with blocks `(i, j)` ordered `i`-major, dims `d_i d'_j` and
    /// weights `λ_i μ_j`.
    pub fn tensor(&self, other: &TracialAlgebra) -> TracialAlgebra {
        let mut blocks = Vec::new();
        let mut weights = Vec::new();
        for (&d, &w) in self.blocks.iter().zip(&self.weights) {
            for (&e, &v) in other.blocks.iter().zip(&other.weights) {
                blocks.push(d * e);
                weights.push(w * v);
            }
        }
        TracialAlgebra { blocks, weights }
    }
}

/// A stochastic matrix with entries in a tracial algebra, stored as one
/// stochastic operator matrix per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlgStochasticJson", into = "AlgStochasticJson")]
pub struct AlgStochasticMatrix {
    dim_x: usize,
    dim_a: usize,
    blocks: Vec<StochasticMatrix>,
}

#[derive(Serialize, Deserialize)]
struct AlgStochasticJson {
    #[serde(rename = "dimX")]
    dim_x: usize,
    #[serde(rename = "dimA")]
    dim_a: usize,
    blocks: Vec<Matrix>,
}

impl TryFrom<AlgStochasticJson> for AlgStochasticMatrix {
    type Error = Error;

    fn try_from(j: AlgStochasticJson) -> Result<Self> {
        let mut blocks = Vec::with_capacity(j.blocks.len());
        for m in j.blocks {
            let n = m.rows();
            let xa = j.dim_x * j.dim_a;
            if xa == 0 || n % xa != 0 {
                return Err(Error::Dimension(format!(
                    "block of size {n} is not a multiple of dimX*dimA = {xa}"
                )));
            }
            blocks.push(StochasticMatrix::from_matrix_unchecked(
                j.dim_x,
                j.dim_a,
                n / xa,
                m,
            )?);
        }
        AlgStochasticMatrix::from_blocks_unchecked(j.dim_x, j.dim_a, blocks)
    }
}

impl From<AlgStochasticMatrix> for AlgStochasticJson {
    fn from(e: AlgStochasticMatrix) -> Self {
        AlgStochasticJson {
            dim_x: e.dim_x,
            dim_a: e.dim_a,
            blocks: e.blocks.iter().map(|b| b.matrix().clone()).collect(),
        }
    }
}

impl AlgStochasticMatrix {
    pub fn from_blocks_unchecked(
        dim_x: usize,
        dim_a: usize,
        blocks: Vec<StochasticMatrix>,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Invalid("no algebra blocks".into()));
        }
        for b in &blocks {
            if b.dim_x() != dim_x || b.dim_a() != dim_a {
                return Err(Error::Dimension(format!(
                    "block over ({}, {}) in a matrix over ({dim_x}, {dim_a})",
                    b.dim_x(),
                    b.dim_a()
                )));
            }
        }
        Ok(AlgStochasticMatrix {
            dim_x,
            dim_a,
            blocks,
        })
    }

    /// Builds and verifies each block.
    pub fn new(dim_x: usize, dim_a: usize, blocks: Vec<StochasticMatrix>) -> Result<Self> {
        let e = AlgStochasticMatrix::from_blocks_unchecked(dim_x, dim_a, blocks)?;
        for (i, b) in e.blocks.iter().enumerate() {
            if !b.verify(TOL_ALG)?.pass {
                return Err(Error::NotStochastic(format!("algebra block {i}")));
            }
        }
        Ok(e)
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn blocks(&self) -> &[StochasticMatrix] {
        &self.blocks
    }

    /// `g_{x,x',a,a'}` block by block.
    pub fn g(&self, x: usize, xp: usize, a: usize, ap: usize) -> Vec<Matrix> {
        self.blocks.iter().map(|b| b.block(x, xp, a, ap)).collect()
    }

    /// Checks the block dimensions against `alg`.
    pub fn check_algebra(&self, alg: &TracialAlgebra) -> Result<()> {
        let dims: Vec<usize> = self.blocks.iter().map(|b| b.dim_h()).collect();
        if dims != alg.blocks {
            return Err(Error::Dimension(format!(
                "matrix blocks {dims:?} do not match algebra blocks {:?}",
                alg.blocks
            )));
        }
        Ok(())
    }

    pub fn verify(&self, tol: f64) -> Result<bool> {
        for b in &self.blocks {
            if !b.verify(tol)?.pass {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_semiclassical(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| b.is_semiclassical(tol))
    }

    pub fn is_classical(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| b.is_classical(tol))
    }

    fn all_g(&self) -> Vec<Vec<Matrix>> {
        let (dx, da) = (self.dim_x, self.dim_a);
        let mut out = Vec::with_capacity(dx * dx * da * da);
        for x in 0..dx {
            for xp in 0..dx {
                for a in 0..da {
                    for ap in 0..da {
                        out.push(self.g(x, xp, a, ap));
                    }
                }
            }
        }
        out
    }
}

/// `Tr_1 ρ - (Tr_2 ρ)^t` for `ρ` on `C^n ⊗ C^n`.
pub fn fairness_defect_matrix(rho: &Matrix, n: usize) -> Result<Matrix> {
    let t1 = partial_trace(rho, &[n, n], 0)?;
    let t2 = partial_trace(rho, &[n, n], 1)?;
    Ok(&t1 - &t2.transpose())
}

/// `max |sum_x ρ_{x,x,z,z'} - sum_y ρ_{z',z,y,y}|`.
pub fn fairness_defect(rho: &Matrix, n: usize) -> Result<f64> {
    Ok(fairness_defect_matrix(rho, n)?.max_abs())
}

/// Whether a state on `C^n ⊗ C^n` is fair within `tol`.
pub fn is_fair_state(rho: &Matrix, n: usize, tol: f64) -> Result<bool> {
    stochastic::check_state(rho, n * n)?;
    Ok(fairness_defect(rho, n)? <= tol)
}

/// Matrix of `ρ ↦ Tr_1 ρ - (Tr_2 ρ)^t` from `M_{n^2}` (row-major
/// vectorisation) to `M_n`.
fn fairness_operator(n: usize) -> Matrix {
    let nn = n * n;
    let mut l = Matrix::zeros(nn, nn * nn);
    for x in 0..n {
        for y in 0..n {
            for xp in 0..n {
                for yp in 0..n {
                    let col = (x * n + y) * nn + (xp * n + yp);
                    if x == xp {
                        l[(y * n + yp, col)] += c64(1.0, 0.0);
                    }
                    if y == yp {
                        l[(xp * n + x, col)] -= c64(1.0, 0.0);
                    }
                }
            }
        }
    }
    l
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FairReport {
    /// Largest violation of the output constraint over the span of fair inputs.
    pub residual: f64,
    /// Dimension of the span of fair input states.
    pub fair_input_dimension: usize,
    pub pass: bool,
}

/// Whether `Γ` maps fair states to fair states.
///
/// The span of fair states is the kernel of the fairness operator on the
/// input; `Γ` is fair iff the output fairness operator composed with `Γ`
/// vanishes on that kernel. Singular values below `1e-10` count as zero.
pub fn is_fair(g: &QnsCorrelation, tol: f64) -> Result<FairReport> {
    let d = g.dims();
    if d.x != d.y || d.a != d.b {
        return Err(Error::Dimension(format!(
            "fairness needs X = Y and A = B, got {d:?}"
        )));
    }
    let (n, m) = (d.x, d.a);
    let lx = fairness_operator(n);
    let svd = lx.to_nalgebra().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().cloned().fold(1.0, f64::max);
    let rows: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] >= 1e-10 * smax)
        .collect();
    let rank = rows.len();
    let big = n.pow(4);

    // K: columns L_A(Γ(e_u)) for every matrix unit e_u on X ⊗ X.
    let mm = m * m;
    let mut k = Matrix::zeros(mm, big);
    let choi = g.choi();
    for u in 0..big {
        let (i, j) = (u / (n * n), u % (n * n));
        let block = choi.submatrix(i * mm, j * mm, mm, mm);
        let def = fairness_defect_matrix(&block, m)?;
        for r in 0..mm {
            k[(r, u)] = def.data()[r];
        }
    }
    // Residual K P_ker = K - (K R^*) R, with R the orthonormal row space.
    let r = Matrix::from_fn(rank, big, |p, q| v_t[(rows[p], q)]);
    let kr = &k * &r.adjoint();
    let proj = &kr * &r;
    let residual = k.max_abs_diff(&proj);
    Ok(FairReport {
        residual,
        fair_input_dimension: big - rank,
        pass: residual <= tol,
    })
}

/// Choi matrix of `Φ^♯(ω) = Φ(ω^t)^t`, which is the transpose of the Choi
/// matrix of `Φ`.
pub fn sharp(choi: &Matrix) -> Matrix {
    choi.transpose()
}

fn check_square_corr(e: &AlgStochasticMatrix, alg: &TracialAlgebra) -> Result<CorrDims> {
    e.check_algebra(alg)?;
    if !e.verify(TOL_ALG)? {
        return Err(Error::NotStochastic("tracial input matrix".into()));
    }
    Ok(CorrDims::new(e.dim_x, e.dim_x, e.dim_a, e.dim_a))
}

/// Tracial QNS correlation with Choi entries
/// `C^{x,x',y,y'}_{a,a',b,b'} = τ(g_{x,x',a,a'} g_{y',y,b',b})`.
pub fn build_tracial(e: &AlgStochasticMatrix, alg: &TracialAlgebra) -> Result<QnsCorrelation> {
    let d = check_square_corr(e, alg)?;
    let (dx, da) = (d.x, d.a);
    let all = e.all_g();
    let at = |x: usize, xp: usize, a: usize, ap: usize| &all[((x * dx + xp) * da + a) * da + ap];
    let n = d.input() * d.output();
    let mut choi = Matrix::zeros(n, n);
    for x in 0..dx {
        for y in 0..dx {
            for a in 0..da {
                for b in 0..da {
                    let row = ((x * dx + y) * da + a) * da + b;
                    for xp in 0..dx {
                        for yp in 0..dx {
                            for ap in 0..da {
                                for bp in 0..da {
                                    let col = ((xp * dx + yp) * da + ap) * da + bp;
                                    choi[(row, col)] =
                                        alg.trace_product(at(x, xp, a, ap), at(yp, y, bp, b));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(QnsCorrelation::from_choi_unchecked(d, choi)?.with_witness(Witness::Tracial {
        algebra: alg.clone(),
        e: e.clone(),
    }))
}

/// `sum_j λ_j Φ_j ⊗ Φ_j^♯`.
pub fn build_locally_tracial(
    channels: &[Matrix],
    weights: &[f64],
    dim_x: usize,
    dim_a: usize,
) -> Result<QnsCorrelation> {
    if channels.len() != weights.len() {
        return Err(Error::Invalid(format!(
            "{} channels with {} weights",
            channels.len(),
            weights.len()
        )));
    }
    let terms: Vec<LocalTerm> = channels
        .iter()
        .zip(weights)
        .map(|(c, &w)| LocalTerm {
            weight: w,
            phi: c.clone(),
            psi: sharp(c),
        })
        .collect();
    crate::correlations::build_local(CorrDims::new(dim_x, dim_x, dim_a, dim_a), &terms)
}

/// Tracial CQNS correlation `σ_{x,y} = (τ(g_{x,a,a'} g_{y,b',b}))` from a
/// semi-classical matrix.
pub fn build_tracial_cqns(
    e: &AlgStochasticMatrix,
    alg: &TracialAlgebra,
) -> Result<CqnsCorrelation> {
    let d = check_square_corr(e, alg)?;
    if !e.is_semiclassical(TOL_ALG) {
        return Err(Error::Invalid("tracial CQNS construction needs a semi-classical matrix".into()));
    }
    let (dx, da) = (d.x, d.a);
    let gs: Vec<Vec<Vec<Matrix>>> = (0..dx)
        .map(|x| {
            (0..da * da)
                .map(|aa| e.g(x, x, aa / da, aa % da))
                .collect()
        })
        .collect();
    let mut states = Vec::with_capacity(dx * dx);
    for x in 0..dx {
        for y in 0..dx {
            states.push(Matrix::from_fn(da * da, da * da, |r, c| {
                let (a, b) = (r / da, r % da);
                let (ap, bp) = (c / da, c % da);
                alg.trace_product(&gs[x][a * da + ap], &gs[y][bp * da + b])
            }));
        }
    }
    Ok(CqnsCorrelation::from_states_unchecked(d, states)?.with_witness(Witness::Tracial {
        algebra: alg.clone(),
        e: e.clone(),
    }))
}

/// Tracial NS correlation `p(a,b|x,y) = τ(g_{x,a} g_{y,b})` from a classical
/// matrix.
pub fn build_tracial_ns(e: &AlgStochasticMatrix, alg: &TracialAlgebra) -> Result<NsCorrelation> {
    let d = check_square_corr(e, alg)?;
    if !e.is_classical(TOL_ALG) {
        return Err(Error::Invalid("tracial NS construction needs a classical matrix".into()));
    }
    let (dx, da) = (d.x, d.a);
    let gs: Vec<Vec<Vec<Matrix>>> = (0..dx)
        .map(|x| (0..da).map(|a| e.g(x, x, a, a)).collect())
        .collect();
    let mut table = Vec::with_capacity(d.input() * d.output());
    for x in 0..dx {
        for y in 0..dx {
            for a in 0..da {
                for b in 0..da {
                    table.push(alg.trace_product(&gs[x][a], &gs[y][b]).re);
                }
            }
        }
    }
    Ok(NsCorrelation::new(d, table)?.with_witness(Witness::Tracial {
        algebra: alg.clone(),
        e: e.clone(),
    }))
}

/// Rebuilds a CQNS correlation from a tracial witness.
pub fn rebuild_cqns(w: &Witness) -> Result<CqnsCorrelation> {
    match w {
        Witness::Tracial { algebra, e } => build_tracial_cqns(e, algebra),
        other => Err(Error::Invalid(format!(
            "no CQNS construction for witness class {}",
            other.class_tag()
        ))),
    }
}

/// Rebuilds an NS correlation from a tracial witness.
pub fn rebuild_ns(w: &Witness) -> Result<NsCorrelation> {
    match w {
        Witness::Tracial { algebra, e } => build_tracial_ns(e, algebra),
        other => Err(Error::Invalid(format!(
            "no NS construction for witness class {}",
            other.class_tag()
        ))),
    }
}

/// `ω_{z,z',u,u'} = τ(g_{z,z'} g_{u',u})` for a POVM-type matrix, i.e. one
/// with a single input (`dimX = 1`) and `sum_z g_{z,z} = 1`.
pub fn reciprocal_state(e: &AlgStochasticMatrix, alg: &TracialAlgebra) -> Result<Matrix> {
    if e.dim_x != 1 {
        return Err(Error::Dimension(format!(
            "reciprocal state needs a single-input matrix, got dimX = {}",
            e.dim_x
        )));
    }
    Ok(build_tracial(e, alg)?.choi().clone())
}

/// Checks `target = sum_j λ_j ω_j ⊗ ω_j^t` for states `ω_j`.
pub fn is_locally_reciprocal_certificate(
    terms: &[(f64, Matrix)],
    target: &Matrix,
    tol: f64,
) -> Result<bool> {
    let Some((_, first)) = terms.first() else {
        return Ok(false);
    };
    let n = first.rows();
    if target.rows() != n * n || target.cols() != n * n {
        return Err(Error::Dimension("target does not match term size".into()));
    }
    let total: f64 = terms.iter().map(|t| t.0).sum();
    if terms.iter().any(|t| t.0 < 0.0) || (total - 1.0).abs() > tol {
        return Ok(false);
    }
    let mut sum = Matrix::zeros(n * n, n * n);
    for (w, omega) in terms {
        if stochastic::check_state(omega, n).is_err() {
            return Ok(false);
        }
        sum += &kron(omega, &omega.transpose()).scale_real(*w);
    }
    Ok(sum.max_abs_diff(target) <= tol)
}

/// The tracial data whose reciprocal state is `Γ_{E,τ_A}(ω^{F,τ_B})`:
/// over `A ⊗ B`, `h_{a,a'} = sum_{x,x'} e_{x,x',a,a'} ⊗ g_{x,x'}`.
pub fn reciprocal_image(
    e: &AlgStochasticMatrix,
    alg_e: &TracialAlgebra,
    f: &AlgStochasticMatrix,
    alg_f: &TracialAlgebra,
) -> Result<(TracialAlgebra, AlgStochasticMatrix)> {
    if f.dim_x != 1 {
        return Err(Error::Dimension("reciprocal input needs dimX = 1".into()));
    }
    if f.dim_a != e.dim_x {
        return Err(Error::Dimension(format!(
            "state over {} points fed to a correlation with {} inputs",
            f.dim_a, e.dim_x
        )));
    }
    compose_tracial(e, alg_e, f, alg_f)
}

/// Tracial data of `Γ_{E_2,τ_2} ∘ Γ_{E_1,τ_1} = Γ_{E_2∘E_1, τ_2⊗τ_1}`.
pub fn compose_tracial(
    e2: &AlgStochasticMatrix,
    alg2: &TracialAlgebra,
    e1: &AlgStochasticMatrix,
    alg1: &TracialAlgebra,
) -> Result<(TracialAlgebra, AlgStochasticMatrix)> {
    e2.check_algebra(alg2)?;
    e1.check_algebra(alg1)?;
    let mut blocks = Vec::with_capacity(e2.blocks.len() * e1.blocks.len());
    for b2 in &e2.blocks {
        for b1 in &e1.blocks {
            blocks.push(stochastic::compose(b2, b1)?);
        }
    }
    Ok((
        alg2.tensor(alg1),
        AlgStochasticMatrix::from_blocks_unchecked(e1.dim_x, e2.dim_a, blocks)?,
    ))
}
