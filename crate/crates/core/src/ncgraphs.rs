//! Classical graphs, symmetric skew subspaces of `C^n ⊗ C^n`, quantum
//! colourings and homomorphisms, and the Lovász theta number.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::correlations::{self, CorrDims, CqnsCorrelation, Witness};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, kron_vec, Matrix, C64, EIG_CLAMP, ONE, TOL_ALG, ZERO};
use crate::sdp::{self, SdpOptions, SdpProblem, SparseSym};
use crate::stochastic::StochasticMatrix;
use crate::symmetry::{self, AlgStochasticMatrix, TracialAlgebra};

pub const TOL_GAME: f64 = 1e-9;

/// Simple undirected graph on `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;

    fn try_from(j: GraphJson) -> Result<Self> {
        Graph::new(j.n, j.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<Graph> for GraphJson {
    fn from(g: Graph) -> Self {
        GraphJson {
            n: g.n,
            edges: g.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl Graph {
    /// Graph with the given edges; duplicates and reversed pairs collapse.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Invalid(format!("edge ({i},{j}) out of range for {n} vertices")));
            }
            if i == j {
                return Err(Error::Invalid(format!("loop at vertex {i}")));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Graph { n, edges: set })
    }

    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        Graph {
            n,
            edges: (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
        }
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Invalid("a cycle needs at least 3 vertices".into()));
        }
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().cloned()
    }

    /// Both orientations of every edge, sorted.
    pub fn ordered_edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.edges.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect();
        out.sort_unstable();
        out
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn complement(&self) -> Graph {
        Graph {
            n: self.n,
            edges: (0..self.n)
                .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
                .filter(|e| !self.edges.contains(e))
                .collect(),
        }
    }

    /// Whether `f` maps edges to edges.
    pub fn is_homomorphism(&self, target: &Graph, f: &[usize]) -> bool {
        f.len() == self.n
            && f.iter().all(|&v| v < target.n)
            && self.edges.iter().all(|&(i, j)| target.adjacent(f[i], f[j]))
    }
}

/// Largest independent set size by exhaustive search (`n <= 25`).
pub fn independence_number(g: &Graph) -> Result<usize> {
    let n = g.n;
    if n > 25 {
        return Err(Error::Invalid(format!("exhaustive search limited to 25 vertices, got {n}")));
    }
    let mut nbr = vec![0u32; n];
    for (i, j) in g.edges() {
        nbr[i] |= 1 << j;
        nbr[j] |= 1 << i;
    }
    fn grow(cand: u32, size: usize, nbr: &[u32], best: &mut usize) {
        if cand == 0 {
            *best = (*best).max(size);
            return;
        }
        if size + cand.count_ones() as usize <= *best {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        grow(cand & !(1 << v) & !nbr[v], size + 1, nbr, best);
        grow(cand & !(1 << v), size, nbr, best);
    }
    let mut best = 0;
    let all = if n == 0 { 0 } else { u32::MAX >> (32 - n) };
    grow(all, 0, &nbr, &mut best);
    Ok(best)
}

/// Subspace of `C^n ⊗ C^n` invariant under the flip and orthogonal to
/// `sum_z e_z ⊗ e_z`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkewSubspace {
    n: usize,
    basis: Vec<Vec<C64>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SkewJson {
    Full { n: usize, basis: Vec<Vec<C64>> },
    Bare(Vec<Vec<C64>>),
}

impl<'de> Deserialize<'de> for SkewSubspace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (n, basis) = match SkewJson::deserialize(d)? {
            SkewJson::Full { n, basis } => (n, basis),
            SkewJson::Bare(basis) => {
                let len = basis.first().map_or(0, Vec::len);
                let n = (len as f64).sqrt().round() as usize;
                if basis.is_empty() || n * n != len {
                    return Err(serde::de::Error::custom(
                        "bare basis list needs at least one vector of square length",
                    ));
                }
                (n, basis)
            }
        };
        SkewSubspace::new(n, basis).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewReport {
    pub skew_residual: f64,
    pub symmetry_residual: f64,
}

/// Whether `vectors` are orthonormal vectors of length `len` to `1e-12`.
pub fn is_orthonormal(vectors: &[Vec<C64>], len: usize) -> bool {
    vectors.iter().all(|v| v.len() == len)
        && vectors.iter().enumerate().all(|(i, u)| {
            vectors.iter().enumerate().all(|(j, v)| {
                let expected = if i == j { 1.0 } else { 0.0 };
                (linalg::vdot(u, v) - c64(expected, 0.0)).norm() <= 1e-12
            })
        })
}

/// `m(ζ) = sum_z ζ_{z,z}`.
pub fn diagonal_functional(zeta: &[C64], n: usize) -> C64 {
    (0..n).map(|z| zeta[z * n + z]).sum()
}

/// Swaps the tensor factors of a vector in `C^n ⊗ C^n`.
pub fn flip(zeta: &[C64], n: usize) -> Vec<C64> {
    (0..n * n).map(|k| zeta[(k % n) * n + k / n]).collect()
}

impl SkewSubspace {
    /// Orthonormalises `vectors` and checks skewness and flip symmetry.
    pub fn new(n: usize, vectors: Vec<Vec<C64>>) -> Result<Self> {
        let basis = if is_orthonormal(&vectors, n * n) {
            vectors
        } else {
            linalg::orthonormal_basis(&vectors, n * n, TOL_ALG)?
        };
        let s = SkewSubspace { n, basis };
        let r = s.check();
        if r.skew_residual > TOL_ALG {
            return Err(Error::Invalid(format!(
                "subspace is not skew (diagonal functional {:.3e})",
                r.skew_residual
            )));
        }
        if r.symmetry_residual > TOL_ALG {
            return Err(Error::Invalid(format!(
                "subspace is not flip-invariant (defect {:.3e})",
                r.symmetry_residual
            )));
        }
        Ok(s)
    }

    pub fn zero(n: usize) -> Self {
        SkewSubspace {
            n,
            basis: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &[Vec<C64>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn projection(&self) -> Matrix {
        linalg::projection(&self.basis, self.n * self.n)
    }

    pub fn check(&self) -> SkewReport {
        let n = self.n;
        let skew = self
            .basis
            .iter()
            .map(|v| diagonal_functional(v, n).norm())
            .fold(0.0, f64::max);
        let p = self.projection();
        let flipped = Matrix::from_fn(n * n, n * n, |r, c| {
            p[((r % n) * n + r / n, (c % n) * n + c / n)]
        });
        SkewReport {
            skew_residual: skew,
            symmetry_residual: flipped.max_abs_diff(&p),
        }
    }
}

/// `span{e_x ⊗ e_y : x ~ y}`.
pub fn u_of_graph(g: &Graph) -> SkewSubspace {
    let n = g.n;
    let basis = g
        .ordered_edges()
        .into_iter()
        .map(|(x, y)| linalg::basis_vector(n * n, x * n + y))
        .collect();
    SkewSubspace { n, basis }
}

/// The `m x n` matrix with `θ(ξ ⊗ η) = η ξ^T` for `ζ ∈ C^n ⊗ C^m`.
pub fn theta_realize(zeta: &[C64], n: usize, m: usize) -> Result<Matrix> {
    if zeta.len() != n * m {
        return Err(Error::Dimension(format!(
            "vector of length {} is not in C^{n} ⊗ C^{m}",
            zeta.len()
        )));
    }
    Ok(Matrix::from_fn(m, n, |j, i| zeta[i * m + j]))
}

/// Realisations of a basis of `u` as `n x n` matrices.
pub fn realize_subspace(u: &SkewSubspace) -> Vec<Matrix> {
    u.basis
        .iter()
        .map(|v| theta_realize(v, u.n, u.n).expect("basis vectors have length n^2"))
        .collect()
}

/// Kraus operators `M_k` (`dim_out x dim_in`) of a CP map from its Choi
/// matrix.
pub fn kraus_from_choi(choi: &Matrix, dim_in: usize, dim_out: usize) -> Result<Vec<Matrix>> {
    if choi.rows() != dim_in * dim_out || choi.cols() != dim_in * dim_out {
        return Err(Error::Dimension(format!(
            "Choi matrix must be {0}x{0}",
            dim_in * dim_out
        )));
    }
    let r = linalg::psd_factor(choi, EIG_CLAMP)?;
    Ok((0..r.rows())
        .map(|k| Matrix::from_fn(dim_out, dim_in, |a, i| r[(k, i * dim_out + a)].conj()))
        .collect())
}

/// Choi matrix of `ρ ↦ sum_k M_k ρ M_k^*`.
pub fn choi_from_kraus(kraus: &[Matrix]) -> Result<Matrix> {
    let (dim_out, dim_in) = kraus_shape(kraus)?;
    let mut choi = Matrix::zeros(dim_in * dim_out, dim_in * dim_out);
    for m in kraus {
        let w: Vec<C64> = (0..dim_in * dim_out)
            .map(|r| m[(r % dim_out, r / dim_out)])
            .collect();
        choi += &Matrix::outer(&w, &w);
    }
    Ok(choi)
}

fn kraus_shape(kraus: &[Matrix]) -> Result<(usize, usize)> {
    let first = kraus
        .first()
        .ok_or_else(|| Error::Invalid("empty Kraus family".into()))?;
    let shape = (first.rows(), first.cols());
    if kraus.iter().any(|m| (m.rows(), m.cols()) != shape) {
        return Err(Error::Dimension("Kraus operators of different shapes".into()));
    }
    Ok(shape)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomReport {
    pub residual: f64,
    pub pass: bool,
}

fn hs_vectors(ms: &[Matrix]) -> Vec<Vec<C64>> {
    ms.iter().map(|m| m.data().to_vec()).collect()
}

/// Checks `conj(M_j) S M_i^T ⊆ T` for the channel with Kraus operators
/// `kraus`. The residual is the sum over `i, j` and an orthonormal basis of
/// `S` of the squared distance to `T`.
pub fn stahlke_check(
    kraus: &[Matrix],
    s_basis: &[Matrix],
    t_basis: &[Matrix],
    tol: f64,
) -> Result<HomReport> {
    let (dim_out, dim_in) = kraus_shape(kraus)?;
    let mut sum = Matrix::zeros(dim_in, dim_in);
    for m in kraus {
        sum += &(&m.adjoint() * m);
    }
    let tp = sum.max_abs_diff(&Matrix::identity(dim_in));
    if tp > TOL_ALG {
        return Err(Error::NotChannel(format!(
            "Kraus family is not trace preserving (defect {tp:.3e})"
        )));
    }
    if s_basis.iter().any(|b| b.rows() != dim_in || b.cols() != dim_in) {
        return Err(Error::Dimension(format!("source operators must be {dim_in}x{dim_in}")));
    }
    if t_basis.iter().any(|b| b.rows() != dim_out || b.cols() != dim_out) {
        return Err(Error::Dimension(format!("target operators must be {dim_out}x{dim_out}")));
    }
    let s = linalg::orthonormal_basis(&hs_vectors(s_basis), dim_in * dim_in, TOL_ALG)?;
    let t = linalg::orthonormal_basis(&hs_vectors(t_basis), dim_out * dim_out, TOL_ALG)?;
    let mut residual = 0.0;
    for sv in &s {
        let b = Matrix::new(dim_in, dim_in, sv.clone())?;
        for mi in kraus {
            let right = &b * &mi.transpose();
            for mj in kraus {
                let y = &mj.conj() * &right;
                let mut defect = y.data().to_vec();
                for tv in &t {
                    let coeff = linalg::vdot(tv, y.data());
                    for (d, &t_k) in defect.iter_mut().zip(tv) {
                        *d -= coeff * t_k;
                    }
                }
                residual += defect.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
    }
    Ok(HomReport {
        residual,
        pass: residual <= tol,
    })
}

/// Residual `Tr((Φ ⊗ Φ^♯)(P_U) (I - P_V))` for a channel `M_n -> M_m`.
pub fn hom_check(phi: &Matrix, u: &SkewSubspace, v: &SkewSubspace, tol: f64) -> Result<HomReport> {
    let (n, m) = (u.n, v.n);
    if !linalg::is_channel(phi, n, m, TOL_ALG)? {
        return Err(Error::NotChannel(format!("map M_{n} -> M_{m} is not a channel")));
    }
    let dims = CorrDims::new(n, n, m, m);
    let choi = correlations::product_choi(phi, &symmetry::sharp(phi), dims)?;
    let image = linalg::apply_choi(&choi, n * n, m * m, &u.projection())?;
    let complement = &Matrix::identity(m * m) - &v.projection();
    let residual = image.trace_product(&complement).re;
    Ok(HomReport {
        residual,
        pass: residual <= tol,
    })
}

/// Choi matrix of the classical channel of a vertex map.
pub fn vertex_map_channel(f: &[usize], m: usize) -> Result<Matrix> {
    if f.iter().any(|&v| v >= m) {
        return Err(Error::Invalid(format!("vertex map leaves 0..{m}")));
    }
    Ok(linalg::choi_of_map(f.len(), m, |rho| {
        let mut out = Matrix::zeros(m, m);
        for (x, &fx) in f.iter().enumerate() {
            out[(fx, fx)] += rho[(x, x)];
        }
        out
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProperReport {
    /// `(x, y, Tr(σ_{x,y} Ω_A))` per ordered edge.
    pub edge_residuals: Vec<(usize, usize, f64)>,
    pub max_residual: f64,
    pub pass: bool,
}

/// Checks `Tr(σ_{x,y} Ω_A) = 0` whenever `x ~ y`.
pub fn proper_check(c: &CqnsCorrelation, g: &Graph, tol: f64) -> Result<ProperReport> {
    let d = c.dims();
    if d.x != g.n || d.y != g.n || d.a != d.b {
        return Err(Error::Dimension(format!(
            "colouring of a {}-vertex graph needs X = Y = {} and A = B",
            g.n, g.n
        )));
    }
    let om = linalg::omega(d.a);
    let edge_residuals: Vec<(usize, usize, f64)> = g
        .ordered_edges()
        .into_iter()
        .map(|(x, y)| (x, y, c.state(x, y).trace_product(&om).re))
        .collect();
    let max_residual = edge_residuals.iter().map(|e| e.2).fold(0.0, f64::max);
    Ok(ProperReport {
        edge_residuals,
        max_residual,
        pass: max_residual <= tol,
    })
}

fn check_unit_vectors(vectors: &[Vec<C64>]) -> Result<usize> {
    let k = vectors
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Invalid("no vectors".into()))?;
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != k {
            return Err(Error::Dimension(format!("vector {i} has length {} instead of {k}", v.len())));
        }
        let norm = linalg::vnorm(v);
        if (norm - 1.0).abs() > TOL_ALG {
            return Err(Error::Invalid(format!("vector {i} has norm {norm}")));
        }
    }
    Ok(k)
}

/// Locally tracial CQNS correlation `E_0 ⊗ E_0^♯` with
/// `E_0(e_x e_x^*) = ξ_x ξ_x^*`, built over the scalars.
pub fn vectors_to_correlation(vectors: &[Vec<C64>]) -> Result<CqnsCorrelation> {
    let k = check_unit_vectors(vectors)?;
    let n = vectors.len();
    let e = StochasticMatrix::from_blocks(n, k, 1, |x, xp, a, ap| {
        let v = if x == xp {
            vectors[x][a] * vectors[x][ap].conj()
        } else {
            ZERO
        };
        Matrix::from_diag(&[v])
    })?;
    let alg = TracialAlgebra::scalars();
    let e = AlgStochasticMatrix::new(n, k, vec![e])?;
    symmetry::build_tracial_cqns(&e, &alg)
}

/// `|<ξ_x, ξ_y>|^2` per ordered edge.
pub fn orthogonality_residuals(vectors: &[Vec<C64>], g: &Graph) -> Result<Vec<(usize, usize, f64)>> {
    if vectors.len() != g.n {
        return Err(Error::Dimension(format!(
            "{} vectors for a {}-vertex graph",
            vectors.len(),
            g.n
        )));
    }
    Ok(g.ordered_edges()
        .into_iter()
        .map(|(x, y)| (x, y, linalg::vdot(&vectors[x], &vectors[y]).norm_sqr()))
        .collect())
}

/// G-proper CQNS colouring from an orthogonal representation.
pub fn orth_rep_to_colouring(vectors: &[Vec<C64>], g: &Graph, tol: f64) -> Result<CqnsCorrelation> {
    check_unit_vectors(vectors)?;
    for (x, y, r) in orthogonality_residuals(vectors, g)? {
        if r > tol {
            return Err(Error::Invalid(format!(
                "vectors {x} and {y} are adjacent but not orthogonal (|<,>|^2 = {r:.3e})"
            )));
        }
    }
    vectors_to_correlation(vectors)
}

/// Lovász umbrella in `R^3` for the 5-cycle: vertex `i` gets handle index
/// `2i mod 5`, so adjacent vertices are two handles apart and orthogonal.
pub fn pentagon_umbrella() -> Vec<Vec<C64>> {
    let c = (1.0 / 5f64.sqrt()).sqrt();
    let s = (1.0 - c * c).sqrt();
    (0..5)
        .map(|i| {
            let k = (2 * i) % 5;
            let t = 2.0 * PI * k as f64 / 5.0;
            vec![c64(s * t.cos(), 0.0), c64(s * t.sin(), 0.0), c64(c, 0.0)]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kd2Colouring {
    pub d: usize,
    /// Explicit states `σ_{x,y}`, with the tracial witness attached.
    pub correlation: CqnsCorrelation,
    /// The same correlation from the semi-classical matrix over `M_d`.
    pub tracial: CqnsCorrelation,
    /// Largest entrywise difference between the two constructions.
    pub two_path_residual: f64,
}

fn root_of_unity(d: usize, k: i64) -> C64 {
    let t = 2.0 * PI * (k.rem_euclid(d as i64)) as f64 / d as f64;
    c64(t.cos(), t.sin())
}

/// Quantum colouring of `K_{d^2}` with `d` colours. Vertices are pairs
/// `x = (a', b')` indexed `a' d + b'`.
pub fn kd2_colouring(d: usize) -> Result<Kd2Colouring> {
    if d < 2 {
        return Err(Error::Invalid("colouring of K_{d^2} needs d >= 2".into()));
    }
    let n = d * d;
    let di = d as i64;
    let sub = |u: usize, v: usize| ((u as i64 - v as i64).rem_euclid(di)) as usize;
    let mut states = Vec::with_capacity(n * n);
    for x in 0..n {
        let (a1, b1) = ((x / d) as i64, (x % d) as i64);
        for y in 0..n {
            let (a2, b2) = ((y / d) as i64, (y % d) as i64);
            let phase = root_of_unity(d, b2 * (a2 - a1));
            let scale = 1.0 / (d as f64).sqrt();
            let mut xi = vec![ZERO; n];
            for l in 0..d {
                let w = ((l as i64 - a1 + a2).rem_euclid(di)) as usize;
                xi[l * d + w] += phase * root_of_unity(d, (b2 - b1) * l as i64) * scale;
            }
            states.push(Matrix::outer(&xi, &xi));
        }
    }

    let block = StochasticMatrix::from_blocks(n, d, d, |x, xp, z, zp| {
        if x != xp {
            return Matrix::zeros(d, d);
        }
        let (a1, b1) = (x / d, (x % d) as i64);
        let mut m = Matrix::zeros(d, d);
        m[(sub(z, a1), sub(zp, a1))] = root_of_unity(d, (zp as i64 - z as i64) * b1);
        m
    })?;
    let alg = TracialAlgebra::matrix_algebra(d);
    let e = AlgStochasticMatrix::new(n, d, vec![block])?;
    let tracial = symmetry::build_tracial_cqns(&e, &alg)?;
    let two_path_residual = states
        .iter()
        .zip(tracial.states())
        .map(|(s, t)| s.max_abs_diff(t))
        .fold(0.0, f64::max);
    let dims = CorrDims::new(n, n, d, d);
    let correlation = CqnsCorrelation::from_states(dims, states)?.with_witness(Witness::Tracial {
        algebra: alg,
        e,
    });
    Ok(Kd2Colouring {
        d,
        correlation,
        tracial,
        two_path_residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    /// `θ(G)` rounded to 6 decimals.
    pub theta: f64,
    pub theta_raw: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `max ||I + S||` over the feasible set, evaluated at the optimiser.
    pub norm_formulation: f64,
    pub iterations: usize,
}

/// Lovász theta via `max <J,X>` s.t. `X ⪰ 0`, `Tr X = 1`, `X_{xy} = 0` for
/// `x ~ y`, solved to the given absolute tolerance.
pub fn lovasz_theta(g: &Graph, tol: f64) -> Result<ThetaReport> {
    let n = g.n;
    if n == 0 {
        return Err(Error::Invalid("graph has no vertices".into()));
    }
    let mut tr = SparseSym::new();
    for i in 0..n {
        tr.push(i, i, 1.0);
    }
    let mut constraints = vec![tr];
    let mut b = vec![1.0];
    for (i, j) in g.edges() {
        let mut a = SparseSym::new();
        a.push(i, j, 1.0);
        constraints.push(a);
        b.push(0.0);
    }
    let problem = SdpProblem {
        c: -DMatrix::from_element(n, n, 1.0),
        constraints,
        b,
    };
    let opts = SdpOptions {
        gap_tol: (tol / (1.0 + 2.0 * n as f64)).min(1e-7),
        ..SdpOptions::default()
    };
    let sol = sdp::solve(&problem, &opts)?;
    let theta_raw = -(sol.primal_objective + sol.dual_objective) / 2.0;

    let diag: Vec<f64> = (0..n).map(|i| sol.x[(i, i)].max(0.0).sqrt()).collect();
    let normalised = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if g.adjacent(i, j) || diag[i] < 1e-12 || diag[j] < 1e-12 {
            0.0
        } else {
            sol.x[(i, j)] / (diag[i] * diag[j])
        }
    });
    let norm_formulation = normalised.symmetric_eigenvalues().max();
    Ok(ThetaReport {
        theta: (theta_raw * 1e6).round() / 1e6,
        theta_raw,
        primal_objective: sol.primal_objective,
        dual_objective: sol.dual_objective,
        norm_formulation,
        iterations: sol.iterations,
    })
}

/// `sqrt(n / θ(G))`.
pub fn xi_qc_lower_bound(g: &Graph, tol: f64) -> Result<f64> {
    let t = lovasz_theta(g, tol)?;
    Ok((g.n as f64 / t.theta_raw).sqrt())
}

/// `sum_z e_z ⊗ e_z` in `C^n ⊗ C^n`, unnormalised.
pub fn diagonal_vector(n: usize) -> Vec<C64> {
    let mut v = vec![ZERO; n * n];
    for z in 0..n {
        v[z * n + z] = ONE;
    }
    v
}

/// `ξ ⊗ η`.
pub fn product_vector(xi: &[C64], eta: &[C64]) -> Vec<C64> {
    kron_vec(xi, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_channel, random_unit_vector, random_vector};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn rng() -> StdRng {
        StdRng::seed_from_u64(41)
    }

    #[test]
    fn graph_json_and_validation() {
        let g: Graph = serde_json::from_str(r#"{"n":3,"edges":[[1,0],[0,1],[2,1]]}"#).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.adjacent(1, 2));
        assert!(serde_json::from_str::<Graph>(r#"{"n":2,"edges":[[1,1]]}"#).is_err());
        assert!(serde_json::from_str::<Graph>(r#"{"n":2,"edges":[[0,2]]}"#).is_err());
        let back: Graph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn independence_numbers() {
        assert_eq!(independence_number(&Graph::complete(5)).unwrap(), 1);
        assert_eq!(independence_number(&Graph::empty(6)).unwrap(), 6);
        assert_eq!(independence_number(&Graph::cycle(5).unwrap()).unwrap(), 2);
        assert_eq!(independence_number(&Graph::cycle(6).unwrap()).unwrap(), 3);
    }

    #[test]
    fn u_of_graph_dimensions() {
        assert_eq!(u_of_graph(&Graph::empty(4)).dim(), 0);
        let k2 = u_of_graph(&Graph::complete(2));
        assert_eq!(k2.dim(), 2);
        assert_eq!(k2.basis()[0], linalg::basis_vector(4, 1));
        assert_eq!(k2.basis()[1], linalg::basis_vector(4, 2));
        let c5 = u_of_graph(&Graph::cycle(5).unwrap());
        assert_eq!(c5.dim(), 10);
        let r = c5.check();
        assert!(r.skew_residual == 0.0 && r.symmetry_residual == 0.0);
    }

    #[test]
    fn skew_subspace_rejects_invalid() {
        assert!(SkewSubspace::new(2, vec![linalg::basis_vector(4, 0)]).is_err());
        assert!(SkewSubspace::new(2, vec![linalg::basis_vector(4, 1)]).is_err());
        let mut sym = linalg::basis_vector(4, 1);
        sym[2] = ONE;
        assert_eq!(SkewSubspace::new(2, vec![sym]).unwrap().dim(), 1);
        let mut anti = linalg::basis_vector(4, 1);
        anti[2] = -ONE;
        assert!(SkewSubspace::new(2, vec![anti]).is_ok());
    }

    #[test]
    fn skew_json_forms() {
        let s: SkewSubspace =
            serde_json::from_str("[[[0,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[1,0],[0,0]]]").unwrap();
        assert_eq!((s.n(), s.dim()), (2, 2));
        let text = serde_json::to_string(&s).unwrap();
        let back: SkewSubspace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let empty: SkewSubspace = serde_json::from_str(r#"{"n":3,"basis":[]}"#).unwrap();
        assert_eq!(empty.dim(), 0);
    }

    #[test]
    fn theta_realize_matrix_unit() {
        let m = theta_realize(&linalg::basis_vector(4, 1), 2, 2).unwrap();
        assert_eq!(m, Matrix::unit(2, 1, 0));
        let m = theta_realize(&linalg::basis_vector(6, 1), 2, 3).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 2));
        assert_eq!(m[(1, 0)], ONE);
    }

    #[test]
    fn theta_realize_trace_is_diagonal_functional() {
        let mut r = rng();
        for n in 1..5 {
            let z = random_vector(&mut r, n * n);
            let m = theta_realize(&z, n, n).unwrap();
            assert!((m.trace() - diagonal_functional(&z, n)).norm() < 1e-12);
        }
    }

    #[test]
    fn theta_realize_of_product() {
        let mut r = rng();
        let xi = random_vector(&mut r, 3);
        let eta = random_vector(&mut r, 2);
        let m = theta_realize(&product_vector(&xi, &eta), 3, 2).unwrap();
        let expected = Matrix::from_fn(2, 3, |j, i| eta[j] * xi[i]);
        assert!(m.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn graph_realisation_is_adjacency_pattern() {
        let g = Graph::cycle(5).unwrap();
        let mats = realize_subspace(&u_of_graph(&g));
        let mut support = Matrix::zeros(5, 5);
        for m in &mats {
            support += m;
        }
        for i in 0..5 {
            for j in 0..5 {
                let expected = if g.adjacent(i, j) { ONE } else { ZERO };
                assert_eq!(support[(i, j)], expected);
            }
        }
    }

    #[test]
    fn kraus_round_trip() {
        let mut r = rng();
        let c = random_channel(&mut r, 2, 3);
        let k = kraus_from_choi(&c, 2, 3).unwrap();
        assert!(choi_from_kraus(&k).unwrap().max_abs_diff(&c) < 1e-10);
    }

    #[test]
    fn identity_channel_homomorphism() {
        let u = u_of_graph(&Graph::cycle(4).unwrap());
        let id = vec![Matrix::identity(4)];
        let s = realize_subspace(&u);
        assert!(stahlke_check(&id, &s, &s, TOL_GAME).unwrap().pass);
        let phi = choi_from_kraus(&id).unwrap();
        assert!(hom_check(&phi, &u, &u, TOL_GAME).unwrap().pass);
    }

    #[test]
    fn vertex_map_homomorphisms() {
        let k2 = Graph::complete(2);
        let k3 = Graph::complete(3);
        let k1 = Graph::complete(1);
        let (u2, u3, u1) = (u_of_graph(&k2), u_of_graph(&k3), u_of_graph(&k1));
        let inc = vertex_map_channel(&[0, 1], 3).unwrap();
        let r = hom_check(&inc, &u2, &u3, TOL_GAME).unwrap();
        assert!(r.pass && r.residual.abs() < 1e-14);
        let kraus = kraus_from_choi(&inc, 2, 3).unwrap();
        assert!(stahlke_check(&kraus, &realize_subspace(&u2), &realize_subspace(&u3), TOL_GAME)
            .unwrap()
            .pass);

        let collapse = vertex_map_channel(&[0, 0], 1).unwrap();
        let r = hom_check(&collapse, &u2, &u1, TOL_GAME).unwrap();
        assert!(!r.pass);
        assert!((r.residual - 2.0).abs() < 1e-12);
        let kraus = kraus_from_choi(&collapse, 2, 1).unwrap();
        assert!(!stahlke_check(&kraus, &realize_subspace(&u2), &[], TOL_GAME).unwrap().pass);
    }

    #[test]
    fn stahlke_and_hom_residuals_agree() {
        let mut r = rng();
        let g = Graph::new(3, [(0, 1)]).unwrap();
        let h = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let (u, v) = (u_of_graph(&g), u_of_graph(&h));
        for _ in 0..5 {
            let phi = random_channel(&mut r, 3, 3);
            let kraus = kraus_from_choi(&phi, 3, 3).unwrap();
            let a = stahlke_check(&kraus, &realize_subspace(&u), &realize_subspace(&v), TOL_GAME).unwrap();
            let b = hom_check(&phi, &u, &v, TOL_GAME).unwrap();
            assert!(a.residual > 1e-3);
            assert!((a.residual - b.residual).abs() < 1e-9 * (1.0 + b.residual));
        }
    }

    #[test]
    fn stahlke_rejects_non_channel() {
        let k = vec![Matrix::identity(2).scale_real(2.0)];
        assert!(matches!(stahlke_check(&k, &[], &[], TOL_GAME), Err(Error::NotChannel(_))));
    }

    #[test]
    fn k2_orthogonal_colouring() {
        let g = Graph::complete(2);
        let v = vec![linalg::basis_vector(2, 0), linalg::basis_vector(2, 1)];
        let c = orth_rep_to_colouring(&v, &g, TOL_GAME).unwrap();
        assert!(c.verify(TOL_ALG).unwrap().pass);
        assert!(proper_check(&c, &g, TOL_GAME).unwrap().pass);
    }

    #[test]
    fn pentagon_umbrella_is_orthogonal_representation() {
        let g = Graph::cycle(5).unwrap();
        let v = pentagon_umbrella();
        for (_, _, r) in orthogonality_residuals(&v, &g).unwrap() {
            assert!(r <= 1e-12);
        }
        let c = orth_rep_to_colouring(&v, &g, 1e-12).unwrap();
        assert!(c.verify(TOL_ALG).unwrap().pass);
        let p = proper_check(&c, &g, TOL_GAME).unwrap();
        assert!(p.pass, "max residual {}", p.max_residual);
    }

    #[test]
    fn non_orthogonal_vectors_give_inner_product_residual() {
        let mut r = rng();
        let g = Graph::complete(2);
        let v = vec![random_unit_vector(&mut r, 3), random_unit_vector(&mut r, 3)];
        assert!(orth_rep_to_colouring(&v, &g, TOL_GAME).is_err());
        let c = vectors_to_correlation(&v).unwrap();
        let p = proper_check(&c, &g, TOL_GAME).unwrap();
        let ip = linalg::vdot(&v[0], &v[1]).norm_sqr();
        assert!(!p.pass);
        for &(_, _, res) in &p.edge_residuals {
            assert!((res - ip).abs() < 1e-12);
        }
    }

    #[test]
    fn kd2_d2_fixture() {
        let k = kd2_colouring(2).unwrap();
        assert_eq!(k.correlation.states().len(), 16);
        assert!(k.two_path_residual < 1e-9);
        let report = k.correlation.verify(TOL_ALG).unwrap();
        assert!(report.pass);
        for s in k.correlation.states() {
            let ta = linalg::partial_trace(s, &[2, 2], 0).unwrap();
            assert!(ta.max_abs_diff(&Matrix::identity(2).scale_real(0.5)) < 1e-12);
        }
        let om = linalg::omega(2);
        for x in 0..4 {
            for y in 0..4 {
                let v = k.correlation.state(x, y).trace_product(&om);
                let expected = if x == y { 2.0 } else { 0.0 };
                assert!((v - c64(expected, 0.0)).norm() < 1e-12);
            }
        }
        assert!(proper_check(&k.correlation, &Graph::complete(4), TOL_GAME).unwrap().pass);
    }

    #[test]
    fn kd2_d3_two_paths() {
        let k = kd2_colouring(3).unwrap();
        assert!(k.two_path_residual < 1e-9);
        assert!(proper_check(&k.correlation, &Graph::complete(9), TOL_GAME).unwrap().pass);
    }

    #[test]
    fn theta_values() {
        for n in 1..6 {
            let t = lovasz_theta(&Graph::complete(n), 1e-7).unwrap();
            assert!((t.theta_raw - 1.0).abs() < 1e-6, "K_{n}: {}", t.theta_raw);
            let t = lovasz_theta(&Graph::empty(n), 1e-7).unwrap();
            assert!((t.theta_raw - n as f64).abs() < 1e-6);
        }
        let t = lovasz_theta(&Graph::cycle(5).unwrap(), 1e-7).unwrap();
        assert!((t.theta_raw - 5f64.sqrt()).abs() < 1e-6);
        assert!((t.norm_formulation - t.theta_raw).abs() < 1e-4);
    }

    #[test]
    fn xi_bounds() {
        assert!((xi_qc_lower_bound(&Graph::complete(4), 1e-7).unwrap() - 2.0).abs() < 1e-6);
        assert!((xi_qc_lower_bound(&Graph::empty(3), 1e-7).unwrap() - 1.0).abs() < 1e-6);
        let c5 = xi_qc_lower_bound(&Graph::cycle(5).unwrap(), 1e-7).unwrap();
        assert!((c5 - 5f64.powf(0.25)).abs() < 1e-5);
    }
}
