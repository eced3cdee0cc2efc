//! Random instances for property tests and searches.

use nalgebra::DMatrix;
use rand::Rng;

use crate::correlations::{CorrDims, NsCorrelation};
use crate::linalg::{self, c64, kron, permute_systems, Matrix, C64};
use crate::stochastic::StochasticMatrix;
use crate::symmetry::{AlgStochasticMatrix, TracialAlgebra};

/// Matrix with entries uniform in the unit square of the complex plane
/// (centred at zero).
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    loop {
        let v = random_vector(rng, n);
        let norm = linalg::vnorm(&v);
        if norm > 1e-3 {
            return v.iter().map(|z| z / norm).collect();
        }
    }
}

/// `G G^*` with `G` of shape `n x rank`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> Matrix {
    let g = random_matrix(rng, n, rank);
    &g * &g.adjoint()
}

/// Full-rank density matrix.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let p = random_psd(rng, n, n);
    let t = p.trace().re;
    p.scale_real(1.0 / t)
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let v = random_unit_vector(rng, n);
    Matrix::outer(&v, &v)
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let g: DMatrix<C64> = random_matrix(rng, n, n).to_nalgebra();
    Matrix::from_nalgebra(&g.qr().q())
}

/// Projective measurement with `outcomes` parts, in a random basis; parts
/// are as even as possible and may be zero when `outcomes > dim`.
pub fn random_pvm<R: Rng + ?Sized>(rng: &mut R, outcomes: usize, dim: usize) -> Vec<Matrix> {
    let u = random_unitary(rng, dim);
    let mut parts = vec![Matrix::zeros(dim, dim); outcomes];
    let offset = rng.gen_range(0..outcomes);
    for k in 0..dim {
        let col = u.column(k);
        parts[(k + offset) % outcomes] += &Matrix::outer(&col, &col);
    }
    parts
}

/// POVM obtained by normalising random positive operators.
pub fn random_povm<R: Rng + ?Sized>(rng: &mut R, outcomes: usize, dim: usize) -> Vec<Matrix> {
    let raw: Vec<Matrix> = (0..outcomes).map(|_| random_psd(rng, dim, dim)).collect();
    let mut sum = Matrix::zeros(dim, dim);
    for r in &raw {
        sum += r;
    }
    let w = inverse_sqrt(&sum);
    raw.iter().map(|r| hermitize(&(&(&w * r) * &w))).collect()
}

fn hermitize(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

fn inverse_sqrt(m: &Matrix) -> Matrix {
    let (vals, vecs) = linalg::eigh(m).expect("positive definite input");
    let n = vals.len();
    let d: Vec<f64> = vals.iter().map(|&v| 1.0 / v.sqrt()).collect();
    Matrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| vecs[(i, k)] * d[k] * vecs[(j, k)].conj()).sum()
    })
}

/// Normalises a positive matrix on `X ⊗ A ⊗ H` so that `Tr_A = I`.
fn normalise_marginal(p: &Matrix, dx: usize, da: usize, dh: usize) -> Matrix {
    let marg = linalg::partial_trace(p, &[dx, da, dh], 1).expect("consistent dims");
    let w = inverse_sqrt(&marg);
    let embed = permute_systems(&kron(&w, &Matrix::identity(da)), &[dx, dh, da], &[0, 2, 1])
        .expect("consistent dims");
    hermitize(&(&(&embed * p) * &embed))
}

/// Random stochastic operator matrix of full rank.
pub fn random_stochastic<R: Rng + ?Sized>(
    rng: &mut R,
    dim_x: usize,
    dim_a: usize,
    dim_h: usize,
) -> StochasticMatrix {
    let n = dim_x * dim_a * dim_h;
    let p = random_psd(rng, n, n);
    let m = normalise_marginal(&p, dim_x, dim_a, dim_h);
    StochasticMatrix::new(dim_x, dim_a, dim_h, m).expect("normalised construction")
}

/// Random semi-classical stochastic matrix: independent blocks per input.
pub fn random_semiclassical<R: Rng + ?Sized>(
    rng: &mut R,
    dim_x: usize,
    dim_a: usize,
    dim_h: usize,
) -> StochasticMatrix {
    let per_x: Vec<StochasticMatrix> = (0..dim_x)
        .map(|_| random_stochastic(rng, 1, dim_a, dim_h))
        .collect();
    StochasticMatrix::from_blocks(dim_x, dim_a, dim_h, |x, xp, a, ap| {
        if x == xp {
            per_x[x].block(0, 0, a, ap)
        } else {
            Matrix::zeros(dim_h, dim_h)
        }
    })
    .expect("consistent dims")
}

/// Choi matrix of a random channel `M_in -> M_out`.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, dim_in: usize, dim_out: usize) -> Matrix {
    random_stochastic(rng, dim_in, dim_out, 1).matrix().clone()
}

/// Choi matrix of the channel `ρ ↦ sum_x <x|ρ|x> e_{f(x)} e_{f(x)}^*`.
pub fn deterministic_channel(map: &[usize], dim_out: usize) -> Matrix {
    let dim_in = map.len();
    linalg::choi_of_map(dim_in, dim_out, |rho| {
        let mut out = Matrix::zeros(dim_out, dim_out);
        for (x, &fx) in map.iter().enumerate() {
            out[(fx, fx)] += rho[(x, x)];
        }
        out
    })
}

/// Choi matrix of conjugation by a unitary.
pub fn unitary_channel(u: &Matrix) -> Matrix {
    let n = u.rows();
    linalg::choi_of_map(n, n, |rho| &(u * rho) * &u.adjoint())
}

/// Random conditional distribution `p[x][a]`.
pub fn random_conditional<R: Rng + ?Sized>(rng: &mut R, dim_x: usize, dim_a: usize) -> Vec<Vec<f64>> {
    (0..dim_x)
        .map(|_| {
            let raw: Vec<f64> = (0..dim_a).map(|_| rng.gen_range(0.0..1.0) + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Random no-signalling table: a mixture of local product boxes and, when
/// `|A| = |B|`, a generalised PR box `p(a,b|x,y) = 1/d` iff
/// `b - a = f(x,y) mod d`.
pub fn random_ns<R: Rng + ?Sized>(rng: &mut R, dims: CorrDims) -> NsCorrelation {
    let CorrDims { x, y, a, b } = dims;
    let mut table = vec![0.0; x * y * a * b];
    let terms = 3;
    let mut weights: Vec<f64> = (0..=terms).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    for w in weights.iter().take(terms) {
        let pa = random_conditional(rng, x, a);
        let pb = random_conditional(rng, y, b);
        for xi in 0..x {
            for yi in 0..y {
                for ai in 0..a {
                    for bi in 0..b {
                        table[((xi * y + yi) * a + ai) * b + bi] += w * pa[xi][ai] * pb[yi][bi];
                    }
                }
            }
        }
    }
    let last = weights[terms];
    if a == b {
        let shift: Vec<usize> = (0..x * y).map(|_| rng.gen_range(0..a)).collect();
        for xi in 0..x {
            for yi in 0..y {
                for ai in 0..a {
                    let bi = (ai + shift[xi * y + yi]) % a;
                    table[((xi * y + yi) * a + ai) * b + bi] += last / a as f64;
                }
            }
        }
    } else {
        for v in table.iter_mut() {
            *v += last / (a * b) as f64;
        }
    }
    NsCorrelation::new(dims, table).expect("mixture of no-signalling boxes")
}

/// Random algebra with `k` blocks of size at most `max_dim`.
pub fn random_algebra<R: Rng + ?Sized>(rng: &mut R, k: usize, max_dim: usize) -> TracialAlgebra {
    let blocks: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=max_dim)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    TracialAlgebra::new(blocks, raw.iter().map(|w| w / s).collect()).expect("valid weights")
}

/// Random stochastic matrix over `alg`, one full-rank block per summand.
pub fn random_alg_stochastic<R: Rng + ?Sized>(
    rng: &mut R,
    alg: &TracialAlgebra,
    dim_x: usize,
    dim_a: usize,
) -> AlgStochasticMatrix {
    let blocks = alg
        .blocks()
        .iter()
        .map(|&d| random_stochastic(rng, dim_x, dim_a, d))
        .collect();
    AlgStochasticMatrix::new(dim_x, dim_a, blocks).expect("valid blocks")
}

/// Random semi-classical stochastic matrix over `alg`.
pub fn random_alg_semiclassical<R: Rng + ?Sized>(
    rng: &mut R,
    alg: &TracialAlgebra,
    dim_x: usize,
    dim_a: usize,
) -> AlgStochasticMatrix {
    let blocks = alg
        .blocks()
        .iter()
        .map(|&d| random_semiclassical(rng, dim_x, dim_a, d))
        .collect();
    AlgStochasticMatrix::new(dim_x, dim_a, blocks).expect("valid blocks")
}

/// Random classical stochastic matrix over `alg` built from POVMs.
pub fn random_alg_classical<R: Rng + ?Sized>(
    rng: &mut R,
    alg: &TracialAlgebra,
    dim_x: usize,
    dim_a: usize,
) -> AlgStochasticMatrix {
    let blocks = alg
        .blocks()
        .iter()
        .map(|&d| {
            let fams: Vec<Vec<Matrix>> = (0..dim_x).map(|_| random_povm(rng, dim_a, d)).collect();
            StochasticMatrix::from_povms(&fams).expect("normalised POVMs")
        })
        .collect();
    AlgStochasticMatrix::new(dim_x, dim_a, blocks).expect("valid blocks")
}
