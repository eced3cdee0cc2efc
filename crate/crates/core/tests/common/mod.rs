#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use qns::correlations::{self, CorrDims, LocalTerm, NsCorrelation, QnsCorrelation};
use qns::linalg::{self, c64, Matrix, C64};
use qns::ncgraphs::{self, Graph, SkewSubspace};
use qns::random::*;
use qns::symmetry::{self, AlgStochasticMatrix, TracialAlgebra};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_local(r: &mut StdRng, dims: CorrDims) -> QnsCorrelation {
    let k = r.gen_range(1..=3);
    let raw: Vec<f64> = (0..k).map(|_| r.gen_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let terms: Vec<LocalTerm> = raw
        .iter()
        .map(|w| LocalTerm {
            weight: w / s,
            phi: random_channel(r, dims.x, dims.a),
            psi: random_channel(r, dims.y, dims.b),
        })
        .collect();
    correlations::build_local(dims, &terms).unwrap()
}

pub fn random_quantum(r: &mut StdRng, dims: CorrDims, ha: usize, hb: usize) -> QnsCorrelation {
    let e = random_stochastic(r, dims.x, dims.a, ha);
    let f = random_stochastic(r, dims.y, dims.b, hb);
    let sigma = random_state(r, ha * hb);
    correlations::build_quantum(&e, &f, &sigma).unwrap()
}

pub fn random_qc(r: &mut StdRng, dims: CorrDims, ha: usize, hb: usize) -> QnsCorrelation {
    let e = random_stochastic(r, dims.x, dims.a, ha).extend_right(hb);
    let f = random_stochastic(r, dims.y, dims.b, hb).extend_left(ha);
    let sigma = random_state(r, ha * hb);
    correlations::build_qc(&e, &f, &sigma, qns::stochastic::TOL_COMM).unwrap()
}

pub fn random_tracial(r: &mut StdRng, dim_x: usize, dim_a: usize) -> (TracialAlgebra, AlgStochasticMatrix, QnsCorrelation) {
    let k = r.gen_range(1..=2);
    let alg = random_algebra(r, k, 2);
    let e = random_alg_stochastic(r, &alg, dim_x, dim_a);
    let g = symmetry::build_tracial(&e, &alg).unwrap();
    (alg, e, g)
}

/// Deterministic strategy table `p(a,b|x,y) = [a = f(x)][b = g(y)]`
/// mixed with a second one.
pub fn random_classical_strategy(r: &mut StdRng, dims: CorrDims) -> NsCorrelation {
    let f1: Vec<usize> = (0..dims.x).map(|_| r.gen_range(0..dims.a)).collect();
    let g1: Vec<usize> = (0..dims.y).map(|_| r.gen_range(0..dims.b)).collect();
    let f2: Vec<usize> = (0..dims.x).map(|_| r.gen_range(0..dims.a)).collect();
    let g2: Vec<usize> = (0..dims.y).map(|_| r.gen_range(0..dims.b)).collect();
    let p1 = NsCorrelation::deterministic(dims, &f1, &g1).unwrap();
    let p2 = NsCorrelation::deterministic(dims, &f2, &g2).unwrap();
    let w = r.gen_range(0.2..0.8);
    let table = p1.table().iter().zip(p2.table()).map(|(a, b)| w * a + (1.0 - w) * b).collect();
    NsCorrelation::new(dims, table).unwrap()
}

/// Orthonormal basis of the range of a positive matrix.
pub fn support(m: &Matrix) -> Vec<Vec<C64>> {
    let (vals, vecs) = linalg::eigh(m).unwrap();
    let top = vals.iter().cloned().fold(0.0, f64::max);
    (0..vals.len())
        .filter(|&k| vals[k] > 1e-9 * top.max(1.0))
        .map(|k| vecs.column(k))
        .collect()
}

/// Random flip-invariant skew subspace of `C^n ⊗ C^n` of dimension `k`.
pub fn random_skew(r: &mut StdRng, n: usize, k: usize) -> SkewSubspace {
    let vectors: Vec<Vec<C64>> = (0..k)
        .map(|_| {
            let z = random_vector(r, n * n);
            let fz = ncgraphs::flip(&z, n);
            if r.gen_bool(0.5) {
                let mut s: Vec<C64> = z.iter().zip(&fz).map(|(a, b)| a + b).collect();
                let m = ncgraphs::diagonal_functional(&s, n) / n as f64;
                for d in 0..n {
                    s[d * n + d] -= m;
                }
                s
            } else {
                z.iter().zip(&fz).map(|(a, b)| a - b).collect()
            }
        })
        .collect();
    SkewSubspace::new(n, vectors).unwrap()
}

/// Random real orthogonal matrix.
pub fn random_rotation(r: &mut StdRng, n: usize) -> Matrix {
    let g = nalgebra::DMatrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0f64));
    let q = g.qr().q();
    Matrix::from_fn(n, n, |i, j| c64(q[(i, j)], 0.0))
}

/// Image of a skew subspace under `W ⊗ W` for real orthogonal `W`.
pub fn rotate_skew(u: &SkewSubspace, w: &Matrix) -> SkewSubspace {
    let ww = linalg::kron(w, w);
    SkewSubspace::new(u.n(), u.basis().iter().map(|v| ww.mul_vec(v)).collect()).unwrap()
}

pub fn random_graph(r: &mut StdRng, n: usize, p: f64) -> Graph {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    Graph::new(n, edges.into_iter().filter(|_| r.gen_bool(p))).unwrap()
}
