//! Non-local games given by constraint lists on subspaces, rule-function
//! games, perfect-strategy checks and composition.

use serde::{Deserialize, Serialize};

use crate::correlations::{CorrDims, Correlation};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, Matrix, C64, ONE, TOL_ALG, ZERO};
use crate::ncgraphs::{self, Graph, SkewSubspace};

pub use crate::ncgraphs::TOL_GAME;

/// Pair `(U, V)`: inputs in `U` must produce outputs supported in `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    #[serde(rename = "U")]
    pub u: Vec<Vec<C64>>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<C64>>,
}

/// `λ(x,y,a,b) ∈ {0,1}`, stored flat in `(x,y,a,b)` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleFunction {
    dims: CorrDims,
    data: Vec<bool>,
}

impl Serialize for RuleFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dims;
        let nested: Vec<Vec<Vec<Vec<u8>>>> = (0..d.x)
            .map(|x| {
                (0..d.y)
                    .map(|y| {
                        (0..d.a)
                            .map(|a| (0..d.b).map(|b| self.get(x, y, a, b) as u8).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        nested.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RuleFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let nested = Vec::<Vec<Vec<Vec<u8>>>>::deserialize(d)?;
        RuleFunction::from_nested(&nested).map_err(serde::de::Error::custom)
    }
}

impl RuleFunction {
    pub fn from_fn(dims: CorrDims, f: impl Fn(usize, usize, usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(dims.input() * dims.output());
        for x in 0..dims.x {
            for y in 0..dims.y {
                for a in 0..dims.a {
                    for b in 0..dims.b {
                        data.push(f(x, y, a, b));
                    }
                }
            }
        }
        RuleFunction { dims, data }
    }

    /// Rule from a nested `[x][y][a][b]` array of 0/1 entries.
    pub fn from_nested(nested: &[Vec<Vec<Vec<u8>>>]) -> Result<Self> {
        let x = nested.len();
        let y = nested.first().map_or(0, Vec::len);
        let a = nested.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let b = nested
            .first()
            .and_then(|r| r.first())
            .and_then(|r| r.first())
            .map_or(0, Vec::len);
        if x * y * a * b == 0 {
            return Err(Error::Invalid("rule tensor has an empty axis".into()));
        }
        let mut data = Vec::with_capacity(x * y * a * b);
        for row_x in nested {
            if row_x.len() != y {
                return Err(Error::Dimension("ragged rule tensor".into()));
            }
            for row_y in row_x {
                if row_y.len() != a {
                    return Err(Error::Dimension("ragged rule tensor".into()));
                }
                for row_a in row_y {
                    if row_a.len() != b {
                        return Err(Error::Dimension("ragged rule tensor".into()));
                    }
                    for &v in row_a {
                        match v {
                            0 => data.push(false),
                            1 => data.push(true),
                            other => {
                                return Err(Error::Invalid(format!(
                                    "rule entries must be 0 or 1, got {other}"
                                )))
                            }
                        }
                    }
                }
            }
        }
        Ok(RuleFunction {
            dims: CorrDims::new(x, y, a, b),
            data,
        })
    }

    pub fn dims(&self) -> CorrDims {
        self.dims
    }

    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> bool {
        let d = self.dims;
        self.data[((x * d.y + y) * d.a + a) * d.b + b]
    }

    /// Colouring rules: adjacent inputs get different colours, equal inputs
    /// equal colours.
    pub fn colouring(g: &Graph, colours: usize) -> Self {
        let n = g.n();
        RuleFunction::from_fn(CorrDims::new(n, n, colours, colours), |x, y, a, b| {
            if x == y {
                a == b
            } else if g.adjacent(x, y) {
                a != b
            } else {
                true
            }
        })
    }

    /// Synchronicity rules only: `x = y` forces `a = b`.
    pub fn synchronous(inputs: usize, outputs: usize) -> Self {
        RuleFunction::from_fn(CorrDims::new(inputs, inputs, outputs, outputs), |x, y, a, b| {
            x != y || a == b
        })
    }
}

/// `(λ_2 ∘ λ_1)(x,y,z,w) = 1` iff some `(a,b)` has
/// `λ_1(x,y,a,b) = λ_2(a,b,z,w) = 1`.
pub fn compose_rules(l2: &RuleFunction, l1: &RuleFunction) -> Result<RuleFunction> {
    let (d1, d2) = (l1.dims, l2.dims);
    if d2.x != d1.a || d2.y != d1.b {
        return Err(Error::Dimension(format!(
            "outer rule takes inputs {}x{} but inner rule outputs {}x{}",
            d2.x, d2.y, d1.a, d1.b
        )));
    }
    let dims = CorrDims::new(d1.x, d1.y, d2.a, d2.b);
    Ok(RuleFunction::from_fn(dims, |x, y, z, w| {
        (0..d1.a).any(|a| (0..d1.b).any(|b| l1.get(x, y, a, b) && l2.get(a, b, z, w)))
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameJson", into = "GameJson")]
pub struct ConstraintGame {
    in_dims: [usize; 2],
    out_dims: [usize; 2],
    classical_input: bool,
    constraints: Vec<Constraint>,
    rule: Option<RuleFunction>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct GameJson {
    in_dims: [usize; 2],
    out_dims: [usize; 2],
    classical_input: bool,
    constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule: Option<RuleFunction>,
}

impl TryFrom<GameJson> for ConstraintGame {
    type Error = Error;

    fn try_from(j: GameJson) -> Result<Self> {
        match j.rule {
            Some(rule) => {
                let g = from_rule(&rule);
                if g.in_dims != j.in_dims || g.out_dims != j.out_dims {
                    return Err(Error::Dimension("rule tensor disagrees with the game dimensions".into()));
                }
                Ok(g)
            }
            None => ConstraintGame::new(j.in_dims, j.out_dims, j.classical_input, j.constraints),
        }
    }
}

impl From<ConstraintGame> for GameJson {
    fn from(g: ConstraintGame) -> Self {
        GameJson {
            in_dims: g.in_dims,
            out_dims: g.out_dims,
            classical_input: g.classical_input,
            constraints: g.constraints,
            rule: g.rule,
        }
    }
}

fn orthonormalise(vectors: Vec<Vec<C64>>, n: usize) -> Result<Vec<Vec<C64>>> {
    if ncgraphs::is_orthonormal(&vectors, n) {
        Ok(vectors)
    } else {
        linalg::orthonormal_basis(&vectors, n, TOL_ALG)
    }
}

/// Whether the span of an orthonormal family is spanned by standard basis
/// vectors, i.e. its projection is a 0/1 diagonal matrix.
fn is_coordinate_subspace(basis: &[Vec<C64>], n: usize) -> bool {
    let p = linalg::projection(basis, n);
    (0..n).all(|i| {
        (0..n).all(|j| {
            let target = if i == j && p[(i, i)].re > 0.5 { ONE } else { ZERO };
            (p[(i, j)] - target).norm() <= TOL_ALG
        })
    })
}

fn coordinate_support(basis: &[Vec<C64>], n: usize) -> Vec<usize> {
    let p = linalg::projection(basis, n);
    (0..n).filter(|&i| p[(i, i)].re > 0.5).collect()
}

impl ConstraintGame {
    pub fn new(
        in_dims: [usize; 2],
        out_dims: [usize; 2],
        classical_input: bool,
        constraints: Vec<Constraint>,
    ) -> Result<Self> {
        let n_in = in_dims[0] * in_dims[1];
        let n_out = out_dims[0] * out_dims[1];
        if n_in == 0 || n_out == 0 {
            return Err(Error::Dimension("game dimensions must be positive".into()));
        }
        let mut checked = Vec::with_capacity(constraints.len());
        for (k, c) in constraints.into_iter().enumerate() {
            let u = orthonormalise(c.u, n_in)?;
            let v = orthonormalise(c.v, n_out)?;
            if classical_input && !is_coordinate_subspace(&u, n_in) {
                return Err(Error::Invalid(format!(
                    "constraint {k}: classical-input games need U spanned by standard basis vectors"
                )));
            }
            checked.push(Constraint { u, v });
        }
        Ok(ConstraintGame {
            in_dims,
            out_dims,
            classical_input,
            constraints: checked,
            rule: None,
        })
    }

    pub fn in_dims(&self) -> [usize; 2] {
        self.in_dims
    }

    pub fn out_dims(&self) -> [usize; 2] {
        self.out_dims
    }

    pub fn classical_input(&self) -> bool {
        self.classical_input
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn rule(&self) -> Option<&RuleFunction> {
        self.rule.as_ref()
    }

    fn input_size(&self) -> usize {
        self.in_dims[0] * self.in_dims[1]
    }

    fn output_size(&self) -> usize {
        self.out_dims[0] * self.out_dims[1]
    }
}

/// One constraint per input pair: `U = span{e_x ⊗ e_y}`,
/// `V = span{e_a ⊗ e_b : λ(x,y,a,b) = 1}`.
pub fn from_rule(rule: &RuleFunction) -> ConstraintGame {
    let d = rule.dims;
    let (n_in, n_out) = (d.input(), d.output());
    let mut constraints = Vec::with_capacity(n_in);
    for x in 0..d.x {
        for y in 0..d.y {
            let v = (0..d.a * d.b)
                .filter(|&ab| rule.get(x, y, ab / d.b, ab % d.b))
                .map(|ab| linalg::basis_vector(n_out, ab))
                .collect();
            constraints.push(Constraint {
                u: vec![linalg::basis_vector(n_in, x * d.y + y)],
                v,
            });
        }
    }
    ConstraintGame {
        in_dims: [d.x, d.y],
        out_dims: [d.a, d.b],
        classical_input: true,
        constraints,
        rule: Some(rule.clone()),
    }
}

/// Edge constraints `(span{e_x ⊗ e_y}, range(I - Ω_A/|A|))` for each ordered
/// edge, plus `(span{e_x ⊗ e_x}, span{e_a ⊗ e_a})` per vertex when
/// `synchronous`.
pub fn colouring_game(g: &Graph, colours: usize, synchronous: bool) -> Result<ConstraintGame> {
    if colours == 0 {
        return Err(Error::Invalid("need at least one colour".into()));
    }
    let n = g.n();
    let nn = n * n;
    let aa = colours * colours;
    let diag = ncgraphs::diagonal_vector(colours);
    let functional = Matrix::from_fn(1, aa, |_, j| diag[j].conj());
    let off_diag = linalg::nullspace(&functional, TOL_ALG);
    let mut constraints = Vec::new();
    for (x, y) in g.ordered_edges() {
        constraints.push(Constraint {
            u: vec![linalg::basis_vector(nn, x * n + y)],
            v: off_diag.clone(),
        });
    }
    if synchronous {
        let same: Vec<Vec<C64>> = (0..colours)
            .map(|a| linalg::basis_vector(aa, a * colours + a))
            .collect();
        for x in 0..n {
            constraints.push(Constraint {
                u: vec![linalg::basis_vector(nn, x * n + x)],
                v: same.clone(),
            });
        }
    }
    ConstraintGame::new([n, n], [colours, colours], true, constraints)
}

/// The single constraint `(U, V)` between non-commutative graphs.
pub fn homomorphism_game(u: &SkewSubspace, v: &SkewSubspace) -> Result<ConstraintGame> {
    for s in [u, v] {
        let r = s.check();
        if r.skew_residual > TOL_ALG || r.symmetry_residual > TOL_ALG {
            return Err(Error::Invalid("homomorphism games need symmetric skew subspaces".into()));
        }
    }
    ConstraintGame::new(
        [u.n(), u.n()],
        [v.n(), v.n()],
        false,
        vec![Constraint {
            u: u.basis().to_vec(),
            v: v.basis().to_vec(),
        }],
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    /// `Tr(Λ(P_U)(I - P_V))` per constraint.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub pass: bool,
}

/// Checks that `Λ` maps every constraint input `U` into `V`.
pub fn perfect_strategy_check(game: &ConstraintGame, strategy: &Correlation, tol: f64) -> Result<GameReport> {
    let d = strategy.dims();
    if [d.x, d.y] != game.in_dims || [d.a, d.b] != game.out_dims {
        return Err(Error::Dimension(format!(
            "game is {:?} -> {:?} but the correlation is {}x{} -> {}x{}",
            game.in_dims, game.out_dims, d.x, d.y, d.a, d.b
        )));
    }
    let g = strategy.to_qns();
    let (n_in, n_out) = (game.input_size(), game.output_size());
    let id = Matrix::identity(n_out);
    let residuals = game
        .constraints
        .iter()
        .map(|c| {
            let image = g.apply(&linalg::projection(&c.u, n_in))?;
            let complement = &id - &linalg::projection(&c.v, n_out);
            Ok(image.trace_product(&complement).re)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(GameReport {
        residuals,
        max_residual,
        pass: max_residual <= tol,
    })
}

/// Intersection of subspaces of `C^n`; the empty intersection is `C^n`.
pub fn wedge(subspaces: &[&[Vec<C64>]], n: usize) -> Vec<Vec<C64>> {
    if subspaces.is_empty() {
        return (0..n).map(|i| linalg::basis_vector(n, i)).collect();
    }
    let id = Matrix::identity(n);
    let mut stacked = Matrix::zeros(n * subspaces.len(), n);
    for (k, s) in subspaces.iter().enumerate() {
        stacked.set_submatrix(k * n, 0, &(&id - &linalg::projection(s, n)));
    }
    linalg::nullspace(&stacked, TOL_ALG)
}

fn contained_in(v: &[Vec<C64>], u: &[Vec<C64>], n: usize) -> bool {
    let p = linalg::projection(u, n);
    v.iter().all(|x| {
        let px = p.mul_vec(x);
        let defect: f64 = x.iter().zip(&px).map(|(a, b)| (a - b).norm_sqr()).sum();
        defect.sqrt() <= 1e-8
    })
}

/// Composite game `g2 ∘ g1`. Rule games compose through their rules. For a
/// classical-input outer game the image of a coordinate subspace is the
/// join of the images of its basis vectors; otherwise each constraint
/// `(U, V)` of `g1` becomes `(U, ∧{V' : V ⊆ U'})` over constraints of `g2`.
pub fn compose_games(g2: &ConstraintGame, g1: &ConstraintGame) -> Result<ConstraintGame> {
    if g2.in_dims != g1.out_dims {
        return Err(Error::Dimension(format!(
            "outer game takes {:?} but inner game outputs {:?}",
            g2.in_dims, g1.out_dims
        )));
    }
    if let (Some(l2), Some(l1)) = (&g2.rule, &g1.rule) {
        return Ok(from_rule(&compose_rules(l2, l1)?));
    }
    let mid = g1.output_size();
    let n_out = g2.output_size();
    if g2.classical_input && !g1.constraints.iter().all(|c| is_coordinate_subspace(&c.v, mid)) {
        return Err(Error::UndefinedComposition(
            "a classical-input game cannot follow a game with quantum outputs".into(),
        ));
    }
    let image = |v: &[Vec<C64>]| -> Result<Vec<Vec<C64>>> {
        if v.is_empty() {
            return Ok(Vec::new());
        }
        let wedge_over = |target: &[Vec<C64>]| {
            let hits: Vec<&[Vec<C64>]> = g2
                .constraints
                .iter()
                .filter(|c| contained_in(target, &c.u, mid))
                .map(|c| c.v.as_slice())
                .collect();
            wedge(&hits, n_out)
        };
        if g2.classical_input {
            let mut joined = Vec::new();
            for i in coordinate_support(v, mid) {
                joined.extend(wedge_over(&[linalg::basis_vector(mid, i)]));
            }
            linalg::orthonormal_basis(&joined, n_out, TOL_ALG)
        } else {
            Ok(wedge_over(v))
        }
    };
    let constraints = g1
        .constraints
        .iter()
        .map(|c| {
            Ok(Constraint {
                u: c.u.clone(),
                v: image(&c.v)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ConstraintGame::new(g1.in_dims, g2.out_dims, g1.classical_input, constraints)
}

/// `λ(x,y,a,b) = 0 ⇒ p(a,b|x,y) = 0`, with the largest forbidden
/// probability.
pub fn rule_violation(rule: &RuleFunction, p: &crate::correlations::NsCorrelation) -> Result<f64> {
    let d = rule.dims;
    if p.dims() != d {
        return Err(Error::Dimension("rule and correlation dimensions differ".into()));
    }
    let mut worst = 0.0f64;
    for x in 0..d.x {
        for y in 0..d.y {
            for a in 0..d.a {
                for b in 0..d.b {
                    if !rule.get(x, y, a, b) {
                        worst = worst.max(p.p(a, b, x, y));
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// `e_x ⊗ e_y` in an input space of the given dims.
pub fn product_basis_vector(dims: [usize; 2], x: usize, y: usize) -> Vec<C64> {
    linalg::basis_vector(dims[0] * dims[1], x * dims[1] + y)
}

/// `(1/sqrt n) sum_z e_z ⊗ e_z`.
pub fn maximally_entangled(n: usize) -> Vec<C64> {
    let s = 1.0 / (n as f64).sqrt();
    ncgraphs::diagonal_vector(n)
        .into_iter()
        .map(|z| z * c64(s, 0.0))
        .collect()
}
