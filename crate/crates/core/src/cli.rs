//! Command-line front end. `run` parses arguments, executes one command and
//! returns the process exit code: 0 on success, 1 when a check fails, 2 on
//! malformed input or I/O errors.

use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::correlations::{self, CorrDims, Correlation, QnsCorrelation, Witness};
use crate::error::{Error, Result};
use crate::games::{self, ConstraintGame, RuleFunction, TOL_GAME};
use crate::linalg::{TOL_ALG, C64};
use crate::ncgraphs::{self, Graph, SkewSubspace};
use crate::stochastic::StochasticMatrix;
use crate::symmetry;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "qns", version, about = "Build, verify and compose no-signalling correlations and non-local games")]
struct Cli {
    /// Tolerance override for the command's checks.
    #[arg(long, global = true, value_parser = parse_tol)]
    tol: Option<f64>,
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BuildClass {
    Local,
    Quantum,
    Qc,
    Tracial,
    CqnsTracial,
    NsTracial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Reduction {
    #[value(name = "E")]
    E,
    #[value(name = "N")]
    N,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a correlation or stochastic operator matrix and print residuals.
    Verify { path: String },
    /// Build a correlation from a witness file.
    Build { class: BuildClass, witness: String },
    /// Classical reduction: E (QNS to CQNS) or N (to NS).
    Reduce { which: Reduction, path: String },
    /// Lift an NS or CQNS correlation to a QNS correlation.
    Lift { path: String },
    /// Compose two correlations or two games, outer first.
    Compose { outer: String, inner: String },
    /// Check whether a correlation is a perfect strategy for a game.
    CheckGame { game: String, strategy: String },
    /// Lovász theta number of a graph.
    Theta { graph: String },
    /// Quantum d-colouring of the complete graph on d^2 vertices.
    Kd2 {
        #[arg(long)]
        d: usize,
    },
    /// Colouring from an orthogonal representation of a graph.
    Orthrep { graph: String, vectors: String },
    /// Check whether a correlation maps fair states to fair states.
    Fair { path: String },
    /// Generate a game file.
    Game {
        #[command(subcommand)]
        kind: GameKind,
    },
}

#[derive(Subcommand, Debug)]
enum GameKind {
    /// Colouring game of a graph.
    Colouring {
        graph: String,
        #[arg(long)]
        colours: usize,
        /// Add the constraints forcing equal colours on equal inputs.
        #[arg(long)]
        synchronous: bool,
    },
    /// Game of a 0/1 rule tensor.
    Rule { path: String },
    /// Homomorphism game between two skew subspaces.
    Hom { source: String, target: String },
}

fn parse_tol(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("tolerance must be positive, got {s}"))
    }
}

enum Outcome {
    /// A check result; `pass` selects the exit code.
    Report { report: Value, pass: bool },
    /// A constructed object written as JSON.
    Artifact(Value),
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    stdin_used: bool,
}

impl Io<'_> {
    fn read(&mut self, path: &str) -> Result<String> {
        if path == "-" {
            if self.stdin_used {
                return Err(Error::Invalid("standard input can be read only once".into()));
            }
            self.stdin_used = true;
            let mut s = String::new();
            self.stdin.read_to_string(&mut s)?;
            Ok(s)
        } else {
            Ok(fs::read_to_string(path)?)
        }
    }

    fn json(&mut self, path: &str) -> Result<Value> {
        Ok(serde_json::from_str(&self.read(path)?)?)
    }

    fn parse<T: serde::de::DeserializeOwned>(&mut self, path: &str) -> Result<T> {
        Ok(serde_json::from_str(&self.read(path)?)?)
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("serialisable report")
}

/// Runs the command line `args` (including the program name).
pub fn run(args: &[String], stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let mut io = Io {
        stdin,
        stdin_used: false,
    };
    let outcome = match execute(&cli, &mut io) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let (text, code) = match outcome {
        Outcome::Report { report, pass } => {
            let code = if pass { EXIT_OK } else { EXIT_CHECK_FAILED };
            (render(&report, cli.format), code)
        }
        Outcome::Artifact(v) => (
            serde_json::to_string_pretty(&v).expect("serialisable artifact") + "\n",
            EXIT_OK,
        ),
    };
    let written = match &cli.out {
        Some(path) => fs::write(path, text.as_bytes()),
        None => stdout.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_INVALID;
    }
    code
}

fn render(report: &Value, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("serialisable report") + "\n",
        Format::Text => {
            let mut out = String::new();
            render_text(report, 0, &mut out);
            out
        }
    }
}

fn render_text(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(map) => {
            for (k, val) in map {
                match val {
                    Value::Object(_) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        render_text(val, indent + 1, out);
                    }
                    Value::Array(items) if items.iter().any(|i| i.is_object() || i.is_array()) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        for item in items {
                            out.push_str(&format!("{pad}  - {}\n", inline(item)));
                        }
                    }
                    _ => out.push_str(&format!("{pad}{k}: {}\n", inline(val))),
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", inline(other))),
    }
}

fn inline(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn report<T: Serialize>(kind: &str, r: &T, pass: bool) -> Outcome {
    let mut v = to_value(r);
    if let Value::Object(map) = &mut v {
        map.insert("kind".into(), Value::String(kind.into()));
    }
    Outcome::Report { report: v, pass }
}

fn execute(cli: &Cli, io: &mut Io) -> Result<Outcome> {
    match &cli.command {
        Command::Verify { path } => verify(io.json(path)?, cli.tol.unwrap_or(TOL_ALG)),
        Command::Build { class, witness } => build(*class, io.json(witness)?),
        Command::Reduce { which, path } => {
            let c: Correlation = io.parse(path)?;
            let out = match (which, c) {
                (Reduction::E, Correlation::Qns(g)) => Correlation::Cqns(correlations::reduce_e(&g)),
                (Reduction::E, _) => {
                    return Err(Error::Invalid("E-reduction takes a QNS correlation".into()))
                }
                (Reduction::N, Correlation::Qns(g)) => {
                    Correlation::Ns(correlations::reduce_n(&correlations::reduce_e(&g)))
                }
                (Reduction::N, Correlation::Cqns(c)) => Correlation::Ns(correlations::reduce_n(&c)),
                (Reduction::N, Correlation::Ns(_)) => {
                    return Err(Error::Invalid("N-reduction takes a QNS or CQNS correlation".into()))
                }
            };
            Ok(Outcome::Artifact(to_value(&out)))
        }
        Command::Lift { path } => {
            let c: Correlation = io.parse(path)?;
            if matches!(c, Correlation::Qns(_)) {
                return Err(Error::Invalid("lift takes an NS or CQNS correlation".into()));
            }
            Ok(Outcome::Artifact(to_value(&Correlation::Qns(c.to_qns()))))
        }
        Command::Compose { outer, inner } => {
            let (outer, inner) = (io.json(outer)?, io.json(inner)?);
            compose(outer, inner)
        }
        Command::CheckGame { game, strategy } => {
            let game: ConstraintGame = io.parse(game)?;
            let strategy: Correlation = io.parse(strategy)?;
            let r = games::perfect_strategy_check(&game, &strategy, cli.tol.unwrap_or(TOL_GAME))?;
            Ok(report("game", &r, r.pass))
        }
        Command::Theta { graph } => {
            let g: Graph = io.parse(graph)?;
            let r = ncgraphs::lovasz_theta(&g, cli.tol.unwrap_or(1e-7))?;
            let v = json!({
                "theta": r.theta,
                "theta_raw": r.theta_raw,
                "xi_qc_lower_bound": (g.n() as f64 / r.theta_raw).sqrt(),
                "norm_formulation": r.norm_formulation,
                "primal_objective": r.primal_objective,
                "dual_objective": r.dual_objective,
                "iterations": r.iterations,
            });
            Ok(Outcome::Report { report: v, pass: true })
        }
        Command::Kd2 { d } => {
            let tol = cli.tol.unwrap_or(TOL_ALG);
            let k = ncgraphs::kd2_colouring(*d)?;
            let g = Graph::complete(d * d);
            let proper = ncgraphs::proper_check(&k.correlation, &g, tol)?;
            let valid = k.correlation.verify(tol)?;
            if !(proper.pass && valid.pass && k.two_path_residual <= tol) {
                let v = json!({
                    "kind": "kd2",
                    "two_path_residual": k.two_path_residual,
                    "proper_max_residual": proper.max_residual,
                    "cqns": to_value(&valid),
                });
                return Ok(Outcome::Report { report: v, pass: false });
            }
            Ok(Outcome::Artifact(to_value(&Correlation::Cqns(k.correlation))))
        }
        Command::Orthrep { graph, vectors } => {
            let g: Graph = io.parse(graph)?;
            let vs: Vec<Vec<C64>> = io.parse(vectors)?;
            let tol = cli.tol.unwrap_or(TOL_GAME);
            let residuals = ncgraphs::orthogonality_residuals(&vs, &g)?;
            let worst = residuals.iter().map(|r| r.2).fold(0.0, f64::max);
            if worst > tol {
                let v = json!({
                    "kind": "orthrep",
                    "edge_residuals": residuals,
                    "max_residual": worst,
                    "pass": false,
                });
                return Ok(Outcome::Report { report: v, pass: false });
            }
            let c = ncgraphs::orth_rep_to_colouring(&vs, &g, tol)?;
            Ok(Outcome::Artifact(to_value(&Correlation::Cqns(c))))
        }
        Command::Fair { path } => {
            let c: Correlation = io.parse(path)?;
            let d = c.dims();
            if d.x != d.y || d.a != d.b {
                return Err(Error::Dimension("fairness needs X = Y and A = B".into()));
            }
            let r = symmetry::is_fair(&c.to_qns(), cli.tol.unwrap_or(TOL_ALG))?;
            Ok(report("fair", &r, r.pass))
        }
        Command::Game { kind } => {
            let game = match kind {
                GameKind::Colouring {
                    graph,
                    colours,
                    synchronous,
                } => games::colouring_game(&io.parse(graph)?, *colours, *synchronous)?,
                GameKind::Rule { path } => games::from_rule(&io.parse::<RuleFunction>(path)?),
                GameKind::Hom { source, target } => {
                    let u: SkewSubspace = io.parse(source)?;
                    let v: SkewSubspace = io.parse(target)?;
                    games::homomorphism_game(&u, &v)?
                }
            };
            Ok(Outcome::Artifact(to_value(&game)))
        }
    }
}

fn verify(v: Value, tol: f64) -> Result<Outcome> {
    let is_correlation = v.get("kind").is_some();
    let is_stochastic = v.get("dimH").is_some() && v.get("matrix").is_some();
    if is_stochastic {
        let e: StochasticMatrix = serde_json::from_value(v)?;
        let r = e.verify(tol)?;
        let pass = r.pass;
        return Ok(report("stochastic", &r, pass));
    }
    if !is_correlation {
        return Err(Error::Invalid(
            "expected a correlation (with \"kind\") or a stochastic operator matrix".into(),
        ));
    }
    let c: Correlation = serde_json::from_value(v)?;
    let (mut value, mut pass, witness) = match &c {
        Correlation::Qns(g) => {
            let r = g.verify(tol)?;
            let w = correlations::witness_residual(g)?;
            (to_value(&r), r.pass, w)
        }
        Correlation::Cqns(c) => {
            let r = c.verify(tol)?;
            let w = match c.witness() {
                Some(w) => Some(
                    symmetry::rebuild_cqns(w)?
                        .states()
                        .iter()
                        .zip(c.states())
                        .map(|(a, b)| a.max_abs_diff(b))
                        .fold(0.0, f64::max),
                ),
                None => None,
            };
            (to_value(&r), r.pass, w)
        }
        Correlation::Ns(p) => {
            let r = p.verify(tol);
            let w = match p.witness() {
                Some(w) => Some(
                    symmetry::rebuild_ns(w)?
                        .table()
                        .iter()
                        .zip(p.table())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max),
                ),
                None => None,
            };
            (to_value(&r), r.pass, w)
        }
    };
    let kind = match c {
        Correlation::Qns(_) => "qns",
        Correlation::Cqns(_) => "cqns",
        Correlation::Ns(_) => "ns",
    };
    if let Value::Object(map) = &mut value {
        map.insert("kind".into(), Value::String(kind.into()));
        if let Some(w) = witness {
            map.insert("witness_residual".into(), json!(w));
            if w > tol.max(1e-8) {
                pass = false;
                map.insert("pass".into(), Value::Bool(false));
            }
        }
    }
    Ok(Outcome::Report { report: value, pass })
}

fn witness_dims(w: &Witness) -> Option<CorrDims> {
    match w {
        Witness::Quantum { e, f, .. } | Witness::QuantumCommuting { e, f, .. } => {
            Some(CorrDims::new(e.dim_x(), f.dim_x(), e.dim_a(), f.dim_a()))
        }
        Witness::Tracial { e, .. } => Some(CorrDims::new(e.dim_x(), e.dim_x(), e.dim_a(), e.dim_a())),
        Witness::Local { .. } => None,
    }
}

fn build(class: BuildClass, v: Value) -> Result<Outcome> {
    let (dims, witness): (Option<CorrDims>, Witness) = if v.get("witness").is_some() {
        let dims = match v.get("dims") {
            Some(d) => Some(serde_json::from_value(d.clone())?),
            None => None,
        };
        (dims, serde_json::from_value(v["witness"].clone())?)
    } else {
        (None, serde_json::from_value(v)?)
    };
    let expected = match class {
        BuildClass::Local => "loc",
        BuildClass::Quantum => "q",
        BuildClass::Qc => "qc",
        _ => "tracial",
    };
    if witness.class_tag() != expected {
        return Err(Error::Invalid(format!(
            "witness class {} does not match the requested construction",
            witness.class_tag()
        )));
    }
    let dims = match dims.or_else(|| witness_dims(&witness)) {
        Some(d) => d,
        None => {
            return Err(Error::Invalid(
                "local witnesses need a \"dims\" entry next to \"witness\"".into(),
            ))
        }
    };
    let out = match (class, &witness) {
        (BuildClass::Local, Witness::Local { terms }) => Correlation::Qns(correlations::build_local(dims, terms)?),
        (BuildClass::Quantum, Witness::Quantum { e, f, sigma }) => {
            Correlation::Qns(correlations::build_quantum(e, f, sigma)?)
        }
        (BuildClass::Qc, Witness::QuantumCommuting { e, f, sigma }) => Correlation::Qns(correlations::build_qc(e, f, sigma, crate::stochastic::TOL_COMM)?),
        (BuildClass::Tracial, Witness::Tracial { algebra, e }) => {
            Correlation::Qns(symmetry::build_tracial(e, algebra)?)
        }
        (BuildClass::CqnsTracial, Witness::Tracial { algebra, e }) => {
            Correlation::Cqns(symmetry::build_tracial_cqns(e, algebra)?)
        }
        (BuildClass::NsTracial, Witness::Tracial { algebra, e }) => {
            Correlation::Ns(symmetry::build_tracial_ns(e, algebra)?)
        }
        _ => unreachable!("class tag checked above"),
    };
    if out.dims() != dims {
        return Err(Error::Dimension("witness does not match the declared dims".into()));
    }
    Ok(Outcome::Artifact(to_value(&out)))
}

fn compose(outer: Value, inner: Value) -> Result<Outcome> {
    let is_game = |v: &Value| v.get("constraints").is_some();
    match (is_game(&outer), is_game(&inner)) {
        (true, true) => {
            let g2: ConstraintGame = serde_json::from_value(outer)?;
            let g1: ConstraintGame = serde_json::from_value(inner)?;
            Ok(Outcome::Artifact(to_value(&games::compose_games(&g2, &g1)?)))
        }
        (false, false) => {
            let c2: Correlation = serde_json::from_value(outer)?;
            let c1: Correlation = serde_json::from_value(inner)?;
            let out = match (&c2, &c1) {
                (Correlation::Ns(p2), Correlation::Ns(p1)) => Correlation::Ns(correlations::compose_ns(p2, p1)?),
                _ => {
                    let g: QnsCorrelation = correlations::compose_correlations(&c2.to_qns(), &c1.to_qns())?;
                    Correlation::Qns(g)
                }
            };
            Ok(Outcome::Artifact(to_value(&out)))
        }
        _ => Err(Error::Invalid("compose takes two correlations or two games".into())),
    }
}
