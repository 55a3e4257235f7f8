//! `lmcx`: approximate bisimulation and trace distances from the command line.
//!
//! Models are JSON documents or `builtin:NAME` (see `lmcx builtin --help`).
//! Exit status: 0 success, 1 domain or validation error, 2 I/O error,
//! 3 refused by a scale guard.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lmc_approx::abstraction::prism::weather_prism;
use lmc_approx::abstraction::weather::case_study;
use lmc_approx::abstraction::{build_abstract, grid_partition, ContinuousModel, ExpressionModel, Partition, Quadrature};
use lmc_approx::bisim::{
    check_alt_bisim, check_relation, maximal_bisim, minimal_epsilon, PairFailure, RelationDocument,
    DEFAULT_MIN_EPS_TOL,
};
use lmc_approx::builtin::Builtin;
use lmc_approx::lmc::{validate, LmcDocument};
use lmc_approx::ltl::{self, Formula};
use lmc_approx::traces::{bisim_bound, distinguishability_game, trace_distances_upto};
use lmc_approx::{Error, FiniteLmc};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "lmcx", version, about = "Approximate bisimulation and trace distances for labelled Markov chains")]
struct Cli {
    /// Human-readable table or JSON document.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,
    /// Rescale kernel rows that are within 1e-6 of stochastic instead of
    /// rejecting them.
    #[arg(long, global = true)]
    normalize: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Doc,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against the structural invariants.
    Validate { model: String },
    /// Maximal ε-bisimulation, or the minimal ε relating two states.
    Bisim {
        model: String,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Report the least ε at which these two states are related.
        #[arg(long, num_args = 2, value_names = ["S", "T"])]
        min_eps: Option<Vec<String>>,
        /// Bisection tolerance for `--min-eps`.
        #[arg(long, default_value_t = DEFAULT_MIN_EPS_TOL)]
        tol: f64,
        /// Write the relation document here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Total variation distance between the length-k trace distributions.
    Tracedist {
        model: String,
        s: String,
        t: String,
        #[arg(long)]
        k: usize,
        /// Also list the distance for every horizon up to k.
        #[arg(long)]
        per_k: bool,
    },
    /// Probability that paths from a state satisfy a bounded LTL formula.
    Check {
        model: String,
        #[arg(long)]
        start: String,
        #[arg(long, conflicts_with = "formula_file", required_unless_present = "formula_file")]
        formula: Option<String>,
        #[arg(long)]
        formula_file: Option<PathBuf>,
        /// Also report the bound 1 - (1 - eps)^horizon.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// The rain/humidity abstraction against the analytic value.
    Casestudy {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Compute the analytic reference by quadrature.
        #[arg(long)]
        analytic: bool,
        /// Write the abstraction as a PRISM dtmc listing.
        #[arg(long)]
        export_prism: Option<PathBuf>,
    },
    /// Simulate the source-guessing game between two states.
    Game {
        model: String,
        s: String,
        t: String,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        rounds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a relation with the closed-set notion and with the lifting.
    Altbisim {
        model: String,
        relation: PathBuf,
        /// Defaults to the `eps` stored in the relation document.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Print a built-in model document: branching, tightness:EPS, alt:N,
    /// weather:N.
    Builtin { name: String },
    /// Abstract a continuous model given as an expression document.
    Abstract {
        spec: PathBuf,
        /// Grid fine enough for ε-bisimilarity (needs a finite Lipschitz
        /// constant).
        #[arg(long, conflicts_with = "cells", required_unless_present = "cells")]
        eps: Option<f64>,
        /// Cells per continuous axis, comma-separated.
        #[arg(long, value_delimiter = ',')]
        cells: Option<Vec<usize>>,
        /// Use fixed Gauss-Legendre with this many pieces per axis instead
        /// of adaptive Simpson.
        #[arg(long)]
        gauss: Option<usize>,
        #[arg(long, default_value_t = lmc_approx::abstraction::quadrature::DEFAULT_TOL)]
        tol: f64,
    },
}

enum Failure {
    Io(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(String, u8), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Lib(Error::Domain(format!("malformed {what}: {e}"))))
}

fn load_document(spec: &str) -> Result<LmcDocument, Failure> {
    match spec.strip_prefix("builtin:") {
        Some(name) => Ok(name.parse::<Builtin>()?.build()?.to_document()),
        None => parse_json("model", &read(Path::new(spec))?),
    }
}

fn load_model(spec: &str, normalize: bool) -> Result<FiniteLmc, Failure> {
    Ok(FiniteLmc::from_document(&load_document(spec)?, !normalize)?)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

/// JSON has no infinity; unrelated-label pairs report `null`.
fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn run(cli: Cli) -> Outcome {
    let doc = cli.format == Format::Doc;
    match cli.command {
        Command::Validate { model } => {
            let document = load_document(&model)?;
            let report = validate(&document, !cli.normalize);
            let status = if report.is_valid() { 0 } else { 1 };
            let text = if doc {
                pretty(&json!({ "valid": report.is_valid(), "report": report }))
            } else {
                let mut out = String::new();
                if report.is_valid() {
                    let _ = writeln!(out, "valid: {} states, {} propositions", document.states.len(), document.ap.len());
                } else {
                    let _ = writeln!(out, "invalid");
                }
                for issue in &report.issues {
                    let _ = writeln!(out, "  {issue}");
                }
                for adj in &report.adjustments {
                    let _ = writeln!(out, "  row {} renormalized (sum was {})", adj.row, adj.original_sum);
                }
                out
            };
            Ok((text, status))
        }
        Command::Bisim {
            model,
            eps,
            min_eps,
            tol,
            output,
        } => {
            let m = load_model(&model, cli.normalize)?;
            if let Some(pair) = min_eps {
                let (s, t) = (m.state_index(&pair[0])?, m.state_index(&pair[1])?);
                let value = minimal_epsilon(&m, s, t, tol)?;
                let text = if doc {
                    pretty(&json!({ "s": pair[0], "t": pair[1], "tol": tol, "min_eps": finite_or_null(value) }))
                } else if value.is_finite() {
                    format!("minimal epsilon ({}, {}) = {value} (tol {tol})\n", pair[0], pair[1])
                } else {
                    format!("({}, {}) have different labels: not bisimilar at any epsilon\n", pair[0], pair[1])
                };
                return Ok((text, 0));
            }
            let rel = maximal_bisim(&m, eps)?;
            let relation_doc = rel.to_document(&m, eps);
            if let Some(path) = output {
                write(&path, &pretty(&serde_json::to_value(&relation_doc).expect("serializable")))?;
            }
            let text = if doc {
                pretty(&serde_json::to_value(&relation_doc).expect("serializable"))
            } else {
                let mut out = format!("maximal {eps}-bisimulation: {} related pairs besides the diagonal\n", rel.unordered_pairs().filter(|(i, j)| i != j).count());
                for (i, j) in rel.unordered_pairs().filter(|(i, j)| i != j) {
                    let _ = writeln!(out, "  {} ~ {}", m.name(i), m.name(j));
                }
                out
            };
            Ok((text, 0))
        }
        Command::Tracedist { model, s, t, k, per_k } => {
            let m = load_model(&model, cli.normalize)?;
            let d = trace_distances_upto(&m, m.state_index(&s)?, m.state_index(&t)?, k)?;
            let text = if doc {
                let mut v = json!({ "s": s, "t": t, "k": k, "distance": d[k] });
                if per_k {
                    v["per_k"] = json!(d);
                }
                pretty(&v)
            } else if per_k {
                let mut out = format!("{:>4}  distance\n", "k");
                for (i, x) in d.iter().enumerate() {
                    let _ = writeln!(out, "{i:>4}  {x}");
                }
                out
            } else {
                format!("{}\n", d[k])
            };
            Ok((text, 0))
        }
        Command::Check {
            model,
            start,
            formula,
            formula_file,
            eps,
        } => {
            let m = load_model(&model, cli.normalize)?;
            let text = match (formula, formula_file) {
                (Some(f), _) => f,
                (None, Some(path)) => read(&path)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let f: Formula = text.trim().parse()?;
            let p = ltl::probability(&m, m.state_index(&start)?, &f)?;
            let horizon = f.horizon();
            let bound = eps.map(|e| bisim_bound(e, horizon)).transpose()?;
            let text = if doc {
                pretty(&json!({
                    "start": start, "formula": f.to_string(), "horizon": horizon,
                    "probability": p, "eps": eps, "bound": bound,
                }))
            } else {
                let mut out = format!("probability {p}\nhorizon     {horizon}\n");
                if let (Some(e), Some(b)) = (eps, bound) {
                    let _ = writeln!(out, "bound       {b} (eps {e})");
                }
                out
            };
            Ok((text, 0))
        }
        Command::Casestudy {
            n,
            analytic,
            export_prism,
        } => {
            if let Some(path) = export_prism {
                write(&path, &weather_prism(n)?)?;
            }
            let c = case_study(n, analytic)?;
            let text = if doc {
                pretty(&serde_json::to_value(&c).expect("serializable"))
            } else {
                let mut out = String::new();
                let _ = writeln!(out, "cells per rain value  {}", c.n);
                let _ = writeln!(out, "start                 {}", c.start);
                let _ = writeln!(out, "formula               {}", c.formula);
                let _ = writeln!(out, "abstract probability  {:.6}", c.abstract_probability);
                let _ = writeln!(out, "epsilon               {}", c.eps);
                let _ = writeln!(out, "bound                 {:.6}", c.bound);
                if let (Some(a), Some(d)) = (&c.analytic, c.difference) {
                    let _ = writeln!(out, "analytic              {:.6} (p11 {:.6}, p011 {:.6})", a.total, a.p11, a.p011);
                    let _ = writeln!(out, "difference            {d:.6}");
                    let _ = writeln!(out, "within bound          {}", d <= c.bound);
                }
                out
            };
            Ok((text, 0))
        }
        Command::Game {
            model,
            s,
            t,
            k,
            rounds,
            seed,
        } => {
            let m = load_model(&model, cli.normalize)?;
            let r = distinguishability_game(&m, m.state_index(&s)?, m.state_index(&t)?, k, rounds, seed)?;
            let text = if doc {
                pretty(&json!({ "s": s, "t": t, "k": k, "seed": seed, "report": r }))
            } else {
                format!(
                    "rounds          {}\nwins            {}\nempirical rate  {}\nexact rate      {}\ntrace distance  {}\n",
                    r.rounds, r.wins, r.empirical_rate, r.exact_rate, r.d_tv
                )
            };
            Ok((text, 0))
        }
        Command::Altbisim { model, relation, eps } => {
            let m = load_model(&model, cli.normalize)?;
            let rd: RelationDocument = parse_json("relation", &read(&relation)?)?;
            let rel = rd.to_relation(&m)?;
            let eps = eps.unwrap_or(rd.eps);
            let closed = check_alt_bisim(&m, &rel, eps)?;
            let lifting = check_relation(&m, &rel, eps)?;
            let closed_detail = closed.violation.as_ref().map(|v| {
                if v.labels_differ {
                    format!("labels of {} and {} differ", m.name(v.pair.0), m.name(v.pair.1))
                } else {
                    let set: Vec<&str> = v.closed_set.iter().map(|&i| m.name(i)).collect();
                    format!(
                        "({}, {}) differ by {} on closed set {{{}}}",
                        m.name(v.pair.0),
                        m.name(v.pair.1),
                        v.difference,
                        set.join(", ")
                    )
                }
            });
            let lifting_detail = lifting.violation.as_ref().map(|(i, j, why)| match why {
                PairFailure::Labels => format!("labels of {} and {} differ", m.name(*i), m.name(*j)),
                PairFailure::Lifting(w) => {
                    let set: Vec<&str> = w.witness_set.iter().map(|&k| m.name(k)).collect();
                    format!(
                        "({}, {}) fails on {{{}}} by {}",
                        m.name(*i),
                        m.name(*j),
                        set.join(", "),
                        w.excess
                    )
                }
            });
            let text = if doc {
                pretty(&json!({
                    "eps": eps,
                    "closed_sets": { "holds": closed.holds, "violation": closed_detail },
                    "lifting": { "holds": lifting.holds, "violation": lifting_detail },
                }))
            } else {
                let verdict = |ok: bool| if ok { "accepts" } else { "rejects" };
                let mut out = format!("closed-set check at eps {eps}: {}\n", verdict(closed.holds));
                if let Some(d) = closed_detail {
                    let _ = writeln!(out, "  {d}");
                }
                let _ = writeln!(out, "lifting check at eps {eps}: {}", verdict(lifting.holds));
                if let Some(d) = lifting_detail {
                    let _ = writeln!(out, "  {d}");
                }
                out
            };
            Ok((text, 0))
        }
        Command::Builtin { name } => {
            let m = name.parse::<Builtin>()?.build()?;
            Ok((pretty(&serde_json::to_value(m.to_document()).expect("serializable")), 0))
        }
        Command::Abstract {
            spec,
            eps,
            cells,
            gauss,
            tol,
        } => {
            let model = ExpressionModel::from_json(&read(&spec)?)?;
            let partition = match (eps, cells) {
                (Some(e), _) => grid_partition(&model, e)?.0,
                (None, Some(c)) => Partition::grid(model.domain(), &c)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let quadrature = match gauss {
                Some(pieces) => Quadrature::GaussLegendre { pieces },
                None => Quadrature::Adaptive { tol },
            };
            let m = build_abstract(&model, &partition, quadrature)?;
            Ok((pretty(&serde_json::to_value(m.to_document()).expect("serializable")), 0))
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for I/O here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok((text, status)) => {
            print!("{text}");
            ExitCode::from(status)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::ScaleGuard { .. }) { 3 } else { 1 })
        }
    }
}
