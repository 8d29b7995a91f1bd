use std::path::{Path, PathBuf};
use std::process::ExitCode;

use atomsys::assembly::{n_tilde, solve_nonhomogeneous};
use atomsys::greens::example::{example_spec, ExampleSpec};
use atomsys::greens::{greens_table, ResolventContext};
use atomsys::io::{complex_json, kernel_table_json, matrix_json, parse_boundary, parse_complex, parse_problem, parse_rhs, vector_json, Problem};
use atomsys::model::{ensure_valid, generic_lambda, validate, Region};
use atomsys::propagate::residual;
use atomsys::relations::{
    boundary_data, default_self_adjoint, deficiency, l0_basis, restriction_from_conditions, tmax_subspace, Classification,
};
use atomsys::verify::verify;
use atomsys::{Error, Execution, RightHandSide, SystemSpec, Tolerances, C64};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "atomsys", version, about = "First-order systems with atomic measure coefficients")]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Output::Text, global = true)]
    output: Output,
    /// Relative rank tolerance (overrides the default 1e-10).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Args, Clone)]
struct Source {
    /// Problem file (JSON).
    file: Option<PathBuf>,
    /// Built-in problem instead of a file; only `example` exists.
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// Truncation parameter of the built-in example.
    #[arg(long = "M", value_name = "K", default_value_t = 1)]
    m: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural hypotheses of a problem.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// All balanced solutions of J u' + (q - lambda w) u = w f.
    Solve {
        #[command(flatten)]
        source: Source,
        /// Spectral parameter "re,im"; a generic one is drawn when omitted.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<String>,
        /// Right-hand side file {"gaps": [...], "atoms": [...]}.
        #[arg(long)]
        rhs: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Deficiency indices, zero-norm solutions and n-tilde.
    Deficiency {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Green's kernel of a self-adjoint restriction at the given points.
    Greens {
        #[command(flatten)]
        source: Source,
        #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
        lambda: String,
        /// Comma-separated evaluation points.
        #[arg(long, allow_hyphen_values = true, default_value = "")]
        points: String,
        /// Boundary condition rows over [D_i basis, D_-i basis].
        #[arg(long)]
        boundary: Option<PathBuf>,
    },
    /// Seeded property suite.
    Verify {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        trials: usize,
    },
}

struct Loaded {
    problem: Problem,
    example: Option<ExampleSpec>,
    name: String,
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load(source: &Source) -> Result<Loaded, Error> {
    match (&source.file, &source.builtin) {
        (Some(_), Some(_)) => Err(Error::Parse("give either a file or --builtin, not both".into())),
        (None, None) => Err(Error::Parse("no problem given: pass a file or --builtin example".into())),
        (None, Some(name)) if name == "example" => {
            let ex = example_spec(source.m)?;
            Ok(Loaded {
                problem: Problem {
                    spec: ex.spec(),
                    rhs: None,
                    boundary: None,
                },
                example: Some(ex),
                name: format!("builtin example M={}", source.m),
            })
        }
        (None, Some(name)) => Err(Error::Parse(format!("unknown builtin {name:?}"))),
        (Some(path), None) => Ok(Loaded {
            problem: parse_problem(&read(path)?)?,
            example: None,
            name: path.display().to_string(),
        }),
    }
}

fn points_of(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("not a point: {s:?}"))))
        .collect()
}

/// `Ok(results)` or an error; `Failed` marks a completed run whose checks did not pass.
enum Outcome {
    Ok(Value),
    Failed(Value),
}

fn violations_json(spec: &SystemSpec, tol: &Tolerances) -> (bool, Value) {
    let report = validate(spec, tol);
    (report.passed(), json!({"passed": report.passed(), "violations": report.violations}))
}

fn cmd_validate(loaded: &Loaded, tol: &Tolerances) -> Outcome {
    let (passed, v) = violations_json(&loaded.problem.spec, tol);
    if passed {
        Outcome::Ok(v)
    } else {
        Outcome::Failed(v)
    }
}

fn cmd_solve(loaded: &Loaded, lambda: Option<C64>, rhs: Option<RightHandSide>, seed: u64, tol: &Tolerances) -> Result<Value, Error> {
    let spec = &loaded.problem.spec;
    ensure_valid(spec, tol)?;
    let lambda = match lambda {
        Some(l) => l,
        None => generic_lambda(spec, Region::default(), seed, tol)?,
    };
    let f = rhs
        .or_else(|| loaded.problem.rhs.clone())
        .unwrap_or_else(|| RightHandSide::zeros(spec));
    let set = solve_nonhomogeneous(spec, lambda, &f, tol)?;
    let zeros = vec![C64::new(0.0, 0.0); set.dim()];
    let particular = set.path(spec, &zeros)?;
    let kernel_residual = set
        .kernel_paths(spec)?
        .iter()
        .map(|p| residual(spec, p).max / p.magnitude().max(1.0))
        .fold(0.0, f64::max);
    Ok(json!({
        "lambda": complex_json(lambda),
        "kernel_dim": set.dim(),
        "homogeneous": f.is_zero(),
        "particular": {
            "atoms": spec.atoms().iter().zip(&particular.triples).map(|(a, t)| json!({
                "x": a.x,
                "minus": vector_json(&t.minus),
                "mid": vector_json(&t.mid),
                "plus": vector_json(&t.plus),
            })).collect::<Vec<_>>(),
            "residual": residual(spec, &particular).max,
        },
        "kernel_residual": kernel_residual,
    }))
}

fn cmd_deficiency(loaded: &Loaded, seed: u64, tol: &Tolerances) -> Result<Value, Error> {
    let spec = &loaded.problem.spec;
    ensure_valid(spec, tol)?;
    let i = C64::new(0.0, 1.0);
    let plus = deficiency(spec, i, tol)?;
    let minus = deficiency(spec, -i, tol)?;
    let l0 = if spec.num_atoms() == 0 { 0 } else { l0_basis(spec, tol)?.len() };
    let (lambda, nt) = if spec.num_atoms() == 0 {
        (Value::Null, 0)
    } else {
        let l = generic_lambda(spec, Region::default(), seed, tol)?;
        (complex_json(l), n_tilde(spec, l, tol)?)
    };
    Ok(json!({
        "n_plus": plus.index,
        "n_minus": minus.index,
        "l0_dim": l0,
        "n_tilde": nt,
        "generic_lambda": lambda,
        "solution_dim_plus": plus.solution_dim,
        "solution_dim_minus": minus.solution_dim,
    }))
}

fn cmd_greens(loaded: &Loaded, lambda: C64, points: &[f64], boundary: Option<atomsys::CMat>, tol: &Tolerances) -> Result<Value, Error> {
    let spec = &loaded.problem.spec;
    ensure_valid(spec, tol)?;
    let tmax = tmax_subspace(spec, tol)?;
    let restriction = match boundary.or_else(|| loaded.problem.boundary.clone()) {
        None => default_self_adjoint(spec, &tmax, tol)?,
        Some(rows) => {
            let data = boundary_data(spec, &rows, tol)?;
            let r = restriction_from_conditions(spec, &tmax, &data, tol)?;
            if r.classification != Classification::SelfAdjoint {
                return Err(Error::NotSelfAdjoint { angle: r.adjoint_angle });
            }
            r
        }
    };
    let ctx = ResolventContext::new(spec, &restriction.relation, lambda, tol)?;
    let table = greens_table(&ctx, points, Execution::default())?;
    Ok(json!({
        "restriction_dim": restriction.relation.dim(),
        "kernel": kernel_table_json(&table),
    }))
}

fn cmd_verify(loaded: &Loaded, seed: u64, trials: usize, tol: &Tolerances) -> Result<Outcome, Error> {
    let spec = &loaded.problem.spec;
    ensure_valid(spec, tol)?;
    let report = verify(spec, loaded.example.as_ref(), seed, trials, tol, Execution::default())?;
    let value = serde_json::to_value(&report).expect("report serializes");
    Ok(if report.passed() { Outcome::Ok(value) } else { Outcome::Failed(value) })
}

fn exit_code(e: &Error) -> u8 {
    if e.is_obstruction() {
        1
    } else {
        2
    }
}

fn error_json(e: &Error) -> Value {
    let mut v = json!({"kind": format!("{e:?}").split([' ', '{', '(']).next().unwrap_or(""), "message": e.to_string()});
    match e {
        Error::Unsolvable { obstruction, max_pairing } => {
            v["witness"] = matrix_json(&obstruction.witness);
            v["pairings"] = json!(obstruction.pairings);
            v["max_pairing"] = json!(max_pairing);
        }
        Error::Invalid(report) => v["violations"] = json!(report.violations),
        _ => {}
    }
    v
}

fn text_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Complex numbers are `[re, im]` pairs; only keys naming a spectral parameter hold one.
fn text_entry(key: &str, v: &Value) -> String {
    match v.as_array().map(Vec::as_slice) {
        Some([re, im]) if key.contains("lambda") => {
            format!("{}{:+}i", re.as_f64().unwrap_or(f64::NAN), im.as_f64().unwrap_or(f64::NAN))
        }
        _ => text_value(v),
    }
}

fn render_text(report: &Value) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!("command: {}", text_value(&report["command"])));
    line(format!("status:  {}", text_value(&report["status"])));
    if let Some(inputs) = report["inputs"].as_object() {
        for (k, v) in inputs {
            line(format!("  {k:<18} {}", text_entry(k, v)));
        }
    }
    let results = &report["results"];
    if let Some(checks) = results["checks"].as_array() {
        line(format!("{:<48} {:>6} {:>12} {:>10} {:>8}", "check", "ok", "value", "threshold", "samples"));
        for c in checks {
            line(format!(
                "{:<48} {:>6} {:>12.3e} {:>10.1e} {:>8}",
                text_value(&c["name"]),
                c["passed"],
                c["value"].as_f64().unwrap_or(f64::NAN),
                c["threshold"].as_f64().unwrap_or(f64::NAN),
                c["samples"]
            ));
        }
        for w in results["warnings"].as_array().into_iter().flatten() {
            line(format!("warning: {}", text_value(w)));
        }
    } else if let Some(kernel) = results.get("kernel") {
        line(format!("  {:<18} {}", "restriction_dim", results["restriction_dim"]));
        let atoms = kernel["atoms"].as_array().cloned().unwrap_or_default();
        for (p, x) in kernel["points"].as_array().into_iter().flatten().enumerate() {
            for (a, y) in atoms.iter().enumerate() {
                let mut blk = String::new();
                for row in kernel["K"][p][a].as_array().into_iter().flatten() {
                    blk.push_str(" |");
                    for z in row.as_array().into_iter().flatten() {
                        let _ = write!(blk, " {:>10.3e}{:+10.3e}i", z[0].as_f64().unwrap_or(f64::NAN), z[1].as_f64().unwrap_or(f64::NAN));
                    }
                }
                line(format!("  K({x}, {y}){blk} |"));
            }
        }
    } else if let Some(obj) = results.as_object() {
        for (k, v) in obj {
            line(format!("  {k:<18} {}", text_entry(k, v)));
        }
    }
    if let Some(err) = report.get("error") {
        line(format!("error: {}", text_value(&err["message"])));
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let tol = cli.tol.map_or_else(Tolerances::default, |t| Tolerances::default().with_rank(t));
    let (name, source) = match &cli.command {
        Command::Validate { source } => ("validate", source),
        Command::Solve { source, .. } => ("solve", source),
        Command::Deficiency { source, .. } => ("deficiency", source),
        Command::Greens { source, .. } => ("greens", source),
        Command::Verify { source, .. } => ("verify", source),
    };
    let mut inputs = serde_json::Map::new();
    let mut run = || -> Result<Outcome, Error> {
        let loaded = load(source)?;
        inputs.insert("problem".into(), json!(loaded.name));
        match &cli.command {
            Command::Validate { .. } => Ok(cmd_validate(&loaded, &tol)),
            Command::Solve { lambda, rhs, seed, .. } => {
                let lambda = lambda.as_deref().map(parse_complex).transpose()?;
                let rhs = match rhs {
                    Some(p) => Some(parse_rhs(&read(p)?, &loaded.problem.spec)?),
                    None => None,
                };
                inputs.insert("lambda".into(), lambda.map_or(Value::Null, complex_json));
                inputs.insert("seed".into(), json!(seed));
                cmd_solve(&loaded, lambda, rhs, *seed, &tol).map(Outcome::Ok)
            }
            Command::Deficiency { seed, .. } => {
                inputs.insert("seed".into(), json!(seed));
                cmd_deficiency(&loaded, *seed, &tol).map(Outcome::Ok)
            }
            Command::Greens { lambda, points, boundary, .. } => {
                let lambda = parse_complex(lambda)?;
                let points = points_of(points)?;
                let boundary = boundary.as_deref().map(|p| read(p).and_then(|t| parse_boundary(&t))).transpose()?;
                inputs.insert("lambda".into(), complex_json(lambda));
                inputs.insert("points".into(), json!(points));
                cmd_greens(&loaded, lambda, &points, boundary, &tol).map(Outcome::Ok)
            }
            Command::Verify { seed, trials, .. } => {
                inputs.insert("seed".into(), json!(seed));
                inputs.insert("trials".into(), json!(trials));
                cmd_verify(&loaded, *seed, *trials, &tol)
            }
        }
    };
    let outcome = run();
    let mut report = json!({
        "command": name,
        "inputs": Value::Object(inputs.clone()),
        "tolerances": serde_json::to_value(tol).expect("tolerances serialize"),
    });
    let code = match outcome {
        Ok(Outcome::Ok(results)) => {
            report["results"] = results;
            report["status"] = json!("ok");
            0
        }
        Ok(Outcome::Failed(results)) => {
            report["results"] = results;
            report["status"] = json!("failed");
            if name == "validate" {
                2
            } else {
                1
            }
        }
        Err(e) => {
            let code = exit_code(&e);
            report["results"] = Value::Null;
            report["status"] = json!(if code == 1 { "obstruction" } else { "input_error" });
            report["error"] = error_json(&e);
            code
        }
    };
    let text = match cli.output {
        Output::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Output::Text => render_text(&report),
    };
    // a closed pipe is not worth a panic
    let _ = std::io::Write::write_all(&mut std::io::stdout().lock(), text.as_bytes());
    ExitCode::from(code)
}
