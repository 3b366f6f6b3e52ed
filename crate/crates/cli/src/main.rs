use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use removal_lab::fourier::{forward, regularity_norm_of};
use removal_lab::inhomogeneous::{inhomogeneous_reduce, OffsetPattern};
use removal_lab::pattern::{complexity1_check, density, pattern_stats, subpattern};
use removal_lab::ramsey::decide_dichotomy;
use removal_lab::regularize::{
    green_regularize, regular_model_with, regularity_recolor, strong_decomp_regularize,
    strong_regularize, weak_decomp_regularize, Backend, EpsSchedule, DEFAULT_RETRY_CAP,
};
use removal_lab::removal::{induced_removal, Outcome, RemovalParams};
use removal_lab::space::{Limits, POINT_CAP_ENV};
use removal_lab::{
    ColoredPattern, Coloring, DenseFunction, Error, PatternFamily, Subspace, SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(
    name = "removal-lab",
    version,
    about = "Induced arithmetic removal toolkit over F_p^n"
)]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Point cap p^n for loaded spaces (overrides REMOVAL_LAB_CAP).
    #[arg(long, global = true)]
    cap: Option<u128>,
    /// Report path (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact H-density of a pattern in a coloring.
    Density(PatternColoring),
    /// Instance statistics of a pattern in a coloring.
    Stats(PatternColoring),
    /// Subpattern of a pattern on a set of variables.
    Subpattern {
        #[arg(long)]
        pattern: PathBuf,
        /// Variables, 1-based and comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        vars: Vec<usize>,
    },
    /// Complexity-1 test (odd p only).
    Complexity {
        #[arg(long)]
        pattern: PathBuf,
    },
    /// Fourier spectrum and regularity norm.
    Fourier {
        #[command(flatten)]
        input: FunctionInput,
    },
    /// Run one of the regularity lemmas.
    Regularize {
        #[command(flatten)]
        input: FunctionInput,
        #[arg(long, value_enum, default_value = "green")]
        method: Method,
        #[arg(long)]
        eps: f64,
        /// Energy gap for the strong lemma.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Codimension of U for the weak decomposition lemma.
        #[arg(long, default_value_t = 1)]
        codim_u: usize,
    },
    /// Regular model (V_1, V_2, U).
    Model {
        #[command(flatten)]
        input: FunctionInput,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value = "strong")]
        backend: BackendArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Regularity recoloring.
    Recolor {
        #[arg(long)]
        coloring: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Regularity parameter; a comma separated list gives a sequence indexed by codim V_1.
        #[arg(long, value_delimiter = ',', default_value = "0.05")]
        eps_reg: Vec<f64>,
        #[arg(long, value_enum, default_value = "strong")]
        backend: BackendArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        coloring_out: Option<PathBuf>,
    },
    /// Decide the density Ramsey dichotomy for a family.
    Dichotomy {
        #[arg(long)]
        family: PathBuf,
        /// Where to write the Case-B witness.
        #[arg(long)]
        witness_out: Option<PathBuf>,
    },
    /// Induced removal pipeline.
    Remove {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        coloring: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.01)]
        eps_rado: f64,
        #[arg(long, default_value_t = 0.05)]
        eps_reg: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "strong")]
        backend: BackendArg,
        /// Proceed without the complexity-1 check (required for p = 2).
        #[arg(long)]
        assume_complexity_one: bool,
        #[arg(long)]
        coloring_out: Option<PathBuf>,
    },
    /// Reduce inhomogeneous patterns to a homogeneous family.
    Reduce {
        /// List of pattern objects with an extra "offsets" field.
        #[arg(long)]
        offsets: PathBuf,
        #[arg(long)]
        coloring: PathBuf,
        /// Where to write the lifted coloring.
        #[arg(long)]
        coloring_out: Option<PathBuf>,
        /// Where to write the generated family.
        #[arg(long)]
        family_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PatternColoring {
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long)]
    coloring: PathBuf,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct FunctionInput {
    /// Function file; repeat for several functions.
    #[arg(long)]
    function: Vec<PathBuf>,
    /// Coloring whose color-class indicators are used.
    #[arg(long)]
    coloring: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Green,
    Strong,
    Weak,
    StrongDecomp,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Strong,
    Decomposition,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Strong => Backend::Strong,
            BackendArg::Decomposition => Backend::Decomposition,
        }
    }
}

/// A run that finished but reports a domain-level failure (exit 2).
struct Failure(Value);

enum Run {
    Done(Value),
    Failed(Failure),
}

fn limits() -> Limits {
    Limits::from_env()
}

fn load_coloring(path: &Path) -> Result<Coloring, Error> {
    Coloring::read_from(BufReader::new(File::open(path)?), limits())
}

fn load_functions(input: &FunctionInput) -> Result<Vec<DenseFunction>, Error> {
    if let Some(c) = &input.coloring {
        return Ok(load_coloring(c)?.indicators());
    }
    input
        .function
        .iter()
        .map(|p| DenseFunction::read_from(BufReader::new(File::open(p)?), limits()))
        .collect()
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report serializes")
}

fn write_coloring(path: &Path, phi: &Coloring) -> Result<(), Error> {
    let mut f = File::create(path)?;
    phi.write_to(&mut f)?;
    f.flush()?;
    Ok(())
}

fn run(cmd: Command) -> Result<Run, Error> {
    let value = match cmd {
        Command::Density(pc) => {
            let h = ColoredPattern::load(&pc.pattern)?;
            let phi = load_coloring(&pc.coloring)?;
            let d = density(&h, &phi)?;
            json!({ "density": d.to_string(), "count": d.count.to_string(), "total": d.total.to_string(), "value": d.value() })
        }
        Command::Stats(pc) => {
            let h = ColoredPattern::load(&pc.pattern)?;
            let phi = load_coloring(&pc.coloring)?;
            let s = pattern_stats(&h, &phi)?;
            json!({
                "instance_count": s.instance_count.to_string(),
                "density": s.density.to_string(),
                "nonzero_instance_count": s.nonzero_instance_count.to_string(),
                "generic_count": s.generic_count.to_string(),
                "is_free": s.is_free,
            })
        }
        Command::Subpattern { pattern, vars } => {
            let h = ColoredPattern::load(&pattern)?;
            if vars.iter().any(|&v| v == 0) {
                return Err(Error::InvalidInput("variables are numbered from 1".into()));
            }
            let zero_based: Vec<usize> = vars.iter().map(|v| v - 1).collect();
            let s = subpattern(&h, &zero_based)?;
            json!({ "vars": vars, "pattern": to_value(&s) })
        }
        Command::Complexity { pattern } => {
            let h = ColoredPattern::load(&pattern)?;
            json!({ "complexity_one": complexity1_check(h.matrix())? })
        }
        Command::Fourier { input } => {
            let fs = load_functions(&input)?;
            let out: Vec<Value> = fs
                .iter()
                .map(|f| {
                    let s = forward(f);
                    let rn = regularity_norm_of(&s);
                    json!({
                        "mean": [s.get(0).re, s.get(0).im],
                        "regularity_norm": rn.norm,
                        "witness": rn.witness,
                        "energy": s.energy(),
                        "coefficients": s.coefficients().iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json!({ "functions": out })
        }
        Command::Regularize {
            input,
            method,
            eps,
            delta,
            codim_u,
        } => {
            let fs = load_functions(&input)?;
            let refs: Vec<&DenseFunction> = fs.iter().collect();
            let space = *fs[0].space();
            let full = Subspace::full(space.field(), space.dim());
            match method {
                Method::Green => {
                    json!({ "method": "green", "result": to_value(&green_regularize(&refs, &full, eps)?) })
                }
                Method::Strong => {
                    let k = refs.len() as f64;
                    let p = space.p() as f64;
                    let seq = |m: usize| eps.min(p.powi(-(m as i32)) / (2.0 * k));
                    json!({ "method": "strong", "result": to_value(&strong_regularize(&refs, &full, delta, &seq)?) })
                }
                Method::Weak => {
                    if codim_u > space.dim() {
                        return Err(Error::InvalidInput(format!(
                            "codim U = {codim_u} exceeds n"
                        )));
                    }
                    let u = Subspace::trailing_coordinates(space.field(), space.dim(), codim_u);
                    json!({ "method": "weak", "result": to_value(&weak_decomp_regularize(&refs, &u, eps)?) })
                }
                Method::StrongDecomp => json!({
                    "method": "strong-decomp",
                    "result": to_value(&strong_decomp_regularize(&refs, &full, eps)?)
                }),
            }
        }
        Command::Model {
            input,
            eps,
            backend,
            seed,
        } => {
            let fs = load_functions(&input)?;
            let refs: Vec<&DenseFunction> = fs.iter().collect();
            let space = *fs[0].space();
            let full = Subspace::full(space.field(), space.dim());
            let m = regular_model_with(
                &refs,
                &full,
                eps,
                &EpsSchedule::Constant(eps),
                backend.into(),
                seed,
                DEFAULT_RETRY_CAP,
            )?;
            to_value(&m)
        }
        Command::Recolor {
            coloring,
            eps,
            eps_reg,
            backend,
            seed,
            coloring_out,
        } => {
            let phi = load_coloring(&coloring)?;
            let schedule = if eps_reg.len() == 1 {
                EpsSchedule::Constant(eps_reg[0])
            } else {
                EpsSchedule::Sequence(eps_reg)
            };
            let rep = regularity_recolor(&phi, eps, &schedule, backend.into(), seed)?;
            if let Some(path) = coloring_out {
                write_coloring(&path, &rep.new)?;
            }
            to_value(&rep)
        }
        Command::Dichotomy {
            family,
            witness_out,
        } => {
            let fam = PatternFamily::load(&family)?;
            let res = decide_dichotomy(&fam)?;
            if let (Some(path), Some(w)) = (witness_out, &res.witness) {
                std::fs::write(path, serde_json::to_string_pretty(w)? + "\n")?;
            }
            to_value(&res)
        }
        Command::Remove {
            family,
            coloring,
            eps,
            eps_rado,
            eps_reg,
            seed,
            backend,
            assume_complexity_one,
            coloring_out,
        } => {
            let fam = PatternFamily::load(&family)?;
            let phi = load_coloring(&coloring)?;
            let params = RemovalParams {
                eps,
                eps_rado,
                eps_reg,
                seed,
                backend: backend.into(),
                assume_complexity_one,
            };
            match induced_removal(&phi, &fam, &params)? {
                Outcome::Free(rep) => {
                    if let Some(path) = coloring_out {
                        write_coloring(&path, &rep.phi_prime)?;
                    }
                    json!({ "outcome": "free", "report": to_value(&rep) })
                }
                Outcome::Aborted(a) => {
                    return Ok(Run::Failed(Failure(
                        json!({ "outcome": "aborted", "abort": to_value(&a) }),
                    )))
                }
            }
        }
        Command::Reduce {
            offsets,
            coloring,
            coloring_out,
            family_out,
        } => {
            let pats = OffsetPattern::list_from_json(&std::fs::read_to_string(&offsets)?)?;
            let phi = load_coloring(&coloring)?;
            let red = inhomogeneous_reduce(&pats, &phi)?;
            if let Some(path) = coloring_out {
                write_coloring(&path, &red.lifted)?;
            }
            if let Some(path) = family_out {
                std::fs::write(path, red.family.to_json() + "\n")?;
            }
            to_value(&red)
        }
    };
    Ok(Run::Done(value))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Density(_) => "density",
        Command::Stats(_) => "stats",
        Command::Subpattern { .. } => "subpattern",
        Command::Complexity { .. } => "complexity",
        Command::Fourier { .. } => "fourier",
        Command::Regularize { .. } => "regularize",
        Command::Model { .. } => "model",
        Command::Recolor { .. } => "recolor",
        Command::Dichotomy { .. } => "dichotomy",
        Command::Remove { .. } => "remove",
        Command::Reduce { .. } => "reduce",
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::NotPrime(_) => "not_prime",
        Error::InvalidInput(_) => "invalid_input",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::Resource { .. } => "resource",
        Error::UnsupportedCharacteristic(_) => "unsupported_characteristic",
        Error::SpaceExhausted(_) => "space_exhausted",
        Error::DimensionPrecondition(_) => "dimension_precondition",
        Error::RetryCapExceeded { .. } => "retry_cap_exceeded",
        Error::VerifierFailed(_) => "verifier_failed",
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn emit(out: &Option<PathBuf>, command: &str, body: Value) -> std::io::Result<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("command".into(), json!(command));
    if let Value::Object(m) = body {
        doc.extend(m);
    } else {
        doc.insert("result".into(), body);
    }
    let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json") + "\n";
    match out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(cap) = cli.cap {
        std::env::set_var(POINT_CAP_ENV, cap.to_string());
    }
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: cannot configure {t} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let name = command_name(&cli.command);
    info!("running {name}");
    let (body, code) = match run(cli.command) {
        Ok(Run::Done(v)) => (v, 0),
        Ok(Run::Failed(Failure(v))) => (v, 2),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Io(_) | Error::Json(_) | Error::Parse(_) => 1,
                _ => 2,
            };
            (
                json!({ "error": { "kind": error_kind(&e), "message": e.to_string() } }),
                code,
            )
        }
    };
    if let Err(e) = emit(&cli.out, name, body) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
