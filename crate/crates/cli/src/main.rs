//! `hecke-sl2`: certificates and exploration tools on the command line.
//!
//! JSON goes to `--out` when given, otherwise to stdout. A one-line summary
//! goes to stdout when `--out` is set and to stderr otherwise. Errors are
//! JSON objects on stderr with a `reason` tag.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 usage or parameter
//! error, 3 insufficient precision.

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hecke_sl2::engine::{self, GradedInstance, InstanceJson, RandomSpec};
use hecke_sl2::error::{Error, Result};
use hecke_sl2::field::FieldCtx;
use hecke_sl2::freeness::{self, CERTIFICATE_SCHEMA};
use hecke_sl2::induced::Model;
use hecke_sl2::serial::{self, FUNCTION_SCHEMA};
use hecke_sl2::series::precision_for_level;
use hecke_sl2::sl2::W0Choice;
use hecke_sl2::weights::{structure_checks, WeightShape};

const THREADS_VAR: &str = "HECKE_SL2_THREADS";

#[derive(Parser)]
#[command(name = "hecke-sl2", version, about = "Hecke-module freeness certificates over F_q((t))")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct FieldArgs {
    /// Residue characteristic.
    #[arg(long)]
    p: u32,
    /// Degree of the residue field over F_p.
    #[arg(long, default_value_t = 1)]
    deg: u32,
}

#[derive(Args, Clone)]
struct WeightArgs {
    #[command(flatten)]
    field: FieldArgs,
    /// Weight digits r_0,...,r_{deg-1}, each in [0, p).
    #[arg(long, value_delimiter = ',', required = true)]
    r: Vec<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum W0Arg {
    Standard,
    Alternate,
}

impl From<W0Arg> for W0Choice {
    fn from(w: W0Arg) -> Self {
        match w {
            W0Arg::Standard => W0Choice::Standard,
            W0Arg::Alternate => W0Choice::Alternate,
        }
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Working precision; at least 2N+6 for truncation level N.
    #[arg(long)]
    precision: Option<usize>,
    #[arg(long, value_enum, default_value = "standard")]
    w0: W0Arg,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    weight: WeightArgs,
    /// Truncation level N.
    #[arg(long, default_value_t = 3)]
    levels: u32,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Subcommand)]
enum Cmd {
    /// Modulus and size of F_q.
    FieldInfo {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structure checks on the weight: dimension, U- and Ū-fixed lines.
    WeightInfo {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The invariant function f_n as function JSON.
    Fn {
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long, allow_hyphen_values = true)]
        n: i64,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Applies the Hecke operator to a function read from `--in` (`-` for stdin).
    TauApply {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs every freeness check and writes the certificate.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Like `verify`, but fails unless the free basis is certified.
    FreeBasis {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the operator as a one-variable graded instance.
        #[arg(long)]
        instance_out: Option<PathBuf>,
    },
    /// Expansion of the operator on f_n for |n| ≤ levels.
    TauTable {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Checks (H1)–(H5) and commutation on an instance file.
    EngineCheck {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds and verifies the basis of an instance file.
    EngineBuild {
        #[arg(long = "in")]
        input: PathBuf,
        /// Carry on past dependencies and report what breaks.
        #[arg(long)]
        naive: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Checks and builds seeded random instances.
    EngineFuzz {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        p: u32,
        #[arg(long, default_value_t = 1)]
        deg: u32,
        /// Fixed truncation level; by default it varies with the seed for d = 1 and is 2 otherwise.
        #[arg(long)]
        levels: Option<u32>,
        #[arg(long, default_value_t = 256)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// What a subcommand produced.
struct Outcome {
    json: Value,
    summary: String,
    passed: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            emit_error("usage", &e.render().to_string());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    let out = out_path(&cli.cmd).cloned();
    match run(cli.cmd) {
        Ok(o) => match write(&o, out.as_ref()) {
            Ok(()) => ExitCode::from(if o.passed { 0 } else { 1 }),
            Err(e) => fail(&e),
        },
        Err(e) => fail(&e),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{THREADS_VAR} must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::CheckFailed(_) | Error::ConstructionFailed(_) | Error::BudgetExhausted(_) => 1,
        Error::InsufficientPrecision(_) => 3,
        _ => 2,
    }
}

fn fail(e: &Error) -> ExitCode {
    emit_error(e.reason(), &e.to_string());
    ExitCode::from(exit_code(e))
}

fn emit_error(reason: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "reason": reason, "message": message.trim_end() } }));
}

fn write(o: &Outcome, out: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(&o.json).expect("output is serialisable");
    let status = if o.passed { "PASS" } else { "FAIL" };
    match out {
        Some(path) => {
            fs::write(path, text + "\n").map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
            println!("{status} {}", o.summary);
        }
        None => {
            println!("{text}");
            eprintln!("{status} {}", o.summary);
        }
    }
    Ok(())
}

fn out_path(cmd: &Cmd) -> Option<&PathBuf> {
    match cmd {
        Cmd::FieldInfo { out, .. }
        | Cmd::WeightInfo { out, .. }
        | Cmd::Fn { out, .. }
        | Cmd::TauApply { out, .. }
        | Cmd::Verify { out, .. }
        | Cmd::FreeBasis { out, .. }
        | Cmd::TauTable { out, .. }
        | Cmd::EngineCheck { out, .. }
        | Cmd::EngineBuild { out, .. }
        | Cmd::EngineFuzz { out, .. } => out.as_ref(),
    }
}

fn read_input(path: &PathBuf) -> Result<String> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text).map_err(|e| Error::Parse(e.to_string()))?;
    } else {
        text = fs::read_to_string(path).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    }
    Ok(text)
}

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("output is serialisable")
}

fn weight(args: &WeightArgs) -> Result<(FieldCtx, WeightShape)> {
    let f = FieldCtx::new(args.field.p, args.field.deg)?;
    let shape = WeightShape::new(&f, args.r.clone())?;
    Ok((f, shape))
}

/// Model for truncation level `level`, honouring a precision override.
fn model(f: FieldCtx, shape: WeightShape, args: &ModelArgs, level: u32) -> Result<Model> {
    let min = precision_for_level(level);
    let precision = args.precision.unwrap_or(min);
    if precision < min {
        return Err(Error::InvalidParameter(format!(
            "precision {precision} is below the minimum {min} for level {level}"
        )));
    }
    Model::new(f, shape, args.w0.into(), precision)
}

fn run_model(run: &RunArgs, level: u32) -> Result<Model> {
    if run.levels == 0 {
        return Err(Error::InvalidParameter("levels must be at least 1".into()));
    }
    let (f, shape) = weight(&run.weight)?;
    model(f, shape, &run.model, level)
}

fn run(cmd: Cmd) -> Result<Outcome> {
    match cmd {
        Cmd::FieldInfo { field, .. } => {
            let f = FieldCtx::new(field.p, field.deg)?;
            Ok(Outcome {
                json: json!({ "p": f.p(), "deg": f.deg(), "q": f.q(), "modulus": f.modulus(), "generator": f.generator().to_int() }),
                summary: format!("F_{} with modulus {:?}", f.q(), f.modulus()),
                passed: true,
            })
        }
        Cmd::WeightInfo { weight: w, .. } => {
            let (f, shape) = weight(&w)?;
            let rep = structure_checks(&shape, &f)?;
            Ok(Outcome {
                summary: format!("weight r = {:?} has dimension {}", shape.r(), rep.dim),
                passed: rep.passed(),
                json: to_value(&rep),
            })
        }
        Cmd::Fn { weight: w, n, model: m, .. } => {
            let (f, shape) = weight(&w)?;
            let model = model(f, shape, &m, n.unsigned_abs() as u32 + 1)?;
            let g = model.f_n(n)?;
            Ok(Outcome {
                summary: format!("f_{n} has {} nonzero entries", g.len()),
                json: to_value(&serial::to_json(&g, model.shape(), model.field())),
                passed: true,
            })
        }
        Cmd::TauApply { input, model: m, .. } => {
            let (f, shape, g) = serial::read(&read_input(&input)?)?;
            let top = g.top().unwrap_or(0);
            let model = model(f, shape, &m, top + 1)?;
            let image = model.tau_apply(&g)?;
            Ok(Outcome {
                summary: format!("image has {} nonzero entries (schema {FUNCTION_SCHEMA})", image.len()),
                json: to_value(&serial::to_json(&image, model.shape(), model.field())),
                passed: true,
            })
        }
        Cmd::Verify { run, .. } => {
            let model = run_model(&run, run.levels)?;
            let cert = freeness::certify(&model, run.levels)?;
            Ok(certificate_outcome(&cert))
        }
        Cmd::FreeBasis { run, instance_out, .. } => {
            let model = run_model(&run, run.levels)?;
            let cert = freeness::build_free_basis(&model, run.levels)?;
            if let Some(path) = instance_out {
                let tau = model.tau_columns(run.levels)?;
                let inst = freeness::graded_instance(&model, &tau)?;
                let text = serde_json::to_string(&inst.to_json()).expect("instance is serialisable");
                fs::write(&path, text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
            }
            Ok(certificate_outcome(&cert))
        }
        Cmd::TauTable { run, .. } => {
            let model = run_model(&run, run.levels + 1)?;
            let rows = freeness::tau_fn_table(&model, run.levels)?;
            let passed = rows.iter().all(|r| r.passed);
            Ok(Outcome {
                summary: format!("{} rows, {} passing", rows.len(), rows.iter().filter(|r| r.passed).count()),
                json: json!({ "schema": CERTIFICATE_SCHEMA, "rows": rows }),
                passed,
            })
        }
        Cmd::EngineCheck { input, .. } => {
            let inst = read_instance(&input)?;
            let rep = engine::check_hypotheses(&inst);
            let failing: Vec<&str> = [
                ("H1", rep.h1.passed),
                ("H2", rep.h2.passed),
                ("H3", rep.h3.passed),
                ("H4", rep.h4.passed),
                ("H5", rep.h5.passed || !rep.h5_required),
                ("commute", rep.commute.passed),
            ]
            .iter()
            .filter(|e| !e.1)
            .map(|e| e.0)
            .collect();
            Ok(Outcome {
                summary: if failing.is_empty() {
                    format!("d = {}, N = {}: all hypotheses hold", inst.d(), inst.level())
                } else {
                    format!("d = {}, N = {}: failing {}", inst.d(), inst.level(), failing.join(", "))
                },
                passed: rep.passed(),
                json: to_value(&rep),
            })
        }
        Cmd::EngineBuild { input, naive, .. } => {
            let inst = read_instance(&input)?;
            let out = engine::build_basis(&inst, !naive)?;
            Ok(Outcome {
                summary: format!("family of {} vectors, rank {} of {}", out.family_size, out.rank, out.dim_b),
                passed: out.verified,
                json: to_value(&out),
            })
        }
        Cmd::EngineFuzz { d, count, seed, p, deg, levels, budget, .. } => {
            let f = FieldCtx::new(p, deg)?;
            let mut runs = Vec::new();
            let mut passed = 0;
            for s in seed..seed + count {
                let level = levels.unwrap_or(if d == 1 { 1 + (s % 3) as u32 } else { 2 });
                let spec = RandomSpec { d, level, budget };
                let sampled = engine::random_instance(&f, s, &spec)?;
                let rep = engine::check_hypotheses(&sampled.instance);
                let built = engine::build_basis(&sampled.instance, true);
                let ok = rep.passed() && built.as_ref().is_ok_and(|b| b.verified);
                passed += ok as u64;
                runs.push(json!({
                    "seed": s,
                    "level": level,
                    "attempts": sampled.attempts,
                    "dim_b": sampled.instance.dim_b(level),
                    "passed": ok,
                }));
            }
            Ok(Outcome {
                summary: format!("{passed}/{count} random instances with d = {d} verified"),
                json: json!({ "d": d, "p": p, "deg": deg, "count": count, "passed": passed, "runs": runs }),
                passed: passed == count,
            })
        }
    }
}

fn read_instance(path: &PathBuf) -> Result<GradedInstance> {
    let j: InstanceJson = serde_json::from_str(&read_input(path)?).map_err(|e| Error::Parse(e.to_string()))?;
    GradedInstance::from_json(&j)
}

fn certificate_outcome(cert: &freeness::FreenessCertificate) -> Outcome {
    let a = cert.basis.as_ref().map(|b| format!(", A sizes {:?}", b.a_sizes)).unwrap_or_default();
    Outcome {
        summary: format!(
            "q = {}, r = {:?}, N = {}: dim B_N = {}{a}",
            cert.params.p.pow(cert.params.deg),
            cert.params.r,
            cert.params.levels,
            cert.dim_b
        ),
        passed: cert.passed,
        json: to_value(cert),
    }
}
