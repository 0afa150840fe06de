//! Command-line front end: correlation tables, realization verification,
//! certification runs, and the LOCC discrimination optimizer.
//!
//! Exit codes: 0 success, 1 verification failure, 2 I/O error, 3 validation
//! or usage error, 4 statistics-hypothesis violation.

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nlwe::error::Error;
use nlwe::linalg::Ket;
use nlwe::locc::{
    domino_instance, global_success, seesaw_one_way, DiscriminationInstance, GlobalSuccess,
    SeesawResult,
};
use nlwe::realization::{
    correlations, realization_from_json_str, CorrelationTensor, Realization, N_X, N_Y, N_Z,
};
use nlwe::reference::assemble_reference;
use nlwe::selftest::{verify_theorem1, ExtractionResult, Tolerances};
use nlwe::verify::{compile_report, run_all_checks};

#[derive(Parser)]
#[command(name = "nlwe", version, about = "entanglement-swapping network simulation and certification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// print progress to stderr
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct InputArgs {
    /// realization file (JSON)
    #[arg(long, conflicts_with = "reference")]
    input: Option<PathBuf>,
    /// use the built-in ideal realization
    #[arg(long)]
    reference: bool,
    /// output path (stdout if omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit the full correlation tensor p(a,b1,b2,c|x,y,z)
    Correlations {
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run the diagnostic check suite on a realization
    Verify {
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, default_value_t = 1e-10)]
        stats_tol: f64,
        #[arg(long, default_value_t = 1e-9)]
        residual_tol: f64,
    },
    /// Run the certification isometries and extraction statements
    Selftest {
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, default_value_t = 1e-10)]
        stats_tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        residual_tol: f64,
    },
    /// Optimize one-way LOCC discrimination of a product ensemble
    Locc {
        /// custom ensemble file (JSON); default: the nine-tile basis
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        /// first-round outcome count
        #[arg(long, default_value_t = 9)]
        outcomes: usize,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 2,
        Error::HypothesisViolation { .. } => 4,
        _ => 3,
    }
}

fn load_realization(io: &InputArgs) -> Result<Realization, Error> {
    let r = if io.reference {
        Realization::reference(&assemble_reference())
    } else {
        let path = io
            .input
            .as_ref()
            .ok_or_else(|| Error::Usage("either --input or --reference is required".into()))?;
        let text = std::fs::read_to_string(path)?;
        realization_from_json_str(&text)?
    };
    r.validate()?;
    Ok(r)
}

fn write_output(path: &Option<PathBuf>, payload: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, payload)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(payload.as_bytes())?;
            if !payload.ends_with('\n') {
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

/// Format with 12 significant digits in plain decimal.
fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0.000000000000".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Round to 12 significant digits (for stable JSON payloads).
fn sig12_round(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

#[derive(Serialize)]
struct TensorRow {
    x: usize,
    y: usize,
    z: usize,
    a: usize,
    b1: usize,
    b2: usize,
    c: usize,
    p: f64,
}

fn tensor_rows(t: &CorrelationTensor) -> Vec<TensorRow> {
    let mut rows = Vec::with_capacity(CorrelationTensor::LEN);
    for x in 0..N_X {
        for y in 0..N_Y {
            for z in 0..N_Z {
                for a in 0..3 {
                    for b1 in 0..3 {
                        for b2 in 0..3 {
                            for c in 0..3 {
                                rows.push(TensorRow {
                                    x,
                                    y,
                                    z,
                                    a,
                                    b1,
                                    b2,
                                    c,
                                    p: sig12_round(t.get(x, y, z, a, b1, b2, c)),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    rows
}

fn cmd_correlations(io: &InputArgs, format: Format) -> Result<(), Error> {
    let r = load_realization(io)?;
    let t = correlations(&r)?;
    let payload = match format {
        Format::Csv => {
            let mut s = String::from("x,y,z,a,b1,b2,c,p\n");
            for row in tensor_rows(&t) {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    row.x,
                    row.y,
                    row.z,
                    row.a,
                    row.b1,
                    row.b2,
                    row.c,
                    sig12(row.p)
                ));
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({
            "digest": r.digest(),
            "rows": tensor_rows(&t),
        }))
        .expect("serializable"),
    };
    write_output(&io.output, &payload)
}

fn cmd_verify(io: &InputArgs, stats_tol: f64, residual_tol: f64) -> Result<i32, Error> {
    let r = load_realization(io)?;
    let t = correlations(&r)?;
    let mut checks = run_all_checks(&r, &t)?;
    for c in checks.iter_mut() {
        c.threshold = if c.threshold == nlwe::verify::STATS_THRESHOLD {
            stats_tol
        } else {
            residual_tol
        };
        c.pass = c.residual <= c.threshold;
    }
    let report = compile_report(&r, checks, Vec::new());
    let pass = report.verdict == "PASS";
    write_output(&io.output, &serde_json::to_string_pretty(&report).expect("serializable"))?;
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct SelftestPayload {
    digest: String,
    all_pass: bool,
    statements: Vec<ExtractionResult>,
}

fn cmd_selftest(io: &InputArgs, stats_tol: f64, residual_tol: f64) -> Result<i32, Error> {
    let r = load_realization(io)?;
    let tol = Tolerances { stats: stats_tol, residual: residual_tol };
    let statements = verify_theorem1(&r, &tol)?;
    let all_pass = statements.iter().all(|s| s.pass);
    let payload = SelftestPayload { digest: r.digest(), all_pass, statements };
    write_output(&io.output, &serde_json::to_string_pretty(&payload).expect("serializable"))?;
    Ok(if all_pass { 0 } else { 1 })
}

#[derive(serde::Deserialize)]
struct EnsembleEntry {
    prior: f64,
    left: Vec<[f64; 2]>,
    right: Vec<[f64; 2]>,
}

fn load_instance(path: &Option<PathBuf>) -> Result<DiscriminationInstance, Error> {
    let Some(p) = path else {
        return Ok(domino_instance());
    };
    let text = std::fs::read_to_string(p)?;
    let entries: Vec<EnsembleEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("ensemble file: {e}")))?;
    let ensemble = entries
        .into_iter()
        .map(|e| {
            let to_ket = |v: Vec<[f64; 2]>| Ket {
                data: v
                    .into_iter()
                    .map(|[re, im]| num_complex::Complex64::new(re, im))
                    .collect(),
            };
            (e.prior, to_ket(e.left), to_ket(e.right))
        })
        .collect();
    let inst = DiscriminationInstance { ensemble };
    inst.validate()?;
    Ok(inst)
}

#[derive(Serialize)]
struct LoccPayload {
    restriction: &'static str,
    global: GlobalSuccess,
    seesaw: SeesawResult,
    gap: f64,
}

fn cmd_locc(
    input: &Option<PathBuf>,
    output: &Option<PathBuf>,
    seed: u64,
    restarts: usize,
    outcomes: usize,
    verbose: u8,
) -> Result<(), Error> {
    let inst = load_instance(input)?;
    let global = global_success(&inst)?;
    if verbose > 0 {
        eprintln!("global benchmark: {}", global.value);
    }
    let seesaw = seesaw_one_way(&inst, outcomes, restarts, seed)?;
    if verbose > 0 {
        eprintln!("one-way best over {restarts} restarts: {}", seesaw.best_success);
    }
    let payload = LoccPayload {
        restriction: "one-way two-round protocols only; not a proof of full LOCC impossibility",
        gap: sig12_round(global.value - seesaw.best_success),
        global,
        seesaw,
    };
    write_output(output, &serde_json::to_string_pretty(&payload).expect("serializable"))
}

fn run(cli: &Cli) -> Result<i32, Error> {
    match &cli.cmd {
        Cmd::Correlations { io, format } => {
            cmd_correlations(io, *format)?;
            Ok(0)
        }
        Cmd::Verify { io, stats_tol, residual_tol } => cmd_verify(io, *stats_tol, *residual_tol),
        Cmd::Selftest { io, stats_tol, residual_tol } => {
            cmd_selftest(io, *stats_tol, *residual_tol)
        }
        Cmd::Locc { input, output, seed, restarts, outcomes } => {
            cmd_locc(input, output, *seed, *restarts, *outcomes, cli.verbose)?;
            Ok(0)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            match &e {
                Error::HypothesisViolation { deviation, x, y, z, a, b1, b2, c } => {
                    eprintln!(
                        "statistics hypothesis violated: worst entry at \
                         (x={x},y={y},z={z},a={a},b1={b1},b2={b2},c={c}) deviates by {deviation:.3e}"
                    );
                }
                other => eprintln!("error: {other}"),
            }
            std::process::exit(exit_code(&e));
        }
    }
}
