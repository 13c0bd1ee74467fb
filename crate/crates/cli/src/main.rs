//! qdeq: analyze linear q-difference equations from the command line.
//!
//! A problem file (JSON) plus a task selector produce a machine-readable
//! result report. Exit status: 0 success, 1 parse/validation error,
//! 2 numerical failure (pole, divergence, resonance), 3 a check-suite
//! deviation exceeded its gate.

mod spec;
mod tasks;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;
use serde_json::{json, Value};

use spec::{ProblemSpec, Scalar};

#[derive(Parser, Debug)]
#[command(
    name = "qdeq",
    about = "Numerical toolkit for linear q-difference equations",
    version
)]
struct Args {
    /// Problem file (JSON). Optional for tasks fully described by flags.
    #[arg(long)]
    input: Option<std::path::PathBuf>,

    /// Task to run (overrides the file's task field)
    #[arg(long, value_parser = ["polygon", "solve", "connect", "confluence", "check"])]
    task: Option<String>,

    /// Base q as a decimal or exact rational (e.g. 0.5 or 1/2)
    #[arg(long)]
    q: Option<String>,

    /// Working precision in bits (binary64 evaluation; recorded in the report).
    /// The QDEQ_PRECISION environment variable overrides the default.
    #[arg(long)]
    precision: Option<u32>,

    /// Truncation tolerance for infinite products and series
    #[arg(long)]
    tol: Option<f64>,

    /// Series truncation order / term cap
    #[arg(long)]
    order: Option<usize>,

    /// Operator in the text DSL (overrides the file's operator)
    #[arg(long)]
    operator: Option<String>,

    /// Output format
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,

    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

fn load_spec(args: &Args) -> Result<ProblemSpec> {
    let mut spec: ProblemSpec = match &args.input {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ProblemSpec::default(),
    };
    if let Some(task) = &args.task {
        spec.task = Some(task.clone());
    }
    if let Some(q) = &args.q {
        spec.q = Some(Scalar::Text(q.clone()));
    }
    if let Some(p) = args.precision {
        spec.precision = Some(p);
    } else if spec.precision.is_none() {
        if let Ok(env_p) = std::env::var("QDEQ_PRECISION") {
            spec.precision = Some(env_p.parse().context("QDEQ_PRECISION")?);
        }
    }
    if let Some(t) = args.tol {
        spec.tol = Some(t);
    }
    if let Some(n) = args.order {
        spec.order = Some(n);
    }
    if let Some(op) = &args.operator {
        spec.operator = Some(spec::OperatorSpec::Dsl(op.clone()));
    }
    Ok(spec)
}

/// Extract coefficient rows for the CSV rendering of solve outputs.
fn csv_from_outputs(outputs: &Value) -> Result<String> {
    let mut rows = String::from("component,exponent,re,im\n");
    let mut push_series = |label: &str, series: &Value| -> Result<()> {
        let coeffs = series
            .get("coefficients")
            .and_then(Value::as_array)
            .ok_or_else(|| anyhow!("no coefficient table in outputs"))?;
        for c in coeffs {
            rows.push_str(&format!(
                "{},{},{},{}\n",
                label,
                c.get("exponent").and_then(Value::as_str).unwrap_or("?"),
                c.get("re").and_then(Value::as_f64).unwrap_or(f64::NAN),
                c.get("im").and_then(Value::as_f64).unwrap_or(f64::NAN),
            ));
        }
        Ok(())
    };
    if let Some(series) = outputs.get("series") {
        push_series("f", series)?;
    } else if let Some(components) = outputs.get("components").and_then(Value::as_array) {
        for comp in components {
            let b = comp.get("b").and_then(Value::as_u64).unwrap_or(0);
            push_series(&format!("X{b}"), comp.get("series").unwrap_or(&Value::Null))?;
        }
    } else {
        bail!("CSV output is only available for coefficient tables (task 'solve')");
    }
    Ok(rows)
}

fn run(args: &Args) -> Result<(Value, bool)> {
    let spec = load_spec(args)?;
    let task = spec
        .task
        .clone()
        .ok_or_else(|| anyhow!("no task given (use --task or the file's task field)"))?;
    let ctx = spec.context()?;
    let started = Instant::now();
    let (outputs, gates_ok) = match task.as_str() {
        "polygon" => (tasks::cmd_polygon(&spec, &ctx)?, true),
        "solve" => (tasks::cmd_solve(&spec, &ctx)?, true),
        "connect" => (tasks::cmd_connect(&spec, &ctx)?, true),
        "confluence" => (tasks::cmd_confluence(&spec, &ctx)?, true),
        "check" => tasks::cmd_check(&spec, &ctx)?,
        other => bail!("unknown task '{other}'"),
    };
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let report = json!({
        "task": task,
        "inputs": serde_json::to_value(&spec)?,
        "outputs": outputs,
        "metadata": {
            "precision_bits_requested": spec.precision.unwrap_or(53),
            "precision_bits_effective": 53,
            "tol": spec.tol.unwrap_or(1e-14),
            "q": tasks::json_c64(ctx.q),
            "order": spec.order,
            "wall_time_ms": wall_ms,
        },
    });
    Ok((report, gates_ok))
}

fn classify_error(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<qdeq_core::Error>() {
        use qdeq_core::Error::*;
        return match core {
            Parse { .. } | NonIntegerShiftPower(_) | InvalidInput(_) | NotHorizontal
            | VariableMismatch { .. } => 1,
            _ => 2,
        };
    }
    // serde/io/flag problems are validation failures
    1
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok((report, gates_ok)) => {
            let rendered = if args.format == "csv" {
                match csv_from_outputs(&report["outputs"]) {
                    Ok(csv) => csv,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                }
            } else {
                serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
            };
            match &args.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, rendered) {
                        eprintln!("error writing {}: {e}", path.display());
                        return ExitCode::from(1);
                    }
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    let _ = stdout.write_all(rendered.as_bytes());
                }
            }
            if gates_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify_error(&e))
        }
    }
}
