//! Command-line front end. Exit codes: 0 success, 1 semantic failure
//! (verification or check failed), 2 input error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::algebra::MultiMatrixAlgebra;
use crate::demo::{run_demo, DEMO_NAMES};
use crate::format::Document;
use crate::gen::{random_channel, random_supermap_from_circuit, Seed};
use crate::realize::{check_realisation, realize, CircuitShape};
use crate::supermap::verify_deterministic;

pub const TOL_ENV: &str = "SUPERMAP_FORGE_TOL";
pub const CLI_DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "supermap-forge", version, about = "Verify and realise deterministic supermaps")]
pub struct Cli {
    /// Numerical tolerance [default: 1e-8, or $SUPERMAP_FORGE_TOL]
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a supermap document is deterministic
    Verify {
        supermap: PathBuf,
        /// Write the report document here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the realising circuit of a deterministic supermap
    Realize {
        supermap: PathBuf,
        /// Write the realisation document here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a realisation with its supermap on random channels and a spanning set
    Check {
        supermap: PathBuf,
        realisation: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report document here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the bundled examples
    Demo {
        name: String,
        /// Write the demo's realisation document here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a random channel or circuit-generated supermap
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// Random channel between two algebras given as block dimensions, e.g. `2,1`
    Channel {
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Supermap from channels A → B to channels C → D computed by a random circuit
    Supermap {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        c: String,
        #[arg(long)]
        d: String,
        /// Memory dimension of the generating circuit
        #[arg(long, default_value_t = 1)]
        p_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Outcome of a command: an exit code and a message for stderr.
#[derive(Debug)]
enum Failure {
    Semantic(String),
    Input(String),
}

type Outcome = std::result::Result<(), Failure>;

fn input(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn semantic(e: impl std::fmt::Display) -> Failure {
    Failure::Semantic(e.to_string())
}

fn resolve_tol(flag: Option<f64>) -> std::result::Result<f64, Failure> {
    let tol = match flag {
        Some(t) => t,
        None => match std::env::var(TOL_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::Input(format!("{TOL_ENV}={v:?} is not a number")))?,
            Err(_) => CLI_DEFAULT_TOL,
        },
    };
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Failure::Input(format!("tolerance must be positive, got {tol}")));
    }
    Ok(tol)
}

/// Block dimensions such as `2,1,1`.
pub fn parse_dims(s: &str) -> std::result::Result<MultiMatrixAlgebra, String> {
    let dims: std::result::Result<Vec<usize>, _> =
        s.split(',').map(|p| p.trim().parse::<usize>()).collect();
    let dims = dims.map_err(|_| format!("bad block dimensions {s:?}"))?;
    MultiMatrixAlgebra::from_dims(&dims).map_err(|e| e.to_string())
}

fn write_or_print(doc: &Document, out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => doc.save(p).map_err(input),
        None => {
            print!("{}", doc.to_json());
            Ok(())
        }
    }
}

fn cmd_verify(path: &Path, out: Option<&Path>, tol: f64) -> Outcome {
    let s = Document::load(path)
        .and_then(|d| d.to_supermap())
        .map_err(input)?;
    let r = verify_deterministic(&s, tol);
    println!("cp:               {} (min eigenvalue {:.3e})", r.cp_ok, r.cp.min_eigenvalue);
    println!("kernel residual:  {:.3e}", r.kernel_residual);
    println!("N unital residual: {:.3e}", r.n_unital_residual);
    println!("N cp:             {}", r.n_cp_ok);
    println!("deterministic:    {}", r.verdict);
    if let Some(out) = out {
        let report = Document::report(json!({
            "command": "verify",
            "tol": tol,
            "cp_ok": r.cp_ok,
            "cp_min_eigenvalue": r.cp.min_eigenvalue,
            "kernel_residual": r.kernel_residual,
            "n_unital_residual": r.n_unital_residual,
            "n_cp_ok": r.n_cp_ok,
            "verdict": r.verdict,
            "n_map": Document::channel(&r.n_map),
        }));
        report.save(out).map_err(input)?;
    }
    if r.verdict {
        Ok(())
    } else {
        Err(semantic("supermap is not deterministic"))
    }
}

fn cmd_realize(path: &Path, out: Option<&Path>, tol: f64) -> Outcome {
    let mut s = Document::load(path)
        .and_then(|d| d.to_supermap())
        .map_err(input)?;
    let report = s.verify(tol);
    if !report.verdict {
        return Err(semantic(format!(
            "supermap is not deterministic (kernel residual {:.3e}, N unital residual {:.3e})",
            report.kernel_residual, report.n_unital_residual
        )));
    }
    let r = realize(&s, tol).map_err(semantic)?;
    println!("p_dim:            {}", r.p_dim());
    println!("bound:            {} (max dim(H_in,i)·dim(K_in,k))", r.bound);
    println!("within bound:     {}", r.p_dim() <= r.bound);
    println!("N ranks r_ik:     {:?}", r.ranks);
    println!("W residual:       {:.3e}", r.w_residual);
    println!("W isometry defect: {:.3e}", r.w_isometry_defect);
    println!("Gram condition:   {:.3e}", r.gram_condition);
    if let Some(out) = out {
        Document::realisation(&r).save(out).map_err(input)?;
    }
    Ok(())
}

fn cmd_check(
    supermap: &Path,
    realisation: &Path,
    trials: usize,
    seed: u64,
    out: Option<&Path>,
    tol: f64,
) -> Outcome {
    let s = Document::load(supermap)
        .and_then(|d| d.to_supermap())
        .map_err(input)?;
    let r = Document::load(realisation)
        .and_then(|d| d.to_realisation(tol.max(crate::DEFAULT_TOL)))
        .map_err(input)?;
    if CircuitShape::of(&s) != *r.circuit.shape()
        && check_shapes(&CircuitShape::of(&s), r.circuit.shape()).is_err()
    {
        return Err(input("realisation and supermap have different algebras"));
    }
    let report = check_realisation(&r.circuit, &s, trials, tol, Seed(seed)).map_err(input)?;
    println!("trials:             {}", report.trials);
    println!("random deviation:   {:.3e}", report.random_deviation);
    println!("spanning deviation: {:.3e}", report.spanning_deviation);
    println!("passed:             {}", report.passed);
    if let Some(out) = out {
        Document::report(json!({
            "command": "check",
            "tol": tol,
            "trials": report.trials,
            "seed": seed,
            "random_deviation": report.random_deviation,
            "spanning_deviation": report.spanning_deviation,
            "passed": report.passed,
        }))
        .save(out)
        .map_err(input)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(semantic(format!(
            "max deviation {:.3e} exceeds {tol:e}",
            report.max_deviation()
        )))
    }
}

fn check_shapes(x: &CircuitShape, y: &CircuitShape) -> crate::Result<()> {
    x.a.ensure_compatible(&y.a)?;
    x.b.ensure_compatible(&y.b)?;
    x.c.ensure_compatible(&y.c)?;
    x.d.ensure_compatible(&y.d)
}

fn cmd_demo(name: &str, out: Option<&Path>, tol: f64) -> Outcome {
    if !DEMO_NAMES.contains(&name) {
        return Err(input(format!(
            "unknown demo {name:?}; available: {}",
            DEMO_NAMES.join(", ")
        )));
    }
    let d = run_demo(name, tol).map_err(semantic)?;
    let shape = d.realisation.circuit.shape();
    println!("demo {}: {}", d.name, d.summary);
    println!("  A = {}   B = {}   C = {}   D = {}", shape.a, shape.b, shape.c, shape.d);
    println!("  E: {} → {}", d.realisation.e_channel().source(), d.realisation.e_channel().target());
    println!("  G: {} → {}", d.realisation.g_channel().source(), d.realisation.g_channel().target());
    println!("  p_dim = {} (bound {})", d.realisation.p_dim(), d.realisation.bound);
    println!("  round trip deviation {:.3e}", d.check.max_deviation());
    for (text, ok) in &d.assertions {
        println!("  [{}] {text}", if *ok { "ok" } else { "FAIL" });
    }
    if let Some(out) = out {
        Document::realisation(&d.realisation).save(out).map_err(input)?;
    }
    if d.passed() {
        Ok(())
    } else {
        Err(semantic("structural assertion failed"))
    }
}

fn cmd_gen(kind: &GenKind) -> Outcome {
    match kind {
        GenKind::Channel {
            source,
            target,
            seed,
            out,
        } => {
            let a = parse_dims(source).map_err(input)?;
            let b = parse_dims(target).map_err(input)?;
            let ch = random_channel(&a, &b, Seed(*seed)).map_err(semantic)?;
            write_or_print(&Document::channel(&ch), out.as_deref())
        }
        GenKind::Supermap {
            a,
            b,
            c,
            d,
            p_dim,
            seed,
            out,
        } => {
            let algebras = [a, b, c, d]
                .iter()
                .map(|s| parse_dims(s))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(input)?;
            if *p_dim == 0 {
                return Err(input("--p-dim must be at least 1"));
            }
            let s = random_supermap_from_circuit(
                &algebras[0],
                &algebras[1],
                &algebras[2],
                &algebras[3],
                *p_dim,
                Seed(*seed),
            )
            .map_err(semantic)?;
            write_or_print(&Document::supermap(&s), out.as_deref())
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run(args: impl IntoIterator<Item = std::ffi::OsString>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = resolve_tol(cli.tol).and_then(|tol| match &cli.command {
        Command::Verify { supermap, out } => cmd_verify(supermap, out.as_deref(), tol),
        Command::Realize { supermap, out } => cmd_realize(supermap, out.as_deref(), tol),
        Command::Check {
            supermap,
            realisation,
            trials,
            seed,
            out,
        } => cmd_check(supermap, realisation, *trials, *seed, out.as_deref(), tol),
        Command::Demo { name, out } => cmd_demo(name, out.as_deref(), tol),
        Command::Gen { kind } => cmd_gen(kind),
    });
    match outcome {
        Ok(()) => 0,
        Err(Failure::Semantic(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
