//! The `jumplab` command line: spec-file ingestion, commands and reports.

pub mod report;
pub mod specfile;
pub mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use jumplab_core::stochint::{self, cherny_harness, integrate_deterministic};
use jumplab_core::{
    classify_with, gallery, simulate_paths, CompensatedJump, Error, Regime, SimOptions,
};
use serde_json::{json, Value};

use crate::specfile::{resolve, Loaded, SpecFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const SEED_VAR: &str = "JUMPLAB_SEED";
pub const DEFAULT_PATHS: usize = 1000;
pub const DEFAULT_TRUNCATIONS: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-6];

#[derive(Debug, Parser)]
#[command(
    name = "jumplab",
    version,
    about = "Single-jump local martingales: classify, simulate and verify"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a spec and print the verdict report.
    Classify {
        /// Spec file path or `gallery:<name>`.
        spec: String,
    },
    /// Simulate paths and write CSV (path_id,t,gamma,value).
    Simulate {
        spec: String,
        #[arg(long)]
        paths: Option<usize>,
        /// Defaults to the spec's run block, then $JUMPLAB_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated times, or `start:end:count`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run every applicable invariant suite; nonzero exit on any failure.
    Verify {
        /// Spec file path, `gallery:<name>` or a bare gallery name.
        spec: String,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build a non-semimartingale witness `L_n`.
    Witness {
        spec: String,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Integrate a deterministic step integrand and classify the result.
    Integrate {
        spec: String,
        /// `cherny` or a step-integrand JSON file.
        #[arg(long)]
        integrand: String,
        /// Also write the derived spec file here.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Gallery of worked examples.
    Gallery {
        #[command(subcommand)]
        action: GalleryAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum GalleryAction {
    List,
    /// Classify every entry against its expected regime.
    RunAll,
    /// Write an entry as a spec file.
    Export {
        name: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

/// Output of one command: text for stdout and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: Vec<u8>,
    pub code: i32,
}

impl Outcome {
    fn json(value: &Value, code: i32) -> Outcome {
        let mut stdout = serde_json::to_vec_pretty(value).expect("reports serialise");
        stdout.push(b'\n');
        Outcome { stdout, code }
    }

    fn text(s: String, code: i32) -> Outcome {
        Outcome {
            stdout: s.into_bytes(),
            code,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Syntax { .. }
        | Error::UnknownIdentifier { .. }
        | Error::InvalidLaw(_)
        | Error::InvalidDrift(_)
        | Error::InvalidArgument(_)
        | Error::UnknownEntry(_)
        | Error::SpecFile(_)
        | Error::UnsupportedAtomAtEndpoint
        | Error::HypothesisViolation(_)
        | Error::EventuallyConstant { .. } => EXIT_INPUT,
        Error::Domain { .. }
        | Error::QuadratureFailure { .. }
        | Error::ProbeFailure(_)
        | Error::InconclusiveLimit
        | Error::Contradiction(_)
        | Error::BudgetExhausted { .. } => EXIT_NUMERICAL,
    }
}

fn regime_code(r: &Regime) -> i32 {
    if r.is_unknown() {
        EXIT_UNKNOWN
    } else {
        EXIT_OK
    }
}

/// Seed precedence: flag, spec run block, `$JUMPLAB_SEED`, zero.
pub fn effective_seed(flag: Option<u64>, loaded: &Loaded) -> Result<u64, Error> {
    if let Some(s) = flag.or(loaded.run.seed) {
        return Ok(s);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("{SEED_VAR} must be an unsigned integer, got `{v}`"))
        }),
        Err(_) => Ok(0),
    }
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::InvalidArgument(format!("bad grid `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n < 2 || !(b > a) {
            return Err(bad());
        }
        return Ok((0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect());
    }
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

/// Eleven equally spaced times up to `t_G`, or up to 16 on an infinite horizon.
pub fn default_grid(loaded: &Loaded) -> Vec<f64> {
    let tg = loaded.law.right_endpoint();
    let end = if tg.is_finite() {
        tg
    } else {
        loaded.law.horizon().min(16.0)
    };
    (0..=10).map(|i| end * i as f64 / 10.0).collect()
}

fn classify_cmd(source: &str) -> Result<Outcome, Error> {
    let loaded = resolve(source)?;
    let verdict = classify_with(&loaded.spec, &loaded.law, &loaded.options)?;
    let value = report::verdict_report(source, &verdict);
    let code = if !verdict.evidence.all_passed() {
        EXIT_INVARIANT
    } else {
        regime_code(&verdict.regime)
    };
    Ok(Outcome::json(&value, code))
}

pub struct SimulateArgs<'a> {
    pub source: &'a str,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<&'a str>,
    pub threads: Option<usize>,
}

/// CSV bytes for a simulation; shared by the command and its tests.
pub fn simulate_csv(args: &SimulateArgs) -> Result<Vec<u8>, Error> {
    let loaded = resolve(args.source)?;
    let seed = effective_seed(args.seed, &loaded)?;
    let grid = match (args.grid, &loaded.run.grid) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(g)) => g.clone(),
        (None, None) => default_grid(&loaded),
    };
    let paths = args.paths.or(loaded.run.paths).unwrap_or(DEFAULT_PATHS);
    if args.threads == Some(0) {
        return Err(Error::InvalidArgument("--threads must be positive".into()));
    }
    let comp = Arc::new(CompensatedJump::with_options(
        &loaded.spec,
        &loaded.law,
        loaded.options,
    )?);
    let bundle = simulate_paths(
        &comp,
        &grid,
        paths,
        seed,
        &SimOptions {
            threads: args.threads,
        },
    )?;
    let mut out = Vec::new();
    bundle
        .write_csv(&mut out)
        .map_err(|e| Error::InvalidArgument(format!("writing CSV: {e}")))?;
    Ok(out)
}

fn witness_cmd(source: &str, n: Option<usize>) -> Result<Outcome, Error> {
    let loaded = resolve(source)?;
    let n = n.or(loaded.run.witness_n).unwrap_or(1);
    match stochint::nonsemimartingale_witness(&loaded.spec, &loaded.law, n) {
        Ok(w) => {
            let (sup, integral) = w.reevaluate(&loaded.spec, &loaded.law)?;
            let passed = sup <= 1.0 / n as f64 && integral >= 1.0;
            let value = report::witness_report(source, &w, sup, integral);
            Ok(Outcome::json(
                &value,
                if passed { EXIT_OK } else { EXIT_INVARIANT },
            ))
        }
        Err(Error::BudgetExhausted { achieved }) => Ok(Outcome::json(
            &report::witness_exhausted(source, n, achieved),
            EXIT_NUMERICAL,
        )),
        Err(e) => Err(e),
    }
}

fn integrate_cmd(source: &str, integrand: &str, export: Option<PathBuf>) -> Result<Outcome, Error> {
    let loaded = resolve(source)?;
    let (derived, harness) = if integrand == "cherny" {
        let eps = loaded
            .run
            .truncations
            .clone()
            .unwrap_or(DEFAULT_TRUNCATIONS.to_vec());
        let h = cherny_harness(&loaded.spec, &eps)?;
        (stochint::cherny_pair(&loaded.spec)?, Some(h))
    } else {
        let j = specfile::read_integrand(integrand)?;
        (
            integrate_deterministic(&j, &loaded.spec, &loaded.law)?,
            None,
        )
    };
    let verdict = match &harness {
        Some(h) => h.integrated.clone(),
        None => classify_with(&derived, &loaded.law, &loaded.options)?,
    };
    let name = loaded.name.as_deref().map(|n| format!("{n}-integrated"));
    let derived_file = SpecFile::export(name.as_deref(), &loaded.law, &derived)?;
    if let Some(path) = export {
        std::fs::write(&path, derived_file.to_json())
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    }
    let chain_ok = harness
        .as_ref()
        .map_or(true, |h| h.rows.iter().all(|r| r.chain_holds));
    let value =
        report::integrate_report(source, integrand, &derived_file, &verdict, harness.as_ref());
    let code = if !chain_ok || !verdict.evidence.all_passed() {
        EXIT_INVARIANT
    } else {
        regime_code(&verdict.regime)
    };
    Ok(Outcome::json(&value, code))
}

fn gallery_cmd(action: GalleryAction) -> Result<Outcome, Error> {
    match action {
        GalleryAction::List => {
            let mut s = String::new();
            for name in gallery::list() {
                let e = gallery::load(name)?;
                s.push_str(&format!("{name}\t{}\t{}\n", e.expected.name(), e.note));
            }
            Ok(Outcome::text(s, EXIT_OK))
        }
        GalleryAction::RunAll => {
            let rows = report::gallery_run_all()?;
            let all = rows.iter().all(|r| r["matches"] == json!(true));
            let value = json!({"report": "gallery_run", "version": report::REPORT_VERSION, "entries": rows});
            Ok(Outcome::json(
                &value,
                if all { EXIT_OK } else { EXIT_INVARIANT },
            ))
        }
        GalleryAction::Export { name, out } => {
            let e = gallery::load(&name)?;
            let text = SpecFile::export(Some(&name), &e.law, &e.spec)?.to_json();
            match out {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|err| {
                        Error::InvalidArgument(format!("{}: {err}", path.display()))
                    })?;
                    Ok(Outcome::text(String::new(), EXIT_OK))
                }
                None => Ok(Outcome::text(text + "\n", EXIT_OK)),
            }
        }
    }
}

/// Runs one parsed command.
pub fn execute(cli: Cli) -> Result<Outcome, Error> {
    match cli.command {
        Command::Classify { spec } => classify_cmd(&spec),
        Command::Simulate {
            spec,
            paths,
            seed,
            grid,
            threads,
            out,
        } => {
            let csv = simulate_csv(&SimulateArgs {
                source: &spec,
                paths,
                seed,
                grid: grid.as_deref(),
                threads,
            })?;
            match out {
                Some(path) => {
                    std::fs::write(&path, csv)
                        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
                    Ok(Outcome::text(String::new(), EXIT_OK))
                }
                None => Ok(Outcome {
                    stdout: csv,
                    code: EXIT_OK,
                }),
            }
        }
        Command::Verify { spec, paths, seed } => {
            let source = if spec.contains(':')
                || spec.ends_with(".json")
                || std::path::Path::new(&spec).exists()
            {
                spec
            } else {
                format!("gallery:{spec}")
            };
            let loaded = resolve(&source)?;
            let seed = effective_seed(seed, &loaded)?;
            let r = verify::run(&source, &loaded, paths, seed)?;
            let code = r.exit_code();
            Ok(Outcome::json(
                &serde_json::to_value(&r).expect("reports serialise"),
                code,
            ))
        }
        Command::Witness { spec, n } => witness_cmd(&spec, n),
        Command::Integrate {
            spec,
            integrand,
            export,
        } => integrate_cmd(&spec, &integrand, export),
        Command::Gallery { action } => gallery_cmd(action),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(&out.stdout)
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return EXIT_INPUT;
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
