use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use spinkin_core::runner::{
    fit_frequency, load_config, run_case, run_checks, transform_snapshot, CheckSuite,
    DiagnosticsSeries, FitOutcome, Snapshot, TransformKind, TransformOptions,
};
use spinkin_core::Error;

#[derive(Parser)]
#[command(
    name = "spinkin",
    version,
    about = "Spin-resolved quantum kinetic plasma simulations"
)]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "SPINKIN_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output root, overriding `out_dir` in the config.
        #[arg(long, env = "SPINKIN_OUT_DIR")]
        out: Option<PathBuf>,
        /// Seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run acceptance checks: `all`, ids or names, comma separated.
    Check {
        #[arg(default_value = "all")]
        suite: String,
        /// List the available checks and exit.
        #[arg(long)]
        list: bool,
    },
    /// Transform a spinor snapshot.
    Transform {
        /// Snapshot sidecar (`.json`).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Output sidecar; defaults to `<input stem>_<kind>.json` next to the input.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        n_v: usize,
        #[arg(long, default_value_t = 6.0)]
        v_max: f64,
        #[arg(long, default_value_t = 8)]
        n_theta: usize,
        #[arg(long, default_value_t = 16)]
        n_phi: usize,
        /// JSON array of A_x grid samples for `gi`.
        #[arg(long)]
        a_x: Option<PathBuf>,
    },
    /// Fit a damped oscillation to one diagnostics column.
    Fit {
        /// `diagnostics.csv`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        column: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Wigner,
    Spinq,
    Gi,
}

impl From<Kind> for TransformKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Wigner => TransformKind::Wigner,
            Kind::Spinq => TransformKind::SpinQ,
            Kind::Gi => TransformKind::Gi,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Run { config, out, seed } => run(&config, out, seed),
        Command::Check { suite, list } => check(&suite, list),
        Command::Transform {
            input,
            kind,
            output,
            n_v,
            v_max,
            n_theta,
            n_phi,
            a_x,
        } => {
            let a_x = match a_x {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    Some(
                        serde_json::from_str::<Vec<f64>>(&text)
                            .with_context(|| format!("parsing {}", p.display()))?,
                    )
                }
                None => None,
            };
            let opts = TransformOptions {
                n_v,
                v_max,
                n_theta,
                n_phi,
                a_x,
            };
            transform(&input, kind.into(), output, &opts)
        }
        Command::Fit { input, column } => fit(&input, &column),
    }
}

fn run(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<ExitCode> {
    let mut cfg = load_config(config).map_err(config_error)?;
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let report = run_case(&cfg)?;
    println!(
        "{} steps of {} ({}) written to {}",
        report.completed_steps,
        cfg.scenario.name(),
        cfg.backend().name(),
        report.dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn config_error(e: Error) -> anyhow::Error {
    match e {
        Error::Config(items) => anyhow::anyhow!("invalid config:\n  {}", items.join("\n  ")),
        other => other.into(),
    }
}

fn check(suite: &str, list: bool) -> Result<ExitCode> {
    if list {
        for (id, name) in CheckSuite::names() {
            println!("{id:>2} {name}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    let suite = CheckSuite::parse(suite).map_err(config_error)?;
    let outcomes = run_checks(&suite);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} passed", outcomes.len());
    Ok(if passed == outcomes.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn transform(
    input: &Path,
    kind: TransformKind,
    output: Option<PathBuf>,
    opts: &TransformOptions,
) -> Result<ExitCode> {
    let snap = Snapshot::read(input)?;
    let out = transform_snapshot(&snap, kind, opts)?;
    let target = output.unwrap_or_else(|| {
        let stem = input
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("snapshot");
        input.with_file_name(format!("{stem}_{}.json", kind.name()))
    });
    let dir = target
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = target
        .file_stem()
        .and_then(|s| s.to_str())
        .context("output needs a file name")?;
    let written = out.write(dir, stem)?;
    println!(
        "{} {:?} written to {}",
        kind.name(),
        out.meta.shape(),
        written.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn fit(input: &Path, column: &str) -> Result<ExitCode> {
    let series = DiagnosticsSeries::read_csv(input)?;
    match fit_frequency(&series, column)? {
        FitOutcome::Fitted(f) => {
            println!("omega = {:e} +- {:e}", f.omega, f.uncertainty);
            println!("gamma = {:e} +- {:e}", f.gamma, f.gamma_uncertainty);
            println!(
                "amplitude = {:e}, peak ratio = {:.1}, periods = {:.1}",
                f.amplitude, f.peak_ratio, f.periods
            );
            Ok(ExitCode::SUCCESS)
        }
        FitOutcome::Inconclusive { reason } => {
            println!("inconclusive: {reason}");
            Ok(ExitCode::from(2))
        }
    }
}
