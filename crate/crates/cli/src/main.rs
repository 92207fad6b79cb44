//! Command-line driver: load scenarios, run them, write CSV and SVG output.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use vibsup_core::adapt::GammaMode;
use vibsup_core::harness::{emit_csv, emit_plots, run, Scenario, ScenarioConfig, Telemetry};
use vibsup_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_OTHER: u8 = 1;

/// Simulate the adaptive two-mass drive scenario.
///
/// Without --config the built-in reference experiment is run.
#[derive(Debug, Parser)]
#[command(name = "vibsup", version)]
struct Args {
    /// Scenario file (TOML); repeat to run several scenarios.
    #[arg(long = "config", value_name = "FILE")]
    configs: Vec<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    #[arg(long)]
    dt: Option<f64>,

    #[arg(long = "t-final")]
    t_final: Option<f64>,

    /// Keep all estimates at their initial values.
    #[arg(long)]
    no_adaptation: bool,

    /// Track the main-line reference only.
    #[arg(long)]
    no_dither: bool,

    /// `scaled` (γ1 + γ0·λ) or `constant` (γ1).
    #[arg(long, value_name = "MODE")]
    gamma_mode: Option<GammaMode>,

    /// Also write tracking.svg, errors.svg and excitation.svg.
    #[arg(long)]
    emit_plots: bool,

    /// Scenarios run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_CONFIG, msg: format!("config error: {e}") }
    }
}

struct Job {
    name: String,
    cfg: ScenarioConfig,
    outdir: PathBuf,
}

fn apply_overrides(cfg: &mut ScenarioConfig, args: &Args) {
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(t) = args.t_final {
        cfg.t_final = t;
    }
    if args.no_adaptation {
        cfg.adaptation.enabled = false;
    }
    if args.no_dither {
        cfg.reference.dither_enabled = false;
    }
    if let Some(m) = args.gamma_mode {
        cfg.adaptation.mode = m;
    }
}

fn jobs(args: &Args) -> Result<Vec<Job>, Failure> {
    let mut named: Vec<(String, ScenarioConfig)> = Vec::new();
    if args.configs.is_empty() {
        named.push(("nominal".into(), ScenarioConfig::default()));
    }
    for path in &args.configs {
        let cfg = ScenarioConfig::load(path).map_err(Failure::config)?;
        let stem = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
        named.push((stem, cfg));
    }
    let single = named.len() == 1;
    let mut out = Vec::new();
    for (i, (name, mut cfg)) in named.into_iter().enumerate() {
        apply_overrides(&mut cfg, args);
        let outdir = if single { args.out.clone() } else { args.out.join(format!("{i:02}-{name}")) };
        out.push(Job { name, cfg, outdir });
    }
    Ok(out)
}

fn summary(name: &str, tel: &Telemetry) -> String {
    let last = tel.records.last();
    let resets: Vec<String> = tel.resets.iter().map(|t| format!("{t:.4}")).collect();
    match last {
        Some(r) => format!(
            "{name}: t = {:.4}, |kappa err| = {:.3e}, |x_p err| = {:.3e}, resets = [{}]",
            r.t,
            r.kappa_err,
            r.xp_err,
            resets.join(", ")
        ),
        None => format!("{name}: no records"),
    }
}

fn write_outputs(tel: &Telemetry, dir: &Path, plots: bool) -> Result<(), Failure> {
    let io = |e: Error| Failure { code: EXIT_OTHER, msg: format!("output error: {e}") };
    std::fs::create_dir_all(dir).map_err(|e| io(e.into()))?;
    emit_csv(tel, &dir.join("telemetry.csv")).map_err(io)?;
    if plots {
        emit_plots(tel, dir).map_err(io)?;
    }
    Ok(())
}

fn run_job(job: &Job, plots: bool) -> Result<String, Failure> {
    let sc = Scenario::from_config(&job.cfg).map_err(Failure::config)?;
    match run(&sc) {
        Ok(tel) => {
            write_outputs(&tel, &job.outdir, plots)?;
            Ok(summary(&job.name, &tel))
        }
        Err(aborted) => {
            // Keep whatever was gathered before the fault.
            write_outputs(&aborted.telemetry, &job.outdir, plots)?;
            let code = match aborted.error {
                Error::NumericFault { .. } => EXIT_NUMERIC,
                _ => EXIT_OTHER,
            };
            Err(Failure { code, msg: format!("{}: {}", job.name, aborted.error) })
        }
    }
}

fn run_all(jobs: &[Job], n_threads: usize, plots: bool) -> Vec<Result<String, Failure>> {
    let n_threads = n_threads.clamp(1, jobs.len().max(1));
    let mut results: Vec<Option<Result<String, Failure>>> = (0..jobs.len()).map(|_| None).collect();
    let chunk = jobs.len().div_ceil(n_threads).max(1);
    std::thread::scope(|s| {
        for (js, rs) in jobs.chunks(chunk).zip(results.chunks_mut(chunk)) {
            s.spawn(move || {
                for (j, r) in js.iter().zip(rs.iter_mut()) {
                    *r = Some(run_job(j, plots));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every job ran")).collect()
}

fn main() -> ExitCode {
    let args = Args::parse();
    let jobs = match jobs(&args) {
        Ok(j) => j,
        Err(f) => {
            eprintln!("{}", f.msg);
            return ExitCode::from(f.code);
        }
    };
    if args.print_config {
        for j in &jobs {
            print!("{}", j.cfg.to_toml_string());
        }
        return ExitCode::SUCCESS;
    }
    let mut code = 0u8;
    for r in run_all(&jobs, args.jobs, args.emit_plots) {
        match r {
            Ok(line) => println!("{line}"),
            Err(f) => {
                eprintln!("{}", f.msg);
                // Config errors outrank numeric faults, which outrank the rest.
                let rank = |c: u8| match c {
                    EXIT_CONFIG => 3,
                    EXIT_NUMERIC => 2,
                    0 => 0,
                    _ => 1,
                };
                if rank(f.code) > rank(code) {
                    code = f.code;
                }
            }
        }
    }
    ExitCode::from(code)
}
