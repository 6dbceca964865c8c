use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use robust_qcd::experiment::{
    check_table, run_calibrate, run_evaluate, run_experiment, run_jsb, run_lfd,
};
use robust_qcd::report::{emit_curves, emit_table, table_curves, table_to_csv, TableFormat};
use robust_qcd::{Error, ExperimentConfig, ExperimentId, ResultTable, Seed};

#[derive(Parser)]
#[command(
    name = "rqcd",
    version,
    about = "Robust quickest change detection experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML experiment file. Table commands fall back to built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Replications per delay cell; calibration caps scale with it. 0 is a dry run.
    #[arg(long)]
    budget: Option<u64>,
    /// Output file. Tables are written as CSV or JSON by extension; reports as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare results with the reference values; exit 3 on a miss.
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the `[custom]` detector's threshold.
    Calibrate(Common),
    /// Estimate the `[custom]` detector's delay.
    Evaluate(Common),
    /// Worst-case delays for the Gaussian mean-shift example.
    Table1(Common),
    /// Worst-case delays under contamination, post-change spread varied.
    Table2(Common),
    /// Worst-case delays under contamination, pre-change spread varied.
    Table3(Common),
    /// Bayesian delay curves of the robust and clairvoyant Shiryaev tests.
    BayesCurve(Common),
    /// Least favorable distributions.
    Lfd {
        #[command(subcommand)]
        action: LfdAction,
    },
    /// Joint stochastic boundedness.
    Jsb {
        #[command(subcommand)]
        action: JsbAction,
    },
}

#[derive(Subcommand)]
enum LfdAction {
    /// Solve for the least favorable pair of the `[lfd]` classes.
    Solve(Common),
}

#[derive(Subcommand)]
enum JsbAction {
    /// Check the `[jsb]` probes against the least favorable pair.
    Check(Common),
}

enum Failure {
    Config(String),
    Run(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidDistribution(_)
            | Error::InvalidClass(_)
            | Error::InvalidDetector(_)
            | Error::UnsupportedClassPair(_)
            | Error::DegenerateClasses { .. }
            | Error::NonMonotoneLR => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Check) => ExitCode::from(3),
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Calibrate(c) => calibrate(&c),
        Command::Evaluate(c) => evaluate(&c),
        Command::Table1(c) => table(ExperimentId::Table1, &c),
        Command::Table2(c) => table(ExperimentId::Table2, &c),
        Command::Table3(c) => table(ExperimentId::Table3, &c),
        Command::BayesCurve(c) => table(ExperimentId::BayesCurve, &c),
        Command::Lfd {
            action: LfdAction::Solve(c),
        } => lfd(&c),
        Command::Jsb {
            action: JsbAction::Check(c),
        } => jsb(&c),
    }
}

/// Loads `--config` (or the preset for `id`) and applies the flag overrides.
fn load(common: &Common, id: ExperimentId, needs_file: bool) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?,
        None if needs_file => return Err(Failure::Config("--config is required".into())),
        None => ExperimentConfig::preset(id),
    };
    let is_table = matches!(
        id,
        ExperimentId::Table1
            | ExperimentId::Table2
            | ExperimentId::Table3
            | ExperimentId::BayesCurve
    );
    if is_table && cfg.experiment != id {
        return Err(Failure::Config(format!(
            "config describes experiment {}, not {}",
            cfg.experiment.name(),
            id.name()
        )));
    }
    if let Some(base) = common.seed {
        cfg.seed = Seed::new(base, 0);
    }
    if let Some(runs) = common.budget {
        cfg.budget = cfg.budget.with_runs(runs);
    }
    Ok(cfg)
}

fn write_text(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(p, text).map_err(|e| Failure::Run(format!("{}: {e}", p.display())))?;
            info!("wrote {}", p.display());
            Ok(())
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Run(format!("stdout: {e}"))),
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn verdict(lines: &[String], pass: bool) -> Outcome {
    for l in lines {
        eprintln!("{l}");
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn calibrate(common: &Common) -> Outcome {
    let cfg = load(common, ExperimentId::Custom, true)?;
    let result = run_calibrate(&cfg)?;
    write_json(common.out.as_deref(), &result)?;
    if common.check {
        let rel_tol = cfg.budget.calibration.rel_tol;
        let pass = result.within_tolerance(rel_tol);
        let line = format!(
            "{} calibration: achieved {:.6} +/- {:.6}, target {:.6}",
            if pass { "PASS" } else { "FAIL" },
            result.achieved.value,
            result.achieved.stderr,
            result.target
        );
        return verdict(&[line], pass);
    }
    Ok(())
}

fn evaluate(common: &Common) -> Outcome {
    let cfg = load(common, ExperimentId::Custom, true)?;
    let report = run_evaluate(&cfg)?;
    write_json(common.out.as_deref(), &report)
}

fn table(id: ExperimentId, common: &Common) -> Outcome {
    let cfg = load(common, id, false)?;
    let t = run_experiment(&cfg)?;
    write_table(&t, &cfg, common)?;
    for cell in t.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "cell {} {}: {}",
            cell.row,
            cell.column,
            cell.error.as_deref().unwrap_or_default()
        );
    }
    if common.check && !cfg.budget.is_dry_run() {
        let lines = check_table(&t);
        let pass = lines.iter().all(|l| l.pass) && t.cells.iter().all(|c| c.error.is_none());
        let text: Vec<String> = lines.iter().map(ToString::to_string).collect();
        return verdict(&text, pass);
    }
    Ok(())
}

fn write_table(t: &ResultTable, cfg: &ExperimentConfig, common: &Common) -> Outcome {
    let mut targets: Vec<(PathBuf, TableFormat)> = Vec::new();
    if let Some(p) = &common.out {
        targets.push((p.clone(), TableFormat::from_path(p)));
    }
    if let Some(p) = &cfg.output.csv {
        targets.push((p.clone(), TableFormat::Csv));
    }
    if let Some(p) = &cfg.output.json {
        targets.push((p.clone(), TableFormat::Json));
    }
    if targets.is_empty() {
        write_text(None, &table_to_csv(t))?;
    }
    for (path, format) in &targets {
        emit_table(t, *format, path)?;
    }
    if cfg.experiment == ExperimentId::BayesCurve {
        let dir = cfg.output.curves.clone().or_else(|| {
            common
                .out
                .as_ref()
                .map(|p| p.parent().map(Path::to_path_buf).unwrap_or_default())
        });
        if let Some(dir) = dir {
            let curves = table_curves(t);
            if !curves.is_empty() {
                emit_curves(&curves, &dir, cfg.experiment.name())?;
            }
        }
    }
    Ok(())
}

fn lfd(common: &Common) -> Outcome {
    let cfg = load(common, ExperimentId::Lfd, false)?;
    let report = run_lfd(&cfg)?;
    write_json(common.out.as_deref(), &report)?;
    if common.check {
        let Some([ra, rb]) = report.residuals else {
            return Ok(());
        };
        let pass = ra < 1e-8 && rb < 1e-8;
        let line = format!(
            "{} lfd residuals: a {ra:.3e}, b {rb:.3e} (limit 1e-8)",
            if pass { "PASS" } else { "FAIL" }
        );
        return verdict(&[line], pass);
    }
    Ok(())
}

fn jsb(common: &Common) -> Outcome {
    let cfg = load(common, ExperimentId::Jsb, false)?;
    let report = run_jsb(&cfg)?;
    write_json(common.out.as_deref(), &report)?;
    if common.check {
        let lines: Vec<String> = report
            .margins
            .iter()
            .map(|m| {
                format!(
                    "{} jsb {}: margin {:.4} (tolerance {})",
                    if m.margin >= -report.tolerance {
                        "PASS"
                    } else {
                        "FAIL"
                    },
                    m.member,
                    m.margin,
                    report.tolerance
                )
            })
            .collect();
        return verdict(&lines, report.pass);
    }
    Ok(())
}
