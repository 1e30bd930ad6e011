use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use racestack::raceline::{
    fit_closed_raceline, read_waypoints_csv, write_line_csv, FitOptions, RacingLine,
};
use racestack::sim::{
    compute_metrics, emit_outputs, read_summary, run_scenario, run_sweep, Config, RunSummary,
    SimError, Telemetry, METRICS_FILE,
};

#[derive(Parser)]
#[command(name = "racestack", version, about = "Racing-line fitting and closed-loop tracking simulation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a closed racing line through x,y waypoints.
    FitLine {
        waypoints: PathBuf,
        /// Output sample spacing, m.
        #[arg(long, default_value_t = 0.5)]
        spacing: f64,
        #[arg(long, default_value_t = 0)]
        smoothing_passes: usize,
        /// Maximum distance smoothing may move the line from a waypoint, m.
        #[arg(long, default_value_t = 0.5)]
        max_deviation: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run one named scenario and write telemetry, metrics and plots.
    Run {
        scenario: String,
        /// TOML config; the built-in default when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Constant-speed laps at several speeds, one output directory each.
    Sweep {
        /// Comma-separated speeds, m/s.
        #[arg(long, value_delimiter = ',', default_value = "25,40,50,60")]
        speeds: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        laps: f64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print a metrics table for run directories (or parents of them).
    Report { dirs: Vec<PathBuf> },
}

enum Failure {
    Config(String),
    Aborted(String),
    Synthesis(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Aborted(_) => 2,
            Failure::Synthesis(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Aborted(m) | Failure::Synthesis(m) => m,
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Synthesis(_) => Failure::Synthesis(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    Ok(match path {
        Some(p) => Config::from_file(p)?,
        None => Config::builtin(),
    })
}

fn finish_run(telemetry: &Telemetry, line: &RacingLine, dir: &Path) -> Result<RunSummary, Failure> {
    let metrics = compute_metrics(telemetry)?;
    emit_outputs(telemetry, &metrics, line, dir)?;
    Ok(RunSummary {
        metadata: telemetry.metadata.clone(),
        rows: telemetry.rows.len(),
        metrics,
    })
}

fn print_table(summaries: &[(String, RunSummary)]) {
    println!(
        "{:<24} {:>8} {:>10} {:>10} {:>10} {:>10} {:>8}  status",
        "run", "rows", "max_cte", "mean_cte", "max_steer", "v_rmse", "sat"
    );
    for (label, s) in summaries {
        let m = &s.metrics;
        let status = match &s.metadata.abort {
            None => "ok".to_string(),
            Some(a) => format!("aborted: {a}"),
        };
        println!(
            "{:<24} {:>8} {:>10.4} {:>10.4} {:>10.5} {:>10.4} {:>8.4}  {status}",
            label, s.rows, m.max_abs_cte, m.mean_abs_cte, m.max_steer, m.speed_tracking_rmse, m.saturation_fraction
        );
    }
}

fn fit_line(waypoints: &Path, options: FitOptions, output: &Path) -> Result<(), Failure> {
    let wps = read_waypoints_csv(waypoints).map_err(|e| Failure::Config(e.to_string()))?;
    let line = fit_closed_raceline(&wps, &options).map_err(|e| Failure::Config(e.to_string()))?;
    write_line_csv(&line, output).map_err(|e| Failure::Config(e.to_string()))?;
    println!(
        "wrote {} samples ({:.1} m) to {}",
        line.len(),
        line.total_length(),
        output.display()
    );
    Ok(())
}

fn run(scenario: &str, config: Option<&Path>, seed: u64, output: &Path) -> Result<(), Failure> {
    let config = load_config(config)?;
    let spec = *config.scenario(scenario)?;
    let line = Arc::new(config.build_line()?);
    let telemetry = run_scenario(scenario, &spec, &config, line.clone(), seed)?;
    let summary = finish_run(&telemetry, &line, output)?;
    print_table(&[(scenario.to_string(), summary)]);
    match &telemetry.metadata.abort {
        None => Ok(()),
        Some(a) => Err(Failure::Aborted(format!("{scenario}: {a}"))),
    }
}

fn sweep(speeds: &[f64], laps: f64, config: Option<&Path>, seed: u64, output: &Path) -> Result<(), Failure> {
    let config = load_config(config)?;
    let line = Arc::new(config.build_line()?);
    let mut summaries = Vec::new();
    let mut aborted = Vec::new();
    for (speed, result) in run_sweep(&config, line.clone(), speeds, laps, seed) {
        let telemetry = result?;
        let label = format!("speed_{speed}");
        let summary = finish_run(&telemetry, &line, &output.join(&label))?;
        if summary.metadata.abort.is_some() {
            aborted.push(label.clone());
        }
        summaries.push((label, summary));
    }
    print_table(&summaries);
    if aborted.is_empty() {
        Ok(())
    } else {
        Err(Failure::Aborted(format!("aborted runs: {}", aborted.join(", "))))
    }
}

fn collect_summaries(dir: &Path, out: &mut Vec<(String, RunSummary)>) -> Result<(), Failure> {
    let direct = dir.join(METRICS_FILE);
    if direct.is_file() {
        let s = read_summary(&direct)?;
        out.push((dir.display().to_string(), s));
        return Ok(());
    }
    let mut children: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join(METRICS_FILE).is_file())
        .collect();
    if children.is_empty() {
        return Err(Failure::Config(format!("{}: no {METRICS_FILE} found", dir.display())));
    }
    children.sort();
    for child in children {
        let s = read_summary(&child.join(METRICS_FILE))?;
        out.push((child.display().to_string(), s));
    }
    Ok(())
}

fn report(dirs: &[PathBuf]) -> Result<(), Failure> {
    if dirs.is_empty() {
        return Err(Failure::Config("report needs at least one directory".into()));
    }
    let mut summaries = Vec::new();
    for dir in dirs {
        collect_summaries(dir, &mut summaries)?;
    }
    print_table(&summaries);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Cmd::FitLine {
            waypoints,
            spacing,
            smoothing_passes,
            max_deviation,
            output,
        } => fit_line(
            waypoints,
            FitOptions {
                sample_spacing: *spacing,
                smoothing_passes: *smoothing_passes,
                max_deviation: *max_deviation,
            },
            output,
        ),
        Cmd::Run {
            scenario,
            config,
            seed,
            output,
        } => run(scenario, config.as_deref(), *seed, output),
        Cmd::Sweep {
            speeds,
            laps,
            config,
            seed,
            output,
        } => sweep(speeds, *laps, config.as_deref(), *seed, output),
        Cmd::Report { dirs } => report(dirs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
