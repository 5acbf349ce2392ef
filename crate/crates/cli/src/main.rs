use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use birefringent_cavity::characterization::{
    double_lorentzian, fit_transmission, ingest_scan_file, DoubleLorentzianFit, FitOptions,
};
use birefringent_cavity::scenario::{
    load_config, preset, preset_names, run, run_sweep, RoutingSpec, Scenario, SweepSpec,
};
use birefringent_cavity::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Single-photon emission from an atom in a birefringent cavity.
#[derive(Parser, Debug)]
#[command(name = "bcavity", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its CSVs.
    Simulate(ScenarioArgs),
    /// Run a scenario once per sweep value, in parallel.
    Sweep(SweepArgs),
    /// Routing curve over QWP angle, with and without birefringence.
    Route(RouteArgs),
    /// Fit a double Lorentzian to a transmission scan.
    Fit(FitArgs),
    /// List bundled presets, or print one as TOML.
    Presets {
        /// Preset to print.
        name: Option<String>,
    },
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// TOML scenario file, merged onto the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base preset (default: experiment, or the file's `preset` key).
    #[arg(long)]
    preset: Option<String>,
    /// Override a field, e.g. `--set system.delta_p_mhz=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, Error> {
        load_config(self.config.as_deref(), self.preset.as_deref(), &self.overrides)
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Dotted field to sweep; replaces the scenario's sweep section.
    #[arg(long, requires = "values")]
    parameter: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    values: Option<Vec<f64>>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct RouteArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = -90.0, allow_negative_numbers = true)]
    start: f64,
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    stop: f64,
    #[arg(long, default_value_t = 2.5)]
    step: f64,
    /// Skip the birefringence-free comparison curve.
    #[arg(long)]
    no_compare: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// CSV with header `detuning_mhz,transmission`.
    #[arg(long)]
    scan: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Fit one width per peak.
    #[arg(long)]
    independent_widths: bool,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e
                .chain()
                .find_map(|c| c.downcast_ref::<Error>())
                .is_some_and(Error::is_config_error);
            ExitCode::from(if config { EXIT_CONFIG } else { EXIT_NUMERIC })
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(args) => simulate(args.load()?, &args.out, args.plots),
        Command::Sweep(args) => sweep(args),
        Command::Route(args) => {
            let mut s = args.scenario.load()?;
            s.outputs.routing = Some(RoutingSpec {
                start_deg: args.start,
                stop_deg: args.stop,
                step_deg: args.step,
                compare_without_birefringence: !args.no_compare,
            });
            s.validate()?;
            simulate(s, &args.scenario.out, args.scenario.plots)
        }
        Command::Fit(args) => fit(args),
        Command::Presets { name: None } => {
            for n in preset_names() {
                println!("{n}");
            }
            Ok(())
        }
        Command::Presets { name: Some(n) } => {
            let s = preset(&n).ok_or_else(|| {
                Error::Config {
                    path: "preset".into(),
                    message: format!("unknown preset `{n}`"),
                }
            })?;
            print!("{}", s.to_toml()?);
            Ok(())
        }
    }
}

fn simulate(s: Scenario, out: &Path, plots: bool) -> Result<()> {
    let outcome = run(&s, out, plots)?;
    let sm = &outcome.summary;
    println!("scenario = {}", s.name);
    println!("efficiency = {:.6}", sm.efficiency);
    println!("fraction_plus = {:.6}", sm.fraction_plus);
    println!("fraction_minus = {:.6}", sm.fraction_minus);
    if let Some(w) = sm.oscillation_mhz {
        println!("oscillation_mhz = {w:.6}");
    }
    for (a, f1, f2) in &sm.port_fractions {
        println!("qwp {a} deg: port1 = {f1:.6}, port2 = {f2:.6}");
    }
    if let Some(best) = sm.routing_on.iter().max_by(|a, b| a.fraction_port1.total_cmp(&b.fraction_port1)) {
        println!("best_routing = {:.6} at {} deg", best.fraction_port1, best.qwp_angle);
    }
    println!("wrote {} files to {}", outcome.manifest.outputs.len(), out.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut s = args.scenario.load()?;
    if let (Some(parameter), Some(values)) = (args.parameter, args.values) {
        s.sweep = Some(SweepSpec { parameter, values });
        s.validate()?;
    }
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let outcome = run_sweep(&s, &args.scenario.out, workers, args.scenario.plots)?;
    let mut failed = 0;
    for r in &outcome.rows {
        match (&r.summary, &r.error) {
            (Some(sm), _) => {
                let (dom, share) = sm.dominant();
                println!("{}: efficiency = {:.6}, dominant = {dom} ({share:.4})", r.value, sm.efficiency);
            }
            (None, e) => {
                failed += 1;
                println!("{}: failed: {}", r.value, e.as_deref().unwrap_or(""));
            }
        }
    }
    println!("summary: {}", args.scenario.out.join("sweep_summary.csv").display());
    if failed > 0 {
        anyhow::bail!("{failed} of {} sweep runs failed", outcome.rows.len());
    }
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let ingested = ingest_scan_file(&args.scan)?;
    for d in &ingested.rejected {
        log::warn!("line {}: {}", d.line, d.message);
    }
    for w in &ingested.warnings {
        log::warn!("{w}");
    }
    let opts = FitOptions {
        independent_widths: args.independent_widths,
        max_iterations: args.max_iterations,
        ..FitOptions::default()
    };
    let fit = fit_transmission(&ingested.scan, None, &opts)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(
        args.out.join("fit.csv"),
        format!("{}\n{}\n", DoubleLorentzianFit::CSV_HEADER, fit.csv_row()),
    )?;
    let model = fit.model();
    let mut curve = String::from("detuning_mhz,transmission,model\n");
    for (x, y) in ingested.scan.detuning().iter().zip(ingested.scan.signal()) {
        curve.push_str(&format!("{x:.9e},{y:.9e},{:.9e}\n", double_lorentzian(&model, *x)));
    }
    fs::write(args.out.join("fit_curve.csv"), curve)?;
    print!("{}", fit.report());
    Ok(())
}
