use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;

use clap::{Args, Parser, Subcommand};

use freqshape_cli::runner::{
    cmd_certify, cmd_compare, cmd_demo, cmd_simulate, cmd_synthesize, RunConfig, StrategyChoice,
};

/// Grid-forming frequency-shaping synthesis, certification, and simulation.
#[derive(Parser)]
#[command(name = "freqshape", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Case file (JSON); the bundled demo network when omitted.
    #[arg(long)]
    case: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for the disturbance-bus draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step disturbance size (p.u.).
    #[arg(long = "step-pu", default_value_t = -0.3, allow_hyphen_values = true)]
    step_pu: f64,
    /// Step instant (s).
    #[arg(long = "step-time", default_value_t = 1.0)]
    step_time: f64,
    /// Simulation horizon (s).
    #[arg(long = "t-end", default_value_t = 30.0)]
    t_end: f64,
    /// Integrator step (s).
    #[arg(long, default_value_t = 0.001)]
    dt: f64,
    /// Turbine governor deadband (Hz).
    #[arg(long = "deadband-hz", default_value_t = 0.036)]
    deadband_hz: f64,
    /// Override the case's nominal frequency (Hz).
    #[arg(long = "nominal-hz")]
    nominal_hz: Option<f64>,
    /// Over-voltage factor for the coupling bounds.
    #[arg(long = "vmax-factor", default_value_t = 1.1)]
    vmax_factor: f64,
    /// Simulate the nonlinear power flows and deadbands.
    #[arg(long)]
    nonlinear: bool,
    /// RoCoF bound (p.u./s) for spec-driven synthesis.
    #[arg(long = "max-rocof")]
    max_rocof: Option<f64>,
    /// Steady-state deviation bound (p.u.) for spec-driven synthesis.
    #[arg(long = "max-ss-dev")]
    max_ss_dev: Option<f64>,
    /// Droop-term realization strategy.
    #[arg(long, value_parser = ["match", "distribute"], default_value = "distribute")]
    strategy: String,
}

impl CommonArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            case_path: self.case.clone(),
            out_dir: self.out.clone(),
            seed: self.seed,
            step_pu: self.step_pu,
            step_time: self.step_time,
            t_end: self.t_end,
            dt: self.dt,
            deadband_hz: self.deadband_hz,
            nominal_hz: self.nominal_hz,
            vmax_factor: self.vmax_factor,
            nonlinear: self.nonlinear,
            max_rocof: self.max_rocof,
            max_ss_dev: self.max_ss_dev,
            strategy: if self.strategy == "match" {
                StrategyChoice::MatchIndividual
            } else {
                StrategyChoice::DistributeReduced
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Design the frequency-shaping fleet and write synthesis.json.
    Synthesize(CommonArgs),
    /// Run the shared-witness stability certificate on an assigned case.
    Certify(CommonArgs),
    /// Simulate a step disturbance on an assigned case.
    Simulate(CommonArgs),
    /// Matched comparison of virtual-inertia and frequency-shaping fleets.
    Compare(CommonArgs),
    /// Full pipeline on the bundled demo network (nonlinear comparison).
    Demo(CommonArgs),
}

fn main() -> ProcessExit {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synthesize(args) => {
            let cfg = args.config();
            cmd_synthesize(&cfg).map(|out| {
                println!("synthesis written to {}", out.files[0].display());
                out.exit
            })
        }
        Command::Certify(args) => {
            let cfg = args.config();
            cmd_certify(&cfg).map(|out| {
                println!(
                    "certificate: overall={} after {} attempts -> {}",
                    out.report.overall,
                    out.report.attempts,
                    out.files[0].display()
                );
                out.exit
            })
        }
        Command::Simulate(args) => {
            let cfg = args.config();
            cmd_simulate(&cfg).map(|out| {
                println!(
                    "simulated step at bus {}; nadir {:.6} p.u., steady state {:.6} p.u.",
                    out.disturbance_bus, out.metrics.nadir, out.metrics.ss_dev
                );
                for f in &out.files {
                    println!("wrote {}", f.display());
                }
                out.exit
            })
        }
        Command::Compare(args) => {
            let cfg = args.config();
            cmd_compare(&cfg).map(|out| {
                println!(
                    "disturbance at bus {}: overshoot ratio {:.4} (virtual inertia) vs {:.4} (frequency shaping)",
                    out.comparison.disturbance_bus,
                    out.comparison.gfvi.overshoot_ratio,
                    out.comparison.gffs.overshoot_ratio
                );
                for f in &out.files {
                    println!("wrote {}", f.display());
                }
                out.exit
            })
        }
        Command::Demo(args) => {
            let cfg = args.config();
            cmd_demo(&cfg).map(|out| {
                for f in &out.files {
                    println!("wrote {}", f.display());
                }
                out.exit
            })
        }
    };
    match result {
        Ok(exit) => ProcessExit::from(exit.code() as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ProcessExit::from(err.exit_code().code() as u8)
        }
    }
}
