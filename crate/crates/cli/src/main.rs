use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use drmdp_core::approx::{DeterministicPolicy, FeatureLayout, ParamSnapshot};
use drmdp_core::counterexamples::{build_fixture, FixtureName};
use drmdp_core::env::{export_heatmap, write_heatmap_csv, PointReachConfig};
use drmdp_core::experiment::{train, write_outcome, RunConfig, Suite};

#[derive(Parser)]
#[command(name = "drmdp", version, about = "Delayed-reward MDP solvers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the self-check suites and print one line per check.
    Verify {
        #[arg(long, default_value = "all", value_parser = ["theory", "counterexamples", "gradients", "all"])]
        suite: String,
    },
    /// Train one seed from a TOML run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the singleton H net over a 10x10 grid as CSV.
    Heatmap {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        grid_size: f64,
        #[arg(long, default_value_t = 8)]
        interval: usize,
    },
    /// Print a named fixture's expected-vs-computed table as CSV.
    Fixtures {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let report = drmdp_core::experiment::verify(suite);
            report.write_to(&mut stdout)?;
            Ok(report.passed())
        }
        Command::Train { config, seed, out } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let outcome = train(&cfg, seed)?;
            let dir = write_outcome(&outcome, &out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir)))?;
            if let Some(last) = outcome.metrics.last() {
                writeln!(
                    stdout,
                    "seed {seed}: step {} return {:.3} steps-to-target {}",
                    last.env_step, last.episodic_return, last.steps_to_target
                )?;
            }
            writeln!(stdout, "wrote {}", dir.display())?;
            Ok(true)
        }
        Command::Heatmap { snapshot, out, grid_size, interval } => {
            let snap = ParamSnapshot::load(&snapshot).with_context(|| format!("loading {}", snapshot.display()))?;
            let cfg = PointReachConfig { grid_size, interval, ..PointReachConfig::default() };
            let policy = DeterministicPolicy::from_net(FeatureLayout::new(2, 2, interval), snap.require("policy")?.clone())?;
            let grid = export_heatmap(snap.require("critic.h0")?, &cfg, &policy)?;
            write_heatmap_csv(&grid, std::fs::File::create(&out)?)?;
            Ok(true)
        }
        Command::Fixtures { name, gamma } => {
            let name: FixtureName = name.parse()?;
            let fixture = build_fixture(name, gamma)?;
            writeln!(stdout, "quantity,expected,computed,passed")?;
            let mut ok = true;
            for c in &fixture.checks {
                ok &= c.passed();
                writeln!(stdout, "{},{},{},{}", c.quantity, c.expected, c.computed, c.passed())?;
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
