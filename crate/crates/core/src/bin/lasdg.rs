use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lasdg::harness::{self, SimulationConfig, SummaryRecord};
use lasdg::oracle::{self, StructuralOptions};
use lasdg::scenario::GeoInstance;
use lasdg::validate;

#[derive(Parser)]
#[command(name = "lasdg", version, about = "Online network resource allocation with dual gradients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm over Monte Carlo realizations.
    Simulate(Common),
    /// Run SDG, LA-SDG and heavy-ball on shared state streams.
    Compare(Common),
    /// Solve the sample-average ensemble dual and report structural constants.
    Oracle(Common),
    /// Run the built-in invariant checks.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> lasdg::Result<SimulationConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimulationConfig::load(p)?,
            None => SimulationConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(r) = self.realizations {
            cfg.realizations = r;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_summaries(rows: &[SummaryRecord]) {
    println!(
        "{:<22} {:>6} {:>14} {:>10} {:>14} {:>10}",
        "algo", "mu", "mean_cost", "±", "mean_queue", "±"
    );
    for s in rows {
        println!(
            "{:<22} {:>6} {:>14.3} {:>10.3} {:>14.3} {:>10.3}",
            s.algo, s.mu, s.mean_cost, s.cost_halfwidth, s.mean_queue, s.queue_halfwidth
        );
    }
}

fn run(cli: Cli) -> lasdg::Result<ExitCode> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = c.load()?;
            let result = harness::monte_carlo(&cfg, &cfg.simulate_specs(), &[])?;
            print_summaries(&result.summaries);
        }
        Command::Compare(c) => {
            let cfg = c.load()?;
            let result = harness::monte_carlo(&cfg, &cfg.compare_specs(), &[])?;
            print_summaries(&result.summaries);
        }
        Command::Oracle(c) => {
            let cfg = c.load()?;
            let instance = GeoInstance::new(cfg.scenario.clone())?;
            let (dist, report) = harness::oracle_solve(&instance, cfg.oracle_samples, cfg.oracle_seed, cfg.oracle_tol)?;
            let structural =
                oracle::verify_structural_constants(&dist, instance.graph(), &report, &StructuralOptions::default())?;
            let text = format!("{}{}", report.to_text(), structural.to_text());
            if let Some(dir) = &cfg.out_dir {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("oracle.txt"), &text)?;
            }
            print!("{text}");
        }
        Command::Validate(c) => {
            let cfg = c.load()?;
            let checks = validate::run_all(cfg.seed)?;
            let mut ok = true;
            for chk in &checks {
                println!("{} {}: {}", if chk.passed { "PASS" } else { "FAIL" }, chk.name, chk.detail);
                ok &= chk.passed;
            }
            if !ok {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
