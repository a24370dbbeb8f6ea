use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use photsub::io::{read_dataset, read_json, write_json, write_wigner, ReconstructionRecord};
use photsub::pipeline::{reconstruct, run_pipeline, sample_only, RunOptions};
use photsub::report::{format_deltas, format_report};
use photsub::{compare_reports, ExperimentConfig, Mode, Result, RunError, RunReport};
use photsub_core::homodyne::normalize_dataset;
use photsub_core::wigner::{negativity_report, wigner_eval};

#[derive(Parser)]
#[command(name = "photsub", version, about = "Photon-subtracted squeezed light: simulate, sample, reconstruct")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Herald photon numbers to run, comma separated.
    #[arg(long, value_delimiter = ',')]
    cases: Option<Vec<usize>>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the heralded states and their Wigner functions.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate and draw homodyne datasets.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a state from a dataset directory.
    Reconstruct {
        /// Supplies the reconstruction and grid settings.
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Herald case whose settings apply.
        #[arg(long, default_value_t = 0)]
        herald: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all stages and write a report.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two run reports case by case.
    Compare { a: PathBuf, b: PathBuf },
    /// Check a configuration file and print its hash.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, out } => {
            let cfg = common.load()?;
            let out = run_pipeline(&cfg, Mode::Simulate, &RunOptions { cases: common.cases, out })?;
            print!("{}", format_report(&out.report));
        }
        Command::Sample { common, out } => {
            let cfg = common.load()?;
            let sets = sample_only(&cfg, &RunOptions { cases: common.cases, out: Some(out.clone()) })?;
            for (n, ds) in sets {
                println!("herald {n}: {} frames -> {}", ds.frames.len(), out.join(format!("case_{n}")).display());
            }
        }
        Command::Reconstruct { config, data, herald, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            let (index, _) = cfg
                .tap(herald)
                .ok_or_else(|| RunError::config("--herald", format!("no herald case {herald} in config")))?;
            let ctx = format!("reconstructing {}", data.display());
            let ds = normalize_dataset(&read_dataset(&data)?).map_err(|e| RunError::core(&ctx, e))?;
            let rec = reconstruct(&ds, &cfg.mle_for(index)?, &ctx)?;
            let spec = cfg.wigner.to_spec();
            let grid = wigner_eval(&rec.rho, &spec.x_axis(), &spec.p_axis());
            let neg = negativity_report(&grid, &rec.rho).map_err(|e| RunError::core(&ctx, e))?;
            std::fs::create_dir_all(&out).map_err(|e| RunError::io(&out, e))?;
            write_json(&out.join("reconstruction.json"), &ReconstructionRecord::new(&rec))?;
            write_wigner(&out, "wigner_rec", &grid)?;
            println!(
                "iterations {} converged {} W(0,0) {:.5} +- {:.5} w_min {:.5}",
                rec.iterations_used,
                rec.converged,
                neg.w_origin,
                rec.wigner_err_origin.unwrap_or(f64::NAN),
                neg.w_min
            );
        }
        Command::Pipeline { common, mode, out } => {
            let cfg = common.load()?;
            let out = run_pipeline(&cfg, mode, &RunOptions { cases: common.cases, out })?;
            print!("{}", format_report(&out.report));
        }
        Command::Compare { a, b } => {
            let ra: RunReport = read_json(&a)?;
            let rb: RunReport = read_json(&b)?;
            print!("{}", format_deltas(&compare_reports(&ra, &rb)?));
        }
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            println!("ok {}", cfg.hash());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = photsub::init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
