use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kpo_sweep::{emit_energy_diagram, emit_offdiag_trace, oracle_check, run_sweep, SweepConfig, SweepError, SweepMethod};

#[derive(Parser)]
#[command(name = "kpo", version, about = "Reflection and transmission spectra of Kerr parametric oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum traces over the probe grid for every pump value and method
    Sweep(Common),
    /// Tracked eigenenergies versus pump amplitude
    EnergyDiagram(Common),
    /// Stationary off-diagonal density-matrix elements versus pump amplitude
    Offdiag(Common),
    /// Compare the sideband solution with time-domain integration
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Output directory, overriding the config
    #[arg(long, value_name = "DIR", env = "KPO_OUT_DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Method to evaluate; repeat to select several, overriding the config
    #[arg(long = "method", value_name = "NAME")]
    methods: Vec<SweepMethod>,
}

fn load(common: &Common) -> Result<SweepConfig, SweepError> {
    let mut cfg = SweepConfig::from_path(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output.directory = out.clone();
    }
    cfg.override_methods(&common.methods)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), SweepError> {
    let (Command::Sweep(common) | Command::EnergyDiagram(common) | Command::Offdiag(common) | Command::OracleCheck(common)) =
        &cli.command;
    let cfg = load(common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| SweepError::Usage(format!("thread pool: {e}")))?;

    pool.install(|| {
        let summary = match &cli.command {
            Command::Sweep(_) => run_sweep(&cfg)?,
            Command::EnergyDiagram(_) => emit_energy_diagram(&cfg)?,
            Command::Offdiag(_) => emit_offdiag_trace(&cfg)?,
            Command::OracleCheck(_) => {
                let (summary, results) = oracle_check(&cfg)?;
                let worst = results.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
                println!("oracle-check: {} points, worst relative error {worst:.3e}", results.len());
                summary
            }
        };
        for f in &summary.files {
            println!("{}", f.display());
        }
        println!("{}", summary.manifest.display());
        Ok(())
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
