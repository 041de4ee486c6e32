use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dtc_qrc::config::{Backend, Config};
use dtc_qrc::error::exit;
use dtc_qrc::experiments::{cmd_capacities, cmd_classify, cmd_kernel_adv, cmd_noise_sweep, cmd_phase_scan, Report};

const AFTER_HELP: &str = "\
Precedence: command-line flags, then DTCQRC_* environment variables, then
the config file, then built-in defaults (`dtcqrc print-config` shows them).

Environment:
  DTCQRC_CONFIG     config file path
  DTCQRC_SEED       master seed
  DTCQRC_THREADS    worker threads (0 = automatic)
  DTCQRC_BACKEND    exact | shots | channel | traj
  DTCQRC_OUT        output directory
  DTCQRC_MNIST_DIR  directory with the four MNIST IDX files

Outputs (in the output directory):
  capacities.csv          g,L,seed,metric,value
  capacities_summary.csv  g,metric,mean,stderr
  classify.csv            g,n,encoding,noise,seed,train_acc,test_acc
  classify_summary.csv    g,n,noise,mean_test_acc,stderr
  kernel_adv.csv          g,n,seed,orig_q,orig_c,orig_gap,relabel_gamma,
                          relabeled_q,relabeled_c,relabeled_gap,g_cq,g_qc
  phase_scan.csv          g,L,seed,metric,value,stderr
  phase_crossings.csv     L_small,L_large,g
  noise_sweep.csv         p2,p1,seed,train_acc,test_acc
  noise_sweep_summary.csv p2,mean_test_acc,stderr
  run.json                keys: command, seed, backend, files, config

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical failure.";

#[derive(Parser)]
#[command(name = "dtcqrc", version, about = "Floquet quantum reservoir experiments", after_help = AFTER_HELP)]
struct Cli {
    /// TOML config file; every key is optional.
    #[arg(long, global = true, env = "DTCQRC_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = automatic).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Simulation backend.
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// STM, parity, NARMA10 and OTOC capacities over a g grid.
    Capacities,
    /// MNIST classification through the reservoir.
    Classify,
    /// Quantum vs classical kernel gap before and after adversarial relabeling.
    KernelAdv,
    /// Spin-glass order parameter scan and finite-size crossings.
    PhaseScan,
    /// Accuracy against depolarizing strength.
    NoiseSweep,
    /// Print the effective configuration as TOML.
    PrintConfig,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Capacities => "capacities",
            Command::Classify => "classify",
            Command::KernelAdv => "kernel-adv",
            Command::PhaseScan => "phase-scan",
            Command::NoiseSweep => "noise-sweep",
            Command::PrintConfig => "print-config",
        }
    }
}

fn resolve(cli: &Cli) -> dtc_qrc::Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok())?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.run.out = o.clone();
    }
    if let Some(t) = cli.threads {
        cfg.run.threads = t;
    }
    if let Some(b) = cli.backend {
        cfg.run.backend = b;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> dtc_qrc::Result<()> {
    let cfg = resolve(cli)?;
    if cli.command == Command::PrintConfig {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    if cfg.run.threads > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.run.threads).build_global();
    }
    let report: Report = match cli.command {
        Command::Capacities => cmd_capacities(&cfg)?,
        Command::Classify => cmd_classify(&cfg)?,
        Command::KernelAdv => cmd_kernel_adv(&cfg)?,
        Command::PhaseScan => cmd_phase_scan(&cfg)?,
        Command::NoiseSweep => cmd_noise_sweep(&cfg)?,
        Command::PrintConfig => unreachable!(),
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    report.write_to(&cfg.run.out)?;
    let manifest = serde_json::json!({
        "command": cli.command.name(),
        "seed": cfg.run.seed,
        "backend": cfg.run.backend.name(),
        "files": report.files.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| dtc_qrc::Error::Format(e.to_string()))?;
    std::fs::write(cfg.run.out.join("run.json"), text + "\n")?;
    print!("{}", report.summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
