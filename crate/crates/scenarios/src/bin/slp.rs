use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use slp_scenarios::config::Kind;
use slp_scenarios::runner::{chi_csv, SpectrumRun};
use slp_scenarios::{canned_dir, load_config, output_dir, run_scenario, simulate, RunError, RunOptions, Simulation};

#[derive(Parser)]
#[command(name = "slp", version, about = "Stationary light pulse simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Output root (default: output.dir, then $SLP_OUT_DIR, then ./slp-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Target number of field snapshots.
        #[arg(long)]
        snapshots: Option<usize>,
        /// Scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Susceptibility scan of a spectrum scenario; CSV on stdout.
    ScanChi { config: PathBuf },
    /// List the canned scenario files.
    ListScenarios,
    /// Parse and check a scenario without running it.
    Validate { config: PathBuf },
}

fn resolve(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    let canned = canned_dir().join(path).with_extension("toml");
    if canned.exists() {
        canned
    } else {
        path.to_path_buf()
    }
}

fn run_one(path: &Path, out: Option<&Path>, opts: &RunOptions) -> Result<(), RunError> {
    let cfg = load_config(&resolve(path))?;
    let dir = output_dir(&cfg, out);
    let summary = run_scenario(&cfg, &dir, opts)?;
    match summary.failure {
        Some(msg) => {
            log::error!("{}: {msg} (partial outputs in {})", summary.name, dir.display());
            Err(RunError::Stopped(msg))
        }
        None => {
            println!(
                "{}: {} files in {} ({:.2} s)",
                summary.name,
                summary.files.len(),
                dir.display(),
                summary.runtime_s
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            configs,
            out,
            snapshots,
            jobs,
        } => {
            let opts = RunOptions { snapshots };
            let next = AtomicUsize::new(0);
            let worst = Mutex::new(0);
            std::thread::scope(|s| {
                for _ in 0..jobs.clamp(1, configs.len()) {
                    s.spawn(|| loop {
                        let k = next.fetch_add(1, Ordering::SeqCst);
                        let Some(path) = configs.get(k) else { break };
                        if let Err(e) = run_one(path, out.as_deref(), &opts) {
                            eprintln!("{}: {e}", path.display());
                            let mut w = worst.lock().unwrap();
                            *w = (*w).max(e.exit_code());
                        }
                    });
                }
            });
            worst.into_inner().unwrap()
        }
        Command::ScanChi { config } => match load_config(&resolve(&config)) {
            Err(e) => {
                eprintln!("{e}");
                2
            }
            Ok(cfg) if cfg.kind != Kind::Spectrum => {
                eprintln!("{}: not a spectrum scenario", config.display());
                2
            }
            Ok(cfg) => match simulate(&cfg, &RunOptions::default()) {
                Ok(Simulation::Spectrum(run)) => {
                    print!("{}", chi_csv(&run as &SpectrumRun));
                    0
                }
                Ok(_) => 2,
                Err(e) => {
                    eprintln!("{e}");
                    e.exit_code()
                }
            },
        },
        Command::ListScenarios => {
            let mut names: Vec<_> = std::fs::read_dir(canned_dir())
                .map(|d| {
                    d.filter_map(|e| e.ok())
                        .map(|e| e.path())
                        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                        .collect()
                })
                .unwrap_or_default();
            names.sort();
            for p in names {
                match load_config(&p) {
                    Ok(c) => println!("{:<12} {}", c.name, c.description),
                    Err(e) => println!("{:<12} (invalid: {e})", p.display()),
                }
            }
            0
        }
        Command::Validate { config } => match load_config(&resolve(&config)) {
            Ok(cfg) => {
                for w in slp_scenarios::config::validate(&cfg).unwrap_or_default() {
                    println!("warning: {w}");
                }
                println!("{}: ok", cfg.name);
                0
            }
            Err(e) => {
                eprintln!("{e}");
                2
            }
        },
    };
    ExitCode::from(code as u8)
}
