use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use framer_core::experiment::Experiment;
use framer_core::synthesis::SynthesisOutcome;
use framer_core::Error;

/// Interval observers with learned unknown-input models.
#[derive(Debug, Parser)]
#[command(name = "framer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the gain synthesis problem and write a verified certificate.
    Synth {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate ground truth and run the observer.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Fit an abstraction model offline from interval data.
    Learn {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthesis problem in SDPA sparse format.
    ExportSdpa { config: PathBuf, out: PathBuf },
    /// Audit the system data and check enclosure over the configured seeds.
    Check {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Outcome {
    Ok,
    PropertyViolated,
    SynthesisFailed,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ObserverDivergence { .. }
        | Error::InconsistentData { .. }
        | Error::ContractViolation(_)
        | Error::CertificateRejected(_) => 2,
        Error::SynthesisFailed(_) => 3,
        _ => 1,
    }
}

fn write_out(path: &PathBuf, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    match cli.command {
        Command::Synth { config, out } => {
            let exp = Experiment::load(&config)?;
            match exp.synthesize()? {
                SynthesisOutcome::Certified(cert) => {
                    let path =
                        out.unwrap_or_else(|| exp.output_path(&exp.config.output.certificate));
                    write_out(&path, &(cert.to_json()? + "\n"))?;
                    println!("certified gamma = {:.6e} ({})", cert.gamma, cert.solver);
                    println!("certificate written to {}", path.display());
                    Ok(Outcome::Ok)
                }
                SynthesisOutcome::Infeasible { status } => {
                    eprintln!("no certified gain: {status}");
                    Ok(Outcome::SynthesisFailed)
                }
            }
        }
        Command::Run {
            config,
            seed,
            horizon,
            runs,
        } => {
            let mut exp = Experiment::load(&config)?;
            if let Some(s) = seed {
                exp.config.observer.seed = s;
            }
            if let Some(h) = horizon.filter(|&h| h > 0) {
                exp.config.observer.horizon = h;
            } else if horizon == Some(0) {
                return Err(Error::Config {
                    key: "--horizon".into(),
                    msg: "must be at least 1".into(),
                });
            }
            if let Some(r) = runs {
                exp.config.observer.runs = r.max(1);
            }
            let batch = exp.run_and_write()?;
            println!(
                "{} run(s), {} steps: violations = {}, sup eps = {:.6e}",
                batch.runs.len(),
                batch.horizon,
                batch.violations,
                batch.sup_eps_norm
            );
            Ok(if batch.violations == 0 {
                Outcome::Ok
            } else {
                Outcome::PropertyViolated
            })
        }
        Command::Learn { config, out } => {
            let exp = Experiment::load(&config)?;
            let model = exp.learn()?;
            let path = out.unwrap_or_else(|| exp.output_path(&exp.config.output.model));
            write_out(&path, &(model.to_json()? + "\n"))?;
            println!(
                "{} samples, model written to {}",
                model.len(),
                path.display()
            );
            Ok(Outcome::Ok)
        }
        Command::ExportSdpa { config, out } => {
            let exp = Experiment::load(&config)?;
            let asm = exp.assemble()?;
            write_out(&out, &asm.problem.to_sdpa_string())?;
            println!(
                "{} variables, blocks {:?}",
                asm.problem.num_vars(),
                asm.problem.block_struct
            );
            Ok(Outcome::Ok)
        }
        Command::Check { config, out } => {
            let exp = Experiment::load(&config)?;
            let report = exp.check()?;
            for item in &report.items {
                let tag = if item.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", item.name, item.detail);
            }
            let path = out.unwrap_or_else(|| exp.output_path(&exp.config.output.check));
            write_out(&path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            Ok(if report.passed {
                Outcome::Ok
            } else {
                Outcome::PropertyViolated
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::PropertyViolated) => ExitCode::from(2),
        Ok(Outcome::SynthesisFailed) => ExitCode::from(3),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
