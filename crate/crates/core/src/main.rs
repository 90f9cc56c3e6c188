use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qcond::channels::QuantumMap;
use qcond::effects::{distribution, State};
use qcond::matkernel::{CMatrix, Tolerance};
use qcond::measmodel::{measured_instrument, measured_pointer_observable};
use qcond::scenario::{run_checks, Scenario};
use qcond::Error;

#[derive(Parser)]
#[command(
    name = "qcond",
    version,
    about = "Conditioned observables, instruments and measurement models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Load a scenario file and validate every object in it.
    Validate { file: PathBuf },
    /// Run registered identities on random instances.
    Check {
        /// Comma-separated identity names, group names, or `all`.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        suite: Vec<String>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Inclusive dimension range `A..B`, or a single dimension.
        #[arg(long, default_value = "2..3", value_parser = parse_dims)]
        dims: RangeInclusive<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Absolute tolerance; defaults to $QCOND_TOL or 1e-9.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Outcome distribution of an observable in a state.
    Distribution {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        observable: String,
        #[arg(long)]
        state: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Pointer observable and pointer instrument of a measurement model.
    Measure {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        model: String,
        /// Input state for the instrument action; defaults to the maximally mixed state.
        #[arg(long)]
        state: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn parse_dims(s: &str) -> Result<RangeInclusive<usize>, String> {
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad dimension `{t}`: {e}"))
    };
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let d = parse(s)?;
            (d, d)
        }
    };
    if a == 0 || a > b {
        return Err(format!("dimension range `{s}` must satisfy 1 ≤ A ≤ B"));
    }
    Ok(a..=b)
}

fn matrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn format_matrix(m: &CMatrix) -> String {
    m.to_rows()
        .iter()
        .map(|r| {
            let cells: Vec<String> = r
                .iter()
                .map(|z| format!("{:>9.5}{:+.5}i", z.re, z.im))
                .collect();
            format!("    [{}]", cells.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Serialize)]
struct OutcomeSummary {
    effect: Vec<Vec<[f64; 2]>>,
    probability: f64,
    image: Vec<Vec<[f64; 2]>>,
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Validate { file } => {
            let sc = Scenario::load(&file)?;
            println!("{}: {} objects valid", file.display(), sc.objects().len());
            for (name, obj) in sc.objects() {
                println!("  {name}: {}", obj.type_name());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            suite,
            trials,
            dims,
            seed,
            tol,
            format,
        } => {
            let tol = match tol {
                Some(t) => Tolerance::new(t)?,
                None => Tolerance::from_env(),
            };
            let report = run_checks(&suite, trials, dims, seed, tol)?;
            match format {
                Format::Json => println!("{}", report.to_json()),
                Format::Text => print!("{}", report.to_text()),
            }
            Ok(if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Distribution {
            scenario,
            observable,
            state,
            format,
        } => {
            let sc = Scenario::load(&scenario)?;
            let obs = sc.observable(&observable)?;
            let rho = sc.state(&state)?;
            let probs = distribution(rho, obs)?;
            match format {
                Format::Json => {
                    let map: BTreeMap<&str, f64> = obs
                        .outcomes()
                        .iter()
                        .map(String::as_str)
                        .zip(probs)
                        .collect();
                    println!("{}", serde_json::to_string_pretty(&map)?);
                }
                Format::Text => {
                    for (label, p) in obs.outcomes().iter().zip(probs) {
                        println!("{label}\t{p:.12}");
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Measure {
            scenario,
            model,
            state,
            format,
        } => {
            let sc = Scenario::load(&scenario)?;
            let m = sc.measurement_model(&model)?;
            let rho = match state {
                Some(name) => sc.state(&name)?.clone(),
                None => State::maximally_mixed(m.dim_h()),
            };
            let pointer = measured_pointer_observable(m);
            let instrument = measured_instrument(m);
            let summary: BTreeMap<&str, OutcomeSummary> = pointer
                .outcomes()
                .iter()
                .zip(pointer.effects())
                .zip(instrument.ops())
                .map(|((label, effect), op)| {
                    let image = op.apply_matrix(rho.matrix());
                    let s = OutcomeSummary {
                        effect: matrix_rows(effect.matrix()),
                        probability: image.trace().re,
                        image: matrix_rows(&image),
                    };
                    (label.as_str(), s)
                })
                .collect();
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
                Format::Text => {
                    for ((label, effect), op) in pointer
                        .outcomes()
                        .iter()
                        .zip(pointer.effects())
                        .zip(instrument.ops())
                    {
                        let image = op.apply_matrix(rho.matrix());
                        println!("outcome {label}: probability {:.12}", image.trace().re);
                        println!("  pointer effect:\n{}", format_matrix(effect.matrix()));
                        println!("  instrument image:\n{}", format_matrix(&image));
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
