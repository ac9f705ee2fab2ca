//! `redcalc`: delay bounds for networks with packet replication, elimination,
//! ordering and regulation, plus a trajectory simulator to check them.
//!
//! Exit codes: 0 on success, 2 when a bound is violated, unbounded or a
//! verification fails, 1 on malformed input or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use redcalc::corpus::{toy_network, volvo_network, ToyVariant};
use redcalc::sim::generators::bundled;
use redcalc::sim::{run_scenario, Scenario};
use redcalc::tfa::{analyze_with, compare_models_with, default_burst_cap, AnalysisConfig, LossModel, PefModel};
use redcalc::topology::Network;
use redcalc::verify::{verify, verify_against_network, VerifyReport};
use redcalc::{Bound, Rational};

#[derive(Parser)]
#[command(name = "redcalc", version, about = "Delay bounds with packet elimination, ordering and regulation")]
struct Cli {
    /// Fixed-point iteration cap for cyclic networks.
    #[arg(long, global = true, env = "REDCALC_ITER_CAP", default_value_t = redcalc::tfa::DEFAULT_ITERATION_CAP)]
    iteration_cap: usize,
    /// Largest burst tolerated before a cyclic iteration is called divergent.
    #[arg(long, global = true)]
    burst_cap: Option<Rational>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Tight,
    Intuitive,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Per-flow end-to-end delay bounds of a network.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Model::Tight)]
        model: Model,
        /// Assume no packet is lost anywhere.
        #[arg(long, conflicts_with = "lossy")]
        lossless: bool,
        /// Assume packets may be lost.
        #[arg(long)]
        lossy: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper bounds under both elimination output models, side by side.
    Compare {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        lossless: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Replay a scenario and report per-point counts and delays.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Write the full trace as CSV.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Check a simulated trajectory against the analytical bounds.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        /// Take the bound from this network instead of the scenario itself.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write the bundled networks and scenarios to a directory.
    Bundle {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Input problems map to exit code 1.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network, InputError> {
    Network::from_json(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, InputError> {
    Scenario::from_json(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), InputError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| InputError(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn status(bad: bool) -> ExitCode {
    if bad {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // Help and version go to stdout and succeed; bad flags are input errors.
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, InputError> {
    let cap = cli.iteration_cap;
    let burst_cap = cli.burst_cap.unwrap_or_else(default_burst_cap);
    if !burst_cap.is_positive() {
        return Err(InputError("--burst-cap must be positive".into()));
    }
    match cli.command {
        Command::Analyze { input, model, lossless, lossy, format, out } => {
            let net = load_network(&input)?;
            let model = match model {
                Model::Tight => PefModel::Tight,
                Model::Intuitive => PefModel::Intuitive,
            };
            let loss = match (lossless, lossy) {
                (true, _) => LossModel::Lossless,
                (_, true) => LossModel::Lossy,
                _ => LossModel::Unspecified,
            };
            let report = analyze_with(&net, AnalysisConfig { model, loss, iteration_cap: cap, burst_cap });
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let text = match format {
                Format::Csv => report.to_csv(),
                _ => serde_json::to_string_pretty(&report)? + "\n",
            };
            emit(&text, out.as_deref())?;
            Ok(status(report.any_deadline_violated() || report.any_unbounded()))
        }
        Command::Compare { input, lossless, format } => {
            let net = load_network(&input)?;
            let loss = if lossless { LossModel::Lossless } else { LossModel::Unspecified };
            let cmp = compare_models_with(&net, loss, cap, &burst_cap);
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&cmp.rows)?),
                _ => {
                    println!("flow,destination,tight_upper,intuitive_upper,gain");
                    for r in &cmp.rows {
                        let gain = match (&r.tight.upper, &r.intuitive.upper) {
                            (Bound::Finite(t), Bound::Finite(i)) => (i - t).to_string(),
                            _ => String::new(),
                        };
                        println!("{},{},{},{},{}", r.flow, r.destination, r.tight.upper, r.intuitive.upper, gain);
                    }
                    eprintln!("{} of {} rows strictly improved", cmp.strictly_improved().len(), cmp.rows.len());
                }
            }
            Ok(status(!cmp.tight_dominates()))
        }
        Command::Simulate { scenario, trace_out } => {
            let s = load_scenario(&scenario)?;
            let run = run_scenario(&s)?;
            for (point, obs) in &run.points {
                println!("{point}: {} units", obs.len());
            }
            let delivered = run.delays().iter().flatten().count();
            println!("delivered {delivered} of {} at {}", run.units.len(), run.final_point());
            if let (Some(lo), Some(hi)) = (run.min_delay(), run.max_delay()) {
                println!("delay range [{lo}, {hi}]");
            }
            if !run.zero_size_units.is_empty() {
                println!("zero-size units: {:?}", run.zero_size_units);
            }
            if let Some(path) = trace_out {
                fs::write(&path, run.trace().to_csv()).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { scenario, network, format } => {
            let s = load_scenario(&scenario)?;
            let run = run_scenario(&s)?;
            let report = match network {
                Some(path) => verify_against_network(&s, &run, &load_network(&path)?)?,
                None => verify(&s, &run),
            };
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
                _ => print_verification(&report),
            }
            Ok(status(!report.passed()))
        }
        Command::Bundle { out } => {
            write_bundle(&out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_verification(report: &VerifyReport) {
    let bound = match &report.bound {
        redcalc::regulators::VerdictKind::Bounded { interval } => format!("[{}, {}]", interval.lower, interval.upper),
        redcalc::regulators::VerdictKind::Unbounded { reason } => format!("unbounded ({})", reason.as_str()),
    };
    println!("bound ({}): {bound}", serde_json::to_value(report.source).expect("enum").as_str().unwrap_or(""));
    match (&report.measured_min, &report.measured_max) {
        (Some(lo), Some(hi)) => println!(
            "measured: [{lo}, {hi}] over {} delivered, {} lost, at {}",
            report.delivered, report.lost, report.final_point
        ),
        _ => println!("measured: nothing delivered at {}", report.final_point),
    }
    let attained = if report.attained { " (bound attained)" } else { "" };
    if report.sound {
        println!("sound: yes{attained}");
    } else {
        println!("sound: no, units outside the bound: {:?}", report.outside);
    }
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(d) = &report.divergence {
        if d.growing {
            println!(
                "divergence confirmed: regulator delay of {} grows from {} to {}",
                d.flow, d.early_max, d.late_max
            );
        } else {
            println!("no growth observed: regulator delay of {} stays at {}", d.flow, d.late_max);
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), InputError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn write_bundle(dir: &Path) -> Result<(), InputError> {
    let networks = dir.join("networks");
    let scenarios = dir.join("scenarios");
    fs::create_dir_all(&networks)?;
    fs::create_dir_all(&scenarios)?;
    let toys = [
        ("toy-pef", ToyVariant::Pef),
        ("toy-pef-pof", ToyVariant::PefPof),
        ("toy-pef-pfr", ToyVariant::PefPfr),
        ("toy-pef-pof-pfr", ToyVariant::PefPofPfr),
        ("toy-pef-ir13", ToyVariant::PefIr { flows: 13 }),
        ("toy-pef-pof-ir3", ToyVariant::PefPofIr { flows: 3 }),
    ];
    for (name, variant) in toys {
        write_json(&networks.join(format!("{name}.json")), &toy_network(variant))?;
    }
    write_json(&networks.join("volvo.json"), &volvo_network())?;
    // Which network each scenario can be verified against.
    let mut pairs = serde_json::Map::new();
    for b in bundled() {
        write_json(&scenarios.join(format!("{}.json", b.name)), &b.scenario)?;
        if let Some((net, _)) = &b.network {
            pairs.insert(format!("scenarios/{}.json", b.name), format!("networks/{net}.json").into());
        }
    }
    write_json(&dir.join("pairs.json"), &pairs)
}
