use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spoofsim::report::ExperimentReport;
use spoofsim::samples::SampleFile;
use spoofsim::{run_experiment, verdict, Experiment, ExperimentConfig, HarnessError};
use spoofsim_core::rng::seeded;
use spoofsim_core::xperm::{generate_instance, spoof_learn, DistinguisherSpec, DistinguisherView, LearnedModel};

#[derive(Parser)]
#[command(name = "spoofsim", version, about = "Desk-scale spoofing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled sample file for a weak-perm instance.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Number of samples; defaults to the config's sample count.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Run the spoofing learner on a sample file and write the model artifact.
    Learn {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: PathBuf,
    },
    /// Run one distinguisher against samples and a model.
    Distinguish {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "coin-flip")]
        distinguisher: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the experiment described by a config.
    Run(Common),
    TestOracle(Common),
    LearnPermanent(Common),
    Diagonalize {
        #[command(flatten)]
        common: Common,
        /// Also write the table artifact here.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    StrongSim(Common),
    /// Print a report's aggregates, optionally with verdicts or CSV.
    Report {
        input: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        verdict: bool,
    },
}

fn resolve(common: &Common, kind: Option<&str>) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match (&common.config, kind) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(kind)) => {
            let seed = common
                .seed
                .ok_or_else(|| HarnessError::Config("a seed is required (--seed or a config file)".into()))?;
            ExperimentConfig::new(seed, 100, Experiment::default_for(kind).expect("known kind"))
        }
        (None, None) => return Err(HarnessError::Config("--config is required".into())),
    };
    if let Some(kind) = kind {
        if config.experiment.kind() != kind {
            return Err(HarnessError::Config(format!(
                "this subcommand runs {kind} experiments, the config describes {}",
                config.experiment.kind()
            )));
        }
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    if let Some(jobs) = common.jobs {
        config.jobs = jobs;
    }
    if let Some(out) = &common.out {
        config.output = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), HarnessError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(common: &Common, kind: Option<&str>) -> Result<ExitCode, HarnessError> {
    let config = resolve(common, kind)?;
    let report = run_experiment(&config)?;
    write_or_print(config.output.as_deref(), &report.to_json())?;
    for f in &report.failures {
        eprintln!("trial {} failed: {}", f.trial, f.message);
    }
    Ok(if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn weak_params(common: &Common) -> Result<(u64, spoofsim::config::WeakPermParams), HarnessError> {
    let config = resolve(common, Some("weak-perm"))?;
    match config.experiment {
        Experiment::WeakPerm(p) => Ok((config.seed, p)),
        _ => unreachable!("kind checked"),
    }
}

fn dispatch(command: Command) -> Result<ExitCode, HarnessError> {
    match command {
        Command::Gen { common, count } => {
            let (seed, params) = weak_params(&common)?;
            let mut rng = seeded(seed);
            let inst = generate_instance(&params.generation()?, &mut rng)?;
            let samples = inst.samples(count.unwrap_or(params.sample_count()), &mut rng);
            let file = SampleFile::new(seed, &samples);
            write_or_print(common.out.as_deref(), &serde_json::to_string(&file)?)?;
        }
        Command::Learn { common, samples } => {
            let (seed, params) = weak_params(&common)?;
            let training = SampleFile::load(&samples)?.decode()?;
            let out = spoof_learn(&training, &params.generation()?, params.max_retries, &mut seeded(seed))?;
            let path = common
                .out
                .ok_or_else(|| HarnessError::Config("learn needs --out for the model artifact".into()))?;
            std::fs::write(&path, out.model.to_bytes())?;
            println!(
                "{}",
                serde_json::json!({
                    "v": out.v,
                    "blocks_recovered": out.blocks_recovered,
                    "label_fallbacks": out.label_fallbacks,
                    "attempts": out.attempts,
                })
            );
        }
        Command::Distinguish {
            samples,
            model,
            distinguisher,
            seed,
        } => {
            let training = SampleFile::load(&samples)?.decode()?;
            let model = LearnedModel::from_bytes(&std::fs::read(&model)?)?;
            let spec: DistinguisherSpec = distinguisher.parse()?;
            let view = DistinguisherView {
                samples: &training,
                model: &model,
                side_channel: None,
            };
            let (outcome, calls) = spec.build().run(&view, spec.budget(), &mut seeded(seed))?;
            println!(
                "{}",
                serde_json::json!({ "distinguisher": spec.to_string(), "outcome": spoofsim::experiments::weak::outcome_name(&outcome), "calls": calls })
            );
        }
        Command::Run(common) => return run(&common, None),
        Command::TestOracle(common) => return run(&common, Some("oracle-test")),
        Command::LearnPermanent(common) => return run(&common, Some("perm-learn")),
        Command::StrongSim(common) => return run(&common, Some("strong-sim")),
        Command::Diagonalize { common, table } => {
            if let Some(path) = table {
                let config = resolve(&common, Some("diagonalize"))?;
                if let Experiment::Diagonalize(p) = &config.experiment {
                    std::fs::write(path, spoofsim::experiments::diagonal::build_table(p)?.to_bytes())?;
                }
            }
            return run(&common, Some("diagonalize"));
        }
        Command::Report { input, csv, verdict: show } => {
            let report = ExperimentReport::from_json(&std::fs::read_to_string(&input)?)?;
            println!("{}", serde_json::to_string_pretty(&report.aggregates)?);
            if let Some(path) = csv {
                report.write_csv(std::fs::File::create(path)?)?;
            }
            if show {
                let v = verdict(&report)?;
                for c in &v.conditions {
                    println!("{:<24} {:.4}  {}", c.name, c.value, if c.passed { "pass" } else { "FAIL" });
                }
                for d in &v.distinguishers {
                    println!(
                        "{:<28} accuracy {:.4} [{:.4}, {:.4}]  {}",
                        d.name,
                        d.accuracy,
                        d.ci_low,
                        d.ci_high,
                        if d.defeated { "defeated" } else { "not defeated" }
                    );
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
