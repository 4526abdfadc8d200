use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use tourbot::llm::{MockLlm, PromptLibrary};
use tourbot::nlu::dataset::{
    holdout_split, parse_sentiment, parse_yesno, sentiment_mae, train_sentiment, train_yesno, yesno_accuracy,
};
use tourbot::nlu::{FfnModel, HashingEmbedder, Lexicon, TrainParams, YesNoClassifier, DEFAULT_EMBEDDING_DIM, DEFAULT_HIDDEN};
use tourbot::scenario::{parse_scenario, validate};
use tourbot::service::{serve, ServiceConfig};
use tourbot::simulator::{compute_metrics, persona_responder, HttpTarget, InProcessTarget, Persona, UserSimulator};

#[derive(Parser)]
#[command(name = "tourbot", version, about = "Tourist-information dialogue engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Yesno,
    Sentiment,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file; exits 2 when the validator reports findings.
    ValidateScenario { path: PathBuf },
    /// Train a yes/no or sentiment model on a TSV dataset.
    TrainNlu {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = DEFAULT_HIDDEN)]
        hidden: usize,
        #[arg(long, default_value_t = DEFAULT_EMBEDDING_DIM)]
        dim: usize,
        /// Fraction of the data held out for the reported score.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
    },
    /// Score a model (or, for yes/no, the lexicon) on a TSV dataset.
    EvalNlu {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, required_unless_present = "lexicon")]
        model: Option<PathBuf>,
        #[arg(long, conflicts_with = "model")]
        lexicon: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run persona simulations and write one JSONL log per run plus metrics.json.
    Simulate {
        #[arg(long)]
        personas: PathBuf,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Base URL of a running service.
        #[arg(long, conflicts_with = "in_process", required_unless_present = "in_process")]
        endpoint: Option<String>,
        #[arg(long)]
        in_process: bool,
        /// Service config; supplies the catalog and prompts (and the engine in-process).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = tourbot::simulator::DEFAULT_TURN_CAP)]
        turn_cap: usize,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn validate_scenario(path: &Path) -> Result<ExitCode> {
    let scenario = parse_scenario(&read(path)?)?;
    let report = validate(&scenario);
    for finding in &report.findings {
        println!("{finding}");
    }
    if report.is_empty() {
        println!("ok\t{} states", scenario.states.len());
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}

#[allow(clippy::too_many_arguments)]
fn train_nlu(task: Task, data: &Path, out: &Path, params: TrainParams, hidden: usize, dim: usize, holdout: f64) -> Result<()> {
    let embedder = HashingEmbedder::new(dim);
    let text = read(data)?;
    let start = std::time::Instant::now();
    let (model, report) = match task {
        Task::Yesno => {
            let (train, test) = holdout_split(&parse_yesno(&text)?, holdout, params.seed);
            let (model, _) = train_yesno(&train, &embedder, hidden, &params)?;
            let classifier = YesNoClassifier::neural(model.clone(), Arc::new(embedder))?;
            (model, format!("held-out accuracy {:.3} on {} examples", yesno_accuracy(&classifier, &test), test.len()))
        }
        Task::Sentiment => {
            let (train, test) = holdout_split(&parse_sentiment(&text)?, holdout, params.seed);
            let (model, _) = train_sentiment(&train, &embedder, hidden, &params)?;
            let mae = sentiment_mae(&model, &embedder, &test)?;
            (model, format!("held-out MAE {mae:.3} on {} examples", test.len()))
        }
    };
    std::fs::write(out, model.to_text()).with_context(|| format!("writing {}", out.display()))?;
    println!("{report}; trained in {:.1}s; wrote {}", start.elapsed().as_secs_f64(), out.display());
    Ok(())
}

fn eval_nlu(task: Task, data: &Path, model: Option<&Path>, lexicon: Option<&Path>) -> Result<()> {
    let text = read(data)?;
    let load_model = |path: &Path| -> Result<FfnModel> { Ok(FfnModel::from_text(&read(path)?)?) };
    match task {
        Task::Yesno => {
            let classifier = match (model, lexicon) {
                (_, Some(path)) => YesNoClassifier::pattern(Lexicon::parse(&read(path)?)?),
                (Some(path), None) => {
                    let model = load_model(path)?;
                    let dim = model.input_dim();
                    YesNoClassifier::neural(model, Arc::new(HashingEmbedder::new(dim)))?
                }
                (None, None) => bail!("pass --model or --lexicon"),
            };
            let examples = parse_yesno(&text)?;
            println!("accuracy {:.3} on {} examples", yesno_accuracy(&classifier, &examples), examples.len());
        }
        Task::Sentiment => {
            let model = load_model(model.context("--model is required for sentiment")?)?;
            let embedder = HashingEmbedder::new(model.input_dim());
            let examples = parse_sentiment(&text)?;
            println!("MAE {:.3} on {} examples", sentiment_mae(&model, &embedder, &examples)?, examples.len());
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    personas: &Path,
    runs: usize,
    seed: u64,
    endpoint: Option<&str>,
    config: &Path,
    out: &Path,
    turn_cap: usize,
) -> Result<()> {
    let config = ServiceConfig::load(config)?;
    let personas = Persona::load_dir(personas)?;
    if personas.is_empty() {
        bail!("no persona files found");
    }
    let engine = match endpoint {
        None => Some(config.build_engine()?),
        Some(_) => None,
    };
    let spot_names = match &engine {
        Some(engine) => engine.catalog().spots().iter().map(|s| s.name.clone()).collect(),
        None => {
            let genres = tourbot::spotdb::GenreMap::parse(&read(&config.genre_map)?)?;
            let catalog = tourbot::spotdb::SpotCatalog::load(&read(&config.catalog)?, &genres)?;
            catalog.spots().iter().map(|s| s.name.clone()).collect()
        }
    };
    let user_llm = Arc::new(MockLlm::new(seed).with_responder(persona_responder(spot_names)));
    let mut simulator = UserSimulator::new(user_llm, Arc::new(PromptLibrary::load_dir(&config.prompts)?));
    simulator.turn_cap = turn_cap;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut logs = Vec::new();
    for persona in &personas {
        for run in 0..runs {
            let run_seed = seed.wrapping_add(run as u64);
            let log = match (&engine, endpoint) {
                (Some(engine), _) => simulator.run(persona, &mut InProcessTarget::new(engine), run_seed)?,
                (None, Some(url)) => simulator.run(persona, &mut HttpTarget::new(url, Duration::from_secs(30)), run_seed)?,
                (None, None) => unreachable!("either an engine or an endpoint"),
            };
            let path = out.join(format!("{}_{run:03}.jsonl", persona.id));
            std::fs::write(&path, log.to_jsonl()).with_context(|| format!("writing {}", path.display()))?;
            println!(
                "{}\trun {run}\t{} turns\t{}",
                persona.id,
                log.turns.len(),
                if log.completed { "completed" } else { "incomplete" }
            );
            logs.push(log);
        }
    }
    let metrics = compute_metrics(&logs)?;
    let path = out.join("metrics.json");
    std::fs::write(&path, serde_json::to_string_pretty(&metrics)? + "\n")?;
    println!("{}", serde_json::to_string(&metrics)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::ValidateScenario { path } => return validate_scenario(&path),
        Command::TrainNlu {
            task,
            data,
            out,
            seed,
            epochs,
            lr,
            hidden,
            dim,
            holdout,
        } => {
            let params = TrainParams {
                lr,
                epochs,
                seed,
                ..TrainParams::default()
            };
            train_nlu(task, &data, &out, params, hidden, dim, holdout)?
        }
        Command::EvalNlu {
            task,
            data,
            model,
            lexicon,
        } => eval_nlu(task, &data, model.as_deref(), lexicon.as_deref())?,
        Command::Serve { config } => {
            let config = ServiceConfig::load(&config)?;
            tokio::runtime::Runtime::new()?.block_on(serve(config))?;
        }
        Command::Simulate {
            personas,
            runs,
            seed,
            endpoint,
            in_process: _,
            config,
            out,
            turn_cap,
        } => simulate(&personas, runs, seed, endpoint.as_deref(), &config, &out, turn_cap)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
