//! `gfml` command line: validate/inspect FML controllers, run inference,
//! train with the GA, evaluate splits, export win-rate curves, fabricate
//! synthetic datasets, and drive tic-tac-toe rollouts.
//!
//! Exit codes: 0 success, 1 domain error (bad documents, failed runs),
//! 2 usage or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use gfml::dataset::{
    make_view, parse_records_csv, split_by_game, Dataset, Side, DEFAULT_SPLIT_BOUNDARY,
};
use gfml::fml::{parse_fml, serialize_fml, FmlDocument};
use gfml::ga::{evolve, fitness, EvolutionConfig};
use gfml::inference::{infer, InputVector, DEFAULT_SAMPLE_COUNT};
use gfml::model::{
    build_master_controller, validate_controller, DefaultConsequentMap, FuzzyController,
    TableConsequentMap,
};
use gfml::rollout::{rollout, trace_to_json_lines, ChoicePolicy, DEFAULT_SUGGESTION_COUNT};
use gfml::synthetic::{generate_synthetic, SyntheticConfig};
use gfml::ttt::{board_to_string, empty_board, parse_board, TicTacToeProvider};

#[derive(Parser)]
#[command(name = "gfml", version, about = "Genetic-fuzzy toolkit for Go win-rate prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an FML file and check every structural invariant.
    Validate {
        /// Path to the .fml controller.
        fml: PathBuf,
    },
    /// Run one Mamdani inference and print the crisp output.
    Infer {
        fml: PathBuf,
        #[arg(long)]
        dbsn: f64,
        #[arg(long)]
        dwsn: f64,
        #[arg(long)]
        dbwr: f64,
        #[arg(long)]
        dwwr: f64,
        #[arg(long)]
        dbtmr: f64,
        #[arg(long)]
        dwtmr: f64,
        /// Output-grid sample count for defuzzification.
        #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
        samples: usize,
    },
    /// Tune a template controller against a dataset with the GA.
    Train(TrainArgs),
    /// Print train/test/overall MSE of a controller over a dataset.
    Evaluate {
        #[arg(long)]
        fml: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        side: Side,
        #[arg(long, default_value_t = DEFAULT_SPLIT_BOUNDARY)]
        boundary: u32,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
        samples: usize,
        /// Emit CSV (`split,records,mse`) instead of the table.
        #[arg(long)]
        csv: bool,
    },
    /// Export one game's per-move prediction/desired/darkforest curves as CSV.
    Curves {
        #[arg(long)]
        fml: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        game: u32,
        #[arg(long)]
        side: Side,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
        samples: usize,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fabricate a labeled dataset from a controller.
    GenSynthetic {
        /// Controller used to label the sampled inputs.
        #[arg(long)]
        fml: PathBuf,
        #[arg(long, default_value_t = 60)]
        games: u32,
        #[arg(long, default_value_t = 10)]
        moves: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gaussian label noise sigma (0 disables).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Roll out tic-tac-toe futures with the minimax provider.
    RolloutTtt {
        #[arg(long)]
        depth: usize,
        /// Nine characters of X, O, or `.`; empty board when omitted.
        #[arg(long)]
        start: Option<String>,
        /// `top1` or a comma-separated index sequence like `1,0,2`.
        #[arg(long, default_value = "top1")]
        choice: String,
        #[arg(long, default_value_t = DEFAULT_SUGGESTION_COUNT)]
        k: usize,
        /// JSON-lines output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the shipped master controller (default rule map) as FML.
    GenMaster {
        /// Optional consequent-table CSV overriding the default rule map.
        #[arg(long)]
        consequents: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    side: Side,
    /// Template .fml whose trapezoid parameters are tuned.
    #[arg(long)]
    template: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = EvolutionConfig::default().generations)]
    generations: u32,
    #[arg(long, default_value_t = EvolutionConfig::default().population_size)]
    population: usize,
    #[arg(long, default_value_t = EvolutionConfig::default().crossover_rate)]
    crossover_rate: f64,
    #[arg(long, default_value_t = EvolutionConfig::default().mutation_rate)]
    mutation_rate: f64,
    #[arg(long, default_value_t = EvolutionConfig::default().mutation_sigma)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SPLIT_BOUNDARY)]
    boundary: u32,
    /// Also evolve the rule consequent terms.
    #[arg(long)]
    tune_consequents: bool,
    #[arg(long)]
    out_fml: PathBuf,
    #[arg(long)]
    out_history: PathBuf,
    #[arg(long)]
    out_manifest: PathBuf,
}

/// Error carrying the process exit code: 1 domain, 2 usage/IO.
struct CmdError {
    code: u8,
    message: String,
}

impl CmdError {
    fn domain(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CmdError> {
    std::fs::read_to_string(path)
        .map_err(|e| CmdError::io(format!("cannot read `{}`: {e}", path.display())))
}

/// Write-temp-then-rename so partial output never lands at the target path.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CmdError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, contents)
        .and_then(|()| std::fs::rename(&tmp, path))
        .map_err(|e| CmdError::io(format!("cannot write `{}`: {e}", path.display())))
}

fn load_controller(path: &Path) -> Result<FuzzyController, CmdError> {
    let text = read_file(path)?;
    let doc = FmlDocument::new(text, path.display().to_string());
    parse_fml(&doc).map_err(|diags| {
        let mut message = String::new();
        for d in diags {
            message.push_str(&format!("{}:{d}\n", path.display()));
        }
        CmdError::domain(message.trim_end().to_string())
    })
}

fn load_dataset(path: &Path) -> Result<Dataset, CmdError> {
    let parsed = parse_records_csv(path).map_err(|e| match e {
        gfml::dataset::DatasetError::Io { .. } => CmdError::io(e.to_string()),
        gfml::dataset::DatasetError::Rows { errors } => {
            let mut message = format!("`{}` has invalid rows:\n", path.display());
            for row in errors {
                message.push_str(&format!("  {row}\n"));
            }
            CmdError::domain(message.trim_end().to_string())
        }
        other => CmdError::domain(other.to_string()),
    })?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed.dataset)
}

fn sha256_hex(path: &Path) -> Result<String, CmdError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CmdError::io(format!("cannot read `{}`: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// GFML_THREADS caps internal parallelism. Evaluation currently runs on one
/// worker, so any positive value is accepted and honored trivially.
fn check_thread_cap() -> Result<(), CmdError> {
    match std::env::var("GFML_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => match raw.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(()),
            _ => Err(CmdError::io(format!(
                "GFML_THREADS=`{raw}` is not a positive integer"
            ))),
        },
    }
}

fn cmd_validate(fml: &Path) -> Result<(), CmdError> {
    let fc = load_controller(fml)?;
    let violations = validate_controller(&fc);
    if violations.is_empty() {
        println!(
            "{}: OK ({} variables, {} rules)",
            fml.display(),
            fc.knowledge_base.len(),
            fc.rule_base.len()
        );
        Ok(())
    } else {
        // parse_fml already rejects invalid controllers; belt and braces.
        let mut message = String::new();
        for v in violations {
            message.push_str(&format!("{}: {v}\n", fml.display()));
        }
        Err(CmdError::domain(message.trim_end().to_string()))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_infer(
    fml: &Path,
    values: [f64; 6],
    samples: usize,
) -> Result<(), CmdError> {
    let fc = load_controller(fml)?;
    let input: InputVector = gfml::dataset::INPUT_NAMES
        .iter()
        .copied()
        .zip(values)
        .collect();
    let result = infer(&fc, &input, samples).map_err(|e| CmdError::domain(e.to_string()))?;
    for name in &result.clamped {
        eprintln!("warning: input `{name}` was outside its domain and has been clamped");
    }
    if result.no_rule_fired {
        eprintln!("warning: no rule fired; output is the domain midpoint");
    }
    println!("output: {}", result.output);
    println!("fired_rules: {}", result.fired_rule_count);
    Ok(())
}

#[derive(serde::Serialize)]
struct RunManifest {
    command: String,
    arguments: Vec<String>,
    config: EvolutionConfig,
    seed: u64,
    side: Side,
    split_boundary: u32,
    inputs: Vec<FileDigest>,
    outputs: Vec<String>,
    tool_version: String,
    duration_seconds: f64,
    final_train_mse: f64,
}

#[derive(serde::Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

fn cmd_train(args: &TrainArgs) -> Result<(), CmdError> {
    let started = Instant::now();
    let template = load_controller(&args.template)?;
    let dataset = load_dataset(&args.data)?;
    let (train, _test) = split_by_game(&dataset, args.boundary);
    if train.is_empty() {
        return Err(CmdError::domain(format!(
            "no training records in games 1..={}",
            args.boundary
        )));
    }
    let view = make_view(&train, args.side);
    let cfg = EvolutionConfig {
        crossover_rate: args.crossover_rate,
        mutation_rate: args.mutation_rate,
        generations: args.generations,
        population_size: args.population,
        mutation_sigma: args.sigma,
        seed: args.seed,
        tune_rule_consequents: args.tune_consequents,
        sample_count: args.samples,
        ..EvolutionConfig::default()
    };
    let report = evolve(&template, &view, &cfg).map_err(|e| CmdError::domain(e.to_string()))?;

    let doc = serialize_fml(&report.best)
        .map_err(|v| CmdError::domain(format!("learned controller invalid: {}", v[0])))?;
    write_atomic(&args.out_fml, &doc.text)?;
    write_atomic(&args.out_history, &report.history_csv())?;

    let manifest = RunManifest {
        command: "train".to_string(),
        arguments: std::env::args().skip(1).collect(),
        config: cfg,
        seed: args.seed,
        side: args.side,
        split_boundary: args.boundary,
        inputs: vec![
            FileDigest {
                path: args.data.display().to_string(),
                sha256: sha256_hex(&args.data)?,
            },
            FileDigest {
                path: args.template.display().to_string(),
                sha256: sha256_hex(&args.template)?,
            },
        ],
        outputs: vec![
            args.out_fml.display().to_string(),
            args.out_history.display().to_string(),
        ],
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        duration_seconds: started.elapsed().as_secs_f64(),
        final_train_mse: report.final_train_mse,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CmdError::domain(e.to_string()))?;
    write_atomic(&args.out_manifest, &manifest_json)?;
    println!(
        "trained {} generations, final train MSE {}",
        args.generations, report.final_train_mse
    );
    Ok(())
}

fn cmd_evaluate(
    fml: &Path,
    data: &Path,
    side: Side,
    boundary: u32,
    samples: usize,
    csv: bool,
) -> Result<(), CmdError> {
    let fc = load_controller(fml)?;
    let dataset = load_dataset(data)?;
    let (train, test) = split_by_game(&dataset, boundary);
    let mse_of = |ds: &Dataset| -> Result<Option<f64>, CmdError> {
        if ds.is_empty() {
            return Ok(None);
        }
        fitness(&fc, &make_view(ds, side), samples)
            .map(Some)
            .map_err(|e| CmdError::domain(e.to_string()))
    };
    let rows = [
        ("train", train.len(), mse_of(&train)?),
        ("test", test.len(), mse_of(&test)?),
        ("overall", dataset.len(), mse_of(&dataset)?),
    ];
    if csv {
        println!("split,records,mse");
        for (name, n, mse) in rows {
            println!("{name},{n},{}", mse.map_or(String::from(""), |v| v.to_string()));
        }
    } else {
        println!("{:<8} {:>8} {:>14}", "split", "records", "mse");
        for (name, n, mse) in rows {
            println!(
                "{name:<8} {n:>8} {:>14}",
                mse.map_or(String::from("-"), |v| format!("{v:.6}"))
            );
        }
    }
    Ok(())
}

fn cmd_curves(
    fml: &Path,
    data: &Path,
    game: u32,
    side: Side,
    samples: usize,
    out: Option<&Path>,
) -> Result<(), CmdError> {
    let fc = load_controller(fml)?;
    let dataset = load_dataset(data)?;
    let records = dataset.game(game);
    if records.is_empty() {
        return Err(CmdError::domain(format!("game {game} is not in `{}`", data.display())));
    }
    let mut text = String::from("move_no,predicted,desired,darkforest\n");
    for r in records {
        let result = infer(&fc, &r.input_vector(), samples)
            .map_err(|e| CmdError::domain(e.to_string()))?;
        let (desired, darkforest) = match side {
            Side::Black => (r.ebwr, r.dbwr),
            Side::White => (r.ewwr, r.dwwr),
        };
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.move_no, result.output, desired, darkforest
        ));
    }
    match out {
        Some(path) => write_atomic(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen_synthetic(
    fml: &Path,
    games: u32,
    moves: u32,
    seed: u64,
    noise: f64,
    samples: usize,
    out: &Path,
) -> Result<(), CmdError> {
    let fc = load_controller(fml)?;
    let ds = generate_synthetic(
        &fc,
        &SyntheticConfig {
            games,
            moves_per_game: moves,
            noise_sigma: noise,
            seed,
            sample_count: samples,
        },
    )
    .map_err(|e| CmdError::domain(e.to_string()))?;
    write_atomic(out, &gfml::dataset::write_records_csv(&ds))?;
    println!("wrote {} records ({games} games) to {}", ds.len(), out.display());
    Ok(())
}

fn cmd_rollout_ttt(
    depth: usize,
    start: Option<&str>,
    choice: &str,
    k: usize,
    out: Option<&Path>,
) -> Result<(), CmdError> {
    let board = match start {
        Some(s) => parse_board(s).map_err(|e| CmdError::domain(e.to_string()))?,
        None => empty_board(),
    };
    let policy = if choice == "top1" {
        ChoicePolicy::Top1
    } else {
        let indices = choice
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<usize>, _>>()
            .map_err(|_| CmdError::io(format!("bad --choice `{choice}` (top1 or e.g. 1,0,2)")))?;
        ChoicePolicy::Indices(indices)
    };
    let provider = TicTacToeProvider::default();
    let trace =
        rollout(&provider, board, depth, &policy, k).map_err(|e| CmdError::domain(e.to_string()))?;
    let jsonl = trace_to_json_lines(&provider, &trace);
    match out {
        Some(path) => write_atomic(path, &jsonl)?,
        None => print!("{jsonl}"),
    }
    eprintln!(
        "steps: {}, termination: {:?}, outcome: {:?}, final: {}",
        trace.steps.len(),
        trace.termination,
        trace.final_outcome,
        board_to_string(
            &trace
                .steps
                .last()
                .map(|s| provider_apply(&provider, s))
                .unwrap_or(trace.start)
        )
    );
    Ok(())
}

fn provider_apply(
    provider: &TicTacToeProvider,
    step: &gfml::rollout::RolloutStep<gfml::ttt::Board, usize>,
) -> gfml::ttt::Board {
    use gfml::rollout::SuggestionProvider;
    provider.apply(&step.state_before, &step.chosen.mv)
}

fn parse_consequent_table(path: &Path) -> Result<TableConsequentMap, CmdError> {
    let text = read_file(path)?;
    let mut map = TableConsequentMap::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if i == 0 && line == "dbsn,dwsn,dbwr,dwwr,dbtmr,dwtmr,ewr" {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if cells.len() != 7 {
            return Err(CmdError::domain(format!(
                "{}:{}: expected 7 columns, found {}",
                path.display(),
                i + 1,
                cells.len()
            )));
        }
        let consequent = cells[6].clone();
        map.entries.insert(cells[..6].to_vec(), consequent);
    }
    Ok(map)
}

fn cmd_gen_master(consequents: Option<&Path>, out: &Path) -> Result<(), CmdError> {
    let fc = match consequents {
        None => build_master_controller(&DefaultConsequentMap),
        Some(path) => {
            let table = parse_consequent_table(path)?;
            let kb = gfml::model::build_master_knowledge_base();
            let rules = gfml::model::build_full_grid_rule_base(&kb, &table)
                .map_err(|e| CmdError::domain(e.to_string()))?;
            FuzzyController {
                name: String::new(),
                ip: "localhost".to_string(),
                knowledge_base: kb,
                settings: Default::default(),
                rule_base: rules,
            }
        }
    };
    let doc = serialize_fml(&fc).map_err(|v| CmdError::domain(v[0].to_string()))?;
    write_atomic(out, &doc.text)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CmdError> {
    check_thread_cap()?;
    match &cli.command {
        Command::Validate { fml } => cmd_validate(fml),
        Command::Infer {
            fml,
            dbsn,
            dwsn,
            dbwr,
            dwwr,
            dbtmr,
            dwtmr,
            samples,
        } => cmd_infer(fml, [*dbsn, *dwsn, *dbwr, *dwwr, *dbtmr, *dwtmr], *samples),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate {
            fml,
            data,
            side,
            boundary,
            samples,
            csv,
        } => cmd_evaluate(fml, data, *side, *boundary, *samples, *csv),
        Command::Curves {
            fml,
            data,
            game,
            side,
            samples,
            out,
        } => cmd_curves(fml, data, *game, *side, *samples, out.as_deref()),
        Command::GenSynthetic {
            fml,
            games,
            moves,
            seed,
            noise,
            samples,
            out,
        } => cmd_gen_synthetic(fml, *games, *moves, *seed, *noise, *samples, out),
        Command::RolloutTtt {
            depth,
            start,
            choice,
            k,
            out,
        } => cmd_rollout_ttt(*depth, start.as_deref(), choice, *k, out.as_deref()),
        Command::GenMaster { consequents, out } => cmd_gen_master(consequents.as_deref(), out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
