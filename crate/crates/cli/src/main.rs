//! `unscramble`: train last-move predictors on random scrambles, solve
//! states by beam search, build exact oracles, and fit scaling laws.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

mod files;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use unscramble_core::blob::write_text_atomic;
use unscramble_core::nn::{
    count_compute, load_checkpoint, save_checkpoint, train, validation_loss, LrSchedule,
    ModelConfig, OutputHead, TrainOptions,
};
use unscramble_core::oracle::{bfs_enumerate, DistanceTable, LightsOutOracle, OptimalLen};
use unscramble_core::scaling;
use unscramble_core::scramble::{dump_batch, generate_batch, sample_scramble, LabelMode, ScrambleConfig};
use unscramble_core::solver::{default_max_depth, solve_suite, SuiteCase};
use unscramble_core::{Family, Metric, Puzzle, PuzzleSpec};

#[derive(Parser)]
#[command(name = "unscramble", version, about)]
struct Cli {
    /// Worker threads (also via UNSCRAMBLE_THREADS; default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PuzzleArgs {
    /// Puzzle family: cube3, cube2, sliding-N, lightsout-N.
    #[arg(long)]
    puzzle: String,
    /// Cube move metric: qtm or htm.
    #[arg(long, default_value = "qtm")]
    metric: String,
}

impl PuzzleArgs {
    fn build(&self) -> Result<Puzzle> {
        let family: Family = self.puzzle.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        let metric: Metric = self.metric.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(Puzzle::new(PuzzleSpec::new(family, metric)))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a scramble-move predictor and write a checkpoint.
    Train(TrainCmd),
    /// Solve a case file with beam search over a trained model.
    Solve(SolveCmd),
    /// Build an exact distance table by exhaustive BFS.
    Oracle(OracleCmd),
    /// Fit the scaling law to (N, D, L) observations.
    FitScaling(FitScalingCmd),
    /// Generate scramble batches and dump them as text.
    Gen(GenCmd),
    /// Sample random scrambled states into a case file.
    SampleCases(SampleCasesCmd),
    /// Convert a JSON state export into a case file.
    ConvertCases(ConvertCasesCmd),
    /// Report validation loss of a checkpoint as an (N, D, L) observation.
    ValLoss(ValLossCmd),
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    puzzle: PuzzleArgs,
    /// Moves per scramble (default: the puzzle's God's-Number hint).
    #[arg(long)]
    scramble_len: Option<usize>,
    /// Scrambles per batch (batch size = scrambles x scramble length).
    #[arg(long, default_value_t = 100)]
    batch_scrambles: usize,
    /// last-move (categorical) or move-multiset (Lights Out).
    #[arg(long, default_value = "last-move")]
    label_mode: String,
    /// Body shape: uniform or paper.
    #[arg(long, default_value = "uniform")]
    shape: String,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Disable batch normalization.
    #[arg(long)]
    no_batch_norm: bool,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// constant or cosine.
    #[arg(long, default_value = "constant")]
    lr_schedule: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    log_every: u64,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional loss-curve CSV output.
    #[arg(long)]
    loss_out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveCmd {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    cases: PathBuf,
    /// Comma-separated beam widths, e.g. 1,2,4,...,262144.
    #[arg(long, default_value = "1")]
    widths: String,
    /// Search horizon (default: twice the God's-Number hint).
    #[arg(long)]
    max_depth: Option<usize>,
    /// Distance table for optimality reporting.
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// Use the exact GF(2) oracle for optimality (Lights Out only).
    #[arg(long)]
    lights_oracle: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleCmd {
    #[command(flatten)]
    puzzle: PuzzleArgs,
    /// Abort if the reachable set exceeds this many states.
    #[arg(long, default_value_t = 10_000_000)]
    max_states: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitScalingCmd {
    /// Observation rows: N,D,L[,tag] per line.
    #[arg(long)]
    observations: PathBuf,
    /// Fit parameters as JSON.
    #[arg(long)]
    out: PathBuf,
    /// Optional compute-optimal frontier CSV.
    #[arg(long)]
    frontier_out: Option<PathBuf>,
    /// Comma-separated budgets for the frontier (default: a log-spaced
    /// sweep from the smallest observed compute to 100x the largest).
    #[arg(long)]
    budgets: Option<String>,
}

#[derive(Args)]
struct GenCmd {
    #[command(flatten)]
    puzzle: PuzzleArgs,
    #[arg(long)]
    scramble_len: Option<usize>,
    #[arg(long, default_value_t = 10)]
    batch_scrambles: usize,
    #[arg(long, default_value = "last-move")]
    label_mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write rows to stdout instead of a file.
    #[arg(long)]
    dump: bool,
    #[arg(long, required_unless_present = "dump")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleCasesCmd {
    #[command(flatten)]
    puzzle: PuzzleArgs,
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Scramble length per sampled state (default: God's-Number hint).
    #[arg(long)]
    scramble_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertCasesCmd {
    #[command(flatten)]
    puzzle: PuzzleArgs,
    /// JSON export: an array of {"id": ..., "state": [ints]} objects
    /// (bare arrays of ints are accepted too).
    #[arg(long)]
    json: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValLossCmd {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Held-out batches to average over.
    #[arg(long, default_value_t = 100)]
    batches: usize,
    /// Seed of the held-out stream (keep it distinct from training seeds).
    #[arg(long, default_value_t = 0xeba1)]
    seed: u64,
    /// Append the observation row to this file.
    #[arg(long)]
    append: Option<PathBuf>,
    #[arg(long, default_value = "")]
    tag: String,
}

fn parse_label_mode(s: &str) -> Result<LabelMode> {
    match s {
        "last-move" => Ok(LabelMode::LastMove),
        "move-multiset" => Ok(LabelMode::MoveMultiset),
        _ => bail!("label mode is last-move or move-multiset"),
    }
}

fn scramble_len_or_hint(puzzle: &Puzzle, flag: Option<usize>) -> Result<usize> {
    match flag {
        Some(n) => Ok(n),
        None => puzzle
            .spec()
            .gods_number_hint()
            .map(|g| g as usize)
            .context("this puzzle has no God's-Number hint; pass --scramble-len"),
    }
}

fn cmd_train(cmd: TrainCmd) -> Result<()> {
    let puzzle = cmd.puzzle.build()?;
    let scramble_len = scramble_len_or_hint(&puzzle, cmd.scramble_len)?;
    let label_mode = parse_label_mode(&cmd.label_mode)?;
    let head = match label_mode {
        LabelMode::LastMove => OutputHead::SoftmaxCategorical,
        LabelMode::MoveMultiset => OutputHead::SigmoidMultilabel,
    };
    let model = match cmd.shape.as_str() {
        "paper" => {
            let mut m = ModelConfig::paper_shape(puzzle.encoding_dim(), puzzle.move_count(), head);
            m.batch_norm = !cmd.no_batch_norm;
            m
        }
        "uniform" => {
            let mut m = ModelConfig::uniform(
                puzzle.encoding_dim(),
                cmd.width,
                cmd.depth,
                puzzle.move_count(),
                head,
            );
            m.batch_norm = !cmd.no_batch_norm;
            m
        }
        other => bail!("unknown shape `{other}` (uniform or paper)"),
    };
    let scramble = ScrambleConfig {
        scramble_length: scramble_len,
        batch_scrambles: cmd.batch_scrambles,
        label_mode,
        seed: cmd.seed,
    };
    let schedule = match cmd.lr_schedule.as_str() {
        "constant" => LrSchedule::Constant,
        "cosine" => LrSchedule::Cosine,
        other => bail!("unknown lr schedule `{other}`"),
    };
    let opts = TrainOptions { steps: cmd.steps, lr: cmd.lr, schedule, log_every: cmd.log_every };

    eprintln!(
        "training {} | {:?} params={} steps={} batch={}x{} lr={} seed={}",
        puzzle.spec(),
        model.body,
        unscramble_core::nn::count_params(&model),
        cmd.steps,
        cmd.batch_scrambles,
        scramble_len,
        cmd.lr,
        cmd.seed
    );
    let t0 = std::time::Instant::now();
    let (bundle, curve) = train::<f32>(&puzzle, &model, &scramble, &opts)?;
    eprintln!("trained in {:.1}s", t0.elapsed().as_secs_f64());

    save_checkpoint(&cmd.out, &bundle, *puzzle.spec(), &scramble)?;
    println!("checkpoint written to {}", cmd.out.display());

    if let Some(loss_out) = cmd.loss_out {
        let mut text = String::from("# step,loss,accuracy\n");
        for p in &curve {
            text.push_str(&format!("{},{},{}\n", p.step, p.loss, p.accuracy));
        }
        write_text_atomic(&loss_out, &text)?;
        println!("loss curve written to {}", loss_out.display());
    }
    if let Some(last) = curve.last() {
        println!("final loss {:.4} accuracy {:.4}", last.loss, last.accuracy);
    }
    Ok(())
}

fn cmd_solve(cmd: SolveCmd) -> Result<()> {
    let (bundle, meta) = load_checkpoint::<f32>(&cmd.checkpoint)
        .with_context(|| format!("loading checkpoint {}", cmd.checkpoint.display()))?;
    let puzzle = Puzzle::new(meta.puzzle);
    let (case_spec, cases) = files::read_cases(&cmd.cases)?;
    if case_spec != meta.puzzle {
        bail!(
            "case file is for {case_spec} but the checkpoint was trained on {}",
            meta.puzzle
        );
    }
    let widths = files::parse_widths(&cmd.widths)?;
    let max_depth = match cmd.max_depth {
        Some(d) => d,
        None => default_max_depth(&puzzle).context("no God's-Number hint; pass --max-depth")?,
    };

    let table;
    let oracle: Option<&dyn OptimalLen> = if let Some(path) = &cmd.oracle {
        table = DistanceTable::load(path)?;
        if table.spec() != puzzle.spec() {
            bail!("oracle table is for {}", table.spec());
        }
        Some(&table)
    } else if cmd.lights_oracle {
        Some(&LightsOutOracle)
    } else {
        None
    };

    let mut results = files::ResultsFile::new(&puzzle, &cmd.checkpoint.display().to_string());

    // Multilabel checkpoints solve greedily: one chosen node per depth.
    if meta.model.head == OutputHead::SigmoidMultilabel {
        let report = unscramble_core::solver::greedy_suite(&bundle, &puzzle, &cases, oracle)?;
        eprintln!(
            "greedy: solved {}/{} mean_length={} optimality={} nodes={:.2}",
            report.summary.solved,
            report.summary.cases,
            report.summary.mean_length.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            report.summary.optimality_pct.map(|v| format!("{v:.1}%")).unwrap_or_else(|| "-".into()),
            report.summary.mean_nodes,
        );
        results.push_width(report.rows, report.summary);
        results.write(&cmd.out, &puzzle)?;
        println!("results written to {}", cmd.out.display());
        return Ok(());
    }

    let done = files::ResultsFile::completed_widths(&cmd.out);
    for &width in &widths {
        if done.contains(&width) {
            eprintln!("width {width}: already complete, skipping");
            continue;
        }
        let t0 = std::time::Instant::now();
        let mut reports = solve_suite(&bundle, &puzzle, &cases, &[width], max_depth, oracle)?;
        let report = reports.pop().expect("one report per width");
        eprintln!(
            "width {width}: solved {}/{} mean_length={} optimality={} nodes={:.1} ({:.1}s)",
            report.summary.solved,
            report.summary.cases,
            report.summary.mean_length.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            report.summary.optimality_pct.map(|v| format!("{v:.1}%")).unwrap_or_else(|| "-".into()),
            report.summary.mean_nodes,
            t0.elapsed().as_secs_f64()
        );
        results.push_width(report.rows, report.summary);
        results.write(&cmd.out, &puzzle)?;
    }
    println!("results written to {}", cmd.out.display());
    Ok(())
}

fn cmd_oracle(cmd: OracleCmd) -> Result<()> {
    let puzzle = cmd.puzzle.build()?;
    let t0 = std::time::Instant::now();
    let table = bfs_enumerate(&puzzle, cmd.max_states)?;
    println!(
        "{}: {} states, max depth {} ({:.1}s)",
        puzzle.spec(),
        table.state_count(),
        table.max_depth(),
        t0.elapsed().as_secs_f64()
    );
    table.save(&cmd.out)?;
    println!("distance table written to {}", cmd.out.display());
    Ok(())
}

fn cmd_fit_scaling(cmd: FitScalingCmd) -> Result<()> {
    let text = std::fs::read_to_string(&cmd.observations)
        .with_context(|| format!("reading {}", cmd.observations.display()))?;
    let obs = scaling::parse_observations(&text).map_err(|e| anyhow::anyhow!("{e}"))?;
    let fit = scaling::fit(&obs).map_err(|e| anyhow::anyhow!("{e}"))?;
    println!(
        "fit: E={:.4} A={:.4} B={:.4} alpha={:.4} beta={:.4} mse={:.3e}",
        fit.e, fit.a, fit.b, fit.alpha, fit.beta, fit.fit_mse
    );
    let (n_exp, d_exp) = scaling::allocation_exponents(&fit);
    println!("allocation exponents: N ~ C^{n_exp:.3}, D ~ C^{d_exp:.3}");
    write_text_atomic(&cmd.out, &serde_json::to_string_pretty(&fit)?)?;
    println!("fit written to {}", cmd.out.display());

    if let Some(frontier_out) = cmd.frontier_out {
        let budgets = match cmd.budgets {
            Some(list) => files::parse_budgets(&list)?,
            None => {
                let min_c = obs.iter().map(|o| o.compute()).fold(f64::INFINITY, f64::min);
                let max_c = obs.iter().map(|o| o.compute()).fold(0.0f64, f64::max) * 100.0;
                let steps = 16;
                (0..steps)
                    .map(|i| min_c * (max_c / min_c).powf(i as f64 / (steps - 1) as f64))
                    .collect()
            }
        };
        write_text_atomic(&frontier_out, &scaling::format_frontier(&fit, &budgets))?;
        println!("frontier written to {}", frontier_out.display());
    }
    Ok(())
}

fn cmd_gen(cmd: GenCmd) -> Result<()> {
    let puzzle = cmd.puzzle.build()?;
    let scramble_len = scramble_len_or_hint(&puzzle, cmd.scramble_len)?;
    let config = ScrambleConfig {
        scramble_length: scramble_len,
        batch_scrambles: cmd.batch_scrambles,
        label_mode: parse_label_mode(&cmd.label_mode)?,
        seed: cmd.seed,
    };
    let batch = generate_batch::<f32>(&puzzle, &config).map_err(|e| anyhow::anyhow!("{e}"))?;
    let text = dump_batch(&puzzle, &config, &batch);
    match cmd.out {
        Some(path) => {
            write_text_atomic(&path, &text)?;
            println!("dumped {} examples to {}", config.examples_per_batch(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_sample_cases(cmd: SampleCasesCmd) -> Result<()> {
    let puzzle = cmd.puzzle.build()?;
    // Lights Out without an explicit length: uniform random press subsets
    // (a full-length no-repeat scramble would press every button).
    let subset_mode =
        matches!(puzzle.spec().family, Family::LightsOut(_)) && cmd.scramble_len.is_none();
    let scramble_len = if subset_mode { 0 } else { scramble_len_or_hint(&puzzle, cmd.scramble_len)? };
    let cases: Vec<SuiteCase> = (0..cmd.count)
        .map(|i| {
            let seed = unscramble_core::scramble::derive_seed(cmd.seed, i as u64);
            let state = if subset_mode {
                unscramble_core::scramble::sample_press_subset(&puzzle, seed)
            } else {
                let (_, states) = sample_scramble(&puzzle, scramble_len, seed);
                states.last().cloned().unwrap_or_else(|| puzzle.goal())
            };
            SuiteCase { id: format!("case-{i:04}"), state }
        })
        .collect();
    files::write_cases(&cmd.out, &puzzle, &cases)?;
    println!("wrote {} cases to {}", cases.len(), cmd.out.display());
    Ok(())
}

fn cmd_convert_cases(cmd: ConvertCasesCmd) -> Result<()> {
    let puzzle = cmd.puzzle.build()?;
    let text = std::fs::read_to_string(&cmd.json)
        .with_context(|| format!("reading {}", cmd.json.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let entries = value.as_array().context("top-level JSON must be an array")?;
    let mut cases = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let (id, cells_value) = match entry {
            serde_json::Value::Array(_) => (format!("case-{i:04}"), entry),
            serde_json::Value::Object(obj) => {
                let id = obj
                    .get("id")
                    .map(|v| v.to_string().trim_matches('"').to_string())
                    .unwrap_or_else(|| format!("case-{i:04}"));
                (id, obj.get("state").context("entry is missing `state`")?)
            }
            _ => bail!("entry {i} must be an array or object"),
        };
        let cells: Vec<u8> = cells_value
            .as_array()
            .context("state must be an array of integers")?
            .iter()
            .map(|v| {
                v.as_u64()
                    .and_then(|x| u8::try_from(x).ok())
                    .with_context(|| format!("entry {i}: bad cell {v}"))
            })
            .collect::<Result<_>>()?;
        let state = puzzle
            .validate_cells(cells)
            .map_err(|e| anyhow::anyhow!("entry {i}: {e}"))?;
        cases.push(SuiteCase { id, state });
    }
    if cases.is_empty() {
        bail!("no cases in {}", cmd.json.display());
    }
    files::write_cases(&cmd.out, &puzzle, &cases)?;
    println!("converted {} cases to {}", cases.len(), cmd.out.display());
    Ok(())
}

fn cmd_val_loss(cmd: ValLossCmd) -> Result<()> {
    let (bundle, meta) = load_checkpoint::<f32>(&cmd.checkpoint)?;
    let puzzle = Puzzle::new(meta.puzzle);
    let loss = validation_loss(&bundle, &puzzle, &meta.scramble, cmd.batches, cmd.seed)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let params = unscramble_core::nn::count_params(&meta.model);
    let states_seen = meta.step as f64 * meta.scramble.examples_per_batch() as f64;
    println!("N={params} D={states_seen} L={loss:.6}");
    println!(
        "C=3ND={:.4e} over {} held-out batches",
        count_compute(&meta.model, states_seen),
        cmd.batches
    );
    if let Some(append) = cmd.append {
        let mut line = format!("{params},{states_seen},{loss}");
        if !cmd.tag.is_empty() {
            line.push(',');
            line.push_str(&cmd.tag);
        }
        line.push('\n');
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&append)?;
        f.write_all(line.as_bytes())?;
        println!("observation appended to {}", append.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli
        .threads
        .or_else(|| std::env::var("UNSCRAMBLE_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Train(cmd) => cmd_train(cmd),
        Command::Solve(cmd) => cmd_solve(cmd),
        Command::Oracle(cmd) => cmd_oracle(cmd),
        Command::FitScaling(cmd) => cmd_fit_scaling(cmd),
        Command::Gen(cmd) => cmd_gen(cmd),
        Command::SampleCases(cmd) => cmd_sample_cases(cmd),
        Command::ConvertCases(cmd) => cmd_convert_cases(cmd),
        Command::ValLoss(cmd) => cmd_val_loss(cmd),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
}
