use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mfreg::data::{load_dataset, save_canonical, split, synthetic, SplitPair};
use mfreg::diagnostics::{implied_beta_spread, SignConvention};
use mfreg::experiment::{
    apply_train_keys, cell_framework, export_surface, load_model, save_model, run_grid, Config, GridSpec,
};
use mfreg::metrics::{evaluate, DME_NOTE};
use mfreg::{Dataset, FrameworkKind, Params, TrainMode};

#[derive(Parser, Debug)]
#[command(name = "mfreg", version, about = "Matrix factorization regularization experiments")]
struct Cli {
    /// Seed for splits, initialization and SGD order.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// INI-style experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for grid cells.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model, print its loss trace and evaluation.
    Train(TrainArgs),
    /// Run the grid search described by --config and write the surface table.
    Grid(GridArgs),
    /// Implied-coefficient spread for a saved or freshly trained model.
    Diagnose(DiagnoseArgs),
    /// MAE and DME of a saved model on the test side of the split.
    Eval(EvalArgs),
    /// Write a synthetic low-rank dataset in canonical format.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Ratings file (defaults to dataset.path from the config).
    #[arg(long)]
    data: Option<PathBuf>,
    /// movielens, comoda, movielens_tab or canonical; detected when omitted.
    #[arg(long)]
    preset: Option<String>,
    /// Train fraction of the split.
    #[arg(long)]
    ratio: Option<f64>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    framework: Option<FrameworkKind>,
    /// Learning rate for features and coefficient vectors.
    #[arg(long)]
    lr: Option<f64>,
    /// Separate learning rate for coefficient vectors.
    #[arg(long)]
    reg_lr: Option<f64>,
    /// β for scalar frameworks, initial coefficient entry for vector_dot.
    #[arg(long)]
    reg: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    mode: Option<TrainMode>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Where to save the model (default <out>/model.txt).
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    k_top: Option<usize>,
    #[arg(long)]
    no_clamp: bool,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Overrides dataset.path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Overrides dataset.preset.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model_args: ModelArgs,
    /// Saved model; a model is trained on the train split when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Drop the leading minus of the implied coefficient.
    #[arg(long)]
    unnegated: bool,
    /// Use the whole dataset instead of the train side of the split.
    #[arg(long)]
    full: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    k_top: Option<usize>,
    #[arg(long)]
    no_clamp: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    users: usize,
    #[arg(long, default_value_t = 80)]
    items: usize,
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Output file (default <out>/synthetic.csv).
    #[arg(long)]
    output: Option<PathBuf>,
}

struct Ctx {
    config: Config,
    seed: Option<u64>,
    out: PathBuf,
    threads: usize,
}

impl Ctx {
    fn out_file(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }

    fn split_seed(&self) -> Result<u64> {
        Ok(match self.seed {
            Some(s) => s,
            None => self.config.parsed("split.seed")?.unwrap_or(42),
        })
    }

    fn dataset(&self, args: &DataArgs) -> Result<Dataset> {
        let path = args
            .data
            .clone()
            .or_else(|| self.config.path("dataset.path"))
            .context("no dataset given (use --data or dataset.path in --config)")?;
        let preset = match (&args.preset, self.config.get("dataset.preset")) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => p.to_owned(),
            (None, None) => detect_preset(&path)?,
        };
        let data = load_dataset(&path, &preset).with_context(|| format!("loading {}", path.display()))?;
        if data.duplicate_count() > 0 {
            eprintln!("warning: {} duplicate ratings replaced", data.duplicate_count());
        }
        Ok(data)
    }

    fn split(&self, args: &DataArgs, data: &Dataset) -> Result<SplitPair<f64>> {
        let ratio = match args.ratio {
            Some(r) => r,
            None => self.config.parsed("split.ratio")?.unwrap_or(0.8),
        };
        let seed = self.split_seed()?;
        Ok(split(data, ratio, seed)?)
    }

    fn params(&self, args: &ModelArgs) -> Result<(Params, FrameworkKind, f64)> {
        let mut h = Params::default();
        apply_train_keys(&self.config, &mut h)?;
        if let Some(s) = self.seed {
            h.seed = s;
        }
        if let Some(k) = args.k {
            h.k = k;
        }
        if let Some(e) = args.epochs {
            h.epochs = e;
        }
        if let Some(m) = args.mode {
            h.mode = m;
        }
        if let Some(lr) = args.lr {
            h = h.with_learning_rate(lr);
        }
        if let Some(lr) = args.reg_lr {
            h.eta_reg = lr;
        }
        let kind = match args.framework {
            Some(k) => k,
            None => self.config.parsed("train.framework")?.unwrap_or(FrameworkKind::VectorDot),
        };
        let mag = match args.reg {
            Some(r) => r,
            None => self.config.parsed("train.reg_magnitude")?.unwrap_or(h.init_reg_value),
        };
        if kind == FrameworkKind::VectorDot {
            h.init_reg_value = mag;
        }
        if let Some(c) = self.config.flag("metrics.clamp")? {
            h.clamp_predictions = c;
        }
        Ok((h, kind, mag))
    }

    fn k_top(&self, flag: Option<usize>) -> Result<usize> {
        Ok(match flag {
            Some(k) => k,
            None => self.config.parsed("metrics.k_top")?.unwrap_or(mfreg::metrics::DEFAULT_K_TOP),
        })
    }

    fn clamp(&self, no_clamp: bool) -> Result<bool> {
        Ok(!no_clamp && self.config.flag("metrics.clamp")?.unwrap_or(true))
    }
}

/// Canonical files announce themselves on the first line; anything else is
/// read as a MovieLens-style table.
fn detect_preset(path: &Path) -> Result<String> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first)?;
    Ok(if first.trim() == "M,N,r_min,r_max" { "canonical" } else { "movielens" }.to_owned())
}

fn print_eval(report: &mfreg::Eval) {
    println!("{}", mfreg::metrics::EvalReport::<f64>::CSV_HEADER);
    println!("{}", report.csv_row());
    println!("# {DME_NOTE}");
}

fn cmd_train(ctx: &Ctx, args: &TrainArgs) -> Result<()> {
    let data = ctx.dataset(&args.data)?;
    let pair = ctx.split(&args.data, &data)?;
    let (h, kind, mag) = ctx.params(&args.model)?;
    let framework = cell_framework(kind, mag, data.num_users(), data.num_items());
    let res = mfreg::train(&pair.train, &h, framework)?;
    println!("# framework={kind} lr={} reg={mag} k={} mode={} seed={} split_seed={}", h.eta_feat, h.k, h.mode, h.seed, pair.seed);
    println!("epoch,fit,penalty,total");
    for (e, l) in res.trace.iter().enumerate() {
        println!("{},{},{},{}", e + 1, l.fit, l.penalty, l.total);
    }
    println!("# epochs_run={} converged={}", res.epochs_run, res.converged);
    let report = evaluate(&res.model, &pair.train, &pair.test, ctx.clamp(args.no_clamp)?, ctx.k_top(args.k_top)?)?;
    print_eval(&report);
    let path = match &args.model_out {
        Some(p) => p.clone(),
        None => ctx.out_file("model.txt")?,
    };
    save_model(&res.model, &path)?;
    eprintln!("model written to {}", path.display());
    Ok(())
}

fn cmd_grid(ctx: &Ctx, args: &GridArgs, config_path: Option<&Path>) -> Result<()> {
    let config_path = config_path.context("grid needs --config <path>")?;
    let mut config = ctx.config.clone();
    if let Some(d) = &args.data {
        config.set("dataset.path", d.display().to_string());
    }
    if let Some(p) = &args.preset {
        config.set("dataset.preset", p.clone());
    }
    let mut spec = GridSpec::<f64>::from_config(&config)
        .with_context(|| format!("reading grid spec from {}", config_path.display()))?;
    if let Some(s) = ctx.seed {
        spec.split_seed = s;
        spec.template.seed = s;
    }
    if let Some(src) = &mut spec.dataset {
        if config.get("dataset.preset").is_none() {
            src.preset = detect_preset(&src.path)?;
        }
    }
    let table = run_grid(&spec, ctx.threads)?;
    let files = export_surface(&table, ctx.out_file("surface.csv")?)?;
    if table.all_diverged() {
        println!("all {} cells diverged", table.rows.len());
    }
    for kind in table.frameworks() {
        match table.best_row(kind) {
            Some(r) => println!(
                "best {kind}: lr={} reg={} mae={} dme={}",
                r.learning_rate,
                r.reg_magnitude,
                r.mae.unwrap_or(f64::NAN),
                r.dme.map_or_else(|| "n/a".to_owned(), |d| d.to_string())
            ),
            None => println!("best {kind}: none (every cell diverged)"),
        }
    }
    println!("# split_ratio={} split_seed={}", table.split_ratio, table.split_seed);
    println!("# {DME_NOTE}");
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_diagnose(ctx: &Ctx, args: &DiagnoseArgs) -> Result<()> {
    let data = ctx.dataset(&args.data)?;
    let fit_data = if args.full { data.clone() } else { ctx.split(&args.data, &data)?.train };
    let model = match &args.model {
        Some(p) => load_model::<f64>(p)?,
        None => {
            let (h, kind, mag) = ctx.params(&args.model_args)?;
            let fw = cell_framework(kind, mag, data.num_users(), data.num_items());
            mfreg::train(&fit_data, &h, fw)?.model
        }
    };
    let convention = if args.unnegated { SignConvention::Unnegated } else { SignConvention::Corrected };
    let report = implied_beta_spread(&model, &fit_data, convention)?;
    let path = ctx.out_file("implied_beta.csv")?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    fs::write(&path, &buf).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "implied beta over {} users ({} excluded): min={} max={} mean={} std={} cv={}",
        report.num_users,
        report.excluded,
        report.min,
        report.max,
        report.mean,
        report.std,
        report.coefficient_of_variation.map_or_else(|| "undefined".to_owned(), |c| c.to_string())
    );
    if report.std > 0.0 {
        println!("no single constant coefficient satisfies every user's stationarity equation");
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_eval(ctx: &Ctx, args: &EvalArgs) -> Result<()> {
    let data = ctx.dataset(&args.data)?;
    let pair = ctx.split(&args.data, &data)?;
    let model = load_model::<f64>(&args.model)?;
    let report = evaluate(&model, &pair.train, &pair.test, ctx.clamp(args.no_clamp)?, ctx.k_top(args.k_top)?)?;
    print_eval(&report);
    Ok(())
}

fn cmd_synth(ctx: &Ctx, args: &SynthArgs) -> Result<()> {
    let seed = ctx.seed.unwrap_or(42);
    let data: Dataset = synthetic(args.users, args.items, args.rank, args.density, args.noise, seed)?;
    let path = match &args.output {
        Some(p) => p.clone(),
        None => ctx.out_file("synthetic.csv")?,
    };
    save_canonical(&data, &path)?;
    println!("{} ratings, {} users, {} items -> {}", data.len(), data.num_users(), data.num_items(), path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(0) = cli.threads {
        bail!("--threads must be at least 1");
    }
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let ctx = Ctx {
        config,
        seed: cli.seed,
        out: cli.out.clone(),
        threads,
    };
    match &cli.command {
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Grid(a) => cmd_grid(&ctx, a, cli.config.as_deref()),
        Command::Diagnose(a) => cmd_diagnose(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Synth(a) => cmd_synth(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
