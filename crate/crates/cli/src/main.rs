use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdadd::datagen::{ScenarioConfig, ScenarioKind};
use fdadd::experiment::{
    emit_outputs, load_config, load_sonf_csv, run_sweep, summarize, Summary, SweepConfig,
};
use fdadd::selection::SelectionMethod;
use fdadd::{Error, Result};

const DEFAULT_OUT: &str = "fdadd-out";

#[derive(Parser)]
#[command(name = "fdadd", version, about = "Sweep the number of basis functions in functional regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        threads: Threads,
    },
    /// Fit one noisy curve with 4..=120 spline bases and score each fit
    /// against the true curve.
    DemoFig1 {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = DEFAULT_OUT)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
    },
    /// Sweep K on scalar-on-function data read from CSV files.
    SweepData {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Rows used for training in each replicate; the rest are test rows.
        #[arg(long)]
        train_size: usize,
        #[arg(long, default_value_t = 4)]
        k_min: usize,
        #[arg(long, default_value_t = 50)]
        k_max: usize,
        #[arg(long, default_value_t = 50)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = DEFAULT_OUT)]
        out: PathBuf,
        /// Comma-separated subset of cv, caic, fixed.
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        methods: Option<Vec<SelectionMethod>>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        fixed_k: Option<usize>,
        #[command(flatten)]
        threads: Threads,
    },
}

#[derive(Args)]
struct Threads {
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_method(s: &str) -> std::result::Result<SelectionMethod, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "cv" => Ok(SelectionMethod::Cv),
        "caic" => Ok(SelectionMethod::Caic),
        "fixed" => Ok(SelectionMethod::Fixed),
        other => Err(format!("unknown method {other:?} (expected cv, caic or fixed)")),
    }
}

fn run_and_report(cfg: &SweepConfig, out: &Path) -> Result<()> {
    let result = run_sweep(cfg)?;
    let summary = summarize(&result);
    let files = emit_outputs(&result, &summary, out)?;
    print_summary(cfg, &summary);
    println!("wrote {}", files.records.display());
    println!("wrote {}", files.methods.display());
    println!("wrote {}", files.summary.display());
    println!("wrote {}", files.curve.display());
    Ok(())
}

fn print_summary(cfg: &SweepConfig, summary: &Summary) {
    let marker = cfg.marker();
    println!(
        "{}: {} replicate(s), K in {}..={}, {} at {}",
        cfg.label(),
        cfg.replicates,
        cfg.k_grid[0],
        cfg.k_grid[cfg.k_grid.len() - 1],
        marker.label,
        marker.k
    );
    if let Some(peak) = summary.peak_k() {
        let median = summary.median_at(peak).unwrap_or(f64::NAN);
        println!("median MSE peaks at K = {peak} ({median:.6e})");
    }
    let last = cfg.k_grid[cfg.k_grid.len() - 1];
    if let Some(m) = summary.median_at(last) {
        println!("median MSE at K = {last}: {m:.6e}");
    }
    for m in &summary.methods {
        println!(
            "{:>5}: mean MSE {:.6e}, median chosen K {}",
            m.method.to_string(),
            m.mean_mse,
            m.chosen_k.median
        );
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if threads.threads.is_some() {
                cfg.threads = threads.threads;
            }
            cfg.validate()?;
            let out = out
                .or_else(|| cfg.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            run_and_report(&cfg, &out)
        }
        Command::DemoFig1 {
            seed,
            out,
            replicates,
        } => {
            let mut cfg = SweepConfig::scenario(ScenarioConfig::defaults(ScenarioKind::Fig1Demo));
            cfg.seed = seed;
            cfg.replicates = replicates;
            run_and_report(&cfg, &out)
        }
        Command::SweepData {
            x,
            y,
            train_size,
            k_min,
            k_max,
            replicates,
            seed,
            out,
            methods,
            folds,
            fixed_k,
            threads,
        } => {
            if k_min > k_max {
                return Err(Error::Config(format!("--k-min {k_min} exceeds --k-max {k_max}")));
            }
            let loaded = load_sonf_csv(&x, &y)?;
            println!(
                "loaded {} row(s) from {}, dropped {} with missing values",
                loaded.dataset.train.len(),
                x.display(),
                loaded.dropped()
            );
            let mut cfg = SweepConfig::data(loaded.dataset, train_size);
            cfg.k_grid = (k_min..=k_max).collect();
            cfg.replicates = replicates;
            cfg.seed = seed;
            cfg.threads = threads.threads;
            if let Some(m) = methods {
                cfg.methods = m;
            }
            if let Some(f) = folds {
                cfg.folds = f;
            }
            if let Some(k) = fixed_k {
                cfg.fixed_k = k;
            }
            run_and_report(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
