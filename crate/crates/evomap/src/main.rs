use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evomap::app::{self, ConfigOverrides, ExportFormat, Profile};
use evomap::front::EntrySelector;

#[derive(Parser)]
#[command(
    name = "evomap",
    version,
    about = "Evolves readable expression pairs that map tabular data onto 2-D scatter plots"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full search: evolve a cost/complexity front and export its artifacts.
    Run(RunArgs),
    /// Conventional gradient-descent embedding on the same affinities.
    Baseline(BaselineArgs),
    /// Render one front entry as an SVG scatter.
    Plot(PlotArgs),
    /// Re-derive files from an existing front.
    Export(ExportArgs),
}

#[derive(Args)]
struct CommonConfig {
    /// Parameter preset; individual flags override single fields.
    #[arg(long, value_enum, env = "EVOMAP_PROFILE", default_value = "desk")]
    profile: Profile,
    #[arg(long, env = "EVOMAP_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "EVOMAP_GENERATIONS")]
    generations: Option<usize>,
    #[arg(long, env = "EVOMAP_POPULATION")]
    population: Option<usize>,
    #[arg(long, env = "EVOMAP_PERPLEXITY")]
    perplexity: Option<f64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "EVOMAP_THREADS")]
    threads: Option<usize>,
}

impl CommonConfig {
    fn resolve(&self) -> evomap::config::SearchConfig {
        let overrides = ConfigOverrides {
            seed: self.seed,
            generations: self.generations,
            population: self.population,
            perplexity: self.perplexity,
            threads: self.threads,
        };
        app::resolve_config(self.profile, &overrides)
    }
}

#[derive(Args)]
struct RunArgs {
    /// CSV dataset, one row per observation, numeric feature columns.
    #[arg(long, env = "EVOMAP_DATA")]
    data: PathBuf,
    /// Name of a column holding class labels (kept out of the features).
    #[arg(long, env = "EVOMAP_LABEL_COLUMN")]
    label_column: Option<String>,
    /// Output directory for the front file and its artifacts.
    #[arg(long, env = "EVOMAP_OUT")]
    out: PathBuf,
    #[command(flatten)]
    config: CommonConfig,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, env = "EVOMAP_DATA")]
    data: PathBuf,
    #[arg(long, env = "EVOMAP_LABEL_COLUMN")]
    label_column: Option<String>,
    /// Optional directory for baseline.csv and baseline.svg.
    #[arg(long, env = "EVOMAP_OUT")]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: CommonConfig,
}

#[derive(Args)]
struct PlotArgs {
    /// Front file produced by `run`.
    #[arg(long)]
    front: PathBuf,
    /// Entry index within the front file.
    #[arg(long, conflicts_with = "complexity")]
    index: Option<usize>,
    /// Pick the entry with the nearest complexity instead.
    #[arg(long)]
    complexity: Option<usize>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    front: PathBuf,
    #[arg(long, value_enum)]
    format: ExportFormat,
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> evomap::Result<()> {
    match cli.cmd {
        Cmd::Run(a) => {
            let cfg = a.config.resolve();
            let report = app::cmd_run(&a.data, a.label_column.as_deref(), &cfg, &a.out)?;
            println!("front: {}", report.front_path.display());
            println!(
                "entries: {}  min complexity: {}  best cost: {:.6}",
                report.front.entries.len(),
                report.min_complexity,
                report.best_cost
            );
            println!("baseline cost: {:.6}", report.baseline_cost);
            println!("artifacts: {}", report.artifacts.len());
            println!("elapsed: {:.1?}", report.elapsed);
        }
        Cmd::Baseline(a) => {
            let cfg = a.config.resolve();
            let report =
                app::cmd_baseline(&a.data, a.label_column.as_deref(), &cfg, a.out.as_deref())?;
            println!("baseline cost: {:.6}", report.cost);
            for f in &report.files {
                println!("wrote: {}", f.display());
            }
        }
        Cmd::Plot(a) => {
            let selector = match (a.index, a.complexity) {
                (Some(i), _) => EntrySelector::Index(i),
                (None, Some(c)) => EntrySelector::Complexity(c),
                (None, None) => EntrySelector::Index(0),
            };
            let path = app::cmd_plot(&a.front, selector, &a.out)?;
            println!("wrote: {}", path.display());
        }
        Cmd::Export(a) => {
            let files = app::cmd_export(&a.front, a.format, &a.out)?;
            for f in &files {
                println!("wrote: {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
