//! Command layer behind the binary: full runs, baselines, plotting, exports.
//!
//! Everything here is plain library code so the behaviour is testable without
//! spawning a process; `main` only parses flags and forwards.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::config::SearchConfig;
use crate::data::{self, Dataset};
use crate::error::{Error, Result};
use crate::front::{self, EntrySelector, FrontFile, FrontHeader, FrontRecord};
use crate::moead::{self, Archive, GenStat};
use crate::plot;
use crate::pso;
use crate::tsne::{self, Embedding};
use crate::{derive_seed, with_thread_pool};

/// Seed stream for the gradient-descent baseline, distinct from the search
/// stream (0) and the cost-scaling probe (1) so adding or dropping a baseline
/// never shifts the search.
const BASELINE_STREAM: u64 = 2;

/// Named parameter presets selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    /// Full-length run: 2500 generations.
    Paper,
    /// Short run for desk checks and CI: 300 generations.
    Desk,
}

/// Optional flag values layered on top of a profile.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub seed: Option<u64>,
    pub generations: Option<usize>,
    pub population: Option<usize>,
    pub perplexity: Option<f64>,
    pub threads: Option<usize>,
}

pub fn resolve_config(profile: Profile, o: &ConfigOverrides) -> SearchConfig {
    let mut cfg = match profile {
        Profile::Paper => SearchConfig::paper(),
        Profile::Desk => SearchConfig::desk(),
    };
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.generations {
        cfg.generations = v;
    }
    if let Some(v) = o.population {
        cfg.population = v;
    }
    if let Some(v) = o.perplexity {
        cfg.perplexity = v;
    }
    if let Some(v) = o.threads {
        cfg.threads = v;
    }
    cfg
}

/// Files created by a run, so a failure can sweep up after itself instead of
/// leaving a half-written output directory behind.
#[derive(Default)]
struct OutputTracker {
    created: Vec<PathBuf>,
}

impl OutputTracker {
    fn claim(&mut self, path: PathBuf) -> PathBuf {
        self.created.push(path.clone());
        path
    }

    fn cleanup(&self) {
        for p in &self.created {
            let _ = std::fs::remove_file(p);
        }
    }
}

/// What a finished run hands back: the persisted front plus summary numbers.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub front: FrontFile,
    pub front_path: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub best_cost: f64,
    pub min_complexity: usize,
    pub baseline_cost: f64,
    pub elapsed: Duration,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn cmd_run(
    data_path: &Path,
    label_column: Option<&str>,
    cfg: &SearchConfig,
    out_dir: &Path,
) -> Result<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let raw = data::load_csv(data_path, label_column)?;
    // cheap precondition check so a bad perplexity fails before any heavy work
    if !(cfg.perplexity < (raw.n() - 1) as f64) {
        return Err(Error::PerplexityTooLarge {
            perplexity: cfg.perplexity,
            n: raw.n(),
        });
    }
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut tracker = OutputTracker::default();
    let result = run_pipeline(data_path, &raw, cfg, out_dir, &mut tracker, started);
    if result.is_err() {
        tracker.cleanup();
    }
    result
}

fn run_pipeline(
    data_path: &Path,
    raw: &Dataset,
    cfg: &SearchConfig,
    out_dir: &Path,
    tracker: &mut OutputTracker,
    started: Instant,
) -> Result<RunReport> {
    let d = data::normalize_minmax(raw);
    let distances = data::pairwise_sq_distances(&d);
    let nc = data::compute_neighbour_cache(&d, &distances)?;
    let pc = data::first_principal_component(&d)?;
    let tw = data::build_terminal_weights(&d, &pc);

    let (baseline, outcome, tuned) = with_thread_pool(cfg.threads, || -> Result<_> {
        let p = tsne::joint_p(&distances, cfg.perplexity)?;
        let baseline = tsne::baseline_tsne(&p, derive_seed(cfg.seed, BASELINE_STREAM))?;
        let outcome = moead::run_search(cfg, &d, &nc, &tw, &p)?;
        let (tuned, _log) = pso::tune_front(&outcome.archive, &p, &d, &nc, cfg);
        Ok((baseline, outcome, tuned))
    })?;

    let header = FrontHeader {
        version: front::FORMAT_VERSION,
        dataset: data_path.display().to_string(),
        rows: d.n(),
        features: d.m(),
        feature_names: d.feature_names.clone(),
        labels: d.labels.clone(),
        config: cfg.clone(),
        baseline_cost: baseline.cost,
        cost_ceiling: outcome.scaling.cost_ceiling,
        stats: outcome.stats,
    };
    let front = front::build_front(header, &tuned, &outcome.scaling, &d, &nc);

    let front_path = tracker.claim(out_dir.join("front.jsonl"));
    front::write_front(&front_path, &front)?;
    let telemetry_path = tracker.claim(out_dir.join("telemetry.log"));
    write_telemetry(&telemetry_path, &outcome.telemetry)?;

    let mut artifacts = vec![front_path.clone(), telemetry_path];
    for rec in representative_records(&front, &tuned) {
        let stem = format!("rep_{:02}_c{}", rec.index, rec.complexity);
        let csv_path = tracker.claim(out_dir.join(format!("{stem}.csv")));
        write_embedding_csv(&csv_path, &rec.embedding, front.header.labels.as_deref())?;
        let svg_path = tracker.claim(out_dir.join(format!("{stem}.svg")));
        let svg = plot::render_scatter(
            &rec.embedding,
            front.header.labels.as_deref(),
            &plot_title(rec),
            plot::jitter_for_complexity(rec.complexity),
        );
        std::fs::write(&svg_path, svg).map_err(io_err(&svg_path))?;
        artifacts.push(csv_path);
        artifacts.push(svg_path);
    }

    let best_cost = front
        .entries
        .iter()
        .map(|e| e.cost)
        .fold(f64::INFINITY, f64::min);
    let min_complexity = front
        .entries
        .iter()
        .map(|e| e.complexity)
        .min()
        .unwrap_or(0);
    Ok(RunReport {
        front_path,
        artifacts,
        best_cost,
        min_complexity,
        baseline_cost: baseline.cost,
        elapsed: started.elapsed(),
        front,
    })
}

fn plot_title(rec: &FrontRecord) -> String {
    format!("complexity {}, cost {:.6}", rec.complexity, rec.cost)
}

/// Picks the entries worth rendering: the two ends of the front plus two
/// evenly spaced interior complexity targets.
fn representative_records<'a>(front: &'a FrontFile, tuned: &Archive) -> Vec<&'a FrontRecord> {
    let sorted = tuned.sorted_entries();
    let min_c = sorted
        .first()
        .expect("archive never empty")
        .objectives
        .complexity;
    let max_c = sorted
        .last()
        .expect("archive never empty")
        .objectives
        .complexity;
    let span = max_c - min_c;
    let targets = [min_c, min_c + span / 3, min_c + 2 * span / 3];
    let reps = moead::extract_representatives(tuned, &targets);
    let by_sig: HashMap<String, &FrontRecord> =
        front.entries.iter().map(|e| (e.signature(), e)).collect();
    reps.iter()
        .map(|r| {
            *by_sig
                .get(&r.signature)
                .expect("representative present in front")
        })
        .collect()
}

fn write_telemetry(path: &Path, telemetry: &[GenStat]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# generation\tbest_cost\tarchive_size").map_err(io_err(path))?;
    for g in telemetry {
        writeln!(w, "{}\t{}\t{}", g.generation, g.best_cost, g.archive_len)
            .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_embedding_csv(path: &Path, coords: &[[f64; 2]], labels: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    if labels.is_some() {
        w.write_record(["x", "y", "label"]).map_err(csv_err)?;
    } else {
        w.write_record(["x", "y"]).map_err(csv_err)?;
    }
    for (i, c) in coords.iter().enumerate() {
        match labels {
            Some(ls) => w
                .write_record([c[0].to_string(), c[1].to_string(), ls[i].clone()])
                .map_err(csv_err)?,
            None => w
                .write_record([c[0].to_string(), c[1].to_string()])
                .map_err(csv_err)?,
        }
    }
    w.flush().map_err(io_err(path))
}

/// Baseline embedding on the same affinity construction as a full run.
#[derive(Debug, Clone)]
pub struct BaselineReport {
    pub cost: f64,
    pub embedding: Embedding,
    pub files: Vec<PathBuf>,
}

pub fn cmd_baseline(
    data_path: &Path,
    label_column: Option<&str>,
    cfg: &SearchConfig,
    out_dir: Option<&Path>,
) -> Result<BaselineReport> {
    cfg.validate()?;
    let raw = data::load_csv(data_path, label_column)?;
    if !(cfg.perplexity < (raw.n() - 1) as f64) {
        return Err(Error::PerplexityTooLarge {
            perplexity: cfg.perplexity,
            n: raw.n(),
        });
    }
    let d = data::normalize_minmax(&raw);
    let distances = data::pairwise_sq_distances(&d);
    let result = with_thread_pool(cfg.threads, || -> Result<_> {
        let p = tsne::joint_p(&distances, cfg.perplexity)?;
        tsne::baseline_tsne(&p, derive_seed(cfg.seed, BASELINE_STREAM))
    })?;

    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let csv_path = dir.join("baseline.csv");
        write_embedding_csv(&csv_path, &result.embedding.coords, d.labels.as_deref())?;
        let svg_path = dir.join("baseline.svg");
        let svg = plot::render_scatter(
            &result.embedding.coords,
            d.labels.as_deref(),
            &format!("baseline, cost {:.6}", result.cost),
            false,
        );
        std::fs::write(&svg_path, svg).map_err(io_err(&svg_path))?;
        files.push(csv_path);
        files.push(svg_path);
    }
    Ok(BaselineReport {
        cost: result.cost,
        embedding: result.embedding,
        files,
    })
}

pub fn cmd_plot(front_path: &Path, selector: EntrySelector, out_svg: &Path) -> Result<PathBuf> {
    let front = front::read_front(front_path)?;
    let rec = front::select_entry(&front, selector, front_path)?;
    let svg = plot::render_scatter(
        &rec.embedding,
        front.header.labels.as_deref(),
        &plot_title(rec),
        plot::jitter_for_complexity(rec.complexity),
    );
    if let Some(parent) = out_svg.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    std::fs::write(out_svg, svg).map_err(io_err(out_svg))?;
    Ok(out_svg.to_path_buf())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    /// One text file per entry with both expressions, infix and prefix.
    Expressions,
    /// One CSV per entry with the embedding coordinates.
    Embeddings,
    /// Single CSV of (complexity, cost) pairs along the front.
    Summary,
}

pub fn cmd_export(front_path: &Path, format: ExportFormat, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let front = front::read_front(front_path)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut files = Vec::new();
    match format {
        ExportFormat::Expressions => {
            for e in &front.entries {
                let path = out_dir.join(format!("expr_{:02}_c{}.txt", e.index, e.complexity));
                let text = format!(
                    "complexity: {}\ncost: {}\nx: {}\ny: {}\nx_prefix: {}\ny_prefix: {}\n",
                    e.complexity,
                    e.cost,
                    e.infix_x()?,
                    e.infix_y()?,
                    e.prefix_x,
                    e.prefix_y,
                );
                std::fs::write(&path, text).map_err(io_err(&path))?;
                files.push(path);
            }
        }
        ExportFormat::Embeddings => {
            for e in &front.entries {
                let path = out_dir.join(format!("embedding_{:02}_c{}.csv", e.index, e.complexity));
                write_embedding_csv(&path, &e.embedding, front.header.labels.as_deref())?;
                files.push(path);
            }
        }
        ExportFormat::Summary => {
            let path = out_dir.join("summary.csv");
            let file = File::create(&path).map_err(io_err(&path))?;
            let mut w = BufWriter::new(file);
            writeln!(w, "complexity,cost").map_err(io_err(&path))?;
            // equal-complexity entries tie on cost, so keeping the first of
            // each complexity leaves a strictly increasing column
            let mut last: Option<usize> = None;
            for e in &front.entries {
                if last == Some(e.complexity) {
                    continue;
                }
                writeln!(w, "{},{}", e.complexity, e.cost).map_err(io_err(&path))?;
                last = Some(e.complexity);
            }
            w.flush().map_err(io_err(&path))?;
            files.push(path);
        }
    }
    Ok(files)
}
