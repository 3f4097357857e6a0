//! Line-delimited JSON persistence for a finished front.
//!
//! A front file is self-contained: every downstream artifact (plots, CSV
//! exports, expression listings) can be rebuilt from it without touching the
//! original dataset. The first line is a header record carrying the run
//! configuration, per-row labels and the scaling constants; every following
//! line is one front entry sorted by (complexity, cost, signature).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::SearchConfig;
use crate::data::{Dataset, NeighbourCache};
use crate::error::{Error, Result};
use crate::gp::{self, to_infix, to_prefix};
use crate::moead::{Archive, Scaling, SearchStats};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum FrontLine {
    Header(FrontHeader),
    Entry(FrontRecord),
}

/// First line of the file. Echoes enough of the run to make the entries
/// interpretable on their own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontHeader {
    pub version: u32,
    /// Dataset path as given on the command line, for provenance only.
    pub dataset: String,
    pub rows: usize,
    pub features: usize,
    pub feature_names: Vec<String>,
    /// Per-row labels when the dataset had a label column, in row order.
    pub labels: Option<Vec<String>>,
    pub config: SearchConfig,
    /// Cost of the conventional gradient-descent embedding on the same
    /// affinities, the yardstick the front is judged against.
    pub baseline_cost: f64,
    /// Cost ceiling used to scale the cost objective into [0, 4].
    pub cost_ceiling: f64,
    pub stats: SearchStats,
}

/// One front entry. Expressions are stored in prefix form; infix is derived
/// on export. Coordinates are the expression outputs for every dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRecord {
    pub index: usize,
    pub complexity: usize,
    pub cost: f64,
    pub scaled_cost: f64,
    pub scaled_complexity: f64,
    pub prefix_x: String,
    pub prefix_y: String,
    pub embedding: Vec<[f64; 2]>,
}

impl FrontRecord {
    pub fn signature(&self) -> String {
        format!("{} | {}", self.prefix_x, self.prefix_y)
    }

    /// Re-parses the stored expressions. Round-trips bitwise because every
    /// constant was quantized before it was ever printed.
    pub fn individual(&self) -> Result<gp::Individual> {
        gp::parse_individual(&self.signature())
    }

    pub fn infix_x(&self) -> Result<String> {
        Ok(to_infix(&gp::parse_prefix(&self.prefix_x)?))
    }

    pub fn infix_y(&self) -> Result<String> {
        Ok(to_infix(&gp::parse_prefix(&self.prefix_y)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontFile {
    pub header: FrontHeader,
    pub entries: Vec<FrontRecord>,
}

/// Assembles the persisted form of a final archive: entries sorted by
/// (complexity, cost, signature), indexed in that order, with embeddings
/// recomputed from the expressions themselves.
pub fn build_front(
    header: FrontHeader,
    archive: &Archive,
    scaling: &Scaling,
    d: &Dataset,
    nc: &NeighbourCache,
) -> FrontFile {
    let entries = archive
        .sorted_entries()
        .iter()
        .enumerate()
        .map(|(index, e)| {
            let scaled = scaling.scale(&e.objectives);
            let embedding = gp::eval_individual(&e.individual, d, nc);
            FrontRecord {
                index,
                complexity: e.objectives.complexity,
                cost: e.objectives.cost,
                scaled_cost: scaled[0],
                scaled_complexity: scaled[1],
                prefix_x: to_prefix(&e.individual.tree_x),
                prefix_y: to_prefix(&e.individual.tree_y),
                embedding: embedding.coords,
            }
        })
        .collect();
    FrontFile { header, entries }
}

pub fn write_front(path: &Path, front: &FrontFile) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let mut emit = |line: &FrontLine| -> Result<()> {
        let text = serde_json::to_string(line).expect("front records serialize");
        writeln!(w, "{text}").map_err(io_err)
    };
    emit(&FrontLine::Header(front.header.clone()))?;
    for e in &front.entries {
        emit(&FrontLine::Entry(e.clone()))?;
    }
    w.flush().map_err(io_err)
}

pub fn read_front(path: &Path) -> Result<FrontFile> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut header: Option<FrontHeader> = None;
    let mut entries = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: FrontLine = serde_json::from_str(&line).map_err(|e| Error::FrontFormat {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", lineno + 1),
        })?;
        match parsed {
            FrontLine::Header(h) => {
                if header.is_some() {
                    return Err(Error::FrontFormat {
                        path: path.to_path_buf(),
                        reason: format!("line {}: second header record", lineno + 1),
                    });
                }
                if h.version != FORMAT_VERSION {
                    return Err(Error::FrontFormat {
                        path: path.to_path_buf(),
                        reason: format!("unsupported version {}", h.version),
                    });
                }
                header = Some(h);
            }
            FrontLine::Entry(e) => {
                if header.is_none() {
                    return Err(Error::FrontFormat {
                        path: path.to_path_buf(),
                        reason: format!("line {}: entry before header", lineno + 1),
                    });
                }
                entries.push(e);
            }
        }
    }
    let header = header.ok_or_else(|| Error::FrontFormat {
        path: path.to_path_buf(),
        reason: "missing header record".into(),
    })?;
    Ok(FrontFile { header, entries })
}

/// How a command line names one entry of a front.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntrySelector {
    /// Exact index as stored in the file.
    Index(usize),
    /// Entry whose complexity is nearest to the requested value; ties go to
    /// the earlier (cheaper) entry.
    Complexity(usize),
}

impl std::fmt::Display for EntrySelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EntrySelector::Index(i) => write!(f, "index {i}"),
            EntrySelector::Complexity(c) => write!(f, "complexity {c}"),
        }
    }
}

pub fn select_entry<'a>(
    front: &'a FrontFile,
    selector: EntrySelector,
    path: &Path,
) -> Result<&'a FrontRecord> {
    let missing = || Error::NoSuchEntry {
        path: path.to_path_buf(),
        selector: selector.to_string(),
    };
    match selector {
        EntrySelector::Index(i) => front
            .entries
            .iter()
            .find(|e| e.index == i)
            .ok_or_else(missing),
        EntrySelector::Complexity(c) => front
            .entries
            .iter()
            .min_by_key(|e| (e.complexity.abs_diff(c), e.index))
            .ok_or_else(missing),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moead::testfix::{mini_config, mini_problem};
    use crate::moead::{run_search, ObjectivePair};

    fn sample_front() -> FrontFile {
        let prob = mini_problem();
        let cfg = mini_config();
        let out = run_search(&cfg, &prob.d, &prob.nc, &prob.tw, &prob.p).unwrap();
        let header = FrontHeader {
            version: FORMAT_VERSION,
            dataset: "mini.csv".into(),
            rows: prob.d.n(),
            features: prob.d.m(),
            feature_names: prob.d.feature_names.clone(),
            labels: prob.d.labels.clone(),
            config: cfg,
            baseline_cost: 0.25,
            cost_ceiling: out.scaling.cost_ceiling,
            stats: out.stats,
        };
        build_front(header, &out.archive, &out.scaling, &prob.d, &prob.nc)
    }

    #[test]
    fn round_trip_preserves_every_bit() {
        let front = sample_front();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("front.jsonl");
        write_front(&path, &front).unwrap();
        let back = read_front(&path).unwrap();
        assert_eq!(front, back);
        // byte-stable on rewrite too
        let path2 = dir.path().join("front2.jsonl");
        write_front(&path2, &back).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn entries_are_sorted_and_indexed() {
        let front = sample_front();
        assert!(!front.entries.is_empty());
        for (i, e) in front.entries.iter().enumerate() {
            assert_eq!(e.index, i);
            assert_eq!(e.embedding.len(), front.header.rows);
        }
        for w in front.entries.windows(2) {
            assert!(w[0].complexity <= w[1].complexity);
        }
    }

    #[test]
    fn scaled_objectives_match_the_scaling() {
        let front = sample_front();
        let scaling = Scaling {
            cost_ceiling: front.header.cost_ceiling,
        };
        for e in &front.entries {
            let pair = ObjectivePair {
                cost: e.cost,
                complexity: e.complexity,
            };
            let scaled = scaling.scale(&pair);
            assert_eq!(e.scaled_cost, scaled[0]);
            assert_eq!(e.scaled_complexity, scaled[1]);
        }
    }

    #[test]
    fn stored_expressions_reparse_to_the_same_signature() {
        let front = sample_front();
        for e in &front.entries {
            let ind = e.individual().unwrap();
            assert_eq!(gp::canonical_signature(&ind), e.signature());
            assert_eq!(gp::complexity(&ind), e.complexity);
            assert!(e.infix_x().is_ok());
            assert!(e.infix_y().is_ok());
        }
    }

    #[test]
    fn header_must_precede_entries() {
        let front = sample_front();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("front.jsonl");
        write_front(&path, &front).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        if lines.len() >= 2 {
            lines.swap(0, 1);
        }
        let shuffled = dir.path().join("shuffled.jsonl");
        std::fs::write(&shuffled, lines.join("\n")).unwrap();
        match read_front(&shuffled) {
            Err(Error::FrontFormat { reason, .. }) => {
                assert!(reason.contains("entry before header"), "{reason}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn garbage_line_reports_its_number() {
        let front = sample_front();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("front.jsonl");
        write_front(&path, &front).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("not json\n");
        std::fs::write(&path, &text).unwrap();
        let n_lines = text.lines().count();
        match read_front(&path) {
            Err(Error::FrontFormat { reason, .. }) => {
                assert!(reason.contains(&format!("line {n_lines}")), "{reason}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn missing_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        match read_front(&path) {
            Err(Error::FrontFormat { reason, .. }) => {
                assert!(reason.contains("missing header"), "{reason}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn selectors_find_entries_or_fail_loudly() {
        let front = sample_front();
        let path = Path::new("front.jsonl");
        let by_index = select_entry(&front, EntrySelector::Index(0), path).unwrap();
        assert_eq!(by_index.index, 0);
        let missing = select_entry(&front, EntrySelector::Index(front.entries.len()), path);
        assert!(matches!(missing, Err(Error::NoSuchEntry { .. })));

        // nearest-complexity: asking for an absurdly large complexity lands on
        // the last (most complex) entry; asking for 0 lands on the first.
        let last = select_entry(&front, EntrySelector::Complexity(usize::MAX - 1), path).unwrap();
        assert_eq!(last.index, front.entries.len() - 1);
        let first = select_entry(&front, EntrySelector::Complexity(0), path).unwrap();
        assert_eq!(first.index, 0);
    }
}
