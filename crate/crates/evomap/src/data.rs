//! Tabular input handling: CSV loading, min-max normalization, pairwise
//! distances, the 3-nearest-neighbour feature cache, and the first-principal-
//! component feature weighting used to bias terminal sampling.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Fixed stream for the power-iteration start vector, so the principal
/// component is a property of the dataset alone.
const PC_START_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_MAX: usize = 10_000;

pub const NEIGHBOURS: usize = 3;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub feature_names: Vec<String>,
    pub labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn m(&self) -> usize {
        self.features.cols()
    }
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a comma-separated file. A header row is assumed when the first row
/// has any cell that does not parse as a finite number. The label column may
/// be named (header files) or given as a 0-based column index.
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = Vec::new();
    for record in reader.records() {
        records.push(record.map_err(|source| Error::Csv {
            path: path.to_owned(),
            source,
        })?);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.to_owned(),
        });
    }

    let width = records[0].len();
    for (k, record) in records.iter().enumerate() {
        if record.len() != width {
            return Err(Error::RaggedRow {
                path: path.to_owned(),
                row: k + 1,
                expected: width,
                found: record.len(),
            });
        }
    }

    let has_header = records[0].iter().any(|cell| parse_finite(cell).is_none());
    let column_names: Vec<String> = if has_header {
        records[0].iter().map(str::to_owned).collect()
    } else {
        (0..width).map(|j| format!("f{j}")).collect()
    };

    let label_index = match label_column {
        None => None,
        Some(name) => {
            let by_name = has_header
                .then(|| column_names.iter().position(|c| c == name))
                .flatten();
            let by_index = name.parse::<usize>().ok().filter(|&j| j < width);
            match by_name.or(by_index) {
                Some(j) => Some(j),
                None => {
                    return Err(Error::LabelColumnNotFound {
                        path: path.to_owned(),
                        name: name.to_owned(),
                    })
                }
            }
        }
    };

    let data_rows = &records[usize::from(has_header)..];
    if data_rows.is_empty() {
        return Err(Error::EmptyDataset {
            path: path.to_owned(),
        });
    }
    if data_rows.len() < 4 {
        return Err(Error::TooFewRows {
            path: path.to_owned(),
            n: data_rows.len(),
        });
    }

    let header_offset = usize::from(has_header);
    let mut rows = Vec::with_capacity(data_rows.len());
    let mut labels = label_index.map(|_| Vec::with_capacity(data_rows.len()));
    for (k, record) in data_rows.iter().enumerate() {
        let mut row = Vec::with_capacity(width - usize::from(label_index.is_some()));
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == label_index {
                labels.as_mut().unwrap().push(cell.to_owned());
                continue;
            }
            match parse_finite(cell) {
                Some(v) => row.push(v),
                None => {
                    return Err(Error::NonNumericCell {
                        path: path.to_owned(),
                        row: k + 1 + header_offset,
                        col: j + 1,
                        value: cell.to_owned(),
                    })
                }
            }
        }
        rows.push(row);
    }

    let feature_names = column_names
        .into_iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_index)
        .map(|(_, name)| name)
        .collect();

    Ok(Dataset {
        features: Matrix::from_rows(&rows),
        feature_names,
        labels,
    })
}

/// Rescales every feature column to [0, 1]. Constant columns map to all
/// zeros. Applying it twice gives bitwise-identical output.
pub fn normalize_minmax(d: &Dataset) -> Dataset {
    let (n, m) = (d.n(), d.m());
    let mut out = Matrix::zeros(n, m);
    for j in 0..m {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let v = d.features.get(i, j);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let span = hi - lo;
        for i in 0..n {
            let v = if span == 0.0 {
                0.0
            } else {
                (d.features.get(i, j) - lo) / span
            };
            out.set(i, j, v);
        }
    }
    Dataset {
        features: out,
        feature_names: d.feature_names.clone(),
        labels: d.labels.clone(),
    }
}

#[derive(Debug, Clone)]
pub struct DistanceTable {
    pub sq: Matrix,
}

/// Squared Euclidean distances between all row pairs. Symmetric by
/// construction, zero diagonal.
pub fn pairwise_sq_distances(d: &Dataset) -> DistanceTable {
    let n = d.n();
    let mut sq = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            let (ri, rj) = (d.features.row(i), d.features.row(j));
            for k in 0..d.m() {
                let diff = ri[k] - rj[k];
                acc += diff * diff;
            }
            sq.set(i, j, acc);
            sq.set(j, i, acc);
        }
    }
    DistanceTable { sq }
}

#[derive(Debug, Clone)]
pub struct NeighbourCache {
    /// Row i: the 3 nearest other rows, closest first, ties by ascending index.
    pub neighbours: Vec<[usize; NEIGHBOURS]>,
    /// Row i, column j: mean of feature j over those 3 rows.
    pub means: Matrix,
}

/// Precomputes, per instance, its 3 nearest neighbours (self excluded) and
/// their per-feature means.
pub fn compute_neighbour_cache(d: &Dataset, t: &DistanceTable) -> Result<NeighbourCache> {
    let n = d.n();
    if n < NEIGHBOURS + 1 {
        return Err(Error::InvalidConfig(format!(
            "neighbour cache needs at least {} rows, have {n}",
            NEIGHBOURS + 1
        )));
    }
    let m = d.m();
    let mut neighbours = Vec::with_capacity(n);
    let mut means = Matrix::zeros(n, m);
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        let row = t.sq.row(i);
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let picked = [order[0], order[1], order[2]];
        neighbours.push(picked);
        for j in 0..m {
            let s: f64 = picked.iter().map(|&p| d.features.get(p, j)).sum();
            means.set(i, j, s / NEIGHBOURS as f64);
        }
    }
    Ok(NeighbourCache { neighbours, means })
}

/// First principal component of the feature matrix via power iteration on the
/// centered covariance, unit norm, sign fixed so the largest-magnitude entry
/// is positive. The start vector comes from a pinned stream, so the result is
/// reproducible; datasets with no dominant direction still give a fixed
/// answer.
pub fn first_principal_component(d: &Dataset) -> Result<Vec<f64>> {
    use rand::Rng;

    let (n, m) = (d.n(), d.m());
    let mut centered = d.features.clone();
    for j in 0..m {
        let mean: f64 = (0..n).map(|i| centered.get(i, j)).sum::<f64>() / n as f64;
        for i in 0..n {
            let v = centered.get(i, j) - mean;
            centered.set(i, j, v);
        }
    }
    let scale = 1.0 / (n.max(2) - 1) as f64;

    // y = cov * v without forming the m x m covariance.
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut t = vec![0.0; n];
        for i in 0..n {
            let row = centered.row(i);
            t[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        let mut y = vec![0.0; m];
        for i in 0..n {
            let row = centered.row(i);
            for j in 0..m {
                y[j] += row[j] * t[i];
            }
        }
        for yj in &mut y {
            *yj *= scale;
        }
        y
    };

    let mut rng = ChaCha8Rng::seed_from_u64(PC_START_SEED);
    let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = (v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    for x in &mut v {
        *x /= norm;
    }

    let mut converged = false;
    for _ in 0..POWER_ITER_MAX {
        let w = apply(&v);
        let norm_w = (w.iter().map(|x| x * x).sum::<f64>()).sqrt();
        if norm_w == 0.0 {
            // Zero covariance: every direction is an eigenvector.
            converged = true;
            break;
        }
        let next: Vec<f64> = w.iter().map(|x| x / norm_w).collect();
        let drift = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        if drift <= POWER_ITER_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::PowerIterationStalled {
            iterations: POWER_ITER_MAX,
        });
    }

    let mut pivot = 0;
    for j in 1..m {
        if v[j].abs() > v[pivot].abs() {
            pivot = j;
        }
    }
    if v[pivot] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    Ok(v)
}

/// Integer likelihoods for terminal sampling. The ceil(sqrt(m)) features with
/// the largest principal-component magnitude are boosted; constants and the
/// zero terminal share a likelihood that grows with the feature count.
#[derive(Debug, Clone)]
pub struct TerminalWeights {
    feature: Vec<u32>,
    neighbour: Vec<u32>,
    constant: u32,
    zero: u32,
    boosted: Vec<usize>,
}

pub fn build_terminal_weights(d: &Dataset, pc: &[f64]) -> TerminalWeights {
    let m = d.m();
    assert_eq!(pc.len(), m);
    let j = (m as f64).sqrt().ceil() as usize;
    let mut ranked: Vec<usize> = (0..m).collect();
    ranked.sort_by(|&a, &b| pc[b].abs().total_cmp(&pc[a].abs()).then(a.cmp(&b)));
    let mut boosted: Vec<usize> = ranked.into_iter().take(j).collect();
    boosted.sort_unstable();

    let mut feature = vec![1u32; m];
    for &idx in &boosted {
        feature[idx] = 1 + j as u32;
    }
    let erc = m.div_ceil(10) as u32;
    TerminalWeights {
        feature,
        neighbour: vec![1; m],
        constant: erc,
        zero: erc,
        boosted,
    }
}

impl TerminalWeights {
    pub fn m(&self) -> usize {
        self.feature.len()
    }

    pub fn feature_likelihood(&self, i: usize) -> u32 {
        self.feature[i]
    }

    pub fn neighbour_likelihood(&self, i: usize) -> u32 {
        self.neighbour[i]
    }

    pub fn constant_likelihood(&self) -> u32 {
        self.constant
    }

    pub fn zero_likelihood(&self) -> u32 {
        self.zero
    }

    pub fn boosted_features(&self) -> &[usize] {
        &self.boosted
    }

    pub fn total_mass(&self, with_zero: bool) -> u64 {
        let base: u64 = self.feature.iter().map(|&w| w as u64).sum::<u64>()
            + self.neighbour.iter().map(|&w| w as u64).sum::<u64>()
            + self.constant as u64;
        base + if with_zero { self.zero as u64 } else { 0 }
    }
}

#[cfg(test)]
impl TerminalWeights {
    /// Test fixture bypassing the principal-component ranking.
    pub(crate) fn synthetic(m: usize, boosted: Vec<usize>) -> Self {
        let j = boosted.len() as u32;
        let mut feature = vec![1u32; m];
        for &idx in &boosted {
            feature[idx] = 1 + j;
        }
        let erc = m.div_ceil(10) as u32;
        Self {
            feature,
            neighbour: vec![1; m],
            constant: erc,
            zero: erc,
            boosted,
        }
    }
}
