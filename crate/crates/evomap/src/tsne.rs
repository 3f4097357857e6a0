//! Neighbourhood-preservation objective: Gaussian input affinities with
//! per-row bandwidths found by binary search on perplexity, Student-t output
//! affinities, the KL cost between them, its analytic gradient, and a plain
//! gradient-descent reference embedding used as a quality baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::DistanceTable;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Clamp applied to p and q inside logarithms only; stored matrices stay
/// exactly normalized.
const PROB_FLOOR: f64 = 1e-12;

const SIGMA_LO: f64 = 1e-10;
const SIGMA_HI: f64 = 1e10;
const SEARCH_ITERS: usize = 100;
const PERPLEXITY_TOL: f64 = 1e-3;

const DESCENT_ITERS: usize = 1000;
const LEARNING_RATE: f64 = 200.0;
const MOMENTUM_EARLY: f64 = 0.5;
const MOMENTUM_LATE: f64 = 0.8;
const MOMENTUM_SWITCH: usize = 250;
const EXAGGERATION: f64 = 4.0;
const EXAGGERATION_ITERS: usize = 100;
/// Initial coordinates are drawn from a zero-mean normal with this variance.
const INIT_VARIANCE: f64 = 1e-4;

/// A 2-D placement of every instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: Vec<[f64; 2]>,
}

impl Embedding {
    pub fn new(coords: Vec<[f64; 2]>) -> Self {
        debug_assert!(
            coords.iter().all(|c| c[0].is_finite() && c[1].is_finite()),
            "non-finite coordinate"
        );
        Self { coords }
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }
}

/// Symmetrized input affinities with the bandwidths that produced them.
#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    pub p: Matrix,
    pub perplexity: f64,
    pub sigmas: Vec<f64>,
    /// Rows whose bandwidth search ended without meeting the tolerance.
    pub unconverged_rows: Vec<usize>,
}

/// Gaussian conditional distribution of row `i` over all other rows at a
/// fixed bandwidth. Exponents are shifted by their maximum before
/// exponentiation. A bandwidth too extreme to represent falls back to the
/// uniform distribution, reported by the flag.
pub fn conditional_row(sq_dist_row: &[f64], i: usize, sigma: f64) -> (Vec<f64>, bool) {
    let n = sq_dist_row.len();
    let mut probs = vec![0.0; n];
    if n < 2 {
        return (probs, true);
    }
    let beta = 1.0 / (2.0 * sigma * sigma);

    let uniform = |probs: &mut Vec<f64>| {
        let u = 1.0 / (n - 1) as f64;
        for (j, p) in probs.iter_mut().enumerate() {
            *p = if j == i { 0.0 } else { u };
        }
    };

    if !beta.is_finite() {
        uniform(&mut probs);
        return (probs, true);
    }

    let mut e_max = f64::NEG_INFINITY;
    for (j, &d) in sq_dist_row.iter().enumerate() {
        if j != i {
            e_max = e_max.max(-d * beta);
        }
    }
    if !e_max.is_finite() {
        uniform(&mut probs);
        return (probs, true);
    }

    let mut sum = 0.0;
    for (j, &d) in sq_dist_row.iter().enumerate() {
        if j == i {
            continue;
        }
        let v = (-d * beta - e_max).exp();
        probs[j] = v;
        sum += v;
    }
    for p in &mut probs {
        *p /= sum;
    }
    (probs, false)
}

fn perplexity_of(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.exp2()
}

#[derive(Debug, Clone, Copy)]
pub struct SigmaFit {
    pub sigma: f64,
    pub perplexity: f64,
    pub converged: bool,
}

/// Binary search for the bandwidth whose conditional distribution has the
/// target perplexity. The target must be achievable: strictly below n - 1,
/// the perplexity of the uniform distribution.
pub fn perplexity_search(sq_dist_row: &[f64], i: usize, target: f64) -> Result<SigmaFit> {
    let n = sq_dist_row.len();
    if !(target > 0.0) || target >= (n - 1) as f64 {
        return Err(Error::PerplexityTooLarge {
            perplexity: target,
            n,
        });
    }
    let mut lo = SIGMA_LO;
    let mut hi = SIGMA_HI;
    let mut best = SigmaFit {
        sigma: SIGMA_HI,
        perplexity: f64::NAN,
        converged: false,
    };
    for _ in 0..SEARCH_ITERS {
        let mid = 0.5 * (lo + hi);
        let (probs, _) = conditional_row(sq_dist_row, i, mid);
        let perp = perplexity_of(&probs);
        best = SigmaFit {
            sigma: mid,
            perplexity: perp,
            converged: (perp - target).abs() <= PERPLEXITY_TOL,
        };
        if best.converged {
            return Ok(best);
        }
        if perp > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

/// Symmetrized affinities: conditional rows at fitted bandwidths, averaged
/// with their transpose and divided by 2n. Sums to 1, symmetric, zero
/// diagonal.
pub fn joint_p(distances: &DistanceTable, target_perplexity: f64) -> Result<AffinityMatrix> {
    use rayon::prelude::*;

    let n = distances.sq.rows();
    if !(target_perplexity > 0.0) || target_perplexity >= (n - 1) as f64 {
        return Err(Error::PerplexityTooLarge {
            perplexity: target_perplexity,
            n,
        });
    }

    let fitted: Vec<(Vec<f64>, SigmaFit)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = distances.sq.row(i);
            let fit =
                perplexity_search(row, i, target_perplexity).expect("precondition checked above");
            let (probs, _) = conditional_row(row, i, fit.sigma);
            (probs, fit)
        })
        .collect();

    let mut p = Matrix::zeros(n, n);
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (fitted[i].0[j] + fitted[j].0[i]) * scale;
            p.set(i, j, v);
            p.set(j, i, v);
        }
    }
    let sigmas = fitted.iter().map(|(_, f)| f.sigma).collect();
    let unconverged_rows = fitted
        .iter()
        .enumerate()
        .filter(|(_, (_, f))| !f.converged)
        .map(|(i, _)| i)
        .collect();
    Ok(AffinityMatrix {
        p,
        perplexity: target_perplexity,
        sigmas,
        unconverged_rows,
    })
}

/// Student-t kernel values (1 + d^2)^-1 for every pair, plus their total.
fn student_kernel(e: &Embedding) -> (Matrix, f64) {
    let n = e.n();
    let coords = &e.coords;
    let mut num = Matrix::zeros(n, n);
    num.for_each_row_mut(|i, row| {
        let [xi, yi] = coords[i];
        for (j, cell) in row.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let dx = xi - coords[j][0];
            let dy = yi - coords[j][1];
            *cell = 1.0 / (1.0 + dx * dx + dy * dy);
        }
    });
    let z = num.fold_rows(|_, row| row.iter().sum());
    (num, z)
}

/// Output affinities under the Student-t kernel, normalized over all ordered
/// pairs. A degenerate kernel (all pairs infinitely far) falls back to
/// uniform.
pub fn joint_q(e: &Embedding) -> Matrix {
    let n = e.n();
    let (mut num, z) = student_kernel(e);
    if z > 0.0 {
        num.for_each_row_mut(|_, row| {
            for cell in row {
                *cell /= z;
            }
        });
        num
    } else {
        let u = 1.0 / (n * (n - 1)) as f64;
        num.for_each_row_mut(|i, row| {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = if i == j { 0.0 } else { u };
            }
        });
        num
    }
}

/// KL divergence sum p log(p/q) over all ordered pairs. Terms with p = 0
/// contribute nothing; inside the log both arguments are clamped at the
/// floor, which keeps the cost finite for vanishing q.
pub fn kl_divergence(p: &Matrix, q: &Matrix) -> f64 {
    p.fold_rows(|i, row| {
        let qrow = q.row(i);
        let mut acc = 0.0;
        for (j, &pij) in row.iter().enumerate() {
            if pij > 0.0 {
                acc += pij * (pij.max(PROB_FLOOR) / qrow[j].max(PROB_FLOOR)).ln();
            }
        }
        acc
    })
}

/// Embedding cost: KL divergence from the input affinities to the Student-t
/// affinities of `e`.
pub fn kl_cost(p: &AffinityMatrix, e: &Embedding) -> f64 {
    kl_divergence(&p.p, &joint_q(e))
}

/// Analytic gradient of `kl_cost` with respect to the coordinates.
pub fn tsne_gradient(p: &AffinityMatrix, e: &Embedding) -> Vec<[f64; 2]> {
    let (num, z) = student_kernel(e);
    gradient_inner(&p.p, &num, z, e)
}

fn gradient_inner(p: &Matrix, num: &Matrix, z: f64, e: &Embedding) -> Vec<[f64; 2]> {
    use rayon::prelude::*;
    let n = e.n();
    let coords = &e.coords;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let prow = p.row(i);
            let nrow = num.row(i);
            let [xi, yi] = coords[i];
            let mut gx = 0.0;
            let mut gy = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let qij = if z > 0.0 { nrow[j] / z } else { 0.0 };
                let w = (prow[j] - qij) * nrow[j];
                gx += w * (xi - coords[j][0]);
                gy += w * (yi - coords[j][1]);
            }
            [4.0 * gx, 4.0 * gy]
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub embedding: Embedding,
    pub cost: f64,
}

/// Returns coordinates drawn from the descent initializer: zero-mean normal
/// with tiny variance.
pub fn random_embedding(n: usize, seed: u64) -> Embedding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_VARIANCE.sqrt()).unwrap();
    Embedding::new(
        (0..n)
            .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect(),
    )
}

/// Free-coordinate reference optimizer: momentum gradient descent on
/// `kl_cost` with early exaggeration. Its final cost anchors the quality axis
/// for evolved mappings.
pub fn baseline_tsne(p: &AffinityMatrix, seed: u64) -> Result<BaselineResult> {
    let n = p.p.rows();
    let mut y = random_embedding(n, seed);
    let mut velocity = vec![[0.0f64; 2]; n];

    let mut p_exaggerated = p.p.clone();
    p_exaggerated.for_each_row_mut(|_, row| {
        for v in row {
            *v *= EXAGGERATION;
        }
    });

    for iter in 0..DESCENT_ITERS {
        let p_eff = if iter < EXAGGERATION_ITERS {
            &p_exaggerated
        } else {
            &p.p
        };
        let (num, z) = student_kernel(&y);
        let grad = gradient_inner(p_eff, &num, z, &y);
        let momentum = if iter < MOMENTUM_SWITCH {
            MOMENTUM_EARLY
        } else {
            MOMENTUM_LATE
        };
        for i in 0..n {
            for k in 0..2 {
                velocity[i][k] = momentum * velocity[i][k] - LEARNING_RATE * grad[i][k];
                y.coords[i][k] += velocity[i][k];
            }
            if !y.coords[i][0].is_finite() || !y.coords[i][1].is_finite() {
                return Err(Error::DescentDiverged { iteration: iter });
            }
        }
    }
    let cost = kl_cost(p, &y);
    if !cost.is_finite() {
        return Err(Error::DescentDiverged {
            iteration: DESCENT_ITERS,
        });
    }
    Ok(BaselineResult { embedding: y, cost })
}
