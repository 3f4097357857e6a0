//! Particle-swarm refinement of the constants inside a finished individual.
//! Each constant over both trees gets one dimension holding a delta from its
//! original value. Particle 0 starts at the all-zero delta, so the incumbent
//! cost is always among the evaluated points and the returned cost can never
//! exceed it.

use crate::config::SearchConfig;
use crate::data::{Dataset, NeighbourCache};
use crate::error::{Error, Result};
use crate::gp::{
    canonical_signature, eval_individual, quantize_constant, Individual, Node, NodeKind, Tree,
};
use crate::moead::{Archive, FrontEntry, ObjectivePair};
use crate::tsne::{kl_cost, AffinityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const INERTIA: f64 = 0.7298;
pub const COGNITIVE: f64 = 1.496_18;
pub const SOCIAL: f64 = 1.496_18;
pub const INIT_POSITION_RANGE: f64 = 0.15;
pub const VELOCITY_LIMIT: f64 = 0.05;

/// Constant values in pre-order, x tree then y tree; the dimension order of
/// every delta vector.
pub fn extract_constants(ind: &Individual) -> Vec<f64> {
    fn walk(n: &Node, out: &mut Vec<f64>) {
        if let NodeKind::Constant(v) = n.kind {
            out.push(v);
        }
        for c in &n.children {
            walk(c, out);
        }
    }
    let mut out = Vec::new();
    walk(&ind.tree_x.root, &mut out);
    walk(&ind.tree_y.root, &mut out);
    out
}

/// Shifts each constant by its delta (re-quantized), leaving structure
/// untouched. Shifted constants may leave the creation range.
pub fn apply_deltas(ind: &Individual, deltas: &[f64]) -> Result<Individual> {
    let expected = extract_constants(ind).len();
    if deltas.len() != expected {
        return Err(Error::DeltaLengthMismatch {
            expected,
            found: deltas.len(),
        });
    }
    fn rebuild(n: &Node, it: &mut std::slice::Iter<'_, f64>) -> Node {
        let kind = match &n.kind {
            NodeKind::Constant(v) => {
                NodeKind::Constant(quantize_constant(v + it.next().expect("length checked")))
            }
            k => k.clone(),
        };
        Node {
            kind,
            children: n.children.iter().map(|c| rebuild(c, it)).collect(),
        }
    }
    let mut it = deltas.iter();
    let tx = Tree::new(rebuild(&ind.tree_x.root, &mut it));
    let ty = Tree::new(rebuild(&ind.tree_y.root, &mut it));
    Ok(Individual::new(tx, ty))
}

/// Global-best PSO over an arbitrary objective. Positions are only bounded
/// at initialization; velocities are clamped componentwise forever. Particle
/// updates draw from one serial RNG while objective evaluations run in
/// parallel in index order, so the result is thread-count independent.
pub fn minimize(
    dim: usize,
    objective: impl Fn(&[f64]) -> f64 + Sync,
    particles: usize,
    iterations: usize,
    seed: u64,
) -> (Vec<f64>, f64) {
    minimize_observed(dim, objective, particles, iterations, seed, |_| {})
}

fn minimize_observed(
    dim: usize,
    objective: impl Fn(&[f64]) -> f64 + Sync,
    particles: usize,
    iterations: usize,
    seed: u64,
    mut observe_velocities: impl FnMut(&[Vec<f64>]),
) -> (Vec<f64>, f64) {
    assert!(particles >= 1, "need at least one particle");
    if dim == 0 {
        return (Vec::new(), objective(&[]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<Vec<f64>> = (0..particles)
        .map(|i| {
            if i == 0 {
                vec![0.0; dim]
            } else {
                (0..dim)
                    .map(|_| rng.gen_range(-INIT_POSITION_RANGE..=INIT_POSITION_RANGE))
                    .collect()
            }
        })
        .collect();
    let mut vel: Vec<Vec<f64>> = (0..particles)
        .map(|_| {
            (0..dim)
                .map(|_| rng.gen_range(-VELOCITY_LIMIT..=VELOCITY_LIMIT))
                .collect()
        })
        .collect();

    let eval_all =
        |pos: &[Vec<f64>]| -> Vec<f64> { pos.par_iter().map(|x| objective(x)).collect() };

    let mut pbest_cost = eval_all(&pos);
    let mut pbest_pos = pos.clone();
    let mut gbest_cost = pbest_cost[0];
    let mut gbest_pos = pbest_pos[0].clone();
    for i in 1..particles {
        if pbest_cost[i] < gbest_cost {
            gbest_cost = pbest_cost[i];
            gbest_pos = pbest_pos[i].clone();
        }
    }

    for _ in 0..iterations {
        for i in 0..particles {
            for k in 0..dim {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let pull = INERTIA * vel[i][k]
                    + COGNITIVE * r1 * (pbest_pos[i][k] - pos[i][k])
                    + SOCIAL * r2 * (gbest_pos[k] - pos[i][k]);
                vel[i][k] = pull.clamp(-VELOCITY_LIMIT, VELOCITY_LIMIT);
                pos[i][k] += vel[i][k];
            }
        }
        observe_velocities(&vel);
        let costs = eval_all(&pos);
        for i in 0..particles {
            if costs[i] < pbest_cost[i] {
                pbest_cost[i] = costs[i];
                pbest_pos[i] = pos[i].clone();
            }
        }
        for i in 0..particles {
            if pbest_cost[i] < gbest_cost {
                gbest_cost = pbest_cost[i];
                gbest_pos = pbest_pos[i].clone();
            }
        }
    }
    (gbest_pos, gbest_cost)
}

/// Tunes one individual's constants against the embedding cost. Returns the
/// delta-applied individual at the swarm's global best together with that
/// cost, which never exceeds the incumbent's.
pub fn pso_tune(
    ind: &Individual,
    p: &AffinityMatrix,
    d: &Dataset,
    nc: &NeighbourCache,
    particles: usize,
    iterations: usize,
    seed: u64,
) -> (Individual, f64) {
    let dim = extract_constants(ind).len();
    let objective = |deltas: &[f64]| {
        let cand = apply_deltas(ind, deltas).expect("dimension is fixed");
        kl_cost(p, &eval_individual(&cand, d, nc))
    };
    let (best, cost) = minimize(dim, objective, particles, iterations, seed);
    let tuned = apply_deltas(ind, &best).expect("dimension is fixed");
    (tuned, cost)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneRecord {
    pub signature_before: String,
    pub signature_after: String,
    pub cost_before: f64,
    pub cost_after: f64,
    pub complexity: usize,
}

/// Tunes every archive entry independently (complexity order, one derived
/// seed per entry) and rebuilds the archive, since improved costs can create
/// new dominance relations.
pub fn tune_front(
    a: &Archive,
    p: &AffinityMatrix,
    d: &Dataset,
    nc: &NeighbourCache,
    cfg: &SearchConfig,
) -> (Archive, Vec<TuneRecord>) {
    let mut entries = Vec::with_capacity(a.len());
    let mut records = Vec::with_capacity(a.len());
    for (i, e) in a.sorted_entries().into_iter().enumerate() {
        let seed = crate::derive_seed(cfg.seed, 100 + i as u64);
        let (tuned, cost) = pso_tune(
            &e.individual,
            p,
            d,
            nc,
            cfg.pso_particles,
            cfg.pso_iterations,
            seed,
        );
        debug_assert!(cost <= e.objectives.cost);
        let signature = canonical_signature(&tuned);
        records.push(TuneRecord {
            signature_before: e.signature.clone(),
            signature_after: signature.clone(),
            cost_before: e.objectives.cost,
            cost_after: cost,
            complexity: e.objectives.complexity,
        });
        entries.push(FrontEntry {
            individual: tuned,
            objectives: ObjectivePair {
                cost,
                complexity: e.objectives.complexity,
            },
            signature,
        });
    }
    (Archive::from_entries(entries), records)
}
