//! Decomposition-based bi-objective search over (embedding cost, expression
//! size). The population is a line of scalar subproblems with evenly spaced
//! weights; offspring replace neighbourhood incumbents under a Tchebycheff
//! aggregate with an adaptive ideal point. Every evaluated individual is
//! offered to an unbounded non-dominated archive, so the archive equals the
//! non-dominated filter of the whole evaluation history.
//!
//! Breeding is serial (one RNG stream), evaluation is batched and pure, and
//! all parallel reductions are index-ordered: a run is reproducible for any
//! thread count.

use crate::config::SearchConfig;
use crate::data::{Dataset, NeighbourCache, TerminalWeights};
use crate::error::{Error, Result};
use crate::gp::{
    canonical_signature, complexity, crossover, eval_individual, mutate, random_individual,
    Individual, TerminalSampler,
};
use crate::tsne::{kl_cost, random_embedding, AffinityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, HashSet};

pub const NEIGHBOURHOOD_SIZE: usize = 15;
pub const REPLACEMENT_CAP: usize = 2;
pub const COST_SCALE_TOP: f64 = 4.0;
pub const COMPLEXITY_CEILING: f64 = 4000.0;
const BREED_ROUNDS: usize = 10;
const INIT_RAMP_TOP: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectivePair {
    pub cost: f64,
    pub complexity: usize,
}

/// Strict Pareto dominance on raw objectives, minimizing both.
pub fn dominates(a: &ObjectivePair, b: &ObjectivePair) -> bool {
    let no_worse = a.cost <= b.cost && a.complexity <= b.complexity;
    let better = a.cost < b.cost || a.complexity < b.complexity;
    no_worse && better
}

/// Maps raw objectives into the fixed aggregation ranges: cost to [0,4]
/// against a per-run ceiling, node count to [0,4000].
#[derive(Debug, Clone, Copy)]
pub struct Scaling {
    pub cost_ceiling: f64,
}

impl Scaling {
    /// The ceiling is the cost of an untrained random embedding, floored at
    /// the top of the scaled range so early costs stay inside it.
    pub fn from_random_baseline(random_cost: f64) -> Self {
        Self {
            cost_ceiling: random_cost.max(COST_SCALE_TOP),
        }
    }

    pub fn scale(&self, o: &ObjectivePair) -> [f64; 2] {
        [
            COST_SCALE_TOP * (o.cost / self.cost_ceiling).clamp(0.0, 1.0),
            COMPLEXITY_CEILING * (o.complexity as f64 / COMPLEXITY_CEILING).clamp(0.0, 1.0),
        ]
    }
}

/// Evenly spaced weight pairs ((N-1-k)/(N-1), k/(N-1)) covering the simplex
/// from pure cost to pure complexity.
pub fn generate_weights(n: usize) -> Vec<[f64; 2]> {
    assert!(n >= 2, "need at least two subproblems");
    let span = (n - 1) as f64;
    (0..n)
        .map(|k| [(n - 1 - k) as f64 / span, k as f64 / span])
        .collect()
}

/// For each subproblem, the `t` nearest subproblem indices by weight
/// distance, self included, ties broken by index.
pub fn build_neighbourhoods(weights: &[[f64; 2]], t: usize) -> Vec<Vec<usize>> {
    let t = t.min(weights.len());
    (0..weights.len())
        .map(|i| {
            let mut idx: Vec<usize> = (0..weights.len()).collect();
            idx.sort_by(|&a, &b| {
                let da = (weights[i][0] - weights[a][0]).abs();
                let db = (weights[i][0] - weights[b][0]).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            });
            idx.truncate(t);
            idx
        })
        .collect()
}

/// Tchebycheff aggregate max_i w_i * |s_i - ideal_i|.
pub fn aggregate(scaled: [f64; 2], weight: [f64; 2], ideal: [f64; 2]) -> f64 {
    let a = weight[0] * (scaled[0] - ideal[0]).abs();
    let b = weight[1] * (scaled[1] - ideal[1]).abs();
    a.max(b)
}

#[derive(Debug, Clone)]
pub struct FrontEntry {
    pub individual: Individual,
    pub objectives: ObjectivePair,
    pub signature: String,
}

/// Unbounded non-dominated set with unique signatures. Entries with equal
/// objective pairs coexist; a dominated insert is rejected and an insert
/// evicts everything it dominates.
#[derive(Debug, Clone, Default)]
pub struct Archive {
    entries: Vec<FrontEntry>,
    signatures: HashSet<String>,
}

impl Archive {
    pub fn insert(&mut self, e: FrontEntry) -> bool {
        if self.signatures.contains(&e.signature) {
            return false;
        }
        if self
            .entries
            .iter()
            .any(|x| dominates(&x.objectives, &e.objectives))
        {
            return false;
        }
        let mut kept = Vec::with_capacity(self.entries.len() + 1);
        for x in self.entries.drain(..) {
            if dominates(&e.objectives, &x.objectives) {
                self.signatures.remove(&x.signature);
            } else {
                kept.push(x);
            }
        }
        self.signatures.insert(e.signature.clone());
        kept.push(e);
        self.entries = kept;
        true
    }

    pub fn from_entries(entries: impl IntoIterator<Item = FrontEntry>) -> Self {
        let mut a = Self::default();
        for e in entries {
            a.insert(e);
        }
        a
    }

    pub fn entries(&self) -> &[FrontEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries ordered by (complexity, cost, signature).
    pub fn sorted_entries(&self) -> Vec<&FrontEntry> {
        let mut v: Vec<&FrontEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| {
            a.objectives
                .complexity
                .cmp(&b.objectives.complexity)
                .then(a.objectives.cost.total_cmp(&b.objectives.cost))
                .then(a.signature.cmp(&b.signature))
        });
        v
    }

    pub fn min_cost_entry(&self) -> Option<&FrontEntry> {
        self.entries.iter().min_by(|a, b| {
            a.objectives
                .cost
                .total_cmp(&b.objectives.cost)
                .then(a.objectives.complexity.cmp(&b.objectives.complexity))
                .then(a.signature.cmp(&b.signature))
        })
    }

    pub fn min_complexity_entry(&self) -> Option<&FrontEntry> {
        self.entries.iter().min_by(|a, b| {
            a.objectives
                .complexity
                .cmp(&b.objectives.complexity)
                .then(a.objectives.cost.total_cmp(&b.objectives.cost))
                .then(a.signature.cmp(&b.signature))
        })
    }

    pub fn is_mutually_non_dominated(&self) -> bool {
        for (i, a) in self.entries.iter().enumerate() {
            for b in &self.entries[i + 1..] {
                if dominates(&a.objectives, &b.objectives)
                    || dominates(&b.objectives, &a.objectives)
                {
                    return false;
                }
            }
        }
        true
    }
}

/// Signature-keyed cost store. Disabling it turns every lookup into a miss
/// without changing any result, which is how cache transparency is tested.
#[derive(Debug, Clone)]
pub struct FitnessCache {
    map: HashMap<String, f64>,
    enabled: bool,
}

impl FitnessCache {
    pub fn new(enabled: bool) -> Self {
        Self {
            map: HashMap::new(),
            enabled,
        }
    }

    pub fn lookup(&self, sig: &str) -> Option<f64> {
        if self.enabled {
            self.map.get(sig).copied()
        } else {
            None
        }
    }

    pub fn insert(&mut self, sig: String, cost: f64) {
        if self.enabled {
            self.map.insert(sig, cost);
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SearchStats {
    pub embedding_evaluations: u64,
    pub cache_hits: u64,
    pub unique_signatures: u64,
    pub crossover_events: u64,
    pub mutation_events: u64,
    pub breeding_exhaustions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenStat {
    pub generation: usize,
    pub best_cost: f64,
    pub archive_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub signature: String,
    pub cost: f64,
    pub complexity: usize,
}

pub struct SearchOutcome {
    pub archive: Archive,
    pub telemetry: Vec<GenStat>,
    pub stats: SearchStats,
    pub eval_log: Option<Vec<EvalRecord>>,
    pub scaling: Scaling,
}

/// Produces up to two offspring whose signatures are new with respect to
/// `seen` and to each other. Each round draws crossover against mutation at
/// the configured rate and yields two candidates (a crossover pair, or one
/// mutant per parent). After ten fruitless rounds a slot is filled with a
/// randomly chosen parent copy.
pub fn breed_unique(
    parents: (&Individual, &Individual),
    seen: &HashSet<String>,
    sampler: &TerminalSampler,
    crossover_rate: f64,
    rng: &mut impl Rng,
    stats: &mut SearchStats,
) -> Vec<Individual> {
    let mut out: Vec<Individual> = Vec::with_capacity(2);
    let mut out_sigs: HashSet<String> = HashSet::with_capacity(2);
    for _ in 0..BREED_ROUNDS {
        if out.len() == 2 {
            break;
        }
        let pair = if rng.gen_bool(crossover_rate) {
            stats.crossover_events += 1;
            let (a, b) = crossover(parents.0, parents.1, rng);
            [a, b]
        } else {
            stats.mutation_events += 1;
            [
                mutate(parents.0, sampler, rng),
                mutate(parents.1, sampler, rng),
            ]
        };
        for cand in pair {
            if out.len() == 2 {
                break;
            }
            let sig = canonical_signature(&cand);
            if !seen.contains(&sig) && !out_sigs.contains(&sig) {
                out_sigs.insert(sig);
                out.push(cand);
            }
        }
    }
    while out.len() < 2 {
        stats.breeding_exhaustions += 1;
        let copy = if rng.gen_bool(0.5) {
            parents.0
        } else {
            parents.1
        };
        out.push(copy.clone());
    }
    out
}

/// Cost by signature lookup, falling back to one embedding evaluation on a
/// miss; the node count is always recomputed.
pub fn evaluate_with_cache(
    ind: &Individual,
    cache: &mut FitnessCache,
    p: &AffinityMatrix,
    d: &Dataset,
    nc: &NeighbourCache,
    stats: &mut SearchStats,
) -> Result<ObjectivePair> {
    let sig = canonical_signature(ind);
    let cost = match cache.lookup(&sig) {
        Some(c) => {
            stats.cache_hits += 1;
            c
        }
        None => {
            stats.embedding_evaluations += 1;
            let e = eval_individual(ind, d, nc);
            let c = kl_cost(p, &e);
            if !c.is_finite() {
                return Err(Error::NonFiniteCost { signature: sig });
            }
            cache.insert(sig.clone(), c);
            c
        }
    };
    Ok(ObjectivePair {
        cost,
        complexity: complexity(ind),
    })
}

enum CostPlan {
    Known(f64),
    FromEval(usize),
}

/// Batched form of `evaluate_with_cache` with identical call-order
/// semantics: a serial pass resolves hits and schedules first occurrences,
/// the misses evaluate in parallel in index order, then results merge back.
fn batch_evaluate(
    batch: &[(String, Individual)],
    cache: &mut FitnessCache,
    p: &AffinityMatrix,
    d: &Dataset,
    nc: &NeighbourCache,
    stats: &mut SearchStats,
    eval_log: &mut Option<Vec<EvalRecord>>,
) -> Result<Vec<ObjectivePair>> {
    use rayon::prelude::*;

    let mut plan: Vec<CostPlan> = Vec::with_capacity(batch.len());
    let mut to_eval: Vec<usize> = Vec::new();
    let mut scheduled: HashMap<&str, usize> = HashMap::new();
    for (i, (sig, _)) in batch.iter().enumerate() {
        if let Some(c) = cache.lookup(sig) {
            stats.cache_hits += 1;
            plan.push(CostPlan::Known(c));
        } else if let Some(&k) = scheduled.get(sig.as_str()) {
            // With the cache on, a serial pass would have stored the first
            // occurrence before reaching this one.
            stats.cache_hits += 1;
            plan.push(CostPlan::FromEval(k));
        } else {
            let k = to_eval.len();
            to_eval.push(i);
            if cache.enabled {
                scheduled.insert(sig, k);
            }
            plan.push(CostPlan::FromEval(k));
        }
    }
    stats.embedding_evaluations += to_eval.len() as u64;

    let costs: Vec<f64> = to_eval
        .par_iter()
        .map(|&i| kl_cost(p, &eval_individual(&batch[i].1, d, nc)))
        .collect();

    for (k, &i) in to_eval.iter().enumerate() {
        if !costs[k].is_finite() {
            return Err(Error::NonFiniteCost {
                signature: batch[i].0.clone(),
            });
        }
        cache.insert(batch[i].0.clone(), costs[k]);
    }

    let mut out = Vec::with_capacity(batch.len());
    for ((sig, ind), pl) in batch.iter().zip(plan) {
        let cost = match pl {
            CostPlan::Known(c) => c,
            CostPlan::FromEval(k) => costs[k],
        };
        let pair = ObjectivePair {
            cost,
            complexity: complexity(ind),
        };
        if let Some(log) = eval_log.as_mut() {
            log.push(EvalRecord {
                signature: sig.clone(),
                cost,
                complexity: pair.complexity,
            });
        }
        out.push(pair);
    }
    Ok(out)
}

struct Member {
    ind: Individual,
    obj: ObjectivePair,
}

/// Full search loop: ramped initial population, then per generation a serial
/// breeding pass over all subproblems, one batched evaluation, and a serial
/// update pass (ideal point, archive, capped neighbourhood replacement).
/// Breeding a whole generation against one population snapshot keeps the
/// offspring pool diverse; the uniqueness pressure of `seen` punishes faster
/// takeover schedules.
pub fn run_search(
    cfg: &SearchConfig,
    d: &Dataset,
    nc: &NeighbourCache,
    tw: &TerminalWeights,
    p: &AffinityMatrix,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let n_pop = cfg.population;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(cfg.seed, 0));
    let scale_probe = random_embedding(d.n(), crate::derive_seed(cfg.seed, 1));
    let scaling = Scaling::from_random_baseline(kl_cost(p, &scale_probe));
    let sampler = TerminalSampler::new(tw);
    let ramp = (
        cfg.min_depth,
        INIT_RAMP_TOP.min(cfg.max_depth).max(cfg.min_depth),
    );

    let weights = generate_weights(n_pop);
    let neighbourhoods = build_neighbourhoods(&weights, NEIGHBOURHOOD_SIZE);

    let mut cache = FitnessCache::new(cfg.use_cache);
    let mut stats = SearchStats::default();
    let mut eval_log: Option<Vec<EvalRecord>> = cfg.record_evaluations.then(Vec::new);
    let mut archive = Archive::default();
    let mut ideal = [f64::INFINITY; 2];
    let mut seen: HashSet<String> = HashSet::new();

    let init: Vec<(String, Individual)> = (0..n_pop)
        .map(|_| {
            let ind = random_individual(ramp, &sampler, &mut rng);
            (canonical_signature(&ind), ind)
        })
        .collect();
    for (sig, _) in &init {
        seen.insert(sig.clone());
    }
    let objs = batch_evaluate(&init, &mut cache, p, d, nc, &mut stats, &mut eval_log)?;
    let mut population: Vec<Member> = init
        .into_iter()
        .zip(objs)
        .map(|((sig, ind), obj)| {
            let s = scaling.scale(&obj);
            ideal[0] = ideal[0].min(s[0]);
            ideal[1] = ideal[1].min(s[1]);
            archive.insert(FrontEntry {
                individual: ind.clone(),
                objectives: obj,
                signature: sig,
            });
            Member { ind, obj }
        })
        .collect();

    let mut telemetry = Vec::with_capacity(cfg.generations);
    for gen in 0..cfg.generations {
        if let Some(budget) = cfg.eval_budget {
            if stats.embedding_evaluations >= budget {
                break;
            }
        }

        let mut owners: Vec<usize> = Vec::with_capacity(2 * n_pop);
        let mut batch: Vec<(String, Individual)> = Vec::with_capacity(2 * n_pop);
        for i in 0..n_pop {
            let nb = &neighbourhoods[i];
            let pa = nb[rng.gen_range(0..nb.len())];
            let pb = loop {
                let c = nb[rng.gen_range(0..nb.len())];
                if c != pa {
                    break c;
                }
            };
            let kids = breed_unique(
                (&population[pa].ind, &population[pb].ind),
                &seen,
                &sampler,
                cfg.crossover_rate,
                &mut rng,
                &mut stats,
            );
            for k in kids {
                let sig = canonical_signature(&k);
                seen.insert(sig.clone());
                owners.push(i);
                batch.push((sig, k));
            }
        }

        let objs = batch_evaluate(&batch, &mut cache, p, d, nc, &mut stats, &mut eval_log)?;

        for (k, obj) in objs.into_iter().enumerate() {
            let (sig, ind) = &batch[k];
            let s = scaling.scale(&obj);
            ideal[0] = ideal[0].min(s[0]);
            ideal[1] = ideal[1].min(s[1]);
            archive.insert(FrontEntry {
                individual: ind.clone(),
                objectives: obj,
                signature: sig.clone(),
            });
            let mut replaced = 0;
            for &j in &neighbourhoods[owners[k]] {
                if replaced == REPLACEMENT_CAP {
                    break;
                }
                let incumbent = scaling.scale(&population[j].obj);
                if aggregate(s, weights[j], ideal) < aggregate(incumbent, weights[j], ideal) {
                    population[j] = Member {
                        ind: ind.clone(),
                        obj,
                    };
                    replaced += 1;
                }
            }
        }

        telemetry.push(GenStat {
            generation: gen,
            best_cost: archive
                .min_cost_entry()
                .map(|e| e.objectives.cost)
                .unwrap_or(f64::INFINITY),
            archive_len: archive.len(),
        });
    }

    stats.unique_signatures = seen.len() as u64;
    Ok(SearchOutcome {
        archive,
        telemetry,
        stats,
        eval_log,
        scaling,
    })
}

/// Picks one archive entry per complexity target (nearest complexity, ties
/// to the cheaper entry), always adding the simplest and the cheapest
/// entries; result deduplicated and ordered by complexity.
pub fn extract_representatives(a: &Archive, targets: &[usize]) -> Vec<FrontEntry> {
    assert!(!a.is_empty(), "archive must not be empty");
    let mut picks: Vec<&FrontEntry> = Vec::new();
    for &t in targets {
        let best = a
            .entries()
            .iter()
            .min_by(|x, y| {
                let dx = x.objectives.complexity.abs_diff(t);
                let dy = y.objectives.complexity.abs_diff(t);
                dx.cmp(&dy)
                    .then(x.objectives.cost.total_cmp(&y.objectives.cost))
                    .then(x.signature.cmp(&y.signature))
            })
            .unwrap();
        picks.push(best);
    }
    picks.push(a.min_complexity_entry().unwrap());
    picks.push(a.min_cost_entry().unwrap());

    let mut seen = HashSet::new();
    let mut out: Vec<FrontEntry> = picks
        .into_iter()
        .filter(|e| seen.insert(e.signature.clone()))
        .cloned()
        .collect();
    out.sort_by(|a, b| {
        a.objectives
            .complexity
            .cmp(&b.objectives.complexity)
            .then(a.objectives.cost.total_cmp(&b.objectives.cost))
            .then(a.signature.cmp(&b.signature))
    });
    out
}

#[cfg(test)]
pub(crate) mod testfix {
    use crate::data::{
        build_terminal_weights, compute_neighbour_cache, first_principal_component,
        normalize_minmax, pairwise_sq_distances, Dataset, NeighbourCache, TerminalWeights,
    };
    use crate::matrix::Matrix;
    use crate::tsne::{joint_p, AffinityMatrix};

    pub(crate) struct MiniProblem {
        pub d: Dataset,
        pub nc: NeighbourCache,
        pub tw: TerminalWeights,
        pub p: AffinityMatrix,
    }

    /// Two well-separated blobs of six points in three features.
    pub(crate) fn mini_problem() -> MiniProblem {
        let rows = vec![
            vec![0.18, 0.22, 0.81],
            vec![0.20, 0.18, 0.84],
            vec![0.25, 0.24, 0.78],
            vec![0.15, 0.20, 0.80],
            vec![0.22, 0.26, 0.86],
            vec![0.19, 0.16, 0.76],
            vec![0.78, 0.72, 0.12],
            vec![0.82, 0.70, 0.15],
            vec![0.76, 0.75, 0.10],
            vec![0.85, 0.68, 0.18],
            vec![0.80, 0.74, 0.08],
            vec![0.74, 0.69, 0.14],
        ];
        let labels = (0..12)
            .map(|i| if i < 6 { "a".into() } else { "b".into() })
            .collect();
        let d = Dataset {
            features: Matrix::from_rows(&rows),
            feature_names: (0..3).map(|j| format!("f{j}")).collect(),
            labels: Some(labels),
        };
        let d = normalize_minmax(&d);
        let t = pairwise_sq_distances(&d);
        let nc = compute_neighbour_cache(&d, &t).unwrap();
        let pc = first_principal_component(&d).unwrap();
        let tw = build_terminal_weights(&d, &pc);
        let p = joint_p(&t, 4.0).unwrap();
        MiniProblem { d, nc, tw, p }
    }

    pub(crate) fn mini_config() -> crate::config::SearchConfig {
        crate::config::SearchConfig {
            generations: 8,
            population: 10,
            perplexity: 4.0,
            seed: 5,
            record_evaluations: false,
            ..crate::config::SearchConfig::desk()
        }
    }
}
