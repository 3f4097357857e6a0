//! Tree construction: weighted terminal sampling plus full and grow builders
//! used both for the initial population (ramped over a depth range) and for
//! mutation subtrees.

use super::{quantize_constant, Individual, Node, NodeKind, Tree};
use crate::data::TerminalWeights;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildMethod {
    /// Every leaf sits exactly at the target depth.
    Full,
    /// Interior positions flip a fair coin between branch and leaf.
    Grow,
}

#[derive(Debug, Clone, Copy)]
enum TerminalSlot {
    Feature(usize),
    Neighbour(usize),
    Constant,
    Zero,
}

/// Cumulative likelihood table over terminal kinds. The zero slot is placed
/// last so the no-zero variant is a prefix draw over the same table.
#[derive(Debug, Clone)]
pub struct TerminalSampler {
    slots: Vec<TerminalSlot>,
    cumulative: Vec<u64>,
    total_with_zero: u64,
    total_without_zero: u64,
}

impl TerminalSampler {
    pub fn new(weights: &TerminalWeights) -> Self {
        let m = weights.m();
        let mut slots = Vec::with_capacity(2 * m + 2);
        let mut cumulative = Vec::with_capacity(2 * m + 2);
        let mut acc = 0u64;
        for i in 0..m {
            acc += weights.feature_likelihood(i) as u64;
            slots.push(TerminalSlot::Feature(i));
            cumulative.push(acc);
        }
        for i in 0..m {
            acc += weights.neighbour_likelihood(i) as u64;
            slots.push(TerminalSlot::Neighbour(i));
            cumulative.push(acc);
        }
        acc += weights.constant_likelihood() as u64;
        slots.push(TerminalSlot::Constant);
        cumulative.push(acc);
        let total_without_zero = acc;
        acc += weights.zero_likelihood() as u64;
        slots.push(TerminalSlot::Zero);
        cumulative.push(acc);
        debug_assert_eq!(total_without_zero, weights.total_mass(false));
        debug_assert_eq!(acc, weights.total_mass(true));
        Self {
            slots,
            cumulative,
            total_with_zero: acc,
            total_without_zero,
        }
    }

    pub fn sample(&self, allow_zero: bool, rng: &mut impl Rng) -> Node {
        let bound = if allow_zero {
            self.total_with_zero
        } else {
            self.total_without_zero
        };
        let t = rng.gen_range(0..bound);
        let idx = self.cumulative.partition_point(|&c| c <= t);
        match self.slots[idx] {
            TerminalSlot::Feature(i) => Node::terminal(NodeKind::Feature(i)),
            TerminalSlot::Neighbour(i) => Node::terminal(NodeKind::Neighbour(i)),
            TerminalSlot::Constant => {
                let v = quantize_constant(rng.gen_range(-1.0..=1.0));
                Node::terminal(NodeKind::Constant(v))
            }
            TerminalSlot::Zero => Node::terminal(NodeKind::Zero),
        }
    }
}

/// One weighted terminal draw over the full table, zero included.
pub fn sample_terminal(weights: &TerminalWeights, rng: &mut impl Rng) -> Node {
    TerminalSampler::new(weights).sample(true, rng)
}

const FUNCTION_KINDS: usize = 9;

fn random_function_kind(rng: &mut impl Rng) -> NodeKind {
    match rng.gen_range(0..FUNCTION_KINDS) {
        0 => NodeKind::FlexAdd,
        1 => NodeKind::Sub,
        2 => NodeKind::Mul,
        3 => NodeKind::ProtDiv,
        4 => NodeKind::Sigmoid,
        5 => NodeKind::Relu,
        6 => NodeKind::Max,
        7 => NodeKind::Min,
        _ => NodeKind::If,
    }
}

fn grow_node(
    sampler: &TerminalSampler,
    method: BuildMethod,
    level: usize,
    target: usize,
    allow_zero_here: bool,
    rng: &mut impl Rng,
) -> Node {
    let leaf = if level >= target {
        true
    } else if level == 1 {
        false
    } else {
        matches!(method, BuildMethod::Grow) && rng.gen_bool(0.5)
    };
    if leaf {
        return sampler.sample(allow_zero_here, rng);
    }
    let kind = random_function_kind(rng);
    let (lo, hi) = kind.arity_range();
    let arity = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
    let child_zero_ok = kind.accepts_zero_child();
    let children = (0..arity)
        .map(|_| grow_node(sampler, method, level + 1, target, child_zero_ok, rng))
        .collect();
    Node::branch(kind, children)
}

/// Builds one tree with depth drawn uniformly from the inclusive range. The
/// root is always a function when the target depth exceeds 1.
pub fn random_tree(
    method: BuildMethod,
    depth_range: (usize, usize),
    sampler: &TerminalSampler,
    rng: &mut impl Rng,
) -> Tree {
    let (lo, hi) = depth_range;
    debug_assert!(1 <= lo && lo <= hi);
    let target = rng.gen_range(lo..=hi);
    Tree::new(grow_node(sampler, method, 1, target, false, rng))
}

/// Mutation replacement: a grow-built subtree of at most `height` levels. A
/// height of 1 yields a lone terminal, which may be Zero when the splice
/// point's parent accepts it.
pub(crate) fn build_subtree(
    height: usize,
    parent_accepts_zero: bool,
    sampler: &TerminalSampler,
    rng: &mut impl Rng,
) -> Node {
    grow_node(
        sampler,
        BuildMethod::Grow,
        1,
        height,
        parent_accepts_zero,
        rng,
    )
}

/// Ramped pair construction: each tree independently picks full or grow and
/// its own target depth.
pub fn random_individual(
    depth_range: (usize, usize),
    sampler: &TerminalSampler,
    rng: &mut impl Rng,
) -> Individual {
    let mx = if rng.gen_bool(0.5) {
        BuildMethod::Full
    } else {
        BuildMethod::Grow
    };
    let tree_x = random_tree(mx, depth_range, sampler, rng);
    let my = if rng.gen_bool(0.5) {
        BuildMethod::Full
    } else {
        BuildMethod::Grow
    };
    let tree_y = random_tree(my, depth_range, sampler, rng);
    Individual::new(tree_x, tree_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sampler(m: usize) -> TerminalSampler {
        let j = (m as f64).sqrt().ceil() as usize;
        TerminalSampler::new(&TerminalWeights::synthetic(m, (0..j).collect()))
    }

    fn leaf_depths(node: &Node, level: usize, out: &mut Vec<usize>) {
        if node.children.is_empty() {
            out.push(level);
        }
        for c in &node.children {
            leaf_depths(c, level + 1, out);
        }
    }

    #[test]
    fn full_trees_put_every_leaf_at_the_target_depth() {
        let s = sampler(6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for target in 2..=6 {
            for _ in 0..60 {
                let t = random_tree(BuildMethod::Full, (target, target), &s, &mut rng);
                let mut depths = Vec::new();
                leaf_depths(&t.root, 1, &mut depths);
                assert!(
                    depths.iter().all(|&d| d == target),
                    "target {target}, got {depths:?}"
                );
                assert_eq!(t.depth(), target);
            }
        }
    }

    #[test]
    fn grow_trees_stay_within_the_ramp_and_root_on_a_function() {
        let s = sampler(4);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..400 {
            let t = random_tree(BuildMethod::Grow, (2, 6), &s, &mut rng);
            assert!(t.depth() >= 2 && t.depth() <= 6, "depth {}", t.depth());
            assert!(!t.root.kind.is_terminal());
            assert!(t.validate());
        }
    }

    #[test]
    fn ramped_individuals_are_structurally_sound() {
        let s = sampler(5);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let ind = random_individual((2, 6), &s, &mut rng);
            assert!(ind.validate());
            assert!(ind.tree_x.depth() >= 2 && ind.tree_x.depth() <= 6);
            assert!(ind.tree_y.depth() >= 2 && ind.tree_y.depth() <= 6);
        }
    }

    #[test]
    fn generated_constants_are_quantized_and_in_range() {
        fn collect(node: &Node, out: &mut Vec<f64>) {
            if let NodeKind::Constant(v) = node.kind {
                out.push(v);
            }
            for c in &node.children {
                collect(c, out);
            }
        }
        let s = sampler(3);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut seen = Vec::new();
        for _ in 0..300 {
            let t = random_tree(BuildMethod::Grow, (2, 5), &s, &mut rng);
            collect(&t.root, &mut seen);
        }
        assert!(!seen.is_empty());
        for v in seen {
            assert!((-1.0..=1.0).contains(&v));
            assert_eq!(quantize_constant(v), v);
        }
    }

    #[test]
    fn no_zero_sampler_never_emits_zero() {
        let s = sampler(7);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..20_000 {
            let node = s.sample(false, &mut rng);
            assert!(!matches!(node.kind, NodeKind::Zero));
        }
    }

    #[test]
    fn sampler_tracks_the_likelihood_table() {
        // m = 40: j = 7 boosted features at likelihood 8, constant and zero
        // at 4 each, everything else at 1.
        let m = 40;
        let s = sampler(m);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let draws = 400_000usize;
        let (mut boosted, mut plain, mut neigh, mut consts, mut zeros) =
            (0u64, 0u64, 0u64, 0u64, 0u64);
        for _ in 0..draws {
            match s.sample(true, &mut rng).kind {
                NodeKind::Feature(i) if i < 7 => boosted += 1,
                NodeKind::Feature(_) => plain += 1,
                NodeKind::Neighbour(_) => neigh += 1,
                NodeKind::Constant(_) => consts += 1,
                NodeKind::Zero => zeros += 1,
                _ => unreachable!(),
            }
        }
        let mass = (m + 7 * 7 + m + 2 * 4) as f64;
        let expect = |w: f64| w / mass * draws as f64;
        let close = |got: u64, want: f64| (got as f64 - want).abs() < want * 0.05;
        assert!(close(boosted, expect(7.0 * 8.0)), "boosted {boosted}");
        assert!(close(plain, expect(33.0)), "plain {plain}");
        assert!(close(neigh, expect(40.0)), "neigh {neigh}");
        assert!(close(consts, expect(4.0)), "consts {consts}");
        assert!(close(zeros, expect(4.0)), "zeros {zeros}");
    }

    #[test]
    fn zero_appears_only_under_accepting_parents() {
        let s = sampler(3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let t = random_tree(BuildMethod::Grow, (2, 8), &s, &mut rng);
            assert!(t.validate());
        }
    }

    #[test]
    fn unit_height_subtree_is_a_terminal() {
        let s = sampler(3);
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let mut saw_zero = false;
        for _ in 0..500 {
            let n = build_subtree(1, true, &s, &mut rng);
            assert!(n.children.is_empty());
            saw_zero |= matches!(n.kind, NodeKind::Zero);
        }
        assert!(saw_zero);
        for _ in 0..200 {
            let n = build_subtree(1, false, &s, &mut rng);
            assert!(!matches!(n.kind, NodeKind::Zero));
        }
    }
}
