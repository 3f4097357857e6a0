//! Subtree crossover and subtree mutation. Both pick one axis per call and
//! leave the other tree untouched. Crossover re-draws points up to a fixed
//! retry budget when a swap would break the depth cap or Zero placement,
//! then falls back to parent copies.

use super::build::{build_subtree, TerminalSampler};
use super::{Individual, Node, NodeKind, Tree, MAX_DEPTH};
use rand::Rng;

const RETRY_LIMIT: usize = 10;
const MAX_MUTATION_HEIGHT: usize = 4;

struct PointInfo {
    depth: usize,
    parent_accepts_zero: bool,
}

/// Preorder lookup of the node at `target` together with its placement info.
fn locate<'a>(root: &'a Node, target: usize) -> (&'a Node, PointInfo) {
    fn walk<'a>(
        node: &'a Node,
        counter: &mut usize,
        depth: usize,
        parent_ok: bool,
        target: usize,
    ) -> Option<(&'a Node, PointInfo)> {
        let here = *counter;
        *counter += 1;
        if here == target {
            return Some((
                node,
                PointInfo {
                    depth,
                    parent_accepts_zero: parent_ok,
                },
            ));
        }
        let ok = node.kind.accepts_zero_child();
        node.children
            .iter()
            .find_map(|c| walk(c, counter, depth + 1, ok, target))
    }
    let mut counter = 0;
    walk(root, &mut counter, 1, false, target).expect("point index within preorder node count")
}

/// Clone of `root` with the preorder-`target` subtree replaced.
fn with_replaced(root: &Node, target: usize, replacement: Node) -> Node {
    fn rebuild(
        node: &Node,
        counter: &mut usize,
        target: usize,
        replacement: &mut Option<Node>,
    ) -> Node {
        let here = *counter;
        *counter += 1;
        if here == target {
            return replacement.take().expect("replacement consumed once");
        }
        let children = node
            .children
            .iter()
            .map(|c| rebuild(c, counter, target, replacement))
            .collect();
        Node {
            kind: node.kind.clone(),
            children,
        }
    }
    let mut counter = 0;
    let mut replacement = Some(replacement);
    rebuild(root, &mut counter, target, &mut replacement)
}

fn splice_axis(parent: &Individual, axis_x: bool, tree: Tree) -> Individual {
    if axis_x {
        Individual::new(tree, parent.tree_y.clone())
    } else {
        Individual::new(parent.tree_x.clone(), tree)
    }
}

pub fn crossover(a: &Individual, b: &Individual, rng: &mut impl Rng) -> (Individual, Individual) {
    let axis_x = rng.gen_bool(0.5);
    let (ta, tb) = if axis_x {
        (&a.tree_x, &b.tree_x)
    } else {
        (&a.tree_y, &b.tree_y)
    };
    for _ in 0..RETRY_LIMIT {
        let ia = rng.gen_range(0..ta.root.count_all());
        let ib = rng.gen_range(0..tb.root.count_all());
        let (sa, pa) = locate(&ta.root, ia);
        let (sb, pb) = locate(&tb.root, ib);
        let zero_ok = (!matches!(sb.kind, NodeKind::Zero) || pa.parent_accepts_zero)
            && (!matches!(sa.kind, NodeKind::Zero) || pb.parent_accepts_zero);
        if !zero_ok {
            continue;
        }
        let new_a = Tree::new(with_replaced(&ta.root, ia, sb.clone()));
        let new_b = Tree::new(with_replaced(&tb.root, ib, sa.clone()));
        if new_a.depth() > MAX_DEPTH || new_b.depth() > MAX_DEPTH {
            continue;
        }
        return (splice_axis(a, axis_x, new_a), splice_axis(b, axis_x, new_b));
    }
    (a.clone(), b.clone())
}

/// Replaces one uniformly chosen point with a fresh grow subtree whose height
/// fits the remaining depth budget. A bare Zero replacement under FlexAdd or
/// Sub is how mutation deletes structure.
pub fn mutate(a: &Individual, sampler: &TerminalSampler, rng: &mut impl Rng) -> Individual {
    let axis_x = rng.gen_bool(0.5);
    let t = if axis_x { &a.tree_x } else { &a.tree_y };
    let idx = rng.gen_range(0..t.root.count_all());
    let (_, info) = locate(&t.root, idx);
    let room = MAX_DEPTH - info.depth + 1;
    let height = rng.gen_range(1..=room.min(MAX_MUTATION_HEIGHT));
    let replacement = build_subtree(height, info.parent_accepts_zero, sampler, rng);
    let tree = Tree::new(with_replaced(&t.root, idx, replacement));
    debug_assert!(tree.depth() <= MAX_DEPTH);
    splice_axis(a, axis_x, tree)
}

#[cfg(test)]
mod tests {
    use super::super::build::{random_individual, random_tree, BuildMethod};
    use super::super::complexity;
    use super::super::testutil::{leaf_c, leaf_f, leaf_nf, leaf_zero};
    use super::*;
    use crate::data::TerminalWeights;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sampler(m: usize) -> TerminalSampler {
        let j = (m as f64).sqrt().ceil() as usize;
        TerminalSampler::new(&TerminalWeights::synthetic(m, (0..j).collect()))
    }

    #[test]
    fn zero_splice_deletes_structure() {
        let root = Node::branch(NodeKind::FlexAdd, vec![leaf_f(0), leaf_f(1), leaf_nf(2)]);
        let before = Tree::new(root.clone());
        // Preorder index 2 is the second child.
        let after = Tree::new(with_replaced(&root, 2, leaf_zero()));
        assert!(after.validate());
        let a = Individual::new(before, Tree::new(leaf_c(0.1)));
        let b = Individual::new(after, Tree::new(leaf_c(0.1)));
        assert_eq!(complexity(&a), 5);
        assert_eq!(complexity(&b), 4);
    }

    #[test]
    fn locate_reports_depth_and_parent() {
        let root = Node::branch(
            NodeKind::Mul,
            vec![
                Node::branch(NodeKind::Sub, vec![leaf_f(0), leaf_f(1)]),
                leaf_f(2),
            ],
        );
        let (n0, p0) = locate(&root, 0);
        assert_eq!(n0.kind, NodeKind::Mul);
        assert_eq!(p0.depth, 1);
        assert!(!p0.parent_accepts_zero);
        let (n1, p1) = locate(&root, 1);
        assert_eq!(n1.kind, NodeKind::Sub);
        assert_eq!(p1.depth, 2);
        assert!(!p1.parent_accepts_zero);
        let (n2, p2) = locate(&root, 2);
        assert_eq!(n2.kind, NodeKind::Feature(0));
        assert_eq!(p2.depth, 3);
        assert!(p2.parent_accepts_zero);
        let (n4, p4) = locate(&root, 4);
        assert_eq!(n4.kind, NodeKind::Feature(2));
        assert_eq!(p4.depth, 2);
        assert!(!p4.parent_accepts_zero);
    }

    #[test]
    fn crossover_touches_exactly_one_axis() {
        let s = sampler(3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..300 {
            let a = random_individual((2, 6), &s, &mut rng);
            let b = random_individual((2, 6), &s, &mut rng);
            let (oa, ob) = crossover(&a, &b, &mut rng);
            let y_kept = oa.tree_y == a.tree_y && ob.tree_y == b.tree_y;
            let x_kept = oa.tree_x == a.tree_x && ob.tree_x == b.tree_x;
            assert!(y_kept || x_kept);
            assert!(oa.validate() && ob.validate());
        }
    }

    #[test]
    fn single_node_trees_swap_back_to_the_parents() {
        let a = Individual::new(Tree::new(leaf_f(0)), Tree::new(leaf_f(3)));
        let b = Individual::new(Tree::new(leaf_f(2)), Tree::new(leaf_f(3)));
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..50 {
            let (oa, ob) = crossover(&a, &b, &mut rng);
            let same = oa == a && ob == b;
            let swapped = oa == b && ob == a;
            assert!(same || swapped);
        }
    }

    #[test]
    fn offspring_depth_never_exceeds_the_cap() {
        let s = sampler(4);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let a = Individual::new(
                random_tree(BuildMethod::Full, (12, 14), &s, &mut rng),
                random_tree(BuildMethod::Grow, (2, 14), &s, &mut rng),
            );
            let b = Individual::new(
                random_tree(BuildMethod::Full, (12, 14), &s, &mut rng),
                random_tree(BuildMethod::Grow, (2, 14), &s, &mut rng),
            );
            let (oa, ob) = crossover(&a, &b, &mut rng);
            assert!(oa.tree_x.depth() <= MAX_DEPTH && oa.tree_y.depth() <= MAX_DEPTH);
            assert!(ob.tree_x.depth() <= MAX_DEPTH && ob.tree_y.depth() <= MAX_DEPTH);
            let ma = mutate(&a, &s, &mut rng);
            assert!(ma.tree_x.depth() <= MAX_DEPTH && ma.tree_y.depth() <= MAX_DEPTH);
            assert!(ma.validate());
        }
    }

    #[test]
    fn mutation_changes_at_most_one_tree() {
        let s = sampler(3);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut shrank = false;
        for _ in 0..3000 {
            let a = random_individual((2, 6), &s, &mut rng);
            let o = mutate(&a, &s, &mut rng);
            let changed = usize::from(o.tree_x != a.tree_x) + usize::from(o.tree_y != a.tree_y);
            assert!(changed <= 1);
            assert!(o.validate());
            shrank |= complexity(&o) < complexity(&a);
        }
        // Zero splices and short replacements must show up over this many draws.
        assert!(shrank);
    }

    #[test]
    fn variation_is_reproducible_for_a_fixed_seed() {
        let s = sampler(5);
        let mk = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_individual((2, 6), &s, &mut rng);
            let b = random_individual((2, 6), &s, &mut rng);
            let (oa, ob) = crossover(&a, &b, &mut rng);
            let m = mutate(&oa, &s, &mut rng);
            (oa, ob, m)
        };
        assert_eq!(mk(77), mk(77));
    }

    #[test]
    fn variation_closure_under_fuzz() {
        let s = sampler(6);
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let mut pool: Vec<Individual> = (0..40)
            .map(|_| random_individual((2, 8), &s, &mut rng))
            .collect();
        for _ in 0..2000 {
            let i = rng.gen_range(0..pool.len());
            let j = rng.gen_range(0..pool.len());
            let (oa, ob) = crossover(&pool[i].clone(), &pool[j].clone(), &mut rng);
            let m = mutate(&oa, &s, &mut rng);
            for ind in [&oa, &ob, &m] {
                assert!(ind.validate(), "invalid offspring: {ind:?}");
            }
            let k = rng.gen_range(0..pool.len());
            pool[k] = m;
        }
    }
}
