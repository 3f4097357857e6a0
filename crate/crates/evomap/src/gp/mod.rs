//! Expression-tree representation and evaluation. An individual is a pair of
//! trees, one per output axis; evaluating both over every instance gives a
//! 2-D embedding. Arithmetic saturates at the largest finite value, division
//! by exact zero yields 1, so evaluation is total on normalized inputs.

mod build;
mod text;
mod vary;

pub use build::{random_individual, random_tree, sample_terminal, BuildMethod, TerminalSampler};
pub use text::{canonical_signature, parse_individual, parse_prefix, to_infix, to_prefix};
pub use vary::{crossover, mutate};

use crate::data::{Dataset, NeighbourCache};
use crate::tsne::Embedding;

pub const MAX_DEPTH: usize = 14;
pub const MIN_CREATION_DEPTH: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    /// Variable-arity sum, 1 to 5 children.
    FlexAdd,
    /// Negation with one child, subtraction with two.
    Sub,
    Mul,
    /// a / b, except b == 0 gives 1.
    ProtDiv,
    Sigmoid,
    Relu,
    Max,
    Min,
    /// if a < 0 then b else c; zero takes the else branch.
    If,
    Feature(usize),
    /// Mean of a feature over the instance's 3 nearest neighbours.
    Neighbour(usize),
    Constant(f64),
    /// Additive identity, legal only directly under FlexAdd or Sub.
    Zero,
}

impl NodeKind {
    pub fn arity_range(&self) -> (usize, usize) {
        match self {
            NodeKind::FlexAdd => (1, 5),
            NodeKind::Sub => (1, 2),
            NodeKind::Mul | NodeKind::ProtDiv | NodeKind::Max | NodeKind::Min => (2, 2),
            NodeKind::Sigmoid | NodeKind::Relu => (1, 1),
            NodeKind::If => (3, 3),
            NodeKind::Feature(_)
            | NodeKind::Neighbour(_)
            | NodeKind::Constant(_)
            | NodeKind::Zero => (0, 0),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.arity_range().1 == 0
    }

    pub fn accepts_zero_child(&self) -> bool {
        matches!(self, NodeKind::FlexAdd | NodeKind::Sub)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub children: Vec<Node>,
}

impl Node {
    pub fn terminal(kind: NodeKind) -> Self {
        debug_assert!(kind.is_terminal());
        Self {
            kind,
            children: Vec::new(),
        }
    }

    pub fn branch(kind: NodeKind, children: Vec<Node>) -> Self {
        Self { kind, children }
    }

    /// Total node count, Zero included; this is the space variation points
    /// are drawn from.
    pub fn count_all(&self) -> usize {
        1 + self.children.iter().map(Node::count_all).sum::<usize>()
    }

    pub fn count_counted(&self) -> usize {
        let own = usize::from(!matches!(self.kind, NodeKind::Zero));
        own + self.children.iter().map(Node::count_counted).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Node::depth).max().unwrap_or(0)
    }

    /// Structural well-formedness: arities in range, Zero only under FlexAdd
    /// or Sub, constants finite.
    pub fn validate(&self, under_zero_acceptor: bool) -> bool {
        let (lo, hi) = self.kind.arity_range();
        if self.children.len() < lo || self.children.len() > hi {
            return false;
        }
        match self.kind {
            NodeKind::Zero if !under_zero_acceptor => return false,
            NodeKind::Constant(v) if !v.is_finite() => return false,
            _ => {}
        }
        let accepts = self.kind.accepts_zero_child();
        self.children.iter().all(|c| c.validate(accepts))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub root: Node,
    depth: usize,
}

impl Tree {
    pub fn new(root: Node) -> Self {
        let depth = root.depth();
        Self { root, depth }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn validate(&self) -> bool {
        // A bare Zero root has no accepting parent.
        self.root.validate(false) && self.depth == self.root.depth()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub tree_x: Tree,
    pub tree_y: Tree,
}

impl Individual {
    pub fn new(tree_x: Tree, tree_y: Tree) -> Self {
        Self { tree_x, tree_y }
    }

    pub fn validate(&self) -> bool {
        self.tree_x.validate()
            && self.tree_y.validate()
            && self.tree_x.depth() <= MAX_DEPTH
            && self.tree_y.depth() <= MAX_DEPTH
    }
}

/// Node-count size of an individual over both trees, not counting Zero.
pub fn complexity(ind: &Individual) -> usize {
    ind.tree_x.root.count_counted() + ind.tree_y.root.count_counted()
}

/// Rounds to 12 significant digits. Every constant entering a tree passes
/// through this, so the text form of a tree loses nothing.
pub fn quantize_constant(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    format!("{v:.11e}").parse().unwrap()
}

#[inline]
fn sat(v: f64) -> f64 {
    v.clamp(f64::MIN, f64::MAX)
}

/// Evaluates one tree over every instance.
pub fn eval_node(node: &Node, data: &Dataset, nc: &NeighbourCache) -> Vec<f64> {
    let n = data.n();
    match &node.kind {
        NodeKind::Feature(j) => data.features.column(*j),
        NodeKind::Neighbour(j) => nc.means.column(*j),
        NodeKind::Constant(c) => vec![*c; n],
        NodeKind::Zero => vec![0.0; n],
        NodeKind::FlexAdd => {
            let mut acc = vec![0.0; n];
            for child in &node.children {
                let v = eval_node(child, data, nc);
                for (a, b) in acc.iter_mut().zip(&v) {
                    *a = sat(*a + b);
                }
            }
            acc
        }
        NodeKind::Sub => {
            let mut acc = eval_node(&node.children[0], data, nc);
            if node.children.len() == 1 {
                for a in &mut acc {
                    *a = -*a;
                }
            } else {
                let rhs = eval_node(&node.children[1], data, nc);
                for (a, b) in acc.iter_mut().zip(&rhs) {
                    *a = sat(*a - b);
                }
            }
            acc
        }
        NodeKind::Mul => {
            let mut acc = eval_node(&node.children[0], data, nc);
            let rhs = eval_node(&node.children[1], data, nc);
            for (a, b) in acc.iter_mut().zip(&rhs) {
                *a = sat(*a * b);
            }
            acc
        }
        NodeKind::ProtDiv => {
            let mut acc = eval_node(&node.children[0], data, nc);
            let rhs = eval_node(&node.children[1], data, nc);
            for (a, b) in acc.iter_mut().zip(&rhs) {
                *a = if *b == 0.0 { 1.0 } else { sat(*a / b) };
            }
            acc
        }
        NodeKind::Sigmoid => {
            let mut acc = eval_node(&node.children[0], data, nc);
            for a in &mut acc {
                *a = 1.0 / (1.0 + (-*a).exp());
            }
            acc
        }
        NodeKind::Relu => {
            let mut acc = eval_node(&node.children[0], data, nc);
            for a in &mut acc {
                *a = a.max(0.0);
            }
            acc
        }
        NodeKind::Max => {
            let mut acc = eval_node(&node.children[0], data, nc);
            let rhs = eval_node(&node.children[1], data, nc);
            for (a, b) in acc.iter_mut().zip(&rhs) {
                *a = a.max(*b);
            }
            acc
        }
        NodeKind::Min => {
            let mut acc = eval_node(&node.children[0], data, nc);
            let rhs = eval_node(&node.children[1], data, nc);
            for (a, b) in acc.iter_mut().zip(&rhs) {
                *a = a.min(*b);
            }
            acc
        }
        NodeKind::If => {
            let cond = eval_node(&node.children[0], data, nc);
            let then_v = eval_node(&node.children[1], data, nc);
            let else_v = eval_node(&node.children[2], data, nc);
            cond.iter()
                .zip(then_v.iter().zip(&else_v))
                .map(|(&c, (&t, &e))| if c < 0.0 { t } else { e })
                .collect()
        }
    }
}

/// Evaluates both trees into an embedding, x axis first.
pub fn eval_individual(ind: &Individual, data: &Dataset, nc: &NeighbourCache) -> Embedding {
    let xs = eval_node(&ind.tree_x.root, data, nc);
    let ys = eval_node(&ind.tree_y.root, data, nc);
    Embedding::new(xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect())
}
