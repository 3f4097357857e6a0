//! Text forms of trees. The prefix s-expression is the machine format: it
//! round-trips losslessly because constants are quantized before they ever
//! enter a tree, so the canonical signature built from it is a sound cache
//! key. The infix form is for humans only and is never parsed back.

use super::{quantize_constant, Individual, Node, NodeKind, Tree};
use crate::error::{Error, Result};
use std::fmt::Write as _;

fn constant_text(v: f64) -> String {
    // Shortest round-trip decimal; at most the 12 significant digits the
    // quantizer kept.
    format!("{v}")
}

fn prefix_node(node: &Node, out: &mut String) {
    match &node.kind {
        NodeKind::Feature(i) => {
            let _ = write!(out, "f{i}");
        }
        NodeKind::Neighbour(i) => {
            let _ = write!(out, "nf{i}");
        }
        NodeKind::Constant(v) => out.push_str(&constant_text(*v)),
        NodeKind::Zero => out.push_str("zero"),
        kind => {
            out.push('(');
            out.push_str(function_token(kind));
            for c in &node.children {
                out.push(' ');
                prefix_node(c, out);
            }
            out.push(')');
        }
    }
}

fn function_token(kind: &NodeKind) -> &'static str {
    match kind {
        NodeKind::FlexAdd => "add",
        NodeKind::Sub => "sub",
        NodeKind::Mul => "mul",
        NodeKind::ProtDiv => "div",
        NodeKind::Sigmoid => "sigmoid",
        NodeKind::Relu => "relu",
        NodeKind::Max => "max",
        NodeKind::Min => "min",
        NodeKind::If => "if",
        _ => unreachable!("terminals have no function token"),
    }
}

pub fn to_prefix(tree: &Tree) -> String {
    let mut out = String::new();
    prefix_node(&tree.root, &mut out);
    out
}

/// Structural identity key for an individual: both prefix forms joined with
/// " | ". Equal keys imply bitwise-equal evaluation.
pub fn canonical_signature(ind: &Individual) -> String {
    format!("{} | {}", to_prefix(&ind.tree_x), to_prefix(&ind.tree_y))
}

#[derive(Clone, Copy, PartialEq)]
enum Prec {
    Atom,
    Product,
    Sum,
}

fn paren(s: String) -> String {
    format!("({s})")
}

fn wrap_if_sum(part: (String, Prec)) -> String {
    if part.1 == Prec::Sum {
        paren(part.0)
    } else {
        part.0
    }
}

fn render(node: &Node) -> (String, Prec) {
    match &node.kind {
        NodeKind::Feature(i) => (format!("f{i}"), Prec::Atom),
        NodeKind::Neighbour(i) => (format!("nf{i}"), Prec::Atom),
        NodeKind::Constant(v) => {
            let p = if *v < 0.0 { Prec::Sum } else { Prec::Atom };
            (constant_text(*v), p)
        }
        NodeKind::Zero => ("0".into(), Prec::Atom),
        NodeKind::FlexAdd => {
            let mut parts: Vec<(bool, String)> = Vec::new();
            for c in &node.children {
                if matches!(c.kind, NodeKind::Zero) {
                    continue;
                }
                if matches!(c.kind, NodeKind::Sub) && c.children.len() == 1 {
                    parts.push((true, wrap_if_sum(render(&c.children[0]))));
                } else {
                    parts.push((false, wrap_if_sum(render(c))));
                }
            }
            match parts.len() {
                0 => ("0".into(), Prec::Atom),
                _ => {
                    let mut s = String::new();
                    for (i, (neg, txt)) in parts.iter().enumerate() {
                        if i == 0 {
                            if *neg {
                                s.push('-');
                            }
                        } else {
                            s.push_str(if *neg { " - " } else { " + " });
                        }
                        s.push_str(txt);
                    }
                    (s, Prec::Sum)
                }
            }
        }
        NodeKind::Sub => {
            if node.children.len() == 1 {
                let inner = wrap_if_sum(render(&node.children[0]));
                (format!("-{inner}"), Prec::Sum)
            } else {
                let l = wrap_if_sum(render(&node.children[0]));
                let r = wrap_if_sum(render(&node.children[1]));
                (format!("{l} - {r}"), Prec::Sum)
            }
        }
        NodeKind::Mul | NodeKind::ProtDiv => {
            let op = if matches!(node.kind, NodeKind::Mul) {
                "*"
            } else {
                "/"
            };
            let (ls, lp) = render(&node.children[0]);
            let l = if lp == Prec::Sum { paren(ls) } else { ls };
            let (rs, rp) = render(&node.children[1]);
            let r = if rp == Prec::Atom { rs } else { paren(rs) };
            (format!("{l} {op} {r}"), Prec::Product)
        }
        NodeKind::Sigmoid | NodeKind::Relu => {
            let name = if matches!(node.kind, NodeKind::Sigmoid) {
                "sigmoid"
            } else {
                "relu"
            };
            (
                format!("{name}({})", render(&node.children[0]).0),
                Prec::Atom,
            )
        }
        NodeKind::Max | NodeKind::Min => {
            let name = if matches!(node.kind, NodeKind::Max) {
                "max"
            } else {
                "min"
            };
            let a = render(&node.children[0]).0;
            let b = render(&node.children[1]).0;
            (format!("{name}({a}, {b})"), Prec::Atom)
        }
        NodeKind::If => {
            let c = render(&node.children[0]).0;
            let t = render(&node.children[1]).0;
            let e = render(&node.children[2]).0;
            (format!("if({c} < 0, {t}, {e})"), Prec::Atom)
        }
    }
}

pub fn to_infix(tree: &Tree) -> String {
    render(&tree.root).0
}

fn syntax(msg: impl Into<String>) -> Error {
    Error::ExpressionSyntax(msg.into())
}

fn tokenize(s: &str) -> Vec<String> {
    s.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

fn parse_terminal(tok: &str) -> Result<Node> {
    if tok == "zero" {
        return Ok(Node::terminal(NodeKind::Zero));
    }
    if let Some(rest) = tok.strip_prefix("nf") {
        if let Ok(i) = rest.parse::<usize>() {
            return Ok(Node::terminal(NodeKind::Neighbour(i)));
        }
    }
    if let Some(rest) = tok.strip_prefix('f') {
        if let Ok(i) = rest.parse::<usize>() {
            return Ok(Node::terminal(NodeKind::Feature(i)));
        }
    }
    if let Ok(v) = tok.parse::<f64>() {
        if !v.is_finite() {
            return Err(syntax(format!("non-finite constant {tok:?}")));
        }
        return Ok(Node::terminal(NodeKind::Constant(quantize_constant(v))));
    }
    Err(syntax(format!("unrecognised token {tok:?}")))
}

fn function_kind(tok: &str) -> Result<NodeKind> {
    Ok(match tok {
        "add" => NodeKind::FlexAdd,
        "sub" => NodeKind::Sub,
        "mul" => NodeKind::Mul,
        "div" => NodeKind::ProtDiv,
        "sigmoid" => NodeKind::Sigmoid,
        "relu" => NodeKind::Relu,
        "max" => NodeKind::Max,
        "min" => NodeKind::Min,
        "if" => NodeKind::If,
        other => return Err(syntax(format!("unknown operator {other:?}"))),
    })
}

fn parse_expr(toks: &[String], pos: &mut usize) -> Result<Node> {
    let tok = toks
        .get(*pos)
        .ok_or_else(|| syntax("unexpected end of input"))?;
    if tok == ")" {
        return Err(syntax("unexpected ')'"));
    }
    if tok != "(" {
        *pos += 1;
        return parse_terminal(tok);
    }
    *pos += 1;
    let op = toks
        .get(*pos)
        .ok_or_else(|| syntax("missing operator after '('"))?;
    let kind = function_kind(op)?;
    *pos += 1;
    let mut children = Vec::new();
    loop {
        match toks.get(*pos) {
            None => return Err(syntax("unbalanced '('")),
            Some(t) if t == ")" => {
                *pos += 1;
                break;
            }
            Some(_) => children.push(parse_expr(toks, pos)?),
        }
    }
    let (lo, hi) = kind.arity_range();
    if children.len() < lo || children.len() > hi {
        return Err(syntax(format!(
            "operator {op:?} takes {lo}..={hi} operands, got {}",
            children.len()
        )));
    }
    if !kind.accepts_zero_child() && children.iter().any(|c| matches!(c.kind, NodeKind::Zero)) {
        return Err(syntax(format!("zero operand not allowed under {op:?}")));
    }
    Ok(Node::branch(kind, children))
}

pub fn parse_prefix(s: &str) -> Result<Tree> {
    let toks = tokenize(s);
    if toks.is_empty() {
        return Err(syntax("empty expression"));
    }
    let mut pos = 0;
    let root = parse_expr(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(syntax(format!(
            "trailing input after expression: {:?}",
            &toks[pos..]
        )));
    }
    if matches!(root.kind, NodeKind::Zero) {
        return Err(syntax("zero cannot stand alone as a tree"));
    }
    Ok(Tree::new(root))
}

/// Parses a two-tree signature of the form `<x-prefix> | <y-prefix>`.
pub fn parse_individual(s: &str) -> Result<Individual> {
    let mut halves = s.splitn(2, '|');
    let x = halves.next().unwrap_or("");
    let y = halves
        .next()
        .ok_or_else(|| syntax("expected '<x> | <y>'"))?;
    Ok(Individual::new(parse_prefix(x)?, parse_prefix(y)?))
}

#[cfg(test)]
mod tests {
    use super::super::build::{random_individual, TerminalSampler};
    use super::super::eval_node;
    use super::super::testutil::{leaf_c, leaf_f, leaf_nf, leaf_zero, tiny_dataset};
    use super::*;
    use crate::data::TerminalWeights;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prefix_of_a_mixed_sum() {
        let t = Tree::new(Node::branch(
            NodeKind::FlexAdd,
            vec![leaf_f(0), leaf_zero(), leaf_c(0.5)],
        ));
        assert_eq!(to_prefix(&t), "(add f0 zero 0.5)");
    }

    #[test]
    fn infix_merges_unary_negation_into_the_sum() {
        let t = Tree::new(Node::branch(
            NodeKind::FlexAdd,
            vec![leaf_nf(20), Node::branch(NodeKind::Sub, vec![leaf_f(15)])],
        ));
        assert_eq!(to_infix(&t), "nf20 - f15");
    }

    #[test]
    fn infix_parenthesizes_sums_under_products() {
        let t = Tree::new(Node::branch(
            NodeKind::Mul,
            vec![
                Node::branch(NodeKind::FlexAdd, vec![leaf_f(0), leaf_f(1)]),
                leaf_f(2),
            ],
        ));
        assert_eq!(to_infix(&t), "(f0 + f1) * f2");
    }

    #[test]
    fn infix_keeps_division_grouping_readable() {
        // div(mul(f0 f1) f2) reads left to right; mul(f0 div(f1 f2)) must not.
        let left = Tree::new(Node::branch(
            NodeKind::ProtDiv,
            vec![
                Node::branch(NodeKind::Mul, vec![leaf_f(0), leaf_f(1)]),
                leaf_f(2),
            ],
        ));
        assert_eq!(to_infix(&left), "f0 * f1 / f2");
        let right = Tree::new(Node::branch(
            NodeKind::Mul,
            vec![
                leaf_f(0),
                Node::branch(NodeKind::ProtDiv, vec![leaf_f(1), leaf_f(2)]),
            ],
        ));
        assert_eq!(to_infix(&right), "f0 * (f1 / f2)");
    }

    #[test]
    fn infix_wraps_negative_constants_in_products() {
        let t = Tree::new(Node::branch(NodeKind::Mul, vec![leaf_f(0), leaf_c(-0.5)]));
        assert_eq!(to_infix(&t), "f0 * (-0.5)");
    }

    #[test]
    fn infix_nests_conditionals_unambiguously() {
        let inner = Node::branch(NodeKind::If, vec![leaf_f(2), leaf_c(0.25), leaf_f(3)]);
        let t = Tree::new(Node::branch(
            NodeKind::If,
            vec![leaf_f(0), leaf_f(1), inner],
        ));
        assert_eq!(to_infix(&t), "if(f0 < 0, f1, if(f2 < 0, 0.25, f3))");
    }

    #[test]
    fn infix_of_an_all_zero_sum_is_zero() {
        let t = Tree::new(Node::branch(NodeKind::FlexAdd, vec![leaf_zero()]));
        assert_eq!(to_infix(&t), "0");
        assert_eq!(to_prefix(&t), "(add zero)");
        assert_eq!(parse_prefix("(add zero)").unwrap(), t);
    }

    #[test]
    fn single_terminal_trees_print_bare() {
        assert_eq!(to_prefix(&Tree::new(leaf_f(3))), "f3");
        assert_eq!(to_infix(&Tree::new(leaf_nf(7))), "nf7");
    }

    #[test]
    fn signatures_distinguish_third_decimal_constants() {
        let a = Individual::new(Tree::new(leaf_c(0.123)), Tree::new(leaf_f(0)));
        let b = Individual::new(Tree::new(leaf_c(0.124)), Tree::new(leaf_f(0)));
        assert_ne!(canonical_signature(&a), canonical_signature(&b));
        assert_eq!(canonical_signature(&a), canonical_signature(&a.clone()));
    }

    #[test]
    fn random_individuals_round_trip_bitwise() {
        let j = 3;
        let s = TerminalSampler::new(&TerminalWeights::synthetic(5, (0..j).collect()));
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..300 {
            let ind = random_individual((2, 7), &s, &mut rng);
            let sig = canonical_signature(&ind);
            let back = parse_individual(&sig).unwrap();
            assert_eq!(back, ind, "signature {sig}");
            assert_eq!(canonical_signature(&back), sig);
        }
    }

    #[test]
    fn parsed_trees_evaluate_identically() {
        let (d, nc) = tiny_dataset();
        let s = TerminalSampler::new(&TerminalWeights::synthetic(3, vec![0, 1]));
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..100 {
            let ind = random_individual((2, 6), &s, &mut rng);
            let back = parse_individual(&canonical_signature(&ind)).unwrap();
            let a = eval_node(&ind.tree_x.root, &d, &nc);
            let b = eval_node(&back.tree_x.root, &d, &nc);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn parser_rejects_malformed_input() {
        for bad in [
            "",
            "zero",
            "(mul f0)",
            "(mul f0 f1 f2)",
            "(mul f0 zero)",
            "(add f0",
            "(f0 f1)",
            "(add)",
            "qqq",
            "f0 f1",
            "(div f0 f1))",
            "(pow f0 f1)",
            "(if f0 f1)",
        ] {
            assert!(parse_prefix(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn individual_parsing_requires_both_halves() {
        assert!(parse_individual("f0").is_err());
        assert!(parse_individual("f0 | ").is_err());
        let ind = parse_individual("(sub f0 0.25) | nf1").unwrap();
        assert_eq!(ind.tree_x.depth(), 2);
        assert_eq!(ind.tree_y.depth(), 1);
    }

    #[test]
    fn constants_with_many_digits_quantize_on_parse() {
        let t = parse_prefix("0.12345678901234567").unwrap();
        match t.root.kind {
            NodeKind::Constant(v) => {
                assert_eq!(v, super::super::quantize_constant(0.12345678901234567))
            }
            _ => panic!("expected constant"),
        }
    }
}
