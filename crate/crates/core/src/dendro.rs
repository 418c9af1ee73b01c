//! Dendrograms: series-reduced rooted trees with labeled leaves.
//!
//! A dendrogram on `l` leaves records how the `l` points of one cluster coalesce.
//! The immigrant above the top internal node is implicit.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{arg, Error, Result};

/// Largest number of leaves accepted by [`enumerate_dendrograms`].
pub const ENUMERATION_CAP: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    /// Leaf carrying a zero-based label.
    Leaf(usize),
    /// At least two children, ordered by their smallest leaf label.
    Internal(Vec<Node>),
}

impl Node {
    fn min_label(&self) -> usize {
        match self {
            Node::Leaf(i) => *i,
            Node::Internal(ch) => ch[0].min_label(),
        }
    }

    pub fn leaves(&self) -> Vec<usize> {
        match self {
            Node::Leaf(i) => vec![*i],
            Node::Internal(ch) => ch.iter().flat_map(Node::leaves).collect(),
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Internal(ch) => 1 + ch.iter().map(Node::internal_count).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Internal(ch) => 1 + ch.iter().map(Node::depth).max().unwrap_or(0),
        }
    }

    /// Canonical form with labels erased.
    pub fn shape(&self) -> String {
        match self {
            Node::Leaf(_) => "*".into(),
            Node::Internal(ch) => {
                let mut parts: Vec<String> = ch.iter().map(Node::shape).collect();
                parts.sort();
                format!("({})", parts.join(","))
            }
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Leaf(i) => write!(f, "{}", i + 1),
            Node::Internal(ch) => {
                write!(f, "(")?;
                for (k, c) in ch.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A dendrogram; `root` is the top internal node below the immigrant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dendrogram {
    pub root: Node,
    pub l: usize,
}

impl fmt::Display for Dendrogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceClass {
    pub shape: String,
    pub multiplicity: usize,
    pub representative: Dendrogram,
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of dendrograms on `l` labeled leaves (1, 4, 26, 236, ...).
pub fn count_dendrograms(l: usize) -> Result<u128> {
    if l < 2 {
        return arg(format!("dendrograms need l >= 2, got {l}"));
    }
    let overflow = || Error::Capability(l);
    // a[n]: trees on n leaves; f[n]: forests whose components are trees or single leaves.
    let mut a = vec![0u128; l + 1];
    let mut f = vec![0u128; l + 1];
    a[1] = 1;
    f[0] = 1;
    f[1] = 1;
    for n in 2..=l {
        let mut s: u128 = 0;
        for k in 1..n {
            let term = binomial(n as u128 - 1, k as u128 - 1)
                .and_then(|c| c.checked_mul(a[k]))
                .and_then(|c| c.checked_mul(f[n - k]))
                .ok_or_else(overflow)?;
            s = s.checked_add(term).ok_or_else(overflow)?;
        }
        a[n] = s;
        f[n] = s.checked_mul(2).ok_or_else(overflow)?;
    }
    Ok(a[l])
}

/// Set partitions of `items` into at least `min_blocks` blocks.
fn partitions(items: &[usize], min_blocks: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut assign = vec![0usize; items.len()];
    fn rec(
        i: usize,
        used: usize,
        items: &[usize],
        assign: &mut Vec<usize>,
        min_blocks: usize,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if i == items.len() {
            if used >= min_blocks {
                let mut blocks = vec![Vec::new(); used];
                for (k, &b) in assign.iter().enumerate() {
                    blocks[b].push(items[k]);
                }
                out.push(blocks);
            }
            return;
        }
        for b in 0..=used {
            assign[i] = b;
            rec(i + 1, used.max(b + 1), items, assign, min_blocks, out);
        }
    }
    rec(0, 0, items, &mut assign, min_blocks, &mut out);
    out
}

fn trees(items: &[usize]) -> Vec<Node> {
    if items.len() == 1 {
        return vec![Node::Leaf(items[0])];
    }
    let mut out = Vec::new();
    for blocks in partitions(items, 2) {
        let options: Vec<Vec<Node>> = blocks.iter().map(|b| trees(b)).collect();
        let mut acc: Vec<Vec<Node>> = vec![Vec::new()];
        for opts in &options {
            acc = acc
                .into_iter()
                .flat_map(|prefix| {
                    opts.iter().map(move |o| {
                        let mut p = prefix.clone();
                        p.push(o.clone());
                        p
                    })
                })
                .collect();
        }
        for mut children in acc {
            children.sort_by_key(Node::min_label);
            out.push(Node::Internal(children));
        }
    }
    out
}

/// Every dendrogram on `l` leaves, each once.
pub fn enumerate_dendrograms(l: usize) -> Result<Vec<Dendrogram>> {
    if l < 2 {
        return arg(format!("dendrograms need l >= 2, got {l}"));
    }
    if l > ENUMERATION_CAP {
        return Err(Error::Capability(l));
    }
    let items: Vec<usize> = (0..l).collect();
    Ok(trees(&items)
        .into_iter()
        .map(|root| Dendrogram { root, l })
        .collect())
}

fn root_leaf_children(d: &Dendrogram) -> usize {
    match &d.root {
        Node::Internal(ch) => ch.iter().filter(|c| matches!(c, Node::Leaf(_))).count(),
        Node::Leaf(_) => 0,
    }
}

/// Dendrograms grouped by unlabeled shape.
///
/// Classes are ordered by internal-node count, then depth, then decreasing number
/// of leaves hanging directly from the top node.
pub fn equivalence_classes(l: usize) -> Result<Vec<EquivalenceClass>> {
    let all = enumerate_dendrograms(l)?;
    let mut groups: BTreeMap<String, (usize, Dendrogram)> = BTreeMap::new();
    for d in all {
        groups
            .entry(d.root.shape())
            .and_modify(|g| g.0 += 1)
            .or_insert((1, d));
    }
    let mut classes: Vec<EquivalenceClass> = groups
        .into_iter()
        .map(|(shape, (multiplicity, representative))| EquivalenceClass {
            shape,
            multiplicity,
            representative,
        })
        .collect();
    classes.sort_by_key(|c| {
        let d = &c.representative;
        (
            d.root.internal_count(),
            d.root.depth(),
            std::cmp::Reverse(root_leaf_children(d)),
            c.shape.clone(),
        )
    });
    Ok(classes)
}
