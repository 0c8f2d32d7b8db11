//! Explicit embeddings that reproduce any transition distribution on a
//! finite derivation tree.
//!
//! Each node `n` gets an orthonormal basis vector `b_n`. With
//! `e_root = b_root` and `e_c = log p(c | parent) · b_parent + b_c`, the dot
//! product between a node and its child reduces to the child's log
//! probability, so the softmax over a node's children returns exactly the
//! prescribed probabilities.

use super::{compatibility, log_softmax};
use crate::error::{Error, Result};

/// A rooted tree with a transition probability on every edge.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DerivationTree {
    parent: Vec<Option<usize>>,
    edge_prob: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl DerivationTree {
    /// A tree holding only its root (node 0).
    pub fn new() -> Self {
        DerivationTree {
            parent: vec![None],
            edge_prob: vec![1.0],
            children: vec![Vec::new()],
        }
    }

    /// Adds a child of `parent` reached with probability `p`; returns its id.
    pub fn add_child(&mut self, parent: usize, p: f64) -> Result<usize> {
        if parent >= self.parent.len() {
            return Err(Error::IndexOutOfRange {
                index: parent,
                len: self.parent.len(),
            });
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Domain(format!("edge probability {p} outside (0, 1]")));
        }
        let id = self.parent.len();
        self.parent.push(Some(parent));
        self.edge_prob.push(p);
        self.children.push(Vec::new());
        self.children[parent].push(id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, n: usize) -> Option<usize> {
        self.parent[n]
    }

    pub fn children(&self, n: usize) -> &[usize] {
        &self.children[n]
    }

    pub fn edge_probability(&self, n: usize) -> f64 {
        self.edge_prob[n]
    }

    /// Checks that the outgoing probabilities of every internal node sum to one.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (n, kids) in self.children.iter().enumerate() {
            if kids.is_empty() {
                continue;
            }
            let s: f64 = kids.iter().map(|&k| self.edge_prob[k]).sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::Domain(format!("outgoing probabilities of node {n} sum to {s}")));
            }
        }
        Ok(())
    }
}

/// One `dim`-dimensional embedding per tree node, with `dim ≥` number of nodes.
pub fn construct_universal_embeddings(tree: &DerivationTree, dim: usize) -> Result<Vec<Vec<f64>>> {
    let n = tree.len();
    if dim < n {
        return Err(Error::DimensionTooSmall { dim, nodes: n });
    }
    Ok((0..n)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            if let Some(p) = tree.parent(i) {
                e[p] = tree.edge_probability(i).ln();
            }
            e
        })
        .collect())
}

/// The softmax transition probabilities the embeddings induce on each child
/// of `node`, in the order of [`DerivationTree::children`].
pub fn tree_transition_probabilities(tree: &DerivationTree, embeddings: &[Vec<f64>], node: usize) -> Result<Vec<f64>> {
    let scores = tree
        .children(node)
        .iter()
        .map(|&c| compatibility(&embeddings[node], &embeddings[c]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(log_softmax(&scores).into_iter().map(f64::exp).collect())
}
