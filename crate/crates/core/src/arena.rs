//! Crate-internal flattened view of a tree.
//!
//! The adjustment procedures and the simulation harness work on index-based
//! arenas instead of the owned node structure: traversal is iterative (no
//! recursion, so depth is unlimited) and the hot paths avoid string handling.

use crate::model::{HypothesisTree, Node};

pub(crate) struct Arena<'a> {
    /// Nodes in preorder document order.
    pub nodes: Vec<&'a Node>,
    pub parent: Vec<Option<usize>>,
    /// Child indices per node, in document order.
    pub children: Vec<Vec<usize>>,
    /// Indices of the root family, in document order.
    pub roots: Vec<usize>,
}

impl<'a> Arena<'a> {
    pub fn from_tree(tree: &'a HypothesisTree) -> Self {
        let mut arena = Arena {
            nodes: Vec::new(),
            parent: Vec::new(),
            children: Vec::new(),
            roots: Vec::new(),
        };
        // Stack of (node, parent index); reversed pushes keep document order.
        let mut stack: Vec<(&'a Node, Option<usize>)> = Vec::new();
        for root in tree.roots.iter().rev() {
            stack.push((root, None));
        }
        while let Some((node, parent)) = stack.pop() {
            let idx = arena.nodes.len();
            arena.nodes.push(node);
            arena.parent.push(parent);
            arena.children.push(Vec::with_capacity(node.children.len()));
            match parent {
                Some(p) => arena.children[p].push(idx),
                None => arena.roots.push(idx),
            }
            for child in node.children.iter().rev() {
                stack.push((child, Some(idx)));
            }
        }
        arena
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Dot-joined ancestor ids (exclusive of the node itself).
    pub fn ancestor_path(&self, idx: usize) -> String {
        let mut ids = Vec::new();
        let mut cur = self.parent[idx];
        while let Some(i) = cur {
            ids.push(self.nodes[i].hypothesis.id.as_str());
            cur = self.parent[i];
        }
        ids.reverse();
        ids.join(".")
    }

    /// Dot-joined path including the node's own id.
    pub fn full_path(&self, idx: usize) -> String {
        let ancestors = self.ancestor_path(idx);
        if ancestors.is_empty() {
            self.nodes[idx].hypothesis.id.clone()
        } else {
            format!("{ancestors}.{}", self.nodes[idx].hypothesis.id)
        }
    }

    /// True per node when the node or some descendant carries an own p-value.
    /// Computed in one reverse-preorder pass (children precede parents).
    pub fn derivable_p(&self) -> Vec<bool> {
        let mut has_p = vec![false; self.len()];
        for idx in (0..self.len()).rev() {
            has_p[idx] = self.nodes[idx].hypothesis.p.is_some()
                || self.children[idx].iter().any(|&c| has_p[c]);
        }
        has_p
    }
}
