//! Hierarchical step-up testing on a hypothesis tree.
//!
//! Families are tested top-down. The root family is tested at level q; the
//! child family of every rejected node is tested at q scaled by the
//! cumulative product of selection fractions R/m over its ancestor
//! families. Subtrees under non-rejected nodes are never tested ("turned
//! off") but still report adjusted p-values, with the selection fraction
//! frozen at the parent's value.
//!
//! Traversal is an explicit work queue throughout, so tree depth is
//! unlimited.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::adjust::bh_core;
use crate::arena::Arena;
use crate::error::{Error, Result};
use crate::model::{ensure_valid, HypothesisTree, Node};

/// Per-node outcome of the hierarchical procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentResult {
    pub node_id: String,
    /// The node's own p, or the Simes combination of its children when the
    /// node carries none.
    pub raw_p: f64,
    pub adjusted_p: f64,
    pub rejected: bool,
    /// Effective q for this node's family: q times the selection fraction.
    pub family_level: f64,
    /// False when an ancestor was not rejected, so this node's family was
    /// never tested.
    pub tested: bool,
    /// Cumulative product of R/m over ancestor families.
    pub selection_fraction: f64,
}

/// The node's own p-value if present, else the Simes combination
/// `min_i (m * p_(i) / i)` over its m children (recursively derived).
pub fn node_p(node: &Node) -> Result<f64> {
    // Flatten the subtree with parent links, then fill values in reverse
    // preorder so every child is ready before its parent.
    let mut nodes: Vec<&Node> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();
    let mut stack: Vec<(&Node, Option<usize>)> = vec![(node, None)];
    while let Some((n, par)) = stack.pop() {
        let idx = nodes.len();
        nodes.push(n);
        parent.push(par);
        for child in n.children.iter().rev() {
            stack.push((child, Some(idx)));
        }
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (i, par) in parent.iter().enumerate() {
        if let Some(p) = par {
            children[*p].push(i);
        }
    }
    let mut values: Vec<f64> = vec![f64::NAN; nodes.len()];
    for i in (0..nodes.len()).rev() {
        if let Some(p) = nodes[i].hypothesis.p {
            values[i] = p;
            continue;
        }
        if children[i].is_empty() {
            return Err(Error::NoDerivablePValue(nodes[i].hypothesis.id.clone()));
        }
        let mut child_ps: Vec<f64> = children[i].iter().map(|&c| values[c]).collect();
        values[i] = simes(&mut child_ps);
    }
    Ok(values[0])
}

/// Simes combination of a family of p-values; sorts in place.
fn simes(ps: &mut [f64]) -> f64 {
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = ps.len() as f64;
    ps.iter()
        .enumerate()
        .map(|(i, &p)| m * p / (i + 1) as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Crate-internal result on arena indices, shared with the simulation
/// harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ArenaOutcome {
    pub raw_p: f64,
    pub adjusted_p: f64,
    pub rejected: bool,
    pub family_level: f64,
    pub tested: bool,
    pub selection_fraction: f64,
}

/// Derived p per node: own p, else Simes over children. Nodes are indexed
/// in preorder, so children always carry larger indices than their parent
/// and one reverse pass suffices. Requires every node to have a derivable
/// p (validated upstream).
pub(crate) fn derive_node_p(children: &[Vec<usize>], own_p: &[Option<f64>]) -> Vec<f64> {
    let mut values = vec![f64::NAN; own_p.len()];
    for idx in (0..own_p.len()).rev() {
        values[idx] = match own_p[idx] {
            Some(p) => p,
            None => {
                let mut child_ps: Vec<f64> = children[idx].iter().map(|&c| values[c]).collect();
                simes(&mut child_ps)
            }
        };
    }
    values
}

/// The hierarchical procedure on a preorder-indexed forest.
pub(crate) fn treebh_indexed(
    children: &[Vec<usize>],
    roots: &[usize],
    raw: &[f64],
    q: f64,
) -> Vec<ArenaOutcome> {
    let mut out: Vec<Option<ArenaOutcome>> = vec![None; raw.len()];

    struct FamilyJob<'f> {
        members: &'f [usize],
        fraction: f64,
        tested: bool,
        parent_adjusted: f64,
    }

    let mut queue: VecDeque<FamilyJob<'_>> = VecDeque::new();
    queue.push_back(FamilyJob {
        members: roots,
        fraction: 1.0,
        tested: true,
        parent_adjusted: 0.0,
    });

    while let Some(job) = queue.pop_front() {
        let ps: Vec<f64> = job.members.iter().map(|&i| raw[i]).collect();
        let within = bh_core(&ps);
        let family_level = q * job.fraction;
        let m = job.members.len();
        let rejections = if job.tested {
            within.iter().filter(|&&w| w <= family_level).count()
        } else {
            0
        };
        let child_fraction = job.fraction * rejections as f64 / m as f64;

        for (k, &idx) in job.members.iter().enumerate() {
            let rejected = job.tested && within[k] <= family_level;
            let adjusted = (within[k] / job.fraction).max(job.parent_adjusted).min(1.0);
            out[idx] = Some(ArenaOutcome {
                raw_p: raw[idx],
                adjusted_p: adjusted,
                rejected,
                family_level,
                tested: job.tested,
                selection_fraction: job.fraction,
            });
            if !children[idx].is_empty() {
                let (fraction, tested) = if rejected {
                    (child_fraction, true)
                } else {
                    // turned-off branch: fraction frozen at the parent's value
                    (job.fraction, false)
                };
                queue.push_back(FamilyJob {
                    members: &children[idx],
                    fraction,
                    tested,
                    parent_adjusted: adjusted,
                });
            }
        }
    }

    out.into_iter().map(|o| o.expect("every node visited")).collect()
}

pub(crate) fn treebh_arena(arena: &Arena<'_>, q: f64) -> Vec<ArenaOutcome> {
    let own_p: Vec<Option<f64>> = arena.nodes.iter().map(|n| n.hypothesis.p).collect();
    let raw = derive_node_p(&arena.children, &own_p);
    treebh_indexed(&arena.children, &arena.roots, &raw, q)
}

/// Runs the hierarchical procedure at level q. Results come back in
/// preorder document order, one entry per node.
pub fn treebh(tree: &HypothesisTree, q: f64) -> Result<Vec<AdjustmentResult>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::LevelOutOfRange(q));
    }
    ensure_valid(tree)?;
    let arena = Arena::from_tree(tree);
    let outcomes = treebh_arena(&arena, q);
    Ok(outcomes
        .into_iter()
        .enumerate()
        .map(|(idx, o)| AdjustmentResult {
            node_id: arena.nodes[idx].hypothesis.id.clone(),
            raw_p: o.raw_p,
            adjusted_p: o.adjusted_p,
            rejected: o.rejected,
            family_level: o.family_level,
            tested: o.tested,
            selection_fraction: o.selection_fraction,
        })
        .collect())
}

/// Ids of non-rejected nodes that have children: their subtrees were never
/// tested.
pub fn turned_off_branches(tree: &HypothesisTree, results: &[AdjustmentResult]) -> Vec<String> {
    let arena = Arena::from_tree(tree);
    results
        .iter()
        .enumerate()
        .filter(|(idx, r)| !r.rejected && !arena.children[*idx].is_empty())
        .map(|(_, r)| r.node_id.clone())
        .collect()
}
