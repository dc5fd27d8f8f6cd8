//! Shared test oracles, independent of the library's implementation paths.
//!
//! Each test binary uses its own subset of these helpers.
#![allow(dead_code)]

use hierfdr::rng::Stream;
use hierfdr::{Hypothesis, HypothesisTree, Node};
use std::collections::BTreeSet;

/// Standard normal CDF by adaptive Simpson quadrature of the density.
/// Tolerance is far below the 1e-12 accuracy being verified.
pub fn phi_quadrature(z: f64) -> f64 {
    if z < 0.0 {
        return 1.0 - phi_quadrature(-z);
    }
    0.5 + integrate(normal_density, 0.0, z, 1e-15)
}

fn normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Adaptive Simpson on [a, b].
pub fn integrate(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: impl Fn(f64) -> f64 + Copy,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 40)
}

/// Student t CDF by numeric integration of the unnormalized density, with
/// the normalizing constant itself obtained by quadrature.
pub fn t_cdf_quadrature(t: f64, df: f64) -> f64 {
    let dens = move |x: f64| (1.0 + x * x / df).powf(-0.5 * (df + 1.0));
    // polynomial tails: beyond |x| = 400 the mass is negligible for df >= 1
    let norm = integrate(dens, -400.0, 400.0, 1e-13);
    if t <= -400.0 {
        return 0.0;
    }
    if t >= 400.0 {
        return 1.0;
    }
    integrate(dens, -400.0, t, 1e-13) / norm
}

/// Brute-force step-up oracle: find the largest k with p_(k) <= k * q / m
/// and reject the k smallest p-values.
pub fn step_up_reject(pvals: &[f64], q: f64) -> BTreeSet<usize> {
    step_up_reject_tol(pvals, q, 0.0)
}

/// Step-up scan with a relative slack on the cutoff. The slack recovers
/// the mathematical inequality when q itself was derived from a candidate
/// value m * p_(j) / j and re-multiplying rounds a hair below p_(j).
pub fn step_up_reject_tol(pvals: &[f64], q: f64, rel_tol: f64) -> BTreeSet<usize> {
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].partial_cmp(&pvals[b]).unwrap());
    let mut k = 0;
    for i in 1..=m {
        let cutoff = i as f64 * q / m as f64;
        if pvals[order[i - 1]] <= cutoff * (1.0 + rel_tol) {
            k = i;
        }
    }
    order[..k].iter().copied().collect()
}

/// Adjusted p-values recovered from the rejection oracle alone: the
/// smallest candidate level at which each hypothesis enters the rejection
/// set.
pub fn step_up_adjusted(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len();
    let mut candidates: Vec<f64> = Vec::with_capacity(m + 1);
    let mut sorted = pvals.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (i, &p) in sorted.iter().enumerate() {
        candidates.push((m as f64 * p / (i + 1) as f64).min(1.0));
    }
    candidates.push(1.0);
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut adjusted = vec![1.0_f64; m];
    for &level in &candidates {
        if level <= 0.0 {
            continue;
        }
        let rejected = step_up_reject_tol(pvals, level, 1e-12);
        for &i in &rejected {
            if level < adjusted[i] {
                adjusted[i] = level;
            }
        }
    }
    adjusted
}

/// Literal recursive restatement of the hierarchical procedure, built on
/// the brute-force oracle above rather than the library's suffix-min core.
pub struct ReferenceOutcome {
    pub id: String,
    pub adjusted_p: f64,
    pub rejected: bool,
    pub tested: bool,
    pub fraction: f64,
}

pub fn reference_treebh(tree: &HypothesisTree, q: f64) -> Vec<ReferenceOutcome> {
    let mut out = Vec::new();
    let roots: Vec<&Node> = tree.roots.iter().collect();
    reference_family(&roots, q, 1.0, true, 0.0, &mut out);
    out
}

fn reference_node_p(node: &Node) -> f64 {
    if let Some(p) = node.hypothesis.p {
        return p;
    }
    let mut ps: Vec<f64> = node.children.iter().map(reference_node_p).collect();
    ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = ps.len() as f64;
    ps.iter()
        .enumerate()
        .map(|(i, &p)| m * p / (i + 1) as f64)
        .fold(f64::INFINITY, f64::min)
}

fn reference_family(
    members: &[&Node],
    q: f64,
    fraction: f64,
    tested: bool,
    parent_adjusted: f64,
    out: &mut Vec<ReferenceOutcome>,
) {
    let ps: Vec<f64> = members.iter().map(|n| reference_node_p(n)).collect();
    let within = step_up_adjusted(&ps);
    let level = q * fraction;
    let reject_set = step_up_reject(&ps, level);
    let rejections = if tested { reject_set.len() } else { 0 };
    let m = members.len();
    for (i, node) in members.iter().enumerate() {
        let rejected = tested && reject_set.contains(&i);
        let adjusted = (within[i] / fraction).max(parent_adjusted).min(1.0);
        out.push(ReferenceOutcome {
            id: node.hypothesis.id.clone(),
            adjusted_p: adjusted,
            rejected,
            tested,
            fraction,
        });
        if !node.children.is_empty() {
            let children: Vec<&Node> = node.children.iter().collect();
            if rejected {
                reference_family(
                    &children,
                    q,
                    fraction * rejections as f64 / m as f64,
                    true,
                    adjusted,
                    out,
                );
            } else {
                reference_family(&children, q, fraction, false, adjusted, out);
            }
        }
    }
}

/// Random p-value family for oracle comparisons.
pub fn random_family(stream: &mut Stream, max_len: usize) -> Vec<f64> {
    let len = 1 + (stream.next_u64() as usize) % max_len;
    (0..len).map(|_| stream.next_open01()).collect()
}

/// Random multi-level tree: every leaf has a p-value, internal nodes may
/// or may not carry their own.
pub fn random_tree(stream: &mut Stream, max_depth: usize) -> HypothesisTree {
    let mut counter = 0usize;
    let root_count = 1 + (stream.next_u64() as usize) % 4;
    let roots = (0..root_count)
        .map(|_| random_node(stream, max_depth, &mut counter))
        .collect();
    HypothesisTree::new(roots, 0.05)
}

fn random_node(stream: &mut Stream, depth_left: usize, counter: &mut usize) -> Node {
    *counter += 1;
    let id = format!("n{counter}");
    let branch = depth_left > 0 && stream.next_u64() % 100 < 55;
    if branch {
        let n_children = 1 + (stream.next_u64() as usize) % 4;
        let children: Vec<Node> = (0..n_children)
            .map(|_| random_node(stream, depth_left - 1, counter))
            .collect();
        // internal nodes sometimes carry their own p
        let own_p = if stream.next_u64() % 100 < 30 {
            Some(stream.next_open01())
        } else {
            None
        };
        Node::with_children(Hypothesis::new(id, own_p), children)
    } else {
        Node::leaf(Hypothesis::new(id, Some(stream.next_open01())))
    }
}
