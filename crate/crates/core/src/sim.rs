//! Seeded Monte Carlo harness.
//!
//! Generates hypothesis trees with planted signals, runs each adjustment
//! method on the leaves, and estimates empirical FDR, power, and
//! replication rates. Every draw comes from a counter-based substream of
//! (seed, purpose, replication, leaf), so replications are independent,
//! may run in parallel, and reproduce bit-identically at any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjust::bh_core;
use crate::error::{Error, Result};
use crate::model::{Direction, Hypothesis, HypothesisTree, Node, Truth};
use crate::rng::Stream;
use crate::special;
use crate::stats::ContingencyTable2x2;
use crate::treebh::{derive_node_p, treebh_indexed};

/// How planted signals are placed among the leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clustering {
    /// Non-null leaves packed into the earliest branches.
    Clustered,
    /// Non-null leaves spread evenly across the leaf sequence.
    Scattered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Family size per level, e.g. `[3, 7]` = 3 roots with 7 children each.
    pub tree_shape: Vec<usize>,
    /// Proportion of non-null leaves.
    pub signal_fraction: f64,
    #[serde(default = "default_clustering")]
    pub clustering: Clustering,
    /// Non-centrality of non-null z-scores.
    pub effect: f64,
    #[serde(default = "default_level")]
    pub q: f64,
    pub replications: usize,
    pub seed: u64,
}

fn default_clustering() -> Clustering {
    Clustering::Scattered
}

fn default_level() -> f64 {
    crate::model::DEFAULT_Q
}

impl SimulationConfig {
    /// Parses and validates a JSON config document.
    pub fn from_json(text: &str) -> Result<SimulationConfig> {
        let config: SimulationConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tree_shape.is_empty() {
            return Err(Error::InvalidConfig("tree_shape must be non-empty".into()));
        }
        if self.tree_shape.contains(&0) {
            return Err(Error::InvalidConfig("family sizes must be >= 1".into()));
        }
        let leaves: usize = self.tree_shape.iter().product();
        if leaves > 10_000_000 {
            return Err(Error::InvalidConfig(format!(
                "tree_shape implies {leaves} leaves; limit is 10,000,000"
            )));
        }
        if !(0.0..=1.0).contains(&self.signal_fraction) || self.signal_fraction.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "signal_fraction {} outside [0,1]",
                self.signal_fraction
            )));
        }
        if !self.effect.is_finite() || self.effect < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "effect {} must be finite and >= 0",
                self.effect
            )));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::LevelOutOfRange(self.q));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        Ok(())
    }

    pub fn leaf_count(&self) -> usize {
        self.tree_shape.iter().product()
    }
}

/// A Monte Carlo estimate with its standard error (sample sd / sqrt(reps)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Per-method simulation summary. `power` is absent when the instance has
/// no non-null leaves; `replication_table` is filled by the replication
/// experiment only.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MethodReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_fdr: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replication_table: Option<ContingencyTable2x2>,
}

/// Fixed description of the generative model, embedded in every report.
pub const GENERATOR_NOTE: &str = "one-sided z model chosen by this harness: null leaves draw p ~ Uniform(0,1) \
with a random direction; non-null leaves draw p = 1 - Phi(Z + effect) with Z standard normal and a positive \
direction; internal nodes carry no own p (Simes combination applies); non-null leaves are packed into the \
earliest branches (clustered) or spread evenly (scattered); all draws come from counter-based substreams of \
(seed, purpose, replication, leaf)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub generator: String,
    pub unadjusted: MethodReport,
    pub bonferroni: MethodReport,
    pub bh: MethodReport,
    pub treebh: MethodReport,
}

pub const METHOD_NAMES: [&str; 4] = ["unadjusted", "bonferroni", "bh", "treebh"];

impl SimulationReport {
    fn empty(config: &SimulationConfig) -> Self {
        SimulationReport {
            config: config.clone(),
            generator: GENERATOR_NOTE.to_string(),
            unadjusted: MethodReport::default(),
            bonferroni: MethodReport::default(),
            bh: MethodReport::default(),
            treebh: MethodReport::default(),
        }
    }

    pub fn methods(&self) -> [&MethodReport; 4] {
        [&self.unadjusted, &self.bonferroni, &self.bh, &self.treebh]
    }

    fn methods_mut(&mut self) -> [&mut MethodReport; 4] {
        [
            &mut self.unadjusted,
            &mut self.bonferroni,
            &mut self.bh,
            &mut self.treebh,
        ]
    }

    /// Folds another report over the same config into this one; used to
    /// combine the FDR and replication experiments.
    pub fn merge(mut self, other: SimulationReport) -> SimulationReport {
        for (mine, theirs) in self.methods_mut().into_iter().zip(other.methods()) {
            if mine.empirical_fdr.is_none() {
                mine.empirical_fdr = theirs.empirical_fdr;
            }
            if mine.power.is_none() {
                mine.power = theirs.power;
            }
            if mine.replication_table.is_none() {
                mine.replication_table = theirs.replication_table;
            }
        }
        self
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        out.push_str("simulation report\n");
        out.push_str(&format!(
            "  shape: {:?}  leaves: {}\n",
            c.tree_shape,
            c.leaf_count()
        ));
        let clustering = match c.clustering {
            Clustering::Clustered => "clustered",
            Clustering::Scattered => "scattered",
        };
        out.push_str(&format!(
            "  signal_fraction: {} ({clustering})  effect: {}  q: {}\n",
            c.signal_fraction, c.effect, c.q
        ));
        out.push_str(&format!("  replications: {}  seed: {}\n", c.replications, c.seed));
        out.push_str(&format!("  generator: {}\n", self.generator));
        out.push('\n');
        if self.methods().iter().any(|m| m.empirical_fdr.is_some()) {
            out.push_str(&format!(
                "{:<12}{:>12}{:>10}{:>12}{:>10}\n",
                "method", "fdr", "mc_se", "power", "mc_se"
            ));
            for (name, m) in METHOD_NAMES.iter().zip(self.methods()) {
                let (fdr, fdr_se) = match &m.empirical_fdr {
                    Some(e) => (format!("{:.6}", e.mean), format!("{:.6}", e.std_error)),
                    None => ("-".into(), "-".into()),
                };
                let (pow, pow_se) = match &m.power {
                    Some(e) => (format!("{:.6}", e.mean), format!("{:.6}", e.std_error)),
                    None => ("-".into(), "-".into()),
                };
                out.push_str(&format!(
                    "{name:<12}{fdr:>12}{fdr_se:>10}{pow:>12}{pow_se:>10}\n"
                ));
            }
        }
        if self.methods().iter().any(|m| m.replication_table.is_some()) {
            out.push('\n');
            out.push_str(&format!("replication against an independent follow-up study (alpha = {}):\n", c.q));
            out.push_str(&format!(
                "{:<12}{:>10}{:>10}{:>12}{:>12}{:>12}{:>14}\n",
                "method", "sig+rep", "sig-rep", "nonsig+rep", "nonsig-rep", "rate(sig)", "rate(nonsig)"
            ));
            for (name, m) in METHOD_NAMES.iter().zip(self.methods()) {
                if let Some(t) = &m.replication_table {
                    let rate_sig = rate_str(t.a, t.a + t.b);
                    let rate_non = rate_str(t.c, t.c + t.d);
                    out.push_str(&format!(
                        "{name:<12}{:>10}{:>10}{:>12}{:>12}{rate_sig:>12}{rate_non:>14}\n",
                        t.a, t.b, t.c, t.d
                    ));
                }
            }
        }
        out
    }
}

fn rate_str(num: u64, den: u64) -> String {
    if den == 0 {
        "-".into()
    } else {
        format!("{:.4}", num as f64 / den as f64)
    }
}

/// Static tree structure shared by all replications of one config.
struct Skeleton {
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
    /// Preorder indices of the leaves.
    leaves: Vec<usize>,
    /// True = non-null, per leaf (aligned with `leaves`).
    non_null: Vec<bool>,
    n_signal: usize,
}

impl Skeleton {
    fn build(config: &SimulationConfig) -> Skeleton {
        let shape = &config.tree_shape;
        let mut children: Vec<Vec<usize>> = Vec::new();
        let mut roots = Vec::new();
        let mut leaves = Vec::new();
        // Depth-first construction in document order.
        let mut stack: Vec<(usize, Option<usize>)> = Vec::new(); // (level, parent)
        for _ in 0..shape[0] {
            stack.push((0, None));
        }
        // The stack is LIFO; push roots in reverse to keep document order.
        // (All roots are identical in shape, but keep indices tidy.)
        while let Some((level, parent)) = stack.pop() {
            let idx = children.len();
            children.push(Vec::new());
            match parent {
                Some(p) => children[p].push(idx),
                None => roots.push(idx),
            }
            if level + 1 < shape.len() {
                for _ in 0..shape[level + 1] {
                    stack.push((level + 1, Some(idx)));
                }
            } else {
                leaves.push(idx);
            }
        }

        let leaf_count = leaves.len();
        let n_signal = ((config.signal_fraction * leaf_count as f64).round() as usize)
            .min(leaf_count);
        let mut non_null = vec![false; leaf_count];
        match config.clustering {
            Clustering::Clustered => {
                for flag in non_null.iter_mut().take(n_signal) {
                    *flag = true;
                }
            }
            Clustering::Scattered => {
                for j in 0..n_signal {
                    non_null[j * leaf_count / n_signal.max(1)] = true;
                }
            }
        }
        Skeleton {
            children,
            roots,
            leaves,
            non_null,
            n_signal,
        }
    }
}

/// Stream purposes; distinct experiments never share draws.
const PURPOSE_INSTANCE: u64 = 0;
const PURPOSE_ORIGINAL: u64 = 1;
const PURPOSE_FOLLOW_UP: u64 = 2;

/// One simulated study: leaf p-values and observed directions.
struct Draw {
    p: Vec<f64>,
    direction: Vec<Direction>,
}

fn draw_instance(config: &SimulationConfig, skeleton: &Skeleton, purpose: u64, rep: u64) -> Draw {
    let n = skeleton.leaves.len();
    let mut p = Vec::with_capacity(n);
    let mut direction = Vec::with_capacity(n);
    for leaf in 0..n {
        let mut stream = Stream::substream(config.seed, &[purpose, rep, leaf as u64]);
        if skeleton.non_null[leaf] {
            let z = stream.next_standard_normal();
            // p = 1 - Phi(z + effect), computed as Phi(-(z + effect))
            p.push(special::phi(-(z + config.effect)));
            direction.push(Direction::Positive);
        } else {
            p.push(stream.next_open01());
            direction.push(if stream.next_bool() {
                Direction::Positive
            } else {
                Direction::Negative
            });
        }
    }
    Draw { p, direction }
}

/// Deterministic planted-signal instance for (config.seed, rep_index):
/// leaf truth flags recorded, internal nodes carry no own p.
pub fn generate_instance(config: &SimulationConfig, rep_index: u64) -> Result<HypothesisTree> {
    config.validate()?;
    let skeleton = Skeleton::build(config);
    let draw = draw_instance(config, &skeleton, PURPOSE_INSTANCE, rep_index);

    // leaf position per arena index
    let mut leaf_pos = vec![usize::MAX; skeleton.children.len()];
    for (pos, &idx) in skeleton.leaves.iter().enumerate() {
        leaf_pos[idx] = pos;
    }
    // Assemble nodes in reverse preorder so children exist before parents;
    // ids are materialized position paths.
    let n = skeleton.children.len();
    let mut paths = vec![String::new(); n];
    for (r, &root) in skeleton.roots.iter().enumerate() {
        paths[root] = format!("{}", r + 1);
    }
    for idx in 0..n {
        for (c, &child) in skeleton.children[idx].iter().enumerate() {
            paths[child] = format!("{}.{}", paths[idx], c + 1);
        }
    }
    let mut built: Vec<Option<Node>> = (0..n).map(|_| None).collect();
    for idx in (0..n).rev() {
        let children: Vec<Node> = skeleton.children[idx]
            .iter()
            .map(|&c| built[c].take().expect("child built"))
            .collect();
        let mut hyp = Hypothesis::new(paths[idx].clone(), None);
        if children.is_empty() {
            let pos = leaf_pos[idx];
            hyp.p = Some(draw.p[pos]);
            hyp.direction = draw.direction[pos];
            hyp.truth = if skeleton.non_null[pos] {
                Truth::NonNull
            } else {
                Truth::Null
            };
        }
        built[idx] = Some(Node::with_children(hyp, children));
    }
    let roots = skeleton
        .roots
        .iter()
        .map(|&r| built[r].take().expect("root built"))
        .collect();
    Ok(HypothesisTree::new(roots, config.q))
}

/// Leaf rejection flags for all four methods on one instance.
struct MethodRejections {
    /// Indexed [method][leaf]; method order matches [`METHOD_NAMES`].
    flags: [Vec<bool>; 4],
}

fn reject_leaves(config: &SimulationConfig, skeleton: &Skeleton, draw: &Draw) -> MethodRejections {
    let q = config.q;
    let n = skeleton.leaves.len();
    let m = n as f64;

    let unadjusted: Vec<bool> = draw.p.iter().map(|&p| p <= q).collect();
    let bonferroni: Vec<bool> = draw.p.iter().map(|&p| m * p <= q).collect();
    let bh_adj = bh_core(&draw.p);
    let bh: Vec<bool> = bh_adj.iter().map(|&a| a <= q).collect();

    let treebh = if config.tree_shape.len() == 1 {
        // flat family: the tree procedure reduces to the step-up rule
        bh.clone()
    } else {
        let mut own_p: Vec<Option<f64>> = vec![None; skeleton.children.len()];
        for (pos, &idx) in skeleton.leaves.iter().enumerate() {
            own_p[idx] = Some(draw.p[pos]);
        }
        let raw = derive_node_p(&skeleton.children, &own_p);
        let outcomes = treebh_indexed(&skeleton.children, &skeleton.roots, &raw, q);
        skeleton.leaves.iter().map(|&idx| outcomes[idx].rejected).collect()
    };

    MethodRejections {
        flags: [unadjusted, bonferroni, bh, treebh],
    }
}

struct FdrRepOutcome {
    fdp: [f64; 4],
    tp_rate: [f64; 4],
}

fn fdr_outcomes(config: &SimulationConfig, skeleton: &Skeleton) -> Vec<FdrRepOutcome> {
    (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let draw = draw_instance(config, skeleton, PURPOSE_INSTANCE, rep);
            let rejections = reject_leaves(config, skeleton, &draw);
            let mut outcome = FdrRepOutcome {
                fdp: [0.0; 4],
                tp_rate: [0.0; 4],
            };
            for (mi, flags) in rejections.flags.iter().enumerate() {
                let mut total = 0u64;
                let mut false_rej = 0u64;
                let mut true_rej = 0u64;
                for (leaf, &rej) in flags.iter().enumerate() {
                    if rej {
                        total += 1;
                        if skeleton.non_null[leaf] {
                            true_rej += 1;
                        } else {
                            false_rej += 1;
                        }
                    }
                }
                outcome.fdp[mi] = false_rej as f64 / (total.max(1)) as f64;
                if skeleton.n_signal > 0 {
                    outcome.tp_rate[mi] = true_rej as f64 / skeleton.n_signal as f64;
                }
            }
            outcome
        })
        .collect()
}

/// Kahan-compensated mean over a fixed iteration order.
fn compensated_mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum / n as f64
}

fn estimate(values: &[f64]) -> Estimate {
    let n = values.len();
    let mean = compensated_mean(values.iter().copied(), n);
    let std_error = if n > 1 {
        let ss = compensated_mean(values.iter().map(|v| (v - mean) * (v - mean)), n - 1);
        (ss / n as f64).sqrt()
    } else {
        0.0
    };
    Estimate { mean, std_error }
}

/// Empirical leaf-level FDR and power per method.
pub fn run_fdr_experiment(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let skeleton = Skeleton::build(config);
    let outcomes = fdr_outcomes(config, &skeleton);
    let mut report = SimulationReport::empty(config);
    for (mi, method) in report.methods_mut().into_iter().enumerate() {
        let fdps: Vec<f64> = outcomes.iter().map(|o| o.fdp[mi]).collect();
        method.empirical_fdr = Some(estimate(&fdps));
        if skeleton.n_signal > 0 {
            let tps: Vec<f64> = outcomes.iter().map(|o| o.tp_rate[mi]).collect();
            method.power = Some(estimate(&tps));
        }
    }
    Ok(report)
}

/// Per-replication FDR/power rows as CSV, for external plotting.
pub fn per_replication_csv(config: &SimulationConfig) -> Result<String> {
    config.validate()?;
    let skeleton = Skeleton::build(config);
    let outcomes = fdr_outcomes(config, &skeleton);
    let mut out = String::from("replication,method,fdp,true_positive_rate\n");
    for (rep, o) in outcomes.iter().enumerate() {
        for (mi, name) in METHOD_NAMES.iter().enumerate() {
            let tp = if skeleton.n_signal > 0 {
                format!("{}", o.tp_rate[mi])
            } else {
                String::new()
            };
            out.push_str(&format!("{rep},{name},{},{tp}\n", o.fdp[mi]));
        }
    }
    Ok(out)
}

/// Simulated original + follow-up pairs sharing truth flags; classifies
/// each leaf by original-study significance (per method) against the
/// two-study replication criterion at alpha = q.
pub fn run_replication_experiment(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let skeleton = Skeleton::build(config);
    let q = config.q;

    let tables: Vec<[[u64; 4]; 4]> = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let original = draw_instance(config, &skeleton, PURPOSE_ORIGINAL, rep);
            let follow_up = draw_instance(config, &skeleton, PURPOSE_FOLLOW_UP, rep);
            let rejections = reject_leaves(config, &skeleton, &original);
            let mut counts = [[0u64; 4]; 4]; // [method][a,b,c,d]
            for leaf in 0..skeleton.leaves.len() {
                let replicated = original.p[leaf] <= q
                    && follow_up.p[leaf] <= q
                    && original.direction[leaf] == follow_up.direction[leaf];
                for (mi, flags) in rejections.flags.iter().enumerate() {
                    let cell = match (flags[leaf], replicated) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, true) => 2,
                        (false, false) => 3,
                    };
                    counts[mi][cell] += 1;
                }
            }
            counts
        })
        .collect();

    let mut totals = [[0u64; 4]; 4];
    for t in &tables {
        for mi in 0..4 {
            for cell in 0..4 {
                totals[mi][cell] += t[mi][cell];
            }
        }
    }

    let mut report = SimulationReport::empty(config);
    for (mi, method) in report.methods_mut().into_iter().enumerate() {
        let [a, b, c, d] = totals[mi];
        method.replication_table = Some(ContingencyTable2x2::new(a, b, c, d));
    }
    Ok(report)
}

/// Runs both experiments and merges them into one report.
pub fn run_full_experiment(config: &SimulationConfig) -> Result<SimulationReport> {
    let fdr = run_fdr_experiment(config)?;
    let replication = run_replication_experiment(config)?;
    Ok(fdr.merge(replication))
}
