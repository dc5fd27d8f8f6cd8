//! Hypotheses, families, and hypothesis trees.
//!
//! A [`HypothesisTree`] is a forest of [`Node`]s: the root nodes form one
//! testing family, and every node's children form another. Trees are
//! immutable after construction; all procedures take `&HypothesisTree`.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

use crate::arena::Arena;
use crate::error::{Error, Result};

/// Direction of an observed effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
    #[default]
    None,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Positive => write!(f, "positive"),
            Direction::Negative => write!(f, "negative"),
            Direction::None => write!(f, "none"),
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Direction::Positive),
            "negative" => Ok(Direction::Negative),
            "none" | "" => Ok(Direction::None),
            other => Err(format!(
                "unknown direction \"{other}\" (expected positive, negative, or none)"
            )),
        }
    }
}

/// Ground-truth status of a hypothesis, used by the simulation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truth {
    Null,
    NonNull,
    #[default]
    Unknown,
}

/// One tested hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Unique identifier within its tree.
    pub id: String,
    /// Raw p-value; absent on nodes whose p is derived from children.
    pub p: Option<f64>,
    pub direction: Direction,
    /// Free-text label.
    pub label: Option<String>,
    pub truth: Truth,
}

impl Hypothesis {
    pub fn new(id: impl Into<String>, p: Option<f64>) -> Self {
        Hypothesis {
            id: id.into(),
            p,
            direction: Direction::None,
            label: None,
            truth: Truth::Unknown,
        }
    }
}

/// A tree node: a hypothesis plus its ordered child family.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub hypothesis: Hypothesis,
    pub children: Vec<Node>,
}

impl Node {
    pub fn leaf(hypothesis: Hypothesis) -> Self {
        Node {
            hypothesis,
            children: Vec::new(),
        }
    }

    pub fn with_children(hypothesis: Hypothesis, children: Vec<Node>) -> Self {
        Node {
            hypothesis,
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A rooted forest of hypotheses with a target FDR level.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisTree {
    /// The root family, in document order.
    pub roots: Vec<Node>,
    /// Target FDR level, default 0.05.
    pub q: f64,
}

pub const DEFAULT_Q: f64 = 0.05;

impl HypothesisTree {
    pub fn new(roots: Vec<Node>, q: f64) -> Self {
        HypothesisTree { roots, q }
    }

    /// Iterative preorder visit in document order. `f` receives each node
    /// and the dot-joined path of its ancestor ids (empty for roots).
    pub fn visit<'a>(&'a self, mut f: impl FnMut(&'a Node, &str)) {
        enum Step<'a> {
            Enter(&'a Node),
            Restore(usize),
        }
        let mut path = String::new();
        let mut stack: Vec<Step<'a>> = self.roots.iter().rev().map(Step::Enter).collect();
        while let Some(step) = stack.pop() {
            match step {
                Step::Enter(node) => {
                    f(node, &path);
                    if !node.children.is_empty() {
                        stack.push(Step::Restore(path.len()));
                        for child in node.children.iter().rev() {
                            stack.push(Step::Enter(child));
                        }
                        if !path.is_empty() {
                            path.push('.');
                        }
                        path.push_str(&node.hypothesis.id);
                    }
                }
                Step::Restore(len) => path.truncate(len),
            }
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(|_, _| n += 1);
        n
    }

    pub fn leaf_count(&self) -> usize {
        let mut n = 0;
        self.visit(|node, _| {
            if node.is_leaf() {
                n += 1;
            }
        });
        n
    }

    /// Checks every type invariant; returns all violations found.
    pub fn validate(&self) -> Vec<Violation> {
        validate_tree(self)
    }
}

// Deep trees must not overflow the stack when dropped, so unhook children
// onto an explicit work list instead of letting Vec<Node> recurse.
impl Drop for Node {
    fn drop(&mut self) {
        if self.children.is_empty() {
            return;
        }
        let mut stack: Vec<Node> = std::mem::take(&mut self.children);
        while let Some(mut node) = stack.pop() {
            stack.append(&mut node.children);
        }
    }
}

/// A single invariant violation found by [`validate_tree`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyTree,
    LevelOutOfRange { q: f64 },
    DuplicateId { id: String, path: String },
    PValueOutOfRange { id: String, path: String, value: f64 },
    NoDerivablePValue { id: String, path: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyTree => write!(f, "empty tree: at least one node is required"),
            Violation::LevelOutOfRange { q } => write!(f, "q level {q} outside (0,1)"),
            Violation::DuplicateId { id, path } => {
                write!(f, "duplicate node id \"{id}\" at {path}")
            }
            Violation::PValueOutOfRange { id, path, value } => {
                write!(f, "p outside [0,1]: node \"{id}\" at {path} has p = {value}")
            }
            Violation::NoDerivablePValue { id, path } => write!(
                f,
                "no p-value derivable: node \"{id}\" at {path} has no p and no descendant carries one"
            ),
        }
    }
}

impl Violation {
    /// Maps a violation onto the matching [`Error`] variant.
    pub fn into_error(self) -> Error {
        match self {
            Violation::EmptyTree => Error::EmptyTree,
            Violation::LevelOutOfRange { q } => Error::LevelOutOfRange(q),
            Violation::DuplicateId { id, path } => Error::DuplicateId { id, path },
            Violation::PValueOutOfRange { id, path, value } => Error::PValueOutOfRange {
                at: format!("node \"{id}\" ({path})"),
                value,
            },
            Violation::NoDerivablePValue { id, .. } => Error::NoDerivablePValue(id),
        }
    }
}

/// Checks all tree invariants without mutating the input. An empty report
/// means the tree is valid.
pub fn validate_tree(tree: &HypothesisTree) -> Vec<Violation> {
    let mut violations = Vec::new();
    if tree.roots.is_empty() {
        violations.push(Violation::EmptyTree);
    }
    if !(tree.q > 0.0 && tree.q < 1.0) {
        violations.push(Violation::LevelOutOfRange { q: tree.q });
    }

    let arena = Arena::from_tree(tree);
    let derivable = arena.derivable_p();
    let mut seen: HashSet<&str> = HashSet::new();
    for (idx, node) in arena.nodes.iter().enumerate() {
        let hyp = &node.hypothesis;
        if !seen.insert(hyp.id.as_str()) {
            violations.push(Violation::DuplicateId {
                id: hyp.id.clone(),
                path: arena.full_path(idx),
            });
        }
        if let Some(p) = hyp.p {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                violations.push(Violation::PValueOutOfRange {
                    id: hyp.id.clone(),
                    path: arena.full_path(idx),
                    value: p,
                });
            }
        } else if !derivable[idx] {
            violations.push(Violation::NoDerivablePValue {
                id: hyp.id.clone(),
                path: arena.full_path(idx),
            });
        }
    }
    violations
}

/// Validates and converts the first violation into an error.
pub fn ensure_valid(tree: &HypothesisTree) -> Result<()> {
    match validate_tree(tree).into_iter().next() {
        None => Ok(()),
        Some(v) => Err(v.into_error()),
    }
}
