//! Document formats for hypothesis trees and adjustment results.
//!
//! JSON documents nest children directly:
//!
//! ```json
//! {"q": 0.05, "nodes": [{"id": "a", "p": 0.0172, "direction": "positive",
//!                        "children": [{"id": "a1", "p": 0.03}]}]}
//! ```
//!
//! CSV documents are path-encoded with a required header row; `path` is
//! the dot-separated list of ancestor ids (empty for roots):
//!
//! ```csv
//! path,id,p,direction
//! ,a,0.0172,positive
//! a,a1,0.03,
//! ```
//!
//! `p` may be empty on internal nodes. Serialized results append the
//! adjustment columns; parsing ignores them, so serialized output parses
//! back into the identical tree. Node ids are optional in JSON and are
//! auto-generated as materialized position paths ("1.2.3") when absent.
//! Very deep trees should use CSV: nested JSON is limited to 128 levels.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{ensure_valid, Direction, Hypothesis, HypothesisTree, Node, Truth, DEFAULT_Q};
use crate::treebh::AdjustmentResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentFormat {
    Json,
    Csv,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    #[serde(default = "default_q")]
    q: f64,
    nodes: Vec<NodeDoc>,
}

fn default_q() -> f64 {
    DEFAULT_Q
}

#[derive(Serialize, Deserialize, Default)]
struct NodeDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "direction_is_none")]
    direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "truth_is_unknown")]
    truth: Truth,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<NodeDoc>,
    // Adjustment columns, present in serialized results and ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_adj: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rejected: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tested: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    selection_fraction: Option<f64>,
}

fn direction_is_none(d: &Direction) -> bool {
    *d == Direction::None
}

fn truth_is_unknown(t: &Truth) -> bool {
    *t == Truth::Unknown
}

/// Parses and validates a tree document.
pub fn parse_tree(text: &str, format: DocumentFormat) -> Result<HypothesisTree> {
    let tree = match format {
        DocumentFormat::Json => parse_json(text)?,
        DocumentFormat::Csv => parse_csv(text)?,
    };
    ensure_valid(&tree)?;
    Ok(tree)
}

fn parse_json(text: &str) -> Result<HypothesisTree> {
    let doc: TreeDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: Some(e.line()),
        msg: e.to_string(),
    })?;
    let mut roots = Vec::with_capacity(doc.nodes.len());
    for (i, node) in doc.nodes.into_iter().enumerate() {
        roots.push(doc_to_node(node, &format!("{}", i + 1)));
    }
    Ok(HypothesisTree::new(roots, doc.q))
}

// Depth here is bounded by serde_json's recursion limit of 128, so plain
// recursion is safe.
fn doc_to_node(doc: NodeDoc, position: &str) -> Node {
    let id = doc.id.unwrap_or_else(|| position.to_string());
    let mut hyp = Hypothesis::new(id, doc.p);
    hyp.direction = doc.direction;
    hyp.label = doc.label;
    hyp.truth = doc.truth;
    let children = doc
        .children
        .into_iter()
        .enumerate()
        .map(|(i, c)| doc_to_node(c, &format!("{position}.{}", i + 1)))
        .collect();
    Node::with_children(hyp, children)
}

fn parse_csv(text: &str) -> Result<HypothesisTree> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: Some(1),
            msg: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (path_col, id_col) = match (col("path"), col("id")) {
        (Some(p), Some(i)) => (p, i),
        _ => {
            return Err(Error::Parse {
                line: Some(1),
                msg: "header row must contain \"path\" and \"id\" columns".into(),
            })
        }
    };
    let p_col = col("p");
    let dir_col = col("direction");
    let label_col = col("label");
    let truth_col = col("truth");

    struct Row {
        hyp: Hypothesis,
        parent: Option<usize>,
        children: Vec<usize>,
    }

    let mut rows: Vec<Row> = Vec::new();
    let mut index_by_id: HashMap<String, usize> = HashMap::new();
    let mut path_by_id: HashMap<String, String> = HashMap::new();

    for (rec_idx, record) in reader.records().enumerate() {
        let line = rec_idx + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse {
            line: Some(line),
            msg: e.to_string(),
        })?;
        let field = |c: Option<usize>| c.and_then(|c| record.get(c)).unwrap_or("");

        let id = field(Some(id_col)).to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                line: Some(line),
                msg: "empty id".into(),
            });
        }
        let path = field(Some(path_col)).to_string();
        if !path.is_empty() && path.split('.').any(|part| part == id) {
            return Err(Error::CycleDetected { id, path });
        }

        let p = match field(p_col) {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| Error::Parse {
                line: Some(line),
                msg: format!("invalid p-value \"{s}\" for node \"{id}\""),
            })?),
        };
        let direction: Direction = field(dir_col).parse().map_err(|e| Error::Parse {
            line: Some(line),
            msg: e,
        })?;
        let truth = match field(truth_col) {
            "" | "unknown" => Truth::Unknown,
            "null" => Truth::Null,
            "non-null" => Truth::NonNull,
            s => {
                return Err(Error::Parse {
                    line: Some(line),
                    msg: format!("unknown truth value \"{s}\""),
                })
            }
        };

        let parent = if path.is_empty() {
            None
        } else {
            let parent_id = path.rsplit('.').next().unwrap().to_string();
            let parent_idx =
                *index_by_id
                    .get(&parent_id)
                    .ok_or_else(|| Error::UnknownParent {
                        id: id.clone(),
                        parent: parent_id.clone(),
                    })?;
            let expected = &path_by_id[&parent_id];
            if expected != &path {
                return Err(Error::Parse {
                    line: Some(line),
                    msg: format!(
                        "path \"{path}\" for node \"{id}\" does not match its parent's path \"{expected}\""
                    ),
                });
            }
            Some(parent_idx)
        };

        let mut hyp = Hypothesis::new(id.clone(), p);
        hyp.direction = direction;
        hyp.truth = truth;
        hyp.label = match field(label_col) {
            "" => None,
            s => Some(s.to_string()),
        };

        let idx = rows.len();
        if index_by_id.insert(id.clone(), idx).is_some() {
            return Err(Error::DuplicateId {
                id,
                path: path.clone(),
            });
        }
        let own_path = if path.is_empty() {
            id.clone()
        } else {
            format!("{path}.{id}")
        };
        path_by_id.insert(id, own_path);
        if let Some(p) = parent {
            rows[p].children.push(idx);
        }
        rows.push(Row {
            hyp,
            parent,
            children: Vec::new(),
        });
    }

    // Children always follow their parents, so building back-to-front has
    // every child ready when its parent is assembled.
    let n = rows.len();
    let mut built: Vec<Option<Node>> = (0..n).map(|_| None).collect();
    let mut parents: Vec<Option<usize>> = Vec::with_capacity(n);
    let mut child_lists: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut hyps: Vec<Hypothesis> = Vec::with_capacity(n);
    for row in rows {
        parents.push(row.parent);
        child_lists.push(row.children);
        hyps.push(row.hyp);
    }
    for i in (0..n).rev() {
        let children: Vec<Node> = child_lists[i]
            .iter()
            .map(|&c| built[c].take().expect("child built"))
            .collect();
        built[i] = Some(Node::with_children(hyps[i].clone(), children));
    }
    let roots: Vec<Node> = (0..n)
        .filter(|&i| parents[i].is_none())
        .map(|i| built[i].take().expect("root built"))
        .collect();
    Ok(HypothesisTree::new(roots, DEFAULT_Q))
}

/// Serializes a tree without results; parses back to the identical tree.
pub fn serialize_tree(tree: &HypothesisTree, format: DocumentFormat) -> Result<String> {
    serialize_impl(tree, None, format)
}

/// Serializes a tree with one adjustment result per node. Raw and adjusted
/// p-values are printed in shortest round-trip form, so re-parsing
/// reproduces the tree exactly.
pub fn serialize_results(
    tree: &HypothesisTree,
    results: &[AdjustmentResult],
    format: DocumentFormat,
) -> Result<String> {
    serialize_impl(tree, Some(results), format)
}

fn serialize_impl(
    tree: &HypothesisTree,
    results: Option<&[AdjustmentResult]>,
    format: DocumentFormat,
) -> Result<String> {
    ensure_valid(tree)?;
    let lookup = match results {
        Some(results) => Some(build_result_lookup(tree, results)?),
        None => None,
    };
    match format {
        DocumentFormat::Json => serialize_json(tree, lookup.as_ref()),
        DocumentFormat::Csv => serialize_csv(tree, lookup.as_ref()),
    }
}

type ResultLookup<'a> = HashMap<&'a str, &'a AdjustmentResult>;

fn build_result_lookup<'a>(
    tree: &HypothesisTree,
    results: &'a [AdjustmentResult],
) -> Result<ResultLookup<'a>> {
    let mut lookup: ResultLookup<'a> = HashMap::with_capacity(results.len());
    for r in results {
        lookup.insert(r.node_id.as_str(), r);
    }
    let mut missing: Option<String> = None;
    let mut covered = 0usize;
    tree.visit(|node, _| {
        if lookup.contains_key(node.hypothesis.id.as_str()) {
            covered += 1;
        } else if missing.is_none() {
            missing = Some(node.hypothesis.id.clone());
        }
    });
    if let Some(id) = missing {
        return Err(Error::MissingResult(id));
    }
    if covered < lookup.len() {
        // some result id does not appear in the tree; find it for the message
        let mut tree_ids = std::collections::HashSet::new();
        tree.visit(|node, _| {
            tree_ids.insert(node.hypothesis.id.clone());
        });
        let unknown = results
            .iter()
            .find(|r| !tree_ids.contains(&r.node_id))
            .expect("count mismatch implies an unknown id");
        return Err(Error::UnknownResultId(unknown.node_id.clone()));
    }
    Ok(lookup)
}

fn serialize_json(tree: &HypothesisTree, lookup: Option<&ResultLookup<'_>>) -> Result<String> {
    if tree_depth(tree) > 120 {
        return Err(Error::Parse {
            line: None,
            msg: "tree too deep for nested JSON (limit 120 levels); use the CSV format".into(),
        });
    }
    let doc = TreeDoc {
        q: tree.q,
        nodes: tree.roots.iter().map(|n| node_to_doc(n, lookup)).collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse {
        line: None,
        msg: e.to_string(),
    })?;
    text.push('\n');
    Ok(text)
}

fn tree_depth(tree: &HypothesisTree) -> usize {
    let mut max_depth = 0;
    let mut stack: Vec<(&Node, usize)> = tree.roots.iter().map(|n| (n, 1)).collect();
    while let Some((node, depth)) = stack.pop() {
        max_depth = max_depth.max(depth);
        for child in &node.children {
            stack.push((child, depth + 1));
        }
    }
    max_depth
}

fn node_to_doc(node: &Node, lookup: Option<&ResultLookup<'_>>) -> NodeDoc {
    let hyp = &node.hypothesis;
    let result = lookup.and_then(|l| l.get(hyp.id.as_str()));
    NodeDoc {
        id: Some(hyp.id.clone()),
        p: hyp.p,
        direction: hyp.direction,
        label: hyp.label.clone(),
        truth: hyp.truth,
        children: node
            .children
            .iter()
            .map(|c| node_to_doc(c, lookup))
            .collect(),
        p_adj: result.map(|r| r.adjusted_p),
        rejected: result.map(|r| r.rejected),
        tested: result.map(|r| r.tested),
        family_level: result.map(|r| r.family_level),
        selection_fraction: result.map(|r| r.selection_fraction),
    }
}

fn serialize_csv(tree: &HypothesisTree, lookup: Option<&ResultLookup<'_>>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["path", "id", "p", "direction", "label", "truth"];
    if lookup.is_some() {
        header.extend([
            "p_adj",
            "rejected",
            "tested",
            "family_level",
            "selection_fraction",
        ]);
    }
    writer.write_record(&header).expect("write to vec");

    let mut io_error: Option<String> = None;
    tree.visit(|node, path| {
        if io_error.is_some() {
            return;
        }
        let hyp = &node.hypothesis;
        let mut record = vec![
            path.to_string(),
            hyp.id.clone(),
            hyp.p.map(fmt_f64).unwrap_or_default(),
            hyp.direction.to_string(),
            hyp.label.clone().unwrap_or_default(),
            match hyp.truth {
                Truth::Unknown => "unknown".into(),
                Truth::Null => "null".into(),
                Truth::NonNull => "non-null".into(),
            },
        ];
        if let Some(lookup) = lookup {
            let r = lookup[hyp.id.as_str()];
            record.extend([
                fmt_f64(r.adjusted_p),
                r.rejected.to_string(),
                r.tested.to_string(),
                fmt_f64(r.family_level),
                fmt_f64(r.selection_fraction),
            ]);
        }
        if let Err(e) = writer.write_record(&record) {
            io_error = Some(e.to_string());
        }
    });
    if let Some(msg) = io_error {
        return Err(Error::Parse { line: None, msg });
    }
    let bytes = writer.into_inner().expect("flush to vec");
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Shortest decimal form that parses back to the identical f64.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Human-readable table of per-node results, in document order.
pub fn render_results_text(tree: &HypothesisTree, results: &[AdjustmentResult]) -> Result<String> {
    ensure_valid(tree)?;
    let lookup = build_result_lookup(tree, results)?;
    let mut rows: Vec<[String; 6]> = vec![[
        "node".into(),
        "p".into(),
        "p_adj".into(),
        "rejected".into(),
        "tested".into(),
        "family_level".into(),
    ]];
    tree.visit(|node, path| {
        let hyp = &node.hypothesis;
        let r = lookup[hyp.id.as_str()];
        let name = if path.is_empty() {
            hyp.id.clone()
        } else {
            format!("{path}.{}", hyp.id)
        };
        rows.push([
            name,
            hyp.p.map(fmt_p).unwrap_or_else(|| format!("({})", fmt_p(r.raw_p))),
            fmt_p(r.adjusted_p),
            yesno(r.rejected),
            yesno(r.tested),
            fmt_p(r.family_level),
        ]);
    });
    let mut widths = [0usize; 6];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    Ok(out)
}

fn yesno(b: bool) -> String {
    if b { "yes".into() } else { "no".into() }
}

/// Six significant digits for readable tables; tiny values go scientific.
fn fmt_p(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v >= 1e-4 {
        let s = format!("{v:.6}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.4e}")
    }
}
