//! Single-family multiplicity adjustments.
//!
//! `bonferroni_adjust`, `bh_adjust`, and `by_adjust` all map a family of
//! raw p-values to adjusted p-values in the input order. Comparing an
//! adjusted value against a level q with `<=` reproduces the corresponding
//! rejection rule exactly, at every q.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat adjustment method for one family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlatMethod {
    Bonferroni,
    Bh,
    By,
}

impl FlatMethod {
    pub fn adjust(self, pvals: &[f64]) -> Result<Vec<f64>> {
        match self {
            FlatMethod::Bonferroni => bonferroni_adjust(pvals),
            FlatMethod::Bh => bh_adjust(pvals),
            FlatMethod::By => by_adjust(pvals),
        }
    }
}

/// A family of raw p-values together with its adjusted values.
///
/// Invariants (checked by the constructor's inputs and the adjustment
/// formulas): `adjusted[i] >= raw[i]`, `adjusted[i] <= 1`, and the rank
/// order of distinct raw values is preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedFamily {
    pub raw: Vec<f64>,
    pub adjusted: Vec<f64>,
    pub method: FlatMethod,
    pub q: f64,
}

impl AdjustedFamily {
    pub fn new(raw: Vec<f64>, method: FlatMethod, q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::LevelOutOfRange(q));
        }
        let adjusted = method.adjust(&raw)?;
        Ok(AdjustedFamily {
            raw,
            adjusted,
            method,
            q,
        })
    }

    /// Indices rejected at the family's level.
    pub fn rejections(&self) -> BTreeSet<usize> {
        self.adjusted
            .iter()
            .enumerate()
            .filter(|(_, &a)| a <= self.q)
            .map(|(i, _)| i)
            .collect()
    }
}

fn check_family(pvals: &[f64]) -> Result<()> {
    if pvals.is_empty() {
        return Err(Error::EmptyFamily);
    }
    for (i, &p) in pvals.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::PValueOutOfRange {
                at: format!("index {i}"),
                value: p,
            });
        }
    }
    Ok(())
}

/// Bonferroni adjustment: `min(1, m * p)` with m the family size.
pub fn bonferroni_adjust(pvals: &[f64]) -> Result<Vec<f64>> {
    check_family(pvals)?;
    let m = pvals.len() as f64;
    Ok(pvals.iter().map(|&p| (m * p).min(1.0)).collect())
}

/// Step-up FDR adjustment: for sorted p-values, the adjusted value at rank
/// i is `min_{j >= i} (m * p_(j) / j)` capped at 1, mapped back to input
/// order. Tied raw values receive identical adjusted values.
pub fn bh_adjust(pvals: &[f64]) -> Result<Vec<f64>> {
    check_family(pvals)?;
    Ok(bh_core(pvals))
}

/// Dependence-robust variant: the step-up adjustment scaled by
/// `c(m) = sum_{i=1..m} 1/i`, capped at 1.
pub fn by_adjust(pvals: &[f64]) -> Result<Vec<f64>> {
    check_family(pvals)?;
    let m = pvals.len();
    let c: f64 = (1..=m).map(|i| 1.0 / i as f64).sum();
    Ok(bh_core(pvals)
        .into_iter()
        .map(|a| (c * a).min(1.0))
        .collect())
}

/// Unvalidated step-up core shared with the tree procedure and the
/// simulation harness. Inputs must already be probabilities.
pub(crate) fn bh_core(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len();
    let mf = m as f64;
    let mut order: Vec<usize> = (0..m).collect();
    // Stable sort: ties keep document order, and the suffix-min below then
    // forces identical adjusted values for identical raw values.
    order.sort_by(|&a, &b| pvals[a].partial_cmp(&pvals[b]).unwrap());
    let mut adjusted = vec![0.0; m];
    let mut running_min = 1.0_f64;
    for rank in (1..=m).rev() {
        let idx = order[rank - 1];
        let candidate = mf * pvals[idx] / rank as f64;
        running_min = running_min.min(candidate);
        adjusted[idx] = running_min;
    }
    adjusted
}

/// Indices whose adjusted p-value is at or below the level q.
pub fn reject_at_level(adjusted: &[f64], q: f64) -> Result<BTreeSet<usize>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::LevelOutOfRange(q));
    }
    Ok(adjusted
        .iter()
        .enumerate()
        .filter(|(_, &a)| a <= q)
        .map(|(i, _)| i)
        .collect())
}

/// Expected count of false rejections when testing m true nulls,
/// each at level alpha: `m * alpha`.
pub fn expected_false_discoveries(m: u64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::LevelOutOfRange(alpha));
    }
    Ok(m as f64 * alpha)
}
