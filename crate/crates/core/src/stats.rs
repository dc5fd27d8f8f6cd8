//! Shared numerical statistics: normal CDF and quantile, the 2x2 Pearson
//! chi-square test, Welch's t-test on summary statistics, FCR-adjusted
//! confidence levels and intervals, and the two-study replication
//! criterion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Direction;
use crate::special;

/// Standard normal CDF, absolute error below 1e-12 everywhere.
pub fn normal_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::NonFinite(z));
    }
    Ok(special::phi(z))
}

/// Normal quantile; inverse of [`normal_cdf`] to better than 1e-10.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(special::inv_phi(p))
}

/// A 2x2 count table. Rows index adjusted significance (yes, no), columns
/// index replication (yes, no):
///
/// ```text
///                 replicated   not replicated
/// significant          a             b
/// not significant      c             d
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable2x2 { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn row_sums(&self) -> (u64, u64) {
        (self.a + self.b, self.c + self.d)
    }

    pub fn col_sums(&self) -> (u64, u64) {
        (self.a + self.c, self.b + self.d)
    }
}

/// Result of the df = 1 Pearson test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub p: f64,
    pub df: u32,
}

/// Pearson chi-square on a 2x2 table, no continuity correction. The
/// p-value uses the df = 1 identity `p = 2 (1 - Phi(sqrt(statistic)))`.
pub fn chi_square_2x2(table: &ContingencyTable2x2) -> Result<ChiSquareResult> {
    let (r1, r2) = table.row_sums();
    let (c1, c2) = table.col_sums();
    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        return Err(Error::ZeroMarginal);
    }
    let n = table.total() as f64;
    let observed = [table.a, table.b, table.c, table.d].map(|v| v as f64);
    let expected = [
        r1 as f64 * c1 as f64 / n,
        r1 as f64 * c2 as f64 / n,
        r2 as f64 * c1 as f64 / n,
        r2 as f64 * c2 as f64 / n,
    ];
    let statistic: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let p = (2.0 * (1.0 - special::phi(statistic.sqrt()))).min(1.0);
    Ok(ChiSquareResult {
        statistic,
        p,
        df: 1,
    })
}

/// Summary statistics of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mean: f64,
    pub sd: f64,
    pub n: u64,
    /// Optional median, carried through for reporting only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median: Option<f64>,
}

impl GroupSummary {
    pub fn new(mean: f64, sd: f64, n: u64) -> Result<Self> {
        if !mean.is_finite() || !sd.is_finite() {
            return Err(Error::InvalidGroupSummary(format!(
                "non-finite mean or sd ({mean}, {sd})"
            )));
        }
        if sd < 0.0 {
            return Err(Error::InvalidGroupSummary(format!("sd {sd} < 0")));
        }
        if n < 2 {
            return Err(Error::InvalidGroupSummary(format!("n {n} < 2")));
        }
        Ok(GroupSummary {
            mean,
            sd,
            n,
            median: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

/// Welch's unequal-variance t-test from group summaries, with the
/// Welch-Satterthwaite degrees of freedom. The p-value comes from the
/// t CDF computed by regularized incomplete beta, so df need not be
/// integral.
pub fn welch_t(g1: &GroupSummary, g2: &GroupSummary) -> Result<WelchResult> {
    if g1.sd < 0.0 || g2.sd < 0.0 || g1.n < 2 || g2.n < 2 {
        return Err(Error::InvalidGroupSummary(
            "need sd >= 0 and n >= 2 in both groups".into(),
        ));
    }
    if g1.sd == 0.0 && g2.sd == 0.0 {
        return Err(Error::DegenerateGroups);
    }
    let v1 = g1.sd * g1.sd / g1.n as f64;
    let v2 = g2.sd * g2.sd / g2.n as f64;
    let se = (v1 + v2).sqrt();
    let t = (g1.mean - g2.mean) / se;
    let df = (v1 + v2) * (v1 + v2)
        / (v1 * v1 / (g1.n as f64 - 1.0) + v2 * v2 / (g2.n as f64 - 1.0));
    let p_two_sided = if t == 0.0 {
        1.0
    } else {
        (2.0 * special::t_cdf(-t.abs(), df)).min(1.0)
    };
    Ok(WelchResult { t, df, p_two_sided })
}

/// One selected (or unselected) parameter for FCR interval construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedIntervalSpec {
    pub estimate: f64,
    pub standard_error: f64,
    pub selected: bool,
}

/// FCR-adjusted confidence level when R of m parameters were selected:
/// `1 - R q / m`.
pub fn fcr_level(m: usize, r: usize, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::LevelOutOfRange(q));
    }
    if r == 0 || r > m {
        return Err(Error::InvalidSelectionCount { m, r });
    }
    Ok(1.0 - r as f64 * q / m as f64)
}

/// One FCR-adjusted interval, tied to its position in the input list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcrInterval {
    pub index: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Intervals `estimate +- z_{1 - R q / (2m)} * se` for the selected specs,
/// where R counts the selected entries and m all entries.
pub fn fcr_intervals(specs: &[SelectedIntervalSpec], q: f64) -> Result<Vec<FcrInterval>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::LevelOutOfRange(q));
    }
    let m = specs.len();
    let r = specs.iter().filter(|s| s.selected).count();
    if r == 0 {
        return Err(Error::NoneSelected);
    }
    for spec in specs {
        if spec.standard_error <= 0.0 || !spec.standard_error.is_finite() {
            return Err(Error::InvalidGroupSummary(format!(
                "standard error must be positive and finite, got {}",
                spec.standard_error
            )));
        }
    }
    let z = special::inv_phi(1.0 - r as f64 * q / (2.0 * m as f64));
    Ok(specs
        .iter()
        .enumerate()
        .filter(|(_, s)| s.selected)
        .map(|(index, s)| FcrInterval {
            index,
            estimate: s.estimate,
            lower: s.estimate - z * s.standard_error,
            upper: s.estimate + z * s.standard_error,
        })
        .collect())
}

/// Two-study replication criterion: both p-values at or below alpha with
/// effects in the same direction.
pub fn replication_outcome(
    p_orig: f64,
    dir_orig: Direction,
    p_rep: f64,
    dir_rep: Direction,
    alpha: f64,
) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::LevelOutOfRange(alpha));
    }
    for p in [p_orig, p_rep] {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::PValueOutOfRange {
                at: "replication criterion".into(),
                value: p,
            });
        }
    }
    if dir_orig == Direction::None || dir_rep == Direction::None {
        return Err(Error::DirectionUnspecified);
    }
    Ok(p_orig <= alpha && p_rep <= alpha && dir_orig == dir_rep)
}
