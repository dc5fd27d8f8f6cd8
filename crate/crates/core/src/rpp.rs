//! Ingestion and analysis of study-replication result tables.
//!
//! Input is a CSV with one row per original study:
//!
//! ```csv
//! paper_id,field,evident_tests,original_p,adjusted_p,original_dir,replication_dir,replication_p,adjusted_any,excluded_reason
//! ```
//!
//! Rows with a non-empty `excluded_reason` are parsed but set aside; the
//! remaining rows form the analysis set. The report cross-tabulates
//! adjusted significance against the two-study replication criterion,
//! tests the table with the df = 1 chi-square, and summarizes the
//! evident-test counts overall and by field.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::Direction;
use crate::stats::{
    chi_square_2x2, replication_outcome, welch_t, ChiSquareResult, ContingencyTable2x2,
    GroupSummary, WelchResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldArea {
    Cognitive,
    Social,
    Other,
}

impl fmt::Display for FieldArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldArea::Cognitive => write!(f, "cognitive"),
            FieldArea::Social => write!(f, "social"),
            FieldArea::Other => write!(f, "other"),
        }
    }
}

/// One original study with its replication outcome inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RppRecord {
    pub paper_id: String,
    pub field: FieldArea,
    pub evident_tests: u64,
    pub original_p: f64,
    pub adjusted_p: f64,
    pub original_dir: Direction,
    pub replication_dir: Direction,
    pub replication_p: f64,
    /// Whether the study reported any multiplicity adjustment.
    pub adjusted_any: bool,
    /// Non-empty reason = record set aside from the analysis set.
    pub excluded_reason: Option<String>,
}

impl RppRecord {
    pub fn included(&self) -> bool {
        self.excluded_reason.is_none()
    }
}

const COLUMNS: [&str; 10] = [
    "paper_id",
    "field",
    "evident_tests",
    "original_p",
    "adjusted_p",
    "original_dir",
    "replication_dir",
    "replication_p",
    "adjusted_any",
    "excluded_reason",
];

/// Parses the CSV; excluded records are kept but flagged.
pub fn ingest_records(text: &str) -> Result<Vec<RppRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: Some(1),
            msg: e.to_string(),
        })?
        .clone();
    let mut cols = Vec::with_capacity(COLUMNS.len());
    for name in COLUMNS {
        match headers.iter().position(|h| h == name) {
            Some(idx) => cols.push(idx),
            None => {
                return Err(Error::Parse {
                    line: Some(1),
                    msg: format!("missing required column \"{name}\""),
                })
            }
        }
    }

    let mut records = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let line = rec_idx + 2;
        let record = record.map_err(|e| Error::Parse {
            line: Some(line),
            msg: e.to_string(),
        })?;
        let get = |i: usize| record.get(cols[i]).unwrap_or("");
        let parse_err = |msg: String| Error::Parse {
            line: Some(line),
            msg,
        };

        let paper_id = get(0).to_string();
        if paper_id.is_empty() {
            return Err(parse_err("empty paper_id".into()));
        }
        let field = match get(1) {
            "cognitive" => FieldArea::Cognitive,
            "social" => FieldArea::Social,
            "other" => FieldArea::Other,
            s => return Err(parse_err(format!("unknown field \"{s}\""))),
        };
        let evident_tests: u64 = get(2)
            .parse()
            .map_err(|_| parse_err(format!("invalid evident_tests \"{}\"", get(2))))?;
        if evident_tests == 0 {
            return Err(parse_err("evident_tests must be >= 1".into()));
        }
        let parse_p = |i: usize, name: &str| -> Result<f64> {
            let s = get(i);
            let v: f64 = s
                .parse()
                .map_err(|_| parse_err(format!("invalid {name} \"{s}\"")))?;
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::PValueOutOfRange {
                    at: format!("line {line}, column {name}"),
                    value: v,
                });
            }
            Ok(v)
        };
        let original_p = parse_p(3, "original_p")?;
        let adjusted_p = parse_p(4, "adjusted_p")?;
        if adjusted_p < original_p {
            return Err(parse_err(format!(
                "adjusted_p {adjusted_p} < original_p {original_p} for \"{paper_id}\""
            )));
        }
        let original_dir: Direction = get(5).parse().map_err(parse_err)?;
        let replication_dir: Direction = get(6).parse().map_err(parse_err)?;
        let replication_p = parse_p(7, "replication_p")?;
        let adjusted_any = match get(8) {
            "true" | "yes" | "1" => true,
            "false" | "no" | "0" | "" => false,
            s => return Err(parse_err(format!("invalid adjusted_any \"{s}\""))),
        };
        let excluded_reason = match get(9) {
            "" => None,
            s => Some(s.to_string()),
        };

        records.push(RppRecord {
            paper_id,
            field,
            evident_tests,
            original_p,
            adjusted_p,
            original_dir,
            replication_dir,
            replication_p,
            adjusted_any,
            excluded_reason,
        });
    }
    Ok(records)
}

fn analysis_set(records: &[RppRecord]) -> Vec<&RppRecord> {
    records.iter().filter(|r| r.included()).collect()
}

/// Cross-tabulates adjusted significance (rows) against the replication
/// criterion (columns) over the analysis set.
pub fn contingency(records: &[RppRecord], alpha: f64) -> Result<ContingencyTable2x2> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::LevelOutOfRange(alpha));
    }
    let set = analysis_set(records);
    if set.is_empty() {
        return Err(Error::EmptyAnalysisSet);
    }
    let mut table = ContingencyTable2x2::new(0, 0, 0, 0);
    for r in set {
        let significant = r.adjusted_p <= alpha;
        let replicated = replication_outcome(
            r.original_p,
            r.original_dir,
            r.replication_p,
            r.replication_dir,
            alpha,
        )?;
        match (significant, replicated) {
            (true, true) => table.a += 1,
            (true, false) => table.b += 1,
            (false, true) => table.c += 1,
            (false, false) => table.d += 1,
        }
    }
    Ok(table)
}

/// An exact count ratio, kept as integers until formatting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub numerator: u64,
    pub denominator: u64,
}

impl Rate {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.value()
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} ({:.1}%)",
            self.numerator,
            self.denominator,
            self.percent()
        )
    }
}

/// Sensitivity a/(a+c), precision a/(a+b), miss rate c/(c+d). A rate with
/// a zero denominator is reported absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadlineRates {
    pub sensitivity: Option<Rate>,
    pub precision: Option<Rate>,
    pub miss_rate: Option<Rate>,
}

pub fn headline_rates(table: &ContingencyTable2x2) -> HeadlineRates {
    let rate = |num: u64, den: u64| {
        if den == 0 {
            None
        } else {
            Some(Rate {
                numerator: num,
                denominator: den,
            })
        }
    };
    HeadlineRates {
        sensitivity: rate(table.a, table.a + table.c),
        precision: rate(table.a, table.a + table.b),
        miss_rate: rate(table.c, table.c + table.d),
    }
}

/// Descriptive statistics of evident-test counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: u64,
    pub mean: f64,
    pub median: f64,
    /// Absent for a single observation.
    pub sd: Option<f64>,
    pub min: u64,
    pub max: u64,
}

fn group_stats(counts: &[u64]) -> GroupStats {
    let n = counts.len();
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let mean = sorted.iter().map(|&c| c as f64).sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    };
    let sd = if n > 1 {
        let ss: f64 = sorted
            .iter()
            .map(|&c| (c as f64 - mean) * (c as f64 - mean))
            .sum();
        Some((ss / (n as f64 - 1.0)).sqrt())
    } else {
        None
    };
    GroupStats {
        n: n as u64,
        mean,
        median,
        sd,
        min: sorted[0],
        max: sorted[n - 1],
    }
}

const RAW_SCALE_NOTE: &str =
    "comparison runs on the raw counts; published group comparisons may reflect a transformed (e.g. log) scale";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group1: FieldArea,
    pub group2: FieldArea,
    pub welch: WelchResult,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicitySummary {
    pub overall: GroupStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub by_field: Option<Vec<(FieldArea, GroupStats)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<GroupComparison>,
    /// Why a comparison was omitted, when it was.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison_notice: Option<String>,
}

/// Summarizes evident-test counts over the analysis set; `group_by` may
/// only name the `field` column.
pub fn multiplicity_summary(
    records: &[RppRecord],
    group_by: Option<&str>,
) -> Result<MultiplicitySummary> {
    let set = analysis_set(records);
    if set.is_empty() {
        return Err(Error::EmptyAnalysisSet);
    }
    let counts: Vec<u64> = set.iter().map(|r| r.evident_tests).collect();
    let overall = group_stats(&counts);

    let mut summary = MultiplicitySummary {
        overall,
        by_field: None,
        comparison: None,
        comparison_notice: None,
    };
    match group_by {
        None => {}
        Some("field") => {
            let mut by_field = Vec::new();
            for field in [FieldArea::Cognitive, FieldArea::Social, FieldArea::Other] {
                let counts: Vec<u64> = set
                    .iter()
                    .filter(|r| r.field == field)
                    .map(|r| r.evident_tests)
                    .collect();
                if !counts.is_empty() {
                    by_field.push((field, group_stats(&counts)));
                }
            }
            let comparable = |f: FieldArea| {
                by_field
                    .iter()
                    .find(|(g, s)| *g == f && s.n >= 2 && s.sd.is_some())
                    .map(|(_, s)| s.clone())
            };
            match (comparable(FieldArea::Cognitive), comparable(FieldArea::Social)) {
                (Some(cog), Some(soc)) => {
                    let g1 = GroupSummary::new(cog.mean, cog.sd.unwrap(), cog.n)?;
                    let g2 = GroupSummary::new(soc.mean, soc.sd.unwrap(), soc.n)?;
                    match welch_t(&g1, &g2) {
                        Ok(welch) => {
                            summary.comparison = Some(GroupComparison {
                                group1: FieldArea::Cognitive,
                                group2: FieldArea::Social,
                                welch,
                                note: RAW_SCALE_NOTE.to_string(),
                            });
                        }
                        Err(Error::DegenerateGroups) => {
                            summary.comparison_notice =
                                Some("comparison omitted: zero variance in both groups".into());
                        }
                        Err(e) => return Err(e),
                    }
                }
                _ => {
                    summary.comparison_notice = Some(
                        "comparison omitted: need cognitive and social groups with n >= 2".into(),
                    );
                }
            }
            summary.by_field = Some(by_field);
        }
        Some(other) => return Err(Error::UnknownGroup(other.to_string())),
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Serialize)]
struct ChiSquareSection {
    statistic: f64,
    p: f64,
    df: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct ExclusionRow {
    paper_id: String,
    reason: String,
}

#[derive(Serialize)]
struct RppReportDoc {
    alpha: f64,
    analysis_n: u64,
    excluded_n: u64,
    table: ContingencyTable2x2,
    chi_square: ChiSquareSection,
    rates: HeadlineRates,
    multiplicity: MultiplicitySummary,
    excluded: Vec<ExclusionRow>,
}

/// Known-table annotation: the df = 1 tail for these counts is ~5.6e-4,
/// larger than the "p < 0.0001" often quoted alongside them.
const TABLE_31_36_1_20_NOTE: &str = "the computed df=1 tail probability is 5.6e-4; \
threshold-style reports of \"p < 0.0001\" for this table overstate the significance";

fn chi_note(table: &ContingencyTable2x2) -> Option<String> {
    if (table.a, table.b, table.c, table.d) == (31, 36, 1, 20) {
        Some(TABLE_31_36_1_20_NOTE.to_string())
    } else {
        None
    }
}

/// Full analysis report over the ingested records. Pure function of
/// (records, alpha, format): identical inputs yield identical bytes.
pub fn render_report(records: &[RppRecord], alpha: f64, format: ReportFormat) -> Result<String> {
    let table = contingency(records, alpha)?;
    let chi: ChiSquareResult = chi_square_2x2(&table)?;
    let rates = headline_rates(&table);
    let multiplicity = multiplicity_summary(records, Some("field"))?;
    let excluded: Vec<ExclusionRow> = records
        .iter()
        .filter(|r| !r.included())
        .map(|r| ExclusionRow {
            paper_id: r.paper_id.clone(),
            reason: r.excluded_reason.clone().unwrap(),
        })
        .collect();
    let analysis_n = table.total();
    let doc = RppReportDoc {
        alpha,
        analysis_n,
        excluded_n: excluded.len() as u64,
        chi_square: ChiSquareSection {
            statistic: chi.statistic,
            p: chi.p,
            df: chi.df,
            note: chi_note(&table),
        },
        table,
        rates,
        multiplicity,
        excluded,
    };
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
            text.push('\n');
            Ok(text)
        }
        ReportFormat::Text => Ok(render_text(&doc)),
    }
}

fn render_text(doc: &RppReportDoc) -> String {
    let mut out = String::new();
    out.push_str("replication analysis report\n");
    out.push_str(&format!(
        "  analysis set: {} records ({} excluded), alpha = {}\n\n",
        doc.analysis_n, doc.excluded_n, doc.alpha
    ));

    let t = &doc.table;
    out.push_str("adjusted significance x replication:\n");
    out.push_str(&format!(
        "{:<22}{:>12}{:>16}{:>8}\n",
        "", "replicated", "not replicated", "total"
    ));
    out.push_str(&format!(
        "{:<22}{:>12}{:>16}{:>8}\n",
        "significant (p_adj)",
        t.a,
        t.b,
        t.a + t.b
    ));
    out.push_str(&format!(
        "{:<22}{:>12}{:>16}{:>8}\n",
        "not significant",
        t.c,
        t.d,
        t.c + t.d
    ));
    out.push_str(&format!(
        "{:<22}{:>12}{:>16}{:>8}\n\n",
        "total",
        t.a + t.c,
        t.b + t.d,
        t.total()
    ));

    out.push_str(&format!(
        "chi2(df={}, n={}) = {:.4}, p = {:.4e}\n",
        doc.chi_square.df,
        doc.analysis_n,
        doc.chi_square.statistic,
        doc.chi_square.p
    ));
    if let Some(note) = &doc.chi_square.note {
        out.push_str(&format!("  note: {note}\n"));
    }
    out.push('\n');

    let fmt_rate = |name: &str, r: &Option<Rate>| match r {
        Some(r) => format!("  {name} = {r}\n"),
        None => format!("  {name} absent (zero denominator)\n"),
    };
    out.push_str("headline rates:\n");
    out.push_str(&fmt_rate("sensitivity", &doc.rates.sensitivity));
    out.push_str(&fmt_rate("precision", &doc.rates.precision));
    out.push_str(&fmt_rate("miss_rate", &doc.rates.miss_rate));
    out.push('\n');

    let stats_line = |s: &GroupStats| {
        format!(
            "n={}, mean={:.2}, median={:.1}, sd={}, min={}, max={}",
            s.n,
            s.mean,
            s.median,
            s.sd.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
            s.min,
            s.max
        )
    };
    out.push_str("evident tests per study:\n");
    out.push_str(&format!("  overall: {}\n", stats_line(&doc.multiplicity.overall)));
    if let Some(by_field) = &doc.multiplicity.by_field {
        for (field, stats) in by_field {
            out.push_str(&format!("  {field}: {}\n", stats_line(stats)));
        }
    }
    match (&doc.multiplicity.comparison, &doc.multiplicity.comparison_notice) {
        (Some(cmp), _) => {
            out.push_str(&format!(
                "  {} vs {}: t = {:.3} (df = {:.1}), p = {:.4}\n  note: {}\n",
                cmp.group1, cmp.group2, cmp.welch.t, cmp.welch.df, cmp.welch.p_two_sided, cmp.note
            ));
        }
        (None, Some(notice)) => out.push_str(&format!("  {notice}\n")),
        (None, None) => {}
    }

    if !doc.excluded.is_empty() {
        out.push('\n');
        out.push_str("excluded records:\n");
        for row in &doc.excluded {
            out.push_str(&format!("  {}: {}\n", row.paper_id, row.reason));
        }
    }
    out
}
