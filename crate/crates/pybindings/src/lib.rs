//! Python bindings for the multiplicity-adjustment toolkit.
//!
//! Build with `cargo build -p hierfdr-py --release`; the resulting
//! `libhierfdr_py.so` imports as the `hierfdr_py` module once renamed to
//! `hierfdr_py.so` (see python/smoke_test.py, which does this
//! automatically).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hierfdr::sim::{run_full_experiment, SimulationConfig};
use hierfdr::{Direction, DocumentFormat, ReportFormat};

fn value_err(err: hierfdr::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn parse_direction(s: &str) -> PyResult<Direction> {
    s.parse::<Direction>().map_err(PyValueError::new_err)
}

/// A validated hypothesis tree plus the adjustment entry points.
#[pyclass(name = "HypothesisTree", frozen)]
struct PyHypothesisTree {
    inner: hierfdr::HypothesisTree,
}

#[pymethods]
impl PyHypothesisTree {
    /// Parse a JSON tree document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = hierfdr::parse_tree(text, DocumentFormat::Json).map_err(value_err)?;
        Ok(PyHypothesisTree { inner })
    }

    /// Parse a path-encoded CSV tree document.
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        let inner = hierfdr::parse_tree(text, DocumentFormat::Csv).map_err(value_err)?;
        Ok(PyHypothesisTree { inner })
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn leaf_count(&self) -> usize {
        self.inner.leaf_count()
    }

    /// Run the hierarchical procedure; returns one dict per node in
    /// document order. `q` defaults to the tree's own level.
    #[pyo3(signature = (q=None))]
    fn treebh<'py>(&self, py: Python<'py>, q: Option<f64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let q = q.unwrap_or(self.inner.q);
        let results = hierfdr::treebh(&self.inner, q).map_err(value_err)?;
        results
            .iter()
            .map(|r| {
                let dict = PyDict::new(py);
                dict.set_item("id", &r.node_id)?;
                dict.set_item("p", r.raw_p)?;
                dict.set_item("p_adj", r.adjusted_p)?;
                dict.set_item("rejected", r.rejected)?;
                dict.set_item("tested", r.tested)?;
                dict.set_item("family_level", r.family_level)?;
                dict.set_item("selection_fraction", r.selection_fraction)?;
                Ok(dict)
            })
            .collect()
    }

    /// Ids of non-rejected nodes whose subtrees were never tested.
    #[pyo3(signature = (q=None))]
    fn turned_off_branches(&self, q: Option<f64>) -> PyResult<Vec<String>> {
        let q = q.unwrap_or(self.inner.q);
        let results = hierfdr::treebh(&self.inner, q).map_err(value_err)?;
        Ok(hierfdr::turned_off_branches(&self.inner, &results))
    }

    /// Serialize the tree with per-node results ("json" or "csv").
    #[pyo3(signature = (q=None, format="json"))]
    fn adjusted_document(&self, q: Option<f64>, format: &str) -> PyResult<String> {
        let q = q.unwrap_or(self.inner.q);
        let results = hierfdr::treebh(&self.inner, q).map_err(value_err)?;
        let format = match format {
            "json" => DocumentFormat::Json,
            "csv" => DocumentFormat::Csv,
            other => return Err(PyValueError::new_err(format!("unknown format \"{other}\""))),
        };
        hierfdr::serialize_results(&self.inner, &results, format).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "HypothesisTree(nodes={}, leaves={}, q={})",
            self.inner.node_count(),
            self.inner.leaf_count(),
            self.inner.q
        )
    }
}

#[pyfunction]
fn bonferroni_adjust(pvals: Vec<f64>) -> PyResult<Vec<f64>> {
    hierfdr::bonferroni_adjust(&pvals).map_err(value_err)
}

#[pyfunction]
fn bh_adjust(pvals: Vec<f64>) -> PyResult<Vec<f64>> {
    hierfdr::bh_adjust(&pvals).map_err(value_err)
}

#[pyfunction]
fn by_adjust(pvals: Vec<f64>) -> PyResult<Vec<f64>> {
    hierfdr::by_adjust(&pvals).map_err(value_err)
}

#[pyfunction]
fn reject_at_level(adjusted: Vec<f64>, q: f64) -> PyResult<Vec<usize>> {
    Ok(hierfdr::reject_at_level(&adjusted, q)
        .map_err(value_err)?
        .into_iter()
        .collect())
}

#[pyfunction]
fn expected_false_discoveries(m: u64, alpha: f64) -> PyResult<f64> {
    hierfdr::expected_false_discoveries(m, alpha).map_err(value_err)
}

#[pyfunction]
fn normal_cdf(z: f64) -> PyResult<f64> {
    hierfdr::normal_cdf(z).map_err(value_err)
}

#[pyfunction]
fn normal_quantile(p: f64) -> PyResult<f64> {
    hierfdr::normal_quantile(p).map_err(value_err)
}

/// Pearson chi-square without continuity correction on a 2x2 table;
/// returns (statistic, p, df).
#[pyfunction]
fn chi_square_2x2(a: u64, b: u64, c: u64, d: u64) -> PyResult<(f64, f64, u32)> {
    let table = hierfdr::ContingencyTable2x2::new(a, b, c, d);
    let r = hierfdr::chi_square_2x2(&table).map_err(value_err)?;
    Ok((r.statistic, r.p, r.df))
}

/// Welch's t-test from group summaries; returns (t, df, p_two_sided).
#[pyfunction]
fn welch_t(
    mean1: f64,
    sd1: f64,
    n1: u64,
    mean2: f64,
    sd2: f64,
    n2: u64,
) -> PyResult<(f64, f64, f64)> {
    let g1 = hierfdr::GroupSummary::new(mean1, sd1, n1).map_err(value_err)?;
    let g2 = hierfdr::GroupSummary::new(mean2, sd2, n2).map_err(value_err)?;
    let r = hierfdr::welch_t(&g1, &g2).map_err(value_err)?;
    Ok((r.t, r.df, r.p_two_sided))
}

#[pyfunction]
fn fcr_level(m: usize, r: usize, q: f64) -> PyResult<f64> {
    hierfdr::fcr_level(m, r, q).map_err(value_err)
}

/// Two-study replication criterion; directions are "positive" or
/// "negative".
#[pyfunction]
fn replication_outcome(
    p_orig: f64,
    dir_orig: &str,
    p_rep: f64,
    dir_rep: &str,
    alpha: f64,
) -> PyResult<bool> {
    hierfdr::replication_outcome(
        p_orig,
        parse_direction(dir_orig)?,
        p_rep,
        parse_direction(dir_rep)?,
        alpha,
    )
    .map_err(value_err)
}

/// Run the full Monte Carlo experiment from a JSON config; returns the
/// report as JSON.
#[pyfunction]
fn simulate(config_json: &str) -> PyResult<String> {
    let config = SimulationConfig::from_json(config_json).map_err(value_err)?;
    let report = run_full_experiment(&config).map_err(value_err)?;
    Ok(report.to_json())
}

/// Analyze a replication results table (CSV text); format is "json" or
/// "text".
#[pyfunction]
#[pyo3(signature = (csv_text, alpha=0.05, format="json"))]
fn rpp_report(csv_text: &str, alpha: f64, format: &str) -> PyResult<String> {
    let records = hierfdr::ingest_records(csv_text).map_err(value_err)?;
    let format = match format {
        "json" => ReportFormat::Json,
        "text" => ReportFormat::Text,
        other => return Err(PyValueError::new_err(format!("unknown format \"{other}\""))),
    };
    hierfdr::render_report(&records, alpha, format).map_err(value_err)
}

#[pymodule]
fn hierfdr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyHypothesisTree>()?;
    m.add_function(wrap_pyfunction!(bonferroni_adjust, m)?)?;
    m.add_function(wrap_pyfunction!(bh_adjust, m)?)?;
    m.add_function(wrap_pyfunction!(by_adjust, m)?)?;
    m.add_function(wrap_pyfunction!(reject_at_level, m)?)?;
    m.add_function(wrap_pyfunction!(expected_false_discoveries, m)?)?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(normal_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(chi_square_2x2, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t, m)?)?;
    m.add_function(wrap_pyfunction!(fcr_level, m)?)?;
    m.add_function(wrap_pyfunction!(replication_outcome, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(rpp_report, m)?)?;
    Ok(())
}
