#!/usr/bin/env python3
"""Smoke test for the hierfdr_py extension module.

Builds nothing itself: run `cargo build -p hierfdr-py --release` (or debug)
first. The script locates the compiled cdylib, exposes it under the import
name `hierfdr_py`, and drives the main entry points.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / "release" / "libhierfdr_py.so",
        REPO / "target" / "debug" / "libhierfdr_py.so",
        REPO / "target" / "release" / "libhierfdr_py.dylib",
        REPO / "target" / "debug" / "libhierfdr_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p hierfdr-py --release")
    staging = Path(tempfile.mkdtemp(prefix="hierfdr_py_"))
    shutil.copy2(built, staging / "hierfdr_py.so")
    sys.path.insert(0, str(staging))
    import hierfdr_py

    return hierfdr_py


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    m = load_module()
    print(f"loaded hierfdr_py {m.__version__}")

    # flat adjustments
    assert m.bh_adjust([0.057, 0.15]) == [0.114, 0.15]
    assert m.bonferroni_adjust([0.001]) == [0.001]
    approx(m.by_adjust([0.01, 0.02, 0.5])[0], 0.055, 1e-12)
    assert m.reject_at_level([0.03, 0.03, 0.5], 0.05) == [0, 1]
    assert m.expected_false_discoveries(140, 0.05) == 7.0

    # error paths surface as ValueError
    for bad_call in (
        lambda: m.bh_adjust([1.5]),
        lambda: m.bh_adjust([]),
        lambda: m.normal_quantile(1.0),
        lambda: m.replication_outcome(0.03, "none", 0.04, "positive", 0.05),
    ):
        try:
            bad_call()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    # numerics
    approx(m.normal_cdf(0.0), 0.5, 0.0)
    approx(m.normal_quantile(0.995), 2.5758293, 1e-6)
    stat, p, df = m.chi_square_2x2(31, 36, 1, 20)
    approx(stat, 11.9035435, 1e-6)
    approx(p, 5.6027e-4, 1e-7)
    assert df == 1
    t, wdf, wp = m.welch_t(10.0, 2.0, 20, 12.0, 3.0, 25)
    approx(t, -2.6726124, 1e-6)
    approx(wdf, 41.784, 1e-2)
    approx(m.fcr_level(10, 2, 0.05), 0.99, 1e-12)
    assert m.replication_outcome(0.03, "positive", 0.04, "positive", 0.05)
    assert not m.replication_outcome(0.03, "positive", 0.04, "negative", 0.05)

    # hierarchical adjustment of the demo tree
    tree = m.HypothesisTree.from_json((REPO / "fixtures" / "anova_tree.json").read_text())
    assert tree.node_count() == 24 and tree.leaf_count() == 21
    results = tree.treebh(0.05)
    target = next(r for r in results if r["id"] == "a2_3")
    approx(target["p_adj"], 0.0172 * 7 / 3, 1e-9)
    assert target["rejected"] and target["tested"]
    assert tree.turned_off_branches(0.05) == []
    doc = json.loads(tree.adjusted_document(0.05, "json"))
    assert doc["q"] == 0.05

    # round-trip through the CSV form
    csv_doc = tree.adjusted_document(0.05, "csv")
    reparsed = m.HypothesisTree.from_csv(csv_doc)
    assert reparsed.node_count() == tree.node_count()

    # simulation: deterministic, sane FDR
    config = json.dumps(
        {
            "tree_shape": [3, 7],
            "signal_fraction": 0.3,
            "clustering": "clustered",
            "effect": 4.0,
            "q": 0.05,
            "replications": 500,
            "seed": 99,
        }
    )
    report = json.loads(m.simulate(config))
    again = json.loads(m.simulate(config))
    assert report == again, "simulation must be deterministic"
    assert report["treebh"]["empirical_fdr"]["mean"] <= 0.05 + 3 * report["treebh"]["empirical_fdr"]["std_error"]
    assert report["treebh"]["replication_table"]["a"] > 0

    # replication report
    report = json.loads(m.rpp_report((REPO / "fixtures" / "rpp_synthetic.csv").read_text(), 0.05))
    assert report["analysis_n"] == 88
    assert report["table"] == {"a": 31, "b": 36, "c": 1, "d": 20}
    approx(report["chi_square"]["statistic"], 11.9035435, 1e-6)
    assert report["rates"]["sensitivity"] == {"numerator": 31, "denominator": 32}
    text = m.rpp_report((REPO / "fixtures" / "rpp_synthetic.csv").read_text(), 0.05, "text")
    assert "31/67 (46.3%)" in text

    assert not math.isnan(m.normal_cdf(5.0))
    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
