//! Distributional properties of the simulation harness.

use hierfdr::sim::{generate_instance, run_fdr_experiment};
use hierfdr::{Clustering, SimulationConfig, Truth};

fn config(replications: usize, seed: u64) -> SimulationConfig {
    SimulationConfig {
        tree_shape: vec![100],
        signal_fraction: 0.0,
        clustering: Clustering::Scattered,
        effect: 0.0,
        q: 0.05,
        replications,
        seed,
    }
}

/// Null p-values must be uniform: Kolmogorov-Smirnov on 10^6 draws at the
/// 0.001 level (asymptotic critical value sqrt(-ln(alpha/2) / 2) = 1.9495).
#[test]
fn null_p_values_pass_ks_uniformity() {
    let cfg = config(10_000, 404);
    let mut draws: Vec<f64> = Vec::with_capacity(1_000_000);
    for rep in 0..10_000u64 {
        let tree = generate_instance(&cfg, rep).unwrap();
        tree.visit(|node, _| {
            if node.is_leaf() {
                assert_eq!(node.hypothesis.truth, Truth::Null);
                draws.push(node.hypothesis.p.unwrap());
            }
        });
    }
    assert_eq!(draws.len(), 1_000_000);
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = draws.len() as f64;
    let mut d = 0.0_f64;
    for (i, &u) in draws.iter().enumerate() {
        let hi = (i + 1) as f64 / n - u;
        let lo = u - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    let statistic = n.sqrt() * d;
    assert!(
        statistic < 1.9495,
        "KS statistic {statistic} exceeds the 0.001-level critical value"
    );
}

/// Pure-null replication experiment: chance alone makes a leaf "replicate"
/// with probability alpha^2 / 2, so adjusted methods produce almost no
/// significant-and-replicated counts, while unadjusted significance
/// replicates at about alpha / 2.
#[test]
fn global_null_replication_is_chance_only() {
    let report =
        hierfdr::sim::run_replication_experiment(&config(10_000, 606)).unwrap();
    let total = 10_000u64 * 100;

    let un = report.unadjusted.replication_table.unwrap();
    assert_eq!(un.total(), total);
    let rate = un.a as f64 / (un.a + un.b) as f64;
    let se = (rate * (1.0 - rate) / (un.a + un.b) as f64).sqrt();
    assert!(
        (rate - 0.025).abs() <= 4.0 * se + 1e-4,
        "chance replication rate {rate} should be ~alpha/2"
    );

    for (name, method) in [("bh", &report.bh), ("treebh", &report.treebh)] {
        let t = method.replication_table.as_ref().unwrap();
        assert!(
            t.a + t.b < total / 500,
            "{name} made {} null rejections out of {total}",
            t.a + t.b
        );
        assert!(t.a < 100, "{name} sig-and-replicated {} should be near zero", t.a);
    }
}

/// Under the global null with m = 100 and per-test level 0.05, about
/// m * alpha = 5 false rejections occur per run, so unadjusted testing
/// almost always rejects something and its FDP is then exactly 1.
#[test]
fn unadjusted_testing_inflates_fdr_under_global_null() {
    let report = run_fdr_experiment(&config(10_000, 505)).unwrap();
    let unadjusted = report.unadjusted.empirical_fdr.unwrap();
    // P(no rejection) = 0.95^100 = 0.0059, so the mean FDP is ~0.994
    assert!(
        unadjusted.mean > 0.97,
        "unadjusted FDR {} should be near 1",
        unadjusted.mean
    );
    let bonferroni = report.bonferroni.empirical_fdr.unwrap();
    assert!(
        bonferroni.mean < 0.06,
        "bonferroni FWER-style control keeps FDP rare, got {}",
        bonferroni.mean
    );
}
