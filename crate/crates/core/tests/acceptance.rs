//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`). Monte Carlo criteria run at
//! 10,000 replications with fixed seeds, so every number here is
//! deterministic.

mod common;

use common::{phi_quadrature, random_family, step_up_reject};
use hierfdr::rng::Stream;
use hierfdr::sim::run_full_experiment;
use hierfdr::{
    bh_adjust, expected_false_discoveries, fcr_intervals, normal_cdf, normal_quantile, parse_tree,
    reject_at_level, render_report, run_fdr_experiment, run_replication_experiment, treebh,
    turned_off_branches, Clustering, ContingencyTable2x2, DocumentFormat, Hypothesis,
    HypothesisTree, Node, ReportFormat, SelectedIntervalSpec, SimulationConfig,
};
use std::time::Instant;

fn fixture(name: &str) -> String {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {path}: {e}"))
}

fn sim_config(
    shape: &[usize],
    signal_fraction: f64,
    clustering: Clustering,
    effect: f64,
    seed: u64,
) -> SimulationConfig {
    SimulationConfig {
        tree_shape: shape.to_vec(),
        signal_fraction,
        clustering,
        effect,
        q: 0.05,
        replications: 10_000,
        seed,
    }
}

#[test]
fn acceptance_01_hierarchical_adjustment_of_demo_tree() {
    let started = Instant::now();
    let tree = parse_tree(&fixture("anova_tree.json"), DocumentFormat::Json).unwrap();
    assert_eq!(tree.roots.len(), 3);
    assert_eq!(tree.leaf_count(), 21);
    assert!(tree.validate().is_empty());
    let results = treebh(&tree, 0.05).unwrap();

    let target = results.iter().find(|r| r.node_id == "a2_3").unwrap();
    let expected = 0.0172 * 7.0 / 3.0;
    assert!(
        (target.adjusted_p - expected).abs() <= 1e-9,
        "adjusted {} vs {expected}",
        target.adjusted_p
    );
    assert!(target.rejected, "target must be rejected at q = 0.05");
    assert_eq!(target.selection_fraction, 1.0, "all three parents rejected");

    // all parents rejected, so nothing is turned off
    let parents: Vec<_> = results.iter().take(1 + 7).collect();
    assert!(parents[0].rejected);
    assert!(turned_off_branches(&tree, &results).is_empty());

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE hierarchical demo tree: PASS (p_adj {:.9}, {:?})",
        target.adjusted_p, elapsed
    );
}

#[test]
fn acceptance_02_flat_step_up_self_application() {
    let adjusted = bh_adjust(&[0.057, 0.15]).unwrap();
    assert_eq!(adjusted, vec![0.114, 0.15]);
    println!("ACCEPTANCE flat step-up self-application: PASS ({adjusted:?})");
}

#[test]
fn acceptance_03_replication_table_fixture() {
    let records = hierfdr::ingest_records(&fixture("rpp_synthetic.csv")).unwrap();
    assert_eq!(records.len(), 100);
    assert_eq!(records.iter().filter(|r| !r.included()).count(), 12);

    let table = hierfdr::contingency(&records, 0.05).unwrap();
    assert_eq!(
        (table.a, table.b, table.c, table.d),
        (31, 36, 1, 20),
        "fixture must reproduce the expected cells"
    );

    let chi = hierfdr::chi_square_2x2(&table).unwrap();
    // Exact Pearson value for these counts, cross-checked against the
    // closed form n(ad - bc)^2 / ((a+b)(c+d)(a+c)(b+d)) = 30012928/2521344.
    let exact = 30_012_928.0 / 2_521_344.0;
    assert!(
        (chi.statistic - exact).abs() <= 1e-9,
        "statistic {} vs exact {exact}",
        chi.statistic
    );
    // rounds to 11.9 at one decimal
    assert!((chi.statistic - 11.9).abs() < 0.05);

    // p from the df = 1 tail, verified against the quadrature oracle
    let p_oracle = 2.0 * (1.0 - phi_quadrature(chi.statistic.sqrt()));
    assert!((chi.p - p_oracle).abs() <= 1e-9, "p {} vs {p_oracle}", chi.p);
    assert!(chi.p > 1e-4, "tail is ~5.6e-4, not below 1e-4");

    let rates = hierfdr::headline_rates(&table);
    let s = rates.sensitivity.unwrap();
    let pr = rates.precision.unwrap();
    let m = rates.miss_rate.unwrap();
    assert_eq!((s.numerator, s.denominator), (31, 32));
    assert_eq!((pr.numerator, pr.denominator), (31, 67));
    assert_eq!((m.numerator, m.denominator), (1, 21));

    // report carries both values and the documented-discrepancy note
    let text = render_report(&records, 0.05, ReportFormat::Text).unwrap();
    assert!(text.contains("11.9035"), "{text}");
    assert!(text.contains("31/32 (96.9%)"), "{text}");
    assert!(text.contains("31/67 (46.3%)"), "{text}");
    assert!(text.contains("1/21 (4.8%)"), "{text}");
    assert!(text.contains("overstate"), "discrepancy note missing:\n{text}");
    println!(
        "ACCEPTANCE replication table fixture: PASS (chi2 {:.4}, p {:.3e})",
        chi.statistic, chi.p
    );
}

#[test]
fn acceptance_04_expected_false_discoveries() {
    let expected = expected_false_discoveries(140, 0.05).unwrap();
    assert_eq!(expected, 7.0);
    println!("ACCEPTANCE expected false discoveries: PASS (140 x 0.05 = {expected})");
}

#[test]
fn acceptance_05_fdr_control_monte_carlo() {
    let started = Instant::now();

    // all-null flat family: empirical FDR = q
    let all_null = sim_config(&[100], 0.0, Clustering::Scattered, 0.0, 11);
    let report = run_fdr_experiment(&all_null).unwrap();
    let bh = report.bh.empirical_fdr.unwrap();
    assert!(
        (bh.mean - 0.05).abs() <= 0.01,
        "all-null BH FDR {} +- {}",
        bh.mean,
        bh.std_error
    );

    // half nulls: empirical FDR = (m0/m) q = 0.025
    let half_null = sim_config(&[100], 0.5, Clustering::Scattered, 3.0, 12);
    let report = run_fdr_experiment(&half_null).unwrap();
    let bh_half = report.bh.empirical_fdr.unwrap();
    assert!(
        (bh_half.mean - 0.025).abs() <= 0.01,
        "half-null BH FDR {} +- {}",
        bh_half.mean,
        bh_half.std_error
    );

    // leaf-level FDR control for the tree procedure across the config grid
    let mut grid_results = Vec::new();
    for shape in [vec![100], vec![10, 10]] {
        for signal_fraction in [0.0, 0.1, 0.3] {
            for effect in [2.0, 3.0] {
                let cfg = SimulationConfig {
                    tree_shape: shape.clone(),
                    signal_fraction,
                    clustering: Clustering::Clustered,
                    effect,
                    q: 0.05,
                    replications: 10_000,
                    seed: 13,
                };
                let report = run_fdr_experiment(&cfg).unwrap();
                for (name, method) in [("bh", &report.bh), ("treebh", &report.treebh)] {
                    let est = method.empirical_fdr.unwrap();
                    assert!(
                        est.mean <= 0.05 + 3.0 * est.std_error,
                        "{name} FDR {} +- {} on shape {shape:?} sf {signal_fraction} mu {effect}",
                        est.mean,
                        est.std_error
                    );
                }
                grid_results.push(report.treebh.empirical_fdr.unwrap().mean);
            }
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE FDR control: PASS (all-null {:.4}, half-null {:.4}, grid max {:.4}, {:?})",
        bh.mean,
        bh_half.mean,
        grid_results.iter().cloned().fold(0.0, f64::max),
        elapsed
    );
}

#[test]
fn acceptance_06_single_family_oracle_equivalence() {
    let mut stream = Stream::substream(2026, &[6]);
    for case in 0..10_000 {
        let family = random_family(&mut stream, 12);
        let q = 0.05;

        let tree = HypothesisTree::new(
            family
                .iter()
                .enumerate()
                .map(|(i, &p)| Node::leaf(Hypothesis::new(format!("h{i}"), Some(p))))
                .collect(),
            q,
        );
        let tree_results = treebh(&tree, q).unwrap();
        let flat = bh_adjust(&family).unwrap();
        let flat_rejections = reject_at_level(&flat, q).unwrap();

        for (i, r) in tree_results.iter().enumerate() {
            assert!(
                (r.adjusted_p - flat[i]).abs() <= 1e-12,
                "case {case}: adjusted {} vs {}",
                r.adjusted_p,
                flat[i]
            );
            assert_eq!(r.rejected, flat_rejections.contains(&i), "case {case}");
        }

        let brute = step_up_reject(&family, q);
        assert_eq!(flat_rejections, brute, "case {case}: {family:?}");
    }
    println!("ACCEPTANCE single-family oracle equivalence: PASS (10,000 instances)");
}

#[test]
fn acceptance_07_clustered_power_advantage() {
    let started = Instant::now();
    // signals packed into 2 of 10 branches
    let cfg = sim_config(&[10, 10], 0.2, Clustering::Clustered, 3.0, 17);
    let report = run_fdr_experiment(&cfg).unwrap();
    let tree = report.treebh.power.unwrap();
    let flat = report.bh.power.unwrap();
    let allowance = 2.0 * (tree.std_error * tree.std_error + flat.std_error * flat.std_error).sqrt();
    assert!(
        tree.mean >= flat.mean - allowance,
        "treebh power {} vs flat {} (allowance {allowance})",
        tree.mean,
        flat.mean
    );
    println!(
        "ACCEPTANCE clustered power: PASS (treebh {:.4} vs flat {:.4}, {:?})",
        tree.mean,
        flat.mean,
        started.elapsed()
    );
}

#[test]
fn acceptance_08_replication_rate_direction() {
    let started = Instant::now();
    // mixed signals on the 3x7 shape
    let cfg = sim_config(&[3, 7], 0.3, Clustering::Clustered, 4.0, 19);
    let report = run_replication_experiment(&cfg).unwrap();
    let rate = |t: &ContingencyTable2x2| {
        let n = (t.a + t.b) as f64;
        (t.a as f64 / n, ((t.a as f64 / n) * (1.0 - t.a as f64 / n) / n).sqrt())
    };
    let (tree_rate, tree_se) = rate(report.treebh.replication_table.as_ref().unwrap());
    let (un_rate, un_se) = rate(report.unadjusted.replication_table.as_ref().unwrap());
    let margin = 3.0 * (tree_se * tree_se + un_se * un_se).sqrt();
    assert!(
        tree_rate > un_rate + margin,
        "replication rate among significant results: treebh {tree_rate} vs unadjusted {un_rate} (margin {margin})"
    );
    println!(
        "ACCEPTANCE replication-rate direction: PASS (treebh {:.4} > unadjusted {:.4} + {margin:.4}, {:?})",
        tree_rate,
        un_rate,
        started.elapsed()
    );
}

#[test]
fn acceptance_09_numeric_accuracy() {
    // CDF against the quadrature oracle on a 1,000-point grid
    let n = 1000;
    let mut worst_cdf = 0.0_f64;
    for i in 0..n {
        let z = -8.0 + 16.0 * i as f64 / (n - 1) as f64;
        worst_cdf = worst_cdf.max((normal_cdf(z).unwrap() - phi_quadrature(z)).abs());
    }
    assert!(worst_cdf <= 1e-12, "worst CDF error {worst_cdf:e}");

    // quantile round trip over z in [-6, 6]
    let mut worst_rt = 0.0_f64;
    for i in 0..n {
        let z = -6.0 + 12.0 * i as f64 / (n - 1) as f64;
        let p = normal_cdf(z).unwrap();
        let back = normal_quantile(p).unwrap();
        worst_rt = worst_rt.max((back - z).abs());
    }
    assert!(worst_rt <= 1e-8, "worst round-trip error {worst_rt:e}");

    // FCR example: 2 of 10 selected at q = 0.05 gives half-width z_{0.995}
    let mut specs = vec![
        SelectedIntervalSpec {
            estimate: 0.0,
            standard_error: 1.0,
            selected: false,
        };
        10
    ];
    specs[2].selected = true;
    specs[7].selected = true;
    let intervals = fcr_intervals(&specs, 0.05).unwrap();
    assert_eq!(intervals.len(), 2);
    let half_width = intervals[0].upper;
    assert!(
        (half_width - 2.575829).abs() <= 1e-4,
        "half-width {half_width}"
    );

    println!(
        "ACCEPTANCE numeric accuracy: PASS (cdf {:.2e}, round-trip {:.2e}, half-width {:.6})",
        worst_cdf, worst_rt, half_width
    );
}

#[test]
fn acceptance_10_simulation_determinism_across_thread_counts() {
    let cfg = sim_config(&[3, 7], 0.3, Clustering::Clustered, 4.0, 23);
    let cfg = SimulationConfig {
        replications: 2_000,
        ..cfg
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run_full_experiment(&cfg).unwrap().to_json())
    };
    let first = run(1);
    let second = run(8);
    let third = run(8);
    assert_eq!(first, second, "reports differ between 1 and 8 threads");
    assert_eq!(second, third, "reports differ between repeated runs");
    println!("ACCEPTANCE simulation determinism (library): PASS");
}
