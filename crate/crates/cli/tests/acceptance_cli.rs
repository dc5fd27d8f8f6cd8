//! Acceptance: `simulate` must produce byte-identical reports for the
//! same config and seed, run twice, at 1 and at 8 threads.

use std::path::PathBuf;
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR")))
}

fn run_simulate(threads: &str, format: &str) -> Vec<u8> {
    let output = Command::new(env!("CARGO_BIN_EXE_hierfdr"))
        .args(["simulate", "--format", format])
        .arg(fixture("sim_clustered.json"))
        .env("HIERFDR_THREADS", threads)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output.stdout
}

#[test]
fn acceptance_simulate_determinism_across_thread_counts() {
    for format in ["text", "json", "csv"] {
        let single_a = run_simulate("1", format);
        let single_b = run_simulate("1", format);
        let eight_a = run_simulate("8", format);
        let eight_b = run_simulate("8", format);
        assert_eq!(single_a, single_b, "{format}: single-thread reruns differ");
        assert_eq!(eight_a, eight_b, "{format}: 8-thread reruns differ");
        assert_eq!(single_a, eight_a, "{format}: thread count changed the bytes");
    }
    println!("ACCEPTANCE simulate determinism (1 vs 8 threads, byte-identical): PASS");
}
