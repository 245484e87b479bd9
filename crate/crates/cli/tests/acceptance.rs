//! CLI slice of the acceptance suite: the monitor-loop contract.

use std::path::PathBuf;
use std::process::Command;

fn qcal() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qcal"))
}

#[test]
fn criterion_9_monitor_loop_produces_n_metrics_records() {
    let root = tempfile::tempdir().unwrap();
    let platforms: PathBuf = root.path().join("platforms");
    qcal_core::demo::write_demo_platform(&platforms.join("demo")).unwrap();
    let runcard = root.path().join("monitor.yml");
    std::fs::write(
        &runcard,
        "platform: demo\ntargets: [q0]\nactions:\n  - id: t1\n    operation: coherence_decay\n    update: false\n    parameters: {kind: t1}\n",
    )
    .unwrap();
    let out = root.path().join("monitoring");

    let result = qcal()
        .args([
            "monitor",
            runcard.to_str().unwrap(),
            "--interval",
            "0",
            "--repeat",
            "3",
            "--output",
            out.to_str().unwrap(),
            "--seed",
            "30",
        ])
        .env("QCAL_PLATFORMS", &platforms)
        .output()
        .unwrap();
    assert_eq!(
        result.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );

    let metrics = qcal_core::report::read_metrics(&out.join("metrics.jsonl")).unwrap();
    let t1_count = metrics.iter().filter(|r| r.metric == "t1_ns").count();
    assert_eq!(t1_count, 3, "expected one t1_ns record per iteration");
    for k in 0..3 {
        assert!(out.join(format!("iter-{k:03}/report.html")).is_file());
    }
    println!("ACCEPTANCE criterion 9 (monitor loop): PASS (3 iterations, {t1_count} t1 records)");
}
