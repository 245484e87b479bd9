//! The checked-in demo platform must stay in sync with the built-in
//! generator, since the README walkthrough and fresh checkouts rely on it.

use std::path::Path;

#[test]
fn checked_in_demo_platform_matches_generator() {
    let repo_demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../platforms/demo");
    let generated = tempfile::tempdir().unwrap();
    qcal_core::demo::write_demo_platform(generated.path()).unwrap();
    for file in ["platform.json", "truth.json"] {
        let committed = std::fs::read(repo_demo.join(file))
            .unwrap_or_else(|e| panic!("missing platforms/demo/{file}: {e}"));
        let fresh = std::fs::read(generated.path().join(file)).unwrap();
        assert_eq!(
            committed, fresh,
            "platforms/demo/{file} drifted from qcal_core::demo; regenerate it"
        );
    }
}
