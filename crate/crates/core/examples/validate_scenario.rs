//! Parse the shipped tour scenario and a deliberately broken one, and print
//! what the validator finds.
//!
//! ```bash
//! cargo run --example validate_scenario
//! ```

use std::path::Path;

use tourbot::scenario::{parse_scenario, validate};

fn check(path: &Path) -> anyhow::Result<()> {
    let scenario = parse_scenario(&std::fs::read_to_string(path)?)?;
    let report = validate(&scenario);
    println!("{} ({} states)", path.file_name().unwrap().to_string_lossy(), scenario.states.len());
    if report.is_empty() {
        println!("  ok");
    }
    for finding in &report.findings {
        println!("  {}\t{}\t{}", finding.kind(), finding.subject(), finding.detail());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    check(&root.join("data/scenario/kyoto_tour.tsv"))?;
    for defect in ["defect_unreachable.tsv", "defect_shadowed.tsv", "defect_dangling.tsv"] {
        check(&root.join("tests/fixtures/scenarios").join(defect))?;
    }
    Ok(())
}
