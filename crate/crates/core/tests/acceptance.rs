//! The oracle acceptance suite as an integration test: one pass/fail line
//! per criterion, every tolerance pinned in `multifract::verify`.

#[test]
fn acceptance_criteria() {
    let report = multifract::verify::run_all(7);
    for o in &report.outcomes {
        println!(
            "{} criterion {:2}: {} [{}]",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.details
        );
    }
    assert_eq!(report.outcomes.len(), 12);
    let failed: Vec<String> = report
        .outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("criterion {} ({}): {}", o.id, o.name, o.details))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
