//! Acceptance gate: one line of output per criterion, all must pass.

use pqlab_cli::acceptance;

#[test]
fn acceptance_criteria() {
    let results = acceptance::run_all();
    for c in &results {
        println!("{}", c.line());
    }
    let failed: Vec<&str> = results.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
