//! Acceptance criteria, one line each. Exits non-zero if any fails.
//!
//! `PERFEKTOR_ACCEPTANCE=3,9` restricts the run to the listed criteria.

use std::process::ExitCode;

use perfektor_core::harness::{run_criterion, SuiteOptions, CRITERIA};

fn main() -> ExitCode {
    let selected: Option<Vec<u32>> = std::env::var("PERFEKTOR_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let opts = SuiteOptions::default();
    let mut failed = 0;
    for &(id, _) in &CRITERIA {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let r = run_criterion(id, &opts);
        println!(
            "criterion {:>2} {}: {} ({:.1}s) {}",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
        failed += usize::from(!r.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
