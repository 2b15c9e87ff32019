//! Runs every primary acceptance criterion and prints one line for each.
//! Pass a criterion number to run only that one.

use std::process::ExitCode;

use dcpviz_acceptance::{evaluate, CRITERIA};

fn main() -> ExitCode {
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for &(n, title, check) in CRITERIA.iter().filter(|(n, _, _)| only.is_empty() || only.contains(n)) {
        let outcome = evaluate(n, title, check);
        println!("{outcome}");
        failed += !outcome.passed as usize;
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
