//! Acceptance criteria 1 to 9 at their stated grids, tolerances and runtime
//! targets. Prints one line per criterion, then the failing cases, and exits
//! nonzero when any criterion fails.

use std::process::ExitCode;

use eisfam_cli::acceptance::Criterion;
use eisfam_cli::config::Config;

fn main() -> ExitCode {
    let cfg = Config::default();
    assert_eq!((cfg.p, cfg.precision, cfg.certified()), (5, 25, 19));
    let mut failed = Vec::new();
    for c in Criterion::ALL {
        let o = c.run(&cfg);
        let late = if o.within_budget() { "" } else { " OVER BUDGET" };
        println!("{}{late}", o.line());
        if !o.holds() || !o.within_budget() {
            failed.push(o);
        }
    }
    for o in &failed {
        println!("\ncriterion {} failing cases ({}):", o.criterion.number(), o.failures.len());
        for f in &o.failures {
            println!("  {f}");
        }
    }
    println!("\nacceptance: {} of 9 criteria pass", 9 - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
