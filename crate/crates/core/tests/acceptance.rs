//! Acceptance run: one line per criterion, exit status 1 if any criterion
//! other than the documented known failure is red.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use evpde_core::suite::{checks, surface_conservation_drift, CheckResult, SuiteOptions};

struct Criterion {
    id: u8,
    title: &'static str,
    budget: Option<Duration>,
}

const CRITERIA: [Criterion; 8] = [
    Criterion { id: 1, title: "surface heat conservation", budget: Some(Duration::from_secs(5)) },
    Criterion { id: 2, title: "transport theorem Richardson ratio", budget: Some(Duration::from_secs(5)) },
    Criterion { id: 3, title: "Jacobian ODE vs determinant", budget: Some(Duration::from_secs(1)) },
    Criterion { id: 4, title: "manufactured convergence rates", budget: Some(Duration::from_secs(120)) },
    Criterion { id: 5, title: "Steklov spectrum", budget: Some(Duration::from_secs(30)) },
    Criterion { id: 6, title: "coupled conservation", budget: Some(Duration::from_secs(30)) },
    Criterion { id: 7, title: "energy stability under refinement", budget: None },
    Criterion { id: 8, title: "dynamic boundary Fourier mode", budget: Some(Duration::from_secs(30)) },
];

/// Checks that are expected to be red; see the decisions ledger.
const KNOWN_RED: [(&str, &str); 1] = [("energy", "coupled_bulk_surface")];

fn main() -> ExitCode {
    // libtest passes flags such as `--list`; there is nothing to list.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let opts = SuiteOptions::default();
    let all = checks();
    let mut unexpected = 0;
    for c in &CRITERIA {
        let start = Instant::now();
        let mut results: Vec<CheckResult> =
            all.iter().filter(|k| k.criterion == Some(c.id)).map(|k| k.run(&opts)).collect();
        if c.id == 1 {
            // The absolute bound, independent of the suite's scaled tolerance.
            let (passed, detail) = match surface_conservation_drift(1.0) {
                Ok((drift, _)) => (drift <= 1e-9, format!("absolute drift {drift:.2e} <= 1e-9")),
                Err(e) => (false, format!("error: {e}")),
            };
            results.push(CheckResult { group: "conservation", name: "absolute", passed, detail });
        }
        let elapsed = start.elapsed();
        let in_budget = c.budget.is_none_or(|b| elapsed <= b);
        let known = |r: &CheckResult| KNOWN_RED.contains(&(r.group, r.name));
        let passed = in_budget && results.iter().all(|r| r.passed);
        let excused = !passed && in_budget && results.iter().all(|r| r.passed || known(r));
        let status = if passed {
            "PASS"
        } else if excused {
            "FAIL (known)"
        } else {
            unexpected += 1;
            "FAIL"
        };
        let budget = c.budget.map_or(String::new(), |b| format!(" / {}s", b.as_secs()));
        println!("criterion {}: {status} [{:.1}s{budget}] {}", c.id, elapsed.as_secs_f64(), c.title);
        for r in &results {
            let mark = if r.passed { "ok" } else { "red" };
            println!("    {}/{} {mark}: {}", r.group, r.name, r.detail);
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
