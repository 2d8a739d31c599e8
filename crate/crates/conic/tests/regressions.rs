//! Beamforming subproblems that once stopped short of an optimal point.

use std::path::PathBuf;

use isac_conic::dump::load_program;
use isac_conic::{kkt_residuals, solve, Status, ToleranceSet};

fn check(name: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    let p = load_program(&path).unwrap();
    let sol = solve(&p, &ToleranceSet::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal, "{name}: {:?}", sol.residuals);
    let r = kkt_residuals(&p, &sol);
    assert!(r.within(1e-7), "{name}: {r:?}");
    assert!(sol.primal_objective >= sol.dual_objective - 1e-7 * (1.0 + sol.primal_objective.abs()));
}

// one full step drove a log entry's x·s far below its weight
#[test]
fn log_entry_overshoot() {
    check("log_overshoot.json");
}

// objective coefficients near 1e9 against O(1) constraint data
#[test]
fn large_cost_scale() {
    check("large_cost_scale.json");
}

// phase I centering broke down; phase II must start without it
#[test]
fn phase_one_breakdown() {
    check("phase_one_breakdown.json");
}
