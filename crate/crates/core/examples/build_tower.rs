//! Build the self-similar subdivision tower and verify its axioms.
//!
//! Each level replaces every edge with a quarter interval, a doubled
//! middle pair (a circle: two half-length arcs sharing both endpoints),
//! and a final quarter interval.  The run prints the level table, the
//! structural checks, and the exactly-achieved constants.

use diamondlim::laakso::build_laakso;
use diamondlim::system::{check_axioms, compute_deltas};

fn main() {
    let sys = build_laakso(4).expect("tower builds");
    println!("levels:");
    for (i, g) in sys.levels.iter().enumerate() {
        println!(
            "  level {i}: {:5} edges, {:5} vertices, total measure {}",
            g.edges().len(),
            g.n_vertices(),
            g.total_measure()
        );
    }

    println!("\nmesh reports:");
    for i in 0..sys.steps.len() {
        let rep = compute_deltas(&sys, i).expect("interior subedges stay interior");
        println!(
            "  step {}: edge ratio {}, distance ratio {}, min edge {}",
            rep.step, rep.delta_e, rep.delta_d, rep.min_edge_length
        );
    }

    println!("\naxiom checks (seed 42):");
    let report = check_axioms(&sys, 42);
    for c in &report.checks {
        println!("  [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for (i, a) in report.achieved_alpha.iter().enumerate() {
        if let Some(a) = a {
            println!("  step {i}: min circle height / length = {a}");
        }
    }
    for (i, b) in report.achieved_beta.iter().enumerate() {
        if let Some(b) = b {
            println!("  step {i}: min path circle mass = {b}");
        }
    }
    assert!(report.checks.iter().all(|c| c.passed));
}
