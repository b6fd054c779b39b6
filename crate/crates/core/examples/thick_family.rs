//! From a geodesic-family oracle to a mesh-driven inverse system.
//!
//! The oracle serves directed geodesics of a host tower together with the
//! single-arc swaps that perturb them.  `deviation` measures how far two
//! geodesics drift between partition points; `select_sup2` picks, per
//! gap, the family member deviating the most.  The builder then cuts the
//! canonical geodesic at a mesh scale and turns high-deviation gaps into
//! circles, producing a system whose measured constants feed the declared
//! ones.

use diamondlim::dyadic::Dyadic;
use diamondlim::laakso::build_laakso;
use diamondlim::oracle::{
    build_thick_system, deviation, measured_alpha, select_sup2, GeodesicOracle, Partition,
};
use diamondlim::system::{check_axioms, compute_deltas};

fn main() {
    let host = build_laakso(4).unwrap();
    let mut oracle = GeodesicOracle::new(host);

    // The family constant: max deviation achievable over the trivial
    // partition, exact.
    let alpha = measured_alpha(&mut oracle).unwrap();
    println!("measured family constant: {alpha}");

    // One explicit selection: perturb the canonical geodesic through the
    // quarter points.
    let gamma = oracle.canonical_trace();
    let partition = Partition::new(vec![
        Dyadic::zero(),
        Dyadic::ratio(1, 2),
        Dyadic::ratio(3, 2),
        Dyadic::one(),
    ])
    .unwrap();
    let record = select_sup2(&mut oracle, &gamma, &partition).unwrap();
    println!("per-gap deviations:");
    for (k, dev) in record.per_gap.iter().enumerate() {
        println!("  gap {k}: {dev}");
    }
    println!("total deviation: {}", record.total);

    // Deviation is symmetric in its inputs and zero for equal curves.
    let self_dev = deviation(&mut oracle, &gamma, &gamma, &partition).unwrap();
    assert!(self_dev.total.is_zero());

    // Build one mesh level at ratio 1/8 and verify the result.
    let build = build_thick_system(&mut oracle, &[Dyadic::ratio(1, 3)], 1).unwrap();
    for lev in &build.report.levels {
        println!(
            "level {}: mesh {}, {} circles, {} intervals, cuts in [{}, {}]",
            lev.level,
            lev.mesh,
            lev.circles,
            lev.intervals,
            lev.min_terminal_cut,
            lev.max_terminal_cut
        );
    }
    let sys = &build.system;
    let rep = compute_deltas(sys, 0).unwrap();
    println!("mesh ratios achieved: edge {}, distance {}", rep.delta_e, rep.delta_d);

    let axioms = check_axioms(sys, 7);
    for c in &axioms.checks {
        println!("  [{}] {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
    }
    assert!(axioms.checks.iter().all(|c| c.passed));
}
