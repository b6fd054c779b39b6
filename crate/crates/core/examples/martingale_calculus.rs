//! Conditional expectation, exact derivatives, and the path-integral
//! inequality on the subdivision tower.
//!
//! A piecewise-linear function on the deepest level is averaged down the
//! tower of projections.  Its per-edge slope fields satisfy the exact
//! martingale identity: pushing the level-(i+1) slope field down yields
//! the level-i field, with no error term.

use diamondlim::calculus::{
    cond_exp_identity_check, cond_exp_tower, derivative_martingale, ftc_check,
    lip_amplification_check, projection_function, random_pl,
};
use diamondlim::graph::SegmentSet;
use diamondlim::laakso::build_laakso;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let sys = build_laakso(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let f = random_pl(&sys, 2, &mut rng);
    let (tower, tables) = cond_exp_tower(&sys, &f);

    // Averaging identity, exact, against an edge indicator.
    let phi = SegmentSet::whole_edge(&sys.levels[1], 0);
    let row = cond_exp_identity_check(&sys, 1, &phi, &f, &tower, &tables);
    println!("averaging identity exact: {} (lhs = rhs = {:?})", row.exact, row.lhs);
    assert!(row.exact);

    // Martingale identity for slope fields, exact at every level.
    let (fields, report) = derivative_martingale(&sys, &tower, &tables);
    println!(
        "martingale identity: exact = {}, levels checked = {}",
        report.exact, report.levels_checked
    );
    for (l, field) in fields.iter().enumerate() {
        println!("  level {l}: sup slope {:.6}", field.sup_norm_f64());
    }
    assert!(report.exact);

    // The projection coordinate itself has slope one everywhere; the
    // tower fixes it.
    let pi = projection_function(&sys);
    let (pi_tower, pi_tables) = cond_exp_tower(&sys, &pi);
    let (pi_fields, pi_report) = derivative_martingale(&sys, &pi_tower, &pi_tables);
    assert!(pi_report.exact);
    println!("projection slope sup at level 0: {:.1}", pi_fields[0].sup_norm_f64());

    // One-step Lipschitz amplification stays below 1 + mesh ratio.
    for i in 0..sys.levels.len() - 1 {
        let rep = lip_amplification_check(&sys, i, &tower, &tables, 400, 5).unwrap();
        println!(
            "  [{}] amplification level {i}: {:.6} <= {:.6}",
            if rep.passed { "PASS" } else { "FAIL" },
            rep.max_ratio,
            rep.bound
        );
        assert!(rep.passed);
    }

    // Path-integral inequality: the difference of averages over a
    // shortest path is at most twice the path average of the slope norm.
    let rep = ftc_check(&sys, 1, &f, 500, 9).unwrap();
    println!("path-integral max ratio: {:.6} over {} pairs", rep.max_ratio, rep.rows.len());
    assert!(rep.max_ratio <= 1.0);
}
