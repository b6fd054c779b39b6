//! Finite-scale differentiation: residual series at deep points.
//!
//! A point is deep when its projections keep away from the terminal
//! intervals of every level.  Around such points, each level supplies a
//! natural scale (the length of the level edge through the projection),
//! and the residual compares the function to its best linear model in the
//! projection coordinate at that scale.

use diamondlim::calculus::{
    differentiability_residual, projection_function, random_frozen_pl, sample_deep_points,
};
use diamondlim::dyadic::Dyadic;
use diamondlim::laakso::build_laakso;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let sys = build_laakso(4).unwrap();
    let top = sys.levels.len() - 1;
    let points = sample_deep_points(&sys, 5, 23);
    println!("found {} deep sample points", points.len());

    // The projection coordinate is exactly linear: residual zero at every
    // level and every deep point.
    let pi = projection_function(&sys);
    for (k, x) in points.iter().enumerate() {
        let rows =
            differentiability_residual(&sys, &pi, x, 1..top + 1, &Dyadic::ratio(1, 2), 6)
                .unwrap();
        assert!(rows.iter().all(|r| r.exactly_zero));
        println!("point {k}: projection residual identically zero over {} levels", rows.len());
    }

    // A function frozen at a coarse level: once the ball at a scale fits
    // inside a single coarse cell, the residual vanishes exactly.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_frozen_pl(&sys, 1, 1, &mut rng);
    let x = &points[0];
    let rows =
        differentiability_residual(&sys, &f, x, 1..top + 1, &Dyadic::ratio(1, 2), 6).unwrap();
    println!("\nfrozen function residual series:");
    for r in &rows {
        println!(
            "  level {}: scale {}, residual {:.6}, contained {}, bound {:.6}",
            r.level, r.scale, r.residual, r.contained_in_cell, r.bound
        );
        if r.contained_in_cell && r.level > 1 {
            assert!(r.exactly_zero, "containment forces a zero residual");
        }
    }
}
