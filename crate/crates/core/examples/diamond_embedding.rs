//! Generalized diamonds inside a sup-norm space.
//!
//! A witness expresses a direction as an average of well-separated
//! branches; its model graph is a chain of parallelograms joined along
//! two geodesic paths.  Substituting scaled model graphs into the middle
//! half of every edge yields a tower of graphs whose intrinsic metric
//! stays quasiconvex in the ambient norm.

use diamondlim::banach::{
    build_generalized_diamond, build_model_graph, certify_parallelogram,
    certify_quasiconvexity, check_d_axioms, compute_subdivision_exponent,
    fixture_witness_table, vertex_distortion,
};
use diamondlim::dyadic::Dyadic;
use num_rational::BigRational;

fn r(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

fn main() {
    let table = fixture_witness_table();
    println!("witness table: {} directions, branching exponent {}", table.entries.len(), 1);

    // The model graph of the vertical witness at unit scale.
    let w = &table.entries[0];
    let origin = vec![r(0, 1), r(0, 1), r(0, 1)];
    let model = build_model_graph(w, &Dyadic::one(), &origin).unwrap();
    println!(
        "model graph: {} vertices, {} edges, two paths of {} edges each",
        model.graph.n_vertices(),
        model.graph.edges().len(),
        model.gamma0.len()
    );

    // Every parallelogram of every witness is quasiconvex with its
    // declared constant — certified exactly on a parameter grid.
    for w in &table.entries {
        for j in 0..w.branches.len() {
            let rep = certify_parallelogram(w, j, 6);
            println!(
                "  parallelogram ({:?}, branch {j}): min ratio {} >= {}",
                w.c, rep.min_ratio, rep.delta_c
            );
            assert!(rep.passed);
        }
    }

    // Subdivision exponent: minimal N with 2^-N below a quarter of the
    // constants' half-gap.
    println!(
        "subdivision exponent for (1/5, 1/4): {}",
        compute_subdivision_exponent(&r(1, 5), &r(1, 4))
    );

    // One tower level: axioms, quasiconvexity, and vertex distortion.
    let sys = build_generalized_diamond(&table, &r(1, 1), 1).unwrap();
    println!(
        "\ntower: level-1 graph has {} edges at length 2^-{}",
        sys.levels[1].graph.edges().len(),
        sys.levels[1].n_i
    );
    for c in check_d_axioms(&sys) {
        println!("  [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        assert!(c.passed);
    }
    let qc = certify_quasiconvexity(&sys, 1, 300, 3);
    println!("quasiconvexity: min ratio {} >= {}", qc.min_ratio, qc.delta_i);
    assert!(qc.passed);
    let vd = vertex_distortion(&sys, 1, 30_000, 3);
    println!("vertex distortion: max {} <= {}", vd.max_ratio, vd.bound);
    assert!(vd.passed);
}
