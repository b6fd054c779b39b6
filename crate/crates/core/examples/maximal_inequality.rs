//! The maximal operator, its weak-type bound, and the exact greedy
//! covering argument behind it.

use diamondlim::calculus::{
    cond_exp_tower, covering_select, maximal_function, random_pl, weak_inequality_check,
    CoverCandidate,
};
use diamondlim::dyadic::Dyadic;
use diamondlim::graph::GraphPoint;
use diamondlim::laakso::build_laakso;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let sys = build_laakso(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let h = random_pl(&sys, 1, &mut rng);

    // Weak-type bound: sup_t t * mu{M > t} <= 256 p/(p-1) ||h||_p.
    let reports = weak_inequality_check(&sys, &h, &[1.5, 2.0, 4.0], 400, 17).unwrap();
    for r in &reports {
        println!(
            "[{}] p = {}: weak norm {:.6} <= bound {:.6} (||h||_p = {:.6})",
            if r.passed { "PASS" } else { "FAIL" },
            r.p,
            r.weak_norm,
            r.bound,
            r.lp
        );
        assert!(r.passed);
    }

    // Spot evaluation of the maximal function at an interior point.
    let (tower, tables) = cond_exp_tower(&sys, &h);
    let top = sys.levels.len() - 1;
    let g = &sys.levels[top];
    let x = GraphPoint::on_edge(g, 3, g.edge(3).length.halve(1)).unwrap();
    let m = maximal_function(&sys, &tower, &tables, &x).unwrap();
    println!("M(h) at a sample point: {m:.6}");

    // Exact greedy covering: disjoint selection, full coverage by
    // five-fold enlargements, measure ratio at most 256.
    let mk = |level: usize, e: usize, a: Dyadic, b: Dyadic| {
        let g = &sys.levels[level];
        CoverCandidate {
            level,
            p: GraphPoint::on_edge(g, e, a).unwrap(),
            q: GraphPoint::on_edge(g, e, b).unwrap(),
        }
    };
    let candidates = vec![
        mk(2, 0, Dyadic::ratio(1, 6), Dyadic::ratio(3, 6)),
        mk(2, 1, Dyadic::ratio(1, 6), Dyadic::ratio(2, 6)),
        mk(2, 5, Dyadic::ratio(1, 7), Dyadic::ratio(3, 7)),
        mk(3, 9, Dyadic::ratio(1, 8), Dyadic::ratio(2, 8)),
    ];
    let rep = covering_select(&sys, &candidates).unwrap();
    println!(
        "covering: selected {:?}, disjoint {}, covered {}, max ratio {:?}",
        rep.selected, rep.disjoint, rep.covered, rep.max_ratio
    );
    assert!(rep.disjoint && rep.covered);
}
