//! Exact dyadic arithmetic on metric graphs: shortest paths, balls, and
//! doubling ratios with zero rounding error.

use diamondlim::dyadic::Dyadic;
use diamondlim::graph::{ball, doubling_ratio, shortest_path_witness, GraphPoint};
use diamondlim::laakso::build_laakso;

fn main() {
    // Dyadic numbers print as p/2^k and round-trip through strings.
    let a: Dyadic = "3/2^5".parse().unwrap();
    let b = Dyadic::ratio(1, 3);
    println!("a = {a}, b = {b}, a + b = {}, a * b = {}", &a + &b, &a * &b);

    let sys = build_laakso(3).unwrap();
    let g = &sys.levels[3];

    // A shortest path between two interior points, with its witness
    // decomposed into exact edge segments.
    let p = GraphPoint::on_edge(g, 0, g.edge(0).length.halve(1)).unwrap();
    let q = GraphPoint::on_edge(g, 40, g.edge(40).length.halve(2)).unwrap();
    let (d, witness) = shortest_path_witness(g, &p, &q).unwrap();
    let segs = witness.as_segment_set();
    let mut length = Dyadic::zero();
    for (_, lo, hi) in segs.segments() {
        length = &length + &(hi - lo);
    }
    println!("\nd(p, q) = {d} across {} segments", segs.segments().len());
    assert_eq!(length, d);

    // Balls are exact segment sets; doubling compares mass at r and 2r.
    let r = Dyadic::ratio(1, 4);
    let small = ball(g, &p, &r);
    let big = ball(g, &p, &(&r + &r));
    println!(
        "ball masses: |B_r| = {}, |B_2r| = {}, ratio = {}",
        small.measure(g),
        big.measure(g),
        doubling_ratio(g, &p, &r, None).unwrap()
    );
    assert!(big.contains_set(&small));
}
