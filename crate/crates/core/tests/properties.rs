//! Randomized property tests: algebraic laws of the exact arithmetic and
//! metric/measure invariants of the towers, each checked against an
//! independent formulation.

use std::sync::OnceLock;

use diamondlim::graph::{ball, doubling_ratio, DistCache, SegmentSet};
use diamondlim::laakso::build_laakso;
use diamondlim::oracle::GeodesicOracle;
use diamondlim::system::{alberti_reconstruct, alberti_representation, random_point, InverseSystem};
use diamondlim::Dyadic;
use num_rational::BigRational;
use num_traits::One;
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tower() -> &'static InverseSystem {
    static SYS: OnceLock<InverseSystem> = OnceLock::new();
    SYS.get_or_init(|| build_laakso(3).unwrap())
}

fn dyadic_strategy() -> impl Strategy<Value = Dyadic> {
    (-4096i64..=4096, 0u32..=20).prop_map(|(p, k)| Dyadic::ratio(p, k))
}

proptest! {
    /// Formatting and parsing are inverse bijections on canonical values.
    #[test]
    fn dyadic_string_round_trip(a in dyadic_strategy()) {
        let s = a.to_string();
        let back: Dyadic = s.parse().unwrap();
        prop_assert_eq!(back, a);
    }

    /// Ring laws, checked against big-rational arithmetic as the oracle.
    #[test]
    fn dyadic_ring_laws(a in dyadic_strategy(), b in dyadic_strategy(), c in dyadic_strategy()) {
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!((&a - &a).is_zero(), true);
        prop_assert_eq!((&a + &b).to_rational(), a.to_rational() + b.to_rational());
        prop_assert_eq!((&a * &b).to_rational(), a.to_rational() * b.to_rational());
        prop_assert_eq!(Dyadic::min(&a, &b).to_rational(),
            a.to_rational().min(b.to_rational()));
    }

    /// Graph distance is a metric: symmetric and satisfying the triangle
    /// inequality on random point triples at every level.
    #[test]
    fn distance_is_a_metric(seed in any::<u64>(), level in 0usize..=3) {
        let sys = tower();
        let g = &sys.levels[level];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_point(sys, level, &mut rng, 8);
        let y = random_point(sys, level, &mut rng, 8);
        let z = random_point(sys, level, &mut rng, 8);
        let mut cache = DistCache::new();
        let dxy = cache.point_distance(g, &x, &y).unwrap();
        let dyx = cache.point_distance(g, &y, &x).unwrap();
        let dyz = cache.point_distance(g, &y, &z).unwrap();
        let dxz = cache.point_distance(g, &x, &z).unwrap();
        prop_assert_eq!(&dxy, &dyx);
        prop_assert!(dxz <= &dxy + &dyz);
        if x == y {
            prop_assert!(dxy.is_zero());
        }
    }

    /// Balls are monotone in the radius, and the doubling ratio is >= 1.
    #[test]
    fn balls_monotone(seed in any::<u64>(), level in 0usize..=3, k in 2u32..=6) {
        let sys = tower();
        let g = &sys.levels[level];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_point(sys, level, &mut rng, 8);
        let r = Dyadic::ratio(1, k);
        let small = ball(g, &x, &r);
        let big = ball(g, &x, &r.double(1));
        prop_assert!(big.contains_set(&small));
        prop_assert!(small.measure(g) <= big.measure(g));
        if let Ok(ratio) = doubling_ratio(g, &x, &r, None) {
            prop_assert!(ratio >= BigRational::one());
        }
    }

    /// Projections never increase distances (1-Lipschitz), for every pair
    /// of levels.
    #[test]
    fn projection_is_short(seed in any::<u64>(), j in 1usize..=3) {
        let sys = tower();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_point(sys, j, &mut rng, 8);
        let y = random_point(sys, j, &mut rng, 8);
        let mut cache_j = DistCache::new();
        let dj = cache_j.point_distance(&sys.levels[j], &x, &y).unwrap();
        for i in 0..j {
            let xi = sys.project_point(j, i, &x);
            let yi = sys.project_point(j, i, &y);
            let mut cache_i = DistCache::new();
            let di = cache_i.point_distance(&sys.levels[i], &xi, &yi).unwrap();
            prop_assert!(di <= dj);
        }
    }

    /// Lifting a segment set one level preserves its measure exactly (the
    /// pushforward identity on arbitrary unions of subintervals, not just
    /// whole subedges).
    #[test]
    fn lift_preserves_measure(seed in any::<u64>(), i in 0usize..=2) {
        let sys = tower();
        let segs = random_segment_set(sys, i, seed);
        let lifted = sys.lift_segments(i, &segs);
        prop_assert_eq!(segs.measure(&sys.levels[i]), lifted.measure(&sys.levels[i + 1]));
    }

    /// The path-measure decomposition reconstructs the measure of arbitrary
    /// segment sets: weighting arclength along source-sink paths agrees
    /// with edge-weight measure.
    #[test]
    fn path_decomposition_reconstructs_measure(seed in any::<u64>(), i in 0usize..=2) {
        let sys = tower();
        let segs = random_segment_set(sys, i, seed);
        let pm = alberti_representation(sys, i);
        prop_assert_eq!(alberti_reconstruct(sys, &pm, &segs), segs.measure(&sys.levels[i]));
    }

    /// The canonical source-sink curve is a unit-speed geodesic: distances
    /// between its time-`s` and time-`t` points equal `|t - s|`, and
    /// restriction keeps lengths consistent.
    #[test]
    fn canonical_trace_is_geodesic(s in 0i64..=64, t in 0i64..=64) {
        prop_assume!(s < t);
        let mut oracle = GeodesicOracle::new(build_laakso(2).unwrap());
        let gamma = oracle.canonical_trace();
        let (s, t) = (Dyadic::ratio(s, 6), Dyadic::ratio(t, 6));
        let g = &oracle.host.levels[oracle.host.top()];
        let p = gamma.point_at(g, &s);
        let q = gamma.point_at(g, &t);
        prop_assert_eq!(gamma.sub(&s, &t).length(), &t - &s);
        prop_assert_eq!(oracle.distance(&p, &q), &t - &s);
    }
}

/// Random union of dyadic subintervals of level-`i` edges.
fn random_segment_set(sys: &InverseSystem, i: usize, seed: u64) -> SegmentSet {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = &sys.levels[i];
    let mut segs = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let e = rng.gen_range(0..g.edges().len());
        let len = &g.edge(e).length;
        let a = rng.gen_range(0..31i64);
        let b = rng.gen_range(a + 1..=32i64);
        segs.push((e, &Dyadic::ratio(a, 5) * len, &Dyadic::ratio(b, 5) * len));
    }
    SegmentSet::new(segs)
}
