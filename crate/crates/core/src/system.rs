//! Inverse systems of metric measure graphs.
//!
//! A system is a tower of graphs `X_0, X_1, ..., X_J` where `X_0` is the
//! unit interval and each `X_{i+1}` arises from `X_i` by subdividing every
//! edge and attaching, to some interior subedges, an *opposite* edge with
//! the same endpoints and length (turning the pair into a circle).  The
//! combinatorics of one step live in [`Step`]: per parent edge an ordered
//! list of [`SubEdge`]s, each naming its identity copy (`primary`) and its
//! partner (`opposite`, equal to `primary` for interval subedges) among the
//! child edges.
//!
//! Conventions maintained by every builder in this crate:
//! * vertex ids are stable: the vertices of `X_i` are `0..levels[i].n_vertices()`
//!   and keep their ids in all finer levels;
//! * subedges are listed in order along the parent edge, and their primary
//!   edges are directed with the parent;
//! * an opposite edge has the same source, sink, and length as its primary,
//!   and its offsets correspond under the collapse map (so projection is
//!   offset-preserving on both members of a circle).
//!
//! The measure recursion halves the density on both members of a circle and
//! keeps it on intervals, which makes every projection push the finer
//! measure forward to the coarser one exactly; `pushforward_check` verifies
//! this per subedge.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::graph::{
    ball, DistCache, EdgeId, GraphPoint, MetricGraph, SegmentSet, VertexId,
};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("level index {0} out of range")]
    BadLevel(usize),
    #[error("structural defect at step {step}: {detail}")]
    Structure { step: usize, detail: String },
    #[error("point does not belong to the stated level")]
    BadPoint,
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// One subedge of a parent edge: the interval `[lo, hi]` in parent
/// coordinates, its identity copy `primary` among the child edges, and its
/// `opposite` partner (`== primary` exactly when the subedge is an interval).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubEdge {
    pub lo: Dyadic,
    pub hi: Dyadic,
    pub terminal: bool,
    pub primary: EdgeId,
    pub opposite: EdgeId,
}

impl SubEdge {
    pub fn length(&self) -> Dyadic {
        &self.hi - &self.lo
    }

    pub fn is_circle(&self) -> bool {
        self.primary != self.opposite
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSubdivision {
    pub subedges: Vec<SubEdge>,
}

/// Reverse lookup for a child edge: which subedge of which parent it realizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChildRecord {
    pub parent_edge: EdgeId,
    pub sub_index: usize,
    pub is_opposite: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step {
    /// Indexed by parent edge id.
    pub subdivisions: Vec<EdgeSubdivision>,
    /// Indexed by child edge id.
    pub children: Vec<ChildRecord>,
    /// Positions of the cut vertices (new at the child level) inside the
    /// parent graph: `(vertex, parent edge, offset)`.
    pub cut_positions: Vec<(VertexId, EdgeId, Dyadic)>,
}

impl Step {
    pub fn subedge(&self, child: EdgeId) -> &SubEdge {
        let rec = &self.children[child];
        &self.subdivisions[rec.parent_edge].subedges[rec.sub_index]
    }
}

/// Declared constants of a system.  `alpha` and `beta` are the targets the
/// axiom checkers certify against; `delta_prime` is the declared per-level
/// smallness schedule (one entry per step).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constants {
    pub alpha: Dyadic,
    pub beta: Dyadic,
    pub delta_prime: Vec<Dyadic>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseSystem {
    pub levels: Vec<MetricGraph>,
    pub steps: Vec<Step>,
    pub constants: Constants,
}

impl InverseSystem {
    /// Number of graph levels (`steps + 1`).
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn source(&self) -> VertexId {
        self.levels[0].edge(0).src
    }

    pub fn sink(&self) -> VertexId {
        self.levels[0].edge(0).dst
    }

    pub fn graph(&self, i: usize) -> &MetricGraph {
        &self.levels[i]
    }

    /// Restores skipped fields after deserialization.
    pub fn rehydrate(&mut self) {
        for g in &mut self.levels {
            g.rebuild_incidence();
        }
    }

    /// Projects a point from level `j` down to level `i <= j`.
    pub fn project_point(&self, j: usize, i: usize, p: &GraphPoint) -> GraphPoint {
        assert!(i <= j && j < self.levels.len());
        let mut p = p.clone();
        for l in (i..j).rev() {
            p = self.project_step(l, &p);
        }
        p
    }

    /// One projection step from level `l+1` to level `l`.
    pub fn project_step(&self, l: usize, p: &GraphPoint) -> GraphPoint {
        let step = &self.steps[l];
        match p {
            GraphPoint::Vertex(v) => {
                if *v < self.levels[l].n_vertices() {
                    GraphPoint::Vertex(*v)
                } else {
                    let (_, e, off) = step
                        .cut_positions
                        .iter()
                        .find(|(w, _, _)| w == v)
                        .expect("cut vertex has a recorded position");
                    GraphPoint::Interior { edge: *e, offset: off.clone() }
                }
            }
            GraphPoint::Interior { edge, offset } => {
                let sub = step.subedge(*edge);
                let parent = step.children[*edge].parent_edge;
                GraphPoint::on_edge(&self.levels[l], parent, &sub.lo + offset)
                    .expect("projected offset lies on the parent edge")
            }
        }
    }

    /// The opposite point of `p` at level `i+1` with respect to step `i`
    /// (identity on vertices and on interval subedges).
    pub fn opposite_point(&self, i: usize, p: &GraphPoint) -> GraphPoint {
        match p {
            GraphPoint::Vertex(_) => p.clone(),
            GraphPoint::Interior { edge, offset } => {
                let step = &self.steps[i];
                let sub = step.subedge(*edge);
                if !sub.is_circle() {
                    return p.clone();
                }
                let partner = if *edge == sub.primary { sub.opposite } else { sub.primary };
                GraphPoint::Interior { edge: partner, offset: offset.clone() }
            }
        }
    }

    /// The full preimage of a level-`i` point one level up: one point for
    /// vertices and interval positions, two for circle positions.
    pub fn lift_point(&self, i: usize, p: &GraphPoint) -> Vec<GraphPoint> {
        let step = &self.steps[i];
        match p {
            GraphPoint::Vertex(v) => vec![GraphPoint::Vertex(*v)],
            GraphPoint::Interior { edge, offset } => {
                let subs = &step.subdivisions[*edge].subedges;
                for (k, sub) in subs.iter().enumerate() {
                    if offset < &sub.hi || (k == subs.len() - 1 && offset <= &sub.hi) {
                        if offset == &sub.lo {
                            // Boundary: the cut vertex (or parent endpoint).
                            let v = self.levels[i + 1].edge(sub.primary).src;
                            return vec![GraphPoint::Vertex(v)];
                        }
                        let off = offset - &sub.lo;
                        let mut out =
                            vec![GraphPoint::Interior { edge: sub.primary, offset: off.clone() }];
                        if sub.is_circle() {
                            out.push(GraphPoint::Interior { edge: sub.opposite, offset: off });
                        }
                        return out;
                    }
                }
                unreachable!("offset lies on the parent edge")
            }
        }
    }

    /// Preimage of a segment set under one projection step.
    pub fn lift_segments(&self, i: usize, segs: &SegmentSet) -> SegmentSet {
        let step = &self.steps[i];
        let mut out = Vec::new();
        for (e, a, b) in segs.segments() {
            for sub in &step.subdivisions[*e].subedges {
                let lo = Dyadic::max(a, &sub.lo);
                let hi = Dyadic::min(b, &sub.hi);
                if lo < hi {
                    let (s, t) = (&lo - &sub.lo, &hi - &sub.lo);
                    out.push((sub.primary, s.clone(), t.clone()));
                    if sub.is_circle() {
                        out.push((sub.opposite, s, t));
                    }
                }
            }
        }
        SegmentSet::new(out)
    }

    /// Preimage of a level-`i` segment set at level `j >= i`.
    pub fn lift_segments_to(&self, i: usize, j: usize, segs: &SegmentSet) -> SegmentSet {
        let mut s = segs.clone();
        for l in i..j {
            s = self.lift_segments(l, &s);
        }
        s
    }

    /// Position of a point in base coordinates: the offset of its image in
    /// `X_0 = [0, 1]`.
    pub fn base_position(&self, level: usize, p: &GraphPoint) -> Dyadic {
        match self.project_point(level, 0, p) {
            GraphPoint::Interior { offset, .. } => offset,
            GraphPoint::Vertex(v) => {
                if v == self.source() {
                    Dyadic::zero()
                } else {
                    self.levels[0].edge(0).length.clone()
                }
            }
        }
    }

    /// The natural scale of `p` at level `i`: the length of the edge
    /// containing its level-`i` image.  At a vertex, the minimum over the
    /// incident edges (the conservative choice for ball containment).
    pub fn edge_scale(&self, i: usize, p_i: &GraphPoint) -> Dyadic {
        let g = &self.levels[i];
        match p_i {
            GraphPoint::Interior { edge, .. } => g.edge(*edge).length.clone(),
            GraphPoint::Vertex(v) => g
                .incident(*v)
                .iter()
                .map(|&e| g.edge(e).length.clone())
                .min()
                .expect("vertex of a connected graph has incident edges"),
        }
    }
}

// ---------------------------------------------------------------------------
// Pushforward

#[derive(Debug, Clone, Serialize)]
pub struct PushforwardReport {
    pub step: usize,
    pub subedges_checked: usize,
    /// Subedges where `mu_{i+1}(preimage) != mu_i(subedge)`, with both values.
    pub discrepancies: Vec<(EdgeId, usize, Dyadic, Dyadic)>,
}

impl PushforwardReport {
    pub fn exact(&self) -> bool {
        self.discrepancies.is_empty()
    }
}

/// Verifies `(pi_i^{i+1})_# mu_{i+1} = mu_i` exactly, subedge by subedge.
pub fn pushforward_check(sys: &InverseSystem, i: usize) -> PushforwardReport {
    let step = &sys.steps[i];
    let coarse = &sys.levels[i];
    let fine = &sys.levels[i + 1];
    let mut checked = 0;
    let mut discrepancies = Vec::new();
    for (e, subdiv) in step.subdivisions.iter().enumerate() {
        let w = &coarse.edge(e).weight;
        for (k, sub) in subdiv.subedges.iter().enumerate() {
            let len = sub.length();
            let coarse_mass = w * &len;
            let mut fine_mass = &fine.edge(sub.primary).weight * &len;
            if sub.is_circle() {
                fine_mass += &(&fine.edge(sub.opposite).weight * &len);
            }
            checked += 1;
            if fine_mass != coarse_mass {
                discrepancies.push((e, k, coarse_mass, fine_mass));
            }
        }
    }
    PushforwardReport { step: i, subedges_checked: checked, discrepancies }
}

// ---------------------------------------------------------------------------
// Subdivision constants

#[derive(Debug, Clone, Serialize)]
pub struct DeltaReport {
    pub step: usize,
    /// Minimum edge length of the level being subdivided.
    pub min_edge_length: Dyadic,
    /// Maximum subedge length over minimum edge length.
    pub delta_e: BigRational,
    /// Minimum distance from a nonterminal subedge to the complement of its
    /// parent edge (`None` when the graph is a single edge).
    pub dist_gap: Option<Dyadic>,
    /// Maximum nonterminal subedge length over `dist_gap` (zero when the
    /// gap is infinite).
    pub delta_d: BigRational,
}

impl DeltaReport {
    /// Per-step Lipschitz bound `1 / (1 - 2 delta_d)` when `delta_d < 1/2`.
    pub fn lip_step(&self) -> Option<BigRational> {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        if self.delta_d < half {
            Some(BigRational::one() / (BigRational::one() - self.delta_d.clone() * BigInt::from(2)))
        } else {
            None
        }
    }
}

/// Distance from the subedge `[lo, hi]` of `e` to the complement of `e`:
/// the infimum is reached through an endpoint of `e` that carries another
/// edge.  `None` when neither endpoint does (single-edge graph).
fn subedge_complement_gap(
    g: &MetricGraph,
    e: EdgeId,
    sub: &SubEdge,
) -> Option<Dyadic> {
    let edge = g.edge(e);
    let mut best: Option<Dyadic> = None;
    let exits = [(edge.src, sub.lo.clone()), (edge.dst, &edge.length - &sub.hi)];
    for (v, along) in exits {
        if g.incident(v).iter().any(|&other| other != e) {
            if best.as_ref().map_or(true, |b| &along < b) {
                best = Some(along);
            }
        }
    }
    best
}

pub fn compute_deltas(sys: &InverseSystem, i: usize) -> Result<DeltaReport, SystemError> {
    if i >= sys.steps.len() {
        return Err(SystemError::BadLevel(i));
    }
    let g = &sys.levels[i];
    let step = &sys.steps[i];
    let min_len = g.min_edge_length().ok_or(SystemError::BadLevel(i))?;
    let mut max_sub = Dyadic::zero();
    let mut gap: Option<Dyadic> = None;
    let mut max_nonterm = Dyadic::zero();
    for (e, subdiv) in step.subdivisions.iter().enumerate() {
        for sub in &subdiv.subedges {
            let len = sub.length();
            max_sub = Dyadic::max(&max_sub, &len);
            if !sub.terminal {
                max_nonterm = Dyadic::max(&max_nonterm, &len);
                if let Some(d) = subedge_complement_gap(g, e, sub) {
                    if gap.as_ref().map_or(true, |b| &d < b) {
                        gap = Some(d);
                    }
                }
            }
        }
    }
    let delta_e = max_sub.to_rational() / min_len.to_rational();
    let delta_d = match &gap {
        Some(d) if d.is_positive() => max_nonterm.to_rational() / d.to_rational(),
        Some(_) => {
            // Zero gap: a nonterminal subedge touches the complement.
            return Err(SystemError::Structure {
                step: i,
                detail: "nonterminal subedge touches the edge boundary".into(),
            });
        }
        None => BigRational::zero(),
    };
    Ok(DeltaReport { step: i, min_edge_length: min_len, delta_e, dist_gap: gap, delta_d })
}

// ---------------------------------------------------------------------------
// Axiom checking

#[derive(Debug, Clone, Serialize)]
pub struct AxiomCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
    /// Minimum over circles of `height / length`, per step.
    pub achieved_alpha: Vec<Option<BigRational>>,
    /// Minimum over directed 0-1 paths of total circle subedge length, per step.
    pub achieved_beta: Vec<Option<Dyadic>>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn push_check(checks: &mut Vec<AxiomCheck>, name: &str, passed: bool, detail: String) {
    checks.push(AxiomCheck { name: name.to_string(), passed, detail });
}

/// Structural validation of one step: partition contiguity, terminal flags,
/// primary chains, opposite pairing, and full coverage of the child edges.
fn check_step_structure(sys: &InverseSystem, i: usize) -> Result<(), String> {
    let step = &sys.steps[i];
    let coarse = &sys.levels[i];
    let fine = &sys.levels[i + 1];
    if step.subdivisions.len() != coarse.edges().len() {
        return Err(format!("step {i}: subdivision count != parent edge count"));
    }
    if step.children.len() != fine.edges().len() {
        return Err(format!("step {i}: child record count != child edge count"));
    }
    let mut used = vec![false; fine.edges().len()];
    for (e, subdiv) in step.subdivisions.iter().enumerate() {
        let parent = coarse.edge(e);
        if subdiv.subedges.is_empty() {
            return Err(format!("step {i}: edge {e} has no subedges"));
        }
        let mut cursor = Dyadic::zero();
        let mut at = parent.src;
        let n = subdiv.subedges.len();
        for (k, sub) in subdiv.subedges.iter().enumerate() {
            if sub.lo != cursor {
                return Err(format!("step {i}: edge {e} subedge {k} not contiguous"));
            }
            if sub.hi <= sub.lo {
                return Err(format!("step {i}: edge {e} subedge {k} empty"));
            }
            cursor = sub.hi.clone();
            if (k == 0 || k == n - 1) && !sub.terminal {
                return Err(format!("step {i}: edge {e} boundary subedge {k} not terminal"));
            }
            if sub.terminal && sub.is_circle() {
                return Err(format!("step {i}: edge {e} terminal subedge {k} is a circle"));
            }
            let prim = fine.edge(sub.primary);
            if prim.src != at {
                return Err(format!("step {i}: edge {e} primary chain broken at subedge {k}"));
            }
            if prim.length != sub.length() {
                return Err(format!("step {i}: edge {e} subedge {k} primary length mismatch"));
            }
            let rec = &step.children[sub.primary];
            if rec.parent_edge != e || rec.sub_index != k || rec.is_opposite {
                return Err(format!("step {i}: edge {e} subedge {k} primary child record wrong"));
            }
            if used[sub.primary] {
                return Err(format!("step {i}: child edge {} used twice", sub.primary));
            }
            used[sub.primary] = true;
            if sub.is_circle() {
                let opp = fine.edge(sub.opposite);
                if opp.src != prim.src || opp.dst != prim.dst {
                    return Err(format!(
                        "step {i}: edge {e} subedge {k} opposite endpoints differ"
                    ));
                }
                if opp.length != prim.length {
                    return Err(format!("step {i}: edge {e} subedge {k} opposite length differs"));
                }
                let orec = &step.children[sub.opposite];
                if orec.parent_edge != e || orec.sub_index != k || !orec.is_opposite {
                    return Err(format!(
                        "step {i}: edge {e} subedge {k} opposite child record wrong"
                    ));
                }
                if used[sub.opposite] {
                    return Err(format!("step {i}: child edge {} used twice", sub.opposite));
                }
                used[sub.opposite] = true;
            }
            at = prim.dst;
        }
        if cursor != parent.length {
            return Err(format!("step {i}: edge {e} subedges do not cover the edge"));
        }
        if at != parent.dst {
            return Err(format!("step {i}: edge {e} primary chain misses the sink"));
        }
    }
    if let Some(free) = used.iter().position(|u| !u) {
        return Err(format!("step {i}: child edge {free} not produced by any subedge"));
    }
    if fine.n_vertices() < coarse.n_vertices() {
        return Err(format!("step {i}: vertex ids not nested"));
    }
    Ok(())
}

/// Exact circle height: the maximum over the circle of the distance to the
/// opposite point.  The distance function along a circle is a concave
/// piecewise-affine envelope whose maximum sits at the common midpoint, so a
/// single exact evaluation suffices.
pub fn circle_height(
    fine: &MetricGraph,
    cache: &mut DistCache,
    primary: EdgeId,
    opposite: EdgeId,
) -> Dyadic {
    let len = &fine.edge(primary).length;
    let mid = len.halve(1);
    let p = GraphPoint::Interior { edge: primary, offset: mid.clone() };
    let q = GraphPoint::Interior { edge: opposite, offset: mid };
    cache
        .point_distance(fine, &p, &q)
        .expect("circle members are connected")
}

/// Vertices of level `i` in topological (base-position) order, together with
/// the positions.  Directed edges always advance the base position.
fn topo_vertices(sys: &InverseSystem, i: usize) -> Vec<(VertexId, Dyadic)> {
    let g = &sys.levels[i];
    let mut order: Vec<(VertexId, Dyadic)> = (0..g.n_vertices())
        .map(|v| (v, sys.base_position(i, &GraphPoint::Vertex(v))))
        .collect();
    order.sort_by(|a, b| (&a.1, a.0).cmp(&(&b.1, b.0)));
    order
}

/// Minimum over directed source-sink paths at level `i` of the total length
/// of circle subedges (with respect to step `i`).  `None` if `i` has no step.
pub fn min_path_circle_length(sys: &InverseSystem, i: usize) -> Option<Dyadic> {
    if i >= sys.steps.len() {
        return None;
    }
    let g = &sys.levels[i];
    let step = &sys.steps[i];
    let cost: Vec<Dyadic> = (0..g.edges().len())
        .map(|e| {
            let mut total = Dyadic::zero();
            for sub in &step.subdivisions[e].subedges {
                if sub.is_circle() {
                    total += &sub.length();
                }
            }
            total
        })
        .collect();
    let order = topo_vertices(sys, i);
    let mut best: Vec<Option<Dyadic>> = vec![None; g.n_vertices()];
    best[sys.source()] = Some(Dyadic::zero());
    for (v, _) in &order {
        let Some(b) = best[*v].clone() else { continue };
        for &eid in g.incident(*v) {
            let e = g.edge(eid);
            if e.src == *v {
                let cand = &b + &cost[eid];
                if best[e.dst].as_ref().map_or(true, |old| &cand < old) {
                    best[e.dst] = Some(cand);
                }
            }
        }
    }
    best[sys.sink()].clone()
}

/// Exhaustive enumeration of directed source-sink edge paths (for level
/// graphs small enough to enumerate; used as an independent oracle for the
/// dynamic program above).
pub fn enumerate_directed_paths(sys: &InverseSystem, i: usize, limit: usize) -> Option<Vec<Vec<EdgeId>>> {
    let g = &sys.levels[i];
    let mut out = Vec::new();
    let mut stack: Vec<EdgeId> = Vec::new();
    fn rec(
        g: &MetricGraph,
        v: VertexId,
        sink: VertexId,
        stack: &mut Vec<EdgeId>,
        out: &mut Vec<Vec<EdgeId>>,
        limit: usize,
    ) -> bool {
        if v == sink {
            out.push(stack.clone());
            return out.len() <= limit;
        }
        for &eid in g.incident(v) {
            if g.edge(eid).src == v {
                stack.push(eid);
                let ok = rec(g, g.edge(eid).dst, sink, stack, out, limit);
                stack.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    if rec(g, sys.source(), sys.sink(), &mut stack, &mut out, limit) {
        Some(out)
    } else {
        None
    }
}

/// Full axiom suite.  `path_samples` bounds the number of random longer
/// directed paths checked for geodesy per level (adjacent pairs are always
/// checked exhaustively).
pub fn check_axioms(sys: &InverseSystem, seed: u64) -> AxiomReport {
    let mut checks = Vec::new();
    let mut achieved_alpha = Vec::new();
    let mut achieved_beta = Vec::new();

    // Base level: the unit interval.
    let base = &sys.levels[0];
    let a1 = base.edges().len() == 1
        && base.n_vertices() == 2
        && base.edge(0).length == Dyadic::one()
        && base.edge(0).weight == Dyadic::one()
        && base.edge(0).src != base.edge(0).dst;
    push_check(&mut checks, "base-interval", a1, "X_0 is the unit interval with Lebesgue measure".into());

    // Structure of every step (partition, circles, collapse isometry).
    let mut structure_ok = true;
    let mut structure_detail = String::from("subdivision structure valid at every step");
    for i in 0..sys.steps.len() {
        if let Err(e) = check_step_structure(sys, i) {
            structure_ok = false;
            structure_detail = e;
            break;
        }
    }
    push_check(&mut checks, "preimage-structure", structure_ok, structure_detail);

    // Geodesy of directed paths, per level.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut geodesic_ok = true;
    let mut geodesic_detail = String::from("directed edge paths realize the distance");
    'levels: for i in 0..sys.levels.len() {
        let g = &sys.levels[i];
        let mut cache = DistCache::new();
        for (eid, e) in g.edges().iter().enumerate() {
            let d = cache.vertex_distance(g, e.src, e.dst);
            if d.as_ref() != Some(&e.length) {
                geodesic_ok = false;
                geodesic_detail = format!("level {i}: edge {eid} is not geodesic");
                break 'levels;
            }
        }
        // All adjacent directed pairs.
        for (e1, a) in g.edges().iter().enumerate() {
            for &e2 in g.incident(a.dst) {
                let b = g.edge(e2);
                if b.src == a.dst {
                    let want = &a.length + &b.length;
                    let d = cache.vertex_distance(g, a.src, b.dst);
                    if d.as_ref() != Some(&want) {
                        geodesic_ok = false;
                        geodesic_detail =
                            format!("level {i}: directed pair ({e1}, {e2}) is not geodesic");
                        break 'levels;
                    }
                }
            }
        }
        // A few random longer directed walks.
        for _ in 0..16 {
            let mut v = sys.source();
            let mut total = Dyadic::zero();
            let start = v;
            for _ in 0..8 {
                let outgoing: Vec<EdgeId> = g
                    .incident(v)
                    .iter()
                    .copied()
                    .filter(|&e| g.edge(e).src == v)
                    .collect();
                if outgoing.is_empty() {
                    break;
                }
                let eid = outgoing[rng.gen_range(0..outgoing.len())];
                total += &g.edge(eid).length;
                v = g.edge(eid).dst;
            }
            if v != start {
                let d = cache.vertex_distance(g, start, v);
                if d.as_ref() != Some(&total) {
                    geodesic_ok = false;
                    geodesic_detail = format!("level {i}: random directed walk is not geodesic");
                    break 'levels;
                }
            }
        }
    }
    push_check(&mut checks, "directed-geodesics", geodesic_ok, geodesic_detail);

    // Circle heights against the declared alpha, and per-path circle length
    // against the declared beta.
    let mut alpha_ok = true;
    let mut beta_ok = true;
    let mut alpha_detail = String::from("every circle height >= alpha * length");
    let mut beta_detail = String::from("every directed 0-1 path carries circle length >= beta");
    for i in 0..sys.steps.len() {
        let fine = &sys.levels[i + 1];
        let mut cache = DistCache::new();
        let mut worst: Option<BigRational> = None;
        let mut any_circle = false;
        for subdiv in &sys.steps[i].subdivisions {
            for sub in &subdiv.subedges {
                if sub.is_circle() {
                    any_circle = true;
                    let ht = circle_height(fine, &mut cache, sub.primary, sub.opposite);
                    let ratio = ht.to_rational() / sub.length().to_rational();
                    if worst.as_ref().map_or(true, |w| ratio < *w) {
                        worst = Some(ratio);
                    }
                }
            }
        }
        if any_circle {
            let w = worst.clone().unwrap();
            if w < sys.constants.alpha.to_rational() {
                alpha_ok = false;
                alpha_detail = format!("step {i}: worst circle height ratio {} < alpha", w);
            }
        }
        achieved_alpha.push(worst);

        let beta = min_path_circle_length(sys, i);
        if let Some(b) = &beta {
            if b < &sys.constants.beta {
                beta_ok = false;
                beta_detail = format!("step {i}: min path circle length {} < beta", b);
            }
        }
        achieved_beta.push(beta);
    }
    push_check(&mut checks, "circle-height", alpha_ok, alpha_detail);
    push_check(&mut checks, "path-circle-mass", beta_ok, beta_detail);

    // Exact measure pushforward at every step.
    let mut push_ok = true;
    let mut push_detail = String::from("measure pushforward exact at every step");
    for i in 0..sys.steps.len() {
        let rep = pushforward_check(sys, i);
        if !rep.exact() {
            push_ok = false;
            push_detail = format!("step {i}: {} subedges with mass mismatch", rep.discrepancies.len());
            break;
        }
    }
    push_check(&mut checks, "measure-pushforward", push_ok, push_detail);

    AxiomReport { checks, achieved_alpha, achieved_beta }
}

// ---------------------------------------------------------------------------
// Lipschitz bounds of projections

#[derive(Debug, Clone, Serialize)]
pub struct LipReport {
    pub from_level: usize,
    pub to_level: usize,
    pub pairs: usize,
    /// Maximum of `d_i(pi x, pi y) / d_j(x, y)` over the sample.
    pub max_ratio: Option<BigRational>,
    /// Minimum of the same ratio over pairs that never sit on the two open
    /// members of one circle at any intermediate step.
    pub min_ratio_admissible: Option<BigRational>,
    pub admissible_pairs: usize,
    /// Product upper bound `prod 1/(1 - 2 delta_d)` when finite.
    pub upper_bound: Option<BigRational>,
    /// Product lower bound `1 / prod (1 + 2 delta_d)`.
    pub lower_bound: Option<BigRational>,
}

/// Random point at level `lev`: a vertex or a dyadic interior position.
pub fn random_point(sys: &InverseSystem, lev: usize, rng: &mut ChaCha8Rng, grid: u32) -> GraphPoint {
    let g = &sys.levels[lev];
    let e = rng.gen_range(0..g.edges().len());
    let len = &g.edge(e).length;
    // Uniform on a 2^-grid lattice relative to the edge length.
    let ticks = 1u64 << grid.min(20);
    let k = rng.gen_range(0..=ticks);
    let off = &Dyadic::ratio(k as i64, grid.min(20)) * len;
    GraphPoint::on_edge(g, e, off).expect("offset within edge")
}

/// Is the pair `(x, y)` at level `l+1` an open-circle pair for step `l`?
fn opposite_pair(sys: &InverseSystem, l: usize, x: &GraphPoint, y: &GraphPoint) -> bool {
    if let (GraphPoint::Interior { edge: ex, .. }, GraphPoint::Interior { edge: ey, .. }) = (x, y) {
        if ex != ey {
            let sub = sys.steps[l].subedge(*ex);
            return sub.is_circle() && (sub.primary == *ey || sub.opposite == *ey);
        }
    }
    false
}

/// Samples point pairs at level `j` and reports the distortion of the
/// composite projection to level `i`, against the product bounds derived
/// from the achieved subdivision constants.
pub fn lip_bound_check(
    sys: &InverseSystem,
    i: usize,
    j: usize,
    samples: usize,
    seed: u64,
) -> Result<LipReport, SystemError> {
    if !(i < j && j < sys.levels.len()) {
        return Err(SystemError::BadLevel(j));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gj = &sys.levels[j];
    let mut cache_j = DistCache::new();
    let mut caches_i: HashMap<usize, DistCache> = HashMap::new();

    let mut upper = Some(BigRational::one());
    let mut lower = BigRational::one();
    for l in i..j {
        let rep = compute_deltas(sys, l)?;
        match (upper, rep.lip_step()) {
            (Some(u), Some(s)) => upper = Some(u * s),
            _ => upper = None,
        }
        lower *= BigRational::one() + rep.delta_d.clone() * BigInt::from(2);
    }
    let lower = Some(BigRational::one() / lower);

    let mut max_ratio: Option<BigRational> = None;
    let mut min_adm: Option<BigRational> = None;
    let mut pairs = 0;
    let mut admissible = 0;
    while pairs < samples {
        let x = random_point(sys, j, &mut rng, 12);
        let y = random_point(sys, j, &mut rng, 12);
        if x == y {
            continue;
        }
        let dj = cache_j.point_distance(gj, &x, &y).ok_or(SystemError::BadPoint)?;
        if dj.is_zero() {
            continue;
        }
        pairs += 1;
        // Project step by step, tracking admissibility.
        let mut adm = true;
        let (mut xi, mut yi) = (x, y);
        for l in (i..j).rev() {
            if opposite_pair(sys, l, &xi, &yi) {
                adm = false;
            }
            xi = sys.project_step(l, &xi);
            yi = sys.project_step(l, &yi);
        }
        let gi = &sys.levels[i];
        let ci = caches_i.entry(i).or_default();
        let di = ci.point_distance(gi, &xi, &yi).ok_or(SystemError::BadPoint)?;
        let ratio = di.to_rational() / dj.to_rational();
        if max_ratio.as_ref().map_or(true, |m| ratio > *m) {
            max_ratio = Some(ratio.clone());
        }
        if adm {
            admissible += 1;
            if min_adm.as_ref().map_or(true, |m| ratio < *m) {
                min_adm = Some(ratio);
            }
        }
    }
    Ok(LipReport {
        from_level: j,
        to_level: i,
        pairs,
        max_ratio,
        min_ratio_admissible: min_adm,
        admissible_pairs: admissible,
        upper_bound: upper,
        lower_bound: lower,
    })
}

// ---------------------------------------------------------------------------
// Fibers

#[derive(Debug, Clone, Serialize)]
pub struct FiberDiameterRow {
    pub base_level: usize,
    pub fine_level: usize,
    pub fiber_size: usize,
    pub scale: Dyadic,
    pub diameter: Dyadic,
    /// `diameter / scale`, to compare against `2 delta'_i`.
    pub ratio: BigRational,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberDiameterReport {
    pub rows: Vec<FiberDiameterRow>,
    pub bound: BigRational,
    pub passed: bool,
}

/// Enumerates the full fiber of a level-`i` point at level `j`.
pub fn fiber_points(sys: &InverseSystem, i: usize, j: usize, p: &GraphPoint) -> Vec<GraphPoint> {
    let mut fiber = vec![p.clone()];
    for l in i..j {
        let mut next = Vec::new();
        for q in &fiber {
            next.extend(sys.lift_point(l, q));
        }
        fiber = next;
    }
    fiber
}

/// Checks `diam (pi_i^j)^{-1}(x) <= 2 delta'_i |e_i(x)|` over sampled base
/// points (all vertices, all edge midpoints, plus random interior points).
pub fn fiber_diameter_check(
    sys: &InverseSystem,
    i: usize,
    j: usize,
    extra_samples: usize,
    seed: u64,
) -> Result<FiberDiameterReport, SystemError> {
    if !(i < j && j < sys.levels.len()) {
        return Err(SystemError::BadLevel(j));
    }
    let gi = &sys.levels[i];
    let gj = &sys.levels[j];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases: Vec<GraphPoint> = (0..gi.n_vertices()).map(GraphPoint::Vertex).collect();
    for e in 0..gi.edges().len() {
        let mid = gi.edge(e).length.halve(1);
        bases.push(GraphPoint::on_edge(gi, e, mid)?);
    }
    for _ in 0..extra_samples {
        bases.push(random_point(sys, i, &mut rng, 12));
    }
    let bound = sys.constants.delta_prime.get(i).cloned().unwrap_or_else(Dyadic::one);
    let bound = bound.to_rational() * BigInt::from(2);
    let mut cache = DistCache::new();
    let mut rows = Vec::new();
    let mut passed = true;
    for b in bases {
        let fiber = fiber_points(sys, i, j, &b);
        let mut diam = Dyadic::zero();
        for a in 0..fiber.len() {
            for c in a + 1..fiber.len() {
                let d = cache
                    .point_distance(gj, &fiber[a], &fiber[c])
                    .ok_or(SystemError::BadPoint)?;
                diam = Dyadic::max(&diam, &d);
            }
        }
        let scale = sys.edge_scale(i, &b);
        let ratio = diam.to_rational() / scale.to_rational();
        if ratio > bound {
            passed = false;
        }
        rows.push(FiberDiameterRow {
            base_level: i,
            fine_level: j,
            fiber_size: fiber.len(),
            scale,
            diameter: diam,
            ratio,
        });
    }
    Ok(FiberDiameterReport { rows, bound, passed })
}

/// Pointwise fiber measure: the mass a level-`i` unit point mass spreads
/// over its level-`j` fiber (halving across every circle, exact).
pub fn fiber_measure(
    sys: &InverseSystem,
    i: usize,
    j: usize,
    p: &GraphPoint,
) -> Vec<(GraphPoint, Dyadic)> {
    let mut atoms = vec![(p.clone(), Dyadic::one())];
    for l in i..j {
        let mut next = Vec::new();
        for (q, mass) in &atoms {
            let lifts = sys.lift_point(l, q);
            if lifts.len() == 1 {
                next.push((lifts[0].clone(), mass.clone()));
            } else {
                let half = mass.halve(1);
                for lift in lifts {
                    next.push((lift, half.clone()));
                }
            }
        }
        atoms = next;
    }
    atoms
}

// ---------------------------------------------------------------------------
// Deep points

#[derive(Debug, Clone, Serialize)]
pub struct DeepPointRow {
    pub step: usize,
    /// Exact measure of the union of terminal subedges at this step.
    pub terminal_measure: Dyadic,
    /// The summable bound `2 delta_e` for this step.
    pub bound: BigRational,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeepPointReport {
    pub rows: Vec<DeepPointRow>,
    /// Tail sums of the terminal measures (Borel-Cantelli numerator).
    pub tail_sums: Vec<Dyadic>,
}

pub fn deep_point_report(sys: &InverseSystem) -> Result<DeepPointReport, SystemError> {
    let mut rows = Vec::new();
    for i in 0..sys.steps.len() {
        let g = &sys.levels[i];
        let mut mass = Dyadic::zero();
        for (e, subdiv) in sys.steps[i].subdivisions.iter().enumerate() {
            for sub in &subdiv.subedges {
                if sub.terminal {
                    mass += &(&g.edge(e).weight * &sub.length());
                }
            }
        }
        let deltas = compute_deltas(sys, i)?;
        rows.push(DeepPointRow {
            step: i,
            terminal_measure: mass,
            bound: deltas.delta_e * BigInt::from(2),
        });
    }
    let mut tail_sums = vec![Dyadic::zero(); rows.len() + 1];
    for k in (0..rows.len()).rev() {
        tail_sums[k] = &tail_sums[k + 1] + &rows[k].terminal_measure;
    }
    Ok(DeepPointReport { rows, tail_sums })
}

/// Is the level-`j` point deep through steps `[i, j)`: all its projections
/// avoid terminal subedges?
pub fn is_deep_through(sys: &InverseSystem, i: usize, j: usize, p: &GraphPoint) -> bool {
    let mut q = p.clone();
    for l in (i..j).rev() {
        match &q {
            GraphPoint::Vertex(_) => {}
            GraphPoint::Interior { edge, .. } => {
                if sys.steps[l].subedge(*edge).terminal {
                    return false;
                }
            }
        }
        q = sys.project_step(l, &q);
    }
    true
}

// ---------------------------------------------------------------------------
// Circle-set measure

#[derive(Debug, Clone, Serialize)]
pub struct CircleMeasureReport {
    pub step: usize,
    /// Exact measure (in `mu_i`) of the union of circle subedges.
    pub total: Dyadic,
    /// Minimum over directed 0-1 paths of the circle length they carry.
    pub per_path_min: Option<Dyadic>,
}

pub fn circle_set_measure(sys: &InverseSystem, i: usize) -> CircleMeasureReport {
    let g = &sys.levels[i];
    let mut total = Dyadic::zero();
    for (e, subdiv) in sys.steps[i].subdivisions.iter().enumerate() {
        for sub in &subdiv.subedges {
            if sub.is_circle() {
                total += &(&g.edge(e).weight * &sub.length());
            }
        }
    }
    CircleMeasureReport { step: i, total, per_path_min: min_path_circle_length(sys, i) }
}

// ---------------------------------------------------------------------------
// Alberti representation

#[derive(Debug, Clone, Serialize)]
pub struct PathAtom {
    /// Directed source-sink path as an ordered edge list at the level.
    pub edges: Vec<EdgeId>,
    pub prob: Dyadic,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathMeasure {
    pub level: usize,
    pub paths: Vec<PathAtom>,
}

impl PathMeasure {
    pub fn total_prob(&self) -> Dyadic {
        let mut t = Dyadic::zero();
        for p in &self.paths {
            t += &p.prob;
        }
        t
    }
}

/// The inductive path decomposition of `mu_i`: start with the base interval
/// as the single path; at every step a path either refines in place (no
/// circles along it) or splits into its primary and opposite refinements
/// with halved probability.
pub fn alberti_representation(sys: &InverseSystem, i: usize) -> PathMeasure {
    let mut paths = vec![PathAtom { edges: vec![0], prob: Dyadic::one() }];
    for l in 0..i {
        let step = &sys.steps[l];
        let mut next = Vec::new();
        for atom in &paths {
            let mut primary = Vec::new();
            let mut opposite = Vec::new();
            let mut has_circle = false;
            for &e in &atom.edges {
                for sub in &step.subdivisions[e].subedges {
                    primary.push(sub.primary);
                    opposite.push(sub.opposite);
                    if sub.is_circle() {
                        has_circle = true;
                    }
                }
            }
            if has_circle {
                let half = atom.prob.halve(1);
                next.push(PathAtom { edges: primary, prob: half.clone() });
                next.push(PathAtom { edges: opposite, prob: half });
            } else {
                next.push(PathAtom { edges: primary, prob: atom.prob.clone() });
            }
        }
        paths = next;
    }
    PathMeasure { level: i, paths }
}

/// Reconstructs `mu_i(A)` from the path measure: the probability-weighted
/// total of the lengths `|A ∩ P|`.  Exact.
pub fn alberti_reconstruct(sys: &InverseSystem, pm: &PathMeasure, a: &SegmentSet) -> Dyadic {
    let g = &sys.levels[pm.level];
    let mut total = Dyadic::zero();
    for atom in &pm.paths {
        let path_set = SegmentSet::new(
            atom.edges.iter().map(|&e| (e, Dyadic::zero(), g.edge(e).length.clone())).collect(),
        );
        total += &(&atom.prob * &a.intersect(&path_set).total_length());
    }
    total
}

// ---------------------------------------------------------------------------
// Rescaled balls

#[derive(Debug, Clone, Serialize)]
pub struct RescaledBall {
    pub level: usize,
    pub center: GraphPoint,
    pub scale: Dyadic,
    pub radius: Dyadic,
    /// Sampled points of the ball with exact and normalized distances.
    pub points: Vec<(GraphPoint, Dyadic, BigRational)>,
    /// Whether the ball stays inside the preimage of the coarser edge
    /// containing the center (`None` at the base level or at a vertex).
    pub contained_in_cell: Option<bool>,
    /// Normalized height of the circle through the center, when the center
    /// sits on a circle subedge of the next step.
    pub circle_height: Option<BigRational>,
}

/// Snapshot of the ball `B(x_i, R * |e_i(x_i)|)` at level `i`, rescaled by
/// the natural scale; `x` is given at level `lev >= i`.
pub fn rescaled_ball(
    sys: &InverseSystem,
    lev: usize,
    x: &GraphPoint,
    i: usize,
    r_factor: &Dyadic,
    grid: u32,
) -> Result<RescaledBall, SystemError> {
    if !(i <= lev && lev < sys.levels.len()) {
        return Err(SystemError::BadLevel(lev));
    }
    let xi = sys.project_point(lev, i, x);
    let g = &sys.levels[i];
    let scale = sys.edge_scale(i, &xi);
    let radius = r_factor * &scale;
    let b = ball(g, &xi, &radius);

    let mut pts = Vec::new();
    for (e, a, bb) in b.segments() {
        let mut t = a.clone();
        let h = Dyadic::pow2_neg(grid);
        let step_len = &h * &g.edge(*e).length;
        loop {
            pts.push(GraphPoint::on_edge(g, *e, Dyadic::min(&t, bb))?);
            if &t >= bb {
                break;
            }
            t = &t + &step_len;
        }
    }
    pts.sort_by_key(|p| format!("{p:?}"));
    pts.dedup();
    let mut cache = DistCache::new();
    let mut points = Vec::new();
    for p in pts {
        let d = cache.point_distance(g, &xi, &p).ok_or(SystemError::BadPoint)?;
        if d <= radius {
            let norm = d.to_rational() / scale.to_rational();
            points.push((p, d, norm));
        }
    }

    let contained_in_cell = if i == 0 {
        None
    } else {
        match sys.project_point(i, i - 1, &xi) {
            GraphPoint::Interior { edge, .. } => {
                let cell = sys.lift_segments(
                    i - 1,
                    &SegmentSet::whole_edge(&sys.levels[i - 1], edge),
                );
                Some(cell.contains_set(&b))
            }
            GraphPoint::Vertex(_) => None,
        }
    };

    let circle_height = if i < sys.steps.len() {
        match &xi {
            GraphPoint::Interior { edge, offset } => {
                // Locate the subedge of step i containing the position.
                let subs = &sys.steps[i].subdivisions[*edge].subedges;
                subs.iter()
                    .find(|s| &s.lo <= offset && offset < &s.hi)
                    .filter(|s| s.is_circle())
                    .map(|s| {
                        let mut cache = DistCache::new();
                        let ht = circle_height(&sys.levels[i + 1], &mut cache, s.primary, s.opposite);
                        ht.to_rational() / scale.to_rational()
                    })
            }
            GraphPoint::Vertex(_) => None,
        }
    } else {
        None
    };

    Ok(RescaledBall {
        level: i,
        center: xi,
        scale,
        radius,
        points,
        contained_in_cell,
        circle_height,
    })
}
