//! Directed metric measure graphs with exact arithmetic.
//!
//! Edges carry a positive dyadic `length` and a dyadic measure density
//! `weight`; the measure of a sub-interval of an edge is `weight * length`.
//! Points are either vertices or interior positions `(edge, offset)`; the
//! interior offset is always strictly between `0` and the edge length, so
//! every point has exactly one representation.
//!
//! Shortest paths run a label-setting search over the vertex set augmented
//! with the query points.  All comparisons are exact, and ties are broken by
//! vertex id so distances, witnesses, and balls are deterministic.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge {0} has non-positive length")]
    BadLength(EdgeId),
    #[error("edge {0} has negative weight")]
    BadWeight(EdgeId),
    #[error("edge {0} references vertex out of range")]
    BadEndpoint(EdgeId),
    #[error("graph is not connected")]
    Disconnected,
    #[error("offset {offset} outside edge {edge} of length {length}")]
    BadOffset { edge: EdgeId, offset: Dyadic, length: Dyadic },
    #[error("no path between the query points")]
    NoPath,
    #[error("ball of zero measure at the requested center/radius")]
    EmptyBall,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub src: VertexId,
    pub dst: VertexId,
    pub length: Dyadic,
    pub weight: Dyadic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricGraph {
    n_vertices: usize,
    edges: Vec<Edge>,
    #[serde(skip)]
    incident: Vec<Vec<EdgeId>>,
}

impl MetricGraph {
    pub fn new(n_vertices: usize, edges: Vec<Edge>) -> Result<Self, GraphError> {
        for (id, e) in edges.iter().enumerate() {
            if !e.length.is_positive() {
                return Err(GraphError::BadLength(id));
            }
            if e.weight.is_negative() {
                return Err(GraphError::BadWeight(id));
            }
            if e.src >= n_vertices || e.dst >= n_vertices {
                return Err(GraphError::BadEndpoint(id));
            }
        }
        let mut g = MetricGraph { n_vertices, edges, incident: Vec::new() };
        g.rebuild_incidence();
        Ok(g)
    }

    /// Recomputes the incidence lists (needed after deserialization).
    pub fn rebuild_incidence(&mut self) {
        let mut incident = vec![Vec::new(); self.n_vertices];
        for (id, e) in self.edges.iter().enumerate() {
            incident[e.src].push(id);
            if e.dst != e.src {
                incident[e.dst].push(id);
            }
        }
        self.incident = incident;
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        &self.incident[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incident[v].len()
    }

    /// Total measure: sum of `weight * length` over the edges.
    pub fn total_measure(&self) -> Dyadic {
        let mut total = Dyadic::zero();
        for e in &self.edges {
            total += &(&e.weight * &e.length);
        }
        total
    }

    pub fn min_edge_length(&self) -> Option<Dyadic> {
        self.edges.iter().map(|e| e.length.clone()).min()
    }

    pub fn is_connected(&self) -> bool {
        if self.n_vertices == 0 {
            return true;
        }
        let mut seen = vec![false; self.n_vertices];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &eid in &self.incident[v] {
                let e = &self.edges[eid];
                for w in [e.src, e.dst] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// A point of a metric graph in canonical form: interior offsets satisfy
/// `0 < offset < length`, so vertex points are always the `Vertex` variant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphPoint {
    Vertex(VertexId),
    Interior { edge: EdgeId, offset: Dyadic },
}

impl GraphPoint {
    /// Canonicalizing constructor for a position along an edge.
    pub fn on_edge(g: &MetricGraph, edge: EdgeId, offset: Dyadic) -> Result<Self, GraphError> {
        let e = g.edge(edge);
        if offset.is_negative() || offset > e.length {
            return Err(GraphError::BadOffset { edge, offset, length: e.length.clone() });
        }
        if offset.is_zero() {
            Ok(GraphPoint::Vertex(e.src))
        } else if offset == e.length {
            Ok(GraphPoint::Vertex(e.dst))
        } else {
            Ok(GraphPoint::Interior { edge, offset })
        }
    }

    /// Anchor vertices with the along-edge distance from the point to each.
    /// For a vertex the single anchor is the vertex itself at distance zero.
    fn anchors(&self, g: &MetricGraph) -> Vec<(VertexId, Dyadic)> {
        match self {
            GraphPoint::Vertex(v) => vec![(*v, Dyadic::zero())],
            GraphPoint::Interior { edge, offset } => {
                let e = g.edge(*edge);
                vec![(e.src, offset.clone()), (e.dst, &e.length - offset)]
            }
        }
    }

    /// The edge the point lies on, if interior.
    pub fn interior_edge(&self) -> Option<EdgeId> {
        match self {
            GraphPoint::Interior { edge, .. } => Some(*edge),
            GraphPoint::Vertex(_) => None,
        }
    }
}

/// Label-setting shortest-path search from a set of seeded vertex labels.
/// Returns exact distances; vertices beyond `cap` (when given) are left
/// unlabeled.  Ties between equal keys resolve by vertex id.
pub fn dijkstra_multi(
    g: &MetricGraph,
    seeds: &[(VertexId, Dyadic)],
    cap: Option<&Dyadic>,
) -> Vec<Option<Dyadic>> {
    let mut dist: Vec<Option<Dyadic>> = vec![None; g.n_vertices()];
    let mut pq: BinaryHeap<Reverse<(Dyadic, VertexId)>> = BinaryHeap::new();
    for (v, d) in seeds {
        if cap.map_or(true, |c| d <= c) {
            match &dist[*v] {
                Some(old) if old <= d => {}
                _ => {
                    dist[*v] = Some(d.clone());
                    pq.push(Reverse((d.clone(), *v)));
                }
            }
        }
    }
    while let Some(Reverse((d, v))) = pq.pop() {
        if dist[v].as_ref() != Some(&d) {
            continue;
        }
        for &eid in g.incident(v) {
            let e = g.edge(eid);
            let w = if e.src == v { e.dst } else { e.src };
            let nd = &d + &e.length;
            if cap.map_or(false, |c| &nd > c) {
                continue;
            }
            let better = match &dist[w] {
                Some(old) => &nd < old,
                None => true,
            };
            if better {
                dist[w] = Some(nd.clone());
                pq.push(Reverse((nd, w)));
            }
        }
    }
    dist
}

/// Memoizing per-source vertex distance oracle for one graph.
#[derive(Default)]
pub struct DistCache {
    by_source: HashMap<VertexId, Vec<Option<Dyadic>>>,
}

impl DistCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex_distances(&mut self, g: &MetricGraph, v: VertexId) -> &Vec<Option<Dyadic>> {
        self.by_source
            .entry(v)
            .or_insert_with(|| dijkstra_multi(g, &[(v, Dyadic::zero())], None))
    }

    pub fn vertex_distance(&mut self, g: &MetricGraph, u: VertexId, v: VertexId) -> Option<Dyadic> {
        self.vertex_distances(g, u)[v].clone()
    }

    /// Exact point-to-point distance using memoized vertex tables.
    pub fn point_distance(
        &mut self,
        g: &MetricGraph,
        p: &GraphPoint,
        q: &GraphPoint,
    ) -> Option<Dyadic> {
        let mut best = direct_same_edge(p, q);
        let pa = p.anchors(g);
        let qa = q.anchors(g);
        for (u, _) in &pa {
            self.vertex_distances(g, *u);
        }
        for (u, du) in &pa {
            let table = &self.by_source[u];
            for (v, dv) in &qa {
                if let Some(mid) = &table[*v] {
                    let cand = &(du + mid) + dv;
                    if best.as_ref().map_or(true, |b| &cand < b) {
                        best = Some(cand);
                    }
                }
            }
        }
        best
    }
}

fn direct_same_edge(p: &GraphPoint, q: &GraphPoint) -> Option<Dyadic> {
    match (p, q) {
        (
            GraphPoint::Interior { edge: e1, offset: a },
            GraphPoint::Interior { edge: e2, offset: b },
        ) if e1 == e2 => Some((a - b).abs()),
        (GraphPoint::Vertex(u), GraphPoint::Vertex(v)) if u == v => Some(Dyadic::zero()),
        _ => None,
    }
}

/// Exact point-to-point distance with an early-exit cap: returns `None`
/// when every path exceeds `cap`.
pub fn point_distance_capped(
    g: &MetricGraph,
    p: &GraphPoint,
    q: &GraphPoint,
    cap: &Dyadic,
) -> Option<Dyadic> {
    let mut best = direct_same_edge(p, q).filter(|d| d <= cap);
    let dist = dijkstra_multi(g, &p.anchors(g), Some(cap));
    for (v, dv) in q.anchors(g) {
        if let Some(mid) = &dist[v] {
            let cand = mid + &dv;
            if &cand <= cap && best.as_ref().map_or(true, |b| cand < *b) {
                best = Some(cand);
            }
        }
    }
    best
}

/// One traversal step of a witness path: the edge is traversed from
/// `from` to `to` (offsets along the edge; `from > to` means the edge is
/// traversed against its direction).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSeg {
    pub edge: EdgeId,
    pub from: Dyadic,
    pub to: Dyadic,
}

impl PathSeg {
    pub fn length(&self) -> Dyadic {
        (&self.from - &self.to).abs()
    }
}

/// An ordered witness path between two points.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathWitness {
    pub segs: Vec<PathSeg>,
}

impl PathWitness {
    pub fn length(&self) -> Dyadic {
        let mut total = Dyadic::zero();
        for s in &self.segs {
            total += &s.length();
        }
        total
    }

    pub fn as_segment_set(&self) -> SegmentSet {
        let segs = self
            .segs
            .iter()
            .filter(|s| s.from != s.to)
            .map(|s| {
                (s.edge, Dyadic::min(&s.from, &s.to), Dyadic::max(&s.from, &s.to))
            })
            .collect();
        SegmentSet::new(segs)
    }
}

/// Shortest path between two points with an explicit witness.
/// Deterministic: label ties resolve by vertex id, and same-edge direct
/// connections win over equal-length vertex routes.
pub fn shortest_path_witness(
    g: &MetricGraph,
    p: &GraphPoint,
    q: &GraphPoint,
) -> Result<(Dyadic, PathWitness), GraphError> {
    if p == q {
        return Ok((Dyadic::zero(), PathWitness::default()));
    }
    // Dijkstra from p's anchors with predecessor edges.
    let mut dist: Vec<Option<Dyadic>> = vec![None; g.n_vertices()];
    let mut pred: Vec<Option<(VertexId, EdgeId)>> = vec![None; g.n_vertices()];
    let mut pq: BinaryHeap<Reverse<(Dyadic, VertexId)>> = BinaryHeap::new();
    for (v, d) in p.anchors(g) {
        match &dist[v] {
            Some(old) if *old <= d => {}
            _ => {
                dist[v] = Some(d.clone());
                pq.push(Reverse((d, v)));
            }
        }
    }
    while let Some(Reverse((d, v))) = pq.pop() {
        if dist[v].as_ref() != Some(&d) {
            continue;
        }
        for &eid in g.incident(v) {
            let e = g.edge(eid);
            let w = if e.src == v { e.dst } else { e.src };
            let nd = &d + &e.length;
            let better = match &dist[w] {
                Some(old) => &nd < old,
                None => true,
            };
            if better {
                dist[w] = Some(nd.clone());
                pred[w] = Some((v, eid));
                pq.push(Reverse((nd, w)));
            }
        }
    }

    let mut best: Option<(Dyadic, Option<VertexId>)> = direct_same_edge(p, q).map(|d| (d, None));
    for (v, dv) in q.anchors(g) {
        if let Some(mid) = &dist[v] {
            let cand = mid + &dv;
            let better = match &best {
                Some((b, _)) => cand < *b,
                None => true,
            };
            if better {
                best = Some((cand, Some(v)));
            }
        }
    }
    let (total, exit) = best.ok_or(GraphError::NoPath)?;

    let mut witness = PathWitness::default();
    match exit {
        None => {
            // Direct connection along the shared edge.
            if let (
                GraphPoint::Interior { edge, offset: a },
                GraphPoint::Interior { offset: b, .. },
            ) = (p, q)
            {
                witness.segs.push(PathSeg { edge: *edge, from: a.clone(), to: b.clone() });
            }
        }
        Some(exit_vertex) => {
            // Vertex chain from p's entry anchor to the exit vertex.
            let mut chain: Vec<(VertexId, Option<EdgeId>)> = Vec::new();
            let mut v = exit_vertex;
            loop {
                match &pred[v] {
                    Some((u, eid)) => {
                        chain.push((v, Some(*eid)));
                        v = *u;
                    }
                    None => {
                        chain.push((v, None));
                        break;
                    }
                }
            }
            chain.reverse();
            let entry_vertex = chain[0].0;
            if let GraphPoint::Interior { edge, offset } = p {
                let e = g.edge(*edge);
                let to = if entry_vertex == e.src { Dyadic::zero() } else { e.length.clone() };
                witness.segs.push(PathSeg { edge: *edge, from: offset.clone(), to });
            }
            let mut at = entry_vertex;
            for (v, eid) in chain.into_iter().skip(1) {
                let eid = eid.expect("non-root chain entry has a predecessor edge");
                let e = g.edge(eid);
                let (from, to) = if e.src == at {
                    (Dyadic::zero(), e.length.clone())
                } else {
                    (e.length.clone(), Dyadic::zero())
                };
                witness.segs.push(PathSeg { edge: eid, from, to });
                at = v;
            }
            if let GraphPoint::Interior { edge, offset } = q {
                let e = g.edge(*edge);
                let from = if exit_vertex == e.src { Dyadic::zero() } else { e.length.clone() };
                witness.segs.push(PathSeg { edge: *edge, from, to: offset.clone() });
            }
        }
    }
    debug_assert_eq!(witness.length(), total);
    Ok((total, witness))
}

/// A normalized set of closed sub-intervals of edges: sorted by
/// `(edge, start)`, with overlapping or touching intervals merged.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSet {
    segs: Vec<(EdgeId, Dyadic, Dyadic)>,
}

impl SegmentSet {
    pub fn new(mut segs: Vec<(EdgeId, Dyadic, Dyadic)>) -> Self {
        segs.retain(|(_, a, b)| a < b);
        segs.sort_by(|x, y| (x.0, &x.1).cmp(&(y.0, &y.1)));
        let mut merged: Vec<(EdgeId, Dyadic, Dyadic)> = Vec::with_capacity(segs.len());
        for (e, a, b) in segs {
            match merged.last_mut() {
                Some((pe, _, pb)) if *pe == e && *pb >= a => {
                    if b > *pb {
                        *pb = b;
                    }
                }
                _ => merged.push((e, a, b)),
            }
        }
        SegmentSet { segs: merged }
    }

    pub fn whole_edge(g: &MetricGraph, e: EdgeId) -> Self {
        SegmentSet::new(vec![(e, Dyadic::zero(), g.edge(e).length.clone())])
    }

    pub fn segments(&self) -> &[(EdgeId, Dyadic, Dyadic)] {
        &self.segs
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }

    /// Total length (unweighted).
    pub fn total_length(&self) -> Dyadic {
        let mut total = Dyadic::zero();
        for (_, a, b) in &self.segs {
            total += &(b - a);
        }
        total
    }

    /// Measure with respect to the edge weights of `g`.
    pub fn measure(&self, g: &MetricGraph) -> Dyadic {
        let mut total = Dyadic::zero();
        for (e, a, b) in &self.segs {
            total += &(&g.edge(*e).weight * &(b - a));
        }
        total
    }

    pub fn union(&self, other: &SegmentSet) -> SegmentSet {
        let mut segs = self.segs.clone();
        segs.extend(other.segs.iter().cloned());
        SegmentSet::new(segs)
    }

    pub fn intersect(&self, other: &SegmentSet) -> SegmentSet {
        let mut out = Vec::new();
        let mut j = 0;
        for (e, a, b) in &self.segs {
            while j > 0
                && (other.segs[j - 1].0 > *e
                    || (other.segs[j - 1].0 == *e && other.segs[j - 1].2 >= *a))
            {
                j -= 1;
            }
            let mut k = j;
            while k < other.segs.len() {
                let (oe, oa, ob) = &other.segs[k];
                if (*oe, oa) > (*e, b) {
                    break;
                }
                if oe == e {
                    let lo = Dyadic::max(a, oa);
                    let hi = Dyadic::min(b, ob);
                    if lo < hi {
                        out.push((*e, lo, hi));
                    }
                }
                k += 1;
            }
        }
        SegmentSet::new(out)
    }

    /// Interiors disjoint (shared endpoints allowed).
    pub fn is_disjoint(&self, other: &SegmentSet) -> bool {
        self.intersect(other).is_empty()
    }

    pub fn contains_set(&self, other: &SegmentSet) -> bool {
        self.intersect(other).total_length() == other.total_length()
    }

    pub fn contains_point(&self, g: &MetricGraph, p: &GraphPoint) -> bool {
        match p {
            GraphPoint::Interior { edge, offset } => self
                .segs
                .iter()
                .any(|(e, a, b)| e == edge && a <= offset && offset <= b),
            GraphPoint::Vertex(v) => self.segs.iter().any(|(e, a, b)| {
                let edge = g.edge(*e);
                (edge.src == *v && a.is_zero()) || (edge.dst == *v && *b == edge.length)
            }),
        }
    }
}

/// Exact closed metric ball of radius `r` around `p`, as a segment set.
pub fn ball(g: &MetricGraph, p: &GraphPoint, r: &Dyadic) -> SegmentSet {
    if r.is_negative() {
        return SegmentSet::default();
    }
    let dist = dijkstra_multi(g, &p.anchors(g), Some(r));
    let mut segs = Vec::new();
    for (eid, e) in g.edges().iter().enumerate() {
        // Reachable prefix through src and suffix through dst.
        if let Some(ds) = &dist[e.src] {
            let reach = r - ds;
            segs.push((eid, Dyadic::zero(), Dyadic::min(&reach, &e.length)));
        }
        if let Some(dd) = &dist[e.dst] {
            let reach = r - dd;
            let lo = &e.length - &reach;
            segs.push((eid, Dyadic::max(&lo, &Dyadic::zero()), e.length.clone()));
        }
    }
    // Direct interval on the point's own edge, independent of vertex labels.
    if let GraphPoint::Interior { edge, offset } = p {
        let e = g.edge(*edge);
        let lo = Dyadic::max(&(offset - r), &Dyadic::zero());
        let hi = Dyadic::min(&(offset + r), &e.length);
        segs.push((*edge, lo, hi));
    }
    SegmentSet::new(segs)
}

/// Exact doubling ratio `mu(B_2r(x) ∩ S) / mu(B_r(x) ∩ S)` where `S` is an
/// optional restriction.  Errors if the inner ball has zero measure.
pub fn doubling_ratio(
    g: &MetricGraph,
    x: &GraphPoint,
    r: &Dyadic,
    restriction: Option<&SegmentSet>,
) -> Result<BigRational, GraphError> {
    let inner = ball(g, x, r);
    let outer = ball(g, x, &r.double(1));
    let (inner, outer) = match restriction {
        Some(s) => (inner.intersect(s), outer.intersect(s)),
        None => (inner, outer),
    };
    let mi = inner.measure(g);
    if !mi.is_positive() {
        return Err(GraphError::EmptyBall);
    }
    let mo = outer.measure(g);
    Ok(mo.to_rational() / mi.to_rational())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    /// Unit interval as a single edge.
    fn interval() -> MetricGraph {
        MetricGraph::new(
            2,
            vec![Edge { src: 0, dst: 1, length: Dyadic::one(), weight: Dyadic::one() }],
        )
        .unwrap()
    }

    /// Two-arc circle: vertices 0,1 joined by parallel edges of length 1/2,
    /// plus stubs 2-0 and 1-3 of length 1/4.
    fn circle_with_stubs() -> MetricGraph {
        MetricGraph::new(
            4,
            vec![
                Edge { src: 2, dst: 0, length: d("1/2^2"), weight: Dyadic::one() },
                Edge { src: 0, dst: 1, length: d("1/2^1"), weight: d("1/2^1") },
                Edge { src: 0, dst: 1, length: d("1/2^1"), weight: d("1/2^1") },
                Edge { src: 1, dst: 3, length: d("1/2^2"), weight: Dyadic::one() },
            ],
        )
        .unwrap()
    }

    #[test]
    fn interval_distance() {
        let g = interval();
        let p = GraphPoint::on_edge(&g, 0, d("1/2^2")).unwrap();
        let q = GraphPoint::on_edge(&g, 0, d("3/2^2")).unwrap();
        let (dist, w) = shortest_path_witness(&g, &p, &q).unwrap();
        assert_eq!(dist, d("1/2^1"));
        assert_eq!(w.length(), dist);
    }

    #[test]
    fn opposite_arc_midpoints() {
        // Midpoints of the two arcs are at distance 1/2 (around the circle).
        let g = circle_with_stubs();
        let p = GraphPoint::on_edge(&g, 1, d("1/2^2")).unwrap();
        let q = GraphPoint::on_edge(&g, 2, d("1/2^2")).unwrap();
        let mut cache = DistCache::new();
        assert_eq!(cache.point_distance(&g, &p, &q), Some(d("1/2^1")));
        let (dist, w) = shortest_path_witness(&g, &p, &q).unwrap();
        assert_eq!(dist, d("1/2^1"));
        assert_eq!(w.length(), dist);
        // Witness: quarter up one arc to a shared vertex, then quarter along
        // the other arc.
        assert_eq!(w.segs.len(), 2);
    }

    #[test]
    fn capped_distance() {
        let g = circle_with_stubs();
        let p = GraphPoint::Vertex(2);
        let q = GraphPoint::Vertex(3);
        // 1/4 + 1/2 + 1/4 = 1 through either arc.
        assert_eq!(point_distance_capped(&g, &p, &q, &Dyadic::one()), Some(Dyadic::one()));
        assert_eq!(point_distance_capped(&g, &p, &q, &d("3/2^2")), None);
    }

    #[test]
    fn ball_on_interval() {
        let g = interval();
        let p = GraphPoint::on_edge(&g, 0, d("1/2^1")).unwrap();
        let b = ball(&g, &p, &d("1/2^2"));
        assert_eq!(b.segments(), &[(0, d("1/2^2"), d("3/2^2"))]);
        assert_eq!(b.measure(&g), d("1/2^1"));
    }

    #[test]
    fn ball_spills_through_vertex() {
        let g = circle_with_stubs();
        // Center at the arc-1 midpoint, radius 3/8: covers all of both arcs
        // except the far 1/8 of arc 2 around its midpoint... check exactly.
        let p = GraphPoint::on_edge(&g, 1, d("1/2^2")).unwrap();
        let b = ball(&g, &p, &d("3/2^3"));
        // Own arc: everything within 3/8 of the midpoint = whole arc.
        // Through vertex 0 (dist 1/4): stub prefix 1/8, arc-2 prefix 1/8.
        // Through vertex 1 (dist 1/4): stub 1/8, arc-2 suffix 1/8.
        let expect = SegmentSet::new(vec![
            (0, d("1/2^3"), d("1/2^2")),
            (1, Dyadic::zero(), d("1/2^1")),
            (2, Dyadic::zero(), d("1/2^3")),
            (2, d("3/2^3"), d("1/2^1")),
            (3, Dyadic::zero(), d("1/2^3")),
        ]);
        assert_eq!(b, expect);
    }

    #[test]
    fn segment_set_ops() {
        let a = SegmentSet::new(vec![(0, d("0"), d("1/2^1")), (1, d("1/2^2"), d("3/2^2"))]);
        let b = SegmentSet::new(vec![(0, d("1/2^2"), d("3/2^2")), (2, d("0"), d("1"))]);
        let i = a.intersect(&b);
        assert_eq!(i.segments(), &[(0, d("1/2^2"), d("1/2^1"))]);
        assert!(!a.is_disjoint(&b));
        assert!(a.contains_set(&SegmentSet::new(vec![(1, d("1/2^2"), d("1/2^1"))])));
        let u = a.union(&b);
        // edge 0: [0,3/4], edge 1: [1/4,3/4], edge 2: [0,1]
        assert_eq!(u.total_length(), d("9/2^2"));
        // merging of touching intervals
        let m = SegmentSet::new(vec![(0, d("0"), d("1/2^1")), (0, d("1/2^1"), d("1"))]);
        assert_eq!(m.segments().len(), 1);
    }

    #[test]
    fn doubling_on_interval() {
        let g = interval();
        let p = GraphPoint::on_edge(&g, 0, d("1/2^1")).unwrap();
        let ratio = doubling_ratio(&g, &p, &d("1/2^3"), None).unwrap();
        assert_eq!(ratio, BigRational::from_integer(2.into()));
    }
}
