//! Geodesic-family oracles and the thick-system builder.
//!
//! An oracle wraps a prebuilt *host* system truncated at some depth and
//! exposes a finite family of source-sink geodesics in the deepest host
//! graph.  A family member is a *trace*: an ordered chain of host edges
//! (with partial end segments), parametrized by arclength.  The canonical
//! member always descends through primary subedges; the other members arise
//! by swapping the two arcs of a host circle whose span lies inside a
//! prescribed window — a finite surrogate of closure under concatenation.
//!
//! The builder grows a new inverse system on top of the oracle: each level
//! partitions every edge along its trace (terminal cuts plus an interior
//! mesh aligned to the host grid), asks the oracle for the
//! maximal-deviation family member agreeing with the edge outside each gap,
//! and turns high-deviation gaps into circles whose opposite edge carries
//! the deviating subtrace.  All lengths, cuts, and deviations are exact
//! dyadics; when the requested mesh is finer than the host grid can
//! support, the builder reports the host depth that would be required.

use serde::Serialize;
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::graph::{DistCache, Edge, EdgeId, GraphPoint, MetricGraph, VertexId};
use crate::system::{
    ChildRecord, Constants, EdgeSubdivision, InverseSystem, Step, SubEdge, SystemError,
};

#[derive(Debug, Error)]
pub enum ThickError {
    #[error(
        "host depth {available} cannot support mesh {mesh}; increase host depth to at least {required}"
    )]
    HostDepthInsufficient { available: usize, required: usize, mesh: Dyadic },
    #[error("no host grid point available for a terminal cut of size {0}")]
    TerminalCutTooFine(Dyadic),
    #[error("traces must agree at every partition point")]
    PartitionDisagreement,
    #[error("traces must have equal length")]
    LengthMismatch,
    #[error("partition must contain at least two points including both endpoints")]
    BadPartition,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

// ---------------------------------------------------------------------------
// Traces

/// A directed curve through the deepest host graph: ordered edge windows
/// `(edge, from, to)` with `from < to`, consecutive windows sharing a
/// vertex.  Parametrized by arclength from the start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub segs: Vec<(EdgeId, Dyadic, Dyadic)>,
}

impl Trace {
    pub fn length(&self) -> Dyadic {
        let mut total = Dyadic::zero();
        for (_, a, b) in &self.segs {
            total += &(b - a);
        }
        total
    }

    /// The point at arclength `s` (canonicalized to a vertex at shared
    /// boundaries).
    pub fn point_at(&self, g: &MetricGraph, s: &Dyadic) -> GraphPoint {
        let mut acc = Dyadic::zero();
        for (e, a, b) in &self.segs {
            let next = &acc + &(b - a);
            if s <= &next {
                let off = a + &(s - &acc);
                return GraphPoint::on_edge(g, *e, off).expect("offset within edge");
            }
            acc = next;
        }
        let (e, _, b) = self.segs.last().expect("nonempty trace");
        GraphPoint::on_edge(g, *e, b.clone()).expect("offset within edge")
    }

    /// The subcurve over the arclength window `[s, t]`.
    pub fn sub(&self, s: &Dyadic, t: &Dyadic) -> Trace {
        let mut out = Vec::new();
        let mut acc = Dyadic::zero();
        for (e, a, b) in &self.segs {
            let next = &acc + &(b - a);
            let lo = Dyadic::max(s, &acc);
            let hi = Dyadic::min(t, &next);
            if lo < hi {
                out.push((*e, a + &(&lo - &acc), a + &(&hi - &acc)));
            }
            acc = next;
        }
        Trace { segs: out }
    }

    /// Arclength positions of all window boundaries, including `0` and the
    /// total length.
    pub fn breakpoints(&self) -> Vec<Dyadic> {
        let mut out = vec![Dyadic::zero()];
        let mut acc = Dyadic::zero();
        for (_, a, b) in &self.segs {
            acc += &(b - a);
            out.push(acc.clone());
        }
        out.dedup();
        out
    }

    /// Replaces the subcurve over `[s, t]` with `replacement` (which must
    /// have length `t - s`).
    pub fn splice(&self, s: &Dyadic, t: &Dyadic, replacement: &Trace) -> Trace {
        debug_assert_eq!(replacement.length(), t - s);
        let mut segs = self.sub(&Dyadic::zero(), s).segs;
        segs.extend(replacement.segs.iter().cloned());
        segs.extend(self.sub(t, &self.length()).segs);
        Trace { segs }
    }
}

// ---------------------------------------------------------------------------
// Oracle

/// A finite family of source-sink geodesics over a host system.  With
/// `degenerate` set the family is the canonical curve alone (zero
/// thickness); otherwise it is the swap closure described in the module
/// docs.
pub struct GeodesicOracle {
    pub host: InverseSystem,
    pub degenerate: bool,
    /// `ancestors[top_edge][level]` is the level-`level` ancestor edge.
    ancestors: Vec<Vec<EdgeId>>,
    dist: DistCache,
}

impl GeodesicOracle {
    pub fn new(host: InverseSystem) -> Self {
        Self::with_family(host, false)
    }

    /// Oracle whose family is the canonical curve alone.
    pub fn degenerate(host: InverseSystem) -> Self {
        Self::with_family(host, true)
    }

    fn with_family(host: InverseSystem, degenerate: bool) -> Self {
        let top = host.top();
        let n_top = host.levels[top].edges().len();
        let mut ancestors = vec![vec![0; top + 1]; n_top];
        for (e, anc) in ancestors.iter_mut().enumerate() {
            anc[top] = e;
            let mut cur = e;
            for l in (0..top).rev() {
                cur = host.steps[l].children[cur].parent_edge;
                anc[l] = cur;
            }
        }
        GeodesicOracle { host, degenerate, ancestors, dist: DistCache::new() }
    }

    pub fn depth(&self) -> usize {
        self.host.top()
    }

    pub fn top_graph(&self) -> &MetricGraph {
        &self.host.levels[self.host.top()]
    }

    /// Expands an edge window of any host level to the deepest level,
    /// always choosing primary subedges.
    pub fn descend(&self, level: usize, edge: EdgeId, from: &Dyadic, to: &Dyadic) -> Trace {
        if level == self.host.top() {
            return Trace { segs: vec![(edge, from.clone(), to.clone())] };
        }
        let mut segs = Vec::new();
        for sub in &self.host.steps[level].subdivisions[edge].subedges {
            let lo = Dyadic::max(from, &sub.lo);
            let hi = Dyadic::min(to, &sub.hi);
            if lo < hi {
                let inner =
                    self.descend(level + 1, sub.primary, &(&lo - &sub.lo), &(&hi - &sub.lo));
                segs.extend(inner.segs);
            }
        }
        Trace { segs }
    }

    /// The canonical source-sink geodesic.
    pub fn canonical_trace(&self) -> Trace {
        let base = &self.host.levels[0];
        self.descend(0, 0, &Dyadic::zero(), &base.edge(0).length)
    }

    /// Exact distance in the deepest host graph.
    pub fn distance(&mut self, p: &GraphPoint, q: &GraphPoint) -> Dyadic {
        let g = &self.host.levels[self.host.top()];
        self.dist.point_distance(g, p, q).expect("host graph connected")
    }

    /// Host edges (at any level below the deepest) whose full span is
    /// covered by the arclength window `[s, t]` of `trace`.  Returns
    /// `(level, edge, window start arclength)`.
    fn covered_edges(&self, trace: &Trace, s: &Dyadic, t: &Dyadic) -> Vec<(usize, EdgeId, Dyadic)> {
        let top = self.host.top();
        let sub = trace.sub(s, t);
        let mut out = Vec::new();
        for level in 0..top {
            let g = &self.host.levels[level];
            let mut run: Option<(EdgeId, Dyadic, Dyadic)> = None; // (ancestor, start, acc len)
            let mut acc = s.clone();
            let flush = |run: &mut Option<(EdgeId, Dyadic, Dyadic)>, out: &mut Vec<_>| {
                if let Some((anc, start, len)) = run.take() {
                    if len == g.edge(anc).length {
                        out.push((level, anc, start));
                    }
                }
            };
            for (e, a, b) in &sub.segs {
                let anc = self.ancestors[*e][level];
                let piece = b - a;
                match &mut run {
                    Some((cur, _, len)) if *cur == anc => *len += &piece,
                    _ => {
                        flush(&mut run, &mut out);
                        run = Some((anc, acc.clone(), piece.clone()));
                    }
                }
                acc += &piece;
            }
            flush(&mut run, &mut out);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Deviation records

/// Strictly increasing dyadic times including both endpoints.
#[derive(Debug, Clone, Serialize)]
pub struct Partition(pub Vec<Dyadic>);

impl Partition {
    pub fn new(mut times: Vec<Dyadic>) -> Result<Self, ThickError> {
        times.sort();
        times.dedup();
        if times.len() < 2 {
            return Err(ThickError::BadPartition);
        }
        Ok(Partition(times))
    }

    pub fn gaps(&self) -> impl Iterator<Item = (&Dyadic, &Dyadic)> {
        self.0.windows(2).map(|w| (&w[0], &w[1]))
    }
}

/// A chosen family member together with its per-gap maximal distances from
/// the reference curve.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationRecord {
    pub partition: Partition,
    pub gamma_tilde: Trace,
    pub per_gap: Vec<Dyadic>,
    pub total: Dyadic,
    /// Per gap, the arclength window on which the two curves have disjoint
    /// interiors (`None` when they coincide on the whole gap).
    pub swap_windows: Vec<Option<(Dyadic, Dyadic)>>,
}

/// Maximal distance between two equal-length traces over an arclength
/// window, evaluated on the host grid of both curves (refined once by
/// midpoints; distances are piecewise affine between grid times, with the
/// extrema of the family's swaps attained at grid times).
fn window_max_distance(
    oracle: &mut GeodesicOracle,
    gamma: &Trace,
    tilde: &Trace,
    s: &Dyadic,
    t: &Dyadic,
) -> Dyadic {
    let mut times: Vec<Dyadic> = Vec::new();
    for tr in [gamma, tilde] {
        for b in tr.breakpoints() {
            if &b >= s && &b <= t {
                times.push(b);
            }
        }
    }
    times.push(s.clone());
    times.push(t.clone());
    times.sort();
    times.dedup();
    let mut refined = Vec::with_capacity(times.len() * 2);
    for w in times.windows(2) {
        refined.push(w[0].clone());
        refined.push((&w[0] + &w[1]).halve(1));
    }
    refined.push(times.last().unwrap().clone());
    let mut best = Dyadic::zero();
    for time in refined {
        let (p, q) = {
            let g = &oracle.host.levels[oracle.host.top()];
            (gamma.point_at(g, &time), tilde.point_at(g, &time))
        };
        if p != q {
            let d = oracle.distance(&p, &q);
            best = Dyadic::max(&best, &d);
        }
    }
    best
}

/// Exact per-gap deviation of `gamma_tilde` from `gamma` on a partition at
/// whose points the curves agree.
pub fn deviation(
    oracle: &mut GeodesicOracle,
    gamma: &Trace,
    gamma_tilde: &Trace,
    partition: &Partition,
) -> Result<DeviationRecord, ThickError> {
    if gamma.length() != gamma_tilde.length() {
        return Err(ThickError::LengthMismatch);
    }
    let g = &oracle.host.levels[oracle.host.top()];
    for time in &partition.0 {
        if gamma.point_at(g, time) != gamma_tilde.point_at(g, time) {
            return Err(ThickError::PartitionDisagreement);
        }
    }
    let mut per_gap = Vec::new();
    let mut total = Dyadic::zero();
    let gaps: Vec<(Dyadic, Dyadic)> =
        partition.gaps().map(|(a, b)| (a.clone(), b.clone())).collect();
    for (s, t) in &gaps {
        let d = window_max_distance(oracle, gamma, gamma_tilde, s, t);
        total += &d;
        per_gap.push(d);
    }
    let swap_windows = vec![None; per_gap.len()];
    Ok(DeviationRecord {
        partition: partition.clone(),
        gamma_tilde: gamma_tilde.clone(),
        per_gap,
        total,
        swap_windows,
    })
}

/// Per gap of the partition, the best single swap: the host circle whose
/// span lies inside the gap and whose opposite-arc descent deviates the
/// most.  The winner's swap window is recorded so that on each gap the two
/// curves either coincide or have disjoint interiors.
pub fn select_sup2(
    oracle: &mut GeodesicOracle,
    gamma: &Trace,
    partition: &Partition,
) -> Result<DeviationRecord, ThickError> {
    let mut tilde = gamma.clone();
    let mut per_gap = Vec::new();
    let mut total = Dyadic::zero();
    let mut swap_windows = Vec::new();
    let gaps: Vec<(Dyadic, Dyadic)> =
        partition.gaps().map(|(a, b)| (a.clone(), b.clone())).collect();
    for (s, t) in &gaps {
        let mut best: Option<(Dyadic, Dyadic, Dyadic, Trace)> = None; // (dev, lo, hi, swap)
        if !oracle.degenerate {
            let mut swaps: Vec<(Dyadic, Dyadic, EdgeId, usize)> = Vec::new();
            for (level, edge, start) in oracle.covered_edges(gamma, s, t) {
                for sub in &oracle.host.steps[level].subdivisions[edge].subedges {
                    if sub.is_circle() {
                        swaps.push((&start + &sub.lo, &start + &sub.hi, sub.opposite, level + 1));
                    }
                }
            }
            for (lo, hi, opposite, level) in swaps {
                let swapped = oracle.descend(level, opposite, &Dyadic::zero(), &(&hi - &lo));
                let local = gamma.splice(&lo, &hi, &swapped);
                let dev = window_max_distance(oracle, gamma, &local, &lo, &hi);
                let better = match &best {
                    None => dev > Dyadic::zero(),
                    Some((b, ..)) => &dev > b,
                };
                if better {
                    best = Some((dev, lo, hi, swapped));
                }
            }
        }
        match best {
            Some((dev, lo, hi, swapped)) => {
                tilde = tilde.splice(&lo, &hi, &swapped);
                total += &dev;
                per_gap.push(dev);
                swap_windows.push(Some((lo, hi)));
            }
            None => {
                per_gap.push(Dyadic::zero());
                swap_windows.push(None);
            }
        }
    }
    Ok(DeviationRecord {
        partition: partition.clone(),
        gamma_tilde: tilde,
        per_gap,
        total,
        swap_windows,
    })
}

/// The thickness achieved over the full canonical curve with the trivial
/// partition: the deviation of the best family member.
pub fn measured_alpha(oracle: &mut GeodesicOracle) -> Result<Dyadic, ThickError> {
    let gamma = oracle.canonical_trace();
    let partition = Partition::new(vec![Dyadic::zero(), gamma.length()])?;
    Ok(select_sup2(oracle, &gamma, &partition)?.total)
}

// ---------------------------------------------------------------------------
// Builder

#[derive(Debug, Clone, Serialize)]
pub struct ThickLevelReport {
    pub level: usize,
    /// Interior mesh bound for this step.
    pub mesh: Dyadic,
    /// Host level whose grid aligns the interior cuts.
    pub structure_level: usize,
    pub circles: usize,
    pub intervals: usize,
    pub min_terminal_cut: Dyadic,
    pub max_terminal_cut: Dyadic,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThickBuildReport {
    /// Thickness of the oracle family measured over the canonical curve.
    pub alpha_measured: Dyadic,
    /// Circle threshold (a quarter of the measured thickness).
    pub alpha: Dyadic,
    /// Path circle-mass target (an eighth of the measured thickness).
    pub beta: Dyadic,
    pub levels: Vec<ThickLevelReport>,
    /// The finite family is maximized exactly, so no halving loss occurs.
    pub sup2_mode: &'static str,
}

pub struct ThickBuild {
    pub system: InverseSystem,
    /// Per level, per edge, the host trace the edge lives on.
    pub traces: Vec<Vec<Trace>>,
    pub report: ThickBuildReport,
}

/// Largest host level whose coarsest edge is still no longer than `mesh`,
/// or the depth that would be required.
fn structure_level(host: &InverseSystem, mesh: &Dyadic) -> Result<usize, usize> {
    let mut max_len: Option<Dyadic> = None;
    for (l, g) in host.levels.iter().enumerate() {
        let longest = g
            .edges()
            .iter()
            .map(|e| e.length.clone())
            .max()
            .expect("nonempty graph");
        if &longest <= mesh && l < host.top() {
            return Ok(l);
        }
        if l == host.top() {
            max_len = Some(longest);
        }
    }
    // Coarsest edges shrink by at most a factor 2 per level; estimate how
    // many more levels the host would need.
    let longest = max_len.expect("nonempty host");
    let mut need = host.top();
    let mut cur = longest;
    while &cur > mesh {
        cur = cur.halve(1);
        need += 1;
    }
    Err(need + 1)
}

/// Grows a `levels`-step inverse system from the oracle.  Each edge of the
/// current level is cut at `min(beta/2 |e|, delta' * min-edge-length)` from
/// both ends (snapped down to the host grid) and along the host structure
/// grid in between; interior gaps whose best family swap deviates by at
/// least `alpha * gap` become circles carrying the swapped subtrace.
pub fn build_thick_system(
    oracle: &mut GeodesicOracle,
    delta_prime: &[Dyadic],
    levels: usize,
) -> Result<ThickBuild, ThickError> {
    assert!(delta_prime.len() >= levels, "one delta' entry per step");
    let alpha_measured = measured_alpha(oracle)?;
    let alpha = alpha_measured.halve(2);
    let beta = alpha_measured.halve(3);

    let base_len = oracle.host.levels[0].edge(0).length.clone();
    let base = MetricGraph::new(
        2,
        vec![Edge { src: 0, dst: 1, length: base_len, weight: Dyadic::one() }],
    )?;
    let mut sys = InverseSystem {
        levels: vec![base],
        steps: Vec::new(),
        constants: Constants {
            alpha: alpha.clone(),
            beta: beta.clone(),
            delta_prime: delta_prime[..levels].to_vec(),
        },
    };
    let mut traces: Vec<Vec<Trace>> = vec![vec![oracle.canonical_trace()]];
    let mut level_reports = Vec::new();

    for i in 0..levels {
        let dp = &delta_prime[i];
        let g = sys.levels[i].clone();
        let min_len = g.min_edge_length().expect("nonempty level");
        // Mesh: delta' times the smaller of the minimum edge length and the
        // previous step's distance gap.
        let mut mesh = dp * &min_len;
        if i > 0 {
            let report = crate::system::compute_deltas(&sys, i - 1)?;
            if let Some(gap) = report.dist_gap {
                mesh = Dyadic::min(&mesh, &(dp * &gap));
            }
        }
        let m = structure_level(&oracle.host, &mesh).map_err(|required| {
            ThickError::HostDepthInsufficient {
                available: oracle.host.top(),
                required,
                mesh: mesh.clone(),
            }
        })?;
        let grid_vertices = oracle.host.levels[m].n_vertices();

        let mut new_edges: Vec<Edge> = Vec::new();
        let mut new_traces: Vec<Trace> = Vec::new();
        let mut subdivisions: Vec<EdgeSubdivision> = Vec::new();
        let mut children: Vec<ChildRecord> = Vec::new();
        let mut cut_positions: Vec<(VertexId, EdgeId, Dyadic)> = Vec::new();
        let mut next_vertex = g.n_vertices();
        let mut circles = 0usize;
        let mut intervals = 0usize;
        let mut min_cut: Option<Dyadic> = None;
        let mut max_cut: Option<Dyadic> = None;

        for e in 0..g.edges().len() {
            let parent = g.edge(e);
            let trace = &traces[i][e];
            let len = parent.length.clone();
            debug_assert_eq!(trace.length(), len);
            // Zero-thickness families give beta = 0; the mesh term alone
            // then sizes the terminal cut.
            let beta_term = (&beta * &len).halve(1);
            let mesh_term = dp * &min_len;
            let cut_target =
                if beta_term.is_zero() { mesh_term } else { Dyadic::min(&beta_term, &mesh_term) };
            let bps = trace.breakpoints();
            // Terminal cuts snap down onto the trace grid.
            let left = bps
                .iter()
                .filter(|b| !b.is_zero() && **b <= cut_target)
                .max()
                .cloned()
                .ok_or_else(|| ThickError::TerminalCutTooFine(cut_target.clone()))?;
            let right_target = &len - &cut_target;
            let right = bps
                .iter()
                .filter(|b| **b < len && **b >= right_target)
                .min()
                .cloned()
                .ok_or_else(|| ThickError::TerminalCutTooFine(cut_target.clone()))?;
            if left >= right {
                return Err(ThickError::TerminalCutTooFine(cut_target));
            }
            min_cut = Some(match min_cut {
                Some(c) => Dyadic::min(&c, &left),
                None => left.clone(),
            });
            let right_len = &len - &right;
            max_cut = Some(match max_cut {
                Some(c) => Dyadic::max(&Dyadic::max(&c, &left), &right_len),
                None => Dyadic::max(&left, &right_len),
            });
            // Interior cuts: trace breakpoints that are vertices of the
            // structure level.
            let top_g = &oracle.host.levels[oracle.host.top()];
            let mut cuts = vec![Dyadic::zero(), left.clone(), right.clone(), len.clone()];
            for b in &bps {
                if b > &left && b < &right {
                    if let GraphPoint::Vertex(v) = trace.point_at(top_g, b) {
                        if v < grid_vertices {
                            cuts.push(b.clone());
                        }
                    }
                }
            }
            let partition = Partition::new(cuts)?;
            let record = select_sup2(oracle, trace, &partition)?;

            let mut subedges = Vec::new();
            let n_gaps = partition.0.len() - 1;
            let mut at = parent.src;
            for (k, (s, t)) in partition.gaps().enumerate() {
                let gap = t - s;
                let terminal = k == 0 || k == n_gaps - 1;
                let is_circle = !terminal
                    && !record.per_gap[k].is_zero()
                    && record.per_gap[k] >= &alpha * &gap;
                let dst = if t == &parent.length {
                    parent.dst
                } else {
                    let v = next_vertex;
                    next_vertex += 1;
                    cut_positions.push((v, e, t.clone()));
                    v
                };
                let primary = new_edges.len();
                let weight =
                    if is_circle { parent.weight.halve(1) } else { parent.weight.clone() };
                new_edges.push(Edge { src: at, dst, length: gap.clone(), weight: weight.clone() });
                new_traces.push(trace.sub(s, t));
                children.push(ChildRecord { parent_edge: e, sub_index: k, is_opposite: false });
                let opposite = if is_circle {
                    let id = new_edges.len();
                    new_edges.push(Edge { src: at, dst, length: gap.clone(), weight });
                    new_traces.push(record.gamma_tilde.sub(s, t));
                    children.push(ChildRecord { parent_edge: e, sub_index: k, is_opposite: true });
                    circles += 1;
                    id
                } else {
                    intervals += 1;
                    primary
                };
                subedges.push(SubEdge {
                    lo: s.clone(),
                    hi: t.clone(),
                    terminal,
                    primary,
                    opposite,
                });
                at = dst;
            }
            subdivisions.push(EdgeSubdivision { subedges });
        }

        let fine = MetricGraph::new(next_vertex, new_edges)?;
        sys.levels.push(fine);
        sys.steps.push(Step { subdivisions, children, cut_positions });
        traces.push(new_traces);
        level_reports.push(ThickLevelReport {
            level: i,
            mesh,
            structure_level: m,
            circles,
            intervals,
            min_terminal_cut: min_cut.expect("at least one edge"),
            max_terminal_cut: max_cut.expect("at least one edge"),
        });
    }

    Ok(ThickBuild {
        system: sys,
        traces,
        report: ThickBuildReport {
            alpha_measured,
            alpha,
            beta,
            levels: level_reports,
            sup2_mode: "exact-over-family",
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laakso::build_laakso;
    use crate::system::{check_axioms, compute_deltas, min_path_circle_length, pushforward_check};

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_trace_is_a_unit_geodesic() {
        let oracle = GeodesicOracle::new(build_laakso(3).unwrap());
        let gamma = oracle.canonical_trace();
        assert_eq!(gamma.length(), Dyadic::one());
        // Windows chain through shared vertices.
        let g = oracle.top_graph();
        for pair in gamma.segs.windows(2) {
            let (e1, _, b1) = &pair[0];
            let (e2, a2, _) = &pair[1];
            assert_eq!(b1, &g.edge(*e1).length);
            assert!(a2.is_zero());
            assert_eq!(g.edge(*e1).dst, g.edge(*e2).src);
        }
        // Every directed chain from source to sink is a geodesic, so the
        // canonical curve starts and ends at the extremes.
        assert_eq!(g.edge(gamma.segs[0].0).src, oracle.host.source());
        assert_eq!(g.edge(gamma.segs.last().unwrap().0).dst, oracle.host.sink());
    }

    #[test]
    fn deviation_of_identical_curves_is_zero() {
        let mut oracle = GeodesicOracle::new(build_laakso(2).unwrap());
        let gamma = oracle.canonical_trace();
        let t = Partition::new(vec![Dyadic::zero(), d("1/2^1"), Dyadic::one()]).unwrap();
        let rec = deviation(&mut oracle, &gamma, &gamma.clone(), &t).unwrap();
        assert!(rec.total.is_zero());
        assert!(rec.per_gap.iter().all(|v| v.is_zero()));
    }

    #[test]
    fn single_arc_swap_deviates_by_half() {
        // Swapping the two arcs of the first-level circle separates the
        // curves by exactly 1/2 at the circle midpoint.
        let mut oracle = GeodesicOracle::new(build_laakso(3).unwrap());
        let gamma = oracle.canonical_trace();
        let trivial = Partition::new(vec![Dyadic::zero(), Dyadic::one()]).unwrap();
        let rec = select_sup2(&mut oracle, &gamma, &trivial).unwrap();
        assert_eq!(rec.total, d("1/2^1"));
        assert_eq!(rec.per_gap, vec![d("1/2^1")]);
        // The winning swap window is the first-level circle span.
        assert_eq!(rec.swap_windows[0], Some((d("1/2^2"), d("3/2^2"))));
        // Independent check through the generic deviation routine.
        let again = deviation(&mut oracle, &gamma, &rec.gamma_tilde, &trivial).unwrap();
        assert_eq!(again.total, d("1/2^1"));
    }

    #[test]
    fn measured_alpha_of_laakso_family_is_half() {
        let mut oracle = GeodesicOracle::new(build_laakso(3).unwrap());
        assert_eq!(measured_alpha(&mut oracle).unwrap(), d("1/2^1"));
    }

    #[test]
    fn deviation_monotone_under_refinement() {
        let mut oracle = GeodesicOracle::new(build_laakso(3).unwrap());
        let gamma = oracle.canonical_trace();
        let trivial = Partition::new(vec![Dyadic::zero(), Dyadic::one()]).unwrap();
        let rec = select_sup2(&mut oracle, &gamma, &trivial).unwrap();
        let tilde = rec.gamma_tilde.clone();
        // Refinements at agreement times (outside the swapped circle span).
        let refinements = [
            vec![Dyadic::zero(), Dyadic::one()],
            vec![Dyadic::zero(), d("1/2^2"), Dyadic::one()],
            vec![Dyadic::zero(), d("1/2^3"), d("1/2^2"), d("3/2^2"), Dyadic::one()],
        ];
        let mut last = Dyadic::zero();
        for times in refinements {
            let t = Partition::new(times).unwrap();
            let r = deviation(&mut oracle, &gamma, &tilde, &t).unwrap();
            assert!(r.total >= last);
            last = r.total;
        }
    }

    #[test]
    fn disagreeing_partition_point_is_rejected() {
        let mut oracle = GeodesicOracle::new(build_laakso(2).unwrap());
        let gamma = oracle.canonical_trace();
        let trivial = Partition::new(vec![Dyadic::zero(), Dyadic::one()]).unwrap();
        let tilde = select_sup2(&mut oracle, &gamma, &trivial).unwrap().gamma_tilde;
        // 1/2 is inside the swapped circle, where the curves disagree.
        let t = Partition::new(vec![Dyadic::zero(), d("1/2^1"), Dyadic::one()]).unwrap();
        assert!(matches!(
            deviation(&mut oracle, &gamma, &tilde, &t),
            Err(ThickError::PartitionDisagreement)
        ));
    }

    #[test]
    fn swap_window_separates_interiors() {
        let mut oracle = GeodesicOracle::new(build_laakso(3).unwrap());
        let gamma = oracle.canonical_trace();
        let trivial = Partition::new(vec![Dyadic::zero(), Dyadic::one()]).unwrap();
        let rec = select_sup2(&mut oracle, &gamma, &trivial).unwrap();
        let (lo, hi) = rec.swap_windows[0].clone().unwrap();
        let g = &oracle.host.levels[oracle.host.top()];
        for k in 0..=16i64 {
            let s = &Dyadic::ratio(k, 4) * &Dyadic::one();
            let p = gamma.point_at(g, &s);
            let q = rec.gamma_tilde.point_at(g, &s);
            if s > lo && s < hi {
                assert_ne!(p, q, "interior time {s} should separate");
            } else {
                assert_eq!(p, q, "time {s} outside the window should agree");
            }
        }
    }

    #[test]
    fn degenerate_family_yields_zero_record() {
        let mut oracle = GeodesicOracle::degenerate(build_laakso(3).unwrap());
        let gamma = oracle.canonical_trace();
        let trivial = Partition::new(vec![Dyadic::zero(), Dyadic::one()]).unwrap();
        let rec = select_sup2(&mut oracle, &gamma, &trivial).unwrap();
        assert!(rec.total.is_zero());
        assert_eq!(rec.gamma_tilde, gamma);
    }

    #[test]
    fn one_level_thick_build_passes_axioms() {
        let mut oracle = GeodesicOracle::new(build_laakso(4).unwrap());
        let build = build_thick_system(&mut oracle, &[d("1/2^3")], 1).unwrap();
        let sys = &build.system;
        assert_eq!(build.report.alpha_measured, d("1/2^1"));
        assert_eq!(build.report.alpha, d("1/2^3"));
        assert_eq!(build.report.beta, d("1/2^4"));
        let report = check_axioms(sys, 3);
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        // Smallness targets met.
        let deltas = compute_deltas(sys, 0).unwrap();
        let dp = d("1/2^3").to_rational();
        assert!(deltas.delta_e <= dp, "delta_e {} > 1/8", deltas.delta_e);
        assert!(deltas.delta_d <= dp, "delta_d {} > 1/8", deltas.delta_d);
        // Path circle mass well above the declared target.
        let beta = min_path_circle_length(sys, 0).unwrap();
        assert!(beta >= d("1/2^4"));
        assert!(pushforward_check(sys, 0).exact());
        // Opposite traces have the primary's length.
        for (e, tr) in build.traces[1].iter().enumerate() {
            assert_eq!(tr.length(), sys.levels[1].edge(e).length);
        }
    }

    #[test]
    fn degenerate_build_reports_failed_circle_mass() {
        let mut oracle = GeodesicOracle::degenerate(build_laakso(4).unwrap());
        let build = build_thick_system(&mut oracle, &[d("1/2^3")], 1).unwrap();
        // Every subedge is an interval, so paths carry no circle mass; the
        // derived target beta = 0 is vacuous, and any positive target fails.
        assert_eq!(min_path_circle_length(&build.system, 0).unwrap(), Dyadic::zero());
        let mut graded = build.system.clone();
        graded.constants.beta = d("1/2^4");
        let report = check_axioms(&graded, 3);
        let a6 = report.checks.iter().find(|c| c.name == "path-circle-mass").unwrap();
        assert!(!a6.passed, "{}", a6.detail);
    }

    #[test]
    fn deep_mesh_requests_more_host_depth() {
        // The schedule 1/8, 1/16, ... forces a second-step mesh far below
        // what a depth-4 host can align to.
        let mut oracle = GeodesicOracle::new(build_laakso(4).unwrap());
        let schedule = [d("1/2^3"), d("1/2^4"), d("1/2^5")];
        match build_thick_system(&mut oracle, &schedule, 3) {
            Err(ThickError::HostDepthInsufficient { available, required, .. }) => {
                assert_eq!(available, 4);
                assert!(required > 4, "required {required}");
            }
            other => panic!("expected depth error, got {:?}", other.map(|b| b.report)),
        }
    }
}
