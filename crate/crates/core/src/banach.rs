//! Generalized diamond systems inside a finite-dimensional sup-norm space.
//!
//! The ambient space is `R^m ⊕_∞ R`: points carry `m` spatial coordinates
//! plus a height `t`, and the norm is the maximum of the spatial sup-norm
//! and `|t|`.  All coordinates are exact rationals, so norms, path lengths,
//! and quasiconvexity ratios are exact.
//!
//! A *convex witness* for a direction vector `c` expresses `c` as the
//! average of `2^{n_c}` branch vectors, each at sup-distance at least
//! `4·delta_c` from `c`.  The *model graph* of a witness is a chain of
//! parallelograms joining `(0,0)` to `(c,1)` along two geodesic paths that
//! interleave the `c` and branch displacements in opposite orders.
//!
//! The diamond builder starts from the vertical unit segment and, per
//! level, splits every edge 1/4 – 1/2 – 1/4, subdivides the middle half
//! into `2^N` equal subedges and replaces each with a scaled translated
//! model graph of the edge's direction witness.  `N` is the minimal
//! integer with `2^{-N} <= (delta_i - delta') / 4` where
//! `delta' = (delta + delta_i)/2`; the next level's quasiconvexity
//! constant is `min(delta_c, delta')` over the directions used.
//!
//! Distances inside a level are computed by descending the tower: if two
//! points project into different blocks of the intermediate subdivision,
//! their distance equals the distance of the projections one level down;
//! otherwise they share a terminal segment (distance is the height gap) or
//! a model-graph block (closed form over the joint vertices).  The
//! recursion is validated against breadth-first search in the tests.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::graph::{Edge, EdgeId, MetricGraph, VertexId};

#[derive(Debug, Error)]
pub enum DiamondError {
    #[error("witness rejected: {0}")]
    BadWitness(String),
    #[error("no witness provided for direction {0}")]
    MissingWitness(String),
    #[error("witness delta_c {0} must exceed the global delta {1}")]
    DeltaTooSmall(BigRational, BigRational),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

pub type Coords = Vec<BigRational>;

/// Sup-norm of an `m + 1` coordinate vector (spatial part plus height).
pub fn sup_norm(v: &[BigRational]) -> BigRational {
    v.iter().map(|x| x.abs()).max().unwrap_or_else(BigRational::zero)
}

pub fn coords_sub(a: &[BigRational], b: &[BigRational]) -> Coords {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn coords_add_scaled(base: &[BigRational], dir: &[BigRational], s: &BigRational) -> Coords {
    base.iter().zip(dir).map(|(x, d)| x + d * s).collect()
}

/// Spatial direction `c` with its branch decomposition: `c` is the exact
/// average of `2^{n_c}` branches, each at sup-distance `>= 4 delta_c`.
///
/// Serializes with rationals as `"p/q"` strings so witness files stay
/// hand-editable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "WitnessJson", into = "WitnessJson")]
pub struct ConvexWitness {
    pub c: Coords,
    pub branches: Vec<Coords>,
    pub n_c: u32,
    pub delta_c: BigRational,
}

#[derive(Serialize, Deserialize)]
struct WitnessJson {
    c: Vec<String>,
    branches: Vec<Vec<String>>,
    n_c: u32,
    delta_c: String,
}

fn rat_to_str(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

fn rat_from_str(s: &str) -> Result<BigRational, String> {
    let bad = || format!("bad rational '{s}'");
    match s.split_once('/') {
        Some((n, d)) => Ok(BigRational::new(
            n.trim().parse().map_err(|_| bad())?,
            d.trim().parse().map_err(|_| bad())?,
        )),
        None => Ok(BigRational::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}

fn coords_from_str(v: &[String]) -> Result<Coords, String> {
    v.iter().map(|s| rat_from_str(s)).collect()
}

impl From<ConvexWitness> for WitnessJson {
    fn from(w: ConvexWitness) -> Self {
        WitnessJson {
            c: w.c.iter().map(rat_to_str).collect(),
            branches: w.branches.iter().map(|b| b.iter().map(rat_to_str).collect()).collect(),
            n_c: w.n_c,
            delta_c: rat_to_str(&w.delta_c),
        }
    }
}

impl TryFrom<WitnessJson> for ConvexWitness {
    type Error = String;
    fn try_from(j: WitnessJson) -> Result<Self, String> {
        Ok(ConvexWitness {
            c: coords_from_str(&j.c)?,
            branches: j.branches.iter().map(|b| coords_from_str(b)).collect::<Result<_, _>>()?,
            n_c: j.n_c,
            delta_c: rat_from_str(&j.delta_c)?,
        })
    }
}

impl ConvexWitness {
    pub fn validate(&self, m: usize) -> Result<(), DiamondError> {
        let reject = |msg: String| Err(DiamondError::BadWitness(msg));
        if self.c.len() != m {
            return reject(format!("direction has {} coordinates, expected {m}", self.c.len()));
        }
        if self.branches.len() != 1usize << self.n_c {
            return reject(format!(
                "expected 2^{} = {} branches, got {}",
                self.n_c,
                1usize << self.n_c,
                self.branches.len()
            ));
        }
        let one = BigRational::one();
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        if sup_norm(&self.c) > one {
            return reject("direction leaves the unit ball".into());
        }
        if self.delta_c > half {
            return reject(format!("delta_c {} exceeds 1/2", self.delta_c));
        }
        if !self.delta_c.is_positive() {
            return reject("delta_c must be positive".into());
        }
        let mut sum = vec![BigRational::zero(); m];
        let sep = &self.delta_c * BigRational::from_integer(4.into());
        for (j, b) in self.branches.iter().enumerate() {
            if b.len() != m {
                return reject(format!("branch {j} has wrong dimension"));
            }
            if sup_norm(b) > one {
                return reject(format!("branch {j} leaves the unit ball"));
            }
            let gap = sup_norm(&coords_sub(&self.c, b));
            if gap < sep {
                return reject(format!("branch {j} separation {gap} < 4 delta_c = {sep}"));
            }
            for (s, x) in sum.iter_mut().zip(b) {
                *s += x;
            }
        }
        let scale = BigRational::new(BigInt::one(), BigInt::from(1u64 << self.n_c));
        for (s, c) in sum.iter().zip(&self.c) {
            if &(s * &scale) != c {
                return reject("branch average differs from the direction".into());
            }
        }
        Ok(())
    }
}

/// Lookup table from direction vectors to witnesses; all entries must share
/// one branching parameter so level subdivisions are homogeneous.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "WitnessTableJson", into = "WitnessTableJson")]
pub struct WitnessTable {
    pub m: usize,
    pub delta: BigRational,
    pub entries: Vec<ConvexWitness>,
}

#[derive(Serialize, Deserialize)]
struct WitnessTableJson {
    m: usize,
    delta: String,
    entries: Vec<ConvexWitness>,
}

impl From<WitnessTable> for WitnessTableJson {
    fn from(t: WitnessTable) -> Self {
        WitnessTableJson { m: t.m, delta: rat_to_str(&t.delta), entries: t.entries }
    }
}

impl TryFrom<WitnessTableJson> for WitnessTable {
    type Error = String;
    fn try_from(j: WitnessTableJson) -> Result<Self, String> {
        Ok(WitnessTable { m: j.m, delta: rat_from_str(&j.delta)?, entries: j.entries })
    }
}

impl WitnessTable {
    pub fn validate(&self) -> Result<u32, DiamondError> {
        let mut n_c = None;
        for w in &self.entries {
            w.validate(self.m)?;
            if w.delta_c <= self.delta {
                return Err(DiamondError::DeltaTooSmall(w.delta_c.clone(), self.delta.clone()));
            }
            match n_c {
                None => n_c = Some(w.n_c),
                Some(n) if n == w.n_c => {}
                Some(n) => {
                    return Err(DiamondError::BadWitness(format!(
                        "mixed branching parameters {n} and {}",
                        w.n_c
                    )))
                }
            }
        }
        n_c.ok_or_else(|| DiamondError::BadWitness("empty witness table".into()))
    }

    pub fn lookup(&self, c: &[BigRational]) -> Result<&ConvexWitness, DiamondError> {
        self.entries
            .iter()
            .find(|w| w.c == c)
            .ok_or_else(|| DiamondError::MissingWitness(format!("{c:?}")))
    }
}

/// A fixture table over `R^2`: the vertical direction splits into the two
/// horizontal extremes, whose own witnesses split along the height.
pub fn fixture_witness_table() -> WitnessTable {
    let r = |p: i64, q: i64| BigRational::new(p.into(), q.into());
    let v = |a: i64, b: i64| vec![r(a, 1), r(b, 1)];
    let quarter = r(1, 4);
    WitnessTable {
        m: 2,
        delta: r(1, 8),
        entries: vec![
            ConvexWitness {
                c: v(0, 0),
                branches: vec![v(1, 0), v(-1, 0)],
                n_c: 1,
                delta_c: quarter.clone(),
            },
            ConvexWitness {
                c: v(1, 0),
                branches: vec![v(1, 1), v(1, -1)],
                n_c: 1,
                delta_c: quarter.clone(),
            },
            ConvexWitness {
                c: v(-1, 0),
                branches: vec![v(-1, 1), v(-1, -1)],
                n_c: 1,
                delta_c: quarter,
            },
        ],
    }
}

// ---------------------------------------------------------------------------
// Model graph

/// The model graph of a witness, scaled so the two marked paths run from
/// `origin` to `origin + scale * (c, 1)`.  Joint vertices sit at ids
/// `3k`, the two mid-parallelogram vertices of step `k` at `3k - 2` (on
/// path 0) and `3k - 1` (on path 1).
pub struct ModelGraph {
    pub graph: MetricGraph,
    pub coords: Vec<Coords>,
    pub gamma0: Vec<EdgeId>,
    pub gamma1: Vec<EdgeId>,
    /// Vertex to subdivided-segment grid index `0 ..= 2^{n_c + 1}`.
    pub proj: Vec<u32>,
}

pub fn build_model_graph(
    w: &ConvexWitness,
    scale: &Dyadic,
    origin: &[BigRational],
) -> Result<ModelGraph, DiamondError> {
    let m = w.c.len();
    w.validate(m)?;
    let n = 1usize << w.n_c;
    let step = scale.halve(w.n_c + 1); // arclength of one edge
    let s = step.to_rational();
    let mut dir_c: Coords = w.c.clone();
    dir_c.push(BigRational::one());
    let mut coords: Vec<Coords> = vec![origin.to_vec()];
    let mut edges = Vec::new();
    let mut gamma0 = Vec::new();
    let mut gamma1 = Vec::new();
    let mut proj = vec![0u32];
    let mut joint = origin.to_vec();
    for k in 0..n {
        let mut dir_b: Coords = w.branches[k].clone();
        dir_b.push(BigRational::one());
        // The previous joint is always the most recently pushed vertex.
        let id_joint_prev = coords.len() - 1;
        let v_prime = coords_add_scaled(&joint, &dir_c, &s);
        let w_prime = coords_add_scaled(&joint, &dir_b, &s);
        let next_joint = coords_add_scaled(&v_prime, &dir_b, &s);
        debug_assert_eq!(next_joint, coords_add_scaled(&w_prime, &dir_c, &s));
        let id_v = coords.len();
        coords.push(v_prime);
        proj.push(2 * k as u32 + 1);
        let id_w = coords.len();
        coords.push(w_prime);
        proj.push(2 * k as u32 + 1);
        let id_next = coords.len();
        coords.push(next_joint.clone());
        proj.push(2 * k as u32 + 2);
        let weight = Dyadic::one();
        gamma0.push(edges.len());
        edges.push(Edge { src: id_joint_prev, dst: id_v, length: step.clone(), weight: weight.clone() });
        gamma0.push(edges.len());
        edges.push(Edge { src: id_v, dst: id_next, length: step.clone(), weight: weight.clone() });
        gamma1.push(edges.len());
        edges.push(Edge { src: id_joint_prev, dst: id_w, length: step.clone(), weight: weight.clone() });
        gamma1.push(edges.len());
        edges.push(Edge { src: id_w, dst: id_next, length: step.clone(), weight });
        joint = next_joint;
    }
    let graph = MetricGraph::new(coords.len(), edges)?;
    Ok(ModelGraph { graph, coords, gamma0, gamma1, proj })
}

// ---------------------------------------------------------------------------
// Parallelogram certification

#[derive(Debug, Clone, Serialize)]
pub struct ParallelogramReport {
    pub branch: usize,
    pub pairs: usize,
    pub min_ratio: BigRational,
    pub delta_c: BigRational,
    pub passed: bool,
}

/// Samples points on the four edges of the normalized parallelogram with
/// vertices `(0,0)`, `(c,1)`, `(c_j,1)`, `(c+c_j,2)` and reports the
/// minimal ratio of sup-norm distance to intrinsic (cycle) distance.  All
/// arithmetic exact.
pub fn certify_parallelogram(w: &ConvexWitness, j: usize, grid: u32) -> ParallelogramReport {
    let m = w.c.len();
    let zero = vec![BigRational::zero(); m + 1];
    let mut dir_c: Coords = w.c.clone();
    dir_c.push(BigRational::one());
    let mut dir_b: Coords = w.branches[j].clone();
    dir_b.push(BigRational::one());
    let vc = dir_c.clone();
    let vb = dir_b.clone();
    // Cycle coordinate: 0 at (0,0), 1 at (c,1), 2 at (c+c_j,2), 3 at
    // (c_j,1), wrapping at 4.  Every edge has unit length.
    let place = |cycle_pos: &BigRational| -> Coords {
        let one = BigRational::one();
        let two = BigRational::from_integer(2.into());
        let three = BigRational::from_integer(3.into());
        if cycle_pos <= &one {
            coords_add_scaled(&zero, &vc, cycle_pos)
        } else if cycle_pos <= &two {
            let t = cycle_pos - &one;
            coords_add_scaled(&vc, &vb, &t)
        } else if cycle_pos <= &three {
            // From (c+c_j,2) back down to (c_j,1).
            let t = cycle_pos - &two;
            let apex = coords_add_scaled(&vc, &vb, &BigRational::one());
            coords_add_scaled(&apex, &vc, &-t)
        } else {
            let t = cycle_pos - &three;
            coords_add_scaled(&vb, &vb, &-t)
        }
    };
    let four = BigRational::from_integer(4.into());
    let mut min_ratio: Option<BigRational> = None;
    let mut pairs = 0usize;
    let ticks = 4 * grid as i64;
    for a in 0..=ticks {
        for b in a..=ticks {
            let pa = BigRational::new(a.into(), (grid as i64).into());
            let pb = BigRational::new(b.into(), (grid as i64).into());
            let around = &pb - &pa;
            let d_in = if &around * BigRational::from_integer(2.into()) <= four {
                around.clone()
            } else {
                &four - &around
            };
            if d_in.is_zero() {
                continue;
            }
            let x = place(&pa);
            let y = place(&pb);
            let norm = sup_norm(&coords_sub(&x, &y));
            let ratio = norm / &d_in;
            pairs += 1;
            if min_ratio.as_ref().map_or(true, |m| &ratio < m) {
                min_ratio = Some(ratio);
            }
        }
    }
    let min_ratio = min_ratio.expect("at least one pair");
    let passed = min_ratio >= w.delta_c;
    ParallelogramReport { branch: j, pairs, min_ratio, delta_c: w.delta_c.clone(), passed }
}

// ---------------------------------------------------------------------------
// Diamond system

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiamondLevel {
    pub graph: MetricGraph,
    /// Ambient coordinates per vertex (`m` spatial entries plus height).
    pub coords: Vec<Coords>,
    /// Every edge has length `2^{-n_i}`.
    pub n_i: u32,
    pub delta_i: BigRational,
    /// Index into the system's direction table, per edge.
    pub edge_dir: Vec<usize>,
}

/// Which intermediate-subdivision block a child edge belongs to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ChildInfo {
    /// Identity-mapped terminal chain (`side` 0 near the source, 1 near the
    /// sink); `lo` is the child's start offset inside the parent edge.
    Terminal { parent: EdgeId, side: u8, lo: Dyadic },
    /// Model-graph block replacing one middle subedge: `block_lo` is the
    /// block's start offset inside the parent edge, `member` the marked
    /// path (0/1), `pos` the edge's index along that path.
    Block { parent: EdgeId, block: u32, block_lo: Dyadic, member: u8, pos: u32 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiamondStep {
    /// Middle-half subdivision exponent `N`.
    pub n_subdiv: u32,
    /// Each parent edge is subdivided into `2^{m_i}` grid edges.
    pub m_i: u32,
    pub n_c: u32,
    pub child_info: Vec<ChildInfo>,
    /// Child vertex to its projection: parent edge and offset.
    pub vertex_proj: Vec<(EdgeId, Dyadic)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiamondSystem {
    pub m: usize,
    pub delta: BigRational,
    pub dir_table: Vec<Coords>,
    pub levels: Vec<DiamondLevel>,
    pub steps: Vec<DiamondStep>,
    /// Minimal subdivision exponents chosen per step (auditable growth).
    pub chosen_n: Vec<u32>,
}

/// Minimal `N` with `2^{-N} <= (delta_i - delta') / 4` for
/// `delta' = (delta + delta_i) / 2`.
pub fn compute_subdivision_exponent(delta: &BigRational, delta_i: &BigRational) -> u32 {
    let two = BigRational::from_integer(2.into());
    let delta_prime = (delta + delta_i) / &two;
    let target = (delta_i - &delta_prime) / BigRational::from_integer(4.into());
    assert!(target.is_positive(), "delta_i must exceed delta");
    let mut n = 0u32;
    let mut value = BigRational::one();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    while value > target {
        value *= &half;
        n += 1;
    }
    n
}

/// A point of a diamond level: an edge and an offset along it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiamondPoint {
    pub edge: EdgeId,
    pub offset: Dyadic,
}

pub fn build_generalized_diamond(
    table: &WitnessTable,
    delta_0: &BigRational,
    levels: usize,
) -> Result<DiamondSystem, DiamondError> {
    let n_c = table.validate()?;
    assert!(delta_0 > &table.delta, "initial constant must exceed delta");
    let m = table.m;
    // Base level: the vertical unit segment.
    let zero_dir: Coords = vec![BigRational::zero(); m];
    let dir_table = vec![zero_dir.clone()];
    let mut dir_index: HashMap<String, usize> = HashMap::new();
    dir_index.insert(format!("{zero_dir:?}"), 0);
    let base = DiamondLevel {
        graph: MetricGraph::new(
            2,
            vec![Edge { src: 0, dst: 1, length: Dyadic::one(), weight: Dyadic::one() }],
        )?,
        coords: vec![vec![BigRational::zero(); m + 1], {
            let mut top = vec![BigRational::zero(); m + 1];
            top[m] = BigRational::one();
            top
        }],
        n_i: 0,
        delta_i: delta_0.clone(),
        edge_dir: vec![0],
    };
    let mut sys = DiamondSystem {
        m,
        delta: table.delta.clone(),
        dir_table,
        levels: vec![base],
        steps: Vec::new(),
        chosen_n: Vec::new(),
    };

    for _ in 0..levels {
        let cur = sys.levels.last().unwrap();
        let n_subdiv = compute_subdivision_exponent(&table.delta, &cur.delta_i);
        let m_i = n_subdiv + n_c + 2;
        let n_next = cur.n_i + m_i;
        let child_len = Dyadic::one().halve(n_next);
        let terminal_count = 1u32 << (n_subdiv + n_c); // per terminal quarter
        let block_count = 1u32 << n_subdiv;
        let block_len = cur.graph.edge(0).length.halve(n_subdiv + 1);
        let block_edge = block_len.halve(n_c + 1);
        debug_assert_eq!(block_edge, child_len);

        let two = BigRational::from_integer(2.into());
        let delta_prime = (&table.delta + &cur.delta_i) / &two;
        let mut delta_next = delta_prime.clone();

        let mut coords = cur.coords.clone();
        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_dir: Vec<usize> = Vec::new();
        let mut child_info: Vec<ChildInfo> = Vec::new();
        let mut vertex_proj: Vec<(EdgeId, Dyadic)> = Vec::new();
        // Existing vertices project to themselves; record them on one
        // incident parent edge.
        for v in 0..cur.graph.n_vertices() {
            let e = cur.graph.incident(v)[0];
            let off = if cur.graph.edge(e).src == v {
                Dyadic::zero()
            } else {
                cur.graph.edge(e).length.clone()
            };
            vertex_proj.push((e, off));
        }

        let cur_dir_table = sys.dir_table.clone();
        let mut new_dirs: Vec<Coords> = Vec::new();
        let mut dir_of = |c: &Coords,
                          dir_index: &mut HashMap<String, usize>,
                          base_len: usize|
         -> usize {
            let key = format!("{c:?}");
            if let Some(&k) = dir_index.get(&key) {
                return k;
            }
            let k = base_len + new_dirs.len();
            new_dirs.push(c.clone());
            dir_index.insert(key, k);
            k
        };

        for e in 0..cur.graph.edges().len() {
            let parent = cur.graph.edge(e);
            let w = table.lookup(&cur_dir_table[cur.edge_dir[e]])?;
            if w.delta_c <= table.delta {
                return Err(DiamondError::DeltaTooSmall(w.delta_c.clone(), table.delta.clone()));
            }
            if w.delta_c < delta_next {
                delta_next = w.delta_c.clone();
            }
            let mut dir_c: Coords = w.c.clone();
            dir_c.push(BigRational::one());
            let c_dir_id = dir_of(&w.c, &mut dir_index, cur_dir_table.len());
            let branch_dir_ids: Vec<usize> = w
                .branches
                .iter()
                .map(|b| dir_of(b, &mut dir_index, cur_dir_table.len()))
                .collect();
            let v0 = parent.src;
            let v1 = parent.dst;
            let base_coord = coords[v0].clone();
            let s_child = child_len.to_rational();
            let weight_half = parent.weight.halve(1);

            // Position helper along the straight parent segment.
            let seg_point = |off: &Dyadic| -> Coords {
                let t = off.to_rational();
                coords_add_scaled(&base_coord, &dir_c, &t)
            };

            // Terminal chain near the source: offsets k * child_len for
            // k = 0 .. terminal_count.
            let mut at = v0;
            let mut off = Dyadic::zero();
            for _ in 0..terminal_count {
                let next_off = &off + &child_len;
                let dst = {
                    let id = coords.len();
                    coords.push(seg_point(&next_off));
                    vertex_proj.push((e, next_off.clone()));
                    id
                };
                child_info.push(ChildInfo::Terminal { parent: e, side: 0, lo: off.clone() });
                edge_dir.push(c_dir_id);
                edges.push(Edge {
                    src: at,
                    dst,
                    length: child_len.clone(),
                    weight: parent.weight.clone(),
                });
                at = dst;
                off = next_off;
            }

            // Middle half: blocks of the scaled model graph.
            for blk in 0..block_count {
                let block_lo = off.clone();
                let mut joint = coords[at].clone();
                for k in 0..(1u32 << n_c) {
                    let mut dir_b: Coords = w.branches[k as usize].clone();
                    dir_b.push(BigRational::one());
                    let v_prime = coords_add_scaled(&joint, &dir_c, &s_child);
                    let w_prime = coords_add_scaled(&joint, &dir_b, &s_child);
                    let next_joint = coords_add_scaled(&v_prime, &dir_b, &s_child);
                    let grid_lo = &block_lo + &(&child_len * &Dyadic::from_int(2 * k as i64));
                    let grid_mid = &grid_lo + &child_len;
                    let grid_hi = &grid_mid + &child_len;
                    let id_v = coords.len();
                    coords.push(v_prime);
                    vertex_proj.push((e, grid_mid.clone()));
                    let id_w = coords.len();
                    coords.push(w_prime);
                    vertex_proj.push((e, grid_mid.clone()));
                    let id_next = {
                        let id = coords.len();
                        coords.push(next_joint.clone());
                        vertex_proj.push((e, grid_hi.clone()));
                        id
                    };
                    for (member, mid, pos0) in [(0u8, id_v, 2 * k), (1u8, id_w, 2 * k)] {
                        child_info.push(ChildInfo::Block {
                            parent: e,
                            block: blk,
                            block_lo: block_lo.clone(),
                            member,
                            pos: pos0,
                        });
                        edge_dir.push(if member == 0 { c_dir_id } else { branch_dir_ids[k as usize] });
                        edges.push(Edge {
                            src: at,
                            dst: mid,
                            length: child_len.clone(),
                            weight: weight_half.clone(),
                        });
                        child_info.push(ChildInfo::Block {
                            parent: e,
                            block: blk,
                            block_lo: block_lo.clone(),
                            member,
                            pos: pos0 + 1,
                        });
                        edge_dir
                            .push(if member == 0 { branch_dir_ids[k as usize] } else { c_dir_id });
                        edges.push(Edge {
                            src: mid,
                            dst: id_next,
                            length: child_len.clone(),
                            weight: weight_half.clone(),
                        });
                    }
                    joint = next_joint;
                    at = id_next;
                    off = grid_hi;
                }
            }

            // Terminal chain near the sink.
            for k in 0..terminal_count {
                let next_off = &off + &child_len;
                let dst = if k + 1 == terminal_count {
                    v1
                } else {
                    let id = coords.len();
                    coords.push(seg_point(&next_off));
                    vertex_proj.push((e, next_off.clone()));
                    id
                };
                child_info.push(ChildInfo::Terminal { parent: e, side: 1, lo: off.clone() });
                edge_dir.push(c_dir_id);
                edges.push(Edge {
                    src: at,
                    dst,
                    length: child_len.clone(),
                    weight: parent.weight.clone(),
                });
                at = dst;
                off = next_off;
            }
            debug_assert_eq!(off, parent.length);
        }

        sys.dir_table.extend(new_dirs);
        let graph = MetricGraph::new(coords.len(), edges)?;
        sys.levels.push(DiamondLevel {
            graph,
            coords,
            n_i: n_next,
            delta_i: delta_next,
            edge_dir,
        });
        sys.steps.push(DiamondStep { n_subdiv, m_i, n_c, child_info, vertex_proj });
        sys.chosen_n.push(n_subdiv);
    }
    Ok(sys)
}

// ---------------------------------------------------------------------------
// Distances

impl DiamondSystem {
    /// Ambient coordinates of a point on a level.
    pub fn point_coords(&self, level: usize, p: &DiamondPoint) -> Coords {
        let lev = &self.levels[level];
        let e = lev.graph.edge(p.edge);
        let t = p.offset.to_rational() / e.length.to_rational();
        let a = &lev.coords[e.src];
        let b = &lev.coords[e.dst];
        a.iter().zip(b).map(|(x, y)| x + (y - x) * &t).collect()
    }

    /// Projection of a level-`j` point one level down (`j >= 1`).
    pub fn project(&self, j: usize, p: &DiamondPoint) -> DiamondPoint {
        let step = &self.steps[j - 1];
        match &step.child_info[p.edge] {
            ChildInfo::Terminal { parent, lo, .. } => {
                DiamondPoint { edge: *parent, offset: lo + &p.offset }
            }
            ChildInfo::Block { parent, block_lo, pos, .. } => {
                let child_len = self.levels[j].graph.edge(p.edge).length.clone();
                let s = &(&child_len * &Dyadic::from_int(*pos as i64)) + &p.offset;
                DiamondPoint { edge: *parent, offset: block_lo + &s }
            }
        }
    }

    /// Exact intrinsic distance between two points of level `j`, via the
    /// level recursion described in the module docs.
    pub fn distance(&self, j: usize, p: &DiamondPoint, q: &DiamondPoint) -> Dyadic {
        if j == 0 {
            return (&p.offset - &q.offset).abs();
        }
        let step = &self.steps[j - 1];
        let key = |pt: &DiamondPoint| match &step.child_info[pt.edge] {
            ChildInfo::Terminal { parent, side, .. } => (*parent, *side as u32, true),
            ChildInfo::Block { parent, block, .. } => (*parent, *block, false),
        };
        let (kp, kq) = (key(p), key(q));
        if kp != kq {
            return self.distance(j - 1, &self.project(j, p), &self.project(j, q));
        }
        let child_len = self.levels[j].graph.edge(p.edge).length.clone();
        match &step.child_info[p.edge] {
            ChildInfo::Terminal { .. } => {
                // Both on one straight identity chain.
                let a = self.project(j, p).offset;
                let b = self.project(j, q).offset;
                (&a - &b).abs()
            }
            ChildInfo::Block { .. } => {
                let along = |pt: &DiamondPoint| -> (u8, Dyadic) {
                    match &step.child_info[pt.edge] {
                        ChildInfo::Block { member, pos, .. } => {
                            (*member, &(&child_len * &Dyadic::from_int(*pos as i64)) + &pt.offset)
                        }
                        _ => unreachable!(),
                    }
                };
                let (mp, sp) = along(p);
                let (mq, sq) = along(q);
                if mp == mq {
                    (&sp - &sq).abs()
                } else {
                    // Meet at one of the joint vertices shared by the two
                    // marked paths (every 2 child edges).
                    let joint_gap = &child_len + &child_len;
                    let n_joints = 1u32 << step.n_c;
                    let mut best: Option<Dyadic> = None;
                    for k in 0..=n_joints {
                        let g = &joint_gap * &Dyadic::from_int(k as i64);
                        let cand = &(&sp - &g).abs() + &(&sq - &g).abs();
                        if best.as_ref().map_or(true, |b| &cand < b) {
                            best = Some(cand);
                        }
                    }
                    best.expect("at least one joint")
                }
            }
        }
    }

    /// Random point of a level (dyadic offsets on a `2^{-grid}` subgrid of
    /// each edge).
    pub fn random_point(&self, level: usize, rng: &mut ChaCha8Rng, grid: u32) -> DiamondPoint {
        let g = &self.levels[level].graph;
        let e = rng.gen_range(0..g.edges().len());
        let ticks = 1i64 << grid;
        let k = rng.gen_range(0..=ticks);
        DiamondPoint { edge: e, offset: &Dyadic::ratio(k, grid) * &g.edge(e).length }
    }
}

// ---------------------------------------------------------------------------
// Certification

#[derive(Debug, Clone, Serialize)]
pub struct QuasiconvexityReport {
    pub level: usize,
    pub pairs: usize,
    pub min_ratio: BigRational,
    pub max_ratio: BigRational,
    pub delta_i: BigRational,
    pub passed: bool,
}

/// Stratified sampling of `‖x-y‖ / d_i(x,y)`: same block, same parent
/// edge, and unconstrained pairs.  Exact rationals; must lie in
/// `[delta_i, 1]`.
pub fn certify_quasiconvexity(
    sys: &DiamondSystem,
    level: usize,
    samples: usize,
    seed: u64,
) -> QuasiconvexityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = &sys.levels[level].graph;
    let mut min_ratio: Option<BigRational> = None;
    let mut max_ratio: Option<BigRational> = None;
    let mut pairs = 0usize;
    let mut record = |sys: &DiamondSystem, p: &DiamondPoint, q: &DiamondPoint| {
        let d = sys.distance(level, p, q);
        if d.is_zero() {
            return false;
        }
        let norm = sup_norm(&coords_sub(
            &sys.point_coords(level, p),
            &sys.point_coords(level, q),
        ));
        let ratio = norm / d.to_rational();
        if min_ratio.as_ref().map_or(true, |m| &ratio < m) {
            min_ratio = Some(ratio.clone());
        }
        if max_ratio.as_ref().map_or(true, |m| &ratio > m) {
            max_ratio = Some(ratio);
        }
        true
    };
    let strata = samples / 3;
    // Stratum 1: both points on one edge's neighborhood (same or adjacent
    // edges — exercises the same-block case).
    while pairs < strata {
        let p = sys.random_point(level, &mut rng, 6);
        let e2 = if rng.gen_bool(0.5) {
            p.edge
        } else {
            let g2 = &sys.levels[level].graph;
            let v = if rng.gen_bool(0.5) { g2.edge(p.edge).src } else { g2.edge(p.edge).dst };
            let inc = g2.incident(v);
            inc[rng.gen_range(0..inc.len())]
        };
        let ticks = 1i64 << 6;
        let k = rng.gen_range(0..=ticks);
        let q = DiamondPoint { edge: e2, offset: &Dyadic::ratio(k, 6) * &g.edge(e2).length };
        if record(sys, &p, &q) {
            pairs += 1;
        }
    }
    // Stratum 2: vertex pairs.
    while pairs < 2 * strata {
        let e1 = rng.gen_range(0..g.edges().len());
        let e2 = rng.gen_range(0..g.edges().len());
        let p = DiamondPoint { edge: e1, offset: Dyadic::zero() };
        let q = DiamondPoint { edge: e2, offset: Dyadic::zero() };
        if record(sys, &p, &q) {
            pairs += 1;
        }
    }
    // Stratum 3: unconstrained pairs.
    while pairs < samples {
        let p = sys.random_point(level, &mut rng, 6);
        let q = sys.random_point(level, &mut rng, 6);
        if record(sys, &p, &q) {
            pairs += 1;
        }
    }
    let min_ratio = min_ratio.expect("sampled at least one pair");
    let max_ratio = max_ratio.expect("sampled at least one pair");
    let delta_i = sys.levels[level].delta_i.clone();
    let passed = min_ratio >= delta_i && max_ratio <= BigRational::one();
    QuasiconvexityReport { level, pairs, min_ratio, max_ratio, delta_i, passed }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    pub level: usize,
    pub pairs: usize,
    pub exhaustive: bool,
    pub max_ratio: BigRational,
    pub bound: BigRational,
    pub passed: bool,
}

/// Max over vertex pairs of `d_i(u,v) / ‖u-v‖`, exhaustive up to the pair
/// budget, else seeded sampling (flagged).
pub fn vertex_distortion(
    sys: &DiamondSystem,
    level: usize,
    budget: usize,
    seed: u64,
) -> DistortionReport {
    let g = &sys.levels[level].graph;
    let n = g.n_vertices();
    let vertex_point = |v: VertexId| -> DiamondPoint {
        let e = g.incident(v)[0];
        let off =
            if g.edge(e).src == v { Dyadic::zero() } else { g.edge(e).length.clone() };
        DiamondPoint { edge: e, offset: off }
    };
    let mut max_ratio = BigRational::one();
    let mut pairs = 0usize;
    let exhaustive = n * (n - 1) / 2 <= budget;
    let eval = |u: VertexId, v: VertexId, max_ratio: &mut BigRational, pairs: &mut usize| {
        if u == v {
            return;
        }
        let p = vertex_point(u);
        let q = vertex_point(v);
        let norm = sup_norm(&coords_sub(&sys.coords_of(level, u), &sys.coords_of(level, v)));
        if norm.is_zero() {
            return;
        }
        let d = sys.distance(level, &p, &q).to_rational();
        let ratio = d / norm;
        if &ratio > max_ratio {
            *max_ratio = ratio;
        }
        *pairs += 1;
    };
    if exhaustive {
        for u in 0..n {
            for v in u + 1..n {
                eval(u, v, &mut max_ratio, &mut pairs);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while pairs < budget {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                eval(u, v, &mut max_ratio, &mut pairs);
            }
        }
    }
    let bound = sys.levels[level].delta_i.recip();
    let passed = max_ratio <= bound;
    DistortionReport { level, pairs, exhaustive, max_ratio, bound, passed }
}

impl DiamondSystem {
    fn coords_of(&self, level: usize, v: VertexId) -> Coords {
        self.levels[level].coords[v].clone()
    }
}

// ---------------------------------------------------------------------------
// Axiom checks

#[derive(Debug, Clone, Serialize)]
pub struct DiamondCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(out: &mut Vec<DiamondCheck>, name: &str, passed: bool, detail: String) {
    out.push(DiamondCheck { name: name.to_string(), passed, detail });
}

/// Structural verification of the generalized-diamond axioms, the two
/// segment properties, and the measure rules.
pub fn check_d_axioms(sys: &DiamondSystem) -> Vec<DiamondCheck> {
    let mut out = Vec::new();

    // Base level: one unit edge.
    let base = &sys.levels[0];
    check(
        &mut out,
        "base-segment",
        base.graph.n_vertices() == 2
            && base.graph.edges().len() == 1
            && base.graph.edge(0).length == Dyadic::one(),
        "base level is a single unit segment".into(),
    );

    // Vertex persistence: coarse vertices keep their ids and coordinates.
    let mut persist = true;
    let mut persist_detail = String::from("coarse vertices persist with equal coordinates");
    for (i, step) in sys.steps.iter().enumerate() {
        let coarse = &sys.levels[i];
        let fine = &sys.levels[i + 1];
        for v in 0..coarse.graph.n_vertices() {
            if fine.coords[v] != coarse.coords[v] {
                persist = false;
                persist_detail = format!("step {i}: vertex {v} moved");
            }
        }
        let _ = step;
    }
    check(&mut out, "vertex-persistence", persist, persist_detail);

    // Grid fibers: one or two vertices, no two adjacent doubled fibers,
    // terminal grid subedges with single-edge preimages, and per-edge
    // isometry (all child edges have the common subdivided length).
    let mut fibers_ok = true;
    let mut fibers_detail = String::from("grid fibers of size 1 or 2 with isolation");
    let mut terminal_ok = true;
    let mut terminal_detail = String::from("terminal grid subedges lift to single edges");
    let mut iso_ok = true;
    for (i, step) in sys.steps.iter().enumerate() {
        let coarse = &sys.levels[i];
        let fine = &sys.levels[i + 1];
        let child_len = fine.graph.edge(0).length.clone();
        for e in fine.graph.edges() {
            if e.length != child_len {
                iso_ok = false;
            }
        }
        // Count fiber sizes per grid slot (parent edge, grid index).
        let mut fiber: HashMap<(EdgeId, String), usize> = HashMap::new();
        for v in coarse.graph.n_vertices()..fine.graph.n_vertices() {
            let (pe, off) = &step.vertex_proj[v];
            *fiber.entry((*pe, format!("{off}"))).or_insert(0) += 1;
        }
        let slots = 1u64 << step.m_i;
        for e in 0..coarse.graph.edges().len() {
            let len = &coarse.graph.edge(e).length;
            let unit = len.halve(step.m_i);
            let mut prev_doubled = false;
            for k in 1..slots {
                let off = &unit * &Dyadic::from_int(k as i64);
                let size = fiber.get(&(e, format!("{off}"))).copied().unwrap_or(0);
                if size == 0 || size > 2 {
                    fibers_ok = false;
                    fibers_detail = format!("step {i}: edge {e} slot {k} fiber size {size}");
                }
                if size == 2 && prev_doubled {
                    fibers_ok = false;
                    fibers_detail = format!("step {i}: edge {e} adjacent doubled fibers at {k}");
                }
                prev_doubled = size == 2;
            }
        }
        // Terminal grid subedges: preimage single (they lie on identity
        // chains); equivalently no block child starts at offset 0 or ends
        // at the parent length.
        for (c, info) in step.child_info.iter().enumerate() {
            if let ChildInfo::Block { parent, block_lo, pos, .. } = info {
                let lo = block_lo + &(&child_len * &Dyadic::from_int(*pos as i64));
                let hi = &lo + &child_len;
                if lo.is_zero() || hi == coarse.graph.edge(*parent).length {
                    terminal_ok = false;
                    terminal_detail = format!("step {i}: child {c} block touches the edge end");
                }
            }
        }
    }
    check(&mut out, "edge-isometry", iso_ok, "projection isometric on every edge".into());
    check(&mut out, "grid-fibers", fibers_ok, fibers_detail);
    check(&mut out, "terminal-single-lift", terminal_ok, terminal_detail);

    // Measures: total mass one per level; block children carry half the
    // parent density, chain children the full density.
    let mut measure_ok = true;
    let mut measure_detail = String::from("measure recursion exact; total mass 1 per level");
    for (i, lev) in sys.levels.iter().enumerate() {
        if lev.graph.total_measure() != Dyadic::one() {
            measure_ok = false;
            measure_detail = format!("level {i}: total measure != 1");
        }
    }
    for (i, step) in sys.steps.iter().enumerate() {
        let coarse = &sys.levels[i];
        let fine = &sys.levels[i + 1];
        for (c, info) in step.child_info.iter().enumerate() {
            let w = &fine.graph.edge(c).weight;
            let expect = match info {
                ChildInfo::Terminal { parent, .. } => coarse.graph.edge(*parent).weight.clone(),
                ChildInfo::Block { parent, .. } => coarse.graph.edge(*parent).weight.halve(1),
            };
            if w != &expect {
                measure_ok = false;
                measure_detail = format!("step {i}: child {c} density wrong");
            }
        }
    }
    check(&mut out, "measure-recursion", measure_ok, measure_detail);

    // Degree-4 proximity: every middle-half child edge has an endpoint
    // within one hop of a degree-4 vertex (so every point of the preimage
    // is within two edge lengths).
    let mut prox_ok = true;
    let mut prox_detail = String::from("middle-half preimages within 2 edges of a degree-4 vertex");
    let mut worst = 0usize;
    for (i, step) in sys.steps.iter().enumerate() {
        let fine = &sys.levels[i + 1];
        let degree: Vec<usize> =
            (0..fine.graph.n_vertices()).map(|v| fine.graph.incident(v).len()).collect();
        let near_deg4 = |v: VertexId| -> usize {
            if degree[v] == 4 {
                return 0;
            }
            for &e in fine.graph.incident(v) {
                let other = if fine.graph.edge(e).src == v {
                    fine.graph.edge(e).dst
                } else {
                    fine.graph.edge(e).src
                };
                if degree[other] == 4 {
                    return 1;
                }
            }
            2
        };
        for (c, info) in step.child_info.iter().enumerate() {
            if let ChildInfo::Block { .. } = info {
                let e = fine.graph.edge(c);
                let hops = near_deg4(e.src).min(near_deg4(e.dst));
                worst = worst.max(hops + 1);
                if hops > 1 {
                    prox_ok = false;
                    prox_detail = format!("step {i}: child {c} farther than 2 edges");
                }
            }
        }
    }
    check(&mut out, "degree-four-proximity", prox_ok, format!("{prox_detail} (worst {worst})"));

    // Segment properties: straight edges of equal length parallel to
    // `(c, 1)` scaled by the level edge length.
    let mut seg_ok = true;
    let mut seg_detail = String::from("edges parallel to (direction, 1) at the level scale");
    for (i, lev) in sys.levels.iter().enumerate() {
        let scale = Dyadic::one().halve(lev.n_i).to_rational();
        for (e, edge) in lev.graph.edges().iter().enumerate() {
            let disp = coords_sub(&lev.coords[edge.dst], &lev.coords[edge.src]);
            let c = &sys.dir_table[lev.edge_dir[e]];
            let mut expect: Coords = c.iter().map(|x| x * &scale).collect();
            expect.push(scale.clone());
            if disp != expect {
                seg_ok = false;
                seg_detail = format!("level {i}: edge {e} displacement mismatch");
            }
        }
    }
    check(&mut out, "segment-direction", seg_ok, seg_detail);

    // Quasiconvexity constants stay above the global delta.
    let floor_ok = sys.levels.iter().all(|l| l.delta_i > sys.delta);
    check(
        &mut out,
        "delta-floor",
        floor_ok,
        "per-level constants exceed the global delta".into(),
    );

    out
}

// ---------------------------------------------------------------------------
// Projection properties

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionReport {
    pub level: usize,
    pub pairs: usize,
    /// Projection never increases distances (1-Lipschitz), sampled.
    pub lipschitz_ok: bool,
    /// Distance preserved when the projections leave the shared block,
    /// sampled.
    pub samedist_ok: bool,
    /// Max fiber displacement (must be at most one intermediate edge).
    pub max_fiber_displacement: BigRational,
    pub fiber_bound: BigRational,
}

pub fn check_projection(
    sys: &DiamondSystem,
    j: usize,
    samples: usize,
    seed: u64,
) -> ProjectionReport {
    assert!(j >= 1);
    let step = &sys.steps[j - 1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lipschitz_ok = true;
    let mut samedist_ok = true;
    let mut pairs = 0;
    while pairs < samples {
        let p = sys.random_point(j, &mut rng, 5);
        let q = sys.random_point(j, &mut rng, 5);
        let d_fine = sys.distance(j, &p, &q);
        if d_fine.is_zero() {
            continue;
        }
        pairs += 1;
        let d_coarse = sys.distance(j - 1, &sys.project(j, &p), &sys.project(j, &q));
        if d_coarse > d_fine {
            lipschitz_ok = false;
        }
        let key = |pt: &DiamondPoint| match &step.child_info[pt.edge] {
            ChildInfo::Terminal { parent, side, .. } => (*parent, *side as u32, true),
            ChildInfo::Block { parent, block, .. } => (*parent, *block, false),
        };
        if key(&p) != key(&q) && d_coarse != d_fine {
            samedist_ok = false;
        }
    }
    // Fiber displacement: distance between a vertex and its projection.
    let coarse = &sys.levels[j - 1];
    let mut max_disp = BigRational::zero();
    for v in 0..sys.levels[j].graph.n_vertices() {
        let (pe, off) = &step.vertex_proj[v];
        let target = sys.point_coords(j - 1, &DiamondPoint { edge: *pe, offset: off.clone() });
        let disp = sup_norm(&coords_sub(&sys.levels[j].coords[v], &target));
        if disp > max_disp {
            max_disp = disp;
        }
    }
    let fiber_bound = coarse.graph.edge(0).length.halve(step.n_subdiv + 1).to_rational();
    ProjectionReport {
        level: j,
        pairs,
        lipschitz_ok,
        samedist_ok,
        max_fiber_displacement: max_disp,
        fiber_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    fn tiny_witness() -> ConvexWitness {
        ConvexWitness {
            c: vec![r(0, 1)],
            branches: vec![vec![r(1, 2)], vec![r(-1, 2)]],
            n_c: 1,
            delta_c: r(1, 8),
        }
    }

    // Fixture table and a hand witness validate.
    #[test]
    fn witness_validation_accepts() {
        assert_eq!(fixture_witness_table().validate().unwrap(), 1);
        tiny_witness().validate(1).unwrap();
    }

    // Each invariant violation is rejected with a message naming it.
    #[test]
    fn witness_validation_rejects() {
        let mut w = tiny_witness();
        w.branches[0] = vec![r(1, 4)];
        let err = format!("{}", w.validate(1).unwrap_err());
        assert!(err.contains("separation"), "{err}");

        let mut w = tiny_witness();
        w.branches = vec![vec![r(3, 4)], vec![r(-1, 2)]];
        let err = format!("{}", w.validate(1).unwrap_err());
        assert!(err.contains("average"), "{err}");

        let mut w = tiny_witness();
        w.branches[0] = vec![r(3, 2)];
        let err = format!("{}", w.validate(1).unwrap_err());
        assert!(err.contains("unit ball"), "{err}");

        let mut w = tiny_witness();
        w.delta_c = r(3, 4);
        let err = format!("{}", w.validate(1).unwrap_err());
        assert!(err.contains("1/2"), "{err}");
    }

    // Model graph coordinates for the tiny witness at unit scale,
    // computed by hand from the displacement recursions.
    #[test]
    fn model_graph_hand_coordinates() {
        let w = tiny_witness();
        let origin = vec![r(0, 1), r(0, 1)];
        let model = build_model_graph(&w, &Dyadic::one(), &origin).unwrap();
        assert_eq!(model.graph.n_vertices(), 7);
        assert_eq!(model.graph.edges().len(), 8);
        assert_eq!(model.gamma0.len(), 4);
        assert_eq!(model.gamma1.len(), 4);
        // Path 0: (0,0) -> (0,1/4) -> (1/8,1/2) -> (1/8,3/4) -> (0,1).
        let want = [
            vec![r(0, 1), r(0, 1)],  // joint 0
            vec![r(0, 1), r(1, 4)],  // v_1'
            vec![r(1, 8), r(1, 4)],  // w_1'
            vec![r(1, 8), r(1, 2)],  // joint 1
            vec![r(1, 8), r(3, 4)],  // v_2'
            vec![r(0, 1), r(3, 4)],  // w_2'
            vec![r(0, 1), r(1, 1)],  // joint 2 = origin + (c, 1)
        ];
        for (i, c) in want.iter().enumerate() {
            assert_eq!(&model.coords[i], c, "vertex {i}");
        }
        // Grid projection: joints to even slots, primed vertices doubled at
        // odd slots.
        assert_eq!(model.proj, vec![0, 1, 1, 2, 3, 3, 4]);
        // Every edge has length 2^{-(n_c+1)} = 1/4 and the displacement of
        // each edge has sup-norm equal to its length (unit height speed).
        for e in model.graph.edges() {
            assert_eq!(e.length, Dyadic::one().halve(2));
            let disp = coords_sub(&model.coords[e.dst], &model.coords[e.src]);
            assert_eq!(sup_norm(&disp), e.length.to_rational());
        }
    }

    // Worked subdivision exponent: delta = 1/5 and current constant
    // 1/4 give mid-value 9/40, slack 1/160, so the minimal exponent is 8.
    #[test]
    fn subdivision_exponent_hand_value() {
        assert_eq!(compute_subdivision_exponent(&r(1, 5), &r(1, 4)), 8);
        // Looser constants from the two-level fixture run.
        assert_eq!(compute_subdivision_exponent(&r(1, 8), &r(1, 1)), 4);
        assert_eq!(compute_subdivision_exponent(&r(1, 8), &r(1, 4)), 6);
    }

    // The normalized parallelogram with c = 0, branch 4/5 is
    // 1/5-quasiconvex; the two mid-vertices realize sup-distance 4/5 at
    // intrinsic distance 2 (ratio 2/5).
    #[test]
    fn parallelogram_certification() {
        let w = ConvexWitness {
            c: vec![r(0, 1)],
            branches: vec![vec![r(4, 5)], vec![r(-4, 5)]],
            n_c: 1,
            delta_c: r(1, 5),
        };
        w.validate(1).unwrap();
        let rep = certify_parallelogram(&w, 0, 8);
        assert!(rep.passed, "min ratio {}", rep.min_ratio);
        assert!(rep.min_ratio >= r(1, 5));
        // The opposite mid-vertices: x = (c,1) at cycle position 1, y =
        // (c_j,1) at cycle position 3.
        let x = vec![r(0, 1), r(1, 1)];
        let y = vec![r(4, 5), r(1, 1)];
        assert_eq!(sup_norm(&coords_sub(&x, &y)), r(4, 5));
    }

    fn one_level() -> DiamondSystem {
        build_generalized_diamond(&fixture_witness_table(), &r(1, 1), 1).unwrap()
    }

    // Size bookkeeping for one fixture level: exponent 4, so 64
    // chain edges, 16 blocks of 8 edges, edge length 2^-7.
    #[test]
    fn one_level_sizes() {
        let sys = one_level();
        assert_eq!(sys.chosen_n, vec![4]);
        let lev = &sys.levels[1];
        assert_eq!(lev.n_i, 7);
        assert_eq!(lev.graph.edges().len(), 64 + 16 * 8);
        assert_eq!(lev.delta_i, r(1, 4));
        // Direction table now covers the vertical plus both branches.
        assert_eq!(sys.dir_table.len(), 3);
    }

    // Structural axioms pass on a fresh build.
    #[test]
    fn d_axioms_pass() {
        let sys = one_level();
        let checks = check_d_axioms(&sys);
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert!(checks.len() >= 8);
    }

    // Breadth-first hop count oracle: all edges share one length, so the
    // graph distance between vertices is hops * edge length.
    fn bfs_hops(g: &MetricGraph, src: VertexId) -> Vec<usize> {
        let mut dist = vec![usize::MAX; g.n_vertices()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            for &e in g.incident(v) {
                let edge = g.edge(e);
                let other = if edge.src == v { edge.dst } else { edge.src };
                if dist[other] == usize::MAX {
                    dist[other] = dist[v] + 1;
                    queue.push_back(other);
                }
            }
        }
        dist
    }

    // The level recursion reproduces breadth-first search
    // distances between vertices of the one-level build.
    #[test]
    fn distance_matches_bfs() {
        let sys = one_level();
        let g = &sys.levels[1].graph;
        let edge_len = g.edge(0).length.clone();
        let vertex_point = |v: VertexId| -> DiamondPoint {
            let e = g.incident(v)[0];
            let off = if g.edge(e).src == v { Dyadic::zero() } else { g.edge(e).length.clone() };
            DiamondPoint { edge: e, offset: off }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let src = rng.gen_range(0..g.n_vertices());
            let hops = bfs_hops(g, src);
            for _ in 0..20 {
                let dst = rng.gen_range(0..g.n_vertices());
                let want = &edge_len * &Dyadic::from_int(hops[dst] as i64);
                let got = sys.distance(1, &vertex_point(src), &vertex_point(dst));
                assert_eq!(got, want, "distance {src} -> {dst}");
            }
        }
    }

    // Exact quasiconvexity certification at level one.
    #[test]
    fn quasiconvexity_level_one() {
        let sys = one_level();
        let rep = certify_quasiconvexity(&sys, 1, 240, 11);
        assert!(rep.passed, "min {} max {}", rep.min_ratio, rep.max_ratio);
        assert!(rep.min_ratio >= r(1, 4));
        assert!(rep.max_ratio <= r(1, 1));
    }

    // Vertex pairs distort by at most the inverse constant.
    #[test]
    fn vertex_distortion_bounded() {
        let sys = one_level();
        let rep = vertex_distortion(&sys, 1, 20_000, 3);
        assert!(rep.passed, "max {} bound {}", rep.max_ratio, rep.bound);
    }

    // Projection is 1-Lipschitz, preserves distances across
    // blocks, and moves vertices at most one block length.
    #[test]
    fn projection_properties() {
        let sys = one_level();
        let rep = check_projection(&sys, 1, 200, 5);
        assert!(rep.lipschitz_ok);
        assert!(rep.samedist_ok);
        assert!(rep.max_fiber_displacement <= rep.fiber_bound);
    }

    // Corrupting one doubled-vertex pairing makes the grid-fiber
    // check fail by name.
    #[test]
    fn corrupted_pairing_detected() {
        let mut sys = one_level();
        // Find a doubled vertex (a mid-parallelogram vertex) and shift its
        // recorded projection by one grid slot.
        let step = &mut sys.steps[0];
        let child_len = sys.levels[1].graph.edge(0).length.clone();
        let victim = step
            .child_info
            .iter()
            .position(|c| matches!(c, ChildInfo::Block { .. }))
            .unwrap();
        let v = sys.levels[1].graph.edge(victim).dst;
        let (e, off) = step.vertex_proj[v].clone();
        step.vertex_proj[v] = (e, &off + &child_len);
        let checks = check_d_axioms(&sys);
        let fiber = checks.iter().find(|c| c.name == "grid-fibers").unwrap();
        assert!(!fiber.passed, "corruption should be caught: {}", fiber.detail);
        for c in &checks {
            if c.name != "grid-fibers" {
                assert!(c.passed, "{} unexpectedly failed: {}", c.name, c.detail);
            }
        }
    }
}
