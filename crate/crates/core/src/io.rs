//! Serialization and export: JSON round-trips for systems and functions,
//! plus DOT, CSV, and SVG renderings.
//!
//! JSON carries dyadic numbers as `"p/2^k"` strings and general rationals
//! as `"p/q"` strings, so files are exact and human-readable.

use std::fmt::Write as _;
use std::path::Path;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::banach::DiamondSystem;
use crate::calculus::PLFunction;
use crate::dyadic::Dyadic;
use crate::graph::MetricGraph;
use crate::system::{compute_deltas, InverseSystem};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure: {0}")]
    File(#[from] std::io::Error),
    #[error("json failure: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad rational string: {0}")]
    BadRational(String),
    #[error("svg refused: {0} vertices exceed the budget of {1}")]
    SvgBudget(usize, usize),
}

/// On-disk wrapper distinguishing the two system representations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SystemFile {
    #[serde(rename = "inverse")]
    Inverse(InverseSystem),
    #[serde(rename = "diamond")]
    Diamond(DiamondSystem),
}

impl SystemFile {
    /// Rebuilds the derived incidence lists skipped by serialization.
    pub fn restore(&mut self) {
        match self {
            SystemFile::Inverse(sys) => {
                for g in &mut sys.levels {
                    g.rebuild_incidence();
                }
            }
            SystemFile::Diamond(sys) => {
                for lev in &mut sys.levels {
                    lev.graph.rebuild_incidence();
                }
            }
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_system(path: &Path) -> Result<SystemFile, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut file: SystemFile = serde_json::from_str(&text)?;
    file.restore();
    Ok(file)
}

// ---------------------------------------------------------------------------
// Function files

/// Function JSON: values stored as exact `"p/q"` strings per vertex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionFile {
    pub level: usize,
    pub dim: usize,
    pub vertex_values: Vec<Vec<String>>,
}

fn rational_to_string(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

fn rational_from_string(s: &str) -> Result<BigRational, IoError> {
    let bad = || IoError::BadRational(s.to_string());
    match s.split_once('/') {
        Some((num, den)) => {
            let n = num.trim().parse().map_err(|_| bad())?;
            let d = den.trim().parse().map_err(|_| bad())?;
            Ok(BigRational::new(n, d))
        }
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            Ok(BigRational::from_integer(n))
        }
    }
}

impl FunctionFile {
    pub fn from_function(f: &PLFunction) -> Self {
        FunctionFile {
            level: f.level,
            dim: f.dim,
            vertex_values: f
                .values
                .iter()
                .map(|v| v.iter().map(rational_to_string).collect())
                .collect(),
        }
    }

    pub fn to_function(&self) -> Result<PLFunction, IoError> {
        let mut values = Vec::with_capacity(self.vertex_values.len());
        for row in &self.vertex_values {
            values.push(row.iter().map(|s| rational_from_string(s)).collect::<Result<_, _>>()?);
        }
        Ok(PLFunction { level: self.level, dim: self.dim, values })
    }
}

pub fn read_function(path: &Path) -> Result<PLFunction, IoError> {
    let text = std::fs::read_to_string(path)?;
    let file: FunctionFile = serde_json::from_str(&text)?;
    file.to_function()
}

// ---------------------------------------------------------------------------
// DOT

/// Graphviz rendering of one level: directed edges labelled with exact
/// length and density.
pub fn export_dot(g: &MetricGraph) -> String {
    let mut out = String::from("digraph level {\n  rankdir=LR;\n  node [shape=point];\n");
    for (id, e) in g.edges().iter().enumerate() {
        let _ = writeln!(
            out,
            "  v{} -> v{} [label=\"e{} len={} w={}\"];",
            e.src, e.dst, id, e.length, e.weight
        );
    }
    out.push_str("}\n");
    out
}

// ---------------------------------------------------------------------------
// CSV

/// Edge table for one level.
pub fn export_csv_edges(g: &MetricGraph) -> String {
    let mut out = String::from("edge,src,dst,length,weight\n");
    for (id, e) in g.edges().iter().enumerate() {
        let _ = writeln!(out, "{id},{},{},{},{}", e.src, e.dst, e.length, e.weight);
    }
    out
}

/// Constants table: per level the mesh ratio, the distance-gap ratio, the
/// declared constants, and the shortest edge length.
pub fn export_csv_constants(sys: &InverseSystem) -> String {
    let mut out = String::from("level,delta_e,delta_d,alpha,beta,min_edge_length\n");
    for i in 0..sys.levels.len() {
        let (de, dd) = if i >= 1 {
            match compute_deltas(sys, i - 1) {
                Ok(rep) => (rep.delta_e.to_string(), rep.delta_d.to_string()),
                Err(_) => ("-".into(), "-".into()),
            }
        } else {
            ("-".into(), "-".into())
        };
        let min_len = sys.levels[i]
            .edges()
            .iter()
            .map(|e| e.length.clone())
            .min()
            .unwrap_or_else(Dyadic::zero);
        let _ = writeln!(
            out,
            "{i},{de},{dd},{},{},{}",
            sys.constants.alpha, sys.constants.beta, min_len
        );
    }
    out
}

// ---------------------------------------------------------------------------
// SVG

/// Planar sketch of a level.  The horizontal axis is the base-interval
/// position of each vertex; vertical positions are relaxed so neighbours
/// spread apart, and every edge is drawn as a curve bowed by its id parity
/// so parallel edges stay visible.  Refused above the vertex budget.
pub fn export_svg(
    sys: &InverseSystem,
    level: usize,
    budget: usize,
) -> Result<String, IoError> {
    let g = &sys.levels[level];
    let n = g.n_vertices();
    if n > budget {
        return Err(IoError::SvgBudget(n, budget));
    }
    // Horizontal coordinate: position of the vertex's projection on the
    // base interval.
    let mut xs = vec![0.0f64; n];
    for v in 0..n {
        let p = crate::graph::GraphPoint::Vertex(v);
        xs[v] = sys.base_position(level, &p).to_f64();
    }
    // Vertical coordinate: iterative neighbour averaging with a parity
    // bias, anchored at zero mean, purely deterministic.
    let mut ys = vec![0.0f64; n];
    for (id, e) in g.edges().iter().enumerate() {
        let bias = if id % 2 == 0 { 1.0 } else { -1.0 };
        ys[e.src] += 0.05 * bias;
        ys[e.dst] -= 0.05 * bias;
    }
    for _ in 0..120 {
        let mut next = vec![0.0f64; n];
        let mut deg = vec![0.0f64; n];
        for (id, e) in g.edges().iter().enumerate() {
            let bias = if id % 2 == 0 { 0.02 } else { -0.02 };
            next[e.src] += ys[e.dst] + bias;
            next[e.dst] += ys[e.src] - bias;
            deg[e.src] += 1.0;
            deg[e.dst] += 1.0;
        }
        for v in 0..n {
            if deg[v] > 0.0 {
                ys[v] = 0.7 * ys[v] + 0.3 * (next[v] / deg[v]);
            }
        }
    }
    let (w, h) = (800.0, 400.0);
    let y_span = ys.iter().fold(0.05f64, |m, y| m.max(y.abs()));
    let px = |x: f64| 40.0 + x * (w - 80.0);
    let py = |y: f64| h / 2.0 - y / y_span * (h / 2.0 - 40.0);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    );
    for (id, e) in g.edges().iter().enumerate() {
        let (x1, y1) = (px(xs[e.src]), py(ys[e.src]));
        let (x2, y2) = (px(xs[e.dst]), py(ys[e.dst]));
        let bow = if id % 2 == 0 { -12.0 } else { 12.0 };
        let (cx, cy) = ((x1 + x2) / 2.0, (y1 + y2) / 2.0 + bow);
        let _ = writeln!(
            out,
            "  <path d=\"M {x1:.2} {y1:.2} Q {cx:.2} {cy:.2} {x2:.2} {y2:.2}\" \
             fill=\"none\" stroke=\"#334\" stroke-width=\"1\"/>"
        );
    }
    for v in 0..n {
        let _ = writeln!(
            out,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"#c33\"/>",
            px(xs[v]),
            py(ys[v])
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laakso::build_laakso;

    // JSON round-trip is structurally exact.
    #[test]
    fn system_json_round_trip() {
        let sys = build_laakso(2).unwrap();
        let text = serde_json::to_string(&SystemFile::Inverse(sys.clone())).unwrap();
        let mut back: SystemFile = serde_json::from_str(&text).unwrap();
        back.restore();
        let SystemFile::Inverse(b) = back else { panic!("wrong kind") };
        assert_eq!(serde_json::to_string(&b).unwrap(), serde_json::to_string(&sys).unwrap());
        assert_eq!(b.levels[2].edges().len(), sys.levels[2].edges().len());
        // Incidence restored: every vertex of a connected level has degree.
        for v in 0..b.levels[1].n_vertices() {
            assert!(!b.levels[1].incident(v).is_empty());
        }
    }

    // Function files carry exact rationals both ways.
    #[test]
    fn function_json_round_trip() {
        let f = PLFunction {
            level: 1,
            dim: 2,
            values: vec![
                vec![
                    BigRational::new(3.into(), 7.into()),
                    BigRational::new((-1).into(), 2.into()),
                ],
                vec![BigRational::from_integer(4.into()), BigRational::new(0.into(), 1.into())],
            ],
        };
        let file = FunctionFile::from_function(&f);
        let back = file.to_function().unwrap();
        assert_eq!(back.values, f.values);
        assert!(rational_from_string("oops").is_err());
    }

    // The first subdivided level has 4 edges and 4 vertices;
    // both appear in the DOT and CSV output.
    #[test]
    fn dot_and_csv_counts() {
        let sys = build_laakso(1).unwrap();
        let g = &sys.levels[1];
        assert_eq!(g.edges().len(), 4);
        assert_eq!(g.n_vertices(), 4);
        let dot = export_dot(g);
        assert_eq!(dot.matches("->").count(), 4);
        let csv = export_csv_edges(g);
        assert_eq!(csv.lines().count(), 5); // header + 4 edges
        let consts = export_csv_constants(&sys);
        assert!(consts.lines().count() >= 2);
        let header = consts.lines().next().unwrap();
        for col in ["delta_e", "delta_d", "alpha", "beta", "min_edge_length"] {
            assert!(header.contains(col));
        }
    }

    // SVG renders small levels and refuses large ones.
    #[test]
    fn svg_budget() {
        let sys = build_laakso(3).unwrap();
        let svg = export_svg(&sys, 1, 2000).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<path"));
        let err = export_svg(&sys, 3, 10).unwrap_err();
        assert!(matches!(err, IoError::SvgBudget(_, 10)));
    }
}
