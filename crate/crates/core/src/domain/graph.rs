use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::positions::{dist, dot, lerp, scale, sub, Positions};

/// Three polyline arcs sharing the endpoints `q-` (first sample) and `q+`
/// (last sample), each parameterized by normalized arclength.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGraph {
    arcs: [Positions; 3],
    cumulative: [Vec<f64>; 3],
}

#[derive(Serialize, Deserialize)]
struct GraphDocument {
    arcs: Vec<Vec<Vec<f64>>>,
    dimension: usize,
}

impl BoundaryGraph {
    pub fn new(arcs: [Positions; 3]) -> Result<Self> {
        let dim = arcs[0].dim();
        if arcs.iter().any(|a| a.dim() != dim) {
            return invalid("arcs have different dimensions");
        }
        for (i, a) in arcs.iter().enumerate() {
            if a.len() < 2 {
                return invalid(format!("arc {i} needs at least two samples"));
            }
            if a.get(0) != arcs[0].get(0) || a.get(a.len() - 1) != arcs[0].get(arcs[0].len() - 1) {
                return invalid(format!("arc {i} does not share the endpoints q- and q+"));
            }
        }
        let cumulative = [0, 1, 2].map(|i| cumulative_length(&arcs[i]));
        for (i, c) in cumulative.iter().enumerate() {
            if c.windows(2).any(|w| !(w[1] > w[0])) {
                return invalid(format!("arc {i} has a zero-length segment"));
            }
            if !is_simple(&arcs[i]) {
                return invalid(format!("arc {i} is not a simple polyline"));
            }
        }
        Ok(Self { arcs, cumulative })
    }

    /// Samples `samples + 1` points per arc from parametric curves on [0, 1].
    pub fn from_fns(dim: usize, samples: usize, arcs: [&dyn Fn(f64) -> Vec<f64>; 3]) -> Result<Self> {
        let build = |f: &dyn Fn(f64) -> Vec<f64>| {
            Positions::from_rows(dim, (0..=samples).map(|k| f(k as f64 / samples as f64)))
        };
        Self::new([build(arcs[0]), build(arcs[1]), build(arcs[2])])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text)?;
        if doc.arcs.len() != 3 {
            return Err(Error::Parse(format!("expected 3 arcs, found {}", doc.arcs.len())));
        }
        let mut arcs = Vec::with_capacity(3);
        for arc in doc.arcs {
            if arc.iter().any(|p| p.len() != doc.dimension) {
                return Err(Error::Parse("point dimension does not match \"dimension\"".into()));
            }
            arcs.push(Positions::from_rows(doc.dimension, arc));
        }
        let arcs: [Positions; 3] = arcs.try_into().expect("three arcs");
        Self::new(arcs)
    }

    pub fn to_json(&self) -> String {
        let doc = GraphDocument {
            dimension: self.dim(),
            arcs: self.arcs.iter().map(|a| a.iter().map(<[f64]>::to_vec).collect()).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("graph serializes")
    }

    pub fn dim(&self) -> usize {
        self.arcs[0].dim()
    }

    pub fn arc(&self, i: usize) -> &Positions {
        &self.arcs[i]
    }

    pub fn q_minus(&self) -> &[f64] {
        self.arcs[0].get(0)
    }

    pub fn q_plus(&self) -> &[f64] {
        self.arcs[0].get(self.arcs[0].len() - 1)
    }

    pub fn length(&self, arc: usize) -> f64 {
        *self.cumulative[arc].last().unwrap()
    }

    fn segment(&self, arc: usize, t: f64) -> (usize, f64) {
        let c = &self.cumulative[arc];
        let s = t.clamp(0.0, 1.0) * c[c.len() - 1];
        let k = c.partition_point(|&v| v <= s).clamp(1, c.len() - 1) - 1;
        (k, ((s - c[k]) / (c[k + 1] - c[k])).clamp(0.0, 1.0))
    }

    /// Point at arclength fraction `t`. The endpoints are returned exactly.
    pub fn eval(&self, arc: usize, t: f64) -> Vec<f64> {
        let a = &self.arcs[arc];
        if t <= 0.0 {
            return a.get(0).to_vec();
        }
        if t >= 1.0 {
            return a.get(a.len() - 1).to_vec();
        }
        let (k, u) = self.segment(arc, t);
        lerp(a.get(k), a.get(k + 1), u)
    }

    /// Derivative of `eval` with respect to `t`. At a sample point the two
    /// adjacent segment directions are averaged.
    pub fn tangent(&self, arc: usize, t: f64) -> Vec<f64> {
        let a = &self.arcs[arc];
        let c = &self.cumulative[arc];
        let total = c[c.len() - 1];
        let seg_dir = |k: usize| scale(&sub(a.get(k + 1), a.get(k)), total / (c[k + 1] - c[k]));
        let (k, u) = self.segment(arc, t);
        let n = a.len();
        if u < 1e-12 && k > 0 {
            return lerp(&seg_dir(k - 1), &seg_dir(k), 0.5);
        }
        if u > 1.0 - 1e-12 && k + 2 < n {
            return lerp(&seg_dir(k), &seg_dir(k + 1), 0.5);
        }
        seg_dir(k)
    }
}

fn cumulative_length(p: &Positions) -> Vec<f64> {
    let mut c = vec![0.0; p.len()];
    for i in 1..p.len() {
        c[i] = c[i - 1] + dist(p.get(i - 1), p.get(i));
    }
    c
}

/// Distance between segments [a0,a1] and [b0,b1] in R^n.
pub(crate) fn segment_distance(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64]) -> f64 {
    let d1 = sub(a1, a0);
    let d2 = sub(b1, b0);
    let r = sub(a0, b0);
    let (a, e, f) = (dot(&d1, &d1), dot(&d2, &d2), dot(&d2, &r));
    let c = dot(&d1, &r);
    let b = dot(&d1, &d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-300 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    dist(&lerp(a0, a1, s), &lerp(b0, b1, t))
}

fn is_simple(p: &Positions) -> bool {
    let n = p.len();
    let closed = p.get(0) == p.get(n - 1);
    for i in 0..n - 1 {
        for j in i + 2..n - 1 {
            if closed && i == 0 && j == n - 2 {
                continue;
            }
            if segment_distance(p.get(i), p.get(i + 1), p.get(j), p.get(j + 1)) < 1e-13 {
                return false;
            }
        }
    }
    true
}
