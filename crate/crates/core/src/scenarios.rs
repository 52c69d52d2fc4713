//! Reference configurations with known answers: the flat Y (three half-planes
//! at 120 degrees around the x-axis) and variants used by tests, benches and
//! the command-line fixtures.

use std::f64::consts::PI;

use crate::domain::{build_glued_domain, build_half_disk_mesh, BoundaryGraph, CorrespondencePolicy, GluedDomain, GluingData, PiecewiseMap};
use crate::error::Result;

/// Unit directions of the three half-planes of the flat Y, in the plane
/// orthogonal to the x-axis.
pub fn flat_y_frames() -> [[f64; 3]; 3] {
    frames_at_angles([0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0])
}

/// Half-plane directions at the given angles around the x-axis.
pub fn frames_at_angles(angles: [f64; 3]) -> [[f64; 3]; 3] {
    angles.map(|a| [0.0, a.cos(), a.sin()])
}

/// Three congruent arcs from (-1,0,0) to (1,0,0), arc `i` being the half
/// ellipse `-cos(pi s) e_x + height sin(pi s) n_i`. `height = 1` gives
/// semicircles. Each arc is sampled at `samples + 1` points.
pub fn flat_y_graph(height: f64, samples: usize) -> Result<BoundaryGraph> {
    graph_in_frames(flat_y_frames(), height, samples)
}

pub fn graph_in_frames(frames: [[f64; 3]; 3], height: f64, samples: usize) -> Result<BoundaryGraph> {
    let arc = |n: [f64; 3]| {
        move |s: f64| {
            let (mut sn, cs) = (PI * s).sin_cos();
            if s == 0.0 || s == 1.0 {
                sn = 0.0;
            }
            vec![-cs, height * sn * n[1], height * sn * n[2]]
        }
    };
    let (a, b, c) = (arc(frames[0]), arc(frames[1]), arc(frames[2]));
    BoundaryGraph::from_fns(3, samples, [&a, &b, &c])
}

/// Three copies of the half-disk mesh glued along their diameters.
pub fn half_disk_domain(radial: usize, angular: usize) -> Result<GluedDomain> {
    let m = build_half_disk_mesh(radial, angular)?;
    build_glued_domain([m.clone(), m.clone(), m], &CorrespondencePolicy::Identity)
}

/// The flat embedding: sheet `i` sends `(x, y)` to `x e_x + y n_i`.
pub fn affine_y_map(domain: &GluedDomain, gluing: &GluingData, frames: [[f64; 3]; 3]) -> PiecewiseMap {
    PiecewiseMap::from_fn(domain, gluing, 3, |i, p| {
        let n = frames[i];
        vec![p[0], p[1] * n[1], p[1] * n[2]]
    })
}

/// Realified `z^2` on every sheet, embedded in the plane of sheet `i`;
/// the differential vanishes at the origin, which lies on the junction.
pub fn squared_y_map(domain: &GluedDomain, gluing: &GluingData) -> PiecewiseMap {
    let frames = flat_y_frames();
    PiecewiseMap::from_fn(domain, gluing, 3, |i, p| {
        let (u, v) = (p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]);
        vec![u, v * frames[i][1], v * frames[i][2]]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::positions::{dot, norm};

    #[test]
    fn frames_are_unit_and_balanced() {
        let f = flat_y_frames();
        let s: Vec<f64> = (0..3).map(|c| f.iter().map(|n| n[c]).sum()).collect();
        assert!(norm(&s) < 1e-15);
        for i in 0..3 {
            assert!((norm(&f[i]) - 1.0).abs() < 1e-15);
            assert!((dot(&f[i], &f[(i + 1) % 3]) + 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn semicircle_graph_passes_through_mesh_images() {
        let g = flat_y_graph(1.0, 64).unwrap();
        let p = g.eval(1, 0.5);
        let n = flat_y_frames()[1];
        assert!((p[0]).abs() < 1e-14 && (p[1] - n[1]).abs() < 1e-14 && (p[2] - n[2]).abs() < 1e-14);
        assert_eq!(g.q_minus(), &[-1.0, 0.0, 0.0]);
        assert_eq!(g.q_plus(), &[1.0, 0.0, 0.0]);
    }
}
