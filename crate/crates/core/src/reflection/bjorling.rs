//! Björling continuation: the minimal surface through a real-analytic curve
//! with prescribed conormal, via Schwarz's formula
//! `f(z) = Re[ gamma(z) - i ∫ nu(w) x gamma'(w) dw ]`
//! evaluated on Chebyshev fits of the sampled data.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::positions::{cross3, dot, norm, Positions};
use crate::reflection::chebyshev::Chebyshev;

/// Meaning of the `normal` field of curve data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalKind {
    /// In-surface unit normal to the curve, pointing into the surface.
    #[default]
    Conormal,
    /// Unit normal of the surface along the curve.
    Surface,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveDocument {
    t: Vec<f64>,
    gamma: Vec<[f64; 3]>,
    normal: Vec<[f64; 3]>,
    #[serde(default)]
    kind: NormalKind,
}

/// Samples of a curve in R^3 with a unit normal field along it.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticCurveData {
    t: Vec<f64>,
    gamma: Positions,
    normal: Positions,
    kind: NormalKind,
}

impl AnalyticCurveData {
    pub fn new(t: Vec<f64>, gamma: Positions, normal: Positions, kind: NormalKind) -> Result<Self> {
        if gamma.dim() != 3 || normal.dim() != 3 {
            return invalid("curve and normal must be in R^3");
        }
        if t.len() < 4 || gamma.len() != t.len() || normal.len() != t.len() {
            return invalid("t, gamma and normal need the same length (at least 4)");
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("t must increase strictly");
        }
        for (k, n) in normal.iter().enumerate() {
            if (norm(n) - 1.0).abs() > 1e-10 {
                return invalid(format!("normal {k} is not a unit vector"));
            }
        }
        Ok(Self { t, gamma, normal, kind })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CurveDocument = serde_json::from_str(text)?;
        Self::new(doc.t, Positions::from_rows(3, doc.gamma), Positions::from_rows(3, doc.normal), doc.kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "t": self.t,
            "gamma": self.gamma.iter().collect::<Vec<_>>(),
            "normal": self.normal.iter().collect::<Vec<_>>(),
            "kind": self.kind,
        })
        .to_string()
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn gamma(&self) -> &Positions {
        &self.gamma
    }

    pub fn normal(&self) -> &Positions {
        &self.normal
    }

    pub fn kind(&self) -> NormalKind {
        self.kind
    }

    /// Same curve with another conormal field.
    pub fn with_conormal(&self, conormal: Positions) -> Result<Self> {
        Self::new(self.t.clone(), self.gamma.clone(), conormal, NormalKind::Conormal)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BjorlingOptions {
    /// Chebyshev degree of the fits. Least squares on equispaced samples
    /// is only stable up to about `2 sqrt(samples)`, so the degree is
    /// capped there.
    pub degree: usize,
    /// Strip height as a fraction of the parameter window length.
    pub height_fraction: f64,
    pub nx: usize,
    pub ny: usize,
    /// Largest accepted relative fit misfit.
    pub max_fit_residual: f64,
    /// Largest accepted `|N . gamma'| / |gamma'|`.
    pub orthogonality_tolerance: f64,
}

impl Default for BjorlingOptions {
    fn default() -> Self {
        Self { degree: 24, height_fraction: 0.25, nx: 41, ny: 11, max_fit_residual: 1e-8, orthogonality_tolerance: 1e-10 }
    }
}

/// Fitted curve: position series, its derivative, and unit tangents and
/// speeds at the samples.
struct CurveFit {
    gamma: Vec<Chebyshev>,
    velocity: Vec<[f64; 3]>,
    residual: f64,
}

pub(crate) fn fit_degree(opts: &BjorlingOptions, samples: usize) -> usize {
    let stable = (2.0 * (samples as f64).sqrt()).floor() as usize;
    opts.degree.min(stable).min(samples - 1).max(1)
}

fn fit_curve(data: &AnalyticCurveData, opts: &BjorlingOptions) -> Result<CurveFit> {
    let degree = fit_degree(opts, data.t.len());
    let cols: Vec<Vec<f64>> = (0..3).map(|c| data.gamma.column(c)).collect();
    let (gamma, misfit) = Chebyshev::fit_columns(&data.t, &cols, degree)?;
    let scale = (0..data.t.len()).map(|k| crate::positions::dist(data.gamma.get(k), data.gamma.get(0))).fold(0.0, f64::max);
    let residual = misfit / scale.max(f64::MIN_POSITIVE);
    if residual > opts.max_fit_residual {
        return Err(Error::Accuracy { residual, threshold: opts.max_fit_residual });
    }
    let d: Vec<Chebyshev> = gamma.iter().map(Chebyshev::derivative).collect();
    let velocity: Vec<[f64; 3]> = data.t.iter().map(|&t| [d[0].eval(t), d[1].eval(t), d[2].eval(t)]).collect();
    for (k, v) in velocity.iter().enumerate() {
        if norm(v) <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return invalid(format!("curve has zero tangent at sample {k}"));
        }
    }
    for k in 0..data.t.len() {
        let v = &velocity[k];
        if dot(data.normal.get(k), v).abs() > opts.orthogonality_tolerance * norm(v) {
            return invalid(format!("normal {k} is not orthogonal to the curve"));
        }
    }
    Ok(CurveFit { gamma, velocity, residual })
}

fn conormals(data: &AnalyticCurveData, fit: &CurveFit) -> Vec<[f64; 3]> {
    (0..data.t.len())
        .map(|k| {
            let n = data.normal.get(k);
            match data.kind {
                NormalKind::Conormal => [n[0], n[1], n[2]],
                NormalKind::Surface => {
                    let v = fit.velocity[k];
                    let s = norm(&v);
                    cross3(n, &[v[0] / s, v[1] / s, v[2] / s])
                }
            }
        })
        .collect()
}

/// Rotations of the conormal by `+2 pi/3` and `-2 pi/3` about the unit
/// tangent, so that the three conormals sum to zero.
pub fn balanced_normal_triple(data: &AnalyticCurveData, opts: &BjorlingOptions) -> Result<[Positions; 2]> {
    let fit = fit_curve(data, opts)?;
    let eta = conormals(data, &fit);
    let rotate = |angle: f64| {
        let (s, c) = angle.sin_cos();
        Positions::from_rows(
            3,
            eta.iter().zip(&fit.velocity).map(|(e, v)| {
                let len = norm(v);
                let t = [v[0] / len, v[1] / len, v[2] / len];
                let txe = cross3(&t, e);
                let te = dot(&t, e);
                [0, 1, 2].map(|i| e[i] * c + txe[i] * s + t[i] * te * (1.0 - c))
            }),
        )
    };
    let third = 2.0 * std::f64::consts::PI / 3.0;
    Ok([rotate(third), rotate(-third)])
}

/// Grid patch `(x, y) -> f(x + i y)` over the sample window.
#[derive(Clone, Debug, PartialEq)]
pub struct BjorlingPatch {
    pub nx: usize,
    pub ny: usize,
    /// Row-major `(x, y)` parameters, `y` row index slowest.
    pub params: Vec<[f64; 2]>,
    pub positions: Positions,
    pub fit_residual: f64,
    pub half: Half,
}

impl BjorlingPatch {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Triangles with positive orientation in the parameter plane.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(2 * (self.nx - 1) * (self.ny - 1));
        for j in 0..self.ny - 1 {
            for i in 0..self.nx - 1 {
                let (a, b, c, d) = (self.index(i, j), self.index(i + 1, j), self.index(i + 1, j + 1), self.index(i, j + 1));
                match self.half {
                    Half::Plus => {
                        out.push([a, b, c]);
                        out.push([a, c, d]);
                    }
                    Half::Minus => {
                        out.push([a, c, b]);
                        out.push([a, d, c]);
                    }
                }
            }
        }
        out
    }
}

/// Schwarz's solution of the Björling problem on the strip
/// `[t_first, t_last] x [0, +-h]`; `y > 0` moves along the conormal.
pub fn bjorling_extend(data: &AnalyticCurveData, half: Half, opts: &BjorlingOptions) -> Result<BjorlingPatch> {
    if opts.nx < 2 || opts.ny < 2 || !(opts.height_fraction > 0.0) {
        return invalid("patch needs nx, ny >= 2 and a positive height");
    }
    let fit = fit_curve(data, opts)?;
    let eta = conormals(data, &fit);
    // nu x gamma' = |gamma'| eta for nu = T x eta
    let w: Vec<[f64; 3]> = eta.iter().zip(&fit.velocity).map(|(e, v)| {
        let s = norm(v);
        [e[0] * s, e[1] * s, e[2] * s]
    }).collect();
    let degree = fit_degree(opts, data.t.len());
    let cols: Vec<Vec<f64>> = (0..3).map(|c| w.iter().map(|r| r[c]).collect()).collect();
    let (wfit, misfit) = Chebyshev::fit_columns(&data.t, &cols, degree)?;
    let wscale = w.iter().map(|r| norm(r)).fold(0.0, f64::max);
    let residual = fit.residual.max(misfit / wscale.max(f64::MIN_POSITIVE));
    if residual > opts.max_fit_residual {
        return Err(Error::Accuracy { residual, threshold: opts.max_fit_residual });
    }
    let anti: Vec<Chebyshev> = wfit.iter().map(Chebyshev::antiderivative).collect();

    let (lo, hi) = (data.t[0], data.t[data.t.len() - 1]);
    let height = opts.height_fraction * (hi - lo) * if half == Half::Plus { 1.0 } else { -1.0 };
    let mut params = Vec::with_capacity(opts.nx * opts.ny);
    let mut rows = Vec::with_capacity(opts.nx * opts.ny);
    for j in 0..opts.ny {
        let y = height * j as f64 / (opts.ny - 1) as f64;
        for i in 0..opts.nx {
            let x = if i + 1 == opts.nx { hi } else { lo + (hi - lo) * i as f64 / (opts.nx - 1) as f64 };
            let z = Complex64::new(x, y);
            params.push([x, y]);
            rows.push([0, 1, 2].map(|c| fit.gamma[c].eval_complex(z).re + anti[c].eval_complex(z).im));
        }
    }
    Ok(BjorlingPatch { nx: opts.nx, ny: opts.ny, params, positions: Positions::from_rows(3, rows), fit_residual: residual, half })
}
