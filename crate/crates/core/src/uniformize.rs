//! Pulled-back metrics, Beltrami coefficients and local isothermal charts.
//!
//! A chart `w = u + iv` is isothermal for a metric with Beltrami coefficient
//! `mu` when `w_zbar = mu w_z`. Written as an evolution in `y` this reads
//! `w_y = i (1 - mu) / (1 + mu) w_x`, which is marched from the Cauchy line
//! `w(x, 0) = x - x0` with classical Runge-Kutta in `y` and fourth-order
//! centered differences in `x`. The problem is elliptic, so the march is only
//! meaningful for analytic-looking data and short heights; rounding grows like
//! `exp(1.37 |a| y / dx)` with `a = i (1 - mu) / (1 + mu)`, and every row is
//! checked against the Beltrami equation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::SheetMesh;
use crate::energy::triangle_jet;
use crate::error::{invalid, Error, Result};
use crate::positions::{dot, Positions};

/// Relative determinant below which a metric sample counts as degenerate.
const DEGENERATE_DET: f64 = 1e-12;

/// Symmetric 2x2 metric `[[g11, g12], [g12, g22]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
}

impl Metric {
    pub fn new(g11: f64, g12: f64, g22: f64) -> Self {
        Self { g11, g12, g22 }
    }

    /// Gram matrix of the two partial derivatives of a map.
    pub fn from_differential(dx: &[f64], dy: &[f64]) -> Self {
        Self::new(dot(dx, dx), dot(dx, dy), dot(dy, dy))
    }

    pub fn det(&self) -> f64 {
        self.g11 * self.g22 - self.g12 * self.g12
    }

    pub fn trace(&self) -> f64 {
        self.g11 + self.g22
    }

    pub fn is_regular(&self) -> bool {
        let tr = self.trace();
        self.g11 > 0.0 && self.g22 > 0.0 && tr.is_finite() && self.det() > DEGENERATE_DET * tr * tr
    }

    /// `(g11 - g22 + 2i g12) / (g11 + g22 + 2 sqrt(det))`, or `None` off the
    /// regular set.
    pub fn beltrami(&self) -> Option<Complex64> {
        if !self.is_regular() {
            return None;
        }
        let denom = self.trace() + 2.0 * self.det().sqrt();
        Some(Complex64::new(self.g11 - self.g22, 2.0 * self.g12) / denom)
    }

    fn scaled_add(&mut self, other: &Metric, w: f64) {
        self.g11 += w * other.g11;
        self.g12 += w * other.g12;
        self.g22 += w * other.g22;
    }

    fn scaled(&self, s: f64) -> Metric {
        Metric::new(s * self.g11, s * self.g12, s * self.g22)
    }
}

/// One metric per triangle of a sheet.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricField {
    pub metrics: Vec<Metric>,
}

impl MetricField {
    pub fn len(&self) -> usize {
        self.metrics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metrics.is_empty()
    }

    /// Indices of samples off the regular set.
    pub fn degenerate(&self) -> Vec<usize> {
        (0..self.metrics.len()).filter(|&i| !self.metrics[i].is_regular()).collect()
    }
}

/// Beltrami coefficient per sample; `None` marks a degenerate sample.
#[derive(Clone, Debug)]
pub struct BeltramiField {
    pub values: Vec<Option<Complex64>>,
}

impl BeltramiField {
    pub fn max_modulus(&self) -> f64 {
        self.values.iter().flatten().map(|m| m.norm()).fold(0.0, f64::max)
    }

    pub fn degenerate(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.values[i].is_none()).collect()
    }
}

/// Per-triangle pullback of the Euclidean metric under the piecewise affine
/// map. Triangles whose image is degenerate are kept and show up in
/// [`MetricField::degenerate`].
pub fn pullback_metric(sheet: &SheetMesh, positions: &Positions) -> Result<MetricField> {
    if positions.len() != sheet.num_vertices() {
        return invalid("positions do not match the mesh");
    }
    let v = sheet.vertices();
    let metrics = sheet
        .triangles()
        .iter()
        .map(|tri| match triangle_jet(tri.map(|i| v[i]), tri.map(|i| positions.get(i))) {
            Some(j) => Metric::from_differential(&j.dx, &j.dy),
            None => Metric::new(0.0, 0.0, 0.0),
        })
        .collect();
    Ok(MetricField { metrics })
}

pub fn beltrami_coefficient(field: &MetricField) -> BeltramiField {
    BeltramiField { values: field.metrics.iter().map(Metric::beltrami).collect() }
}

/// Point evaluation of a Beltrami coefficient. `None` means the point is
/// outside the sampled region or on the degenerate set.
pub trait BeltramiSampler {
    fn sample(&self, x: f64, y: f64) -> Option<Complex64>;
}

impl<F> BeltramiSampler for F
where
    F: Fn(f64, f64) -> Option<Complex64>,
{
    fn sample(&self, x: f64, y: f64) -> Option<Complex64> {
        self(x, y)
    }
}

/// Beltrami coefficient of a piecewise affine map. Triangle metrics are
/// averaged to vertices with area weights, interpolated barycentrically, and
/// only then converted to `mu`.
pub struct MeshBeltrami<'a> {
    sheet: &'a SheetMesh,
    vertex_metrics: Vec<Option<Metric>>,
    buckets: Buckets,
}

impl<'a> MeshBeltrami<'a> {
    pub fn new(sheet: &'a SheetMesh, field: &MetricField) -> Result<Self> {
        if field.len() != sheet.triangles().len() {
            return invalid("metric field does not match the mesh");
        }
        let mut acc = vec![(Metric::new(0.0, 0.0, 0.0), 0.0); sheet.num_vertices()];
        for (t, tri) in sheet.triangles().iter().enumerate() {
            let g = &field.metrics[t];
            if !g.is_regular() {
                continue;
            }
            let w = sheet.triangle_area(t);
            for &v in tri {
                acc[v].0.scaled_add(g, w);
                acc[v].1 += w;
            }
        }
        let vertex_metrics = acc.into_iter().map(|(g, w)| (w > 0.0).then(|| g.scaled(1.0 / w))).collect();
        Ok(Self { sheet, vertex_metrics, buckets: Buckets::new(sheet) })
    }

    pub fn metric_at(&self, x: f64, y: f64) -> Option<Metric> {
        let (t, bary) = self.buckets.locate(self.sheet, [x, y])?;
        let mut g = Metric::new(0.0, 0.0, 0.0);
        for (k, &v) in self.sheet.triangles()[t].iter().enumerate() {
            g.scaled_add(self.vertex_metrics[v].as_ref()?, bary[k]);
        }
        Some(g)
    }
}

impl BeltramiSampler for MeshBeltrami<'_> {
    fn sample(&self, x: f64, y: f64) -> Option<Complex64> {
        self.metric_at(x, y)?.beltrami()
    }
}

/// Uniform bucket grid over triangle bounding boxes.
struct Buckets {
    lo: [f64; 2],
    cell: [f64; 2],
    n: usize,
    cells: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(sheet: &SheetMesh) -> Self {
        let v = sheet.vertices();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in v {
            for c in 0..2 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        let n = ((sheet.triangles().len() as f64).sqrt().ceil() as usize).max(1);
        let cell = [0, 1].map(|c| ((hi[c] - lo[c]) / n as f64).max(f64::MIN_POSITIVE));
        let mut b = Self { lo, cell, n, cells: vec![Vec::new(); n * n] };
        for (t, tri) in sheet.triangles().iter().enumerate() {
            let (mut tlo, mut thi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &i in tri {
                for c in 0..2 {
                    tlo[c] = tlo[c].min(v[i][c]);
                    thi[c] = thi[c].max(v[i][c]);
                }
            }
            let (a, z) = (b.index(tlo), b.index(thi));
            for i in a[0]..=z[0] {
                for j in a[1]..=z[1] {
                    b.cells[i * n + j].push(t);
                }
            }
        }
        b
    }

    fn index(&self, p: [f64; 2]) -> [usize; 2] {
        [0, 1].map(|c| (((p[c] - self.lo[c]) / self.cell[c]).floor().max(0.0) as usize).min(self.n - 1))
    }

    fn locate(&self, sheet: &SheetMesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        const SLACK: f64 = 1e-12;
        if !(p[0].is_finite() && p[1].is_finite()) {
            return None;
        }
        let [i, j] = self.index(p);
        let v = sheet.vertices();
        self.cells[i * self.n + j].iter().find_map(|&t| {
            let [a, b, c] = sheet.triangles()[t].map(|k| v[k]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det;
            let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det;
            let l0 = 1.0 - l1 - l2;
            (l0 >= -SLACK && l1 >= -SLACK && l2 >= -SLACK).then_some((t, [l0, l1, l2]))
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarchOptions {
    /// Distance marched in `y`; rounded to a whole number of steps.
    pub height: f64,
    /// Required margin `|mu| <= 1 - delta`.
    pub delta: f64,
    /// Largest normalized row residual accepted before the march is cut.
    pub residual_limit: f64,
}

impl Default for MarchOptions {
    fn default() -> Self {
        Self { height: 0.25, delta: 0.05, residual_limit: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarchStop {
    Completed,
    /// The domain of determinacy has no interior columns left.
    Exhausted,
    /// The sampler left its domain or hit a degenerate point.
    OutsideSamples,
    /// `|mu|` exceeded `1 - delta` above the Cauchy line.
    MuMargin,
    /// The row residual exceeded the limit or became non-finite.
    Unstable,
}

/// Isothermal chart on a grid `x = x0 + (j - m) step`, `y = k step`. Entries
/// outside the domain of determinacy are `None`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsothermalChart {
    pub x0: f64,
    pub step: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<Vec<Option<f64>>>,
    pub v: Vec<Vec<Option<f64>>>,
    /// Maximum of `|w_zbar - mu w_z| / |w_z|` over interior grid points.
    pub residual: f64,
    pub min_jacobian: f64,
    pub max_mu_modulus: f64,
    pub delta: f64,
    pub stop: MarchStop,
}

impl IsothermalChart {
    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn value(&self, k: usize, j: usize) -> Option<Complex64> {
        Some(Complex64::new(self.u[k][j]?, self.v[k][j]?))
    }

    /// Valid column range of row `k`.
    pub fn columns(&self, k: usize) -> std::ops::Range<usize> {
        let nx = self.x.len();
        (MARGIN * k).min(nx)..nx.saturating_sub(MARGIN * k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chart serializes")
    }

    /// Largest deviation from `exact` over the chart's defined entries.
    pub fn max_error(&self, exact: impl Fn(f64, f64) -> Complex64) -> f64 {
        let mut err = 0.0f64;
        for k in 0..self.rows() {
            for j in self.columns(k) {
                if let Some(w) = self.value(k, j) {
                    err = err.max((w - exact(self.x[j], self.y[k])).norm());
                }
            }
        }
        err
    }

    /// Conformality defect of `surface` re-parameterized by the chart: each
    /// grid cell is split into two triangles whose parameter vertices are the
    /// chart values and whose images are `surface(x, y)`. Returns the
    /// largest per-triangle defect `|g11 - g22, 2 g12| / (g11 + g22)`.
    pub fn composed_conformality(&self, surface: impl Fn(f64, f64) -> Vec<f64>) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 0..self.rows().saturating_sub(1) {
            let cols = self.columns(k + 1);
            for j in cols.start..cols.end.saturating_sub(1) {
                let corners = [(k, j), (k, j + 1), (k + 1, j + 1), (k + 1, j)];
                let params: Vec<[f64; 2]> = corners
                    .iter()
                    .map(|&(r, c)| self.value(r, c).map(|w| [w.re, w.im]))
                    .collect::<Option<_>>()
                    .ok_or_else(|| Error::InvalidArgument("chart cell is undefined".into()))?;
                let images: Vec<Vec<f64>> = corners.iter().map(|&(r, c)| surface(self.x[c], self.y[r])).collect();
                for tri in [[0, 1, 2], [0, 2, 3]] {
                    let jet = triangle_jet(tri.map(|i| params[i]), tri.map(|i| images[i].as_slice()))
                        .ok_or_else(|| Error::DegenerateMap("chart folds a grid cell".into()))?;
                    let g = Metric::from_differential(&jet.dx, &jet.dy);
                    let defect = (g.g11 - g.g22).hypot(2.0 * g.g12) / g.trace();
                    worst = worst.max(defect);
                }
            }
        }
        Ok(worst)
    }
}

/// Columns lost per side in one Runge-Kutta step: four stages, each applying a
/// five-point stencil.
const MARGIN: usize = 8;

/// `i (1 - mu) / (1 + mu)`.
fn propagation(mu: Complex64) -> Complex64 {
    Complex64::i() * (1.0 - mu) / (1.0 + mu)
}

/// Fourth-order centered first derivative on the interior of `w`.
fn diff_x(w: &[Complex64], h: f64) -> Vec<Complex64> {
    (2..w.len().saturating_sub(2)).map(|j| (w[j - 2] - 8.0 * w[j - 1] + 8.0 * w[j + 1] - w[j + 2]) / (12.0 * h)).collect()
}

enum SampleFailure {
    Outside,
    Margin,
}

/// Marches an isothermal chart with Cauchy data `u = x - x0`, `v = 0` on
/// `|x - x0| <= extent`. Fails with a stability error when `|mu| > 1 - delta`
/// on the Cauchy line; later failures truncate the chart and are recorded in
/// [`IsothermalChart::stop`].
pub fn isothermal_march(
    mu: &dyn BeltramiSampler,
    x0: f64,
    step: f64,
    extent: f64,
    options: &MarchOptions,
) -> Result<IsothermalChart> {
    if !(step > 0.0 && step.is_finite() && extent >= step && x0.is_finite()) {
        return invalid("march needs a finite step > 0 and extent >= step");
    }
    if !(options.delta > 0.0 && options.delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    if !(options.height >= 0.0 && options.residual_limit > 0.0) {
        return invalid("height must be >= 0 and the residual limit > 0");
    }
    let half = (extent / step + 1e-9).floor() as usize;
    let nx = 2 * half + 1;
    let x: Vec<f64> = (0..nx).map(|j| x0 + (j as f64 - half as f64) * step).collect();
    let steps = (options.height / step).round() as usize;
    let bound = 1.0 - options.delta;

    let mut max_mu = 0.0f64;
    let mut sample_row = |cols: std::ops::Range<usize>, y: f64| -> std::result::Result<Vec<Complex64>, SampleFailure> {
        cols.map(|j| {
            let m = mu.sample(x[j], y).ok_or(SampleFailure::Outside)?;
            if !(m.norm() <= bound) {
                return Err(SampleFailure::Margin);
            }
            max_mu = max_mu.max(m.norm());
            Ok(propagation(m))
        })
        .collect()
    };

    match sample_row(0..nx, 0.0) {
        Ok(_) => {}
        Err(SampleFailure::Outside) => return invalid("Beltrami coefficient is undefined on the Cauchy line"),
        Err(SampleFailure::Margin) => {
            return Err(Error::Stability(format!("|mu| exceeds 1 - delta = {bound} on the Cauchy line")))
        }
    }

    let mut rows: Vec<Vec<Complex64>> = vec![x.iter().map(|&xj| Complex64::new(xj - x0, 0.0)).collect()];
    let mut stop = MarchStop::Completed;
    let mut residual = 0.0f64;
    for k in 0..steps {
        let lo = MARGIN * k;
        let w = &rows[k];
        if w.len() <= 2 * MARGIN {
            stop = MarchStop::Exhausted;
            break;
        }
        let y = k as f64 * step;
        let stage = |state: &[Complex64], offset: usize, coeff: &[Complex64]| -> Vec<Complex64> {
            diff_x(state, step).iter().zip(&coeff[offset + 2..]).map(|(d, a)| a * d).collect()
        };
        let len = w.len();
        let coeffs = (
            sample_row(lo..lo + len, y),
            sample_row(lo..lo + len, y + 0.5 * step),
            sample_row(lo..lo + len, y + step),
        );
        let (a0, ah, a1) = match coeffs {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            (Err(SampleFailure::Margin), ..) | (_, Err(SampleFailure::Margin), _) | (.., Err(SampleFailure::Margin)) => {
                stop = MarchStop::MuMargin;
                break;
            }
            _ => {
                stop = MarchStop::OutsideSamples;
                break;
            }
        };
        let h = step;
        let k1 = stage(w, 0, &a0);
        let y2: Vec<Complex64> = (0..k1.len()).map(|i| w[i + 2] + 0.5 * h * k1[i]).collect();
        let k2 = stage(&y2, 2, &ah);
        let y3: Vec<Complex64> = (0..k2.len()).map(|i| w[i + 4] + 0.5 * h * k2[i]).collect();
        let k3 = stage(&y3, 4, &ah);
        let y4: Vec<Complex64> = (0..k3.len()).map(|i| w[i + 6] + h * k3[i]).collect();
        let k4 = stage(&y4, 6, &a1);
        let next: Vec<Complex64> = (0..k4.len())
            .map(|i| w[i + 8] + h / 6.0 * (k1[i + 6] + 2.0 * k2[i + 4] + 2.0 * k3[i + 2] + k4[i]))
            .collect();

        let row_res = row_residual(w, &next, &a0, &a1, step);
        if !row_res.is_finite() || row_res > options.residual_limit {
            stop = MarchStop::Unstable;
            break;
        }
        residual = residual.max(row_res);
        rows.push(next);
    }

    let ny = rows.len();
    let mut u = vec![vec![None; nx]; ny];
    let mut v = vec![vec![None; nx]; ny];
    for (k, row) in rows.iter().enumerate() {
        for (i, w) in row.iter().enumerate() {
            u[k][MARGIN * k + i] = Some(w.re);
            v[k][MARGIN * k + i] = Some(w.im);
        }
    }
    let mut chart = IsothermalChart {
        x0,
        step,
        x,
        y: (0..ny).map(|k| k as f64 * step).collect(),
        u,
        v,
        residual,
        min_jacobian: f64::INFINITY,
        max_mu_modulus: max_mu,
        delta: options.delta,
        stop,
    };
    let (res, jac) = interior_checks(&chart, mu);
    chart.residual = chart.residual.max(res);
    chart.min_jacobian = jac;
    Ok(chart)
}

/// Trapezoidal residual of `w_y = a w_x` between two consecutive rows,
/// relative to the size of `w_x`. `lower` spans `MARGIN` more columns per
/// side than `upper`.
fn row_residual(lower: &[Complex64], upper: &[Complex64], a0: &[Complex64], a1: &[Complex64], h: f64) -> f64 {
    let (d0, d1) = (diff_x(lower, h), diff_x(upper, h));
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 2..upper.len().saturating_sub(2) {
        let (dl, du) = (d0[i + MARGIN - 2], d1[i - 2]);
        let wy = (upper[i] - lower[i + MARGIN]) / h;
        let rhs = 0.5 * (a0[i + MARGIN] * dl + a1[i + MARGIN] * du);
        worst = worst.max((wy - rhs).norm());
        scale = scale.max(du.norm());
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Beltrami residual and minimal Jacobian at grid points with a full
/// five-point row stencil and both vertical neighbours.
fn interior_checks(chart: &IsothermalChart, mu: &dyn BeltramiSampler) -> (f64, f64) {
    let h = chart.step;
    let mut residual = 0.0f64;
    let mut jac = f64::INFINITY;
    for k in 1..chart.rows().saturating_sub(1) {
        let cols = chart.columns(k + 1);
        for j in cols.start + 2..cols.end.saturating_sub(2) {
            let w = |r: usize, c: usize| chart.value(r, c).expect("inside the domain of determinacy");
            let wx = (w(k, j - 2) - 8.0 * w(k, j - 1) + 8.0 * w(k, j + 1) - w(k, j + 2)) / (12.0 * h);
            let wy = (w(k + 1, j) - w(k - 1, j)) / (2.0 * h);
            let wz = 0.5 * (wx - Complex64::i() * wy);
            let wzb = 0.5 * (wx + Complex64::i() * wy);
            jac = jac.min(wz.norm_sqr() - wzb.norm_sqr());
            if let Some(m) = mu.sample(chart.x[j], chart.y[k]) {
                residual = residual.max((wzb - m * wz).norm() / wz.norm());
            }
        }
    }
    (residual, jac)
}
