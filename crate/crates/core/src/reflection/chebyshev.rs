//! Chebyshev series on an interval, evaluated at real or complex points.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    pub fn new(lo: f64, hi: f64, coeffs: Vec<f64>) -> Self {
        assert!(hi > lo && !coeffs.is_empty());
        Self { lo, hi, coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Least-squares fits of several data columns sharing the sample points
    /// `ts`. Returns the series and the largest absolute sample misfit.
    pub fn fit_columns(ts: &[f64], columns: &[Vec<f64>], degree: usize) -> Result<(Vec<Chebyshev>, f64)> {
        let n = ts.len();
        if n < degree + 1 {
            return invalid(format!("degree {degree} needs at least {} samples", degree + 1));
        }
        let (lo, hi) = (ts[0], ts[n - 1]);
        if !(hi > lo) {
            return invalid("sample parameters must increase");
        }
        let basis = DMatrix::from_fn(n, degree + 1, |r, k| cheb_t(k, to_unit(lo, hi, ts[r])));
        let svd = basis.clone().svd(true, true);
        let condition = svd.singular_values.max() / svd.singular_values.min();
        let mut out = Vec::with_capacity(columns.len());
        let mut misfit = 0.0f64;
        for col in columns {
            let rhs = DVector::from_column_slice(col);
            let c = svd.solve(&rhs, 1e-14).map_err(|e| Error::Stability(e.to_string()))?;
            let fitted = &basis * &c;
            misfit = misfit.max((fitted - rhs).amax());
            out.push(Chebyshev::new(lo, hi, chop(c.iter().copied().collect(), condition)));
        }
        Ok((out, misfit))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_complex(Complex64::new(t, 0.0)).re
    }

    /// Clenshaw recurrence at a complex argument.
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let s = (z * 2.0 - (self.lo + self.hi)) / (self.hi - self.lo);
        let (mut b1, mut b2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = s * b1 * 2.0 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        s * b1 - b2 + self.coeffs[0]
    }

    /// Derivative with respect to the interval variable.
    pub fn derivative(&self) -> Chebyshev {
        let n = self.coeffs.len();
        if n == 1 {
            return Chebyshev::new(self.lo, self.hi, vec![0.0]);
        }
        let mut d = vec![0.0; n + 1];
        for k in (1..n).rev() {
            d[k - 1] = d[k + 1] + 2.0 * k as f64 * self.coeffs[k];
        }
        d[0] *= 0.5;
        let scale = 2.0 / (self.hi - self.lo);
        Chebyshev::new(self.lo, self.hi, d[..n - 1].iter().map(|c| c * scale).collect())
    }

    /// Antiderivative vanishing at the left end of the interval.
    pub fn antiderivative(&self) -> Chebyshev {
        let n = self.coeffs.len();
        let c = |k: usize| if k < n { self.coeffs[k] } else { 0.0 };
        let mut b = vec![0.0; n + 1];
        for k in 1..=n {
            let prev = if k == 1 { 2.0 * c(0) } else { c(k - 1) };
            b[k] = (prev - c(k + 1)) / (2.0 * k as f64);
        }
        let scale = 0.5 * (self.hi - self.lo);
        for v in b.iter_mut() {
            *v *= scale;
        }
        let mut out = Chebyshev::new(self.lo, self.hi, b);
        let at_lo = out.eval(self.lo);
        out.coeffs[0] -= at_lo;
        out
    }
}

/// Drops trailing coefficients at the round-off level of the fit. Off the
/// real axis `T_k` grows geometrically in `k`, so leftover noise would be
/// amplified.
fn chop(mut coeffs: Vec<f64>, condition: f64) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let floor = 8.0 * condition * f64::EPSILON * scale;
    while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.abs() <= floor) {
        coeffs.pop();
    }
    coeffs
}

fn to_unit(lo: f64, hi: f64, t: f64) -> f64 {
    (2.0 * t - lo - hi) / (hi - lo)
}

fn cheb_t(k: usize, s: f64) -> f64 {
    let (mut a, mut b) = (1.0, s);
    match k {
        0 => 1.0,
        _ => {
            for _ in 1..k {
                let c = 2.0 * s * b - a;
                a = b;
                b = c;
            }
            b
        }
    }
}
