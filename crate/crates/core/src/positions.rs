//! Flat storage for per-vertex positions in R^n plus the handful of slice
//! vector helpers the rest of the crate needs.

use serde::{Deserialize, Serialize};

/// Row-major list of points in R^dim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    dim: usize,
    data: Vec<f64>,
}

impl Positions {
    pub fn zeros(dim: usize, len: usize) -> Self {
        Self { dim, data: vec![0.0; dim * len] }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "flat data is not a multiple of dim");
        Self { dim, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: impl IntoIterator<Item = R>) -> Self {
        let mut data = Vec::new();
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), dim, "row has wrong dimension");
            data.extend_from_slice(r);
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn set(&mut self, i: usize, p: &[f64]) {
        self.get_mut(i).copy_from_slice(p);
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Coordinate `c` of every point.
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.iter().map(|p| p[c]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.dim + c] = *v;
        }
    }

    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let rows: Vec<Vec<f64>> = self.iter().map(f).collect();
        let dim = rows.first().map_or(self.dim, |r| r.len());
        Self::from_rows(dim, rows)
    }

    pub fn max_distance(&self, other: &Positions) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.iter().zip(other.iter()).map(|(a, b)| dist(a, b)).fold(0.0, f64::max)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[inline]
pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `a + t (b - a)`
#[inline]
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

pub fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| scale(a, 1.0 / n))
}
