//! Dense vector families and the handful of kernels the rest of the crate needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a + scale * b`
pub fn add_scaled(a: &[f64], scale: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + scale * y).collect()
}

/// In place `y += a * x`.
#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scaled(a: &[f64], scale: f64) -> Vec<f64> {
    a.iter().map(|x| x * scale).collect()
}

/// Returns `a / |a|`, or `None` when the norm is below `eps`.
pub fn normalized(a: &[f64], eps: f64) -> Option<Vec<f64>> {
    let n = norm(a);
    (n > eps).then(|| scaled(a, 1.0 / n))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// An indexed family of vectors of a common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vectors {
    dim: usize,
    data: Vec<f64>,
}

impl Vectors {
    pub fn new(dim: usize) -> Self {
        Vectors {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 && !data.is_empty() || dim > 0 && data.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "flat buffer of length {} is not a multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(Vectors { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut out = Vectors::new(dim);
        for r in rows {
            out.push(r.as_ref())?;
        }
        Ok(out)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if self.data.is_empty() && self.dim == 0 {
            self.dim = row.len();
        }
        if row.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "row of length {} pushed into family of dim {}",
                row.len(),
                self.dim
            )));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Zero-pads every row to `dim` (no-op when already that wide).
    pub fn padded(&self, dim: usize) -> Vectors {
        assert!(dim >= self.dim, "cannot pad down");
        if dim == self.dim {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.len() * dim);
        for r in self.iter() {
            data.extend_from_slice(r);
            data.extend(std::iter::repeat_n(0.0, dim - self.dim));
        }
        Vectors { dim, data }
    }

    /// Family `{-x : x ∈ self}`.
    pub fn negated(&self) -> Vectors {
        Vectors {
            dim: self.dim,
            data: self.data.iter().map(|x| -x).collect(),
        }
    }

    pub fn select(&self, idx: &[usize]) -> Vectors {
        let mut out = Vectors::new(self.dim);
        for &i in idx {
            out.data.extend_from_slice(self.row(i));
        }
        out
    }

    /// `out[i] = r · row(i)`
    pub fn project(&self, r: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.iter().map(|x| dot(x, r)));
    }

    pub fn max_unit_residual(&self) -> f64 {
        self.iter()
            .map(|x| (norm(x) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
