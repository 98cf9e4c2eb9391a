use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[-L, L]^D` with `n` nodes per axis. `n` is odd so that the
/// origin is a node; the two end nodes carry the Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dimension: usize,
    pub half_extent: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(dimension: usize, half_extent: f64, n: usize) -> Result<Self> {
        if !(dimension == 1 || dimension == 2) {
            return Err(Error::InvalidParameter(format!("grid dimension must be 1 or 2 (got {dimension})")));
        }
        if n < 64 || n % 2 == 0 {
            return Err(Error::InvalidParameter(format!("points per axis must be odd and >= 64 (got {n})")));
        }
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(Error::InvalidParameter(format!("half extent must be > 0 (got {half_extent})")));
        }
        Ok(Self { dimension, half_extent, n })
    }

    /// Default 1-D grid: `h = 1/160`, so every multiple of 0.3 up to 1.5 is a node.
    pub fn default_1d() -> Self {
        Self { dimension: 1, half_extent: 6.4, n: 2049 }
    }

    /// Default 2-D grid: `h = 1/80`, so the lattice `{0, ±0.6, ±1.2}^2` is on nodes.
    pub fn default_2d() -> Self {
        Self { dimension: 2, half_extent: 6.5, n: 1041 }
    }

    pub fn default_for(dimension: usize) -> Self {
        if dimension == 1 {
            Self::default_1d()
        } else {
            Self::default_2d()
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / (self.n - 1) as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        // symmetric construction keeps x(i) = -x(n-1-i) exactly
        let c = (self.n - 1) / 2;
        let h = self.spacing();
        if i >= c {
            (i - c) as f64 * h
        } else {
            -((c - i) as f64 * h)
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coordinate(i)).collect()
    }

    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Axis index of a coordinate that must coincide with a node.
    pub fn axis_index(&self, x: f64) -> Option<usize> {
        let h = self.spacing();
        let k = (x / h).round();
        if (x - k * h).abs() > 1e-9 * h || k.abs() as usize > self.center() - 1 {
            return None;
        }
        Some((self.center() as i64 + k as i64) as usize)
    }

    /// Node multi-index of a point; the point must be an interior node.
    pub fn node(&self, point: &[f64]) -> Result<Vec<usize>> {
        if point.len() != self.dimension {
            return Err(Error::Mismatch(format!(
                "point has {} coordinates, grid is {}-D",
                point.len(),
                self.dimension
            )));
        }
        point
            .iter()
            .map(|&x| self.axis_index(x))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::OffGrid(point.to_vec()))
    }

    /// Same grid with `2n - 1` nodes per axis (every old node is kept).
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n - 1, ..*self }
    }

    /// Interior (non-Dirichlet) node count per axis.
    pub fn interior(&self) -> usize {
        self.n - 2
    }

    /// Weight `h^D` of one cell.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }
}
