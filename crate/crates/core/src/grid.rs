//! Uniform one-dimensional grids, trapezoid weights and the interpolation
//! helpers shared by the transforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` equispaced nodes covering `[min, max]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err(Error::Invalid(format!(
                "grid needs n >= 2 and finite min < max (got [{min}, {max}], n={n})"
            )));
        }
        Ok(Self { min, max, n })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Trapezoid quadrature weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.spacing()
        } else {
            self.spacing()
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.weight(i)).collect()
    }

    /// Cell index and fractional offset of `x`, clamped to the grid.
    /// Points outside the grid report offsets below 0 or above 1.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x - self.min) / self.spacing();
        let cell = if s <= 0.0 {
            0
        } else {
            (s.floor() as usize).min(self.n - 2)
        };
        (cell, s - cell as f64)
    }

    /// Linear interpolation of node samples at `x`; constant extension
    /// beyond both ends.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let (j, theta) = self.locate(x);
        if theta <= 0.0 && j == 0 {
            return values[0];
        }
        if theta >= 1.0 {
            return values[j + 1];
        }
        values[j] + theta * (values[j + 1] - values[j])
    }

    pub fn same_as(&self, other: &UniformGrid) -> bool {
        self.n == other.n
            && (self.min - other.min).abs() <= 1e-12 * (1.0 + self.min.abs())
            && (self.max - other.max).abs() <= 1e-12 * (1.0 + self.max.abs())
    }
}

/// Index `j` of the last element of the nondecreasing slice `xs` with
/// `xs[j] <= x`, or `None` when `x < xs[0]`.
pub fn last_le(xs: &[f64], x: f64) -> Option<usize> {
    let p = xs.partition_point(|&v| v <= x);
    p.checked_sub(1)
}

/// Linear interpolation through scattered points with nondecreasing
/// abscissae. Outside the data range the end values are held constant.
/// Repeated abscissae resolve to the right-most sample.
pub fn interp_scattered(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    match last_le(xs, x) {
        None => ys[0],
        Some(j) if j + 1 >= xs.len() => ys[xs.len() - 1],
        Some(j) => {
            let dx = xs[j + 1] - xs[j];
            if dx <= 0.0 {
                ys[j]
            } else {
                ys[j] + (x - xs[j]) / dx * (ys[j + 1] - ys[j])
            }
        }
    }
}

/// Cumulative trapezoid integral of node samples, starting from zero.
pub fn cumulative_trapezoid(values: &[f64], dx: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for pair in values.windows(2) {
        acc += 0.5 * dx * (pair[0] + pair[1]);
        out.push(acc);
    }
    out
}

/// Centered first difference; one-sided at the ends.
pub fn centered_difference(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (values[1] - values[0]) / dx
            } else if i + 1 == n {
                (values[n - 1] - values[n - 2]) / dx
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * dx)
            }
        })
        .collect()
}

/// Fourth-order centered first difference, falling back to second order
/// within two nodes of the ends.
pub fn centered_difference4(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    if n < 5 {
        return centered_difference(values, dx);
    }
    let mut out = centered_difference(values, dx);
    for i in 2..n - 2 {
        out[i] = (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]) / (12.0 * dx);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = UniformGrid::new(-30.0, 30.0, 4096).unwrap();
        assert_eq!(g.point(0), -30.0);
        assert_eq!(g.point(4095), 30.0);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 60.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(UniformGrid::new(0.0, 1.0, 1).is_err());
        assert!(UniformGrid::new(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_lines() {
        let g = UniformGrid::new(-1.0, 2.0, 31).unwrap();
        let v: Vec<f64> = g.points().iter().map(|x| 3.0 * x - 1.0).collect();
        for &x in &[-1.0, -0.37, 0.0, 1.234, 2.0] {
            assert!((g.interpolate(&v, x) - (3.0 * x - 1.0)).abs() < 1e-12);
        }
        assert_eq!(g.interpolate(&v, -5.0), v[0]);
        assert_eq!(g.interpolate(&v, 5.0), v[30]);
    }

    #[test]
    fn scattered_interpolation_handles_repeats() {
        let xs = [0.0, 1.0, 1.0, 2.0];
        let ys = [0.0, 1.0, 5.0, 6.0];
        assert!((interp_scattered(&xs, &ys, 0.5) - 0.5).abs() < 1e-15);
        assert!((interp_scattered(&xs, &ys, 1.5) - 5.5).abs() < 1e-15);
        assert_eq!(interp_scattered(&xs, &ys, -1.0), 0.0);
        assert_eq!(interp_scattered(&xs, &ys, 3.0), 6.0);
    }

    #[test]
    fn fourth_order_difference_is_exact_on_quartics() {
        let g = UniformGrid::new(-1.0, 1.0, 41).unwrap();
        let v: Vec<f64> = g.points().iter().map(|x| x.powi(4) - x * x).collect();
        let d = centered_difference4(&v, g.spacing());
        for i in 2..39 {
            let x = g.point(i);
            assert!((d[i] - (4.0 * x.powi(3) - 2.0 * x)).abs() < 1e-10);
        }
    }
}
