//! Coordinate boxes in R^{2n} and their uniform sample lattices.

use serde::{Deserialize, Serialize};

use crate::config::Limits;
use crate::error::{Error, Result};

/// Axis-aligned box `[lo_0, hi_0] x ... x [lo_{2n-1}, hi_{2n-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl CoordBox {
    /// Checked constructor using the default [`Limits`].
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::with_limits(lo, hi, &Limits::default())
    }

    pub fn with_limits(lo: Vec<f64>, hi: Vec<f64>, limits: &Limits) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.is_empty() || !lo.len().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "box dimension {} is not a positive even number",
                lo.len()
            )));
        }
        if lo.len() / 2 > limits.max_complex_dim {
            return Err(Error::Config(format!(
                "complex dimension {} exceeds cap {}",
                lo.len() / 2,
                limits.max_complex_dim
            )));
        }
        for (k, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::Config(format!(
                    "box axis {k}: need lo < hi, got [{a}, {b}]"
                )));
            }
        }
        Ok(CoordBox { lo, hi })
    }

    /// `[lo, hi]^{2n}`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; 2 * n], vec![hi; 2 * n])
    }

    /// Box of arbitrary even dimension without the complex-dimension cap.
    /// Used for image boxes and sub-boxes derived from checked boxes.
    pub(crate) fn from_bounds_unchecked(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        CoordBox { lo, hi }
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Real dimension 2n.
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Complex dimension n.
    pub fn n(&self) -> usize {
        self.lo.len() / 2
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Containment with slack `eps` on every side.
    pub fn contains(&self, p: &[f64], eps: f64) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (a, b))| *x >= a - eps && *x <= b + eps)
    }

    pub fn contains_box(&self, other: &CoordBox, eps: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|k| other.lo[k] >= self.lo[k] - eps && other.hi[k] <= self.hi[k] + eps)
    }

    /// Bounds agree to within `tol` on every side.
    pub fn approx_eq(&self, other: &CoordBox, tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|k| {
                (self.lo[k] - other.lo[k]).abs() <= tol && (self.hi[k] - other.hi[k]).abs() <= tol
            })
    }

    /// Intersection, or `None` when it has empty interior.
    pub fn intersect(&self, other: &CoordBox) -> Option<CoordBox> {
        if self.dim() != other.dim() {
            return None;
        }
        let lo: Vec<f64> = (0..self.dim())
            .map(|k| self.lo[k].max(other.lo[k]))
            .collect();
        let hi: Vec<f64> = (0..self.dim())
            .map(|k| self.hi[k].min(other.hi[k]))
            .collect();
        if lo.iter().zip(&hi).all(|(a, b)| a < b) {
            Some(CoordBox { lo, hi })
        } else {
            None
        }
    }

    /// Smallest box containing all points; `None` if some axis is flat.
    pub fn bounding(points: &[Vec<f64>]) -> Option<CoordBox> {
        let first = points.first()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            for k in 0..lo.len() {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        lo.iter()
            .zip(&hi)
            .all(|(a, b)| a < b)
            .then_some(CoordBox { lo, hi })
    }

    pub fn with_side(&self, axis: usize, lo: f64, hi: f64) -> CoordBox {
        let mut b = self.clone();
        b.lo[axis] = lo;
        b.hi[axis] = hi;
        b
    }
}

/// Uniform lattice with `k` points per axis including both endpoints, in
/// lexicographic order with the first axis varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    bx: CoordBox,
    k: usize,
    coords: Vec<f64>,
}

impl SampleGrid {
    /// `k == 1` samples the centre only.
    pub fn new(bx: &CoordBox, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("points_per_axis must be positive".into()));
        }
        let dim = bx.dim();
        let total = k
            .checked_pow(dim as u32)
            .filter(|t| *t <= 50_000_000)
            .ok_or_else(|| Error::Config(format!("grid {k}^{dim} is too large")))?;
        let axis: Vec<Vec<f64>> = (0..dim)
            .map(|a| {
                if k == 1 {
                    vec![0.5 * (bx.lo[a] + bx.hi[a])]
                } else {
                    (0..k)
                        .map(|j| {
                            if j + 1 == k {
                                bx.hi[a]
                            } else {
                                bx.lo[a] + (bx.hi[a] - bx.lo[a]) * j as f64 / (k - 1) as f64
                            }
                        })
                        .collect()
                }
            })
            .collect();
        let mut coords = Vec::with_capacity(total * dim);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            for a in 0..dim {
                coords.push(axis[a][idx[a]]);
            }
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < k {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(SampleGrid {
            bx: bx.clone(),
            k,
            coords,
        })
    }

    pub fn bx(&self) -> &CoordBox {
        &self.bx
    }

    pub fn points_per_axis(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.bx.dim()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim())
    }

    /// Same box, `2k - 1` points per axis.
    pub fn refined(&self) -> Result<SampleGrid> {
        SampleGrid::new(&self.bx, 2 * self.k - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_validation() {
        assert!(CoordBox::new(vec![0.0], vec![1.0]).is_err());
        assert!(CoordBox::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(CoordBox::cube(5, -1.0, 1.0).is_err());
        let big = Limits {
            max_complex_dim: 5,
            ..Limits::default()
        };
        assert!(CoordBox::with_limits(vec![0.0; 10], vec![1.0; 10], &big).is_ok());
        let b = CoordBox::cube(2, -1.0, 1.0).unwrap();
        assert_eq!(b.n(), 2);
        assert!((b.diameter() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn grid_is_lexicographic_with_endpoints() {
        let b = CoordBox::new(vec![0.0, 10.0], vec![1.0, 12.0]).unwrap();
        let g = SampleGrid::new(&b, 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.point(0), &[0.0, 10.0]);
        assert_eq!(g.point(1), &[0.0, 11.0]);
        assert_eq!(g.point(2), &[0.0, 12.0]);
        assert_eq!(g.point(3), &[0.5, 10.0]);
        assert_eq!(g.point(8), &[1.0, 12.0]);
        assert_eq!(SampleGrid::new(&b, 1).unwrap().point(0), &[0.5, 11.0]);
        assert!(SampleGrid::new(&b, 0).is_err());
    }

    #[test]
    fn intersections() {
        let a = CoordBox::cube(1, 0.0, 2.0).unwrap();
        let b = CoordBox::cube(1, 1.0, 3.0).unwrap();
        assert_eq!(
            a.intersect(&b).unwrap(),
            CoordBox::cube(1, 1.0, 2.0).unwrap()
        );
        let c = CoordBox::cube(1, 2.0, 3.0).unwrap();
        assert!(a.intersect(&c).is_none());
        assert!(a.contains_box(&CoordBox::cube(1, 0.5, 1.0).unwrap(), 0.0));
    }
}
