//! Axis-aligned boxes.
//!
//! Boxes serve two roles: scenario validity domains and the cells of the
//! subdivision covers in [`crate::cover`]. They are closed product intervals
//! `[lo_1, hi_1] × … × [lo_n, hi_n]`.

use crate::error::{Error, Result};
use nalgebra::DVector;
use rand::Rng;

/// A closed axis-aligned box `[lo, hi]` in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl AxisBox {
    /// Builds a box from its componentwise bounds. Requires `lo_i ≤ hi_i`
    /// and finite coordinates.
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().chain(hi.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "box bounds" });
        }
        if lo.iter().zip(hi.iter()).any(|(a, b)| a > b) {
            return Err(Error::InvalidArgument(
                "box lower bound exceeds upper bound".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    /// Convenience constructor from slices.
    pub fn from_slices(lo: &[f64], hi: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(lo), DVector::from_row_slice(hi))
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, lo), DVector::from_element(n, hi))
    }

    /// Smallest box containing every point of `points`.
    pub fn hull(points: &[DVector<f64>]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptySet { context: "box hull" })?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in &points[1..] {
            for i in 0..lo.len() {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &DVector<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &DVector<f64> {
        &self.hi
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lo + &self.hi) * 0.5
    }

    /// Per-axis half-widths.
    pub fn radii(&self) -> DVector<f64> {
        (&self.hi - &self.lo) * 0.5
    }

    /// Largest per-axis width (sup-norm diameter).
    pub fn diameter_sup(&self) -> f64 {
        (&self.hi - &self.lo).amax()
    }

    /// Euclidean diagonal length.
    pub fn diameter_euclid(&self) -> f64 {
        (&self.hi - &self.lo).norm()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lo[i] && v <= self.hi[i])
    }

    /// Membership of the box inflated by `pad` on every side.
    pub fn contains_with_pad(&self, x: &DVector<f64>, pad: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lo[i] - pad && v <= self.hi[i] + pad)
    }

    /// True when the closed boxes share a point.
    pub fn intersects(&self, other: &AxisBox) -> bool {
        self.lo
            .iter()
            .zip(other.hi.iter())
            .all(|(a, b)| a <= b)
            && other
                .lo
                .iter()
                .zip(self.hi.iter())
                .all(|(a, b)| a <= b)
    }

    /// The `2^n` corner points, in lexicographic bit order (bit `i` of the
    /// corner index selects `hi_i` over `lo_i`).
    pub fn corners(&self) -> Vec<DVector<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                DVector::from_iterator(
                    n,
                    (0..n).map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] }),
                )
            })
            .collect()
    }

    /// One uniform sample from the box.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| {
                if self.hi[i] > self.lo[i] {
                    rng.gen_range(self.lo[i]..self.hi[i])
                } else {
                    self.lo[i]
                }
            }),
        )
    }

    /// Box scaled about its center by `1 + frac` per axis (degenerate axes
    /// stay degenerate).
    pub fn inflate_frac(&self, frac: f64) -> AxisBox {
        let c = self.center();
        let r = self.radii() * (1.0 + frac);
        AxisBox { lo: &c - &r, hi: &c + &r }
    }

    /// Box grown by the absolute amount `pad` on every side.
    pub fn inflate_abs(&self, pad: f64) -> AxisBox {
        AxisBox {
            lo: self.lo.map(|v| v - pad),
            hi: self.hi.map(|v| v + pad),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_bounds() {
        assert!(AxisBox::from_slices(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn corners_of_unit_square() {
        let b = AxisBox::cube(2, 0.0, 1.0).unwrap();
        let cs = b.corners();
        assert_eq!(cs.len(), 4);
        assert_eq!(cs[0], DVector::from_row_slice(&[0.0, 0.0]));
        assert_eq!(cs[3], DVector::from_row_slice(&[1.0, 1.0]));
    }

    #[test]
    fn hull_and_membership() {
        let pts = [
            DVector::from_row_slice(&[0.0, 2.0]),
            DVector::from_row_slice(&[1.0, -1.0]),
        ];
        let b = AxisBox::hull(&pts).unwrap();
        assert!(b.contains(&DVector::from_row_slice(&[0.5, 0.0])));
        assert!(!b.contains(&DVector::from_row_slice(&[1.5, 0.0])));
        assert_eq!(b.diameter_sup(), 3.0);
    }

    #[test]
    fn inflate_frac_keeps_center() {
        let b = AxisBox::cube(2, -1.0, 1.0).unwrap();
        let g = b.inflate_frac(0.05);
        assert_eq!(g.center(), b.center());
        assert!((g.diameter_sup() - 2.1).abs() < 1e-12);
    }
}
