//! Axis-aligned box covers over a rectangular domain.
//!
//! A [`BoxCover`] splits each axis of its domain into `2^depth` equal cells
//! and tracks the subset of boxes that are still *active* (surviving the
//! transition-graph pruning in [`crate::transition`]). Box geometry is fully
//! determined by the flat index, so only the index set is stored.

use std::collections::BTreeSet;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geom::AxisBox;

/// Hard cap on `dim × depth` so a flat index always fits into `u64`.
const MAX_INDEX_BITS: u32 = 60;

/// Hard cap on the number of boxes materialized by [`BoxCover::full`].
const MAX_FULL_BOXES: u64 = 1 << 22;

/// A uniform-depth box cover: the active subset of the `2^(dim·depth)`
/// grid boxes over `domain`.
#[derive(Debug, Clone)]
pub struct BoxCover {
    domain: AxisBox,
    depth: u32,
    active: BTreeSet<u64>,
}

impl BoxCover {
    /// Cover with every box at `depth` active.
    ///
    /// Fails if the index space exceeds [`MAX_INDEX_BITS`] bits or the box
    /// count exceeds [`MAX_FULL_BOXES`]; deep covers should be reached by
    /// subdividing pruned shallow covers instead.
    pub fn full(domain: AxisBox, depth: u32) -> Result<Self> {
        Self::check_depth(&domain, depth)?;
        let count = 1u64 << (domain.dim() as u32 * depth);
        if count > MAX_FULL_BOXES {
            return Err(Error::InvalidArgument(format!(
                "full cover at depth {depth} would hold {count} boxes; start shallower and subdivide"
            )));
        }
        let active = (0..count).collect();
        Ok(Self { domain, depth, active })
    }

    /// Cover from an explicit active set.
    pub fn from_active(domain: AxisBox, depth: u32, active: BTreeSet<u64>) -> Result<Self> {
        Self::check_depth(&domain, depth)?;
        let count = 1u64 << (domain.dim() as u32 * depth);
        if let Some(&bad) = active.iter().find(|&&i| i >= count) {
            return Err(Error::InvalidArgument(format!(
                "box index {bad} out of range at depth {depth}"
            )));
        }
        Ok(Self { domain, depth, active })
    }

    fn check_depth(domain: &AxisBox, depth: u32) -> Result<()> {
        let bits = domain.dim() as u32 * depth;
        if depth == 0 || bits > MAX_INDEX_BITS {
            return Err(Error::InvalidArgument(format!(
                "depth {depth} unusable in dimension {} (index needs {bits} bits)",
                domain.dim()
            )));
        }
        Ok(())
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn active(&self) -> &BTreeSet<u64> {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Number of cells per axis, `2^depth`.
    pub fn cells_per_axis(&self) -> u64 {
        1u64 << self.depth
    }

    /// Per-axis box half-widths (identical for every box at this depth).
    pub fn radii(&self) -> DVector<f64> {
        self.domain.radii() / self.cells_per_axis() as f64
    }

    /// Per-axis box widths.
    pub fn widths(&self) -> DVector<f64> {
        2.0 * self.radii()
    }

    /// Flat index from per-axis cell coordinates (axis 0 most significant).
    pub fn encode(&self, cells: &[u64]) -> u64 {
        debug_assert_eq!(cells.len(), self.dim());
        let mut index = 0u64;
        for &c in cells {
            debug_assert!(c < self.cells_per_axis());
            index = (index << self.depth) | c;
        }
        index
    }

    /// Per-axis cell coordinates of a flat index.
    pub fn decode(&self, index: u64) -> Vec<u64> {
        let mask = self.cells_per_axis() - 1;
        let n = self.dim();
        let mut cells = vec![0u64; n];
        let mut rest = index;
        for i in (0..n).rev() {
            cells[i] = rest & mask;
            rest >>= self.depth;
        }
        cells
    }

    /// Geometry of the box with the given index.
    pub fn box_at(&self, index: u64) -> AxisBox {
        let cells = self.decode(index);
        let w = self.widths();
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            lo[i] = self.domain.lo()[i] + cells[i] as f64 * w[i];
            hi[i] = lo[i] + w[i];
        }
        AxisBox::new(lo, hi).expect("cell bounds are ordered by construction")
    }

    /// Center of the box with the given index.
    pub fn center(&self, index: u64) -> DVector<f64> {
        let cells = self.decode(index);
        let w = self.widths();
        let mut c = self.domain.lo().clone();
        for i in 0..self.dim() {
            c[i] += (cells[i] as f64 + 0.5) * w[i];
        }
        c
    }

    /// Index of the box containing `x`, or `None` if `x` lies outside the
    /// domain. Points on interior cell boundaries go to the higher cell.
    pub fn index_of(&self, x: &DVector<f64>) -> Option<u64> {
        if !self.domain.contains(x) {
            return None;
        }
        let w = self.widths();
        let last = self.cells_per_axis() - 1;
        let mut cells = vec![0u64; self.dim()];
        for i in 0..self.dim() {
            let t = (x[i] - self.domain.lo()[i]) / w[i];
            cells[i] = (t.floor() as u64).min(last);
        }
        Some(self.encode(&cells))
    }

    /// Inclusive per-axis cell ranges of boxes intersecting `query`, clamped
    /// to the grid; `None` if the query misses the domain entirely.
    pub fn cell_range(&self, query: &AxisBox) -> Option<Vec<(u64, u64)>> {
        if !self.domain.intersects(query) {
            return None;
        }
        let w = self.widths();
        let last = self.cells_per_axis() - 1;
        let mut ranges = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let lo_t = (query.lo()[i] - self.domain.lo()[i]) / w[i];
            let hi_t = (query.hi()[i] - self.domain.lo()[i]) / w[i];
            let lo_c = lo_t.floor().max(0.0) as u64;
            let hi_c = (hi_t.floor().max(0.0) as u64).min(last);
            let lo_c = lo_c.min(last);
            if hi_c < lo_c {
                return None;
            }
            ranges.push((lo_c, hi_c));
        }
        Some(ranges)
    }

    /// Cover at `depth + 1` whose active set is the children of the current
    /// active boxes (each box splits into `2^dim`).
    pub fn subdivide(&self) -> Result<BoxCover> {
        Self::check_depth(&self.domain, self.depth + 1)?;
        let n = self.dim();
        let mut children = BTreeSet::new();
        for &index in &self.active {
            let cells = self.decode(index);
            for corner in 0u64..(1 << n) {
                let mut child = 0u64;
                for (i, &c) in cells.iter().enumerate() {
                    let bit = (corner >> (n - 1 - i)) & 1;
                    child = (child << (self.depth + 1)) | (2 * c + bit);
                }
                children.insert(child);
            }
        }
        Ok(BoxCover { domain: self.domain.clone(), depth: self.depth + 1, active: children })
    }

    /// Index of the parent box one depth up.
    pub fn coarsen_index(&self, index: u64) -> u64 {
        let cells = self.decode(index);
        let mut parent = 0u64;
        for &c in &cells {
            parent = (parent << (self.depth - 1)) | (c >> 1);
        }
        parent
    }

    /// Keeps only the given boxes active.
    pub fn retain(&mut self, keep: &BTreeSet<u64>) {
        self.active = self.active.intersection(keep).copied().collect();
    }

    /// Face-adjacency connected components of the active set.
    ///
    /// Two boxes are adjacent when their cell coordinates differ by exactly
    /// one along exactly one axis. Components are sorted by their smallest
    /// member index, and each component lists its members in ascending order.
    pub fn spatial_components(&self) -> Vec<Vec<u64>> {
        let mut unseen: BTreeSet<u64> = self.active.clone();
        let mut components = Vec::new();
        while let Some(&start) = unseen.iter().next() {
            unseen.remove(&start);
            let mut component = vec![start];
            let mut frontier = vec![start];
            while let Some(index) = frontier.pop() {
                let cells = self.decode(index);
                for axis in 0..self.dim() {
                    for delta in [-1i64, 1] {
                        let c = cells[axis] as i64 + delta;
                        if c < 0 || c as u64 >= self.cells_per_axis() {
                            continue;
                        }
                        let mut neighbor_cells = cells.clone();
                        neighbor_cells[axis] = c as u64;
                        let neighbor = self.encode(&neighbor_cells);
                        if unseen.remove(&neighbor) {
                            component.push(neighbor);
                            frontier.push(neighbor);
                        }
                    }
                }
            }
            component.sort_unstable();
            components.push(component);
        }
        components
    }

    /// Axis-aligned hull of the active boxes, or `None` when empty.
    pub fn active_hull(&self) -> Option<AxisBox> {
        let mut iter = self.active.iter();
        let first = self.box_at(*iter.next()?);
        let (mut lo, mut hi) = (first.lo().clone(), first.hi().clone());
        for &index in iter {
            let b = self.box_at(index);
            lo.zip_apply(b.lo(), |l, other| *l = l.min(other));
            hi.zip_apply(b.hi(), |h, other| *h = h.max(other));
        }
        Some(AxisBox::new(lo, hi).expect("hull bounds are ordered"))
    }

    /// Sup-norm diameter of the union of active boxes (via the hull).
    pub fn union_diameter_sup(&self) -> Option<f64> {
        self.active_hull().map(|h| h.diameter_sup())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> AxisBox {
        AxisBox::from_slices(&[-1.0, -1.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn encode_decode_roundtrip() {
        let cover = BoxCover::full(unit_square(), 3).unwrap();
        for index in 0..64u64 {
            assert_eq!(cover.encode(&cover.decode(index)), index);
        }
    }

    #[test]
    fn centers_and_membership_agree() {
        let cover = BoxCover::full(unit_square(), 4).unwrap();
        for &index in cover.active() {
            let c = cover.center(index);
            assert_eq!(cover.index_of(&c), Some(index));
            assert!(cover.box_at(index).contains(&c));
        }
        let outside = DVector::from_vec(vec![1.5, 0.0]);
        assert_eq!(cover.index_of(&outside), None);
    }

    #[test]
    fn radii_halve_per_depth() {
        let cover = BoxCover::full(unit_square(), 2).unwrap();
        let child = cover.subdivide().unwrap();
        assert_eq!(child.depth(), 3);
        assert_eq!(child.len(), 4 * cover.len());
        assert!((child.radii()[0] - 0.5 * cover.radii()[0]).abs() < 1e-15);
        for &index in child.active() {
            assert!(cover.active().contains(&child.coarsen_index(index)));
        }
    }

    #[test]
    fn spatial_components_split_separated_clusters() {
        let domain = unit_square();
        let full = BoxCover::full(domain.clone(), 2).unwrap();
        // Two opposite corner boxes: cells (0,0) and (3,3).
        let a = full.encode(&[0, 0]);
        let b = full.encode(&[3, 3]);
        let cover = BoxCover::from_active(domain.clone(), 2, [a, b].into()).unwrap();
        assert_eq!(cover.spatial_components(), vec![vec![a], vec![b]]);

        // Adding a connecting path merges everything into one component.
        let path: BTreeSet<u64> = (0..4)
            .map(|k| full.encode(&[k, k]))
            .chain((0..3).map(|k| full.encode(&[k + 1, k])))
            .collect();
        let cover = BoxCover::from_active(domain, 2, path).unwrap();
        assert_eq!(cover.spatial_components().len(), 1);
    }

    #[test]
    fn single_box_is_singleton_component() {
        let cover = BoxCover::from_active(unit_square(), 2, [5u64].into()).unwrap();
        assert_eq!(cover.spatial_components(), vec![vec![5]]);
    }

    #[test]
    fn cell_range_clamps_to_domain() {
        let cover = BoxCover::full(unit_square(), 2).unwrap();
        // A query box hanging off the +x side still intersects the last column.
        let query = AxisBox::from_slices(&[0.9, -0.1], &[1.5, 0.1]).unwrap();
        let ranges = cover.cell_range(&query).unwrap();
        assert_eq!(ranges[0], (3, 3));
        assert_eq!(ranges[1], (1, 2));
        let missing = AxisBox::from_slices(&[2.0, 2.0], &[3.0, 3.0]).unwrap();
        assert!(cover.cell_range(&missing).is_none());
    }

    #[test]
    fn hull_diameter_tracks_active_boxes() {
        let full = BoxCover::full(unit_square(), 2).unwrap();
        let a = full.encode(&[1, 1]);
        let b = full.encode(&[2, 2]);
        let cover = BoxCover::from_active(unit_square(), 2, [a, b].into()).unwrap();
        // Two adjacent diagonal boxes of width 0.5 span 1.0 per axis.
        assert!((cover.union_diameter_sup().unwrap() - 1.0).abs() < 1e-12);
    }
}
