//! Invariant (n−1)-cell reconstruction: basin boundaries graphed as height
//! fields `μ(g)` over a hyperplane orthogonal to the cone's interior
//! direction, found by bisecting the basin-membership oracle along rays.
//!
//! A cell patch stores one height per grid node (or `Missing`), with the
//! guarantee that the oracle is false `2·tol` on the non-member side of a
//! defined height and true `2·tol` on the member side.

use nalgebra::DVector;

use crate::attractor::{AlphaLimit, AlphaParams, AttractorBounds};
use crate::error::{Error, Result};
use crate::geom::AxisBox;
use crate::integrate::{flow_map, FlowOutcome, IntegratorConfig};
use crate::order::{classify_difference, ConeSpec, RegionTag};
use crate::scenario::Scenario;
use crate::structure::{basin_classify, BasinLabel};

/// A backward-converged label must match the cell's target equilibrium to
/// this absolute tolerance.
pub const TARGET_MATCH_TOL: f64 = 1e-5;

/// Fraction of the ray bracket clipped off each end so probes stay strictly
/// inside the validity domain.
pub const BRACKET_INSET_FRAC: f64 = 1e-3;

/// A node is usable only when at least this fraction of nodes is defined.
pub const MIN_DEFINED_FRACTION: f64 = 0.5;

/// Orthonormal frame of a hyperplane `H = origin + span(basis)` with unit
/// normal `v` (the cone's interior direction).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneFrame {
    origin: DVector<f64>,
    v: DVector<f64>,
    basis: Vec<DVector<f64>>,
}

impl HyperplaneFrame {
    /// Builds the frame from a base point and a (not necessarily unit)
    /// normal. The in-plane basis comes from Gram–Schmidt over the
    /// coordinate axes taken in a deterministic order: ascending by
    /// `|v_j|`, ties by index.
    pub fn new(origin: DVector<f64>, normal: &DVector<f64>) -> Result<Self> {
        let n = origin.len();
        if normal.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: normal.len() });
        }
        if n < 2 {
            return Err(Error::InvalidArgument("hyperplane frames need dimension >= 2".into()));
        }
        let norm = normal.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::InvalidArgument("hyperplane normal is degenerate".into()));
        }
        let v = normal / norm;
        let mut axes: Vec<usize> = (0..n).collect();
        axes.sort_by(|&a, &b| {
            v[a].abs().partial_cmp(&v[b].abs()).expect("finite").then(a.cmp(&b))
        });
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
        for &axis in &axes {
            if basis.len() == n - 1 {
                break;
            }
            let mut e = DVector::zeros(n);
            e[axis] = 1.0;
            e -= &v * v.dot(&e);
            for b in &basis {
                let proj = b.dot(&e);
                e -= b * proj;
            }
            let len = e.norm();
            if len > 1e-8 {
                basis.push(e / len);
            }
        }
        if basis.len() != n - 1 {
            return Err(Error::InvalidArgument("could not complete hyperplane basis".into()));
        }
        Ok(Self { origin, v, basis })
    }

    /// Frame through the projection of the domain center onto `v⊥`.
    pub fn from_domain_center(domain: &AxisBox, normal: &DVector<f64>) -> Result<Self> {
        let c = domain.center();
        let norm = normal.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidArgument("hyperplane normal is degenerate".into()));
        }
        let v = normal / norm;
        let origin = &c - &v * v.dot(&c);
        Self::new(origin, normal)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &DVector<f64> {
        &self.origin
    }

    pub fn normal(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    /// The ray base point at in-plane coordinates `g`.
    pub fn base_point(&self, g: &[f64]) -> Result<DVector<f64>> {
        if g.len() != self.basis.len() {
            return Err(Error::DimensionMismatch { expected: self.basis.len(), got: g.len() });
        }
        let mut p = self.origin.clone();
        for (gi, e) in g.iter().zip(&self.basis) {
            p += e * *gi;
        }
        Ok(p)
    }

    /// The point at in-plane coordinates `g` and height `mu`.
    pub fn point(&self, g: &[f64], mu: f64) -> Result<DVector<f64>> {
        Ok(self.base_point(g)? + &self.v * mu)
    }

    /// Signed height of `x` over the hyperplane.
    pub fn height(&self, x: &DVector<f64>) -> f64 {
        self.v.dot(&(x - &self.origin))
    }

    /// In-plane coordinates of the projection of `x`.
    pub fn grid_coords(&self, x: &DVector<f64>) -> Vec<f64> {
        let d = x - &self.origin;
        self.basis.iter().map(|e| e.dot(&d)).collect()
    }
}

/// Uniform grid on the hyperplane: `nodes_per_axis` nodes per in-plane
/// axis, spanning `[-half_extent, half_extent]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nodes_per_axis: usize,
    pub half_extent: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_axis == 0 {
            return Err(Error::InvalidArgument("grid needs at least one node per axis".into()));
        }
        if self.nodes_per_axis > 1 && !(self.half_extent > 0.0) {
            return Err(Error::InvalidArgument("grid half extent must be positive".into()));
        }
        Ok(())
    }

    /// Node spacing (0 for a single-node axis).
    pub fn step(&self) -> f64 {
        if self.nodes_per_axis > 1 {
            2.0 * self.half_extent / (self.nodes_per_axis - 1) as f64
        } else {
            0.0
        }
    }

    /// Coordinate of node `k` along one axis.
    pub fn coord(&self, k: usize) -> f64 {
        if self.nodes_per_axis > 1 {
            -self.half_extent + self.step() * k as f64
        } else {
            0.0
        }
    }

    pub fn node_count(&self, axes: usize) -> usize {
        self.nodes_per_axis.pow(axes as u32)
    }
}

/// What the cell is a boundary of.
#[derive(Debug, Clone, PartialEq)]
pub enum CellTarget {
    Equilibrium(DVector<f64>),
    PlusInfinity,
    MinusInfinity,
}

/// Which one-sided basin boundary the cell graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellSide {
    /// Members (lower-repulsion basin of the target) lie at high `μ`; the
    /// height is the infimum of the member side.
    LowerBoundaryOfLowerRepulsion,
    /// Members (upper-repulsion basin) lie at low `μ`; the height is the
    /// supremum of the member side.
    UpperBoundaryOfUpperRepulsion,
}

/// Height of one grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeHeight {
    Defined { mu: f64 },
    Missing,
}

impl NodeHeight {
    pub fn mu(&self) -> Option<f64> {
        match self {
            NodeHeight::Defined { mu } => Some(*mu),
            NodeHeight::Missing => None,
        }
    }
}

/// A reconstructed boundary patch: heights over the hyperplane grid,
/// row-major with the first in-plane axis slowest.
#[derive(Debug, Clone)]
pub struct CellPatch {
    pub target: CellTarget,
    pub side: CellSide,
    pub frame: HyperplaneFrame,
    pub grid: GridSpec,
    pub heights: Vec<NodeHeight>,
    /// Bisection tolerance of every defined height.
    pub tol: f64,
}

impl CellPatch {
    fn axes(&self) -> usize {
        self.frame.dim() - 1
    }

    /// Grid indices of a flat node index (first axis slowest).
    pub fn node_indices(&self, flat: usize) -> Vec<usize> {
        let m = self.grid.nodes_per_axis;
        let axes = self.axes();
        let mut ks = vec![0usize; axes];
        let mut rest = flat;
        for a in (0..axes).rev() {
            ks[a] = rest % m;
            rest /= m;
        }
        ks
    }

    /// Flat index of grid indices.
    pub fn flat_index(&self, ks: &[usize]) -> usize {
        ks.iter().fold(0usize, |acc, &k| acc * self.grid.nodes_per_axis + k)
    }

    /// In-plane coordinates of a node.
    pub fn node_coords(&self, flat: usize) -> Vec<f64> {
        self.node_indices(flat).iter().map(|&k| self.grid.coord(k)).collect()
    }

    /// The reconstructed boundary point at a defined node.
    pub fn node_point(&self, flat: usize) -> Option<DVector<f64>> {
        let mu = self.heights[flat].mu()?;
        self.frame.point(&self.node_coords(flat), mu).ok()
    }

    pub fn defined_fraction(&self) -> f64 {
        if self.heights.is_empty() {
            return 0.0;
        }
        let defined = self.heights.iter().filter(|h| h.mu().is_some()).count();
        defined as f64 / self.heights.len() as f64
    }

    /// A patch with too many missing nodes cannot support interpolation or
    /// disjointness verdicts.
    pub fn usable(&self) -> bool {
        self.defined_fraction() >= MIN_DEFINED_FRACTION
    }
}

/// Everything the membership oracle needs.
pub struct CellContext<'a> {
    pub scenario: &'a Scenario,
    pub cone: &'a ConeSpec,
    pub bounds: &'a AttractorBounds,
    pub params: AlphaParams,
    pub cfg: IntegratorConfig,
}

impl<'a> CellContext<'a> {
    pub fn new(
        scenario: &'a Scenario,
        cone: &'a ConeSpec,
        bounds: &'a AttractorBounds,
        params: AlphaParams,
        cfg: IntegratorConfig,
    ) -> Self {
        Self { scenario, cone, bounds, params, cfg }
    }

    fn check_side(target: &CellTarget, side: CellSide) -> Result<()> {
        let bad = matches!(
            (target, side),
            (CellTarget::MinusInfinity, CellSide::LowerBoundaryOfLowerRepulsion)
                | (CellTarget::PlusInfinity, CellSide::UpperBoundaryOfUpperRepulsion)
        );
        if bad {
            return Err(Error::InvalidArgument(
                "cell side is incompatible with the target: ±∞ basins are one-sided".into(),
            ));
        }
        Ok(())
    }

    /// Basin-membership oracle. `None` means the backward orbit gave no
    /// verdict within the (possibly extended) time budget.
    pub fn is_member(
        &self,
        x: &DVector<f64>,
        target: &CellTarget,
        side: CellSide,
        t_max: f64,
    ) -> Result<Option<bool>> {
        Self::check_side(target, side)?;
        let mut params = self.params.clone();
        params.t_max = t_max;
        let outcome =
            basin_classify(self.scenario, self.cone, x, self.bounds, &params, &self.cfg)?;
        // A mixed escape is a definitive verdict for a one-sided basin:
        // the backward orbit left along a face, so the point belongs to
        // neither one-sided repulsion basin.
        if matches!(outcome.alpha.limit, AlphaLimit::EscapesMixed) {
            return Ok(Some(false));
        }
        let hit = |p: &DVector<f64>| match target {
            CellTarget::Equilibrium(q) => (p - q).norm() <= TARGET_MATCH_TOL,
            _ => false,
        };
        Ok(match outcome.label {
            BasinLabel::LowerRepulsion(p) => {
                Some(side == CellSide::LowerBoundaryOfLowerRepulsion && hit(&p))
            }
            BasinLabel::UpperRepulsion(p) => {
                Some(side == CellSide::UpperBoundaryOfUpperRepulsion && hit(&p))
            }
            BasinLabel::LowerOfPlusInfinity => Some(
                side == CellSide::LowerBoundaryOfLowerRepulsion
                    && *target == CellTarget::PlusInfinity,
            ),
            BasinLabel::UpperOfMinusInfinity => Some(
                side == CellSide::UpperBoundaryOfUpperRepulsion
                    && *target == CellTarget::MinusInfinity,
            ),
            BasinLabel::Repulsion(_) => Some(false),
            BasinLabel::NotClassified => None,
        })
    }

    /// Oracle with the specified retry policy: a probe that stays
    /// unclassified gets one retry at twice the time budget.
    fn probe(
        &self,
        x: &DVector<f64>,
        target: &CellTarget,
        side: CellSide,
    ) -> Result<Option<bool>> {
        match self.is_member(x, target, side, self.params.t_max)? {
            Some(v) => Ok(Some(v)),
            None => self.is_member(x, target, side, 2.0 * self.params.t_max),
        }
    }

    /// Bisects the membership boundary along the ray over `base_point(g)`.
    ///
    /// Preconditions (checked): for the lower side the oracle must be false
    /// at the bracket bottom and true at the top; mirrored for the upper
    /// side. A bracket that does not straddle the boundary yields
    /// `Missing`, as does a probe that stays unclassified after the
    /// extended retry and one off-center re-split (rays can graze
    /// equilibria, where the backward orbit carries no information).
    pub fn mu_on_ray(
        &self,
        frame: &HyperplaneFrame,
        g: &[f64],
        target: &CellTarget,
        side: CellSide,
        bracket: (f64, f64),
        tol: f64,
    ) -> Result<NodeHeight> {
        Self::check_side(target, side)?;
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("bisection tol must be positive".into()));
        }
        let (mut lo, mut hi) = bracket;
        if !(hi > lo) {
            return Err(Error::InvalidArgument("bisection bracket is empty".into()));
        }
        // Member side at the top for the lower boundary, at the bottom for
        // the upper boundary.
        let member_high = side == CellSide::LowerBoundaryOfLowerRepulsion;
        let probe_at = |mu: f64| -> Result<Option<bool>> {
            self.probe(&frame.point(g, mu)?, target, side)
        };
        let Some(at_lo) = probe_at(lo)? else { return Ok(NodeHeight::Missing) };
        let Some(at_hi) = probe_at(hi)? else { return Ok(NodeHeight::Missing) };
        if at_lo == at_hi || at_hi != member_high {
            return Ok(NodeHeight::Missing);
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            // Golden re-split steps off a measure-zero bad probe point
            // (e.g. the ray grazing an equilibrium at the exact midpoint).
            let (split, verdict) = match probe_at(mid)? {
                Some(v) => (mid, Some(v)),
                None => {
                    let alt = lo + 0.618_033_988_749_894_9 * (hi - lo);
                    (alt, probe_at(alt)?)
                }
            };
            let Some(is_member) = verdict else { return Ok(NodeHeight::Missing) };
            if is_member == member_high {
                hi = split;
            } else {
                lo = split;
            }
        }
        Ok(NodeHeight::Defined { mu: 0.5 * (lo + hi) })
    }

    /// Builds the full patch: every grid node gets a bracket from the ray's
    /// intersection with the validity domain and a bisected height.
    pub fn build_cell(
        &self,
        frame: &HyperplaneFrame,
        grid: GridSpec,
        target: CellTarget,
        side: CellSide,
        tol: f64,
    ) -> Result<CellPatch> {
        Self::check_side(&target, side)?;
        grid.validate()?;
        if frame.dim() != self.scenario.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.scenario.dim(),
                got: frame.dim(),
            });
        }
        let axes = frame.dim() - 1;
        let total = grid.node_count(axes);
        let mut heights = Vec::with_capacity(total);
        let patch_probe = CellPatch {
            target: target.clone(),
            side,
            frame: frame.clone(),
            grid,
            heights: Vec::new(),
            tol,
        };
        for flat in 0..total {
            let g = {
                let ks = patch_probe.node_indices(flat);
                ks.iter().map(|&k| grid.coord(k)).collect::<Vec<f64>>()
            };
            let base = frame.base_point(&g)?;
            let height = match ray_domain_bracket(self.scenario.valid_domain(), &base, frame.normal())
            {
                Some((blo, bhi)) if bhi - blo > 4.0 * tol => {
                    let inset = BRACKET_INSET_FRAC * (bhi - blo);
                    self.mu_on_ray(frame, &g, &target, side, (blo + inset, bhi - inset), tol)?
                }
                _ => NodeHeight::Missing,
            };
            heights.push(height);
        }
        Ok(CellPatch { target, side, frame: frame.clone(), grid, heights, tol })
    }

    /// Audits a patch: pairwise unordering of the reconstructed points,
    /// flow-invariance of the graphed surface, and edge-closure gaps.
    ///
    /// `t_invariance = None` skips the (integration-heavy) invariance
    /// check. At most `sample_cap` nodes are re-bisected per horizon.
    pub fn cell_audit(
        &self,
        cell: &CellPatch,
        t_invariance: Option<f64>,
        sample_cap: usize,
    ) -> Result<CellAudit> {
        let step = cell.grid.step();
        let defined: Vec<(usize, Vec<f64>, f64)> = cell
            .heights
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.mu().map(|mu| (i, cell.node_coords(i), mu)))
            .collect();

        // 1. Unordering of reconstructed points, skipping in-plane
        //    neighbors closer than two grid steps (their height difference
        //    is resolution noise).
        let mut unorder_margin = f64::INFINITY;
        for (a, (_, ga, mua)) in defined.iter().enumerate() {
            for (_, gb, mub) in defined.iter().skip(a + 1) {
                let plane_dist: f64 = ga
                    .iter()
                    .zip(gb)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if step > 0.0 && plane_dist < 2.0 * step {
                    continue;
                }
                let pa = cell.frame.point(ga, *mua)?;
                let pb = cell.frame.point(gb, *mub)?;
                let region = classify_difference(self.cone, &(pb - pa))?;
                let signed = match region.tag {
                    RegionTag::InteriorK => region.margin,
                    RegionTag::InteriorCPlus | RegionTag::InteriorCMinus => -region.margin,
                    _ => 0.0,
                };
                unorder_margin = unorder_margin.min(signed);
            }
        }
        if !unorder_margin.is_finite() {
            unorder_margin = 0.0;
        }

        // 2. Invariance: flow defined nodes forward and re-bisect at the
        //    image's in-plane coordinates; the graphed height must move
        //    with the flow.
        let mut invariance_error: f64 = 0.0;
        let mut invariance_checked = 0usize;
        if let Some(t_inv) = t_invariance {
            let stride = (defined.len() / sample_cap.max(1)).max(1);
            for (_, g, mu) in defined.iter().step_by(stride).take(sample_cap.max(1)) {
                for t in [0.5 * t_inv, t_inv] {
                    let x = cell.frame.point(g, *mu)?;
                    let FlowOutcome::Completed(img) = flow_map(self.scenario, &x, t, &self.cfg)?
                    else {
                        continue;
                    };
                    let g_img = cell.frame.grid_coords(&img);
                    let mu_img = cell.frame.height(&img);
                    let local = 0.05 * self.scenario.valid_domain().diameter_euclid();
                    let half = (100.0 * cell.tol).max(local);
                    let bracket = (mu_img - half, mu_img + half);
                    let mut re = self.mu_on_ray(
                        &cell.frame,
                        &g_img,
                        &cell.target,
                        cell.side,
                        bracket,
                        cell.tol,
                    )?;
                    if re == NodeHeight::Missing {
                        let base = cell.frame.base_point(&g_img)?;
                        if let Some((blo, bhi)) = ray_domain_bracket(
                            self.scenario.valid_domain(),
                            &base,
                            cell.frame.normal(),
                        ) {
                            let inset = BRACKET_INSET_FRAC * (bhi - blo);
                            re = self.mu_on_ray(
                                &cell.frame,
                                &g_img,
                                &cell.target,
                                cell.side,
                                (blo + inset, bhi - inset),
                                cell.tol,
                            )?;
                        }
                    }
                    if let NodeHeight::Defined { mu: mu_re } = re {
                        invariance_error = invariance_error.max((mu_img - mu_re).abs());
                        invariance_checked += 1;
                    }
                }
            }
        }

        // 3. Closure: height gaps across edge-adjacent node pairs compared
        //    against the interior gap scale.
        let m = cell.grid.nodes_per_axis;
        let axes = cell.frame.dim() - 1;
        let mut interior_gap: f64 = 0.0;
        let mut boundary_gap: f64 = 0.0;
        let mut have_interior = false;
        if m > 1 {
            for flat in 0..cell.heights.len() {
                let ks = cell.node_indices(flat);
                for a in 0..axes {
                    if ks[a] + 1 >= m {
                        continue;
                    }
                    let mut ks2 = ks.clone();
                    ks2[a] += 1;
                    let flat2 = cell.flat_index(&ks2);
                    let (Some(mu1), Some(mu2)) =
                        (cell.heights[flat].mu(), cell.heights[flat2].mu())
                    else {
                        continue;
                    };
                    let gap = (mu1 - mu2).abs();
                    let edge = ks.iter().chain(ks2.iter()).any(|&k| k == 0 || k == m - 1);
                    if edge {
                        boundary_gap = boundary_gap.max(gap);
                    } else {
                        interior_gap = interior_gap.max(gap);
                        have_interior = true;
                    }
                }
            }
        }
        let closure_ratio = if boundary_gap == 0.0 {
            0.0
        } else if have_interior && interior_gap > 0.0 {
            boundary_gap / interior_gap
        } else {
            // No interior pairs (tiny grids): compare against the
            // bisection tolerance scale instead.
            boundary_gap / (4.0 * cell.tol)
        };

        Ok(CellAudit { unorder_margin, invariance_error, invariance_checked, closure_ratio })
    }

    /// Checks that `points` lie on the graphed surface: the height of each
    /// point is compared with the patch's prediction at the point's
    /// in-plane coordinates.
    pub fn containment_check(
        &self,
        points: &[DVector<f64>],
        cell: &CellPatch,
        mode: ContainmentMode,
    ) -> Result<ContainmentReport> {
        let mut max_deviation: f64 = 0.0;
        let mut uncovered = 0usize;
        let mut checked = 0usize;
        for p in points {
            let g = cell.frame.grid_coords(p);
            let mu_p = cell.frame.height(p);
            let predicted = match mode {
                ContainmentMode::Interpolate => interpolate_height(cell, &g),
                ContainmentMode::ReBisect => {
                    let local = 0.05 * self.scenario.valid_domain().diameter_euclid();
                    let half = (100.0 * cell.tol).max(local);
                    match self.mu_on_ray(
                        &cell.frame,
                        &g,
                        &cell.target,
                        cell.side,
                        (mu_p - half, mu_p + half),
                        cell.tol,
                    )? {
                        NodeHeight::Defined { mu } => Some(mu),
                        NodeHeight::Missing => None,
                    }
                }
            };
            match predicted {
                Some(mu_hat) => {
                    checked += 1;
                    max_deviation = max_deviation.max((mu_p - mu_hat).abs());
                }
                None => uncovered += 1,
            }
        }
        Ok(ContainmentReport { max_deviation, uncovered, checked })
    }
}

/// Interpolation strategy for [`CellContext::containment_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainmentMode {
    /// Multilinear interpolation between the surrounding defined nodes.
    Interpolate,
    /// Fresh bisection at the queried in-plane coordinates.
    ReBisect,
}

/// Report of [`CellContext::containment_check`].
#[derive(Debug, Clone)]
pub struct ContainmentReport {
    pub max_deviation: f64,
    /// Points outside the defined grid region (or unresolvable rays).
    pub uncovered: usize,
    pub checked: usize,
}

/// Report of [`CellContext::cell_audit`].
#[derive(Debug, Clone)]
pub struct CellAudit {
    /// Minimum signed unorder margin over checked node pairs: positive
    /// means robustly unordered, negative means an order relation was
    /// certified (a violation for an invariant cell).
    pub unorder_margin: f64,
    /// Maximum height mismatch after flowing nodes forward.
    pub invariance_error: f64,
    pub invariance_checked: usize,
    /// Edge gap scale relative to interior gaps (≫1 suggests the patch
    /// stops short of closing at its rim).
    pub closure_ratio: f64,
}

/// Verdict of [`cells_disjoint`].
#[derive(Debug, Clone)]
pub struct DisjointReport {
    /// Minimum height separation over shared defined nodes.
    pub separation: f64,
    pub shared_nodes: usize,
    pub pass: bool,
}

/// Compares two patches over the same frame and grid: they are disjoint
/// when the heights stay separated by more than the summed certificates
/// `2(tol_a + tol_b)` at every shared defined node.
pub fn cells_disjoint(a: &CellPatch, b: &CellPatch) -> Result<DisjointReport> {
    let same_frame = a.frame.dim() == b.frame.dim()
        && (a.frame.origin() - b.frame.origin()).norm() <= 1e-12
        && (a.frame.normal() - b.frame.normal()).norm() <= 1e-12;
    if !same_frame || a.grid != b.grid {
        return Err(Error::InvalidArgument(
            "cell patches live on different frames or grids and are incomparable".into(),
        ));
    }
    let mut separation = f64::INFINITY;
    let mut shared = 0usize;
    for (ha, hb) in a.heights.iter().zip(&b.heights) {
        if let (Some(ma), Some(mb)) = (ha.mu(), hb.mu()) {
            shared += 1;
            separation = separation.min((ma - mb).abs());
        }
    }
    if shared == 0 {
        return Err(Error::EmptySet { context: "cell patches share no defined nodes" });
    }
    Ok(DisjointReport {
        separation,
        shared_nodes: shared,
        pass: separation > 2.0 * (a.tol + b.tol),
    })
}

/// The parameter interval of `base + μ·v` inside `domain` (None when the
/// ray misses it).
pub fn ray_domain_bracket(
    domain: &AxisBox,
    base: &DVector<f64>,
    v: &DVector<f64>,
) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for j in 0..base.len() {
        let (a, b) = (domain.lo()[j], domain.hi()[j]);
        if v[j].abs() < 1e-14 {
            if base[j] < a || base[j] > b {
                return None;
            }
            continue;
        }
        let (t1, t2) = ((a - base[j]) / v[j], (b - base[j]) / v[j]);
        let (t1, t2) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        lo = lo.max(t1);
        hi = hi.min(t2);
    }
    (hi > lo).then_some((lo, hi))
}

/// Multilinear interpolation of a patch height at in-plane coordinates
/// `g`; `None` outside the grid or when a surrounding node is missing.
pub fn interpolate_height(cell: &CellPatch, g: &[f64]) -> Option<f64> {
    let m = cell.grid.nodes_per_axis;
    let axes = cell.frame.dim() - 1;
    if g.len() != axes {
        return None;
    }
    if m == 1 {
        // Degenerate grid: only the exact node is covered.
        let near = g.iter().all(|&x| x.abs() <= 1e-9);
        return if near { cell.heights[0].mu() } else { None };
    }
    let he = cell.grid.half_extent;
    let step = cell.grid.step();
    let mut base = vec![0usize; axes];
    let mut frac = vec![0.0f64; axes];
    for a in 0..axes {
        if g[a] < -he - 1e-12 || g[a] > he + 1e-12 {
            return None;
        }
        let s = ((g[a] + he) / step).clamp(0.0, (m - 1) as f64);
        let c = (s.floor() as usize).min(m - 2);
        base[a] = c;
        frac[a] = s - c as f64;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << axes) {
        let mut ks = base.clone();
        let mut w = 1.0;
        for a in 0..axes {
            let bit = (corner >> a) & 1;
            ks[a] += bit;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        let flat = cell.flat_index(&ks);
        match cell.heights[flat].mu() {
            Some(mu) => acc += w * mu,
            None if w <= 1e-12 => {}
            None => return None,
        }
    }
    Some(acc)
}
