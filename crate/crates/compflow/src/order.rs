//! Cone-order predicates for simplicial cones.
//!
//! A simplicial cone `C⁺ = G · [0,∞)^n` (columns of the invertible matrix
//! `G` generate the cone) induces the partial order `x ≤ y ⟺ y − x ∈ C⁺`,
//! with strict form `x ≪ y ⟺ y − x ∈ Int C⁺`. Writing `C = C⁺ ∪ (−C⁺)` and
//! `K` for the closure of the complement of `C`, every difference vector
//! falls into exactly one of: the interior of `C⁺`, the interior of `−C⁺`,
//! the interior of `K` (unordered), or the *joint cone-boundary*
//! `∂C = ∂C⁺ ∪ ∂(−C⁺)` where the verdict is degenerate.
//!
//! Mapping a difference through `G⁻¹` reduces every one of these predicates
//! to coordinate sign checks, and the sup-norm of the transformed vector
//! gives a certified margin. Strictness is certified against the margin
//! `η`: sign conditions that hold by less than `η` are never reported as
//! strict.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Default strictness margin for certifying strict cone-order verdicts.
pub const DEFAULT_ETA: f64 = 1e-9;

/// Condition-number ceiling above which a generator matrix is rejected.
const MAX_CONDITION: f64 = 1e12;

/// A simplicial cone order on `R^n`.
#[derive(Debug, Clone)]
pub struct ConeSpec {
    dim: usize,
    generators: DMatrix<f64>,
    inverse: DMatrix<f64>,
    eta: f64,
    /// Canonical interior direction `G·(1,…,1)`, normalized.
    interior_direction: DVector<f64>,
}

/// Region of a difference vector relative to the cone decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionTag {
    /// Strictly inside `C⁺`: certifies `≪`.
    InteriorCPlus,
    /// Strictly inside `−C⁺`.
    InteriorCMinus,
    /// Strictly inside `K`: certifies an unordered pair.
    InteriorK,
    /// On (or within `η` of) the joint cone-boundary `∂C`.
    JointBoundary,
    /// All transformed coordinates within `η` of zero.
    Zero,
}

/// Classification of a difference vector, with a certified margin.
///
/// The margin is measured in the transformed (cone) coordinates, sup-norm:
/// it is the smallest coordinate perturbation that could change the tag.
/// Only `JointBoundary` and `Zero` may carry a zero margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRegion {
    pub tag: RegionTag,
    pub margin: f64,
}

/// Relation of `x` to `y` under the cone order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderRelation {
    /// `y − x` is zero at resolution `η`.
    Equal,
    /// `y − x` lies on `∂C⁺` exactly (boundary coordinates are exact zeros):
    /// `x ≤ y` but not certifiably `x ≪ y`.
    Leq,
    /// Mirror of [`OrderRelation::Leq`].
    Geq,
    /// `x ≪ y` with margin `> η`.
    StrictlyBelow,
    /// `y ≪ x` with margin `> η`.
    StrictlyAbove,
    /// `y − x ∈ Int K` with margin `> η`.
    Unordered,
    /// The verdict depends on nonzero coordinates within `η` of zero.
    Marginal,
}

/// Outcome of [`is_unordered_set`].
#[derive(Debug, Clone, PartialEq)]
pub enum UnorderedVerdict {
    Unordered,
    /// Some pair is ordered or marginal at the requested margin; the first
    /// failing pair is returned as `(index, index)` into the input.
    Failure { pair: (usize, usize), region: OrderRegion },
}

/// Outcome of [`order_parameterize`].
#[derive(Debug, Clone, PartialEq)]
pub enum ChainParam {
    /// The set is a strongly ordered chain: `order[k]` indexes the k-th
    /// point from below and `projections` are its strictly increasing
    /// coordinates `x·v` along the interior direction.
    Chain { order: Vec<usize>, projections: Vec<f64> },
    /// Some pair is not strictly ordered.
    NotChain { pair: (usize, usize), region: OrderRegion },
}

impl ConeSpec {
    /// Builds a cone order from a generator matrix; columns of `generators`
    /// span the cone. Rejects non-square, non-finite, or ill-conditioned
    /// matrices (condition estimate above 1e12).
    pub fn new(generators: DMatrix<f64>, eta: f64) -> Result<Self> {
        let dim = generators.nrows();
        if dim == 0 || generators.ncols() != dim {
            return Err(Error::InvalidArgument(format!(
                "cone generator matrix must be square and nonempty, got {}x{}",
                generators.nrows(),
                generators.ncols()
            )));
        }
        if generators.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "cone generators" });
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidArgument("cone margin eta must be a nonnegative real".into()));
        }
        let svd = generators.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 0.0) || smax / smin > MAX_CONDITION {
            return Err(Error::SingularMatrix {
                context: format!(
                    "cone generator matrix (condition estimate {:.3e})",
                    if smin > 0.0 { smax / smin } else { f64::INFINITY }
                ),
            });
        }
        let inverse = generators
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMatrix { context: "cone generator matrix".into() })?;
        // Residual check on the inverse: ‖G·G⁻¹ − I‖∞ must be tiny.
        let residual = (&generators * &inverse - DMatrix::<f64>::identity(dim, dim)).amax();
        if residual >= 1e-10 {
            return Err(Error::SingularMatrix {
                context: format!("cone generator inverse residual {residual:.3e}"),
            });
        }
        let mut interior_direction = &generators * DVector::from_element(dim, 1.0);
        interior_direction /= interior_direction.norm();
        Ok(Self { dim, generators, inverse, eta, interior_direction })
    }

    /// The standard orthant order on `R^n` (`G = I`, default margin).
    pub fn orthant(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n), DEFAULT_ETA)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    /// Canonical interior direction `v = G·(1,…,1)/‖G·(1,…,1)‖`; satisfies
    /// `0 ≪ v`.
    pub fn interior_direction(&self) -> &DVector<f64> {
        &self.interior_direction
    }

    /// Difference vector in cone coordinates, `c = G⁻¹ d`.
    pub fn to_cone_coords(&self, d: &DVector<f64>) -> DVector<f64> {
        &self.inverse * d
    }

    /// Maps cone coordinates back to ambient coordinates.
    pub fn from_cone_coords(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.generators * c
    }

    fn check_dim(&self, d: &DVector<f64>) -> Result<()> {
        if d.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: d.len() });
        }
        Ok(())
    }
}

/// Classifies a difference vector against the region decomposition
/// `Int C⁺ ∪ Int(−C⁺) ∪ Int K ∪ ∂C`, with a certified margin.
///
/// With `c = G⁻¹ d`, `pos = max_i c_i`, `neg = max_i (−c_i)`:
/// - `Zero` when `‖c‖∞ ≤ η` (margin: `η − ‖c‖∞`),
/// - `InteriorCPlus` when `min_i c_i > η` (margin `min_i c_i`),
/// - `InteriorCMinus` symmetric (margin `min_i (−c_i)`),
/// - `InteriorK` when `pos > η` and `neg > η` (margin `min(pos, neg)`),
/// - `JointBoundary` otherwise (margin 0).
pub fn classify_difference(cone: &ConeSpec, d: &DVector<f64>) -> Result<OrderRegion> {
    cone.check_dim(d)?;
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "difference vector" });
    }
    let c = cone.to_cone_coords(d);
    let eta = cone.eta;
    let pos = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let neg = c.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max);
    let sup = pos.max(neg);
    if sup <= eta {
        return Ok(OrderRegion { tag: RegionTag::Zero, margin: eta - sup });
    }
    let min = -neg; // min_i c_i
    if min > eta {
        return Ok(OrderRegion { tag: RegionTag::InteriorCPlus, margin: min });
    }
    if -pos > eta {
        return Ok(OrderRegion { tag: RegionTag::InteriorCMinus, margin: -pos });
    }
    if pos > eta && neg > eta {
        return Ok(OrderRegion { tag: RegionTag::InteriorK, margin: pos.min(neg) });
    }
    Ok(OrderRegion { tag: RegionTag::JointBoundary, margin: 0.0 })
}

/// Relates `x` to `y`: the relation is read off `classify_difference(y − x)`.
///
/// A `JointBoundary` verdict whose near-zero coordinates are *exact* zeros is
/// reported as the non-strict `Leq`/`Geq`; if any deciding coordinate is
/// nonzero but within `η`, the verdict genuinely depends on sub-margin data
/// and `Marginal` is returned instead.
pub fn order_relate(cone: &ConeSpec, x: &DVector<f64>, y: &DVector<f64>) -> Result<OrderRelation> {
    cone.check_dim(x)?;
    cone.check_dim(y)?;
    let d = y - x;
    let region = classify_difference(cone, &d)?;
    Ok(match region.tag {
        RegionTag::Zero => {
            if d.iter().all(|&v| v == 0.0) {
                OrderRelation::Equal
            } else if d.amax() <= f64::EPSILON {
                // Differences at rounding noise are still Equal…
                OrderRelation::Equal
            } else {
                // …but a genuinely nonzero sub-η difference is ambiguous.
                OrderRelation::Marginal
            }
        }
        RegionTag::InteriorCPlus => OrderRelation::StrictlyBelow,
        RegionTag::InteriorCMinus => OrderRelation::StrictlyAbove,
        RegionTag::InteriorK => OrderRelation::Unordered,
        RegionTag::JointBoundary => {
            let c = cone.to_cone_coords(&d);
            let eta = cone.eta;
            let all_small_exact = c.iter().all(|&v| v.abs() > eta || v == 0.0);
            if !all_small_exact {
                OrderRelation::Marginal
            } else if c.iter().all(|&v| v >= 0.0) {
                OrderRelation::Leq
            } else if c.iter().all(|&v| v <= 0.0) {
                OrderRelation::Geq
            } else {
                // Unreachable for a JointBoundary tag (coordinates on both
                // strict sides would have classified InteriorK), but keep a
                // safe answer rather than a panic.
                OrderRelation::Marginal
            }
        }
    })
}

/// Checks that no two points of `S` are order-related: every distinct pair
/// must classify `InteriorK` with margin ≥ `margin`. Returns the first
/// ordered or marginal pair on failure. Singletons are trivially unordered.
pub fn is_unordered_set(
    cone: &ConeSpec,
    points: &[DVector<f64>],
    margin: f64,
) -> Result<UnorderedVerdict> {
    if points.is_empty() {
        return Err(Error::EmptySet { context: "is_unordered_set" });
    }
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = &points[j] - &points[i];
            let region = classify_difference(cone, &d)?;
            let ok = region.tag == RegionTag::InteriorK && region.margin >= margin;
            if !ok {
                return Ok(UnorderedVerdict::Failure { pair: (i, j), region });
            }
        }
    }
    Ok(UnorderedVerdict::Unordered)
}

/// Parameterizes a strongly ordered chain by its projections `x·v` onto the
/// canonical interior direction. All pairs must classify strictly (`Int C⁺`
/// one way or the other); the projections of the sorted chain must then be
/// strictly increasing, which certifies the chain order.
pub fn order_parameterize(cone: &ConeSpec, points: &[DVector<f64>]) -> Result<ChainParam> {
    order_parameterize_along(cone, points, cone.interior_direction())
}

/// [`order_parameterize`] with an explicit interior direction `v`. Any
/// direction with `0 ≪ v` sorts a strongly ordered chain identically.
pub fn order_parameterize_along(
    cone: &ConeSpec,
    points: &[DVector<f64>],
    v: &DVector<f64>,
) -> Result<ChainParam> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "order_parameterize requires at least two points".into(),
        ));
    }
    cone.check_dim(v)?;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = &points[j] - &points[i];
            let region = classify_difference(cone, &d)?;
            match region.tag {
                RegionTag::InteriorCPlus | RegionTag::InteriorCMinus => {}
                _ => return Ok(ChainParam::NotChain { pair: (i, j), region }),
            }
        }
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .dot(v)
            .partial_cmp(&points[b].dot(v))
            .expect("finite projections")
    });
    let projections: Vec<f64> = order.iter().map(|&i| points[i].dot(v)).collect();
    for w in projections.windows(2) {
        if !(w[1] > w[0]) {
            // Two chain points with identical projection onto an interior
            // direction cannot be strictly ordered; report the offending pair.
            let a = order[projections.iter().position(|&p| p == w[0]).unwrap_or(0)];
            let b = order[projections.iter().position(|&p| p == w[1]).unwrap_or(0)];
            return Ok(ChainParam::NotChain {
                pair: (a.min(b), a.max(b)),
                region: OrderRegion { tag: RegionTag::JointBoundary, margin: 0.0 },
            });
        }
    }
    Ok(ChainParam::Chain { order, projections })
}

/// Least upper bound of a finite set: componentwise max in cone coordinates,
/// mapped back through `G`. Equals an element of `S` when `S` is totally
/// ordered.
pub fn sup_points(cone: &ConeSpec, points: &[DVector<f64>]) -> Result<DVector<f64>> {
    bound_points(cone, points, true)
}

/// Greatest lower bound; dual of [`sup_points`].
pub fn inf_points(cone: &ConeSpec, points: &[DVector<f64>]) -> Result<DVector<f64>> {
    bound_points(cone, points, false)
}

fn bound_points(cone: &ConeSpec, points: &[DVector<f64>], upper: bool) -> Result<DVector<f64>> {
    let first = points.first().ok_or(Error::EmptySet { context: "sup/inf of point set" })?;
    cone.check_dim(first)?;
    let mut acc = cone.to_cone_coords(first);
    for p in &points[1..] {
        cone.check_dim(p)?;
        let c = cone.to_cone_coords(p);
        for i in 0..acc.len() {
            acc[i] = if upper { acc[i].max(c[i]) } else { acc[i].min(c[i]) };
        }
    }
    Ok(cone.from_cone_coords(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn orthant2() -> ConeSpec {
        ConeSpec::orthant(2).unwrap()
    }

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_row_slice(&[a, b])
    }

    #[test]
    fn classify_orthant_regions() {
        let cone = orthant2();
        let r = classify_difference(&cone, &vec2(1.0, 1.0)).unwrap();
        assert_eq!(r.tag, RegionTag::InteriorCPlus);
        assert_relative_eq!(r.margin, 1.0);

        let r = classify_difference(&cone, &vec2(1.0, 0.0)).unwrap();
        assert_eq!(r.tag, RegionTag::JointBoundary);
        assert_eq!(r.margin, 0.0);

        let r = classify_difference(&cone, &vec2(1.0, -1.0)).unwrap();
        assert_eq!(r.tag, RegionTag::InteriorK);
        assert_relative_eq!(r.margin, 1.0);

        let r = classify_difference(&cone, &vec2(0.0, 0.0)).unwrap();
        assert_eq!(r.tag, RegionTag::Zero);
    }

    #[test]
    fn classify_skewed_cone() {
        // G = [[1,0],[1,1]]: d = (1,2) has cone coordinates (1,1).
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let cone = ConeSpec::new(g, DEFAULT_ETA).unwrap();
        let r = classify_difference(&cone, &vec2(1.0, 2.0)).unwrap();
        assert_eq!(r.tag, RegionTag::InteriorCPlus);
        assert_relative_eq!(r.margin, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn relate_matches_examples() {
        let cone = orthant2();
        assert_eq!(
            order_relate(&cone, &vec2(0.0, 0.0), &vec2(1.0, 1.0)).unwrap(),
            OrderRelation::StrictlyBelow
        );
        assert_eq!(
            order_relate(&cone, &vec2(0.5, 0.5), &vec2(0.5, 0.5)).unwrap(),
            OrderRelation::Equal
        );
        assert_eq!(
            order_relate(&cone, &vec2(0.0, 0.0), &vec2(1.0, -1.0)).unwrap(),
            OrderRelation::Unordered
        );
        // Exact boundary: Leq, not Marginal.
        assert_eq!(
            order_relate(&cone, &vec2(0.0, 0.0), &vec2(1.0, 0.0)).unwrap(),
            OrderRelation::Leq
        );
        // Sub-margin fuzz on the deciding coordinate: Marginal.
        assert_eq!(
            order_relate(&cone, &vec2(0.0, 0.0), &vec2(1.0, 1e-12)).unwrap(),
            OrderRelation::Marginal
        );
    }

    #[test]
    fn unordered_set_examples() {
        let cone = orthant2();
        let one = [vec2(0.0, 0.0)];
        assert_eq!(is_unordered_set(&cone, &one, 0.0).unwrap(), UnorderedVerdict::Unordered);

        let anti = [vec2(0.0, 1.0), vec2(1.0, 0.0)];
        assert_eq!(is_unordered_set(&cone, &anti, 1.0).unwrap(), UnorderedVerdict::Unordered);

        let ordered = [vec2(0.0, 0.0), vec2(1.0, 1.0)];
        match is_unordered_set(&cone, &ordered, 0.0).unwrap() {
            UnorderedVerdict::Failure { pair, region } => {
                assert_eq!(pair, (0, 1));
                assert_eq!(region.tag, RegionTag::InteriorCPlus);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn parameterize_diagonal_chain() {
        let cone = orthant2();
        let pts = [vec2(0.0, 0.0), vec2(1.0, 1.0), vec2(2.0, 2.0)];
        match order_parameterize(&cone, &pts).unwrap() {
            ChainParam::Chain { order, projections } => {
                assert_eq!(order, vec![0, 1, 2]);
                assert_relative_eq!(projections[1], 2.0_f64.sqrt(), epsilon = 1e-12);
                assert_relative_eq!(projections[2], 2.0 * 2.0_f64.sqrt(), epsilon = 1e-12);
            }
            other => panic!("expected chain, got {other:?}"),
        }

        let anti = [vec2(0.0, 1.0), vec2(1.0, 0.0)];
        assert!(matches!(
            order_parameterize(&cone, &anti).unwrap(),
            ChainParam::NotChain { pair: (0, 1), .. }
        ));
    }

    #[test]
    fn sup_inf_examples() {
        let cone = orthant2();
        let pts = [vec2(0.0, 1.0), vec2(1.0, 0.0)];
        assert_eq!(sup_points(&cone, &pts).unwrap(), vec2(1.0, 1.0));
        assert_eq!(inf_points(&cone, &pts).unwrap(), vec2(0.0, 0.0));

        // Skewed cone: hand-transformed componentwise max.
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let cone = ConeSpec::new(g, DEFAULT_ETA).unwrap();
        let pts = [vec2(1.0, 1.0), vec2(0.0, 1.0)];
        let sup = sup_points(&cone, &pts).unwrap();
        assert_relative_eq!(sup[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sup[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_singular_generators() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(ConeSpec::new(g, DEFAULT_ETA).is_err());
    }
}
