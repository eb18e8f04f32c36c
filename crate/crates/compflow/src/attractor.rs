//! Dissipation-side analysis: competitiveness checks, attractor bounding
//! boxes (`x⋆ = inf Γ`, `x★ = sup Γ`), and backward-orbit (α-limit)
//! classification.
//!
//! Backward-orbit classification is the workhorse oracle behind the basin
//! labels and the invariant-cell reconstruction: a point either falls back
//! onto an equilibrium, escapes to infinity above `x⋆` / below `x★`
//! (membership evidence for the repulsion basins of `±∞`), escapes in a
//! mixed direction, or stays bounded without converging.

use crate::error::{Error, Result};
use crate::geom::AxisBox;
use crate::integrate::{AdvanceOutcome, IntegratorConfig, Stepper};
use crate::order::{classify_difference, ConeSpec, RegionTag};
use crate::rng::rng_for;
use crate::scenario::Scenario;
use crate::equilibria::newton_refine;
use nalgebra::DVector;

/// Result of the sampled strong-competitiveness check.
#[derive(Debug, Clone)]
pub struct CompetitivenessReport {
    /// Number of sampled Jacobians.
    pub samples: usize,
    /// Largest off-diagonal entry seen in transformed coordinates
    /// (`G⁻¹·Df·G`); nonpositive for a competitive system.
    pub max_offdiag: f64,
    /// Strong connectivity of the aggregated strict-sign graph.
    pub irreducible: bool,
    /// `max_offdiag ≤ 0` and the strict pattern is irreducible.
    pub strongly_competitive: bool,
}

/// Samples Jacobians over the validity domain and verifies the strong
/// competitiveness hypothesis in cone coordinates: every off-diagonal entry
/// nonpositive, and the entries that are strictly negative at every sample
/// must form an irreducible (strongly connected) influence pattern.
pub fn check_strong_competitiveness(
    scenario: &Scenario,
    cone: &ConeSpec,
    sample_count: usize,
    seed: u64,
) -> Result<CompetitivenessReport> {
    if cone.dim() != scenario.dim() {
        return Err(Error::DimensionMismatch { expected: scenario.dim(), got: cone.dim() });
    }
    let n = scenario.dim();
    let g = cone.generators().clone();
    let g_inv = g
        .clone()
        .try_inverse()
        .expect("ConeSpec construction guarantees invertibility");
    let domain = scenario.valid_domain();
    let mut max_offdiag = f64::NEG_INFINITY;
    // strict_everywhere[i][j]: entry (i,j) strictly negative at every sample.
    let mut strict_everywhere = vec![vec![true; n]; n];
    let mut count = 0usize;
    for k in 0..sample_count {
        let mut rng = rng_for(seed, k as u64);
        let x = domain.sample_uniform(&mut rng);
        let j = scenario.jacobian(&x)?;
        let jt = &g_inv * j * &g;
        for i in 0..n {
            for l in 0..n {
                if i == l {
                    continue;
                }
                let v = jt[(i, l)];
                max_offdiag = max_offdiag.max(v);
                if !(v < 0.0) {
                    strict_everywhere[i][l] = false;
                }
            }
        }
        count += 1;
    }
    let irreducible = strongly_connected(&strict_everywhere);
    Ok(CompetitivenessReport {
        samples: count,
        max_offdiag,
        irreducible,
        strongly_competitive: max_offdiag <= 0.0 && irreducible,
    })
}

/// Strong connectivity of the digraph `j → i` whenever `edges[i][j]`
/// (species j strictly influences species i).
fn strongly_connected(edges: &[Vec<bool>]) -> bool {
    let n = edges.len();
    if n == 1 {
        return true;
    }
    let reach = |transpose: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut visited = 1;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let connected = if transpose { edges[u][v] } else { edges[v][u] };
                if connected && !seen[v] {
                    seen[v] = true;
                    visited += 1;
                    stack.push(v);
                }
            }
        }
        visited
    };
    reach(false) == n && reach(true) == n
}

/// Sampling parameters for [`attractor_bounds`].
#[derive(Debug, Clone)]
pub struct BoundsParams {
    pub sample_count: usize,
    /// Transient discarded before recording the tail.
    pub t_settle: f64,
    /// Length of the recorded tail.
    pub t_tail: f64,
    /// Tail sampling interval.
    pub dt: f64,
    pub seed: u64,
}

impl Default for BoundsParams {
    fn default() -> Self {
        Self { sample_count: 64, t_settle: 40.0, t_tail: 20.0, dt: 0.5, seed: 0 }
    }
}

/// Attractor bounding box and its extremal points under the cone order.
#[derive(Debug, Clone)]
pub struct AttractorBounds {
    /// Bounding box of forward tails, inflated by 5%.
    pub bounds_box: AxisBox,
    /// `inf` of the box under the cone order (`x⋆`).
    pub x_star: DVector<f64>,
    /// `sup` of the box under the cone order (`x★`).
    pub x_sup: DVector<f64>,
    /// Forward escapes: nonzero values are dissipation violations.
    pub forward_escapes: usize,
}

/// Estimates `Γ`'s bounding box: integrates seeded samples forward past the
/// transient, hulls the tails, inflates by 5%, and takes the cone-order
/// extrema of the inflated box.
pub fn attractor_bounds(
    scenario: &Scenario,
    cone: &ConeSpec,
    params: &BoundsParams,
    cfg: &IntegratorConfig,
) -> Result<AttractorBounds> {
    let domain = scenario.valid_domain();
    let mut tail_points: Vec<DVector<f64>> = Vec::new();
    let mut forward_escapes = 0usize;
    for k in 0..params.sample_count {
        let mut rng = rng_for(params.seed, k as u64);
        let x0 = domain.sample_uniform(&mut rng);
        let mut stepper = Stepper::new(scenario, &x0, false, cfg)?;
        match stepper.advance_to(params.t_settle)? {
            AdvanceOutcome::Reached => {}
            _ => {
                forward_escapes += 1;
                continue;
            }
        }
        let mut tau = params.t_settle;
        let end = params.t_settle + params.t_tail;
        loop {
            tail_points.push(stepper.state());
            if tau >= end {
                break;
            }
            tau = (tau + params.dt).min(end);
            match stepper.advance_to(tau)? {
                AdvanceOutcome::Reached => {}
                _ => {
                    forward_escapes += 1;
                    break;
                }
            }
        }
    }
    if tail_points.is_empty() {
        return Err(Error::EmptySet { context: "attractor tails (all samples escaped)" });
    }
    let bounds_box = AxisBox::hull(&tail_points)?.inflate_frac(0.05);
    let corners = bounds_box.corners();
    let x_star = crate::order::inf_points(cone, &corners)?;
    let x_sup = crate::order::sup_points(cone, &corners)?;
    Ok(AttractorBounds { bounds_box, x_star, x_sup, forward_escapes })
}

/// α-limit classification of a backward orbit.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaLimit {
    /// The backward orbit enters and stays in a `1e−6` ball of `p`.
    ConvergesTo(DVector<f64>),
    /// Escape with the trailing states all `≫ x⋆`.
    EscapesAboveXStar,
    /// Escape with the trailing states all `≪ x★`.
    EscapesBelowXSup,
    /// Escape without a one-sided order relation to the attractor bounds.
    EscapesMixed,
    /// No escape and no convergence within `T_max`, orbit stayed near the
    /// domain.
    BoundedNonconvergent,
    /// No verdict within `T_max`.
    Unknown,
}

/// Parameters for [`alpha_limit_classify`].
#[derive(Debug, Clone)]
pub struct AlphaParams {
    /// Backward-time budget.
    pub t_max: f64,
    /// Checkpoint spacing.
    pub dt: f64,
    /// Convergence ball radius.
    pub ball_tol: f64,
    /// Fractional inflation of the validity domain inside which a
    /// nonconvergent orbit still counts as bounded.
    pub bounded_inflate: f64,
}

impl Default for AlphaParams {
    fn default() -> Self {
        Self { t_max: 60.0, dt: 0.1, ball_tol: 1e-6, bounded_inflate: 2.0 }
    }
}

/// α-limit verdict together with the backward checkpoint trail
/// `(elapsed backward time, state)` that produced it.
#[derive(Debug, Clone)]
pub struct AlphaOutcome {
    pub limit: AlphaLimit,
    pub trail: Vec<(f64, DVector<f64>)>,
}

/// Classifies the backward orbit of `x`; see [`AlphaLimit`].
///
/// A step-size underflow (finite-time backward blow-up) is treated exactly
/// like an escape: both are membership evidence for the repulsion basin of
/// infinity, and the trailing states decide on which side.
pub fn alpha_limit_classify(
    scenario: &Scenario,
    cone: &ConeSpec,
    x: &DVector<f64>,
    bounds: &AttractorBounds,
    params: &AlphaParams,
    cfg: &IntegratorConfig,
) -> Result<AlphaOutcome> {
    const WINDOW: usize = 10;
    let mut stepper = Stepper::new(scenario, x, true, cfg)?;
    let mut trail: Vec<(f64, DVector<f64>)> = vec![(0.0, x.clone())];
    let mut k = 1u64;
    let limit = loop {
        let target = (k as f64 * params.dt).min(params.t_max);
        match stepper.advance_to(target)? {
            AdvanceOutcome::Reached => {
                trail.push((stepper.tau(), stepper.state()));
                // Convergence probe: the recent window collapsed to a point.
                if trail.len() > WINDOW {
                    let last = &trail[trail.len() - 1].1;
                    let window = &trail[trail.len() - WINDOW..];
                    let diam =
                        window.iter().map(|(_, s)| (s - last).amax()).fold(0.0, f64::max);
                    if diam < 0.5 * params.ball_tol {
                        if let Some(p) = newton_refine(scenario, last, 1e-12, 40) {
                            if (last - &p).norm() < params.ball_tol {
                                // Confirm the orbit stays in the ball.
                                let confirm = stepper.tau() + 2.0;
                                if stepper.advance_to(confirm)? == AdvanceOutcome::Reached
                                    && (stepper.state() - &p).norm() < params.ball_tol
                                {
                                    trail.push((stepper.tau(), stepper.state()));
                                    break AlphaLimit::ConvergesTo(p);
                                }
                                trail.push((stepper.tau(), stepper.state()));
                            }
                        }
                    }
                }
                if target >= params.t_max {
                    let bounded_box =
                        scenario.valid_domain().inflate_frac(params.bounded_inflate);
                    let bounded =
                        trail.iter().all(|(_, s)| bounded_box.contains(s));
                    break if bounded {
                        AlphaLimit::BoundedNonconvergent
                    } else {
                        AlphaLimit::Unknown
                    };
                }
            }
            AdvanceOutcome::Escaped | AdvanceOutcome::Blowup => {
                trail.push((stepper.tau(), stepper.state()));
                let bounded_box =
                    scenario.valid_domain().inflate_frac(params.bounded_inflate);
                break escape_side(cone, bounds, &bounded_box, &trail);
            }
        }
        // Skip checkpoints the confirmation probe may have advanced past,
        // while keeping `k` strictly increasing so rounding in the
        // time/index conversion can never regenerate the same target.
        k = k.max((stepper.tau() / params.dt).floor() as u64) + 1;
    };
    Ok(AlphaOutcome { limit, trail })
}

/// Decides the escape side from the trailing checkpoints that have left
/// the inflated validity domain — escape is abrupt near a blow-up, so
/// earlier checkpoints reflect transit, not the escape direction. All
/// escaped states `≫ x⋆` means above, all `≪ x★` means below, anything
/// else is mixed.
fn escape_side(
    cone: &ConeSpec,
    bounds: &AttractorBounds,
    bounded_box: &AxisBox,
    trail: &[(f64, DVector<f64>)],
) -> AlphaLimit {
    let tail_len = trail.len().min(8);
    let window = &trail[trail.len() - tail_len..];
    let mut check: Vec<&DVector<f64>> =
        window.iter().map(|(_, s)| s).filter(|s| !bounded_box.contains(s)).collect();
    if check.is_empty() {
        check.push(&trail[trail.len() - 1].1);
    }
    let above = check.iter().all(|s| {
        classify_difference(cone, &(*s - &bounds.x_star))
            .map(|r| r.tag == RegionTag::InteriorCPlus)
            .unwrap_or(false)
    });
    if above {
        return AlphaLimit::EscapesAboveXStar;
    }
    let below = check.iter().all(|s| {
        classify_difference(cone, &(&bounds.x_sup - *s))
            .map(|r| r.tag == RegionTag::InteriorCPlus)
            .unwrap_or(false)
    });
    if below {
        AlphaLimit::EscapesBelowXSup
    } else {
        AlphaLimit::EscapesMixed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::by_name;

    fn orthant(n: usize) -> ConeSpec {
        ConeSpec::orthant(n).unwrap()
    }

    #[test]
    fn bistable_is_strongly_competitive() {
        let s = by_name("bistable3").unwrap();
        let rep = check_strong_competitiveness(&s, &orthant(3), 40, 7).unwrap();
        assert!((rep.max_offdiag + 0.1).abs() < 1e-12, "constant −k off-diagonals");
        assert!(rep.irreducible);
        assert!(rep.strongly_competitive);
    }

    #[test]
    fn may_leonard_offdiag_bound() {
        // ∂f_i/∂x_j ∈ {−αx_i, −βx_i} ≤ −0.5·0.05 on [0.05, 1.5]³.
        let s = by_name("ml_sym").unwrap();
        let rep = check_strong_competitiveness(&s, &orthant(3), 60, 11).unwrap();
        assert!(rep.max_offdiag <= -0.5 * 0.05 + 1e-12);
        assert!(rep.strongly_competitive);
    }

    #[test]
    fn triangular_linear_is_reducible() {
        use nalgebra::DMatrix;
        let s = crate::scenario::Scenario::linear(
            "tri",
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -0.5, -1.0]),
            AxisBox::cube(2, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let rep = check_strong_competitiveness(&s, &orthant(2), 20, 3).unwrap();
        assert!(!rep.irreducible);
        assert!(!rep.strongly_competitive);
    }

    #[test]
    fn linear_attractor_collapses_to_origin() {
        let s = by_name("linear2").unwrap();
        let b = attractor_bounds(
            &s,
            &orthant(2),
            &BoundsParams::default(),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(b.forward_escapes, 0);
        assert!(b.x_star.amax() < 1e-3);
        assert!(b.x_sup.amax() < 1e-3);
    }

    #[test]
    fn ml_attractor_box_within_unit_scale() {
        // ẋ_i ≤ x_i(1 − x_i) forces limsup x_i ≤ 1.
        let s = by_name("ml_sym").unwrap();
        let b = attractor_bounds(
            &s,
            &orthant(3),
            &BoundsParams::default(),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(b.forward_escapes, 0);
        for i in 0..3 {
            assert!(b.bounds_box.lo()[i] >= -1e-9);
            assert!(b.bounds_box.hi()[i] <= 1.05);
        }
    }

    #[test]
    fn alpha_limit_examples() {
        let s = by_name("ml_sym").unwrap();
        let cone = orthant(3);
        let cfg = IntegratorConfig::default();
        let bounds =
            attractor_bounds(&s, &cone, &BoundsParams::default(), &cfg).unwrap();
        let params = AlphaParams::default();

        // Below the carrying simplex: backward orbit falls onto the origin.
        let low = DVector::from_element(3, 0.1);
        let out = alpha_limit_classify(&s, &cone, &low, &bounds, &params, &cfg).unwrap();
        match out.limit {
            AlphaLimit::ConvergesTo(p) => assert!(p.norm() < 1e-9, "limit {p:?}"),
            other => panic!("expected origin convergence, got {other:?}"),
        }

        // Above the simplex: diagonal backward blow-up, all coordinates large.
        let high = DVector::from_element(3, 2.0);
        let out = alpha_limit_classify(&s, &cone, &high, &bounds, &params, &cfg).unwrap();
        assert_eq!(out.limit, AlphaLimit::EscapesAboveXStar);

        // An equilibrium is (trivially) its own α-limit.
        let e = DVector::from_element(3, 0.5);
        let out = alpha_limit_classify(&s, &cone, &e, &bounds, &params, &cfg).unwrap();
        match out.limit {
            AlphaLimit::ConvergesTo(p) => assert!((p - e).norm() < 1e-9),
            other => panic!("expected stationary convergence, got {other:?}"),
        }
    }
}
