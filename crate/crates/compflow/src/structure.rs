//! Structural audits over components of the recurrent-set approximation:
//! order dichotomy, cone-boundary intersection checks, limit-set comparison,
//! absorbing/connecting consistency, backward-basin labels, backward targets,
//! branch evidence for upper probes, and occupation-measure supports.
//!
//! Every verdict carries explicit margins; resolution-limited observations
//! degrade to `Inconclusive`/warnings instead of overclaiming.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::attractor::{
    alpha_limit_classify, AlphaLimit, AlphaOutcome, AlphaParams, AttractorBounds,
};
use crate::cover::BoxCover;
use crate::equilibria::EquilibriumRecord;
use crate::error::{Error, Result};
use crate::geom::AxisBox;
use crate::integrate::{flow_map, FlowOutcome, IntegratorConfig, Stepper};
use crate::integrate::{AdvanceOutcome, TrajStatus};
use crate::order::{
    classify_difference, inf_points, is_unordered_set, order_parameterize, sup_points,
    ChainParam, ConeSpec, RegionTag, UnorderedVerdict,
};
use crate::recurrence::CloseReturn;
use crate::scenario::Scenario;

/// Pairs closer than this multiple of the box resolution are skipped by the
/// pairwise order audits: their differences are resolution noise.
pub const SKIP_FACTOR: f64 = 2.5;

/// Boxes with visit fraction above this belong to an occupation support.
pub const MIN_VISIT_FRACTION: f64 = 1e-4;

/// Outcome of the order-structure dichotomy for one component.
#[derive(Debug, Clone, PartialEq)]
pub enum DichotomyVerdict {
    /// All representative pairs beyond resolution are unordered; carries the
    /// minimum pairwise interior-of-complement margin.
    Unordered { min_margin: f64 },
    /// All pairs are strictly ordered and every representative sits at an
    /// equilibrium; carries the chain projections onto the canonical
    /// interior direction.
    StronglyOrderedEquilibria { projections: Vec<f64> },
    /// The component collapses to a single cluster at box resolution.
    SingletonTrivial,
    /// Contradictory confident evidence; the witness pair indexes the
    /// representatives that clash (equal indices flag a non-equilibrium
    /// member of an ordered chain).
    Violation { pair: (usize, usize), detail: String },
    /// A marginal pair blocks a confident call.
    Inconclusive { pair: (usize, usize) },
}

/// One spatial component of a box cover, with everything the audits attach.
#[derive(Debug, Clone)]
pub struct ComponentRecord {
    /// Ascending member box indices.
    pub boxes: Vec<u64>,
    /// Representative points (thinned box centers, possibly refined).
    pub representatives: Vec<DVector<f64>>,
    /// Certified recurrent points found inside this component.
    pub certified: Vec<CloseReturn>,
    pub verdict: Option<DichotomyVerdict>,
    /// Backward target from the component infimum (`p`).
    pub target_lower: Option<BackwardTarget>,
    /// Backward target from the component supremum (`q`).
    pub target_upper: Option<BackwardTarget>,
    pub branch_evidence: Option<BranchEvidence>,
}

impl ComponentRecord {
    /// Builds bare records from the spatial components of a cover, thinning
    /// representatives to at most `max_reps` evenly spaced member centers.
    pub fn from_cover(cover: &BoxCover, max_reps: usize) -> Vec<ComponentRecord> {
        cover
            .spatial_components()
            .into_iter()
            .map(|boxes| {
                let stride = (boxes.len() / max_reps.max(1)).max(1);
                let representatives = boxes
                    .iter()
                    .step_by(stride)
                    .take(max_reps.max(1))
                    .map(|&i| cover.center(i))
                    .collect();
                ComponentRecord {
                    boxes,
                    representatives,
                    certified: Vec::new(),
                    verdict: None,
                    target_lower: None,
                    target_upper: None,
                    branch_evidence: None,
                }
            })
            .collect()
    }

    pub fn contains_box(&self, index: u64) -> bool {
        self.boxes.binary_search(&index).is_ok()
    }
}

/// Flows each representative forward by `t_settle` so it lands on the
/// nearby invariant structure; the refined point is kept only when it still
/// lies inside the component's boxes, otherwise the raw center stands.
pub fn refine_representatives(
    scenario: &Scenario,
    cover: &BoxCover,
    component: &ComponentRecord,
    t_settle: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::with_capacity(component.representatives.len());
    for rep in &component.representatives {
        let refined = match flow_map(scenario, rep, t_settle, cfg)? {
            FlowOutcome::Completed(y) => y,
            _ => rep.clone(),
        };
        let keep = cover
            .index_of(&refined)
            .is_some_and(|idx| component.contains_box(idx));
        out.push(if keep { refined } else { rep.clone() });
    }
    Ok(out)
}

/// Classifies the order structure of a component's representatives.
///
/// `resolution` is the box diameter of the underlying cover; pairs closer
/// than [`SKIP_FACTOR`] resolutions are skipped, and clusters no larger than
/// that are reported [`DichotomyVerdict::SingletonTrivial`].
pub fn classify_component(
    cone: &ConeSpec,
    representatives: &[DVector<f64>],
    equilibria: &[EquilibriumRecord],
    margin: f64,
    resolution: f64,
) -> Result<DichotomyVerdict> {
    if representatives.is_empty() {
        return Err(Error::EmptySet { context: "classify_component representatives" });
    }
    let skip = SKIP_FACTOR * resolution;
    let mut diameter: f64 = 0.0;
    for i in 0..representatives.len() {
        for j in (i + 1)..representatives.len() {
            diameter = diameter.max((&representatives[i] - &representatives[j]).norm());
        }
    }
    if diameter <= skip {
        return Ok(DichotomyVerdict::SingletonTrivial);
    }

    let mut min_unordered_margin = f64::INFINITY;
    let mut ordered_pair = None;
    let mut unordered_pair = None;
    let mut marginal_pair = None;
    let mut counted = 0usize;
    let mut ordered = 0usize;
    let mut unordered = 0usize;
    for i in 0..representatives.len() {
        for j in (i + 1)..representatives.len() {
            let d = &representatives[j] - &representatives[i];
            if d.norm() <= skip {
                continue;
            }
            counted += 1;
            let region = classify_difference(cone, &d)?;
            match region.tag {
                RegionTag::InteriorK if region.margin >= margin => {
                    unordered += 1;
                    unordered_pair.get_or_insert((i, j));
                    min_unordered_margin = min_unordered_margin.min(region.margin);
                }
                RegionTag::InteriorCPlus | RegionTag::InteriorCMinus
                    if region.margin >= margin =>
                {
                    ordered += 1;
                    ordered_pair.get_or_insert((i, j));
                }
                _ => {
                    marginal_pair.get_or_insert((i, j));
                }
            }
        }
    }

    if ordered > 0 && unordered > 0 {
        return Ok(DichotomyVerdict::Violation {
            pair: ordered_pair.expect("ordered pair recorded"),
            detail: "ordered pair inside a component with unordered pairs".into(),
        });
    }
    if unordered == counted {
        return Ok(DichotomyVerdict::Unordered { min_margin: min_unordered_margin });
    }
    if ordered == counted {
        for (i, rep) in representatives.iter().enumerate() {
            let near_eq = equilibria
                .iter()
                .any(|e| (&e.point - rep).norm() <= resolution.max(1e-9));
            if !near_eq {
                return Ok(DichotomyVerdict::Violation {
                    pair: (i, i),
                    detail: "ordered chain contains a non-equilibrium representative".into(),
                });
            }
        }
        return match order_parameterize(cone, representatives)? {
            ChainParam::Chain { projections, .. } => {
                Ok(DichotomyVerdict::StronglyOrderedEquilibria { projections })
            }
            ChainParam::NotChain { pair, .. } => Ok(DichotomyVerdict::Inconclusive { pair }),
        };
    }
    Ok(DichotomyVerdict::Inconclusive {
        pair: marginal_pair.unwrap_or((0, 0)),
    })
}

/// A flagged observation from [`intersection_principle_audit`].
#[derive(Debug, Clone)]
pub enum IntersectionFlag {
    /// Two certified recurrent points whose difference sits on or near the
    /// joint cone boundary.
    CertifiedPair { i: usize, j: usize, tag: RegionTag, margin: f64 },
    /// A surviving box (not containing the certified point) whose center
    /// classifies within the shell of the joint boundary.
    BoxNearBoundary { index: u64, certified: usize, margin: f64 },
}

/// Report of [`intersection_principle_audit`].
#[derive(Debug, Clone)]
pub struct IntersectionAudit {
    pub flags: Vec<IntersectionFlag>,
    /// Minimum classification margin over all certified pairs.
    pub min_pair_margin: f64,
    pub pairs_checked: usize,
    pub boxes_checked: usize,
}

impl IntersectionAudit {
    pub fn pass(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Audits that distinct certified recurrent points avoid each other's joint
/// cone boundary, and that surviving boxes keep clear of each certified
/// point's boundary shell.
///
/// Boxes within twice the box radius (sup-norm) of a certified point count
/// as "containing" it at cover resolution and are excluded.
pub fn intersection_principle_audit(
    cone: &ConeSpec,
    certified: &[CloseReturn],
    survivors: &BoxCover,
    shell: f64,
) -> Result<IntersectionAudit> {
    if certified.is_empty() {
        return Err(Error::EmptySet { context: "intersection audit needs a certified point" });
    }
    let mut flags = Vec::new();
    let mut min_pair_margin = f64::INFINITY;
    let mut pairs_checked = 0;
    for i in 0..certified.len() {
        for j in (i + 1)..certified.len() {
            let d = &certified[j].z - &certified[i].z;
            let region = classify_difference(cone, &d)?;
            pairs_checked += 1;
            min_pair_margin = min_pair_margin.min(region.margin);
            let clean = matches!(
                region.tag,
                RegionTag::InteriorCPlus | RegionTag::InteriorCMinus | RegionTag::InteriorK
            ) && region.margin >= shell;
            if !clean {
                flags.push(IntersectionFlag::CertifiedPair {
                    i,
                    j,
                    tag: region.tag,
                    margin: region.margin,
                });
            }
        }
    }
    let exclusion = 2.0 * survivors.radii().amax();
    let mut boxes_checked = 0;
    for (ci, cert) in certified.iter().enumerate() {
        for &index in survivors.active() {
            let center = survivors.center(index);
            if (&center - &cert.z).amax() <= exclusion {
                continue;
            }
            boxes_checked += 1;
            let region = classify_difference(cone, &(&center - &cert.z))?;
            if region.margin < shell {
                flags.push(IntersectionFlag::BoxNearBoundary {
                    index,
                    certified: ci,
                    margin: region.margin,
                });
            }
        }
    }
    Ok(IntersectionAudit { flags, min_pair_margin, pairs_checked, boxes_checked })
}

/// Samples the forward tail of `y` (`burn-in` = half the horizon).
fn omega_tail(
    scenario: &Scenario,
    y: &DVector<f64>,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<DVector<f64>>> {
    let dt = horizon / 200.0;
    let sampled = crate::integrate::flow_sampled(scenario, y, horizon, dt, cfg)?;
    if sampled.status != TrajStatus::Completed {
        return Err(Error::NonFinite { context: "forward tail escaped" });
    }
    Ok(sampled
        .times
        .iter()
        .zip(sampled.states.iter())
        .filter(|(t, _)| **t >= horizon / 2.0)
        .map(|(_, s)| s.clone())
        .collect())
}

/// Report of [`omega_boundary_audit`].
#[derive(Debug, Clone)]
pub struct OmegaBoundaryReport {
    pub samples_checked: usize,
    /// Flagged sample indices with their classification margins.
    pub flagged: Vec<(usize, f64)>,
    pub min_margin: f64,
}

impl OmegaBoundaryReport {
    pub fn pass(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Audits that the sampled forward-limit tail of `y` avoids the joint cone
/// boundary shell around the certified point `x` (beyond box resolution).
pub fn omega_boundary_audit(
    cone: &ConeSpec,
    scenario: &Scenario,
    x: &DVector<f64>,
    y: &DVector<f64>,
    horizon: f64,
    shell: f64,
    resolution: f64,
    cfg: &IntegratorConfig,
) -> Result<OmegaBoundaryReport> {
    let tail = omega_tail(scenario, y, horizon, cfg)?;
    let mut flagged = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut checked = 0;
    for (k, s) in tail.iter().enumerate() {
        let d = s - x;
        if d.norm() <= resolution {
            continue;
        }
        checked += 1;
        let region = classify_difference(cone, &d)?;
        min_margin = min_margin.min(region.margin);
        let clean = matches!(
            region.tag,
            RegionTag::InteriorCPlus | RegionTag::InteriorCMinus | RegionTag::InteriorK
        ) && region.margin >= shell;
        if !clean {
            flagged.push((k, region.margin));
        }
    }
    Ok(OmegaBoundaryReport { samples_checked: checked, flagged, min_margin })
}

/// Verdict of [`limit_set_dichotomy`].
#[derive(Debug, Clone, PartialEq)]
pub enum LimitSetVerdict {
    /// Every cross-pair of the two tails is strictly ordered.
    ApproxRelated,
    /// The pooled tails form an unordered set (beyond resolution).
    UnorderedUnion,
    /// Confidently ordered and confidently unordered cross-pairs coexist.
    Violation { ordered: (usize, usize), unordered: (usize, usize) },
    Inconclusive,
}

/// Greedy thinning: keeps points at least `radius` apart, in input order.
fn epsilon_net(points: &[DVector<f64>], radius: f64) -> Vec<DVector<f64>> {
    let mut net: Vec<DVector<f64>> = Vec::new();
    for p in points {
        if net.iter().all(|q| (p - q).norm() >= radius) {
            net.push(p.clone());
        }
    }
    net
}

/// Compares the forward-limit tails of two certified recurrent points:
/// either they are strictly order-related, or their union is unordered.
pub fn limit_set_dichotomy(
    cone: &ConeSpec,
    scenario: &Scenario,
    x: &DVector<f64>,
    y: &DVector<f64>,
    horizon: f64,
    shell: f64,
    resolution: f64,
    cfg: &IntegratorConfig,
) -> Result<LimitSetVerdict> {
    let tail_x = omega_tail(scenario, x, horizon, cfg)?;
    let tail_y = omega_tail(scenario, y, horizon, cfg)?;
    let mut ordered = 0usize;
    let mut unordered = 0usize;
    let mut marginal = 0usize;
    let mut counted = 0usize;
    let mut ordered_pair = None;
    let mut unordered_pair = None;
    for (i, a) in tail_x.iter().enumerate() {
        for (j, b) in tail_y.iter().enumerate() {
            let d = a - b;
            if d.norm() <= resolution {
                continue;
            }
            counted += 1;
            let region = classify_difference(cone, &d)?;
            match region.tag {
                RegionTag::InteriorCPlus | RegionTag::InteriorCMinus
                    if region.margin >= shell =>
                {
                    ordered += 1;
                    ordered_pair.get_or_insert((i, j));
                }
                RegionTag::InteriorK if region.margin >= shell => {
                    unordered += 1;
                    unordered_pair.get_or_insert((i, j));
                }
                _ => marginal += 1,
            }
        }
    }
    if counted > 0 && ordered == counted {
        return Ok(LimitSetVerdict::ApproxRelated);
    }
    let pooled: Vec<DVector<f64>> =
        tail_x.iter().chain(tail_y.iter()).cloned().collect();
    let net = epsilon_net(&pooled, resolution.max(1e-12));
    if net.len() >= 2 {
        if let UnorderedVerdict::Unordered = is_unordered_set(cone, &net, shell)? {
            return Ok(LimitSetVerdict::UnorderedUnion);
        }
    }
    if ordered > 0 && unordered > 0 {
        return Ok(LimitSetVerdict::Violation {
            ordered: ordered_pair.expect("recorded"),
            unordered: unordered_pair.expect("recorded"),
        });
    }
    let _ = marginal;
    Ok(LimitSetVerdict::Inconclusive)
}

/// A certified point that the connecting-consistency audit says should
/// belong to the component (or nearly does).
#[derive(Debug, Clone)]
pub struct ConnectingFlag {
    pub certified: usize,
    pub ordered_rep: usize,
    pub unordered_rep: usize,
}

/// Report of [`connecting_consistency`].
#[derive(Debug, Clone)]
pub struct ConnectingReport {
    pub violations: Vec<ConnectingFlag>,
    pub warnings: Vec<ConnectingFlag>,
}

/// For each certified point outside the component: representatives that are
/// partly strictly ordered against it and partly unordered mean the point
/// should belong to the component — a violation (warning when one side is
/// only marginal).
pub fn connecting_consistency(
    cone: &ConeSpec,
    component: &ComponentRecord,
    cover: &BoxCover,
    certified: &[CloseReturn],
    margin: f64,
) -> Result<ConnectingReport> {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    if component.representatives.len() < 2 {
        return Ok(ConnectingReport { violations, warnings });
    }
    for (ci, cert) in certified.iter().enumerate() {
        let member = cover
            .index_of(&cert.z)
            .is_some_and(|idx| component.contains_box(idx));
        if member {
            continue;
        }
        let mut ordered: Option<usize> = None;
        let mut unordered: Option<usize> = None;
        let mut marginal_ordered: Option<usize> = None;
        let mut marginal_unordered: Option<usize> = None;
        for (ri, rep) in component.representatives.iter().enumerate() {
            let region = classify_difference(cone, &(rep - &cert.z))?;
            match region.tag {
                RegionTag::InteriorCPlus | RegionTag::InteriorCMinus => {
                    if region.margin >= margin {
                        ordered.get_or_insert(ri);
                    } else {
                        marginal_ordered.get_or_insert(ri);
                    }
                }
                RegionTag::InteriorK => {
                    if region.margin >= margin {
                        unordered.get_or_insert(ri);
                    } else {
                        marginal_unordered.get_or_insert(ri);
                    }
                }
                _ => {}
            }
        }
        match (ordered, unordered) {
            (Some(o), Some(u)) => {
                violations.push(ConnectingFlag { certified: ci, ordered_rep: o, unordered_rep: u });
            }
            (Some(o), None) => {
                if let Some(u) = marginal_unordered {
                    warnings.push(ConnectingFlag { certified: ci, ordered_rep: o, unordered_rep: u });
                }
            }
            (None, Some(u)) => {
                if let Some(o) = marginal_ordered {
                    warnings.push(ConnectingFlag { certified: ci, ordered_rep: o, unordered_rep: u });
                }
            }
            (None, None) => {}
        }
    }
    Ok(ConnectingReport { violations, warnings })
}

/// A component straddle found by [`absorbing_audit`].
#[derive(Debug, Clone)]
pub struct AbsorbingFlag {
    pub equilibrium: usize,
    pub witness_rep: usize,
    pub failing_rep: usize,
    pub margin: f64,
}

/// Report of [`absorbing_audit`].
#[derive(Debug, Clone)]
pub struct AbsorbingReport {
    pub checks: usize,
    pub violations: Vec<AbsorbingFlag>,
}

impl AbsorbingReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// If some representative lies strictly below an outside equilibrium `q`,
/// every representative must lie strictly below `q` (dually for above).
pub fn absorbing_audit(
    cone: &ConeSpec,
    representatives: &[DVector<f64>],
    equilibria: &[EquilibriumRecord],
    margin: f64,
    resolution: f64,
) -> Result<AbsorbingReport> {
    let mut checks = 0;
    let mut violations = Vec::new();
    for (qi, eq) in equilibria.iter().enumerate() {
        let inside = representatives
            .iter()
            .any(|r| (r - &eq.point).norm() <= SKIP_FACTOR * resolution);
        if inside {
            continue;
        }
        for (above, _) in [(true, "below"), (false, "above")] {
            let witness = representatives.iter().enumerate().find_map(|(ri, r)| {
                let region = classify_difference(cone, &(&eq.point - r)).ok()?;
                let hit = if above {
                    region.tag == RegionTag::InteriorCPlus
                } else {
                    region.tag == RegionTag::InteriorCMinus
                };
                (hit && region.margin >= margin).then_some(ri)
            });
            let Some(wi) = witness else { continue };
            checks += 1;
            for (ri, r) in representatives.iter().enumerate() {
                let region = classify_difference(cone, &(&eq.point - r))?;
                let ok = if above {
                    region.tag == RegionTag::InteriorCPlus && region.margin >= margin
                } else {
                    region.tag == RegionTag::InteriorCMinus && region.margin >= margin
                };
                if !ok {
                    violations.push(AbsorbingFlag {
                        equilibrium: qi,
                        witness_rep: wi,
                        failing_rep: ri,
                        margin: region.margin,
                    });
                }
            }
        }
    }
    Ok(AbsorbingReport { checks, violations })
}

/// Backward-basin label of a point.
#[derive(Debug, Clone, PartialEq)]
pub enum BasinLabel {
    /// Backward orbit converges to `p` from strictly below.
    LowerRepulsion(DVector<f64>),
    /// Backward orbit converges to `p` from strictly above.
    UpperRepulsion(DVector<f64>),
    /// Backward orbit escapes above the attractor floor.
    LowerOfPlusInfinity,
    /// Backward orbit escapes below the attractor ceiling.
    UpperOfMinusInfinity,
    /// Converges to `p` without a one-sided order relation.
    Repulsion(DVector<f64>),
    NotClassified,
}

/// A basin label together with the backward trail that produced it.
#[derive(Debug, Clone)]
pub struct BasinOutcome {
    pub label: BasinLabel,
    pub alpha: AlphaOutcome,
}

/// Wraps the backward-orbit classifier and adds the order tag: convergence
/// to `p` from strictly below/above the whole way gives the one-sided
/// repulsion labels; backward escape above/below gives the basin of ±∞.
pub fn basin_classify(
    scenario: &Scenario,
    cone: &ConeSpec,
    x: &DVector<f64>,
    bounds: &AttractorBounds,
    params: &AlphaParams,
    cfg: &IntegratorConfig,
) -> Result<BasinOutcome> {
    let alpha = alpha_limit_classify(scenario, cone, x, bounds, params, cfg)?;
    let label = match &alpha.limit {
        AlphaLimit::ConvergesTo(p) => {
            let floor = (10.0 * params.ball_tol).max(1e-5);
            let (mut above, mut below, mut other) = (0usize, 0usize, 0usize);
            for (t, s) in &alpha.trail {
                let d = s - p;
                if *t == 0.0 || d.norm() < floor {
                    continue;
                }
                match classify_difference(cone, &d)?.tag {
                    RegionTag::InteriorCPlus => above += 1,
                    RegionTag::InteriorCMinus => below += 1,
                    _ => other += 1,
                }
            }
            if above + below + other == 0 {
                BasinLabel::NotClassified
            } else if other == 0 && below == 0 {
                BasinLabel::UpperRepulsion(p.clone())
            } else if other == 0 && above == 0 {
                BasinLabel::LowerRepulsion(p.clone())
            } else {
                BasinLabel::Repulsion(p.clone())
            }
        }
        AlphaLimit::EscapesAboveXStar => BasinLabel::LowerOfPlusInfinity,
        AlphaLimit::EscapesBelowXSup => BasinLabel::UpperOfMinusInfinity,
        _ => BasinLabel::NotClassified,
    };
    Ok(BasinOutcome { label, alpha })
}

/// Backward target reached from a component extremum.
#[derive(Debug, Clone, PartialEq)]
pub enum BackwardTarget {
    Equilibrium(DVector<f64>),
    PlusInfinity,
    MinusInfinity,
    /// The extremum is itself the (stationary) limit — degenerate singleton.
    SelfDegenerate(DVector<f64>),
    Unknown,
}

/// Backward targets from the component's order extrema.
#[derive(Debug, Clone)]
pub struct ComponentTargets {
    /// Reached backward from `inf` of the representatives (`p`-side).
    pub lower: BackwardTarget,
    /// Reached backward from `sup` of the representatives (`q`-side).
    pub upper: BackwardTarget,
}

/// Integrates backward from the cone-order supremum and infimum of the
/// representatives; convergence names the target equilibria, escape names
/// ±∞.
pub fn target_equilibrium_for_component(
    scenario: &Scenario,
    cone: &ConeSpec,
    representatives: &[DVector<f64>],
    bounds: &AttractorBounds,
    params: &AlphaParams,
    cfg: &IntegratorConfig,
) -> Result<ComponentTargets> {
    if representatives.is_empty() {
        return Err(Error::EmptySet { context: "component targets need representatives" });
    }
    let q0 = sup_points(cone, representatives)?;
    let p0 = inf_points(cone, representatives)?;
    let classify = |x0: &DVector<f64>, upward: bool| -> Result<BackwardTarget> {
        let out = alpha_limit_classify(scenario, cone, x0, bounds, params, cfg)?;
        Ok(match out.limit {
            AlphaLimit::ConvergesTo(p) => {
                let degenerate = representatives.len() == 1
                    && (&p - &representatives[0]).norm() < 1e-6;
                if degenerate {
                    BackwardTarget::SelfDegenerate(p)
                } else {
                    BackwardTarget::Equilibrium(p)
                }
            }
            AlphaLimit::EscapesAboveXStar if upward => BackwardTarget::PlusInfinity,
            AlphaLimit::EscapesBelowXSup if !upward => BackwardTarget::MinusInfinity,
            _ => BackwardTarget::Unknown,
        })
    };
    Ok(ComponentTargets { lower: classify(&p0, false)?, upper: classify(&q0, true)? })
}

/// Dominant branch of the upper-probe evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchSide {
    /// α-limits of the upward probes are equilibria at or above the base.
    TowardEquilibrium,
    /// Upward probes backward-escape above the attractor.
    TowardInfinity,
    Undecided,
}

/// Tally of upward-probe classifications for one component.
#[derive(Debug, Clone)]
pub struct BranchEvidence {
    pub toward_equilibrium: usize,
    pub toward_infinity: usize,
    /// Converged to an equilibrium not above the base point.
    pub other_converged: usize,
    pub not_classified: usize,
    /// Probes skipped because they left the validity domain.
    pub skipped: usize,
    /// Both kinds of evidence appeared — the density lemma says one branch
    /// must be empty, so this warrants attention.
    pub both_present: bool,
    pub dominant: BranchSide,
}

/// Probes `x + δ·v` for a decreasing δ schedule (fractions of the domain
/// diameter) above each sampled representative and classifies the backward
/// orbit of every probe.
pub fn classify_branch_evidence(
    scenario: &Scenario,
    cone: &ConeSpec,
    representatives: &[DVector<f64>],
    bounds: &AttractorBounds,
    deltas: &[f64],
    max_points: usize,
    params: &AlphaParams,
    cfg: &IntegratorConfig,
) -> Result<BranchEvidence> {
    let scale = scenario.valid_domain().diameter_euclid();
    let v = cone.interior_direction();
    let stride = (representatives.len() / max_points.max(1)).max(1);
    let mut ev = BranchEvidence {
        toward_equilibrium: 0,
        toward_infinity: 0,
        other_converged: 0,
        not_classified: 0,
        skipped: 0,
        both_present: false,
        dominant: BranchSide::Undecided,
    };
    for rep in representatives.iter().step_by(stride).take(max_points.max(1)) {
        for &frac in deltas {
            let delta = frac * scale;
            let z = rep + v * delta;
            if !scenario.valid_domain().contains(&z) {
                ev.skipped += 1;
                continue;
            }
            let outcome = basin_classify(scenario, cone, &z, bounds, params, cfg)?;
            match outcome.label {
                BasinLabel::LowerOfPlusInfinity => ev.toward_infinity += 1,
                BasinLabel::UpperRepulsion(q)
                | BasinLabel::LowerRepulsion(q)
                | BasinLabel::Repulsion(q) => {
                    let above = (&q - rep).norm() <= delta + 1e-6
                        || classify_difference(cone, &(&q - rep))?.tag
                            == RegionTag::InteriorCPlus;
                    if above {
                        ev.toward_equilibrium += 1;
                    } else {
                        ev.other_converged += 1;
                    }
                }
                _ => ev.not_classified += 1,
            }
        }
    }
    ev.both_present = ev.toward_equilibrium > 0 && ev.toward_infinity > 0;
    ev.dominant = match ev.toward_equilibrium.cmp(&ev.toward_infinity) {
        std::cmp::Ordering::Greater => BranchSide::TowardEquilibrium,
        std::cmp::Ordering::Less => BranchSide::TowardInfinity,
        std::cmp::Ordering::Equal => BranchSide::Undecided,
    };
    Ok(ev)
}

/// Default δ schedule for [`classify_branch_evidence`], as fractions of the
/// domain diameter.
pub const BRANCH_DELTAS: [f64; 5] = [0.2, 0.1, 0.05, 0.02, 0.01];

/// Occupation support of a forward orbit on a fixed-depth grid.
#[derive(Debug, Clone)]
pub struct OccupationSupport {
    /// Cover whose active set is the support.
    pub cover: BoxCover,
    /// Time fraction spent per support box.
    pub fractions: BTreeMap<u64, f64>,
    /// Time fraction spent outside the grid domain.
    pub outside_fraction: f64,
    /// Tail length actually accumulated.
    pub total_time: f64,
}

/// Histograms the trajectory tail of `x0` on the depth-`depth` grid over
/// `domain`; the support keeps boxes with time fraction above
/// [`MIN_VISIT_FRACTION`]. The sampling step adapts to the local speed so a
/// step never jumps across a box.
pub fn occupation_support(
    scenario: &Scenario,
    x0: &DVector<f64>,
    t_total: f64,
    burn_in: f64,
    domain: AxisBox,
    depth: u32,
    cfg: &IntegratorConfig,
) -> Result<OccupationSupport> {
    if !(burn_in >= 0.0 && burn_in < t_total) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= burn_in < t_total, got burn_in={burn_in}, t_total={t_total}"
        )));
    }
    let grid = BoxCover::from_active(domain, depth, Default::default())?;
    let w_min = grid.widths().min();
    let tail = t_total - burn_in;
    let dt_max = tail / 64.0;
    let dt_min = tail / 2e6;
    let mut stepper = Stepper::new(scenario, x0, false, cfg)?;
    if stepper.advance_to(burn_in)? != AdvanceOutcome::Reached {
        return Err(Error::NonFinite { context: "occupation orbit escaped during burn-in" });
    }
    let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
    let mut outside = 0.0;
    let mut t = burn_in;
    while t < t_total {
        let state = stepper.state();
        let speed = scenario.eval_field(&state)?.norm();
        let dt = (w_min / (4.0 * speed.max(1e-12))).clamp(dt_min, dt_max).min(t_total - t);
        match grid.index_of(&state) {
            Some(idx) => *acc.entry(idx).or_insert(0.0) += dt,
            None => outside += dt,
        }
        if stepper.advance_to(t + dt)? != AdvanceOutcome::Reached {
            return Err(Error::NonFinite { context: "occupation orbit escaped" });
        }
        t += dt;
    }
    let mut fractions = BTreeMap::new();
    for (idx, time) in acc {
        let f = time / tail;
        if f > MIN_VISIT_FRACTION {
            fractions.insert(idx, f);
        }
    }
    let cover = BoxCover::from_active(
        grid.domain().clone(),
        depth,
        fractions.keys().copied().collect(),
    )?;
    Ok(OccupationSupport { cover, fractions, outside_fraction: outside / tail, total_time: tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractor::{attractor_bounds, BoundsParams};
    use crate::equilibria::census;
    use crate::integrate::flow_sampled;
    use crate::scenario::by_name;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    fn ml_setup() -> (Scenario, ConeSpec, AttractorBounds) {
        let scenario = by_name("ml_sym").unwrap();
        let cone = ConeSpec::orthant(3).unwrap();
        let bounds =
            attractor_bounds(&scenario, &cone, &BoundsParams::default(), &cfg()).unwrap();
        (scenario, cone, bounds)
    }

    fn ring_samples(scenario: &Scenario, count: usize) -> Vec<DVector<f64>> {
        let z = DVector::from_vec(vec![0.45, 0.45, 0.10]);
        let period = 62.0;
        let sampled =
            flow_sampled(scenario, &z, period, period / count as f64, &cfg()).unwrap();
        sampled.states.into_iter().take(count).collect()
    }

    #[test]
    fn basin_labels_match_backward_fates() {
        let (scenario, cone, bounds) = ml_setup();
        let params = AlphaParams::default();
        let low = DVector::from_vec(vec![0.1, 0.1, 0.1]);
        let out = basin_classify(&scenario, &cone, &low, &bounds, &params, &cfg()).unwrap();
        match out.label {
            BasinLabel::UpperRepulsion(p) => assert!(p.norm() < 1e-6, "target {p:?}"),
            other => panic!("expected upper repulsion of the origin, got {other:?}"),
        }

        let high = DVector::from_vec(vec![2.0, 2.0, 2.0]);
        let out = basin_classify(&scenario, &cone, &high, &bounds, &params, &cfg()).unwrap();
        assert_eq!(out.label, BasinLabel::LowerOfPlusInfinity);

        let e = DVector::from_vec(vec![0.5, 0.5, 0.5]);
        let out = basin_classify(&scenario, &cone, &e, &bounds, &params, &cfg()).unwrap();
        assert_eq!(out.label, BasinLabel::NotClassified);
    }

    #[test]
    fn dichotomy_singleton_and_ordered_chain() {
        let cone = ConeSpec::orthant(2).unwrap();
        let scenario = by_name("bistable2").unwrap();
        let eqs = census(&scenario, 7).unwrap();

        let e = DVector::from_vec(vec![0.5, 0.5]);
        let verdict = classify_component(&cone, &[e], &eqs, 1e-6, 0.05).unwrap();
        assert_eq!(verdict, DichotomyVerdict::SingletonTrivial);

        let a = 0.9f64.sqrt();
        let chain = vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![a, a])];
        let verdict = classify_component(&cone, &chain, &eqs, 1e-6, 1e-6).unwrap();
        match verdict {
            DichotomyVerdict::StronglyOrderedEquilibria { projections } => {
                assert_eq!(projections.len(), 2);
                assert!(projections[0] < projections[1]);
            }
            other => panic!("expected ordered equilibria, got {other:?}"),
        }
    }

    #[test]
    fn dichotomy_ring_is_unordered() {
        let scenario = by_name("lv_cycle").unwrap();
        let cone = ConeSpec::orthant(3).unwrap();
        let eqs = census(&scenario, 4).unwrap();
        let reps = ring_samples(&scenario, 100);
        let verdict = classify_component(&cone, &reps, &eqs, 1e-4, 1e-3).unwrap();
        match verdict {
            DichotomyVerdict::Unordered { min_margin } => assert!(min_margin > 1e-4),
            other => panic!("expected unordered ring, got {other:?}"),
        }
    }

    #[test]
    fn intersection_audit_flags_axis_pairs_only() {
        let cone = ConeSpec::orthant(2).unwrap();
        let scenario = by_name("bistable2").unwrap();
        let eqs = census(&scenario, 7).unwrap();
        assert_eq!(eqs.len(), 9);
        let certified: Vec<CloseReturn> = eqs
            .iter()
            .map(|e| CloseReturn { z: e.point.clone(), t: 1.0, error: e.residual })
            .collect();
        // A tight synthetic survivor cover: one small box at each equilibrium.
        let full = BoxCover::full(scenario.valid_domain().clone(), 5).unwrap();
        let active = eqs.iter().map(|e| full.index_of(&e.point).unwrap()).collect();
        let survivors =
            BoxCover::from_active(scenario.valid_domain().clone(), 5, active).unwrap();
        let audit =
            intersection_principle_audit(&cone, &certified, &survivors, 0.01).unwrap();
        assert!(audit.pass(), "flags: {:?}", audit.flags);
        assert!(audit.min_pair_margin >= 0.01);

        // An artificial axis-aligned pair must be flagged.
        let z0 = DVector::from_vec(vec![0.2, 0.2]);
        let pair = vec![
            CloseReturn { z: z0.clone(), t: 1.0, error: 0.0 },
            CloseReturn { z: &z0 + DVector::from_vec(vec![1.0, 0.0]), t: 1.0, error: 0.0 },
        ];
        let audit = intersection_principle_audit(&cone, &pair, &survivors, 0.01).unwrap();
        assert!(!audit.pass());
    }

    #[test]
    fn omega_audit_keeps_cycle_clear_of_center_boundary() {
        let scenario = by_name("lv_cycle").unwrap();
        let cone = ConeSpec::orthant(3).unwrap();
        let e = DVector::from_vec(vec![1.0 / 3.0; 3]);
        let y = DVector::from_vec(vec![0.45, 0.45, 0.10]);
        let report =
            omega_boundary_audit(&cone, &scenario, &e, &y, 130.0, 1e-4, 1e-3, &cfg()).unwrap();
        assert!(report.samples_checked > 50);
        assert!(report.pass(), "flags: {:?}", report.flagged);
        assert!(report.min_margin > 1e-4);
    }

    #[test]
    fn limit_sets_relate_or_pool_unordered() {
        let cone2 = ConeSpec::orthant(2).unwrap();
        let bistable = by_name("bistable2").unwrap();
        let near_top = DVector::from_vec(vec![0.8, 0.75]);
        let near_bottom = DVector::from_vec(vec![-0.8, -0.75]);
        let verdict = limit_set_dichotomy(
            &cone2, &bistable, &near_top, &near_bottom, 40.0, 1e-3, 1e-6, &cfg(),
        )
        .unwrap();
        assert_eq!(verdict, LimitSetVerdict::ApproxRelated);

        let cone3 = ConeSpec::orthant(3).unwrap();
        let lv = by_name("lv_cycle").unwrap();
        let on_cycle = DVector::from_vec(vec![0.45, 0.45, 0.10]);
        let center = DVector::from_vec(vec![1.0 / 3.0; 3]);
        let verdict = limit_set_dichotomy(
            &cone3, &lv, &on_cycle, &center, 130.0, 1e-4, 5e-3, &cfg(),
        )
        .unwrap();
        assert_eq!(verdict, LimitSetVerdict::UnorderedUnion);
    }

    #[test]
    fn connecting_flags_straddled_outside_point() {
        let cone = ConeSpec::orthant(2).unwrap();
        let domain = AxisBox::from_slices(&[-2.0, -2.0], &[2.0, 2.0]).unwrap();
        let full = BoxCover::full(domain.clone(), 3).unwrap();
        let r1 = DVector::from_vec(vec![-1.0, -1.0]);
        let r2 = DVector::from_vec(vec![1.0, -1.0]);
        let boxes: Vec<u64> =
            vec![full.index_of(&r1).unwrap(), full.index_of(&r2).unwrap()];
        let mut sorted = boxes.clone();
        sorted.sort_unstable();
        let component = ComponentRecord {
            boxes: sorted,
            representatives: vec![r1, r2],
            certified: Vec::new(),
            verdict: None,
            target_lower: None,
            target_upper: None,
            branch_evidence: None,
        };
        let outside = vec![CloseReturn {
            z: DVector::from_vec(vec![0.0, 0.0]),
            t: 1.0,
            error: 0.0,
        }];
        let report =
            connecting_consistency(&cone, &component, &full, &outside, 1e-6).unwrap();
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn absorbing_flags_straddling_component() {
        let cone = ConeSpec::orthant(2).unwrap();
        let eq = EquilibriumRecord {
            point: DVector::from_vec(vec![1.0, 1.0]),
            residual: 0.0,
            eigen_real_parts: vec![-1.0, -1.0],
            stability: crate::equilibria::Stability::Attracting,
        };
        let straddle = vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![2.0, 2.0]),
        ];
        let report = absorbing_audit(&cone, &straddle, &[eq.clone()], 1e-6, 1e-3).unwrap();
        assert!(!report.pass());

        let below = vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![0.3, 0.2]),
        ];
        let report = absorbing_audit(&cone, &below, &[eq], 1e-6, 1e-3).unwrap();
        assert!(report.pass());
        assert_eq!(report.checks, 1);
    }

    #[test]
    fn backward_targets_of_the_ring_component() {
        let scenario = by_name("lv_cycle").unwrap();
        let cone = ConeSpec::orthant(3).unwrap();
        let bounds =
            attractor_bounds(&scenario, &cone, &BoundsParams::default(), &cfg()).unwrap();
        let reps = ring_samples(&scenario, 60);
        let params = AlphaParams::default();
        let targets =
            target_equilibrium_for_component(&scenario, &cone, &reps, &bounds, &params, &cfg())
                .unwrap();
        match &targets.lower {
            BackwardTarget::Equilibrium(p) => {
                assert!(p.norm() < 1e-6, "expected the origin, got {p:?}")
            }
            other => panic!("expected lower equilibrium target, got {other:?}"),
        }
        assert_eq!(targets.upper, BackwardTarget::PlusInfinity);
    }

    #[test]
    fn singleton_targets_are_degenerate() {
        let (scenario, cone, bounds) = ml_setup();
        let e = vec![DVector::from_vec(vec![0.5, 0.5, 0.5])];
        let params = AlphaParams::default();
        let targets =
            target_equilibrium_for_component(&scenario, &cone, &e, &bounds, &params, &cfg())
                .unwrap();
        assert!(matches!(targets.upper, BackwardTarget::SelfDegenerate(_)));
        assert!(matches!(targets.lower, BackwardTarget::SelfDegenerate(_)));
    }

    #[test]
    fn branch_evidence_points_at_infinity_for_interior_sink() {
        let (scenario, cone, bounds) = ml_setup();
        let reps = vec![DVector::from_vec(vec![0.5, 0.5, 0.5])];
        let ev = classify_branch_evidence(
            &scenario,
            &cone,
            &reps,
            &bounds,
            &BRANCH_DELTAS,
            4,
            &AlphaParams::default(),
            &cfg(),
        )
        .unwrap();
        assert_eq!(ev.dominant, BranchSide::TowardInfinity);
        assert!(!ev.both_present, "evidence: {ev:?}");
    }

    #[test]
    fn branch_evidence_points_at_equilibrium_for_backward_sink() {
        let scenario = by_name("bistable2").unwrap();
        let cone = ConeSpec::orthant(2).unwrap();
        let bounds =
            attractor_bounds(&scenario, &cone, &BoundsParams::default(), &cfg()).unwrap();
        let reps = vec![DVector::zeros(2)];
        let ev = classify_branch_evidence(
            &scenario,
            &cone,
            &reps,
            &bounds,
            &BRANCH_DELTAS,
            4,
            &AlphaParams::default(),
            &cfg(),
        )
        .unwrap();
        assert_eq!(ev.dominant, BranchSide::TowardEquilibrium);
        assert!(!ev.both_present, "evidence: {ev:?}");
    }

    #[test]
    fn occupation_support_is_tight_for_a_sink() {
        let scenario = by_name("bistable2").unwrap();
        let x0 = DVector::from_vec(vec![0.3, 0.2]);
        let support = occupation_support(
            &scenario,
            &x0,
            60.0,
            30.0,
            scenario.valid_domain().clone(),
            6,
            &cfg(),
        )
        .unwrap();
        assert_eq!(support.cover.len(), 1, "fractions: {:?}", support.fractions);
        let a = 0.9f64.sqrt();
        let sink = DVector::from_vec(vec![a, a]);
        let &idx = support.fractions.keys().next().unwrap();
        assert!(support.cover.box_at(idx).contains(&sink));
        assert_eq!(support.outside_fraction, 0.0);
    }

    #[test]
    fn occupation_support_of_the_ring_is_unordered() {
        let scenario = by_name("lv_cycle").unwrap();
        let cone = ConeSpec::orthant(3).unwrap();
        let x0 = DVector::from_vec(vec![0.45, 0.45, 0.10]);
        let support = occupation_support(
            &scenario,
            &x0,
            260.0,
            70.0,
            scenario.valid_domain().clone(),
            6,
            &cfg(),
        )
        .unwrap();
        assert!(support.cover.len() > 30, "support size {}", support.cover.len());
        // Settle the grid-snapped centers onto the invariant structure
        // before classifying, as the component pipeline does.
        let reps: Vec<DVector<f64>> = support
            .cover
            .active()
            .iter()
            .step_by(3)
            .map(|&i| {
                flow_map(&scenario, &support.cover.center(i), 30.0, &cfg())
                    .unwrap()
                    .completed()
                    .unwrap()
            })
            .collect();
        let eqs = census(&scenario, 4).unwrap();
        let resolution = support.cover.widths().amax();
        let verdict = classify_component(&cone, &reps, &eqs, 1e-5, resolution).unwrap();
        match verdict {
            DichotomyVerdict::Unordered { min_margin } => assert!(min_margin > 0.0),
            other => panic!("expected unordered support, got {other:?}"),
        }

        let degenerate = occupation_support(
            &scenario,
            &x0,
            60.0,
            60.0,
            scenario.valid_domain().clone(),
            6,
            &cfg(),
        );
        assert!(degenerate.is_err());
    }
}
