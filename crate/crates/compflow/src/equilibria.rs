//! Equilibrium census: damped Newton refinement, deduplication, and
//! eigenvalue-based stability classification.

use crate::error::Result;
use crate::geom::AxisBox;
use crate::scenario::{FieldKind, Scenario};
use nalgebra::DVector;

/// Margin on eigenvalue real parts below which stability is not called.
pub const STABILITY_MARGIN: f64 = 1e-7;

/// Default Newton residual tolerance.
pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;

/// Default deduplication radius for the census.
pub const DEDUP_RADIUS: f64 = 1e-6;

/// Linearized stability of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// All eigenvalue real parts `< −1e−7`.
    Attracting,
    /// All eigenvalue real parts `> 1e−7`.
    Repelling,
    /// Real parts of both signs, none within the margin.
    Saddle,
    /// Some real part within the margin of zero, or a singular Jacobian.
    Marginal,
}

/// One certified equilibrium.
#[derive(Debug, Clone)]
pub struct EquilibriumRecord {
    pub point: DVector<f64>,
    /// `‖f(p)‖₂` at the refined point.
    pub residual: f64,
    /// Real parts of the Jacobian eigenvalues, ascending.
    pub eigen_real_parts: Vec<f64>,
    pub stability: Stability,
}

/// Damped Newton iteration from `seed`. Returns the refined root when the
/// residual drops below `tol` within `max_iter` iterations; `None` when the
/// iteration stalls, diverges, or meets a singular Jacobian away from a
/// root.
pub fn newton_refine(
    scenario: &Scenario,
    seed: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Option<DVector<f64>> {
    let mut x = seed.clone();
    let mut f = scenario.eval_field(&x).ok()?;
    for _ in 0..max_iter {
        let fnorm = f.norm();
        if fnorm < tol {
            return Some(x);
        }
        let j = scenario.jacobian(&x).ok()?;
        let delta = j.lu().solve(&(-&f))?;
        if delta.iter().any(|v| !v.is_finite()) {
            return None;
        }
        // Backtracking damping: accept the longest step in {1, 1/2, …, 2⁻¹²}
        // that reduces the residual.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..13 {
            let trial = &x + &delta * lambda;
            if let Ok(ft) = scenario.eval_field(&trial) {
                if ft.norm() < fnorm * (1.0 - 0.25 * lambda) || ft.norm() < tol {
                    x = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if f.norm() < tol {
        Some(x)
    } else {
        None
    }
}

/// Builds an [`EquilibriumRecord`] (residual, eigenvalues, stability) for a
/// refined root.
pub fn record_for(scenario: &Scenario, point: DVector<f64>) -> Result<EquilibriumRecord> {
    let residual = scenario.eval_field(&point)?.norm();
    let j = scenario.jacobian(&point)?;
    let singular = j.clone().lu().try_inverse().is_none();
    let mut reals: Vec<f64> = j.complex_eigenvalues().iter().map(|c| c.re).collect();
    reals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let stability = if singular || reals.iter().any(|r| r.abs() <= STABILITY_MARGIN) {
        Stability::Marginal
    } else if reals.iter().all(|&r| r < -STABILITY_MARGIN) {
        Stability::Attracting
    } else if reals.iter().all(|&r| r > STABILITY_MARGIN) {
        Stability::Repelling
    } else {
        Stability::Saddle
    };
    Ok(EquilibriumRecord { point, residual, eigen_real_parts: reals, stability })
}

/// Newton census from an explicit seed list: refine, deduplicate at
/// `dedup_radius`, discard roots outside `keep_within`, and return records
/// sorted lexicographically by coordinates.
pub fn find_equilibria(
    scenario: &Scenario,
    seeds: &[DVector<f64>],
    keep_within: &AxisBox,
    tol: f64,
    dedup_radius: f64,
) -> Result<Vec<EquilibriumRecord>> {
    let mut roots: Vec<DVector<f64>> = Vec::new();
    for seed in seeds {
        let Some(root) = newton_refine(scenario, seed, tol, 60) else {
            continue;
        };
        if !keep_within.contains_with_pad(&root, dedup_radius) {
            continue;
        }
        if roots.iter().all(|r| (r - &root).norm() > dedup_radius) {
            roots.push(root);
        }
    }
    roots.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    roots.into_iter().map(|p| record_for(scenario, p)).collect()
}

/// Uniform seed grid for the census: `per_axis` points per axis spanning
/// the scenario's validity domain. For Lotka–Volterra scenarios the grid is
/// extended to the closed positive orthant (coordinates down to exactly 0)
/// so boundary and axis equilibria are reported even though H1 is only
/// asserted on the open orthant.
pub fn census_seed_grid(scenario: &Scenario, per_axis: usize) -> Vec<DVector<f64>> {
    let domain = scenario.valid_domain();
    let n = scenario.dim();
    let extend_to_zero = matches!(
        scenario.kind(),
        FieldKind::LotkaVolterra { .. } | FieldKind::MayLeonard { .. }
    );
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let lo = if extend_to_zero { 0.0 } else { domain.lo()[i] };
        let hi = domain.hi()[i];
        let mut ticks = Vec::with_capacity(per_axis);
        for k in 0..per_axis {
            let frac = if per_axis > 1 { k as f64 / (per_axis - 1) as f64 } else { 0.5 };
            ticks.push(lo + frac * (hi - lo));
        }
        axes.push(ticks);
    }
    let mut seeds = Vec::with_capacity(per_axis.pow(n as u32));
    let mut idx = vec![0usize; n];
    loop {
        seeds.push(DVector::from_iterator(n, (0..n).map(|i| axes[i][idx[i]])));
        // Mixed-radix increment.
        let mut axis = 0;
        loop {
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
            axis += 1;
            if axis == n {
                return seeds;
            }
        }
    }
}

/// The census region matching [`census_seed_grid`]: the validity domain,
/// extended to the closed orthant for Lotka–Volterra scenarios.
pub fn census_region(scenario: &Scenario) -> AxisBox {
    let domain = scenario.valid_domain();
    if matches!(
        scenario.kind(),
        FieldKind::LotkaVolterra { .. } | FieldKind::MayLeonard { .. }
    ) {
        let lo = DVector::zeros(scenario.dim());
        AxisBox::new(lo, domain.hi().clone()).expect("valid census region")
    } else {
        domain.clone()
    }
}

/// Full census with default grid density and tolerances.
pub fn census(scenario: &Scenario, per_axis: usize) -> Result<Vec<EquilibriumRecord>> {
    let seeds = census_seed_grid(scenario, per_axis);
    find_equilibria(
        scenario,
        &seeds,
        &census_region(scenario),
        DEFAULT_NEWTON_TOL,
        DEDUP_RADIUS,
    )
}
