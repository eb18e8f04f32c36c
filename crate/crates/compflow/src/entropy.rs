//! Topological-entropy estimation from `(T, ε)`-spanning counts.
//!
//! For a sample set on an invariant region, [`spanning_count`] builds a
//! greedy `(T, ε)`-spanning subset: a point is covered by a center when the
//! two forward trajectories, sampled on a uniform grid of spacing
//! `dt = ε / (2·v_max)` over `[0, T]`, stay within `ε` of each other in the
//! sup norm. [`entropy_estimate`] tabulates the counts `N(T, ε)` over a
//! horizon/ε grid, fits the least-squares slope of `log N` against `T` per
//! `ε`, and reports the largest slope as the headline growth rate (nats per
//! unit time). The estimator supports a zero-vs-positive verdict, not a
//! precise entropy value; in particular a 3D competitive flow should always
//! report a headline slope indistinguishable from zero.
//!
//! Greedy center selection scans the base points in lexicographic order, so
//! counts are deterministic functions of the input set alone.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::integrate::{flow_sampled, IntegratorConfig, TrajStatus};
use crate::scenario::Scenario;

/// Floor on the max-speed estimate; keeps the sampling grid finite on base
/// sets consisting of exact equilibria (whose trajectories are constant, so
/// coarse sampling loses nothing).
pub const SPEED_FLOOR: f64 = 1e-9;

/// Spanning counts, per-ε growth slopes, and the headline estimate.
#[derive(Debug, Clone)]
pub struct EntropyReport {
    /// Coverage radii, in the caller's order.
    pub epsilons: Vec<f64>,
    /// Trajectory horizons, strictly increasing.
    pub horizons: Vec<f64>,
    /// `counts[i][j] = N(horizons[j], epsilons[i])`.
    pub counts: Vec<Vec<u64>>,
    /// Per-ε least-squares slope of `ln N` against `T`.
    pub slopes: Vec<f64>,
    /// True when the counts for that ε are constant across horizons; the
    /// slope is then exactly zero by fiat rather than by regression.
    pub degenerate: Vec<bool>,
    /// `max` of `slopes`.
    pub headline: f64,
}

/// Sorts points lexicographically (componentwise `total_cmp`); fixes the
/// greedy scan order.
fn lex_sorted(points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut sorted: Vec<DVector<f64>> = points.to_vec();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|c| c.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    sorted
}

/// Largest field magnitude over the base points, floored at [`SPEED_FLOOR`].
fn max_speed(scenario: &Scenario, points: &[DVector<f64>]) -> Result<f64> {
    let mut v: f64 = 0.0;
    for p in points {
        v = v.max(scenario.eval_field(p)?.norm());
    }
    Ok(v.max(SPEED_FLOOR))
}

fn validate_base(scenario: &Scenario, points: &[DVector<f64>]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptySet { context: "spanning base points" });
    }
    for p in points {
        if p.len() != scenario.dim() {
            return Err(Error::DimensionMismatch { expected: scenario.dim(), got: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "spanning base point" });
        }
    }
    Ok(())
}

/// Forward trajectories of every (sorted) base point over `[0, span]`,
/// sampled at `dt`; errors with the failing point when any orbit escapes the
/// validity region.
fn sampled_trajectories(
    scenario: &Scenario,
    sorted: &[DVector<f64>],
    span: f64,
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec<DVector<f64>>>> {
    let mut trajs = Vec::with_capacity(sorted.len());
    for p in sorted {
        let traj = flow_sampled(scenario, p, span, dt, cfg)?;
        if traj.status != TrajStatus::Completed {
            return Err(Error::InvalidArgument(format!(
                "base point {:?} left the forward-invariant region before t = {span}",
                p.as_slice()
            )));
        }
        trajs.push(traj.states);
    }
    Ok(trajs)
}

/// True when trajectories `a` and `b` stay within `eps` (sup norm) at every
/// shared sample index below `len`.
fn within_tube(a: &[DVector<f64>], b: &[DVector<f64>], len: usize, eps: f64) -> bool {
    a.iter().zip(b.iter()).take(len).all(|(x, y)| (x - y).amax() <= eps)
}

/// Greedy spanning-set size for one prefix length.
fn greedy_count(trajs: &[Vec<DVector<f64>>], len: usize, eps: f64) -> u64 {
    let mut centers: Vec<usize> = Vec::new();
    for i in 0..trajs.len() {
        if !centers.iter().any(|&c| within_tube(&trajs[i], &trajs[c], len, eps)) {
            centers.push(i);
        }
    }
    centers.len() as u64
}

/// Number of samples of a `dt`-grid trajectory with time `≤ t` (the grid of
/// [`flow_sampled`]: multiples of `dt` plus the exact final endpoint).
fn prefix_len(times_len: usize, span: f64, dt: f64, t: f64) -> usize {
    if t >= span {
        return times_len;
    }
    // Samples are 0, dt, 2·dt, …; allow a hair of slack for accumulated
    // floating-point drift in the grid positions.
    let whole = ((t / dt) * (1.0 + 1e-12)).floor() as usize + 1;
    whole.min(times_len)
}

/// Size of a greedy `(T, ε)`-spanning subset of `base`.
///
/// Trajectories are sampled at `dt = eps / (2·v_max)` where `v_max` is the
/// largest field magnitude over the base points. Base points must lie in a
/// forward-invariant region: an escaping orbit is an error naming the point.
pub fn spanning_count(
    scenario: &Scenario,
    base: &[DVector<f64>],
    t_horizon: f64,
    eps: f64,
    cfg: &IntegratorConfig,
) -> Result<u64> {
    if !(t_horizon > 0.0) || !t_horizon.is_finite() {
        return Err(Error::InvalidArgument("horizon must be positive and finite".into()));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument("eps must be positive and finite".into()));
    }
    validate_base(scenario, base)?;
    let sorted = lex_sorted(base);
    let dt = eps / (2.0 * max_speed(scenario, &sorted)?);
    let trajs = sampled_trajectories(scenario, &sorted, t_horizon, dt, cfg)?;
    let len = trajs.iter().map(Vec::len).min().unwrap_or(0);
    Ok(greedy_count(&trajs, len, eps))
}

/// Checks the spanning-count monotonicity obligations: nondecreasing in `T`
/// for fixed `ε`, nonincreasing in `ε` for fixed `T`.
fn validate_counts(epsilons: &[f64], counts: &[Vec<u64>]) -> Result<()> {
    for (i, row) in counts.iter().enumerate() {
        if row.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(format!(
                "spanning counts for eps = {} decreased with T: {row:?}",
                epsilons[i]
            )));
        }
    }
    for i in 0..epsilons.len() {
        for j in 0..epsilons.len() {
            if epsilons[i] < epsilons[j] {
                let bad = counts[i].iter().zip(&counts[j]).any(|(small, large)| small < large);
                if bad {
                    return Err(Error::InvalidArgument(format!(
                        "spanning counts increased with eps ({} -> {})",
                        epsilons[i], epsilons[j]
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Least-squares slope of `ln n` against `t`; exactly `0.0` (flagged) when
/// the counts are constant.
fn slope_of(horizons: &[f64], row: &[u64]) -> (f64, bool) {
    if row.iter().all(|&n| n == row[0]) {
        return (0.0, true);
    }
    let m = horizons.len() as f64;
    let mean_t = horizons.iter().sum::<f64>() / m;
    let logs: Vec<f64> = row.iter().map(|&n| (n as f64).ln()).collect();
    let mean_l = logs.iter().sum::<f64>() / m;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, l) in horizons.iter().zip(&logs) {
        num += (t - mean_t) * (l - mean_l);
        den += (t - mean_t) * (t - mean_t);
    }
    (num / den, false)
}

/// Tabulates `N(T, ε)` over the grid and fits per-ε growth slopes.
///
/// Requires at least three horizons (strictly increasing) and two epsilons;
/// trajectories are integrated once per ε up to the largest horizon and
/// reused across the shorter ones.
pub fn entropy_estimate(
    scenario: &Scenario,
    samples: &[DVector<f64>],
    horizons: &[f64],
    epsilons: &[f64],
    cfg: &IntegratorConfig,
) -> Result<EntropyReport> {
    if horizons.len() < 3 {
        return Err(Error::InvalidArgument("need at least three horizons".into()));
    }
    if epsilons.len() < 2 {
        return Err(Error::InvalidArgument("need at least two epsilons".into()));
    }
    if horizons.iter().any(|t| !(t.is_finite() && *t > 0.0))
        || horizons.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidArgument(
            "horizons must be positive, finite, and strictly increasing".into(),
        ));
    }
    if epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidArgument("epsilons must be positive and finite".into()));
    }
    validate_base(scenario, samples)?;
    let sorted = lex_sorted(samples);
    let span = *horizons.last().expect("nonempty horizons");
    let vmax = max_speed(scenario, &sorted)?;

    let mut counts = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let dt = eps / (2.0 * vmax);
        let trajs = sampled_trajectories(scenario, &sorted, span, dt, cfg)?;
        let full = trajs.iter().map(Vec::len).min().unwrap_or(0);
        let row: Vec<u64> = horizons
            .iter()
            .map(|&t| greedy_count(&trajs, prefix_len(full, span, dt, t), eps))
            .collect();
        counts.push(row);
    }
    validate_counts(epsilons, &counts)?;

    let mut slopes = Vec::with_capacity(epsilons.len());
    let mut degenerate = Vec::with_capacity(epsilons.len());
    for row in &counts {
        let (s, d) = slope_of(horizons, row);
        slopes.push(s);
        degenerate.push(d);
    }
    let headline = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EntropyReport {
        epsilons: epsilons.to_vec(),
        horizons: horizons.to_vec(),
        counts,
        slopes,
        degenerate,
        headline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::by_name;

    fn v3(a: f64, b: f64, c: f64) -> DVector<f64> {
        DVector::from_row_slice(&[a, b, c])
    }

    /// One settled pass around the closed orbit through the standard
    /// witness, sampled at `count` points.
    fn cycle_points(scenario: &Scenario, count: usize, cfg: &IntegratorConfig) -> Vec<DVector<f64>> {
        let period = 62.0;
        let traj = flow_sampled(
            scenario,
            &v3(0.45, 0.45, 0.10),
            period,
            period / count as f64,
            cfg,
        )
        .expect("cycle sampling");
        assert_eq!(traj.status, TrajStatus::Completed);
        traj.states.into_iter().take(count).collect()
    }

    #[test]
    fn equilibrium_spanning_count_is_one() {
        let s = by_name("ml_sym").unwrap();
        let cfg = IntegratorConfig::default();
        let base = [v3(0.5, 0.5, 0.5)];
        for t in [5.0, 20.0] {
            for eps in [0.05, 0.2] {
                let n = spanning_count(&s, &base, t, eps, &cfg).unwrap();
                assert_eq!(n, 1, "t={t}, eps={eps}");
            }
        }
    }

    #[test]
    fn cycle_with_radius_above_diameter_needs_one_center() {
        let s = by_name("lv_cycle").unwrap();
        let cfg = IntegratorConfig::default();
        let base = cycle_points(&s, 24, &cfg);
        let n = spanning_count(&s, &base, 30.0, 1.0, &cfg).unwrap();
        assert_eq!(n, 1);
    }

    /// Tube-covering oracle: a closed orbit of arc length `L` needs on the
    /// order of `L / (2ε)` spanning centers at small `ε`, independent of the
    /// horizon once it exceeds the period.
    #[test]
    fn cycle_spanning_count_matches_tube_covering_oracle() {
        let s = by_name("lv_cycle").unwrap();
        let cfg = IntegratorConfig::default();
        // Arc length of the sampled loop, measured on a fine pass.
        let fine = flow_sampled(&s, &v3(0.45, 0.45, 0.10), 62.0, 0.05, &cfg).unwrap();
        let arc: f64 = fine
            .states
            .windows(2)
            .map(|w| (&w[1] - &w[0]).norm())
            .sum();
        assert!(arc > 1.0, "degenerate loop length {arc}");

        let eps = 0.05;
        let base = cycle_points(&s, 80, &cfg);
        let n_short = spanning_count(&s, &base, 70.0, eps, &cfg).unwrap();
        let n_long = spanning_count(&s, &base, 140.0, eps, &cfg).unwrap();

        let tube = (arc / (2.0 * eps)).ceil();
        let lo = (tube / 4.0).floor() as u64;
        let hi = (tube * 4.0).ceil() as u64;
        assert!(
            (lo..=hi).contains(&n_short),
            "count {n_short} outside [{lo}, {hi}] for tube estimate {tube}"
        );
        // Flat in T beyond one period.
        assert!(n_long >= n_short);
        assert!(
            n_long as f64 <= 1.2 * n_short as f64,
            "count grew past one period: {n_short} -> {n_long}"
        );
    }

    #[test]
    fn equilibrium_report_is_exactly_degenerate_zero() {
        let s = by_name("ml_sym").unwrap();
        let cfg = IntegratorConfig::default();
        let base = [v3(0.5, 0.5, 0.5)];
        let report =
            entropy_estimate(&s, &base, &[5.0, 10.0, 20.0], &[0.05, 0.1], &cfg).unwrap();
        assert_eq!(report.counts, vec![vec![1, 1, 1], vec![1, 1, 1]]);
        assert_eq!(report.slopes, vec![0.0, 0.0]);
        assert!(report.degenerate.iter().all(|&d| d));
        assert_eq!(report.headline, 0.0);
    }

    #[test]
    fn cycle_headline_slope_is_near_zero() {
        let s = by_name("lv_cycle").unwrap();
        let cfg = IntegratorConfig::default();
        let base = cycle_points(&s, 60, &cfg);
        let report =
            entropy_estimate(&s, &base, &[15.0, 30.0, 60.0], &[0.1, 0.2], &cfg).unwrap();
        assert!(
            report.headline <= 0.05,
            "headline {} exceeds the zero-entropy band",
            report.headline
        );
        for row in &report.counts {
            assert!(row.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn report_rejects_degenerate_grids() {
        let s = by_name("ml_sym").unwrap();
        let cfg = IntegratorConfig::default();
        let base = [v3(0.5, 0.5, 0.5)];
        assert!(entropy_estimate(&s, &base, &[5.0, 10.0], &[0.05, 0.1], &cfg).is_err());
        assert!(entropy_estimate(&s, &base, &[5.0, 10.0, 20.0], &[0.05], &cfg).is_err());
        assert!(entropy_estimate(&s, &base, &[5.0, 10.0, 10.0], &[0.05, 0.1], &cfg).is_err());
        assert!(entropy_estimate(&s, &[], &[5.0, 10.0, 20.0], &[0.05, 0.1], &cfg).is_err());
    }

    #[test]
    fn count_validator_rejects_nonmonotone_tables() {
        // Nondecreasing in T.
        assert!(validate_counts(&[0.1, 0.2], &[vec![3, 2, 2], vec![1, 1, 1]]).is_err());
        // Nonincreasing in eps.
        assert!(validate_counts(&[0.1, 0.2], &[vec![2, 2, 2], vec![3, 3, 3]]).is_err());
        assert!(validate_counts(&[0.1, 0.2], &[vec![4, 5, 6], vec![2, 2, 3]]).is_ok());
    }

    #[test]
    fn escaping_base_point_is_reported() {
        let s = by_name("lv_cycle").unwrap();
        let cfg = IntegratorConfig::default();
        // A negative coordinate is carried to −∞ in finite forward time.
        let bad = [v3(-0.1, 0.1, 0.1)];
        let err = spanning_count(&s, &bad, 40.0, 0.1, &cfg).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }
}
