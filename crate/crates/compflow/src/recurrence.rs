//! Recurrence certificates: close returns, recurrent-time sets, and IP sets.
//!
//! A close return is a numerical witness for a recurrent point — a state `z`
//! and a time `t` with `|Φ_t(z) − z|` below a requested tolerance. On top of
//! these witnesses sit the recurrent-time set `N(z,θ) = {t > 0 : |Φ_t(z) − z|
//! < θ}`, the arithmetic-progression search for times `nτ + t` inside
//! `N(z,θ)`, and the construction of finite IP sets (all nonempty subset sums
//! of `k` generators stay inside `N(z,θ)`), each backed by direct
//! re-integration rather than trusting intermediate estimates.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::integrate::{flow_map, AdvanceOutcome, FlowOutcome, IntegratorConfig, Stepper};
use crate::rng::rng_for;
use crate::scenario::Scenario;

/// Returns faster than this are treated as vacuous and never reported.
pub const T_MIN_RETURN: f64 = 0.1;

/// IP-set construction stops once its continuity modulus falls below this.
pub const MODULUS_FLOOR: f64 = 1e-12;

/// Cap on IP generators constructed (2^k − 1 subset sums are verified).
pub const MAX_IP_GENERATORS: usize = 12;

/// Cap on IP generators accepted for verification.
pub const MAX_VERIFY_GENERATORS: usize = 20;

/// A recurrent-point witness: `|Φ_t(z) − z| = error` with `t ≥` [`T_MIN_RETURN`].
#[derive(Debug, Clone)]
pub struct CloseReturn {
    pub z: DVector<f64>,
    pub t: f64,
    pub error: f64,
}

/// The sub-`θ` sublevel intervals of `t ↦ |Φ_t(z) − z|` on `(0, horizon]`.
#[derive(Debug, Clone)]
pub struct RecurrentTimeSet {
    pub z: DVector<f64>,
    pub theta: f64,
    /// Disjoint, increasing open intervals `(t_lo, t_hi)`; the first may
    /// start at 0 (the distance vanishes at `t = 0`).
    pub intervals: Vec<(f64, f64)>,
    /// Scanned horizon; shorter than requested when the orbit escaped.
    pub horizon: f64,
}

/// A finite IP set: every nonempty subset sum of `generators` is a return
/// time of `z` at tolerance `theta`.
#[derive(Debug, Clone)]
pub struct IPSet {
    pub z: DVector<f64>,
    pub theta: f64,
    pub generators: Vec<f64>,
    /// Modulus under which each generator was admitted.
    pub moduli: Vec<f64>,
    /// Largest `|Φ_s(z) − z|` over all nonempty subset sums `s`.
    pub worst_error: f64,
    /// The subset sum attaining `worst_error`.
    pub worst_sum: f64,
    /// True when the modulus chain underflowed before reaching the
    /// requested generator count.
    pub truncated: bool,
}

/// Evaluates `|Φ_{t − base_t}(base_y) − z|`, i.e. the return distance at
/// absolute time `t` continued from a saved trajectory state.
struct LocalEval<'a> {
    scenario: &'a Scenario,
    base_t: f64,
    base_y: DVector<f64>,
    z: &'a DVector<f64>,
    cfg: &'a IntegratorConfig,
}

impl LocalEval<'_> {
    /// Return distance at `t ≥ base_t`; `None` when the orbit escapes.
    fn g(&self, t: f64) -> Result<Option<f64>> {
        debug_assert!(t >= self.base_t - 1e-12);
        match flow_map(self.scenario, &self.base_y, (t - self.base_t).max(0.0), self.cfg)? {
            FlowOutcome::Completed(y) => Ok(Some((y - self.z).norm())),
            _ => Ok(None),
        }
    }
}

/// Golden-section minimization of the return distance over `[a, b]`,
/// evaluated from a saved base state. Escaping evaluations rank as +∞.
fn golden_min(eval: &LocalEval<'_>, a: f64, b: f64, iters: usize) -> Result<(f64, f64)> {
    const PHI: f64 = 0.618_033_988_749_894_9;
    let to_val = |g: Option<f64>| g.unwrap_or(f64::INFINITY);
    let (mut a, mut b) = (a, b);
    let mut c = b - PHI * (b - a);
    let mut d = a + PHI * (b - a);
    let mut gc = to_val(eval.g(c)?);
    let mut gd = to_val(eval.g(d)?);
    for _ in 0..iters {
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - PHI * (b - a);
            gc = to_val(eval.g(c)?);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + PHI * (b - a);
            gd = to_val(eval.g(d)?);
        }
    }
    let (t, g) = if gc <= gd { (c, gc) } else { (d, gd) };
    Ok((t, g))
}

/// Scans `t ↦ |Φ_t(z) − z|` over `window` on a uniform grid and sharpens the
/// best grid minimum by golden section; `z` stays fixed.
///
/// Returns `(t, error)` or `None` when the orbit escapes before producing
/// any candidate.
fn best_return_time(
    scenario: &Scenario,
    z: &DVector<f64>,
    window: (f64, f64),
    dt_hint: Option<f64>,
    cfg: &IntegratorConfig,
) -> Result<Option<(f64, f64)>> {
    let (lo, hi) = window;
    let dt = dt_hint.unwrap_or(((hi - lo) / 4096.0).clamp(1e-3, 0.05));
    let mut stepper = Stepper::new(scenario, z, false, cfg)?;
    if stepper.advance_to(lo)? != AdvanceOutcome::Reached {
        return Ok(None);
    }
    let mut prev_t = lo;
    let mut prev_y = stepper.state();
    let mut best: Option<(f64, f64)> = None;
    let mut bracket: Option<(f64, DVector<f64>)> = None;
    let mut i = 1u64;
    loop {
        let t = (lo + i as f64 * dt).min(hi);
        if stepper.advance_to(t)? != AdvanceOutcome::Reached {
            break;
        }
        let y = stepper.state();
        let g = (&y - z).norm();
        if best.map_or(true, |(_, bg)| g < bg) {
            best = Some((t, g));
            bracket = Some((prev_t, prev_y.clone()));
        }
        prev_t = t;
        prev_y = y;
        if t >= hi {
            break;
        }
        i += 1;
    }
    let Some((t_grid, g_grid)) = best else { return Ok(None) };
    let (base_t, base_y) = bracket.expect("bracket recorded with best");
    let eval = LocalEval { scenario, base_t, base_y, z, cfg };
    let (t_fine, g_fine) =
        golden_min(&eval, base_t.max(lo), (t_grid + dt).min(hi), 60)?;
    Ok(Some(if g_fine < g_grid { (t_fine, g_fine) } else { (t_grid, g_grid) }))
}

/// Local re-minimization of the return time after the witness moved:
/// golden section over `t_center ± span` from a freshly integrated base.
fn local_t_min(
    scenario: &Scenario,
    z: &DVector<f64>,
    t_center: f64,
    span: f64,
    cfg: &IntegratorConfig,
) -> Result<Option<(f64, f64)>> {
    let a = (t_center - span).max(T_MIN_RETURN);
    let base_y = match flow_map(scenario, z, a, cfg)? {
        FlowOutcome::Completed(y) => y,
        _ => return Ok(None),
    };
    let eval = LocalEval { scenario, base_t: a, base_y, z, cfg };
    let (t, g) = golden_min(&eval, a, t_center + span, 50)?;
    Ok(Some((t, g)))
}

/// Searches `t_window` for a close return of `x0` with error below `theta`.
///
/// A grid scan locates the best return time, golden section sharpens it, and
/// a few rounds of orbit averaging (`z ← (z + Φ_t(z))/2`, re-minimizing `t`
/// after each move) walk the witness onto a nearby recurrent orbit. The
/// witness is kept within a small ball of `x0`. Escape yields `None`.
pub fn refine_close_return(
    scenario: &Scenario,
    x0: &DVector<f64>,
    t_window: (f64, f64),
    theta: f64,
    cfg: &IntegratorConfig,
) -> Result<Option<CloseReturn>> {
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    if !(t_window.0 >= T_MIN_RETURN && t_window.1 > t_window.0) {
        return Err(Error::InvalidArgument(format!(
            "return window must satisfy {T_MIN_RETURN} <= lo < hi, got {t_window:?}"
        )));
    }
    let Some((mut t, mut err)) = best_return_time(scenario, x0, t_window, None, cfg)? else {
        return Ok(None);
    };
    let wander_radius = (4.0 * theta).max(4.0 * err);
    let mut z = x0.clone();
    for _ in 0..8 {
        let image = match flow_map(scenario, &z, t, cfg)? {
            FlowOutcome::Completed(y) => y,
            _ => break,
        };
        let candidate = (&z + &image) * 0.5;
        if (&candidate - x0).norm() > wander_radius {
            break;
        }
        let span = (0.002 * t).max(0.02);
        let Some((t_new, err_new)) = local_t_min(scenario, &candidate, t, span, cfg)? else {
            break;
        };
        if err_new < err {
            z = candidate;
            t = t_new;
            err = err_new;
        } else {
            break;
        }
    }
    if err < theta && t >= T_MIN_RETURN {
        Ok(Some(CloseReturn { z, t, error: err }))
    } else {
        Ok(None)
    }
}

/// Bisection-sharpens a `θ`-crossing of the return distance inside
/// `(t_lo, t_hi)`, continuing from the saved state at `t_lo`.
fn bisect_crossing(
    eval: &LocalEval<'_>,
    t_lo: f64,
    t_hi: f64,
    theta: f64,
    below_at_lo: bool,
    tol: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = (t_lo, t_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let Some(g) = eval.g(mid)? else { break };
        if (g < theta) == below_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Computes the recurrent-time set `N(z,θ)` on `(0, horizon]`, sampling at
/// `dt` and sharpening interval endpoints by bisection to `dt/100`.
///
/// Escape truncates the reported horizon to the last completed grid time.
pub fn recurrent_times(
    scenario: &Scenario,
    z: &DVector<f64>,
    theta: f64,
    horizon: f64,
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<RecurrentTimeSet> {
    if !(theta > 0.0 && dt > 0.0 && horizon > dt) {
        return Err(Error::InvalidArgument(format!(
            "need theta > 0, 0 < dt < horizon; got theta={theta}, dt={dt}, horizon={horizon}"
        )));
    }
    let mut stepper = Stepper::new(scenario, z, false, cfg)?;
    let mut intervals = Vec::new();
    let mut open_lo = Some(0.0);
    let mut prev_t = 0.0;
    let mut prev_y = z.clone();
    let mut prev_below = true;
    let mut reached = horizon;
    let mut i = 1u64;
    loop {
        let t = (i as f64 * dt).min(horizon);
        if stepper.advance_to(t)? != AdvanceOutcome::Reached {
            reached = prev_t;
            break;
        }
        let y = stepper.state();
        let g = (&y - z).norm();
        let below = g < theta;
        if below != prev_below {
            let eval =
                LocalEval { scenario, base_t: prev_t, base_y: prev_y.clone(), z, cfg };
            let c = bisect_crossing(&eval, prev_t, t, theta, prev_below, dt / 100.0)?;
            if below {
                open_lo = Some(c);
            } else if let Some(lo) = open_lo.take() {
                intervals.push((lo, c));
            }
        }
        prev_t = t;
        prev_y = y;
        prev_below = below;
        if t >= horizon {
            break;
        }
        i += 1;
    }
    if let Some(lo) = open_lo.take() {
        if reached > lo {
            intervals.push((lo, reached));
        }
    }
    Ok(RecurrentTimeSet { z: z.clone(), theta, intervals, horizon: reached })
}

/// Precomputed return-distance samples `|Φ_{i·dt}(z) − z|` for repeated
/// arithmetic-progression queries against one witness.
#[derive(Debug, Clone)]
pub struct ReturnScan {
    dt: f64,
    dists: Vec<f64>,
    reached: f64,
}

impl ReturnScan {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn reached(&self) -> f64 {
        self.reached
    }
}

/// Streams the return distance of `z` over `[0, horizon]` at `dt`.
pub fn scan_return_distances(
    scenario: &Scenario,
    z: &DVector<f64>,
    horizon: f64,
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<ReturnScan> {
    if !(dt > 0.0 && horizon > dt) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < dt < horizon; got dt={dt}, horizon={horizon}"
        )));
    }
    let mut stepper = Stepper::new(scenario, z, false, cfg)?;
    let mut dists = vec![0.0];
    let mut reached = 0.0;
    let mut i = 1u64;
    loop {
        let t = i as f64 * dt;
        if t > horizon || stepper.advance_to(t)? != AdvanceOutcome::Reached {
            break;
        }
        dists.push((stepper.state() - z).norm());
        reached = t;
        i += 1;
    }
    Ok(ReturnScan { dt, dists, reached })
}

/// Outcome of the arithmetic-progression search in `N(z,θ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum A1Outcome {
    /// `s = nτ + t ∈ N(z,θ)` with `|t| < ε`, re-validated by direct
    /// integration (`error = |Φ_s(z) − z|`).
    Witness { n: u64, t: f64, s: f64, error: f64 },
    /// No witness with `nτ ≤ horizon`; a soft outcome — the underlying
    /// statement carries no effective bound.
    NotFoundWithinHorizon,
}

/// Searches `n = 1, 2, …` (`nτ ≤` scan horizon) for a time `s ∈ (nτ−ε, nτ+ε)`
/// with `|Φ_s(z) − z| < θ`, using a precomputed [`ReturnScan`].
///
/// Every grid candidate is re-validated by a fresh integration before being
/// returned.
pub fn verify_a1_scan(
    scan: &ReturnScan,
    scenario: &Scenario,
    z: &DVector<f64>,
    theta: f64,
    tau: f64,
    eps: f64,
    cfg: &IntegratorConfig,
) -> Result<A1Outcome> {
    if !(tau > 0.0 && eps > 0.0 && theta > 0.0) {
        return Err(Error::InvalidArgument(
            "theta, tau, and eps must all be positive".into(),
        ));
    }
    if eps >= tau / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be below tau/2 (got eps={eps}, tau={tau})"
        )));
    }
    let mut n = 1u64;
    while n as f64 * tau <= scan.reached {
        let center = n as f64 * tau;
        let i_lo = (((center - eps) / scan.dt).floor() as i64 + 1).max(1) as usize;
        let i_hi = (((center + eps) / scan.dt).ceil() as i64 - 1).max(0) as usize;
        for i in i_lo..=i_hi.min(scan.dists.len().saturating_sub(1)) {
            let s = i as f64 * scan.dt;
            if (s - center).abs() >= eps || scan.dists[i] >= theta {
                continue;
            }
            if let FlowOutcome::Completed(y) = flow_map(scenario, z, s, cfg)? {
                let error = (y - z).norm();
                if error < theta {
                    return Ok(A1Outcome::Witness { n, t: s - center, s, error });
                }
            }
        }
        n += 1;
    }
    Ok(A1Outcome::NotFoundWithinHorizon)
}

/// One-shot variant of [`verify_a1_scan`]: scans up to `horizon` at a grid
/// fine enough to see inside the `±ε` windows, then queries once.
pub fn verify_a1(
    scenario: &Scenario,
    z: &DVector<f64>,
    theta: f64,
    tau: f64,
    eps: f64,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<A1Outcome> {
    let dt = (eps / 4.0).min(0.05);
    let scan = scan_return_distances(scenario, z, horizon, dt, cfg)?;
    verify_a1_scan(&scan, scenario, z, theta, tau, eps, cfg)
}

/// Worst-case report over all nonempty subset sums of a generator list.
#[derive(Debug, Clone)]
pub struct IpVerification {
    pub worst_error: f64,
    pub worst_sum: f64,
    /// Subset sum at which the orbit escaped, if any.
    pub escaped_at: Option<f64>,
    pub pass: bool,
}

/// Sweeps all nonempty subset sums in one ascending integration pass.
fn subset_sum_sweep(
    scenario: &Scenario,
    z: &DVector<f64>,
    generators: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(f64, f64, Option<f64>)> {
    let k = generators.len();
    let mut sums = Vec::with_capacity((1usize << k) - 1);
    for mask in 1u32..(1u32 << k) {
        let s: f64 =
            (0..k).filter(|i| mask >> i & 1 == 1).map(|i| generators[i]).sum();
        sums.push(s);
    }
    sums.sort_by(|a, b| a.partial_cmp(b).expect("finite sums"));
    let mut stepper = Stepper::new(scenario, z, false, cfg)?;
    let mut worst = (0.0f64, 0.0f64);
    for &s in &sums {
        if stepper.advance_to(s)? != AdvanceOutcome::Reached {
            return Ok((f64::INFINITY, s, Some(s)));
        }
        let err = (stepper.state() - z).norm();
        if err > worst.0 {
            worst = (err, s);
        }
    }
    Ok((worst.0, worst.1, None))
}

/// Verifies that all nonempty subset sums of `generators` are `θ`-return
/// times of `z`. Fails (with the witness sum) if any sum misses or escapes.
pub fn ip_verify(
    scenario: &Scenario,
    z: &DVector<f64>,
    theta: f64,
    generators: &[f64],
    cfg: &IntegratorConfig,
) -> Result<IpVerification> {
    if generators.is_empty() || generators.len() > MAX_VERIFY_GENERATORS {
        return Err(Error::InvalidArgument(format!(
            "generator count must be in 1..={MAX_VERIFY_GENERATORS}, got {}",
            generators.len()
        )));
    }
    if generators.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidArgument("generators must be positive".into()));
    }
    let (worst_error, worst_sum, escaped_at) =
        subset_sum_sweep(scenario, z, generators, cfg)?;
    let pass = escaped_at.is_none() && worst_error < theta;
    Ok(IpVerification { worst_error, worst_sum, escaped_at, pass })
}

/// Estimates the largest perturbation radius `δ ≤ δ_start` such that sampled
/// points `|y − z| = δ` stay within `0.9·theta` of `z` at every certified
/// subset-sum time: each probe trajectory is integrated once through the
/// ascending `sums` and checked at each of them.
fn sum_tracking_modulus(
    scenario: &Scenario,
    z: &DVector<f64>,
    sums: &[f64],
    theta: f64,
    delta_start: f64,
    stage: u64,
    cfg: &IntegratorConfig,
) -> Result<Option<f64>> {
    const DIRECTIONS: usize = 16;
    let n = z.len();
    let mut rng = rng_for(0x1b5e_ed00, stage);
    let mut dirs = Vec::with_capacity(DIRECTIONS);
    while dirs.len() < DIRECTIONS {
        let u = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0));
        let norm = u.norm();
        if (1e-3..=1.0).contains(&norm) {
            dirs.push(u / norm);
        }
    }
    let mut delta = delta_start;
    while delta >= MODULUS_FLOOR {
        let mut ok = true;
        'dirs: for u in &dirs {
            let y = z + u * delta;
            let mut stepper = Stepper::new(scenario, &y, false, cfg)?;
            for &s in sums {
                if stepper.advance_to(s)? != AdvanceOutcome::Reached
                    || (&stepper.state() - z).norm() >= 0.9 * theta
                {
                    ok = false;
                    break 'dirs;
                }
            }
        }
        if ok {
            return Ok(Some(delta));
        }
        delta *= 0.5;
    }
    Ok(None)
}

/// Constructs an IP set of up to `k` generators for the recurrent witness
/// `z` at tolerance `theta`.
///
/// The construction maintains a decreasing modulus chain: generator `p_m` is
/// a close-return time with error below the current modulus `θ_m`, and the
/// next modulus is an empirically sampled continuity radius guaranteeing
/// that points `θ_{m+1}`-close to `z` track every already-certified subset
/// sum to within the global budget `θ`. Modulus underflow truncates the set
/// (reported via `truncated`). All `2^k − 1` subset sums are verified
/// directly afterwards.
pub fn ip_generate(
    scenario: &Scenario,
    z: &DVector<f64>,
    theta: f64,
    k: usize,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<IPSet> {
    if k == 0 || k > MAX_IP_GENERATORS {
        return Err(Error::InvalidArgument(format!(
            "generator count must be in 1..={MAX_IP_GENERATORS}, got {k}"
        )));
    }
    if !(theta > 0.0 && horizon > T_MIN_RETURN) {
        return Err(Error::InvalidArgument(
            "theta must be positive and horizon must exceed the minimum return time".into(),
        ));
    }
    let mut generators = Vec::with_capacity(k);
    let mut moduli = Vec::with_capacity(k);
    let mut sums: Vec<f64> = Vec::new();
    let mut theta_cur = theta / 2.0;
    let mut truncated = false;
    for m in 0..k {
        let found = best_return_time(scenario, z, (T_MIN_RETURN, horizon), None, cfg)?
            .filter(|&(_, err)| err < theta_cur);
        let Some((p, _)) = found else {
            truncated = true;
            break;
        };
        generators.push(p);
        moduli.push(theta_cur);
        let mut extended = Vec::with_capacity(2 * sums.len() + 1);
        extended.extend(sums.iter().copied());
        extended.push(p);
        extended.extend(sums.iter().map(|s| s + p));
        extended.sort_by(|a, b| a.partial_cmp(b).expect("finite sums"));
        sums = extended;
        if m + 1 < k {
            match sum_tracking_modulus(scenario, z, &sums, theta, theta_cur, m as u64, cfg)? {
                Some(next) => theta_cur = next,
                None => {
                    truncated = true;
                    break;
                }
            }
        }
    }
    if generators.is_empty() {
        return Err(Error::EmptySet {
            context: "IP construction found no close return under the initial modulus",
        });
    }
    let (worst_error, worst_sum, escaped) =
        subset_sum_sweep(scenario, z, &generators, cfg)?;
    if escaped.is_some() {
        return Err(Error::NonFinite { context: "IP subset-sum verification escaped" });
    }
    Ok(IPSet {
        z: z.clone(),
        theta,
        generators,
        moduli,
        worst_error,
        worst_sum,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::by_name;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    fn ml_equilibrium() -> DVector<f64> {
        DVector::from_vec(vec![0.5, 0.5, 0.5])
    }

    /// A point on the invariant simplex of the cyclic system; it lies on a
    /// closed orbit ringing the interior equilibrium. The measured minimal
    /// period of this ring is ≈ 61.9, so first-return scans use a window of
    /// (30, 90) to avoid locking onto the second return.
    fn cycle_point() -> DVector<f64> {
        DVector::from_vec(vec![0.45, 0.45, 0.10])
    }

    #[test]
    fn equilibrium_returns_immediately() {
        let scenario = by_name("ml_sym").unwrap();
        let z = ml_equilibrium();
        let cr = refine_close_return(&scenario, &z, (0.5, 3.0), 1e-6, &cfg())
            .unwrap()
            .expect("equilibrium is recurrent");
        assert!(cr.error < 1e-9);
        assert!(cr.t >= 0.5);
    }

    #[test]
    fn transient_point_has_no_tight_return() {
        let scenario = by_name("ml_sym").unwrap();
        let x0 = DVector::from_vec(vec![1.2, 0.2, 0.2]);
        let out = refine_close_return(&scenario, &x0, (0.5, 10.0), 1e-4, &cfg()).unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn cycle_point_returns_near_its_period() {
        let scenario = by_name("lv_cycle").unwrap();
        let cr = refine_close_return(&scenario, &cycle_point(), (30.0, 90.0), 1e-4, &cfg())
            .unwrap()
            .expect("closed orbit must return");
        assert!(cr.error < 1e-5, "refined error {}", cr.error);
        // Re-validate the witness independently.
        let img = flow_map(&scenario, &cr.z, cr.t, &cfg()).unwrap().completed().unwrap();
        assert!((img - &cr.z).norm() < 1e-4);
    }

    #[test]
    fn equilibrium_recurrent_times_fill_the_horizon() {
        let scenario = by_name("ml_sym").unwrap();
        let set =
            recurrent_times(&scenario, &ml_equilibrium(), 1e-3, 10.0, 0.1, &cfg()).unwrap();
        assert_eq!(set.intervals, vec![(0.0, 10.0)]);
        assert_eq!(set.horizon, 10.0);
    }

    #[test]
    fn cycle_recurrent_times_concentrate_near_period_multiples() {
        let scenario = by_name("lv_cycle").unwrap();
        let cr = refine_close_return(&scenario, &cycle_point(), (30.0, 90.0), 1e-4, &cfg())
            .unwrap()
            .unwrap();
        let period = cr.t;
        let theta = 0.05;
        let horizon = 2.5 * period;
        let set = recurrent_times(&scenario, &cr.z, theta, horizon, 0.05, &cfg()).unwrap();
        assert!(set.intervals.len() >= 3, "intervals: {:?}", set.intervals);
        // Every interval after the initial one sits around a period multiple.
        for &(lo, hi) in &set.intervals {
            if lo == 0.0 {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let k = (mid / period).round();
            assert!(k >= 1.0);
            assert!(
                (mid - k * period).abs() < 0.25 * period,
                "interval ({lo}, {hi}) far from period multiples of {period}"
            );
        }
        // Period multiples inside the horizon are covered by some interval.
        for k in 1..=2 {
            let t = k as f64 * period;
            assert!(
                set.intervals.iter().any(|&(lo, hi)| lo < t && t < hi),
                "t = {t} not covered by {:?}",
                set.intervals
            );
        }
        // Nesting in θ: tighter tolerance gives nested intervals.
        let tight = recurrent_times(&scenario, &cr.z, theta / 4.0, horizon, 0.05, &cfg()).unwrap();
        for &(lo, hi) in &tight.intervals {
            assert!(
                set.intervals.iter().any(|&(olo, ohi)| olo <= lo + 1e-9 && hi <= ohi + 1e-9),
                "tight interval ({lo}, {hi}) not nested in {:?}",
                set.intervals
            );
        }
    }

    #[test]
    fn a1_search_on_equilibrium_hits_the_first_window() {
        let scenario = by_name("ml_sym").unwrap();
        let out =
            verify_a1(&scenario, &ml_equilibrium(), 1e-6, 3.0, 0.5, 20.0, &cfg()).unwrap();
        match out {
            A1Outcome::Witness { n, t, error, .. } => {
                assert_eq!(n, 1);
                assert!(t.abs() < 0.5);
                assert!(error < 1e-9);
            }
            other => panic!("expected witness, got {other:?}"),
        }
    }

    #[test]
    fn a1_search_gives_soft_miss_on_transients() {
        let scenario = by_name("ml_sym").unwrap();
        let z = DVector::from_vec(vec![1.2, 0.2, 0.2]);
        let out = verify_a1(&scenario, &z, 1e-3, 3.0, 0.5, 20.0, &cfg()).unwrap();
        assert_eq!(out, A1Outcome::NotFoundWithinHorizon);
    }

    #[test]
    fn a1_search_finds_period_at_double_half_period() {
        let scenario = by_name("lv_cycle").unwrap();
        let cr = refine_close_return(&scenario, &cycle_point(), (30.0, 90.0), 1e-4, &cfg())
            .unwrap()
            .unwrap();
        let period = cr.t;
        let tau = period / 2.0;
        let eps = 0.05 * period;
        let out =
            verify_a1(&scenario, &cr.z, 0.02, tau, eps, 1.2 * period, &cfg()).unwrap();
        match out {
            A1Outcome::Witness { n, s, .. } => {
                assert_eq!(n, 2);
                assert!((s - period).abs() < eps);
            }
            other => panic!("expected witness at the full period, got {other:?}"),
        }
    }

    #[test]
    fn ip_set_on_equilibrium_is_exact() {
        let scenario = by_name("ml_sym").unwrap();
        let z = ml_equilibrium();
        let ip = ip_generate(&scenario, &z, 1e-3, 10, 5.0, &cfg()).unwrap();
        assert_eq!(ip.generators.len(), 10);
        assert!(!ip.truncated);
        assert!(ip.worst_error < 1e-8);
        assert!(ip.moduli.windows(2).all(|w| w[1] <= w[0]));
        let check = ip_verify(&scenario, &z, 1e-3, &ip.generators, &cfg()).unwrap();
        assert!(check.pass);
    }

    #[test]
    fn ip_set_on_cycle_verifies_its_own_tolerance() {
        let scenario = by_name("lv_cycle").unwrap();
        let cr = refine_close_return(&scenario, &cycle_point(), (30.0, 90.0), 1e-4, &cfg())
            .unwrap()
            .unwrap();
        let theta = 5e-3;
        let ip = ip_generate(&scenario, &cr.z, theta, 3, 160.0, &cfg()).unwrap();
        assert!(!ip.generators.is_empty());
        assert!(ip.worst_error < theta, "worst error {}", ip.worst_error);
        let check = ip_verify(&scenario, &cr.z, theta, &ip.generators, &cfg()).unwrap();
        assert!(check.pass);
    }

    #[test]
    fn half_period_generator_fails_verification() {
        let scenario = by_name("lv_cycle").unwrap();
        let cr = refine_close_return(&scenario, &cycle_point(), (30.0, 90.0), 1e-4, &cfg())
            .unwrap()
            .unwrap();
        let check =
            ip_verify(&scenario, &cr.z, 1e-3, &[cr.t / 2.0], &cfg()).unwrap();
        assert!(!check.pass);
        assert!(check.worst_error > 0.1, "half period must miss by the ring diameter");
    }

    #[test]
    fn argument_caps_are_enforced() {
        let scenario = by_name("ml_sym").unwrap();
        let z = ml_equilibrium();
        assert!(verify_a1(&scenario, &z, 1e-3, 1.0, 0.6, 10.0, &cfg()).is_err());
        assert!(ip_generate(&scenario, &z, 1e-3, 13, 5.0, &cfg()).is_err());
        assert!(ip_verify(&scenario, &z, 1e-3, &vec![1.0; 21], &cfg()).is_err());
    }
}
