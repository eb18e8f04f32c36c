//! Adaptive integration of the flow `Φ_t`, forward and backward.
//!
//! The stepper is a hand-rolled Dormand–Prince 5(4) pair (the classic
//! RKDP tableau) with FSAL reuse and a PI step-size controller, specialized
//! to the low dimensions used here: stage buffers are preallocated slices
//! and the right-hand side writes in place, so a step costs six field
//! evaluations and no allocation.
//!
//! Backward time is handled by integrating the negated field: competitive
//! flows are analyzed mostly through their time reversal, so `flow_map`
//! accepts negative times directly. Orbits that leave the escape radius
//! terminate with `Escaped(t)`; a step-size underflow (typically a
//! finite-time blow-up of the reversed Lotka–Volterra field) terminates
//! with `BlowupSuspected(t)`.

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use nalgebra::DVector;

// Dormand–Prince 5(4) coefficients.
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] =
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
/// Fifth-order weights (also row seven of the tableau: FSAL).
const B: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
/// Error weights `b⁵ − b⁴`.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// PI controller constants (Hairer–Nørsett–Wanner defaults for DOPRI5).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2; // largest allowed shrink factor per step
const FAC_MAX: f64 = 10.0; // largest allowed growth factor per step

/// Integrator tolerances and guards.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    /// Relative tolerance on the embedded error estimate.
    pub rel_tol: f64,
    /// Absolute tolerance on the embedded error estimate.
    pub abs_tol: f64,
    /// Hard cap on the step size.
    pub max_step: f64,
    /// Overrides the scenario escape radius when set.
    pub escape_radius: Option<f64>,
    /// Longest elapsed time a single call may integrate.
    pub max_time: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: f64::INFINITY,
            escape_radius: None,
            max_time: 1e6,
        }
    }
}

impl IntegratorConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::Config(
                "integrator tolerances and max_step must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Terminal status of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajStatus {
    Completed,
    /// The orbit left the escape radius at elapsed time `t`.
    Escaped(f64),
    /// Step size underflowed at elapsed time `t` (finite-time blow-up).
    BlowupSuspected(f64),
}

/// Result of a point-to-point flow evaluation.
#[derive(Debug, Clone)]
pub enum FlowOutcome {
    /// `Φ_t(x)` reached at the requested time.
    Completed(DVector<f64>),
    /// Escape at elapsed time `t` with the last in-range state.
    Escaped { t: f64, last: DVector<f64> },
    /// Blow-up suspected at elapsed time `t`.
    BlowupSuspected { t: f64, last: DVector<f64> },
}

impl FlowOutcome {
    /// The final state if the run completed.
    pub fn completed(self) -> Option<DVector<f64>> {
        match self {
            FlowOutcome::Completed(x) => Some(x),
            _ => None,
        }
    }
}

/// A sampled orbit segment. `times` are elapsed (nonnegative) times along
/// the run; for a backward run, `states[k] = Φ_{−times[k]}(x₀)`.
#[derive(Debug, Clone)]
pub struct SampledTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub status: TrajStatus,
    pub backward: bool,
}

/// Low-level adaptive stepper; advances monotonically in elapsed time.
///
/// Exposed so the recurrence scans can resume integration from stored
/// checkpoints instead of restarting orbits from zero.
pub struct Stepper<'a> {
    scenario: &'a Scenario,
    backward: bool,
    rel_tol: f64,
    abs_tol: f64,
    max_step: f64,
    escape_radius: f64,
    tau: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    h: f64,
    facold: f64,
    last_rejected: bool,
    fsal_valid: bool,
}

/// Outcome of advancing the stepper to a target time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdvanceOutcome {
    Reached,
    Escaped,
    Blowup,
}

impl<'a> Stepper<'a> {
    pub fn new(
        scenario: &'a Scenario,
        x0: &DVector<f64>,
        backward: bool,
        cfg: &IntegratorConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if x0.len() != scenario.dim() {
            return Err(Error::DimensionMismatch { expected: scenario.dim(), got: x0.len() });
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "integration initial state" });
        }
        let n = scenario.dim();
        let escape_radius = cfg.escape_radius.unwrap_or(scenario.escape_radius());
        let mut stepper = Self {
            scenario,
            backward,
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            max_step: cfg.max_step,
            escape_radius,
            tau: 0.0,
            y: x0.as_slice().to_vec(),
            k: std::array::from_fn(|_| vec![0.0; n]),
            y_stage: vec![0.0; n],
            y_new: vec![0.0; n],
            h: 0.0,
            facold: 1e-4,
            last_rejected: false,
            fsal_valid: false,
        };
        stepper.h = stepper.initial_step();
        Ok(stepper)
    }

    /// Elapsed time integrated so far.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Current state.
    pub fn state(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.y)
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        self.scenario.eval_into(y, out);
        if self.backward {
            for v in out.iter_mut() {
                *v = -*v;
            }
        }
    }

    /// Conservative first step: a fraction of the state/velocity scale
    /// ratio; the controller adapts from there.
    fn initial_step(&mut self) -> f64 {
        let n = self.y.len();
        let mut f0 = vec![0.0; n];
        self.rhs(&self.y, &mut f0);
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..n {
            let sc = self.abs_tol + self.rel_tol * self.y[i].abs();
            d0 += (self.y[i] / sc).powi(2);
            d1 += (f0[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n as f64).sqrt(), (d1 / n as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(self.max_step).max(1e-10)
    }

    /// One accepted DOPRI5 step of size `h` (already clamped by the caller);
    /// returns the error estimate of the attempted step and leaves the new
    /// state in `y_new` / `k[6]`.
    fn attempt(&mut self, h: f64) -> f64 {
        let n = self.y.len();
        if !self.fsal_valid {
            let (y, k0) = (&self.y, &mut self.k[0]);
            self.scenario.eval_into(y, k0);
            if self.backward {
                for v in self.k[0].iter_mut() {
                    *v = -*v;
                }
            }
        }
        let a_rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (stage, a_row) in a_rows.iter().enumerate() {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, &a) in a_row.iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.y_stage[i] = self.y[i] + h * acc;
            }
            let (y_stage, k_next) = (&self.y_stage, stage + 1);
            self.scenario.eval_into(y_stage, &mut self.k[k_next]);
            if self.backward {
                for v in self.k[k_next].iter_mut() {
                    *v = -*v;
                }
            }
            let _ = C; // stage times are unused: the fields are autonomous
        }
        // Fifth-order solution.
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..6 {
                acc += B[j] * self.k[j][i];
            }
            self.y_new[i] = self.y[i] + h * acc;
        }
        // FSAL stage: derivative at the new point.
        let (y_new, k6) = (&self.y_new, &mut self.k[6]);
        self.scenario.eval_into(y_new, k6);
        if self.backward {
            for v in self.k[6].iter_mut() {
                *v = -*v;
            }
        }
        // Embedded error estimate.
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * self.k[j][i];
            }
            let sc = self.abs_tol + self.rel_tol * self.y[i].abs().max(self.y_new[i].abs());
            err += (h * e / sc).powi(2);
        }
        (err / n as f64).sqrt()
    }

    /// Integrates until elapsed time `tau_target` (which must not be behind
    /// the current time), the escape radius, or a blow-up.
    pub fn advance_to(&mut self, tau_target: f64) -> Result<AdvanceOutcome> {
        if tau_target < self.tau - 1e-15 {
            return Err(Error::InvalidArgument(format!(
                "cannot integrate backwards within a run: at {}, asked for {}",
                self.tau, tau_target
            )));
        }
        while self.tau < tau_target {
            let remaining = tau_target - self.tau;
            // Resolve exactly to the target; tiny residuals finish in one step.
            let h = self.h.min(self.max_step).min(remaining);
            if h < 1e-14 * self.tau.max(1.0) {
                if remaining < 1e-12 * self.tau.max(1.0) {
                    self.tau = tau_target;
                    return Ok(AdvanceOutcome::Reached);
                }
                return Ok(AdvanceOutcome::Blowup);
            }
            let err = self.attempt(h);
            if !err.is_finite() {
                // A NaN inside the stages: shrink hard and retry.
                self.h = h * FAC_MIN;
                self.fsal_valid = false;
                if self.h < 1e-14 * self.tau.max(1.0) {
                    return Ok(AdvanceOutcome::Blowup);
                }
                self.last_rejected = true;
                continue;
            }
            let fac11 = err.powf(EXPO1);
            if err <= 1.0 {
                // Accept.
                self.tau += h;
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                self.fsal_valid = true;
                let fac = (fac11 / self.facold.powf(BETA) / SAFETY)
                    .clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                self.facold = err.max(1e-4);
                let mut h_new = h / fac;
                if self.last_rejected {
                    h_new = h_new.min(h);
                }
                self.last_rejected = false;
                self.h = h_new;
                if self.y.iter().any(|v| !v.is_finite()) {
                    return Ok(AdvanceOutcome::Blowup);
                }
                let norm: f64 = self.y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > self.escape_radius {
                    return Ok(AdvanceOutcome::Escaped);
                }
            } else {
                // Reject: shrink without the PI memory term.
                self.h = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
                self.last_rejected = true;
                // The FSAL stage belongs to the rejected state; k[0] is
                // still the derivative at `y`, so it stays valid.
            }
        }
        Ok(AdvanceOutcome::Reached)
    }
}

/// Evaluates `Φ_t(x)`; negative `t` integrates the reversed field.
pub fn flow_map(
    scenario: &Scenario,
    x: &DVector<f64>,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<FlowOutcome> {
    if !t.is_finite() {
        return Err(Error::NonFinite { context: "flow time" });
    }
    if t.abs() > cfg.max_time {
        return Err(Error::InvalidArgument(format!(
            "requested |t| = {} exceeds max_time = {}",
            t.abs(),
            cfg.max_time
        )));
    }
    let mut stepper = Stepper::new(scenario, x, t < 0.0, cfg)?;
    match stepper.advance_to(t.abs())? {
        AdvanceOutcome::Reached => Ok(FlowOutcome::Completed(stepper.state())),
        AdvanceOutcome::Escaped => {
            Ok(FlowOutcome::Escaped { t: stepper.tau(), last: stepper.state() })
        }
        AdvanceOutcome::Blowup => {
            Ok(FlowOutcome::BlowupSuspected { t: stepper.tau(), last: stepper.state() })
        }
    }
}

/// Samples the orbit of `x` on a uniform grid of spacing `dt` up to
/// `|t_span|` (the exact endpoint is always included). Negative `t_span`
/// samples the backward orbit.
pub fn flow_sampled(
    scenario: &Scenario,
    x: &DVector<f64>,
    t_span: f64,
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<SampledTrajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("sampling dt must be positive".into()));
    }
    if t_span.abs() > cfg.max_time {
        return Err(Error::InvalidArgument(format!(
            "requested |t| = {} exceeds max_time = {}",
            t_span.abs(),
            cfg.max_time
        )));
    }
    let backward = t_span < 0.0;
    let span = t_span.abs();
    let mut stepper = Stepper::new(scenario, x, backward, cfg)?;
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let mut status = TrajStatus::Completed;
    let mut k = 1u64;
    loop {
        let target = (k as f64 * dt).min(span);
        match stepper.advance_to(target)? {
            AdvanceOutcome::Reached => {
                times.push(stepper.tau());
                states.push(stepper.state());
                if target >= span {
                    break;
                }
            }
            AdvanceOutcome::Escaped => {
                status = TrajStatus::Escaped(stepper.tau());
                times.push(stepper.tau());
                states.push(stepper.state());
                break;
            }
            AdvanceOutcome::Blowup => {
                status = TrajStatus::BlowupSuspected(stepper.tau());
                break;
            }
        }
        k += 1;
    }
    Ok(SampledTrajectory { times, states, status, backward })
}

/// Group-law residual `‖Φ_t(Φ_s(x)) − Φ_{s+t}(x)‖₂`; errors if any of the
/// three runs fails to complete.
pub fn semigroup_residual(
    scenario: &Scenario,
    x: &DVector<f64>,
    s: f64,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let step1 = flow_map(scenario, x, s, cfg)?
        .completed()
        .ok_or_else(|| Error::InvalidArgument("Φ_s(x) did not complete".into()))?;
    let step2 = flow_map(scenario, &step1, t, cfg)?
        .completed()
        .ok_or_else(|| Error::InvalidArgument("Φ_t(Φ_s(x)) did not complete".into()))?;
    let direct = flow_map(scenario, x, s + t, cfg)?
        .completed()
        .ok_or_else(|| Error::InvalidArgument("Φ_{s+t}(x) did not complete".into()))?;
    Ok((step2 - direct).norm())
}
