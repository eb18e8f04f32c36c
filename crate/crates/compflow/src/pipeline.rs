//! Subcommand orchestration: realizes a validated [`RunConfig`], runs one
//! analysis stage, and writes plain-text artifacts under the configured
//! output directory.
//!
//! Every stage is a pure function of the config (single-threaded, seeded),
//! so rerunning with the same config and seed reproduces each artifact
//! byte for byte. A stage reports how many audit violations it found; the
//! CLI maps a nonzero count to a failing exit status. The `verify` stage
//! runs every other stage into per-stage subdirectories and needs a fully
//! specified config (including at least one cell block).

use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::DVector;
use rand::Rng;

use crate::attractor::{attractor_bounds, AlphaParams, AttractorBounds, BoundsParams};
use crate::cells::{cells_disjoint, CellContext, CellPatch, GridSpec, HyperplaneFrame};
use crate::config::RunConfig;
use crate::entropy::entropy_estimate;
use crate::equilibria::census;
use crate::error::{Error, Result};
use crate::integrate::{flow_map, flow_sampled, IntegratorConfig, TrajStatus};
use crate::order::ConeSpec;
use crate::recurrence::{
    ip_generate, ip_verify, recurrent_times, refine_close_return, scan_return_distances,
    verify_a1_scan, A1Outcome, CloseReturn, T_MIN_RETURN,
};
use crate::report::{
    render_absorbing, render_a1_queries, render_cell, render_cell_audit, render_components,
    render_connecting, render_cover, render_disjoint, render_edges, render_entropy_csv,
    render_entropy_verdict, render_equilibria, render_intersection, render_intervals,
    render_ip, render_limit_set, render_occupation, render_occupation_summary, render_stages,
    write_text,
};
use crate::rng::{derive_seed, rng_for};
use crate::scenario::Scenario;
use crate::structure::{
    absorbing_audit, classify_branch_evidence, classify_component, connecting_consistency,
    intersection_principle_audit, limit_set_dichotomy, occupation_support,
    refine_representatives, target_equilibrium_for_component, ComponentRecord,
    DichotomyVerdict, LimitSetVerdict, BRANCH_DELTAS,
};
use crate::transition::{subdivide_iterate, SubdivisionOutcome, SubdivisionParams};

/// Zero-entropy verdict band for the headline estimate (nats per unit time).
pub const ENTROPY_TOL: f64 = 0.05;
/// Minimum fraction of recurrent-time queries that must produce a witness.
pub const MIN_WITNESS_RATE: f64 = 0.95;
/// Representative cap per component during classification.
const MAX_REPS: usize = 48;
/// Forward time of the cell invariance audit.
const T_INVARIANCE: f64 = 10.0;
/// Node/pair cap for cell audits.
const AUDIT_SAMPLE_CAP: usize = 64;
/// Newton seed grid per axis for the equilibrium census.
const CENSUS_PER_AXIS: usize = 7;
/// Sampling interval of the recurrent-interval artifact.
const INTERVAL_DT: f64 = 0.05;
/// Representative cap when collecting branch evidence.
const BRANCH_MAX_POINTS: usize = 6;

/// What one stage produced: audit violation count and artifact paths.
#[derive(Debug, Clone, Default)]
pub struct StageOutcome {
    pub violations: usize,
    pub artifacts: Vec<PathBuf>,
}

/// A realized config plus the resolved output directory — everything the
/// stage bodies share.
struct StageCtx<'a> {
    cfg: &'a RunConfig,
    scenario: Scenario,
    cone: ConeSpec,
    out: PathBuf,
    integ: IntegratorConfig,
}

impl<'a> StageCtx<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate()?;
        let realized = cfg.realize()?;
        let out = cfg.out_dir.clone().ok_or_else(|| {
            Error::Config(
                "an output directory is required: set out_dir in the config or pass --out"
                    .into(),
            )
        })?;
        Ok(Self {
            cfg,
            scenario: realized.scenario,
            cone: realized.cone,
            out,
            integ: IntegratorConfig::default(),
        })
    }

    fn save(&self, outcome: &mut StageOutcome, name: &str, text: &str) -> Result<()> {
        let path = self.out.join(name);
        write_text(&path, text)?;
        outcome.artifacts.push(path);
        Ok(())
    }

    fn run_subdivision(&self) -> Result<SubdivisionOutcome> {
        let p = &self.cfg.pipeline;
        let params = SubdivisionParams {
            map_time: p.map_time,
            samples_per_box: p.samples_per_box,
            padding: p.padding.0.clone(),
            seed: derive_seed(self.cfg.seed, 1),
        };
        subdivide_iterate(
            &self.scenario,
            self.scenario.valid_domain().clone(),
            &p.depths,
            &params,
            &self.integ,
        )
    }

    fn bounds(&self) -> Result<AttractorBounds> {
        let params =
            BoundsParams { seed: derive_seed(self.cfg.seed, 2), ..BoundsParams::default() };
        attractor_bounds(&self.scenario, &self.cone, &params, &self.integ)
    }

    /// Resolves `theta` to an absolute tolerance, scaling by the attractor
    /// diameter when the config marks it as a fraction.
    fn theta_abs(&self) -> Result<f64> {
        let p = &self.cfg.pipeline;
        if p.theta_is_fraction {
            Ok(p.theta * self.bounds()?.bounds_box.diameter_euclid())
        } else {
            Ok(p.theta)
        }
    }

    /// The configured witness point, defaulting to the census equilibrium
    /// closest to the domain center.
    fn witness(&self) -> Result<DVector<f64>> {
        if let Some(w) = &self.cfg.pipeline.witness {
            return Ok(DVector::from_column_slice(w));
        }
        let eqs = census(&self.scenario, CENSUS_PER_AXIS)?;
        let center = self.scenario.valid_domain().center();
        eqs.iter()
            .min_by(|a, b| {
                let da = (&a.point - &center).norm();
                let db = (&b.point - &center).norm();
                da.total_cmp(&db)
            })
            .map(|e| e.point.clone())
            .ok_or(Error::EmptySet { context: "no equilibrium available as a default witness" })
    }

    /// Birkhoff-center outer approximation: subdivision cover, pruning
    /// stages, and the final transition graph.
    fn recurrent(&self) -> Result<StageOutcome> {
        let mut out = StageOutcome::default();
        let sub = self.run_subdivision()?;
        out.violations += usize::from(sub.emptied);
        self.save(&mut out, "cover.csv", &render_cover(&sub.cover))?;
        self.save(&mut out, "stages.csv", &render_stages(&sub.stages))?;
        if let Some(graph) = &sub.final_graph {
            self.save(&mut out, "edges.txt", &render_edges(graph))?;
        }
        let comps = ComponentRecord::from_cover(&sub.cover, MAX_REPS);
        self.save(&mut out, "components.txt", &render_components(&comps))?;
        Ok(out)
    }

    /// Order-structure classification of the surviving components, plus the
    /// intersection, absorbing, connecting, and limit-set audits.
    fn classify(&self) -> Result<StageOutcome> {
        let p = &self.cfg.pipeline;
        let mut out = StageOutcome::default();
        let sub = self.run_subdivision()?;
        let cover = &sub.cover;
        out.violations += usize::from(sub.emptied);
        self.save(&mut out, "cover.csv", &render_cover(cover))?;
        self.save(&mut out, "stages.csv", &render_stages(&sub.stages))?;

        let resolution = cover.widths().amax();
        let eqs = census(&self.scenario, CENSUS_PER_AXIS)?;
        self.save(&mut out, "equilibria.csv", &render_equilibria(&eqs))?;

        let bounds = self.bounds()?;
        let alpha = AlphaParams { t_max: p.t_backward, ..AlphaParams::default() };
        let theta = self.theta_abs()?;

        let mut comps = ComponentRecord::from_cover(cover, MAX_REPS);
        for comp in &mut comps {
            comp.representatives =
                refine_representatives(&self.scenario, cover, comp, p.t_settle, &self.integ)?;
            for eq in &eqs {
                if cover.index_of(&eq.point).is_some_and(|i| comp.contains_box(i)) {
                    comp.certified.push(CloseReturn {
                        z: eq.point.clone(),
                        t: 1.0,
                        error: eq.residual,
                    });
                }
            }
            if comp.certified.is_empty() {
                let window = (T_MIN_RETURN, p.ip_horizon);
                if let Some(found) = refine_close_return(
                    &self.scenario,
                    &comp.representatives[0],
                    window,
                    theta,
                    &self.integ,
                )? {
                    comp.certified.push(found);
                }
            }
            let verdict = classify_component(
                &self.cone,
                &comp.representatives,
                &eqs,
                p.shell_margin,
                resolution,
            )?;
            if matches!(verdict, DichotomyVerdict::Violation { .. }) {
                out.violations += 1;
            }
            comp.verdict = Some(verdict);
            let targets = target_equilibrium_for_component(
                &self.scenario,
                &self.cone,
                &comp.representatives,
                &bounds,
                &alpha,
                &self.integ,
            )?;
            comp.target_lower = Some(targets.lower);
            comp.target_upper = Some(targets.upper);
            comp.branch_evidence = Some(classify_branch_evidence(
                &self.scenario,
                &self.cone,
                &comp.representatives,
                &bounds,
                &BRANCH_DELTAS,
                BRANCH_MAX_POINTS,
                &alpha,
                &self.integ,
            )?);
        }

        let all_certified: Vec<CloseReturn> =
            comps.iter().flat_map(|c| c.certified.iter().cloned()).collect();
        let mut audit_text = String::new();
        if !all_certified.is_empty() {
            let audit =
                intersection_principle_audit(&self.cone, &all_certified, cover, p.shell_margin)?;
            out.violations += audit.flags.len();
            audit_text.push_str(&render_intersection(&audit));
        }
        for (i, comp) in comps.iter().enumerate() {
            let absorbing = absorbing_audit(
                &self.cone,
                &comp.representatives,
                &eqs,
                p.shell_margin,
                resolution,
            )?;
            out.violations += absorbing.violations.len();
            let connecting =
                connecting_consistency(&self.cone, comp, cover, &all_certified, p.shell_margin)?;
            out.violations += connecting.violations.len();
            let _ = writeln!(audit_text, "component: {i}");
            audit_text.push_str(&render_absorbing(&absorbing));
            audit_text.push_str(&render_connecting(&connecting));
        }
        let with_certified: Vec<&ComponentRecord> =
            comps.iter().filter(|c| !c.certified.is_empty()).collect();
        if with_certified.len() >= 2 {
            let verdict = limit_set_dichotomy(
                &self.cone,
                &self.scenario,
                &with_certified[0].certified[0].z,
                &with_certified[1].certified[0].z,
                2.0 * p.t_settle,
                p.shell_margin,
                resolution,
                &self.integ,
            )?;
            if matches!(verdict, LimitSetVerdict::Violation { .. }) {
                out.violations += 1;
            }
            audit_text.push_str(&render_limit_set(&verdict));
        }
        self.save(&mut out, "components.txt", &render_components(&comps))?;
        self.save(&mut out, "audits.txt", &audit_text)?;
        Ok(out)
    }

    /// Invariant-cell reconstruction over the shared hyperplane frame, with
    /// per-cell audits and pairwise disjointness checks.
    fn cells(&self) -> Result<StageOutcome> {
        let p = &self.cfg.pipeline;
        if p.cells.is_empty() {
            return Err(Error::Config(
                "the cells stage needs at least one [[pipeline.cells]] block".into(),
            ));
        }
        let mut out = StageOutcome::default();
        let dim = self.scenario.dim();
        let bounds = self.bounds()?;
        let frame = HyperplaneFrame::from_domain_center(
            self.scenario.valid_domain(),
            self.cone.interior_direction(),
        )?;
        let grid = GridSpec { nodes_per_axis: p.grid_nodes, half_extent: p.grid_half_extent };
        let context = CellContext::new(
            &self.scenario,
            &self.cone,
            &bounds,
            AlphaParams { t_max: p.t_backward, ..AlphaParams::default() },
            self.integ.clone(),
        );
        let mut patches: Vec<CellPatch> = Vec::new();
        for (i, block) in p.cells.iter().enumerate() {
            let (target, side) = block.build(dim)?;
            let cell = context.build_cell(&frame, grid, target, side, p.bisect_tol)?;
            let audit = context.cell_audit(&cell, Some(T_INVARIANCE), AUDIT_SAMPLE_CAP)?;
            if !cell.usable() {
                out.violations += 1;
            }
            if !(audit.unorder_margin > 0.0) {
                out.violations += 1;
            }
            self.save(&mut out, &format!("cell_{i}.csv"), &render_cell(&cell))?;
            self.save(
                &mut out,
                &format!("cell_{i}_audit.txt"),
                &render_cell_audit(&cell, &audit, None),
            )?;
            patches.push(cell);
        }
        for i in 0..patches.len() {
            for j in (i + 1)..patches.len() {
                let name = format!("disjoint_{i}_{j}.txt");
                match cells_disjoint(&patches[i], &patches[j]) {
                    Ok(report) => {
                        if !report.pass {
                            out.violations += 1;
                        }
                        self.save(
                            &mut out,
                            &name,
                            &render_disjoint(&patches[i], &patches[j], &report),
                        )?;
                    }
                    Err(Error::EmptySet { .. }) => {
                        out.violations += 1;
                        self.save(
                            &mut out,
                            &name,
                            "[disjointness]\nshared_nodes: 0\nresult: FAIL\n",
                        )?;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(out)
    }

    /// IP-set generation/verification and the recurrent-time interval and
    /// query artifacts for the witness point.
    fn ipset(&self) -> Result<StageOutcome> {
        let p = &self.cfg.pipeline;
        let mut out = StageOutcome::default();
        let z = self.witness()?;
        let theta = self.theta_abs()?;

        let ip = ip_generate(&self.scenario, &z, theta, p.ip_generators, p.ip_horizon, &self.integ)?;
        let check = ip_verify(&self.scenario, &z, theta, &ip.generators, &self.integ)?;
        if !check.pass {
            out.violations += 1;
        }
        let mut ip_text = render_ip(&ip);
        let _ = writeln!(ip_text, "[verification]");
        let _ = writeln!(ip_text, "worst_error: {}", check.worst_error);
        let _ = writeln!(ip_text, "worst_sum: {}", check.worst_sum);
        if let Some(s) = check.escaped_at {
            let _ = writeln!(ip_text, "escaped_at: {s}");
        }
        let _ = writeln!(ip_text, "result: {}", if check.pass { "PASS" } else { "FAIL" });
        self.save(&mut out, "ip_report.txt", &ip_text)?;

        let intervals =
            recurrent_times(&self.scenario, &z, theta, p.ip_horizon, INTERVAL_DT, &self.integ)?;
        self.save(&mut out, "intervals.csv", &render_intervals(&intervals))?;

        // Random (τ, ε) queries, ε ∈ [0.01τ, 0.25τ), answered from one shared
        // return-distance scan sampled finely enough for the smallest ε.
        let mut rng = rng_for(self.cfg.seed, 3);
        let mut queries: Vec<(f64, f64)> = Vec::with_capacity(p.a1_queries);
        for _ in 0..p.a1_queries {
            let tau: f64 = rng.gen_range(1.0..30.0);
            let eps: f64 = tau * rng.gen_range(0.01..0.25);
            queries.push((tau, eps));
        }
        let eps_min = queries.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
        let dt = (eps_min / 4.0).min(0.05);
        let scan = scan_return_distances(&self.scenario, &z, p.a1_horizon, dt, &self.integ)?;
        let mut results = Vec::with_capacity(queries.len());
        let mut hits = 0usize;
        for (tau, eps) in queries {
            let outcome = verify_a1_scan(&scan, &self.scenario, &z, theta, tau, eps, &self.integ)?;
            if matches!(outcome, A1Outcome::Witness { .. }) {
                hits += 1;
            }
            results.push((tau, eps, outcome));
        }
        let rate = hits as f64 / results.len().max(1) as f64;
        if rate < MIN_WITNESS_RATE {
            out.violations += 1;
        }
        self.save(&mut out, "return_queries.csv", &render_a1_queries(&results))?;
        let mut summary = String::from("[return_queries]\n");
        let _ = writeln!(summary, "queries: {}", results.len());
        let _ = writeln!(summary, "witnesses: {hits}");
        let _ = writeln!(summary, "rate: {rate}");
        let _ = writeln!(
            summary,
            "result: {}",
            if rate >= MIN_WITNESS_RATE { "PASS" } else { "FAIL" }
        );
        self.save(&mut out, "return_summary.txt", &summary)?;
        Ok(out)
    }

    /// Spanning-count matrix and headline entropy verdict for a settled
    /// sample of the witness orbit.
    fn entropy(&self) -> Result<StageOutcome> {
        let p = &self.cfg.pipeline;
        let mut out = StageOutcome::default();
        let z = self.witness()?;
        let settled = flow_map(&self.scenario, &z, p.t_settle, &self.integ)?
            .completed()
            .ok_or_else(|| {
                Error::InvalidArgument("the entropy witness escaped while settling".into())
            })?;
        let span = *p.horizons.last().expect("horizons validated nonempty");
        let dt = span / p.entropy_samples as f64;
        let orbit = flow_sampled(&self.scenario, &settled, span, dt, &self.integ)?;
        if orbit.status != TrajStatus::Completed {
            return Err(Error::InvalidArgument(
                "the entropy witness escaped while sampling the base set".into(),
            ));
        }
        let base: Vec<DVector<f64>> =
            orbit.states.into_iter().take(p.entropy_samples).collect();
        let report =
            entropy_estimate(&self.scenario, &base, &p.horizons, &p.epsilons, &self.integ)?;
        if report.headline > ENTROPY_TOL {
            out.violations += 1;
        }
        self.save(&mut out, "entropy.csv", &render_entropy_csv(&report))?;
        self.save(&mut out, "entropy_verdict.txt", &render_entropy_verdict(&report, ENTROPY_TOL))?;
        Ok(out)
    }

    /// Occupation support of the witness orbit on a fixed-depth grid
    /// (reported, not gated).
    fn occupation(&self) -> Result<StageOutcome> {
        let p = &self.cfg.pipeline;
        let mut out = StageOutcome::default();
        let z = self.witness()?;
        let support = occupation_support(
            &self.scenario,
            &z,
            p.occupation_time,
            p.occupation_burn,
            self.scenario.valid_domain().clone(),
            p.occupation_depth,
            &self.integ,
        )?;
        self.save(&mut out, "occupation.csv", &render_occupation(&support))?;
        self.save(&mut out, "occupation_summary.txt", &render_occupation_summary(&support))?;
        Ok(out)
    }
}

/// `recurrent`: Birkhoff-center outer approximation artifacts.
pub fn run_recurrent(cfg: &RunConfig) -> Result<StageOutcome> {
    StageCtx::new(cfg)?.recurrent()
}

/// `classify`: component order-structure verdicts and consistency audits.
pub fn run_classify(cfg: &RunConfig) -> Result<StageOutcome> {
    StageCtx::new(cfg)?.classify()
}

/// `cells`: invariant-cell reconstruction, audits, and disjointness.
pub fn run_cells(cfg: &RunConfig) -> Result<StageOutcome> {
    StageCtx::new(cfg)?.cells()
}

/// `ipset`: IP-set generation/verification and recurrent-time queries.
pub fn run_ipset(cfg: &RunConfig) -> Result<StageOutcome> {
    StageCtx::new(cfg)?.ipset()
}

/// `entropy`: spanning-count matrix and headline verdict.
pub fn run_entropy(cfg: &RunConfig) -> Result<StageOutcome> {
    StageCtx::new(cfg)?.entropy()
}

/// `occupation`: occupation-support histogram of the witness orbit.
pub fn run_occupation(cfg: &RunConfig) -> Result<StageOutcome> {
    StageCtx::new(cfg)?.occupation()
}

/// `verify`: runs every stage into its own subdirectory and writes a
/// combined summary; the total violation count gates the exit status.
pub fn run_verify(cfg: &RunConfig) -> Result<StageOutcome> {
    let ctx = StageCtx::new(cfg)?;
    let stages: [(&str, fn(&RunConfig) -> Result<StageOutcome>); 6] = [
        ("recurrent", run_recurrent),
        ("classify", run_classify),
        ("cells", run_cells),
        ("ipset", run_ipset),
        ("entropy", run_entropy),
        ("occupation", run_occupation),
    ];
    let mut total = StageOutcome::default();
    let mut summary = String::from("[verify]\n");
    for (name, stage) in stages {
        let sub_cfg = cfg.clone().with_out_dir(ctx.out.join(name));
        let outcome = stage(&sub_cfg)?;
        let _ = writeln!(summary, "stage {name}: violations={}", outcome.violations);
        total.violations += outcome.violations;
        total.artifacts.extend(outcome.artifacts);
    }
    let _ = writeln!(summary, "total_violations: {}", total.violations);
    let _ = writeln!(
        summary,
        "result: {}",
        if total.violations == 0 { "PASS" } else { "FAIL" }
    );
    let summary_path = ctx.out.join("summary.txt");
    write_text(&summary_path, &summary)?;
    total.artifacts.push(summary_path);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn temp_out(tag: &str) -> PathBuf {
        std::env::temp_dir().join(format!("compflow-pipeline-{}-{tag}", std::process::id()))
    }

    fn linear_config(out: &Path) -> RunConfig {
        let toml = r#"
            seed = 7

            [scenario]
            name = "linear2"

            [cone]
            matrix = "identity"

            [pipeline]
            depths = [2, 3]
            map_time = 2.0
            samples_per_box = 2
            padding = "frac:0.25"
        "#;
        RunConfig::from_toml_str(toml)
            .expect("valid test config")
            .with_out_dir(out.to_path_buf())
    }

    #[test]
    fn missing_out_dir_is_a_config_error() {
        let mut cfg = linear_config(&temp_out("unused"));
        cfg.out_dir = None;
        let err = run_recurrent(&cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
    }

    #[test]
    fn recurrent_stage_writes_artifacts_and_passes() {
        let out = temp_out("recurrent");
        let cfg = linear_config(&out);
        let outcome = run_recurrent(&cfg).expect("stage runs");
        assert_eq!(outcome.violations, 0);
        assert!(outcome.artifacts.iter().any(|p| p.ends_with("cover.csv")));
        for path in &outcome.artifacts {
            assert!(path.is_file(), "missing artifact {path:?}");
        }
        let _ = std::fs::remove_dir_all(&out);
    }

    #[test]
    fn recurrent_stage_is_deterministic_across_reruns() {
        let out_a = temp_out("det-a");
        let out_b = temp_out("det-b");
        run_recurrent(&linear_config(&out_a)).expect("first run");
        run_recurrent(&linear_config(&out_b)).expect("second run");
        for name in ["cover.csv", "stages.csv", "edges.txt", "components.txt"] {
            let a = std::fs::read(out_a.join(name)).expect("first artifact");
            let b = std::fs::read(out_b.join(name)).expect("second artifact");
            assert_eq!(a, b, "artifact {name} differs between identical runs");
        }
        let _ = std::fs::remove_dir_all(&out_a);
        let _ = std::fs::remove_dir_all(&out_b);
    }

    #[test]
    fn classify_stage_finds_single_trivial_component_at_origin() {
        let out = temp_out("classify");
        let cfg = linear_config(&out);
        let outcome = run_classify(&cfg).expect("stage runs");
        assert_eq!(outcome.violations, 0);
        let text = std::fs::read_to_string(out.join("components.txt")).expect("components");
        assert!(text.contains("singleton_trivial"), "unexpected verdicts:\n{text}");
        let _ = std::fs::remove_dir_all(&out);
    }

    #[test]
    fn cells_stage_requires_a_cell_block() {
        let out = temp_out("cells-empty");
        let cfg = linear_config(&out);
        let err = run_cells(&cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
    }
}
