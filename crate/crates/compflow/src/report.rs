//! Plain-text artifact rendering: CSV tables and line-oriented summaries.
//!
//! Every renderer is a pure function from result structures to a `String`;
//! the `write_*` wrappers put the bytes on disk. Floats are formatted with
//! Rust's shortest round-trip `Display`, containers iterate in their sorted
//! orders, and no renderer embeds paths or timestamps, so artifacts from two
//! runs with equal inputs are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::cells::{CellPatch, CellAudit, CellTarget, ContainmentReport, DisjointReport, NodeHeight};
use crate::cover::BoxCover;
use crate::entropy::EntropyReport;
use crate::equilibria::EquilibriumRecord;
use crate::error::Result;
use crate::recurrence::{A1Outcome, IPSet, RecurrentTimeSet};
use crate::structure::{
    AbsorbingReport, BackwardTarget, BranchEvidence, ComponentRecord, DichotomyVerdict,
    IntersectionAudit, IntersectionFlag, LimitSetVerdict, OccupationSupport,
};
use crate::transition::{StageReport, TransitionGraph};

/// Joins the components of a vector with commas (CSV cell group).
fn csv_vec(v: &DVector<f64>) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Renders a vector as a parenthesized tuple for line text.
fn tuple_vec(v: &DVector<f64>) -> String {
    format!("({})", csv_vec(v))
}

fn axis_header(prefix: &str, n: usize) -> String {
    (1..=n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
}

/// `depth,index,c1..cn,r1..rn` over the active boxes, ascending by index.
pub fn render_cover(cover: &BoxCover) -> String {
    let n = cover.dim();
    let mut out = format!("depth,index,{},{}\n", axis_header("c", n), axis_header("r", n));
    let radii = cover.radii();
    for &index in cover.active() {
        let c = cover.center(index);
        let _ = writeln!(out, "{},{},{},{}", cover.depth(), index, csv_vec(&c), csv_vec(&radii));
    }
    out
}

/// One `src dst` line per edge (sorted); boxes that can leave the covered
/// region emit an extra `src EXIT` line.
pub fn render_edges(graph: &TransitionGraph) -> String {
    let mut out = String::new();
    for (src, dsts) in graph.edges() {
        for dst in dsts {
            let _ = writeln!(out, "{src} {dst}");
        }
        if graph.exit_from().contains(src) {
            let _ = writeln!(out, "{src} EXIT");
        }
    }
    out
}

/// `depth,boxes_before,survivors` per subdivision stage.
pub fn render_stages(stages: &[StageReport]) -> String {
    let mut out = String::from("depth,boxes_before,survivors\n");
    for s in stages {
        let _ = writeln!(out, "{},{},{}", s.depth, s.boxes_before, s.survivors.len());
    }
    out
}

/// `x1..xn,residual,stability,eig1..eign` per certified equilibrium.
pub fn render_equilibria(records: &[EquilibriumRecord]) -> String {
    if records.is_empty() {
        return String::from("empty\n");
    }
    let n = records[0].point.len();
    let mut out = format!(
        "{},residual,stability,{}\n",
        axis_header("x", n),
        axis_header("eig", n)
    );
    for r in records {
        let eigs =
            r.eigen_real_parts.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(
            out,
            "{},{},{:?},{}",
            csv_vec(&r.point),
            r.residual,
            r.stability,
            eigs
        );
    }
    out
}

fn verdict_line(v: &DichotomyVerdict) -> String {
    match v {
        DichotomyVerdict::Unordered { min_margin } => {
            format!("unordered min_margin={min_margin}")
        }
        DichotomyVerdict::StronglyOrderedEquilibria { projections } => {
            let p = projections.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            format!("strongly_ordered_equilibria projections=[{p}]")
        }
        DichotomyVerdict::SingletonTrivial => "singleton_trivial".to_string(),
        DichotomyVerdict::Violation { pair, detail } => {
            format!("VIOLATION pair=({},{}) detail={detail}", pair.0, pair.1)
        }
        DichotomyVerdict::Inconclusive { pair } => {
            format!("inconclusive pair=({},{})", pair.0, pair.1)
        }
    }
}

fn target_line(t: &BackwardTarget) -> String {
    match t {
        BackwardTarget::Equilibrium(p) => format!("equilibrium {}", tuple_vec(p)),
        BackwardTarget::PlusInfinity => "plus_infinity".to_string(),
        BackwardTarget::MinusInfinity => "minus_infinity".to_string(),
        BackwardTarget::SelfDegenerate(p) => format!("self_degenerate {}", tuple_vec(p)),
        BackwardTarget::Unknown => "unknown".to_string(),
    }
}

fn branch_line(b: &BranchEvidence) -> String {
    format!(
        "{:?} (toward_equilibrium={}, toward_infinity={}, other_converged={}, \
         not_classified={}, skipped={}, both_present={})",
        b.dominant,
        b.toward_equilibrium,
        b.toward_infinity,
        b.other_converged,
        b.not_classified,
        b.skipped,
        b.both_present
    )
}

/// Line-text dump of every component with its verdict, backward targets,
/// and branch evidence.
pub fn render_components(components: &[ComponentRecord]) -> String {
    let mut out = String::new();
    for (i, c) in components.iter().enumerate() {
        let _ = writeln!(out, "component {i}");
        let _ = writeln!(out, "  boxes: {}", c.boxes.len());
        let _ = writeln!(out, "  representatives: {}", c.representatives.len());
        let _ = writeln!(out, "  certified_returns: {}", c.certified.len());
        if let Some(v) = &c.verdict {
            let _ = writeln!(out, "  verdict: {}", verdict_line(v));
        }
        if let Some(t) = &c.target_lower {
            let _ = writeln!(out, "  target_lower: {}", target_line(t));
        }
        if let Some(t) = &c.target_upper {
            let _ = writeln!(out, "  target_upper: {}", target_line(t));
        }
        if let Some(b) = &c.branch_evidence {
            let _ = writeln!(out, "  branch: {}", branch_line(b));
        }
    }
    out
}

/// Section of an audit report for the joint-boundary intersection audit.
pub fn render_intersection(audit: &IntersectionAudit) -> String {
    let mut out = String::from("[intersection_principle]\n");
    let _ = writeln!(out, "pairs_checked: {}", audit.pairs_checked);
    let _ = writeln!(out, "boxes_checked: {}", audit.boxes_checked);
    let _ = writeln!(out, "min_pair_margin: {}", audit.min_pair_margin);
    for f in &audit.flags {
        match f {
            IntersectionFlag::CertifiedPair { i, j, tag, margin } => {
                let _ = writeln!(out, "flag: pair ({i},{j}) tag={tag:?} margin={margin}");
            }
            IntersectionFlag::BoxNearBoundary { index, certified, margin } => {
                let _ = writeln!(
                    out,
                    "flag: box {index} near boundary of certified {certified} margin={margin}"
                );
            }
        }
    }
    let _ = writeln!(out, "result: {}", if audit.pass() { "PASS" } else { "FAIL" });
    out
}

/// Section for the absorbing-side audit.
pub fn render_absorbing(report: &AbsorbingReport) -> String {
    let mut out = String::from("[absorbing]\n");
    let _ = writeln!(out, "checks: {}", report.checks);
    for v in &report.violations {
        let _ = writeln!(
            out,
            "flag: equilibrium {} witness_rep {} failing_rep {} margin={}",
            v.equilibrium, v.witness_rep, v.failing_rep, v.margin
        );
    }
    let _ = writeln!(out, "result: {}", if report.pass() { "PASS" } else { "FAIL" });
    out
}

/// Section for the connecting-orbit consistency audit.
pub fn render_connecting(report: &crate::structure::ConnectingReport) -> String {
    let mut out = String::from("[connecting_consistency]\n");
    for v in &report.violations {
        let _ = writeln!(
            out,
            "violation: certified {} ordered_rep {} unordered_rep {}",
            v.certified, v.ordered_rep, v.unordered_rep
        );
    }
    for w in &report.warnings {
        let _ = writeln!(
            out,
            "warning: certified {} ordered_rep {} unordered_rep {}",
            w.certified, w.ordered_rep, w.unordered_rep
        );
    }
    let _ = writeln!(
        out,
        "result: {}",
        if report.violations.is_empty() { "PASS" } else { "FAIL" }
    );
    out
}

/// Section for a forward limit-set comparison.
pub fn render_limit_set(verdict: &LimitSetVerdict) -> String {
    let line = match verdict {
        LimitSetVerdict::ApproxRelated => "approx_related".to_string(),
        LimitSetVerdict::UnorderedUnion => "unordered_union".to_string(),
        LimitSetVerdict::Violation { ordered, unordered } => format!(
            "VIOLATION ordered=({},{}) unordered=({},{})",
            ordered.0, ordered.1, unordered.0, unordered.1
        ),
        LimitSetVerdict::Inconclusive => "inconclusive".to_string(),
    };
    format!("[limit_set]\nverdict: {line}\n")
}

/// `t_lo,t_hi` per sub-θ interval of the return-distance scan.
pub fn render_intervals(rts: &RecurrentTimeSet) -> String {
    let mut out = String::from("t_lo,t_hi\n");
    for (lo, hi) in &rts.intervals {
        let _ = writeln!(out, "{lo},{hi}");
    }
    out
}

/// Line-text report of an IP set and its subset-sum verification.
pub fn render_ip(ip: &IPSet) -> String {
    let mut out = String::from("[ip_set]\n");
    let _ = writeln!(out, "z: {}", tuple_vec(&ip.z));
    let _ = writeln!(out, "theta: {}", ip.theta);
    let _ = writeln!(out, "generators: {}", ip.generators.len());
    for (g, m) in ip.generators.iter().zip(&ip.moduli) {
        let _ = writeln!(out, "generator: {g} modulus={m}");
    }
    let _ = writeln!(out, "subset_sums: {}", (1u64 << ip.generators.len()) - 1);
    let _ = writeln!(out, "worst_error: {}", ip.worst_error);
    let _ = writeln!(out, "worst_sum: {}", ip.worst_sum);
    let _ = writeln!(out, "truncated: {}", ip.truncated);
    let _ = writeln!(
        out,
        "result: {}",
        if ip.worst_error < ip.theta { "PASS" } else { "FAIL" }
    );
    out
}

/// `tau,eps,found,n,t,s,error` per recurrent-time query; misses leave the
/// witness columns empty.
pub fn render_a1_queries(queries: &[(f64, f64, A1Outcome)]) -> String {
    let mut out = String::from("tau,eps,found,n,t,s,error\n");
    for (tau, eps, outcome) in queries {
        match outcome {
            A1Outcome::Witness { n, t, s, error } => {
                let _ = writeln!(out, "{tau},{eps},1,{n},{t},{s},{error}");
            }
            A1Outcome::NotFoundWithinHorizon => {
                let _ = writeln!(out, "{tau},{eps},0,,,,");
            }
        }
    }
    out
}

/// `g1..g(n−1),mu,defined` per grid node, row-major.
pub fn render_cell(cell: &CellPatch) -> String {
    let axes = cell.frame.dim() - 1;
    let mut out = format!("{},mu,defined\n", axis_header("g", axes));
    for flat in 0..cell.grid.node_count(axes) {
        let coords =
            cell.node_coords(flat).iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match cell.heights[flat] {
            NodeHeight::Defined { mu } => {
                let _ = writeln!(out, "{coords},{mu},1");
            }
            NodeHeight::Missing => {
                let _ = writeln!(out, "{coords},,0");
            }
        }
    }
    out
}

fn cell_name(target: &CellTarget) -> String {
    match target {
        CellTarget::Equilibrium(p) => format!("equilibrium {}", tuple_vec(p)),
        CellTarget::PlusInfinity => "plus_infinity".to_string(),
        CellTarget::MinusInfinity => "minus_infinity".to_string(),
    }
}

/// Line-text audit of one reconstructed cell.
pub fn render_cell_audit(
    cell: &CellPatch,
    audit: &CellAudit,
    containment: Option<&ContainmentReport>,
) -> String {
    let mut out = String::from("[cell_audit]\n");
    let _ = writeln!(out, "target: {}", cell_name(&cell.target));
    let _ = writeln!(out, "side: {:?}", cell.side);
    let _ = writeln!(out, "tol: {}", cell.tol);
    let _ = writeln!(out, "defined_fraction: {}", cell.defined_fraction());
    let _ = writeln!(out, "unorder_margin: {}", audit.unorder_margin);
    let _ = writeln!(out, "invariance_error: {}", audit.invariance_error);
    let _ = writeln!(out, "invariance_checked: {}", audit.invariance_checked);
    let _ = writeln!(out, "closure_ratio: {}", audit.closure_ratio);
    if let Some(c) = containment {
        let _ = writeln!(out, "containment_max_deviation: {}", c.max_deviation);
        let _ = writeln!(out, "containment_uncovered: {}", c.uncovered);
        let _ = writeln!(out, "containment_checked: {}", c.checked);
    }
    out
}

/// Line-text disjointness comparison of two cells.
pub fn render_disjoint(a: &CellPatch, b: &CellPatch, report: &DisjointReport) -> String {
    let mut out = String::from("[disjointness]\n");
    let _ = writeln!(out, "cell_a: {}", cell_name(&a.target));
    let _ = writeln!(out, "cell_b: {}", cell_name(&b.target));
    let _ = writeln!(out, "shared_nodes: {}", report.shared_nodes);
    let _ = writeln!(out, "separation: {}", report.separation);
    let _ = writeln!(out, "threshold: {}", 2.0 * (a.tol + b.tol));
    let _ = writeln!(out, "result: {}", if report.pass { "PASS" } else { "FAIL" });
    out
}

/// `t,x1..xn` along a sampled trajectory.
pub fn render_trajectory(times: &[f64], states: &[DVector<f64>]) -> String {
    let n = states.first().map(|s| s.len()).unwrap_or(0);
    let mut out = format!("t,{}\n", axis_header("x", n));
    for (t, s) in times.iter().zip(states) {
        let _ = writeln!(out, "{t},{}", csv_vec(s));
    }
    out
}

/// Spanning-count matrix: one row per ε with counts per horizon, the fitted
/// slope, and the degeneracy flag.
pub fn render_entropy_csv(report: &EntropyReport) -> String {
    let heads =
        report.horizons.iter().map(|t| format!("N_T{t}")).collect::<Vec<_>>().join(",");
    let mut out = format!("eps,{heads},slope,degenerate\n");
    for (i, eps) in report.epsilons.iter().enumerate() {
        let counts =
            report.counts[i].iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(
            out,
            "{eps},{counts},{},{}",
            report.slopes[i],
            u8::from(report.degenerate[i])
        );
    }
    out
}

/// One-line verdict against the zero-entropy band.
pub fn render_entropy_verdict(report: &EntropyReport, tol: f64) -> String {
    let call = if report.headline <= tol { "within" } else { "EXCEEDS" };
    format!(
        "headline {} nats/time {call} the zero-entropy band (tol {tol})\n",
        report.headline
    )
}

/// `index,c1..cn,fraction` per support box.
pub fn render_occupation(support: &OccupationSupport) -> String {
    let n = support.cover.dim();
    let mut out = format!("index,{},fraction\n", axis_header("c", n));
    for (&index, &frac) in &support.fractions {
        let c = support.cover.center(index);
        let _ = writeln!(out, "{index},{},{frac}", csv_vec(&c));
    }
    out
}

/// Line-text occupation summary.
pub fn render_occupation_summary(support: &OccupationSupport) -> String {
    let mut out = String::from("[occupation]\n");
    let _ = writeln!(out, "boxes: {}", support.fractions.len());
    let _ = writeln!(out, "total_time: {}", support.total_time);
    let _ = writeln!(out, "outside_fraction: {}", support.outside_fraction);
    out
}

/// Writes rendered text to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::AxisBox;
    use std::collections::BTreeMap;

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_row_slice(&[a, b])
    }

    #[test]
    fn cover_csv_lists_active_boxes_in_index_order() {
        let domain = AxisBox::cube(2, -1.0, 1.0).unwrap();
        let cover = BoxCover::from_active(domain, 1, [0u64, 3u64].into_iter().collect()).unwrap();
        let text = render_cover(&cover);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "depth,index,c1,c2,r1,r2");
        assert!(lines[1].starts_with("1,0,"));
        assert!(lines[2].starts_with("1,3,"));
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn edges_include_exit_marker() {
        let mut edges = BTreeMap::new();
        edges.insert(0u64, vec![0u64, 1u64]);
        edges.insert(1u64, vec![]);
        let mut graph = TransitionGraph::from_edges(edges, 1.0);
        graph.mark_exit(1);
        let text = render_edges(&graph);
        assert_eq!(text, "0 0\n0 1\n1 EXIT\n");
    }

    #[test]
    fn verdict_lines_cover_all_variants() {
        assert_eq!(
            verdict_line(&DichotomyVerdict::Unordered { min_margin: 0.5 }),
            "unordered min_margin=0.5"
        );
        assert!(verdict_line(&DichotomyVerdict::StronglyOrderedEquilibria {
            projections: vec![0.0, 1.0],
        })
        .contains("[0,1]"));
        assert_eq!(verdict_line(&DichotomyVerdict::SingletonTrivial), "singleton_trivial");
        assert!(verdict_line(&DichotomyVerdict::Violation {
            pair: (1, 2),
            detail: "x".into(),
        })
        .starts_with("VIOLATION"));
        assert!(
            verdict_line(&DichotomyVerdict::Inconclusive { pair: (0, 1) }).contains("(0,1)")
        );
    }

    #[test]
    fn a1_rows_leave_missing_fields_empty() {
        let rows = vec![
            (3.0, 0.1, A1Outcome::Witness { n: 2, t: 0.01, s: 6.01, error: 0.002 }),
            (5.0, 0.05, A1Outcome::NotFoundWithinHorizon),
        ];
        let text = render_a1_queries(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "3,0.1,1,2,0.01,6.01,0.002");
        assert_eq!(lines[2], "5,0.05,0,,,,");
    }

    #[test]
    fn trajectory_csv_is_shortest_roundtrip_stable() {
        let times = vec![0.0, 0.1];
        let states = vec![v2(1.0, 2.0), v2(0.5, 0.25)];
        let a = render_trajectory(&times, &states);
        let b = render_trajectory(&times, &states);
        assert_eq!(a, b);
        assert_eq!(a.lines().nth(1).unwrap(), "0,1,2");
        assert_eq!(a.lines().nth(2).unwrap(), "0.1,0.5,0.25");
    }

    #[test]
    fn entropy_csv_has_one_row_per_eps() {
        let report = EntropyReport {
            epsilons: vec![0.05, 0.1],
            horizons: vec![20.0, 40.0, 80.0],
            counts: vec![vec![10, 12, 12], vec![5, 5, 5]],
            slopes: vec![0.003, 0.0],
            degenerate: vec![false, true],
            headline: 0.003,
        };
        let text = render_entropy_csv(&report);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "eps,N_T20,N_T40,N_T80,slope,degenerate");
        assert_eq!(lines[1], "0.05,10,12,12,0.003,0");
        assert_eq!(lines[2], "0.1,5,5,5,0,1");
        assert!(render_entropy_verdict(&report, 0.05).contains("within"));
    }
}
