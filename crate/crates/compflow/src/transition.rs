//! Sampled time-`T` transition graphs over box covers and the
//! subdivision/pruning loop that outer-approximates the Birkhoff center.
//!
//! Each active box is mapped through `Φ_T` at its corners, center, and a
//! seeded batch of interior samples; every image point is inflated by a
//! padding box and an edge is drawn to each active box the inflated image
//! intersects. Images that leave the domain (or escape the integrator)
//! feed a distinguished EXIT node. Chain-recurrent boxes are the union of
//! strongly connected components with at least two nodes or a self-loop;
//! everything else is pruned before the next subdivision.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;

use crate::cover::BoxCover;
use crate::error::{Error, Result};
use crate::geom::AxisBox;
use crate::integrate::{flow_map, FlowOutcome, IntegratorConfig};
use crate::rng::{derive_seed, rng_for};
use crate::scenario::Scenario;

/// Image-inflation rule applied before box intersection tests.
#[derive(Debug, Clone, PartialEq)]
pub enum Padding {
    /// No inflation; fastest, undercovers images.
    None,
    /// Inflate by the given fraction of the per-axis box radius.
    Frac(f64),
    /// Inflate by a per-box Lipschitz estimate — the largest sampled
    /// Jacobian ∞-norm over the box corners and center — times the box
    /// radius.
    Lipschitz,
}

impl Padding {
    /// Per-axis inflation amounts for one box of the cover.
    fn vector(&self, scenario: &Scenario, cover: &BoxCover, index: u64) -> Result<DVector<f64>> {
        let radii = cover.radii();
        match self {
            Padding::None => Ok(DVector::zeros(cover.dim())),
            Padding::Frac(f) => Ok(radii * *f),
            Padding::Lipschitz => {
                let boxed = cover.box_at(index);
                let mut lip: f64 = 0.0;
                let mut probe = |x: &DVector<f64>| -> Result<()> {
                    let j = scenario.jacobian(x)?;
                    let row_sum = (0..j.nrows())
                        .map(|r| j.row(r).iter().map(|v| v.abs()).sum::<f64>())
                        .fold(0.0, f64::max);
                    lip = lip.max(row_sum);
                    Ok(())
                };
                probe(&boxed.center())?;
                for corner in boxed.corners() {
                    probe(&corner)?;
                }
                Ok(radii * lip)
            }
        }
    }
}

/// Directed transition graph over the active boxes of a cover.
///
/// Reproducible from `(cover, scenario, map_time, samples_per_box, seed)`:
/// sampling is seeded per box index and every container iterates in sorted
/// order.
#[derive(Debug, Clone)]
pub struct TransitionGraph {
    edges: BTreeMap<u64, Vec<u64>>,
    exit_from: BTreeSet<u64>,
    map_time: f64,
    samples_per_box: usize,
}

impl TransitionGraph {
    /// Builds a graph directly from an adjacency map — synthetic inputs for
    /// tests and diagnostics; [`box_map`] is the production constructor.
    pub fn from_edges(edges: BTreeMap<u64, Vec<u64>>, map_time: f64) -> Self {
        let mut edges = edges;
        let targets: Vec<u64> = edges.values().flatten().copied().collect();
        for t in targets {
            edges.entry(t).or_default();
        }
        for list in edges.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        Self { edges, exit_from: BTreeSet::new(), map_time, samples_per_box: 0 }
    }

    /// Adjacency: box index → ascending edge targets.
    pub fn edges(&self) -> &BTreeMap<u64, Vec<u64>> {
        &self.edges
    }

    /// Boxes with at least one image leaving the covered region.
    pub fn exit_from(&self) -> &BTreeSet<u64> {
        &self.exit_from
    }

    /// Marks `index` as able to leave the covered region — synthetic-graph
    /// companion to [`Self::from_edges`].
    pub fn mark_exit(&mut self, index: u64) {
        self.exit_from.insert(index);
    }

    pub fn map_time(&self) -> f64 {
        self.map_time
    }

    pub fn samples_per_box(&self) -> usize {
        self.samples_per_box
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    pub fn has_self_loop(&self, index: u64) -> bool {
        self.edges.get(&index).is_some_and(|list| list.binary_search(&index).is_ok())
    }
}

/// Builds the sampled time-`map_time` transition graph of a cover.
///
/// Per active box, the mapped point set is its corners, its center, and
/// `samples_per_box` uniform samples drawn from a stream seeded by
/// `(seed, box index)`. Edges go to every **active** box the padded image
/// intersects; an image that escapes, leaves the domain, or lands entirely
/// in pruned territory marks the source box in `exit_from`.
pub fn box_map(
    cover: &BoxCover,
    scenario: &Scenario,
    map_time: f64,
    samples_per_box: usize,
    padding: &Padding,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<TransitionGraph> {
    if !(map_time > 0.0) {
        return Err(Error::InvalidArgument(format!("map time must be positive, got {map_time}")));
    }
    let domain = scenario.valid_domain();
    for i in 0..cover.dim() {
        if cover.domain().lo()[i] < domain.lo()[i] - 1e-12
            || cover.domain().hi()[i] > domain.hi()[i] + 1e-12
        {
            return Err(Error::InvalidArgument(
                "cover domain exceeds the scenario's validity domain".into(),
            ));
        }
    }

    let mut edges: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    let mut exit_from = BTreeSet::new();
    let dim = cover.dim();
    for &index in cover.active() {
        let pad = padding.vector(scenario, cover, index)?;
        let boxed = cover.box_at(index);
        let mut points = boxed.corners();
        points.push(boxed.center());
        let mut rng = rng_for(seed, index);
        for _ in 0..samples_per_box {
            points.push(boxed.sample_uniform(&mut rng));
        }

        let mut targets: Vec<u64> = Vec::new();
        let mut exits = false;
        for x in &points {
            let image = match flow_map(scenario, x, map_time, cfg)? {
                FlowOutcome::Completed(y) => y,
                FlowOutcome::Escaped { .. } | FlowOutcome::BlowupSuspected { .. } => {
                    exits = true;
                    continue;
                }
            };
            if !cover.domain().contains(&image) {
                exits = true;
            }
            let padded = AxisBox::new(&image - &pad, &image + &pad)?;
            let mut hit_active = false;
            if let Some(ranges) = cover.cell_range(&padded) {
                let mut cells = vec![0u64; dim];
                visit_ranges(&ranges, &mut cells, 0, &mut |cells| {
                    let target = cover.encode(cells);
                    if cover.active().contains(&target) {
                        targets.push(target);
                        hit_active = true;
                    }
                });
            }
            if !hit_active {
                exits = true;
            }
        }
        targets.sort_unstable();
        targets.dedup();
        edges.insert(index, targets);
        if exits {
            exit_from.insert(index);
        }
    }
    Ok(TransitionGraph { edges, exit_from, map_time, samples_per_box })
}

/// Recursively visits the product of inclusive per-axis cell ranges.
fn visit_ranges(ranges: &[(u64, u64)], cells: &mut [u64], axis: usize, f: &mut impl FnMut(&[u64])) {
    if axis == ranges.len() {
        f(cells);
        return;
    }
    for c in ranges[axis].0..=ranges[axis].1 {
        cells[axis] = c;
        visit_ranges(ranges, cells, axis + 1, f);
    }
}

/// Union of strongly connected components with ≥ 2 nodes or a self-loop.
///
/// The EXIT node never participates (it is not part of the adjacency map).
/// Output is an ordered set, so downstream passes are deterministic.
pub fn chain_recurrent(graph: &TransitionGraph) -> BTreeSet<u64> {
    let nodes: Vec<u64> = graph.edges.keys().copied().collect();
    let pos_of = |id: u64| nodes.binary_search(&id).expect("edge endpoints are nodes") as u32;
    let n = nodes.len();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut self_loop = vec![false; n];
    for (i, id) in nodes.iter().enumerate() {
        for &t in &graph.edges[id] {
            let p = pos_of(t);
            if p as usize == i {
                self_loop[i] = true;
            }
            adj[i].push(p);
        }
    }

    // Iterative Tarjan: an explicit work stack replaces recursion so deep
    // covers cannot overflow the call stack.
    const UNSET: u32 = u32::MAX;
    let mut order = vec![UNSET; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut next_order = 0u32;
    let mut survivors = BTreeSet::new();
    let mut work: Vec<(u32, usize)> = Vec::new();

    for root in 0..n as u32 {
        if order[root as usize] != UNSET {
            continue;
        }
        work.push((root, 0));
        while let Some(&mut (v, ref mut edge)) = work.last_mut() {
            let vi = v as usize;
            if *edge == 0 {
                order[vi] = next_order;
                low[vi] = next_order;
                next_order += 1;
                stack.push(v);
                on_stack[vi] = true;
            }
            if let Some(&w) = adj[vi].get(*edge) {
                *edge += 1;
                let wi = w as usize;
                if order[wi] == UNSET {
                    work.push((w, 0));
                } else if on_stack[wi] {
                    low[vi] = low[vi].min(order[wi]);
                }
                continue;
            }
            // All edges of `v` processed: close the frame.
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                let pi = parent as usize;
                low[pi] = low[pi].min(low[vi]);
            }
            if low[vi] == order[vi] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("Tarjan stack holds the component");
                    on_stack[w as usize] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                if component.len() >= 2 || self_loop[vi] {
                    survivors.extend(component.iter().map(|&w| nodes[w as usize]));
                }
            }
        }
    }
    survivors
}

/// One stage of [`subdivide_iterate`].
#[derive(Debug, Clone)]
pub struct StageReport {
    pub depth: u32,
    /// Active boxes before pruning at this stage.
    pub boxes_before: usize,
    /// Chain-recurrent survivors after pruning.
    pub survivors: BTreeSet<u64>,
}

/// Result of the subdivision/pruning loop.
#[derive(Debug, Clone)]
pub struct SubdivisionOutcome {
    /// Final cover (active set = last stage's survivors).
    pub cover: BoxCover,
    pub stages: Vec<StageReport>,
    /// Transition graph of the final stage, built on the pre-pruning active
    /// set of the deepest cover; absent when a stage emptied out early.
    pub final_graph: Option<TransitionGraph>,
    /// True when some stage pruned every box (reported, not fatal).
    pub emptied: bool,
}

/// Shared knobs for [`subdivide_iterate`].
#[derive(Debug, Clone)]
pub struct SubdivisionParams {
    pub map_time: f64,
    pub samples_per_box: usize,
    pub padding: Padding,
    pub seed: u64,
}

impl Default for SubdivisionParams {
    fn default() -> Self {
        Self { map_time: 1.0, samples_per_box: 3, padding: Padding::Lipschitz, seed: 0 }
    }
}

/// Alternates subdivision and chain-recurrent pruning over an increasing
/// depth schedule, starting from the full cover at the first depth.
pub fn subdivide_iterate(
    scenario: &Scenario,
    domain: AxisBox,
    depth_schedule: &[u32],
    params: &SubdivisionParams,
    cfg: &IntegratorConfig,
) -> Result<SubdivisionOutcome> {
    if depth_schedule.is_empty() || depth_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "depth schedule must be nonempty and strictly increasing".into(),
        ));
    }
    let mut cover = BoxCover::full(domain, depth_schedule[0])?;
    let mut stages = Vec::with_capacity(depth_schedule.len());
    let mut final_graph = None;
    let mut emptied = false;
    for (stage, &depth) in depth_schedule.iter().enumerate() {
        while cover.depth() < depth {
            cover = cover.subdivide()?;
        }
        let graph = box_map(
            &cover,
            scenario,
            params.map_time,
            params.samples_per_box,
            &params.padding,
            derive_seed(params.seed, stage as u64),
            cfg,
        )?;
        let survivors = chain_recurrent(&graph);
        let boxes_before = cover.len();
        cover.retain(&survivors);
        stages.push(StageReport { depth, boxes_before, survivors: cover.active().clone() });
        if cover.is_empty() {
            emptied = true;
            break;
        }
        if stage + 1 == depth_schedule.len() {
            final_graph = Some(graph);
        }
    }
    Ok(SubdivisionOutcome { cover, stages, final_graph, emptied })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::by_name;
    use nalgebra::DMatrix;

    // Map time 2: per-map contraction on the slowest mode must beat the 2×
    // per-depth box scaling, or boxes straddling the slow eigendirection
    // keep genuine self-intersections at every depth.
    fn frac_params(seed: u64) -> SubdivisionParams {
        SubdivisionParams {
            map_time: 2.0,
            samples_per_box: 3,
            padding: Padding::Frac(0.25),
            seed,
        }
    }

    #[test]
    fn stable_linear_edges_point_inward() {
        let scenario = by_name("linear2").unwrap();
        let cover = BoxCover::full(scenario.valid_domain().clone(), 4).unwrap();
        let cfg = IntegratorConfig::default();
        let graph =
            box_map(&cover, &scenario, 1.0, 2, &Padding::Frac(0.25), 7, &cfg).unwrap();
        for (&src, targets) in graph.edges() {
            let from = cover.center(src).norm();
            if from < 0.5 {
                continue;
            }
            for &dst in targets {
                assert!(
                    cover.center(dst).norm() < from,
                    "edge {src}->{dst} moved away from the origin"
                );
            }
        }
        // The box just northeast of the origin maps into the origin corner
        // shared by its padded image: self-loop.
        let near_origin = cover.index_of(&DVector::from_vec(vec![0.0625, 0.0625])).unwrap();
        assert!(graph.has_self_loop(near_origin));
    }

    #[test]
    fn bistable_equilibrium_box_has_self_loop() {
        let scenario = by_name("bistable2").unwrap();
        let cover = BoxCover::full(scenario.valid_domain().clone(), 4).unwrap();
        let cfg = IntegratorConfig::default();
        let graph =
            box_map(&cover, &scenario, 1.0, 2, &Padding::Frac(0.25), 11, &cfg).unwrap();
        let a = 0.9f64.sqrt();
        let eq = cover.index_of(&DVector::from_vec(vec![a, a])).unwrap();
        assert!(graph.has_self_loop(eq));
    }

    #[test]
    fn fully_escaping_box_keeps_only_exit() {
        // Expanding competitive field: everything near the corner leaves the
        // domain within one time unit.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
        let domain = AxisBox::from_slices(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let scenario = crate::scenario::Scenario::linear("unstable", a, domain.clone()).unwrap();
        let cover = BoxCover::full(domain, 3).unwrap();
        let cfg = IntegratorConfig::default();
        let graph = box_map(&cover, &scenario, 1.0, 2, &Padding::Frac(0.25), 3, &cfg).unwrap();
        let corner = cover.encode(&[0, 0]);
        assert!(graph.edges()[&corner].is_empty());
        assert!(graph.exit_from().contains(&corner));
    }

    #[test]
    fn chain_recurrent_on_synthetic_graphs() {
        // Directed path: no cycles, nothing survives.
        let path = TransitionGraph::from_edges(
            [(1u64, vec![2]), (2, vec![3])].into_iter().collect(),
            1.0,
        );
        assert!(chain_recurrent(&path).is_empty());

        // 2-cycle plus a dangling self-loop and a transient node.
        let mixed = TransitionGraph::from_edges(
            [(1u64, vec![2]), (2, vec![1]), (3, vec![3]), (4, vec![1, 3])]
                .into_iter()
                .collect(),
            1.0,
        );
        let survivors = chain_recurrent(&mixed);
        assert_eq!(survivors, [1u64, 2, 3].into());
    }

    #[test]
    fn linear_survivors_collapse_onto_origin() {
        let scenario = by_name("linear2").unwrap();
        let cfg = IntegratorConfig::default();
        let out = subdivide_iterate(
            &scenario,
            scenario.valid_domain().clone(),
            &[2, 4, 6],
            &frac_params(5),
            &cfg,
        )
        .unwrap();
        assert!(!out.emptied);
        let radius = out.cover.radii().amax();
        assert!(out.cover.union_diameter_sup().unwrap() <= 4.0 * radius + 1e-12);
        let hull = out.cover.active_hull().unwrap();
        assert!(hull.contains(&DVector::zeros(2)));

        // Refinement monotonicity: each stage's survivors, coarsened back to
        // the previous stage's depth, land inside that stage's survivors.
        for pair in out.stages.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            let cover =
                BoxCover::from_active(scenario.valid_domain().clone(), next.depth, next.survivors.clone())
                    .unwrap();
            for &index in &next.survivors {
                let mut idx = index;
                let mut c = cover.clone();
                while c.depth() > prev.depth {
                    idx = c.coarsen_index(idx);
                    c = BoxCover::from_active(
                        scenario.valid_domain().clone(),
                        c.depth() - 1,
                        [idx].into(),
                    )
                    .unwrap();
                }
                assert!(prev.survivors.contains(&idx));
            }
        }
    }

    #[test]
    fn bistable_final_cover_has_nine_clusters() {
        let scenario = by_name("bistable2").unwrap();
        let cfg = IntegratorConfig::default();
        let out = subdivide_iterate(
            &scenario,
            scenario.valid_domain().clone(),
            &[3, 4, 5, 6],
            &frac_params(9),
            &cfg,
        )
        .unwrap();
        assert!(!out.emptied);
        let components = out.cover.spatial_components();
        assert_eq!(components.len(), 9, "one cluster per equilibrium");
    }

    #[test]
    fn may_leonard_survivors_cluster_at_interior_sink() {
        let scenario = by_name("ml_sym").unwrap();
        let cfg = IntegratorConfig::default();
        // The sink's slowest eigenvalue is −1/4 and the domain truncates the
        // planar equilibria whose transversal growth rate is 1/3; map time 6
        // makes both beat the box geometry, so only the sink cluster stays.
        let params = SubdivisionParams { map_time: 6.0, ..frac_params(13) };
        let out = subdivide_iterate(
            &scenario,
            scenario.valid_domain().clone(),
            &[2, 3, 4],
            &params,
            &cfg,
        )
        .unwrap();
        assert!(!out.emptied);
        let sink = DVector::from_vec(vec![0.5, 0.5, 0.5]);
        assert!(out.cover.index_of(&sink).map_or(false, |i| out.cover.active().contains(&i)));
        for &index in out.cover.active() {
            assert!(
                (out.cover.center(index) - &sink).amax() < 0.2,
                "survivor strayed from the interior sink: center {:?}",
                out.cover.center(index)
            );
        }
    }
}
