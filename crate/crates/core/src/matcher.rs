//! Velocity-field reconstruction by greedy travel-time relaxation.
//!
//! For every consecutive GPS pair a subnetwork is extracted, candidate nodes
//! matched, and every connecting fastest path that undercuts the pair's time
//! gap is relaxed (slowed down) until none does. Segment speeds only ever
//! decrease, so traces processed later refine rather than undo earlier work.

use crate::allocation::{
    allocate, AllocSegment, AllocationContext, AllocationError, DEFAULT_BETA,
};
use crate::network::{
    greenshield_density, NetworkError, NodeId, Path, Projection, RoadNetwork, SegmentId,
};
use crate::traces::GpsTrace;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("no candidate node within {c_dis} m of ({x:.1}, {y:.1})")]
    NoCandidates { x: f64, y: f64, c_dis: f64 },
}

pub const DEFAULT_C_DIS: f64 = 50.0;
pub const DEFAULT_C_NUM: usize = 4;

#[derive(Debug, Clone)]
pub struct CandidateSet {
    /// Projected query point, meters.
    pub point: (f64, f64),
    /// Candidate node ids ordered by (distance, id).
    pub candidates: Vec<NodeId>,
    pub c_dis: f64,
    pub c_num: usize,
}

/// Nearest nodes within `c_dis` of `p`, at most `c_num`, sorted by distance
/// then node id.
pub fn candidate_nodes(
    net: &RoadNetwork,
    p: (f64, f64),
    c_dis: f64,
    c_num: usize,
) -> Result<CandidateSet, MatchError> {
    debug_assert!(c_dis > 0.0 && c_num >= 1);
    let mut scored: Vec<(f64, NodeId)> = net
        .nodes()
        .iter()
        .filter_map(|n| {
            let d = ((n.x - p.0).powi(2) + (n.y - p.1).powi(2)).sqrt();
            (d <= c_dis).then_some((d, n.id))
        })
        .collect();
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    scored.truncate(c_num);
    if scored.is_empty() {
        return Err(MatchError::NoCandidates {
            x: p.0,
            y: p.1,
            c_dis,
        });
    }
    Ok(CandidateSet {
        point: p,
        candidates: scored.into_iter().map(|(_, id)| id).collect(),
        c_dis,
        c_num,
    })
}

/// Outlier paths are excluded from relaxation: a gap shorter than the path's
/// free-flow time or longer than its jam-density time is inconsistent.
pub fn is_outlier(net: &RoadNetwork, path: &Path, gap: f64) -> Result<bool, MatchError> {
    let mut free_flow = 0.0;
    let mut jam = 0.0;
    for &id in &path.segments {
        let s = net.segment(id)?;
        free_flow += s.t_min();
        jam += s.t_jam();
    }
    Ok(gap < free_flow || gap > jam)
}

/// `T_c,max` / `T_a` of the preceding pair's allocated path.
#[derive(Debug, Clone, Copy, Default)]
pub struct PrevPathStats {
    pub tc_max: f64,
    pub ta: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RelaxOutcome {
    pub paths_relaxed: usize,
    pub outliers_rejected: usize,
    pub budget_clamps: usize,
    /// Stats of the last allocated path, if any (feeds the next pair).
    pub last_path_stats: Option<PrevPathStats>,
}

/// Algorithm "RelaxNetwork": for every candidate pair, repeatedly extract the
/// fastest connecting path and relax it while it undercuts the gap.
pub fn relax_network(
    sub: &mut RoadNetwork,
    gap: f64,
    c1: &CandidateSet,
    c2: &CandidateSet,
    prev: PrevPathStats,
    beta: f64,
) -> Result<RelaxOutcome, MatchError> {
    debug_assert!(gap > 0.0);
    let mut outcome = RelaxOutcome::default();
    for &n1 in &c1.candidates {
        for &n2 in &c2.candidates {
            if n1 == n2 {
                continue;
            }
            let (a, b) = (sub.node(n1)?, sub.node(n2)?);
            if (a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12 {
                continue; // coincident nodes: no valid path
            }
            let Some(mut path) = sub.fastest_path(n1, n2)? else {
                continue;
            };
            if path.is_empty() {
                continue;
            }
            if is_outlier(sub, &path, gap)? {
                outcome.outliers_rejected += 1;
                continue;
            }
            loop {
                if path.travel_time >= gap - 1e-9 {
                    break; // not an overestimated path
                }
                if path.segments.is_empty() {
                    break;
                }
                let (changed, clamped, stats) =
                    relaxation_apply(sub, &path.segments, gap, prev, beta)?;
                outcome.paths_relaxed += 1;
                if clamped {
                    outcome.budget_clamps += 1;
                }
                if let Some(s) = stats {
                    outcome.last_path_stats = Some(s);
                }
                if !changed {
                    break; // nothing moved; avoid spinning
                }
                match sub.fastest_path(n1, n2)? {
                    Some(p) if !p.is_empty() => path = p,
                    _ => break,
                }
            }
        }
    }
    Ok(outcome)
}

/// Algorithm "Relaxation": recursively exclude segments already at or below
/// the path's average speed (their current times come off the budget), then
/// allocate the rest. Returns (any speed changed, budget clamp fired, stats
/// of the allocated path).
pub fn relaxation_apply(
    sub: &mut RoadNetwork,
    segments: &[SegmentId],
    budget: f64,
    prev: PrevPathStats,
    beta: f64,
) -> Result<(bool, bool, Option<PrevPathStats>), MatchError> {
    debug_assert!(budget > 0.0);
    let mut kept: Vec<SegmentId> = segments.to_vec();
    let mut t = budget;
    loop {
        let total_len: f64 = kept
            .iter()
            .map(|&id| sub.segment(id).map(|s| s.len))
            .sum::<Result<f64, _>>()?;
        if kept.is_empty() || t <= 0.0 {
            return Ok((false, false, None));
        }
        let avg_speed = total_len / t;
        let mut excluded_time = 0.0;
        let mut next: Vec<SegmentId> = Vec::with_capacity(kept.len());
        for &id in &kept {
            let s = sub.segment(id)?;
            if s.v_est <= avg_speed {
                excluded_time += s.t_est();
            } else {
                next.push(id);
            }
        }
        if next.len() == kept.len() {
            break; // nothing excluded: allocate over the remainder
        }
        kept = next;
        t -= excluded_time;
    }

    // Budget underflow (possible only with inconsistent gaps): clamp the
    // remainder to free flow, which the monotone update turns into a no-op.
    let t_f: f64 = kept
        .iter()
        .map(|&id| sub.segment(id).map(|s| s.t_min()))
        .sum::<Result<f64, _>>()?;
    if t < t_f {
        return Ok((false, true, None));
    }

    let alloc_segments: Vec<AllocSegment> = kept
        .iter()
        .map(|&id| {
            let s = sub.segment(id)?;
            Ok(AllocSegment {
                len: s.len,
                t_min: s.t_min(),
                v_est: s.v_est,
                k: greenshield_density(s),
                k_max: s.k_max,
            })
        })
        .collect::<Result<_, MatchError>>()?;
    let ctx = AllocationContext {
        segments: alloc_segments,
        t_a: t,
        prev_tc_max: prev.tc_max,
        prev_ta: prev.ta,
        beta,
    };
    let result = allocate(&ctx)?;

    let mut changed = false;
    for (i, &id) in kept.iter().enumerate() {
        let s = sub.segment(id)?;
        let t_new = result.segment_time(i).max(s.t_min());
        let v_new = (s.len / t_new).min(s.v_est); // speeds never increase
        if v_new < s.v_est {
            changed = true;
            sub.set_speed(id, v_new)?;
        }
    }
    let stats = PrevPathStats {
        tc_max: (t - t_f).max(0.0),
        ta: t,
    };
    Ok((changed, false, Some(stats)))
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RelaxationReport {
    pub pairs_processed: usize,
    pub paths_relaxed: usize,
    pub outliers_rejected: usize,
    pub pairs_skipped_no_candidates: usize,
    pub pairs_skipped_empty_subgraph: usize,
    pub budget_clamps: usize,
}

/// Per-pair audit record (candidate sets and whether anything was relaxed),
/// kept only when auditing is enabled.
#[derive(Debug, Clone)]
pub struct PairAudit {
    pub trace_id: u64,
    pub pair_index: usize,
    pub gap: f64,
    /// Projected endpoints, meters.
    pub p1: (f64, f64),
    pub p2: (f64, f64),
    pub candidates1: Vec<NodeId>,
    pub candidates2: Vec<NodeId>,
    pub relaxed: bool,
}

/// Full audit of a reconstruction: per-segment speed trajectories (appended on
/// change) plus per-pair candidate records.
#[derive(Debug, Clone, Default)]
pub struct ReconstructAudit {
    pub speed_trajectories: BTreeMap<SegmentId, Vec<f64>>,
    pub pairs: Vec<PairAudit>,
}

#[derive(Debug, Clone, Copy)]
pub struct ReconstructOptions {
    pub c_dis: f64,
    pub c_num: usize,
    pub beta: f64,
    pub audit: bool,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            c_dis: DEFAULT_C_DIS,
            c_num: DEFAULT_C_NUM,
            beta: DEFAULT_BETA,
            audit: false,
        }
    }
}

/// Velocity-field reconstruction over a set of traces (one time interval).
///
/// Starts from free flow, processes every consecutive pair of every trace, and
/// returns the relaxed network plus a report (and audit when requested).
pub fn reconstruct_velocity_field(
    net: &RoadNetwork,
    traces: &[GpsTrace],
    projection: &Projection,
    opts: &ReconstructOptions,
) -> Result<(RoadNetwork, RelaxationReport, Option<ReconstructAudit>), MatchError> {
    let mut est = net.clone();
    est.reset_speeds();
    let mut report = RelaxationReport::default();
    let mut audit = opts.audit.then(|| {
        let mut a = ReconstructAudit::default();
        for s in est.segments() {
            a.speed_trajectories.insert(s.id, vec![s.v_est]);
        }
        a
    });

    for trace in traces {
        let mut prev = PrevPathStats::default();
        for (pair_index, (p1, p2)) in trace.pair_stream().into_iter().enumerate() {
            report.pairs_processed += 1;
            let pa = projection.to_meters(p1.lon, p1.lat);
            let pb = projection.to_meters(p2.lon, p2.lat);
            let gap = p2.t - p1.t;
            if gap <= 0.0 {
                continue;
            }
            let dist = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt();
            let radius = dist / 2.0 + opts.c_dis;
            let mut sub = match est.extract_subgraph(pa, pb, radius) {
                Ok(sub) => sub,
                Err(NetworkError::EmptySubgraph { .. }) => {
                    report.pairs_skipped_empty_subgraph += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let (c1, c2) = match (
                candidate_nodes(&sub, pa, opts.c_dis, opts.c_num),
                candidate_nodes(&sub, pb, opts.c_dis, opts.c_num),
            ) {
                (Ok(c1), Ok(c2)) => (c1, c2),
                _ => {
                    report.pairs_skipped_no_candidates += 1;
                    continue;
                }
            };
            let outcome = relax_network(&mut sub, gap, &c1, &c2, prev, opts.beta)?;
            est.merge_speeds(&sub);
            report.paths_relaxed += outcome.paths_relaxed;
            report.outliers_rejected += outcome.outliers_rejected;
            report.budget_clamps += outcome.budget_clamps;
            if let Some(stats) = outcome.last_path_stats {
                prev = stats;
            }
            if let Some(a) = audit.as_mut() {
                for s in est.segments() {
                    let traj = a.speed_trajectories.get_mut(&s.id).expect("initialized");
                    if (traj.last().copied().unwrap_or(f64::INFINITY) - s.v_est).abs() > 1e-15 {
                        traj.push(s.v_est);
                    }
                }
                a.pairs.push(PairAudit {
                    trace_id: trace.id,
                    pair_index,
                    gap,
                    p1: pa,
                    p2: pb,
                    candidates1: c1.candidates.clone(),
                    candidates2: c2.candidates.clone(),
                    relaxed: outcome.paths_relaxed > 0,
                });
            }
        }
    }
    Ok((est, report, audit))
}

/// Shortest-distance baseline: each pair is matched to the nearest candidate
/// nodes and the shortest-distance path between them; the gap is allocated in
/// proportion to segment length and covered segments average over pairs.
pub struct BaselineResult {
    pub times: BTreeMap<SegmentId, f64>,
    /// Matched path per (trace, pair).
    pub matched: Vec<(u64, usize, Vec<SegmentId>)>,
}

pub fn shortest_distance_baseline(
    net: &RoadNetwork,
    traces: &[GpsTrace],
    projection: &Projection,
    c_dis: f64,
) -> Result<BaselineResult, MatchError> {
    let len_weights: Vec<f64> = net.segments().iter().map(|s| s.len).collect();
    let mut sums: BTreeMap<SegmentId, (f64, usize)> = BTreeMap::new();
    let mut matched = Vec::new();
    for trace in traces {
        for (pair_index, (p1, p2)) in trace.pair_stream().into_iter().enumerate() {
            let a = projection.to_meters(p1.lon, p1.lat);
            let b = projection.to_meters(p2.lon, p2.lat);
            let gap = p2.t - p1.t;
            let (Ok(c1), Ok(c2)) = (
                candidate_nodes(net, a, c_dis, 1),
                candidate_nodes(net, b, c_dis, 1),
            ) else {
                continue;
            };
            let (n1, n2) = (c1.candidates[0], c2.candidates[0]);
            if n1 == n2 {
                continue;
            }
            let tree = net.shortest_tree_with(n1, &len_weights)?;
            let Some(di) = net.node_index(n2) else {
                continue;
            };
            let Some(path) = tree.path_to(net, di) else {
                continue;
            };
            let ids: Vec<SegmentId> = path.iter().map(|&i| net.segments()[i].id).collect();
            let total_len: f64 = path.iter().map(|&i| net.segments()[i].len).sum();
            for &i in &path {
                let s = &net.segments()[i];
                let e = sums.entry(s.id).or_insert((0.0, 0));
                e.0 += gap * s.len / total_len;
                e.1 += 1;
            }
            matched.push((trace.id, pair_index, ids));
        }
    }
    let mut times = BTreeMap::new();
    for s in net.segments() {
        let t = match sums.get(&s.id) {
            Some(&(sum, n)) => (sum / n as f64).clamp(s.t_min(), s.t_jam()),
            None => s.t_min(),
        };
        times.insert(s.id, t);
    }
    Ok(BaselineResult { times, matched })
}

/// Per-segment travel times of a (relaxed) network.
pub fn network_times(net: &RoadNetwork) -> BTreeMap<SegmentId, f64> {
    net.segments().iter().map(|s| (s.id, s.t_est())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{grid_network, Node, RoadSegment};
    use crate::traces::{synthesize_traces, GpsPoint};

    fn flat() -> Projection {
        Projection {
            lon0: 0.0,
            lat0: 0.0,
        }
    }

    fn seg(id: u32, from: u32, to: u32, len: f64, v_max: f64) -> RoadSegment {
        RoadSegment {
            id: SegmentId(id),
            from: NodeId(from),
            to: NodeId(to),
            len,
            v_max,
            k_max: 0.15,
            v_est: v_max,
            lanes: 1,
        }
    }

    fn node(id: u32, x: f64, y: f64) -> Node {
        Node {
            id: NodeId(id),
            x,
            y,
        }
    }

    #[test]
    fn candidates_on_node_and_ties() {
        let net = grid_network(3, 150.0, 15.0, 0.15);
        let c = candidate_nodes(&net, (150.0, 150.0), 50.0, 4).unwrap();
        assert_eq!(c.candidates[0], NodeId(4)); // exactly on the center node
        let c = candidate_nodes(&net, (150.0, 150.0), 500.0, 1).unwrap();
        assert_eq!(c.candidates.len(), 1);
        // Equidistant to nodes 0 and 1 -> tie broken by id.
        let c = candidate_nodes(&net, (75.0, 0.0), 100.0, 2).unwrap();
        assert_eq!(c.candidates, vec![NodeId(0), NodeId(1)]);
        assert!(candidate_nodes(&net, (1e6, 1e6), 50.0, 4).is_err());
    }

    #[test]
    fn outlier_boundaries() {
        let net = RoadNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 150.0, 0.0)],
            vec![seg(0, 0, 1, 150.0, 15.0)],
        )
        .unwrap();
        let path = net.fastest_path(NodeId(0), NodeId(1)).unwrap().unwrap();
        let ff = 10.0;
        let jam = 300.0;
        assert!(!is_outlier(&net, &path, ff).unwrap()); // boundary is valid
        assert!(is_outlier(&net, &path, 0.5 * ff).unwrap());
        assert!(!is_outlier(&net, &path, jam).unwrap());
        assert!(is_outlier(&net, &path, 2.0 * jam).unwrap());
    }

    #[test]
    fn relax_single_edge_halves_speed() {
        let mut net = RoadNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 150.0, 0.0)],
            vec![seg(0, 0, 1, 150.0, 30.0)], // t_min = 5 s
        )
        .unwrap();
        let c1 = candidate_nodes(&net, (0.0, 0.0), 10.0, 1).unwrap();
        let c2 = candidate_nodes(&net, (150.0, 0.0), 10.0, 1).unwrap();
        let out = relax_network(&mut net, 10.0, &c1, &c2, PrevPathStats::default(), 0.5).unwrap();
        assert_eq!(out.paths_relaxed, 1);
        let s = net.segment(SegmentId(0)).unwrap();
        assert!((s.t_est() - 10.0).abs() < 1e-9);
        assert!((s.v_est - 15.0).abs() < 1e-9);
    }

    #[test]
    fn relax_noop_when_gap_already_met() {
        let mut net = RoadNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 150.0, 0.0)],
            vec![seg(0, 0, 1, 150.0, 15.0)], // t_min = 10 s
        )
        .unwrap();
        let c1 = candidate_nodes(&net, (0.0, 0.0), 10.0, 1).unwrap();
        let c2 = candidate_nodes(&net, (150.0, 0.0), 10.0, 1).unwrap();
        let out = relax_network(&mut net, 10.0, &c1, &c2, PrevPathStats::default(), 0.5).unwrap();
        assert_eq!(out.paths_relaxed, 0);
        assert!((net.segment(SegmentId(0)).unwrap().v_est - 15.0).abs() < 1e-12);
    }

    /// Hand-simulation of the two-trace figure: a diamond where trace S1
    /// relaxes both branches to its gap, then trace S2 pushes the shared
    /// segment strictly beyond its post-S1 time.
    #[test]
    fn two_trace_shared_segment_scenario() {
        let mut net = RoadNetwork::new(
            vec![
                node(0, 0.0, 0.0),
                node(1, 150.0, 150.0),
                node(2, 150.0, -150.0),
                node(3, 300.0, 0.0),
            ],
            vec![
                seg(0, 0, 1, 150.0, 15.0), // T1 = {0, 1}
                seg(1, 1, 3, 150.0, 15.0), // shared segment "e"
                seg(2, 0, 2, 150.0, 15.0), // T3 = {2, 3}
                seg(3, 2, 3, 150.0, 15.0),
            ],
        )
        .unwrap();
        // S1: 0 -> 3, gap 30 s (free flow is 20 s on either branch).
        let c1 = candidate_nodes(&net, (0.0, 0.0), 10.0, 1).unwrap();
        let c2 = candidate_nodes(&net, (300.0, 0.0), 10.0, 1).unwrap();
        relax_network(&mut net, 30.0, &c1, &c2, PrevPathStats::default(), 0.5).unwrap();
        // Both branches now take >= 30 s; the shared segment got 15 s by
        // symmetry of identical segments.
        let post_s1 = net.segment(SegmentId(1)).unwrap().t_est();
        assert!((post_s1 - 15.0).abs() < 1e-9);
        for (a, b) in [(0u32, 1u32), (2, 3)] {
            let t = net.segment(SegmentId(a)).unwrap().t_est()
                + net.segment(SegmentId(b)).unwrap().t_est();
            assert!(t >= 30.0 - 1e-9);
        }
        // S2: 1 -> 3 over the shared segment alone, gap 25 s.
        let c1 = candidate_nodes(&net, (150.0, 150.0), 10.0, 1).unwrap();
        let c2 = candidate_nodes(&net, (300.0, 0.0), 10.0, 1).unwrap();
        relax_network(&mut net, 25.0, &c1, &c2, PrevPathStats::default(), 0.5).unwrap();
        let post_s2 = net.segment(SegmentId(1)).unwrap().t_est();
        assert!(
            post_s2 > post_s1 + 1e-9,
            "shared segment must slow further: {post_s2} vs {post_s1}"
        );
        assert!((post_s2 - 25.0).abs() < 1e-9);
    }

    #[test]
    fn relaxation_excludes_slow_segments() {
        // Two segments; one already at the average speed gets excluded and
        // keeps its time, the other absorbs the remaining budget.
        let mut net = RoadNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 150.0, 0.0), node(2, 300.0, 0.0)],
            vec![seg(0, 0, 1, 150.0, 15.0), seg(1, 1, 2, 150.0, 15.0)],
        )
        .unwrap();
        net.set_speed(SegmentId(0), 7.5).unwrap(); // 20 s, at avg speed for T=40
        let (changed, clamped, _) = relaxation_apply(
            &mut net,
            &[SegmentId(0), SegmentId(1)],
            40.0,
            PrevPathStats::default(),
            0.5,
        )
        .unwrap();
        assert!(changed && !clamped);
        // avg = 300/40 = 7.5; segment 0 (v=7.5) excluded with its 20 s, the
        // rest of the budget (20 s) lands on segment 1.
        assert!((net.segment(SegmentId(0)).unwrap().t_est() - 20.0).abs() < 1e-9);
        assert!((net.segment(SegmentId(1)).unwrap().t_est() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn relaxation_free_flow_budget_is_noop() {
        // Budget exactly 2x single free-flow time over two equal segments:
        // w_max = 0, pure free-flow allocation, no speed change.
        let mut net = RoadNetwork::new(
            vec![node(0, 0.0, 0.0), node(1, 150.0, 0.0), node(2, 300.0, 0.0)],
            vec![seg(0, 0, 1, 150.0, 15.0), seg(1, 1, 2, 150.0, 15.0)],
        )
        .unwrap();
        let (changed, clamped, _) = relaxation_apply(
            &mut net,
            &[SegmentId(0), SegmentId(1)],
            20.0,
            PrevPathStats::default(),
            0.5,
        )
        .unwrap();
        assert!(!clamped);
        assert!(!changed);
        for id in [0u32, 1] {
            assert!((net.segment(SegmentId(id)).unwrap().v_est - 15.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruct_no_traces_is_free_flow() {
        let net = grid_network(5, 150.0, 17.88, 0.15);
        let (est, report, _) =
            reconstruct_velocity_field(&net, &[], &flat(), &ReconstructOptions::default())
                .unwrap();
        assert_eq!(report.pairs_processed, 0);
        for s in est.segments() {
            assert_eq!(s.v_est, s.v_max);
        }
    }

    fn grid_condition_and_traces(
        seed: u64,
        n_traces: usize,
    ) -> (
        RoadNetwork,
        crate::traces::GroundTruthCondition,
        Vec<GpsTrace>,
    ) {
        let net = grid_network(5, 150.0, 17.88, 0.15);
        // Concentrated demand on a few node pairs makes congestion
        // heterogeneous, which is the regime the relaxation targets.
        let od: Vec<(NodeId, NodeId, f64)> = [
            (0u32, 24u32),
            (4, 20),
            (2, 22),
            (10, 14),
            (24, 0),
            (20, 4),
        ]
        .iter()
        .map(|&(a, b)| (NodeId(a), NodeId(b), 4000.0))
        .collect();
        let cond = crate::traces::generate_so_condition(&net, &od).unwrap();
        let traces = synthesize_traces(&net, &cond, n_traces, 60.0, 0.0, seed, &flat()).unwrap();
        (net, cond, traces)
    }

    #[test]
    fn reconstruct_speeds_monotone_and_bounded() {
        let (net, _cond, traces) = grid_condition_and_traces(3, 120);
        let opts = ReconstructOptions {
            audit: true,
            ..Default::default()
        };
        let (est, report, audit) =
            reconstruct_velocity_field(&net, &traces, &flat(), &opts).unwrap();
        assert!(report.pairs_processed > 0);
        assert!(report.paths_relaxed > 0);
        for s in est.segments() {
            assert!(s.v_est <= s.v_max + 1e-12 && s.v_est > 0.0);
        }
        let audit = audit.unwrap();
        for (id, traj) in &audit.speed_trajectories {
            for w in traj.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "segment {id} sped up: {w:?}");
            }
        }
    }

    /// Lower-bound respect: after processing, no fastest path between the
    /// matched candidates of a relaxed pair undercuts the pair's gap (jam
    /// outliers excepted).
    #[test]
    fn reconstruct_respects_pair_lower_bounds() {
        let (net, _cond, traces) = grid_condition_and_traces(11, 60);
        let opts = ReconstructOptions {
            audit: true,
            ..Default::default()
        };
        let (est, _, audit) = reconstruct_velocity_field(&net, &traces, &flat(), &opts).unwrap();
        let audit = audit.unwrap();
        let mut checked = 0usize;
        for pair in audit.pairs.iter().filter(|p| p.relaxed) {
            // The guarantee is scoped to the pair's extraction radius; paths
            // detouring outside it are beyond the algorithm's contract.
            let dist = ((pair.p1.0 - pair.p2.0).powi(2) + (pair.p1.1 - pair.p2.1).powi(2)).sqrt();
            let sub = est
                .extract_subgraph(pair.p1, pair.p2, dist / 2.0 + DEFAULT_C_DIS)
                .unwrap();
            for &n1 in &pair.candidates1 {
                for &n2 in &pair.candidates2 {
                    if n1 == n2 || !sub.contains_node(n1) || !sub.contains_node(n2) {
                        continue;
                    }
                    let Some(p) = sub.fastest_path(n1, n2).unwrap() else {
                        continue;
                    };
                    if p.is_empty() {
                        continue;
                    }
                    let jam: f64 = p
                        .segments
                        .iter()
                        .map(|&id| sub.segment(id).unwrap().t_jam())
                        .sum();
                    if jam < pair.gap {
                        continue; // jam-time outlier would have been skipped
                    }
                    checked += 1;
                    assert!(
                        p.travel_time >= pair.gap - 1e-6,
                        "pair gap {} undercut by path {:?} ({})",
                        pair.gap,
                        p.segments,
                        p.travel_time
                    );
                }
            }
        }
        assert!(checked > 0);
    }

    /// Permuting trace order changes results but preserves the monotonicity
    /// and lower-bound invariants.
    #[test]
    fn reconstruct_order_metamorphic() {
        let (net, _cond, traces) = grid_condition_and_traces(17, 40);
        let mut reversed = traces.clone();
        reversed.reverse();
        let opts = ReconstructOptions {
            audit: true,
            ..Default::default()
        };
        for set in [&traces, &reversed] {
            let (_, _, audit) = reconstruct_velocity_field(&net, set, &flat(), &opts).unwrap();
            for traj in audit.unwrap().speed_trajectories.values() {
                for w in traj.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12);
                }
            }
        }
    }

    /// Relaxation reconstructs aggregate travel time far better than the
    /// shortest-distance baseline on a congested grid (desk-scale smoke of
    /// the acceptance comparison).
    #[test]
    fn relaxation_beats_shortest_distance_baseline() {
        let (net, cond, traces) = grid_condition_and_traces(23, 300);
        let (est, _, _) =
            reconstruct_velocity_field(&net, &traces, &flat(), &ReconstructOptions::default())
                .unwrap();
        let est_times = network_times(&est);
        let base = shortest_distance_baseline(&net, &traces, &flat(), DEFAULT_C_DIS).unwrap();
        let truth_sum: f64 = cond.times.values().sum();
        let est_sum: f64 = est_times.values().sum();
        let base_sum: f64 = base.times.values().sum();
        let est_err = (est_sum - truth_sum).abs();
        let base_err = (base_sum - truth_sum).abs();
        assert!(
            est_err < base_err,
            "relaxation {est_err:.1}s vs baseline {base_err:.1}s (truth {truth_sum:.1}s)"
        );
    }

    /// Scratch calibration probe for the benchmark instance shape; run with
    /// `cargo test -p roadrecon-core tune_benchmark -- --ignored --nocapture`.
    #[test]
    #[ignore]
    fn tune_benchmark() {
        use rand::Rng;
        let net = grid_network(5, 150.0, 17.88, 0.15);
        for (n_pairs, demand, n_traces, sampling) in [
            (40usize, 500.0, 400usize, 1e18),
            (40, 1000.0, 400, 1e18),
            (40, 2000.0, 400, 1e18),
            (40, 2000.0, 800, 1e18),
            (40, 2000.0, 400, 60.0),
            (40, 3000.0, 400, 1e18),
        ] {
            let mut rng = crate::rng::stream(55, &[n_pairs as u64]);
            let mut od = Vec::new();
            while od.len() < n_pairs {
                let a = rng.gen_range(0..25u32);
                let b = rng.gen_range(0..25u32);
                if a != b {
                    od.push((NodeId(a), NodeId(b), demand));
                }
            }
            let cond = crate::traces::generate_so_condition(&net, &od).unwrap();
            let traces =
                synthesize_traces(&net, &cond, n_traces, sampling, 0.0, 9, &flat()).unwrap();
            let (est, report, _) = reconstruct_velocity_field(
                &net,
                &traces,
                &flat(),
                &ReconstructOptions::default(),
            )
            .unwrap();
            let base =
                shortest_distance_baseline(&net, &traces, &flat(), DEFAULT_C_DIS).unwrap();
            let truth_sum: f64 = cond.times.values().sum();
            let est_sum: f64 = network_times(&est).values().sum();
            let base_sum: f64 = base.times.values().sum();
            println!(
                "pairs={n_pairs} d={demand} n={n_traces} voc={:.2} truth={truth_sum:.0} \
                 est={est_sum:.0} base={base_sum:.0} relax_err={:.1} base_err={:.1} skipped={}/{} relaxed_paths={}",
                cond.voc,
                (est_sum - truth_sum).abs(),
                (base_sum - truth_sum).abs(),
                report.pairs_skipped_no_candidates,
                report.pairs_processed,
                report.paths_relaxed,
            );
            if demand == 2000.0 && n_traces == 400 && sampling > 1e17 {
                let mut worst: Vec<(f64, SegmentId, f64, f64)> = cond
                    .times
                    .iter()
                    .map(|(&id, &tt)| {
                        let te = est.segment(id).unwrap().t_est();
                        ((tt - te).abs(), id, tt, te)
                    })
                    .collect();
                worst.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
                for (d, id, tt, te) in worst.iter().take(8) {
                    println!("  seg {id}: truth {tt:.1} est {te:.1} (|d|={d:.1})");
                }
            }
        }
    }

    #[test]
    fn gps_pairs_skipped_without_candidates() {
        let net = grid_network(3, 150.0, 15.0, 0.15);
        let trace = GpsTrace {
            id: 0,
            points: vec![
                GpsPoint {
                    lon: 10.0, // far away from the grid
                    lat: 10.0,
                    t: 0.0,
                },
                GpsPoint {
                    lon: 10.0,
                    lat: 10.1,
                    t: 60.0,
                },
            ],
            truth: None,
        };
        let (_, report, _) = reconstruct_velocity_field(
            &net,
            &[trace],
            &flat(),
            &ReconstructOptions::default(),
        )
        .unwrap();
        assert_eq!(
            report.pairs_skipped_no_candidates + report.pairs_skipped_empty_subgraph,
            1
        );
    }
}
