//! GPS traces, synthetic ground-truth conditions (System-Optimal and
//! Timestamp models) and trace synthesis with sampling-rate and noise
//! control.

use crate::network::{
    bpr_travel_time, capacity, NetworkError, NodeId, Projection, RoadNetwork, SegmentId,
};
use crate::rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("od pair {origin} -> {dest} is disconnected")]
    InfeasibleOd { origin: NodeId, dest: NodeId },
    #[error("could not sample a usable source/target pair after {0} retries")]
    SamplingExhausted(usize),
    #[error("trace needs at least 2 points")]
    TooShort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsPoint {
    pub lon: f64,
    pub lat: f64,
    /// Epoch seconds.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsTrace {
    pub id: u64,
    pub points: Vec<GpsPoint>,
    /// Ground-truth traversed path when synthetic.
    pub truth: Option<Vec<SegmentId>>,
}

impl GpsTrace {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.points.len() < 2 {
            return Err(TraceError::TooShort);
        }
        for w in self.points.windows(2) {
            if w[1].t <= w[0].t {
                return Err(TraceError::TooShort);
            }
        }
        Ok(())
    }

    /// All consecutive point pairs in order.
    pub fn pair_stream(&self) -> Vec<(GpsPoint, GpsPoint)> {
        self.points.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionModel {
    SystemOptimal,
    Timestamp,
}

/// Per-segment ground-truth travel times plus a congestion label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthCondition {
    pub times: BTreeMap<SegmentId, f64>,
    /// Mean volume-over-capacity congestion label.
    pub voc: f64,
    pub provenance: ConditionModel,
}

impl GroundTruthCondition {
    pub fn time(&self, id: SegmentId) -> Option<f64> {
        self.times.get(&id).copied()
    }

    /// Clamps each time into `[t_min, len/0.5]`.
    fn clamp_to_bounds(mut self, net: &RoadNetwork) -> Self {
        for seg in net.segments() {
            if let Some(t) = self.times.get_mut(&seg.id) {
                *t = t.clamp(seg.t_min(), seg.t_jam());
            }
        }
        self
    }
}

/// Copies the network and sets `v_est` to match the condition's travel times.
pub fn apply_condition(net: &RoadNetwork, cond: &GroundTruthCondition) -> RoadNetwork {
    let mut out = net.clone();
    for seg in net.segments() {
        if let Some(t) = cond.time(seg.id) {
            let v = (seg.len / t).clamp(f64::MIN_POSITIVE, seg.v_max);
            out.set_speed(seg.id, v).expect("clamped speed is valid");
        }
    }
    out
}

// ---------------------------------------------------------------------------
// System-Optimal model
// ---------------------------------------------------------------------------

/// Marginal link cost under BPR: `t(f) + f t'(f)`.
fn marginal_cost(net: &RoadNetwork, flows: &[f64]) -> Vec<f64> {
    net.segments()
        .iter()
        .zip(flows)
        .map(|(s, &f)| {
            let c = capacity(s);
            let t = s.t_min() * (1.0 + 1.5 * (f / c).powi(4));
            let dt = s.t_min() * 6.0 * f.powi(3) / c.powi(4);
            t + f * dt
        })
        .collect()
}

fn so_objective(net: &RoadNetwork, flows: &[f64]) -> f64 {
    net.segments()
        .iter()
        .zip(flows)
        .map(|(s, &f)| f * bpr_travel_time(s, f).expect("positive capacity"))
        .sum()
}

/// All-or-nothing loading of `od` onto shortest paths under `weights`.
fn all_or_nothing(
    net: &RoadNetwork,
    od: &[(NodeId, NodeId, f64)],
    weights: &[f64],
) -> Result<Vec<f64>, TraceError> {
    let mut flows = vec![0.0; net.segments().len()];
    let mut by_origin: BTreeMap<NodeId, Vec<(NodeId, f64)>> = BTreeMap::new();
    for &(o, d, u) in od {
        by_origin.entry(o).or_default().push((d, u));
    }
    for (origin, dests) in by_origin {
        let tree = net.shortest_tree_with(origin, weights)?;
        for (dest, u) in dests {
            if u == 0.0 {
                continue;
            }
            let di = net
                .node_index(dest)
                .ok_or(NetworkError::UnknownNode(dest))?;
            let path = tree
                .path_to(net, di)
                .ok_or(TraceError::InfeasibleOd { origin, dest })?;
            for si in path {
                flows[si] += u;
            }
        }
    }
    Ok(flows)
}

pub const SO_RELATIVE_GAP: f64 = 1e-3;
pub const SO_MAX_ITERS: usize = 200;

/// Solves the system-optimal assignment by convex combinations on marginal
/// costs and converts the resulting flows to travel times.
pub fn generate_so_condition(
    net: &RoadNetwork,
    od: &[(NodeId, NodeId, f64)],
) -> Result<GroundTruthCondition, TraceError> {
    for &(o, d, u) in od {
        debug_assert!(u >= 0.0);
        net.node(o)?;
        net.node(d)?;
    }
    let n = net.segments().len();
    let mut flows = all_or_nothing(net, od, &marginal_cost(net, &vec![0.0; n]))?;
    for _ in 0..SO_MAX_ITERS {
        let cost = marginal_cost(net, &flows);
        let target = all_or_nothing(net, od, &cost)?;
        let denom: f64 = cost.iter().zip(&flows).map(|(c, f)| c * f).sum();
        let gap: f64 = cost
            .iter()
            .zip(flows.iter().zip(&target))
            .map(|(c, (f, y))| c * (f - y))
            .sum();
        if denom > 0.0 && gap / denom < SO_RELATIVE_GAP {
            break;
        }
        if denom == 0.0 {
            break; // zero demand
        }
        // Exact line search on the convex 1-D restriction.
        let dir: Vec<f64> = target.iter().zip(&flows).map(|(y, f)| y - f).collect();
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            let probe: Vec<f64> = flows.iter().zip(&dir).map(|(f, d)| f + mid * d).collect();
            let slope: f64 = marginal_cost(net, &probe)
                .iter()
                .zip(&dir)
                .map(|(m, d)| m * d)
                .sum();
            if slope < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        for (f, d) in flows.iter_mut().zip(&dir) {
            *f += theta * d;
        }
    }

    let mut times = BTreeMap::new();
    let mut voc = 0.0;
    for (seg, &f) in net.segments().iter().zip(&flows) {
        times.insert(seg.id, bpr_travel_time(seg, f)?);
        voc += f / capacity(seg);
    }
    voc /= n.max(1) as f64;
    Ok(GroundTruthCondition {
        times,
        voc,
        provenance: ConditionModel::SystemOptimal,
    }
    .clamp_to_bounds(net))
}

/// Segment flows of the SO solution (used by tests and the conservation
/// checks); same solver as [`generate_so_condition`].
pub fn so_flows(
    net: &RoadNetwork,
    od: &[(NodeId, NodeId, f64)],
) -> Result<Vec<f64>, TraceError> {
    let cond = generate_so_condition(net, od)?;
    Ok(net
        .segments()
        .iter()
        .map(|s| {
            let t = cond.time(s.id).unwrap_or_else(|| s.t_min());
            crate::network::bpr_invert(s, t).unwrap_or(0.0)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Timestamp model
// ---------------------------------------------------------------------------

/// Nearest node to a projected point.
fn nearest_node(net: &RoadNetwork, x: f64, y: f64) -> NodeId {
    net.nodes()
        .iter()
        .min_by(|a, b| {
            let da = (a.x - x).powi(2) + (a.y - y).powi(2);
            let db = (b.x - x).powi(2) + (b.y - y).powi(2);
            da.partial_cmp(&db)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.id.cmp(&b.id))
        })
        .expect("network has nodes")
        .id
}

/// Distributes each pair's time gap over its free-flow fastest path in
/// proportion to segment length; covered segments average over pairs,
/// uncovered segments default to free flow.
pub fn generate_timestamp_condition(
    net: &RoadNetwork,
    traces: &[GpsTrace],
    projection: &Projection,
) -> Result<GroundTruthCondition, TraceError> {
    let mut sums: BTreeMap<SegmentId, (f64, usize)> = BTreeMap::new();
    for trace in traces {
        for (a, b) in trace.pair_stream() {
            let (ax, ay) = projection.to_meters(a.lon, a.lat);
            let (bx, by) = projection.to_meters(b.lon, b.lat);
            let n1 = nearest_node(net, ax, ay);
            let n2 = nearest_node(net, bx, by);
            if n1 == n2 {
                continue;
            }
            let Some(path) = net.fastest_path(n1, n2)? else {
                continue;
            };
            if path.is_empty() {
                continue;
            }
            let gap = b.t - a.t;
            let total_len: f64 = path
                .segments
                .iter()
                .map(|&id| net.segment(id).map(|s| s.len))
                .sum::<Result<f64, _>>()?;
            for &id in &path.segments {
                let seg = net.segment(id)?;
                let share = gap * seg.len / total_len;
                let e = sums.entry(id).or_insert((0.0, 0));
                e.0 += share;
                e.1 += 1;
            }
        }
    }
    let mut times = BTreeMap::new();
    for seg in net.segments() {
        let t = match sums.get(&seg.id) {
            Some(&(sum, n)) => sum / n as f64,
            None => seg.t_min(),
        };
        times.insert(seg.id, t);
    }
    let mut voc = 0.0;
    for seg in net.segments() {
        let f = crate::network::bpr_invert(seg, times[&seg.id].max(seg.t_min())).unwrap_or(0.0);
        voc += f / capacity(seg);
    }
    voc /= net.segments().len().max(1) as f64;
    Ok(GroundTruthCondition {
        times,
        voc,
        provenance: ConditionModel::Timestamp,
    }
    .clamp_to_bounds(net))
}

// ---------------------------------------------------------------------------
// Trace synthesis
// ---------------------------------------------------------------------------

const SOURCE_TARGET_RETRIES: usize = 100;

/// Synthesizes `n` traces under a ground-truth condition.
///
/// Each trace routes a uniformly sampled source/target pair along the fastest
/// path under the condition, emits a point every `sampling_s` seconds of
/// travel (plus the exact start and end), and perturbs positions with
/// isotropic Gaussian noise of `noise_sigma_m` meters. Trace `i` draws from
/// the stream `(seed, i)`, so synthesis is deterministic and parallelizable.
pub fn synthesize_traces(
    net: &RoadNetwork,
    cond: &GroundTruthCondition,
    n: usize,
    sampling_s: f64,
    noise_sigma_m: f64,
    seed: u64,
    projection: &Projection,
) -> Result<Vec<GpsTrace>, TraceError> {
    debug_assert!(n > 0 && sampling_s > 0.0);
    let loaded = apply_condition(net, cond);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(synthesize_one(
            &loaded,
            i as u64,
            sampling_s,
            noise_sigma_m,
            seed,
            projection,
        )?);
    }
    Ok(out)
}

fn synthesize_one(
    loaded: &RoadNetwork,
    index: u64,
    sampling_s: f64,
    noise_sigma_m: f64,
    seed: u64,
    projection: &Projection,
) -> Result<GpsTrace, TraceError> {
    let mut rng = rng::stream(seed, &[0x7261, index]);
    let nodes = loaded.nodes();
    let mut path = None;
    for _ in 0..SOURCE_TARGET_RETRIES {
        let src = nodes[rng.gen_range(0..nodes.len())].id;
        let dst = nodes[rng.gen_range(0..nodes.len())].id;
        if src == dst {
            continue;
        }
        if let Some(p) = loaded.fastest_path(src, dst)? {
            if !p.is_empty() {
                path = Some(p);
                break;
            }
        }
    }
    let path = path.ok_or(TraceError::SamplingExhausted(SOURCE_TARGET_RETRIES))?;

    // Walk the path by travel time; piecewise-linear position in each segment.
    let total: f64 = path.travel_time;
    let mut sample_times: Vec<f64> = Vec::new();
    let mut t = 0.0;
    while t < total {
        sample_times.push(t);
        t += sampling_s;
    }
    // Exact endpoint; drop a preceding sample that collapses the last gap.
    if let Some(&last) = sample_times.last() {
        if total - last < 1e-9 {
            sample_times.pop();
        }
    }
    sample_times.push(total);

    let noise = Normal::new(0.0, noise_sigma_m.max(0.0)).expect("sigma >= 0");
    let mut points = Vec::with_capacity(sample_times.len());
    let mut cursor = 0usize; // segment index within path
    let mut seg_start_t = 0.0;
    for &st in &sample_times {
        // Advance to the segment containing st.
        let (x, y) = loop {
            let seg = loaded.segment(path.segments[cursor])?;
            let dur = seg.t_est();
            if st <= seg_start_t + dur || cursor + 1 == path.segments.len() {
                let frac = ((st - seg_start_t) / dur).clamp(0.0, 1.0);
                let a = loaded.node(seg.from)?;
                let b = loaded.node(seg.to)?;
                break (a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y));
            }
            seg_start_t += dur;
            cursor += 1;
        };
        let (nx, ny) = if noise_sigma_m > 0.0 {
            (x + noise.sample(&mut rng), y + noise.sample(&mut rng))
        } else {
            (x, y)
        };
        let (lon, lat) = projection.to_lonlat(nx, ny);
        points.push(GpsPoint { lon, lat, t: st });
    }
    Ok(GpsTrace {
        id: index,
        points,
        truth: Some(path.segments.clone()),
    })
}

// ---------------------------------------------------------------------------
// CSV formats
// ---------------------------------------------------------------------------

/// `trace_id, lon, lat, epoch_s` sorted by (trace_id, epoch_s).
pub fn traces_to_csv(traces: &[GpsTrace]) -> String {
    let mut sorted: Vec<&GpsTrace> = traces.iter().collect();
    sorted.sort_by_key(|t| t.id);
    let mut out = String::from("trace_id,lon,lat,epoch_s\n");
    for t in sorted {
        for p in &t.points {
            out.push_str(&format!("{},{:.9},{:.9},{:.3}\n", t.id, p.lon, p.lat, p.t));
        }
    }
    out
}

pub fn traces_from_csv(text: &str) -> Result<Vec<GpsTrace>, TraceError> {
    let mut by_id: BTreeMap<u64, Vec<GpsPoint>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(',');
        let mut next = || it.next().ok_or(TraceError::TooShort);
        let id: u64 = next()?.trim().parse().map_err(|_| TraceError::TooShort)?;
        let lon: f64 = next()?.trim().parse().map_err(|_| TraceError::TooShort)?;
        let lat: f64 = next()?.trim().parse().map_err(|_| TraceError::TooShort)?;
        let t: f64 = next()?.trim().parse().map_err(|_| TraceError::TooShort)?;
        by_id.entry(id).or_default().push(GpsPoint { lon, lat, t });
    }
    let mut out = Vec::new();
    for (id, mut points) in by_id {
        points.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap_or(std::cmp::Ordering::Equal));
        let trace = GpsTrace {
            id,
            points,
            truth: None,
        };
        trace.validate()?;
        out.push(trace);
    }
    Ok(out)
}

/// Sidecar truth file: `trace_id, segment ids joined by ';'`.
pub fn truth_to_csv(traces: &[GpsTrace]) -> String {
    let mut out = String::from("trace_id,segments\n");
    for t in traces {
        if let Some(truth) = &t.truth {
            let ids: Vec<String> = truth.iter().map(|s| s.0.to_string()).collect();
            out.push_str(&format!("{},{}\n", t.id, ids.join(";")));
        }
    }
    out
}

pub fn truth_from_csv(text: &str) -> BTreeMap<u64, Vec<SegmentId>> {
    let mut out = BTreeMap::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, rest)) = line.split_once(',') else {
            continue;
        };
        let Ok(id) = id.trim().parse::<u64>() else {
            continue;
        };
        let segs: Vec<SegmentId> = rest
            .split(';')
            .filter_map(|s| s.trim().parse::<u32>().ok().map(SegmentId))
            .collect();
        out.insert(id, segs);
    }
    out
}

/// `segment_id, travel_time_s` with a `# key=value` metadata comment line.
pub fn condition_to_csv(cond: &GroundTruthCondition) -> String {
    let model = match cond.provenance {
        ConditionModel::SystemOptimal => "so",
        ConditionModel::Timestamp => "timestamp",
    };
    let mut out = format!("# model={model} voc={:.6}\n", cond.voc);
    out.push_str("segment_id,travel_time_s\n");
    for (id, t) in &cond.times {
        out.push_str(&format!("{},{:.9}\n", id.0, t));
    }
    out
}

pub fn condition_from_csv(text: &str) -> GroundTruthCondition {
    let mut times = BTreeMap::new();
    let mut voc = 0.0;
    let mut provenance = ConditionModel::Timestamp;
    for line in text.lines() {
        if let Some(meta) = line.strip_prefix('#') {
            for kv in meta.split_whitespace() {
                match kv.split_once('=') {
                    Some(("voc", v)) => voc = v.parse().unwrap_or(0.0),
                    Some(("model", "so")) => provenance = ConditionModel::SystemOptimal,
                    _ => {}
                }
            }
            continue;
        }
        let Some((id, t)) = line.split_once(',') else {
            continue;
        };
        if let (Ok(id), Ok(t)) = (id.trim().parse::<u32>(), t.trim().parse::<f64>()) {
            times.insert(SegmentId(id), t);
        }
    }
    GroundTruthCondition {
        times,
        voc,
        provenance,
    }
}
