//! Road-network graph: segments with speed/density attributes, performance
//! functions, shortest-path queries and subgraph extraction.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::BinaryHeap;
use std::fmt;
use thiserror::Error;

pub const MPS_TO_MPH: f64 = 3600.0 / 1609.344;
/// Speed assumed under jam density; bounds every travel time from above.
pub const JAM_SPEED_MPS: f64 = 0.5;
const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct SegmentId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown segment {0}")]
    UnknownSegment(SegmentId),
    #[error("segment {0}: {1}")]
    InvalidSegment(SegmentId, String),
    #[error("segment {0} endpoint {1} not among nodes")]
    DanglingEndpoint(SegmentId, NodeId),
    #[error("duplicate id {0}")]
    DuplicateId(u32),
    #[error("subgraph around ({x:.1}, {y:.1}) with radius {radius:.1} m is empty")]
    EmptySubgraph { x: f64, y: f64, radius: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    /// Planar position in meters (local equirectangular projection).
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoadSegment {
    pub id: SegmentId,
    pub from: NodeId,
    pub to: NodeId,
    /// Length in meters.
    pub len: f64,
    /// Free-flow speed, m/s.
    pub v_max: f64,
    /// Jam density, vehicles/meter.
    pub k_max: f64,
    /// Current estimated speed, m/s; starts at `v_max`, only ever lowered.
    pub v_est: f64,
    pub lanes: u32,
}

impl RoadSegment {
    /// Free-flow travel time in seconds.
    pub fn t_min(&self) -> f64 {
        self.len / self.v_max
    }

    /// Travel time at the current speed estimate.
    pub fn t_est(&self) -> f64 {
        self.len / self.v_est
    }

    /// Travel time at jam density.
    pub fn t_jam(&self) -> f64 {
        self.len / JAM_SPEED_MPS
    }

    fn validate(&self) -> Result<(), NetworkError> {
        let bad = |msg: &str| Err(NetworkError::InvalidSegment(self.id, msg.to_string()));
        if !(self.len > 0.0) {
            return bad("len must be > 0");
        }
        if !(self.v_max > 0.0) {
            return bad("v_max must be > 0");
        }
        if !(self.k_max > 0.0) {
            return bad("k_max must be > 0");
        }
        if !(self.v_est > 0.0 && self.v_est <= self.v_max * (1.0 + 1e-12)) {
            return bad("v_est must lie in (0, v_max]");
        }
        if self.lanes == 0 {
            return bad("lanes must be >= 1");
        }
        Ok(())
    }
}

/// BPR link performance: `t = t_min (1 + 1.5 (f/c)^4)`, flow in veh/h.
pub fn bpr_travel_time(segment: &RoadSegment, flow: f64) -> Result<f64, NetworkError> {
    debug_assert!(flow >= 0.0);
    let c = capacity(segment);
    if c <= 0.0 {
        return Err(NetworkError::InvalidSegment(
            segment.id,
            "zero capacity".into(),
        ));
    }
    let r = flow / c;
    Ok(segment.t_min() * (1.0 + 1.5 * r.powi(4)))
}

/// Inverse of [`bpr_travel_time`]: the unique `f >= 0` reaching `travel_time`.
pub fn bpr_invert(segment: &RoadSegment, travel_time: f64) -> Result<f64, NetworkError> {
    let t_min = segment.t_min();
    if travel_time < t_min * (1.0 - 1e-12) {
        return Err(NetworkError::InvalidSegment(
            segment.id,
            format!("travel time {travel_time} below free-flow {t_min}"),
        ));
    }
    let c = capacity(segment);
    let ratio = ((travel_time / t_min - 1.0) / 1.5).max(0.0);
    Ok(c * ratio.powf(0.25))
}

/// Per-lane `1700 + 10 * mph` capped at 2400 veh/h (cap reached at 70 mph),
/// scaled by the lane count.
pub fn capacity(segment: &RoadSegment) -> f64 {
    let mph = segment.v_max * MPS_TO_MPH;
    let per_lane = if mph <= 70.0 { 1700.0 + 10.0 * mph } else { 2400.0 };
    per_lane * segment.lanes as f64
}

/// Greenshield density from the current speed estimate: `k = k_max (1 - v/v_max)`.
pub fn greenshield_density(segment: &RoadSegment) -> f64 {
    segment.k_max * (1.0 - segment.v_est / segment.v_max)
}

/// Speed at which [`greenshield_density`] returns `k`.
pub fn greenshield_speed(segment: &RoadSegment, k: f64) -> f64 {
    segment.v_max * (1.0 - k / segment.k_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub segments: Vec<SegmentId>,
    pub travel_time: f64,
}

impl Path {
    pub fn empty() -> Self {
        Self {
            segments: Vec::new(),
            travel_time: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    segments: Vec<RoadSegment>,
    node_pos: BTreeMap<NodeId, usize>,
    seg_pos: BTreeMap<SegmentId, usize>,
    /// node index -> outgoing segment indices, ordered by segment id.
    out_adj: Vec<Vec<usize>>,
    /// node index -> incoming segment indices, ordered by segment id.
    in_adj: Vec<Vec<usize>>,
}

impl RoadNetwork {
    pub fn new(mut nodes: Vec<Node>, mut segments: Vec<RoadSegment>) -> Result<Self, NetworkError> {
        nodes.sort_by_key(|n| n.id);
        segments.sort_by_key(|s| s.id);
        let mut node_pos = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if node_pos.insert(n.id, i).is_some() {
                return Err(NetworkError::DuplicateId(n.id.0));
            }
        }
        let mut seg_pos = BTreeMap::new();
        let mut out_adj = vec![Vec::new(); nodes.len()];
        let mut in_adj = vec![Vec::new(); nodes.len()];
        for (i, s) in segments.iter().enumerate() {
            s.validate()?;
            if seg_pos.insert(s.id, i).is_some() {
                return Err(NetworkError::DuplicateId(s.id.0));
            }
            let from = *node_pos
                .get(&s.from)
                .ok_or(NetworkError::DanglingEndpoint(s.id, s.from))?;
            let to = *node_pos
                .get(&s.to)
                .ok_or(NetworkError::DanglingEndpoint(s.id, s.to))?;
            out_adj[from].push(i);
            in_adj[to].push(i);
        }
        Ok(Self {
            nodes,
            segments,
            node_pos,
            seg_pos,
            out_adj,
            in_adj,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn segments(&self) -> &[RoadSegment] {
        &self.segments
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, NetworkError> {
        self.node_pos
            .get(&id)
            .map(|&i| &self.nodes[i])
            .ok_or(NetworkError::UnknownNode(id))
    }

    pub fn segment(&self, id: SegmentId) -> Result<&RoadSegment, NetworkError> {
        self.seg_pos
            .get(&id)
            .map(|&i| &self.segments[i])
            .ok_or(NetworkError::UnknownSegment(id))
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.node_pos.contains_key(&id)
    }

    /// Outgoing segments of a node, ordered by segment id.
    pub fn outgoing(&self, id: NodeId) -> Result<impl Iterator<Item = &RoadSegment>, NetworkError> {
        let &i = self.node_pos.get(&id).ok_or(NetworkError::UnknownNode(id))?;
        Ok(self.out_adj[i].iter().map(|&s| &self.segments[s]))
    }

    /// Incoming segments of a node, ordered by segment id.
    pub fn incoming(&self, id: NodeId) -> Result<impl Iterator<Item = &RoadSegment>, NetworkError> {
        let &i = self.node_pos.get(&id).ok_or(NetworkError::UnknownNode(id))?;
        Ok(self.in_adj[i].iter().map(|&s| &self.segments[s]))
    }

    /// Single-writer phase update; `v_est` may only decrease over the life of
    /// a reconstruction, which callers enforce.
    pub fn set_speed(&mut self, id: SegmentId, v_est: f64) -> Result<(), NetworkError> {
        let &i = self
            .seg_pos
            .get(&id)
            .ok_or(NetworkError::UnknownSegment(id))?;
        let seg = &mut self.segments[i];
        if !(v_est > 0.0 && v_est <= seg.v_max * (1.0 + 1e-12)) {
            return Err(NetworkError::InvalidSegment(
                id,
                format!("speed {v_est} outside (0, v_max]"),
            ));
        }
        seg.v_est = v_est.min(seg.v_max);
        Ok(())
    }

    /// Resets all speed estimates to free flow.
    pub fn reset_speeds(&mut self) {
        for s in &mut self.segments {
            s.v_est = s.v_max;
        }
    }

    /// Overwrites `v_est` of the shared segments from `other` (the
    /// "UpdateNetwork" merge after relaxing a subnetwork).
    pub fn merge_speeds(&mut self, other: &RoadNetwork) {
        for s in &other.segments {
            if let Some(&i) = self.seg_pos.get(&s.id) {
                self.segments[i].v_est = s.v_est;
            }
        }
    }

    /// Travel time of a segment list; verifies contiguity.
    pub fn path_time(&self, segments: &[SegmentId]) -> Result<f64, NetworkError> {
        let mut t = 0.0;
        let mut prev_to: Option<NodeId> = None;
        for &id in segments {
            let s = self.segment(id)?;
            if let Some(p) = prev_to {
                if p != s.from {
                    return Err(NetworkError::InvalidSegment(
                        id,
                        format!("discontiguous path: {p} != {}", s.from),
                    ));
                }
            }
            prev_to = Some(s.to);
            t += s.t_est();
        }
        Ok(t)
    }

    /// Minimum-travel-time path under current `v_est` weights.
    ///
    /// Deterministic under ties: among minimum-time paths the lexicographically
    /// smallest segment-id sequence is returned. `None` when unreachable.
    pub fn fastest_path(&self, src: NodeId, dst: NodeId) -> Result<Option<Path>, NetworkError> {
        let src_i = *self
            .node_pos
            .get(&src)
            .ok_or(NetworkError::UnknownNode(src))?;
        let dst_i = *self
            .node_pos
            .get(&dst)
            .ok_or(NetworkError::UnknownNode(dst))?;
        if src_i == dst_i {
            return Ok(Some(Path::empty()));
        }
        let fwd = self.dijkstra(src_i, false);
        let total = fwd[dst_i];
        if !total.is_finite() {
            return Ok(None);
        }
        let bwd = self.dijkstra(dst_i, true);

        // Greedy lexicographic walk over the shortest-path DAG: at each node
        // take the smallest-id outgoing segment that still lies on a
        // minimum-time path.
        let tol = 1e-9 * total.max(1.0);
        let mut segments = Vec::new();
        let mut cur = src_i;
        let mut travel = 0.0;
        while cur != dst_i {
            let mut chosen = None;
            for &si in &self.out_adj[cur] {
                let s = &self.segments[si];
                let to_i = self.node_pos[&s.to];
                if (fwd[cur] + s.t_est() + bwd[to_i] - total).abs() <= tol {
                    chosen = Some((si, to_i));
                    break; // out_adj is ordered by segment id
                }
            }
            let Some((si, to_i)) = chosen else {
                // Numerically impossible on a consistent DAG; bail out.
                return Ok(None);
            };
            travel += self.segments[si].t_est();
            segments.push(self.segments[si].id);
            cur = to_i;
            if segments.len() > self.segments.len() {
                return Ok(None);
            }
        }
        Ok(Some(Path {
            segments,
            travel_time: travel,
        }))
    }

    /// One-to-all travel times under current speeds. `reverse` follows
    /// incoming segments (distances *to* the root).
    pub fn dijkstra(&self, root: usize, reverse: bool) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        dist[root] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            dist: 0.0,
            node: root,
        });
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            let adj = if reverse {
                &self.in_adj[node]
            } else {
                &self.out_adj[node]
            };
            for &si in adj {
                let s = &self.segments[si];
                let nxt = if reverse {
                    self.node_pos[&s.from]
                } else {
                    self.node_pos[&s.to]
                };
                let nd = d + s.t_est();
                if nd < dist[nxt] {
                    dist[nxt] = nd;
                    heap.push(HeapEntry {
                        dist: nd,
                        node: nxt,
                    });
                }
            }
        }
        dist
    }

    /// Shortest-path tree from an origin under the current `v_est` weights.
    pub fn shortest_tree(&self, origin: NodeId) -> Result<ShortestTree, NetworkError> {
        let weights: Vec<f64> = self.segments.iter().map(|s| s.t_est()).collect();
        self.shortest_tree_with(origin, &weights)
    }

    /// Shortest-path tree from an origin under arbitrary nonnegative segment
    /// weights (indexed by segment position). Ties resolve toward smaller
    /// segment ids through the fixed relaxation order.
    pub fn shortest_tree_with(
        &self,
        origin: NodeId,
        weights: &[f64],
    ) -> Result<ShortestTree, NetworkError> {
        let root = *self
            .node_pos
            .get(&origin)
            .ok_or(NetworkError::UnknownNode(origin))?;
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut parent = vec![usize::MAX; self.nodes.len()];
        dist[root] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            dist: 0.0,
            node: root,
        });
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &si in &self.out_adj[node] {
                let s = &self.segments[si];
                let nxt = self.node_pos[&s.to];
                let nd = d + weights[si];
                if nd < dist[nxt] - 1e-15 {
                    dist[nxt] = nd;
                    parent[nxt] = si;
                    heap.push(HeapEntry {
                        dist: nd,
                        node: nxt,
                    });
                }
            }
        }
        Ok(ShortestTree { dist, parent })
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.node_pos.get(&id).copied()
    }

    pub fn segment_index(&self, id: SegmentId) -> Option<usize> {
        self.seg_pos.get(&id).copied()
    }

    /// Induced subnetwork of all nodes within `radius` meters of the midpoint
    /// of `p1`, `p2` (planar meters).
    pub fn extract_subgraph(
        &self,
        p1: (f64, f64),
        p2: (f64, f64),
        radius: f64,
    ) -> Result<RoadNetwork, NetworkError> {
        debug_assert!(radius > 0.0);
        let mx = 0.5 * (p1.0 + p2.0);
        let my = 0.5 * (p1.1 + p2.1);
        let keep: Vec<Node> = self
            .nodes
            .iter()
            .filter(|n| ((n.x - mx).powi(2) + (n.y - my).powi(2)).sqrt() <= radius)
            .copied()
            .collect();
        if keep.is_empty() {
            return Err(NetworkError::EmptySubgraph {
                x: mx,
                y: my,
                radius,
            });
        }
        let ids: std::collections::BTreeSet<NodeId> = keep.iter().map(|n| n.id).collect();
        let segs: Vec<RoadSegment> = self
            .segments
            .iter()
            .filter(|s| ids.contains(&s.from) && ids.contains(&s.to))
            .cloned()
            .collect();
        RoadNetwork::new(keep, segs)
    }

    /// Rebuilds the adjacency index from scratch and compares (consistency
    /// check used by tests and loaders).
    pub fn check_adjacency(&self) -> bool {
        let rebuilt = RoadNetwork::new(self.nodes.clone(), self.segments.clone());
        match rebuilt {
            Ok(r) => r.out_adj == self.out_adj && r.in_adj == self.in_adj,
            Err(_) => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShortestTree {
    /// Travel time from the origin per node index.
    pub dist: Vec<f64>,
    /// Incoming tree segment index per node index (`usize::MAX` at the origin
    /// and unreachable nodes).
    pub parent: Vec<usize>,
}

impl ShortestTree {
    /// Walks tree parents from `node` back to the origin; segment indices in
    /// path order.
    pub fn path_to(&self, net: &RoadNetwork, node: usize) -> Option<Vec<usize>> {
        if !self.dist[node].is_finite() {
            return None;
        }
        let mut out = Vec::new();
        let mut cur = node;
        while self.parent[cur] != usize::MAX {
            let si = self.parent[cur];
            out.push(si);
            cur = net.node_pos[&net.segments[si].from];
        }
        out.reverse();
        Some(out)
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on (dist, node).
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

// ---------------------------------------------------------------------------
// JSON file format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    nodes: Vec<NodeFileEntry>,
    segments: Vec<SegmentFileEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeFileEntry {
    id: u32,
    lon: f64,
    lat: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentFileEntry {
    id: u32,
    from: u32,
    to: u32,
    #[serde(default)]
    len_m: Option<f64>,
    vmax_mps: f64,
    kmax_vpm: f64,
    #[serde(default = "one")]
    lanes: u32,
}

fn one() -> u32 {
    1
}

/// Local equirectangular projection about a reference lon/lat.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Projection {
    pub lon0: f64,
    pub lat0: f64,
}

impl Projection {
    pub fn centered_on(points: &[(f64, f64)]) -> Self {
        let n = points.len().max(1) as f64;
        let lon0 = points.iter().map(|p| p.0).sum::<f64>() / n;
        let lat0 = points.iter().map(|p| p.1).sum::<f64>() / n;
        Self { lon0, lat0 }
    }

    pub fn to_meters(&self, lon: f64, lat: f64) -> (f64, f64) {
        let x = EARTH_RADIUS_M * (lon - self.lon0).to_radians() * self.lat0.to_radians().cos();
        let y = EARTH_RADIUS_M * (lat - self.lat0).to_radians();
        (x, y)
    }

    pub fn to_lonlat(&self, x: f64, y: f64) -> (f64, f64) {
        let lon = self.lon0 + (x / (EARTH_RADIUS_M * self.lat0.to_radians().cos())).to_degrees();
        let lat = self.lat0 + (y / EARTH_RADIUS_M).to_degrees();
        (lon, lat)
    }
}

/// Network plus the projection it was loaded under (traces reuse it so meters
/// and degrees stay consistent).
#[derive(Debug, Clone)]
pub struct GeoNetwork {
    pub net: RoadNetwork,
    pub projection: Projection,
}

#[derive(Debug, Error)]
pub enum NetworkIoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Parses the JSON network format. Lon/lat are projected once about the node
/// centroid; missing `len_m` is computed from node geometry.
pub fn network_from_json(text: &str) -> Result<GeoNetwork, NetworkIoError> {
    let file: NetworkFile = serde_json::from_str(text)?;
    let lonlat: Vec<(f64, f64)> = file.nodes.iter().map(|n| (n.lon, n.lat)).collect();
    let projection = Projection::centered_on(&lonlat);
    let nodes: Vec<Node> = file
        .nodes
        .iter()
        .map(|n| {
            let (x, y) = projection.to_meters(n.lon, n.lat);
            Node {
                id: NodeId(n.id),
                x,
                y,
            }
        })
        .collect();
    let pos: BTreeMap<u32, (f64, f64)> = nodes.iter().map(|n| (n.id.0, (n.x, n.y))).collect();
    let segments: Vec<RoadSegment> = file
        .segments
        .iter()
        .map(|s| {
            let len = s.len_m.unwrap_or_else(|| {
                match (pos.get(&s.from), pos.get(&s.to)) {
                    (Some(a), Some(b)) => ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
                    _ => 0.0, // caught by endpoint validation
                }
            });
            RoadSegment {
                id: SegmentId(s.id),
                from: NodeId(s.from),
                to: NodeId(s.to),
                len,
                v_max: s.vmax_mps,
                k_max: s.kmax_vpm,
                v_est: s.vmax_mps,
                lanes: s.lanes,
            }
        })
        .collect();
    Ok(GeoNetwork {
        net: RoadNetwork::new(nodes, segments)?,
        projection,
    })
}

pub fn network_to_json(geo: &GeoNetwork) -> String {
    let file = NetworkFile {
        nodes: geo
            .net
            .nodes()
            .iter()
            .map(|n| {
                let (lon, lat) = geo.projection.to_lonlat(n.x, n.y);
                NodeFileEntry {
                    id: n.id.0,
                    lon,
                    lat,
                }
            })
            .collect(),
        segments: geo
            .net
            .segments()
            .iter()
            .map(|s| SegmentFileEntry {
                id: s.id.0,
                from: s.from.0,
                to: s.to.0,
                len_m: Some(s.len),
                vmax_mps: s.v_max,
                kmax_vpm: s.k_max,
                lanes: s.lanes,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("network serializes")
}

/// Builds an `n x n` grid network in planar meters: every adjacent node pair
/// is connected by one directed segment each way.
pub fn grid_network(n: usize, spacing_m: f64, v_max: f64, k_max: f64) -> RoadNetwork {
    let mut nodes = Vec::new();
    for r in 0..n {
        for c in 0..n {
            nodes.push(Node {
                id: NodeId((r * n + c) as u32),
                x: c as f64 * spacing_m,
                y: r as f64 * spacing_m,
            });
        }
    }
    let mut segments = Vec::new();
    let mut next = 0u32;
    let mut link = |from: u32, to: u32, segments: &mut Vec<RoadSegment>| {
        segments.push(RoadSegment {
            id: SegmentId(next),
            from: NodeId(from),
            to: NodeId(to),
            len: spacing_m,
            v_max,
            k_max,
            v_est: v_max,
            lanes: 1,
        });
        next += 1;
    };
    for r in 0..n {
        for c in 0..n {
            let id = (r * n + c) as u32;
            if c + 1 < n {
                link(id, id + 1, &mut segments);
                link(id + 1, id, &mut segments);
            }
            if r + 1 < n {
                link(id, id + n as u32, &mut segments);
                link(id + n as u32, id, &mut segments);
            }
        }
    }
    RoadNetwork::new(nodes, segments).expect("grid is valid")
}
