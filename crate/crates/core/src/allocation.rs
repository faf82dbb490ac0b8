//! Decomposition of a path's aggregate travel time into free-flow,
//! congestion, and stopping components per segment.
//!
//! The budget `T_a` (the GPS pair gap) splits as `T_f + T_c + T_s = T_a`.
//! Congestion time is attributed by integrating the congestion-probability
//! density over the path congestion level `w`, stopping time by each
//! segment's single-stop probability.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("congestion level w={0} outside (0, w_max]")]
    DomainError(f64),
    #[error("empty segment list")]
    EmptyPath,
}

/// Per-segment state the allocator needs.
#[derive(Debug, Clone, Copy)]
pub struct AllocSegment {
    pub len: f64,
    /// Free-flow travel time, seconds.
    pub t_min: f64,
    /// Current estimated speed, m/s.
    pub v_est: f64,
    /// Greenshield density at `v_est`, vehicles/meter.
    pub k: f64,
    pub k_max: f64,
}

#[derive(Debug, Clone)]
pub struct AllocationContext {
    pub segments: Vec<AllocSegment>,
    /// Time budget `T_a` to distribute, seconds.
    pub t_a: f64,
    /// `T_c,max` of the preceding pair's path (0 when none).
    pub prev_tc_max: f64,
    /// `T_a` of the preceding pair's path (0 when none).
    pub prev_ta: f64,
    /// Stopping-likelihood weighting factor.
    pub beta: f64,
}

pub const DEFAULT_BETA: f64 = 0.5;
/// Simpson node count (odd) on the `w` integration interval.
const SIMPSON_NODES: usize = 129;

impl AllocationContext {
    pub fn new(segments: Vec<AllocSegment>, t_a: f64) -> Self {
        Self {
            segments,
            t_a,
            prev_tc_max: 0.0,
            prev_ta: 0.0,
            beta: DEFAULT_BETA,
        }
    }

    pub fn with_previous(mut self, prev_tc_max: f64, prev_ta: f64) -> Self {
        self.prev_tc_max = prev_tc_max;
        self.prev_ta = prev_ta;
        self
    }

    /// Total free-flow time `T_f`.
    pub fn t_f(&self) -> f64 {
        self.segments.iter().map(|s| s.t_min).sum()
    }

    /// `T_c,max = T_a - T_f`, clamped at 0 for budgets at/below free flow.
    pub fn tc_max(&self) -> f64 {
        (self.t_a - self.t_f()).max(0.0)
    }

    /// Maximum path congestion level `w_max = T_c,max / (T_c,max + T_f)`.
    pub fn w_max(&self) -> f64 {
        let tc = self.tc_max();
        if tc <= 0.0 {
            0.0
        } else {
            tc / (tc + self.t_f())
        }
    }
}

/// Probability that congestion occurred on the path at level `w`:
/// `min{1, (T_c,max_prev + T_c,max) / (T_a_prev + T_a) · 1/w}`.
pub fn congestion_probability(ctx: &AllocationContext, w: f64) -> Result<f64, AllocationError> {
    if w <= 0.0 {
        return Err(AllocationError::DomainError(w));
    }
    let ratio = (ctx.prev_tc_max + ctx.tc_max()) / (ctx.prev_ta + ctx.t_a);
    Ok((ratio / w).min(1.0))
}

/// Stopping likelihood `beta * w + (1 - beta) * k / k_max`.
pub fn stopping_likelihood(segment: &AllocSegment, w: f64, beta: f64) -> f64 {
    beta * w + (1.0 - beta) * segment.k / segment.k_max
}

/// Probability the (at most one) stop happened on segment `index`:
/// `L_i(w) * prod_{j != i} (1 - L_j(w))`.
pub fn stop_probability(ctx: &AllocationContext, index: usize, w: f64) -> f64 {
    let mut p = stopping_likelihood(&ctx.segments[index], w, ctx.beta);
    for (j, seg) in ctx.segments.iter().enumerate() {
        if j != index {
            p *= 1.0 - stopping_likelihood(seg, w, ctx.beta);
        }
    }
    p
}

#[derive(Debug, Clone)]
pub struct AllocationResult {
    /// Per-segment (free-flow, congestion, stopping) seconds.
    pub components: Vec<(f64, f64, f64)>,
    /// Whether the tiny-negative `T_s` clamp fired.
    pub clamped: bool,
}

impl AllocationResult {
    pub fn segment_time(&self, i: usize) -> f64 {
        let (f, c, s) = self.components[i];
        f + c + s
    }

    pub fn total(&self) -> f64 {
        self.components.iter().map(|(f, c, s)| f + c + s).sum()
    }
}

/// Composite-Simpson weights over `[a, b]` with `n` (odd) nodes.
fn simpson_nodes(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    debug_assert!(n >= 3 && n % 2 == 1);
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + i as f64 * h, w * h / 3.0)
        })
        .collect()
}

/// Allocates `ctx.t_a` over the path segments.
///
/// Degenerate case `w_max == 0` (budget equals free flow) returns pure
/// free-flow components. The congestion share integrates
/// `tau_f * w/(1-w) * P_c(w) * sum_e P_{s,e}(w) / Q_s`; the stopping share
/// distributes `T_s = T_a - T_f - T_c` by each segment's stop probability.
pub fn allocate(ctx: &AllocationContext) -> Result<AllocationResult, AllocationError> {
    allocate_with_nodes(ctx, SIMPSON_NODES)
}

/// Same as [`allocate`] with an explicit quadrature node count (odd);
/// exposed so tests can run a refined oracle.
pub fn allocate_with_nodes(
    ctx: &AllocationContext,
    nodes: usize,
) -> Result<AllocationResult, AllocationError> {
    if ctx.segments.is_empty() {
        return Err(AllocationError::EmptyPath);
    }
    let n = ctx.segments.len();
    let w_max = ctx.w_max();
    if w_max <= 0.0 {
        return Ok(AllocationResult {
            components: ctx.segments.iter().map(|s| (s.t_min, 0.0, 0.0)).collect(),
            clamped: false,
        });
    }

    let eps = 1e-6 * w_max;
    let grid = simpson_nodes(eps, w_max, nodes);

    // Q_s and the shared congestion integral; per-segment stop integrals.
    let mut q_s = 0.0;
    let mut congestion_integral = 0.0;
    let mut stop_integrals = vec![0.0; n];
    for &(w, wt) in &grid {
        let p_c = congestion_probability(ctx, w)?;
        let mut sum_ps = 0.0;
        for i in 0..n {
            let p_s = stop_probability(ctx, i, w);
            sum_ps += p_s;
            stop_integrals[i] += wt * p_c * p_s;
        }
        q_s += wt * p_c * sum_ps;
        congestion_integral += wt * (w / (1.0 - w)) * p_c * sum_ps;
    }

    if q_s <= 0.0 {
        // No stopping mass anywhere (all likelihoods zero): the whole excess
        // over free flow is congestion time, spread proportionally to tau_f.
        let t_f = ctx.t_f();
        let excess = ctx.t_a - t_f;
        return Ok(AllocationResult {
            components: ctx
                .segments
                .iter()
                .map(|s| (s.t_min, excess * s.t_min / t_f, 0.0))
                .collect(),
            clamped: false,
        });
    }

    // tau_{e,c} = tau_{e,f} * (1/Q_s) * integral of w/(1-w) * P_c * sum P_s.
    let congestion_factor = congestion_integral / q_s;
    let tau_c: Vec<f64> = ctx
        .segments
        .iter()
        .map(|s| s.t_min * congestion_factor)
        .collect();
    let t_c: f64 = tau_c.iter().sum();
    let mut t_s = ctx.t_a - ctx.t_f() - t_c;
    let mut clamped = false;
    let mut scale_c = 1.0;
    if t_s < 0.0 {
        // Quadrature error can leave a tiny negative remainder; clamp and
        // rescale tau_c to keep the sum invariant.
        clamped = true;
        scale_c = (ctx.t_a - ctx.t_f()) / t_c;
        t_s = 0.0;
    }

    let components = ctx
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let c = tau_c[i] * scale_c;
            let stop = t_s * stop_integrals[i] / q_s;
            (s.t_min, c, stop)
        })
        .collect();
    Ok(AllocationResult {
        components,
        clamped,
    })
}
