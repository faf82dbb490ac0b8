//! Dense two-phase primal simplex.
//!
//! Minimizes `c·x` over `x ≥ 0` subject to a mix of `≤ / = / ≥` rows. This is
//! the one LP routine in the repo; basis pursuit (signal module) and the
//! fused-lasso initial estimate (estimation module) both reduce to it.
//! Pivoting is Dantzig with smallest-index tie-breaks, falling back to Bland's
//! rule after a long degenerate stall, so solves are deterministic and
//! terminate.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
struct Row {
    terms: Vec<(usize, f64)>,
    rel: Relation,
    rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("infeasible: phase-1 residual {residual:.3e}")]
    Infeasible { residual: f64 },
    #[error("objective unbounded below")]
    Unbounded,
    #[error("iteration cap {cap} hit (residual {residual:.3e})")]
    IterationLimit { cap: usize, residual: f64 },
}

const EPS: f64 = 1e-9;

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn add_constraint(&mut self, terms: &[(usize, f64)], rel: Relation, rhs: f64) {
        debug_assert!(terms.iter().all(|&(j, _)| j < self.num_vars));
        self.rows.push(Row {
            terms: terms.to_vec(),
            rel,
            rhs,
        });
    }

    pub fn solve(&self, max_iters: usize) -> Result<LpSolution, LpError> {
        Tableau::build(self).solve(max_iters)
    }
}

struct Tableau {
    rows: usize,
    cols: usize, // structural + slack/surplus + artificial
    data: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    num_structural: usize,
    first_artificial: usize,
    cost: Vec<f64>,        // reduced phase-2 costs
    phase1_cost: Vec<f64>, // reduced phase-1 costs
    phase1_shift: f64,
    cost_shift: f64,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.num_vars;

        // Pre-compute the column layout: slacks for inequality rows, then one
        // artificial per row lacking a basic column.
        let mut slack_col = vec![usize::MAX; m];
        let mut next_col = n;
        let mut normalized = Vec::with_capacity(m);
        for (i, row) in lp.rows.iter().enumerate() {
            let flip = row.rhs < 0.0;
            let rel = match (row.rel, flip) {
                (Relation::Eq, _) => Relation::Eq,
                (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
                (Relation::Ge, false) | (Relation::Le, true) => Relation::Ge,
            };
            if rel != Relation::Eq {
                slack_col[i] = next_col;
                next_col += 1;
            }
            normalized.push((rel, flip));
        }
        let first_artificial = next_col;
        let mut art_col = vec![usize::MAX; m];
        for (i, &(rel, _)) in normalized.iter().enumerate() {
            if rel != Relation::Le {
                art_col[i] = next_col;
                next_col += 1;
            }
        }
        let cols = next_col;

        let mut data = vec![0.0; m * cols];
        let mut rhs = vec![0.0; m];
        let mut basis = vec![usize::MAX; m];
        for (i, row) in lp.rows.iter().enumerate() {
            let (rel, flip) = normalized[i];
            let sgn = if flip { -1.0 } else { 1.0 };
            rhs[i] = sgn * row.rhs;
            for &(j, a) in &row.terms {
                data[i * cols + j] += sgn * a;
            }
            match rel {
                Relation::Le => {
                    data[i * cols + slack_col[i]] = 1.0;
                    basis[i] = slack_col[i];
                }
                Relation::Ge => {
                    data[i * cols + slack_col[i]] = -1.0;
                    data[i * cols + art_col[i]] = 1.0;
                    basis[i] = art_col[i];
                }
                Relation::Eq => {
                    data[i * cols + art_col[i]] = 1.0;
                    basis[i] = art_col[i];
                }
            }
        }

        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&lp.objective);

        // Phase-1 objective: sum of artificials, reduced against the initial
        // basis (unit cost on artificial columns, then subtract each
        // artificial-basic row so basic columns price to zero).
        let mut phase1_cost = vec![0.0; cols];
        for c in phase1_cost.iter_mut().take(cols).skip(first_artificial) {
            *c = 1.0;
        }
        let mut phase1_shift = 0.0;
        for i in 0..m {
            if basis[i] >= first_artificial {
                for j in 0..cols {
                    phase1_cost[j] -= data[i * cols + j];
                }
                phase1_shift -= rhs[i];
            }
        }

        Self {
            rows: m,
            cols,
            data,
            rhs,
            basis,
            num_structural: n,
            first_artificial,
            cost,
            phase1_cost,
            phase1_shift,
            cost_shift: 0.0,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let cols = self.cols;
        let inv = 1.0 / self.at(pr, pc);
        for j in 0..cols {
            self.data[pr * cols + j] *= inv;
        }
        self.rhs[pr] *= inv;
        self.data[pr * cols + pc] = 1.0;
        for i in 0..self.rows {
            if i == pr {
                continue;
            }
            let f = self.at(i, pc);
            if f == 0.0 {
                continue;
            }
            for j in 0..cols {
                self.data[i * cols + j] -= f * self.data[pr * cols + j];
            }
            self.data[i * cols + pc] = 0.0;
            self.rhs[i] -= f * self.rhs[pr];
        }
        let pr_row_start = pr * cols;
        for (costs, shift) in [
            (&mut self.cost, &mut self.cost_shift),
            (&mut self.phase1_cost, &mut self.phase1_shift),
        ] {
            let f = costs[pc];
            if f != 0.0 {
                for j in 0..cols {
                    costs[j] -= f * self.data[pr_row_start + j];
                }
                costs[pc] = 0.0;
                *shift -= f * self.rhs[pr];
            }
        }
        self.basis[pr] = pc;
    }

    /// One simplex phase; returns Ok(true) when optimal, Ok(false) on
    /// iteration exhaustion.
    fn run(&mut self, phase1: bool, iters: &mut usize, max_iters: usize) -> Result<bool, LpError> {
        let mut stall = 0usize;
        let mut bland = false;
        loop {
            if *iters >= max_iters {
                return Ok(false);
            }
            // Phase 2 never prices artificial columns back in.
            let limit = if phase1 {
                self.cols
            } else {
                self.first_artificial
            };
            let costs: &[f64] = if phase1 { &self.phase1_cost } else { &self.cost };
            let pc = if bland {
                costs.iter().take(limit).position(|&c| c < -EPS)
            } else {
                let mut best = None;
                let mut best_val = -EPS;
                for (j, &c) in costs.iter().enumerate().take(limit) {
                    if c < best_val {
                        best_val = c;
                        best = Some(j);
                    }
                }
                best
            };
            let Some(pc) = pc else { return Ok(true) };

            let mut pr: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_key = usize::MAX;
            for i in 0..self.rows {
                let a = self.at(i, pc);
                if a > EPS {
                    let ratio = self.rhs[i].max(0.0) / a;
                    let key = if bland { self.basis[i] } else { i };
                    if ratio < best_ratio - 1e-12
                        || (ratio <= best_ratio + 1e-12 && key < best_key)
                    {
                        best_ratio = ratio;
                        best_key = key;
                        pr = Some(i);
                    }
                }
            }
            let Some(pr) = pr else {
                if phase1 {
                    // Phase-1 objective is bounded below by 0; a missing pivot
                    // row only happens through roundoff. Stop the phase.
                    return Ok(true);
                }
                return Err(LpError::Unbounded);
            };

            if best_ratio < 1e-12 {
                stall += 1;
                if stall > 200 {
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }
            self.pivot(pr, pc);
            *iters += 1;
        }
    }

    fn solve(mut self, max_iters: usize) -> Result<LpSolution, LpError> {
        let mut iters = 0usize;
        let needs_phase1 = self.basis.iter().any(|&b| b >= self.first_artificial);
        if needs_phase1 {
            let done = self.run(true, &mut iters, max_iters)?;
            let residual = -self.phase1_shift;
            if !done {
                return Err(LpError::IterationLimit {
                    cap: max_iters,
                    residual,
                });
            }
            if residual.abs() > 1e-7 * (1.0 + self.rhs.iter().map(|v| v.abs()).sum::<f64>()) {
                return Err(LpError::Infeasible { residual });
            }
            self.evict_artificials();
        }
        let done = self.run(false, &mut iters, max_iters)?;
        if !done {
            return Err(LpError::IterationLimit {
                cap: max_iters,
                residual: 0.0,
            });
        }
        let mut x = vec![0.0; self.num_structural];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.num_structural {
                x[b] = self.rhs[i].max(0.0);
            }
        }
        Ok(LpSolution {
            x,
            objective: -self.cost_shift,
        })
    }

    /// Pivots zero-level artificial variables out of the basis so phase 2
    /// never touches them. Rows that are all zero over real columns are
    /// redundant; their artificial stays basic at level 0 harmlessly.
    fn evict_artificials(&mut self) {
        for i in 0..self.rows {
            if self.basis[i] < self.first_artificial {
                continue;
            }
            if let Some(pc) = (0..self.first_artificial).find(|&j| self.at(i, j).abs() > 1e-7) {
                self.pivot(i, pc);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-7 * (1.0 + b.abs())
    }

    #[test]
    fn simple_min() {
        // min -x - 2y st x + y <= 4, x <= 2
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, -1.0);
        lp.set_objective(1, -2.0);
        lp.add_constraint(&[(0, 1.0), (1, 1.0)], Relation::Le, 4.0);
        lp.add_constraint(&[(0, 1.0)], Relation::Le, 2.0);
        let s = lp.solve(1000).unwrap();
        assert!(close(s.objective, -8.0), "{s:?}");
        assert!(close(s.x[1], 4.0));
    }

    #[test]
    fn equality_and_ge() {
        // min x + y st x + 2y = 3, x >= 1
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.add_constraint(&[(0, 1.0), (1, 2.0)], Relation::Eq, 3.0);
        lp.add_constraint(&[(0, 1.0)], Relation::Ge, 1.0);
        let s = lp.solve(1000).unwrap();
        assert!(close(s.objective, 2.0), "{s:?}");
        assert!(close(s.x[0], 1.0));
        assert!(close(s.x[1], 1.0));
    }

    #[test]
    fn negative_rhs_normalized() {
        // min x st -x <= -5  (x >= 5)
        let mut lp = LinearProgram::new(1);
        lp.set_objective(0, 1.0);
        lp.add_constraint(&[(0, -1.0)], Relation::Le, -5.0);
        let s = lp.solve(1000).unwrap();
        assert!(close(s.x[0], 5.0));
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(0, 1.0);
        lp.add_constraint(&[(0, 1.0)], Relation::Le, 1.0);
        lp.add_constraint(&[(0, 1.0)], Relation::Ge, 2.0);
        assert!(matches!(lp.solve(1000), Err(LpError::Infeasible { .. })));
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(0, -1.0);
        assert!(matches!(lp.solve(1000), Err(LpError::Unbounded)));
    }

    #[test]
    fn degenerate_terminates() {
        let mut lp = LinearProgram::new(3);
        for j in 0..3 {
            lp.set_objective(j, -1.0);
        }
        lp.add_constraint(&[(0, 1.0)], Relation::Le, 0.0);
        lp.add_constraint(&[(0, 1.0), (1, 1.0)], Relation::Le, 0.0);
        lp.add_constraint(&[(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Le, 1.0);
        let s = lp.solve(1000).unwrap();
        assert!(close(s.objective, -1.0));
    }

    #[test]
    fn redundant_equalities() {
        // x + y = 2 stated twice; one row is redundant but solvable.
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.add_constraint(&[(0, 1.0), (1, 1.0)], Relation::Eq, 2.0);
        lp.add_constraint(&[(0, 1.0), (1, 1.0)], Relation::Eq, 2.0);
        let s = lp.solve(1000).unwrap();
        assert!(close(s.x[0], 0.0));
        assert!(close(s.x[1], 2.0));
    }

    #[test]
    fn l1_via_split_variables() {
        // min |z| st z = -3 with z = u - v: u,v >= 0. Optimum 3.
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.add_constraint(&[(0, 1.0), (1, -1.0)], Relation::Eq, -3.0);
        let s = lp.solve(1000).unwrap();
        assert!(close(s.objective, 3.0));
        assert!(close(s.x[1], 3.0));
    }
}
