//! Bounded revised simplex on `A x + s = 0`, `l ≤ (x, s) ≤ u`.
//!
//! Row `i` with relation `a_i x ~ b_i` gets a logical variable `s_i = −a_i x`
//! with bounds derived from the relation, so the all-logical basis is the
//! identity. The dual simplex with dual steepest-edge pricing and a bound-flipping
//! Harris ratio test does the main work; the primal simplex handles phase 2 after
//! a zero-cost dual phase 1 and cleans up small dual infeasibilities. A
//! repeated basis triggers Bland's rule until progress resumes.

use std::collections::HashSet;

use super::lu::{Csc, Factor};
use super::SolveOptions;
use crate::lp::{LinearProgram, Relation};

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;
/// Relative size of the cost perturbation.
const PERTURBATION: f64 = 5e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Nb {
    Basic,
    Lower,
    Upper,
    Free,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Final state handed back to the driver.
pub(crate) struct Solution {
    pub outcome: Outcome,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
}

struct RowMajor {
    start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) struct Engine<'o> {
    n: usize,
    m: usize,
    a: Csc,
    rows: RowMajor,
    lower: Vec<f64>,
    upper: Vec<f64>,
    true_cost: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    y: Vec<f64>,
    state: Vec<Nb>,
    head: Vec<usize>,
    pos: Vec<usize>,
    weight: Vec<f64>,
    /// Squared primal infeasibility by position, zero within tolerance.
    infeas: Vec<f64>,
    infeas_stale: bool,
    factor: Factor,
    opts: &'o SolveOptions,
    iterations: usize,
    // scratch
    rho: Vec<f64>,
    rho_nz: Vec<usize>,
    col: Vec<f64>,
    col_nz: Vec<usize>,
    tau: Vec<f64>,
    row: Vec<f64>,
    row_nz: Vec<usize>,
    row_mark: Vec<bool>,
    /// `(ratio, column)` breakpoints of the dual ratio test.
    cands: Vec<(f64, usize)>,
    flips: Vec<usize>,
    flip: Vec<f64>,
    flip_nz: Vec<usize>,
    // anti-cycling
    basis_hash: u64,
    seen: HashSet<u64>,
    bland: bool,
}

impl<'o> Engine<'o> {
    pub fn new(lp: &LinearProgram, opts: &'o SolveOptions) -> Self {
        let n = lp.num_columns();
        let m = lp.num_rows();
        let total = n + m;

        let mut counts = vec![0usize; n];
        for r in &lp.rows {
            for &(j, _) in &r.coefficients {
                counts[j] += 1;
            }
        }
        let mut start = vec![0usize; total + 1];
        for j in 0..n {
            start[j + 1] = start[j] + counts[j];
        }
        for i in 0..m {
            start[n + i + 1] = start[n + i] + 1;
        }
        let nnz = start[total];
        let mut row_idx = vec![0usize; nnz];
        let mut val = vec![0.0; nnz];
        let mut next = start.clone();
        let mut rstart = vec![0usize; m + 1];
        let mut rcol = Vec::with_capacity(nnz - m);
        let mut rval = Vec::with_capacity(nnz - m);
        for (i, r) in lp.rows.iter().enumerate() {
            for &(j, v) in &r.coefficients {
                row_idx[next[j]] = i;
                val[next[j]] = v;
                next[j] += 1;
                rcol.push(j);
                rval.push(v);
            }
            rstart[i + 1] = rcol.len();
            row_idx[start[n + i]] = i;
            val[start[n + i]] = 1.0;
        }
        let a = Csc {
            start,
            row: row_idx,
            val,
        };

        let mut lower = Vec::with_capacity(total);
        let mut upper = Vec::with_capacity(total);
        let mut true_cost = Vec::with_capacity(total);
        for c in &lp.columns {
            lower.push(c.lower);
            upper.push(c.upper);
            true_cost.push(c.cost);
        }
        for r in &lp.rows {
            let (lo, hi) = match r.relation {
                Relation::Le => (-r.rhs, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, -r.rhs),
                Relation::Eq => (-r.rhs, -r.rhs),
            };
            lower.push(lo);
            upper.push(hi);
            true_cost.push(0.0);
        }

        let mut head: Vec<usize> = (n..total).collect();
        let factor = Factor::new(&a, n, &mut head).factor;
        let mut pos = vec![NONE; total];
        for (p, &j) in head.iter().enumerate() {
            pos[j] = p;
        }
        let basis_hash = head.iter().fold(0u64, |h, &j| h ^ mix(j as u64));

        Engine {
            n,
            m,
            a,
            rows: RowMajor {
                start: rstart,
                col: rcol,
                val: rval,
            },
            lower,
            upper,
            cost: true_cost.clone(),
            true_cost,
            x: vec![0.0; total],
            d: vec![0.0; total],
            y: vec![0.0; m],
            state: vec![Nb::Basic; total],
            head,
            pos,
            weight: vec![1.0; m],
            infeas: vec![0.0; m],
            infeas_stale: true,
            factor,
            opts,
            iterations: 0,
            rho: vec![0.0; m],
            rho_nz: Vec::new(),
            col: vec![0.0; m],
            col_nz: Vec::new(),
            tau: vec![0.0; m],
            row: vec![0.0; total],
            row_nz: Vec::new(),
            row_mark: vec![false; total],
            cands: Vec::new(),
            flips: Vec::new(),
            flip: vec![0.0; m],
            flip_nz: Vec::new(),
            basis_hash,
            seen: HashSet::new(),
            bland: false,
        }
    }

    fn place_nonbasic(&mut self, j: usize) {
        let (l, u, c) = (self.lower[j], self.upper[j], self.cost[j]);
        let st = if l == u {
            Nb::Fixed
        } else if c > 0.0 && l.is_finite() {
            Nb::Lower
        } else if c < 0.0 && u.is_finite() {
            Nb::Upper
        } else if l.is_finite() {
            Nb::Lower
        } else if u.is_finite() {
            Nb::Upper
        } else {
            Nb::Free
        };
        self.set_nonbasic(j, st);
    }

    fn set_nonbasic(&mut self, j: usize, st: Nb) {
        self.state[j] = st;
        self.x[j] = match st {
            Nb::Lower | Nb::Fixed => self.lower[j],
            Nb::Upper => self.upper[j],
            Nb::Free => 0.0,
            Nb::Basic => unreachable!(),
        };
    }

    /// Whether the current nonbasic placement is dual feasible for `cost`.
    fn dual_infeasibility(&self) -> f64 {
        let tol = self.opts.optimality_tolerance;
        let mut worst = 0.0f64;
        for j in 0..self.n + self.m {
            let d = self.d[j];
            let v = match self.state[j] {
                Nb::Lower => -d,
                Nb::Upper => d,
                Nb::Free => d.abs(),
                Nb::Basic | Nb::Fixed => 0.0,
            };
            if v > tol {
                worst = worst.max(v);
            }
        }
        worst
    }

    fn primal_infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        if x < self.lower[j] {
            self.lower[j] - x
        } else if x > self.upper[j] {
            x - self.upper[j]
        } else {
            0.0
        }
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.head
            .iter()
            .map(|&j| self.primal_infeasibility(j))
            .fold(0.0, f64::max)
    }

    fn refactor(&mut self) {
        let old = self.head.clone();
        let done = Factor::new(&self.a, self.n, &mut self.head);
        self.factor = done.factor;
        let weight: Vec<f64> = done.origin.iter().map(|&p| self.weight[p]).collect();
        self.weight = weight;
        for (p, r) in done.repairs {
            let out = old[p];
            let slack = self.n + r;
            self.pos[out] = NONE;
            self.state[slack] = Nb::Basic;
            self.place_nonbasic(out);
            self.weight[r] = 1.0;
            self.basis_hash ^= mix(out as u64) ^ mix(slack as u64);
        }
        for (p, &j) in self.head.iter().enumerate() {
            self.pos[j] = p;
        }
        self.recompute_primal();
        self.recompute_duals();
    }

    fn recompute_primal(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.state[j] == Nb::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            let (rs, vs) = self.a.col(j);
            for (&i, &v) in rs.iter().zip(vs) {
                rhs[i] -= v * xj;
            }
        }
        self.factor.ftran(&mut rhs);
        for p in 0..self.m {
            self.x[self.head[p]] = rhs[p];
        }
        self.infeas_stale = true;
    }

    fn update_infeasibility(&mut self, p: usize) {
        let inf = self.primal_infeasibility(self.head[p]);
        self.infeas[p] = if inf > self.opts.feasibility_tolerance {
            inf * inf
        } else {
            0.0
        };
    }

    fn refresh_infeasibility(&mut self) {
        for p in 0..self.m {
            self.update_infeasibility(p);
        }
        self.infeas_stale = false;
    }

    fn recompute_duals(&mut self) {
        let mut y = std::mem::take(&mut self.y);
        for p in 0..self.m {
            y[p] = self.cost[self.head[p]];
        }
        self.factor.btran(&mut y);
        for j in 0..self.n + self.m {
            if self.state[j] == Nb::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let (rs, vs) = self.a.col(j);
            let dot: f64 = rs.iter().zip(vs).map(|(&i, &v)| v * y[i]).sum();
            self.d[j] = self.cost[j] - dot;
        }
        self.y = y;
    }

    /// `rho = e_rᵀ B⁻¹` (by row) and its nonzero pattern.
    fn compute_rho(&mut self, r: usize) {
        self.rho.iter_mut().for_each(|v| *v = 0.0);
        self.rho[r] = 1.0;
        self.factor.btran(&mut self.rho);
        self.rho_nz.clear();
        for i in 0..self.m {
            if self.rho[i].abs() > 1e-14 {
                self.rho_nz.push(i);
            } else {
                self.rho[i] = 0.0;
            }
        }
    }

    /// Pivot row `alpha_r = rho A` over nonbasic columns.
    fn compute_row(&mut self) {
        for &j in &self.row_nz {
            self.row[j] = 0.0;
            self.row_mark[j] = false;
        }
        self.row_nz.clear();
        for &i in &self.rho_nz {
            let ri = self.rho[i];
            let slack = self.n + i;
            if self.state[slack] != Nb::Basic {
                if !self.row_mark[slack] {
                    self.row_mark[slack] = true;
                    self.row_nz.push(slack);
                }
                self.row[slack] += ri;
            }
            for k in self.rows.start[i]..self.rows.start[i + 1] {
                let j = self.rows.col[k];
                if self.state[j] == Nb::Basic {
                    continue;
                }
                if !self.row_mark[j] {
                    self.row_mark[j] = true;
                    self.row_nz.push(j);
                }
                self.row[j] += ri * self.rows.val[k];
            }
        }
    }

    /// `col = B⁻¹ a_q` (by position) and its nonzero pattern.
    fn compute_col(&mut self, q: usize) {
        for &p in &self.col_nz {
            self.col[p] = 0.0;
        }
        self.col_nz.clear();
        let (rs, vs) = self.a.col(q);
        for (&i, &v) in rs.iter().zip(vs) {
            self.col[i] = v;
            self.col_nz.push(i);
        }
        self.factor.ftran_sparse(&mut self.col, &mut self.col_nz);
        let col = &mut self.col;
        self.col_nz.retain(|&p| {
            if col[p].abs() > 1e-14 {
                true
            } else {
                col[p] = 0.0;
                false
            }
        });
    }

    /// Moves the columns in `flips` to their opposite bounds and updates the
    /// basic variables.
    fn apply_flips(&mut self) {
        for &p in &self.flip_nz {
            self.flip[p] = 0.0;
        }
        self.flip_nz.clear();
        for k in 0..self.flips.len() {
            let j = self.flips[k];
            let (st, step) = match self.state[j] {
                Nb::Lower => (Nb::Upper, self.upper[j] - self.lower[j]),
                Nb::Upper => (Nb::Lower, self.lower[j] - self.upper[j]),
                _ => unreachable!("only boxed columns flip"),
            };
            self.set_nonbasic(j, st);
            let (rs, vs) = self.a.col(j);
            for (&i, &v) in rs.iter().zip(vs) {
                if self.flip[i] == 0.0 {
                    self.flip_nz.push(i);
                }
                self.flip[i] += v * step;
            }
        }
        self.factor.ftran_sparse(&mut self.flip, &mut self.flip_nz);
        for k in 0..self.flip_nz.len() {
            let p = self.flip_nz[k];
            let j = self.head[p];
            self.x[j] -= self.flip[p];
            self.update_infeasibility(p);
        }
    }

    fn pivot(&mut self, r: usize, q: usize, leaving_state: Nb) {
        let p = self.head[r];
        self.factor.update(r, &self.col, &self.col_nz);
        self.head[r] = q;
        self.pos[q] = r;
        self.state[q] = Nb::Basic;
        self.pos[p] = NONE;
        self.set_nonbasic(p, leaving_state);
        self.d[q] = 0.0;
        self.basis_hash ^= mix(p as u64) ^ mix(q as u64);
        self.iterations += 1;
    }

    /// Tracks degenerate stretches; switches to Bland's rule on a repeated basis.
    fn note_progress(&mut self, progressed: bool) {
        if progressed {
            self.seen.clear();
            self.bland = false;
        } else {
            if !self.seen.insert(self.basis_hash) {
                self.bland = true;
            }
            if self.seen.len() > 200_000 {
                self.seen.clear();
            }
        }
    }

    fn limit_reached(&self) -> bool {
        self.iterations >= self.opts.max_iterations
    }

    /// Dual simplex from a dual-feasible basis.
    pub fn dual(&mut self) -> Outcome {
        let dtol = self.opts.optimality_tolerance;
        let mut retried = false;
        loop {
            if self.limit_reached() {
                return Outcome::IterationLimit;
            }
            if self.factor.num_updates() >= self.opts.refactor_interval {
                self.refactor();
            }

            // Leaving row.
            if self.infeas_stale {
                self.refresh_infeasibility();
            }
            let mut r = NONE;
            if self.bland {
                for p in 0..self.m {
                    if self.infeas[p] > 0.0 && (r == NONE || self.head[p] < self.head[r]) {
                        r = p;
                    }
                }
            } else {
                let mut best = 0.0;
                for (p, (&v, &w)) in self.infeas.iter().zip(&self.weight).enumerate() {
                    if v > best * w {
                        best = v / w;
                        r = p;
                    }
                }
            }
            if r == NONE {
                return Outcome::Optimal;
            }
            let leave = self.head[r];
            let to_lower = self.x[leave] < self.lower[leave];
            let delta = if to_lower {
                self.x[leave] - self.lower[leave]
            } else {
                self.x[leave] - self.upper[leave]
            };

            self.compute_rho(r);
            self.compute_row();

            // Ratio test over d_j + t·ã_j, ã = ±alpha_r.
            let sign = if to_lower { 1.0 } else { -1.0 };
            let ratio_of = |state: Nb, d: f64, at: f64| -> Option<(f64, f64)> {
                match state {
                    Nb::Lower if at < -PIVOT_TOL => Some((d / -at, (d + dtol) / -at)),
                    Nb::Upper if at > PIVOT_TOL => Some((-d / at, (-d + dtol) / at)),
                    Nb::Free if at.abs() > PIVOT_TOL => Some((d.abs() / at.abs(), (d.abs() + dtol) / at.abs())),
                    _ => None,
                }
            };
            let mut q = NONE;
            if self.bland {
                let mut best_ratio = f64::INFINITY;
                for &j in &self.row_nz {
                    if let Some((ratio, _)) = ratio_of(self.state[j], self.d[j], sign * self.row[j]) {
                        let ratio = ratio.max(0.0);
                        if ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && j < q) {
                            best_ratio = ratio.min(best_ratio);
                            q = j;
                        }
                    }
                }
            } else {
                // Bound flipping: pass breakpoints of boxed columns while the
                // dual objective keeps improving, then pick the entering
                // column among the rest with a Harris tolerance.
                self.cands.clear();
                for &j in &self.row_nz {
                    if let Some((ratio, _)) = ratio_of(self.state[j], self.d[j], sign * self.row[j]) {
                        self.cands.push((ratio.max(0.0), j));
                    }
                }
                self.cands
                    .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut slope = delta.abs();
                let floor = 1e-12 * (1.0 + slope);
                let mut first = 0;
                self.flips.clear();
                while first < self.cands.len() {
                    let j = self.cands[first].1;
                    let range = self.upper[j] - self.lower[j];
                    let after = slope - (self.row[j] * range).abs();
                    if !(range.is_finite() && after > floor) {
                        break;
                    }
                    slope = after;
                    self.flips.push(j);
                    first += 1;
                }
                if first == self.cands.len() {
                    self.flips.clear();
                }
                let rest = &self.cands[first..];
                let mut bound = f64::INFINITY;
                for &(_, j) in rest {
                    let (_, relaxed) = ratio_of(self.state[j], self.d[j], sign * self.row[j]).expect("candidate");
                    bound = bound.min(relaxed);
                }
                let mut best_alpha = 0.0;
                for &(ratio, j) in rest {
                    let at = self.row[j].abs();
                    if ratio <= bound && (at > best_alpha || (at == best_alpha && j < q)) {
                        best_alpha = at;
                        q = j;
                    }
                }
            }
            if q == NONE {
                if !retried && self.factor.num_updates() > 0 {
                    retried = true;
                    self.refactor();
                    continue;
                }
                return Outcome::Infeasible;
            }
            retried = false;
            if !self.flips.is_empty() {
                self.apply_flips();
            }
            let delta = if to_lower {
                self.x[leave] - self.lower[leave]
            } else {
                self.x[leave] - self.upper[leave]
            };

            self.compute_col(q);
            let alpha_rq = self.col[r];
            let alpha_row = self.row[q];
            if alpha_rq.abs() < PIVOT_TOL || (alpha_rq - alpha_row).abs() > 1e-7 * (1.0 + alpha_row.abs()) {
                if self.factor.num_updates() > 0 {
                    self.refactor();
                    continue;
                }
                if alpha_rq.abs() < PIVOT_TOL {
                    return Outcome::Infeasible;
                }
            }

            // Dual step.
            let at_q = sign * self.row[q];
            let t = (match self.state[q] {
                Nb::Lower => self.d[q] / -at_q,
                Nb::Upper => -self.d[q] / at_q,
                _ => self.d[q].abs() / at_q.abs(),
            })
            .max(0.0);
            if t != 0.0 {
                for &j in &self.row_nz {
                    self.d[j] += t * sign * self.row[j];
                }
            }
            let leave_d = sign * t;

            // Steepest-edge weights need B⁻¹ rho under the old basis.
            let w_r = self.rho_nz.iter().map(|&i| self.rho[i] * self.rho[i]).sum::<f64>();
            self.tau.copy_from_slice(&self.rho);
            self.factor.ftran(&mut self.tau);
            for &p in &self.col_nz {
                if p == r {
                    continue;
                }
                let k = self.col[p] / alpha_rq;
                let w = self.weight[p] + k * (k * w_r - 2.0 * self.tau[p]);
                self.weight[p] = w.max(1e-8);
            }
            self.weight[r] = (w_r / (alpha_rq * alpha_rq)).max(1e-8);

            // Primal step.
            let theta = delta / alpha_rq;
            self.x[q] += theta;
            for &p in &self.col_nz {
                let j = self.head[p];
                self.x[j] -= theta * self.col[p];
            }
            let leaving_state = if self.lower[leave] == self.upper[leave] {
                Nb::Fixed
            } else if to_lower {
                Nb::Lower
            } else {
                Nb::Upper
            };
            self.pivot(r, q, leaving_state);
            self.d[leave] = leave_d;
            for k in 0..self.col_nz.len() {
                self.update_infeasibility(self.col_nz[k]);
            }
            self.update_infeasibility(r);
            self.note_progress(t * delta.abs() > 1e-12);
        }
    }

    /// Primal simplex from a primal-feasible basis with Dantzig pricing.
    pub fn primal(&mut self) -> Outcome {
        let ptol = self.opts.feasibility_tolerance;
        let dtol = self.opts.optimality_tolerance;
        loop {
            if self.limit_reached() {
                return Outcome::IterationLimit;
            }
            if self.factor.num_updates() >= self.opts.refactor_interval {
                self.refactor();
            }

            let mut q = NONE;
            let mut best = 0.0;
            for j in 0..self.n + self.m {
                let d = self.d[j];
                let v = match self.state[j] {
                    Nb::Lower => -d,
                    Nb::Upper => d,
                    Nb::Free => d.abs(),
                    _ => 0.0,
                };
                if v <= dtol {
                    continue;
                }
                if self.bland {
                    q = j;
                    break;
                }
                if v > best {
                    best = v;
                    q = j;
                }
            }
            if q == NONE {
                return Outcome::Optimal;
            }
            let dir = if self.d[q] < 0.0 { 1.0 } else { -1.0 };

            self.compute_col(q);
            // x_B changes by g·θ with g = −dir·col.
            let limit = |e: &Self, p: usize, g: f64, slack: f64| -> Option<f64> {
                let j = e.head[p];
                if g < -PIVOT_TOL && e.lower[j].is_finite() {
                    Some((e.x[j] - e.lower[j] + slack) / -g)
                } else if g > PIVOT_TOL && e.upper[j].is_finite() {
                    Some((e.upper[j] - e.x[j] + slack) / g)
                } else {
                    None
                }
            };
            let mut r = NONE;
            if self.bland {
                let mut best_ratio = f64::INFINITY;
                for &p in &self.col_nz {
                    if let Some(ratio) = limit(self, p, -dir * self.col[p], 0.0) {
                        let ratio = ratio.max(0.0);
                        let j = self.head[p];
                        if ratio < best_ratio - 1e-12
                            || (ratio <= best_ratio + 1e-12 && (r == NONE || j < self.head[r]))
                        {
                            best_ratio = ratio.min(best_ratio);
                            r = p;
                        }
                    }
                }
            } else {
                let mut bound = f64::INFINITY;
                for &p in &self.col_nz {
                    if let Some(ratio) = limit(self, p, -dir * self.col[p], ptol) {
                        bound = bound.min(ratio);
                    }
                }
                let mut best_alpha = 0.0;
                for &p in &self.col_nz {
                    let g = -dir * self.col[p];
                    if let Some(ratio) = limit(self, p, g, 0.0) {
                        if ratio <= bound && g.abs() > best_alpha {
                            best_alpha = g.abs();
                            r = p;
                        }
                    }
                }
            }
            let step = if r == NONE {
                f64::INFINITY
            } else {
                limit(self, r, -dir * self.col[r], 0.0).unwrap().max(0.0)
            };
            let range = self.upper[q] - self.lower[q];
            if r == NONE && !range.is_finite() {
                return Outcome::Unbounded;
            }
            if range <= step {
                // Bound flip, no basis change.
                let theta = dir * range;
                self.x[q] += theta;
                for &p in &self.col_nz {
                    let j = self.head[p];
                    self.x[j] -= theta * self.col[p];
                }
                let st = if dir > 0.0 { Nb::Upper } else { Nb::Lower };
                self.set_nonbasic(q, st);
                self.iterations += 1;
                self.note_progress(true);
                continue;
            }

            let theta = dir * step;
            self.x[q] += theta;
            for &p in &self.col_nz {
                let j = self.head[p];
                self.x[j] -= theta * self.col[p];
            }
            let leave = self.head[r];
            let g = -dir * self.col[r];
            let leaving_state = if self.lower[leave] == self.upper[leave] {
                Nb::Fixed
            } else if g < 0.0 {
                Nb::Lower
            } else {
                Nb::Upper
            };

            self.compute_rho(r);
            self.compute_row();
            let alpha_rq = self.col[r];
            let mult = self.d[q] / alpha_rq;
            for &j in &self.row_nz {
                self.d[j] -= mult * self.row[j];
            }
            let progressed = step * self.d[q].abs() > 1e-12;
            self.pivot(r, q, leaving_state);
            self.d[leave] = -mult;
            self.note_progress(progressed);
        }
    }

    /// Shifts structural costs away from zero in the dual-feasible direction
    /// to break the heavy dual degeneracy of zero-cost dispatch columns. The
    /// shifts are a fixed function of the column index.
    fn perturb_costs(&mut self) {
        let cmax = self.true_cost[..self.n].iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let scale = if cmax > 1.0 { cmax.sqrt().sqrt() } else { 1.0 };
        for j in 0..self.n {
            let u = (mix(j as u64) >> 11) as f64 / (1u64 << 53) as f64;
            let eps = PERTURBATION * scale * (1.0 + self.true_cost[j].abs()) * (1.0 + u);
            match self.state[j] {
                Nb::Lower => self.cost[j] += eps,
                Nb::Upper => self.cost[j] -= eps,
                _ => {}
            }
        }
        self.recompute_duals();
    }

    /// Runs the two phases and polishes the final basis.
    pub fn run(mut self) -> Solution {
        let n = self.n;
        for j in 0..n {
            self.place_nonbasic(j);
        }
        self.recompute_primal();
        self.recompute_duals();

        let mut outcome;
        if self.dual_infeasibility() > 0.0 {
            self.cost.iter_mut().for_each(|c| *c = 0.0);
            self.recompute_duals();
            outcome = self.dual();
            self.cost.copy_from_slice(&self.true_cost);
            self.seen.clear();
            self.bland = false;
            if outcome == Outcome::Optimal {
                self.refactor();
                outcome = self.primal();
            }
        } else {
            self.perturb_costs();
            outcome = self.dual();
            self.cost.copy_from_slice(&self.true_cost);
        }

        // Alternate until both feasibilities hold on a fresh factorization.
        for _ in 0..8 {
            if outcome != Outcome::Optimal {
                break;
            }
            self.refactor();
            let pinf = self.max_primal_infeasibility() > self.opts.feasibility_tolerance;
            let dinf = self.dual_infeasibility() > 0.0;
            outcome = match (pinf, dinf) {
                (false, false) => break,
                (true, false) => self.dual(),
                (false, true) => self.primal(),
                (true, true) => {
                    // Restore primal feasibility with zero costs first.
                    self.cost.iter_mut().for_each(|c| *c = 0.0);
                    self.recompute_duals();
                    let o = self.dual();
                    self.cost.copy_from_slice(&self.true_cost);
                    self.recompute_duals();
                    if o == Outcome::Optimal {
                        self.primal()
                    } else {
                        o
                    }
                }
            };
        }

        if outcome == Outcome::Optimal {
            for p in 0..self.m {
                let j = self.head[p];
                self.x[j] = self.x[j].clamp(self.lower[j], self.upper[j]);
            }
        }
        Solution {
            outcome,
            x: self.x[..n].to_vec(),
            y: self.y.clone(),
            iterations: self.iterations,
        }
    }
}
