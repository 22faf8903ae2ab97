//! Dense two-phase simplex.
//!
//! Pivoting uses Dantzig's rule with a two-pass (Harris) ratio test for the
//! first `50 * (rows + cols)` pivots and Bland's rule afterwards, which
//! guarantees termination. A returned point is
//! re-checked against the original constraints; if the check fails the
//! outcome is [`LpStatus::NumericalFailure`] rather than a point.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

/// Phase-1 optimum (relative to `1 + ‖rhs‖_∞`) above which the program is infeasible.
pub const INFEASIBILITY_TOLERANCE: f64 = 1e-9;
/// Accepted constraint violation of a returned point, relative to `1 + ‖rhs‖_∞`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;
const PIVOT_TOLERANCE: f64 = 1e-9;
const COST_TOLERANCE: f64 = 1e-10;
const HARRIS_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bounds {
    pub const NONNEG: Bounds = Bounds {
        lower: Some(0.0),
        upper: None,
    };
    pub const FREE: Bounds = Bounds {
        lower: None,
        upper: None,
    };
}

/// `minimize c·x` subject to `eq` rows (`a·x = b`), `ineq` rows (`a·x ≤ b`)
/// and per-variable bounds. Variables default to `x ≥ 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub eq_constraints: Vec<(Vec<f64>, f64)>,
    pub ineq_constraints: Vec<(Vec<f64>, f64)>,
    pub bounds: Vec<Bounds>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
            bounds: vec![Bounds::NONNEG; num_vars],
        }
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.eq_constraints.push((coeffs, rhs));
    }

    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.ineq_constraints.push((coeffs, rhs));
    }

    pub fn add_ge(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.ineq_constraints
            .push((coeffs.into_iter().map(|c| -c).collect(), -rhs));
    }

    pub fn set_bounds(&mut self, var: usize, bounds: Bounds) {
        self.bounds[var] = bounds;
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars;
        if self.objective.len() != n || self.bounds.len() != n {
            return arg_err("objective/bounds length differs from num_vars");
        }
        let rows = self.eq_constraints.iter().chain(&self.ineq_constraints);
        for (coeffs, rhs) in rows {
            if coeffs.len() != n {
                return arg_err("constraint row length differs from num_vars");
            }
            if !rhs.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
                return arg_err("non-finite constraint data");
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return arg_err("non-finite objective");
        }
        for b in &self.bounds {
            let finite = b.lower.is_none_or(f64::is_finite) && b.upper.is_none_or(f64::is_finite);
            if !finite {
                return arg_err("non-finite bound");
            }
        }
        Ok(())
    }

    fn rhs_scale(&self) -> f64 {
        let rows = self.eq_constraints.iter().chain(&self.ineq_constraints);
        let bounds = self
            .bounds
            .iter()
            .flat_map(|b| [b.lower, b.upper])
            .flatten();
        1.0 + rows
            .map(|(_, r)| r.abs())
            .chain(bounds.map(f64::abs))
            .fold(0.0, f64::max)
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
        let mut worst: f64 = 0.0;
        for (a, b) in &self.eq_constraints {
            worst = worst.max((dot(a) - b).abs());
        }
        for (a, b) in &self.ineq_constraints {
            worst = worst.max(dot(a) - b);
        }
        for (xi, bd) in x.iter().zip(&self.bounds) {
            if let Some(l) = bd.lower {
                worst = worst.max(l - xi);
            }
            if let Some(u) = bd.upper {
                worst = worst.max(xi - u);
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot cap reached or the final point failed verification.
    NumericalFailure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub point: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    pub pivots: usize,
    /// Phase-1 optimum (sum of artificials) at the end of phase 1.
    pub phase_one_value: f64,
}

impl LpOutcome {
    fn without_point(status: LpStatus, pivots: usize, phase_one_value: f64) -> Self {
        LpOutcome {
            status,
            point: None,
            objective_value: None,
            pivots,
            phase_one_value,
        }
    }
}

/// How an original variable is recovered from standard-form columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = offset + sign * col`
    Shifted { col: usize, offset: f64, sign: f64 },
    /// `x = col_pos - col_neg`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    /// `rows + 1` rows (last one is the objective) by `cols + 1` (last is rhs).
    t: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
    pivots: usize,
    dantzig_budget: usize,
    pivot_cap: usize,
}

enum PhaseResult {
    Optimal,
    Unbounded,
    CapReached,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let piv = self.t[pr * w + pc];
        for v in &mut self.t[pr * w..(pr + 1) * w] {
            *v /= piv;
        }
        let (before, rest) = self.t.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[pc];
            if f == 0.0 {
                continue;
            }
            for (x, p) in row.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            row[pc] = 0.0;
        }
        for r in 0..self.rows {
            let v = &mut self.t[r * w + self.cols];
            if *v < 0.0 && *v > -HARRIS_TOLERANCE {
                *v = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Runs simplex iterations on the current objective row, considering only
    /// columns for which `allowed` is true. Stops early once the objective
    /// value drops to `stop_at`.
    fn optimize(&mut self, allowed: &[bool], stop_at: Option<f64>) -> PhaseResult {
        loop {
            let obj = self.rows;
            if stop_at.is_some_and(|s| -self.rhs(obj) <= s) {
                return PhaseResult::Optimal;
            }
            if self.pivots >= self.pivot_cap {
                return PhaseResult::CapReached;
            }
            let bland = self.pivots >= self.dantzig_budget;
            let mut enter = None;
            let mut best = -COST_TOLERANCE;
            for c in 0..self.cols {
                if !allowed[c] {
                    continue;
                }
                let d = self.at(obj, c);
                if bland {
                    if d < -COST_TOLERANCE {
                        enter = Some(c);
                        break;
                    }
                } else if d < best {
                    best = d;
                    enter = Some(c);
                }
            }
            let Some(pc) = enter else {
                return PhaseResult::Optimal;
            };
            let leave = if bland {
                self.bland_ratio_test(pc)
            } else {
                self.harris_ratio_test(pc)
            };
            match leave {
                Some(pr) => self.pivot(pr, pc),
                None => return PhaseResult::Unbounded,
            }
        }
    }

    /// Minimum ratio with ties broken by the smallest basic index.
    fn bland_ratio_test(&self, pc: usize) -> Option<usize> {
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a <= PIVOT_TOLERANCE {
                continue;
            }
            let ratio = self.rhs(r).max(0.0) / a;
            let better = match leave {
                None => true,
                Some(l) => {
                    ratio < best_ratio - 1e-12
                        || (ratio <= best_ratio + 1e-12 && self.basis[r] < self.basis[l])
                }
            };
            if better {
                best_ratio = ratio;
                leave = Some(r);
            }
        }
        leave
    }

    /// Two-pass ratio test: among rows whose ratio is within a small
    /// feasibility relaxation of the minimum, pivot on the largest entry.
    fn harris_ratio_test(&self, pc: usize) -> Option<usize> {
        let mut bound = f64::INFINITY;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > PIVOT_TOLERANCE {
                bound = bound.min((self.rhs(r).max(0.0) + HARRIS_TOLERANCE) / a);
            }
        }
        let mut leave: Option<usize> = None;
        let mut best_pivot = 0.0;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > PIVOT_TOLERANCE && self.rhs(r).max(0.0) / a <= bound && a > best_pivot {
                best_pivot = a;
                leave = Some(r);
            }
        }
        leave
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        let obj = self.rows;
        for c in 0..w {
            self.t[obj * w + c] = if c < self.cols { cost[c] } else { 0.0 };
        }
        // price out basic columns
        for r in 0..self.rows {
            let b = self.basis[r];
            let f = self.t[obj * w + b];
            if f != 0.0 {
                for c in 0..w {
                    self.t[obj * w + c] -= f * self.t[r * w + c];
                }
            }
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.cols + 1;
        self.t.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

/// Solves a linear program with the two-phase simplex method.
pub fn solve_lp(prog: &LinearProgram) -> Result<LpOutcome> {
    prog.validate()?;
    let n = prog.num_vars;

    // standard-form columns for the original variables
    let mut var_map = Vec::with_capacity(n);
    let mut ncols = 0usize;
    // extra rows `col <= width` from two-sided bounds
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for b in &prog.bounds {
        match (b.lower, b.upper) {
            (Some(l), u) => {
                var_map.push(VarMap::Shifted {
                    col: ncols,
                    offset: l,
                    sign: 1.0,
                });
                if let Some(u) = u {
                    bound_rows.push((ncols, u - l));
                }
                ncols += 1;
            }
            (None, Some(u)) => {
                var_map.push(VarMap::Shifted {
                    col: ncols,
                    offset: u,
                    sign: -1.0,
                });
                ncols += 1;
            }
            (None, None) => {
                var_map.push(VarMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }
    }

    // translate a row over original variables into standard columns
    let translate = |coeffs: &[f64], rhs: f64| -> (Vec<(usize, f64)>, f64) {
        let mut entries = Vec::new();
        let mut rhs = rhs;
        for (j, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match var_map[j] {
                VarMap::Shifted { col, offset, sign } => {
                    rhs -= a * offset;
                    entries.push((col, a * sign));
                }
                VarMap::Split { pos, neg } => {
                    entries.push((pos, a));
                    entries.push((neg, -a));
                }
            }
        }
        (entries, rhs)
    };

    struct Row {
        entries: Vec<(usize, f64)>,
        slack: Option<usize>,
        rhs: f64,
    }
    let mut rows: Vec<Row> = Vec::new();
    for (a, b) in &prog.eq_constraints {
        let (entries, rhs) = translate(a, *b);
        rows.push(Row {
            entries,
            slack: None,
            rhs,
        });
    }
    let mut le_rows: Vec<(Vec<(usize, f64)>, f64)> = prog
        .ineq_constraints
        .iter()
        .map(|(a, b)| translate(a, *b))
        .collect();
    le_rows.extend(bound_rows.iter().map(|&(c, w)| (vec![(c, 1.0)], w)));
    for (entries, rhs) in le_rows {
        rows.push(Row {
            entries,
            slack: Some(ncols),
            rhs,
        });
        ncols += 1;
    }
    let slack_end = ncols;

    // artificials for rows without a usable +1 slack
    let m = rows.len();
    let mut artificial_of_row = vec![None; m];
    for (r, row) in rows.iter().enumerate() {
        let slack_ok = row.slack.is_some() && row.rhs >= 0.0;
        if !slack_ok {
            artificial_of_row[r] = Some(ncols);
            ncols += 1;
        }
    }

    let w = ncols + 1;
    let mut t = vec![0.0; (m + 1) * w];
    let mut basis = vec![0usize; m];
    for (r, row) in rows.iter().enumerate() {
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        for &(c, a) in &row.entries {
            t[r * w + c] += sign * a;
        }
        if let Some(s) = row.slack {
            t[r * w + s] = sign;
        }
        t[r * w + ncols] = sign * row.rhs;
        match artificial_of_row[r] {
            Some(a) => {
                t[r * w + a] = 1.0;
                basis[r] = a;
            }
            None => basis[r] = row.slack.expect("slack row"),
        }
    }

    let dims = m + ncols;
    let mut tab = Tableau {
        t,
        rows: m,
        cols: ncols,
        basis,
        pivots: 0,
        dantzig_budget: 50 * dims,
        pivot_cap: 50 * dims + 200 * dims.max(100),
    };

    let is_artificial = |c: usize| c >= slack_end;
    let rhs_scale = prog.rhs_scale();

    // phase 1
    let mut phase_one_value = 0.0;
    if slack_end < ncols {
        let cost: Vec<f64> = (0..ncols)
            .map(|c| if is_artificial(c) { 1.0 } else { 0.0 })
            .collect();
        tab.set_objective(&cost);
        let allowed = vec![true; ncols];
        let stop_at = 0.1 * INFEASIBILITY_TOLERANCE * rhs_scale;
        match tab.optimize(&allowed, Some(stop_at)) {
            PhaseResult::Optimal => {}
            // phase 1 is bounded below by zero; treat as breakdown
            PhaseResult::Unbounded | PhaseResult::CapReached => {
                return Ok(LpOutcome::without_point(
                    LpStatus::NumericalFailure,
                    tab.pivots,
                    f64::NAN,
                ));
            }
        }
        phase_one_value = (0..tab.rows)
            .filter(|&r| is_artificial(tab.basis[r]))
            .map(|r| tab.rhs(r))
            .sum::<f64>();
        if phase_one_value > INFEASIBILITY_TOLERANCE * rhs_scale {
            return Ok(LpOutcome::without_point(
                LpStatus::Infeasible,
                tab.pivots,
                phase_one_value,
            ));
        }
        // drive remaining artificials out of the basis
        let mut r = 0;
        while r < tab.rows {
            if is_artificial(tab.basis[r]) {
                let col = (0..slack_end)
                    .filter(|&c| tab.at(r, c).abs() > PIVOT_TOLERANCE)
                    .max_by(|&a, &b| tab.at(r, a).abs().total_cmp(&tab.at(r, b).abs()));
                match col {
                    Some(c) => tab.pivot(r, c),
                    None => {
                        // redundant row
                        tab.remove_row(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    // phase 2
    let mut cost = vec![0.0; ncols];
    for (j, &c) in prog.objective.iter().enumerate() {
        match var_map[j] {
            VarMap::Shifted { col, sign, .. } => cost[col] += c * sign,
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }
    tab.set_objective(&cost);
    let allowed: Vec<bool> = (0..ncols).map(|c| !is_artificial(c)).collect();
    match tab.optimize(&allowed, None) {
        PhaseResult::Optimal => {}
        PhaseResult::Unbounded => {
            return Ok(LpOutcome::without_point(
                LpStatus::Unbounded,
                tab.pivots,
                phase_one_value,
            ));
        }
        PhaseResult::CapReached => {
            return Ok(LpOutcome::without_point(
                LpStatus::NumericalFailure,
                tab.pivots,
                phase_one_value,
            ));
        }
    }

    let mut col_value = vec![0.0; ncols];
    for r in 0..tab.rows {
        col_value[tab.basis[r]] = tab.rhs(r);
    }
    let point: Vec<f64> = var_map
        .iter()
        .map(|vm| match *vm {
            VarMap::Shifted { col, offset, sign } => offset + sign * col_value[col],
            VarMap::Split { pos, neg } => col_value[pos] - col_value[neg],
        })
        .collect();
    if prog.max_violation(&point) > FEASIBILITY_TOLERANCE * rhs_scale {
        return Ok(LpOutcome::without_point(
            LpStatus::NumericalFailure,
            tab.pivots,
            phase_one_value,
        ));
    }
    let value = prog.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        point: Some(point),
        objective_value: Some(value),
        pivots: tab.pivots,
        phase_one_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contradictory_bounds_infeasible() {
        // x1 = 1, x1 <= 0
        let mut lp = LinearProgram::new(1);
        lp.add_eq(vec![1.0], 1.0);
        lp.add_le(vec![1.0], 0.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn simple_minimum() {
        // min x1 + x2 s.t. x1 + x2 >= 1, x >= 0
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.add_ge(vec![1.0, 1.0], 1.0);
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective_value.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, 0.0];
        lp.add_le(vec![1.0, -1.0], 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_bounded_variables() {
        // min x - y, x free with x >= -3 via row, y in [1, 2]
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, -1.0];
        lp.set_bounds(0, Bounds::FREE);
        lp.set_bounds(
            1,
            Bounds {
                lower: Some(1.0),
                upper: Some(2.0),
            },
        );
        lp.add_ge(vec![1.0, 0.0], -3.0);
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        let x = out.point.unwrap();
        assert!((x[0] + 3.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_eq(vec![2.0, 2.0], 2.0);
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective_value.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upper_only_bound() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![-1.0];
        lp.set_bounds(
            0,
            Bounds {
                lower: None,
                upper: Some(4.0),
            },
        );
        let out = solve_lp(&lp).unwrap();
        assert!((out.point.unwrap()[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed() {
        let mut lp = LinearProgram::new(2);
        lp.add_eq(vec![1.0], 1.0);
        assert!(solve_lp(&lp).is_err());
    }
}
