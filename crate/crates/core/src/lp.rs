//! Dense two-phase primal simplex.
//!
//! Problems are stated as `min c^T x` subject to linear rows with relations
//! `<=`, `=` or `>=`, and per-variable bounds (default `[0, +inf)`). Internally
//! every variable is shifted or split to be nonnegative, finite upper bounds
//! become extra `<=` rows, each row is scaled by its largest absolute
//! coefficient and the tableau is solved with artificial variables in phase 1.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn flipped(self) -> Self {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        }
    }
}

/// One linear row `sum_j a_j x_j (rel) rhs`, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn dense(coeffs: &[f64], relation: Relation, rhs: f64) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        Self {
            terms,
            relation,
            rhs,
        }
    }

    pub fn sparse(terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self {
            terms,
            relation,
            rhs,
        }
    }

    pub fn sparse_le(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::sparse(terms, Relation::Le, rhs)
    }

    pub fn sparse_eq(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::sparse(terms, Relation::Eq, rhs)
    }

    pub fn sparse_ge(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self::sparse(terms, Relation::Ge, rhs)
    }

    fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// `(lower, upper)` per variable; infinities allowed.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// Dual multipliers of the user constraints (in their original units),
    /// filled only for optimal solutions. Sign convention for `min`:
    /// `<=` rows have `y <= 0`, `>=` rows `y >= 0`.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Lowest-index entering and leaving variables throughout.
    Bland,
    /// Most negative reduced cost; falls back to Bland's rule while the
    /// solver is stalling on degenerate pivots.
    DantzigWithBland,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub pivot_tol: f64,
    pub cost_tol: f64,
    pub rule: PivotRule,
    /// Pivot budget; `None` picks `50 * (rows + cols) + 1000`.
    pub max_pivots: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            pivot_tol: 1e-9,
            cost_tol: 1e-10,
            rule: PivotRule::Bland,
            max_pivots: None,
        }
    }
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, c: Constraint) -> &mut Self {
        self.constraints.push(c);
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.bounds[var] = (lower, upper);
        self
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with(&SolverOptions::default())
    }

    pub fn solve_with(&self, opts: &SolverOptions) -> Result<LpSolution> {
        self.validate()?;
        let std = StandardForm::build(self)?;
        let std = match std {
            Some(s) => s,
            None => return Ok(self.infeasible(0)),
        };
        let mut tab = Tableau::new(&std, opts);
        let outcome = tab.run()?;
        match outcome {
            Outcome::Infeasible => Ok(self.infeasible(tab.pivots)),
            Outcome::Unbounded => Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective_value: f64::NEG_INFINITY,
                duals: Vec::new(),
                pivots: tab.pivots,
            }),
            Outcome::Optimal => {
                let xs = tab.primal();
                let x = std.recover(&xs);
                let objective_value = self
                    .objective
                    .iter()
                    .zip(&x)
                    .map(|(c, v)| c * v)
                    .sum::<f64>();
                let duals = std.user_duals(&tab.row_duals());
                self.verify(&x, opts.feas_tol)?;
                Ok(LpSolution {
                    status: LpStatus::Optimal,
                    x,
                    objective_value,
                    duals,
                    pivots: tab.pivots,
                })
            }
        }
    }

    fn infeasible(&self, pivots: usize) -> LpSolution {
        LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective_value: f64::INFINITY,
            duals: Vec::new(),
            pivots,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::Dimension(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite objective coefficient".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(Error::Dimension(format!("constraint {i} has non-finite rhs")));
            }
            for &(j, a) in &c.terms {
                if j >= n {
                    return Err(Error::Dimension(format!(
                        "constraint {i} references variable {j} of {n}"
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::Dimension(format!(
                        "constraint {i} has non-finite coefficient"
                    )));
                }
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Dimension(format!("invalid bounds on variable {j}")));
            }
        }
        Ok(())
    }

    /// Re-checks a solution against the unscaled rows and bounds.
    fn verify(&self, x: &[f64], tol: f64) -> Result<()> {
        for (i, c) in self.constraints.iter().enumerate() {
            let scale = c
                .terms
                .iter()
                .fold(0.0f64, |m, &(_, a)| m.max(a.abs()))
                .max(1e-300);
            let act = c.activity(x);
            let viol = match c.relation {
                Relation::Le => act - c.rhs,
                Relation::Ge => c.rhs - act,
                Relation::Eq => (act - c.rhs).abs(),
            };
            if viol / scale > tol.max(1e-9) * 10.0 {
                return Err(Error::Numeric(format!(
                    "solution violates constraint {i} by {viol:e}"
                )));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if x[j] < lo - 10.0 * tol || x[j] > hi + 10.0 * tol {
                return Err(Error::Numeric(format!("solution violates bounds of variable {j}")));
            }
        }
        Ok(())
    }
}

/// How a user variable is expressed through nonnegative standard columns.
#[derive(Debug, Clone)]
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

#[derive(Debug)]
struct StdRow {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
    /// Multiplier applied to the original row (sign / scale).
    factor: f64,
    /// Index of the user constraint, `None` for bound rows.
    user: Option<usize>,
}

#[derive(Debug)]
struct StandardForm {
    ncols: usize,
    cost: Vec<f64>,
    rows: Vec<StdRow>,
    vars: Vec<VarMap>,
    n_user_rows: usize,
}

impl StandardForm {
    /// Returns `None` when a trivially infeasible row or bound is found.
    fn build(lp: &LinearProgram) -> Result<Option<Self>> {
        let mut vars = Vec::with_capacity(lp.num_vars());
        let mut cost = Vec::new();
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
            let c = lp.objective[j];
            if lo > hi {
                return Ok(None);
            }
            if lo.is_finite() {
                let col = cost.len();
                cost.push(c);
                if hi.is_finite() {
                    bound_rows.push((col, hi - lo));
                }
                vars.push(VarMap {
                    offset: lo,
                    cols: vec![(col, 1.0)],
                });
            } else if hi.is_finite() {
                let col = cost.len();
                cost.push(-c);
                vars.push(VarMap {
                    offset: hi,
                    cols: vec![(col, -1.0)],
                });
            } else {
                let col = cost.len();
                cost.push(c);
                cost.push(-c);
                vars.push(VarMap {
                    offset: 0.0,
                    cols: vec![(col, 1.0), (col + 1, -1.0)],
                });
            }
        }

        let mut rows = Vec::with_capacity(lp.constraints.len() + bound_rows.len());
        let mut push_row = |mut coeffs: Vec<(usize, f64)>,
                            relation: Relation,
                            rhs: f64,
                            user: Option<usize>|
         -> bool {
            coeffs.retain(|(_, a)| *a != 0.0);
            let scale = coeffs.iter().fold(0.0f64, |m, (_, a)| m.max(a.abs()));
            if scale == 0.0 {
                let ok = match relation {
                    Relation::Le => rhs >= -1e-12,
                    Relation::Ge => rhs <= 1e-12,
                    Relation::Eq => rhs.abs() <= 1e-12,
                };
                // Keep an empty row so duals stay aligned; it never binds.
                rows.push(StdRow {
                    coeffs,
                    relation: Relation::Le,
                    rhs: 0.0,
                    factor: 0.0,
                    user,
                });
                return ok;
            }
            let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
            let relation = if sign < 0.0 { relation.flipped() } else { relation };
            let factor = sign / scale;
            for (_, a) in coeffs.iter_mut() {
                *a *= factor;
            }
            rows.push(StdRow {
                coeffs,
                relation,
                rhs: rhs * factor,
                factor,
                user,
            });
            true
        };

        for (i, c) in lp.constraints.iter().enumerate() {
            let mut rhs = c.rhs;
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(c.terms.len());
            for &(j, a) in &c.terms {
                let vm = &vars[j];
                rhs -= a * vm.offset;
                for &(col, s) in &vm.cols {
                    coeffs.push((col, a * s));
                }
            }
            // Merge duplicate columns.
            coeffs.sort_by_key(|(col, _)| *col);
            coeffs.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            if !push_row(coeffs, c.relation, rhs, Some(i)) {
                return Ok(None);
            }
        }
        for (col, ub) in bound_rows {
            if !push_row(vec![(col, 1.0)], Relation::Le, ub, None) {
                return Ok(None);
            }
        }
        Ok(Some(Self {
            ncols: cost.len(),
            cost,
            rows,
            vars,
            n_user_rows: lp.constraints.len(),
        }))
    }

    fn recover(&self, xs: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .map(|vm| vm.offset + vm.cols.iter().map(|&(c, s)| s * xs[c]).sum::<f64>())
            .collect()
    }

    fn user_duals(&self, row_duals: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_user_rows];
        for (r, row) in self.rows.iter().enumerate() {
            if let Some(u) = row.user {
                out[u] = row_duals[r] * row.factor;
            }
        }
        out
    }
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau<'a> {
    opts: &'a SolverOptions,
    m: usize,
    width: usize, // number of columns incl. rhs
    ncols: usize, // number of variable columns
    t: Vec<f64>,
    kind: Vec<ColKind>,
    basis: Vec<usize>,
    /// Column that was basic in each row at the start (slack or artificial).
    initial_basic: Vec<usize>,
    cost: Vec<f64>,
    d: Vec<f64>,
    obj: f64,
    pivots: usize,
    max_pivots: usize,
}

impl<'a> Tableau<'a> {
    fn new(std: &StandardForm, opts: &'a SolverOptions) -> Self {
        let m = std.rows.len();
        let n_slack = std
            .rows
            .iter()
            .filter(|r| r.relation != Relation::Eq)
            .count();
        let n_art = std
            .rows
            .iter()
            .filter(|r| r.relation != Relation::Le)
            .count();
        let ncols = std.ncols + n_slack + n_art;
        let width = ncols + 1;
        let mut t = vec![0.0; m * width];
        let mut kind = vec![ColKind::Structural; std.ncols];
        kind.extend(std::iter::repeat_n(ColKind::Slack, n_slack));
        kind.extend(std::iter::repeat_n(ColKind::Artificial, n_art));
        let mut basis = vec![0; m];
        let mut next_slack = std.ncols;
        let mut next_art = std.ncols + n_slack;
        for (i, row) in std.rows.iter().enumerate() {
            let r = &mut t[i * width..(i + 1) * width];
            for &(c, a) in &row.coeffs {
                r[c] += a;
            }
            r[ncols] = row.rhs;
            match row.relation {
                Relation::Le => {
                    r[next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    r[next_slack] = -1.0;
                    next_slack += 1;
                    r[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    r[next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }
        let mut cost = std.cost.clone();
        cost.resize(ncols, 0.0);
        let max_pivots = opts.max_pivots.unwrap_or(50 * (m + ncols) + 1000);
        Self {
            opts,
            m,
            width,
            ncols,
            t,
            kind,
            initial_basic: basis.clone(),
            basis,
            cost,
            d: vec![0.0; ncols],
            obj: 0.0,
            pivots: 0,
            max_pivots,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.ncols]
    }

    /// Sets reduced costs for the cost vector `c` under the current basis.
    fn price(&mut self, c: &[f64]) {
        self.d.copy_from_slice(c);
        self.obj = 0.0;
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.width..(i + 1) * self.width];
            for (dj, &a) in self.d.iter_mut().zip(&row[..self.ncols]) {
                *dj -= cb * a;
            }
            self.obj += cb * row[self.ncols];
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r * w + c];
        {
            let row = &mut self.t[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[c] = 1.0;
        }
        let nz: Vec<usize> = (0..w).filter(|&j| self.t[r * w + j] != 0.0).collect();
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for &j in &nz {
                    row[j] -= f * prow[j];
                }
                row[c] = 0.0;
            }
        };
        for row in before.chunks_exact_mut(w) {
            eliminate(row);
        }
        for row in after.chunks_exact_mut(w) {
            eliminate(row);
        }
        let f = self.d[c];
        if f != 0.0 {
            for &j in &nz {
                if j < self.ncols {
                    self.d[j] -= f * prow[j];
                }
            }
            self.d[c] = 0.0;
            // obj tracks c_B^T x_B.
            self.obj += f * prow[self.ncols];
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Ratio test for entering column `c`. Among rows tied at the minimum
    /// ratio only pivots within a factor 100 of the largest are considered,
    /// then the rule's tie-break applies.
    fn leaving_row(&self, c: usize, use_bland: bool) -> Option<(usize, f64)> {
        let mut min_ratio = f64::INFINITY;
        for i in 0..self.m {
            let a = self.at(i, c);
            if a > self.opts.pivot_tol {
                min_ratio = min_ratio.min(self.rhs(i).max(0.0) / a);
            }
        }
        if !min_ratio.is_finite() {
            return None;
        }
        let tied = |i: usize| {
            let a = self.at(i, c);
            a > self.opts.pivot_tol
                && self.rhs(i).max(0.0) / a - min_ratio <= 1e-12 * (1.0 + min_ratio.abs())
        };
        let a_max = (0..self.m)
            .filter(|&i| tied(i))
            .map(|i| self.at(i, c))
            .fold(0.0, f64::max);
        let mut best: Option<usize> = None;
        for i in (0..self.m).filter(|&i| tied(i) && self.at(i, c) >= 0.01 * a_max) {
            let better = match best {
                None => true,
                Some(b) if use_bland => self.basis[i] < self.basis[b],
                Some(b) => self.at(i, c) > self.at(b, c),
            };
            if better {
                best = Some(i);
            }
        }
        best.map(|r| (r, self.rhs(r).max(0.0) / self.at(r, c)))
    }

    /// Primal simplex iterations for cost vector `c`, starting from reduced
    /// costs already priced for it. Returns `false` when unbounded.
    fn iterate(&mut self, c: &[f64], allow_artificial: bool) -> Result<bool> {
        let mut degenerate_run = 0usize;
        let mut refreshed = 0usize;
        loop {
            if self.pivots >= self.max_pivots {
                return Err(Error::Numeric(format!(
                    "simplex pivot limit ({}) reached",
                    self.max_pivots
                )));
            }
            let use_bland = match self.opts.rule {
                PivotRule::Bland => true,
                PivotRule::DantzigWithBland => degenerate_run > 30,
            };
            let tol = self.opts.cost_tol;
            let eligible =
                |j: usize, kind: &[ColKind]| allow_artificial || kind[j] != ColKind::Artificial;
            let entering = if use_bland {
                (0..self.ncols).find(|&j| self.d[j] < -tol && eligible(j, &self.kind))
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..self.ncols {
                    if self.d[j] < -tol
                        && eligible(j, &self.kind)
                        && best.is_none_or(|(_, v)| self.d[j] < v)
                    {
                        best = Some((j, self.d[j]));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(col) = entering else {
                // Incrementally updated reduced costs drift; confirm
                // optimality against freshly priced ones.
                if refreshed >= 3 {
                    return Ok(true);
                }
                let before = self.d.clone();
                self.price(c);
                let drift = before
                    .iter()
                    .zip(&self.d)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if drift <= tol {
                    return Ok(true);
                }
                refreshed += 1;
                continue;
            };
            let Some((r, ratio)) = self.leaving_row(col, use_bland) else {
                return Ok(false);
            };
            if ratio <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, col);
        }
    }

    fn run(&mut self) -> Result<Outcome> {
        let has_art = self.kind.contains(&ColKind::Artificial);
        if has_art {
            let phase1: Vec<f64> = self
                .kind
                .iter()
                .map(|k| if *k == ColKind::Artificial { 1.0 } else { 0.0 })
                .collect();
            self.price(&phase1);
            // Phase 1 is bounded below by zero.
            self.iterate(&phase1, true)?;
            let infeas: f64 = (0..self.m)
                .filter(|&i| self.kind[self.basis[i]] == ColKind::Artificial)
                .map(|i| self.rhs(i).max(0.0))
                .sum();
            if infeas > self.opts.feas_tol {
                return Ok(Outcome::Infeasible);
            }
            // Drive remaining artificials out of the basis where possible.
            for i in 0..self.m {
                if self.kind[self.basis[i]] != ColKind::Artificial {
                    continue;
                }
                let col = (0..self.ncols).find(|&j| {
                    self.kind[j] != ColKind::Artificial && self.at(i, j).abs() > self.opts.pivot_tol
                });
                if let Some(j) = col {
                    self.pivot(i, j);
                }
                // Otherwise the row is redundant; its artificial stays basic at zero.
            }
        }
        let cost = self.cost.clone();
        self.price(&cost);
        if self.iterate(&cost, false)? {
            Ok(Outcome::Optimal)
        } else {
            Ok(Outcome::Unbounded)
        }
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols];
        for i in 0..self.m {
            x[self.basis[i]] = self.rhs(i).max(0.0);
        }
        x
    }

    /// Row duals `y = c_B^T B^{-1}` read from the initial identity columns.
    fn row_duals(&self) -> Vec<f64> {
        self.initial_basic.iter().map(|&j| self.cost[j] - self.d[j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lower_bound() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(Constraint::dense(&[1.0], Relation::Ge, 1.0));
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_edge() {
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.add(Constraint::dense(&[1.0, 1.0], Relation::Le, 1.0));
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(Constraint::dense(&[1.0], Relation::Le, 1.0));
        lp.add(Constraint::dense(&[1.0], Relation::Ge, 2.0));
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add(Constraint::dense(&[1.0, -1.0], Relation::Le, 1.0));
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn bounds_shift_split_and_cap() {
        // min x - y, x in [-2, 3], y free with y <= 4 - x.
        let mut lp = LinearProgram::new(vec![1.0, -1.0]);
        lp.set_bounds(0, -2.0, 3.0);
        lp.set_bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        lp.add(Constraint::dense(&[1.0, 1.0], Relation::Le, 4.0));
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] + 2.0).abs() < 1e-9);
        assert!((s.x[1] - 6.0).abs() < 1e-9);
        assert!((s.objective_value + 8.0).abs() < 1e-9);

        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, 2.5);
        assert!((lp.solve().unwrap().x[0] - 2.5).abs() < 1e-12);

        let mut lp = LinearProgram::new(vec![1.0]);
        lp.set_bounds(0, 1.0, 0.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_with_redundant_row() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add(Constraint::dense(&[1.0, 1.0], Relation::Eq, 1.0));
        lp.add(Constraint::dense(&[2.0, 2.0], Relation::Eq, 2.0));
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn structural_errors() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(Constraint::sparse_le(vec![(3, 1.0)], 1.0));
        assert!(matches!(lp.solve(), Err(Error::Dimension(_))));
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.bounds.pop();
        assert!(matches!(lp.solve(), Err(Error::Dimension(_))));
    }

    #[test]
    fn rules_agree() {
        let mut lp = LinearProgram::new(vec![-3.0, -5.0, -4.0]);
        lp.add(Constraint::dense(&[2.0, 3.0, 0.0], Relation::Le, 8.0));
        lp.add(Constraint::dense(&[0.0, 2.0, 5.0], Relation::Le, 10.0));
        lp.add(Constraint::dense(&[3.0, 2.0, 4.0], Relation::Le, 15.0));
        let a = lp.solve().unwrap();
        let b = lp
            .solve_with(&SolverOptions {
                rule: PivotRule::DantzigWithBland,
                ..Default::default()
            })
            .unwrap();
        assert!((a.objective_value - b.objective_value).abs() < 1e-9);
        assert!((a.objective_value + 765.0 / 41.0).abs() < 1e-9);
    }

    #[test]
    fn duals_on_known_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 (as a min problem)
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add(Constraint::dense(&[1.0, 0.0], Relation::Le, 4.0));
        lp.add(Constraint::dense(&[0.0, 2.0], Relation::Le, 12.0));
        lp.add(Constraint::dense(&[3.0, 2.0], Relation::Le, 18.0));
        let s = lp.solve().unwrap();
        assert!((s.objective_value + 36.0).abs() < 1e-9);
        let expect = [0.0, -1.5, -1.0];
        for (y, e) in s.duals.iter().zip(expect) {
            assert!((y - e).abs() < 1e-9, "{:?}", s.duals);
        }
    }

    #[test]
    fn deterministic() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0, 1.0]);
        lp.add(Constraint::dense(&[1.0, 2.0, 3.0], Relation::Ge, 3.0));
        lp.add(Constraint::dense(&[3.0, 2.0, 1.0], Relation::Ge, 3.0));
        assert_eq!(lp.solve().unwrap(), lp.solve().unwrap());
    }
}
