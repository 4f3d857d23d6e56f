//! Robust separable NMF: anchor detection, and the fits of `A` and `W`.

use crate::environment::SamplingPlan;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, DenseMatrix};
use crate::lp::{Constraint, LinearProgram, LpStatus, PivotRule, SolverOptions};

const CUT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct HottopixConfig {
    pub m: usize,
    /// Noise level; the LP allows a row-wise l1 residual of `2 * epsilon`.
    pub epsilon: f64,
    /// Distinct positive objective weights; `None` uses `1 + i/(L+1)`.
    pub p_vector: Option<Vec<f64>>,
    pub anchor_threshold: f64,
    /// Above this many rows the LP is replaced by successive projection.
    pub lp_max_rows: usize,
}

impl HottopixConfig {
    pub fn new(m: usize, epsilon: f64) -> Self {
        Self {
            m,
            epsilon,
            p_vector: None,
            anchor_threshold: 0.5,
            lp_max_rows: 200,
        }
    }

    fn weights(&self, rows: usize) -> Result<Vec<f64>> {
        match &self.p_vector {
            None => Ok((0..rows).map(|i| 1.0 + i as f64 / (rows as f64 + 1.0)).collect()),
            Some(p) => {
                if p.len() != rows {
                    return Err(Error::Dimension(format!(
                        "p_vector has {} entries for {rows} rows",
                        p.len()
                    )));
                }
                if p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::Parameter("p_vector entries must be positive".into()));
                }
                let mut sorted = p.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::Parameter("p_vector entries must be distinct".into()));
                }
                Ok(p.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HottopixResult {
    /// Exactly `m` distinct row indices, ascending.
    pub anchor_rows: Vec<usize>,
    /// Input rows at `anchor_rows`.
    pub w_hat: DenseMatrix,
    /// Diagonal of the LP solution; empty when the projection fallback ran.
    pub diag: Vec<f64>,
    /// Number of anchors taken from the greedy padding step.
    pub padded: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaResult {
    pub anchor_rows: Vec<usize>,
    /// Set when the residual vanished before `m` rows were found.
    pub rank_deficient: bool,
}

/// `Â`, `Ŵ` and the anchor rows behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfEstimate {
    pub w_hat: DenseMatrix,
    pub a_hat: DenseMatrix,
    pub anchor_rows: Vec<usize>,
}

fn lp_options() -> SolverOptions {
    SolverOptions {
        rule: PivotRule::DantzigWithBland,
        ..Default::default()
    }
}

/// Anchor detection by the self-representation LP
/// `min p^T diag(C)` s.t. `||X - CX||_{inf,1} <= 2 eps`, `C >= 0`,
/// `C_ii <= 1`, `C_ji <= C_ii`.
pub fn hottopix(x: &DenseMatrix, cfg: &HottopixConfig) -> Result<HottopixResult> {
    let (rows, _) = x.shape();
    let m = cfg.m;
    if m == 0 || rows < m {
        return Err(Error::Dimension(format!("need at least m = {m} >= 1 rows, got {rows}")));
    }
    if !(cfg.epsilon >= 0.0 && cfg.epsilon.is_finite()) {
        return Err(Error::Parameter(format!("epsilon = {} must be >= 0", cfg.epsilon)));
    }
    if !(cfg.anchor_threshold > 0.0 && cfg.anchor_threshold < 1.0) {
        return Err(Error::Parameter("anchor_threshold must lie in (0, 1)".into()));
    }
    let p = cfg.weights(rows)?;
    if rows == m {
        let anchor_rows: Vec<usize> = (0..rows).collect();
        return Ok(HottopixResult {
            w_hat: x.clone(),
            anchor_rows,
            diag: vec![1.0; rows],
            padded: 0,
        });
    }
    if rows > cfg.lp_max_rows {
        let spa = spa_anchors(x, m)?;
        let mut anchors = spa.anchor_rows;
        let before = anchors.len();
        pad_anchors(x, &mut anchors, m)?;
        anchors.sort_unstable();
        return Ok(HottopixResult {
            w_hat: x.select_rows(&anchors),
            anchor_rows: anchors,
            diag: Vec::new(),
            padded: m - before,
        });
    }

    let diag = self_representation_diag(x, &p, 2.0 * cfg.epsilon)?;
    let mut chosen: Vec<usize> = (0..rows).filter(|&i| diag[i] >= cfg.anchor_threshold).collect();
    if chosen.len() > m {
        chosen.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));
        chosen.truncate(m);
    }
    let before = chosen.len();
    pad_anchors(x, &mut chosen, m)?;
    chosen.sort_unstable();
    Ok(HottopixResult {
        w_hat: x.select_rows(&chosen),
        anchor_rows: chosen,
        diag,
        padded: m - before,
    })
}

/// Diagonal of an optimal `C` for the anchor LP. The `C_ji <= C_ii` rows are
/// added only when violated, which reaches the same optimum as stating all
/// of them up front.
fn self_representation_diag(x: &DenseMatrix, p: &[f64], tol: f64) -> Result<Vec<f64>> {
    let (rows, cols) = x.shape();
    // Zero matrix already meets the residual bound: C = 0 is optimal.
    if (0..rows).all(|j| x.row(j).iter().map(|v| v.abs()).sum::<f64>() <= tol) {
        return Ok(vec![0.0; rows]);
    }
    let c_var = |j: usize, i: usize| j * rows + i;
    let n_c = rows * rows;
    let e_pos = |j: usize, k: usize| n_c + 2 * (j * cols + k);
    let n_vars = n_c + 2 * rows * cols;
    let mut objective = vec![0.0; n_vars];
    for i in 0..rows {
        objective[c_var(i, i)] = p[i];
    }
    let mut lp = LinearProgram::new(objective);
    for i in 0..rows {
        lp.set_bounds(c_var(i, i), 0.0, 1.0);
    }
    for j in 0..rows {
        for k in 0..cols {
            let mut terms: Vec<(usize, f64)> = (0..rows)
                .filter(|&i| x.get(i, k) != 0.0)
                .map(|i| (c_var(j, i), x.get(i, k)))
                .collect();
            terms.push((e_pos(j, k), 1.0));
            terms.push((e_pos(j, k) + 1, -1.0));
            lp.add(Constraint::sparse_eq(terms, x.get(j, k)));
        }
        let terms = (0..cols)
            .flat_map(|k| [(e_pos(j, k), 1.0), (e_pos(j, k) + 1, 1.0)])
            .collect();
        lp.add(Constraint::sparse_le(terms, tol));
    }
    let mut constrained = vec![false; rows];
    for _ in 0..=rows {
        let sol = lp.solve_with(&lp_options())?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Err(Error::Recovery(
                    "anchor LP infeasible; the noise level is too small".into(),
                ))
            }
            LpStatus::Unbounded => {
                return Err(Error::Numeric("anchor LP reported unbounded".into()))
            }
        }
        let c = &sol.x;
        let mut cuts = 0;
        for i in 0..rows {
            if constrained[i] {
                continue;
            }
            let cii = c[c_var(i, i)];
            if (0..rows).any(|j| j != i && c[c_var(j, i)] > cii + CUT_TOL) {
                // Constrain the whole column at once; this bounds the number
                // of rounds by the number of rows.
                constrained[i] = true;
                for j in (0..rows).filter(|&j| j != i) {
                    lp.add(Constraint::sparse_le(vec![(c_var(j, i), 1.0), (c_var(i, i), -1.0)], 0.0));
                    cuts += 1;
                }
            }
        }
        if cuts == 0 {
            return Ok((0..rows).map(|i| c[c_var(i, i)]).collect());
        }
        log::debug!("anchor LP: added {cuts} column-dominance rows");
    }
    Err(Error::Numeric("anchor LP still violates column dominance with every column constrained".into()))
}

/// l1 distance from `target` to the linear span of `basis` rows.
fn l1_distance_to_span(x: &DenseMatrix, basis: &[usize], target: usize) -> Result<f64> {
    let cols = x.cols();
    let t = x.row(target);
    if basis.is_empty() {
        return Ok(t.iter().map(|v| v.abs()).sum());
    }
    let nb = basis.len();
    let n_vars = nb + 2 * cols;
    let mut objective = vec![0.0; n_vars];
    objective[nb..].fill(1.0);
    let mut lp = LinearProgram::new(objective);
    for b in 0..nb {
        lp.set_bounds(b, f64::NEG_INFINITY, f64::INFINITY);
    }
    for k in 0..cols {
        let mut terms: Vec<(usize, f64)> = basis
            .iter()
            .enumerate()
            .filter(|(_, &r)| x.get(r, k) != 0.0)
            .map(|(b, &r)| (b, x.get(r, k)))
            .collect();
        terms.push((nb + 2 * k, 1.0));
        terms.push((nb + 2 * k + 1, -1.0));
        lp.add(Constraint::sparse_eq(terms, t[k]));
    }
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numeric("span-distance LP did not reach optimality".into()));
    }
    Ok(sol.objective_value.max(0.0))
}

/// Adds rows farthest (in l1) from the span of the chosen ones until there
/// are `m`. Ties go to the lowest index.
fn pad_anchors(x: &DenseMatrix, chosen: &mut Vec<usize>, m: usize) -> Result<()> {
    while chosen.len() < m {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..x.rows() {
            if chosen.contains(&r) {
                continue;
            }
            let d = l1_distance_to_span(x, chosen, r)?;
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((r, d));
            }
        }
        let (r, _) = best.expect("rows >= m guarantees a candidate");
        chosen.push(r);
    }
    Ok(())
}

/// Successive projection: repeatedly take the row of largest l2 norm and
/// project every row onto the orthogonal complement of it.
pub fn spa_anchors(x: &DenseMatrix, m: usize) -> Result<SpaResult> {
    let (rows, cols) = x.shape();
    if m == 0 || rows < m {
        return Err(Error::Dimension(format!("need at least m = {m} >= 1 rows, got {rows}")));
    }
    if rows == m {
        return Ok(SpaResult {
            anchor_rows: (0..rows).collect(),
            rank_deficient: false,
        });
    }
    let mut r = x.clone();
    let norm2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let scale = (0..rows).map(|i| norm2(x.row(i))).fold(0.0, f64::max);
    let mut anchors = Vec::with_capacity(m);
    let mut rank_deficient = false;
    for _ in 0..m {
        let mut best = 0;
        let mut best_norm = -1.0;
        for i in 0..rows {
            let n = norm2(r.row(i));
            if n > best_norm {
                best = i;
                best_norm = n;
            }
        }
        if best_norm <= 1e-20 * scale.max(1e-300) || best_norm == 0.0 {
            rank_deficient = true;
            break;
        }
        anchors.push(best);
        let u: Vec<f64> = r.row(best).iter().map(|v| v / best_norm.sqrt()).collect();
        for i in 0..rows {
            let row = r.row_mut(i);
            let d: f64 = row.iter().zip(&u).map(|(a, b)| a * b).sum();
            for k in 0..cols {
                row[k] -= d * u[k];
            }
        }
    }
    if rank_deficient {
        log::warn!("successive projection found only {} of {m} anchors", anchors.len());
    }
    anchors.sort_unstable();
    Ok(SpaResult {
        anchor_rows: anchors,
        rank_deficient,
    })
}

fn check_fit_shapes(f_hat: &DenseMatrix, w_hat: &DenseMatrix) -> Result<()> {
    if f_hat.cols() != w_hat.cols() {
        return Err(Error::Dimension(format!(
            "F has {} columns but W has {}",
            f_hat.cols(),
            w_hat.cols()
        )));
    }
    Ok(())
}

/// Best simplex weights for one row: `min ||f - z W||_1` over `z >= 0`,
/// `sum z = 1`. Returns the weights and the residual.
pub fn fit_simplex_row(f: &[f64], w_hat: &DenseMatrix) -> Result<(Vec<f64>, f64)> {
    let (m, n) = w_hat.shape();
    let mut objective = vec![0.0; m + 2 * n];
    objective[m..].fill(1.0);
    let mut lp = LinearProgram::new(objective);
    for k in 0..n {
        let mut terms: Vec<(usize, f64)> = (0..m)
            .filter(|&i| w_hat.get(i, k) != 0.0)
            .map(|i| (i, w_hat.get(i, k)))
            .collect();
        terms.push((m + 2 * k, 1.0));
        terms.push((m + 2 * k + 1, -1.0));
        lp.add(Constraint::sparse_eq(terms, f[k]));
    }
    lp.add(Constraint::sparse_eq((0..m).map(|i| (i, 1.0)).collect(), 1.0));
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numeric(format!("simplex fit LP ended {:?}", sol.status)));
    }
    // Renormalize away roundoff so the row is exactly on the simplex.
    let mut z: Vec<f64> = sol.x[..m].iter().map(|v| v.max(0.0)).collect();
    let s: f64 = z.iter().sum();
    z.iter_mut().for_each(|v| *v /= s);
    Ok((z, sol.objective_value.max(0.0)))
}

/// `argmin_{Z >= 0, rowsum(Z) = 1} ||F - Z W||_{inf,1}`, solved row by row.
/// Each row is individually optimal, so the result also attains the joint
/// max-row optimum.
pub fn fit_a(f_hat: &DenseMatrix, w_hat: &DenseMatrix) -> Result<DenseMatrix> {
    check_fit_shapes(f_hat, w_hat)?;
    let m = w_hat.rows();
    let mut z = DenseMatrix::zeros(f_hat.rows(), m);
    for s in 0..f_hat.rows() {
        let (row, _) = fit_simplex_row(f_hat.row(s), w_hat)?;
        z.row_mut(s).copy_from_slice(&row);
    }
    Ok(z)
}

/// The same fit as a single LP with a shared bound `t` on every row's l1
/// residual. Returns the weights and the optimal `t`.
pub fn fit_a_joint(f_hat: &DenseMatrix, w_hat: &DenseMatrix) -> Result<(DenseMatrix, f64)> {
    check_fit_shapes(f_hat, w_hat)?;
    let (l, n) = f_hat.shape();
    let m = w_hat.rows();
    let z_var = |s: usize, i: usize| s * m + i;
    let e_var = |s: usize, k: usize| l * m + 2 * (s * n + k);
    let t_var = l * m + 2 * l * n;
    let mut objective = vec![0.0; t_var + 1];
    objective[t_var] = 1.0;
    let mut lp = LinearProgram::new(objective);
    for s in 0..l {
        for k in 0..n {
            let mut terms: Vec<(usize, f64)> =
                (0..m).map(|i| (z_var(s, i), w_hat.get(i, k))).collect();
            terms.push((e_var(s, k), 1.0));
            terms.push((e_var(s, k) + 1, -1.0));
            lp.add(Constraint::sparse_eq(terms, f_hat.get(s, k)));
        }
        lp.add(Constraint::sparse_eq((0..m).map(|i| (z_var(s, i), 1.0)).collect(), 1.0));
        let mut terms: Vec<(usize, f64)> = (0..n)
            .flat_map(|k| [(e_var(s, k), 1.0), (e_var(s, k) + 1, 1.0)])
            .collect();
        terms.push((t_var, -1.0));
        lp.add(Constraint::sparse_le(terms, 0.0));
    }
    let sol = lp.solve_with(&lp_options())?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numeric(format!("joint fit LP ended {:?}", sol.status)));
    }
    let z = DenseMatrix::from_fn(l, m, |s, i| sol.x[z_var(s, i)].max(0.0));
    Ok((z, sol.objective_value))
}

/// Assembles `Ŵ` block by block: the columns of block `i` solve the least
/// squares problem `Â[S(i), :] X ≈ M̂_i`.
pub fn fit_w_blocks(
    a_hat: &DenseMatrix,
    plan: &SamplingPlan,
    m_hats: &[DenseMatrix],
) -> Result<DenseMatrix> {
    if m_hats.len() != plan.num_blocks() {
        return Err(Error::Dimension(format!(
            "{} block estimates for {} blocks",
            m_hats.len(),
            plan.num_blocks()
        )));
    }
    if a_hat.rows() != plan.num_contexts {
        return Err(Error::Dimension("A has the wrong number of rows".into()));
    }
    let m = a_hat.cols();
    let mut w = DenseMatrix::zeros(m, plan.num_arms);
    for (b, (ctxs, arms)) in plan.context_blocks.iter().zip(&plan.arm_blocks).enumerate() {
        let mh = &m_hats[b];
        if mh.shape() != (ctxs.len(), arms.len()) {
            return Err(Error::Dimension(format!(
                "block {b} estimate is {:?}, expected {:?}",
                mh.shape(),
                (ctxs.len(), arms.len())
            )));
        }
        let sub = a_hat.select_rows(ctxs);
        let x = least_squares(&sub, mh).map_err(|e| match e {
            Error::Singular { sigma_min, .. } => Error::Singular {
                sigma_min,
                block: Some(b),
            },
            other => other,
        })?;
        for (c, &arm) in arms.iter().enumerate() {
            for i in 0..m {
                w.set(i, arm, x.get(i, c));
            }
        }
    }
    Ok(w)
}
