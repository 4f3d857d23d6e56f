//! Bandit instances and their generators, plus weak statistical RIP checks.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psi1_m, singular_values, DenseMatrix};

/// Stream used for the "arbitrary" entries so they are reproducible but
/// independent of the main generator stream.
const ADVERSARY_STREAM: u64 = 7;
const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardModel {
    Bernoulli,
    /// Uniform on `[mean - width/2, mean + width/2]`, not clipped.
    UniformWidth { width: f64 },
}

/// Ground truth for one bandit problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    u: DenseMatrix,
    a: Option<DenseMatrix>,
    w: Option<DenseMatrix>,
    beta: Vec<f64>,
    cum_beta: Vec<f64>,
    reward_model: RewardModel,
    best_arm: Vec<usize>,
    best_value: Vec<f64>,
    gap: f64,
    zero_gap: bool,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

impl BanditInstance {
    pub fn new(
        u: DenseMatrix,
        factors: Option<(DenseMatrix, DenseMatrix)>,
        beta: Vec<f64>,
        reward_model: RewardModel,
    ) -> Result<Self> {
        let (l, k) = u.shape();
        if beta.len() != l {
            return Err(Error::Dimension(format!("beta has {} entries for {l} contexts", beta.len())));
        }
        if beta.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::Parameter("context probabilities must be positive".into()));
        }
        let total: f64 = beta.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("context probabilities sum to {total}")));
        }
        match reward_model {
            RewardModel::Bernoulli => {
                if u.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::Mode("Bernoulli rewards need all means in [0, 1]".into()));
                }
            }
            RewardModel::UniformWidth { width } => {
                if !(width.is_finite() && width > 0.0) {
                    return Err(Error::Mode(format!("uniform reward width {width} must be positive")));
                }
            }
        }
        let (a, w) = match factors {
            Some((a, w)) => {
                if a.rows() != l || w.cols() != k || a.cols() != w.rows() {
                    return Err(Error::Dimension("factor shapes do not match U".into()));
                }
                if a.data().iter().chain(w.data()).any(|v| *v < 0.0) {
                    return Err(Error::Parameter("factors must be nonnegative".into()));
                }
                for i in 0..l {
                    let s: f64 = a.row(i).iter().sum();
                    if (s - 1.0).abs() > 1e-9 {
                        return Err(Error::Parameter(format!("row {i} of A sums to {s}")));
                    }
                }
                let resid = u.sub(&a.matmul(&w)?)?.norm_inf_inf()?;
                if resid > 1e-10 {
                    return Err(Error::Parameter(format!("U differs from AW by {resid:e}")));
                }
                (Some(a), Some(w))
            }
            None => (None, None),
        };

        let mut cum_beta: Vec<f64> = beta
            .iter()
            .scan(0.0, |acc, b| {
                *acc += b;
                Some(*acc)
            })
            .collect();
        *cum_beta.last_mut().expect("nonempty") = 1.0;

        let best_arm: Vec<usize> = (0..l).map(|s| argmax(u.row(s))).collect();
        let best_value: Vec<f64> = (0..l).map(|s| u.get(s, best_arm[s])).collect();
        let gap = if k < 2 {
            0.0
        } else {
            (0..l)
                .map(|s| {
                    let second = u
                        .row(s)
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != best_arm[s])
                        .map(|(_, v)| *v)
                        .fold(f64::NEG_INFINITY, f64::max);
                    best_value[s] - second
                })
                .fold(f64::INFINITY, f64::min)
        };
        let zero_gap = k >= 2 && gap <= 0.0;
        if zero_gap {
            log::warn!("reward matrix has a context whose two best arms tie; gap is 0");
        }
        Ok(Self {
            u,
            a,
            w,
            beta,
            cum_beta,
            reward_model,
            best_arm,
            best_value,
            gap,
            zero_gap,
        })
    }

    /// Instance without factors and with uniform context probabilities.
    pub fn from_matrix(u: DenseMatrix, reward_model: RewardModel) -> Result<Self> {
        let l = u.rows();
        Self::new(u, None, vec![1.0 / l as f64; l], reward_model)
    }

    pub fn with_reward_model(self, reward_model: RewardModel) -> Result<Self> {
        let factors = self.a.zip(self.w);
        Self::new(self.u, factors, self.beta, reward_model)
    }

    pub fn num_contexts(&self) -> usize {
        self.u.rows()
    }

    pub fn num_arms(&self) -> usize {
        self.u.cols()
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn a(&self) -> Option<&DenseMatrix> {
        self.a.as_ref()
    }

    pub fn w(&self) -> Option<&DenseMatrix> {
        self.w.as_ref()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn beta_min(&self) -> f64 {
        self.beta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn cum_beta(&self) -> &[f64] {
        &self.cum_beta
    }

    pub fn reward_model(&self) -> RewardModel {
        self.reward_model
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// True when some context has two arms tied for best.
    pub fn zero_gap(&self) -> bool {
        self.zero_gap
    }

    pub fn best_arm(&self, context: usize) -> usize {
        self.best_arm[context]
    }

    pub fn best_value(&self, context: usize) -> f64 {
        self.best_value[context]
    }

    /// `(context, arm, value)` of the largest mean, lowest indices on ties.
    pub fn global_best(&self) -> (usize, usize, f64) {
        let s = argmax(&self.best_value);
        (s, self.best_arm[s], self.best_value[s])
    }

    /// Rows of `A` equal to the unit vectors, indexed by latent dimension.
    pub fn anchor_rows(&self) -> Option<Vec<usize>> {
        let a = self.a.as_ref()?;
        (0..a.cols())
            .map(|i| {
                (0..a.rows()).find(|&s| {
                    a.row(s)
                        .iter()
                        .enumerate()
                        .all(|(j, v)| (v - if j == i { 1.0 } else { 0.0 }).abs() <= 1e-12)
                })
            })
            .collect()
    }

    pub fn sample_reward(&self, context: usize, arm: usize, rng: &mut impl Rng) -> f64 {
        let mean = self.u.get(context, arm);
        match self.reward_model {
            RewardModel::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardModel::UniformWidth { width } => mean + width * (rng.random::<f64>() - 0.5),
        }
    }
}

fn adversary_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ADVERSARY_STREAM);
    rng
}

/// Uniform point of the probability simplex via sorted uniform gaps.
fn simplex_point(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut cuts: Vec<f64> = (0..m - 1).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(m);
    let mut prev = 0.0;
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(1.0 - prev);
    out
}

fn product_clamped(a: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    let u = a.matmul(w)?;
    let data = u.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    DenseMatrix::new(u.rows(), u.cols(), data)
}

/// Simple synthetic model: simplex rows of `A` with `m` identity rows, uniform
/// `W` with a fraction of each row replaced by arbitrary values in `[0, 1]`.
/// Rewards default to Bernoulli.
pub fn generate_simple(
    l: usize,
    k: usize,
    m: usize,
    corrupt_frac: f64,
    seed: u64,
) -> Result<BanditInstance> {
    if m == 0 || m > l.min(k) {
        return Err(Error::Dimension(format!("m = {m} must be in 1..=min(L, K) = {}", l.min(k))));
    }
    if !(0.0..=0.2).contains(&corrupt_frac) {
        return Err(Error::Parameter(format!("corrupt_frac {corrupt_frac} outside [0, 0.2]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DenseMatrix::zeros(l, m);
    for s in 0..l {
        a.row_mut(s).copy_from_slice(&simplex_point(m, &mut rng));
    }
    let anchors = index::sample(&mut rng, l, m).into_vec();
    for (i, &s) in anchors.iter().enumerate() {
        let row = a.row_mut(s);
        row.fill(0.0);
        row[i] = 1.0;
    }
    let mut w = DenseMatrix::from_fn(m, k, |_, _| rng.random::<f64>());
    let n_corrupt = (corrupt_frac * k as f64).round() as usize;
    if n_corrupt > 0 {
        let mut adv = adversary_rng(seed);
        for i in 0..m {
            for j in index::sample(&mut adv, k, n_corrupt) {
                let x: f64 = adv.random::<f64>().powi(3);
                let v = if adv.random_bool(0.5) { x } else { 1.0 - x };
                w.set(i, j, v);
            }
        }
    }
    let u = product_clamped(&a, &w)?;
    BanditInstance::new(u, Some((a, w)), vec![1.0 / l as f64; l], RewardModel::Bernoulli)
}

/// Parameters of the semi-random model with deterministic and random parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheoryModelParams {
    pub l: usize,
    pub k: usize,
    pub m: usize,
    /// Fraction of deterministic columns of `W`, at most `1/(32m)`.
    pub det_col_frac: f64,
    /// Fraction of deterministic rows of `A`, at most `1/18`.
    pub det_row_frac: f64,
    /// Upper bound on non-anchor entries of `A`; must exceed `1/m`.
    pub gamma: f64,
    /// Variance of the zero-mean random entries.
    pub q: f64,
    /// Bound on the l2 norm of each perturbation column of `W`.
    pub noise_perturbation_norm: f64,
    /// Truncation radius of the random entries of `W`.
    pub truncation_radius: f64,
    pub seed: u64,
}

impl Default for TheoryModelParams {
    fn default() -> Self {
        Self {
            l: 200,
            k: 100,
            m: 3,
            det_col_frac: 1.0 / 96.0,
            det_row_frac: 1.0 / 18.0,
            gamma: 0.9,
            q: 0.01,
            noise_perturbation_norm: 0.2,
            truncation_radius: 0.25,
            seed: 0,
        }
    }
}

impl TheoryModelParams {
    fn validate(&self) -> Result<()> {
        let m = self.m;
        if m == 0 || m > self.l.min(self.k) {
            return Err(Error::Dimension(format!("m = {m} must be in 1..=min(L, K)")));
        }
        let checks = [
            (
                self.det_col_frac >= 0.0 && self.det_col_frac <= 1.0 / (32.0 * m as f64) + 1e-12,
                "det_col_frac must lie in [0, 1/(32m)]",
            ),
            (
                self.det_row_frac >= 0.0 && self.det_row_frac <= 1.0 / 18.0 + 1e-12,
                "det_row_frac must lie in [0, 1/18]",
            ),
            (self.gamma > 1.0 / m as f64 && self.gamma < 1.0, "gamma must lie in (1/m, 1)"),
            (self.q > 0.0 && self.q.is_finite(), "q must be positive"),
            (self.noise_perturbation_norm >= 0.0, "noise_perturbation_norm must be >= 0"),
            (self.truncation_radius > 0.0, "truncation_radius must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Parameter(msg.into()));
            }
        }
        if 0.5 + self.noise_perturbation_norm + self.truncation_radius > 1.0 {
            return Err(Error::Parameter(format!(
                "random W entries 0.5 +/- ({} + {}) leave [0, 1]",
                self.noise_perturbation_norm, self.truncation_radius
            )));
        }
        Ok(())
    }
}

/// Zero-mean Gaussian with variance `q`, truncated to `[-radius, radius]`.
fn truncated_gaussian(q: f64, radius: f64, rng: &mut impl Rng) -> Result<f64> {
    let normal = Normal::new(0.0, q.sqrt()).map_err(|e| Error::Parameter(e.to_string()))?;
    for _ in 0..MAX_REJECTIONS {
        let x: f64 = normal.sample(rng);
        if x.abs() <= radius {
            return Ok(x);
        }
    }
    Err(Error::Parameter(format!(
        "truncated Gaussian sampling failed after {MAX_REJECTIONS} draws (q = {q}, radius = {radius})"
    )))
}

/// Semi-random model: deterministic columns of `W` carry every row maximum,
/// remaining columns are `0.5 + R + noise`; `A` has deterministic rows
/// (including an identity block) and row-normalized random rows whose
/// entries lie in `[1/m, gamma]` before normalization.
pub fn generate_theory(p: &TheoryModelParams) -> Result<BanditInstance> {
    p.validate()?;
    let (l, k, m) = (p.l, p.k, p.m);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut adv = adversary_rng(p.seed);

    let n_det_cols = (p.det_col_frac * k as f64 + 1e-9).floor() as usize;
    let det_cols = index::sample(&mut rng, k, n_det_cols).into_vec();
    let mut is_det_col = vec![false; k];
    det_cols.iter().for_each(|&j| is_det_col[j] = true);
    let mut w = DenseMatrix::zeros(m, k);
    for j in 0..k {
        if is_det_col[j] {
            for i in 0..m {
                w.set(i, j, 0.9 * adv.random::<f64>());
            }
        } else {
            let dir: Vec<f64> = (0..m).map(|_| adv.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let scale = p.noise_perturbation_norm * adv.random::<f64>() / norm;
            for i in 0..m {
                let noise = truncated_gaussian(p.q, p.truncation_radius, &mut rng)?;
                w.set(i, j, 0.5 + dir[i] * scale + noise);
            }
        }
    }
    if !det_cols.is_empty() {
        for i in 0..m {
            w.set(i, det_cols[i % det_cols.len()], 1.0);
        }
    }

    let n_det_rows = ((p.det_row_frac * l as f64 + 1e-9).floor() as usize).max(m);
    let det_rows = index::sample(&mut rng, l, n_det_rows).into_vec();
    let mut is_det_row = vec![false; l];
    det_rows.iter().for_each(|&s| is_det_row[s] = true);
    let mut a = DenseMatrix::zeros(l, m);
    let inv_m = 1.0 / m as f64;
    for (idx, &s) in det_rows.iter().enumerate() {
        let row = if idx < m {
            let mut e = vec![0.0; m];
            e[idx] = 1.0;
            e
        } else {
            // Shrink an arbitrary simplex point toward uniform until its
            // largest entry is at most gamma.
            let x = simplex_point(m, &mut adv);
            let mx = x.iter().copied().fold(0.0, f64::max);
            let t = if mx > p.gamma { (p.gamma - inv_m) / (mx - inv_m) } else { 1.0 };
            x.iter().map(|v| t * v + (1.0 - t) * inv_m).collect()
        };
        a.row_mut(s).copy_from_slice(&row);
    }
    let mid = 0.5 * (inv_m + p.gamma);
    let radius = 0.5 * (p.gamma - inv_m);
    for s in (0..l).filter(|&s| !is_det_row[s]) {
        let mut row = Vec::with_capacity(m);
        for _ in 0..m {
            row.push(mid + truncated_gaussian(p.q, radius, &mut rng)?);
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
        a.row_mut(s).copy_from_slice(&row);
    }

    let u = product_clamped(&a, &w)?;
    BanditInstance::new(u, Some((a, w)), vec![1.0 / l as f64; l], RewardModel::Bernoulli)
}

/// Instance family used by the regret lower bound: every context belongs to
/// exactly one latent class of size `L/m`, each class has its own best arm.
pub fn generate_lower_bound(l: usize, k: usize, m: usize, seed: u64) -> Result<BanditInstance> {
    if m == 0 || l % m != 0 {
        return Err(Error::Parameter(format!("m = {m} must divide L = {l}")));
    }
    if k < m.max(2) {
        return Err(Error::Parameter(format!("need K >= max(m, 2) distinct best arms, got K = {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = index::sample(&mut rng, l, l).into_vec();
    let size = l / m;
    let mut a = DenseMatrix::zeros(l, m);
    for (pos, &s) in order.iter().enumerate() {
        a.set(s, pos / size, 1.0);
    }
    let best = index::sample(&mut rng, k, m).into_vec();
    let mut w = DenseMatrix::from_fn(m, k, |_, _| rng.random_range(0.1..0.6));
    for (i, &b) in best.iter().enumerate() {
        w.set(i, b, 0.9);
    }
    let u = a.matmul(&w)?;
    BanditInstance::new(u, Some((a, w)), vec![1.0 / l as f64; l], RewardModel::Bernoulli)
}

/// Bernoulli KL divergence with the `0 log 0 = 0` convention.
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// Problem-dependent constant of the regret lower bound: the smallest
/// `(K-1) gap(class) / KL(U_sk, lambda)` over classes and suboptimal arms,
/// with `lambda = (max U + 1) / 2`. Arms with zero divergence are skipped.
pub fn lower_bound_constant(inst: &BanditInstance) -> Result<f64> {
    if inst.reward_model() != RewardModel::Bernoulli {
        return Err(Error::Mode("lower bound is defined for Bernoulli rewards".into()));
    }
    let a = inst
        .a()
        .ok_or_else(|| Error::Capability("lower bound needs the class assignment A".into()))?;
    let u = inst.u();
    let k = u.cols();
    let u_max = u.norm_inf_inf()?;
    let lambda = (u_max + 1.0) / 2.0;
    let mut best = f64::INFINITY;
    for i in 0..a.cols() {
        let members: Vec<usize> = (0..a.rows()).filter(|&s| a.get(s, i) == 1.0).collect();
        let Some(&s) = members.first() else { continue };
        let row = u.row(s);
        let star = inst.best_arm(s);
        let second = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != star)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = row[star] - second;
        for (j, &v) in row.iter().enumerate() {
            if j == star {
                continue;
            }
            let kl = kl_bernoulli(v, lambda);
            if kl > 0.0 {
                best = best.min((k as f64 - 1.0) * gap / kl);
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Parameter("no suboptimal arm with positive divergence".into()))
    }
}

/// Right-hand side of the regret lower bound with the universal constant set
/// to 1: `(K-1) m D(U) ((1-alpha)(ln(T/2m) - ln(L/m)) - ln(4K))`.
pub fn lower_bound_value(inst: &BanditInstance, t: f64, alpha: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Parameter("T must be positive".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter("alpha must lie in (0, 1)".into()));
    }
    let d = lower_bound_constant(inst)?;
    let m = inst.a().map(|a| a.cols()).unwrap_or(1) as f64;
    let k = inst.num_arms() as f64;
    let l = inst.num_contexts() as f64;
    let c = 1.0;
    Ok((k - 1.0) * m * d * ((1.0 - alpha) * ((t / (2.0 * m)).ln() - (l / m).ln()) - (4.0 * k * c).ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WstripReport {
    /// 5th percentile (nearest rank) of the sampled values.
    pub empirical_rho: f64,
    /// Fraction of sampled subsets whose value is below `threshold`.
    pub failure_frequency: f64,
    pub threshold: f64,
    pub values: Vec<f64>,
}

/// Threshold for the l1 check on `2m'`-column subsets.
pub fn wstrip_l1_threshold(m: usize, m_prime: usize) -> f64 {
    13.0 / 60.0 * (15.0 * m_prime as f64).sqrt() / (8.0 * m as f64).sqrt()
}

/// Threshold for the l2 check on `2m'`-row subsets.
pub fn wstrip_l2_threshold(m: usize, m_prime: usize) -> f64 {
    (m_prime as f64).sqrt() / (20.0 * m as f64)
}

fn report(mut values: Vec<f64>, threshold: f64) -> WstripReport {
    let n = values.len();
    let failures = values.iter().filter(|v| **v < threshold).count();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.05 * n as f64).ceil() as usize).clamp(1, n) - 1;
    values.shrink_to_fit();
    WstripReport {
        empirical_rho: sorted[rank],
        failure_frequency: failures as f64 / n as f64,
        threshold,
        values,
    }
}

fn check_subsets(trials: usize, two_mp: usize, total: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    if two_mp == 0 || two_mp > total {
        return Err(Error::Dimension(format!("subset size {two_mp} exceeds {total}")));
    }
    Ok(())
}

/// Samples `trials` column subsets of size `2m'` and evaluates `psi1_m` on each.
pub fn check_wstrip_l1(
    w: &DenseMatrix,
    m_prime: usize,
    trials: usize,
    seed: u64,
    threshold: Option<f64>,
) -> Result<WstripReport> {
    check_subsets(trials, 2 * m_prime, w.cols())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let cols = index::sample(&mut rng, w.cols(), 2 * m_prime).into_vec();
        values.push(psi1_m(&w.select_cols(&cols))?);
    }
    let th = threshold.unwrap_or_else(|| wstrip_l1_threshold(w.rows(), m_prime));
    Ok(report(values, th))
}

/// Samples `trials` row subsets of size `2m'` and evaluates the `m`-th
/// singular value of each.
pub fn check_wstrip_l2(
    a: &DenseMatrix,
    m_prime: usize,
    trials: usize,
    seed: u64,
    threshold: Option<f64>,
) -> Result<WstripReport> {
    check_subsets(trials, 2 * m_prime, a.rows())?;
    let m = a.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let rows = index::sample(&mut rng, a.rows(), 2 * m_prime).into_vec();
        let s = singular_values(&a.select_rows(&rows))?;
        values.push(s.get(m - 1).copied().unwrap_or(0.0));
    }
    let th = threshold.unwrap_or_else(|| wstrip_l2_threshold(m, m_prime));
    Ok(report(values, th))
}
