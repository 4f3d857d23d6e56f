//! Online policies: NMF-Bandit and per-context UCB-1 / Thompson sampling.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::environment::{Accumulators, Environment, SamplingPlan};
use crate::error::{Error, Result};
use crate::genmodel::BanditInstance;
use crate::linalg::DenseMatrix;
use crate::nmf::{fit_a, fit_w_blocks, hottopix, HottopixConfig, NmfEstimate};

const POLICY_STREAM: u64 = 3;

/// S1: contexts arrive exogenously and regret is against each context's best
/// arm. S2: the policy picks context and arm, regret is against the best
/// entry of the whole matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    S1,
    S2,
}

/// One decision: the arm played and whether it was an explore step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub context: usize,
    pub arm: usize,
    pub explore: bool,
}

pub trait Policy {
    fn name(&self) -> &str;

    /// Chooses an arm for an exogenous `context` at step `t` (1-based).
    fn select_arm(&mut self, context: usize, t: u64) -> Result<Decision>;

    /// Chooses both context and arm (setting S2).
    fn select_pair(&mut self, _t: u64) -> Result<Decision> {
        Err(Error::Config(format!("policy {} cannot choose contexts", self.name())))
    }

    fn supports_pair(&self) -> bool {
        false
    }

    fn observe(&mut self, context: usize, arm: usize, reward: f64);
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Explore probability `min(1, theta (2m' + m) / (beta t))`.
pub fn epsilon_schedule(t: u64, theta: f64, m: usize, m_prime: usize, beta: f64) -> f64 {
    (theta * (2 * m_prime + m) as f64 / (beta * t as f64)).min(1.0)
}

/// Noise level `max(1/t, 2/sqrt(theta))` handed to anchor detection.
pub fn gamma_schedule(t: u64, theta: f64) -> f64 {
    (1.0 / t as f64).max(2.0 / theta.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RefitSchedule {
    EveryStep,
    /// Refit at steps growing by `ratio` (`next = max(t + 1, ceil(t * ratio))`).
    Geometric { ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMethod {
    LpHottopix,
    Spa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmfBanditConfig {
    pub m: usize,
    pub m_prime: usize,
    pub theta: f64,
    /// Smallest context probability; `None` takes it from the instance.
    pub beta_min: Option<f64>,
    pub refit: RefitSchedule,
    pub anchor_method: AnchorMethod,
    /// Row count above which the LP anchor path switches to projection.
    pub lp_max_rows: usize,
    pub seed: u64,
}

impl Default for NmfBanditConfig {
    fn default() -> Self {
        Self {
            m: 3,
            m_prime: 2,
            theta: 10.0,
            beta_min: None,
            refit: RefitSchedule::Geometric { ratio: 1.1 },
            anchor_method: AnchorMethod::LpHottopix,
            lp_max_rows: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pending {
    None,
    Shared { col: usize },
    Block { block: usize, row: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    estimate: Option<NmfEstimate>,
    u_hat: DenseMatrix,
    best_arm: Vec<usize>,
    best_pair: (usize, usize),
    fitted_at: u64,
}

impl Cache {
    fn new(estimate: Option<NmfEstimate>, u_hat: DenseMatrix, t: u64) -> Self {
        let best_arm: Vec<usize> =
            (0..u_hat.rows()).map(|s| argmax(u_hat.row(s).iter().copied())).collect();
        let flat = argmax(u_hat.data().iter().copied());
        Self {
            estimate,
            best_pair: (flat / u_hat.cols(), flat % u_hat.cols()),
            u_hat,
            best_arm,
            fitted_at: t,
        }
    }
}

/// Epsilon-greedy NMF-Bandit.
#[derive(Debug, Clone)]
pub struct NmfBandit {
    cfg: NmfBanditConfig,
    beta: f64,
    plan: SamplingPlan,
    acc: Accumulators,
    rng: ChaCha8Rng,
    cache: Option<Cache>,
    next_refit: u64,
    frozen: bool,
    pending: Pending,
    refit_failures: usize,
}

impl NmfBandit {
    pub fn new(
        cfg: NmfBanditConfig,
        num_contexts: usize,
        num_arms: usize,
        instance_beta_min: f64,
    ) -> Result<Self> {
        if !(cfg.theta > 0.0 && cfg.theta.is_finite()) {
            return Err(Error::Config(format!("theta = {} must be positive", cfg.theta)));
        }
        if let RefitSchedule::Geometric { ratio } = cfg.refit {
            if !(ratio > 1.0 && ratio.is_finite()) {
                return Err(Error::Config(format!("refit ratio {ratio} must exceed 1")));
            }
        }
        if cfg.m == 0 || cfg.m > num_contexts.min(num_arms) {
            return Err(Error::Config(format!(
                "m = {} must be in 1..=min(L, K) = {}",
                cfg.m,
                num_contexts.min(num_arms)
            )));
        }
        let beta = cfg.beta_min.unwrap_or(instance_beta_min);
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Config(format!("beta_min = {beta} must lie in (0, 1]")));
        }
        let plan = SamplingPlan::build(num_contexts, num_arms, cfg.m, cfg.m_prime, cfg.seed)?;
        let acc = Accumulators::new(&plan);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(POLICY_STREAM);
        Ok(Self {
            cfg,
            beta,
            plan,
            acc,
            rng,
            cache: None,
            next_refit: 1,
            frozen: false,
            pending: Pending::None,
            refit_failures: 0,
        })
    }

    pub fn for_instance(cfg: NmfBanditConfig, inst: &BanditInstance) -> Result<Self> {
        Self::new(cfg, inst.num_contexts(), inst.num_arms(), inst.beta_min())
    }

    pub fn config(&self) -> &NmfBanditConfig {
        &self.cfg
    }

    pub fn plan(&self) -> &SamplingPlan {
        &self.plan
    }

    pub fn accumulators(&self) -> &Accumulators {
        &self.acc
    }

    /// Direct access for tests that plant exact sample means.
    pub fn accumulators_mut(&mut self) -> &mut Accumulators {
        &mut self.acc
    }

    pub fn u_hat(&self) -> Option<&DenseMatrix> {
        self.cache.as_ref().map(|c| &c.u_hat)
    }

    pub fn estimate(&self) -> Option<&NmfEstimate> {
        self.cache.as_ref().and_then(|c| c.estimate.as_ref())
    }

    pub fn refit_failures(&self) -> usize {
        self.refit_failures
    }

    /// Replaces the reward estimate and stops further refits.
    pub fn inject_u_hat(&mut self, u_hat: DenseMatrix) -> Result<()> {
        if u_hat.shape() != (self.plan.num_contexts, self.plan.num_arms) {
            return Err(Error::Dimension("injected estimate has the wrong shape".into()));
        }
        self.cache = Some(Cache::new(None, u_hat, 0));
        self.frozen = true;
        Ok(())
    }

    pub fn epsilon(&self, t: u64) -> f64 {
        epsilon_schedule(t, self.cfg.theta, self.cfg.m, self.cfg.m_prime, self.beta)
    }

    /// Runs anchor detection and both fits on the current accumulators.
    pub fn fit(&self, t: u64) -> Result<NmfEstimate> {
        let f_hat = self.acc.f_hat();
        let mut hcfg = HottopixConfig::new(
            self.cfg.m,
            2.0 * self.cfg.m_prime as f64 * gamma_schedule(t, self.cfg.theta),
        );
        hcfg.lp_max_rows = match self.cfg.anchor_method {
            AnchorMethod::LpHottopix => self.cfg.lp_max_rows,
            AnchorMethod::Spa => 0,
        };
        let anchors = hottopix(&f_hat, &hcfg)?;
        let a_hat = fit_a(&f_hat, &anchors.w_hat)?;
        let w_hat = fit_w_blocks(&a_hat, &self.plan, &self.acc.m_hats())?;
        Ok(NmfEstimate {
            w_hat,
            a_hat,
            anchor_rows: anchors.anchor_rows,
        })
    }

    /// Refreshes the cached estimate; on failure the previous one is kept.
    pub fn refit(&mut self, t: u64) {
        match self.fit(t).and_then(|est| {
            let u_hat = est.a_hat.matmul(&est.w_hat)?;
            Ok((est, u_hat))
        }) {
            Ok((est, u_hat)) => self.cache = Some(Cache::new(Some(est), u_hat, t)),
            Err(e) => {
                self.refit_failures += 1;
                log::debug!("refit at t = {t} failed: {e}; keeping previous estimate");
            }
        }
    }

    fn maybe_refit(&mut self, t: u64) {
        if self.frozen {
            return;
        }
        let due = match self.cfg.refit {
            RefitSchedule::EveryStep => true,
            RefitSchedule::Geometric { .. } => t >= self.next_refit,
        };
        if due {
            self.refit(t);
            if let RefitSchedule::Geometric { ratio } = self.cfg.refit {
                self.next_refit = (t + 1).max((t as f64 * ratio).ceil() as u64);
            }
        }
    }

    /// Greedy arm for `context` under the current estimate (refitting if due);
    /// uniform random when no estimate exists yet.
    pub fn exploit_arm(&mut self, context: usize, t: u64) -> usize {
        self.maybe_refit(t);
        match &self.cache {
            Some(c) => c.best_arm[context],
            None => self.rng.random_range(0..self.plan.num_arms),
        }
    }

    fn explore_arm(&mut self, context: usize) -> usize {
        let two_mp = 2 * self.cfg.m_prime;
        let slot = self.plan.context_slot[context];
        let width = match slot {
            Some((b, _)) if self.plan.is_remainder_block(b) => self.plan.arm_blocks[b].len(),
            _ => self.cfg.m,
        };
        let p_shared = two_mp as f64 / (width + two_mp) as f64;
        if self.rng.random::<f64>() < p_shared {
            let col = self.rng.random_range(0..two_mp);
            self.pending = Pending::Shared { col };
            self.plan.s0_arms[col]
        } else if let Some((block, row)) = slot {
            let arms = &self.plan.arm_blocks[block];
            let col = self.rng.random_range(0..arms.len());
            self.pending = Pending::Block { block, row, col };
            arms[col]
        } else {
            // Unassigned context: pull anything, the sample is discarded.
            self.pending = Pending::None;
            self.rng.random_range(0..self.plan.num_arms)
        }
    }
}

impl Policy for NmfBandit {
    fn name(&self) -> &str {
        "nmf_bandit"
    }

    fn select_arm(&mut self, context: usize, t: u64) -> Result<Decision> {
        if context >= self.plan.num_contexts {
            return Err(Error::Dimension(format!("context {context} out of range")));
        }
        self.pending = Pending::None;
        let explore = self.rng.random::<f64>() < self.epsilon(t);
        let arm = if explore {
            self.explore_arm(context)
        } else {
            self.exploit_arm(context, t)
        };
        Ok(Decision {
            context,
            arm,
            explore,
        })
    }

    fn select_pair(&mut self, t: u64) -> Result<Decision> {
        self.pending = Pending::None;
        let explore = self.rng.random::<f64>() < self.epsilon(t);
        if explore {
            let context = self.rng.random_range(0..self.plan.num_contexts);
            let arm = self.explore_arm(context);
            return Ok(Decision {
                context,
                arm,
                explore,
            });
        }
        self.maybe_refit(t);
        let (context, arm) = match &self.cache {
            Some(c) => c.best_pair,
            None => (
                self.rng.random_range(0..self.plan.num_contexts),
                self.rng.random_range(0..self.plan.num_arms),
            ),
        };
        Ok(Decision {
            context,
            arm,
            explore,
        })
    }

    fn supports_pair(&self) -> bool {
        true
    }

    fn observe(&mut self, context: usize, _arm: usize, reward: f64) {
        match std::mem::replace(&mut self.pending, Pending::None) {
            Pending::None => {}
            Pending::Shared { col } => self.acc.record_shared(context, col, reward),
            Pending::Block { block, row, col } => self.acc.record_block(block, row, col, reward),
        }
    }
}

/// Per-cell statistics shared by the baselines. In S1 cells are
/// `(context, arm)` with one group per context; in S2 all `L*K` cells form a
/// single group.
#[derive(Debug, Clone)]
struct Cells {
    setting: Setting,
    num_arms: usize,
    group_size: usize,
}

impl Cells {
    fn new(setting: Setting, num_contexts: usize, num_arms: usize) -> Self {
        let group_size = match setting {
            Setting::S1 => num_arms,
            Setting::S2 => num_contexts * num_arms,
        };
        Self {
            setting,
            num_arms,
            group_size,
        }
    }

    fn cell(&self, context: usize, arm: usize) -> usize {
        context * self.num_arms + arm
    }

    fn group_range(&self, context: usize) -> std::ops::Range<usize> {
        match self.setting {
            Setting::S1 => context * self.num_arms..(context + 1) * self.num_arms,
            Setting::S2 => 0..self.group_size,
        }
    }

    fn decision(&self, flat: usize) -> Decision {
        Decision {
            context: flat / self.num_arms,
            arm: flat % self.num_arms,
            explore: false,
        }
    }

    fn require(&self, want: Setting, name: &str) -> Result<()> {
        if self.setting != want {
            return Err(Error::Config(format!(
                "{name} was built for {:?} but used in {want:?}",
                self.setting
            )));
        }
        Ok(())
    }
}

/// UCB-1 applied independently per context (or over all cells in S2).
#[derive(Debug, Clone)]
pub struct Ucb1 {
    cells: Cells,
    counts: Vec<u64>,
    sums: Vec<f64>,
    group_pulls: Vec<u64>,
}

/// `mean + sqrt(2 ln total / n)`.
pub fn ucb_index(mean: f64, n: u64, total: u64) -> f64 {
    mean + (2.0 * (total as f64).ln() / n as f64).sqrt()
}

impl Ucb1 {
    pub fn new(setting: Setting, num_contexts: usize, num_arms: usize) -> Self {
        let cells = Cells::new(setting, num_contexts, num_arms);
        let groups = match setting {
            Setting::S1 => num_contexts,
            Setting::S2 => 1,
        };
        Self {
            cells,
            counts: vec![0; num_contexts * num_arms],
            sums: vec![0.0; num_contexts * num_arms],
            group_pulls: vec![0; groups],
        }
    }

    fn group(&self, context: usize) -> usize {
        match self.cells.setting {
            Setting::S1 => context,
            Setting::S2 => 0,
        }
    }

    fn choose(&self, context: usize) -> usize {
        let range = self.cells.group_range(context);
        if let Some(c) = range.clone().find(|&c| self.counts[c] == 0) {
            return c;
        }
        let total = self.group_pulls[self.group(context)];
        let start = range.start;
        start
            + argmax(range.map(|c| {
                ucb_index(self.sums[c] / self.counts[c] as f64, self.counts[c], total)
            }))
    }
}

impl Policy for Ucb1 {
    fn name(&self) -> &str {
        "ucb1"
    }

    fn select_arm(&mut self, context: usize, _t: u64) -> Result<Decision> {
        self.cells.require(Setting::S1, "ucb1")?;
        Ok(self.cells.decision(self.choose(context)))
    }

    fn select_pair(&mut self, _t: u64) -> Result<Decision> {
        self.cells.require(Setting::S2, "ucb1")?;
        Ok(self.cells.decision(self.choose(0)))
    }

    fn supports_pair(&self) -> bool {
        true
    }

    fn observe(&mut self, context: usize, arm: usize, reward: f64) {
        let c = self.cells.cell(context, arm);
        self.counts[c] += 1;
        self.sums[c] += reward;
        let g = self.group(context);
        self.group_pulls[g] += 1;
    }
}

/// Thompson sampling with Beta(1, 1) priors per cell. Rewards are turned into
/// coin flips with success probability `clamp(reward / reward_scale, 0, 1)`.
#[derive(Debug, Clone)]
pub struct Thompson {
    cells: Cells,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    reward_scale: f64,
    rng: ChaCha8Rng,
}

impl Thompson {
    pub fn new(
        setting: Setting,
        num_contexts: usize,
        num_arms: usize,
        reward_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(reward_scale > 0.0 && reward_scale.is_finite()) {
            return Err(Error::Config(format!("reward_scale {reward_scale} must be positive")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(POLICY_STREAM);
        let n = num_contexts * num_arms;
        Ok(Self {
            cells: Cells::new(setting, num_contexts, num_arms),
            alpha: vec![1.0; n],
            beta: vec![1.0; n],
            reward_scale,
            rng,
        })
    }

    fn choose(&mut self, context: usize) -> usize {
        let range = self.cells.group_range(context);
        let start = range.start;
        let mut best = start;
        let mut best_v = f64::NEG_INFINITY;
        for c in range {
            let d = Beta::new(self.alpha[c], self.beta[c]).expect("positive parameters");
            let v: f64 = d.sample(&mut self.rng);
            if v > best_v {
                best = c;
                best_v = v;
            }
        }
        best
    }
}

impl Policy for Thompson {
    fn name(&self) -> &str {
        "thompson"
    }

    fn select_arm(&mut self, context: usize, _t: u64) -> Result<Decision> {
        self.cells.require(Setting::S1, "thompson")?;
        let c = self.choose(context);
        Ok(self.cells.decision(c))
    }

    fn select_pair(&mut self, _t: u64) -> Result<Decision> {
        self.cells.require(Setting::S2, "thompson")?;
        let c = self.choose(0);
        Ok(self.cells.decision(c))
    }

    fn supports_pair(&self) -> bool {
        true
    }

    fn observe(&mut self, context: usize, arm: usize, reward: f64) {
        let c = self.cells.cell(context, arm);
        let p = (reward / self.reward_scale).clamp(0.0, 1.0);
        if self.rng.random::<f64>() < p {
            self.alpha[c] += 1.0;
        } else {
            self.beta[c] += 1.0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub context: usize,
    pub arm: usize,
    pub reward: f64,
    pub explore: bool,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub final_regret: f64,
    pub explore_count: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub records: Vec<StepRecord>,
    pub summary: TraceSummary,
}

impl RegretTrace {
    /// Per-step regret recovered from the cumulative column.
    pub fn instantaneous(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.records
            .iter()
            .map(|r| {
                let d = r.cum_regret - prev;
                prev = r.cum_regret;
                d
            })
            .collect()
    }
}

/// Simulates `horizon` steps of `policy` on `inst`.
pub fn run_policy(
    inst: &BanditInstance,
    policy: &mut dyn Policy,
    horizon: u64,
    setting: Setting,
    seed: u64,
) -> Result<RegretTrace> {
    if horizon == 0 {
        return Err(Error::Config("horizon T must be at least 1".into()));
    }
    if setting == Setting::S2 && !policy.supports_pair() {
        return Err(Error::Config(format!(
            "policy {} cannot choose contexts (setting S2)",
            policy.name()
        )));
    }
    let start = Instant::now();
    let mut env = Environment::new(inst, seed);
    let u = inst.u();
    let global = inst.global_best().2;
    let mut records = Vec::with_capacity(horizon as usize);
    let mut cum = 0.0;
    let mut explore_count = 0;
    for t in 1..=horizon {
        let d = match setting {
            Setting::S1 => {
                let s = env.next_context();
                policy.select_arm(s, t)?
            }
            Setting::S2 => policy.select_pair(t)?,
        };
        if d.context >= u.rows() || d.arm >= u.cols() {
            return Err(Error::Dimension(format!(
                "policy chose ({}, {}) outside {}x{}",
                d.context,
                d.arm,
                u.rows(),
                u.cols()
            )));
        }
        let reward = env.pull(d.context, d.arm);
        policy.observe(d.context, d.arm, reward);
        let reference = match setting {
            Setting::S1 => inst.best_value(d.context),
            Setting::S2 => global,
        };
        cum += reference - u.get(d.context, d.arm);
        explore_count += u64::from(d.explore);
        records.push(StepRecord {
            t,
            context: d.context,
            arm: d.arm,
            reward,
            explore: d.explore,
            cum_regret: cum,
        });
    }
    Ok(RegretTrace {
        records,
        summary: TraceSummary {
            final_regret: cum,
            explore_count,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::{generate_simple, RewardModel};

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_schedule(3, 1.0, 1, 1, 1.0), 1.0);
        assert_eq!(epsilon_schedule(6, 1.0, 1, 1, 1.0), 0.5);
        assert_eq!(epsilon_schedule(1, 0.01, 1, 1, 1.0), 0.03);
        assert_eq!(epsilon_schedule(1, 5.0, 3, 2, 0.1), 1.0);
        let mut prev = 1.0;
        for t in 1..100 {
            let e = epsilon_schedule(t, 2.0, 2, 1, 0.2);
            assert!(e <= prev && e > 0.0);
            prev = e;
        }
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_schedule(10, 4.0), 1.0);
        assert_eq!(gamma_schedule(2, 1e6), 0.5);
        assert!((gamma_schedule(10_000, 1e6) - 0.002).abs() < 1e-15);
    }

    #[test]
    fn ucb_index_formula() {
        assert_eq!(ucb_index(0.5, 2, 8), 0.5 + (2.0 * 8f64.ln() / 2.0).sqrt());
    }

    #[test]
    fn ucb_initializes_in_order() {
        let mut p = Ucb1::new(Setting::S1, 2, 4);
        for k in 0..4 {
            let d = p.select_arm(1, k + 1).unwrap();
            assert_eq!(d.arm, k as usize);
            p.observe(1, d.arm, 1.0);
        }
        assert_eq!(p.select_arm(0, 5).unwrap().arm, 0);
        assert!(p.select_pair(1).is_err());
    }

    #[test]
    fn thompson_finds_deterministic_arm() {
        let mut p = Thompson::new(Setting::S1, 1, 4, 1.0, 7).unwrap();
        let mut good = 0;
        for t in 1..=10_000u64 {
            let d = p.select_arm(0, t).unwrap();
            let r = if d.arm == 2 { 1.0 } else { 0.0 };
            p.observe(0, d.arm, r);
            if t >= 1000 && d.arm == 2 {
                good += 1;
            }
        }
        assert!(good as f64 / 9001.0 > 0.95);
    }

    #[test]
    fn nmf_bandit_explores_while_epsilon_is_one() {
        let inst = generate_simple(40, 12, 3, 0.0, 2).unwrap();
        let cfg = NmfBanditConfig {
            theta: 10.0,
            ..Default::default()
        };
        let mut p = NmfBandit::for_instance(cfg, &inst).unwrap();
        // theta (2m'+m) / beta = 10 * 7 * 40, far beyond 100 steps.
        let trace = run_policy(&inst, &mut p, 100, Setting::S1, 0).unwrap();
        assert!(trace.records.iter().all(|r| r.explore));
        assert!(p.u_hat().is_none());
    }

    #[test]
    fn nmf_bandit_rejects_bad_config() {
        let cfg = NmfBanditConfig {
            theta: 0.0,
            ..Default::default()
        };
        assert!(NmfBandit::new(cfg, 40, 12, 0.025).is_err());
        let cfg = NmfBanditConfig {
            refit: RefitSchedule::Geometric { ratio: 1.0 },
            ..Default::default()
        };
        assert!(NmfBandit::new(cfg, 40, 12, 0.025).is_err());
        assert!(matches!(
            NmfBandit::new(NmfBanditConfig::default(), 10, 12, 0.1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn nmf_bandit_injected_estimate_is_exploited() {
        let inst = generate_simple(40, 12, 3, 0.0, 2).unwrap();
        let mut p = NmfBandit::for_instance(NmfBanditConfig::default(), &inst).unwrap();
        p.inject_u_hat(inst.u().clone()).unwrap();
        for s in 0..40 {
            assert_eq!(p.exploit_arm(s, 1_000_000), inst.best_arm(s));
        }
    }

    #[test]
    fn s2_requires_context_choice() {
        struct Fixed;
        impl Policy for Fixed {
            fn name(&self) -> &str {
                "fixed"
            }
            fn select_arm(&mut self, context: usize, _t: u64) -> Result<Decision> {
                Ok(Decision { context, arm: 0, explore: false })
            }
            fn observe(&mut self, _: usize, _: usize, _: f64) {}
        }
        let inst = generate_simple(6, 3, 2, 0.0, 0).unwrap();
        assert!(matches!(
            run_policy(&inst, &mut Fixed, 5, Setting::S2, 0),
            Err(Error::Config(_))
        ));
        let t = run_policy(&inst, &mut Fixed, 1, Setting::S1, 0).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.summary.final_regret, t.instantaneous()[0]);
        assert!(run_policy(&inst, &mut Fixed, 0, Setting::S1, 0).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = generate_simple(40, 12, 3, 0.05, 9)
            .unwrap()
            .with_reward_model(RewardModel::UniformWidth { width: 0.4 })
            .unwrap();
        let cfg = NmfBanditConfig {
            theta: 0.05,
            anchor_method: AnchorMethod::Spa,
            seed: 4,
            ..Default::default()
        };
        let run = || {
            let mut p = NmfBandit::for_instance(cfg.clone(), &inst).unwrap();
            run_policy(&inst, &mut p, 3000, Setting::S1, 12).unwrap().records
        };
        assert_eq!(run(), run());
    }
}
