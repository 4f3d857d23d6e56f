//! Context arrival, reward draws and the explore-phase sampling structures.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::genmodel::BanditInstance;
use crate::linalg::DenseMatrix;

/// Arm subsets and context blocks fixed at the start of an NMF-Bandit run.
///
/// Blocks are 0-based here: arm block `i` holds arms `i*m .. (i+1)*m`, and a
/// trailing block holds the `K mod m` remainder arms when that is nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    pub num_contexts: usize,
    pub num_arms: usize,
    pub m: usize,
    pub m_prime: usize,
    /// `2m'` distinct arms (ascending) sampled for the shared submatrix.
    pub s0_arms: Vec<usize>,
    /// One set of `2m'` contexts per arm block.
    pub context_blocks: Vec<Vec<usize>>,
    pub arm_blocks: Vec<Vec<usize>>,
    /// For each context, its `(block, row within block)` if assigned.
    pub context_slot: Vec<Option<(usize, usize)>>,
    pub has_remainder: bool,
}

impl SamplingPlan {
    pub fn build(
        num_contexts: usize,
        num_arms: usize,
        m: usize,
        m_prime: usize,
        seed: u64,
    ) -> Result<Self> {
        if m == 0 || m > num_arms {
            return Err(Error::Config(format!(
                "latent dimension m = {m} must satisfy 1 <= m <= K = {num_arms}"
            )));
        }
        if m_prime == 0 || 2 * m_prime > num_arms {
            return Err(Error::Config(format!(
                "2m' = {} must be between 2 and K = {num_arms}",
                2 * m_prime
            )));
        }
        let l = num_arms / m;
        let r = num_arms % m;
        let blocks = l + usize::from(r > 0);
        let needed = 2 * blocks * m_prime;
        if num_contexts < needed {
            return Err(Error::Config(format!(
                "need L >= 2 * {blocks} * m' = {needed} contexts (K = {num_arms}, m = {m}, m' = {m_prime}), got L = {num_contexts}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s0_arms = index::sample(&mut rng, num_arms, 2 * m_prime).into_vec();
        s0_arms.sort_unstable();
        let picked = index::sample(&mut rng, num_contexts, needed).into_vec();
        let context_blocks: Vec<Vec<usize>> =
            picked.chunks(2 * m_prime).map(|c| c.to_vec()).collect();
        let arm_blocks: Vec<Vec<usize>> = (0..blocks)
            .map(|i| (i * m..((i + 1) * m).min(num_arms)).collect())
            .collect();
        let mut context_slot = vec![None; num_contexts];
        for (b, ctxs) in context_blocks.iter().enumerate() {
            for (row, &s) in ctxs.iter().enumerate() {
                context_slot[s] = Some((b, row));
            }
        }
        Ok(Self {
            num_contexts,
            num_arms,
            m,
            m_prime,
            s0_arms,
            context_blocks,
            arm_blocks,
            context_slot,
            has_remainder: r > 0,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.arm_blocks.len()
    }

    pub fn block_of(&self, context: usize) -> Option<usize> {
        self.context_slot[context].map(|(b, _)| b)
    }

    /// True when `block` is the trailing block of `K mod m` arms.
    pub fn is_remainder_block(&self, block: usize) -> bool {
        self.has_remainder && block + 1 == self.arm_blocks.len()
    }
}

/// Running reward sums and pull counts for the shared submatrix and for each
/// block submatrix. Estimates are per-entry sample means; entries never
/// sampled read as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulators {
    width0: usize,
    f_sum: Vec<f64>,
    f_count: Vec<u64>,
    block_shape: Vec<(usize, usize)>,
    m_sum: Vec<Vec<f64>>,
    m_count: Vec<Vec<u64>>,
}

impl Accumulators {
    pub fn new(plan: &SamplingPlan) -> Self {
        let width0 = plan.s0_arms.len();
        let block_shape: Vec<(usize, usize)> = plan
            .context_blocks
            .iter()
            .zip(&plan.arm_blocks)
            .map(|(c, a)| (c.len(), a.len()))
            .collect();
        Self {
            width0,
            f_sum: vec![0.0; plan.num_contexts * width0],
            f_count: vec![0; plan.num_contexts * width0],
            m_sum: block_shape.iter().map(|(r, c)| vec![0.0; r * c]).collect(),
            m_count: block_shape.iter().map(|(r, c)| vec![0; r * c]).collect(),
            block_shape,
        }
    }

    /// Records a reward for `context` on the `col`-th arm of the shared subset.
    pub fn record_shared(&mut self, context: usize, col: usize, reward: f64) {
        let k = context * self.width0 + col;
        self.f_sum[k] += reward;
        self.f_count[k] += 1;
    }

    pub fn record_block(&mut self, block: usize, row: usize, col: usize, reward: f64) {
        let k = row * self.block_shape[block].1 + col;
        self.m_sum[block][k] += reward;
        self.m_count[block][k] += 1;
    }

    pub fn shared_count(&self, context: usize, col: usize) -> u64 {
        self.f_count[context * self.width0 + col]
    }

    pub fn total_count(&self) -> u64 {
        self.f_count.iter().sum::<u64>() + self.m_count.iter().flatten().sum::<u64>()
    }

    fn means(sum: &[f64], count: &[u64]) -> Vec<f64> {
        sum.iter()
            .zip(count)
            .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }

    /// Estimate of `U` restricted to the shared arm subset (`L x 2m'`).
    pub fn f_hat(&self) -> DenseMatrix {
        let rows = self.f_sum.len() / self.width0;
        DenseMatrix::new(rows, self.width0, Self::means(&self.f_sum, &self.f_count))
            .expect("accumulator shapes are consistent")
    }

    /// Estimate of `U` on block `i`'s contexts and arms.
    pub fn m_hat(&self, block: usize) -> DenseMatrix {
        let (r, c) = self.block_shape[block];
        DenseMatrix::new(r, c, Self::means(&self.m_sum[block], &self.m_count[block]))
            .expect("accumulator shapes are consistent")
    }

    pub fn m_hats(&self) -> Vec<DenseMatrix> {
        (0..self.block_shape.len()).map(|i| self.m_hat(i)).collect()
    }
}

/// Picks a uniform arm from `arms` and draws its reward for `context`.
pub fn matrix_sample(
    inst: &BanditInstance,
    context: usize,
    arms: &[usize],
    rng: &mut impl Rng,
) -> Result<(usize, f64)> {
    if arms.is_empty() {
        return Err(Error::Parameter("matrix_sample needs a nonempty arm set".into()));
    }
    if context >= inst.num_contexts() {
        return Err(Error::Dimension(format!("context {context} out of range")));
    }
    let arm = arms[rng.random_range(0..arms.len())];
    let reward = inst.sample_reward(context, arm, rng);
    Ok((arm, reward))
}

/// Inverse-CDF draw from a cumulative table whose last entry is 1.
pub fn draw_from_cdf(cum: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

pub fn draw_context(inst: &BanditInstance, rng: &mut impl Rng) -> usize {
    draw_from_cdf(inst.cum_beta(), rng)
}

/// Cumulative pseudo-regret of a sequence of `(context, arm)` pairs against
/// the per-context best arm.
pub fn regret_of_trace(inst: &BanditInstance, steps: &[(usize, usize)]) -> Result<Vec<f64>> {
    cumulative(inst, steps, |s| inst.best_value(s))
}

/// Same, measured against the best entry of the whole matrix.
pub fn regret_of_trace_global(
    inst: &BanditInstance,
    steps: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let best = inst.global_best().2;
    cumulative(inst, steps, |_| best)
}

fn cumulative(
    inst: &BanditInstance,
    steps: &[(usize, usize)],
    reference: impl Fn(usize) -> f64,
) -> Result<Vec<f64>> {
    let u = inst.u();
    let mut total = 0.0;
    let mut out = Vec::with_capacity(steps.len());
    for (t, &(s, k)) in steps.iter().enumerate() {
        if s >= u.rows() || k >= u.cols() {
            return Err(Error::Dimension(format!(
                "step {t}: (context {s}, arm {k}) outside {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        total += reference(s) - u.get(s, k);
        out.push(total);
    }
    Ok(out)
}

/// Owns the random streams of one simulated run. Contexts and rewards use
/// separate streams so every policy sees the same context sequence for a
/// given seed.
#[derive(Debug, Clone)]
pub struct Environment<'a> {
    inst: &'a BanditInstance,
    context_rng: ChaCha8Rng,
    reward_rng: ChaCha8Rng,
}

impl<'a> Environment<'a> {
    pub fn new(inst: &'a BanditInstance, seed: u64) -> Self {
        let mut context_rng = ChaCha8Rng::seed_from_u64(seed);
        context_rng.set_stream(1);
        let mut reward_rng = ChaCha8Rng::seed_from_u64(seed);
        reward_rng.set_stream(2);
        Self {
            inst,
            context_rng,
            reward_rng,
        }
    }

    pub fn instance(&self) -> &BanditInstance {
        self.inst
    }

    pub fn next_context(&mut self) -> usize {
        draw_context(self.inst, &mut self.context_rng)
    }

    pub fn pull(&mut self, context: usize, arm: usize) -> f64 {
        self.inst.sample_reward(context, arm, &mut self.reward_rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::RewardModel;

    fn instance(u: &[[f64; 2]]) -> BanditInstance {
        BanditInstance::from_matrix(DenseMatrix::from_rows(u).unwrap(), RewardModel::Bernoulli)
            .unwrap()
    }

    #[test]
    fn plan_blocks_with_remainder() {
        let plan = SamplingPlan::build(20, 5, 2, 1, 3).unwrap();
        assert_eq!(plan.arm_blocks, vec![vec![0, 1], vec![2, 3], vec![4]]);
        assert!(plan.is_remainder_block(2));
        assert!(!plan.is_remainder_block(1));
        assert_eq!(plan.context_blocks.len(), 3);
    }

    #[test]
    fn plan_blocks_without_remainder() {
        let plan = SamplingPlan::build(20, 4, 2, 1, 3).unwrap();
        assert_eq!(plan.arm_blocks, vec![vec![0, 1], vec![2, 3]]);
        assert!(!plan.has_remainder);
        assert!(!plan.is_remainder_block(1));
    }

    #[test]
    fn plan_is_consistent_and_deterministic() {
        let a = SamplingPlan::build(100, 11, 3, 2, 9).unwrap();
        assert_eq!(a, SamplingPlan::build(100, 11, 3, 2, 9).unwrap());
        let mut seen = std::collections::HashSet::new();
        for b in &a.context_blocks {
            assert_eq!(b.len(), 4);
            for s in b {
                assert!(seen.insert(*s));
            }
        }
        let arms: Vec<usize> = a.arm_blocks.iter().flatten().copied().collect();
        assert_eq!(arms, (0..11).collect::<Vec<_>>());
        assert_eq!(a.s0_arms.len(), 4);
        assert!(a.s0_arms.windows(2).all(|w| w[0] < w[1]));
        for (b, ctxs) in a.context_blocks.iter().enumerate() {
            for (row, &s) in ctxs.iter().enumerate() {
                assert_eq!(a.context_slot[s], Some((b, row)));
            }
        }
    }

    #[test]
    fn plan_rejects_too_few_contexts() {
        let err = SamplingPlan::build(11, 6, 2, 2, 0).unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("L >= 2 * 3 * m' = 12")));
        assert!(SamplingPlan::build(12, 6, 2, 2, 0).is_ok());
        assert!(SamplingPlan::build(100, 6, 2, 4, 0).is_err());
    }

    #[test]
    fn accumulators_average_per_entry() {
        let plan = SamplingPlan::build(8, 4, 2, 1, 1).unwrap();
        let mut acc = Accumulators::new(&plan);
        acc.record_shared(3, 1, 1.0);
        acc.record_shared(3, 1, 0.0);
        acc.record_block(1, 0, 1, 0.25);
        let f = acc.f_hat();
        assert_eq!(f.shape(), (8, 2));
        assert_eq!(f.get(3, 1), 0.5);
        assert_eq!(f.get(0, 0), 0.0);
        assert_eq!(acc.m_hat(1).get(0, 1), 0.25);
        assert_eq!(acc.total_count(), 3);
    }

    #[test]
    fn singleton_arm_set() {
        let inst = instance(&[[0.2, 0.8], [0.5, 0.1]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            assert_eq!(matrix_sample(&inst, 1, &[1], &mut rng).unwrap().0, 1);
        }
        assert!(matrix_sample(&inst, 1, &[], &mut rng).is_err());
    }

    #[test]
    fn zero_mean_bernoulli_is_always_zero() {
        let inst = instance(&[[0.0, 1.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(matrix_sample(&inst, 0, &[0], &mut rng).unwrap().1, 0.0);
            assert_eq!(matrix_sample(&inst, 0, &[1], &mut rng).unwrap().1, 1.0);
        }
    }

    #[test]
    fn point_mass_and_single_context() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cum = [0.0, 0.0, 0.0, 1.0, 1.0];
        for _ in 0..100 {
            assert_eq!(draw_from_cdf(&cum, &mut rng), 3);
        }
        let inst = instance(&[[0.3, 0.6]]);
        for _ in 0..10 {
            assert_eq!(draw_context(&inst, &mut rng), 0);
        }
    }

    #[test]
    fn uniform_context_frequencies() {
        let u = DenseMatrix::from_fn(10, 2, |i, j| (i + j) as f64 / 20.0);
        let inst = BanditInstance::from_matrix(u, RewardModel::Bernoulli).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 1_000_000;
        let mut counts = [0usize; 10];
        for _ in 0..n {
            counts[draw_context(&inst, &mut rng)] += 1;
        }
        let p: f64 = 0.1;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn regret_cases() {
        let inst = instance(&[[0.2, 0.8], [0.9, 0.1]]);
        let genie = [(0, 1), (1, 0), (1, 0)];
        assert_eq!(regret_of_trace(&inst, &genie).unwrap(), vec![0.0; 3]);

        let steps = [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)];
        let r = regret_of_trace(&inst, &steps).unwrap();
        let hand = [0.6, 0.6, 1.4, 1.4, 2.0];
        for (a, b) in r.iter().zip(hand) {
            assert!((a - b).abs() < 1e-12);
        }
        let g = regret_of_trace_global(&inst, &steps).unwrap();
        let hand = [0.7, 0.7, 1.5, 1.6, 2.3];
        for (a, b) in g.iter().zip(hand) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(regret_of_trace(&inst, &[(2, 0)]).is_err());
        assert!(regret_of_trace(&inst, &[(0, 2)]).is_err());
    }

    #[test]
    fn second_best_everywhere_gives_gap_times_t() {
        let inst = instance(&[[0.3, 0.5], [0.7, 0.5]]);
        let steps: Vec<(usize, usize)> = (0..50).map(|t| (t % 2, t % 2)).collect();
        let r = regret_of_trace(&inst, &steps).unwrap();
        assert!((r[49] - 0.2 * 50.0).abs() < 1e-9);
    }

    #[test]
    fn environments_share_context_stream_per_seed() {
        let u = DenseMatrix::from_fn(5, 3, |i, j| ((i * 3 + j) % 7) as f64 / 7.0);
        let inst = BanditInstance::from_matrix(u, RewardModel::Bernoulli).unwrap();
        let mut a = Environment::new(&inst, 11);
        let mut b = Environment::new(&inst, 11);
        for _ in 0..20 {
            let s = a.next_context();
            a.pull(s, 0);
            assert_eq!(s, b.next_context());
        }
    }
}
