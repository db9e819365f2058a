//! PPO with GAE for the factorized-Bernoulli highlight policy.
//!
//! The policy network emits one logit per icon; each highlight bit is an
//! independent Bernoulli draw. Policy and value function are separate MLPs
//! with separate Adam states.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{observe, EnvState, HighlightAction, HighlightState, OversightEnv, OBS_DIM};
use crate::error::{Error, Result};
use crate::layout::N_PAIRS;
use crate::nn::{clip_grad_norm, AdamState, ForwardCache, LrSchedule, Mlp, HIDDEN_WIDTH};
use crate::rng::{self, SimRng};

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-likelihood of `bits` under independent Bernoulli(sigmoid(logit)).
pub fn bernoulli_log_prob(logits: &[f64], bits: &[bool]) -> f64 {
    logits
        .iter()
        .zip(bits)
        .map(|(&l, &b)| if b { -softplus(-l) } else { -softplus(l) })
        .sum()
}

/// Summed per-bit Bernoulli entropy.
pub fn bernoulli_entropy(logits: &[f64]) -> f64 {
    logits
        .iter()
        .map(|&l| {
            let p = sigmoid(l);
            p * softplus(-l) + (1.0 - p) * softplus(l)
        })
        .sum()
}

/// `min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Whether the unclipped branch of [`clipped_surrogate`] carries gradient.
fn surrogate_active(ratio: f64, advantage: f64, clip_eps: f64) -> bool {
    if advantage >= 0.0 {
        ratio <= 1.0 + clip_eps
    } else {
        ratio >= 1.0 - clip_eps
    }
}

/// Highlight policy: an MLP producing one Bernoulli logit per icon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHead {
    pub net: Mlp,
}

impl PolicyHead {
    pub fn new(net: Mlp) -> Result<Self> {
        if net.output_width() != N_PAIRS {
            return Err(Error::Dimension {
                context: "policy output".into(),
                expected: N_PAIRS,
                found: net.output_width(),
            });
        }
        Ok(PolicyHead { net })
    }

    pub fn init(obs_dim: usize, rng: &mut SimRng) -> Self {
        let net = Mlp::orthogonal_init(&[obs_dim, HIDDEN_WIDTH, HIDDEN_WIDTH, N_PAIRS], 2f64.sqrt(), 0.01, rng)
            .expect("valid widths");
        PolicyHead { net }
    }

    pub fn logits(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(obs)
    }

    /// Sample every bit from `sigmoid(logit)`; returns the action and its log-probability.
    pub fn act(&self, obs: &[f64], rng: &mut SimRng) -> Result<(HighlightAction, f64)> {
        let logits = self.logits(obs)?;
        Ok(sample_bits(&logits, rng))
    }

    /// Deterministic mode: a bit is on iff its logit is positive.
    pub fn act_greedy(&self, obs: &[f64]) -> Result<HighlightAction> {
        let logits = self.logits(obs)?;
        let mut action = HighlightState::none();
        for (b, l) in action.bits.iter_mut().zip(&logits) {
            *b = *l > 0.0;
        }
        Ok(action)
    }
}

pub fn sample_bits(logits: &[f64], rng: &mut SimRng) -> (HighlightAction, f64) {
    let mut action = HighlightState::none();
    for (b, &l) in action.bits.iter_mut().zip(logits) {
        *b = rng.gen::<f64>() < sigmoid(l);
    }
    let logp = bernoulli_log_prob(logits, &action.bits);
    (action, logp)
}

pub fn value_net_init(obs_dim: usize, rng: &mut SimRng) -> Mlp {
    Mlp::orthogonal_init(&[obs_dim, HIDDEN_WIDTH, HIDDEN_WIDTH, 1], 2f64.sqrt(), 1.0, rng).expect("valid widths")
}

/// Generalized advantage estimation over one contiguous segment.
///
/// `dones[t]` marks that step `t` ended its episode, so nothing after it is
/// bootstrapped. `bootstrap` is the value of the state following the last
/// step. Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n, "values length");
    assert_eq!(dones.len(), n, "dones length");
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

fn default_workers() -> usize {
    8
}

fn default_true() -> bool {
    true
}

/// PPO hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    pub total_samples: usize,
    pub batch_size: usize,
    pub epochs_per_batch: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    #[serde(default = "default_true")]
    pub normalize_advantages: bool,
    /// Rewards are multiplied by this before GAE and value regression;
    /// logged episode rewards stay in environment units.
    pub reward_scale: f64,
    #[serde(default = "default_workers")]
    pub num_workers: usize,
    /// Write an intermediate checkpoint every this many update phases (0 = only at the end).
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Initial bias of every policy logit. The default starts at about one
    /// highlight per step; 0 starts from fair coins.
    pub policy_init_bias: f64,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.95,
            lambda: 0.95,
            clip_eps: 0.2,
            total_samples: 1_000_000,
            batch_size: 16_384,
            epochs_per_batch: 10,
            minibatch_size: 256,
            learning_rate: 3e-4,
            adam_betas: (0.9, 0.999),
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            reward_scale: 1e-3,
            num_workers: default_workers(),
            checkpoint_every: 0,
            policy_init_bias: -(31f64).ln(),
            seed: 0,
        }
    }
}

impl PpoConfig {
    /// The published full-scale sample budget.
    pub const FULL_SCALE_SAMPLES: usize = 20_000_000;

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.minibatch_size == 0 || !self.batch_size.is_multiple_of(self.minibatch_size) {
            return Err(Error::config(
                "batch_size",
                "must be a positive multiple of minibatch_size",
            ));
        }
        if self.num_workers == 0 || !self.batch_size.is_multiple_of(self.num_workers) {
            return Err(Error::config("num_workers", "must divide batch_size"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma", "must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config("lambda", "must be in [0, 1]"));
        }
        if !(self.clip_eps > 0.0) {
            return Err(Error::config("clip_eps", "must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.reward_scale > 0.0) {
            return Err(Error::config(
                "learning_rate",
                "learning_rate >= 0 and reward_scale > 0 required",
            ));
        }
        Ok(())
    }

    pub fn num_updates(&self) -> usize {
        self.total_samples / self.batch_size
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            initial_lr: self.learning_rate,
            total_updates: self.num_updates(),
        }
    }

    fn adam(&self, n: usize) -> AdamState {
        let mut a = AdamState::new(n);
        a.beta1 = self.adam_betas.0;
        a.beta2 = self.adam_betas.1;
        a
    }
}

/// Samples from one worker's rollout segment, in time order.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub obs: Vec<f64>,
    pub actions: Vec<[bool; N_PAIRS]>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Flattened training batch with advantages already computed.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub obs: Vec<f64>,
    pub actions: Vec<[bool; N_PAIRS]>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advantages.is_empty()
    }

    /// Concatenate trajectories, scaling rewards and running GAE per segment.
    pub fn from_trajectories(trajs: &[Trajectory], cfg: &PpoConfig) -> Self {
        let mut batch = Batch::default();
        for t in trajs {
            let scaled: Vec<f64> = t.rewards.iter().map(|r| r * cfg.reward_scale).collect();
            let (adv, ret) = compute_gae(&scaled, &t.values, &t.dones, t.bootstrap_value, cfg.gamma, cfg.lambda);
            batch.obs.extend_from_slice(&t.obs);
            batch.actions.extend_from_slice(&t.actions);
            batch.old_log_probs.extend_from_slice(&t.log_probs);
            batch.advantages.extend(adv);
            batch.returns.extend(ret);
        }
        batch
    }

    pub fn obs_at(&self, i: usize) -> &[f64] {
        let dim = self.obs.len() / self.len();
        &self.obs[i * dim..(i + 1) * dim]
    }
}

/// Shift and scale to zero mean and unit (population) standard deviation.
pub fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    if values.is_empty() {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-12;
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Mean clipped surrogate of the very first minibatch (before any step).
    pub first_surrogate: f64,
}

/// Learner state: both networks and their optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub policy: PolicyHead,
    pub value: Mlp,
    pub policy_adam: AdamState,
    pub value_adam: AdamState,
}

impl Learner {
    pub fn new(obs_dim: usize, cfg: &PpoConfig) -> Self {
        let mut r = rng::stream(cfg.seed, rng::streams::INIT_WEIGHTS);
        let mut policy = PolicyHead::init(obs_dim, &mut r);
        for j in 0..N_PAIRS {
            let k = policy.net.output_bias_index(j);
            policy.net.params_mut()[k] = cfg.policy_init_bias;
        }
        let value = value_net_init(obs_dim, &mut r);
        Learner {
            policy_adam: cfg.adam(policy.net.num_params()),
            value_adam: cfg.adam(value.num_params()),
            policy,
            value,
        }
    }

    pub fn value_of(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.value.forward(obs)?[0])
    }
}

#[derive(Default)]
struct GradAccum {
    policy: Vec<f64>,
    value: Vec<f64>,
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
    approx_kl: f64,
    clipped: usize,
}

impl GradAccum {
    fn new(np: usize, nv: usize) -> Self {
        GradAccum {
            policy: vec![0.0; np],
            value: vec![0.0; nv],
            ..Default::default()
        }
    }

    fn merge(&mut self, other: GradAccum) {
        self.policy.iter_mut().zip(&other.policy).for_each(|(a, b)| *a += b);
        self.value.iter_mut().zip(&other.value).for_each(|(a, b)| *a += b);
        self.policy_loss += other.policy_loss;
        self.value_loss += other.value_loss;
        self.entropy += other.entropy;
        self.approx_kl += other.approx_kl;
        self.clipped += other.clipped;
    }
}

/// Samples per gradient chunk; chunks are reduced in index order so the
/// result does not depend on thread scheduling.
const GRAD_CHUNK: usize = 32;

fn minibatch_grads(learner: &Learner, batch: &Batch, idx: &[usize], cfg: &PpoConfig) -> Result<GradAccum> {
    let np = learner.policy.net.num_params();
    let nv = learner.value.num_params();
    let n = idx.len() as f64;
    let chunk_grads = |chunk: &[usize]| -> Result<GradAccum> {
        let mut acc = GradAccum::new(np, nv);
        for &i in chunk {
            let obs = batch.obs_at(i);
            let cache: ForwardCache = learner.policy.net.forward_cached(obs)?;
            let logits = cache.output();
            let bits = &batch.actions[i];
            let logp = bernoulli_log_prob(logits, bits);
            let log_ratio = logp - batch.old_log_probs[i];
            let ratio = log_ratio.exp();
            let adv = batch.advantages[i];
            let ent = bernoulli_entropy(logits);
            acc.entropy += ent / n;
            acc.approx_kl += ((ratio - 1.0) - log_ratio) / n;
            // d(-entropy)/dl = l p (1 - p)
            let entropy_grad = |l: f64, p: f64| cfg.entropy_coef * l * p * (1.0 - p) / n;
            let surr = clipped_surrogate(ratio, adv, cfg.clip_eps);
            acc.policy_loss += -surr / n;
            if (ratio - 1.0).abs() > cfg.clip_eps {
                acc.clipped += 1;
            }
            let surr_grad = if surrogate_active(ratio, adv, cfg.clip_eps) {
                -adv * ratio / n
            } else {
                0.0
            };
            let upstream: Vec<f64> = logits
                .iter()
                .zip(bits)
                .map(|(&l, &b)| {
                    let p = sigmoid(l);
                    let dlogp = if b { 1.0 - p } else { -p };
                    surr_grad * dlogp + entropy_grad(l, p)
                })
                .collect();
            learner
                .policy
                .net
                .backward_accumulate(&cache, &upstream, &mut acc.policy)?;

            let vcache = learner.value.forward_cached(obs)?;
            let err = vcache.output()[0] - batch.returns[i];
            acc.value_loss += err * err / n;
            learner
                .value
                .backward_accumulate(&vcache, &[cfg.value_coef * 2.0 * err / n], &mut acc.value)?;
        }
        Ok(acc)
    };

    let chunks: Vec<&[usize]> = idx.chunks(GRAD_CHUNK).collect();
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<GradAccum>> = {
        use rayon::prelude::*;
        chunks.par_iter().map(|c| chunk_grads(c)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<GradAccum>> = chunks.iter().map(|c| chunk_grads(c)).collect();

    let mut total = GradAccum::new(np, nv);
    for part in parts {
        total.merge(part?);
    }
    Ok(total)
}

/// Run `epochs_per_batch` passes of shuffled minibatch PPO over `batch`.
///
/// `phase` only labels diagnostics. The shuffle stream is derived from
/// `(cfg.seed, phase)`.
pub fn ppo_update(learner: &mut Learner, batch: &Batch, cfg: &PpoConfig, lr: f64, phase: usize) -> Result<UpdateStats> {
    if batch.is_empty() || !batch.len().is_multiple_of(cfg.minibatch_size) {
        return Err(Error::Dimension {
            context: "ppo batch (multiple of minibatch_size)".into(),
            expected: cfg.minibatch_size,
            found: batch.len(),
        });
    }
    let mut batch = batch.clone();
    if cfg.normalize_advantages {
        normalize(&mut batch.advantages);
    }
    let mut shuffle_rng = rng::stream(rng::mix(cfg.seed, phase as u64), rng::streams::SHUFFLE);
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut stats = UpdateStats::default();
    let mut n_minibatches = 0usize;
    let mut clipped = 0usize;
    let mut seen = 0usize;
    for _epoch in 0..cfg.epochs_per_batch {
        order.shuffle(&mut shuffle_rng);
        for idx in order.chunks(cfg.minibatch_size) {
            let mut g = minibatch_grads(learner, &batch, idx, cfg)?;
            let loss = g.policy_loss - cfg.entropy_coef * g.entropy + cfg.value_coef * g.value_loss;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    phase,
                    diagnostics: format!(
                        "policy_loss={} value_loss={} entropy={} approx_kl={}",
                        g.policy_loss, g.value_loss, g.entropy, g.approx_kl
                    ),
                });
            }
            if n_minibatches == 0 {
                stats.first_surrogate = -g.policy_loss;
            }
            clip_grad_norm(&mut g.policy, cfg.max_grad_norm);
            clip_grad_norm(&mut g.value, cfg.max_grad_norm);
            learner
                .policy_adam
                .update(learner.policy.net.params_mut(), &g.policy, lr)?;
            learner.value_adam.update(learner.value.params_mut(), &g.value, lr)?;
            stats.policy_loss += g.policy_loss;
            stats.value_loss += g.value_loss;
            stats.entropy += g.entropy;
            stats.approx_kl += g.approx_kl;
            clipped += g.clipped;
            seen += idx.len();
            n_minibatches += 1;
        }
    }
    let m = n_minibatches as f64;
    stats.policy_loss /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.approx_kl /= m;
    stats.clip_fraction = clipped as f64 / seen as f64;
    Ok(stats)
}

/// One worker's trajectory and its finished episodes as (reward, length).
type WorkerRollout = (Trajectory, Vec<(f64, usize)>);

/// A rollout worker: its own episode state and random streams.
#[derive(Debug, Clone)]
struct Worker {
    id: usize,
    state: EnvState,
    env_rng: SimRng,
    act_rng: SimRng,
    episodes_started: u64,
    ep_return: f64,
    ep_len: usize,
}

/// Seed of the `episode`-th episode run by `worker`.
pub fn training_episode_seed(cfg_seed: u64, worker: usize, episode: u64) -> u64 {
    rng::mix(rng::mix(cfg_seed, worker as u64 + 1), episode)
}

impl Worker {
    fn new(id: usize, env: &OversightEnv, cfg: &PpoConfig) -> Result<Self> {
        let seed = training_episode_seed(cfg.seed, id, 0);
        Ok(Worker {
            id,
            state: env.reset(seed)?,
            env_rng: env.episode_rng(seed),
            act_rng: rng::stream(cfg.seed, rng::streams::ROLLOUT_BASE + id as u64),
            episodes_started: 1,
            ep_return: 0.0,
            ep_len: 0,
        })
    }

    /// Collect `steps` transitions; returns the segment and finished episode (return, length) pairs.
    fn collect(
        &mut self,
        env: &OversightEnv,
        learner: &Learner,
        steps: usize,
        cfg: &PpoConfig,
    ) -> Result<(Trajectory, Vec<(f64, usize)>)> {
        let mut traj = Trajectory::default();
        let mut finished = Vec::new();
        for step in 0..steps {
            let obs = observe(&self.state).0;
            let wrap = |e: Error| Error::Rollout {
                worker: self.id,
                step,
                source: Box::new(e),
            };
            let (action, logp) = learner.policy.act(&obs, &mut self.act_rng).map_err(wrap)?;
            let value = learner.value_of(&obs).map_err(wrap)?;
            let t = env.step(&self.state, &action, &mut self.env_rng).map_err(wrap)?;
            traj.obs.extend_from_slice(&obs);
            traj.actions.push(action.bits);
            traj.log_probs.push(logp);
            traj.rewards.push(t.reward);
            traj.values.push(value);
            traj.dones.push(t.done);
            self.ep_return += t.reward;
            self.ep_len += 1;
            if t.done {
                finished.push((self.ep_return, self.ep_len));
                let seed = training_episode_seed(cfg.seed, self.id, self.episodes_started);
                self.episodes_started += 1;
                self.state = env.reset(seed)?;
                self.env_rng = env.episode_rng(seed);
                self.ep_return = 0.0;
                self.ep_len = 0;
            } else {
                self.state = t.state;
            }
        }
        traj.bootstrap_value = if traj.dones.last().copied().unwrap_or(true) {
            0.0
        } else {
            learner.value_of(&observe(&self.state).0)?
        };
        Ok((traj, finished))
    }
}

/// One line of the training log (one per update phase).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub update: usize,
    pub samples_so_far: usize,
    pub episodes: usize,
    pub mean_episode_reward: Option<f64>,
    pub mean_episode_length: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub lr: f64,
}

/// Training progress handed to the per-phase callback.
pub struct Progress<'a> {
    pub record: &'a TrainLogRecord,
    pub learner: &'a Learner,
    pub updates_done: usize,
    pub samples_done: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub learner: Learner,
    pub log: Vec<TrainLogRecord>,
    pub samples_done: usize,
}

/// Alternate rollout collection and PPO updates until `total_samples`
/// (rounded down to whole batches) have been consumed.
pub fn train<F>(env: &OversightEnv, cfg: &PpoConfig, mut on_update: F) -> Result<TrainOutcome>
where
    F: FnMut(Progress<'_>) -> Result<()>,
{
    cfg.validate()?;
    let mut learner = Learner::new(OBS_DIM, cfg);
    let mut workers: Vec<Worker> = (0..cfg.num_workers)
        .map(|id| Worker::new(id, env, cfg))
        .collect::<Result<_>>()?;
    let steps_per_worker = cfg.batch_size / cfg.num_workers;
    let schedule = cfg.schedule();
    let mut log = Vec::new();
    let mut samples = 0;
    for update in 0..cfg.num_updates() {
        let results: Vec<Result<WorkerRollout>> = {
            let learner_ref = &learner;
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                workers
                    .par_iter_mut()
                    .map(|w| w.collect(env, learner_ref, steps_per_worker, cfg))
                    .collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                workers
                    .iter_mut()
                    .map(|w| w.collect(env, learner_ref, steps_per_worker, cfg))
                    .collect()
            }
        };
        let mut trajs = Vec::with_capacity(workers.len());
        let mut finished = Vec::new();
        for r in results {
            let (t, f) = r?;
            trajs.push(t);
            finished.extend(f);
        }
        samples += cfg.batch_size;
        let batch = Batch::from_trajectories(&trajs, cfg);
        let lr = schedule.lr_at(update);
        let stats = ppo_update(&mut learner, &batch, cfg, lr, update)?;
        let episodes = finished.len();
        let mean = |f: &dyn Fn(&(f64, usize)) -> f64| {
            (episodes > 0).then(|| finished.iter().map(f).sum::<f64>() / episodes as f64)
        };
        let record = TrainLogRecord {
            update,
            samples_so_far: samples,
            episodes,
            mean_episode_reward: mean(&|e| e.0),
            mean_episode_length: mean(&|e| e.1 as f64),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            approx_kl: stats.approx_kl,
            clip_fraction: stats.clip_fraction,
            lr,
        };
        on_update(Progress {
            record: &record,
            learner: &learner,
            updates_done: update + 1,
            samples_done: samples,
        })?;
        log.push(record);
    }
    Ok(TrainOutcome {
        learner,
        log,
        samples_done: samples,
    })
}
