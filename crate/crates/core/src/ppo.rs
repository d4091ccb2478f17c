//! Desk-scale PPO against the compliance reward.
//!
//! The policy is a linear softmax over the three compliance choices
//! (A prohibited, B permitted, C not related) on hashed case features; the
//! critic is linear. Episodes are single steps: one case, one choice, one
//! reward from the [`Verifier`]. GAE is implemented for general horizons.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cases::{CaseStore, LegalCase};
use crate::hashing::fnv1a;
use crate::regulation::Law;
use crate::trajectory::COMPLIANCE_OPTIONS;
use crate::verifier::{mean, Verifier};

pub const NUM_ACTIONS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PpoError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("no cases to train on")]
    EmptyStore,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("non-finite gradient at epoch {epoch}: {diagnostics:?}")]
    NonFinite { epoch: usize, diagnostics: UpdateDiagnostics },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub kl_coef: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub epochs_per_batch: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub hash_dim: usize,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            kl_coef: 1e-2,
            lr_actor: 1e-2,
            lr_critic: 1e-1,
            epochs_per_batch: 16,
            batch_size: 64,
            iterations: 500,
            hash_dim: 64,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::InvalidConfig(m.to_string()));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return bad("gamma and lambda must lie in [0, 1]");
        }
        if !(self.kl_coef >= 0.0 && self.kl_coef.is_finite()) {
            return bad("kl_coef must be non-negative");
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0 && self.lr_actor.is_finite() && self.lr_critic.is_finite()) {
            return bad("learning rates must be positive");
        }
        if self.epochs_per_batch == 0 || self.batch_size == 0 || self.hash_dim == 0 {
            return bad("epochs_per_batch, batch_size and hash_dim must be at least 1");
        }
        Ok(())
    }
}

/// Feature vector: one-hot domain ⊕ hashed annotation tags ⊕ bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFeatures(pub Vec<f64>);

impl CaseFeatures {
    pub fn dimension(hash_dim: usize) -> usize {
        Law::ALL.len() + hash_dim + 1
    }

    pub fn of(case: &LegalCase, hash_dim: usize) -> Self {
        let mut v = vec![0.0; Self::dimension(hash_dim)];
        let domain_slot = Law::ALL.iter().position(|&l| l == case.domain).expect("known law");
        v[domain_slot] = 1.0;
        let a = &case.annotation;
        let tags = [
            ("sender", &a.sender),
            ("subject", &a.subject),
            ("recipient", &a.recipient),
            ("information_type", &a.information_type),
            ("purpose", &a.purpose),
        ];
        let mut add = |tag: String| {
            let slot = (fnv1a(tag.to_lowercase().as_bytes()) % hash_dim as u64) as usize;
            v[Law::ALL.len() + slot] += 1.0;
        };
        for (key, value) in tags {
            if let Some(value) = value {
                add(format!("{key}={value}"));
            }
        }
        for attr in &a.attributes {
            add(format!("attr={attr}"));
        }
        *v.last_mut().expect("non-empty") = 1.0;
        CaseFeatures(v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major `NUM_ACTIONS × dim` weight matrix of the softmax policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub dim: usize,
    pub weights: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, weights: vec![0.0; NUM_ACTIONS * dim] }
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    pub fn log_probs(&self, x: &[f64]) -> [f64; NUM_ACTIONS] {
        let mut logits = [0.0; NUM_ACTIONS];
        for (k, l) in logits.iter_mut().enumerate() {
            *l = dot(self.row(k), x);
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        logits.map(|l| l - lse)
    }

    pub fn probs(&self, x: &[f64]) -> [f64; NUM_ACTIONS] {
        self.log_probs(x).map(f64::exp)
    }

    /// Most probable action (lowest index on ties).
    pub fn greedy(&self, x: &[f64]) -> usize {
        let lp = self.log_probs(x);
        (0..NUM_ACTIONS).fold(0, |best, k| if lp[k] > lp[best] { k } else { best })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueParams {
    pub weights: Vec<f64>,
}

impl ValueParams {
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim] }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoBatch {
    pub states: Vec<CaseFeatures>,
    pub actions: Vec<usize>,
    pub old_logprobs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
}

impl PpoBatch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate(&self, dim: usize) -> Result<(), PpoError> {
        let n = self.states.len();
        if n == 0 {
            return Err(PpoError::EmptyBatch);
        }
        let lens = [self.actions.len(), self.old_logprobs.len(), self.rewards.len(), self.values.len(), self.dones.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(PpoError::LengthMismatch(format!("{n} states vs field lengths {lens:?}")));
        }
        if let Some(s) = self.states.iter().find(|s| s.0.len() != dim) {
            return Err(PpoError::LengthMismatch(format!("state of dimension {} vs policy {dim}", s.0.len())));
        }
        if let Some(&a) = self.actions.iter().find(|&&a| a >= NUM_ACTIONS) {
            return Err(PpoError::LengthMismatch(format!("action {a} outside 0..{NUM_ACTIONS}")));
        }
        if self.old_logprobs.iter().any(|l| !l.is_finite()) {
            return Err(PpoError::InvalidConfig("old_logprobs must be finite".into()));
        }
        Ok(())
    }
}

/// Probability ratio `exp(new - old)`.
pub fn ratio(new_logprob: f64, old_logprob: f64) -> f64 {
    (new_logprob - old_logprob).exp()
}

/// GAE advantages and returns (`advantage + value`).
///
/// `delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t` and
/// `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`; the value past
/// the last step is taken as 0.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(PpoError::LengthMismatch(format!(
            "rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let next_value = values.get(t + 1).copied().unwrap_or(0.0);
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// `min(r * A, clip(r, 1 - eps, 1 + eps) * A)` for one sample.
pub fn surrogate_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Batch mean of [`surrogate_term`]. Empty input gives 0.
pub fn clipped_surrogate(ratios: &[f64], advantages: &[f64], epsilon: f64) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    let sum: f64 = ratios.iter().zip(advantages).map(|(&r, &a)| surrogate_term(r, a, epsilon)).sum();
    sum / ratios.len() as f64
}

/// Mean of `old_logprob - new_logprob` over the batch.
pub fn approx_kl(policy: &PolicyParams, batch: &PpoBatch) -> f64 {
    let n = batch.len() as f64;
    batch
        .states
        .iter()
        .zip(&batch.actions)
        .zip(&batch.old_logprobs)
        .map(|((s, &a), old)| old - policy.log_probs(&s.0)[a])
        .sum::<f64>()
        / n
}

/// Policy objective: clipped surrogate minus `kl_coef` times approx-KL.
pub fn policy_objective(policy: &PolicyParams, batch: &PpoBatch, advantages: &[f64], cfg: &PpoConfig) -> f64 {
    let ratios: Vec<f64> = batch
        .states
        .iter()
        .zip(&batch.actions)
        .zip(&batch.old_logprobs)
        .map(|((s, &a), &old)| ratio(policy.log_probs(&s.0)[a], old))
        .collect();
    clipped_surrogate(&ratios, advantages, cfg.epsilon) - cfg.kl_coef * approx_kl(policy, batch)
}

/// Analytic gradient of [`policy_objective`], split into the surrogate part
/// and the KL-penalty part. Both are laid out like [`PolicyParams::weights`].
pub fn policy_gradient_parts(
    policy: &PolicyParams,
    batch: &PpoBatch,
    advantages: &[f64],
    cfg: &PpoConfig,
) -> (Vec<f64>, Vec<f64>) {
    let dim = policy.dim;
    let n = batch.len() as f64;
    let mut surrogate = vec![0.0; NUM_ACTIONS * dim];
    let mut kl = vec![0.0; NUM_ACTIONS * dim];
    for t in 0..batch.len() {
        let x = &batch.states[t].0;
        let a = batch.actions[t];
        let lp = policy.log_probs(x);
        let r = ratio(lp[a], batch.old_logprobs[t]);
        let adv = advantages[t];
        let clipped = r.clamp(1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
        // Unclipped branch active: d(r*A) = A * r * dlogpi. Otherwise the term is constant.
        let sur_coef = if r * adv <= clipped * adv { adv * r } else { 0.0 };
        // -kl_coef * (old - new) differentiates to kl_coef * dlogpi.
        let kl_coef = cfg.kl_coef;
        for k in 0..NUM_ACTIONS {
            let indicator = if k == a { 1.0 } else { 0.0 };
            let g = indicator - lp[k].exp();
            let row = k * dim;
            for (j, &xj) in x.iter().enumerate() {
                let d = g * xj / n;
                surrogate[row + j] += sur_coef * d;
                kl[row + j] += kl_coef * d;
            }
        }
    }
    (surrogate, kl)
}

pub fn policy_gradient(policy: &PolicyParams, batch: &PpoBatch, advantages: &[f64], cfg: &PpoConfig) -> Vec<f64> {
    let (mut s, k) = policy_gradient_parts(policy, batch, advantages, cfg);
    s.iter_mut().zip(k).for_each(|(a, b)| *a += b);
    s
}

/// `0.5 * mean((V(s) - return)^2)`.
pub fn value_loss(value: &ValueParams, batch: &PpoBatch, returns: &[f64]) -> f64 {
    let sum: f64 = batch
        .states
        .iter()
        .zip(returns)
        .map(|(s, r)| (value.value(&s.0) - r).powi(2))
        .sum();
    0.5 * sum / batch.len() as f64
}

pub fn value_gradient(value: &ValueParams, batch: &PpoBatch, returns: &[f64]) -> Vec<f64> {
    let n = batch.len() as f64;
    let mut g = vec![0.0; value.weights.len()];
    for (s, r) in batch.states.iter().zip(returns) {
        let err = value.value(&s.0) - r;
        for (gj, xj) in g.iter_mut().zip(&s.0) {
            *gj += err * xj / n;
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub objective: f64,
    pub approx_kl: f64,
    pub value_loss: f64,
}

/// Runs `epochs_per_batch` full-batch steps: gradient ascent on the policy
/// objective and gradient descent on the critic's squared error.
pub fn update_step(
    policy: &PolicyParams,
    value: &ValueParams,
    batch: &PpoBatch,
    cfg: &PpoConfig,
) -> Result<(PolicyParams, ValueParams, UpdateDiagnostics), PpoError> {
    cfg.validate()?;
    batch.validate(policy.dim)?;
    let (advantages, returns) = gae_advantages(&batch.rewards, &batch.values, &batch.dones, cfg.gamma, cfg.lambda)?;
    let mut policy = policy.clone();
    let mut value = value.clone();
    let diagnostics = |p: &PolicyParams, v: &ValueParams| UpdateDiagnostics {
        objective: policy_objective(p, batch, &advantages, cfg),
        approx_kl: approx_kl(p, batch),
        value_loss: value_loss(v, batch, &returns),
    };
    for epoch in 0..cfg.epochs_per_batch {
        let pg = policy_gradient(&policy, batch, &advantages, cfg);
        let vg = value_gradient(&value, batch, &returns);
        if pg.iter().chain(&vg).any(|g| !g.is_finite()) {
            return Err(PpoError::NonFinite { epoch, diagnostics: diagnostics(&policy, &value) });
        }
        policy.weights.iter_mut().zip(&pg).for_each(|(w, g)| *w += cfg.lr_actor * g);
        value.weights.iter_mut().zip(&vg).for_each(|(w, g)| *w -= cfg.lr_critic * g);
    }
    let diag = diagnostics(&policy, &value);
    Ok((policy, value, diag))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean_reward: f64,
    pub approx_kl: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<CurvePoint>,
    pub policy: PolicyParams,
    pub value: ValueParams,
}

impl TrainReport {
    /// CSV with header `iteration,mean_reward,approx_kl,objective`.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("iteration,mean_reward,approx_kl,objective\n");
        for p in &self.curve {
            let _ = writeln!(out, "{},{},{},{}", p.iteration, p.mean_reward, p.approx_kl, p.objective);
        }
        out
    }

    /// Mean reward over the last `window` iterations.
    pub fn tail_mean_reward(&self, window: usize) -> Option<f64> {
        let start = self.curve.len().saturating_sub(window);
        mean(&self.curve[start..].iter().map(|p| p.mean_reward).collect::<Vec<_>>())
    }
}

/// Response text the toy policy "emits" for an action.
pub fn action_response(action: usize) -> String {
    format!("Choice: {}", COMPLIANCE_OPTIONS[action])
}

fn sample_action(probs: &[f64; NUM_ACTIONS], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    NUM_ACTIONS - 1
}

/// Rollout → GAE → update, `config.iterations` times.
pub fn train(store: &CaseStore, verifier: &Verifier, config: &PpoConfig) -> Result<TrainReport, PpoError> {
    config.validate()?;
    if store.is_empty() {
        return Err(PpoError::EmptyStore);
    }
    let cases = store.cases();
    let features: Vec<CaseFeatures> = cases.iter().map(|c| CaseFeatures::of(c, config.hash_dim)).collect();
    let dim = CaseFeatures::dimension(config.hash_dim);
    let mut policy = PolicyParams::zeros(dim);
    let mut value = ValueParams::zeros(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut curve = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let mut batch = PpoBatch::default();
        for _ in 0..config.batch_size {
            let i = rng.random_range(0..cases.len());
            let x = &features[i];
            let lp = policy.log_probs(&x.0);
            let action = sample_action(&lp.map(f64::exp), &mut rng);
            batch.rewards.push(verifier.reward(&cases[i], &action_response(action)));
            batch.values.push(value.value(&x.0));
            batch.old_logprobs.push(lp[action]);
            batch.actions.push(action);
            batch.dones.push(true);
            batch.states.push(x.clone());
        }
        let mean_reward = mean(&batch.rewards).unwrap_or(0.0);
        let (p, v, diag) = update_step(&policy, &value, &batch, config)?;
        policy = p;
        value = v;
        curve.push(CurvePoint { iteration, mean_reward, approx_kl: diag.approx_kl, objective: diag.objective });
    }
    Ok(TrainReport { curve, policy, value })
}
