//! Brute-force GAE and central-difference gradient checks.

use cikit_core::ppo::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Σ_k (γλ)^k δ_{t+k}, truncated at the first terminal step.
pub fn brute_force_gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let next = if dones[t] || t + 1 == n { 0.0 } else { values[t + 1] };
            rewards[t] + gamma * next - values[t]
        })
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for k in 0..n - t {
                sum += (gamma * lambda).powi(k as i32) * delta[t + k];
                if dones[t + k] {
                    break;
                }
            }
            sum
        })
        .collect()
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (PolicyParams, ValueParams, PpoBatch, Vec<f64>) {
    let mut policy = PolicyParams::zeros(dim);
    policy.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
    let value = ValueParams { weights: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let mut old = policy.clone();
    old.weights.iter_mut().for_each(|w| *w += rng.random_range(-0.3..0.3));
    let mut batch = PpoBatch::default();
    for _ in 0..n {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = rng.random_range(0..NUM_ACTIONS);
        batch.old_logprobs.push(old.log_probs(&x)[a]);
        batch.states.push(CaseFeatures(x));
        batch.actions.push(a);
        batch.rewards.push(rng.random_range(0..2) as f64);
        batch.values.push(rng.random_range(-1.0..1.0));
        batch.dones.push(rng.random_bool(0.5));
    }
    let advantages = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    (policy, value, batch, advantages)
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = numeric.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-8);
    diff / scale
}

fn near_clip_boundary(policy: &PolicyParams, batch: &PpoBatch, eps: f64) -> bool {
    batch.states.iter().zip(&batch.actions).zip(&batch.old_logprobs).any(|((s, &a), &old)| {
        let r = ratio(policy.log_probs(&s.0)[a], old);
        (r - (1.0 - eps)).abs() < 1e-4 || (r - (1.0 + eps)).abs() < 1e-4
    })
}

/// Max relative error of the analytic policy and value gradients against
/// central differences, over `batches` random batches of `n` samples.
pub fn finite_difference_check(seed: u64, batches: usize, n: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = PpoConfig { kl_coef: 0.1, ..PpoConfig::default() };
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < batches {
        let (policy, value, batch, adv) = random_batch(&mut rng, n, 4);
        if near_clip_boundary(&policy, &batch, cfg.epsilon) {
            continue;
        }
        let analytic = policy_gradient(&policy, &batch, &adv, &cfg);
        let numeric: Vec<f64> = (0..policy.weights.len())
            .map(|i| {
                let mut plus = policy.clone();
                let mut minus = policy.clone();
                plus.weights[i] += h;
                minus.weights[i] -= h;
                (policy_objective(&plus, &batch, &adv, &cfg) - policy_objective(&minus, &batch, &adv, &cfg)) / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel_err(&analytic, &numeric));

        let returns: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let analytic = value_gradient(&value, &batch, &returns);
        let numeric: Vec<f64> = (0..value.weights.len())
            .map(|i| {
                let mut plus = value.clone();
                let mut minus = value.clone();
                plus.weights[i] += h;
                minus.weights[i] -= h;
                (value_loss(&plus, &batch, &returns) - value_loss(&minus, &batch, &returns)) / (2.0 * h)
            })
            .collect();
        worst = worst.max(rel_err(&analytic, &numeric));
        done += 1;
    }
    worst
}
