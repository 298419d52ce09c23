use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::Policy;
use crate::env::{discounted_returns, Action, Observation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A2cConfig {
    pub discount: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub momentum: f64,
    /// Global gradient-norm limit; 0 disables clipping.
    pub grad_clip: f64,
    /// Standardise advantages within each batch.
    pub normalize_advantages: bool,
    /// Return horizon; 0 uses the whole segment (Monte Carlo), otherwise
    /// `n`-step returns bootstrapped from the critic.
    pub n_step: usize,
}

impl Default for A2cConfig {
    fn default() -> Self {
        Self {
            discount: 0.9,
            lr_actor: 0.01,
            lr_critic: 0.01,
            entropy_coef: 0.01,
            value_coef: 0.5,
            momentum: 0.9,
            grad_clip: 5.0,
            normalize_advantages: true,
            n_step: 0,
        }
    }
}

impl A2cConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::config("a2c.discount must lie in [0, 1)"));
        }
        for (name, v) in [
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
            ("entropy_coef", self.entropy_coef),
            ("value_coef", self.value_coef),
            ("grad_clip", self.grad_clip),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("a2c.{name} must be non-negative")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("a2c.momentum must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One joint time step as seen by the learner. All agents share `reward`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSample {
    pub observations: Vec<Observation>,
    pub actions: Vec<Action>,
    pub reward: f64,
}

/// A contiguous episode segment with its Monte-Carlo returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub steps: Vec<StepSample>,
    pub returns: Vec<f64>,
    /// Observations after the last step, used to bootstrap `n`-step returns.
    pub bootstrap: Option<Vec<Observation>>,
}

impl Batch {
    pub fn new(steps: Vec<StepSample>, discount: f64) -> Result<Self> {
        let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
        let returns = discounted_returns(&rewards, discount)?;
        Ok(Self {
            steps,
            returns,
            bootstrap: None,
        })
    }

    pub fn with_bootstrap(mut self, observations: Vec<Observation>) -> Self {
        self.bootstrap = Some(observations);
        self
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Critic targets and frozen advantages, indexed `[step][agent]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub returns: Vec<Vec<f64>>,
    pub advantages: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub loss: f64,
    pub actor: f64,
    pub critic: f64,
    pub entropy: f64,
    pub grad_norm: f64,
}

/// Critic targets and `target − value` advantages under the current parameters.
pub fn targets(policy: &Policy, batch: &Batch, cfg: &A2cConfig) -> Result<Targets> {
    let values: Vec<Vec<f64>> = batch
        .steps
        .iter()
        .map(|s| Ok(policy.outputs(&s.observations)?.0.iter().map(|o| o.value).collect()))
        .collect::<Result<_>>()?;
    let returns: Vec<Vec<f64>> = if cfg.n_step == 0 {
        values.iter().zip(&batch.returns).map(|(v, &g)| vec![g; v.len()]).collect()
    } else {
        let agents = values.first().map_or(0, Vec::len);
        let tail: Vec<f64> = match &batch.bootstrap {
            Some(obs) => policy.outputs(obs)?.0.iter().map(|o| o.value).collect(),
            None => vec![0.0; agents],
        };
        let len = batch.len();
        (0..len)
            .map(|t| {
                let end = (t + cfg.n_step).min(len);
                let mut g = 0.0;
                let mut w = 1.0;
                for s in &batch.steps[t..end] {
                    g += w * s.reward;
                    w *= cfg.discount;
                }
                (0..agents)
                    .map(|m| {
                        let boot = if end < len { values[end][m] } else { tail[m] };
                        g + w * boot
                    })
                    .collect()
            })
            .collect()
    };
    let mut advantages: Vec<Vec<f64>> = returns
        .iter()
        .zip(&values)
        .map(|(g, v)| g.iter().zip(v).map(|(g, v)| g - v).collect())
        .collect();
    if cfg.normalize_advantages {
        standardize(&mut advantages);
    }
    Ok(Targets { returns, advantages })
}

/// Shifts and scales all entries to zero mean and unit deviation.
pub fn standardize(adv: &mut [Vec<f64>]) {
    let n = adv.iter().map(Vec::len).sum::<usize>() as f64;
    if n < 2.0 {
        return;
    }
    let mean = adv.iter().flatten().sum::<f64>() / n;
    let var = adv.iter().flatten().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-8);
    adv.iter_mut().flatten().for_each(|a| *a = (*a - mean) / sd);
}

/// Records the mean per-agent loss
/// `−A·log π(a) − c_H·H(π) + c_V·(G − V)²` with the advantages `A` held fixed.
pub fn surrogate_loss(
    tape: &mut Tape,
    policy: &Policy,
    batch: &Batch,
    targets: &Targets,
    cfg: &A2cConfig,
) -> Result<(Var, LossReport)> {
    if batch.is_empty() {
        return Err(Error::invalid("a2c: empty batch"));
    }
    let obs: Vec<Vec<Observation>> = batch.steps.iter().map(|s| s.observations.clone()).collect();
    let fwd = policy.arch.forward_many(tape, &policy.params, &obs)?;
    let agents = batch.steps[0].actions.len();
    let norm = 1.0 / (batch.len() * agents) as f64;
    let mut terms = Vec::new();
    let mut report = LossReport::default();
    for (t, f) in fwd.iter().enumerate() {
        let step = &batch.steps[t];
        if step.actions.len() != agents || f.logits.len() != agents {
            return Err(Error::invalid("a2c: agent count varies within the batch"));
        }
        for m in 0..agents {
            let adv = targets.advantages[t][m];
            let logp = tape.log_softmax(f.logits[m]);
            let p = tape.softmax(f.logits[m]);
            let chosen = tape.index(logp, step.actions[m].index());
            let neg_entropy = tape.dot(p, logp);
            let target = tape.leaf(vec![-targets.returns[t][m]]);
            let diff = tape.add(f.values[m], target);
            let sq = tape.dot(diff, diff);
            report.actor -= norm * adv * tape.scalar(chosen);
            report.entropy -= norm * tape.scalar(neg_entropy);
            report.critic += norm * tape.scalar(sq);
            terms.push((chosen, -adv * norm));
            terms.push((neg_entropy, cfg.entropy_coef * norm));
            terms.push((sq, cfg.value_coef * norm));
        }
    }
    let loss = tape.linear_combination(&terms);
    report.loss = tape.scalar(loss);
    Ok((loss, report))
}

/// Loss value and its gradient with respect to every parameter.
pub fn loss_and_gradient(
    policy: &Policy,
    batch: &Batch,
    targets: &Targets,
    cfg: &A2cConfig,
) -> Result<(LossReport, Vec<f64>)> {
    let mut tape = Tape::new();
    let (loss, report) = surrogate_loss(&mut tape, policy, batch, targets, cfg)?;
    let g = tape.backward(loss);
    let mut grads = vec![0.0; policy.params.len()];
    tape.param_grads(&g, &mut grads);
    Ok((report, grads))
}

/// Stochastic gradient descent with heavy-ball momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum {
    pub velocity: Vec<f64>,
}

impl Momentum {
    pub fn new(len: usize) -> Self {
        Self {
            velocity: vec![0.0; len],
        }
    }
}

/// One synchronous actor-critic step on `batch`. Critic segments use `lr_critic`,
/// everything else `lr_actor`.
pub fn a2c_update(policy: &mut Policy, opt: &mut Momentum, batch: &Batch, cfg: &A2cConfig) -> Result<LossReport> {
    cfg.validate()?;
    let t = targets(policy, batch, cfg)?;
    let (mut report, mut grads) = loss_and_gradient(policy, batch, &t, cfg)?;
    if !report.loss.is_finite() {
        return Err(Error::Training(format!(
            "non-finite loss {} (actor {}, critic {}, entropy {})",
            report.loss, report.actor, report.critic, report.entropy
        )));
    }
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    report.grad_norm = norm;
    if cfg.grad_clip > 0.0 && norm > cfg.grad_clip {
        let s = cfg.grad_clip / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    policy.params.grads.copy_from_slice(&grads);
    for seg in policy.params.segments().to_vec() {
        let lr = if seg.name.contains(".critic.") {
            cfg.lr_critic
        } else {
            cfg.lr_actor
        };
        for i in seg.offset..seg.offset + seg.len {
            let v = cfg.momentum * opt.velocity[i] + grads[i];
            opt.velocity[i] = v;
            policy.params.values[i] -= lr * v;
        }
    }
    if !policy.params.all_finite() {
        return Err(Error::Training("parameters became non-finite".into()));
    }
    Ok(report)
}
