use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{ConvShape, Tape, Var};
use super::ParameterSet;
use crate::env::{Observation, NUM_ACTIONS, OBS_CHANNELS};
use crate::error::{Error, Result};

const KERNEL: usize = 3;

/// Layer sizes of the per-agent network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Side of the egocentric crop; odd and at least 5.
    pub window: usize,
    /// Pooling factor of the global map.
    pub coarse_factor: usize,
    pub conv1: usize,
    pub conv2: usize,
    /// Encoder output size.
    pub feature: usize,
    /// Attention output size.
    pub attention: usize,
    pub leaky_slope: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            window: 5,
            coarse_factor: 2,
            conv1: 8,
            conv2: 16,
            feature: 32,
            attention: 32,
            leaky_slope: 0.2,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 * KERNEL - 1 || self.window % 2 == 0 {
            return Err(Error::config("network.window must be odd and at least 5"));
        }
        if self.coarse_factor == 0 || self.conv1 == 0 || self.conv2 == 0 {
            return Err(Error::config("network sizes must be positive"));
        }
        if self.feature == 0 || self.attention == 0 {
            return Err(Error::config("network feature sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::config("network.leaky_slope must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Complete shape information for one parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub net: NetworkConfig,
    pub global_height: usize,
    pub global_width: usize,
    /// 1 when all agents share weights, otherwise one network per agent.
    pub networks: usize,
    /// Whether agents exchange features through graph attention.
    pub communicate: bool,
}

/// Row `m` holds the weights agent `m` gives to every other agent.
pub type AttentionMatrix = Vec<Vec<f64>>;

/// Parameter nodes of one network on a tape.
struct Bound {
    conv1_w: Var,
    conv1_b: Var,
    conv2_w: Var,
    conv2_b: Var,
    fc_w: Var,
    fc_b: Var,
    gat: Option<(Var, Var, Var)>,
    actor_w: Var,
    actor_b: Var,
    critic_w: Var,
    critic_b: Var,
}

/// Tape nodes of one joint forward pass.
pub struct Forward {
    pub features: Vec<Var>,
    pub aggregated: Vec<Option<Var>>,
    pub logits: Vec<Var>,
    pub values: Vec<Var>,
    pub attention: AttentionMatrix,
}

impl Architecture {
    /// Layout for observations of a `height × width` grid.
    pub fn for_grid(net: NetworkConfig, height: usize, width: usize, networks: usize, communicate: bool) -> Result<Self> {
        net.validate()?;
        if networks == 0 {
            return Err(Error::config("at least one network is required"));
        }
        Ok(Self {
            global_height: height.div_ceil(net.coarse_factor),
            global_width: width.div_ceil(net.coarse_factor),
            net,
            networks,
            communicate,
        })
    }

    fn conv1(&self) -> ConvShape {
        ConvShape {
            in_channels: OBS_CHANNELS,
            height: self.net.window,
            width: self.net.window,
            out_channels: self.net.conv1,
            kernel: KERNEL,
        }
    }

    fn conv2(&self) -> ConvShape {
        let side = self.net.window + 1 - KERNEL;
        ConvShape {
            in_channels: self.net.conv1,
            height: side,
            width: side,
            out_channels: self.net.conv2,
            kernel: KERNEL,
        }
    }

    fn global_len(&self) -> usize {
        OBS_CHANNELS * self.global_height * self.global_width
    }

    fn fc_in(&self) -> usize {
        self.conv2().out_len() + self.global_len()
    }

    fn head_in(&self) -> usize {
        if self.communicate {
            self.net.attention + self.net.feature
        } else {
            self.net.feature
        }
    }

    /// `(name, len, fan_in, fan_out)` of every segment.
    fn segments(&self) -> Vec<(String, usize, usize, usize)> {
        let (c1, c2) = (self.conv1(), self.conv2());
        let k2 = KERNEL * KERNEL;
        let (f, a, h) = (self.net.feature, self.net.attention, self.head_in());
        let mut out = Vec::new();
        for k in 0..self.networks {
            let mut add = |name: &str, len, fi, fo| out.push((format!("net{k}.{name}"), len, fi, fo));
            add("conv1.w", c1.weight_len(), c1.in_channels * k2, c1.out_channels * k2);
            add("conv1.b", c1.out_channels, 0, 0);
            add("conv2.w", c2.weight_len(), c2.in_channels * k2, c2.out_channels * k2);
            add("conv2.b", c2.out_channels, 0, 0);
            add("fc.w", f * self.fc_in(), self.fc_in(), f);
            add("fc.b", f, 0, 0);
            if self.communicate {
                add("gat.w", a * f, f, a);
                add("gat.a", 2 * a, 2 * a, 1);
            }
            add("actor.w", NUM_ACTIONS * h, h, NUM_ACTIONS);
            add("actor.b", NUM_ACTIONS, 0, 0);
            add("critic.w", h, h, 1);
            add("critic.b", 1, 0, 0);
        }
        out
    }

    pub fn layout(&self) -> Vec<(String, usize)> {
        self.segments().into_iter().map(|(n, l, _, _)| (n, l)).collect()
    }

    /// Uniform Glorot initialisation with zero biases. The actor output starts
    /// small so the initial policy is close to uniform.
    pub fn init(&self, rng: &mut impl Rng) -> Result<ParameterSet> {
        let segs = self.segments();
        let mut p = ParameterSet::new(self.layout())?;
        for (name, _, fi, fo) in segs {
            if fi == 0 {
                continue;
            }
            let mut bound = (6.0 / (fi + fo) as f64).sqrt();
            if name.ends_with("actor.w") {
                bound *= 0.01;
            }
            for v in p.get_mut(&name)? {
                *v = rng.gen_range(-bound..=bound);
            }
        }
        Ok(p)
    }

    pub fn network_of(&self, agent: usize) -> usize {
        if self.networks == 1 {
            0
        } else {
            agent
        }
    }

    fn bind(&self, tape: &mut Tape, p: &ParameterSet, k: usize) -> Result<Bound> {
        let get = |tape: &mut Tape, n: &str| -> Result<Var> {
            let s = p.segment(&format!("net{k}.{n}"))?;
            Ok(tape.param(&p.values[s.offset..s.offset + s.len], s.offset))
        };
        let gat = if self.communicate {
            let w = get(tape, "gat.w")?;
            let a = get(tape, "gat.a")?;
            let a1 = tape.slice(a, 0, self.net.attention);
            let a2 = tape.slice(a, self.net.attention, self.net.attention);
            Some((w, a1, a2))
        } else {
            None
        };
        Ok(Bound {
            conv1_w: get(tape, "conv1.w")?,
            conv1_b: get(tape, "conv1.b")?,
            conv2_w: get(tape, "conv2.w")?,
            conv2_b: get(tape, "conv2.b")?,
            fc_w: get(tape, "fc.w")?,
            fc_b: get(tape, "fc.b")?,
            gat,
            actor_w: get(tape, "actor.w")?,
            actor_b: get(tape, "actor.b")?,
            critic_w: get(tape, "critic.w")?,
            critic_b: get(tape, "critic.b")?,
        })
    }

    fn check_observation(&self, obs: &Observation) -> Result<()> {
        let w = self.net.window;
        if obs.window != w
            || obs.local.len() != OBS_CHANNELS * w * w
            || obs.global_height != self.global_height
            || obs.global_width != self.global_width
            || obs.global.len() != self.global_len()
        {
            return Err(Error::invalid(format!(
                "observation shape {}x{} crop, {}x{} map does not match the network ({}x{} crop, {}x{} map)",
                obs.window, obs.window, obs.global_height, obs.global_width, w, w, self.global_height, self.global_width
            )));
        }
        Ok(())
    }

    fn encode_on(&self, tape: &mut Tape, b: &Bound, obs: &Observation) -> Result<Var> {
        self.check_observation(obs)?;
        let x = tape.leaf(obs.local.clone());
        let y = tape.conv(x, b.conv1_w, b.conv1_b, self.conv1());
        let y = tape.tanh(y);
        let y = tape.conv(y, b.conv2_w, b.conv2_b, self.conv2());
        let y = tape.tanh(y);
        let g = tape.leaf(obs.global.clone());
        let cat = tape.concat(&[y, g]);
        let h = tape.affine(b.fc_w, cat, Some(b.fc_b));
        Ok(tape.tanh(h))
    }

    /// Attention aggregation over all other agents. Neighbours are combined in an
    /// order fixed by their scores and features, so relabelling agents permutes the
    /// output exactly.
    fn gat_on(&self, tape: &mut Tape, bound: &[Bound], feats: &[Var]) -> (Vec<Var>, AttentionMatrix) {
        let n = feats.len();
        let mut attention = vec![vec![0.0; n]; n];
        let slope = self.net.leaky_slope;
        let shared: Option<Vec<Var>> = (self.networks == 1).then(|| {
            let (w, _, _) = bound[0].gat.expect("communicating network");
            feats.iter().map(|&h| tape.affine(w, h, None)).collect()
        });
        let mut out = Vec::with_capacity(n);
        for m in 0..n {
            let (w, a1, a2) = bound[self.network_of(m)].gat.expect("communicating network");
            let z: Vec<Var> = match &shared {
                Some(z) => z.clone(),
                None => feats.iter().map(|&h| tape.affine(w, h, None)).collect(),
            };
            if n == 1 {
                out.push(tape.tanh(z[0]));
                continue;
            }
            let sm = tape.dot(a1, z[m]);
            let mut scored: Vec<(usize, Var)> = (0..n)
                .filter(|&k| k != m)
                .map(|k| {
                    let tk = tape.dot(a2, z[k]);
                    let e = tape.add(sm, tk);
                    (k, tape.leaky_relu(e, slope))
                })
                .collect();
            scored.sort_by(|x, y| {
                tape.scalar(x.1).total_cmp(&tape.scalar(y.1)).then_with(|| {
                    let (zx, zy) = (tape.value(z[x.0]), tape.value(z[y.0]));
                    zx.iter()
                        .zip(zy)
                        .map(|(a, b)| a.total_cmp(b))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
            });
            let scores: Vec<Var> = scored.iter().map(|s| s.1).collect();
            let cat = tape.concat(&scores);
            let alpha = tape.softmax(cat);
            for (i, &(k, _)) in scored.iter().enumerate() {
                attention[m][k] = tape.value(alpha)[i];
            }
            let items: Vec<Var> = scored.iter().map(|&(k, _)| z[k]).collect();
            let agg = tape.weighted_sum(alpha, &items);
            out.push(tape.tanh(agg));
        }
        (out, attention)
    }

    fn heads_on(&self, tape: &mut Tape, b: &Bound, agg: Option<Var>, h: Var) -> (Var, Var) {
        let x = match agg {
            Some(a) => tape.concat(&[a, h]),
            None => h,
        };
        let logits = tape.affine(b.actor_w, x, Some(b.actor_b));
        let value = tape.affine(b.critic_w, x, Some(b.critic_b));
        (logits, value)
    }

    /// Records a full joint forward pass for one time step.
    pub fn forward(&self, tape: &mut Tape, params: &ParameterSet, obs: &[Observation]) -> Result<Forward> {
        let bound: Vec<Bound> = (0..self.networks)
            .map(|k| self.bind(tape, params, k))
            .collect::<Result<_>>()?;
        self.forward_bound(tape, &bound, obs)
    }

    fn forward_bound(&self, tape: &mut Tape, bound: &[Bound], obs: &[Observation]) -> Result<Forward> {
        if obs.is_empty() {
            return Err(Error::invalid("forward pass needs at least one agent"));
        }
        if self.networks != 1 && self.networks != obs.len() {
            return Err(Error::invalid(format!(
                "{} untied networks for {} agents",
                self.networks,
                obs.len()
            )));
        }
        let features: Vec<Var> = obs
            .iter()
            .enumerate()
            .map(|(m, o)| self.encode_on(tape, &bound[self.network_of(m)], o))
            .collect::<Result<_>>()?;
        let (aggregated, attention) = if self.communicate {
            let (agg, att) = self.gat_on(tape, bound, &features);
            (agg.into_iter().map(Some).collect(), att)
        } else {
            (vec![None; features.len()], Vec::new())
        };
        let mut logits = Vec::with_capacity(features.len());
        let mut values = Vec::with_capacity(features.len());
        for (m, (&h, &agg)) in features.iter().zip(&aggregated).enumerate() {
            let (l, v) = self.heads_on(tape, &bound[self.network_of(m)], agg, h);
            logits.push(l);
            values.push(v);
        }
        Ok(Forward {
            features,
            aggregated,
            logits,
            values,
            attention,
        })
    }

    /// Records forward passes of several time steps sharing one set of parameter nodes.
    pub fn forward_many(&self, tape: &mut Tape, params: &ParameterSet, steps: &[Vec<Observation>]) -> Result<Vec<Forward>> {
        let bound: Vec<Bound> = (0..self.networks)
            .map(|k| self.bind(tape, params, k))
            .collect::<Result<_>>()?;
        steps
            .iter()
            .map(|obs| self.forward_bound(tape, &bound, obs))
            .collect()
    }
}

/// An architecture together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub arch: Architecture,
    pub params: ParameterSet,
}

/// Action distribution and value estimate of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutput {
    pub probs: Vec<f64>,
    pub value: f64,
}

impl Policy {
    /// Feature vector of `agent`'s observation.
    pub fn encode(&self, agent: usize, obs: &Observation) -> Result<Vec<f64>> {
        let mut t = Tape::new();
        let b = self.arch.bind(&mut t, &self.params, self.arch.network_of(agent))?;
        let h = self.arch.encode_on(&mut t, &b, obs)?;
        Ok(t.value(h).to_vec())
    }

    /// Aggregated features and attention weights for the given agent features.
    pub fn gat_aggregate(&self, features: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, AttentionMatrix)> {
        if !self.arch.communicate {
            return Err(Error::invalid("this network has no attention layer"));
        }
        if features.is_empty() || features.iter().any(|f| f.len() != self.arch.net.feature) {
            return Err(Error::invalid("feature vectors do not match the network"));
        }
        let mut t = Tape::new();
        let bound: Vec<Bound> = (0..self.arch.networks)
            .map(|k| self.arch.bind(&mut t, &self.params, k))
            .collect::<Result<_>>()?;
        let feats: Vec<Var> = features.iter().map(|f| t.leaf(f.clone())).collect();
        let (agg, att) = self.arch.gat_on(&mut t, &bound, &feats);
        Ok((agg.iter().map(|&v| t.value(v).to_vec()).collect(), att))
    }

    /// Actor probabilities and critic value of `agent` from its aggregated and own
    /// features.
    pub fn actor_critic_heads(&self, agent: usize, aggregated: Option<&[f64]>, feature: &[f64]) -> Result<AgentOutput> {
        if aggregated.is_some() != self.arch.communicate {
            return Err(Error::invalid("aggregated features must be given iff the network communicates"));
        }
        let mut t = Tape::new();
        let b = self.arch.bind(&mut t, &self.params, self.arch.network_of(agent))?;
        let h = t.leaf(feature.to_vec());
        let agg = aggregated.map(|a| t.leaf(a.to_vec()));
        let (l, v) = self.arch.heads_on(&mut t, &b, agg, h);
        let p = t.softmax(l);
        Ok(AgentOutput {
            probs: t.value(p).to_vec(),
            value: t.scalar(v),
        })
    }

    /// Full joint forward pass.
    pub fn outputs(&self, obs: &[Observation]) -> Result<(Vec<AgentOutput>, AttentionMatrix)> {
        let mut t = Tape::new();
        let f = self.arch.forward(&mut t, &self.params, obs)?;
        let out = f
            .logits
            .iter()
            .zip(&f.values)
            .map(|(&l, &v)| {
                let p = t.softmax(l);
                AgentOutput {
                    probs: t.value(p).to_vec(),
                    value: t.scalar(v),
                }
            })
            .collect();
        Ok((out, f.attention))
    }
}
