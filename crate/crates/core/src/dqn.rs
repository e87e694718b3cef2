//! The DECIDE stage: Q-network pair, replay buffer, epsilon-greedy policy,
//! reward, TD training step, thermal-aware action space, and the
//! threshold-triggered training loop.
//!
//! Action encoding is a flat index of fixed width `k_paths + 4`:
//! `0..k_paths` reroute the worst-violating monitored pair onto that rank
//! of its redundant-path inventory, followed by throttle-best-effort,
//! throttle-delay-tolerant, cooling, and no-op. The width is frozen per
//! config so the Q-network output layer never changes shape; per-decision
//! eligibility masks out missing paths and paths through thermally
//! out-of-range switches.

use std::collections::{BTreeSet, VecDeque};
use std::io::{Read, Write};
use std::path::Path as FsPath;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::knowledge::{normalize_state, NetworkState, NormBounds, ViolationReport};
use crate::nn::{Adam, Grads, Mlp};
use crate::sim::Simulator;
use crate::topology::{Path, SwitchId};
use crate::util::{derive_seed, fnv1a64};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

/// What a stored transition's reward field carries.
///
/// `Relative` stores the reward function referenced to the episode's
/// healthy operating level (the value at the first observation), so
/// dwelling in a violated state costs reward every step and clearing the
/// violation stops the cost. With `Absolute`, every state earns a
/// positive reward and an episode that ends at recovery collects less
/// total reward than one that lingers violated, which trains the agent
/// away from recovering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DqnConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
    pub epsilon_decay: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Sync the target network every this many gradient steps.
    pub target_sync_steps: u64,
    /// Optional override: sync at episode boundaries instead.
    pub sync_per_episodes: Option<u32>,
    pub episodes: usize,
    /// Reward weight on mean normalized latency.
    pub alpha: f64,
    /// Reward weight on mean normalized utilization.
    pub beta: f64,
    /// Reward offset (normalized link bandwidth).
    pub reward_c: f64,
    pub reward_mode: RewardMode,
    pub hidden: Vec<usize>,
    pub seed: u64,
    /// Evaluation seed set.
    pub seeds: Vec<u64>,
    /// Control decisions allowed per episode.
    pub decision_cap: u32,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.995,
            learning_rate: 0.001,
            epsilon_start: 1.0,
            epsilon_floor: 0.01,
            epsilon_decay: 0.995,
            batch_size: 32,
            buffer_capacity: 2000,
            target_sync_steps: 300,
            sync_per_episodes: None,
            episodes: 1500,
            alpha: 0.657,
            beta: 0.345,
            reward_c: 1.0,
            reward_mode: RewardMode::Relative,
            hidden: vec![24, 24],
            seed: 42,
            seeds: vec![23, 37, 49, 71],
            decision_cap: 200,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.gamma)
            && self.learning_rate > 0.0
            && (self.epsilon_floor..=1.0).contains(&self.epsilon_start)
            && self.epsilon_floor >= 0.0
            && (0.0..1.0).contains(&self.alpha)
            && (0.0..1.0).contains(&self.beta)
            && self.batch_size > 0
            && self.buffer_capacity >= self.batch_size;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("dqn config out of range".into()))
        }
    }

    /// Stable hash of the whole config, embedded in weights files.
    pub fn config_hash(&self) -> u64 {
        fnv1a64(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

/// Per-episode exploration rate: `max(floor, decay^k)`.
pub fn epsilon_schedule(cfg: &DqnConfig, episode: usize) -> f64 {
    cfg.epsilon_floor.max(cfg.epsilon_decay.powi(episode as i32))
}

// ---------------------------------------------------------------------------
// Transitions and replay
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
    /// Eligibility mask of the next state's action space; empty means
    /// unrestricted. The TD max runs over this set, keeping never-taken
    /// (masked) outputs from inflating targets.
    pub next_eligible: Vec<bool>,
}

/// Bounded FIFO replay memory with uniform without-replacement sampling.
#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    buf: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buf.iter()
    }

    /// Uniform sample without replacement; `None` when underfilled (the
    /// caller skips the training step).
    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Option<Vec<&Transition>> {
        if self.buf.len() < batch {
            return None;
        }
        let idx = rand::seq::index::sample(rng, self.buf.len(), batch);
        Some(idx.iter().map(|i| &self.buf[i]).collect())
    }
}

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    /// Reroute the worst-violating pair onto inventory path of this rank.
    Reroute(usize),
    ThrottleBestEffort,
    ThrottleDelayTolerant,
    /// Raise HVAC to full on the currently hot switches.
    Cooling,
    NoOp,
}

pub fn n_actions(k_paths: usize) -> usize {
    k_paths + 4
}

pub fn decode_action(index: usize, k_paths: usize) -> Action {
    if index < k_paths {
        Action::Reroute(index)
    } else {
        match index - k_paths {
            0 => Action::ThrottleBestEffort,
            1 => Action::ThrottleDelayTolerant,
            2 => Action::Cooling,
            _ => Action::NoOp,
        }
    }
}

pub fn action_label(index: usize, k_paths: usize) -> String {
    match decode_action(index, k_paths) {
        Action::Reroute(w) => format!("reroute-path-{w}"),
        Action::ThrottleBestEffort => "throttle-best-effort".into(),
        Action::ThrottleDelayTolerant => "throttle-delay-tolerant".into(),
        Action::Cooling => "cooling".into(),
        Action::NoOp => "no-op".into(),
    }
}

/// The per-decision action space: fixed width, per-action eligibility.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    pub k_paths: usize,
    pub eligible: Vec<bool>,
    /// Monitored-pair index the path actions apply to.
    pub target_pair: Option<usize>,
}

impl ActionSpace {
    pub fn n_actions(&self) -> usize {
        n_actions(self.k_paths)
    }

    pub fn eligible_indices(&self) -> Vec<usize> {
        self.eligible
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Builds the eligible action set for one decision.
///
/// Path actions exist for the target pair's available inventory ranks; when
/// hot or cold switches are present, ranks whose path crosses one are
/// filtered out. Throttle, cooling, and no-op are always eligible, so a
/// fully filtered inventory still leaves a workable set.
pub fn build_action_space(
    k_paths: usize,
    target_pair: Option<usize>,
    candidate_paths: &[Path],
    hot_cold: &BTreeSet<SwitchId>,
) -> ActionSpace {
    let n = n_actions(k_paths);
    let mut eligible = vec![true; n];
    for rank in 0..k_paths {
        let ok = target_pair.is_some()
            && rank < candidate_paths.len()
            && (hot_cold.is_empty()
                || candidate_paths[rank].iter().all(|s| !hot_cold.contains(s)));
        eligible[rank] = ok;
    }
    ActionSpace {
        k_paths,
        eligible,
        target_pair,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SelectedAction {
    pub index: usize,
    /// True when exploration picked the action.
    pub explored: bool,
    /// True when the eligible set was empty and no-op was forced.
    pub fallback: bool,
}

/// Epsilon-greedy over the eligible actions: explore uniformly when the
/// uniform draw lands at or below epsilon, otherwise take the masked argmax
/// with lowest-index tie-break.
pub fn select_action(
    net: &Mlp<f64>,
    state: &[f64],
    space: &ActionSpace,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<SelectedAction> {
    let eligible = space.eligible_indices();
    if eligible.is_empty() {
        return Ok(SelectedAction {
            index: space.n_actions() - 1,
            explored: false,
            fallback: true,
        });
    }
    let xi: f64 = rng.gen();
    if xi <= epsilon {
        let pick = eligible[rng.gen_range(0..eligible.len())];
        return Ok(SelectedAction {
            index: pick,
            explored: true,
            fallback: false,
        });
    }
    let q = net.forward(state)?;
    let mut best = eligible[0];
    for &i in &eligible[1..] {
        if q[i] > q[best] {
            best = i;
        }
    }
    Ok(SelectedAction {
        index: best,
        explored: false,
        fallback: false,
    })
}

// ---------------------------------------------------------------------------
// Reward and TD learning
// ---------------------------------------------------------------------------

/// R = C - (alpha * mean normalized latency + beta * mean normalized
/// utilization).
pub fn reward(mean_norm_latency: f64, mean_norm_utilization: f64, cfg: &DqnConfig) -> f64 {
    cfg.reward_c - (cfg.alpha * mean_norm_latency + cfg.beta * mean_norm_utilization)
}

/// Reward evaluated on a network state: expectations realized as means
/// over the monitored links and pairs, normalized by the observation
/// bounds.
pub fn reward_from_state(state: &NetworkState, bounds: &NormBounds, cfg: &DqnConfig) -> f64 {
    let mean = |v: &[f64], norm: &dyn Fn(f64) -> f64| -> f64 {
        if v.is_empty() {
            0.0
        } else {
            v.iter().map(|&x| norm(x)).sum::<f64>() / v.len() as f64
        }
    };
    let l = mean(&state.tm.path_latency, &|x| {
        (x / bounds.l_bound_s).clamp(0.0, 1.0)
    });
    let u = mean(&state.tm.link_utilization, &|x| {
        (x / bounds.u_bound).clamp(0.0, 1.0)
    });
    reward(l, u, cfg)
}

/// TD targets: `r` for terminal transitions, otherwise
/// `r + gamma * max_a' Q_target(s', a')` with the max over the next
/// state's eligible actions.
pub fn td_targets(batch: &[&Transition], target: &Mlp<f64>, gamma: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                Ok(t.r)
            } else {
                let q = target.forward(&t.s_next)?;
                let max = q
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| t.next_eligible.is_empty() || t.next_eligible[*i])
                    .map(|(_, &v)| v)
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok(t.r + gamma * max)
            }
        })
        .collect()
}

/// One TD step: squared-error loss over the chosen actions, gradients
/// flowing only through those outputs, one Adam update. Returns the
/// pre-update loss.
pub fn train_step(
    net: &mut Mlp<f64>,
    target: &Mlp<f64>,
    batch: &[&Transition],
    opt: &mut Adam<f64>,
    gamma: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty training batch".into()));
    }
    let y = td_targets(batch, target, gamma)?;
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grads = Grads::zeros_like(net);
    for (t, &yi) in batch.iter().zip(&y) {
        let cache = net.forward_cached(&t.s)?;
        let qa = cache.output()[t.a];
        loss += (qa - yi).powi(2);
        let mut grad_out = vec![0.0; net.n_outputs()];
        grad_out[t.a] = 2.0 * (qa - yi) / n;
        let g = net.backward(&cache, &grad_out);
        grads.accumulate(&g);
    }
    loss /= n;
    if !loss.is_finite() {
        return Err(Error::Invalid(format!("non-finite training loss {loss}")));
    }
    opt.step(net, &grads);
    Ok(loss)
}

/// Hard target-network sync.
pub fn sync_target(net: &Mlp<f64>, target: &mut Mlp<f64>) {
    target.copy_from(net);
}

// ---------------------------------------------------------------------------
// Weights file
// ---------------------------------------------------------------------------

const WEIGHTS_MAGIC: &[u8; 4] = b"AHW1";
const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightsMeta {
    pub eta: u32,
    pub n_actions: u32,
    pub sizes: Vec<u32>,
    pub seed: u64,
    pub config_hash: u64,
}

/// Writes the versioned binary weights file: magic, version, eta, |A|,
/// layer sizes, seed, config hash, then the flattened parameters little
/// endian.
pub fn save_weights(path: &FsPath, net: &Mlp<f64>, seed: u64, config_hash: u64) -> Result<()> {
    let sizes = net.sizes();
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.extend_from_slice(&(sizes[0] as u32).to_le_bytes());
    out.extend_from_slice(&(*sizes.last().unwrap() as u32).to_le_bytes());
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    out.extend_from_slice(&seed.to_le_bytes());
    out.extend_from_slice(&config_hash.to_le_bytes());
    let flat = net.flatten();
    out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
    for v in flat {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn load_weights(path: &FsPath) -> Result<(Mlp<f64>, WeightsMeta)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::WeightsFormat("truncated file".into()));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let u32_at = |pos: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
    };
    let u64_at = |pos: &mut usize| -> Result<u64> {
        Ok(u64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
    };

    if take(&mut pos, 4)? != WEIGHTS_MAGIC {
        return Err(Error::WeightsFormat("bad magic".into()));
    }
    let version = u32_at(&mut pos)?;
    if version != WEIGHTS_VERSION {
        return Err(Error::WeightsFormat(format!(
            "unsupported version {version}"
        )));
    }
    let eta = u32_at(&mut pos)?;
    let n_actions = u32_at(&mut pos)?;
    let n_sizes = u32_at(&mut pos)? as usize;
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        sizes.push(u32_at(&mut pos)?);
    }
    let seed = u64_at(&mut pos)?;
    let config_hash = u64_at(&mut pos)?;
    let n_params = u64_at(&mut pos)? as usize;
    let mut flat = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        flat.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
    }
    let usizes: Vec<usize> = sizes.iter().map(|&s| s as usize).collect();
    let mut net = Mlp::zeros(&usizes);
    net.load_flat(&flat)?;
    if net.n_inputs() != eta as usize || net.n_outputs() != n_actions as usize {
        return Err(Error::WeightsFormat("inconsistent header sizes".into()));
    }
    Ok((
        net,
        WeightsMeta {
            eta,
            n_actions,
            sizes,
            seed,
            config_hash,
        },
    ))
}

// ---------------------------------------------------------------------------
// Agent driver: shared decision/transition mechanics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct PendingDecision {
    s_norm: Vec<f64>,
    action: usize,
    apply_tick: u64,
}

/// Drives the decision loop against a simulator tick stream: completes
/// pending transitions once their action has taken effect, and issues a
/// new decision whenever the trigger is up and no action is in flight.
pub struct AgentDriver {
    pending: Option<PendingDecision>,
    /// Reward level of the episode's first observation, the healthy
    /// reference for `RewardMode::Relative`.
    reward_ref: Option<f64>,
    pub decisions: u32,
    pub fallbacks: u32,
}

impl AgentDriver {
    pub fn new() -> Self {
        Self {
            pending: None,
            reward_ref: None,
            decisions: 0,
            fallbacks: 0,
        }
    }

    pub fn in_flight(&self) -> bool {
        self.pending.is_some()
    }

    /// Processes one tick. Returns a completed transition when the pending
    /// action's effect has landed and the follow-up state was observed.
    #[allow(clippy::too_many_arguments)]
    pub fn on_tick(
        &mut self,
        sim: &mut Simulator,
        state: &NetworkState,
        report: &ViolationReport,
        net: &Mlp<f64>,
        cfg: &DqnConfig,
        sim_cfg: &SimConfig,
        epsilon: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Option<Transition>> {
        if self.reward_ref.is_none() {
            self.reward_ref = Some(reward_from_state(state, &sim_cfg.norm, cfg));
        }
        let mut completed = None;
        if let Some(p) = &self.pending {
            if sim.tick_index() >= p.apply_tick {
                let s_next = normalize_state(state, &sim_cfg.norm);
                let r_next = reward_from_state(state, &sim_cfg.norm, cfg);
                let r = match cfg.reward_mode {
                    RewardMode::Relative => r_next - self.reward_ref.unwrap_or(cfg.reward_c),
                    RewardMode::Absolute => r_next,
                };
                let done = !report.trigger;
                let next_eligible = if done {
                    Vec::new()
                } else {
                    sim.build_action_space(report).eligible
                };
                let p = self.pending.take().unwrap();
                completed = Some(Transition {
                    s: p.s_norm,
                    a: p.action,
                    r,
                    s_next,
                    done,
                    next_eligible,
                });
            }
        }

        if report.trigger && self.pending.is_none() && self.decisions < cfg.decision_cap {
            let space = sim.build_action_space(report);
            let s_norm = normalize_state(state, &sim_cfg.norm);
            let sel = select_action(net, &s_norm, &space, epsilon, rng)?;
            if sel.fallback {
                self.fallbacks += 1;
            }
            let ev = sim.schedule_agent_action(sel.index, &space, report)?;
            self.pending = Some(PendingDecision {
                s_norm,
                action: sel.index,
                apply_tick: ev.apply_tick,
            });
            self.decisions += 1;
        }
        Ok(completed)
    }
}

impl Default for AgentDriver {
    fn default() -> Self {
        Self::new()
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeCurve {
    pub episode: usize,
    pub reward: f64,
    pub epsilon: f64,
    pub mean_loss: f64,
}

pub struct TrainOutput {
    pub net: Mlp<f64>,
    pub curves: Vec<EpisodeCurve>,
    pub gradient_steps: u64,
    pub transitions_stored: u64,
}

/// Renders the training curves as CSV.
pub fn curves_to_csv(curves: &[EpisodeCurve]) -> String {
    let mut s = String::from("episode,reward,epsilon,mean_loss\n");
    for c in curves {
        s.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            c.episode, c.reward, c.epsilon, c.mean_loss
        ));
    }
    s
}

/// Runs the threshold-triggered training loop for `cfg.episodes` episodes.
///
/// `make_sim(episode)` builds the (seeded, disruption-injected) simulator
/// for each episode. Episodes run until recovery (a full violation-free
/// streak after at least one violation), the decision cap, or the episode
/// duration. Transitions are stored only for ticks where the trigger
/// fired, so a violation-free episode contributes nothing.
pub fn train<M>(mut make_sim: M, cfg: &DqnConfig, sim_cfg: &SimConfig) -> Result<TrainOutput>
where
    M: FnMut(usize) -> Result<Simulator>,
{
    cfg.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x11));
    let mut explore_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x22));

    // Probe one simulator for the observation width.
    let probe = make_sim(0).map_err(|e| Error::TrainingAborted {
        episode: 0,
        reason: e.to_string(),
    })?;
    let eta = probe.eta();
    let width = n_actions(sim_cfg.k_paths);
    let mut sizes = vec![eta];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(width);

    let mut net = Mlp::<f64>::new(&sizes, &mut init_rng);
    let mut target = net.clone();
    let mut opt = Adam::new(&net, cfg.learning_rate);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);

    let mut curves = Vec::with_capacity(cfg.episodes);
    let mut gradient_steps: u64 = 0;
    let mut transitions_stored: u64 = 0;

    for episode in 0..cfg.episodes {
        let epsilon = epsilon_schedule(cfg, episode);
        let mut sim = make_sim(episode).map_err(|e| Error::TrainingAborted {
            episode,
            reason: e.to_string(),
        })?;
        let mut driver = AgentDriver::new();
        let mut ep_reward = 0.0;
        let mut ep_losses: Vec<f64> = Vec::new();

        while !sim.finished() {
            let out = sim.tick().map_err(|e| Error::TrainingAborted {
                episode,
                reason: e.to_string(),
            })?;
            let t = driver.on_tick(
                &mut sim,
                &out.state,
                &out.report,
                &net,
                cfg,
                sim_cfg,
                epsilon,
                &mut explore_rng,
            )?;
            if let Some(tr) = t {
                ep_reward += tr.r;
                buffer.push(tr);
                transitions_stored += 1;
                if let Some(batch) = buffer.sample(cfg.batch_size, &mut explore_rng) {
                    let loss = train_step(&mut net, &target, &batch, &mut opt, cfg.gamma)?;
                    ep_losses.push(loss);
                    gradient_steps += 1;
                    if cfg.sync_per_episodes.is_none()
                        && gradient_steps.is_multiple_of(cfg.target_sync_steps)
                    {
                        sync_target(&net, &mut target);
                    }
                }
            }
            if sim.recovered() || (driver.decisions >= cfg.decision_cap && !driver.in_flight()) {
                break;
            }
        }

        if let Some(every) = cfg.sync_per_episodes {
            if every > 0 && (episode as u32 + 1).is_multiple_of(every) {
                sync_target(&net, &mut target);
            }
        }

        let mean_loss = if ep_losses.is_empty() {
            0.0
        } else {
            ep_losses.iter().sum::<f64>() / ep_losses.len() as f64
        };
        curves.push(EpisodeCurve {
            episode,
            reward: ep_reward,
            epsilon,
            mean_loss,
        });
    }

    Ok(TrainOutput {
        net,
        curves,
        gradient_steps,
        transitions_stored,
    })
}

use rand::SeedableRng;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tiny_transition(a: usize, r: f64, done: bool) -> Transition {
        Transition {
            s: vec![0.1, 0.2],
            a,
            r,
            s_next: vec![0.3, 0.4],
            done,
            next_eligible: Vec::new(),
        }
    }

    #[test]
    fn epsilon_schedule_closed_form() {
        let cfg = DqnConfig::default();
        assert_eq!(epsilon_schedule(&cfg, 0), 1.0);
        let e100 = epsilon_schedule(&cfg, 100);
        assert!((e100 - 0.6058).abs() < 1e-4, "0.995^100 ~ 0.6058, got {e100}");
        for k in 0..=1500usize {
            let expect = (0.995f64.powi(k as i32)).max(0.01);
            assert_eq!(epsilon_schedule(&cfg, k), expect);
        }
    }

    #[test]
    fn epsilon_floor_first_reached_at_919() {
        let cfg = DqnConfig::default();
        assert!(epsilon_schedule(&cfg, 918) > 0.01);
        assert_eq!(epsilon_schedule(&cfg, 919), 0.01);
        assert_eq!(epsilon_schedule(&cfg, 1500), 0.01);
    }

    #[test]
    fn reward_examples() {
        let cfg = DqnConfig::default();
        assert_eq!(reward(0.0, 0.0, &cfg), 1.0);
        assert!((reward(1.0, 1.0, &cfg) - (1.0 - 1.002)).abs() < 1e-12);
        assert!((reward(0.4, 0.5, &cfg) - 0.5647).abs() < 1e-12);
    }

    #[test]
    fn reward_strictly_decreasing_and_bounded() {
        let cfg = DqnConfig::default();
        let base = reward(0.3, 0.3, &cfg);
        assert!(reward(0.4, 0.3, &cfg) < base);
        assert!(reward(0.3, 0.4, &cfg) < base);
        for l in [0.0, 0.5, 1.0] {
            for u in [0.0, 0.5, 1.0] {
                assert!(reward(l, u, &cfg) <= cfg.reward_c);
            }
        }
    }

    #[test]
    fn buffer_fifo_eviction_at_capacity() {
        let mut buf = ReplayBuffer::new(2000);
        for i in 0..2001 {
            buf.push(tiny_transition(i % 4, i as f64, false));
        }
        assert_eq!(buf.len(), 2000);
        // The first transition (r = 0) is gone; order preserved.
        let rs: Vec<f64> = buf.iter().map(|t| t.r).collect();
        assert_eq!(rs[0], 1.0);
        assert_eq!(rs[1999], 2000.0);
        for w in rs.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn buffer_sample_not_ready() {
        let mut buf = ReplayBuffer::new(2000);
        for i in 0..31 {
            buf.push(tiny_transition(0, i as f64, false));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(buf.sample(32, &mut rng).is_none());
    }

    #[test]
    fn buffer_sample_without_replacement() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..3 {
            buf.push(tiny_transition(0, i as f64, false));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = buf.sample(3, &mut rng).unwrap();
        let mut rs: Vec<f64> = batch.iter().map(|t| t.r).collect();
        rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rs, vec![0.0, 1.0, 2.0], "a permutation of all three");
    }

    #[test]
    fn td_target_examples() {
        let mut target = Mlp::<f64>::zeros(&[2, 2]);
        // Make Q_target(s') = [2.0, 1.0] for any input.
        target.layers[0].b = vec![2.0, 1.0];
        let t_terminal = tiny_transition(0, 0.5, true);
        let t_running = tiny_transition(0, 0.5, false);
        let batch = vec![&t_terminal, &t_running];
        let y = td_targets(&batch, &target, 0.995).unwrap();
        assert_eq!(y[0], 0.5);
        assert!((y[1] - 2.49).abs() < 1e-12);
        let y0 = td_targets(&batch, &target, 0.0).unwrap();
        assert_eq!(y0, vec![0.5, 0.5]);
    }

    #[test]
    fn select_action_greedy_and_tiebreak() {
        let mut net = Mlp::<f64>::zeros(&[2, 4]);
        net.layers[0].b = vec![1.0, 3.0, 3.0, 0.0];
        let space = ActionSpace {
            k_paths: 0,
            eligible: vec![true; 4],
            target_pair: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let sel = select_action(&net, &[0.0, 0.0], &space, 0.0, &mut rng).unwrap();
            assert_eq!(sel.index, 1, "two equal maxima tie-break to the lower index");
            assert!(!sel.explored);
        }
    }

    #[test]
    fn select_action_respects_mask() {
        let mut net = Mlp::<f64>::zeros(&[2, 4]);
        net.layers[0].b = vec![9.0, 3.0, 2.0, 0.0];
        let space = ActionSpace {
            k_paths: 0,
            eligible: vec![false, true, true, true],
            target_pair: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sel = select_action(&net, &[0.0, 0.0], &space, 0.0, &mut rng).unwrap();
        assert_eq!(sel.index, 1, "masked argmax skips ineligible action 0");
    }

    #[test]
    fn select_action_uniform_under_full_exploration() {
        let net = Mlp::<f64>::zeros(&[2, 8]);
        let space = ActionSpace {
            k_paths: 4,
            eligible: vec![true; 8],
            target_pair: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000usize;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            let sel = select_action(&net, &[0.0, 0.0], &space, 1.0, &mut rng).unwrap();
            counts[sel.index] += 1;
        }
        // Chi-square against uniform, 7 dof; 24.32 is the 0.999 quantile.
        let expect = n as f64 / 8.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        assert!(chi2 < 24.32, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn argmax_invariant_under_constant_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Mlp::<f64>::new(&[4, 8, 6], &mut rng);
        let space = ActionSpace {
            k_paths: 2,
            eligible: vec![true; 6],
            target_pair: None,
        };
        let x = vec![0.2, 0.4, 0.6, 0.8];
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let before = select_action(&net, &x, &space, 0.0, &mut r1).unwrap().index;
        for b in &mut net.layers.last_mut().unwrap().b {
            *b += 5.0;
        }
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let after = select_action(&net, &x, &space, 0.0, &mut r2).unwrap().index;
        assert_eq!(before, after);
    }

    #[test]
    fn build_action_space_counting() {
        use crate::topology::SwitchId;
        let paths: Vec<Path> = vec![
            vec![SwitchId(7), SwitchId(3), SwitchId(8)],
            vec![SwitchId(7), SwitchId(4), SwitchId(8)],
            vec![SwitchId(7), SwitchId(3), SwitchId(0), SwitchId(4), SwitchId(8)],
            vec![SwitchId(7), SwitchId(4), SwitchId(0), SwitchId(3), SwitchId(8)],
        ];
        // No thermal violation, one violated pair, K=4: all 8 actions.
        let space = build_action_space(4, Some(0), &paths, &BTreeSet::new());
        assert_eq!(space.n_actions(), 8);
        assert_eq!(space.eligible_indices().len(), 8);

        // One spine hot: paths through it are filtered.
        let hot = BTreeSet::from([SwitchId(3)]);
        let space = build_action_space(4, Some(0), &paths, &hot);
        assert_eq!(space.eligible_indices(), vec![1, 4, 5, 6, 7]);

        // All paths filtered: throttles, cooling, no-op remain.
        let hot = BTreeSet::from([SwitchId(3), SwitchId(4)]);
        let space = build_action_space(4, Some(0), &paths, &hot);
        assert_eq!(space.eligible_indices(), vec![4, 5, 6, 7]);
    }

    #[test]
    fn action_decode_layout() {
        assert_eq!(decode_action(0, 4), Action::Reroute(0));
        assert_eq!(decode_action(3, 4), Action::Reroute(3));
        assert_eq!(decode_action(4, 4), Action::ThrottleBestEffort);
        assert_eq!(decode_action(5, 4), Action::ThrottleDelayTolerant);
        assert_eq!(decode_action(6, 4), Action::Cooling);
        assert_eq!(decode_action(7, 4), Action::NoOp);
    }

    #[test]
    fn sync_target_copies_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::<f64>::new(&[4, 6, 3], &mut rng);
        let mut target = Mlp::<f64>::new(&[4, 6, 3], &mut rng);
        let x = vec![0.1, 0.2, 0.3, 0.4];
        assert_ne!(net.forward(&x).unwrap(), target.forward(&x).unwrap());
        sync_target(&net, &mut target);
        assert_eq!(net.forward(&x).unwrap(), target.forward(&x).unwrap());
    }

    #[test]
    fn train_step_zero_loss_when_targets_match() {
        // Zero net, zero rewards, terminal transitions: Q = y = 0.
        let mut net = Mlp::<f64>::zeros(&[2, 3]);
        let target = net.clone();
        let before = net.flatten();
        let mut opt = Adam::new(&net, 0.001);
        let t = tiny_transition(1, 0.0, true);
        let batch = vec![&t; 4];
        let loss = train_step(&mut net, &target, &batch, &mut opt, 0.995).unwrap();
        assert_eq!(loss, 0.0);
        let after = net.flatten();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12, "zero gradient leaves weights put");
        }
    }

    #[test]
    fn train_step_loss_decreases_on_fixed_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut net = Mlp::<f64>::new(&[4, 8, 3], &mut rng);
        let target = net.clone();
        let mut opt = Adam::new(&net, 0.01);
        let trs: Vec<Transition> = (0..8)
            .map(|i| Transition {
                s: (0..4).map(|j| ((i * 4 + j) as f64 * 0.13).sin()).collect(),
                a: i % 3,
                r: (i as f64 * 0.37).cos(),
                s_next: (0..4).map(|j| ((i * 4 + j) as f64 * 0.29).cos()).collect(),
                done: i % 2 == 0,
                next_eligible: Vec::new(),
            })
            .collect();
        let batch: Vec<&Transition> = trs.iter().collect();
        let first = train_step(&mut net, &target, &batch, &mut opt, 0.9).unwrap();
        let mut last = first;
        for _ in 0..99 {
            last = train_step(&mut net, &target, &batch, &mut opt, 0.9).unwrap();
        }
        assert!(last < first, "loss {first} -> {last}");
    }

    #[test]
    fn gradient_matches_finite_differences_small_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let net = Mlp::<f64>::new(&[6, 24, 24, 4], &mut rng);
        let trs: Vec<Transition> = (0..4)
            .map(|i| Transition {
                s: (0..6).map(|j| ((i * 6 + j) as f64 * 0.11).sin() * 0.5 + 0.5).collect(),
                a: i % 4,
                r: 0.3,
                s_next: (0..6).map(|j| ((i * 6 + j) as f64 * 0.17).cos() * 0.5 + 0.5).collect(),
                done: i % 2 == 1,
                next_eligible: Vec::new(),
            })
            .collect();
        let batch: Vec<&Transition> = trs.iter().collect();
        let target = net.clone();
        let y = td_targets(&batch, &target, 0.995).unwrap();

        let loss_at = |flat: &[f64]| -> f64 {
            let mut n = net.clone();
            n.load_flat(flat).unwrap();
            let mut loss = 0.0;
            for (t, &yi) in batch.iter().zip(&y) {
                let q = n.forward(&t.s).unwrap();
                loss += (q[t.a] - yi).powi(2);
            }
            loss / batch.len() as f64
        };

        // Analytic gradient.
        let mut grads = Grads::zeros_like(&net);
        for (t, &yi) in batch.iter().zip(&y) {
            let cache = net.forward_cached(&t.s).unwrap();
            let qa = cache.output()[t.a];
            let mut go = vec![0.0; 4];
            go[t.a] = 2.0 * (qa - yi) / batch.len() as f64;
            grads.accumulate(&net.backward(&cache, &go));
        }
        let mut flat_grad = Vec::new();
        for l in &grads.layers {
            flat_grad.extend_from_slice(&l.w);
            flat_grad.extend_from_slice(&l.b);
        }

        let flat = net.flatten();
        let h = 1e-6;
        let mut max_rel = 0.0f64;
        for i in (0..flat.len()).step_by(7) {
            let mut plus = flat.clone();
            plus[i] += h;
            let mut minus = flat.clone();
            minus[i] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let denom = fd.abs().max(flat_grad[i].abs()).max(1e-8);
            max_rel = max_rel.max((fd - flat_grad[i]).abs() / denom);
        }
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn weights_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let net = Mlp::<f64>::new(&[10, 24, 24, 8], &mut rng);
        let dir = std::env::temp_dir().join("autoheal-weights-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("w.bin");
        save_weights(&path, &net, 42, 0xDEADBEEF).unwrap();
        let (loaded, meta) = load_weights(&path).unwrap();
        assert_eq!(loaded, net);
        assert_eq!(meta.eta, 10);
        assert_eq!(meta.n_actions, 8);
        assert_eq!(meta.seed, 42);
        assert_eq!(meta.config_hash, 0xDEADBEEF);
        std::fs::remove_file(&path).ok();
    }
}
