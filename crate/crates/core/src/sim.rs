//! The tick engine: advances traffic, thermal state, violation detection,
//! and pending actuations in lockstep.
//!
//! A `Simulator` owns one deterministic run: equal construction inputs and
//! seed give bitwise-identical trajectories. Control logic (the DQN agent
//! or the baseline) lives outside and talks to the simulator through
//! [`Simulator::tick`] outputs and the scheduling/routing hooks.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actuation::{draw_install_delay, ActuationEvent};
use crate::baseline::ecmp_assign_by_delay;
use crate::config::SimConfig;
use crate::dqn::{action_label, decode_action, Action, ActionSpace};
use crate::error::{Error, Result};
use crate::knowledge::{check_violations, KnowledgeBase, NetworkState, ViolationReport};
use crate::thermal::{
    apply_cooling, step_ambient, step_internal, InternalModel, ThermalParams, ThermalState,
};
use crate::topology::{HostId, NetworkGraph, PathInventory, SwitchId};
use crate::traffic::{
    compute_tm_cached, delivered_rate, offered_load, packet_loss_cached, FlashEventConfig,
    FlashSchedule, FlowRoster, FlowSpec, Routing, TrafficCache, N_CLASSES,
};
use crate::util::derive_seed;

/// Scheduled mid-run environment shift (the thermal half of a disruption).
#[derive(Debug, Clone, Default)]
pub struct Disruption {
    pub at_s: f64,
    /// Length of the injected flash window starting at `at_s`.
    pub flash_duration_s: f64,
    pub c_hvac_to: Option<f64>,
    pub tau_env_to: Option<f64>,
    pub p_rack_to: Option<f64>,
}

/// Everything needed to construct one deterministic run.
#[derive(Debug, Clone)]
pub struct SimInit {
    pub graph: NetworkGraph,
    pub roster: FlowRoster,
    pub thermal_params: ThermalParams<f64>,
    pub internal_model: InternalModel,
    pub tau_env_c: f64,
    pub p_rack: f64,
    pub c_hvac_init: f64,
    pub flash: FlashEventConfig,
    pub disruption: Option<Disruption>,
    pub duration_s: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
struct ScheduledEffect {
    log_index: usize,
    action: Action,
    target_pair: Option<usize>,
    hot_snapshot: Vec<usize>,
    apply_tick: u64,
}

/// Everything a controller needs from one tick.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub tick: u64,
    pub t: f64,
    pub state: NetworkState,
    pub report: ViolationReport,
    /// Rate-weighted aggregate loss fraction.
    pub loss: f64,
    pub offered_bps: f64,
    pub delivered_bps: f64,
    /// Utilization samples clamped while stepping the thermal model.
    pub clamp_warnings: usize,
}

pub struct Simulator {
    cfg: SimConfig,
    graph: NetworkGraph,
    flows: Vec<FlowSpec>,
    monitored_pairs: Vec<(HostId, HostId)>,
    pair_leaves: Vec<(SwitchId, SwitchId)>,
    inventory: PathInventory,
    routing: Routing,
    cache: TrafficCache,
    flash: FlashSchedule,
    throttle: [f64; N_CLASSES],
    throttle_active: bool,
    thermal_params: ThermalParams<f64>,
    thermal: ThermalState<f64>,
    internal_model: InternalModel,
    disruption: Option<Disruption>,
    disruption_applied: bool,
    incident_links: Vec<Vec<usize>>,
    duration_ticks: u64,
    t_tick: u64,
    pending: Vec<ScheduledEffect>,
    actuation_log: Vec<ActuationEvent>,
    rng_act: ChaCha8Rng,
    last_state: NetworkState,
    last_report: ViolationReport,
    kb: Option<KnowledgeBase>,
    streak: u32,
    had_violation: bool,
    first_violation_t: Option<f64>,
    recovered_t: Option<f64>,
}

impl Simulator {
    pub fn new(init: SimInit, cfg: SimConfig) -> Result<Self> {
        init.thermal_params.validate()?;
        cfg.intents.validate()?;
        let graph = init.graph;
        let flows = init.roster.flows;
        let monitored_pairs = init.roster.monitored_pairs;

        let mut pair_leaves = Vec::with_capacity(monitored_pairs.len());
        for &(src, dst) in &monitored_pairs {
            let s = graph
                .host(src)
                .ok_or(Error::Invalid(format!("unknown host {}", src.0)))?
                .leaf;
            let d = graph
                .host(dst)
                .ok_or(Error::Invalid(format!("unknown host {}", dst.0)))?
                .leaf;
            pair_leaves.push((s, d));
        }
        let inventory = PathInventory::build(&graph, pair_leaves.iter().copied(), cfg.k_paths)?;

        let routing = ecmp_assign_by_delay(&graph, &flows, cfg.max_ecmp_paths);
        let cache = TrafficCache::build(&graph, &flows, &routing, &monitored_pairs)?;

        let mut flash_rng = ChaCha8Rng::seed_from_u64(derive_seed(init.seed, 0x01));
        let mut flash = FlashSchedule::generate(&init.flash, init.duration_s, &mut flash_rng);
        if let Some(d) = &init.disruption {
            flash.inject(d.at_s, d.flash_duration_s);
        }
        let rng_act = ChaCha8Rng::seed_from_u64(derive_seed(init.seed, 0x02));

        // Incident link lists drive the per-switch utilization estimate.
        let mut incident_links = vec![Vec::new(); graph.n_switches()];
        let index_of = |id: SwitchId| graph.switches.iter().position(|s| s.id == id).unwrap();
        for (i, l) in graph.links.iter().enumerate() {
            incident_links[index_of(l.a)].push(i);
            incident_links[index_of(l.b)].push(i);
        }

        // Initialize thermal at the steady point of the initial traffic.
        let throttle = [1.0; N_CLASSES];
        let offered0 = offered_load(&flows, &flash, &throttle, 0.0);
        let tm0 = compute_tm_cached(&graph, &cache, &offered0, cfg.mtu_bytes);
        let util0 = switch_utilization(&incident_links, &tm0.link_utilization);
        let thermal = ThermalState::at_steady(
            &init.thermal_params,
            init.tau_env_c,
            init.p_rack,
            init.c_hvac_init,
            &util0,
        );

        let last_state = NetworkState {
            tm: tm0,
            temps_c: thermal.tau_internal_c.clone(),
            t: 0.0,
        };
        let last_report = check_violations(&last_state, &cfg.intents);

        let duration_ticks = (init.duration_s / cfg.tick_s).round() as u64;
        if duration_ticks == 0 {
            return Err(Error::Invalid(
                "zero-duration run produces an empty trace".into(),
            ));
        }

        Ok(Self {
            cfg,
            graph,
            flows,
            monitored_pairs,
            pair_leaves,
            inventory,
            routing,
            cache,
            flash,
            throttle,
            throttle_active: false,
            thermal_params: init.thermal_params,
            thermal,
            internal_model: init.internal_model,
            disruption: init.disruption,
            disruption_applied: false,
            incident_links,
            duration_ticks,
            t_tick: 0,
            pending: Vec::new(),
            actuation_log: Vec::new(),
            rng_act,
            last_state,
            last_report,
            kb: None,
            streak: 0,
            had_violation: false,
            first_violation_t: None,
            recovered_t: None,
        })
    }

    /// Turns on per-tick knowledge-base recording (bounded by
    /// `SimConfig::kb_capacity`). Off by default: bulk evaluation runs do
    /// not need the history.
    pub fn enable_knowledge_base(&mut self) {
        self.kb = Some(KnowledgeBase::new(self.cfg.kb_capacity));
    }

    pub fn knowledge_base(&self) -> Option<&KnowledgeBase> {
        self.kb.as_ref()
    }

    // -- accessors ---------------------------------------------------------

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn flows(&self) -> &[FlowSpec] {
        &self.flows
    }

    pub fn monitored_pairs(&self) -> &[(HostId, HostId)] {
        &self.monitored_pairs
    }

    pub fn inventory(&self) -> &PathInventory {
        &self.inventory
    }

    pub fn thermal_state(&self) -> &ThermalState<f64> {
        &self.thermal
    }

    pub fn eta(&self) -> usize {
        self.graph.n_links() + self.monitored_pairs.len() + self.graph.n_switches()
    }

    pub fn tick_index(&self) -> u64 {
        self.t_tick.saturating_sub(1)
    }

    pub fn finished(&self) -> bool {
        self.t_tick >= self.duration_ticks
    }

    pub fn duration_ticks(&self) -> u64 {
        self.duration_ticks
    }

    pub fn recovered(&self) -> bool {
        self.recovered_t.is_some()
    }

    pub fn recovered_t(&self) -> Option<f64> {
        self.recovered_t
    }

    pub fn had_violation(&self) -> bool {
        self.had_violation
    }

    pub fn first_violation_t(&self) -> Option<f64> {
        self.first_violation_t
    }

    pub fn actuation_log(&self) -> &[ActuationEvent] {
        &self.actuation_log
    }

    pub fn last_link_utilization(&self) -> &[f64] {
        &self.last_state.tm.link_utilization
    }

    pub fn last_report(&self) -> &ViolationReport {
        &self.last_report
    }

    /// Pure read of the current network state.
    pub fn observe(&self) -> NetworkState {
        self.last_state.clone()
    }

    /// Swaps in a complete routing (baseline recomputation).
    pub fn replace_routing(&mut self, routing: Routing) {
        self.routing = routing;
        self.rebuild_cache();
    }

    fn rebuild_cache(&mut self) {
        self.cache = TrafficCache::build(
            &self.graph,
            &self.flows,
            &self.routing,
            &self.monitored_pairs,
        )
        .expect("routing covers all flows");
    }

    // -- control hooks -----------------------------------------------------

    /// Monitored pair the path actions should apply to: the pair with the
    /// largest relative threshold excess, combining its own latency and
    /// the utilization of links its flows cross; ties break to the lowest
    /// pair index.
    pub fn worst_violating_pair(&self, report: &ViolationReport) -> Option<usize> {
        if self.monitored_pairs.is_empty() {
            return None;
        }
        let intents = &self.cfg.intents;
        let tm = &self.last_state.tm;
        let violated_links: BTreeSet<usize> = report.violated_links.iter().copied().collect();
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (pi, flows) in self.cache.pair_flows.iter().enumerate() {
            let mut score = tm.path_latency[pi] / intents.l_thr_s;
            for &fi in flows {
                for &li in &self.cache.flow_links[fi] {
                    if !violated_links.is_empty() && !violated_links.contains(&li) {
                        continue;
                    }
                    score = score.max(tm.link_utilization[li] / intents.u_thr);
                }
            }
            if score > best_score {
                best_score = score;
                best = pi;
            }
        }
        Some(best)
    }

    /// Assembles the thermally filtered action space for one decision.
    pub fn build_action_space(&self, report: &ViolationReport) -> ActionSpace {
        let target = self.worst_violating_pair(report);
        let paths = target
            .map(|pi| self.inventory.get(self.pair_leaves[pi].0, self.pair_leaves[pi].1))
            .unwrap_or(&[]);
        let mut hot_cold: BTreeSet<SwitchId> = BTreeSet::new();
        for &k in report.hot_switches.iter().chain(&report.cold_switches) {
            hot_cold.insert(self.graph.switches[k].id);
        }
        crate::dqn::build_action_space(self.cfg.k_paths, target, paths, &hot_cold)
    }

    /// Schedules an agent action with a drawn installation delay. The
    /// effect lands at the first tick boundary at or after the effective
    /// time.
    pub fn schedule_agent_action(
        &mut self,
        action_index: usize,
        space: &ActionSpace,
        report: &ViolationReport,
    ) -> Result<ActuationEvent> {
        let action = decode_action(action_index, self.cfg.k_paths);
        let t_decide = self.last_state.t;
        let delay = draw_install_delay(&mut self.rng_act);
        let t_effective = t_decide + delay;
        let apply_tick = (t_effective / self.cfg.tick_s).ceil() as u64;
        let event = ActuationEvent {
            t_decide,
            action: action_label(action_index, self.cfg.k_paths),
            action_index,
            t_effective,
            apply_tick,
            t_applied: None,
            stale: false,
        };
        self.actuation_log.push(event.clone());
        self.pending.push(ScheduledEffect {
            log_index: self.actuation_log.len() - 1,
            action,
            target_pair: space.target_pair,
            hot_snapshot: report.hot_switches.clone(),
            apply_tick,
        });
        Ok(event)
    }

    // -- the tick ----------------------------------------------------------

    pub fn tick(&mut self) -> Result<TickOutput> {
        if self.finished() {
            return Err(Error::Invalid("tick past run duration".into()));
        }
        let tick = self.t_tick;
        let t = tick as f64 * self.cfg.tick_s;

        self.apply_disruption(t);
        self.apply_due_effects(tick, t)?;

        let offered = offered_load(&self.flows, &self.flash, &self.throttle, t);
        let tm = compute_tm_cached(&self.graph, &self.cache, &offered, self.cfg.mtu_bytes);

        let excess: Vec<f64> = self
            .thermal
            .tau_internal_c
            .iter()
            .map(|&ti| (ti - self.cfg.intents.tau_thr_max_c).max(0.0))
            .collect();
        let loss = packet_loss_cached(
            &self.graph,
            &self.flows,
            &self.cache,
            &offered,
            &excess,
            self.cfg.thermal_loss_coeff_per_c,
        );
        let offered_bps: f64 = offered.iter().sum();
        let delivered_bps = delivered_rate(&offered, &loss);

        let util = switch_utilization(&self.incident_links, &tm.link_utilization);
        step_ambient(&mut self.thermal, &self.thermal_params, self.cfg.tick_s)?;
        let clamp_warnings = step_internal(
            &mut self.thermal,
            &self.thermal_params,
            &util,
            self.cfg.tick_s,
            self.internal_model,
        )?;
        if !self.thermal.finite() {
            return Err(Error::Diverged {
                t,
                reason: "non-finite switch temperature".into(),
            });
        }

        let state = NetworkState {
            tm,
            temps_c: self.thermal.tau_internal_c.clone(),
            t,
        };
        let report = check_violations(&state, &self.cfg.intents);

        if report.trigger {
            self.had_violation = true;
            self.streak = 0;
            self.first_violation_t.get_or_insert(t);
        } else {
            if self.had_violation && self.streak < self.cfg.recovery_streak_ticks {
                self.streak += 1;
                if self.streak == self.cfg.recovery_streak_ticks {
                    self.recovered_t.get_or_insert(t);
                }
            }
            // Lift throttles once the violation stays clear without them;
            // lifting on a merely suppressed violation would oscillate.
            if self.throttle_active && !self.would_violate_unthrottled(t) {
                self.throttle = [1.0; N_CLASSES];
                self.throttle_active = false;
            }
        }

        if let Some(kb) = &mut self.kb {
            kb.record(state.clone())?;
        }
        self.last_state = state.clone();
        self.last_report = report.clone();
        self.t_tick += 1;

        Ok(TickOutput {
            tick,
            t,
            state,
            report,
            loss: loss.aggregate,
            offered_bps,
            delivered_bps,
            clamp_warnings,
        })
    }

    fn apply_disruption(&mut self, t: f64) {
        if self.disruption_applied {
            return;
        }
        let Some(d) = &self.disruption else { return };
        if t < d.at_s {
            return;
        }
        if let Some(c) = d.c_hvac_to {
            for v in &mut self.thermal.c_hvac {
                *v = c;
            }
        }
        if let Some(e) = d.tau_env_to {
            self.thermal.tau_env_c = e;
        }
        if let Some(p) = d.p_rack_to {
            self.thermal.p_rack = p;
        }
        self.disruption_applied = true;
    }

    fn apply_due_effects(&mut self, tick: u64, t: f64) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let due: Vec<ScheduledEffect> = {
            let (due, rest): (Vec<_>, Vec<_>) = self
                .pending
                .drain(..)
                .partition(|e| e.apply_tick <= tick);
            self.pending = rest;
            due
        };
        for eff in due {
            let stale = self.effect_is_stale(&eff);
            match eff.action {
                Action::Reroute(rank) => {
                    if let Some(pi) = eff.target_pair {
                        let (s, d) = self.pair_leaves[pi];
                        let paths = self.inventory.get(s, d);
                        if rank < paths.len() {
                            let path = paths[rank].clone();
                            let (src, dst) = self.monitored_pairs[pi];
                            self.routing.assign_pair(&self.flows, src, dst, &path);
                            self.rebuild_cache();
                        }
                    }
                }
                Action::ThrottleBestEffort => {
                    self.throttle[2] = self.cfg.throttle_factor;
                    self.throttle_active = true;
                }
                Action::ThrottleDelayTolerant => {
                    self.throttle[1] = self.cfg.throttle_factor;
                    self.throttle_active = true;
                }
                Action::Cooling => {
                    apply_cooling(&mut self.thermal, &eff.hot_snapshot, 1.0)?;
                }
                Action::NoOp => {}
            }
            let ev = &mut self.actuation_log[eff.log_index];
            ev.t_applied = Some(t);
            ev.stale = stale;
        }
        Ok(())
    }

    /// An action is stale when the condition it answered has already
    /// cleared: for a reroute, the target pair no longer violates directly
    /// or through its links; for the rest, the trigger itself is down.
    fn effect_is_stale(&self, eff: &ScheduledEffect) -> bool {
        match eff.action {
            Action::Reroute(_) => match eff.target_pair {
                Some(pi) => !self.pair_is_violated(pi),
                None => !self.last_report.trigger,
            },
            _ => !self.last_report.trigger,
        }
    }

    /// Whether lifting the throttles right now would re-violate the
    /// traffic intents (the actuator estimates this from per-class rate
    /// accounting).
    fn would_violate_unthrottled(&self, t: f64) -> bool {
        let offered = offered_load(&self.flows, &self.flash, &[1.0; N_CLASSES], t);
        let tm = compute_tm_cached(&self.graph, &self.cache, &offered, self.cfg.mtu_bytes);
        tm.link_utilization
            .iter()
            .any(|&u| u > self.cfg.intents.u_thr)
            || tm.path_latency.iter().any(|&l| l > self.cfg.intents.l_thr_s)
    }

    fn pair_is_violated(&self, pair: usize) -> bool {
        if self.last_report.violated_pairs.contains(&pair) {
            return true;
        }
        let violated: BTreeSet<usize> =
            self.last_report.violated_links.iter().copied().collect();
        self.cache.pair_flows[pair]
            .iter()
            .any(|&fi| self.cache.flow_links[fi].iter().any(|li| violated.contains(li)))
    }
}

/// Normalized switch utilization: mean of incident link utilizations, each
/// capped at 1 (a switch cannot process beyond line rate).
pub fn switch_utilization(incident_links: &[Vec<usize>], link_utilization: &[f64]) -> Vec<f64> {
    incident_links
        .iter()
        .map(|links| {
            if links.is_empty() {
                0.0
            } else {
                links
                    .iter()
                    .map(|&i| link_utilization[i].min(1.0))
                    .sum::<f64>()
                    / links.len() as f64
            }
        })
        .collect()
}
