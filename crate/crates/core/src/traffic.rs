//! Fluid-flow traffic model: offered load per service class, flash-event
//! bursts, link utilizations, queueing latency, and the loss model.
//!
//! The simulation is rate-based rather than packet-based: each tick the
//! offered bit rates are pushed through the current routing, producing the
//! per-link utilizations and per-pair latencies that make up the traffic
//! matrix.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{HostId, NetworkGraph, Path, SwitchId};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct FlowId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServiceClass {
    CriticalTimeSensitive,
    CriticalDelayTolerant,
    BestEffort,
}

impl ServiceClass {
    /// Fixed class-to-priority mapping; lower is dropped last.
    pub fn priority(self) -> usize {
        match self {
            ServiceClass::CriticalTimeSensitive => 0,
            ServiceClass::CriticalDelayTolerant => 1,
            ServiceClass::BestEffort => 2,
        }
    }

    pub fn is_critical(self) -> bool {
        self.priority() < 2
    }
}

pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: FlowId,
    pub src: HostId,
    pub dst: HostId,
    pub class: ServiceClass,
    pub nominal_rate_bps: f64,
}

/// Flash-event process parameters. Events arrive as a Poisson process and
/// multiply the offered rate of the covered service classes while active.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlashEventConfig {
    pub arrival_rate_hz: f64,
    pub burst_multiplier: f64,
    pub duration_s: f64,
    /// Service classes amplified by a burst. SCADA polling and firmware
    /// pushes ride the maintenance/monitoring classes, not the protection
    /// streams.
    pub covers: Vec<ServiceClass>,
}

impl Default for FlashEventConfig {
    fn default() -> Self {
        Self {
            arrival_rate_hz: 0.0,
            burst_multiplier: 1.0,
            duration_s: 5.0,
            covers: vec![
                ServiceClass::BestEffort,
                ServiceClass::CriticalDelayTolerant,
            ],
        }
    }
}

/// Deterministic realization of the flash process over a run horizon:
/// Poisson arrivals pre-drawn from the seeded rng, plus any injected
/// disruption window.
#[derive(Debug, Clone)]
pub struct FlashSchedule {
    pub windows: Vec<(f64, f64)>,
    pub burst_multiplier: f64,
    covers: [bool; N_CLASSES],
}

impl FlashSchedule {
    pub fn generate(cfg: &FlashEventConfig, horizon_s: f64, rng: &mut impl Rng) -> Self {
        let mut covers = [false; N_CLASSES];
        for c in &cfg.covers {
            covers[c.priority()] = true;
        }
        let mut windows = Vec::new();
        if cfg.arrival_rate_hz > 0.0 {
            let mut t = 0.0;
            loop {
                let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                t += -u.ln() / cfg.arrival_rate_hz;
                if t >= horizon_s {
                    break;
                }
                windows.push((t, t + cfg.duration_s));
            }
        }
        Self {
            windows,
            burst_multiplier: cfg.burst_multiplier,
            covers,
        }
    }

    /// Adds a deterministic window, e.g. the scheduled disruption.
    pub fn inject(&mut self, start_s: f64, duration_s: f64) {
        self.windows.push((start_s, start_s + duration_s));
        self.windows
            .sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    }

    pub fn active_at(&self, t: f64) -> bool {
        self.windows.iter().any(|&(s, e)| t >= s && t < e)
    }

    pub fn multiplier_for(&self, class: ServiceClass, t: f64) -> f64 {
        if self.covers[class.priority()] && self.active_at(t) {
            self.burst_multiplier
        } else {
            1.0
        }
    }
}

/// Per-flow offered rates at time `t`: nominal rate, times the flash
/// multiplier when a burst covers the flow's class, times the per-class
/// throttle multiplier set by the actuators.
pub fn offered_load(
    flows: &[FlowSpec],
    flash: &FlashSchedule,
    throttle: &[f64; N_CLASSES],
    t: f64,
) -> Vec<f64> {
    flows
        .iter()
        .map(|f| {
            f.nominal_rate_bps * flash.multiplier_for(f.class, t) * throttle[f.class.priority()]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Routing and the traffic matrix
// ---------------------------------------------------------------------------

/// Per-flow path assignment (switch sequences from the source host's leaf
/// to the destination host's leaf).
#[derive(Debug, Clone, Default)]
pub struct Routing {
    pub by_flow: BTreeMap<FlowId, Path>,
}

impl Routing {
    pub fn path_of(&self, f: FlowId) -> Option<&Path> {
        self.by_flow.get(&f)
    }

    /// Routes every flow between the two hosts onto `path`.
    pub fn assign_pair(&mut self, flows: &[FlowSpec], src: HostId, dst: HostId, path: &Path) {
        for f in flows {
            if f.src == src && f.dst == dst {
                self.by_flow.insert(f.id, path.clone());
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrafficMatrix {
    /// Per-link offered utilization, id-sorted; values above 1 record
    /// overload (the loss model caps the admitted rate downstream).
    pub link_utilization: Vec<f64>,
    /// Per monitored pair latency in seconds, pair-id-sorted.
    pub path_latency: Vec<f64>,
}

/// Precomputed routing geometry: per-flow link and switch index lists.
/// Rebuilt whenever the routing changes; the tick loop runs off this
/// instead of rescanning the link table.
#[derive(Debug, Clone)]
pub struct TrafficCache {
    pub flow_links: Vec<Vec<usize>>,
    pub flow_switches: Vec<Vec<usize>>,
    /// Flow indices per monitored pair.
    pub pair_flows: Vec<Vec<usize>>,
}

impl TrafficCache {
    pub fn build(
        g: &NetworkGraph,
        flows: &[FlowSpec],
        routing: &Routing,
        monitored_pairs: &[(HostId, HostId)],
    ) -> Result<Self> {
        let mut link_index: BTreeMap<(SwitchId, SwitchId), usize> = BTreeMap::new();
        for (i, l) in g.links.iter().enumerate() {
            let key = if l.a <= l.b { (l.a, l.b) } else { (l.b, l.a) };
            link_index.insert(key, i);
        }
        let switch_index: BTreeMap<SwitchId, usize> = g
            .switches
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id, i))
            .collect();

        let mut flow_links = Vec::with_capacity(flows.len());
        let mut flow_switches = Vec::with_capacity(flows.len());
        for f in flows {
            let path = routing.path_of(f.id).ok_or(Error::MissingRoute(f.id.0))?;
            let mut links = Vec::with_capacity(path.len().saturating_sub(1));
            for w in path.windows(2) {
                let key = if w[0] <= w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
                let idx = link_index.get(&key).copied().ok_or_else(|| {
                    Error::Invalid(format!("path for flow {} has a missing link", f.id.0))
                })?;
                links.push(idx);
            }
            flow_links.push(links);
            flow_switches.push(
                path.iter()
                    .map(|s| switch_index[s])
                    .collect::<Vec<usize>>(),
            );
        }

        let pair_flows = monitored_pairs
            .iter()
            .map(|&(src, dst)| {
                flows
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| f.src == src && f.dst == dst)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();

        Ok(Self {
            flow_links,
            flow_switches,
            pair_flows,
        })
    }
}

/// Traffic matrix off the precomputed geometry.
pub fn compute_tm_cached(
    g: &NetworkGraph,
    cache: &TrafficCache,
    offered: &[f64],
    mtu_bytes: f64,
) -> TrafficMatrix {
    let mut load = vec![0.0f64; g.n_links()];
    for (links, &rate) in cache.flow_links.iter().zip(offered) {
        for &i in links {
            load[i] += rate;
        }
    }
    let link_utilization: Vec<f64> = load
        .iter()
        .zip(&g.links)
        .map(|(&l, link)| l / link.capacity_bps)
        .collect();

    let flow_latency = |fi: usize| -> f64 {
        cache.flow_links[fi]
            .iter()
            .map(|&i| {
                let l = &g.links[i];
                let rho = link_utilization[i].min(RHO_CLAMP);
                let service = mtu_bytes * 8.0 / l.capacity_bps;
                l.propagation_delay_s + service * rho / (1.0 - rho)
            })
            .sum()
    };
    let path_latency = cache
        .pair_flows
        .iter()
        .map(|fs| {
            if fs.is_empty() {
                0.0
            } else {
                fs.iter().map(|&fi| flow_latency(fi)).sum::<f64>() / fs.len() as f64
            }
        })
        .collect();

    TrafficMatrix {
        link_utilization,
        path_latency,
    }
}

/// Loss model off the precomputed geometry; see [`packet_loss`].
pub fn packet_loss_cached(
    g: &NetworkGraph,
    flows: &[FlowSpec],
    cache: &TrafficCache,
    offered: &[f64],
    thermal_excess_c: &[f64],
    loss_coeff_per_c: f64,
) -> PacketLoss {
    let n_links = g.n_links();
    let mut class_load = vec![[0.0f64; N_CLASSES]; n_links];
    for ((f, &rate), links) in flows.iter().zip(offered).zip(&cache.flow_links) {
        for &i in links {
            class_load[i][f.class.priority()] += rate;
        }
    }

    let mut shed = vec![[0.0f64; N_CLASSES]; n_links];
    for i in 0..n_links {
        let total: f64 = class_load[i].iter().sum();
        let cap = g.links[i].capacity_bps;
        if total <= cap {
            continue;
        }
        let mut overflow = total - cap;
        for class in (0..N_CLASSES).rev() {
            if overflow <= 0.0 {
                break;
            }
            let avail = class_load[i][class];
            if avail <= 0.0 {
                continue;
            }
            let cut = overflow.min(avail);
            shed[i][class] = cut / avail;
            overflow -= cut;
        }
    }

    let mut per_flow = Vec::with_capacity(flows.len());
    let mut lost_rate = 0.0;
    let mut total_rate = 0.0;
    for (fi, (f, &rate)) in flows.iter().zip(offered).enumerate() {
        let mut survival = 1.0f64;
        for &i in &cache.flow_links[fi] {
            survival *= 1.0 - shed[i][f.class.priority()];
        }
        for &k in &cache.flow_switches[fi] {
            let thermal = (loss_coeff_per_c * thermal_excess_c[k]).clamp(0.0, 1.0);
            survival *= 1.0 - thermal;
        }
        let loss = (1.0 - survival).clamp(0.0, 1.0);
        per_flow.push(loss);
        lost_rate += rate * loss;
        total_rate += rate;
    }

    let aggregate = if total_rate > 0.0 {
        lost_rate / total_rate
    } else {
        0.0
    };
    PacketLoss {
        per_flow,
        aggregate,
    }
}

/// Queueing clamp: utilizations at or above this are treated as 0.95 in
/// the latency term to avoid the M/M/1 singularity.
pub const RHO_CLAMP: f64 = 0.95;

/// End-to-end latency of a path given current link utilizations:
/// propagation plus an M/M/1-style queueing term per link.
pub fn path_latency(
    g: &NetworkGraph,
    path: &[SwitchId],
    link_utilization: &[f64],
    mtu_bytes: f64,
) -> f64 {
    let Some(links) = g.path_links(path) else {
        return f64::INFINITY;
    };
    links
        .iter()
        .map(|&i| {
            let l = &g.links[i];
            let rho = link_utilization[i].min(RHO_CLAMP);
            let service = mtu_bytes * 8.0 / l.capacity_bps;
            l.propagation_delay_s + service * rho / (1.0 - rho)
        })
        .sum()
}

/// Computes per-link utilizations and monitored-pair latencies for the
/// current routing and offered rates.
///
/// Monitored-pair latency is the mean over that pair's flows (flows of a
/// pair may ride different paths under ECMP).
pub fn compute_traffic_matrix(
    g: &NetworkGraph,
    flows: &[FlowSpec],
    routing: &Routing,
    offered: &[f64],
    monitored_pairs: &[(HostId, HostId)],
    mtu_bytes: f64,
) -> Result<TrafficMatrix> {
    let cache = TrafficCache::build(g, flows, routing, monitored_pairs)?;
    Ok(compute_tm_cached(g, &cache, offered, mtu_bytes))
}

// ---------------------------------------------------------------------------
// Loss model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PacketLoss {
    /// Loss fraction per flow, aligned with the flow roster.
    pub per_flow: Vec<f64>,
    /// Rate-weighted mean loss fraction.
    pub aggregate: f64,
}

/// Congestion and thermal loss.
///
/// Overloaded links shed exactly their overflow, taken from traversing
/// flows in inverse priority order: best-effort first, then delay-tolerant,
/// then time-sensitive. Switches above the max temperature intent add
/// `loss_coeff` of loss per degree of excess to every flow through them.
/// Loss factors compose multiplicatively along a flow's path.
///
/// `thermal_excess_c` is indexed like `g.switches`.
pub fn packet_loss(
    g: &NetworkGraph,
    flows: &[FlowSpec],
    routing: &Routing,
    offered: &[f64],
    thermal_excess_c: &[f64],
    loss_coeff_per_c: f64,
) -> Result<PacketLoss> {
    let cache = TrafficCache::build(g, flows, routing, &[])?;
    Ok(packet_loss_cached(
        g,
        flows,
        &cache,
        offered,
        thermal_excess_c,
        loss_coeff_per_c,
    ))
}

/// Total delivered rate after loss, bits/s.
pub fn delivered_rate(offered: &[f64], loss: &PacketLoss) -> f64 {
    offered
        .iter()
        .zip(&loss.per_flow)
        .map(|(&r, &l)| r * (1.0 - l))
        .sum()
}

// ---------------------------------------------------------------------------
// Default flow roster
// ---------------------------------------------------------------------------

/// Sampled values: 9600 samples/s at 126 B frames.
pub const SV_RATE_BPS: f64 = 9600.0 * 126.0 * 8.0;
/// GOOSE/control: 4800 samples/s at 200 B frames.
pub const GOOSE_RATE_BPS: f64 = 4800.0 * 200.0 * 8.0;
/// Turbine operational telemetry: 1 kHz at 512 B.
pub const OPERATIONAL_RATE_BPS: f64 = 1000.0 * 512.0 * 8.0;
/// Condition monitoring: 200 Hz at 512 B.
pub const CONDITION_RATE_BPS: f64 = 200.0 * 512.0 * 8.0;
/// Maintenance/firmware bulk trickle per pair.
pub const MAINTENANCE_RATE_BPS: f64 = 4.0e6;
/// Meteorological telemetry: 1 Hz at 512 B.
pub const METEO_RATE_BPS: f64 = 1.0 * 512.0 * 8.0;

/// A flow roster plus the monitored host pairs derived from it.
#[derive(Debug, Clone)]
pub struct FlowRoster {
    pub flows: Vec<FlowSpec>,
    /// Host pairs carrying critical traffic, id-sorted. These are the
    /// latency-monitored pairs and the reroute targets.
    pub monitored_pairs: Vec<(HostId, HostId)>,
}

/// Builds the default WPP service roster over a graph's hosts.
///
/// The protection and control services (SV, GOOSE, operational telemetry)
/// run between the first two hosts of each role, mirroring aggregated
/// merging-unit and gateway traffic; every LDAQ->ECP pair additionally
/// carries best-effort maintenance and meteorological background that flash
/// events amplify.
pub fn build_flow_roster(g: &NetworkGraph, rate_scale: f64) -> FlowRoster {
    use crate::topology::HostRole;

    let by_role = |role: HostRole| -> Vec<HostId> {
        g.hosts
            .iter()
            .filter(|h| h.role == role)
            .map(|h| h.id)
            .collect()
    };
    let ldaq = by_role(HostRole::Ldaq);
    let ecp = by_role(HostRole::Ecp);
    let mu = by_role(HostRole::Mu);
    let vied = by_role(HostRole::Vied);

    let mut flows = Vec::new();
    let mut next = 0u32;
    let mut push = |src: HostId, dst: HostId, class: ServiceClass, rate: f64, flows: &mut Vec<FlowSpec>| {
        flows.push(FlowSpec {
            id: FlowId(next),
            src,
            dst,
            class,
            nominal_rate_bps: rate * rate_scale,
        });
        next += 1;
    };

    let critical_n = 2.min(mu.len()).min(vied.len()).min(ldaq.len()).min(ecp.len());
    for i in 0..critical_n {
        push(mu[i], vied[i], ServiceClass::CriticalTimeSensitive, SV_RATE_BPS, &mut flows);
    }
    for i in 0..critical_n {
        push(vied[i], ldaq[i], ServiceClass::CriticalTimeSensitive, GOOSE_RATE_BPS, &mut flows);
    }
    for i in 0..critical_n {
        push(ldaq[i], ecp[i], ServiceClass::CriticalTimeSensitive, OPERATIONAL_RATE_BPS, &mut flows);
        push(ldaq[i], ecp[i], ServiceClass::CriticalDelayTolerant, CONDITION_RATE_BPS, &mut flows);
    }
    for i in 0..ldaq.len().min(ecp.len()) {
        push(ldaq[i], ecp[i], ServiceClass::BestEffort, MAINTENANCE_RATE_BPS, &mut flows);
        push(ldaq[i], ecp[i], ServiceClass::BestEffort, METEO_RATE_BPS, &mut flows);
    }

    let mut monitored: Vec<(HostId, HostId)> = flows
        .iter()
        .filter(|f| f.class.is_critical())
        .map(|f| (f.src, f.dst))
        .collect();
    monitored.sort();
    monitored.dedup();

    FlowRoster {
        flows,
        monitored_pairs: monitored,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_small, build_wpp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quiet_flash() -> FlashSchedule {
        let cfg = FlashEventConfig::default();
        FlashSchedule::generate(&cfg, 10.0, &mut ChaCha8Rng::seed_from_u64(1))
    }

    fn flow(id: u32, class: ServiceClass, rate: f64) -> FlowSpec {
        FlowSpec {
            id: FlowId(id),
            src: HostId(0),
            dst: HostId(1),
            class,
            nominal_rate_bps: rate,
        }
    }

    #[test]
    fn offered_identity_outside_bursts() {
        let flows = vec![flow(0, ServiceClass::BestEffort, 10e6)];
        let out = offered_load(&flows, &quiet_flash(), &[1.0; 3], 3.0);
        assert_eq!(out, vec![10e6]);
    }

    #[test]
    fn offered_burst_multiplies() {
        let mut flash = quiet_flash();
        flash.burst_multiplier = 5.0;
        flash.inject(2.0, 1.0);
        let flows = vec![flow(0, ServiceClass::BestEffort, 10e6)];
        let out = offered_load(&flows, &flash, &[1.0; 3], 2.5);
        assert_eq!(out, vec![50e6]);
        // Uncovered class unaffected.
        let flows = vec![flow(0, ServiceClass::CriticalTimeSensitive, 10e6)];
        let out = offered_load(&flows, &flash, &[1.0; 3], 2.5);
        assert_eq!(out, vec![10e6]);
    }

    #[test]
    fn zero_arrival_rate_is_base_load() {
        let cfg = FlashEventConfig {
            arrival_rate_hz: 0.0,
            burst_multiplier: 7.0,
            ..Default::default()
        };
        let flash = FlashSchedule::generate(&cfg, 100.0, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(flash.windows.is_empty());
        let flows = vec![flow(0, ServiceClass::BestEffort, 3e6)];
        for t in [0.0, 1.0, 50.0, 99.9] {
            assert_eq!(offered_load(&flows, &flash, &[1.0; 3], t), vec![3e6]);
        }
    }

    /// Two-switch fixture: one spine, one leaf, a single 1 Gb/s link.
    fn one_link_graph() -> (NetworkGraph, Routing) {
        use crate::topology::{build_spine_leaf, SpineLeafSpec};
        let g = build_spine_leaf(&SpineLeafSpec::new(0, 1, 1, 2)).unwrap();
        (g, Routing::default())
    }

    #[test]
    fn utilization_simple_and_overload() {
        let (g, mut routing) = one_link_graph();
        let path = vec![g.switches[1].id, g.switches[0].id];
        let flows = vec![
            flow(0, ServiceClass::BestEffort, 100e6),
            flow(1, ServiceClass::BestEffort, 600e6),
            flow(2, ServiceClass::BestEffort, 600e6),
        ];
        for f in &flows {
            routing.by_flow.insert(f.id, path.clone());
        }
        let tm = compute_traffic_matrix(&g, &flows[..1], &routing, &[100e6], &[], 1500.0).unwrap();
        assert!((tm.link_utilization[0] - 0.1).abs() < 1e-12);

        let tm = compute_traffic_matrix(
            &g,
            &flows[1..],
            &routing,
            &[600e6, 600e6],
            &[],
            1500.0,
        )
        .unwrap();
        assert!((tm.link_utilization[0] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn missing_route_is_error() {
        let (g, routing) = one_link_graph();
        let flows = vec![flow(0, ServiceClass::BestEffort, 1e6)];
        let err = compute_traffic_matrix(&g, &flows, &routing, &[1e6], &[], 1500.0);
        assert!(matches!(err, Err(Error::MissingRoute(0))));
    }

    #[test]
    fn utilization_matches_hand_summed_fixture() {
        // 2 spines, 2 leaves: 4 links. Three flows with hand-assigned paths.
        use crate::topology::{build_spine_leaf, SpineLeafSpec};
        let g = build_spine_leaf(&SpineLeafSpec::new(0, 2, 2, 1)).unwrap();
        // Switch ids: spines 0,1; leaves 2,3. Links in construction order:
        // (0,2) (0,3) (1,2) (1,3).
        let s = |i: u32| SwitchId(i);
        let flows = vec![
            flow(0, ServiceClass::BestEffort, 200e6), // leaf2 -> spine0 -> leaf3
            flow(1, ServiceClass::BestEffort, 300e6), // leaf3 -> spine0 -> leaf2
            flow(2, ServiceClass::BestEffort, 400e6), // leaf2 -> spine1 -> leaf3
        ];
        let mut routing = Routing::default();
        routing.by_flow.insert(FlowId(0), vec![s(2), s(0), s(3)]);
        routing.by_flow.insert(FlowId(1), vec![s(3), s(0), s(2)]);
        routing.by_flow.insert(FlowId(2), vec![s(2), s(1), s(3)]);
        let offered = vec![200e6, 300e6, 400e6];
        let tm = compute_traffic_matrix(&g, &flows, &routing, &offered, &[], 1500.0).unwrap();
        // Oracle: brute-force per-link sums.
        // link (0,2): flows 0,1 -> 500e6; (0,3): flows 0,1 -> 500e6;
        // (1,2): flow 2 -> 400e6; (1,3): flow 2 -> 400e6.
        let expect = [0.5, 0.5, 0.4, 0.4];
        for (u, e) in tm.link_utilization.iter().zip(expect) {
            assert!((u - e).abs() < 1e-12, "{tm:?}");
        }
    }

    #[test]
    fn latency_zero_utilization_is_propagation() {
        let g = build_small();
        let path = vec![SwitchId(2), SwitchId(0), SwitchId(3)];
        let lat = path_latency(&g, &path, &vec![0.0; g.n_links()], 1500.0);
        let prop = g.path_propagation_delay(&path).unwrap();
        assert!((lat - prop).abs() < 1e-15);
    }

    #[test]
    fn latency_queue_term_values() {
        let (g, _) = one_link_graph();
        let path = vec![g.switches[0].id, g.switches[1].id];
        let prop = g.links[0].propagation_delay_s;
        let service = 1500.0 * 8.0 / 1e9; // 12 microseconds

        let lat = path_latency(&g, &path, &[0.5], 1500.0);
        assert!((lat - (prop + service)).abs() < 1e-15, "rho=0.5 gives one service time");

        let lat = path_latency(&g, &path, &[0.99], 1500.0);
        assert!((lat - (prop + 19.0 * service)).abs() < 1e-12, "clamped at 0.95");
    }

    #[test]
    fn latency_monotone_in_utilization() {
        let (g, _) = one_link_graph();
        let path = vec![g.switches[0].id, g.switches[1].id];
        let mut prev = path_latency(&g, &path, &[0.0], 1500.0);
        for i in 1..=40 {
            let rho = i as f64 * 0.05;
            let lat = path_latency(&g, &path, &[rho], 1500.0);
            assert!(lat >= prev, "latency decreased at rho={rho}");
            prev = lat;
        }
    }

    #[test]
    fn loss_zero_when_healthy() {
        let (g, mut routing) = one_link_graph();
        let path = vec![g.switches[1].id, g.switches[0].id];
        let flows = vec![flow(0, ServiceClass::BestEffort, 100e6)];
        routing.by_flow.insert(FlowId(0), path);
        let loss = packet_loss(&g, &flows, &routing, &[100e6], &[0.0, 0.0], 0.002).unwrap();
        assert_eq!(loss.aggregate, 0.0);
        assert_eq!(loss.per_flow, vec![0.0]);
    }

    #[test]
    fn loss_overload_sheds_overflow() {
        let (g, mut routing) = one_link_graph();
        let path = vec![g.switches[1].id, g.switches[0].id];
        let flows = vec![flow(0, ServiceClass::BestEffort, 1.25e9)];
        routing.by_flow.insert(FlowId(0), path);
        let loss = packet_loss(&g, &flows, &routing, &[1.25e9], &[0.0, 0.0], 0.002).unwrap();
        assert!((loss.per_flow[0] - 0.2).abs() < 1e-12, "1 - 1/1.25");
    }

    #[test]
    fn loss_thermal_excess() {
        let (g, mut routing) = one_link_graph();
        let path = vec![g.switches[1].id, g.switches[0].id];
        let flows = vec![flow(0, ServiceClass::BestEffort, 10e6)];
        routing.by_flow.insert(FlowId(0), path);
        // Switch index 0 is 5 degrees over the max intent.
        let loss = packet_loss(&g, &flows, &routing, &[10e6], &[5.0, 0.0], 0.002).unwrap();
        assert!((loss.per_flow[0] - 0.01).abs() < 1e-12, "0.002 * 5");
    }

    #[test]
    fn loss_priority_order_and_conservation() {
        let (g, mut routing) = one_link_graph();
        let path = vec![g.switches[1].id, g.switches[0].id];
        let flows = vec![
            flow(0, ServiceClass::CriticalTimeSensitive, 600e6),
            flow(1, ServiceClass::BestEffort, 600e6),
        ];
        for f in &flows {
            routing.by_flow.insert(f.id, path.clone());
        }
        let offered = vec![600e6, 600e6];
        let loss = packet_loss(&g, &flows, &routing, &offered, &[0.0, 0.0], 0.002).unwrap();
        assert!(loss.per_flow[1] >= loss.per_flow[0]);
        assert_eq!(loss.per_flow[0], 0.0, "critical untouched while best-effort absorbs");
        // Admitted rate never exceeds capacity.
        let admitted: f64 = offered
            .iter()
            .zip(&loss.per_flow)
            .map(|(r, l)| r * (1.0 - l))
            .sum();
        assert!(admitted <= g.links[0].capacity_bps + 1e-6);
    }

    #[test]
    fn traffic_time_invariant_without_flash() {
        let g = build_wpp();
        let roster = build_flow_roster(&g, 1.0);
        let mut routing = Routing::default();
        for f in &roster.flows {
            let src_leaf = g.host(f.src).unwrap().leaf;
            let dst_leaf = g.host(f.dst).unwrap().leaf;
            let paths = crate::topology::k_shortest_paths(&g, src_leaf, dst_leaf, 1).unwrap();
            routing.by_flow.insert(f.id, paths[0].clone());
        }
        let flash = quiet_flash();
        let a = offered_load(&roster.flows, &flash, &[1.0; 3], 0.0);
        let b = offered_load(&roster.flows, &flash, &[1.0; 3], 7.5);
        assert_eq!(a, b);
        let tm_a =
            compute_traffic_matrix(&g, &roster.flows, &routing, &a, &roster.monitored_pairs, 1500.0)
                .unwrap();
        let tm_b =
            compute_traffic_matrix(&g, &roster.flows, &routing, &b, &roster.monitored_pairs, 1500.0)
                .unwrap();
        assert_eq!(tm_a.link_utilization, tm_b.link_utilization);
        assert_eq!(tm_a.path_latency, tm_b.path_latency);
    }

    #[test]
    fn wpp_roster_has_six_monitored_pairs() {
        let g = build_wpp();
        let roster = build_flow_roster(&g, 1.0);
        assert_eq!(roster.monitored_pairs.len(), 6);
        for f in &roster.flows {
            assert!(f.nominal_rate_bps > 0.0);
        }
    }
}
