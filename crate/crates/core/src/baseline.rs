//! The comparator: Dijkstra shortest paths with ECMP flow hashing and slow
//! reactive recovery.
//!
//! The baseline never inspects temperatures and never throttles. It learns
//! about violations only through its polling interval; on reaction it
//! recomputes shortest paths over utilization-inflated weights and
//! rehashes every flow.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeMap};

use crate::config::SimConfig;
use crate::knowledge::ViolationReport;
use crate::sim::Simulator;
use crate::topology::{NetworkGraph, Path, SwitchId};
use crate::traffic::{FlowSpec, Routing};
use crate::util::mix64;

/// Link weight accessor: index into `g.links`.
pub type LinkWeight<'a> = &'a dyn Fn(usize) -> f64;

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: SwitchId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (dist, node id) via reversed comparison.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distance-to-destination table for every switch, by Dijkstra from `dst`.
fn distances_to(g: &NetworkGraph, dst: SwitchId, weight: LinkWeight) -> BTreeMap<SwitchId, f64> {
    let mut dist: BTreeMap<SwitchId, f64> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(dst, 0.0);
    heap.push(HeapEntry { dist: 0.0, node: dst });
    // Incident (link idx, neighbor) lists.
    let mut incident: BTreeMap<SwitchId, Vec<(usize, SwitchId)>> = BTreeMap::new();
    for sw in &g.switches {
        incident.entry(sw.id).or_default();
    }
    for (i, l) in g.links.iter().enumerate() {
        incident.entry(l.a).or_default().push((i, l.b));
        incident.entry(l.b).or_default().push((i, l.a));
    }
    for v in incident.values_mut() {
        v.sort_by_key(|&(_, n)| n);
    }
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if d > *dist.get(&node).unwrap_or(&f64::INFINITY) {
            continue;
        }
        for &(li, n) in &incident[&node] {
            let nd = d + weight(li);
            if nd < *dist.get(&n).unwrap_or(&f64::INFINITY) {
                dist.insert(n, nd);
                heap.push(HeapEntry { dist: nd, node: n });
            }
        }
    }
    dist
}

/// Minimum-weight path from `src` to `dst`, lexicographically smallest
/// among equals. `None` when unreachable.
pub fn dijkstra(
    g: &NetworkGraph,
    src: SwitchId,
    dst: SwitchId,
    weight: LinkWeight,
) -> Option<Path> {
    if src == dst {
        return Some(vec![src]);
    }
    let dist = distances_to(g, dst, weight);
    dist.get(&src)?;
    // Walk forward: at each node take the smallest-id neighbor on a tight
    // edge. Tightness uses exact equality; the distance table was built
    // from exactly these sums.
    let adj = g.adjacency();
    let mut path = vec![src];
    let mut cur = src;
    while cur != dst {
        let mut next = None;
        for &n in &adj[&cur] {
            let li = g.link_between(cur, n).expect("adjacency implies a link");
            if let Some(&dn) = dist.get(&n) {
                if dn + weight(li) == dist[&cur] {
                    next = Some(n);
                    break;
                }
            }
        }
        cur = next?;
        path.push(cur);
        if path.len() > g.n_switches() {
            return None;
        }
    }
    Some(path)
}

/// Shortest path by propagation delay.
pub fn dijkstra_by_delay(g: &NetworkGraph, src: SwitchId, dst: SwitchId) -> Option<Path> {
    dijkstra(g, src, dst, &|i| g.links[i].propagation_delay_s)
}

/// All equal-minimum-cost paths from `src` to `dst`, in lexicographic
/// order, capped at `max_paths`.
pub fn equal_cost_paths(
    g: &NetworkGraph,
    src: SwitchId,
    dst: SwitchId,
    weight: LinkWeight,
    max_paths: usize,
) -> Vec<Path> {
    if src == dst {
        return vec![vec![src]];
    }
    let dist = distances_to(g, dst, weight);
    if !dist.contains_key(&src) {
        return Vec::new();
    }
    let adj = g.adjacency();
    let mut out = Vec::new();
    let mut stack = vec![src];
    #[allow(clippy::too_many_arguments)]
    fn rec(
        g: &NetworkGraph,
        adj: &BTreeMap<SwitchId, Vec<SwitchId>>,
        dist: &BTreeMap<SwitchId, f64>,
        weight: LinkWeight,
        dst: SwitchId,
        stack: &mut Vec<SwitchId>,
        out: &mut Vec<Path>,
        max_paths: usize,
    ) {
        if out.len() >= max_paths {
            return;
        }
        let cur = *stack.last().unwrap();
        if cur == dst {
            out.push(stack.clone());
            return;
        }
        for &n in &adj[&cur] {
            let li = g.link_between(cur, n).expect("adjacency implies a link");
            if let Some(&dn) = dist.get(&n) {
                if dn + weight(li) == dist[&cur] {
                    stack.push(n);
                    rec(g, adj, dist, weight, dst, stack, out, max_paths);
                    stack.pop();
                }
            }
        }
    }
    rec(g, &adj, &dist, weight, dst, &mut stack, &mut out, max_paths);
    out
}

/// Stable per-flow hash used for ECMP spreading; depends only on the flow
/// id, so reassignments are reproducible and permutation-invariant.
pub fn flow_hash(id: u32) -> u64 {
    mix64(id as u64)
}

/// Hashes each flow onto one of its equal-cost shortest paths between the
/// endpoints' leaves.
pub fn ecmp_assign(
    g: &NetworkGraph,
    flows: &[FlowSpec],
    weight: LinkWeight,
    max_paths: usize,
) -> Routing {
    let mut routing = Routing::default();
    let mut cache: BTreeMap<(SwitchId, SwitchId), Vec<Path>> = BTreeMap::new();
    for f in flows {
        let src_leaf = g.host(f.src).map(|h| h.leaf);
        let dst_leaf = g.host(f.dst).map(|h| h.leaf);
        let (Some(s), Some(d)) = (src_leaf, dst_leaf) else {
            continue;
        };
        let paths = cache
            .entry((s, d))
            .or_insert_with(|| equal_cost_paths(g, s, d, weight, max_paths));
        if paths.is_empty() {
            continue;
        }
        let idx = (flow_hash(f.id.0) % paths.len() as u64) as usize;
        routing.by_flow.insert(f.id, paths[idx].clone());
    }
    routing
}

/// ECMP over propagation-delay weights (the baseline's initial routing,
/// also used as the agent's starting point).
pub fn ecmp_assign_by_delay(g: &NetworkGraph, flows: &[FlowSpec], max_paths: usize) -> Routing {
    ecmp_assign(g, flows, &|i| g.links[i].propagation_delay_s, max_paths)
}

/// Reactive baseline controller: polls at `detection_delay` granularity,
/// then recomputes ECMP routing over utilization-inflated weights
/// (weight x (1 + rho)). No thermal observability, no throttling.
#[derive(Debug, Clone)]
pub struct BaselineDriver {
    detection_delay_ticks: u64,
    pending_recompute: Option<u64>,
    pub first_reaction_t: Option<f64>,
    pub reroutes: u32,
}

impl BaselineDriver {
    pub fn new(cfg: &SimConfig) -> Self {
        let ticks = (cfg.detection_delay_s / cfg.tick_s).ceil().max(1.0) as u64;
        Self {
            detection_delay_ticks: ticks,
            pending_recompute: None,
            first_reaction_t: None,
            reroutes: 0,
        }
    }

    /// Call once per tick with that tick's violation report.
    pub fn on_tick(&mut self, sim: &mut Simulator, report: &ViolationReport, t: f64, tick: u64) {
        if let Some(at) = self.pending_recompute {
            if tick >= at {
                self.pending_recompute = None;
                self.recompute(sim);
                self.first_reaction_t.get_or_insert(t);
                self.reroutes += 1;
                // Keep polling while the violation persists.
                if report.trigger {
                    self.pending_recompute = Some(tick + self.detection_delay_ticks);
                }
                return;
            }
        }
        if report.trigger && self.pending_recompute.is_none() {
            self.pending_recompute = Some(tick + self.detection_delay_ticks);
        }
    }

    fn recompute(&self, sim: &mut Simulator) {
        let utilization = sim.last_link_utilization().to_vec();
        let g = sim.graph().clone();
        let weight = move |i: usize| {
            g.links[i].propagation_delay_s * (1.0 + utilization[i])
        };
        let routing = ecmp_assign(
            sim.graph(),
            sim.flows(),
            &weight,
            sim.config().max_ecmp_paths,
        );
        sim.replace_routing(routing);
    }
}
