//! Switch/link/host topology construction and the redundant path inventory.
//!
//! Switches form a super-spine/spine/leaf fabric; hosts attach to leaves by
//! role. Paths between leaves are enumerated once per monitored pair and
//! ranked (hop count, then propagation delay, then lexicographic switch
//! sequence) so that the agent's path-selection actions have a stable,
//! deterministic meaning.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct SwitchId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct HostId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    SuperSpine,
    Spine,
    Leaf,
}

/// Host roles in the wind-plant data acquisition fabric.
///
/// LDAQ gateways publish turbine data, ECP nodes consume it, merging units
/// (MU) publish sampled values, and virtual IEDs consume them and emit
/// control traffic back toward the turbines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HostRole {
    Ldaq,
    Ecp,
    Mu,
    Vied,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Switch {
    pub id: SwitchId,
    pub tier: Tier,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Link {
    pub a: SwitchId,
    pub b: SwitchId,
    /// bits/s
    pub capacity_bps: f64,
    /// seconds
    pub propagation_delay_s: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Host {
    pub id: HostId,
    pub role: HostRole,
    pub leaf: SwitchId,
}

/// A loop-free switch sequence.
pub type Path = Vec<SwitchId>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub switches: Vec<Switch>,
    pub links: Vec<Link>,
    pub hosts: Vec<Host>,
}

pub const DEFAULT_CAPACITY_BPS: f64 = 1e9;
pub const DEFAULT_PROP_DELAY_S: f64 = 150e-6;

impl NetworkGraph {
    pub fn n_switches(&self) -> usize {
        self.switches.len()
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn tier_of(&self, s: SwitchId) -> Option<Tier> {
        self.switches.iter().find(|sw| sw.id == s).map(|sw| sw.tier)
    }

    pub fn host(&self, h: HostId) -> Option<&Host> {
        self.hosts.iter().find(|x| x.id == h)
    }

    /// Link index for an unordered switch pair, if the link exists.
    pub fn link_between(&self, a: SwitchId, b: SwitchId) -> Option<usize> {
        self.links
            .iter()
            .position(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
    }

    /// Adjacency as id-sorted neighbor lists, keyed by switch id.
    pub fn adjacency(&self) -> BTreeMap<SwitchId, Vec<SwitchId>> {
        let mut adj: BTreeMap<SwitchId, Vec<SwitchId>> = BTreeMap::new();
        for sw in &self.switches {
            adj.entry(sw.id).or_default();
        }
        for l in &self.links {
            adj.entry(l.a).or_default().push(l.b);
            adj.entry(l.b).or_default().push(l.a);
        }
        for neigh in adj.values_mut() {
            neigh.sort();
            neigh.dedup();
        }
        adj
    }

    /// Link indices along a path, in hop order.
    pub fn path_links(&self, path: &[SwitchId]) -> Option<Vec<usize>> {
        path.windows(2)
            .map(|w| self.link_between(w[0], w[1]))
            .collect()
    }

    pub fn path_propagation_delay(&self, path: &[SwitchId]) -> Option<f64> {
        let links = self.path_links(path)?;
        Some(links.iter().map(|&i| self.links[i].propagation_delay_s).sum())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Construction parameters for a regular super-spine/spine/leaf fabric.
///
/// `super_spines == 0` means the super-spine tier is absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpineLeafSpec {
    pub super_spines: u32,
    pub spines: u32,
    pub leaves: u32,
    pub hosts_per_leaf: u32,
    pub capacity_bps: f64,
    pub propagation_delay_s: f64,
}

impl SpineLeafSpec {
    pub fn new(super_spines: u32, spines: u32, leaves: u32, hosts_per_leaf: u32) -> Self {
        Self {
            super_spines,
            spines,
            leaves,
            hosts_per_leaf,
            capacity_bps: DEFAULT_CAPACITY_BPS,
            propagation_delay_s: DEFAULT_PROP_DELAY_S,
        }
    }
}

const ROLE_CYCLE: [HostRole; 4] = [HostRole::Ldaq, HostRole::Ecp, HostRole::Mu, HostRole::Vied];

/// Builds a full-bipartite spine-leaf fabric: every spine links to every
/// leaf, and every super-spine (when present) to every spine. Hosts are
/// attached round-robin over leaves with roles cycling LDAQ/ECP/MU/vIED.
pub fn build_spine_leaf(spec: &SpineLeafSpec) -> Result<NetworkGraph> {
    if spec.spines == 0 || spec.leaves == 0 {
        return Err(Error::InvalidSpec(format!(
            "spines and leaves must be >= 1 (got {}, {})",
            spec.spines, spec.leaves
        )));
    }
    if spec.hosts_per_leaf == 0 {
        return Err(Error::InvalidSpec("hosts_per_leaf must be >= 1".into()));
    }
    if spec.capacity_bps <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "capacity must be > 0 (got {})",
            spec.capacity_bps
        )));
    }

    let mut switches = Vec::new();
    let mut next = 0u32;
    let mut take = |tier: Tier, count: u32, out: &mut Vec<Switch>| -> Vec<SwitchId> {
        (0..count)
            .map(|_| {
                let id = SwitchId(next);
                next += 1;
                out.push(Switch { id, tier });
                id
            })
            .collect()
    };
    let super_spines = take(Tier::SuperSpine, spec.super_spines, &mut switches);
    let spines = take(Tier::Spine, spec.spines, &mut switches);
    let leaves = take(Tier::Leaf, spec.leaves, &mut switches);

    let mut links = Vec::new();
    let connect = |a: SwitchId, b: SwitchId, links: &mut Vec<Link>| {
        links.push(Link {
            a,
            b,
            capacity_bps: spec.capacity_bps,
            propagation_delay_s: spec.propagation_delay_s,
        });
    };
    for &ss in &super_spines {
        for &sp in &spines {
            connect(ss, sp, &mut links);
        }
    }
    for &sp in &spines {
        for &lf in &leaves {
            connect(sp, lf, &mut links);
        }
    }

    let total_hosts = spec.leaves * spec.hosts_per_leaf;
    let hosts = (0..total_hosts)
        .map(|j| Host {
            id: HostId(j),
            role: ROLE_CYCLE[(j % 4) as usize],
            leaf: leaves[(j % spec.leaves) as usize],
        })
        .collect();

    Ok(NetworkGraph {
        switches,
        links,
        hosts,
    })
}

/// The frozen "wpp" preset: 40 switches, 78 switch-to-switch links, 60
/// hosts.
///
/// Full-bipartite wiring cannot produce these totals for any tier split, so
/// the preset fixes one satisfying assignment: 3 super-spines, 4 spines and
/// 33 leaves, with the spine/super-spine layers fully meshed (12 links) and
/// each leaf dual-homed to two consecutive spines (66 links).
pub fn build_wpp() -> NetworkGraph {
    let n_super = 3u32;
    let n_spine = 4u32;
    let n_leaf = 33u32;
    let n_host = 60u32;

    let mut switches = Vec::new();
    let mut id = 0u32;
    let mut tier_ids = |tier: Tier, count: u32, out: &mut Vec<Switch>| -> Vec<SwitchId> {
        (0..count)
            .map(|_| {
                let sid = SwitchId(id);
                id += 1;
                out.push(Switch { id: sid, tier });
                sid
            })
            .collect()
    };
    let super_spines = tier_ids(Tier::SuperSpine, n_super, &mut switches);
    let spines = tier_ids(Tier::Spine, n_spine, &mut switches);
    let leaves = tier_ids(Tier::Leaf, n_leaf, &mut switches);

    let mut links = Vec::new();
    let connect = |a: SwitchId, b: SwitchId, links: &mut Vec<Link>| {
        links.push(Link {
            a,
            b,
            capacity_bps: DEFAULT_CAPACITY_BPS,
            propagation_delay_s: DEFAULT_PROP_DELAY_S,
        });
    };
    for &ss in &super_spines {
        for &sp in &spines {
            connect(ss, sp, &mut links);
        }
    }
    for (i, &lf) in leaves.iter().enumerate() {
        let s0 = spines[i % n_spine as usize];
        let s1 = spines[(i + 1) % n_spine as usize];
        connect(s0, lf, &mut links);
        connect(s1, lf, &mut links);
    }

    let hosts = (0..n_host)
        .map(|j| Host {
            id: HostId(j),
            role: ROLE_CYCLE[(j % 4) as usize],
            leaf: leaves[(j % n_leaf) as usize],
        })
        .collect();

    NetworkGraph {
        switches,
        links,
        hosts,
    }
}

/// Small preset for quick runs and tests: 2 spines, 4 leaves, 8 hosts.
pub fn build_small() -> NetworkGraph {
    build_spine_leaf(&SpineLeafSpec::new(0, 2, 4, 2)).expect("small preset is valid")
}

// ---------------------------------------------------------------------------
// Path enumeration
// ---------------------------------------------------------------------------

/// Returns up to `k` admissible simple paths from `src` to `dst`, ranked by
/// hop count, then total propagation delay, then lexicographic switch
/// sequence.
///
/// Admissible paths never transit a leaf switch: a leaf may only appear as
/// an endpoint. This is the usual up-down constraint for spine-leaf fabrics
/// and keeps the redundant-path inventory free of host-edge detours.
///
/// An unreachable destination yields an empty list.
pub fn k_shortest_paths(
    g: &NetworkGraph,
    src: SwitchId,
    dst: SwitchId,
    k: usize,
) -> Result<Vec<Path>> {
    if src == dst {
        return Err(Error::Invalid(format!(
            "k_shortest_paths requires src != dst (got {:?})",
            src
        )));
    }
    let adj = g.adjacency();
    if !adj.contains_key(&src) || !adj.contains_key(&dst) {
        return Err(Error::UnknownSwitch(
            if adj.contains_key(&src) { dst.0 } else { src.0 },
        ));
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    let tiers: BTreeMap<SwitchId, Tier> =
        g.switches.iter().map(|s| (s.id, s.tier)).collect();
    let transit_ok = |id: SwitchId| tiers.get(&id) != Some(&Tier::Leaf);

    // Hop distance respecting the transit rule, for the deepening start.
    let d0 = match bfs_distance(&adj, src, dst, &transit_ok) {
        Some(d) => d,
        None => return Ok(Vec::new()),
    };

    let max_hops = g.n_switches().saturating_sub(1);
    let mut cap = d0;
    loop {
        let mut found = Vec::new();
        let mut stack = vec![src];
        let mut visited: BTreeSet<SwitchId> = BTreeSet::new();
        visited.insert(src);
        enumerate(&adj, dst, cap, &transit_ok, &mut stack, &mut visited, &mut found);
        if found.len() >= k || cap >= max_hops {
            rank_paths(g, &mut found);
            found.truncate(k);
            return Ok(found);
        }
        cap += 1;
    }
}

fn bfs_distance(
    adj: &BTreeMap<SwitchId, Vec<SwitchId>>,
    src: SwitchId,
    dst: SwitchId,
    transit_ok: &impl Fn(SwitchId) -> bool,
) -> Option<usize> {
    let mut dist: BTreeMap<SwitchId, usize> = BTreeMap::new();
    dist.insert(src, 0);
    let mut q = VecDeque::from([src]);
    while let Some(v) = q.pop_front() {
        let d = dist[&v];
        for &n in &adj[&v] {
            if dist.contains_key(&n) {
                continue;
            }
            if n == dst {
                return Some(d + 1);
            }
            if transit_ok(n) {
                dist.insert(n, d + 1);
                q.push_back(n);
            }
        }
    }
    None
}

fn enumerate(
    adj: &BTreeMap<SwitchId, Vec<SwitchId>>,
    dst: SwitchId,
    hop_cap: usize,
    transit_ok: &impl Fn(SwitchId) -> bool,
    stack: &mut Vec<SwitchId>,
    visited: &mut BTreeSet<SwitchId>,
    out: &mut Vec<Path>,
) {
    let cur = *stack.last().unwrap();
    if stack.len() - 1 == hop_cap {
        return;
    }
    for &n in &adj[&cur] {
        if visited.contains(&n) {
            continue;
        }
        if n == dst {
            let mut p = stack.clone();
            p.push(n);
            out.push(p);
            continue;
        }
        if !transit_ok(n) {
            continue;
        }
        stack.push(n);
        visited.insert(n);
        enumerate(adj, dst, hop_cap, transit_ok, stack, visited, out);
        visited.remove(&n);
        stack.pop();
    }
}

fn rank_paths(g: &NetworkGraph, paths: &mut [Path]) {
    paths.sort_by(|p, q| {
        let dp = g.path_propagation_delay(p).unwrap_or(f64::INFINITY);
        let dq = g.path_propagation_delay(q).unwrap_or(f64::INFINITY);
        p.len()
            .cmp(&q.len())
            .then(dp.partial_cmp(&dq).unwrap_or(std::cmp::Ordering::Equal))
            .then_with(|| p.cmp(q))
    });
}

/// Precomputed redundant paths per ordered switch pair.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PathInventory {
    pub paths: BTreeMap<(SwitchId, SwitchId), Vec<Path>>,
}

impl PathInventory {
    /// Builds the inventory for the given ordered switch pairs, keeping up
    /// to `k` ranked paths each.
    pub fn build(
        g: &NetworkGraph,
        pairs: impl IntoIterator<Item = (SwitchId, SwitchId)>,
        k: usize,
    ) -> Result<Self> {
        let mut paths = BTreeMap::new();
        for (s, d) in pairs {
            if s == d {
                paths.insert((s, d), vec![vec![s]]);
                continue;
            }
            paths.insert((s, d), k_shortest_paths(g, s, d, k)?);
        }
        Ok(Self { paths })
    }

    pub fn get(&self, src: SwitchId, dst: SwitchId) -> &[Path] {
        self.paths.get(&(src, dst)).map(Vec::as_slice).unwrap_or(&[])
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub connected: bool,
    pub nonpositive_capacity_links: Vec<usize>,
    pub self_loops: Vec<usize>,
    pub duplicate_links: Vec<usize>,
    pub hosts_not_on_leaf: Vec<HostId>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.connected
            && self.nonpositive_capacity_links.is_empty()
            && self.self_loops.is_empty()
            && self.duplicate_links.is_empty()
            && self.hosts_not_on_leaf.is_empty()
    }
}

/// Checks the `NetworkGraph` invariants and reports every finding.
pub fn validate_graph(g: &NetworkGraph) -> ValidationReport {
    let mut nonpositive = Vec::new();
    let mut self_loops = Vec::new();
    let mut duplicates = Vec::new();
    let mut seen: BTreeSet<(SwitchId, SwitchId)> = BTreeSet::new();
    for (i, l) in g.links.iter().enumerate() {
        if l.capacity_bps <= 0.0 {
            nonpositive.push(i);
        }
        if l.a == l.b {
            self_loops.push(i);
        }
        let key = if l.a <= l.b { (l.a, l.b) } else { (l.b, l.a) };
        if !seen.insert(key) {
            duplicates.push(i);
        }
    }

    let connected = if g.switches.is_empty() {
        true
    } else {
        let adj = g.adjacency();
        let start = g.switches[0].id;
        let mut reached = BTreeSet::from([start]);
        let mut q = VecDeque::from([start]);
        while let Some(v) = q.pop_front() {
            for &n in &adj[&v] {
                if reached.insert(n) {
                    q.push_back(n);
                }
            }
        }
        reached.len() == g.switches.len()
    };

    let leaf_ids: BTreeSet<SwitchId> = g
        .switches
        .iter()
        .filter(|s| s.tier == Tier::Leaf)
        .map(|s| s.id)
        .collect();
    let hosts_not_on_leaf = g
        .hosts
        .iter()
        .filter(|h| !leaf_ids.contains(&h.leaf))
        .map(|h| h.id)
        .collect();

    ValidationReport {
        connected,
        nonpositive_capacity_links: nonpositive,
        self_loops,
        duplicate_links: duplicates,
        hosts_not_on_leaf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> NetworkGraph {
        // Three spines so transit is allowed everywhere.
        let switches = vec![
            Switch { id: SwitchId(0), tier: Tier::Spine },
            Switch { id: SwitchId(1), tier: Tier::Spine },
            Switch { id: SwitchId(2), tier: Tier::Spine },
        ];
        let mk = |a: u32, b: u32| Link {
            a: SwitchId(a),
            b: SwitchId(b),
            capacity_bps: 1e9,
            propagation_delay_s: 1.0,
        };
        NetworkGraph {
            switches,
            links: vec![mk(0, 1), mk(1, 2), mk(0, 2)],
            hosts: vec![],
        }
    }

    #[test]
    fn bipartite_link_count() {
        let g = build_spine_leaf(&SpineLeafSpec::new(0, 2, 4, 1)).unwrap();
        assert_eq!(g.n_links(), 8);
        assert_eq!(g.n_switches(), 6);
    }

    #[test]
    fn minimal_graph_connected() {
        let g = build_spine_leaf(&SpineLeafSpec::new(0, 1, 1, 1)).unwrap();
        assert_eq!(g.n_links(), 1);
        assert!(validate_graph(&g).connected);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(build_spine_leaf(&SpineLeafSpec::new(0, 0, 4, 1)).is_err());
        assert!(build_spine_leaf(&SpineLeafSpec::new(0, 2, 0, 1)).is_err());
        assert!(build_spine_leaf(&SpineLeafSpec::new(0, 2, 2, 0)).is_err());
    }

    #[test]
    fn wpp_preset_totals() {
        let g = build_wpp();
        assert_eq!(g.n_switches(), 40);
        assert_eq!(g.n_links(), 78);
        assert_eq!(g.hosts.len(), 60);
        assert!(validate_graph(&g).all_pass());
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_wpp().to_json().unwrap();
        let b = build_wpp().to_json().unwrap();
        assert_eq!(a, b);
        let s = SpineLeafSpec::new(2, 3, 5, 2);
        let x = build_spine_leaf(&s).unwrap().to_json().unwrap();
        let y = build_spine_leaf(&s).unwrap().to_json().unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn triangle_two_paths() {
        let g = triangle();
        let paths = k_shortest_paths(&g, SwitchId(0), SwitchId(2), 2).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0], vec![SwitchId(0), SwitchId(2)]);
        assert_eq!(paths[1], vec![SwitchId(0), SwitchId(1), SwitchId(2)]);
    }

    #[test]
    fn same_endpoint_rejected() {
        let g = triangle();
        assert!(k_shortest_paths(&g, SwitchId(0), SwitchId(0), 2).is_err());
    }

    #[test]
    fn two_spine_three_leaf_exactly_two_paths() {
        let g = build_spine_leaf(&SpineLeafSpec::new(0, 2, 3, 1)).unwrap();
        // Leaves are switches 2, 3, 4; spines 0 and 1.
        let paths = k_shortest_paths(&g, SwitchId(2), SwitchId(3), 4).unwrap();
        assert_eq!(paths.len(), 2, "one per spine: {paths:?}");
        for p in &paths {
            assert_eq!(p.len(), 3);
        }
        // Oracle: exhaustive simple-path enumeration under the same
        // admissibility rule finds no further paths.
        let all = exhaustive_paths(&g, SwitchId(2), SwitchId(3));
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn unreachable_yields_empty() {
        let mut g = triangle();
        g.switches.push(Switch { id: SwitchId(9), tier: Tier::Spine });
        let paths = k_shortest_paths(&g, SwitchId(0), SwitchId(9), 3).unwrap();
        assert!(paths.is_empty());
    }

    #[test]
    fn validate_flags_isolated_switch() {
        let mut g = build_small();
        g.switches.push(Switch { id: SwitchId(99), tier: Tier::Spine });
        let report = validate_graph(&g);
        assert!(!report.connected);
        assert!(!report.all_pass());
    }

    #[test]
    fn validate_flags_zero_capacity() {
        let mut g = build_small();
        g.links[0].capacity_bps = 0.0;
        let report = validate_graph(&g);
        assert_eq!(report.nonpositive_capacity_links, vec![0]);
        assert!(!report.all_pass());
    }

    #[test]
    fn small_preset_passes_validation() {
        assert!(validate_graph(&build_small()).all_pass());
    }

    /// Exhaustive admissible simple-path enumeration, independent of the
    /// iterative-deepening implementation.
    fn exhaustive_paths(g: &NetworkGraph, src: SwitchId, dst: SwitchId) -> Vec<Path> {
        fn rec(
            g: &NetworkGraph,
            adj: &BTreeMap<SwitchId, Vec<SwitchId>>,
            dst: SwitchId,
            stack: &mut Vec<SwitchId>,
            out: &mut Vec<Path>,
        ) {
            let cur = *stack.last().unwrap();
            for &n in &adj[&cur] {
                if stack.contains(&n) {
                    continue;
                }
                if n == dst {
                    let mut p = stack.clone();
                    p.push(n);
                    out.push(p);
                    continue;
                }
                if g.tier_of(n) == Some(Tier::Leaf) {
                    continue;
                }
                stack.push(n);
                rec(g, adj, dst, stack, out);
                stack.pop();
            }
        }
        let adj = g.adjacency();
        let mut out = Vec::new();
        rec(g, &adj, dst, &mut vec![src], &mut out);
        out
    }

    #[test]
    fn ksp_matches_exhaustive_on_wpp_pairs() {
        let g = build_wpp();
        // A leaf pair sharing one spine and a leaf pair sharing none.
        for (s, d) in [(SwitchId(7), SwitchId(8)), (SwitchId(7), SwitchId(9))] {
            let got = k_shortest_paths(&g, s, d, 4).unwrap();
            let mut all = exhaustive_paths(&g, s, d);
            rank_paths(&g, &mut all);
            all.truncate(4);
            assert_eq!(got, all);
        }
    }
}
