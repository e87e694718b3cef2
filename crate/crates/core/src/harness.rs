//! Episode orchestration and the evaluation harness: runs (policy,
//! scenario, seed) combinations, derives per-run metrics, aggregates
//! across seeds, and produces the comparison summary.

use rayon::prelude::*;

use crate::baseline::BaselineDriver;
use crate::config::SimConfig;
use crate::dqn::{self, AgentDriver, DqnConfig, TrainOutput};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, resilience_metrics, results_csv, AggRow, Resilience, RunMetrics, TickSummary,
};
use crate::nn::Mlp;
use crate::scenario::{load_scenario, ScenarioConfig, STRESS_IDS};
use crate::sim::{Simulator, TickOutput};
use crate::topology::NetworkGraph;
use crate::util::derive_seed;

/// Fraction of the pre-disruption throughput that counts as full recovery.
pub const FULL_RECOVERY_THRESHOLD: f64 = 0.98;

#[derive(Clone)]
pub enum PolicyKind {
    Baseline,
    /// Greedy agent over the given Q-network (trained or untrained).
    Agent(Mlp<f64>),
}

#[derive(Clone)]
pub struct Policy {
    pub name: String,
    pub kind: PolicyKind,
}

impl Policy {
    pub fn baseline() -> Self {
        Self {
            name: "baseline".into(),
            kind: PolicyKind::Baseline,
        }
    }

    pub fn agent(net: Mlp<f64>) -> Self {
        Self {
            name: "ttdqsha".into(),
            kind: PolicyKind::Agent(net),
        }
    }

    pub fn untrained(net: Mlp<f64>) -> Self {
        Self {
            name: "untrained".into(),
            kind: PolicyKind::Agent(net),
        }
    }
}

/// Everything a single episode produces besides its trace.
pub struct RunArtifacts {
    pub metrics: RunMetrics,
    pub resilience: Resilience,
    pub actuations: Vec<crate::actuation::ActuationEvent>,
    pub first_violation_t: Option<f64>,
    pub decisions: u32,
    pub ticks: Vec<TickSummary>,
}

/// Per-tick observer hook, e.g. for JSONL tracing.
pub type TickHook<'a> = &'a mut dyn FnMut(&TickOutput, &Simulator) -> Result<()>;

/// Runs one scenario episode under a policy. Fully deterministic per
/// (scenario, seed, policy). The optional hook sees every tick and the
/// simulator.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    scenario: &ScenarioConfig,
    topo: &NetworkGraph,
    policy: &Policy,
    seed: u64,
    sim_cfg: &SimConfig,
    dqn_cfg: &DqnConfig,
    duration_s: f64,
    mut on_tick: Option<TickHook>,
) -> Result<RunArtifacts> {
    let mut sim = scenario.build_sim(topo, sim_cfg, seed, duration_s)?;
    let t_d = scenario.disruption_at_frac * duration_s;

    let mut baseline_driver = BaselineDriver::new(sim_cfg);
    let mut agent_driver = AgentDriver::new();
    let mut agent_rng =
        rand::SeedableRng::seed_from_u64(derive_seed(seed, 0xE7A1_u64 ^ dqn_cfg.seed));

    let mut ticks = Vec::with_capacity(sim.duration_ticks() as usize);
    while !sim.finished() {
        let out = sim.tick()?;
        match &policy.kind {
            PolicyKind::Baseline => {
                baseline_driver.on_tick(&mut sim, &out.report, out.t, out.tick);
            }
            PolicyKind::Agent(net) => {
                // Greedy at evaluation time.
                agent_driver.on_tick(
                    &mut sim,
                    &out.state,
                    &out.report,
                    net,
                    dqn_cfg,
                    sim_cfg,
                    0.0,
                    &mut agent_rng,
                )?;
            }
        }
        let mean_latency_s = if out.state.tm.path_latency.is_empty() {
            0.0
        } else {
            out.state.tm.path_latency.iter().sum::<f64>()
                / out.state.tm.path_latency.len() as f64
        };
        let max_utilization = out
            .state
            .tm
            .link_utilization
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        ticks.push(TickSummary {
            t: out.t,
            trigger: out.report.trigger,
            loss: out.loss,
            offered_bps: out.offered_bps,
            delivered_bps: out.delivered_bps,
            mean_latency_s,
            max_utilization,
        });
        if let Some(hook) = on_tick.as_deref_mut() {
            hook(&out, &sim)?;
        }
    }

    let resilience = resilience_metrics(
        &ticks,
        Some(t_d),
        sim_cfg.recovery_streak_ticks,
        FULL_RECOVERY_THRESHOLD,
    );

    let first_violation_t = sim.first_violation_t();
    let reaction_s = match (&policy.kind, first_violation_t) {
        (_, None) => 0.0,
        (PolicyKind::Baseline, Some(v)) => baseline_driver
            .first_reaction_t
            .map(|r| r - v)
            .unwrap_or(0.0),
        (PolicyKind::Agent(_), Some(v)) => sim
            .actuation_log()
            .iter()
            .filter_map(|e| e.t_applied)
            .find(|&t| t >= v)
            .map(|t| t - v)
            .unwrap_or(0.0),
    };

    let latency_ms_mean =
        ticks.iter().map(|s| s.mean_latency_s).sum::<f64>() / ticks.len().max(1) as f64 * 1e3;
    let loss_pct = ticks.iter().map(|s| s.loss).sum::<f64>() / ticks.len().max(1) as f64 * 100.0;
    let throughput_mbps =
        ticks.iter().map(|s| s.delivered_bps).sum::<f64>() / ticks.len().max(1) as f64 / 1e6;

    let post_recovery_latency_ok = match resilience.t_recovery {
        Some(tr) => {
            let post: Vec<&TickSummary> = ticks.iter().filter(|s| s.t > tr).collect();
            if post.is_empty() {
                1.0
            } else {
                post.iter()
                    .filter(|s| s.mean_latency_s <= sim_cfg.intents.l_thr_s)
                    .count() as f64
                    / post.len() as f64
            }
        }
        None => 0.0,
    };

    let metrics = RunMetrics {
        policy: policy.name.clone(),
        tc: scenario.id.clone(),
        seed,
        latency_ms_mean,
        loss_pct,
        throughput_mbps,
        reaction_s,
        recovery_s: resilience.dt,
        dy: resilience.dy,
        recovery_class: resilience.class,
        post_recovery_latency_ok,
    };

    Ok(RunArtifacts {
        metrics,
        resilience,
        actuations: sim.actuation_log().to_vec(),
        first_violation_t,
        decisions: agent_driver.decisions,
        ticks,
    })
}

pub struct EvalReport {
    pub runs: Vec<RunMetrics>,
    pub rows: Vec<AggRow>,
    /// Mean recovery-time improvement of `ttdqsha` over `baseline` across
    /// the evaluated stress cases, percent.
    pub improvement_pct: Option<f64>,
    pub csv: String,
}

/// Fans (policy, scenario, seed) runs out in parallel and aggregates.
/// Deterministic: results are keyed and ordered independently of thread
/// scheduling.
pub fn evaluate(
    scenario_ids: &[String],
    seeds: &[u64],
    policies: &[Policy],
    topo: &NetworkGraph,
    sim_cfg: &SimConfig,
    dqn_cfg: &DqnConfig,
    duration_s: Option<f64>,
) -> Result<EvalReport> {
    if policies.is_empty() || scenario_ids.is_empty() || seeds.is_empty() {
        return Err(Error::Invalid(
            "evaluate needs at least one policy, scenario, and seed".into(),
        ));
    }
    let scenarios: Vec<ScenarioConfig> = scenario_ids
        .iter()
        .map(|id| load_scenario(id))
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for p in policies {
        for sc in &scenarios {
            for &seed in seeds {
                jobs.push((p.clone(), sc.clone(), seed));
            }
        }
    }

    let runs: Vec<RunMetrics> = jobs
        .into_par_iter()
        .map(|(policy, scenario, seed)| {
            let dur = duration_s.unwrap_or(scenario.eval_duration_s);
            run_episode(
                &scenario, topo, &policy, seed, sim_cfg, dqn_cfg, dur, None,
            )
            .map(|a| a.metrics)
        })
        .collect::<Result<_>>()?;

    let rows = aggregate(&runs);
    let improvement_pct = recovery_improvement(&runs);
    let csv = results_csv(&rows);
    Ok(EvalReport {
        runs,
        rows,
        improvement_pct,
        csv,
    })
}

/// (baseline mean recovery - agent mean recovery) / baseline mean, in
/// percent, over the stress cases present in the run set.
pub fn recovery_improvement(runs: &[RunMetrics]) -> Option<f64> {
    let stress = |r: &&RunMetrics| STRESS_IDS.contains(&r.tc.as_str());
    let base: Vec<f64> = runs
        .iter()
        .filter(|r| r.policy == "baseline")
        .filter(stress)
        .map(|r| r.recovery_s)
        .collect();
    let agent: Vec<f64> = runs
        .iter()
        .filter(|r| r.policy == "ttdqsha")
        .filter(stress)
        .map(|r| r.recovery_s)
        .collect();
    if base.is_empty() || agent.is_empty() {
        return None;
    }
    let bm = base.iter().sum::<f64>() / base.len() as f64;
    let am = agent.iter().sum::<f64>() / agent.len() as f64;
    if bm <= 0.0 {
        return None;
    }
    Some((bm - am) / bm * 100.0)
}

/// Trains the agent over a rotating scenario mix. Episode k runs scenario
/// `mix[k % len]` with a deterministically derived seed.
pub fn train_agent(
    scenario_ids: &[String],
    topo: &NetworkGraph,
    sim_cfg: &SimConfig,
    dqn_cfg: &DqnConfig,
    episode_duration_s: Option<f64>,
) -> Result<TrainOutput> {
    if scenario_ids.is_empty() {
        return Err(Error::Invalid("training needs at least one scenario".into()));
    }
    let scenarios: Vec<ScenarioConfig> = scenario_ids
        .iter()
        .map(|id| load_scenario(id))
        .collect::<Result<_>>()?;
    let seed = dqn_cfg.seed;
    let make_sim = |episode: usize| -> Result<Simulator> {
        let sc = &scenarios[episode % scenarios.len()];
        let dur = episode_duration_s.unwrap_or(sc.train_duration_s);
        sc.build_sim(topo, sim_cfg, derive_seed(seed, 1000 + episode as u64), dur)
    };
    dqn::train(make_sim, dqn_cfg, sim_cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::RecoveryClass;
    use crate::topology::build_small;

    fn quick_cfgs() -> (SimConfig, DqnConfig) {
        (SimConfig::default(), DqnConfig::default())
    }

    #[test]
    fn identical_runs_produce_identical_metrics() {
        let (sim_cfg, dqn_cfg) = quick_cfgs();
        let topo = build_small();
        let sc = load_scenario("TC5").unwrap();
        let run = || {
            run_episode(
                &sc,
                &topo,
                &Policy::baseline(),
                23,
                &sim_cfg,
                &dqn_cfg,
                20.0,
                None,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(
            serde_json::to_string(&a.metrics).unwrap(),
            serde_json::to_string(&b.metrics).unwrap()
        );
    }

    #[test]
    fn healthy_scenario_not_disrupted_metrics() {
        let (sim_cfg, dqn_cfg) = quick_cfgs();
        let topo = build_small();
        let sc = load_scenario("TC1").unwrap();
        let a = run_episode(
            &sc,
            &topo,
            &Policy::baseline(),
            23,
            &sim_cfg,
            &dqn_cfg,
            10.0,
            None,
        )
        .unwrap();
        assert_eq!(a.metrics.reaction_s, 0.0);
        assert!(a.metrics.loss_pct < 0.2);
        assert!(matches!(
            a.metrics.recovery_class,
            RecoveryClass::Full | RecoveryClass::NotDisrupted
        ));
    }

    #[test]
    fn evaluate_produces_rows_and_requires_inputs() {
        let (sim_cfg, dqn_cfg) = quick_cfgs();
        let topo = build_small();
        let report = evaluate(
            &["TC1".to_string()],
            &[23, 37],
            &[Policy::baseline()],
            &topo,
            &sim_cfg,
            &dqn_cfg,
            Some(5.0),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.runs.len(), 2);
        assert!(report.improvement_pct.is_none());
        assert!(evaluate(&[], &[1], &[Policy::baseline()], &topo, &sim_cfg, &dqn_cfg, None).is_err());
    }
}
