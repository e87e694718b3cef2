//! Resilience-curve metrics, per-run summaries, and cross-seed
//! aggregation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Compact per-tick summary kept in memory for metric computation.
#[derive(Debug, Clone, Copy)]
pub struct TickSummary {
    pub t: f64,
    pub trigger: bool,
    pub loss: f64,
    pub offered_bps: f64,
    pub delivered_bps: f64,
    /// Mean latency over monitored pairs, seconds.
    pub mean_latency_s: f64,
    pub max_utilization: f64,
}

impl TickSummary {
    /// Normalized throughput: delivered over offered, 1 when idle.
    pub fn norm_throughput(&self) -> f64 {
        if self.offered_bps > 0.0 {
            self.delivered_bps / self.offered_bps
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryClass {
    Full,
    Partial,
    None,
    NotDisrupted,
}

impl std::fmt::Display for RecoveryClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RecoveryClass::Full => "full",
            RecoveryClass::Partial => "partial",
            RecoveryClass::None => "none",
            RecoveryClass::NotDisrupted => "not-disrupted",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Resilience {
    /// Performance drop: pre-disruption mean minus the post-disruption
    /// minimum of normalized throughput.
    pub dy: f64,
    /// Recovery time t_R - t_D, seconds.
    pub dt: f64,
    pub y_min: f64,
    pub t_recovery: Option<f64>,
    pub class: RecoveryClass,
}

/// Resilience-curve metrics over a tick trace.
///
/// `t_d` marks the injected disruption. Recovery is the first tick after
/// `t_d` completing `streak` consecutive violation-free ticks; a trace
/// that never clears gets `dt` equal to the remainder and class `None`.
pub fn resilience_metrics(
    ticks: &[TickSummary],
    t_d: Option<f64>,
    streak: u32,
    full_threshold: f64,
) -> Resilience {
    let Some(t_d) = t_d else {
        return Resilience {
            dy: 0.0,
            dt: 0.0,
            y_min: 1.0,
            t_recovery: None,
            class: RecoveryClass::NotDisrupted,
        };
    };
    if ticks.is_empty() || ticks.last().unwrap().t < t_d {
        return Resilience {
            dy: 0.0,
            dt: 0.0,
            y_min: 1.0,
            t_recovery: None,
            class: RecoveryClass::NotDisrupted,
        };
    }

    let pre: Vec<f64> = ticks
        .iter()
        .filter(|s| s.t < t_d)
        .map(|s| s.norm_throughput())
        .collect();
    let pre_mean = if pre.is_empty() {
        1.0
    } else {
        pre.iter().sum::<f64>() / pre.len() as f64
    };

    let mut y_min = f64::INFINITY;
    let mut clean = 0u32;
    let mut t_recovery = None;
    for s in ticks.iter().filter(|s| s.t >= t_d) {
        y_min = y_min.min(s.norm_throughput());
        if t_recovery.is_none() {
            if s.trigger {
                clean = 0;
            } else {
                clean += 1;
                if clean >= streak {
                    t_recovery = Some(s.t);
                }
            }
        }
    }
    if !y_min.is_finite() {
        y_min = 1.0;
    }

    let last_t = ticks.last().unwrap().t;
    let (dt, class) = match t_recovery {
        Some(tr) => {
            let post: Vec<f64> = ticks
                .iter()
                .filter(|s| s.t > tr)
                .map(|s| s.norm_throughput())
                .collect();
            let post_mean = if post.is_empty() {
                y_min
            } else {
                post.iter().sum::<f64>() / post.len() as f64
            };
            let class = if post_mean >= full_threshold * pre_mean {
                RecoveryClass::Full
            } else {
                RecoveryClass::Partial
            };
            (tr - t_d, class)
        }
        None => (last_t - t_d, RecoveryClass::None),
    };

    Resilience {
        dy: (pre_mean - y_min).max(0.0),
        dt,
        y_min,
        t_recovery,
        class,
    }
}

/// One (policy, scenario, seed) run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub policy: String,
    pub tc: String,
    pub seed: u64,
    pub latency_ms_mean: f64,
    pub loss_pct: f64,
    pub throughput_mbps: f64,
    pub reaction_s: f64,
    pub recovery_s: f64,
    pub dy: f64,
    pub recovery_class: RecoveryClass,
    /// Fraction of post-recovery ticks meeting the latency intent.
    pub post_recovery_latency_ok: f64,
}

/// Aggregated row per (policy, scenario) across seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggRow {
    pub policy: String,
    pub tc: String,
    pub n_seeds: usize,
    pub latency_ms_mean: f64,
    /// Half-width of the 95% Student-t interval; `None` for a single seed.
    pub latency_ms_ci: Option<f64>,
    pub loss_pct: f64,
    pub throughput_mbps: f64,
    pub reaction_s: f64,
    pub recovery_s: f64,
    pub dy: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Half-width of the 95% confidence interval via Student-t over seeds.
pub fn ci95_half_width(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid dof")
        .inverse_cdf(0.975);
    Some(t * se)
}

/// Collapses runs into per-(policy, tc) rows. Input order does not matter;
/// output is sorted by (policy, tc).
pub fn aggregate(runs: &[RunMetrics]) -> Vec<AggRow> {
    let mut keys: Vec<(String, String)> = runs
        .iter()
        .map(|r| (r.policy.clone(), r.tc.clone()))
        .collect();
    keys.sort();
    keys.dedup();

    keys.into_iter()
        .map(|(policy, tc)| {
            let group: Vec<&RunMetrics> = runs
                .iter()
                .filter(|r| r.policy == policy && r.tc == tc)
                .collect();
            let field = |f: &dyn Fn(&RunMetrics) -> f64| -> Vec<f64> {
                group.iter().map(|r| f(r)).collect()
            };
            let lat = field(&|r| r.latency_ms_mean);
            AggRow {
                policy,
                tc,
                n_seeds: group.len(),
                latency_ms_mean: mean(&lat),
                latency_ms_ci: ci95_half_width(&lat),
                loss_pct: mean(&field(&|r| r.loss_pct)),
                throughput_mbps: mean(&field(&|r| r.throughput_mbps)),
                reaction_s: mean(&field(&|r| r.reaction_s)),
                recovery_s: mean(&field(&|r| r.recovery_s)),
                dy: mean(&field(&|r| r.dy)),
            }
        })
        .collect()
}

/// Renders the aggregate table with the frozen column set.
pub fn results_csv(rows: &[AggRow]) -> String {
    let mut s = String::from(
        "policy,tc,latency_ms_mean,latency_ms_ci,loss_pct,throughput_mbps,reaction_s,recovery_s,dy\n",
    );
    for r in rows {
        let ci = match r.latency_ms_ci {
            Some(v) => format!("{v:.6}"),
            None => "n/a".to_string(),
        };
        s.push_str(&format!(
            "{},{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.policy,
            r.tc,
            r.latency_ms_mean,
            ci,
            r.loss_pct,
            r.throughput_mbps,
            r.reaction_s,
            r.recovery_s,
            r.dy
        ));
    }
    s
}
