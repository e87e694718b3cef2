//! `autoheal`: train, evaluate, and trace the self-healing agent against
//! the Dijkstra+ECMP baseline on the simulated switch fabric.
//!
//! The JSON file named by `AUTOHEAL_CONFIG` overrides engine defaults
//! (thresholds, tick length, throttle factor, ...).

use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use autoheal_core::config::{ConfigOverride, SimConfig};
use autoheal_core::dqn::{curves_to_csv, load_weights, save_weights, DqnConfig};
use autoheal_core::harness::{evaluate, run_episode, train_agent, Policy};
use autoheal_core::knowledge::IntentsFile;
use autoheal_core::nn::Mlp;
use autoheal_core::scenario::{load_scenario, parse_scenario_list};
use autoheal_core::topology::{build_small, build_wpp, validate_graph, NetworkGraph};
use autoheal_core::trace::{JsonlWriter, TickRecord};
use autoheal_core::traffic::build_flow_roster;
use autoheal_core::util::derive_seed;

#[derive(Parser)]
#[command(name = "autoheal", version, about)]
struct Cli {
    /// QoS intents file: {"u_thr", "l_thr_ms", "temp_min_c", "temp_max_c"}.
    #[arg(long, global = true)]
    intents: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TopologyArg {
    /// Topology preset: wpp | small | custom:<file.json>
    #[arg(long, default_value = "wpp")]
    topology: String,
}

impl TopologyArg {
    fn load(&self) -> Result<NetworkGraph> {
        match self.topology.as_str() {
            "wpp" => Ok(build_wpp()),
            "small" => Ok(build_small()),
            other => {
                let Some(path) = other.strip_prefix("custom:") else {
                    bail!("unknown topology {other:?}; use wpp, small, or custom:<file>");
                };
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading topology file {path}"))?;
                let g = NetworkGraph::from_json(&text)?;
                let report = validate_graph(&g);
                if !report.all_pass() {
                    bail!(
                        "custom topology fails validation: {}",
                        serde_json::to_string(&report)?
                    );
                }
                Ok(g)
            }
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the self-healing agent and write a weights file.
    Train {
        /// Scenario mix, e.g. "TC5-TC9" or "TC1,TC5".
        #[arg(long, default_value = "TC5-TC9")]
        scenario: String,
        #[arg(long, default_value_t = 1500)]
        episodes: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output weights file.
        #[arg(long)]
        out: PathBuf,
        /// Optional training-curves CSV (episode, reward, epsilon, loss).
        #[arg(long)]
        curves: Option<PathBuf>,
        /// Sync the target network per N episodes instead of per 300
        /// gradient steps.
        #[arg(long)]
        sync_per_episodes: Option<u32>,
        /// Episode duration in simulated seconds.
        #[arg(long)]
        episode_duration_s: Option<f64>,
        #[command(flatten)]
        topology: TopologyArg,
    },
    /// Evaluate policies over scenarios and seeds; writes the results CSV.
    Evaluate {
        /// Trained weights for the agent policy.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Scenario set, e.g. "TC1..TC9".
        #[arg(long, default_value = "TC1..TC9")]
        scenarios: String,
        /// Comma-separated seed list.
        #[arg(long, default_value = "23,37,49,71,42")]
        seeds: String,
        /// Policies to run: comma list of baseline, ttdqsha.
        #[arg(long, default_value = "baseline,ttdqsha")]
        policies: String,
        #[arg(long)]
        out: PathBuf,
        /// Run duration in simulated seconds (default: scenario preset).
        #[arg(long)]
        duration_s: Option<f64>,
        #[command(flatten)]
        topology: TopologyArg,
    },
    /// Run one scenario and stream the tick trace as JSONL.
    RunScenario {
        #[arg(long)]
        id: String,
        /// Controller: baseline | ttdqsha
        #[arg(long, default_value = "baseline")]
        agent: String,
        /// Weights for ttdqsha; omitted means an untrained network.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Tick-trace JSONL path; the actuation log goes to
        /// `<trace>.actions.jsonl`.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        duration_s: Option<f64>,
        #[command(flatten)]
        topology: TopologyArg,
    },
    /// Check a topology against the structural invariants.
    ValidateTopology {
        #[command(flatten)]
        topology: TopologyArg,
    },
}

fn sim_config(intents: Option<&PathBuf>) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    if let Ok(path) = std::env::var("AUTOHEAL_CONFIG") {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading AUTOHEAL_CONFIG file {path}"))?;
        let ov = ConfigOverride::from_json(&text)?;
        ov.apply(&mut cfg);
    }
    if let Some(path) = intents {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading intents file {}", path.display()))?;
        let file: IntentsFile = serde_json::from_str(&text)?;
        cfg.intents = file.into();
        cfg.intents.validate()?;
    }
    Ok(cfg)
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|x| x.trim().parse::<u64>().context("seed list"))
        .collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let sim_cfg = sim_config(cli.intents.as_ref())?;

    match cli.command {
        Command::Train {
            scenario,
            episodes,
            seed,
            out,
            curves,
            sync_per_episodes,
            episode_duration_s,
            topology,
        } => {
            let topo = topology.load()?;
            let ids = parse_scenario_list(&scenario)?;
            let dqn_cfg = DqnConfig {
                episodes,
                seed,
                sync_per_episodes,
                ..DqnConfig::default()
            };
            dqn_cfg.validate()?;
            let t0 = std::time::Instant::now();
            let result = train_agent(&ids, &topo, &sim_cfg, &dqn_cfg, episode_duration_s)?;
            save_weights(&out, &result.net, seed, dqn_cfg.config_hash())?;
            if let Some(path) = curves {
                fs::write(&path, curves_to_csv(&result.curves))?;
            }
            println!(
                "trained {episodes} episodes over {ids:?} in {:.1}s ({} gradient steps, {} transitions); weights -> {}",
                t0.elapsed().as_secs_f64(),
                result.gradient_steps,
                result.transitions_stored,
                out.display()
            );
        }

        Command::Evaluate {
            weights,
            scenarios,
            seeds,
            policies,
            out,
            duration_s,
            topology,
        } => {
            let topo = topology.load()?;
            let ids = parse_scenario_list(&scenarios)?;
            let seeds = parse_seeds(&seeds)?;
            let mut pols = Vec::new();
            for name in policies.split(',').map(str::trim) {
                match name {
                    "baseline" => pols.push(Policy::baseline()),
                    "ttdqsha" => {
                        let Some(path) = &weights else {
                            bail!("policy ttdqsha needs --weights with trained weights");
                        };
                        let (net, _meta) = load_weights(path)?;
                        pols.push(Policy::agent(net));
                    }
                    other => bail!("unknown policy {other:?}"),
                }
            }
            let dqn_cfg = DqnConfig::default();
            let report = evaluate(&ids, &seeds, &pols, &topo, &sim_cfg, &dqn_cfg, duration_s)?;
            fs::write(&out, &report.csv)?;
            println!("{}", report.csv.trim_end());
            if let Some(p) = report.improvement_pct {
                println!("# recovery-time improvement over stress cases: {p:.2}%");
            }
            println!("# results -> {}", out.display());
        }

        Command::RunScenario {
            id,
            agent,
            weights,
            trace,
            seed,
            duration_s,
            topology,
        } => {
            let topo = topology.load()?;
            let sc = load_scenario(&id)?;
            let dqn_cfg = DqnConfig::default();
            let policy = match agent.as_str() {
                "baseline" => Policy::baseline(),
                "ttdqsha" => match &weights {
                    Some(path) => Policy::agent(load_weights(path)?.0),
                    None => {
                        // Untrained network sized for this topology/config.
                        let probe = sc.build_sim(&topo, &sim_cfg, seed, 1.0)?;
                        let mut sizes = vec![probe.eta()];
                        sizes.extend_from_slice(&dqn_cfg.hidden);
                        sizes.push(autoheal_core::dqn::n_actions(sim_cfg.k_paths));
                        let mut rng: rand_chacha::ChaCha8Rng =
                            rand::SeedableRng::seed_from_u64(derive_seed(seed, 0x11));
                        Policy::untrained(Mlp::new(&sizes, &mut rng))
                    }
                },
                other => bail!("unknown agent {other:?}; use baseline or ttdqsha"),
            };
            let duration = duration_s.unwrap_or(sc.eval_duration_s);

            let mut tick_writer = match &trace {
                Some(path) => Some(JsonlWriter::new(BufWriter::new(
                    fs::File::create(path).context("creating trace file")?,
                ))),
                None => None,
            };
            let mut hook = |out: &autoheal_core::sim::TickOutput,
                            sim: &autoheal_core::sim::Simulator|
             -> autoheal_core::error::Result<()> {
                if let Some(w) = &mut tick_writer {
                    w.write(&TickRecord::from_tick(out, sim))?;
                }
                Ok(())
            };
            let artifacts = run_episode(
                &sc,
                &topo,
                &policy,
                seed,
                &sim_cfg,
                &dqn_cfg,
                duration,
                trace.is_some().then_some(&mut hook),
            )?;
            if let Some(w) = &mut tick_writer {
                w.flush()?;
            }
            if let Some(path) = &trace {
                let actions_path = path.with_extension("actions.jsonl");
                let mut w = JsonlWriter::new(BufWriter::new(fs::File::create(&actions_path)?));
                for e in &artifacts.actuations {
                    w.write(e)?;
                }
                w.flush()?;
                let flows_path = path.with_extension("flows.json");
                let mut graph = topo.clone();
                for l in &mut graph.links {
                    l.capacity_bps = sc.capacity_bps;
                }
                let roster = build_flow_roster(&graph, sc.rate_scale);
                fs::write(&flows_path, serde_json::to_string_pretty(&roster.flows)?)?;
                println!(
                    "# trace -> {}, actions -> {}, flows -> {}",
                    path.display(),
                    actions_path.display(),
                    flows_path.display()
                );
            }
            println!("{}", serde_json::to_string_pretty(&artifacts.metrics)?);
        }

        Command::ValidateTopology { topology } => {
            let topo = topology.load()?;
            let report = validate_graph(&topo);
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.all_pass() {
                std::process::exit(1);
            }
            println!(
                "# ok: {} switches, {} links, {} hosts",
                topo.n_switches(),
                topo.n_links(),
                topo.hosts.len()
            );
        }
    }
    Ok(())
}
