//! Evaluation back ends behind a common trait, looked up by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use aor_core::analytic::avg_aoi;
use aor_core::mdp::{solve, MdpConfig, StateSpace};
use aor_core::simulator::{derive_seed, run_sim, SimConfig, DEFAULT_BATCHES, DEFAULT_WARMUP};
use aor_core::{ChannelParams, GenProb, Protocol};

use crate::config::{Caps, Settings};
use crate::error::{CliError, CliResult};

/// One grid point. `index` feeds seed derivation.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub channel: ChannelParams,
    pub gen: GenProb,
    pub index: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct RunParams {
    pub seed: u64,
    pub slots: u64,
    pub caps: Caps,
    pub epsilon: f64,
}

impl From<&Settings> for RunParams {
    fn from(s: &Settings) -> Self {
        Self {
            seed: s.seed,
            slots: s.slots,
            caps: s.caps,
            epsilon: s.epsilon,
        }
    }
}

impl RunParams {
    pub fn mdp_config(&self, gen: GenProb) -> MdpConfig {
        let base = match self.caps {
            Caps::Auto => MdpConfig::for_generation(gen),
            Caps::Fixed(s, r, d) => MdpConfig::with_caps(s, r, d),
        };
        MdpConfig {
            epsilon: self.epsilon,
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub label: &'static str,
    pub aoi: f64,
    pub std_error: Option<f64>,
    pub ci_half: Option<f64>,
    pub seed: Option<u64>,
    pub slots: Option<u64>,
}

impl Estimate {
    fn exact(label: &'static str, aoi: f64) -> Self {
        Self {
            label,
            aoi,
            std_error: None,
            ci_half: None,
            seed: None,
            slots: None,
        }
    }
}

pub trait Engine: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether the engine reports the two protocols (as opposed to an
    /// optimal schedule).
    fn per_protocol(&self) -> bool {
        true
    }

    /// Cheap validation run before any work starts.
    fn check(&self, channel: ChannelParams, gen: GenProb, run: &RunParams) -> CliResult<()>;

    fn evaluate(&self, point: &Point, run: &RunParams) -> CliResult<Vec<Estimate>>;
}

#[derive(Debug, Default)]
pub struct Analytic;

impl Engine for Analytic {
    fn name(&self) -> &'static str {
        "analytic"
    }

    fn check(&self, channel: ChannelParams, _: GenProb, _: &RunParams) -> CliResult<()> {
        channel.check_analytic().map_err(CliError::from)
    }

    fn evaluate(&self, point: &Point, _: &RunParams) -> CliResult<Vec<Estimate>> {
        Protocol::ALL
            .iter()
            .map(|&proto| {
                let aoi = avg_aoi(proto, point.channel, point.gen)?;
                Ok(Estimate::exact(proto.name(), aoi))
            })
            .collect()
    }
}

#[derive(Debug, Default)]
pub struct Simulate;

impl Simulate {
    pub fn seed_for(base: u64, index: u64, proto: Protocol) -> u64 {
        derive_seed(base, 2 * index + proto as u64)
    }
}

impl Engine for Simulate {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn check(&self, _: ChannelParams, _: GenProb, run: &RunParams) -> CliResult<()> {
        if run.slots % u64::from(DEFAULT_BATCHES) != 0 {
            return Err(CliError::invalid(format!(
                "--slots {} must be a multiple of {DEFAULT_BATCHES}",
                run.slots
            )));
        }
        Ok(())
    }

    fn evaluate(&self, point: &Point, run: &RunParams) -> CliResult<Vec<Estimate>> {
        Protocol::ALL
            .iter()
            .map(|&proto| {
                let seed = Self::seed_for(run.seed, point.index, proto);
                let config = SimConfig::new(
                    point.channel,
                    point.gen,
                    proto,
                    run.slots + DEFAULT_WARMUP,
                    seed,
                );
                let r = run_sim(&config)?;
                Ok(Estimate {
                    label: proto.name(),
                    aoi: r.avg_aoi,
                    std_error: Some(r.std_error),
                    ci_half: Some(r.ci_half_width),
                    seed: Some(seed),
                    slots: Some(run.slots),
                })
            })
            .collect()
    }
}

#[derive(Debug, Default)]
pub struct Mdp;

impl Engine for Mdp {
    fn name(&self) -> &'static str {
        "mdp"
    }

    fn per_protocol(&self) -> bool {
        false
    }

    fn check(&self, _: ChannelParams, gen: GenProb, run: &RunParams) -> CliResult<()> {
        let config = run.mdp_config(gen);
        config.validate()?;
        StateSpace::from_config(&config)?;
        Ok(())
    }

    fn evaluate(&self, point: &Point, run: &RunParams) -> CliResult<Vec<Estimate>> {
        let sol = solve(point.channel, point.gen, &run.mdp_config(point.gen))?;
        Ok(vec![Estimate::exact("MDP", sol.table.gain)])
    }
}

/// Engines registered by name.
#[derive(Default, Clone)]
pub struct EngineRegistry {
    engines: BTreeMap<&'static str, Arc<dyn Engine>>,
}

impl EngineRegistry {
    pub fn builtin() -> Self {
        let mut reg = Self::default();
        reg.register(Arc::new(Analytic));
        reg.register(Arc::new(Simulate));
        reg.register(Arc::new(Mdp));
        reg
    }

    pub fn register(&mut self, engine: Arc<dyn Engine>) {
        self.engines.insert(engine.name(), engine);
    }

    pub fn get(&self, name: &str) -> CliResult<Arc<dyn Engine>> {
        self.engines.get(name).cloned().ok_or_else(|| {
            let known: Vec<&str> = self.engines.keys().copied().collect();
            CliError::invalid(format!(
                "unknown engine `{name}` (known: {})",
                known.join(", ")
            ))
        })
    }

    /// Engines in the order given.
    pub fn select(&self, names: &[String]) -> CliResult<Vec<Arc<dyn Engine>>> {
        names.iter().map(|n| self.get(n)).collect()
    }
}
