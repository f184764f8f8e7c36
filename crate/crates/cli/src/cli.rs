use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::CommandKind;

/// Age-of-information experiments for a source, relay, destination link.
#[derive(Debug, Parser)]
#[command(name = "aor", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Both protocols at one operating point, one row per engine.
    Single(Flags),
    /// Sweep the generation probability.
    SweepP(Flags),
    /// RP minus SP over a (p2, p3) grid.
    #[command(name = "sweep-p2p3-diff")]
    SweepP2p3Diff(Flags),
    /// Generate-at-will curves against p1, one set per (p2, p3) pair.
    #[command(name = "sweep-p1-gaw")]
    SweepP1Gaw(Flags),
    /// Recommend a protocol at one operating point (JSON).
    Compare(Flags),
    /// Solve for the optimal schedule and export the policy table.
    MdpSolve(Flags),
}

impl Command {
    pub fn split(&self) -> (CommandKind, &Flags) {
        match self {
            Command::Single(f) => (CommandKind::Single, f),
            Command::SweepP(f) => (CommandKind::SweepP, f),
            Command::SweepP2p3Diff(f) => (CommandKind::SweepP2p3Diff, f),
            Command::SweepP1Gaw(f) => (CommandKind::SweepP1Gaw, f),
            Command::Compare(f) => (CommandKind::Compare, f),
            Command::MdpSolve(f) => (CommandKind::MdpSolve, f),
        }
    }
}

/// Probability flags take a value, a comma list, or `start:step:stop`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Source to destination success probability.
    #[arg(long, allow_hyphen_values = true)]
    pub p1: Option<String>,
    /// Source to relay success probability.
    #[arg(long, allow_hyphen_values = true)]
    pub p2: Option<String>,
    /// Relay to destination success probability.
    #[arg(long, allow_hyphen_values = true)]
    pub p3: Option<String>,
    /// Per-slot generation probability.
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<String>,
    /// Measured slots per simulation (default 1e7, or 1e5 with --quick).
    #[arg(long)]
    pub slots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma list drawn from analytic, simulate, mdp.
    #[arg(long)]
    pub engines: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// MDP age caps as `s,r,d`, or `auto`.
    #[arg(long)]
    pub caps: Option<String>,
    /// MDP stopping span.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Short simulations for smoke runs.
    #[arg(long)]
    pub quick: bool,
    /// Flat `key = value` file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Flags {
    /// The flags that were given, as strings keyed like the config file.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("p1", self.p1.clone());
        put("p2", self.p2.clone());
        put("p3", self.p3.clone());
        put("p", self.p.clone());
        put("slots", self.slots.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("engines", self.engines.clone());
        put("out", self.out.as_ref().map(|o| o.display().to_string()));
        put("caps", self.caps.clone());
        put("epsilon", self.epsilon.map(|v| v.to_string()));
        put("quick", self.quick.then(|| "true".to_string()));
        m
    }
}
