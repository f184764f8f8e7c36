//! Optimal stationary scheduling on a truncated age space via average-cost
//! relative value iteration.
//!
//! Decision epochs are slot starts after the generation event. The kernel
//! folds the channel outcomes and the next generation event together, and
//! ages saturate at their caps. The per-slot cost is the destination age of
//! the successor state.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    advance, feasible_ops, AoiState, ChannelParams, GenProb, Operation, SlotOutcome,
};
use crate::rules::DecisionRule;
use crate::simulator::{run_sim, SimConfig, SimResult};

/// Largest state space the solver accepts.
pub const STATE_LIMIT: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MdpConfig {
    pub cap_s: u32,
    pub cap_r: u32,
    pub cap_d: u32,
    /// Stop once the span of `T h - h` drops below this.
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for MdpConfig {
    fn default() -> Self {
        Self {
            cap_s: 30,
            cap_r: 60,
            cap_d: 120,
            epsilon: 1e-6,
            max_iters: 100_000,
        }
    }
}

impl MdpConfig {
    pub fn with_caps(cap_s: u32, cap_r: u32, cap_d: u32) -> Self {
        Self {
            cap_s,
            cap_r,
            cap_d,
            ..Self::default()
        }
    }

    /// Default caps, widened when generations are rare so that the source
    /// age exceeds `cap_s` with probability at most 1e-4.
    pub fn for_generation(gen: GenProb) -> Self {
        let q = 1.0 - gen.value();
        let needed = if q > 0.0 {
            (1e-4f64.ln() / q.ln()).ceil() as u32
        } else {
            1
        };
        let base = Self::default();
        let cap_s = base.cap_s.max(needed);
        Self::with_caps(cap_s, base.cap_r.max(cap_s), base.cap_d.max(2 * cap_s))
    }

    pub fn validate(&self) -> Result<()> {
        if self.cap_s < 1 || self.cap_s > self.cap_r || self.cap_s > self.cap_d {
            return Err(Error::InvalidConfig(format!(
                "caps ({}, {}, {}) must satisfy 1 <= cap_s <= cap_r and cap_s <= cap_d",
                self.cap_s, self.cap_r, self.cap_d
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Dense indexing of the truncated states, ordered by `(s, r, d)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    cap_s: u32,
    cap_r: u32,
    cap_d: u32,
    offsets: Vec<usize>,
}

impl StateSpace {
    pub fn new(cap_s: u32, cap_r: u32, cap_d: u32) -> Result<Self> {
        MdpConfig::with_caps(cap_s, cap_r, cap_d).validate()?;
        let mut offsets = Vec::with_capacity(cap_s as usize + 2);
        let mut total = 0usize;
        offsets.push(0);
        for s in 0..=cap_s {
            total += (cap_r - s + 1) as usize * (cap_d - s + 1) as usize;
            if total > STATE_LIMIT {
                return Err(Error::StateSpaceTooLarge {
                    count: total,
                    limit: STATE_LIMIT,
                });
            }
            offsets.push(total);
        }
        Ok(Self {
            cap_s,
            cap_r,
            cap_d,
            offsets,
        })
    }

    pub fn from_config(config: &MdpConfig) -> Result<Self> {
        Self::new(config.cap_s, config.cap_r, config.cap_d)
    }

    pub fn caps(&self) -> (u32, u32, u32) {
        (self.cap_s, self.cap_r, self.cap_d)
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clamp(&self, state: AoiState) -> AoiState {
        state.saturate(self.cap_s, self.cap_r, self.cap_d)
    }

    /// Index of a state inside the caps.
    #[inline]
    pub fn index(&self, state: AoiState) -> Option<usize> {
        let AoiState {
            delta_s: s,
            delta_r: r,
            delta_d: d,
        } = state;
        if s > self.cap_s || r > self.cap_r || d > self.cap_d || s > r || s > d {
            return None;
        }
        let width = (self.cap_d - s + 1) as usize;
        Some(self.offsets[s as usize] + (r - s) as usize * width + (d - s) as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = AoiState> + '_ {
        (0..=self.cap_s).flat_map(move |s| {
            (s..=self.cap_r)
                .flat_map(move |r| (s..=self.cap_d).map(move |d| AoiState::new(s, r, d)))
        })
    }
}

/// All truncated states in index order.
pub fn enumerate_states(config: &MdpConfig) -> Result<Vec<AoiState>> {
    Ok(StateSpace::from_config(config)?.iter().collect())
}

/// Successor distribution of `(state, op)` with ages saturated at the caps.
/// Zero-probability outcomes are dropped; duplicates are not merged.
pub fn transition_kernel(
    state: AoiState,
    op: Operation,
    channel: ChannelParams,
    gen_prob: f64,
    config: &MdpConfig,
) -> Result<Vec<(AoiState, f64)>> {
    if !(0.0..=1.0).contains(&gen_prob) {
        return Err(Error::InvalidProbability {
            name: "p",
            value: gen_prob,
            range: "[0, 1]",
        });
    }
    if !feasible_ops(state).contains(op) {
        return Err(Error::InfeasibleOperation { op, state });
    }
    let ChannelParams { p1, p2, p3 } = channel;
    let mut links: Vec<(SlotOutcome, f64)> = Vec::with_capacity(4);
    match op {
        Operation::Source => {
            for (sd, psd) in [(true, p1), (false, 1.0 - p1)] {
                for (sr, psr) in [(true, p2), (false, 1.0 - p2)] {
                    let o = SlotOutcome {
                        sd_success: sd,
                        sr_success: sr,
                        ..SlotOutcome::default()
                    };
                    links.push((o, psd * psr));
                }
            }
        }
        Operation::Relay => {
            for (rd, prd) in [(true, p3), (false, 1.0 - p3)] {
                let o = SlotOutcome {
                    rd_success: rd,
                    ..SlotOutcome::default()
                };
                links.push((o, prd));
            }
        }
        Operation::Idle => links.push((SlotOutcome::default(), 1.0)),
    }
    let mut out = Vec::with_capacity(links.len() * 2);
    for (mut o, pl) in links {
        for (g, pg) in [(true, gen_prob), (false, 1.0 - gen_prob)] {
            let w = pl * pg;
            if w > 0.0 {
                o.generated = g;
                let next = advance(state, op, o).saturate(config.cap_s, config.cap_r, config.cap_d);
                out.push((next, w));
            }
        }
    }
    Ok(out)
}

/// Stationary table policy on a truncated state space.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    space: StateSpace,
    ops: Vec<Operation>,
    /// Long-run average cost; NaN for tables not produced by the solver.
    pub gain: f64,
    /// Final span of `T h - h`.
    pub span_residual: f64,
    pub iterations: usize,
}

impl PolicyTable {
    /// Table that reproduces `rule` on every truncated state.
    pub fn from_rule(rule: &dyn DecisionRule, cap_s: u32, cap_r: u32, cap_d: u32) -> Result<Self> {
        let space = StateSpace::new(cap_s, cap_r, cap_d)?;
        let ops = space.iter().map(|s| rule.decide(s)).collect();
        Ok(Self {
            space,
            ops,
            gain: f64::NAN,
            span_residual: f64::NAN,
            iterations: 0,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Entry for a state inside the caps.
    pub fn get(&self, state: AoiState) -> Option<Operation> {
        self.space.index(state).map(|i| self.ops[i])
    }

    pub fn entries(&self) -> impl Iterator<Item = (AoiState, Operation)> + '_ {
        self.space.iter().zip(self.ops.iter().copied())
    }

    /// `delta_s,delta_r,delta_d,op` rows in index order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "delta_s,delta_r,delta_d,op")?;
        for (s, op) in self.entries() {
            writeln!(
                out,
                "{},{},{},{}",
                s.delta_s,
                s.delta_r,
                s.delta_d,
                op.symbol()
            )?;
        }
        out.flush()?;
        Ok(())
    }

    /// Summary written next to the CSV export.
    pub fn sidecar(&self) -> serde_json::Value {
        let (cap_s, cap_r, cap_d) = self.space.caps();
        let finite = |x: f64| if x.is_finite() { Some(x) } else { None };
        serde_json::json!({
            "gain": finite(self.gain),
            "span_residual": finite(self.span_residual),
            "iterations": self.iterations,
            "caps": [cap_s, cap_r, cap_d],
            "states": self.space.len(),
        })
    }
}

impl DecisionRule for PolicyTable {
    fn name(&self) -> &str {
        "MDP"
    }

    /// Looks up the clamped state. If the entry cannot act on the true state
    /// (saturation hid the staleness of a sender), falls back to the first
    /// feasible of source, relay, idle.
    #[inline]
    fn decide(&self, state: AoiState) -> Operation {
        let clamped = self.space.clamp(state);
        let op = self
            .space
            .index(clamped)
            .map_or(Operation::Idle, |i| self.ops[i]);
        let feasible = feasible_ops(state);
        if feasible.contains(op) {
            op
        } else if feasible.contains(Operation::Source) {
            Operation::Source
        } else if feasible.contains(Operation::Relay) {
            Operation::Relay
        } else {
            Operation::Idle
        }
    }
}

/// Sparse per-action transition rows.
struct CompiledKernel {
    /// `state_actions[i]..state_actions[i + 1]` are the actions of state `i`.
    state_actions: Vec<u32>,
    actions: Vec<ActionRow>,
    targets: Vec<u32>,
    probs: Vec<f64>,
}

struct ActionRow {
    op: Operation,
    cost: f64,
    start: u32,
    end: u32,
}

impl CompiledKernel {
    fn build(
        space: &StateSpace,
        channel: ChannelParams,
        p: f64,
        config: &MdpConfig,
    ) -> Result<Self> {
        let n = space.len();
        let mut k = CompiledKernel {
            state_actions: Vec::with_capacity(n + 1),
            actions: Vec::with_capacity(n * 2),
            targets: Vec::with_capacity(n * 8),
            probs: Vec::with_capacity(n * 8),
        };
        k.state_actions.push(0);
        for state in space.iter() {
            for op in feasible_ops(state).iter() {
                let start = k.targets.len() as u32;
                let mut cost = 0.0;
                for (next, w) in transition_kernel(state, op, channel, p, config)? {
                    let j = space.index(next).expect("kernel stays inside the caps");
                    k.targets.push(j as u32);
                    k.probs.push(w);
                    cost += w * f64::from(next.delta_d);
                }
                k.actions.push(ActionRow {
                    op,
                    cost,
                    start,
                    end: k.targets.len() as u32,
                });
            }
            k.state_actions.push(k.actions.len() as u32);
        }
        Ok(k)
    }

    #[inline]
    fn q_value(&self, a: &ActionRow, h: &[f64]) -> f64 {
        let (lo, hi) = (a.start as usize, a.end as usize);
        a.cost
            + self.targets[lo..hi]
                .iter()
                .zip(&self.probs[lo..hi])
                .map(|(&j, &w)| w * h[j as usize])
                .sum::<f64>()
    }

    fn actions_of(&self, i: usize) -> &[ActionRow] {
        &self.actions[self.state_actions[i] as usize..self.state_actions[i + 1] as usize]
    }
}

/// Solver output with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct RviSolution {
    pub table: PolicyTable,
    /// Span of `T h - h` after each iteration.
    pub span_history: Vec<f64>,
    /// Relative values, zero at the all-zero state.
    pub bias: Vec<f64>,
}

/// Relative value iteration with full diagnostics.
pub fn solve(channel: ChannelParams, gen: GenProb, config: &MdpConfig) -> Result<RviSolution> {
    config.validate()?;
    ChannelParams::new(channel.p1, channel.p2, channel.p3)?;
    let space = StateSpace::from_config(config)?;
    let kernel = CompiledKernel::build(&space, channel, gen.value(), config)?;
    let n = space.len();
    let reference = space.index(AoiState::ZERO).expect("origin is a state");

    let mut h = vec![0.0; n];
    let mut th = vec![0.0; n];
    let mut span_history = Vec::new();
    let mut gain = f64::NAN;
    let mut converged = false;

    for _ in 0..config.max_iters {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let best = kernel
                .actions_of(i)
                .iter()
                .map(|a| kernel.q_value(a, &h))
                .fold(f64::INFINITY, f64::min);
            th[i] = best;
            let diff = best - h[i];
            lo = lo.min(diff);
            hi = hi.max(diff);
        }
        let span = hi - lo;
        span_history.push(span);
        let offset = th[reference];
        for (hv, &tv) in h.iter_mut().zip(&th) {
            *hv = tv - offset;
        }
        if span < config.epsilon {
            gain = 0.5 * (lo + hi);
            converged = true;
            break;
        }
    }
    let iterations = span_history.len();
    let span_residual = span_history.last().copied().unwrap_or(f64::NAN);
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            span: span_residual,
        });
    }

    let ops = (0..n)
        .map(|i| {
            let rows = kernel.actions_of(i);
            let qs: Vec<f64> = rows.iter().map(|a| kernel.q_value(a, &h)).collect();
            let best = qs.iter().copied().fold(f64::INFINITY, f64::min);
            let tol = 1e-9 * (1.0 + best.abs());
            // Rows are in tie-break order, so the first near-minimal wins.
            rows.iter()
                .zip(&qs)
                .find(|(_, &q)| q <= best + tol)
                .map(|(a, _)| a.op)
                .unwrap_or(Operation::Idle)
        })
        .collect();

    Ok(RviSolution {
        table: PolicyTable {
            space,
            ops,
            gain,
            span_residual,
            iterations,
        },
        span_history,
        bias: h,
    })
}

/// Optimal table policy and its gain.
pub fn relative_value_iteration(
    channel: ChannelParams,
    gen: GenProb,
    config: &MdpConfig,
) -> Result<PolicyTable> {
    solve(channel, gen, config).map(|s| s.table)
}

/// Simulates a table policy with the default warmup and batch count.
pub fn evaluate_policy(
    policy: Arc<PolicyTable>,
    channel: ChannelParams,
    gen: GenProb,
    slots: u64,
    seed: u64,
) -> Result<SimResult> {
    run_sim(&SimConfig::new(
        channel,
        gen,
        crate::simulator::Policy::Table(policy),
        slots,
        seed,
    ))
}
