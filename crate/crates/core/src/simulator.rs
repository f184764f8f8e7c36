//! Monte Carlo engine.
//!
//! The run starts from the all-zero state. Slot `t = 1, 2, ...` reads the
//! current state, picks an operation, draws the channel outcomes and the next
//! generation event, and moves to the successor state. The age recorded for
//! slot `t` is the destination age of that successor, so a perfect direct
//! link with a fresh update every slot reports exactly 1.

use std::io::Write;
use std::sync::Arc;

use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::mdp::PolicyTable;
use crate::model::{advance, AoiState, ChannelParams, GenProb, Operation, SlotOutcome};
use crate::rules::{DecisionRule, Protocol, RelayPrioritized, SourcePrioritized};

pub const DEFAULT_WARMUP: u64 = 10_000;
pub const DEFAULT_BATCHES: u32 = 20;

/// Scheduling policy driven by the simulator.
#[derive(Debug, Clone)]
pub enum Policy {
    Sp,
    Rp,
    Table(Arc<PolicyTable>),
    /// Any other rule, e.g. one looked up in a [`crate::RuleRegistry`].
    Rule(Arc<dyn DecisionRule>),
}

impl Policy {
    pub fn name(&self) -> &str {
        match self {
            Policy::Sp => "SP",
            Policy::Rp => "RP",
            Policy::Table(t) => t.name(),
            Policy::Rule(r) => r.name(),
        }
    }

    fn protocol(&self) -> Option<Protocol> {
        match self {
            Policy::Sp => Some(Protocol::SourcePrioritized),
            Policy::Rp => Some(Protocol::RelayPrioritized),
            _ => None,
        }
    }
}

impl From<Protocol> for Policy {
    fn from(p: Protocol) -> Self {
        match p {
            Protocol::SourcePrioritized => Policy::Sp,
            Protocol::RelayPrioritized => Policy::Rp,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub channel: ChannelParams,
    pub gen: GenProb,
    pub policy: Policy,
    /// Total slots, warmup included.
    pub num_slots: u64,
    pub warmup_slots: u64,
    pub seed: u64,
    pub batches: u32,
}

impl SimConfig {
    /// Config with the default warmup and batch count.
    pub fn new(
        channel: ChannelParams,
        gen: GenProb,
        policy: impl Into<Policy>,
        num_slots: u64,
        seed: u64,
    ) -> Self {
        Self {
            channel,
            gen,
            policy: policy.into(),
            num_slots,
            warmup_slots: DEFAULT_WARMUP,
            seed,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn with_warmup(mut self, warmup_slots: u64) -> Self {
        self.warmup_slots = warmup_slots;
        self
    }

    pub fn with_batches(mut self, batches: u32) -> Self {
        self.batches = batches;
        self
    }

    pub fn measured_slots(&self) -> u64 {
        self.num_slots.saturating_sub(self.warmup_slots)
    }

    pub fn validate(&self) -> Result<()> {
        ChannelParams::new(self.channel.p1, self.channel.p2, self.channel.p3)?;
        GenProb::new(self.gen.value())?;
        if self.num_slots == 0 {
            return Err(Error::InvalidConfig("num_slots must be at least 1".into()));
        }
        if self.warmup_slots >= self.num_slots {
            return Err(Error::InvalidConfig(format!(
                "warmup ({}) leaves no measured slots out of {}",
                self.warmup_slots, self.num_slots
            )));
        }
        if self.batches == 0 || self.measured_slots() % u64::from(self.batches) != 0 {
            return Err(Error::InvalidConfig(format!(
                "batches ({}) must divide the {} measured slots",
                self.batches,
                self.measured_slots()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct OpCounts {
    pub source: u64,
    pub relay: u64,
    pub idle: u64,
}

impl OpCounts {
    fn add(&mut self, op: Operation) {
        match op {
            Operation::Source => self.source += 1,
            Operation::Relay => self.relay += 1,
            Operation::Idle => self.idle += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.source + self.relay + self.idle
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub avg_aoi: f64,
    /// 95% half-width from batch means; NaN with a single batch.
    pub ci_half_width: f64,
    pub std_error: f64,
    pub op_counts: OpCounts,
    pub deliveries_direct: u64,
    pub deliveries_relay: u64,
    /// Measured (post-warmup) slots.
    pub slots_simulated: u64,
}

/// Splits one base seed into independent per-run seeds.
pub fn derive_seed(base_seed: u64, run_index: u64) -> u64 {
    splitmix64(base_seed.wrapping_add(splitmix64(run_index)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean, standard error and 95% half-width of equally sized batch means.
pub(crate) fn batch_summary(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(1.96);
    (mean, se, t * se)
}

/// Per-slot hook of the simulation loop.
trait SlotObserver {
    fn observe(
        &mut self,
        slot: u64,
        prev: AoiState,
        op: Operation,
        outcome: SlotOutcome,
        next: AoiState,
    ) -> Result<()>;
}

struct Links {
    gen: Bernoulli,
    sd: Bernoulli,
    sr: Bernoulli,
    rd: Bernoulli,
}

impl Links {
    fn new(channel: ChannelParams, gen: GenProb) -> Result<Self> {
        let b = |p: f64| {
            Bernoulli::new(p).map_err(|e| Error::InvalidConfig(format!("probability {p}: {e}")))
        };
        Ok(Self {
            gen: b(gen.value())?,
            sd: b(channel.p1)?,
            sr: b(channel.p2)?,
            rd: b(channel.p3)?,
        })
    }

    #[inline]
    fn draw(&self, op: Operation, rng: &mut ChaCha8Rng) -> SlotOutcome {
        let mut o = SlotOutcome::default();
        match op {
            Operation::Source => {
                o.sd_success = self.sd.sample(rng);
                o.sr_success = self.sr.sample(rng);
            }
            Operation::Relay => o.rd_success = self.rd.sample(rng),
            Operation::Idle => {}
        }
        o.generated = self.gen.sample(rng);
        o
    }
}

fn drive<R: DecisionRule + ?Sized, O: SlotObserver>(
    config: &SimConfig,
    rule: &R,
    observer: &mut O,
) -> Result<()> {
    let links = Links::new(config.channel, config.gen)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AoiState::ZERO;
    for slot in 1..=config.num_slots {
        let op = rule.decide(state);
        let outcome = links.draw(op, &mut rng);
        let next = advance(state, op, outcome);
        observer.observe(slot, state, op, outcome, next)?;
        state = next;
    }
    Ok(())
}

fn dispatch<O: SlotObserver>(config: &SimConfig, observer: &mut O) -> Result<()> {
    match &config.policy {
        Policy::Sp => drive(config, &SourcePrioritized, observer),
        Policy::Rp => drive(config, &RelayPrioritized, observer),
        Policy::Table(t) => drive(config, t.as_ref(), observer),
        Policy::Rule(r) => drive(config, r.as_ref(), observer),
    }
}

/// Maps a slot to its batch, or `None` during warmup.
#[derive(Debug, Clone, Copy)]
struct Batcher {
    warmup: u64,
    batch_len: u64,
}

impl Batcher {
    fn new(config: &SimConfig) -> Self {
        Self {
            warmup: config.warmup_slots,
            batch_len: config.measured_slots() / u64::from(config.batches),
        }
    }

    #[inline]
    fn batch(&self, slot: u64) -> Option<usize> {
        (slot > self.warmup).then(|| ((slot - self.warmup - 1) / self.batch_len) as usize)
    }
}

struct AgeAccumulator {
    batcher: Batcher,
    sums: Vec<u64>,
    ops: OpCounts,
    direct: u64,
    relay: u64,
}

impl AgeAccumulator {
    fn new(config: &SimConfig) -> Self {
        Self {
            batcher: Batcher::new(config),
            sums: vec![0; config.batches as usize],
            ops: OpCounts::default(),
            direct: 0,
            relay: 0,
        }
    }

    fn finish(self, config: &SimConfig) -> SimResult {
        let len = self.batcher.batch_len as f64;
        let means: Vec<f64> = self.sums.iter().map(|&s| s as f64 / len).collect();
        let total: u64 = self.sums.iter().sum();
        let (_, se, half) = batch_summary(&means);
        SimResult {
            avg_aoi: total as f64 / config.measured_slots() as f64,
            ci_half_width: half,
            std_error: se,
            op_counts: self.ops,
            deliveries_direct: self.direct,
            deliveries_relay: self.relay,
            slots_simulated: config.measured_slots(),
        }
    }
}

impl SlotObserver for AgeAccumulator {
    #[inline]
    fn observe(
        &mut self,
        slot: u64,
        prev: AoiState,
        op: Operation,
        _outcome: SlotOutcome,
        next: AoiState,
    ) -> Result<()> {
        if let Some(b) = self.batcher.batch(slot) {
            self.sums[b] += u64::from(next.delta_d);
            self.ops.add(op);
            if next.delta_d <= prev.delta_d {
                match op {
                    Operation::Source => self.direct += 1,
                    _ => self.relay += 1,
                }
            }
        }
        Ok(())
    }
}

/// Time-average destination age over the measured slots.
pub fn run_sim(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let mut acc = AgeAccumulator::new(config);
    dispatch(config, &mut acc)?;
    Ok(acc.finish(config))
}

struct Tracer<W: Write> {
    inner: AgeAccumulator,
    out: W,
}

impl<W: Write> SlotObserver for Tracer<W> {
    fn observe(
        &mut self,
        slot: u64,
        prev: AoiState,
        op: Operation,
        outcome: SlotOutcome,
        next: AoiState,
    ) -> Result<()> {
        self.inner.observe(slot, prev, op, outcome, next)?;
        let flag = |active: bool, v: bool| u8::from(active && v);
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{}",
            slot,
            next.delta_s,
            next.delta_r,
            next.delta_d,
            op.symbol(),
            u8::from(outcome.generated),
            flag(op == Operation::Source, outcome.sd_success),
            flag(op == Operation::Source, outcome.sr_success),
            flag(op == Operation::Relay, outcome.rd_success),
        )?;
        Ok(())
    }
}

/// [`run_sim`] that also writes one CSV row per slot (warmup included).
///
/// Row `t` holds the ages at the end of slot `t`, the operation used in slot
/// `t` and its random events; link flags of inactive links are 0.
pub fn run_sim_traced<W: Write>(config: &SimConfig, mut out: W) -> Result<SimResult> {
    config.validate()?;
    writeln!(out, "slot,delta_s,delta_r,delta_d,op,gen,sd,sr,rd")?;
    let mut tracer = Tracer {
        inner: AgeAccumulator::new(config),
        out,
    };
    dispatch(config, &mut tracer)?;
    tracer.out.flush()?;
    Ok(tracer.inner.finish(config))
}

/// A point estimate with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Frequencies of the (source-fresher, relay-fresher) flags at slot ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagOccupancy {
    /// Order 00, 01, 10, 11.
    pub freq: [Estimate; 4],
}

struct FlagCounter {
    batcher: Batcher,
    counts: Vec<[u64; 4]>,
}

impl SlotObserver for FlagCounter {
    #[inline]
    fn observe(
        &mut self,
        slot: u64,
        prev: AoiState,
        _op: Operation,
        _outcome: SlotOutcome,
        next: AoiState,
    ) -> Result<()> {
        if let Some(b) = self.batcher.batch(slot) {
            // Source age at the end of the slot, before the next generation.
            let s_end = prev.delta_s + 1;
            let s_flag = s_end < next.delta_r && s_end < next.delta_d;
            let r_flag = next.delta_r < next.delta_d;
            self.counts[b][usize::from(s_flag) * 2 + usize::from(r_flag)] += 1;
        }
        Ok(())
    }
}

/// Empirical law of the (source-fresher, relay-fresher) flags.
pub fn flag_occupancy(config: &SimConfig) -> Result<FlagOccupancy> {
    config.validate()?;
    let batcher = Batcher::new(config);
    let mut counter = FlagCounter {
        batcher,
        counts: vec![[0; 4]; config.batches as usize],
    };
    dispatch(config, &mut counter)?;
    let len = batcher.batch_len as f64;
    let freq = std::array::from_fn(|k| {
        let means: Vec<f64> = counter.counts.iter().map(|c| c[k] as f64 / len).collect();
        let (value, std_error, _) = batch_summary(&means);
        Estimate { value, std_error }
    });
    Ok(FlagOccupancy { freq })
}

/// Raw sums over consecutive delivery pairs `(k-1, k)`.
#[derive(Debug, Clone, Copy, Default)]
struct PairSums {
    n: f64,
    direct: f64,
    z: f64,
    z2: f64,
    y: f64,
    s: f64,
    h: f64,
    yz: f64,
    sz: f64,
    empty: CondSums,
    busy: CondSums,
}

#[derive(Debug, Clone, Copy, Default)]
struct CondSums {
    n: f64,
    y: f64,
    s: f64,
    z: f64,
    z2: f64,
    yz: f64,
}

impl CondSums {
    fn add(&mut self, y: f64, s: f64, z: f64) {
        self.n += 1.0;
        self.y += y;
        self.s += s;
        self.z += z;
        self.z2 += z * z;
        self.yz += y * z;
    }

    fn moments(&self) -> ConditionalMoments {
        let n = self.n;
        ConditionalMoments {
            count: n as u64,
            mean_system_time: self.y / n,
            mean_service: self.s / n,
            mean_interdeparture: self.z / n,
            second_moment_interdeparture: self.z2 / n,
            mean_yz_product: self.yz / n,
        }
    }
}

impl PairSums {
    fn add(&mut self, prev: &Delivery, z: f64) {
        let (y, s, h) = (prev.system_time, prev.service, prev.wait);
        self.n += 1.0;
        self.direct += f64::from(u8::from(prev.direct));
        self.z += z;
        self.z2 += z * z;
        self.y += y;
        self.s += s;
        self.h += h;
        self.yz += y * z;
        self.sz += s * z;
        if prev.empty {
            self.empty.add(y, s, z);
        } else {
            self.busy.add(y, s, z);
        }
    }

    fn stats(&self) -> RenewalStats {
        let n = self.n;
        RenewalStats {
            departures: n as u64,
            mean_service: self.s / n,
            mean_interdeparture: self.z / n,
            second_moment_interdeparture: self.z2 / n,
            mean_system_time: self.y / n,
            mean_wait_before_service: self.h / n,
            prob_empty_on_departure: self.empty.n / n,
            mean_yz_product: self.yz / n,
            cross_sz: self.sz / n,
            direct_fraction: self.direct / n,
            empty: self.empty.moments(),
            busy: self.busy.moments(),
            batches: Vec::new(),
        }
    }
}

/// Moments over deliveries carrying one empty/busy tag. Means are NaN when
/// the tag never occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalMoments {
    pub count: u64,
    pub mean_system_time: f64,
    pub mean_service: f64,
    pub mean_interdeparture: f64,
    pub second_moment_interdeparture: f64,
    pub mean_yz_product: f64,
}

/// Empirical renewal statistics. Each record pairs delivery `k-1` (its
/// system time `Y`, service time `S`, wait `H` and empty tag) with the
/// following interdeparture time `Z_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalStats {
    pub departures: u64,
    pub mean_service: f64,
    pub mean_interdeparture: f64,
    pub second_moment_interdeparture: f64,
    pub mean_system_time: f64,
    pub mean_wait_before_service: f64,
    pub prob_empty_on_departure: f64,
    /// E[Y_{k-1} Z_k].
    pub mean_yz_product: f64,
    /// E[S_{k-1} Z_k].
    pub cross_sz: f64,
    pub direct_fraction: f64,
    /// Conditioned on delivery `k-1` leaving nothing fresher behind.
    pub empty: ConditionalMoments,
    pub busy: ConditionalMoments,
    /// The same statistics per slot batch, for standard errors.
    #[serde(skip)]
    pub batches: Vec<RenewalStats>,
}

impl RenewalStats {
    /// Point value of `f` with the standard error from its spread over batches.
    pub fn estimate(&self, f: impl Fn(&RenewalStats) -> f64) -> Estimate {
        let per_batch: Vec<f64> = self.batches.iter().map(&f).collect();
        let std_error = if per_batch.len() < 2 {
            f64::NAN
        } else {
            batch_summary(&per_batch).1
        };
        Estimate {
            value: f(self),
            std_error,
        }
    }

    /// E[S_{k-1} Z_k] - E[S] E[Z].
    pub fn service_covariance(&self) -> Estimate {
        self.estimate(|s| s.cross_sz - s.mean_service * s.mean_interdeparture)
    }

    /// E[Y Z | empty] - E[Y | empty] E[Z | empty].
    pub fn empty_system_covariance(&self) -> Estimate {
        self.estimate(|s| {
            s.empty.mean_yz_product - s.empty.mean_system_time * s.empty.mean_interdeparture
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Delivery {
    slot: u64,
    system_time: f64,
    service: f64,
    wait: f64,
    empty: bool,
    direct: bool,
}

struct RenewalCollector {
    batcher: Batcher,
    last: Option<Delivery>,
    sums: Vec<PairSums>,
}

impl SlotObserver for RenewalCollector {
    #[inline]
    fn observe(
        &mut self,
        slot: u64,
        prev: AoiState,
        op: Operation,
        _outcome: SlotOutcome,
        next: AoiState,
    ) -> Result<()> {
        if next.delta_d > prev.delta_d {
            return Ok(());
        }
        let y = f64::from(next.delta_d);
        let z = self.last.map(|d| (slot - d.slot) as f64);
        // Service begins at the later of generation and the previous delivery.
        let wait = z.map_or(0.0, |z| (y - z).max(0.0));
        let delivery = Delivery {
            slot,
            system_time: y,
            service: y - wait,
            wait,
            empty: prev.delta_s + 1 == next.delta_d,
            direct: op == Operation::Source,
        };
        if let (Some(b), Some(last), Some(z)) = (self.batcher.batch(slot), self.last, z) {
            self.sums[b].add(&last, z);
        }
        self.last = Some(delivery);
        Ok(())
    }
}

/// Interval statistics between consecutive deliveries.
pub fn collect_renewal_stats(config: &SimConfig) -> Result<RenewalStats> {
    config.validate()?;
    if config.policy.protocol().is_none() {
        return Err(Error::InvalidConfig(
            "renewal statistics need the SP or RP policy".into(),
        ));
    }
    let mut collector = RenewalCollector {
        batcher: Batcher::new(config),
        last: None,
        sums: vec![PairSums::default(); config.batches as usize],
    };
    dispatch(config, &mut collector)?;
    let total = collector
        .sums
        .iter()
        .fold(PairSums::default(), |mut acc, b| {
            acc.n += b.n;
            acc.direct += b.direct;
            acc.z += b.z;
            acc.z2 += b.z2;
            acc.y += b.y;
            acc.s += b.s;
            acc.h += b.h;
            acc.yz += b.yz;
            acc.sz += b.sz;
            for (dst, src) in [(&mut acc.empty, &b.empty), (&mut acc.busy, &b.busy)] {
                dst.n += src.n;
                dst.y += src.y;
                dst.s += src.s;
                dst.z += src.z;
                dst.z2 += src.z2;
                dst.yz += src.yz;
            }
            acc
        });
    if total.n < 2.0 {
        return Err(Error::TooFewDepartures(total.n as u64));
    }
    let mut stats = total.stats();
    stats.batches = collector.sums.iter().map(PairSums::stats).collect();
    Ok(stats)
}

/// Average age rebuilt from renewal moments.
pub fn reconstruct_aoi_from_renewals(stats: &RenewalStats, protocol: Protocol) -> Result<f64> {
    let e_z = stats.mean_interdeparture;
    if !(e_z > 0.0) {
        return Err(Error::ZeroInterdeparture);
    }
    let first = match protocol {
        Protocol::SourcePrioritized => stats.mean_service,
        Protocol::RelayPrioritized => stats.mean_yz_product / e_z,
    };
    Ok(first + stats.second_moment_interdeparture / (2.0 * e_z) - 0.5)
}
