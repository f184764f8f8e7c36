//! Exact stationary average age of a rule on the age space truncated at a
//! common cap, without sampling.
//!
//! States are grouped by source age `s`. Between two generations the source
//! age grows by one per slot, so given the mass entering `s = 0` every other
//! layer follows in one forward pass. Each sweep therefore applies the
//! generation-to-generation map to the `s = 0` layer; sweeps repeat until
//! that layer stops changing.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{advance, AoiState, ChannelParams, GenProb, Operation, SlotOutcome};
use crate::rules::DecisionRule;

/// Mass below this is dropped. The total discarded per sweep stays far
/// below double-precision resolution of the mean.
const FLUSH: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainSolution {
    pub avg_aoi: f64,
    pub sweeps: usize,
    /// L1 change of the normalised `s = 0` layer in the last sweep.
    pub residual: f64,
    /// Stationary mass on states whose destination age sits at the cap.
    pub cap_mass: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ChainOptions {
    pub cap: u32,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            cap: 300,
            tolerance: 1e-12,
            max_sweeps: 100_000,
        }
    }
}

/// `(r, d)` grid of one source-age layer, both ages in `[s, cap]`.
struct Layer {
    s: u32,
    width: usize,
    mass: Vec<f64>,
    /// Largest `r - s` and `d - s` offsets holding mass.
    hi_r: usize,
    hi_d: usize,
}

impl Layer {
    fn new(s: u32, cap: u32) -> Self {
        let width = (cap - s + 1) as usize;
        Self {
            s,
            width,
            mass: vec![0.0; width * width],
            hi_r: 0,
            hi_d: 0,
        }
    }

    fn clear(&mut self) {
        for r in 0..=self.hi_r {
            let row = r * self.width;
            self.mass[row..=row + self.hi_d].fill(0.0);
        }
        self.hi_r = 0;
        self.hi_d = 0;
    }

    #[inline]
    fn add(&mut self, r: u32, d: u32, w: f64) {
        let (i, j) = ((r - self.s) as usize, (d - self.s) as usize);
        self.mass[i * self.width + j] += w;
        self.hi_r = self.hi_r.max(i);
        self.hi_d = self.hi_d.max(j);
    }
}

fn link_outcomes(op: Operation, channel: ChannelParams) -> ([(SlotOutcome, f64); 4], usize) {
    let ChannelParams { p1, p2, p3 } = channel;
    let mut out = [(SlotOutcome::default(), 0.0); 4];
    let n = match op {
        Operation::Source => {
            let mut k = 0;
            for (sd, a) in [(true, p1), (false, 1.0 - p1)] {
                for (sr, b) in [(true, p2), (false, 1.0 - p2)] {
                    out[k] = (
                        SlotOutcome {
                            sd_success: sd,
                            sr_success: sr,
                            ..SlotOutcome::default()
                        },
                        a * b,
                    );
                    k += 1;
                }
            }
            4
        }
        Operation::Relay => {
            for (k, (rd, a)) in [(true, p3), (false, 1.0 - p3)].into_iter().enumerate() {
                out[k] = (
                    SlotOutcome {
                        rd_success: rd,
                        ..SlotOutcome::default()
                    },
                    a,
                );
            }
            2
        }
        Operation::Idle => {
            out[0] = (SlotOutcome::default(), 1.0);
            1
        }
    };
    (out, n)
}

/// Stationary mean destination age of `rule`.
pub fn stationary_average_aoi<R: DecisionRule + ?Sized>(
    rule: &R,
    channel: ChannelParams,
    gen: GenProb,
    options: ChainOptions,
) -> Result<ChainSolution> {
    let cap = options.cap;
    if cap < 2 {
        return Err(Error::InvalidConfig("chain cap must be at least 2".into()));
    }
    let p = gen.value();
    let q = 1.0 - p;
    let outcomes: [_; 3] = Operation::ALL.map(|op| link_outcomes(op, channel));

    let mut layers: Vec<Layer> = (0..=cap).map(|s| Layer::new(s, cap)).collect();
    let mut inflow = Layer::new(0, cap);
    // Start with everything at the origin.
    layers[0].add(0, 0, 1.0);

    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    let mut avg = f64::NAN;
    let mut cap_mass = 0.0;

    while sweeps < options.max_sweeps {
        sweeps += 1;
        inflow.clear();
        let mut total = 0.0;
        let mut weighted = 0.0;
        let mut at_cap = 0.0;
        let mut dead = false;

        for s in 0..cap {
            let (head, tail) = layers.split_at_mut(s as usize + 1);
            let cur = &head[s as usize];
            let next = &mut tail[0];
            next.clear();
            if dead {
                continue;
            }
            let mut layer_mass = 0.0;
            for i in 0..=cur.hi_r {
                let r = s + i as u32;
                let row = &cur.mass[i * cur.width..i * cur.width + cur.hi_d + 1];
                for (j, &m) in row.iter().enumerate() {
                    if m < FLUSH {
                        continue;
                    }
                    let d = s + j as u32;
                    layer_mass += m;
                    weighted += m * f64::from(d);
                    if d == cap {
                        at_cap += m;
                    }
                    let state = AoiState::new(s, r, d);
                    let op = rule.decide(state);
                    let (outs, n) = &outcomes[op as usize];
                    for &(o, w) in &outs[..*n] {
                        let nx = advance(state, op, o);
                        let (r2, d2) = (nx.delta_r.min(cap), nx.delta_d.min(cap));
                        let mw = m * w;
                        if q > 0.0 {
                            next.add(r2, d2, q * mw);
                        }
                        inflow.add(r2, d2, p * mw);
                    }
                }
            }
            total += layer_mass;
            // Layer masses shrink geometrically in s.
            dead = layer_mass < FLUSH;
        }
        // The corner state only loops on itself until the next generation.
        let corner_in = layers[cap as usize].mass[0];
        if corner_in > 0.0 {
            let corner = corner_in / p;
            layers[cap as usize].mass[0] = corner;
            total += corner;
            weighted += corner * f64::from(cap);
            at_cap += corner;
            inflow.add(cap, cap, p * corner);
        }

        avg = weighted / total;
        cap_mass = at_cap / total;

        // Normalise the new origin layer and measure the change.
        let in_total: f64 = inflow.mass.iter().sum();
        let old_total: f64 = layers[0].mass.iter().sum();
        residual = 0.0;
        let origin = &mut layers[0];
        for (o, &n) in origin.mass.iter_mut().zip(&inflow.mass) {
            let nv = n / in_total;
            let nv = if nv < FLUSH { 0.0 } else { nv };
            residual += (nv - *o / old_total).abs();
            *o = nv;
        }
        origin.hi_r = inflow.hi_r;
        origin.hi_d = inflow.hi_d;
        if residual < options.tolerance {
            break;
        }
    }
    if residual >= options.tolerance {
        return Err(Error::NotConverged {
            iterations: sweeps,
            span: residual,
        });
    }
    Ok(ChainSolution {
        avg_aoi: avg,
        sweeps,
        residual,
        cap_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{RelayPrioritized, SourcePrioritized};

    #[test]
    fn perfect_direct_link_is_one() {
        let ch = ChannelParams::new(1.0, 0.5, 0.5).unwrap();
        let sol = stationary_average_aoi(
            &SourcePrioritized,
            ch,
            GenProb::ALWAYS,
            ChainOptions {
                cap: 20,
                ..ChainOptions::default()
            },
        )
        .unwrap();
        assert!((sol.avg_aoi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_cap_matches_brute_force_power_iteration() {
        // Dense power iteration over the same truncated chain.
        let cap = 12u32;
        let ch = ChannelParams::new(0.3, 0.6, 0.7).unwrap();
        let p = 0.4;
        let states: Vec<AoiState> = (0..=cap)
            .flat_map(|s| {
                (s..=cap).flat_map(move |r| (s..=cap).map(move |d| AoiState::new(s, r, d)))
            })
            .collect();
        let lookup: std::collections::HashMap<AoiState, usize> =
            states.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        let index = |x: AoiState| lookup[&x];
        for rule in [&SourcePrioritized as &dyn DecisionRule, &RelayPrioritized] {
            let mut pi = vec![0.0; states.len()];
            pi[0] = 1.0;
            for _ in 0..5000 {
                let mut nxt = vec![0.0; states.len()];
                for (i, &x) in states.iter().enumerate() {
                    if pi[i] == 0.0 {
                        continue;
                    }
                    let op = rule.decide(x);
                    let (outs, n) = link_outcomes(op, ch);
                    for &(mut o, w) in &outs[..n] {
                        for (g, pg) in [(true, p), (false, 1.0 - p)] {
                            o.generated = g;
                            let y = advance(x, op, o).saturate(cap, cap, cap);
                            nxt[index(y)] += pi[i] * w * pg;
                        }
                    }
                }
                pi = nxt;
            }
            let brute: f64 = states
                .iter()
                .zip(&pi)
                .map(|(x, w)| w * f64::from(x.delta_d))
                .sum();
            let sol = stationary_average_aoi(
                rule,
                ch,
                GenProb::new(p).unwrap(),
                ChainOptions {
                    cap,
                    ..ChainOptions::default()
                },
            )
            .unwrap();
            assert!(
                (sol.avg_aoi - brute).abs() < 1e-9,
                "{}: {} vs {}",
                rule.name(),
                sol.avg_aoi,
                brute
            );
        }
    }
}
