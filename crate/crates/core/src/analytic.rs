//! Closed-form average age for both protocols.
//!
//! Everything here is a short rational expression in `p` and the link
//! probabilities, evaluated in double precision. All functions require the
//! channel to satisfy [`ChannelParams::check_analytic`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChannelParams, GenProb};
use crate::rules::Protocol;

/// Renewal terms of the source-prioritised protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpTerms {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Mean service time E[S].
    pub e_s: f64,
    /// Mean time from the first generation after a delivery to the next delivery.
    pub e_t: f64,
    pub e_t2: f64,
    /// Mean interdeparture time E[Z].
    pub e_z: f64,
    pub e_z2: f64,
    /// Mean and second moment of the geometric wait for the first generation.
    pub e_w: f64,
    pub e_w2: f64,
}

impl SpTerms {
    /// Renewal-reward assembly: E[S] + E[Z^2] / (2 E[Z]) - 1/2.
    pub fn assemble(&self) -> f64 {
        self.e_s + self.e_z2 / (2.0 * self.e_z) - 0.5
    }
}

fn geometric_wait(p: f64) -> (f64, f64) {
    ((1.0 - p) / p, (p * p - 3.0 * p + 2.0) / (p * p))
}

pub fn sp_terms(channel: ChannelParams, gen: GenProb) -> Result<SpTerms> {
    channel.check_analytic()?;
    let ChannelParams { p1, p2, p3 } = channel;
    let p = gen.value();
    let q = 1.0 - p;

    let alpha = q * (1.0 - p3);
    let beta = q * (1.0 - p1) * (1.0 - p2);
    let gamma = p2 * p3 * q * (1.0 - p1);
    // beta * P2/(1-P2), beta * p/(1-p) and their product, written without
    // the divisions so that p = 1 needs no special case.
    let beta_p2 = q * (1.0 - p1) * p2;
    let beta_pq = p * (1.0 - p1) * (1.0 - p2);
    let beta_pq_p2 = p * (1.0 - p1) * p2;

    let one_a = 1.0 - alpha;
    let one_b = 1.0 - beta;
    let denom = p1 * one_a + gamma;

    let e_s = 1.0 / one_b + gamma / (one_a * denom);
    let e_t = (one_a + beta_p2) / denom;
    let e_z = one_a * one_b / (p * denom);
    let (e_w, e_w2) = geometric_wait(p);

    let lead = one_a * one_b - one_a * beta_pq - beta_pq_p2;
    let bracket = one_a * one_a * (1.0 + beta)
        + (3.0 - alpha - beta - alpha * beta) * beta_p2
        + 2.0 * e_t * (one_a * one_a * beta_pq + (1.0 - alpha * beta) * beta_pq_p2);
    let e_t2 = bracket / (lead * one_a * one_b);
    let e_z2 = e_w2 + 2.0 * e_w * e_t + e_t2;

    Ok(SpTerms {
        alpha,
        beta,
        gamma,
        e_s,
        e_t,
        e_t2,
        e_z,
        e_z2,
        e_w,
        e_w2,
    })
}

/// Average age under the source-prioritised protocol.
pub fn sp_avg_aoi(channel: ChannelParams, gen: GenProb) -> Result<f64> {
    channel.check_analytic()?;
    let ChannelParams { p1, p2, p3 } = channel;
    let p = gen.value();
    let q = 1.0 - p;
    let num = (1.0 - q * (1.0 - p3)) * (1.0 - q * (1.0 - p1) * (1.0 - p2));
    let den = p * (p * p1 + q * p3 - q * (1.0 - p1) * (1.0 - p2) * p3);
    Ok(num / den)
}

/// Stationary law of the (source-has-fresher, relay-has-fresher) flags seen
/// at slot ends under the relay-prioritised protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryDist {
    pub pi00: f64,
    pub pi01: f64,
    pub pi10: f64,
    pub pi11: f64,
}

impl StationaryDist {
    /// Components in the order 00, 01, 10, 11.
    pub fn as_array(&self) -> [f64; 4] {
        [self.pi00, self.pi01, self.pi10, self.pi11]
    }
}

pub fn stationary_dist(channel: ChannelParams, gen: GenProb) -> Result<StationaryDist> {
    channel.check_analytic()?;
    let ChannelParams { p1, p2, p3 } = channel;
    let p = gen.value();
    let q = 1.0 - p;
    let either = p1 + p2 - p1 * p2;

    let n00 = p3 * (p * p1 + q * p3 * either);
    let n01 = p * p2 * p3 * (1.0 - p1);
    let n10 = p * (1.0 - p1) * p3 * (p + q * p3 * (1.0 - p2));
    let n11 = p * p * p2 * (1.0 - p1) * (1.0 - p3);
    let total = n00 + n01 + n10 + n11;
    Ok(StationaryDist {
        pi00: n00 / total,
        pi01: n01 / total,
        pi10: n10 / total,
        pi11: n11 / total,
    })
}

/// Renewal terms of the relay-prioritised protocol. "Empty" refers to a
/// delivery after which neither source nor relay holds anything fresher than
/// the destination; "busy" is the complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RpTerms {
    pub pi: StationaryDist,
    pub prob_empty: f64,
    pub e_t: f64,
    pub e_t2: f64,
    pub e_z_empty: f64,
    pub e_z_busy: f64,
    pub e_z2_empty: f64,
    pub e_z2_busy: f64,
    /// Mean time a delivered update waited before its service began.
    pub e_h: f64,
    pub e_s_empty: f64,
    pub e_s_busy: f64,
    pub e_y_empty: f64,
    pub e_y_busy: f64,
    /// Probability that a generation arrives before the current update
    /// reaches either receiver.
    pub prob_theta: f64,
}

impl RpTerms {
    /// Mixture over the empty/busy tag of the previous delivery.
    pub fn assemble(&self) -> f64 {
        let pe = self.prob_empty;
        let pb = 1.0 - pe;
        let e_z = self.e_z_empty * pe + self.e_z_busy * pb;
        let e_yz = self.e_y_empty * self.e_z_empty * pe + self.e_y_busy * self.e_z_busy * pb;
        let e_z2 = self.e_z2_empty * pe + self.e_z2_busy * pb;
        (e_yz + 0.5 * e_z2) / e_z - 0.5
    }

    /// Unconditional mean interdeparture time.
    pub fn e_z(&self) -> f64 {
        self.e_z_empty * self.prob_empty + self.e_z_busy * (1.0 - self.prob_empty)
    }
}

pub fn rp_terms(channel: ChannelParams, gen: GenProb) -> Result<RpTerms> {
    let pi = stationary_dist(channel, gen)?;
    let ChannelParams { p1, p2, p3 } = channel;
    let p = gen.value();
    let q = 1.0 - p;

    let alpha = q * (1.0 - p3);
    let beta = q * (1.0 - p1) * (1.0 - p2);
    let gamma = p2 * p3 * q * (1.0 - p1);
    let either = p1 + p2 - p1 * p2;
    let one_a = 1.0 - alpha;
    let one_b = 1.0 - beta;

    let prob_empty = (p * p1 + p3 * (1.0 - p - beta)) / (one_a * either);

    let e_t = (p3 + p2 * (1.0 - p1)) / (p3 * either);
    let e_t2 = (p2 * p2 * (1.0 - p1).powi(2) * (2.0 - p3)
        + p3 * p3 * (1.0 + (1.0 - p1) * (1.0 - p2))
        + p2 * (2.0 - p1) * (1.0 - (1.0 - p1) * (1.0 - p3))
        - p1 * p1 * p2)
        / (p3 * p3 * either * either);

    let (e_w, e_w2) = geometric_wait(p);
    let e_z_busy = e_t;
    let e_z_empty = e_w + e_t;
    let e_z2_busy = e_t2;
    let e_z2_empty = e_t2 + e_w2 + 2.0 * q * (p2 * (1.0 - p1) + p3) / (p * p3 * either);

    let e_h = p * p2 * q * (1.0 - p1) / (one_a * one_a * one_b);
    let e_s_empty = 1.0 / one_b + gamma / (one_a * (p1 * one_a + gamma));
    let e_s_busy = 2.0 / p3 + 1.0 / one_b - (p3 * p3 * q + p) / (p3 * one_a);

    Ok(RpTerms {
        pi,
        prob_empty,
        e_t,
        e_t2,
        e_z_empty,
        e_z_busy,
        e_z2_empty,
        e_z2_busy,
        e_h,
        e_s_empty,
        e_s_busy,
        e_y_empty: e_h + e_s_empty,
        e_y_busy: e_h + e_s_busy,
        prob_theta: p / one_b,
    })
}

/// Average age under the relay-prioritised protocol.
pub fn rp_avg_aoi(channel: ChannelParams, gen: GenProb) -> Result<f64> {
    Ok(rp_terms(channel, gen)?.assemble())
}

/// Average age of either protocol.
pub fn avg_aoi(protocol: Protocol, channel: ChannelParams, gen: GenProb) -> Result<f64> {
    match protocol {
        Protocol::SourcePrioritized => sp_avg_aoi(channel, gen),
        Protocol::RelayPrioritized => rp_avg_aoi(channel, gen),
    }
}

/// Source-prioritised age when a fresh update is available every slot.
pub fn sp_aoi_gaw(channel: ChannelParams) -> Result<f64> {
    let p1 = channel.p1;
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::InvalidProbability {
            name: "p1",
            value: p1,
            range: "(0, 1)",
        });
    }
    Ok(1.0 / p1)
}

fn rp_gaw_formula(p1: f64, p2: f64, p3: f64) -> f64 {
    let relay_first = p2 + p3 - p1 * p2;
    let either = 1.0 - (1.0 - p1) * (1.0 - p2);
    p2 * (1.0 - p1) / (p3 * relay_first) + relay_first / (p3 * either)
}

/// Relay-prioritised age when a fresh update is available every slot.
pub fn rp_aoi_gaw(channel: ChannelParams) -> Result<f64> {
    channel.check_analytic()?;
    Ok(rp_gaw_formula(channel.p1, channel.p2, channel.p3))
}

/// Direct-link probability at which both protocols tie under
/// generate-at-will. Below it the relay-prioritised protocol is better.
pub fn crossover_p1(p2: f64, p3: f64) -> Result<f64> {
    for (name, v) in [("p2", p2), ("p3", p3)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidProbability {
                name,
                value: v,
                range: "(0, 1)",
            });
        }
    }
    let a = 2.0 * p2 + p3 + p2 * p3;
    let b = p2 * p2 * (p3 - 2.0).powi(2) + p3 * (8.0 * p2 + 5.0 * p3 - 6.0 * p2 * p3);
    // (a - sqrt(b)) / (4 p2 - 2) after rationalising; a^2 - b = 4 p3 (p2 + p3)(2 p2 - 1).
    Ok(2.0 * p3 * (p2 + p3) / (a + b.sqrt()))
}
