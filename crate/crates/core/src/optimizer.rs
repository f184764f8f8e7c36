//! Generation probability that minimises the average age.

use serde::Serialize;

use crate::analytic::{avg_aoi, rp_aoi_gaw, sp_avg_aoi};
use crate::error::{Error, Result};
use crate::model::{ChannelParams, GenProb};
use crate::rules::Protocol;

/// Coefficients of the quadratic `mu p^2 + lambda p + xi` whose sign is the
/// sign of the derivative of the source-prioritised age in `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaCoeffs {
    pub mu: f64,
    pub lambda: f64,
    pub xi: f64,
}

impl KappaCoeffs {
    pub fn eval(&self, p: f64) -> f64 {
        (self.mu * p + self.lambda) * p + self.xi
    }

    pub fn discriminant(&self) -> f64 {
        self.lambda * self.lambda - 4.0 * self.mu * self.xi
    }

    /// The root `(-lambda + sqrt(disc)) / (2 mu)`, computed without
    /// cancellation.
    pub fn upper_root(&self) -> f64 {
        let sq = self.discriminant().max(0.0).sqrt();
        if self.lambda >= 0.0 {
            2.0 * self.xi / (-self.lambda - sq)
        } else {
            (-self.lambda + sq) / (2.0 * self.mu)
        }
    }
}

pub fn kappa_coeffs(channel: ChannelParams) -> Result<KappaCoeffs> {
    channel.check_analytic()?;
    let ChannelParams { p1, p2, p3 } = channel;
    let lambda = -2.0 * p3 * (p1 + p2 - p1 * p2) * (p1 - p1 * p3 - p2 * p3 + p1 * p2 * p3);
    let mu = p2 * p3 * (1.0 - p2 * p3)
        - p1 * p1 * (1.0 - p2) * (1.0 - p3).powi(2)
        - p1 * p2 * p3 * p3 * (1.0 - p2) * (2.0 - p1)
        - p1 * p2 * (1.0 - p3);
    let xi = -p3 * p3 * (p1 * p1 * (p2 - 1.0).powi(2) + p2 * (p2 + 2.0 * p1 * (1.0 - p2)));
    Ok(KappaCoeffs { mu, lambda, xi })
}

/// Direct-link probability above which generate-at-will is optimal for the
/// source-prioritised protocol.
pub fn sp_threshold(p2: f64, p3: f64) -> f64 {
    let root = ((p2 - p2 * p3).powi(2) + 4.0 * p2 * p3).sqrt();
    (p2 + p2 * p3 - root) / (2.0 * (p2 - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptCase {
    InteriorRoot,
    BoundaryOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptResult {
    pub p_star: f64,
    pub aoi_at_p_star: f64,
    pub case_tag: OptCase,
}

pub fn optimal_p_sp(channel: ChannelParams) -> Result<OptResult> {
    let k = kappa_coeffs(channel)?;
    let threshold = sp_threshold(channel.p2, channel.p3);
    let (p_star, case_tag) = if channel.p1 < threshold {
        (k.upper_root(), OptCase::InteriorRoot)
    } else {
        if channel.p1 == threshold {
            let root = k.upper_root();
            if (root - 1.0).abs() > 1e-9 {
                return Err(Error::ThresholdMismatch { root });
            }
        }
        (1.0, OptCase::BoundaryOne)
    };
    let aoi_at_p_star = sp_avg_aoi(channel, GenProb::new(p_star)?)?;
    Ok(OptResult {
        p_star,
        aoi_at_p_star,
        case_tag,
    })
}

/// The relay-prioritised age is decreasing in `p`, so the optimum is always 1.
pub fn optimal_p_rp(channel: ChannelParams) -> Result<OptResult> {
    Ok(OptResult {
        p_star: 1.0,
        aoi_at_p_star: rp_aoi_gaw(channel)?,
        case_tag: OptCase::BoundaryOne,
    })
}

pub fn optimal_p(protocol: Protocol, channel: ChannelParams) -> Result<OptResult> {
    match protocol {
        Protocol::SourcePrioritized => optimal_p_sp(channel),
        Protocol::RelayPrioritized => optimal_p_rp(channel),
    }
}

/// Brute-force argmin over `{1/n, 2/n, ..., 1}`, ties going to the larger `p`.
pub fn grid_search_p(channel: ChannelParams, protocol: Protocol, resolution: u32) -> Result<f64> {
    if resolution < 100 {
        return Err(Error::InvalidConfig(format!(
            "grid resolution {resolution} is below 100"
        )));
    }
    channel.check_analytic()?;
    let mut best = (f64::INFINITY, 1.0);
    for k in 1..=resolution {
        let p = f64::from(k) / f64::from(resolution);
        let aoi = avg_aoi(protocol, channel, GenProb::new(p)?)?;
        if aoi <= best.0 {
            best = (aoi, p);
        }
    }
    Ok(best.1)
}
