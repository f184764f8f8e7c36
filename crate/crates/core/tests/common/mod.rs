//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use aor_core::{AoiState, ChannelParams, GenProb, Operation, SlotOutcome};

/// The five link settings used throughout the evaluation.
pub const FIVE_SETS: [(f64, f64, f64); 5] = [
    (0.2, 0.8, 0.8),
    (0.2, 0.3, 0.8),
    (0.2, 0.8, 0.3),
    (0.2, 0.3, 0.3),
    (0.7, 0.8, 0.8),
];

pub fn ch(p1: f64, p2: f64, p3: f64) -> ChannelParams {
    ChannelParams::new(p1, p2, p3).unwrap()
}

pub fn g(p: f64) -> GenProb {
    GenProb::new(p).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Literal transcription of the age recursions: source, relay, destination.
pub fn literal_step(state: AoiState, op: Operation, o: SlotOutcome) -> AoiState {
    let (ds, dr, dd) = (state.delta_s, state.delta_r, state.delta_d);
    let ds_next = if o.generated { 0 } else { ds + 1 };
    let w_s = op == Operation::Source;
    let w_r = op == Operation::Relay;
    let dr_next = if w_s && o.sr_success { ds + 1 } else { dr + 1 };
    let dd_next = if w_s && o.sd_success {
        ds + 1
    } else if w_r && o.rd_success && dr < dd {
        dr + 1
    } else {
        dd + 1
    };
    AoiState::new(ds_next, dr_next, dd_next)
}

pub fn all_outcomes() -> impl Iterator<Item = SlotOutcome> {
    (0..16u8).map(|b| SlotOutcome {
        generated: b & 1 != 0,
        sd_success: b & 2 != 0,
        sr_success: b & 4 != 0,
        rd_success: b & 8 != 0,
    })
}

/// Transition matrix of the (source-fresher, relay-fresher) flags under the
/// relay-prioritised protocol, built from the protocol description. State
/// order 00, 01, 10, 11.
pub fn flag_chain(c: ChannelParams, p: f64) -> [[f64; 4]; 4] {
    let ChannelParams { p1, p2, p3 } = c;
    let q = 1.0 - p;
    [
        [
            q + p * p1,
            p * (1.0 - p1) * p2,
            p * (1.0 - p1) * (1.0 - p2),
            0.0,
        ],
        [q * p3, q * (1.0 - p3), p * p3, p * (1.0 - p3)],
        [p1, (1.0 - p1) * p2, (1.0 - p1) * (1.0 - p2), 0.0],
        [0.0, 0.0, p3, 1.0 - p3],
    ]
}

/// Stationary row vector by powering the matrix through repeated squaring.
pub fn power_iterate(m: &[[f64; 4]; 4]) -> [f64; 4] {
    let mut a = *m;
    for _ in 0..64 {
        let mut sq = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                sq[i][j] = (0..4).map(|k| a[i][k] * a[k][j]).sum();
            }
        }
        // Renormalise rows against drift.
        for row in sq.iter_mut() {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        a = sq;
    }
    a[0]
}

/// Sums `f(k)` for k = 1.. until terms are negligible or `limit` terms.
fn series(limit: usize, mut f: impl FnMut(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for k in 1..=limit {
        let t = f(k);
        acc += t;
        if t.abs() <= 1e-20 * acc.abs() && k > 10 {
            break;
        }
    }
    acc
}

/// Double sum over m >= m0, n >= n0 with both indices capped at `limit`.
fn double_series(
    limit: usize,
    m0: usize,
    n0: usize,
    mut f: impl FnMut(usize, usize) -> f64,
) -> f64 {
    let mut acc = 0.0;
    for m in m0..=limit {
        let mut row = 0.0;
        for n in n0..=limit {
            let t = f(m, n);
            row += t;
            if t.abs() <= 1e-20 * row.abs() && n > 10 {
                break;
            }
        }
        acc += row;
        if row.abs() <= 1e-20 * acc.abs() && m > 10 {
            break;
        }
    }
    acc
}

pub struct SeriesMoments {
    pub e_s: f64,
    pub e_t: f64,
    pub e_t2: f64,
}

const TERMS: usize = 10_000;

/// Source-prioritised moments by direct summation of the defining series.
pub fn sp_series(c: ChannelParams, p: f64) -> SeriesMoments {
    let ChannelParams { p1, p2, p3 } = c;
    let q = 1.0 - p;
    let pl = |l: usize| (q * (1.0 - p2) * (1.0 - p1)).powi(l as i32 - 1) * p1;
    let pmn = |m: usize, n: usize| {
        (q * (1.0 - p2)).powi(m as i32 - 1)
            * (1.0 - p1).powi(m as i32)
            * p2
            * q.powi(n as i32)
            * (1.0 - p3).powi(n as i32 - 1)
            * p3
    };
    // Preempted before reaching anyone, or after reaching only the relay.
    let cl = |l: usize| ((1.0 - p1) * (1.0 - p2)).powi(l as i32) * q.powi(l as i32 - 1) * p;
    let emn = |m: usize, n: usize| {
        (1.0 - p1).powi(m as i32)
            * (1.0 - p2).powi(m as i32 - 1)
            * p2
            * q.powi(m as i32 - 1)
            * (q * (1.0 - p3)).powi(n as i32)
            * p
    };

    let w_direct = series(TERMS, pl);
    let w_relay = double_series(TERMS, 1, 1, pmn);
    let s_direct = series(TERMS, |l| pl(l) * l as f64);
    let s_relay = double_series(TERMS, 1, 1, |m, n| pmn(m, n) * (m + n) as f64);
    let e_s = (s_direct + s_relay) / (w_direct + w_relay);

    let restart = series(TERMS, cl) + double_series(TERMS, 1, 0, emn);
    let a = s_direct
        + s_relay
        + series(TERMS, |l| cl(l) * l as f64)
        + double_series(TERMS, 1, 0, |m, n| emn(m, n) * (m + n) as f64);
    let e_t = a / (1.0 - restart);

    let a2 = series(TERMS, |l| pl(l) * (l * l) as f64)
        + double_series(TERMS, 1, 1, |m, n| pmn(m, n) * ((m + n) * (m + n)) as f64)
        + series(TERMS, |l| cl(l) * ((l * l) as f64 + 2.0 * l as f64 * e_t))
        + double_series(TERMS, 1, 0, |m, n| {
            let k = (m + n) as f64;
            emn(m, n) * (k * k + 2.0 * k * e_t)
        });
    let e_t2 = a2 / (1.0 - restart);
    SeriesMoments { e_s, e_t, e_t2 }
}

pub struct RpSeriesMoments {
    pub e_t: f64,
    pub e_t2: f64,
    pub e_s_busy: f64,
}

/// Relay-prioritised moments by direct summation of the defining series.
pub fn rp_series(c: ChannelParams, p: f64) -> RpSeriesMoments {
    let ChannelParams { p1, p2, p3 } = c;
    let q = 1.0 - p;
    let pl = |l: usize| (q * (1.0 - p1) * (1.0 - p2)).powi(l as i32 - 1) * p1;
    // The relay is never preempted once it holds the update.
    let pmn = |m: usize, n: usize| {
        q.powi(m as i32 - 1)
            * (1.0 - p1).powi(m as i32)
            * (1.0 - p2).powi(m as i32 - 1)
            * p2
            * (1.0 - p3).powi(n as i32 - 1)
            * p3
    };
    let cl = |l: usize| ((1.0 - p1) * (1.0 - p2)).powi(l as i32) * q.powi(l as i32 - 1) * p;

    let restart = series(TERMS, cl);
    let a = series(TERMS, |l| pl(l) * l as f64)
        + double_series(TERMS, 1, 1, |m, n| pmn(m, n) * (m + n) as f64)
        + series(TERMS, |l| cl(l) * l as f64);
    let e_t = a / (1.0 - restart);
    let a2 = series(TERMS, |l| pl(l) * (l * l) as f64)
        + double_series(TERMS, 1, 1, |m, n| pmn(m, n) * ((m + n) * (m + n)) as f64)
        + series(TERMS, |l| cl(l) * ((l * l) as f64 + 2.0 * l as f64 * e_t));
    let e_t2 = a2 / (1.0 - restart);

    // A busy departure was relayed and a fresher generation arrived during
    // its relay phase.
    let busy_w = |m: usize, n: usize| pmn(m, n) * (1.0 - q.powi(n as i32));
    let e_s_busy = double_series(TERMS, 1, 1, |m, n| busy_w(m, n) * (m + n) as f64)
        / double_series(TERMS, 1, 1, busy_w);
    RpSeriesMoments {
        e_t,
        e_t2,
        e_s_busy,
    }
}

/// Random channel inside the closed-form domain.
pub fn random_channel(rng: &mut impl rand::Rng) -> ChannelParams {
    loop {
        let p1: f64 = rng.gen_range(0.01..0.95);
        let p2: f64 = rng.gen_range(0.01..0.99);
        let p3: f64 = rng.gen_range(0.01..0.99);
        if let Ok(c) = ChannelParams::analytic(p1, p2, p3) {
            return c;
        }
    }
}
