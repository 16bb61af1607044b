//! Game instance and payoff computations.
//!
//! An uplink power-control game: `N` users share one channel to a common
//! receiver. User `i` transmits at power `P_i` through gain `h_i`; its SINR
//! is `h_i P_i / (eta + sum_{j != i} h_j P_j)` and its rate is
//! `log2(1 + SINR)` bits/s/Hz. Each user wants its rate to meet a demand
//! `theta_i`. All rates use log base 2 throughout the crate.
//!
//! Gains are passed per call rather than read from the config so a single
//! config serves stationary and fading runs; `GameConfig::gains` holds the
//! nominal (stationary) values.

use std::fmt;

use crate::channel::ChannelModel;

/// Static description of one game instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    /// Nominal channel power gains `h_i`, strictly positive.
    pub gains: Vec<f64>,
    /// Additive noise power `eta` at the receiver, strictly positive.
    pub noise: f64,
    /// Per-user demanded rates `theta_i` in bits/s/Hz, strictly positive.
    pub demands: Vec<f64>,
    /// Per-user maximum transmit powers, strictly positive.
    pub p_max: Vec<f64>,
    /// Aggregate demand ceiling `C`: the network is declared feasible when
    /// `sum theta_i <= C`.
    pub capacity: f64,
}

/// Violations of the `GameConfig` invariants.
#[derive(Debug, Clone, PartialEq)]
pub enum GameError {
    /// A per-user vector does not have one entry per user.
    LengthMismatch { field: &'static str, expected: usize, got: usize },
    /// A field that must be strictly positive (and finite) is not.
    NotPositive { field: &'static str, index: Option<usize>, value: f64 },
    /// A user index is outside `0..n_users`.
    UserIndex { index: usize, n_users: usize },
    /// A power lies outside `[0, p_max]`.
    PowerOutOfBounds { index: usize, power: f64, p_max: f64 },
}

impl fmt::Display for GameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LengthMismatch { field, expected, got } => {
                write!(f, "{field}: expected {expected} entries, got {got}")
            }
            Self::NotPositive { field, index: Some(i), value } => {
                write!(f, "{field}[{i}] must be > 0 and finite, got {value}")
            }
            Self::NotPositive { field, index: None, value } => {
                write!(f, "{field} must be > 0 and finite, got {value}")
            }
            Self::UserIndex { index, n_users } => {
                write!(f, "user index {index} out of range for {n_users} users")
            }
            Self::PowerOutOfBounds { index, power, p_max } => {
                write!(f, "power[{index}] = {power} outside [0, {p_max}]")
            }
        }
    }
}

impl std::error::Error for GameError {}

fn check_positive_vec(field: &'static str, v: &[f64], n: usize) -> Result<(), GameError> {
    if v.len() != n {
        return Err(GameError::LengthMismatch { field, expected: n, got: v.len() });
    }
    for (i, &x) in v.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(GameError::NotPositive { field, index: Some(i), value: x });
        }
    }
    Ok(())
}

impl GameConfig {
    /// Builds a config, validating every invariant.
    pub fn new(
        gains: Vec<f64>,
        noise: f64,
        demands: Vec<f64>,
        p_max: Vec<f64>,
        capacity: f64,
    ) -> Result<Self, GameError> {
        let n = gains.len();
        check_positive_vec("gains", &gains, n)?;
        check_positive_vec("demands", &demands, n)?;
        check_positive_vec("p_max", &p_max, n)?;
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(GameError::NotPositive { field: "noise", index: None, value: noise });
        }
        if !(capacity > 0.0 && capacity.is_finite()) {
            return Err(GameError::NotPositive { field: "capacity", index: None, value: capacity });
        }
        Ok(Self { gains, noise, demands, p_max, capacity })
    }

    pub fn n_users(&self) -> usize {
        self.gains.len()
    }
}

/// A joint strategy profile: one transmit power per user.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    /// Validates length and per-user bounds `0 <= P_i <= p_max_i`.
    pub fn new(powers: Vec<f64>, cfg: &GameConfig) -> Result<Self, GameError> {
        if powers.len() != cfg.n_users() {
            return Err(GameError::LengthMismatch {
                field: "powers",
                expected: cfg.n_users(),
                got: powers.len(),
            });
        }
        for (i, &p) in powers.iter().enumerate() {
            if !(p >= 0.0 && p <= cfg.p_max[i]) {
                return Err(GameError::PowerOutOfBounds { index: i, power: p, p_max: cfg.p_max[i] });
            }
        }
        Ok(Self(powers))
    }

    /// Wraps powers without bound checks, for callers that clamp themselves.
    pub fn from_unchecked(powers: Vec<f64>) -> Self {
        Self(powers)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total transmit power `sum_i P_i`.
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Total received power `sum_i h_i P_i`.
    pub fn total_received(&self, gains: &[f64]) -> f64 {
        self.0.iter().zip(gains).map(|(p, h)| p * h).sum()
    }
}

impl std::ops::Index<usize> for PowerVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Instantaneous SINR of user `i` under the given gain realization.
pub fn sinr(cfg: &GameConfig, p: &PowerVector, gains: &[f64], i: usize) -> Result<f64, GameError> {
    let n = cfg.n_users();
    if i >= n {
        return Err(GameError::UserIndex { index: i, n_users: n });
    }
    debug_assert_eq!(gains.len(), n);
    debug_assert_eq!(p.len(), n);
    let received = p.total_received(gains);
    let own = gains[i] * p[i];
    Ok(own / (cfg.noise + (received - own)))
}

/// Bandwidth-normalized instantaneous rate `log2(1 + SINR)` of user `i`.
pub fn throughput(
    cfg: &GameConfig,
    p: &PowerVector,
    gains: &[f64],
    i: usize,
) -> Result<f64, GameError> {
    Ok((1.0 + sinr(cfg, p, gains, i)?).log2())
}

/// Rates of all users under one gain realization.
pub fn throughputs(cfg: &GameConfig, p: &PowerVector, gains: &[f64]) -> Vec<f64> {
    let received = p.total_received(gains);
    (0..cfg.n_users())
        .map(|i| {
            let own = gains[i] * p[i];
            (1.0 + own / (cfg.noise + (received - own))).log2()
        })
        .collect()
}

/// Monte-Carlo estimate of the expected rate of user `i` over `n_samples`
/// i.i.d. gain realizations drawn from the channel model.
///
/// Deterministic for a fixed `(channel, seed, n_samples)`; a stationary
/// channel degenerates to the instantaneous rate exactly.
pub fn expected_throughput(
    cfg: &GameConfig,
    p: &PowerVector,
    channel: &ChannelModel,
    i: usize,
    n_samples: u64,
    seed: u64,
) -> Result<f64, GameError> {
    if i >= cfg.n_users() {
        return Err(GameError::UserIndex { index: i, n_users: cfg.n_users() });
    }
    assert!(n_samples >= 1, "n_samples must be >= 1");
    let mut acc = Kahan::default();
    for k in 0..n_samples {
        let gains = channel.sample_iid(seed, k);
        acc.add(throughput(cfg, p, &gains, i)?);
    }
    Ok(acc.sum() / n_samples as f64)
}

/// Per-user satisfaction flags: `r_i >= theta_i`, with exact `>=` (the
/// boundary counts as satisfied). The profile is an SE iff all flags hold.
pub fn is_satisfied(cfg: &GameConfig, p: &PowerVector, gains: &[f64]) -> Vec<bool> {
    throughputs(cfg, p, gains)
        .iter()
        .zip(&cfg.demands)
        .map(|(r, th)| r >= th)
        .collect()
}

/// Aggregate demand feasibility `sum theta_i <= C`.
pub fn feasibility_check(cfg: &GameConfig) -> bool {
    cfg.demands.iter().sum::<f64>() <= cfg.capacity
}

/// Neumaier-compensated accumulator, so long Monte-Carlo sums keep
/// round-off near one ulp instead of O(n) ulps.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}
