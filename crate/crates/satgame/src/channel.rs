//! Channel gain generation for the three simulation regimes.
//!
//! * `Stationary` — gains fixed at their nominal values forever.
//! * `BlockFading` — i.i.d. exponential gains redrawn every `block_len`
//!   iterations and held constant within a block.
//! * `FastFading` — fresh i.i.d. exponential gains every iteration.
//!
//! Draws are counter-based: `gains_at(t)` is a pure function of
//! (seed, user, block-or-iteration index), so trajectories are reproducible
//! and random-access. Draws below `GAIN_FLOOR` or above `GAIN_CAP` are
//! resampled with the next attempt counter, keeping every emitted gain in
//! `(0, h_max]`.

use std::fmt;

use crate::rng;

/// Strictly-positive floor; gains of exactly zero would make every strategy
/// of the affected user unfeasible.
pub const GAIN_FLOOR: f64 = 1e-12;

/// Boundedness cap standing in for `h_max`. Inversion of a 53-bit uniform
/// cannot exceed `mean * 53 ln 2`, so for sane means the cap is never hit;
/// it is enforced anyway.
pub const GAIN_CAP: f64 = 1e6;

/// Which fading regime the model generates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Stationary,
    BlockFading { block_len: u64 },
    FastFading,
}

/// Invalid channel parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    EmptyGains,
    BadNominalGain { index: usize, value: f64 },
    BadMean { value: f64 },
    BadBlockLen,
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyGains => write!(f, "channel needs at least one user"),
            Self::BadNominalGain { index, value } => {
                write!(f, "nominal_gains[{index}] must be > 0 and finite, got {value}")
            }
            Self::BadMean { value } => write!(f, "fading mean must be > 0 and finite, got {value}"),
            Self::BadBlockLen => write!(f, "block_len must be >= 1"),
        }
    }
}

impl std::error::Error for ChannelError {}

/// Deterministic generator of per-iteration gain vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    /// Gains used by the `Stationary` kind (and as the nominal reference,
    /// e.g. for forecast initialization).
    pub nominal_gains: Vec<f64>,
    /// Mean of the per-user exponential distribution used by fading kinds.
    pub mean: f64,
    pub seed: u64,
}

impl ChannelModel {
    pub fn new(
        kind: ChannelKind,
        nominal_gains: Vec<f64>,
        mean: f64,
        seed: u64,
    ) -> Result<Self, ChannelError> {
        if nominal_gains.is_empty() {
            return Err(ChannelError::EmptyGains);
        }
        for (i, &g) in nominal_gains.iter().enumerate() {
            if !(g > 0.0 && g.is_finite()) {
                return Err(ChannelError::BadNominalGain { index: i, value: g });
            }
        }
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(ChannelError::BadMean { value: mean });
        }
        if let ChannelKind::BlockFading { block_len } = kind {
            if block_len == 0 {
                return Err(ChannelError::BadBlockLen);
            }
        }
        Ok(Self { kind, nominal_gains, mean, seed })
    }

    pub fn n_users(&self) -> usize {
        self.nominal_gains.len()
    }

    /// Whether gains vary over time.
    pub fn is_fading(&self) -> bool {
        !matches!(self.kind, ChannelKind::Stationary)
    }

    /// Gain vector in effect at iteration `t`.
    pub fn gains_at(&self, t: u64) -> Vec<f64> {
        match self.kind {
            ChannelKind::Stationary => self.nominal_gains.clone(),
            ChannelKind::BlockFading { block_len } => self.draw(rng::tag::GAIN, t / block_len),
            ChannelKind::FastFading => self.draw(rng::tag::GAIN, t),
        }
    }

    /// One i.i.d. gain vector for Monte-Carlo estimation, indexed by sample
    /// number `k` under an estimator-supplied seed. Stationary channels are
    /// a point mass at the nominal gains.
    pub fn sample_iid(&self, seed: u64, k: u64) -> Vec<f64> {
        match self.kind {
            ChannelKind::Stationary => self.nominal_gains.clone(),
            _ => {
                let n = self.n_users();
                (0..n).map(|u| bounded_exponential(self.mean, seed, rng::tag::MC, u as u64, k)).collect()
            }
        }
    }

    fn draw(&self, stream: u64, idx: u64) -> Vec<f64> {
        (0..self.n_users())
            .map(|u| bounded_exponential(self.mean, self.seed, stream, u as u64, idx))
            .collect()
    }
}

/// Exponential draw resampled until it lands in `[GAIN_FLOOR, GAIN_CAP]`.
fn bounded_exponential(mean: f64, seed: u64, stream: u64, user: u64, idx: u64) -> f64 {
    for attempt in 0..64 {
        let h = rng::exponential(mean, seed, stream, user, idx, attempt);
        if (GAIN_FLOOR..=GAIN_CAP).contains(&h) {
            return h;
        }
    }
    // 64 consecutive out-of-range draws has probability ~(1e-12)^64.
    mean
}
