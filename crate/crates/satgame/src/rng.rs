//! Counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of a 64-bit seed
//! and a handful of index words (stream tag, user, time/sample index,
//! resample attempt). This gives random access — `value(seed, t)` does not
//! depend on how many values were drawn before — so gain trajectories,
//! Monte-Carlo sample streams, and arm draws are reproducible regardless of
//! query order or thread schedule, and identical across platforms.

/// Stream tags keep independent uses of the same seed decorrelated.
pub mod tag {
    /// Channel gain trajectory draws (`gains_at`).
    pub const GAIN: u64 = 1;
    /// I.i.d. gain draws for Monte-Carlo estimators (`sample_iid`).
    pub const MC: u64 = 2;
    /// Uniform power-profile draws for SE region sampling.
    pub const SE_SAMPLE: u64 = 3;
    /// Categorical arm draws for the Bush-Mosteller automaton.
    pub const ARM: u64 = 4;
}

/// SplitMix64 finalizer: full-avalanche 64-bit mix.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes (seed, tag, a, b, c) into a single well-mixed word.
#[inline]
fn hash(seed: u64, stream: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut s = mix64(seed);
    for w in [stream, a, b, c] {
        s = mix64(s ^ w);
    }
    s
}

/// Uniform double in [0, 1) from the counter (seed, stream, a, b, c).
#[inline]
pub fn uniform(seed: u64, stream: u64, a: u64, b: u64, c: u64) -> f64 {
    // 53 high bits -> [0, 1) with the usual 2^-53 grid.
    (hash(seed, stream, a, b, c) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Exponential draw with the given mean via inversion.
///
/// The 53-bit uniform grid bounds draws to `mean * 53 ln 2`, so the result
/// is finite; callers still clamp-resample against their own floor/cap.
#[inline]
pub fn exponential(mean: f64, seed: u64, stream: u64, a: u64, b: u64, c: u64) -> f64 {
    let u = uniform(seed, stream, a, b, c);
    -mean * (1.0 - u).ln()
}

/// Categorical draw from a probability row (assumed to sum to 1).
///
/// Falls back to the last index if rounding leaves a sliver of mass
/// unassigned.
pub fn categorical(probs: &[f64], seed: u64, stream: u64, a: u64, b: u64) -> usize {
    let u = uniform(seed, stream, a, b, 0);
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}
