//! Solution concepts under random channels.
//!
//! * Robust SE: satisfied for every admissible gain realization. The
//!   universal quantifier is checked on a finite grid; the concept is mostly
//!   a negative result (near-zero gains defeat any finite power).
//! * Efficient long-term SE: minimal powers meeting the demands in
//!   expectation, `rbar_i(P) = theta_i`. Solved by a damped fixed point
//!   driven by a common-random-numbers Monte-Carlo estimator, which turns
//!   the stochastic root-find into a deterministic one.
//! * Chebyshev bound on the satisfaction probability,
//!   `min(1, Var(r_i) / (theta_i - rbar_i)^2)`, reported side by side with
//!   the empirical satisfaction rate. The bound as printed centers the
//!   deviation at `rbar` while bounding a tail at `theta`, so it is
//!   reported, not asserted.

use std::fmt;

use crate::channel::ChannelModel;
use crate::game::{is_satisfied, throughputs, GameConfig, Kahan, PowerVector};
use crate::rng;

/// Gap below which the Chebyshev denominator is degenerate and the bound
/// vacuously 1.
pub const DEGENERATE_GAP: f64 = 1e-12;

/// Tolerance on `|rbar_i - theta_i|` for an accepted LTSE solve.
pub const LTSE_RATE_TOL: f64 = 1e-4;

/// Damping weight of the LTSE fixed-point iteration.
const LTSE_DAMPING: f64 = 0.5;

/// Power-movement threshold declaring the LTSE iteration stationary.
const LTSE_POWER_TOL: f64 = 1e-11;

/// Iteration cap of the LTSE solve.
const LTSE_MAX_ITERS: u64 = 10_000;

/// An accepted efficient-LTSE solve with its moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct LtseResult {
    pub powers: PowerVector,
    /// Monte-Carlo estimate of the expected rate per user.
    pub expected_r: Vec<f64>,
    /// Monte-Carlo estimate of the rate variance per user.
    pub variance: Vec<f64>,
    pub n_samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LtseError {
    /// The damped iteration kept moving after the iteration cap.
    NoConvergence { iters: u64 },
    /// Powers saturated with demands unmet in expectation: the demanded
    /// rates exceed what the sampled average channel can deliver.
    Infeasible { user: usize, expected_r: f64, demand: f64 },
}

impl fmt::Display for LtseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoConvergence { iters } => {
                write!(f, "LTSE iteration did not converge within {iters} iterations")
            }
            Self::Infeasible { user, expected_r, demand } => write!(
                f,
                "infeasible in expectation: user {user} reaches rbar = {expected_r:.6} < theta = {demand:.6} at full power"
            ),
        }
    }
}

impl std::error::Error for LtseError {}

/// Per-user mean and variance of the rate over `n_samples` i.i.d. gain
/// draws (two-pass, compensated; deterministic for fixed seed).
pub fn estimate_moments(
    cfg: &GameConfig,
    p: &PowerVector,
    channel: &ChannelModel,
    n_samples: u64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let n = cfg.n_users();
    let mut mean_acc = vec![Kahan::default(); n];
    for k in 0..n_samples {
        let gains = channel.sample_iid(seed, k);
        for (i, r) in throughputs(cfg, p, &gains).into_iter().enumerate() {
            mean_acc[i].add(r);
        }
    }
    let means: Vec<f64> = mean_acc.iter().map(|a| a.sum() / n_samples as f64).collect();
    let mut var_acc = vec![Kahan::default(); n];
    for k in 0..n_samples {
        let gains = channel.sample_iid(seed, k);
        for (i, r) in throughputs(cfg, p, &gains).into_iter().enumerate() {
            let d = r - means[i];
            var_acc[i].add(d * d);
        }
    }
    let vars = var_acc.iter().map(|a| a.sum() / n_samples as f64).collect();
    (means, vars)
}

/// Mean rates only (one pass of [`estimate_moments`]).
pub fn estimate_mean_rates(
    cfg: &GameConfig,
    p: &PowerVector,
    channel: &ChannelModel,
    n_samples: u64,
    seed: u64,
) -> Vec<f64> {
    let n = cfg.n_users();
    let mut acc = vec![Kahan::default(); n];
    for k in 0..n_samples {
        let gains = channel.sample_iid(seed, k);
        for (i, r) in throughputs(cfg, p, &gains).into_iter().enumerate() {
            acc[i].add(r);
        }
    }
    acc.iter().map(|a| a.sum() / n_samples as f64).collect()
}

/// Robust-SE check: the profile must satisfy every user at every grid point.
pub fn check_rse(cfg: &GameConfig, p: &PowerVector, gain_grid: &[Vec<f64>]) -> bool {
    assert!(!gain_grid.is_empty(), "gain grid must be non-empty");
    gain_grid.iter().all(|gains| is_satisfied(cfg, p, gains).iter().all(|&s| s))
}

/// Number of log-spaced marks per user in the default RSE grid.
const RSE_MARKS: usize = 17;

/// Latin-hypercube size used when the tensor grid would be too large.
const RSE_LHS_POINTS: usize = 10_000;

/// Default grid approximating `(0, h_max]^N`: 17 log-spaced marks per user
/// spanning six decades below `h_max`, as a full tensor product for up to 3
/// users and a seeded Latin hypercube of 10^4 points otherwise.
pub fn default_rse_grid(n_users: usize, h_max: f64, seed: u64) -> Vec<Vec<f64>> {
    assert!(n_users >= 1 && h_max > 0.0);
    let mark = |k: usize| h_max * 10f64.powf(-6.0 * (RSE_MARKS - 1 - k) as f64 / (RSE_MARKS - 1) as f64);
    if n_users <= 3 {
        let total = RSE_MARKS.pow(n_users as u32);
        let mut grid = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut point = Vec::with_capacity(n_users);
            for _ in 0..n_users {
                point.push(mark(idx % RSE_MARKS));
                idx /= RSE_MARKS;
            }
            grid.push(point);
        }
        grid
    } else {
        // One permutation of strata per user, log-uniform within a stratum.
        let mut strata: Vec<Vec<usize>> =
            (0..n_users).map(|_| (0..RSE_LHS_POINTS).collect()).collect();
        for (u, perm) in strata.iter_mut().enumerate() {
            for k in (1..RSE_LHS_POINTS).rev() {
                let j = (rng::uniform(seed, 5, u as u64, k as u64, 0) * (k + 1) as f64) as usize;
                perm.swap(k, j.min(k));
            }
        }
        (0..RSE_LHS_POINTS)
            .map(|row| {
                (0..n_users)
                    .map(|u| {
                        let stratum = strata[u][row] as f64
                            + rng::uniform(seed, 6, u as u64, row as u64, 0);
                        h_max * 10f64.powf(-6.0 * (1.0 - stratum / RSE_LHS_POINTS as f64))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Finds the power profile meeting every demand in expectation,
/// `rbar_i(P) = theta_i`, by a damped multiplicative fixed point evaluated
/// against a fixed-seed estimator (common random numbers across candidate
/// profiles). Deterministic for fixed `(channel, n_samples, seed)`.
pub fn solve_efficient_ltse(
    cfg: &GameConfig,
    channel: &ChannelModel,
    n_samples: u64,
    seed: u64,
) -> Result<LtseResult, LtseError> {
    let n = cfg.n_users();
    let mut powers: Vec<f64> =
        (0..n).map(|i| (cfg.noise / cfg.gains[i]).min(cfg.p_max[i])).collect();
    let mut iters = 0u64;
    loop {
        let pv = PowerVector::from_unchecked(powers.clone());
        let mean_r = estimate_mean_rates(cfg, &pv, channel, n_samples, seed);
        let mut moved = 0.0f64;
        for i in 0..n {
            let target = powers[i] * cfg.demands[i] / mean_r[i].max(1e-12);
            let next = ((1.0 - LTSE_DAMPING) * powers[i] + LTSE_DAMPING * target)
                .clamp(0.0, cfg.p_max[i]);
            moved = moved.max((next - powers[i]).abs());
            powers[i] = next;
        }
        iters += 1;
        if moved < LTSE_POWER_TOL {
            let pv = PowerVector::from_unchecked(powers.clone());
            let (expected_r, variance) = estimate_moments(cfg, &pv, channel, n_samples, seed);
            for i in 0..n {
                if (expected_r[i] - cfg.demands[i]).abs() > LTSE_RATE_TOL {
                    if powers[i] >= cfg.p_max[i] && expected_r[i] < cfg.demands[i] {
                        return Err(LtseError::Infeasible {
                            user: i,
                            expected_r: expected_r[i],
                            demand: cfg.demands[i],
                        });
                    }
                    return Err(LtseError::NoConvergence { iters });
                }
            }
            return Ok(LtseResult { powers: pv, expected_r, variance, n_samples, seed });
        }
        if iters >= LTSE_MAX_ITERS {
            return Err(LtseError::NoConvergence { iters });
        }
    }
}

/// Chebyshev-style bound on the probability of meeting the demand:
/// `min(1, var / (theta - mean)^2)`; vacuously 1 when the gap is degenerate.
pub fn chebyshev_bound(theta: f64, mean_r: f64, var_r: f64) -> f64 {
    debug_assert!(var_r >= 0.0);
    let gap = theta - mean_r;
    if gap.abs() < DEGENERATE_GAP {
        return 1.0;
    }
    (var_r / (gap * gap)).min(1.0)
}

/// Fraction of sampled gain realizations satisfying each user at `p`.
pub fn empirical_satisfaction_rate(
    cfg: &GameConfig,
    p: &PowerVector,
    channel: &ChannelModel,
    n_samples: u64,
    seed: u64,
) -> Vec<f64> {
    assert!(n_samples >= 1);
    let n = cfg.n_users();
    let mut hits = vec![0u64; n];
    for k in 0..n_samples {
        let gains = channel.sample_iid(seed, k);
        for (i, sat) in is_satisfied(cfg, p, &gains).into_iter().enumerate() {
            if sat {
                hits[i] += 1;
            }
        }
    }
    hits.into_iter().map(|h| h as f64 / n_samples as f64).collect()
}

/// Consistency between an LTSE solve under a point-mass channel and the
/// stationary ESE path; used by tests and the acceptance suite.
pub fn stationary_collapse_gap(cfg: &GameConfig, result: &LtseResult) -> f64 {
    match crate::solver::solve_ese(cfg) {
        Ok(sol) => (0..cfg.n_users())
            .map(|i| (sol.powers[i] - result.powers[i]).abs())
            .fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelKind;

    fn cfg(gains: &[f64], demands: &[f64]) -> GameConfig {
        let n = gains.len();
        GameConfig::new(gains.to_vec(), 1.0, demands.to_vec(), vec![10.0; n], 10.0).unwrap()
    }

    fn stationary(gains: &[f64]) -> ChannelModel {
        ChannelModel::new(ChannelKind::Stationary, gains.to_vec(), 1.0, 0).unwrap()
    }

    fn fading(n: usize, seed: u64) -> ChannelModel {
        ChannelModel::new(ChannelKind::FastFading, vec![1.0; n], 1.0, seed).unwrap()
    }

    #[test]
    fn chebyshev_direct_values() {
        assert!((chebyshev_bound(1.5, 0.5, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(chebyshev_bound(1.5, 0.5, 2.0), 1.0);
        assert_eq!(chebyshev_bound(1.5, 0.5, 0.0), 0.0);
        assert_eq!(chebyshev_bound(0.5, 0.5 + 1e-13, 0.3), 1.0, "degenerate gap is vacuous");
    }

    #[test]
    fn chebyshev_monotonicity() {
        let mut prev = 0.0;
        for k in 1..=20 {
            let b = chebyshev_bound(1.0, 0.0, 0.04 * k as f64);
            assert!(b >= prev);
            prev = b;
        }
        let mut prev = 1.0;
        for k in 1..=20 {
            let b = chebyshev_bound(0.2 * k as f64, 0.0, 0.5);
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn rse_rejects_near_zero_gain() {
        let c = cfg(&[1.0, 1.0], &[0.4, 0.4]);
        let p = PowerVector::from_unchecked(vec![5.0, 5.0]);
        let grid = vec![vec![1.0, 1.0], vec![1e-9, 1.0]];
        assert!(!check_rse(&c, &p, &grid));
    }

    #[test]
    fn rse_at_ese_on_nominal_point_grid() {
        // Demands pinned to the exact rates at p so the boundary holds.
        let base = cfg(&[1.0, 1.0], &[0.4, 0.4]);
        let p = PowerVector::from_unchecked(vec![0.9, 0.9]);
        let rates = throughputs(&base, &p, &[1.0, 1.0]);
        let c = cfg(&[1.0, 1.0], &rates);
        assert!(check_rse(&c, &p, &[vec![1.0, 1.0]]));
    }

    #[test]
    fn rse_single_point_grid_equals_is_satisfied() {
        let c = cfg(&[1.0, 1.0], &[0.3, 0.3]);
        for powers in [[0.2, 0.2], [2.0, 2.0], [0.2, 5.0]] {
            let p = PowerVector::from_unchecked(powers.to_vec());
            let all = is_satisfied(&c, &p, &c.gains).iter().all(|&s| s);
            assert_eq!(check_rse(&c, &p, &[c.gains.clone()]), all);
        }
    }

    #[test]
    fn default_grid_shapes() {
        let g2 = default_rse_grid(2, 1.0, 1);
        assert_eq!(g2.len(), 17 * 17);
        assert!(g2.iter().all(|pt| pt.len() == 2));
        assert!(g2.iter().flatten().all(|&h| h > 0.0 && h <= 1.0));
        let g5 = default_rse_grid(5, 2.0, 1);
        assert_eq!(g5.len(), 10_000);
        assert!(g5.iter().flatten().all(|&h| h > 0.0 && h <= 2.0));
    }

    #[test]
    fn ltse_collapses_to_ese_on_point_mass_channel() {
        let c = cfg(&[1.0, 1.0, 1.0], &[0.1, 0.2, 0.3]);
        let ch = stationary(&[1.0, 1.0, 1.0]);
        let res = solve_efficient_ltse(&c, &ch, 10, 42).unwrap();
        assert!(stationary_collapse_gap(&c, &res) < 1e-6);
        for i in 0..3 {
            assert!((res.expected_r[i] - c.demands[i]).abs() <= LTSE_RATE_TOL);
            assert_eq!(res.variance[i], 0.0);
        }
    }

    #[test]
    fn ltse_inverts_the_monte_carlo_oracle() {
        // theta set to the CRN estimate of rbar at P=1 must be solved by
        // P ~= 1 under the same seed.
        let ch = fading(1, 9);
        let seed = 777u64;
        let n_samples = 20_000u64;
        let base = cfg(&[1.0], &[0.5]);
        let probe = PowerVector::from_unchecked(vec![1.0]);
        let theta = estimate_mean_rates(&base, &probe, &ch, n_samples, seed)[0];
        let c = cfg(&[1.0], &[theta]);
        let res = solve_efficient_ltse(&c, &ch, n_samples, seed).unwrap();
        assert!((res.powers[0] - 1.0).abs() < 1e-6, "P = {}", res.powers[0]);
        assert!((res.expected_r[0] - theta).abs() <= LTSE_RATE_TOL);
    }

    #[test]
    fn ltse_detects_infeasible_demands() {
        let c = GameConfig::new(vec![1.0], 1.0, vec![5.0], vec![2.0], 10.0).unwrap();
        let ch = fading(1, 3);
        match solve_efficient_ltse(&c, &ch, 2_000, 5) {
            Err(LtseError::Infeasible { user: 0, .. }) => {}
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn variance_identity_against_raw_moments() {
        let c = cfg(&[1.0, 1.0], &[0.4, 0.4]);
        let p = PowerVector::from_unchecked(vec![1.0, 2.0]);
        let ch = fading(2, 21);
        let n = 100_000u64;
        let seed = 4242u64;
        let (means, vars) = estimate_moments(&c, &p, &ch, n, seed);
        for i in 0..2 {
            let mut sq = Kahan::default();
            for k in 0..n {
                let g = ch.sample_iid(seed, k);
                let r = throughputs(&c, &p, &g)[i];
                sq.add(r * r);
            }
            let raw_var = sq.sum() / n as f64 - means[i] * means[i];
            assert!((raw_var - vars[i]).abs() <= 1e-12, "gap {}", (raw_var - vars[i]).abs());
        }
    }

    #[test]
    fn empirical_rate_point_mass_extremes() {
        let base = cfg(&[1.0, 1.0], &[0.4, 0.4]);
        let ch = stationary(&[1.0, 1.0]);
        let good = PowerVector::from_unchecked(vec![2.0, 2.0]);
        let rates = throughputs(&base, &good, &[1.0, 1.0]);
        assert!(rates.iter().zip(&base.demands).all(|(r, t)| r >= t));
        assert_eq!(empirical_satisfaction_rate(&base, &good, &ch, 100, 1), vec![1.0, 1.0]);
        let bad = PowerVector::from_unchecked(vec![0.05, 0.05]);
        assert_eq!(empirical_satisfaction_rate(&base, &bad, &ch, 100, 1), vec![0.0, 0.0]);
    }

    #[test]
    fn empirical_rate_fading_is_interior() {
        let ch = fading(1, 9);
        let seed = 777u64;
        let base = cfg(&[1.0], &[0.5]);
        let probe = PowerVector::from_unchecked(vec![1.0]);
        let theta = estimate_mean_rates(&base, &probe, &ch, 20_000, seed)[0];
        let c = cfg(&[1.0], &[theta]);
        let rate = empirical_satisfaction_rate(&c, &probe, &ch, 20_000, seed)[0];
        assert!(rate > 0.0 && rate < 1.0, "rate {rate}");
    }

    #[test]
    fn reduced_power_reduces_lipschitz_envelope() {
        // The proof-side envelope (k P + c)^2 shrinks with P; the raw second
        // moment E[(r - theta)^2] is estimated alongside but not asserted
        // monotone (its direction near the constraint point is an open
        // reading of the source material).
        let envelope = |k: f64, c: f64, p: f64| (k * p + c) * (k * p + c);
        let ch = fading(1, 9);
        let seed = 31u64;
        let base = cfg(&[1.0], &[0.5]);
        let theta = estimate_mean_rates(
            &base,
            &PowerVector::from_unchecked(vec![1.0]),
            &ch,
            20_000,
            seed,
        )[0];
        let c = cfg(&[1.0], &[theta]);
        let mut prev_env = f64::INFINITY;
        for scale in [1.0, 0.8, 0.6, 0.4] {
            let env = envelope(0.5, 0.1, scale);
            assert!(env < prev_env, "envelope must shrink with P");
            prev_env = env;
            let p = PowerVector::from_unchecked(vec![scale]);
            let (mean, var) = estimate_moments(&c, &p, &ch, 5_000, seed);
            let second_moment = var[0] + (mean[0] - theta) * (mean[0] - theta);
            assert!(second_moment.is_finite() && second_moment >= 0.0);
        }
    }
}
