//! Fully distributed learning rules.
//!
//! Four learners share one state shape and a step-per-iteration interface:
//!
//! * Banach-Picard: multiplicative fixed-point update `P <- P * theta / r`.
//! * Progressive Banach-Picard: same update, plus demand growth by `epsilon`
//!   whenever a user is satisfied and the capacity allows, to discover the
//!   network's demand ceiling.
//! * Bush-Mosteller: probability-vector automaton over a discrete power set,
//!   reward-inaction reinforcement of the chosen level.
//! * Mann iterates: damped fixed point driven by an exponentially smoothed
//!   throughput forecast, for fast-fading channels.
//!
//! Each user's update reads only that user's own power, demand, and observed
//! payoff; the per-user helpers take scalars, so the rules cannot peek at
//! opponents by construction.

use crate::rng;

/// Observed payoffs of zero would make multiplicative updates blow up; the
/// floor stands in for them.
pub const RATE_FLOOR: f64 = 1e-9;

/// Tuning knobs shared by the learners.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerParams {
    /// Demand increment of the progressive rule.
    pub epsilon: f64,
    /// Step size of the probability updating rule.
    pub zeta: f64,
    /// Averaging weight of the Mann power update.
    pub lambda: f64,
    /// Forecast smoothing weight of the Mann rule.
    pub mu: f64,
    /// Convergence threshold on consecutive power profiles.
    pub rho: f64,
    /// Iteration cap for solver-style loops built on these rules.
    pub max_iters: u64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self { epsilon: 0.1, zeta: 0.1, lambda: 0.1, mu: 0.1, rho: 1e-6, max_iters: 10_000 }
    }
}

/// Per-algorithm extra state.
#[derive(Debug, Clone, PartialEq)]
pub enum KindState {
    BanachPicard,
    ProgressiveBp,
    BushMosteller {
        /// Discrete power levels per user.
        levels: Vec<Vec<f64>>,
        /// Row-stochastic choice probabilities, one row per user.
        arm_probs: Vec<Vec<f64>>,
        /// Running maximum of `|theta_i - r_i|` per user.
        max_dev: Vec<f64>,
        /// Arm currently played by each user.
        arms: Vec<usize>,
    },
    Mann {
        /// Smoothed throughput forecast per user.
        forecast: Vec<f64>,
    },
}

/// Mutable learner state owned by one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub powers: Vec<f64>,
    /// Working copy of the demands; the progressive rule and demand-change
    /// events mutate it.
    pub demands: Vec<f64>,
    pub p_max: Vec<f64>,
    pub params: LearnerParams,
    pub kind: KindState,
}

impl LearnerState {
    pub fn n_users(&self) -> usize {
        self.powers.len()
    }
}

/// One Banach-Picard update for one user: `clamp(P * theta / r, 0, p_max)`.
#[inline]
pub fn bp_update(power: f64, demand: f64, observed_rate: f64, p_max: f64) -> f64 {
    let r = observed_rate.max(RATE_FLOOR);
    (power * demand / r).clamp(0.0, p_max)
}

/// One Mann update for one user:
/// `clamp((1 - lambda) P + lambda P theta / r_hat, 0, p_max)`.
#[inline]
pub fn mann_update(power: f64, demand: f64, forecast: f64, lambda: f64, p_max: f64) -> f64 {
    let r_hat = forecast.max(RATE_FLOOR);
    ((1.0 - lambda) * power + lambda * power * demand / r_hat).clamp(0.0, p_max)
}

/// Exponential smoothing of the forecast toward the observation.
#[inline]
pub fn smooth_forecast(forecast: f64, observed_rate: f64, mu: f64) -> f64 {
    forecast + mu * (observed_rate - forecast)
}

/// Banach-Picard step over all users.
pub fn bp_step(state: &mut LearnerState, observed_r: &[f64]) {
    debug_assert_eq!(observed_r.len(), state.n_users());
    for i in 0..state.n_users() {
        state.powers[i] = bp_update(state.powers[i], state.demands[i], observed_r[i], state.p_max[i]);
    }
}

/// Progressive Banach-Picard step: the power update of [`bp_step`], then for
/// every user observed within `rho` of its demand, a demand bump of
/// `epsilon` as long as the running total stays within `capacity`.
///
/// Returns whether any demand changed.
pub fn bp_progressive_step(state: &mut LearnerState, observed_r: &[f64], capacity: f64) -> bool {
    bp_step(state, observed_r);
    let eps = state.params.epsilon;
    let rho = state.params.rho;
    let mut changed = false;
    let mut total: f64 = state.demands.iter().sum();
    for i in 0..state.n_users() {
        if (observed_r[i] - state.demands[i]).abs() <= rho && total + eps <= capacity {
            state.demands[i] += eps;
            total += eps;
            changed = true;
        }
    }
    changed
}

/// Reward-inaction reinforcement of one user's probability row.
///
/// The environment signal is the normalized closeness to satisfaction,
/// `beta = 1 - |theta - r| / m` with `m` the running maximum deviation
/// (updated first, so the ratio never exceeds 1). The chosen arm gains
/// `zeta * beta * sum_{k != chosen} p_k`, every other arm loses
/// `zeta * beta * p_k`; the gain equals the sum of the losses, so the row
/// stays on the simplex by construction.
///
/// A maximal deviation (`beta = 0`) leaves the row unchanged; an exactly
/// satisfied user (`beta = 1`) reinforces its chosen arm at the full rate.
#[inline]
pub fn bm_row_update(row: &mut [f64], chosen: usize, deviation: f64, max_dev: &mut f64, zeta: f64) {
    *max_dev = max_dev.max(deviation);
    let ratio = if *max_dev > 0.0 { deviation / *max_dev } else { 0.0 };
    let step = zeta * (1.0 - ratio);
    if step == 0.0 {
        return;
    }
    let mut gain = 0.0;
    for (k, p) in row.iter_mut().enumerate() {
        if k != chosen {
            let loss = step * *p;
            *p = (*p - loss).max(0.0);
            gain += loss;
        }
    }
    // Rounding near a point mass can overshoot 1 by an ulp.
    row[chosen] = (row[chosen] + gain).min(1.0);
}

/// Bush-Mosteller step over all users: updates each running maximum
/// deviation, then each probability row. Panics if the state is not a
/// Bush-Mosteller learner.
pub fn bm_step(state: &mut LearnerState, chosen_arms: &[usize], observed_r: &[f64]) {
    let n = state.n_users();
    debug_assert_eq!(chosen_arms.len(), n);
    debug_assert_eq!(observed_r.len(), n);
    let zeta = state.params.zeta;
    let KindState::BushMosteller { arm_probs, max_dev, .. } = &mut state.kind else {
        panic!("bm_step on a non-Bush-Mosteller learner");
    };
    for i in 0..n {
        let deviation = (state.demands[i] - observed_r[i]).abs();
        bm_row_update(&mut arm_probs[i], chosen_arms[i], deviation, &mut max_dev[i], zeta);
    }
}

/// Draws the next arm of `user` from its probability row, deterministically
/// in `(seed, user, t)`.
pub fn bm_sample(state: &LearnerState, user: usize, seed: u64, t: u64) -> usize {
    let KindState::BushMosteller { arm_probs, .. } = &state.kind else {
        panic!("bm_sample on a non-Bush-Mosteller learner");
    };
    rng::categorical(&arm_probs[user], seed, rng::tag::ARM, user as u64, t)
}

/// Mann step over all users: damped power update against the forecast, then
/// forecast smoothing toward the observation. Panics if the state is not a
/// Mann learner.
pub fn mann_step(state: &mut LearnerState, observed_r: &[f64]) {
    let n = state.n_users();
    debug_assert_eq!(observed_r.len(), n);
    let lambda = state.params.lambda;
    let mu = state.params.mu;
    let KindState::Mann { forecast } = &mut state.kind else {
        panic!("mann_step on a non-Mann learner");
    };
    for i in 0..n {
        state.powers[i] =
            mann_update(state.powers[i], state.demands[i], forecast[i], lambda, state.p_max[i]);
        forecast[i] = smooth_forecast(forecast[i], observed_r[i], mu);
    }
}

/// Stopping test: every user's power moved by less than `rho`.
pub fn has_converged(state: &LearnerState, prev_powers: &[f64]) -> bool {
    state
        .powers
        .iter()
        .zip(prev_powers)
        .all(|(p, q)| (p - q).abs() < state.params.rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bp_state(powers: &[f64], demands: &[f64], p_max: &[f64]) -> LearnerState {
        LearnerState {
            powers: powers.to_vec(),
            demands: demands.to_vec(),
            p_max: p_max.to_vec(),
            params: LearnerParams::default(),
            kind: KindState::BanachPicard,
        }
    }

    fn bm_state(probs: Vec<Vec<f64>>, demands: &[f64]) -> LearnerState {
        let n = probs.len();
        let levels = vec![vec![0.1, 0.2, 0.3]; n];
        LearnerState {
            powers: vec![0.1; n],
            demands: demands.to_vec(),
            p_max: vec![10.0; n],
            params: LearnerParams::default(),
            kind: KindState::BushMosteller {
                levels,
                arm_probs: probs,
                max_dev: vec![0.0; n],
                arms: vec![0; n],
            },
        }
    }

    #[test]
    fn bp_single_user_example() {
        let mut st = bp_state(&[2.0], &[1.0], &[10.0]);
        let r = 3.0f64.log2();
        bp_step(&mut st, &[r]);
        assert!((st.powers[0] - 2.0 / r).abs() < 1e-12);
        assert!((st.powers[0] - 1.26186).abs() < 1e-5);
    }

    #[test]
    fn bp_fixed_point_when_satisfied_exactly() {
        let mut st = bp_state(&[1.7, 0.4], &[0.9, 0.3], &[10.0; 2]);
        bp_step(&mut st, &[0.9, 0.3]);
        assert_eq!(st.powers, vec![1.7, 0.4]);
    }

    #[test]
    fn bp_clamps_to_p_max() {
        let mut st = bp_state(&[5.0], &[3.0], &[10.0]);
        bp_step(&mut st, &[1.0]);
        assert_eq!(st.powers[0], 10.0);
    }

    #[test]
    fn bp_zero_rate_uses_floor() {
        let mut st = bp_state(&[1.0], &[0.5], &[10.0]);
        bp_step(&mut st, &[0.0]);
        assert_eq!(st.powers[0], 10.0); // 1.0 * 0.5 / 1e-9 clamps to p_max
    }

    #[test]
    fn bp_single_user_converges_within_60_iterations() {
        // Scalar oracle recursion P <- P / log2(1 + P) toward the fixed
        // point P = 1, run side by side with the learner.
        let mut st = bp_state(&[2.0], &[1.0], &[10.0]);
        let mut oracle = 2.0f64;
        let mut iters = 0;
        loop {
            let prev = st.powers.clone();
            let r = (1.0 + st.powers[0]).log2();
            bp_step(&mut st, &[r]);
            oracle /= (1.0 + oracle).log2();
            iters += 1;
            assert!((st.powers[0] - oracle).abs() < 1e-12);
            if has_converged(&st, &prev) {
                break;
            }
            assert!(iters < 60, "no convergence after 60 iterations");
        }
        assert!(iters <= 60);
        assert!((st.powers[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn progressive_bumps_satisfied_user_by_epsilon() {
        let mut st = bp_state(&[1.0, 1.0], &[0.3, 0.4], &[10.0; 2]);
        st.kind = KindState::ProgressiveBp;
        let changed = bp_progressive_step(&mut st, &[0.3, 0.2], 10.0);
        assert!(changed);
        assert!((st.demands[0] - 0.4).abs() < 1e-15); // satisfied: bumped
        assert!((st.demands[1] - 0.4).abs() < 1e-15); // not satisfied: kept
    }

    #[test]
    fn progressive_freezes_at_capacity() {
        let mut st = bp_state(&[1.0, 1.0], &[0.5, 0.5], &[10.0; 2]);
        st.kind = KindState::ProgressiveBp;
        for _ in 0..5 {
            let changed = bp_progressive_step(&mut st, &[0.5, 0.5], 1.0);
            assert!(!changed, "sum(theta) == C: demands must never change");
            assert_eq!(st.demands, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn progressive_demands_monotone_and_capped() {
        let mut st = bp_state(&[1.0; 3], &[0.1, 0.2, 0.3], &[10.0; 3]);
        st.kind = KindState::ProgressiveBp;
        let capacity = 1.4;
        let mut prev = st.demands.clone();
        for _ in 0..50 {
            // Pretend every user is always satisfied.
            let r = st.demands.clone();
            bp_progressive_step(&mut st, &r, capacity);
            for i in 0..3 {
                assert!(st.demands[i] >= prev[i]);
            }
            assert!(st.demands.iter().sum::<f64>() <= capacity + 1e-12);
            prev = st.demands.clone();
        }
        // Rounding in the running total can stop growth one increment shy
        // of C; anything inside (C - epsilon, C] is a completed discovery.
        let total: f64 = st.demands.iter().sum();
        assert!(total > capacity - st.params.epsilon - 1e-12);
        assert!(total <= capacity + 1e-12);
    }

    #[test]
    fn bm_satisfied_user_reinforces_chosen_arm() {
        // Zero deviation is the full-reward case: the chosen arm gains
        // zeta * sum(others), here 0.1 * 2/3.
        let mut st = bm_state(vec![vec![1.0 / 3.0; 3]], &[0.5]);
        bm_step(&mut st, &[0], &[0.5]);
        let KindState::BushMosteller { arm_probs, .. } = &st.kind else { unreachable!() };
        assert!((arm_probs[0][0] - 0.4).abs() < 1e-12);
        assert!((arm_probs[0][1] - 0.3).abs() < 1e-12);
        assert!((arm_probs[0][2] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn bm_maximal_deviation_is_inaction() {
        let mut st = bm_state(vec![vec![0.5, 0.25, 0.25]], &[0.5]);
        // First observation: deviation 0.3 becomes the running maximum, so
        // the ratio is 1 and the row must not move.
        bm_step(&mut st, &[1], &[0.2]);
        let KindState::BushMosteller { arm_probs, max_dev, .. } = &st.kind else { unreachable!() };
        assert_eq!(arm_probs[0], vec![0.5, 0.25, 0.25]);
        assert!((max_dev[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bm_partial_deviation_interpolates() {
        let mut st = bm_state(vec![vec![0.5, 0.25, 0.25]], &[0.5]);
        bm_step(&mut st, &[1], &[0.2]); // sets max_dev = 0.3, no move
        bm_step(&mut st, &[0], &[0.35]); // deviation 0.15, beta = 0.5
        let KindState::BushMosteller { arm_probs, .. } = &st.kind else { unreachable!() };
        let step = 0.1 * 0.5;
        let expect = [0.5 + step * 0.5, 0.25 * (1.0 - step), 0.25 * (1.0 - step)];
        for k in 0..3 {
            assert!((arm_probs[0][k] - expect[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn bm_rows_stay_on_simplex() {
        let mut st = bm_state(vec![vec![1.0 / 3.0; 3]; 3], &[0.1, 0.2, 0.3]);
        for t in 0..5_000u64 {
            let arms: Vec<usize> = (0..3).map(|u| bm_sample(&st, u, 99, t)).collect();
            let r = [
                0.1 + 0.25 * rng::uniform(1, 77, t, 0, 0),
                0.1 + 0.25 * rng::uniform(1, 77, t, 1, 0),
                0.1 + 0.25 * rng::uniform(1, 77, t, 2, 0),
            ];
            bm_step(&mut st, &arms, &r);
            let KindState::BushMosteller { arm_probs, .. } = &st.kind else { unreachable!() };
            for row in arm_probs {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12, "row sum {sum}");
                assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }

    #[test]
    fn bm_sample_point_masses() {
        let st = bm_state(vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]], &[0.5, 0.5]);
        for t in 0..100 {
            assert_eq!(bm_sample(&st, 0, 42, t), 0);
            assert_eq!(bm_sample(&st, 1, 42, t), 2);
        }
    }

    #[test]
    fn bm_sample_uniform_frequencies() {
        let st = bm_state(vec![vec![1.0 / 3.0; 3]], &[0.5]);
        let n = 100_000u64;
        let mut counts = [0u64; 3];
        for t in 0..n {
            counts[bm_sample(&st, 0, 4242, t)] += 1;
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((0.32..=0.35).contains(&freq), "arm frequency {freq}");
        }
    }

    #[test]
    fn mann_with_unit_lambda_matches_banach_picard() {
        let forecast = vec![0.7, 0.25];
        let mut mann = LearnerState {
            powers: vec![1.5, 0.8],
            demands: vec![0.5, 0.3],
            p_max: vec![10.0; 2],
            params: LearnerParams { lambda: 1.0, mu: 0.0, ..Default::default() },
            kind: KindState::Mann { forecast: forecast.clone() },
        };
        let mut bp = bp_state(&[1.5, 0.8], &[0.5, 0.3], &[10.0; 2]);
        mann_step(&mut mann, &[0.7, 0.25]);
        bp_step(&mut bp, &forecast);
        assert_eq!(mann.powers, bp.powers);
    }

    #[test]
    fn mann_half_lambda_example() {
        let r = 3.0f64.log2();
        let mut st = LearnerState {
            powers: vec![2.0],
            demands: vec![1.0],
            p_max: vec![10.0],
            params: LearnerParams { lambda: 0.5, ..Default::default() },
            kind: KindState::Mann { forecast: vec![r] },
        };
        mann_step(&mut st, &[r]);
        let expect = 0.5 * 2.0 + 0.5 * (2.0 / r);
        assert!((st.powers[0] - expect).abs() < 1e-12);
        assert!((st.powers[0] - 1.63093).abs() < 1e-5);
    }

    #[test]
    fn mann_joint_fixed_point() {
        let mut st = LearnerState {
            powers: vec![1.2],
            demands: vec![0.4],
            p_max: vec![10.0],
            params: LearnerParams::default(),
            kind: KindState::Mann { forecast: vec![0.4] },
        };
        mann_step(&mut st, &[0.4]);
        assert!((st.powers[0] - 1.2).abs() < 1e-15);
        let KindState::Mann { forecast } = &st.kind else { unreachable!() };
        assert_eq!(forecast, &vec![0.4]);
    }

    #[test]
    fn convergence_threshold_is_strict() {
        let st = bp_state(&[1.0, 2.0], &[0.5; 2], &[10.0; 2]);
        assert!(has_converged(&st, &[1.0, 2.0]));
        let rho = st.params.rho;
        assert!(!has_converged(&st, &[1.0, 2.0 + 2.0 * rho]));
    }
}
