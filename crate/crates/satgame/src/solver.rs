//! Efficient satisfaction equilibrium (ESE) under stationary channels.
//!
//! The ESE is the satisfaction equilibrium of minimum total transmit power.
//! Whenever it exists it is the unique profile at which every constraint is
//! tight, `r_i(P) = theta_i` for all users, i.e. the solution of the linear
//! system
//!
//! ```text
//! h_i P_i - (2^theta_i - 1) sum_{j != i} h_j P_j = (2^theta_i - 1) eta
//! ```
//!
//! `solve_ese` solves this system by Gaussian elimination with partial
//! pivoting and is the ground truth. `closed_form_ese` evaluates the
//! analytic solution and exists to cross-validate the elimination path;
//! the two must agree to 1e-9 relative on every nonsingular instance.
//!
//! Existence requires a nonzero determinant and the solution to land inside
//! the strategy space `[0, p_max_i]^N`; a solution outside the box means no
//! ESE exists and is reported as an error, never clamped.

use std::fmt;

use crate::game::{throughputs, GameConfig, PowerVector};
use crate::rng;

/// Relative scale below which the system determinant is treated as zero.
pub const SINGULARITY_RTOL: f64 = 1e-12;

/// Absolute residual allowed on `|r_i(P) - theta_i|` after a solve.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Slack for received-power ties between equal-demand users.
pub const ORDER_SLACK: f64 = 1e-12;

/// Which path produced an [`EseSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Gaussian elimination with partial pivoting (ground truth).
    LinearSolve,
    /// Analytic closed form (cross-check).
    ClosedForm,
}

/// A verified ESE: all demands met with equality, all powers in bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EseSolution {
    pub powers: PowerVector,
    /// Determinant of the system matrix; from pivots for `LinearSolve`,
    /// from the analytic expansion for `ClosedForm`.
    pub determinant: f64,
    pub method: SolveMethod,
}

/// Why no ESE was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    /// `|det A|` fell below the scale-aware threshold; the tight system has
    /// no unique solution.
    SingularSystem { det: f64, threshold: f64 },
    /// The tight solution exists but lies outside `[0, p_max_i]`: no ESE
    /// exists inside the strategy space.
    OutOfBounds { user: usize, power: f64, p_max: f64 },
    /// The candidate solution failed re-verification against the demands.
    ResidualTooLarge { user: usize, residual: f64 },
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SingularSystem { det, threshold } => {
                write!(f, "singular system: |det| = {:.3e} below threshold {:.3e}", det.abs(), threshold)
            }
            Self::OutOfBounds { user, power, p_max } => write!(
                f,
                "no ESE in the strategy space: P[{user}] = {power:.6} outside [0, {p_max}]"
            ),
            Self::ResidualTooLarge { user, residual } => {
                write!(f, "rate residual {residual:.3e} for user {user} exceeds {RESIDUAL_TOL:.0e}")
            }
        }
    }
}

impl std::error::Error for SolverError {}

/// Assembles the tight-constraint system `A P = b`:
/// `a_ii = h_i`, `a_ij = (1 - 2^theta_i) h_j`, `b_i = (2^theta_i - 1) eta`.
pub fn build_system(cfg: &GameConfig) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = cfg.n_users();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        let growth = (2.0f64).powf(cfg.demands[i]) - 1.0;
        for j in 0..n {
            a[i][j] = if i == j { cfg.gains[i] } else { -growth * cfg.gains[j] };
        }
        b[i] = growth * cfg.noise;
    }
    (a, b)
}

/// Determinant of the system matrix from its analytic expansion:
/// `sum_{i<N} h_i (1 - 2^theta_i) prod_{j != i} 2^theta_j h_j
///  + h_N prod_{j<N} 2^theta_j h_j`.
pub fn analytic_determinant(cfg: &GameConfig) -> f64 {
    let n = cfg.n_users();
    let term: Vec<f64> =
        (0..n).map(|j| (2.0f64).powf(cfg.demands[j]) * cfg.gains[j]).collect();
    let mut det = 0.0;
    for i in 0..n - 1 {
        let mut prod = cfg.gains[i] * (1.0 - (2.0f64).powf(cfg.demands[i]));
        for (j, &t) in term.iter().enumerate() {
            if j != i {
                prod *= t;
            }
        }
        det += prod;
    }
    let mut prod = cfg.gains[n - 1];
    for &t in term.iter().take(n - 1) {
        prod *= t;
    }
    det + prod
}

fn singularity_threshold(cfg: &GameConfig) -> f64 {
    SINGULARITY_RTOL * cfg.gains.iter().map(|h| h.abs().max(1.0)).product::<f64>()
}

/// Verifies a candidate tight solution and wraps it.
fn verify(
    cfg: &GameConfig,
    powers: Vec<f64>,
    determinant: f64,
    method: SolveMethod,
) -> Result<EseSolution, SolverError> {
    for (i, &p) in powers.iter().enumerate() {
        if !(p >= 0.0 && p <= cfg.p_max[i]) {
            return Err(SolverError::OutOfBounds { user: i, power: p, p_max: cfg.p_max[i] });
        }
    }
    let pv = PowerVector::from_unchecked(powers);
    let rates = throughputs(cfg, &pv, &cfg.gains);
    for (i, (r, th)) in rates.iter().zip(&cfg.demands).enumerate() {
        let residual = (r - th).abs();
        if residual > RESIDUAL_TOL {
            return Err(SolverError::ResidualTooLarge { user: i, residual });
        }
    }
    Ok(EseSolution { powers: pv, determinant, method })
}

/// Solves the tight system by Gaussian elimination with partial pivoting,
/// then verifies rates and bounds. This is the authoritative ESE path.
pub fn solve_ese(cfg: &GameConfig) -> Result<EseSolution, SolverError> {
    let (mut a, mut b) = build_system(cfg);
    let n = cfg.n_users();
    let threshold = singularity_threshold(cfg);
    let mut det = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("non-empty column");
        if a[pivot_row][col].abs() == 0.0 {
            return Err(SolverError::SingularSystem { det: 0.0, threshold });
        }
        if pivot_row != col {
            a.swap(pivot_row, col);
            b.swap(pivot_row, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            a[row][col] = 0.0;
            for k in col + 1..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    if det.abs() < threshold {
        return Err(SolverError::SingularSystem { det, threshold });
    }
    let mut p = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in row + 1..n {
            acc -= a[row][col] * p[col];
        }
        p[row] = acc / a[row][row];
    }
    verify(cfg, p, det, SolveMethod::LinearSolve)
}

/// Evaluates the analytic ESE:
///
/// ```text
/// P_N = eta (2^theta_N - 1) / ( h_N [ 1 + 2^theta_N sum_{i<N} (2^-theta_i - 1) ] )
/// P_i = (1 - 2^theta_i) / (2^theta_i h_i) * 2^theta_N h_N / (1 - 2^theta_N) * P_N
/// ```
///
/// derived by back-substituting the pairwise relations
/// `2^theta_i h_i P_i / (1 - 2^theta_i) = const` into the row of user `N`.
/// Intended for cross-validation of [`solve_ese`], not as the primary path.
pub fn closed_form_ese(cfg: &GameConfig) -> Result<EseSolution, SolverError> {
    let n = cfg.n_users();
    let det = analytic_determinant(cfg);
    let threshold = singularity_threshold(cfg);
    if det.abs() < threshold {
        return Err(SolverError::SingularSystem { det, threshold });
    }
    let pow2 = |th: f64| (2.0f64).powf(th);
    let t_last = cfg.demands[n - 1];
    let h_last = cfg.gains[n - 1];
    let tail: f64 = (0..n - 1).map(|i| pow2(-cfg.demands[i]) - 1.0).sum();
    let p_last = cfg.noise * (pow2(t_last) - 1.0) / (h_last * (1.0 + pow2(t_last) * tail));
    let mut p = vec![0.0; n];
    p[n - 1] = p_last;
    let last_ratio = pow2(t_last) * h_last / (1.0 - pow2(t_last));
    for i in 0..n - 1 {
        p[i] = (1.0 - pow2(cfg.demands[i])) / (pow2(cfg.demands[i]) * cfg.gains[i])
            * last_ratio
            * p_last;
    }
    verify(cfg, p, det, SolveMethod::ClosedForm)
}

/// Received-power order: demands sorted ascending must give received powers
/// `P_i h_i` sorted ascending (ties allowed within [`ORDER_SLACK`]).
pub fn check_order_property(cfg: &GameConfig, sol: &EseSolution) -> bool {
    let n = cfg.n_users();
    for i in 0..n {
        for j in 0..n {
            if cfg.demands[i] <= cfg.demands[j] {
                let ri = sol.powers[i] * cfg.gains[i];
                let rj = sol.powers[j] * cfg.gains[j];
                if ri > rj + ORDER_SLACK {
                    return false;
                }
            }
        }
    }
    true
}

/// Satisfactory Pareto optimality probe: raising any single user's power by
/// the relative increment `delta` must push at least one opponent below its
/// demand. Vacuously true for a single user.
pub fn check_pareto(cfg: &GameConfig, sol: &EseSolution, delta: f64) -> bool {
    assert!(delta > 0.0, "delta must be positive");
    let n = cfg.n_users();
    if n == 1 {
        return true;
    }
    for i in 0..n {
        let mut probe = sol.powers.as_slice().to_vec();
        probe[i] *= 1.0 + delta;
        let rates = throughputs(cfg, &PowerVector::from_unchecked(probe), &cfg.gains);
        let dissatisfied = (0..n).any(|j| j != i && rates[j] < cfg.demands[j]);
        if !dissatisfied {
            return false;
        }
    }
    true
}

/// Uniformly samples `n_samples` profiles over the strategy box and keeps
/// the satisfaction equilibria among them. Deterministic for a fixed seed;
/// may return fewer than `n_samples` profiles (none, for infeasible games).
pub fn sample_se_region(cfg: &GameConfig, n_samples: u64, seed: u64) -> Vec<PowerVector> {
    let n = cfg.n_users();
    let mut kept = Vec::new();
    for k in 0..n_samples {
        let powers: Vec<f64> = (0..n)
            .map(|i| cfg.p_max[i] * rng::uniform(seed, rng::tag::SE_SAMPLE, k, i as u64, 0))
            .collect();
        let pv = PowerVector::from_unchecked(powers);
        if crate::game::is_satisfied(cfg, &pv, &cfg.gains).iter().all(|&s| s) {
            kept.push(pv);
        }
    }
    kept
}
