//! Satisfaction-game power control for shared uplink channels.
//!
//! Users sharing one channel each demand a target rate; a profile meeting
//! every demand is a satisfaction equilibrium (SE), and the SE of minimum
//! total transmit power — the efficient satisfaction equilibrium (ESE) — is
//! the profile where every demand is met with equality. The crate provides:
//!
//! * the game model: SINR, Shannon rates, satisfaction and feasibility
//!   checks ([`game`]);
//! * exact ESE computation under stationary channels, by Gaussian
//!   elimination cross-checked against the analytic closed form
//!   ([`solver`]);
//! * stationary, block-fading, and fast-fading channel generators with
//!   counter-based reproducible draws ([`channel`]);
//! * four distributed learners — Banach-Picard, progressive Banach-Picard
//!   for capacity discovery, a Bush-Mosteller automaton over discrete power
//!   levels, and Mann iterates for fading channels ([`learn`]);
//! * long-term satisfaction analysis under random channels: robust-SE
//!   checks, the efficient LTSE solve, Chebyshev bounds and empirical
//!   satisfaction rates ([`ltse`]);
//! * a scenario-driven simulation harness with CSV traces and a CLI
//!   ([`scenario`], [`sim`]).
//!
//! Everything random is keyed by explicit seeds and counter-based streams:
//! identical scenarios produce byte-identical traces.

pub mod channel;
pub mod game;
pub mod learn;
pub mod ltse;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use channel::{ChannelKind, ChannelModel};
pub use game::{
    expected_throughput, feasibility_check, is_satisfied, sinr, throughput, throughputs,
    GameConfig, GameError, PowerVector,
};
pub use learn::{
    bm_sample, bm_step, bp_progressive_step, bp_step, has_converged, mann_step, KindState,
    LearnerParams, LearnerState,
};
pub use ltse::{
    chebyshev_bound, check_rse, default_rse_grid, empirical_satisfaction_rate,
    estimate_mean_rates, estimate_moments, solve_efficient_ltse, LtseError, LtseResult,
};
pub use scenario::{read_scenario, write_scenario, AlgorithmKind, Scenario, ScenarioError};
pub use sim::{run, write_trace, SimulationTrace, Summary, TraceRow};
pub use solver::{
    analytic_determinant, build_system, check_order_property, check_pareto, closed_form_ese,
    sample_se_region, solve_ese, EseSolution, SolveMethod, SolverError,
};
