//! Simulation loop and trace recording.
//!
//! One iteration at time `t`: draw the gain vector, observe every user's
//! rate at the powers chosen for `t` (simultaneous play), record one row per
//! user, then apply the scenario's learner step and any demand changes
//! scheduled at `t`. When the powers stop moving (and demands are frozen and
//! no events are pending) one closing row is recorded at `t + 1` so the
//! trace ends with the converged profile.
//!
//! Runs never fail on divergence: an infeasible game simply saturates at
//! `p_max` and is reported unsatisfied in the summary.

use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use crate::channel::ChannelModel;
use crate::game::{throughputs, GameConfig, PowerVector};
use crate::learn::{
    bm_sample, bm_step, bp_progressive_step, bp_step, mann_step, KindState, LearnerState,
};
use crate::scenario::{AlgorithmKind, Scenario, ScenarioError};

/// One observation: user `user`'s view of iteration `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub user: usize,
    pub power_mw: f64,
    pub gain: f64,
    pub throughput: f64,
    pub demand: f64,
    pub satisfied: bool,
}

/// End-of-run digest.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// The last two recorded power profiles differ by less than `rho` on
    /// every component.
    pub converged: bool,
    /// Time index of the closing row when the run stopped early.
    pub t_converge: Option<u64>,
    /// Sum of final transmit powers.
    pub final_total_power: f64,
    /// Final per-user rates.
    pub final_rates: Vec<f64>,
    /// Final per-user demands (after any growth or scheduled changes).
    pub final_demands: Vec<f64>,
    /// Every user satisfied in the closing row.
    pub all_satisfied: bool,
    /// Every user transmitting at its maximum power in the closing row.
    pub saturated: bool,
}

/// Time-indexed record of a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub n_users: usize,
    pub rows: Vec<TraceRow>,
    pub summary: Summary,
}

impl SimulationTrace {
    /// Power profile recorded at time `t`.
    pub fn profile_at(&self, t: u64) -> Vec<f64> {
        self.rows.iter().filter(|r| r.t == t).map(|r| r.power_mw).collect()
    }

    /// Largest recorded time index.
    pub fn last_t(&self) -> u64 {
        self.rows.last().map(|r| r.t).unwrap_or(0)
    }
}

/// A stepping simulation; [`run`] is the plain whole-run wrapper.
pub struct Simulation {
    cfg: GameConfig,
    channel: ChannelModel,
    kind: AlgorithmKind,
    state: LearnerState,
    seed: u64,
    horizon: u64,
    events: Vec<crate::scenario::DemandChange>,
    next_event: usize,
    t: u64,
    rows: Vec<TraceRow>,
    stopped_at: Option<u64>,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let cfg = scenario.game_config()?;
        let channel = scenario.channel_model()?;
        let n = cfg.n_users();
        let params = scenario.algorithm.params;
        let kind_state = match scenario.algorithm.kind {
            AlgorithmKind::BanachPicard => KindState::BanachPicard,
            AlgorithmKind::ProgressiveBp => KindState::ProgressiveBp,
            AlgorithmKind::BushMosteller => {
                let levels = scenario.discrete_levels.clone().expect("validated");
                KindState::BushMosteller {
                    arm_probs: levels.iter().map(|row| vec![1.0 / row.len() as f64; row.len()]).collect(),
                    levels,
                    max_dev: vec![0.0; n],
                    arms: vec![0; n],
                }
            }
            AlgorithmKind::Mann => {
                // Forecast seeded with the rates under nominal gains at the
                // starting powers.
                let p0 = PowerVector::from_unchecked(scenario.initial_powers.clone());
                KindState::Mann { forecast: throughputs(&cfg, &p0, &cfg.gains) }
            }
        };
        let mut state = LearnerState {
            powers: scenario.initial_powers.clone(),
            demands: cfg.demands.clone(),
            p_max: cfg.p_max.clone(),
            params,
            kind: kind_state,
        };
        // Bush-Mosteller play starts from a sampled arm per user.
        if scenario.algorithm.kind == AlgorithmKind::BushMosteller {
            sample_arms(&mut state, scenario.seed, 0);
        }
        Ok(Self {
            cfg,
            channel,
            kind: scenario.algorithm.kind,
            state,
            seed: scenario.seed,
            horizon: scenario.horizon,
            events: scenario.demand_change_events.clone(),
            next_event: 0,
            t: 0,
            rows: Vec::new(),
            stopped_at: None,
        })
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    /// Whether the run has stopped (early convergence or horizon).
    pub fn done(&self) -> bool {
        self.stopped_at.is_some() || self.t >= self.horizon
    }

    fn record(&mut self, t: u64, gains: &[f64], rates: &[f64]) {
        for i in 0..self.cfg.n_users() {
            self.rows.push(TraceRow {
                t,
                user: i,
                power_mw: self.state.powers[i],
                gain: gains[i],
                throughput: rates[i],
                demand: self.state.demands[i],
                satisfied: rates[i] >= self.state.demands[i],
            });
        }
    }

    /// Runs one iteration; returns false once the run is over.
    pub fn step(&mut self) -> bool {
        if self.done() {
            return false;
        }
        let t = self.t;
        let gains = self.channel.gains_at(t);
        let pv = PowerVector::from_unchecked(self.state.powers.clone());
        let rates = throughputs(&self.cfg, &pv, &gains);
        self.record(t, &gains, &rates);

        let prev = self.state.powers.clone();
        let mut demands_changed = false;
        match self.kind {
            AlgorithmKind::BanachPicard => bp_step(&mut self.state, &rates),
            AlgorithmKind::ProgressiveBp => {
                demands_changed = bp_progressive_step(&mut self.state, &rates, self.cfg.capacity);
            }
            AlgorithmKind::BushMosteller => {
                let arms = match &self.state.kind {
                    KindState::BushMosteller { arms, .. } => arms.clone(),
                    _ => unreachable!(),
                };
                bm_step(&mut self.state, &arms, &rates);
                sample_arms(&mut self.state, self.seed, t + 1);
            }
            AlgorithmKind::Mann => mann_step(&mut self.state, &rates),
        }
        while self.next_event < self.events.len() && self.events[self.next_event].t == t {
            let ev = &self.events[self.next_event];
            self.state.demands[ev.user] = ev.new_demand;
            demands_changed = true;
            self.next_event += 1;
        }
        let events_pending = self.next_event < self.events.len();

        let settled = match self.kind {
            // The automaton's state is its probability rows; powers repeat
            // by chance long before the rows lock.
            AlgorithmKind::BushMosteller => probs_locked(&self.state),
            // Under fading the fixed point is transient: the next block (or
            // draw) moves it again, so those runs go to the horizon.
            _ => !self.channel.is_fading() && crate::learn::has_converged(&self.state, &prev),
        };
        self.t += 1;
        if settled && !demands_changed && !events_pending {
            let t1 = t + 1;
            let gains = self.channel.gains_at(t1);
            let pv = PowerVector::from_unchecked(self.state.powers.clone());
            let rates = throughputs(&self.cfg, &pv, &gains);
            self.record(t1, &gains, &rates);
            self.stopped_at = Some(t1);
            return false;
        }
        !self.done()
    }

    /// Drives the run to completion and assembles the trace.
    pub fn finish(mut self) -> SimulationTrace {
        while self.step() {}
        let n = self.cfg.n_users();
        let last: Vec<&TraceRow> = self.rows.iter().rev().take(n).collect();
        let final_rates: Vec<f64> = last.iter().rev().map(|r| r.throughput).collect();
        let final_demands: Vec<f64> = last.iter().rev().map(|r| r.demand).collect();
        let final_powers: Vec<f64> = last.iter().rev().map(|r| r.power_mw).collect();
        let all_satisfied = last.iter().all(|r| r.satisfied);
        let saturated = final_powers
            .iter()
            .zip(&self.cfg.p_max)
            .all(|(p, m)| *p >= m - 1e-12);
        let converged = if self.rows.len() >= 2 * n {
            let prev: Vec<f64> =
                self.rows[self.rows.len() - 2 * n..self.rows.len() - n].iter().map(|r| r.power_mw).collect();
            final_powers
                .iter()
                .zip(&prev)
                .all(|(a, b)| (a - b).abs() < self.state.params.rho)
        } else {
            false
        };
        SimulationTrace {
            n_users: n,
            rows: self.rows,
            summary: Summary {
                converged,
                t_converge: self.stopped_at,
                final_total_power: final_powers.iter().sum(),
                final_rates,
                final_demands,
                all_satisfied,
                saturated,
            },
        }
    }
}

fn probs_locked(state: &LearnerState) -> bool {
    let KindState::BushMosteller { arm_probs, .. } = &state.kind else {
        return false;
    };
    let lock = 1.0 - state.params.rho;
    arm_probs.iter().all(|row| row.iter().cloned().fold(0.0, f64::max) >= lock)
}

fn sample_arms(state: &mut LearnerState, seed: u64, t: u64) {
    let n = state.n_users();
    let arms_now: Vec<usize> = (0..n).map(|u| bm_sample(state, u, seed, t)).collect();
    let KindState::BushMosteller { levels, arms, .. } = &mut state.kind else {
        unreachable!();
    };
    for i in 0..n {
        arms[i] = arms_now[i];
        state.powers[i] = levels[i][arms_now[i]];
    }
}

/// Runs a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<SimulationTrace, ScenarioError> {
    Ok(Simulation::new(scenario)?.finish())
}

/// Exact CSV header of a trace file.
pub const TRACE_HEADER: &str = "t,user,power_mw,gain,throughput,demand,satisfied";

fn format_row(row: &TraceRow) -> String {
    format!(
        "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
        row.t, row.user, row.power_mw, row.gain, row.throughput, row.demand, row.satisfied
    )
}

/// Serializes a trace to CSV: UTF-8, LF line endings, 17-significant-digit
/// floats. Written atomically (temp file + rename).
pub fn write_trace(trace: &SimulationTrace, path: impl AsRef<Path>) -> io::Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("csv.tmp");
    {
        let mut out = io::BufWriter::new(fs::File::create(&tmp)?);
        out.write_all(TRACE_HEADER.as_bytes())?;
        out.write_all(b"\n")?;
        for row in &trace.rows {
            out.write_all(format_row(row).as_bytes())?;
        }
        out.flush()?;
    }
    fs::rename(&tmp, path)
}

/// In-memory CSV rendering, byte-identical to [`write_trace`]'s output.
pub fn trace_to_csv(trace: &SimulationTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for row in &trace.rows {
        out.push_str(&format_row(row));
    }
    out
}
