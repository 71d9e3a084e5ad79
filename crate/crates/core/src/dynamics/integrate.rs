//! Adaptive explicit Euler with a positivity-preserving step bound.
//!
//! The step is dt = min(dt_max, cfl / max relative outflow, cfl / max
//! inflow-to-headroom rate). Vertices holding less than `dust_mass` are left
//! out of that bound; their edge fluxes are scaled down instead so they cannot
//! overdraw. A step that raises the energy beyond the slack is retried with
//! half the step.

use std::ops::ControlFlow;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::field::{check_domain, check_shapes, energy_from_potentials, potentials_raw, sweep, EdgeFluxes, SweepStats};
use super::DynamicsParams;
use crate::error::{Error, Result};
use crate::graph::{center_of_mass, total_mass, FiniteGraph, SpeciesState};
use crate::kernels::KernelSet;

/// Round-off below zero that is silently clamped.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampling {
    /// Every n-th accepted step.
    Every(u64),
    /// At multiples of the interval; steps are shortened to hit them.
    Interval(f64),
    /// At the listed times; steps are shortened to hit them.
    Times(Vec<f64>),
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::Every(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrateOptions {
    pub sampling: Sampling,
    pub stop_when_stationary: bool,
    pub energy_check: bool,
    /// Absolute energy slack per step.
    pub energy_slack: f64,
    /// Additional slack relative to |E|, for large-valued kernels.
    pub energy_slack_rel: f64,
    pub dust_mass: f64,
    pub min_dt: f64,
    pub max_steps: u64,
    /// Keep states on sampled points. The observer always sees them.
    pub record_states: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            sampling: Sampling::default(),
            stop_when_stationary: true,
            energy_check: true,
            energy_slack: 1e-10,
            energy_slack_rel: 1e-14,
            dust_mass: 1e-13,
            min_dt: 1e-14,
            max_steps: 100_000_000,
            record_states: true,
        }
    }
}

impl IntegrateOptions {
    pub fn sampled(sampling: Sampling) -> Self {
        Self {
            sampling,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub step: u64,
    /// Present for every point when states are recorded, and always for the
    /// first and last point.
    pub state: Option<SpeciesState>,
    pub energy: f64,
    pub mass: [f64; 2],
    pub center_of_mass: [Vec<f64>; 2],
    pub dissipation: f64,
    /// sup-norm of du/dt.
    pub sup_rate: f64,
    /// Largest edge value of m (v)₊.
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Outcome {
    ReachedEnd,
    Stationary,
    Stopped,
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub outcome: Outcome,
    pub steps: u64,
    pub rejected: u64,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("a trajectory has at least one point")
    }

    pub fn final_state(&self) -> &SpeciesState {
        self.last().state.as_ref().expect("the final state is always recorded")
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self.outcome, Outcome::Aborted { .. })
    }
}

pub fn integrate(
    state0: &SpeciesState,
    graph: &FiniteGraph,
    kernels: &KernelSet,
    params: &DynamicsParams,
    options: &IntegrateOptions,
) -> Result<Trajectory> {
    integrate_with(state0, graph, kernels, params, options, |_| ControlFlow::Continue(()))
}

struct Current {
    u: Array2<f64>,
    energy: f64,
    stats: SweepStats,
}

fn sup_rate(fluxes: &[EdgeFluxes; 2], weights: &[f64]) -> f64 {
    let mut sup = 0.0f64;
    for f in fluxes {
        for (k, mu) in weights.iter().enumerate() {
            sup = sup.max(((f.inflow[k] - f.outflow[k]) / mu).abs());
        }
    }
    sup
}

fn make_point(
    t: f64,
    step: u64,
    cur: &Current,
    fluxes: &[EdgeFluxes; 2],
    graph: &FiniteGraph,
    keep_state: bool,
) -> TrajectoryPoint {
    let state = SpeciesState::from_array_unchecked(cur.u.clone());
    TrajectoryPoint {
        t,
        step,
        energy: cur.energy,
        mass: total_mass(&state, graph).masses,
        center_of_mass: center_of_mass(&state, graph),
        dissipation: cur.stats.dissipation,
        sup_rate: sup_rate(fluxes, graph.weights()),
        max_violation: cur.stats.max_violation,
        state: keep_state.then_some(state),
    }
}

/// Like [`integrate`], calling `observer` on every sampled point. Returning
/// `ControlFlow::Break` ends the run with [`Outcome::Stopped`].
pub fn integrate_with<F>(
    state0: &SpeciesState,
    graph: &FiniteGraph,
    kernels: &KernelSet,
    params: &DynamicsParams,
    options: &IntegrateOptions,
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(&TrajectoryPoint) -> ControlFlow<()>,
{
    params.validate()?;
    check_shapes(state0, kernels, graph)?;
    check_domain(state0, &params.mobility)?;
    if let Sampling::Interval(h) = options.sampling {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter("sampling interval must be positive".into()));
        }
    }
    if let Sampling::Every(0) = options.sampling {
        return Err(Error::InvalidParameter("sampling stride must be positive".into()));
    }

    let n = graph.len();
    let w = graph.weights();
    let s_max = params.mobility.threshold();
    let cfl = params.cfl_safety;
    let mut targets: Vec<f64> = match &options.sampling {
        Sampling::Times(ts) => {
            let mut ts: Vec<f64> = ts.iter().cloned().filter(|t| *t > 0.0 && *t <= params.t_end).collect();
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            ts
        }
        _ => Vec::new(),
    };
    targets.reverse();
    let mut next_interval = 1u64;

    let u0 = state0.u().clone();
    let phi = potentials_raw(&u0, kernels, w);
    let energy = energy_from_potentials(&u0, &phi, w);
    let mut fluxes = [EdgeFluxes::new(n), EdgeFluxes::new(n)];
    let stats = sweep(&u0, &phi, graph, params, &mut fluxes);
    let mut cur = Current {
        u: u0,
        energy,
        stats,
    };

    let mut t = 0.0;
    let mut steps = 0u64;
    let mut rejected = 0u64;
    let mut points = vec![make_point(0.0, 0, &cur, &fluxes, graph, true)];
    let mut last_recorded_step = 0u64;
    if observer(&points[0]).is_break() {
        return Ok(Trajectory {
            points,
            outcome: Outcome::Stopped,
            steps,
            rejected,
        });
    }

    let mut theta_out = vec![[1.0f64; 2]; n];
    let mut theta_in = vec![[1.0f64; 2]; n];

    let outcome = loop {
        if options.stop_when_stationary && cur.stats.max_violation <= params.stationarity_tol {
            break Outcome::Stationary;
        }
        if t >= params.t_end {
            break Outcome::ReachedEnd;
        }
        if steps >= options.max_steps {
            break Outcome::Aborted {
                reason: format!("step limit {} reached at t = {t}", options.max_steps),
            };
        }

        let mut dt = params.dt_max.min(params.t_end - t);
        for (i, f) in fluxes.iter().enumerate() {
            for k in 0..n {
                let mass = cur.u[[i, k]] * w[k];
                if f.outflow[k] > 0.0 && mass > options.dust_mass {
                    dt = dt.min(cfl * mass / f.outflow[k]);
                }
                if s_max.is_finite() && f.inflow[k] > 0.0 {
                    let room = (s_max - cur.u[[i, k]]) * w[k];
                    if room > options.dust_mass {
                        dt = dt.min(cfl * room / f.inflow[k]);
                    }
                }
            }
        }
        let mut hit_target = None;
        match &options.sampling {
            Sampling::Times(_) => {
                if let Some(&target) = targets.last() {
                    if t + dt >= target {
                        dt = target - t;
                        hit_target = Some(target);
                    }
                }
            }
            Sampling::Interval(h) => {
                let target = (next_interval as f64 * h).min(params.t_end);
                if t + dt >= target {
                    dt = target - t;
                    hit_target = Some(target);
                }
            }
            Sampling::Every(_) => {}
        }
        if t + dt >= params.t_end {
            hit_target = Some(params.t_end);
        }

        let accepted = loop {
            if dt < options.min_dt {
                break Err(Error::StepUnderflow { t, dt });
            }
            let mut limited = false;
            for i in 0..2 {
                for k in 0..n {
                    let mass = cur.u[[i, k]] * w[k];
                    let out = fluxes[i].outflow[k] * dt;
                    theta_out[k][i] = if out > cfl * mass {
                        limited = true;
                        cfl * mass / out
                    } else {
                        1.0
                    };
                    theta_in[k][i] = 1.0;
                    if s_max.is_finite() {
                        let room = (s_max - cur.u[[i, k]]) * w[k];
                        let inflow = fluxes[i].inflow[k] * dt;
                        if inflow > cfl * room {
                            limited = true;
                            theta_in[k][i] = (cfl * room / inflow).max(0.0);
                        }
                    }
                }
            }
            let mut next = cur.u.clone();
            for i in 0..2 {
                let f = &fluxes[i];
                if !limited {
                    for k in 0..n {
                        next[[i, k]] += dt * (f.inflow[k] - f.outflow[k]) / w[k];
                    }
                } else {
                    let mut delta = vec![0.0; n];
                    for a in 0..n {
                        if f.outflow[a] == 0.0 {
                            continue;
                        }
                        for b in 0..n {
                            let j = f.flux[a * n + b];
                            if j > 0.0 {
                                let moved = dt * j * theta_out[a][i].min(theta_in[b][i]);
                                delta[a] -= moved;
                                delta[b] += moved;
                            }
                        }
                    }
                    for k in 0..n {
                        next[[i, k]] += delta[k] / w[k];
                    }
                }
            }
            let mut bad = None;
            for ((i, k), x) in next.indexed_iter_mut() {
                if *x < 0.0 {
                    if *x >= -NEGATIVE_CLAMP {
                        *x = 0.0;
                    } else {
                        bad = Some((i, k, *x));
                    }
                } else if *x > s_max && *x <= s_max + NEGATIVE_CLAMP {
                    *x = s_max;
                }
            }
            if let Some((species, vertex, value)) = bad {
                break Err(Error::NegativeDensity {
                    species,
                    vertex,
                    value,
                    t: t + dt,
                });
            }
            let phi = potentials_raw(&next, kernels, w);
            let energy = energy_from_potentials(&next, &phi, w);
            let slack = options.energy_slack + options.energy_slack_rel * cur.energy.abs();
            if options.energy_check && energy > cur.energy + slack {
                rejected += 1;
                dt *= 0.5;
                hit_target = None;
                continue;
            }
            break Ok((next, phi, energy));
        };
        let (next, phi, energy) = match accepted {
            Ok(v) => v,
            Err(e) => {
                break Outcome::Aborted {
                    reason: e.to_string(),
                };
            }
        };

        t = match hit_target {
            Some(target) => target,
            None => t + dt,
        };
        steps += 1;
        let stats = sweep(&next, &phi, graph, params, &mut fluxes);
        cur = Current {
            u: next,
            energy,
            stats,
        };

        let due = match &options.sampling {
            Sampling::Every(stride) => steps % stride == 0,
            Sampling::Interval(h) => {
                if hit_target.is_some() && t >= next_interval as f64 * h {
                    next_interval += 1;
                    true
                } else {
                    false
                }
            }
            Sampling::Times(_) => {
                if hit_target.is_some() && targets.last().is_some_and(|&x| t >= x) {
                    targets.pop();
                    true
                } else {
                    false
                }
            }
        };
        if due {
            let mut point = make_point(t, steps, &cur, &fluxes, graph, true);
            let flow = observer(&point);
            if !options.record_states {
                point.state = None;
            }
            points.push(point);
            last_recorded_step = steps;
            if flow.is_break() {
                break Outcome::Stopped;
            }
        }
    };

    if last_recorded_step != steps || points.len() == 1 && steps > 0 {
        let point = make_point(t, steps, &cur, &fluxes, graph, true);
        let _ = observer(&point);
        points.push(point);
    } else if let Some(last) = points.last_mut() {
        if last.state.is_none() {
            last.state = Some(SpeciesState::from_array_unchecked(cur.u.clone()));
        }
    }
    Ok(Trajectory {
        points,
        outcome,
        steps,
        rejected,
    })
}
