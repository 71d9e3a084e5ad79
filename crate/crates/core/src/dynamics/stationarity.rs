use serde::{Deserialize, Serialize};

use super::field::{check_shapes, velocity};
use super::DynamicsParams;
use crate::error::Result;
use crate::graph::{FiniteGraph, SpeciesState};
use crate::kernels::KernelSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub species: usize,
    pub from: usize,
    pub to: usize,
    /// m(u_from, u_to) (v_from,to)₊
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub stationary: bool,
    pub max_violation: f64,
    pub worst: Option<Violation>,
    /// Every edge above the tolerance.
    pub violating: Vec<Violation>,
}

/// Edge criterion: m(u_ι, u_κ) (v_ικ)₊ ≤ tol on every edge with η > 0, for both species.
pub fn is_stationary(
    state: &SpeciesState,
    kernels: &KernelSet,
    params: &DynamicsParams,
    graph: &FiniteGraph,
    tol: f64,
) -> Result<StationarityReport> {
    check_shapes(state, kernels, graph)?;
    let v = velocity(state, kernels, params, graph)?;
    let n = graph.len();
    let u = state.u();
    let mut worst: Option<Violation> = None;
    let mut violating = Vec::new();
    for i in 0..2 {
        for a in 0..n {
            for b in 0..n {
                if graph.eta()[[a, b]] <= 0.0 {
                    continue;
                }
                let value = params.mobility.eval(u[[i, a]], u[[i, b]]) * v[[i, a, b]].max(0.0);
                let here = Violation {
                    species: i,
                    from: a,
                    to: b,
                    value,
                };
                if value > worst.map_or(0.0, |w| w.value) {
                    worst = Some(here);
                }
                if value > tol {
                    violating.push(here);
                }
            }
        }
    }
    let max_violation = worst.map_or(0.0, |w| w.value);
    Ok(StationarityReport {
        stationary: violating.is_empty(),
        max_violation,
        worst,
        violating,
    })
}
