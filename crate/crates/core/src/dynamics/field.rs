use ndarray::{Array1, Array2, Array3};

use super::{DynamicsParams, Mobility};
use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, FluxField, SpeciesState};
use crate::kernels::KernelSet;

/// x^e for x > 0, and 0 otherwise.
#[inline]
pub(crate) fn pos_pow(x: f64, e: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if e == 1.0 {
        x
    } else {
        x.powf(e)
    }
}

pub(crate) fn check_shapes(state: &SpeciesState, kernels: &KernelSet, graph: &FiniteGraph) -> Result<()> {
    state.check_graph(graph)?;
    if kernels.len() != graph.len() {
        return Err(Error::Shape(format!(
            "kernels are {}x{}, graph has {} vertices",
            kernels.len(),
            kernels.len(),
            graph.len()
        )));
    }
    Ok(())
}

pub(crate) fn check_domain(state: &SpeciesState, mobility: &Mobility) -> Result<()> {
    let s = mobility.threshold();
    for ((species, vertex), &value) in state.u().indexed_iter() {
        if value > s + 1e-12 {
            return Err(Error::OutsideDomain { species, vertex, value });
        }
    }
    Ok(())
}

fn check_dynamics(params: &DynamicsParams, state: &SpeciesState) -> Result<()> {
    params.validate_field()?;
    if !params.mobility.upwind_admissible() {
        return Err(Error::InvalidParameter(
            "theta1 = 0 is not upwind admissible and cannot drive the dynamics".into(),
        ));
    }
    check_domain(state, &params.mobility)
}

/// φ^(i) = Σ_k K^(ik) m^(k), summed per k and then added.
pub(crate) fn potentials_raw(u: &Array2<f64>, kernels: &KernelSet, weights: &[f64]) -> [Vec<f64>; 2] {
    let w = Array1::from(weights.to_vec());
    let m0 = &u.row(0) * &w;
    let m1 = &u.row(1) * &w;
    let mut out = [Vec::new(), Vec::new()];
    for (i, phi) in out.iter_mut().enumerate() {
        let a = kernels.k(i, 0).dot(&m0);
        let b = kernels.k(i, 1).dot(&m1);
        *phi = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
    }
    out
}

pub(crate) fn energy_from_potentials(u: &Array2<f64>, phi: &[Vec<f64>; 2], weights: &[f64]) -> f64 {
    let mut e = 0.0;
    for (i, p) in phi.iter().enumerate() {
        for (k, (&pk, &mu)) in p.iter().zip(weights).enumerate() {
            e += u[[i, k]] * mu * pk;
        }
    }
    0.5 * e
}

/// Interaction potentials φ^(i)_ι = Σ_k Σ_λ K^(ik)_ιλ u^(k)_λ μ_λ.
pub fn potentials(state: &SpeciesState, kernels: &KernelSet, graph: &FiniteGraph) -> Result<[Vec<f64>; 2]> {
    check_shapes(state, kernels, graph)?;
    Ok(potentials_raw(state.u(), kernels, graph.weights()))
}

/// v^(i)_ικ = β^(i) (φ^(i)_ι − φ^(i)_κ).
pub fn velocity(
    state: &SpeciesState,
    kernels: &KernelSet,
    params: &DynamicsParams,
    graph: &FiniteGraph,
) -> Result<Array3<f64>> {
    let phi = potentials(state, kernels, graph)?;
    let n = graph.len();
    Ok(Array3::from_shape_fn((2, n, n), |(i, a, b)| {
        params.beta[i] * (phi[i][a] - phi[i][b])
    }))
}

/// du/dt and the net upwind flux field.
///
/// The flux is j_ικ = m(u_ι, u_κ) [(v_ικ)₊]^(q−1) − m(u_κ, u_ι) [(v_ικ)₋]^(q−1),
/// and du_ι/dt = −Σ_κ j_ικ η_ικ μ_κ.
pub fn rhs(
    state: &SpeciesState,
    graph: &FiniteGraph,
    kernels: &KernelSet,
    params: &DynamicsParams,
) -> Result<(Array2<f64>, FluxField)> {
    check_dynamics(params, state)?;
    let v = velocity(state, kernels, params, graph)?;
    let n = graph.len();
    let e = params.q() - 1.0;
    let u = state.u();
    let mob = &params.mobility;
    let mut j = Array3::zeros((2, n, n));
    let mut du = Array2::zeros((2, n));
    for i in 0..2 {
        for a in 0..n {
            let mut acc = 0.0;
            for b in 0..n {
                let vab = v[[i, a, b]];
                let inflow = mob.eval(u[[i, b]], u[[i, a]]) * pos_pow(-vab, e);
                let outflow = mob.eval(u[[i, a]], u[[i, b]]) * pos_pow(vab, e);
                j[[i, a, b]] = outflow - inflow;
                acc += (inflow - outflow) * graph.eta()[[a, b]] * graph.weights()[b];
            }
            du[[i, a]] = acc;
        }
    }
    Ok((du, FluxField { j }))
}

/// E = ½ Σ_{i,k} Σ_{ι,κ} K^(ik)_ικ m^(i)_ι m^(k)_κ.
pub fn energy(state: &SpeciesState, kernels: &KernelSet, graph: &FiniteGraph) -> Result<f64> {
    let phi = potentials(state, kernels, graph)?;
    Ok(energy_from_potentials(state.u(), &phi, graph.weights()))
}

/// −Σ_i (1/β^(i)) Σ_{ι,κ} m(u_ι, u_κ) [(v_ικ)₊]^q η_ικ μ_κ μ_ι, always ≤ 0.
pub fn dissipation(
    state: &SpeciesState,
    kernels: &KernelSet,
    params: &DynamicsParams,
    graph: &FiniteGraph,
) -> Result<f64> {
    check_dynamics(params, state)?;
    let v = velocity(state, kernels, params, graph)?;
    let n = graph.len();
    let q = params.q();
    let u = state.u();
    let w = graph.weights();
    let mut total = 0.0;
    for i in 0..2 {
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                let vab = v[[i, a, b]];
                if vab > 0.0 {
                    acc += params.mobility.eval(u[[i, a]], u[[i, b]])
                        * vab.powf(q)
                        * graph.eta()[[a, b]]
                        * w[b]
                        * w[a];
                }
            }
        }
        total -= acc / params.beta[i];
    }
    Ok(total)
}

/// d x_c^(i) / dt = Σ_ι x_ι μ_ι du^(i)_ι/dt.
pub fn center_of_mass_drift(
    state: &SpeciesState,
    graph: &FiniteGraph,
    kernels: &KernelSet,
    params: &DynamicsParams,
) -> Result<[Vec<f64>; 2]> {
    let (du, _) = rhs(state, graph, kernels, params)?;
    let dim = graph.dim();
    let mut out = [vec![0.0; dim], vec![0.0; dim]];
    for (i, c) in out.iter_mut().enumerate() {
        for (k, x) in graph.positions().iter().enumerate() {
            let rate = du[[i, k]] * graph.weights()[k];
            for (cd, xd) in c.iter_mut().zip(x) {
                *cd += xd * rate;
            }
        }
    }
    Ok(out)
}

/// Per-species edge mass fluxes J_ικ ≥ 0 along positive velocity, with totals.
#[derive(Debug, Clone)]
pub(crate) struct EdgeFluxes {
    pub flux: Vec<f64>,
    pub outflow: Vec<f64>,
    pub inflow: Vec<f64>,
}

impl EdgeFluxes {
    pub fn new(n: usize) -> Self {
        Self {
            flux: vec![0.0; n * n],
            outflow: vec![0.0; n],
            inflow: vec![0.0; n],
        }
    }
}

/// Scalars gathered in the same sweep as the fluxes.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SweepStats {
    /// max over edges with η > 0 of m(u_ι, u_κ) (v_ικ)₊.
    pub max_violation: f64,
    pub dissipation: f64,
}

/// Fills the edge fluxes for state `u` with potentials `phi`.
pub(crate) fn sweep(
    u: &Array2<f64>,
    phi: &[Vec<f64>; 2],
    graph: &FiniteGraph,
    params: &DynamicsParams,
    out: &mut [EdgeFluxes; 2],
) -> SweepStats {
    let n = graph.len();
    let e = params.q() - 1.0;
    let eta = graph.eta().as_slice().expect("eta is contiguous");
    let w = graph.weights();
    let mob = params.mobility;
    let mut stats = SweepStats::default();
    for i in 0..2 {
        let beta = params.beta[i];
        let ui = u.row(i);
        let ui = ui.as_slice().expect("state rows are contiguous");
        let p = &phi[i];
        let buf = &mut out[i];
        buf.flux.fill(0.0);
        buf.outflow.fill(0.0);
        buf.inflow.fill(0.0);
        let mut diss = 0.0;
        for a in 0..n {
            let ua = ui[a];
            if ua == 0.0 {
                continue;
            }
            let row = &eta[a * n..(a + 1) * n];
            let mut out_a = 0.0;
            for b in 0..n {
                let eab = row[b];
                if eab == 0.0 {
                    continue;
                }
                let v = beta * (p[a] - p[b]);
                if v <= 0.0 {
                    continue;
                }
                let m = mob.eval(ua, ui[b]);
                if m == 0.0 {
                    continue;
                }
                let mv = m * v;
                if mv > stats.max_violation {
                    stats.max_violation = mv;
                }
                let flux = eab * w[a] * w[b] * m * pos_pow(v, e);
                diss += flux * v;
                buf.flux[a * n + b] = flux;
                out_a += flux;
                buf.inflow[b] += flux;
            }
            buf.outflow[a] = out_a;
        }
        stats.dissipation -= diss / beta;
    }
    stats
}
