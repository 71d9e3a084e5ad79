//! Finite weighted graphs embedded in R^d and the two-species states on them.

use ndarray::{Array2, Array3, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the per-species probability normalisation.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    Euclidean,
    OneNorm,
}

impl Norm {
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Norm::OneNorm => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
        }
    }
}

/// How the edge weights are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaRule {
    Explicit(Vec<Vec<f64>>),
    Rule(RuleEta),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleEta {
    /// η ≡ 1 off the diagonal.
    Complete,
    /// η(x, y) = 1 if |x − y| < r, strict.
    Cutoff {
        r: f64,
        #[serde(default)]
        norm: Norm,
    },
}

impl EtaRule {
    pub fn complete() -> Self {
        EtaRule::Rule(RuleEta::Complete)
    }

    pub fn cutoff(r: f64) -> Self {
        EtaRule::Rule(RuleEta::Cutoff {
            r,
            norm: Norm::Euclidean,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGraph {
    positions: Vec<Vec<f64>>,
    weights: Vec<f64>,
    eta: Array2<f64>,
}

/// Serialized form of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub positions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub eta: EtaRule,
}

pub fn build_graph(positions: Vec<Vec<f64>>, weights: Vec<f64>, eta_rule: &EtaRule) -> Result<FiniteGraph> {
    let n = positions.len();
    if n < 2 {
        return Err(Error::TooFewVertices(n));
    }
    if weights.len() != n {
        return Err(Error::Shape(format!("{} positions but {} weights", n, weights.len())));
    }
    let dim = positions[0].len();
    if dim == 0 {
        return Err(Error::Shape("positions must have at least one coordinate".into()));
    }
    for (index, x) in positions.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                index,
                expected: dim,
                got: x.len(),
            });
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::Shape(format!("vertex {index} has a non-finite coordinate")));
        }
    }
    for (index, &weight) in weights.iter().enumerate() {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::NonPositiveWeight { index, weight });
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            if positions[a] == positions[b] {
                return Err(Error::DuplicatePosition(a, b));
            }
        }
    }

    let mut eta = Array2::<f64>::zeros((n, n));
    match eta_rule {
        EtaRule::Explicit(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Shape(format!("eta must be {n}x{n}")));
            }
            for a in 0..n {
                for b in 0..n {
                    let value = rows[a][b];
                    if !(value >= 0.0) || !value.is_finite() {
                        return Err(Error::InvalidEntry {
                            name: "eta".into(),
                            row: a,
                            col: b,
                            value,
                        });
                    }
                    if value != rows[b][a] {
                        return Err(Error::Asymmetric {
                            name: "eta".into(),
                            row: a,
                            col: b,
                        });
                    }
                    if a != b {
                        eta[[a, b]] = value;
                    }
                }
            }
        }
        EtaRule::Rule(RuleEta::Complete) => {
            eta.fill(1.0);
            eta.diag_mut().fill(0.0);
        }
        EtaRule::Rule(RuleEta::Cutoff { r, norm }) => {
            if !(*r > 0.0) {
                return Err(Error::InvalidParameter(format!("cutoff radius must be positive, got {r}")));
            }
            for a in 0..n {
                for b in a + 1..n {
                    if norm.distance(&positions[a], &positions[b]) < *r {
                        eta[[a, b]] = 1.0;
                        eta[[b, a]] = 1.0;
                    }
                }
            }
        }
    }
    Ok(FiniteGraph {
        positions,
        weights,
        eta,
    })
}

impl FiniteGraph {
    pub fn from_doc(doc: &GraphDoc) -> Result<Self> {
        build_graph(doc.positions.clone(), doc.weights.clone(), &doc.eta)
    }

    pub fn to_doc(&self) -> GraphDoc {
        GraphDoc {
            positions: self.positions.clone(),
            weights: self.weights.clone(),
            eta: EtaRule::Explicit(self.eta.outer_iter().map(|r| r.to_vec()).collect()),
        }
    }

    /// Unit-spaced n×n lattice, vertex (i, j) at index i·n + j.
    pub fn lattice(n: usize, weight: f64, eta_rule: &EtaRule) -> Result<Self> {
        let positions = (0..n * n)
            .map(|k| vec![(k / n) as f64, (k % n) as f64])
            .collect();
        build_graph(positions, vec![weight; n * n], eta_rule)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions[0].len()
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eta(&self) -> &Array2<f64> {
        &self.eta
    }

    pub fn distance(&self, a: usize, b: usize, norm: Norm) -> f64 {
        norm.distance(&self.positions[a], &self.positions[b])
    }
}

/// Densities of both species relative to μ, stored as a 2×N array.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesState {
    u: Array2<f64>,
}

impl SpeciesState {
    pub fn new(u: Array2<f64>) -> Result<Self> {
        if u.nrows() != 2 || u.ncols() < 2 {
            return Err(Error::Shape(format!("state must be 2xN with N >= 2, got {:?}", u.shape())));
        }
        for ((i, k), &value) in u.indexed_iter() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidEntry {
                    name: "state".into(),
                    row: i,
                    col: k,
                    value,
                });
            }
        }
        Ok(Self { u })
    }

    pub fn from_rows(u1: &[f64], u2: &[f64]) -> Result<Self> {
        if u1.len() != u2.len() {
            return Err(Error::Shape("species rows differ in length".into()));
        }
        let n = u1.len();
        let mut u = Array2::zeros((2, n));
        u.row_mut(0).assign(&ArrayView1::from(u1));
        u.row_mut(1).assign(&ArrayView1::from(u2));
        Self::new(u)
    }

    /// Builds densities from per-vertex masses m_ι = u_ι μ_ι.
    pub fn from_masses(graph: &FiniteGraph, m1: &[f64], m2: &[f64]) -> Result<Self> {
        let n = graph.len();
        if m1.len() != n || m2.len() != n {
            return Err(Error::Shape(format!("masses must have length {n}")));
        }
        let w = graph.weights();
        let u1: Vec<f64> = m1.iter().zip(w).map(|(m, mu)| m / mu).collect();
        let u2: Vec<f64> = m2.iter().zip(w).map(|(m, mu)| m / mu).collect();
        Self::from_rows(&u1, &u2)
    }

    /// Both species as Dirac masses on the given vertices.
    pub fn diracs(graph: &FiniteGraph, v1: usize, v2: usize) -> Result<Self> {
        let n = graph.len();
        let mut m1 = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        m1[v1] = 1.0;
        m2[v2] = 1.0;
        Self::from_masses(graph, &m1, &m2)
    }

    /// Wraps an array without validation; callers guarantee nonnegativity.
    pub(crate) fn from_array_unchecked(u: Array2<f64>) -> Self {
        Self { u }
    }

    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn species(&self, i: usize) -> ArrayView1<'_, f64> {
        self.u.row(i)
    }

    pub fn into_array(self) -> Array2<f64> {
        self.u
    }

    /// Per-vertex masses u_ι μ_ι of species i.
    pub fn masses(&self, graph: &FiniteGraph, i: usize) -> Vec<f64> {
        self.u
            .row(i)
            .iter()
            .zip(graph.weights())
            .map(|(u, mu)| u * mu)
            .collect()
    }

    pub(crate) fn check_graph(&self, graph: &FiniteGraph) -> Result<()> {
        if self.len() != graph.len() {
            return Err(Error::Shape(format!(
                "state has {} vertices, graph has {}",
                self.len(),
                graph.len()
            )));
        }
        Ok(())
    }
}

/// Upwind edge fluxes j[i][ι][κ].
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub j: Array3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassReport {
    pub masses: [f64; 2],
    /// Both species have unit mass within [`MASS_TOL`].
    pub is_probability: bool,
}

pub fn total_mass(state: &SpeciesState, graph: &FiniteGraph) -> MassReport {
    let mut masses = [0.0; 2];
    for (i, m) in masses.iter_mut().enumerate() {
        *m = state
            .species(i)
            .iter()
            .zip(graph.weights())
            .map(|(u, mu)| u * mu)
            .sum();
    }
    let is_probability = masses.iter().all(|m| (m - 1.0).abs() <= MASS_TOL);
    MassReport {
        masses,
        is_probability,
    }
}

pub fn center_of_mass(state: &SpeciesState, graph: &FiniteGraph) -> [Vec<f64>; 2] {
    let dim = graph.dim();
    let mut out = [vec![0.0; dim], vec![0.0; dim]];
    for (i, c) in out.iter_mut().enumerate() {
        for (k, x) in graph.positions().iter().enumerate() {
            let m = state.u[[i, k]] * graph.weights()[k];
            for (cd, xd) in c.iter_mut().zip(x) {
                *cd += xd * m;
            }
        }
    }
    out
}
