//! Ready-made experiments: three- and four-point graphs, lattice pattern
//! formation and the mobility / exponent sweeps.
//!
//! Random initial states use ChaCha8 seeded with `seed_from_u64(seed)`. Each
//! draw is `(next_u64() >> 11) * 2^-53`, taken species by species in vertex
//! order, then every species is scaled so that Σ u_ι μ_ι = 1.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rhs, velocity, DynamicsParams, Mobility, Trajectory};
use crate::error::{Error, Result};
use crate::graph::{build_graph, EtaRule, FiniteGraph, GraphDoc, Norm, SpeciesState};
use crate::kernels::{evaluate, KernelForm, KernelSet, KernelSpec, KernelSpecs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialRecipe {
    Masses { m1: Vec<f64>, m2: Vec<f64> },
    Random { seed: u64 },
}

/// A value the generic field must reproduce at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "quantity", rename_all = "snake_case")]
pub enum Oracle {
    /// v^(species)_{from,to}
    Velocity { species: usize, from: usize, to: usize, value: f64 },
    /// du^(species)_vertex / dt
    Rate { species: usize, vertex: usize, value: f64 },
}

impl Oracle {
    pub fn value(&self) -> f64 {
        match *self {
            Oracle::Velocity { value, .. } | Oracle::Rate { value, .. } => value,
        }
    }
}

/// Predicates on a finished run. Species and vertices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "expect", rename_all = "snake_case")]
pub enum Expectation {
    FinalMassBelow { species: usize, vertex: usize, value: f64 },
    FinalMassAbove { species: usize, vertex: usize, value: f64 },
    /// The two largest vertex masses are both within tol of ½.
    EvenSplit { species: usize, tol: f64 },
    /// Some vertex carries at least 1 − tol of the species.
    SingleVertex { species: usize, tol: f64 },
    /// Number of vertices with mass above `level` lies in [min, max].
    SupportBetween { species: usize, min: usize, max: usize, level: f64 },
    /// max u over every recorded state.
    DensityCap { cap: f64 },
    /// Overlap index at the end is at most `factor` times its initial value.
    OverlapDrop { factor: f64 },
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub expectation: Expectation,
    pub holds: bool,
    pub observed: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Builder arguments, for manifests.
    pub parameters: serde_json::Value,
    pub graph: FiniteGraph,
    pub kernels: KernelSpecs,
    pub params: DynamicsParams,
    pub initial: InitialRecipe,
    pub oracles: Vec<Oracle>,
    pub expectations: Vec<Expectation>,
}

impl Scenario {
    pub fn kernel_set(&self) -> Result<KernelSet> {
        evaluate(&self.kernels, &self.graph)
    }

    pub fn initial_state(&self) -> Result<SpeciesState> {
        match &self.initial {
            InitialRecipe::Masses { m1, m2 } => SpeciesState::from_masses(&self.graph, m1, m2),
            InitialRecipe::Random { seed } => Ok(random_initial_state(&self.graph, *seed)),
        }
    }

    /// Oracle values next to what the generic field gives, as (oracle, computed).
    pub fn evaluate_oracles(&self) -> Result<Vec<(Oracle, f64)>> {
        let state = self.initial_state()?;
        let kernels = self.kernel_set()?;
        let v = velocity(&state, &kernels, &self.params, &self.graph)?;
        let (du, _) = rhs(&state, &self.graph, &kernels, &self.params)?;
        Ok(self
            .oracles
            .iter()
            .map(|o| {
                let got = match *o {
                    Oracle::Velocity { species, from, to, .. } => v[[species, from, to]],
                    Oracle::Rate { species, vertex, .. } => du[[species, vertex]],
                };
                (o.clone(), got)
            })
            .collect())
    }

    pub fn check(&self, trajectory: &Trajectory) -> Vec<Check> {
        let g = &self.graph;
        let last = trajectory.final_state();
        let first = trajectory.points[0].state.as_ref();
        self.expectations
            .iter()
            .map(|e| {
                let (holds, observed) = match *e {
                    Expectation::FinalMassBelow { species, vertex, value } => {
                        let m = last.masses(g, species)[vertex];
                        (m < value, m)
                    }
                    Expectation::FinalMassAbove { species, vertex, value } => {
                        let m = last.masses(g, species)[vertex];
                        (m >= value, m)
                    }
                    Expectation::EvenSplit { species, tol } => {
                        let mut m = last.masses(g, species);
                        m.sort_by(|a, b| b.total_cmp(a));
                        let dev = (m[0] - 0.5).abs().max((m[1] - 0.5).abs());
                        (dev <= tol, dev)
                    }
                    Expectation::SingleVertex { species, tol } => {
                        let top = last.masses(g, species).into_iter().fold(0.0, f64::max);
                        (top >= 1.0 - tol, top)
                    }
                    Expectation::SupportBetween { species, min, max, level } => {
                        let n = support_size(last, g, species, level);
                        (n >= min && n <= max, n as f64)
                    }
                    Expectation::DensityCap { cap } => {
                        let top = trajectory
                            .points
                            .iter()
                            .filter_map(|p| p.state.as_ref())
                            .flat_map(|s| s.u().iter().copied().collect::<Vec<_>>())
                            .fold(0.0, f64::max);
                        (top <= cap, top)
                    }
                    Expectation::OverlapDrop { factor } => match first {
                        Some(s0) => {
                            let (a, b) = (overlap_index(s0, g), overlap_index(last, g));
                            (b <= factor * a, b / a)
                        }
                        None => (false, f64::NAN),
                    },
                    Expectation::Stationary => {
                        let v = trajectory.last().max_violation;
                        (v <= self.params.stationarity_tol, v)
                    }
                };
                Check {
                    expectation: e.clone(),
                    holds,
                    observed,
                }
            })
            .collect()
    }

    /// Everything that defines the run, for manifests.
    pub fn describe(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Description<'a> {
            name: &'a str,
            parameters: &'a serde_json::Value,
            graph: GraphDoc,
            kernels: &'a KernelSpecs,
            params: &'a DynamicsParams,
            initial: &'a InitialRecipe,
            oracles: &'a [Oracle],
            expectations: &'a [Expectation],
        }
        serde_json::to_value(Description {
            name: &self.name,
            parameters: &self.parameters,
            graph: self.graph.to_doc(),
            kernels: &self.kernels,
            params: &self.params,
            initial: &self.initial,
            oracles: &self.oracles,
            expectations: &self.expectations,
        })
        .expect("scenario descriptions are plain data")
    }
}

/// S = Σ_ι min(u¹_ι, u²_ι) μ_ι.
pub fn overlap_index(state: &SpeciesState, graph: &FiniteGraph) -> f64 {
    let u = state.u();
    graph
        .weights()
        .iter()
        .enumerate()
        .map(|(a, w)| u[[0, a]].min(u[[1, a]]) * w)
        .sum()
}

/// Vertices holding more than `level` mass of the species.
pub fn support_size(state: &SpeciesState, graph: &FiniteGraph, species: usize, level: f64) -> usize {
    state.masses(graph, species).iter().filter(|m| **m > level).count()
}

/// First sampled time at which both species have a vertex holding at least 1 − tol.
pub fn aggregation_time(trajectory: &Trajectory, graph: &FiniteGraph, tol: f64) -> Option<f64> {
    trajectory.points.iter().find_map(|p| {
        let s = p.state.as_ref()?;
        let done = (0..2).all(|i| s.masses(graph, i).into_iter().fold(0.0, f64::max) >= 1.0 - tol);
        done.then_some(p.t)
    })
}

/// Seeded iid uniform densities, each species normalised to mass 1.
pub fn random_initial_state(graph: &FiniteGraph, seed: u64) -> SpeciesState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = graph.len();
    let w = graph.weights();
    let mut rows = [vec![0.0; n], vec![0.0; n]];
    for row in rows.iter_mut() {
        for x in row.iter_mut() {
            *x = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        }
        let mass: f64 = row.iter().zip(w).map(|(u, mu)| u * mu).sum();
        for x in row.iter_mut() {
            *x /= mass;
        }
    }
    SpeciesState::from_rows(&rows[0], &rows[1]).expect("draws are finite and nonnegative")
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Points −r₁, 0, r₂ on a line, self kernels |x − y|, cross kernel −α|x − y|.
///
/// Species 1 starts on the middle vertex, species 2 split ½(1 ± δ) over the
/// outer two.
pub fn three_point(r1: f64, r2: f64, alpha: f64, delta: f64, cutoff: f64) -> Result<Scenario> {
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(invalid("r1 and r2 must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta must lie in (0, 1)"));
    }
    if !(alpha >= 0.0) {
        return Err(invalid("alpha must be nonnegative"));
    }
    if !(cutoff > 0.0) {
        return Err(invalid("cutoff must be positive"));
    }
    let graph = build_graph(vec![vec![-r1], vec![0.0], vec![r2]], vec![1.0; 3], &EtaRule::cutoff(cutoff))?;
    let kernels = KernelSpecs {
        k11: KernelSpec::abs(1.0),
        k22: KernelSpec::abs(1.0),
        k12: KernelSpec::abs(-alpha),
    };
    let params = DynamicsParams::new(2.0, [1.0, 1.0], Mobility::linear(), 10.0);
    let m2 = vec![0.5 * (1.0 + delta), 0.0, 0.5 * (1.0 - delta)];

    let v1 = [
        (0, 1, r1 * (alpha * delta + 1.0)),
        (0, 2, r1 - r2 + alpha * delta * (r1 + r2)),
        (1, 2, r2 * (alpha * delta - 1.0)),
    ];
    let v2 = [
        (0, 1, r1 * (-alpha - delta)),
        (0, 2, alpha * r2 - alpha * r1 - delta * (r1 + r2)),
        (1, 2, r2 * (alpha - delta)),
    ];
    let mut oracles = Vec::new();
    for (species, list) in [(0, v1), (1, v2)] {
        for (from, to, value) in list {
            oracles.push(Oracle::Velocity { species, from, to, value });
            oracles.push(Oracle::Velocity {
                species,
                from: to,
                to: from,
                value: -value,
            });
        }
    }
    let eta = graph.eta();
    let (e12, e13, e23) = (eta[[0, 1]], eta[[0, 2]], eta[[1, 2]]);
    let a = r1 * (1.0 + alpha * delta);
    let b = r2 * (1.0 - alpha * delta);
    let w = alpha * (r1 - r2) + delta * (r1 + r2);
    let (lo, hi) = (0.5 * (1.0 - delta), 0.5 * (1.0 + delta));
    let rates = [
        (0, 0, neg(a) * e12),
        (0, 1, -neg(a) * e12 - neg(b) * e23),
        (0, 2, neg(b) * e23),
        (1, 0, (pos(w) * lo - neg(w) * hi) * e13 - neg(r1 * (alpha + delta)) * hi * e12),
        (1, 1, neg(r1 * (alpha + delta)) * hi * e12 + neg(r2 * (alpha - delta)) * lo * e23),
        (1, 2, (neg(w) * hi - pos(w) * lo) * e13 - neg(r2 * (alpha - delta)) * lo * e23),
    ];
    for (species, vertex, value) in rates {
        oracles.push(Oracle::Rate { species, vertex, value });
    }

    let mut expectations = Vec::new();
    if e13 == 0.0 && e12 > 0.0 && e23 > 0.0 && delta <= alpha.min(1.0 / alpha) {
        expectations.push(Expectation::Stationary);
    }
    Ok(Scenario {
        name: "three_point".into(),
        parameters: serde_json::json!({"r1": r1, "r2": r2, "alpha": alpha, "delta": delta, "cutoff": cutoff}),
        graph,
        kernels,
        params,
        initial: InitialRecipe::Masses {
            m1: vec![0.0, 1.0, 0.0],
            m2,
        },
        oracles,
        expectations,
    })
}

/// Vertices (0,0), (1,0), (1,1), (ε,1) with 1-norm kernels |x − y|₁ and
/// −α|x − y|₁; species 1 starts on (ε,1), species 2 on (0,0).
pub fn four_point(epsilon: f64, alpha: f64, beta2: f64) -> Result<Scenario> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(invalid("epsilon must lie in [0, 1) so that the vertices stay distinct"));
    }
    if !(alpha >= 0.0) {
        return Err(invalid("alpha must be nonnegative"));
    }
    if !(beta2 > 0.0) {
        return Err(invalid("beta2 must be positive"));
    }
    let graph = build_graph(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![epsilon, 1.0]],
        vec![1.0; 4],
        &EtaRule::complete(),
    )?;
    let one = |c: f64| KernelSpec::abs(c).with_norm(Norm::OneNorm);
    let kernels = KernelSpecs {
        k11: one(1.0),
        k22: one(1.0),
        k12: one(-alpha),
    };
    let params = DynamicsParams::new(2.0, [1.0, beta2], Mobility::linear(), 20.0);

    let v34 = (1.0 - alpha) * (1.0 - epsilon);
    let w12 = beta2 * (-1.0 + alpha - 2.0 * alpha * epsilon);
    let w13 = beta2 * (-2.0 - 2.0 * alpha * epsilon);
    let w14 = -beta2 * (1.0 + alpha) * (1.0 + epsilon);
    let oracles = vec![
        Oracle::Velocity {
            species: 0,
            from: 2,
            to: 3,
            value: v34,
        },
        Oracle::Rate {
            species: 0,
            vertex: 2,
            value: neg(v34),
        },
        Oracle::Velocity {
            species: 1,
            from: 0,
            to: 1,
            value: w12,
        },
        Oracle::Velocity {
            species: 1,
            from: 0,
            to: 2,
            value: w13,
        },
        Oracle::Velocity {
            species: 1,
            from: 0,
            to: 3,
            value: w14,
        },
        Oracle::Rate {
            species: 1,
            vertex: 0,
            value: -(pos(w12) + pos(w13) + pos(w14)),
        },
    ];

    let mut expectations = Vec::new();
    if alpha < 1.0 {
        expectations.push(Expectation::FinalMassBelow {
            species: 0,
            vertex: 2,
            value: 1e-12,
        });
        expectations.push(Expectation::FinalMassAbove {
            species: 0,
            vertex: 3,
            value: 1.0 - 1e-12,
        });
    } else if alpha > 1.0 && epsilon > 0.0 && w12 <= 0.0 {
        expectations.push(Expectation::FinalMassAbove {
            species: 0,
            vertex: 2,
            value: 0.99,
        });
        expectations.push(Expectation::FinalMassAbove {
            species: 1,
            vertex: 0,
            value: 0.99,
        });
    } else if alpha > 1.0 && epsilon == 0.0 && beta2 == 1.0 {
        for species in 0..2 {
            expectations.push(Expectation::EvenSplit { species, tol: 1e-3 });
        }
    }
    Ok(Scenario {
        name: "four_point".into(),
        parameters: serde_json::json!({"epsilon": epsilon, "alpha": alpha, "beta2": beta2}),
        graph,
        kernels,
        params,
        initial: InitialRecipe::Masses {
            m1: vec![0.0, 0.0, 0.0, 1.0],
            m2: vec![1.0, 0.0, 0.0, 0.0],
        },
        oracles,
        expectations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKernels {
    /// −log|x| + |x|²/400 with cross kernel (10 − 20|x|)₊.
    KefGlobal,
    /// −log|x| − |x|²/400, the quadratic sign as printed for the first lattice run.
    KefGlobalLiteral,
    /// Self kernels truncated at 0.2 (a = 1, b = 1/400), cross kernel (4 − 20|x|)₊.
    KefTruncated,
}

/// n×n unit lattice, fully connected, unit weights, random start.
pub fn lattice_pattern(n: usize, variant: LatticeKernels, seed: u64) -> Result<Scenario> {
    if n < 3 {
        return Err(invalid("lattice side must be at least 3"));
    }
    let graph = FiniteGraph::lattice(n, 1.0, &EtaRule::complete())?;
    let (self_form, cross, t_end) = match variant {
        LatticeKernels::KefGlobal => (KernelForm::LogQuad { a: 1.0, b: 1.0 / 200.0 }, KernelSpec::tent(10.0, 20.0), 5000.0),
        LatticeKernels::KefGlobalLiteral => (
            KernelForm::LogQuad { a: 1.0, b: -1.0 / 200.0 },
            KernelSpec::tent(10.0, 20.0),
            5000.0,
        ),
        LatticeKernels::KefTruncated => (
            KernelForm::TruncLogQuad {
                a: 1.0,
                b: 1.0 / 400.0,
                s: 0.2,
            },
            KernelSpec::tent(4.0, 20.0),
            200.0,
        ),
    };
    let kernels = KernelSpecs {
        k11: KernelSpec::new(self_form.clone()),
        k22: KernelSpec::new(self_form),
        k12: cross,
    };
    let expectations = match variant {
        LatticeKernels::KefTruncated => vec![Expectation::OverlapDrop { factor: 0.5 }],
        _ => Vec::new(),
    };
    Ok(Scenario {
        name: "lattice_pattern".into(),
        parameters: serde_json::json!({"n": n, "variant": variant, "seed": seed}),
        graph,
        kernels,
        params: DynamicsParams::new(2.0, [1.0, 1.0], Mobility::linear(), t_end),
        initial: InitialRecipe::Random { seed },
        oracles: Vec::new(),
        expectations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityVariant {
    Linear,
    VolumeFilling,
}

/// 10×10 fully connected lattice with μ = 1/20 and attractive kernels
/// 20(e^|x| − 1) for all species pairs.
pub fn mobility_experiment(variant: MobilityVariant, p: f64, seed: u64) -> Result<Scenario> {
    if !(p > 1.0) {
        return Err(invalid("p must exceed 1"));
    }
    let graph = FiniteGraph::lattice(10, 1.0 / 20.0, &EtaRule::complete())?;
    let attract = KernelSpec::new(KernelForm::ExpScaled { c: 20.0 });
    let kernels = KernelSpecs {
        k11: attract.clone(),
        k22: attract.clone(),
        k12: attract,
    };
    let mobility = match variant {
        MobilityVariant::Linear => Mobility::linear(),
        MobilityVariant::VolumeFilling => Mobility::volume_filling(),
    };
    let expectations = match variant {
        MobilityVariant::Linear => (0..2).map(|species| Expectation::SingleVertex { species, tol: 1e-3 }).collect(),
        MobilityVariant::VolumeFilling => {
            let mut e = vec![Expectation::DensityCap { cap: 1.0 }];
            for species in 0..2 {
                e.push(Expectation::SupportBetween {
                    species,
                    min: 20,
                    max: 25,
                    level: 1e-6,
                });
            }
            e
        }
    };
    Ok(Scenario {
        name: "mobility_experiment".into(),
        parameters: serde_json::json!({"variant": variant, "p": p, "seed": seed}),
        graph,
        kernels,
        params: DynamicsParams::new(p, [1.0, 1.0], mobility, 50.0),
        initial: InitialRecipe::Random { seed },
        oracles: Vec::new(),
        expectations,
    })
}

fn d_r1() -> f64 {
    1.0
}
fn d_alpha() -> f64 {
    0.5
}
fn d_delta() -> f64 {
    0.25
}
fn d_cutoff() -> f64 {
    1.5
}
fn d_epsilon() -> f64 {
    0.25
}
fn d_alpha4() -> f64 {
    1.5
}
fn d_n() -> usize {
    10
}
fn d_variant() -> LatticeKernels {
    LatticeKernels::KefGlobal
}
fn d_mobility() -> MobilityVariant {
    MobilityVariant::Linear
}
fn d_p() -> f64 {
    2.0
}

/// A scenario by name with its builder arguments, as read from config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioRequest {
    ThreePoint {
        #[serde(default = "d_r1")]
        r1: f64,
        #[serde(default = "d_r1")]
        r2: f64,
        #[serde(default = "d_alpha")]
        alpha: f64,
        #[serde(default = "d_delta")]
        delta: f64,
        #[serde(default = "d_cutoff")]
        cutoff: f64,
    },
    FourPoint {
        #[serde(default = "d_epsilon")]
        epsilon: f64,
        #[serde(default = "d_alpha4")]
        alpha: f64,
        #[serde(default = "d_r1")]
        beta2: f64,
    },
    LatticePattern {
        #[serde(default = "d_n")]
        n: usize,
        #[serde(default = "d_variant")]
        variant: LatticeKernels,
    },
    MobilityExperiment {
        #[serde(default = "d_mobility")]
        variant: MobilityVariant,
        #[serde(default = "d_p")]
        p: f64,
    },
}

impl ScenarioRequest {
    pub fn build(&self, seed: u64) -> Result<Scenario> {
        match *self {
            ScenarioRequest::ThreePoint {
                r1,
                r2,
                alpha,
                delta,
                cutoff,
            } => three_point(r1, r2, alpha, delta, cutoff),
            ScenarioRequest::FourPoint { epsilon, alpha, beta2 } => four_point(epsilon, alpha, beta2),
            ScenarioRequest::LatticePattern { n, variant } => lattice_pattern(n, variant, seed),
            ScenarioRequest::MobilityExperiment { variant, p } => mobility_experiment(variant, p, seed),
        }
    }
}
