//! Stationary states of the two-vertex graph with constant-diagonal kernels.
//!
//! Everything here is expressed through the three scalars D11, D22, D12 and
//! the mass coordinates (x, y) = (ρ¹(x₁), ρ²(x₁)) with μ = (1, 1).

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_with, is_stationary, rhs, DynamicsParams, IntegrateOptions, Mobility, Sampling};
use crate::error::{Error, Result};
use crate::graph::{build_graph, EtaRule, FiniteGraph, SpeciesState};
use crate::kernels::KernelSet;

/// Relative tolerance deciding equality in the existence conditions.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPointProblem {
    pub d11: f64,
    pub d22: f64,
    pub d12: f64,
    #[serde(default = "unit_beta")]
    pub beta: [f64; 2],
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default)]
    pub mobility: Mobility,
}

fn unit_beta() -> [f64; 2] {
    [1.0, 1.0]
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateTag {
    A,
    ArFamily,
    B1,
    B2,
    C,
    D,
    /// Continua that only appear in the decoupled case D12 = 0.
    DecoupledFamily,
}

impl StateTag {
    pub fn name(self) -> &'static str {
        match self {
            StateTag::A => "a",
            StateTag::ArFamily => "a_r",
            StateTag::B1 => "b1",
            StateTag::B2 => "b2",
            StateTag::C => "c",
            StateTag::D => "d",
            StateTag::DecoupledFamily => "decoupled_family",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    AsymptoticallyStable,
    StableNotAsymptotic,
    Unstable,
}

/// Where the states of an entry live in the (x, y) square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Isolated states; two of them for a symmetric pair.
    Points(Vec<[f64; 2]>),
    /// Straight segments of stationary states, as (start, end).
    Segments(Vec<[[f64; 2]; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub tag: StateTag,
    pub geometry: Geometry,
    pub stability: Stability,
    /// E − E(ρ_a); constant along families.
    pub energy: f64,
    /// Parameter range of the a_r family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_range: Option<[f64; 2]>,
}

impl Entry {
    /// Isolated points, or a few samples along each segment.
    pub fn sample_points(&self) -> Vec<[f64; 2]> {
        match &self.geometry {
            Geometry::Points(p) => p.clone(),
            Geometry::Segments(segs) => segs
                .iter()
                .flat_map(|[a, b]| {
                    [0.0, 0.25, 0.5, 0.75, 1.0]
                        .map(|t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
                })
                .collect(),
        }
    }
}

/// An existence condition that failed only by equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCase {
    pub tag: StateTag,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointClassification {
    pub decoupled: bool,
    pub degenerate: bool,
    pub entries: Vec<Entry>,
    pub boundary: Vec<BoundaryCase>,
}

impl TwoPointClassification {
    pub fn get(&self, tag: StateTag) -> Option<&Entry> {
        self.entries.iter().find(|e| e.tag == tag)
    }

    pub fn has(&self, tag: StateTag) -> bool {
        self.get(tag).is_some()
    }
}

/// A single state for [`energy_gap`]; a_r carries its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateRef {
    A,
    Ar(f64),
    B1,
    B2,
    C,
    D,
}

impl StateRef {
    fn tag(self) -> StateTag {
        match self {
            StateRef::A => StateTag::A,
            StateRef::Ar(_) => StateTag::ArFamily,
            StateRef::B1 => StateTag::B1,
            StateRef::B2 => StateTag::B2,
            StateRef::C => StateTag::C,
            StateRef::D => StateTag::D,
        }
    }
}

fn lt(a: f64, b: f64, scale: f64) -> (bool, bool) {
    let eq = (a - b).abs() <= BOUNDARY_TOL * scale;
    (a < b && !eq, eq)
}

impl TwoPointProblem {
    pub fn new(d11: f64, d22: f64, d12: f64) -> Self {
        Self {
            d11,
            d22,
            d12,
            beta: unit_beta(),
            p: 2.0,
            mobility: Mobility::linear(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for d in [self.d11, self.d22, self.d12] {
            if !d.is_finite() {
                return Err(Error::InvalidParameter("D values must be finite".into()));
            }
        }
        if !self.mobility.upwind_admissible() {
            return Err(Error::InvalidParameter(
                "the mobility must vanish exactly on empty vertices (theta1 > 0)".into(),
            ));
        }
        self.params(1.0).validate()
    }

    fn scale(&self) -> f64 {
        self.d11.abs().max(self.d22.abs()).max(self.d12.abs()).max(1.0)
    }

    fn dii(&self, i: usize) -> f64 {
        if i == 0 {
            self.d11
        } else {
            self.d22
        }
    }

    pub fn graph(&self) -> FiniteGraph {
        build_graph(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0], &EtaRule::complete())
            .expect("two distinct unit-weight vertices")
    }

    pub fn kernels(&self) -> KernelSet {
        KernelSet::two_point(self.d11, self.d22, self.d12)
    }

    pub fn params(&self, t_end: f64) -> DynamicsParams {
        DynamicsParams::new(self.p, self.beta, self.mobility, t_end)
    }

    /// The state with mass x of species 1 and y of species 2 on x₁.
    pub fn state(&self, x: f64, y: f64) -> Result<SpeciesState> {
        SpeciesState::from_rows(&[x, 1.0 - x], &[y, 1.0 - y])
    }

    /// E − E(ρ_a) = D11 x'² + D22 y'² + 2 D12 x'y' with x' = x − ½, y' = y − ½.
    pub fn relative_energy(&self, x: f64, y: f64) -> f64 {
        let (a, b) = (x - 0.5, y - 0.5);
        self.d11 * a * a + self.d22 * b * b + 2.0 * self.d12 * a * b
    }

    /// Coordinates of a single state from its closed form.
    pub fn point(&self, state: StateRef) -> [f64; 2] {
        match state {
            StateRef::A => [0.5, 0.5],
            StateRef::Ar(r) => [0.5 * (1.0 + r), 0.5 * (1.0 - self.d12 / self.d22 * r)],
            StateRef::B1 => [1.0, 0.5 * (1.0 - self.d12 / self.d22)],
            StateRef::B2 => [0.5 * (1.0 - self.d12 / self.d11), 1.0],
            StateRef::C => [1.0, 1.0],
            StateRef::D => [1.0, 0.0],
        }
    }

    pub fn classify(&self) -> Result<TwoPointClassification> {
        self.validate()?;
        if self.d12 == 0.0 {
            Ok(self.classify_decoupled())
        } else {
            Ok(self.classify_coupled())
        }
    }

    fn classify_coupled(&self) -> TwoPointClassification {
        let (d11, d22, d12) = (self.d11, self.d22, self.d12);
        let scale = self.scale();
        let mut boundary = Vec::new();
        let mut entries = Vec::new();

        let prod = d11 * d22;
        let degenerate = (prod - d12 * d12).abs() <= BOUNDARY_TOL * scale * scale;
        let family_label = if d11 > 0.0 {
            Stability::StableNotAsymptotic
        } else {
            Stability::Unstable
        };

        let mut b_present = [false; 2];
        let mut b_points = [[0.0; 2]; 2];
        for i in 0..2 {
            let k = 1 - i;
            let (dii, dkk) = (self.dii(i), self.dii(k));
            if dkk == 0.0 {
                continue;
            }
            let (within, within_eq) = lt(d12.abs(), dkk.abs(), scale);
            let (below, below_eq) = lt(dii, d12 * d12 / dkk, scale);
            let tag = if i == 0 { StateTag::B1 } else { StateTag::B2 };
            if (within || within_eq) && below {
                b_present[i] = true;
                let other = 0.5 * (1.0 - d12 / dkk);
                b_points[i] = if i == 0 { [1.0, other] } else { [other, 1.0] };
            } else if (within || within_eq) && below_eq {
                boundary.push(BoundaryCase {
                    tag,
                    condition: format!("D{0}{0} = D12^2 / D{1}{1}", i + 1, k + 1),
                });
            }
        }
        let (c1, c1_eq) = lt(d11, -d12, scale);
        let (c2, c2_eq) = lt(d22, -d12, scale);
        let c_present = c1 && c2;
        if !c_present && (c1 || c1_eq) && (c2 || c2_eq) {
            boundary.push(BoundaryCase {
                tag: StateTag::C,
                condition: "D_ii = -D12".into(),
            });
        }
        let (e1, e1_eq) = lt(d11, d12, scale);
        let (e2, e2_eq) = lt(d22, d12, scale);
        let d_present = e1 && e2;
        if !d_present && (e1 || e1_eq) && (e2 || e2_eq) {
            boundary.push(BoundaryCase {
                tag: StateTag::D,
                condition: "D_ii = D12".into(),
            });
        }

        let only_a = !degenerate && !b_present[0] && !b_present[1] && !c_present && !d_present;
        let a_label = if only_a {
            Stability::AsymptoticallyStable
        } else if degenerate {
            family_label
        } else {
            Stability::Unstable
        };
        entries.push(Entry {
            tag: StateTag::A,
            geometry: Geometry::Points(vec![[0.5, 0.5]]),
            stability: a_label,
            energy: 0.0,
            r_range: None,
        });
        if degenerate {
            let ratio = (d22 / d12).abs();
            let lo = (-1.0f64).max(-ratio);
            let hi = 1.0f64.min(ratio);
            let start = self.point(StateRef::Ar(lo));
            let end = self.point(StateRef::Ar(hi));
            entries.push(Entry {
                tag: StateTag::ArFamily,
                geometry: Geometry::Segments(vec![[start, end]]),
                stability: family_label,
                energy: 0.0,
                r_range: Some([lo, hi]),
            });
        }
        for i in 0..2 {
            if !b_present[i] {
                continue;
            }
            let k = 1 - i;
            let stable = !b_present[k] && !c_present && !d_present;
            let p = b_points[i];
            entries.push(Entry {
                tag: if i == 0 { StateTag::B1 } else { StateTag::B2 },
                geometry: Geometry::Points(vec![p, [1.0 - p[0], 1.0 - p[1]]]),
                stability: if stable {
                    Stability::AsymptoticallyStable
                } else {
                    Stability::Unstable
                },
                energy: self.relative_energy(p[0], p[1]),
                r_range: None,
            });
        }
        if c_present {
            entries.push(Entry {
                tag: StateTag::C,
                geometry: Geometry::Points(vec![[1.0, 1.0], [0.0, 0.0]]),
                stability: Stability::AsymptoticallyStable,
                energy: self.relative_energy(1.0, 1.0),
                r_range: None,
            });
        }
        if d_present {
            entries.push(Entry {
                tag: StateTag::D,
                geometry: Geometry::Points(vec![[1.0, 0.0], [0.0, 1.0]]),
                stability: Stability::AsymptoticallyStable,
                energy: self.relative_energy(1.0, 0.0),
                r_range: None,
            });
        }
        TwoPointClassification {
            decoupled: false,
            degenerate,
            entries,
            boundary,
        }
    }

    /// D12 = 0: each species on its own, combined as a product.
    fn classify_decoupled(&self) -> TwoPointClassification {
        #[derive(Clone, Copy, PartialEq)]
        enum Species {
            Repulsive,
            Attractive,
            Flat,
        }
        let kind = |d: f64| {
            if d > 0.0 {
                Species::Repulsive
            } else if d < 0.0 {
                Species::Attractive
            } else {
                Species::Flat
            }
        };
        let (s1, s2) = (kind(self.d11), kind(self.d22));
        let mut entries = Vec::new();
        let combine = |a: Stability, b: Stability| {
            use Stability::*;
            match (a, b) {
                (Unstable, _) | (_, Unstable) => Unstable,
                (AsymptoticallyStable, AsymptoticallyStable) => AsymptoticallyStable,
                _ => StableNotAsymptotic,
            }
        };
        let half_label = |s: Species| match s {
            Species::Repulsive => Stability::AsymptoticallyStable,
            Species::Attractive => Stability::Unstable,
            Species::Flat => Stability::StableNotAsymptotic,
        };

        if s1 != Species::Flat && s2 != Species::Flat {
            entries.push(Entry {
                tag: StateTag::A,
                geometry: Geometry::Points(vec![[0.5, 0.5]]),
                stability: combine(half_label(s1), half_label(s2)),
                energy: 0.0,
                r_range: None,
            });
            if s1 == Species::Attractive {
                entries.push(Entry {
                    tag: StateTag::B1,
                    geometry: Geometry::Points(vec![[1.0, 0.5], [0.0, 0.5]]),
                    stability: combine(Stability::AsymptoticallyStable, half_label(s2)),
                    energy: self.relative_energy(1.0, 0.5),
                    r_range: None,
                });
            }
            if s2 == Species::Attractive {
                entries.push(Entry {
                    tag: StateTag::B2,
                    geometry: Geometry::Points(vec![[0.5, 1.0], [0.5, 0.0]]),
                    stability: combine(half_label(s1), Stability::AsymptoticallyStable),
                    energy: self.relative_energy(0.5, 1.0),
                    r_range: None,
                });
            }
            if s1 == Species::Attractive && s2 == Species::Attractive {
                for (tag, pts) in [
                    (StateTag::C, vec![[1.0, 1.0], [0.0, 0.0]]),
                    (StateTag::D, vec![[1.0, 0.0], [0.0, 1.0]]),
                ] {
                    let energy = self.relative_energy(pts[0][0], pts[0][1]);
                    entries.push(Entry {
                        tag,
                        geometry: Geometry::Points(pts),
                        stability: Stability::AsymptoticallyStable,
                        energy,
                        r_range: None,
                    });
                }
            }
        } else {
            // Per species: the stationary coordinates, each with its label.
            let options = |s: Species| -> Vec<(Option<f64>, Stability)> {
                match s {
                    Species::Repulsive => vec![(Some(0.5), Stability::AsymptoticallyStable)],
                    Species::Attractive => vec![
                        (Some(0.5), Stability::Unstable),
                        (Some(1.0), Stability::AsymptoticallyStable),
                        (Some(0.0), Stability::AsymptoticallyStable),
                    ],
                    Species::Flat => vec![(None, Stability::StableNotAsymptotic)],
                }
            };
            // Group by the label of the fixed coordinate so every entry has one label.
            let mut groups: Vec<(Stability, Vec<[[f64; 2]; 2]>, f64)> = Vec::new();
            for (x, lx) in options(s1) {
                for (y, ly) in options(s2) {
                    let seg = match (x, y) {
                        (None, None) => [[0.0, 0.0], [1.0, 1.0]],
                        (None, Some(y)) => [[0.0, y], [1.0, y]],
                        (Some(x), None) => [[x, 0.0], [x, 1.0]],
                        (Some(_), Some(_)) => unreachable!("at least one species is flat"),
                    };
                    let label = combine(lx, ly);
                    let energy = self.relative_energy(seg[0][0], seg[0][1]);
                    match groups.iter_mut().find(|g| g.0 == label && g.2 == energy) {
                        Some(g) => g.1.push(seg),
                        None => groups.push((label, vec![seg], energy)),
                    }
                }
            }
            for (stability, segs, energy) in groups {
                entries.push(Entry {
                    tag: StateTag::DecoupledFamily,
                    geometry: Geometry::Segments(segs),
                    stability,
                    energy,
                    r_range: None,
                });
            }
        }
        TwoPointClassification {
            decoupled: true,
            degenerate: self.d11 * self.d22 == 0.0,
            entries,
            boundary: Vec::new(),
        }
    }
}

/// Closed-form energy gaps between the canonical states.
///
/// The seven direct pairs use their own formulas; other pairs are assembled
/// from them.
pub fn gap_formula(problem: &TwoPointProblem, from: StateRef, to: StateRef) -> f64 {
    let (d11, d22, d12) = (problem.d11, problem.d22, problem.d12);
    let d_aa_r = |r: f64| 0.25 * (d11 - d12 * d12 / d22) * r * r;
    let d_ab1 = 0.25 * (d11 - d12 * d12 / d22);
    let d_ab2 = 0.25 * (d22 - d12 * d12 / d11);
    let d_ac = 0.25 * (d11 + 2.0 * d12 + d22);
    let d_ad = 0.25 * (d11 - 2.0 * d12 + d22);
    let d_b1c = (d22 + d12).powi(2) / (4.0 * d22);
    let d_b2c = (d11 + d12).powi(2) / (4.0 * d11);
    let d_b1d = (d22 - d12).powi(2) / (4.0 * d22);
    let d_b2d = (d11 - d12).powi(2) / (4.0 * d11);
    let d_cd = -d12;

    use StateRef::*;
    match (from, to) {
        (A, Ar(r)) => d_aa_r(r),
        (A, B1) => d_ab1,
        (A, B2) => d_ab2,
        (A, C) => d_ac,
        (A, D) => d_ad,
        (B1, C) => d_b1c,
        (B2, C) => d_b2c,
        (B1, D) => d_b1d,
        (B2, D) => d_b2d,
        (C, D) => d_cd,
        (x, y) if x == y => 0.0,
        (A, A) => 0.0,
        (x, A) => -gap_formula(problem, A, x),
        (D, C) => -d_cd,
        (C, x @ (B1 | B2)) => -gap_formula(problem, x, C),
        (D, x @ (B1 | B2)) => -gap_formula(problem, x, D),
        (x, y) => gap_formula(problem, A, y) - gap_formula(problem, A, x),
    }
}

/// E(to) − E(from), for states present in the classification.
pub fn energy_gap(problem: &TwoPointProblem, from: StateRef, to: StateRef) -> Result<f64> {
    let classes = problem.classify()?;
    for s in [from, to] {
        let present = match s {
            StateRef::Ar(r) => classes
                .get(StateTag::ArFamily)
                .and_then(|e| e.r_range)
                .is_some_and(|[lo, hi]| r >= lo && r <= hi),
            StateRef::A => true,
            other => classes.has(other.tag()),
        };
        if !present {
            return Err(Error::TagNotPresent(format!("{s:?}")));
        }
    }
    Ok(gap_formula(problem, from, to))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortraitRecord {
    pub x: f64,
    pub y: f64,
    pub energy: f64,
    pub dxdt: f64,
    pub dydt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePortrait {
    pub grid_n: usize,
    pub records: Vec<PortraitRecord>,
    pub classification: TwoPointClassification,
}

/// Energy (relative to ρ_a) and du/dt at the nodes of a grid_n × grid_n grid on [0, 1]².
pub fn phase_portrait(problem: &TwoPointProblem, grid_n: usize) -> Result<PhasePortrait> {
    if grid_n < 2 {
        return Err(Error::InvalidParameter("grid_n must be at least 2".into()));
    }
    let classification = problem.classify()?;
    let graph = problem.graph();
    let kernels = problem.kernels();
    let params = problem.params(1.0);
    let h = 1.0 / (grid_n - 1) as f64;
    let mut records = Vec::with_capacity(grid_n * grid_n);
    for a in 0..grid_n {
        let x = a as f64 * h;
        for b in 0..grid_n {
            let y = b as f64 * h;
            let (du, _) = rhs(&problem.state(x, y)?, &graph, &kernels, &params)?;
            records.push(PortraitRecord {
                x,
                y,
                energy: problem.relative_energy(x, y),
                dxdt: du[[0, 0]],
                dydt: du[[1, 0]],
            });
        }
    }
    Ok(PhasePortrait {
        grid_n,
        records,
        classification,
    })
}

/// Settings for the numerical stability check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossValidation {
    pub perturbations: usize,
    pub magnitude: f64,
    /// Asymptotically stable states must be re-approached this closely.
    pub attract_tol: f64,
    /// Unstable states must be left this far by some perturbation.
    pub escape_dist: f64,
    pub t_end: f64,
    pub seed: u64,
}

impl Default for CrossValidation {
    fn default() -> Self {
        Self {
            perturbations: 100,
            magnitude: 1e-2,
            attract_tol: 1e-3,
            escape_dist: 0.1,
            t_end: 200.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateCheck {
    pub tag: StateTag,
    pub point: [f64; 2],
    pub stability: Stability,
    /// Largest final distance over all perturbations.
    pub max_final_distance: f64,
    /// Largest distance reached at any time.
    pub max_excursion: f64,
    pub passed: bool,
}

fn reflect(v: f64) -> f64 {
    if v < 0.0 {
        -v
    } else if v > 1.0 {
        2.0 - v
    } else {
        v
    }
}

/// Integrates from seeded perturbations of every classified state and
/// compares the behaviour with the analytic label. Mismatches are errors.
pub fn cross_validate(problem: &TwoPointProblem, settings: &CrossValidation) -> Result<Vec<StateCheck>> {
    let checks = cross_validate_report(problem, settings)?;
    if let Some(bad) = checks.iter().find(|c| !c.passed) {
        return Err(Error::StabilityMismatch {
            tag: bad.tag.name().into(),
            detail: format!(
                "{:?} at {:?}: final distance {:.3e}, excursion {:.3e}",
                bad.stability, bad.point, bad.max_final_distance, bad.max_excursion
            ),
        });
    }
    Ok(checks)
}

/// Same as [`cross_validate`] but returns the per-state results without failing.
pub fn cross_validate_report(problem: &TwoPointProblem, settings: &CrossValidation) -> Result<Vec<StateCheck>> {
    let classes = problem.classify()?;
    let graph = problem.graph();
    let kernels = problem.kernels();
    let mut params = problem.params(settings.t_end);
    params.dt_max = 5e-2;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut options = IntegrateOptions::sampled(Sampling::Every(10));
    options.record_states = false;
    let mut out = Vec::new();
    for entry in &classes.entries {
        for point in entry.sample_points() {
            let mut max_final: f64 = 0.0;
            let mut max_excursion: f64 = 0.0;
            for _ in 0..settings.perturbations {
                let angle = rng.gen::<f64>() * std::f64::consts::TAU;
                let x = reflect(point[0] + settings.magnitude * angle.cos());
                let y = reflect(point[1] + settings.magnitude * angle.sin());
                let start = problem.state(x, y)?;
                let dist = |s: &SpeciesState| {
                    let u = s.u();
                    ((u[[0, 0]] - point[0]).powi(2) + (u[[1, 0]] - point[1]).powi(2)).sqrt()
                };
                let mut excursion: f64 = 0.0;
                let escape = settings.escape_dist;
                let unstable = entry.stability == Stability::Unstable;
                let tr = integrate_with(&start, &graph, &kernels, &params, &options, |p| {
                    if let Some(s) = &p.state {
                        excursion = excursion.max(dist(s));
                    }
                    if unstable && excursion > escape {
                        ControlFlow::Break(())
                    } else {
                        ControlFlow::Continue(())
                    }
                })?;
                if tr.is_aborted() {
                    return Err(Error::StabilityMismatch {
                        tag: entry.tag.name().into(),
                        detail: format!("integration aborted: {:?}", tr.outcome),
                    });
                }
                let last = dist(tr.final_state());
                excursion = excursion.max(last);
                max_final = max_final.max(last);
                max_excursion = max_excursion.max(excursion);
                if unstable && max_excursion > escape {
                    break;
                }
            }
            let passed = match entry.stability {
                Stability::AsymptoticallyStable => max_final <= settings.attract_tol,
                Stability::Unstable => max_excursion > settings.escape_dist,
                Stability::StableNotAsymptotic => max_excursion <= settings.escape_dist,
            };
            out.push(StateCheck {
                tag: entry.tag,
                point,
                stability: entry.stability,
                max_final_distance: max_final,
                max_excursion,
                passed,
            });
        }
    }
    Ok(out)
}

/// Checks every classified state with the generic edge criterion.
pub fn verify_stationary(problem: &TwoPointProblem, classes: &TwoPointClassification, tol: f64) -> Result<bool> {
    let graph = problem.graph();
    let kernels = problem.kernels();
    let params = problem.params(1.0);
    for entry in &classes.entries {
        for [x, y] in entry.sample_points() {
            let r = is_stationary(&problem.state(x, y)?, &kernels, &params, &graph, tol)?;
            if !r.stationary {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
