//! Interaction kernels, diagonal differences and the aggregation checks.
//!
//! Log-singular kernels get the value 0 on the diagonal. That only shifts the
//! energy by a constant for constant-diagonal classifiers, but it does define
//! D for those kernels, so keep it in mind when reading their D matrices.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, Norm, SpeciesState};

/// Relative tolerance for symmetry of explicit matrices and for "constant diagonal".
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelForm {
    /// (c1 − c2|x|)₊
    Tent { c1: f64, c2: f64 },
    /// −a log|x| + b|x|²/2
    LogQuad { a: f64, b: f64 },
    /// −a log|x| + b|x|² for |x| < s, constant −a log s + b s² beyond.
    TruncLogQuad { a: f64, b: f64, s: f64 },
    /// c (exp|x| − 1)
    ExpScaled { c: f64 },
    /// c |x|
    AbsScaled { c: f64 },
    Constant { c: f64 },
    Explicit { matrix: Vec<Vec<f64>> },
    /// Explicit matrix read from a headerless CSV file.
    Csv { path: PathBuf },
}

impl KernelForm {
    fn is_log_singular(&self) -> bool {
        matches!(self, KernelForm::LogQuad { .. } | KernelForm::TruncLogQuad { .. })
    }

    /// Radial profile at distance d. Not defined for explicit matrices.
    pub fn radial(&self, d: f64) -> f64 {
        match *self {
            KernelForm::Tent { c1, c2 } => (c1 - c2 * d).max(0.0),
            KernelForm::LogQuad { a, b } => {
                if d == 0.0 {
                    0.0
                } else {
                    -a * d.ln() + b * d * d / 2.0
                }
            }
            KernelForm::TruncLogQuad { a, b, s } => {
                if d == 0.0 {
                    0.0
                } else if d < s {
                    -a * d.ln() + b * d * d
                } else {
                    -a * s.ln() + b * s * s
                }
            }
            KernelForm::ExpScaled { c } => c * d.exp_m1(),
            KernelForm::AbsScaled { c } => c * d,
            KernelForm::Constant { c } => c,
            KernelForm::Explicit { .. } | KernelForm::Csv { .. } => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec", into = "RawKernelSpec")]
pub struct KernelSpec {
    pub form: KernelForm,
    pub norm: Norm,
    /// Scalar multiplier applied to the whole kernel.
    pub sign: f64,
}

impl KernelSpec {
    pub fn new(form: KernelForm) -> Self {
        Self {
            form,
            norm: Norm::Euclidean,
            sign: 1.0,
        }
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_sign(mut self, sign: f64) -> Self {
        self.sign = sign;
        self
    }

    pub fn tent(c1: f64, c2: f64) -> Self {
        Self::new(KernelForm::Tent { c1, c2 })
    }

    pub fn abs(c: f64) -> Self {
        Self::new(KernelForm::AbsScaled { c })
    }

    pub fn constant(c: f64) -> Self {
        Self::new(KernelForm::Constant { c })
    }

    pub fn explicit(matrix: &Array2<f64>) -> Self {
        Self::new(KernelForm::Explicit {
            matrix: matrix.outer_iter().map(|r| r.to_vec()).collect(),
        })
    }

    /// Resolves a relative CSV path against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let KernelForm::Csv { path } = &mut self.form {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn matrix(&self, graph: &FiniteGraph) -> Result<Array2<f64>> {
        let n = graph.len();
        let mut k = match &self.form {
            KernelForm::Explicit { matrix } => rows_to_array(matrix, n)?,
            KernelForm::Csv { path } => load_matrix_csv(path)?,
            form => {
                let mut k = Array2::zeros((n, n));
                for a in 0..n {
                    k[[a, a]] = form.radial(0.0);
                    for b in a + 1..n {
                        let d = graph.distance(a, b, self.norm);
                        if d == 0.0 && form.is_log_singular() {
                            return Err(Error::SingularKernel(a, b));
                        }
                        let v = form.radial(d);
                        k[[a, b]] = v;
                        k[[b, a]] = v;
                    }
                }
                k
            }
        };
        if k.nrows() != n || k.ncols() != n {
            return Err(Error::Shape(format!("kernel matrix must be {n}x{n}, got {:?}", k.shape())));
        }
        if self.sign != 1.0 {
            k.mapv_inplace(|v| v * self.sign);
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
enum RawKernelSpec {
    Tent {
        c1: f64,
        c2: f64,
        #[serde(default)]
        norm: Norm,
        #[serde(default = "unit")]
        sign: f64,
    },
    LogQuad {
        a: f64,
        b: f64,
        #[serde(default)]
        norm: Norm,
        #[serde(default = "unit")]
        sign: f64,
    },
    TruncLogQuad {
        a: f64,
        b: f64,
        s: f64,
        #[serde(default)]
        norm: Norm,
        #[serde(default = "unit")]
        sign: f64,
    },
    ExpScaled {
        c: f64,
        #[serde(default)]
        norm: Norm,
        #[serde(default = "unit")]
        sign: f64,
    },
    AbsScaled {
        c: f64,
        #[serde(default)]
        norm: Norm,
        #[serde(default = "unit")]
        sign: f64,
    },
    Constant {
        c: f64,
        #[serde(default)]
        norm: Norm,
        #[serde(default = "unit")]
        sign: f64,
    },
    Explicit {
        #[serde(default)]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        csv: Option<PathBuf>,
        #[serde(default = "unit")]
        sign: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = String;

    fn try_from(raw: RawKernelSpec) -> std::result::Result<Self, String> {
        let (form, norm, sign) = match raw {
            RawKernelSpec::Tent { c1, c2, norm, sign } => (KernelForm::Tent { c1, c2 }, norm, sign),
            RawKernelSpec::LogQuad { a, b, norm, sign } => (KernelForm::LogQuad { a, b }, norm, sign),
            RawKernelSpec::TruncLogQuad { a, b, s, norm, sign } => {
                if !(s > 0.0) {
                    return Err(format!("trunc_log_quad needs s > 0, got {s}"));
                }
                (KernelForm::TruncLogQuad { a, b, s }, norm, sign)
            }
            RawKernelSpec::ExpScaled { c, norm, sign } => (KernelForm::ExpScaled { c }, norm, sign),
            RawKernelSpec::AbsScaled { c, norm, sign } => (KernelForm::AbsScaled { c }, norm, sign),
            RawKernelSpec::Constant { c, norm, sign } => (KernelForm::Constant { c }, norm, sign),
            RawKernelSpec::Explicit { matrix, csv, sign } => match (matrix, csv) {
                (Some(matrix), None) => (KernelForm::Explicit { matrix }, Norm::Euclidean, sign),
                (None, Some(path)) => (KernelForm::Csv { path }, Norm::Euclidean, sign),
                _ => return Err("explicit kernel needs exactly one of `matrix` or `csv`".into()),
            },
        };
        if !sign.is_finite() {
            return Err("kernel sign must be finite".into());
        }
        Ok(KernelSpec { form, norm, sign })
    }
}

impl From<KernelSpec> for RawKernelSpec {
    fn from(spec: KernelSpec) -> Self {
        let KernelSpec { form, norm, sign } = spec;
        match form {
            KernelForm::Tent { c1, c2 } => RawKernelSpec::Tent { c1, c2, norm, sign },
            KernelForm::LogQuad { a, b } => RawKernelSpec::LogQuad { a, b, norm, sign },
            KernelForm::TruncLogQuad { a, b, s } => RawKernelSpec::TruncLogQuad { a, b, s, norm, sign },
            KernelForm::ExpScaled { c } => RawKernelSpec::ExpScaled { c, norm, sign },
            KernelForm::AbsScaled { c } => RawKernelSpec::AbsScaled { c, norm, sign },
            KernelForm::Constant { c } => RawKernelSpec::Constant { c, norm, sign },
            KernelForm::Explicit { matrix } => RawKernelSpec::Explicit {
                matrix: Some(matrix),
                csv: None,
                sign,
            },
            KernelForm::Csv { path } => RawKernelSpec::Explicit {
                matrix: None,
                csv: Some(path),
                sign,
            },
        }
    }
}

/// Kernel specs for the three independent species pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpecs {
    pub k11: KernelSpec,
    pub k22: KernelSpec,
    pub k12: KernelSpec,
}

fn rows_to_array(rows: &[Vec<f64>], n: usize) -> Result<Array2<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Shape(format!("explicit kernel must be {n}x{n}")));
    }
    Ok(Array2::from_shape_fn((n, n), |(a, b)| rows[a][b]))
}

/// Reads a square matrix from a headerless CSV file.
pub fn load_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Shape(format!("{}:{}: {e}: {field:?}", path.display(), line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    rows_to_array(&rows, n)
}

/// K^(11), K^(22), K^(12) (with K^(21) = K^(12)) and their diagonal differences.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    k: [Array2<f64>; 3],
    d: [Array2<f64>; 3],
}

fn pair_index(i: usize, k: usize) -> usize {
    match (i, k) {
        (0, 0) => 0,
        (1, 1) => 1,
        (0, 1) | (1, 0) => 2,
        _ => panic!("species index out of range: ({i}, {k})"),
    }
}

fn check_symmetric(name: &str, m: &mut Array2<f64>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Shape(format!("{name} is not square")));
    }
    for a in 0..n {
        for b in 0..n {
            let v = m[[a, b]];
            if !v.is_finite() {
                return Err(Error::InvalidEntry {
                    name: name.into(),
                    row: a,
                    col: b,
                    value: v,
                });
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            let (x, y) = (m[[a, b]], m[[b, a]]);
            if (x - y).abs() > SYMMETRY_TOL * x.abs().max(y.abs()).max(1.0) {
                return Err(Error::Asymmetric {
                    name: name.into(),
                    row: a,
                    col: b,
                });
            }
            let mean = 0.5 * (x + y);
            m[[a, b]] = mean;
            m[[b, a]] = mean;
        }
    }
    Ok(())
}

fn diagonal_difference(k: &Array2<f64>) -> Array2<f64> {
    let n = k.nrows();
    Array2::from_shape_fn((n, n), |(a, b)| if a == b { 0.0 } else { k[[a, a]] - k[[a, b]] })
}

impl KernelSet {
    pub fn from_matrices(mut k11: Array2<f64>, mut k22: Array2<f64>, mut k12: Array2<f64>) -> Result<Self> {
        check_symmetric("K11", &mut k11)?;
        check_symmetric("K22", &mut k22)?;
        check_symmetric("K12", &mut k12)?;
        let n = k11.nrows();
        if n < 2 || k22.nrows() != n || k12.nrows() != n {
            return Err(Error::Shape("kernel matrices must share one size N >= 2".into()));
        }
        let d = [
            diagonal_difference(&k11),
            diagonal_difference(&k22),
            diagonal_difference(&k12),
        ];
        Ok(Self { k: [k11, k22, k12], d })
    }

    /// Two-vertex kernels [[0, −D], [−D, 0]] realising the given differences.
    pub fn two_point(d11: f64, d22: f64, d12: f64) -> Self {
        let m = |d: f64| Array2::from_shape_vec((2, 2), vec![0.0, -d, -d, 0.0]).unwrap();
        Self::from_matrices(m(d11), m(d22), m(d12)).expect("two-point kernels are symmetric")
    }

    pub fn len(&self) -> usize {
        self.k[0].nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.k[0].nrows() == 0
    }

    /// K^(ik) for 0-based species indices.
    pub fn k(&self, i: usize, k: usize) -> &Array2<f64> {
        &self.k[pair_index(i, k)]
    }

    /// D^(ik) for 0-based species indices.
    pub fn d(&self, i: usize, k: usize) -> &Array2<f64> {
        &self.d[pair_index(i, k)]
    }
}

pub fn evaluate(specs: &KernelSpecs, graph: &FiniteGraph) -> Result<KernelSet> {
    KernelSet::from_matrices(specs.k11.matrix(graph)?, specs.k22.matrix(graph)?, specs.k12.matrix(graph)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossSign {
    /// D^(12) < 0 on every off-diagonal pair.
    Negative,
    /// D^(12) > 0 on every off-diagonal pair.
    Positive,
    /// D^(12) = 0 on every off-diagonal pair.
    Zero,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    /// D^(11), D^(22) < 0 and D^(11)D^(22) > (D^(12))² off the diagonal.
    pub case_a: bool,
    pub case_a_boundary: bool,
    /// D^(ii) < 0 off the diagonal and K^(ii) constant on the diagonal.
    pub case_b: [bool; 2],
    pub case_b_boundary: [bool; 2],
    pub case_c: bool,
    pub cross_sign: CrossSign,
    /// Under case (c): whether the optimal Diracs share a vertex.
    pub same_vertex: Option<bool>,
}

fn constant_diagonal(k: &Array2<f64>) -> bool {
    let diag = k.diag();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo <= SYMMETRY_TOL * lo.abs().max(hi.abs()).max(1.0)
}

fn off_diagonal(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
}

pub fn check_aggregation_conditions(kernels: &KernelSet) -> AggregationReport {
    let n = kernels.len();
    let (d11, d22, d12) = (kernels.d(0, 0), kernels.d(1, 1), kernels.d(0, 1));

    let strict_a = off_diagonal(n)
        .all(|p| d11[p] < 0.0 && d22[p] < 0.0 && d11[p] * d22[p] > d12[p] * d12[p]);
    let weak_a = off_diagonal(n)
        .all(|p| d11[p] <= 0.0 && d22[p] <= 0.0 && d11[p] * d22[p] >= d12[p] * d12[p]);

    let mut case_b = [false; 2];
    let mut case_b_boundary = [false; 2];
    for i in 0..2 {
        let d = kernels.d(i, i);
        let constant = constant_diagonal(kernels.k(i, i));
        let strict = off_diagonal(n).all(|p| d[p] < 0.0);
        let weak = off_diagonal(n).all(|p| d[p] <= 0.0);
        case_b[i] = strict && constant;
        case_b_boundary[i] = constant && weak && !strict;
    }
    let case_c = case_b[0] && case_b[1];

    let cross_sign = if off_diagonal(n).all(|p| d12[p] < 0.0) {
        CrossSign::Negative
    } else if off_diagonal(n).all(|p| d12[p] > 0.0) {
        CrossSign::Positive
    } else if off_diagonal(n).all(|p| d12[p] == 0.0) {
        CrossSign::Zero
    } else {
        CrossSign::Mixed
    };
    let same_vertex = match (case_c, cross_sign) {
        (true, CrossSign::Negative) => Some(true),
        (true, CrossSign::Positive) => Some(false),
        _ => None,
    };

    AggregationReport {
        case_a: strict_a,
        case_a_boundary: weak_a && !strict_a,
        case_b,
        case_b_boundary,
        case_c,
        cross_sign,
        same_vertex,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegregationReport {
    pub holds: bool,
    /// min over ι ≠ κ of K^(12)_ιι − K^(12)_ικ.
    pub lhs: f64,
    /// ½ Σ_i (max K^(ii) − min K^(ii)).
    pub rhs: f64,
    pub boundary: bool,
}

pub fn check_segregation_condition(kernels: &KernelSet) -> SegregationReport {
    let n = kernels.len();
    let d12 = kernels.d(0, 1);
    let lhs = off_diagonal(n).map(|p| d12[p]).fold(f64::INFINITY, f64::min);
    let spread = |k: &Array2<f64>| {
        let hi = k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = k.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    };
    let rhs = 0.5 * (spread(kernels.k(0, 0)) + spread(kernels.k(1, 1)));
    SegregationReport {
        holds: lhs > rhs,
        lhs,
        rhs,
        boundary: lhs == rhs,
    }
}

/// The two-mass shift problem between vertices ι₀ and κ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetitorQuadratic {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    /// −m^(i)_κ₀ ≤ s_i ≤ m^(i)_ι₀.
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub negative_definite: bool,
}

impl CompetitorQuadratic {
    /// f(s) = ½ sᵀAs + bᵀs.
    pub fn objective(&self, s: [f64; 2]) -> f64 {
        let mut v = 0.0;
        for i in 0..2 {
            v += self.b[i] * s[i];
            for k in 0..2 {
                v += 0.5 * self.a[i][k] * s[i] * s[k];
            }
        }
        v
    }

    /// Exact energy change of shifting mass s_i of species i from ι₀ to κ₀.
    ///
    /// This is 2 f(s): the objective has the right minimiser but half the scale.
    pub fn energy_change(&self, s: [f64; 2]) -> f64 {
        2.0 * self.objective(s)
    }
}

pub fn competitor_quadratic(
    kernels: &KernelSet,
    state: &SpeciesState,
    graph: &FiniteGraph,
    iota0: usize,
    kappa0: usize,
) -> Result<CompetitorQuadratic> {
    if iota0 == kappa0 {
        return Err(Error::InvalidParameter("competitor needs two distinct vertices".into()));
    }
    let n = kernels.len();
    if iota0 >= n || kappa0 >= n {
        return Err(Error::InvalidParameter("vertex index out of range".into()));
    }
    state.check_graph(graph)?;
    let masses = [state.masses(graph, 0), state.masses(graph, 1)];
    let mut a = [[0.0; 2]; 2];
    let mut b = [0.0; 2];
    for i in 0..2 {
        for k in 0..2 {
            let d = kernels.d(i, k);
            a[i][k] = 0.5 * (d[[kappa0, iota0]] + d[[iota0, kappa0]]);
            b[i] += 0.5
                * (0..n)
                    .map(|l| masses[k][l] * (d[[l, iota0]] - d[[l, kappa0]]))
                    .sum::<f64>();
        }
    }
    let negative_definite =
        a[0][0] + a[1][1] < -((a[0][0] - a[1][1]).powi(2) + 4.0 * a[0][1] * a[0][1]).sqrt();
    Ok(CompetitorQuadratic {
        a,
        b,
        lower: [-masses[0][kappa0], -masses[1][kappa0]],
        upper: [masses[0][iota0], masses[1][iota0]],
        negative_definite,
    })
}
