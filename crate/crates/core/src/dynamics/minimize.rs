use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, SpeciesState};
use crate::kernels::KernelSet;

/// Largest number of (species 1, species 2) grid pairs evaluated by default.
pub const DEFAULT_MAX_PAIRS: u128 = 1_000_000_000;

/// Largest graph accepted by the exhaustive search.
pub const MAX_VERTICES: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimizer {
    pub state: SpeciesState,
    pub energy: f64,
    /// Per-vertex masses of the minimiser.
    pub masses: [Vec<f64>; 2],
    pub candidates: u128,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// All compositions of `resolution` into `n` nonnegative parts, in increasing
/// lexicographic order.
pub fn simplex_grid(n: usize, resolution: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, left: u32, slots: usize, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(prefix, left - c, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), resolution, n, &mut out);
    out
}

pub fn brute_force_minimize(kernels: &KernelSet, graph: &FiniteGraph, resolution: u32) -> Result<Minimizer> {
    brute_force_minimize_limited(kernels, graph, resolution, DEFAULT_MAX_PAIRS)
}

/// Exhaustive minimisation of the energy over two simplex grids with spacing
/// 1/resolution in mass coordinates. Ties within a relative 1e-12 go to the
/// lexicographically smallest (m¹, m²).
pub fn brute_force_minimize_limited(
    kernels: &KernelSet,
    graph: &FiniteGraph,
    resolution: u32,
    max_pairs: u128,
) -> Result<Minimizer> {
    let n = graph.len();
    if kernels.len() != n {
        return Err(Error::Shape("kernels and graph differ in size".into()));
    }
    if n > MAX_VERTICES {
        return Err(Error::InvalidParameter(format!(
            "brute force is limited to {MAX_VERTICES} vertices, got {n}"
        )));
    }
    if resolution == 0 {
        return Err(Error::InvalidParameter("resolution must be positive".into()));
    }
    let per_species = binomial(resolution as u128 + n as u128 - 1, n as u128 - 1);
    let pairs = per_species * per_species;
    if pairs > max_pairs {
        return Err(Error::TooLarge(pairs));
    }

    let grid = simplex_grid(n, resolution);
    let flat: Vec<f64> = grid.iter().flatten().map(|&c| c as f64).collect();
    let quad = |k: &Array2<f64>, x: &[f64]| {
        let mut acc = 0.0;
        for a in 0..n {
            let mut row = 0.0;
            for b in 0..n {
                row += k[[a, b]] * x[b];
            }
            acc += x[a] * row;
        }
        0.5 * acc
    };
    let e1: Vec<f64> = flat.chunks(n).map(|x| quad(kernels.k(0, 0), x)).collect();
    let e2: Vec<f64> = flat.chunks(n).map(|x| quad(kernels.k(1, 1), x)).collect();
    let k12 = kernels.k(0, 1);
    let scale = kernels_scale(kernels) * (resolution as f64).powi(2);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);

    let mut best = f64::INFINITY;
    let mut best_pair = (0usize, 0usize);
    let mut cross = vec![0.0; n];
    for (ia, xa) in flat.chunks(n).enumerate() {
        for (c, slot) in cross.iter_mut().enumerate() {
            *slot = (0..n).map(|l| k12[[c, l]] * xa[l]).sum();
        }
        let base = e1[ia];
        for (ib, xb) in flat.chunks(n).enumerate() {
            let mut e = base + e2[ib];
            for c in 0..n {
                e += cross[c] * xb[c];
            }
            if e < best - tol {
                best = e;
                best_pair = (ia, ib);
            }
        }
    }

    let r = resolution as f64;
    let m1: Vec<f64> = grid[best_pair.0].iter().map(|&c| c as f64 / r).collect();
    let m2: Vec<f64> = grid[best_pair.1].iter().map(|&c| c as f64 / r).collect();
    let state = SpeciesState::from_masses(graph, &m1, &m2)?;
    Ok(Minimizer {
        state,
        energy: best / (r * r),
        masses: [m1, m2],
        candidates: pairs,
    })
}

fn kernels_scale(kernels: &KernelSet) -> f64 {
    [(0, 0), (1, 1), (0, 1)]
        .iter()
        .flat_map(|&(i, k)| kernels.k(i, k).iter().map(|v| v.abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}
