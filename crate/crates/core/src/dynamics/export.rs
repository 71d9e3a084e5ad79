use std::io::Write;

use serde_json::json;

use super::integrate::Trajectory;
use crate::error::Result;
use crate::graph::FiniteGraph;

pub const TRAJECTORY_HEADER: &str = "t,species,vertex,u,mass";

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per sampled time, species (1-based) and vertex (0-based). Points
/// without a recorded state are skipped.
pub fn write_trajectory_csv<W: Write>(out: &mut W, trajectory: &Trajectory, graph: &FiniteGraph) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for point in &trajectory.points {
        let Some(state) = &point.state else { continue };
        let t = fmt_f64(point.t);
        for i in 0..2 {
            for (k, (&u, &mu)) in state.species(i).iter().zip(graph.weights()).enumerate() {
                writeln!(out, "{t},{},{k},{},{}", i + 1, fmt_f64(u), fmt_f64(u * mu))?;
            }
        }
    }
    Ok(())
}

/// Diagnostics per sampled time plus the run outcome.
pub fn write_diagnostics_json<W: Write>(out: &mut W, trajectory: &Trajectory) -> Result<()> {
    let points: Vec<_> = trajectory
        .points
        .iter()
        .map(|p| {
            json!({
                "t": p.t,
                "step": p.step,
                "energy": p.energy,
                "mass": p.mass,
                "center_of_mass": p.center_of_mass,
                "dissipation": p.dissipation,
                "sup_rate": p.sup_rate,
                "max_violation": p.max_violation,
            })
        })
        .collect();
    let doc = json!({
        "outcome": trajectory.outcome,
        "steps": trajectory.steps,
        "rejected_steps": trajectory.rejected,
        "points": points,
    });
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    writeln!(out)?;
    Ok(())
}
