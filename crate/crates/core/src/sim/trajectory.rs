//! Trajectory dumps: one CSV row per control step.

use std::io::Write;
use std::path::Path;

use crate::sim::state::FloatingBaseState;
use crate::sim::SimError;

/// Header: `time,root_px,root_py,root_pz,root_qw,root_qx,root_qy,root_qz,
/// q_0..q_{n-1},qd_0..qd_{n-1}`.
pub fn trajectory_header(n_dof: usize) -> String {
    let mut h = String::from("time,root_px,root_py,root_pz,root_qw,root_qx,root_qy,root_qz");
    for i in 0..n_dof {
        h.push_str(&format!(",q_{i}"));
    }
    for i in 0..n_dof {
        h.push_str(&format!(",qd_{i}"));
    }
    h
}

pub fn write_trajectory_csv(path: &Path, states: &[FloatingBaseState]) -> Result<(), SimError> {
    let n_dof = states.first().map(|s| s.q.len()).unwrap_or(0);
    let mut out = String::new();
    out.push_str(&trajectory_header(n_dof));
    out.push('\n');
    for s in states {
        let q = s.root_orientation.quaternion();
        out.push_str(&format!(
            "{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            s.sim_time,
            s.root_position.x,
            s.root_position.y,
            s.root_position.z,
            q.w,
            q.i,
            q.j,
            q.k
        ));
        for v in &s.q {
            out.push_str(&format!(",{v:.9}"));
        }
        for v in &s.qdot {
            out.push_str(&format!(",{v:.9}"));
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
