use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{GridSpec, SolverConfig, SolverError};
use crate::conformal::ComplexPoint;

/// A named slice of the probe list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGroup {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub velocities: Vec<ComplexPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub energy: f64,
    pub grad_energy: f64,
    pub l4_fourth: f64,
    pub beta: f64,
    pub circ_far: f64,
    /// `β + Σw - α`.
    pub stokes_defect: f64,
    pub envelope_lhs: f64,
    pub envelope_rhs: f64,
    pub envelope_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub grid: GridSpec,
    pub config: SolverConfig,
    pub alpha: f64,
    pub points: Vec<ComplexPoint>,
    pub groups: Vec<ProbeGroup>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<Diagnostics>,
    /// Largest `|β + Σw - α|/|α|` over all steps.
    pub worst_stokes_defect: f64,
    pub steps: u64,
    pub complete: bool,
}

impl RunRecord {
    pub fn new(grid: GridSpec, config: SolverConfig, alpha: f64, groups: &[(String, Vec<ComplexPoint>)]) -> Self {
        let mut points = Vec::new();
        let mut out = Vec::new();
        for (name, pts) in groups {
            out.push(ProbeGroup {
                name: name.clone(),
                start: points.len(),
                len: pts.len(),
            });
            points.extend_from_slice(pts);
        }
        RunRecord {
            grid,
            config,
            alpha,
            points,
            groups: out,
            snapshots: Vec::new(),
            diagnostics: Vec::new(),
            worst_stokes_defect: 0.0,
            steps: 0,
            complete: false,
        }
    }

    pub fn push_snapshot(&mut self, snap: Snapshot) -> Result<(), SolverError> {
        if let Some(last) = self.snapshots.last() {
            if !(snap.t > last.t) {
                return Err(SolverError::Config(format!(
                    "snapshot times must increase ({} after {})",
                    snap.t, last.t
                )));
            }
        }
        self.snapshots.push(snap);
        Ok(())
    }

    pub fn group(&self, name: &str) -> Result<&ProbeGroup, SolverError> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| SolverError::MissingGroup(name.to_string()))
    }

    pub fn group_points(&self, name: &str) -> Result<&[ComplexPoint], SolverError> {
        let g = self.group(name)?;
        Ok(&self.points[g.start..g.start + g.len])
    }

    /// `(t, velocities)` of one group for every snapshot.
    pub fn group_series(&self, name: &str) -> Result<Vec<(f64, &[ComplexPoint])>, SolverError> {
        let g = self.group(name)?;
        Ok(self
            .snapshots
            .iter()
            .map(|s| (s.t, &s.velocities[g.start..g.start + g.len]))
            .collect())
    }

    /// CSV `t,x1,x2,u1,u2` for one probe group.
    pub fn write_snapshot_csv(&self, group: &str, out: &mut dyn Write) -> std::io::Result<()> {
        let g = self
            .group(group)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()))?;
        writeln!(out, "t,x1,x2,u1,u2")?;
        for s in &self.snapshots {
            for i in g.start..g.start + g.len {
                let (x, u) = (self.points[i], s.velocities[i]);
                writeln!(out, "{},{},{},{},{}", s.t, x.re, x.im, u.re, u.im)?;
            }
        }
        Ok(())
    }

    /// CSV `t,energy,grad_energy,beta,circ_far` plus the envelope columns.
    pub fn write_diagnostics_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "t,energy,grad_energy,beta,circ_far,stokes_defect,envelope_lhs,envelope_rhs")?;
        for d in &self.diagnostics {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                d.t, d.energy, d.grad_energy, d.beta, d.circ_far, d.stokes_defect, d.envelope_lhs, d.envelope_rhs
            )?;
        }
        Ok(())
    }
}
