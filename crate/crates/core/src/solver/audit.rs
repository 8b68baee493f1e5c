//! Dense re-audit of accepted patches.

use super::local::{sample_points, LocalPatch};
use crate::expr::{Field, OperatorSpec};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PatchAudit {
    pub samples: usize,
    pub violations: usize,
    pub faults: usize,
    /// Largest excursion outside the band.
    pub worst_excess: f64,
}

impl PatchAudit {
    pub fn merge(&mut self, o: &PatchAudit) {
        self.samples += o.samples;
        self.violations += o.violations;
        self.faults += o.faults;
        self.worst_excess = self.worst_excess.max(o.worst_excess);
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.faults == 0
    }
}

/// Checks the band on `density` times the construction samples plus as many
/// uniformly jittered points inside the ball, with tolerance `tol`.
pub fn audit_patch<R: Rng>(
    op: &OperatorSpec,
    f: &Field,
    patch: &LocalPatch,
    samples_per_axis: usize,
    density: usize,
    tol: f64,
    rng: &mut R,
) -> PatchAudit {
    let mut pts = sample_points(&patch.center, patch.radius, samples_per_axis * density);
    let n = patch.center.len();
    for _ in 0..pts.len() {
        // rejection sampling in the ball
        loop {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            if d.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                pts.push(patch.center.iter().zip(&d).map(|(c, v)| c + patch.radius * v).collect());
                break;
            }
        }
    }
    let (lo, hi) = patch.side.band(patch.epsilon);
    let mut a = PatchAudit {
        samples: pts.len(),
        ..PatchAudit::default()
    };
    for x in &pts {
        match patch.defect_at(op, f, x) {
            Ok(d) => {
                let excess = (lo - d).max(d - hi);
                if excess > tol {
                    a.violations += 1;
                    a.worst_excess = a.worst_excess.max(excess);
                }
            }
            Err(_) => a.faults += 1,
        }
    }
    a
}
