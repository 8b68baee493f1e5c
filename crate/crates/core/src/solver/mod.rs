//! Approximation of order-completion solutions by unions of local patches.

mod audit;
mod cut;
mod global;
mod local;

pub use audit::{audit_patch, PatchAudit};
pub use cut::{audit_band, audit_defect, refine_cut, truncation_allowance, CutConfig, CutFailure, CutLevel, CutSolution, DefectAudit};
pub use global::{global_approx, snap_pins, GlobalApprox, Pin, SolveError, SolverConfig};
pub use local::{
    local_patch, local_patch_for, local_subsolution, local_supersolution, poly_defect, sample_points, DefectStats,
    LocalPatch, PatchConfig, PatchError, Side,
};

#[cfg(test)]
mod tests;
