//! Time evolution: propagators, rotating-frame pulses, photo-excitation,
//! phenomenological relaxation and the geometric phase.

pub mod context;
pub mod geometric;
pub mod photo;
pub mod pulse;
pub mod relaxation;
pub mod state;

pub use context::{
    apply_pulse, nuclear_frequency, site_pairs, ContextOptions, FrameSpec, SpinContext,
};
pub use geometric::{geometric_phase, propagated_cycle_phase};
pub use photo::{photoexcite, DEFAULT_POPULATIONS};
pub use pulse::{Channel, PulseEvent, PulseMode, PulseSequence, PulseTarget};
pub use relaxation::{apply_relaxation, RelaxationModel};
pub use state::{BasisKind, BasisTag, DensityState, Label, SiteKind, StateDoc};

use crate::error::{invalid, Error, Result};
use crate::linalg::{conjugate, propagator, CMat};

/// ρ → UρU† with U = exp(−i·2π·H·t); H in the state's basis, Hz.
pub fn propagate_unitary(state: &DensityState, h: &CMat, t: f64) -> Result<DensityState> {
    if h.nrows() != state.dim() || h.ncols() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: h.nrows(),
        });
    }
    if !(t >= 0.0) {
        return Err(invalid(format!("propagation time must be ≥ 0, got {t}")));
    }
    let u = propagator(h, t)?;
    let mut out = state.with_matrix(conjugate(&u, &state.matrix));
    out.time_s += t;
    Ok(out)
}

#[cfg(test)]
mod tests;
