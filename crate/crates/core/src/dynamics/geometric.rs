use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::linalg::{propagator, wrap_phase, CMat, C64};

/// Aharonov–Anandan phase of a closed nutation cone with half-angle θ:
/// half the enclosed solid angle, π·(1 − cos θ).
pub fn geometric_phase(theta_cone: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta_cone) {
        return Err(invalid(format!("cone angle {theta_cone} outside [0, π]")));
    }
    Ok(PI * (1.0 - theta_cone.cos()))
}

/// Phase of one detuned 2π cycle of a driven two-level system, measured by
/// propagation: the state starts in the upper bare level, the drive has
/// nutation frequency `rabi_hz` and detuning Ω/tan θ, and the cycle lasts one
/// generalised Rabi period. Returns −(total − dynamic), wrapped to (−π, π].
pub fn propagated_cycle_phase(theta_cone: f64, rabi_hz: f64) -> Result<f64> {
    if !(theta_cone > 0.0 && theta_cone < PI) {
        return Err(invalid("cone angle must lie strictly between 0 and π"));
    }
    let detuning = rabi_hz / theta_cone.tan();
    let h = CMat::from_row_slice(
        2,
        2,
        &[
            C64::new(detuning / 2.0, 0.0),
            C64::new(rabi_hz / 2.0, 0.0),
            C64::new(rabi_hz / 2.0, 0.0),
            C64::new(-detuning / 2.0, 0.0),
        ],
    );
    let period = 1.0 / (rabi_hz * rabi_hz + detuning * detuning).sqrt();
    let u = propagator(&h, period)?;
    let total = u[(0, 0)].arg();
    // ⟨H⟩ is conserved, so the dynamic phase is −2π⟨H⟩T
    let dynamic = -2.0 * PI * h[(0, 0)].re * period;
    Ok(wrap_phase(-(total - dynamic)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_points() {
        assert!((geometric_phase(PI / 2.0).unwrap() - PI).abs() < 1e-15);
        assert_eq!(geometric_phase(0.0).unwrap(), 0.0);
        assert!(geometric_phase(-0.1).is_err());
        assert!(geometric_phase(3.2).is_err());
    }

    #[test]
    fn matches_propagation_at_point_three() {
        let g = geometric_phase(0.3).unwrap();
        let p = propagated_cycle_phase(0.3, 4.545e6).unwrap();
        assert!(wrap_phase(g - p).abs() < 1e-3, "{g} vs {p}");
    }
}
