use std::f64::consts::{FRAC_PI_2, PI};

use super::basis::EffectiveQubitBasis;
use super::gates::EffectiveProcessor;
use super::trace::TraceResult;
use crate::dynamics::{PulseEvent, PulseMode, PulseSequence, RelaxationModel};
use crate::error::{invalid, Result};
use crate::linalg::{CMat, C64};
use crate::spincore::SpinSystem;

/// Total evolution time 2τ at which the coupling has acted as a
/// conditional π: 1/(2|J|).
pub fn conditional_pi_time(coupling_hz: f64) -> f64 {
    1.0 / (2.0 * coupling_hz.abs())
}

/// Spin echo double resonance on the T₀ register.
///
/// Nucleus 0 is prepared along z (nucleus 1 unpolarized), then
/// π/2 – τ – π(both) – τ – π/2. The recorded signal is ⟨2I_z⟩ of nucleus 0,
/// which follows cos(2π·J·τ): the echo survives everything except the
/// coupling, whose conditional π sits at 2τ = 1/(2J).
pub fn sedor(
    system: &SpinSystem,
    basis: &EffectiveQubitBasis,
    taus: &[f64],
    relaxation: Option<RelaxationModel>,
    mode: PulseMode,
) -> Result<TraceResult> {
    if taus.iter().any(|&t| !(t >= 0.0)) {
        return Err(invalid("SEDOR delays must be non-negative"));
    }
    let relaxed = relaxation.is_some();
    let proc = EffectiveProcessor::new(system, basis, relaxation)?.with_mode(mode)?;
    // |b0 = 1⟩⟨b0 = 1| ⊗ I/2
    let mut rho = CMat::zeros(4, 4);
    rho[(2, 2)] = C64::new(0.5, 0.0);
    rho[(3, 3)] = C64::new(0.5, 0.0);
    let start = proc.state(&rho)?;
    let half = proc.rotation(0, FRAC_PI_2, 0.0)?;
    let pi_both = proc.rotation_both(PI, 0.0)?;
    let mut signal = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut seq = PulseSequence::new("sedor");
        seq.push(half.clone());
        seq.push(PulseEvent::delay(tau));
        seq.push(pi_both.clone());
        seq.push(PulseEvent::delay(tau));
        seq.push(half.clone());
        let out = proc.effective(&proc.run(&start, &seq)?)?;
        // R_x(π/2)·R_x(π)·R_x(π/2) = −1 on nucleus 0: polarization returns
        let pz = out[(2, 2)].re + out[(3, 3)].re - out[(0, 0)].re - out[(1, 1)].re;
        signal.push(pz);
    }
    let two_tau = taus.iter().map(|t| 2.0 * t).collect();
    Ok(
        TraceResult::new("sedor", "tau_s", taus.to_vec(), "polarization", signal)
            .with_column("total_evolution_s", two_tau)
            .with_meta("system", system.fingerprint())
            .with_meta("coupling_hz", system.nn_coupling_hz)
            .with_meta(
                "conditional_pi_s",
                conditional_pi_time(system.nn_coupling_hz),
            )
            .with_meta("mode", format!("{mode:?}").to_lowercase())
            .with_meta("relaxation", if relaxed { "on" } else { "off" }),
    )
}

/// Dominant oscillation frequency of a uniformly sampled trace by discrete
/// Fourier peak, with the bin width. A flat trace gives frequency 0.
pub fn dft_peak(axis: &[f64], signal: &[f64]) -> Result<(f64, f64)> {
    let n = signal.len();
    if n < 4 || axis.len() != n {
        return Err(invalid("DFT needs at least four equally long samples"));
    }
    let dt = (axis[n - 1] - axis[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(invalid("DFT needs an increasing axis"));
    }
    let bin = 1.0 / (n as f64 * dt);
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut best = (0usize, 0.0f64);
    for k in 1..=n / 2 {
        let mut acc = C64::new(0.0, 0.0);
        for (j, &s) in signal.iter().enumerate() {
            acc += C64::from_polar(s - mean, -2.0 * PI * (k * j) as f64 / n as f64);
        }
        if acc.norm() > best.1 {
            best = (k, acc.norm());
        }
    }
    if best.1 < 1e-9 * n as f64 {
        return Ok((0.0, bin));
    }
    Ok((best.0 as f64 * bin, bin))
}

/// Coupling frequency recovered from a SEDOR trace.
pub fn sedor_frequency(trace: &TraceResult) -> Result<(f64, f64)> {
    dft_peak(&trace.axis, &trace.signal)
}
