use std::f64::consts::PI;

use super::basis::EffectiveQubitBasis;
use super::trace::TraceResult;
use crate::dynamics::{
    Channel, ContextOptions, DensityState, PulseEvent, PulseMode, PulseSequence, PulseTarget,
    RelaxationModel, SpinContext,
};
use crate::error::{invalid, Result};
use crate::linalg::C64;
use crate::spincore::SpinSystem;

/// RF nutation frequency that makes a 17 µs pulse a π rotation.
pub const DEFAULT_RF_RABI_HZ: f64 = 1.0 / (2.0 * 17e-6);

#[derive(Debug, Clone, PartialEq)]
pub struct RabiSettings {
    pub rf_rabi_hz: f64,
    pub mw_pulse_s: f64,
    pub mode: PulseMode,
    pub relaxation: Option<RelaxationModel>,
}

impl Default for RabiSettings {
    fn default() -> Self {
        RabiSettings {
            rf_rabi_hz: DEFAULT_RF_RABI_HZ,
            mw_pulse_s: 220e-9,
            mode: PulseMode::Finite,
            relaxation: None,
        }
    }
}

/// Nucleus-0 Rabi nutation in T₀ with selective microwave 2π pulses on the
/// (partner, |4⟩) ↔ (T₀, |4⟩) transition inserted at the given nutation
/// times (the RF is paused while the microwave pulse plays).
///
/// The main signal starts in |4⟩ and records P(|4⟩) − P(|2⟩); every 2π pulse
/// negates the |4⟩ amplitude, so an insertion at nutation angle θ₁ shifts
/// the subsequent oscillation by 2θ₁ (inversion for θ₁ = π/2). Extra columns
/// hold the uninterrupted trace and a control run in the complementary
/// subspace (start |3⟩, record P(|3⟩) − P(|1⟩)) that the pulse does not
/// address.
pub fn rabi_with_phase_gate(
    system: &SpinSystem,
    basis: &EffectiveQubitBasis,
    nutation_times: &[f64],
    insert_times: &[f64],
    settings: &RabiSettings,
) -> Result<TraceResult> {
    if !(settings.rf_rabi_hz > 0.0 && settings.mw_pulse_s > 0.0) {
        return Err(invalid(
            "Rabi frequency and microwave pulse length must be positive",
        ));
    }
    if settings.mode == PulseMode::Virtual {
        return Err(invalid("Rabi experiment needs ideal or finite pulses"));
    }
    let t_max = nutation_times.iter().cloned().fold(0.0, f64::max);
    if insert_times.iter().any(|&t| !(t >= 0.0 && t <= t_max)) {
        return Err(invalid("insert times must lie within the nutation range"));
    }
    let mut inserts = insert_times.to_vec();
    inserts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    let mut frame = basis.frame(system)?;
    let lab = SpinContext::full(
        system,
        basis.field_tesla,
        &basis.orientation,
        Default::default(),
        ContextOptions::default(),
    )?;
    // RF on the centre of the two T₀ transitions of nucleus 0
    let f_a = lab.transition_frequency(&basis.full_label(4, 0)?, &basis.full_label(2, 0)?)?;
    let f_b = lab.transition_frequency(&basis.full_label(3, 0)?, &basis.full_label(1, 0)?)?;
    frame.rf_hz[0] = 0.5 * (f_a + f_b);
    let relaxed = settings.relaxation.is_some();
    let ctx = SpinContext::full(
        system,
        basis.field_tesla,
        &basis.orientation,
        frame,
        ContextOptions::with_relaxation(settings.relaxation.clone()),
    )?;

    let mw_target = PulseTarget::Transition {
        lower: basis.full_label(4, 0)?,
        upper: basis.full_label(4, basis.partner_ms)?,
    };
    let dur = settings.mw_pulse_s;
    let mw = match settings.mode {
        PulseMode::Finite => PulseEvent::microwave(0.0, 1.0 / dur, dur, 0.0).with_target(mw_target),
        _ => PulseEvent::ideal(Channel::Microwave, mw_target, 2.0 * PI, 0.0, dur),
    };
    let rf = |t: f64| match settings.mode {
        PulseMode::Finite => {
            PulseEvent::rf(0.0, settings.rf_rabi_hz, t, 0.0).with_target(PulseTarget::Nucleus(0))
        }
        _ => PulseEvent::ideal(
            Channel::Rf,
            PulseTarget::Nucleus(0),
            2.0 * PI * settings.rf_rabi_hz * t,
            0.0,
            t,
        ),
    };
    let program = |t: f64, with_inserts: bool| {
        let mut seq = PulseSequence::new("rabi_phase_gate");
        let mut done = 0.0;
        if with_inserts {
            for &ti in inserts.iter().filter(|&&ti| ti <= t) {
                if ti > done {
                    seq.push(rf(ti - done));
                }
                seq.push(mw.clone());
                done = ti;
            }
        }
        if t > done {
            seq.push(rf(t - done));
        }
        seq
    };
    let pure = |e: usize| -> Result<DensityState> {
        let k = ctx.index_of(&basis.full_label(e, 0)?)?;
        let mut psi = vec![C64::new(0.0, 0.0); ctx.dim()];
        psi[k] = C64::new(1.0, 0.0);
        DensityState::pure(&psi, ctx.basis().clone())
    };
    let contrast = |st: &DensityState, up: usize, down: usize| -> Result<f64> {
        let a = ctx.index_of(&basis.full_label(up, 0)?)?;
        let b = ctx.index_of(&basis.full_label(down, 0)?)?;
        Ok(st.population(a) - st.population(b))
    };
    let start = pure(4)?;
    let start_ctl = pure(3)?;
    let mut signal = Vec::new();
    let mut plain = Vec::new();
    let mut control = Vec::new();
    for &t in nutation_times {
        if !(t >= 0.0) {
            return Err(invalid("nutation times must be non-negative"));
        }
        signal.push(contrast(&ctx.run(&start, &program(t, true))?, 4, 2)?);
        plain.push(contrast(&ctx.run(&start, &program(t, false))?, 4, 2)?);
        control.push(contrast(&ctx.run(&start_ctl, &program(t, true))?, 3, 1)?);
    }
    let inserts_txt: Vec<String> = inserts.iter().map(|t| format!("{t:e}")).collect();
    Ok(TraceResult::new(
        "rabi_phase_gate",
        "nutation_time_s",
        nutation_times.to_vec(),
        "contrast",
        signal,
    )
    .with_column("no_insertion", plain)
    .with_column("control", control)
    .with_meta("system", system.fingerprint())
    .with_meta("insert_times_s", inserts_txt.join(" "))
    .with_meta("rf_rabi_hz", settings.rf_rabi_hz)
    .with_meta("mode", format!("{:?}", settings.mode).to_lowercase())
    .with_meta("relaxation", if relaxed { "on" } else { "off" }))
}
