#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use triplet_gates::dynamics::{
    Channel, ContextOptions, PulseEvent, PulseSequence, PulseTarget, RelaxationModel, SpinContext,
};
use triplet_gates::linalg::C64;
use triplet_gates::sequences::EffectiveQubitBasis;
use triplet_gates::spincore::SpinSystem;

/// Full 12-level context at the gate field, rotating with the gate frame.
pub fn gate_context(relax: bool) -> (SpinContext, EffectiveQubitBasis) {
    let sys = SpinSystem::fullerene();
    let basis = EffectiveQubitBasis::default_for(&sys).unwrap();
    let frame = basis.frame(&sys).unwrap();
    let model = relax.then(RelaxationModel::default);
    let ctx = SpinContext::full(
        &sys,
        basis.field_tesla,
        &basis.orientation,
        frame,
        ContextOptions::with_relaxation(model),
    )
    .unwrap();
    (ctx, basis)
}

/// One pulse event from a kind selector and four numbers in [0, 1).
pub fn event_from_unit(basis: &EffectiveQubitBasis, kind: usize, u: [f64; 4]) -> PulseEvent {
    let lerp = |x: f64, a: f64, b: f64| a + x * (b - a);
    match kind % 6 {
        0 => PulseEvent::microwave(
            lerp(u[0], -20e6, 20e6),
            lerp(u[1], 0.5e6, 5e6),
            lerp(u[2], 10e-9, 500e-9),
            lerp(u[3], 0.0, 2.0 * PI),
        ),
        1 => PulseEvent::rf(
            lerp(u[0], -2e6, 2e6),
            lerp(u[1], 10e3, 100e3),
            lerp(u[2], 1e-6, 20e-6),
            lerp(u[3], 0.0, 2.0 * PI),
        )
        .with_target(PulseTarget::Nucleus(if u[3] < 0.5 { 0 } else { 1 })),
        2 => PulseEvent::delay(lerp(u[0], 0.0, 50e-6)),
        3 => PulseEvent::ideal(
            Channel::Microwave,
            PulseTarget::Transition {
                lower: basis.full_label(1 + (u[1] * 4.0) as usize % 4, 0).unwrap(),
                upper: basis
                    .full_label(1 + (u[1] * 4.0) as usize % 4, basis.partner_ms)
                    .unwrap(),
            },
            lerp(u[0], 0.0, 2.0 * PI),
            lerp(u[3], 0.0, 2.0 * PI),
            lerp(u[2], 0.0, 300e-9),
        ),
        4 => PulseEvent::virtual_z(
            Channel::Rf,
            PulseTarget::Nucleus(if u[1] < 0.5 { 0 } else { 1 }),
            lerp(u[0], -PI, PI),
        ),
        _ => PulseEvent::ideal(
            Channel::Rf,
            PulseTarget::Nucleus(if u[1] < 0.5 { 0 } else { 1 }),
            lerp(u[0], 0.0, 2.0 * PI),
            lerp(u[3], 0.0, 2.0 * PI),
            lerp(u[2], 0.0, 20e-6),
        ),
    }
}

pub fn program(basis: &EffectiveQubitBasis, events: &[(usize, [f64; 4])]) -> PulseSequence {
    let mut seq = PulseSequence::new("random");
    for (k, u) in events {
        seq.push(event_from_unit(basis, *k, *u));
    }
    seq
}

pub fn random_program<R: Rng>(basis: &EffectiveQubitBasis, rng: &mut R) -> PulseSequence {
    let n = rng.gen_range(1..=6);
    let events: Vec<(usize, [f64; 4])> = (0..n)
        .map(|_| {
            (
                rng.gen_range(0..6),
                [rng.gen(), rng.gen(), rng.gen(), rng.gen()],
            )
        })
        .collect();
    program(basis, &events)
}

/// Normalised complex Gaussian 4-vector.
pub fn pure_from_unit(u: &[f64; 8]) -> [C64; 4] {
    // Box–Muller on pairs of uniforms
    let mut z = [C64::new(0.0, 0.0); 4];
    for k in 0..4 {
        let r = (-2.0 * (1.0 - u[2 * k]).max(1e-300).ln()).sqrt();
        z[k] = C64::from_polar(r, 2.0 * PI * u[2 * k + 1]);
    }
    let norm = z
        .iter()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(1e-300);
    z.map(|c| c / norm)
}

pub fn random_pure<R: Rng>(rng: &mut R) -> [C64; 4] {
    let mut u = [0.0; 8];
    for v in &mut u {
        *v = rng.gen();
    }
    pure_from_unit(&u)
}
