use std::f64::consts::PI;

use super::*;
use crate::linalg::{identity, max_abs, trace_distance, C64};
use crate::spincore::{Orientation, SpinSystem};

const B0: f64 = 0.3461;

/// Scaling-and-squaring Taylor exponential, independent of the eigen route.
fn expm_taylor(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).sum::<f64>();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let scaled = a / C64::new(2f64.powi(s), 0.0);
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..30 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn three_level_basis() -> BasisTag {
    BasisTag::product(vec![SiteKind::Electron], &[3])
}

#[test]
fn propagate_zero_time_and_commuting() {
    let psi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)];
    let s = DensityState::pure(&psi, three_level_basis()).unwrap();
    let h = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
        C64::new(1e6, 0.0),
        C64::new(-2e6, 0.0),
        C64::new(0.5e6, 0.0),
    ]));
    let same = propagate_unitary(&s, &h, 0.0).unwrap();
    assert!(max_abs(&(&same.matrix - &s.matrix)) < 1e-15);
    let diag = DensityState::maximally_mixed(three_level_basis());
    let moved = propagate_unitary(&diag, &h, 1.3e-6).unwrap();
    assert!(max_abs(&(&moved.matrix - &diag.matrix)) < 1e-14);
    assert!(propagate_unitary(&s, &identity(2), 1.0).is_err());
}

#[test]
fn resonant_two_pi_flips_coherence_to_third_level() {
    // levels 0,1 driven resonantly, level 2 a spectator
    let omega = 2.0e6;
    let mut h = CMat::zeros(3, 3);
    h[(0, 1)] = C64::new(omega / 2.0, 0.0);
    h[(1, 0)] = C64::new(omega / 2.0, 0.0);
    let s = 1.0 / 3f64.sqrt();
    let psi = [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)];
    let st = DensityState::pure(&psi, three_level_basis()).unwrap();
    let out = propagate_unitary(&st, &h, 1.0 / omega).unwrap();
    let oracle_u = expm_taylor(&(&h * C64::new(0.0, -2.0 * PI / omega)));
    let oracle = &oracle_u * &st.matrix * oracle_u.adjoint();
    assert!(max_abs(&(&out.matrix - &oracle)) < 1e-9);
    // populations restored, coherence ρ02 changes sign
    for k in 0..3 {
        assert!((out.matrix[(k, k)] - st.matrix[(k, k)]).norm() < 1e-9);
    }
    assert!((out.matrix[(0, 2)] + st.matrix[(0, 2)]).norm() < 1e-9);
}

fn nuclear_ctx(relax: Option<RelaxationModel>) -> SpinContext {
    let sys = SpinSystem::fullerene();
    let base = SpinContext::nuclear(
        &sys,
        B0,
        &Orientation::identity(),
        0,
        FrameSpec::lab(),
        ContextOptions::with_relaxation(relax),
    )
    .unwrap();
    let o = Orientation::identity();
    let nu_h = context::nuclear_frequency(&sys, B0, &o, 0, 0);
    let nu_p = context::nuclear_frequency(&sys, B0, &o, 0, 1);
    base.with_frame(FrameSpec {
        mw_hz: 0.0,
        rf_hz: vec![nu_h, nu_p],
    })
    .unwrap()
}

#[test]
fn nuclear_labels_and_signs() {
    let ctx = nuclear_ctx(None);
    assert_eq!(ctx.sigma(0), -1.0);
    assert_eq!(ctx.sigma(1), -1.0);
    // Larmor frequencies from γB (J shifts each line by ±J/2)
    let nu_h = ctx.transition_frequency(&[1, 1], &[-1, 1]).unwrap();
    assert!((nu_h - (42.577478e6 * B0 - 1.5e3)).abs() < 10.0, "{nu_h}");
    // rotating-frame free Hamiltonian reduces to J m1 m2
    let e = ctx.frame_energies();
    let d = ctx.energies();
    let r = ctx.index_of(&[1, 1]).unwrap();
    for k in 0..4 {
        let l = &ctx.labels()[k];
        let want = 3.0e3 * l[0] as f64 * l[1] as f64 / 4.0;
        assert!((d[k] - e[k] - want - (d[r] - e[r] - 3.0e3 / 4.0)).abs() < 1e-3);
    }
}

#[test]
fn rf_half_pi_in_t0_makes_equal_superposition() {
    let ctx = nuclear_ctx(None);
    let up = ctx.index_of(&[1, 1]).unwrap();
    let mut m = CMat::zeros(4, 4);
    m[(up, up)] = C64::new(1.0, 0.0);
    let st = ctx.state(m).unwrap();
    let rabi: f64 = 0.25 / 17e-6;
    assert!((rabi - 14.7e3).abs() < 0.1e3);
    let p =
        PulseEvent::rf(ctx.frame.rf_hz[0], rabi, 17e-6, 0.0).with_target(PulseTarget::Nucleus(0));
    let out = ctx.apply_pulse(&st, &p).unwrap();
    let flipped = ctx.index_of(&[-1, 1]).unwrap();
    assert!(
        (out.population(up) - 0.5).abs() < 2e-3,
        "{}",
        out.population(up)
    );
    assert!((out.population(flipped) - 0.5).abs() < 2e-3);
    assert!((out.matrix[(up, flipped)].norm() - 0.5).abs() < 2e-3);
}

#[test]
fn ideal_and_hard_finite_pulses_agree() {
    let ctx = nuclear_ctx(None);
    let psi = [
        C64::new(0.5, 0.1),
        C64::new(-0.3, 0.4),
        C64::new(0.2, -0.5),
        C64::new(0.4, 0.0),
    ];
    let st = DensityState::pure(&psi, ctx.basis().clone()).unwrap();
    let rabi = 1.0e9;
    let dur = 0.5 / rabi;
    let finite = PulseEvent::rf(0.0, rabi, dur, 0.7).with_target(PulseTarget::Nucleus(1));
    let ideal = PulseEvent::ideal(Channel::Rf, PulseTarget::Nucleus(1), PI, 0.7, dur);
    let a = ctx.apply_pulse(&st, &finite).unwrap();
    let b = ctx.apply_pulse(&st, &ideal).unwrap();
    assert!(trace_distance(&a.matrix, &b.matrix).unwrap() < 1e-3);
    assert_eq!(a.time_s, b.time_s);
}

#[test]
fn carrier_offset_matches_shifted_frame() {
    // the same physical pulse simulated in two frames gives the same lab state
    let ctx = nuclear_ctx(None);
    let shifted = ctx
        .with_frame(FrameSpec {
            mw_hz: 0.0,
            rf_hz: vec![ctx.frame.rf_hz[0] + 37e3, ctx.frame.rf_hz[1] - 11e3],
        })
        .unwrap();
    let psi = [
        C64::new(0.5, 0.0),
        C64::new(0.5, 0.2),
        C64::new(0.1, -0.5),
        C64::new(0.4, 0.1),
    ];
    let lab0 = DensityState::pure(&psi, ctx.product_basis().clone()).unwrap();
    let mut seq = PulseSequence::new("t");
    seq.push(PulseEvent::delay(3.3e-6))
        .push(
            PulseEvent::rf(ctx.frame.rf_hz[0] + 5e3, 20e3, 9e-6, 0.4)
                .with_target(PulseTarget::Nucleus(0)),
        )
        .push(PulseEvent::delay(1.1e-6))
        .push(
            PulseEvent::rf(ctx.frame.rf_hz[1], 15e3, 7e-6, 1.2)
                .with_target(PulseTarget::Nucleus(1)),
        );
    let a = ctx.to_product(&ctx.run(&lab0, &seq).unwrap()).unwrap();
    let b = shifted
        .to_product(&shifted.run(&lab0, &seq).unwrap())
        .unwrap();
    assert!(max_abs(&(&a.matrix - &b.matrix)) < 1e-8);
}

fn full_ctx() -> (SpinContext, Vec<i32>, Vec<i32>) {
    let sys = SpinSystem::fullerene();
    let o = Orientation::identity();
    let base =
        SpinContext::full(&sys, B0, &o, FrameSpec::lab(), ContextOptions::default()).unwrap();
    let lower = vec![-2, 1, 1];
    let upper = vec![0, 1, 1];
    let nu = base.transition_frequency(&lower, &upper).unwrap();
    let ctx = base
        .with_frame(FrameSpec {
            mw_hz: nu,
            rf_hz: vec![0.0, 0.0],
        })
        .unwrap();
    (ctx, lower, upper)
}

#[test]
fn selective_two_pi_gives_pi_phase_to_addressed_configuration() {
    let (ctx, lower, upper) = full_ctx();
    let rabi = 1.0 / 220e-9;
    let p = ctx
        .resonant_pulse(Channel::Microwave, &lower, &upper, rabi, 220e-9, 0.0)
        .unwrap();
    let u = ctx.event_unitary(&p, 0.0).unwrap().unwrap();
    let u_free = ctx.free_propagator(220e-9);
    let k = u_free.adjoint() * &u;
    let unit = &u.adjoint() * &u;
    assert!(max_abs(&(unit - identity(12))) < 1e-8);
    let phase = |lab: &[i32]| {
        let i = ctx.index_of(lab).unwrap();
        k[(i, i)]
    };
    // the addressed level returns with phase π relative to free evolution
    assert!((phase(&upper).arg().abs() - PI).abs() < 0.05);
    assert!((phase(&upper).norm() - 1.0).abs() < 1e-3);
    // each unaddressed level behaves as an isolated detuned two-level system
    for nuc in [[1, -1], [-1, 1], [-1, -1]] {
        let lo = [-2, nuc[0], nuc[1]];
        let up = [0, nuc[0], nuc[1]];
        let detuning = ctx.transition_frequency(&lo, &up).unwrap() - ctx.frame.mw_hz;
        let h0 = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(detuning, 0.0),
            C64::new(0.0, 0.0),
        ]));
        let mut v = CMat::zeros(2, 2);
        v[(0, 1)] = C64::new(rabi / 2.0, 0.0);
        v[(1, 0)] = C64::new(rabi / 2.0, 0.0);
        let t = 220e-9;
        let oracle = expm_taylor(&(&h0 * C64::new(0.0, 2.0 * PI * t)))
            * expm_taylor(&((&h0 + &v) * C64::new(0.0, -2.0 * PI * t)));
        let got = phase(&up);
        assert!(
            (got - oracle[(0, 0)]).norm() < 0.03,
            "{nuc:?}: {got} vs {}",
            oracle[(0, 0)]
        );
    }
}

#[test]
fn event_unitaries_are_unitary_and_trace_preserving() {
    let (ctx, lower, upper) = full_ctx();
    let ctx = ctx
        .with_options(ContextOptions::with_relaxation(Some(
            RelaxationModel::default(),
        )))
        .unwrap();
    let st = ctx.photoexcited(0.0).unwrap();
    st.check(true).unwrap();
    let pulses = vec![
        ctx.resonant_pulse(Channel::Microwave, &lower, &upper, 2.27e6, 128e-9, 0.3)
            .unwrap(),
        PulseEvent::delay(1e-6),
        PulseEvent::microwave(ctx.frame.mw_hz + 3e6, 2.27e6, 220e-9, 1.0),
        PulseEvent::rf(14.7e6, 30e3, 17e-6, 0.0).with_target(PulseTarget::Nucleus(0)),
        PulseEvent::ideal(
            Channel::Microwave,
            PulseTarget::Transition {
                lower: lower.clone(),
                upper: upper.clone(),
            },
            PI,
            0.0,
            220e-9,
        ),
        PulseEvent::virtual_z(Channel::Rf, PulseTarget::Nucleus(1), 0.8),
        PulseEvent::laser(),
    ];
    let mut s = st;
    for p in &pulses {
        if let Some(u) = ctx.event_unitary(p, s.time_s).unwrap() {
            assert!(max_abs(&(u.adjoint() * &u - identity(12))) < 1e-8);
        }
        s = ctx.apply_pulse(&s, p).unwrap();
        s.check(true).unwrap();
    }
}

#[test]
fn product_eigen_roundtrip() {
    let (ctx, _, _) = full_ctx();
    let lab = photoexcite(&ctx.system, &ctx.orientation, [0.2, 0.3, 0.5]).unwrap();
    let mut lab_t = lab.clone();
    lab_t.time_s = 2.5e-7;
    let back = ctx.to_product(&ctx.to_eigen(&lab_t).unwrap()).unwrap();
    assert!(max_abs(&(&back.matrix - &lab.matrix)) < 1e-12);
}

#[test]
fn relaxation_never_grows_coherences() {
    let ctx = nuclear_ctx(Some(RelaxationModel::default()));
    let psi = [C64::new(0.5, 0.0); 4];
    let st = DensityState::pure(&psi, ctx.basis().clone()).unwrap();
    let out = ctx.evolve(&st, 50e-6).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!(out.matrix[(i, j)].norm() <= st.matrix[(i, j)].norm() + 1e-15);
        }
    }
    assert!((out.triplet_fraction - (-0.1f64).exp()).abs() < 1e-12);
}
