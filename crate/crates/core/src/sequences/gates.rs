use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::basis::EffectiveQubitBasis;
use crate::dynamics::{
    apply_relaxation, Channel, ContextOptions, DensityState, PulseEvent, PulseMode, PulseSequence,
    PulseTarget, RelaxationModel, SpinContext,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{CMat, C64};
use crate::spincore::SpinSystem;

/// Pulse lengths of the gate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateTiming {
    /// Every RF rotation (π/2 and π alike).
    pub rf_pulse_s: f64,
    /// Selective microwave π and 2π pulses.
    pub mw_pulse_s: f64,
}

impl Default for GateTiming {
    fn default() -> Self {
        GateTiming {
            rf_pulse_s: 17e-6,
            mw_pulse_s: 220e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CnotMethod {
    /// Hadamard-like RF rotations around the geometric-phase CPHASE.
    #[default]
    Cphase,
    /// Free evolution under the nuclear coupling, refocused by π pulses.
    Dipolar,
}

impl std::str::FromStr for CnotMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cphase" => Ok(CnotMethod::Cphase),
            "dipolar" => Ok(CnotMethod::Dipolar),
            _ => Err(invalid(format!(
                "unknown CNOT method {s:?} (cphase | dipolar)"
            ))),
        }
    }
}

/// Runs pulse programs on the effective two-qubit register of the T₀
/// manifold.
///
/// RF pulses and free evolution act on a nuclear-only context with the
/// electron frozen in T₀. Microwave events are simulated on the full
/// 12-level context and enter as the T₀ block K of their interaction-picture
/// propagator; population K fails to return to T₀ is put back maximally
/// mixed, ρ → KρK† + (1 − Tr KρK†)·I/4.
#[derive(Debug, Clone)]
pub struct EffectiveProcessor {
    pub basis: EffectiveQubitBasis,
    pub timing: GateTiming,
    pub mode: PulseMode,
    /// Depolarizing strength applied to each nucleus after every RF pulse
    /// acting on it.
    pub per_gate_error: f64,
    /// Control and target qubits of [`cnot`].
    pub control: usize,
    pub target: usize,
    nuclear: SpinContext,
    full: SpinContext,
    perm: [usize; 4],
    full_idx: [usize; 4],
}

impl EffectiveProcessor {
    pub fn new(
        system: &SpinSystem,
        basis: &EffectiveQubitBasis,
        relaxation: Option<RelaxationModel>,
    ) -> Result<Self> {
        let frame = basis.frame(system)?;
        let nuclear = SpinContext::nuclear(
            system,
            basis.field_tesla,
            &basis.orientation,
            0,
            frame.clone(),
            ContextOptions::with_relaxation(relaxation),
        )?;
        let full = SpinContext::full(
            system,
            basis.field_tesla,
            &basis.orientation,
            frame,
            ContextOptions::default(),
        )?;
        let mut perm = [0; 4];
        let mut full_idx = [0; 4];
        for e in 1..=4 {
            perm[e - 1] = nuclear.index_of(&basis.nuclear_label(e)?)?;
            full_idx[e - 1] = full.index_of(&basis.full_label(e, 0)?)?;
        }
        Ok(EffectiveProcessor {
            basis: basis.clone(),
            timing: GateTiming::default(),
            mode: PulseMode::Ideal,
            per_gate_error: 0.0,
            control: 0,
            target: 1,
            nuclear,
            full,
            perm,
            full_idx,
        })
    }

    pub fn with_mode(mut self, mode: PulseMode) -> Result<Self> {
        if mode == PulseMode::Virtual {
            return Err(invalid("gate mode must be ideal or finite"));
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn with_timing(mut self, timing: GateTiming) -> Result<Self> {
        if !(timing.rf_pulse_s > 0.0 && timing.mw_pulse_s > 0.0) {
            return Err(invalid("gate pulse lengths must be positive"));
        }
        self.timing = timing;
        Ok(self)
    }

    pub fn with_per_gate_error(mut self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!(
                "per-gate error must lie in [0, 1], got {p}"
            )));
        }
        self.per_gate_error = p;
        Ok(self)
    }

    pub fn with_control(mut self, control: usize) -> Result<Self> {
        if control > 1 {
            return Err(invalid("control qubit must be 0 or 1"));
        }
        self.control = control;
        self.target = 1 - control;
        Ok(self)
    }

    pub fn nuclear_context(&self) -> &SpinContext {
        &self.nuclear
    }

    pub fn full_context(&self) -> &SpinContext {
        &self.full
    }

    /// State from a 4×4 matrix in effective order |1⟩..|4⟩, at time 0.
    pub fn state(&self, rho: &CMat) -> Result<DensityState> {
        if rho.nrows() != 4 || rho.ncols() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: rho.nrows(),
            });
        }
        let mut m = CMat::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                m[(self.perm[i], self.perm[j])] = rho[(i, j)];
            }
        }
        self.nuclear.state(m)
    }

    /// Pure state from amplitudes on |1⟩..|4⟩.
    pub fn pure(&self, psi: &[C64; 4]) -> Result<DensityState> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(invalid("zero state vector"));
        }
        let v = v / C64::new(norm, 0.0);
        self.state(&(&v * v.adjoint()))
    }

    /// |e⟩⟨e| for e ∈ 1..=4.
    pub fn basis_state(&self, e: usize) -> Result<DensityState> {
        if !(1..=4).contains(&e) {
            return Err(invalid(format!("effective state index {e} outside 1..=4")));
        }
        let mut psi = [C64::new(0.0, 0.0); 4];
        psi[e - 1] = C64::new(1.0, 0.0);
        self.pure(&psi)
    }

    /// 4×4 matrix in effective order.
    pub fn effective(&self, st: &DensityState) -> Result<CMat> {
        let s = self.nuclear.to_eigen(st)?;
        Ok(CMat::from_fn(4, 4, |i, j| {
            s.matrix[(self.perm[i], self.perm[j])]
        }))
    }

    fn embed_effective(&self, template: &DensityState, rho: &CMat) -> DensityState {
        let mut m = CMat::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                m[(self.perm[i], self.perm[j])] = rho[(i, j)];
            }
        }
        template.with_matrix(m)
    }

    /// T₀ block (effective order) of a microwave event's propagator in the
    /// interaction picture of the full context.
    pub fn mw_block(&self, e: &PulseEvent, t0: f64) -> Result<CMat> {
        let u = self
            .full
            .event_unitary(e, t0)?
            .ok_or_else(|| invalid("microwave event without a unitary"))?;
        let m = match e.mode {
            PulseMode::Finite => self.full.free_propagator(e.duration_s).adjoint() * u,
            _ => u,
        };
        Ok(CMat::from_fn(4, 4, |i, j| {
            m[(self.full_idx[i], self.full_idx[j])]
        }))
    }

    /// Depolarizes qubit `q`: ρ → (1 − p)ρ + p·Tr_q(ρ) ⊗ I/2.
    fn depolarize(&self, rho: &CMat, q: usize, p: f64) -> CMat {
        let bit = if q == 0 { 2 } else { 1 };
        let mut out = rho * C64::new(1.0 - p, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                if (i & bit) != (j & bit) {
                    continue;
                }
                let traced = rho[(i & !bit, j & !bit)] + rho[(i | bit, j | bit)];
                out[(i, j)] += traced * C64::new(0.5 * p, 0.0);
            }
        }
        out
    }

    fn gated_qubits(e: &PulseEvent) -> Vec<usize> {
        match &e.target {
            Some(PulseTarget::Nucleus(n)) => vec![*n],
            Some(PulseTarget::Nuclei(v)) => v.clone(),
            Some(PulseTarget::Transition { lower, upper }) => lower
                .iter()
                .zip(upper)
                .position(|(a, b)| a != b)
                .into_iter()
                .collect(),
            _ => vec![0, 1],
        }
    }

    pub fn apply(&self, st: &DensityState, e: &PulseEvent) -> Result<DensityState> {
        e.validate()?;
        match e.channel {
            Channel::Laser => Err(invalid(
                "laser events act on the electron and are not part of the effective register",
            )),
            Channel::Microwave => {
                if e.mode == PulseMode::Virtual {
                    // frame rotation of the electron leaves T₀ (m_S = 0) untouched
                    return self.nuclear.to_eigen(st);
                }
                let s = self.nuclear.to_eigen(st)?;
                let k = self.mw_block(e, s.time_s)?;
                let rho = self.effective(&s)?;
                let mut out = &k * rho * k.adjoint();
                let lost = 1.0 - crate::linalg::trace(&out).re;
                for i in 0..4 {
                    out[(i, i)] += C64::new(lost / 4.0, 0.0);
                }
                let s = self.embed_effective(&s, &out);
                match e.mode {
                    PulseMode::Finite => self.nuclear.evolve(&s, e.duration_s),
                    _ => {
                        let mut s = s;
                        s.time_s += e.duration_s;
                        match &self.nuclear.options.relaxation {
                            Some(m) if e.duration_s > 0.0 => apply_relaxation(&s, m, e.duration_s),
                            _ => Ok(s),
                        }
                    }
                }
            }
            Channel::Rf => {
                let s = self.nuclear.apply_pulse(st, e)?;
                if e.mode == PulseMode::Virtual || self.per_gate_error == 0.0 {
                    return Ok(s);
                }
                let mut rho = self.effective(&s)?;
                for q in Self::gated_qubits(e) {
                    rho = self.depolarize(&rho, q, self.per_gate_error);
                }
                Ok(self.embed_effective(&s, &rho))
            }
            Channel::Delay => self.nuclear.apply_pulse(st, e),
        }
    }

    pub fn run(&self, st: &DensityState, seq: &PulseSequence) -> Result<DensityState> {
        let mut s = self.nuclear.to_eigen(st)?;
        for e in &seq.events {
            s = self.apply(&s, e)?;
        }
        Ok(s)
    }

    fn check_qubit(q: usize) -> Result<()> {
        if q > 1 {
            return Err(invalid(format!("qubit index {q} outside 0..=1")));
        }
        Ok(())
    }

    /// RF phase realising a qubit rotation axis at angle `axis` from x.
    fn rf_phase(&self, q: usize, axis: f64) -> f64 {
        let r = self.basis.reference[q].signum() as f64;
        -r * self.nuclear.sigma(q) * axis
    }

    fn rf_event(&self, target: PulseTarget, phase: f64, theta: f64) -> PulseEvent {
        let dur = self.timing.rf_pulse_s;
        match self.mode {
            PulseMode::Finite => {
                PulseEvent::rf(0.0, theta / (2.0 * PI * dur), dur, phase).with_target(target)
            }
            _ => PulseEvent::ideal(Channel::Rf, target, theta, phase, dur),
        }
    }

    /// Qubit rotation exp(−iθ(cos a·X + sin a·Y)/2) as one RF pulse.
    pub fn rotation(&self, q: usize, theta: f64, axis: f64) -> Result<PulseEvent> {
        Self::check_qubit(q)?;
        let (theta, axis) = if theta < 0.0 {
            (-theta, axis + PI)
        } else {
            (theta, axis)
        };
        Ok(self.rf_event(PulseTarget::Nucleus(q), self.rf_phase(q, axis), theta))
    }

    /// The same rotation on both qubits simultaneously.
    pub fn rotation_both(&self, theta: f64, axis: f64) -> Result<PulseEvent> {
        if self.rf_phase(0, axis) != self.rf_phase(1, axis) {
            return Err(invalid(
                "simultaneous rotation needs equal phase conventions on both nuclei",
            ));
        }
        let (theta, axis) = if theta < 0.0 {
            (-theta, axis + PI)
        } else {
            (theta, axis)
        };
        Ok(self.rf_event(
            PulseTarget::Nuclei(vec![0, 1]),
            self.rf_phase(0, axis),
            theta,
        ))
    }

    pub fn ry(&self, q: usize, theta: f64) -> Result<PulseEvent> {
        self.rotation(q, theta, FRAC_PI_2)
    }

    /// Qubit Rz(θ) = exp(−iθZ/2) as a frame update.
    pub fn rz(&self, q: usize, theta: f64) -> Result<PulseEvent> {
        Self::check_qubit(q)?;
        let r = self.basis.reference[q].signum() as f64;
        Ok(PulseEvent::virtual_z(
            Channel::Rf,
            PulseTarget::Nucleus(q),
            -r * theta,
        ))
    }

    /// Selective microwave 2π pulse on the (partner, |4⟩) ↔ (T₀, |4⟩)
    /// transition.
    pub fn cphase_event(&self) -> Result<PulseEvent> {
        let target = PulseTarget::Transition {
            lower: self.basis.full_label(4, 0)?,
            upper: self.basis.full_label(4, self.basis.partner_ms)?,
        };
        let dur = self.timing.mw_pulse_s;
        Ok(match self.mode {
            PulseMode::Finite => {
                PulseEvent::microwave(0.0, 1.0 / dur, dur, 0.0).with_target(target)
            }
            _ => PulseEvent::ideal(Channel::Microwave, target, 2.0 * PI, 0.0, dur),
        })
    }

    /// CZ on |4⟩ up to a global phase.
    pub fn cz_sequence(&self, method: CnotMethod) -> Result<PulseSequence> {
        let mut seq = PulseSequence::new(match method {
            CnotMethod::Cphase => "cz_cphase",
            CnotMethod::Dipolar => "cz_dipolar",
        });
        match method {
            CnotMethod::Cphase => {
                seq.push(self.cphase_event()?);
            }
            CnotMethod::Dipolar => {
                let j = self.nuclear.system.nn_coupling_hz;
                if j == 0.0 {
                    return Err(invalid("dipolar CNOT needs a non-zero nuclear coupling"));
                }
                let tau = 1.0 / (4.0 * j.abs());
                let pi_both = self.rotation_both(PI, 0.0)?;
                seq.push(PulseEvent::delay(tau));
                seq.push(pi_both.clone());
                seq.push(PulseEvent::delay(tau));
                seq.push(pi_both);
                // exp(−iπ·m1·m2) leaves local phases that two frame updates remove
                let z = -FRAC_PI_2 * j.signum();
                seq.push(self.rz(0, z)?);
                seq.push(self.rz(1, z)?);
            }
        }
        Ok(seq)
    }

    /// CNOT = Ry_t(π/2) · CZ · Ry_t(−π/2), rightmost first.
    pub fn cnot_sequence(&self, method: CnotMethod) -> Result<PulseSequence> {
        let t = self.target;
        let mut seq = PulseSequence::new(match method {
            CnotMethod::Cphase => "cnot_cphase",
            CnotMethod::Dipolar => "cnot_dipolar",
        });
        seq.push(self.ry(t, -FRAC_PI_2)?);
        seq.extend(&self.cz_sequence(method)?);
        seq.push(self.ry(t, FRAC_PI_2)?);
        Ok(seq)
    }

    /// From |1⟩: Ry(π/2) on the control, then CNOT → (|1⟩ + |4⟩)/√2.
    pub fn bell_sequence(&self, method: CnotMethod) -> Result<PulseSequence> {
        let mut seq = PulseSequence::new("bell");
        seq.push(self.ry(self.control, FRAC_PI_2)?);
        seq.extend(&self.cnot_sequence(method)?);
        Ok(seq)
    }

    /// Bell-state preparation from |1⟩.
    pub fn prepare_bell(&self, method: CnotMethod) -> Result<DensityState> {
        self.run(&self.basis_state(1)?, &self.bell_sequence(method)?)
    }
}

/// Geometric-phase CPHASE diag(1, 1, 1, −1) through the processor's mode.
pub fn aa_cphase(proc: &EffectiveProcessor, state: &DensityState) -> Result<DensityState> {
    if state.dim() != 4 {
        return Err(Error::InvalidState(
            "CPHASE acts on the effective T₀ register".into(),
        ));
    }
    proc.apply(state, &proc.cphase_event()?)
}

/// CNOT (control/target from the processor), with the elapsed time.
pub fn cnot(
    proc: &EffectiveProcessor,
    state: &DensityState,
    method: CnotMethod,
) -> Result<(DensityState, f64)> {
    if state.dim() != 4 {
        return Err(Error::InvalidState(
            "CNOT acts on the effective T₀ register".into(),
        ));
    }
    let seq = proc.cnot_sequence(method)?;
    let out = proc.run(state, &seq)?;
    Ok((out, seq.total_duration()))
}

/// Relative phases (rad, effective order) that a finite microwave event
/// imprints on |1⟩..|4⟩, measured against free evolution over its duration,
/// with the probability of staying in each T₀ configuration.
pub fn cphase_phases(proc: &EffectiveProcessor) -> Result<([f64; 4], [f64; 4])> {
    let k = proc.mw_block(&proc.cphase_event()?, 0.0)?;
    let mut phases = [0.0; 4];
    let mut stay = [0.0; 4];
    for i in 0..4 {
        phases[i] = k[(i, i)].arg();
        stay[i] = k[(i, i)].norm_sqr();
    }
    Ok((phases, stay))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, trace_distance};

    fn proc(mode: PulseMode) -> EffectiveProcessor {
        let sys = SpinSystem::fullerene();
        let basis = EffectiveQubitBasis::default_for(&sys).unwrap();
        EffectiveProcessor::new(&sys, &basis, None)
            .unwrap()
            .with_mode(mode)
            .unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    /// Textbook CNOT in effective order, control = qubit 0.
    fn textbook_cnot() -> CMat {
        let mut m = CMat::zeros(4, 4);
        m[(0, 0)] = c(1.0);
        m[(1, 1)] = c(1.0);
        m[(2, 3)] = c(1.0);
        m[(3, 2)] = c(1.0);
        m
    }

    /// Effective process as a 4×4 unitary from basis and superposition inputs
    /// (global phase fixed on the |1⟩ column).
    fn basis_pair_inputs() -> Vec<CMat> {
        let mut out = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                let mut v = nalgebra::DVector::from_element(4, c(0.0));
                v[a] += c(1.0);
                v[b] += if a == b { c(0.0) } else { C64::new(0.0, 1.0) };
                let v = &v / c(v.norm());
                out.push(&v * v.adjoint());
            }
        }
        out
    }

    #[test]
    fn ideal_cphase_flips_sign_of_four() {
        let p = proc(PulseMode::Ideal);
        let s = 0.5_f64.sqrt();
        let st = p.pure(&[c(0.0), c(0.0), c(s), c(s)]).unwrap();
        let out = aa_cphase(&p, &st).unwrap();
        let rho = p.effective(&out).unwrap();
        let v = nalgebra::DVector::from_vec(vec![c(0.0), c(0.0), c(s), c(-s)]);
        let expected = &v * v.adjoint();
        assert!(max_abs(&(rho - expected)) < 1e-10);
        let twice = aa_cphase(&p, &aa_cphase(&p, &st).unwrap()).unwrap();
        assert!(max_abs(&(p.effective(&twice).unwrap() - p.effective(&st).unwrap())) < 1e-10);
    }

    #[test]
    fn ideal_cphase_block_is_diagonal_pattern() {
        let p = proc(PulseMode::Ideal);
        let k = p.mw_block(&p.cphase_event().unwrap(), 0.0).unwrap();
        let mut expected = CMat::identity(4, 4);
        expected[(3, 3)] = c(-1.0);
        assert!(max_abs(&(k - expected)) < 1e-10);
    }

    #[test]
    fn cnot_matches_textbook_for_both_methods() {
        let ucnot = textbook_cnot();
        for method in [CnotMethod::Cphase, CnotMethod::Dipolar] {
            let p = proc(PulseMode::Ideal);
            for rho in basis_pair_inputs() {
                let st = p.state(&rho).unwrap();
                let (out, _) = cnot(&p, &st, method).unwrap();
                let expected = &ucnot * &rho * ucnot.adjoint();
                let d = trace_distance(&p.effective(&out).unwrap(), &expected).unwrap();
                assert!(d < 1e-9, "{method:?}: trace distance {d}");
            }
        }
    }

    #[test]
    fn truth_table_four_to_three() {
        let p = proc(PulseMode::Ideal);
        let (out, _) = cnot(&p, &p.basis_state(4).unwrap(), CnotMethod::Cphase).unwrap();
        let rho = p.effective(&out).unwrap();
        assert!((rho[(2, 2)].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn control_superposition_entangles() {
        let p = proc(PulseMode::Ideal);
        let s = 0.5_f64.sqrt();
        let st = p.pure(&[c(0.0), c(s), c(0.0), c(s)]).unwrap();
        let (out, _) = cnot(&p, &st, CnotMethod::Cphase).unwrap();
        let rho = p.effective(&out).unwrap();
        // (|2⟩ + |3⟩)/√2
        assert!((rho[(1, 2)].re - 0.5).abs() < 1e-10);
        assert!((rho[(1, 1)].re - 0.5).abs() < 1e-10 && (rho[(2, 2)].re - 0.5).abs() < 1e-10);
    }

    #[test]
    fn bell_preparation() {
        for method in [CnotMethod::Cphase, CnotMethod::Dipolar] {
            let p = proc(PulseMode::Ideal);
            let rho = p.effective(&p.prepare_bell(method).unwrap()).unwrap();
            assert!((rho[(0, 0)].re - 0.5).abs() < 1e-10);
            assert!((rho[(3, 3)].re - 0.5).abs() < 1e-10);
            assert!((rho[(0, 3)] - c(0.5)).norm() < 1e-10);
        }
    }

    #[test]
    fn elapsed_times() {
        let p = proc(PulseMode::Finite);
        let (_, t) = cnot(&p, &p.basis_state(4).unwrap(), CnotMethod::Cphase).unwrap();
        assert!((t - 34.22e-6).abs() < 1e-12);
        let (_, t) = cnot(&p, &p.basis_state(4).unwrap(), CnotMethod::Dipolar).unwrap();
        let expected = 4.0 * 17e-6 + 1.0 / (2.0 * 3e3);
        assert!((t - expected).abs() < 1e-12);
    }

    #[test]
    fn finite_cphase_addressed_phase_near_pi() {
        let p = proc(PulseMode::Finite);
        let (ph, stay) = cphase_phases(&p).unwrap();
        assert!((ph[3].abs() - PI).abs() < 0.05, "phase {}", ph[3]);
        assert!(stay[3] > 0.99);
        // unaddressed neighbours pick up dynamic phases and some leakage
        assert!(ph[..3].iter().any(|v| v.abs() > 0.1));
    }

    #[test]
    fn finite_cnot_close_to_ideal() {
        let pi = proc(PulseMode::Ideal);
        let pf = proc(PulseMode::Finite);
        let (a, _) = cnot(&pi, &pi.basis_state(4).unwrap(), CnotMethod::Cphase).unwrap();
        let (b, _) = cnot(&pf, &pf.basis_state(4).unwrap(), CnotMethod::Cphase).unwrap();
        let d = trace_distance(&pi.effective(&a).unwrap(), &pf.effective(&b).unwrap()).unwrap();
        assert!(d < 0.5, "finite vs ideal trace distance {d}");
    }

    #[test]
    fn depolarizing_full_strength_mixes_qubit() {
        let p = proc(PulseMode::Ideal).with_per_gate_error(1.0).unwrap();
        let st = p.basis_state(4).unwrap();
        let out = p.apply(&st, &p.ry(0, 2.0 * PI).unwrap()).unwrap();
        let rho = p.effective(&out).unwrap();
        assert!((rho[(1, 1)].re - 0.5).abs() < 1e-10);
        assert!((rho[(3, 3)].re - 0.5).abs() < 1e-10);
        assert!((crate::linalg::trace(&rho).re - 1.0).abs() < 1e-12);
    }
}
