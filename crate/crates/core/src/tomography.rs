//! Effective two-qubit density-matrix tomography: element-to-observable
//! mapping, phase imprinting, reconstruction, Uhlmann fidelity and the
//! fidelity error budget.
//!
//! Readout model: after a mapping sequence M the selective electron
//! transition of configuration k reports the deviation of its population
//! from the unpolarized background, S = f_T·(⟨k|MρM†|k⟩ − 1/4), with f_T the
//! surviving triplet fraction. Populations are read directly. Each
//! coherence ρ_rc is tagged by frame rotations that advance its phase as
//! e^{i2πf·t} over K artificial time samples; demodulating S at f gives
//! 2·c·ρ_rc, where c = ⟨c|M†P_kM|r⟩ is computed from the ideal mapping.
//! The result is the deviation matrix on top of I/4, so triplet decay and
//! incoherent errors show up as loss of contrast.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    Channel, DensityState, PulseEvent, PulseMode, PulseSequence, PulseTarget, RelaxationModel,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{eigh, sqrtm_psd, trace, CMat, C64};
use crate::sequences::{CnotMethod, EffectiveProcessor, EffectiveQubitBasis};
use crate::spincore::SpinSystem;

/// Elements of the upper triangle (1-based), in acquisition order.
pub const COHERENCES: [(usize, usize); 6] = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)];

/// Default imprint frequency of each coherence, in units of the base
/// frequency. Zero- and double-quantum elements use even multiples so the
/// single-quantum terms they drag along (at half the frequency) stay
/// orthogonal over the sample window.
pub fn default_multiple(row: usize, col: usize) -> usize {
    match (row.min(col), row.max(col)) {
        (1, 2) => 1,
        (1, 4) => 2,
        (1, 3) => 3,
        (2, 3) => 4,
        (2, 4) => 5,
        _ => 6,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySettings {
    pub base_frequency_hz: f64,
    /// Samples per imprint period of the base frequency.
    pub samples: usize,
}

impl Default for TomographySettings {
    fn default() -> Self {
        TomographySettings {
            base_frequency_hz: 1e3,
            samples: 16,
        }
    }
}

fn check_index(row: usize, col: usize) -> Result<()> {
    if !(1..=4).contains(&row) || !(1..=4).contains(&col) {
        return Err(invalid(format!("element ({row}, {col}) outside 1..=4")));
    }
    Ok(())
}

fn differing_qubits(row: usize, col: usize) -> Vec<usize> {
    let (a, b) = (
        EffectiveQubitBasis::bits(row),
        EffectiveQubitBasis::bits(col),
    );
    let mut out = Vec::new();
    if a.0 != b.0 {
        out.push(0);
    }
    if a.1 != b.1 {
        out.push(1);
    }
    out
}

/// Pulse program that moves element (row, col) into an electron-readable
/// population: nothing for populations, one RF π/2 on the differing nucleus
/// for single-quantum elements, CNOT then π/2 on the control for the zero-
/// and double-quantum elements.
pub fn element_mapping_sequence(
    proc: &EffectiveProcessor,
    row: usize,
    col: usize,
    method: CnotMethod,
) -> Result<PulseSequence> {
    check_index(row, col)?;
    let mut seq = PulseSequence::new(&format!("map_{row}{col}"));
    let diff = differing_qubits(row, col);
    match diff.as_slice() {
        [] => {}
        [q] => {
            seq.push(proc.ry(*q, PI / 2.0)?);
        }
        _ => {
            seq.extend(&proc.cnot_sequence(method)?);
            seq.push(proc.ry(proc.control, PI / 2.0)?);
        }
    }
    Ok(seq)
}

/// A mapping sequence repeated over the artificial time samples with the
/// imprint frame rotations prepended.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprintedSequence {
    pub element: (usize, usize),
    pub frequency_hz: f64,
    pub samples: Vec<(f64, PulseSequence)>,
}

/// Frame rotations α_n = −2πf·t·Δm_n/k on the k nuclei that differ between
/// row and column, so that ρ_row,col advances as e^{i2πf·t}. Frequency 0
/// leaves every sample equal to `sequence`.
pub fn phase_imprint(
    basis: &EffectiveQubitBasis,
    sequence: &PulseSequence,
    element: (usize, usize),
    frequency_hz: f64,
    times: &[f64],
) -> Result<ImprintedSequence> {
    let (row, col) = element;
    check_index(row, col)?;
    let lr = basis.nuclear_label(row)?;
    let lc = basis.nuclear_label(col)?;
    let dm: Vec<f64> = (0..2).map(|n| (lr[n] - lc[n]) as f64 / 2.0).collect();
    let k = dm.iter().filter(|v| **v != 0.0).count();
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let mut seq = PulseSequence::new(&sequence.name);
        if frequency_hz != 0.0 && k > 0 {
            for (n, &d) in dm.iter().enumerate() {
                if d != 0.0 {
                    let alpha = -2.0 * PI * frequency_hz * t * d / k as f64;
                    seq.push(PulseEvent::virtual_z(
                        Channel::Rf,
                        PulseTarget::Nucleus(n),
                        alpha,
                    ));
                }
            }
        }
        seq.extend(sequence);
        samples.push((t, seq));
    }
    Ok(ImprintedSequence {
        element,
        frequency_hz,
        samples,
    })
}

/// Rejects two different elements sharing a non-zero imprint frequency.
pub fn check_frequencies(plan: &[((usize, usize), f64)]) -> Result<()> {
    for (i, (ea, fa)) in plan.iter().enumerate() {
        for (eb, fb) in &plan[i + 1..] {
            let same = (ea.0.min(ea.1), ea.0.max(ea.1)) == (eb.0.min(eb.1), eb.0.max(eb.1));
            if !same && *fa != 0.0 && (fa - fb).abs() < 1e-9 * fa.abs().max(1.0) {
                return Err(invalid(format!(
                    "imprint frequency {fa} Hz used by both {ea:?} and {eb:?}"
                )));
            }
        }
    }
    Ok(())
}

/// One demodulated element estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub row: usize,
    pub col: usize,
    pub sequence: String,
    pub frequency_hz: f64,
    /// Configuration whose electron transition is read.
    pub readout: usize,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
    /// Estimate of ρ_row,col.
    pub value_re: f64,
    pub value_im: f64,
}

impl ElementRecord {
    pub fn value(&self) -> C64 {
        C64::new(self.value_re, self.value_im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
    pub records: Vec<ElementRecord>,
    pub fidelity: Option<f64>,
    pub method: Option<CnotMethod>,
}

impl TomographyResult {
    pub fn matrix(&self) -> CMat {
        CMat::from_fn(4, 4, |i, j| C64::new(self.real[i][j], self.imag[i][j]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tomography result serialises")
    }

    /// Per-element amplitudes as CSV.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("# name: tomography_records\n");
        if let Some(f) = self.fidelity {
            let _ = writeln!(out, "# fidelity: {f:.12e}");
        }
        out.push_str(
            "row,col,sequence,frequency_hz,readout,amplitude_re,amplitude_im,value_re,value_im\n",
        );
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.row,
                r.col,
                r.sequence,
                r.frequency_hz,
                r.readout,
                r.amplitude_re,
                r.amplitude_im,
                r.value_re,
                r.value_im
            );
        }
        out
    }
}

fn population_signal(proc: &EffectiveProcessor, st: &DensityState, k: usize) -> Result<f64> {
    let rho = proc.effective(st)?;
    Ok(st.triplet_fraction * (rho[(k - 1, k - 1)].re - 0.25))
}

/// Readout configuration and coefficient ⟨c|M†P_kM|r⟩ of the ideal mapping,
/// probed by running Hermitian perturbations of I/4 through it.
fn mapping_coefficient(
    proc: &EffectiveProcessor,
    seq: &PulseSequence,
    row: usize,
    col: usize,
) -> Result<(usize, C64)> {
    let clean = EffectiveProcessor::new(&proc.nuclear_context().system, &proc.basis, None)?
        .with_mode(PulseMode::Ideal)?
        .with_timing(proc.timing)?
        .with_control(proc.control)?;
    let eps = 0.1;
    let probe = |w: C64| -> Result<CMat> {
        let mut m = CMat::identity(4, 4) * C64::new(0.25, 0.0);
        m[(row - 1, col - 1)] += w * eps;
        m[(col - 1, row - 1)] += w.conj() * eps;
        clean.effective(&clean.run(&clean.state(&m)?, seq)?)
    };
    let re = probe(C64::new(1.0, 0.0))?;
    let im = probe(C64::new(0.0, 1.0))?;
    let mut best = (1usize, C64::new(0.0, 0.0));
    for k in 1..=4 {
        let sa = (re[(k - 1, k - 1)].re - 0.25) / (2.0 * eps);
        let sb = (im[(k - 1, k - 1)].re - 0.25) / (2.0 * eps);
        let c = C64::new(sa, -sb);
        if c.norm() > best.1.norm() + 1e-9 {
            best = (k, c);
        }
    }
    if best.1.norm() < 1e-6 {
        return Err(Error::Numerical(format!(
            "mapping of ({row}, {col}) reaches no readout"
        )));
    }
    Ok(best)
}

/// Acquires one coherence: K imprinted runs, demodulated at its frequency.
pub fn acquire_element(
    proc: &EffectiveProcessor,
    state: &DensityState,
    element: (usize, usize),
    frequency_hz: f64,
    method: CnotMethod,
    settings: &TomographySettings,
) -> Result<ElementRecord> {
    let (row, col) = element;
    check_index(row, col)?;
    if row == col {
        return Err(invalid("populations are read with acquire_populations"));
    }
    if !(frequency_hz > 0.0) || settings.samples < 4 || !(settings.base_frequency_hz > 0.0) {
        return Err(invalid(
            "imprint needs a positive frequency and at least four samples",
        ));
    }
    let seq = element_mapping_sequence(proc, row, col, method)?;
    let (k, coef) = mapping_coefficient(proc, &seq, row, col)?;
    let n = settings.samples;
    let times: Vec<f64> = (0..n)
        .map(|j| j as f64 / (n as f64 * settings.base_frequency_hz))
        .collect();
    let family = phase_imprint(&proc.basis, &seq, element, frequency_hz, &times)?;
    let mut amp = C64::new(0.0, 0.0);
    for (t, s) in &family.samples {
        let out = proc.run(state, s)?;
        let sig = population_signal(proc, &out, k)?;
        amp += C64::from_polar(sig, -2.0 * PI * frequency_hz * t);
    }
    amp *= C64::new(2.0 / n as f64, 0.0);
    let value = amp / (coef * C64::new(2.0, 0.0));
    Ok(ElementRecord {
        row,
        col,
        sequence: seq.name.clone(),
        frequency_hz,
        readout: k,
        amplitude_re: amp.re,
        amplitude_im: amp.im,
        value_re: value.re,
        value_im: value.im,
    })
}

/// Reads all four populations from one unmapped run.
pub fn acquire_populations(
    proc: &EffectiveProcessor,
    state: &DensityState,
) -> Result<Vec<ElementRecord>> {
    let out = proc.run(state, &PulseSequence::new("map_pop"))?;
    (1..=4)
        .map(|k| {
            let s = population_signal(proc, &out, k)?;
            Ok(ElementRecord {
                row: k,
                col: k,
                sequence: "map_pop".into(),
                frequency_hz: 0.0,
                readout: k,
                amplitude_re: s,
                amplitude_im: 0.0,
                value_re: 0.25 + s,
                value_im: 0.0,
            })
        })
        .collect()
}

/// Complete acquisition (4 populations, 6 coherences) and reconstruction.
pub fn tomography(
    proc: &EffectiveProcessor,
    state: &DensityState,
    method: CnotMethod,
    settings: &TomographySettings,
) -> Result<TomographyResult> {
    let plan: Vec<((usize, usize), f64)> = COHERENCES
        .iter()
        .map(|&(r, c)| {
            (
                (r, c),
                default_multiple(r, c) as f64 * settings.base_frequency_hz,
            )
        })
        .collect();
    check_frequencies(&plan)?;
    let mut records = acquire_populations(proc, state)?;
    for (e, f) in plan {
        records.push(acquire_element(proc, state, e, f, method, settings)?);
    }
    let mut r = reconstruct(&records)?;
    r.method = Some(method);
    Ok(r)
}

/// Assembles the Hermitian matrix: redundant and conjugate records are
/// averaged, the trace is normalized to one, no positivity projection.
pub fn reconstruct(records: &[ElementRecord]) -> Result<TomographyResult> {
    let mut sum = [[C64::new(0.0, 0.0); 4]; 4];
    let mut count = [[0usize; 4]; 4];
    for r in records {
        check_index(r.row, r.col)?;
        let (i, j) = (r.row - 1, r.col - 1);
        let (a, b, v) = if i <= j {
            (i, j, r.value())
        } else {
            (j, i, r.value().conj())
        };
        sum[a][b] += v;
        count[a][b] += 1;
    }
    let missing: Vec<(usize, usize)> = (0..4)
        .flat_map(|i| (i..4).map(move |j| (i, j)))
        .filter(|&(i, j)| count[i][j] == 0)
        .map(|(i, j)| (i + 1, j + 1))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingElements(missing));
    }
    let mut m = CMat::zeros(4, 4);
    for i in 0..4 {
        for j in i..4 {
            let v = sum[i][j] / C64::new(count[i][j] as f64, 0.0);
            if i == j {
                m[(i, i)] = C64::new(v.re, 0.0);
            } else {
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
    }
    let tr = trace(&m).re;
    if !(tr.abs() > 1e-12) {
        return Err(Error::Numerical("reconstructed trace vanishes".into()));
    }
    m /= C64::new(tr, 0.0);
    Ok(TomographyResult {
        real: (0..4)
            .map(|i| (0..4).map(|j| m[(i, j)].re).collect())
            .collect(),
        imag: (0..4)
            .map(|i| (0..4).map(|j| m[(i, j)].im).collect())
            .collect(),
        records: records.to_vec(),
        fidelity: None,
        method: None,
    })
}

fn clip_renormalize(m: &CMat) -> Result<CMat> {
    let e = eigh(m)?;
    let clipped = e.apply(|v| C64::new(v.max(0.0), 0.0));
    let tr = trace(&clipped).re;
    if !(tr > 0.0) {
        return Err(invalid("state has no positive part"));
    }
    Ok(clipped / C64::new(tr, 0.0))
}

/// Uhlmann fidelity (Tr√(√ρ σ √ρ))². Negative eigenvalues of the measured
/// matrix are clipped to zero and the trace renormalized first.
pub fn fidelity(rho_target: &CMat, rho_measured: &CMat) -> Result<f64> {
    for (name, m) in [("target", rho_target), ("measured", rho_measured)] {
        if !m.is_square() || m.nrows() != rho_target.nrows() {
            return Err(invalid(format!("{name} matrix has the wrong shape")));
        }
        if (trace(m).re - 1.0).abs() > 1e-6 || trace(m).im.abs() > 1e-6 {
            return Err(invalid(format!("{name} matrix trace deviates from 1")));
        }
        if !crate::linalg::is_hermitian(m, 1e-9) {
            return Err(invalid(format!("{name} matrix is not Hermitian")));
        }
    }
    let sigma = clip_renormalize(rho_measured)?;
    let rho = clip_renormalize(rho_target)?;
    let s = sqrtm_psd(&rho)?;
    let inner = &s * sigma * &s;
    let inner = (&inner + inner.adjoint()) * C64::new(0.5, 0.0);
    let root = sqrtm_psd(&inner)?;
    Ok(trace(&root).re.powi(2).clamp(0.0, 1.0))
}

/// (|1⟩ + |4⟩)/√2 projector.
pub fn bell_target() -> CMat {
    let mut m = CMat::zeros(4, 4);
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        m[(i, j)] = C64::new(0.5, 0.0);
    }
    m
}

/// Bell preparation plus full tomography with relaxation and a depolarizing
/// error after every RF gate; returns the reconstruction with its fidelity
/// to the ideal Bell state.
pub fn bell_tomography(
    system: &SpinSystem,
    basis: &EffectiveQubitBasis,
    method: CnotMethod,
    relaxation: Option<RelaxationModel>,
    per_gate_error: f64,
    mode: PulseMode,
    settings: &TomographySettings,
) -> Result<TomographyResult> {
    let proc = EffectiveProcessor::new(system, basis, relaxation)?
        .with_mode(mode)?
        .with_per_gate_error(per_gate_error)?;
    let bell = proc.prepare_bell(method)?;
    let mut r = tomography(&proc, &bell, method, settings)?;
    r.fidelity = Some(fidelity(&bell_target(), &r.matrix())?);
    Ok(r)
}

/// Fidelity of the reconstructed Bell state under the given error model.
pub fn error_budget(
    system: &SpinSystem,
    basis: &EffectiveQubitBasis,
    method: CnotMethod,
    relaxation: Option<RelaxationModel>,
    per_gate_error: f64,
    mode: PulseMode,
) -> Result<f64> {
    let r = bell_tomography(
        system,
        basis,
        method,
        relaxation,
        per_gate_error,
        mode,
        &TomographySettings::default(),
    )?;
    Ok(r.fidelity.expect("fidelity set"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn setup() -> (SpinSystem, EffectiveQubitBasis, EffectiveProcessor) {
        let sys = SpinSystem::fullerene();
        let b = EffectiveQubitBasis::default_for(&sys).unwrap();
        let p = EffectiveProcessor::new(&sys, &b, None).unwrap();
        (sys, b, p)
    }

    #[test]
    fn mapping_shapes() {
        let (_, _, p) = setup();
        assert!(element_mapping_sequence(&p, 1, 1, CnotMethod::Cphase)
            .unwrap()
            .is_empty());
        let dq = element_mapping_sequence(&p, 1, 4, CnotMethod::Cphase).unwrap();
        let cnot = p.cnot_sequence(CnotMethod::Cphase).unwrap();
        assert_eq!(dq.len(), cnot.len() + 1);
        assert_eq!(&dq.events[..cnot.len()], &cnot.events[..]);
        let sq = element_mapping_sequence(&p, 2, 4, CnotMethod::Cphase).unwrap();
        assert_eq!(sq.len(), 1);
        assert!(element_mapping_sequence(&p, 0, 4, CnotMethod::Cphase).is_err());
    }

    #[test]
    fn single_quantum_mapping_reaches_readout() {
        // oracle: the composed unitary moves ⟨2|ρ|4⟩ into a population
        let (_, _, p) = setup();
        let seq = element_mapping_sequence(&p, 2, 4, CnotMethod::Cphase).unwrap();
        let (k, c) = mapping_coefficient(&p, &seq, 2, 4).unwrap();
        assert!((c.norm() - 0.5).abs() < 1e-9, "k {k} coef {c}");
    }

    #[test]
    fn zero_frequency_imprint_is_identity() {
        let (_, b, p) = setup();
        let seq = element_mapping_sequence(&p, 1, 2, CnotMethod::Cphase).unwrap();
        let fam = phase_imprint(&b, &seq, (1, 2), 0.0, &[0.0, 1e-4, 2e-4]).unwrap();
        assert!(fam.samples.iter().all(|(_, s)| s == &seq));
    }

    #[test]
    fn frequency_collision_rejected() {
        assert!(check_frequencies(&[((1, 2), 1e3), ((1, 3), 1e3)]).is_err());
        assert!(check_frequencies(&[((1, 2), 1e3), ((2, 1), 1e3), ((1, 3), 2e3)]).is_ok());
    }

    /// Oracle: simulate the imprinted sweep and Fourier-analyse it.
    fn spectrum(
        p: &EffectiveProcessor,
        st: &DensityState,
        elem: (usize, usize),
        f: f64,
    ) -> Vec<f64> {
        let seq = element_mapping_sequence(p, elem.0, elem.1, CnotMethod::Cphase).unwrap();
        let (k, _) = mapping_coefficient(p, &seq, elem.0, elem.1).unwrap();
        let n = 32;
        let times: Vec<f64> = (0..n).map(|j| j as f64 / (n as f64 * 1e3)).collect();
        let fam = phase_imprint(&p.basis, &seq, elem, f, &times).unwrap();
        let sig: Vec<f64> = fam
            .samples
            .iter()
            .map(|(_, s)| population_signal(p, &p.run(st, s).unwrap(), k).unwrap())
            .collect();
        (0..n / 2)
            .map(|q| {
                sig.iter()
                    .enumerate()
                    .map(|(j, v)| C64::from_polar(*v, -2.0 * PI * (q * j) as f64 / n as f64))
                    .sum::<C64>()
                    .norm()
            })
            .collect()
    }

    #[test]
    fn single_coherence_gives_single_tone() {
        let (_, _, p) = setup();
        let mut rho = CMat::identity(4, 4) * C64::new(0.25, 0.0);
        rho[(0, 1)] = C64::new(0.1, 0.05);
        rho[(1, 0)] = C64::new(0.1, -0.05);
        let st = p.state(&rho).unwrap();
        let spec = spectrum(&p, &st, (1, 2), 3e3);
        let peak = (1..spec.len())
            .max_by(|a, b| spec[*a].partial_cmp(&spec[*b]).unwrap())
            .unwrap();
        assert_eq!(peak, 3);
        for (q, v) in spec.iter().enumerate().skip(1) {
            if q != 3 {
                assert!(*v < 1e-9 * spec[3], "leak at bin {q}");
            }
        }
    }

    #[test]
    fn two_elements_two_tones() {
        // (1,2) and (1,3) coherences tagged at different frequencies through
        // one shared frame: the (1,2) readout only carries its own tone
        let (_, b, p) = setup();
        let mut rho = CMat::identity(4, 4) * C64::new(0.25, 0.0);
        for (i, j) in [(0, 1), (0, 2)] {
            rho[(i, j)] = C64::new(0.1, 0.0);
            rho[(j, i)] = C64::new(0.1, 0.0);
        }
        let st = p.state(&rho).unwrap();
        let seq = PulseSequence::new("probe");
        let times: Vec<f64> = (0..32).map(|j| j as f64 / 32e3).collect();
        let f12 = phase_imprint(&b, &seq, (1, 2), 2e3, &times).unwrap();
        let f13 = phase_imprint(&b, &seq, (1, 3), 5e3, &times).unwrap();
        // phases of the combined frame on each element
        let mut tones = Vec::new();
        for j in 0..times.len() {
            let mut s = PulseSequence::new("both");
            s.extend(&f12.samples[j].1);
            s.extend(&f13.samples[j].1);
            let out = p.effective(&p.run(&st, &s).unwrap()).unwrap();
            tones.push((out[(0, 1)], out[(0, 2)]));
        }
        let dft = |vals: &[C64], q: usize| -> f64 {
            vals.iter()
                .enumerate()
                .map(|(j, v)| v * C64::from_polar(1.0, -2.0 * PI * (q * j) as f64 / 32.0))
                .sum::<C64>()
                .norm()
        };
        let a: Vec<C64> = tones.iter().map(|t| t.0).collect();
        let c: Vec<C64> = tones.iter().map(|t| t.1).collect();
        assert!(dft(&a, 2) > 1.0 && dft(&c, 5) > 1.0);
        assert!(dft(&a, 5) < 1e-9 && dft(&c, 2) < 1e-9);
    }

    #[test]
    fn reconstruct_bell_and_mixed() {
        let (_, _, p) = setup();
        let bell = p.prepare_bell(CnotMethod::Cphase).unwrap();
        let r = tomography(
            &p,
            &bell,
            CnotMethod::Cphase,
            &TomographySettings::default(),
        )
        .unwrap();
        assert!(max_abs(&(r.matrix() - bell_target())) < 1e-6);
        let mixed = p
            .state(&(CMat::identity(4, 4) * C64::new(0.25, 0.0)))
            .unwrap();
        let r = tomography(
            &p,
            &mixed,
            CnotMethod::Cphase,
            &TomographySettings::default(),
        )
        .unwrap();
        assert!(max_abs(&(r.matrix() - CMat::identity(4, 4) * C64::new(0.25, 0.0))) < 1e-9);
    }

    #[test]
    fn missing_elements_listed() {
        let (_, _, p) = setup();
        let st = p.basis_state(1).unwrap();
        let recs = acquire_populations(&p, &st).unwrap();
        match reconstruct(&recs) {
            Err(Error::MissingElements(m)) => assert_eq!(m.len(), 6),
            other => panic!("expected missing elements, got {other:?}"),
        }
    }

    #[test]
    fn fidelity_examples() {
        let bell = bell_target();
        assert!((fidelity(&bell, &bell).unwrap() - 1.0).abs() < 1e-9);
        let mixed = CMat::identity(4, 4) * C64::new(0.25, 0.0);
        assert!((fidelity(&bell, &mixed).unwrap() - 0.25).abs() < 1e-9);
        let mut other = CMat::zeros(4, 4);
        for (i, j, v) in [(0, 0, 0.5), (3, 3, 0.5), (0, 3, -0.5), (3, 0, -0.5)] {
            other[(i, j)] = C64::new(v, 0.0);
        }
        assert!(fidelity(&bell, &other).unwrap() < 1e-9);
        let mut bad = bell.clone();
        bad[(0, 0)] = C64::new(0.6, 0.0);
        assert!(fidelity(&bell, &bad).is_err());
    }

    #[test]
    fn dqc_hold_decay_matches_direct_simulation() {
        let sys = SpinSystem::fullerene();
        let b = EffectiveQubitBasis::default_for(&sys).unwrap();
        let model = RelaxationModel {
            t2_dqc_s: Some(100e-6),
            ..RelaxationModel::none()
        };
        let p = EffectiveProcessor::new(&sys, &b, Some(model)).unwrap();
        let bell = p.prepare_bell(CnotMethod::Cphase).unwrap();
        let hold = 50e-6;
        let held = p
            .run(&bell, &{
                let mut s = PulseSequence::new("hold");
                s.push(PulseEvent::delay(hold));
                s
            })
            .unwrap();
        let settings = TomographySettings::default();
        let r0 = tomography(&p, &bell, CnotMethod::Cphase, &settings).unwrap();
        let r1 = tomography(&p, &held, CnotMethod::Cphase, &settings).unwrap();
        let ratio = r1.matrix()[(0, 3)].norm() / r0.matrix()[(0, 3)].norm();
        assert!(
            (ratio - (-hold / 100e-6f64).exp()).abs() < 1e-6,
            "ratio {ratio}"
        );
    }

    #[test]
    fn noiseless_budget_is_perfect() {
        let (sys, b, _) = setup();
        let f = error_budget(&sys, &b, CnotMethod::Cphase, None, 0.0, PulseMode::Ideal).unwrap();
        assert!(f > 0.99, "{f}");
    }
}
