use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::photo::{photoexcite, product_sites, DEFAULT_POPULATIONS};
use super::pulse::{Channel, PulseEvent, PulseMode, PulseSequence, PulseTarget};
use super::relaxation::{apply_relaxation, RelaxationModel};
use super::state::{BasisKind, BasisTag, DensityState, Label, SiteKind};
use crate::error::{invalid, Error, Result};
use crate::linalg::{conjugate, eigh, max_abs, rotation, CMat, HermitianEigen, C64};
use crate::spincore::{
    build_hamiltonian_with, lab_z, Orientation, ProductOperators, SpinSystem, SystemOperators,
};

/// Rotating-frame reference frequencies: one for the electron, one per nucleus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameSpec {
    pub mw_hz: f64,
    pub rf_hz: Vec<f64>,
}

impl FrameSpec {
    pub fn lab() -> Self {
        FrameSpec::default()
    }

    pub fn frequency(&self, site: SiteKind) -> f64 {
        match site {
            SiteKind::Electron => self.mw_hz,
            SiteKind::Nucleus(n) => self.rf_hz.get(n).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextOptions {
    pub relaxation: Option<RelaxationModel>,
    /// Longest piecewise-constant segment between relaxation steps; `None`
    /// uses one segment per event.
    pub segment_s: Option<f64>,
    pub populations: [f64; 3],
}

impl Default for ContextOptions {
    fn default() -> Self {
        ContextOptions {
            relaxation: None,
            segment_s: None,
            populations: DEFAULT_POPULATIONS,
        }
    }
}

impl ContextOptions {
    pub fn with_relaxation(model: Option<RelaxationModel>) -> Self {
        ContextOptions {
            relaxation: model,
            ..Self::default()
        }
    }
}

/// Everything needed to push states through pulse programs at one field and
/// orientation.
///
/// States live in the eigenbasis of the static Hamiltonian, in the rotating
/// frame F = Σ_sites σ·ν_frame·m. σ is the sign of the site's transition
/// energies (+1 for the electron, −1 for nuclei with positive γ), so all
/// carrier and frame frequencies are positive numbers. A drive with lab
/// phase φ couples the level with the larger m to the smaller one through
/// c·e^{−iσφ}·⟨k|X|l⟩.
#[derive(Debug, Clone)]
pub struct SpinContext {
    pub system: SpinSystem,
    pub field_tesla: f64,
    pub orientation: Orientation,
    pub frame: FrameSpec,
    pub options: ContextOptions,
    dims: Vec<usize>,
    hamiltonian: CMat,
    vectors: CMat,
    h_eig: CMat,
    energies: Vec<f64>,
    basis: BasisTag,
    product_basis: BasisTag,
    x_eig: Vec<CMat>,
    sigma: Vec<f64>,
    frame_diag: Vec<f64>,
    free: HermitianEigen,
}

const LABEL_WEIGHTS: [f64; 6] = [1.0, 0.231, 0.0517, 0.0113, 0.00247, 0.00053];

impl SpinContext {
    /// Electron plus all nuclei, field along lab z.
    pub fn full(
        system: &SpinSystem,
        field_tesla: f64,
        orientation: &Orientation,
        frame: FrameSpec,
        options: ContextOptions,
    ) -> Result<Self> {
        let ops = SystemOperators::new(system)?;
        let h = build_hamiltonian_with(&ops, system, lab_z(field_tesla), orientation)?.matrix;
        Self::from_parts(
            system,
            field_tesla,
            orientation,
            frame,
            options,
            product_sites(system),
            &ops.product,
            h,
        )
    }

    /// Nuclei only, with the electron frozen in the manifold m_S = `electron_ms`:
    /// H = Σ (−γB + m_S·A_zz)·I_z + J-term.
    pub fn nuclear(
        system: &SpinSystem,
        field_tesla: f64,
        orientation: &Orientation,
        electron_ms: i32,
        frame: FrameSpec,
        options: ContextOptions,
    ) -> Result<Self> {
        system.validate()?;
        if system.nuclei.is_empty() {
            return Err(invalid("nuclear context needs at least one nucleus"));
        }
        let dims: Vec<usize> = system.nuclei.iter().map(|n| n.multiplicity()).collect();
        let prod = ProductOperators::new(&dims)?;
        let d = prod.dim();
        let mut h = CMat::zeros(d, d);
        for (k, nuc) in system.nuclei.iter().enumerate() {
            let a_zz = orientation.rotate_tensor(&nuc.hyperfine_tensor_hz)[(2, 2)];
            let nu = -nuc.gyromagnetic_ratio_hz_per_t * field_tesla + electron_ms as f64 * a_zz;
            h += &prod.sites[k].z * C64::new(nu, 0.0);
        }
        if system.nuclei.len() >= 2 && system.nn_coupling_hz != 0.0 {
            let (a, b) = (&prod.sites[0], &prod.sites[1]);
            let jc = C64::new(system.nn_coupling_hz, 0.0);
            let zz = &a.z * &b.z;
            h += match system.nn_coupling_form {
                crate::spincore::CouplingForm::IsingZz => zz * jc,
                crate::spincore::CouplingForm::SecularDipolar => {
                    (zz - (&a.x * &b.x + &a.y * &b.y) * C64::new(0.5, 0.0)) * jc
                }
            };
        }
        let sites = (0..system.nuclei.len()).map(SiteKind::Nucleus).collect();
        Self::from_parts(
            system,
            field_tesla,
            orientation,
            frame,
            options,
            sites,
            &prod,
            h,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        system: &SpinSystem,
        field_tesla: f64,
        orientation: &Orientation,
        frame: FrameSpec,
        options: ContextOptions,
        sites: Vec<SiteKind>,
        prod: &ProductOperators,
        hamiltonian: CMat,
    ) -> Result<Self> {
        if let Some(m) = &options.relaxation {
            m.validate()?;
        }
        if let Some(s) = options.segment_s {
            if !(s > 0.0) {
                return Err(invalid("segment_s must be positive"));
            }
        }
        let d = prod.dim();
        // a tiny label-weighted Zeeman term picks product-like eigenvectors
        // inside degenerate subspaces; dynamics use the exact H below
        let scale = max_abs(&hamiltonian).max(1.0) * 1e-12;
        let mut tagged = hamiltonian.clone();
        for (s, ops) in prod.sites.iter().enumerate() {
            tagged += &ops.z * C64::new(scale * LABEL_WEIGHTS[s.min(5)], 0.0);
        }
        let eig = eigh(&tagged)?;
        let vectors = eig.vectors;
        let h_eig = {
            let m = vectors.adjoint() * &hamiltonian * &vectors;
            (&m + m.adjoint()) * C64::new(0.5, 0.0)
        };
        let energies: Vec<f64> = (0..d).map(|k| h_eig[(k, k)].re).collect();
        let z_eig: Vec<CMat> = prod
            .sites
            .iter()
            .map(|o| vectors.adjoint() * &o.z * &vectors)
            .collect();
        let x_eig: Vec<CMat> = prod
            .sites
            .iter()
            .map(|o| vectors.adjoint() * &o.x * &vectors)
            .collect();
        let labels: Vec<Label> = (0..d)
            .map(|k| {
                z_eig
                    .iter()
                    .map(|z| (2.0 * z[(k, k)].re).round() as i32)
                    .collect()
            })
            .collect();
        let basis = BasisTag {
            kind: BasisKind::Eigen,
            sites: sites.clone(),
            labels: Arc::new(labels),
        };
        let sigma: Vec<f64> = (0..sites.len())
            .map(|s| {
                let total: f64 = site_pairs(&basis.labels, s)
                    .iter()
                    .map(|&(k, l)| energies[k] - energies[l])
                    .sum();
                if total < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        let frame_diag: Vec<f64> = (0..d)
            .map(|k| {
                sites
                    .iter()
                    .enumerate()
                    .map(|(s, &kind)| {
                        sigma[s] * frame.frequency(kind) * basis.labels[k][s] as f64 / 2.0
                    })
                    .sum()
            })
            .collect();
        let mut h_free = h_eig.clone();
        for k in 0..d {
            h_free[(k, k)] -= C64::new(frame_diag[k], 0.0);
        }
        let free = eigh(&h_free)?;
        Ok(SpinContext {
            system: system.clone(),
            field_tesla,
            orientation: *orientation,
            frame,
            options,
            dims: prod.dims.clone(),
            hamiltonian,
            vectors,
            h_eig,
            energies,
            product_basis: BasisTag::product(sites.clone(), &prod.dims),
            basis,
            x_eig,
            sigma,
            frame_diag,
            free,
        })
    }

    /// Copy with a different rotating frame.
    pub fn with_frame(&self, frame: FrameSpec) -> Result<Self> {
        let prod = ProductOperators::new(&self.dims)?;
        Self::from_parts(
            &self.system,
            self.field_tesla,
            &self.orientation,
            frame,
            self.options.clone(),
            self.basis.sites.clone(),
            &prod,
            self.hamiltonian.clone(),
        )
    }

    pub fn with_options(&self, options: ContextOptions) -> Result<Self> {
        let mut c = self.clone();
        if let Some(m) = &options.relaxation {
            m.validate()?;
        }
        c.options = options;
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn basis(&self) -> &BasisTag {
        &self.basis
    }

    pub fn product_basis(&self) -> &BasisTag {
        &self.product_basis
    }

    pub fn labels(&self) -> &[Label] {
        &self.basis.labels
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Lab-frame static Hamiltonian in the product basis (Hz).
    pub fn hamiltonian(&self) -> &CMat {
        &self.hamiltonian
    }

    /// Columns are the eigenvectors in the product basis.
    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    pub fn sigma(&self, site: usize) -> f64 {
        self.sigma[site]
    }

    pub fn frame_energies(&self) -> &[f64] {
        &self.frame_diag
    }

    pub fn site_index(&self, kind: SiteKind) -> Option<usize> {
        self.basis.site_of(kind)
    }

    pub fn index_of(&self, label: &[i32]) -> Result<usize> {
        self.basis
            .index_of(label)
            .ok_or_else(|| invalid(format!("no eigenstate with label {label:?}")))
    }

    /// |E_a − E_b| for two labelled levels.
    pub fn transition_frequency(&self, a: &[i32], b: &[i32]) -> Result<f64> {
        Ok((self.energies[self.index_of(a)?] - self.energies[self.index_of(b)?]).abs())
    }

    /// Operator given in the lab product basis, expressed in the eigenbasis.
    pub fn to_eigen_operator(&self, op: &CMat) -> CMat {
        self.vectors.adjoint() * op * &self.vectors
    }

    /// Transverse (x) spin operator of a site in the eigenbasis.
    pub fn x_operator(&self, site: usize) -> &CMat {
        &self.x_eig[site]
    }

    fn frame_phase(&self, m: &mut CMat, t: f64, sign: f64) {
        if t == 0.0 {
            return;
        }
        let d = self.dim();
        for k in 0..d {
            for l in 0..d {
                if k != l {
                    let dphi = sign * 2.0 * PI * (self.frame_diag[k] - self.frame_diag[l]) * t;
                    m[(k, l)] *= C64::from_polar(1.0, dphi);
                }
            }
        }
    }

    /// Lab product basis → rotating-frame eigenbasis at the state's time.
    pub fn to_eigen(&self, st: &DensityState) -> Result<DensityState> {
        self.check_dim(st)?;
        match st.basis.kind {
            BasisKind::Eigen => Ok(st.clone()),
            BasisKind::Product => {
                let mut m = self.vectors.adjoint() * &st.matrix * &self.vectors;
                self.frame_phase(&mut m, st.time_s, 1.0);
                Ok(DensityState {
                    matrix: m,
                    basis: self.basis.clone(),
                    time_s: st.time_s,
                    triplet_fraction: st.triplet_fraction,
                })
            }
        }
    }

    pub fn to_product(&self, st: &DensityState) -> Result<DensityState> {
        self.check_dim(st)?;
        match st.basis.kind {
            BasisKind::Product => Ok(st.clone()),
            BasisKind::Eigen => {
                let mut m = st.matrix.clone();
                self.frame_phase(&mut m, st.time_s, -1.0);
                Ok(DensityState {
                    matrix: &self.vectors * m * self.vectors.adjoint(),
                    basis: self.product_basis.clone(),
                    time_s: st.time_s,
                    triplet_fraction: st.triplet_fraction,
                })
            }
        }
    }

    fn check_dim(&self, st: &DensityState) -> Result<()> {
        if st.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: st.dim(),
            });
        }
        Ok(())
    }

    /// Photo-excited state in the eigenbasis. Coherences between
    /// non-degenerate eigenstates are dropped: intersystem crossing is
    /// incoherent on the timescale of the level splittings.
    pub fn photoexcited(&self, time_s: f64) -> Result<DensityState> {
        if self.site_index(SiteKind::Electron).is_none() {
            return Err(invalid(
                "photo-excitation needs the electron in the context",
            ));
        }
        let lab = photoexcite(&self.system, &self.orientation, self.options.populations)?;
        let mut m = self.vectors.adjoint() * &lab.matrix * &self.vectors;
        let d = self.dim();
        for k in 0..d {
            for l in 0..d {
                if k != l && (self.energies[k] - self.energies[l]).abs() > 1.0 {
                    m[(k, l)] = C64::new(0.0, 0.0);
                }
            }
        }
        Ok(DensityState {
            matrix: m,
            basis: self.basis.clone(),
            time_s,
            triplet_fraction: 1.0,
        })
    }

    /// State from an eigenbasis matrix at time 0.
    pub fn state(&self, matrix: CMat) -> Result<DensityState> {
        DensityState::new(matrix, self.basis.clone())
    }

    /// Free-evolution propagator in the rotating frame.
    pub fn free_propagator(&self, t: f64) -> CMat {
        self.free.apply(|e| C64::from_polar(1.0, -2.0 * PI * e * t))
    }

    fn relax(&self, st: DensityState, dt: f64) -> Result<DensityState> {
        match &self.options.relaxation {
            Some(m) if dt > 0.0 => apply_relaxation(&st, m, dt),
            _ => Ok(st),
        }
    }

    fn segments(&self, duration: f64) -> usize {
        match self.options.segment_s {
            Some(s) if duration > s => (duration / s).ceil() as usize,
            _ => 1,
        }
    }

    /// Free evolution for `t` seconds with interleaved relaxation.
    pub fn evolve(&self, st: &DensityState, t: f64) -> Result<DensityState> {
        if !(t >= 0.0) {
            return Err(invalid(format!("evolution time must be ≥ 0, got {t}")));
        }
        let mut s = self.to_eigen(st)?;
        if t == 0.0 {
            return Ok(s);
        }
        let n = self.segments(t);
        let dt = t / n as f64;
        let u = self.free_propagator(dt);
        for _ in 0..n {
            s.matrix = conjugate(&u, &s.matrix);
            s.time_s += dt;
            s = self.relax(s, dt)?;
        }
        Ok(s)
    }

    fn drive_sites(&self, pulse: &PulseEvent) -> Result<Vec<usize>> {
        if let Some(PulseTarget::Nuclei(list)) = &pulse.target {
            let mut out = Vec::new();
            for n in list {
                let probe = PulseEvent {
                    target: Some(PulseTarget::Nucleus(*n)),
                    ..pulse.clone()
                };
                out.push(self.drive_site(&probe)?);
            }
            return Ok(out);
        }
        Ok(vec![self.drive_site(pulse)?])
    }

    fn drive_site(&self, pulse: &PulseEvent) -> Result<usize> {
        let by_target = match &pulse.target {
            Some(PulseTarget::Nuclei(_)) => {
                return Err(invalid("multi-nucleus target where one site is expected"))
            }
            Some(PulseTarget::Nucleus(n)) => Some(
                self.site_index(SiteKind::Nucleus(*n))
                    .ok_or_else(|| invalid(format!("nucleus {n} not in context")))?,
            ),
            Some(PulseTarget::Electron) => Some(
                self.site_index(SiteKind::Electron)
                    .ok_or_else(|| invalid("no electron in context"))?,
            ),
            Some(PulseTarget::Transition { lower, upper }) => {
                if lower.len() != self.basis.sites.len() {
                    return Err(invalid(format!(
                        "transition labels have {} entries, context has {} sites",
                        lower.len(),
                        self.basis.sites.len()
                    )));
                }
                lower.iter().zip(upper).position(|(a, b)| a != b)
            }
            None => None,
        };
        let site = match (pulse.channel, by_target) {
            (_, Some(s)) => s,
            (Channel::Microwave, None) => self
                .site_index(SiteKind::Electron)
                .ok_or_else(|| invalid("microwave pulse but no electron in context"))?,
            (Channel::Rf, None) => {
                // nearest frame frequency among the nuclei
                let carrier = pulse.carrier_hz;
                self.basis
                    .sites
                    .iter()
                    .enumerate()
                    .filter(|(_, k)| matches!(k, SiteKind::Nucleus(_)))
                    .min_by(|a, b| {
                        let da = (self.frame.frequency(*a.1) - carrier).abs();
                        let db = (self.frame.frequency(*b.1) - carrier).abs();
                        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .map(|(s, _)| s)
                    .ok_or_else(|| invalid("rf pulse but no nucleus in context"))?
            }
            _ => return Err(invalid("event does not drive a spin")),
        };
        let kind = self.basis.sites[site];
        match (pulse.channel, kind) {
            (Channel::Microwave, SiteKind::Electron) | (Channel::Rf, SiteKind::Nucleus(_)) => {
                Ok(site)
            }
            _ if pulse.mode == PulseMode::Virtual => Ok(site),
            _ => Err(invalid(format!(
                "{:?} channel cannot drive {:?}",
                pulse.channel, kind
            ))),
        }
    }

    /// (upper, lower) eigenstate pair of a transition target, ordered by the
    /// driven site's label.
    fn target_pair(&self, lower: &[i32], upper: &[i32], site: usize) -> Result<(usize, usize)> {
        let a = self.index_of(lower)?;
        let b = self.index_of(upper)?;
        let la = &self.basis.labels[a];
        let lb = &self.basis.labels[b];
        if (la[site] - lb[site]).abs() != 2 {
            return Err(invalid(
                "transition target must change 2m by ±2 on one site",
            ));
        }
        Ok(if lb[site] > la[site] { (b, a) } else { (a, b) })
    }

    fn pairs_for(&self, pulse: &PulseEvent, site: usize, all: bool) -> Result<Vec<(usize, usize)>> {
        match &pulse.target {
            Some(PulseTarget::Transition { lower, upper }) if !all => {
                Ok(vec![self.target_pair(lower, upper, site)?])
            }
            _ => Ok(site_pairs(&self.basis.labels, site)),
        }
    }

    fn carrier_offset(&self, pulse: &PulseEvent, site: usize) -> f64 {
        if pulse.carrier_hz == 0.0 {
            0.0
        } else {
            pulse.carrier_hz - self.frame.frequency(self.basis.sites[site])
        }
    }

    /// Unitary of one event starting at absolute time `t0`, acting on
    /// rotating-frame eigenbasis states. Laser events have no unitary.
    pub fn event_unitary(&self, pulse: &PulseEvent, t0: f64) -> Result<Option<CMat>> {
        pulse.validate()?;
        match (pulse.channel, pulse.mode) {
            (Channel::Laser, _) => Ok(None),
            (Channel::Delay, _) => Ok(Some(self.free_propagator(pulse.duration_s))),
            (_, PulseMode::Virtual) => Ok(Some(self.virtual_unitary(pulse)?)),
            (_, PulseMode::Ideal) => Ok(Some(self.ideal_unitary(pulse, t0)?)),
            (_, PulseMode::Finite) => {
                let segs = self.finite_segments(pulse, t0, 1)?;
                Ok(Some(segs.into_iter().next().expect("one segment")))
            }
        }
    }

    fn virtual_unitary(&self, pulse: &PulseEvent) -> Result<CMat> {
        let sites = self.drive_sites(pulse)?;
        let d = self.dim();
        let angle = pulse.phase_rad;
        Ok(CMat::from_diagonal(&nalgebra::DVector::from_fn(
            d,
            |k, _| {
                let m: f64 = sites
                    .iter()
                    .map(|&s| self.basis.labels[k][s] as f64 / 2.0)
                    .sum();
                C64::from_polar(1.0, -angle * m)
            },
        )))
    }

    fn ideal_unitary(&self, pulse: &PulseEvent, t0: f64) -> Result<CMat> {
        let d = self.dim();
        let mut g = CMat::zeros(d, d);
        for site in self.drive_sites(pulse)? {
            let phi = pulse.phase_rad + 2.0 * PI * self.carrier_offset(pulse, site) * t0;
            let sig = self.sigma[site];
            let x = &self.x_eig[site];
            for (k, l) in self.pairs_for(pulse, site, false)? {
                let dkl = x[(k, l)];
                if dkl.norm() < 1e-9 {
                    continue;
                }
                let u = dkl / dkl.norm();
                let w = C64::from_polar(0.5, -sig * phi) * u;
                g[(k, l)] += w;
                g[(l, k)] += w.conj();
            }
        }
        rotation(&g, pulse.flip_angle())
    }

    /// Propagators of `n` equal segments of a finite drive pulse.
    fn finite_segments(&self, pulse: &PulseEvent, t0: f64, n: usize) -> Result<Vec<CMat>> {
        let d = self.dim();
        let mut h = self.h_eig.clone();
        let mut delta = vec![0.0; d];
        for site in self.drive_sites(pulse)? {
            let x = &self.x_eig[site];
            let sig = self.sigma[site];
            let coupling = match &pulse.target {
                Some(PulseTarget::Transition { lower, upper }) => {
                    let (k, l) = self.target_pair(lower, upper, site)?;
                    let m = x[(k, l)].norm();
                    if m < 1e-9 {
                        return Err(Error::Numerical(
                            "target transition has no drive matrix element".into(),
                        ));
                    }
                    pulse.rabi_hz / (2.0 * m)
                }
                _ => {
                    let s = (self.dims[site] as f64 - 1.0) / 2.0;
                    pulse.rabi_hz / (2.0 * s).sqrt()
                }
            };
            let offset = self.carrier_offset(pulse, site);
            for (k, dk) in delta.iter_mut().enumerate() {
                *dk += sig * offset * self.basis.labels[k][site] as f64 / 2.0;
            }
            let phase = C64::from_polar(coupling, -sig * pulse.phase_rad);
            for (k, l) in site_pairs(&self.basis.labels, site) {
                let w = phase * x[(k, l)];
                h[(k, l)] += w;
                h[(l, k)] += w.conj();
            }
        }
        for k in 0..d {
            h[(k, k)] -= C64::new(self.frame_diag[k] + delta[k], 0.0);
        }
        let shifted = delta.iter().any(|&v| v != 0.0);
        let dt = pulse.duration_s / n as f64;
        let eig = eigh(&h)?;
        let u = eig.apply(|e| C64::from_polar(1.0, -2.0 * PI * e * dt));
        let p = |t: f64, sign: f64| {
            CMat::from_diagonal(&nalgebra::DVector::from_fn(d, |k, _| {
                C64::from_polar(1.0, sign * 2.0 * PI * delta[k] * t)
            }))
        };
        Ok((0..n)
            .map(|j| {
                if shifted {
                    let ta = t0 + j as f64 * dt;
                    p(ta + dt, -1.0) * &u * p(ta, 1.0)
                } else {
                    u.clone()
                }
            })
            .collect())
    }

    /// Applies one event, including relaxation over its duration.
    pub fn apply_pulse(&self, st: &DensityState, pulse: &PulseEvent) -> Result<DensityState> {
        pulse.validate()?;
        let s = self.to_eigen(st)?;
        match (pulse.channel, pulse.mode) {
            (Channel::Laser, _) => self.photoexcited(s.time_s),
            (Channel::Delay, _) => self.evolve(&s, pulse.duration_s),
            (_, PulseMode::Virtual) => {
                let u = self.virtual_unitary(pulse)?;
                Ok(s.with_matrix(conjugate(&u, &s.matrix)))
            }
            (_, PulseMode::Ideal) => {
                let u = self.ideal_unitary(pulse, s.time_s)?;
                let mut out = s.with_matrix(conjugate(&u, &s.matrix));
                out.time_s += pulse.duration_s;
                self.relax(out, pulse.duration_s)
            }
            (_, PulseMode::Finite) => {
                if pulse.duration_s == 0.0 {
                    return Ok(s);
                }
                let n = self.segments(pulse.duration_s);
                let dt = pulse.duration_s / n as f64;
                let mut out = s;
                for u in self.finite_segments(pulse, out.time_s, n)? {
                    out.matrix = conjugate(&u, &out.matrix);
                    out.time_s += dt;
                    out = self.relax(out, dt)?;
                }
                Ok(out)
            }
        }
    }

    pub fn run(&self, st: &DensityState, seq: &PulseSequence) -> Result<DensityState> {
        let mut s = self.to_eigen(st)?;
        for e in &seq.events {
            s = self.apply_pulse(&s, e)?;
        }
        Ok(s)
    }

    /// Product of event unitaries (relaxation ignored) starting at `t0`.
    pub fn sequence_unitary(&self, seq: &PulseSequence, t0: f64) -> Result<CMat> {
        let mut u = CMat::identity(self.dim(), self.dim());
        let mut t = t0;
        for e in &seq.events {
            let ue = self
                .event_unitary(e, t)?
                .ok_or_else(|| invalid("laser events have no unitary"))?;
            u = ue * u;
            if e.mode != PulseMode::Virtual {
                t += e.duration_s;
            }
        }
        Ok(u)
    }

    /// Drive pulse on the transition between two labelled levels, with the
    /// carrier set to its frequency.
    pub fn resonant_pulse(
        &self,
        channel: Channel,
        lower: &[i32],
        upper: &[i32],
        rabi_hz: f64,
        duration_s: f64,
        phase_rad: f64,
    ) -> Result<PulseEvent> {
        let carrier = self.transition_frequency(lower, upper)?;
        Ok(PulseEvent {
            channel,
            carrier_hz: carrier,
            phase_rad,
            duration_s,
            rabi_hz,
            target: Some(PulseTarget::Transition {
                lower: lower.to_vec(),
                upper: upper.to_vec(),
            }),
            mode: PulseMode::Finite,
        })
    }
}

/// First-order nuclear transition frequency |−γB + m_S·A_zz| in the electron
/// manifold m_S (no nuclear–nuclear coupling).
pub fn nuclear_frequency(
    system: &SpinSystem,
    field_tesla: f64,
    orientation: &Orientation,
    electron_ms: i32,
    nucleus: usize,
) -> f64 {
    let nuc = &system.nuclei[nucleus];
    let a_zz = orientation.rotate_tensor(&nuc.hyperfine_tensor_hz)[(2, 2)];
    (-nuc.gyromagnetic_ratio_hz_per_t * field_tesla + electron_ms as f64 * a_zz).abs()
}

/// (upper, lower) pairs where one site's 2m differs by exactly +2 and all
/// other labels agree.
pub fn site_pairs(labels: &[Label], site: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (k, lk) in labels.iter().enumerate() {
        for (l, ll) in labels.iter().enumerate() {
            if lk[site] - ll[site] == 2
                && lk
                    .iter()
                    .zip(ll)
                    .enumerate()
                    .all(|(s, (a, b))| s == site || a == b)
            {
                out.push((k, l));
            }
        }
    }
    out
}

/// Free-standing form of [`SpinContext::apply_pulse`].
pub fn apply_pulse(
    st: &DensityState,
    pulse: &PulseEvent,
    ctx: &SpinContext,
) -> Result<DensityState> {
    ctx.apply_pulse(st, pulse)
}
