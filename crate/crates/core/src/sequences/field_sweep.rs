use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trace::TraceResult;
use crate::dynamics::{photoexcite, RelaxationModel, DEFAULT_POPULATIONS};
use crate::error::{invalid, Result};
use crate::powder::{lorentzian, PowderGrid};
use crate::spincore::{
    build_hamiltonian_with, eigensystem_of, lab_z, Orientation, SpinSystem, SystemOperators,
};

pub const DEFAULT_MW_HZ: f64 = 9.7e9;

/// Triplet sublevel populations feeding the echo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    /// Intersystem-crossing populations of the zero-field ZFS sublevels
    /// (x, y, z), projected onto the high-field eigenstates.
    ZeroFieldIsc([f64; 3]),
    /// Populations of the high-field levels m_S = (+1, 0, −1). Useful when
    /// the ZFS vanishes and zero-field sublevels are undefined.
    HighField([f64; 3]),
}

impl Default for Polarization {
    fn default() -> Self {
        Polarization::ZeroFieldIsc(DEFAULT_POPULATIONS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSweepSettings {
    pub mw_hz: f64,
    /// Lorentzian half width of each electron line (Hz).
    pub linewidth_hz: f64,
    pub polarization: Polarization,
    /// Drop the nuclei (hyperfine structure lies well inside the linewidth).
    pub electron_only: bool,
    /// τ of the π/2–τ–π echo; only matters with relaxation.
    pub echo_delay_s: f64,
    pub relaxation: Option<RelaxationModel>,
}

impl Default for FieldSweepSettings {
    fn default() -> Self {
        FieldSweepSettings {
            mw_hz: DEFAULT_MW_HZ,
            linewidth_hz: 8e6,
            polarization: Polarization::default(),
            electron_only: true,
            echo_delay_s: 400e-9,
            relaxation: None,
        }
    }
}

/// Echo amplitude of one orientation at one field: every electron
/// transition contributes its population difference times its transverse
/// transition moment, weighted by a Lorentzian in its detuning from the
/// microwave frequency.
pub fn orientation_echo(
    ops: &SystemOperators,
    system: &SpinSystem,
    field_tesla: f64,
    orientation: &Orientation,
    settings: &FieldSweepSettings,
) -> Result<f64> {
    let h = build_hamiltonian_with(ops, system, lab_z(field_tesla), orientation)?;
    let eig = eigensystem_of(&h.matrix)?;
    let v = &eig.vectors;
    let e = ops.electron();
    let sx = v.adjoint() * &e.x * v;
    let sy = v.adjoint() * &e.y * v;
    let sz = v.adjoint() * &e.z * v;
    let d = eig.values.len();
    let n_nuc = (d / system.electron_multiplicity()) as f64;
    let pops: Vec<f64> = match settings.polarization {
        Polarization::ZeroFieldIsc(p) => {
            let lab = photoexcite(system, orientation, p)?;
            let rho = v.adjoint() * &lab.matrix * v;
            (0..d).map(|k| rho[(k, k)].re).collect()
        }
        Polarization::HighField(p) => (0..d)
            .map(|k| {
                let m = sz[(k, k)].re.round() as i32;
                let pm = match m {
                    1 => p[0],
                    0 => p[1],
                    _ => p[2],
                };
                pm / n_nuc
            })
            .collect(),
    };
    let mut total = 0.0;
    for a in 0..d {
        for b in (a + 1)..d {
            let nu = eig.values[b] - eig.values[a];
            if nu < 1e8 {
                continue;
            }
            let moment = sx[(a, b)].norm_sqr() + sy[(a, b)].norm_sqr();
            if moment < 1e-8 {
                continue;
            }
            total += (pops[a] - pops[b])
                * moment
                * lorentzian(nu - settings.mw_hz, settings.linewidth_hz);
        }
    }
    Ok(total)
}

/// Echo-detected field sweep over a powder grid.
pub fn echo_field_sweep(
    system: &SpinSystem,
    fields: &[f64],
    grid: &PowderGrid,
    settings: &FieldSweepSettings,
) -> Result<TraceResult> {
    if fields.len() < 2 || fields.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(
            "field axis must be increasing with at least two points",
        ));
    }
    if !(settings.linewidth_hz > 0.0 && settings.mw_hz > 0.0) {
        return Err(invalid(
            "linewidth and microwave frequency must be positive",
        ));
    }
    if let Some(m) = &settings.relaxation {
        m.validate()?;
    }
    let sys = if settings.electron_only {
        system.electron_only()
    } else {
        system.clone()
    };
    let ops = SystemOperators::new(&sys)?;
    let per_orientation: Vec<Result<Vec<f64>>> = grid
        .orientations
        .par_iter()
        .map(|o| {
            fields
                .iter()
                .map(|&b| orientation_echo(&ops, &sys, b, o, settings).map(|v| v * o.weight))
                .collect()
        })
        .collect();
    let mut signal = vec![0.0; fields.len()];
    for row in per_orientation {
        for (s, v) in signal.iter_mut().zip(row?) {
            *s += v;
        }
    }
    if let Some(m) = &settings.relaxation {
        let t = 2.0 * settings.echo_delay_s;
        let mut f = m
            .triplet_lifetime_s
            .map(|tl| (-t / tl).exp())
            .unwrap_or(1.0);
        f *= m.t2_electron_s.map(|t2| (-t / t2).exp()).unwrap_or(1.0);
        for s in &mut signal {
            *s *= f;
        }
    }
    Ok(TraceResult::new(
        "echo_field_sweep",
        "field_T",
        fields.to_vec(),
        "echo",
        signal,
    )
    .with_meta("system", system.fingerprint())
    .with_meta(
        "grid",
        format!("{:?}/{}", grid.scheme, grid.n_polar).to_lowercase(),
    )
    .with_meta("orientations", grid.len())
    .with_meta("mw_hz", settings.mw_hz)
    .with_meta("linewidth_hz", settings.linewidth_hz)
    .with_meta("polarization", format!("{:?}", settings.polarization))
    .with_meta("electron_only", settings.electron_only)
    .with_meta(
        "relaxation",
        if settings.relaxation.is_some() {
            "on"
        } else {
            "off"
        },
    ))
}

/// Fields in `[lo, hi]` where an electron transition of one orientation
/// matches `mw_hz`, found by bracketing on a scan and bisection.
pub fn resonance_fields(
    system: &SpinSystem,
    orientation: &Orientation,
    mw_hz: f64,
    lo: f64,
    hi: f64,
) -> Result<Vec<f64>> {
    let sys = system.electron_only();
    let ops = SystemOperators::new(&sys)?;
    // detunings of the two Δm = ±1 branches, ordered by m of the lower level
    let detunings = |b: f64| -> Result<Vec<f64>> {
        let h = build_hamiltonian_with(&ops, &sys, lab_z(b), orientation)?;
        let eig = eigensystem_of(&h.matrix)?;
        let sz = eig.vectors.adjoint() * &ops.electron().z * &eig.vectors;
        let mut levels: Vec<(f64, f64)> = (0..eig.values.len())
            .map(|k| (sz[(k, k)].re, eig.values[k]))
            .collect();
        levels.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        Ok(levels
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).abs() - mw_hz)
            .collect())
    };
    let n = 200;
    let mut out = Vec::new();
    let mut prev = detunings(lo)?;
    let mut b_prev = lo;
    for i in 1..=n {
        let b = lo + (hi - lo) * i as f64 / n as f64;
        let cur = detunings(b)?;
        for branch in 0..cur.len() {
            if prev[branch].signum() != cur[branch].signum() {
                let (mut a, mut c) = (b_prev, b);
                let fa = prev[branch];
                for _ in 0..60 {
                    let mid = 0.5 * (a + c);
                    let fm = detunings(mid)?[branch];
                    if fm.signum() == fa.signum() {
                        a = mid;
                    } else {
                        c = mid;
                    }
                }
                out.push(0.5 * (a + c));
            }
        }
        prev = cur;
        b_prev = b;
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Resonance fields of the three canonical orientations (field along the
/// molecular x, y and z axes), sorted: the turning points of the powder
/// pattern.
pub fn canonical_fields(system: &SpinSystem, mw_hz: f64, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for axis in 0..3 {
        out.extend(resonance_fields(
            system,
            &Orientation::along_axis(axis),
            mw_hz,
            lo,
            hi,
        )?);
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Field of the isotropic resonance h·ν/(g·μB) for the trace of g.
pub fn isotropic_resonance_field(system: &SpinSystem, mw_hz: f64) -> f64 {
    let g = system.g_tensor.trace() / 3.0;
    mw_hz / (g * crate::constants::BOHR_MAGNETON_HZ_PER_T)
}
