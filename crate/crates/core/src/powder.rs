//! Orientation grids for powder averages and orientation selection.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spincore::{
    build_hamiltonian_with, eigensystem_of, lab_z, transitions_from, Orientation, SpinSystem,
    SystemOperators,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    /// Polar bands of equal width, 2i+1 azimuths in band i, weights = band
    /// area shared equally.
    #[default]
    EqualArea,
    /// n² points on a Fibonacci spiral over the upper hemisphere, equal weights.
    GoldenSpiral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowderGrid {
    pub orientations: Vec<Orientation>,
    pub scheme: GridScheme,
    pub n_polar: usize,
}

/// Default selection width for 220 ns π pulses: 1/(π·220 ns) ≈ 1.45 MHz.
pub const DEFAULT_SELECTION_WIDTH_HZ: f64 = 1.0 / (PI * 220e-9);

impl PowderGrid {
    pub fn len(&self) -> usize {
        self.orientations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orientations.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.orientations.iter().map(|o| o.weight).sum()
    }

    /// Weighted average of a per-orientation quantity. Values are computed
    /// in parallel and summed in grid order, so the result is reproducible.
    pub fn average<F>(&self, f: F) -> f64
    where
        F: Fn(&Orientation) -> f64 + Sync,
    {
        let vals: Vec<f64> = self
            .orientations
            .par_iter()
            .map(|o| o.weight * f(o))
            .collect();
        vals.iter().sum()
    }

    fn renormalized(mut self) -> Self {
        let total = self.total_weight();
        if total > 0.0 {
            for o in &mut self.orientations {
                o.weight /= total;
            }
        }
        self
    }
}

/// Deterministic grid over the upper hemisphere (spectra are inversion
/// symmetric).
pub fn powder_grid(n_polar: usize, scheme: GridScheme) -> Result<PowderGrid> {
    if n_polar == 0 {
        return Err(invalid("n_polar must be at least 1"));
    }
    let mut orientations = Vec::new();
    match scheme {
        GridScheme::EqualArea => {
            let dtheta = (PI / 2.0) / n_polar as f64;
            for i in 0..n_polar {
                let lo = i as f64 * dtheta;
                let hi = lo + dtheta;
                let theta = lo + 0.5 * dtheta;
                let band = lo.cos() - hi.cos();
                let n_phi = 2 * i + 1;
                for j in 0..n_phi {
                    let phi = (j as f64 + 0.5) * 2.0 * PI / n_phi as f64;
                    orientations.push(
                        Orientation::from_field_direction(theta, phi)
                            .with_weight(band / n_phi as f64),
                    );
                }
            }
        }
        GridScheme::GoldenSpiral => {
            let n = n_polar * n_polar;
            let golden = PI * (3.0 - 5f64.sqrt());
            for k in 0..n {
                let z = 1.0 - (k as f64 + 0.5) / n as f64;
                let phi = (k as f64 * golden) % (2.0 * PI);
                orientations.push(
                    Orientation::from_field_direction(z.acos(), phi).with_weight(1.0 / n as f64),
                );
            }
        }
    }
    Ok(PowderGrid {
        orientations,
        scheme,
        n_polar,
    }
    .renormalized())
}

/// Peak-normalised Lorentzian 1/(1 + (Δ/w)²).
pub fn lorentzian(delta: f64, width: f64) -> f64 {
    if width.is_infinite() {
        1.0
    } else {
        1.0 / (1.0 + (delta / width).powi(2))
    }
}

/// Electron transitions (frequency, intensity) of one orientation at a field.
pub fn electron_transitions(
    ops: &SystemOperators,
    system: &SpinSystem,
    field_tesla: f64,
    orientation: &Orientation,
) -> Result<Vec<(f64, f64)>> {
    let h = build_hamiltonian_with(ops, system, lab_z(field_tesla), orientation)?;
    let eig = eigensystem_of(&h.matrix)?;
    let trs = transitions_from(&eig, &ops.electron().x, 1e-4)?;
    Ok(trs
        .into_iter()
        // the nuclear-only transitions sit far below any microwave band
        .filter(|t| t.frequency_hz > 1e8)
        .map(|t| (t.frequency_hz, t.intensity))
        .collect())
}

/// Keeps orientations with an electron transition within `linewidth_hz` of
/// the microwave frequency, reweighted by intensity × Lorentzian detuning
/// and renormalised. An empty grid is a valid result.
pub fn orientation_selection(
    system: &SpinSystem,
    field_tesla: f64,
    mw_hz: f64,
    linewidth_hz: f64,
    grid: &PowderGrid,
) -> Result<PowderGrid> {
    if !(linewidth_hz > 0.0) {
        return Err(invalid("selection linewidth must be positive"));
    }
    let ops = SystemOperators::new(system)?;
    let scores: Vec<Result<Option<f64>>> = grid
        .orientations
        .par_iter()
        .map(|o| {
            let trs = electron_transitions(&ops, system, field_tesla, o)?;
            let mut score = 0.0;
            let mut hit = false;
            for (nu, intensity) in trs {
                let d = nu - mw_hz;
                if d.abs() <= linewidth_hz {
                    hit = true;
                    score += intensity * lorentzian(d, linewidth_hz);
                }
            }
            Ok(if hit { Some(score) } else { None })
        })
        .collect();
    let mut kept = Vec::new();
    for (o, s) in grid.orientations.iter().zip(scores) {
        if let Some(score) = s? {
            kept.push(o.with_weight(o.weight * score));
        }
    }
    Ok(PowderGrid {
        orientations: kept,
        scheme: grid.scheme,
        n_polar: grid.n_polar,
    }
    .renormalized())
}
