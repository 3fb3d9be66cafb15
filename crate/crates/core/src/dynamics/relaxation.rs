use serde::{Deserialize, Serialize};

use super::state::{DensityState, SiteKind};
use crate::error::{invalid, Result};
use crate::linalg::C64;

/// Phenomenological lifetimes; `None` disables a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationModel {
    pub triplet_lifetime_s: Option<f64>,
    /// Per nucleus, in the order of `SpinSystem::nuclei`.
    pub t2_nuclear_s: Vec<Option<f64>>,
    pub t2_dqc_s: Option<f64>,
    pub t2_zqc_s: Option<f64>,
    pub t2_electron_s: Option<f64>,
}

impl Default for RelaxationModel {
    fn default() -> Self {
        RelaxationModel {
            triplet_lifetime_s: Some(0.5e-3),
            t2_nuclear_s: vec![Some(0.20e-3), Some(1.9e-3)],
            t2_dqc_s: Some(100e-6),
            t2_zqc_s: Some(200e-6),
            t2_electron_s: None,
        }
    }
}

impl RelaxationModel {
    /// Every channel disabled.
    pub fn none() -> Self {
        RelaxationModel {
            triplet_lifetime_s: None,
            t2_nuclear_s: Vec::new(),
            t2_dqc_s: None,
            t2_zqc_s: None,
            t2_electron_s: None,
        }
    }

    /// Only triplet recombination; all coherences kept.
    pub fn triplet_only() -> Self {
        RelaxationModel {
            triplet_lifetime_s: Some(0.5e-3),
            ..Self::none()
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: String, v: Option<f64>| {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    out.push(format!("{name} must be positive, got {x}"));
                }
            }
        };
        check("triplet_lifetime_s".into(), self.triplet_lifetime_s);
        for (k, v) in self.t2_nuclear_s.iter().enumerate() {
            check(format!("t2_nuclear_s[{k}]"), *v);
        }
        check("t2_dqc_s".into(), self.t2_dqc_s);
        check("t2_zqc_s".into(), self.t2_zqc_s);
        check("t2_electron_s".into(), self.t2_electron_s);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(invalid(v.join("; ")))
        }
    }

    fn nuclear_rate(&self, n: usize) -> f64 {
        rate(self.t2_nuclear_s.get(n).copied().flatten())
    }

    /// Decay rate (1/s) of the coherence between two labelled levels.
    ///
    /// The electron part adds 1/T2e. On the nuclear side a single flipped
    /// nucleus uses its own T2, two nuclei flipped in the same direction use
    /// the double-quantum lifetime and in opposite directions the
    /// zero-quantum lifetime; more than two flips add their single rates.
    pub fn coherence_rate(&self, sites: &[SiteKind], a: &[i32], b: &[i32]) -> f64 {
        let mut total = 0.0;
        let mut flips: Vec<(usize, i32)> = Vec::new();
        for (k, site) in sites.iter().enumerate() {
            let d = a[k] - b[k];
            if d == 0 {
                continue;
            }
            match site {
                SiteKind::Electron => total += rate(self.t2_electron_s),
                SiteKind::Nucleus(n) => flips.push((*n, d.signum())),
            }
        }
        total += match flips.as_slice() {
            [] => 0.0,
            [(n, _)] => self.nuclear_rate(*n),
            [(_, s1), (_, s2)] => {
                if s1 == s2 {
                    rate(self.t2_dqc_s)
                } else {
                    rate(self.t2_zqc_s)
                }
            }
            many => many.iter().map(|(n, _)| self.nuclear_rate(*n)).sum(),
        };
        total
    }
}

fn rate(t: Option<f64>) -> f64 {
    t.map(|x| 1.0 / x).unwrap_or(0.0)
}

/// Damps coherences by class and multiplies the surviving triplet fraction.
///
/// Uses the labels carried by the state's basis tag; the clock is not moved.
pub fn apply_relaxation(
    state: &DensityState,
    model: &RelaxationModel,
    t: f64,
) -> Result<DensityState> {
    if !(t >= 0.0) {
        return Err(invalid(format!("relaxation time must be ≥ 0, got {t}")));
    }
    let mut out = state.clone();
    if t == 0.0 {
        return Ok(out);
    }
    let labels = &state.basis.labels;
    let n = state.dim();
    for i in 0..n {
        for j in (i + 1)..n {
            let r = model.coherence_rate(&state.basis.sites, &labels[i], &labels[j]);
            if r > 0.0 {
                let f = C64::new((-t * r).exp(), 0.0);
                out.matrix[(i, j)] *= f;
                out.matrix[(j, i)] *= f;
            }
        }
    }
    if let Some(tau) = model.triplet_lifetime_s {
        out.triplet_fraction *= (-t / tau).exp();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::state::BasisTag;

    fn nuclear_basis() -> BasisTag {
        BasisTag::product(vec![SiteKind::Nucleus(0), SiteKind::Nucleus(1)], &[2, 2])
    }

    fn uniform_state() -> DensityState {
        let psi = vec![C64::new(0.5, 0.0); 4];
        DensityState::pure(&psi, nuclear_basis()).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let s = uniform_state();
        let r = apply_relaxation(&s, &RelaxationModel::default(), 0.0).unwrap();
        assert_eq!(r.matrix, s.matrix);
        assert_eq!(r.triplet_fraction, 1.0);
    }

    #[test]
    fn proton_coherence_one_t2() {
        let s = uniform_state();
        let r = apply_relaxation(&s, &RelaxationModel::default(), 0.20e-3).unwrap();
        // |↑↑⟩ (idx 0) and |↓↑⟩ (idx 2) differ only in the proton
        let ratio = r.matrix[(0, 2)].norm() / s.matrix[(0, 2)].norm();
        assert!((ratio - (-1.0f64).exp()).abs() < 1e-12);
        // diagonal untouched
        for k in 0..4 {
            assert_eq!(r.matrix[(k, k)], s.matrix[(k, k)]);
        }
        assert!((r.triplet_fraction - (-0.4f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn dqc_and_zqc_classes() {
        let m = RelaxationModel::default();
        let sites = [SiteKind::Nucleus(0), SiteKind::Nucleus(1)];
        assert_eq!(m.coherence_rate(&sites, &[1, 1], &[-1, -1]), 1.0 / 100e-6);
        assert_eq!(m.coherence_rate(&sites, &[1, -1], &[-1, 1]), 1.0 / 200e-6);
        assert_eq!(m.coherence_rate(&sites, &[1, -1], &[1, 1]), 1.0 / 1.9e-3);
    }

    #[test]
    fn negative_lifetime_named() {
        let mut m = RelaxationModel::default();
        m.triplet_lifetime_s = Some(-1.0);
        let v = m.violations();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("triplet_lifetime_s"));
    }
}
