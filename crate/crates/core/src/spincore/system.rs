use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::constants::{GAMMA_1H_HZ_PER_T, GAMMA_31P_HZ_PER_T, G_FREE_ELECTRON};
use crate::error::{invalid, Error, Result};

/// Operator form multiplying the nuclear–nuclear coupling constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplingForm {
    /// J·I1z·I2z
    #[default]
    IsingZz,
    /// J·(I1z·I2z − (I1x·I2x + I1y·I2y)/2); its heteronuclear secular part is the Ising term.
    SecularDipolar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NucleusSpec {
    pub label: String,
    pub spin: f64,
    pub gyromagnetic_ratio_hz_per_t: f64,
    pub hyperfine_tensor_hz: Matrix3<f64>,
}

impl NucleusSpec {
    pub fn isotropic(label: &str, spin: f64, gamma: f64, a_iso_hz: f64) -> Self {
        NucleusSpec {
            label: label.to_string(),
            spin,
            gyromagnetic_ratio_hz_per_t: gamma,
            hyperfine_tensor_hz: Matrix3::identity() * a_iso_hz,
        }
    }

    pub fn a_iso_hz(&self) -> f64 {
        self.hyperfine_tensor_hz.trace() / 3.0
    }

    pub fn multiplicity(&self) -> usize {
        (2.0 * self.spin).round() as usize + 1
    }
}

/// Static description of a triplet electron coupled to a few nuclei.
///
/// Tensors are given in the molecular frame; all couplings in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystem {
    pub electron_spin: f64,
    pub g_tensor: Matrix3<f64>,
    pub zfs_tensor_hz: Matrix3<f64>,
    pub nuclei: Vec<NucleusSpec>,
    pub nn_coupling_hz: f64,
    pub nn_coupling_form: CouplingForm,
}

pub const FULLERENE_DXX_HZ: f64 = 52.13e6;
pub const FULLERENE_DYY_HZ: f64 = 159.53e6;
pub const FULLERENE_DZZ_HZ: f64 = -211.66e6;
pub const FULLERENE_A_1H_HZ: f64 = 6.0e6;
pub const FULLERENE_A_31P_HZ: f64 = 11.0e6;
pub const FULLERENE_J_HZ: f64 = 3.0e3;
pub const LIQUID_J_HZ: f64 = 30.0;

impl Default for SpinSystem {
    fn default() -> Self {
        Self::fullerene()
    }
}

impl SpinSystem {
    /// The fullerene triplet with one 1H and one 31P: isotropic g, ZFS principal
    /// values (52.13, 159.53, −211.66) MHz, isotropic hyperfine couplings of 6 and
    /// 11 MHz, 3 kHz Ising coupling.
    pub fn fullerene() -> Self {
        SpinSystem {
            electron_spin: 1.0,
            g_tensor: Matrix3::identity() * G_FREE_ELECTRON,
            zfs_tensor_hz: Matrix3::from_diagonal(&nalgebra::Vector3::new(
                FULLERENE_DXX_HZ,
                FULLERENE_DYY_HZ,
                FULLERENE_DZZ_HZ,
            )),
            nuclei: vec![
                NucleusSpec::isotropic("1H", 0.5, GAMMA_1H_HZ_PER_T, FULLERENE_A_1H_HZ),
                NucleusSpec::isotropic("31P", 0.5, GAMMA_31P_HZ_PER_T, FULLERENE_A_31P_HZ),
            ],
            nn_coupling_hz: FULLERENE_J_HZ,
            nn_coupling_form: CouplingForm::IsingZz,
        }
    }

    /// Copy with ZFS principal values (d_xx, d_yy) and d_zz = −(d_xx + d_yy).
    pub fn with_zfs_principal(&self, dxx: f64, dyy: f64) -> Self {
        let mut s = self.clone();
        s.zfs_tensor_hz = Matrix3::from_diagonal(&nalgebra::Vector3::new(dxx, dyy, -(dxx + dyy)));
        s
    }

    /// Copy with the nuclei removed (electron-only 3-level system).
    pub fn electron_only(&self) -> Self {
        let mut s = self.clone();
        s.nuclei.clear();
        s
    }

    pub fn electron_multiplicity(&self) -> usize {
        (2.0 * self.electron_spin).round() as usize + 1
    }

    /// Local dimensions, electron first then nuclei in order.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.electron_multiplicity())
            .chain(self.nuclei.iter().map(|n| n.multiplicity()))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn nuclear_dim(&self) -> usize {
        self.nuclei.iter().map(|n| n.multiplicity()).product()
    }

    pub fn nucleus_index(&self, label: &str) -> Option<usize> {
        self.nuclei.iter().position(|n| n.label == label)
    }

    /// Checks the structural invariants; returns every violation found.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if (self.electron_spin - 1.0).abs() > 1e-12 {
            out.push(format!(
                "electron_spin must be 1, got {}",
                self.electron_spin
            ));
        }
        check_symmetric("g_tensor", &self.g_tensor, &mut out);
        check_symmetric("zfs_tensor_hz", &self.zfs_tensor_hz, &mut out);
        let principal = self
            .zfs_tensor_hz
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        if self.zfs_tensor_hz.trace().abs() > 1e-6 * principal.max(f64::MIN_POSITIVE) {
            out.push(format!(
                "zfs_tensor_hz must be traceless, trace = {:e} Hz",
                self.zfs_tensor_hz.trace()
            ));
        }
        for (k, n) in self.nuclei.iter().enumerate() {
            let twice = 2.0 * n.spin;
            if n.spin < 0.5 || (twice - twice.round()).abs() > 1e-12 {
                out.push(format!("nuclei[{k}].spin must be a positive half-integer"));
            }
            if !n.gyromagnetic_ratio_hz_per_t.is_finite() {
                out.push(format!(
                    "nuclei[{k}].gyromagnetic_ratio_hz_per_t must be finite"
                ));
            }
            check_symmetric(
                &format!("nuclei[{k}].hyperfine_tensor_hz"),
                &n.hyperfine_tensor_hz,
                &mut out,
            );
        }
        if self.nuclei.len() > 4 {
            out.push(format!(
                "at most 4 nuclei supported, got {}",
                self.nuclei.len()
            ));
        }
        if !self.nn_coupling_hz.is_finite() {
            out.push("nn_coupling_hz must be finite".into());
        }
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

    /// Stable content hash (hex), used to tag outputs.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let doc = serde_json::to_string(&SpinSystemDoc::from(self.clone())).unwrap_or_default();
        let digest = Sha256::digest(doc.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpinSystemDoc = serde_json::from_str(text)?;
        let sys = SpinSystem::try_from(doc)?;
        Ok(sys)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SpinSystemDoc::from(self.clone()))
            .expect("spin system serialises")
    }
}

fn check_symmetric(name: &str, m: &Matrix3<f64>, out: &mut Vec<String>) {
    if m.iter().any(|v| !v.is_finite()) {
        out.push(format!("{name} has non-finite entries"));
        return;
    }
    let scale = m.amax();
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) && asym > 0.0 {
        out.push(format!("{name} must be symmetric (max asymmetry {asym:e})"));
    }
}

/// JSON document layout: tensors are row-major 9-element arrays; field names
/// carry their units.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSystemDoc {
    #[serde(default = "one")]
    pub electron_spin: f64,
    pub g_tensor: [f64; 9],
    pub zfs_tensor_hz: [f64; 9],
    pub nuclei: Vec<NucleusDoc>,
    #[serde(default)]
    pub nn_coupling_hz: f64,
    #[serde(default)]
    pub nn_coupling_form: CouplingForm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NucleusDoc {
    pub label: String,
    #[serde(default = "half")]
    pub spin: f64,
    pub gyromagnetic_ratio_hz_per_t: f64,
    pub hyperfine_tensor_hz: [f64; 9],
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn to_rows(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = m[(i, j)];
        }
    }
    out
}

fn from_rows(v: &[f64; 9]) -> Matrix3<f64> {
    Matrix3::from_row_slice(v)
}

impl From<SpinSystem> for SpinSystemDoc {
    fn from(s: SpinSystem) -> Self {
        SpinSystemDoc {
            electron_spin: s.electron_spin,
            g_tensor: to_rows(&s.g_tensor),
            zfs_tensor_hz: to_rows(&s.zfs_tensor_hz),
            nuclei: s
                .nuclei
                .iter()
                .map(|n| NucleusDoc {
                    label: n.label.clone(),
                    spin: n.spin,
                    gyromagnetic_ratio_hz_per_t: n.gyromagnetic_ratio_hz_per_t,
                    hyperfine_tensor_hz: to_rows(&n.hyperfine_tensor_hz),
                })
                .collect(),
            nn_coupling_hz: s.nn_coupling_hz,
            nn_coupling_form: s.nn_coupling_form,
        }
    }
}

impl TryFrom<SpinSystemDoc> for SpinSystem {
    type Error = Error;

    fn try_from(d: SpinSystemDoc) -> Result<Self> {
        let sys = SpinSystem {
            electron_spin: d.electron_spin,
            g_tensor: from_rows(&d.g_tensor),
            zfs_tensor_hz: from_rows(&d.zfs_tensor_hz),
            nuclei: d
                .nuclei
                .iter()
                .map(|n| NucleusSpec {
                    label: n.label.clone(),
                    spin: n.spin,
                    gyromagnetic_ratio_hz_per_t: n.gyromagnetic_ratio_hz_per_t,
                    hyperfine_tensor_hz: from_rows(&n.hyperfine_tensor_hz),
                })
                .collect(),
            nn_coupling_hz: d.nn_coupling_hz,
            nn_coupling_form: d.nn_coupling_form,
        };
        sys.validate()?;
        Ok(sys)
    }
}

impl Serialize for SpinSystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpinSystemDoc::from(self.clone()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpinSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = SpinSystemDoc::deserialize(d)?;
        SpinSystem::try_from(doc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fullerene_system_is_valid_and_traceless() {
        let s = SpinSystem::fullerene();
        assert!(s.violations().is_empty());
        assert_eq!(FULLERENE_DXX_HZ + FULLERENE_DYY_HZ + FULLERENE_DZZ_HZ, 0.0);
        assert_eq!(s.dim(), 12);
        assert_eq!(s.dims(), vec![3, 2, 2]);
        assert!((s.nuclei[0].a_iso_hz() - 6.0e6).abs() < 1e-6);
    }

    #[test]
    fn json_roundtrip() {
        let s = SpinSystem::fullerene();
        let back = SpinSystem::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.fingerprint(), back.fingerprint());
    }

    #[test]
    fn asymmetric_tensor_rejected() {
        let mut s = SpinSystem::fullerene();
        s.zfs_tensor_hz[(0, 1)] = 1.0e6;
        let v = s.violations();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].contains("zfs_tensor_hz"));
        assert!(SpinSystem::from_json(&s.to_json()).is_err());
    }

    #[test]
    fn traced_zfs_rejected() {
        let mut s = SpinSystem::fullerene();
        s.zfs_tensor_hz[(2, 2)] += 1.0e6;
        assert!(s.validate().is_err());
    }
}
