use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{eigh, hermiticity_error, trace, CMat, C64};

/// Twice the magnetic quantum number of each site, electron first.
pub type Label = Vec<i32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    Electron,
    /// Index into `SpinSystem::nuclei`.
    Nucleus(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Lab-frame Zeeman product basis (descending m per site).
    Product,
    /// Eigenbasis of a context's static Hamiltonian, in its rotating frame.
    Eigen,
}

/// Which basis a density matrix is written in, with the spin labels of each
/// basis vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTag {
    pub kind: BasisKind,
    pub sites: Vec<SiteKind>,
    pub labels: Arc<Vec<Label>>,
}

impl BasisTag {
    pub fn product(sites: Vec<SiteKind>, dims: &[usize]) -> Self {
        let total: usize = dims.iter().product();
        let labels = (0..total)
            .map(|mut idx| {
                let mut lab = vec![0; dims.len()];
                for k in (0..dims.len()).rev() {
                    let digit = idx % dims[k];
                    idx /= dims[k];
                    lab[k] = dims[k] as i32 - 1 - 2 * digit as i32;
                }
                lab
            })
            .collect();
        BasisTag {
            kind: BasisKind::Product,
            sites,
            labels: Arc::new(labels),
        }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn site_of(&self, kind: SiteKind) -> Option<usize> {
        self.sites.iter().position(|&s| s == kind)
    }

    pub fn index_of(&self, label: &[i32]) -> Option<usize> {
        self.labels.iter().position(|l| l.as_slice() == label)
    }
}

/// Density matrix with its basis, clock and surviving triplet fraction.
#[derive(Debug, Clone)]
pub struct DensityState {
    pub matrix: CMat,
    pub basis: BasisTag,
    pub time_s: f64,
    /// Fraction of molecules still in the triplet; scales every observable.
    pub triplet_fraction: f64,
}

pub const STATE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

impl DensityState {
    pub fn new(matrix: CMat, basis: BasisTag) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: matrix.nrows(),
            });
        }
        Ok(DensityState {
            matrix,
            basis,
            time_s: 0.0,
            triplet_fraction: 1.0,
        })
    }

    /// Pure state |ψ⟩⟨ψ| (ψ normalised here).
    pub fn pure(psi: &[C64], basis: BasisTag) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(invalid("zero state vector"));
        }
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
        Self::new(&v * v.adjoint(), basis)
    }

    pub fn maximally_mixed(basis: BasisTag) -> Self {
        let n = basis.dim();
        DensityState {
            matrix: CMat::identity(n, n) / C64::new(n as f64, 0.0),
            basis,
            time_s: 0.0,
            triplet_fraction: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        trace(&self.matrix)
    }

    pub fn population(&self, k: usize) -> f64 {
        self.matrix[(k, k)].re
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.matrix * &self.matrix)).re
    }

    pub fn expectation(&self, op: &CMat) -> C64 {
        trace(&(&self.matrix * op))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eigh(&self.matrix)?.values[0])
    }

    /// Hermiticity, unit trace and (optionally) positivity.
    pub fn check(&self, positivity: bool) -> Result<()> {
        let herm = hermiticity_error(&self.matrix);
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian ({herm:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
        }
        if positivity {
            let m = self.min_eigenvalue()?;
            if m < -POSITIVITY_TOL {
                return Err(Error::InvalidState(format!("negative eigenvalue {m:e}")));
            }
        }
        if !(0.0..=1.0).contains(&self.triplet_fraction) {
            return Err(Error::InvalidState(
                "triplet fraction outside [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn with_matrix(&self, matrix: CMat) -> Self {
        DensityState {
            matrix,
            basis: self.basis.clone(),
            time_s: self.time_s,
            triplet_fraction: self.triplet_fraction,
        }
    }

    pub fn to_doc(&self) -> StateDoc {
        let n = self.dim();
        StateDoc {
            basis: self.basis.kind,
            sites: self.basis.sites.clone(),
            labels: self.basis.labels.as_ref().clone(),
            time_s: self.time_s,
            triplet_fraction: self.triplet_fraction,
            real: (0..n)
                .map(|i| (0..n).map(|j| self.matrix[(i, j)].re).collect())
                .collect(),
            imag: (0..n)
                .map(|i| (0..n).map(|j| self.matrix[(i, j)].im).collect())
                .collect(),
        }
    }

    pub fn from_doc(doc: &StateDoc) -> Result<Self> {
        let n = doc.labels.len();
        if doc.real.len() != n || doc.imag.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: doc.real.len(),
            });
        }
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            if doc.real[i].len() != n || doc.imag[i].len() != n {
                return Err(invalid(format!("row {i} has the wrong length")));
            }
            for j in 0..n {
                m[(i, j)] = C64::new(doc.real[i][j], doc.imag[i][j]);
            }
        }
        Ok(DensityState {
            matrix: m,
            basis: BasisTag {
                kind: doc.basis,
                sites: doc.sites.clone(),
                labels: Arc::new(doc.labels.clone()),
            },
            time_s: doc.time_s,
            triplet_fraction: doc.triplet_fraction,
        })
    }
}

/// JSON form of a density matrix: separate real and imaginary row arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDoc {
    pub basis: BasisKind,
    pub sites: Vec<SiteKind>,
    pub labels: Vec<Label>,
    pub time_s: f64,
    pub triplet_fraction: f64,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_labels() {
        let b = BasisTag::product(
            vec![
                SiteKind::Electron,
                SiteKind::Nucleus(0),
                SiteKind::Nucleus(1),
            ],
            &[3, 2, 2],
        );
        assert_eq!(b.labels[0], vec![2, 1, 1]);
        assert_eq!(b.labels[5], vec![0, 1, -1]);
        assert_eq!(b.labels[11], vec![-2, -1, -1]);
        assert_eq!(b.index_of(&[0, -1, 1]), Some(6));
    }

    #[test]
    fn doc_roundtrip() {
        let b = BasisTag::product(vec![SiteKind::Nucleus(0)], &[2]);
        let s = DensityState::pure(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)], b).unwrap();
        s.check(true).unwrap();
        let back = DensityState::from_doc(&s.to_doc()).unwrap();
        assert_eq!(back.matrix, s.matrix);
        assert!((s.purity() - 1.0).abs() < 1e-12);
    }
}
