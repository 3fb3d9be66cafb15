use nalgebra::{Matrix3, Vector3};

use super::operators::{ProductOperators, SpinOps};
use super::orientation::Orientation;
use super::system::{CouplingForm, SpinSystem};
use crate::constants::BOHR_MAGNETON_HZ_PER_T;
use crate::error::{invalid, Error, Result};
use crate::linalg::{eigh, hermiticity_error, max_abs, CMat, HermitianEigen, C64};

/// Spin Hamiltonian in Hz together with the inputs it was built from.
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    pub matrix: CMat,
    pub field_tesla: Vector3<f64>,
    pub orientation: Orientation,
}

/// Product-space operators of a spin system: site 0 is the electron.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub product: ProductOperators,
}

impl SystemOperators {
    pub fn new(system: &SpinSystem) -> Result<Self> {
        Ok(SystemOperators {
            product: ProductOperators::new(&system.dims())?,
        })
    }

    pub fn electron(&self) -> &SpinOps {
        &self.product.sites[0]
    }

    pub fn nucleus(&self, k: usize) -> &SpinOps {
        &self.product.sites[k + 1]
    }

    pub fn dim(&self) -> usize {
        self.product.dim()
    }
}

fn bilinear(t: &Matrix3<f64>, a: &SpinOps, b: &SpinOps, dim: usize) -> CMat {
    let mut h = CMat::zeros(dim, dim);
    for i in 0..3 {
        for j in 0..3 {
            if t[(i, j)] != 0.0 {
                h += a.component(i) * b.component(j) * C64::new(t[(i, j)], 0.0);
            }
        }
    }
    h
}

/// Builds H = μB/h·B·g·S + S·D·S + Σ S·A·I + J-term − Σ γ·I·B in Hz.
///
/// Molecular-frame tensors are rotated into the lab frame by `orientation`.
/// The nuclear Zeeman term carries a minus sign with positive γ, so
/// nuclear Larmor frequencies come out as +γB and ↑ (m = +½) is the lower
/// nuclear level at positive γ.
pub fn build_hamiltonian(
    system: &SpinSystem,
    field_tesla: Vector3<f64>,
    orientation: &Orientation,
) -> Result<HamiltonianMatrix> {
    let ops = SystemOperators::new(system)?;
    build_hamiltonian_with(&ops, system, field_tesla, orientation)
}

/// As [`build_hamiltonian`] with precomputed operators (hot loops).
pub fn build_hamiltonian_with(
    ops: &SystemOperators,
    system: &SpinSystem,
    field_tesla: Vector3<f64>,
    orientation: &Orientation,
) -> Result<HamiltonianMatrix> {
    system.validate()?;
    orientation.check()?;
    if ops.product.dims != system.dims() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: ops.dim(),
        });
    }
    let dim = ops.dim();
    let s = ops.electron();
    let mut h = CMat::zeros(dim, dim);

    let g_lab = orientation.rotate_tensor(&system.g_tensor);
    let zeeman = g_lab.transpose() * field_tesla * BOHR_MAGNETON_HZ_PER_T;
    for j in 0..3 {
        h += s.component(j) * C64::new(zeeman[j], 0.0);
    }

    let d_lab = orientation.rotate_tensor(&system.zfs_tensor_hz);
    h += bilinear(&d_lab, s, s, dim);

    for (k, nuc) in system.nuclei.iter().enumerate() {
        let i_ops = ops.nucleus(k);
        let a_lab = orientation.rotate_tensor(&nuc.hyperfine_tensor_hz);
        h += bilinear(&a_lab, s, i_ops, dim);
        for j in 0..3 {
            let c = -nuc.gyromagnetic_ratio_hz_per_t * field_tesla[j];
            if c != 0.0 {
                h += i_ops.component(j) * C64::new(c, 0.0);
            }
        }
    }

    if system.nuclei.len() >= 2 && system.nn_coupling_hz != 0.0 {
        let (a, b) = (ops.nucleus(0), ops.nucleus(1));
        let jc = C64::new(system.nn_coupling_hz, 0.0);
        let zz = &a.z * &b.z;
        match system.nn_coupling_form {
            CouplingForm::IsingZz => h += zz * jc,
            CouplingForm::SecularDipolar => {
                let flip = &a.x * &b.x + &a.y * &b.y;
                h += (zz - flip * C64::new(0.5, 0.0)) * jc;
            }
        }
    }

    Ok(HamiltonianMatrix {
        matrix: h,
        field_tesla,
        orientation: *orientation,
    })
}

/// Field of magnitude `b` along lab z.
pub fn lab_z(b: f64) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, b)
}

/// Eigen-energies (Hz, ascending) and orthonormal eigenvectors as columns.
pub type Eigensystem = HermitianEigen;

pub fn eigensystem(h: &HamiltonianMatrix) -> Result<Eigensystem> {
    eigensystem_of(&h.matrix)
}

pub fn eigensystem_of(m: &CMat) -> Result<Eigensystem> {
    if !m.is_square() {
        return Err(invalid("Hamiltonian must be square"));
    }
    let err = hermiticity_error(m);
    if err > 1e-9 {
        return Err(invalid(format!(
            "Hamiltonian not Hermitian (relative error {err:e})"
        )));
    }
    eigh(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    pub frequency_hz: f64,
    pub intensity: f64,
}

pub const DEFAULT_INTENSITY_THRESHOLD: f64 = 1e-6;

pub fn transition_table(
    h: &HamiltonianMatrix,
    drive: &CMat,
    rel_threshold: f64,
) -> Result<Vec<Transition>> {
    let eig = eigensystem(h)?;
    transitions_from(&eig, drive, rel_threshold)
}

/// Transitions i<j with intensity |⟨i|drive|j⟩|² ≥ rel_threshold × max.
///
/// A drive whose largest off-diagonal element is at rounding level relative
/// to its entries (e.g. identity) yields no transitions.
pub fn transitions_from(
    eig: &Eigensystem,
    drive: &CMat,
    rel_threshold: f64,
) -> Result<Vec<Transition>> {
    let n = eig.values.len();
    if drive.nrows() != n || drive.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: drive.nrows(),
        });
    }
    let m = eig.vectors.adjoint() * drive * &eig.vectors;
    let mut out = Vec::new();
    let mut max_int = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_int = max_int.max(m[(i, j)].norm_sqr());
        }
    }
    let scale = max_abs(drive).powi(2);
    if max_int <= 1e-20 * scale || max_int == 0.0 {
        return Ok(out);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let intensity = m[(i, j)].norm_sqr();
            if intensity >= rel_threshold * max_int {
                out.push(Transition {
                    lower: i,
                    upper: j,
                    frequency_hz: eig.values[j] - eig.values[i],
                    intensity,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spincore::operators::spin_operators;
    use crate::spincore::system::{
        SpinSystem, FULLERENE_DXX_HZ, FULLERENE_DYY_HZ, FULLERENE_DZZ_HZ,
    };

    /// Real symmetric embedding [[Re, −Im], [Im, Re]] diagonalised with a
    /// cyclic Jacobi sweep; each eigenvalue appears twice.
    fn jacobi_eigenvalues(m: &CMat) -> Vec<f64> {
        let n = m.nrows();
        let mut a = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = m[(i, j)].re;
                a[i + n][j + n] = m[(i, j)].re;
                a[i][j + n] = -m[(i, j)].im;
                a[i + n][j] = m[(i, j)].im;
            }
        }
        let size = 2 * n;
        for _ in 0..100 {
            let off: f64 = (0..size)
                .flat_map(|i| (0..size).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..size {
                for q in (p + 1)..size {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..size {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..size {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut d: Vec<f64> = (0..size).map(|i| a[i][i]).collect();
        d.sort_by(|x, y| x.partial_cmp(y).unwrap());
        d.iter().step_by(2).copied().collect()
    }

    fn zfs_only() -> SpinSystem {
        let mut s = SpinSystem::fullerene();
        s.g_tensor = Matrix3::identity() * 2.0023;
        for n in &mut s.nuclei {
            n.hyperfine_tensor_hz = Matrix3::zeros();
        }
        s.nn_coupling_hz = 0.0;
        s
    }

    #[test]
    fn zero_field_zfs_levels() {
        let h = build_hamiltonian(&zfs_only(), Vector3::zeros(), &Orientation::identity()).unwrap();
        let e = eigensystem(&h).unwrap();
        // oracle: Dxx Sx² + Dyy Sy² + Dzz Sz² on the bare triplet
        let s1 = spin_operators(3).unwrap();
        let d3 = &s1.x * &s1.x * C64::new(FULLERENE_DXX_HZ, 0.0)
            + &s1.y * &s1.y * C64::new(FULLERENE_DYY_HZ, 0.0)
            + &s1.z * &s1.z * C64::new(FULLERENE_DZZ_HZ, 0.0);
        let oracle = jacobi_eigenvalues(&d3);
        let want = [-159.53e6, -52.13e6, 211.66e6];
        for k in 0..3 {
            assert!((oracle[k] - want[k]).abs() < 1.0);
            for r in 0..4 {
                assert!((e.values[4 * k + r] - want[k]).abs() < 1e3);
            }
        }
    }

    #[test]
    fn isotropic_zeeman_resonance() {
        let mut s = zfs_only();
        s.zfs_tensor_hz = Matrix3::zeros();
        for n in &mut s.nuclei {
            n.gyromagnetic_ratio_hz_per_t = 0.0;
        }
        let h = build_hamiltonian(&s, lab_z(0.3461), &Orientation::identity()).unwrap();
        let e = eigensystem(&h).unwrap();
        let nu = e.values[4] - e.values[0];
        let want = 2.0023 * BOHR_MAGNETON_HZ_PER_T * 0.3461;
        assert!((nu - want).abs() < 1.0);
        assert!((nu - 9.70e9).abs() < 0.01e9);
    }

    #[test]
    fn zero_everything_gives_zero_matrix() {
        let mut s = zfs_only();
        s.zfs_tensor_hz = Matrix3::zeros();
        let h = build_hamiltonian(&s, Vector3::zeros(), &Orientation::identity()).unwrap();
        assert_eq!(max_abs(&h.matrix), 0.0);
    }

    #[test]
    fn fullerene_hamiltonian_matches_jacobi_oracle() {
        let s = SpinSystem::fullerene();
        let o = Orientation::from_euler_zyz(0.4, 1.1, 2.3);
        let h = build_hamiltonian(&s, lab_z(0.3461), &o).unwrap();
        assert!(hermiticity_error(&h.matrix) < 1e-12);
        let e = eigensystem(&h).unwrap();
        let oracle = jacobi_eigenvalues(&h.matrix);
        let scale = e.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for (a, b) in e.values.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
        }
        let rebuilt = e.apply(|v| C64::new(v, 0.0));
        assert!(max_abs(&(rebuilt - &h.matrix)) <= 1e-8 * scale);
    }

    #[test]
    fn diagonal_and_identity_eigensystems() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(3e6, 0.0),
            C64::new(1e6, 0.0),
            C64::new(2e6, 0.0),
        ]));
        let e = eigensystem_of(&m).unwrap();
        assert_eq!(e.values, vec![1e6, 2e6, 3e6]);
        let id = eigensystem_of(&CMat::identity(4, 4)).unwrap();
        assert!(id.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let mut bad = CMat::identity(2, 2);
        bad[(0, 1)] = C64::new(1.0, 0.0);
        assert!(eigensystem_of(&bad).is_err());
    }

    #[test]
    fn two_level_transition() {
        let s = spin_operators(2).unwrap();
        let nu = 5.0e6;
        let h = HamiltonianMatrix {
            matrix: CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
                C64::new(0.0, 0.0),
                C64::new(nu, 0.0),
            ])),
            field_tesla: Vector3::zeros(),
            orientation: Orientation::identity(),
        };
        let t = transition_table(&h, &s.x, DEFAULT_INTENSITY_THRESHOLD).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].frequency_hz - nu).abs() < 1e-9);
        assert!((t[0].intensity - 0.25).abs() < 1e-12);
        let none =
            transition_table(&h, &CMat::identity(2, 2), DEFAULT_INTENSITY_THRESHOLD).unwrap();
        assert!(none.is_empty());
        let wrong = transition_table(&h, &CMat::identity(3, 3), DEFAULT_INTENSITY_THRESHOLD);
        assert!(wrong.is_err());
    }

    #[test]
    fn electron_transitions_split_into_two_branches() {
        let s = SpinSystem::fullerene();
        let ops = SystemOperators::new(&s).unwrap();
        let h = build_hamiltonian(&s, lab_z(0.3461), &Orientation::identity()).unwrap();
        let t = transition_table(&h, &ops.electron().x, 1e-3).unwrap();
        let eig = eigensystem(&h).unwrap();
        // oracle: exhaustive matrix elements ⟨i|Sx|j⟩ with i,j in different m_S manifolds
        let sz = eig.vectors.adjoint() * &ops.electron().z * &eig.vectors;
        let ms: Vec<i32> = (0..12).map(|k| sz[(k, k)].re.round() as i32).collect();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for tr in &t {
            let pair = (ms[tr.lower], ms[tr.upper]);
            assert!(tr.frequency_hz > 8e9, "electron transition {tr:?}");
            match pair {
                (-1, 0) => lower.push(tr.frequency_hz),
                (0, 1) => upper.push(tr.frequency_hz),
                other => panic!("unexpected manifold pair {other:?}"),
            }
        }
        assert_eq!(lower.len(), 4);
        assert_eq!(upper.len(), 4);
        let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        // B ∥ z: branches split by 3|Dzz|
        assert!(((mean(&upper) - mean(&lower)).abs() - 3.0 * 211.66e6).abs() < 5e6);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut s = SpinSystem::fullerene();
        s.g_tensor[(0, 2)] = 0.1;
        assert!(build_hamiltonian(&s, lab_z(0.3), &Orientation::identity()).is_err());
    }
}
