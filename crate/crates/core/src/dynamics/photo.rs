use nalgebra::{Matrix3, Vector3};

use super::state::{BasisTag, DensityState, SiteKind};
use crate::error::{invalid, Result};
use crate::linalg::{identity, kron, CMat, C64};
use crate::spincore::{spin_operators, Orientation, SpinSystem};

/// Default zero-field sublevel populations (x, y, z).
pub const DEFAULT_POPULATIONS: [f64; 3] = [0.1, 0.1, 0.8];

/// Molecular-frame ZFS principal axes, assigned to x, y, z by largest
/// overlap with the molecular axes.
pub fn zfs_principal_axes(zfs: &Matrix3<f64>) -> [Vector3<f64>; 3] {
    let eig = zfs.symmetric_eigen();
    let mut axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut used = [false; 3];
    for (target, axis) in axes.iter_mut().enumerate() {
        let mut best = None;
        let mut best_overlap = -1.0;
        for k in 0..3 {
            if used[k] {
                continue;
            }
            let overlap = eig.eigenvectors[(target, k)].abs();
            if overlap > best_overlap + 1e-12 {
                best_overlap = overlap;
                best = Some(k);
            }
        }
        if let Some(k) = best {
            used[k] = true;
            let v: Vector3<f64> = eig.eigenvectors.column(k).into();
            *axis = if v[target] < 0.0 { -v } else { v };
        }
    }
    axes
}

pub fn product_sites(system: &SpinSystem) -> Vec<SiteKind> {
    std::iter::once(SiteKind::Electron)
        .chain((0..system.nuclei.len()).map(SiteKind::Nucleus))
        .collect()
}

/// Photo-excited triplet: zero-field sublevel T_k populated with p_k,
/// nuclei maximally mixed, lab-frame product basis.
///
/// T_k is the m = 0 state along principal axis k, so its projector is
/// I − (n_k·S)² with n_k the axis rotated into the lab.
pub fn photoexcite(
    system: &SpinSystem,
    orientation: &Orientation,
    populations: [f64; 3],
) -> Result<DensityState> {
    if populations.iter().any(|p| !(*p >= 0.0)) {
        return Err(invalid(format!(
            "negative sublevel population {populations:?}"
        )));
    }
    let total: f64 = populations.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!(
            "sublevel populations sum to {total}, not 1"
        )));
    }
    let s = spin_operators(system.electron_multiplicity())?;
    let axes = zfs_principal_axes(&system.zfs_tensor_hz);
    let mut rho_e = CMat::zeros(3, 3);
    for (k, axis) in axes.iter().enumerate() {
        let n = orientation.rotation * axis;
        let ns =
            &s.x * C64::new(n[0], 0.0) + &s.y * C64::new(n[1], 0.0) + &s.z * C64::new(n[2], 0.0);
        let proj = identity(3) - &ns * &ns;
        rho_e += proj * C64::new(populations[k], 0.0);
    }
    let nd = system.nuclear_dim();
    let rho = kron(&rho_e, &(identity(nd) / C64::new(nd as f64, 0.0)));
    DensityState::new(
        rho,
        BasisTag::product(product_sites(system), &system.dims()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn electron_block(s: &DensityState) -> CMat {
        // partial trace over the nuclei (last 4 of 12 indices)
        let mut out = CMat::zeros(3, 3);
        for a in 0..3 {
            for b in 0..3 {
                for n in 0..4 {
                    out[(a, b)] += s.matrix[(4 * a + n, 4 * b + n)];
                }
            }
        }
        out
    }

    #[test]
    fn equal_populations_mixed() {
        let sys = SpinSystem::fullerene();
        let o = Orientation::from_euler_zyz(0.3, 0.9, 1.7);
        let s = photoexcite(&sys, &o, [1.0 / 3.0; 3]).unwrap();
        assert!(max_abs(&(&s.matrix - identity(12) / C64::new(12.0, 0.0))) < 1e-12);
    }

    #[test]
    fn single_sublevel_is_pure_electron() {
        let sys = SpinSystem::fullerene();
        let o = Orientation::from_euler_zyz(1.0, 0.4, -0.2);
        let s = photoexcite(&sys, &o, [0.0, 0.0, 1.0]).unwrap();
        s.check(true).unwrap();
        let e = electron_block(&s);
        let purity = (&e * &e).trace().re;
        assert!((purity - 1.0).abs() < 1e-12);
        // identity orientation: T_z is m_S = 0
        let s0 = photoexcite(&sys, &Orientation::identity(), [0.0, 0.0, 1.0]).unwrap();
        assert!((electron_block(&s0)[(1, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_populations() {
        let sys = SpinSystem::fullerene();
        let o = Orientation::identity();
        assert!(photoexcite(&sys, &o, [0.5, 0.6, -0.1]).is_err());
        assert!(photoexcite(&sys, &o, [0.5, 0.6, 0.1]).is_err());
    }

    #[test]
    fn default_populations_valid_everywhere() {
        let sys = SpinSystem::fullerene();
        for k in 0..5 {
            let o = Orientation::from_euler_zyz(0.3 * k as f64, 0.5 * k as f64, 0.1);
            let s = photoexcite(&sys, &o, DEFAULT_POPULATIONS).unwrap();
            s.check(true).unwrap();
        }
    }
}
