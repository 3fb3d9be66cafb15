use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Rotation taking molecular-frame tensors to the lab frame
/// (T_lab = R·T_mol·Rᵀ), plus a powder weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub rotation: Matrix3<f64>,
    pub weight: f64,
}

impl Default for Orientation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Orientation {
    pub fn identity() -> Self {
        Orientation {
            rotation: Matrix3::identity(),
            weight: 1.0,
        }
    }

    /// R = Rz(α)·Ry(β)·Rz(γ).
    pub fn from_euler_zyz(alpha: f64, beta: f64, gamma: f64) -> Self {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), alpha)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), beta)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), gamma);
        Orientation {
            rotation: *r.matrix(),
            weight: 1.0,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Result<Self> {
        let o = Orientation {
            rotation,
            weight: 1.0,
        };
        o.check()?;
        Ok(o)
    }

    /// Orientation for which a lab-z field points along the molecular
    /// direction (sinθ cosφ, sinθ sinφ, cosθ).
    pub fn from_field_direction(theta: f64, phi: f64) -> Self {
        Self::from_euler_zyz(0.0, theta, std::f64::consts::PI - phi)
    }

    /// Orientation that puts the lab-z field along a molecular principal axis
    /// (0 = x, 1 = y, 2 = z).
    pub fn along_axis(axis: usize) -> Self {
        use std::f64::consts::FRAC_PI_2;
        match axis {
            0 => Self::from_field_direction(FRAC_PI_2, 0.0),
            1 => Self::from_field_direction(FRAC_PI_2, FRAC_PI_2),
            _ => Self::identity(),
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn inverse(&self) -> Self {
        Orientation {
            rotation: self.rotation.transpose(),
            weight: self.weight,
        }
    }

    /// Lab field direction expressed in the molecular frame.
    pub fn field_direction_molecular(&self) -> Vector3<f64> {
        self.rotation.transpose() * Vector3::z()
    }

    /// Euler angles (α, β, γ) in the z-y-z convention.
    pub fn euler_zyz(&self) -> (f64, f64, f64) {
        let r = &self.rotation;
        let beta = r[(2, 2)].clamp(-1.0, 1.0).acos();
        if beta.sin().abs() > 1e-9 {
            let alpha = r[(1, 2)].atan2(r[(0, 2)]);
            let gamma = r[(2, 1)].atan2(-r[(2, 0)]);
            (alpha, beta, gamma)
        } else {
            // gimbal lock: fold everything into α
            let alpha = r[(1, 0)].atan2(r[(0, 0)]);
            if r[(2, 2)] > 0.0 {
                (alpha, 0.0, 0.0)
            } else {
                (-alpha, std::f64::consts::PI, 0.0)
            }
        }
    }

    pub fn rotate_tensor(&self, t: &Matrix3<f64>) -> Matrix3<f64> {
        self.rotation * t * self.rotation.transpose()
    }

    pub fn check(&self) -> Result<()> {
        let r = &self.rotation;
        let orth = (r.transpose() * r - Matrix3::identity()).amax();
        let det = r.determinant();
        if orth > 1e-10 || (det - 1.0).abs() > 1e-10 {
            return Err(invalid(format!(
                "orientation is not a proper rotation (orthogonality error {orth:e}, det {det})"
            )));
        }
        if !(self.weight >= 0.0) {
            return Err(invalid("orientation weight must be nonnegative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_direction_maps_lab_z() {
        for &(t, p) in &[(0.3, 1.1), (1.2, -2.0), (2.9, 0.4)] {
            let o = Orientation::from_field_direction(t, p);
            let n = o.field_direction_molecular();
            let want = Vector3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos());
            assert!((n - want).amax() < 1e-12);
            o.check().unwrap();
        }
    }

    #[test]
    fn euler_roundtrip() {
        let o = Orientation::from_euler_zyz(0.7, 1.3, -2.1);
        let (a, b, g) = o.euler_zyz();
        let back = Orientation::from_euler_zyz(a, b, g);
        assert!((back.rotation - o.rotation).amax() < 1e-12);
    }

    #[test]
    fn improper_rotation_rejected() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Orientation::from_rotation(m).is_err());
    }
}
