use serde::{Deserialize, Serialize};

use crate::dynamics::{nuclear_frequency, ContextOptions, FrameSpec, SpinContext};
use crate::error::{invalid, Result};
use crate::spincore::{Orientation, SpinSystem};

/// Field used for the gate experiments and the Davies ENDOR reference.
pub const DEFAULT_GATE_FIELD_T: f64 = 0.3461;

/// The four nuclear configurations {|1⟩..|4⟩} of the T₀ manifold, bound to a
/// microwave transition into a partner manifold (T₋₁ or T₊₁).
///
/// Qubit bit b_n is 1 when nucleus n sits in its reference orientation, and
/// the effective index is e − 1 = 2·b₀ + b₁. So |4⟩ is the reference
/// configuration, |2⟩ has nucleus 0 flipped, |3⟩ nucleus 1 flipped and |1⟩
/// both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveQubitBasis {
    pub field_tesla: f64,
    pub orientation: Orientation,
    /// m_S of the manifold the selective microwave pulse connects T₀ to.
    pub partner_ms: i32,
    /// 2m of each nucleus in |4⟩.
    pub reference: [i32; 2],
}

impl EffectiveQubitBasis {
    /// Binds the basis at a field and orientation. The partner manifold is
    /// the one whose transition to T₀ has the higher frequency, i.e. the
    /// lowest resonance field at fixed microwave frequency.
    pub fn new(system: &SpinSystem, field_tesla: f64, orientation: &Orientation) -> Result<Self> {
        if system.nuclei.len() != 2 {
            return Err(invalid("effective qubit basis needs exactly two nuclei"));
        }
        if system.nuclei.iter().any(|n| n.multiplicity() != 2) {
            return Err(invalid("effective qubit basis needs spin-1/2 nuclei"));
        }
        let ctx = SpinContext::full(
            system,
            field_tesla,
            orientation,
            FrameSpec::lab(),
            ContextOptions::default(),
        )?;
        let reference = [1, 1];
        let t0 = [0, reference[0], reference[1]];
        let up = ctx.transition_frequency(&[2, reference[0], reference[1]], &t0)?;
        let down = ctx.transition_frequency(&[-2, reference[0], reference[1]], &t0)?;
        Ok(EffectiveQubitBasis {
            field_tesla,
            orientation: *orientation,
            partner_ms: if up >= down { 1 } else { -1 },
            reference,
        })
    }

    /// Field along the molecular z axis at the default gate field.
    pub fn default_for(system: &SpinSystem) -> Result<Self> {
        Self::new(system, DEFAULT_GATE_FIELD_T, &Orientation::along_axis(2))
    }

    pub fn with_partner(mut self, ms: i32) -> Result<Self> {
        if ms != 1 && ms != -1 {
            return Err(invalid("partner manifold must be m_S = ±1"));
        }
        self.partner_ms = ms;
        Ok(self)
    }

    /// Qubit bits (b₀, b₁) of effective state `e` ∈ 1..=4.
    pub fn bits(e: usize) -> (usize, usize) {
        let k = e - 1;
        (k >> 1, k & 1)
    }

    /// Nuclear 2m labels of effective state `e` ∈ 1..=4.
    pub fn nuclear_label(&self, e: usize) -> Result<[i32; 2]> {
        if !(1..=4).contains(&e) {
            return Err(invalid(format!("effective state index {e} outside 1..=4")));
        }
        let (b0, b1) = Self::bits(e);
        let pick = |b: usize, r: i32| if b == 1 { r } else { -r };
        Ok([pick(b0, self.reference[0]), pick(b1, self.reference[1])])
    }

    /// Full electron + nuclei label in manifold `ms`.
    pub fn full_label(&self, e: usize, ms: i32) -> Result<Vec<i32>> {
        let n = self.nuclear_label(e)?;
        Ok(vec![2 * ms, n[0], n[1]])
    }

    /// Rotating frame shared by the T₀ nuclear context and the full context:
    /// nuclei at their bare Larmor frequencies, microwave on the
    /// (partner, |4⟩) ↔ (T₀, |4⟩) transition.
    pub fn frame(&self, system: &SpinSystem) -> Result<FrameSpec> {
        let rf_hz = (0..system.nuclei.len())
            .map(|n| nuclear_frequency(system, self.field_tesla, &self.orientation, 0, n))
            .collect();
        let lab = SpinContext::full(
            system,
            self.field_tesla,
            &self.orientation,
            FrameSpec::lab(),
            ContextOptions::default(),
        )?;
        let mw_hz = lab.transition_frequency(
            &self.full_label(4, self.partner_ms)?,
            &self.full_label(4, 0)?,
        )?;
        Ok(FrameSpec { mw_hz, rf_hz })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_flip_convention() {
        let sys = SpinSystem::fullerene();
        let b = EffectiveQubitBasis::default_for(&sys).unwrap();
        assert_eq!(b.nuclear_label(4).unwrap(), [1, 1]);
        assert_eq!(b.nuclear_label(2).unwrap(), [-1, 1]);
        assert_eq!(b.nuclear_label(3).unwrap(), [1, -1]);
        assert_eq!(b.nuclear_label(1).unwrap(), [-1, -1]);
        assert!(b.nuclear_label(5).is_err());
    }

    #[test]
    fn partner_is_lowest_field_transition() {
        // B along z with D_zz < 0: T0 ↔ T+1 sits above T−1 ↔ T0
        let sys = SpinSystem::fullerene();
        let b = EffectiveQubitBasis::default_for(&sys).unwrap();
        let ctx = SpinContext::full(
            &sys,
            b.field_tesla,
            &b.orientation,
            FrameSpec::lab(),
            ContextOptions::default(),
        )
        .unwrap();
        let f_up = ctx.transition_frequency(&[2, 1, 1], &[0, 1, 1]).unwrap();
        let f_dn = ctx.transition_frequency(&[-2, 1, 1], &[0, 1, 1]).unwrap();
        assert_eq!(b.partner_ms, if f_up > f_dn { 1 } else { -1 });
        let frame = b.frame(&sys).unwrap();
        assert!((frame.mw_hz - f_up.max(f_dn)).abs() < 1e-3);
    }
}
