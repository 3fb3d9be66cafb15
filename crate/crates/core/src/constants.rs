//! Physical constants (CODATA 2018), expressed in the frequency units used
//! throughout the crate: every Hamiltonian term is stored in Hz.

/// Planck constant, J·s (exact).
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;

/// Bohr magneton, J/T.
pub const BOHR_MAGNETON_J_PER_T: f64 = 9.274_010_078_3e-24;

/// Bohr magneton divided by Planck's constant, Hz/T.
pub const BOHR_MAGNETON_HZ_PER_T: f64 = 1.399_624_493_6e10;

/// Free-electron g-factor (magnitude).
pub const G_FREE_ELECTRON: f64 = 2.002_319_304_4;

/// Proton gyromagnetic ratio γ/2π, Hz/T.
pub const GAMMA_1H_HZ_PER_T: f64 = 4.257_747_852e7;

/// Phosphorus-31 gyromagnetic ratio γ/2π, Hz/T.
pub const GAMMA_31P_HZ_PER_T: f64 = 1.725_15e7;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bohr_magneton_ratio_consistent() {
        let ratio = BOHR_MAGNETON_J_PER_T / PLANCK_J_S;
        assert!((ratio - BOHR_MAGNETON_HZ_PER_T).abs() / ratio < 1e-9);
    }
}
