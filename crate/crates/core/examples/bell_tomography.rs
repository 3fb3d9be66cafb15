//! Bell-state preparation followed by phase-imprinted density-matrix
//! tomography, for both entangling routes.

use triplet_gates::dynamics::{PulseMode, RelaxationModel};
use triplet_gates::sequences::{CnotMethod, EffectiveQubitBasis};
use triplet_gates::spincore::SpinSystem;
use triplet_gates::tomography::{bell_tomography, TomographySettings};

fn main() -> triplet_gates::Result<()> {
    let system = SpinSystem::fullerene();
    let basis = EffectiveQubitBasis::default_for(&system)?;
    for method in [CnotMethod::Dipolar, CnotMethod::Cphase] {
        let r = bell_tomography(
            &system,
            &basis,
            method,
            Some(RelaxationModel::default()),
            0.04,
            PulseMode::Ideal,
            &TomographySettings::default(),
        )?;
        println!("{method:?}: F = {:.3}", r.fidelity.unwrap_or(f64::NAN));
        let m = r.matrix();
        for i in 0..4 {
            let row: Vec<String> = (0..4)
                .map(|j| format!("{:+.3}{:+.3}i", m[(i, j)].re, m[(i, j)].im))
                .collect();
            println!("  {}", row.join("  "));
        }
    }
    Ok(())
}
