//! Bell fidelity against per-gate depolarizing error, with and without the
//! triplet and nuclear relaxation channels.

use triplet_gates::dynamics::{PulseMode, RelaxationModel};
use triplet_gates::sequences::{CnotMethod, EffectiveQubitBasis};
use triplet_gates::spincore::SpinSystem;
use triplet_gates::tomography::error_budget;

fn main() -> triplet_gates::Result<()> {
    let system = SpinSystem::fullerene();
    let basis = EffectiveQubitBasis::default_for(&system)?;
    let models = [
        ("none", None),
        ("triplet", Some(RelaxationModel::triplet_only())),
        ("full", Some(RelaxationModel::default())),
    ];
    println!("relaxation  p      cphase  dipolar");
    for (label, model) in &models {
        for p in [0.0, 0.02, 0.04, 0.08] {
            let c = error_budget(
                &system,
                &basis,
                CnotMethod::Cphase,
                model.clone(),
                p,
                PulseMode::Ideal,
            )?;
            let d = error_budget(
                &system,
                &basis,
                CnotMethod::Dipolar,
                model.clone(),
                p,
                PulseMode::Ideal,
            )?;
            println!("{label:<10}  {p:.2}   {c:.3}   {d:.3}");
        }
    }
    Ok(())
}
