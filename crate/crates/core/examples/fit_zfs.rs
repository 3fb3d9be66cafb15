//! Recover the ZFS principal values from a synthetic field sweep, starting
//! 20% away from the truth.

use triplet_gates::estimation::{fit, synthetic_problem, ForwardModel, ParamSpec};
use triplet_gates::sequences::{linspace, FieldSweepSettings};
use triplet_gates::spincore::{SpinSystem, FULLERENE_DXX_HZ, FULLERENE_DYY_HZ};

fn main() -> triplet_gates::Result<()> {
    let system = SpinSystem::fullerene();
    let problem = synthetic_problem(
        &system,
        ForwardModel::FieldSweep {
            settings: FieldSweepSettings::default(),
        },
        vec![linspace(0.325, 0.368, 87)],
        vec![
            ParamSpec::new("d_xx", 1.2 * FULLERENE_DXX_HZ, 20e6, 100e6),
            ParamSpec::new("d_yy", 0.8 * FULLERENE_DYY_HZ, 100e6, 250e6),
        ],
        &[FULLERENE_DXX_HZ, FULLERENE_DYY_HZ],
        8,
    )?;
    let report = fit(&problem)?;
    for p in &report.parameters {
        let sigma = p
            .uncertainty
            .map(|s| format!("{:.3e}", s / 1e6))
            .unwrap_or("-".into());
        println!(
            "{:5} = {:9.4} MHz  (sigma {sigma} MHz)",
            p.name,
            p.value / 1e6
        );
    }
    println!(
        "residual {:.2e} after {} evaluations, converged: {}",
        report.residual, report.evaluations, report.converged
    );
    Ok(())
}
