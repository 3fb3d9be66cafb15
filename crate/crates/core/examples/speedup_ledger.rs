//! Entangling-time ledger for the liquid J, solid dipolar and geometric
//! CPHASE routes.

use triplet_gates::sequences::{ledger_csv, speedup_ledger};
use triplet_gates::spincore::SpinSystem;

fn main() -> triplet_gates::Result<()> {
    let rows = speedup_ledger(&SpinSystem::fullerene())?;
    for r in &rows {
        println!(
            "{:14} reported {:>10.3e} s  computed {:>10.3e} s  speedup {:>9.1}",
            r.method, r.reported_s, r.computed_s, r.ratio_vs_liquid
        );
    }
    print!("{}", ledger_csv(&rows));
    Ok(())
}
