//! Geometric phase of a cyclic nutation: half the enclosed solid angle,
//! checked against direct propagation of a detuned 2π cycle.

use std::f64::consts::PI;

use triplet_gates::dynamics::{geometric_phase, propagated_cycle_phase};
use triplet_gates::linalg::wrap_phase;

fn main() -> triplet_gates::Result<()> {
    println!(" theta/pi   formula   propagated");
    for k in 1..10 {
        let theta = PI * k as f64 / 10.0;
        let f = wrap_phase(geometric_phase(theta)?);
        let p = propagated_cycle_phase(theta, 2.27e6)?;
        println!("{:8.2}  {f:8.4}  {p:10.4}", theta / PI);
    }
    Ok(())
}
