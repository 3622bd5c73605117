//! The closed-form distance bound, taken apart: the neck height from the
//! distortion defect, the three addends, and how the bound responds to
//! each input.

use std::f64::consts::PI;

use vadb::verify::{flat_bound, FlatBoundInputs};

fn main() -> vadb::Result<()> {
    let inputs = FlatBoundInputs {
        excluded_volume: 0.01,
        delta: 0.005,
        diam: 2.0,
        vol: PI,
        area: 2.0 * PI,
    };
    let out = flat_bound(&inputs)?;
    println!("inputs: {inputs:?}");
    println!("neck height h = sqrt(2 * delta * diam + delta^2) = {}", out.h);
    println!("excluded term (doubled cut volume) = {}", out.excluded_term);
    println!("volume term   (h * volume)         = {}", out.volume_term);
    println!("area term     (h * boundary area)  = {}", out.area_term);
    println!("bound = {}", out.bound);

    println!("\nthe defect is the only nonlinear knob:");
    for delta in [0.0, 0.001, 0.005, 0.02, 0.1] {
        let out = flat_bound(&FlatBoundInputs { delta, ..inputs })?;
        println!("  delta = {delta:>5}: h = {:.6}, bound = {:.6}", out.h, out.bound);
    }

    println!("\nand the cut volume enters linearly, twice:");
    for v in [0.0, 0.01, 0.05, 0.25] {
        let out = flat_bound(&FlatBoundInputs {
            excluded_volume: v,
            ..inputs
        })?;
        println!("  cut volume = {v:>4}: bound = {:.6}", out.bound);
    }
    Ok(())
}
