//! The displaced-frame picture behind the pair coupling: the polaron
//! transform is isospectral, its first-order expansion carries the
//! effective vertex G_s = 2J(β₁+β₂), and the truncation error shrinks
//! as β² when the couplings are halved.
//!
//! Run with `cargo run --release --example effective_model`.

use crtsim::model::{build_first_order, derived, polaron_transform, ModelParams};
use crtsim::qops::eigh;
use crtsim::spectra::{LOWER_BRANCH, UPPER_BRANCH};

fn gap_of(h: &crtsim::qops::Operator) -> crtsim::Result<f64> {
    let eig = eigh(h)?;
    Ok(eig.values()[UPPER_BRANCH] - eig.values()[LOWER_BRANCH])
}

fn main() -> crtsim::Result<()> {
    let p = ModelParams::default();
    let d = derived(&p);
    println!("derived quantities at the reference point:");
    println!("  β₁ = β₂ = {:.4}", d.beta1);
    println!("  χ  = 4g₁g₂/ω = {:.4} GHz (σᶻσᶻ scale)", d.chi);
    println!("  Gs = 2J(β₁+β₂) = {:.4} GHz, half-Rabi time = {:.1} ns\n",
        d.gs, std::f64::consts::PI / (2.0 * d.gs));

    // The exact displaced frame only reshuffles the basis.
    let lab = eigh(&crtsim::model::build_static(&p))?;
    let displaced = eigh(&polaron_transform(&p)?)?;
    let max_dev = lab
        .values()
        .iter()
        .zip(displaced.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    println!("polaron transform is isospectral: max |ΔE| = {max_dev:.2e} GHz");

    // First order in β reproduces the anticrossing gap up to O(β²).
    println!("\nanticrossing gap at resonance, exact vs first order in β:");
    println!("{:>8} {:>12} {:>12} {:>10}", "β", "exact (GHz)", "O(β) (GHz)", "error");
    let mut previous_error = None;
    for scale in [1.0, 0.5] {
        let ps = ModelParams { g1: scale * p.g1, g2: scale * p.g2, ..p.clone() };
        let exact = gap_of(&polaron_transform(&ps)?)?;
        let first = gap_of(&build_first_order(&ps)?)?;
        let error = (exact - first).abs();
        println!("{:>8.4} {:>12.6} {:>12.6} {:>10.2e}", derived(&ps).beta1, exact, first, error);
        if let Some(prev) = previous_error {
            println!("\nhalving β shrinks the truncation error by {:.1}x (β² scaling)", prev / error);
        }
        previous_error = Some(error);
    }
    Ok(())
}
