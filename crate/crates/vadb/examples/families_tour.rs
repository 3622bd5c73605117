//! Walks the three built-in metric families and prints the measurements
//! that make each one interesting: where volume goes, what the boundary
//! does, and which hypothesis each family is designed to stress.

use vadb::families::{check_construction_hyp, FamilyKind, FamilySpec};
use vadb::measure::{boundary_area, volume};

fn main() -> vadb::Result<()> {
    let level = 6;

    println!("== disk blow-up, alpha = 0.25 ==");
    let mut disk = FamilySpec::new(FamilyKind::DiskBlowup, 2);
    disk.alpha = Some(0.25);
    let base_vol = volume(&disk.base_metric()?, level)?.value;
    println!("base disk volume = {base_vol:.6}");
    for j in [4u32, 16, 64, 256] {
        let g = disk.metric(j)?;
        let vol = volume(&g, level)?.value;
        let rim = boundary_area(&g, level)?.value;
        println!(
            "j = {j:>3}: volume = {vol:.6} (surplus {:+.6}), boundary length = {rim:.6}",
            vol - base_vol
        );
    }
    println!("the rim band shrinks but its area surplus only fades like 1/sqrt(j)\n");

    println!("== cinched sphere, h0 = 0.1 ==");
    let mut cinch = FamilySpec::new(FamilyKind::CinchedSphere, 2);
    cinch.h0 = Some(0.1);
    let round = volume(&cinch.base_metric()?, level)?.value;
    println!("round sphere volume = {round:.6}");
    for j in [4u32, 16, 64] {
        let g = cinch.metric(j)?;
        let vol = volume(&g, level)?.value;
        println!(
            "j = {j:>3}: volume = {vol:.6} (deficit {:.4}%)",
            (round - vol) / round * 100.0
        );
    }
    println!("volume converges while the equator floor stays at h0^2 = 0.01 forever\n");

    println!("== torus bubble ==");
    let torus = FamilySpec::new(FamilyKind::TorusBubble, 2);
    let flat = volume(&torus.base_metric()?, level)?.value;
    println!("flat torus volume = {flat:.6}");
    for j in [8u32, 32, 128] {
        let g = torus.metric(j)?;
        let vol = volume(&g, level)?.value;
        let gauge = check_construction_hyp(2, j)?;
        println!(
            "j = {j:>3}: volume = {vol:.6} (surplus {:+.6}), width gauge = {gauge:.4}",
            vol - flat
        );
    }
    println!("the bubble never deflates: the volume hypothesis fails by a full sphere");
    Ok(())
}
