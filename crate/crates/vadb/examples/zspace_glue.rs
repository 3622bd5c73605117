//! Builds the glued estimate space for one blow-up member: selects the
//! good set, prices the neck from the measured distortion, and probes
//! distances across the two copies.

use vadb::families::{FamilyKind, FamilySpec};
use vadb::manifold::ModelManifold;
use vadb::measure::{boundary_area, volume};
use vadb::mesh::build_mesh_with;
use vadb::verify::{flat_bound, select_good_set, BoundGlobals, FlatBoundInputs, SamplePlan};
use vadb::zspace::{build_zspace, default_levels};

fn main() -> vadb::Result<()> {
    let mut spec = FamilySpec::new(FamilyKind::DiskBlowup, 2);
    spec.alpha = Some(0.25);
    let j = 8;
    let base = spec.base_metric()?;
    let member = spec.metric(j)?;
    let mesh = build_mesh_with(
        ModelManifold::unit_disk(),
        0.1,
        3.0,
        &spec.mesh_features(j),
        7,
    )?;
    println!("mesh: {} vertices", mesh.vertex_count());

    let diam = mesh.diameter_estimate(&base, 12)?;
    let globals = BoundGlobals {
        diam: diam.upper,
        vol: volume(&member, 5)?.value,
        area: boundary_area(&member, 5)?.value,
    };
    let good = select_good_set(
        &mesh,
        &base,
        &member,
        1.0,
        &spec.anchor(),
        &spec.candidate_widths(j),
        &SamplePlan { pairs: 160, seed: 7 },
        0.05,
        5,
        &globals,
    )?;
    let region = good.region.as_ref().expect("certified region");
    println!(
        "good set: {} of {} vertices kept, cut width {:.4}, delta_hat = {:.6}",
        good.vertex_count,
        mesh.vertex_count(),
        region.width,
        good.delta_hat
    );

    let h_j = flat_bound(&FlatBoundInputs {
        excluded_volume: good.excluded_volume,
        delta: good.delta_hat,
        diam: globals.diam,
        vol: globals.vol,
        area: globals.area,
    })?
    .h;
    let m = default_levels(h_j, mesh.h());
    let z = build_zspace(&mesh, &base, &member, &good.vertices, h_j, m)?;
    println!(
        "glued space: {} vertices over {} base, neck height {:.6}, {} neck rows",
        z.vertex_count(),
        z.base_count(),
        z.h_j(),
        z.rows()
    );

    // Climbing from floor to ceiling over a kept vertex costs at most the
    // neck height; distances inside the floor copy are untouched.
    let x = good.vertices[0];
    let climb = z.distance(z.embed_floor(x)?, z.embed_ceiling(x)?)?;
    println!("vertical hop over kept vertex {x}: {climb:.6}");

    let y = good.vertices[good.vertices.len() / 2];
    let floor_pair = z.distance(z.embed_floor(x)?, z.embed_floor(y)?)?;
    let direct = mesh.geodesic_distance(&base, x, y)?;
    println!("floor pair ({x}, {y}): glued {floor_pair:.6}, direct {direct:.6}");

    let ceil_pair = z.distance(z.embed_ceiling(x)?, z.embed_ceiling(y)?)?;
    let member_direct = mesh.geodesic_distance(&member, x, y)?;
    println!("ceiling pair ({x}, {y}): glued {ceil_pair:.6}, direct {member_direct:.6}");
    Ok(())
}
