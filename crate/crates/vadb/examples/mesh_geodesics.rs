//! Builds a point-cloud geodesic graph on the unit disk and checks it
//! against closed-form flat distances, then shows how a rim blow-up
//! reroutes shortest paths around the expensive band.

use vadb::families::{FamilyKind, FamilySpec};
use vadb::manifold::ModelManifold;
use vadb::mesh::build_mesh_with;
use vadb::metric::ConformalMetric;

fn main() -> vadb::Result<()> {
    let mut spec = FamilySpec::new(FamilyKind::DiskBlowup, 2);
    spec.alpha = Some(0.25);
    let j = 8;
    let mesh = build_mesh_with(
        ModelManifold::unit_disk(),
        0.05,
        3.0,
        &spec.mesh_features(j),
        7,
    )?;
    println!(
        "mesh: {} vertices, {} edges, grading h = {}",
        mesh.vertex_count(),
        mesh.edge_count(),
        mesh.h()
    );

    let base = ConformalMetric::base(ModelManifold::unit_disk());
    let west = mesh.vertex_near(&[-1.0, 0.0])?;
    let east = mesh.vertex_near(&[1.0, 0.0])?;
    let d = mesh.geodesic_distance(&base, west, east)?;
    println!("flat rim-to-rim distance = {d:.5} (continuum 2, stencil overshoot {:.2}%)",
        (d / 2.0 - 1.0) * 100.0
    );

    let diam = mesh.diameter_estimate(&base, 12)?;
    println!(
        "diameter estimate: lower {:.5}, upper {:.5}",
        diam.lower, diam.upper
    );

    // Under the blow-up the same endpoints pay a premium for crossing the
    // rim band twice; interior detours cannot dodge it because the band
    // wraps the whole boundary.
    let member = spec.metric(j)?;
    let dj = mesh.geodesic_distance(&member, west, east)?;
    println!("blown-up rim-to-rim distance at j = {j}: {dj:.5} (premium {:+.5})", dj - d);

    let (len, path) = mesh.shortest_path(&member, west, east)?;
    let deepest = path
        .iter()
        .map(|&v| {
            let p = &mesh.vertices()[v as usize];
            1.0 - (p[0] * p[0] + p[1] * p[1]).sqrt()
        })
        .fold(0.0f64, f64::max);
    println!(
        "witness path: {} vertices, length {len:.5}, deepest point at boundary distance {deepest:.3}",
        path.len()
    );
    Ok(())
}
