//! The glued comparison space for two metrics on one mesh.
//!
//! Given a mesh carrying metrics `g_0` and `g_j`, the space stacks three
//! blocks: a floor copy of the mesh weighted by `g_0`, a neck made of
//! `m` horizontal levels of the mesh weighted by `g_j` and joined by
//! vertical edges of total height `h_j`, and a ceiling copy weighted by
//! `g_j`. Every vertex is welded to the neck bottom; only vertices of the
//! chosen good set are welded to the neck top. Distances in the resulting
//! graph can only shrink relative to either block, which is what makes the
//! construction useful: a small floor-to-ceiling distance on the good set
//! witnesses how close the two metrics are away from their bad region.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::manifold::ModelManifold;
use crate::mesh::MeshGraph;
use crate::metric::ConformalMetric;
use crate::{Error, Result};

/// Which block of the glued space a vertex belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum ZBlock {
    /// The copy carrying the reference metric.
    Floor,
    /// Interior stack level, numbered from 1 just above the floor.
    Neck { level: u32 },
    /// The copy carrying the compared metric.
    Ceiling,
}

/// Weighted graph of the glued space. Immutable after construction;
/// distance queries may run concurrently.
#[derive(Debug, Clone)]
pub struct ZSpaceGraph {
    manifold: ModelManifold,
    mesh_h: f64,
    mesh_kappa: f64,
    mesh_seed: u64,
    base_count: usize,
    /// Materialized stack rows above the floor (zero when `h_j = 0`).
    rows: usize,
    h_j: f64,
    step: f64,
    good: Vec<bool>,
    /// Good set plus its one-ring mesh neighbors: the welding closure.
    closure: Vec<bool>,
    positions: Vec<Vec<f64>>,
    boundary: Vec<bool>,
    adjacency: Vec<Vec<(u32, f64)>>,
    warning: Option<String>,
}

/// Default neck level count: enough levels that vertical spacing roughly
/// matches the mesh spacing, and never fewer than two.
pub fn default_levels(h_j: f64, h: f64) -> usize {
    if h_j <= 0.0 || h <= 0.0 {
        return 2;
    }
    ((h_j / h).ceil() as usize).max(2)
}

/// Builds the glued space over `mesh` with floor metric `g0`, ceiling and
/// neck metric `gj`, the good vertex set `good`, neck height `h_j`, and
/// `m` neck levels. A zero height skips the neck entirely and welds the
/// good set's ceiling vertices straight onto the floor.
pub fn build_zspace(
    mesh: &MeshGraph,
    g0: &ConformalMetric,
    gj: &ConformalMetric,
    good: &[u32],
    h_j: f64,
    m: usize,
) -> Result<ZSpaceGraph> {
    if !(h_j.is_finite() && h_j >= 0.0) {
        return Err(Error::param("h_j", "must be finite and nonnegative"));
    }
    if h_j > 0.0 && m < 2 {
        return Err(Error::param("m", "need at least two levels when h_j > 0"));
    }
    let n = mesh.vertex_count();
    let mut good_flags = vec![false; n];
    for &x in good {
        if x as usize >= n {
            return Err(Error::Usage(format!(
                "good-set vertex {x} is out of range (mesh has {n})"
            )));
        }
        good_flags[x as usize] = true;
    }
    let mut closure = good_flags.clone();
    for &(a, b) in mesh.edges() {
        if good_flags[a as usize] {
            closure[b as usize] = true;
        }
        if good_flags[b as usize] {
            closure[a as usize] = true;
        }
    }

    let w0 = mesh.edge_weights(g0)?;
    let wj = mesh.edge_weights(gj)?;
    let rows = if h_j > 0.0 { m - 1 } else { 0 };
    let total = n * (2 + rows);
    let ceiling_base = n * (1 + rows);
    let mut adjacency: Vec<Vec<(u32, f64)>> = vec![Vec::new(); total];
    let add = |adj: &mut Vec<Vec<(u32, f64)>>, a: usize, b: usize, w: f64| {
        adj[a].push((b as u32, w));
        adj[b].push((a as u32, w));
    };

    for (e, &(a, b)) in mesh.edges().iter().enumerate() {
        add(&mut adjacency, a as usize, b as usize, w0[e]);
        for level in 1..=rows {
            add(
                &mut adjacency,
                n * level + a as usize,
                n * level + b as usize,
                wj[e],
            );
        }
        add(
            &mut adjacency,
            ceiling_base + a as usize,
            ceiling_base + b as usize,
            wj[e],
        );
    }

    let step = if rows > 0 { h_j / rows as f64 } else { 0.0 };
    for x in 0..n {
        for level in 0..rows {
            let lo = if level == 0 { x } else { n * level + x };
            add(&mut adjacency, lo, n * (level + 1) + x, step);
        }
    }

    for (x, &g) in good_flags.iter().enumerate() {
        if g {
            let top = if rows > 0 { n * rows + x } else { x };
            add(&mut adjacency, top, ceiling_base + x, 0.0);
        }
    }

    let warning = if h_j > 0.0 && good.is_empty() {
        Some("good set is empty: the ceiling block hangs off the neck".to_string())
    } else {
        None
    };

    Ok(ZSpaceGraph {
        manifold: mesh.manifold().clone(),
        mesh_h: mesh.h(),
        mesh_kappa: mesh.kappa(),
        mesh_seed: mesh.seed(),
        base_count: n,
        rows,
        h_j,
        step,
        good: good_flags,
        closure,
        positions: mesh.vertices().to_vec(),
        boundary: (0..n as u32).map(|v| mesh.is_boundary(v)).collect(),
        adjacency,
        warning,
    })
}

impl ZSpaceGraph {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Vertices in one copy of the mesh.
    pub fn base_count(&self) -> usize {
        self.base_count
    }

    pub fn h_j(&self) -> f64 {
        self.h_j
    }

    /// Height of one vertical edge, `h_j / (m - 1)`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Neck levels above the floor.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    pub fn good_flags(&self) -> &[bool] {
        &self.good
    }

    /// The welding closure: good vertices plus their one-ring neighbors.
    pub fn closure_flags(&self) -> &[bool] {
        &self.closure
    }

    fn check_mesh_vertex(&self, x: u32) -> Result<()> {
        if (x as usize) < self.base_count {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "mesh vertex {x} is out of range ({} per copy)",
                self.base_count
            )))
        }
    }

    fn check_vertex(&self, z: u32) -> Result<()> {
        if (z as usize) < self.adjacency.len() {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "vertex {z} is out of range (glued space has {})",
                self.adjacency.len()
            )))
        }
    }

    /// Floor image of a mesh vertex.
    pub fn embed_floor(&self, x: u32) -> Result<u32> {
        self.check_mesh_vertex(x)?;
        Ok(x)
    }

    /// Ceiling-side image of a mesh vertex: vertices outside the welding
    /// closure map to the ceiling copy, vertices inside it map to the top
    /// neck level (which the good set is welded onto).
    pub fn embed_ceiling(&self, x: u32) -> Result<u32> {
        self.check_mesh_vertex(x)?;
        if self.closure[x as usize] {
            Ok(if self.rows > 0 {
                (self.base_count * self.rows) as u32 + x
            } else {
                x
            })
        } else {
            Ok((self.base_count * (1 + self.rows)) as u32 + x)
        }
    }

    /// Ceiling-copy vertex of a mesh vertex, regardless of welding.
    pub fn ceiling_vertex(&self, x: u32) -> Result<u32> {
        self.check_mesh_vertex(x)?;
        Ok((self.base_count * (1 + self.rows)) as u32 + x)
    }

    /// Neck vertex at a level (0 is the floor itself).
    pub fn neck_vertex(&self, x: u32, level: usize) -> Result<u32> {
        self.check_mesh_vertex(x)?;
        if level > self.rows {
            return Err(Error::Usage(format!(
                "level {level} exceeds the {} neck rows",
                self.rows
            )));
        }
        Ok((self.base_count * level) as u32 + x)
    }

    pub fn block_of(&self, z: u32) -> Result<ZBlock> {
        self.check_vertex(z)?;
        let row = z as usize / self.base_count;
        Ok(if row == 0 {
            ZBlock::Floor
        } else if row <= self.rows {
            ZBlock::Neck { level: row as u32 }
        } else {
            ZBlock::Ceiling
        })
    }

    /// Mesh vertex underlying a glued-space vertex.
    pub fn underlying(&self, z: u32) -> Result<u32> {
        self.check_vertex(z)?;
        Ok((z as usize % self.base_count) as u32)
    }

    /// Shortest-path distance in the glued graph. Unreachable pairs get
    /// the infinity sentinel, never a finite stand-in.
    pub fn distance(&self, a: u32, b: u32) -> Result<f64> {
        self.check_vertex(b)?;
        Ok(self.distances_from(a)?[b as usize])
    }

    /// Distances from one vertex to every vertex.
    pub fn distances_from(&self, a: u32) -> Result<Vec<f64>> {
        self.check_vertex(a)?;
        let mut dist = vec![f64::INFINITY; self.adjacency.len()];
        dist[a as usize] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapCost(0.0, a));
        while let Some(HeapCost(d, u)) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            for &(v, w) in &self.adjacency[u as usize] {
                let nd = d + w;
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    heap.push(HeapCost(nd, v));
                }
            }
        }
        Ok(dist)
    }

    /// Writes the glued graph as JSON: per-vertex position, boundary flag,
    /// and block annotation, plus weighted edges and the good set.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut edges = Vec::new();
        for (a, nbrs) in self.adjacency.iter().enumerate() {
            for &(b, w) in nbrs {
                if (a as u32) < b {
                    edges.push((a as u32, b, w));
                }
            }
        }
        let file = ZSpaceFile {
            manifold: self.manifold.clone(),
            h: self.mesh_h,
            kappa: self.mesh_kappa,
            seed: self.mesh_seed,
            h_j: self.h_j,
            step: self.step,
            levels: self.rows + 1,
            closure_one_ring: true,
            positions: (0..self.adjacency.len())
                .map(|z| self.positions[z % self.base_count].clone())
                .collect(),
            boundary: (0..self.adjacency.len())
                .map(|z| self.boundary[z % self.base_count])
                .collect(),
            blocks: (0..self.adjacency.len())
                .map(|z| self.block_of(z as u32).unwrap())
                .collect(),
            edges,
            good: self
                .good
                .iter()
                .enumerate()
                .filter(|(_, &g)| g)
                .map(|(x, _)| x as u32)
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

#[derive(Serialize, Deserialize)]
struct ZSpaceFile {
    manifold: ModelManifold,
    h: f64,
    kappa: f64,
    seed: u64,
    h_j: f64,
    step: f64,
    levels: usize,
    closure_one_ring: bool,
    positions: Vec<Vec<f64>>,
    boundary: Vec<bool>,
    blocks: Vec<ZBlock>,
    edges: Vec<(u32, u32, f64)>,
    good: Vec<u32>,
}

/// Min-heap entry ordered by cost.
#[derive(PartialEq)]
struct HeapCost(f64, u32);

impl Eq for HeapCost {}

impl Ord for HeapCost {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::mesh::build_mesh;

    fn disk_mesh(h: f64) -> MeshGraph {
        build_mesh(ModelManifold::unit_disk(), h, 2.5).unwrap()
    }

    fn vertices_at_depth(mesh: &MeshGraph, depth: f64) -> Vec<u32> {
        let m = ModelManifold::unit_disk();
        (0..mesh.vertex_count() as u32)
            .filter(|&v| {
                m.boundary_distance(&mesh.vertices()[v as usize]).unwrap() >= depth
            })
            .collect()
    }

    #[test]
    fn full_identity_gluing_collapses_the_copies() {
        let mesh = disk_mesh(0.3);
        let base = ConformalMetric::base(ModelManifold::unit_disk());
        let all: Vec<u32> = (0..mesh.vertex_count() as u32).collect();
        let z = build_zspace(&mesh, &base, &base, &all, 0.0, 2).unwrap();
        assert!(z.warning().is_none());
        assert_eq!(z.vertex_count(), 2 * mesh.vertex_count());
        assert_eq!(z.rows(), 0);
        for x in [0u32, 5, 17] {
            let lo = z.embed_floor(x).unwrap();
            let hi = z.ceiling_vertex(x).unwrap();
            assert_eq!(z.distance(lo, hi).unwrap(), 0.0);
            assert_eq!(z.embed_ceiling(x).unwrap(), lo);
        }
        let d0 = mesh.geodesic_distance(&base, 0, 17).unwrap();
        let dz = z.distance(0, 17).unwrap();
        assert!((d0 - dz).abs() < 1e-12);
    }

    #[test]
    fn vertical_paths_cost_the_neck_height() {
        let mesh = disk_mesh(0.3);
        let base = ConformalMetric::base(ModelManifold::unit_disk());
        let gj = families::disk_blowup(2, 0.25, 16).unwrap();
        let good = vertices_at_depth(&mesh, 2.0 / 16.0);
        assert!(!good.is_empty());
        let z = build_zspace(&mesh, &base, &gj, &good, 0.25, 4).unwrap();
        assert_eq!(z.rows(), 3);
        assert_eq!(z.step(), 0.25 / 3.0);
        for x in &good[..4.min(good.len())] {
            let lo = z.embed_floor(*x).unwrap();
            let hi = z.ceiling_vertex(*x).unwrap();
            let d = z.distance(lo, hi).unwrap();
            assert!((d - 0.25).abs() < 1e-12, "vertical cost {d}");
            let top = z.embed_ceiling(*x).unwrap();
            assert_eq!(z.block_of(top).unwrap(), ZBlock::Neck { level: 3 });
            assert!(z.distance(lo, top).unwrap() <= 0.25 + 1e-9);
        }
        // A deep good set on a finer mesh leaves room outside the one-ring
        // closure, so all three embedding cases are exercised.
        let mesh = disk_mesh(0.2);
        let deep = vertices_at_depth(&mesh, 0.6);
        assert!(!deep.is_empty());
        let z = build_zspace(&mesh, &base, &gj, &deep, 0.25, 4).unwrap();
        let fringe = (0..mesh.vertex_count())
            .find(|&x| z.closure_flags()[x] && !z.good_flags()[x])
            .unwrap();
        let img = z.embed_ceiling(fringe as u32).unwrap();
        assert_eq!(z.block_of(img).unwrap(), ZBlock::Neck { level: 3 });
        let outside = (0..mesh.vertex_count())
            .find(|&x| !z.closure_flags()[x])
            .unwrap();
        let img = z.embed_ceiling(outside as u32).unwrap();
        assert_eq!(z.block_of(img).unwrap(), ZBlock::Ceiling);
    }

    #[test]
    fn good_set_pairs_route_through_the_floor() {
        let mesh = disk_mesh(0.25);
        let base = ConformalMetric::base(ModelManifold::unit_disk());
        let gj = families::disk_blowup(2, 0.25, 16).unwrap();
        let good = vertices_at_depth(&mesh, 2.0 / 16.0);
        let h_j = 0.2;
        let z = build_zspace(&mesh, &base, &gj, &good, h_j, default_levels(h_j, 0.25)).unwrap();
        let field = mesh.distance_field(&base, good[0]).unwrap();
        let from = z.distances_from(z.embed_floor(good[0]).unwrap()).unwrap();
        for &q in good.iter().step_by(7) {
            let d0 = field.distance_to(q);
            let dz = from[z.embed_ceiling(q).unwrap() as usize];
            assert!(dz <= d0 + 2.0 * h_j + 1e-9, "dz {dz} vs d0 {d0}");
            assert!(dz >= d0 - 2.0 * h_j - 1e-9);
        }
    }

    #[test]
    fn empty_good_set_disconnects_the_ceiling() {
        let mesh = disk_mesh(0.3);
        let base = ConformalMetric::base(ModelManifold::unit_disk());
        let z = build_zspace(&mesh, &base, &base, &[], 0.3, 2).unwrap();
        assert!(z.warning().is_some());
        let d = z
            .distance(z.embed_floor(0).unwrap(), z.ceiling_vertex(0).unwrap())
            .unwrap();
        assert!(d.is_infinite());
        let dc = z
            .distance(z.ceiling_vertex(0).unwrap(), z.ceiling_vertex(5).unwrap())
            .unwrap();
        assert!(dc.is_finite());
        let df = z.distance(0, 5).unwrap();
        assert!(df.is_finite());
    }

    #[test]
    fn gluing_never_increases_block_distances() {
        let mesh = disk_mesh(0.25);
        let base = ConformalMetric::base(ModelManifold::unit_disk());
        let gj = families::disk_blowup(2, 0.25, 8).unwrap();
        let good = vertices_at_depth(&mesh, 0.25);
        let z = build_zspace(&mesh, &base, &gj, &good, 0.15, 3).unwrap();
        let pairs = [(0u32, 9u32), (3, 21), (7, 14)];
        for (x, y) in pairs {
            let d0 = mesh.geodesic_distance(&base, x, y).unwrap();
            let dz0 = z
                .distance(z.embed_floor(x).unwrap(), z.embed_floor(y).unwrap())
                .unwrap();
            assert!(dz0 <= d0 + 1e-12);
            assert!((dz0 - d0).abs() < 1e-9, "floor shortcut {dz0} vs {d0}");
            let dj = mesh.geodesic_distance(&gj, x, y).unwrap();
            let dzj = z
                .distance(z.ceiling_vertex(x).unwrap(), z.ceiling_vertex(y).unwrap())
                .unwrap();
            assert!(dzj <= dj + 1e-12);
            let sym = z
                .distance(z.ceiling_vertex(y).unwrap(), z.ceiling_vertex(x).unwrap())
                .unwrap();
            assert!((dzj - sym).abs() < 1e-12);
        }
    }

    #[test]
    fn distances_match_a_brute_force_oracle() {
        let mesh = build_mesh(ModelManifold::unit_disk(), 0.15, 2.2).unwrap();
        assert!(mesh.vertex_count() >= 150, "{}", mesh.vertex_count());
        let base = ConformalMetric::base(ModelManifold::unit_disk());
        let gj = families::disk_blowup(2, 0.25, 8).unwrap();
        let good = vertices_at_depth(&mesh, 0.25);
        let h_j = 0.15;
        let z = build_zspace(&mesh, &base, &gj, &good, h_j, 2).unwrap();

        let n = z.vertex_count();
        let mut oracle = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in oracle.iter_mut().enumerate() {
            row[i] = 0.0;
            for &(j, w) in &z.adjacency[i] {
                row[j as usize] = row[j as usize].min(w);
            }
        }
        for k in 0..n {
            for i in 0..n {
                let dik = oracle[i][k];
                if !dik.is_finite() {
                    continue;
                }
                for j in 0..n {
                    let nd = dik + oracle[k][j];
                    if nd < oracle[i][j] {
                        oracle[i][j] = nd;
                    }
                }
            }
        }

        let sources = [0u32, (n / 3) as u32, (2 * n / 3) as u32, (n - 1) as u32];
        for &s in &sources {
            let dist = z.distances_from(s).unwrap();
            for t in (0..n).step_by(11) {
                assert!(
                    (dist[t] - oracle[s as usize][t]).abs() < 1e-9,
                    "source {s} target {t}: {} vs {}",
                    dist[t],
                    oracle[s as usize][t]
                );
            }
        }

        let field = mesh.distance_field(&base, good[0]).unwrap();
        for &q in good.iter().step_by(5) {
            let mixed = z
                .distance(z.embed_floor(good[0]).unwrap(), z.ceiling_vertex(q).unwrap())
                .unwrap();
            assert!(mixed.is_finite());
            let d0 = field.distance_to(q);
            assert!(mixed >= d0 - 2.0 * h_j - 1e-9);
            if q == good[0] {
                assert!((mixed - h_j).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn good_set_distortion_stays_below_its_certificate() {
        let mesh = disk_mesh(0.2);
        let base = ConformalMetric::base(ModelManifold::unit_disk());
        let gj = families::disk_blowup(2, 0.25, 16).unwrap();
        let good = vertices_at_depth(&mesh, 2.0 / 16.0);

        let mut sup = 0.0f64;
        let sample: Vec<u32> = good.iter().copied().step_by(9).collect();
        for &p in &sample {
            let f0 = mesh.distance_field(&base, p).unwrap();
            let fj = mesh.distance_field(&gj, p).unwrap();
            for &q in &sample {
                sup = sup.max(fj.distance_to(q) - f0.distance_to(q));
            }
        }
        let delta = sup / 2.0;
        let diam = 2.2;
        let h_j = (2.0 * delta * diam + delta * delta).sqrt();
        let z = build_zspace(&mesh, &base, &gj, &good, h_j, default_levels(h_j, 0.2)).unwrap();
        for &p in &sample {
            let fj = mesh.distance_field(&gj, p).unwrap();
            let from = z.distances_from(z.embed_ceiling(p).unwrap()).unwrap();
            for &q in &sample {
                let excess = fj.distance_to(q) - from[z.embed_ceiling(q).unwrap() as usize];
                assert!(
                    excess <= 2.0 * delta + 1e-9,
                    "excess {excess} vs certificate {}",
                    2.0 * delta
                );
            }
        }
    }

    #[test]
    fn export_annotates_blocks_and_weights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.json");
        let mesh = disk_mesh(0.35);
        let base = ConformalMetric::base(ModelManifold::unit_disk());
        let good = vertices_at_depth(&mesh, 0.3);
        let z = build_zspace(&mesh, &base, &base, &good, 0.1, 3).unwrap();
        z.save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(
            v["positions"].as_array().unwrap().len(),
            z.vertex_count()
        );
        assert_eq!(v["blocks"].as_array().unwrap().len(), z.vertex_count());
        assert_eq!(v["blocks"][0]["block"], "floor");
        assert_eq!(v["closure_one_ring"], true);
        assert_eq!(v["levels"], 3);
        let edges = v["edges"].as_array().unwrap();
        let zero_welds = edges
            .iter()
            .filter(|e| e[2].as_f64().unwrap() == 0.0)
            .count();
        assert_eq!(zero_welds, good.len());
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let mesh = disk_mesh(0.35);
        let base = ConformalMetric::base(ModelManifold::unit_disk());
        assert!(build_zspace(&mesh, &base, &base, &[0], -0.1, 2).is_err());
        assert!(build_zspace(&mesh, &base, &base, &[0], 0.5, 1).is_err());
        let huge = mesh.vertex_count() as u32 + 7;
        assert!(build_zspace(&mesh, &base, &base, &[huge], 0.5, 2).is_err());
        assert_eq!(default_levels(0.0, 0.1), 2);
        assert_eq!(default_levels(0.45, 0.1), 5);
        assert_eq!(default_levels(0.05, 0.1), 2);
    }
}
