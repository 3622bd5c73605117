//! Point-cloud graphs on model manifolds and metric-weighted shortest
//! paths over them.
//!
//! Vertices come from structured rings (boundary circles, requested feature
//! rings) plus a jittered lattice filling the rest of the manifold at the
//! target spacing, so the vertex set is an h-net. Edges connect every pair
//! of vertices within base distance `kappa * h`; a dense stencil keeps the
//! graph metric close to the continuum one in every direction. Edge weights
//! under a conformal metric are curve lengths of the base geodesic chords
//! and are cached per metric.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::{Arc, RwLock};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifold::ModelManifold;
use crate::metric::ConformalMetric;
use crate::{Error, Result};

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 7;

/// Default landmark count for diameter estimation.
pub const DEFAULT_LANDMARKS: usize = 32;

/// Structured vertex groups inserted exactly, so that meshes resolve the
/// thin layers a metric cares about instead of straddling them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "feature", rename_all = "snake_case")]
pub enum MeshFeature {
    /// Ring (n=2) or shell (n=3) at a fixed distance from the boundary.
    BoundaryOffsetRing { offset: f64 },
    /// Sphere ring (n=2) or shell (n=3) at a fixed colatitude.
    ColatitudeRing { colat: f64 },
    /// Circle of a given radius around a point, flat manifolds, n=2 only.
    PointRing { center: Vec<f64>, radius: f64 },
    /// Individual chart points to pin as vertices.
    Points { points: Vec<Vec<f64>> },
}

/// An immutable vertex-and-edge graph over a model manifold.
#[derive(Debug)]
pub struct MeshGraph {
    manifold: ModelManifold,
    h: f64,
    kappa: f64,
    seed: u64,
    vertices: Vec<Vec<f64>>,
    boundary: Vec<bool>,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<(u32, u32)>>,
    weights: RwLock<HashMap<String, Arc<Vec<f64>>>>,
}

impl Clone for MeshGraph {
    fn clone(&self) -> Self {
        MeshGraph {
            manifold: self.manifold.clone(),
            h: self.h,
            kappa: self.kappa,
            seed: self.seed,
            vertices: self.vertices.clone(),
            boundary: self.boundary.clone(),
            edges: self.edges.clone(),
            adjacency: self.adjacency.clone(),
            weights: RwLock::new(self.weights.read().unwrap().clone()),
        }
    }
}

/// Distances from one source vertex under one metric.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub source: u32,
    pub distances: Vec<f64>,
    pub metric_token: String,
    parents: Vec<u32>,
}

impl DistanceField {
    pub fn distance_to(&self, v: u32) -> f64 {
        self.distances[v as usize]
    }

    /// Vertex sequence from the source to `v`, inclusive; `None` when `v`
    /// is unreachable.
    pub fn path_to(&self, v: u32) -> Option<Vec<u32>> {
        if !self.distances[v as usize].is_finite() {
            return None;
        }
        let mut path = vec![v];
        let mut cur = v;
        while cur != self.source {
            cur = self.parents[cur as usize];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }
}

/// Diameter bracket from landmark sampling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiameterEstimate {
    /// Largest distance seen from any landmark: a true lower bound.
    pub lower: f64,
    /// Lower bound plus the stencil correction `2 * h * kappa`.
    pub upper: f64,
}

/// Builds a mesh with no feature rings and the default seed.
pub fn build_mesh(manifold: ModelManifold, h: f64, kappa: f64) -> Result<MeshGraph> {
    build_mesh_with(manifold, h, kappa, &[], DEFAULT_SEED)
}

/// Builds a mesh whose vertex set is an h-net of the manifold: boundary
/// circles sampled exactly, requested feature rings inserted exactly, and a
/// seeded jittered lattice in between. Edges pair vertices within base
/// distance `kappa * h`.
pub fn build_mesh_with(
    manifold: ModelManifold,
    h: f64,
    kappa: f64,
    features: &[MeshFeature],
    seed: u64,
) -> Result<MeshGraph> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", "must be positive and finite"));
    }
    if !(kappa.is_finite() && kappa >= 2.0) {
        return Err(Error::param("kappa", "must be at least 2"));
    }
    let mut gen = VertexGen {
        manifold: &manifold,
        h,
        rng: ChaCha8Rng::seed_from_u64(seed),
        vertices: Vec::new(),
        boundary: Vec::new(),
        special_radii: Vec::new(),
        special_colats: Vec::new(),
        point_rings: Vec::new(),
    };
    gen.boundary_rings();
    gen.feature_rings(features)?;
    gen.lattice()?;
    gen.pinned_points(features)?;
    let (vertices, boundary) = gen.dedup();

    let edges = find_edges(&manifold, &vertices, kappa * h);
    let mut adjacency = vec![Vec::new(); vertices.len()];
    for (id, &(a, b)) in edges.iter().enumerate() {
        adjacency[a as usize].push((b, id as u32));
        adjacency[b as usize].push((a, id as u32));
    }
    let mesh = MeshGraph {
        manifold,
        h,
        kappa,
        seed,
        vertices,
        boundary,
        edges,
        adjacency,
        weights: RwLock::new(HashMap::new()),
    };
    if !mesh.is_connected() {
        return Err(Error::Construction(format!(
            "spacing h = {h} leaves the mesh disconnected; decrease h or increase kappa"
        )));
    }
    Ok(mesh)
}

struct VertexGen<'a> {
    manifold: &'a ModelManifold,
    h: f64,
    rng: ChaCha8Rng,
    vertices: Vec<Vec<f64>>,
    boundary: Vec<bool>,
    special_radii: Vec<f64>,
    special_colats: Vec<f64>,
    point_rings: Vec<(Vec<f64>, f64)>,
}

impl VertexGen<'_> {
    fn push(&mut self, p: Vec<f64>, on_boundary: bool) {
        self.vertices.push(p);
        self.boundary.push(on_boundary);
    }

    /// Circle of chart radius `r`, sampled exactly with spacing about
    /// `0.9 h` (n=2), or a Fibonacci shell (n=3).
    fn radius_ring(&mut self, r: f64, rotate: bool, on_boundary: bool) {
        let spacing = 0.9 * self.h;
        let phase = if rotate { self.rng.gen::<f64>() } else { 0.0 };
        if self.manifold.dim() == 2 {
            let m = ((std::f64::consts::TAU * r / spacing).ceil() as usize).max(6);
            for k in 0..m {
                let t = std::f64::consts::TAU * (k as f64 + phase) / m as f64;
                self.push(vec![r * t.cos(), r * t.sin()], on_boundary);
            }
        } else {
            let m = ((4.0 * std::f64::consts::PI * r * r / (spacing * spacing)).ceil() as usize)
                .max(12);
            for (z, phi) in fibonacci_sphere(m, phase) {
                let s = (1.0 - z * z).max(0.0).sqrt();
                self.push(
                    vec![r * s * phi.cos(), r * s * phi.sin(), r * z],
                    on_boundary,
                );
            }
        }
        self.special_radii.push(r);
    }

    /// Sphere ring at fixed colatitude (n=2) or the corresponding shell
    /// (n=3, first chart coordinate fixed).
    fn colat_ring(&mut self, colat: f64, rotate: bool) {
        let spacing = 0.9 * self.h;
        let phase = if rotate { self.rng.gen::<f64>() } else { 0.0 };
        if self.manifold.dim() == 2 {
            let m = ((std::f64::consts::TAU * colat.sin() / spacing).ceil() as usize).max(6);
            for k in 0..m {
                let t = std::f64::consts::TAU * (k as f64 + phase) / m as f64;
                self.push(vec![colat, t.rem_euclid(std::f64::consts::TAU)], false);
            }
        } else {
            let s = colat.sin();
            let m = ((4.0 * std::f64::consts::PI * s * s / (spacing * spacing)).ceil() as usize)
                .max(12);
            for (z, phi) in fibonacci_sphere(m, phase) {
                let theta = z.clamp(-1.0, 1.0).acos();
                self.push(
                    vec![colat, theta, phi.rem_euclid(std::f64::consts::TAU)],
                    false,
                );
            }
        }
        self.special_colats.push(colat);
    }

    fn boundary_rings(&mut self) {
        match self.manifold {
            ModelManifold::Disk { radius, .. } => self.radius_ring(*radius, false, true),
            ModelManifold::Annulus { r_in, r_out, .. } => {
                self.radius_ring(*r_in, false, true);
                self.radius_ring(*r_out, false, true);
            }
            _ => {}
        }
    }

    fn feature_rings(&mut self, features: &[MeshFeature]) -> Result<()> {
        for f in features {
            match (f, self.manifold) {
                (
                    MeshFeature::BoundaryOffsetRing { offset },
                    ModelManifold::Disk { radius, .. },
                ) => {
                    let r = radius - offset;
                    if !(*offset > 0.0 && r > 0.1 * self.h) {
                        return Err(Error::param("offset", "ring must sit inside the disk"));
                    }
                    self.radius_ring(r, true, false);
                }
                (
                    MeshFeature::BoundaryOffsetRing { offset },
                    ModelManifold::Annulus { r_in, r_out, .. },
                ) => {
                    if !(*offset > 0.0 && 2.0 * offset < r_out - r_in) {
                        return Err(Error::param("offset", "ring must sit inside the annulus"));
                    }
                    self.radius_ring(r_in + offset, true, false);
                    self.radius_ring(r_out - offset, true, false);
                }
                (MeshFeature::ColatitudeRing { colat }, ModelManifold::Sphere { .. }) => {
                    if !(*colat > 0.0 && *colat < std::f64::consts::PI) {
                        return Err(Error::param("colat", "must lie strictly inside (0, pi)"));
                    }
                    self.colat_ring(*colat, true);
                }
                (MeshFeature::PointRing { center, radius }, ModelManifold::Torus { .. })
                | (MeshFeature::PointRing { center, radius }, ModelManifold::Disk { .. }) => {
                    if self.manifold.dim() != 2 {
                        return Err(Error::Usage("point rings support n=2 only".into()));
                    }
                    self.manifold.validate_point(center)?;
                    if !(*radius > 0.0) {
                        return Err(Error::param("radius", "must be positive"));
                    }
                    let m = ((std::f64::consts::TAU * radius / (0.9 * self.h)).ceil() as usize)
                        .max(6);
                    let phase = self.rng.gen::<f64>();
                    for k in 0..m {
                        let t = std::f64::consts::TAU * (k as f64 + phase) / m as f64;
                        let p = vec![
                            center[0] + radius * t.cos(),
                            center[1] + radius * t.sin(),
                        ];
                        let p = self.wrap(p);
                        if self.manifold.validate_point(&p).is_ok() {
                            self.push(p, false);
                        }
                    }
                    self.point_rings.push((center.clone(), *radius));
                }
                (MeshFeature::Points { .. }, _) => {}
                _ => {
                    return Err(Error::Usage(format!(
                        "feature {f:?} does not apply to a {}",
                        self.manifold.kind_name()
                    )))
                }
            }
        }
        Ok(())
    }

    fn pinned_points(&mut self, features: &[MeshFeature]) -> Result<()> {
        for f in features {
            if let MeshFeature::Points { points } = f {
                for p in points {
                    self.manifold.validate_point(p)?;
                    self.push(p.clone(), false);
                }
            }
        }
        Ok(())
    }

    fn wrap(&self, mut p: Vec<f64>) -> Vec<f64> {
        if let ModelManifold::Torus { sides, .. } = self.manifold {
            for (x, side) in p.iter_mut().zip(sides) {
                *x = x.rem_euclid(*side);
            }
        }
        p
    }

    fn near_special_radius(&self, r: f64) -> bool {
        self.special_radii
            .iter()
            .any(|s| (s - r).abs() < 0.4 * self.h)
    }

    fn near_special_colat(&self, c: f64) -> bool {
        self.special_colats
            .iter()
            .any(|s| (s - c).abs() < 0.4 * self.h)
    }

    fn near_point_ring(&self, p: &[f64]) -> bool {
        self.point_rings.iter().any(|(center, radius)| {
            (self.manifold.point_distance(p, center) - radius).abs() < 0.35 * self.h
        })
    }

    /// Jittered lattice filling the manifold at spacing `h`.
    fn lattice(&mut self) -> Result<()> {
        let h = self.h;
        let jit = 0.15 * h;
        match self.manifold.clone() {
            ModelManifold::Disk { dim, radius } => {
                self.radial_bands(0.0, radius, dim, jit);
                if dim == 3 {
                    self.push(vec![0.0; 3], false);
                }
            }
            ModelManifold::Annulus {
                dim,
                r_in,
                r_out,
            } => {
                self.radial_bands(r_in, r_out, dim, jit);
            }
            ModelManifold::Sphere { dim } => {
                self.push(vec![0.0; dim], false);
                let mut south = vec![0.0; dim];
                south[0] = std::f64::consts::PI;
                self.push(south, false);
                let mut i = 0usize;
                loop {
                    let colat = (i as f64 + 0.5) * h;
                    if colat >= std::f64::consts::PI {
                        break;
                    }
                    i += 1;
                    if self.near_special_colat(colat) {
                        continue;
                    }
                    self.sphere_band(colat, dim, jit);
                }
            }
            ModelManifold::Torus { dim, sides } => {
                self.torus_lattice(&sides, dim, jit);
            }
        }
        Ok(())
    }

    /// Concentric circles (n=2) or shells (n=3) between two radii.
    fn radial_bands(&mut self, lo: f64, hi: f64, dim: usize, jit: f64) {
        let h = self.h;
        let mut i = 0usize;
        loop {
            let r = lo + (i as f64 + 0.5) * h;
            if r >= hi {
                break;
            }
            i += 1;
            if self.near_special_radius(r) {
                continue;
            }
            if dim == 2 {
                let m = ((std::f64::consts::TAU * r / h).round() as usize).max(3);
                let phase = self.rng.gen::<f64>();
                for k in 0..m {
                    let dt = jit / r * (2.0 * self.rng.gen::<f64>() - 1.0);
                    let dr = jit * (2.0 * self.rng.gen::<f64>() - 1.0);
                    let t = std::f64::consts::TAU * (k as f64 + phase) / m as f64 + dt;
                    let rr = (r + dr).clamp(lo + 0.05 * h, hi - 0.05 * h);
                    self.push(vec![rr * t.cos(), rr * t.sin()], false);
                }
            } else {
                let m = ((4.0 * std::f64::consts::PI * r * r / (h * h)).round() as usize).max(6);
                let phase = self.rng.gen::<f64>();
                for (z, phi) in fibonacci_sphere(m, phase) {
                    let dr = jit * (2.0 * self.rng.gen::<f64>() - 1.0);
                    let rr = (r + dr).clamp(lo + 0.05 * h, hi - 0.05 * h);
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    self.push(vec![rr * s * phi.cos(), rr * s * phi.sin(), rr * z], false);
                }
            }
        }
    }

    fn sphere_band(&mut self, colat: f64, dim: usize, jit: f64) {
        let h = self.h;
        if dim == 2 {
            let m = ((std::f64::consts::TAU * colat.sin() / h).round() as usize).max(3);
            let phase = self.rng.gen::<f64>();
            for k in 0..m {
                let dc = jit * (2.0 * self.rng.gen::<f64>() - 1.0);
                let dp = jit / colat.sin().max(0.2) * (2.0 * self.rng.gen::<f64>() - 1.0);
                let c = (colat + dc).clamp(0.05 * h, std::f64::consts::PI - 0.05 * h);
                let t = (std::f64::consts::TAU * (k as f64 + phase) / m as f64 + dp)
                    .rem_euclid(std::f64::consts::TAU);
                self.push(vec![c, t], false);
            }
        } else {
            let s = colat.sin();
            let m = ((4.0 * std::f64::consts::PI * s * s / (h * h)).round() as usize).max(6);
            let phase = self.rng.gen::<f64>();
            for (z, phi) in fibonacci_sphere(m, phase) {
                let dc = jit * (2.0 * self.rng.gen::<f64>() - 1.0);
                let c = (colat + dc).clamp(0.05 * h, std::f64::consts::PI - 0.05 * h);
                self.push(
                    vec![
                        c,
                        z.clamp(-1.0, 1.0).acos(),
                        phi.rem_euclid(std::f64::consts::TAU),
                    ],
                    false,
                );
            }
        }
    }

    fn torus_lattice(&mut self, sides: &[f64], dim: usize, jit: f64) {
        let h = self.h;
        let counts: Vec<usize> = sides
            .iter()
            .map(|l| ((l / h).round() as usize).max(1))
            .collect();
        let steps: Vec<f64> = sides
            .iter()
            .zip(&counts)
            .map(|(l, c)| l / *c as f64)
            .collect();
        let mut index = vec![0usize; dim];
        loop {
            let mut p = Vec::with_capacity(dim);
            let stagger = 0.5 * ((index[dim - 1] % 2) as f64);
            for d in 0..dim {
                let off = if d == 0 { stagger } else { 0.0 };
                let x = (index[d] as f64 + 0.5 + off) * steps[d]
                    + jit * (2.0 * self.rng.gen::<f64>() - 1.0);
                p.push(x.rem_euclid(sides[d]));
            }
            if !self.near_point_ring(&p) {
                self.push(p, false);
            }
            let mut d = 0;
            loop {
                index[d] += 1;
                if index[d] < counts[d] {
                    break;
                }
                index[d] = 0;
                d += 1;
                if d == dim {
                    return;
                }
            }
        }
    }

    /// Drops vertices that coincide with an earlier one (feature rings can
    /// collide with pinned points), merging boundary flags.
    fn dedup(self) -> (Vec<Vec<f64>>, Vec<bool>) {
        let quant = 1e-6;
        let mut seen: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(self.vertices.len());
        let mut boundary: Vec<bool> = Vec::with_capacity(self.vertices.len());
        'outer: for (i, p) in self.vertices.iter().enumerate() {
            let key: Vec<i64> = p.iter().map(|x| (x / quant).round() as i64).collect();
            for dk in neighbor_keys(&key) {
                if let Some(ids) = seen.get(&dk) {
                    for &k in ids {
                        if self.manifold.point_distance(&vertices[k], p) < 1e-7 {
                            boundary[k] = boundary[k] || self.boundary[i];
                            continue 'outer;
                        }
                    }
                }
            }
            seen.entry(key).or_default().push(vertices.len());
            vertices.push(p.clone());
            boundary.push(self.boundary[i]);
        }
        (vertices, boundary)
    }
}

fn neighbor_keys(key: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for &k in key {
        let mut next = Vec::with_capacity(out.len() * 3);
        for prefix in &out {
            for d in -1..=1 {
                let mut v = prefix.clone();
                v.push(k + d);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Evenly distributed points on the unit sphere as (z, azimuth) pairs.
fn fibonacci_sphere(count: usize, phase: f64) -> Vec<(f64, f64)> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let phi = golden * k as f64 + phase * std::f64::consts::TAU;
            (z, phi)
        })
        .collect()
}

/// All vertex pairs within base distance `rho`, found through a uniform
/// cell grid over embedding coordinates (chordal distance bounds geodesic
/// distance from below, so the prefilter never misses a pair).
fn find_edges(manifold: &ModelManifold, vertices: &[Vec<f64>], rho: f64) -> Vec<(u32, u32)> {
    let embedded: Vec<Vec<f64>> = vertices
        .iter()
        .map(|p| match manifold {
            ModelManifold::Sphere { .. } => manifold.sphere_to_vec(p),
            _ => p.clone(),
        })
        .collect();
    let periodic: Option<Vec<f64>> = match manifold {
        ModelManifold::Torus { sides, .. } => Some(sides.clone()),
        _ => None,
    };
    let dim = embedded.first().map_or(0, Vec::len);
    let (origin, cells, cell_size): (Vec<f64>, Vec<i64>, Vec<f64>) = match &periodic {
        Some(sides) => {
            let cells: Vec<i64> = sides.iter().map(|l| ((l / rho).floor() as i64).max(1)).collect();
            let size = sides
                .iter()
                .zip(&cells)
                .map(|(l, c)| l / *c as f64)
                .collect();
            (vec![0.0; dim], cells, size)
        }
        None => {
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            for p in &embedded {
                for d in 0..dim {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
            }
            let cells: Vec<i64> = (0..dim)
                .map(|d| (((hi[d] - lo[d]) / rho).ceil() as i64).max(1))
                .collect();
            (lo, cells, vec![rho; dim])
        }
    };
    let key_of = |p: &[f64]| -> Vec<i64> {
        (0..dim)
            .map(|d| {
                let k = ((p[d] - origin[d]) / cell_size[d]).floor() as i64;
                if periodic.is_some() {
                    k.rem_euclid(cells[d])
                } else {
                    k.clamp(0, cells[d] - 1)
                }
            })
            .collect()
    };
    let mut grid: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
    for (i, p) in embedded.iter().enumerate() {
        grid.entry(key_of(p)).or_default().push(i as u32);
    }
    let mut edges = Vec::new();
    for (i, p) in embedded.iter().enumerate() {
        let key = key_of(p);
        let mut candidates: Vec<u32> = Vec::new();
        for nk in neighbor_keys(&key) {
            let nk: Vec<i64> = if periodic.is_some() {
                nk.iter().zip(&cells).map(|(k, c)| k.rem_euclid(*c)).collect()
            } else {
                nk
            };
            if let Some(ids) = grid.get(&nk) {
                candidates.extend(ids.iter().copied().filter(|&j| j as usize > i));
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        for j in candidates {
            let d = manifold.point_distance(&vertices[i], &vertices[j as usize]);
            if d <= rho && d > 1e-12 {
                edges.push((i as u32, j));
            }
        }
    }
    edges
}

impl MeshGraph {
    pub fn manifold(&self) -> &ModelManifold {
        &self.manifold
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn is_boundary(&self, v: u32) -> bool {
        self.boundary[v as usize]
    }

    pub fn boundary_vertices(&self) -> Vec<u32> {
        (0..self.vertices.len() as u32)
            .filter(|&v| self.boundary[v as usize])
            .collect()
    }

    fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0u32];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u as usize] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.vertices.len()
    }

    fn check_vertex(&self, v: u32) -> Result<()> {
        if (v as usize) < self.vertices.len() {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "vertex {v} is out of range (mesh has {})",
                self.vertices.len()
            )))
        }
    }

    /// Per-edge lengths under the metric, computed once per metric identity
    /// and cached. Lengths are exact curve lengths of the base-geodesic
    /// chords.
    pub fn edge_weights(&self, metric: &ConformalMetric) -> Result<Arc<Vec<f64>>> {
        if metric.manifold() != &self.manifold {
            return Err(Error::Usage(
                "metric and mesh live on different manifolds".into(),
            ));
        }
        let token = metric_token(metric)?;
        if let Some(w) = self.weights.read().unwrap().get(&token) {
            return Ok(Arc::clone(w));
        }
        let lengths: Vec<f64> = self
            .edges
            .par_iter()
            .map(|&(a, b)| {
                metric.curve_length(&[
                    self.vertices[a as usize].clone(),
                    self.vertices[b as usize].clone(),
                ])
            })
            .collect::<Result<Vec<f64>>>()?;
        for (&w, &(a, b)) in lengths.iter().zip(&self.edges) {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Construction(format!(
                    "edge ({a}, {b}) has nonpositive length {w}"
                )));
            }
        }
        let arc = Arc::new(lengths);
        let mut cache = self.weights.write().unwrap();
        Ok(Arc::clone(cache.entry(token).or_insert(arc)))
    }

    /// Distances from `source` to every vertex under the metric.
    pub fn distance_field(&self, metric: &ConformalMetric, source: u32) -> Result<DistanceField> {
        self.check_vertex(source)?;
        let weights = self.edge_weights(metric)?;
        let (distances, parents) = self.dijkstra(&weights, source);
        Ok(DistanceField {
            source,
            distances,
            metric_token: metric_token(metric)?,
            parents,
        })
    }

    /// Shortest-path distance between two vertices under the metric.
    pub fn geodesic_distance(&self, metric: &ConformalMetric, p: u32, q: u32) -> Result<f64> {
        self.check_vertex(q)?;
        Ok(self.distance_field(metric, p)?.distance_to(q))
    }

    /// Shortest path and its length between two vertices under the metric.
    pub fn shortest_path(
        &self,
        metric: &ConformalMetric,
        p: u32,
        q: u32,
    ) -> Result<(f64, Vec<u32>)> {
        self.check_vertex(q)?;
        let field = self.distance_field(metric, p)?;
        match field.path_to(q) {
            Some(path) => Ok((field.distance_to(q), path)),
            None => Err(Error::Construction(format!(
                "vertices {p} and {q} are not connected"
            ))),
        }
    }

    fn dijkstra(&self, weights: &[f64], source: u32) -> (Vec<f64>, Vec<u32>) {
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parents = vec![u32::MAX; n];
        let mut heap: BinaryHeap<Reverse<(HeapCost, u32)>> = BinaryHeap::new();
        dist[source as usize] = 0.0;
        heap.push(Reverse((HeapCost(0.0), source)));
        while let Some(Reverse((HeapCost(d), u))) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            for &(v, e) in &self.adjacency[u as usize] {
                let nd = d + weights[e as usize];
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    parents[v as usize] = u;
                    heap.push(Reverse((HeapCost(nd), v)));
                }
            }
        }
        (dist, parents)
    }

    /// Diameter bracket via farthest-point landmark sampling: the lower
    /// bound is a realized distance, the upper bound adds the stencil
    /// correction.
    pub fn diameter_estimate(
        &self,
        metric: &ConformalMetric,
        landmarks: usize,
    ) -> Result<DiameterEstimate> {
        if landmarks < 2 {
            return Err(Error::param("landmarks", "must be at least 2"));
        }
        let landmarks = landmarks.min(self.vertices.len());
        let mut lower = 0.0f64;
        let mut min_dist = vec![f64::INFINITY; self.vertices.len()];
        let mut source = 0u32;
        for _ in 0..landmarks {
            let field = self.distance_field(metric, source)?;
            let mut far_idx = 0u32;
            let mut far = f64::NEG_INFINITY;
            for (i, (&d, m)) in field.distances.iter().zip(min_dist.iter_mut()).enumerate() {
                if d.is_finite() {
                    lower = lower.max(d);
                    *m = m.min(d);
                }
                if *m > far {
                    far = *m;
                    far_idx = i as u32;
                }
            }
            source = far_idx;
        }
        Ok(DiameterEstimate {
            lower,
            upper: lower + 2.0 * self.h * self.kappa,
        })
    }

    /// Index of the vertex closest to a chart point.
    pub fn vertex_near(&self, point: &[f64]) -> Result<u32> {
        self.manifold.validate_point(point)?;
        let mut best = 0u32;
        let mut best_d = f64::INFINITY;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = self.manifold.point_distance(v, point);
            if d < best_d {
                best_d = d;
                best = i as u32;
            }
        }
        Ok(best)
    }

    /// Writes the mesh (vertices, edges, flags, build parameters) as JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let record = MeshFile {
            manifold: self.manifold.clone(),
            h: self.h,
            kappa: self.kappa,
            seed: self.seed,
            vertices: self.vertices.clone(),
            boundary: self.boundary.clone(),
            edges: self.edges.clone(),
        };
        serde_json::to_writer(BufWriter::new(file), &record)?;
        Ok(())
    }

    /// Reads a mesh previously written by `save`.
    pub fn load(path: &Path) -> Result<MeshGraph> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let record: MeshFile = serde_json::from_reader(BufReader::new(file))?;
        let n = record.vertices.len();
        if record.boundary.len() != n {
            return Err(Error::Input("boundary flags do not match vertices".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (id, &(a, b)) in record.edges.iter().enumerate() {
            if a as usize >= n || b as usize >= n {
                return Err(Error::Input(format!("edge ({a}, {b}) is out of range")));
            }
            adjacency[a as usize].push((b, id as u32));
            adjacency[b as usize].push((a, id as u32));
        }
        Ok(MeshGraph {
            manifold: record.manifold,
            h: record.h,
            kappa: record.kappa,
            seed: record.seed,
            vertices: record.vertices,
            boundary: record.boundary,
            edges: record.edges,
            adjacency,
            weights: RwLock::new(HashMap::new()),
        })
    }
}

/// Serialization key identifying a metric for weight caching.
pub fn metric_token(metric: &ConformalMetric) -> Result<String> {
    Ok(serde_json::to_string(metric)?)
}

#[derive(PartialEq)]
struct HeapCost(f64);

impl Eq for HeapCost {}

impl PartialOrd for HeapCost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapCost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Serialize, Deserialize)]
struct MeshFile {
    manifold: ModelManifold,
    h: f64,
    kappa: f64,
    seed: u64,
    vertices: Vec<Vec<f64>>,
    boundary: Vec<bool>,
    edges: Vec<(u32, u32)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::CHART_TOL;
    use crate::metric::{Anchor, FactorTerm};
    use crate::profile::RadialProfile;

    #[test]
    fn disk_mesh_has_expected_density_and_exact_boundary() {
        let mesh = build_mesh(ModelManifold::unit_disk(), 0.1, 3.0).unwrap();
        let n = mesh.vertex_count();
        assert!((157..=471).contains(&n), "vertex count {n}");
        let rim = mesh.boundary_vertices();
        assert!(!rim.is_empty());
        for v in rim {
            let p = &mesh.vertices()[v as usize];
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.0).abs() <= CHART_TOL, "boundary vertex at r={r}");
        }
    }

    #[test]
    fn torus_mesh_has_no_boundary() {
        let mesh = build_mesh(ModelManifold::square_torus(2).unwrap(), 0.2, 3.0).unwrap();
        assert!(mesh.boundary_vertices().is_empty());
        assert!(mesh.vertex_count() > 500);
    }

    #[test]
    fn sphere_mesh_is_an_h_net() {
        let h = 0.1;
        let mesh = build_mesh(ModelManifold::sphere(2).unwrap(), h, 3.0).unwrap();
        // Rejection-sampled covering check: every random surface point must
        // be within h of some vertex.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut worst = 0.0f64;
        for _ in 0..1500 {
            let z: f64 = 1.0 - 2.0 * rng.gen::<f64>();
            let colat = z.acos();
            let long = rng.gen::<f64>() * std::f64::consts::TAU;
            let p = vec![colat, long];
            let mut best = f64::INFINITY;
            for v in mesh.vertices() {
                best = best.min(mesh.manifold().point_distance(v, &p));
            }
            worst = worst.max(best);
        }
        assert!(worst <= h, "covering radius {worst} exceeds h={h}");
    }

    #[test]
    fn flat_chord_distance_is_accurate() {
        let mesh = build_mesh(ModelManifold::unit_disk(), 0.02, 4.0).unwrap();
        let flat = ConformalMetric::base(ModelManifold::unit_disk());
        let p = mesh.vertex_near(&[-0.5, 0.0]).unwrap();
        let q = mesh.vertex_near(&[0.5, 0.0]).unwrap();
        let d = mesh.geodesic_distance(&flat, p, q).unwrap();
        assert!((d - 1.0).abs() <= 0.02, "distance {d}");
    }

    #[test]
    fn constant_factor_scales_distances_exactly() {
        let mesh = build_mesh(ModelManifold::unit_disk(), 0.05, 3.0).unwrap();
        let flat = ConformalMetric::base(ModelManifold::unit_disk());
        let scaled = ConformalMetric::base(ModelManifold::unit_disk())
            .with_term(FactorTerm {
                anchor: Anchor::Boundary,
                profile: RadialProfile::constant(4.0).unwrap(),
                squared: false,
            })
            .unwrap();
        let p = mesh.vertex_near(&[-0.4, 0.2]).unwrap();
        let q = mesh.vertex_near(&[0.5, -0.1]).unwrap();
        let d1 = mesh.geodesic_distance(&flat, p, q).unwrap();
        let d2 = mesh.geodesic_distance(&scaled, p, q).unwrap();
        assert!((d2 - 2.0 * d1).abs() < 1e-9, "{d2} vs 2*{d1}");
    }

    #[test]
    fn dijkstra_agrees_with_floyd_warshall_on_a_small_mesh() {
        let mesh = build_mesh(ModelManifold::unit_disk(), 0.35, 3.0).unwrap();
        let flat = ConformalMetric::base(ModelManifold::unit_disk());
        let w = mesh.edge_weights(&flat).unwrap();
        let n = mesh.vertex_count();
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        for i in 0..n {
            dist[i][i] = 0.0;
        }
        for (e, &(a, b)) in mesh.edges().iter().enumerate() {
            let (a, b) = (a as usize, b as usize);
            dist[a][b] = dist[a][b].min(w[e]);
            dist[b][a] = dist[b][a].min(w[e]);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = dist[i][k] + dist[k][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                    }
                }
            }
        }
        for source in [0u32, (n / 2) as u32] {
            let field = mesh.distance_field(&flat, source).unwrap();
            for v in 0..n {
                let got = field.distances[v];
                let want = dist[source as usize][v];
                assert!(
                    (got - want).abs() < 1e-9,
                    "source {source}, vertex {v}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn triangle_inequality_holds_on_sampled_triples() {
        let mesh = build_mesh(ModelManifold::sphere(2).unwrap(), 0.25, 3.0).unwrap();
        let round = ConformalMetric::base(ModelManifold::sphere(2).unwrap());
        let n = mesh.vertex_count() as u32;
        let sources = [0u32, n / 3, 2 * n / 3];
        let fields: Vec<DistanceField> = sources
            .iter()
            .map(|&s| mesh.distance_field(&round, s).unwrap())
            .collect();
        for (ia, ib) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let ab = fields[ia].distance_to(sources[ib]);
            let ba = fields[ib].distance_to(sources[ia]);
            assert!((ab - ba).abs() < 1e-12, "asymmetry {ab} vs {ba}");
            for v in (0..n).step_by(7) {
                let av = fields[ia].distance_to(v);
                let bv = fields[ib].distance_to(v);
                assert!(ab <= av + bv + 1e-9);
                assert!((av - bv).abs() <= ab + 1e-9);
            }
        }
    }

    #[test]
    fn diameter_estimates_bracket_known_diameters() {
        let disk = build_mesh(ModelManifold::unit_disk(), 0.04, 3.0).unwrap();
        let flat = ConformalMetric::base(ModelManifold::unit_disk());
        let est = disk.diameter_estimate(&flat, 16).unwrap();
        assert!(est.lower <= 2.0 * 1.03 && est.lower >= 2.0 * 0.97, "{:?}", est);
        assert!(est.upper >= 2.0);

        let sph = build_mesh(ModelManifold::sphere(2).unwrap(), 0.1, 3.0).unwrap();
        let round = ConformalMetric::base(ModelManifold::sphere(2).unwrap());
        let est = sph.diameter_estimate(&round, 16).unwrap();
        let pi = std::f64::consts::PI;
        assert!(est.lower <= pi * 1.03 && est.lower >= pi * 0.97, "{:?}", est);
    }

    #[test]
    fn refinement_tightens_flat_distances() {
        // Query error for point pairs: endpoint snapping plus path error,
        // against the exact Euclidean separation of the requested points.
        let flat = ConformalMetric::base(ModelManifold::unit_disk());
        let pairs = [
            ([-0.5, 0.0], [0.5, 0.0]),
            ([-0.3, -0.4], [0.4, 0.3]),
            ([0.1, 0.6], [0.2, -0.55]),
            ([-0.6, 0.25], [0.55, 0.3]),
        ];
        let mut errs = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let mesh = build_mesh(ModelManifold::unit_disk(), h, 4.0).unwrap();
            let mut worst = 0.0f64;
            for (a, b) in &pairs {
                let p = mesh.vertex_near(a).unwrap();
                let q = mesh.vertex_near(b).unwrap();
                let d = mesh.geodesic_distance(&flat, p, q).unwrap();
                let exact = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                worst = worst.max((d - exact).abs());
            }
            errs.push(worst);
        }
        assert!(
            errs[2] < errs[1] && errs[1] < errs[0],
            "errors did not shrink: {errs:?}"
        );
    }

    #[test]
    fn identical_inputs_give_bit_identical_distances() {
        let build = || {
            build_mesh_with(
                ModelManifold::unit_disk(),
                0.07,
                3.0,
                &[MeshFeature::BoundaryOffsetRing { offset: 0.125 }],
                42,
            )
            .unwrap()
        };
        let m1 = build();
        let m2 = build();
        assert_eq!(m1.vertices(), m2.vertices());
        assert_eq!(m1.edges(), m2.edges());
        let flat = ConformalMetric::base(ModelManifold::unit_disk());
        let f1 = m1.distance_field(&flat, 3).unwrap();
        let f2 = m2.distance_field(&flat, 3).unwrap();
        assert_eq!(f1.distances, f2.distances);
    }

    #[test]
    fn blowup_weights_dominate_flat_weights() {
        let mesh = build_mesh(ModelManifold::unit_disk(), 0.08, 3.0).unwrap();
        let flat = ConformalMetric::base(ModelManifold::unit_disk());
        let grown = crate::families::disk_blowup(2, 0.25, 8).unwrap();
        let w0 = mesh.edge_weights(&flat).unwrap();
        let wj = mesh.edge_weights(&grown).unwrap();
        for (a, b) in w0.iter().zip(wj.iter()) {
            assert!(b >= a, "{b} < {a}");
        }
        let p = mesh.vertex_near(&[0.9, 0.0]).unwrap();
        let q = mesh.vertex_near(&[-0.9, 0.0]).unwrap();
        let d0 = mesh.geodesic_distance(&flat, p, q).unwrap();
        let dj = mesh.geodesic_distance(&grown, p, q).unwrap();
        assert!(dj >= d0);
    }

    #[test]
    fn save_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.json");
        let mesh = build_mesh(ModelManifold::unit_disk(), 0.15, 3.0).unwrap();
        mesh.save(&path).unwrap();
        let back = MeshGraph::load(&path).unwrap();
        assert_eq!(mesh.vertices(), back.vertices());
        assert_eq!(mesh.edges(), back.edges());
        assert_eq!(mesh.h(), back.h());
        let flat = ConformalMetric::base(ModelManifold::unit_disk());
        let d1 = mesh.geodesic_distance(&flat, 0, 5).unwrap();
        let d2 = back.geodesic_distance(&flat, 0, 5).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(build_mesh(ModelManifold::unit_disk(), 0.0, 3.0).is_err());
        assert!(build_mesh(ModelManifold::unit_disk(), 0.1, 1.5).is_err());
        let mesh = build_mesh(ModelManifold::unit_disk(), 0.2, 3.0).unwrap();
        let flat = ConformalMetric::base(ModelManifold::unit_disk());
        assert!(mesh.geodesic_distance(&flat, 0, 99999).is_err());
        let torus_metric = ConformalMetric::base(ModelManifold::square_torus(2).unwrap());
        assert!(mesh.edge_weights(&torus_metric).is_err());
    }
}
