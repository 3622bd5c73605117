//! Model manifolds and their charts.
//!
//! Four base geometries are supported, each with a fixed global chart:
//!
//! - `Disk` (dim 2) / solid ball (dim 3): Cartesian coordinates, flat base
//!   metric, boundary at `|x| = radius`.
//! - `Annulus` (dim 2) / spherical shell (dim 3): Cartesian coordinates,
//!   flat base metric, boundary at `|x| = r_in` and `|x| = r_out`.
//! - `Sphere` (dim 2 or 3): angular coordinates `(colat, long)` resp.
//!   `(psi, colat, long)`, round unit-sphere base metric, no boundary.
//! - `Torus` (dim 2 or 3): periodic Cartesian coordinates with side lengths
//!   `sides`, flat base metric, no boundary.
//!
//! Coordinates of periodic manifolds may be given outside the principal
//! domain; evaluation wraps them. Tangent vectors are coordinate vectors in
//! the same chart.

use serde::{Deserialize, Serialize};

use crate::{ensure_finite, Error, Result};

/// Tolerance for membership tests at chart boundaries.
pub const CHART_TOL: f64 = 1e-9;

/// A model manifold with its global chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelManifold {
    Disk { dim: usize, radius: f64 },
    Annulus { dim: usize, r_in: f64, r_out: f64 },
    Sphere { dim: usize },
    Torus { dim: usize, sides: Vec<f64> },
}

impl ModelManifold {
    /// Unit disk (dim 2).
    pub fn unit_disk() -> Self {
        ModelManifold::Disk {
            dim: 2,
            radius: 1.0,
        }
    }

    pub fn disk(dim: usize, radius: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::param("dim", "must be 2 or 3"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::param("radius", "must be finite and positive"));
        }
        Ok(ModelManifold::Disk { dim, radius })
    }

    pub fn annulus(dim: usize, r_in: f64, r_out: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::param("dim", "must be 2 or 3"));
        }
        if !(r_in.is_finite() && r_out.is_finite() && 0.0 < r_in && r_in < r_out) {
            return Err(Error::param("r_in/r_out", "need 0 < r_in < r_out, finite"));
        }
        Ok(ModelManifold::Annulus { dim, r_in, r_out })
    }

    /// Round unit sphere.
    pub fn sphere(dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::param("dim", "must be 2 or 3"));
        }
        Ok(ModelManifold::Sphere { dim })
    }

    /// Flat torus with all side lengths `2 * pi`.
    pub fn square_torus(dim: usize) -> Result<Self> {
        Self::torus(vec![std::f64::consts::TAU; dim])
    }

    pub fn torus(sides: Vec<f64>) -> Result<Self> {
        let dim = sides.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::param("sides", "must have length 2 or 3"));
        }
        if !sides.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::param("sides", "must be finite and positive"));
        }
        Ok(ModelManifold::Torus { dim, sides })
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            ModelManifold::Disk { dim, .. }
            | ModelManifold::Annulus { dim, .. }
            | ModelManifold::Sphere { dim }
            | ModelManifold::Torus { dim, .. } => *dim,
        }
    }

    /// Number of chart coordinates (= intrinsic dimension for all charts).
    pub fn chart_dim(&self) -> usize {
        self.dim()
    }

    pub fn has_boundary(&self) -> bool {
        matches!(
            self,
            ModelManifold::Disk { .. } | ModelManifold::Annulus { .. }
        )
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelManifold::Disk { .. } => "disk",
            ModelManifold::Annulus { .. } => "annulus",
            ModelManifold::Sphere { .. } => "sphere",
            ModelManifold::Torus { .. } => "torus",
        }
    }

    /// Validates that `p` lies on the manifold (within [`CHART_TOL`]).
    pub fn validate_point(&self, p: &[f64]) -> Result<()> {
        ensure_finite("point", p)?;
        if p.len() != self.chart_dim() {
            return Err(Error::Input(format!(
                "point has {} coordinates, chart needs {}",
                p.len(),
                self.chart_dim()
            )));
        }
        match self {
            ModelManifold::Disk { radius, .. } => {
                let r = norm(p);
                if r > radius + CHART_TOL {
                    return Err(Error::Domain(format!(
                        "|x| = {r} exceeds disk radius {radius}"
                    )));
                }
            }
            ModelManifold::Annulus { r_in, r_out, .. } => {
                let r = norm(p);
                if r < r_in - CHART_TOL || r > r_out + CHART_TOL {
                    return Err(Error::Domain(format!(
                        "|x| = {r} outside annulus [{r_in}, {r_out}]"
                    )));
                }
            }
            ModelManifold::Sphere { dim } => {
                // Polar angles live in [0, pi]; the last angle is periodic.
                for (i, &a) in p.iter().enumerate().take(dim - 1) {
                    if !(-CHART_TOL..=std::f64::consts::PI + CHART_TOL).contains(&a) {
                        return Err(Error::Domain(format!(
                            "angle #{i} = {a} outside [0, pi]"
                        )));
                    }
                }
            }
            ModelManifold::Torus { .. } => {}
        }
        Ok(())
    }

    /// Base quadratic form `g0(v, v)` at `p`.
    ///
    /// Flat charts give `|v|^2`; the sphere chart gives the round form
    /// (`v_colat^2 + sin^2(colat) v_long^2` in dimension 2).
    pub fn base_form(&self, p: &[f64], v: &[f64]) -> f64 {
        match self {
            ModelManifold::Disk { .. }
            | ModelManifold::Annulus { .. }
            | ModelManifold::Torus { .. } => v.iter().map(|x| x * x).sum(),
            ModelManifold::Sphere { dim } => {
                if *dim == 2 {
                    let s = p[0].sin();
                    v[0] * v[0] + s * s * v[1] * v[1]
                } else {
                    let s0 = p[0].sin();
                    let s1 = p[1].sin();
                    v[0] * v[0] + s0 * s0 * (v[1] * v[1] + s1 * s1 * v[2] * v[2])
                }
            }
        }
    }

    /// Distance from `p` to the boundary (boundary manifolds only).
    pub fn boundary_distance(&self, p: &[f64]) -> Result<f64> {
        match self {
            ModelManifold::Disk { radius, .. } => Ok((radius - norm(p)).max(0.0)),
            ModelManifold::Annulus { r_in, r_out, .. } => {
                let r = norm(p);
                Ok((r - r_in).min(r_out - r).max(0.0))
            }
            _ => Err(Error::Usage(format!(
                "{} has no boundary",
                self.kind_name()
            ))),
        }
    }

    /// Base-metric distance from `p` to a reference point `q`.
    ///
    /// Flat charts use the straight (torus: minimal-image) displacement; the
    /// sphere uses the central angle. This is exact for the base metric.
    pub fn point_distance(&self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            ModelManifold::Disk { .. } | ModelManifold::Annulus { .. } => {
                norm(&sub(p, q))
            }
            ModelManifold::Torus { sides, .. } => {
                let mut acc = 0.0;
                for i in 0..sides.len() {
                    let d = wrap_delta(p[i] - q[i], sides[i]);
                    acc += d * d;
                }
                acc.sqrt()
            }
            ModelManifold::Sphere { .. } => {
                let a = self.sphere_to_vec(p);
                let b = self.sphere_to_vec(q);
                let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                dot.clamp(-1.0, 1.0).acos()
            }
        }
    }

    /// Embeds sphere chart coordinates as a unit vector.
    pub(crate) fn sphere_to_vec(&self, p: &[f64]) -> Vec<f64> {
        match self {
            ModelManifold::Sphere { dim: 2 } => {
                let (t, f) = (p[0], p[1]);
                vec![t.sin() * f.cos(), t.sin() * f.sin(), t.cos()]
            }
            ModelManifold::Sphere { dim: 3 } => {
                let (ps, t, f) = (p[0], p[1], p[2]);
                vec![
                    ps.sin() * t.sin() * f.cos(),
                    ps.sin() * t.sin() * f.sin(),
                    ps.sin() * t.cos(),
                    ps.cos(),
                ]
            }
            _ => unreachable!("sphere_to_vec on non-sphere"),
        }
    }

    /// Inverse of [`Self::sphere_to_vec`].
    pub(crate) fn sphere_from_vec(&self, v: &[f64]) -> Vec<f64> {
        match self {
            ModelManifold::Sphere { dim: 2 } => {
                let t = v[2].clamp(-1.0, 1.0).acos();
                let f = v[1].atan2(v[0]).rem_euclid(std::f64::consts::TAU);
                vec![t, f]
            }
            ModelManifold::Sphere { dim: 3 } => {
                let ps = v[3].clamp(-1.0, 1.0).acos();
                let s = ps.sin();
                if s < 1e-15 {
                    return vec![ps, 0.0, 0.0];
                }
                let t = (v[2] / s).clamp(-1.0, 1.0).acos();
                let f = v[1].atan2(v[0]).rem_euclid(std::f64::consts::TAU);
                vec![ps, t, f]
            }
            _ => unreachable!("sphere_from_vec on non-sphere"),
        }
    }

    /// Minimal-image displacement `q - p` (periodic charts wrap, others
    /// subtract). The result can be added to `p` to reach `q` along the
    /// shortest chart-straight segment.
    pub fn displacement(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        match self {
            ModelManifold::Torus { sides, .. } => (0..sides.len())
                .map(|i| wrap_delta(q[i] - p[i], sides[i]))
                .collect(),
            ModelManifold::Sphere { dim } => {
                // Wrap the final (periodic) angle only.
                let mut d = sub(q, p);
                let last = dim - 1;
                d[last] = wrap_delta(d[last], std::f64::consts::TAU);
                d
            }
            _ => sub(q, p),
        }
    }

    /// Volume of the manifold under the base metric (closed form).
    pub fn base_volume(&self) -> f64 {
        match self {
            ModelManifold::Disk { dim, radius } => unit_ball_volume(*dim) * radius.powi(*dim as i32),
            ModelManifold::Annulus { dim, r_in, r_out } => {
                unit_ball_volume(*dim) * (r_out.powi(*dim as i32) - r_in.powi(*dim as i32))
            }
            ModelManifold::Sphere { dim } => sphere_surface(*dim),
            ModelManifold::Torus { sides, .. } => sides.iter().product(),
        }
    }

    /// Boundary area under the base metric (closed form); zero if empty.
    pub fn base_boundary_area(&self) -> f64 {
        match self {
            ModelManifold::Disk { dim, radius } => {
                sphere_surface(*dim - 1) * radius.powi(*dim as i32 - 1)
            }
            ModelManifold::Annulus { dim, r_in, r_out } => {
                sphere_surface(*dim - 1)
                    * (r_in.powi(*dim as i32 - 1) + r_out.powi(*dim as i32 - 1))
            }
            _ => 0.0,
        }
    }
}

/// Volume of the unit ball in `R^n`, `pi^(n/2) / Gamma(n/2 + 1)`.
pub fn unit_ball_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => {
            // Recurrence V_n = 2 pi / n * V_{n-2}.
            let mut v = if n % 2 == 0 { PI } else { 4.0 * PI / 3.0 };
            let mut k = if n % 2 == 0 { 2 } else { 3 };
            while k < n {
                k += 2;
                v *= std::f64::consts::TAU / k as f64;
            }
            v
        }
    }
}

/// Surface area of the unit n-sphere `S^n` embedded in `R^(n+1)`.
pub fn sphere_surface(n: usize) -> f64 {
    (n as f64 + 1.0) * unit_ball_volume(n + 1)
}

pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Signed wrap of `d` into `(-period/2, period/2]`.
pub(crate) fn wrap_delta(d: f64, period: f64) -> f64 {
    let mut x = d.rem_euclid(period);
    if x > period / 2.0 {
        x -= period;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn constructors_enforce_parameter_constraints() {
        assert!(ModelManifold::disk(2, 0.0).is_err());
        assert!(ModelManifold::disk(4, 1.0).is_err());
        assert!(ModelManifold::annulus(2, 2.0, 1.0).is_err());
        assert!(ModelManifold::torus(vec![1.0]).is_err());
        let e = ModelManifold::disk(2, -1.0).unwrap_err();
        assert!(e.to_string().contains("radius"));
    }

    #[test]
    fn base_volumes_match_closed_forms() {
        assert!((ModelManifold::unit_disk().base_volume() - PI).abs() < 1e-15);
        let ball = ModelManifold::disk(3, 1.0).unwrap();
        assert!((ball.base_volume() - 4.0 * PI / 3.0).abs() < 1e-15);
        let s2 = ModelManifold::sphere(2).unwrap();
        assert!((s2.base_volume() - 4.0 * PI).abs() < 1e-12);
        let s3 = ModelManifold::sphere(3).unwrap();
        assert!((s3.base_volume() - 2.0 * PI * PI).abs() < 1e-12);
        let t2 = ModelManifold::square_torus(2).unwrap();
        assert!((t2.base_volume() - TAU * TAU).abs() < 1e-12);
        let ann = ModelManifold::annulus(2, 1.0, 2.0).unwrap();
        assert!((ann.base_volume() - 3.0 * PI).abs() < 1e-12);
        assert!((ann.base_boundary_area() - 6.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn boundary_distance_and_membership() {
        let disk = ModelManifold::unit_disk();
        assert!((disk.boundary_distance(&[0.6, 0.0]).unwrap() - 0.4).abs() < 1e-15);
        assert!(disk.validate_point(&[0.8, 0.7]).is_err());
        let ann = ModelManifold::annulus(2, 1.0, 2.0).unwrap();
        assert!((ann.boundary_distance(&[1.25, 0.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!((ann.boundary_distance(&[1.9, 0.0]).unwrap() - 0.1).abs() < 1e-15);
        let sph = ModelManifold::sphere(2).unwrap();
        assert!(sph.boundary_distance(&[0.3, 0.0]).is_err());
    }

    #[test]
    fn torus_point_distance_uses_minimal_image() {
        let t = ModelManifold::square_torus(2).unwrap();
        let d = t.point_distance(&[0.1, 0.0], &[TAU - 0.1, 0.0]);
        assert!((d - 0.2).abs() < 1e-12);
    }

    #[test]
    fn sphere_point_distance_is_central_angle() {
        let s = ModelManifold::sphere(2).unwrap();
        let north = [0.0, 0.0];
        let south = [PI, 0.0];
        assert!((s.point_distance(&north, &south) - PI).abs() < 1e-12);
        let eq_a = [PI / 2.0, 0.0];
        let eq_b = [PI / 2.0, PI / 2.0];
        assert!((s.point_distance(&eq_a, &eq_b) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_chart_round_trip() {
        let s = ModelManifold::sphere(2).unwrap();
        let p = [1.1, 2.2];
        let q = s.sphere_from_vec(&s.sphere_to_vec(&p));
        assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
    }
}
