//! Boundary collars for the flat model metrics.
//!
//! A collar chart parametrizes a strip along the boundary by normal-offset
//! coordinates: a boundary point together with the inward distance walked
//! from it. On the disk and annulus charts the inward normal flow is radial
//! scaling, so the chart maps are closed-form, but every geometric claim
//! about them (product splitting of the pullback metric, boundary bending
//! eigenvalues) is still measured by finite differences rather than assumed.
//!
//! The module also builds the decreasing conformal bump `tau` whose job is
//! to make every boundary component convex: multiplying the metric tensor by
//! `tau(distance to boundary)` leaves everything past a chosen depth
//! untouched while bending offset hypersurfaces outward near the rim.

use serde::{Deserialize, Serialize};

use crate::manifold::{norm, ModelManifold, CHART_TOL};
use crate::metric::{Anchor, ConformalMetric, FactorTerm};
use crate::profile::{Piece, RadialProfile, SegmentKind};
use crate::{Error, Result};

/// Normal-offset coordinates on a strip along the boundary.
///
/// `forward` maps (boundary point, offset) to the chart point at that base
/// distance inward; `inverse` recovers the pair for any point closer to the
/// boundary than the collar width. Both directions are radial scalings, and
/// `build_collar` verifies on samples that they really are inverse to each
/// other and injective before handing the chart out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollarChart {
    manifold: ModelManifold,
    width: f64,
}

/// Builds the widest collar the geometry supports: half the radius on a
/// disk, half the gap between the circles on an annulus. Inside that width
/// the inward normal map is injective, which the constructor double-checks
/// on a sample grid.
pub fn build_collar(manifold: &ModelManifold) -> Result<CollarChart> {
    let width = match manifold {
        ModelManifold::Disk { radius, .. } => radius / 2.0,
        ModelManifold::Annulus { r_in, r_out, .. } => (r_out - r_in) / 2.0,
        other => {
            return Err(Error::Usage(format!(
                "collar needs a boundary, got {}",
                other.kind_name()
            )))
        }
    };
    let chart = CollarChart {
        manifold: manifold.clone(),
        width,
    };
    chart.verify_injective(8, 8)?;
    Ok(chart)
}

impl CollarChart {
    pub fn manifold(&self) -> &ModelManifold {
        &self.manifold
    }

    /// Collar width: offsets live in `[0, width)`.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Boundary components as (radius, inward sign) pairs. The sign says
    /// whether walking inward grows (+1) or shrinks (-1) the chart radius.
    fn components(&self) -> Vec<(f64, f64)> {
        match &self.manifold {
            ModelManifold::Disk { radius, .. } => vec![(*radius, -1.0)],
            ModelManifold::Annulus { r_in, r_out, .. } => vec![(*r_in, 1.0), (*r_out, -1.0)],
            _ => Vec::new(),
        }
    }

    fn component_of(&self, b: &[f64]) -> Result<(f64, f64)> {
        let r = norm(b);
        self.components()
            .into_iter()
            .find(|(rb, _)| (r - rb).abs() <= CHART_TOL)
            .ok_or_else(|| {
                Error::Input(format!("point at radius {r} does not lie on the boundary"))
            })
    }

    /// Point at base distance `t` inward from the boundary point.
    pub fn forward(&self, boundary_point: &[f64], t: f64) -> Result<Vec<f64>> {
        self.manifold.validate_point(boundary_point)?;
        let (rb, sign) = self.component_of(boundary_point)?;
        if !(t.is_finite() && t >= 0.0 && t < self.width) {
            return Err(Error::ChartRange(format!(
                "offset {t} is outside the collar range [0, {})",
                self.width
            )));
        }
        let scale = (rb + sign * t) / rb;
        Ok(boundary_point.iter().map(|x| x * scale).collect())
    }

    /// Boundary foot point and offset of a point inside the collar.
    pub fn inverse(&self, p: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.manifold.validate_point(p)?;
        let t = self.manifold.boundary_distance(p)?;
        if t >= self.width {
            return Err(Error::ChartRange(format!(
                "point at boundary distance {t} is deeper than the collar width {}",
                self.width
            )));
        }
        let r = norm(p);
        let (rb, _) = self
            .components()
            .into_iter()
            .min_by(|a, b| (r - a.0).abs().total_cmp(&(r - b.0).abs()))
            .expect("collar manifolds have boundary components");
        let scale = rb / r;
        Ok((p.iter().map(|x| x * scale).collect(), t))
    }

    /// Membership in the open strip of points at base boundary distance
    /// less than `t`. Only depths below the collar width are answerable.
    pub fn in_strip(&self, p: &[f64], t: f64) -> Result<bool> {
        if !(t.is_finite() && t > 0.0 && t < self.width) {
            return Err(Error::param("t", "strip depth must lie in (0, width)"));
        }
        Ok(self.manifold.boundary_distance(p)? < t)
    }

    /// Replaces every curve vertex at base boundary distance less than `t`
    /// by the point at distance exactly `t` on the same inward normal.
    /// Vertices already at depth `t` or more, endpoints included, pass
    /// through unchanged.
    pub fn clamp_curve(&self, curve: &[Vec<f64>], t: f64) -> Result<Vec<Vec<f64>>> {
        if !(t.is_finite() && t > 0.0 && t < self.width) {
            return Err(Error::param("t", "clamp depth must lie in (0, width)"));
        }
        curve
            .iter()
            .map(|p| {
                self.manifold.validate_point(p)?;
                if self.manifold.boundary_distance(p)? < t {
                    let (b, _) = self.inverse(p)?;
                    self.forward(&b, t)
                } else {
                    Ok(p.clone())
                }
            })
            .collect()
    }

    /// Evenly spread boundary points covering every boundary component.
    pub fn boundary_samples(&self, count: usize) -> Vec<Vec<f64>> {
        let comps = self.components();
        let mut out = Vec::with_capacity(count);
        let per = count.div_ceil(comps.len());
        for (ci, (rb, _)) in comps.iter().enumerate() {
            for k in 0..per {
                let frac = (k as f64 + 0.37 * ci as f64) / per as f64;
                out.push(ring_point(self.manifold.dim(), *rb, frac, k));
            }
        }
        out
    }

    /// Squared speed, per unit angle, of the depth-`t` offset of the
    /// boundary circle through `boundary_point`, measured by central
    /// differences of the forward map under the given metric.
    pub fn induced_coefficient(
        &self,
        metric: &ConformalMetric,
        boundary_point: &[f64],
        t: f64,
    ) -> Result<f64> {
        if metric.manifold() != &self.manifold {
            return Err(Error::Usage(
                "metric and collar live on different manifolds".into(),
            ));
        }
        let (rb, _) = self.component_of(boundary_point)?;
        let u = unit(boundary_point);
        let v = tangent_at(&u);
        let dth = 1e-5;
        let plus = self.forward(&ring_rotate(&u, &v, rb, dth), t)?;
        let minus = self.forward(&ring_rotate(&u, &v, rb, -dth), t)?;
        let mid = self.forward(boundary_point, t)?;
        let vel: Vec<f64> = plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| (a - b) / (2.0 * dth))
            .collect();
        Ok(metric.form(&mid, &vel))
    }

    /// Largest sampled deviation of the base-metric pullback from the
    /// product of the offset direction and the boundary direction: the
    /// inward speed should be one and the cross term zero. Returns the
    /// worst normalized defect over a grid of (boundary point, offset)
    /// samples.
    pub fn product_defect(&self, samples: usize) -> Result<f64> {
        let base = ConformalMetric::base(self.manifold.clone());
        let dt = 1e-6;
        let dth = 1e-6;
        let mut worst = 0.0f64;
        for b in self.boundary_samples(samples) {
            let (rb, _) = self.component_of(&b)?;
            let u = unit(&b);
            let v = tangent_at(&u);
            for k in 1..8 {
                let t = self.width * k as f64 / 8.0;
                let p = self.forward(&b, t)?;
                let fwd = self.forward(&b, t + dt)?;
                let bwd = self.forward(&b, t - dt)?;
                let v_t: Vec<f64> = fwd
                    .iter()
                    .zip(&bwd)
                    .map(|(a, c)| (a - c) / (2.0 * dt))
                    .collect();
                let plus = self.forward(&ring_rotate(&u, &v, rb, dth), t)?;
                let minus = self.forward(&ring_rotate(&u, &v, rb, -dth), t)?;
                let v_th: Vec<f64> = plus
                    .iter()
                    .zip(&minus)
                    .map(|(a, c)| (a - c) / (2.0 * dth))
                    .collect();
                let speed = base.form(&p, &v_t);
                let cross = bilinear(&base, &p, &v_t, &v_th);
                let scale = (speed * base.form(&p, &v_th)).sqrt().max(1e-300);
                worst = worst.max((speed - 1.0).abs()).max(cross.abs() / scale);
            }
        }
        Ok(worst)
    }

    /// Measured constant `K` such that the induced boundary coefficient
    /// obeys `|h(t) - h(0)| <= K * t * h(0)` over sampled small offsets.
    pub fn induced_drift(&self, metric: &ConformalMetric, samples: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for b in self.boundary_samples(samples) {
            let m0 = self.induced_coefficient(metric, &b, 0.0)?;
            for t in [self.width / 64.0, self.width / 16.0, self.width / 4.0] {
                let m = self.induced_coefficient(metric, &b, t)?;
                worst = worst.max((m - m0).abs() / (t * m0));
            }
        }
        Ok(worst)
    }

    fn verify_injective(&self, points: usize, offsets: usize) -> Result<()> {
        let mut images: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
        for b in self.boundary_samples(points) {
            for k in 0..offsets {
                let t = self.width * k as f64 / offsets as f64;
                let p = self.forward(&b, t)?;
                let (b2, t2) = self.inverse(&p)?;
                let foot_err = b
                    .iter()
                    .zip(&b2)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if foot_err > 1e-9 || (t - t2).abs() > 1e-9 {
                    return Err(Error::Construction(format!(
                        "normal chart failed to round-trip at offset {t}"
                    )));
                }
                images.push((b.clone(), p, t));
            }
        }
        for i in 0..images.len() {
            for j in (i + 1)..images.len() {
                let same_input = images[i].2 == images[j].2
                    && images[i]
                        .0
                        .iter()
                        .zip(&images[j].0)
                        .all(|(x, y)| (x - y).abs() <= 1e-12);
                let d = images[i]
                    .1
                    .iter()
                    .zip(&images[j].1)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if !same_input && d <= 1e-9 {
                    return Err(Error::Construction(
                        "normal chart glued two distinct samples".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

/// Some unit vector orthogonal to the unit vector `u`.
fn tangent_at(u: &[f64]) -> Vec<f64> {
    if u.len() == 2 {
        return vec![-u[1], u[0]];
    }
    let axis = (0..u.len())
        .min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
        .unwrap();
    let mut e = vec![0.0; u.len()];
    e[axis] = 1.0;
    let dot: f64 = e.iter().zip(u).map(|(a, b)| a * b).sum();
    let raw: Vec<f64> = e.iter().zip(u).map(|(a, b)| a - dot * b).collect();
    unit(&raw)
}

/// Point on the boundary ring of radius `rb` rotated by `angle` from `u`
/// toward `v`, for orthonormal `u`, `v`.
fn ring_rotate(u: &[f64], v: &[f64], rb: f64, angle: f64) -> Vec<f64> {
    let (c, s) = (angle.cos(), angle.sin());
    u.iter()
        .zip(v)
        .map(|(a, b)| rb * (a * c + b * s))
        .collect()
}

/// Deterministic spread point on the radius-`rb` boundary sphere; `frac`
/// walks around and `k` staggers the extra angles in dimension three.
fn ring_point(dim: usize, rb: f64, frac: f64, k: usize) -> Vec<f64> {
    let theta = std::f64::consts::TAU * frac;
    if dim == 2 {
        vec![rb * theta.cos(), rb * theta.sin()]
    } else {
        let z = (1.0 - 2.0 * frac).clamp(-1.0, 1.0);
        let rho = (1.0 - z * z).sqrt();
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        let phi = golden * k as f64;
        vec![rb * rho * phi.cos(), rb * rho * phi.sin(), rb * z]
    }
}

fn bilinear(metric: &ConformalMetric, p: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let plus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let minus: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    (metric.form(p, &plus) - metric.form(p, &minus)) / 4.0
}

/// Decreasing conformal bump profile for boundary convexification.
///
/// The profile equals `1 + a (1 - t/w)^{3/2}` on `[0, w]` and `1` after,
/// with `w` and `a` solved so the initial slope hits `-5 tau(0) s` for the
/// boundary bending bound `s` it was built against. The three properties
/// the downstream convexity argument needs (flat past the target depth,
/// nonincreasing, initial slope at most `-4 tau(0) s`) then hold with a
/// full factor of margin on the slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauProfile {
    profile: RadialProfile,
    sff_norm: f64,
    flat_beyond: f64,
}

impl TauProfile {
    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    /// Boundary bending bound the slope condition was solved against.
    pub fn sff_norm(&self) -> f64 {
        self.sff_norm
    }

    /// Depth past which the profile is identically one.
    pub fn flat_beyond(&self) -> f64 {
        self.flat_beyond
    }

    pub fn value(&self, t: f64) -> f64 {
        self.profile.value(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.profile.derivative(t)
    }
}

/// Builds the bump profile for target depth `t0` and bending bound
/// `a_norm`. A zero bound returns the constant one profile; otherwise the
/// ramp width shrinks below `t0` whenever the slope demand is too steep
/// for a width-`t0` ramp to meet with a positive amplitude.
pub fn build_tau(t0: f64, a_norm: f64) -> Result<TauProfile> {
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::param("t0", "must be finite and positive"));
    }
    if !(a_norm.is_finite() && a_norm >= 0.0) {
        return Err(Error::param("a_norm", "must be finite and nonnegative"));
    }
    if a_norm == 0.0 {
        return Ok(TauProfile {
            profile: RadialProfile::constant(1.0)?,
            sff_norm: 0.0,
            flat_beyond: t0,
        });
    }
    // Slope target: tau'(0) = -5 tau(0) a_norm. With tau = 1 + a (1-t/w)^{3/2}
    // the slope is -1.5 a / w, so a = 5 a_norm / (1.5 / w - 5 a_norm), which
    // is positive exactly when w < 0.3 / a_norm.
    let target = 5.0 * a_norm;
    let w = t0.min(0.9 * 1.5 / target);
    let a = target / (1.5 / w - target);
    let profile = RadialProfile::new(vec![
        Piece {
            end: w,
            kind: SegmentKind::PowerDecay {
                base: 1.0,
                amplitude: a,
                power: 1.5,
            },
        },
        Piece {
            end: w + t0,
            kind: SegmentKind::Constant { value: 1.0 },
        },
    ])?;
    let tau = TauProfile {
        profile,
        sff_norm: a_norm,
        flat_beyond: t0,
    };
    let v0 = tau.value(0.0);
    let slope_ok = tau.derivative(0.0) <= -4.0 * v0 * a_norm;
    let flat_ok = (tau.value(t0) - 1.0).abs() <= 1e-12;
    let monotone_ok = (0..=64).all(|k| tau.derivative(w * k as f64 / 64.0) <= 1e-12);
    if !(v0 > 1.0 && slope_ok && flat_ok && monotone_ok) {
        return Err(Error::Construction(
            "bump profile missed its slope or flatness target".into(),
        ));
    }
    Ok(tau)
}

/// A convexified metric together with the bump that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convexification {
    pub metric: ConformalMetric,
    pub tau: TauProfile,
}

/// Multiplies the metric tensor by `tau(distance to boundary)`, once and
/// not squared, with `tau` built against the measured boundary bending of
/// the base metric. The result is unchanged at depth `t1` and beyond and
/// never smaller than the input anywhere.
pub fn convexify(
    metric: &ConformalMetric,
    chart: &CollarChart,
    t1: f64,
) -> Result<Convexification> {
    if metric.manifold() != chart.manifold() {
        return Err(Error::Usage(
            "metric and collar live on different manifolds".into(),
        ));
    }
    if !(t1.is_finite() && t1 > 0.0 && t1 <= chart.width()) {
        return Err(Error::param("t1", "must lie in (0, collar width]"));
    }
    let base = ConformalMetric::base(chart.manifold().clone());
    let mut a_norm = 0.0f64;
    for b in chart.boundary_samples(16) {
        let (eig, _) = sff_eigen_at(&base, chart, &b)?;
        a_norm = a_norm.max(eig.abs());
    }
    let tau = build_tau(t1, a_norm)?;
    let metric = metric.clone().with_term(FactorTerm {
        anchor: Anchor::Boundary,
        profile: tau.profile().clone(),
        squared: false,
    })?;
    Ok(Convexification { metric, tau })
}

/// One boundary bending estimate: the smallest sampled eigenvalue of the
/// second fundamental form, with the finite-difference step it used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SffEstimate {
    pub min_eigen: f64,
    /// Base one-sided step; the value is Richardson-extrapolated from this
    /// step and its half.
    pub step: f64,
}

/// Minimum bending eigenvalue of the boundary over the sample points.
///
/// Signs follow the inward normal with the convention that a disk rim,
/// convex from inside, comes out positive. The eigenvalue at each sample is
/// `-m'(0) / (2 m(0) sqrt(F))` where `m(t)` is the induced coefficient of
/// the depth-`t` offset circle and `F` the tensor factor at the sample;
/// `m'(0)` comes from a one-sided three-point difference at two steps
/// combined by one Richardson level.
pub fn sff_min_eigen(
    metric: &ConformalMetric,
    chart: &CollarChart,
    samples: &[Vec<f64>],
) -> Result<SffEstimate> {
    if samples.is_empty() {
        return Err(Error::param("samples", "need at least one boundary point"));
    }
    let mut min_eigen = f64::INFINITY;
    let mut step = 0.0;
    for b in samples {
        let (eig, s) = sff_eigen_at(metric, chart, b)?;
        min_eigen = min_eigen.min(eig);
        step = s;
    }
    Ok(SffEstimate { min_eigen, step })
}

fn sff_eigen_at(
    metric: &ConformalMetric,
    chart: &CollarChart,
    b: &[f64],
) -> Result<(f64, f64)> {
    if metric.manifold() != chart.manifold() {
        return Err(Error::Usage(
            "metric and collar live on different manifolds".into(),
        ));
    }
    let step = (chart.width() / 8.0).min(1e-3);
    if step < 1e-12 {
        return Err(Error::NumericalRange(
            "finite-difference step underflowed at the chart edge".into(),
        ));
    }
    let m0 = chart.induced_coefficient(metric, b, 0.0)?;
    let factor = metric.tensor_factor(b).sqrt();
    let eval = |s: f64| -> Result<f64> {
        let m1 = chart.induced_coefficient(metric, b, s)?;
        let m2 = chart.induced_coefficient(metric, b, 2.0 * s)?;
        let d = (-3.0 * m0 + 4.0 * m1 - m2) / (2.0 * s);
        Ok(-0.5 * d / m0 / factor)
    };
    let coarse = eval(step)?;
    let fine = eval(step / 2.0)?;
    Ok(((4.0 * fine - coarse) / 3.0, step))
}
