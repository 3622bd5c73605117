//! Volumes and boundary areas of conformal metrics, with error estimates.
//!
//! All supported factor products are radially structured: on disks and
//! annuli every factor is a function of the chart radius, on spheres of the
//! colatitude or of the distance to one fixed point, and on tori of the
//! distance to one fixed point. Integration therefore reduces to one
//! dimension against the exact level-set area of the base metric.
//!
//! The 1-D integrals split at profile breakpoints and use Gauss panels that
//! shrink dyadically toward both ends of each smooth piece, because the
//! factor families concentrate their variation in thin layers. The reported
//! error is the difference between two consecutive grading depths, with the
//! finer one as the value.

use serde::{Deserialize, Serialize};

use crate::manifold::{sphere_surface, ModelManifold};
use crate::metric::{Anchor, ConformalMetric};
use crate::{Error, Result};

/// A quadrature value with a two-level refinement error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    /// Integrand evaluations spent across both refinement passes.
    pub nodes: usize,
}

impl QuadratureResult {
    fn exact(value: f64) -> Self {
        QuadratureResult {
            value,
            error: 0.0,
            nodes: 0,
        }
    }

    fn add(self, other: QuadratureResult) -> Self {
        QuadratureResult {
            value: self.value + other.value,
            error: self.error + other.error,
            nodes: self.nodes + other.nodes,
        }
    }
}

fn check_level(level: u32) -> Result<()> {
    if level < 1 {
        return Err(Error::param("level", "must be at least 1"));
    }
    Ok(())
}

/// Total volume of the manifold under the metric.
pub fn volume(metric: &ConformalMetric, level: u32) -> Result<QuadratureResult> {
    check_level(level)?;
    if metric.terms().is_empty() {
        return Ok(QuadratureResult::exact(metric.manifold().base_volume()));
    }
    let n = metric.dim();
    match classify(metric)? {
        Scheme::Chart { lo, hi } => {
            let breaks = chart_breaks(metric);
            Ok(integrate_weighted(metric, &Scheme::Chart { lo, hi }, lo, hi, &breaks, level))
        }
        Scheme::Colat => {
            let breaks = colat_breaks(metric);
            Ok(integrate_weighted(
                metric,
                &Scheme::Colat,
                0.0,
                std::f64::consts::PI,
                &breaks,
                level,
            ))
        }
        scheme @ Scheme::PointBall { inj: None, .. } => {
            // Sphere: distance spheres stay round all the way to the
            // antipode.
            let breaks = point_breaks(metric);
            Ok(integrate_weighted(
                metric,
                &scheme,
                0.0,
                std::f64::consts::PI,
                &breaks,
                level,
            ))
        }
        Scheme::PointBall { inj: Some(inj), .. } => {
            // Flat torus: constant tail over the whole manifold plus the
            // bump integral over the ball where the factor deviates, which
            // must fit inside the injectivity radius.
            let breaks = point_breaks(metric);
            let settle = settle_radius(metric);
            if settle > inj {
                return Err(Error::Construction(format!(
                    "factor support radius {settle} exceeds half the smallest period {inj}"
                )));
            }
            let tail: f64 = metric
                .terms()
                .iter()
                .map(|t| t.tensor_factor_at(f64::INFINITY))
                .product::<f64>()
                .powf(n as f64 / 2.0);
            let base = metric.manifold().base_volume() * tail;
            let area = |s: f64| sphere_surface(n - 1) * s.powi(n as i32 - 1);
            let (bump, err, nodes) = integrate_graded(
                &|s| (point_weight(metric, s) - tail) * area(s),
                0.0,
                settle,
                &breaks,
                grades(level),
            );
            Ok(QuadratureResult {
                value: base + bump,
                error: err,
                nodes,
            })
        }
    }
}

/// Area of the boundary under the metric's induced hypersurface measure.
/// Exact for radial factor products, which are constant on each boundary
/// component.
pub fn boundary_area(metric: &ConformalMetric, level: u32) -> Result<QuadratureResult> {
    check_level(level)?;
    let n = metric.dim();
    let circles: Vec<f64> = match metric.manifold() {
        ModelManifold::Disk { radius, .. } => vec![*radius],
        ModelManifold::Annulus { r_in, r_out, .. } => vec![*r_in, *r_out],
        m => {
            return Err(Error::Usage(format!(
                "a {} has no boundary to measure",
                m.kind_name()
            )))
        }
    };
    if !metric.terms().is_empty() {
        classify(metric)?;
    }
    let mut total = 0.0;
    for r in circles {
        let mut p = vec![0.0; n];
        p[0] = r;
        total += sphere_surface(n - 1) * r.powi(n as i32 - 1) * metric.area_weight(&p);
    }
    Ok(QuadratureResult::exact(total))
}

/// Volume of the sublevel region `{ anchor scalar <= width }`.
pub fn band_volume(
    metric: &ConformalMetric,
    anchor: &Anchor,
    width: f64,
    level: u32,
) -> Result<QuadratureResult> {
    check_level(level)?;
    if !(width.is_finite() && width >= 0.0) {
        return Err(Error::param("width", "must be finite and nonnegative"));
    }
    if width == 0.0 {
        return Ok(QuadratureResult::exact(0.0));
    }
    let scheme = classify_for_band(metric, anchor)?;
    let intervals = band_intervals(metric.manifold(), anchor, width, &scheme)?;
    let breaks = match scheme {
        Scheme::Chart { .. } => chart_breaks(metric),
        Scheme::Colat => colat_breaks(metric),
        Scheme::PointBall { .. } => point_breaks(metric),
    };
    let mut acc = QuadratureResult::exact(0.0);
    for (lo, hi) in intervals {
        if hi > lo {
            acc = acc.add(integrate_weighted(metric, &scheme, lo, hi, &breaks, level));
        }
    }
    Ok(acc)
}

/// 1-D quadrature used by the construction-check integrals: splits at the
/// given interior breakpoints, then integrates each smooth piece with
/// dyadically graded Gauss panels at depths `k` and `k + 1`.
pub fn integrate_1d<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    level: u32,
) -> QuadratureResult {
    let (value, error, nodes) = integrate_graded(&f, lo, hi, breakpoints, grades(level.max(1)));
    QuadratureResult {
        value,
        error,
        nodes,
    }
}

enum Scheme {
    /// Disk or annulus: all factors are functions of the chart radius.
    Chart { lo: f64, hi: f64 },
    /// Sphere with equator-anchored factors: integrate over colatitude.
    Colat,
    /// Factors of the distance to one point; `inj` is the flat-torus
    /// injectivity radius (none on the sphere).
    PointBall { center: Vec<f64>, inj: Option<f64> },
}

fn classify(metric: &ConformalMetric) -> Result<Scheme> {
    let m = metric.manifold();
    match m {
        ModelManifold::Disk { radius, .. } => {
            if all_radial(metric) {
                Ok(Scheme::Chart {
                    lo: 0.0,
                    hi: *radius,
                })
            } else {
                Err(unsupported(metric))
            }
        }
        ModelManifold::Annulus { r_in, r_out, .. } => {
            if all_radial(metric) {
                Ok(Scheme::Chart {
                    lo: *r_in,
                    hi: *r_out,
                })
            } else {
                Err(unsupported(metric))
            }
        }
        ModelManifold::Sphere { .. } => {
            if metric
                .terms()
                .iter()
                .all(|t| matches!(t.anchor, Anchor::Equator))
            {
                Ok(Scheme::Colat)
            } else if let Some(center) = common_point_anchor(metric) {
                Ok(Scheme::PointBall { center, inj: None })
            } else {
                Err(unsupported(metric))
            }
        }
        ModelManifold::Torus { sides, .. } => {
            if let Some(center) = common_point_anchor(metric) {
                let inj = sides.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
                Ok(Scheme::PointBall {
                    center,
                    inj: Some(inj),
                })
            } else {
                Err(unsupported(metric))
            }
        }
    }
}

fn classify_for_band(metric: &ConformalMetric, anchor: &Anchor) -> Result<Scheme> {
    let m = metric.manifold();
    match (anchor, m) {
        (Anchor::Origin | Anchor::Boundary, ModelManifold::Disk { .. })
        | (Anchor::Origin | Anchor::Boundary, ModelManifold::Annulus { .. })
        | (Anchor::Equator, ModelManifold::Sphere { .. }) => classify(metric),
        (Anchor::Point { at }, ModelManifold::Torus { .. })
        | (Anchor::Point { at }, ModelManifold::Sphere { .. }) => {
            let scheme = classify(metric)?;
            match &scheme {
                Scheme::PointBall { center, .. } if center == at => Ok(scheme),
                _ => Err(Error::Usage(
                    "band region must share the metric's point anchor".into(),
                )),
            }
        }
        _ => Err(Error::Usage(format!(
            "band region anchor is not radial on a {}",
            m.kind_name()
        ))),
    }
}

fn unsupported(metric: &ConformalMetric) -> Error {
    Error::Usage(format!(
        "volume quadrature needs a common radial structure on the {}",
        metric.manifold().kind_name()
    ))
}

fn all_radial(metric: &ConformalMetric) -> bool {
    metric
        .terms()
        .iter()
        .all(|t| matches!(t.anchor, Anchor::Origin | Anchor::Boundary))
}

fn common_point_anchor(metric: &ConformalMetric) -> Option<Vec<f64>> {
    let mut center: Option<Vec<f64>> = None;
    for t in metric.terms() {
        match (&t.anchor, &mut center) {
            (Anchor::Point { at }, None) => center = Some(at.clone()),
            (Anchor::Point { at }, Some(c)) if at == c => {}
            _ => return None,
        }
    }
    center
}

/// Radial coordinates where some factor changes pieces (plus structural
/// kinks of the anchor scalar itself).
fn chart_breaks(metric: &ConformalMetric) -> Vec<f64> {
    let (lo, hi, is_annulus) = match metric.manifold() {
        ModelManifold::Disk { radius, .. } => (0.0, *radius, false),
        ModelManifold::Annulus { r_in, r_out, .. } => (*r_in, *r_out, true),
        _ => unreachable!("chart breaks on radial charts only"),
    };
    let mut out = Vec::new();
    for t in metric.terms() {
        for b in t.profile.breakpoints() {
            match t.anchor {
                Anchor::Origin => out.push(b),
                Anchor::Boundary => {
                    if is_annulus {
                        out.push(lo + b);
                        out.push(hi - b);
                    } else {
                        out.push(hi - b);
                    }
                }
                _ => {}
            }
        }
        if is_annulus && matches!(t.anchor, Anchor::Boundary) {
            out.push(0.5 * (lo + hi));
        }
    }
    finish_breaks(out, lo, hi)
}

fn colat_breaks(metric: &ConformalMetric) -> Vec<f64> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut out = vec![FRAC_PI_2];
    for t in metric.terms() {
        for b in t.profile.breakpoints() {
            out.push(FRAC_PI_2 - b);
            out.push(FRAC_PI_2 + b);
        }
    }
    finish_breaks(out, 0.0, PI)
}

fn point_breaks(metric: &ConformalMetric) -> Vec<f64> {
    let mut out = Vec::new();
    for t in metric.terms() {
        out.extend(t.profile.breakpoints());
    }
    finish_breaks(out, 0.0, f64::INFINITY)
}

fn finish_breaks(mut v: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    v.retain(|x| *x > lo + 1e-14 && *x < hi - 1e-14);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    v
}

/// Largest radius past which every point-anchored factor is constant.
fn settle_radius(metric: &ConformalMetric) -> f64 {
    metric
        .terms()
        .iter()
        .map(|t| t.profile.settle_point())
        .fold(0.0, f64::max)
}

fn point_weight(metric: &ConformalMetric, s: f64) -> f64 {
    let n = metric.dim() as f64;
    metric
        .terms()
        .iter()
        .map(|t| t.tensor_factor_at(s))
        .product::<f64>()
        .powf(n / 2.0)
}

fn integrate_weighted(
    metric: &ConformalMetric,
    scheme: &Scheme,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    level: u32,
) -> QuadratureResult {
    let n = metric.dim();
    let surface = sphere_surface(n - 1);
    let integrand = |s: f64| -> f64 {
        match scheme {
            Scheme::Chart { .. } => {
                let mut p = vec![0.0; n];
                p[0] = s;
                metric.volume_weight(&p) * surface * s.powi(n as i32 - 1)
            }
            Scheme::Colat => {
                let mut p = vec![0.0; n];
                p[0] = s;
                metric.volume_weight(&p) * surface * s.sin().powi(n as i32 - 1)
            }
            Scheme::PointBall { inj, .. } => {
                let area = if inj.is_some() {
                    surface * s.powi(n as i32 - 1)
                } else {
                    surface * s.sin().powi(n as i32 - 1)
                };
                point_weight(metric, s) * area
            }
        }
    };
    let (value, error, nodes) = integrate_graded(&integrand, lo, hi, breaks, grades(level));
    QuadratureResult {
        value,
        error,
        nodes,
    }
}

fn band_intervals(
    manifold: &ModelManifold,
    anchor: &Anchor,
    width: f64,
    scheme: &Scheme,
) -> Result<Vec<(f64, f64)>> {
    use std::f64::consts::{FRAC_PI_2, PI};
    Ok(match (anchor, manifold) {
        (Anchor::Origin, ModelManifold::Disk { radius, .. }) => {
            vec![(0.0, width.min(*radius))]
        }
        (Anchor::Origin, ModelManifold::Annulus { r_in, r_out, .. }) => {
            vec![(*r_in, width.clamp(*r_in, *r_out))]
        }
        (Anchor::Boundary, ModelManifold::Disk { radius, .. }) => {
            vec![((radius - width).max(0.0), *radius)]
        }
        (Anchor::Boundary, ModelManifold::Annulus { r_in, r_out, .. }) => {
            let mid = 0.5 * (r_in + r_out);
            if width >= mid - r_in {
                vec![(*r_in, *r_out)]
            } else {
                vec![(*r_in, r_in + width), (r_out - width, *r_out)]
            }
        }
        (Anchor::Equator, ModelManifold::Sphere { .. }) => {
            vec![((FRAC_PI_2 - width).max(0.0), (FRAC_PI_2 + width).min(PI))]
        }
        (Anchor::Point { .. }, ModelManifold::Sphere { .. }) => vec![(0.0, width.min(PI))],
        (Anchor::Point { .. }, ModelManifold::Torus { .. }) => {
            let inj = match scheme {
                Scheme::PointBall { inj: Some(inj), .. } => *inj,
                _ => unreachable!("torus band uses the point-ball scheme"),
            };
            if width > inj {
                return Err(Error::Usage(format!(
                    "band width {width} exceeds half the smallest period {inj}"
                )));
            }
            vec![(0.0, width)]
        }
        _ => unreachable!("band anchor validated earlier"),
    })
}

fn grades(level: u32) -> u32 {
    level + 3
}

/// Integrates `f` over `[lo, hi]`, splitting at interior breakpoints and
/// grading panels dyadically toward both ends of every smooth piece.
/// Returns `(finer value, |finer - coarser|, evaluations)`.
pub(crate) fn integrate_graded<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    k: u32,
) -> (f64, f64, usize) {
    if hi <= lo {
        return (0.0, 0.0, 0);
    }
    let mut cuts = vec![lo];
    for &b in breakpoints {
        if b > lo + 1e-14 && b < hi - 1e-14 {
            cuts.push(b);
        }
    }
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut coarse = 0.0;
    let mut fine = 0.0;
    let mut nodes = 0;
    for pair in cuts.windows(2) {
        coarse += graded_piece(f, pair[0], pair[1], k);
        fine += graded_piece(f, pair[0], pair[1], k + 1);
        nodes += 7 * (2 * k as usize + 2 * (k as usize + 1));
    }
    // Two-level differences saturate at rounding noise; never report less
    // than an ulp-scale bound for a nonzero result.
    let err = (fine - coarse).abs().max(1e-15 * fine.abs());
    (fine, err, nodes)
}

fn graded_piece<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, k: u32) -> f64 {
    let mut fractions = Vec::with_capacity(2 * k as usize + 1);
    fractions.push(0.0);
    for i in (1..=k).rev() {
        fractions.push(0.5f64.powi(i as i32));
    }
    for i in 1..k {
        fractions.push(1.0 - 0.5f64.powi((k - i) as i32));
    }
    fractions.push(1.0);
    let mut acc = 0.0;
    for pair in fractions.windows(2) {
        let (p0, p1) = (a + (b - a) * pair[0], a + (b - a) * pair[1]);
        acc += gauss7(f, p0, p1);
    }
    acc
}

/// 7-point Gauss-Legendre rule on `[a, b]` (exact through degree 13).
fn gauss7<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    const X: [f64; 3] = [
        0.405845151377397,
        0.741531185599394,
        0.949107912342759,
    ];
    const W: [f64; 3] = [
        0.381830050505119,
        0.279705391489277,
        0.129484966168870,
    ];
    const W0: f64 = 0.417959183673469;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = W0 * f(mid);
    for i in 0..3 {
        acc += W[i] * (f(mid - half * X[i]) + f(mid + half * X[i]));
    }
    acc * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::FactorTerm;
    use crate::profile::{Piece, RadialProfile, SegmentKind};
    use std::f64::consts::PI;

    fn disk_band_metric(j: f64, alpha: f64) -> ConformalMetric {
        let peak = j.powf(alpha);
        let profile = RadialProfile::new(vec![
            Piece {
                end: 1.0 / j,
                kind: SegmentKind::Constant { value: peak },
            },
            Piece {
                end: 2.0 / j,
                kind: SegmentKind::Blend { from: peak, to: 1.0 },
            },
            Piece {
                end: 1.0,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ])
        .unwrap();
        ConformalMetric::base(ModelManifold::unit_disk())
            .with_term(FactorTerm {
                anchor: Anchor::Boundary,
                profile,
                squared: true,
            })
            .unwrap()
    }

    /// Test-side fixed-depth Simpson bisection, coded independently of the
    /// shipped Gauss rule.
    fn simpson_oracle<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        if depth == 0 {
            return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
        }
        simpson_oracle(f, a, m, depth - 1) + simpson_oracle(f, m, b, depth - 1)
    }

    #[test]
    fn base_volumes_are_closed_form() {
        let g = ConformalMetric::base(ModelManifold::unit_disk());
        let v = volume(&g, 6).unwrap();
        assert_eq!(v.value, PI);
        assert_eq!(v.error, 0.0);
    }

    #[test]
    fn blowup_volume_matches_independent_oracle() {
        for &j in &[4.0, 16.0, 64.0] {
            let g = disk_band_metric(j, 0.25);
            let got = volume(&g, 6).unwrap();
            let peak = j.powf(0.25);
            let f_of_bdist = |t: f64| {
                if t <= 1.0 / j {
                    peak
                } else if t <= 2.0 / j {
                    let u = (t - 1.0 / j) * j;
                    peak + (1.0 - peak) * crate::profile::smoothstep(u)
                } else {
                    1.0
                }
            };
            let integrand = |r: f64| f_of_bdist(1.0 - r).powi(2) * 2.0 * PI * r;
            let oracle = simpson_oracle(&integrand, 0.0, 1.0 - 2.0 / j, 14)
                + simpson_oracle(&integrand, 1.0 - 2.0 / j, 1.0 - 1.0 / j, 14)
                + simpson_oracle(&integrand, 1.0 - 1.0 / j, 1.0, 14);
            assert!(
                (got.value - oracle).abs() < 1e-8,
                "j = {j}: {} vs oracle {oracle}",
                got.value
            );
            assert!(got.error < 1e-8);
        }
    }

    #[test]
    fn constant_factor_scales_volume_and_area_exactly() {
        for &c in &[0.25, 1.0, 4.0] {
            let g = ConformalMetric::base(ModelManifold::unit_disk())
                .with_term(FactorTerm {
                    anchor: Anchor::Boundary,
                    profile: RadialProfile::constant(c).unwrap(),
                    squared: false,
                })
                .unwrap();
            let v = volume(&g, 4).unwrap();
            assert!((v.value - c * PI).abs() < 1e-12 * c.max(1.0));
            let a = boundary_area(&g, 4).unwrap();
            assert!((a.value - c.sqrt() * 2.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_area_reads_the_rim_factor() {
        // Factor 2 at the rim doubles the circumference.
        let g = disk_band_metric(16.0, 0.25);
        let a = boundary_area(&g, 6).unwrap();
        assert!((a.value - 4.0 * PI).abs() < 1e-12);
        // Annulus: both circles, inner factor applies at r_in.
        let ann = ConformalMetric::base(ModelManifold::annulus(2, 1.0, 2.0).unwrap());
        let a = boundary_area(&ann, 6).unwrap();
        assert!((a.value - 6.0 * PI).abs() < 1e-12);
        // No boundary: asking for its area is a usage error.
        let t = ConformalMetric::base(ModelManifold::square_torus(2).unwrap());
        let err = boundary_area(&t, 6).unwrap_err().to_string();
        assert!(err.contains("torus"), "{err}");
    }

    #[test]
    fn band_volume_is_additive_with_the_complement() {
        let j = 16.0;
        let g = disk_band_metric(j, 0.25);
        let total = volume(&g, 6).unwrap().value;
        let band = band_volume(&g, &Anchor::Boundary, 2.0 / j, 6).unwrap().value;
        let inner = PI * (1.0 - 2.0 / j) * (1.0 - 2.0 / j);
        assert!(
            (band + inner - total).abs() < 1e-9,
            "band {band} + inner {inner} vs total {total}"
        );
    }

    #[test]
    fn equator_dip_volume_matches_oracle() {
        let (h0, j) = (0.5, 64.0);
        let dip = RadialProfile::new(vec![
            Piece {
                end: 1.0 / j,
                kind: SegmentKind::Poly {
                    coeffs: vec![
                        h0,
                        0.0,
                        1.0 - h0,
                        7.0 * (1.0 - h0),
                        -12.0 * (1.0 - h0),
                        5.0 * (1.0 - h0),
                    ],
                },
            },
            Piece {
                end: std::f64::consts::FRAC_PI_2,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ])
        .unwrap();
        let g = ConformalMetric::base(ModelManifold::sphere(2).unwrap())
            .with_term(FactorTerm {
                anchor: Anchor::Equator,
                profile: dip.clone(),
                squared: true,
            })
            .unwrap();
        let got = volume(&g, 6).unwrap();
        let integrand = |theta: f64| {
            let u = (theta - std::f64::consts::FRAC_PI_2).abs();
            dip.value(u).powi(2) * 2.0 * PI * theta.sin()
        };
        let mid = std::f64::consts::FRAC_PI_2;
        let oracle = simpson_oracle(&integrand, 0.0, mid - 1.0 / j, 12)
            + simpson_oracle(&integrand, mid - 1.0 / j, mid, 12)
            + simpson_oracle(&integrand, mid, mid + 1.0 / j, 12)
            + simpson_oracle(&integrand, mid + 1.0 / j, PI, 12);
        assert!((got.value - oracle).abs() < 1e-7);
        // The dip only removes volume, and only a sliver of it.
        assert!(got.value < 4.0 * PI);
        assert!(got.value > 4.0 * PI - 0.2);
    }

    #[test]
    fn torus_bump_volume_matches_oracle() {
        let j = 8.0;
        let w = 1.0 / f64::sqrt(j);
        let bump = RadialProfile::new(vec![
            Piece {
                end: 1.0 / j,
                kind: SegmentKind::Constant { value: j },
            },
            Piece {
                end: (1.0 + w) / j,
                kind: SegmentKind::LogBlend { from: j, to: 1.0 },
            },
            Piece {
                end: 1.0,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ])
        .unwrap();
        let g = ConformalMetric::base(ModelManifold::square_torus(2).unwrap())
            .with_term(FactorTerm {
                anchor: Anchor::Point { at: vec![0.0, 0.0] },
                profile: bump.clone(),
                squared: true,
            })
            .unwrap();
        let got = volume(&g, 6).unwrap();
        let tau = std::f64::consts::TAU;
        let integrand = |s: f64| (bump.value(s).powi(2) - 1.0) * 2.0 * PI * s;
        let oracle = tau * tau
            + simpson_oracle(&integrand, 0.0, 1.0 / j, 12)
            + simpson_oracle(&integrand, 1.0 / j, (1.0 + w) / j, 14)
            + simpson_oracle(&integrand, (1.0 + w) / j, 1.0, 12);
        assert!(
            (got.value - oracle).abs() < 1e-6,
            "{} vs {oracle}",
            got.value
        );
        // The ball must fit within half the smallest period.
        let wide = RadialProfile::new(vec![
            Piece {
                end: 4.0,
                kind: SegmentKind::Blend { from: 2.0, to: 1.0 },
            },
            Piece {
                end: 5.0,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ])
        .unwrap();
        let too_wide = ConformalMetric::base(ModelManifold::square_torus(2).unwrap())
            .with_term(FactorTerm {
                anchor: Anchor::Point { at: vec![0.0, 0.0] },
                profile: wide,
                squared: true,
            })
            .unwrap();
        assert!(volume(&too_wide, 4).is_err());
    }

    #[test]
    fn mixed_anchor_products_are_rejected() {
        // Equator factor on a torus can't happen (construction rejects it),
        // but two point anchors at different centers can.
        let p1 = FactorTerm {
            anchor: Anchor::Point { at: vec![0.0, 0.0] },
            profile: RadialProfile::constant(2.0).unwrap(),
            squared: true,
        };
        let p2 = FactorTerm {
            anchor: Anchor::Point { at: vec![1.0, 1.0] },
            profile: RadialProfile::constant(2.0).unwrap(),
            squared: true,
        };
        let g = ConformalMetric::base(ModelManifold::square_torus(2).unwrap())
            .with_term(p1)
            .unwrap()
            .with_term(p2)
            .unwrap();
        assert!(volume(&g, 4).is_err());
    }

    #[test]
    fn error_estimate_brackets_the_truth() {
        let g = disk_band_metric(64.0, 0.25);
        let coarse = volume(&g, 2).unwrap();
        let fine = volume(&g, 8).unwrap();
        assert!((coarse.value - fine.value).abs() <= coarse.error.max(1e-10) * 10.0);
        assert!(
            fine.error <= 2.0 * coarse.error + 1e-15,
            "fine {} vs coarse {}",
            fine.error,
            coarse.error
        );
        assert!(fine.nodes > coarse.nodes);
        assert!(volume(&g, 0).is_err());
    }

    #[test]
    fn sharp_blowup_stays_within_the_closed_form_sandwich() {
        // Lower bound: the factor only adds volume over the flat disk.
        // Upper bound: peak factor over the whole band of width 2/j plus the
        // flat bulk, in closed form.
        for &j in &[4.0f64, 16.0, 64.0, 100.0, 256.0] {
            let alpha = 0.25;
            let g = disk_band_metric(j, alpha);
            let v = volume(&g, 6).unwrap();
            let peak_area = j.powf(2.0 * alpha) * PI * (1.0 - (1.0 - 2.0 / j).powi(2));
            let bulk = PI * (1.0 - 1.0 / j).powi(2);
            assert!(v.value >= PI - 1e-9, "j={j}: {}", v.value);
            assert!(
                v.value <= peak_area + bulk + 1e-9,
                "j={j}: {} vs {}",
                v.value,
                peak_area + bulk
            );
        }
        // At j=100 the upper bound evaluates near 4.33 and the computed
        // volume must sit inside [pi, that bound] and agree with the 1-D
        // oracle to 1e-3.
        let g = disk_band_metric(100.0, 0.25);
        let v = volume(&g, 6).unwrap();
        assert!(v.value >= PI && v.value <= 4.34);
        let j = 100.0f64;
        let peak = j.powf(0.25);
        let f_of_bdist = |t: f64| {
            if t <= 1.0 / j {
                peak
            } else if t <= 2.0 / j {
                let u = (t - 1.0 / j) * j;
                peak + (1.0 - peak) * crate::profile::smoothstep(u)
            } else {
                1.0
            }
        };
        let integrand = |rho: f64| f_of_bdist(1.0 - rho).powi(2) * 2.0 * PI * rho;
        let oracle = simpson_oracle(&integrand, 0.0, 1.0 - 2.0 / j, 12)
            + simpson_oracle(&integrand, 1.0 - 2.0 / j, 1.0, 16);
        assert!((v.value - oracle).abs() < 1e-3, "{} vs {oracle}", v.value);
    }
}
