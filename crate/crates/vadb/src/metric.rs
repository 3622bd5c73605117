//! Conformal metrics over model manifolds.
//!
//! A [`ConformalMetric`] is a base manifold together with a product of
//! positive scalar factors applied to the base metric tensor. Each factor is
//! a [`RadialProfile`] read off an [`Anchor`] scalar (chart radius, distance
//! to a point, distance to the sphere equator, or distance to the boundary).
//!
//! Factors come in two conventions, chosen per term:
//!
//! - `squared = true`: the profile value scales *lengths*, so the tensor is
//!   multiplied by its square;
//! - `squared = false`: the profile value multiplies the tensor directly.
//!
//! Curve lengths integrate the pointwise length factor along base-metric
//! geodesic segments between consecutive polyline points: chart-straight
//! segments on flat manifolds (minimal image on the torus) and great-circle
//! arcs on the sphere.

use serde::{Deserialize, Serialize};

use crate::manifold::{norm, ModelManifold};
use crate::profile::RadialProfile;
use crate::{Error, Result};

/// The scalar a factor profile is evaluated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "anchor", rename_all = "snake_case")]
pub enum Anchor {
    /// Chart radius `|x|` on disk, ball, annulus, or shell charts.
    Origin,
    /// Base-metric distance to a fixed point.
    Point { at: Vec<f64> },
    /// Distance to the sphere's equatorial hypersurface (first polar angle
    /// away from `pi/2`).
    Equator,
    /// Distance to the manifold boundary.
    Boundary,
}

/// One multiplicative factor of a conformal metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorTerm {
    pub anchor: Anchor,
    pub profile: RadialProfile,
    /// See the module docs: `true` scales lengths, `false` scales the tensor.
    pub squared: bool,
}

impl FactorTerm {
    /// Contribution of this term to the tensor factor at anchor scalar `s`.
    pub fn tensor_factor_at(&self, s: f64) -> f64 {
        let v = self.profile.value(s);
        if self.squared {
            v * v
        } else {
            v
        }
    }

    /// Smallest possible tensor contribution (exact, the profile min).
    pub fn tensor_factor_min(&self) -> f64 {
        let v = self.profile.min_value();
        if self.squared {
            v * v
        } else {
            v
        }
    }

    /// Largest possible tensor contribution.
    pub fn tensor_factor_max(&self) -> f64 {
        let v = self.profile.max_value();
        if self.squared {
            v * v
        } else {
            v
        }
    }
}

/// A base manifold with a product of conformal factor terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalMetric {
    manifold: ModelManifold,
    terms: Vec<FactorTerm>,
}

impl ConformalMetric {
    /// The base metric itself (empty factor product).
    pub fn base(manifold: ModelManifold) -> Self {
        ConformalMetric {
            manifold,
            terms: Vec::new(),
        }
    }

    /// Adds a factor term after checking that its anchor makes sense on the
    /// underlying manifold.
    pub fn with_term(mut self, term: FactorTerm) -> Result<Self> {
        match &term.anchor {
            Anchor::Origin => {
                if !matches!(
                    self.manifold,
                    ModelManifold::Disk { .. } | ModelManifold::Annulus { .. }
                ) {
                    return Err(Error::Usage(format!(
                        "origin anchor needs a radial chart, got {}",
                        self.manifold.kind_name()
                    )));
                }
            }
            Anchor::Point { at } => self.manifold.validate_point(at)?,
            Anchor::Equator => {
                if !matches!(self.manifold, ModelManifold::Sphere { .. }) {
                    return Err(Error::Usage(format!(
                        "equator anchor needs a sphere, got {}",
                        self.manifold.kind_name()
                    )));
                }
            }
            Anchor::Boundary => {
                if !self.manifold.has_boundary() {
                    return Err(Error::Usage(format!(
                        "boundary anchor needs a boundary, got {}",
                        self.manifold.kind_name()
                    )));
                }
            }
        }
        self.terms.push(term);
        Ok(self)
    }

    pub fn manifold(&self) -> &ModelManifold {
        &self.manifold
    }

    pub fn terms(&self) -> &[FactorTerm] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    /// Anchor scalar for a term at chart point `p`.
    pub fn anchor_scalar(&self, anchor: &Anchor, p: &[f64]) -> f64 {
        match anchor {
            Anchor::Origin => norm(p),
            Anchor::Point { at } => self.manifold.point_distance(p, at),
            Anchor::Equator => (p[0] - std::f64::consts::FRAC_PI_2).abs(),
            Anchor::Boundary => self
                .manifold
                .boundary_distance(p)
                .expect("anchor validated at construction"),
        }
    }

    /// Product of all term contributions to the metric tensor at `p`.
    pub fn tensor_factor(&self, p: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.tensor_factor_at(self.anchor_scalar(&t.anchor, p)))
            .product()
    }

    /// Pointwise length scaling relative to the base metric.
    pub fn length_factor(&self, p: &[f64]) -> f64 {
        self.tensor_factor(p).sqrt()
    }

    /// Quadratic form `g(v, v)` at `p`.
    pub fn form(&self, p: &[f64], v: &[f64]) -> f64 {
        self.tensor_factor(p) * self.manifold.base_form(p, v)
    }

    /// `sqrt(g(v, v))`.
    pub fn speed(&self, p: &[f64], v: &[f64]) -> f64 {
        self.form(p, v).sqrt()
    }

    /// Density of the metric's volume measure against the base volume.
    pub fn volume_weight(&self, p: &[f64]) -> f64 {
        self.tensor_factor(p).powf(self.dim() as f64 / 2.0)
    }

    /// Density of the induced hypersurface measure against the base one.
    pub fn area_weight(&self, p: &[f64]) -> f64 {
        self.tensor_factor(p).powf((self.dim() as f64 - 1.0) / 2.0)
    }

    /// Product of per-term minima: a global lower bound for the tensor
    /// factor, exact whenever at most one term is non-constant.
    pub fn tensor_factor_lower_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.tensor_factor_min()).product()
    }

    /// Product of per-term maxima (upper bound, same caveat).
    pub fn tensor_factor_upper_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.tensor_factor_max()).product()
    }

    /// Length of the polyline through `points`, where consecutive points are
    /// joined by base-metric geodesic segments. Each segment is split at
    /// parameter values where an anchor scalar crosses a profile breakpoint,
    /// then integrated adaptively, so narrow profile features are not
    /// stepped over.
    pub fn curve_length(&self, points: &[Vec<f64>]) -> Result<f64> {
        for p in points {
            self.manifold.validate_point(p)?;
        }
        let mut total = 0.0;
        for pair in points.windows(2) {
            total += self.segment_length(&pair[0], &pair[1])?;
        }
        Ok(total)
    }

    fn segment_length(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        let base_len = self.manifold.point_distance(p, q);
        if base_len < 1e-15 {
            return Ok(0.0);
        }
        let segment = Segment::new(&self.manifold, p, q)?;
        if self.terms.is_empty() {
            return Ok(base_len);
        }
        let weight = |t: f64| self.length_factor(&segment.at(t));
        let cuts = self.breakpoint_cuts(&segment);
        let mut acc = 0.0;
        let mut lo = 0.0;
        for hi in cuts.into_iter().chain(std::iter::once(1.0)) {
            if hi - lo > 1e-12 {
                acc += adaptive_simpson(&weight, lo, hi, 1e-12, 18);
            }
            lo = hi;
        }
        Ok(acc * base_len)
    }

    /// Parameter values in `(0, 1)` where some anchor scalar crosses a
    /// profile breakpoint, found by dense sampling plus bisection.
    fn breakpoint_cuts(&self, segment: &Segment<'_>) -> Vec<f64> {
        const SCAN: usize = 64;
        let mut cuts = Vec::new();
        for term in &self.terms {
            let scalar = |t: f64| self.anchor_scalar(&term.anchor, &segment.at(t));
            let samples: Vec<f64> = (0..=SCAN).map(|k| scalar(k as f64 / SCAN as f64)).collect();
            for &b in &term.profile.breakpoints() {
                for k in 0..SCAN {
                    let (fa, fb) = (samples[k] - b, samples[k + 1] - b);
                    if fa == 0.0 || fa * fb < 0.0 {
                        let mut lo = k as f64 / SCAN as f64;
                        let mut hi = (k + 1) as f64 / SCAN as f64;
                        for _ in 0..40 {
                            let mid = 0.5 * (lo + hi);
                            if (scalar(mid) - b) * (scalar(lo) - b) <= 0.0 {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                        cuts.push(0.5 * (lo + hi));
                    }
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
        cuts.retain(|t| *t > 1e-10 && *t < 1.0 - 1e-10);
        cuts
    }
}

/// Outcome of a pointwise two-metric comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Smallest sampled ratio of tensor factors `a / b`.
    pub min_ratio: f64,
    /// Whether `min_ratio >= lambda`.
    pub holds: bool,
    /// Sample point attaining the minimum.
    pub witness: Vec<f64>,
}

/// Checks `a >= lambda * b` as quadratic forms over the given sample points.
/// For conformal metrics over a shared base this reduces to the ratio of
/// tensor factors, so the check is direction-free.
pub fn comparison_check(
    a: &ConformalMetric,
    b: &ConformalMetric,
    lambda: f64,
    samples: &[Vec<f64>],
) -> Result<ComparisonReport> {
    if a.manifold() != b.manifold() {
        return Err(Error::Usage(
            "comparison requires metrics over the same base manifold".into(),
        ));
    }
    if samples.is_empty() {
        return Err(Error::Input("comparison needs at least one sample".into()));
    }
    let mut min_ratio = f64::INFINITY;
    let mut witness = samples[0].clone();
    for p in samples {
        a.manifold().validate_point(p)?;
        let ratio = a.tensor_factor(p) / b.tensor_factor(p);
        if ratio < min_ratio {
            min_ratio = ratio;
            witness = p.clone();
        }
    }
    Ok(ComparisonReport {
        min_ratio,
        holds: min_ratio >= lambda,
        witness,
    })
}

impl ConformalMetric {
    /// Chart points that pin down each factor's extremes: for every term,
    /// one point per profile breakpoint and per inter-breakpoint midpoint
    /// (anchor scalar 0 included). Comparison sweeps should include these so
    /// minima of piecewise factors are hit exactly, not just approached.
    pub fn anchor_witness_points(&self) -> Vec<Vec<f64>> {
        let mut points = Vec::new();
        for term in &self.terms {
            let mut stops = vec![0.0];
            for b in term.profile.breakpoints() {
                let prev = *stops.last().unwrap();
                stops.push(0.5 * (prev + b));
                stops.push(b);
            }
            for s in stops {
                if let Some(p) = self.point_at_anchor_scalar(&term.anchor, s) {
                    points.push(p);
                }
            }
        }
        points
    }

    /// A chart point whose anchor scalar equals `s`, if one exists.
    pub fn point_at_anchor_scalar(&self, anchor: &Anchor, s: f64) -> Option<Vec<f64>> {
        use std::f64::consts::FRAC_PI_2;
        let p = match (anchor, &self.manifold) {
            (Anchor::Origin, ModelManifold::Disk { dim, radius }) => {
                if s > *radius {
                    return None;
                }
                let mut p = vec![0.0; *dim];
                p[0] = s;
                p
            }
            (Anchor::Origin, ModelManifold::Annulus { dim, r_in, r_out }) => {
                let r = s.clamp(*r_in, *r_out);
                if (r - s).abs() > 1e-12 {
                    return None;
                }
                let mut p = vec![0.0; *dim];
                p[0] = r;
                p
            }
            (Anchor::Boundary, ModelManifold::Disk { dim, radius }) => {
                if s > *radius {
                    return None;
                }
                let mut p = vec![0.0; *dim];
                p[0] = radius - s;
                p
            }
            (Anchor::Boundary, ModelManifold::Annulus { dim, r_in, r_out }) => {
                let r = r_in + s;
                if r > 0.5 * (r_in + r_out) {
                    return None;
                }
                let mut p = vec![0.0; *dim];
                p[0] = r;
                p
            }
            (Anchor::Equator, ModelManifold::Sphere { dim }) => {
                if s > FRAC_PI_2 {
                    return None;
                }
                let mut p = vec![0.0; *dim];
                p[0] = FRAC_PI_2 + s;
                p
            }
            (Anchor::Point { at }, _) => {
                let mut p = at.clone();
                p[0] += s;
                if self.manifold.validate_point(&p).is_err() {
                    return None;
                }
                p
            }
            _ => return None,
        };
        Some(p)
    }
}

/// A base-metric geodesic segment with a `[0, 1]` parametrization.
struct Segment<'a> {
    manifold: &'a ModelManifold,
    start: Vec<f64>,
    /// Flat charts: displacement to add. Sphere: embedded endpoints and the
    /// central angle for spherical interpolation.
    path: SegmentPath,
}

enum SegmentPath {
    Straight(Vec<f64>),
    GreatCircle {
        a: Vec<f64>,
        b: Vec<f64>,
        angle: f64,
    },
}

impl<'a> Segment<'a> {
    fn new(manifold: &'a ModelManifold, p: &[f64], q: &[f64]) -> Result<Self> {
        let path = match manifold {
            ModelManifold::Sphere { .. } => {
                let a = manifold.sphere_to_vec(p);
                let b = manifold.sphere_to_vec(q);
                let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                let angle = dot.clamp(-1.0, 1.0).acos();
                if angle > std::f64::consts::PI - 1e-9 {
                    return Err(Error::Domain(
                        "great-circle segment between antipodal points is ambiguous".into(),
                    ));
                }
                SegmentPath::GreatCircle { a, b, angle }
            }
            _ => SegmentPath::Straight(manifold.displacement(p, q)),
        };
        Ok(Segment {
            manifold,
            start: p.to_vec(),
            path,
        })
    }

    fn at(&self, t: f64) -> Vec<f64> {
        match &self.path {
            SegmentPath::Straight(d) => self
                .start
                .iter()
                .zip(d)
                .map(|(x, dx)| x + t * dx)
                .collect(),
            SegmentPath::GreatCircle { a, b, angle } => {
                if *angle < 1e-12 {
                    return self.start.clone();
                }
                let s = angle.sin();
                let (wa, wb) = (((1.0 - t) * angle).sin() / s, (t * angle).sin() / s);
                let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect();
                let n = norm(&v);
                let unit: Vec<f64> = v.iter().map(|x| x / n).collect();
                self.manifold.sphere_from_vec(&unit)
            }
        }
    }
}

/// Recursive adaptive Simpson quadrature of `f` over `[a, b]`.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_depth: u32,
) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    let tol = rel_tol * whole.abs().max(1e-3);
    recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)
}
