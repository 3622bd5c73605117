//! Built-in metric families indexed by a sharpness parameter `j`.
//!
//! Each family keeps its base manifold fixed and concentrates all of its
//! variation in a layer of width O(1/j): a conformal blow-up along the rim
//! of a disk, a cinched band around a sphere's equator, and a tall bubble
//! over one point of a flat torus. The `identity` family keeps the base
//! metric at every `j` and is useful as a null case.

use serde::{Deserialize, Serialize};

use crate::manifold::ModelManifold;
use crate::measure::integrate_1d;
use crate::mesh::MeshFeature;
use crate::metric::{Anchor, ConformalMetric, FactorTerm};
use crate::profile::{Piece, RadialProfile, SegmentKind};
use crate::{Error, Result};

/// Smallest admissible sharpness index: the 2/j layer must fit the domain.
pub const MIN_J: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    DiskBlowup,
    CinchedSphere,
    TorusBubble,
    Identity,
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::DiskBlowup => "disk_blowup",
            FamilyKind::CinchedSphere => "cinched_sphere",
            FamilyKind::TorusBubble => "torus_bubble",
            FamilyKind::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<FamilyKind> {
        match name {
            "disk_blowup" => Some(FamilyKind::DiskBlowup),
            "cinched_sphere" => Some(FamilyKind::CinchedSphere),
            "torus_bubble" => Some(FamilyKind::TorusBubble),
            "identity" => Some(FamilyKind::Identity),
            _ => None,
        }
    }
}

/// A chosen family with its fixed (j-independent) parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: FamilyKind,
    pub dim: usize,
    /// Blow-up exponent for `disk_blowup`; must lie in (0, 1/dim).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Equator dip depth for `cinched_sphere`; must lie in (0, 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
}

impl FamilySpec {
    pub fn new(family: FamilyKind, dim: usize) -> Self {
        FamilySpec {
            family,
            dim,
            alpha: None,
            h0: None,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.25)
    }

    pub fn h0(&self) -> f64 {
        self.h0.unwrap_or(0.5)
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            FamilyKind::DiskBlowup => {
                let a = self.alpha();
                let cap = 1.0 / self.dim as f64;
                if !(a > 0.0 && a < cap) {
                    return Err(Error::param("alpha", format!("must lie in (0, {cap})")));
                }
                if self.h0.is_some() {
                    return Err(Error::param("h0", "not a disk_blowup parameter"));
                }
            }
            FamilyKind::CinchedSphere => {
                let h = self.h0();
                if !(h > 0.0 && h < 1.0) {
                    return Err(Error::param("h0", "must lie in (0, 1)"));
                }
                if self.alpha.is_some() {
                    return Err(Error::param("alpha", "not a cinched_sphere parameter"));
                }
            }
            FamilyKind::TorusBubble | FamilyKind::Identity => {
                if self.alpha.is_some() || self.h0.is_some() {
                    return Err(Error::param(
                        "alpha/h0",
                        "this family takes no extra parameters",
                    ));
                }
            }
        }
        // Dimension limits are owned by the manifold constructors.
        self.base_manifold().map(|_| ())
    }

    fn base_manifold(&self) -> Result<ModelManifold> {
        match self.family {
            FamilyKind::DiskBlowup | FamilyKind::Identity => ModelManifold::disk(self.dim, 1.0),
            FamilyKind::CinchedSphere => ModelManifold::sphere(self.dim),
            FamilyKind::TorusBubble => ModelManifold::square_torus(self.dim),
        }
    }

    /// The fixed background metric every member is compared against.
    pub fn base_metric(&self) -> Result<ConformalMetric> {
        Ok(ConformalMetric::base(self.base_manifold()?))
    }

    /// The j-th member of the sequence.
    pub fn metric(&self, j: u32) -> Result<ConformalMetric> {
        self.validate()?;
        match self.family {
            FamilyKind::DiskBlowup => disk_blowup(self.dim, self.alpha(), j),
            FamilyKind::CinchedSphere => cinched_sphere(self.dim, self.h0(), j),
            FamilyKind::TorusBubble => torus_bubble(self.dim, j),
            FamilyKind::Identity => self.base_metric(),
        }
    }

    /// The set the family concentrates at, as a scalar anchor.
    pub fn anchor(&self) -> Anchor {
        match self.family {
            FamilyKind::DiskBlowup | FamilyKind::Identity => Anchor::Boundary,
            FamilyKind::CinchedSphere => Anchor::Equator,
            FamilyKind::TorusBubble => Anchor::Point {
                at: vec![0.0; self.dim],
            },
        }
    }

    /// Extra mesh rings that align vertices with the family's layer edges,
    /// so discrete distances and volumes see the layer instead of straddling
    /// it.
    pub fn mesh_features(&self, j: u32) -> Vec<MeshFeature> {
        let j = j as f64;
        match self.family {
            FamilyKind::DiskBlowup => vec![
                MeshFeature::BoundaryOffsetRing { offset: 1.0 / j },
                MeshFeature::BoundaryOffsetRing { offset: 2.0 / j },
            ],
            FamilyKind::CinchedSphere => {
                let eq = std::f64::consts::FRAC_PI_2;
                vec![
                    MeshFeature::ColatitudeRing { colat: eq - 1.0 / j },
                    MeshFeature::ColatitudeRing { colat: eq },
                    MeshFeature::ColatitudeRing { colat: eq + 1.0 / j },
                ]
            }
            FamilyKind::TorusBubble => {
                if self.dim != 2 {
                    return Vec::new();
                }
                let w = bubble_ramp_width(j);
                vec![
                    MeshFeature::PointRing {
                        center: vec![0.0, 0.0],
                        radius: 1.0 / j,
                    },
                    MeshFeature::PointRing {
                        center: vec![0.0, 0.0],
                        radius: (1.0 + w) / j,
                    },
                ]
            }
            FamilyKind::Identity => Vec::new(),
        }
    }

    /// Candidate widths for carving the certified region away from the
    /// anchor, in units the anchor scalar uses.
    pub fn candidate_widths(&self, j: u32) -> Vec<f64> {
        if matches!(self.family, FamilyKind::Identity) {
            return vec![0.0];
        }
        let j = j as f64;
        [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0]
            .iter()
            .map(|m| m / j)
            .collect()
    }

    /// Short parameter summary for report rows.
    pub fn params_label(&self) -> String {
        match self.family {
            FamilyKind::DiskBlowup => format!("alpha={}", self.alpha()),
            FamilyKind::CinchedSphere => format!("h0={}", self.h0()),
            FamilyKind::TorusBubble | FamilyKind::Identity => "-".to_string(),
        }
    }
}

fn check_j(j: u32) -> Result<f64> {
    if j < MIN_J {
        return Err(Error::param("j", format!("must be at least {MIN_J}")));
    }
    Ok(j as f64)
}

/// Conformal factor growing to `j^alpha` in a width-1/j collar along the
/// rim of the unit disk, blending back to 1 across the next 1/j.
pub fn disk_blowup(n: usize, alpha: f64, j: u32) -> Result<ConformalMetric> {
    let cap = 1.0 / n as f64;
    if !(alpha > 0.0 && alpha < cap) {
        return Err(Error::param("alpha", format!("must lie in (0, {cap})")));
    }
    let jf = check_j(j)?;
    let peak = jf.powf(alpha);
    let profile = RadialProfile::new(vec![
        Piece {
            end: 1.0 / jf,
            kind: SegmentKind::Constant { value: peak },
        },
        Piece {
            end: 2.0 / jf,
            kind: SegmentKind::Blend {
                from: peak,
                to: 1.0,
            },
        },
        Piece {
            end: 1.0,
            kind: SegmentKind::Constant { value: 1.0 },
        },
    ])?;
    ConformalMetric::base(ModelManifold::disk(n, 1.0)?).with_term(FactorTerm {
        anchor: Anchor::Boundary,
        profile,
        squared: true,
    })
}

/// Conformal factor dipping to `h0` on the sphere's equator over a band of
/// half-width 1/j, with unit factor outside the band.
pub fn cinched_sphere(n: usize, h0: f64, j: u32) -> Result<ConformalMetric> {
    if !(h0 > 0.0 && h0 < 1.0) {
        return Err(Error::param("h0", "must lie in (0, 1)"));
    }
    let jf = check_j(j)?;
    let rise = 1.0 - h0;
    // Quartic-free quintic through (0, h0) and (1, 1) with zero first and
    // second derivative at 0 and zero first derivative at 1, so both joins
    // are smooth and the dip profile rises monotonically.
    let profile = RadialProfile::new(vec![
        Piece {
            end: 1.0 / jf,
            kind: SegmentKind::Poly {
                coeffs: vec![
                    h0,
                    0.0,
                    rise,
                    7.0 * rise,
                    -12.0 * rise,
                    5.0 * rise,
                ],
            },
        },
        Piece {
            end: std::f64::consts::FRAC_PI_2,
            kind: SegmentKind::Constant { value: 1.0 },
        },
    ])?;
    ConformalMetric::base(ModelManifold::sphere(n)?).with_term(FactorTerm {
        anchor: Anchor::Equator,
        profile,
        squared: true,
    })
}

/// Width, relative to 1/j, of the ramp that brings the bubble factor back
/// down to 1. Shrinking it with j is what makes the shell contribution
/// vanish; a fixed-width ramp would keep it bounded away from zero.
fn bubble_ramp_width(j: f64) -> f64 {
    1.0 / j.sqrt()
}

/// Conformal factor equal to `j` on a ball of radius 1/j around one point
/// of the flat square torus, decaying geometrically to 1 across a thin
/// shell. The blown-up ball carries volume close to that of a unit ball.
pub fn torus_bubble(n: usize, j: u32) -> Result<ConformalMetric> {
    let jf = check_j(j)?;
    let w = bubble_ramp_width(jf);
    let profile = RadialProfile::new(vec![
        Piece {
            end: 1.0 / jf,
            kind: SegmentKind::Constant { value: jf },
        },
        Piece {
            end: (1.0 + w) / jf,
            kind: SegmentKind::LogBlend { from: jf, to: 1.0 },
        },
        Piece {
            end: 1.0,
            kind: SegmentKind::Constant { value: 1.0 },
        },
    ])?;
    ConformalMetric::base(ModelManifold::square_torus(n)?).with_term(FactorTerm {
        anchor: Anchor::Point { at: vec![0.0; n] },
        profile,
        squared: true,
    })
}

/// Normalized shell mass `j^{-n} * integral of f(s/j)^n s^{n-1} ds` over
/// `s` in [1, 2], where `f` is the torus bubble's length factor. The bubble
/// construction is sound only if this tends to zero along j.
pub fn check_construction_hyp(n: usize, j: u32) -> Result<f64> {
    let g = torus_bubble(n, j)?;
    let term = &g.terms()[0];
    let jf = j as f64;
    let scale = jf.powi(-(n as i32));
    let integrand = |s: f64| {
        let f = term.tensor_factor_at(s / jf).sqrt();
        scale * f.powi(n as i32) * s.powi(n as i32 - 1)
    };
    let w = bubble_ramp_width(jf);
    let r = integrate_1d(integrand, 1.0, 2.0, &[1.0 + w], 6);
    Ok(r.value)
}
