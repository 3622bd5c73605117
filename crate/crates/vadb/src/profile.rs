//! Piecewise radial profiles.
//!
//! A [`RadialProfile`] is a positive, piecewise-smooth function of a
//! nonnegative scalar (a distance to some reference set). Pieces are laid
//! out consecutively from zero; each piece records only its right endpoint.
//! The final piece must be constant, and the profile takes that value for
//! all inputs past its end, so a profile defined on `[0, 2/j]` extends to
//! the whole manifold.
//!
//! Transitions use the quintic smoothstep, which has vanishing first and
//! second derivative at both ends. Joins between pieces are therefore C^1
//! whenever the values match, which [`RadialProfile::new`] checks.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Quintic smoothstep on `[0, 1]`: `6t^5 - 15t^4 + 10t^3`.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Derivative of [`smoothstep`]: `30 t^2 (1 - t)^2`.
pub fn smoothstep_deriv(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

/// One segment of a radial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentKind {
    /// Fixed value.
    Constant { value: f64 },
    /// Smoothstep interpolation of the value from `from` to `to`.
    Blend { from: f64, to: f64 },
    /// Smoothstep interpolation of the logarithm, i.e. geometric blending.
    /// Stays positive for any positive endpoints and decays fast when the
    /// ratio `from/to` is large.
    LogBlend { from: f64, to: f64 },
    /// Polynomial `sum coeffs[k] * t^k` in the normalized coordinate.
    /// Must be monotone on `[0, 1]` (checked at construction) so the
    /// profile minimum stays an endpoint value.
    Poly { coeffs: Vec<f64> },
    /// `base + amplitude * (1 - t)^power`. Decreasing; `power > 1` gives a
    /// zero slope at the right end while the left slope `-amplitude * power`
    /// stays freely tunable, which smoothsteps cannot do.
    PowerDecay {
        base: f64,
        amplitude: f64,
        power: f64,
    },
}

fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn poly_deriv(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * t + k as f64 * c;
    }
    acc
}

impl SegmentKind {
    fn endpoint_values(&self) -> (f64, f64) {
        match self {
            SegmentKind::Constant { value } => (*value, *value),
            SegmentKind::Blend { from, to } | SegmentKind::LogBlend { from, to } => (*from, *to),
            SegmentKind::Poly { coeffs } => (poly_eval(coeffs, 0.0), poly_eval(coeffs, 1.0)),
            SegmentKind::PowerDecay {
                base, amplitude, ..
            } => (base + amplitude, *base),
        }
    }

    /// Value at normalized position `t` in `[0, 1]`.
    fn value_at(&self, t: f64) -> f64 {
        match self {
            SegmentKind::Constant { value } => *value,
            SegmentKind::Blend { from, to } => from + (to - from) * smoothstep(t),
            SegmentKind::LogBlend { from, to } => {
                (from.ln() + (to.ln() - from.ln()) * smoothstep(t)).exp()
            }
            SegmentKind::Poly { coeffs } => poly_eval(coeffs, t),
            SegmentKind::PowerDecay {
                base,
                amplitude,
                power,
            } => base + amplitude * (1.0 - t).max(0.0).powf(*power),
        }
    }

    /// Derivative with respect to `t` at normalized position `t`.
    fn deriv_at(&self, t: f64) -> f64 {
        match self {
            SegmentKind::Constant { .. } => 0.0,
            SegmentKind::Blend { from, to } => (to - from) * smoothstep_deriv(t),
            SegmentKind::LogBlend { from, to } => {
                (to.ln() - from.ln()) * smoothstep_deriv(t) * self.value_at(t)
            }
            SegmentKind::Poly { coeffs } => poly_deriv(coeffs, t),
            SegmentKind::PowerDecay {
                amplitude, power, ..
            } => -amplitude * power * (1.0 - t).max(0.0).powf(power - 1.0),
        }
    }

    /// Parameter checks beyond positivity, including the monotonicity that
    /// keeps segment extremes at the endpoints.
    fn validate(&self) -> Result<()> {
        match self {
            SegmentKind::Constant { .. }
            | SegmentKind::Blend { .. }
            | SegmentKind::LogBlend { .. } => Ok(()),
            SegmentKind::Poly { coeffs } => {
                if coeffs.is_empty() || !coeffs.iter().all(|c| c.is_finite()) {
                    return Err(Error::param("coeffs", "must be nonempty and finite"));
                }
                let scale = coeffs.iter().map(|c| c.abs()).fold(1.0, f64::max);
                let mut sign = 0.0f64;
                for k in 0..=1024 {
                    let d = poly_deriv(coeffs, k as f64 / 1024.0);
                    if d.abs() > 1e-12 * scale {
                        if sign != 0.0 && sign * d < 0.0 {
                            return Err(Error::param(
                                "coeffs",
                                "polynomial segment must be monotone on [0, 1]",
                            ));
                        }
                        sign = d.signum();
                    }
                }
                Ok(())
            }
            SegmentKind::PowerDecay {
                base,
                amplitude,
                power,
            } => {
                if !(base.is_finite() && *base > 0.0) {
                    return Err(Error::param("base", "must be finite and positive"));
                }
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return Err(Error::param("amplitude", "must be finite and nonnegative"));
                }
                if !(power.is_finite() && *power >= 1.0) {
                    return Err(Error::param("power", "must be >= 1"));
                }
                Ok(())
            }
        }
    }

    fn min_value(&self) -> f64 {
        // All kinds are monotone in t, so extremes sit at the endpoints.
        let (a, b) = self.endpoint_values();
        a.min(b)
    }

    fn max_value(&self) -> f64 {
        let (a, b) = self.endpoint_values();
        a.max(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    /// Right endpoint of this piece; the left endpoint is the previous
    /// piece's `end` (zero for the first).
    pub end: f64,
    pub kind: SegmentKind,
}

/// Positive piecewise function of a nonnegative scalar. See module docs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pieces: Vec<Piece>,
}

/// Join tolerance for value and slope continuity checks.
const JOIN_TOL: f64 = 1e-9;

impl RadialProfile {
    /// Builds and validates a profile. Requirements:
    ///
    /// - at least one piece, strictly increasing positive endpoints;
    /// - every value positive and finite;
    /// - values match across joins (relative tolerance `1e-9`);
    /// - slopes match across joins (always true for smoothstep pieces whose
    ///   values match, checked anyway to catch future segment kinds);
    /// - the last piece is constant, so the extension past the end is C^1.
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::param("pieces", "profile needs at least one piece"));
        }
        let mut prev_end = 0.0;
        for (i, piece) in pieces.iter().enumerate() {
            if !(piece.end.is_finite() && piece.end > prev_end) {
                return Err(Error::param(
                    "pieces",
                    "piece endpoints must be finite and strictly increasing",
                ));
            }
            piece.kind.validate()?;
            let (a, b) = piece.kind.endpoint_values();
            if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
                return Err(Error::param(
                    "pieces",
                    "profile values must be finite and positive",
                ));
            }
            if i + 1 == pieces.len() && !matches!(piece.kind, SegmentKind::Constant { .. }) {
                return Err(Error::param("pieces", "final piece must be constant"));
            }
            prev_end = piece.end;
        }
        let profile = RadialProfile { pieces };
        for i in 1..profile.pieces.len() {
            let s = profile.pieces[i - 1].end;
            let left_v = profile.pieces[i - 1].kind.value_at(1.0);
            let right_v = profile.pieces[i].kind.value_at(0.0);
            let scale = left_v.abs().max(right_v.abs()).max(1.0);
            if (left_v - right_v).abs() > JOIN_TOL * scale {
                return Err(Error::Construction(format!(
                    "profile value jumps from {left_v} to {right_v} at s = {s}"
                )));
            }
            let (w0, w1) = profile.piece_widths(i);
            let left_d = profile.pieces[i - 1].kind.deriv_at(1.0) / w0;
            let right_d = profile.pieces[i].kind.deriv_at(0.0) / w1;
            if (left_d - right_d).abs() > JOIN_TOL * scale {
                return Err(Error::Construction(format!(
                    "profile slope jumps from {left_d} to {right_d} at s = {s}"
                )));
            }
        }
        Ok(profile)
    }

    /// Profile that is identically `value`.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![Piece {
            end: 1.0,
            kind: SegmentKind::Constant { value },
        }])
    }

    fn piece_widths(&self, i: usize) -> (f64, f64) {
        let start_of = |k: usize| if k == 0 { 0.0 } else { self.pieces[k - 1].end };
        (
            self.pieces[i - 1].end - start_of(i - 1),
            self.pieces[i].end - start_of(i),
        )
    }

    /// Locates the piece containing `s` and its normalized coordinate.
    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.max(0.0);
        let mut start = 0.0;
        for (i, piece) in self.pieces.iter().enumerate() {
            if s <= piece.end {
                return (i, (s - start) / (piece.end - start));
            }
            start = piece.end;
        }
        (self.pieces.len() - 1, 1.0)
    }

    /// Profile value at `s >= 0` (inputs past the last endpoint take the
    /// final constant value; negative inputs clamp to zero).
    pub fn value(&self, s: f64) -> f64 {
        let (i, t) = self.locate(s);
        self.pieces[i].kind.value_at(t)
    }

    /// Derivative with respect to `s`.
    pub fn derivative(&self, s: f64) -> f64 {
        if s > self.pieces.last().unwrap().end {
            return 0.0;
        }
        let (i, t) = self.locate(s);
        let start = if i == 0 { 0.0 } else { self.pieces[i - 1].end };
        let width = self.pieces[i].end - start;
        self.pieces[i].kind.deriv_at(t) / width
    }

    /// Exact minimum over `[0, infinity)`. Pieces are monotone, so this is
    /// the minimum over piece endpoint values.
    pub fn min_value(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.kind.min_value())
            .fold(f64::INFINITY, f64::min)
    }

    /// Exact maximum over `[0, infinity)`.
    pub fn max_value(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.kind.max_value())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Piece endpoints, in increasing order. Integrators split panels here
    /// so that every panel sees a smooth integrand.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.end).collect()
    }

    /// End of the last non-trivial piece: past this value the profile is
    /// the final constant.
    pub fn settle_point(&self) -> f64 {
        if self.pieces.len() == 1 {
            0.0
        } else {
            self.pieces[self.pieces.len() - 2].end
        }
    }

    /// The constant value taken for large inputs.
    pub fn tail_value(&self) -> f64 {
        self.pieces.last().unwrap().kind.value_at(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blowup_profile(j: f64, alpha: f64) -> RadialProfile {
        let peak = j.powf(alpha);
        RadialProfile::new(vec![
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
        .unwrap()
    }

    #[test]
    fn smoothstep_endpoint_behavior() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(smoothstep_deriv(0.0), 0.0);
        assert_eq!(smoothstep_deriv(1.0), 0.0);
        // Clamped outside the unit interval.
        assert_eq!(smoothstep(-3.0), 0.0);
        assert_eq!(smoothstep(7.0), 1.0);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let p = blowup_profile(8.0, 0.25);
        let h = 1e-6;
        for &s in &[0.05, 0.13, 0.17, 0.21, 0.4, 0.9] {
            let fd = (p.value(s + h) - p.value(s - h)) / (2.0 * h);
            let an = p.derivative(s);
            assert!(
                (fd - an).abs() < 1e-5 * (1.0 + an.abs()),
                "s = {s}: fd {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn log_blend_derivative_matches_central_differences() {
        let p = RadialProfile::new(vec![
            Piece {
                end: 0.125,
                kind: SegmentKind::Constant { value: 8.0 },
            },
            Piece {
                end: 0.5,
                kind: SegmentKind::LogBlend { from: 8.0, to: 1.0 },
            },
            Piece {
                end: 1.0,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ])
        .unwrap();
        let h = 1e-6;
        for &s in &[0.2, 0.3, 0.45] {
            let fd = (p.value(s + h) - p.value(s - h)) / (2.0 * h);
            let an = p.derivative(s);
            assert!((fd - an).abs() < 1e-4 * (1.0 + an.abs()));
        }
    }

    #[test]
    fn extension_past_last_piece_is_constant() {
        let p = blowup_profile(4.0, 0.5);
        assert_eq!(p.value(1.0), 1.0);
        assert_eq!(p.value(5.0), 1.0);
        assert_eq!(p.derivative(5.0), 0.0);
        assert_eq!(p.tail_value(), 1.0);
        assert!((p.settle_point() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn min_and_max_are_exact() {
        let p = blowup_profile(16.0, 0.25);
        assert!((p.min_value() - 1.0).abs() < 1e-15);
        assert!((p.max_value() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_broken_profiles() {
        // Value jump between pieces.
        let jump = RadialProfile::new(vec![
            Piece {
                end: 0.5,
                kind: SegmentKind::Constant { value: 2.0 },
            },
            Piece {
                end: 1.0,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ]);
        assert!(jump.is_err());
        // Non-constant tail.
        let tail = RadialProfile::new(vec![Piece {
            end: 1.0,
            kind: SegmentKind::Blend { from: 1.0, to: 2.0 },
        }]);
        assert!(tail.is_err());
        // Non-positive value.
        let neg = RadialProfile::new(vec![Piece {
            end: 1.0,
            kind: SegmentKind::Constant { value: 0.0 },
        }]);
        assert!(neg.is_err());
        // Decreasing endpoints.
        let order = RadialProfile::new(vec![
            Piece {
                end: 0.5,
                kind: SegmentKind::Constant { value: 1.0 },
            },
            Piece {
                end: 0.25,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ]);
        assert!(order.is_err());
    }

    #[test]
    fn poly_segment_evaluates_and_differentiates() {
        // 0.1 + 0.9 (t^2 + 7t^3 - 12t^4 + 5t^5): monotone from 0.1 to 1
        // with zero slope at both ends.
        let coeffs = vec![0.1, 0.0, 0.9, 6.3, -10.8, 4.5];
        let p = RadialProfile::new(vec![
            Piece {
                end: 0.5,
                kind: SegmentKind::Poly {
                    coeffs: coeffs.clone(),
                },
            },
            Piece {
                end: 2.0,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ])
        .unwrap();
        assert!((p.value(0.0) - 0.1).abs() < 1e-15);
        assert!((p.value(0.5) - 1.0).abs() < 1e-12);
        assert!((p.min_value() - 0.1).abs() < 1e-15);
        let h = 1e-6;
        for &s in &[0.1, 0.2, 0.3, 0.45] {
            let fd = (p.value(s + h) - p.value(s - h)) / (2.0 * h);
            assert!((fd - p.derivative(s)).abs() < 1e-5);
        }
        // A non-monotone polynomial is rejected.
        let humped = RadialProfile::new(vec![
            Piece {
                end: 0.5,
                kind: SegmentKind::Poly {
                    coeffs: vec![1.0, 4.0, -4.0],
                },
            },
            Piece {
                end: 1.0,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ]);
        assert!(humped.is_err());
    }

    #[test]
    fn power_decay_meets_slope_targets() {
        // 1 + 2 (1 - t/0.2)^1.5 on [0, 0.2]: slope -15 at zero, C^1 join to
        // the constant tail.
        let p = RadialProfile::new(vec![
            Piece {
                end: 0.2,
                kind: SegmentKind::PowerDecay {
                    base: 1.0,
                    amplitude: 2.0,
                    power: 1.5,
                },
            },
            Piece {
                end: 1.0,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ])
        .unwrap();
        assert!((p.value(0.0) - 3.0).abs() < 1e-15);
        assert!((p.derivative(0.0) + 15.0).abs() < 1e-12);
        assert_eq!(p.value(0.2), 1.0);
        assert_eq!(p.value(0.7), 1.0);
        let fd = (p.value(0.1 + 1e-7) - p.value(0.1 - 1e-7)) / 2e-7;
        assert!((fd - p.derivative(0.1)).abs() < 1e-5);
        // power = 1 leaves a slope discontinuity at the join; rejected.
        let kinked = RadialProfile::new(vec![
            Piece {
                end: 0.2,
                kind: SegmentKind::PowerDecay {
                    base: 1.0,
                    amplitude: 2.0,
                    power: 1.0,
                },
            },
            Piece {
                end: 1.0,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ]);
        assert!(kinked.is_err());
    }

    #[test]
    fn log_blend_stays_positive_for_steep_ratios() {
        let p = RadialProfile::new(vec![
            Piece {
                end: 0.01,
                kind: SegmentKind::Constant { value: 100.0 },
            },
            Piece {
                end: 0.02,
                kind: SegmentKind::LogBlend {
                    from: 100.0,
                    to: 1.0,
                },
            },
            Piece {
                end: 1.0,
                kind: SegmentKind::Constant { value: 1.0 },
            },
        ])
        .unwrap();
        for k in 0..=100 {
            let s = 0.02 * k as f64 / 100.0;
            assert!(p.value(s) >= 1.0 - 1e-12);
        }
        assert!((p.min_value() - 1.0).abs() < 1e-15);
    }
}
