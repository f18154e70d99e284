//! The periodic chart `[0, 2π)²` covering the torus.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Wraps a coordinate into `[0, 2π)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Difference `b - a` reduced to the representative in `[-π, π)`.
#[inline]
pub fn wrapped_delta(a: f64, b: f64) -> f64 {
    let d = (b - a + PI).rem_euclid(TAU) - PI;
    if d >= PI {
        d - TAU
    } else {
        d
    }
}

/// A point of the torus, stored with both coordinates wrapped into `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    u: f64,
    v: f64,
}

impl ChartPoint {
    pub fn new(u: f64, v: f64) -> Self {
        ChartPoint {
            u: wrap(u),
            v: wrap(v),
        }
    }

    pub fn origin() -> Self {
        ChartPoint { u: 0.0, v: 0.0 }
    }

    #[inline]
    pub fn u(&self) -> f64 {
        self.u
    }

    #[inline]
    pub fn v(&self) -> f64 {
        self.v
    }

    #[inline]
    pub fn coords(&self) -> [f64; 2] {
        [self.u, self.v]
    }

    /// Translate by a chart displacement and wrap.
    pub fn offset(&self, du: f64, dv: f64) -> Self {
        ChartPoint::new(self.u + du, self.v + dv)
    }

    /// Shortest chart displacement from `self` to `other` (each component in `[-π, π)`).
    pub fn delta_to(&self, other: &ChartPoint) -> [f64; 2] {
        [wrapped_delta(self.u, other.u), wrapped_delta(self.v, other.v)]
    }

    /// Flat torus distance, the minimum Euclidean length over lattice translates.
    ///
    /// Computed from absolute coordinate gaps so that it is exactly symmetric.
    #[inline]
    pub fn flat_distance(&self, other: &ChartPoint) -> f64 {
        let du = (self.u - other.u).abs();
        let dv = (self.v - other.v).abs();
        let du = du.min(TAU - du);
        let dv = dv.min(TAU - dv);
        (du * du + dv * dv).sqrt()
    }
}

impl From<[f64; 2]> for ChartPoint {
    fn from(c: [f64; 2]) -> Self {
        ChartPoint::new(c[0], c[1])
    }
}

impl fmt::Display for ChartPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.u, self.v)
    }
}

/// A tangent vector at `base`, given by its chart components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub a: f64,
    pub b: f64,
}

impl TangentVector {
    pub fn new(base: ChartPoint, a: f64, b: f64) -> Self {
        TangentVector { base, a, b }
    }

    #[inline]
    pub fn components(&self) -> [f64; 2] {
        [self.a, self.b]
    }

    pub fn scaled(&self, s: f64) -> Self {
        TangentVector {
            base: self.base,
            a: self.a * s,
            b: self.b * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }

    /// Euclidean chart angle of the components.
    pub fn angle(&self) -> f64 {
        wrap(self.b.atan2(self.a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_handles_negative_rounding() {
        assert_eq!(wrap(-1e-18), 0.0);
        assert_eq!(wrap(TAU), 0.0);
        assert!((wrap(-0.5) - (TAU - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn flat_distance_uses_nearest_translate() {
        let a = ChartPoint::new(0.1, 0.0);
        let b = ChartPoint::new(TAU - 0.1, 0.0);
        assert!((a.flat_distance(&b) - 0.2).abs() < 1e-12);
        let c = ChartPoint::new(1.0, 0.0);
        assert!((ChartPoint::origin().flat_distance(&c) - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent(x in -100.0f64..100.0) {
            let w = wrap(x);
            prop_assert!((0.0..TAU).contains(&w));
            prop_assert_eq!(wrap(w), w);
        }

        #[test]
        fn flat_distance_symmetric(a in 0.0f64..TAU, b in 0.0f64..TAU, c in 0.0f64..TAU, d in 0.0f64..TAU) {
            let p = ChartPoint::new(a, b);
            let q = ChartPoint::new(c, d);
            prop_assert_eq!(p.flat_distance(&q), q.flat_distance(&p));
            prop_assert!(p.flat_distance(&q) <= PI * 2f64.sqrt() + 1e-12);
        }

        #[test]
        fn delta_in_half_open_range(a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let d = wrapped_delta(a, b);
            prop_assert!((-PI..PI).contains(&d));
            let r = (b - a - d) / TAU;
            prop_assert!((r - r.round()).abs() < 1e-9);
        }
    }
}
