//! Hausdorff distance between finite samples of compact sets.
//!
//! Distances are measured in the flat torus metric, the minimum Euclidean
//! length over lattice translates. Computation is exact and pairwise.

use serde::{Deserialize, Serialize};

use crate::chart::ChartPoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactSample {
    pub label: String,
    points: Vec<ChartPoint>,
}

impl CompactSample {
    pub fn new(label: impl Into<String>, points: Vec<ChartPoint>) -> Result<Self> {
        let label = label.into();
        if points.is_empty() {
            return Err(Error::EmptySample(label));
        }
        Ok(CompactSample { label, points })
    }

    pub fn points(&self) -> &[ChartPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Union with another sample.
    pub fn union(&self, other: &CompactSample, label: impl Into<String>) -> CompactSample {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        CompactSample {
            label: label.into(),
            points,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let s: CompactSample = serde_json::from_str(text)?;
        if s.points.is_empty() {
            return Err(Error::EmptySample(s.label));
        }
        Ok(s)
    }
}

/// Distance from `x` to the nearest point of `b`, stopping as soon as it drops to `floor`.
#[inline]
fn point_to_set(x: &ChartPoint, b: &[ChartPoint], floor: f64, d: &impl Fn(&ChartPoint, &ChartPoint) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    for y in b {
        let e = d(x, y);
        if e < best {
            best = e;
            if best <= floor {
                break;
            }
        }
    }
    best
}

/// `sup_{a∈A} inf_{b∈B} d(a, b)` for an arbitrary point metric `d`.
pub fn directed_hausdorff_by(a: &[ChartPoint], b: &[ChartPoint], d: impl Fn(&ChartPoint, &ChartPoint) -> f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample("Hausdorff distance of an empty set".into()));
    }
    let mut worst: f64 = 0.0;
    for x in a {
        // once x is within the current worst it cannot raise the maximum
        worst = worst.max(point_to_set(x, b, worst, &d));
    }
    Ok(worst)
}

/// `sup_{a∈A} d(a, B)` in the flat torus metric.
pub fn directed_hausdorff(a: &CompactSample, b: &CompactSample) -> Result<f64> {
    directed_hausdorff_by(&a.points, &b.points, ChartPoint::flat_distance)
}

/// `max(sup_A d(·, B), sup_B d(·, A))` in the flat torus metric.
pub fn hausdorff_distance(a: &CompactSample, b: &CompactSample) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

pub fn hausdorff_points(a: &[ChartPoint], b: &[ChartPoint]) -> Result<f64> {
    Ok(directed_hausdorff_by(a, b, ChartPoint::flat_distance)?
        .max(directed_hausdorff_by(b, a, ChartPoint::flat_distance)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceCheck {
    /// Every point of the limit is within `ε` of every tail member.
    pub cond1: bool,
    /// Every point of every tail member is within `ε` of the limit.
    pub cond2: bool,
    pub tail_start: usize,
    pub d_h: Vec<f64>,
}

impl SequenceCheck {
    pub fn tail(&self) -> &[f64] {
        &self.d_h[self.tail_start..]
    }

    pub fn converged(&self) -> bool {
        self.cond1 && self.cond2
    }
}

/// Finite-sequence version of Hausdorff convergence `X_j → X` at level `ε`.
///
/// The tail starts at `tail_start` (default `⌈len/2⌉`). The two pointwise
/// conditions are evaluated directly and then checked against the `d_H` tail.
pub fn sequence_convergence_check(
    xs: &[CompactSample],
    x: &CompactSample,
    eps: f64,
    tail_start: Option<usize>,
) -> Result<SequenceCheck> {
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 sequence members, got {}", xs.len())));
    }
    let start = tail_start.unwrap_or(xs.len().div_ceil(2));
    if start >= xs.len() {
        return Err(Error::InvalidArgument(format!("tail start {start} past the sequence end")));
    }
    let d_h = xs.iter().map(|xj| hausdorff_distance(xj, x)).collect::<Result<Vec<_>>>()?;
    let tail = &xs[start..];
    let cond1 = x
        .points
        .iter()
        .all(|p| tail.iter().all(|xj| xj.points.iter().any(|q| p.flat_distance(q) <= eps)));
    let cond2 = tail
        .iter()
        .all(|xj| xj.points.iter().all(|q| x.points.iter().any(|p| q.flat_distance(p) <= eps)));
    let tail_ok = d_h[start..].iter().all(|&d| d <= eps);
    assert_eq!(
        cond1 && cond2,
        tail_ok,
        "pointwise conditions disagree with the Hausdorff tail"
    );
    Ok(SequenceCheck {
        cond1,
        cond2,
        tail_start: start,
        d_h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<ChartPoint> {
        (0..n)
            .map(|_| ChartPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)))
            .collect()
    }

    fn brute(a: &[ChartPoint], b: &[ChartPoint]) -> f64 {
        let mut sup: f64 = 0.0;
        for x in a {
            let mut inf = f64::INFINITY;
            for y in b {
                inf = inf.min(x.flat_distance(y));
            }
            sup = sup.max(inf);
        }
        sup
    }

    fn sample(label: &str, pts: Vec<ChartPoint>) -> CompactSample {
        CompactSample::new(label, pts).unwrap()
    }

    #[test]
    fn identity_and_singletons() {
        let a = sample("a", vec![ChartPoint::origin()]);
        let b = sample("b", vec![ChartPoint::new(1.0, 0.0)]);
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn subset_and_asymmetry() {
        let a = sample("a", vec![ChartPoint::origin(), ChartPoint::new(0.5, 0.5)]);
        let b = a.union(&sample("far", vec![ChartPoint::new(PI, PI)]), "b");
        assert_eq!(directed_hausdorff(&a, &b).unwrap(), 0.0);
        assert!(directed_hausdorff(&b, &a).unwrap() > 0.0);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(CompactSample::new("x", vec![]), Err(Error::EmptySample(_))));
        assert!(directed_hausdorff_by(&[], &[ChartPoint::origin()], ChartPoint::flat_distance).is_err());
    }

    #[test]
    fn cross_sample_against_dense_cross() {
        let cross = |h: f64| -> Vec<ChartPoint> {
            let m = (TAU / h).round() as usize;
            (0..m)
                .flat_map(|k| {
                    let s = k as f64 * TAU / m as f64;
                    [ChartPoint::new(PI, s), ChartPoint::new(s, PI)]
                })
                .collect()
        };
        let h = TAU / 256.0;
        let d = hausdorff_points(&cross(h), &cross(h / 2.0)).unwrap();
        assert!(d <= h / 2.0 + 1e-12, "{d}");
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (na, nb) = (rng.gen_range(1..60), rng.gen_range(1..60));
            let (a, b) = (cloud(&mut rng, na), cloud(&mut rng, nb));
            assert_eq!(directed_hausdorff_by(&a, &b, ChartPoint::flat_distance).unwrap(), brute(&a, &b));
        }
    }

    #[test]
    fn constant_sequence() {
        let x = sample("x", vec![ChartPoint::new(1.0, 1.0), ChartPoint::new(2.0, 3.0)]);
        let xs = vec![x.clone(); 5];
        let c = sequence_convergence_check(&xs, &x, 0.0, None).unwrap();
        assert!(c.cond1 && c.cond2);
        assert!(c.d_h.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn shifted_sequence() {
        let base = vec![ChartPoint::new(1.0, 1.0), ChartPoint::new(2.0, 3.0), ChartPoint::new(5.0, 0.5)];
        let x = sample("x", base.clone());
        let xs: Vec<CompactSample> = (1..=8)
            .map(|j| sample("xj", base.iter().map(|p| p.offset(1.0 / j as f64, 0.0)).collect()))
            .collect();
        let start = 3;
        let eps = 1.0 / (start + 1) as f64 + 1e-12;
        let c = sequence_convergence_check(&xs, &x, eps, Some(start)).unwrap();
        assert!(c.cond1 && c.cond2);
        let tight = sequence_convergence_check(&xs, &x, 0.5 / (start + 1) as f64, Some(start)).unwrap();
        assert!(!tight.converged());
    }

    #[test]
    fn alternating_sequence_fails() {
        let x = sample("x", vec![ChartPoint::new(1.0, 1.0)]);
        let far = sample("far", vec![ChartPoint::new(1.0, 1.0), ChartPoint::new(4.0, 4.0)]);
        let xs: Vec<CompactSample> = (0..6).map(|j| if j % 2 == 0 { x.clone() } else { far.clone() }).collect();
        let c = sequence_convergence_check(&xs, &x, 0.1, None).unwrap();
        assert!(c.cond1);
        assert!(!c.cond2);
    }

    #[test]
    fn sequence_input_validation() {
        let x = sample("x", vec![ChartPoint::origin()]);
        assert!(sequence_convergence_check(&[x.clone(), x.clone()], &x, 0.1, None).is_err());
        assert!(sequence_convergence_check(&[x.clone(), x.clone(), x.clone()], &x, 0.1, Some(3)).is_err());
    }

    fn pts() -> impl Strategy<Value = Vec<ChartPoint>> {
        prop::collection::vec((0.0..TAU, 0.0..TAU), 1..25)
            .prop_map(|v| v.into_iter().map(|(u, w)| ChartPoint::new(u, w)).collect())
    }

    proptest! {
        #[test]
        fn metric_axioms(a in pts(), b in pts(), c in pts()) {
            let ab = hausdorff_points(&a, &b).unwrap();
            let ba = hausdorff_points(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            let bc = hausdorff_points(&b, &c).unwrap();
            let ac = hausdorff_points(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn finite_equivalence(base in pts(), shifts in prop::collection::vec((-0.5f64..0.5, -0.5f64..0.5), 3..8), eps in 0.01f64..0.6) {
            let x = sample("x", base.clone());
            let xs: Vec<CompactSample> = shifts
                .iter()
                .map(|&(du, dv)| sample("xj", base.iter().map(|p| p.offset(du, dv)).collect()))
                .collect();
            let c = sequence_convergence_check(&xs, &x, eps, None).unwrap();
            let tail_max = c.tail().iter().copied().fold(0.0, f64::max);
            if c.converged() {
                prop_assert!(tail_max <= 2.0 * eps);
            }
            if tail_max <= eps {
                prop_assert!(sequence_convergence_check(&xs, &x, 2.0 * eps, None).unwrap().converged());
            }
        }
    }
}
