use serde::{Deserialize, Serialize};

use super::tensor::{TensorField, TrigPoly};
use super::{cr_distance, MetricField};
use crate::error::{Error, Result};

/// How a family member is built from the base metric and a parameter `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `g_t = base + t · direction`.
    Additive(TensorField),
    /// `g_t = e^{2t·φ} · base`, constant base only.
    Conformal(TrigPoly),
}

impl Perturbation {
    pub fn member(&self, base: &MetricField, t: f64) -> Result<MetricField> {
        match self {
            Perturbation::Additive(direction) => {
                if let (Some(b), Some(d)) = (base.as_constant(), direction.as_constant()) {
                    return Ok(MetricField::Constant(b.add(&d.scale(t))));
                }
                Ok(MetricField::Perturbed {
                    base: Box::new(base.clone()),
                    direction: direction.clone(),
                    scale: t,
                })
            }
            Perturbation::Conformal(phi) => {
                let b = base.as_constant().ok_or_else(|| {
                    Error::InvalidArgument("conformal perturbations need a constant base metric".into())
                })?;
                Ok(MetricField::Conformal {
                    base: b,
                    exponent: phi.scaled(t),
                })
            }
        }
    }
}

/// A sequence `g_i → g` indexed by a decreasing positive schedule.
#[derive(Debug, Clone)]
pub struct PerturbationFamily {
    pub base: MetricField,
    pub perturbation: Perturbation,
    pub schedule: Vec<f64>,
    pub members: Vec<MetricField>,
}

impl PerturbationFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// C² distances of the members to the base.
    pub fn c2_distances(&self, n: usize) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| cr_distance(m, &self.base, 2, n))
            .collect()
    }
}

/// Builds and validates a family on an `n × n` check grid.
///
/// Every member must be SPD on the grid and the C² distance to the base must
/// not increase along the schedule.
pub fn make_family(
    base: &MetricField,
    perturbation: Perturbation,
    schedule: &[f64],
    n: usize,
) -> Result<PerturbationFamily> {
    base.validate_on_grid(n)?;
    let mut members = Vec::with_capacity(schedule.len());
    let mut last_t = f64::INFINITY;
    let mut last_dist = f64::INFINITY;
    for &t in schedule {
        if !(t > 0.0 && t < last_t) {
            return Err(Error::FamilyRejected {
                t,
                reason: "schedule must be positive and strictly decreasing".into(),
            });
        }
        let m = perturbation.member(base, t)?;
        m.validate_on_grid(n).map_err(|e| Error::FamilyRejected {
            t,
            reason: e.to_string(),
        })?;
        let d = cr_distance(&m, base, 2, n);
        if d > last_dist * (1.0 + 1e-12) {
            return Err(Error::FamilyRejected {
                t,
                reason: format!("C2 distance increased from {last_dist:e} to {d:e}"),
            });
        }
        last_t = t;
        last_dist = d;
        members.push(m);
    }
    Ok(PerturbationFamily {
        base: base.clone(),
        perturbation,
        schedule: schedule.to_vec(),
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Sym2;

    #[test]
    fn zero_direction_reproduces_base() {
        let base = MetricField::conformal(0.1, 1, 0);
        let fam = make_family(&base, Perturbation::Additive(TensorField::zero()), &[0.5, 0.25], 16).unwrap();
        for m in &fam.members {
            assert_eq!(cr_distance(m, &base, 2, 16), 0.0);
        }
    }

    #[test]
    fn constant_direction_distances() {
        let fam = make_family(
            &MetricField::flat(),
            Perturbation::Additive(TensorField::Constant(Sym2::diag(1.0, 0.0))),
            &[0.5, 0.25, 0.125],
            16,
        )
        .unwrap();
        assert_eq!(fam.c2_distances(16), vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn shear_determinant_bound() {
        let shear = Perturbation::Additive(TensorField::Constant(Sym2::new(0.0, 1.0, 0.0)));
        assert!(make_family(&MetricField::flat(), shear.clone(), &[0.9], 16).is_ok());
        match make_family(&MetricField::flat(), shear, &[1.0], 16) {
            Err(Error::FamilyRejected { t, .. }) => assert_eq!(t, 1.0),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn reports_first_bad_parameter() {
        let shear = Perturbation::Additive(TensorField::Constant(Sym2::new(0.0, 1.0, 0.0)));
        match make_family(&MetricField::flat(), shear, &[1.5, 1.2, 0.5], 16) {
            Err(Error::FamilyRejected { t, .. }) => assert_eq!(t, 1.5),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_decreasing_schedule() {
        let p = Perturbation::Additive(TensorField::zero());
        assert!(make_family(&MetricField::flat(), p, &[0.1, 0.2], 16).is_err());
    }

    #[test]
    fn conformal_family_is_monotone() {
        let fam = make_family(
            &MetricField::flat(),
            Perturbation::Conformal(TrigPoly::cosine(1.0, 1, 0)),
            &[0.2, 0.1, 0.05],
            32,
        )
        .unwrap();
        let d = fam.c2_distances(32);
        assert!(d[0] > d[1] && d[1] > d[2]);
    }
}
