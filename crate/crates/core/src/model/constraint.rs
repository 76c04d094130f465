//! The observation constraint set: the subset of observation space on which
//! all stability constants are required to be uniform.

use serde::{Deserialize, Serialize};

/// A decidable subset of the observation space.
///
/// Membership is checked coordinate-wise for boxes, by absolute value for the
/// annulus, and by exact match (within `1e-12`) for finite sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationConstraint {
    /// The whole observation space: no constraint.
    All,
    /// A coordinate-wise box `[lo_i, hi_i]` per dimension.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Scalar annulus `[-hi, -lo] ∪ [lo, hi]` with `0 < lo < hi`.
    Annulus { lo: f64, hi: f64 },
    /// An explicit finite list of admissible observation values.
    FiniteSet { points: Vec<Vec<f64>> },
}

impl ObservationConstraint {
    /// Validate internal consistency (interval orientation, annulus bounds).
    pub fn validate(&self) -> crate::Result<()> {
        match self {
            ObservationConstraint::All => Ok(()),
            ObservationConstraint::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(crate::Error::InvalidArgument(
                        "box constraint bounds must be nonempty and of equal length".into(),
                    ));
                }
                for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
                    if !(l < h) {
                        return Err(crate::Error::InvalidArgument(format!(
                            "box constraint has lo >= hi in coordinate {i}"
                        )));
                    }
                }
                Ok(())
            }
            ObservationConstraint::Annulus { lo, hi } => {
                if !(0.0 < *lo && lo < hi) {
                    return Err(crate::Error::InvalidArgument(
                        "annulus constraint needs 0 < lo < hi".into(),
                    ));
                }
                Ok(())
            }
            ObservationConstraint::FiniteSet { points } => {
                if points.is_empty() {
                    return Err(crate::Error::InvalidArgument(
                        "finite_set constraint must contain at least one point".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Membership test.
    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            ObservationConstraint::All => true,
            ObservationConstraint::Box { lo, hi } => {
                y.len() == lo.len()
                    && y.iter()
                        .zip(lo.iter().zip(hi))
                        .all(|(v, (l, h))| *l <= *v && *v <= *h)
            }
            ObservationConstraint::Annulus { lo, hi } => {
                y.len() == 1 && {
                    let a = y[0].abs();
                    *lo <= a && a <= *hi
                }
            }
            ObservationConstraint::FiniteSet { points } => points.iter().any(|p| {
                p.len() == y.len() && p.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-12)
            }),
        }
    }

    /// True when the set is bounded (needed for uniform-in-y certification).
    pub fn is_compact(&self) -> bool {
        !matches!(self, ObservationConstraint::All)
    }

    /// Human-readable description used in certificates.
    pub fn describe(&self) -> String {
        match self {
            ObservationConstraint::All => "whole observation space".into(),
            ObservationConstraint::Box { lo, hi } => format!("box {lo:?}..{hi:?}"),
            ObservationConstraint::Annulus { lo, hi } => {
                format!("annulus [-{hi},-{lo}] U [{lo},{hi}]")
            }
            ObservationConstraint::FiniteSet { points } => {
                format!("finite set of {} points", points.len())
            }
        }
    }
}
