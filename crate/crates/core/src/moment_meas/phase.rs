use crate::error::{Error, Result};

/// Largest excursion of a statistic outside `[-1, 1]` that is still clipped
/// instead of rejected.
pub const CLIP_TOLERANCE: f64 = 1e-12;

/// Phases `theta_j = arccos q_j` encoding a bounded statistic on the diagonal
/// of a unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    pub theta: Vec<f64>,
    pub label: String,
    /// Largest `|q_j| - 1` that was clipped away.
    pub clipped: f64,
}

impl PhaseProfile {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

pub fn phase_profile(q_values: &[f64], label: impl Into<String>) -> Result<PhaseProfile> {
    let mut clipped = 0.0f64;
    let mut theta = Vec::with_capacity(q_values.len());
    for &q in q_values {
        let excess = q.abs() - 1.0;
        if !(excess <= CLIP_TOLERANCE) {
            return Err(Error::Domain {
                what: "statistic value",
                value: q,
                domain: "[-1, 1] (normalize the statistic)",
            });
        }
        clipped = clipped.max(excess);
        theta.push(q.clamp(-1.0, 1.0).acos());
    }
    Ok(PhaseProfile {
        theta,
        label: label.into(),
        clipped,
    })
}
