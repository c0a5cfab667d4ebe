//! Perfectly-stirred-reactor source terms for a single reactive scalar.
//!
//! The scalar `phi` lives in `[0, 1]`. Reaction follows a one-step
//! Arrhenius-like law `S = A (1 - phi) exp(-phi_a / (phi + phi_i))` and
//! mixing relaxes linearly toward zero, `M = -r phi`. Their sum is the
//! velocity with which probability is advected in composition space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of uniform scan intervals used to bracket drift roots.
pub const ROOT_SCAN_INTERVALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsrParams {
    pub rate_prefactor: f64,
    pub phi_a: f64,
    pub phi_i: f64,
    pub mixing_rate: f64,
}

impl Default for PsrParams {
    fn default() -> Self {
        Self {
            rate_prefactor: 15.0,
            phi_a: 1.8,
            phi_i: 0.15,
            mixing_rate: 0.25,
        }
    }
}

impl PsrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi_i > 0.0) {
            return Err(Error::Domain {
                what: "phi_i",
                value: self.phi_i,
                domain: "(0, inf)",
            });
        }
        // A zero prefactor is allowed: it switches reaction off entirely.
        if !(self.rate_prefactor >= 0.0) || !self.rate_prefactor.is_finite() {
            return Err(Error::Domain {
                what: "rate_prefactor",
                value: self.rate_prefactor,
                domain: "[0, inf)",
            });
        }
        if !(self.mixing_rate >= 0.0) || !self.mixing_rate.is_finite() {
            return Err(Error::Domain {
                what: "mixing_rate",
                value: self.mixing_rate,
                domain: "[0, inf)",
            });
        }
        if !self.phi_a.is_finite() {
            return Err(Error::Domain {
                what: "phi_a",
                value: self.phi_a,
                domain: "finite",
            });
        }
        Ok(())
    }
}

fn check_composition(phi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&phi) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "phi",
            value: phi,
            domain: "[0, 1]",
        })
    }
}

/// Chemical source term `S(phi)`.
pub fn reaction_rate(phi: f64, params: &PsrParams) -> Result<f64> {
    check_composition(phi)?;
    Ok(reaction_unchecked(phi, params))
}

/// Mixing term `M(phi) = -mixing_rate * phi`.
pub fn mixing_rate(phi: f64, params: &PsrParams) -> Result<f64> {
    check_composition(phi)?;
    Ok(mixing_unchecked(phi, params))
}

/// Composition-space velocity `S(phi) + M(phi)`.
pub fn drift(phi: f64, params: &PsrParams) -> Result<f64> {
    check_composition(phi)?;
    Ok(drift_unchecked(phi, params))
}

#[inline]
fn reaction_unchecked(phi: f64, p: &PsrParams) -> f64 {
    p.rate_prefactor * (1.0 - phi) * (-p.phi_a / (phi + p.phi_i)).exp()
}

#[inline]
fn mixing_unchecked(phi: f64, p: &PsrParams) -> f64 {
    -p.mixing_rate * phi
}

#[inline]
pub(crate) fn drift_unchecked(phi: f64, p: &PsrParams) -> f64 {
    reaction_unchecked(phi, p) + mixing_unchecked(phi, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub location: f64,
    pub stability: Stability,
}

/// Locate every zero of the drift on `[0, 1]`.
///
/// Sign changes are bracketed on a uniform scan and refined by bisection until
/// the bracket is narrower than `tol` and the drift magnitude at the returned
/// point is below `tol`. Returns an empty list when the drift vanishes
/// identically (no isolated equilibria).
pub fn find_equilibria(params: &PsrParams, tol: f64) -> Result<Vec<Equilibrium>> {
    params.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Domain {
            what: "tol",
            value: tol,
            domain: "(0, inf)",
        });
    }

    let f = |x: f64| drift_unchecked(x, params);
    let n = ROOT_SCAN_INTERVALS;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let ds: Vec<f64> = xs.iter().map(|&x| f(x)).collect();

    if ds.iter().all(|&d| d == 0.0) {
        return Ok(Vec::new());
    }

    let mut roots = Vec::new();
    for i in 0..=n {
        if ds[i] == 0.0 {
            // Only isolated exact zeros count.
            let left_zero = i > 0 && ds[i - 1] == 0.0;
            if !left_zero {
                roots.push(xs[i]);
            }
            continue;
        }
        if i < n && ds[i + 1] != 0.0 && ds[i].signum() != ds[i + 1].signum() {
            roots.push(bisect(&f, xs[i], xs[i + 1], ds[i], tol));
        }
    }

    Ok(roots
        .into_iter()
        .map(|location| Equilibrium {
            location,
            stability: classify(&f, location),
        })
        .collect())
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64, tol: f64) -> f64 {
    let mut s_lo = f_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (hi - lo) < tol && fm.abs() < tol {
            return mid;
        }
        if fm.signum() == s_lo {
            lo = mid;
            s_lo = fm.signum();
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn classify(f: &impl Fn(f64) -> f64, x: f64) -> Stability {
    let h = 1e-6;
    let a = (x - h).max(0.0);
    let b = (x + h).min(1.0);
    let slope = (f(b) - f(a)) / (b - a);
    if slope < 0.0 {
        return Stability::Stable;
    }
    if slope > 0.0 {
        return Stability::Unstable;
    }
    // Flat crossing: fall back on the bracketing signs.
    if f(a) > 0.0 || f(b) < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}
