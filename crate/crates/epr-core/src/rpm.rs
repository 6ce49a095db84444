//! Analytic ground-energy predictions for random multi-level landscapes.
//!
//! In the large-size limit a landscape taking finitely many intensive level
//! values v₁ < v₂ < … with probabilities p_l satisfies the balance equation
//!
//!   Σ_l p_l / (e − v_l) = 1 / e₀
//!
//! for the ground-energy density e, where e₀ < 0 is the free (zero-potential)
//! ground density of the kinetic graph. The left side decreases from 0⁻ to
//! −∞ as e climbs toward v₁, so there is exactly one root below v₁; this
//! module pins it by bisection to adjacent floats, provides the closed form
//! for two levels, and classifies the dilute (rare deep level) phase by
//! comparing the reservoir-renormalized root against v₁.

use crate::spectral::Phase;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RpmError {
    #[error("level values must be strictly ascending")]
    LevelsNotAscending,
    #[error("levels and weights must have equal nonzero length")]
    LengthMismatch,
    #[error("weights must be positive and sum to 1, got sum {sum}")]
    BadWeights { sum: f64 },
    #[error("free reference energy must be negative, got {e0}")]
    BadReferenceEnergy { e0: f64 },
    #[error("the dilute analysis needs at least two levels")]
    NeedTwoLevels,
}

/// A validated multi-level landscape: ascending intensive levels, positive
/// weights summing to one, and the free kinetic ground density e₀ < 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RpmSpec {
    levels: Vec<f64>,
    weights: Vec<f64>,
    e0_free: f64,
}

impl RpmSpec {
    pub fn new(levels: Vec<f64>, weights: Vec<f64>, e0_free: f64) -> Result<Self, RpmError> {
        if levels.is_empty() || levels.len() != weights.len() {
            return Err(RpmError::LengthMismatch);
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RpmError::LevelsNotAscending);
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w > 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(RpmError::BadWeights { sum });
        }
        if !(e0_free < 0.0) {
            return Err(RpmError::BadReferenceEnergy { e0: e0_free });
        }
        Ok(Self { levels, weights, e0_free })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn e0_free(&self) -> f64 {
        self.e0_free
    }

    /// Σ_l p_l/(e − v_l) − 1/e₀ — zero exactly at the balance root.
    pub fn balance_residual(&self, e: f64) -> f64 {
        let lhs: f64 = self.levels.iter().zip(&self.weights).map(|(&v, &p)| p / (e - v)).sum();
        lhs - 1.0 / self.e0_free
    }

    /// The landscape conditioned on avoiding the deepest level: levels
    /// v₂, v₃, … with weights renormalized to sum to one. `None` when there
    /// is only one level.
    pub fn reservoir_renormalized(&self) -> Option<RpmSpec> {
        if self.levels.len() < 2 {
            return None;
        }
        let rest: f64 = self.weights[1..].iter().sum();
        let weights: Vec<f64> = self.weights[1..].iter().map(|&p| p / rest).collect();
        Some(RpmSpec {
            levels: self.levels[1..].to_vec(),
            weights,
            e0_free: self.e0_free,
        })
    }
}

/// Solve the balance equation for the unique root below the deepest level.
///
/// The bracket starts at [v₁ − |e₀| − 1, v₁ − max(1e-14, 4·ulp(v₁))], doubles
/// its left edge until the sign changes, and bisects until the edges are
/// adjacent floats; the edge with the smaller residual is returned. The
/// result is strictly below v₁.
pub fn solve_e1f(spec: &RpmSpec) -> f64 {
    let v1 = spec.levels[0];
    let gap = (4.0 * ulp(v1)).max(1e-14);
    let mut hi = v1 - gap;
    // f decreases toward −∞ at v₁⁻; if even the pinned right edge is still
    // positive, the root is within the guard gap of v₁ — return the edge.
    if spec.balance_residual(hi) >= 0.0 {
        return hi;
    }
    let mut lo = v1 - spec.e0_free.abs() - 1.0;
    while spec.balance_residual(lo) <= 0.0 {
        lo = v1 - 2.0 * (v1 - lo);
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spec.balance_residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if spec.balance_residual(lo).abs() <= spec.balance_residual(hi).abs() {
        lo
    } else {
        hi
    }
}

fn ulp(x: f64) -> f64 {
    let next = f64::from_bits(x.to_bits().wrapping_add(1));
    (next - x).abs().max(f64::MIN_POSITIVE)
}

/// Closed form for the two-level landscape: with d = v₂ − v₁ and x = e − v₁,
/// the balance equation reduces to x² − (d + e₀)x + p₁e₀d = 0, whose negative
/// root (evaluated cancellation-free) gives e = v₁ + x.
pub fn two_level_closed_form(v1: f64, v2: f64, p1: f64, e0: f64) -> f64 {
    assert!(v1 < v2, "levels must be ordered");
    assert!(p1 > 0.0 && p1 < 1.0, "weight must be interior");
    assert!(e0 < 0.0, "free reference energy must be negative");
    let d = v2 - v1;
    let q = d + e0;
    let disc = q * q - 4.0 * p1 * e0 * d;
    let s = disc.sqrt();
    let x = if q > 0.0 { 2.0 * p1 * e0 * d / (q + s) } else { (q - s) / 2.0 };
    v1 + x
}

/// The criticality functional W = Σ_{l≥2} q_l/(v₁ − v_l) over the
/// reservoir-renormalized weights q; the landscape sits exactly at the phase
/// boundary when W = 1/e₀. Returns 0 for a single-level landscape.
pub fn critical_condition(spec: &RpmSpec) -> f64 {
    match spec.reservoir_renormalized() {
        None => 0.0,
        Some(res) => {
            let v1 = spec.levels[0];
            res.levels.iter().zip(&res.weights).map(|(&v, &q)| q / (v1 - v)).sum()
        }
    }
}

/// Whether the landscape is at the dilute phase boundary within `tol`.
pub fn is_critical(spec: &RpmSpec, tol: f64) -> bool {
    (critical_condition(spec) - 1.0 / spec.e0_free()).abs() <= tol
}

/// Dilute-limit phase prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilutePrediction {
    /// Balance root of the reservoir-renormalized landscape.
    pub e_tilde: f64,
    /// Predicted ground density: min(ẽ, v₁).
    pub e_predicted: f64,
    pub phase: Phase,
}

/// Phase of a landscape whose deepest level is rare: the reservoir root ẽ
/// competes with the bare level v₁. Frozen when ẽ > v₁ (the deep level
/// captures the ground state), normal when ẽ < v₁, critical within `tol`.
pub fn predict_phase_dilute(spec: &RpmSpec, tol: f64) -> Result<DilutePrediction, RpmError> {
    let res = spec.reservoir_renormalized().ok_or(RpmError::NeedTwoLevels)?;
    let e_tilde = solve_e1f(&res);
    let v1 = spec.levels[0];
    let phase = if (e_tilde - v1).abs() <= tol {
        Phase::Critical
    } else if e_tilde > v1 {
        Phase::Frozen
    } else {
        Phase::Normal
    };
    Ok(DilutePrediction { e_tilde, e_predicted: e_tilde.min(v1), phase })
}
