//! Closed-form sum-GDoF values and regime classification.

use serde::Serialize;

use crate::error::Result;
use crate::model::{ChannelSpec2, Mat2, SymmetricSpecK};

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Row-wise minima `(β1, β2)` of a CSIT matrix: the only CSIT levels the
/// two-user sum GDoF depends on.
pub fn effective_csit(beta: &Mat2) -> (f64, f64) {
    (beta[0][0].min(beta[0][1]), beta[1][0].min(beta[1][1]))
}

/// Which of the two bounds attains the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Binding {
    D1,
    D2,
    Tie,
}

/// Qualitative regime of a two-user instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Serving only this user (1 or 2) is optimal and all CSIT is useless.
    SingleUserOptimal(u8),
    /// Both antennas are strictly stronger towards the same user.
    SamePreferredUser,
    /// Each antenna is strictly stronger towards a different user.
    DifferentPreferredUsers,
    /// Some antenna is equally strong towards both users.
    Boundary,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::SingleUserOptimal(u) => write!(f, "SingleUserOptimal({u})"),
            Regime::SamePreferredUser => f.write_str("SamePreferredUser"),
            Regime::DifferentPreferredUsers => f.write_str("DifferentPreferredUsers"),
            Regime::Boundary => f.write_str("Boundary"),
        }
    }
}

/// Full evaluation of the two-user sum-GDoF formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GdofBreakdown {
    pub beta1: f64,
    pub beta2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d_sum: f64,
    pub binding: Binding,
    pub regime: Regime,
}

fn bounds(alpha: &Mat2, beta1: f64, beta2: f64) -> (f64, f64) {
    let [[a11, a12], [a21, a22]] = *alpha;
    let d1 = a11.max(a12) + (a21 - a11 + beta1).max(a22 - a12 + beta1).max(0.0);
    let d2 = a21.max(a22) + (a11 - a21 + beta2).max(a12 - a22 + beta2).max(0.0);
    (d1, d2)
}

/// `min(D1, D2)` for given strengths and effective CSIT levels, without validation.
pub fn sum_gdof_from_effective(alpha: &Mat2, beta1: f64, beta2: f64) -> f64 {
    let (d1, d2) = bounds(alpha, beta1, beta2);
    d1.min(d2)
}

/// Sum GDoF `min(D1, D2)` of the two-user MISO BC.
pub fn sum_gdof_two_user(spec: &ChannelSpec2) -> Result<GdofBreakdown> {
    spec.validate()?;
    let (beta1, beta2) = effective_csit(&spec.beta);
    let (d1, d2) = bounds(&spec.alpha, beta1, beta2);
    let binding = if d1 < d2 {
        Binding::D1
    } else if d2 < d1 {
        Binding::D2
    } else {
        Binding::Tie
    };
    Ok(GdofBreakdown {
        beta1,
        beta2,
        d1,
        d2,
        d_sum: d1.min(d2),
        binding,
        regime: regime_for(&spec.alpha, beta1, beta2),
    })
}

/// The same value through the single-`max` rewriting of `D1` and `D2`.
pub fn sum_gdof_two_user_equivalent(spec: &ChannelSpec2) -> Result<f64> {
    spec.validate()?;
    let (b1, b2) = effective_csit(&spec.beta);
    let [[a11, a12], [a21, a22]] = spec.alpha;
    let d1 = a11
        .max(a12)
        .max(a21 + pos(a12 - a11) + b1)
        .max(a22 + pos(a11 - a12) + b1);
    let d2 = a22
        .max(a21)
        .max(a12 + pos(a21 - a22) + b2)
        .max(a11 + pos(a22 - a21) + b2);
    Ok(d1.min(d2))
}

/// Sum GDoF with finite-precision CSIT (all `β = 0`) for arbitrary strengths.
pub fn sum_gdof_finite_precision(alpha: &Mat2) -> f64 {
    let [[a11, a12], [a21, a22]] = *alpha;
    let d1 = a11.max(a12) + pos(a21 - a11).max(pos(a22 - a12));
    let d2 = a21.max(a22) + pos(a11 - a21).max(pos(a12 - a22));
    d1.min(d2)
}

/// Sum GDoF `(α-β) + K(1-(α-β))` of the symmetric K-user MISO BC.
pub fn sum_gdof_k_symmetric(spec: &SymmetricSpecK) -> Result<f64> {
    spec.validate()?;
    let gap = spec.alpha - spec.beta;
    Ok(gap + spec.k as f64 * (1.0 - gap))
}

/// Classifies the regime of a two-user instance.
///
/// Single-user optimality is tested first (user 1 wins ties); otherwise the
/// per-antenna preferences decide, and any equal-strength antenna gives
/// [`Regime::Boundary`].
pub fn classify_regime(spec: &ChannelSpec2) -> Regime {
    let (b1, b2) = effective_csit(&spec.beta);
    regime_for(&spec.alpha, b1, b2)
}

fn regime_for(alpha: &Mat2, b1: f64, b2: f64) -> Regime {
    let [[a11, a12], [a21, a22]] = *alpha;
    if a11 >= a21 + b1 && a12 >= a22 + b1 {
        return Regime::SingleUserOptimal(1);
    }
    if a22 >= a12 + b2 && a21 >= a11 + b2 {
        return Regime::SingleUserOptimal(2);
    }
    let pref = |to1: f64, to2: f64| match to1.partial_cmp(&to2) {
        Some(std::cmp::Ordering::Greater) => Some(1u8),
        Some(std::cmp::Ordering::Less) => Some(2u8),
        _ => None,
    };
    match (pref(a11, a21), pref(a12, a22)) {
        (Some(x), Some(y)) if x == y => Regime::SamePreferredUser,
        (Some(_), Some(_)) => Regime::DifferentPreferredUsers,
        _ => Regime::Boundary,
    }
}
