//! Allocation of a total CSIT budget `β11 + β12 + β21 + β22` across the four
//! links.
//!
//! The sum GDoF depends on the CSIT matrix only through its row minima, so an
//! allocation never gains from spending unequally within a row. The optimizer
//! therefore searches the two row levels `(x1, x2)` with `β_k1 = β_k2 = x_k`,
//! at cost `2 x1 + 2 x2`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChannelSpec2, Mat2};
use crate::theorem::sum_gdof_from_effective;

/// Default grid resolution in exponent units.
pub const DEFAULT_STEP: f64 = 0.01;

const FEASIBILITY_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetAllocation {
    pub beta: Mat2,
    /// Sum of the four allocated entries.
    pub total: f64,
    /// Budget the allocation was computed for.
    pub budget: f64,
    /// Sum GDoF achieved by `beta`.
    pub achieved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetCurve {
    pub points: Vec<BudgetAllocation>,
    /// Budgets at which the slope changes by more than `10 * step`.
    pub breakpoints: Vec<f64>,
    pub step: f64,
}

impl BudgetCurve {
    pub fn slopes(&self) -> Vec<f64> {
        self.points
            .windows(2)
            .map(|w| (w[1].achieved - w[0].achieved) / (w[1].budget - w[0].budget))
            .collect()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].achieved >= w[0].achieved - TIE_TOL)
    }

    /// Slopes never increase by more than `tol`.
    pub fn is_concave(&self, tol: f64) -> bool {
        self.slopes().windows(2).all(|s| s[1] <= s[0] + tol)
    }
}

/// Strengths are validated through a zero-CSIT instance.
fn check_alpha(alpha: &Mat2) -> Result<()> {
    ChannelSpec2::new(*alpha, [[0.0; 2]; 2]).map(|_| ())
}

fn check_step(step: f64) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("step", format!("{step} must be finite and > 0")));
    }
    Ok(())
}

/// Multiples of `step` below `cap`, then `cap` itself.
fn levels(cap: f64, step: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (0..)
        .map(|i| i as f64 * step)
        .take_while(|&x| x < cap - TIE_TOL)
        .collect();
    out.push(cap);
    out
}

/// Row caps `(min(α11, α12), min(α21, α22))`.
pub fn row_caps(alpha: &Mat2) -> (f64, f64) {
    (alpha[0][0].min(alpha[0][1]), alpha[1][0].min(alpha[1][1]))
}

/// Smallest budget that reaches both row caps.
pub fn saturation_budget(alpha: &Mat2) -> f64 {
    let (c1, c2) = row_caps(alpha);
    2.0 * (c1 + c2)
}

/// Best allocation of `budget` over the row-level grid of resolution `step`.
///
/// Among optimal allocations the lexicographically smallest `(x1, x2)` is
/// returned. Budget beyond the caps is left unspent.
pub fn optimize_allocation(alpha: &Mat2, budget: f64, step: f64) -> Result<BudgetAllocation> {
    check_alpha(alpha)?;
    check_step(step)?;
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::invalid("budget", format!("{budget} must be finite and >= 0")));
    }
    let (cap1, cap2) = row_caps(alpha);
    let xs2 = levels(cap2, step);
    let mut best: Option<(f64, f64, f64)> = None;
    for x1 in levels(cap1, step) {
        if 2.0 * x1 > budget + FEASIBILITY_TOL {
            break;
        }
        for &x2 in &xs2 {
            if 2.0 * x1 + 2.0 * x2 > budget + FEASIBILITY_TOL {
                break;
            }
            let d = sum_gdof_from_effective(alpha, x1, x2);
            if best.map_or(true, |(_, _, bd)| d > bd + TIE_TOL) {
                best = Some((x1, x2, d));
            }
        }
    }
    // x1 = x2 = 0 is always feasible.
    let (x1, x2, achieved) = best.expect("zero allocation is feasible");
    Ok(BudgetAllocation {
        beta: [[x1, x1], [x2, x2]],
        total: 2.0 * x1 + 2.0 * x2,
        budget,
        achieved,
    })
}

/// Optimal sum GDoF for every budget in an ascending grid.
pub fn budget_curve(alpha: &Mat2, budgets: &[f64], step: f64) -> Result<BudgetCurve> {
    check_alpha(alpha)?;
    check_step(step)?;
    if budgets.is_empty() {
        return Err(Error::invalid("budgets", "grid is empty"));
    }
    if let Some(i) = budgets.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            format!("budgets[{}]", i + 1),
            "grid must be strictly ascending",
        ));
    }
    let points = budgets
        .par_iter()
        .map(|&b| optimize_allocation(alpha, b, step))
        .collect::<Result<Vec<_>>>()?;
    let mut curve = BudgetCurve {
        points,
        breakpoints: Vec::new(),
        step,
    };
    let slopes = curve.slopes();
    curve.breakpoints = slopes
        .windows(2)
        .enumerate()
        .filter(|(_, s)| (s[1] - s[0]).abs() > 10.0 * step)
        .map(|(i, _)| curve.points[i + 1].budget)
        .collect();
    Ok(curve)
}

fn check_levels(alpha: &Mat2, beta1: f64, beta2: f64) -> Result<()> {
    let (c1, c2) = row_caps(alpha);
    if !(0.0..=c1).contains(&beta1) {
        return Err(Error::invalid("beta1", format!("{beta1} outside [0, {c1}]")));
    }
    if !(0.0..=c2).contains(&beta2) {
        return Err(Error::invalid("beta2", format!("{beta2} outside [0, {c2}]")));
    }
    Ok(())
}

/// Sum GDoF when antenna 1 strictly prefers user 1 and antenna 2 strictly
/// prefers user 2: `min(α22 + (α11-α12)^+ + β1, α11 + (α22-α21)^+ + β2)`.
pub fn different_preference_gdof(alpha: &Mat2, beta1: f64, beta2: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let [[a11, a12], [a21, a22]] = *alpha;
    if !(a11 > a21 && a22 > a12) {
        return Err(Error::Precondition(format!(
            "need alpha11 > alpha21 and alpha22 > alpha12, got {alpha:?}"
        )));
    }
    check_levels(alpha, beta1, beta2)?;
    Ok((a22 + (a11 - a12).max(0.0) + beta1).min(a11 + (a22 - a21).max(0.0) + beta2))
}

/// Different-preference instances whose direct links dominate both cross
/// links: `α11 + α22 - max(α12 - β1, α21 - β2)`.
pub fn direct_dominant_gdof(alpha: &Mat2, beta1: f64, beta2: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let [[a11, a12], [a21, a22]] = *alpha;
    if !(a11 > a21 && a22 > a12 && a11.min(a22) >= a12.max(a21)) {
        return Err(Error::Precondition(format!(
            "need min(alpha11, alpha22) >= max(alpha12, alpha21) with strict preferences, got {alpha:?}"
        )));
    }
    check_levels(alpha, beta1, beta2)?;
    Ok(a11 + a22 - (a12 - beta1).max(a21 - beta2))
}
