//! Deterministic channel model and aligned image sets.
//!
//! Exponents in this module are in units of `P̄ = sqrt(P)`: a link of strength
//! `α` scales inputs by `P̄^α`, and the channel is `G = Ĝ + P̄^{-β} G̃`, which
//! is exactly the realization [`draw_channel`] produces at `P = P̄²`.
//!
//! For one channel use the transmitter sends integers `X̄1 ∈ {0..x1_max}` and
//! `X̄2 ∈ {0..x2_max}` and receiver `k` observes
//! `Ȳk = ⌊P̄^{αk1 - maxk} Gk1 X̄1⌋ + ⌊P̄^{αk2 - maxk} Gk2 X̄2⌋`.
//! Each distinct `Ȳ1` is represented by its lexicographically smallest
//! preimage; the aligned image set of a representative is the set of
//! representatives that share its `Ȳ2`.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{draw_channel, BoundedDensitySpec, ChannelRealization, ChannelSpec2, Mat2};
use crate::seed::{self, TAG_DRAW, TAG_ERROR, TAG_PAIR};
use crate::stats::ls_slope;

/// Default limit on the number of enumerated codeword pairs.
pub const DEFAULT_CAP: u64 = 10_000_000;
/// Allowed excess of a fitted growth exponent over the bound exponent.
pub const EXPONENT_SLACK: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterministicInstance {
    pub p_bar: f64,
    pub alpha: Mat2,
    pub beta: Mat2,
    pub x1_max: u64,
    pub x2_max: u64,
}

impl DeterministicInstance {
    /// Alphabets `x1_max = ⌈P̄^{max(α11,α12)}⌉`, `x2_max = ⌈P̄^{max(α21,α22)}⌉`.
    pub fn new(spec: &ChannelSpec2, p_bar: f64) -> Result<Self> {
        spec.validate()?;
        if !(p_bar > 1.0) || !p_bar.is_finite() {
            return Err(Error::invalid("p_bar", format!("{p_bar} must be finite and > 1")));
        }
        let [[a11, a12], [a21, a22]] = spec.alpha;
        Ok(DeterministicInstance {
            p_bar,
            alpha: spec.alpha,
            beta: spec.beta,
            x1_max: p_bar.powf(a11.max(a12)).ceil() as u64,
            x2_max: p_bar.powf(a21.max(a22)).ceil() as u64,
        })
    }

    /// Replaces the input alphabets.
    pub fn with_alphabet(mut self, x1_max: u64, x2_max: u64) -> Self {
        self.x1_max = x1_max;
        self.x2_max = x2_max;
        self
    }

    pub fn spec(&self) -> ChannelSpec2 {
        ChannelSpec2 {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    /// `P̄^{α_kl - max(α_k1, α_k2)}`.
    pub fn scale(&self, k: usize, l: usize) -> f64 {
        let row = self.alpha[k];
        self.p_bar.powf(row[l] - row[0].max(row[1]))
    }

    /// Number of codeword pairs in the alphabet.
    pub fn alphabet_size(&self) -> u64 {
        (self.x1_max + 1).saturating_mul(self.x2_max + 1)
    }

    /// Realization `G = Ĝ + P̄^{-β} G̃` for this instance.
    pub fn draw(&self, density: &BoundedDensitySpec, seed: u64) -> Result<ChannelRealization> {
        draw_channel(&self.spec(), density, self.p_bar * self.p_bar, seed)
    }

    fn check_input(&self, x1: u64, x2: u64) -> Result<()> {
        if x1 > self.x1_max || x2 > self.x2_max {
            return Err(Error::invalid(
                "codeword",
                format!("({x1},{x2}) outside {{0..{}}}x{{0..{}}}", self.x1_max, self.x2_max),
            ));
        }
        Ok(())
    }
}

/// Output of one receiver for coefficient row `g`.
fn output(inst: &DeterministicInstance, k: usize, g: [f64; 2], x1: u64, x2: u64) -> i64 {
    ((inst.scale(k, 0) * g[0] * x1 as f64).floor() + (inst.scale(k, 1) * g[1] * x2 as f64).floor())
        as i64
}

/// Receiver outputs `(Ȳ1, Ȳ2)` for inputs `(x1, x2)` and coefficient rows
/// `g_row1`, `g_row2`.
pub fn deterministic_outputs(
    x1: u64,
    x2: u64,
    g_row1: [f64; 2],
    g_row2: [f64; 2],
    instance: &DeterministicInstance,
) -> (i64, i64) {
    (
        output(instance, 0, g_row1, x1, x2),
        output(instance, 1, g_row2, x1, x2),
    )
}

fn row(real: &ChannelRealization, k: usize) -> [f64; 2] {
    [real.coefficient(k, 0), real.coefficient(k, 1)]
}

/// Two codewords of the pair `(X̄1, X̄2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CodewordPair {
    pub lambda: (u64, u64),
    pub nu: (u64, u64),
}

impl CodewordPair {
    pub fn diff(&self) -> (u64, u64) {
        (self.nu.0.abs_diff(self.lambda.0), self.nu.1.abs_diff(self.lambda.1))
    }
}

/// Analytic upper bounds on the probability that `pair` aligns at receiver 2,
/// one for each coordinate in which the codewords differ:
/// `4 f_max P̄^{β2l} / (P̄^{α2l - max2} |ν_l - λ_l|)`.
pub fn alignment_bounds(
    pair: &CodewordPair,
    instance: &DeterministicInstance,
    density: &BoundedDensitySpec,
) -> Vec<(usize, f64)> {
    let (d1, d2) = pair.diff();
    [(0usize, d1), (1, d2)]
        .into_iter()
        .filter(|&(_, d)| d > 0)
        .map(|(l, d)| {
            let num = 4.0 * density.f_max * instance.p_bar.powf(instance.beta[1][l]);
            (l, num / (instance.scale(1, l) * d as f64))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentEstimate {
    pub pair: CodewordPair,
    pub trials: usize,
    pub hits: usize,
    pub estimate: f64,
    /// `(coordinate, bound)` for each coordinate with a nonzero difference.
    pub bounds: Vec<(usize, f64)>,
    /// Estimate within `min(1, bound) + 3σ` of every bound.
    pub pass: bool,
}

/// Monte Carlo frequency with which `pair` produces the same `Ȳ2`.
///
/// `Ĝ` is drawn once from `seed`; each trial redraws the error `G̃` of
/// receiver 2, the part the transmitter never observes.
pub fn alignment_probability_mc(
    pair: CodewordPair,
    instance: &DeterministicInstance,
    density: &BoundedDensitySpec,
    trials: usize,
    seed: u64,
) -> Result<AlignmentEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if pair.lambda == pair.nu {
        return Err(Error::Precondition(
            "alignment probability needs two distinct codewords".into(),
        ));
    }
    instance.check_input(pair.lambda.0, pair.lambda.1)?;
    instance.check_input(pair.nu.0, pair.nu.1)?;
    let base = instance.draw(density, seed)?;
    let mut rng = seed::rng(seed::derive(seed, &[TAG_ERROR]));
    let mut hits = 0;
    for _ in 0..trials {
        let mut real = base.clone();
        for l in 0..2 {
            real.g_tilde[(1, l)] = density.sample_tilde(&mut rng);
        }
        let g = row(&real, 1);
        if output(instance, 1, g, pair.lambda.0, pair.lambda.1)
            == output(instance, 1, g, pair.nu.0, pair.nu.1)
        {
            hits += 1;
        }
    }
    let estimate = hits as f64 / trials as f64;
    let bounds = alignment_bounds(&pair, instance, density);
    let pass = bounds.iter().all(|&(_, b)| {
        let p0 = b.min(1.0);
        let sigma = (p0 * (1.0 - p0) / trials as f64).sqrt();
        estimate <= p0 + 3.0 * sigma
    });
    Ok(AlignmentEstimate {
        pair,
        trials,
        hits,
        estimate,
        bounds,
        pass,
    })
}

/// Samples `count` distinct codeword pairs: the first half uniformly over the
/// alphabet, the rest as neighbours at offsets of at most 3 per coordinate.
pub fn sample_pairs(instance: &DeterministicInstance, count: usize, seed: u64) -> Result<Vec<CodewordPair>> {
    if instance.alphabet_size() < 2 {
        return Err(Error::Precondition("alphabet has a single codeword".into()));
    }
    let mut rng = seed::rng(seed::derive(seed, &[TAG_PAIR]));
    let mut pairs = Vec::with_capacity(count);
    while pairs.len() < count {
        let lambda = (rng.random_range(0..=instance.x1_max), rng.random_range(0..=instance.x2_max));
        let nu = if pairs.len() < count / 2 {
            (rng.random_range(0..=instance.x1_max), rng.random_range(0..=instance.x2_max))
        } else {
            let step = |v: u64, max: u64, rng: &mut rand_chacha::ChaCha8Rng| {
                (v as i64 + rng.random_range(-3i64..=3)).clamp(0, max as i64) as u64
            };
            (step(lambda.0, instance.x1_max, &mut rng), step(lambda.1, instance.x2_max, &mut rng))
        };
        if nu != lambda {
            pairs.push(CodewordPair { lambda, nu });
        }
    }
    Ok(pairs)
}

/// Checks the interval conditions an aligned pair must satisfy:
/// `a1 δ1 |ν1-λ1| <= a2 g |ν2-λ2| + 2` and `a2 δ1 |ν2-λ2| <= a1 g |ν1-λ1| + 2`,
/// with `a_l = P̄^{α2l - max2}`, `δ1` the lower bound on `|G|` and `g` the
/// supremum of `|G|`. Pairs that do not align pass vacuously.
pub fn interval_condition_check(
    pair: &CodewordPair,
    instance: &DeterministicInstance,
    realization: &ChannelRealization,
    density: &BoundedDensitySpec,
) -> bool {
    let g = row(realization, 1);
    let aligned = output(instance, 1, g, pair.lambda.0, pair.lambda.1)
        == output(instance, 1, g, pair.nu.0, pair.nu.1);
    if !aligned {
        return true;
    }
    let (d1, d2) = pair.diff();
    let (a1, a2) = (instance.scale(1, 0), instance.scale(1, 1));
    let (lo, hi) = (density.delta1, density.g_max());
    a1 * lo * d1 as f64 <= a2 * hi * d2 as f64 + 2.0
        && a2 * lo * d2 as f64 <= a1 * hi * d1 as f64 + 2.0
}

/// Aligned image sets of one realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageSets {
    /// Representative codeword of each distinct `Ȳ1`, ascending in `Ȳ1`.
    pub representatives: Vec<(u64, u64)>,
    /// Size of the aligned image set of each representative.
    pub sizes: Vec<u64>,
    /// Members of each `Ȳ2` group, ascending in `Ȳ2`.
    pub groups: Vec<Vec<(u64, u64)>>,
}

impl ImageSets {
    /// `E|S_ν|` over representatives.
    pub fn mean_size(&self) -> f64 {
        self.sizes.iter().sum::<u64>() as f64 / self.sizes.len() as f64
    }
}

/// Enumerates every codeword pair and builds the aligned image sets.
///
/// Refuses alphabets larger than `cap` codeword pairs.
pub fn image_set_sizes(
    instance: &DeterministicInstance,
    realization: &ChannelRealization,
    cap: u64,
) -> Result<ImageSets> {
    let required = instance.alphabet_size();
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }
    let g1 = row(realization, 0);
    let g2 = row(realization, 1);
    // Each x1 slice keeps its smallest x2 per image; merging slices in x1 order
    // keeps the first, i.e. the lexicographically smallest, preimage.
    let slices: Vec<Vec<(i64, u64)>> = (0..=instance.x1_max)
        .into_par_iter()
        .map(|x1| {
            let mut seen: HashMap<i64, u64> = HashMap::new();
            for x2 in 0..=instance.x2_max {
                seen.entry(output(instance, 0, g1, x1, x2)).or_insert(x2);
            }
            let mut v: Vec<(i64, u64)> = seen.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect();
    let mut rep: HashMap<i64, (u64, u64)> = HashMap::new();
    for (x1, slice) in slices.into_iter().enumerate() {
        for (y1, x2) in slice {
            rep.entry(y1).or_insert((x1 as u64, x2));
        }
    }
    let mut reps: Vec<(i64, (u64, u64))> = rep.into_iter().collect();
    reps.sort_unstable();

    let mut by_y2: HashMap<i64, Vec<(u64, u64)>> = HashMap::new();
    let y2: Vec<i64> = reps
        .iter()
        .map(|&(_, (x1, x2))| output(instance, 1, g2, x1, x2))
        .collect();
    for (&y, &(_, c)) in y2.iter().zip(&reps) {
        by_y2.entry(y).or_default().push(c);
    }
    let sizes = y2.iter().map(|y| by_y2[y].len() as u64).collect();
    let mut groups: Vec<(i64, Vec<(u64, u64)>)> = by_y2.into_iter().collect();
    groups.sort_unstable_by_key(|(y, _)| *y);
    Ok(ImageSets {
        representatives: reps.into_iter().map(|(_, c)| c).collect(),
        sizes,
        groups: groups.into_iter().map(|(_, g)| g).collect(),
    })
}

/// Aligned pairs taken from the enumerated groups: every member paired with the
/// first member of its group, at most `limit` pairs.
pub fn aligned_pairs(sets: &ImageSets, limit: usize) -> Vec<CodewordPair> {
    sets.groups
        .iter()
        .flat_map(|g| g.iter().skip(1).map(move |&nu| CodewordPair { lambda: g[0], nu }))
        .take(limit)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageSetStats {
    pub p_bar_grid: Vec<f64>,
    pub mean_size: Vec<f64>,
    pub draws: usize,
    /// Slope of `ln mean_size` against `ln P̄`.
    pub fitted_exponent: f64,
    pub bound_exponent: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Growth exponent `(max(α11-α21, α12-α22) + min(β21, β22))^+` of `E|S_ν|`.
pub fn bound_exponent(spec: &ChannelSpec2) -> f64 {
    let [[a11, a12], [a21, a22]] = spec.alpha;
    let b2 = spec.beta[1][0].min(spec.beta[1][1]);
    ((a11 - a21).max(a12 - a22) + b2).max(0.0)
}

/// Mean aligned-image-set size over `draws` realizations at each `P̄`, and the
/// fitted growth exponent. Draw `i` uses the same seed at every grid point.
pub fn expected_size_curve(
    spec: &ChannelSpec2,
    p_bar_grid: &[f64],
    draws: usize,
    density: &BoundedDensitySpec,
    seed: u64,
    cap: u64,
) -> Result<ImageSetStats> {
    spec.validate()?;
    if draws == 0 {
        return Err(Error::invalid("draws", "must be at least 1"));
    }
    if p_bar_grid.len() < 2 || p_bar_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("p_bar_grid", "needs at least two strictly ascending points"));
    }
    let octaves = (p_bar_grid[p_bar_grid.len() - 1] / p_bar_grid[0]).log2();
    if octaves < 3.0 - 1e-9 {
        return Err(Error::invalid(
            "p_bar_grid",
            format!("spans {octaves:.3} octaves, at least 3 required"),
        ));
    }
    let mut mean_size = Vec::with_capacity(p_bar_grid.len());
    for &p_bar in p_bar_grid {
        let inst = DeterministicInstance::new(spec, p_bar)?;
        let means = (0..draws)
            .into_par_iter()
            .map(|d| {
                let real = inst.draw(density, seed::derive(seed, &[TAG_DRAW, d as u64]))?;
                Ok(image_set_sizes(&inst, &real, cap)?.mean_size())
            })
            .collect::<Result<Vec<f64>>>()?;
        mean_size.push(means.iter().sum::<f64>() / draws as f64);
    }
    let x: Vec<f64> = p_bar_grid.iter().map(|p| p.ln()).collect();
    let y: Vec<f64> = mean_size.iter().map(|m| m.ln()).collect();
    let fitted_exponent = ls_slope(&x, &y).expect("validated grid");
    let bound = bound_exponent(spec);
    Ok(ImageSetStats {
        p_bar_grid: p_bar_grid.to_vec(),
        mean_size,
        draws,
        fitted_exponent,
        bound_exponent: bound,
        slack: EXPONENT_SLACK,
        pass: fitted_exponent <= bound + EXPONENT_SLACK,
    })
}
