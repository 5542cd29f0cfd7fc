//! Monte Carlo evaluation of a [`SchemeLayout`].
//!
//! Precoders are built from `Ĝ` alone; received powers use the true
//! `G = Ĝ + sqrt(P^{-β}) G̃`. Every symbol has unit power and the noise has unit
//! variance, so SINRs follow in closed form from the received amplitudes and no
//! symbols are sampled.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::layout::{check_users, Message, PrecoderRule, SchemeLayout};
use crate::error::{Error, Result};
use crate::model::{draw_channel, BoundedDensitySpec, ChannelExponents, ChannelRealization};
use crate::seed::{self, TAG_REDRAW, TAG_TRIAL};
use crate::stats::ls_slope;

/// Largest admissible condition number of the scaled K-user estimate matrix.
pub const COND_LIMIT: f64 = 1e8;
/// Slack on the per-antenna unit power constraint.
pub const POWER_TOL: f64 = 1e-6;
/// A layer is flagged as decodable when its SINR exponent reaches its load
/// minus this margin.
pub const DECODE_MARGIN: f64 = 0.05;
const MAX_DRAWS: usize = 1000;

/// Statistics of one (layer, receiver) link at a single SNR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkSnapshot {
    pub layer: usize,
    pub message: Message,
    /// Receiver in the original labelling.
    pub receiver: usize,
    /// Position in the receiver's decoding chain, if it decodes the layer.
    pub rank: Option<usize>,
    /// `log10` of the trial-mean received power; `None` for a silent layer.
    pub log10_mean_power: Option<f64>,
    /// Trial mean of `log10 SINR` at the decoding step.
    pub mean_log10_sinr: Option<f64>,
    /// Trial mean of `½ log2(1 + SINR)`.
    pub mean_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub p: f64,
    pub trials: usize,
    /// Rate of each layer: the smallest mean rate over its decoders.
    pub layer_rates: Vec<f64>,
    /// Sum of the owned layer rates, original labelling.
    pub user_rates: Vec<f64>,
    pub links: Vec<LinkSnapshot>,
    pub max_zf_residual: f64,
    pub max_antenna_power: f64,
    /// Ill-conditioned estimates that were discarded and redrawn.
    pub redraws: usize,
}

impl Snapshot {
    pub fn link(&self, layer: usize, receiver: usize) -> Option<&LinkSnapshot> {
        self.links
            .iter()
            .find(|l| l.layer == layer && l.receiver == receiver)
    }
}

/// Per-layer exponents fitted against `log10 P`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerExponent {
    pub layer: usize,
    pub message: Message,
    pub owner: usize,
    pub receiver: usize,
    pub rank: usize,
    pub gdof_load: f64,
    pub sinr_exponent: Option<f64>,
    pub power_exponent: Option<f64>,
    /// SINR exponent at least `gdof_load - DECODE_MARGIN` (always true for an
    /// empty layer).
    pub decode_ok: bool,
}

/// Fitted power exponent of a nulled layer at a receiver it must not reach.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageExponent {
    pub layer: usize,
    pub message: Message,
    pub receiver: usize,
    pub measured: f64,
    pub designed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub p_grid: Vec<f64>,
    pub targets: Vec<f64>,
    /// `per_user_rates[i][k]`: rate of user `k` at `p_grid[i]`.
    pub per_user_rates: Vec<Vec<f64>>,
    pub slope_estimates: Vec<f64>,
    pub layer_exponents: Vec<LayerExponent>,
    pub leakage: Vec<LeakageExponent>,
    pub max_zf_residual: f64,
    pub max_antenna_power: f64,
    pub redraws: usize,
}

impl SimResult {
    pub fn sum_slope(&self) -> f64 {
        self.slope_estimates.iter().sum()
    }

    pub fn exponent(&self, message: Message, receiver: usize) -> Option<&LayerExponent> {
        self.layer_exponents
            .iter()
            .find(|e| e.message == message && e.receiver == receiver)
    }
}

/// Instance exponents relabelled into the layout's normalized frame.
struct Frame {
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
}

impl ChannelExponents for Frame {
    fn users(&self) -> usize {
        self.alpha.len()
    }
    fn alpha(&self, k: usize, l: usize) -> f64 {
        self.alpha[k][l]
    }
    fn beta(&self, k: usize, l: usize) -> f64 {
        self.beta[k][l]
    }
}

fn frame<S: ChannelExponents + ?Sized>(layout: &SchemeLayout, spec: &S) -> Frame {
    let t = layout.transform;
    let n = spec.users();
    let pick = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|k| (0..n).map(|l| f(t.user(k), t.antenna(l))).collect())
            .collect()
    };
    Frame {
        alpha: pick(&|k, l| spec.alpha(k, l)),
        beta: pick(&|k, l| spec.beta(k, l)),
    }
}

struct Trial {
    /// `power[layer][receiver]`.
    power: Vec<Vec<f64>>,
    /// `sinr[layer][receiver]`, set where the receiver decodes the layer.
    sinr: Vec<Vec<Option<f64>>>,
    residual: f64,
    antenna_power: f64,
    redraws: usize,
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn cosine(h: &[f64], u: &[f64]) -> f64 {
    let dot: f64 = h.iter().zip(u).map(|(a, b)| a * b).sum();
    let nh = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot.abs() / (nh * nu)
}

/// Estimated channel rows scaled by their strengths, `sqrt(P^{α_kl}) Ĝ_kl`.
fn estimated_rows(alpha: &[Vec<f64>], g_hat: &DMatrix<f64>, p: f64) -> Vec<Vec<f64>> {
    let n = alpha.len();
    (0..n)
        .map(|k| (0..n).map(|l| p.powf(0.5 * alpha[k][l]) * g_hat[(k, l)]).collect())
        .collect()
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Draws the realization of one trial and, for diagonalizing layouts, the
/// direction matrix; ill-conditioned estimates are redrawn.
fn draw_trial(
    layout: &SchemeLayout,
    frame: &Frame,
    density: &BoundedDensitySpec,
    p: f64,
    trial_seed: u64,
) -> Result<(ChannelRealization, Option<DMatrix<f64>>, usize)> {
    let needs_inverse = layout
        .layers
        .iter()
        .any(|l| matches!(l.precoder, PrecoderRule::Diagonalizing(_)));
    for attempt in 0..MAX_DRAWS {
        let s = if attempt == 0 {
            trial_seed
        } else {
            seed::derive(trial_seed, &[TAG_REDRAW, attempt as u64])
        };
        let realization = draw_channel(frame, density, p, s)?;
        if !needs_inverse {
            return Ok((realization, None, 0));
        }
        let n = frame.users();
        let scaled = DMatrix::from_fn(n, n, |k, l| {
            let g = realization.g_hat[(k, l)];
            if k == l {
                g
            } else {
                p.powf(0.5 * (frame.alpha[k][l] - 1.0)) * g
            }
        });
        if condition_number(&scaled) > COND_LIMIT {
            continue;
        }
        if let Some(inv) = scaled.try_inverse() {
            return Ok((realization, Some(inv), attempt));
        }
    }
    Err(Error::IllConditioned {
        limit: COND_LIMIT,
        attempts: MAX_DRAWS,
    })
}

fn run_trial(
    layout: &SchemeLayout,
    frame: &Frame,
    density: &BoundedDensitySpec,
    p: f64,
    trial_seed: u64,
) -> Result<Trial> {
    let n = layout.users;
    let (real, inverse, redraws) = draw_trial(layout, frame, density, p, trial_seed)?;
    let est_reduced = estimated_rows(&layout.reduced_alpha, &real.g_hat, p);
    let est_true = estimated_rows(&frame.alpha, &real.g_hat, p);
    let attenuation = p.powf(-0.5 * layout.reduction);

    let mut residual: f64 = 0.0;
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(layout.layers.len());
    for layer in &layout.layers {
        let u = match layer.precoder {
            PrecoderRule::Generic => vec![1.0 / (n as f64).sqrt(); n],
            PrecoderRule::AntennaOne => {
                let mut v = vec![0.0; n];
                v[0] = 1.0;
                v
            }
            PrecoderRule::ZeroForceUser(j) => {
                let h = &est_reduced[j];
                let u = unit(vec![h[1], -h[0]]);
                residual = residual.max(cosine(h, &u));
                u
            }
            PrecoderRule::Diagonalizing(k) => {
                let inv = inverse.as_ref().expect("inverse drawn for diagonalizing layouts");
                let u = unit(inv.column(k).iter().copied().collect());
                for (i, h) in est_true.iter().enumerate() {
                    if i != k {
                        residual = residual.max(cosine(h, &u));
                    }
                }
                u
            }
        };
        let amp = layer.power.factor(p).sqrt();
        let w: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(l, x)| {
                let a = if layer.attenuated && l == 0 { attenuation } else { 1.0 };
                amp * a * x
            })
            .collect();
        directions.push(w);
    }

    let antenna_raw: Vec<f64> = (0..n)
        .map(|l| directions.iter().map(|w| w[l] * w[l]).sum())
        .collect();
    let peak = antenna_raw.iter().cloned().fold(0.0, f64::max);
    let c2 = 1.0 / peak;
    let antenna_power = peak * c2;
    for (l, raw) in antenna_raw.iter().enumerate() {
        if raw * c2 > 1.0 + POWER_TOL {
            return Err(Error::PowerViolation {
                antenna: l,
                power: raw * c2,
                p,
            });
        }
    }

    let gain: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|l| p.powf(0.5 * frame.alpha[k][l]) * real.coefficient(k, l))
                .collect()
        })
        .collect();
    let power: Vec<Vec<f64>> = directions
        .iter()
        .map(|w| {
            (0..n)
                .map(|k| {
                    let a: f64 = gain[k].iter().zip(w).map(|(g, x)| g * x).sum();
                    c2 * a * a
                })
                .collect()
        })
        .collect();

    let mut sinr = vec![vec![None; n]; layout.layers.len()];
    for k in 0..n {
        let mut undecoded = vec![true; layout.layers.len()];
        for i in layout.chain(k) {
            undecoded[i] = false;
            let interference: f64 = power
                .iter()
                .zip(&undecoded)
                .filter(|(_, &u)| u)
                .map(|(row, _)| row[k])
                .sum();
            sinr[i][k] = Some(power[i][k] / (interference + 1.0));
        }
    }

    Ok(Trial {
        power,
        sinr,
        residual,
        antenna_power,
        redraws,
    })
}

fn rate(sinr: f64) -> f64 {
    0.5 * (1.0 + sinr).log2()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    s / c as f64
}

/// Simulates `trials` independent channel uses of `layout` at SNR `p`.
///
/// Trial `t` draws its channel from a seed derived from `(seed, t)`, so the same
/// channels are reused at every SNR and the result does not depend on the
/// number of worker threads.
pub fn simulate<S: ChannelExponents + ?Sized + Sync>(
    layout: &SchemeLayout,
    spec: &S,
    density: &BoundedDensitySpec,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<Snapshot> {
    check_users(layout, spec)?;
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid("P", format!("{p} must be finite and > 1")));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let frame = frame(layout, spec);
    let outcomes: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            run_trial(
                layout,
                &frame,
                density,
                p,
                seed::derive(seed, &[TAG_TRIAL, t as u64]),
            )
        })
        .collect::<Result<_>>()?;

    let n = layout.users;
    let t = layout.transform;
    let mut links = Vec::new();
    let mut layer_rates = Vec::with_capacity(layout.layers.len());
    for (i, layer) in layout.layers.iter().enumerate() {
        let mut layer_rate = f64::INFINITY;
        for k in 0..n {
            let silent = outcomes.iter().any(|o| o.power[i][k] <= 0.0);
            let log10_mean_power =
                (!silent).then(|| mean(outcomes.iter().map(|o| o.power[i][k])).log10());
            let rank = layer.decoded_by(k);
            let (mean_log10_sinr, mean_rate) = if rank.is_some() {
                let r = mean(outcomes.iter().map(|o| rate(o.sinr[i][k].unwrap())));
                layer_rate = layer_rate.min(r);
                let s = (!silent).then(|| mean(outcomes.iter().map(|o| o.sinr[i][k].unwrap().log10())));
                (s, Some(r))
            } else {
                (None, None)
            };
            links.push(LinkSnapshot {
                layer: i,
                message: layer.message,
                receiver: t.user(k),
                rank,
                log10_mean_power,
                mean_log10_sinr,
                mean_rate,
            });
        }
        layer_rates.push(if layer_rate.is_finite() { layer_rate } else { 0.0 });
    }
    let mut user_rates = vec![0.0; n];
    for (layer, r) in layout.layers.iter().zip(&layer_rates) {
        user_rates[t.user(layer.owner)] += r;
    }
    Ok(Snapshot {
        p,
        trials,
        layer_rates,
        user_rates,
        links,
        max_zf_residual: outcomes.iter().map(|o| o.residual).fold(0.0, f64::max),
        max_antenna_power: outcomes.iter().map(|o| o.antenna_power).fold(0.0, f64::max),
        redraws: outcomes.iter().map(|o| o.redraws).sum(),
    })
}

/// Checks that an SNR grid is ascending, above 1 and spans at least three decades.
pub fn validate_p_grid(p_grid: &[f64]) -> Result<()> {
    if p_grid.len() < 2 {
        return Err(Error::invalid("P_grid", "needs at least two points"));
    }
    for (i, p) in p_grid.iter().enumerate() {
        if !(*p > 1.0) || !p.is_finite() {
            return Err(Error::invalid(format!("P_grid[{i}]"), format!("{p} must be finite and > 1")));
        }
        if i > 0 && *p <= p_grid[i - 1] {
            return Err(Error::invalid(format!("P_grid[{i}]"), "grid must be strictly ascending"));
        }
    }
    let decades = (p_grid[p_grid.len() - 1] / p_grid[0]).log10();
    if decades < 3.0 - 1e-9 {
        return Err(Error::invalid(
            "P_grid",
            format!("spans {decades:.3} decades, at least 3 required"),
        ));
    }
    Ok(())
}

/// Simulates every SNR of `p_grid` with common random numbers and fits the
/// per-user GDoF slopes and per-layer exponents.
///
/// User slopes regress rate on `½ log2 P`. SINR exponents regress the trial
/// mean of `log10 SINR` on `log10 P`; power and leakage exponents regress
/// `log10` of the trial-mean power, which is insensitive to the occasional
/// trial whose leakage terms nearly cancel.
pub fn estimate_gdof_slope<S: ChannelExponents + ?Sized + Sync>(
    layout: &SchemeLayout,
    spec: &S,
    density: &BoundedDensitySpec,
    p_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<SimResult> {
    validate_p_grid(p_grid)?;
    let snapshots = p_grid
        .iter()
        .map(|&p| simulate(layout, spec, density, p, trials, seed))
        .collect::<Result<Vec<_>>>()?;
    let half_log2: Vec<f64> = p_grid.iter().map(|p| 0.5 * p.log2()).collect();
    let log10p: Vec<f64> = p_grid.iter().map(|p| p.log10()).collect();
    let n = layout.users;
    let t = layout.transform;

    let slope_estimates = (0..n)
        .map(|k| {
            let y: Vec<f64> = snapshots.iter().map(|s| s.user_rates[k]).collect();
            ls_slope(&half_log2, &y).expect("validated grid")
        })
        .collect();

    let fit = |layer: usize, receiver: usize, f: &dyn Fn(&LinkSnapshot) -> Option<f64>| {
        let y: Option<Vec<f64>> = snapshots
            .iter()
            .map(|s| s.link(layer, receiver).and_then(f))
            .collect();
        y.and_then(|y| ls_slope(&log10p, &y))
    };

    let mut layer_exponents = Vec::new();
    let mut leakage = Vec::new();
    for (i, layer) in layout.layers.iter().enumerate() {
        for &(k, rank) in &layer.decoders {
            let receiver = t.user(k);
            let sinr_exponent = fit(i, receiver, &|l| l.mean_log10_sinr);
            let power_exponent = fit(i, receiver, &|l| l.log10_mean_power);
            let decode_ok = layer.gdof_load == 0.0
                || sinr_exponent.is_some_and(|e| e >= layer.gdof_load - DECODE_MARGIN);
            layer_exponents.push(LayerExponent {
                layer: i,
                message: layer.message,
                owner: t.user(layer.owner),
                receiver,
                rank,
                gdof_load: layer.gdof_load,
                sinr_exponent,
                power_exponent,
                decode_ok,
            });
        }
        let e = layer.power.exponent();
        let nulled: Vec<(usize, f64)> = match layer.precoder {
            PrecoderRule::ZeroForceUser(j) => {
                let r = &layout.reduced_alpha[j];
                vec![(j, e + r[0].min(r[1]) - layout.csit[j])]
            }
            PrecoderRule::Diagonalizing(k) => (0..n)
                .filter(|&j| j != k)
                .map(|j| {
                    let cross = (0..n)
                        .filter(|&l| l != j)
                        .map(|l| layout.reduced_alpha[j][l])
                        .fold(f64::NEG_INFINITY, f64::max);
                    (j, e + cross - layout.csit[j])
                })
                .collect(),
            _ => Vec::new(),
        };
        for (j, designed) in nulled {
            let receiver = t.user(j);
            if let Some(measured) = fit(i, receiver, &|l| l.log10_mean_power) {
                leakage.push(LeakageExponent {
                    layer: i,
                    message: layer.message,
                    receiver,
                    measured,
                    designed,
                });
            }
        }
    }

    Ok(SimResult {
        p_grid: p_grid.to_vec(),
        targets: layout.target.clone(),
        per_user_rates: snapshots.iter().map(|s| s.user_rates.clone()).collect(),
        slope_estimates,
        layer_exponents,
        leakage,
        max_zf_residual: snapshots.iter().map(|s| s.max_zf_residual).fold(0.0, f64::max),
        max_antenna_power: snapshots.iter().map(|s| s.max_antenna_power).fold(0.0, f64::max),
        redraws: snapshots.iter().map(|s| s.redraws).sum(),
    })
}
