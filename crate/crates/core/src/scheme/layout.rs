//! Layered transmission plans.
//!
//! Two-user instances are first relabelled so that `α11` is the largest
//! strength. In that frame the plan splits user 1's message into a common part
//! `Wc`, a zero-forced part `W1z` and a private part `W1p`, and sends user 2's
//! message `W2z` zero-forced to receiver 1. When antenna 1 is much stronger than
//! the rest of the channel, its top `δ` power levels carry an extra codeword
//! `Wtop` that both receivers decode first; every other layer is then attenuated
//! by `sqrt(P^{-δ})` on antenna 1, which leaves a reduced strength matrix `α'`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChannelExponents, ChannelSpec2, Mat2, SymmetricSpecK};
use crate::theorem::effective_csit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseId {
    /// `α21 > α22` and `α11 - α12 > α21 - α22`.
    Case1,
    /// `α21 > α22` and `α11 - α12 <= α21 - α22`.
    Case2,
    /// `α21 <= α22`.
    Case3,
    KUserSymmetric,
    SingleUser,
}

/// User and antenna relabelling that maps an instance to its normalized frame.
///
/// Both swaps are involutions and act on different indices, so the transform is
/// its own inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Transform {
    pub user_swap: bool,
    pub antenna_swap: bool,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        user_swap: false,
        antenna_swap: false,
    };

    /// Receiver index on the other side of the transform.
    pub fn user(&self, k: usize) -> usize {
        if self.user_swap && k < 2 {
            1 - k
        } else {
            k
        }
    }

    /// Antenna index on the other side of the transform.
    pub fn antenna(&self, l: usize) -> usize {
        if self.antenna_swap && l < 2 {
            1 - l
        } else {
            l
        }
    }

    pub fn apply(&self, m: &Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for (k, row) in out.iter_mut().enumerate() {
            for (l, v) in row.iter_mut().enumerate() {
                *v = m[self.user(k)][self.antenna(l)];
            }
        }
        out
    }

    pub fn apply_spec(&self, spec: &ChannelSpec2) -> ChannelSpec2 {
        ChannelSpec2 {
            alpha: self.apply(&spec.alpha),
            beta: self.apply(&spec.beta),
        }
    }
}

/// Relabels users and antennas so that `α11` is the maximal strength.
///
/// The candidates are tried in the order identity, user swap, antenna swap,
/// both swaps; the first one that puts a maximal entry at `(1,1)` wins.
pub fn normalize_instance(spec: &ChannelSpec2) -> (ChannelSpec2, Transform) {
    let max = spec.max_alpha();
    let order = [
        Transform::IDENTITY,
        Transform {
            user_swap: true,
            antenna_swap: false,
        },
        Transform {
            user_swap: false,
            antenna_swap: true,
        },
        Transform {
            user_swap: true,
            antenna_swap: true,
        },
    ];
    for t in order {
        let candidate = t.apply_spec(spec);
        if candidate.alpha[0][0] == max {
            return (candidate, t);
        }
    }
    unreachable!("one of the four relabellings puts the maximum at (1,1)")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Message {
    Wc,
    W1z,
    W1p,
    W2z,
    Wtop,
    /// Private message of user `k` (1-based) in the K-user scheme.
    Wkp(usize),
}

impl std::fmt::Display for Message {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Message::Wc => f.write_str("Wc"),
            Message::W1z => f.write_str("W1z"),
            Message::W1p => f.write_str("W1p"),
            Message::W2z => f.write_str("W2z"),
            Message::Wtop => f.write_str("Wtop"),
            Message::Wkp(k) => write!(f, "W{k}p"),
        }
    }
}

/// Beamforming direction of a layer, formed from the channel estimates only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PrecoderRule {
    /// All antennas with equal weight.
    Generic,
    /// Antenna 1 only.
    AntennaOne,
    /// Orthogonal to the estimated channel of receiver `k` (0-based).
    ZeroForceUser(usize),
    /// Orthogonal to the estimated channels of every receiver except `k`
    /// (0-based).
    Diagonalizing(usize),
}

/// Power of the unit-power codebook symbol of a layer, before the common
/// normalization constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LayerPower {
    /// `P^e`.
    Exponent(f64),
    /// `1 - P^e` with `e <= 0`; zero when `e = 0`.
    Complement(f64),
}

impl LayerPower {
    pub fn factor(&self, p: f64) -> f64 {
        match *self {
            LayerPower::Exponent(e) => p.powf(e),
            LayerPower::Complement(e) => (1.0 - p.powf(e)).max(0.0),
        }
    }

    /// Asymptotic exponent of [`LayerPower::factor`]; `-inf` for a silent layer.
    pub fn exponent(&self) -> f64 {
        match *self {
            LayerPower::Exponent(e) => e,
            LayerPower::Complement(e) if e < 0.0 => 0.0,
            LayerPower::Complement(_) => f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSpec {
    pub message: Message,
    /// Intended user, 0-based, in the normalized frame.
    pub owner: usize,
    pub gdof_load: f64,
    pub power: LayerPower,
    pub precoder: PrecoderRule,
    /// `(receiver, rank)` pairs: the layer is decoded by `receiver` at position
    /// `rank` of its successive-cancellation chain.
    pub decoders: Vec<(usize, usize)>,
    /// Scaled by `sqrt(P^{-δ})` on antenna 1 when a top layer is present.
    pub attenuated: bool,
}

impl LayerSpec {
    pub fn decoded_by(&self, receiver: usize) -> Option<usize> {
        self.decoders
            .iter()
            .find(|(r, _)| *r == receiver)
            .map(|&(_, rank)| rank)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeLayout {
    pub case_id: CaseId,
    pub transform: Transform,
    pub users: usize,
    /// GDoF carried by the top layer on antenna 1; zero when unused.
    pub reduction: f64,
    /// Strengths seen by the attenuated layers, normalized frame.
    pub reduced_alpha: Vec<Vec<f64>>,
    /// Effective CSIT level of each receiver, normalized frame.
    pub csit: Vec<f64>,
    /// Load of each zero-forced layer; zero for the single-user and K-user plans.
    pub m: f64,
    pub layers: Vec<LayerSpec>,
    /// Intended GDoF per user, original labelling.
    pub target: Vec<f64>,
}

impl SchemeLayout {
    pub fn target_sum(&self) -> f64 {
        self.target.iter().sum()
    }

    /// Layers decoded by `receiver`, in decoding order.
    pub fn chain(&self, receiver: usize) -> Vec<usize> {
        let mut chain: Vec<(usize, usize)> = self
            .layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.decoded_by(receiver).map(|rank| (rank, i)))
            .collect();
        chain.sort_unstable();
        chain.into_iter().map(|(_, i)| i).collect()
    }

    /// Per-user load totals in the normalized frame.
    pub fn normalized_loads(&self) -> Vec<f64> {
        let mut loads = vec![0.0; self.users];
        for layer in &self.layers {
            loads[layer.owner] += layer.gdof_load;
        }
        loads
    }
}

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Plan for a two-user instance. Uses the row-minimum CSIT levels.
pub fn build_layout(spec: &ChannelSpec2) -> Result<SchemeLayout> {
    spec.validate()?;
    let (norm, transform) = normalize_instance(spec);
    let [[a11, a12], [a21, a22]] = norm.alpha;
    let (b1, b2) = effective_csit(&norm.beta);

    let (case_id, delta, reduced): (CaseId, f64, Mat2) = if a21 > a22 && a11 - a12 > a21 - a22 {
        let d = a21 - a22;
        (CaseId::Case1, d, [[a11 - d, a12], [a22, a22]])
    } else if a21 > a22 {
        let d = a11 - a12;
        (CaseId::Case2, d, [[a12, a12], [a21 - d, a22]])
    } else {
        (CaseId::Case3, 0.0, norm.alpha)
    };
    let [[r11, r12], [r21, r22]] = reduced;
    let m = match case_id {
        CaseId::Case1 => pos(r21 - r12 + b1).min(b2),
        CaseId::Case2 => pos(r21 - r11 + b1).min(r21 - r22 + b2),
        _ => pos(a22 - a12 + b1).min(a22 - a21 + b2),
    };

    let original_target = |d_norm: [f64; 2]| {
        let mut t = vec![0.0; 2];
        for (k, d) in d_norm.iter().enumerate() {
            t[transform.user(k)] = *d;
        }
        t
    };

    if m <= 0.0 {
        return Ok(SchemeLayout {
            case_id: CaseId::SingleUser,
            transform,
            users: 2,
            reduction: 0.0,
            reduced_alpha: to_rows(&norm.alpha),
            csit: vec![b1, b2],
            m: 0.0,
            layers: vec![LayerSpec {
                message: Message::W1p,
                owner: 0,
                gdof_load: a11,
                power: LayerPower::Exponent(0.0),
                precoder: PrecoderRule::AntennaOne,
                decoders: vec![(0, 0)],
                attenuated: false,
            }],
            target: original_target([a11, 0.0]),
        });
    }

    // Strongest level at receiver 2 after the reduction; Wc fills it down to m.
    let level = r21.max(r22);
    let common_dir = if case_id == CaseId::Case3 {
        PrecoderRule::Generic
    } else {
        PrecoderRule::AntennaOne
    };
    let first = usize::from(delta > 0.0);
    let mut layers = Vec::with_capacity(5);
    if delta > 0.0 {
        layers.push(LayerSpec {
            message: Message::Wtop,
            owner: 0,
            gdof_load: delta,
            power: LayerPower::Exponent(0.0),
            precoder: PrecoderRule::AntennaOne,
            decoders: vec![(0, 0), (1, 0)],
            attenuated: false,
        });
    }
    layers.extend([
        LayerSpec {
            message: Message::Wc,
            owner: 0,
            gdof_load: level - m,
            power: LayerPower::Exponent(0.0),
            precoder: common_dir,
            decoders: vec![(0, first), (1, first)],
            attenuated: true,
        },
        LayerSpec {
            message: Message::W1z,
            owner: 0,
            gdof_load: m,
            power: LayerPower::Exponent(m - level),
            precoder: PrecoderRule::ZeroForceUser(1),
            decoders: vec![(0, first + 1)],
            attenuated: true,
        },
        LayerSpec {
            message: Message::W1p,
            owner: 0,
            gdof_load: r11 - level,
            power: LayerPower::Exponent(-level),
            precoder: common_dir,
            decoders: vec![(0, first + 2)],
            attenuated: true,
        },
        LayerSpec {
            message: Message::W2z,
            owner: 1,
            gdof_load: m,
            power: LayerPower::Exponent(m - level),
            precoder: PrecoderRule::ZeroForceUser(0),
            decoders: vec![(1, first + 1)],
            attenuated: true,
        },
    ]);
    Ok(SchemeLayout {
        case_id,
        transform,
        users: 2,
        reduction: delta,
        reduced_alpha: to_rows(&reduced),
        csit: vec![b1, b2],
        m,
        layers,
        target: original_target([a11, m]),
    })
}

/// Plan for the symmetric K-user instance: a common layer carrying `α-β` on
/// top of K private layers of `1-α+β` each.
pub fn build_layout_k(spec: &SymmetricSpecK) -> Result<SchemeLayout> {
    spec.validate()?;
    let k = spec.k;
    let gap = spec.alpha - spec.beta;
    let private = 1.0 - gap;
    let mut layers = vec![LayerSpec {
        message: Message::Wc,
        owner: 0,
        gdof_load: gap,
        power: LayerPower::Complement(-gap),
        precoder: PrecoderRule::Generic,
        decoders: (0..k).map(|r| (r, 0)).collect(),
        attenuated: false,
    }];
    layers.extend((0..k).map(|u| LayerSpec {
        message: Message::Wkp(u + 1),
        owner: u,
        gdof_load: private,
        power: LayerPower::Exponent(-gap),
        precoder: PrecoderRule::Diagonalizing(u),
        decoders: vec![(u, 1)],
        attenuated: false,
    }));
    let mut target = vec![private; k];
    target[0] = 1.0;
    Ok(SchemeLayout {
        case_id: CaseId::KUserSymmetric,
        transform: Transform::IDENTITY,
        users: k,
        reduction: 0.0,
        reduced_alpha: (0..k)
            .map(|r| (0..k).map(|l| spec.alpha(r, l)).collect())
            .collect(),
        csit: vec![spec.beta; k],
        m: 0.0,
        layers,
        target,
    })
}

fn to_rows(m: &Mat2) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

/// Rejects layouts whose user count does not match the instance.
pub(crate) fn check_users<S: ChannelExponents + ?Sized>(layout: &SchemeLayout, spec: &S) -> Result<()> {
    if layout.users != spec.users() {
        return Err(Error::Precondition(format!(
            "layout serves {} users but the instance has {}",
            layout.users,
            spec.users()
        )));
    }
    Ok(())
}
