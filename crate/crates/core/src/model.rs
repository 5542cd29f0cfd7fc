//! Problem instances and bounded-density channel sampling.
//!
//! Exponents are stored relative to the nominal SNR `P`; an exponent `a` on a
//! link means the link carries amplitude `sqrt(P^a)`.

use nalgebra::DMatrix;
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// 2×2 matrix indexed `[receiver][antenna]`.
pub type Mat2 = [[f64; 2]; 2];

/// Link strength and CSIT exponents of a K-user instance.
pub trait ChannelExponents {
    fn users(&self) -> usize;
    /// Strength exponent from antenna `l` to receiver `k`.
    fn alpha(&self, k: usize, l: usize) -> f64;
    /// CSIT exponent from antenna `l` to receiver `k`.
    fn beta(&self, k: usize, l: usize) -> f64;
}

/// A 2-user instance with arbitrary strength and CSIT exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec2 {
    pub alpha: Mat2,
    pub beta: Mat2,
}

impl ChannelSpec2 {
    /// Validated constructor: every `alpha` entry is finite and nonnegative and
    /// `0 <= beta <= alpha` entrywise.
    pub fn new(alpha: Mat2, beta: Mat2) -> Result<Self> {
        let spec = ChannelSpec2 { alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..2 {
            for l in 0..2 {
                let a = self.alpha[k][l];
                let b = self.beta[k][l];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::invalid(
                        format!("alpha[{k}][{l}]"),
                        format!("{a} must be finite and >= 0"),
                    ));
                }
                if !b.is_finite() || b < 0.0 {
                    return Err(Error::invalid(
                        format!("beta[{k}][{l}]"),
                        format!("{b} must be finite and >= 0"),
                    ));
                }
                if b > a {
                    return Err(Error::invalid(
                        format!("beta[{k}][{l}]"),
                        format!("{b} exceeds alpha[{k}][{l}] = {a}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Same strengths, CSIT replaced.
    pub fn with_beta(&self, beta: Mat2) -> Result<Self> {
        ChannelSpec2::new(self.alpha, beta)
    }

    /// Maximum strength exponent over all four links.
    pub fn max_alpha(&self) -> f64 {
        self.alpha.iter().flatten().fold(0.0, |m, &a| f64::max(m, a))
    }
}

impl ChannelExponents for ChannelSpec2 {
    fn users(&self) -> usize {
        2
    }
    fn alpha(&self, k: usize, l: usize) -> f64 {
        self.alpha[k][l]
    }
    fn beta(&self, k: usize, l: usize) -> f64 {
        self.beta[k][l]
    }
}

/// Symmetric K-user instance: direct links at exponent 1, cross links at
/// `alpha`, uniform CSIT exponent `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricSpecK {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl SymmetricSpecK {
    pub fn new(k: usize, alpha: f64, beta: f64) -> Result<Self> {
        let spec = SymmetricSpecK { k, alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("K", format!("{} must be >= 2", self.k)));
        }
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(
                "alpha",
                format!("{} must lie in [0, 1]", self.alpha),
            ));
        }
        if !self.beta.is_finite() || self.beta < 0.0 || self.beta > self.alpha {
            return Err(Error::invalid(
                "beta",
                format!("{} must lie in [0, alpha = {}]", self.beta, self.alpha),
            ));
        }
        Ok(())
    }
}

impl ChannelExponents for SymmetricSpecK {
    fn users(&self) -> usize {
        self.k
    }
    fn alpha(&self, k: usize, l: usize) -> f64 {
        if k == l {
            1.0
        } else {
            self.alpha
        }
    }
    fn beta(&self, _k: usize, _l: usize) -> f64 {
        self.beta
    }
}

/// Distribution family used for channel estimates and estimation errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DensityFamily {
    /// `|Ĝ|` uniform on `[hat_lo, hat_hi)`, `G̃` uniform on
    /// `[-tilde_half_width, tilde_half_width)`. With `random_signs` the sign of
    /// `Ĝ` is a fair coin.
    UniformBox {
        hat_lo: f64,
        hat_hi: f64,
        tilde_half_width: f64,
        random_signs: bool,
    },
}

/// Bounded-density constants of a sampling family.
///
/// `delta1` lower-bounds every realized `|G|`, `delta2` bounds `|Ĝ|` and `|G̃|`
/// and `f_max` bounds every (conditional) density of `Ĝ` and `G̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedDensitySpec {
    pub delta1: f64,
    pub delta2: f64,
    pub f_max: f64,
    pub family: DensityFamily,
}

impl BoundedDensitySpec {
    /// Derives the constants analytically and rejects families that cannot keep
    /// `|G|` away from zero.
    pub fn new(family: DensityFamily) -> Result<Self> {
        match family {
            DensityFamily::UniformBox {
                hat_lo,
                hat_hi,
                tilde_half_width,
                random_signs,
            } => {
                let finite = [hat_lo, hat_hi, tilde_half_width]
                    .iter()
                    .all(|v| v.is_finite());
                if !finite || hat_lo <= 0.0 || hat_hi <= hat_lo || tilde_half_width <= 0.0 {
                    return Err(Error::Density(format!(
                        "need 0 < hat_lo < hat_hi and tilde_half_width > 0, got \
                         hat_lo={hat_lo} hat_hi={hat_hi} tilde_half_width={tilde_half_width}"
                    )));
                }
                // P > 1 and beta >= 0 keep the error amplitude at most tilde_half_width.
                let delta1 = hat_lo - tilde_half_width;
                if delta1 <= 0.0 {
                    return Err(Error::Density(format!(
                        "|G| can reach zero: hat_lo={hat_lo} <= tilde_half_width={tilde_half_width}"
                    )));
                }
                let hat_density = if random_signs { 0.5 } else { 1.0 } / (hat_hi - hat_lo);
                let tilde_density = 1.0 / (2.0 * tilde_half_width);
                Ok(BoundedDensitySpec {
                    delta1,
                    delta2: hat_hi.max(tilde_half_width),
                    f_max: hat_density.max(tilde_density),
                    family,
                })
            }
        }
    }

    /// Supremum of a realized `|G| = |Ĝ + P^{-β/2} G̃|`.
    pub fn g_max(&self) -> f64 {
        match self.family {
            DensityFamily::UniformBox {
                hat_hi,
                tilde_half_width,
                ..
            } => hat_hi + tilde_half_width,
        }
    }

    fn sample_hat<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.family {
            DensityFamily::UniformBox {
                hat_lo,
                hat_hi,
                random_signs,
                ..
            } => {
                let sign = if random_signs && rng.random::<bool>() {
                    -1.0
                } else {
                    1.0
                };
                sign * Uniform::new(hat_lo, hat_hi).unwrap().sample(rng)
            }
        }
    }

    pub(crate) fn sample_tilde<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.family {
            DensityFamily::UniformBox {
                tilde_half_width, ..
            } => Uniform::new(-tilde_half_width, tilde_half_width)
                .unwrap()
                .sample(rng),
        }
    }
}

impl Default for BoundedDensitySpec {
    /// `Ĝ ~ U[1,2)`, `G̃ ~ U[-1/2,1/2)`: `delta1 = 1/2`, `delta2 = 2`, `f_max = 1`.
    fn default() -> Self {
        BoundedDensitySpec::new(DensityFamily::UniformBox {
            hat_lo: 1.0,
            hat_hi: 2.0,
            tilde_half_width: 0.5,
            random_signs: false,
        })
        .expect("default family is admissible")
    }
}

/// One channel use: estimates known to the transmitter and errors it never sees.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g_hat: DMatrix<f64>,
    pub g_tilde: DMatrix<f64>,
    /// CSIT exponents the errors are scaled with.
    pub beta: DMatrix<f64>,
    pub p: f64,
}

impl ChannelRealization {
    pub fn users(&self) -> usize {
        self.g_hat.nrows()
    }

    /// Realized coefficient `Ĝ_kl + sqrt(P^{-β_kl}) G̃_kl`.
    pub fn coefficient(&self, k: usize, l: usize) -> f64 {
        self.g_hat[(k, l)] + self.p.powf(-0.5 * self.beta[(k, l)]) * self.g_tilde[(k, l)]
    }

    /// Same draws observed at a different SNR.
    pub fn at_snr(&self, p: f64) -> ChannelRealization {
        ChannelRealization {
            p,
            ..self.clone()
        }
    }

    /// Checks the realization bounds of `density`.
    pub fn check(&self, density: &BoundedDensitySpec) -> Result<()> {
        let n = self.users();
        for k in 0..n {
            for l in 0..n {
                let path = format!("G[{k}][{l}]");
                if self.g_hat[(k, l)].abs() >= density.delta2 {
                    return Err(Error::invalid(path, "|Ĝ| >= delta2"));
                }
                if self.g_tilde[(k, l)].abs() >= density.delta2 {
                    return Err(Error::invalid(path, "|G̃| >= delta2"));
                }
                if self.coefficient(k, l).abs() < density.delta1 {
                    return Err(Error::invalid(path, "|G| < delta1"));
                }
            }
        }
        Ok(())
    }
}

/// Draws `Ĝ` and `G̃` entrywise (row-major, estimate before error) from the
/// configured family. The draw is a pure function of `seed`; `p` only scales
/// the error term.
pub fn draw_channel<S: ChannelExponents + ?Sized>(
    spec: &S,
    density: &BoundedDensitySpec,
    p: f64,
    seed: u64,
) -> Result<ChannelRealization> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid("P", format!("{p} must be finite and > 1")));
    }
    let n = spec.users();
    let mut rng = seed::rng(seed);
    let mut g_hat = DMatrix::zeros(n, n);
    let mut g_tilde = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            g_hat[(k, l)] = density.sample_hat(&mut rng);
            g_tilde[(k, l)] = density.sample_tilde(&mut rng);
        }
    }
    let beta = DMatrix::from_fn(n, n, |k, l| spec.beta(k, l));
    let realization = ChannelRealization {
        g_hat,
        g_tilde,
        beta,
        p,
    };
    realization.check(density)?;
    Ok(realization)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> ChannelSpec2 {
        ChannelSpec2::new([[1.0, 0.75], [0.5, 1.0]], [[0.4, 0.4], [0.2, 0.2]]).unwrap()
    }

    #[test]
    fn rejects_beta_above_alpha_with_path() {
        let err = ChannelSpec2::new([[1.0, 0.5], [1.0, 1.0]], [[0.0, 0.6], [0.0, 0.0]]).unwrap_err();
        match err {
            Error::Invalid { path, .. } => assert_eq!(path, "beta[0][1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_and_nonfinite_alpha() {
        assert!(ChannelSpec2::new([[-0.1, 0.0], [0.0, 0.0]], [[0.0; 2]; 2]).is_err());
        assert!(ChannelSpec2::new([[f64::NAN, 0.0], [0.0, 0.0]], [[0.0; 2]; 2]).is_err());
        assert!(ChannelSpec2::new([[f64::INFINITY, 0.0], [0.0, 0.0]], [[0.0; 2]; 2]).is_err());
    }

    #[test]
    fn two_user_accepts_strong_links() {
        assert!(ChannelSpec2::new([[1.7, 0.2], [0.3, 1.4]], [[0.2, 0.2], [0.3, 1.2]]).is_ok());
    }

    #[test]
    fn symmetric_ranges() {
        assert!(SymmetricSpecK::new(1, 0.5, 0.1).is_err());
        assert!(SymmetricSpecK::new(3, 1.2, 0.1).is_err());
        assert!(SymmetricSpecK::new(3, 0.5, 0.6).is_err());
        assert!(SymmetricSpecK::new(3, 0.5, 0.5).is_ok());
        let s = SymmetricSpecK::new(3, 0.6, 0.3).unwrap();
        assert_eq!(s.alpha(1, 1), 1.0);
        assert_eq!(s.alpha(0, 2), 0.6);
        assert_eq!(s.beta(2, 0), 0.3);
    }

    #[test]
    fn default_density_constants() {
        let d = BoundedDensitySpec::default();
        assert_eq!(d.delta1, 0.5);
        assert_eq!(d.delta2, 2.0);
        assert_eq!(d.f_max, 1.0);
        assert_eq!(d.g_max(), 2.5);
    }

    #[test]
    fn density_rejects_reachable_zero() {
        let bad = DensityFamily::UniformBox {
            hat_lo: 0.5,
            hat_hi: 2.0,
            tilde_half_width: 0.5,
            random_signs: true,
        };
        assert!(matches!(BoundedDensitySpec::new(bad), Err(Error::Density(_))));
        let inverted = DensityFamily::UniformBox {
            hat_lo: 2.0,
            hat_hi: 1.0,
            tilde_half_width: 0.5,
            random_signs: false,
        };
        assert!(BoundedDensitySpec::new(inverted).is_err());
    }

    #[test]
    fn signed_family_halves_estimate_density() {
        let d = BoundedDensitySpec::new(DensityFamily::UniformBox {
            hat_lo: 1.0,
            hat_hi: 1.5,
            tilde_half_width: 0.25,
            random_signs: true,
        })
        .unwrap();
        assert_eq!(d.delta1, 0.75);
        assert_eq!(d.f_max, 2.0);
    }

    #[test]
    fn same_seed_same_realization() {
        let d = BoundedDensitySpec::default();
        let a = draw_channel(&example(), &d, 1e6, 42).unwrap();
        let b = draw_channel(&example(), &d, 1e6, 42).unwrap();
        assert_eq!(a, b);
        let c = draw_channel(&example(), &d, 1e6, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_low_snr() {
        let d = BoundedDensitySpec::default();
        assert!(draw_channel(&example(), &d, 1.0, 1).is_err());
        assert!(draw_channel(&example(), &d, f64::NAN, 1).is_err());
    }

    #[test]
    fn realized_coefficients_respect_bounds_over_many_draws() {
        let d = BoundedDensitySpec::default();
        let spec = ChannelSpec2::new([[1.0, 1.0], [1.0, 1.0]], [[0.0; 2]; 2]).unwrap();
        let mut min_g = f64::INFINITY;
        for s in 0..10_000u64 {
            let r = draw_channel(&spec, &d, 1.5, s).unwrap();
            for k in 0..2 {
                for l in 0..2 {
                    min_g = min_g.min(r.coefficient(k, l).abs());
                }
            }
        }
        assert!(min_g >= d.delta1, "min |G| = {min_g}");
    }

    #[test]
    fn signed_draws_cover_both_signs() {
        let d = BoundedDensitySpec::new(DensityFamily::UniformBox {
            hat_lo: 1.0,
            hat_hi: 2.0,
            tilde_half_width: 0.5,
            random_signs: true,
        })
        .unwrap();
        let spec = SymmetricSpecK::new(4, 1.0, 0.0).unwrap();
        let r = draw_channel(&spec, &d, 10.0, 3).unwrap();
        assert!(r.g_hat.iter().any(|v| *v < 0.0));
        assert!(r.g_hat.iter().any(|v| *v > 0.0));
    }
}
