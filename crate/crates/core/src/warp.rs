//! Frequency-warping functions on the normalized axis `[0, π]`.
//!
//! * bilinear: phase response of the all-pass `(z - α) / (1 - α z)`, `z = e^{iω}`
//! * quadratic: `ω + β (ω/π - (ω/π)²)`
//! * composite: quadratic applied after bilinear
//! * power: `π (ω/π)^γ`
//!
//! All of them fix both endpoints and are strictly increasing over their valid
//! parameter ranges. Envelopes are warped by pullback: each output bin reads
//! the input at the inverse-warped frequency.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;



use crate::error::{Error, Result};

/// Largest |β| accepted for the quadratic warp.
pub const MAX_QUADRATIC_FACTOR: f64 = 2.0;
/// Bisection tolerance for inverse warps, in radians.
pub const INVERSE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum WarpSpec {
    Identity,
    BilinearQuadratic { alpha: f64, beta: f64 },
    Power { gamma: f64 },
}

fn check_frequency(omega: f64) -> Result<()> {
    if !(0.0..=PI).contains(&omega) {
        return Err(Error::Domain(format!("frequency {omega} outside [0, π]")));
    }
    Ok(())
}

/// `|arg((z - α) / (1 - α z))|` with `z = e^{iω}`.
pub fn bilinear_warp(omega: f64, alpha: f64) -> Result<f64> {
    if !(alpha.abs() < 1.0) {
        return Err(Error::Domain(format!("bilinear factor |α| = {} must be < 1", alpha.abs())));
    }
    check_frequency(omega)?;
    Ok(bilinear_unchecked(omega, alpha))
}

// Closed form of the all-pass phase; exact at α = 0 unlike the complex quotient.
fn bilinear_unchecked(omega: f64, alpha: f64) -> f64 {
    let shift = 2.0 * (alpha * omega.sin() / (1.0 - alpha * omega.cos())).atan();
    (omega + shift).clamp(0.0, PI)
}

pub fn quadratic_warp(omega: f64, beta: f64) -> Result<f64> {
    check_frequency(omega)?;
    Ok(quadratic_unchecked(omega, beta))
}

fn quadratic_unchecked(omega: f64, beta: f64) -> f64 {
    let x = omega / PI;
    omega + beta * (x - x * x)
}

pub fn composite_warp(omega: f64, alpha: f64, beta: f64) -> Result<f64> {
    quadratic_warp(bilinear_warp(omega, alpha)?, beta)
}

pub fn power_warp(omega: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("power exponent γ = {gamma} must be positive")));
    }
    check_frequency(omega)?;
    Ok(PI * (omega / PI).powf(gamma))
}

impl WarpSpec {
    /// Rejects parameters for which the map is not a strictly increasing bijection of `[0, π]`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            WarpSpec::Identity => Ok(()),
            WarpSpec::BilinearQuadratic { alpha, beta } => {
                if !(alpha.abs() < 1.0) {
                    return Err(Error::Contract(format!("bilinear factor α = {alpha} outside (-1, 1)")));
                }
                if !(beta.abs() <= MAX_QUADRATIC_FACTOR) {
                    return Err(Error::Contract(format!("quadratic factor β = {beta} outside [-2, 2]")));
                }
                Ok(())
            }
            WarpSpec::Power { gamma } => {
                if !(gamma > 0.0) || !gamma.is_finite() {
                    return Err(Error::Contract(format!("power exponent γ = {gamma} must be positive")));
                }
                Ok(())
            }
        }
    }

    /// Evaluates the warp; callers must have validated the spec.
    pub fn apply(&self, omega: f64) -> f64 {
        match *self {
            WarpSpec::Identity => omega,
            WarpSpec::BilinearQuadratic { alpha, beta } => {
                quadratic_unchecked(bilinear_unchecked(omega, alpha), beta)
            }
            WarpSpec::Power { gamma } => PI * (omega / PI).powf(gamma),
        }
    }

    /// Inverse by bisection on the monotone map.
    pub fn inverse(&self, target: f64) -> f64 {
        if matches!(self, WarpSpec::Identity) || target <= 0.0 || target >= PI {
            return target.clamp(0.0, PI);
        }
        let (mut lo, mut hi) = (0.0, PI);
        while hi - lo > INVERSE_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if self.apply(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn is_identity(&self) -> bool {
        match *self {
            WarpSpec::Identity => true,
            WarpSpec::BilinearQuadratic { alpha, beta } => alpha == 0.0 && beta == 0.0,
            WarpSpec::Power { gamma } => gamma == 1.0,
        }
    }

    /// Precomputes the source position (in fractional bins) read by each output bin.
    pub fn pullback(&self, bins: usize) -> Result<EnvelopeWarp> {
        self.validate()?;
        if bins < 2 {
            return Err(Error::Contract("envelopes need at least two bins".into()));
        }
        let last = (bins - 1) as f64;
        let positions = if self.is_identity() {
            None
        } else {
            Some(
                (0..bins)
                    .map(|k| {
                        let omega = PI * k as f64 / last;
                        (self.inverse(omega) / PI * last).clamp(0.0, last)
                    })
                    .collect(),
            )
        };
        Ok(EnvelopeWarp { bins, positions })
    }
}

/// A warp resolved to a fixed envelope length, reusable across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeWarp {
    bins: usize,
    /// `None` for the identity.
    positions: Option<Vec<f64>>,
}

impl EnvelopeWarp {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn apply(&self, envelope: &[f64]) -> Result<Vec<f64>> {
        if envelope.len() != self.bins {
            return Err(Error::Contract(format!(
                "envelope has {} bins, warp prepared for {}",
                envelope.len(),
                self.bins
            )));
        }
        let Some(positions) = &self.positions else {
            return Ok(envelope.to_vec());
        };
        Ok(positions
            .iter()
            .map(|&p| {
                let i = (p.floor() as usize).min(self.bins - 2);
                let frac = p - i as f64;
                envelope[i] * (1.0 - frac) + envelope[i + 1] * frac
            })
            .collect())
    }
}

/// Warps a nonnegative envelope over `[0, π]` by pullback with linear interpolation.
pub fn warp_envelope(envelope: &[f64], spec: &WarpSpec) -> Result<Vec<f64>> {
    if envelope.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Contract("envelope has negative or NaN values".into()));
    }
    spec.pullback(envelope.len())?.apply(envelope)
}

/// Trapezoidal estimate of `∫₀^π |w(ω) - ω| dω` for the composite warp.
pub fn distortion_strength(alpha: f64, beta: f64, quadrature_points: usize) -> Result<f64> {
    if quadrature_points < 1000 {
        return Err(Error::Parameter(format!(
            "distortion quadrature needs at least 1000 points, got {quadrature_points}"
        )));
    }
    let spec = WarpSpec::BilinearQuadratic { alpha, beta };
    spec.validate()?;
    let intervals = quadrature_points - 1;
    let h = PI / intervals as f64;
    let f = |i: usize| {
        let omega = PI * i as f64 / intervals as f64;
        (spec.apply(omega) - omega).abs()
    };
    let interior: f64 = (1..intervals).map(f).sum();
    Ok(h * (0.5 * (f(0) + f(intervals)) + interior))
}
