//! Closed-form exponents and constants of the weighted half-space problem.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Sobolev and trace critical exponents of dimension `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents {
    /// `2N/(N-2)`.
    pub two_star: f64,
    /// `2(N-1)/(N-2)`.
    pub two_lower: f64,
}

/// Returns `(2N/(N-2), 2(N-1)/(N-2))`.
pub fn critical_exponents(dim: usize) -> Result<CriticalExponents> {
    let (two_star, two_lower) = critical_exponents_exact(dim)?;
    Ok(CriticalExponents {
        two_star: ratio_to_f64(two_star),
        two_lower: ratio_to_f64(two_lower),
    })
}

/// Same as [`critical_exponents`] in exact rational arithmetic.
pub fn critical_exponents_exact(dim: usize) -> Result<(Ratio<i64>, Ratio<i64>)> {
    if dim < 3 {
        return Err(Error::Dimension(dim));
    }
    let n = dim as i64;
    Ok((Ratio::new(2 * n, n - 2), Ratio::new(2 * (n - 1), n - 2)))
}

pub(crate) fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Constant `(gamma - p + 1)/p` of the weighted Hardy inequality.
pub fn hardy_constant(p: f64, gamma: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Admissibility(format!("Hardy exponent p = {p} must exceed 1")));
    }
    if !(gamma > p - 1.0) {
        return Err(Error::Admissibility(format!(
            "Hardy inequality needs gamma > p - 1 (gamma = {gamma}, p = {p})"
        )));
    }
    Ok((gamma - p + 1.0) / p)
}

/// Surface measure `|S^{k-1}|` of the unit sphere in `R^k`.
pub fn sphere_measure(k: usize) -> f64 {
    // |S^0| = 2, |S^1| = 2π, |S^{n}| = 2π/(n-1) |S^{n-2}|.
    match k {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 2.0) * sphere_measure(k - 2),
    }
}

/// Which unit-set measure stands behind the ω appearing in the sharp trace constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OmegaConvention {
    /// ω = |S^{N-1}|, the surface of the unit sphere of `R^N`.
    SphereSurface,
    /// ω = |B^N| = |S^{N-1}|/N, the volume of the unit ball of `R^N`.
    BallVolume,
}

impl OmegaConvention {
    pub const ALL: [OmegaConvention; 2] = [OmegaConvention::SphereSurface, OmegaConvention::BallVolume];
}

/// Sharp constant `(N-2)/2 · ω^{1/(N-1)}` of the unweighted trace inequality.
pub fn trace_best_constant(dim: usize, convention: OmegaConvention) -> Result<f64> {
    if dim < 3 {
        return Err(Error::Dimension(dim));
    }
    let surface = sphere_measure(dim);
    let omega = match convention {
        OmegaConvention::SphereSurface => surface,
        OmegaConvention::BallVolume => surface / dim as f64,
    };
    let n = dim as f64;
    Ok((n - 2.0) / 2.0 * omega.powf(1.0 / (n - 1.0)))
}

/// Sharp Sobolev constant of `R^N`, `N(N-2)/4 · |S^N|^{2/N}`.
pub fn sobolev_constant(dim: usize) -> Result<f64> {
    if dim < 3 {
        return Err(Error::Dimension(dim));
    }
    let n = dim as f64;
    Ok(n * (n - 2.0) / 4.0 * sphere_measure(dim + 1).powf(2.0 / n))
}

/// `2^{-2/N}` times [`sobolev_constant`]: the constant of
/// `S ‖u‖²_{2*} ≤ ∫|∇u|²` on the half-space without boundary conditions.
pub fn half_space_sobolev_constant(dim: usize) -> Result<f64> {
    Ok(2f64.powf(-2.0 / dim as f64) * sobolev_constant(dim)?)
}

/// Picks the convention whose trace constant lies closest to a numerically
/// minimized quotient. Returns the convention and both candidate values.
pub fn calibrate_omega(dim: usize, measured: f64) -> Result<(OmegaConvention, [(OmegaConvention, f64); 2])> {
    let mut values = [(OmegaConvention::SphereSurface, 0.0), (OmegaConvention::BallVolume, 0.0)];
    for slot in values.iter_mut() {
        slot.1 = trace_best_constant(dim, slot.0)?;
    }
    let best = values
        .iter()
        .min_by(|a, b| (a.1 - measured).abs().total_cmp(&(b.1 - measured).abs()))
        .map(|v| v.0)
        .unwrap_or(OmegaConvention::SphereSurface);
    Ok((best, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponents_match_direct_formula() {
        let e3 = critical_exponents(3).unwrap();
        assert_eq!((e3.two_star, e3.two_lower), (6.0, 4.0));
        let e4 = critical_exponents(4).unwrap();
        assert_eq!((e4.two_star, e4.two_lower), (4.0, 3.0));
        let e6 = critical_exponents(6).unwrap();
        assert_eq!((e6.two_star, e6.two_lower), (3.0, 2.5));
        assert_eq!(critical_exponents(2), Err(Error::Dimension(2)));
    }

    #[test]
    fn exponent_identities_hold_exactly() {
        for n in 3..=40usize {
            let (s, l) = critical_exponents_exact(n).unwrap();
            assert!(l < s);
            assert_eq!(s * Ratio::from_integer(n as i64 - 2), Ratio::from_integer(2 * n as i64));
        }
    }

    #[test]
    fn hardy_constant_values() {
        assert_eq!(hardy_constant(2.0, 3.0).unwrap(), 1.0);
        assert_eq!(hardy_constant(3.0, 5.0).unwrap(), 1.0);
        let tiny = hardy_constant(2.0, 1.0 + 1e-9).unwrap();
        assert!(tiny > 0.0 && (tiny - 5e-10).abs() < 1e-15);
        assert!(matches!(hardy_constant(2.0, 1.0), Err(Error::Admissibility(_))));
        assert!(matches!(hardy_constant(2.0, 0.5), Err(Error::Admissibility(_))));
    }

    #[test]
    fn hardy_constant_is_increasing_in_gamma() {
        let mut prev = 0.0;
        for k in 1..200 {
            let g = 1.0 + 0.05 * k as f64;
            let c = hardy_constant(2.0, g).unwrap();
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn sphere_measures() {
        assert_relative_eq!(sphere_measure(2), 2.0 * PI);
        assert_relative_eq!(sphere_measure(3), 4.0 * PI);
        assert_relative_eq!(sphere_measure(4), 2.0 * PI * PI);
        assert_relative_eq!(sphere_measure(5), 8.0 * PI * PI / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn trace_constants() {
        let s3 = trace_best_constant(3, OmegaConvention::SphereSurface).unwrap();
        assert_relative_eq!(s3, PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(s3, 1.772454, epsilon = 1e-6);
        let b3 = trace_best_constant(3, OmegaConvention::BallVolume).unwrap();
        assert_relative_eq!(b3, 1.023327, epsilon = 1e-6);
        let s4 = trace_best_constant(4, OmegaConvention::SphereSurface).unwrap();
        assert_relative_eq!(s4, 2.702568, epsilon = 1e-6);
    }

    #[test]
    fn sobolev_constants() {
        // N = 3: 3/4 (2π²)^{2/3}.
        let s3 = 0.75 * (2.0 * PI * PI).powf(2.0 / 3.0);
        assert!((sobolev_constant(3).unwrap() - s3).abs() < 1e-12);
        // N = 4: 2 · (8π²/3)^{1/2}.
        let s4 = 2.0 * (8.0 * PI * PI / 3.0).sqrt();
        assert!((sobolev_constant(4).unwrap() - s4).abs() < 1e-12);
        assert!((half_space_sobolev_constant(3).unwrap() - s3 * 2f64.powf(-2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn calibration_picks_closest() {
        let (c, _) = calibrate_omega(3, 1.80).unwrap();
        assert_eq!(c, OmegaConvention::SphereSurface);
        let (c, _) = calibrate_omega(3, 1.05).unwrap();
        assert_eq!(c, OmegaConvention::BallVolume);
    }
}
