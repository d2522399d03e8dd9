//! Diffusion weights `ρ(x_N)` and the hypotheses imposed on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the weight function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    /// `ρ(s) = (1+s)^γ`.
    PowerOnePlus,
    /// Piecewise-linear interpolation of `(s, ρ)` samples; linear
    /// extrapolation of the last segment beyond the table.
    Tabulated { s: Vec<f64>, rho: Vec<f64> },
}

/// A weight `ρ` together with its comparison exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub profile: Profile,
    /// Lower comparison exponent: `(1+s)^γ ≤ ρ(s)`.
    pub gamma: f64,
    /// Optional upper comparison exponent: `ρ(s) ≤ (1+s)^β`.
    pub beta: Option<f64>,
}

impl Weight {
    pub fn power(gamma: f64) -> Self {
        Weight { profile: Profile::PowerOnePlus, gamma, beta: None }
    }

    /// The constant weight `ρ ≡ 1`.
    pub fn unit() -> Self {
        Weight::power(0.0)
    }

    pub fn tabulated(s: Vec<f64>, rho: Vec<f64>, gamma: f64) -> Result<Self> {
        if s.len() < 2 || s.len() != rho.len() {
            return Err(Error::Argument("tabulated weight needs >= 2 matching samples".into()));
        }
        if s[0] != 0.0 || s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("tabulated abscissae must start at 0 and increase".into()));
        }
        if rho.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Argument("tabulated weight values must be positive".into()));
        }
        Ok(Weight { profile: Profile::Tabulated { s, rho }, gamma, beta: None })
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn is_power(&self) -> bool {
        matches!(self.profile, Profile::PowerOnePlus)
    }

    pub fn value(&self, s: f64) -> f64 {
        match &self.profile {
            Profile::PowerOnePlus => {
                if self.gamma == 0.0 {
                    1.0
                } else {
                    (1.0 + s).powf(self.gamma)
                }
            }
            Profile::Tabulated { s: xs, rho } => {
                let k = segment(xs, s);
                let t = (s - xs[k]) / (xs[k + 1] - xs[k]);
                rho[k] + t * (rho[k + 1] - rho[k])
            }
        }
    }

    /// `ρ'(s)`: analytic for the power family, one-sided segment slope for tables.
    pub fn derivative(&self, s: f64) -> f64 {
        match &self.profile {
            Profile::PowerOnePlus => {
                if self.gamma == 0.0 {
                    0.0
                } else {
                    self.gamma * (1.0 + s).powf(self.gamma - 1.0)
                }
            }
            Profile::Tabulated { s: xs, rho } => {
                let k = segment(xs, s);
                (rho[k + 1] - rho[k]) / (xs[k + 1] - xs[k])
            }
        }
    }

    /// `ρ(0) = 1`.
    pub fn is_normalized(&self) -> bool {
        (self.value(0.0) - 1.0).abs() <= 1e-12
    }

    /// Checks `(1+s)^γ ≤ ρ(s)` on the samples (and `ρ ≤ (1+s)^β` when β is set).
    pub fn check_rho0(&self, samples: &[f64]) -> Result<bool> {
        if samples.is_empty() {
            return Err(Error::Argument("empty sample set".into()));
        }
        let tol = 1e-12;
        Ok(samples.iter().all(|&s| {
            let v = self.value(s);
            let lower = (1.0 + s).powf(self.gamma) <= v * (1.0 + tol);
            let upper = self.beta.is_none_or(|b| v <= (1.0 + s).powf(b) * (1.0 + tol));
            lower && upper
        }))
    }

    /// Checks `0 < ρ'(s) s ≤ c₁ ρ(s)`; returns whether the strict lower bound holds
    /// and the smallest admissible `c₁ = max ρ'(s) s / ρ(s)` over the samples.
    pub fn check_rho1(&self, samples: &[f64]) -> Result<Rho1Check> {
        if samples.is_empty() {
            return Err(Error::Argument("empty sample set".into()));
        }
        if samples.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Argument("(ρ_1) samples must be positive".into()));
        }
        let mut holds = true;
        let mut c1 = f64::NEG_INFINITY;
        for &s in samples {
            let ds = self.derivative(s) * s;
            holds &= ds > 0.0;
            c1 = c1.max(ds / self.value(s));
        }
        Ok(Rho1Check { holds: holds && c1.is_finite(), c1_estimate: c1 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rho1Check {
    pub holds: bool,
    pub c1_estimate: f64,
}

fn segment(xs: &[f64], s: f64) -> usize {
    let last = xs.len() - 2;
    match xs.partition_point(|&x| x <= s) {
        0 => 0,
        k => (k - 1).min(last),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_weight_values() {
        let w = Weight::power(2.0);
        assert_eq!(w.value(0.0), 1.0);
        assert_relative_eq!(w.value(1.0), 4.0);
        assert_relative_eq!(w.derivative(1.0), 4.0);
        assert!(w.is_normalized());
        assert!(w.check_rho0(&[0.0, 0.5, 3.0]).unwrap());
    }

    #[test]
    fn rho1_power_gamma_two() {
        let c = Weight::power(2.0).check_rho1(&[0.5, 1.0, 10.0]).unwrap();
        assert!(c.holds);
        assert_relative_eq!(c.c1_estimate, 2.0 * 10.0 / 11.0, max_relative = 1e-14);
        assert!(c.c1_estimate < 2.0);
    }

    #[test]
    fn rho1_fails_for_constant_weight() {
        let c = Weight::unit().check_rho1(&[0.5, 1.0]).unwrap();
        assert!(!c.holds);
        assert!(Weight::unit().check_rho1(&[]).is_err());
    }

    #[test]
    fn rho1_dense_supremum() {
        let samples: Vec<f64> = (1..=10_000).map(|k| k as f64 * 0.01).collect();
        let c = Weight::power(3.0).check_rho1(&samples).unwrap();
        assert!(c.holds);
        assert_relative_eq!(c.c1_estimate, 3.0 * 100.0 / 101.0, max_relative = 1e-12);
    }

    #[test]
    fn monotone_comparison_in_gamma() {
        let lo = Weight::power(1.5);
        let hi = Weight::power(3.0);
        for k in 0..500 {
            let s = k as f64 * 0.1;
            assert!(lo.value(s) <= hi.value(s));
        }
    }

    #[test]
    fn tabulated_weight() {
        let w = Weight::tabulated(vec![0.0, 1.0, 3.0], vec![1.0, 3.0, 5.0], 1.0).unwrap();
        assert_relative_eq!(w.value(0.5), 2.0);
        assert_relative_eq!(w.value(2.0), 4.0);
        assert_relative_eq!(w.derivative(0.5), 2.0);
        assert_relative_eq!(w.derivative(2.0), 1.0);
        assert_relative_eq!(w.value(4.0), 6.0);
        assert!(w.check_rho0(&[0.0, 0.5, 1.0, 2.0, 3.0]).unwrap());
        assert!(w.check_rho1(&[0.5, 2.0]).unwrap().holds);
        assert!(Weight::tabulated(vec![0.0], vec![1.0], 0.0).is_err());
        assert!(Weight::tabulated(vec![0.0, 0.0], vec![1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn beta_upper_bound() {
        let w = Weight::power(2.0).with_beta(3.0);
        assert!(w.check_rho0(&[0.0, 1.0, 5.0]).unwrap());
        let w = Weight::power(2.0).with_beta(1.0);
        assert!(!w.check_rho0(&[1.0]).unwrap());
    }
}
