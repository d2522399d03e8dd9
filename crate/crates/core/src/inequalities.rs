//! Both sides of the weighted Hardy and trace inequalities on discrete
//! fields, and the Moser iteration ladder.

use serde::{Deserialize, Serialize};

use crate::constants::{critical_exponents, hardy_constant};
use crate::error::{Error, Result};
use crate::grid::{
    boundary_power_integral, lq_norm_boundary, volume_integral_with, weighted_dirichlet_energy, Field,
};
use crate::weight::Weight;

/// Largest exponent the sup-norm ladder evaluates.
pub const EXPONENT_CAP: f64 = 512.0;

/// `lhs ≤ rhs` evaluated on one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    /// `slack / max(|rhs|, ε_mach)`.
    pub relative_slack: f64,
    pub constant_used: f64,
    pub tags: Vec<String>,
}

impl InequalityReport {
    pub fn new(lhs: f64, rhs: f64, constant_used: f64, tags: &[&str]) -> Self {
        let slack = rhs - lhs;
        InequalityReport {
            lhs,
            rhs,
            slack,
            relative_slack: slack / rhs.abs().max(f64::EPSILON),
            constant_used,
            tags: tags.iter().map(|t| t.to_string()).collect(),
        }
    }

    /// `slack ≥ -tol · |rhs|`.
    pub fn holds_within(&self, rel_tol: f64) -> bool {
        self.slack >= -rel_tol * self.rhs.abs()
    }
}

/// One CSV row of an inequality suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityRow {
    pub check: String,
    pub gamma: f64,
    pub exponent: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub relative_slack: f64,
    pub seed: u64,
}

impl InequalityRow {
    pub fn from_report(check: &str, gamma: f64, exponent: f64, seed: u64, report: &InequalityReport) -> Self {
        InequalityRow {
            check: check.to_owned(),
            gamma,
            exponent,
            lhs: report.lhs,
            rhs: report.rhs,
            slack: report.slack,
            relative_slack: report.relative_slack,
            seed,
        }
    }
}

fn power_gamma(weight: &Weight) -> Result<f64> {
    if weight.is_power() {
        Ok(weight.gamma)
    } else {
        Err(Error::Argument("this inequality is stated for the weight (1+x_N)^γ".into()))
    }
}

/// `C^p ∫ |u|^p (1+x_N)^{γ-p} + C^{p-1} ∫_∂ |u|^p ≤ ∫ (1+x_N)^γ |∇u|^p`
/// with `C = (γ-p+1)/p`.
pub fn hardy_p_check(field: &Field, weight: &Weight, p: f64) -> Result<InequalityReport> {
    let gamma = power_gamma(weight)?;
    let c = hardy_constant(p, gamma)?;
    let volume = volume_integral_with(&[field], |pt| pt.values[0].abs().powf(p) * (1.0 + pt.z).powf(gamma - p))?;
    let boundary = boundary_power_integral(field, p)?;
    let rhs = volume_integral_with(&[field], |pt| {
        let g2 = pt.grad_r[0] * pt.grad_r[0] + pt.grad_z[0] * pt.grad_z[0];
        (1.0 + pt.z).powf(gamma) * g2.powf(0.5 * p)
    })?;
    let lhs = c.powf(p) * volume + c.powf(p - 1.0) * boundary;
    Ok(InequalityReport::new(lhs, rhs, c, &["hardy-p"]))
}

/// `(γ-1)/2 ∫_∂ u² ≤ ∫ (1+x_N)^γ |∇u|²`.
pub fn trace_l2_check(field: &Field, gamma: f64) -> Result<InequalityReport> {
    if !(gamma > 1.0) {
        return Err(Error::Admissibility(format!("the L² trace inequality needs γ > 1, got {gamma}")));
    }
    let c = 0.5 * (gamma - 1.0);
    let lhs = c * boundary_power_integral(field, 2.0)?;
    let rhs = weighted_dirichlet_energy(field, &Weight::power(gamma))?;
    Ok(InequalityReport::new(lhs, rhs, c, &["trace-l2"]))
}

/// Links of the trace chain
/// `S (∫_∂|u|^{2_*})^{2/2_*} ≤ ∫|∇u|² ≤ ∫(1+x_N)^γ|∇u|²` and the resulting
/// `L^q` trace bound `(∫_∂|u|^q)^{2/q} ≤ C₀ ∫(1+x_N)^γ|∇u|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceChainReport {
    /// `S‖u‖²_{2_*,∂} ≤ ∫|∇u|²`, with `S` the supplied trace constant.
    pub critical_link: InequalityReport,
    /// `∫|∇u|² ≤ ∫(1+x_N)^γ|∇u|²`.
    pub weight_link: InequalityReport,
    /// `‖u‖²_{q,∂} ≤ C₀ ∫(1+x_N)^γ|∇u|²`; `constant_used` is `C₀`.
    pub lq_link: InequalityReport,
}

/// Interpolation constant `C₀ = (2/(γ-1))^{1-θ} S^{-θ}` with
/// `1/q = (1-θ)/2 + θ/2_*`; for `q = 2_*` this is `1/S` and `γ` is free.
pub fn interpolation_constant(dim: usize, gamma: f64, q: f64, trace_constant: f64) -> Result<f64> {
    let two_lower = critical_exponents(dim)?.two_lower;
    if !(2.0..=two_lower).contains(&q) {
        return Err(Error::Admissibility(format!("trace exponent q = {q} outside [2, {two_lower}]")));
    }
    if !(trace_constant > 0.0) {
        return Err(Error::Argument(format!("trace constant must be positive, got {trace_constant}")));
    }
    let theta = (0.5 - 1.0 / q) / (0.5 - 1.0 / two_lower);
    if theta >= 1.0 {
        return Ok(1.0 / trace_constant);
    }
    if !(gamma > 1.0) {
        return Err(Error::Admissibility(format!("the L^q trace bound for q < 2_* needs γ > 1, got {gamma}")));
    }
    Ok((2.0 / (gamma - 1.0)).powf(1.0 - theta) * trace_constant.powf(-theta))
}

pub fn trace_lq_chain_check(field: &Field, gamma: f64, q: f64, trace_constant: f64) -> Result<TraceChainReport> {
    let dim = field.grid().dim();
    let two_lower = critical_exponents(dim)?.two_lower;
    let c0 = interpolation_constant(dim, gamma, q, trace_constant)?;
    let unweighted = weighted_dirichlet_energy(field, &Weight::unit())?;
    let weighted = weighted_dirichlet_energy(field, &Weight::power(gamma))?;
    let crit = lq_norm_boundary(field, two_lower)?.powi(2);
    let lq = lq_norm_boundary(field, q)?.powi(2);
    Ok(TraceChainReport {
        critical_link: InequalityReport::new(trace_constant * crit, unweighted, trace_constant, &["trace-critical"]),
        weight_link: InequalityReport::new(unweighted, weighted, 1.0, &["trace-weight"]),
        lq_link: InequalityReport::new(lq, c0 * weighted, c0, &["trace-lq"]),
    })
}

/// `k_n = (2*/ζ)^n - 1` for `n = 1..=n_max`.
pub fn moser_ladder(dim: usize, zeta: f64, n_max: usize) -> Result<Vec<f64>> {
    let two_star = critical_exponents(dim)?.two_star;
    if !(zeta >= 2.0 && zeta < two_star) {
        return Err(Error::Admissibility(format!("ladder base ζ = {zeta} must lie in [2, {two_star})")));
    }
    let ratio = two_star / zeta;
    Ok((1..=n_max as i32).map(|n| ratio.powi(n) - 1.0).collect())
}

/// One rung of the sup-norm ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub n: usize,
    /// Evaluated exponent `min((k_n+1)·2*, 512)`.
    pub exponent: f64,
    pub norm: f64,
    /// The nominal exponent exceeded [`EXPONENT_CAP`] and was clamped.
    pub capped: bool,
}

/// `L^{(k_n+1)2*}` volume norms of `field`. With `probability` the measure is
/// rescaled to total mass one on the grid, which makes the sequence
/// nondecreasing. Norms are evaluated as `M (∫ (|u|/M)^s)^{1/s}`.
pub fn ladder_supnorm_diagnostic(
    field: &Field,
    zeta: f64,
    n_max: usize,
    probability: bool,
) -> Result<Vec<LadderEntry>> {
    let dim = field.grid().dim();
    let two_star = critical_exponents(dim)?.two_star;
    let ks = moser_ladder(dim, zeta, n_max)?;
    let m = field.max_abs();
    let mass = if probability { volume_integral_with(&[field], |_| 1.0)? } else { 1.0 };
    ks.iter()
        .enumerate()
        .map(|(idx, k)| {
            let nominal = (k + 1.0) * two_star;
            let capped = nominal > EXPONENT_CAP;
            let s = nominal.min(EXPONENT_CAP);
            let norm = if m == 0.0 {
                0.0
            } else {
                let integral = volume_integral_with(&[field], |pt| (pt.values[0].abs() / m).powf(s))?;
                m * (integral / mass).powf(1.0 / s)
            };
            Ok(LadderEntry { n: idx + 1, exponent: s, norm, capped })
        })
        .collect()
}

/// Like [`ladder_supnorm_diagnostic`] but fails with `ExponentCap` instead
/// of clamping.
pub fn ladder_supnorm_strict(field: &Field, zeta: f64, n_max: usize) -> Result<Vec<LadderEntry>> {
    let entries = ladder_supnorm_diagnostic(field, zeta, n_max, false)?;
    let two_star = critical_exponents(field.grid().dim())?.two_star;
    let ks = moser_ladder(field.grid().dim(), zeta, n_max)?;
    if let Some(e) = entries.iter().find(|e| e.capped) {
        return Err(Error::ExponentCap { exponent: (ks[e.n - 1] + 1.0) * two_star, cap: EXPONENT_CAP });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{trace_best_constant, OmegaConvention};
    use crate::grid::{interpolate_analytic, make_grid};
    use crate::instanton::InstantonParams;
    use crate::suite::bump_suite;
    use approx::assert_relative_eq;

    #[test]
    fn zero_field_gives_zero_sides() {
        let g = make_grid(3, 5.0, 5.0, 16, 16).unwrap();
        let z = Field::zeros(&g);
        let h = hardy_p_check(&z, &Weight::power(3.0), 2.0).unwrap();
        assert_eq!((h.lhs, h.rhs, h.slack), (0.0, 0.0, 0.0));
        let t = trace_l2_check(&z, 3.0).unwrap();
        assert_eq!((t.lhs, t.rhs), (0.0, 0.0));
        let c = trace_lq_chain_check(&z, 3.0, 3.0, 1.0).unwrap();
        assert_eq!((c.critical_link.lhs, c.weight_link.rhs, c.lq_link.lhs), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hardy_holds_on_gaussian_exponential() {
        let g = make_grid(3, 20.0, 20.0, 64, 64).unwrap();
        let f = interpolate_analytic(&g, true, |r, z| (-r * r - z).exp()).unwrap();
        let h = hardy_p_check(&f, &Weight::power(3.0), 2.0).unwrap();
        assert!(h.slack > 0.0);
        assert_eq!(h.constant_used, 1.0);
        assert!(matches!(hardy_p_check(&f, &Weight::power(1.0), 2.0), Err(Error::Admissibility(_))));
    }

    #[test]
    fn hardy_with_unit_constant_is_an_identity_test() {
        // p = 2, γ = 3: lhs = ∫ u²(1+z) + ∫_∂ u².
        let g = make_grid(3, 6.0, 6.0, 24, 24).unwrap();
        let f = interpolate_analytic(&g, true, |r, z| (-r * r - 0.5 * z).exp()).unwrap();
        let h = hardy_p_check(&f, &Weight::power(3.0), 2.0).unwrap();
        let v = volume_integral_with(&[&f], |p| p.values[0].powi(2) * (1.0 + p.z)).unwrap();
        let b = boundary_power_integral(&f, 2.0).unwrap();
        assert_relative_eq!(h.lhs, v + b, max_relative = 1e-13);
        assert_relative_eq!(h.rhs, weighted_dirichlet_energy(&f, &Weight::power(3.0)).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn trace_l2_on_tapered_bubble() {
        let g = make_grid(3, 20.0, 20.0, 64, 64).unwrap();
        let b = InstantonParams::boundary(1.0);
        let f = interpolate_analytic(&g, true, |r, z| b.eval(3, r, z)).unwrap();
        let t = trace_l2_check(&f, 3.0).unwrap();
        assert!(t.slack > 0.0);
        assert!(matches!(trace_l2_check(&f, 1.0), Err(Error::Admissibility(_))));
    }

    #[test]
    fn chain_weight_link_is_exact_and_critical_link_holds() {
        let g = make_grid(3, 10.0, 10.0, 32, 32).unwrap();
        let s = trace_best_constant(3, OmegaConvention::SphereSurface).unwrap();
        for f in bump_suite(&g, 3, 10).unwrap() {
            for gamma in [0.0, 1.0, 2.0, 3.0] {
                let c = trace_lq_chain_check(&f, gamma, 4.0, s).unwrap();
                assert!(c.weight_link.slack >= 0.0);
                assert!(c.critical_link.slack >= 0.0);
                assert!(c.lq_link.slack >= 0.0);
            }
            let c = trace_lq_chain_check(&f, 3.0, 3.0, s).unwrap();
            assert!(c.lq_link.slack >= 0.0, "{:?}", c.lq_link);
        }
        let f = bump_suite(&g, 3, 1).unwrap().remove(0);
        assert!(matches!(trace_lq_chain_check(&f, 3.0, 4.5, s), Err(Error::Admissibility(_))));
        assert!(matches!(trace_lq_chain_check(&f, 0.5, 3.0, s), Err(Error::Admissibility(_))));
    }

    #[test]
    fn interpolation_constant_endpoints() {
        let s = 1.7;
        assert_relative_eq!(interpolation_constant(3, 3.0, 2.0, s).unwrap(), 1.0);
        assert_relative_eq!(interpolation_constant(3, 0.0, 4.0, s).unwrap(), 1.0 / s);
    }

    #[test]
    fn ladder_values() {
        assert_eq!(moser_ladder(3, 2.0, 3).unwrap(), vec![2.0, 8.0, 26.0]);
        assert_eq!(moser_ladder(4, 2.0, 3).unwrap(), vec![1.0, 3.0, 7.0]);
        let slow = moser_ladder(3, 6.0 - 1e-6, 3).unwrap();
        for (n, k) in slow.iter().enumerate() {
            assert_relative_eq!(*k, (n as f64 + 1.0) * 1e-6 / 6.0, max_relative = 1e-4);
        }
        assert!(matches!(moser_ladder(3, 6.0, 2), Err(Error::Admissibility(_))));
    }

    #[test]
    fn ladder_constant_and_zero_fields() {
        let g = make_grid(3, 1.0, 1.0, 8, 8).unwrap();
        let c = 2.5;
        let one = Field::constant(&g, c);
        let entries = ladder_supnorm_diagnostic(&one, 2.0, 4, true).unwrap();
        for e in &entries {
            assert_relative_eq!(e.norm, c, max_relative = 1e-12);
        }
        let zeros = ladder_supnorm_diagnostic(&Field::zeros(&g), 2.0, 3, false).unwrap();
        assert!(zeros.iter().all(|e| e.norm == 0.0));
    }

    #[test]
    fn ladder_caps_and_converges_to_max() {
        let g = make_grid(3, 8.0, 8.0, 64, 64).unwrap();
        let f = interpolate_analytic(&g, true, |r, z| 2.0 * (-(r - 1.0).powi(2) - (z - 1.0).powi(2)).exp()).unwrap();
        let entries = ladder_supnorm_diagnostic(&f, 2.0, 6, true).unwrap();
        assert!(entries.windows(2).all(|w| w[1].norm >= w[0].norm));
        let last = entries.last().unwrap();
        assert!(last.capped && last.exponent == EXPONENT_CAP);
        assert!((f.max_abs() - last.norm) / f.max_abs() < 0.05, "{last:?}");
        assert!(matches!(ladder_supnorm_strict(&f, 2.0, 6), Err(Error::ExponentCap { .. })));
        assert!(ladder_supnorm_strict(&f, 2.0, 3).is_ok());
    }
}
