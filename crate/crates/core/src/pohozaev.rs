//! Weighted Pohozaev identity
//! `(N-2)/2 ∫ρ|∇u|² + ½∫ρ'(x_N) x_N |∇u|² = N∫F(u) + (N-1)∫_{x_N=0} G(u)`
//! with `F(t) = a|t|^p/p`, `G(t) = b|t|^q/q`, and the relation obtained by
//! subtracting `(N-2)/2` times the weak form tested with `u`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::constants::critical_exponents;
use crate::error::{ensure_finite, Error, Result};
use crate::grid::{boundary_power_integral, volume_integral_with, volume_power_integral, Field};
use crate::solver::ProblemParams;
use crate::weight::Weight;

/// Share of an integral the outer band may carry before the tail warning fires.
pub const TAIL_LIMIT: f64 = 0.01;
/// Relative width of the outer band in `r` and in `x_N`.
pub const TAIL_BAND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    /// `(N-2)/2 ∫ρ|∇u|²`.
    pub lhs_main: f64,
    /// `½∫ρ'(x_N) x_N |∇u|²`.
    pub lhs_weight: f64,
    /// `N∫F(u)`.
    pub rhs_volume: f64,
    /// `(N-1)∫_{x_N=0} G(u)`.
    pub rhs_boundary: f64,
    pub residual: f64,
    pub relative_residual: f64,
    /// `½∫ρ' x_N |∇u|²`.
    pub relation_lhs: f64,
    /// `A·a∫|u|^p + B·b∫_{x_N=0}|u|^q` with the criticality coefficients.
    pub relation_rhs: f64,
    /// Largest share of `ρ|∇u|²`, `|u|^p` or `|u|^q` carried by the outer band.
    pub tail_share: f64,
    pub tail_warning: bool,
    /// Discrete `H²` seminorm from nodal second differences (recorded, not gated).
    pub h2_seminorm: f64,
}

impl PohozaevReport {
    /// Recomputes `(lhs_main + lhs_weight) − (rhs_volume + rhs_boundary)`.
    pub fn recomputed_residual(&self) -> f64 {
        (self.lhs_main + self.lhs_weight) - (self.rhs_volume + self.rhs_boundary)
    }
}

/// `A = N/p − (N−2)/2` and `B = (N−1)/q − (N−2)/2`.
pub fn criticality_coefficients(dim: usize, p: f64, q: f64) -> Result<(f64, f64)> {
    if dim < 3 {
        return Err(Error::Dimension(dim));
    }
    if !(p > 1.0) || !(q > 1.0) {
        return Err(Error::Argument(format!("exponents must exceed 1 (p = {p}, q = {q})")));
    }
    let n = dim as f64;
    Ok((n / p - (n - 2.0) / 2.0, (n - 1.0) / q - (n - 2.0) / 2.0))
}

/// [`criticality_coefficients`] in exact rational arithmetic.
pub fn criticality_coefficients_exact(dim: usize, p: Ratio<i64>, q: Ratio<i64>) -> Result<(Ratio<i64>, Ratio<i64>)> {
    if dim < 3 {
        return Err(Error::Dimension(dim));
    }
    let one = Ratio::from_integer(1);
    if p <= one || q <= one {
        return Err(Error::Argument(format!("exponents must exceed 1 (p = {p}, q = {q})")));
    }
    let n = Ratio::from_integer(dim as i64);
    let half = Ratio::new(1, 2);
    let m = (n - 2) * half;
    Ok((n / p - m, (n - 1) / q - m))
}

fn check_weight(weight: &Weight, field: &Field, allow_unit: bool) -> Result<()> {
    if allow_unit && weight.is_power() && weight.gamma == 0.0 {
        return Ok(());
    }
    let g = field.grid();
    let samples: Vec<f64> = (1..=g.nz()).map(|j| g.z(j)).collect();
    if !weight.check_rho1(&samples)?.holds {
        return Err(Error::Admissibility("weight violates (ρ_1): ρ'(s)s must be positive and O(ρ)".into()));
    }
    Ok(())
}

struct Integrals {
    energy: f64,
    weight_term: f64,
    volume: f64,
    boundary: f64,
    tail_share: f64,
}

fn integrals(field: &Field, params: &ProblemParams, weight: &Weight) -> Result<Integrals> {
    let g = field.grid();
    let (rb, zb) = ((1.0 - TAIL_BAND) * g.r_max(), (1.0 - TAIL_BAND) * g.z_max());
    let in_band = |r: f64, z: f64| r > rb || z > zb;
    let energy = volume_integral_with(&[field], |d| weight.value(d.z) * (d.grad_r[0].powi(2) + d.grad_z[0].powi(2)))?;
    let energy_tail = volume_integral_with(&[field], |d| {
        if in_band(d.r, d.z) {
            weight.value(d.z) * (d.grad_r[0].powi(2) + d.grad_z[0].powi(2))
        } else {
            0.0
        }
    })?;
    let weight_term =
        volume_integral_with(&[field], |d| weight.derivative(d.z) * d.z * (d.grad_r[0].powi(2) + d.grad_z[0].powi(2)))?;
    let mut tail_share = if energy > 0.0 { energy_tail / energy } else { 0.0 };
    let volume = if params.a != 0.0 {
        let total = volume_power_integral(field, params.p)?;
        let tail =
            volume_integral_with(&[field], |d| if in_band(d.r, d.z) { d.values[0].abs().powf(params.p) } else { 0.0 })?;
        if total > 0.0 {
            tail_share = tail_share.max(tail / total);
        }
        total
    } else {
        0.0
    };
    let boundary = if params.b != 0.0 {
        let total = boundary_power_integral(field, params.q)?;
        let tail = crate::grid::boundary_integral_with(&[field], |r, v| if r > rb { v[0].abs().powf(params.q) } else { 0.0 })?;
        if total > 0.0 {
            tail_share = tail_share.max(tail / total);
        }
        total
    } else {
        0.0
    };
    Ok(Integrals { energy, weight_term, volume, boundary, tail_share })
}

/// `(∑ (u_rr² + 2u_rz² + u_zz²) · nodal volume)^{1/2}` over interior nodes.
pub fn discrete_h2_seminorm(field: &Field) -> f64 {
    let g = field.grid();
    let (hr, hz) = (g.hr(), g.hz());
    let mut acc = 0.0;
    for j in 1..g.nz() {
        for i in 1..g.nr() {
            let u = |di: isize, dj: isize| field.at((i as isize + di) as usize, (j as isize + dj) as usize);
            let urr = (u(1, 0) - 2.0 * u(0, 0) + u(-1, 0)) / (hr * hr);
            let uzz = (u(0, 1) - 2.0 * u(0, 0) + u(0, -1)) / (hz * hz);
            let urz = (u(1, 1) - u(1, -1) - u(-1, 1) + u(-1, -1)) / (4.0 * hr * hz);
            acc += (urr * urr + 2.0 * urz * urz + uzz * uzz) * g.nodal_volume_weight(i, j);
        }
    }
    acc.sqrt()
}

/// All terms of the identity by quadrature. `ρ ≡ 1` is accepted as the
/// classical case with `lhs_weight = 0`.
pub fn pohozaev_eval(field: &Field, params: &ProblemParams, weight: &Weight) -> Result<PohozaevReport> {
    check_weight(weight, field, true)?;
    let dim = field.grid().dim();
    let n = dim as f64;
    let (ca, cb) = criticality_coefficients(dim, params.p, params.q)?;
    let it = integrals(field, params, weight)?;
    let lhs_main = (n - 2.0) / 2.0 * it.energy;
    let lhs_weight = 0.5 * it.weight_term;
    let rhs_volume = n * params.a / params.p * it.volume;
    let rhs_boundary = (n - 1.0) * params.b / params.q * it.boundary;
    let residual = (lhs_main + lhs_weight) - (rhs_volume + rhs_boundary);
    let scale = lhs_main.abs().max(rhs_volume.abs()).max(rhs_boundary.abs()).max(f64::MIN_POSITIVE);
    ensure_finite(residual, "Pohozaev residual")?;
    Ok(PohozaevReport {
        lhs_main,
        lhs_weight,
        rhs_volume,
        rhs_boundary,
        residual,
        relative_residual: residual.abs() / scale,
        relation_lhs: lhs_weight,
        relation_rhs: ca * params.a * it.volume + cb * params.b * it.boundary,
        tail_share: it.tail_share,
        tail_warning: it.tail_share >= TAIL_LIMIT,
        h2_seminorm: discrete_h2_seminorm(field),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceProbe {
    /// `|½∫ρ'x_N|∇u|² − A·a∫|u|^p − B·b∫_{x_N=0}|u|^q|`.
    pub relation_residual: f64,
    /// `½∫ρ'x_N|∇u|²`, strictly positive for nonzero fields under `(ρ_1)`.
    pub obstruction_value: f64,
    pub coefficient_a: f64,
    pub coefficient_b: f64,
    /// Both active nonlinearities are critical (`A = B = 0` where active).
    pub critical: bool,
}

/// The derived relation for a candidate solution. In the doubly critical case
/// its right side vanishes, so any positive `obstruction_value` is the size of
/// the contradiction.
pub fn nonexistence_probe(field: &Field, params: &ProblemParams, weight: &Weight) -> Result<NonexistenceProbe> {
    check_weight(weight, field, false)?;
    let dim = field.grid().dim();
    let (ca, cb) = criticality_coefficients(dim, params.p, params.q)?;
    let ex = critical_exponents(dim)?;
    let it = integrals(field, params, weight)?;
    let obstruction = 0.5 * it.weight_term;
    let rhs = ca * params.a * it.volume + cb * params.b * it.boundary;
    let critical = (params.a == 0.0 || params.p == ex.two_star) && (params.b == 0.0 || params.q == ex.two_lower);
    Ok(NonexistenceProbe {
        relation_residual: (obstruction - rhs).abs(),
        obstruction_value: obstruction,
        coefficient_a: ca,
        coefficient_b: cb,
        critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn coefficients_vanish_at_critical_exponents() {
        for n in 3..=10usize {
            let (ps, ql) = crate::constants::critical_exponents_exact(n).unwrap();
            let (a, b) = criticality_coefficients_exact(n, ps, ql).unwrap();
            assert_eq!(a, Ratio::from_integer(0));
            assert_eq!(b, Ratio::from_integer(0));
        }
        let (a, _) = criticality_coefficients(3, 6.0, 3.0).unwrap();
        assert_eq!(a, 0.0);
        let (_, b) = criticality_coefficients(3, 3.0, 4.0).unwrap();
        assert_eq!(b, 0.0);
        let (a, _) = criticality_coefficients(4, 2.0, 3.0).unwrap();
        assert_eq!(a, 1.0);
    }

    #[test]
    fn zero_field_gives_zero_report() {
        let g = make_grid(3, 5.0, 5.0, 16, 16).unwrap();
        let params = ProblemParams::new(1.0, 1.0, 4.0, 3.0);
        let z = Field::zeros(&g);
        let r = pohozaev_eval(&z, &params, &Weight::power(2.0)).unwrap();
        assert_eq!([r.lhs_main, r.lhs_weight, r.rhs_volume, r.rhs_boundary, r.residual], [0.0; 5]);
        let pr = nonexistence_probe(&z, &params, &Weight::power(2.0)).unwrap();
        assert_eq!((pr.relation_residual, pr.obstruction_value), (0.0, 0.0));
    }

    #[test]
    fn unit_weight_is_rejected_by_the_probe_only() {
        let g = make_grid(3, 5.0, 5.0, 16, 16).unwrap();
        let u = crate::suite::suite_member(&g, 1, 0).unwrap();
        let params = ProblemParams::new(1.0, 1.0, 6.0, 4.0);
        let r = pohozaev_eval(&u, &params, &Weight::unit()).unwrap();
        assert_eq!(r.lhs_weight, 0.0);
        assert_eq!(r.residual, r.recomputed_residual());
        assert!(matches!(nonexistence_probe(&u, &params, &Weight::unit()), Err(Error::Admissibility(_))));
    }
}
