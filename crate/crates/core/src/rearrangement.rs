//! Discrete Schwarz symmetrization in `x'`, slice by slice in `x_N`.
//!
//! Each `z`-row is treated as a measure space of nodes with the radial hat
//! moments `W_i = σ ∫ φ_i r^{N-2} dr`. Sorting `(value, W)` pairs by
//! decreasing value gives a quantile step function `Q` on `[0, Σ W)`; the
//! rearranged value at node `i` is the mean of `Q` over the node's own slot
//! `[A_i, A_i + W_i)`, slots laid out by increasing `r`. The map preserves
//! `Σ W u` exactly, is idempotent, and contracts every `ℓ^s(W)` distance.
//! The truncation column `r = R` is held fixed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{weighted_dirichlet_energy, AxisymGrid, Field};
use crate::inequalities::InequalityReport;
use crate::weight::Weight;

#[derive(Debug, Clone, PartialEq)]
pub struct RearrangedField {
    pub field: Field,
    /// Per `z`-row: values nonincreasing in `r`.
    pub monotone: Vec<bool>,
    /// The input had negative values and `|u|` was rearranged.
    pub used_abs: bool,
}

/// Schwarz rearrangement of `|field|` in `r` on every `z`-row.
pub fn schwarz_rearrange(field: &Field) -> Result<RearrangedField> {
    if !field.all_finite() {
        return Err(Error::Numerics("cannot rearrange a non-finite field".into()));
    }
    let g = Arc::clone(field.grid());
    let used_abs = field.values().iter().any(|v| *v < 0.0);
    let w = g.nr() + 1;
    let weights = &g.radial_weights()[..g.nr()];
    let mut values = field.values().to_vec();
    values.par_chunks_mut(w).for_each(|row| {
        let (free, _) = row.split_at_mut(g.nr());
        free.iter_mut().for_each(|v| *v = v.abs());
        let out = rearrange_row(free, weights);
        free.copy_from_slice(&out);
    });
    if used_abs {
        let last = g.nr();
        for j in 0..=g.nz() {
            values[j * w + last] = values[j * w + last].abs();
        }
    }
    let monotone = values.chunks(w).map(|row| row.windows(2).all(|p| p[1] <= p[0])).collect();
    Ok(RearrangedField { field: Field::from_values(&g, values)?, monotone, used_abs })
}

/// Averaged-quantile rearrangement of one row of nonnegative values.
fn rearrange_row(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| values[*b].total_cmp(&values[*a]));
    let mut out = vec![0.0; n];
    // Walk the source slots (sorted) and target slots (by index) together.
    let mut src = 0usize;
    let mut src_end = weights[order[0]];
    let mut tgt_start = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        let tgt_end = tgt_start + weights[i];
        let mut pos = tgt_start;
        let mut acc = 0.0;
        // Pieces arrive in decreasing value: the first is the max, the last the min.
        let mut hi = f64::NAN;
        let mut lo = f64::NAN;
        while pos < tgt_end && src < n {
            let upper = src_end.min(tgt_end);
            let v = values[order[src]];
            if upper > pos {
                acc += (upper - pos) * v;
                if hi.is_nan() {
                    hi = v;
                }
                lo = v;
            }
            pos = upper;
            if src_end <= tgt_end {
                src += 1;
                if src < n {
                    src_end += weights[order[src]];
                }
            } else {
                break;
            }
        }
        // Clamping to the piece range keeps rows exactly monotone under rounding.
        *o = if hi.is_nan() {
            0.0
        } else if hi == lo {
            hi
        } else {
            (acc / weights[i]).clamp(lo, hi)
        };
        tgt_start = tgt_end;
    }
    out
}

/// `Σ_j V_j Σ_i W_i |u_ij|^s`: the lumped volume measure the rearrangement preserves.
pub fn lumped_power_sum(field: &Field, s: f64) -> f64 {
    let g = field.grid();
    let mut total = 0.0;
    for j in 0..=g.nz() {
        total += g.vertical_weights()[j] * slice_power_sum(field, j, s);
    }
    total
}

/// `Σ_i W_i |u_ij|^s` on row `j`.
pub fn slice_power_sum(field: &Field, j: usize, s: f64) -> f64 {
    let g = field.grid();
    (0..=g.nr()).map(|i| g.radial_weights()[i] * field.at(i, j).abs().powf(s)).sum()
}

/// Relative cell-granularity tolerance `2 h_r / R`.
pub fn tol_meas(grid: &AxisymGrid) -> f64 {
    2.0 * grid.hr() / grid.r_max()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquimeasurabilityReport {
    /// `lhs = ‖u*‖_s`, `rhs = ‖u‖_s` in the lumped volume measure.
    pub volume: InequalityReport,
    /// Largest per-row relative difference of the `L^s` norms.
    pub max_slice_relative_error: f64,
    /// `2 h_r / R`.
    pub tolerance: f64,
    pub within_tolerance: bool,
}

pub fn equimeasurability_check(field: &Field, rearranged: &Field, s: f64) -> Result<EquimeasurabilityReport> {
    if !(s >= 1.0) {
        return Err(Error::Argument(format!("exponent s = {s} must be >= 1")));
    }
    field.check_same_grid(rearranged)?;
    let g = field.grid();
    let mut worst = 0.0f64;
    for j in 0..=g.nz() {
        let a = slice_power_sum(field, j, s).powf(1.0 / s);
        let b = slice_power_sum(rearranged, j, s).powf(1.0 / s);
        if a > 0.0 || b > 0.0 {
            worst = worst.max((a - b).abs() / a.max(b));
        }
    }
    let lhs = lumped_power_sum(rearranged, s).powf(1.0 / s);
    let rhs = lumped_power_sum(field, s).powf(1.0 / s);
    let tolerance = tol_meas(g);
    let volume_rel = if rhs > 0.0 { (lhs - rhs).abs() / rhs } else { lhs };
    Ok(EquimeasurabilityReport {
        volume: InequalityReport::new(lhs, rhs, tolerance, &["equimeasurability"]),
        max_slice_relative_error: worst,
        tolerance,
        within_tolerance: worst <= tolerance && volume_rel <= tolerance,
    })
}

/// `‖u* − v*‖_s^s ≤ ‖u − v‖_s^s` in the lumped volume measure.
pub fn contraction_check(u: &Field, v: &Field, s: f64) -> Result<InequalityReport> {
    u.check_same_grid(v)?;
    if !(s >= 1.0) {
        return Err(Error::Argument(format!("exponent s = {s} must be >= 1")));
    }
    let us = schwarz_rearrange(u)?.field;
    let vs = schwarz_rearrange(v)?.field;
    let lhs = lumped_power_sum(&us.sub(&vs), s);
    let rhs = lumped_power_sum(&u.sub(v), s);
    Ok(InequalityReport::new(lhs, rhs, tol_meas(u.grid()), &["contraction"]))
}

/// Discrete Pólya–Szegő tolerance `c_P (h_r / R)` relative to the energy.
pub const POLYA_CONSTANT: f64 = 1.0;

pub fn tol_polya(grid: &AxisymGrid) -> f64 {
    POLYA_CONSTANT * grid.hr() / grid.r_max()
}

/// `lhs = ∫ρ|∇u*|²`, `rhs = ∫ρ|∇u|²`.
pub fn energy_comparison(field: &Field, weight: &Weight) -> Result<InequalityReport> {
    let rearranged = schwarz_rearrange(field)?.field;
    let lhs = weighted_dirichlet_energy(&rearranged, weight)?;
    let rhs = weighted_dirichlet_energy(field, weight)?;
    Ok(InequalityReport::new(lhs, rhs, tol_polya(field.grid()), &["polya-szego"]))
}

/// `max_{r ≥ R/4} |u*(r, z)| r^{(N-1)/2} / ‖u*‖` over the nodes.
pub fn radial_decay_check(rearranged: &Field, weight: &Weight) -> Result<f64> {
    if weight.gamma < 2.0 {
        return Err(Error::Admissibility(format!("radial decay bound needs γ >= 2, got {}", weight.gamma)));
    }
    let norm = weighted_dirichlet_energy(rearranged, weight)?.sqrt();
    if !(norm > 0.0) {
        return Err(Error::Argument("radial decay ratio of a zero-energy field".into()));
    }
    let g = rearranged.grid();
    let expo = 0.5 * (g.dim() as f64 - 1.0);
    let mut sup = 0.0f64;
    for j in 0..=g.nz() {
        for i in 0..=g.nr() {
            let r = g.r(i);
            if r >= 0.25 * g.r_max() {
                sup = sup.max(rearranged.at(i, j).abs() * r.powf(expo));
            }
        }
    }
    Ok(sup / norm)
}
