//! Rayleigh-quotient minimization for the trace and volume embedding
//! constants, with diagnostics for minimizing sequences that concentrate or
//! flatten instead of converging.
//!
//! The quotient is `∫ρ|∇u|² / (∫|u|^q)^{2/q}`. Descent runs on the constraint
//! sphere `∫|u|^q = 1` along the Riesz representative of the derivative in the
//! `ρ`-weighted energy inner product.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::constants::critical_exponents;
use crate::error::{Error, Result};
use crate::fem::{boundary_power_gradient, volume_power_gradient, Discretization};
use crate::grid::{
    boundary_power_integral, dirichlet_energy_components, interpolate_analytic, volume_power_integral,
    weighted_dirichlet_energy, AxisymGrid, Field,
};
use crate::instanton::InstantonParams;
use crate::linalg;
use crate::suite::suite_member;
use crate::weight::Weight;

/// Maximum number of step halvings within one iteration.
pub const MAX_HALVINGS: usize = 60;

/// Sufficient-decrease factor: a step `s` is accepted when the quotient drops
/// by at least `ARMIJO·s·‖g‖²`.
pub const ARMIJO: f64 = 1e-4;

/// Fraction of cells nearest the origin used by the concentration index.
pub const CONCENTRATION_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// `∫_{x_N=0} |u|^q dx' = 1`.
    BoundaryLq,
    /// `∫ |u|^p dx = 1`.
    VolumeLp,
}

#[derive(Debug, Clone)]
pub struct MinimizeConfig {
    pub constraint: Constraint,
    pub exponent: f64,
    pub weight: Weight,
    /// Initial trial step of every iteration.
    pub step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Number of starts: the tapered bubble plus `multistart - 1` seeded bumps.
    pub multistart: usize,
    /// Replaces the tapered bubble as the first start.
    pub initial: Option<Field>,
}

impl MinimizeConfig {
    pub fn new(constraint: Constraint, exponent: f64, weight: Weight) -> Self {
        MinimizeConfig {
            constraint,
            exponent,
            weight,
            step: 1.0,
            max_iters: 2000,
            grad_tol: 1e-6,
            seed: 0,
            multistart: 1,
            initial: None,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let ex = critical_exponents(dim)?;
        let upper = match self.constraint {
            Constraint::BoundaryLq => ex.two_lower,
            Constraint::VolumeLp => ex.two_star,
        };
        if !(self.exponent >= 2.0 && self.exponent <= upper * (1.0 + 1e-12)) {
            return Err(Error::Admissibility(format!(
                "exponent {} outside [2, {upper}] for {:?}",
                self.exponent, self.constraint
            )));
        }
        if !(self.step > 0.0) || !(self.grad_tol > 0.0) || self.multistart == 0 {
            return Err(Error::Argument("step and grad_tol must be positive and multistart >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub best_value: f64,
    /// Normalized to unit constraint integral.
    pub minimizer: Field,
    pub iterations: usize,
    pub grad_norm_final: f64,
    pub concentration_index: f64,
    pub converged: bool,
    /// Index of the winning start.
    pub start: usize,
    /// Quotient after every accepted iteration, starting with the initial value.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Error)]
pub enum MinimizeError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("minimization did not converge ({reason}) after {iterations} iterations, gradient norm {grad_norm:.3e}")]
    MaxIter { reason: String, iterations: usize, grad_norm: f64, best: Box<MinimizeResult> },
}

impl MinimizeError {
    /// Best-so-far result carried by a non-converged run.
    pub fn best(&self) -> Option<&MinimizeResult> {
        match self {
            MinimizeError::MaxIter { best, .. } => Some(best),
            MinimizeError::Core(_) => None,
        }
    }
}

/// Converts a run outcome into its best available result, converged or not.
pub fn best_effort(outcome: std::result::Result<MinimizeResult, MinimizeError>) -> Result<MinimizeResult> {
    match outcome {
        Ok(r) => Ok(r),
        Err(MinimizeError::MaxIter { best, .. }) => Ok(*best),
        Err(MinimizeError::Core(e)) => Err(e),
    }
}

fn constraint_integral(u: &Field, constraint: Constraint, q: f64) -> Result<f64> {
    match constraint {
        Constraint::BoundaryLq => boundary_power_integral(u, q),
        Constraint::VolumeLp => volume_power_integral(u, q),
    }
}

fn constraint_gradient(u: &Field, constraint: Constraint, q: f64) -> Vec<f64> {
    match constraint {
        Constraint::BoundaryLq => boundary_power_gradient(u, q),
        Constraint::VolumeLp => volume_power_gradient(u, q),
    }
}

/// `∫ρ|∇u|² / (∫|u|^q)^{2/q}` by quadrature.
pub fn rayleigh_quotient(field: &Field, config: &MinimizeConfig) -> Result<f64> {
    let c = constraint_integral(field, config.constraint, config.exponent)?;
    if !(c > 0.0) {
        return Err(Error::Argument("field has zero constraint norm".into()));
    }
    let e = weighted_dirichlet_energy(field, &config.weight)?;
    Ok(e / c.powf(2.0 / config.exponent))
}

/// Fraction of `∫|u|^q` carried by the boundary segments (or volume cells)
/// nearest the origin, 5% of them by count.
pub fn concentration_index(field: &Field, constraint: Constraint, q: f64) -> Result<f64> {
    let g = field.grid();
    let u = field.values();
    let pieces: Vec<(f64, f64)> = match constraint {
        Constraint::BoundaryLq => {
            let mut seg = vec![0.0; g.nr()];
            g.for_boundary_points(|_, w, left, right, x| {
                let v = (1.0 - x) * u[left] + x * u[right];
                seg[left] += w * v.abs().powf(q);
            });
            seg.into_iter().enumerate().map(|(i, m)| (g.r(i) + 0.5 * g.hr(), m)).collect()
        }
        Constraint::VolumeLp => {
            let mut cells = Vec::with_capacity(g.nr() * g.nz());
            for j in 0..g.nz() {
                for i in 0..g.nr() {
                    let mut m = 0.0;
                    g.for_cell_points(i, j, |qp| m += qp.w * qp.value(u).abs().powf(q));
                    let (rc, zc) = (g.r(i) + 0.5 * g.hr(), g.z(j) + 0.5 * g.hz());
                    cells.push((rc.hypot(zc), m));
                }
            }
            cells
        }
    };
    let total: f64 = pieces.iter().map(|p| p.1).sum();
    if !(total > 0.0) {
        return Err(Error::Argument("field has zero constraint norm".into()));
    }
    let mut sorted = pieces;
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = ((CONCENTRATION_FRACTION * sorted.len() as f64).ceil() as usize).max(1);
    Ok(sorted[..m].iter().map(|p| p.1).sum::<f64>() / total)
}

/// The start fields: the tapered boundary bubble (or `config.initial`), then
/// seeded suite bumps.
pub fn initial_fields(grid: &Arc<AxisymGrid>, config: &MinimizeConfig) -> Result<Vec<Field>> {
    let mut out = Vec::with_capacity(config.multistart);
    match &config.initial {
        Some(f) => {
            if !f.grid().same_as(grid) {
                return Err(Error::Argument("initial field lives on a different grid".into()));
            }
            let mut f = f.clone();
            f.enforce_truncation();
            out.push(f);
        }
        None => {
            let b = InstantonParams::boundary(1.0);
            let dim = grid.dim();
            out.push(interpolate_analytic(grid, true, |r, z| b.eval(dim, r, z))?);
        }
    }
    for k in 1..config.multistart {
        out.push(suite_member(grid, config.seed, k as u64)?);
    }
    Ok(out)
}

struct Run {
    result: MinimizeResult,
    reason: Option<String>,
}

fn descend(disc: &Discretization, config: &MinimizeConfig, start: usize, init: Field) -> Result<Run> {
    let (cons, q) = (config.constraint, config.exponent);
    let c0 = constraint_integral(&init, cons, q)?;
    if !(c0 > 0.0) {
        return Err(Error::Argument(format!("start {start} has zero constraint norm")));
    }
    let mut u = init.scaled(c0.powf(-1.0 / q));
    let mut e = disc.energy(u.values());
    let mut history = vec![e];
    let mut grad_norm = f64::INFINITY;
    let mut reason = Some(format!("iteration limit {}", config.max_iters));
    let mut iterations = 0;
    for it in 0..=config.max_iters {
        // At unit constraint: Q'(u) = 2Ku - 2E G(u), Riesz g = 2(u - E K⁻¹G).
        let w = disc.riesz(&constraint_gradient(&u, cons, q))?;
        let mut g: Vec<f64> = u.values().iter().zip(&w).map(|(a, b)| 2.0 * (a - e * b)).collect();
        disc.restrict_free(&mut g);
        grad_norm = disc.energy(&g).max(0.0).sqrt();
        if !grad_norm.is_finite() {
            return Err(Error::Numerics("quotient gradient".into()));
        }
        if grad_norm < config.grad_tol {
            reason = None;
            break;
        }
        if it == config.max_iters {
            break;
        }
        let mut step = config.step;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial_vals: Vec<f64> = u.values().iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let trial = Field::from_values(u.grid(), trial_vals)?;
            let c = constraint_integral(&trial, cons, q)?;
            if c > 0.0 {
                let qt = disc.energy(trial.values()) / c.powf(2.0 / q);
                if qt <= e - ARMIJO * step * grad_norm * grad_norm && qt < e {
                    u = trial.scaled(c.powf(-1.0 / q));
                    e = qt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            reason = Some("no decrease after the maximal number of step halvings".into());
            break;
        }
        iterations = it + 1;
        history.push(e);
    }
    let concentration = concentration_index(&u, cons, q)?;
    Ok(Run {
        result: MinimizeResult {
            best_value: e,
            minimizer: u,
            iterations,
            grad_norm_final: grad_norm,
            concentration_index: concentration,
            converged: reason.is_none(),
            start,
            history,
        },
        reason,
    })
}

fn outcome(run: Run) -> std::result::Result<MinimizeResult, MinimizeError> {
    match run.reason {
        None => Ok(run.result),
        Some(reason) => Err(MinimizeError::MaxIter {
            reason,
            iterations: run.result.iterations,
            grad_norm: run.result.grad_norm_final,
            best: Box::new(run.result),
        }),
    }
}

/// Every start of [`minimize_with`] separately, in start order.
pub fn minimize_starts(
    disc: &Discretization,
    config: &MinimizeConfig,
) -> Result<Vec<std::result::Result<MinimizeResult, MinimizeError>>> {
    let grid = disc.grid();
    config.validate(grid.dim())?;
    let starts = initial_fields(grid, config)?;
    let runs: Vec<Result<Run>> = starts.into_par_iter().enumerate().map(|(k, f)| descend(disc, config, k, f)).collect();
    Ok(runs.into_iter().map(|r| r.map_err(MinimizeError::from).and_then(outcome)).collect())
}

/// [`minimize`] on a prebuilt discretization (its weight overrides `config.weight`).
pub fn minimize_with(disc: &Discretization, config: &MinimizeConfig) -> std::result::Result<MinimizeResult, MinimizeError> {
    let grid = disc.grid();
    config.validate(grid.dim())?;
    let starts = initial_fields(grid, config)?;
    let runs: Vec<Result<Run>> = starts.into_par_iter().enumerate().map(|(k, f)| descend(disc, config, k, f)).collect();
    let runs: Vec<Run> = runs.into_iter().collect::<Result<_>>()?;
    let winner = runs
        .into_iter()
        .min_by(|a, b| {
            a.result
                .best_value
                .total_cmp(&b.result.best_value)
                .then(a.result.grad_norm_final.total_cmp(&b.result.grad_norm_final))
                .then(a.result.start.cmp(&b.result.start))
        })
        .expect("at least one start");
    outcome(winner)
}

/// Projected steepest descent of the Rayleigh quotient from every start;
/// returns the lowest value (ties: lowest gradient norm, then start index).
pub fn minimize(grid: &Arc<AxisymGrid>, config: &MinimizeConfig) -> std::result::Result<MinimizeResult, MinimizeError> {
    let disc = Discretization::new(grid, &config.weight);
    minimize_with(&disc, config)
}

/// One row of [`rescale_diagnostic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescalePoint {
    pub delta: f64,
    /// `∫ρ|∇u_δ|² / ∫_{x_N=0} u_δ²`.
    pub quotient: f64,
    /// Share of the energy carried by `∂_r u_δ`.
    pub radial_share: f64,
}

/// Resamples `u_δ(r, z) = u(δr, z)` (zero outside the grid, zero on the
/// truncation edges) and evaluates the `q = 2` trace quotient.
pub fn rescale_diagnostic(field: &Field, weight: &Weight, deltas: &[f64]) -> Result<Vec<RescalePoint>> {
    let grid = field.grid();
    deltas
        .iter()
        .map(|&delta| {
            if !(delta > 0.0) || !delta.is_finite() {
                return Err(Error::Argument(format!("rescale factor must be positive, got {delta}")));
            }
            let mut ud = if delta == 1.0 { field.clone() } else { Field::from_fn(grid, |r, z| field.sample(delta * r, z)) };
            ud.enforce_truncation();
            let parts = dirichlet_energy_components(&ud, weight)?;
            let trace = boundary_power_integral(&ud, 2.0)?;
            if !(trace > 0.0) {
                return Err(Error::Argument("rescaled field has zero trace".into()));
            }
            Ok(RescalePoint { delta, quotient: parts.total() / trace, radial_share: parts.radial / parts.total() })
        })
        .collect()
}

/// Result of fitting a field against the boundary-bubble family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleFit {
    pub best_fit_eps: f64,
    /// `‖u − c b_ε‖ / ‖u‖` in the unweighted Dirichlet seminorm.
    pub fit_error: f64,
    /// Optimal multiplier `c`.
    pub amplitude: f64,
}

/// Geometric `ε` family from an eighth of a cell to a quarter of the box.
pub fn default_eps_family(grid: &AxisymGrid) -> Vec<f64> {
    let lo = 0.125 * grid.hr().min(grid.hz());
    let hi = 0.25 * grid.r_max().min(grid.z_max());
    let n = 48;
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

/// Least-squares fit of `field` against tapered boundary bubbles `c·b_ε`.
///
/// The best `ε` of the supplied family is refined by golden-section search in
/// `ln ε` between its neighbours. The fit uses the Dirichlet seminorm, in which
/// both the bubbles and any finite-energy field have finite size on the
/// unbounded domain.
pub fn concentration_diagnostic(field: &Field, family: &[f64]) -> Result<BubbleFit> {
    if family.is_empty() || family.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Argument("bubble family must be a non-empty list of positive scales".into()));
    }
    let grid = field.grid();
    let disc = Discretization::new(grid, &Weight::unit());
    let uu = disc.energy(field.values());
    if !(uu > 0.0) {
        return Err(Error::Argument("cannot fit a field with zero energy".into()));
    }
    let ku = disc.apply(field.values());
    let dim = grid.dim();
    // Squared cosine between u and b_ε, and the optimal multiplier.
    let score = |eps: f64| -> Result<(f64, f64)> {
        let b = InstantonParams::boundary(eps);
        let bf = interpolate_analytic(grid, true, |r, z| b.eval(dim, r, z))?;
        let ub = linalg::dot(&ku, bf.values());
        let bb = disc.energy(bf.values());
        Ok((ub * ub / (uu * bb), ub / bb))
    };
    let mut fam: Vec<f64> = family.to_vec();
    fam.sort_by(f64::total_cmp);
    let scores: Vec<f64> = fam.iter().map(|&e| score(e).map(|s| s.0)).collect::<Result<_>>()?;
    let k = (0..fam.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a))).unwrap_or(0);
    let mut best = (fam[k], scores[k]);
    if k > 0 && k + 1 < fam.len() {
        let (mut a, mut b) = (fam[k - 1].ln(), fam[k + 1].ln());
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let mut f1 = score(x1.exp())?.0;
        let mut f2 = score(x2.exp())?.0;
        for _ in 0..40 {
            if f1 >= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = score(x1.exp())?.0;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = score(x2.exp())?.0;
            }
        }
        let (x, f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if f > best.1 {
            best = (x.exp(), f);
        }
    }
    let (cos2, amplitude) = score(best.0)?;
    Ok(BubbleFit { best_fit_eps: best.0, fit_error: (1.0 - cos2).max(0.0).sqrt(), amplitude })
}
