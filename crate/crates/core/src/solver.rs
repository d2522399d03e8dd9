//! The energy functional
//! `I(u) = ½∫ρ|∇u|² − (b/q)∫_{x_N=0}|u|^q − (a/p)∫|u|^p`,
//! its gradient, and a mountain-pass solver for its nonnegative critical points.
//!
//! The solver follows straight paths `t ↦ t·w` from 0. Along such a path `I` is
//! an explicit function of three integrals of `w`, so its maximum is computed
//! exactly; the path maximum is then lowered by projected gradient steps.

use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::constants::{critical_exponents, half_space_sobolev_constant, trace_best_constant, OmegaConvention};
use crate::error::{Error, Result};
use crate::fem::{boundary_power_gradient, volume_power_gradient, Discretization};
use crate::grid::{boundary_power_integral, interpolate_analytic, volume_power_integral, AxisymGrid, Field};
use crate::inequalities::interpolation_constant;
use crate::minimizers::{concentration_diagnostic, concentration_index, default_eps_family, BubbleFit, Constraint};
use crate::suite::bump_suite;
use crate::weight::Weight;

/// Sufficient-decrease factor of the path-maximum descent.
pub const ARMIJO: f64 = 1e-4;
/// Maximum number of step halvings per iteration.
pub const MAX_HALVINGS: usize = 60;
/// Number of fields in the default weak-form test suite.
pub const TEST_SUITE_SIZE: usize = 30;

/// Coefficients and exponents of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
}

impl ProblemParams {
    pub fn new(a: f64, b: f64, p: f64, q: f64) -> Self {
        ProblemParams { a, b, p, q }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("p", self.p), ("q", self.q)] {
            if !v.is_finite() {
                return Err(Error::Argument(format!("{name} = {v} is not finite")));
            }
        }
        if !(self.p > 1.0) || !(self.q > 1.0) {
            return Err(Error::Admissibility(format!("exponents must exceed 1 (p = {}, q = {})", self.p, self.q)));
        }
        Ok(())
    }
}

/// Existence regime of a parameter set, or the critical case the solver only reports on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `a ≤ 0 < b`, `max{2, p} < q < 2_*`, `γ > 1`.
    BoundaryDriven,
    /// `a, b > 0`, `p ∈ (2, 2*)`, `q ∈ (2, 2_*)`, `γ > 2`.
    Mixed,
    /// `p = 2`, `0 < a < (γ-1)²/4`, `b > 0`, `q ∈ (2, 2_*)`, `γ > 2`.
    MixedLinearVolume,
    /// `q = 2`, `0 < b < (γ-1)/2`, `a > 0`, `p ∈ (2, 2*)`, `γ > 2`.
    MixedLinearBoundary,
    /// `b ≤ 0 < a`, `max{2, q} < p < 2*`, `γ > 2`.
    VolumeDriven,
    /// An active nonlinearity sits at its critical exponent.
    Critical,
}

/// Classifies `(params, γ)`; parameter sets outside every regime are inadmissible.
pub fn classify_regime(params: &ProblemParams, gamma: f64, dim: usize) -> Result<Regime> {
    params.validate()?;
    let ex = critical_exponents(dim)?;
    let (a, b, p, q) = (params.a, params.b, params.p, params.q);
    let vol_active = a != 0.0;
    let bd_active = b != 0.0;
    let tol = 1e-12;
    if (vol_active && p > ex.two_star * (1.0 + tol)) || (bd_active && q > ex.two_lower * (1.0 + tol)) {
        return Err(Error::Admissibility(format!("supercritical exponents p = {p}, q = {q}")));
    }
    let crit_p = (p - ex.two_star).abs() <= tol * ex.two_star;
    let crit_q = (q - ex.two_lower).abs() <= tol * ex.two_lower;
    if (a > 0.0 && crit_p) || (b > 0.0 && crit_q) {
        return Ok(Regime::Critical);
    }
    let open = |x: f64, lo: f64, hi: f64| x > lo && x < hi;
    let regime = if a <= 0.0 && b > 0.0 {
        let floor = if vol_active { p.max(2.0) } else { 2.0 };
        (gamma > 1.0 && open(q, floor, ex.two_lower)).then_some(Regime::BoundaryDriven)
    } else if a > 0.0 && b > 0.0 && gamma > 2.0 {
        if open(p, 2.0, ex.two_star) && open(q, 2.0, ex.two_lower) {
            Some(Regime::Mixed)
        } else if p == 2.0 && open(q, 2.0, ex.two_lower) && a < (gamma - 1.0).powi(2) / 4.0 {
            Some(Regime::MixedLinearVolume)
        } else if q == 2.0 && open(p, 2.0, ex.two_star) && b < (gamma - 1.0) / 2.0 {
            Some(Regime::MixedLinearBoundary)
        } else {
            None
        }
    } else if a > 0.0 && b <= 0.0 && gamma > 2.0 {
        let floor = if bd_active { q.max(2.0) } else { 2.0 };
        open(p, floor, ex.two_star).then_some(Regime::VolumeDriven)
    } else {
        None
    };
    regime.ok_or_else(|| {
        Error::Admissibility(format!("(a, b, p, q, γ) = ({a}, {b}, {p}, {q}, {gamma}) lies outside the existence regimes"))
    })
}

/// A named parameter set with its power weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: &'static str,
    pub params: ProblemParams,
    pub gamma: f64,
}

impl Preset {
    pub fn weight(&self) -> Weight {
        Weight::power(self.gamma)
    }
}

pub const PRESETS: [Preset; 5] = [
    Preset { name: "thm16", params: ProblemParams { a: 0.0, b: 1.0, p: 2.0, q: 3.0 }, gamma: 3.0 },
    Preset { name: "thm17", params: ProblemParams { a: 1.0, b: 1.0, p: 4.0, q: 3.0 }, gamma: 3.0 },
    Preset { name: "thm17i", params: ProblemParams { a: 0.5, b: 1.0, p: 2.0, q: 3.0 }, gamma: 3.0 },
    Preset { name: "thm17ii", params: ProblemParams { a: 1.0, b: 0.5, p: 4.0, q: 2.0 }, gamma: 3.0 },
    Preset { name: "thm18", params: ProblemParams { a: 1.0, b: -1.0, p: 4.0, q: 2.5 }, gamma: 3.0 },
];

pub fn preset(name: &str) -> Result<Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .copied()
        .ok_or_else(|| Error::Argument(format!("unknown preset `{name}`")))
}

/// The three terms of `I` and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit {
    /// `½‖u‖²`.
    pub dirichlet: f64,
    /// `(b/q)∫_{x_N=0}|u|^q`.
    pub boundary_term: f64,
    /// `(a/p)∫|u|^p`.
    pub volume_term: f64,
    pub total: f64,
}

impl EnergySplit {
    fn new(dirichlet: f64, boundary_term: f64, volume_term: f64) -> Self {
        EnergySplit { dirichlet, boundary_term, volume_term, total: dirichlet - boundary_term - volume_term }
    }
}

/// `I`, `I'` and its Riesz representative on one grid.
#[derive(Debug, Clone)]
pub struct VariationalProblem {
    disc: Discretization,
    params: ProblemParams,
}

/// The three integrals of `w` that determine `t ↦ I(t·w)`.
#[derive(Debug, Clone, Copy)]
struct Fiber {
    energy: f64,
    boundary: f64,
    volume: f64,
}

impl VariationalProblem {
    pub fn new(grid: &Arc<AxisymGrid>, params: ProblemParams, weight: &Weight) -> Result<Self> {
        params.validate()?;
        Ok(VariationalProblem { disc: Discretization::new(grid, weight), params })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }
    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }
    pub fn grid(&self) -> &Arc<AxisymGrid> {
        self.disc.grid()
    }

    fn check(&self, u: &Field) -> Result<()> {
        self.disc.check_field(u)
    }

    fn fiber(&self, w: &Field) -> Result<Fiber> {
        let p = &self.params;
        Ok(Fiber {
            energy: self.disc.energy(w.values()),
            boundary: if p.b != 0.0 { boundary_power_integral(w, p.q)? } else { 0.0 },
            volume: if p.a != 0.0 { volume_power_integral(w, p.p)? } else { 0.0 },
        })
    }

    fn fiber_energy(&self, f: &Fiber, t: f64) -> f64 {
        let p = &self.params;
        0.5 * f.energy * t * t - p.b / p.q * f.boundary * t.powf(p.q) - p.a / p.p * f.volume * t.powf(p.p)
    }

    /// `(d/dt) I(t w) / t`; decreasing in `t` in every regime.
    fn fiber_slope(&self, f: &Fiber, t: f64) -> f64 {
        let p = &self.params;
        f.energy - p.b * f.boundary * t.powf(p.q - 2.0) - p.a * f.volume * t.powf(p.p - 2.0)
    }

    /// The maximizer `t* > 0` of `t ↦ I(t w)`, if the fiber has an interior maximum.
    fn fiber_peak(&self, f: &Fiber) -> Option<f64> {
        let (mut lo, mut hi) = (1.0, 1.0);
        let mut k = 0;
        while self.fiber_slope(f, lo) <= 0.0 {
            lo *= 0.5;
            k += 1;
            if k > 200 {
                return None;
            }
        }
        k = 0;
        while self.fiber_slope(f, hi) > 0.0 {
            hi *= 2.0;
            k += 1;
            if k > 200 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if mid <= lo || mid >= hi {
                break;
            }
            if self.fiber_slope(f, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        (t.is_finite() && t > 0.0).then_some(t)
    }

    pub fn energy(&self, u: &Field) -> Result<EnergySplit> {
        self.check(u)?;
        let f = self.fiber(u)?;
        let p = &self.params;
        let split = EnergySplit::new(0.5 * f.energy, p.b / p.q * f.boundary, p.a / p.p * f.volume);
        if !split.total.is_finite() {
            return Err(Error::Numerics("energy functional".into()));
        }
        Ok(split)
    }

    /// Dual vector `I'(u)[φ_a] = (K u)_a − b∫_{x_N=0}|u|^{q-2}uφ_a − a∫|u|^{p-2}uφ_a`
    /// restricted to the free nodes.
    pub fn residual_vector(&self, u: &Field) -> Result<Vec<f64>> {
        self.check(u)?;
        let p = &self.params;
        let mut r = self.disc.apply(u.values());
        if p.b != 0.0 {
            for (x, g) in r.iter_mut().zip(boundary_power_gradient(u, p.q)) {
                *x -= p.b * g;
            }
        }
        if p.a != 0.0 {
            for (x, g) in r.iter_mut().zip(volume_power_gradient(u, p.p)) {
                *x -= p.a * g;
            }
        }
        self.disc.restrict_free(&mut r);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerics("weak-form residual".into()));
        }
        Ok(r)
    }

    /// Riesz representative `g = K⁻¹ I'(u)` and its norm `‖g‖ = sup I'(u)[φ]/‖φ‖`.
    pub fn gradient(&self, u: &Field) -> Result<(Field, f64)> {
        let g = self.disc.riesz(&self.residual_vector(u)?)?;
        let norm = self.disc.energy(&g).max(0.0).sqrt();
        Ok((Field::from_values(u.grid(), g)?, norm))
    }

    /// `max_φ |I'(u)[φ]| / ‖φ‖` over the supplied test fields.
    pub fn weak_residual(&self, u: &Field, suite: &[Field]) -> Result<f64> {
        let r = self.residual_vector(u)?;
        let mut worst: f64 = 0.0;
        for phi in suite {
            self.check(phi)?;
            let mut v = phi.values().to_vec();
            self.disc.restrict_free(&mut v);
            let norm = self.disc.energy(&v).sqrt();
            if norm > 0.0 {
                worst = worst.max(crate::linalg::dot(&r, &v).abs() / norm);
            }
        }
        Ok(worst)
    }
}

/// [`VariationalProblem::energy`] on a fresh discretization.
pub fn energy(field: &Field, params: &ProblemParams, weight: &Weight) -> Result<EnergySplit> {
    VariationalProblem::new(field.grid(), *params, weight)?.energy(field)
}

/// [`VariationalProblem::gradient`] on a fresh discretization.
pub fn energy_gradient(field: &Field, params: &ProblemParams, weight: &Weight) -> Result<(Field, f64)> {
    VariationalProblem::new(field.grid(), *params, weight)?.gradient(field)
}

/// The default weak-form test family: seeded tapered bumps.
pub fn weak_test_suite(grid: &Arc<AxisymGrid>, seed: u64) -> Result<Vec<Field>> {
    bump_suite(grid, seed, TEST_SUITE_SIZE)
}

/// `max_φ |I'(u)[φ]| / ‖φ‖` over a suite of at least 30 fields; the
/// normalization scale is 1, so the value is bounded by the gradient norm.
pub fn weak_residual(field: &Field, params: &ProblemParams, weight: &Weight, suite: &[Field]) -> Result<f64> {
    if suite.len() < TEST_SUITE_SIZE {
        return Err(Error::Argument(format!("weak residual needs at least {TEST_SUITE_SIZE} test fields")));
    }
    VariationalProblem::new(field.grid(), *params, weight)?.weak_residual(field, suite)
}

/// Radius and height of the mountain-pass ring: `I(u) ≥ c0 > 0` whenever `‖u‖ = r0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub r0: f64,
    pub c0: f64,
    /// Coercivity factor of the (possibly shifted) quadratic part.
    pub coercivity: f64,
}

/// Ring from the embedding constants: the `L²` Hardy and trace bounds,
/// the sharp trace constant and the half-space Sobolev constant,
/// interpolated to the exponents at hand.
pub fn mountain_pass_ring(params: &ProblemParams, gamma: f64, dim: usize) -> Result<Ring> {
    params.validate()?;
    let ex = critical_exponents(dim)?;
    let s_trace = trace_best_constant(dim, OmegaConvention::SphereSurface)?;
    let s_vol = half_space_sobolev_constant(dim)?;
    let (a, b, p, q) = (params.a, params.b, params.p, params.q);
    let mut kappa = 1.0;
    // (coefficient, exponent) of lower-bound terms c·r^e subtracted from ½κr².
    let mut terms: Vec<(f64, f64)> = Vec::new();
    if b > 0.0 {
        if q == 2.0 {
            if !(gamma > 1.0) {
                return Err(Error::Admissibility("q = 2 needs γ > 1".into()));
            }
            kappa -= b * 2.0 / (gamma - 1.0);
        } else {
            let c = interpolation_constant(dim, gamma, q, s_trace)?;
            terms.push((b / q * c.powf(q / 2.0), q));
        }
    }
    if a > 0.0 {
        let theta = (0.5 - 1.0 / p) / (0.5 - 1.0 / ex.two_star);
        let l2 = || -> Result<f64> {
            if !(gamma >= 2.0) {
                return Err(Error::Admissibility(format!("volume bounds need γ ≥ 2, got {gamma}")));
            }
            Ok((2.0 / (gamma - 1.0)).powi(2))
        };
        if p == 2.0 {
            kappa -= a * l2()?;
        } else {
            let c = if theta >= 1.0 { 1.0 / s_vol } else { l2()?.powf(1.0 - theta) * s_vol.powf(-theta) };
            terms.push((a / p * c.powf(p / 2.0), p));
        }
    }
    if !(kappa > 0.0) {
        return Err(Error::Admissibility(format!("shifted quadratic form is not coercive (factor {kappa})")));
    }
    if terms.is_empty() {
        return Err(Error::Admissibility("no superquadratic term: the functional has no mountain-pass geometry".into()));
    }
    let slope = |r: f64| kappa - terms.iter().map(|(c, e)| c * e * r.powf(e - 2.0)).sum::<f64>();
    let (mut lo, mut hi): (f64, f64) = (1e-12, 1e12);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r0 = (lo * hi).sqrt();
    let c0 = 0.5 * kappa * r0 * r0 - terms.iter().map(|(c, e)| c * r0.powf(*e)).sum::<f64>();
    Ok(Ring { r0, c0, coercivity: kappa })
}

/// Smallest ratio `(‖φ‖² − a‖φ‖²₂ − b‖φ‖²_{2,∂}) / ‖φ‖²` over the suite, the
/// shifts applied only for the linear (`p = 2` or `q = 2`) terms. Errors when
/// the shifted form fails to be positive on some field.
pub fn shifted_norm_check(params: &ProblemParams, weight: &Weight, suite: &[Field]) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for phi in suite {
        let e = crate::grid::weighted_dirichlet_energy(phi, weight)?;
        let mut shifted = e;
        if params.p == 2.0 && params.a > 0.0 {
            shifted -= params.a * volume_power_integral(phi, 2.0)?;
        }
        if params.q == 2.0 && params.b > 0.0 {
            shifted -= params.b * boundary_power_integral(phi, 2.0)?;
        }
        if e > 0.0 {
            worst = worst.min(shifted / e);
        }
    }
    if !(worst > 0.0) {
        return Err(Error::Admissibility(format!("shifted quadratic form not positive on the suite (ratio {worst})")));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MountainPassConfig {
    /// Number of fields on the discrete path.
    pub path_nodes: usize,
    pub step: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Iterations between path rebuilds.
    pub reparam_every: usize,
    /// Collapse is declared when the path maximum falls below `(1 + margin)·c0`.
    pub collapse_margin: f64,
    /// In the critical regime, a solution whose bubble fit has scale below this
    /// many cells and fit error below [`COLLAPSE_FIT_ERROR`] is reported as
    /// concentrating.
    pub collapse_cells: f64,
    pub seed: u64,
    pub initial: Option<Field>,
}

/// Bubble-fit error below which a grid-scale profile counts as a bubble.
pub const COLLAPSE_FIT_ERROR: f64 = 0.5;

impl Default for MountainPassConfig {
    fn default() -> Self {
        MountainPassConfig {
            path_nodes: 21,
            step: 1.0,
            grad_tol: 1e-6,
            max_iters: 3000,
            reparam_every: 5,
            collapse_margin: 0.1,
            collapse_cells: 2.0,
            seed: 0,
            initial: None,
        }
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub iteration: usize,
    /// Path maximum `max_t I(t w)`.
    pub level: f64,
    pub residual_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Nonnegative path maximizer.
    pub solution: Field,
    pub level: f64,
    pub residual_norm: f64,
    pub path_history: Vec<PathRecord>,
    /// `I` at the path nodes `t_k = k·t_e/(M-1)`, from the last rebuild.
    pub path_levels: Vec<f64>,
    pub params: ProblemParams,
    pub weight: Weight,
    pub regime: Regime,
    pub ring: Ring,
    pub iterations: usize,
    pub converged: bool,
    /// Share of `∫_{x_N=0} u²` on the 5% of boundary cells nearest the axis.
    pub concentration_index: f64,
    /// Boundary-bubble fit of the final iterate.
    pub bubble_fit: Option<BubbleFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollapseKind {
    /// The path maximum fell to the ring value.
    BelowRing,
    /// The maximizer is a grid-scale bubble.
    Concentration,
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("mountain pass did not converge after {iterations} iterations (residual {residual_norm:.3e})")]
    MaxIter { iterations: usize, residual_norm: f64, best: Box<SolveResult> },
    #[error("mountain-pass path collapsed ({kind:?}) at iteration {iteration}: level {level:.6e}, ring value {ring:.6e}, concentration {concentration:.3}, bubble scale {bubble_eps:.3e}")]
    Collapse {
        kind: CollapseKind,
        iteration: usize,
        level: f64,
        ring: f64,
        concentration: f64,
        bubble_eps: f64,
        best: Box<SolveResult>,
    },
}

impl SolveError {
    pub fn best(&self) -> Option<&SolveResult> {
        match self {
            SolveError::MaxIter { best, .. } | SolveError::Collapse { best, .. } => Some(best),
            SolveError::Core(_) => None,
        }
    }
}

/// Tapered `exp(-(r² + x_N²))`, the default path direction.
pub fn default_initial(grid: &Arc<AxisymGrid>) -> Result<Field> {
    interpolate_analytic(grid, true, |r, z| (-(r * r + z * z)).exp())
}

fn positive_part(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| v.max(0.0)).collect()
}

struct PathPoint {
    solution: Field,
    level: f64,
    fiber: Fiber,
}

impl VariationalProblem {
    /// Peak of the ray through `v`, or `None` when the ray has no interior maximum.
    fn ray_peak(&self, v: Field) -> Result<Option<PathPoint>> {
        let fiber = self.fiber(&v)?;
        if !(fiber.energy > 0.0) {
            return Ok(None);
        }
        Ok(self.fiber_peak(&fiber).map(|t| PathPoint {
            level: self.fiber_energy(&fiber, t),
            solution: v.scaled(t),
            fiber: Fiber {
                energy: fiber.energy * t * t,
                boundary: fiber.boundary * t.powf(self.params.q),
                volume: fiber.volume * t.powf(self.params.p),
            },
        }))
    }

    /// Energies on `M` equispaced nodes of the segment from 0 to the far
    /// endpoint `t_e·u`, where `t_e ≥ 1` is doubled until `I(t_e u) < -1`.
    fn path_levels(&self, peak: &PathPoint, nodes: usize) -> Result<Vec<f64>> {
        let mut te = 1.0;
        let mut k = 0;
        while self.fiber_energy(&peak.fiber, te) >= -1.0 {
            te *= 2.0;
            k += 1;
            if k > 200 {
                return Err(Error::Numerics("no far endpoint with negative energy".into()));
            }
        }
        let m = nodes.max(2);
        Ok((0..m).map(|i| self.fiber_energy(&peak.fiber, te * i as f64 / (m - 1) as f64)).collect())
    }
}

/// Mountain-pass solve on the grid.
pub fn mountain_pass_solve(
    params: &ProblemParams,
    weight: &Weight,
    grid: &Arc<AxisymGrid>,
    config: &MountainPassConfig,
) -> std::result::Result<SolveResult, SolveError> {
    let problem = VariationalProblem::new(grid, *params, weight)?;
    mountain_pass_with(&problem, config)
}

/// [`mountain_pass_solve`] on a prebuilt problem.
pub fn mountain_pass_with(problem: &VariationalProblem, config: &MountainPassConfig) -> std::result::Result<SolveResult, SolveError> {
    let grid = problem.grid().clone();
    let params = *problem.params();
    let weight = problem.discretization().weight().clone();
    let dim = grid.dim();
    let regime = classify_regime(&params, weight.gamma, dim)?;
    if matches!(regime, Regime::MixedLinearVolume | Regime::MixedLinearBoundary) {
        shifted_norm_check(&params, &weight, &weak_test_suite(&grid, config.seed)?)?;
    }
    let ring = mountain_pass_ring(&params, weight.gamma, dim)?;
    if !(config.step > 0.0) || !(config.grad_tol > 0.0) || config.path_nodes < 3 || config.reparam_every == 0 {
        return Err(Error::Argument("invalid mountain-pass settings".into()).into());
    }

    let init = match &config.initial {
        Some(f) => {
            problem.check(f)?;
            f.clone()
        }
        None => default_initial(&grid)?,
    };
    let mut start = Field::from_values(&grid, positive_part(init.values()))?;
    start.enforce_truncation();
    let mut point = problem
        .ray_peak(start)?
        .ok_or_else(|| Error::Argument("initial direction has no mountain-pass maximum".into()))?;
    let mut path_levels = problem.path_levels(&point, config.path_nodes)?;
    let mut history = Vec::new();

    let finish = |point: PathPoint,
                  residual_norm: f64,
                  history: Vec<PathRecord>,
                  path_levels: Vec<f64>,
                  iterations: usize,
                  converged: bool| SolveResult {
        solution: point.solution,
        level: point.level,
        residual_norm,
        path_history: history,
        path_levels,
        params,
        weight: weight.clone(),
        regime,
        ring,
        iterations,
        converged,
        concentration_index: f64::NAN,
        bubble_fit: None,
    };

    let mut iterations = 0;
    loop {
        let (g, rn) = problem.gradient(&point.solution)?;
        if !rn.is_finite() {
            return Err(Error::Numerics("residual norm".into()).into());
        }
        if rn < config.grad_tol {
            let result = diagnose(finish(point, rn, history, path_levels, iterations, true))?;
            return check_concentration(result, config);
        }
        if iterations >= config.max_iters {
            let result = diagnose(finish(point, rn, history, path_levels, iterations, false))?;
            return Err(SolveError::MaxIter { iterations, residual_norm: rn, best: Box::new(result) });
        }
        let mut step = config.step;
        let mut next = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> =
                point.solution.values().iter().zip(g.values()).map(|(u, d)| (u - step * d).max(0.0)).collect();
            if let Some(cand) = problem.ray_peak(Field::from_values(&grid, trial)?)? {
                if cand.level < point.level && cand.level <= point.level - ARMIJO * step * rn * rn {
                    next = Some(cand);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(cand) = next else {
            let result = diagnose(finish(point, rn, history, path_levels, iterations, false))?;
            return Err(SolveError::MaxIter { iterations, residual_norm: rn, best: Box::new(result) });
        };
        point = cand;
        iterations += 1;
        history.push(PathRecord { iteration: iterations, level: point.level, residual_norm: rn, step });
        if iterations % config.reparam_every == 0 {
            path_levels = problem.path_levels(&point, config.path_nodes)?;
        }
        if point.level < (1.0 + config.collapse_margin) * ring.c0 {
            let level = point.level;
            let result = diagnose(finish(point, rn, history, path_levels, iterations, false))?;
            return Err(SolveError::Collapse {
                kind: CollapseKind::BelowRing,
                iteration: iterations,
                level,
                ring: ring.c0,
                concentration: result.concentration_index,
                bubble_eps: result.bubble_fit.map_or(f64::NAN, |f| f.best_fit_eps),
                best: Box::new(result),
            });
        }
    }
}

/// Attaches the concentration index and bubble fit of the final iterate.
fn diagnose(mut result: SolveResult) -> Result<SolveResult> {
    if result.solution.max_abs() > 0.0 {
        let grid = result.solution.grid().clone();
        result.concentration_index = concentration_index(&result.solution, Constraint::BoundaryLq, 2.0)?;
        result.bubble_fit = Some(concentration_diagnostic(&result.solution, &default_eps_family(&grid))?);
    }
    Ok(result)
}

/// In the critical regime, flags a converged solution that is a grid-scale
/// boundary bubble: there the continuum problem has no solution, and the
/// discrete one exists only because the grid stops the concentration.
fn check_concentration(result: SolveResult, config: &MountainPassConfig) -> std::result::Result<SolveResult, SolveError> {
    let Some(fit) = result.bubble_fit else {
        return Ok(result);
    };
    let grid = result.solution.grid();
    let h = grid.hr().max(grid.hz());
    if result.regime == Regime::Critical && fit.best_fit_eps <= config.collapse_cells * h && fit.fit_error < COLLAPSE_FIT_ERROR {
        return Err(SolveError::Collapse {
            kind: CollapseKind::Concentration,
            iteration: result.iterations,
            level: result.level,
            ring: result.ring.c0,
            concentration: result.concentration_index,
            bubble_eps: fit.best_fit_eps,
            best: Box::new(result),
        });
    }
    Ok(result)
}

/// Sup-norm residuals of the transformed Robin problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobinResidual {
    /// `max |Δv|` over interior nodes with `0 < r ≤ R/2`, `0 < x_N ≤ H/2`.
    /// The axis column is excluded: the `r^{N-2}`-weighted Galerkin equation
    /// there is not pointwise consistent with `(N-1)∂_rr`, so the nodal error
    /// carries an `O(h²)` layer that a second difference turns into `O(1)`.
    pub interior: f64,
    /// `max |−∂v/∂x_N + v − b|v|^{q-2}v|` over `x_N = 0`, `r ≤ R/2`.
    pub boundary: f64,
}

/// With `ρ = (1+x_N)²` and `a = 0`, `v = (1+x_N)u` must be harmonic with the
/// nonlinear Robin condition. Finite differences of `v` on the nodes.
pub fn robin_transform_check(field: &Field, params: &ProblemParams, weight: &Weight) -> Result<RobinResidual> {
    if !weight.is_power() || weight.gamma != 2.0 {
        return Err(Error::Argument("the Robin transform needs the weight (1+x_N)^2".into()));
    }
    if params.a != 0.0 {
        return Err(Error::Argument("the Robin transform needs a = 0".into()));
    }
    let g = field.grid();
    let (hr, hz) = (g.hr(), g.hz());
    if g.nr() < 4 || g.nz() < 4 {
        return Err(Error::Stencil("Robin check needs at least 4 cells per direction".into()));
    }
    let v = |i: usize, j: usize| (1.0 + g.z(j)) * field.at(i, j);
    let nm = g.dim() as f64 - 2.0;
    let (imax, jmax) = (g.nr() / 2, g.nz() / 2);
    let mut interior: f64 = 0.0;
    for j in 1..=jmax {
        for i in 1..=imax {
            let vzz = (v(i, j + 1) - 2.0 * v(i, j) + v(i, j - 1)) / (hz * hz);
            let vrr = (v(i + 1, j) - 2.0 * v(i, j) + v(i - 1, j)) / (hr * hr);
            let vr = (v(i + 1, j) - v(i - 1, j)) / (2.0 * hr);
            let radial = vrr + nm / g.r(i) * vr;
            interior = interior.max((vzz + radial).abs());
        }
    }
    let mut boundary: f64 = 0.0;
    for i in 0..=imax {
        let vz = (-3.0 * v(i, 0) + 4.0 * v(i, 1) - v(i, 2)) / (2.0 * hz);
        let v0 = v(i, 0);
        let flux = if v0 == 0.0 { 0.0 } else { params.b * v0.signum() * v0.abs().powf(params.q - 1.0) };
        boundary = boundary.max((-vz + v0 - flux).abs());
    }
    Ok(RobinResidual { interior, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::suite::suite_member;
    use approx::assert_relative_eq;

    #[test]
    fn regimes_of_presets() {
        let expect = [
            Regime::BoundaryDriven,
            Regime::Mixed,
            Regime::MixedLinearVolume,
            Regime::MixedLinearBoundary,
            Regime::VolumeDriven,
        ];
        for (pr, want) in PRESETS.iter().zip(expect) {
            assert_eq!(classify_regime(&pr.params, pr.gamma, 3).unwrap(), want, "{}", pr.name);
        }
        let crit = ProblemParams::new(0.0, 1.0, 2.0, 4.0);
        assert_eq!(classify_regime(&crit, 3.0, 3).unwrap(), Regime::Critical);
        assert!(classify_regime(&ProblemParams::new(0.0, 1.0, 2.0, 3.0), 0.5, 3).is_err());
        assert!(classify_regime(&ProblemParams::new(0.0, 1.0, 2.0, 4.5), 3.0, 3).is_err());
        assert!(classify_regime(&ProblemParams::new(0.9, 1.0, 2.0, 3.0), 2.5, 3).is_err());
        assert!(preset("thm99").is_err());
    }

    #[test]
    fn zero_field_has_zero_energy_and_gradient() {
        let g = make_grid(3, 8.0, 8.0, 16, 16).unwrap();
        let pr = preset("thm17").unwrap();
        let z = Field::zeros(&g);
        let e = energy(&z, &pr.params, &pr.weight()).unwrap();
        assert_eq!((e.dirichlet, e.boundary_term, e.volume_term, e.total), (0.0, 0.0, 0.0, 0.0));
        let (grad, n) = energy_gradient(&z, &pr.params, &pr.weight()).unwrap();
        assert_eq!(n, 0.0);
        assert_eq!(grad.max_abs(), 0.0);
    }

    #[test]
    fn energy_matches_separate_norms() {
        let g = make_grid(3, 8.0, 8.0, 24, 24).unwrap();
        let w = Weight::power(3.0);
        let u = suite_member(&g, 5, 1).unwrap();
        let params = ProblemParams::new(0.0, 1.0, 2.0, 3.0);
        let e = energy(&u, &params, &w).unwrap();
        let dir = crate::grid::weighted_dirichlet_energy(&u, &w).unwrap();
        let l3 = crate::grid::lq_norm_boundary(&u, 3.0).unwrap();
        assert_relative_eq!(e.total, 0.5 * dir - l3.powi(3) / 3.0, max_relative = 1e-10);
        assert_eq!(e.total, e.dirichlet - e.boundary_term - e.volume_term);
    }

    #[test]
    fn energy_is_linear_in_coefficients() {
        let g = make_grid(3, 8.0, 8.0, 16, 16).unwrap();
        let w = Weight::power(3.0);
        let u = suite_member(&g, 2, 0).unwrap();
        let e1 = energy(&u, &ProblemParams::new(1.0, 1.0, 4.0, 3.0), &w).unwrap();
        let e2 = energy(&u, &ProblemParams::new(2.5, -3.0, 4.0, 3.0), &w).unwrap();
        assert_relative_eq!(e2.volume_term, 2.5 * e1.volume_term, max_relative = 1e-14);
        assert_relative_eq!(e2.boundary_term, -3.0 * e1.boundary_term, max_relative = 1e-14);
    }

    #[test]
    fn far_along_a_ray_the_energy_is_negative() {
        let g = make_grid(3, 8.0, 8.0, 16, 16).unwrap();
        let w = Weight::power(3.0);
        let params = ProblemParams::new(0.0, 1.0, 2.0, 3.0);
        let u = default_initial(&g).unwrap();
        let u = u.scaled(1.0 / crate::grid::weighted_dirichlet_energy(&u, &w).unwrap().sqrt());
        assert!(energy(&u.scaled(1e3), &params, &w).unwrap().total < 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = make_grid(3, 8.0, 8.0, 24, 24).unwrap();
        let pr = preset("thm17").unwrap();
        let prob = VariationalProblem::new(&g, pr.params, &pr.weight()).unwrap();
        let u = suite_member(&g, 9, 0).unwrap().scaled(2.0);
        let v = suite_member(&g, 9, 1).unwrap();
        let (gr, _) = prob.gradient(&u).unwrap();
        let t = 1e-4;
        let fd = (prob.energy(&u.axpy(t, &v)).unwrap().total - prob.energy(&u.axpy(-t, &v)).unwrap().total) / (2.0 * t);
        let an = prob.discretization().inner(gr.values(), v.values());
        assert_relative_eq!(fd, an, max_relative = 1e-6);
    }

    #[test]
    fn ring_is_positive_and_bounds_energy() {
        let g = make_grid(3, 10.0, 10.0, 32, 32).unwrap();
        for pr in PRESETS {
            let ring = mountain_pass_ring(&pr.params, pr.gamma, 3).unwrap();
            assert!(ring.c0 > 0.0 && ring.r0 > 0.0, "{}", pr.name);
            let prob = VariationalProblem::new(&g, pr.params, &pr.weight()).unwrap();
            for k in 0..10 {
                let u = suite_member(&g, 21, k).unwrap();
                let n = prob.discretization().energy(u.values()).sqrt();
                let e = prob.energy(&u.scaled(ring.r0 / n)).unwrap().total;
                assert!(e >= ring.c0 * (1.0 - 1e-9), "{}: {e} < {}", pr.name, ring.c0);
            }
        }
    }

    #[test]
    fn robin_check_of_trivial_fields() {
        let g = make_grid(3, 8.0, 8.0, 32, 32).unwrap();
        let w = Weight::power(2.0);
        let params = ProblemParams::new(0.0, 0.3, 2.0, 3.0);
        let z = robin_transform_check(&Field::zeros(&g), &params, &w).unwrap();
        assert_eq!((z.interior, z.boundary), (0.0, 0.0));
        let u = interpolate_analytic(&g, true, |_, z| 1.0 / (1.0 + z)).unwrap();
        let res = robin_transform_check(&u, &params, &w).unwrap();
        assert!(res.interior < 1e-9);
        assert_relative_eq!(res.boundary, 0.7, max_relative = 1e-9);
        assert!(robin_transform_check(&u, &params, &Weight::power(3.0)).is_err());
    }
}
