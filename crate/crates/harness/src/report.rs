//! Structured reports. Every payload is plain data so that two runs with the
//! same configuration serialize to identical bytes; wall time lives outside
//! the payload.

use std::path::PathBuf;

use hvlab_core::inequalities::InequalityRow;
use hvlab_core::minimizers::{BubbleFit, RescalePoint};
use hvlab_core::pohozaev::{NonexistenceProbe, PohozaevReport};
use hvlab_core::solver::{EnergySplit, PathRecord, ProblemParams, Regime, Ring, RobinResidual};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub inputs: ExperimentConfig,
    pub payload: Payload,
    pub wall_time_s: f64,
    pub artifacts: Vec<PathBuf>,
}

impl Report {
    /// Serialized payload; the part of the report that must be reproducible.
    pub fn payload_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.payload)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payload {
    Inequality(InequalityPayload),
    Ladder(LadderPayload),
    Rearrangement(RearrangementPayload),
    BestConstant(BestConstantPayload),
    MountainPass(MountainPassPayload),
    Pohozaev(PohozaevPayload),
    Nonexistence(NonexistencePayload),
    Instanton(InstantonPayload),
    Robin(RobinPayload),
}

/// One line of a sweep summary: the payload's headline numbers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub passed: Option<bool>,
    pub value: Option<f64>,
    pub residual: Option<f64>,
    pub pohozaev_relative: Option<f64>,
    pub iterations: Option<usize>,
}

impl Payload {
    pub fn headline(&self) -> Headline {
        match self {
            Payload::Inequality(p) => Headline {
                passed: Some(p.all_hold),
                value: p.links.iter().map(|l| l.min_relative_slack).reduce(f64::min),
                ..Headline::default()
            },
            Payload::Ladder(p) => Headline {
                passed: Some(p.within_tolerance),
                value: Some(p.max_relative_gap),
                ..Headline::default()
            },
            Payload::Rearrangement(p) => Headline { passed: Some(p.all_hold), ..Headline::default() },
            Payload::BestConstant(p) => Headline {
                passed: Some(p.converged),
                value: Some(p.best_value),
                residual: Some(p.grad_norm_final),
                iterations: Some(p.iterations),
                ..Headline::default()
            },
            Payload::MountainPass(p) => Headline {
                passed: Some(p.converged),
                value: Some(p.level),
                residual: Some(p.residual_norm),
                pohozaev_relative: Some(p.pohozaev.relative_residual),
                iterations: Some(p.iterations),
            },
            Payload::Pohozaev(p) => Headline {
                passed: Some(p.report.relative_residual <= 0.01),
                value: Some(p.report.residual),
                pohozaev_relative: Some(p.report.relative_residual),
                ..Headline::default()
            },
            Payload::Nonexistence(p) => Headline {
                passed: Some(p.coefficients_vanish && p.all_obstructed),
                value: p.rows.iter().map(|r| r.probe.obstruction_value).reduce(f64::min),
                ..Headline::default()
            },
            Payload::Instanton(p) => Headline {
                passed: Some(p.orders.iter().all(|o| (o.interior_order - 2.0).abs() <= 0.5)),
                value: Some(p.coefficient_relative_error),
                ..Headline::default()
            },
            Payload::Robin(p) => Headline {
                value: p.levels.last().map(|l| l.level),
                residual: p.levels.last().map(|l| l.residual.interior.max(l.residual.boundary)),
                ..Headline::default()
            },
        }
    }
}

/// Worst slack of one inequality family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub check: String,
    /// Accepted relative violation: `slack ≥ −tolerance·|rhs|`.
    pub tolerance: f64,
    pub min_relative_slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityPayload {
    pub check: String,
    pub gamma: f64,
    pub exponent: f64,
    pub constant: f64,
    /// The constant was obtained by minimizing on the suite grid.
    pub calibrated: bool,
    pub links: Vec<LinkSummary>,
    pub all_hold: bool,
    pub rows: Vec<InequalityRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub index: usize,
    pub max_abs: f64,
    pub top_exponent: f64,
    pub top_norm: f64,
    pub relative_gap: f64,
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderPayload {
    pub zeta: f64,
    pub exponents: Vec<f64>,
    pub tolerance: f64,
    pub max_relative_gap: f64,
    pub within_tolerance: bool,
    pub rows: Vec<LadderRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RearrangementRow {
    pub index: usize,
    pub idempotent: bool,
    pub monotone: bool,
    /// Worst per-row `L^s` mismatch for `s = 1, 2, 4`.
    pub slice_error_s1: f64,
    pub slice_error_s2: f64,
    pub slice_error_s4: f64,
    pub energy_relative_slack: f64,
    /// Contraction against the next suite member.
    pub contraction_relative_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangementPayload {
    pub gamma: f64,
    pub tol_meas: f64,
    pub tol_polya: f64,
    pub all_hold: bool,
    pub rows: Vec<RearrangementRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestConstantPayload {
    pub constraint: String,
    pub gamma: f64,
    pub exponent: f64,
    pub best_value: f64,
    /// Sharp constant under the convention closest to `best_value` (critical trace only).
    pub reference: Option<f64>,
    pub relative_error: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm_final: f64,
    pub start: usize,
    pub concentration_index: f64,
    pub bubble_fit: Option<BubbleFit>,
    pub rescale: Vec<RescalePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountainPassPayload {
    pub preset: Option<String>,
    pub params: ProblemParams,
    pub gamma: f64,
    pub regime: Regime,
    pub ring: Ring,
    pub level: f64,
    pub energy: EnergySplit,
    pub residual_norm: f64,
    pub weak_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub concentration_index: f64,
    pub bubble_fit: Option<BubbleFit>,
    pub pohozaev: PohozaevReport,
    pub nonexistence: Option<NonexistenceProbe>,
    pub path_levels: Vec<f64>,
    pub history: Vec<PathRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PohozaevPayload {
    pub epsilon: f64,
    pub params: ProblemParams,
    pub report: PohozaevReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceRow {
    pub field: String,
    pub probe: NonexistenceProbe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexistencePayload {
    pub gamma: f64,
    pub params: ProblemParams,
    /// `A` and `B` as exact rationals `"num/den"`.
    pub coefficient_a: String,
    pub coefficient_b: String,
    pub coefficients_vanish: bool,
    pub all_obstructed: bool,
    pub rows: Vec<NonexistenceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantonRow {
    pub bubble: String,
    pub h: f64,
    pub interior_max: f64,
    pub boundary_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantonOrder {
    pub bubble: String,
    /// Least-squares slope of `log residual` against `log h`.
    pub interior_order: f64,
    pub boundary_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantonPayload {
    pub dim: usize,
    pub rows: Vec<InstantonRow>,
    pub orders: Vec<InstantonOrder>,
    /// `−∂_z u / u^{2_*-1}` of the boundary bubble at sample radii.
    pub boundary_coefficients: Vec<(f64, f64)>,
    pub expected_coefficient: f64,
    pub coefficient_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobinLevel {
    pub nr: usize,
    pub nz: usize,
    pub level: f64,
    pub residual_norm: f64,
    pub residual: RobinResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobinPayload {
    pub params: ProblemParams,
    pub levels: Vec<RobinLevel>,
    /// `log2` of successive residual ratios.
    pub interior_orders: Vec<f64>,
    pub boundary_orders: Vec<f64>,
}
