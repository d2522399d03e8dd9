//! Scenario dispatch: every named scenario maps onto one core module.

use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use hvlab_core::constants::{calibrate_omega, critical_exponents, critical_exponents_exact, hardy_constant};
use hvlab_core::grid::{interpolate_analytic, write_snapshot, AxisymGrid, Field};
use hvlab_core::inequalities::{
    hardy_p_check, ladder_supnorm_diagnostic, moser_ladder, trace_lq_chain_check, InequalityReport, InequalityRow,
};
use hvlab_core::instanton::{instanton_pde_residual, BubbleKind, InstantonParams};
use hvlab_core::minimizers::{best_effort, minimize, rescale_diagnostic, Constraint, MinimizeConfig};
use hvlab_core::pohozaev::{criticality_coefficients_exact, nonexistence_probe, pohozaev_eval};
use hvlab_core::rearrangement::{
    contraction_check, energy_comparison, equimeasurability_check, schwarz_rearrange, tol_meas, tol_polya,
};
use hvlab_core::solver::{
    energy, mountain_pass_solve, preset, robin_transform_check, weak_residual, weak_test_suite, MountainPassConfig,
    ProblemParams, SolveResult,
};
use hvlab_core::suite::bump_suite;
use hvlab_core::Weight;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{ConfigError, HarnessError, Result};
use crate::report::*;

/// Accepted relative violation of the Hardy inequality.
pub const HARDY_TOL: f64 = 1e-8;
/// Accepted relative violation of the critical trace link.
pub const TRACE_CRITICAL_TOL: f64 = 1e-6;
/// `∫|∇u|² ≤ ∫ρ|∇u|²` holds pointwise; only rounding is tolerated.
pub const WEIGHT_LINK_TOL: f64 = 1e-12;
pub const TRACE_LQ_TOL: f64 = 1e-8;
/// Accepted gap between the top ladder norm and `max|u|`.
pub const LADDER_TOL: f64 = 0.05;
/// Stencil widths of the instanton refinement study.
pub const INSTANTON_STEPS: [f64; 3] = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
/// Minimizer iteration budget when the config leaves it unset.
pub const BEST_CONSTANT_MAX_ITERS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    InequalityHardy,
    InequalityTrace,
    InequalityLadder,
    Rearrangement,
    BestConstantCritical,
    BestConstantTrace,
    BestConstantVolume,
    MountainPass,
    Preset(&'static str),
    PohozaevBubble,
    Nonexistence,
    Instanton,
    Robin,
}

impl Scenario {
    pub const NAMES: [&'static str; 17] = [
        "ineq-hardy",
        "ineq-trace",
        "ineq-ladder",
        "rearrange",
        "bestconst-trace-critical",
        "bestconst-trace",
        "bestconst-volume",
        "mountain-pass",
        "thm16",
        "thm17",
        "thm17i",
        "thm17ii",
        "thm18",
        "pohozaev-bubble",
        "nonexistence-critical",
        "instanton-residual",
        "robin-check",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::InequalityHardy => "ineq-hardy",
            Scenario::InequalityTrace => "ineq-trace",
            Scenario::InequalityLadder => "ineq-ladder",
            Scenario::Rearrangement => "rearrange",
            Scenario::BestConstantCritical => "bestconst-trace-critical",
            Scenario::BestConstantTrace => "bestconst-trace",
            Scenario::BestConstantVolume => "bestconst-volume",
            Scenario::MountainPass => "mountain-pass",
            Scenario::Preset(name) => name,
            Scenario::PohozaevBubble => "pohozaev-bubble",
            Scenario::Nonexistence => "nonexistence-critical",
            Scenario::Instanton => "instanton-residual",
            Scenario::Robin => "robin-check",
        }
    }

    /// CLI subcommand that runs this scenario.
    pub fn command(&self) -> &'static str {
        match self {
            Scenario::InequalityHardy | Scenario::InequalityTrace | Scenario::InequalityLadder => "verify-inequality",
            Scenario::Rearrangement => "rearrange-check",
            Scenario::BestConstantCritical | Scenario::BestConstantTrace | Scenario::BestConstantVolume => {
                "best-constant"
            }
            Scenario::MountainPass | Scenario::Preset(_) => "mountain-pass",
            Scenario::PohozaevBubble | Scenario::Nonexistence => "pohozaev-check",
            Scenario::Instanton => "instanton-residual",
            Scenario::Robin => "robin-check",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> std::result::Result<Self, ConfigError> {
        Ok(match s {
            "ineq-hardy" => Scenario::InequalityHardy,
            "ineq-trace" => Scenario::InequalityTrace,
            "ineq-ladder" => Scenario::InequalityLadder,
            "rearrange" => Scenario::Rearrangement,
            "bestconst-trace-critical" => Scenario::BestConstantCritical,
            "bestconst-trace" => Scenario::BestConstantTrace,
            "bestconst-volume" => Scenario::BestConstantVolume,
            "mountain-pass" => Scenario::MountainPass,
            "pohozaev-bubble" => Scenario::PohozaevBubble,
            "nonexistence-critical" => Scenario::Nonexistence,
            "instanton-residual" => Scenario::Instanton,
            "robin-check" => Scenario::Robin,
            other => match preset(other) {
                Ok(p) => Scenario::Preset(p.name),
                Err(_) => return Err(ConfigError::UnknownScenario(other.to_string())),
            },
        })
    }
}

/// Runs one configured scenario, writes its artifacts and `report.json`
/// into `output_dir`, and returns the report.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    let scenario = config.scenario()?;
    let start = Instant::now();
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| HarnessError::Io { path: config.output_dir.clone(), source: e })?;
    let mut ctx = Ctx { cfg: config, scenario, artifacts: Vec::new() };
    let payload = match scenario {
        Scenario::InequalityHardy => hardy(&mut ctx)?,
        Scenario::InequalityTrace => trace_chain(&mut ctx)?,
        Scenario::InequalityLadder => ladder(&mut ctx)?,
        Scenario::Rearrangement => rearrangement(&mut ctx)?,
        Scenario::BestConstantCritical | Scenario::BestConstantTrace | Scenario::BestConstantVolume => {
            best_constant(&mut ctx)?
        }
        Scenario::MountainPass | Scenario::Preset(_) => mountain_pass(&mut ctx)?,
        Scenario::PohozaevBubble => pohozaev_bubble(&mut ctx)?,
        Scenario::Nonexistence => nonexistence(&mut ctx)?,
        Scenario::Instanton => instanton(&mut ctx)?,
        Scenario::Robin => robin(&mut ctx)?,
    };
    let report_path = ctx.path("report.json");
    ctx.artifacts.push(report_path.clone());
    let report = Report {
        scenario: scenario.name().to_string(),
        inputs: config.clone(),
        payload,
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: ctx.artifacts,
    };
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(&report_path, text).map_err(|e| HarnessError::Io { path: report_path, source: e })?;
    Ok(report)
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    scenario: Scenario,
    artifacts: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn core<T>(&self, r: hvlab_core::Result<T>) -> Result<T> {
        r.map_err(|e| HarnessError::Core { scenario: self.scenario.name().to_string(), source: e })
    }

    fn grid(&self) -> Result<Arc<AxisymGrid>> {
        self.core(self.cfg.grid.spec().build())
    }

    fn path(&self, file: &str) -> PathBuf {
        self.cfg.output_dir.join(file)
    }

    fn gamma(&self, default: f64) -> f64 {
        self.cfg.problem.gamma.unwrap_or(default)
    }

    fn suite(&self, grid: &Arc<AxisymGrid>) -> Result<Vec<Field>> {
        self.core(bump_suite(grid, self.cfg.seed, self.cfg.suite.count))
    }

    fn write_csv<S: Serialize>(&mut self, file: &str, rows: &[S]) -> Result<()> {
        let path = self.path(file);
        let csv_err = |e| HarnessError::Csv { path: path.clone(), source: e };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        for row in rows {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
        self.artifacts.push(path);
        Ok(())
    }

    fn write_snapshot(&mut self, file: &str, field: &Field) -> Result<()> {
        let path = self.path(file);
        let io_err = |e| HarnessError::Io { path: path.clone(), source: e };
        let out = fs::File::create(&path).map_err(io_err)?;
        write_snapshot(field, BufWriter::new(out)).map_err(io_err)?;
        self.artifacts.push(path);
        Ok(())
    }
}

fn link(check: &str, tolerance: f64, reports: &[&InequalityReport]) -> LinkSummary {
    let min_relative_slack = reports.iter().map(|r| r.slack / r.rhs.abs().max(f64::MIN_POSITIVE)).fold(f64::INFINITY, f64::min);
    LinkSummary {
        check: check.to_string(),
        tolerance,
        min_relative_slack,
        holds: reports.iter().all(|r| r.holds_within(tolerance)),
    }
}

fn hardy(ctx: &mut Ctx) -> Result<Payload> {
    let g = ctx.grid()?;
    let gamma = ctx.gamma(3.0);
    let p = ctx.cfg.suite.exponent.unwrap_or(2.0);
    let seed = ctx.cfg.seed;
    let constant = ctx.core(hardy_constant(p, gamma))?;
    let weight = Weight::power(gamma);
    let reports: Vec<InequalityReport> = ctx.core(ctx.suite(&g)?.iter().map(|f| hardy_p_check(f, &weight, p)).collect())?;
    let refs: Vec<&InequalityReport> = reports.iter().collect();
    let links = vec![link("hardy", HARDY_TOL, &refs)];
    let rows: Vec<InequalityRow> = reports.iter().map(|r| InequalityRow::from_report("hardy", gamma, p, seed, r)).collect();
    ctx.write_csv("hardy.csv", &rows)?;
    Ok(Payload::Inequality(InequalityPayload {
        check: "hardy".into(),
        gamma,
        exponent: p,
        constant,
        calibrated: false,
        all_hold: links.iter().all(|l| l.holds),
        links,
        rows,
    }))
}

fn trace_chain(ctx: &mut Ctx) -> Result<Payload> {
    let g = ctx.grid()?;
    let gamma = ctx.gamma(3.0);
    let two_lower = ctx.core(critical_exponents(g.dim()))?.two_lower;
    let q = ctx.cfg.suite.exponent.unwrap_or(two_lower);
    let seed = ctx.cfg.seed;
    let (constant, calibrated) = if ctx.cfg.suite.calibrate {
        let mut mc = MinimizeConfig::new(Constraint::BoundaryLq, two_lower, Weight::unit());
        mc.max_iters = ctx.cfg.solver.max_iters.unwrap_or(BEST_CONSTANT_MAX_ITERS);
        mc.grad_tol = ctx.cfg.solver.grad_tol.unwrap_or(mc.grad_tol);
        let best = ctx.core(best_effort(minimize(&g, &mc)))?;
        (best.best_value, true)
    } else {
        let measured = ctx.core(hvlab_core::trace_best_constant(g.dim(), hvlab_core::OmegaConvention::SphereSurface))?;
        (measured, false)
    };
    let chains: Vec<_> = ctx.core(ctx.suite(&g)?.iter().map(|f| trace_lq_chain_check(f, gamma, q, constant)).collect::<hvlab_core::Result<_>>())?;
    let crit: Vec<&InequalityReport> = chains.iter().map(|c| &c.critical_link).collect();
    let weight: Vec<&InequalityReport> = chains.iter().map(|c| &c.weight_link).collect();
    let lq: Vec<&InequalityReport> = chains.iter().map(|c| &c.lq_link).collect();
    let links = vec![
        link("trace-critical", TRACE_CRITICAL_TOL, &crit),
        link("trace-weight", WEIGHT_LINK_TOL, &weight),
        link("trace-lq", TRACE_LQ_TOL, &lq),
    ];
    let mut rows = Vec::with_capacity(3 * chains.len());
    for c in &chains {
        rows.push(InequalityRow::from_report("trace-critical", gamma, two_lower, seed, &c.critical_link));
        rows.push(InequalityRow::from_report("trace-weight", gamma, 2.0, seed, &c.weight_link));
        rows.push(InequalityRow::from_report("trace-lq", gamma, q, seed, &c.lq_link));
    }
    ctx.write_csv("trace_chain.csv", &rows)?;
    Ok(Payload::Inequality(InequalityPayload {
        check: "trace-chain".into(),
        gamma,
        exponent: q,
        constant,
        calibrated,
        all_hold: links.iter().all(|l| l.holds),
        links,
        rows,
    }))
}

fn ladder(ctx: &mut Ctx) -> Result<Payload> {
    let g = ctx.grid()?;
    let zeta = ctx.cfg.suite.zeta;
    let rungs = ctx.cfg.suite.ladder_rungs;
    let ks = ctx.core(moser_ladder(g.dim(), zeta, rungs))?;
    let two_star = ctx.core(critical_exponents(g.dim()))?.two_star;
    let mut rows = Vec::new();
    for (index, f) in ctx.suite(&g)?.iter().enumerate() {
        let entries = ctx.core(ladder_supnorm_diagnostic(f, zeta, rungs, false))?;
        let Some(top) = entries.last() else {
            return Err(ConfigError::Invalid("ladder needs at least one rung".into()).into());
        };
        let max_abs = f.max_abs();
        rows.push(LadderRow {
            index,
            max_abs,
            top_exponent: top.exponent,
            top_norm: top.norm,
            relative_gap: if max_abs > 0.0 { (top.norm - max_abs).abs() / max_abs } else { 0.0 },
            capped: top.capped,
        });
    }
    ctx.write_csv("ladder.csv", &rows)?;
    let max_relative_gap = rows.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
    Ok(Payload::Ladder(LadderPayload {
        zeta,
        exponents: ks.iter().map(|k| (k + 1.0) * two_star).collect(),
        tolerance: LADDER_TOL,
        max_relative_gap,
        within_tolerance: max_relative_gap <= LADDER_TOL,
        rows,
    }))
}

fn rearrangement(ctx: &mut Ctx) -> Result<Payload> {
    let g = ctx.grid()?;
    let gamma = ctx.gamma(3.0);
    let weight = Weight::power(gamma);
    let suite = ctx.suite(&g)?;
    let (tm, tp) = (tol_meas(&g), tol_polya(&g));
    let mut rows = Vec::with_capacity(suite.len());
    let mut all_hold = true;
    for (index, f) in suite.iter().enumerate() {
        let once = ctx.core(schwarz_rearrange(f))?;
        let twice = ctx.core(schwarz_rearrange(&once.field))?;
        let mut slice = [0.0; 3];
        let mut equi = true;
        for (k, s) in [1.0, 2.0, 4.0].into_iter().enumerate() {
            let rep = ctx.core(equimeasurability_check(f, &once.field, s))?;
            slice[k] = rep.max_slice_relative_error;
            equi &= rep.within_tolerance;
        }
        let en = ctx.core(energy_comparison(f, &weight))?;
        let next = &suite[(index + 1) % suite.len()];
        let con = ctx.core(contraction_check(f, next, 2.0))?;
        let row = RearrangementRow {
            index,
            idempotent: twice.field == once.field,
            monotone: once.monotone.iter().all(|m| *m),
            slice_error_s1: slice[0],
            slice_error_s2: slice[1],
            slice_error_s4: slice[2],
            energy_relative_slack: en.slack / en.rhs.abs().max(f64::MIN_POSITIVE),
            contraction_relative_slack: con.slack / con.rhs.abs().max(f64::MIN_POSITIVE),
        };
        all_hold &= row.idempotent && row.monotone && equi && en.holds_within(tp) && con.holds_within(tm);
        rows.push(row);
    }
    ctx.write_csv("rearrangement.csv", &rows)?;
    Ok(Payload::Rearrangement(RearrangementPayload { gamma, tol_meas: tm, tol_polya: tp, all_hold, rows }))
}

fn best_constant(ctx: &mut Ctx) -> Result<Payload> {
    let g = ctx.grid()?;
    let ex = ctx.core(critical_exponents(g.dim()))?;
    let (constraint, exponent, gamma) = match ctx.scenario {
        Scenario::BestConstantCritical => (Constraint::BoundaryLq, ex.two_lower, ctx.gamma(0.0)),
        Scenario::BestConstantTrace => (Constraint::BoundaryLq, ctx.cfg.problem.q.unwrap_or(3.0), ctx.gamma(3.0)),
        _ => (Constraint::VolumeLp, ctx.cfg.problem.p.unwrap_or(4.0), ctx.gamma(3.0)),
    };
    let weight = Weight::power(gamma);
    let mut mc = MinimizeConfig::new(constraint, exponent, weight.clone());
    let s = &ctx.cfg.solver;
    mc.max_iters = s.max_iters.unwrap_or(BEST_CONSTANT_MAX_ITERS);
    mc.grad_tol = s.grad_tol.unwrap_or(mc.grad_tol);
    mc.step = s.step.unwrap_or(mc.step);
    mc.multistart = s.multistart.unwrap_or(mc.multistart);
    mc.seed = ctx.cfg.seed;
    let result = minimize(&g, &mc).map_err(|e| HarnessError::Minimize {
        scenario: ctx.scenario.name().to_string(),
        source: Box::new(e),
    })?;
    let (reference, relative_error) = if ctx.scenario == Scenario::BestConstantCritical {
        let (conv, values) = ctx.core(calibrate_omega(g.dim(), result.best_value))?;
        let reference = values.iter().find(|v| v.0 == conv).map_or(f64::NAN, |v| v.1);
        (Some(reference), Some((result.best_value - reference) / reference))
    } else {
        (None, None)
    };
    let rescale = if ctx.scenario == Scenario::BestConstantTrace {
        ctx.core(rescale_diagnostic(&result.minimizer, &weight, &[1.0, 0.5, 0.25, 0.125]))?
    } else {
        Vec::new()
    };
    let fit = ctx.core(hvlab_core::minimizers::concentration_diagnostic(
        &result.minimizer,
        &hvlab_core::minimizers::default_eps_family(&g),
    ))?;
    ctx.write_snapshot("minimizer.txt", &result.minimizer)?;
    Ok(Payload::BestConstant(BestConstantPayload {
        constraint: match constraint {
            Constraint::BoundaryLq => "boundary-lq".into(),
            Constraint::VolumeLp => "volume-lp".into(),
        },
        gamma,
        exponent,
        best_value: result.best_value,
        reference,
        relative_error,
        converged: result.converged,
        iterations: result.iterations,
        grad_norm_final: result.grad_norm_final,
        start: result.start,
        concentration_index: result.concentration_index,
        bubble_fit: Some(fit),
        rescale,
    }))
}

/// Preset coefficients with the config's explicit entries layered on top.
/// The custom `mountain-pass` scenario starts from `thm16`.
fn problem(ctx: &Ctx) -> Result<(Option<String>, ProblemParams, f64)> {
    let (name, base) = match ctx.scenario {
        Scenario::Preset(name) => (Some(name.to_string()), ctx.core(preset(name))?),
        _ => (None, ctx.core(preset("thm16"))?),
    };
    let pr = &ctx.cfg.problem;
    let params = ProblemParams::new(
        pr.a.unwrap_or(base.params.a),
        pr.b.unwrap_or(base.params.b),
        pr.p.unwrap_or(base.params.p),
        pr.q.unwrap_or(base.params.q),
    );
    Ok((name, params, pr.gamma.unwrap_or(base.gamma)))
}

fn mp_config(ctx: &Ctx) -> MountainPassConfig {
    let s = &ctx.cfg.solver;
    let d = MountainPassConfig::default();
    MountainPassConfig {
        path_nodes: s.path_nodes.unwrap_or(d.path_nodes),
        step: s.step.unwrap_or(d.step),
        grad_tol: s.grad_tol.unwrap_or(d.grad_tol),
        max_iters: s.max_iters.unwrap_or(d.max_iters),
        reparam_every: s.reparam_every.unwrap_or(d.reparam_every),
        seed: ctx.cfg.seed,
        ..d
    }
}

fn solve(ctx: &Ctx, params: &ProblemParams, weight: &Weight, grid: &Arc<AxisymGrid>) -> Result<SolveResult> {
    mountain_pass_solve(params, weight, grid, &mp_config(ctx))
        .map_err(|e| HarnessError::Solve { scenario: ctx.scenario.name().to_string(), source: Box::new(e) })
}

fn mountain_pass(ctx: &mut Ctx) -> Result<Payload> {
    let g = ctx.grid()?;
    let (preset_name, params, gamma) = problem(ctx)?;
    let weight = Weight::power(gamma);
    let res = solve(ctx, &params, &weight, &g)?;
    let split = ctx.core(energy(&res.solution, &params, &weight))?;
    let tests = ctx.core(weak_test_suite(&g, ctx.cfg.seed))?;
    let weak = ctx.core(weak_residual(&res.solution, &params, &weight, &tests))?;
    let pohozaev = ctx.core(pohozaev_eval(&res.solution, &params, &weight))?;
    // Weights outside (ρ_1) have no derived relation to probe.
    let nonexistence = nonexistence_probe(&res.solution, &params, &weight).ok();
    ctx.write_snapshot("solution.txt", &res.solution)?;
    ctx.write_csv("path_history.csv", &res.path_history)?;
    Ok(Payload::MountainPass(MountainPassPayload {
        preset: preset_name,
        params,
        gamma,
        regime: res.regime,
        ring: res.ring,
        level: res.level,
        energy: split,
        residual_norm: res.residual_norm,
        weak_residual: weak,
        iterations: res.iterations,
        converged: res.converged,
        concentration_index: res.concentration_index,
        bubble_fit: res.bubble_fit,
        pohozaev,
        nonexistence,
        path_levels: res.path_levels,
        history: res.path_history,
    }))
}

/// The interior bubble centered at `x_N = 1` solves the critical problem with
/// `ρ ≡ 1`, `a = N(N-2)` and the signed boundary coefficient of its own flux.
fn pohozaev_bubble(ctx: &mut Ctx) -> Result<Payload> {
    let g = ctx.grid()?;
    let epsilon = ctx.cfg.problem.epsilon.unwrap_or(0.1);
    let bubble = ctx.core(InstantonParams::new(BubbleKind::InteriorBubble, epsilon, 1.0))?;
    let ex = ctx.core(critical_exponents(g.dim()))?;
    let params = ProblemParams::new(
        ctx.core(bubble.interior_coefficient(g.dim()))?,
        ctx.core(bubble.boundary_coefficient(g.dim()))?,
        ex.two_star,
        ex.two_lower,
    );
    let dim = g.dim();
    let field = ctx.core(interpolate_analytic(&g, false, |r, z| bubble.eval(dim, r, z)))?;
    let report = ctx.core(pohozaev_eval(&field, &params, &Weight::unit()))?;
    Ok(Payload::Pohozaev(PohozaevPayload { epsilon, params, report }))
}

#[derive(Serialize)]
struct NonexistenceCsvRow<'a> {
    field: &'a str,
    relation_residual: f64,
    obstruction_value: f64,
}

fn nonexistence(ctx: &mut Ctx) -> Result<Payload> {
    let g = ctx.grid()?;
    let dim = g.dim();
    let gamma = ctx.gamma(2.0);
    let weight = Weight::power(gamma);
    let ex = ctx.core(critical_exponents(dim))?;
    let (ps, ql) = ctx.core(critical_exponents_exact(dim))?;
    let (ca, cb) = ctx.core(criticality_coefficients_exact(dim, ps, ql))?;
    let params = ProblemParams::new(
        ctx.cfg.problem.a.unwrap_or(1.0),
        ctx.cfg.problem.b.unwrap_or(1.0),
        ex.two_star,
        ex.two_lower,
    );
    let mut fields: Vec<(String, Field)> =
        ctx.suite(&g)?.into_iter().enumerate().map(|(k, f)| (format!("bump-{k}"), f)).collect();
    let bubble = InstantonParams::interior(1.0);
    fields.push(("interior-bubble".into(), ctx.core(interpolate_analytic(&g, true, |r, z| bubble.eval(dim, r, z)))?));
    let mut rows = Vec::with_capacity(fields.len());
    for (name, f) in &fields {
        rows.push(NonexistenceRow { field: name.clone(), probe: ctx.core(nonexistence_probe(f, &params, &weight))? });
    }
    let csv_rows: Vec<NonexistenceCsvRow> = rows
        .iter()
        .map(|r| NonexistenceCsvRow {
            field: &r.field,
            relation_residual: r.probe.relation_residual,
            obstruction_value: r.probe.obstruction_value,
        })
        .collect();
    ctx.write_csv("nonexistence.csv", &csv_rows)?;
    Ok(Payload::Nonexistence(NonexistencePayload {
        gamma,
        params,
        coefficient_a: ca.to_string(),
        coefficient_b: cb.to_string(),
        coefficients_vanish: *ca.numer() == 0 && *cb.numer() == 0,
        all_obstructed: rows.iter().all(|r| r.probe.obstruction_value > 0.0),
        rows,
    }))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn instanton(ctx: &mut Ctx) -> Result<Payload> {
    let dim = ctx.cfg.grid.dim;
    let boundary_points = [0.25, 0.5, 1.0, 2.0].map(|r| (r, 0.0));
    let interior_points = [(0.5, 0.5), (1.0, 1.5), (2.0, 0.7), (0.25, 2.0)];
    let mut rows = Vec::new();
    let mut orders = Vec::new();
    for (label, bubble) in [("interior", InstantonParams::interior(1.0)), ("boundary", InstantonParams::boundary(1.0))] {
        let (mut int_max, mut bd_max) = (Vec::new(), Vec::new());
        for &h in &INSTANTON_STEPS {
            let mut im: f64 = 0.0;
            for &pt in &interior_points {
                im = im.max(ctx.core(instanton_pde_residual(&bubble, dim, pt, h))?.interior.unwrap_or(0.0));
            }
            let mut bm: f64 = 0.0;
            for &pt in &boundary_points {
                bm = bm.max(ctx.core(instanton_pde_residual(&bubble, dim, pt, h))?.boundary.unwrap_or(0.0));
            }
            rows.push(InstantonRow { bubble: label.into(), h, interior_max: im, boundary_max: bm });
            int_max.push(im);
            bd_max.push(bm);
        }
        orders.push(InstantonOrder {
            bubble: label.into(),
            interior_order: log_slope(&INSTANTON_STEPS, &int_max),
            boundary_order: log_slope(&INSTANTON_STEPS, &bd_max),
        });
    }
    let bubble = InstantonParams::boundary(1.0);
    let expected = dim as f64 - 2.0;
    let mut coefficients = Vec::new();
    for r in [0.0, 0.5, 1.0, 2.0] {
        coefficients.push((r, ctx.core(bubble.boundary_coefficient_at(dim, r))?));
    }
    let err = coefficients.iter().map(|(_, c)| (c - expected).abs() / expected).fold(0.0, f64::max);
    ctx.write_csv("instanton.csv", &rows)?;
    Ok(Payload::Instanton(InstantonPayload {
        dim,
        rows,
        orders,
        boundary_coefficients: coefficients,
        expected_coefficient: expected,
        coefficient_relative_error: err,
    }))
}

/// Solves `a = 0`, `ρ = (1+x_N)²` on the configured grid and on its
/// refinement, and evaluates the transformed Robin residuals on both.
fn robin(ctx: &mut Ctx) -> Result<Payload> {
    let params = ProblemParams::new(0.0, ctx.cfg.problem.b.unwrap_or(1.0), 2.0, ctx.cfg.problem.q.unwrap_or(3.0));
    let weight = Weight::power(ctx.gamma(2.0));
    let mut levels = Vec::new();
    for factor in [1, 2] {
        let mut spec = ctx.cfg.grid.spec();
        spec.nr *= factor;
        spec.nz *= factor;
        let g = ctx.core(spec.build())?;
        let res = solve(ctx, &params, &weight, &g)?;
        let residual = ctx.core(robin_transform_check(&res.solution, &params, &weight))?;
        if factor == 1 {
            ctx.write_snapshot("solution.txt", &res.solution)?;
        } else {
            ctx.write_snapshot("solution_refined.txt", &res.solution)?;
        }
        levels.push(RobinLevel {
            nr: spec.nr,
            nz: spec.nz,
            level: res.level,
            residual_norm: res.residual_norm,
            residual,
        });
    }
    let orders = |f: fn(&RobinLevel) -> f64| -> Vec<f64> { levels.windows(2).map(|w| (f(&w[0]) / f(&w[1])).log2()).collect() };
    Ok(Payload::Robin(RobinPayload {
        params,
        interior_orders: orders(|l| l.residual.interior),
        boundary_orders: orders(|l| l.residual.boundary),
        levels,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in Scenario::NAMES {
            let s: Scenario = name.parse().unwrap();
            assert_eq!(s.name(), name);
            assert_eq!(s.to_string(), name);
        }
        assert!(matches!("thm19".parse::<Scenario>(), Err(ConfigError::UnknownScenario(_))));
    }

    #[test]
    fn commands_cover_cli() {
        let mut cmds: Vec<&str> = Scenario::NAMES.iter().map(|n| n.parse::<Scenario>().unwrap().command()).collect();
        cmds.sort();
        cmds.dedup();
        assert_eq!(cmds.len(), 7);
    }

    #[test]
    fn log_slope_recovers_power() {
        let xs = [0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((log_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
