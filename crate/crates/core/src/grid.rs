//! Truncated axisymmetric grids on `[0,R]×[0,H]` in `(r, x_N)` and nodal fields.
//!
//! A [`Field`] stores nodal values; every integral treats it as its bilinear
//! (Q1) interpolant and integrates against the measure `σ_{N-2} r^{N-2} dr dz`
//! with tensor Gauss rules per cell. Gauss points never touch the axis, and
//! the rules are exact for the polynomial integrands of bilinear fields in low
//! dimensions, so the continuum inequalities apply to the interpolant
//! verbatim.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::constants::sphere_measure;
use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::GaussRule;
use crate::weight::Weight;

/// Maximum number of fields a single quadrature map may combine.
pub const MAX_FIELDS: usize = 4;

/// Grid dimensions, serializable for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub r_max: f64,
    pub z_max: f64,
    pub nr: usize,
    pub nz: usize,
}

impl GridSpec {
    pub fn new(dim: usize, r_max: f64, z_max: f64, nr: usize, nz: usize) -> Self {
        GridSpec { dim, r_max, z_max, nr, nz }
    }

    pub fn build(&self) -> Result<Arc<AxisymGrid>> {
        AxisymGrid::new(self.dim, self.r_max, self.z_max, self.nr, self.nz)
    }
}

#[derive(Debug)]
pub struct AxisymGrid {
    spec: GridSpec,
    hr: f64,
    hz: f64,
    sigma: f64,
    // Per radial segment i: Gauss abscissae and σ r^{N-2} h_r w_a.
    seg_r: Vec<f64>,
    seg_w: Vec<f64>,
    // Per vertical segment j: Gauss abscissae and h_z w_b.
    seg_z: Vec<f64>,
    seg_wz: Vec<f64>,
    rule_r: GaussRule,
    rule_z: GaussRule,
    radial_weights: Vec<f64>,
    vertical_weights: Vec<f64>,
}

/// `make_grid`.
pub fn make_grid(dim: usize, r_max: f64, z_max: f64, nr: usize, nz: usize) -> Result<Arc<AxisymGrid>> {
    AxisymGrid::new(dim, r_max, z_max, nr, nz)
}

impl AxisymGrid {
    pub fn new(dim: usize, r_max: f64, z_max: f64, nr: usize, nz: usize) -> Result<Arc<Self>> {
        if dim < 3 {
            return Err(Error::Argument(format!("grid dimension N = {dim} must be >= 3")));
        }
        if !(r_max > 0.0) || !(z_max > 0.0) || !r_max.is_finite() || !z_max.is_finite() {
            return Err(Error::Argument(format!("truncation sizes must be positive (R = {r_max}, H = {z_max})")));
        }
        if nr < 8 || nz < 8 {
            return Err(Error::Argument(format!("need at least 8 cells per direction (nr = {nr}, nz = {nz})")));
        }
        let hr = r_max / nr as f64;
        let hz = z_max / nz as f64;
        let sigma = sphere_measure(dim - 1);
        let m = dim as i32 - 2;

        let rule_r = GaussRule::new(3.max((dim + 3) / 2));
        let rule_z = GaussRule::new(3);
        let mut seg_r = Vec::with_capacity(nr * rule_r.len());
        let mut seg_w = Vec::with_capacity(nr * rule_r.len());
        for i in 0..nr {
            for (x, w) in rule_r.nodes.iter().zip(&rule_r.weights) {
                let r = (i as f64 + x) * hr;
                seg_r.push(r);
                seg_w.push(sigma * r.powi(m) * hr * w);
            }
        }
        let mut seg_z = Vec::with_capacity(nz * rule_z.len());
        let mut seg_wz = Vec::with_capacity(nz * rule_z.len());
        for j in 0..nz {
            for (x, w) in rule_z.nodes.iter().zip(&rule_z.weights) {
                seg_z.push((j as f64 + x) * hz);
                seg_wz.push(hz * w);
            }
        }

        // Hat-function moments σ ∫ φ_i r^{N-2} dr (exact: polynomial of degree N-1).
        let moment_rule = GaussRule::new(dim / 2 + 1);
        let mut radial_weights = vec![0.0; nr + 1];
        for i in 0..nr {
            for (x, w) in moment_rule.nodes.iter().zip(&moment_rule.weights) {
                let r = (i as f64 + x) * hr;
                let mass = sigma * r.powi(m) * hr * w;
                radial_weights[i] += mass * (1.0 - x);
                radial_weights[i + 1] += mass * x;
            }
        }
        let mut vertical_weights = vec![hz; nz + 1];
        vertical_weights[0] = 0.5 * hz;
        vertical_weights[nz] = 0.5 * hz;

        Ok(Arc::new(AxisymGrid {
            spec: GridSpec { dim, r_max, z_max, nr, nz },
            hr,
            hz,
            sigma,
            seg_r,
            seg_w,
            seg_z,
            seg_wz,
            rule_r,
            rule_z,
            radial_weights,
            vertical_weights,
        }))
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn dim(&self) -> usize {
        self.spec.dim
    }
    pub fn r_max(&self) -> f64 {
        self.spec.r_max
    }
    pub fn z_max(&self) -> f64 {
        self.spec.z_max
    }
    pub fn nr(&self) -> usize {
        self.spec.nr
    }
    pub fn nz(&self) -> usize {
        self.spec.nz
    }
    pub fn hr(&self) -> f64 {
        self.hr
    }
    pub fn hz(&self) -> f64 {
        self.hz
    }
    /// Surface measure of the unit sphere `S^{N-2}` of `R^{N-1}`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn n_nodes(&self) -> usize {
        (self.spec.nr + 1) * (self.spec.nz + 1)
    }
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.spec.nr + 1) + i
    }
    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.hr
    }
    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.hz
    }
    /// Nodes on `r = R` or `z = H`, where admissible fields vanish.
    #[inline]
    pub fn is_truncation_node(&self, i: usize, j: usize) -> bool {
        i == self.spec.nr || j == self.spec.nz
    }
    /// `σ ∫ φ_i r^{N-2} dr` for the radial hat function of node `i`.
    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }
    /// Trapezoid weights in `z`.
    pub fn vertical_weights(&self) -> &[f64] {
        &self.vertical_weights
    }
    /// Nodal (lumped) volume weight of node `(i, j)`.
    pub fn nodal_volume_weight(&self, i: usize, j: usize) -> f64 {
        self.radial_weights[i] * self.vertical_weights[j]
    }

    pub fn same_as(&self, other: &AxisymGrid) -> bool {
        self.spec == other.spec
    }

    /// Visits every volume quadrature point of every cell, rows in parallel,
    /// and sums `f` with a fixed (row-major) reduction order.
    pub(crate) fn sum_volume_points<F>(&self, f: F) -> f64
    where
        F: Fn(&QuadPoint) -> f64 + Sync,
    {
        let nz = self.spec.nz;
        let row_sums: Vec<f64> = (0..nz).into_par_iter().map(|j| self.row_sum(j, &f)).collect();
        row_sums.iter().sum()
    }

    fn row_sum<F>(&self, j: usize, f: &F) -> f64
    where
        F: Fn(&QuadPoint) -> f64,
    {
        let mut acc = 0.0;
        for i in 0..self.spec.nr {
            self.for_cell_points(i, j, |qp| acc += f(qp));
        }
        acc
    }

    /// Visits the volume quadrature points of cell `(i, j)` in a fixed order.
    #[inline]
    pub(crate) fn for_cell_points(&self, i: usize, j: usize, mut f: impl FnMut(&QuadPoint)) {
        let nqr = self.rule_r.len();
        let nqz = self.rule_z.len();
        let corners = [self.idx(i, j), self.idx(i + 1, j), self.idx(i, j + 1), self.idx(i + 1, j + 1)];
        for b in 0..nqz {
            let y = self.rule_z.nodes[b];
            let z = self.seg_z[j * nqz + b];
            let wz = self.seg_wz[j * nqz + b];
            for a in 0..nqr {
                let x = self.rule_r.nodes[a];
                let r = self.seg_r[i * nqr + a];
                let w = self.seg_w[i * nqr + a] * wz;
                f(&QuadPoint::new(corners, x, y, r, z, w, self.hr, self.hz));
            }
        }
    }

    /// Per-cell accumulation of basis-function moments: for each quadrature
    /// point `f` returns 4 corner contributions; the result is scattered into a
    /// nodal vector in a fixed order.
    pub(crate) fn assemble_volume<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&QuadPoint) -> [f64; 4] + Sync,
    {
        let nr = self.spec.nr;
        let rows: Vec<Vec<[f64; 4]>> = (0..self.spec.nz)
            .into_par_iter()
            .map(|j| {
                let mut cells = vec![[0.0; 4]; nr];
                for (i, cell) in cells.iter_mut().enumerate() {
                    self.for_cell_points(i, j, |qp| {
                        let c = f(qp);
                        for k in 0..4 {
                            cell[k] += c[k];
                        }
                    });
                }
                cells
            })
            .collect();
        let mut out = vec![0.0; self.n_nodes()];
        for (j, cells) in rows.iter().enumerate() {
            for (i, c) in cells.iter().enumerate() {
                out[self.idx(i, j)] += c[0];
                out[self.idx(i + 1, j)] += c[1];
                out[self.idx(i, j + 1)] += c[2];
                out[self.idx(i + 1, j + 1)] += c[3];
            }
        }
        out
    }

    /// Visits boundary (`z = 0`) quadrature points: `(r, weight, left node, right node, x)`.
    pub(crate) fn for_boundary_points(&self, mut f: impl FnMut(f64, f64, usize, usize, f64)) {
        let nqr = self.rule_r.len();
        for i in 0..self.spec.nr {
            for a in 0..nqr {
                let x = self.rule_r.nodes[a];
                f(self.seg_r[i * nqr + a], self.seg_w[i * nqr + a], i, i + 1, x);
            }
        }
    }

    /// Quadrature of a closed-form integrand against the volume measure.
    pub fn integrate_fn(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
        self.sum_volume_points(|qp| qp.w * f(qp.r, qp.z))
    }
}

/// One volume quadrature point of a Q1 cell.
pub(crate) struct QuadPoint {
    pub corners: [usize; 4],
    pub r: f64,
    pub z: f64,
    /// Full measure weight `σ r^{N-2} dr dz`.
    pub w: f64,
    pub phi: [f64; 4],
    pub dphi_r: [f64; 4],
    pub dphi_z: [f64; 4],
}

impl QuadPoint {
    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn new(corners: [usize; 4], x: f64, y: f64, r: f64, z: f64, w: f64, hr: f64, hz: f64) -> Self {
        let phi = [(1.0 - x) * (1.0 - y), x * (1.0 - y), (1.0 - x) * y, x * y];
        let dphi_r = [-(1.0 - y) / hr, (1.0 - y) / hr, -y / hr, y / hr];
        let dphi_z = [-(1.0 - x) / hz, -x / hz, (1.0 - x) / hz, x / hz];
        QuadPoint { corners, r, z, w, phi, dphi_r, dphi_z }
    }

    #[inline]
    pub fn value(&self, u: &[f64]) -> f64 {
        (0..4).map(|k| self.phi[k] * u[self.corners[k]]).sum()
    }

    #[inline]
    pub fn grad(&self, u: &[f64]) -> (f64, f64) {
        let mut gr = 0.0;
        let mut gz = 0.0;
        for k in 0..4 {
            let v = u[self.corners[k]];
            gr += self.dphi_r[k] * v;
            gz += self.dphi_z[k] * v;
        }
        (gr, gz)
    }
}

/// Values (and gradients) of several interpolated fields at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct PointData {
    pub r: f64,
    pub z: f64,
    pub values: [f64; MAX_FIELDS],
    pub grad_r: [f64; MAX_FIELDS],
    pub grad_z: [f64; MAX_FIELDS],
}

/// Nodal field on an [`AxisymGrid`], row-major from `z = 0` upward.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<AxisymGrid>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.values == other.values
    }
}

impl Field {
    pub fn zeros(grid: &Arc<AxisymGrid>) -> Self {
        Field { grid: Arc::clone(grid), values: vec![0.0; grid.n_nodes()] }
    }

    pub fn constant(grid: &Arc<AxisymGrid>, c: f64) -> Self {
        Field { grid: Arc::clone(grid), values: vec![c; grid.n_nodes()] }
    }

    pub fn from_values(grid: &Arc<AxisymGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Argument(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerics(format!("field value {v}")));
        }
        Ok(Field { grid: Arc::clone(grid), values })
    }

    /// Samples `f(r, z)` at the nodes without validation.
    pub fn from_fn(grid: &Arc<AxisymGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_nodes());
        for j in 0..=grid.nz() {
            for i in 0..=grid.nr() {
                values.push(f(grid.r(i), grid.z(j)));
            }
        }
        Field { grid: Arc::clone(grid), values }
    }

    pub fn grid(&self) -> &Arc<AxisymGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid.same_as(&other.grid)
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Argument("fields live on different grids".into()))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: Arc::clone(&self.grid), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Field { grid: Arc::clone(&self.grid), values }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest absolute value on the `r = R` and `z = H` rows.
    pub fn truncation_residue(&self) -> f64 {
        let g = &self.grid;
        let mut m = 0.0f64;
        for j in 0..=g.nz() {
            m = m.max(self.at(g.nr(), j).abs());
        }
        for i in 0..=g.nr() {
            m = m.max(self.at(i, g.nz()).abs());
        }
        m
    }

    /// Zeroes the `r = R` and `z = H` rows.
    pub fn enforce_truncation(&mut self) {
        let g = Arc::clone(&self.grid);
        for j in 0..=g.nz() {
            self.values[g.idx(g.nr(), j)] = 0.0;
        }
        for i in 0..=g.nr() {
            self.values[g.idx(i, g.nz())] = 0.0;
        }
    }

    /// Bilinear interpolant at `(r, z)`; zero outside the grid.
    pub fn sample(&self, r: f64, z: f64) -> f64 {
        let g = &self.grid;
        if r < 0.0 || z < 0.0 || r > g.r_max() || z > g.z_max() {
            return 0.0;
        }
        let fr = (r / g.hr()).min(g.nr() as f64);
        let fz = (z / g.hz()).min(g.nz() as f64);
        let i = (fr.floor() as usize).min(g.nr() - 1);
        let j = (fz.floor() as usize).min(g.nz() - 1);
        let x = fr - i as f64;
        let y = fz - j as f64;
        (1.0 - x) * (1.0 - y) * self.at(i, j)
            + x * (1.0 - y) * self.at(i + 1, j)
            + (1.0 - x) * y * self.at(i, j + 1)
            + x * y * self.at(i + 1, j + 1)
    }
}

fn check_fields(fields: &[&Field]) -> Result<Arc<AxisymGrid>> {
    let first = fields.first().ok_or_else(|| Error::Argument("no fields given".into()))?;
    if fields.len() > MAX_FIELDS {
        return Err(Error::Argument(format!("at most {MAX_FIELDS} fields per quadrature map")));
    }
    for f in &fields[1..] {
        first.check_same_grid(f)?;
    }
    Ok(Arc::clone(first.grid()))
}

/// `∫ u dx` of the interpolant over the truncated half-space.
pub fn volume_integral(field: &Field) -> Result<f64> {
    volume_integral_with(&[field], |p| p.values[0])
}

/// `∫ f(r, z, u₁, …, ∇u₁, …) dx` over the interpolants of `fields`.
pub fn volume_integral_with<F>(fields: &[&Field], f: F) -> Result<f64>
where
    F: Fn(&PointData) -> f64 + Sync,
{
    let grid = check_fields(fields)?;
    let vals: Vec<&[f64]> = fields.iter().map(|f| f.values()).collect();
    let total = grid.sum_volume_points(|qp| {
        let mut p = PointData {
            r: qp.r,
            z: qp.z,
            values: [0.0; MAX_FIELDS],
            grad_r: [0.0; MAX_FIELDS],
            grad_z: [0.0; MAX_FIELDS],
        };
        for (k, u) in vals.iter().enumerate() {
            p.values[k] = qp.value(u);
            let (gr, gz) = qp.grad(u);
            p.grad_r[k] = gr;
            p.grad_z[k] = gz;
        }
        qp.w * f(&p)
    });
    ensure_finite(total, "volume integral")
}

/// `∫_{x_N=0} u dx'` of the interpolant.
pub fn boundary_integral(field: &Field) -> Result<f64> {
    boundary_integral_with(&[field], |_, v| v[0])
}

/// `∫_{x_N=0} f(r, u₁(r,0), …) dx'`.
pub fn boundary_integral_with<F>(fields: &[&Field], f: F) -> Result<f64>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let grid = check_fields(fields)?;
    let mut vals = [0.0; MAX_FIELDS];
    let n = fields.len();
    let mut total = 0.0;
    grid.for_boundary_points(|r, w, left, right, x| {
        for (k, field) in fields.iter().enumerate() {
            let u = field.values();
            vals[k] = (1.0 - x) * u[left] + x * u[right];
        }
        total += w * f(r, &vals[..n]);
    });
    ensure_finite(total, "boundary integral")
}

/// Nodal second-order finite-difference gradient `(∂_r u, ∂_z u)`:
/// central differences inside, one-sided second-order stencils on the edges.
pub fn gradient(field: &Field) -> (Field, Field) {
    let g = field.grid();
    let (nr, nz) = (g.nr(), g.nz());
    let mut dr = Field::zeros(g);
    let mut dz = Field::zeros(g);
    let d = |a: f64, b: f64, c: f64, h: f64, pos: usize, n: usize| -> f64 {
        // a, b, c are u[k-1], u[k], u[k+1] for interior or the first/last three.
        if pos == 0 {
            (-3.0 * a + 4.0 * b - c) / (2.0 * h)
        } else if pos == n {
            (3.0 * c - 4.0 * b + a) / (2.0 * h)
        } else {
            (c - a) / (2.0 * h)
        }
    };
    for j in 0..=nz {
        for i in 0..=nr {
            let (ia, ib, ic) = if i == 0 {
                (0, 1, 2)
            } else if i == nr {
                (nr - 2, nr - 1, nr)
            } else {
                (i - 1, i, i + 1)
            };
            let (ja, jb, jc) = if j == 0 {
                (0, 1, 2)
            } else if j == nz {
                (nz - 2, nz - 1, nz)
            } else {
                (j - 1, j, j + 1)
            };
            let k = g.idx(i, j);
            dr.values[k] = d(field.at(ia, j), field.at(ib, j), field.at(ic, j), g.hr(), i, nr);
            dz.values[k] = d(field.at(i, ja), field.at(i, jb), field.at(i, jc), g.hz(), j, nz);
        }
    }
    (dr, dz)
}

/// Radial and vertical parts of `∫ ρ(x_N) |∇u|² dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyComponents {
    pub radial: f64,
    pub vertical: f64,
}

impl EnergyComponents {
    pub fn total(&self) -> f64 {
        self.radial + self.vertical
    }
}

/// `‖u‖² = ∫ ρ(x_N) |∇u|² dx`.
pub fn weighted_dirichlet_energy(field: &Field, weight: &Weight) -> Result<f64> {
    Ok(dirichlet_energy_components(field, weight)?.total())
}

pub fn dirichlet_energy_components(field: &Field, weight: &Weight) -> Result<EnergyComponents> {
    let u = field.values();
    let g = field.grid();
    let radial = g.sum_volume_points(|qp| {
        let (gr, _) = qp.grad(u);
        qp.w * weight.value(qp.z) * gr * gr
    });
    let vertical = g.sum_volume_points(|qp| {
        let (_, gz) = qp.grad(u);
        qp.w * weight.value(qp.z) * gz * gz
    });
    Ok(EnergyComponents {
        radial: ensure_finite(radial, "radial energy")?,
        vertical: ensure_finite(vertical, "vertical energy")?,
    })
}

/// `(∫ |u|^p dx)^{1/p}`.
pub fn lp_norm_volume(field: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Argument(format!("L^p exponent must be >= 1, got {p}")));
    }
    let u = field.values();
    let s = field.grid().sum_volume_points(|qp| qp.w * qp.value(u).abs().powf(p));
    Ok(ensure_finite(s, "volume L^p integral")?.powf(1.0 / p))
}

/// `(∫_{x_N=0} |u|^q dx')^{1/q}`.
pub fn lq_norm_boundary(field: &Field, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Argument(format!("L^q exponent must be >= 1, got {q}")));
    }
    Ok(boundary_integral_with(&[field], |_, v| v[0].abs().powf(q))?.powf(1.0 / q))
}

/// `∫ |u|^p dx` (no root).
pub fn volume_power_integral(field: &Field, p: f64) -> Result<f64> {
    let u = field.values();
    let s = field.grid().sum_volume_points(|qp| qp.w * qp.value(u).abs().powf(p));
    ensure_finite(s, "volume power integral")
}

/// `∫_{x_N=0} |u|^q dx'` (no root).
pub fn boundary_power_integral(field: &Field, q: f64) -> Result<f64> {
    boundary_integral_with(&[field], |_, v| v[0].abs().powf(q))
}

/// Smooth cosine cutoff: 1 on `[0, 0.9 L]`, falling to 0 at `L`.
pub fn taper_factor(s: f64, length: f64) -> f64 {
    let start = 0.9 * length;
    if s <= start {
        1.0
    } else if s >= length {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (s - start) / (length - start)).cos())
    }
}

/// Nodal sampling of `f`; with `taper` the outer 10% band in `r` and in `z`
/// is smoothly cut off so the field vanishes on `r = R` and `z = H`.
pub fn interpolate_analytic(grid: &Arc<AxisymGrid>, taper: bool, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
    let (rm, zm) = (grid.r_max(), grid.z_max());
    let mut field = Field::from_fn(grid, |r, z| {
        let v = f(r, z);
        if taper {
            v * taper_factor(r, rm) * taper_factor(z, zm)
        } else {
            v
        }
    });
    if let Some(v) = field.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numerics(format!("analytic sample evaluated to {v}")));
    }
    if taper {
        field.enforce_truncation();
    }
    Ok(field)
}

/// Writes the ASCII snapshot: a header line then `nz+1` rows of `nr+1`
/// values with 17 significant digits, from `z = 0` upward.
pub fn write_snapshot(field: &Field, mut out: impl Write) -> std::io::Result<()> {
    let g = field.grid();
    writeln!(
        out,
        "AXISYM N={} R={} H={} nr={} nz={} sigma={:.16e}",
        g.dim(),
        g.r_max(),
        g.z_max(),
        g.nr(),
        g.nz(),
        g.sigma()
    )?;
    let mut line = String::new();
    for j in 0..=g.nz() {
        line.clear();
        for i in 0..=g.nr() {
            if i > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{:.16e}", field.at(i, j));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn snapshot_string(field: &Field) -> String {
    let mut buf = Vec::new();
    write_snapshot(field, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("snapshot is ASCII")
}

/// Parses a snapshot written by [`write_snapshot`].
pub fn read_snapshot(input: impl BufRead) -> Result<Field> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Argument("empty snapshot".into()))?
        .map_err(|e| Error::Argument(e.to_string()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("AXISYM") {
        return Err(Error::Argument("snapshot header must start with AXISYM".into()));
    }
    let mut get = |key: &str| -> Result<String> {
        let tok = parts.next().ok_or_else(|| Error::Argument(format!("missing {key}")))?;
        tok.strip_prefix(&format!("{key}="))
            .map(str::to_owned)
            .ok_or_else(|| Error::Argument(format!("expected {key}=..., got {tok}")))
    };
    let parse_err = |e: &dyn std::fmt::Display| Error::Argument(format!("bad snapshot header: {e}"));
    let dim: usize = get("N")?.parse().map_err(|e| parse_err(&e))?;
    let r_max: f64 = get("R")?.parse().map_err(|e| parse_err(&e))?;
    let z_max: f64 = get("H")?.parse().map_err(|e| parse_err(&e))?;
    let nr: usize = get("nr")?.parse().map_err(|e| parse_err(&e))?;
    let nz: usize = get("nz")?.parse().map_err(|e| parse_err(&e))?;
    let sigma: f64 = get("sigma")?.parse().map_err(|e| parse_err(&e))?;
    let grid = AxisymGrid::new(dim, r_max, z_max, nr, nz)?;
    if (grid.sigma() - sigma).abs() > 1e-12 * sigma.abs() {
        return Err(Error::Argument(format!("sigma {sigma} does not match N = {dim}")));
    }
    let mut values = Vec::with_capacity(grid.n_nodes());
    for row in 0..=nz {
        let line = lines
            .next()
            .ok_or_else(|| Error::Argument(format!("snapshot truncated at row {row}")))?
            .map_err(|e| Error::Argument(e.to_string()))?;
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|e| parse_err(&e))?);
        }
        if values.len() - before != nr + 1 {
            return Err(Error::Argument(format!("row {row} has {} values", values.len() - before)));
        }
    }
    Field::from_values(&grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instanton::InstantonParams;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn constructor_arithmetic() {
        let g = make_grid(3, 1.0, 1.0, 8, 8).unwrap();
        assert_eq!(g.hr(), 0.125);
        assert_eq!(g.hz(), 0.125);
        assert_relative_eq!(g.sigma(), 2.0 * PI);
        let g4 = make_grid(4, 10.0, 20.0, 128, 256).unwrap();
        assert_relative_eq!(g4.sigma(), 4.0 * PI);
        assert!(matches!(make_grid(3, -1.0, 1.0, 8, 8), Err(Error::Argument(_))));
        assert!(make_grid(2, 1.0, 1.0, 8, 8).is_err());
        assert!(make_grid(3, 1.0, 1.0, 4, 8).is_err());
    }

    #[test]
    fn nodal_weights_sum_to_cylinder_volume() {
        for dim in 3..=6 {
            let g = make_grid(dim, 2.0, 3.0, 16, 8).unwrap();
            let total: f64 = g.radial_weights().iter().sum::<f64>() * g.vertical_weights().iter().sum::<f64>();
            let exact = g.sigma() * 2.0f64.powi(dim as i32 - 1) / (dim as f64 - 1.0) * 3.0;
            assert_relative_eq!(total, exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn unit_cylinder_integrals() {
        let g = make_grid(3, 1.0, 1.0, 8, 8).unwrap();
        let one = Field::constant(&g, 1.0);
        assert_relative_eq!(volume_integral(&one).unwrap(), PI, max_relative = 1e-14);
        assert_relative_eq!(boundary_integral(&one).unwrap(), PI, max_relative = 1e-14);
        let zero = Field::zeros(&g);
        assert_eq!(volume_integral(&zero).unwrap(), 0.0);
        assert_eq!(boundary_integral(&zero).unwrap(), 0.0);
    }

    #[test]
    fn bilinear_integrands_are_exact() {
        // ∫_0^2 ∫_0^3 (a + b r)(c + d z) r dr dz · 2π
        let g = make_grid(3, 2.0, 3.0, 8, 12).unwrap();
        let f = Field::from_fn(&g, |r, z| (1.0 + 2.0 * r) * (0.5 - z));
        let exact = 2.0 * PI * (2.0 + 2.0 * 8.0 / 3.0) * (1.5 - 4.5);
        assert_relative_eq!(volume_integral(&f).unwrap(), exact, max_relative = 1e-13);
    }

    #[test]
    fn gaussian_exponential_integral() {
        let g = make_grid(3, 12.0, 12.0, 256, 256).unwrap();
        let f = interpolate_analytic(&g, false, |r, z| (-r * r - z).exp()).unwrap();
        assert_relative_eq!(volume_integral(&f).unwrap(), PI, max_relative = 1e-3);
        let b = interpolate_analytic(&g, false, |r, _| (-r * r).exp()).unwrap();
        assert_relative_eq!(boundary_integral(&b).unwrap(), PI, max_relative = 1e-3);
    }

    #[test]
    fn norms_of_gaussian_exponential() {
        let g = make_grid(3, 12.0, 12.0, 256, 256).unwrap();
        let f = interpolate_analytic(&g, false, |r, z| (-r * r - z).exp()).unwrap();
        assert_relative_eq!(lp_norm_volume(&f, 2.0).unwrap(), (PI / 4.0).sqrt(), max_relative = 1e-3);
        assert_relative_eq!(lq_norm_boundary(&f, 2.0).unwrap(), (PI / 2.0).sqrt(), max_relative = 1e-3);
        assert_eq!(lp_norm_volume(&Field::zeros(&g), 3.0).unwrap(), 0.0);
        assert!(lp_norm_volume(&f, 0.5).is_err());
        assert!(lq_norm_boundary(&f, 0.0).is_err());
        let c = 3.7;
        assert_relative_eq!(
            lp_norm_volume(&f.scaled(-c), 3.0).unwrap(),
            c * lp_norm_volume(&f, 3.0).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn nodal_gradient_exactness() {
        let g = make_grid(3, 1.0, 1.0, 8, 8).unwrap();
        let (dr, dz) = gradient(&Field::from_fn(&g, |r, _| r));
        assert!(dr.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(dz.values().iter().all(|v| v.abs() < 1e-12));
        let (_, dz) = gradient(&Field::from_fn(&g, |_, z| z * z));
        for j in 0..=8 {
            for i in 0..=8 {
                assert!((dz.at(i, j) - 2.0 * g.z(j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bubble_gradient_converges_at_second_order() {
        let b = InstantonParams::boundary(1.0);
        let err = |n: usize| {
            let g = make_grid(3, 4.0, 4.0, n, n).unwrap();
            let f = interpolate_analytic(&g, false, |r, z| b.eval(3, r, z)).unwrap();
            let (dr, dz) = gradient(&f);
            let mut m = 0.0f64;
            for j in 0..=n {
                for i in 0..=n {
                    let (er, ez) = b.gradient(3, g.r(i), g.z(j));
                    m = m.max((dr.at(i, j) - er).abs()).max((dz.at(i, j) - ez).abs());
                }
            }
            m
        };
        let (e1, e2, e3) = (err(64), err(128), err(256));
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!((1.8..=2.5).contains(&o1), "order {o1}");
        assert!((1.8..=2.5).contains(&o2), "order {o2}");
    }

    #[test]
    fn energy_monotone_in_weight() {
        let g = make_grid(3, 6.0, 6.0, 32, 32).unwrap();
        let f = interpolate_analytic(&g, true, |r, z| (-(r * r) - z).exp()).unwrap();
        let e0 = weighted_dirichlet_energy(&f, &Weight::unit()).unwrap();
        let e2 = weighted_dirichlet_energy(&f, &Weight::power(2.0)).unwrap();
        assert!(e0 > 0.0 && e2 >= e0);
        assert_eq!(weighted_dirichlet_energy(&Field::zeros(&g), &Weight::power(2.0)).unwrap(), 0.0);
    }

    #[test]
    fn taper_behaviour() {
        let g = make_grid(3, 10.0, 10.0, 20, 20).unwrap();
        let one = interpolate_analytic(&g, false, |_, _| 1.0).unwrap();
        assert!(one.values().iter().all(|v| *v == 1.0));
        let b = InstantonParams::boundary(1.0);
        let t = interpolate_analytic(&g, true, |r, z| b.eval(3, r, z)).unwrap();
        assert_eq!(t.truncation_residue(), 0.0);
        for j in 0..=18 {
            for i in 0..=18 {
                assert_eq!(t.at(i, j), b.eval(3, g.r(i), g.z(j)));
            }
        }
        let p = interpolate_analytic(&g, false, |r, z| r * (10.0 - r) * (10.0 - z)).unwrap();
        assert!(p.truncation_residue() < 1e-12);
        assert!(matches!(interpolate_analytic(&g, false, |_, _| f64::NAN), Err(Error::Numerics(_))));
    }

    #[test]
    fn sampling_reproduces_nodes_and_vanishes_outside() {
        let g = make_grid(3, 2.0, 2.0, 8, 8).unwrap();
        let f = Field::from_fn(&g, |r, z| 1.0 + r + 2.0 * z + r * z);
        assert_relative_eq!(f.sample(0.5, 0.75), f.at(2, 3));
        assert_relative_eq!(f.sample(0.3, 0.1), 1.0 + 0.3 + 0.2 + 0.03, max_relative = 1e-14);
        assert_eq!(f.sample(2.5, 0.1), 0.0);
    }

    #[test]
    fn snapshot_round_trip() {
        let g = make_grid(3, 2.5, 1.0, 8, 9).unwrap();
        let f = Field::from_fn(&g, |r, z| (r * 1.37).sin() * (-z).exp() / 3.0);
        let text = snapshot_string(&f);
        assert!(text.starts_with("AXISYM N=3 R=2.5 H=1 nr=8 nz=9 sigma=6.2831853071795862e0\n"));
        assert_eq!(text.lines().count(), 11);
        let back = read_snapshot(text.as_bytes()).unwrap();
        assert_eq!(back, f);
        assert!(read_snapshot("AXISYM N=3".as_bytes()).is_err());
    }
}
