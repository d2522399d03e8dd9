//! Q1 finite-element operators on an [`AxisymGrid`]: the weighted stiffness
//! matrix, its Riesz map, and exact gradients of the power functionals.
//!
//! Nodes on `r = R` and `z = H` are constrained to zero; every other node,
//! including the axis and the `x_N = 0` row, is free.

use rayon::prelude::*;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::grid::{AxisymGrid, Field};
use crate::linalg::{self, BandCholesky, CgOutcome, CgSettings, StencilMatrix};
use crate::weight::Weight;

/// Corner offsets `(di, dj)` of the local Q1 basis, matching [`crate::grid`].
const CORNER: [(isize, isize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

/// Weighted stiffness `K_ab = ∫ ρ(x_N) ∇φ_a·∇φ_b dx` with its solve settings.
#[derive(Debug, Clone)]
pub struct Discretization {
    grid: Arc<AxisymGrid>,
    weight: Weight,
    stiffness: StencilMatrix,
    free: Vec<bool>,
    cg: CgSettings,
    factor: OnceLock<std::result::Result<BandCholesky, Error>>,
}

impl Discretization {
    pub fn new(grid: &Arc<AxisymGrid>, weight: &Weight) -> Self {
        let nr = grid.nr();
        let cells: Vec<Vec<[[f64; 4]; 4]>> = (0..grid.nz())
            .into_par_iter()
            .map(|j| {
                (0..nr)
                    .map(|i| {
                        let mut ke = [[0.0; 4]; 4];
                        grid.for_cell_points(i, j, |qp| {
                            let c = qp.w * weight.value(qp.z);
                            for (k, row) in ke.iter_mut().enumerate() {
                                for (l, e) in row.iter_mut().enumerate() {
                                    *e += c * (qp.dphi_r[k] * qp.dphi_r[l] + qp.dphi_z[k] * qp.dphi_z[l]);
                                }
                            }
                        });
                        ke
                    })
                    .collect()
            })
            .collect();
        let mut stiffness = StencilMatrix::zeros(nr, grid.nz());
        for (j, row) in cells.iter().enumerate() {
            for (i, ke) in row.iter().enumerate() {
                for (k, (dik, djk)) in CORNER.iter().enumerate() {
                    let node = grid.idx(i + *dik as usize, j + *djk as usize);
                    for (l, (dil, djl)) in CORNER.iter().enumerate() {
                        stiffness.add(node, dil - dik, djl - djk, ke[k][l]);
                    }
                }
            }
        }
        let mut free = vec![true; grid.n_nodes()];
        for j in 0..=grid.nz() {
            for i in 0..=nr {
                free[grid.idx(i, j)] = !grid.is_truncation_node(i, j);
            }
        }
        Discretization { grid: Arc::clone(grid), weight: weight.clone(), stiffness, free, cg: CgSettings::default(), factor: OnceLock::new() }
    }

    pub fn with_cg_settings(mut self, cg: CgSettings) -> Self {
        self.cg = cg;
        self
    }

    pub fn grid(&self) -> &Arc<AxisymGrid> {
        &self.grid
    }
    pub fn weight(&self) -> &Weight {
        &self.weight
    }
    pub fn stiffness(&self) -> &StencilMatrix {
        &self.stiffness
    }
    /// `true` for nodes off the truncation boundary.
    pub fn free(&self) -> &[bool] {
        &self.free
    }

    pub(crate) fn check_field(&self, u: &Field) -> Result<()> {
        if u.grid().same_as(&self.grid) {
            Ok(())
        } else {
            Err(Error::Argument("field does not live on the discretization grid".into()))
        }
    }

    /// `K u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.stiffness.apply(u)
    }

    /// `⟨u, v⟩_ρ = uᵀ K v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.stiffness.bilinear(u, v)
    }

    /// `‖u‖² = uᵀ K u`, equal to the quadrature of `ρ|∇u_h|²`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.inner(u, u)
    }

    /// Riesz representative `K⁻¹ f` of a dual vector on the free nodes, by a
    /// banded Cholesky factor computed on first use.
    pub fn riesz(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let factor = self.factor.get_or_init(|| BandCholesky::factor(&self.stiffness, &self.free));
        match factor {
            Ok(f) => f.solve(rhs),
            Err(e) => Err(e.clone()),
        }
    }

    /// Same as [`Discretization::riesz`] by Jacobi-preconditioned CG.
    pub fn riesz_cg(&self, rhs: &[f64], warm: Option<&[f64]>) -> Result<CgOutcome> {
        linalg::pcg(&self.stiffness, rhs, &self.free, warm, self.cg)
    }

    /// Zeroes the constrained entries of a nodal vector.
    pub fn restrict_free(&self, v: &mut [f64]) {
        v.iter_mut().zip(&self.free).for_each(|(x, f)| {
            if !f {
                *x = 0.0;
            }
        });
    }
}

/// `|t|^{p-2} t`, with value 0 at `t = 0`.
#[inline]
pub fn odd_power(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(p - 1.0)
    }
}

/// Nodal vector `∫ |u_h|^{p-2} u_h φ_a dx`, i.e. `(1/p) ∂/∂u_a ∫ |u_h|^p`.
pub fn volume_power_gradient(u: &Field, p: f64) -> Vec<f64> {
    let vals = u.values();
    u.grid().assemble_volume(|qp| {
        let s = qp.w * odd_power(qp.value(vals), p);
        [s * qp.phi[0], s * qp.phi[1], s * qp.phi[2], s * qp.phi[3]]
    })
}

/// Nodal vector `∫_{x_N=0} |u_h|^{q-2} u_h φ_a dx'`.
pub fn boundary_power_gradient(u: &Field, q: f64) -> Vec<f64> {
    let g = u.grid();
    let vals = u.values();
    let mut out = vec![0.0; g.n_nodes()];
    g.for_boundary_points(|_, w, left, right, x| {
        let v = (1.0 - x) * vals[left] + x * vals[right];
        let s = w * odd_power(v, q);
        out[left] += s * (1.0 - x);
        out[right] += s * x;
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{boundary_power_integral, interpolate_analytic, make_grid, volume_power_integral, weighted_dirichlet_energy};
    use approx::assert_relative_eq;

    fn bump(g: &Arc<AxisymGrid>) -> Field {
        interpolate_analytic(g, true, |r, z| (-(r - 1.0).powi(2) - 0.5 * z * z).exp() + 0.3 * (-r * r - z).exp()).unwrap()
    }

    #[test]
    fn stiffness_energy_matches_quadrature() {
        for (dim, gamma) in [(3, 0.0), (3, 3.0), (5, 1.5)] {
            let g = make_grid(dim, 6.0, 5.0, 24, 20).unwrap();
            let w = Weight::power(gamma);
            let d = Discretization::new(&g, &w);
            let u = bump(&g);
            assert_relative_eq!(
                d.energy(u.values()),
                weighted_dirichlet_energy(&u, &w).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn stiffness_is_symmetric_with_constant_kernel() {
        let g = make_grid(4, 3.0, 3.0, 10, 12).unwrap();
        let d = Discretization::new(&g, &Weight::power(2.0));
        let k = d.stiffness();
        for j in 0..=g.nz() {
            for i in 0..=g.nr() {
                let a = g.idx(i, j);
                let row_sum: f64 = (-1..=1).flat_map(|dj| (-1..=1).map(move |di| (di, dj))).map(|(di, dj)| k.get(a, di, dj)).sum();
                assert!(row_sum.abs() < 1e-10 * k.get(a, 0, 0).max(1e-300));
                if i < g.nr() {
                    assert_relative_eq!(k.get(a, 1, 0), k.get(g.idx(i + 1, j), -1, 0), max_relative = 1e-12);
                }
                if i < g.nr() && j < g.nz() {
                    assert_relative_eq!(k.get(a, 1, 1), k.get(g.idx(i + 1, j + 1), -1, -1), max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn power_gradients_match_directional_derivatives() {
        let g = make_grid(3, 5.0, 5.0, 16, 16).unwrap();
        let u = bump(&g);
        let v = interpolate_analytic(&g, true, |r, z| (0.3 * r).cos() * (-0.2 * z).exp()).unwrap();
        let t = 1e-5;
        for p in [2.0, 3.0, 4.5] {
            let gv = volume_power_gradient(&u, p);
            let fd = (volume_power_integral(&u.axpy(t, &v), p).unwrap() - volume_power_integral(&u.axpy(-t, &v), p).unwrap())
                / (2.0 * t);
            assert_relative_eq!(p * linalg::dot(&gv, v.values()), fd, max_relative = 1e-7);
            let gb = boundary_power_gradient(&u, p);
            let fd = (boundary_power_integral(&u.axpy(t, &v), p).unwrap()
                - boundary_power_integral(&u.axpy(-t, &v), p).unwrap())
                / (2.0 * t);
            assert_relative_eq!(p * linalg::dot(&gb, v.values()), fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn riesz_map_inverts_stiffness() {
        let g = make_grid(3, 8.0, 8.0, 32, 32).unwrap();
        let d = Discretization::new(&g, &Weight::power(3.0));
        let u = bump(&g);
        let f = d.apply(u.values());
        let out = d.riesz(&f).unwrap();
        let cg = d.riesz_cg(&f, None).unwrap();
        assert!(cg.relative_residual <= 1e-10);
        let err = out.iter().zip(u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10 * u.max_abs(), "err {err}");
        let diff = out.iter().zip(&cg.solution).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-6 * u.max_abs(), "diff {diff}");
    }
}
