//! Nine-point stencil matrices on the node grid and a Jacobi-preconditioned
//! conjugate-gradient solver.
//!
//! Reductions are chunked with a fixed chunk size and summed sequentially,
//! so results do not depend on the thread schedule.

use rayon::prelude::*;

use crate::error::{Error, Result};

const CHUNK: usize = 4096;

/// Row-major node grid of `(nr+1) × (nz+1)` unknowns with couplings to the
/// eight neighbours. Entry `k = (dj+1)*3 + (di+1)` of a row couples node
/// `(i, j)` to `(i+di, j+dj)`.
#[derive(Debug, Clone)]
pub struct StencilMatrix {
    nr: usize,
    nz: usize,
    coef: Vec<[f64; 9]>,
}

impl StencilMatrix {
    pub fn zeros(nr: usize, nz: usize) -> Self {
        StencilMatrix { nr, nz, coef: vec![[0.0; 9]; (nr + 1) * (nz + 1)] }
    }

    pub fn len(&self) -> usize {
        self.coef.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coef.is_empty()
    }

    #[inline]
    pub fn add(&mut self, row: usize, di: isize, dj: isize, value: f64) {
        self.coef[row][((dj + 1) * 3 + (di + 1)) as usize] += value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.coef.iter().map(|c| c[4]).collect()
    }

    pub fn get(&self, row: usize, di: isize, dj: isize) -> f64 {
        self.coef[row][((dj + 1) * 3 + (di + 1)) as usize]
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let w = self.nr + 1;
        let (nr, nz) = (self.nr, self.nz);
        y.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
            for (i, out) in row.iter_mut().enumerate() {
                let c = &self.coef[j * w + i];
                let mut acc = 0.0;
                for dj in -1isize..=1 {
                    let jj = j as isize + dj;
                    if jj < 0 || jj > nz as isize {
                        continue;
                    }
                    for di in -1isize..=1 {
                        let ii = i as isize + di;
                        if ii < 0 || ii > nr as isize {
                            continue;
                        }
                        let k = ((dj + 1) * 3 + (di + 1)) as usize;
                        acc += c[k] * x[jj as usize * w + ii as usize];
                    }
                }
                *out = acc;
            }
        });
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }
}

/// Deterministic parallel dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum())
        .collect();
    parts.iter().sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Stop once `‖b − Ax‖ ≤ rel_tol · ‖b‖`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        CgSettings { rel_tol: 1e-10, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` restricted to the nodes with `free[k]`; constrained
/// entries of the solution are zero.
pub fn pcg(a: &StencilMatrix, b: &[f64], free: &[bool], x0: Option<&[f64]>, settings: CgSettings) -> Result<CgOutcome> {
    let n = a.len();
    if b.len() != n || free.len() != n || x0.is_some_and(|x| x.len() != n) {
        return Err(Error::Argument("dimension mismatch in linear solve".into()));
    }
    let mask = |v: &mut [f64]| {
        v.par_iter_mut().zip(free.par_iter()).for_each(|(x, f)| {
            if !f {
                *x = 0.0;
            }
        })
    };
    let mut rhs = b.to_vec();
    mask(&mut rhs);
    let bnorm = norm2(&rhs);
    if bnorm == 0.0 {
        return Ok(CgOutcome { solution: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    if !bnorm.is_finite() {
        return Err(Error::Solver("non-finite right-hand side".into()));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .zip(free)
        .map(|(d, f)| if *f && *d > 0.0 { 1.0 / d } else { 0.0 })
        .collect();

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    mask(&mut x);
    let mut ax = vec![0.0; n];
    a.apply_into(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
    mask(&mut r);
    let target = settings.rel_tol * bnorm;
    let mut rnorm = norm2(&r);
    if rnorm <= target {
        return Ok(CgOutcome { solution: x, iterations: 0, relative_residual: rnorm / bnorm });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=settings.max_iter {
        a.apply_into(&p, &mut ap);
        mask(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver(format!("matrix not positive definite along search direction (pAp = {pap})")));
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(p.par_iter()).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(ap.par_iter()).for_each(|(r, q)| *r -= alpha * q);
        rnorm = norm2(&r);
        if rnorm <= target {
            return Ok(CgOutcome { solution: x, iterations: it, relative_residual: rnorm / bnorm });
        }
        z.par_iter_mut().zip(r.par_iter().zip(inv_diag.par_iter())).for_each(|(z, (r, d))| *z = r * d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::Solver(format!(
        "conjugate gradient did not reach {:.1e} in {} iterations (relative residual {:.3e})",
        settings.rel_tol,
        settings.max_iter,
        rnorm / bnorm
    )))
}

/// Banded Cholesky factor `L Lᵀ` of a [`StencilMatrix`] restricted to a
/// set of free nodes, ordered row-major.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n_full: usize,
    free_nodes: Vec<usize>,
    bw: usize,
    // Row k holds columns k-bw..=k at offsets 0..=bw.
    band: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &StencilMatrix, free: &[bool]) -> Result<Self> {
        let n_full = a.len();
        if free.len() != n_full {
            return Err(Error::Argument("mask length does not match matrix".into()));
        }
        let w = a.nr + 1;
        let mut local = vec![usize::MAX; n_full];
        let free_nodes: Vec<usize> = (0..n_full).filter(|k| free[*k]).collect();
        for (k, node) in free_nodes.iter().enumerate() {
            local[*node] = k;
        }
        let neighbours = |node: usize| {
            let (i, j) = ((node % w) as isize, (node / w) as isize);
            (-1isize..=1).flat_map(move |dj| (-1isize..=1).map(move |di| (di, dj))).filter_map(move |(di, dj)| {
                let (ii, jj) = (i + di, j + dj);
                (ii >= 0 && jj >= 0 && ii < w as isize && jj <= a.nz as isize)
                    .then(|| (di, dj, jj as usize * w + ii as usize))
            })
        };
        let mut bw = 0;
        for (k, node) in free_nodes.iter().enumerate() {
            for (_, _, nb) in neighbours(*node) {
                if local[nb] != usize::MAX && local[nb] < k {
                    bw = bw.max(k - local[nb]);
                }
            }
        }
        let n = free_nodes.len();
        let stride = bw + 1;
        let mut band = vec![0.0; n * stride];
        for (k, node) in free_nodes.iter().enumerate() {
            for (di, dj, nb) in neighbours(*node) {
                let c = local[nb];
                if c != usize::MAX && c <= k {
                    band[k * stride + c + bw - k] = a.get(*node, di, dj);
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let m0 = lo.max(j.saturating_sub(bw));
                let ri = i * stride + bw - i;
                let rj = j * stride + bw - j;
                let s: f64 = band[ri + m0..ri + j].iter().zip(&band[rj + m0..rj + j]).map(|(x, y)| x * y).sum();
                let v = band[ri + j] - s;
                if i == j {
                    if !(v > 0.0) {
                        return Err(Error::Solver(format!("stiffness matrix not positive definite at pivot {i}")));
                    }
                    band[ri + j] = v.sqrt();
                } else {
                    band[ri + j] = v / band[rj + j];
                }
            }
        }
        Ok(BandCholesky { n_full, free_nodes, bw, band })
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Solves on the free nodes; constrained entries of the result are zero.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n_full {
            return Err(Error::Argument("dimension mismatch in linear solve".into()));
        }
        let (bw, stride) = (self.bw, self.bw + 1);
        let n = self.free_nodes.len();
        let mut y: Vec<f64> = self.free_nodes.iter().map(|k| b[*k]).collect();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let ri = i * stride + bw - i;
            let s: f64 = self.band[ri + lo..ri + i].iter().zip(&y[lo..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / self.band[ri + i];
        }
        for i in (0..n).rev() {
            let ri = i * stride + bw - i;
            y[i] /= self.band[ri + i];
            let xi = y[i];
            let lo = i.saturating_sub(bw);
            for (m, l) in (lo..i).zip(&self.band[ri + lo..ri + i]) {
                y[m] -= l * xi;
            }
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Solver(format!("linear solve produced {v}")));
        }
        let mut x = vec![0.0; self.n_full];
        for (k, node) in self.free_nodes.iter().enumerate() {
            x[*node] = y[k];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shifted 5-point Laplacian with Dirichlet data on the last row and column.
    fn laplacian(n: usize) -> (StencilMatrix, Vec<bool>) {
        let mut a = StencilMatrix::zeros(n, n);
        let w = n + 1;
        for j in 0..=n {
            for i in 0..=n {
                let k = j * w + i;
                a.add(k, 0, 0, 4.0 + 0.1);
                if i > 0 {
                    a.add(k, -1, 0, -1.0);
                }
                if i < n {
                    a.add(k, 1, 0, -1.0);
                }
                if j > 0 {
                    a.add(k, 0, -1, -1.0);
                }
                if j < n {
                    a.add(k, 0, 1, -1.0);
                }
            }
        }
        let free = (0..w * w).map(|k| k % w != n && k / w != n).collect();
        (a, free)
    }

    #[test]
    fn solves_to_tolerance_and_respects_mask() {
        let (a, free) = laplacian(20);
        let b: Vec<f64> = (0..a.len()).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
        let out = pcg(&a, &b, &free, None, CgSettings::default()).unwrap();
        assert!(out.relative_residual <= 1e-10);
        let ax = a.apply(&out.solution);
        for k in 0..a.len() {
            if free[k] {
                assert!((ax[k] - b[k]).abs() < 1e-8);
            } else {
                assert_eq!(out.solution[k], 0.0);
            }
        }
        let warm = pcg(&a, &b, &free, Some(&out.solution), CgSettings::default()).unwrap();
        assert_eq!(warm.iterations, 0);
    }

    #[test]
    fn band_cholesky_agrees_with_cg() {
        let (a, free) = laplacian(15);
        let b: Vec<f64> = (0..a.len()).map(|k| ((k * 13) % 7) as f64 - 3.0).collect();
        let chol = BandCholesky::factor(&a, &free).unwrap();
        assert_eq!(chol.bandwidth(), 16);
        let x = chol.solve(&b).unwrap();
        let cg = pcg(&a, &b, &free, None, CgSettings { rel_tol: 1e-13, max_iter: 10_000 }).unwrap();
        for (u, v) in x.iter().zip(&cg.solution) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_and_mismatch() {
        let (a, free) = laplacian(8);
        let out = pcg(&a, &vec![0.0; a.len()], &free, None, CgSettings::default()).unwrap();
        assert!(out.solution.iter().all(|v| *v == 0.0));
        assert!(pcg(&a, &[1.0], &free, None, CgSettings::default()).is_err());
    }

    #[test]
    fn dot_is_deterministic() {
        let a: Vec<f64> = (0..100_000).map(|k| (k as f64).sin()).collect();
        let d1 = dot(&a, &a);
        let d2 = dot(&a, &a);
        assert_eq!(d1.to_bits(), d2.to_bits());
    }
}
