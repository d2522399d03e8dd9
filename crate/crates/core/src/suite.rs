//! Seeded families of smooth test fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::Result;
use crate::grid::{interpolate_analytic, AxisymGrid, Field};

/// One ring Gaussian `A exp(-((r-r_c)² + (z-z_c)²)/w²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingGaussian {
    pub amplitude: f64,
    pub r_center: f64,
    pub z_center: f64,
    pub width: f64,
}

impl RingGaussian {
    pub fn eval(&self, r: f64, z: f64) -> f64 {
        let d2 = (r - self.r_center).powi(2) + (z - self.z_center).powi(2);
        self.amplitude * (-d2 / (self.width * self.width)).exp()
    }
}

/// Draws 1–5 ring Gaussians with centres in the inner half of the box and
/// widths between `max(4h, L/20)` and `L/4`, `L = min(R, H)`.
pub fn random_bump_params(grid: &AxisymGrid, rng: &mut impl Rng) -> Vec<RingGaussian> {
    let l = grid.r_max().min(grid.z_max());
    let w_min = (4.0 * grid.hr().max(grid.hz())).max(0.05 * l).min(0.2 * l);
    let w_max = 0.25 * l;
    let count = rng.gen_range(1..=5);
    (0..count)
        .map(|_| RingGaussian {
            amplitude: rng.gen_range(0.2..1.0),
            r_center: rng.gen_range(0.0..0.5 * grid.r_max()),
            z_center: rng.gen_range(0.0..0.5 * grid.z_max()),
            width: rng.gen_range(w_min..w_max),
        })
        .collect()
}

/// Tapered sum of ring Gaussians.
pub fn bump_field(grid: &Arc<AxisymGrid>, bumps: &[RingGaussian]) -> Result<Field> {
    interpolate_analytic(grid, true, |r, z| bumps.iter().map(|b| b.eval(r, z)).sum())
}

/// The `index`-th field of the suite with the given seed; each index owns an
/// independent ChaCha stream, so members do not depend on the suite size.
pub fn suite_member(grid: &Arc<AxisymGrid>, seed: u64, index: u64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    bump_field(grid, &random_bump_params(grid, &mut rng))
}

/// `count` seeded random bump fields.
pub fn bump_suite(grid: &Arc<AxisymGrid>, seed: u64, count: usize) -> Result<Vec<Field>> {
    (0..count as u64).map(|k| suite_member(grid, seed, k)).collect()
}
