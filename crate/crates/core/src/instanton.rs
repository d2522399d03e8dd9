//! Closed-form bubbles: the interior Aubin–Talenti profile centred at
//! `(0, 1)` and the boundary (Escobar) profile centred at `(0, -ε)`.

use serde::{Deserialize, Serialize};

use crate::constants::critical_exponents;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BubbleKind {
    /// `ε^{(N-2)/2} [ε² + r² + (z-1)²]^{-(N-2)/2}`.
    InteriorBubble,
    /// `ε^{(N-2)/2} [r² + (z+ε)²]^{-(N-2)/2}`.
    BoundaryBubble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstantonParams {
    pub kind: BubbleKind,
    pub epsilon: f64,
    /// Multiplicative normalization λ.
    pub amplitude: f64,
}

impl InstantonParams {
    pub fn new(kind: BubbleKind, epsilon: f64, amplitude: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Argument(format!("bubble scale must be positive, got {epsilon}")));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::Argument(format!("bubble amplitude must be positive, got {amplitude}")));
        }
        Ok(InstantonParams { kind, epsilon, amplitude })
    }

    pub fn boundary(epsilon: f64) -> Self {
        InstantonParams { kind: BubbleKind::BoundaryBubble, epsilon, amplitude: 1.0 }
    }

    pub fn interior(epsilon: f64) -> Self {
        InstantonParams { kind: BubbleKind::InteriorBubble, epsilon, amplitude: 1.0 }
    }

    /// Squared distance-like denominator `D(r, z)` and its z-offset.
    fn denominator(&self, r: f64, z: f64) -> (f64, f64) {
        let e = self.epsilon;
        match self.kind {
            BubbleKind::InteriorBubble => {
                let dz = z - 1.0;
                (e * e + r * r + dz * dz, dz)
            }
            BubbleKind::BoundaryBubble => {
                let dz = z + e;
                (r * r + dz * dz, dz)
            }
        }
    }

    /// Value at `(r, z)` for ambient dimension `dim`.
    pub fn eval(&self, dim: usize, r: f64, z: f64) -> f64 {
        let m = (dim as f64 - 2.0) / 2.0;
        let (d, _) = self.denominator(r, z);
        self.amplitude * self.epsilon.powf(m) * d.powf(-m)
    }

    /// Analytic gradient `(∂_r u, ∂_z u)`.
    pub fn gradient(&self, dim: usize, r: f64, z: f64) -> (f64, f64) {
        let n = dim as f64;
        let m = (n - 2.0) / 2.0;
        let (d, dz) = self.denominator(r, z);
        // ∂u/∂x = -(N-2) λ ε^m D^{-N/2} · (x - centre)
        let common = -(n - 2.0) * self.amplitude * self.epsilon.powf(m) * d.powf(-n / 2.0);
        (common * r, common * dz)
    }

    /// Coefficient `c_int` with `-Δu = c_int u^{2*-1}`.
    pub fn interior_coefficient(&self, dim: usize) -> Result<f64> {
        let n = dim as f64;
        let ex = critical_exponents(dim)?;
        Ok(match self.kind {
            BubbleKind::InteriorBubble => n * (n - 2.0) * self.amplitude.powf(-(ex.two_star - 2.0)),
            BubbleKind::BoundaryBubble => 0.0,
        })
    }

    /// Signed coefficient `c_bd` with `-∂u/∂x_N = c_bd u^{2_*-1}` on `x_N = 0`,
    /// obtained by differentiating the closed form: `(N-2) λ^{2-2_*}` for the
    /// boundary bubble and `-(N-2) λ^{2-2_*}/ε` for the interior one.
    pub fn boundary_coefficient(&self, dim: usize) -> Result<f64> {
        let n = dim as f64;
        let ex = critical_exponents(dim)?;
        let base = (n - 2.0) * self.amplitude.powf(2.0 - ex.two_lower);
        Ok(match self.kind {
            BubbleKind::BoundaryBubble => base,
            BubbleKind::InteriorBubble => -base / self.epsilon,
        })
    }

    /// `-∂_z u(r, 0) / u(r, 0)^{2_*-1}` from the analytic derivative.
    pub fn boundary_coefficient_at(&self, dim: usize, r: f64) -> Result<f64> {
        let ex = critical_exponents(dim)?;
        let u = self.eval(dim, r, 0.0);
        let (_, dz) = self.gradient(dim, r, 0.0);
        Ok(-dz / u.powf(ex.two_lower - 1.0))
    }
}

/// Finite-difference residuals of the bubble PDEs at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstantonResidual {
    /// `|-Δ_h u - c_int u^{2*-1}|`, present when the point is interior (`z > h`).
    pub interior: Option<f64>,
    /// `|-∂_h u/∂z - c_bd u^{2_*-1}|`, present when the point is on `z = 0`.
    pub boundary: Option<f64>,
    pub c_int: f64,
    pub c_bd: f64,
}

/// Second-order axisymmetric finite-difference residuals
/// (`Δ = ∂_rr + (N-2)/r ∂_r + ∂_zz`, one-sided second-order `∂_z` on the boundary).
pub fn instanton_pde_residual(
    params: &InstantonParams,
    dim: usize,
    point: (f64, f64),
    h: f64,
) -> Result<InstantonResidual> {
    let (r, z) = point;
    if !(h > 0.0) {
        return Err(Error::Argument(format!("stencil width must be positive, got {h}")));
    }
    if r < 0.0 || z < 0.0 {
        return Err(Error::Argument(format!("point ({r}, {z}) lies outside the half-space")));
    }
    let ex = critical_exponents(dim)?;
    let c_int = params.interior_coefficient(dim)?;
    let c_bd = params.boundary_coefficient(dim)?;
    let u = |r: f64, z: f64| params.eval(dim, r, z);

    let interior = if z > h {
        if r < h {
            return Err(Error::Stencil(format!("radial stencil of width {h} crosses the axis at r = {r}")));
        }
        let n = dim as f64;
        let u0 = u(r, z);
        let d_rr = (u(r + h, z) - 2.0 * u0 + u(r - h, z)) / (h * h);
        let d_r = (u(r + h, z) - u(r - h, z)) / (2.0 * h);
        let d_zz = (u(r, z + h) - 2.0 * u0 + u(r, z - h)) / (h * h);
        let lap = d_rr + (n - 2.0) / r * d_r + d_zz;
        Some((-lap - c_int * u0.powf(ex.two_star - 1.0)).abs())
    } else {
        None
    };

    let boundary = if z == 0.0 {
        let u0 = u(r, 0.0);
        let d_z = (-3.0 * u0 + 4.0 * u(r, h) - u(r, 2.0 * h)) / (2.0 * h);
        Some((-d_z - c_bd * u0.powf(ex.two_lower - 1.0)).abs())
    } else {
        None
    };

    if interior.is_none() && boundary.is_none() {
        return Err(Error::Stencil(format!(
            "point ({r}, {z}) is neither on the boundary nor farther than h = {h} from it"
        )));
    }
    Ok(InstantonResidual { interior, boundary, c_int, c_bd })
}

/// Rescales a boundary bubble so that its Neumann constant equals `target`:
/// `λ = ((N-2)/target)^{1/(2_*-2)}`.
pub fn normalize_instanton_to_constant(
    params: &InstantonParams,
    dim: usize,
    target_bd_constant: f64,
) -> Result<InstantonParams> {
    if !(target_bd_constant > 0.0) || !target_bd_constant.is_finite() {
        return Err(Error::Domain(format!("target constant must be positive, got {target_bd_constant}")));
    }
    if params.kind != BubbleKind::BoundaryBubble {
        return Err(Error::Domain("only boundary bubbles carry a positive Neumann constant".into()));
    }
    let ex = critical_exponents(dim)?;
    let n = dim as f64;
    let amplitude = ((n - 2.0) / target_bd_constant).powf(1.0 / (ex.two_lower - 2.0));
    Ok(InstantonParams { amplitude, ..*params })
}
