//! The two ways of recovering the chemical concentration v from a step.

use crate::elliptic::{solve, HelmholtzProblem};
use crate::error::Result;
use crate::grid::{ensure_same_grid, Field};
use crate::scalar::Real;
use crate::scheme::SchemeParams;
use crate::truncation::{pow_unchecked, t_band};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VVariant {
    /// v = z² − α²
    #[default]
    FromZ,
    /// Linear Backward Euler step of δ_t v − Δv + Tᵐ(u)ˢ v = 0.
    FromU,
}

impl std::str::FromStr for VVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "from_z" => Ok(Self::FromZ),
            "from_u" => Ok(Self::FromU),
            other => Err(format!("unknown v variant `{other}` (from_z|from_u)")),
        }
    }
}

pub fn v_from_z<T: Real>(z: &Field<T>, alpha: T) -> Field<T> {
    let a2 = alpha * alpha;
    z.map(|zz| zz * zz - a2)
}

/// Solves (1/k + Tᵐ(u)ˢ) v − Δ_h v = v_prev/k. Slightly negative u (central
/// flux overshoot) is clamped at zero inside the coefficient so the system
/// stays an M-matrix.
pub fn v_from_u<T: Real>(v_prev: &Field<T>, u: &Field<T>, p: &SchemeParams<T>) -> Result<Field<T>> {
    ensure_same_grid(v_prev, u)?;
    let inv_k = T::one() / p.k;
    let c = u.map(|uu| pow_unchecked(t_band(uu, p.m), p.s));
    let rhs = v_prev.map(|v| v * inv_k);
    let problem = HelmholtzProblem::new(inv_k, c, rhs)?;
    let maxit = p.linear_maxit.unwrap_or(10 * u.len().max(10));
    let (v, _) = solve(&problem, p.linear_tol, maxit)?;
    Ok(v)
}
