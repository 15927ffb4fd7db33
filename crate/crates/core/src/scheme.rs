//! One time step of the truncated Backward Euler scheme for the (u, z) system,
//! solved by Picard iteration on the decoupled linear map
//!
//! ```text
//! z/k − Δz + ½ T₀ᵐ(ū)ˢ z       = |∇z̄|²/T_α(z̄) + ½ T₀ᵐ(ū)ˢ α²/T_α(z̄) + zⁿ⁻¹/k
//! u/k − Δu + 2∇·(T₀ᵐ(ū) z̄ ∇z) = uⁿ⁻¹/k
//! ```
//!
//! At a fixed point z̄ = z and ū = u, the face flux 2·mean(z̄)·∇z equals the face
//! gradient of z², and the step satisfies
//! `δ_t u − Δu = −∇·(Tᵐ(u) ∇z²)`, `δ_t z − |∇z|²/z − Δz = −½ Tᵐ(u)ˢ (z − α²/z)`.

use std::sync::Arc;

use crate::elliptic::{solve_from, HelmholtzProblem};
use crate::error::{Error, Result};
use crate::grid::{div_face_flux, ensure_same_grid, grad_sq, FaceFluxSpec, Field, Grid};
use crate::recovery::v_from_z;
use crate::scalar::Real;
use crate::truncation::{pow_unchecked, t_band, t_lower};

/// Every knob of the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams<T> {
    /// Time step.
    pub k: T,
    /// Upper truncation level for u.
    pub m: T,
    /// Shift in z = √(v + α²); lower truncation level for z.
    pub alpha: T,
    /// Consumption exponent, s ≥ 1.
    pub s: T,
    pub flux: FaceFluxSpec,
    /// Relative L∞ change of both components that ends the Picard loop.
    pub picard_tol: T,
    pub picard_maxit: usize,
    /// Picard relaxation factor in (0, 1].
    pub damping: T,
    /// How many times a step may be split in half when Picard stalls.
    pub step_halving_max: usize,
    /// Slack allowed on pointwise bounds.
    pub bound_tol: T,
    /// Relative residual for the inner CG solves.
    pub linear_tol: T,
    /// Inner CG iteration cap; `None` means 10 × cell count.
    pub linear_maxit: Option<usize>,
}

impl<T: Real> SchemeParams<T> {
    pub fn new(k: T, m: T, alpha: T, s: T) -> Self {
        Self {
            k,
            m,
            alpha,
            s,
            flux: FaceFluxSpec::Central,
            picard_tol: T::lit(1e-11),
            picard_maxit: 200,
            damping: T::one(),
            step_halving_max: 4,
            bound_tol: T::lit(1e-10),
            linear_tol: T::lit(1e-13),
            linear_maxit: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(name, format!("must be positive, got {v}")))
            }
        };
        positive("k", self.k)?;
        positive("m", self.m)?;
        positive("alpha", self.alpha)?;
        positive("picard_tol", self.picard_tol)?;
        positive("bound_tol", self.bound_tol)?;
        positive("linear_tol", self.linear_tol)?;
        if !(self.s >= T::one() && self.s.is_finite()) {
            return Err(Error::validation("s", format!("must be >= 1, got {}", self.s)));
        }
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::validation(
                "damping",
                format!("must lie in (0, 1], got {}", self.damping),
            ));
        }
        if self.picard_maxit == 0 {
            return Err(Error::validation("picard_maxit", "must be at least 1"));
        }
        Ok(())
    }

    fn linear_maxit(&self, cells: usize) -> usize {
        self.linear_maxit.unwrap_or(10 * cells.max(10))
    }
}

/// One time level of the scheme.
#[derive(Debug, Clone)]
pub struct State<T> {
    pub u: Field<T>,
    pub z: Field<T>,
    pub v: Field<T>,
    pub t: T,
    pub n: usize,
}

impl<T: Real> State<T> {
    /// u⁰, z⁰ = √(v⁰ + α²), v⁰ at t = 0.
    pub fn initial(u0: Field<T>, v0: Field<T>, alpha: T) -> Result<Self> {
        ensure_same_grid(&u0, &v0)?;
        for (name, f) in [("u0", &u0), ("v0", &v0)] {
            let (i, val) = f.argmin();
            if val < T::zero() {
                return Err(Error::validation(name, format!("negative value {val} at cell {i}")));
            }
        }
        let z = v0.map(|v| (v + alpha * alpha).sqrt());
        Ok(Self {
            u: u0,
            z,
            v: v0,
            t: T::zero(),
            n: 0,
        })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.u.grid()
    }
}

#[derive(Debug, Clone)]
pub struct StepResult<T> {
    pub state: State<T>,
    /// Total Picard iterations over all sub-steps.
    pub picard_iterations: usize,
    pub halvings_used: usize,
    /// Fixed-point residual after every Picard iteration of the accepted attempt.
    pub residuals: Vec<f64>,
}

/// Σ f·vol
pub fn mass<T: Real>(f: &Field<T>) -> T {
    f.integral()
}

/// One application of the linear map: returns (u, z) for the frozen (ū, z̄).
pub fn picard_substep<T: Real>(
    prev: &State<T>,
    u_bar: &Field<T>,
    z_bar: &Field<T>,
    p: &SchemeParams<T>,
) -> Result<(Field<T>, Field<T>)> {
    substep(&prev.u, &prev.z, u_bar, z_bar, p.k, p)
}

fn substep<T: Real>(
    u_prev: &Field<T>,
    z_prev: &Field<T>,
    u_bar: &Field<T>,
    z_bar: &Field<T>,
    k: T,
    p: &SchemeParams<T>,
) -> Result<(Field<T>, Field<T>)> {
    ensure_same_grid(u_prev, z_prev)?;
    ensure_same_grid(u_prev, u_bar)?;
    ensure_same_grid(u_prev, z_bar)?;
    let (cell, zmin) = z_bar.argmin();
    if zmin < p.alpha - p.bound_tol {
        return Err(Error::Contract(format!(
            "z̄ = {zmin} below alpha = {} at cell {cell}",
            p.alpha
        )));
    }
    let g = u_prev.grid();
    let n = g.len();
    let inv_k = T::one() / k;
    let maxit = p.linear_maxit(n);
    let alpha2 = p.alpha * p.alpha;

    let coeff: Vec<T> = u_bar.values().iter().map(|&u| t_band(u, p.m)).collect();
    let half_c: Vec<T> = coeff.iter().map(|&c| T::half() * pow_unchecked(c, p.s)).collect();

    let gs = grad_sq(g, z_bar)?;
    let rhs_z: Vec<T> = (0..n)
        .map(|i| {
            let zt = t_lower(z_bar.values()[i], p.alpha);
            gs.values()[i] / zt + half_c[i] * alpha2 / zt + z_prev.values()[i] * inv_k
        })
        .collect();
    let problem_z = HelmholtzProblem::new(
        inv_k,
        Field::from_parts(g, half_c),
        Field::from_parts(g, rhs_z),
    )?;
    let (z_new, _) = solve_from(&problem_z, Some(z_bar), p.linear_tol, maxit)?;

    let zb = z_bar.values();
    let zn = z_new.values();
    let inv_h: Vec<T> = g.spacing().iter().map(|&h| T::one() / h).collect();
    let div = div_face_flux(g, &coeff, p.flux, |a, lo, hi| {
        (zb[lo] + zb[hi]) * (zn[hi] - zn[lo]) * inv_h[a]
    });
    let rhs_u: Vec<T> = u_prev
        .values()
        .iter()
        .zip(&div)
        .map(|(&u, &d)| u * inv_k - d)
        .collect();
    let problem_u = HelmholtzProblem::screened(inv_k, Field::from_parts(g, rhs_u))?;
    let (u_new, _) = solve_from(&problem_u, Some(u_bar), p.linear_tol, maxit)?;
    Ok((u_new, z_new))
}

/// ‖a − b‖∞ / ‖a‖∞, zero when a = b.
fn rel_change<T: Real>(new: &Field<T>, old: &Field<T>) -> T {
    let d = new.dist_linf(old).unwrap_or_else(|_| T::infinity());
    if d == T::zero() {
        T::zero()
    } else {
        d / new.linf().max(T::min_positive_value())
    }
}

enum PicardOutcome<T> {
    Converged {
        u: Field<T>,
        z: Field<T>,
        iterations: usize,
    },
    Stalled,
}

fn picard<T: Real>(
    u_prev: &Field<T>,
    z_prev: &Field<T>,
    k: T,
    p: &SchemeParams<T>,
    trace: &mut Vec<f64>,
) -> Result<PicardOutcome<T>> {
    let mut u_bar = u_prev.clone();
    let mut z_bar = z_prev.clone();
    for it in 1..=p.picard_maxit {
        let (u_new, z_new) = match substep(u_prev, z_prev, &u_bar, &z_bar, k, p) {
            Ok(pair) => pair,
            // an iterate that leaves the admissible set counts as stagnation
            Err(Error::Contract(_)) | Err(Error::SolverFailure { .. }) => {
                return Ok(PicardOutcome::Stalled)
            }
            Err(e) => return Err(e),
        };
        let res = rel_change(&u_new, &u_bar).max(rel_change(&z_new, &z_bar));
        trace.push(res.as_f64());
        if !res.is_finite() {
            return Ok(PicardOutcome::Stalled);
        }
        if res < p.picard_tol {
            return Ok(PicardOutcome::Converged {
                u: u_new,
                z: z_new,
                iterations: it,
            });
        }
        if p.damping == T::one() {
            u_bar = u_new;
            z_bar = z_new;
        } else {
            let w = p.damping;
            u_bar = u_bar.zip_map(&u_new, |a, b| a + w * (b - a))?;
            z_bar = z_bar.zip_map(&z_new, |a, b| a + w * (b - a))?;
        }
    }
    Ok(PicardOutcome::Stalled)
}

/// Advances `prev` by one step of length `p.k`. When the Picard loop stalls the
/// interval is re-integrated with 2, 4, … equal sub-steps, so the returned
/// state always sits at `prev.t + k`.
pub fn solve_step<T: Real>(prev: &State<T>, p: &SchemeParams<T>) -> Result<StepResult<T>> {
    p.validate()?;
    let step = prev.n + 1;
    let mut last_trace = Vec::new();
    'halving: for halvings in 0..=p.step_halving_max {
        let pieces = 1usize << halvings;
        let k_sub = p.k / T::from_usize(pieces).unwrap();
        let mut u = prev.u.clone();
        let mut z = prev.z.clone();
        let mut iterations = 0;
        let mut trace = Vec::new();
        for _ in 0..pieces {
            match picard(&u, &z, k_sub, p, &mut trace)? {
                PicardOutcome::Converged {
                    u: un,
                    z: zn,
                    iterations: its,
                } => {
                    u = un;
                    z = zn;
                    iterations += its;
                }
                PicardOutcome::Stalled => {
                    last_trace = trace;
                    continue 'halving;
                }
            }
        }
        check_bounds(step, &u, &z, prev.z.max(), p)?;
        let v = v_from_z(&z, p.alpha);
        return Ok(StepResult {
            state: State {
                u,
                z,
                v,
                t: prev.t + p.k,
                n: step,
            },
            picard_iterations: iterations,
            halvings_used: halvings,
            residuals: trace,
        });
    }
    Err(Error::PicardDivergence {
        step,
        halvings: p.step_halving_max,
        trace: last_trace,
    })
}

fn check_bounds<T: Real>(step: usize, u: &Field<T>, z: &Field<T>, z_prev_max: T, p: &SchemeParams<T>) -> Result<()> {
    let violation = |quantity, cell, value: T, bound: T| Error::BoundViolation {
        step,
        quantity,
        cell,
        value: value.as_f64(),
        bound: bound.as_f64(),
    };
    // central fluxes may undershoot; that shows up in the diagnostics instead
    let (i, umin) = u.argmin();
    if p.flux == FaceFluxSpec::Upwind && umin < -p.bound_tol {
        return Err(violation("u", i, umin, T::zero()));
    }
    let (i, zmin) = z.argmin();
    if zmin < p.alpha - p.bound_tol {
        return Err(violation("z", i, zmin, p.alpha));
    }
    let (i, zmax) = z.argmax();
    if zmax > z_prev_max + p.bound_tol {
        return Err(violation("z", i, zmax, z_prev_max));
    }
    Ok(())
}
