//! Screened Poisson problems `(σ + c) w − Δ_h w = f` with zero-flux boundaries.
//!
//! For σ > 0 and c ≥ 0 the operator is symmetric positive definite and an
//! M-matrix, so a Jacobi-preconditioned conjugate gradient solve is used.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ensure_same_grid, Field, Grid};
use crate::scalar::Real;

/// Default relative residual target.
pub const DEFAULT_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct HelmholtzProblem<T> {
    grid: Arc<Grid<T>>,
    sigma: T,
    reaction: Field<T>,
    rhs: Field<T>,
}

impl<T: Real> HelmholtzProblem<T> {
    pub fn new(sigma: T, reaction: Field<T>, rhs: Field<T>) -> Result<Self> {
        if !(sigma > T::zero() && sigma.is_finite()) {
            return Err(Error::Contract(format!("sigma must be positive, got {sigma}")));
        }
        ensure_same_grid(&reaction, &rhs)?;
        if let Some(i) = reaction.values().iter().position(|&c| c < T::zero()) {
            return Err(Error::Contract(format!(
                "negative reaction coefficient {} at cell {i}",
                reaction.values()[i]
            )));
        }
        Ok(Self {
            grid: Arc::clone(rhs.grid()),
            sigma,
            reaction,
            rhs,
        })
    }

    /// Problem without a reaction term.
    pub fn screened(sigma: T, rhs: Field<T>) -> Result<Self> {
        let c = Field::zeros(rhs.grid());
        Self::new(sigma, c, rhs)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn reaction(&self) -> &Field<T> {
        &self.reaction
    }

    pub fn rhs(&self) -> &Field<T> {
        &self.rhs
    }

    fn apply_into(&self, w: &[T], out: &mut [T]) {
        self.grid.laplacian_into(w, out);
        let c = self.reaction.values();
        for i in 0..out.len() {
            out[i] = (self.sigma + c[i]) * w[i] - out[i];
        }
    }

    /// A·w
    pub fn apply(&self, w: &Field<T>) -> Result<Field<T>> {
        ensure_same_grid(w, &self.rhs)?;
        let mut out = vec![T::zero(); self.grid.len()];
        self.apply_into(w.values(), &mut out);
        Ok(Field::from_parts(&self.grid, out))
    }

    /// ‖A w − f‖₂ / ‖f‖₂ (absolute residual when f = 0), Euclidean norms over cells.
    pub fn relative_residual(&self, w: &Field<T>) -> Result<T> {
        let aw = self.apply(w)?;
        let r = norm2(
            &aw.values()
                .iter()
                .zip(self.rhs.values())
                .map(|(&a, &f)| f - a)
                .collect::<Vec<_>>(),
        );
        let f = norm2(self.rhs.values());
        Ok(if f > T::zero() { r / f } else { r })
    }

    /// Dense matrix of the operator, row-major. Meant for small grids only.
    pub fn assemble_dense(&self) -> Vec<Vec<T>> {
        let n = self.grid.len();
        let mut a = vec![vec![T::zero(); n]; n];
        let inv_h2 = self.grid.inv_h2();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = self.sigma + self.reaction.values()[i];
        }
        self.grid.for_each_face(|ax, lo, hi| {
            let w = inv_h2[ax];
            a[lo][lo] = a[lo][lo] + w;
            a[hi][hi] = a[hi][hi] + w;
            a[lo][hi] = a[lo][hi] - w;
            a[hi][lo] = a[hi][lo] - w;
        });
        a
    }
}

/// Positive diagonal, non-positive off-diagonals and weak row diagonal dominance
/// (strict in at least one row).
pub fn is_m_matrix<T: Real>(a: &[Vec<T>]) -> bool {
    let mut strict = false;
    for (i, row) in a.iter().enumerate() {
        if row[i] <= T::zero() {
            return false;
        }
        let mut off = T::zero();
        for (j, &v) in row.iter().enumerate() {
            if j != i {
                if v > T::zero() {
                    return false;
                }
                off = off + v.abs();
            }
        }
        if row[i] < off {
            return false;
        }
        strict |= row[i] > off;
    }
    strict
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative Euclidean residual of the returned solution.
    pub residual: f64,
    pub converged: bool,
}

/// Solves from a zero initial guess.
pub fn solve<T: Real>(p: &HelmholtzProblem<T>, tol: T, maxit: usize) -> Result<(Field<T>, SolveReport)> {
    solve_from(p, None, tol, maxit)
}

/// Jacobi-preconditioned CG. The returned field satisfies
/// ‖(σ+c)w − Δ_h w − f‖₂ ≤ tol·‖f‖₂ or an error carrying the report is returned.
pub fn solve_from<T: Real>(
    p: &HelmholtzProblem<T>,
    guess: Option<&Field<T>>,
    tol: T,
    maxit: usize,
) -> Result<(Field<T>, SolveReport)> {
    let n = p.grid.len();
    let f = p.rhs.values();
    let f_norm = norm2(f);
    if f_norm == T::zero() {
        return Ok((
            Field::zeros(&p.grid),
            SolveReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
        ));
    }
    let target = tol * f_norm;

    let mut inv_diag = p.grid.laplacian_diagonal();
    for (d, &c) in inv_diag.iter_mut().zip(p.reaction.values()) {
        *d = T::one() / (*d + p.sigma + c);
    }

    let mut x = match guess {
        Some(g) => {
            ensure_same_grid(g, &p.rhs)?;
            g.values().to_vec()
        }
        None => vec![T::zero(); n],
    };
    let mut r = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut dir = vec![T::zero(); n];
    let mut iterations = 0;

    // Outer loop restarts from the true residual whenever the recursive one
    // claims convergence, so round-off drift cannot fake a converged result.
    let true_res = loop {
        p.apply_into(&x, &mut q);
        for i in 0..n {
            r[i] = f[i] - q[i];
        }
        let res = norm2(&r);
        if res <= target || iterations >= maxit {
            break res;
        }
        for i in 0..n {
            s[i] = inv_diag[i] * r[i];
            dir[i] = s[i];
        }
        let mut rs = dot(&r, &s);
        let start = iterations;
        while iterations < maxit {
            p.apply_into(&dir, &mut q);
            let pq = dot(&dir, &q);
            if !(pq > T::zero()) {
                break;
            }
            let step = rs / pq;
            for i in 0..n {
                x[i] = x[i] + step * dir[i];
                r[i] = r[i] - step * q[i];
            }
            iterations += 1;
            if norm2(&r) <= target {
                break;
            }
            for i in 0..n {
                s[i] = inv_diag[i] * r[i];
            }
            let rs_new = dot(&r, &s);
            let beta = rs_new / rs;
            rs = rs_new;
            for i in 0..n {
                dir[i] = s[i] + beta * dir[i];
            }
        }
        if iterations == start {
            // breakdown without progress
            p.apply_into(&x, &mut q);
            for i in 0..n {
                r[i] = f[i] - q[i];
            }
            break norm2(&r);
        }
    };

    let report = SolveReport {
        iterations,
        residual: (true_res / f_norm).as_f64(),
        converged: true_res <= target && x.iter().all(|v| v.is_finite()),
    };
    if !report.converged {
        return Err(Error::SolverFailure {
            iterations,
            residual: report.residual,
            report,
        });
    }
    Ok((Field::from_parts(&p.grid, x), report))
}

/// Outcome of comparing a solution against the comparison-principle enclosure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub min: f64,
    pub max: f64,
    pub slack: f64,
    pub below: usize,
    pub above: usize,
}

impl BoundReport {
    pub fn ok(&self) -> bool {
        self.below == 0 && self.above == 0
    }
}

/// Checks `w` against the enclosure implied by the comparison principle:
/// with c ≥ 0, min f/(σ + max c) ≤ w ≤ max f/σ when f ≥ 0 (and the mirrored
/// bounds for sign-changing data). Violations are counted beyond
/// 10·tol·‖f‖₂/σ.
pub fn max_principle_check<T: Real>(p: &HelmholtzProblem<T>, w: &Field<T>, tol: T) -> BoundReport {
    let f_min = p.rhs.min();
    let f_max = p.rhs.max();
    let c_max = p.reaction.max().max(T::zero());
    let lower = if f_min >= T::zero() {
        f_min / (p.sigma + c_max)
    } else {
        f_min / p.sigma
    };
    let upper = if f_max >= T::zero() {
        f_max / p.sigma
    } else {
        f_max / (p.sigma + c_max)
    };
    let slack = T::lit(10.0) * tol * norm2(p.rhs.values()) / p.sigma;
    let below = w.values().iter().filter(|&&v| v < lower - slack).count();
    let above = w.values().iter().filter(|&&v| v > upper + slack).count();
    BoundReport {
        lower_bound: lower.as_f64(),
        upper_bound: upper.as_f64(),
        min: w.min().as_f64(),
        max: w.max().as_f64(),
        slack: slack.as_f64(),
        below,
        above,
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
