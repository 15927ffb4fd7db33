//! Reference computations shared by the integration tests and the acceptance
//! harness. Nothing here calls into the library's own assembly or closed forms.
#![allow(dead_code)]

use std::sync::Arc;

use chemo_nltd::diagnostics::{convexity_identity_check, f_m_eval, f_m_prime};
use chemo_nltd::grid::{build_grid, Field, Grid};
use chemo_nltd::{pow_s, solve, HelmholtzProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// f'_m straight from its definition.
pub fn f_m_prime_ref(r: f64, m: f64, s: f64) -> f64 {
    let t = r.min(m);
    if s == 1.0 {
        t.ln()
    } else {
        t.powf(s - 1.0) / (s - 1.0)
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (l, r) = (0.5 * (a + c), 0.5 * (c + b));
    let (fl, fr) = (f(l), f(r));
    let left = (c - a) / 6.0 * (fa + 4.0 * fl + fm);
    let right = (b - c) / 6.0 * (fm + 4.0 * fr + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, c, fa, fl, fm, left, 0.5 * tol, depth - 1) + simpson(f, c, b, fm, fr, fb, right, 0.5 * tol, depth - 1)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// ∫₀ʳ f'_m by adaptive Simpson on panels graded geometrically toward the
/// endpoint singularity at 0, split at the truncation kink.
pub fn quad_f_m(r: f64, m: f64, s: f64) -> f64 {
    let f = |x: f64| f_m_prime_ref(x, m, s);
    let a = r.min(m);
    let mut total = 0.0;
    let mut hi = a;
    for _ in 0..90 {
        let lo = 0.5 * hi;
        total += adaptive(&f, lo, hi, 1e-15);
        hi = lo;
    }
    total + adaptive(&f, a, r, 1e-13)
}

/// The flux-form operator σ + c − Δ_h assembled cell by cell from the stencil.
pub fn dense_matrix(dims: &[usize], h: &[f64], sigma: f64, c: &[f64]) -> DMatrix<f64> {
    let n: usize = dims.iter().product();
    let mut a = DMatrix::zeros(n, n);
    let mut stride = vec![1usize; dims.len()];
    for ax in (0..dims.len().saturating_sub(1)).rev() {
        stride[ax] = stride[ax + 1] * dims[ax + 1];
    }
    for i in 0..n {
        a[(i, i)] += sigma + c[i];
        for ax in 0..dims.len() {
            let pos = (i / stride[ax]) % dims[ax];
            let w = 1.0 / (h[ax] * h[ax]);
            if pos + 1 < dims[ax] {
                let j = i + stride[ax];
                a[(i, i)] += w;
                a[(j, j)] += w;
                a[(i, j)] -= w;
                a[(j, i)] -= w;
            }
        }
    }
    a
}

pub struct RandomProblem {
    pub grid: Arc<Grid<f64>>,
    pub sigma: f64,
    pub c: Vec<f64>,
    pub rhs: Vec<f64>,
}

pub fn random_problem(r: &mut ChaCha8Rng) -> RandomProblem {
    let ndim = r.random_range(1..=3);
    let dims: Vec<usize> = loop {
        let d: Vec<usize> = (0..ndim).map(|_| r.random_range(1..=8)).collect();
        if d.iter().product::<usize>() <= 64 {
            break d;
        }
    };
    let extent: Vec<f64> = (0..ndim).map(|_| r.random_range(0.3..3.0)).collect();
    let grid = build_grid(&dims, &extent).unwrap();
    let n = grid.len();
    RandomProblem {
        sigma: r.random_range(0.05..50.0),
        c: (0..n).map(|_| if r.random_bool(0.3) { 0.0 } else { r.random_range(0.0..20.0) }).collect(),
        rhs: (0..n).map(|_| r.random_range(-5.0..5.0)).collect(),
        grid,
    }
}

/// Largest |w_cg − w_dense| / max(1, |w_dense|∞) over `count` random instances.
pub fn dense_oracle_suite(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let p = random_problem(&mut r);
        let g = &p.grid;
        let problem = HelmholtzProblem::new(
            p.sigma,
            Field::from_values(g, p.c.clone()).unwrap(),
            Field::from_values(g, p.rhs.clone()).unwrap(),
        )
        .unwrap();
        let (w, _) = solve(&problem, 1e-14, 10_000).unwrap();
        let a = dense_matrix(g.dims(), g.spacing(), p.sigma, &p.c);
        let exact = a.lu().solve(&DVector::from_vec(p.rhs.clone())).unwrap();
        let scale = exact.amax().max(1.0);
        for (x, y) in w.values().iter().zip(exact.iter()) {
            worst = worst.max((x - y).abs() / scale);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy)]
pub struct Suite {
    pub samples: usize,
    pub violations: usize,
    pub worst: f64,
}

/// (a − b)f'(a) ≥ f(a) − f(b) − 1e−12 for f = f_m, random s, m and pairs in [0, 3m].
pub fn convexity_suite(samples: usize, seed: u64) -> Suite {
    let mut r = rng(seed);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let s = [1.0, 1.5, 2.0, 3.0][r.random_range(0..4)];
        let m = r.random_range(0.5..10.0);
        let lo = if s == 1.0 { 1e-3 } else { 0.0 };
        let pair = (r.random_range(lo..3.0 * m), r.random_range(lo..3.0 * m));
        let rep = convexity_identity_check(
            &[pair],
            |x| f_m_eval(x, m, s).unwrap(),
            |x| f_m_prime(x, m, s),
            1e-12,
        );
        violations += rep.violations;
        worst = worst.min(rep.worst_gap);
    }
    Suite {
        samples,
        violations,
        worst,
    }
}

/// |w₂ˢ − w₁ˢ| ≤ s(w₁ + w₂)ˢ⁻¹|w₂ − w₁| + 1e−9 for w ∈ [0, 100], s ∈ [1, 4].
pub fn power_suite(samples: usize, seed: u64) -> Suite {
    let mut r = rng(seed);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let s: f64 = r.random_range(1.0..=4.0);
        let (w1, w2): (f64, f64) = (r.random_range(0.0..=100.0), r.random_range(0.0..=100.0));
        let lhs = (pow_s(w2, s).unwrap() - pow_s(w1, s).unwrap()).abs();
        let rhs = s * (w1 + w2).powf(s - 1.0) * (w2 - w1).abs();
        let slack = rhs - lhs;
        worst = worst.min(slack);
        if slack < -1e-9 {
            violations += 1;
        }
    }
    Suite {
        samples,
        violations,
        worst,
    }
}

/// Largest |f_m closed form − quadrature| over s ∈ {1, 1.5, 2, 3}, several m
/// and r on a grid of [0, 3m].
pub fn f_m_quadrature_suite() -> f64 {
    let mut worst: f64 = 0.0;
    for s in [1.0, 1.5, 2.0, 3.0] {
        for m in [0.5, 2.0, 10.0] {
            for i in 0..=60 {
                let r = 3.0 * m * i as f64 / 60.0;
                let closed = f_m_eval(r, m, s).unwrap();
                worst = worst.max((closed - quad_f_m(r, m, s)).abs());
            }
        }
    }
    worst
}
