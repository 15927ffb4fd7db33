//! Scalar recursions for spatially constant data.
//!
//! With no gradients the scheme collapses to one quadratic per step for z and
//! a geometric recursion for v. Nothing here calls into the field solver, so
//! the traces are an independent check on it.

/// Step sequences of the homogeneous scheme, index 0 holding the initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrace {
    pub k: f64,
    pub alpha: f64,
    pub s: f64,
    pub m: f64,
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub v_from_z: Vec<f64>,
    pub v_from_u: Vec<f64>,
}

impl ScalarTrace {
    pub fn steps(&self) -> usize {
        self.u.len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.k
    }
}

/// Positive root of (1/k + c/2) z² − (z_prev/k) z − c α²/2 = 0.
///
/// The linear coefficient is negative, so q = ½(z_prev/k + √disc) involves no
/// cancellation and the positive root is q / a.
pub fn z_root(z_prev: f64, c: f64, alpha: f64, k: f64) -> f64 {
    let a = 1.0 / k + 0.5 * c;
    let b = -z_prev / k;
    let c0 = -0.5 * c * alpha * alpha;
    let disc = b * b - 4.0 * a * c0;
    let q = -0.5 * (b - disc.sqrt());
    q / a
}

pub fn run_scalar(u0: f64, v0: f64, alpha: f64, s: f64, m: f64, k: f64, steps: usize) -> ScalarTrace {
    let c = if u0 <= 0.0 { 0.0 } else { u0.min(m).powf(s) };
    let z0 = (v0 + alpha * alpha).sqrt();
    let mut trace = ScalarTrace {
        k,
        alpha,
        s,
        m,
        u: vec![u0; steps + 1],
        z: Vec::with_capacity(steps + 1),
        v_from_z: Vec::with_capacity(steps + 1),
        v_from_u: Vec::with_capacity(steps + 1),
    };
    trace.z.push(z0);
    trace.v_from_z.push(v0);
    trace.v_from_u.push(v0);
    for n in 1..=steps {
        let z = z_root(trace.z[n - 1], c, alpha, k);
        trace.z.push(z);
        trace.v_from_z.push(z * z - alpha * alpha);
        trace.v_from_u.push(trace.v_from_u[n - 1] / (1.0 + k * c));
    }
    trace
}

/// v(t) = v0·exp(−u0ˢ t), the exact solution for constant data.
pub fn exact_ode_reference(u0: f64, v0: f64, s: f64, t: f64) -> f64 {
    v0 * (-(u0.powf(s)) * t).exp()
}
