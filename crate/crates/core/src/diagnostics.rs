//! Per-step quantities bounded by the discrete estimates, the checks that
//! assert them over a run, and time reconstructions used by refinement studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{grad_norm_sq, grad_sq, Field};
use crate::scalar::Real;
use crate::scheme::{mass, SchemeParams, State};
use crate::truncation::{pow_unchecked, t_upper};

/// Relative mass drift allowed per step, as a fraction of 1 + |mass(u⁰)|.
pub const MASS_TOL: f64 = 1e-9;
/// Relative slack on ‖zⁿ‖² + Σ‖zʲ − zʲ⁻¹‖² ≤ ‖z⁰‖².
pub const L2_DECAY_TOL: f64 = 1e-6;
/// Relative slack on k Σ‖∇zʲ‖² ≤ ‖v⁰ + α²‖² / (4α²).
pub const GRAD_BUDGET_TOL: f64 = 1e-3;
/// Default multiplier of the heuristic energy envelope.
pub const DEFAULT_ENERGY_ENVELOPE: f64 = 100.0;

/// One CSV row. Column order is the declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub n: usize,
    pub t: f64,
    pub mass_u: f64,
    pub linf_u: f64,
    pub linf_z: f64,
    pub linf_v: f64,
    /// ‖zⁿ‖₂²
    pub l2_z_sq: f64,
    /// ‖zⁿ − zⁿ⁻¹‖₂², zero on the initial row.
    pub incr_z_sq: f64,
    /// ‖∇_h zⁿ‖₂² over interior faces.
    pub grad_z_sq: f64,
    pub energy: f64,
    pub min_u: f64,
    pub min_z: f64,
    pub picard_iterations: usize,
    /// ‖v_from_z − v_from_u‖₂ when both variants are tracked.
    pub cross_variant_gap: Option<f64>,
}

impl DiagnosticsRecord {
    pub fn header() -> [&'static str; 14] {
        [
            "n",
            "t",
            "mass_u",
            "linf_u",
            "linf_z",
            "linf_v",
            "l2_z_sq",
            "incr_z_sq",
            "grad_z_sq",
            "energy",
            "min_u",
            "min_z",
            "picard_iterations",
            "cross_variant_gap",
        ]
    }

    /// Builds the row for `state`. `z_prev` is None on the initial row.
    pub fn from_state<T: Real>(
        state: &State<T>,
        z_prev: Option<&Field<T>>,
        v_other: Option<&Field<T>>,
        p: &SchemeParams<T>,
        picard_iterations: usize,
    ) -> Result<Self> {
        let g = state.grid();
        let pieces = energy(&state.u, &state.z, p)?;
        let incr = match z_prev {
            Some(zp) => state.z.dist_l2_sq(zp)?.as_f64(),
            None => 0.0,
        };
        let gap = match v_other {
            Some(v) => Some(state.v.dist_l2_sq(v)?.as_f64().sqrt()),
            None => None,
        };
        Ok(Self {
            n: state.n,
            t: state.t.as_f64(),
            mass_u: mass(&state.u).as_f64(),
            linf_u: state.u.linf().as_f64(),
            linf_z: state.z.linf().as_f64(),
            linf_v: state.v.linf().as_f64(),
            l2_z_sq: state.z.l2_sq().as_f64(),
            incr_z_sq: incr,
            grad_z_sq: grad_norm_sq(g, &state.z)?.as_f64(),
            energy: pieces.energy.as_f64(),
            min_u: state.u.min().as_f64(),
            min_z: state.z.min().as_f64(),
            picard_iterations,
            cross_variant_gap: gap,
        })
    }
}

/// f_m(r) = ∫₀ʳ f'_m, with f'_m(r) = ln Tᵐ(r) for s = 1 and Tᵐ(r)ˢ⁻¹/(s − 1) for s > 1.
pub fn f_m_eval<T: Real>(r: T, m: T, s: T) -> Result<T> {
    if r < T::zero() {
        return Err(Error::Contract(format!("f_m evaluated at negative {r}")));
    }
    Ok(f_m_unchecked(r, m, s))
}

fn f_m_unchecked<T: Real>(r: T, m: T, s: T) -> T {
    if s == T::one() {
        if r == T::zero() {
            T::zero()
        } else if r <= m {
            r * r.ln() - r
        } else {
            m * m.ln() - m + (r - m) * m.ln()
        }
    } else {
        let s1 = s - T::one();
        if r <= m {
            pow_unchecked(r, s) / (s * s1)
        } else {
            pow_unchecked(m, s) / (s * s1) + (r - m) * pow_unchecked(m, s1) / s1
        }
    }
}

/// f'_m; used for the convexity identity.
pub fn f_m_prime<T: Real>(r: T, m: T, s: T) -> T {
    if s == T::one() {
        t_upper(r, m).ln()
    } else {
        pow_unchecked(t_upper(r, m), s - T::one()) / (s - T::one())
    }
}

/// E = (s/4)∫f_m(u) + ½‖∇z‖².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPieces<T> {
    pub fm_integral: T,
    pub grad_half: T,
    pub energy: T,
    /// ∫ max(−u, 0): mass clamped away before evaluating f_m.
    pub clamped_mass: T,
}

pub fn energy<T: Real>(u: &Field<T>, z: &Field<T>, p: &SchemeParams<T>) -> Result<EnergyPieces<T>> {
    let vol = u.grid().cell_volume();
    let mut fm = T::zero();
    let mut clamped = T::zero();
    for &v in u.values() {
        if v < T::zero() {
            clamped = clamped - v;
        }
        fm = fm + f_m_unchecked(v.max(T::zero()), p.m, p.s);
    }
    let fm_integral = fm * vol;
    let grad_half = T::half() * grad_norm_sq(z.grid(), z)?;
    Ok(EnergyPieces {
        fm_integral,
        grad_half,
        energy: p.s / T::lit(4.0) * fm_integral + grad_half,
        clamped_mass: clamped * vol,
    })
}

/// Discrete surrogates of the dissipation terms on the left of the energy
/// inequalities, for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    /// (1/2k)‖∇zⁿ − ∇zⁿ⁻¹‖²
    pub grad_increment: f64,
    /// ¼∫Tᵐ(uⁿ)ˢ|∇zⁿ|²
    pub weighted_grad: f64,
}

pub fn dissipation<T: Real>(state: &State<T>, z_prev: &Field<T>, p: &SchemeParams<T>) -> Result<Dissipation> {
    let g = state.grid();
    let dz = state.z.zip_map(z_prev, |a, b| a - b)?;
    let gs = grad_sq(g, &state.z)?;
    let weighted: T = state
        .u
        .values()
        .iter()
        .zip(gs.values())
        .map(|(&u, &q)| pow_unchecked(t_upper(u, p.m).max(T::zero()), p.s) * q)
        .sum::<T>()
        * g.cell_volume();
    Ok(Dissipation {
        grad_increment: (grad_norm_sq(g, &dz)? / (T::two() * p.k)).as_f64(),
        weighted_grad: (T::lit(0.25) * weighted).as_f64(),
    })
}

/// Run-level constants the uniform estimates compare against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma32Inputs {
    pub k: f64,
    pub alpha: f64,
    pub mass_u0: f64,
    /// ‖z⁰‖₂²
    pub z0_l2_sq: f64,
    /// ‖v⁰ + α²‖₂²
    pub v0_shift_l2_sq: f64,
}

impl Lemma32Inputs {
    pub fn from_initial<T: Real>(initial: &State<T>, p: &SchemeParams<T>) -> Self {
        let a2 = p.alpha * p.alpha;
        Self {
            k: p.k.as_f64(),
            alpha: p.alpha.as_f64(),
            mass_u0: mass(&initial.u).as_f64(),
            z0_l2_sq: initial.z.l2_sq().as_f64(),
            v0_shift_l2_sq: initial.v.map(|v| v + a2).l2_sq().as_f64(),
        }
    }

    /// ‖v⁰ + α²‖² / (4α²)
    pub fn gradient_budget(&self) -> f64 {
        self.v0_shift_l2_sq / (4.0 * self.alpha * self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: &'static str,
    /// Largest value of lhs / bound over the run (pass iff ≤ 1 + slack).
    pub worst_ratio: f64,
    pub worst_step: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma32Report {
    pub items: Vec<CheckItem>,
}

impl Lemma32Report {
    pub fn pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }
}

impl std::fmt::Display for Lemma32Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for item in &self.items {
            writeln!(
                f,
                "{:<16} {}  worst ratio {:.6e} at step {}",
                item.name,
                if item.pass { "pass" } else { "FAIL" },
                item.worst_ratio,
                item.worst_step
            )?;
        }
        Ok(())
    }
}

/// Checks mass conservation, the L² decay of z and the gradient budget over a
/// history whose first row is the initial state.
pub fn check_lemma32(history: &[DiagnosticsRecord], inputs: &Lemma32Inputs) -> Lemma32Report {
    let mut mass_item = CheckItem {
        name: "mass",
        worst_ratio: 0.0,
        worst_step: 0,
        pass: true,
    };
    let mut decay_item = CheckItem {
        name: "l2_decay",
        worst_ratio: 0.0,
        worst_step: 0,
        pass: true,
    };
    let mut grad_item = CheckItem {
        name: "grad_budget",
        worst_ratio: 0.0,
        worst_step: 0,
        pass: true,
    };
    let mass_scale = MASS_TOL * (1.0 + inputs.mass_u0.abs());
    let budget = inputs.gradient_budget();
    let mut incr_sum = 0.0;
    let mut grad_sum = 0.0;
    for rec in history {
        if rec.n > 0 {
            incr_sum += rec.incr_z_sq;
            grad_sum += rec.grad_z_sq;
        }
        let updates = [
            (&mut mass_item, (rec.mass_u - inputs.mass_u0).abs() / mass_scale, 1.0),
            (&mut decay_item, (rec.l2_z_sq + incr_sum) / inputs.z0_l2_sq, 1.0 + L2_DECAY_TOL),
            (&mut grad_item, inputs.k * grad_sum / budget, 1.0 + GRAD_BUDGET_TOL),
        ];
        for (item, ratio, limit) in updates {
            let ratio = if ratio.is_nan() { 0.0 } else { ratio };
            if ratio > item.worst_ratio {
                item.worst_ratio = ratio;
                item.worst_step = rec.n;
            }
            if ratio > limit {
                item.pass = false;
            }
        }
    }
    Lemma32Report {
        items: vec![mass_item, decay_item, grad_item],
    }
}

/// Boundedness monitor for E_mⁿ against E⁰ + Λ·‖v⁰+α²‖²/(4α²).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub initial: f64,
    pub max_energy: f64,
    pub envelope: f64,
    pub all_finite: bool,
    /// Steps whose energy exceeded the envelope.
    pub excursions: Vec<usize>,
}

impl EnergyReport {
    pub fn within_envelope(&self) -> bool {
        self.all_finite && self.excursions.is_empty()
    }
}

pub fn energy_monitor(history: &[DiagnosticsRecord], inputs: &Lemma32Inputs, lambda: f64) -> EnergyReport {
    let initial = history.first().map(|r| r.energy).unwrap_or(0.0);
    let envelope = initial + lambda * inputs.gradient_budget();
    let mut max_energy = f64::NEG_INFINITY;
    let mut all_finite = true;
    let mut excursions = Vec::new();
    for rec in history {
        all_finite &= rec.energy.is_finite();
        max_energy = max_energy.max(rec.energy);
        if !(rec.energy <= envelope) {
            excursions.push(rec.n);
        }
    }
    EnergyReport {
        initial,
        max_energy,
        envelope,
        all_finite,
        excursions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    pub checked: usize,
    pub violations: usize,
    /// Most negative value of (a − b)f'(a) − (f(a) − f(b)).
    pub worst_gap: f64,
}

/// For convex f, (zⁿ − zⁿ⁻¹)·f'(zⁿ) ≥ f(zⁿ) − f(zⁿ⁻¹); `samples` holds (zⁿ, zⁿ⁻¹).
pub fn convexity_identity_check<T: Real>(
    samples: &[(T, T)],
    f: impl Fn(T) -> T,
    f_prime: impl Fn(T) -> T,
    tol: T,
) -> ConvexityReport {
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for &(now, before) in samples {
        let gap = (now - before) * f_prime(now) - (f(now) - f(before));
        worst = worst.min(gap.as_f64());
        if gap < -tol {
            violations += 1;
        }
    }
    ConvexityReport {
        checked: samples.len(),
        violations,
        worst_gap: if samples.is_empty() { 0.0 } else { worst },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reconstruction {
    /// Value of step n on (t_{n−1}, t_n].
    PiecewiseConstant,
    /// Linear interpolation between consecutive steps.
    PiecewiseLinear,
}

/// Time-indexed reconstruction of a sequence of fields.
#[derive(Debug, Clone)]
pub struct TimeSeries<T> {
    times: Vec<T>,
    fields: Vec<Field<T>>,
    mode: Reconstruction,
}

/// Builds the reconstruction of `fields`, field n living at time n·k.
pub fn reconstruct_timeseries<T: Real>(fields: Vec<Field<T>>, k: T, mode: Reconstruction) -> Result<TimeSeries<T>> {
    if fields.len() < 2 {
        return Err(Error::Contract("a reconstruction needs at least two states".into()));
    }
    let times = (0..fields.len()).map(|n| T::from_usize(n).unwrap() * k).collect();
    Ok(TimeSeries { times, fields, mode })
}

impl<T: Real> TimeSeries<T> {
    pub fn start(&self) -> T {
        self.times[0]
    }

    pub fn end(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn eval(&self, t: T) -> Result<Field<T>> {
        let snap = T::lit(1e-9) * (self.times[1] - self.times[0]);
        if !(t >= self.start() - snap && t <= self.end() + snap) {
            return Err(Error::OutOfRange {
                t: t.as_f64(),
                start: self.start().as_f64(),
                end: self.end().as_f64(),
            });
        }
        // first n with t ≤ t_n (+ snap)
        let n = self.times.partition_point(|&tn| tn + snap < t);
        if n == 0 || (self.times[n] - t).abs() <= snap {
            return Ok(self.fields[n].clone());
        }
        match self.mode {
            Reconstruction::PiecewiseConstant => Ok(self.fields[n].clone()),
            Reconstruction::PiecewiseLinear => {
                let (t0, t1) = (self.times[n - 1], self.times[n]);
                let theta = (t - t0) / (t1 - t0);
                self.fields[n - 1].zip_map(&self.fields[n], |a, b| a + theta * (b - a))
            }
        }
    }
}
