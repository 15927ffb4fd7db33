//! Run orchestration: the time loop, v recovery, diagnostics and artifacts.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::{Profile, RunConfig};
use crate::diagnostics::{
    check_lemma32, dissipation, energy_monitor, DiagnosticsRecord, EnergyReport, Lemma32Inputs, Lemma32Report,
};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::io::{write_diagnostics_csv, write_snapshot};
use crate::oracle::{run_scalar, ScalarTrace};
use crate::recovery::{v_from_u, VVariant};
use crate::scheme::{solve_step, State};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const ORACLE_FILE: &str = "oracle.csv";

/// Fields of one time level. `v_from_u` is present when that variant is computed.
#[derive(Debug, Clone)]
pub struct Frame {
    pub n: usize,
    pub t: f64,
    pub u: Field<f64>,
    pub z: Field<f64>,
    pub v_from_z: Field<f64>,
    pub v_from_u: Option<Field<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DissipationTotals {
    /// Σ (1/2k)‖∇zⁿ − ∇zⁿ⁻¹‖²
    pub grad_increment: f64,
    /// Σ ¼∫Tᵐ(uⁿ)ˢ|∇zⁿ|²
    pub weighted_grad: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Every step, initial row included; the CSV keeps those on the cadence.
    pub records: Vec<DiagnosticsRecord>,
    pub inputs: Lemma32Inputs,
    pub lemma: Lemma32Report,
    pub energy: EnergyReport,
    pub dissipation: DissipationTotals,
    pub halvings: usize,
    /// All time levels when requested, otherwise empty.
    pub frames: Vec<Frame>,
    pub final_state: State<f64>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.lemma.pass() && self.energy.all_finite
    }

    pub fn written_records(&self, cadence: usize) -> Vec<DiagnosticsRecord> {
        let last = self.records.last().map(|r| r.n).unwrap_or(0);
        self.records
            .iter()
            .filter(|r| r.n % cadence == 0 || r.n == last)
            .cloned()
            .collect()
    }
}

/// Runs the time loop without touching the disk. Lemma and energy results
/// are reported, not raised; bound violations and solver failures are errors.
pub fn simulate(cfg: &RunConfig, keep_frames: bool) -> Result<RunOutcome> {
    let p = &cfg.scheme;
    p.validate()?;
    let mut state = cfg.initial_state()?;
    let inputs = Lemma32Inputs::from_initial(&state, p);
    let want_u = cfg.track_both_variants || cfg.v_variant == VVariant::FromU;
    let mut v_u = want_u.then(|| state.v.clone());
    let gap_of = |other: Option<&Field<f64>>| other.filter(|_| cfg.track_both_variants).cloned();

    let mut records = vec![DiagnosticsRecord::from_state(
        &state,
        None,
        gap_of(v_u.as_ref()).as_ref(),
        p,
        0,
    )?];
    let mut frames = Vec::new();
    if keep_frames {
        frames.push(frame(&state, v_u.as_ref(), p.alpha));
    }
    let mut totals = DissipationTotals::default();
    let mut halvings = 0;

    for _ in 0..cfg.steps() {
        let step = solve_step(&state, p)?;
        halvings += step.halvings_used;
        let mut next = step.state;
        // keep the time grid exact instead of accumulating k
        next.t = next.n as f64 * p.k;
        let v_z = next.v.clone();
        if let Some(prev_vu) = &v_u {
            v_u = Some(v_from_u(prev_vu, &next.u, p)?);
        }
        if cfg.v_variant == VVariant::FromU {
            next.v = v_u.clone().unwrap();
        }
        let other = match cfg.v_variant {
            VVariant::FromZ => v_u.clone(),
            VVariant::FromU => Some(v_z.clone()),
        };
        let d = dissipation(&next, &state.z, p)?;
        totals.grad_increment += d.grad_increment;
        totals.weighted_grad += d.weighted_grad;
        records.push(DiagnosticsRecord::from_state(
            &next,
            Some(&state.z),
            gap_of(other.as_ref()).as_ref(),
            p,
            step.picard_iterations,
        )?);
        if keep_frames {
            frames.push(Frame {
                n: next.n,
                t: next.t,
                u: next.u.clone(),
                z: next.z.clone(),
                v_from_z: v_z,
                v_from_u: v_u.clone(),
            });
        }
        state = next;
    }

    let lemma = check_lemma32(&records, &inputs);
    let energy = energy_monitor(&records, &inputs, cfg.energy_envelope);
    Ok(RunOutcome {
        records,
        inputs,
        lemma,
        energy,
        dissipation: totals,
        halvings,
        frames,
        final_state: state,
    })
}

fn frame(state: &State<f64>, v_u: Option<&Field<f64>>, alpha: f64) -> Frame {
    Frame {
        n: state.n,
        t: state.t,
        u: state.u.clone(),
        z: state.z.clone(),
        v_from_z: crate::recovery::v_from_z(&state.z, alpha),
        v_from_u: v_u.cloned(),
    }
}

/// The full run: simulate, write the CSV and snapshots into the output
/// directory, then fail with [`Error::Invariant`] if a discrete estimate broke.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunOutcome> {
    let snapshots = cfg.output_dir.is_some() && cfg.snapshot_cadence > 0;
    let outcome = simulate(cfg, snapshots)?;
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
        write_diagnostics_csv(&dir.join(DIAGNOSTICS_FILE), &outcome.written_records(cfg.diagnostics_cadence))?;
        if snapshots {
            write_frames(dir, &outcome.frames, cfg.snapshot_cadence)?;
        }
    }
    if !outcome.lemma.pass() {
        return Err(Error::Invariant(format!("discrete estimates violated\n{}", outcome.lemma)));
    }
    if !outcome.energy.all_finite {
        return Err(Error::Invariant("energy became non-finite".into()));
    }
    Ok(outcome)
}

fn write_frames(dir: &Path, frames: &[Frame], cadence: usize) -> Result<()> {
    let last = frames.last().map(|f| f.n).unwrap_or(0);
    for f in frames.iter().filter(|f| f.n % cadence == 0 || f.n == last) {
        write_snapshot(&dir.join(format!("u_{:06}.txt", f.n)), &f.u, f.t)?;
        write_snapshot(&dir.join(format!("z_{:06}.txt", f.n)), &f.z, f.t)?;
        let v = f.v_from_u.as_ref().unwrap_or(&f.v_from_z);
        write_snapshot(&dir.join(format!("v_{:06}.txt", f.n)), v, f.t)?;
    }
    Ok(())
}

/// Per-step worst deviation between the field solver and the scalar recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleRow {
    pub n: usize,
    pub t: f64,
    pub u: f64,
    pub z: f64,
    pub v_from_z: f64,
    pub v_from_u: f64,
    pub err_u: f64,
    pub err_z: f64,
    pub err_v_from_z: f64,
    pub err_v_from_u: f64,
}

#[derive(Debug, Clone)]
pub struct OracleComparison {
    pub rows: Vec<OracleRow>,
    pub trace: ScalarTrace,
}

impl OracleComparison {
    pub fn max_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.err_u.max(r.err_z).max(r.err_v_from_z).max(r.err_v_from_u))
            .fold(0.0, f64::max)
    }
}

/// Runs a spatially constant scenario through the field solver and compares
/// every cell of every step with the scalar recursion.
pub fn oracle_check(cfg: &RunConfig) -> Result<OracleComparison> {
    let constant = |prof: &Profile, name: &'static str| match prof {
        Profile::Constant { value } => Ok(*value),
        _ => Err(Error::validation(name, "oracle check needs spatially constant initial data")),
    };
    let u0 = constant(&cfg.scenario.u0, "u0")?;
    let v0 = constant(&cfg.scenario.v0, "v0")?;
    let mut c = cfg.clone();
    c.track_both_variants = true;
    let outcome = simulate(&c, true)?;
    let p = &cfg.scheme;
    let trace = run_scalar(u0, v0, p.alpha, p.s, p.m, p.k, cfg.steps());
    let dev = |f: &Field<f64>, x: f64| f.values().iter().map(|&a| (a - x).abs()).fold(0.0, f64::max);
    let rows = outcome
        .frames
        .iter()
        .map(|f| {
            let n = f.n;
            OracleRow {
                n,
                t: f.t,
                u: trace.u[n],
                z: trace.z[n],
                v_from_z: trace.v_from_z[n],
                v_from_u: trace.v_from_u[n],
                err_u: dev(&f.u, trace.u[n]),
                err_z: dev(&f.z, trace.z[n]),
                err_v_from_z: dev(&f.v_from_z, trace.v_from_z[n]),
                err_v_from_u: dev(f.v_from_u.as_ref().unwrap(), trace.v_from_u[n]),
            }
        })
        .collect();
    Ok(OracleComparison { rows, trace })
}

pub fn write_oracle_csv(path: &Path, rows: &[OracleRow]) -> Result<()> {
    write_oracle(std::io::BufWriter::new(fs::File::create(path)?), rows)
}

pub fn write_oracle<W: std::io::Write>(out: W, rows: &[OracleRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
