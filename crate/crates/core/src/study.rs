//! (m, k) refinement studies. Each run is independent and sequential inside;
//! the runs of a study are spread over a rayon pool.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Profile, RunConfig};
use crate::diagnostics::{reconstruct_timeseries, Reconstruction, TimeSeries};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::oracle::exact_ode_reference;
use crate::runner::simulate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// k/2ʲ at fixed m
    K,
    /// m·2ʲ at fixed k
    M,
    /// k/2ʲ and m·2ʲ together
    Joint,
}

/// One level of one family. Differences compare this level with the next
/// finer one, so the finest level of a family has none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub family: Family,
    pub level: usize,
    pub k: f64,
    pub m: f64,
    pub sup_u: f64,
    pub diff_u: Option<f64>,
    pub diff_z: Option<f64>,
    pub diff_v: Option<f64>,
    pub order_u: Option<f64>,
    pub order_z: Option<f64>,
    pub order_v: Option<f64>,
    /// ‖v_from_z − v_from_u‖₂ at the final time.
    pub cross_gap_final: f64,
    /// The same gap in L²(0,T; L²) on the coarsest time grid.
    pub cross_gap_l2t: f64,
    /// max |v − v⁰e^{−u⁰ˢt}| at the final time, v from u; constant scenarios only.
    pub ref_error_v_from_u: Option<f64>,
    pub ref_error_v_from_z: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StudyFailure {
    pub k: f64,
    pub m: f64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// Runs that failed; rows that needed them are missing.
    pub failures: Vec<StudyFailure>,
}

impl StudyTable {
    pub fn family(&self, f: Family) -> Vec<&StudyRow> {
        self.rows.iter().filter(|r| r.family == f).collect()
    }
}

struct RunData {
    sup_u: f64,
    u: TimeSeries<f64>,
    z: TimeSeries<f64>,
    v_z: TimeSeries<f64>,
    v_u: TimeSeries<f64>,
    gap_final: f64,
}

fn execute(cfg: &RunConfig) -> Result<RunData> {
    let mut c = cfg.clone();
    c.track_both_variants = true;
    c.output_dir = None;
    let out = simulate(&c, true)?;
    let k = c.scheme.k;
    let sup_u = out.records.iter().map(|r| r.linf_u).fold(0.0, f64::max);
    let gap_final = out.records.last().and_then(|r| r.cross_variant_gap).unwrap_or(0.0);
    let mut us = Vec::new();
    let mut zs = Vec::new();
    let mut vzs = Vec::new();
    let mut vus = Vec::new();
    for f in out.frames {
        us.push(f.u);
        zs.push(f.z);
        vzs.push(f.v_from_z);
        vus.push(f.v_from_u.unwrap());
    }
    let pc = Reconstruction::PiecewiseConstant;
    Ok(RunData {
        sup_u,
        u: reconstruct_timeseries(us, k, pc)?,
        z: reconstruct_timeseries(zs, k, pc)?,
        v_z: reconstruct_timeseries(vzs, k, pc)?,
        v_u: reconstruct_timeseries(vus, k, pc)?,
        gap_final,
    })
}

/// L²(0,T; L²) distance of two reconstructions sampled at t_n = n·k0, n ≥ 1.
fn l2t_dist(a: &TimeSeries<f64>, b: &TimeSeries<f64>, k0: f64, steps: usize) -> Result<f64> {
    let mut acc = 0.0;
    for n in 1..=steps {
        let t = n as f64 * k0;
        acc += k0 * a.eval(t)?.dist_l2_sq(&b.eval(t)?)?;
    }
    Ok(acc.sqrt())
}

fn order(coarse: Option<f64>, fine: Option<f64>) -> Option<f64> {
    match (coarse, fine) {
        (Some(c), Some(f)) if c > 0.0 && f > 0.0 => Some((c / f).log2()),
        _ => None,
    }
}

/// Runs the k, m and joint families and tabulates successive differences.
/// `jobs` bounds the number of concurrent runs (0 lets rayon decide).
pub fn convergence_study(base: &RunConfig, k_levels: usize, m_levels: usize, jobs: usize) -> Result<StudyTable> {
    if k_levels < 2 {
        return Err(Error::validation("k_levels", "needs at least 2 levels"));
    }
    if m_levels < 2 {
        return Err(Error::validation("m_levels", "needs at least 2 levels"));
    }
    let (k0, m0) = (base.scheme.k, base.scheme.m);
    let steps0 = base.steps();
    let scale = |j: usize| (1u64 << j) as f64;
    let mut plan: Vec<(Family, Vec<(f64, f64)>)> = vec![
        (Family::K, (0..k_levels).map(|j| (k0 / scale(j), m0)).collect()),
        (Family::M, (0..m_levels).map(|j| (k0, m0 * scale(j))).collect()),
        (
            Family::Joint,
            (0..k_levels.min(m_levels)).map(|j| (k0 / scale(j), m0 * scale(j))).collect(),
        ),
    ];
    plan.retain(|(_, levels)| levels.len() >= 2);

    let mut unique: Vec<(f64, f64)> = Vec::new();
    for (_, levels) in &plan {
        for &km in levels {
            if !unique.contains(&km) {
                unique.push(km);
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunData>> =
        pool.install(|| unique.par_iter().map(|&(k, m)| execute(&base.with_k_m(k, m))).collect());
    let lookup = |km: (f64, f64)| {
        let i = unique.iter().position(|&x| x == km).unwrap();
        results[i].as_ref().ok()
    };

    let reference = match (&base.scenario.u0, &base.scenario.v0) {
        (Profile::Constant { value: u0 }, Profile::Constant { value: v0 }) => {
            Some(exact_ode_reference(*u0, *v0, base.scheme.s, base.t_final))
        }
        _ => None,
    };
    let final_dev = |ts: &TimeSeries<f64>, x: f64| -> Result<f64> {
        let f: Field<f64> = ts.eval(ts.end())?;
        Ok(f.values().iter().map(|&a| (a - x).abs()).fold(0.0, f64::max))
    };

    let mut table = StudyTable::default();
    for ((k, m), r) in unique.iter().zip(&results) {
        if let Err(e) = r {
            table.failures.push(StudyFailure {
                k: *k,
                m: *m,
                error: e.to_string(),
            });
        }
    }
    for (family, levels) in &plan {
        let mut diffs: Vec<Option<(f64, f64, f64)>> = Vec::new();
        for w in levels.windows(2) {
            let d = match (lookup(w[0]), lookup(w[1])) {
                (Some(a), Some(b)) => Some((
                    l2t_dist(&a.u, &b.u, k0, steps0)?,
                    l2t_dist(&a.z, &b.z, k0, steps0)?,
                    l2t_dist(&a.v_u, &b.v_u, k0, steps0)?,
                )),
                _ => None,
            };
            diffs.push(d);
        }
        for (j, &(k, m)) in levels.iter().enumerate() {
            let Some(run) = lookup((k, m)) else { continue };
            let d = diffs.get(j).copied().flatten();
            let dn = diffs.get(j + 1).copied().flatten();
            let (ref_u, ref_z) = match reference {
                Some(x) => (Some(final_dev(&run.v_u, x)?), Some(final_dev(&run.v_z, x)?)),
                None => (None, None),
            };
            table.rows.push(StudyRow {
                family: *family,
                level: j,
                k,
                m,
                sup_u: run.sup_u,
                diff_u: d.map(|x| x.0),
                diff_z: d.map(|x| x.1),
                diff_v: d.map(|x| x.2),
                order_u: order(d.map(|x| x.0), dn.map(|x| x.0)),
                order_z: order(d.map(|x| x.1), dn.map(|x| x.1)),
                order_v: order(d.map(|x| x.2), dn.map(|x| x.2)),
                cross_gap_final: run.gap_final,
                cross_gap_l2t: l2t_dist(&run.v_z, &run.v_u, k0, steps0)?,
                ref_error_v_from_u: ref_u,
                ref_error_v_from_z: ref_z,
            });
        }
    }
    Ok(table)
}

pub fn write_study_csv(path: &Path, table: &StudyTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &table.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
