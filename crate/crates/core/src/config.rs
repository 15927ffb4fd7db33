//! Run configuration: a small TOML document with `[grid]`, `[scenario]`,
//! `[scheme]` and `[run]` sections. Unknown keys are rejected.
//!
//! ```toml
//! [grid]
//! dims = [32, 32]
//! extent = [1.0, 1.0]
//!
//! [scenario]
//! preset = "gaussian"
//!
//! [scheme]
//! k = 0.01
//! m = 100.0
//! alpha = 0.1
//! s = 1.0
//!
//! [run]
//! t_final = 1.0
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{build_grid, FaceFluxSpec, Field, Grid};
use crate::recovery::VVariant;
use crate::scheme::{SchemeParams, State};

/// Spatial profile of an initial datum.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// base + amplitude·exp(−|x − center|² / (2 width²)); center in physical units.
    Gaussian {
        #[serde(default)]
        base: f64,
        amplitude: f64,
        center: Option<Vec<f64>>,
        width: f64,
    },
    /// base + amplitude·Π cos(mode_a π x_a / L_a), which has zero normal derivative.
    Cosine {
        base: f64,
        amplitude: f64,
        modes: Option<Vec<u32>>,
    },
}

impl Profile {
    pub fn sample(&self, grid: &Arc<Grid<f64>>) -> Result<Field<f64>> {
        let extent = grid.extent().to_vec();
        match self {
            Profile::Constant { value } => Ok(Field::constant(grid, *value)),
            Profile::Gaussian {
                base,
                amplitude,
                center,
                width,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::validation("width", "gaussian width must be positive"));
                }
                let center = match center {
                    Some(c) if c.len() == extent.len() => c.clone(),
                    Some(c) => {
                        return Err(Error::validation(
                            "center",
                            format!("{} coordinates for a {}-D grid", c.len(), extent.len()),
                        ))
                    }
                    None => extent.iter().map(|e| 0.5 * e).collect(),
                };
                let two_w2 = 2.0 * width * width;
                Ok(Field::from_fn(grid, |x| {
                    let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
                    base + amplitude * (-r2 / two_w2).exp()
                }))
            }
            Profile::Cosine {
                base,
                amplitude,
                modes,
            } => {
                let modes = match modes {
                    Some(m) if m.len() == extent.len() => m.clone(),
                    Some(m) => {
                        return Err(Error::validation(
                            "modes",
                            format!("{} modes for a {}-D grid", m.len(), extent.len()),
                        ))
                    }
                    None => vec![1; extent.len()],
                };
                Ok(Field::from_fn(grid, |x| {
                    let prod: f64 = x
                        .iter()
                        .zip(&modes)
                        .zip(&extent)
                        .map(|((&xa, &ma), &la)| (ma as f64 * std::f64::consts::PI * xa / la).cos())
                        .product();
                    base + amplitude * prod
                }))
            }
        }
    }
}

/// Named initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPreset {
    pub name: String,
    pub u0: Profile,
    pub v0: Profile,
}

impl ScenarioPreset {
    pub fn named(name: &str, extent: &[f64]) -> Result<Self> {
        let at = |frac: f64| Some(extent.iter().map(|e| frac * e).collect::<Vec<_>>());
        let (u0, v0) = match name {
            "homogeneous" => (Profile::Constant { value: 2.0 }, Profile::Constant { value: 1.0 }),
            "gaussian" => (
                Profile::Gaussian {
                    base: 1.0,
                    amplitude: 2.0,
                    center: at(0.35),
                    width: 0.1,
                },
                Profile::Gaussian {
                    base: 0.2,
                    amplitude: 1.0,
                    center: at(0.65),
                    width: 0.12,
                },
            ),
            "cosine" => (
                Profile::Cosine {
                    base: 1.0,
                    amplitude: 0.5,
                    modes: None,
                },
                Profile::Cosine {
                    base: 1.0,
                    amplitude: 0.5,
                    modes: Some(vec![2; extent.len()]),
                },
            ),
            "no_signal" => (
                Profile::Gaussian {
                    base: 1.0,
                    amplitude: 2.0,
                    center: at(0.35),
                    width: 0.1,
                },
                Profile::Constant { value: 0.0 },
            ),
            other => {
                return Err(Error::validation(
                    "preset",
                    format!("unknown preset `{other}` (homogeneous|gaussian|cosine|no_signal)"),
                ))
            }
        };
        Ok(Self {
            name: name.to_string(),
            u0,
            v0,
        })
    }
}

/// Fully validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dims: Vec<usize>,
    pub extent: Vec<f64>,
    pub scenario: ScenarioPreset,
    pub scheme: SchemeParams<f64>,
    pub v_variant: VVariant,
    pub t_final: f64,
    pub output_dir: Option<PathBuf>,
    /// Record diagnostics every `cadence` steps (the initial and final rows are always kept).
    pub diagnostics_cadence: usize,
    /// Write field snapshots every this many steps; 0 disables them.
    pub snapshot_cadence: usize,
    /// Compute both v variants every step and record their gap.
    pub track_both_variants: bool,
    pub energy_envelope: f64,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Arc<Grid<f64>>> {
        build_grid(&self.dims, &self.extent)
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.scheme.k).round() as usize
    }

    /// Samples the initial data and builds the state at t = 0.
    pub fn initial_state(&self) -> Result<State<f64>> {
        let g = self.grid()?;
        let u0 = self.scenario.u0.sample(&g)?;
        let v0 = self.scenario.v0.sample(&g)?;
        State::initial(u0, v0, self.scheme.alpha)
    }

    /// Same run with a different time step or truncation level.
    pub fn with_k_m(&self, k: f64, m: f64) -> Self {
        let mut c = self.clone();
        c.scheme.k = k;
        c.scheme.m = m;
        c
    }

    fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::validation("t_final", "must be positive"));
        }
        let steps = self.t_final / self.scheme.k;
        if steps.round() < 1.0 || (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::validation(
                "t_final",
                format!("must be a positive multiple of k = {}", self.scheme.k),
            ));
        }
        if self.diagnostics_cadence == 0 {
            return Err(Error::validation("diagnostics_cadence", "must be at least 1"));
        }
        if !(self.energy_envelope > 0.0) {
            return Err(Error::validation("energy_envelope", "must be positive"));
        }
        let g = self.grid()?;
        let u0 = self.scenario.u0.sample(&g)?;
        let v0 = self.scenario.v0.sample(&g)?;
        if u0.min() < 0.0 {
            return Err(Error::validation("u0", "initial density must be nonnegative"));
        }
        if v0.min() < 0.0 {
            return Err(Error::validation("v0", "initial concentration must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: RawGrid,
    scenario: RawScenario,
    scheme: RawScheme,
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dims: Vec<usize>,
    extent: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    preset: Option<String>,
    u0: Option<Profile>,
    v0: Option<Profile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    k: f64,
    m: f64,
    alpha: Option<f64>,
    s: f64,
    flux: Option<String>,
    picard_tol: Option<f64>,
    picard_maxit: Option<usize>,
    damping: Option<f64>,
    step_halving_max: Option<usize>,
    bound_tol: Option<f64>,
    linear_tol: Option<f64>,
    linear_maxit: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    t_final: f64,
    v_variant: Option<String>,
    output_dir: Option<PathBuf>,
    diagnostics_cadence: Option<usize>,
    snapshot_cadence: Option<usize>,
    track_both_variants: Option<bool>,
    energy_envelope: Option<f64>,
}

const SECTION_KEYS: &[(&str, &[&str])] = &[
    ("grid", &["dims", "extent"]),
    ("scenario", &["preset", "u0", "v0"]),
    (
        "scheme",
        &[
            "k",
            "m",
            "alpha",
            "s",
            "flux",
            "picard_tol",
            "picard_maxit",
            "damping",
            "step_halving_max",
            "bound_tol",
            "linear_tol",
            "linear_maxit",
        ],
    ),
    (
        "run",
        &[
            "t_final",
            "v_variant",
            "output_dir",
            "diagnostics_cadence",
            "snapshot_cadence",
            "track_both_variants",
            "energy_envelope",
        ],
    ),
];

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_overrides(text, &[])
}

/// Parses `text`, then applies `--key value` style overrides. Keys are either
/// `section.key` or a bare key name.
pub fn parse_config_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    if overrides.is_empty() {
        let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        return build(raw);
    }
    let mut table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    for (key, value) in overrides {
        apply_override(&mut table, key, value)?;
    }
    let raw: RawConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::ConfigParse {
            line: None,
            message: e.message().to_string(),
        })?;
    build(raw)
}

fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1);
    Error::ConfigParse {
        line,
        message: e.message().to_string(),
    }
}

fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let (section, name) = match key.split_once('.') {
        Some((s, n)) => (s.to_string(), n.to_string()),
        None => {
            let section = SECTION_KEYS
                .iter()
                .find(|(_, keys)| keys.contains(&key))
                .map(|(s, _)| s.to_string())
                .ok_or_else(|| Error::ConfigParse {
                    line: None,
                    message: format!("unknown override key `{key}`"),
                })?;
            (section, key.to_string())
        }
    };
    let parsed = toml::from_str::<toml::Table>(&format!("x = {value}"))
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let entry = table
        .entry(section.clone())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(name, parsed);
            Ok(())
        }
        _ => Err(Error::ConfigParse {
            line: None,
            message: format!("`{section}` is not a section"),
        }),
    }
}

fn build(raw: RawConfig) -> Result<RunConfig> {
    let dims = raw.grid.dims;
    let extent = raw.grid.extent.unwrap_or_else(|| vec![1.0; dims.len()]);
    let grid = build_grid(&dims, &extent)?;

    let mut scenario = match &raw.scenario.preset {
        Some(name) => ScenarioPreset::named(name, &extent)?,
        None => {
            let (Some(u0), Some(v0)) = (raw.scenario.u0.clone(), raw.scenario.v0.clone()) else {
                return Err(Error::validation(
                    "scenario",
                    "either a preset or both u0 and v0 are required",
                ));
            };
            ScenarioPreset {
                name: "custom".into(),
                u0,
                v0,
            }
        }
    };
    if let Some(u0) = raw.scenario.u0 {
        scenario.u0 = u0;
    }
    if let Some(v0) = raw.scenario.v0 {
        scenario.v0 = v0;
    }

    let s = raw.scheme;
    let alpha = match s.alpha {
        Some(a) => a,
        None => {
            let v0 = scenario.v0.sample(&grid)?;
            1e-2 * v0.linf().sqrt().max(1.0)
        }
    };
    let mut scheme = SchemeParams::new(s.k, s.m, alpha, s.s);
    if let Some(flux) = s.flux {
        scheme.flux = flux.parse::<FaceFluxSpec>().map_err(|m| Error::validation("flux", m))?;
    }
    if let Some(v) = s.picard_tol {
        scheme.picard_tol = v;
    }
    if let Some(v) = s.picard_maxit {
        scheme.picard_maxit = v;
    }
    if let Some(v) = s.damping {
        scheme.damping = v;
    }
    if let Some(v) = s.step_halving_max {
        scheme.step_halving_max = v;
    }
    if let Some(v) = s.bound_tol {
        scheme.bound_tol = v;
    }
    if let Some(v) = s.linear_tol {
        scheme.linear_tol = v;
    }
    scheme.linear_maxit = s.linear_maxit;

    let r = raw.run;
    let v_variant = match r.v_variant {
        Some(v) => v.parse::<VVariant>().map_err(|m| Error::validation("v_variant", m))?,
        None => VVariant::FromZ,
    };
    let cfg = RunConfig {
        dims,
        extent,
        scenario,
        scheme,
        v_variant,
        t_final: r.t_final,
        output_dir: r.output_dir,
        diagnostics_cadence: r.diagnostics_cadence.unwrap_or(1),
        snapshot_cadence: r.snapshot_cadence.unwrap_or(0),
        track_both_variants: r.track_both_variants.unwrap_or(true),
        energy_envelope: r.energy_envelope.unwrap_or(crate::diagnostics::DEFAULT_ENERGY_ENVELOPE),
    };
    cfg.validate()?;
    Ok(cfg)
}
