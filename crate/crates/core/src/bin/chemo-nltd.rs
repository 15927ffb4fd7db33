use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chemo_nltd::config::{parse_config_with_overrides, RunConfig};
use chemo_nltd::diagnostics::{check_lemma32, energy_monitor, Lemma32Inputs, DEFAULT_ENERGY_ENVELOPE};
use chemo_nltd::io::read_diagnostics_csv;
use chemo_nltd::runner::{oracle_check, run_simulation, write_oracle, write_oracle_csv, ORACLE_FILE};
use chemo_nltd::study::{convergence_study, write_study_csv};
use chemo_nltd::{Error, Result};

const ORACLE_TOL: f64 = 1e-10;

/// Truncated Backward Euler runs for the chemotaxis-consumption system.
///
/// Any config key can be overridden after the config path with
/// `--key value` or `--section.key value`.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a simulation, write diagnostics.csv and snapshots.
    Run(ConfigArgs),
    /// Compare a spatially constant run with the scalar recursion.
    OracleCheck(ConfigArgs),
    /// Refine k and m and tabulate successive differences.
    ConvergenceStudy {
        #[arg(long, default_value_t = 4)]
        k_levels: usize,
        #[arg(long, default_value_t = 2)]
        m_levels: usize,
        /// Concurrent runs; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Re-run the discrete estimate checks on an emitted diagnostics CSV.
    Check {
        csv: PathBuf,
        /// Config of the run, used for k, α and ‖v⁰ + α²‖².
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        v0_shift_l2_sq: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_ENERGY_ENVELOPE)]
        energy_envelope: f64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    config: PathBuf,
    /// `--key value` overrides
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(tok) = it.next() {
        let Some(key) = tok.strip_prefix("--") else {
            return Err(Error::ConfigParse {
                line: None,
                message: format!("expected `--key value`, found `{tok}`"),
            });
        };
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Error::ConfigParse {
                    line: None,
                    message: format!("override `--{key}` has no value"),
                })?;
                (key.to_string(), v.clone())
            }
        };
        out.push((key.replace('-', "_"), value));
    }
    Ok(out)
}

fn load(args: &ConfigArgs) -> Result<RunConfig> {
    let text = fs::read_to_string(&args.config)?;
    parse_config_with_overrides(&text, &parse_overrides(&args.overrides)?)
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Run(args) => {
            let cfg = load(&args)?;
            let out = run_simulation(&cfg)?;
            let last = out.records.last().unwrap();
            println!(
                "steps {}  t {}  mass {:.16e}  min u {:.3e}  max z {:.6}  halvings {}",
                last.n, last.t, last.mass_u, last.min_u, last.linf_z, out.halvings
            );
            print!("{}", out.lemma);
            report_energy(&out.energy);
        }
        Cmd::OracleCheck(args) => {
            let cfg = load(&args)?;
            let cmp = oracle_check(&cfg)?;
            match &cfg.output_dir {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    write_oracle_csv(&dir.join(ORACLE_FILE), &cmp.rows)?;
                }
                None => write_oracle(std::io::stdout().lock(), &cmp.rows)?,
            }
            let worst = cmp.max_error();
            eprintln!("max deviation from the scalar recursion: {worst:.3e}");
            if !(worst <= ORACLE_TOL) {
                return Err(Error::Invariant(format!(
                    "field solver deviates from the scalar recursion by {worst:.3e}"
                )));
            }
        }
        Cmd::ConvergenceStudy {
            k_levels,
            m_levels,
            jobs,
            config,
        } => {
            let cfg = load(&config)?;
            let table = convergence_study(&cfg, k_levels, m_levels, jobs)?;
            println!(
                "{:<6} {:>3} {:>10} {:>8} {:>11} {:>11} {:>7} {:>7} {:>11}",
                "family", "lvl", "k", "m", "diff_u", "diff_z", "ord_u", "ord_z", "cross_gap"
            );
            let opt = |x: Option<f64>, prec: usize| x.map_or("-".to_string(), |v| format!("{v:.prec$e}"));
            let ord = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
            for r in &table.rows {
                println!(
                    "{:<6} {:>3} {:>10.3e} {:>8} {:>11} {:>11} {:>7} {:>7} {:>11.4e}",
                    format!("{:?}", r.family).to_lowercase(),
                    r.level,
                    r.k,
                    r.m,
                    opt(r.diff_u, 4),
                    opt(r.diff_z, 4),
                    ord(r.order_u),
                    ord(r.order_z),
                    r.cross_gap_final
                );
            }
            if let Some(dir) = &cfg.output_dir {
                fs::create_dir_all(dir)?;
                write_study_csv(&dir.join("study.csv"), &table)?;
            }
            if let Some(f) = table.failures.first() {
                return Err(Error::Invariant(format!(
                    "{} run(s) failed, first at k = {}, m = {}: {}",
                    table.failures.len(),
                    f.k,
                    f.m,
                    f.error
                )));
            }
        }
        Cmd::Check {
            csv,
            config,
            k,
            alpha,
            v0_shift_l2_sq,
            energy_envelope,
        } => check(&csv, config.as_deref(), k, alpha, v0_shift_l2_sq, energy_envelope)?,
    }
    Ok(())
}

fn check(
    csv: &Path,
    config: Option<&Path>,
    k: Option<f64>,
    alpha: Option<f64>,
    shift: Option<f64>,
    envelope: f64,
) -> Result<()> {
    let rows = read_diagnostics_csv(csv)?;
    let first = rows.first().ok_or_else(|| Error::Format {
        path: csv.to_path_buf(),
        message: "no rows".into(),
    })?;
    if first.n != 0 || rows.iter().enumerate().any(|(i, r)| r.n != i) {
        return Err(Error::Format {
            path: csv.to_path_buf(),
            message: "the checks need every step from n = 0 (diagnostics_cadence = 1)".into(),
        });
    }
    let mut inputs = match config {
        Some(path) => {
            let cfg = parse_config_with_overrides(&fs::read_to_string(path)?, &[])?;
            Lemma32Inputs::from_initial(&cfg.initial_state()?, &cfg.scheme)
        }
        None => {
            let need = |x: Option<f64>, name: &str| {
                x.ok_or_else(|| Error::validation(name, "required without --config"))
            };
            Lemma32Inputs {
                k: need(k, "k")?,
                alpha: need(alpha, "alpha")?,
                mass_u0: first.mass_u,
                z0_l2_sq: first.l2_z_sq,
                v0_shift_l2_sq: need(shift, "v0_shift_l2_sq")?,
            }
        }
    };
    if let Some(k) = k {
        inputs.k = k;
    }
    let report = check_lemma32(&rows, &inputs);
    print!("{report}");
    let energy = energy_monitor(&rows, &inputs, envelope);
    report_energy(&energy);
    if !report.pass() {
        return Err(Error::Invariant("discrete estimates violated".into()));
    }
    Ok(())
}

fn report_energy(e: &chemo_nltd::diagnostics::EnergyReport) {
    println!(
        "energy           {}  max {:.6e}  envelope {:.6e}",
        if e.within_envelope() { "pass" } else { "EXCURSION" },
        e.max_energy,
        e.envelope
    );
    if !e.excursions.is_empty() {
        println!("energy excursions at steps {:?}", e.excursions);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::PicardDivergence { trace, .. } = &e {
                eprintln!("residual trace: {trace:?}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
