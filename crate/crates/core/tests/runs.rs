use std::fs;

use chemo_nltd::config::{parse_config, RunConfig};
use chemo_nltd::io::{read_snapshot, write_snapshot};
use chemo_nltd::runner::{oracle_check, run_simulation, simulate, DIAGNOSTICS_FILE};
use chemo_nltd::{build_grid, solve_step, Error, FaceFluxSpec, Field, Field32, SchemeParams32, State32};

fn config(preset: &str, dims: &str, k: f64, t_final: f64, extra: &str) -> RunConfig {
    parse_config(&format!(
        "[grid]\ndims = {dims}\n[scenario]\npreset = \"{preset}\"\n\
         [scheme]\nk = {k:?}\nm = 100.0\nalpha = 0.1\ns = 1.0\n{extra}\n[run]\nt_final = {t_final:?}\n"
    ))
    .unwrap()
}

#[test]
fn reruns_are_bit_identical() {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config("gaussian", "[12, 10]", 0.02, 0.2, "");
        cfg.output_dir = Some(dir.path().to_path_buf());
        run_simulation(&cfg).unwrap();
        outputs.push(fs::read(dir.path().join(DIAGNOSTICS_FILE)).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn snapshot_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(&config("cosine", "[5, 4, 3]", 0.05, 0.1, ""), false).unwrap();
    let path = dir.path().join("z.txt");
    write_snapshot(&path, &out.final_state.z, out.final_state.t).unwrap();
    let (z, t) = read_snapshot::<f64>(&path).unwrap();
    assert_eq!(t, out.final_state.t);
    assert_eq!(z.values(), out.final_state.z.values());
    assert_eq!(z.grid().as_ref(), out.final_state.z.grid().as_ref());
}

#[test]
fn homogeneous_runs_match_the_scalar_recursion() {
    for s in ["1.0", "2.0", "1.5"] {
        let cfg = parse_config(&format!(
            "[grid]\ndims = [6, 5]\n[scenario]\npreset = \"homogeneous\"\n\
             [scheme]\nk = 0.1\nm = 10.0\nalpha = 0.1\ns = {s}\n[run]\nt_final = 5.0\n"
        ))
        .unwrap();
        let cmp = oracle_check(&cfg).unwrap();
        assert_eq!(cmp.rows.len(), 51);
        assert!(cmp.max_error() <= 1e-10, "s = {s}: {}", cmp.max_error());
    }
}

#[test]
fn vanishing_signal_means_no_chemotaxis() {
    let out = simulate(&config("no_signal", "[10, 10]", 0.05, 0.5, ""), false).unwrap();
    let z0 = out.records[0].l2_z_sq;
    for r in &out.records {
        assert_eq!(r.grad_z_sq, 0.0);
        assert_eq!(r.linf_v, 0.0);
        assert!((r.l2_z_sq - z0).abs() <= 1e-14 * z0);
    }
    assert!(out.lemma.pass());
}

#[test]
fn three_dimensional_gaussian_keeps_estimates() {
    let out = simulate(&config("gaussian", "[6, 6, 6]", 0.05, 0.5, "flux = \"upwind\""), false).unwrap();
    assert!(out.lemma.pass(), "{}", out.lemma);
    assert!(out.records.iter().all(|r| r.min_u >= 0.0));
}

#[test]
fn one_dimensional_run() {
    let out = simulate(&config("gaussian", "[40]", 0.01, 0.3, ""), false).unwrap();
    assert!(out.lemma.pass(), "{}", out.lemma);
    let z_max: Vec<f64> = out.records.iter().map(|r| r.linf_z).collect();
    assert!(z_max.windows(2).all(|w| w[1] <= w[0] + 1e-10));
}

#[test]
fn exhausted_halving_reports_the_step() {
    let cfg = config("gaussian", "[8, 8]", 0.1, 0.3, "picard_maxit = 1\nstep_halving_max = 1");
    match simulate(&cfg, false) {
        Err(e @ Error::PicardDivergence { step: 1, .. }) => assert_eq!(e.exit_code(), 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn single_precision_step() {
    let g = build_grid(&[8, 8], &[1.0f32, 1.0]).unwrap();
    let u0 = Field::from_fn(&g, |x: &[f32]| 1.0 + (-20.0 * ((x[0] - 0.4).powi(2) + (x[1] - 0.5).powi(2))).exp());
    let v0 = Field::from_fn(&g, |x: &[f32]| 0.5 + 0.5 * (3.0 * x[0]).cos());
    let prev: State32 = State32::initial(u0, v0, 0.1).unwrap();
    let mut p = SchemeParams32::new(0.02, 50.0, 0.1, 1.0);
    p.picard_tol = 1e-5;
    p.linear_tol = 1e-6;
    p.bound_tol = 1e-5;
    p.flux = FaceFluxSpec::Upwind;
    let next = solve_step(&prev, &p).unwrap().state;
    let mass = |f: &Field32| f.integral();
    assert!((mass(&next.u) - mass(&prev.u)).abs() <= 1e-5 * mass(&prev.u));
    assert!(next.z.min() >= 0.1 - 1e-5);
}
