use std::sync::Arc;

use chemo_nltd::grid::{build_grid, div_chemotaxis_flux, grad_sq, laplacian_apply, FaceFluxSpec, Field, Grid};
use proptest::prelude::*;

fn field_strategy() -> impl Strategy<Value = (Arc<Grid<f64>>, Vec<f64>)> {
    (1usize..=3)
        .prop_flat_map(|nd| (prop::collection::vec(1usize..=9, nd), prop::collection::vec(0.2f64..4.0, nd)))
        .prop_flat_map(|(dims, ext)| {
            let g = build_grid(&dims, &ext).unwrap();
            let n = g.len();
            (Just(g), prop::collection::vec(-10.0f64..10.0, n))
        })
}

/// Index of the cell mirrored along `axis`.
fn mirror(g: &Grid<f64>, cell: usize, axis: usize) -> usize {
    let mut idx = g.index_of(cell);
    idx[axis] = g.dims()[axis] - 1 - idx[axis];
    let mut flat = 0;
    for (a, &i) in idx.iter().enumerate() {
        flat = flat * g.dims()[a] + i;
    }
    flat
}

proptest! {
    #[test]
    fn laplacian_is_conservative((g, w) in field_strategy()) {
        let f = Field::from_values(&g, w).unwrap();
        let lap = laplacian_apply(&g, &f).unwrap();
        let scale: f64 = lap.values().iter().map(|x| x.abs()).sum::<f64>() * g.cell_volume();
        prop_assert!(lap.integral().abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn chemotaxis_divergence_is_conservative((g, w) in field_strategy(), upwind in any::<bool>()) {
        let coeff = Field::from_values(&g, w.iter().map(|x| x.abs()).collect()).unwrap();
        let z = Field::from_fn(&g, |x| 1.0 + x.iter().map(|xi| xi.sin()).sum::<f64>().powi(2));
        let spec = if upwind { FaceFluxSpec::Upwind } else { FaceFluxSpec::Central };
        let d = div_chemotaxis_flux(&g, &coeff, &z, spec).unwrap();
        let scale: f64 = d.values().iter().map(|x| x.abs()).sum::<f64>() * g.cell_volume();
        prop_assert!(d.integral().abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn grad_sq_is_nonnegative((g, w) in field_strategy()) {
        let f = Field::from_values(&g, w).unwrap();
        prop_assert!(grad_sq(&g, &f).unwrap().min() >= 0.0);
    }

    #[test]
    fn mirror_symmetry_is_kept((g, w) in field_strategy(), axis in 0usize..3) {
        let axis = axis % g.ndim();
        let sym: Vec<f64> = (0..g.len()).map(|i| w[i] + w[mirror(&g, i, axis)]).collect();
        let f = Field::from_values(&g, sym).unwrap();
        for out in [laplacian_apply(&g, &f).unwrap(), grad_sq(&g, &f).unwrap()] {
            let v = out.values();
            for i in 0..g.len() {
                let j = mirror(&g, i, axis);
                prop_assert!((v[i] - v[j]).abs() <= 1e-12 * (1.0 + v[i].abs()));
            }
        }
    }
}

/// Max-norm errors of the Laplacian and of grad_sq on a Neumann-compatible
/// manufactured function, n cells per side of [0, 1]².
fn mms_errors(n: usize) -> (f64, f64) {
    use std::f64::consts::PI;
    let g = build_grid(&[n, n], &[1.0, 1.0]).unwrap();
    let w = Field::from_fn(&g, |x: &[f64]| (PI * x[0]).cos() * (2.0 * PI * x[1]).cos());
    let lap = laplacian_apply(&g, &w).unwrap();
    let gs = grad_sq(&g, &w).unwrap();
    let (mut e_lap, mut e_gs): (f64, f64) = (0.0, 0.0);
    for i in 0..g.len() {
        let x = g.cell_center(i);
        let (cx, sx) = ((PI * x[0]).cos(), (PI * x[0]).sin());
        let (cy, sy) = ((2.0 * PI * x[1]).cos(), (2.0 * PI * x[1]).sin());
        let exact_lap = -5.0 * PI * PI * cx * cy;
        let exact_gs = (PI * sx * cy).powi(2) + (2.0 * PI * cx * sy).powi(2);
        e_lap = e_lap.max((lap.values()[i] - exact_lap).abs());
        e_gs = e_gs.max((gs.values()[i] - exact_gs).abs());
    }
    (e_lap, e_gs)
}

#[test]
fn manufactured_solution_orders() {
    let levels: Vec<(f64, f64)> = [16, 32, 64, 128].iter().map(|&n| mms_errors(n)).collect();
    for w in levels.windows(2) {
        let lap_order = (w[0].0 / w[1].0).log2();
        let gs_order = (w[0].1 / w[1].1).log2();
        assert!((lap_order - 2.0).abs() < 0.1, "laplacian order {lap_order}");
        assert!(gs_order >= 1.0, "grad_sq order {gs_order}");
    }
}

#[test]
fn discrete_product_rule_is_exact() {
    // z·|∇z|²/z + z Δz = ½Δ(z²) cell by cell
    let g = build_grid(&[7, 5], &[1.0, 0.6]).unwrap();
    let z = Field::from_fn(&g, |x: &[f64]| 0.3 + x[0] * x[0] + (4.0 * x[1]).sin().abs());
    let gs = grad_sq(&g, &z).unwrap();
    let lz = laplacian_apply(&g, &z).unwrap();
    let half_lap_sq = laplacian_apply(&g, &z.map(|v| v * v)).unwrap();
    for i in 0..g.len() {
        let l = gs.values()[i] + z.values()[i] * lz.values()[i];
        let r = 0.5 * half_lap_sq.values()[i];
        assert!((l - r).abs() <= 1e-10 * (1.0 + r.abs()), "{l} {r}");
    }
}
