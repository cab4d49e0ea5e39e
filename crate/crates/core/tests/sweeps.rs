use approx::assert_abs_diff_eq;
use wgklm_core::analysis::{sweep, SweepKind, SweepOptions};
use wgklm_core::Method;

fn options() -> SweepOptions {
    SweepOptions {
        method: Method::GaussHermite { order: 12 },
        ..SweepOptions::default()
    }
}

#[test]
fn reference_points_on_the_curves() {
    let fig5a = sweep(SweepKind::Fig5a, &[50.0, 100.0, 150.0], &options()).unwrap();
    assert_abs_diff_eq!(fig5a.series("ph_d0.1").unwrap().values[1], 0.9433, epsilon = 5e-4);
    let fig6 = sweep(SweepKind::Fig6, &[10.0, 100.0], &options()).unwrap();
    assert_abs_diff_eq!(fig6.series("p2_d0").unwrap().values[1], 0.96098, epsilon = 1e-5);
    assert_abs_diff_eq!(
        fig6.series("p3_d0").unwrap().values[0],
        0.564_473_930_053_777_4,
        epsilon = 1e-10
    );
    let fig7 = sweep(SweepKind::Fig7, &[0.0, 0.15], &options()).unwrap();
    assert_abs_diff_eq!(fig7.series("p3_P100").unwrap().values[1], 0.7310, epsilon = 5e-4);
}

#[test]
fn series_shapes() {
    for kind in SweepKind::ALL {
        let grid: Vec<f64> = match kind {
            SweepKind::Fig5a | SweepKind::Fig6 => vec![5.0, 50.0, 200.0],
            _ => vec![-0.2, 0.0, 0.2],
        };
        let r = sweep(kind, &grid, &options()).unwrap();
        let expected = if matches!(kind, SweepKind::Fig5a | SweepKind::Fig5b) {
            3
        } else {
            6
        };
        assert_eq!(r.series.len(), expected, "{}", kind.name());
        for s in &r.series {
            assert_eq!(s.values.len(), grid.len());
            assert!(
                s.values.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)),
                "{} {}",
                kind.name(),
                s.name
            );
        }
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), grid.len() + 1);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), expected + 1);
    }
}

#[test]
fn fig8_zero_width_is_flat_and_ordered() {
    let grid = [-0.3, -0.1, 0.0, 0.1, 0.3];
    let r = sweep(SweepKind::Fig8, &grid, &options()).unwrap();
    for n in [2, 3] {
        let s0 = &r.series(&format!("F{n}_sigma0")).unwrap().values;
        let s1 = &r.series(&format!("F{n}_sigma0.1")).unwrap().values;
        let s2 = &r.series(&format!("F{n}_sigma0.2")).unwrap().values;
        for i in 0..grid.len() {
            assert_abs_diff_eq!(s0[i], 1.0, epsilon = 1e-10);
            assert!(s1[i] < s0[i] && s2[i] < s1[i], "N={n} d={}", grid[i]);
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let grid: Vec<f64> = (1..=24).map(|i| i as f64 * 8.0).collect();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sweep(SweepKind::Fig6, &grid, &options()).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert_eq!(one.to_csv(), many.to_csv());
    for (a, b) in one.series.iter().zip(&many.series) {
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(sweep(SweepKind::Fig6, &[], &options()).is_err());
    assert!(sweep(SweepKind::Fig7, &[0.1, 0.1], &options()).is_err());
    assert!(sweep(SweepKind::Fig5b, &[f64::NAN], &options()).is_err());
}
