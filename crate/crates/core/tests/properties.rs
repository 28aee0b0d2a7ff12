use proptest::prelude::*;

use preview_lqr::costs::{frozen_index, frozen_schedule, random_uniform_schedule, CostBounds, CostSource, FrozenView};
use preview_lqr::experiments::{parse_csv, render_csv, GridRow};
use preview_lqr::linalg::{Mat, Vector};
use preview_lqr::riccati::backward_riccati;
use preview_lqr::seed::{substream, Role};
use preview_lqr::system::{eigenvalues, place_poles_single_input, real_poles, LinearSystem};

fn system(n: usize, entries: &[f64]) -> Option<LinearSystem> {
    let a = Mat::from_row_slice(n, n, &entries[..n * n]);
    let b = Mat::from_column_slice(n, 1, &entries[n * n..n * n + n]);
    LinearSystem::new(a, b, Vector::repeat(n, 1.0)).ok()
}

fn well_conditioned(sys: &LinearSystem) -> bool {
    let n = sys.n();
    let mut ctrb = Mat::zeros(n, n);
    let mut col = sys.b().column(0).into_owned();
    for j in 0..n {
        ctrb.set_column(j, &col);
        col = sys.a() * col;
    }
    let sv = ctrb.singular_values();
    sv.min() > 1e-3 * sv.max()
}

fn finite_row() -> impl Strategy<Value = f64> {
    prop_oneof![Just(f64::NAN), Just(f64::INFINITY), -1e300..1e300, -1.0..1.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pole_placement_assigns_spectrum(
        n in 1usize..=4,
        entries in prop::collection::vec(-1.5..1.5f64, 20),
        poles in prop::collection::vec(-0.9..0.9f64, 4),
    ) {
        let Some(sys) = system(n, &entries) else { return Ok(()) };
        prop_assume!(well_conditioned(&sys));
        let k = place_poles_single_input(&sys, &real_poles(&poles[..n])).unwrap();
        let mut got: Vec<f64> = eigenvalues(&sys.closed_loop(&k)).unwrap().iter().map(|z| z.re).collect();
        let mut want = poles[..n].to_vec();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-4, "got {got:?}, want {want:?}");
        }
    }

    #[test]
    fn step_is_linear(
        entries in prop::collection::vec(-2.0..2.0f64, 20),
        v in prop::collection::vec(-5.0..5.0f64, 14),
        c in -3.0..3.0f64,
    ) {
        let Some(sys) = system(3, &entries) else { return Ok(()) };
        let x1 = Vector::from_column_slice(&v[0..3]);
        let x2 = Vector::from_column_slice(&v[3..6]);
        let u1 = Vector::from_column_slice(&v[6..7]);
        let u2 = Vector::from_column_slice(&v[7..8]);
        let w1 = Vector::from_column_slice(&v[8..11]);
        let w2 = Vector::from_column_slice(&v[11..14]);
        let lhs = sys.step(&(&x1 * c + &x2), &(&u1 * c + &u2), &(&w1 * c + &w2)).unwrap();
        let rhs = sys.step(&x1, &u1, &w1).unwrap() * c + sys.step(&x2, &u2, &w2).unwrap();
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn csv_round_trip(
        cells in prop::collection::vec(
            (1usize..500, 0usize..20, prop::collection::vec(finite_row(), 6), any::<bool>(), 0usize..200),
            0..20,
        ),
    ) {
        let rows: Vec<GridRow> = cells
            .iter()
            .map(|(t, w, v, s, e)| GridRow {
                horizon: *t,
                preview: *w,
                phi_mean: v[0],
                phi_stderr: v[1],
                regret_ours_mean: v[2],
                regret_mpc_mean: v[3],
                bound: v[4],
                margin_min: v[5],
                sufficient_condition: *s,
                excluded_trials: *e,
            })
            .collect();
        let text = render_csv(&rows);
        let back = parse_csv(&text).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        let mut sorted = rows.clone();
        sorted.sort_by_key(|r| (r.horizon, r.preview));
        let bits = |r: &GridRow| {
            [r.phi_mean, r.phi_stderr, r.regret_ours_mean, r.regret_mpc_mean, r.bound, r.margin_min].map(f64::to_bits)
        };
        for (a, b) in sorted.iter().zip(&back) {
            prop_assert_eq!((a.horizon, a.preview, a.sufficient_condition, a.excluded_trials),
                (b.horizon, b.preview, b.sufficient_condition, b.excluded_trials));
            let (x, y) = (bits(a), bits(b));
            for (p, q) in x.iter().zip(&y) {
                prop_assert!(p == q || (f64::from_bits(*p).is_nan() && f64::from_bits(*q).is_nan()));
            }
        }
        prop_assert_eq!(render_csv(&back), text);
    }

    #[test]
    fn frozen_view_matches_materialized_schedule(
        horizon in 2usize..30,
        t_frac in 0.0..1.0f64,
        w in 0usize..10,
        seed in any::<u64>(),
    ) {
        let bounds = CostBounds::benchmark(2, 1);
        let sched = random_uniform_schedule(&bounds, horizon, &mut substream(seed, &[], Role::Schedule)).unwrap();
        let t = ((horizon - 1) as f64 * t_frac) as usize;
        let s = frozen_index(t, w, horizon);
        let view = FrozenView::new(&sched, s);
        let frozen = frozen_schedule(&sched, t, w);
        for i in 0..horizon {
            prop_assert_eq!(view.state_cost(i), frozen.state_cost(i));
            if i + 1 < horizon {
                prop_assert_eq!(view.input_cost(i), frozen.input_cost(i));
            }
        }
        for i in 0..=s {
            prop_assert_eq!(view.state_cost(i), sched.state_cost(i));
            if i + 1 < horizon {
                prop_assert_eq!(view.input_cost(i), sched.input_cost(i));
            }
        }
        let sys = LinearSystem::new(
            Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.1]),
            Mat::from_column_slice(2, 1, &[0.0, 1.0]),
            Vector::repeat(2, 1.0),
        ).unwrap();
        let a = backward_riccati(&sys, &view).unwrap();
        let b = backward_riccati(&sys, &frozen).unwrap();
        for (p, q) in a.p.iter().zip(&b.p) {
            prop_assert!((p - q).amax() <= 1e-12 * q.amax());
        }
    }
}
