//! Cross-module invariants checked on random inputs.

use std::sync::Arc;

use proptest::prelude::*;
use stablekit::ergodic::{power_lyapunov, OccupationHistogram};
use stablekit::fd_oracle::{assemble, assemble_and_solve, FdConfig};
use stablekit::grid::Exterior1D;
use stablekit::mc::{map_paths, McEstimate};
use stablekit::path::{simulate, EulerConfig};
use stablekit::{DomainSpec, KernelModel, Point, RngStream, StreamRange};

fn stable(alpha: f64) -> KernelModel {
    KernelModel::stable(1, alpha, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn histogram_mass_is_conserved_under_merge_and_coarsening(
        steps in prop::collection::vec((-2.0f64..2.0, 0u8..4), 1..400),
        split in 0usize..400,
    ) {
        let dt = 0.01;
        let mut whole = OccupationHistogram::new(-1.0, 1.0, 8, dt).unwrap();
        let mut a = whole.clone();
        let mut b = whole.clone();
        let mut total = 0.0;
        for (i, (x, kind)) in steps.iter().enumerate() {
            // a quarter of the steps are partial
            let held = if *kind == 0 { dt * 0.37 } else { dt };
            total += held;
            whole.add(*x, held);
            if i < split { a.add(*x, held) } else { b.add(*x, held) }
        }
        a.merge(&b).unwrap();
        prop_assert_eq!(&a.counts, &whole.counts);
        prop_assert_eq!(a.outside_counts, whole.outside_counts);
        prop_assert!((whole.total_mass() - total).abs() <= 1e-12 * total.max(1.0));
        let c = whole.coarsen(4).unwrap();
        prop_assert!((c.in_window_mass() - whole.in_window_mass()).abs() <= 1e-15 * total.max(1.0));
        let (p, out) = whole.normalized();
        prop_assert!((p.iter().sum::<f64>() + out - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fd_operator_annihilates_constants(alpha in 1.05f64..1.95, n in 16usize..200, c in -5.0f64..5.0) {
        let g: Exterior1D = Arc::new(move |_| c);
        let sys = assemble(&stable(alpha), -1.0, 1.0, &g, &FdConfig::with_n(n)).unwrap();
        let r = sys.apply(&vec![c; n]);
        prop_assert!(r.iter().all(|v| v.abs() < 1e-10 * (1.0 + c.abs())), "{:?}", r.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn fd_solution_is_linear_and_nonnegative(alpha in 1.1f64..1.9, scale in 0.1f64..10.0) {
        let cfg = FdConfig::with_n(64);
        let u1 = assemble_and_solve(&stable(alpha), -1.0, 1.0, &|x| 1.0 + x * x, None, &cfg).unwrap();
        let u2 = assemble_and_solve(&stable(alpha), -1.0, 1.0, &move |x| scale * (1.0 + x * x), None, &cfg).unwrap();
        for (a, b) in u1.u.values.iter().zip(&u2.u.values) {
            prop_assert!(*a >= 0.0);
            prop_assert!((b - scale * a).abs() <= 1e-9 * (scale * a).abs().max(1e-12));
        }
    }

    #[test]
    fn trajectories_are_reproducible_and_exit_outside(seed in any::<u64>(), stream in 0u64..1000, alpha in 1.1f64..1.9) {
        let m = stable(alpha);
        let dom = DomainSpec::interval(-1.0, 1.0).unwrap();
        let cfg = EulerConfig::new(1e-2, 50.0, alpha);
        let a = simulate(&m, &Point::scalar(0.2), &cfg, Some(&dom), &mut RngStream::new(seed, stream)).unwrap();
        let b = simulate(&m, &Point::scalar(0.2), &cfg, Some(&dom), &mut RngStream::new(seed, stream)).unwrap();
        prop_assert_eq!(&a.exit, &b.exit);
        if let Some(e) = a.exit {
            prop_assert!(!dom.contains(&e.exit_state));
            prop_assert!(e.time <= 50.0);
        }
    }

    #[test]
    fn estimates_do_not_depend_on_worker_count(seed in any::<u64>()) {
        let s = StreamRange::new(seed, 0, 500);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| map_paths(&s, |_, r| r.exp1()))
        };
        let (a, b) = (run(1), run(4));
        prop_assert_eq!(McEstimate::from_samples(&a, &s, 0), McEstimate::from_samples(&b, &s, 0));
    }

    #[test]
    fn glued_power_function_is_continuous_to_second_order(gamma in 0.3f64..1.9, theta in 0.0f64..6.3) {
        let v = power_lyapunov(gamma);
        let u = Point::polar(1.0, theta);
        let (inner, outer) = (u * (1.0 - 1e-7), u * (1.0 + 1e-7));
        prop_assert!((v.eval(&inner).unwrap() - v.eval(&outer).unwrap()).abs() < 1e-6);
        prop_assert!((v.grad(&inner) - v.grad(&outer)).norm() < 1e-5);
        let (hi, ho) = (v.hess(&inner), v.hess(&outer));
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((hi[i][j] - ho[i][j]).abs() < 1e-5);
            }
        }
        prop_assert!(v.eval(&Point::polar(0.0, 0.0)).unwrap().is_finite());
    }
}
