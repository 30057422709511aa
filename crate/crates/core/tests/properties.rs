use proptest::prelude::*;

use proxyid::design::{octahedron, validate_design, DesignSet, DesignSource};
use proxyid::harmonics::{eval_harmonics, truncated_kernel, truncation_bound};
use proxyid::kernel::laplace_kernel;
use proxyid::lowrank::id_rows;
use proxyid::proxy::{apply_id, bound_proposition, bound_theorem, build_proxy_id_with_design, decide_c, BoundInputs};
use proxyid::sampling::{random_rotation, rotate, sample_ball, sample_shell, SeededRng};
use proxyid::{DenseMatrix, Point3, PointSet, RunConfig, ShellGeometry};

fn unit(theta: f64, phi: f64) -> Point3 {
    Point3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Legendre polynomial by the three-term recurrence.
fn legendre(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_point_addition_theorem(t1 in 0.0..std::f64::consts::PI, p1 in 0.0..6.3f64,
                                  t2 in 0.0..std::f64::consts::PI, p2 in 0.0..6.3f64, l in 0usize..40) {
        let (u, v) = (unit(t1, p1), unit(t2, p2));
        let (a, b) = (eval_harmonics(u, l).unwrap(), eval_harmonics(v, l).unwrap());
        let s: f64 = a.level(l).iter().zip(b.level(l)).map(|(x, y)| x * y).sum();
        let expect = (2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * legendre(l, u.dot(&v).clamp(-1.0, 1.0));
        prop_assert!((s - expect).abs() < 1e-11, "l={l}: {s} vs {expect}");
    }

    #[test]
    fn remainder_respects_bound(seed in any::<u64>(), c in 0usize..25, r2 in 1.2f64..5.0) {
        let g = ShellGeometry::new(1.0, r2).unwrap();
        let mut rng = SeededRng::new(seed);
        let x = sample_ball(1, 1.0, &mut rng).get(0);
        let y = rng.direction().scale(r2 * (1.0 + rng.unit()));
        let err = (laplace_kernel(x, y).unwrap() - truncated_kernel(x, y, c).unwrap()).abs();
        prop_assert!(err <= truncation_bound(&g, c) * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn design_certification_is_rotation_invariant(seed in any::<u64>()) {
        let r = random_rotation(&mut SeededRng::new(seed));
        let pts: Vec<Point3> = octahedron().iter().map(|&p| rotate(&r, p)).collect();
        let ps = PointSet::new("rotated", pts).unwrap();
        prop_assert!(validate_design(&ps, 3, 1e-12).unwrap().passed);
        prop_assert!(!validate_design(&ps, 4, 1e-12).unwrap().passed);
    }

    #[test]
    fn decide_c_is_monotone(r2 in 1.3f64..20.0, dr in 0.0f64..10.0, e in -10.0f64..-2.0, de in 0.0f64..3.0) {
        let eps = 10f64.powf(e);
        let near = ShellGeometry::new(1.0, r2).unwrap();
        let far = ShellGeometry::new(1.0, r2 + dr).unwrap();
        prop_assert!(decide_c(&far, eps, 2.0, 2000) <= decide_c(&near, eps, 2.0, 2000));
        let tighter = eps / 10f64.powf(de);
        prop_assert!(decide_c(&near, tighter, 2.0, 2000) >= decide_c(&near, eps, 2.0, 2000));
    }

    #[test]
    fn rowwise_bound_never_exceeds_a_priori(c in 0usize..60, res in 0.0f64..1.0, eps_scale in 1.0f64..10.0,
                                            u in 0.0f64..2.0, k in 0usize..500) {
        let b = BoundInputs { c, yp_residual: res * 1e-6, u_inf: u, k_rep: k,
                              geometry: ShellGeometry::new(1.0, 2.0).unwrap() };
        let t = bound_theorem(&b, 1e-6 * eps_scale);
        prop_assert!(t.rowwise <= t.a_priori);
        prop_assert!(t.rowwise == bound_proposition(&b));
    }

    #[test]
    fn id_contract_on_random_low_rank(seed in any::<u64>(), n in 5usize..40, m in 5usize..60, k in 1usize..8) {
        let mut rng = SeededRng::new(seed);
        let k = k.min(n).min(m);
        let b = DenseMatrix::from_fn(n, k, |_, _| rng.normal());
        let c = DenseMatrix::from_fn(k, m, |_, _| rng.normal());
        let a = b.matmul(&c).unwrap();
        let tol = 1e-8 * (m as f64).sqrt();
        let id = id_rows(&a, tol, 2.0).unwrap();
        prop_assert!(id.max_abs_projection() <= 2.0 * (1.0 + 1e-12));
        prop_assert!(id.max_residual() <= tol);
        prop_assert!(id.rank() <= k);
        for (p, &s) in id.skeleton.iter().enumerate() {
            for q in 0..id.rank() {
                prop_assert_eq!(id.projection.get(s, q), if p == q { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn rank_grows_as_tolerance_shrinks(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let x0 = sample_ball(40, 1.0, &mut rng);
        let y = sample_shell(60, 2.0, 3.0, &mut rng);
        let a = proxyid::kernel::kernel_matrix(&x0, &y).unwrap();
        let mut prev = 0;
        for e in [-2, -4, -6, -8, -10, -12] {
            let k = id_rows(&a, 10f64.powi(e), 2.0).unwrap().rank();
            prop_assert!(k >= prev, "tol 1e{e}: {k} < {prev}");
            prev = k;
        }
    }

    #[test]
    fn apply_id_is_columnwise(seed in any::<u64>(), n1 in 1usize..40, n2 in 1usize..40) {
        let mut rng = SeededRng::new(seed);
        let x0 = sample_ball(30, 1.0, &mut rng);
        let design = DesignSet::certify(octahedron(), 3, 1e-12, DesignSource::Builtin("octahedron")).unwrap();
        let cfg = RunConfig::new(ShellGeometry::new(1.0, 2.5).unwrap(), 1e-4, 2.0, seed).unwrap().with_c(1);
        let pid = build_proxy_id_with_design(&x0, &cfg, design).unwrap();
        let a = sample_shell(n1, 2.5, 6.0, &mut rng);
        let b = sample_shell(n2, 2.5, 6.0, &mut rng);
        let both = apply_id(&pid, &a.concat(&b, "ab")).unwrap();
        let joined = apply_id(&pid, &a).unwrap().hcat(&apply_id(&pid, &b).unwrap()).unwrap();
        prop_assert_eq!(both.as_slice(), joined.as_slice());
    }
}
