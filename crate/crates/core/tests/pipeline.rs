use nalgebra::DMatrix;

use proxyid::design::{
    certified_degree, generate_design, gram_identity_defect, library_file_name, load_design, scale_to_surface,
    validate_design, DesignLibrary,
};
use proxyid::kernel::kernel_matrix;
use proxyid::lowrank::id_rows;
use proxyid::proxy::{
    apply_id, bound_global, bound_proposition, build_proxy_id, max_errors_on_gamma, rowwise_error_stats,
};
use proxyid::sampling::{sample_ball, sample_shell, SeededRng};
use proxyid::{DenseMatrix, Error, RunConfig, ShellGeometry};

fn temp_dir(tag: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("proxyid-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn rank_matches_singular_value_oracle() {
    let mut rng = SeededRng::new(21);
    let (n, m, k) = (60, 90, 5);
    let b = DenseMatrix::from_fn(n, k, |_, _| rng.normal());
    let c = DenseMatrix::from_fn(k, m, |_, _| rng.normal());
    let mut a = b.matmul(&c).unwrap();
    for v in a.as_mut_slice() {
        *v += 1e-9 * rng.normal();
    }
    let sv = DMatrix::from_row_slice(n, m, a.as_slice()).singular_values();
    let tol = 1e-6 * (m as f64).sqrt();
    let oracle = sv.iter().filter(|&&s| s > tol).count();
    assert_eq!(oracle, 5);
    let id = id_rows(&a, tol, 2.0).unwrap();
    assert_eq!(id.rank(), oracle);
    assert!(id.max_residual() <= tol);
}

#[test]
fn generated_designs_round_trip_through_files() {
    let dir = temp_dir("lib");
    for (t, n, seed) in [(6, 26, 1), (6, 40, 2), (8, 42, 3)] {
        let d = generate_design(t, n, &mut SeededRng::new(seed), 5000).unwrap();
        d.write(dir.join(library_file_name(t, n))).unwrap();
    }
    let lib = DesignLibrary::new(&dir);
    assert_eq!(lib.entries().unwrap().len(), 3);
    let six = lib.find(6).unwrap();
    assert_eq!((six.degree(), six.len()), (6, 26));
    let eight = lib.find(7).unwrap();
    assert_eq!(eight.len(), 42);
    assert!(eight.degree() >= 8);
    assert!(matches!(lib.find(9), Err(Error::MissingDesign { .. })));

    let reloaded = load_design(dir.join(library_file_name(6, 26)), 6).unwrap();
    assert!(validate_design(reloaded.points(), 6, 1e-10).unwrap().passed);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn off_sphere_design_files_are_rejected() {
    let dir = temp_dir("bad");
    let path = dir.join("bad.txt");
    std::fs::write(&path, "# t=1 N=2\n0 0 1.001\n0 0 -1\n").unwrap();
    assert!(matches!(load_design(&path, 1), Err(Error::Domain(_))));
    std::fs::write(&path, "# t=1 N=2\n0 0 1\n0 1 0\n").unwrap();
    assert!(matches!(load_design(&path, 1), Err(Error::DesignCertification { .. })));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn small_pipeline_satisfies_bounds() {
    let dir = temp_dir("pipe");
    let d = generate_design(12, 86, &mut SeededRng::new(9), 5000).unwrap();
    d.write(dir.join(library_file_name(12, 86))).unwrap();
    let lib = DesignLibrary::new(&dir);

    let geom = ShellGeometry::new(1.0, 3.0).unwrap();
    let x0 = sample_ball(400, 1.0, &mut SeededRng::new(3));
    let eps = 1e-4;
    let cfg = RunConfig::new(geom, eps, 2.0, 3).unwrap().with_c(6);
    let pid = build_proxy_id(&x0, &cfg, &lib).unwrap();
    assert_eq!(pid.yp().len(), 86);
    assert!(pid.rank() < 86);
    assert!(pid.yp().iter().all(|p| (p.norm() - 3.0).abs() < 1e-14));

    let maxima = max_errors_on_gamma(&pid, 5000).unwrap();
    for (i, m) in maxima.iter().enumerate() {
        if pid.is_skeleton(i) {
            assert_eq!(*m, 0.0);
        } else {
            assert!(*m <= bound_proposition(&pid.bound_inputs(i)), "row {i}");
        }
    }
    let worst = maxima.iter().copied().fold(0.0, f64::max);
    assert!(worst <= bound_global(&pid, eps));

    let y0 = sample_shell(3000, 3.0, 9.0, &mut SeededRng::new(4));
    let report = rowwise_error_stats(&pid, &y0).unwrap();
    for r in &report.rows {
        assert!(r.avg_entry_err <= r.max_entry_err + 1e-18);
        assert!(r.avg_entry_err <= r.bound_rowwise);
        assert!(r.bound_rowwise <= r.bound_a_priori * (1.0 + 1e-12));
        // maximum principle: targets never beat the proxy-surface maximum by more than sampling slack
        assert!(r.max_entry_err <= 1.5 * maxima[r.row] + 1e-15, "row {}", r.row);
    }

    let approx = apply_id(&pid, &y0).unwrap();
    let exact = kernel_matrix(&x0, &y0).unwrap();
    let diff = exact.sub(&approx).unwrap();
    assert!(diff.max_abs() <= worst * 1.5);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bundled_library_certifies() {
    let lib = DesignLibrary::bundled();
    let entries = lib.entries().unwrap();
    assert!(!entries.is_empty(), "no designs in {}", lib.dir().display());
    for e in &entries {
        let d = load_design(&e.path, e.degree).unwrap();
        assert_eq!(d.len(), e.size);
        assert!(d.residual() <= 1e-10);
        if e.degree % 20 == 0 {
            assert!(gram_identity_defect(d.points(), e.degree / 2).unwrap() <= 1e-10, "t={}", e.degree);
        }
    }
}

#[test]
fn surface_scaling_preserves_degree() {
    let d = generate_design(4, 14, &mut SeededRng::new(2), 2000).unwrap();
    let on_gamma = scale_to_surface(&d, 2.5);
    assert_eq!(on_gamma.len(), d.len());
    for (p, q) in on_gamma.iter().zip(d.points().iter()) {
        assert!((p.norm() - 2.5).abs() < 1e-14);
        assert!((p.scale(1.0 / 2.5) - *q).norm() < 1e-15);
    }
    let back = on_gamma.scaled(1.0 / 2.5);
    assert_eq!(certified_degree(&back, 10, 1e-10).unwrap(), certified_degree(d.points(), 10, 1e-10).unwrap());
}
