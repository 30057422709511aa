//! Proxy-surface compression of far-field Laplace interactions.
//!
//! For sources X0 ⊂ B(0, r1) the interaction with any far field
//! Y ⊂ R³ \ B(0, r2) is compressed by a row ID of the much smaller matrix
//! K(X0, Yp), where Yp is an equal-weight design of degree ≥ 2c scaled to
//! the sphere Γ = ∂B(0, r2):
//!
//! ```text
//! K(X0, Yp) ≈ U·K(X_rep, Yp)   ⇒   K(X0, Y0) ≈ U·K(X_rep, Y0)
//! ```
//!
//! The row error e_i(y) = K(x_i, y) − u_iᵀK(X_rep, y) is harmonic outside
//! B(0, r1) and vanishes at infinity, so its maximum over Y is attained on Γ.

use rayon::prelude::*;

use crate::design::{scale_to_surface, DesignLibrary, DesignSet};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointSet, RunConfig, ShellGeometry};
use crate::kernel::{kernel_matrix, kernel_unchecked};
use crate::lowrank::id_rows;
use crate::matrix::{gemm, norm2, DenseMatrix, MatRef};
use crate::sampling::fibonacci_sphere;

/// Default sample count for maxima over Γ.
pub const GAMMA_SAMPLES: usize = 20_000;
/// Entry budget above which [`rowwise_error_stats`] refuses to run.
pub const MAX_EVAL_ENTRIES: usize = 1_000_000_000;

const COLUMN_BLOCK: usize = 2048;

/// Smallest c ≥ 1 whose truncation term
/// (c_qr·min(n_x0, 2c²+2c+2) + 1)/(r2 − r1)·(r1/r2)^{c+1} is at most ε.
pub fn decide_c(geom: &ShellGeometry, epsilon: f64, c_qr: f64, n_x0: usize) -> usize {
    let (ratio, gap) = (geom.ratio(), geom.gap());
    let mut c = 1usize;
    loop {
        let n = (n_x0 as f64).min(crate::design::design_size(c) as f64);
        let term = (c_qr * n + 1.0) / gap * ratio.powi(c as i32 + 1);
        if term <= epsilon || c >= i32::MAX as usize - 1 {
            return c;
        }
        c += 1;
    }
}

/// Compressed representation of K(X0, ·) on the far field.
#[derive(Clone, Debug)]
pub struct ProxyID {
    geometry: ShellGeometry,
    c: usize,
    epsilon: f64,
    c_qr: f64,
    design: DesignSet,
    yp: PointSet,
    x0: PointSet,
    x_rep: PointSet,
    skeleton: Vec<usize>,
    projection: DenseMatrix,
    yp_row_residuals: Vec<f64>,
    is_skeleton: Vec<bool>,
}

impl ProxyID {
    pub fn geometry(&self) -> &ShellGeometry {
        &self.geometry
    }

    /// Expansion order.
    pub fn c(&self) -> usize {
        self.c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c_qr(&self) -> f64 {
        self.c_qr
    }

    /// Unit-sphere design used for Yp.
    pub fn design(&self) -> &DesignSet {
        &self.design
    }

    /// Proxy points on Γ.
    pub fn yp(&self) -> &PointSet {
        &self.yp
    }

    pub fn x0(&self) -> &PointSet {
        &self.x0
    }

    pub fn x_rep(&self) -> &PointSet {
        &self.x_rep
    }

    /// Indices of X_rep within X0.
    pub fn skeleton(&self) -> &[usize] {
        &self.skeleton
    }

    pub fn rank(&self) -> usize {
        self.skeleton.len()
    }

    /// U, |X0| × |X_rep|.
    pub fn projection(&self) -> &DenseMatrix {
        &self.projection
    }

    /// ‖e_i(Yp)‖₂ per row.
    pub fn yp_row_residuals(&self) -> &[f64] {
        &self.yp_row_residuals
    }

    /// The ID threshold ε·√|Yp|.
    pub fn threshold(&self) -> f64 {
        self.epsilon * (self.yp.len() as f64).sqrt()
    }

    pub fn is_skeleton(&self, i: usize) -> bool {
        self.is_skeleton[i]
    }

    /// ‖u_i‖∞.
    pub fn u_inf(&self, i: usize) -> f64 {
        self.projection.row(i).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Bound inputs for row i with measured residual and ‖u_i‖∞.
    pub fn bound_inputs(&self, i: usize) -> BoundInputs {
        BoundInputs {
            c: self.c,
            yp_residual: self.yp_row_residuals[i] / (self.yp.len() as f64).sqrt(),
            u_inf: self.u_inf(i),
            k_rep: self.rank(),
            geometry: self.geometry,
        }
    }
}

/// Builds the proxy ID taking the design from `library`.
pub fn build_proxy_id(x0: &PointSet, cfg: &RunConfig, library: &DesignLibrary) -> Result<ProxyID> {
    cfg.validate()?;
    check_sources(x0, &cfg.geometry)?;
    let c = chosen_c(x0, cfg);
    let design = library.find(2 * c)?;
    build_proxy_id_with_design(x0, cfg, design)
}

/// Builds the proxy ID on a caller-supplied design, which must be certified
/// to degree ≥ 2c.
pub fn build_proxy_id_with_design(x0: &PointSet, cfg: &RunConfig, design: DesignSet) -> Result<ProxyID> {
    cfg.validate()?;
    check_sources(x0, &cfg.geometry)?;
    let c = chosen_c(x0, cfg);
    if design.degree() < 2 * c {
        return Err(Error::MissingDesign {
            degree: 2 * c,
            reason: format!("supplied design is only certified to degree {}", design.degree()),
        });
    }
    let geometry = cfg.geometry;
    let yp = scale_to_surface(&design, geometry.r2());
    let a = kernel_matrix(x0, &yp)?;
    let tol = cfg.epsilon * (yp.len() as f64).sqrt();
    let id = id_rows(&a, tol, cfg.c_qr)?;
    let mut is_skeleton = vec![false; x0.len()];
    for &s in &id.skeleton {
        is_skeleton[s] = true;
    }
    let x_rep = x0.subset(&id.skeleton, "x_rep");
    Ok(ProxyID {
        geometry,
        c,
        epsilon: cfg.epsilon,
        c_qr: cfg.c_qr,
        design,
        yp,
        x0: x0.clone(),
        x_rep,
        skeleton: id.skeleton,
        projection: id.projection,
        yp_row_residuals: id.row_residuals,
        is_skeleton,
    })
}

fn chosen_c(x0: &PointSet, cfg: &RunConfig) -> usize {
    cfg.c_override
        .unwrap_or_else(|| decide_c(&cfg.geometry, cfg.epsilon, cfg.c_qr, x0.len().max(1)))
}

fn check_sources(x0: &PointSet, geom: &ShellGeometry) -> Result<()> {
    if x0.is_empty() {
        return Err(Error::InvalidArgument("no source points".into()));
    }
    if let Some((i, p)) = x0.iter().enumerate().find(|(_, p)| !geom.in_source(p)) {
        return Err(Error::Domain(format!(
            "source point {i} at radius {} is not inside B(0, {})",
            p.norm(),
            geom.r1()
        )));
    }
    Ok(())
}

fn check_targets(y0: &PointSet, geom: &ShellGeometry) -> Result<()> {
    // points on Γ are accepted up to rounding of the scaling
    let r_min = geom.r2() * (1.0 - 4.0 * f64::EPSILON);
    if let Some((j, p)) = y0.iter().enumerate().find(|(_, p)| !(p.norm() >= r_min)) {
        return Err(Error::Domain(format!(
            "target point {j} at radius {} is inside B(0, {})",
            p.norm(),
            geom.r2()
        )));
    }
    Ok(())
}

/// U·K(X_rep, Y0), the compressed approximation of K(X0, Y0).
pub fn apply_id(pid: &ProxyID, y0: &PointSet) -> Result<DenseMatrix> {
    check_targets(y0, &pid.geometry)?;
    let k_rep = kernel_matrix(&pid.x_rep, y0)?;
    pid.projection.matmul(&k_rep)
}

/// e_i(y) = K(x_i, y) − u_iᵀK(X_rep, y).
pub fn error_function(pid: &ProxyID, i: usize, y: Point3) -> Result<f64> {
    if i >= pid.x0.len() {
        return Err(Error::InvalidArgument(format!("row {i} out of range")));
    }
    let k = |x: &Point3| crate::kernel::laplace_kernel(*x, y);
    let mut approx = 0.0;
    for (u, x) in pid.projection.row(i).iter().zip(pid.x_rep.iter()) {
        let kv = k(x)?;
        if *u != 0.0 {
            approx += u * kv;
        }
    }
    Ok(k(&pid.x0.get(i))? - approx)
}

/// Symbols of the per-row error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    pub c: usize,
    /// ‖e_i(Yp)‖₂ / √|Yp|.
    pub yp_residual: f64,
    /// ‖u_i‖∞.
    pub u_inf: f64,
    /// |X_rep|.
    pub k_rep: usize,
    pub geometry: ShellGeometry,
}

/// (c+1)·yp_residual + (c+2)(1 + k_rep·u_inf)/(r2 − r1)·(r1/r2)^{c+1}.
pub fn bound_proposition(b: &BoundInputs) -> f64 {
    let c = b.c as f64;
    let tail = b.geometry.ratio().powi(b.c as i32 + 1) / b.geometry.gap();
    (c + 1.0) * b.yp_residual + (c + 2.0) * (1.0 + b.k_rep as f64 * b.u_inf) * tail
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoremBounds {
    /// With the measured Yp residual.
    pub rowwise: f64,
    /// With the Yp residual replaced by ε.
    pub a_priori: f64,
}

/// Bounds on ‖e_i(Y0)‖₂/√|Y0| for any Y0 ⊂ Y.
pub fn bound_theorem(b: &BoundInputs, epsilon: f64) -> TheoremBounds {
    TheoremBounds {
        rowwise: bound_proposition(b),
        a_priori: bound_proposition(&BoundInputs { yp_residual: epsilon, ..*b }),
    }
}

/// (2c + 3)·ε.
pub fn bound_simplified(c: usize, epsilon: f64) -> f64 {
    (2 * c + 3) as f64 * epsilon
}

/// (c+1)ε + (c+2)(1 + max_i‖u_i‖∞·|X_rep|)/(r2 − r1)·(r1/r2)^{c+1}, a bound
/// on |e_i(y)| over all rows and all y ∈ Y.
pub fn bound_global(pid: &ProxyID, epsilon: f64) -> f64 {
    let u_max = pid.projection.max_abs();
    bound_proposition(&BoundInputs {
        c: pid.c,
        yp_residual: epsilon,
        u_inf: u_max,
        k_rep: pid.rank(),
        geometry: pid.geometry,
    })
}

/// Quasi-uniform sample of Γ.
pub fn gamma_samples(geom: &ShellGeometry, n_samples: usize) -> PointSet {
    fibonacci_sphere(n_samples).scaled(geom.r2()).with_label("gamma")
}

/// max |e_i(y)| over a Fibonacci sample of Γ for row `i`.
pub fn max_error_on_gamma(pid: &ProxyID, i: usize, n_samples: usize) -> Result<f64> {
    if i >= pid.x0.len() {
        return Err(Error::InvalidArgument(format!("row {i} out of range")));
    }
    check_gamma_count(n_samples)?;
    if pid.is_skeleton[i] {
        return Ok(0.0);
    }
    let gamma = gamma_samples(&pid.geometry, n_samples);
    let xi = pid.x0.get(i);
    let u = pid.projection.row(i);
    let worst = gamma
        .points()
        .par_iter()
        .map(|y| {
            let approx: f64 = u.iter().zip(pid.x_rep.iter()).map(|(a, x)| a * kernel_unchecked(x, y)).sum();
            (kernel_unchecked(&xi, y) - approx).abs()
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// [`max_error_on_gamma`] for every row at once, evaluated in column blocks.
pub fn max_errors_on_gamma(pid: &ProxyID, n_samples: usize) -> Result<Vec<f64>> {
    check_gamma_count(n_samples)?;
    let gamma = gamma_samples(&pid.geometry, n_samples);
    let mut stats = BlockStats::new(pid.x0.len());
    accumulate_errors(pid, &gamma, &mut stats)?;
    for (i, m) in stats.max.iter_mut().enumerate() {
        if pid.is_skeleton[i] {
            *m = 0.0;
        }
    }
    Ok(stats.max)
}

fn check_gamma_count(n: usize) -> Result<()> {
    if n < 1000 {
        return Err(Error::InvalidArgument(format!("need at least 1000 samples of the proxy surface, got {n}")));
    }
    Ok(())
}

struct BlockStats {
    max: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl BlockStats {
    fn new(n: usize) -> Self {
        Self { max: vec![0.0; n], sum_sq: vec![0.0; n] }
    }
}

/// Accumulates per-row max |e_i| and Σ e_i² over `ys` in column blocks.
fn accumulate_errors(pid: &ProxyID, ys: &PointSet, stats: &mut BlockStats) -> Result<()> {
    let n = pid.x0.len();
    let k = pid.rank();
    for start in (0..ys.len()).step_by(COLUMN_BLOCK) {
        let idx: Vec<usize> = (start..(start + COLUMN_BLOCK).min(ys.len())).collect();
        let block = ys.subset(&idx, "block");
        let w = block.len();
        let mut err = kernel_matrix(&pid.x0, &block)?.into_vec();
        let k_rep = kernel_matrix(&pid.x_rep, &block)?;
        gemm(
            -1.0,
            MatRef::row_major(pid.projection.as_slice(), n, k),
            MatRef::row_major(k_rep.as_slice(), k, w),
            1.0,
            &mut err,
            w,
        );
        for (i, row) in err.chunks_exact(w).enumerate() {
            let (mut m, mut s) = (stats.max[i], 0.0);
            for e in row {
                m = m.max(e.abs());
                s += e * e;
            }
            stats.max[i] = m;
            stats.sum_sq[i] += s;
        }
    }
    Ok(())
}

/// Per-row error measurements and bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct RowErrors {
    pub row: usize,
    pub is_skeleton: bool,
    /// ‖e_i(Y0)‖₂ / √|Y0|.
    pub avg_entry_err: f64,
    /// max_{y ∈ Y0} |e_i(y)|.
    pub max_entry_err: f64,
    /// ‖e_i(Yp)‖₂ / √|Yp|.
    pub yp_residual: f64,
    pub u_inf: f64,
    pub bound_proposition: f64,
    /// Theorem bound with measured residual and ‖u_i‖∞.
    pub bound_rowwise: f64,
    /// Theorem bound with ε and C_qr in place of the measured values.
    pub bound_a_priori: f64,
}

#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub n_targets: usize,
    pub epsilon: f64,
    pub c: usize,
    pub rows: Vec<RowErrors>,
}

impl ErrorReport {
    /// Rows outside the skeleton.
    pub fn non_skeleton(&self) -> impl Iterator<Item = &RowErrors> {
        self.rows.iter().filter(|r| !r.is_skeleton)
    }
}

/// Errors of U·K(X_rep, Y0) against the exact K(X0, Y0), row by row.
pub fn rowwise_error_stats(pid: &ProxyID, y0: &PointSet) -> Result<ErrorReport> {
    if y0.is_empty() {
        return Err(Error::InvalidArgument("no target points".into()));
    }
    let entries = pid.x0.len().saturating_mul(y0.len());
    if entries > MAX_EVAL_ENTRIES {
        return Err(Error::TooLarge(format!(
            "{} x {} = {entries} kernel entries exceeds {MAX_EVAL_ENTRIES}; split the targets into blocks",
            pid.x0.len(),
            y0.len()
        )));
    }
    check_targets(y0, &pid.geometry)?;
    let mut stats = BlockStats::new(pid.x0.len());
    accumulate_errors(pid, y0, &mut stats)?;
    let sqrt_n = (y0.len() as f64).sqrt();
    let rows = (0..pid.x0.len())
        .map(|i| {
            let b = pid.bound_inputs(i);
            let theorem = bound_theorem(&b, pid.epsilon);
            let a_priori = bound_proposition(&BoundInputs { yp_residual: pid.epsilon, u_inf: pid.c_qr, ..b });
            let skel = pid.is_skeleton[i];
            RowErrors {
                row: i,
                is_skeleton: skel,
                avg_entry_err: if skel { 0.0 } else { stats.sum_sq[i].sqrt() / sqrt_n },
                max_entry_err: if skel { 0.0 } else { stats.max[i] },
                yp_residual: b.yp_residual,
                u_inf: b.u_inf,
                bound_proposition: bound_proposition(&b),
                bound_rowwise: theorem.rowwise,
                bound_a_priori: a_priori,
            }
        })
        .collect();
    Ok(ErrorReport { n_targets: y0.len(), epsilon: pid.epsilon, c: pid.c, rows })
}

/// ‖e_i(Y0)‖₂ for one row, evaluated pointwise.
pub fn row_error_norm(pid: &ProxyID, i: usize, y0: &PointSet) -> Result<f64> {
    let errs = y0.iter().map(|y| error_function(pid, i, *y)).collect::<Result<Vec<_>>>()?;
    Ok(norm2(&errs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{load_design, octahedron, DesignSource};
    use crate::sampling::{sample_ball, sample_shell, SeededRng};

    fn g(r1: f64, r2: f64) -> ShellGeometry {
        ShellGeometry::new(r1, r2).unwrap()
    }

    #[test]
    fn decide_c_examples() {
        assert_eq!(decide_c(&g(1.0, 2.0), 1e-8, 2.0, 2000), 38);
        assert_eq!(decide_c(&g(1.0, 2.0), 1e-6, 2.0, 2000), 31);
        assert!(decide_c(&g(1.0, 100.0), 1e-6, 2.0, 2000) <= 4);
        assert_eq!(decide_c(&g(1.0, 1e6), 1.0, 2.0, 1), 1);
    }

    #[test]
    fn bound_arithmetic() {
        let b = BoundInputs { c: 30, yp_residual: 1e-6, u_inf: 2.0, k_rep: 298, geometry: g(1.0, 2.0) };
        let expect = 31e-6 + 32.0 * 597.0 * 0.5f64.powi(31);
        assert!((bound_proposition(&b) - expect).abs() < 1e-18);
        assert!((bound_proposition(&b) - 3.99e-5).abs() < 1e-7);
        let zero = BoundInputs { yp_residual: 0.0, k_rep: 0, ..b };
        assert!((bound_proposition(&zero) - 32.0 * 0.5f64.powi(31)).abs() < 1e-24);
        let t = bound_theorem(&BoundInputs { yp_residual: 5e-7, ..b }, 1e-6);
        assert!(t.rowwise <= t.a_priori);
        assert!((bound_simplified(30, 1e-6) - 6.3e-5).abs() < 1e-18);
        assert_eq!(bound_simplified(0, 1.0), 3.0);
    }

    fn small_design() -> DesignSet {
        DesignSet::certify(octahedron(), 3, 1e-12, DesignSource::Builtin("octahedron")).unwrap()
    }

    fn small_pid(seed: u64) -> ProxyID {
        let x0 = sample_ball(60, 1.0, &mut SeededRng::new(seed));
        let cfg = RunConfig::new(g(1.0, 3.0), 1e-3, 2.0, seed).unwrap().with_c(1);
        build_proxy_id_with_design(&x0, &cfg, small_design()).unwrap()
    }

    #[test]
    fn single_source_point() {
        let x0 = PointSet::new("one", vec![Point3::new(0.1, 0.2, 0.3)]).unwrap();
        let cfg = RunConfig::new(g(1.0, 2.0), 1e-6, 2.0, 0).unwrap().with_c(1);
        let pid = build_proxy_id_with_design(&x0, &cfg, small_design()).unwrap();
        assert_eq!(pid.skeleton(), &[0]);
        assert_eq!(pid.projection().as_slice(), &[1.0]);
    }

    #[test]
    fn under_resolved_design_is_refused() {
        let x0 = sample_ball(10, 1.0, &mut SeededRng::new(1));
        let cfg = RunConfig::new(g(1.0, 2.0), 1e-6, 2.0, 0).unwrap().with_c(2);
        assert!(matches!(
            build_proxy_id_with_design(&x0, &cfg, small_design()),
            Err(Error::MissingDesign { .. })
        ));
    }

    #[test]
    fn containment_is_checked() {
        let x0 = PointSet::new("out", vec![Point3::new(0.0, 0.0, 1.5)]).unwrap();
        let cfg = RunConfig::new(g(1.0, 2.0), 1e-6, 2.0, 0).unwrap().with_c(1);
        assert!(matches!(build_proxy_id_with_design(&x0, &cfg, small_design()), Err(Error::Domain(_))));
        let pid = small_pid(3);
        let inside = PointSet::new("in", vec![Point3::new(0.0, 2.0, 0.0)]).unwrap();
        assert!(matches!(apply_id(&pid, &inside), Err(Error::Domain(_))));
    }

    #[test]
    fn skeleton_rows_are_exact() {
        let pid = small_pid(5);
        let y0 = sample_shell(50, 3.0, 6.0, &mut SeededRng::new(9));
        let approx = apply_id(&pid, &y0).unwrap();
        let exact = kernel_matrix(pid.x0(), &y0).unwrap();
        for &s in pid.skeleton() {
            assert_eq!(approx.row(s), exact.row(s));
            assert_eq!(error_function(&pid, s, y0.get(0)).unwrap(), 0.0);
        }
        assert!(pid.yp_row_residuals().iter().all(|&r| r <= pid.threshold()));
    }

    #[test]
    fn residuals_on_yp_match_error_function() {
        let pid = small_pid(6);
        for i in 0..pid.x0().len() {
            let r = row_error_norm(&pid, i, &pid.yp().clone()).unwrap();
            assert!((r - pid.yp_row_residuals()[i]).abs() <= 1e-12 * (1.0 + r));
        }
    }

    #[test]
    fn error_decays_away_from_sources() {
        let pid = small_pid(8);
        let mut rng = SeededRng::new(2);
        let i = (0..pid.x0().len()).find(|&i| !pid.is_skeleton(i)).unwrap();
        let dirs: Vec<Point3> = (0..10).map(|_| rng.direction()).collect();
        let mut prev = f64::INFINITY;
        for r in [3.0, 6.0, 12.0, 24.0] {
            let m = dirs
                .iter()
                .map(|d| error_function(&pid, i, d.scale(r)).unwrap().abs())
                .fold(0.0, f64::max);
            assert!(m < prev, "radius {r}");
            prev = m;
        }
    }

    #[test]
    fn gamma_maxima_agree_between_paths() {
        let pid = small_pid(4);
        let all = max_errors_on_gamma(&pid, 3000).unwrap();
        for i in 0..pid.x0().len() {
            let one = max_error_on_gamma(&pid, i, 3000).unwrap();
            assert!((one - all[i]).abs() <= 1e-14, "row {i}");
        }
        assert!(max_error_on_gamma(&pid, 0, 10).is_err());
    }

    #[test]
    fn memory_guard() {
        let x0 = sample_ball(2000, 1.0, &mut SeededRng::new(1));
        let cfg = RunConfig::new(g(1.0, 3.0), 1e-3, 2.0, 1).unwrap().with_c(1);
        let pid = build_proxy_id_with_design(&x0, &cfg, small_design()).unwrap();
        let big = PointSet::new("big", vec![Point3::new(5.0, 0.0, 0.0); 500_001]).unwrap();
        assert!(matches!(rowwise_error_stats(&pid, &big), Err(Error::TooLarge(_))));
    }

    #[test]
    fn loads_designs_from_files() {
        let dir = std::env::temp_dir().join(format!("proxyid-design-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("octa.txt");
        octahedron().write(&path, &["t=3 N=6".to_string()]).unwrap();
        let d = load_design(&path, 2).unwrap();
        assert_eq!(d.degree(), 3);
        let lib = DesignLibrary::new(&dir);
        assert_eq!(lib.find(3).unwrap().len(), 6);
        assert!(lib.find(4).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
