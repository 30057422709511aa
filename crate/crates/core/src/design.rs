//! Equal-weight spherical quadrature point sets (spherical t-designs).
//!
//! A point set {p_j} of size N on the unit sphere is a t-design when the
//! equal-weight rule (4π/N)·Σ_j f(p_j) integrates every polynomial of degree
//! ≤ t exactly, i.e. when the defects
//!
//! ```text
//! d_l^m = (1/N) Σ_j Y_l^m(p_j),   1 ≤ l ≤ t, |m| ≤ l
//! ```
//!
//! all vanish. Certification checks them against a tolerance; generation
//! drives Σ (d_l^m)² to zero with a damped Gauss–Newton iteration on the
//! sphere.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointSet};
use crate::harmonics::{fill_harmonics, fill_harmonics_with_gradient, sh_count, MAX_DEGREE};
use crate::matrix::{fmt_sci, gemm, MatRef};
use crate::sampling::{fibonacci_sphere, random_rotation, rotate, SeededRng};

/// Defect tolerance applied to design files.
pub const FILE_TOLERANCE: f64 = 1e-10;
/// Defect tolerance applied to freshly generated designs.
pub const GENERATED_TOLERANCE: f64 = 1e-8;
/// Maximum deviation of a file point from unit length before it is rejected.
pub const RESCALE_TOLERANCE: f64 = 1e-8;
/// Environment variable overriding the bundled design directory.
pub const DESIGN_DIR_ENV: &str = "PROXYID_DESIGN_DIR";

#[derive(Clone, Debug, PartialEq)]
pub enum DesignSource {
    File(PathBuf),
    Generated { iterations: usize },
    Builtin(&'static str),
}

/// A certified equal-weight design on the unit sphere.
#[derive(Clone, Debug)]
pub struct DesignSet {
    points: PointSet,
    degree: usize,
    source: DesignSource,
    residual: f64,
    tolerance: f64,
}

impl DesignSet {
    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Certified polynomial exactness degree.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn source(&self) -> &DesignSource {
        &self.source
    }

    /// Largest |defect| over the certified degrees.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Certifies `points` (which must already be unit vectors) to degree
    /// `degree` at `tol`.
    pub fn certify(points: PointSet, degree: usize, tol: f64, source: DesignSource) -> Result<Self> {
        let report = validate_design(&points, degree, tol)?;
        if let Some(fail) = report.first_failure {
            return Err(Error::DesignCertification { l: fail.l, m: fail.m, defect: fail.defect, tol });
        }
        Ok(Self { points, degree, source, residual: report.residual, tolerance: tol })
    }

    /// Header line used in design files.
    pub fn header(&self) -> String {
        format!("t={} N={}", self.degree, self.len())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.points.write(path, &[self.header()])
    }
}

/// Sizes 2c² + 2c + 2 for expansion order c (designs of degree 2c).
pub fn design_size(c: usize) -> usize {
    2 * c * c + 2 * c + 2
}

/// Default point count for degree t; equals [`design_size`] for t = 2c.
pub fn default_size_for_degree(t: usize) -> usize {
    ((t + 1) * (t + 1) + 4) / 2
}

/// Delsarte–Goethals–Seidel lower bound on the size of a t-design on S².
pub fn minimum_size(t: usize) -> usize {
    let e = t / 2;
    if t % 2 == 0 {
        (e + 1) * (e + 1)
    } else {
        (e + 1) * (e + 2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Defect {
    pub l: usize,
    pub m: i64,
    pub defect: f64,
}

/// Outcome of [`validate_design`].
#[derive(Clone, Debug)]
pub struct Validation {
    pub degree: usize,
    pub tolerance: f64,
    pub passed: bool,
    /// max |defect| over 1 ≤ l ≤ degree.
    pub residual: f64,
    pub first_failure: Option<Defect>,
    pub defects: Vec<Defect>,
}

impl Validation {
    /// CSV with columns `l,m,defect`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l,m,defect\n");
        for d in &self.defects {
            let _ = writeln!(out, "{},{},{}", d.l, d.m, fmt_sci(d.defect));
        }
        out
    }
}

fn check_degree(t: usize) -> Result<()> {
    if t > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!("degree {t} exceeds maximum {MAX_DEGREE}")));
    }
    Ok(())
}

/// (1/N) Σ_j Y_l^m(p_j) for every (l, m) with l ≤ t, flat-indexed.
/// Points are projected to the sphere before evaluation.
pub fn design_defects(points: &PointSet, t: usize) -> Result<Vec<f64>> {
    check_degree(t)?;
    let count = sh_count(t);
    let mut sums = vec![0.0; count];
    let mut buf = vec![0.0; count];
    for p in points.iter() {
        let u = p
            .normalized()
            .ok_or_else(|| Error::Domain("design point at the origin".into()))?;
        fill_harmonics(u, t, &mut buf);
        for (s, v) in sums.iter_mut().zip(&buf) {
            *s += v;
        }
    }
    let inv_n = if points.is_empty() { 0.0 } else { 1.0 / points.len() as f64 };
    for s in &mut sums {
        *s *= inv_n;
    }
    Ok(sums)
}

/// Checks the equal-weight rule is exact for every Y_l^m, 1 ≤ l ≤ t, within
/// `tol`. Failure is reported, not raised.
pub fn validate_design(points: &PointSet, t: usize, tol: f64) -> Result<Validation> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty design".into()));
    }
    let sums = design_defects(points, t)?;
    let mut defects = Vec::with_capacity(sums.len().saturating_sub(1));
    let mut residual = 0.0_f64;
    let mut first_failure = None;
    for l in 1..=t {
        for m in -(l as i64)..=(l as i64) {
            let d = sums[crate::harmonics::sh_index(l, m)];
            let rec = Defect { l, m, defect: d };
            residual = residual.max(d.abs());
            if first_failure.is_none() && !(d.abs() <= tol) {
                first_failure = Some(rec);
            }
            defects.push(rec);
        }
    }
    Ok(Validation {
        degree: t,
        tolerance: tol,
        passed: first_failure.is_none(),
        residual,
        first_failure,
        defects,
    })
}

/// Largest t ≤ `max_degree` for which every degree 1..=t passes at `tol`.
pub fn certified_degree(points: &PointSet, max_degree: usize, tol: f64) -> Result<usize> {
    let report = validate_design(points, max_degree, tol)?;
    Ok(report.first_failure.map_or(max_degree, |f| f.l - 1))
}

/// max |(4π/N)·GᵀG − I| where G has columns Y_l^m(points), l ≤ c.
pub fn gram_identity_defect(points: &PointSet, c: usize) -> Result<f64> {
    check_degree(c)?;
    let n = points.len();
    let k = sh_count(c);
    let mut g = vec![0.0; n * k];
    for (row, p) in g.chunks_exact_mut(k).zip(points.iter()) {
        let u = p.normalized().ok_or_else(|| Error::Domain("point at the origin".into()))?;
        fill_harmonics(u, c, row);
    }
    let mut gram = vec![0.0; k * k];
    let scale = 4.0 * std::f64::consts::PI / n as f64;
    let gv = MatRef::row_major(&g, n, k);
    gemm(scale, gv.t(), gv, 0.0, &mut gram, k);
    let mut worst = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[i * k + j] - target).abs());
        }
    }
    Ok(worst)
}

/// Reads a design file, projects points to the unit sphere (rejecting
/// deviations above [`RESCALE_TOLERANCE`]) and certifies it. The certified
/// degree is the largest passing degree up to max(expected, header t).
pub fn load_design(path: impl AsRef<Path>, expected_degree: usize) -> Result<DesignSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let raw = PointSet::parse(&text, path.display().to_string())?;
    if raw.is_empty() {
        return Err(Error::Parse { path: path.display().to_string(), line: 0, msg: "no points".into() });
    }
    let mut unit = Vec::with_capacity(raw.len());
    for (i, p) in raw.iter().enumerate() {
        let r = p.norm();
        if (r - 1.0).abs() > RESCALE_TOLERANCE {
            return Err(Error::Domain(format!(
                "{}: point {i} has norm {r}, not on the unit sphere",
                path.display()
            )));
        }
        unit.push(p.scale(1.0 / r));
    }
    let points = PointSet::new(raw.label(), unit)?;
    let claimed = parse_header(&text).map_or(0, |h| h.0);
    let max_t = expected_degree.max(claimed).min(MAX_DEGREE);
    check_degree(expected_degree)?;
    let report = validate_design(&points, max_t, FILE_TOLERANCE)?;
    let degree = report.first_failure.map_or(max_t, |f| f.l - 1);
    if degree < expected_degree {
        let fail = report.first_failure.expect("failure below expected degree");
        return Err(Error::DesignCertification {
            l: fail.l,
            m: fail.m,
            defect: fail.defect,
            tol: FILE_TOLERANCE,
        });
    }
    let residual = report
        .defects
        .iter()
        .filter(|d| d.l <= degree)
        .fold(0.0_f64, |m, d| m.max(d.defect.abs()));
    Ok(DesignSet {
        points,
        degree,
        source: DesignSource::File(path.to_path_buf()),
        residual,
        tolerance: FILE_TOLERANCE,
    })
}

/// `(t, N)` from a `# t=<degree> N=<count>` header, if present.
pub fn parse_header(text: &str) -> Option<(usize, Option<usize>)> {
    let line = text.lines().map(str::trim).find(|l| l.starts_with('#'))?;
    let mut t = None;
    let mut n = None;
    for tok in line.trim_start_matches('#').split_whitespace() {
        if let Some(v) = tok.strip_prefix("t=") {
            t = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("N=") {
            n = v.parse().ok();
        }
    }
    t.map(|t| (t, n))
}

/// Every point multiplied by `r2`; ordering is preserved.
pub fn scale_to_surface(design: &DesignSet, r2: f64) -> PointSet {
    design.points.scaled(r2).with_label(format!("proxy(r={r2})"))
}

/// The six vertices of the octahedron, a 3-design.
pub fn octahedron() -> PointSet {
    let pts = vec![
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(-1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, -1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(0.0, 0.0, -1.0),
    ];
    PointSet::new("octahedron", pts).expect("finite")
}

/// The four vertices of a regular tetrahedron, a 2-design.
pub fn tetrahedron() -> PointSet {
    let s = 1.0 / 3.0_f64.sqrt();
    let pts = vec![
        Point3::new(s, s, s),
        Point3::new(s, -s, -s),
        Point3::new(-s, s, -s),
        Point3::new(-s, -s, s),
    ];
    PointSet::new("tetrahedron", pts).expect("finite")
}

// ---------------------------------------------------------------------------
// Generation

/// Knobs for [`generate_design_with`].
#[derive(Clone, Debug)]
pub struct GenerateOptions {
    pub max_iters: usize,
    /// Stop once every |defect| is at or below this.
    pub target: f64,
    /// Tolerance the result must pass.
    pub tolerance: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { max_iters: 5000, target: 1e-15, tolerance: GENERATED_TOLERANCE }
    }
}

/// Progress snapshot passed to the optional observer.
#[derive(Clone, Copy, Debug)]
pub struct GenerateProgress {
    pub iteration: usize,
    pub max_defect: f64,
    pub damping: f64,
}

/// Generates an `n_points` design of degree `t`, certified at
/// [`GENERATED_TOLERANCE`].
pub fn generate_design(t: usize, n_points: usize, rng: &mut SeededRng, max_iters: usize) -> Result<DesignSet> {
    let opts = GenerateOptions { max_iters, ..GenerateOptions::default() };
    generate_design_with(t, n_points, rng, &opts, |_| {})
}

/// Minimizes Σ_{1≤l≤t} Σ_m (d_l^m)² over point positions with
/// Levenberg–Marquardt steps in each point's tangent plane, renormalizing to
/// the sphere after every step. The starting set is a randomly rotated and
/// jittered Fibonacci spiral.
pub fn generate_design_with(
    t: usize,
    n_points: usize,
    rng: &mut SeededRng,
    opts: &GenerateOptions,
    mut observe: impl FnMut(GenerateProgress),
) -> Result<DesignSet> {
    check_degree(t)?;
    if t == 0 {
        return Err(Error::InvalidArgument("degree must be >= 1".into()));
    }
    let floor = minimum_size(t);
    if n_points < floor {
        return Err(Error::InvalidArgument(format!(
            "{n_points} points cannot form a {t}-design (at least {floor} needed)"
        )));
    }

    let rot = random_rotation(rng);
    let jitter = 0.1 / (n_points as f64).sqrt();
    let start: Vec<Point3> = fibonacci_sphere(n_points)
        .iter()
        .map(|&p| {
            let q = p + rng.direction() * (jitter * rng.unit());
            rotate(&rot, q.normalized().unwrap_or(p))
        })
        .collect();

    let mut solver = LmSolver::new(t, start);
    let iterations = solver.run(opts, &mut observe);
    let points = PointSet::new(format!("design(t={t})"), solver.points)?;
    let report = validate_design(&points, t, opts.tolerance)?;
    if !report.passed {
        return Err(Error::DesignNotConverged { iters: iterations, residual: report.residual });
    }
    Ok(DesignSet {
        points,
        degree: t,
        source: DesignSource::Generated { iterations },
        residual: report.residual,
        tolerance: opts.tolerance,
    })
}

impl DesignSet {

    /// Replaces the provenance record.
    pub fn with_source(mut self, source: DesignSource) -> Self {
        self.source = source;
        self
    }
}

struct LmSolver {
    t: usize,
    points: Vec<Point3>,
    /// Residual count: harmonics with 1 ≤ l ≤ t.
    n_res: usize,
}

struct Linearization {
    residual: Vec<f64>,
    /// n_res × 2N, row-major.
    jacobian: Vec<f64>,
    frames: Vec<(Point3, Point3)>,
}

impl LmSolver {
    fn new(t: usize, points: Vec<Point3>) -> Self {
        Self { t, points, n_res: sh_count(t) - 1 }
    }

    fn residual(&self, points: &[Point3]) -> Vec<f64> {
        let count = sh_count(self.t);
        let mut sums = vec![0.0; count];
        let mut buf = vec![0.0; count];
        for p in points {
            fill_harmonics(*p, self.t, &mut buf);
            for (s, v) in sums.iter_mut().zip(&buf) {
                *s += v;
            }
        }
        let inv_n = 1.0 / points.len() as f64;
        sums[1..].iter().map(|s| s * inv_n).collect()
    }

    fn linearize(&self) -> Linearization {
        let count = sh_count(self.t);
        let n = self.points.len();
        let cols = 2 * n;
        let inv_n = 1.0 / n as f64;
        let mut sums = vec![0.0; count];
        let mut jacobian = vec![0.0; self.n_res * cols];
        let mut frames = Vec::with_capacity(n);
        let (mut v, mut gt, mut gp) = (vec![0.0; count], vec![0.0; count], vec![0.0; count]);
        for (j, p) in self.points.iter().enumerate() {
            frames.push(fill_harmonics_with_gradient(*p, self.t, &mut v, &mut gt, &mut gp));
            for (s, x) in sums.iter_mut().zip(&v) {
                *s += x;
            }
            for r in 0..self.n_res {
                jacobian[r * cols + 2 * j] = gt[r + 1] * inv_n;
                jacobian[r * cols + 2 * j + 1] = gp[r + 1] * inv_n;
            }
        }
        let residual = sums[1..].iter().map(|s| s * inv_n).collect();
        Linearization { residual, jacobian, frames }
    }

    fn retract(&self, frames: &[(Point3, Point3)], step: &[f64]) -> Vec<Point3> {
        self.points
            .iter()
            .zip(frames)
            .enumerate()
            .map(|(j, (p, (et, ep)))| {
                let q = *p + *et * step[2 * j] + *ep * step[2 * j + 1];
                q.normalized().unwrap_or(*p)
            })
            .collect()
    }

    /// Returns the number of iterations used.
    fn run(&mut self, opts: &GenerateOptions, observe: &mut impl FnMut(GenerateProgress)) -> usize {
        let n_res = self.n_res;
        let cols = 2 * self.points.len();
        let mut lin = self.linearize();
        let mut cost = sum_sq(&lin.residual);
        let mut normal = normal_matrix(&lin.jacobian, n_res, cols);
        let mut mu = 1e-3 * max_diag(&normal);
        let mut nu = 2.0;
        let mut stalled = 0usize;

        for iter in 0..opts.max_iters {
            let max_defect = max_abs(&lin.residual);
            observe(GenerateProgress { iteration: iter, max_defect, damping: mu });
            if max_defect <= opts.target || stalled >= 40 || !(mu < 1e30) {
                return iter;
            }

            // δ = −Jᵀ (J Jᵀ + μI)⁻¹ r
            let Some(y) = damped_solve(&normal, n_res, mu, &lin.residual) else {
                mu *= nu;
                nu *= 2.0;
                continue;
            };
            let mut step = vec![0.0; cols];
            for (r, &yr) in y.iter().enumerate() {
                if yr != 0.0 {
                    let row = &lin.jacobian[r * cols..(r + 1) * cols];
                    for (s, &jv) in step.iter_mut().zip(row) {
                        *s -= jv * yr;
                    }
                }
            }
            // predicted cost ‖r + Jδ‖²; J δ = −JJᵀ y = −(normal·y)
            let mut lin_res = lin.residual.clone();
            for r in 0..n_res {
                let row = &normal[r * n_res..(r + 1) * n_res];
                lin_res[r] -= row.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            }
            let predicted = cost - sum_sq(&lin_res);

            let trial = self.retract(&lin.frames, &step);
            let trial_cost = sum_sq(&self.residual(&trial));
            let actual = cost - trial_cost;
            let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
            if rho > 0.0 && trial_cost < cost {
                stalled = if actual < 1e-6 * cost { stalled + 1 } else { 0 };
                self.points = trial;
                lin = self.linearize();
                cost = sum_sq(&lin.residual);
                normal = normal_matrix(&lin.jacobian, n_res, cols);
                mu *= (1.0_f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
                mu = mu.max(1e-300);
                nu = 2.0;
            } else {
                stalled += 1;
                mu *= nu;
                nu *= 2.0;
            }
        }
        opts.max_iters
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_diag(a: &[f64]) -> f64 {
    let n = (a.len() as f64).sqrt() as usize;
    (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max).max(1e-300)
}

/// J Jᵀ for row-major J (rows × cols). Only lower block pairs are
/// multiplied; the upper triangle is mirrored.
fn normal_matrix(jac: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    const BLOCK: usize = 512;
    let mut out = vec![0.0; rows * rows];
    for i0 in (0..rows).step_by(BLOCK) {
        let ib = BLOCK.min(rows - i0);
        let a = MatRef::row_major(&jac[i0 * cols..(i0 + ib) * cols], ib, cols);
        for j0 in (0..=i0).step_by(BLOCK) {
            let jb = BLOCK.min(rows - j0);
            let b = MatRef::row_major(&jac[j0 * cols..(j0 + jb) * cols], jb, cols);
            gemm(1.0, a, b.t(), 0.0, &mut out[i0 * rows + j0..], rows);
        }
    }
    for i in 0..rows {
        for j in i + 1..rows {
            out[i * rows + j] = out[j * rows + i];
        }
    }
    out
}

/// Solves (A + μI) y = r for symmetric positive definite A + μI.
fn damped_solve(a: &[f64], n: usize, mu: f64, r: &[f64]) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    for i in 0..n {
        l[i * n + i] += mu;
    }
    cholesky_in_place(&mut l, n)?;
    // forward: L z = r
    let mut y = r.to_vec();
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    // backward: Lᵀ y = z
    for i in (0..n).rev() {
        let yi = y[i] / l[i * n + i];
        y[i] = yi;
        for k in 0..i {
            y[k] -= l[i * n + k] * yi;
        }
    }
    Some(y)
}

/// Blocked right-looking Cholesky; the lower triangle of `a` (row-major)
/// is overwritten by L. Returns `None` if a pivot is not positive.
fn cholesky_in_place(a: &mut [f64], n: usize) -> Option<()> {
    const NB: usize = 96;
    let mut k0 = 0;
    while k0 < n {
        let kb = NB.min(n - k0);
        // unblocked factorization of the diagonal block
        for j in k0..k0 + kb {
            let mut d = a[j * n + j];
            for p in k0..j {
                d -= a[j * n + p] * a[j * n + p];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in j + 1..k0 + kb {
                let mut s = a[i * n + j];
                for p in k0..j {
                    s -= a[i * n + p] * a[j * n + p];
                }
                a[i * n + j] = s / d;
            }
        }
        let rest = k0 + kb;
        if rest < n {
            // panel: L21 = A21 · L11⁻ᵀ, row by row
            for i in rest..n {
                for j in k0..k0 + kb {
                    let mut s = a[i * n + j];
                    for p in k0..j {
                        s -= a[i * n + p] * a[j * n + p];
                    }
                    a[i * n + j] = s / a[j * n + j];
                }
            }
            // trailing update A22 -= L21 L21ᵀ
            let m = n - rest;
            let panel: Vec<f64> = (rest..n).flat_map(|i| a[i * n + k0..i * n + k0 + kb].to_vec()).collect();
            let p = MatRef::row_major(&panel, m, kb);
            let offset = rest * n + rest;
            gemm(-1.0, p, p.t(), 1.0, &mut a[offset..], n);
        }
        k0 += kb;
    }
    Some(())
}

/// A design of degree ≥ `degree` from `dir`, preferring the fewest points.
/// Files are matched by their `# t=<degree> N=<count>` headers.
#[derive(Clone, Debug)]
pub struct DesignLibrary {
    dir: PathBuf,
}

/// One indexed library file.
#[derive(Clone, Debug, PartialEq)]
pub struct LibraryEntry {
    pub path: PathBuf,
    pub degree: usize,
    pub size: usize,
}

impl DesignLibrary {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// The bundled designs, or the directory named by `PROXYID_DESIGN_DIR`.
    pub fn bundled() -> Self {
        Self::new(bundled_design_dir())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Indexed files sorted by (degree, size).
    pub fn entries(&self) -> Result<Vec<LibraryEntry>> {
        let mut out = Vec::new();
        let read = match fs::read_dir(&self.dir) {
            Ok(r) => r,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for entry in read {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let text = fs::read_to_string(&path)?;
            if let Some((degree, size)) = parse_header(&text) {
                let size = size.unwrap_or_else(|| {
                    text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#')).count()
                });
                out.push(LibraryEntry { path, degree, size });
            }
        }
        out.sort_by(|a, b| (a.degree, a.size, &a.path).cmp(&(b.degree, b.size, &b.path)));
        Ok(out)
    }

    /// Smallest indexed design with header degree ≥ `degree`, certified on load.
    pub fn find(&self, degree: usize) -> Result<DesignSet> {
        let entries = self.entries()?;
        let best = entries
            .iter()
            .filter(|e| e.degree >= degree)
            .min_by(|a, b| (a.size, a.degree).cmp(&(b.size, b.degree)))
            .ok_or_else(|| Error::MissingDesign {
                degree,
                reason: format!("no file in {} has t >= {degree}", self.dir.display()),
            })?;
        load_design(&best.path, degree)
    }
}

pub fn bundled_design_dir() -> PathBuf {
    std::env::var_os(DESIGN_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("designs"))
}

/// Conventional library file name for a design.
pub fn library_file_name(degree: usize, size: usize) -> String {
    format!("sd_t{degree:03}_n{size:05}.txt")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::random_rotation;

    #[test]
    fn octahedron_is_exactly_a_3_design() {
        let v = validate_design(&octahedron(), 3, 1e-12).unwrap();
        assert!(v.passed, "residual {}", v.residual);
        let v4 = validate_design(&octahedron(), 4, 1e-12).unwrap();
        assert!(!v4.passed);
        let fail = v4.first_failure.unwrap();
        assert_eq!(fail.l, 4);
        assert_eq!(certified_degree(&octahedron(), 10, 1e-12).unwrap(), 3);
    }

    #[test]
    fn tetrahedron_is_only_a_2_design() {
        assert!(validate_design(&tetrahedron(), 2, 1e-12).unwrap().passed);
        let v = validate_design(&tetrahedron(), 3, 1e-12).unwrap();
        assert_eq!(v.first_failure.unwrap().l, 3);
    }

    #[test]
    fn single_point_is_not_a_1_design() {
        let p = PointSet::new("one", vec![Point3::new(0.0, 0.0, 1.0)]).unwrap();
        assert!(!validate_design(&p, 1, 1e-12).unwrap().passed);
    }

    #[test]
    fn certification_is_rotation_invariant() {
        let mut rng = SeededRng::new(4);
        for _ in 0..5 {
            let r = random_rotation(&mut rng);
            let pts: Vec<Point3> = octahedron().iter().map(|&p| rotate(&r, p)).collect();
            let ps = PointSet::new("rot", pts).unwrap();
            assert!(validate_design(&ps, 3, 1e-12).unwrap().passed);
        }
    }

    #[test]
    fn sizes() {
        assert_eq!(design_size(30), 1862);
        assert_eq!(design_size(23), 1106);
        assert_eq!(design_size(12), 314);
        assert_eq!(default_size_for_degree(60), 1862);
        assert_eq!(default_size_for_degree(6), 26);
        assert_eq!(minimum_size(3), 6);
        assert_eq!(minimum_size(2), 4);
    }

    #[test]
    fn header_parsing() {
        assert_eq!(parse_header("# t=60 N=1862\n1 0 0\n"), Some((60, Some(1862))));
        assert_eq!(parse_header("# t=3\n"), Some((3, None)));
        assert_eq!(parse_header("1 0 0\n"), None);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let n = 150;
        let mut rng = SeededRng::new(2);
        let b: Vec<f64> = (0..n * n).map(|_| rng.normal()).collect();
        let a = normal_matrix(&b, n, n);
        let rhs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let y = damped_solve(&a, n, 1e-3, &rhs).unwrap();
        for i in 0..n {
            let s: f64 = (0..n).map(|j| a[i * n + j] * y[j]).sum::<f64>() + 1e-3 * y[i];
            assert!((s - rhs[i]).abs() < 1e-8 * (1.0 + rhs[i].abs()), "row {i}");
        }
        let mut neg = vec![0.0; 4];
        neg[0] = -1.0;
        assert!(cholesky_in_place(&mut neg, 2).is_none());
    }

    #[test]
    fn generates_antipodal_pair() {
        let d = generate_design(1, 2, &mut SeededRng::new(1), 500).unwrap();
        let (a, b) = (d.points().get(0), d.points().get(1));
        assert!((a + b).norm() < 1e-10);
        assert!(d.residual() < 1e-12);
    }

    #[test]
    fn generates_octahedron_like_3_design() {
        let d = generate_design(3, 6, &mut SeededRng::new(3), 2000).unwrap();
        assert!(d.residual() < 1e-10, "residual {}", d.residual());
        // an octahedron: every point has an antipode, the rest at 90°
        for p in d.points().iter() {
            let mut dots: Vec<f64> = d.points().iter().map(|q| p.dot(q)).collect();
            dots.sort_by(f64::total_cmp);
            assert!((dots[0] + 1.0).abs() < 1e-6);
            assert!(dots[1..5].iter().all(|x| x.abs() < 1e-6));
        }
    }

    #[test]
    fn generates_degree_10() {
        let d = generate_design(10, 62, &mut SeededRng::new(10), 5000).unwrap();
        assert!(d.residual() < 1e-8);
        assert!(validate_design(d.points(), 10, 1e-8).unwrap().passed);
    }

    #[test]
    fn rejects_impossible_sizes() {
        assert!(generate_design(3, 5, &mut SeededRng::new(1), 10).is_err());
        assert!(generate_design(0, 5, &mut SeededRng::new(1), 10).is_err());
    }
}
