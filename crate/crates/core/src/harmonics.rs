//! Real orthonormal spherical harmonics and the multipole expansion of 1/|x − y|.
//!
//! Convention: with fully normalized associated Legendre functions P̄_l^m
//! (no Condon–Shortley phase),
//!
//! ```text
//! Y_l^0  = P̄_l^0(cos θ)
//! Y_l^m  = √2 P̄_l^m(cos θ) cos(mφ)     m > 0
//! Y_l^-m = √2 P̄_l^m(cos θ) sin(mφ)     m > 0
//! ```
//!
//! so that Σ_m Y_l^m(u)² = (2l+1)/(4π) for every unit vector u.
//! Values for one direction are stored flat at index `l² + l + m`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{Point3, ShellGeometry};

/// Highest supported degree; the recurrences are validated up to here.
pub const MAX_DEGREE: usize = 100;

const UNIT_TOL: f64 = 1e-10;

/// Flat position of (l, m) in a harmonic table.
#[inline]
pub const fn sh_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Number of harmonics of degree ≤ `l_max`.
#[inline]
pub const fn sh_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// Spherical harmonics Y_l^m of degree ≤ `degree_max` at a single direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SphericalHarmonicTable {
    degree_max: usize,
    values: Vec<f64>,
}

impl SphericalHarmonicTable {
    pub fn degree_max(&self) -> usize {
        self.degree_max
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        assert!(l <= self.degree_max && m.unsigned_abs() as usize <= l);
        self.values[sh_index(l, m)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values of degree `l`, ordered m = −l..=l.
    pub fn level(&self, l: usize) -> &[f64] {
        &self.values[l * l..(l + 1) * (l + 1)]
    }
}

fn check_degree(l_max: usize) -> Result<()> {
    if l_max > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "harmonic degree {l_max} exceeds supported maximum {MAX_DEGREE}"
        )));
    }
    Ok(())
}

/// Evaluates every real harmonic of degree ≤ `l_max` at the unit vector `u`.
pub fn eval_harmonics(u: Point3, l_max: usize) -> Result<SphericalHarmonicTable> {
    check_degree(l_max)?;
    let r = u.norm();
    if !u.is_finite() || (r - 1.0).abs() > UNIT_TOL {
        return Err(Error::Domain(format!("direction {u:?} is not a unit vector (|u| = {r})")));
    }
    let mut values = vec![0.0; sh_count(l_max)];
    fill_harmonics(u, l_max, &mut values);
    Ok(SphericalHarmonicTable { degree_max: l_max, values })
}

/// cos(mφ), sin(mφ) for m = 0..=l_max from the azimuth of `u`.
fn azimuth_table(u: Point3, l_max: usize, cos_m: &mut [f64], sin_m: &mut [f64]) -> f64 {
    let rho = u.x.hypot(u.y);
    let (c1, s1) = if rho > 0.0 { (u.x / rho, u.y / rho) } else { (1.0, 0.0) };
    cos_m[0] = 1.0;
    sin_m[0] = 0.0;
    for m in 1..=l_max {
        cos_m[m] = cos_m[m - 1] * c1 - sin_m[m - 1] * s1;
        sin_m[m] = sin_m[m - 1] * c1 + cos_m[m - 1] * s1;
    }
    rho
}

#[inline]
fn recurrence_a(l: usize, m: usize) -> f64 {
    let (l, m) = (l as f64, m as f64);
    ((4.0 * l * l - 1.0) / (l * l - m * m)).sqrt()
}

#[inline]
fn recurrence_b(l: usize, m: usize) -> f64 {
    let (l1, m) = ((l - 1) as f64, m as f64);
    ((l1 * l1 - m * m) / (4.0 * l1 * l1 - 1.0)).sqrt()
}

/// Runs the three-term recurrence in l at fixed order m, starting from
/// P̄_m^m = `pmm`, writing `emit(l, value)` for l = m..=l_max.
#[inline]
fn legendre_column(x: f64, m: usize, l_max: usize, pmm: f64, mut emit: impl FnMut(usize, f64)) {
    emit(m, pmm);
    if m == l_max {
        return;
    }
    let mut p_prev = pmm;
    let mut p_cur = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
    emit(m + 1, p_cur);
    for l in m + 2..=l_max {
        let p_next = recurrence_a(l, m) * (x * p_cur - recurrence_b(l, m) * p_prev);
        p_prev = p_cur;
        p_cur = p_next;
        emit(l, p_cur);
    }
}

/// Unchecked evaluation into `out` (length ≥ (l_max+1)²). `u` must be unit.
pub(crate) fn fill_harmonics(u: Point3, l_max: usize, out: &mut [f64]) {
    let mut cos_m = vec![0.0; l_max + 1];
    let mut sin_m = vec![0.0; l_max + 1];
    let s = azimuth_table(u, l_max, &mut cos_m, &mut sin_m);
    let x = u.z.clamp(-1.0, 1.0);
    let sqrt2 = std::f64::consts::SQRT_2;

    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        if m == 0 {
            legendre_column(x, 0, l_max, pmm, |l, p| out[l * l + l] = p);
        } else {
            let (c, sn) = (sqrt2 * cos_m[m], sqrt2 * sin_m[m]);
            legendre_column(x, m, l_max, pmm, |l, p| {
                out[l * l + l + m] = p * c;
                out[l * l + l - m] = p * sn;
            });
        }
    }
}

/// Values plus tangent-plane gradients of every harmonic of degree ≤ `l_max`.
///
/// `grad_theta[k]` is the derivative along e_θ and `grad_phi[k]` along e_φ,
/// where e_θ = (cos θ cos φ, cos θ sin φ, −sin θ) and e_φ = (−sin φ, cos φ, 0)
/// are returned as the frame. At the poles φ is taken as 0.
pub(crate) fn fill_harmonics_with_gradient(
    u: Point3,
    l_max: usize,
    values: &mut [f64],
    grad_theta: &mut [f64],
    grad_phi: &mut [f64],
) -> (Point3, Point3) {
    let n_tri = (l_max + 1) * (l_max + 2) / 2;
    let tri = |l: usize, m: usize| l * (l + 1) / 2 + m;
    // P̄_l^m and P̄_l^m / sin θ for 0 <= m <= l
    let mut p = vec![0.0; n_tri];
    let mut q = vec![0.0; n_tri];
    let mut cos_m = vec![0.0; l_max + 1];
    let mut sin_m = vec![0.0; l_max + 1];
    let s = azimuth_table(u, l_max, &mut cos_m, &mut sin_m);
    let x = u.z.clamp(-1.0, 1.0);

    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=l_max {
        let qmm = pmm * if m > 0 { ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() } else { 0.0 };
        if m > 0 {
            pmm = qmm * s;
        }
        legendre_column(x, m, l_max, pmm, |l, v| p[tri(l, m)] = v);
        if m > 0 {
            legendre_column(x, m, l_max, qmm, |l, v| q[tri(l, m)] = v);
        }
    }

    let sqrt2 = std::f64::consts::SQRT_2;
    for l in 0..=l_max {
        let lf = l as f64;
        for m in 0..=l {
            let mf = m as f64;
            let next = if m < l { p[tri(l, m + 1)] } else { 0.0 };
            let dtheta = if m == 0 {
                -(lf * (lf + 1.0)).sqrt() * next
            } else {
                0.5 * (((lf + mf) * (lf - mf + 1.0)).sqrt() * p[tri(l, m - 1)]
                    - ((lf + mf + 1.0) * (lf - mf)).sqrt() * next)
            };
            if m == 0 {
                let k = l * l + l;
                values[k] = p[tri(l, 0)];
                grad_theta[k] = dtheta;
                grad_phi[k] = 0.0;
            } else {
                let (c, sn) = (sqrt2 * cos_m[m], sqrt2 * sin_m[m]);
                let kp = l * l + l + m;
                let kn = l * l + l - m;
                let qlm = mf * q[tri(l, m)];
                values[kp] = p[tri(l, m)] * c;
                values[kn] = p[tri(l, m)] * sn;
                grad_theta[kp] = dtheta * c;
                grad_theta[kn] = dtheta * sn;
                grad_phi[kp] = -qlm * sn;
                grad_phi[kn] = qlm * c;
            }
        }
    }

    let (cphi, sphi) = if s > 0.0 { (u.x / s, u.y / s) } else { (1.0, 0.0) };
    let e_theta = Point3::new(x * cphi, x * sphi, -s);
    let e_phi = Point3::new(-sphi, cphi, 0.0);
    (e_theta, e_phi)
}

/// Multipole coefficients M_l^m(x), l ≤ c, of the expansion
///
/// ```text
/// 1/|x − y| = Σ_l Σ_m M_l^m(x) Y_l^m(ŷ) / |y|^(l+1),   |x| < |y|,
/// ```
///
/// with M_l^m(x) = 4π/(2l+1) · |x|^l · Y_l^m(x̂).
#[derive(Clone, Debug, PartialEq)]
pub struct MultipoleCoeffs {
    degree_max: usize,
    coeffs: Vec<f64>,
}

impl MultipoleCoeffs {
    pub fn degree_max(&self) -> usize {
        self.degree_max
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        assert!(l <= self.degree_max && m.unsigned_abs() as usize <= l);
        self.coeffs[sh_index(l, m)]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

pub fn multipole_coeffs(x: Point3, c: usize) -> Result<MultipoleCoeffs> {
    check_degree(c)?;
    let mut coeffs = vec![0.0; sh_count(c)];
    let r = x.norm();
    match x.normalized() {
        None => coeffs[0] = (4.0 * PI).sqrt(),
        Some(dir) => {
            fill_harmonics(dir, c, &mut coeffs);
            let mut rl = 1.0;
            for l in 0..=c {
                let f = 4.0 * PI / (2 * l + 1) as f64 * rl;
                for v in &mut coeffs[l * l..(l + 1) * (l + 1)] {
                    *v *= f;
                }
                rl *= r;
            }
        }
    }
    Ok(MultipoleCoeffs { degree_max: c, coeffs })
}

/// Σ_{l≤c} Σ_m M_l^m(x) Y_l^m(ŷ) / |y|^(l+1). Requires |x| < |y|.
pub fn truncated_kernel(x: Point3, y: Point3, c: usize) -> Result<f64> {
    let (rx, ry) = (x.norm(), y.norm());
    if !(rx < ry) {
        return Err(Error::Domain(format!(
            "multipole expansion needs |x| < |y|, got |x| = {rx}, |y| = {ry}"
        )));
    }
    let m = multipole_coeffs(x, c)?;
    let yhat = y.normalized().expect("|y| > 0");
    let mut yv = vec![0.0; sh_count(c)];
    fill_harmonics(yhat, c, &mut yv);
    let mut total = 0.0;
    let mut inv = 1.0 / ry;
    for l in 0..=c {
        let range = l * l..(l + 1) * (l + 1);
        let level: f64 = m.coeffs[range.clone()].iter().zip(&yv[range]).map(|(a, b)| a * b).sum();
        total += level * inv;
        inv /= ry;
    }
    Ok(total)
}

/// Uniform bound on the degree-c truncation remainder over X × Γ:
/// (1/(r2 − r1)) · (r1/r2)^(c+1).
pub fn truncation_bound(geom: &ShellGeometry, c: usize) -> f64 {
    geom.ratio().powi(c as i32 + 1) / geom.gap()
}

/// ‖Φ(y)‖₂ = (c+1)/√(4π), the norm of the stacked harmonics of degree ≤ c.
pub fn phi_norm(c: usize) -> f64 {
    (c + 1) as f64 / (4.0 * PI).sqrt()
}
