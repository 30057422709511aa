//! Seeded uniform sampling of balls, shells and spheres.
//!
//! The generator is ChaCha8 (`rand_chacha`), seeded with `seed_from_u64`,
//! so streams are identical across platforms. Every sampled point consumes
//! exactly three uniform draws: two for the direction, one for the radius.

use std::f64::consts::PI;

use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Point3, PointSet};

/// Portable seeded generator shared by all stochastic routines.
#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        Open01.sample(&mut self.inner)
    }

    /// Uniform on [0, 1).
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u = self.open01();
        let v = self.unit();
        (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
    }

    /// Uniformly distributed unit vector (Archimedes: z uniform on [-1, 1]).
    pub fn direction(&mut self) -> Point3 {
        let z = 2.0 * self.unit() - 1.0;
        let phi = 2.0 * PI * self.unit();
        let s = (1.0 - z * z).max(0.0).sqrt();
        Point3::new(s * phi.cos(), s * phi.sin(), z)
    }
}

/// `n` i.i.d. points uniform in the open ball B(0, radius).
pub fn sample_ball(n: usize, radius: f64, rng: &mut SeededRng) -> PointSet {
    let points = (0..n)
        .map(|_| {
            let d = rng.direction();
            d * (radius * rng.open01().cbrt())
        })
        .collect();
    PointSet::new("ball", points).expect("finite samples")
}

/// `n` i.i.d. points uniform in B(0, r_outer) \ B(0, r_inner), radius drawn
/// by inverting the r³ CDF.
pub fn sample_shell(n: usize, r_inner: f64, r_outer: f64, rng: &mut SeededRng) -> PointSet {
    let (a, b) = (r_inner.powi(3), r_outer.powi(3));
    let points = (0..n)
        .map(|_| {
            let d = rng.direction();
            let r = (a + rng.open01() * (b - a)).cbrt();
            d * r.clamp(r_inner, r_outer)
        })
        .collect();
    PointSet::new("shell", points).expect("finite samples")
}

/// Deterministic quasi-uniform Fibonacci-spiral points on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> PointSet {
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    let points = (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let s = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Point3::new(s * phi.cos(), s * phi.sin(), z)
        })
        .collect();
    PointSet::new("fibonacci", points).expect("finite samples")
}

/// Uniformly random rotation matrix (rows), from a random unit quaternion.
pub fn random_rotation(rng: &mut SeededRng) -> [[f64; 3]; 3] {
    let (u1, u2, u3) = (rng.unit(), rng.unit(), rng.unit());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn rotate(r: &[[f64; 3]; 3], p: Point3) -> Point3 {
    let v = p.to_array();
    let row = |k: usize| r[k][0] * v[0] + r[k][1] * v[1] + r[k][2] * v[2];
    Point3::new(row(0), row(1), row(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_containment_and_determinism() {
        let a = sample_ball(1000, 1.0, &mut SeededRng::new(11));
        assert!(a.iter().all(|p| p.norm() < 1.0));
        let b = sample_ball(1000, 1.0, &mut SeededRng::new(11));
        assert_eq!(a, b);
        let c = sample_ball(1000, 1.0, &mut SeededRng::new(12));
        assert_ne!(a, c);
    }

    #[test]
    fn ball_volume_fraction() {
        let pts = sample_ball(100_000, 1.0, &mut SeededRng::new(5));
        let inner = pts.iter().filter(|p| p.norm() <= 0.5).count() as f64 / 1e5;
        assert!((inner - 0.125).abs() < 0.01, "fraction {inner}");
    }

    #[test]
    fn shell_containment_and_volume_fraction() {
        let pts = sample_shell(1000, 2.0, 4.0, &mut SeededRng::new(1));
        assert!(pts.iter().all(|p| p.norm() > 2.0 && p.norm() < 4.0));

        let pts = sample_shell(100_000, 2.0, 8.0, &mut SeededRng::new(2));
        let inner = pts.iter().filter(|p| p.norm() <= 4.0).count() as f64 / 1e5;
        assert!((inner - 56.0 / 504.0).abs() < 0.01, "fraction {inner}");
        assert_eq!(pts, sample_shell(100_000, 2.0, 8.0, &mut SeededRng::new(2)));
    }

    #[test]
    fn rotation_is_orthogonal() {
        let r = random_rotation(&mut SeededRng::new(9));
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fibonacci_points_are_unit() {
        let f = fibonacci_sphere(500);
        assert!(f.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
    }
}
