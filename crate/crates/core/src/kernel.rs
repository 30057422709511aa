//! The 3D Laplace kernel 1/|x − y| and dense kernel-matrix assembly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointSet};
use crate::matrix::DenseMatrix;

/// K(x, y) = 1/|x − y|. Coincident points are a domain error.
pub fn laplace_kernel(x: Point3, y: Point3) -> Result<f64> {
    let r = x.distance(&y);
    if r == 0.0 {
        return Err(Error::Domain(format!("coincident points {x:?} and {y:?}")));
    }
    Ok(1.0 / r)
}

#[inline]
pub(crate) fn kernel_unchecked(x: &Point3, y: &Point3) -> f64 {
    let (dx, dy, dz) = (x.x - y.x, x.y - y.y, x.z - y.z);
    1.0 / (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Entry (i, j) is K(X[i], Y[j]). Rows are assembled in parallel; every
/// entry is an independent evaluation so the result does not depend on the
/// thread count.
pub fn kernel_matrix(xs: &PointSet, ys: &PointSet) -> Result<DenseMatrix> {
    let n_cols = ys.len();
    let mut data = vec![0.0; xs.len() * n_cols];
    if n_cols > 0 {
        data.par_chunks_mut(n_cols)
            .zip(xs.points().par_iter())
            .enumerate()
            .try_for_each(|(i, (row, x))| {
                for (j, (slot, y)) in row.iter_mut().zip(ys.points()).enumerate() {
                    let v = kernel_unchecked(x, y);
                    if !v.is_finite() {
                        return Err(Error::CoincidentPoints { row: i, col: j });
                    }
                    *slot = v;
                }
                Ok(())
            })?;
    }
    Ok(DenseMatrix::from_parts_unchecked(xs.len(), n_cols, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_ball, SeededRng};
    use proptest::prelude::*;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn kernel_values() {
        assert_eq!(laplace_kernel(p(0., 0., 0.), p(0., 0., 2.)).unwrap(), 0.5);
        assert_eq!(laplace_kernel(p(1., 2., 2.), p(0., 0., 0.)).unwrap(), 1.0 / 3.0);
        assert!(matches!(laplace_kernel(p(1., 0., 0.), p(1., 0., 0.)), Err(Error::Domain(_))));
    }

    #[test]
    fn matrix_values_and_coincidence() {
        let x = PointSet::new("x", vec![p(0., 0., 0.)]).unwrap();
        let y = PointSet::new("y", vec![p(0., 0., 1.), p(0., 0., 2.)]).unwrap();
        assert_eq!(kernel_matrix(&x, &y).unwrap().row(0), &[1.0, 0.5]);

        let a = PointSet::new("a", vec![p(4., 0., 0.)]).unwrap();
        let b = PointSet::new("b", vec![p(0., 0., 0.)]).unwrap();
        assert_eq!(kernel_matrix(&a, &b).unwrap().as_slice(), &[0.25]);

        let y2 = PointSet::new("y", vec![p(0., 0., 1.), p(0., 0., 0.)]).unwrap();
        match kernel_matrix(&x, &y2) {
            Err(Error::CoincidentPoints { row, col }) => assert_eq!((row, col), (0, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transpose_symmetry() {
        let mut rng = SeededRng::new(3);
        let x = sample_ball(40, 1.0, &mut rng);
        let y = sample_ball(30, 1.0, &mut rng).scaled(3.0);
        let kxy = kernel_matrix(&x, &y).unwrap();
        let kyx = kernel_matrix(&y, &x).unwrap();
        assert_eq!(kxy.transpose(), kyx);
    }

    proptest! {
        #[test]
        fn symmetric_and_scaling(
            a in prop::array::uniform3(-10.0..10.0f64),
            b in prop::array::uniform3(-10.0..10.0f64),
            s in 0.01..100.0f64,
        ) {
            let (x, y) = (Point3::from(a), Point3::from(b));
            prop_assume!(x.distance(&y) > 1e-6);
            let kxy = laplace_kernel(x, y).unwrap();
            prop_assert_eq!(kxy, laplace_kernel(y, x).unwrap());
            let ks = laplace_kernel(x * s, y * s).unwrap();
            prop_assert!((ks - kxy / s).abs() <= 1e-14 * (kxy / s));
        }
    }
}
