//! Replica trick: `e^{L(t)}` for integer `t` is the spectral radius of
//! `(D0^{(x)t} + D1^{(x)t}) / 2`.

use crate::error::{Error, Result};
use crate::exactmat::{FloatMatrix, RationalMatrix, KRONECKER_CAP};

/// Tolerance used for replica power iteration.
pub const REPLICA_TOL: f64 = 1e-15;

fn float_kronecker(a: &FloatMatrix, b: &FloatMatrix) -> FloatMatrix {
    let (n, p) = (a.dim(), b.dim());
    let dim = n * p;
    let mut e = vec![0.0; dim * dim];
    for i in 0..n {
        for j in 0..n {
            let x = a.get(i, j);
            if x == 0.0 {
                continue;
            }
            for k in 0..p {
                for l in 0..p {
                    e[(i * p + k) * dim + j * p + l] = x * b.get(k, l);
                }
            }
        }
    }
    FloatMatrix::from_entries(dim, e).expect("finite")
}

fn kron_power(a: &FloatMatrix, t: u32) -> FloatMatrix {
    (1..t).fold(a.clone(), |acc, _| float_kronecker(&acc, a))
}

/// `(D0^{(x)t} + D1^{(x)t}) / 2` in floating point. Entries of the catalog
/// matrices are small dyadic rationals, so the result is exact.
pub fn replica_matrix(d0: &RationalMatrix, d1: &RationalMatrix, t: u32) -> Result<FloatMatrix> {
    if t == 0 {
        return Err(Error::InvalidArgument("replica order must be positive".into()));
    }
    let dim = (d0.dim() as u64).checked_pow(t).unwrap_or(u64::MAX);
    if dim > KRONECKER_CAP as u64 {
        return Err(Error::DimensionCap {
            dim: dim.min(usize::MAX as u64) as usize,
            cap: KRONECKER_CAP,
        });
    }
    let a = kron_power(&d0.to_float(), t);
    let b = kron_power(&d1.to_float(), t);
    let e = a.entries().iter().zip(b.entries()).map(|(x, y)| 0.5 * (x + y)).collect();
    FloatMatrix::from_entries(a.dim(), e)
}

/// Returns `e^{L(t)}`.
pub fn replica_exponent(d0: &RationalMatrix, d1: &RationalMatrix, t: u32) -> Result<f64> {
    replica_matrix(d0, d1, t)?.spectral_radius(REPLICA_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmat::rat_frac;

    fn m(rows: &[&[i64]]) -> RationalMatrix {
        RationalMatrix::from_rows(rows)
    }

    #[test]
    fn binomial() {
        let (d0, d1) = (m(&[&[1]]), m(&[&[2]]));
        assert!((replica_exponent(&d0, &d1, 1).unwrap() - 1.5).abs() < 1e-13);
        assert!((replica_exponent(&d0, &d1, 2).unwrap() - 2.5).abs() < 1e-13);
        assert!((replica_exponent(&d0, &d1, 3).unwrap() - 4.5).abs() < 1e-13);
    }

    #[test]
    fn matches_exact_kronecker() {
        let d0 = m(&[&[1, 2], &[0, 0]]);
        let d1 = m(&[&[1, 2], &[1, 0]]);
        let exact = d0
            .kronecker(&d0)
            .unwrap()
            .add(&d1.kronecker(&d1).unwrap())
            .unwrap()
            .scale(&rat_frac(1, 2))
            .to_float();
        assert_eq!(replica_matrix(&d0, &d1, 2).unwrap(), exact);
    }

    #[test]
    fn cap_enforced() {
        let d = RationalMatrix::identity(9);
        assert!(matches!(
            replica_matrix(&d, &d, 4),
            Err(Error::DimensionCap { dim: 6561, .. })
        ));
        assert_eq!(replica_matrix(&d, &d, 2).unwrap().dim(), 81);
    }
}
