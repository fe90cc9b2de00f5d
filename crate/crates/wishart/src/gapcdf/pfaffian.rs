//! Pfaffians of antisymmetric matrices by Parlett–Reid tridiagonalisation
//! with partial pivoting.

use super::mp::Mp;
use crate::error::{Error, Result};

/// Arithmetic needed by the elimination, implemented for `f64` and [`Mp`].
pub(crate) trait PfScalar: Clone {
    /// Monotone proxy for |x| used to pick pivots.
    fn magnitude(&self) -> f64;
    fn is_zero_val(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
}

impl PfScalar for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn is_zero_val(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
}

impl PfScalar for Mp {
    fn magnitude(&self) -> f64 {
        self.log2_abs()
    }
    fn is_zero_val(&self) -> bool {
        self.is_zero()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
}

fn check_antisymmetric(a: &[Vec<f64>]) -> Result<()> {
    let n = a.len();
    if n % 2 == 1 {
        return Err(Error::invalid(format!("pfaffian needs an even dimension, got {n}")));
    }
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid("pfaffian needs a square matrix"));
        }
        for j in 0..=i {
            if (row[j] + a[j][i]).abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::invalid(format!("matrix is not antisymmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Pfaffian factors: the value is `sign · ∏ factors`, returned unmultiplied
/// so that callers can take logs without overflow.
pub(crate) fn pfaffian_factors<T: PfScalar>(mut a: Vec<Vec<T>>) -> (bool, Vec<T>) {
    let n = a.len();
    let mut negative = false;
    let mut factors = Vec::with_capacity(n / 2);
    if n == 0 || n % 2 == 1 {
        return (false, vec![]);
    }
    let mut k = 0;
    while k + 1 < n {
        let mut piv = k + 1;
        let mut best = a[k + 1][k].magnitude();
        for i in k + 2..n {
            let m = a[i][k].magnitude();
            if m > best {
                best = m;
                piv = i;
            }
        }
        if piv != k + 1 {
            a.swap(k + 1, piv);
            for row in a.iter_mut() {
                row.swap(k + 1, piv);
            }
            negative = !negative;
        }
        let head = a[k][k + 1].clone();
        if head.is_zero_val() {
            return (false, vec![head]);
        }
        factors.push(head.clone());
        if k + 2 < n {
            let tau: Vec<T> = (k + 2..n).map(|j| a[k][j].div(&head)).collect();
            let col: Vec<T> = (k + 2..n).map(|i| a[i][k + 1].clone()).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    if i == j {
                        continue;
                    }
                    let upd = tau[ii].mul(&col[jj]).sub(&col[ii].mul(&tau[jj]));
                    a[i][j] = a[i][j].add(&upd);
                }
            }
        }
        k += 2;
    }
    (negative, factors)
}

/// Pfaffian of a real antisymmetric matrix.
pub fn pfaffian(a: &[Vec<f64>]) -> Result<f64> {
    check_antisymmetric(a)?;
    let (negative, factors) = pfaffian_factors(a.to_vec());
    let prod: f64 = factors.iter().product();
    if prod.is_finite() && (prod != 0.0 || factors.iter().any(|f| *f == 0.0)) {
        return Ok(if negative { -prod } else { prod });
    }
    // Overflow or underflow of the plain product: go through logs.
    let (sign, log_abs) = pfaffian_log(a)?;
    Ok(sign * log_abs.exp())
}

/// Pfaffian as `(sign, ln|Pf|)`; the sign is 0 for a singular matrix.
pub fn pfaffian_log(a: &[Vec<f64>]) -> Result<(f64, f64)> {
    check_antisymmetric(a)?;
    let (negative, factors) = pfaffian_factors(a.to_vec());
    let mut sign = if negative { -1.0 } else { 1.0 };
    let mut log_abs = 0.0;
    for f in &factors {
        if *f == 0.0 {
            return Ok((0.0, f64::NEG_INFINITY));
        }
        sign *= f.signum();
        log_abs += f.abs().ln();
    }
    Ok((sign, log_abs))
}

/// Multiprecision Pfaffian.
pub(crate) fn pfaffian_mp(a: Vec<Vec<Mp>>, p: usize) -> Mp {
    if a.len() % 2 == 1 {
        return Mp::zero(p);
    }
    let (negative, factors) = pfaffian_factors(a);
    let mut v = Mp::one(p);
    for f in &factors {
        v = v * f;
    }
    if negative {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_antisym(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[i][j] = v;
                a[j][i] = -v;
            }
        }
        a
    }

    fn det(a: &[Vec<f64>]) -> f64 {
        let n = a.len();
        DMatrix::from_fn(n, n, |i, j| a[i][j]).determinant()
    }

    #[test]
    fn two_by_two_and_four_by_four() {
        assert_eq!(pfaffian(&[vec![0.0, 3.0], vec![-3.0, 0.0]]).unwrap(), 3.0);
        // Pf = a12 a34 − a13 a24 + a14 a23
        let (a12, a13, a14, a23, a24, a34) = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0);
        let a = vec![
            vec![0.0, a12, a13, a14],
            vec![-a12, 0.0, a23, a24],
            vec![-a13, -a23, 0.0, a34],
            vec![-a14, -a24, -a34, 0.0],
        ];
        let want = a12 * a34 - a13 * a24 + a14 * a23;
        assert!((pfaffian(&a).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn block_diagonal_units() {
        let j = vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, -1.0, 0.0],
        ];
        assert_eq!(pfaffian(&j).unwrap(), 1.0);
        let (sign, log_abs) = pfaffian_log(&j).unwrap();
        assert_eq!((sign, log_abs), (1.0, 0.0));
    }

    #[test]
    fn square_equals_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let n = 2 * (1 + trial % 6);
            let a = random_antisym(n, &mut rng);
            let pf = pfaffian(&a).unwrap();
            let d = det(&a);
            assert!((pf * pf - d).abs() <= 1e-9 * d.abs().max(1.0), "n={n} pf²={} det={d}", pf * pf);
        }
    }

    #[test]
    fn congruence_scales_by_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [2usize, 4, 6, 8] {
            let a = random_antisym(n, &mut rng);
            let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let am = DMatrix::from_fn(n, n, |i, j| a[i][j]);
            let c = &b * am * b.transpose();
            let cv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| c[(i, j)]).collect()).collect();
            let lhs = pfaffian(&cv).unwrap();
            let rhs = b.determinant() * pfaffian(&a).unwrap();
            assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn multiprecision_agrees_with_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_antisym(8, &mut rng);
        let am: Vec<Vec<Mp>> = a.iter().map(|r| r.iter().map(|&v| Mp::from_f64(v, 256)).collect()).collect();
        let mp = pfaffian_mp(am, 256).to_f64();
        let f = pfaffian(&a).unwrap();
        assert!((mp - f).abs() < 1e-12 * f.abs());
    }

    #[test]
    fn rejects_non_antisymmetric_and_odd() {
        assert!(pfaffian(&[vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(pfaffian(&vec![vec![0.0; 3]; 3]).is_err());
        assert_eq!(pfaffian(&vec![vec![0.0; 4]; 4]).unwrap(), 0.0);
    }
}
