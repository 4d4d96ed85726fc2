//! Small exact-arithmetic helpers shared across modules: rational parsing,
//! integer endpoints of rational intervals, and fraction-free rank.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::{Error, Result};

/// Parses a decimal integer or a fraction written as `p/q`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let parse_int = |t: &str| -> Result<BigInt> {
        t.parse::<BigInt>()
            .map_err(|_| Error::Invalid(format!("not an integer: {t:?}")))
    };
    match s.split_once('/') {
        None => Ok(BigRational::from_integer(parse_int(s)?)),
        Some((num, den)) => {
            let den = parse_int(den)?;
            if den.is_zero() {
                return Err(Error::Invalid(format!("zero denominator in {s:?}")));
            }
            Ok(BigRational::new(parse_int(num)?, den))
        }
    }
}

/// Renders a rational as `p` or `p/q` in lowest terms.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

/// Exact rational with the value of the given finite f64.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Invalid(format!("non-finite value {x}")))
}

pub fn floor_int(r: &BigRational) -> BigInt {
    r.floor().to_integer()
}

pub fn ceil_int(r: &BigRational) -> BigInt {
    r.ceil().to_integer()
}

/// Number of integers in the open interval `(lo, hi)`.
pub fn open_interval_count(lo: &BigRational, hi: &BigRational) -> BigInt {
    let n = ceil_int(hi) - floor_int(lo) - BigInt::one();
    if n.is_negative() {
        BigInt::zero()
    } else {
        n
    }
}

/// Rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn bigint_matrix_rank(mut m: Vec<Vec<BigInt>>) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut rank = 0;
    let mut prev = BigInt::one();
    let mut row = 0;
    for col in 0..cols {
        if row >= rows {
            break;
        }
        let Some(p) = (row..rows).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        for i in row + 1..rows {
            for j in col + 1..cols {
                let v = &m[row][col] * &m[i][j] - &m[i][col] * &m[row][j];
                m[i][j] = &v / &prev;
            }
            m[i][col] = BigInt::zero();
        }
        prev = m[row][col].clone();
        row += 1;
        rank += 1;
    }
    rank
}

/// Rank of a rational matrix over the rationals.
pub fn rational_matrix_rank(m: &[Vec<BigRational>]) -> usize {
    let cleared: Vec<Vec<BigInt>> = m
        .iter()
        .map(|row| {
            let lcm = row.iter().fold(BigInt::one(), |acc, v| {
                num_integer::Integer::lcm(&acc, v.denom())
            });
            row.iter()
                .map(|v| v.numer() * (&lcm / v.denom()))
                .collect()
        })
        .collect();
    bigint_matrix_rank(cleared)
}

/// Determinant of a square rational matrix by Gaussian elimination.
pub fn rational_determinant(m: &[Vec<BigRational>]) -> BigRational {
    let n = m.len();
    assert!(m.iter().all(|row| row.len() == n), "matrix must be square");
    let mut a = m.to_vec();
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&i| !a[i][col].is_zero()) else {
            return BigRational::zero();
        };
        if piv != col {
            a.swap(col, piv);
            det = -det;
        }
        det *= &a[col][col];
        let inv = a[col][col].recip();
        for i in col + 1..n {
            if a[i][col].is_zero() {
                continue;
            }
            let f = &a[i][col] * &inv;
            for j in col..n {
                let s = &f * &a[col][j];
                a[i][j] -= s;
            }
        }
    }
    det
}

/// Rank of a matrix over the prime field `F_p`.
pub fn rank_mod_p(m: &[Vec<i64>], p: i64) -> usize {
    assert!(p > 1);
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut a: Vec<Vec<i64>> = m
        .iter()
        .map(|r| r.iter().map(|&v| v.rem_euclid(p)).collect())
        .collect();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..cols {
        if row >= rows {
            break;
        }
        let Some(piv) = (row..rows).find(|&i| a[i][col] % p != 0) else {
            continue;
        };
        a.swap(row, piv);
        let inv = mod_inverse(a[row][col], p).expect("pivot invertible");
        for j in col..cols {
            a[row][j] = a[row][j] * inv % p;
        }
        for i in 0..rows {
            if i != row && a[i][col] != 0 {
                let f = a[i][col];
                for j in col..cols {
                    a[i][j] = (a[i][j] - f * a[row][j]).rem_euclid(p);
                }
            }
        }
        row += 1;
        rank += 1;
    }
    rank
}

/// Inverse of `a` modulo `m`, if `gcd(a, m) = 1`.
pub fn mod_inverse(a: i64, m: i64) -> Option<i64> {
    let (mut r0, mut r1) = (m, a.rem_euclid(m));
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        None
    } else {
        Some(t0.rem_euclid(m))
    }
}

/// Balanced sum `a[0] + ... + a[k-1]` by fixed-order pairwise halving; the
/// association tree depends only on `k`, never on thread scheduling.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}
