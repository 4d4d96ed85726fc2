//! Local densities: the singular series truncation, Euler factors by depth,
//! exact consistency between the coprime complete-sum totals and solution
//! counts mod prime powers, and the p-adic witness search.
//!
//! The key assembly trick keeps everything rational: summing S_{a,q} over
//! coefficient tuples a coprime to q turns the complex exponentials into a
//! generalized Ramanujan sum, an integer that depends only on gcd(q, F(x;y)).
//! No floating-point value ever enters a series term.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::for_each_point;
use crate::exact::rank_mod_p;
use crate::expsum::residue_histogram;
use crate::forms::FormSystem;
use crate::{Error, Result};

const LOCAL_ENUM_BUDGET: u128 = 200_000_000;

pub fn is_prime(n: i64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub fn primes_up_to(limit: i64) -> Vec<i64> {
    (2..=limit).filter(|&n| is_prime(n)).collect()
}

/// Moebius function; 0 on non-squarefree arguments.
pub fn moebius(n: i64) -> i64 {
    assert!(n >= 1);
    let mut m = n;
    let mut sign = 1;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            m /= p;
            if m % p == 0 {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if m > 1 {
        sign = -sign;
    }
    sign
}

pub fn divisors(n: i64) -> Vec<i64> {
    assert!(n >= 1);
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    large.reverse();
    small.extend(large);
    small
}

/// Generalized Ramanujan sum: the sum of e(a . v / q) over coefficient
/// tuples a mod q with gcd(a, q) = 1 depends only on g = gcd(q, v) and
/// equals sum over e | g of mu(q/e) e^r. Requires g | q.
pub fn generalized_ramanujan(q: i64, g: i64, r: u32) -> BigInt {
    assert!(q >= 1 && g >= 1 && q % g == 0);
    let mut acc = BigInt::ZERO;
    for e in divisors(g) {
        acc += moebius(q / e) * BigInt::from(e).pow(r);
    }
    acc
}

/// counts[g] = #{(x, y) mod q : gcd(q, F_1, ..., F_R) = g}, the exact
/// invariant that both the coprime totals and the zero counts read off.
fn gcd_class_counts(sys: &FormSystem, q: i64, budget: u128) -> Result<BTreeMap<i64, u64>> {
    if q < 1 {
        return Err(Error::Invalid(format!("modulus q = {q} must be positive")));
    }
    if q == 1 {
        return Ok(BTreeMap::from([(1, 1)]));
    }
    if sys.r() == 1 {
        let hist = residue_histogram(sys, &[1], q, budget)?;
        let mut classes = BTreeMap::new();
        for (m, &c) in hist.iter().enumerate() {
            if c > 0 {
                *classes
                    .entry(num_integer::gcd(m as i64, q))
                    .or_insert(0u64) += c;
            }
        }
        return Ok(classes);
    }
    let work = (q as u128).checked_pow((sys.n1() + sys.n2()) as u32);
    if work.is_none_or(|w| w > budget) {
        return Err(Error::Budget(format!(
            "residue enumeration needs q^{} = {q}^{} pairs, budget is {budget}",
            sys.n1() + sys.n2(),
            sys.n1() + sys.n2()
        )));
    }
    let xr = vec![(0i64, q - 1); sys.n1()];
    let yr = vec![(0i64, q - 1); sys.n2()];
    let slabs: Vec<BTreeMap<i64, u64>> = (0..q)
        .into_par_iter()
        .map(|v| {
            let mut pinned = xr.clone();
            pinned[0] = (v, v);
            let mut classes = BTreeMap::new();
            for_each_point(&pinned, &mut |x| {
                for_each_point(&yr, &mut |y| {
                    let mut g = q;
                    for i in 0..sys.r() {
                        g = num_integer::gcd(g, sys.eval_mod(i, x, y, q));
                    }
                    *classes.entry(g).or_insert(0u64) += 1;
                });
            });
            classes
        })
        .collect();
    let mut classes = BTreeMap::new();
    for slab in slabs {
        for (g, c) in slab {
            *classes.entry(g).or_insert(0) += c;
        }
    }
    Ok(classes)
}

/// Exact value of sum over a mod q, gcd(a, q) = 1, of S_{a,q}; an integer.
pub fn complete_sum_coprime_total(sys: &FormSystem, q: i64) -> Result<BigInt> {
    let classes = gcd_class_counts(sys, q, LOCAL_ENUM_BUDGET)?;
    let mut acc = BigInt::ZERO;
    for (g, c) in classes {
        acc += BigInt::from(c) * generalized_ramanujan(q, g, sys.r() as u32);
    }
    Ok(acc)
}

/// Exact number of pairs (x, y) mod q solving every form.
pub fn count_mod_q(sys: &FormSystem, q: i64) -> Result<BigInt> {
    let classes = gcd_class_counts(sys, q, LOCAL_ENUM_BUDGET)?;
    Ok(BigInt::from(classes.get(&q).copied().unwrap_or(0)))
}

/// Per-q series terms t(q) = q^{-(n1+n2)} sum_a S_{a,q} for q = 1..=q_max.
pub fn singular_series_terms(sys: &FormSystem, q_max: i64) -> Result<Vec<(i64, BigRational)>> {
    if q_max < 1 {
        return Err(Error::Invalid(format!("need Q >= 1, got {q_max}")));
    }
    let n = (sys.n1() + sys.n2()) as u32;
    (1..=q_max)
        .into_par_iter()
        .map(|q| {
            let total = complete_sum_coprime_total(sys, q)?;
            Ok((q, BigRational::new(total, BigInt::from(q).pow(n))))
        })
        .collect()
}

/// Exact rational truncation of the singular series at q_max.
pub fn singular_series_partial(sys: &FormSystem, q_max: i64) -> Result<BigRational> {
    Ok(singular_series_terms(sys, q_max)?
        .into_iter()
        .map(|(_, t)| t)
        .sum())
}

/// Euler factor of the series at p, truncated at the given depth.
#[derive(Debug, Clone)]
pub struct LocalFactor {
    pub p: i64,
    pub depth: u32,
    /// 1 + sum over l <= depth of t(p^l), exact.
    pub partial: BigRational,
}

pub fn local_factor(sys: &FormSystem, p: i64, depth: u32) -> Result<LocalFactor> {
    if !is_prime(p) {
        return Err(Error::Invalid(format!("{p} is not prime")));
    }
    let n = (sys.n1() + sys.n2()) as u32;
    let mut partial = BigRational::one();
    let mut q = 1i64;
    for _ in 1..=depth {
        q = q.checked_mul(p).ok_or_else(|| {
            Error::Budget(format!("p^l overflows at p = {p}, depth {depth}"))
        })?;
        let total = complete_sum_coprime_total(sys, q)?;
        partial += BigRational::new(total, BigInt::from(q).pow(n));
    }
    Ok(LocalFactor { p, depth, partial })
}

/// Both sides of the exact local identity at depth l: the Euler-side sum
/// over q | p^l of the series terms equals p^{-l(n1+n2-R)} times the number
/// of solutions mod p^l.
#[derive(Debug, Clone)]
pub struct DepthConsistency {
    pub p: i64,
    pub depth: u32,
    pub euler_side: BigRational,
    pub count_side: BigRational,
    pub holds: bool,
}

pub fn depth_consistency(sys: &FormSystem, p: i64, depth: u32) -> Result<DepthConsistency> {
    let factor = local_factor(sys, p, depth)?;
    let q = p.pow(depth);
    let count = count_mod_q(sys, q)?;
    let n = (sys.n1() + sys.n2()) as i32;
    let scale = BigRational::from_integer(BigInt::from(p))
        .pow(-(depth as i32) * (n - sys.r() as i32));
    let count_side = BigRational::from_integer(count) * scale;
    let holds = factor.partial == count_side;
    Ok(DepthConsistency {
        p,
        depth,
        euler_side: factor.partial,
        count_side,
        holds,
    })
}

/// A common zero mod p at which the combined Jacobian has full rank R; by
/// Hensel lifting it certifies a nonsingular p-adic zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PadicWitness {
    pub p: i64,
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PadicSearch {
    pub p: i64,
    pub witness: Option<PadicWitness>,
    pub zeros_mod_p: u64,
    /// Solution count mod p^2, gathered at search depth 2 when no witness
    /// certifies; evidence only, never a certificate.
    pub zeros_mod_p_squared: Option<u64>,
    pub certified: bool,
}

/// Scans all pairs mod p for common zeros with a rank-R Jacobian. Absence
/// of a witness never certifies insolubility; it downgrades the report to
/// inconclusive, optionally with the depth-2 zero count attached.
pub fn find_nonsingular_padic_zero(
    sys: &FormSystem,
    p: i64,
    search_depth: u32,
) -> Result<PadicSearch> {
    if !is_prime(p) {
        return Err(Error::Invalid(format!("{p} is not prime")));
    }
    if !(1..=2).contains(&search_depth) {
        return Err(Error::Invalid(format!(
            "search depth must be 1 or 2, got {search_depth}"
        )));
    }
    let n = (sys.n1() + sys.n2()) as u32;
    if (p as u128).checked_pow(n).is_none_or(|w| w > LOCAL_ENUM_BUDGET) {
        return Err(Error::Budget(format!(
            "witness scan needs {p}^{n} pairs, budget is {LOCAL_ENUM_BUDGET}"
        )));
    }
    let xr = vec![(0i64, p - 1); sys.n1()];
    let yr = vec![(0i64, p - 1); sys.n2()];
    let slabs: Vec<(u64, Option<PadicWitness>)> = (0..p)
        .into_par_iter()
        .map(|v| {
            let mut pinned = xr.clone();
            pinned[0] = (v, v);
            let mut zeros = 0u64;
            let mut witness: Option<PadicWitness> = None;
            for_each_point(&pinned, &mut |x| {
                for_each_point(&yr, &mut |y| {
                    if (0..sys.r()).any(|i| sys.eval_mod(i, x, y, p) != 0) {
                        return;
                    }
                    zeros += 1;
                    if witness.is_none() {
                        let jac = sys.full_jacobian_mod_p(x, y, p);
                        let rank = rank_mod_p(&jac, p);
                        if rank >= sys.r() {
                            witness = Some(PadicWitness {
                                p,
                                x: x.to_vec(),
                                y: y.to_vec(),
                                rank,
                            });
                        }
                    }
                });
            });
            (zeros, witness)
        })
        .collect();
    let zeros_mod_p = slabs.iter().map(|(z, _)| z).sum();
    let witness = slabs.into_iter().find_map(|(_, w)| w);
    let mut zeros_mod_p_squared = None;
    if witness.is_none() && search_depth >= 2 {
        let q2 = p * p;
        if (q2 as u128).checked_pow(n).is_some_and(|w| w <= LOCAL_ENUM_BUDGET) {
            zeros_mod_p_squared = num_traits::ToPrimitive::to_u64(&count_mod_q(sys, q2)?);
        }
    }
    Ok(PadicSearch {
        p,
        certified: witness.is_some(),
        witness,
        zeros_mod_p,
        zeros_mod_p_squared,
    })
}
