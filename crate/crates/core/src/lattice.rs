//! Geometry-of-numbers side of the argument: linear systems and their box
//! counters, the block lattice built from a linear system, exact successive
//! minima at small dimension, and the empirical shrinking inequality that
//! compares counts at nested box scales.
//!
//! Everything here is exact. Inputs arrive as rationals (floats are embedded
//! bit-exactly), counts come from integer interval endpoints, and minima are
//! reported as squared lengths so no square root is ever taken before the
//! final display conversion.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::exact::{
    ceil_int, floor_int, open_interval_count, rational_determinant, rational_matrix_rank,
    rational_to_f64,
};
use crate::{Error, Result};

const U_COUNT_BUDGET: u128 = 100_000_000;
const ENUM_NODE_BUDGET: u64 = 20_000_000;

/// Real linear forms L_i(u) = sum_j lambda[i][j] u_j with a scale a > 1,
/// stored exactly.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    lambda: Vec<Vec<BigRational>>,
    a: BigRational,
}

impl LinearSystem {
    pub fn new(lambda: Vec<Vec<BigRational>>, a: BigRational) -> Result<Self> {
        if lambda.is_empty() || lambda[0].is_empty() {
            return Err(Error::Invalid("lambda matrix must be nonempty".into()));
        }
        let n2 = lambda[0].len();
        if lambda.iter().any(|row| row.len() != n2) {
            return Err(Error::Invalid("lambda matrix rows have unequal length".into()));
        }
        if a <= BigRational::one() {
            return Err(Error::Invalid(format!(
                "scale a = {a} must exceed 1"
            )));
        }
        Ok(LinearSystem { lambda, a })
    }

    /// Embeds float data exactly; ties in the strict-inequality counts are
    /// then decided by the embedded values, never by epsilons.
    pub fn from_f64(lambda: &[Vec<f64>], a: f64) -> Result<Self> {
        let emb = |x: f64| crate::exact::rational_from_f64(x);
        let rows: Vec<Vec<BigRational>> = lambda
            .iter()
            .map(|row| row.iter().map(|&x| emb(x)).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        Self::new(rows, emb(a)?)
    }

    /// Number of forms, the row count of lambda.
    pub fn n1(&self) -> usize {
        self.lambda.len()
    }

    /// Number of arguments, the column count of lambda.
    pub fn n2(&self) -> usize {
        self.lambda[0].len()
    }

    pub fn a(&self) -> &BigRational {
        &self.a
    }

    pub fn lambda(&self) -> &[Vec<BigRational>] {
        &self.lambda
    }

    /// The system with the transposed matrix, swapping form and argument roles.
    pub fn transposed(&self) -> LinearSystem {
        let mut t = vec![vec![BigRational::zero(); self.n1()]; self.n2()];
        for (i, row) in self.lambda.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                t[j][i] = v.clone();
            }
        }
        LinearSystem {
            lambda: t,
            a: self.a.clone(),
        }
    }
}

/// Exact count of integer tuples (u, w) with |u_j| < aZ for the n2 argument
/// coordinates and |L_i(u) - w_i| < Z/a for each form; the transposed flag
/// runs the same count for the transposed system.
pub fn count_u(linsys: &LinearSystem, z: &BigRational, transposed: bool) -> Result<BigInt> {
    if transposed {
        return count_u(&linsys.transposed(), z, false);
    }
    if !z.is_positive() {
        return Err(Error::Invalid(format!("need Z > 0, got {z}")));
    }
    let az = &linsys.a * z;
    let wz = z / &linsys.a;
    let lo = floor_int(&-&az) + BigInt::one();
    let hi = ceil_int(&az) - BigInt::one();
    if hi < lo {
        return Ok(BigInt::zero());
    }
    let per_coord = (&hi - &lo + BigInt::one()).to_u128().ok_or_else(|| {
        Error::Budget("argument box side exceeds the enumeration budget".into())
    })?;
    if per_coord
        .checked_pow(linsys.n2() as u32)
        .is_none_or(|w| w > U_COUNT_BUDGET)
    {
        return Err(Error::Budget(format!(
            "argument box has about {per_coord}^{} points, budget is {U_COUNT_BUDGET}",
            linsys.n2()
        )));
    }
    let lo64 = lo.to_i64().ok_or_else(|| Error::Budget("box endpoint exceeds i64".into()))?;
    let hi64 = hi.to_i64().ok_or_else(|| Error::Budget("box endpoint exceeds i64".into()))?;
    let ranges = vec![(lo64, hi64); linsys.n2()];
    let slabs: Vec<BigInt> = (lo64..=hi64)
        .into_par_iter()
        .map(|v| {
            let mut pinned = ranges.clone();
            pinned[0] = (v, v);
            let mut acc = BigInt::zero();
            crate::counting::for_each_point(&pinned, &mut |u| {
                let mut prod = BigInt::one();
                for row in &linsys.lambda {
                    let mut c = BigRational::zero();
                    for (lam, &uj) in row.iter().zip(u) {
                        c += lam * BigRational::from_integer(BigInt::from(uj));
                    }
                    prod *= open_interval_count(&(&c - &wz), &(&c + &wz));
                    if prod.is_zero() {
                        break;
                    }
                }
                acc += prod;
            });
            acc
        })
        .collect();
    Ok(slabs.into_iter().sum())
}

/// Basis of a full-rank lattice, stored column-wise.
#[derive(Debug, Clone)]
pub struct LatticeBasis {
    pub dim: usize,
    /// columns[j] is the j-th basis vector.
    pub columns: Vec<Vec<BigRational>>,
}

impl LatticeBasis {
    pub fn new(columns: Vec<Vec<BigRational>>) -> Result<Self> {
        let dim = columns.len();
        if dim == 0 || columns.iter().any(|c| c.len() != dim) {
            return Err(Error::Invalid("basis must be square and nonempty".into()));
        }
        Ok(LatticeBasis { dim, columns })
    }

    pub fn determinant(&self) -> BigRational {
        let rows: Vec<Vec<BigRational>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.columns[j][i].clone()).collect())
            .collect();
        rational_determinant(&rows)
    }

    /// Gram matrix of the basis vectors.
    pub fn gram(&self) -> Vec<Vec<BigRational>> {
        let dot = |u: &[BigRational], v: &[BigRational]| -> BigRational {
            u.iter().zip(v).map(|(a, b)| a * b).sum()
        };
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| dot(&self.columns[i], &self.columns[j]))
                    .collect()
            })
            .collect()
    }

    pub fn scaled(&self, factor: &BigRational) -> LatticeBasis {
        LatticeBasis {
            dim: self.dim,
            columns: self
                .columns
                .iter()
                .map(|c| c.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    /// The lattice vector with the given coefficient tuple.
    pub fn vector(&self, coeffs: &[i64]) -> Vec<BigRational> {
        let mut v = vec![BigRational::zero(); self.dim];
        for (c, col) in coeffs.iter().zip(&self.columns) {
            if *c == 0 {
                continue;
            }
            let cf = BigRational::from_integer(BigInt::from(*c));
            for (slot, entry) in v.iter_mut().zip(col) {
                *slot += entry * &cf;
            }
        }
        v
    }
}

/// The block lattice of a linear system together with its adjoint and the
/// scalar that normalizes both to determinant one.
#[derive(Debug, Clone)]
pub struct DavenportPair {
    /// Block matrix [[I/a, 0], [a lambda, a I]] on n2 + n1 coordinates.
    pub lattice: LatticeBasis,
    /// Inverse transpose [[a I, -a lambda^t], [0, I/a]]; a coordinate swap
    /// turns it into the block lattice of the negated transposed system.
    pub adjoint: LatticeBasis,
    /// b with b^dim * det(lattice) = 1; irrational unless n1 = n2, so the
    /// normalized bases live in floating point while minima stay exact.
    pub normalization: f64,
}

pub fn davenport_lattice(linsys: &LinearSystem) -> DavenportPair {
    let n1 = linsys.n1();
    let n2 = linsys.n2();
    let dim = n1 + n2;
    let a = linsys.a();
    let ainv = a.recip();
    let zero = BigRational::zero;
    let mut lat = vec![vec![zero(); dim]; dim];
    let mut adj = vec![vec![zero(); dim]; dim];
    for j in 0..n2 {
        lat[j][j] = ainv.clone();
        adj[j][j] = a.clone();
        for i in 0..n1 {
            lat[j][n2 + i] = a * &linsys.lambda()[i][j];
        }
    }
    for i in 0..n1 {
        lat[n2 + i][n2 + i] = a.clone();
        adj[n2 + i][n2 + i] = ainv.clone();
        for j in 0..n2 {
            adj[n2 + i][j] = -(a * &linsys.lambda()[i][j]);
        }
    }
    let normalization = rational_to_f64(a).powf((n2 as f64 - n1 as f64) / dim as f64);
    DavenportPair {
        lattice: LatticeBasis { dim, columns: lat },
        adjoint: LatticeBasis { dim, columns: adj },
        normalization,
    }
}

/// G = L D L^t with L unit lower triangular; fails when the basis vectors
/// are linearly dependent.
fn ldlt(gram: &[Vec<BigRational>]) -> Result<(Vec<Vec<BigRational>>, Vec<BigRational>)> {
    let n = gram.len();
    let mut l = vec![vec![BigRational::zero(); n]; n];
    let mut d = vec![BigRational::zero(); n];
    for k in 0..n {
        let mut dk = gram[k][k].clone();
        for j in 0..k {
            dk -= &l[k][j] * &l[k][j] * &d[j];
        }
        if !dk.is_positive() {
            return Err(Error::Invalid(
                "basis vectors are linearly dependent".into(),
            ));
        }
        l[k][k] = BigRational::one();
        for i in k + 1..n {
            let mut v = gram[i][k].clone();
            for j in 0..k {
                v -= &l[i][j] * &l[k][j] * &d[j];
            }
            l[i][k] = v / &dk;
        }
        d[k] = dk;
    }
    Ok((l, d))
}

/// All nonzero coefficient tuples with squared lattice norm <= bound, up to
/// sign (the first nonzero coefficient from the top index is positive).
fn short_vectors(
    l: &[Vec<BigRational>],
    d: &[BigRational],
    bound: &BigRational,
) -> Result<Vec<(Vec<i64>, BigRational)>> {
    let n = d.len();
    let mut out = Vec::new();
    let mut c = vec![0i64; n];
    let mut nodes = 0u64;
    descend(l, d, bound, n - 1, &BigRational::zero(), true, &mut c, &mut nodes, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    l: &[Vec<BigRational>],
    d: &[BigRational],
    bound: &BigRational,
    k: usize,
    partial: &BigRational,
    zero_above: bool,
    c: &mut Vec<i64>,
    nodes: &mut u64,
    out: &mut Vec<(Vec<i64>, BigRational)>,
) -> Result<()> {
    let remaining = bound - partial;
    // t = sum_{j > k} L[j][k] c_j; the level-k term is d_k (c_k + t)^2.
    let mut t = BigRational::zero();
    for j in k + 1..d.len() {
        if c[j] != 0 {
            t += &l[j][k] * BigRational::from_integer(BigInt::from(c[j]));
        }
    }
    let span = rational_to_f64(&(&remaining / &d[k]));
    let lim = span.max(0.0).sqrt() + 1e-9;
    let center = -rational_to_f64(&t);
    let lo = if zero_above {
        0
    } else {
        (center - lim).floor() as i64 - 1
    };
    let hi = (center + lim).ceil() as i64 + 1;
    for ck in lo..=hi {
        *nodes += 1;
        if *nodes > ENUM_NODE_BUDGET {
            return Err(Error::Budget(format!(
                "short-vector enumeration exceeded {ENUM_NODE_BUDGET} nodes"
            )));
        }
        let shifted = &t + BigRational::from_integer(BigInt::from(ck));
        let term = &d[k] * &shifted * &shifted;
        if term > remaining {
            continue;
        }
        c[k] = ck;
        let total = partial + &term;
        if k == 0 {
            if !(zero_above && ck == 0) {
                out.push((c.clone(), total));
            }
        } else {
            descend(l, d, bound, k - 1, &total, zero_above && ck == 0, c, nodes, out)?;
        }
    }
    c[k] = 0;
    Ok(())
}

/// Exact successive minima of the lattice, returned as squared lengths in
/// nondecreasing order. Enumerates a ball whose radius starts at the
/// shortest basis column and grows geometrically, capped at the longest
/// column, which always contains a full independent set.
pub fn successive_minima(basis: &LatticeBasis) -> Result<Vec<BigRational>> {
    if basis.dim > 5 {
        return Err(Error::Invalid(format!(
            "exact minima are limited to dimension 5, got {}",
            basis.dim
        )));
    }
    let gram = basis.gram();
    let (l, d) = ldlt(&gram)?;
    let col_norms: Vec<BigRational> = (0..basis.dim).map(|j| gram[j][j].clone()).collect();
    let cap = col_norms.iter().max().unwrap().clone();
    let mut bound = col_norms.iter().min().unwrap().clone();
    loop {
        let mut found = short_vectors(&l, &d, &bound)?;
        found.sort_by(|a, b| a.1.cmp(&b.1));
        let mut chosen_rows: Vec<Vec<BigRational>> = Vec::new();
        let mut minima = Vec::new();
        for (coeffs, normsq) in &found {
            if chosen_rows.len() == basis.dim {
                break;
            }
            let v = basis.vector(coeffs);
            chosen_rows.push(v);
            if rational_matrix_rank(&chosen_rows) == chosen_rows.len() {
                minima.push(normsq.clone());
            } else {
                chosen_rows.pop();
            }
        }
        if minima.len() == basis.dim {
            return Ok(minima);
        }
        if bound >= cap {
            return Err(Error::Invalid(
                "enumeration ball reached its cap without a full independent set".into(),
            ));
        }
        bound = (&bound * BigRational::from_integer(BigInt::from(4))).min(cap.clone());
    }
}

pub fn minima_norms(squared: &[BigRational]) -> Vec<f64> {
    squared.iter().map(|q| rational_to_f64(q).sqrt()).collect()
}

/// Products R_k^2 * S_{dim+1-k}^2 of the squared minima of the block lattice
/// and its adjoint; the normalizing scalars cancel exactly, so this equals
/// the squared product for the determinant-one pair.
pub fn mahler_products(linsys: &LinearSystem) -> Result<Vec<BigRational>> {
    let pair = davenport_lattice(linsys);
    let r = successive_minima(&pair.lattice)?;
    let s = successive_minima(&pair.adjoint)?;
    let dim = pair.lattice.dim;
    Ok((0..dim).map(|k| &r[k] * &s[dim - 1 - k]).collect())
}

/// One evaluation of the shrinking inequality
/// U(Z2) <= C max((Z2/Z1)^n2 U(Z1), Z2^n2 / Z1^n1 * a^(n2-n1) U^t(Z1)).
#[derive(Debug, Clone, Serialize)]
pub struct ShrinkingCheck {
    pub u_z1: u64,
    pub u_z2: u64,
    pub ut_z1: u64,
    /// The max of the two scaled right-hand sides.
    pub bound: f64,
    /// U(Z2) / bound, the empirical constant of the inequality.
    pub ratio: f64,
}

pub fn check_shrinking(
    linsys: &LinearSystem,
    z1: &BigRational,
    z2: &BigRational,
) -> Result<ShrinkingCheck> {
    if !(z1.is_positive() && z1 <= z2 && *z2 <= BigRational::one()) {
        return Err(Error::Invalid(format!(
            "need 0 < Z1 <= Z2 <= 1, got Z1 = {z1}, Z2 = {z2}"
        )));
    }
    let n1 = linsys.n1() as i32;
    let n2 = linsys.n2() as i32;
    let u1 = count_u(linsys, z1, false)?;
    let u2 = count_u(linsys, z2, false)?;
    let ut1 = count_u(linsys, z1, true)?;
    let pow = |b: &BigRational, e: i32| -> BigRational { b.pow(e) };
    let first = pow(&(z2 / z1), n2) * BigRational::from_integer(u1.clone());
    let second = pow(z2, n2) / pow(z1, n1)
        * pow(linsys.a(), n2 - n1)
        * BigRational::from_integer(ut1.clone());
    let bound = first.max(second);
    let ratio = BigRational::from_integer(u2.clone()) / &bound;
    Ok(ShrinkingCheck {
        u_z1: u1.to_u64().unwrap_or(u64::MAX),
        u_z2: u2.to_u64().unwrap_or(u64::MAX),
        ut_z1: ut1.to_u64().unwrap_or(u64::MAX),
        bound: rational_to_f64(&bound),
        ratio: rational_to_f64(&ratio),
    })
}

/// One row of the randomized shrinking batch.
#[derive(Debug, Clone, Serialize)]
pub struct ShrinkingRecord {
    pub id: usize,
    pub n1: usize,
    pub n2: usize,
    pub a: f64,
    pub z1: f64,
    pub z2: f64,
    pub u_z2: u64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShrinkingBatch {
    pub records: Vec<ShrinkingRecord>,
    /// Largest observed ratio per (n1, n2); the inequality's constant
    /// depends on the dimensions, so no cross-dimension claim is made.
    pub per_dim_max: Vec<(usize, usize, f64)>,
    pub max_ratio: f64,
}

/// Deterministic random family: dimensions up to 3, a in [3/2, 4], lambda
/// entries in [-2, 2] with denominator 8, box scales with denominator 16.
pub fn shrinking_batch(instances: usize, seed: u64) -> Result<ShrinkingBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<(usize, LinearSystem, BigRational, BigRational)> = (0..instances)
        .map(|id| {
            let n1 = rng.gen_range(1..=3);
            let n2 = rng.gen_range(1..=3);
            let sys = random_linear_system(&mut rng, n1, n2);
            let k2 = rng.gen_range(1..=16);
            let k1 = rng.gen_range(1..=k2);
            let q16 = |k: i64| BigRational::new(BigInt::from(k), BigInt::from(16));
            (id, sys, q16(k1), q16(k2))
        })
        .collect();
    let records: Vec<ShrinkingRecord> = inputs
        .par_iter()
        .map(|(id, sys, z1, z2)| {
            let check = check_shrinking(sys, z1, z2)?;
            Ok(ShrinkingRecord {
                id: *id,
                n1: sys.n1(),
                n2: sys.n2(),
                a: rational_to_f64(sys.a()),
                z1: rational_to_f64(z1),
                z2: rational_to_f64(z2),
                u_z2: check.u_z2,
                bound: check.bound,
                ratio: check.ratio,
            })
        })
        .collect::<Result<_>>()?;
    let mut per_dim: std::collections::BTreeMap<(usize, usize), f64> =
        std::collections::BTreeMap::new();
    let mut max_ratio = 0.0f64;
    for rec in &records {
        let slot = per_dim.entry((rec.n1, rec.n2)).or_insert(0.0);
        *slot = slot.max(rec.ratio);
        max_ratio = max_ratio.max(rec.ratio);
    }
    Ok(ShrinkingBatch {
        records,
        per_dim_max: per_dim.into_iter().map(|((a, b), m)| (a, b, m)).collect(),
        max_ratio,
    })
}

/// Random system with a in [3/2, 4] and lambda entries in [-2, 2], all with
/// denominator 8.
pub fn random_linear_system<R: Rng>(rng: &mut R, n1: usize, n2: usize) -> LinearSystem {
    let q8 = |k: i64| BigRational::new(BigInt::from(k), BigInt::from(8));
    let a = q8(rng.gen_range(12..=32));
    let lambda = (0..n1)
        .map(|_| (0..n2).map(|_| q8(rng.gen_range(-16..=16))).collect())
        .collect();
    LinearSystem::new(lambda, a).expect("sampled parameters are valid")
}
