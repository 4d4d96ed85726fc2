//! Systems of bihomogeneous forms with exact coefficient tensors.
//!
//! A form of bidegree `(d1, d2)` is stored as a list of monomials
//! `c * x^e * y^f` with `|e| = d1`, `|f| = d2`. Equivalently it is represented
//! by the symmetric coefficient tensor `F_{j_1..j_{d1}; k_1..k_{d2}}` obtained
//! by distributing each coefficient uniformly over the orderings of its index
//! multiset. The associated multilinear form
//!
//! `Gamma_i(x^(1)..x^(d1); y^(1)..y^(d2)) = d1! d2! * sum F_{j;k} prod x prod y`
//!
//! is an exact integer for integer inputs because the factorials clear the
//! symmetrization denominators. Iterated forward differencing of the form
//! recovers `Gamma_i` up to sign, which is the bridge between counting and the
//! differencing inequalities; both sides are computed here in exact integer
//! arithmetic so the identities can be tested with zero tolerance.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::exact::rational_matrix_rank;
use crate::{Error, Result};

/// Which variable group an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// One monomial record as supplied by callers and config files.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialSpec {
    /// Form index, `0..r`.
    pub form: usize,
    pub coeff: BigRational,
    /// Exponents of `x_1..x_{n1}`; must sum to `d1`.
    pub xexp: Vec<u32>,
    /// Exponents of `y_1..y_{n2}`; must sum to `d2`.
    pub yexp: Vec<u32>,
}

/// Scaled integer monomial: coefficient after clearing the form's denominator.
#[derive(Debug, Clone)]
struct IntMono {
    coeff: i128,
    xexp: Vec<u8>,
    yexp: Vec<u8>,
    /// Index word realizing the x exponent multiset, e.g. (2,1,0) -> [0,0,1].
    xword: Vec<u8>,
    yword: Vec<u8>,
}

/// Dense scaled tensor `d1! d2! * F_{j;k}` in row-major mixed radix layout.
#[derive(Debug, Clone)]
pub struct ScaledTensor {
    n1: usize,
    n2: usize,
    d1: usize,
    d2: usize,
    entries: Vec<i128>,
}

impl ScaledTensor {
    pub fn entry(&self, jidx: &[usize], kidx: &[usize]) -> i128 {
        assert_eq!(jidx.len(), self.d1);
        assert_eq!(kidx.len(), self.d2);
        let mut idx = 0usize;
        for &j in jidx {
            assert!(j < self.n1);
            idx = idx * self.n1 + j;
        }
        for &k in kidx {
            assert!(k < self.n2);
            idx = idx * self.n2 + k;
        }
        self.entries[idx]
    }
}

/// A validated system of `r` bihomogeneous forms sharing `(n1, n2, d1, d2)`.
#[derive(Debug, Clone)]
pub struct FormSystem {
    r: usize,
    n1: usize,
    n2: usize,
    d1: usize,
    d2: usize,
    monos: Vec<Vec<IntMono>>,
    original: Vec<Vec<(BigRational, Vec<u8>, Vec<u8>)>>,
    clear: Vec<BigInt>,
    tensors: Option<Vec<ScaledTensor>>,
}

const TENSOR_DEGREE_LIMIT: usize = 6;
const TENSOR_DIM_LIMIT: usize = 8;

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product::<i128>().max(1)
}

/// All permutations of `0..d`, cached; `d <= 6` in this crate.
fn permutations(d: usize) -> &'static [Vec<u8>] {
    static TABLES: OnceLock<Vec<Vec<Vec<u8>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        (0..=TENSOR_DEGREE_LIMIT)
            .map(|d| {
                let mut out = Vec::new();
                let mut idx: Vec<u8> = (0..d as u8).collect();
                heap_permute(&mut idx, d, &mut out);
                out
            })
            .collect()
    });
    &tables[d]
}

fn heap_permute(idx: &mut Vec<u8>, k: usize, out: &mut Vec<Vec<u8>>) {
    if k <= 1 {
        out.push(idx.clone());
        return;
    }
    for i in 0..k {
        heap_permute(idx, k - 1, out);
        if k % 2 == 0 {
            idx.swap(i, k - 1);
        } else {
            idx.swap(0, k - 1);
        }
    }
}

fn exponent_word(exp: &[u8]) -> Vec<u8> {
    let mut w = Vec::new();
    for (j, &e) in exp.iter().enumerate() {
        for _ in 0..e {
            w.push(j as u8);
        }
    }
    w
}

impl FormSystem {
    pub fn new(
        r: usize,
        n1: usize,
        n2: usize,
        d1: usize,
        d2: usize,
        monomials: Vec<MonomialSpec>,
    ) -> Result<Self> {
        if r == 0 || n1 == 0 || n2 == 0 {
            return Err(Error::Invalid("need r >= 1, n1 >= 1, n2 >= 1".into()));
        }
        if d1 == 0 || d2 == 0 {
            return Err(Error::Invalid("bidegree components must be >= 1".into()));
        }
        if d1 + d2 > TENSOR_DEGREE_LIMIT {
            return Err(Error::Invalid(format!(
                "total degree {} exceeds supported limit {}",
                d1 + d2,
                TENSOR_DEGREE_LIMIT
            )));
        }
        // Combine duplicate exponent patterns per form in exact arithmetic.
        let mut combined: Vec<BTreeMap<(Vec<u8>, Vec<u8>), BigRational>> =
            vec![BTreeMap::new(); r];
        let mut supplied = vec![0usize; r];
        for m in &monomials {
            if m.form >= r {
                return Err(Error::Invalid(format!(
                    "monomial form index {} out of range 0..{r}",
                    m.form
                )));
            }
            if m.xexp.len() != n1 || m.yexp.len() != n2 {
                return Err(Error::Invalid(
                    "exponent vector length does not match n1/n2".into(),
                ));
            }
            if m.xexp.iter().sum::<u32>() as usize != d1
                || m.yexp.iter().sum::<u32>() as usize != d2
            {
                return Err(Error::Invalid(format!(
                    "monomial is not bihomogeneous of bidegree ({d1},{d2})"
                )));
            }
            let key = (
                m.xexp.iter().map(|&e| e as u8).collect::<Vec<u8>>(),
                m.yexp.iter().map(|&e| e as u8).collect::<Vec<u8>>(),
            );
            let slot = combined[m.form]
                .entry(key)
                .or_insert_with(BigRational::zero);
            *slot += &m.coeff;
            supplied[m.form] += 1;
        }
        if let Some(i) = supplied.iter().position(|&c| c == 0) {
            // A form whose coefficients cancel to zero stays legal; a form
            // with no monomial records at all is a caller mistake.
            return Err(Error::Invalid(format!("form {i} has no monomials")));
        }

        let mut monos = Vec::with_capacity(r);
        let mut original = Vec::with_capacity(r);
        let mut clear = Vec::with_capacity(r);
        for form in combined {
            let entries: Vec<_> = form
                .into_iter()
                .filter(|(_, c)| !c.is_zero())
                .collect();
            // Per-form denominator clearing keeps each equation integral; the
            // zero set is unchanged by scaling a single equation.
            let lcm = entries.iter().fold(BigInt::one(), |acc, (_, c)| {
                num_integer::Integer::lcm(&acc, c.denom())
            });
            let mut ms = Vec::with_capacity(entries.len());
            let mut orig = Vec::with_capacity(entries.len());
            for ((xexp, yexp), c) in entries {
                let scaled = c.numer() * (&lcm / c.denom());
                let coeff = scaled.to_i128().ok_or_else(|| {
                    Error::Invalid("scaled coefficient exceeds 128-bit range".into())
                })?;
                ms.push(IntMono {
                    coeff,
                    xword: exponent_word(&xexp),
                    yword: exponent_word(&yexp),
                    xexp,
                    yexp,
                });
                orig.push((c, ms.last().unwrap().xexp.clone(), ms.last().unwrap().yexp.clone()));
            }
            monos.push(ms);
            original.push(orig);
            clear.push(lcm);
        }

        let mut sys = FormSystem {
            r,
            n1,
            n2,
            d1,
            d2,
            monos,
            original,
            clear,
            tensors: None,
        };
        if n1 <= TENSOR_DIM_LIMIT && n2 <= TENSOR_DIM_LIMIT {
            sys.tensors = Some(sys.build_tensors()?);
        }
        Ok(sys)
    }

    pub fn r(&self) -> usize {
        self.r
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn d1(&self) -> usize {
        self.d1
    }
    pub fn d2(&self) -> usize {
        self.d2
    }
    pub fn dtilde(&self) -> usize {
        self.d1 + self.d2 - 2
    }

    /// Per-form factor by which coefficients were multiplied to clear
    /// denominators; the stored integer system is `clear[i] * F_i`.
    pub fn clear_factor(&self, i: usize) -> &BigInt {
        &self.clear[i]
    }

    /// The original (uncleared) monomials, in form order; inverse of the
    /// constructor input up to combining nothing and ordering within forms.
    pub fn monomial_specs(&self) -> Vec<MonomialSpec> {
        let mut out = Vec::new();
        for (i, form) in self.original.iter().enumerate() {
            for (coeff, xe, ye) in form {
                out.push(MonomialSpec {
                    form: i,
                    coeff: coeff.clone(),
                    xexp: xe.iter().map(|&e| e as u32).collect(),
                    yexp: ye.iter().map(|&e| e as u32).collect(),
                });
            }
        }
        out
    }

    /// Largest absolute scaled coefficient across all forms.
    pub fn max_abs_coeff(&self) -> i128 {
        self.monos
            .iter()
            .flatten()
            .map(|m| m.coeff.abs())
            .max()
            .unwrap_or(0)
    }

    /// For `d2 = 1` systems: indices of x variables appearing in some
    /// monomial that uses y slot `m`, across all forms. Pairwise disjoint
    /// supports let box integrals factor per slot.
    pub fn y_slot_x_support(&self, m: usize) -> Vec<usize> {
        assert_eq!(self.d2, 1, "slot support is defined for d2 = 1");
        let mut used = vec![false; self.n1];
        for form in &self.monos {
            for mono in form {
                if mono.yexp[m] > 0 {
                    for (j, &e) in mono.xexp.iter().enumerate() {
                        if e > 0 {
                            used[j] = true;
                        }
                    }
                }
            }
        }
        (0..self.n1).filter(|&j| used[j]).collect()
    }

    /// Whether form `i` is identically zero after combining monomials with
    /// equal exponent patterns.
    pub fn is_zero_form(&self, i: usize) -> bool {
        let mut combined: std::collections::BTreeMap<(Vec<u8>, Vec<u8>), i128> =
            std::collections::BTreeMap::new();
        for m in &self.monos[i] {
            *combined.entry((m.xexp.clone(), m.yexp.clone())).or_insert(0) += m.coeff;
        }
        combined.values().all(|&c| c == 0)
    }

    /// Sum of absolute values of the original (uncleared) coefficients of
    /// form `i`, after combining equal exponent patterns; a Lipschitz-style
    /// bound for the form on the unit cube.
    pub fn coeff_l1_f64(&self, i: usize) -> f64 {
        let mut combined: std::collections::BTreeMap<(Vec<u8>, Vec<u8>), i128> =
            std::collections::BTreeMap::new();
        for m in &self.monos[i] {
            *combined.entry((m.xexp.clone(), m.yexp.clone())).or_insert(0) += m.coeff;
        }
        let clear = crate::exact::rational_to_f64(&BigRational::from_integer(
            self.clear[i].clone(),
        ));
        combined.values().map(|&c| (c as f64).abs()).sum::<f64>() / clear
    }

    fn build_tensors(&self) -> Result<Vec<ScaledTensor>> {
        let size = self.n1.pow(self.d1 as u32) * self.n2.pow(self.d2 as u32);
        let mut out = Vec::with_capacity(self.r);
        for form in &self.monos {
            let mut entries = vec![0i128; size];
            for m in form {
                let mult = m.xexp.iter().map(|&e| factorial(e as usize)).product::<i128>()
                    * m.yexp.iter().map(|&e| factorial(e as usize)).product::<i128>();
                let value = m
                    .coeff
                    .checked_mul(mult)
                    .ok_or_else(|| Error::Invalid("tensor entry overflow".into()))?;
                // Write the same value on every ordering of the index multiset.
                for xperm in distinct_orderings(&m.xword) {
                    for yperm in distinct_orderings(&m.yword) {
                        let mut idx = 0usize;
                        for &j in &xperm {
                            idx = idx * self.n1 + j as usize;
                        }
                        for &k in &yperm {
                            idx = idx * self.n2 + k as usize;
                        }
                        entries[idx] = value;
                    }
                }
            }
            out.push(ScaledTensor {
                n1: self.n1,
                n2: self.n2,
                d1: self.d1,
                d2: self.d2,
                entries,
            });
        }
        Ok(out)
    }

    /// Dense scaled tensor of form `i`, available when `n1, n2 <= 8`.
    pub fn scaled_tensor(&self, i: usize) -> Option<&ScaledTensor> {
        self.tensors.as_ref().map(|t| &t[i])
    }

    /// Rational tensor entry `F_{j;k}` of the original (uncleared) form.
    pub fn tensor_entry(&self, i: usize, jidx: &[usize], kidx: &[usize]) -> Option<BigRational> {
        let t = self.scaled_tensor(i)?;
        let scaled = BigRational::from_integer(BigInt::from(t.entry(jidx, kidx)));
        let denom = BigRational::from_integer(
            BigInt::from(factorial(self.d1) * factorial(self.d2)) * &self.clear[i],
        );
        Some(scaled / denom)
    }

    /// Exact value of the cleared integer form `clear[i] * F_i` at an integer
    /// point, by monomial evaluation.
    pub fn eval_scaled(&self, i: usize, x: &[i64], y: &[i64]) -> i128 {
        debug_assert_eq!(x.len(), self.n1);
        debug_assert_eq!(y.len(), self.n2);
        let mut acc = 0i128;
        for m in &self.monos[i] {
            let mut t = m.coeff;
            for (&xi, &e) in x.iter().zip(&m.xexp) {
                for _ in 0..e {
                    t *= xi as i128;
                }
            }
            for (&yi, &e) in y.iter().zip(&m.yexp) {
                for _ in 0..e {
                    t *= yi as i128;
                }
            }
            acc += t;
        }
        acc
    }

    /// `clear[i] * F_i` at an integer point, all arithmetic modulo `q`.
    pub fn eval_mod(&self, i: usize, x: &[i64], y: &[i64], q: i64) -> i64 {
        debug_assert!(q > 0);
        let mut acc = 0i64;
        for m in &self.monos[i] {
            let mut t = (m.coeff % q as i128) as i64;
            t = t.rem_euclid(q);
            for (&xi, &e) in x.iter().zip(&m.xexp) {
                let xm = xi.rem_euclid(q);
                for _ in 0..e {
                    t = t * xm % q;
                }
            }
            for (&yi, &e) in y.iter().zip(&m.yexp) {
                let ym = yi.rem_euclid(q);
                for _ in 0..e {
                    t = t * ym % q;
                }
            }
            acc = (acc + t) % q;
        }
        acc
    }

    /// `F_i` at a rational point, in exact arithmetic (original scaling).
    pub fn eval_form(&self, i: usize, x: &[BigRational], y: &[BigRational]) -> BigRational {
        assert_eq!(x.len(), self.n1);
        assert_eq!(y.len(), self.n2);
        let mut acc = BigRational::zero();
        for (c, xexp, yexp) in &self.original[i] {
            let mut t = c.clone();
            for (xi, &e) in x.iter().zip(xexp) {
                for _ in 0..e {
                    t *= xi;
                }
            }
            for (yi, &e) in y.iter().zip(yexp) {
                for _ in 0..e {
                    t *= yi;
                }
            }
            acc += t;
        }
        acc
    }

    /// `F_i` at an integer point, exact, original scaling.
    pub fn eval_form_int(&self, i: usize, x: &[i64], y: &[i64]) -> BigRational {
        BigRational::new(
            BigInt::from(self.eval_scaled(i, x, y)),
            self.clear[i].clone(),
        )
    }

    /// `F_i` at a float point (for quadrature); scaled integer coefficients.
    pub fn eval_scaled_f64(&self, i: usize, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0f64;
        for m in &self.monos[i] {
            let mut t = m.coeff as f64;
            for (&xi, &e) in x.iter().zip(&m.xexp) {
                for _ in 0..e {
                    t *= xi;
                }
            }
            for (&yi, &e) in y.iter().zip(&m.yexp) {
                for _ in 0..e {
                    t *= yi;
                }
            }
            acc += t;
        }
        acc
    }

    /// Gradient of the scaled form `i` at a float point, along one axis.
    pub fn gradient_f64(&self, i: usize, x: &[f64], y: &[f64], axis: Axis) -> Vec<f64> {
        let n = match axis {
            Axis::X => self.n1,
            Axis::Y => self.n2,
        };
        let mut g = vec![0.0; n];
        for m in &self.monos[i] {
            let (exps, own, other_val) = match axis {
                Axis::X => (&m.xexp, x, {
                    let mut t = 1.0;
                    for (&yi, &e) in y.iter().zip(&m.yexp) {
                        for _ in 0..e {
                            t *= yi;
                        }
                    }
                    t
                }),
                Axis::Y => (&m.yexp, y, {
                    let mut t = 1.0;
                    for (&xi, &e) in x.iter().zip(&m.xexp) {
                        for _ in 0..e {
                            t *= xi;
                        }
                    }
                    t
                }),
            };
            for j in 0..n {
                let e = exps[j];
                if e == 0 {
                    continue;
                }
                let mut t = m.coeff as f64 * e as f64 * other_val;
                for (k, &v) in own.iter().enumerate() {
                    let pow = if k == j { e - 1 } else { exps[k] };
                    for _ in 0..pow {
                        t *= v;
                    }
                }
                g[j] += t;
            }
        }
        g
    }

    /// Multilinear form `Gamma_i` of the cleared system on a full slot tuple:
    /// `xs` has `d1` vectors of length `n1`, `ys` has `d2` of length `n2`.
    pub fn gamma(&self, i: usize, xs: &[Vec<i64>], ys: &[Vec<i64>]) -> i128 {
        assert_eq!(xs.len(), self.d1);
        assert_eq!(ys.len(), self.d2);
        let perms_x = permutations(self.d1);
        let perms_y = permutations(self.d2);
        let mut acc = 0i128;
        for m in &self.monos[i] {
            let mut sx = 0i128;
            for p in perms_x {
                let mut t = 1i128;
                for (slot, &pos) in p.iter().enumerate() {
                    t *= xs[slot][m.xword[pos as usize] as usize] as i128;
                }
                sx += t;
            }
            if sx == 0 {
                continue;
            }
            let mut sy = 0i128;
            for p in perms_y {
                let mut t = 1i128;
                for (slot, &pos) in p.iter().enumerate() {
                    t *= ys[slot][m.yword[pos as usize] as usize] as i128;
                }
                sy += t;
            }
            acc += m.coeff * sx * sy;
        }
        acc
    }

    /// `Gamma_i` by dense tensor contraction; test oracle for `gamma`.
    pub fn gamma_by_tensor(&self, i: usize, xs: &[Vec<i64>], ys: &[Vec<i64>]) -> Option<i128> {
        let t = self.scaled_tensor(i)?;
        let mut acc = 0i128;
        let xcount = self.n1.pow(self.d1 as u32);
        let ycount = self.n2.pow(self.d2 as u32);
        for xi in 0..xcount {
            // Decode mixed-radix x indices.
            let mut xprod = 1i128;
            let mut rem = xi;
            for slot in (0..self.d1).rev() {
                let j = rem % self.n1;
                rem /= self.n1;
                xprod *= xs[slot][j] as i128;
            }
            if xprod == 0 {
                continue;
            }
            for yi in 0..ycount {
                let entry = t.entries[xi * ycount + yi];
                if entry == 0 {
                    continue;
                }
                let mut yprod = 1i128;
                let mut rem = yi;
                for slot in (0..self.d2).rev() {
                    let k = rem % self.n2;
                    rem /= self.n2;
                    yprod *= ys[slot][k] as i128;
                }
                acc += entry * xprod * yprod;
            }
        }
        Some(acc)
    }

    /// `sum_i alpha_i * Gamma_i` as a double, summed pairwise.
    pub fn multilinear_eval(&self, alpha: &[f64], xs: &[Vec<i64>], ys: &[Vec<i64>]) -> f64 {
        assert_eq!(alpha.len(), self.r);
        let terms: Vec<f64> = (0..self.r)
            .map(|i| alpha[i] * self.gamma(i, xs, ys) as f64)
            .collect();
        crate::exact::pairwise_sum(&terms)
    }

    /// Iterated difference of `sum_i alpha_i * (cleared F_i)` in both groups:
    /// difference `d2` times in `y` along `ys`, then `d1` times in `x` along
    /// `xs`. Exact; equals `Gamma` up to the sign `(-1)^(d1+d2)`.
    pub fn bihom_difference(&self, alpha: &[i64], xs: &[Vec<i64>], ys: &[Vec<i64>]) -> i128 {
        assert_eq!(alpha.len(), self.r);
        assert_eq!(xs.len(), self.d1);
        assert_eq!(ys.len(), self.d2);
        let mut acc = 0i128;
        for dx in 0..(1u32 << self.d1) {
            let mut x = vec![0i64; self.n1];
            for (slot, xv) in xs.iter().enumerate() {
                if dx >> slot & 1 == 1 {
                    for (a, b) in x.iter_mut().zip(xv) {
                        *a += b;
                    }
                }
            }
            for dy in 0..(1u32 << self.d2) {
                let mut y = vec![0i64; self.n2];
                for (slot, yv) in ys.iter().enumerate() {
                    if dy >> slot & 1 == 1 {
                        for (a, b) in y.iter_mut().zip(yv) {
                            *a += b;
                        }
                    }
                }
                let sign = if (dx.count_ones() + dy.count_ones()) % 2 == 0 {
                    1i128
                } else {
                    -1i128
                };
                for (i, &ai) in alpha.iter().enumerate() {
                    acc += sign * ai as i128 * self.eval_scaled(i, &x, &y);
                }
            }
        }
        acc
    }

    /// Coefficient matrix `L` with `F_i(x; y) = sum_m L[i][m] y_m`, available
    /// when `d2 = 1`; used by the fibered counter and factorized Weyl sums.
    pub fn y_linear_matrix(&self, x: &[i64]) -> Option<Vec<Vec<i128>>> {
        if self.d2 != 1 {
            return None;
        }
        let mut out = vec![vec![0i128; self.n2]; self.r];
        for (i, form) in self.monos.iter().enumerate() {
            for m in form {
                let mut t = m.coeff;
                for (&xi, &e) in x.iter().zip(&m.xexp) {
                    for _ in 0..e {
                        t *= xi as i128;
                    }
                }
                let target = m.yword[0] as usize;
                out[i][target] += t;
            }
        }
        Some(out)
    }

    /// Mirror of `y_linear_matrix` for `d1 = 1`.
    pub fn x_linear_matrix(&self, y: &[i64]) -> Option<Vec<Vec<i128>>> {
        if self.d1 != 1 {
            return None;
        }
        let mut out = vec![vec![0i128; self.n1]; self.r];
        for (i, form) in self.monos.iter().enumerate() {
            for m in form {
                let mut t = m.coeff;
                for (&yi, &e) in y.iter().zip(&m.yexp) {
                    for _ in 0..e {
                        t *= yi as i128;
                    }
                }
                out[i][m.xword[0] as usize] += t;
            }
        }
        Some(out)
    }

    /// Jacobian of the system with respect to one variable group, `r x n`
    /// matrix of exact rationals at a rational point.
    pub fn jacobian(&self, x: &[BigRational], y: &[BigRational], axis: Axis) -> Vec<Vec<BigRational>> {
        assert_eq!(x.len(), self.n1);
        assert_eq!(y.len(), self.n2);
        let n = match axis {
            Axis::X => self.n1,
            Axis::Y => self.n2,
        };
        let mut jac = vec![vec![BigRational::zero(); n]; self.r];
        for (i, form) in self.original.iter().enumerate() {
            for (c, xexp, yexp) in form {
                for j in 0..n {
                    let (own_exp, own, other, other_exp) = match axis {
                        Axis::X => (xexp, x, y, yexp),
                        Axis::Y => (yexp, y, x, xexp),
                    };
                    let e = own_exp[j];
                    if e == 0 {
                        continue;
                    }
                    let mut t = c * BigRational::from_integer(BigInt::from(e));
                    for (k, v) in own.iter().enumerate() {
                        let pow = if k == j { own_exp[k] - 1 } else { own_exp[k] };
                        for _ in 0..pow {
                            t *= v;
                        }
                    }
                    for (v, &e2) in other.iter().zip(other_exp) {
                        for _ in 0..e2 {
                            t *= v;
                        }
                    }
                    jac[i][j] += t;
                }
            }
        }
        jac
    }

    /// Rank over Q of the Jacobian along the given axis.
    pub fn jacobian_rank(&self, x: &[BigRational], y: &[BigRational], axis: Axis) -> usize {
        rational_matrix_rank(&self.jacobian(x, y, axis))
    }

    /// Jacobian along an axis at an integer point, entries reduced mod `p`.
    pub fn jacobian_mod_p(&self, x: &[i64], y: &[i64], axis: Axis, p: i64) -> Vec<Vec<i64>> {
        let n = match axis {
            Axis::X => self.n1,
            Axis::Y => self.n2,
        };
        let mut jac = vec![vec![0i64; n]; self.r];
        for (i, form) in self.monos.iter().enumerate() {
            for m in form {
                for j in 0..n {
                    let (own_exp, own, other, other_exp) = match axis {
                        Axis::X => (&m.xexp, x, y, &m.yexp),
                        Axis::Y => (&m.yexp, y, x, &m.xexp),
                    };
                    let e = own_exp[j];
                    if e == 0 {
                        continue;
                    }
                    let mut t = ((m.coeff % p as i128) as i64 * e as i64).rem_euclid(p);
                    for (k, &v) in own.iter().enumerate() {
                        let pow = if k == j { own_exp[k] - 1 } else { own_exp[k] };
                        let vm = v.rem_euclid(p);
                        for _ in 0..pow {
                            t = t * vm % p;
                        }
                    }
                    for (&v, &e2) in other.iter().zip(other_exp) {
                        let vm = v.rem_euclid(p);
                        for _ in 0..e2 {
                            t = t * vm % p;
                        }
                    }
                    jac[i][j] = (jac[i][j] + t) % p;
                }
            }
        }
        jac
    }

    /// Upper bound on `|cleared F_i|` over `|x_j| <= xmax[j]`,
    /// `|y_k| <= ymax[k]`, uniform over the forms.
    pub fn monomial_value_bound(&self, xmax: &[i128], ymax: &[i128]) -> i128 {
        assert_eq!(xmax.len(), self.n1);
        assert_eq!(ymax.len(), self.n2);
        let mut best = 0i128;
        for form in &self.monos {
            let mut sum = 0i128;
            for m in form {
                let mut t = m.coeff.abs();
                for (&v, &e) in xmax.iter().zip(&m.xexp) {
                    for _ in 0..e {
                        t *= v;
                    }
                }
                for (&v, &e) in ymax.iter().zip(&m.yexp) {
                    for _ in 0..e {
                        t *= v;
                    }
                }
                sum += t;
            }
            best = best.max(sum);
        }
        best
    }

    /// Full Jacobian (both groups concatenated) mod `p`, `r x (n1+n2)`.
    pub fn full_jacobian_mod_p(&self, x: &[i64], y: &[i64], p: i64) -> Vec<Vec<i64>> {
        let jx = self.jacobian_mod_p(x, y, Axis::X, p);
        let jy = self.jacobian_mod_p(x, y, Axis::Y, p);
        jx.into_iter()
            .zip(jy)
            .map(|(a, b)| a.into_iter().chain(b).collect())
            .collect()
    }
}

/// `d`-fold iterated difference of `f` along `dirs`; the empty difference is
/// zero by convention.
pub fn iterated_difference<F: Fn(&[i64]) -> i128>(f: F, dim: usize, dirs: &[Vec<i64>]) -> i128 {
    if dirs.is_empty() {
        return 0;
    }
    for d in dirs {
        assert_eq!(d.len(), dim);
    }
    let mut acc = 0i128;
    for mask in 0..(1u32 << dirs.len()) {
        let mut pt = vec![0i64; dim];
        for (slot, dir) in dirs.iter().enumerate() {
            if mask >> slot & 1 == 1 {
                for (a, b) in pt.iter_mut().zip(dir) {
                    *a += b;
                }
            }
        }
        let sign = if mask.count_ones() % 2 == 0 { 1 } else { -1 };
        acc += sign * f(&pt);
    }
    acc
}

/// Standard basis vector `e_l` of length `n`.
pub fn unit_vec(n: usize, l: usize) -> Vec<i64> {
    let mut v = vec![0i64; n];
    v[l] = 1;
    v
}

fn distinct_orderings(word: &[u8]) -> Vec<Vec<u8>> {
    let mut seen = std::collections::BTreeSet::new();
    for p in permutations(word.len()) {
        let arranged: Vec<u8> = p.iter().map(|&i| word[i as usize]).collect();
        seen.insert(arranged);
    }
    seen.into_iter().collect()
}

/// Random system with integer coefficients in `[-bound, bound] \ {0}`; used
/// by seeded property tests and batch drivers.
pub fn random_system<R: Rng>(
    rng: &mut R,
    r: usize,
    n1: usize,
    n2: usize,
    d1: usize,
    d2: usize,
    coeff_bound: i64,
    max_monomials_per_form: usize,
) -> FormSystem {
    let mut specs = Vec::new();
    for form in 0..r {
        let count = rng.gen_range(1..=max_monomials_per_form);
        for _ in 0..count {
            let mut c = 0i64;
            while c == 0 {
                c = rng.gen_range(-coeff_bound..=coeff_bound);
            }
            specs.push(MonomialSpec {
                form,
                coeff: BigRational::from_integer(BigInt::from(c)),
                xexp: random_composition(rng, d1, n1),
                yexp: random_composition(rng, d2, n2),
            });
        }
    }
    // Retry on the measure-zero event that all coefficients of a form cancel.
    match FormSystem::new(r, n1, n2, d1, d2, specs) {
        Ok(sys) if sys.monos.iter().all(|f| !f.is_empty()) => sys,
        _ => random_system(rng, r, n1, n2, d1, d2, coeff_bound, max_monomials_per_form),
    }
}

fn random_composition<R: Rng>(rng: &mut R, total: usize, parts: usize) -> Vec<u32> {
    let mut v = vec![0u32; parts];
    for _ in 0..total {
        v[rng.gen_range(0..parts)] += 1;
    }
    v
}

/// Ready-made example systems used throughout the documentation and tests.
pub mod samples {
    use super::*;

    fn one() -> BigRational {
        BigRational::from_integer(BigInt::one())
    }

    /// `x1 y1 + x2 y2 + x3 y3`: one form, bidegree (1,1), n = 3 + 3.
    pub fn dot3() -> FormSystem {
        let specs = (0..3)
            .map(|j| MonomialSpec {
                form: 0,
                coeff: one(),
                xexp: (0..3).map(|k| (k == j) as u32).collect(),
                yexp: (0..3).map(|k| (k == j) as u32).collect(),
            })
            .collect();
        FormSystem::new(1, 3, 3, 1, 1, specs).unwrap()
    }

    /// `x1^2 y1 + x2^2 y2`: one form, bidegree (2,1), n = 2 + 2.
    pub fn squares2() -> FormSystem {
        let specs = (0..2)
            .map(|j| MonomialSpec {
                form: 0,
                coeff: one(),
                xexp: (0..2).map(|k| if k == j { 2 } else { 0 }).collect(),
                yexp: (0..2).map(|k| (k == j) as u32).collect(),
            })
            .collect();
        FormSystem::new(1, 2, 2, 2, 1, specs).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::samples::{dot3, squares2};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rat(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn monomial_evaluation_example() {
        // F = x1^2 y1 + x2^2 y2 at x = (1,2), y = (3,4): 1*3 + 4*4 = 19.
        let sys = squares2();
        assert_eq!(sys.eval_scaled(0, &[1, 2], &[3, 4]), 19);
        assert_eq!(sys.eval_form_int(0, &[1, 2], &[3, 4]), rat(19));
    }

    #[test]
    fn rejects_inhomogeneous_and_misshapen_input() {
        let bad_deg = FormSystem::new(
            1,
            2,
            2,
            2,
            1,
            vec![MonomialSpec {
                form: 0,
                coeff: rat(1),
                xexp: vec![1, 0],
                yexp: vec![1, 0],
            }],
        );
        assert!(bad_deg.is_err());
        let bad_len = FormSystem::new(
            1,
            2,
            2,
            1,
            1,
            vec![MonomialSpec {
                form: 0,
                coeff: rat(1),
                xexp: vec![1],
                yexp: vec![1, 0],
            }],
        );
        assert!(bad_len.is_err());
        let bad_form = FormSystem::new(
            1,
            2,
            2,
            1,
            1,
            vec![MonomialSpec {
                form: 3,
                coeff: rat(1),
                xexp: vec![1, 0],
                yexp: vec![1, 0],
            }],
        );
        assert!(bad_form.is_err());
    }

    #[test]
    fn symmetrization_halves_mixed_monomial() {
        // x1 x2 y1 with d1 = 2: F_{12;1} = F_{21;1} = 1/2.
        let sys = FormSystem::new(
            1,
            2,
            1,
            2,
            1,
            vec![MonomialSpec {
                form: 0,
                coeff: rat(1),
                xexp: vec![1, 1],
                yexp: vec![1],
            }],
        )
        .unwrap();
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        assert_eq!(sys.tensor_entry(0, &[0, 1], &[0]).unwrap(), half);
        assert_eq!(sys.tensor_entry(0, &[1, 0], &[0]).unwrap(), half);
        assert_eq!(sys.tensor_entry(0, &[0, 0], &[0]).unwrap(), rat(0));
    }

    #[test]
    fn tensor_is_symmetric_under_slot_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let sys = random_system(&mut rng, 2, 3, 2, 2, 2, 5, 3);
            for i in 0..2 {
                for j1 in 0..3 {
                    for j2 in 0..3 {
                        for k1 in 0..2 {
                            for k2 in 0..2 {
                                let a = sys.tensor_entry(i, &[j1, j2], &[k1, k2]).unwrap();
                                let b = sys.tensor_entry(i, &[j2, j1], &[k1, k2]).unwrap();
                                let c = sys.tensor_entry(i, &[j1, j2], &[k2, k1]).unwrap();
                                assert_eq!(a, b);
                                assert_eq!(a, c);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gamma_on_unit_vectors_reads_tensor_entry() {
        // Gamma_1(e1, e1; e1) = 2! 1! F_{11;1} = 2 for x1^2 y1 + x2^2 y2.
        let sys = squares2();
        let e1x = unit_vec(2, 0);
        let e1y = unit_vec(2, 0);
        assert_eq!(sys.gamma(0, &[e1x.clone(), e1x.clone()], &[e1y]), 2);
    }

    #[test]
    fn gamma_with_repeated_vectors_is_factorial_times_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let sys = random_system(&mut rng, 2, 3, 2, 2, 2, 4, 4);
            let x: Vec<i64> = (0..3).map(|_| rng.gen_range(-4..=4)).collect();
            let y: Vec<i64> = (0..2).map(|_| rng.gen_range(-4..=4)).collect();
            for i in 0..2 {
                let gamma = sys.gamma(i, &[x.clone(), x.clone()], &[y.clone(), y.clone()]);
                let expect = 2 * 2 * sys.eval_scaled(i, &x, &y);
                assert_eq!(gamma, expect, "factorial identity for form {i}");
            }
        }
    }

    #[test]
    fn gamma_matches_tensor_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..30 {
            let sys = random_system(&mut rng, 1, 3, 3, 2, 1, 5, 4);
            let xs: Vec<Vec<i64>> = (0..2)
                .map(|_| (0..3).map(|_| rng.gen_range(-3..=3)).collect())
                .collect();
            let ys: Vec<Vec<i64>> = (0..1)
                .map(|_| (0..3).map(|_| rng.gen_range(-3..=3)).collect())
                .collect();
            assert_eq!(
                sys.gamma(0, &xs, &ys),
                sys.gamma_by_tensor(0, &xs, &ys).unwrap()
            );
        }
    }

    #[test]
    fn gamma_is_multilinear_in_each_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let sys = random_system(&mut rng, 1, 2, 3, 2, 2, 4, 3);
            let mut tuple_x: Vec<Vec<i64>> = (0..2)
                .map(|_| (0..2).map(|_| rng.gen_range(-3..=3)).collect())
                .collect();
            let tuple_y: Vec<Vec<i64>> = (0..2)
                .map(|_| (0..3).map(|_| rng.gen_range(-3..=3)).collect())
                .collect();
            let slot = rng.gen_range(0..2);
            let u: Vec<i64> = (0..2).map(|_| rng.gen_range(-3..=3)).collect();
            let v: Vec<i64> = (0..2).map(|_| rng.gen_range(-3..=3)).collect();

            tuple_x[slot] = u.clone();
            let gu = sys.gamma(0, &tuple_x, &tuple_y);
            tuple_x[slot] = v.clone();
            let gv = sys.gamma(0, &tuple_x, &tuple_y);
            tuple_x[slot] = u.iter().zip(&v).map(|(a, b)| a + b).collect();
            let guv = sys.gamma(0, &tuple_x, &tuple_y);
            assert_eq!(guv, gu + gv);
        }
    }

    #[test]
    fn iterated_difference_of_cube() {
        // f(t) = t^3 along directions 1, 1, 1: sum_eps (-1)^|eps| f(|eps|)
        // = -f(0) ... = signed sum equals -(3! * 1 * 1 * 1) for odd degree.
        let f = |p: &[i64]| (p[0] as i128).pow(3);
        let dirs = vec![vec![1i64], vec![1], vec![1]];
        let d = iterated_difference(f, 1, &dirs);
        assert_eq!(d.abs(), 6);
        // Zero directions: the convention value is 0, not f(0).
        assert_eq!(iterated_difference(f, 1, &[]), 0);
    }

    #[test]
    fn difference_recovers_gamma_up_to_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..60 {
            let r = rng.gen_range(1..=2);
            let d1 = rng.gen_range(1..=2);
            let d2 = rng.gen_range(1..=2usize.min(4 - d1));
            let n1 = rng.gen_range(1..=3);
            let n2 = rng.gen_range(1..=3);
            let sys = random_system(&mut rng, r, n1, n2, d1, d2, 4, 3);
            let alpha: Vec<i64> = (0..r).map(|_| rng.gen_range(-3..=3)).collect();
            let xs: Vec<Vec<i64>> = (0..d1)
                .map(|_| (0..n1).map(|_| rng.gen_range(-3..=3)).collect())
                .collect();
            let ys: Vec<Vec<i64>> = (0..d2)
                .map(|_| (0..n2).map(|_| rng.gen_range(-3..=3)).collect())
                .collect();
            let diff = sys.bihom_difference(&alpha, &xs, &ys);
            let gamma: i128 = (0..r)
                .map(|i| alpha[i] as i128 * sys.gamma(i, &xs, &ys))
                .sum();
            assert_eq!(diff.abs(), gamma.abs());
            let sign = if (d1 + d2) % 2 == 0 { 1 } else { -1 };
            assert_eq!(diff, sign * gamma);
        }
    }

    #[test]
    fn jacobian_rank_on_known_loci() {
        let sys = dot3();
        // Along x the Jacobian row is y; rank 0 exactly on y = 0.
        let zero = vec![rat(0), rat(0), rat(0)];
        let point = vec![rat(2), rat(-1), rat(5)];
        assert_eq!(sys.jacobian_rank(&point, &zero, Axis::X), 0);
        let y = vec![rat(1), rat(0), rat(0)];
        assert_eq!(sys.jacobian_rank(&point, &y, Axis::X), 1);

        // Squares system: rank deficiency along y means x1^2 = x2^2 = 0.
        let sq = squares2();
        let origin = vec![rat(0), rat(0)];
        let x = vec![rat(3), rat(0)];
        assert_eq!(sq.jacobian_rank(&origin, &origin, Axis::Y), 0);
        assert_eq!(sq.jacobian_rank(&x, &origin, Axis::Y), 1);
    }

    #[test]
    fn rank_at_x_zero_vanishes_when_d2_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let sys = random_system(&mut rng, 2, 2, 2, 1, 2, 5, 3);
            let x0 = vec![rat(0), rat(0)];
            let y: Vec<BigRational> = (0..2).map(|_| rat(rng.gen_range(-3..=3))).collect();
            // Every monomial has x-degree >= 1, so F and its y-gradient vanish
            // identically at x = 0.
            assert_eq!(sys.jacobian_rank(&x0, &y, Axis::Y), 0);
        }
    }

    #[test]
    fn linear_matrices_reproduce_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..30 {
            let sys = random_system(&mut rng, 2, 3, 3, 2, 1, 5, 4);
            let x: Vec<i64> = (0..3).map(|_| rng.gen_range(-5..=5)).collect();
            let y: Vec<i64> = (0..3).map(|_| rng.gen_range(-5..=5)).collect();
            let l = sys.y_linear_matrix(&x).unwrap();
            for i in 0..2 {
                let via: i128 = (0..3).map(|m| l[i][m] * y[m] as i128).sum();
                assert_eq!(via, sys.eval_scaled(i, &x, &y));
            }
            assert!(sys.x_linear_matrix(&y).is_none());
        }
    }

    #[test]
    fn denominators_clear_per_form() {
        let sys = FormSystem::new(
            1,
            1,
            1,
            1,
            1,
            vec![MonomialSpec {
                form: 0,
                coeff: BigRational::new(BigInt::from(1), BigInt::from(2)),
                xexp: vec![1],
                yexp: vec![1],
            }],
        )
        .unwrap();
        assert_eq!(sys.clear_factor(0), &BigInt::from(2));
        // Scaled value is integral, original evaluation keeps the half.
        assert_eq!(sys.eval_scaled(0, &[1], &[1]), 1);
        assert_eq!(
            sys.eval_form_int(0, &[1], &[1]),
            BigRational::new(BigInt::from(1), BigInt::from(2))
        );
    }

    #[test]
    fn duplicate_monomials_combine_and_cancel() {
        let spec = |c: i64| MonomialSpec {
            form: 0,
            coeff: rat(c),
            xexp: vec![1, 0],
            yexp: vec![1, 0],
        };
        let sys = FormSystem::new(1, 2, 2, 1, 1, vec![spec(2), spec(3)]).unwrap();
        assert_eq!(sys.eval_scaled(0, &[1, 0], &[1, 0]), 5);
        let cancel = FormSystem::new(1, 2, 2, 1, 1, vec![spec(2), spec(-2)]).unwrap();
        assert_eq!(cancel.eval_scaled(0, &[1, 0], &[1, 0]), 0);
    }

    #[test]
    fn eval_mod_matches_exact_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let sys = random_system(&mut rng, 2, 3, 2, 2, 2, 9, 4);
            let q = [2i64, 3, 4, 5, 8, 9, 25][rng.gen_range(0..7)];
            let x: Vec<i64> = (0..3).map(|_| rng.gen_range(-20..=20)).collect();
            let y: Vec<i64> = (0..2).map(|_| rng.gen_range(-20..=20)).collect();
            for i in 0..2 {
                let exact = sys.eval_scaled(i, &x, &y);
                let reduced = sys.eval_mod(i, &x, &y, q);
                assert_eq!(reduced as i128, exact.rem_euclid(q as i128));
            }
        }
    }
}
