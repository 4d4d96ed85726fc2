//! Exponential sums over box points, complete sums over residue classes, and
//! the near-solution counters feeding the Weyl dichotomy.
//!
//! Phases are never accumulated as raw products `alpha * F`: each alpha
//! coordinate is embedded as an exact rational, the dot product with the
//! integer form values is reduced mod 1 in integer arithmetic, and only the
//! final fractional part is converted to a double. This keeps `S(alpha)`
//! accurate even when individual form values dwarf the phase.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::arcs::{locate_arc, ArcVariant, CircleParams, RationalCenter};
use crate::counting::{for_each_point, range_count, BoxPair};
use crate::exact::rational_from_f64;
use crate::forms::{unit_vec, Axis, FormSystem};
use crate::{Error, Result};

const COMPLETE_SUM_BUDGET: u128 = 1_000_000_000;
const NEAR_SOLUTION_BUDGET: u128 = 200_000_000;
/// Distance from a strict threshold below which a near-solution count is
/// considered a floating-point tie.
const AMBIGUITY_BAND: f64 = 1e-12;

fn e(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t)
}

/// Pairwise (binary tree) complex summation in fixed input order.
pub(crate) fn tree_sum(vals: &[Complex64]) -> Complex64 {
    match vals.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => vals[0],
        n => tree_sum(&vals[..n / 2]) + tree_sum(&vals[n / 2..]),
    }
}

/// Exact evaluator of `alpha . v mod 1` for integer vectors `v`, with alpha
/// pre-divided by the per-form clearing factors so `v` may hold cleared form
/// values.
struct PhaseTable {
    nums: Vec<BigInt>,
    den: BigInt,
}

impl PhaseTable {
    fn new(sys: &FormSystem, alpha: &[f64]) -> Result<Self> {
        if alpha.len() != sys.r() {
            return Err(Error::Invalid(format!(
                "alpha has {} coordinates, system has R = {}",
                alpha.len(),
                sys.r()
            )));
        }
        let rats: Vec<BigRational> = alpha
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                rational_from_f64(a)
                    .map(|r| r / BigRational::from_integer(sys.clear_factor(i).clone()))
            })
            .collect::<Result<_>>()?;
        let den = rats
            .iter()
            .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let nums = rats
            .iter()
            .map(|r| r.numer() * (&den / r.denom()))
            .collect();
        Ok(PhaseTable { nums, den })
    }

    /// Fractional part of `alpha . v` in [0, 1).
    fn phase(&self, vals: &[i128]) -> f64 {
        let mut s = BigInt::zero();
        for (n, &v) in self.nums.iter().zip(vals) {
            s += n * BigInt::from(v);
        }
        let s = s.mod_floor(&self.den);
        BigRational::new(s, self.den.clone()).to_f64().unwrap_or(0.0)
    }
}

/// S(alpha) = sum over box points of e(alpha . F(x; y)). Auto-selects the
/// factorized path when one variable group is linear.
pub fn weyl_sum(sys: &FormSystem, bp: &BoxPair, alpha: &[f64]) -> Result<Complex64> {
    if sys.d2() == 1 {
        weyl_sum_factored(sys, bp, alpha)
    } else {
        weyl_sum_direct(sys, bp, alpha)
    }
}

/// Plain double enumeration; reference implementation for the factored path.
pub fn weyl_sum_direct(sys: &FormSystem, bp: &BoxPair, alpha: &[f64]) -> Result<Complex64> {
    check_box_dims(sys, bp)?;
    let table = PhaseTable::new(sys, alpha)?;
    let xr = bp.x_ranges()?;
    let yr = bp.y_ranges()?;
    if range_count(&xr) == 0 || range_count(&yr) == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (a, b) = xr[0];
    let slabs: Vec<Complex64> = (a..=b)
        .into_par_iter()
        .map(|v| {
            let mut pinned = xr.to_vec();
            pinned[0] = (v, v);
            let mut per_x = Vec::new();
            for_each_point(&pinned, &mut |x| {
                let mut acc = Complex64::new(0.0, 0.0);
                for_each_point(&yr, &mut |y| {
                    let vals: Vec<i128> =
                        (0..sys.r()).map(|i| sys.eval_scaled(i, x, y)).collect();
                    acc += e(table.phase(&vals));
                });
                per_x.push(acc);
            });
            tree_sum(&per_x)
        })
        .collect();
    Ok(tree_sum(&slabs))
}

/// d2 = 1 path: the inner y-sum factorizes into per-coordinate geometric
/// sums with frequencies c_m = alpha . L_m(x), each reduced mod 1 exactly.
fn weyl_sum_factored(sys: &FormSystem, bp: &BoxPair, alpha: &[f64]) -> Result<Complex64> {
    check_box_dims(sys, bp)?;
    let table = PhaseTable::new(sys, alpha)?;
    let xr = bp.x_ranges()?;
    let yr = bp.y_ranges()?;
    if range_count(&xr) == 0 || range_count(&yr) == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (a, b) = xr[0];
    let slabs: Vec<Complex64> = (a..=b)
        .into_par_iter()
        .map(|v| {
            let mut pinned = xr.to_vec();
            pinned[0] = (v, v);
            let mut per_x = Vec::new();
            for_each_point(&pinned, &mut |x| {
                let rows = sys.y_linear_matrix(x).unwrap();
                let mut prod = Complex64::new(1.0, 0.0);
                for (m, &(ylo, yhi)) in yr.iter().enumerate() {
                    let col: Vec<i128> = rows.iter().map(|row| row[m]).collect();
                    let c = table.phase(&col);
                    prod *= geometric_phase_sum(c, ylo, yhi);
                    if prod.norm_sqr() == 0.0 {
                        break;
                    }
                }
                per_x.push(prod);
            });
            tree_sum(&per_x)
        })
        .collect();
    Ok(tree_sum(&slabs))
}

/// Sum of e(c t) over integers t in [lo, hi], c in [0, 1).
fn geometric_phase_sum(c: f64, lo: i64, hi: i64) -> Complex64 {
    if hi < lo {
        return Complex64::new(0.0, 0.0);
    }
    let n = (hi - lo + 1) as f64;
    let dist = c.min(1.0 - c);
    if dist < 1e-9 {
        // Near-degenerate kernel; the closed form divides by sin(pi c).
        let mut acc = Complex64::new(0.0, 0.0);
        for t in lo..=hi {
            acc += e(c * t as f64);
        }
        return acc;
    }
    let s = (std::f64::consts::PI * c).sin();
    let sn = (std::f64::consts::PI * c * n).sin();
    let mid = c * (lo + hi) as f64 / 2.0;
    e(mid) * (sn / s)
}

fn check_box_dims(sys: &FormSystem, bp: &BoxPair) -> Result<()> {
    if bp.b1().len() != sys.n1() || bp.b2().len() != sys.n2() {
        return Err(Error::Invalid(format!(
            "box dimensions ({}, {}) do not match system ({}, {})",
            bp.b1().len(),
            bp.b2().len(),
            sys.n1(),
            sys.n2()
        )));
    }
    Ok(())
}

/// Complete sum S_{a,q} plus the exact residue histogram of `a . F mod q`.
#[derive(Debug, Clone)]
pub struct CompleteSum {
    pub q: i64,
    pub value: Complex64,
    /// histogram[m] = #{(x, y) mod q : a . F(x; y) = m (mod q)}.
    pub histogram: Vec<u64>,
}

impl CompleteSum {
    /// Total histogram mass, q^(n1+n2).
    pub fn mass(&self) -> u128 {
        self.histogram.iter().map(|&c| c as u128).sum()
    }
}

pub fn complete_sum(sys: &FormSystem, a: &[i64], q: i64) -> Result<CompleteSum> {
    complete_sum_with_budget(sys, a, q, COMPLETE_SUM_BUDGET)
}

pub fn complete_sum_with_budget(
    sys: &FormSystem,
    a: &[i64],
    q: i64,
    budget: u128,
) -> Result<CompleteSum> {
    let histogram = residue_histogram(sys, a, q, budget)?;
    let value = histogram_value(&histogram, q);
    Ok(CompleteSum {
        q,
        value,
        histogram,
    })
}

/// Evaluates sum_m histogram[m] e(m/q) in fixed order.
pub fn histogram_value(histogram: &[u64], q: i64) -> Complex64 {
    let terms: Vec<Complex64> = histogram
        .iter()
        .enumerate()
        .map(|(m, &c)| e(m as f64 / q as f64) * c as f64)
        .collect();
    tree_sum(&terms)
}

/// Exact histogram of `a . F` over all residue pairs mod q. The fast path
/// (one linear group) counts kernel fibers per residue class instead of
/// enumerating y; the budget measures the work of the chosen path.
pub fn residue_histogram(sys: &FormSystem, a: &[i64], q: i64, budget: u128) -> Result<Vec<u64>> {
    if q < 1 {
        return Err(Error::Invalid(format!("modulus q = {q} must be positive")));
    }
    if a.len() != sys.r() {
        return Err(Error::Invalid(format!(
            "coefficient vector has {} entries, system has R = {}",
            a.len(),
            sys.r()
        )));
    }
    if a.iter().any(|&ai| ai < 0 || ai >= q) {
        return Err(Error::Invalid("need 0 <= a_i < q".into()));
    }
    if (0..sys.r()).any(|i| !sys.clear_factor(i).is_one()) {
        return Err(Error::Invalid(
            "complete sums need integer form coefficients".into(),
        ));
    }
    let qu = q as u128;
    let n1 = sys.n1() as u32;
    let n2 = sys.n2() as u32;
    if sys.d2() == 1 {
        let work = qu.pow(n1).saturating_mul(sys.n2() as u128 + qu);
        if work > budget {
            return Err(Error::Budget(format!(
                "residue histogram needs about {work} operations, budget is {budget}"
            )));
        }
        return Ok(kernel_histogram(sys, a, q, Axis::Y));
    }
    if sys.d1() == 1 {
        let work = qu.pow(n2).saturating_mul(sys.n1() as u128 + qu);
        if work > budget {
            return Err(Error::Budget(format!(
                "residue histogram needs about {work} operations, budget is {budget}"
            )));
        }
        return Ok(kernel_histogram(sys, a, q, Axis::X));
    }
    let work = qu.pow(n1 + n2);
    if work > budget {
        return Err(Error::Budget(format!(
            "residue histogram needs {work} residue pairs, budget is {budget}"
        )));
    }
    let xr = vec![(0i64, q - 1); sys.n1()];
    let yr = vec![(0i64, q - 1); sys.n2()];
    let slabs: Vec<Vec<u64>> = (0..q)
        .into_par_iter()
        .map(|v| {
            let mut pinned = xr.clone();
            pinned[0] = (v, v);
            let mut hist = vec![0u64; q as usize];
            for_each_point(&pinned, &mut |x| {
                for_each_point(&yr, &mut |y| {
                    let mut m = 0i64;
                    for i in 0..sys.r() {
                        m = (m + a[i] % q * sys.eval_mod(i, x, y, q)) % q;
                    }
                    hist[m.rem_euclid(q) as usize] += 1;
                });
            });
            hist
        })
        .collect();
    let mut hist = vec![0u64; q as usize];
    for slab in slabs {
        for (h, s) in hist.iter_mut().zip(slab) {
            *h += s;
        }
    }
    Ok(hist)
}

/// Histogram via the linear-group kernel: for each point of the nonlinear
/// group the combined row c = sum_i a_i L^{(i)} takes each multiple of
/// g = gcd(c, q) exactly q^(n-1) g times over the linear group.
fn kernel_histogram(sys: &FormSystem, a: &[i64], q: i64, linear: Axis) -> Vec<u64> {
    let (outer_n, inner_n) = match linear {
        Axis::Y => (sys.n1(), sys.n2()),
        Axis::X => (sys.n2(), sys.n1()),
    };
    let ranges = vec![(0i64, q - 1); outer_n];
    let fiber = (q as u128).pow(inner_n as u32 - 1);
    let slabs: Vec<Vec<u64>> = (0..q)
        .into_par_iter()
        .map(|v| {
            let mut pinned = ranges.clone();
            pinned[0] = (v, v);
            let mut hist = vec![0u64; q as usize];
            for_each_point(&pinned, &mut |z| {
                let rows = match linear {
                    Axis::Y => sys.y_linear_matrix(z).unwrap(),
                    Axis::X => sys.x_linear_matrix(z).unwrap(),
                };
                let mut g = q;
                let mut combined = vec![0i64; inner_n];
                for (m, slot) in combined.iter_mut().enumerate() {
                    let mut c = 0i128;
                    for (i, row) in rows.iter().enumerate() {
                        c += a[i] as i128 * row[m];
                    }
                    *slot = c.rem_euclid(q as i128) as i64;
                    g = num_integer::gcd(g, *slot);
                }
                let add = (fiber * g as u128) as u64;
                let mut m = 0i64;
                while m < q {
                    hist[m as usize] += add;
                    m += g;
                }
            });
            hist
        })
        .collect();
    let mut hist = vec![0u64; q as usize];
    for slab in slabs {
        for (h, s) in hist.iter_mut().zip(slab) {
            *h += s;
        }
    }
    hist
}

/// M1 (axis X) and M2 (axis Y): tuples of the open boxes (-P1, P1), (-P2, P2)
/// where the multilinear form with a unit vector in the distinguished slot is
/// within 1/bound of an integer, simultaneously for every unit vector.
pub fn count_near_solutions(
    sys: &FormSystem,
    alpha: &[f64],
    p1: f64,
    p2: f64,
    bound: f64,
    axis: Axis,
) -> Result<u128> {
    if alpha.len() != sys.r() {
        return Err(Error::Invalid(format!(
            "alpha has {} coordinates, system has R = {}",
            alpha.len(),
            sys.r()
        )));
    }
    if !(bound > 0.0) || !(p1 >= 1.0) || !(p2 >= 1.0) {
        return Err(Error::Invalid(
            "need bound > 0 and P1, P2 >= 1 in near-solution counting".into(),
        ));
    }
    let xmax = p1.ceil() as i64 - 1;
    let ymax = p2.ceil() as i64 - 1;
    let (x_slots, y_slots) = match axis {
        Axis::X => (sys.d1() - 1, sys.d2()),
        Axis::Y => (sys.d1(), sys.d2() - 1),
    };
    let unit_slots = match axis {
        Axis::X => sys.n1(),
        Axis::Y => sys.n2(),
    };
    let dims = x_slots * sys.n1() + y_slots * sys.n2();
    let mut ranges = Vec::with_capacity(dims);
    for _ in 0..x_slots * sys.n1() {
        ranges.push((-xmax, xmax));
    }
    for _ in 0..y_slots * sys.n2() {
        ranges.push((-ymax, ymax));
    }
    if range_count(&ranges) > NEAR_SOLUTION_BUDGET {
        return Err(Error::Budget(format!(
            "near-solution tuple space has {} points, budget is {NEAR_SOLUTION_BUDGET}",
            range_count(&ranges)
        )));
    }
    let threshold = 1.0 / bound;
    let mut count = 0u128;
    let mut ambiguous = false;
    let mut body = |flat: &[i64]| {
        if ambiguous {
            return;
        }
        let mut xs: Vec<Vec<i64>> = Vec::with_capacity(sys.d1());
        let mut ys: Vec<Vec<i64>> = Vec::with_capacity(sys.d2());
        let mut off = 0;
        for _ in 0..x_slots {
            xs.push(flat[off..off + sys.n1()].to_vec());
            off += sys.n1();
        }
        for _ in 0..y_slots {
            ys.push(flat[off..off + sys.n2()].to_vec());
            off += sys.n2();
        }
        let mut all_near = true;
        for l in 0..unit_slots {
            let (gx, gy);
            match axis {
                Axis::X => {
                    let mut full = vec![unit_vec(sys.n1(), l)];
                    full.extend(xs.iter().cloned());
                    gx = full;
                    gy = ys.clone();
                }
                Axis::Y => {
                    gx = xs.clone();
                    let mut full = ys.clone();
                    full.push(unit_vec(sys.n2(), l));
                    gy = full;
                }
            }
            let t = sys.multilinear_eval(alpha, &gx, &gy);
            let dist = (t - t.round()).abs();
            if (dist - threshold).abs() < AMBIGUITY_BAND {
                ambiguous = true;
                return;
            }
            if dist >= threshold {
                all_near = false;
                break;
            }
        }
        if all_near {
            count += 1;
        }
    };
    if dims == 0 {
        body(&[]);
    } else {
        for_each_point(&ranges, &mut body);
    }
    if ambiguous {
        return Err(Error::Ambiguous(format!(
            "a tested value sits within {AMBIGUITY_BAND} of the threshold {threshold}; perturb alpha or the bound"
        )));
    }
    Ok(count)
}

/// Everything the dichotomy statements talk about, for one alpha: the
/// normalized sum size, both near-solution counts with their trivial
/// maxima, and arc membership in the locating family.
#[derive(Debug, Clone)]
pub struct DichotomyProbe {
    pub s_abs: f64,
    pub pairs: u128,
    /// |S(alpha)| / S(0).
    pub s_ratio: f64,
    pub m1: u128,
    pub m2: u128,
    /// Tuple-space sizes, the alpha = 0 values of m1/m2.
    pub m1_max: u128,
    pub m2_max: u128,
    pub arc: Option<RationalCenter>,
    pub on_major_arc: bool,
}

pub fn probe_weyl_dichotomy(
    sys: &FormSystem,
    alpha: &[f64],
    bp: &BoxPair,
    params: &CircleParams,
) -> Result<DichotomyProbe> {
    let s = weyl_sum(sys, bp, alpha)?;
    let pairs = bp.pair_count()?;
    let p1 = bp.p1();
    let p2 = bp.p2();
    let p = p1.powi(sys.d1() as i32) * p2.powi(sys.d2() as i32);
    let m1 = count_near_solutions(sys, alpha, p1, p2, p1, Axis::X)?;
    let m2 = count_near_solutions(sys, alpha, p1, p2, p, Axis::Y)?;
    let zeros = vec![0.0; sys.r()];
    let m1_max = count_near_solutions(sys, &zeros, p1, p2, p1, Axis::X)?;
    let m2_max = count_near_solutions(sys, &zeros, p1, p2, p, Axis::Y)?;
    let arc = locate_arc(alpha, params, params.theta0, ArcVariant::Plain)?;
    Ok(DichotomyProbe {
        s_abs: s.norm(),
        pairs,
        s_ratio: s.norm() / pairs as f64,
        m1,
        m2,
        m1_max,
        m2_max,
        on_major_arc: arc.is_some(),
        arc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::IntervalKind;
    use crate::forms::samples::{dot3, squares2};
    use crate::forms::random_system;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn closed_box(n1: usize, n2: usize, p: f64) -> BoxPair {
        BoxPair::centered(n1, n2, p, p, IntervalKind::Closed).unwrap()
    }

    #[test]
    fn sum_at_zero_counts_pairs() {
        let sys = dot3();
        let bp = closed_box(3, 3, 2.0);
        let s = weyl_sum(&sys, &bp, &[0.0]).unwrap();
        assert_eq!(s.re, 729.0);
        assert_eq!(s.im, 0.0);
        let direct = weyl_sum_direct(&sys, &bp, &[0.0]).unwrap();
        assert_eq!(direct.re, 729.0);
    }

    #[test]
    fn conjugation_symmetry() {
        let sys = dot3();
        let bp = closed_box(3, 3, 3.0);
        for alpha in [0.137, 0.5901, 0.93] {
            let plus = weyl_sum(&sys, &bp, &[alpha]).unwrap();
            let minus = weyl_sum(&sys, &bp, &[-alpha]).unwrap();
            assert!((plus.re - minus.re).abs() < 1e-9);
            assert!((plus.im + minus.im).abs() < 1e-9);
        }
    }

    #[test]
    fn periodicity_is_exact_for_dyadic_alpha() {
        let sys = dot3();
        let bp = closed_box(3, 3, 2.0);
        // 0.3125 + 1 is exactly representable, so the phase tables coincide.
        let s = weyl_sum(&sys, &bp, &[0.3125]).unwrap();
        let shifted = weyl_sum(&sys, &bp, &[1.3125]).unwrap();
        assert_eq!(s, shifted);
    }

    #[test]
    fn factored_path_matches_direct_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..25 {
            let r = rng.gen_range(1..=2);
            let n1 = rng.gen_range(1..=3);
            let n2 = rng.gen_range(1..=3);
            let d1 = rng.gen_range(1..=2);
            let sys = random_system(&mut rng, r, n1, n2, d1, 1, 3, 3);
            let bp = closed_box(n1, n2, rng.gen_range(2..=3) as f64);
            let alpha: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fast = weyl_sum(&sys, &bp, &alpha).unwrap();
            let slow = weyl_sum_direct(&sys, &bp, &alpha).unwrap();
            let pairs = bp.pair_count().unwrap() as f64;
            assert!(
                (fast - slow).norm() <= 1e-9 * pairs.max(1.0),
                "fast {fast} vs direct {slow}"
            );
        }
    }

    #[test]
    fn modulus_bounded_by_pair_count() {
        let sys = squares2();
        let bp = closed_box(2, 2, 3.0);
        let pairs = bp.pair_count().unwrap() as f64;
        for alpha in [0.21, 0.444, 0.875, 0.618] {
            let s = weyl_sum(&sys, &bp, &[alpha]).unwrap();
            assert!(s.norm() <= pairs + 1e-9);
        }
    }

    #[test]
    fn complete_sum_unit_modulus() {
        let sys = dot3();
        let cs = complete_sum(&sys, &[0], 1).unwrap();
        assert_eq!(cs.histogram, vec![1]);
        assert!((cs.value.re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complete_sum_dot3_mod_two() {
        // 36 zero residues (the mod-2 solution count), 28 ones: S = 8.
        let sys = dot3();
        let cs = complete_sum(&sys, &[1], 2).unwrap();
        assert_eq!(cs.histogram, vec![36, 28]);
        assert_eq!(cs.mass(), 64);
        assert!((cs.value.re - 8.0).abs() < 1e-9);
        assert!(cs.value.im.abs() < 1e-12);
    }

    #[test]
    fn complete_sum_squares_mod_two() {
        let sys = squares2();
        let cs = complete_sum(&sys, &[1], 2).unwrap();
        assert_eq!(cs.mass(), 16);
        assert_eq!(cs.histogram, vec![10, 6]);
        assert!(cs.value.im.abs() < 1e-12);
        assert!((cs.value.re - 4.0).abs() < 1e-9);
    }

    #[test]
    fn kernel_histogram_matches_generic_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..20 {
            let r = rng.gen_range(1..=2);
            let n1 = rng.gen_range(1..=2);
            let n2 = rng.gen_range(1..=3);
            let d1 = rng.gen_range(1..=2);
            let sys = random_system(&mut rng, r, n1, n2, d1, 1, 4, 3);
            let q = [2i64, 3, 4, 5, 6][rng.gen_range(0..5)];
            let a: Vec<i64> = (0..r).map(|_| rng.gen_range(0..q)).collect();
            let fast = residue_histogram(&sys, &a, q, COMPLETE_SUM_BUDGET).unwrap();
            // Independent direct enumeration.
            let mut slow = vec![0u64; q as usize];
            let ranges = vec![(0i64, q - 1); n1 + n2];
            for_each_point(&ranges, &mut |z| {
                let (x, y) = z.split_at(n1);
                let mut m = 0i64;
                for i in 0..r {
                    m = (m + a[i] * sys.eval_mod(i, x, y, q)) % q;
                }
                slow[m.rem_euclid(q) as usize] += 1;
            });
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn weyl_sum_over_full_period_equals_complete_sum() {
        let sys = dot3();
        for q in [2i64, 4, 8] {
            let bp = BoxPair::unit(3, 3, q as f64, q as f64, IntervalKind::HalfOpen).unwrap();
            let a = 1i64;
            let s = weyl_sum(&sys, &bp, &[a as f64 / q as f64]).unwrap();
            let cs = complete_sum(&sys, &[a], q).unwrap();
            assert!(
                (s - cs.value).norm() <= 1e-9 * cs.mass() as f64,
                "q = {q}: {s} vs {}",
                cs.value
            );
        }
    }

    #[test]
    fn crt_multiplicativity() {
        // 1/6 = 1/2 + 2/3 - 1, so S_{a,6} = S_{a mod 2, 2} * S_{2a mod 3, 3}.
        let sys = dot3();
        for a in 1i64..6 {
            if num_integer::gcd(a, 6) != 1 {
                continue;
            }
            let s6 = complete_sum(&sys, &[a], 6).unwrap().value;
            let s2 = complete_sum(&sys, &[a % 2], 2).unwrap().value;
            let s3 = complete_sum(&sys, &[2 * a % 3], 3).unwrap().value;
            assert!(
                (s6 - s2 * s3).norm() <= 1e-9 * (s6.norm() + 1.0),
                "a = {a}"
            );
        }
    }

    #[test]
    fn budget_guard_trips() {
        let sys = dot3();
        let err = complete_sum_with_budget(&sys, &[1], 7, 10).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
    }

    #[test]
    fn near_solutions_hand_oracle() {
        // alpha = 1/2, P1 = 4, P2 = 2: need |y_l / 2| within 1/4 of an
        // integer for every l, so y = 0 is the only tuple.
        let sys = dot3();
        let m1 = count_near_solutions(&sys, &[0.5], 4.0, 2.0, 4.0, Axis::X).unwrap();
        assert_eq!(m1, 1);
    }

    #[test]
    fn near_solutions_at_zero_fill_the_box() {
        let sys = dot3();
        // d1 = 1: no free x slots; (2 P2 - 1)^(d2 n2) tuples.
        let m1 = count_near_solutions(&sys, &[0.0], 3.0, 3.0, 3.0, Axis::X).unwrap();
        assert_eq!(m1, 125);
        let sq = squares2();
        // d1 = 2, d2 = 1: two x slots and no y slot on axis Y.
        let m2 = count_near_solutions(&sq, &[0.0], 2.0, 3.0, 6.0, Axis::Y).unwrap();
        assert_eq!(m2, 81);
        let m1 = count_near_solutions(&sq, &[0.0], 2.0, 3.0, 2.0, Axis::X).unwrap();
        assert_eq!(m1, 3u128.pow(2) * 5u128.pow(2));
    }

    #[test]
    fn threshold_tie_is_ambiguous() {
        let sys = dot3();
        // Distance |1/4| equals the threshold 1/4 exactly on y = e_1 tuples.
        let err = count_near_solutions(&sys, &[0.25], 4.0, 2.0, 4.0, Axis::X).unwrap_err();
        assert!(matches!(err, Error::Ambiguous(_)));
    }

    #[test]
    fn axis_roles_mirror_for_symmetric_system() {
        // dot3 is symmetric under swapping x and y, and P1 = P2 makes the
        // two counters coincide when given the same threshold.
        let sys = dot3();
        let m1 = count_near_solutions(&sys, &[0.3], 3.0, 3.0, 9.0, Axis::X).unwrap();
        let m2 = count_near_solutions(&sys, &[0.3], 3.0, 3.0, 9.0, Axis::Y).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn probe_at_zero_is_maximal() {
        let sys = dot3();
        let bp = closed_box(3, 3, 4.0);
        let params = CircleParams::new(1, 1, 1, 1.0, 3.0, 0.05, 0.02, 16.0).unwrap();
        let probe = probe_weyl_dichotomy(&sys, &[0.0], &bp, &params).unwrap();
        assert_eq!(probe.s_ratio, 1.0);
        assert_eq!(probe.m1, probe.m1_max);
        assert_eq!(probe.m2, probe.m2_max);
        assert!(probe.on_major_arc);
        assert_eq!(probe.arc.unwrap().q, 1);
    }

    #[test]
    fn probe_golden_ratio_decays_with_p() {
        let sys = dot3();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let mut prev = f64::INFINITY;
        for p in [8.0, 16.0, 32.0] {
            let bp = closed_box(3, 3, p);
            let params =
                CircleParams::new(1, 1, 1, 1.0, 3.0, 0.05, 0.02, p * p).unwrap();
            let probe = probe_weyl_dichotomy(&sys, &[golden], &bp, &params).unwrap();
            assert!(
                probe.s_ratio < prev,
                "ratio {} did not drop at P = {p}",
                probe.s_ratio
            );
            assert!(!probe.on_major_arc);
            prev = probe.s_ratio;
        }
    }

    #[test]
    fn probe_sees_major_arc_center() {
        let sys = dot3();
        let bp = closed_box(3, 3, 4.0);
        // Wide enough locating family to contain q = 2: 16^0.3 > 2.
        let params = CircleParams::new_unchecked(1, 1, 1, 1.0, 3.0, 0.3, 0.02, 16.0);
        let probe = probe_weyl_dichotomy(&sys, &[0.5], &bp, &params).unwrap();
        assert!(probe.on_major_arc);
        assert_eq!(probe.arc.unwrap(), RationalCenter { q: 2, a: vec![1] });
    }
}
