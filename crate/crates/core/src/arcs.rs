//! Circle-method parameter selection and major-arc bookkeeping.
//!
//! A parameter set bundles the box exponents, the codimension budget `K`, and
//! the two small exponents `theta0`, `delta` subject to four feasibility
//! conditions. Arc families come in two shapes: the locating shape used by the
//! rational-approximation dichotomy (`Plain`) and the wider pruned shape used
//! on the major arcs themselves (`Prime`). Membership is decided by scanning
//! denominators, disjointness and measure by exact rational interval
//! arithmetic with the arc half-width pinned to its double-precision value.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::rational_from_f64;
use crate::{Error, Result};

/// Analytic parameters for one experiment geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircleParams {
    pub r: usize,
    pub d1: usize,
    pub d2: usize,
    /// Box asymmetry exponent log P1 / log P2.
    pub b: f64,
    /// Codimension budget: 2^dtilde * K = min codim of the two singular loci.
    pub k: f64,
    pub theta0: f64,
    pub delta: f64,
    /// P = P1^d1 * P2^d2.
    pub p: f64,
}

/// One feasibility condition with the two sides evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl CircleParams {
    pub fn new(
        r: usize,
        d1: usize,
        d2: usize,
        b: f64,
        k: f64,
        theta0: f64,
        delta: f64,
        p: f64,
    ) -> Result<Self> {
        let params = Self::new_unchecked(r, d1, d2, b, k, theta0, delta, p);
        if r == 0 || d1 == 0 || d2 == 0 {
            return Err(Error::Invalid("need r, d1, d2 >= 1".into()));
        }
        if !(b >= 1.0) {
            return Err(Error::Invalid(format!("asymmetry exponent b = {b} < 1")));
        }
        if !(theta0 > 0.0 && delta > 0.0) {
            return Err(Error::Invalid("theta0 and delta must be positive".into()));
        }
        if !(p > 1.0) {
            return Err(Error::Invalid(format!("need P > 1, got {p}")));
        }
        if let Some(c) = params.conditions().iter().find(|c| !c.holds) {
            return Err(Error::Infeasible(format!(
                "{}: {} vs {}",
                c.name, c.lhs, c.rhs
            )));
        }
        Ok(params)
    }

    /// Builds without validating the feasibility conditions; used by probes
    /// and by tests that deliberately explore infeasible corners.
    pub fn new_unchecked(
        r: usize,
        d1: usize,
        d2: usize,
        b: f64,
        k: f64,
        theta0: f64,
        delta: f64,
        p: f64,
    ) -> Self {
        CircleParams {
            r,
            d1,
            d2,
            b,
            k,
            theta0,
            delta,
            p,
        }
    }

    pub fn dtilde(&self) -> usize {
        self.d1 + self.d2 - 2
    }

    /// eta = R (dtilde + 1) theta0, the exponent window of the major arcs.
    pub fn eta(&self) -> f64 {
        self.r as f64 * (self.dtilde() as f64 + 1.0) * self.theta0
    }

    /// bd1 + d2, the weighted degree entering the asymmetry conditions.
    pub fn weighted_degree(&self) -> f64 {
        self.b * self.d1 as f64 + self.d2 as f64
    }

    /// The four feasibility conditions with both sides evaluated.
    pub fn conditions(&self) -> Vec<ConditionCheck> {
        let r = self.r as f64;
        let dt1 = self.dtilde() as f64 + 1.0;
        let wd = self.weighted_degree();
        let checks = vec![
            ConditionCheck {
                name: "K above both dichotomy thresholds",
                lhs: self.k,
                rhs: (r * (r + 1.0) * dt1).max(r * wd),
                holds: self.k > (r * (r + 1.0) * dt1).max(r * wd),
            },
            ConditionCheck {
                name: "K margin dominates 2 delta / theta0",
                lhs: self.k - r * (r + 1.0) * dt1,
                rhs: 2.0 * self.delta / self.theta0,
                holds: self.k - r * (r + 1.0) * dt1 > 2.0 * self.delta / self.theta0,
            },
            ConditionCheck {
                name: "K above (2 delta + R) times weighted degree",
                lhs: self.k,
                rhs: (2.0 * self.delta + r) * wd,
                holds: self.k > (2.0 * self.delta + r) * wd,
            },
            ConditionCheck {
                name: "exponent budget below one",
                lhs: 1.0,
                rhs: wd * r * dt1 * self.theta0 * (2.0 * r + 3.0) + self.delta * wd,
                holds: 1.0 > wd * r * dt1 * self.theta0 * (2.0 * r + 3.0) + self.delta * wd,
            },
        ];
        checks
    }

    /// Largest admissible denominator at the given theta: floor(P^{R(dtilde+1)theta}).
    pub fn q_bound(&self, theta: f64) -> u64 {
        let e = self.r as f64 * (self.dtilde() as f64 + 1.0) * theta;
        let v = self.p.powf(e);
        // Tiny fudge so exact powers are not lost to rounding.
        (v + 1e-9).floor().max(1.0) as u64
    }

    /// Per-coordinate half-width of a `Prime` arc in alpha units: P^{-1+R(dtilde+1)theta}.
    pub fn arc_halfwidth(&self, theta: f64) -> f64 {
        let e = self.r as f64 * (self.dtilde() as f64 + 1.0) * theta;
        self.p.powf(-1.0 + e)
    }
}

/// Picks `(theta0, delta)` maximizing `delta` on a fixed logarithmic grid,
/// requiring 10% slack on every condition so the output sits strictly inside
/// the feasible region. Deterministic for fixed inputs.
pub fn choose_parameters(
    r: usize,
    d1: usize,
    d2: usize,
    b: f64,
    k: f64,
    p: f64,
) -> Result<CircleParams> {
    if r == 0 || d1 == 0 || d2 == 0 {
        return Err(Error::Invalid("need r, d1, d2 >= 1".into()));
    }
    if !(b >= 1.0) {
        return Err(Error::Invalid(format!("asymmetry exponent b = {b} < 1")));
    }
    let rf = r as f64;
    let dt1 = (d1 + d2 - 2) as f64 + 1.0;
    let wd = b * d1 as f64 + d2 as f64;
    let threshold = (rf * (rf + 1.0) * dt1).max(rf * wd);
    if !(k > threshold) {
        return Err(Error::Infeasible(format!(
            "codimension budget K = {k} must exceed max(R(R+1)(dtilde+1), R(b d1 + d2)) = {threshold}"
        )));
    }
    const SLACK: f64 = 1.1;
    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        let (llo, lhi) = (lo.ln(), hi.ln());
        (0..n)
            .map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp())
            .collect()
    };
    let thetas = grid(1e-4, 0.5, 80);
    let deltas = grid(1e-5, 0.5, 120);
    let mut best: Option<(f64, f64)> = None;
    for &theta0 in &thetas {
        for &delta in &deltas {
            let margin_ok = (k - rf * (rf + 1.0) * dt1) >= SLACK * (2.0 * delta / theta0);
            let asym_ok = k >= SLACK * (2.0 * delta + rf) * wd;
            let budget = wd * rf * dt1 * theta0 * (2.0 * rf + 3.0) + delta * wd;
            let budget_ok = budget <= 1.0 / SLACK;
            if margin_ok && asym_ok && budget_ok {
                let better = match best {
                    None => true,
                    Some((bt, bd)) => delta > bd || (delta == bd && theta0 > bt),
                };
                if better {
                    best = Some((theta0, delta));
                }
            }
        }
    }
    let Some((theta0, delta)) = best else {
        return Err(Error::Infeasible(
            "no (theta0, delta) grid point satisfies the slack-tightened conditions".into(),
        ));
    };
    CircleParams::new(r, d1, d2, b, k, theta0, delta, p)
}

/// Arc shape: `Plain` is the locating family (half as wide, q-independent
/// numerator bound), `Prime` the pruned major-arc family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArcVariant {
    Plain,
    Prime,
}

/// Center a/q of one arc; `a` reduced into [0, q) with gcd(q, a_1..a_R) = 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RationalCenter {
    pub q: u64,
    pub a: Vec<u64>,
}

impl RationalCenter {
    /// Offsets beta_i = alpha_i - (nearest integer to q alpha_i)/q.
    pub fn beta(&self, alpha: &[f64]) -> Vec<f64> {
        alpha
            .iter()
            .map(|&al| {
                let qa = self.q as f64 * al;
                (qa - qa.round()) / self.q as f64
            })
            .collect()
    }
}

fn gcd_all(q: u64, a: &[i64]) -> u64 {
    a.iter()
        .fold(q, |acc, &v| num_integer::gcd(acc, v.unsigned_abs()))
}

/// Scans q = 1..q_bound(theta) and returns the smallest q whose nearest
/// rational point a/q satisfies the variant's inequality for every
/// coordinate, with gcd(q, a) = 1. Absence is a value, not an error.
pub fn locate_arc(
    alpha: &[f64],
    params: &CircleParams,
    theta: f64,
    variant: ArcVariant,
) -> Result<Option<RationalCenter>> {
    if alpha.len() != params.r {
        return Err(Error::Invalid(format!(
            "alpha has {} coordinates, system has R = {}",
            alpha.len(),
            params.r
        )));
    }
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Invalid("alpha must be finite".into()));
    }
    let qmax = params.q_bound(theta);
    let width = params.arc_halfwidth(theta);
    for q in 1..=qmax {
        let rounded: Vec<i64> = alpha
            .iter()
            .map(|&al| (q as f64 * al).round() as i64)
            .collect();
        if gcd_all(q, &rounded) != 1 {
            continue;
        }
        let ok = alpha.iter().zip(&rounded).all(|(&al, &a)| {
            let err = (q as f64 * al - a as f64).abs();
            match variant {
                ArcVariant::Plain => 2.0 * err <= width,
                ArcVariant::Prime => err <= q as f64 * width,
            }
        });
        if ok {
            let a = rounded
                .iter()
                .map(|&v| v.rem_euclid(q as i64) as u64)
                .collect();
            return Ok(Some(RationalCenter { q, a }));
        }
    }
    Ok(None)
}

/// Jordan totient J_r(q) = #{a in [0,q)^r : gcd(q, a_1..a_r) = 1}.
pub fn jordan_totient(q: u64, r: u32) -> BigInt {
    let mut out = BigInt::one();
    let mut rem = q;
    let mut p = 2u64;
    while p * p <= rem {
        if rem % p == 0 {
            let mut e = 0u32;
            while rem % p == 0 {
                rem /= p;
                e += 1;
            }
            let pr = BigInt::from(p).pow(r);
            out *= BigInt::from(p).pow(r * (e - 1)) * (&pr - BigInt::one());
        }
        p += 1;
    }
    if rem > 1 {
        let pr = BigInt::from(rem).pow(r);
        out *= &pr - BigInt::one();
    }
    out
}

/// The full arc family at theta0: every admissible center with q <= q_bound.
fn arc_centers(params: &CircleParams) -> Result<Vec<RationalCenter>> {
    let qmax = params.q_bound(params.theta0);
    let mut total = BigInt::zero();
    for q in 1..=qmax {
        total += jordan_totient(q, params.r as u32);
    }
    let cap = BigInt::from(200_000u64);
    if total > cap {
        return Err(Error::Budget(format!(
            "arc family has {total} centers, pairwise checks capped at {cap}"
        )));
    }
    let mut centers = Vec::new();
    for q in 1..=qmax {
        let mut a = vec![0u64; params.r];
        loop {
            let signed: Vec<i64> = a.iter().map(|&v| v as i64).collect();
            if gcd_all(q, &signed) == 1 {
                centers.push(RationalCenter { q, a: a.clone() });
            }
            // Odometer over [0, q)^R.
            let mut i = params.r;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                a[i] += 1;
                if a[i] < q {
                    break;
                }
                a[i] = 0;
            }
            if a.iter().all(|&v| v == 0) {
                break;
            }
        }
    }
    Ok(centers)
}

#[derive(Debug, Clone, Serialize)]
pub struct DisjointnessReport {
    pub disjoint: bool,
    pub centers: usize,
    pub q_bound: u64,
    pub halfwidth: f64,
    /// First colliding pair when not disjoint.
    pub witness: Option<(RationalCenter, RationalCenter)>,
}

/// Exact pairwise disjointness of the `Prime` family at theta0. The arc
/// half-width is pinned to its double value and embedded exactly; centers are
/// exact rationals; overlap on the torus includes the wrap-around shift.
pub fn check_disjointness(params: &CircleParams) -> Result<DisjointnessReport> {
    let centers = arc_centers(params)?;
    let w = rational_from_f64(params.arc_halfwidth(params.theta0))?;
    let two_w = &w + &w;
    let mut witness = None;
    'outer: for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            if arcs_overlap(&centers[i], &centers[j], &two_w) {
                witness = Some((centers[i].clone(), centers[j].clone()));
                break 'outer;
            }
        }
    }
    Ok(DisjointnessReport {
        disjoint: witness.is_none(),
        centers: centers.len(),
        q_bound: params.q_bound(params.theta0),
        halfwidth: params.arc_halfwidth(params.theta0),
        witness,
    })
}

fn arcs_overlap(c1: &RationalCenter, c2: &RationalCenter, two_w: &BigRational) -> bool {
    // Boxes overlap iff every coordinate pair of intervals overlaps (mod 1).
    c1.a.iter().zip(&c2.a).all(|(&a1, &a2)| {
        let f1 = BigRational::new(BigInt::from(a1), BigInt::from(c1.q));
        let f2 = BigRational::new(BigInt::from(a2), BigInt::from(c2.q));
        let diff = (&f1 - &f2).abs();
        let wrapped = (BigRational::one() - &diff).abs();
        diff <= *two_w || wrapped <= *two_w
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureReport {
    /// Exact total measure (numerator/denominator rendered decimal elsewhere).
    #[serde(skip)]
    pub measure: BigRational,
    pub measure_f64: f64,
    /// Reference envelope P^{-R + eta (2R+1)}.
    pub envelope: f64,
    /// Fitted constant measure / envelope.
    pub constant: f64,
    pub disjoint: bool,
}

/// Total measure of the `Prime` family at theta0, exact given the pinned
/// half-width: sum of per-arc volumes when disjoint, interval union for R = 1
/// otherwise.
pub fn arcs_measure(params: &CircleParams) -> Result<MeasureReport> {
    let report = check_disjointness(params)?;
    let w = rational_from_f64(params.arc_halfwidth(params.theta0))?;
    let two_w = &w + &w;
    let measure = if report.disjoint {
        let mut total = BigRational::zero();
        let mut vol = BigRational::one();
        for _ in 0..params.r {
            vol *= &two_w;
        }
        for q in 1..=params.q_bound(params.theta0) {
            total += BigRational::from_integer(jordan_totient(q, params.r as u32)) * &vol;
        }
        total
    } else if params.r == 1 {
        // Exact union of the 1-dimensional arcs.
        let centers = arc_centers(params)?;
        let mut intervals: Vec<(BigRational, BigRational)> = centers
            .iter()
            .map(|c| {
                let f = BigRational::new(BigInt::from(c.a[0]), BigInt::from(c.q));
                (&f - &w, &f + &w)
            })
            .collect();
        intervals.sort();
        let mut total = BigRational::zero();
        let mut current: Option<(BigRational, BigRational)> = None;
        for (lo, hi) in intervals {
            match current.take() {
                None => current = Some((lo, hi)),
                Some((clo, chi)) => {
                    if lo <= chi {
                        current = Some((clo, chi.max(hi)));
                    } else {
                        total += &chi - &clo;
                        current = Some((lo, hi));
                    }
                }
            }
        }
        if let Some((clo, chi)) = current {
            total += &chi - &clo;
        }
        total
    } else {
        return Err(Error::Invalid(
            "overlapping arcs with R >= 2: measure needs a disjoint family".into(),
        ));
    };
    let eta = params.eta();
    let envelope = params
        .p
        .powf(-(params.r as f64) + eta * (2.0 * params.r as f64 + 1.0));
    let measure_f64 = measure.to_f64().unwrap_or(f64::NAN);
    Ok(MeasureReport {
        measure,
        measure_f64,
        envelope,
        constant: measure_f64 / envelope,
        disjoint: report.disjoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params(theta0: f64, delta: f64, p: f64) -> CircleParams {
        CircleParams::new_unchecked(1, 1, 1, 1.0, 3.0, theta0, delta, p)
    }

    #[test]
    fn hand_checked_parameter_pair_is_feasible() {
        // R=1, d1=d2=1, b=1, K=3 with (theta0, delta) = (0.05, 0.02):
        // budget 10*0.05 + 2*0.02 = 0.54 < 1, margin 1 > 0.8, 3 > 2.08.
        let p = CircleParams::new(1, 1, 1, 1.0, 3.0, 0.05, 0.02, 1024.0).unwrap();
        assert!((p.eta() - 0.05).abs() < 1e-12);
        let conds = p.conditions();
        assert!(conds.iter().all(|c| c.holds));
        let budget = &conds[3];
        assert!((budget.rhs - 0.54).abs() < 1e-12);
    }

    #[test]
    fn k_at_threshold_is_infeasible() {
        // Threshold is max(2, 2) = 2; K must exceed it strictly.
        let err = choose_parameters(1, 1, 1, 1.0, 2.0, 1024.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("K"), "unexpected message: {msg}");
        assert!(CircleParams::new(1, 1, 1, 1.0, 2.0, 0.01, 0.001, 1024.0).is_err());
    }

    #[test]
    fn large_asymmetry_becomes_infeasible() {
        assert!(choose_parameters(1, 1, 1, 1.0, 3.0, 1024.0).is_ok());
        assert!(choose_parameters(1, 1, 1, 100.0, 3.0, 1024.0).is_err());
    }

    #[test]
    fn chosen_parameters_satisfy_conditions_strictly() {
        for (k, b) in [(3.0, 1.0), (3.0, 1.2), (4.0, 1.0), (8.0, 2.0)] {
            let params = choose_parameters(1, 1, 1, b, k, 1024.0).unwrap();
            assert!(params.conditions().iter().all(|c| c.holds));
            assert!(params.delta > 0.0 && params.theta0 > 0.0);
        }
        // The grid search should do at least as well as the hand pair.
        let params = choose_parameters(1, 1, 1, 1.0, 3.0, 1024.0).unwrap();
        assert!(params.delta >= 0.02, "delta = {}", params.delta);
        // Determinism.
        let again = choose_parameters(1, 1, 1, 1.0, 3.0, 1024.0).unwrap();
        assert_eq!(params.theta0, again.theta0);
        assert_eq!(params.delta, again.delta);
    }

    #[test]
    fn locates_exact_rational_center() {
        // Width P^{-1+theta} is tiny, so only the exact center qualifies.
        let params = unit_params(0.25, 0.01, 1.0e4);
        // q_bound = 10^4*0.25 = 10.
        assert_eq!(params.q_bound(params.theta0), 10);
        let hit = locate_arc(&[1.0 / 3.0], &params, params.theta0, ArcVariant::Prime)
            .unwrap()
            .unwrap();
        assert_eq!((hit.q, hit.a.clone()), (3, vec![1]));
        let plain = locate_arc(&[1.0 / 3.0], &params, params.theta0, ArcVariant::Plain)
            .unwrap()
            .unwrap();
        assert_eq!((plain.q, plain.a), (3, vec![1]));
        // Unreduced input 2/6 lands on the reduced center.
        let hit = locate_arc(&[2.0 / 6.0], &params, params.theta0, ArcVariant::Prime)
            .unwrap()
            .unwrap();
        assert_eq!((hit.q, hit.a), (3, vec![1]));
    }

    #[test]
    fn locates_perturbed_center_and_reports_beta() {
        // P = 10^7, theta with P^theta = 10: width P^{-1+theta} = 10^{-6}.
        let theta = 1.0 / 7.0;
        let params = unit_params(theta, 0.01, 1.0e7);
        assert_eq!(params.q_bound(theta), 10);
        let alpha = [1.0 / 3.0 + 1e-9];
        let hit = locate_arc(&alpha, &params, theta, ArcVariant::Prime)
            .unwrap()
            .unwrap();
        assert_eq!((hit.q, hit.a.clone()), (3, vec![1]));
        let beta = hit.beta(&alpha);
        assert!((beta[0] - 1e-9).abs() < 1e-12);
    }

    #[test]
    fn badly_approximable_alpha_is_off_arc() {
        // Golden ratio: |q*alpha - a| >= c/q, never within 10^{-6} for q <= 10.
        let theta = 1.0 / 7.0;
        let params = unit_params(theta, 0.01, 1.0e7);
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!(locate_arc(&[golden], &params, theta, ArcVariant::Prime)
            .unwrap()
            .is_none());
    }

    #[test]
    fn plain_membership_implies_prime_membership() {
        // Plain demands 2|q alpha - a| <= width, prime allows q times width.
        let params = unit_params(0.25, 0.01, 256.0);
        let mut alpha = 0.09f64;
        for _ in 0..40 {
            alpha = (alpha * 97.31).fract();
            let plain = locate_arc(&[alpha], &params, params.theta0, ArcVariant::Plain).unwrap();
            if let Some(c) = plain {
                let prime = locate_arc(&[alpha], &params, params.theta0, ArcVariant::Prime)
                    .unwrap()
                    .expect("prime family contains the plain family");
                assert!(prime.q <= c.q);
            }
        }
    }

    #[test]
    fn plain_success_is_monotone_in_theta() {
        let params = unit_params(0.2, 0.01, 256.0);
        let mut alpha = 0.31f64;
        for _ in 0..40 {
            alpha = (alpha * 57.17).fract();
            if locate_arc(&[alpha], &params, 0.2, ArcVariant::Plain)
                .unwrap()
                .is_some()
            {
                assert!(locate_arc(&[alpha], &params, 0.3, ArcVariant::Plain)
                    .unwrap()
                    .is_some());
            }
        }
    }

    #[test]
    fn jordan_totient_values() {
        assert_eq!(jordan_totient(1, 1), BigInt::from(1));
        assert_eq!(jordan_totient(6, 1), BigInt::from(2));
        assert_eq!(jordan_totient(4, 2), BigInt::from(12));
        assert_eq!(jordan_totient(6, 2), BigInt::from(24));
        // Brute-force cross-check.
        for q in 1u64..=12 {
            let brute = (0..q)
                .flat_map(|a1| (0..q).map(move |a2| (a1, a2)))
                .filter(|&(a1, a2)| {
                    num_integer::gcd(num_integer::gcd(q, a1), a2) == 1
                })
                .count();
            assert_eq!(jordan_totient(q, 2), BigInt::from(brute));
        }
    }

    #[test]
    fn single_arc_family_is_disjoint_with_small_constant() {
        // eta small: q_bound = 1, a single arc around 0.
        let params = CircleParams::new(1, 1, 1, 1.0, 3.0, 0.05, 0.02, 1024.0).unwrap();
        assert_eq!(params.q_bound(params.theta0), 1);
        let report = check_disjointness(&params).unwrap();
        assert!(report.disjoint);
        assert_eq!(report.centers, 1);
        let measure = arcs_measure(&params).unwrap();
        // Single arc: measure = 2 P^{-1+eta}; constant = 2 P^{-2 eta} < 2.
        let expect = 2.0 * params.arc_halfwidth(params.theta0);
        assert!((measure.measure_f64 - expect).abs() < 1e-15);
        assert!(measure.constant <= 2.0);
    }

    #[test]
    fn wide_arcs_collide_with_witness() {
        // Width 0.3 per arc; centers 0/1 and 1/2 overlap on the torus.
        // Pick p, theta with q_bound = p^theta = 2 and halfwidth p^{theta-1} = 0.3.
        let p = 2.0f64 / 0.3;
        let theta = 2.0f64.ln() / p.ln();
        let params = CircleParams::new_unchecked(1, 1, 1, 1.0, 3.0, theta, 0.01, p);
        assert_eq!(params.q_bound(theta), 2);
        assert!((params.arc_halfwidth(theta) - 0.3).abs() < 1e-12);
        let report = check_disjointness(&params).unwrap();
        assert!(!report.disjoint);
        assert!(report.witness.is_some());
        // Union measure is below the naive sum because of the overlap.
        let measure = arcs_measure(&params).unwrap();
        let naive = 2.0 * 0.6;
        assert!(measure.measure_f64 < naive);
        assert!(measure.measure_f64 > 0.6);
    }

    #[test]
    fn measure_decays_as_p_grows() {
        let mut prev = f64::INFINITY;
        for p in [256.0, 1024.0, 4096.0, 16384.0] {
            let params = CircleParams::new(1, 1, 1, 1.0, 3.0, 0.05, 0.02, p).unwrap();
            let m = arcs_measure(&params).unwrap();
            assert!(m.measure_f64 < prev);
            prev = m.measure_f64;
        }
    }
}
