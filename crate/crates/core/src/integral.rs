//! The archimedean side: oscillatory box integrals I(u), the truncated
//! singular integral J(Phi), the hat-weight representation J~_T with
//! extrapolation in T, and the real nonsingular-zero search.
//!
//! Two independent routes to the same constant are kept deliberately: the
//! oscillatory route integrates I over a growing coefficient box, the
//! hat-weight route never oscillates and is the production path. Their
//! agreement is a standing cross-check.
//!
//! For d2 = 1 the y integral of a phase or hat weight is done in closed
//! form (a product of interval phase integrals, or an exact piecewise
//! polynomial convolution), which removes the oscillation and the kink set
//! from the quadrature dimensions entirely.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::BoxPair;
use crate::forms::{Axis, FormSystem};
use crate::quadrature::{
    box_phase_integral, halton, hat_weight, integrate_tensor, tensor_evaluations,
    PiecewisePoly, HALTON_BASES,
};
use crate::{Error, Result};

/// Residual bound a real witness must meet, original form scaling.
pub const REAL_RESIDUAL_TOL: f64 = 1e-10;
/// Smallest singular value of the full Jacobian certifying rank R.
pub const REAL_RANK_TOL: f64 = 1e-6;

/// Tensor scheme controls: per-axis rule order, base dyadic level added on
/// top of the oscillation-driven level, target absolute error, and a cap on
/// integrand evaluations.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureSpec {
    pub order: usize,
    pub base_level: u32,
    pub tolerance: f64,
    pub budget: u128,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            order: 8,
            base_level: 1,
            tolerance: 1e-7,
            budget: 20_000_000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::Invalid(format!(
                "quadrature order must be at least 2, got {}",
                self.order
            )));
        }
        if self.base_level > 12 {
            return Err(Error::Invalid(format!(
                "base subdivision level {} exceeds 12",
                self.base_level
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Invalid("tolerance must be positive".into()));
        }
        if self.budget == 0 {
            return Err(Error::Invalid("evaluation budget must be positive".into()));
        }
        Ok(())
    }
}

/// A quadrature value with a two-level Richardson error estimate.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub re: f64,
    pub im: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub evaluations: u128,
}

impl Estimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

fn box_sides(bp: &BoxPair) -> Vec<(f64, f64)> {
    bp.b1()
        .iter()
        .chain(bp.b2())
        .map(|iv| (iv.lo(), iv.hi()))
        .collect()
}

fn clear_factors_f64(sys: &FormSystem) -> Vec<f64> {
    (0..sys.r())
        .map(|i| {
            crate::exact::rational_to_f64(&num_rational::BigRational::from_integer(
                sys.clear_factor(i).clone(),
            ))
        })
        .collect()
}

/// Phase-variation bound per unit cell: each axis must be split until the
/// per-cell variation drops below one period.
fn oscillation_bound(sys: &FormSystem, u: &[f64]) -> f64 {
    u.iter()
        .enumerate()
        .map(|(i, &ui)| ui.abs() * sys.coeff_l1_f64(i))
        .sum()
}

fn level_for_oscillation(osc: f64, base: u32) -> u32 {
    base + (osc.max(1.0).log2().ceil() as u32).min(14)
}

struct RefinementPair {
    coarse: Complex64,
    fine: Complex64,
    evaluations: u128,
    refined: bool,
}

/// Evaluates the integral at the largest affordable pair of consecutive
/// levels at or below `want`. When not even the (0, 1) pair fits the
/// budget, a single level-0 value is returned with `refined` unset.
fn tensor_pair<F>(
    sides: &[(f64, f64)],
    order: usize,
    want: u32,
    budget: u128,
    f: F,
) -> Result<RefinementPair>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let dim = sides.len();
    for level in (0..=want).rev() {
        let (Some(a), Some(b)) = (
            tensor_evaluations(dim, order, level),
            tensor_evaluations(dim, order, level + 1),
        ) else {
            continue;
        };
        if a.checked_add(b).is_none_or(|s| s > budget) {
            continue;
        }
        let coarse = integrate_tensor(sides, order, level, &f)?;
        let fine = integrate_tensor(sides, order, level + 1, &f)?;
        return Ok(RefinementPair {
            coarse,
            fine,
            evaluations: a + b,
            refined: true,
        });
    }
    let value = integrate_tensor(sides, order, 0, &f)?;
    Ok(RefinementPair {
        coarse: value,
        fine: value,
        evaluations: tensor_evaluations(dim, order, 0).unwrap_or(u128::MAX),
        refined: false,
    })
}

fn pair_estimate(pair: RefinementPair, tolerance: f64) -> Estimate {
    let error = if pair.refined {
        (pair.fine - pair.coarse).norm()
    } else {
        f64::INFINITY
    };
    Estimate {
        re: pair.fine.re,
        im: pair.fine.im,
        error_estimate: error,
        converged: error <= tolerance,
        evaluations: pair.evaluations,
    }
}

fn validate_geometry(sys: &FormSystem, bp: &BoxPair) -> Result<()> {
    if sys.n1() != bp.b1().len() || sys.n2() != bp.b2().len() {
        return Err(Error::Invalid(format!(
            "box pair is {} x {} sided, system wants {} x {}",
            bp.b1().len(),
            bp.b2().len(),
            sys.n1(),
            sys.n2()
        )));
    }
    if sys.n1() + sys.n2() > 8 {
        return Err(Error::Invalid(
            "tensor quadrature supports n1 + n2 <= 8".into(),
        ));
    }
    Ok(())
}

/// I(u): the phase integral of e(u . F) over the box pair.
pub fn oscillatory_i(
    sys: &FormSystem,
    u: &[f64],
    bp: &BoxPair,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    spec.validate()?;
    validate_geometry(sys, bp)?;
    if u.len() != sys.r() {
        return Err(Error::Invalid(format!(
            "coefficient vector has {} entries, system has R = {}",
            u.len(),
            sys.r()
        )));
    }
    if !u.iter().all(|v| v.is_finite()) {
        return Err(Error::Invalid("coefficients must be finite".into()));
    }
    let want = level_for_oscillation(oscillation_bound(sys, u), spec.base_level);
    if sys.d2() == 1 {
        if let Some(groups) = separable_slots(sys) {
            return oscillatory_separable(sys, u, bp, spec, want, &groups);
        }
        return oscillatory_y_linear(sys, u, bp, spec, want);
    }
    oscillatory_generic(sys, u, bp, spec, want)
}

/// Slot supports when they are pairwise disjoint, None otherwise.
fn separable_slots(sys: &FormSystem) -> Option<Vec<Vec<usize>>> {
    let mut seen = vec![false; sys.n1()];
    let mut groups = Vec::with_capacity(sys.n2());
    for m in 0..sys.n2() {
        let support = sys.y_slot_x_support(m);
        for &j in &support {
            if seen[j] {
                return None;
            }
            seen[j] = true;
        }
        groups.push(support);
    }
    Some(groups)
}

/// Slot coefficient of y_m in u . F at the given x, original scaling.
fn slot_phase_coeff(
    sys: &FormSystem,
    clear: &[f64],
    u: &[f64],
    x: &[f64],
    m: usize,
) -> f64 {
    let y0 = vec![0.0; sys.n2()];
    (0..sys.r())
        .map(|i| u[i] * sys.gradient_f64(i, x, &y0, Axis::Y)[m] / clear[i])
        .sum()
}

fn oscillatory_separable(
    sys: &FormSystem,
    u: &[f64],
    bp: &BoxPair,
    spec: &QuadratureSpec,
    want: u32,
    groups: &[Vec<usize>],
) -> Result<Estimate> {
    let clear = clear_factors_f64(sys);
    let used: Vec<bool> = {
        let mut used = vec![false; sys.n1()];
        for g in groups {
            for &j in g {
                used[j] = true;
            }
        }
        used
    };
    let unused_volume: f64 = bp
        .b1()
        .iter()
        .enumerate()
        .filter(|(j, _)| !used[*j])
        .map(|(_, iv)| iv.length())
        .product();
    let mut coarse = Complex64::new(unused_volume, 0.0);
    let mut fine = coarse;
    let mut evaluations = 0u128;
    let mut refined = true;
    let share = (spec.budget / groups.len().max(1) as u128).max(1);
    for (m, group) in groups.iter().enumerate() {
        let iv = &bp.b2()[m];
        let sides: Vec<(f64, f64)> = group
            .iter()
            .map(|&j| (bp.b1()[j].lo(), bp.b1()[j].hi()))
            .collect();
        let integrand = |pt: &[f64]| {
            let mut x = vec![0.0; sys.n1()];
            for (slot, &j) in group.iter().enumerate() {
                x[j] = pt[slot];
            }
            let t = slot_phase_coeff(sys, &clear, u, &x, m);
            box_phase_integral(t, iv.lo(), iv.hi())
        };
        let pair = tensor_pair(&sides, spec.order, want, share, integrand)?;
        coarse *= pair.coarse;
        fine *= pair.fine;
        evaluations += pair.evaluations;
        refined &= pair.refined;
    }
    Ok(pair_estimate(
        RefinementPair {
            coarse,
            fine,
            evaluations,
            refined,
        },
        spec.tolerance,
    ))
}

/// d2 = 1 with entangled slots: quadrature over x only, y in closed form.
fn oscillatory_y_linear(
    sys: &FormSystem,
    u: &[f64],
    bp: &BoxPair,
    spec: &QuadratureSpec,
    want: u32,
) -> Result<Estimate> {
    let clear = clear_factors_f64(sys);
    let sides: Vec<(f64, f64)> = bp.b1().iter().map(|iv| (iv.lo(), iv.hi())).collect();
    let y0 = vec![0.0; sys.n2()];
    let integrand = |x: &[f64]| {
        let grads: Vec<Vec<f64>> = (0..sys.r())
            .map(|i| sys.gradient_f64(i, x, &y0, Axis::Y))
            .collect();
        let mut prod = Complex64::new(1.0, 0.0);
        for (m, iv) in bp.b2().iter().enumerate() {
            let t: f64 = (0..sys.r()).map(|i| u[i] * grads[i][m] / clear[i]).sum();
            prod *= box_phase_integral(t, iv.lo(), iv.hi());
            if prod.norm_sqr() == 0.0 {
                break;
            }
        }
        prod
    };
    let pair = tensor_pair(&sides, spec.order, want, spec.budget, integrand)?;
    Ok(pair_estimate(pair, spec.tolerance))
}

fn oscillatory_generic(
    sys: &FormSystem,
    u: &[f64],
    bp: &BoxPair,
    spec: &QuadratureSpec,
    want: u32,
) -> Result<Estimate> {
    let clear = clear_factors_f64(sys);
    let sides = box_sides(bp);
    let n1 = sys.n1();
    let integrand = |vw: &[f64]| {
        let (x, y) = vw.split_at(n1);
        let phase: f64 = (0..sys.r())
            .map(|i| u[i] * sys.eval_scaled_f64(i, x, y) / clear[i])
            .sum();
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase)
    };
    let pair = tensor_pair(&sides, spec.order, want, spec.budget, integrand)?;
    Ok(pair_estimate(pair, spec.tolerance))
}

/// J(Phi): the integral of I over the coefficient box [-Phi, Phi]^R, with
/// the imaginary part reported as a health check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JPartial {
    pub phi: f64,
    pub value: f64,
    pub imag_residual: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub evaluations: u128,
}

pub fn singular_integral_partial(
    sys: &FormSystem,
    phi: f64,
    bp: &BoxPair,
    spec: &QuadratureSpec,
) -> Result<JPartial> {
    spec.validate()?;
    validate_geometry(sys, bp)?;
    if sys.r() > 2 {
        return Err(Error::Invalid(
            "outer coefficient integration supports R <= 2".into(),
        ));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::Invalid(format!("Phi = {phi} must be positive")));
    }
    let r = sys.r();
    let outer_sides = vec![(-phi, phi); r];
    // Unit-sized outer cells resolve the O(1) variation scale of I.
    let outer_level =
        (spec.base_level + ((2.0 * phi).log2().ceil().max(0.0) as u32)).min(12);
    let outer_nodes = tensor_evaluations(r, spec.order, outer_level)
        .zip(tensor_evaluations(r, spec.order, outer_level + 1))
        .and_then(|(a, b)| a.checked_add(b))
        .ok_or_else(|| Error::Budget("outer grid size overflows".into()))?;
    let inner_spec = QuadratureSpec {
        order: spec.order,
        base_level: spec.base_level,
        tolerance: spec.tolerance / 10.0,
        budget: (spec.budget / outer_nodes).max(10_000),
    };
    let inner_evals = AtomicU64::new(0);
    let inner_converged = AtomicBool::new(true);
    let poisoned = AtomicBool::new(false);
    let integrand = |beta: &[f64]| match oscillatory_i(sys, beta, bp, &inner_spec) {
        Ok(est) => {
            inner_evals.fetch_add(est.evaluations.min(u64::MAX as u128) as u64, Ordering::Relaxed);
            if !est.converged {
                inner_converged.store(false, Ordering::Relaxed);
            }
            est.value()
        }
        Err(_) => {
            poisoned.store(true, Ordering::Relaxed);
            Complex64::new(0.0, 0.0)
        }
    };
    let coarse = integrate_tensor(&outer_sides, spec.order, outer_level, &integrand)?;
    let fine = integrate_tensor(&outer_sides, spec.order, outer_level + 1, &integrand)?;
    if poisoned.load(Ordering::Relaxed) {
        return Err(Error::Budget(
            "inner oscillatory integral failed under the shared budget".into(),
        ));
    }
    let error = (fine - coarse).norm();
    Ok(JPartial {
        phi,
        value: fine.re,
        imag_residual: fine.im.abs(),
        error_estimate: error,
        converged: inner_converged.load(Ordering::Relaxed) && error <= spec.tolerance,
        evaluations: inner_evals.load(Ordering::Relaxed) as u128,
    })
}

/// One hat-weight value J~_T at a fixed T.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchmidtEstimate {
    pub t: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub degenerate: bool,
    pub evaluations: u128,
}

pub fn schmidt_j_at(
    sys: &FormSystem,
    t: f64,
    bp: &BoxPair,
    spec: &QuadratureSpec,
) -> Result<SchmidtEstimate> {
    spec.validate()?;
    validate_geometry(sys, bp)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Invalid(format!("T = {t} must be positive")));
    }
    let degenerate = (0..sys.r()).any(|i| sys.is_zero_form(i));
    if sys.r() == 1 && sys.d2() == 1 {
        schmidt_convolution(sys, t, bp, spec, degenerate)
    } else {
        schmidt_generic(sys, t, bp, spec, degenerate)
    }
}

/// R = 1, d2 = 1: the y integral of the hat weight is an exact piecewise
/// polynomial convolution chain; only x is quadratured, and the kink set
/// in y never enters the grid.
fn schmidt_convolution(
    sys: &FormSystem,
    t: f64,
    bp: &BoxPair,
    spec: &QuadratureSpec,
    degenerate: bool,
) -> Result<SchmidtEstimate> {
    let clear = clear_factors_f64(sys);
    let sides: Vec<(f64, f64)> = bp.b1().iter().map(|iv| (iv.lo(), iv.hi())).collect();
    let y0 = vec![0.0; sys.n2()];
    let want = spec.base_level + 2;
    let integrand = |x: &[f64]| {
        let grad = sys.gradient_f64(0, x, &y0, Axis::Y);
        let mut g = PiecewisePoly::hat(t);
        for (m, iv) in bp.b2().iter().enumerate() {
            g = g.box_convolve(grad[m] / clear[0], iv.lo(), iv.hi());
        }
        Complex64::new(g.eval(0.0), 0.0)
    };
    let pair = tensor_pair(&sides, spec.order, want, spec.budget, integrand)?;
    let est = pair_estimate(pair, spec.tolerance);
    Ok(SchmidtEstimate {
        t,
        value: est.re,
        error_estimate: est.error_estimate,
        converged: est.converged,
        degenerate,
        evaluations: est.evaluations,
    })
}

/// Full-dimension fallback: the grid must resolve the kink set |F_i| = 1/T,
/// so the wanted level grows with T and the converged flag reports honestly
/// when the budget cannot reach it.
fn schmidt_generic(
    sys: &FormSystem,
    t: f64,
    bp: &BoxPair,
    spec: &QuadratureSpec,
    degenerate: bool,
) -> Result<SchmidtEstimate> {
    let clear = clear_factors_f64(sys);
    let sides = box_sides(bp);
    let n1 = sys.n1();
    let slope: f64 = (0..sys.r()).map(|i| sys.coeff_l1_f64(i)).sum();
    let want = level_for_oscillation(t * slope.max(1.0), spec.base_level);
    let integrand = |vw: &[f64]| {
        let (x, y) = vw.split_at(n1);
        let mut w = 1.0;
        for i in 0..sys.r() {
            w *= hat_weight(t, sys.eval_scaled_f64(i, x, y) / clear[i]);
            if w == 0.0 {
                break;
            }
        }
        Complex64::new(w, 0.0)
    };
    let pair = tensor_pair(&sides, spec.order, want, spec.budget, integrand)?;
    let est = pair_estimate(pair, spec.tolerance);
    Ok(SchmidtEstimate {
        t,
        value: est.re,
        error_estimate: est.error_estimate,
        converged: est.converged,
        degenerate,
        evaluations: est.evaluations,
    })
}

/// Extrapolated hat-weight value with its T ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchmidtResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub degenerate: bool,
    pub per_t: Vec<SchmidtEstimate>,
}

/// J~ estimated from J~_T at T in {t_max/4, t_max/2, t_max} by Aitken
/// extrapolation of the 1/T error model.
pub fn schmidt_j(
    sys: &FormSystem,
    t_max: f64,
    bp: &BoxPair,
    spec: &QuadratureSpec,
) -> Result<SchmidtResult> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Invalid(format!("T = {t_max} must be positive")));
    }
    let ts = [t_max / 4.0, t_max / 2.0, t_max];
    let mut per_t = Vec::with_capacity(3);
    for &t in &ts {
        per_t.push(schmidt_j_at(sys, t, bp, spec)?);
    }
    let degenerate = per_t.iter().any(|e| e.degenerate);
    let (x0, x1, x2) = (per_t[0].value, per_t[1].value, per_t[2].value);
    if degenerate {
        // T vol has no limit; report the last value, never converged.
        return Ok(SchmidtResult {
            value: x2,
            error_estimate: f64::INFINITY,
            converged: false,
            degenerate,
            per_t,
        });
    }
    let quad_err = per_t
        .iter()
        .map(|e| e.error_estimate)
        .fold(0.0f64, f64::max);
    let (d1, d2) = (x1 - x0, x2 - x1);
    let denom = d2 - d1;
    if d2.abs() <= 1e-12 * (1.0 + x2.abs()) {
        // ladder already flat; nothing left to extrapolate
        return Ok(SchmidtResult {
            value: x2,
            error_estimate: d2.abs() + quad_err,
            converged: per_t.iter().all(|e| e.converged),
            degenerate,
            per_t,
        });
    }
    // Aitken extrapolation is meaningful only once the ladder increments
    // are contracting; on a pre-asymptotic ladder (increments still growing,
    // as happens when 1/T exceeds the range of the forms and T vol is linear
    // in T) it extrapolates to the wrong side. Report the last value then.
    if d2.abs() >= d1.abs() || denom.abs() <= 1e-14 * (1.0 + x2.abs()) {
        return Ok(SchmidtResult {
            value: x2,
            error_estimate: d2.abs() + quad_err,
            converged: false,
            degenerate,
            per_t,
        });
    }
    let aitken = x2 - d2 * d2 / denom;
    // Distance to the two-point 1/T Richardson value plus the worst
    // quadrature error of the ladder.
    let error_estimate = (aitken - (2.0 * x2 - x1)).abs() + quad_err;
    Ok(SchmidtResult {
        value: aitken,
        error_estimate,
        converged: per_t.iter().all(|e| e.converged),
        degenerate,
        per_t,
    })
}

/// A real common zero with a full-rank Jacobian, strictly inside the boxes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealWitness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub residual: f64,
    pub sigma_min: f64,
}

fn eval_forms_f64(sys: &FormSystem, clear: &[f64], pt: &[f64]) -> Vec<f64> {
    let (x, y) = pt.split_at(sys.n1());
    (0..sys.r())
        .map(|i| sys.eval_scaled_f64(i, x, y) / clear[i])
        .collect()
}

fn full_jacobian_f64(sys: &FormSystem, clear: &[f64], pt: &[f64]) -> Vec<Vec<f64>> {
    let (x, y) = pt.split_at(sys.n1());
    (0..sys.r())
        .map(|i| {
            sys.gradient_f64(i, x, y, Axis::X)
                .into_iter()
                .chain(sys.gradient_f64(i, x, y, Axis::Y))
                .map(|v| v / clear[i])
                .collect()
        })
        .collect()
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let q = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= q * a[col][k];
            }
            b[row] -= q * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

/// Smallest eigenvalue of a small symmetric matrix by cyclic Jacobi.
fn min_symmetric_eigenvalue(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    if n == 1 {
        return a[0][0];
    }
    for _ in 0..64 {
        let mut off = 0.0f64;
        let (mut p, mut q) = (0, 1);
        for i in 0..n {
            for j in i + 1..n {
                if a[i][j].abs() > off {
                    off = a[i][j].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if off < 1e-18 {
            break;
        }
        let theta = 0.5 * (2.0 * a[p][q]).atan2(a[p][p] - a[q][q]);
        let (s, c) = theta.sin_cos();
        for k in 0..n {
            let (akp, akq) = (a[k][p], a[k][q]);
            a[k][p] = c * akp + s * akq;
            a[k][q] = -s * akp + c * akq;
        }
        for k in 0..n {
            let (apk, aqk) = (a[p][k], a[q][k]);
            a[p][k] = c * apk + s * aqk;
            a[q][k] = -s * apk + c * aqk;
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
}

fn sigma_min(jac: &[Vec<f64>]) -> f64 {
    let r = jac.len();
    let gram: Vec<Vec<f64>> = (0..r)
        .map(|i| {
            (0..r)
                .map(|j| jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    min_symmetric_eigenvalue(gram).max(0.0).sqrt()
}

fn newton_from_start(
    sys: &FormSystem,
    sides: &[(f64, f64)],
    clear: &[f64],
    start: u64,
) -> Option<RealWitness> {
    let n = sides.len();
    let r = sys.r();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0C5_0000 + start);
    let mut pt: Vec<f64> = (0..n)
        .map(|j| {
            let h = if j < HALTON_BASES.len() {
                halton(start, HALTON_BASES[j])
            } else {
                rand::Rng::gen::<f64>(&mut rng)
            };
            let (lo, hi) = sides[j];
            lo + (0.05 + 0.9 * h) * (hi - lo)
        })
        .collect();
    let coords: Vec<usize> = rand::seq::index::sample(&mut rng, n, r).into_vec();
    let mut res = eval_forms_f64(sys, clear, &pt)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    for _ in 0..80 {
        if res < 1e-12 {
            break;
        }
        let jac = full_jacobian_f64(sys, clear, &pt);
        let slice: Vec<Vec<f64>> = (0..r)
            .map(|i| coords.iter().map(|&c| jac[i][c]).collect())
            .collect();
        let fvals = eval_forms_f64(sys, clear, &pt);
        let step = solve_square(slice, fvals)?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..14 {
            let mut cand = pt.clone();
            for (j, &c) in coords.iter().enumerate() {
                let (lo, hi) = sides[c];
                cand[c] = (cand[c] - lambda * step[j]).clamp(lo, hi);
            }
            let cres = eval_forms_f64(sys, clear, &cand)
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if cres < res {
                pt = cand;
                res = cres;
                improved = true;
                break;
            }
            lambda /= 2.0;
        }
        if !improved {
            break;
        }
    }
    if res >= REAL_RESIDUAL_TOL {
        return None;
    }
    if !pt
        .iter()
        .zip(sides)
        .all(|(&v, &(lo, hi))| lo < v && v < hi)
    {
        return None;
    }
    let jac = full_jacobian_f64(sys, clear, &pt);
    let sigma = sigma_min(&jac);
    if sigma <= REAL_RANK_TOL {
        return None;
    }
    let (x, y) = pt.split_at(sys.n1());
    Some(RealWitness {
        x: x.to_vec(),
        y: y.to_vec(),
        residual: res,
        sigma_min: sigma,
    })
}

/// Damped Newton on a seeded R-coordinate slice from 256 low-discrepancy
/// starts. Absence of a witness is a value, not a disproof.
pub fn find_nonsingular_real_zero(sys: &FormSystem, bp: &BoxPair) -> Option<RealWitness> {
    assert_eq!(sys.n1(), bp.b1().len());
    assert_eq!(sys.n2(), bp.b2().len());
    if sys.r() > sys.n1() + sys.n2() {
        return None;
    }
    let sides = box_sides(bp);
    let clear = clear_factors_f64(sys);
    (1..=256u64)
        .into_par_iter()
        .filter_map(|k| newton_from_start(sys, &sides, &clear, k).map(|w| (k, w)))
        .min_by_key(|(k, _)| *k)
        .map(|(_, w)| w)
}
