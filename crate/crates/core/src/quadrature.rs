//! Deterministic quadrature primitives for the archimedean pipeline:
//! cached Gauss-Legendre rules, dyadically subdivided tensor integration
//! with tree-ordered reduction, a Halton sequence for oracle sampling and
//! search starts, and piecewise-polynomial hat weights with exact box
//! convolution.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::expsum::tree_sum;
use crate::{Error, Result};

/// Gauss-Legendre rule on [-1, 1]: integrates polynomials of degree
/// 2 * order - 1 exactly.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn compute(order: usize) -> Self {
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                let step = p / d;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(order, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        // Newton walks from the right; store ascending.
        nodes.reverse();
        weights.reverse();
        GaussLegendre {
            order,
            nodes,
            weights,
        }
    }
}

/// Value and derivative of the Legendre polynomial by the three-term
/// recurrence.
fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..order {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached rule lookup; rules are immutable once built.
pub fn gauss_legendre(order: usize) -> Result<Arc<GaussLegendre>> {
    if order < 2 {
        return Err(Error::Invalid(format!(
            "quadrature order must be at least 2, got {order}"
        )));
    }
    if order > 64 {
        return Err(Error::Invalid(format!(
            "quadrature order {order} exceeds the supported 64"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    Ok(Arc::clone(
        map.entry(order)
            .or_insert_with(|| Arc::new(GaussLegendre::compute(order))),
    ))
}

/// Evaluation count of `integrate_tensor` at the given shape.
pub fn tensor_evaluations(dim: usize, order: usize, level: u32) -> Option<u128> {
    let per_axis = (order as u128).checked_mul(1u128.checked_shl(level)?)?;
    let mut total = 1u128;
    for _ in 0..dim {
        total = total.checked_mul(per_axis)?;
    }
    Some(total)
}

/// Tensor Gauss-Legendre integral over a product of intervals, each axis
/// split into 2^level equal cells. Cells evaluate in parallel; the final
/// reduction is a fixed pairwise tree, so results are bitwise reproducible.
pub fn integrate_tensor<F>(
    sides: &[(f64, f64)],
    order: usize,
    level: u32,
    f: F,
) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let dim = sides.len();
    if dim == 0 {
        return Ok(f(&[]));
    }
    let rule = gauss_legendre(order)?;
    let evals = tensor_evaluations(dim, order, level)
        .ok_or_else(|| Error::Budget("tensor grid size overflows".into()))?;
    if evals > 1u128 << 40 {
        return Err(Error::Budget(format!(
            "tensor grid wants {evals} evaluations, hard cap is 2^40"
        )));
    }
    let cells_per_axis = 1u64 << level;
    let total_cells = cells_per_axis.pow(dim as u32);
    let values: Vec<Complex64> = (0..total_cells)
        .into_par_iter()
        .map(|cell| {
            let mut lo = vec![0.0; dim];
            let mut hi = vec![0.0; dim];
            let mut c = cell;
            for ax in (0..dim).rev() {
                let k = (c % cells_per_axis) as f64;
                c /= cells_per_axis;
                let (a, b) = sides[ax];
                let w = (b - a) / cells_per_axis as f64;
                lo[ax] = a + k * w;
                hi[ax] = a + (k + 1.0) * w;
            }
            cell_integral(&rule, &lo, &hi, &f)
        })
        .collect();
    Ok(tree_sum(&values))
}

fn cell_integral<F>(rule: &GaussLegendre, lo: &[f64], hi: &[f64], f: &F) -> Complex64
where
    F: Fn(&[f64]) -> Complex64,
{
    let dim = lo.len();
    let order = rule.order();
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    let mut jac = 1.0;
    for ax in 0..dim {
        jac *= (hi[ax] - lo[ax]) / 2.0;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    loop {
        let mut w = jac;
        for ax in 0..dim {
            let t = rule.nodes()[idx[ax]];
            point[ax] = (lo[ax] + hi[ax]) / 2.0 + (hi[ax] - lo[ax]) / 2.0 * t;
            w *= rule.weights()[idx[ax]];
        }
        acc += w * f(&point);
        let mut ax = dim;
        loop {
            if ax == 0 {
                return acc;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < order {
                break;
            }
            idx[ax] = 0;
        }
    }
}

pub const HALTON_BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical-inverse value in (0, 1); `index` starts at 1.
pub fn halton(mut index: u64, base: u64) -> f64 {
    debug_assert!(base >= 2);
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Point of the Halton sequence in the unit cube, one coprime base per axis.
pub fn halton_point(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= HALTON_BASES.len(), "halton supports dim <= 8");
    (0..dim).map(|i| halton(index, HALTON_BASES[i])).collect()
}

/// The scaled hat weight: unit mass, support [-1/t, 1/t], height t.
pub fn hat_weight(t: f64, z: f64) -> f64 {
    assert!(t > 0.0);
    t * (1.0 - (t * z).abs()).max(0.0)
}

/// Exact phase integral of e(t s) over [lo, hi].
pub fn box_phase_integral(t: f64, lo: f64, hi: f64) -> Complex64 {
    let len = hi - lo;
    let mid = (hi + lo) / 2.0;
    let center = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t * mid);
    center * (len * sinc(t * len))
}

/// sin(pi u) / (pi u), continuous at 0.
pub fn sinc(u: f64) -> f64 {
    let v = std::f64::consts::PI * u;
    if v.abs() < 1e-6 {
        1.0 - v * v / 6.0
    } else {
        v.sin() / v
    }
}

/// Compactly supported piecewise polynomial. `pieces[i]` holds
/// ascending-power coefficients on [breaks[i], breaks[i+1]]; the function
/// is 0 left of the first break and `right_value` right of the last, which
/// lets antiderivatives share the representation.
#[derive(Debug, Clone)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    pieces: Vec<Vec<f64>>,
    right_value: f64,
}

impl PiecewisePoly {
    /// The hat weight of parameter t as an exact piecewise-linear function.
    pub fn hat(t: f64) -> Self {
        assert!(t > 0.0);
        PiecewisePoly {
            breaks: vec![-1.0 / t, 0.0, 1.0 / t],
            pieces: vec![vec![t, t * t], vec![t, -t * t]],
            right_value: 0.0,
        }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn eval(&self, z: f64) -> f64 {
        if self.breaks.is_empty() || z < self.breaks[0] {
            return 0.0;
        }
        if z >= *self.breaks.last().unwrap() {
            return self.right_value;
        }
        let i = match self
            .breaks
            .binary_search_by(|b| b.partial_cmp(&z).unwrap())
        {
            Ok(i) => i.min(self.pieces.len() - 1),
            Err(i) => i - 1,
        };
        horner(&self.pieces[i], z)
    }

    /// Antiderivative vanishing at the left end of the support; constant
    /// equal to the total mass to the right.
    pub fn antiderivative(&self) -> Self {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut carry = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            let mut q = vec![0.0; p.len() + 1];
            for (k, &c) in p.iter().enumerate() {
                q[k + 1] = c / (k as f64 + 1.0);
            }
            q[0] = carry - horner(&q, self.breaks[i]);
            carry = horner(&q, self.breaks[i + 1]);
            pieces.push(q);
        }
        PiecewisePoly {
            breaks: self.breaks.clone(),
            pieces,
            right_value: carry,
        }
    }

    /// Total mass of the compactly supported part.
    pub fn mass(&self) -> f64 {
        self.antiderivative().right_value
    }

    /// z -> integral over s in [lo, hi] of self(z + c s) ds, the exact
    /// convolution with a coefficient-mapped box. Degree rises by one.
    pub fn box_convolve(&self, c: f64, lo: f64, hi: f64) -> Self {
        assert!(lo <= hi);
        let span = self.breaks.last().copied().unwrap_or(0.0)
            - self.breaks.first().copied().unwrap_or(0.0);
        if c.abs() * (hi - lo) < 1e-14 * (1.0 + span) {
            // The slot coefficient vanishes: the variable integrates to
            // its interval length.
            let scale = hi - lo;
            return PiecewisePoly {
                breaks: self.breaks.clone(),
                pieces: self
                    .pieces
                    .iter()
                    .map(|p| p.iter().map(|&v| v * scale).collect())
                    .collect(),
                right_value: self.right_value * scale,
            };
        }
        let anti = self.antiderivative();
        // (A(z + c hi) - A(z + c lo)) / c, also valid for c < 0.
        let mut breaks: Vec<f64> = self
            .breaks
            .iter()
            .flat_map(|&b| [b - c * hi, b - c * lo])
            .collect();
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let tol = 1e-12 * (1.0 + span + c.abs() * (hi.abs() + lo.abs()));
        breaks.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let mut pieces = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            let mid = (w[0] + w[1]) / 2.0;
            let upper = anti.piece_at(mid + c * hi);
            let lower = anti.piece_at(mid + c * lo);
            let diff = poly_sub(
                &poly_shift(&upper, c * hi),
                &poly_shift(&lower, c * lo),
            );
            pieces.push(diff.iter().map(|&v| v / c).collect());
        }
        PiecewisePoly {
            breaks,
            pieces,
            right_value: self.right_value * (hi - lo),
        }
    }

    /// Coefficients of the piece containing z, extended by the constant
    /// tails on both sides.
    fn piece_at(&self, z: f64) -> Vec<f64> {
        if self.breaks.is_empty() || z < self.breaks[0] {
            return vec![0.0];
        }
        if z >= *self.breaks.last().unwrap() {
            return vec![self.right_value];
        }
        let i = match self
            .breaks
            .binary_search_by(|b| b.partial_cmp(&z).unwrap())
        {
            Ok(i) => i.min(self.pieces.len() - 1),
            Err(i) => i - 1,
        };
        self.pieces[i].clone()
    }
}

fn horner(coeffs: &[f64], z: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// p(z + s) expanded in powers of z.
fn poly_shift(coeffs: &[f64], s: f64) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n];
    for (k, &c) in coeffs.iter().enumerate() {
        // binomial expansion of c (z + s)^k
        let mut binom = 1.0;
        let mut spow = 1.0;
        for j in (0..=k).rev() {
            out[j] += c * binom * spow;
            if j > 0 {
                binom = binom * j as f64 / (k - j + 1) as f64;
                spow *= s;
            }
        }
    }
    out
}

fn poly_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_nodes_and_weights() {
        assert!(gauss_legendre(1).is_err());
        let r2 = gauss_legendre(2).unwrap();
        let inv_sqrt3 = 1.0 / 3.0f64.sqrt();
        assert!((r2.nodes()[0] + inv_sqrt3).abs() < 1e-14);
        assert!((r2.nodes()[1] - inv_sqrt3).abs() < 1e-14);
        assert!((r2.weights()[0] - 1.0).abs() < 1e-14);
        for order in 2..=12 {
            let r = gauss_legendre(order).unwrap();
            let wsum: f64 = r.weights().iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13, "order {order}: {wsum}");
            for (a, b) in r.nodes().iter().zip(r.nodes().iter().skip(1)) {
                assert!(a < b);
            }
            // symmetry of the rule about 0
            for i in 0..order {
                assert!((r.nodes()[i] + r.nodes()[order - 1 - i]).abs() < 1e-13);
                assert!((r.weights()[i] - r.weights()[order - 1 - i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rule_is_exact_on_polynomials() {
        for order in [2usize, 4, 7] {
            let r = gauss_legendre(order).unwrap();
            for k in 0..2 * order {
                let got: f64 = r
                    .nodes()
                    .iter()
                    .zip(r.weights())
                    .map(|(&x, &w)| w * x.powi(k as i32))
                    .sum();
                let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!(
                    (got - want).abs() < 1e-13,
                    "order {order}, moment {k}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn tensor_integrates_separable_polynomial() {
        // integral of x^2 y^3 over [0,1] x [-1,2] = (1/3)(15/4)
        let got = integrate_tensor(&[(0.0, 1.0), (-1.0, 2.0)], 4, 1, |p| {
            Complex64::new(p[0] * p[0] * p[1] * p[1] * p[1], 0.0)
        })
        .unwrap();
        assert!((got.re - 1.25).abs() < 1e-12, "{got}");
        assert!(got.im.abs() < 1e-15);
        let empty = integrate_tensor(&[], 4, 0, |_| Complex64::new(7.0, 0.0)).unwrap();
        assert!((empty.re - 7.0).abs() < 1e-15);
    }

    #[test]
    fn subdivision_resolves_off_grid_kink() {
        // Asymmetric hat with kinks off every dyadic edge; a symmetric one
        // can hit a slope-jump cancellation across equal cell offsets.
        let f = |p: &[f64]| {
            let z = p[0];
            let drop = if z >= 0.3 { 2.0 * (z - 0.3) } else { 3.0 * (0.3 - z) };
            Complex64::new((1.0 - drop).max(0.0), 0.0)
        };
        let exact = 5.0 / 12.0;
        let mut errs = Vec::new();
        for level in [0u32, 2, 4] {
            let got = integrate_tensor(&[(-1.0, 1.0)], 4, level, f).unwrap();
            errs.push((got.re - exact).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 1e-3, "{errs:?}");
    }

    #[test]
    fn tensor_reduction_is_deterministic() {
        let f = |p: &[f64]| Complex64::new((p[0] * 3.7 + p[1]).sin(), (p[1] * 1.3).cos());
        let a = integrate_tensor(&[(0.0, 1.0), (0.0, 1.0)], 6, 3, f).unwrap();
        let b = integrate_tensor(&[(0.0, 1.0), (0.0, 1.0)], 6, 3, f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn halton_prefix_values() {
        let want2 = [0.5, 0.25, 0.75, 0.125];
        for (i, w) in want2.iter().enumerate() {
            assert!((halton(i as u64 + 1, 2) - w).abs() < 1e-15);
        }
        let want3 = [1.0 / 3.0, 2.0 / 3.0, 1.0 / 9.0];
        for (i, w) in want3.iter().enumerate() {
            assert!((halton(i as u64 + 1, 3) - w).abs() < 1e-15);
        }
        for idx in 1..200u64 {
            let p = halton_point(idx, 6);
            assert_eq!(p.len(), 6);
            assert!(p.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }

    #[test]
    fn hat_weight_values() {
        assert!((hat_weight(2.0, 0.25) - 1.0).abs() < 1e-15);
        assert_eq!(hat_weight(4.0, 0.26), 0.0);
        assert_eq!(hat_weight(4.0, -0.3), 0.0);
        assert!((hat_weight(4.0, 0.0) - 4.0).abs() < 1e-15);
        // Riemann check of unit mass
        let n = 100_000;
        let h = 2.0 / n as f64;
        let mass: f64 = (0..n)
            .map(|i| hat_weight(3.0, -1.0 + (i as f64 + 0.5) * h) * h)
            .sum();
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn piecewise_hat_matches_closed_form() {
        let p = PiecewisePoly::hat(2.0);
        for i in 0..=100 {
            let z = -0.8 + 1.6 * i as f64 / 100.0;
            assert!(
                (p.eval(z) - hat_weight(2.0, z)).abs() < 1e-14,
                "z = {z}"
            );
        }
        assert!((p.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn antiderivative_accumulates_mass() {
        let a = PiecewisePoly::hat(4.0).antiderivative();
        assert_eq!(a.eval(-1.0), 0.0);
        assert!((a.eval(1.0) - 1.0).abs() < 1e-14);
        assert!((a.eval(0.0) - 0.5).abs() < 1e-14);
        let mut prev = -1e-9;
        for i in 0..=64 {
            let v = a.eval(-0.3 + 0.6 * i as f64 / 64.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn box_convolution_exact_values() {
        let conv = PiecewisePoly::hat(1.0).box_convolve(1.0, -0.5, 0.5);
        // integral of the unit hat over [z - 1/2, z + 1/2]
        assert!((conv.eval(0.0) - 0.75).abs() < 1e-13);
        assert!((conv.eval(1.5)).abs() < 1e-13);
        assert!((conv.eval(-1.5)).abs() < 1e-13);
        assert!((conv.eval(0.7) - conv.eval(-0.7)).abs() < 1e-13);
        assert!((conv.mass() - 1.0).abs() < 1e-12);
        // Negated coefficient gives the mirror image; the hat is even.
        let neg = PiecewisePoly::hat(1.0).box_convolve(-1.0, -0.5, 0.5);
        for i in 0..=40 {
            let z = -1.6 + 3.2 * i as f64 / 40.0;
            assert!((conv.eval(z) - neg.eval(z)).abs() < 1e-12);
        }
        // Vanishing coefficient integrates to the interval length.
        let flat = PiecewisePoly::hat(2.0).box_convolve(0.0, -0.25, 0.5);
        assert!((flat.eval(0.1) - 0.75 * hat_weight(2.0, 0.1)).abs() < 1e-13);
    }

    #[test]
    fn convolution_matches_riemann_sum() {
        let p = PiecewisePoly::hat(2.0).box_convolve(0.8, -0.5, 0.25);
        for &z in &[-0.4, -0.1, 0.0, 0.2, 0.55] {
            let n = 200_000;
            let h = 0.75 / n as f64;
            let direct: f64 = (0..n)
                .map(|i| hat_weight(2.0, z + 0.8 * (-0.5 + (i as f64 + 0.5) * h)) * h)
                .sum();
            assert!(
                (p.eval(z) - direct).abs() < 1e-5,
                "z = {z}: {} vs {direct}",
                p.eval(z)
            );
        }
    }

    #[test]
    fn box_phase_integral_matches_quadrature() {
        for &(t, lo, hi) in &[(0.0, -0.5, 0.5), (1.3, -0.5, 0.5), (-2.7, 0.1, 0.9)] {
            let closed = box_phase_integral(t, lo, hi);
            let quad = integrate_tensor(&[(lo, hi)], 12, 2, |p| {
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t * p[0])
            })
            .unwrap();
            assert!((closed - quad).norm() < 1e-12, "t = {t}");
        }
    }
}
