//! Boxes, scaled integer ranges, and the exact counting function N(P1, P2).

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exact::{ceil_int, floor_int, rational_from_f64};
use crate::forms::FormSystem;
use crate::{Error, Result};

/// Whether a scaled interval [P lo, P hi] keeps or drops its upper endpoint.
///
/// `Closed` is the default convention: hand checks like [-1/2, 1/2] at P = 2
/// giving {-1, 0, 1} assume it. `HalfOpen` drops the upper endpoint, so the
/// point count is exactly `P * (hi - lo)` whenever the scaled endpoints are
/// integers; the experiment configs use it where boundary effects would
/// otherwise dominate a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    #[default]
    Closed,
    HalfOpen,
}

/// One real interval of length at most 1, one box coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
    #[serde(default)]
    kind: IntervalKind,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, kind: IntervalKind) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Invalid("interval endpoints must be finite".into()));
        }
        if lo > hi {
            return Err(Error::Invalid(format!("interval [{lo}, {hi}] is empty")));
        }
        // Exact comparison; the f64 endpoints are taken at face value.
        let exact_lo = rational_from_f64(lo)?;
        let exact_hi = rational_from_f64(hi)?;
        if exact_hi - exact_lo > BigRational::from_integer(1.into()) {
            return Err(Error::Invalid(format!(
                "box side exceeds 1: [{lo}, {hi}]"
            )));
        }
        Ok(Interval { lo, hi, kind })
    }

    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, IntervalKind::Closed)
    }

    pub fn half_open(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, IntervalKind::HalfOpen)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn kind(&self) -> IntervalKind {
        self.kind
    }
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Inclusive integer range {t : t/scale in interval}, computed exactly
    /// from the f64 endpoints. Returns lo > hi when empty.
    pub fn integer_range(&self, scale: f64) -> Result<(i64, i64)> {
        let s = rational_from_f64(scale)?;
        let lo = rational_from_f64(self.lo)? * &s;
        let hi = rational_from_f64(self.hi)? * &s;
        let a = ceil_int(&lo);
        let b = match self.kind {
            IntervalKind::Closed => floor_int(&hi),
            IntervalKind::HalfOpen => {
                if hi.is_integer() {
                    hi.to_integer() - 1
                } else {
                    floor_int(&hi)
                }
            }
        };
        let a = a.to_i64().ok_or_else(|| {
            Error::Invalid("scaled interval endpoint exceeds i64".into())
        })?;
        let b = b.to_i64().ok_or_else(|| {
            Error::Invalid("scaled interval endpoint exceeds i64".into())
        })?;
        Ok((a, b))
    }

    pub fn point_count(&self, scale: f64) -> Result<u64> {
        let (a, b) = self.integer_range(scale)?;
        Ok(if b < a { 0 } else { (b - a + 1) as u64 })
    }
}

/// The pair of boxes B1, B2 together with the scaling parameters P1, P2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxPair {
    b1: Vec<Interval>,
    b2: Vec<Interval>,
    p1: f64,
    p2: f64,
}

impl BoxPair {
    pub fn new(b1: Vec<Interval>, b2: Vec<Interval>, p1: f64, p2: f64) -> Result<Self> {
        if b1.is_empty() || b2.is_empty() {
            return Err(Error::Invalid("boxes must have at least one side".into()));
        }
        if !(p1.is_finite() && p2.is_finite() && p1 >= 1.0 && p2 >= 1.0) {
            return Err(Error::Invalid(format!(
                "scaling parameters must satisfy P1, P2 >= 1 (got {p1}, {p2})"
            )));
        }
        Ok(BoxPair { b1, b2, p1, p2 })
    }

    /// Both boxes [-1/2, 1/2]^n.
    pub fn centered(n1: usize, n2: usize, p1: f64, p2: f64, kind: IntervalKind) -> Result<Self> {
        let iv = Interval::new(-0.5, 0.5, kind)?;
        Self::new(vec![iv; n1], vec![iv; n2], p1, p2)
    }

    /// Both boxes [0, 1)^n or [0, 1]^n depending on the kind.
    pub fn unit(n1: usize, n2: usize, p1: f64, p2: f64, kind: IntervalKind) -> Result<Self> {
        let iv = Interval::new(0.0, 1.0, kind)?;
        Self::new(vec![iv; n1], vec![iv; n2], p1, p2)
    }

    pub fn b1(&self) -> &[Interval] {
        &self.b1
    }
    pub fn b2(&self) -> &[Interval] {
        &self.b2
    }
    pub fn p1(&self) -> f64 {
        self.p1
    }
    pub fn p2(&self) -> f64 {
        self.p2
    }

    /// log P1 / log P2, the box asymmetry exponent.
    pub fn log_ratio(&self) -> f64 {
        self.p1.ln() / self.p2.ln()
    }

    pub fn volume(&self) -> f64 {
        self.b1
            .iter()
            .chain(&self.b2)
            .map(|iv| iv.length())
            .product()
    }

    /// Total number of integer pairs in the scaled boxes.
    pub fn pair_count(&self) -> Result<u128> {
        Ok(range_count(&self.x_ranges()?) * range_count(&self.y_ranges()?))
    }

    pub fn x_ranges(&self) -> Result<Vec<(i64, i64)>> {
        self.b1.iter().map(|iv| iv.integer_range(self.p1)).collect()
    }

    pub fn y_ranges(&self) -> Result<Vec<(i64, i64)>> {
        self.b2.iter().map(|iv| iv.integer_range(self.p2)).collect()
    }

    fn check_dims(&self, sys: &FormSystem) -> Result<()> {
        if self.b1.len() != sys.n1() || self.b2.len() != sys.n2() {
            return Err(Error::Invalid(format!(
                "box dimensions ({}, {}) do not match system ({}, {})",
                self.b1.len(),
                self.b2.len(),
                sys.n1(),
                sys.n2()
            )));
        }
        Ok(())
    }
}

/// Lexicographic iterator over the integer points of a scaled box.
pub struct BoxPoints {
    ranges: Vec<(i64, i64)>,
    current: Vec<i64>,
    done: bool,
}

impl BoxPoints {
    fn new(ranges: Vec<(i64, i64)>) -> Self {
        let empty = ranges.iter().any(|&(a, b)| b < a);
        let current = ranges.iter().map(|&(a, _)| a).collect();
        BoxPoints {
            ranges,
            current,
            done: empty,
        }
    }
}

impl Iterator for BoxPoints {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        // Odometer increment, last coordinate fastest.
        for i in (0..self.current.len()).rev() {
            if self.current[i] < self.ranges[i].1 {
                self.current[i] += 1;
                return Some(out);
            }
            self.current[i] = self.ranges[i].0;
        }
        self.done = true;
        Some(out)
    }
}

/// Integer points t with t/P in the given box, in lexicographic order.
pub fn enumerate_box_points(intervals: &[Interval], p: f64) -> Result<BoxPoints> {
    let ranges = intervals
        .iter()
        .map(|iv| iv.integer_range(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoxPoints::new(ranges))
}

pub(crate) fn range_count(ranges: &[(i64, i64)]) -> u128 {
    ranges
        .iter()
        .map(|&(a, b)| if b < a { 0u128 } else { (b - a + 1) as u128 })
        .product()
}

/// Depth-first walk over all points of `ranges`, calling `f` with each point.
pub(crate) fn for_each_point<F: FnMut(&[i64])>(ranges: &[(i64, i64)], f: &mut F) {
    if ranges.iter().any(|&(a, b)| b < a) {
        return;
    }
    let mut point: Vec<i64> = ranges.iter().map(|&(a, _)| a).collect();
    loop {
        f(&point);
        let mut i = ranges.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if point[i] < ranges[i].1 {
                point[i] += 1;
                break;
            }
            point[i] = ranges[i].0;
        }
    }
}

/// Counting strategy for `count_solutions_with`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Pick fibered when one variable group enters linearly.
    #[default]
    Auto,
    /// Plain double enumeration over both boxes.
    Generic,
    /// Enumerate the nonlinear group, solve the linear group per fiber.
    Fibered,
}

/// N(P1, P2): integer pairs (x, y) in the scaled boxes solving all forms.
pub fn count_solutions(sys: &FormSystem, bp: &BoxPair) -> Result<u128> {
    count_solutions_with(sys, bp, Strategy::Auto)
}

pub fn count_solutions_with(sys: &FormSystem, bp: &BoxPair, strategy: Strategy) -> Result<u128> {
    bp.check_dims(sys)?;
    let xr = bp.x_ranges()?;
    let yr = bp.y_ranges()?;
    match strategy {
        Strategy::Generic => Ok(count_generic(sys, &xr, &yr)),
        Strategy::Fibered => {
            if sys.d2() == 1 {
                Ok(count_fibered_over_x(sys, &xr, &yr))
            } else if sys.d1() == 1 {
                Ok(count_fibered_over_y(sys, &xr, &yr))
            } else {
                Err(Error::Invalid(
                    "fibered counting needs a linear group (d1 = 1 or d2 = 1)".into(),
                ))
            }
        }
        Strategy::Auto => {
            if sys.d2() == 1 {
                Ok(count_fibered_over_x(sys, &xr, &yr))
            } else if sys.d1() == 1 {
                Ok(count_fibered_over_y(sys, &xr, &yr))
            } else {
                Ok(count_generic(sys, &xr, &yr))
            }
        }
    }
}

fn count_generic(sys: &FormSystem, xr: &[(i64, i64)], yr: &[(i64, i64)]) -> u128 {
    if range_count(xr) == 0 || range_count(yr) == 0 {
        return 0;
    }
    let (a, b) = xr[0];
    (a..=b)
        .into_par_iter()
        .map(|v| {
            let mut pinned = xr.to_vec();
            pinned[0] = (v, v);
            let mut count = 0u128;
            for_each_point(&pinned, &mut |x| {
                for_each_point(yr, &mut |y| {
                    if (0..sys.r()).all(|i| sys.eval_scaled(i, x, y) == 0) {
                        count += 1;
                    }
                });
            });
            count
        })
        .sum()
}

/// d2 = 1: every form is linear in y for fixed x. Solve one row for a pivot
/// coordinate, enumerate the rest, verify the remaining rows.
fn count_fibered_over_x(sys: &FormSystem, xr: &[(i64, i64)], yr: &[(i64, i64)]) -> u128 {
    let y_total = range_count(yr);
    if range_count(xr) == 0 || y_total == 0 {
        return 0;
    }
    let (a, b) = xr[0];
    (a..=b)
        .into_par_iter()
        .map(|v| {
            let mut pinned = xr.to_vec();
            pinned[0] = (v, v);
            let mut count = 0u128;
            for_each_point(&pinned, &mut |x| {
                let rows = sys.y_linear_matrix(x).unwrap();
                count += count_linear_fiber(&rows, yr, y_total);
            });
            count
        })
        .sum()
}

fn count_fibered_over_y(sys: &FormSystem, xr: &[(i64, i64)], yr: &[(i64, i64)]) -> u128 {
    let x_total = range_count(xr);
    if x_total == 0 || range_count(yr) == 0 {
        return 0;
    }
    let (a, b) = yr[0];
    (a..=b)
        .into_par_iter()
        .map(|v| {
            let mut pinned = yr.to_vec();
            pinned[0] = (v, v);
            let mut count = 0u128;
            for_each_point(&pinned, &mut |y| {
                let rows = sys.x_linear_matrix(y).unwrap();
                count += count_linear_fiber(&rows, xr, x_total);
            });
            count
        })
        .sum()
}

/// Count integer z in the box ranges with rows * z = 0.
fn count_linear_fiber(rows: &[Vec<i128>], ranges: &[(i64, i64)], total: u128) -> u128 {
    let n = ranges.len();
    // Pivot: largest-magnitude coefficient over all rows.
    let mut pivot: Option<(usize, usize)> = None;
    for (i, row) in rows.iter().enumerate() {
        for (m, &c) in row.iter().enumerate() {
            if c != 0 && pivot.map_or(true, |(pi, pm)| rows[pi][pm].abs() < c.abs()) {
                pivot = Some((i, m));
            }
        }
    }
    let Some((pi, pm)) = pivot else {
        // All rows vanish identically on this fiber.
        return total;
    };
    let pc = rows[pi][pm];
    let free: Vec<usize> = (0..n).filter(|&m| m != pm).collect();
    let free_ranges: Vec<(i64, i64)> = free.iter().map(|&m| ranges[m]).collect();
    let mut count = 0u128;
    let mut z = vec![0i64; n];
    let mut body = |vals: &[i64]| {
        for (slot, &m) in free.iter().enumerate() {
            z[m] = vals[slot];
        }
        let s: i128 = free.iter().map(|&m| rows[pi][m] * z[m] as i128).sum();
        if s % pc != 0 {
            return;
        }
        let v = -s / pc;
        let (a, b) = ranges[pm];
        if v < a as i128 || v > b as i128 {
            return;
        }
        z[pm] = v as i64;
        for (i, row) in rows.iter().enumerate() {
            if i == pi {
                continue;
            }
            let t: i128 = (0..n).map(|m| row[m] * z[m] as i128).sum();
            if t != 0 {
                return;
            }
        }
        count += 1;
    };
    if free_ranges.is_empty() {
        body(&[]);
    } else {
        for_each_point(&free_ranges, &mut body);
    }
    count
}

/// Upper bound on |F_i| (scaled coefficients) over the scaled boxes, for all i.
pub fn max_abs_form_bound(sys: &FormSystem, bp: &BoxPair) -> Result<i128> {
    bp.check_dims(sys)?;
    let xr = bp.x_ranges()?;
    let yr = bp.y_ranges()?;
    let xmax: Vec<i128> = xr
        .iter()
        .map(|&(a, b)| (a.abs().max(b.abs())) as i128)
        .collect();
    let ymax: Vec<i128> = yr
        .iter()
        .map(|&(a, b)| (a.abs().max(b.abs())) as i128)
        .collect();
    Ok(sys.monomial_value_bound(&xmax, &ymax))
}
