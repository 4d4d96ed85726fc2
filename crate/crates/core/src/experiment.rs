//! Experiment orchestration: feasibility triage, the sigma pipeline run
//! once per config, per-entry counting against the predicted main term,
//! positivity witnesses, and report emission.
//!
//! Reports are deterministic for a fixed config and seed: wall-clock
//! timings are carried in memory for the CSV view but never serialized.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arcs::{choose_parameters, CircleParams};
use crate::config::{ConfigEcho, ExperimentConfig, ScheduleEntry};
use crate::counting::{count_solutions, BoxPair};
use crate::exact::{rank_mod_p, rational_to_f64};
use crate::forms::{Axis, FormSystem};
use crate::integral::{
    find_nonsingular_real_zero, schmidt_j, singular_integral_partial, JPartial,
    RealWitness, SchmidtResult,
};
use crate::local::{find_nonsingular_padic_zero, is_prime, primes_up_to, PadicSearch};
use crate::{Error, Result};

/// Largest prime whose nonsingular zero is searched for the report.
const WITNESS_PRIME_LIMIT: i64 = 13;
/// Flats examined per slice dimension by the codimension heuristic.
const CODIM_FLATS: usize = 16;
/// Work cap of the heuristic, in points per `samples` unit.
const CODIM_WORK_FACTOR: u128 = 4000;

/// Incidence counts for one slice dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceFrequency {
    pub dim: usize,
    pub hits: usize,
    pub flats: usize,
}

/// Advisory codimension estimate; never overrides declared values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodimEstimate {
    pub axis: String,
    pub modulus: i64,
    pub samples: u64,
    pub estimate: usize,
    /// Set when the scan hit its work cap before seeing the transition;
    /// the estimate is then only a lower bound.
    pub bounded_only: bool,
    pub frequencies: Vec<SliceFrequency>,
    pub note: String,
}

fn axis_deficient(sys: &FormSystem, x: &[i64], y: &[i64], axis: Axis, p: i64) -> bool {
    let jac = sys.jacobian_mod_p(x, y, axis, p);
    rank_mod_p(&jac, p) < sys.r()
}

/// Estimates codim of the rank-deficiency locus of the chosen axis by
/// incidence of random affine flats of growing dimension: a random k-flat
/// meets a codimension-c locus with probability near 1 for k >= c and near
/// deg/p for k = c - 1, so the first dimension whose incidence frequency
/// crosses 1/2 estimates c. Output is HEURISTIC, declared codims stay
/// authoritative.
pub fn estimate_codimension(
    sys: &FormSystem,
    axis: Axis,
    samples: u64,
    modulus: i64,
) -> Result<CodimEstimate> {
    if samples < 1000 {
        return Err(Error::Invalid(format!(
            "codimension heuristic needs at least 1000 samples, got {samples}"
        )));
    }
    if !is_prime(modulus) {
        return Err(Error::Invalid(format!("modulus {modulus} is not prime")));
    }
    let p = modulus;
    let n = sys.n1() + sys.n2();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0D1_0000 ^ (p as u64) << 2 ^ axis as u64);
    let split = |pt: &[i64]| -> (Vec<i64>, Vec<i64>) {
        (pt[..sys.n1()].to_vec(), pt[sys.n1()..].to_vec())
    };

    let mut frequencies = Vec::new();
    let work_cap = CODIM_WORK_FACTOR.saturating_mul(samples as u128);

    // Dimension 0: plain point sampling.
    let mut hits = 0usize;
    for _ in 0..samples {
        let pt: Vec<i64> = (0..n).map(|_| rng.gen_range(0..p)).collect();
        let (x, y) = split(&pt);
        if axis_deficient(sys, &x, &y, axis, p) {
            hits += 1;
        }
    }
    frequencies.push(SliceFrequency {
        dim: 0,
        hits,
        flats: samples as usize,
    });
    let note = format!(
        "HEURISTIC incidence-threshold estimate mod {p}; declared codimensions are authoritative"
    );
    if hits * 2 >= samples as usize {
        return Ok(CodimEstimate {
            axis: axis_name(axis),
            modulus: p,
            samples,
            estimate: 0,
            bounded_only: false,
            frequencies,
            note,
        });
    }

    let mut bounded_only = true;
    let mut estimate = n + 1;
    for k in 1..=n {
        let flat_points = (p as u128).pow(k as u32);
        if flat_points.saturating_mul(CODIM_FLATS as u128) > work_cap {
            estimate = k;
            break;
        }
        let mut hits = 0usize;
        for _ in 0..CODIM_FLATS {
            let base: Vec<i64> = (0..n).map(|_| rng.gen_range(0..p)).collect();
            let dirs: Vec<Vec<i64>> = (0..k)
                .map(|_| (0..n).map(|_| rng.gen_range(0..p)).collect())
                .collect();
            if flat_contains_deficient(sys, axis, p, &base, &dirs) {
                hits += 1;
            }
        }
        frequencies.push(SliceFrequency {
            dim: k,
            hits,
            flats: CODIM_FLATS,
        });
        if hits * 2 >= CODIM_FLATS {
            estimate = k;
            bounded_only = false;
            break;
        }
        if k == n {
            estimate = n;
            bounded_only = false;
        }
    }
    Ok(CodimEstimate {
        axis: axis_name(axis),
        modulus: p,
        samples,
        estimate,
        bounded_only,
        frequencies,
        note,
    })
}

fn axis_name(axis: Axis) -> String {
    match axis {
        Axis::X => "x".into(),
        Axis::Y => "y".into(),
    }
}

/// Full scan of the affine flat base + span(dirs) mod p, early exit on hit.
fn flat_contains_deficient(
    sys: &FormSystem,
    axis: Axis,
    p: i64,
    base: &[i64],
    dirs: &[Vec<i64>],
) -> bool {
    let n = base.len();
    let k = dirs.len();
    let mut t = vec![0i64; k];
    let mut pt = vec![0i64; n];
    loop {
        for j in 0..n {
            let mut v = base[j];
            for (i, d) in dirs.iter().enumerate() {
                v = (v + t[i] * d[j]) % p;
            }
            pt[j] = v;
        }
        let (x, y) = (&pt[..sys.n1()], &pt[sys.n1()..]);
        if axis_deficient(sys, x, y, axis, p) {
            return true;
        }
        let mut carry = 0;
        while carry < k {
            t[carry] += 1;
            if t[carry] < p {
                break;
            }
            t[carry] = 0;
            carry += 1;
        }
        if carry == k {
            return false;
        }
    }
}

/// The q-sum truncation of the arithmetic factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesBlock {
    pub q_max: i64,
    /// Exact rational partial sum.
    pub s_q: String,
    pub s_q_f64: f64,
}

/// Oscillatory cross-check of the hat-weight limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCheckBlock {
    pub j_phi: JPartial,
    /// |J(Phi) - J~|, comparable against the two error estimates.
    pub gap: f64,
}

/// Per-entry feasibility triage of the analytic parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityEntry {
    pub p1: f64,
    pub p2: f64,
    pub params: Option<CircleParams>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryReport {
    pub p1: f64,
    pub p2: f64,
    pub b: f64,
    pub b_below_1: bool,
    pub feasible: bool,
    pub n: Option<u128>,
    pub main_term: Option<f64>,
    /// N / main term; present only when the main term is positive.
    pub ratio: Option<f64>,
    pub diagnostics: Vec<String>,
    /// In-memory only; excluded from the serialized report so reports are
    /// byte-identical across runs.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessBlock {
    pub padic: Vec<PadicSearch>,
    pub all_padic_certified: bool,
    pub real: Option<RealWitness>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionReport {
    pub config: ConfigEcho,
    /// "theorem" when every entry admits analytic parameters,
    /// "unconditional comparison" otherwise.
    pub mode: String,
    /// Set when any stage was skipped or truncated by a budget.
    pub partial: bool,
    pub warnings: Vec<String>,
    pub feasibility: Vec<FeasibilityEntry>,
    pub series: Option<SeriesBlock>,
    pub schmidt: Option<SchmidtResult>,
    pub sigma: Option<f64>,
    pub cross_check: Option<CrossCheckBlock>,
    pub codim_checks: Vec<CodimEstimate>,
    pub entries: Vec<EntryReport>,
    pub witnesses: WitnessBlock,
}

pub const CSV_HEADER: &str = "p1,p2,b,N,main_term,ratio,sigma,S_Q,J_tilde,wall_time_s";

impl PredictionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("report: {e}")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.entries {
            let row = [
                e.p1.to_string(),
                e.p2.to_string(),
                e.b.to_string(),
                e.n.map(|n| n.to_string()).unwrap_or_default(),
                opt(e.main_term),
                opt(e.ratio),
                opt(self.sigma),
                opt(self.series.as_ref().map(|s| s.s_q_f64)),
                opt(self.schmidt.as_ref().map(|s| s.value)),
                format!("{:.3}", e.wall_time_s),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// K = min declared codim / 2^dtilde, the budget entering the feasibility
/// conditions.
pub fn codim_budget(cfg: &ExperimentConfig) -> Option<f64> {
    let (cx, cy) = (cfg.codim_x?, cfg.codim_y?);
    let scale = (1u64 << cfg.system.dtilde()) as f64;
    Some(cx.min(cy) as f64 / scale)
}

/// Estimated enumeration work for one schedule entry, used against the
/// counting budget. Fibered strategies pay one reduced fiber per point of
/// the enumerated group rather than the full product.
fn counting_work(sys: &FormSystem, bp: &BoxPair) -> Result<u128> {
    let xs: u128 = bp
        .x_ranges()?
        .iter()
        .map(|&(a, b)| (b - a + 1) as u128)
        .product();
    let ys: u128 = bp
        .y_ranges()?
        .iter()
        .map(|&(a, b)| (b - a + 1) as u128)
        .product();
    let fiber = |total: u128, sides: usize| total / (total as f64).powf(1.0 / sides as f64).max(1.0) as u128;
    if sys.d2() == 1 {
        Ok(xs.saturating_mul(fiber(ys, sys.n2()).max(1)))
    } else if sys.d1() == 1 {
        Ok(ys.saturating_mul(fiber(xs, sys.n1()).max(1)))
    } else {
        Ok(xs.saturating_mul(ys))
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<PredictionReport> {
    let sys = &cfg.system;
    let mut warnings = Vec::new();
    let mut partial = false;

    // Stage 1: per-entry analytic parameter triage.
    let budget = codim_budget(cfg);
    if budget.is_none() {
        warnings.push(
            "codim_x/codim_y not declared; feasibility unknown, running in \
             unconditional comparison mode"
                .into(),
        );
    }
    let feasibility: Vec<FeasibilityEntry> = cfg
        .schedule
        .iter()
        .map(|e| {
            let p = e.p1.powi(sys.d1() as i32) * e.p2.powi(sys.d2() as i32);
            let attempt = budget.ok_or_else(|| {
                Error::Infeasible("codimensions not declared".into())
            });
            let params = attempt.and_then(|k| {
                choose_parameters(sys.r(), sys.d1(), sys.d2(), e.b, k, p)
            });
            match params {
                Ok(params) => FeasibilityEntry {
                    p1: e.p1,
                    p2: e.p2,
                    params: Some(params),
                    reason: None,
                },
                Err(err) => FeasibilityEntry {
                    p1: e.p1,
                    p2: e.p2,
                    params: None,
                    reason: Some(err.to_string()),
                },
            }
        })
        .collect();
    let all_feasible = feasibility.iter().all(|f| f.params.is_some());
    let mode = if all_feasible {
        "theorem"
    } else {
        "unconditional comparison"
    };
    if !all_feasible && budget.is_some() {
        for f in feasibility.iter().filter(|f| f.reason.is_some()) {
            warnings.push(format!(
                "entry ({}, {}): {}; downgrading to unconditional comparison",
                f.p1,
                f.p2,
                f.reason.as_deref().unwrap_or("")
            ));
        }
    }

    // Stage 2: arithmetic factor, exact in q.
    let series = match crate::local::singular_series_partial(sys, cfg.q_max) {
        Ok(sum) => Some(SeriesBlock {
            q_max: cfg.q_max,
            s_q: sum.to_string(),
            s_q_f64: rational_to_f64(&sum),
        }),
        Err(Error::Budget(msg)) => {
            warnings.push(format!("arithmetic factor skipped: {msg}"));
            partial = true;
            None
        }
        Err(other) => return Err(other),
    };

    // Stage 3: hat-weight limit, computed once.
    let unscaled = BoxPair::new(cfg.b1.clone(), cfg.b2.clone(), 2.0, 2.0)?;
    let schmidt = match schmidt_j(sys, cfg.t_max, &unscaled, &cfg.quadrature) {
        Ok(res) => {
            if res.degenerate {
                warnings.push(
                    "hat-weight limit degenerate (a form vanishes identically); \
                     sigma unavailable"
                        .into(),
                );
            }
            if !res.converged && !res.degenerate {
                warnings.push(format!(
                    "hat-weight ladder unconverged (error estimate {:.3e})",
                    res.error_estimate
                ));
            }
            Some(res)
        }
        Err(Error::Budget(msg)) => {
            warnings.push(format!("hat-weight integral skipped: {msg}"));
            partial = true;
            None
        }
        Err(other) => return Err(other),
    };
    let sigma = match (&series, &schmidt) {
        (Some(s), Some(j)) if !j.degenerate => Some(s.s_q_f64 * j.value),
        _ => None,
    };

    // Stage 4: optional oscillatory cross-check.
    let cross_check = if cfg.cross_check_j {
        match singular_integral_partial(sys, cfg.phi, &unscaled, &cfg.quadrature) {
            Ok(j_phi) => {
                let gap = schmidt
                    .as_ref()
                    .map(|s| (j_phi.value - s.value).abs())
                    .unwrap_or(f64::NAN);
                Some(CrossCheckBlock { j_phi, gap })
            }
            Err(Error::Budget(msg)) | Err(Error::Invalid(msg)) => {
                warnings.push(format!("oscillatory cross-check skipped: {msg}"));
                partial = true;
                None
            }
            Err(other) => return Err(other),
        }
    } else {
        None
    };

    // Stage 5: advisory codimension heuristic.
    let mut codim_checks = Vec::new();
    if cfg.check_codims {
        for (axis, declared) in [(Axis::X, cfg.codim_x), (Axis::Y, cfg.codim_y)] {
            let est = estimate_codimension(sys, axis, 10_000, 101)?;
            if let Some(d) = declared {
                if d != est.estimate {
                    warnings.push(format!(
                        "declared codim_{} = {d} but the heuristic estimates {}{}; \
                         declared value kept",
                        est.axis,
                        est.estimate,
                        if est.bounded_only { "+" } else { "" }
                    ));
                }
            }
            codim_checks.push(est);
        }
    }

    // Stage 6: counts against the predicted main term.
    let exps = (
        sys.n1() as f64 - (sys.r() * sys.d1()) as f64,
        sys.n2() as f64 - (sys.r() * sys.d2()) as f64,
    );
    let entries: Vec<EntryReport> = cfg
        .schedule
        .iter()
        .zip(&feasibility)
        .map(|(e, feas)| {
            run_entry(cfg, e, feas, sigma, exps, &mut warnings, &mut partial)
        })
        .collect::<Result<_>>()?;

    // Stage 7: positivity witnesses.
    let mut padic = Vec::new();
    for p in primes_up_to(WITNESS_PRIME_LIMIT) {
        match find_nonsingular_padic_zero(sys, p, 1) {
            Ok(search) => padic.push(search),
            Err(Error::Budget(msg)) => {
                warnings.push(format!("p-adic witness search at p = {p} skipped: {msg}"));
                partial = true;
            }
            Err(other) => return Err(other),
        }
    }
    let all_padic_certified = !padic.is_empty() && padic.iter().all(|s| s.certified);
    let real = find_nonsingular_real_zero(sys, &unscaled);

    Ok(PredictionReport {
        config: cfg.echo(),
        mode: mode.into(),
        partial,
        warnings,
        feasibility,
        series,
        schmidt,
        sigma,
        cross_check,
        codim_checks,
        entries,
        witnesses: WitnessBlock {
            padic,
            all_padic_certified,
            real,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn run_entry(
    cfg: &ExperimentConfig,
    e: &ScheduleEntry,
    feas: &FeasibilityEntry,
    sigma: Option<f64>,
    exps: (f64, f64),
    warnings: &mut Vec<String>,
    partial: &mut bool,
) -> Result<EntryReport> {
    let sys = &cfg.system;
    let mut diagnostics = Vec::new();
    let start = Instant::now();
    let bp = BoxPair::new(cfg.b1.clone(), cfg.b2.clone(), e.p1, e.p2)?;
    let work = counting_work(sys, &bp)?;
    let n = if work > cfg.count_budget {
        let msg = format!(
            "counting skipped: estimated work {work} exceeds budget {}",
            cfg.count_budget
        );
        diagnostics.push(msg.clone());
        warnings.push(format!("entry ({}, {}): {msg}", e.p1, e.p2));
        *partial = true;
        None
    } else {
        Some(count_solutions(sys, &bp)?)
    };

    let main_term = sigma.map(|s| {
        let main = s * e.p1.powf(exps.0) * e.p2.powf(exps.1);
        // Same quantity in the identity form N ~ P1^n1 P2^n2 P^-R S J.
        let p = e.p1.powi(sys.d1() as i32) * e.p2.powi(sys.d2() as i32);
        let ident = s
            * e.p1.powi(sys.n1() as i32)
            * e.p2.powi(sys.n2() as i32)
            * p.powi(-(sys.r() as i32));
        if main != 0.0 {
            assert!(
                ((main - ident) / main).abs() <= 1e-12,
                "main-term identity violated: {main} vs {ident}"
            );
        }
        main
    });
    if sigma.is_none() {
        diagnostics.push("main term unavailable: sigma was not computed".into());
    }
    let ratio = match (n, main_term) {
        (Some(n), Some(m)) if m > 0.0 && m.is_finite() => Some(n as f64 / m),
        (Some(_), Some(m)) => {
            diagnostics.push(format!(
                "ratio omitted: main term {m} is not positive"
            ));
            None
        }
        _ => None,
    };
    if e.b_below_1 {
        diagnostics.push(format!(
            "entry runs outside the b >= 1 hypothesis (b = {:.4})",
            e.b
        ));
    }
    Ok(EntryReport {
        p1: e.p1,
        p2: e.p2,
        b: e.b,
        b_below_1: e.b_below_1,
        feasible: feas.params.is_some(),
        n,
        main_term,
        ratio,
        diagnostics,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::forms::samples::{dot3, squares2};
    use crate::forms::MonomialSpec;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::One;

    fn zero_form() -> FormSystem {
        let one = BigRational::from_integer(BigInt::one());
        FormSystem::new(
            1,
            1,
            1,
            1,
            1,
            vec![
                MonomialSpec {
                    form: 0,
                    coeff: one.clone(),
                    xexp: vec![1],
                    yexp: vec![1],
                },
                MonomialSpec {
                    form: 0,
                    coeff: -one,
                    xexp: vec![1],
                    yexp: vec![1],
                },
            ],
        )
        .unwrap()
    }

    const SYS_A: &str = r#"
        [system]
        r = 1
        n1 = 3
        n2 = 3
        d1 = 1
        d2 = 1
        [[system.monomials]]
        form = 1
        coeff = 1
        xexp = [1, 0, 0]
        yexp = [1, 0, 0]
        [[system.monomials]]
        form = 1
        coeff = 1
        xexp = [0, 1, 0]
        yexp = [0, 1, 0]
        [[system.monomials]]
        form = 1
        coeff = 1
        xexp = [0, 0, 1]
        yexp = [0, 0, 1]

        [boxes]
        kind = "half_open"
        x = [[-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]]
        y = [[-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]]

        [[schedule]]
        p1 = 8.0
        p2 = 8.0
        [[schedule]]
        p1 = 16.0
        p2 = 16.0

        [parameters]
        q_max = 20
        t_max = 8.0
        codim_x = 3
        codim_y = 3
        quadrature_order = 5
        seed = 1
    "#;

    #[test]
    fn codim_heuristic_matches_known_loci() {
        let est = estimate_codimension(&dot3(), Axis::X, 10_000, 101).unwrap();
        assert_eq!(est.estimate, 3, "{est:?}");
        assert!(!est.bounded_only);
        assert!(est.note.starts_with("HEURISTIC"));

        let bx = estimate_codimension(&squares2(), Axis::X, 10_000, 101).unwrap();
        assert_eq!(bx.estimate, 2, "{bx:?}");
        let by = estimate_codimension(&squares2(), Axis::Y, 10_000, 101).unwrap();
        assert_eq!(by.estimate, 2, "{by:?}");

        let zero = estimate_codimension(&zero_form(), Axis::X, 1000, 7).unwrap();
        assert_eq!(zero.estimate, 0);
        assert_eq!(zero.frequencies[0].hits, zero.frequencies[0].flats);
    }

    #[test]
    fn codim_heuristic_rejects_bad_inputs() {
        assert!(estimate_codimension(&dot3(), Axis::X, 999, 101).is_err());
        let err = estimate_codimension(&dot3(), Axis::X, 1000, 100).unwrap_err();
        assert!(err.to_string().contains("not prime"), "{err}");
    }

    #[test]
    fn sys_a_run_reports_theorem_mode() {
        let cfg = parse_config(SYS_A).unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.mode, "theorem");
        assert!(!report.partial);
        assert!(report.feasibility.iter().all(|f| f.params.is_some()));
        let series = report.series.as_ref().unwrap();
        assert_eq!(series.q_max, 20);
        assert!(series.s_q.contains('/'));
        assert!(report.sigma.unwrap() > 0.0);

        assert_eq!(report.entries.len(), 2);
        // Half-open boxes at P = 16: exact solution count
        assert_eq!(report.entries[1].n, Some(246_955));
        for e in &report.entries {
            let ratio = e.ratio.unwrap();
            assert!((0.5..1.5).contains(&ratio), "ratio {ratio}");
            assert!(e.feasible);
            assert!(e.wall_time_s >= 0.0);
        }
        // witnesses certify for every prime up to the limit
        assert_eq!(report.witnesses.padic.len(), 6);
        assert!(report.witnesses.all_padic_certified);
        let real = report.witnesses.real.as_ref().unwrap();
        assert!(real.residual < crate::integral::REAL_RESIDUAL_TOL);
    }

    #[test]
    fn reports_are_deterministic_and_round_trip() {
        let cfg = parse_config(SYS_A).unwrap();
        let a = run_experiment(&cfg).unwrap().to_json();
        let b = run_experiment(&cfg).unwrap().to_json();
        assert_eq!(a, b);
        let parsed = PredictionReport::from_json(&a).unwrap();
        assert_eq!(parsed.to_json(), a);
    }

    #[test]
    fn infeasible_system_downgrades_with_warning() {
        // bidegree (2,1) with codim 2 has K = 1, far below the threshold
        let text = r#"
            [system]
            r = 1
            n1 = 2
            n2 = 2
            d1 = 2
            d2 = 1
            [[system.monomials]]
            form = 1
            coeff = 1
            xexp = [2, 0]
            yexp = [1, 0]
            [[system.monomials]]
            form = 1
            coeff = 1
            xexp = [0, 2]
            yexp = [0, 1]

            [boxes]
            x = [[-0.5, 0.5], [-0.5, 0.5]]
            y = [[-0.5, 0.5], [-0.5, 0.5]]

            [[schedule]]
            p1 = 5.0
            p2 = 5.0

            [parameters]
            q_max = 6
            t_max = 64.0
            codim_x = 2
            codim_y = 2
            quadrature_order = 4
        "#;
        let cfg = parse_config(text).unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.mode, "unconditional comparison");
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("unconditional comparison")), "{:?}", report.warnings);
        let feas = &report.feasibility[0];
        assert!(feas.params.is_none());
        assert!(feas.reason.as_deref().unwrap().contains("codimension budget"));
        // counts and sigma still emitted
        assert!(report.entries[0].n.is_some());
        assert!(report.sigma.is_some());
        assert!(report.entries[0].ratio.is_some());
    }

    #[test]
    fn zero_form_run_omits_ratio_with_diagnostic() {
        let text = r#"
            [system]
            r = 1
            n1 = 1
            n2 = 1
            d1 = 1
            d2 = 1
            [[system.monomials]]
            form = 1
            coeff = 1
            xexp = [1]
            yexp = [1]
            [[system.monomials]]
            form = 1
            coeff = -1
            xexp = [1]
            yexp = [1]

            [boxes]
            x = [[-0.5, 0.5]]
            y = [[-0.5, 0.5]]

            [[schedule]]
            p1 = 4.0
            p2 = 4.0

            [parameters]
            q_max = 4
            t_max = 4.0
            codim_x = 0
            codim_y = 0
            quadrature_order = 4
        "#;
        let cfg = parse_config(text).unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.mode, "unconditional comparison");
        assert!(report.schmidt.as_ref().unwrap().degenerate);
        assert!(report.sigma.is_none());
        let entry = &report.entries[0];
        assert!(entry.n.is_some());
        assert!(entry.ratio.is_none());
        assert!(entry
            .diagnostics
            .iter()
            .any(|d| d.contains("sigma")), "{:?}", entry.diagnostics);
        assert!(report.witnesses.real.is_none());
        assert!(!report.witnesses.all_padic_certified);
    }

    #[test]
    fn csv_has_pinned_columns_and_blank_gaps() {
        let cfg = parse_config(SYS_A).unwrap();
        let report = run_experiment(&cfg).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "p1,p2,b,N,main_term,ratio,sigma,S_Q,J_tilde,wall_time_s"
        );
        assert_eq!(csv.lines().count(), 1 + report.entries.len());
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 10);
        assert!(first.starts_with("8,8,1,"));
    }

    #[test]
    fn codim_mismatch_warns_but_keeps_declared_value() {
        let text = SYS_A
            .replace("codim_x = 3", "codim_x = 2")
            .replace("seed = 1", "seed = 1\n        check_codims = true");
        let cfg = parse_config(&text).unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.codim_checks.len(), 2);
        assert_eq!(report.codim_checks[0].estimate, 3);
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("declared codim_x = 2") && w.contains("estimates 3")));
        // declared 2 gives K = 2, right at the infeasibility threshold
        assert_eq!(report.mode, "unconditional comparison");
    }

    #[test]
    fn count_budget_produces_partial_report() {
        let text = SYS_A.replace("seed = 1", "seed = 1\n        count_budget = 10");
        let cfg = parse_config(&text).unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert!(report.partial);
        assert!(report.entries.iter().all(|e| e.n.is_none()));
        assert!(report.entries.iter().all(|e| e.ratio.is_none()));
        assert!(report
            .warnings
            .iter()
            .any(|w| w.contains("counting skipped")));
        // the rest of the report still stands
        assert!(report.sigma.is_some());
        assert!(report.witnesses.all_padic_certified);
    }
}
