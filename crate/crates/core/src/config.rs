//! Experiment configuration: a structured text file with tables
//! `[system]`, `[boxes]`, `[schedule]`, `[parameters]`, parsed and
//! validated into a fully materialized [`ExperimentConfig`].
//!
//! Every default is filled in at load time and echoed into reports, so a
//! report alone reproduces the run.

use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::counting::{Interval, IntervalKind};
use crate::forms::{FormSystem, MonomialSpec};
use crate::integral::QuadratureSpec;
use crate::{Error, Result};

pub const DEFAULT_Q_MAX: i64 = 50;
pub const DEFAULT_T_MAX: f64 = 32.0;
pub const DEFAULT_PHI: f64 = 16.0;
/// Cap on estimated enumeration work for one schedule entry.
pub const DEFAULT_COUNT_BUDGET: u128 = 10_000_000_000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    boxes: RawBoxes,
    schedule: Vec<RawEntry>,
    #[serde(default)]
    parameters: RawParameters,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    r: usize,
    n1: usize,
    n2: usize,
    d1: usize,
    d2: usize,
    monomials: Vec<RawMonomial>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMonomial {
    /// 1-based form index as written in the file.
    form: usize,
    coeff: CoeffSpec,
    xexp: Vec<u32>,
    yexp: Vec<u32>,
}

/// Coefficients are integers or exact rational strings like "-3/4".
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CoeffSpec {
    Int(i64),
    Text(String),
}

impl CoeffSpec {
    fn to_rational(&self) -> Result<BigRational> {
        match self {
            CoeffSpec::Int(v) => Ok(BigRational::from_integer(BigInt::from(*v))),
            CoeffSpec::Text(s) => BigRational::from_str(s.trim()).map_err(|e| {
                Error::Config(format!("bad coefficient {s:?}: {e}"))
            }),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoxes {
    /// "closed" or "half_open"; closed when omitted.
    kind: Option<String>,
    x: Vec<[f64; 2]>,
    y: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    p1: f64,
    p2: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawParameters {
    q_max: Option<i64>,
    t_max: Option<f64>,
    phi: Option<f64>,
    codim_x: Option<usize>,
    codim_y: Option<usize>,
    check_codims: Option<bool>,
    cross_check_j: Option<bool>,
    seed: Option<u64>,
    quadrature_order: Option<usize>,
    quadrature_budget: Option<u64>,
    count_budget: Option<u64>,
    allow_b_below_1: Option<bool>,
}

/// One (P1, P2) pair with its asymmetry exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub p1: f64,
    pub p2: f64,
    /// log P1 / log P2.
    pub b: f64,
    /// Set when the entry runs outside the b >= 1 hypothesis.
    pub b_below_1: bool,
}

/// Fully validated configuration with all defaults materialized.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub system: FormSystem,
    pub b1: Vec<Interval>,
    pub b2: Vec<Interval>,
    pub kind: IntervalKind,
    pub schedule: Vec<ScheduleEntry>,
    /// Truncation of the q-sum in the arithmetic factor of sigma.
    pub q_max: i64,
    /// Largest smoothing parameter in the hat-weight ladder.
    pub t_max: f64,
    /// Truncation for the oscillatory cross-check integral.
    pub phi: f64,
    /// User-declared codimension of the x-side rank-deficiency locus.
    pub codim_x: Option<usize>,
    pub codim_y: Option<usize>,
    /// Run the sampling codimension heuristic and warn on mismatch.
    pub check_codims: bool,
    /// Also compute the oscillatory integral and report the gap.
    pub cross_check_j: bool,
    pub seed: u64,
    pub quadrature: QuadratureSpec,
    pub count_budget: u128,
    pub allow_b_below_1: bool,
}

/// Settings echo embedded in every report; scalar-only and serializable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub r: usize,
    pub n1: usize,
    pub n2: usize,
    pub d1: usize,
    pub d2: usize,
    pub monomials: Vec<MonomialEcho>,
    pub box_kind: String,
    pub box_x: Vec<[f64; 2]>,
    pub box_y: Vec<[f64; 2]>,
    pub q_max: i64,
    pub t_max: f64,
    pub phi: f64,
    pub codim_x: Option<usize>,
    pub codim_y: Option<usize>,
    pub check_codims: bool,
    pub cross_check_j: bool,
    pub seed: u64,
    pub quadrature_order: usize,
    pub quadrature_budget: u64,
    pub count_budget: u64,
    pub allow_b_below_1: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonomialEcho {
    /// 1-based, matching the file convention.
    pub form: usize,
    pub coeff: String,
    pub xexp: Vec<u32>,
    pub yexp: Vec<u32>,
}

impl ExperimentConfig {
    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            r: self.system.r(),
            n1: self.system.n1(),
            n2: self.system.n2(),
            d1: self.system.d1(),
            d2: self.system.d2(),
            monomials: self
                .system
                .monomial_specs()
                .iter()
                .map(|m| MonomialEcho {
                    form: m.form + 1,
                    coeff: m.coeff.to_string(),
                    xexp: m.xexp.clone(),
                    yexp: m.yexp.clone(),
                })
                .collect(),
            box_kind: match self.kind {
                IntervalKind::Closed => "closed".into(),
                IntervalKind::HalfOpen => "half_open".into(),
            },
            box_x: self.b1.iter().map(|iv| [iv.lo(), iv.hi()]).collect(),
            box_y: self.b2.iter().map(|iv| [iv.lo(), iv.hi()]).collect(),
            q_max: self.q_max,
            t_max: self.t_max,
            phi: self.phi,
            codim_x: self.codim_x,
            codim_y: self.codim_y,
            check_codims: self.check_codims,
            cross_check_j: self.cross_check_j,
            seed: self.seed,
            quadrature_order: self.quadrature.order,
            quadrature_budget: self.quadrature.budget.min(u64::MAX as u128) as u64,
            count_budget: self.count_budget.min(u64::MAX as u128) as u64,
            allow_b_below_1: self.allow_b_below_1,
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    let monomials: Vec<MonomialSpec> = raw
        .system
        .monomials
        .iter()
        .enumerate()
        .map(|(k, m)| {
            if m.form == 0 || m.form > raw.system.r {
                return Err(Error::Config(format!(
                    "monomial {}: form index {} outside 1..={}",
                    k + 1,
                    m.form,
                    raw.system.r
                )));
            }
            Ok(MonomialSpec {
                form: m.form - 1,
                coeff: m.coeff.to_rational()?,
                xexp: m.xexp.clone(),
                yexp: m.yexp.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let system = FormSystem::new(
        raw.system.r,
        raw.system.n1,
        raw.system.n2,
        raw.system.d1,
        raw.system.d2,
        monomials,
    )
    .map_err(|e| Error::Config(format!("[system]: {e}")))?;

    let kind = match raw.boxes.kind.as_deref() {
        None | Some("closed") => IntervalKind::Closed,
        Some("half_open") => IntervalKind::HalfOpen,
        Some(other) => {
            return Err(Error::Config(format!(
                "boxes.kind {other:?} is neither \"closed\" nor \"half_open\""
            )))
        }
    };
    let build = |pairs: &[[f64; 2]], label: &str, want: usize| -> Result<Vec<Interval>> {
        if pairs.len() != want {
            return Err(Error::Config(format!(
                "boxes.{label} has {} sides, system wants {want}",
                pairs.len()
            )));
        }
        pairs
            .iter()
            .enumerate()
            .map(|(j, &[lo, hi])| {
                Interval::new(lo, hi, kind).map_err(|e| {
                    Error::Config(format!("boxes.{label}[{}]: {e}", j + 1))
                })
            })
            .collect()
    };
    let b1 = build(&raw.boxes.x, "x", raw.system.n1)?;
    let b2 = build(&raw.boxes.y, "y", raw.system.n2)?;

    if raw.schedule.is_empty() {
        return Err(Error::Config("schedule is empty".into()));
    }
    let allow_b_below_1 = raw.parameters.allow_b_below_1.unwrap_or(false);
    let schedule: Vec<ScheduleEntry> = raw
        .schedule
        .iter()
        .enumerate()
        .map(|(k, e)| {
            if !(e.p1 > 1.0 && e.p2 > 1.0 && e.p1.is_finite() && e.p2.is_finite()) {
                return Err(Error::Config(format!(
                    "schedule entry {}: need P1, P2 > 1, got ({}, {})",
                    k + 1,
                    e.p1,
                    e.p2
                )));
            }
            let b = e.p1.ln() / e.p2.ln();
            let below = b < 1.0;
            if below && !allow_b_below_1 {
                return Err(Error::Config(format!(
                    "schedule entry {}: P1 = {} < P2 = {} gives b = {b:.4} < 1; \
                     set parameters.allow_b_below_1 to run anyway",
                    k + 1,
                    e.p1,
                    e.p2
                )));
            }
            Ok(ScheduleEntry {
                p1: e.p1,
                p2: e.p2,
                b,
                b_below_1: below,
            })
        })
        .collect::<Result<_>>()?;

    let p = &raw.parameters;
    let q_max = p.q_max.unwrap_or(DEFAULT_Q_MAX);
    if q_max < 1 {
        return Err(Error::Config(format!("parameters.q_max = {q_max} < 1")));
    }
    let t_max = p.t_max.unwrap_or(DEFAULT_T_MAX);
    let phi = p.phi.unwrap_or(DEFAULT_PHI);
    if !(t_max > 0.0 && t_max.is_finite() && phi > 0.0 && phi.is_finite()) {
        return Err(Error::Config(format!(
            "parameters.t_max = {t_max} and parameters.phi = {phi} must be positive"
        )));
    }
    for (label, codim) in [("codim_x", p.codim_x), ("codim_y", p.codim_y)] {
        if let Some(c) = codim {
            if c > raw.system.n1 + raw.system.n2 {
                return Err(Error::Config(format!(
                    "parameters.{label} = {c} exceeds the ambient dimension {}",
                    raw.system.n1 + raw.system.n2
                )));
            }
        }
    }
    let mut quadrature = QuadratureSpec::default();
    if let Some(order) = p.quadrature_order {
        quadrature.order = order;
    }
    if let Some(budget) = p.quadrature_budget {
        quadrature.budget = budget as u128;
    }
    quadrature
        .validate()
        .map_err(|e| Error::Config(format!("[parameters]: {e}")))?;

    Ok(ExperimentConfig {
        system,
        b1,
        b2,
        kind,
        schedule,
        q_max,
        t_max,
        phi,
        codim_x: p.codim_x,
        codim_y: p.codim_y,
        check_codims: p.check_codims.unwrap_or(false),
        cross_check_j: p.cross_check_j.unwrap_or(false),
        seed: p.seed.unwrap_or(0),
        quadrature,
        count_budget: p.count_budget.map_or(DEFAULT_COUNT_BUDGET, |b| b as u128),
        allow_b_below_1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
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
        x = [[-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]]
        y = [[-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]]

        [[schedule]]
        p1 = 8.0
        p2 = 8.0
    "#;

    #[test]
    fn minimal_config_materializes_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.q_max, 50);
        assert_eq!(cfg.t_max, 32.0);
        assert_eq!(cfg.phi, 16.0);
        assert_eq!(cfg.kind, IntervalKind::Closed);
        assert_eq!(cfg.seed, 0);
        assert!(!cfg.check_codims);
        assert!(!cfg.allow_b_below_1);
        assert_eq!(cfg.schedule.len(), 1);
        assert!((cfg.schedule[0].b - 1.0).abs() < 1e-12);
        assert_eq!(cfg.system.r(), 1);
        assert_eq!(cfg.system.n1(), 3);
        let echo = cfg.echo();
        assert_eq!(echo.monomials.len(), 3);
        assert_eq!(echo.monomials[0].form, 1);
        assert_eq!(echo.monomials[0].coeff, "1");
        assert_eq!(echo.box_kind, "closed");
    }

    #[test]
    fn rational_coefficients_parse_exactly() {
        let text = MINIMAL.replace("coeff = 1", "coeff = \"-3/4\"");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.echo().monomials[0].coeff, "-3/4");
    }

    #[test]
    fn wide_box_is_rejected() {
        let text = MINIMAL.replace("[[-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]]\n        y", "[[-0.5, 1.0], [-0.5, 0.5], [-0.5, 0.5]]\n        y");
        let err = parse_config(&text).unwrap_err();
        assert!(
            err.to_string().contains("box side exceeds 1"),
            "{err}"
        );
        assert!(err.to_string().contains("boxes.x[1]"), "{err}");
    }

    #[test]
    fn b_below_one_needs_the_flag() {
        let text = MINIMAL.replace("p1 = 8.0", "p1 = 4.0").replace("p2 = 8.0", "p2 = 16.0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("b = "), "{err}");
        let allowed = format!("{text}\n[parameters]\nallow_b_below_1 = true\n");
        let cfg = parse_config(&allowed).unwrap();
        assert!(cfg.schedule[0].b_below_1);
        assert!(cfg.schedule[0].b < 1.0);
    }

    #[test]
    fn parse_errors_carry_position_info() {
        let err = parse_config("[system\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");

        let unknown = format!("{MINIMAL}\n[parameters]\nqmax = 3\n");
        let err = parse_config(&unknown).unwrap_err();
        assert!(err.to_string().contains("qmax"), "{err}");
    }

    #[test]
    fn semantic_errors_are_specific() {
        let bad_form = MINIMAL.replace("form = 1", "form = 2");
        let err = parse_config(&bad_form).unwrap_err();
        assert!(err.to_string().contains("outside 1..=1"), "{err}");

        let bad_kind = MINIMAL.replace("[boxes]", "[boxes]\n        kind = \"open\"");
        let err = parse_config(&bad_kind).unwrap_err();
        assert!(err.to_string().contains("half_open"), "{err}");

        let no_schedule = MINIMAL.replace("[[schedule]]\n        p1 = 8.0\n        p2 = 8.0", "");
        let err = parse_config(&no_schedule).unwrap_err();
        assert!(err.to_string().contains("schedule"), "{err}");

        let bad_degree = MINIMAL.replace("xexp = [1, 0, 0]", "xexp = [2, 0, 0]");
        assert!(parse_config(&bad_degree).is_err());
    }

    #[test]
    fn half_open_kind_round_trips() {
        let text = MINIMAL.replace("[boxes]", "[boxes]\n        kind = \"half_open\"");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.kind, IntervalKind::HalfOpen);
        assert_eq!(cfg.echo().box_kind, "half_open");
    }
}
