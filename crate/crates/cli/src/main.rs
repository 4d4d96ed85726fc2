//! Command line front end: every pipeline stage of the library is reachable
//! as a subcommand, and `experiment` runs the full prediction-vs-count
//! comparison from a config file.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde_json::json;

use bihom::arcs::{
    arcs_measure, check_disjointness, choose_parameters, locate_arc, ArcVariant, CircleParams,
};
use bihom::config::{load_config, ExperimentConfig};
use bihom::counting::{count_solutions_with, BoxPair, Strategy};
use bihom::experiment::{codim_budget, run_experiment};
use bihom::expsum::{complete_sum, weyl_sum};
use bihom::integral::{schmidt_j, singular_integral_partial};
use bihom::lattice::shrinking_batch;
use bihom::local::{local_factor, singular_series_partial};
use bihom::{Error, Result};

#[derive(Parser)]
#[command(
    name = "bihom",
    version,
    about = "Counts integer solutions of bihomogeneous systems in asymmetric \
             boxes and compares them with the circle-method prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count integer solutions in the scaled boxes for one (P1, P2).
    Count(CountArgs),
    /// Exponential sums: S(alpha) over the boxes, or a complete sum mod q.
    Expsum(ExpsumArgs),
    /// Lattice-point utilities.
    Lattice {
        #[command(subcommand)]
        cmd: LatticeCmd,
    },
    /// Major-arc dissection: locate an arc, check disjointness, measure.
    Arcs {
        #[command(subcommand)]
        cmd: ArcsCmd,
    },
    /// Arithmetic factor of sigma: truncated q-series and Euler factors.
    Sseries(SseriesArgs),
    /// Archimedean factor of sigma: truncated or smoothed real density.
    Sintegral(SintegralArgs),
    /// Full experiment: predictions, counts, and diagnostics as a report.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct CountArgs {
    /// Config file declaring the system and the boxes.
    #[arg(long)]
    config: PathBuf,
    /// Scaling parameter for the x box.
    #[arg(long)]
    p1: f64,
    /// Scaling parameter for the y box.
    #[arg(long)]
    p2: f64,
    /// Enumeration strategy.
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    strategy: StrategyArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    Generic,
    Fibered,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Auto => Strategy::Auto,
            StrategyArg::Generic => Strategy::Generic,
            StrategyArg::Fibered => Strategy::Fibered,
        }
    }
}

#[derive(Args)]
struct ExpsumArgs {
    #[arg(long)]
    config: PathBuf,
    /// Coefficients alpha_1,..,alpha_R for S(alpha) over the boxes.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Option<Vec<f64>>,
    /// Scaling parameter for the x box (S(alpha) mode).
    #[arg(long)]
    p1: Option<f64>,
    /// Scaling parameter for the y box (S(alpha) mode).
    #[arg(long)]
    p2: Option<f64>,
    /// Modulus for a complete sum over residues.
    #[arg(long, conflicts_with = "alpha")]
    q: Option<i64>,
    /// Numerators a_1,..,a_R for the complete sum at a/q.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "q")]
    a: Option<Vec<i64>>,
}

#[derive(Subcommand)]
enum LatticeCmd {
    /// Randomized batch check of the shrinking inequality between the
    /// counts at two box scales, reported as CSV.
    VerifyShrinking {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ArcContext {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    p1: f64,
    #[arg(long)]
    p2: f64,
}

#[derive(Subcommand)]
enum ArcsCmd {
    /// Find the arc containing alpha, if any, at a given dissection level.
    Locate {
        #[command(flatten)]
        ctx: ArcContext,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha: Vec<f64>,
        /// Dissection exponent; defaults to the chosen theta0.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, value_enum, default_value_t = VariantArg::Plain)]
        variant: VariantArg,
    },
    /// Verify pairwise disjointness of the major arcs at theta0.
    Disjoint {
        #[command(flatten)]
        ctx: ArcContext,
    },
    /// Total measure of the major arcs against the shrinking envelope.
    Measure {
        #[command(flatten)]
        ctx: ArcContext,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Plain,
    Prime,
}

impl From<VariantArg> for ArcVariant {
    fn from(v: VariantArg) -> ArcVariant {
        match v {
            VariantArg::Plain => ArcVariant::Plain,
            VariantArg::Prime => ArcVariant::Prime,
        }
    }
}

#[derive(Args)]
struct SseriesArgs {
    #[arg(long)]
    config: PathBuf,
    /// Truncation of the q-sum; defaults to the config value.
    #[arg(long = "q-max")]
    q_max: Option<i64>,
    /// Primes whose Euler factors to report alongside the partial sum.
    #[arg(long, value_delimiter = ',')]
    euler: Option<Vec<i64>>,
    /// Depth (power of p) for each requested Euler factor.
    #[arg(long, default_value_t = 1)]
    depth: u32,
}

#[derive(Args)]
struct SintegralArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Schmidt)]
    method: MethodArg,
    /// Coefficient truncation for the oscillatory method; defaults to the
    /// config value.
    #[arg(long)]
    phi: Option<f64>,
    /// Largest smoothing parameter for the hat-weight ladder; defaults to
    /// the config value.
    #[arg(long, short = 'T')]
    t: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Osc,
    Schmidt,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write the JSON report here; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-entry table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Reserve exit code 2 for partial experiment success; usage
            // errors exit 1, help and version exit 0.
            let code = if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Count(args) => cmd_count(args),
        Command::Expsum(args) => cmd_expsum(args),
        Command::Lattice { cmd } => cmd_lattice(cmd),
        Command::Arcs { cmd } => cmd_arcs(cmd),
        Command::Sseries(args) => cmd_sseries(args),
        Command::Sintegral(args) => cmd_sintegral(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn scaled_pair(cfg: &ExperimentConfig, p1: f64, p2: f64) -> Result<BoxPair> {
    BoxPair::new(cfg.b1.clone(), cfg.b2.clone(), p1, p2)
}

/// Writes to stdout, treating a closed pipe as a normal early exit instead
/// of a panic, so `bihom ... | head` behaves.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn print_json(value: &serde_json::Value) {
    emit(&format!(
        "{}\n",
        serde_json::to_string_pretty(value).expect("json")
    ));
}

fn cmd_count(args: CountArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let bp = scaled_pair(&cfg, args.p1, args.p2)?;
    let start = Instant::now();
    let n = count_solutions_with(&cfg.system, &bp, args.strategy.into())?;
    let wall_time = start.elapsed().as_secs_f64();
    print_json(&json!({
        "p1": args.p1,
        "p2": args.p2,
        "n": n,
        "wall_time": wall_time,
    }));
    Ok(ExitCode::SUCCESS)
}

fn cmd_expsum(args: ExpsumArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let (value, pairs) = if let Some(q) = args.q {
        let a = args
            .a
            .ok_or_else(|| Error::Invalid("complete sums need --a".into()))?;
        let sum = complete_sum(&cfg.system, &a, q)?;
        (sum.value, sum.mass())
    } else {
        let alpha = args
            .alpha
            .ok_or_else(|| Error::Invalid("need either --alpha or --q/--a".into()))?;
        let (p1, p2) = match (args.p1, args.p2) {
            (Some(p1), Some(p2)) => (p1, p2),
            _ => return Err(Error::Invalid("S(alpha) needs --p1 and --p2".into())),
        };
        let bp = scaled_pair(&cfg, p1, p2)?;
        let value = weyl_sum(&cfg.system, &bp, &alpha)?;
        (value, bp.pair_count()?)
    };
    print_json(&json!({
        "re": value.re,
        "im": value.im,
        "abs": value.norm(),
        "pairs": pairs,
    }));
    Ok(ExitCode::SUCCESS)
}

fn cmd_lattice(cmd: LatticeCmd) -> Result<ExitCode> {
    match cmd {
        LatticeCmd::VerifyShrinking {
            instances,
            seed,
            out,
        } => {
            let batch = shrinking_batch(instances, seed)?;
            let mut csv = String::from("id,n1,n2,a,z1,z2,u_z2,bound,ratio\n");
            for r in &batch.records {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.id, r.n1, r.n2, r.a, r.z1, r.z2, r.u_z2, r.bound, r.ratio
                ));
            }
            match out {
                Some(path) => std::fs::write(&path, csv)
                    .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?,
                None => emit(&csv),
            }
            eprintln!(
                "max ratio {} over {} instances",
                batch.max_ratio,
                batch.records.len()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn params_from_config(ctx: &ArcContext) -> Result<(ExperimentConfig, CircleParams)> {
    let cfg = load_config(&ctx.config)?;
    let k = codim_budget(&cfg).ok_or_else(|| {
        Error::Invalid("arc analysis needs codim_x and codim_y in [parameters]".into())
    })?;
    let sys = &cfg.system;
    if !(ctx.p1 > 1.0 && ctx.p2 > 1.0) {
        return Err(Error::Invalid("need P1 > 1 and P2 > 1".into()));
    }
    let b = ctx.p1.ln() / ctx.p2.ln();
    let p = ctx.p1.powi(sys.d1() as i32) * ctx.p2.powi(sys.d2() as i32);
    let params = choose_parameters(sys.r(), sys.d1(), sys.d2(), b, k, p)?;
    Ok((cfg, params))
}

fn cmd_arcs(cmd: ArcsCmd) -> Result<ExitCode> {
    match cmd {
        ArcsCmd::Locate {
            ctx,
            alpha,
            theta,
            variant,
        } => {
            let (_, params) = params_from_config(&ctx)?;
            let theta = theta.unwrap_or(params.theta0);
            let center = locate_arc(&alpha, &params, theta, variant.into())?;
            let beta = center.as_ref().map(|c| c.beta(&alpha));
            print_json(&json!({
                "params": params,
                "theta": theta,
                "q_bound": params.q_bound(theta),
                "halfwidth": params.arc_halfwidth(theta),
                "center": center,
                "beta": beta,
            }));
        }
        ArcsCmd::Disjoint { ctx } => {
            let (_, params) = params_from_config(&ctx)?;
            let report = check_disjointness(&params)?;
            print_json(&json!({ "params": params, "report": report }));
        }
        ArcsCmd::Measure { ctx } => {
            let (_, params) = params_from_config(&ctx)?;
            let report = arcs_measure(&params)?;
            print_json(&json!({
                "params": params,
                "measure_exact": report.measure.to_string(),
                "measure": report.measure_f64,
                "envelope": report.envelope,
                "constant": report.constant,
                "disjoint": report.disjoint,
            }));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sseries(args: SseriesArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let q_max = args.q_max.unwrap_or(cfg.q_max);
    let partial = singular_series_partial(&cfg.system, q_max)?;
    let euler: Vec<serde_json::Value> = args
        .euler
        .unwrap_or_default()
        .iter()
        .map(|&p| {
            let f = local_factor(&cfg.system, p, args.depth)?;
            Ok(json!({
                "p": f.p,
                "depth": f.depth,
                "partial": f.partial.to_string(),
                "partial_f64": f.partial.to_f64().unwrap_or(f64::NAN),
            }))
        })
        .collect::<Result<_>>()?;
    print_json(&json!({
        "q_max": q_max,
        "s_q": partial.to_string(),
        "s_q_f64": partial.to_f64().unwrap_or(f64::NAN),
        "euler": euler,
    }));
    Ok(ExitCode::SUCCESS)
}

fn cmd_sintegral(args: SintegralArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    // The density lives on the unscaled boxes; the pair carries them with a
    // nominal admissible scale.
    let bp = BoxPair::new(cfg.b1.clone(), cfg.b2.clone(), 2.0, 2.0)?;
    let (value, error_estimate, converged) = match args.method {
        MethodArg::Osc => {
            let phi = args.phi.unwrap_or(cfg.phi);
            let jp = singular_integral_partial(&cfg.system, phi, &bp, &cfg.quadrature)?;
            (jp.value, jp.error_estimate, jp.converged)
        }
        MethodArg::Schmidt => {
            let t = args.t.unwrap_or(cfg.t_max);
            let sr = schmidt_j(&cfg.system, t, &bp, &cfg.quadrature)?;
            (sr.value, sr.error_estimate, sr.converged)
        }
    };
    print_json(&json!({
        "value": value,
        "error_estimate": error_estimate,
        "converged": converged,
    }));
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let report = run_experiment(&cfg)?;
    let rendered = report.to_json();
    match &args.out {
        Some(path) => {
            std::fs::write(path, &rendered)
                .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
            eprintln!("report written to {}", path.display());
        }
        None => emit(&rendered),
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, report.to_csv())
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        eprintln!("table written to {}", path.display());
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if report.partial {
        eprintln!("partial result: a budget guard truncated at least one stage");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
