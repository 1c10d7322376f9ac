//! Command-line front end for the topogen experiments.
//!
//! Exit codes: 0 on success, 1 when a checked property fails (or the report
//! cannot be written), 2 on usage errors and violated preconditions.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde_json::{json, Value};
use thiserror::Error;
use topogen::dyadic::{parse_rational, Dyadic};
use topogen::genpair::{construct_pair, reach_target};
use topogen::kronecker::{
    basis_value, is_topological_generator, max_gap_exact, orbit_covering_radius, rational_rank,
    CoordVector,
};
use topogen::liegen::{cover_profile, so3_net, Rotation};
use topogen::permgroups::{
    escape_construction, qna_modulus_check, FiniteModel, MassBounds, QnaConfig, SubmeasureSpec,
};
use topogen::stevens::{
    circle_norm, divergence_flag, norm, validate_weights, StevensError, WeightSequence,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failed(_) => EXIT_FAILED,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "topogen",
    version,
    about = "Experiments on topological generation of groups"
)]
struct Cli {
    #[command(flatten)]
    output: OutputArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format; each subcommand has its own default.
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weighted norm of a dyadic rational, with a minimizing digit expansion.
    Norm {
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// `harmonic`, `geometric:<q>`, or a path to a weight table.
        #[arg(long, default_value = "harmonic")]
        weights: String,
        /// Also report the norm on the circle quotient.
        #[arg(long)]
        circle: bool,
    },
    /// Check the weight constraints on a window of positions.
    WeightsValidate {
        #[arg(long, default_value = "harmonic")]
        weights: String,
        #[arg(long, default_value_t = -16, allow_hyphen_values = true)]
        lo: i64,
        #[arg(long, default_value_t = 64, allow_hyphen_values = true)]
        hi: i64,
    },
    /// Certified generator pair near (g0, h0).
    Genpair {
        #[arg(long, allow_hyphen_values = true)]
        g0: String,
        #[arg(long, allow_hyphen_values = true)]
        h0: String,
        #[arg(long = "N")]
        n: u32,
        #[arg(long, default_value = "harmonic")]
        weights: String,
        /// Comma-separated dyadic targets to reach exactly.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        targets: Vec<String>,
    },
    /// Rank test and orbit covering radius for a torus translation.
    Kronecker {
        /// Basis symbols, starting with `1`: `1,sqrt2,phi,pi,e` or decimals.
        #[arg(long, default_value = "1")]
        basis: String,
        /// Rational coefficients over the basis; `;` separates coordinates.
        #[arg(long, allow_hyphen_values = true)]
        coords: String,
        #[arg(long = "K", default_value_t = 1000)]
        k: usize,
        /// Grid cells per axis for two or more coordinates.
        #[arg(long, default_value_t = 64)]
        resolution: usize,
    },
    /// Generators near the identity whose product is far from it.
    Escape {
        #[arg(long, default_value = "harmonic")]
        lambda: String,
        #[arg(long)]
        eps: String,
        #[arg(long = "N")]
        n: usize,
    },
    /// Support-union check for words in small generators.
    QnaCheck {
        /// `du:<n>` or `harmonic:<n>`.
        #[arg(long)]
        model: String,
        #[arg(long)]
        eps: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long = "L", default_value_t = 8)]
        l: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest word ball allowed per trial.
        #[arg(long, default_value_t = 5_000_000)]
        cap: usize,
    },
    /// Covering radius of word balls of a rotation pair in SO(3).
    So3Cover {
        /// Rotations such as `x:0.3,z:0.3` or `1,1,0:0.2,z:0.5`.
        #[arg(long, allow_hyphen_values = true)]
        pair: String,
        #[arg(long = "L", default_value_t = 14)]
        l: usize,
        #[arg(long, default_value_t = 2000)]
        net: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Radius of interest; the dedup grid defaults to a quarter of it.
        #[arg(long, default_value_t = 0.4)]
        target: f64,
        #[arg(long)]
        grid: Option<f64>,
        #[arg(long, default_value_t = 20_000_000)]
        cap: usize,
    },
}

/// A finished report. `failed` is set when a checked property did not hold.
struct Report {
    json: Value,
    csv: String,
    default_format: Format,
    failed: Option<String>,
}

/// Parses `argv` (including the program name), runs the command, writes the
/// report, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("topogen: {e}");
            e.exit_code()
        }
    }
}

/// `TOPOGEN_THREADS` caps the worker pool; 0 or unset means one per core.
fn configure_threads() {
    let threads = std::env::var("TOPOGEN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // a pool built earlier in the same process wins
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let report = match &cli.command {
        Command::Norm { x, weights, circle } => norm_cmd(x, weights, *circle)?,
        Command::WeightsValidate { weights, lo, hi } => weights_cmd(weights, *lo, *hi)?,
        Command::Genpair {
            g0,
            h0,
            n,
            weights,
            targets,
        } => genpair_cmd(g0, h0, *n, weights, targets)?,
        Command::Kronecker {
            basis,
            coords,
            k,
            resolution,
        } => kronecker_cmd(basis, coords, *k, *resolution)?,
        Command::Escape { lambda, eps, n } => escape_cmd(lambda, eps, *n)?,
        Command::QnaCheck {
            model,
            eps,
            k,
            l,
            trials,
            seed,
            cap,
        } => qna_cmd(model, eps, *k, *l, *trials, *seed, *cap)?,
        Command::So3Cover {
            pair,
            l,
            net,
            seed,
            target,
            grid,
            cap,
        } => so3_cmd(pair, *l, *net, *seed, *target, *grid, *cap)?,
    };
    let text = match cli.output.format.unwrap_or(report.default_format) {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.json).expect("json values serialize");
            s.push('\n');
            s
        }
        Format::Csv => report.csv,
    };
    match &cli.output.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Failed(e.to_string()))?,
    }
    match report.failed {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_dyadic(flag: &str, s: &str) -> Result<Dyadic, CliError> {
    s.parse().map_err(|e| usage(format!("--{flag}: {e}")))
}

fn parse_positive_rational(flag: &str, s: &str) -> Result<BigRational, CliError> {
    let q = parse_rational(s).ok_or_else(|| usage(format!("--{flag}: cannot parse {s:?}")))?;
    if q <= BigRational::from_integer(BigInt::from(0)) {
        return Err(usage(format!("--{flag} must be positive")));
    }
    Ok(q)
}

fn load_weights(spec: &str) -> Result<WeightSequence, CliError> {
    let s = spec.trim();
    if s == "harmonic" || s.starts_with("geometric:") {
        return s
            .parse()
            .map_err(|e: StevensError| usage(format!("--weights: {e}")));
    }
    let text =
        fs::read_to_string(s).map_err(|e| usage(format!("--weights: cannot read {s}: {e}")))?;
    WeightSequence::parse_table(&text).map_err(|e| usage(format!("--weights: {e}")))
}

fn norm_cmd(x: &str, weights: &str, circle: bool) -> Result<Report, CliError> {
    let x = parse_dyadic("x", x)?;
    let ws = load_weights(weights)?;
    let result = norm(&x, &ws).map_err(usage)?;
    let circle_value = if circle {
        Some(circle_norm(&x, &ws).map_err(usage)?.to_string())
    } else {
        None
    };
    let digits: Vec<Value> = result.witness.iter().map(|(p, d)| json!([p, d])).collect();
    let mut out = json!({
        "x": x.to_string(),
        "weights": ws.to_string(),
        "value": result.value.to_string(),
        "witness": result.witness.to_string(),
        "digits": digits,
    });
    if let Some(c) = circle_value {
        out["circle_value"] = json!(c);
    }
    let rows = result.witness.iter().map(|(p, d)| {
        let r = ws.weight_at(p).expect("witness positions were validated");
        vec![p.to_string(), d.to_string(), r.to_string()]
    });
    Ok(Report {
        json: out,
        csv: csv(&["position", "digit", "weight"], rows),
        default_format: Format::Json,
        failed: None,
    })
}

fn weights_cmd(weights: &str, lo: i64, hi: i64) -> Result<Report, CliError> {
    if lo > hi {
        return Err(usage("--lo must not exceed --hi"));
    }
    let ws = load_weights(weights)?;
    let verdict = validate_weights(&ws, lo, hi);
    let divergent = divergence_flag(&ws).ok();
    let rows: Vec<Vec<String>> = (lo..=hi)
        .map(|i| {
            let r = ws.weight_at(i).map_or_else(String::new, |r| r.to_string());
            vec![i.to_string(), r]
        })
        .collect();
    let (valid, violation, position) = match &verdict {
        Ok(()) => (true, Value::Null, Value::Null),
        Err(v) => (false, json!(v.to_string()), json!(v.position())),
    };
    Ok(Report {
        json: json!({
            "weights": ws.to_string(),
            "lo": lo,
            "hi": hi,
            "valid": valid,
            "violation": violation,
            "position": position,
            "sum_diverges": divergent,
        }),
        csv: csv(&["i", "r_i"], rows),
        default_format: Format::Json,
        failed: verdict.err().map(|v| format!("invalid weights: {v}")),
    })
}

fn genpair_cmd(
    g0: &str,
    h0: &str,
    n: u32,
    weights: &str,
    targets: &[String],
) -> Result<Report, CliError> {
    let g0 = parse_dyadic("g0", g0)?;
    let h0 = parse_dyadic("h0", h0)?;
    let ws = load_weights(weights)?;
    let targets = targets
        .iter()
        .map(|t| parse_dyadic("targets", t))
        .collect::<Result<Vec<_>, _>>()?;
    let cert = construct_pair(&g0, &h0, n).map_err(usage)?;
    let distance = norm(&(&cert.h - &h0), &ws).map_err(usage)?.value;

    let mut reached = Vec::new();
    let mut rows = Vec::new();
    for t in &targets {
        match reach_target(&cert, t) {
            Some((u, v)) => {
                reached
                    .push(json!({"target": t.to_string(), "u": u.to_string(), "v": v.to_string()}));
                rows.push(vec![
                    n.to_string(),
                    distance.to_string(),
                    t.to_string(),
                    u.to_string(),
                    v.to_string(),
                ]);
            }
            None => {
                reached.push(json!({"target": t.to_string(), "u": null, "v": null}));
                rows.push(vec![
                    n.to_string(),
                    distance.to_string(),
                    t.to_string(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }
    if targets.is_empty() {
        rows.push(vec![
            n.to_string(),
            distance.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    Ok(Report {
        json: json!({
            "g0": cert.g0.to_string(),
            "h0": cert.h0.to_string(),
            "m": cert.m,
            "N": cert.n,
            "k1": cert.k1.to_string(),
            "k2": cert.k2.to_string(),
            "beta": cert.beta.to_string(),
            "h": cert.h.to_string(),
            "u": cert.u.to_string(),
            "v": cert.v.to_string(),
            "step": cert.step().to_string(),
            "weights": ws.to_string(),
            "distance_h_h0": distance.to_string(),
            "targets": reached,
        }),
        csv: csv(&["N", "distance_h_h0", "target", "u", "v"], rows),
        default_format: Format::Json,
        failed: None,
    })
}

/// Orbit lengths 10, 100, ... below `k`, then `k` itself.
fn ladder(k: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(10usize), |s| s.checked_mul(10))
        .take_while(|&s| s < k)
        .collect();
    out.push(k);
    out
}

fn kronecker_cmd(
    basis: &str,
    coords: &str,
    k: usize,
    resolution: usize,
) -> Result<Report, CliError> {
    if k == 0 {
        return Err(usage("--K must be positive"));
    }
    let symbols: Vec<&str> = basis.split(',').map(str::trim).collect();
    if symbols[0] != "1" {
        return Err(usage("--basis must start with 1"));
    }
    let values = symbols
        .iter()
        .map(|s| basis_value(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let rows = coords
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|c| {
                    parse_rational(c).ok_or_else(|| usage(format!("--coords: cannot parse {c:?}")))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cv = CoordVector::new(symbols.len() - 1, rows).map_err(usage)?;
    let generator = is_topological_generator(&cv);
    let mut matrix = vec![cv.constant_row()];
    matrix.extend(cv.rows().iter().cloned());
    let rank = rational_rank(&matrix);

    let mut radii = Vec::new();
    let mut csv_rows = Vec::new();
    let exact = cv.basis_size() == 0 && cv.dimension() == 1;
    let point = cv.approximate(&values).map_err(usage)?;
    for count in ladder(k) {
        if exact {
            let gap = max_gap_exact(&cv.rows()[0][0], count).map_err(usage)?;
            let approx = gap.to_f64().unwrap_or(f64::NAN);
            radii.push(
                json!({"K": count, "radius": gap.to_string(), "radius_f64": approx, "exact": true}),
            );
            csv_rows.push(vec![
                count.to_string(),
                gap.to_string(),
                String::new(),
                "false".into(),
            ]);
        } else {
            let cov = orbit_covering_radius(&point, count, resolution).map_err(usage)?;
            radii.push(json!({
                "K": count,
                "radius": cov.radius,
                "cell_diameter": cov.cell_diameter,
                "too_coarse": cov.too_coarse,
                "exact": false,
            }));
            csv_rows.push(vec![
                count.to_string(),
                format!("{:.12}", cov.radius),
                cov.cell_diameter
                    .map_or_else(String::new, |d| format!("{d:.12}")),
                cov.too_coarse.to_string(),
            ]);
        }
    }
    Ok(Report {
        json: json!({
            "basis": symbols,
            "dimension": cv.dimension(),
            "rank": rank,
            "generator": generator,
            "coverage": radii,
        }),
        csv: csv(
            &["K", "covering_radius", "cell_diameter", "too_coarse"],
            csv_rows,
        ),
        default_format: Format::Csv,
        failed: None,
    })
}

fn bounds_json(b: &MassBounds) -> Value {
    match b.value() {
        Some(v) => json!({"exact": v.to_string(), "lower": v.to_f64(), "upper": v.to_f64()}),
        None => json!({"exact": null, "lower": b.lower.to_f64(), "upper": b.upper.to_f64()}),
    }
}

fn bounds_text(b: &MassBounds) -> String {
    match b.value() {
        Some(v) => v.to_string(),
        None => format!(
            "{:.15}..{:.15}",
            b.lower.to_f64().unwrap_or(f64::NAN),
            b.upper.to_f64().unwrap_or(f64::NAN)
        ),
    }
}

fn escape_cmd(lambda: &str, eps: &str, n: usize) -> Result<Report, CliError> {
    if lambda.trim() != "harmonic" {
        return Err(usage("--lambda: only harmonic is supported"));
    }
    let eps = parse_positive_rational("eps", eps)?;
    let w = escape_construction(&SubmeasureSpec::harmonic(), &eps, n).map_err(usage)?;
    let verdict = w.verify();
    let blocks: Vec<Value> = w
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| json!({"i": i + 1, "first": b.first, "last": b.last, "mass": bounds_json(&b.mass)}))
        .collect();
    let rows = w.blocks.iter().enumerate().map(|(i, b)| {
        vec![
            (i + 1).to_string(),
            format!("{}-{}", b.first, b.last),
            bounds_text(&b.mass),
        ]
    });
    let floor = &eps * BigInt::from(n) / BigInt::from(2);
    Ok(Report {
        json: json!({
            "lambda": "harmonic",
            "epsilon": eps.to_string(),
            "N": n,
            "blocks": blocks,
            "product_support": w.product.support_len(),
            "distance": bounds_json(&w.distance),
            "distance_floor": floor.to_string(),
            "verified": verdict.is_ok(),
        }),
        csv: csv(&["i", "block", "lambda"], rows),
        default_format: Format::Json,
        failed: verdict.err().map(|e| format!("witness check failed: {e}")),
    })
}

fn qna_cmd(
    model: &str,
    eps: &str,
    k: usize,
    l: usize,
    trials: usize,
    seed: u64,
    cap: usize,
) -> Result<Report, CliError> {
    let model: FiniteModel = model.parse().map_err(|e| usage(format!("--model: {e}")))?;
    let eps = parse_positive_rational("eps", eps)?;
    let cfg = QnaConfig {
        model: model.clone(),
        epsilon: eps.clone(),
        generators: k,
        max_len: l,
        trials,
        seed,
        ball_cap: cap,
    };
    let report = qna_modulus_check(&cfg).map_err(usage)?;
    let per_trial: Vec<Value> = report
        .trials
        .iter()
        .enumerate()
        .map(|(i, t)| {
            json!({
                "trial": i,
                "generators": t.generators.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "union_mass": t.union_mass.to_string(),
                "words": t.words,
                "max_distance": t.max_distance.to_string(),
                "containment_failures": t.containment_failures,
                "bound_failures": t.bound_failures,
            })
        })
        .collect();
    let rows = report.trials.iter().enumerate().map(|(i, t)| {
        let gens: Vec<String> = t.generators.iter().map(ToString::to_string).collect();
        vec![
            i.to_string(),
            gens.join(" "),
            t.union_mass.to_string(),
            t.words.to_string(),
            t.max_distance.to_string(),
            t.containment_failures.to_string(),
            t.bound_failures.to_string(),
        ]
    });
    let passed = report.passed();
    Ok(Report {
        json: json!({
            "model": model.to_string(),
            "epsilon": eps.to_string(),
            "k": k,
            "L": l,
            "trials": trials,
            "seed": seed,
            "words_checked": report.words_checked(),
            "containment_failures": report.containment_failures(),
            "bound_failures": report.bound_failures(),
            "max_distance": report.max_distance().to_string(),
            "nontrivial_generators": report.nontrivial_generators(),
            "passed": passed,
            "per_trial": per_trial,
        }),
        csv: csv(
            &[
                "trial",
                "generators",
                "union_mass",
                "words",
                "max_distance",
                "containment_failures",
                "bound_failures",
            ],
            rows,
        ),
        default_format: Format::Json,
        failed: (!passed).then(|| {
            format!(
                "{} containment and {} distance failures",
                report.containment_failures(),
                report.bound_failures()
            )
        }),
    })
}

/// Splits `x:0.3,1,1,0:0.2` into rotations; axis components are rejoined.
fn parse_rotations(spec: &str) -> Result<Vec<Rotation>, CliError> {
    let mut out = Vec::new();
    let mut pending = String::new();
    for token in spec.split(',') {
        if !pending.is_empty() {
            pending.push(',');
        }
        pending.push_str(token);
        if token.contains(':') {
            out.push(
                pending
                    .parse::<Rotation>()
                    .map_err(|e| usage(format!("--pair: {e}")))?,
            );
            pending.clear();
        }
    }
    if !pending.is_empty() {
        return Err(usage(format!("--pair: dangling {pending:?}")));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn so3_cmd(
    pair: &str,
    l: usize,
    net_size: usize,
    seed: u64,
    target: f64,
    grid: Option<f64>,
    cap: usize,
) -> Result<Report, CliError> {
    let gens = parse_rotations(pair)?;
    if gens.is_empty() {
        return Err(usage("--pair: no rotations given"));
    }
    if !(target > 0.0) {
        return Err(usage("--target must be positive"));
    }
    let grid = grid.unwrap_or(target / 4.0);
    let net = so3_net(net_size, seed).map_err(usage)?;
    let steps = cover_profile(&gens, l, &net.points, grid, cap).map_err(usage)?;
    let rows = steps.iter().map(|s| {
        vec![
            s.length.to_string(),
            s.ball_size.to_string(),
            format!("{:.12}", s.radius),
        ]
    });
    let mut summary = String::new();
    for (i, g) in gens.iter().enumerate() {
        let _ = write!(summary, "{}{g}", if i > 0 { " " } else { "" });
    }
    Ok(Report {
        json: json!({
            "pair": pair,
            "generators": summary,
            "net": net_size,
            "net_mesh": net.mesh,
            "seed": seed,
            "grid": grid,
            "target": target,
            "steps": steps.iter().map(|s| json!({"L": s.length, "ball_size": s.ball_size, "covering_radius": s.radius})).collect::<Vec<_>>(),
            "below_target": steps.last().is_some_and(|s| s.radius < target),
        }),
        csv: csv(&["L", "ball_size", "covering_radius"], rows),
        default_format: Format::Csv,
        failed: None,
    })
}
