//! `truncdist`: exact advantages, Monte Carlo runs, bound tables and
//! verification suites for the truncated-permutation distinguishing problem.

mod grid;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{Map, Value};

use truncdist::bounds::{self, birthday_bounds, collision_q_half, q_half_from_bound, BoundId};
use truncdist::distinguish::{empirical_q_half, hall_s_params, mc_advantage, Distinguisher};
use truncdist::exact::{exact_advantage_f64_limited, exact_advantage_limited, exact_q_half};
use truncdist::format;
use truncdist::profile::{expected_col, DEFAULT_PROFILE_LIMIT};
use truncdist::verify::{run_suite, Suite, VerifyConfig};
use truncdist::{Error, Params, World};

use grid::List;
use table::{Format, Table};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "truncdist",
    version,
    about = "Truncated random permutation vs random function"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact optimal advantage over a grid.
    Exact(ExactArgs),
    /// Monte Carlo advantage of a distinguisher over a grid.
    Mc(McArgs),
    /// Closed-form bounds over a grid.
    Bounds(BoundsArgs),
    /// Query budgets at which the advantage reaches one half.
    Qhalf(QhalfArgs),
    /// Run verification suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Domain widths, e.g. `8` or `2..4,6`.
    #[arg(long, value_parser = grid::u32_list)]
    n: Option<List<u32>>,
    /// Truncated bits; all `0..n` when omitted.
    #[arg(long, value_parser = grid::u32_list, conflicts_with = "n_m")]
    m: Option<List<u32>>,
    /// Reply widths `n - m`, as an alternative to `--m`.
    #[arg(long = "n-m", value_parser = grid::u32_list)]
    n_m: Option<List<u32>>,
    /// Query budgets.
    #[arg(long, value_parser = grid::u64_list, required_unless_present = "q_pow2")]
    q: Option<List<u64>>,
    /// Query budgets as powers of two: `--q-pow2 4..10` means q = 16, ..., 1024.
    #[arg(long = "q-pow2", value_parser = grid::pow2_axis, conflicts_with = "q")]
    q_pow2: Option<List<u64>>,
    /// Drop invalid (n, m, q) combinations instead of rejecting the grid.
    #[arg(long)]
    skip_invalid: bool,
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Write to a file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Omit the timestamp and wall-clock columns so output is reproducible.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExactMethod {
    /// Exact rational arithmetic.
    Exact,
    /// Log-space floating point.
    Float,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_enum, default_value_t = ExactMethod::Exact)]
    method: ExactMethod,
    /// Maximum number of profiles per instance.
    #[arg(long, default_value_t = DEFAULT_PROFILE_LIMIT)]
    limit: u128,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct McArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// `lr`, `col2:<theta>`, `col2-mean:<alpha>`, `hall:<c>`, `const:perm` or `const:func`.
    #[arg(long, default_value = "lr")]
    distinguisher: String,
    /// Trials per world.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct QhalfArgs {
    #[arg(long, value_parser = grid::u32_list)]
    n: Option<List<u32>>,
    #[arg(long, value_parser = grid::u32_list, conflicts_with = "n_m")]
    m: Option<List<u32>>,
    #[arg(long = "n-m", value_parser = grid::u32_list)]
    n_m: Option<List<u32>>,
    /// Comma-separated: bound names, `exact`, `collision` or `mc`.
    #[arg(long, default_value = "birthday-upper,hall,stam,thm1,thm2")]
    method: String,
    /// Trials per world for `mc`.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Profile limit per probe for `exact`.
    #[arg(long, default_value_t = DEFAULT_PROFILE_LIMIT)]
    limit: u128,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Comma-separated suites; all when omitted.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long, value_parser = grid::u32_list)]
    n: Option<List<u32>>,
    #[arg(long, value_parser = grid::u32_list)]
    m: Option<List<u32>>,
    #[arg(long = "n-m", value_parser = grid::u32_list)]
    n_m: Option<List<u32>>,
    #[arg(long, value_parser = grid::u64_list)]
    q: Option<List<u64>>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

/// A failure that maps to the usage exit code.
struct Usage(String);

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(Usage(msg)) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match &cli.command {
        Command::Exact(a) => cmd_exact(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Qhalf(a) => cmd_qhalf(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn required_n(n: &Option<List<u32>>) -> Result<&[u32], Usage> {
    n.as_ref()
        .map(|l| l.0.as_slice())
        .ok_or_else(|| Usage("--n is required".into()))
}

/// Caps the global pool at `TRUNCDIST_THREADS` when set.
fn configure_threads() -> Result<(), Usage> {
    let Ok(raw) = std::env::var("TRUNCDIST_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Usage(format!(
            "TRUNCDIST_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Usage(format!("thread pool: {e}")))
}

fn m_axis(n: u32, m: &Option<List<u32>>, n_m: &Option<List<u32>>) -> Vec<Option<u32>> {
    match (m, n_m) {
        (Some(ms), _) => ms.0.iter().map(|&m| Some(m)).collect(),
        (None, Some(ks)) => ks.0.iter().map(|&k| n.checked_sub(k)).collect(),
        (None, None) => (0..n).map(Some).collect(),
    }
}

fn build_grid(g: &GridArgs) -> Result<Vec<Params>, Usage> {
    let ns = required_n(&g.n)?;
    let qs =
        g.q.as_ref()
            .or(g.q_pow2.as_ref())
            .map(|l| l.0.clone())
            .unwrap_or_default();
    let mut out = Vec::new();
    for &n in ns {
        for m in m_axis(n, &g.m, &g.n_m) {
            for &q in &qs {
                let p = m
                    .ok_or_else(|| "n - m exceeds n".to_string())
                    .and_then(|m| Params::new(n, m, q).map_err(|e| e.to_string()));
                match p {
                    Ok(p) => out.push(p),
                    Err(_) if g.skip_invalid => {}
                    Err(e) => return Err(Usage(format!(
                        "invalid grid point n={n}, m={}, q={q}: {e} (use --skip-invalid to drop)",
                        m.map_or("?".into(), |m| m.to_string())
                    ))),
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Usage("grid is empty".into()));
    }
    Ok(out)
}

fn meta(command: &str, seed: Option<u64>, out: &OutputArgs) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool".into(), "truncdist".into());
    m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    m.insert("command".into(), command.into());
    m.insert("seed".into(), table::opt(seed));
    let ts = (!out.no_timestamp).then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    m.insert("timestamp".into(), table::opt(ts));
    m
}

fn emit(t: &Table, meta: Map<String, Value>, out: &OutputArgs) -> Result<(), Usage> {
    let format = match out.format {
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Json => Format::Json,
    };
    let result = match &out.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(f);
            t.write(format, meta, &mut w).and_then(|_| w.flush())
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            t.write(format, meta, &mut w).and_then(|_| w.flush())
        }
    };
    result.map_err(|e| Usage(format!("write failed: {e}")))
}

fn wall_ms(start: Instant, out: &OutputArgs) -> Value {
    if out.no_timestamp {
        Value::Null
    } else {
        table::float((start.elapsed().as_secs_f64() * 1e6).round() / 1e3)
    }
}

fn cmd_exact(a: &ExactArgs) -> Result<bool, Usage> {
    let grid = build_grid(&a.grid)?;
    let rows: Vec<(Vec<Value>, bool)> = grid
        .par_iter()
        .map(|p| {
            let start = Instant::now();
            let head = vec![p.n().into(), p.m().into(), p.q().into()];
            let (tail, ok) = match a.method {
                ExactMethod::Exact => match exact_advantage_limited(p, a.limit) {
                    Ok(r) => (
                        vec![
                            format::decimal(&r.advantage).into(),
                            format::rational(&r.advantage).into(),
                            r.profiles_enumerated.into(),
                            wall_ms(start, &a.output),
                            "ok".into(),
                        ],
                        true,
                    ),
                    Err(e) => (error_tail(4, e), false),
                },
                ExactMethod::Float => match exact_advantage_f64_limited(p, a.limit) {
                    Ok(v) => (
                        vec![
                            format::float(v).into(),
                            Value::Null,
                            Value::Null,
                            wall_ms(start, &a.output),
                            "ok".into(),
                        ],
                        true,
                    ),
                    Err(e) => (error_tail(4, e), false),
                },
            };
            (head.into_iter().chain(tail).collect(), ok)
        })
        .collect();
    let mut t = Table::new(vec![
        "n",
        "m",
        "q",
        "advantage",
        "advantage_rational",
        "profiles",
        "wall_ms",
        "status",
    ]);
    finish(&mut t, rows, meta("exact", None, &a.output), &a.output)
}

fn error_tail(blanks: usize, e: impl std::fmt::Display) -> Vec<Value> {
    let mut v = vec![Value::Null; blanks];
    v.push(format!("error: {e}").into());
    v
}

fn finish(
    t: &mut Table,
    rows: Vec<(Vec<Value>, bool)>,
    meta: Map<String, Value>,
    out: &OutputArgs,
) -> Result<bool, Usage> {
    let mut all_ok = true;
    for (row, ok) in rows {
        all_ok &= ok;
        t.push(row);
    }
    emit(t, meta, out)?;
    Ok(all_ok)
}

/// Distinguisher named by `spec`, instantiated for `params`.
fn distinguisher(spec: &str, params: &Params) -> Result<Distinguisher, String> {
    let (kind, arg) = match spec.split_once(':') {
        Some((k, v)) => (k, Some(v)),
        None => (spec, None),
    };
    let num = |v: Option<&str>| -> Result<f64, String> {
        v.ok_or_else(|| format!("`{kind}` needs a value"))?
            .parse::<f64>()
            .map_err(|e| format!("`{spec}`: {e}"))
    };
    match kind {
        "lr" => Ok(Distinguisher::LikelihoodRatio),
        "col2" => Ok(Distinguisher::Col2Threshold { theta: num(arg)? }),
        "col2-mean" => Ok(Distinguisher::Col2Threshold {
            theta: expected_col(params, 2).to_f64() + num(arg)?,
        }),
        "hall" => Ok(Distinguisher::SMembership(
            hall_s_params(params, num(arg)?).map_err(|e| e.to_string())?,
        )),
        "const" => match arg {
            Some("perm") => Ok(Distinguisher::Constant(World::Permutation)),
            Some("func") => Ok(Distinguisher::Constant(World::Function)),
            _ => Err(format!("`{spec}`: expected const:perm or const:func")),
        },
        _ => Err(format!("unknown distinguisher `{spec}`")),
    }
}

fn cmd_mc(a: &McArgs) -> Result<bool, Usage> {
    let grid = build_grid(&a.grid)?;
    let ds = grid
        .iter()
        .map(|p| distinguisher(&a.distinguisher, p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Usage)?;
    if a.trials == 0 {
        return Err(Usage("--trials must be at least 1".into()));
    }
    // Instances run in grid order; trials parallelize inside each one.
    let rows: Vec<(Vec<Value>, bool)> = grid
        .iter()
        .zip(&ds)
        .map(|(p, d)| {
            let head: Vec<Value> = vec![
                d.label().into(),
                p.n().into(),
                p.m().into(),
                p.q().into(),
                a.trials.into(),
            ];
            let (tail, ok) = match mc_advantage(d, p, a.trials, a.seed) {
                Ok(e) => (
                    vec![
                        table::float(e.point),
                        table::float(e.ci_half_width),
                        a.seed.into(),
                        table::float(e.lower()),
                        table::float(e.upper()),
                        e.perm_hits.into(),
                        e.func_hits.into(),
                        "ok".into(),
                    ],
                    true,
                ),
                Err(e) => {
                    let mut v = error_tail(7, e);
                    v[2] = a.seed.into();
                    (v, false)
                }
            };
            (head.into_iter().chain(tail).collect(), ok)
        })
        .collect();
    let mut t = Table::new(vec![
        "distinguisher",
        "n",
        "m",
        "q",
        "trials",
        "point",
        "ci_half_width",
        "seed",
        "ci_lower",
        "ci_upper",
        "perm_hits",
        "func_hits",
        "status",
    ]);
    finish(&mut t, rows, meta("mc", Some(a.seed), &a.output), &a.output)
}

/// Bound columns in output order, birthday lower first.
const BOUND_COLUMNS: [&str; 7] = [
    "birthday_lower",
    "birthday_upper",
    "hall",
    "stam",
    "stam_simplified",
    "thm1",
    "thm2",
];

fn cmd_bounds(a: &BoundsArgs) -> Result<bool, Usage> {
    let grid = build_grid(&a.grid)?;
    let rows: Vec<(Vec<Value>, bool)> = grid
        .par_iter()
        .map(|p| {
            let mut row: Vec<Value> = vec![
                p.n().into(),
                p.m().into(),
                p.q().into(),
                table::float(bounds::scaled_queries(p).to_f64()),
            ];
            let mut values = vec![birthday_bounds(p).lower];
            values.extend(
                [
                    BoundId::BirthdayUpper,
                    BoundId::Hall,
                    BoundId::Stam,
                    BoundId::StamSimplified,
                    BoundId::Thm1,
                    BoundId::Thm2,
                ]
                .map(|b| b.evaluate(p)),
            );
            for v in values {
                row.push(table::opt(v.to_f64().map(table::float)));
                row.push(v.is_applicable().into());
            }
            (row, true)
        })
        .collect();
    let mut columns = vec!["n", "m", "q", "x"];
    for c in BOUND_COLUMNS {
        columns.push(c);
        columns.push(applicable_column(c));
    }
    let mut t = Table::new(columns);
    finish(&mut t, rows, meta("bounds", None, &a.output), &a.output)
}

fn applicable_column(c: &str) -> &'static str {
    match c {
        "birthday_lower" => "birthday_lower_applicable",
        "birthday_upper" => "birthday_upper_applicable",
        "hall" => "hall_applicable",
        "stam" => "stam_applicable",
        "stam_simplified" => "stam_simplified_applicable",
        "thm1" => "thm1_applicable",
        "thm2" => "thm2_applicable",
        _ => unreachable!("unknown bound column {c}"),
    }
}

#[derive(Debug, Clone, Copy)]
enum QhalfMethod {
    Bound(BoundId),
    Exact,
    Collision,
    Mc,
}

impl QhalfMethod {
    fn parse(s: &str) -> Result<Self, Usage> {
        match s {
            "exact" => Ok(Self::Exact),
            "collision" => Ok(Self::Collision),
            "mc" => Ok(Self::Mc),
            other => BoundId::parse(other)
                .map(Self::Bound)
                .ok_or_else(|| Usage(format!("unknown q_1/2 method `{other}`"))),
        }
    }

    fn name(self) -> String {
        match self {
            Self::Bound(b) => b.name().into(),
            Self::Exact => "exact".into(),
            Self::Collision => "collision".into(),
            Self::Mc => "mc".into(),
        }
    }

    /// What the reported `q_half` certifies about the true value.
    fn certificate(self) -> &'static str {
        match self {
            Self::Bound(_) => "lower-bound",
            Self::Exact | Self::Collision => "exact",
            Self::Mc => "empirical",
        }
    }
}

fn cmd_qhalf(a: &QhalfArgs) -> Result<bool, Usage> {
    let ns = required_n(&a.n)?;
    let methods = a
        .method
        .split(',')
        .map(|s| QhalfMethod::parse(s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut points = Vec::new();
    for &n in ns {
        for m in m_axis(n, &a.m, &a.n_m) {
            let m = m.ok_or_else(|| Usage(format!("n - m exceeds n = {n}")))?;
            Params::new(n, m, 1).map_err(|e| Usage(e.to_string()))?;
            for &method in &methods {
                points.push((n, m, method));
            }
        }
    }
    let rows: Vec<(Vec<Value>, bool)> = points
        .iter()
        .map(|&(n, m, method)| {
            let head: Vec<Value> = vec![n.into(), m.into(), method.name().into()];
            let result: Result<(Option<u64>, Option<u64>), Error> = match method {
                QhalfMethod::Bound(b) => {
                    q_half_from_bound(b, n, m).map(|r| (r.first_uncertified, r.last_certified))
                }
                QhalfMethod::Exact => exact_q_half(n, m, a.limit).map(|q| (q, None)),
                QhalfMethod::Collision if m == 0 => Ok((Some(collision_q_half(n)), None)),
                QhalfMethod::Collision => {
                    Err(Error::Regime("collision closed form needs m = 0".into()))
                }
                QhalfMethod::Mc => empirical_q_half(
                    |_| Distinguisher::LikelihoodRatio,
                    n,
                    m,
                    1 << n,
                    a.trials,
                    a.seed,
                )
                .map(|r| (r.q(), None)),
            };
            let (tail, ok) = match result {
                // Out-of-regime methods are reported, not failed.
                Err(Error::Regime(why)) => (
                    vec![
                        Value::Null,
                        method.certificate().into(),
                        Value::Null,
                        format!("not-applicable: {why}").into(),
                    ],
                    true,
                ),
                Ok((q, last)) => (
                    vec![
                        table::opt(q),
                        method.certificate().into(),
                        table::opt(last),
                        if q.is_some() { "ok" } else { "not-reached" }.into(),
                    ],
                    true,
                ),
                Err(e) => {
                    let mut v = error_tail(3, e);
                    v[1] = method.certificate().into();
                    (v, false)
                }
            };
            (head.into_iter().chain(tail).collect(), ok)
        })
        .collect();
    let mut t = Table::new(vec![
        "n",
        "m",
        "method",
        "q_half",
        "certificate",
        "last_certified",
        "status",
    ]);
    let seed = methods
        .iter()
        .any(|m| matches!(m, QhalfMethod::Mc))
        .then_some(a.seed);
    finish(&mut t, rows, meta("qhalf", seed, &a.output), &a.output)
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool, Usage> {
    let suites = match &a.suite {
        None => Suite::ALL.to_vec(),
        Some(s) => s
            .split(',')
            .map(|x| Suite::parse(x.trim()).ok_or_else(|| Usage(format!("unknown suite `{x}`"))))
            .collect::<Result<Vec<_>, _>>()?,
    };
    let cfg = VerifyConfig {
        n: a.n.clone().map(|l| l.0),
        m: a.m.clone().map(|l| l.0),
        q: a.q.clone().map(|l| l.0),
        reply_bits: a.n_m.clone().map(|l| l.0),
        trials: a.trials,
        seed: a.seed,
    };
    let mut rows = Vec::new();
    for suite in suites {
        match run_suite(suite, &cfg) {
            Ok(checks) => {
                for c in checks {
                    let ok = c.passed();
                    rows.push((
                        vec![
                            suite.name().into(),
                            c.property.into(),
                            c.instances.into(),
                            c.failures.into(),
                            if ok { "pass" } else { "fail" }.into(),
                            table::opt(c.counterexample),
                            table::opt(c.detail),
                        ],
                        ok,
                    ));
                }
            }
            Err(e) => rows.push((
                vec![
                    suite.name().into(),
                    Value::Null,
                    Value::Null,
                    Value::Null,
                    "error".into(),
                    Value::Null,
                    e.to_string().into(),
                ],
                false,
            )),
        }
    }
    let mut t = Table::new(vec![
        "suite",
        "property",
        "instances",
        "failures",
        "status",
        "counterexample",
        "detail",
    ]);
    finish(
        &mut t,
        rows,
        meta("verify", Some(a.seed), &a.output),
        &a.output,
    )
}
