//! The `paver` command line.
//!
//! Exit codes: 0 success or property holds, 1 property fails (not
//! equivalent), 2 usage or parse error, 3 resource or analysis error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::equivalence::{check, minimize, schedule, success_probability, Horizon, Mode, Policy, ProbQuery};
use crate::parser::{parse_pattern, parse_probability, parse_spec, print_spec};
use crate::protocols::{apply_pi_overrides, build_abp, build_ucp, delta_names, pis, AbpParams, UcpParams};
use crate::semantics::{expand, Pts, DEFAULT_STATE_LIMIT};
use crate::simulate::{run_with_trace, write_trace_csv, Scheduler};
use crate::term::{ActionPattern, ProcessSpec, Rational};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ANALYSIS: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "paver", version, about = "Probabilistic process algebra toolkit with imperfect actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a specification and print it back in normal form
    Parse {
        spec: PathBuf,
        #[command(flatten)]
        pi: PiArgs,
    },
    /// Decide whether two specifications are equivalent
    Check {
        left: PathBuf,
        right: PathBuf,
        /// Equivalence to decide
        #[arg(long, value_enum, default_value_t = ModeArg::RootedBranching)]
        mode: ModeArg,
        #[command(flatten)]
        pi: PiArgs,
        #[command(flatten)]
        limit: LimitArgs,
    },
    /// Expand a specification into its transition system
    Lts {
        spec: PathBuf,
        /// Output format
        #[arg(long, value_enum, default_value_t = Format::Pts)]
        out: Format,
        #[command(flatten)]
        pi: PiArgs,
        #[command(flatten)]
        limit: LimitArgs,
    },
    /// Exact probability of a success action
    Prob {
        spec: PathBuf,
        /// Action pattern counting as success, e.g. s_C or s_C(d1); repeatable
        #[arg(long, required = true, num_args = 1..)]
        success: Vec<String>,
        /// round: success before returning to the initial state; eventual: at any time
        #[arg(long, value_enum, default_value_t = HorizonArg::Round)]
        horizon: HorizonArg,
        /// How to resolve nondeterministic choices first
        #[arg(long, value_enum, default_value_t = ScheduleArg::None)]
        schedule: ScheduleArg,
        #[command(flatten)]
        pi: PiArgs,
        #[command(flatten)]
        limit: LimitArgs,
    },
    /// Write the specification of a bundled protocol
    Protocol {
        #[arg(value_enum)]
        name: ProtocolArg,
        /// Number of data elements d1..dn
        #[arg(long, default_value_t = 1)]
        delta_size: usize,
        /// Output file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        pi: PiArgs,
    },
    /// Monte-Carlo simulation
    Simulate {
        spec: PathBuf,
        /// Number of runs
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        /// Random seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Action pattern counting as success; repeatable
        #[arg(long, required = true, num_args = 1..)]
        success: Vec<String>,
        /// Maximum number of steps per run
        #[arg(long, default_value_t = 10_000)]
        step_cap: u64,
        /// Comma-separated choice indices; uniform choices when absent
        #[arg(long, value_delimiter = ',')]
        script: Option<Vec<usize>>,
        /// Write one CSV row per run to this file
        #[arg(long)]
        trace_csv: Option<PathBuf>,
        #[command(flatten)]
        pi: PiArgs,
        #[command(flatten)]
        limit: LimitArgs,
    },
    /// Quotient by bisimilarity, printed as .pts
    Minimize {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = MinModeArg::Branching)]
        mode: MinModeArg,
        #[command(flatten)]
        pi: PiArgs,
        #[command(flatten)]
        limit: LimitArgs,
    },
}

#[derive(Args, Debug)]
struct PiArgs {
    /// Set a probability parameter, e.g. pi3=2/3; `all=v` sets every parameter
    #[arg(long = "pi", value_name = "NAME=VALUE")]
    pi: Vec<String>,
}

#[derive(Args, Debug)]
struct LimitArgs {
    /// State budget for expansion
    #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
    limit: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Strong,
    Branching,
    RootedBranching,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MinModeArg {
    Strong,
    Branching,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Pts,
    Dot,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HorizonArg {
    Round,
    Eventual,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScheduleArg {
    Uniform,
    None,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProtocolArg {
    Ucp,
    Abp,
}

/// A failure carrying its exit code.
struct Fail(i32, String);

type CmdResult = Result<i32, Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail(EXIT_USAGE, msg.into())
}

fn analysis(msg: impl ToString) -> Fail {
    Fail(EXIT_ANALYSIS, msg.to_string())
}

fn io_fail(e: std::io::Error) -> Fail {
    Fail(EXIT_ANALYSIS, format!("I/O error: {e}"))
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{text}");
                EXIT_OK
            } else {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Parse { spec, pi } => {
            let spec = load(&spec, &pi)?;
            write!(out, "{}", print_spec(&spec)).map_err(io_fail)?;
            Ok(EXIT_OK)
        }
        Command::Check {
            left,
            right,
            mode,
            pi,
            limit,
        } => cmd_check(&left, &right, mode, &pi, limit.limit, out),
        Command::Lts { spec, out: fmt, pi, limit } => {
            let pts = load_pts(&spec, &pi, limit.limit)?;
            let text = match fmt {
                Format::Pts => pts.to_pts_text(),
                Format::Dot => pts.to_dot(),
            };
            write!(out, "{text}").map_err(io_fail)?;
            Ok(EXIT_OK)
        }
        Command::Prob {
            spec,
            success,
            horizon,
            schedule: sched,
            pi,
            limit,
        } => {
            let mut pts = load_pts(&spec, &pi, limit.limit)?;
            if let ScheduleArg::Uniform = sched {
                pts = schedule(&pts, &Policy::Uniform).map_err(analysis)?;
            }
            let q = ProbQuery {
                source: pts.init(),
                success: patterns(&success)?,
                horizon: match horizon {
                    HorizonArg::Round => Horizon::Round,
                    HorizonArg::Eventual => Horizon::Eventual,
                },
            };
            let p = success_probability(&pts, &q).map_err(analysis)?;
            writeln!(out, "{}", format_probability(&p)).map_err(io_fail)?;
            Ok(EXIT_OK)
        }
        Command::Protocol {
            name,
            delta_size,
            out: path,
            pi,
        } => {
            let overrides = pi_overrides(&pi)?;
            let spec = match name {
                ProtocolArg::Ucp => {
                    let mut p = UcpParams {
                        pi: pis::<4>(&[]),
                        delta: delta_names(delta_size),
                    };
                    apply_pi_overrides(&mut p.pi, &overrides).map_err(|e| usage(e.to_string()))?;
                    build_ucp(&p)
                }
                ProtocolArg::Abp => {
                    let mut p = AbpParams {
                        pi: pis::<12>(&[]),
                        delta: delta_names(delta_size),
                        q: Rational::zero(),
                    };
                    apply_pi_overrides(&mut p.pi, &overrides).map_err(|e| usage(e.to_string()))?;
                    build_abp(&p)
                }
            }
            .map_err(|e| usage(e.to_string()))?;
            let text = print_spec(&spec);
            match path {
                Some(path) => fs::write(&path, text).map_err(io_fail)?,
                None => write!(out, "{text}").map_err(io_fail)?,
            }
            Ok(EXIT_OK)
        }
        Command::Simulate {
            spec,
            runs,
            seed,
            success,
            step_cap,
            script,
            trace_csv,
            pi,
            limit,
        } => {
            let pts = load_pts(&spec, &pi, limit.limit)?;
            let scheduler = match script {
                Some(s) => Scheduler::Scripted(s),
                None => Scheduler::Uniform,
            };
            let (stats, records) = run_with_trace(&pts, &scheduler, &patterns(&success)?, runs, step_cap, seed)
                .map_err(|e| usage(e.to_string()))?;
            if let Some(path) = trace_csv {
                let file = fs::File::create(&path).map_err(io_fail)?;
                write_trace_csv(&records, std::io::BufWriter::new(file)).map_err(io_fail)?;
            }
            write!(out, "{stats}").map_err(io_fail)?;
            Ok(EXIT_OK)
        }
        Command::Minimize { spec, mode, pi, limit } => {
            let pts = load_pts(&spec, &pi, limit.limit)?;
            let mode = match mode {
                MinModeArg::Strong => Mode::Strong,
                MinModeArg::Branching => Mode::Branching,
            };
            write!(out, "{}", minimize(&pts, mode).to_pts_text()).map_err(io_fail)?;
            Ok(EXIT_OK)
        }
    }
}

fn cmd_check(left: &Path, right: &Path, mode: ModeArg, pi: &PiArgs, limit: usize, out: &mut dyn Write) -> CmdResult {
    let overrides = pi_overrides(pi)?;
    let (l, r) = (read_spec(left)?, read_spec(right)?);
    for (name, _) in &overrides {
        if name != "all" && !l.params.contains_key(name) && !r.params.contains_key(name) {
            return Err(usage(format!("unknown probability parameter '{name}'")));
        }
    }
    let l = apply_overrides(l, &overrides, true)?;
    let r = apply_overrides(r, &overrides, true)?;
    let (pl, pr) = (expand_spec(&l, limit)?, expand_spec(&r, limit)?);
    let mode = match mode {
        ModeArg::Strong => Mode::Strong,
        ModeArg::Branching => Mode::Branching,
        ModeArg::RootedBranching => Mode::RootedBranching,
    };
    let res = check(&pl, &pr, mode);
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(io_fail);
    w(out, format!("{} ({mode})", if res.equivalent { "EQUIVALENT" } else { "NOT EQUIVALENT" }))?;
    w(out, format!("left states: {}", pl.len()))?;
    w(out, format!("right states: {}", pr.len()))?;
    w(out, format!("blocks: {}", res.witness.block_count()))?;
    if mode != Mode::Strong {
        w(out, format!("divergence: {}", if res.divergent { "yes" } else { "no" }))?;
    }
    if let Some(report) = &res.report {
        w(out, format!("distinguishing: {report}"))?;
    }
    Ok(if res.equivalent { EXIT_OK } else { EXIT_FAILS })
}

fn patterns(texts: &[String]) -> Result<Vec<ActionPattern>, Fail> {
    texts
        .iter()
        .map(|t| parse_pattern(t).map_err(|_| usage(format!("invalid action pattern '{t}'"))))
        .collect()
}

fn pi_overrides(pi: &PiArgs) -> Result<Vec<(String, Rational)>, Fail> {
    pi.pi
        .iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("expected NAME=VALUE, got '{kv}'")))?;
            let value = parse_probability(v)
                .filter(|p| p.is_positive() && *p <= Rational::one())
                .ok_or_else(|| usage(format!("'{v}' is not a probability in (0,1]")))?;
            Ok((k.trim().to_string(), value))
        })
        .collect()
}

fn apply_overrides(mut spec: ProcessSpec, overrides: &[(String, Rational)], lenient: bool) -> Result<ProcessSpec, Fail> {
    for (name, value) in overrides {
        spec = if name == "all" {
            spec.with_all_params(value)
        } else if lenient && !spec.params.contains_key(name) {
            Ok(spec)
        } else {
            spec.with_params(&[(name.clone(), value.clone())])
        }
        .map_err(|e| usage(e.to_string()))?;
    }
    Ok(spec)
}

fn read_spec(path: &Path) -> Result<ProcessSpec, Fail> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_spec(&text).map_err(|errs| {
        let lines: Vec<String> = errs
            .0
            .iter()
            .map(|d| format!("{}:{}:{}: {}", path.display(), d.span.line, d.span.column, d.message))
            .collect();
        usage(lines.join("\n"))
    })
}

fn load(path: &Path, pi: &PiArgs) -> Result<ProcessSpec, Fail> {
    let overrides = pi_overrides(pi)?;
    apply_overrides(read_spec(path)?, &overrides, false)
}

fn expand_spec(spec: &ProcessSpec, limit: usize) -> Result<Pts, Fail> {
    expand(spec, limit).map_err(analysis)
}

fn load_pts(path: &Path, pi: &PiArgs, limit: usize) -> Result<Pts, Fail> {
    expand_spec(&load(path, pi)?, limit)
}

/// `n/d (decimal)` with the decimal rounded to 12 significant digits and
/// at least one fractional digit: `1/16 (0.0625)`, `1 (1.0)`.
pub fn format_probability(p: &Rational) -> String {
    format!("{p} ({})", significant_decimal(p, 12))
}

fn significant_decimal(p: &Rational, digits: u32) -> String {
    if p.is_zero() {
        return "0.0".to_string();
    }
    let neg = p.is_negative();
    let p = p.abs();
    let ten = Rational::from_integer(BigInt::from(10));
    let mut exp: i32 = 0;
    while p >= pow10(exp + 1, &ten) {
        exp += 1;
    }
    while p < pow10(exp, &ten) {
        exp -= 1;
    }
    // p * 10^(digits-1-exp), rounded half up
    let scaled = &p * pow10(digits as i32 - 1 - exp, &ten);
    let mut n = (scaled + Rational::new(1.into(), 2.into())).floor().to_integer();
    if n == BigInt::from(10).pow(digits) {
        n /= 10;
        exp += 1;
    }
    let s = n.to_string();
    let (int_part, frac_part) = if exp >= 0 {
        let point = exp as usize + 1;
        if point >= s.len() {
            (format!("{s}{}", "0".repeat(point - s.len())), String::new())
        } else {
            (s[..point].to_string(), s[point..].to_string())
        }
    } else {
        ("0".to_string(), format!("{}{s}", "0".repeat((-exp - 1) as usize)))
    };
    let frac = frac_part.trim_end_matches('0');
    let frac = if frac.is_empty() { "0" } else { frac };
    format!("{}{int_part}.{frac}", if neg { "-" } else { "" })
}

fn pow10(e: i32, ten: &Rational) -> Rational {
    if e >= 0 {
        ten.pow(e)
    } else {
        Rational::one() / ten.pow(-e)
    }
}
