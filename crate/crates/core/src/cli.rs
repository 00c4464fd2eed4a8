//! The `padic-dyn` command line.
//!
//! Exit codes: 0 success, 1 domain error, 2 verification failure, 3 usage error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use serde_json::json;

use crate::dynamics::{
    attraction_bound, closed_form_iterate, finite_difference_multiplier, fixed_point_analysis,
    find_periodic, step,
};
use crate::error::Error;
use crate::norm_geometry::{
    ball_mapping_check, classify_start, no_offsphere_periodics, radius_iterate, MapParams, RadiusExp,
};
use crate::padic::{PAdicContext, PAdicNumber, DEFAULT_PRECISION};
use crate::roots::{cube_roots, roots_of_unity};
use crate::verification::{default_maps, run_suites};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

pub const SEED_ENV: &str = "PADIC_DYN_SEED";

#[derive(Parser, Debug)]
#[command(name = "padic-dyn", version, about = "Exact p-adic dynamics of f(x) = a / x^q")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Norm of a, or distance |a - x| when --x is given
    Norm,
    /// Cube roots of a, or roots of unity of order --k
    Roots,
    /// Fixed points, multiplier and pairwise distances
    FixedPoints,
    /// Exact trajectory of --x, or the radius sequence of --radius
    Iterate,
    /// Trajectory class of the sphere of radius p^(-radius)
    Classify,
    /// Periodic points of period --m
    Periodic,
    /// Basin / Siegel radius bound for r/alpha = p^(-radius)
    Bound,
    /// Seeded verification suites
    Verify,
}

#[derive(Args, Debug, Default, Clone)]
struct Flags {
    #[arg(long, global = true)]
    prime: Option<String>,
    #[arg(long, global = true)]
    precision: Option<String>,
    /// Coefficient as n/m, or v:k when only the valuation is known
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, global = true)]
    q: Option<String>,
    #[arg(long, global = true)]
    m: Option<String>,
    /// Radius exponent e (radius p^(-e)), integer or num/den
    #[arg(long, global = true, allow_hyphen_values = true)]
    radius: Option<String>,
    #[arg(long, global = true)]
    steps: Option<String>,
    #[arg(long, global = true)]
    samples: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    format: Option<String>,
    /// Starting point as n/m
    #[arg(long, global = true, allow_hyphen_values = true)]
    x: Option<String>,
    /// Order of the roots of unity
    #[arg(long, global = true)]
    k: Option<String>,
    /// key=value file; flags override it
    #[arg(long, global = true)]
    config: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Pretty,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Coefficient {
    Rational(BigInt, BigInt),
    ValuationOnly(BigInt),
}

impl FromStr for Coefficient {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(v) = s.strip_prefix("v:") {
            return v
                .trim()
                .parse()
                .map(Coefficient::ValuationOnly)
                .map_err(|_| format!("bad valuation in {s:?}"));
        }
        let (n, d) = parse_fraction(s)?;
        Ok(Coefficient::Rational(n, d))
    }
}

fn parse_fraction(s: &str) -> Result<(BigInt, BigInt), String> {
    let bad = || format!("expected an integer or num/den, got {s:?}");
    match s.split_once('/') {
        Some((n, d)) => Ok((n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?)),
        None => Ok((s.trim().parse().map_err(|_| bad())?, BigInt::from(1))),
    }
}

/// Fully resolved settings: flags over config file over environment over defaults.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliConfig {
    pub prime: Option<u64>,
    pub precision: u32,
    pub a: Option<Coefficient>,
    pub q: u32,
    pub m: Option<u32>,
    pub radius: Option<BigRational>,
    pub seed: u64,
    pub format: Format,
    pub n_steps: u32,
    pub samples: usize,
    pub x: Option<(BigInt, BigInt)>,
    pub k: Option<u64>,
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_config_file(path: &str) -> Result<BTreeMap<String, String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {path}: {e}")))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{path}:{}: expected key=value", lineno + 1)))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn resolve(flags: &Flags) -> Result<CliConfig, Failure> {
    let mut file = match &flags.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };
    let mut take = |flag: &Option<String>, key: &str| {
        let from_file = file.remove(key);
        flag.clone().or(from_file)
    };
    let prime = take(&flags.prime, "prime");
    let precision = take(&flags.precision, "precision");
    let a = take(&flags.a, "a");
    let q = take(&flags.q, "q");
    let m = take(&flags.m, "m");
    let radius = take(&flags.radius, "radius");
    let steps = take(&flags.steps, "steps");
    let samples = take(&flags.samples, "samples");
    let seed = take(&flags.seed, "seed").or_else(|| std::env::var(SEED_ENV).ok());
    let format = take(&flags.format, "format");
    let x = take(&flags.x, "x");
    let k = take(&flags.k, "k");
    if let Some(key) = file.keys().next() {
        return Err(usage(format!("unknown config key {key:?}")));
    }

    fn num<T: FromStr>(v: Option<String>, name: &str) -> Result<Option<T>, Failure> {
        v.map(|s| {
            s.trim()
                .parse()
                .map_err(|_| usage(format!("--{name}: cannot parse {s:?}")))
        })
        .transpose()
    }

    let precision = num::<u32>(precision, "precision")?.unwrap_or(DEFAULT_PRECISION);
    if !(8..=4096).contains(&precision) {
        return Err(usage(format!("--precision must lie in [8, 4096], got {precision}")));
    }
    let q = num::<u32>(q, "q")?.unwrap_or(2);
    if q == 0 {
        return Err(usage("--q must be at least 1"));
    }
    let format = match format {
        None => Format::Json,
        Some(f) => Format::from_str(&f, true).map_err(|_| usage(format!("--format: unknown format {f:?}")))?,
    };
    Ok(CliConfig {
        prime: num(prime, "prime")?,
        precision,
        a: a.map(|s| s.parse().map_err(|e: String| usage(format!("--a: {e}")))).transpose()?,
        q,
        m: num(m, "m")?,
        radius: radius
            .map(|s| {
                let (n, d) = parse_fraction(&s).map_err(|e| usage(format!("--radius: {e}")))?;
                if d.is_zero() {
                    return Err(usage("--radius: zero denominator"));
                }
                Ok(BigRational::new(n, d))
            })
            .transpose()?,
        seed: num(seed, "seed")?.unwrap_or(0),
        format,
        n_steps: num(steps, "steps")?.unwrap_or(100),
        samples: num(samples, "samples")?.unwrap_or(100),
        x: x.map(|s| parse_fraction(&s).map_err(|e| usage(format!("--x: {e}")))).transpose()?,
        k: num(k, "k")?,
    })
}

impl CliConfig {
    fn prime(&self) -> Result<u64, Failure> {
        self.prime.ok_or_else(|| usage("--prime is required"))
    }

    fn context(&self) -> Result<PAdicContext, Failure> {
        Ok(PAdicContext::new(self.prime()?, self.precision)?)
    }

    fn coefficient(&self) -> Result<&Coefficient, Failure> {
        self.a.as_ref().ok_or_else(|| usage("--a is required"))
    }

    fn exact_a(&self) -> Result<PAdicNumber, Failure> {
        match self.coefficient()? {
            Coefficient::Rational(n, d) => Ok(self.context()?.from_rational(n.clone(), d.clone())?),
            Coefficient::ValuationOnly(_) => Err(usage("this command needs --a as n/m, not v:k")),
        }
    }

    fn params(&self) -> Result<MapParams, Failure> {
        match self.coefficient()? {
            Coefficient::ValuationOnly(v) => Ok(MapParams::valuation_only(self.prime()?, v.clone(), self.q)?),
            Coefficient::Rational(..) => Ok(MapParams::exact(self.exact_a()?, self.q)?),
        }
    }

    fn radius(&self) -> Result<RadiusExp, Failure> {
        let e = self.radius.clone().ok_or_else(|| usage("--radius is required"))?;
        Ok(RadiusExp::new(self.prime()?, e))
    }

    fn m(&self) -> Result<u32, Failure> {
        self.m.ok_or_else(|| usage("--m is required"))
    }
}

enum Output {
    Json(serde_json::Value),
    Table(serde_json::Value, String),
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn cmd_norm(cfg: &CliConfig) -> Result<Output, Failure> {
    let p = cfg.prime()?;
    if let Coefficient::ValuationOnly(v) = cfg.coefficient()? {
        return Ok(Output::Json(json!({ "norm": RadiusExp::from_int(p, v.clone()) })));
    }
    let a = cfg.exact_a()?;
    let mut out = json!({ "value": a, "norm": a.norm() });
    if let Some((n, d)) = &cfg.x {
        let x = cfg.context()?.from_rational(n.clone(), d.clone())?;
        out["x"] = to_value(&x);
        out["distance"] = to_value(&a.distance(&x)?);
    }
    Ok(Output::Json(out))
}

fn cmd_roots(cfg: &CliConfig) -> Result<Output, Failure> {
    let set = match cfg.k {
        Some(k) => roots_of_unity(k, &cfg.context()?)?,
        None => cube_roots(&cfg.exact_a()?)?,
    };
    Ok(Output::Json(to_value(&set)))
}

fn cmd_fixed_points(cfg: &CliConfig) -> Result<Output, Failure> {
    let params = cfg.params()?;
    let report = fixed_point_analysis(&params)?;
    let mut out = to_value(&report);
    let j = cfg.precision / 2;
    let readings = report
        .points()
        .iter()
        .map(|x| finite_difference_multiplier(&params, x, j))
        .collect::<Result<Vec<_>, _>>()?;
    out["finite_difference"] = json!({ "h_exponent": j, "ratios": readings });
    Ok(Output::Json(out))
}

fn cmd_iterate(cfg: &CliConfig) -> Result<Output, Failure> {
    let params = cfg.params()?;
    if let Some((n, d)) = &cfg.x {
        let x = cfg.context()?.from_rational(n.clone(), d.clone())?;
        let mut rows = Vec::new();
        let mut csv = String::from("n,num,den\n");
        let mut agree = true;
        let mut y = x.clone();
        for n in 0..=cfg.n_steps {
            if n > 0 {
                y = step(&params, &y)?;
                agree &= closed_form_iterate(&params, &x, n)? == y;
            }
            let v = y.valuation().cloned().unwrap_or_default();
            csv.push_str(&format!("{n},{v},1\n"));
            rows.push(json!({ "n": n, "value": y, "norm": y.norm() }));
        }
        let out = json!({ "x": x, "trajectory": rows, "closed_form_agrees": agree });
        return Ok(Output::Table(out, csv));
    }
    let trajectory = radius_iterate(&params, &cfg.radius()?, cfg.n_steps.max(1))?;
    let csv = trajectory.to_csv();
    Ok(Output::Table(to_value(&trajectory), csv))
}

fn cmd_classify(cfg: &CliConfig) -> Result<Output, Failure> {
    let params = cfg.params()?;
    let r = cfg.radius()?;
    let mut out = json!({
        "alpha": params.alpha(),
        "radius": r,
        "classification": classify_start(&params, &r)?,
        "image": ball_mapping_check(&params, &r)?,
    });
    if let Some(m) = cfg.m {
        if r != params.alpha() {
            out["offsphere_periodic_witness"] = to_value(&no_offsphere_periodics(&params, &r, m)?);
        }
    }
    Ok(Output::Json(out))
}

fn cmd_periodic(cfg: &CliConfig) -> Result<Output, Failure> {
    Ok(Output::Json(to_value(&find_periodic(&cfg.params()?, cfg.m()?)?)))
}

fn cmd_bound(cfg: &CliConfig) -> Result<Output, Failure> {
    Ok(Output::Json(to_value(&attraction_bound(cfg.m()?, &cfg.radius()?, cfg.prime()?)?)))
}

fn cmd_verify(cfg: &CliConfig) -> Result<(Output, bool), Failure> {
    let maps = match cfg.prime {
        None => default_maps(cfg.precision)?,
        Some(p) => {
            let a = match &cfg.a {
                None => PAdicContext::new(p, cfg.precision)?.one(),
                Some(_) => cfg.exact_a()?,
            };
            vec![MapParams::exact(a, 2)?]
        }
    };
    let mut reports = Vec::new();
    for params in &maps {
        reports.extend(run_suites(params, cfg.samples, cfg.n_steps, cfg.seed)?);
    }
    let pass = reports.iter().all(|r| r.pass);
    let out = json!({
        "seed": cfg.seed,
        "precision": cfg.precision,
        "reports": reports,
        "pass": pass,
    });
    Ok((Output::Json(out), pass))
}

fn dispatch(command: Command, cfg: &CliConfig) -> Result<(Output, bool), Failure> {
    let ok = |o: Output| (o, true);
    Ok(match command {
        Command::Norm => ok(cmd_norm(cfg)?),
        Command::Roots => ok(cmd_roots(cfg)?),
        Command::FixedPoints => ok(cmd_fixed_points(cfg)?),
        Command::Iterate => ok(cmd_iterate(cfg)?),
        Command::Classify => ok(cmd_classify(cfg)?),
        Command::Periodic => ok(cmd_periodic(cfg)?),
        Command::Bound => ok(cmd_bound(cfg)?),
        Command::Verify => cmd_verify(cfg)?,
    })
}

fn render(output: Output, format: Format) -> Result<String, Failure> {
    let value = match (&output, format) {
        (Output::Table(_, csv), Format::Csv) => return Ok(csv.clone()),
        (Output::Json(_), Format::Csv) => return Err(usage("--format csv is only available for iterate")),
        (Output::Json(v), _) | (Output::Table(v, _), _) => v,
    };
    let text = match format {
        Format::Pretty => serde_json::to_string_pretty(value),
        _ => serde_json::to_string(value),
    }
    .expect("json values serialize");
    Ok(text + "\n")
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = resolve(&cli.opts).and_then(|cfg| {
        let (output, pass) = dispatch(cli.command, &cfg)?;
        Ok((render(output, cfg.format)?, pass))
    });
    match result {
        Ok((text, pass)) => {
            let _ = out.write_all(text.as_bytes());
            if pass {
                EXIT_OK
            } else {
                let _ = writeln!(err, "verification failed");
                EXIT_VERIFY
            }
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "usage error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Domain(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DOMAIN
        }
    }
}
