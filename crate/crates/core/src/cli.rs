//! The `fockchan` command line.
//!
//! Every flag can also come from a `FOCKCHAN_<FLAG>` environment variable or
//! from a flat JSON object given with `--config`. Precedence is flag, then
//! environment, then config file.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::channel::StateJson;
use crate::error::{Error, Result};
use crate::fock::{fock_state, pats_state, thermal_cutoff, thermal_state, FockDensityMatrix};
use crate::info::{coherent_information, sweep, table2, CoherentInfo, LogBase, SweepKind, TableRow, TruncationPolicy};
use crate::kraus::{build_auto, ChannelSpec, Family};
use crate::verify::{self, Suite, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

/// Tail mass left out when a thermal or PATS input is truncated.
const INPUT_TAIL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "fockchan", version, about = "Photon-added Gaussian channels in the Fock basis")]
pub struct Cli {
    /// Flat JSON object of default flag values.
    #[arg(long, global = true, env = "FOCKCHAN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "FOCKCHAN_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build Kraus operators and write them as JSON.
    Kraus(KrausArgs),
    /// Output entropies and coherent information.
    Cohinfo(CohinfoArgs),
    /// Coherent information along one parameter axis, as CSV.
    Sweep(SweepArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    /// att, amp or conj.
    #[arg(long, env = "FOCKCHAN_FAMILY")]
    pub family: Option<Family>,
    #[arg(long, env = "FOCKCHAN_KAPPA", allow_negative_numbers = true, conflicts_with = "kappa_sq_minus_one")]
    pub kappa: Option<f64>,
    /// Gives kappa = sqrt(x^2 - 1).
    #[arg(long, env = "FOCKCHAN_KAPPA_SQ_MINUS_ONE", allow_negative_numbers = true)]
    pub kappa_sq_minus_one: Option<f64>,
    #[arg(long, env = "FOCKCHAN_N_ADD", default_value_t = 0)]
    pub n_add: usize,
}

impl ChannelArgs {
    pub fn spec(&self) -> Result<ChannelSpec> {
        let family = self
            .family
            .ok_or_else(|| Error::Parse("--family is required".into()))?;
        let kappa = match (self.kappa, self.kappa_sq_minus_one) {
            (Some(k), None) => k,
            (None, Some(x)) => {
                if !(x.abs() >= 1.0) {
                    return Err(crate::error::domain("--kappa-sq-minus-one", x, "|x| >= 1"));
                }
                (x * x - 1.0).sqrt()
            }
            _ => return Err(Error::Parse("exactly one of --kappa, --kappa-sq-minus-one is required".into())),
        };
        ChannelSpec::new(family, kappa, self.n_add)
    }
}

#[derive(Debug, Args)]
pub struct KrausArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Input dimension.
    #[arg(long, env = "FOCKCHAN_DIM", default_value_t = 20)]
    pub dim: usize,
    /// Completeness target; output dimension grows until it is met.
    #[arg(long, env = "FOCKCHAN_TOL", default_value_t = 1e-8)]
    pub tol: f64,
    /// Record the completeness defect in the output.
    #[arg(long, env = "FOCKCHAN_CHECK")]
    pub check: bool,
    /// Output file (default: stdout).
    #[arg(long, short, env = "FOCKCHAN_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    #[value(name = "2")]
    Two,
    #[value(name = "e")]
    E,
}

impl From<BaseArg> for LogBase {
    fn from(b: BaseArg) -> Self {
        match b {
            BaseArg::Two => LogBase::Two,
            BaseArg::E => LogBase::E,
        }
    }
}

#[derive(Debug, Args)]
pub struct CohinfoArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Run the five-row conjugator/amplifier table instead.
    #[arg(long, env = "FOCKCHAN_TABLE2")]
    pub table2: bool,
    /// `diag:p0,p1,..`, `fock:j`, `thermal:nbar`, `pats:nbar,k` or a JSON file.
    #[arg(long, env = "FOCKCHAN_INPUT")]
    pub input: Option<String>,
    /// Highest kept output Fock level. Without it a growing schedule is tried.
    #[arg(long, env = "FOCKCHAN_TRUNCATION")]
    pub truncation: Option<usize>,
    #[arg(long, env = "FOCKCHAN_LEAKAGE_THRESHOLD", default_value_t = crate::fock::DEFAULT_LEAKAGE_TOL)]
    pub leakage_threshold: f64,
    #[arg(long, env = "FOCKCHAN_BASE", value_enum, default_value = "2")]
    pub base: BaseArg,
    #[arg(long, short, env = "FOCKCHAN_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// n-add, kappa or truncation.
    #[arg(long, env = "FOCKCHAN_KIND")]
    pub kind: SweepKind,
    /// `a..b` or `a..b:step` (inclusive), or a comma list.
    #[arg(long, env = "FOCKCHAN_GRID")]
    pub grid: String,
    #[arg(long, env = "FOCKCHAN_INPUT")]
    pub input: String,
    /// Highest kept output Fock level for n-add and kappa sweeps.
    #[arg(long, env = "FOCKCHAN_TRUNCATION")]
    pub truncation: Option<usize>,
    #[arg(long, env = "FOCKCHAN_LEAKAGE_THRESHOLD", default_value_t = crate::fock::DEFAULT_LEAKAGE_TOL)]
    pub leakage_threshold: f64,
    #[arg(long, env = "FOCKCHAN_BASE", value_enum, default_value = "2")]
    pub base: BaseArg,
    #[arg(long, short, env = "FOCKCHAN_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suites to run (default: all). Repeat or comma-separate.
    #[arg(long, env = "FOCKCHAN_SUITE", value_delimiter = ',')]
    pub suite: Vec<Suite>,
    /// Scale every Kraus value by `1 + eps`.
    #[arg(long, env = "FOCKCHAN_PERTURB_KRAUS")]
    pub perturb_kraus: Option<f64>,
    #[arg(long, env = "FOCKCHAN_DIM", default_value_t = 12)]
    pub dim: usize,
    #[arg(long, env = "FOCKCHAN_SEED", default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, env = "FOCKCHAN_SAMPLES", default_value_t = 2)]
    pub samples: usize,
    #[arg(long, env = "FOCKCHAN_GUARD_FACTOR", default_value_t = crate::dilation::DEFAULT_GUARD_FACTOR)]
    pub guard_factor: usize,
    #[arg(long, short, env = "FOCKCHAN_OUT")]
    pub out: Option<PathBuf>,
}

/// Parses an input-state spec. `diag:` weights must sum to one.
pub fn parse_input(spec: &str) -> Result<FockDensityMatrix> {
    let (kind, rest) = spec.split_once(':').unwrap_or(("", spec));
    let nums = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{x}': {e}"))))
            .collect()
    };
    match kind {
        "diag" => crate::info::diagonal_rho(&nums(rest)?),
        "fock" => {
            let j: usize = rest.trim().parse().map_err(|e| Error::Parse(format!("fock level '{rest}': {e}")))?;
            Ok(FockDensityMatrix::from_pure(&fock_state(j, j + 1)?))
        }
        "thermal" => {
            let nbar = nums(rest)?[0];
            let d = thermal_state(nbar, thermal_cutoff(nbar, INPUT_TAIL))?;
            Ok(FockDensityMatrix::from_diagonal(&d))
        }
        "pats" => {
            let v = nums(rest)?;
            if v.len() != 2 || v[1] < 0.0 || v[1].fract() != 0.0 {
                return Err(Error::Parse(format!("pats wants 'nbar,k', got '{rest}'")));
            }
            let k = v[1] as usize;
            let d = pats_state(v[0], k, thermal_cutoff(v[0], INPUT_TAIL) + k)?;
            Ok(FockDensityMatrix::from_diagonal(&d))
        }
        _ => {
            let text = fs::read_to_string(spec)
                .map_err(|e| Error::Parse(format!("input '{spec}' is neither a state spec nor a readable file: {e}")))?;
            let s: StateJson = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{spec}: {e}")))?;
            s.to_density(1e-8)
        }
    }
}

/// `a..b`, `a..b:step` (both ends inclusive) or `x,y,z`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::Parse(format!("grid '{s}': {what}"));
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad("not a number"));
    if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, st)) => (num(b)?, num(st)?),
            None => (num(rest)?, 1.0),
        };
        let a = num(a)?;
        if !(step > 0.0) || b < a {
            return Err(bad("need a <= b and step > 0"));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| a + i as f64 * step).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::InvalidState(format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())
                .and_then(|_| so.flush())
                .map_err(|e| Error::InvalidState(e.to_string()))
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Tolerance { .. } => EXIT_TOLERANCE,
        _ => EXIT_USAGE,
    }
}

fn policy(truncation: Option<usize>, threshold: f64, base: BaseArg) -> TruncationPolicy {
    let p = match truncation {
        Some(t) => TruncationPolicy::fixed(t + 1),
        None => TruncationPolicy::default(),
    };
    p.with_leakage_threshold(threshold).with_base(base.into())
}

fn cmd_kraus(a: &KrausArgs) -> Result<i32> {
    let spec = a.channel.spec()?;
    let tol = match spec.family {
        Family::Attenuator => a.tol.min(1e-12),
        _ => a.tol,
    };
    let ch = build_auto(spec.family, spec.kappa, spec.n_add, a.dim, tol)?;
    let mut export = ch.to_export();
    export.completeness_defect = a.check.then(|| ch.completeness_defect());
    let text = serde_json::to_string_pretty(&export).expect("export serializes") + "\n";
    write_output(a.out.as_deref(), &text)?;
    if a.check && ch.completeness_defect() > a.tol {
        eprintln!("completeness defect {:.3e} exceeds {:.3e}", ch.completeness_defect(), a.tol);
        return Ok(EXIT_TOLERANCE);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CohinfoReport<'a> {
    channel: String,
    family: Family,
    kappa: f64,
    n_add: usize,
    input: &'a str,
    #[serde(flatten)]
    result: CoherentInfo,
}

fn report_leakage(r: &CoherentInfo, threshold: f64) -> bool {
    if r.flagged {
        eprintln!(
            "leakage over {threshold:.1e} at dim_out {}: output {:.3e}, complement {:.3e}",
            r.dim_out, r.leakage_out, r.leakage_comp
        );
    }
    r.flagged
}

fn cmd_cohinfo(a: &CohinfoArgs) -> Result<i32> {
    if a.table2 {
        let dim_out = a.truncation.unwrap_or(110) + 1;
        let rows: Vec<TableRow> = table2(dim_out, a.base.into())?;
        let flagged = rows
            .iter()
            .fold(false, |f, r| report_leakage(&r.result, a.leakage_threshold) | f);
        write_output(a.out.as_deref(), &(serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n"))?;
        return Ok(if flagged { EXIT_TOLERANCE } else { EXIT_OK });
    }
    let spec = a.channel.spec()?;
    let input = a
        .input
        .as_deref()
        .ok_or_else(|| Error::Parse("--input is required without --table2".into()))?;
    let rho = parse_input(input)?;
    let result = coherent_information(&spec, &rho, &policy(a.truncation, a.leakage_threshold, a.base))?;
    let flagged = report_leakage(&result, a.leakage_threshold);
    let report = CohinfoReport {
        channel: spec.to_string(),
        family: spec.family,
        kappa: spec.kappa,
        n_add: spec.n_add,
        input,
        result,
    };
    write_output(a.out.as_deref(), &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    Ok(if flagged { EXIT_TOLERANCE } else { EXIT_OK })
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    let rho = parse_input(&a.input)?;
    let grid = parse_grid(&a.grid)?;
    // n-add sweeps take their n from the grid; kappa sweeps their kappa
    let spec = match a.kind {
        SweepKind::Kappa => {
            let family = a.channel.family.ok_or_else(|| Error::Parse("--family is required".into()))?;
            ChannelSpec {
                family,
                kappa: grid.first().copied().unwrap_or(f64::NAN),
                n_add: a.channel.n_add,
            }
        }
        _ => a.channel.spec()?,
    };
    let pol = policy(a.truncation, a.leakage_threshold, a.base);
    let result = if a.kind == SweepKind::Truncation {
        let dims: Vec<f64> = grid.iter().map(|t| t + 1.0).collect();
        let mut r = sweep(a.kind, spec, &rho, &dims, &pol);
        r.axis_values = grid;
        r
    } else {
        sweep(a.kind, spec, &rho, &grid, &pol)
    };
    write_output(a.out.as_deref(), &result.to_csv_string()?)?;
    for (x, s) in result.axis_values.iter().zip(&result.status) {
        if s != "ok" {
            eprintln!("{} = {x}: {s}", result.axis_name);
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let suites = if a.suite.is_empty() { Suite::ALL.to_vec() } else { a.suite.clone() };
    let cfg = VerifyConfig {
        dim_in: a.dim,
        perturb: a.perturb_kraus,
        seed: a.seed,
        samples: a.samples,
        guard_factor: a.guard_factor,
        ..VerifyConfig::default()
    };
    let report = verify::run(&suites, &cfg);
    write_output(a.out.as_deref(), &(report.to_json() + "\n"))?;
    for s in &report.suites {
        eprintln!(
            "{:<18} {} ({} checks, worst ratio {:.2e})",
            s.suite.name(),
            if s.passed { "pass" } else { "FAIL" },
            s.tally.checks,
            s.tally.worst_ratio
        );
        for f in s.tally.failures.iter().take(5) {
            eprintln!("    {f}");
        }
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY })
}

/// `--config` (or `FOCKCHAN_CONFIG`) located before clap runs, since its
/// contents feed clap through the environment.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    std::env::var_os("FOCKCHAN_CONFIG").map(PathBuf::from)
}

/// Flattens a JSON config object into `FOCKCHAN_*` variables that are not
/// already set.
pub fn config_env(text: &str) -> Result<Vec<(String, String)>> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Parse("config must be a flat JSON object".into()))?;
    let mut out = Vec::new();
    for (k, v) in obj {
        let key = format!("FOCKCHAN_{}", k.replace('-', "_").to_uppercase());
        let val = match v {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::Bool(b) => b.to_string(),
            serde_json::Value::Array(xs) => xs
                .iter()
                .map(|x| x.as_str().map_or_else(|| x.to_string(), str::to_string))
                .collect::<Vec<_>>()
                .join(","),
            _ => return Err(Error::Parse(format!("config key '{k}' is not a scalar or list"))),
        };
        out.push((key, val));
    }
    Ok(out)
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if let Some(path) = config_path(&args) {
        let loaded = fs::read_to_string(&path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
            .and_then(|t| config_env(&t));
        match loaded {
            Ok(vars) => {
                for (k, v) in vars {
                    if std::env::var_os(&k).is_none() {
                        std::env::set_var(k, v);
                    }
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(j) = cli.jobs {
        // fails only if the global pool already exists, e.g. in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let r = match &cli.command {
        Command::Kraus(a) => cmd_kraus(a),
        Command::Cohinfo(a) => cmd_cohinfo(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
    };
    r.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1..4").unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(parse_grid("20..140:10").unwrap().len(), 13);
        assert_eq!(parse_grid("0.5, 0.7").unwrap(), vec![0.5, 0.7]);
        assert!(parse_grid("3..1").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn inputs() {
        let r = parse_input("diag:0.6,0.4").unwrap();
        assert_eq!(r.dim(), 2);
        assert_eq!(parse_input("fock:3").unwrap().get(3, 3).re, 1.0);
        assert!((parse_input("thermal:1").unwrap().trace() - 1.0).abs() < 1e-10);
        assert!(parse_input("pats:0.5,2").unwrap().get(0, 0).re.abs() < 1e-15);
        assert!(parse_input("diag:0.5,0.4").is_err());
        assert!(parse_input("pats:1").is_err());
        assert!(parse_input("/no/such/file.json").is_err());
    }

    #[test]
    fn kappa_conventions() {
        let a = ChannelArgs {
            family: Some(Family::Conjugator),
            kappa: None,
            kappa_sq_minus_one: Some(1.5),
            n_add: 0,
        };
        assert!((a.spec().unwrap().kappa - 1.25f64.sqrt()).abs() < 1e-15);
        let b = ChannelArgs { kappa: Some(1.2), family: Some(Family::Attenuator), kappa_sq_minus_one: None, n_add: 0 };
        assert!(matches!(b.spec(), Err(Error::Domain { .. })));
    }

    #[test]
    fn config_flattening() {
        let v = config_env(r#"{"family":"conj","n-add":2,"table2":true,"suite":["oracle","errcorr"]}"#).unwrap();
        assert!(v.contains(&("FOCKCHAN_FAMILY".into(), "conj".into())));
        assert!(v.contains(&("FOCKCHAN_N_ADD".into(), "2".into())));
        assert!(v.contains(&("FOCKCHAN_TABLE2".into(), "true".into())));
        assert!(v.contains(&("FOCKCHAN_SUITE".into(), "oracle,errcorr".into())));
        assert!(config_env("[1]").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["fockchan", "kraus", "--family", "att", "--kappa", "1.2"]), EXIT_USAGE);
        assert_eq!(run(["fockchan", "bogus"]), EXIT_USAGE);
    }
}
