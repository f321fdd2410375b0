//! Command-line front end: `energy`, `table`, `sweep`, `wavefunction`, `verify`.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid state, 3 verification failure.
//! Every command writes into an [`Outcome`] so tests can drive it in-process.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::conformable::{parse_rational, FracOrder};
use crate::error::{Error, Result};
use crate::hulthen_kg::{self, Eigenstate, HulthenParams};
use crate::verify::{self, FdConfig, RESIDUAL_TOLERANCE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID_STATE: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

/// Relative agreement required between the closed form and the numeric root.
pub const QUANTIZE_AGREEMENT: f64 = 1e-10;
/// Residual an energy perturbed by 1% must exceed.
pub const PERTURBED_RESIDUAL: f64 = 1e-3;
pub const RESIDUAL_POINTS: usize = 200;

const KNOWN_TYPOS: &str = include_str!("../data/known_typos.csv");
const SUBCOMMANDS: [&str; 5] = ["energy", "table", "sweep", "wavefunction", "verify"];

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn usage(msg: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "frackg",
    version,
    about = "Fractional Klein-Gordon bound states in a generalized Hulthen potential"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// key=value file mirroring the long flags; command-line flags win
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy, eps^2, R, Q and validity flags of one level
    Energy(EnergyArgs),
    /// Ground-state table at S0 = 0.25 in Compton units
    Table(TableArgs),
    /// Ground-state energy over a grid of (alpha, q, mu)
    Sweep(SweepArgs),
    /// Rodrigues wavefunction sampled on a z grid
    Wavefunction(WavefunctionArgs),
    /// Run the numeric oracles and print a JSON report
    Verify(VerifyArgs),
}

fn parse_order(s: &str) -> std::result::Result<FracOrder, String> {
    s.parse::<FracOrder>().map_err(|e| e.to_string())
}

/// Exact fraction or decimal, falling back to ordinary float syntax.
fn parse_real(s: &str) -> std::result::Result<f64, String> {
    if let Ok(r) = parse_rational(s) {
        return r.to_f64().ok_or_else(|| format!("{s} is out of range"));
    }
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("{s:?} is not a finite number")),
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct MassArgs {
    /// Particle mass
    #[arg(long, conflicts_with = "compton_units")]
    pub m: Option<f64>,
    /// Set m = alpha
    #[arg(long)]
    pub compton_units: bool,
}

impl MassArgs {
    fn resolve(&self, alpha: f64) -> Result<f64> {
        match (self.m, self.compton_units) {
            (Some(m), false) => Ok(m),
            (None, true) => Ok(alpha),
            (Some(_), true) => Err(Error::InvalidParameter("--m and --compton-units are exclusive".into())),
            (None, false) => Err(Error::InvalidParameter("pass --m or --compton-units".into())),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Fractional order in (0, 1], e.g. 1/2 or 0.75
    #[arg(long, value_parser = parse_order)]
    pub mu: FracOrder,
    /// Deformation parameter
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    pub q: f64,
    #[arg(long, value_parser = parse_real)]
    pub alpha: f64,
    /// Potential depth
    #[arg(long = "S0", alias = "s0", value_parser = parse_real, default_value = "0.25")]
    pub s0: f64,
    #[command(flatten)]
    pub mass: MassArgs,
}

impl ModelArgs {
    pub fn params(&self) -> Result<HulthenParams> {
        let m = self.mass.resolve(self.alpha)?;
        HulthenParams::new(m, self.s0, self.alpha, self.q, self.mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct EnergyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub n: u32,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Also report the negative-energy partner -E
    #[arg(long)]
    pub negative: bool,
    /// Exit 2 when the quantization root is negative
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    /// Table number: 1 (alpha = 0.5), 2 (alpha = 1), 3 (alpha = 2)
    #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
    pub which: u8,
    /// One row per cell with validity flags instead of the q x mu grid
    #[arg(long)]
    pub long: bool,
    /// Write the discrepancy listing as CSV here
    #[arg(long, value_name = "PATH")]
    pub discrepancies: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Comma-separated alpha values
    #[arg(long, value_parser = parse_real, value_delimiter = ',', default_value = "0.5,1,2")]
    pub alpha: Vec<f64>,
    /// Comma-separated q values
    #[arg(long, value_parser = parse_real, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.5,1,1.5")]
    pub q: Vec<f64>,
    /// Comma-separated mu values
    #[arg(long, value_parser = parse_order, value_delimiter = ',', conflicts_with = "mu_points")]
    pub mu: Option<Vec<FracOrder>>,
    /// Use mu = k/N for k = 1..N
    #[arg(long, value_name = "N")]
    pub mu_points: Option<i64>,
    #[arg(long = "S0", alias = "s0", value_parser = parse_real, default_value = "0.25")]
    pub s0: f64,
    #[arg(long, default_value_t = 0)]
    pub n: u32,
    #[command(flatten)]
    pub mass: MassArgs,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WavefunctionArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub n: u32,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Lower grid end (default z_max / 1000)
    #[arg(long, value_parser = parse_real)]
    pub z_min: Option<f64>,
    /// Upper grid end, clipped to the evaluation domain
    #[arg(long, value_parser = parse_real)]
    pub z_max: Option<f64>,
    /// Choose B_n so that the integral of |psi(x)|^2 over x is 1
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Residual,
    Quantization,
    Fd,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(value_enum, default_value = "all")]
    pub suite: Suite,
    /// CSV with columns mu,q,alpha,S0,m,n and optional energy_factor
    #[arg(long, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
    /// Single case instead of a matrix (needs --q, --alpha and a mass)
    #[arg(long, value_parser = parse_order, conflicts_with = "matrix")]
    pub mu: Option<FracOrder>,
    #[arg(long, value_parser = parse_real, allow_hyphen_values = true)]
    pub q: Option<f64>,
    #[arg(long, value_parser = parse_real)]
    pub alpha: Option<f64>,
    #[arg(long = "S0", alias = "s0", value_parser = parse_real, default_value = "0.25")]
    pub s0: f64,
    #[command(flatten)]
    pub mass: MassArgs,
    #[arg(long, default_value_t = 0)]
    pub n: u32,
}

/// Parses `args` (program name first), applies `--config`, and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match apply_config(args) {
        Ok(a) => a,
        Err(msg) => return Outcome::usage(msg),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    match cli.command {
        Command::Energy(a) => cmd_energy(&a),
        Command::Table(a) => cmd_table(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Wavefunction(a) => cmd_wavefunction(&a),
        Command::Verify(a) => cmd_verify(&a),
    }
}

/// `key = value` lines, `#` comments. Keys are long flag names without `--`.
pub fn parse_config(text: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
        let key = k.trim().trim_start_matches("--").to_string();
        let value = v.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(format!("config line {}: empty key", i + 1));
        }
        out.push((key, value));
    }
    Ok(out)
}

fn flag_name(arg: &str) -> Option<String> {
    let body = arg.strip_prefix("--")?;
    Some(body.split('=').next().unwrap_or(body).to_string())
}

/// Splices config entries in right after the subcommand, skipping keys the
/// command line already sets (and the mass flag that conflicts with one set).
fn apply_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(args) };
    let Some(sub_at) = strs
        .iter()
        .skip(1)
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .map(|i| i + 1)
    else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let entries = parse_config(&text)?;
    let given: HashSet<String> = strs.iter().filter_map(|a| flag_name(a)).collect();
    let canon = |k: &str| if k == "s0" { "S0".to_string() } else { k.to_string() };
    let mut injected: Vec<OsString> = Vec::new();
    for (key, value) in entries {
        let key = canon(&key);
        let shadowed = given.contains(&key)
            || (key == "S0" && given.contains("s0"))
            || (key == "m" && given.contains("compton-units"))
            || (key == "compton-units" && given.contains("m"));
        if shadowed {
            continue;
        }
        match value.as_str() {
            "true" => injected.push(format!("--{key}").into()),
            "false" => {}
            _ => injected.push(format!("--{key}={value}").into()),
        }
    }
    let mut out = args[..=sub_at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[sub_at + 1..]);
    Ok(out)
}

/// Rounds to `sig` significant figures and prints without exponent.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = |v: f64| (sig as i32 - 1 - v.abs().log10().floor() as i32).max(0) as usize;
    let first = format!("{:.*}", digits(x), x);
    let rounded: f64 = first.parse().unwrap_or(x);
    format!("{:.*}", digits(rounded), rounded)
}

fn ratio_decimal(mu: &FracOrder) -> String {
    format!("{}", mu.value())
}

#[derive(Debug, Clone, Serialize)]
struct EnergyRecord<'a> {
    mu: String,
    q: f64,
    alpha: f64,
    s0: f64,
    m: f64,
    #[serde(flatten)]
    state: &'a Eigenstate,
    #[serde(skip_serializing_if = "Option::is_none")]
    energy_negative: Option<f64>,
}

fn write_energy_text(out: &mut String, p: &HulthenParams, s: &Eigenstate, negative: bool) {
    let _ = writeln!(out, "mu {}", p.mu);
    let _ = writeln!(out, "n {}", s.n);
    let _ = writeln!(out, "energy {}", s.energy);
    if negative {
        let _ = writeln!(out, "energy_negative {}", hulthen_kg::negative_energy(s));
    }
    let _ = writeln!(out, "eps_sq {}", s.eps_sq);
    let _ = writeln!(out, "R {}", s.radical_r);
    let _ = writeln!(out, "quantization_root {}", s.quantization_root);
    let _ = writeln!(out, "Q {}", s.radical_q);
    let _ = writeln!(out, "real_energy {}", s.valid.real_energy);
    let _ = writeln!(out, "nonneg_radical {}", s.valid.nonneg_radical);
    let _ = writeln!(out, "bound {}", s.valid.bound);
}

pub fn cmd_energy(a: &EnergyArgs) -> Outcome {
    let p = match a.model.params() {
        Ok(p) => p,
        Err(e) => return Outcome::usage(e),
    };
    let state = match hulthen_kg::energy_or_diagnostic(a.n, &p) {
        Ok(s) => s,
        Err(e @ Error::InvalidParameter(_)) => return Outcome::usage(e),
        Err(e) => {
            return Outcome {
                code: EXIT_INVALID_STATE,
                stdout: String::new(),
                stderr: format!("error: {e}\n"),
            };
        }
    };
    match state {
        Err(diag) => Outcome {
            code: EXIT_INVALID_STATE,
            stdout: format!("{}\n", json!({ "error": "imaginary_energy", "state": diag })),
            stderr: format!("error: E^2 = {} < 0 for n = {}\n", diag.energy_sq, diag.n),
        },
        Ok(s) => {
            let mut stdout = String::new();
            match a.format {
                Format::Text => write_energy_text(&mut stdout, &p, &s, a.negative),
                Format::Json => {
                    let rec = EnergyRecord {
                        mu: p.mu.to_string(),
                        q: p.q,
                        alpha: p.alpha,
                        s0: p.s0,
                        m: p.m,
                        state: &s,
                        energy_negative: a.negative.then(|| hulthen_kg::negative_energy(&s)),
                    };
                    stdout = format!("{}\n", serde_json::to_string(&rec).unwrap_or_default());
                }
            }
            if a.strict && !s.valid.nonneg_radical {
                return Outcome {
                    code: EXIT_INVALID_STATE,
                    stdout,
                    stderr: format!("error: negative quantization root R = {}\n", s.quantization_root),
                };
            }
            Outcome {
                code: EXIT_OK,
                stdout,
                stderr: String::new(),
            }
        }
    }
}

pub const TABLE_S0: f64 = 0.25;
pub const TABLE_Q: [f64; 3] = [0.5, 1.0, 1.5];
pub const TABLE_MU: [(i64, i64); 4] = [(1, 4), (1, 2), (3, 4), (1, 1)];

pub fn table_alpha(which: u8) -> Option<f64> {
    match which {
        1 => Some(0.5),
        2 => Some(1.0),
        3 => Some(2.0),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCell {
    pub table: u8,
    pub alpha: f64,
    pub q: f64,
    pub mu: FracOrder,
    pub state: Eigenstate,
}

/// All 12 ground-state cells of one table, rows by q then columns by mu.
pub fn table_cells(which: u8) -> Result<Vec<TableCell>> {
    let alpha = table_alpha(which).ok_or_else(|| Error::InvalidParameter(format!("no table {which}")))?;
    let mut cells = Vec::with_capacity(12);
    for q in TABLE_Q {
        for (num, den) in TABLE_MU {
            let mu = FracOrder::from_ratio(num, den)?;
            let p = HulthenParams::compton(TABLE_S0, alpha, q, mu)?;
            let state = hulthen_kg::energy(0, &p)?;
            cells.push(TableCell {
                table: which,
                alpha,
                q,
                mu,
                state,
            });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct KnownTypo {
    pub table: u8,
    pub q: f64,
    pub mu: String,
    pub printed: String,
    pub note: String,
}

pub fn known_typos() -> Vec<KnownTypo> {
    csv::Reader::from_reader(KNOWN_TYPOS.as_bytes())
        .deserialize()
        .filter_map(|r| r.ok())
        .collect()
}

fn typo_for(cell: &TableCell, typos: &[KnownTypo]) -> Option<KnownTypo> {
    typos
        .iter()
        .find(|t| {
            t.table == cell.table
                && t.q == cell.q
                && parse_rational(&t.mu).map(|r| r == cell.mu.ratio()).unwrap_or(false)
        })
        .cloned()
}

pub fn cmd_table(a: &TableArgs) -> Outcome {
    let cells = match table_cells(a.which) {
        Ok(c) => c,
        Err(e) => {
            return Outcome {
                code: EXIT_INVALID_STATE,
                stdout: String::new(),
                stderr: format!("error: {e}\n"),
            }
        }
    };
    let typos = known_typos();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    if a.long {
        let _ = wtr.write_record(["table", "alpha", "q", "mu", "energy", "nonneg_radical", "bound"]);
        for c in &cells {
            let _ = wtr.write_record([
                c.table.to_string(),
                c.alpha.to_string(),
                c.q.to_string(),
                ratio_decimal(&c.mu),
                format_sig(c.state.energy, 6),
                c.state.valid.nonneg_radical.to_string(),
                c.state.valid.bound.to_string(),
            ]);
        }
    } else {
        let mut header = vec!["q".to_string()];
        header.extend(TABLE_MU.iter().map(|&(n, d)| format!("{}", n as f64 / d as f64)));
        let _ = wtr.write_record(&header);
        for row in cells.chunks(TABLE_MU.len()) {
            let mut rec = vec![row[0].q.to_string()];
            rec.extend(row.iter().map(|c| format_sig(c.state.energy, 6)));
            let _ = wtr.write_record(&rec);
        }
    }
    let stdout = String::from_utf8(wtr.into_inner().unwrap_or_default()).unwrap_or_default();

    let mut stderr = String::new();
    let mut disc = csv::Writer::from_writer(Vec::new());
    let _ = disc.write_record(["table", "q", "mu", "computed", "printed", "note"]);
    for c in &cells {
        if let Some(t) = typo_for(c, &typos) {
            let computed = format_sig(c.state.energy, 6);
            let _ = writeln!(
                stderr,
                "discrepancy: table {} q={} mu={}: computed {computed}, printed {}",
                c.table, c.q, c.mu, t.printed
            );
            let _ = disc.write_record([
                c.table.to_string(),
                c.q.to_string(),
                t.mu.clone(),
                computed,
                t.printed,
                t.note,
            ]);
        }
    }
    if let Some(path) = &a.discrepancies {
        let bytes = disc.into_inner().unwrap_or_default();
        if let Err(e) = std::fs::write(path, bytes) {
            return Outcome::usage(format!("cannot write {}: {e}", path.display()));
        }
    }
    Outcome {
        code: EXIT_OK,
        stdout,
        stderr,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub mu_grid: Vec<FracOrder>,
    pub q_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub s0: f64,
    pub n: u32,
    pub compton_units: bool,
    /// Used when `compton_units` is false.
    pub m: Option<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.mu_grid.is_empty() || self.q_values.is_empty() || self.alpha_values.is_empty() {
            return Err(Error::InvalidParameter("sweep grids must be non-empty".into()));
        }
        if !self.compton_units && self.m.is_none() {
            return Err(Error::InvalidParameter("pass --m or --compton-units".into()));
        }
        Ok(())
    }

    /// `mu = k / points` for `k = 1..=points`.
    pub fn uniform_mu(points: i64) -> Result<Vec<FracOrder>> {
        if points < 1 {
            return Err(Error::InvalidParameter(format!(
                "need at least one mu point, got {points}"
            )));
        }
        (1..=points)
            .map(|k| FracOrder::new(Rational64::new(k, points)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub q: f64,
    pub mu: FracOrder,
    pub n: u32,
    pub energy: Option<f64>,
    pub valid: Option<hulthen_kg::Validity>,
    /// `ok`, `negative_root`, `imaginary_energy`, or `degenerate`.
    pub reason: &'static str,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut points = Vec::new();
    for &alpha in &spec.alpha_values {
        for &q in &spec.q_values {
            for &mu in &spec.mu_grid {
                points.push((alpha, q, mu));
            }
        }
    }
    points
        .par_iter()
        .map(|&(alpha, q, mu)| {
            let m = if spec.compton_units {
                alpha
            } else {
                spec.m.unwrap_or(alpha)
            };
            let p = HulthenParams::new(m, spec.s0, alpha, q, mu)?;
            let row = |energy, valid, reason| SweepRow {
                alpha,
                q,
                mu,
                n: spec.n,
                energy,
                valid,
                reason,
            };
            Ok(match hulthen_kg::energy_or_diagnostic(spec.n, &p) {
                Ok(Ok(s)) => {
                    let reason = if s.valid.nonneg_radical { "ok" } else { "negative_root" };
                    row(Some(s.energy), Some(s.valid), reason)
                }
                Ok(Err(_)) => row(None, None, "imaginary_energy"),
                Err(Error::DegenerateQuantization(_)) => row(None, None, "degenerate"),
                Err(e) => return Err(e),
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let _ = wtr.write_record([
        "alpha",
        "q",
        "mu",
        "n",
        "energy",
        "real_energy",
        "nonneg_radical",
        "bound",
        "reason",
    ]);
    let flag = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
    for r in rows {
        let _ = wtr.write_record([
            r.alpha.to_string(),
            r.q.to_string(),
            r.mu.to_string(),
            r.n.to_string(),
            r.energy.map(|e| e.to_string()).unwrap_or_default(),
            flag(Some(r.energy.is_some())),
            flag(r.valid.map(|v| v.nonneg_radical)),
            flag(r.valid.map(|v| v.bound)),
            r.reason.to_string(),
        ]);
    }
    String::from_utf8(wtr.into_inner().unwrap_or_default()).unwrap_or_default()
}

fn emit(out: &Option<PathBuf>, body: String, stderr: String) -> Outcome {
    match out {
        Some(path) => match std::fs::write(path, body) {
            Ok(()) => Outcome {
                code: EXIT_OK,
                stdout: String::new(),
                stderr,
            },
            Err(e) => Outcome::usage(format!("cannot write {}: {e}", path.display())),
        },
        None => Outcome {
            code: EXIT_OK,
            stdout: body,
            stderr,
        },
    }
}

pub fn cmd_sweep(a: &SweepArgs) -> Outcome {
    let mu_grid = match (&a.mu, a.mu_points) {
        (Some(list), _) => list.clone(),
        (None, Some(k)) => match SweepSpec::uniform_mu(k) {
            Ok(g) => g,
            Err(e) => return Outcome::usage(e),
        },
        (None, None) => TABLE_MU
            .iter()
            .filter_map(|&(n, d)| FracOrder::from_ratio(n, d).ok())
            .collect(),
    };
    let spec = SweepSpec {
        mu_grid,
        q_values: a.q.clone(),
        alpha_values: a.alpha.clone(),
        s0: a.s0,
        n: a.n,
        compton_units: a.mass.compton_units,
        m: a.mass.m,
    };
    let rows = match run_sweep(&spec) {
        Ok(r) => r,
        Err(e @ Error::InvalidParameter(_)) => return Outcome::usage(e),
        Err(e) => {
            return Outcome {
                code: EXIT_INVALID_STATE,
                stdout: String::new(),
                stderr: format!("error: {e}\n"),
            }
        }
    };
    emit(&a.out, sweep_csv(&rows), String::new())
}

pub fn cmd_wavefunction(a: &WavefunctionArgs) -> Outcome {
    let p = match a.model.params() {
        Ok(p) => p,
        Err(e) => return Outcome::usage(e),
    };
    if p.q == 0.0 {
        return Outcome::usage("q = 0 is not supported: the exponent Q/(mu q) diverges");
    }
    if a.points < 2 {
        return Outcome::usage("--points must be at least 2");
    }
    let state = match hulthen_kg::energy(a.n, &p) {
        Ok(s) => s,
        Err(e) => {
            return Outcome {
                code: EXIT_INVALID_STATE,
                stdout: String::new(),
                stderr: format!("error: {e}\n"),
            }
        }
    };
    let psi = match hulthen_kg::wavefunction(a.n, &p, &state) {
        Ok(psi) => psi,
        Err(e) => {
            return Outcome {
                code: EXIT_INVALID_STATE,
                stdout: String::new(),
                stderr: format!("error: {e}\n"),
            }
        }
    };
    let mut stderr = String::new();
    let domain_top = p.z_max();
    let inner_top = domain_top * (1.0 - 1e-9);
    let mut hi = a.z_max.unwrap_or(inner_top);
    if hi >= domain_top {
        if a.z_max.is_some() {
            let _ = writeln!(
                stderr,
                "warning: z_max {hi} clipped to the evaluation domain (0, {domain_top})"
            );
        }
        hi = inner_top;
    }
    let mut lo = a.z_min.unwrap_or(domain_top * 1e-3);
    if !(lo > 0.0) {
        let _ = writeln!(stderr, "warning: z_min {lo} clipped to z_max / 1000");
        lo = domain_top * 1e-3;
    }
    if !(lo < hi) {
        return Outcome::usage(format!("empty grid: z_min {lo} >= z_max {hi}"));
    }
    let (b_n, policy) = if a.normalize {
        match hulthen_kg::normalization(&p, &psi, 1e-8) {
            Ok(b) => (b, "normalized"),
            Err(e) => {
                return Outcome {
                    code: EXIT_INVALID_STATE,
                    stdout: String::new(),
                    stderr: format!("{stderr}error: {e}\n"),
                }
            }
        }
    } else {
        (1.0, "unit")
    };
    let mut body = String::new();
    let _ = writeln!(
        body,
        "# mu={} q={} alpha={} S0={} m={} n={} energy={}",
        p.mu, p.q, p.alpha, p.s0, p.m, a.n, state.energy
    );
    let _ = writeln!(body, "# z_max={domain_top}");
    let _ = writeln!(body, "# B_n={b_n} ({policy})");
    let _ = writeln!(
        body,
        "# R={} quantization_root={}",
        state.radical_r, state.quantization_root
    );
    let _ = writeln!(
        body,
        "# Q={} Q/(mu q)={}",
        state.radical_q,
        state.radical_q / (p.mu.value() * p.q)
    );
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let _ = wtr.write_record(["z", "x", "psi"]);
    for i in 0..a.points {
        let z = lo + (hi - lo) * i as f64 / (a.points - 1) as f64;
        let value = match psi.evaluate(z) {
            Ok(v) => v * b_n,
            Err(e) => {
                return Outcome {
                    code: EXIT_INVALID_STATE,
                    stdout: String::new(),
                    stderr: format!("error: {e}\n"),
                }
            }
        };
        let x = hulthen_kg::z_to_x_extended(z, &p);
        let _ = wtr.write_record([z.to_string(), x.to_string(), value.to_string()]);
    }
    body.push_str(&String::from_utf8(wtr.into_inner().unwrap_or_default()).unwrap_or_default());
    emit(&a.out, body, stderr)
}

/// One row of a verification matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCase {
    #[serde(deserialize_with = "de_order")]
    pub mu: FracOrder,
    pub q: f64,
    pub alpha: f64,
    #[serde(rename = "S0", alias = "s0")]
    pub s0: f64,
    pub m: f64,
    pub n: u32,
    /// Multiplies the closed-form energy before checking (fixtures).
    #[serde(default = "unit")]
    pub energy_factor: f64,
}

fn unit() -> f64 {
    1.0
}

fn de_order<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<FracOrder, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

impl MatrixCase {
    pub fn params(&self) -> Result<HulthenParams> {
        HulthenParams::new(self.m, self.s0, self.alpha, self.q, self.mu)
    }
}

/// All table cells for `n` in 0..=2 where the energy is real.
pub fn builtin_matrix() -> Vec<MatrixCase> {
    let mut out = Vec::new();
    for which in 1..=3u8 {
        let alpha = table_alpha(which).unwrap_or(1.0);
        for q in TABLE_Q {
            for (num, den) in TABLE_MU {
                let Ok(mu) = FracOrder::from_ratio(num, den) else {
                    continue;
                };
                for n in 0..=2u32 {
                    let case = MatrixCase {
                        mu,
                        q,
                        alpha,
                        s0: TABLE_S0,
                        m: alpha,
                        n,
                        energy_factor: 1.0,
                    };
                    let real = case.params().and_then(|p| hulthen_kg::energy(n, &p)).is_ok();
                    if real {
                        out.push(case);
                    }
                }
            }
        }
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<Vec<MatrixCase>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read matrix {}: {e}", path.display())))?;
    let mut cases = Vec::new();
    for rec in rdr.deserialize() {
        let case: MatrixCase = rec.map_err(|e| Error::InvalidParameter(format!("bad matrix row: {e}")))?;
        cases.push(case);
    }
    if cases.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "matrix {} has no cases",
            path.display()
        )));
    }
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: MatrixCase,
    pub oracle: &'static str,
    pub pass: bool,
    pub closed_form: Option<f64>,
    pub checked_energy: Option<f64>,
    pub oracle_value: Option<f64>,
    pub delta: Option<f64>,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbed_residuals: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pole_truncated: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CaseReport {
    fn new(case: &MatrixCase, oracle: &'static str, tolerance: f64) -> Self {
        Self {
            case: case.clone(),
            oracle,
            pass: false,
            closed_form: None,
            checked_energy: None,
            oracle_value: None,
            delta: None,
            tolerance,
            perturbed_residuals: None,
            pole_truncated: None,
            error: None,
        }
    }

    fn failed(mut self, e: Error) -> Self {
        self.error = Some(e.to_string());
        self.pass = false;
        self
    }
}

/// Residual of `psi_n` at `factor * E_n`, plus the same at `(1 +- 1%) E_n`.
pub fn check_residual(case: &MatrixCase) -> CaseReport {
    let mut r = CaseReport::new(case, "residual", RESIDUAL_TOLERANCE);
    let inner = || -> Result<(f64, f64, f64, [f64; 2])> {
        let p = case.params()?;
        let state = hulthen_kg::energy(case.n, &p)?;
        let psi = hulthen_kg::wavefunction(case.n, &p, &state)?;
        let e = state.energy * case.energy_factor;
        let at = |energy: f64| {
            verify::ode_residual_at_energy(&psi, energy, &p, RESIDUAL_POINTS, RESIDUAL_TOLERANCE)
                .map(|rep| rep.max_rel_residual)
        };
        let res = at(e)?;
        Ok((
            state.energy,
            e,
            res,
            [at(state.energy * 1.01)?, at(state.energy * 0.99)?],
        ))
    };
    match inner() {
        Ok((closed, e, res, perturbed)) => {
            r.closed_form = Some(closed);
            r.checked_energy = Some(e);
            r.oracle_value = Some(res);
            r.delta = Some(res);
            r.perturbed_residuals = Some(perturbed);
            r.pass = res <= RESIDUAL_TOLERANCE && perturbed.iter().all(|&v| v > PERTURBED_RESIDUAL);
            r
        }
        Err(e) => r.failed(e),
    }
}

pub fn check_quantization(case: &MatrixCase) -> CaseReport {
    let mut r = CaseReport::new(case, "quantization", QUANTIZE_AGREEMENT);
    let inner = || -> Result<(f64, f64)> {
        let p = case.params()?;
        let closed = hulthen_kg::energy(case.n, &p)?.energy;
        let numeric = verify::quantize_numeric(case.n, &p)?.energy;
        Ok((closed, numeric))
    };
    match inner() {
        Ok((closed, numeric)) => {
            let e = closed * case.energy_factor;
            let delta = (e - numeric).abs() / numeric.abs().max(f64::MIN_POSITIVE);
            r.closed_form = Some(closed);
            r.checked_energy = Some(e);
            r.oracle_value = Some(numeric);
            r.delta = Some(delta);
            r.pass = delta <= QUANTIZE_AGREEMENT;
            r
        }
        Err(e) => r.failed(e),
    }
}

/// `None` when `mu != 1` (the finite-difference oracle does not apply).
pub fn check_fd(case: &MatrixCase) -> Option<CaseReport> {
    if !case.mu.is_classical() {
        return None;
    }
    let mut r = CaseReport::new(case, "fd", verify::FD_TOLERANCE);
    let inner = || -> Result<(f64, verify::FdResult)> {
        let p = case.params()?;
        let closed = hulthen_kg::energy(case.n, &p)?.energy;
        let fd = verify::fd_eigensolve_mu1(&p, case.n as usize + 1, &FdConfig::standard(p.alpha))?;
        Ok((closed, fd))
    };
    Some(match inner() {
        Ok((closed, fd)) => {
            let e = closed * case.energy_factor;
            let value = fd.energies[case.n as usize];
            let delta = (e - value).abs();
            r.closed_form = Some(closed);
            r.checked_energy = Some(e);
            r.oracle_value = Some(value);
            r.delta = Some(delta);
            r.pole_truncated = Some(fd.pole_truncated);
            r.pass = delta <= verify::FD_TOLERANCE;
            r
        }
        Err(e) => r.failed(e),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub matrix: String,
    pub pass: bool,
    pub total: usize,
    pub failed: usize,
    pub cases: Vec<CaseReport>,
}

pub fn run_verify(suite: Suite, matrix_name: &str, cases: &[MatrixCase]) -> VerifyReport {
    let want = |s: Suite| suite == Suite::All || suite == s;
    let reports: Vec<CaseReport> = cases
        .par_iter()
        .flat_map_iter(|c| {
            let mut v = Vec::new();
            if want(Suite::Residual) {
                v.push(check_residual(c));
            }
            if want(Suite::Quantization) {
                v.push(check_quantization(c));
            }
            if want(Suite::Fd) {
                v.extend(check_fd(c));
            }
            v
        })
        .collect();
    let failed = reports.iter().filter(|r| !r.pass).count();
    VerifyReport {
        suite,
        matrix: matrix_name.to_string(),
        pass: failed == 0,
        total: reports.len(),
        failed,
        cases: reports,
    }
}

pub fn cmd_verify(a: &VerifyArgs) -> Outcome {
    let (name, cases) = if let Some(mu) = a.mu {
        let (Some(q), Some(alpha)) = (a.q, a.alpha) else {
            return Outcome::usage("a single-case verify needs --mu, --q and --alpha");
        };
        let m = match a.mass.resolve(alpha) {
            Ok(m) => m,
            Err(e) => return Outcome::usage(e),
        };
        (
            "single".to_string(),
            vec![MatrixCase {
                mu,
                q,
                alpha,
                s0: a.s0,
                m,
                n: a.n,
                energy_factor: 1.0,
            }],
        )
    } else if let Some(path) = &a.matrix {
        match read_matrix(path) {
            Ok(c) => (path.display().to_string(), c),
            Err(e) => return Outcome::usage(e),
        }
    } else {
        ("builtin".to_string(), builtin_matrix())
    };
    let report = run_verify(a.suite, &name, &cases);
    let stdout = format!("{}\n", serde_json::to_string_pretty(&report).unwrap_or_default());
    if report.pass {
        Outcome {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    } else {
        let stderr = format!("verification failed: {} of {} checks\n", report.failed, report.total);
        Outcome {
            code: EXIT_VERIFY_FAILED,
            stdout,
            stderr,
        }
    }
}
