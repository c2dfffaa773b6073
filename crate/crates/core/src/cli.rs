//! Command-line front end: argument and config-file resolution, figure
//! presets, and CSV/JSON serialization.
//!
//! Precedence is flag > config file > built-in default. Exit codes: 0 success,
//! 2 argument or domain error, 3 I/O error, 4 numeric failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::dynamics::{time_grid, Evolution};
use crate::error::Error as CoreError;
use crate::model::{characteristic_u, ModelParams};
use crate::numeric::linspace;
use crate::oracle::{integrate_states, quadrature_average, IntegratorConfig};
use crate::scans::{
    boson_axis, fit_normalized, locate_critical, normalized_scan, scan_1d, scan_2d,
    track_max_elements, Axis, CriticalSearch, Executor, UConvention,
};
use crate::timeavg::{
    averaged_density_for, averaged_entropy, entanglement_spectrum_in, EntanglementSpectrumResult,
    LogBase,
};

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const WORKERS_ENV: &str = "BJJ_WORKERS";

pub const FIGURE_IDS: [&str; 19] = [
    "1a", "1b", "2b", "2c", "2d", "2e", "3a", "3b", "3c", "3d", "4a", "4b", "4c", "5a", "5b", "11",
    "12", "13a", "13b",
];

/// Every key accepted in a config file.
const CONFIG_KEYS: [&str; 33] = [
    "N", "J", "U", "s", "alpha", "tmax", "dt", "full", "out", "format", "workers", "xi-base",
    "vary", "min", "max", "steps", "vary2", "min2", "max2", "steps2", "mode", "nmin", "nmax",
    "umin", "umax", "u", "nstep", "fix", "id", "dir", "t", "seed", "tol",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_domain() => 2,
            CliError::Core(_) => 4,
            CliError::Io { .. } => 3,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum XiBase {
    #[value(name = "e")]
    E,
    #[value(name = "2")]
    Two,
}

impl FromStr for XiBase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <XiBase as ValueEnum>::from_str(s, false)
    }
}

impl From<XiBase> for LogBase {
    fn from(b: XiBase) -> Self {
        match b {
            XiBase::E => LogBase::E,
            XiBase::Two => LogBase::Two,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Argmax,
    Knee,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Mode as ValueEnum>::from_str(s, false)
    }
}

/// Which parameter stays fixed when a constant `u` is realised across `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixed {
    U,
    J,
}

impl FromStr for Fixed {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Fixed as ValueEnum>::from_str(s, false)
    }
}

impl From<Fixed> for UConvention {
    fn from(f: Fixed) -> Self {
        match f {
            Fixed::U => UConvention::FixInteraction,
            Fixed::J => UConvention::FixTunneling,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bjj",
    version,
    about = "Entanglement in the bosonic Josephson junction"
)]
pub struct Cli {
    /// Flat key=value file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Scan worker threads (0 = all cores).
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropy S(t) of the reduced density matrix on a time grid.
    Evolve(EvolveArgs),
    /// Observation-time-averaged density, entropy and entanglement spectrum.
    Average(AverageArgs),
    /// One- or two-dimensional parameter scan of the averaged entropy.
    Scan(ScanArgs),
    /// Locate the localization transition u_c.
    Critical(CriticalArgs),
    /// Compare log-N and linear-N scaling of the normalized entropy.
    Scaling(ScalingArgs),
    /// Maximum of every reduced-density element over a time window.
    Maxelems(MaxelemsArgs),
    /// Write the data behind one figure preset.
    Figure(FigureArgs),
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct ParamArgs {
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "J")]
    pub j: Option<f64>,
    #[arg(long = "U")]
    pub u: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Also write every density element p0..pN.
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AverageArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long = "xi-base", value_enum)]
    pub xi_base: Option<XiBase>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub vary: Option<String>,
    #[arg(long)]
    pub min: Option<f64>,
    #[arg(long)]
    pub max: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub vary2: Option<String>,
    #[arg(long)]
    pub min2: Option<f64>,
    #[arg(long)]
    pub max2: Option<f64>,
    #[arg(long)]
    pub steps2: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CriticalArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub nmin: Option<usize>,
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub umin: Option<f64>,
    #[arg(long)]
    pub umax: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long = "u")]
    pub u_char: Option<f64>,
    #[arg(long)]
    pub nmin: Option<usize>,
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub nstep: Option<usize>,
    /// Parameter held fixed while N varies at constant u.
    #[arg(long, value_enum)]
    pub fix: Option<Fixed>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaxelemsArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(long)]
    pub id: Option<String>,
    /// Output directory for fig<id>.csv / fig<id>.json.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parsed `key = value` config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !CONFIG_KEYS.contains(&key) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Usage(format!(
                    "config line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    fn lookup<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`: {e}"))
            }),
        }
    }

    /// Flag value, else config value, else `default`.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.pick_opt(key, flag)?.unwrap_or(default))
    }

    pub fn pick_opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.lookup(key),
        }
    }

    fn flag(&self, key: &str, flag: bool) -> CliResult<bool> {
        Ok(flag || self.lookup::<bool>(key)?.unwrap_or(false))
    }
}

/// Model defaults used when neither a flag nor the config sets a value.
#[derive(Debug, Clone, Copy)]
struct ParamDefaults {
    n: usize,
    j: f64,
    u: f64,
}

fn resolve_params(args: &ParamArgs, cfg: &ConfigFile, d: ParamDefaults) -> CliResult<ModelParams> {
    let p = ModelParams::new(
        cfg.pick("N", args.n, d.n)?,
        cfg.pick("J", args.j, d.j)?,
        cfg.pick("U", args.u, d.u)?,
    )
    .with_rate(cfg.pick("s", args.s, crate::model::DEFAULT_RATE)?)
    .with_alpha(cfg.pick("alpha", args.alpha, crate::model::DEFAULT_ALPHA)?);
    p.validate()?;
    Ok(p)
}

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed.
pub fn format_g12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-5..12).contains(&exp) {
        format!("{}e{}", trim(mantissa), exp)
    } else {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

/// The value a reader recovers from the CSV rendering.
fn rounded(x: f64) -> f64 {
    format_g12(x).parse().unwrap_or(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Flag(bool),
    Text(&'static str),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_g12(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Flag(b) => if *b { "1" } else { "0" }.into(),
            Cell::Text(t) => t.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(rounded(*x)),
            Cell::Num(x) => json!(format_g12(*x)),
            Cell::Int(i) => json!(i),
            Cell::Flag(b) => json!(u8::from(*b)),
            Cell::Text(t) => json!(t),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Flag(b)
    }
}

/// A rectangular data set with provenance, rendered as CSV or JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub params: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Written after the rows as `# k=v k=v`; a `summary` object in JSON.
    pub summary: Vec<(String, Cell)>,
}

impl DataTable {
    pub fn new(columns: &[&str]) -> Self {
        DataTable {
            params: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl fmt::Display) -> &mut Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn num_param(&mut self, key: &str, value: f64) -> &mut Self {
        self.param(key, format_g12(value))
    }

    fn model_params(&mut self, p: &ModelParams) -> &mut Self {
        self.param("N", p.n)
            .num_param("J", p.j)
            .num_param("U", p.u)
            .num_param("s", p.s)
            .num_param("alpha", p.alpha)
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn summarize(&mut self, key: &str, value: impl Into<Cell>) {
        self.summary.push((key.to_string(), value.into()));
    }

    fn header(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!(
            "# tool-version bjj {TOOL_VERSION}\n# params: {}\n# format-version {FORMAT_VERSION}\n",
            params.join(" ")
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        if !self.summary.is_empty() {
            let parts: Vec<String> = self
                .summary
                .iter()
                .map(|(k, v)| format!("{k}={}", v.csv()))
                .collect();
            out.push_str(&format!("# {}\n", parts.join(" ")));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let params: Map<String, Value> = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        let summary: Map<String, Value> = self
            .summary
            .iter()
            .map(|(k, v)| (k.clone(), v.json()))
            .collect();
        let doc = json!({
            "tool_version": format!("bjj {TOOL_VERSION}"),
            "format_version": FORMAT_VERSION,
            "params": params,
            "columns": self.columns,
            "rows": rows,
            "summary": summary,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("JSON serialization");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

struct Context {
    cfg: ConfigFile,
    format: Format,
    exec: Executor,
}

impl Context {
    fn emit(&self, table: &DataTable, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
        let text = table.render(self.format);
        match out {
            Some(path) => write_file(path, &text),
            None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io {
                path: "<stdout>".into(),
                source: e,
            }),
        }
    }

    fn out_path(&self, flag: &Option<PathBuf>) -> CliResult<Option<PathBuf>> {
        self.cfg.pick_opt("out", flag.clone())
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn say(stdout: &mut dyn Write, line: &str) -> CliResult<()> {
    writeln!(stdout, "{line}").map_err(|e| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let format = cfg.pick("format", cli.format, Format::Csv)?;
    let workers = cfg.pick("workers", cli.workers, 0usize)?;
    let ctx = Context {
        cfg,
        format,
        exec: Executor::new(workers),
    };
    match &cli.command {
        Command::Evolve(a) => cmd_evolve(&ctx, a, stdout),
        Command::Average(a) => cmd_average(&ctx, a, stdout),
        Command::Scan(a) => cmd_scan(&ctx, a, stdout),
        Command::Critical(a) => cmd_critical(&ctx, a, stdout),
        Command::Scaling(a) => cmd_scaling(&ctx, a, stdout),
        Command::Maxelems(a) => cmd_maxelems(&ctx, a, stdout),
        Command::Figure(a) => cmd_figure(&ctx, a, stdout),
        Command::Oracle(a) => cmd_oracle(&ctx, a, stdout),
    }
}

const EVOLVE_DEFAULTS: ParamDefaults = ParamDefaults {
    n: 100,
    j: 1.0,
    u: 0.01,
};

pub fn evolve_table(p: &ModelParams, t_max: f64, dt: f64, full: bool) -> CliResult<DataTable> {
    let grid = time_grid(t_max, dt)?;
    let evo = Evolution::new(p)?;
    let mut columns = vec!["t".to_string(), "S".to_string()];
    if full {
        columns.extend((0..=p.n).map(|n| format!("p{n}")));
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = DataTable::new(&cols);
    table
        .model_params(p)
        .num_param("tmax", t_max)
        .num_param("dt", dt);

    let densities = evo.densities(&grid)?;
    for (t, rho) in grid.iter().zip(densities) {
        let s = crate::dynamics::renyi_entropy(&rho, p.alpha)?;
        let mut row = vec![Cell::Num(*t), Cell::Num(s)];
        if full {
            row.extend(rho.p.iter().map(|x| Cell::Num(*x)));
        }
        table.push(row);
    }
    Ok(table)
}

fn cmd_evolve(ctx: &Context, a: &EvolveArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let p = resolve_params(&a.params, &ctx.cfg, EVOLVE_DEFAULTS)?;
    let t_max = ctx.cfg.pick("tmax", a.tmax, 1000.0)?;
    let dt = ctx.cfg.pick("dt", a.dt, 0.1)?;
    let full = ctx.cfg.flag("full", a.full)?;
    let table = evolve_table(&p, t_max, dt, full)?;
    ctx.emit(&table, ctx.out_path(&a.out)?.as_deref(), stdout)
}

pub fn average_table(p: &ModelParams, base: LogBase) -> CliResult<DataTable> {
    let avg = averaged_density_for(p)?;
    let es = EntanglementSpectrumResult::from_density(&avg, base);
    let entropy = crate::dynamics::renyi_entropy_of(&avg.p_avg, p.alpha)?;
    let mut table = DataTable::new(&["n", "p_avg", "xi", "clamped"]);
    table.model_params(p).param(
        "xi-base",
        match base {
            LogBase::E => "e",
            LogBase::Two => "2",
        },
    );
    for n in 0..=p.n {
        table.push(vec![
            n.into(),
            avg.p_avg[n].into(),
            es.xi[n].into(),
            es.clamped[n].into(),
        ]);
    }
    table.summarize("S", entropy);
    match characteristic_u(p) {
        Ok(u) => table.summarize("u", u.value()),
        Err(_) => table.summarize("u", Cell::Text("undefined")),
    }
    Ok(table)
}

fn cmd_average(ctx: &Context, a: &AverageArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let p = resolve_params(
        &a.params,
        &ctx.cfg,
        ParamDefaults {
            n: 20,
            j: 1.0,
            u: 1.0,
        },
    )?;
    let base: XiBase = ctx.cfg.pick("xi-base", a.xi_base, XiBase::E)?;
    let table = average_table(&p, base.into())?;
    ctx.emit(&table, ctx.out_path(&a.out)?.as_deref(), stdout)
}

/// Axis values for a linear range; boson numbers are rounded and must stay
/// strictly increasing.
fn axis_values(axis: Axis, min: f64, max: f64, steps: usize) -> CliResult<Vec<f64>> {
    if steps < 2 {
        return Err(CliError::Usage("--steps must be at least 2".into()));
    }
    if !(max > min) {
        return Err(CliError::Usage(format!(
            "--max ({max}) must exceed --min ({min})"
        )));
    }
    let mut v = linspace(min, max, steps);
    if axis == Axis::Bosons {
        v.iter_mut().for_each(|x| *x = x.round());
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Usage(format!(
                "N range {min}..{max} has fewer than {steps} distinct integers"
            )));
        }
    }
    Ok(v)
}

fn parse_axis(name: &str) -> CliResult<Axis> {
    name.parse::<Axis>().map_err(CliError::from)
}

fn cmd_scan(ctx: &Context, a: &ScanArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let p = resolve_params(
        &a.params,
        cfg,
        ParamDefaults {
            n: 20,
            j: 1.0,
            u: 1.0,
        },
    )?;
    let vary: String = cfg
        .pick_opt("vary", a.vary.clone())?
        .ok_or_else(|| CliError::Usage("--vary is required".into()))?;
    let x_axis = parse_axis(&vary)?;
    let range = |k_min: &str,
                 k_max: &str,
                 k_steps: &str,
                 min,
                 max,
                 steps|
     -> CliResult<(f64, f64, usize)> {
        let min = cfg
            .pick_opt(k_min, min)?
            .ok_or_else(|| CliError::Usage(format!("--{k_min} is required")))?;
        let max = cfg
            .pick_opt(k_max, max)?
            .ok_or_else(|| CliError::Usage(format!("--{k_max} is required")))?;
        let steps = cfg.pick(k_steps, steps, 21usize)?;
        Ok((min, max, steps))
    };
    let (min, max, steps) = range("min", "max", "steps", a.min, a.max, a.steps)?;
    let xs = axis_values(x_axis, min, max, steps)?;

    let vary2: Option<String> = cfg.pick_opt("vary2", a.vary2.clone())?;
    let mut table;
    match vary2 {
        None => {
            let res = scan_1d(x_axis, &xs, &p, &ctx.exec)?;
            table = DataTable::new(&["axis", "S"]);
            table.model_params(&p).param("vary", x_axis);
            for (x, s) in res.axis.iter().zip(&res.entropy) {
                table.push(vec![(*x).into(), (*s).into()]);
            }
        }
        Some(name) => {
            let y_axis = parse_axis(&name)?;
            let (min2, max2, steps2) = range("min2", "max2", "steps2", a.min2, a.max2, a.steps2)?;
            let ys = axis_values(y_axis, min2, max2, steps2)?;
            let res = scan_2d(x_axis, &xs, y_axis, &ys, &p, &ctx.exec)?;
            table = DataTable::new(&["x", "y", "S"]);
            table
                .model_params(&p)
                .param("vary", x_axis)
                .param("vary2", y_axis);
            for (ix, x) in res.x.iter().enumerate() {
                for (iy, y) in res.y.iter().enumerate() {
                    table.push(vec![(*x).into(), (*y).into(), res.at(ix, iy).into()]);
                }
            }
        }
    }
    ctx.emit(&table, ctx.out_path(&a.out)?.as_deref(), stdout)
}

fn cmd_critical(ctx: &Context, a: &CriticalArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let mode = cfg.pick("mode", a.mode, Mode::Argmax)?;
    let (search, defaults) = match mode {
        Mode::Argmax => (
            CriticalSearch::Argmax {
                n_min: cfg.pick("nmin", a.nmin, 4)?,
                n_max: cfg.pick("nmax", a.nmax, 80)?,
            },
            ParamDefaults {
                n: 4,
                j: 3.0,
                u: 0.4,
            },
        ),
        Mode::Knee => (
            CriticalSearch::Knee {
                u_min: cfg.pick("umin", a.umin, 1.0)?,
                u_max: cfg.pick("umax", a.umax, 20.0)?,
                steps: cfg.pick("steps", a.steps, 60)?,
            },
            ParamDefaults {
                n: 60,
                j: 1.0,
                u: 1.0,
            },
        ),
    };
    let p = resolve_params(&a.params, cfg, defaults)?;
    let est = locate_critical(search, &p, &ctx.exec)?;

    say(
        stdout,
        &format!("u_c={:.2}±{:.2}", est.u_c, est.uncertainty()),
    )?;
    if let Some(jk) = est.j_knee {
        say(
            stdout,
            &format!(
                "J_knee={} J_knee/N={}",
                format_g12(jk),
                format_g12(jk / p.n as f64)
            ),
        )?;
    }

    if let Some(out) = ctx.out_path(&a.out)? {
        let mut table = DataTable::new(&[est.curve.axis_name.name(), "S"]);
        table.model_params(&p).param("mode", est.method);
        match search {
            CriticalSearch::Argmax { n_min, n_max } => {
                table.param("nmin", n_min).param("nmax", n_max);
            }
            CriticalSearch::Knee {
                u_min,
                u_max,
                steps,
            } => {
                table
                    .num_param("umin", u_min)
                    .num_param("umax", u_max)
                    .param("steps", steps);
            }
        }
        for (x, s) in est.curve.axis.iter().zip(&est.curve.entropy) {
            table.push(vec![(*x).into(), (*s).into()]);
        }
        table.summarize("u_c", est.u_c);
        table.summarize("u_lo", est.bracket.0);
        table.summarize("u_hi", est.bracket.1);
        if let Some(jk) = est.j_knee {
            table.summarize("J_knee", jk);
        }
        ctx.emit(&table, Some(&out), stdout)?;
    }
    Ok(())
}

fn n_grid(n_min: usize, n_max: usize, step: usize) -> CliResult<Vec<usize>> {
    if step == 0 || n_min == 0 || n_max < n_min {
        return Err(CliError::Usage(format!(
            "invalid N grid {n_min}..{n_max} step {step}"
        )));
    }
    Ok((n_min..=n_max).step_by(step).collect())
}

pub fn scaling_table(
    u: f64,
    ns: &[usize],
    fixed: &ModelParams,
    fix: Fixed,
    exec: &Executor,
) -> CliResult<(DataTable, crate::scans::ScalingFit)> {
    let scan = normalized_scan(u, ns, fixed, fix.into(), exec)?;
    let fit = fit_normalized(&scan)?;
    let mut table = DataTable::new(&["N", "S", "S_norm"]);
    table.num_param("u", u);
    match fix {
        Fixed::U => table.param("fix", "U").num_param("U", fixed.u),
        Fixed::J => table.param("fix", "J").num_param("J", fixed.j),
    };
    table
        .num_param("s", fixed.s)
        .num_param("alpha", fixed.alpha);
    for ((n, s), st) in ns.iter().zip(&scan.scan.entropy).zip(&scan.normalized) {
        table.push(vec![(*n).into(), (*s).into(), (*st).into()]);
    }
    table.param("preferred", fit.preferred);
    table.summarize("log_a", fit.model_log.a);
    table.summarize("log_b", fit.model_log.b);
    table.summarize("log_rms", fit.model_log.rms);
    table.summarize("lin_a", fit.model_lin.a);
    table.summarize("lin_b", fit.model_lin.b);
    table.summarize("lin_rms", fit.model_lin.rms);
    Ok((table, fit))
}

fn cmd_scaling(ctx: &Context, a: &ScalingArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let u = cfg
        .pick_opt("u", a.u_char)?
        .ok_or_else(|| CliError::Usage("--u is required".into()))?;
    let ns = n_grid(
        cfg.pick("nmin", a.nmin, 10)?,
        cfg.pick("nmax", a.nmax, 100)?,
        cfg.pick("nstep", a.nstep, 10)?,
    )?;
    let fix = cfg.pick("fix", a.fix, Fixed::U)?;
    let fixed = resolve_params(
        &a.params,
        cfg,
        ParamDefaults {
            n: ns[0],
            j: 1.0,
            u: 1.0,
        },
    )?;
    let (table, fit) = scaling_table(u, &ns, &fixed, fix, &ctx.exec)?;
    say(stdout, &format!("preferred={}", fit.preferred))?;
    say(
        stdout,
        &format!(
            "log_rms={} lin_rms={}",
            format_g12(fit.model_log.rms),
            format_g12(fit.model_lin.rms)
        ),
    )?;
    if let Some(out) = ctx.out_path(&a.out)? {
        ctx.emit(&table, Some(&out), stdout)?;
    }
    Ok(())
}

pub fn maxelems_table(
    p: &ModelParams,
    t_max: f64,
    dt: f64,
    exec: &Executor,
) -> CliResult<DataTable> {
    let trace = track_max_elements(p, t_max, dt, exec)?;
    let mut table = DataTable::new(&["n", "max_p"]);
    table
        .model_params(p)
        .num_param("tmax", t_max)
        .num_param("dt", dt);
    for (n, m) in trace.per_n_max.iter().enumerate() {
        table.push(vec![n.into(), (*m).into()]);
    }
    table.summarize("first_n", trace.first_dominant.0);
    table.summarize("first_max", trace.first_dominant.1);
    table.summarize("second_n", trace.second_dominant.0);
    table.summarize("second_max", trace.second_dominant.1);
    Ok(table)
}

fn cmd_maxelems(ctx: &Context, a: &MaxelemsArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let p = resolve_params(
        &a.params,
        &ctx.cfg,
        ParamDefaults {
            n: 100,
            j: 1.0,
            u: 0.4,
        },
    )?;
    let t_max = ctx.cfg.pick("tmax", a.tmax, 2000.0)?;
    let dt = ctx.cfg.pick("dt", a.dt, 0.1)?;
    let table = maxelems_table(&p, t_max, dt, &ctx.exec)?;
    ctx.emit(&table, ctx.out_path(&a.out)?.as_deref(), stdout)
}

fn cmd_figure(ctx: &Context, a: &FigureArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let id: String = ctx
        .cfg
        .pick_opt("id", a.id.clone())?
        .ok_or_else(|| CliError::Usage("--id is required".into()))?;
    let dir = ctx.cfg.pick("dir", a.dir.clone(), PathBuf::from("."))?;
    let table = figure_table(&id, &ctx.exec)?;
    let ext = match ctx.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = dir.join(format!("fig{id}.{ext}"));
    ctx.emit(&table, Some(&path), stdout)?;
    say(stdout, &format!("wrote {}", path.display()))
}

fn sweep_rows(
    table: &mut DataTable,
    label: f64,
    xs: &[f64],
    params: impl Fn(f64) -> ModelParams + Sync + Send,
    exec: &Executor,
) -> CliResult<()> {
    let values = exec.map(xs, |&x| averaged_entropy(&params(x)));
    for (x, s) in xs.iter().zip(values) {
        table.push(vec![label.into(), (*x).into(), s?.into()]);
    }
    Ok(())
}

fn xi_rows(
    table: &mut DataTable,
    xs: &[f64],
    params: impl Fn(f64) -> ModelParams + Sync + Send,
    exec: &Executor,
) -> CliResult<()> {
    let spectra = exec.map(xs, |&x| entanglement_spectrum_in(&params(x), LogBase::E));
    for (x, es) in xs.iter().zip(spectra) {
        let es = es?;
        for (n, (xi, c)) in es.xi.iter().zip(&es.clamped).enumerate() {
            table.push(vec![(*x).into(), n.into(), (*xi).into(), (*c).into()]);
        }
    }
    Ok(())
}

fn evolve_rows(table: &mut DataTable, n: usize, us: &[f64], t_max: f64, dt: f64) -> CliResult<()> {
    let grid = time_grid(t_max, dt)?;
    for &u in us {
        let series = Evolution::new(&ModelParams::new(n, 1.0, u))?.series(&grid)?;
        for (t, s) in series.times.iter().zip(&series.entropy) {
            table.push(vec![u.into(), (*t).into(), (*s).into()]);
        }
    }
    Ok(())
}

/// Data behind one figure preset.
pub fn figure_table(id: &str, exec: &Executor) -> CliResult<DataTable> {
    let mut t;
    match id {
        "1a" | "1b" => {
            let u = if id == "1a" { 0.01 } else { 0.1 };
            t = evolve_table(&ModelParams::new(100, 1.0, u), 1000.0, 0.1, false)?;
        }
        "2b" => {
            t = DataTable::new(&["N", "J", "S"]);
            t.num_param("U", 1.0).param("N", "10,20,40,60");
            let js = linspace(0.5, 40.0, 80);
            for n in [10usize, 20, 40, 60] {
                sweep_rows(&mut t, n as f64, &js, |j| ModelParams::new(n, j, 1.0), exec)?;
            }
        }
        "2c" | "2d" | "2e" => {
            let fixed;
            let (xa, xs, ya, ys) = match id {
                "2c" => {
                    fixed = ModelParams::new(20, 1.0, 1.0);
                    (
                        Axis::Tunneling,
                        linspace(0.2, 20.0, 50),
                        Axis::Interaction,
                        linspace(0.1, 5.0, 50),
                    )
                }
                "2d" => {
                    fixed = ModelParams::new(10, 1.0, 1.0);
                    let ns: Vec<usize> = (10..=100).step_by(5).collect();
                    (
                        Axis::Tunneling,
                        linspace(0.5, 40.0, 50),
                        Axis::Bosons,
                        boson_axis(&ns),
                    )
                }
                _ => {
                    fixed = ModelParams::new(10, 1.0, 1.0);
                    let ns: Vec<usize> = (10..=100).step_by(5).collect();
                    (
                        Axis::Interaction,
                        linspace(0.01, 1.0, 50),
                        Axis::Bosons,
                        boson_axis(&ns),
                    )
                }
            };
            let res = scan_2d(xa, &xs, ya, &ys, &fixed, exec)?;
            t = DataTable::new(&[xa.name(), ya.name(), "S"]);
            t.model_params(&fixed).param("vary", xa).param("vary2", ya);
            for (ix, x) in res.x.iter().enumerate() {
                for (iy, y) in res.y.iter().enumerate() {
                    t.push(vec![(*x).into(), (*y).into(), res.at(ix, iy).into()]);
                }
            }
        }
        "3a" => {
            t = DataTable::new(&["N", "J_over_N", "S"]);
            t.num_param("U", 1.0).param("N", "40,60,80");
            let ratios = linspace(0.05, 1.0, 60);
            for n in [40usize, 60, 80] {
                sweep_rows(
                    &mut t,
                    n as f64,
                    &ratios,
                    |r| ModelParams::new(n, r * n as f64, 1.0),
                    exec,
                )?;
            }
        }
        "3b" => {
            t = DataTable::new(&["N", "UN", "S"]);
            t.num_param("J", 1.0).param("N", "40,60,80");
            let uns = linspace(0.5, 20.0, 60);
            for n in [40usize, 60, 80] {
                sweep_rows(
                    &mut t,
                    n as f64,
                    &uns,
                    |un| ModelParams::new(n, 1.0, un / n as f64),
                    exec,
                )?;
            }
        }
        "3c" => {
            t = DataTable::new(&["J", "N_over_J", "S"]);
            t.num_param("U", 0.4)
                .param("J", "1,2,3")
                .param("N", "4..100");
            for j in [1.0, 2.0, 3.0] {
                let ns: Vec<f64> = (4..=100).map(|n| n as f64 / j).collect();
                sweep_rows(
                    &mut t,
                    j,
                    &ns,
                    |x| ModelParams::new((x * j).round() as usize, j, 0.4),
                    exec,
                )?;
            }
        }
        "3d" => {
            t = DataTable::new(&["U", "NU", "S"]);
            t.num_param("J", 3.0)
                .param("U", "0.2,0.4,0.6")
                .param("N", "4..80");
            for u in [0.2, 0.4, 0.6] {
                let xs: Vec<f64> = (4..=80).map(|n| n as f64 * u).collect();
                sweep_rows(
                    &mut t,
                    u,
                    &xs,
                    |x| ModelParams::new((x / u).round() as usize, 3.0, u),
                    exec,
                )?;
            }
        }
        "4a" | "4c" => {
            let u = if id == "4a" { 1.0 } else { 40.0 };
            let ns: Vec<usize> = (10..=100).step_by(5).collect();
            t = scaling_table(u, &ns, &ModelParams::new(10, 1.0, 1.0), Fixed::U, exec)?.0;
        }
        "4b" => {
            t = DataTable::new(&["u", "N", "S_norm"]);
            t.num_param("U", 1.0).param("fix", "U");
            let ns: Vec<usize> = (10..=100).step_by(10).collect();
            for u in [0.5, 1.0, 2.0, 3.0, 3.7, 5.0, 10.0, 20.0, 40.0] {
                let scan = normalized_scan(
                    u,
                    &ns,
                    &ModelParams::new(10, 1.0, 1.0),
                    UConvention::FixInteraction,
                    exec,
                )?;
                for (n, st) in ns.iter().zip(&scan.normalized) {
                    t.push(vec![u.into(), (*n).into(), (*st).into()]);
                }
            }
        }
        "5a" => {
            t = DataTable::new(&["U", "n", "xi", "clamped"]);
            t.param("N", 10).num_param("J", 1.0).param("xi-base", "e");
            xi_rows(
                &mut t,
                &linspace(0.01, 4.0, 60),
                |u| ModelParams::new(10, 1.0, u),
                exec,
            )?;
        }
        "5b" => {
            t = DataTable::new(&["J", "n", "xi", "clamped"]);
            t.param("N", 10).num_param("U", 1.0).param("xi-base", "e");
            xi_rows(
                &mut t,
                &linspace(0.1, 20.0, 60),
                |j| ModelParams::new(10, j, 1.0),
                exec,
            )?;
        }
        "11" => {
            t = DataTable::new(&["U", "t", "S"]);
            t.param("N", 100)
                .num_param("J", 1.0)
                .num_param("tmax", 100.0)
                .num_param("dt", 0.01);
            evolve_rows(&mut t, 100, &[0.0, 0.01, 0.04, 0.1, 0.4, 1.0], 100.0, 0.01)?;
        }
        "12" => {
            t = DataTable::new(&["U", "t", "S"]);
            t.param("N", 100)
                .num_param("J", 1.0)
                .num_param("tmax", 200.0)
                .num_param("dt", 0.1);
            evolve_rows(&mut t, 100, &[0.01, 0.04, 0.1, 0.4], 200.0, 0.1)?;
        }
        "13a" => {
            t = maxelems_table(&ModelParams::new(100, 1.0, 0.01), 2000.0, 0.1, exec)?;
        }
        "13b" => {
            t = DataTable::new(&["N", "n", "max_p"]);
            t.num_param("u", 40.0)
                .num_param("J", 1.0)
                .num_param("tmax", 2000.0)
                .num_param("dt", 0.1);
            for n in [50usize, 100, 150, 200] {
                let trace = track_max_elements(
                    &ModelParams::new(n, 1.0, 40.0 / n as f64),
                    2000.0,
                    0.1,
                    exec,
                )?;
                for (k, m) in trace.per_n_max.iter().enumerate() {
                    t.push(vec![n.into(), k.into(), (*m).into()]);
                }
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown figure id `{other}` (expected one of {})",
                FIGURE_IDS.join(", ")
            )))
        }
    }
    t.params.insert(0, ("figure".into(), id.into()));
    Ok(t)
}

fn cmd_oracle(ctx: &Context, a: &OracleArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let p = resolve_params(
        &a.params,
        cfg,
        ParamDefaults {
            n: 4,
            j: 1.0,
            u: 1.0,
        },
    )?;
    let t = cfg.pick("t", a.t, 0.5)?;
    let dt = cfg.pick("dt", a.dt, 1e-4)?;
    let tol = cfg.pick("tol", a.tol, 1e-10)?;
    let spectral = Evolution::new(&p)?.density_at(t);
    let integrated = integrate_states(&p, &[t], &IntegratorConfig::new(dt, t)?)?.remove(0);
    let avg = averaged_density_for(&p)?;
    let quad = quadrature_average(&p, p.s, 40.0 / p.s, tol)?;

    let mut table = DataTable::new(&["n", "p_spectral", "p_integrator", "p_avg", "p_quadrature"]);
    table
        .model_params(&p)
        .num_param("t", t)
        .num_param("dt", dt)
        .num_param("tol", tol);
    for n in 0..=p.n {
        table.push(vec![
            n.into(),
            spectral.p[n].into(),
            integrated.p[n].into(),
            avg.p_avg[n].into(),
            quad.density.p_avg[n].into(),
        ]);
    }
    table.summarize("tail_bound", quad.tail_bound);
    table.summarize("quad_error", quad.error_estimate);
    ctx.emit(&table, ctx.out_path(&a.out)?.as_deref(), stdout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_rendering() {
        assert_eq!(format_g12(0.0), "0");
        assert_eq!(format_g12(-0.0), "0");
        assert_eq!(format_g12(1.0), "1");
        assert_eq!(format_g12(0.1), "0.1");
        assert_eq!(format_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_g12(123456.789), "123456.789");
        assert_eq!(format_g12(1e-7), "1e-7");
        assert_eq!(format_g12(-2.5e20), "-2.5e20");
        assert_eq!(format_g12(9.999999999999999), "10");
        assert_eq!(format_g12(std::f64::consts::PI), "3.14159265359");
        assert_eq!(format_g12(f64::INFINITY), "inf");
    }

    #[test]
    fn config_parsing() {
        let cfg = ConfigFile::parse("# comment\nN = 12\nJ=0.5\n\n").unwrap();
        assert_eq!(cfg.pick::<usize>("N", None, 3).unwrap(), 12);
        assert_eq!(cfg.pick::<usize>("N", Some(7), 3).unwrap(), 7);
        assert_eq!(cfg.pick::<f64>("U", None, 2.0).unwrap(), 2.0);
        assert!(matches!(
            ConfigFile::parse("bogus=1"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            ConfigFile::parse("N=1\nN=2"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(ConfigFile::parse("N"), Err(CliError::Usage(_))));
        let bad = ConfigFile::parse("N=abc").unwrap();
        assert!(bad.pick::<usize>("N", None, 1).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(CoreError::ZeroTunneling).exit_code(), 2);
        assert_eq!(
            CliError::Core(CoreError::NoConvergence {
                worst_residual: 1.0
            })
            .exit_code(),
            4
        );
        let io = CliError::Io {
            path: "x".into(),
            source: io::Error::other("boom"),
        };
        assert_eq!(io.exit_code(), 3);
    }

    #[test]
    fn csv_layout() {
        let mut t = DataTable::new(&["a", "b"]);
        t.param("N", 3).num_param("J", 0.5);
        t.push(vec![1usize.into(), 0.25.into()]);
        t.summarize("S", 2.0);
        assert_eq!(
            t.to_csv(),
            format!("# tool-version bjj {TOOL_VERSION}\n# params: N=3 J=0.5\n# format-version 1\na,b\n1,0.25\n# S=2\n")
        );
    }

    #[test]
    fn unknown_figure() {
        assert!(matches!(
            figure_table("9z", &Executor::default()),
            Err(CliError::Usage(_))
        ));
    }
}
