//! Command-line front end.
//!
//! Every subcommand writes either a human-readable summary (`simulate`,
//! `trace`, `verify`) or a data file (`sweep`, `pareto`, `definite-opt`,
//! `compare`, `heatmap`, `validate-closed-form`). Data files open with a
//! metadata block: `#`-prefixed lines for CSV, a leading `{"meta": …}` object
//! for newline-delimited JSON.
//!
//! Options can also come from a `key=value` file passed with `--config`; keys
//! are the long option names without dashes and flags given on the command
//! line win. `--jobs` falls back to the `QPROTECT_JOBS` environment variable.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::closed_form::{validate_closed_forms, ValidationOptions};
use crate::error::{Error, Result};
use crate::oracle;
use crate::qubit::DensityMatrix;
use crate::scheme::{
    protect, run_paths, trace_evolution, ControlParams, Ensemble, NoiseStrength, OperatorSet,
    ProtectionResult, RangeMode, Sign,
};
use crate::search::{
    definite_optimum, heatmap, pareto, sweep_each, Axis, BaselineKind, Family, FeedbackPin,
    Frontier, GridSpec, HeatAxis, HeatBase, HeatQuantity, Metrics, SearchOptions, DEFAULT_BINS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Column layout of `sweep` and `definite-opt` rows.
pub const SWEEP_COLUMNS: [&str; 17] = [
    "theta", "phi", "s_plus", "r", "alpha", "p", "p1", "p2", "gamma_plus", "gamma_minus",
    "f_plus", "f_minus", "g_plus", "g_minus", "F", "G", "error",
];

#[derive(Debug, Parser)]
#[command(name = "qprotect", version, about = "Composite weak-measurement control of a qubit under amplitude damping")]
pub struct Cli {
    /// Worker threads (default: QPROTECT_JOBS, else all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// key=value file with default option values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one parameter point.
    Simulate(SimulateArgs),
    /// Show the state after every stage of one preweak branch.
    Trace(TraceArgs),
    /// Evaluate every point of a parameter lattice.
    Sweep(SweepArgs),
    /// Fidelity/success-probability frontier.
    Pareto(ParetoArgs),
    /// Best fidelity at unit success probability.
    DefiniteOpt(DefiniteArgs),
    /// Paired frontiers of the full family and a baseline.
    Compare(CompareArgs),
    /// Definite-protection quantity over a 2-D grid of inputs.
    Heatmap(HeatmapArgs),
    /// Check the equal-prior closed forms against the simulator.
    ValidateClosedForm(ValidateArgs),
    /// Cross-check the simulator against the superoperator oracle.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    Plus,
    Minus,
}

impl From<SignArg> for Sign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Plus => Sign::Plus,
            SignArg::Minus => Sign::Minus,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    #[arg(long = "s-plus")]
    pub s_plus: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Read every angle in degrees.
    #[arg(long)]
    pub deg: bool,
    /// Restrict the preweak strength to [0, 1/2].
    #[arg(long = "paper-range")]
    pub paper_range: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ControlArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub p: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub p1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub p2: f64,
    #[arg(long = "gamma-plus", allow_hyphen_values = true)]
    pub gamma_plus: f64,
    #[arg(long = "gamma-minus", allow_hyphen_values = true)]
    pub gamma_minus: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file, written atomically; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Recorded in the metadata block.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Lattice axes as `lo:hi:step` or a single value.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long = "alpha-grid", allow_hyphen_values = true)]
    pub alpha_grid: Option<String>,
    #[arg(long = "p-grid")]
    pub p_grid: Option<String>,
    #[arg(long = "p1-grid")]
    pub p1_grid: Option<String>,
    #[arg(long = "p2-grid")]
    pub p2_grid: Option<String>,
    #[arg(long = "gamma-plus-grid", allow_hyphen_values = true)]
    pub gamma_plus_grid: Option<String>,
    #[arg(long = "gamma-minus-grid", allow_hyphen_values = true)]
    pub gamma_minus_grid: Option<String>,
    /// Grid the feedback angles instead of solving them exactly.
    #[arg(long = "grid-gamma")]
    pub grid_gamma: bool,
    /// Pin p1 = p2 = 0.
    #[arg(long)]
    pub definite: bool,
    /// Largest lattice accepted.
    #[arg(long)]
    pub cap: Option<u128>,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    /// Feedback freedom of the qcc baseline: mirrored, free, tied or zero.
    #[arg(long = "qcc-feedback", default_value = "mirrored")]
    pub qcc_feedback: String,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub control: ControlArgs,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub control: ControlArgs,
    #[arg(long = "input-state", value_enum)]
    pub input_state: SignArg,
    /// Preweak outcome; both when absent.
    #[arg(long, value_enum)]
    pub outcome: Option<SignArg>,
    /// Check the staged states against the path sum.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub family_args: FamilyArgs,
    /// gqcc, qcc, helstrom or ffc.
    #[arg(long, default_value = "gqcc")]
    pub family: String,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub family_args: FamilyArgs,
    /// Comma-separated families.
    #[arg(long, default_value = "gqcc,qcc")]
    pub family: String,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DefiniteArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub family_args: FamilyArgs,
    /// Comma-separated families.
    #[arg(long, default_value = "gqcc,qcc,helstrom,ffc")]
    pub family: String,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub family_args: FamilyArgs,
    /// qcc, helstrom or ffc.
    #[arg(long, default_value = "qcc")]
    pub baseline: String,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct HeatmapArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub family_args: FamilyArgs,
    /// delta, f-opt or alpha-opt.
    #[arg(long, default_value = "delta")]
    pub quantity: String,
    /// name:lo:hi:step with name one of s-plus, theta, phi, r.
    #[arg(long)]
    pub axis1: String,
    #[arg(long)]
    pub axis2: String,
    #[arg(long, default_value = "gqcc")]
    pub family: String,
    /// Baseline of the delta quantity.
    #[arg(long, default_value = "qcc")]
    pub baseline: String,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long = "alpha-points", default_value_t = 24)]
    pub alpha_points: usize,
    #[arg(long = "p-points", default_value_t = 11)]
    pub p_points: usize,
    #[arg(long = "gamma-points", default_value_t = 24)]
    pub gamma_points: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    /// Skip the comparison with the simulator's definite optimum.
    #[arg(long = "no-optimum")]
    pub no_optimum: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let (cli, echo) = match parse(&argv) {
        Ok(v) => v,
        Err(Parsed::Clap(e)) => {
            let _ = e.print();
            return e.exit_code();
        }
        Err(Parsed::Other(e)) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let jobs = cli.jobs.or_else(|| {
        std::env::var("QPROTECT_JOBS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
    });
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs.filter(|&n| n > 0) {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| dispatch(&cli.command, &echo)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::OutOfRange { .. }
        | Error::InvalidGrid { .. }
        | Error::GridTooLarge { .. }
        | Error::Config(_)
        | Error::NotNormalized { .. }
        | Error::NotUnitTrace { .. } => EXIT_USAGE,
        Error::Degenerate { .. } => EXIT_DEGENERATE,
        Error::Io(_) | Error::Json(_) => EXIT_FAILURE,
    }
}

enum Parsed {
    Clap(clap::Error),
    Other(Error),
}

/// Effective options of the subcommand, for the metadata block.
#[derive(Debug, Clone, Default)]
pub struct Echo {
    pub command: String,
    pub options: Vec<(String, String)>,
}

fn parse(argv: &[OsString]) -> std::result::Result<(Cli, Echo), Parsed> {
    let matches = Cli::command()
        .try_get_matches_from(argv)
        .map_err(Parsed::Clap)?;
    let matches = match matches.get_one::<PathBuf>("config") {
        None => matches,
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Parsed::Other(e.into()))?;
            let extra = config_args(&text, &matches).map_err(Parsed::Other)?;
            let mut full = argv.to_vec();
            full.extend(extra);
            Cli::command()
                .try_get_matches_from(full)
                .map_err(Parsed::Clap)?
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(Parsed::Clap)?;
    let echo = echo(&matches);
    Ok((cli, echo))
}

/// Parses a `key=value` file into extra arguments for options not already
/// given on the command line.
pub fn config_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn config_args(text: &str, matches: &ArgMatches) -> Result<Vec<OsString>> {
    let root = Cli::command();
    let (name, sub) = matches
        .subcommand()
        .ok_or_else(|| Error::Config("no subcommand".into()))?;
    let sub_cmd = root
        .find_subcommand(name)
        .ok_or_else(|| Error::Config(format!("unknown subcommand {name}")))?;
    let mut extra = Vec::new();
    for (key, value) in config_entries(text)? {
        if key == "config" {
            return Err(Error::Config("`config` cannot be set from a config file".into()));
        }
        let arg = sub_cmd
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| Error::Config(format!("unknown key `{key}` for {name}")))?;
        let id = arg.get_id().as_str();
        // global options propagate into the subcommand's matches
        if sub.value_source(id) == Some(ValueSource::CommandLine) {
            continue;
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" | "1" | "yes" => extra.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" => {}
                _ => return Err(Error::Config(format!("`{key}` expects true or false"))),
            }
        } else {
            extra.push(OsString::from(format!("--{key}={value}")));
        }
    }
    Ok(extra)
}

fn echo(matches: &ArgMatches) -> Echo {
    let Some((name, sub)) = matches.subcommand() else {
        return Echo::default();
    };
    let root = Cli::command();
    let mut options = Vec::new();
    if let Some(cmd) = root.find_subcommand(name) {
        for arg in cmd.get_arguments() {
            let id = arg.get_id().as_str();
            // neither changes the content of the output
            if matches!(id, "help" | "version" | "output" | "jobs" | "config") {
                continue;
            }
            if let Ok(Some(raw)) = sub.try_get_raw(id) {
                let v: Vec<String> = raw.map(|s| s.to_string_lossy().into_owned()).collect();
                if !v.is_empty() {
                    options.push((arg.get_long().unwrap_or(id).to_string(), v.join(",")));
                }
            }
        }
    }
    Echo {
        command: name.to_string(),
        options,
    }
}

fn dispatch(cmd: &Command, echo: &Echo) -> Result<i32> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Sweep(a) => cmd_sweep(a, echo),
        Command::Pareto(a) => cmd_pareto(a, echo),
        Command::DefiniteOpt(a) => cmd_definite(a, echo),
        Command::Compare(a) => cmd_compare(a, echo),
        Command::Heatmap(a) => cmd_heatmap(a, echo),
        Command::ValidateClosedForm(a) => cmd_validate(a, echo),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn angle(v: f64, deg: bool) -> f64 {
    if deg {
        v.to_radians()
    } else {
        v
    }
}

impl EnsembleArgs {
    fn theta(&self) -> Result<f64> {
        self.theta
            .map(|t| angle(t, self.deg))
            .ok_or_else(|| Error::Config("--theta is required".into()))
    }

    fn ensemble(&self) -> Result<Ensemble> {
        Ensemble::new(
            self.theta()?,
            angle(self.phi.unwrap_or(0.0), self.deg),
            self.s_plus.unwrap_or(0.5),
        )
    }

    fn noise(&self) -> Result<NoiseStrength> {
        NoiseStrength::new(
            self.r
                .ok_or_else(|| Error::Config("--r is required".into()))?,
        )
    }

    fn range(&self) -> RangeMode {
        if self.paper_range {
            RangeMode::Paper
        } else {
            RangeMode::Full
        }
    }

    fn options(&self) -> SearchOptions {
        SearchOptions {
            paper_range: self.paper_range,
            ..SearchOptions::default()
        }
    }
}

impl ControlArgs {
    fn params(&self, deg: bool, mode: RangeMode) -> Result<ControlParams> {
        let c = ControlParams {
            alpha: angle(self.alpha, deg),
            p: self.p,
            p1: self.p1,
            p2: self.p2,
            gamma_plus: angle(self.gamma_plus, deg),
            gamma_minus: angle(self.gamma_minus, deg),
        };
        for (name, v) in [
            ("alpha", c.alpha),
            ("p", c.p),
            ("p1", c.p1),
            ("p2", c.p2),
            ("gamma_plus", c.gamma_plus),
            ("gamma_minus", c.gamma_minus),
        ] {
            if !v.is_finite() {
                return Err(Error::out_of_range(name, v, "finite values"));
            }
        }
        let c = c.wrapped();
        c.validate(mode)?;
        Ok(c)
    }
}

fn parse_axis(name: &str, s: &str, deg: bool) -> Result<Axis> {
    let a = Axis::parse(s).ok_or_else(|| Error::InvalidGrid {
        axis: name.to_string(),
        reason: format!("expected lo:hi:step or a single value, got `{s}`"),
    })?;
    Ok(if deg {
        Axis::new(a.lo.to_radians(), a.hi.to_radians(), a.step.to_radians())
    } else {
        a
    })
}

impl GridArgs {
    fn spec(&self, deg: bool, paper_range: bool) -> Result<GridSpec> {
        let mut g = GridSpec::default();
        let set = |dst: &mut Axis, name: &str, v: &Option<String>, is_angle: bool| -> Result<()> {
            if let Some(s) = v {
                *dst = parse_axis(name, s, deg && is_angle)?;
            }
            Ok(())
        };
        set(&mut g.alpha, "alpha", &self.alpha_grid, true)?;
        set(&mut g.p, "p", &self.p_grid, false)?;
        set(&mut g.p1, "p1", &self.p1_grid, false)?;
        set(&mut g.p2, "p2", &self.p2_grid, false)?;
        set(&mut g.gamma_plus, "gamma_plus", &self.gamma_plus_grid, true)?;
        set(&mut g.gamma_minus, "gamma_minus", &self.gamma_minus_grid, true)?;
        g.solve_feedback = !self.grid_gamma;
        g.definite = self.definite;
        g.paper_range = paper_range;
        if let Some(c) = self.cap {
            g.cap = c;
        }
        g.validate()?;
        Ok(g)
    }
}

impl FamilyArgs {
    fn family(&self, name: &str) -> Result<Family> {
        let b = BaselineKind::parse(name.trim())
            .ok_or_else(|| Error::Config(format!("unknown family `{name}`")))?;
        if b == BaselineKind::Qcc {
            let fb = FeedbackPin::parse(&self.qcc_feedback).ok_or_else(|| {
                Error::Config(format!("unknown qcc feedback `{}`", self.qcc_feedback))
            })?;
            return Ok(Family::qcc(fb));
        }
        Ok(b.family())
    }

    fn families(&self, list: &str) -> Result<Vec<(String, Family)>> {
        list.split(',')
            .map(|n| Ok((n.trim().to_string(), self.family(n)?)))
            .collect()
    }
}

/// Decimal rendering with 12 significant digits, trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mant.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".into()
        } else {
            t.to_string()
        }
    } else {
        s
    }
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Row-oriented writer for CSV or newline-delimited JSON.
pub struct Table<'w> {
    out: &'w mut dyn Write,
    format: Format,
    columns: Vec<String>,
}

impl<'w> Table<'w> {
    pub fn new(
        out: &'w mut dyn Write,
        format: Format,
        columns: &[&str],
        echo: &Echo,
        seed: u64,
        extra: &[(&str, String)],
    ) -> Result<Self> {
        let t = Self {
            out,
            format,
            columns: columns.iter().map(|c| c.to_string()).collect(),
        };
        let mut t = t;
        t.header(echo, seed, extra)?;
        Ok(t)
    }

    fn header(&mut self, echo: &Echo, seed: u64, extra: &[(&str, String)]) -> Result<()> {
        let version = env!("CARGO_PKG_VERSION");
        match self.format {
            Format::Csv => {
                let mut h = String::new();
                writeln!(h, "# tool: qprotect {version}").unwrap();
                writeln!(h, "# command: {}", echo.command).unwrap();
                for (k, v) in &echo.options {
                    writeln!(h, "# config: {k}={v}").unwrap();
                }
                writeln!(h, "# seed: {seed}").unwrap();
                for (k, v) in extra {
                    writeln!(h, "# {k}: {v}").unwrap();
                }
                writeln!(h, "{}", self.columns.join(",")).unwrap();
                self.out.write_all(h.as_bytes())?;
            }
            Format::Json => {
                let config: Map<String, Value> = echo
                    .options
                    .iter()
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect();
                let mut meta = Map::new();
                meta.insert("tool".into(), json!("qprotect"));
                meta.insert("version".into(), json!(version));
                meta.insert("command".into(), json!(echo.command));
                meta.insert("config".into(), Value::Object(config));
                meta.insert("seed".into(), json!(seed));
                for (k, v) in extra {
                    meta.insert(k.to_string(), json!(v));
                }
                serde_json::to_writer(&mut self.out, &json!({ "meta": meta }))?;
                self.out.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<()> {
        debug_assert_eq!(cells.len(), self.columns.len());
        match self.format {
            Format::Csv => {
                let mut line = String::new();
                for (i, c) in cells.iter().enumerate() {
                    if i > 0 {
                        line.push(',');
                    }
                    match c {
                        Cell::Num(v) => line.push_str(&fmt_num(*v)),
                        Cell::Text(s) => line.push_str(&csv_text(s)),
                    }
                }
                line.push('\n');
                self.out.write_all(line.as_bytes())?;
            }
            Format::Json => {
                let mut obj = Map::new();
                for (k, c) in self.columns.iter().zip(cells) {
                    let v = match c {
                        Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
                        Cell::Text(s) => Value::String(s.clone()),
                    };
                    obj.insert(k.clone(), v);
                }
                serde_json::to_writer(&mut self.out, &Value::Object(obj))?;
                self.out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

/// Runs `f` against the output file (through a temporary file renamed into
/// place on success) or stdout.
pub fn with_output<F>(path: Option<&Path>, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
                _ => PathBuf::from("."),
            };
            let tmp = tempfile::NamedTempFile::new_in(&dir)?;
            {
                let mut w = BufWriter::new(tmp.as_file());
                f(&mut w)?;
                w.flush()?;
            }
            tmp.as_file().sync_all()?;
            tmp.persist(p).map_err(|e| Error::Io(e.error))?;
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn ensemble_cells(e: &Ensemble, r: NoiseStrength) -> Vec<Cell> {
    vec![e.theta.into(), e.phi.into(), e.s_plus.into(), r.value().into()]
}

fn param_cells(c: &ControlParams) -> Vec<Cell> {
    vec![
        c.alpha.into(),
        c.p.into(),
        c.p1.into(),
        c.p2.into(),
        c.gamma_plus.into(),
        c.gamma_minus.into(),
    ]
}

fn metric_cells(m: Option<&Metrics>) -> Vec<Cell> {
    match m {
        Some(m) => vec![
            m.f_plus.into(),
            m.f_minus.into(),
            m.g_plus.into(),
            m.g_minus.into(),
            m.fidelity.into(),
            m.success.into(),
        ],
        None => vec![f64::NAN.into(); 6],
    }
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn rho_text(rho: &DensityMatrix) -> String {
    let c = |z: crate::qubit::Complex| format!("{:.6}{:+.6}i", z.re, z.im);
    format!("[[{}, {}], [{}, {}]]", c(rho.m00), c(rho.m01), c(rho.m10), c(rho.m11))
}

fn result_json(r: &ProtectionResult) -> Value {
    let rho = |m: &DensityMatrix| {
        json!([
            [[m.m00.re, m.m00.im], [m.m01.re, m.m01.im]],
            [[m.m10.re, m.m10.im], [m.m11.re, m.m11.im]]
        ])
    };
    json!({
        "f_plus": r.f_plus,
        "f_minus": r.f_minus,
        "g_plus": r.g_plus,
        "g_minus": r.g_minus,
        "F": r.fidelity,
        "G": r.success,
        "rho_out_plus": rho(&r.rho_out_plus),
        "rho_out_minus": rho(&r.rho_out_minus),
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let e = a.ensemble.ensemble()?;
    let r = a.ensemble.noise()?;
    let c = a.control.params(a.ensemble.deg, a.ensemble.range())?;
    let res = protect(&e, &c, r)?;
    with_output(a.output.as_deref(), |w| {
        match a.format {
            Format::Csv => {
                writeln!(w, "f_plus={}", fmt6(res.f_plus))?;
                writeln!(w, "f_minus={}", fmt6(res.f_minus))?;
                writeln!(w, "g_plus={}", fmt6(res.g_plus))?;
                writeln!(w, "g_minus={}", fmt6(res.g_minus))?;
                writeln!(w, "F={}", fmt6(res.fidelity))?;
                writeln!(w, "G={}", fmt6(res.success))?;
                writeln!(w, "rho_out_plus={}", rho_text(&res.rho_out_plus))?;
                writeln!(w, "rho_out_minus={}", rho_text(&res.rho_out_minus))?;
            }
            Format::Json => {
                serde_json::to_writer(&mut *w, &result_json(&res))?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    })?;
    Ok(EXIT_OK)
}

fn cmd_trace(a: &TraceArgs) -> Result<i32> {
    let e = a.ensemble.ensemble()?;
    let r = a.ensemble.noise()?;
    let c = a.control.params(a.ensemble.deg, a.ensemble.range())?;
    let which: Sign = a.input_state.into();
    let outcomes: Vec<Sign> = match a.outcome {
        Some(o) => vec![o.into()],
        None => Sign::BOTH.to_vec(),
    };
    let paths = run_paths(&e.state(which), &OperatorSet::build(e.phi, &c, r));
    let stages = ["preweak", "feedforward", "noise", "postweak", "feedback"];
    let mut worst: f64 = 0.0;
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    writeln!(w, "input={} outcome branch stage norm_sqr a0 a1", which.label())?;
    for o in outcomes {
        let ev = trace_evolution(which, o, &e, &c, r);
        for j in 0..2 {
            let states = [
                ev.after_preweak,
                ev.after_feedforward,
                ev.after_noise[j],
                ev.after_postweak[j],
                ev.final_states[j],
            ];
            for (stage, s) in stages.iter().zip(states) {
                writeln!(
                    w,
                    "{} E{} {:<11} {:.6} {:+.6}{:+.6}i {:+.6}{:+.6}i",
                    o.label(),
                    j + 1,
                    stage,
                    s.norm_sqr(),
                    s.a0.re,
                    s.a0.im,
                    s.a1.re,
                    s.a1.im
                )?;
            }
            let k = match o {
                Sign::Plus => j,
                Sign::Minus => 2 + j,
            };
            worst = worst.max(ev.final_states[j].max_abs_diff(&paths[k].final_state));
        }
    }
    if a.check {
        let ok = worst <= 1e-12;
        writeln!(
            w,
            "check: max |staged - path| = {:e} {}",
            worst,
            if ok { "ok" } else { "FAILED" }
        )?;
        w.flush()?;
        if !ok {
            return Ok(EXIT_VERIFY);
        }
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn cmd_sweep(a: &SweepArgs, echo: &Echo) -> Result<i32> {
    let e = a.ensemble.ensemble()?;
    let r = a.ensemble.noise()?;
    let grid = a.grid.spec(a.ensemble.deg, a.ensemble.paper_range)?;
    let family = a.family_args.family(&a.family)?;
    // fail on an oversized lattice before creating the output file
    grid.lattice(&e, &family)?;
    let mut failed = 0usize;
    with_output(a.out.output.as_deref(), |w| {
        let mut t = Table::new(w, a.out.format, &SWEEP_COLUMNS, echo, a.out.seed, &[])?;
        sweep_each(&e, r, &grid, &family, |rec| {
            let mut cells = ensemble_cells(&e, r);
            cells.extend(param_cells(&rec.params));
            let err = match &rec.outcome {
                Ok(m) => {
                    cells.extend(metric_cells(Some(m)));
                    String::new()
                }
                Err(msg) => {
                    failed += 1;
                    cells.extend(metric_cells(None));
                    msg.clone()
                }
            };
            cells.push(err.into());
            t.row(&cells)
        })
    })?;
    if failed > 0 {
        eprintln!("{failed} lattice points failed; see the error column");
    }
    Ok(EXIT_OK)
}

const FRONTIER_COLUMNS: [&str; 22] = [
    "family", "bin", "g_lo", "g_hi", "status", "theta", "phi", "s_plus", "r", "alpha", "p",
    "p1", "p2", "gamma_plus", "gamma_minus", "f_plus", "f_minus", "g_plus", "g_minus", "F", "G",
    "error",
];

fn frontier_rows(
    t: &mut Table,
    name: &str,
    fr: &Frontier,
    e: &Ensemble,
    r: NoiseStrength,
) -> Result<()> {
    for bin in 0..fr.bins {
        let (lo, hi) = fr.bin_edges(bin);
        let mut cells: Vec<Cell> = vec![name.into(), (bin as f64).into(), lo.into(), hi.into()];
        if let Some(pt) = fr.at_bin(bin) {
            cells.push("ok".into());
            cells.extend(ensemble_cells(e, r));
            cells.extend(param_cells(&pt.params));
            let (m, err) = match fr.family.evaluate(e, &pt.params, r) {
                Ok((_, res)) => (Some(Metrics::from(&res)), String::new()),
                Err(err) => (None, err.to_string()),
            };
            cells.extend(metric_cells(m.as_ref()));
            cells.push(err.into());
        } else {
            let status = if fr.gaps.contains(&bin) { "gap" } else { "dominated" };
            cells.push(status.into());
            cells.extend(ensemble_cells(e, r));
            cells.extend(vec![Cell::Num(f64::NAN); 12]);
            cells.push("".into());
        }
        t.row(&cells)?;
    }
    Ok(())
}

fn cmd_pareto(a: &ParetoArgs, echo: &Echo) -> Result<i32> {
    let e = a.ensemble.ensemble()?;
    let r = a.ensemble.noise()?;
    let grid = a.grid.spec(a.ensemble.deg, a.ensemble.paper_range)?;
    let opts = a.ensemble.options();
    let mut frontiers = Vec::new();
    for (name, fam) in a.family_args.families(&a.family)? {
        frontiers.push((name, pareto(&e, r, a.bins, &grid, &fam, &opts)?));
    }
    with_output(a.out.output.as_deref(), |w| {
        let mut t = Table::new(w, a.out.format, &FRONTIER_COLUMNS, echo, a.out.seed, &[])?;
        for (name, fr) in &frontiers {
            frontier_rows(&mut t, name, fr, &e, r)?;
        }
        Ok(())
    })?;
    Ok(EXIT_OK)
}

fn cmd_definite(a: &DefiniteArgs, echo: &Echo) -> Result<i32> {
    let e = a.ensemble.ensemble()?;
    let r = a.ensemble.noise()?;
    let grid = a.grid.spec(a.ensemble.deg, a.ensemble.paper_range)?;
    let opts = a.ensemble.options();
    let mut rows = Vec::new();
    for (name, fam) in a.family_args.families(&a.family)? {
        let o = definite_optimum(&e, r, &fam, &grid, &opts)?;
        let res = o.reevaluate(&e, r)?;
        rows.push((name, o.params, Metrics::from(&res)));
    }
    let mut cols = vec!["family"];
    cols.extend(SWEEP_COLUMNS);
    with_output(a.out.output.as_deref(), |w| {
        let mut t = Table::new(w, a.out.format, &cols, echo, a.out.seed, &[])?;
        for (name, c, m) in &rows {
            let mut cells: Vec<Cell> = vec![name.as_str().into()];
            cells.extend(ensemble_cells(&e, r));
            cells.extend(param_cells(c));
            cells.extend(metric_cells(Some(m)));
            cells.push("".into());
            t.row(&cells)?;
        }
        Ok(())
    })?;
    Ok(EXIT_OK)
}

fn cmd_compare(a: &CompareArgs, echo: &Echo) -> Result<i32> {
    let e = a.ensemble.ensemble()?;
    let r = a.ensemble.noise()?;
    let grid = a.grid.spec(a.ensemble.deg, a.ensemble.paper_range)?;
    let opts = a.ensemble.options();
    let base = match BaselineKind::parse(&a.baseline) {
        Some(BaselineKind::Gqcc) | None => {
            return Err(Error::Config(format!(
                "--baseline must be qcc, helstrom or ffc, got `{}`",
                a.baseline
            )))
        }
        Some(_) => a.family_args.family(&a.baseline)?,
    };
    let full = BaselineKind::Gqcc.family();
    let cols = [
        "bin", "g_lo", "g_hi", "F_gqcc", "G_gqcc", "F_baseline", "G_baseline", "delta",
    ];
    let extra = [("baseline", a.baseline.clone())];
    if a.grid.definite {
        let o1 = definite_optimum(&e, r, &full, &grid, &opts)?;
        let o2 = definite_optimum(&e, r, &base, &grid, &opts)?;
        with_output(a.out.output.as_deref(), |w| {
            let mut t = Table::new(w, a.out.format, &cols, echo, a.out.seed, &extra)?;
            t.row(&[
                Cell::Num(f64::NAN),
                1.0.into(),
                1.0.into(),
                o1.fidelity.into(),
                o1.success.into(),
                o2.fidelity.into(),
                o2.success.into(),
                (o1.fidelity - o2.fidelity).into(),
            ])
        })?;
        return Ok(EXIT_OK);
    }
    let f1 = pareto(&e, r, a.bins, &grid, &full, &opts)?;
    let f2 = pareto(&e, r, a.bins, &grid, &base, &opts)?;
    with_output(a.out.output.as_deref(), |w| {
        let mut t = Table::new(w, a.out.format, &cols, echo, a.out.seed, &extra)?;
        for bin in 0..a.bins {
            let (lo, hi) = f1.bin_edges(bin);
            let p1 = f1.at_bin(bin);
            let p2 = f2.at_bin(bin);
            let get = |p: Option<&crate::search::FrontierPoint>, k: usize| {
                p.map_or(f64::NAN, |p| if k == 0 { p.fidelity } else { p.success })
            };
            let delta = match (p1, p2) {
                (Some(x), Some(y)) => x.fidelity - y.fidelity,
                _ => f64::NAN,
            };
            t.row(&[
                (bin as f64).into(),
                lo.into(),
                hi.into(),
                get(p1, 0).into(),
                get(p1, 1).into(),
                get(p2, 0).into(),
                get(p2, 1).into(),
                delta.into(),
            ])?;
        }
        Ok(())
    })?;
    Ok(EXIT_OK)
}

fn heat_axis(spec: &str, deg: bool) -> Result<(HeatAxis, Vec<f64>)> {
    let bad = |reason: &str| Error::InvalidGrid {
        axis: spec.to_string(),
        reason: reason.to_string(),
    };
    let (name, range) = spec
        .split_once(':')
        .ok_or_else(|| bad("expected name:lo:hi:step"))?;
    let axis = HeatAxis::parse(name).ok_or_else(|| bad("name must be s-plus, theta, phi or r"))?;
    let is_angle = matches!(axis, HeatAxis::Theta | HeatAxis::Phi);
    let a = parse_axis(name, range, deg && is_angle)?;
    if a.lo > a.hi || a.step.is_nan() || a.step <= 0.0 {
        return Err(bad("need lo <= hi and a positive step"));
    }
    Ok((axis, a.values()))
}

fn cmd_heatmap(a: &HeatmapArgs, echo: &Echo) -> Result<i32> {
    let deg = a.ensemble.deg;
    let ax1 = heat_axis(&a.axis1, deg)?;
    let ax2 = heat_axis(&a.axis2, deg)?;
    if ax1.0 == ax2.0 {
        return Err(Error::Config("--axis1 and --axis2 must differ".into()));
    }
    let quantity = HeatQuantity::parse(&a.quantity)
        .ok_or_else(|| Error::Config(format!("unknown quantity `{}`", a.quantity)))?;
    let on_axis = |h: HeatAxis| ax1.0 == h || ax2.0 == h;
    let theta = match a.ensemble.theta {
        Some(_) => a.ensemble.theta()?,
        None if on_axis(HeatAxis::Theta) => 0.0,
        None => return Err(Error::Config("--theta is required unless it is an axis".into())),
    };
    let r = match a.ensemble.r {
        Some(v) => v,
        None if on_axis(HeatAxis::R) => 0.0,
        None => return Err(Error::Config("--r is required unless it is an axis".into())),
    };
    let base = HeatBase {
        theta,
        phi: angle(a.ensemble.phi.unwrap_or(0.0), deg),
        s_plus: a.ensemble.s_plus.unwrap_or(0.5),
        r,
    };
    let grid = GridSpec {
        definite: true,
        ..a.grid.spec(deg, a.ensemble.paper_range)?
    };
    let family = a.family_args.family(&a.family)?;
    let baseline = a.family_args.family(&a.baseline)?;
    let hm = heatmap(
        &base,
        ax1.clone(),
        ax2.clone(),
        quantity,
        &family,
        &baseline,
        &grid,
        &a.ensemble.options(),
    )?;
    let (n1, n2) = (ax1.0.label(), ax2.0.label());
    with_output(a.out.output.as_deref(), |w| {
        match a.out.format {
            Format::Csv => {
                let corner = format!("{n1}\\{n2}");
                let mut cols: Vec<String> = vec![corner];
                cols.extend(hm.axis2.1.iter().map(|v| fmt_num(*v)));
                let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
                let mut t = Table::new(
                    w,
                    Format::Csv,
                    &col_refs,
                    echo,
                    a.out.seed,
                    &[("quantity", a.quantity.clone())],
                )?;
                for (i, row) in hm.values.iter().enumerate() {
                    let mut cells: Vec<Cell> = vec![hm.axis1.1[i].into()];
                    cells.extend(row.iter().map(|v| Cell::Num(*v)));
                    t.row(&cells)?;
                }
            }
            Format::Json => {
                let q = a.quantity.as_str();
                let mut t = Table::new(
                    w,
                    Format::Json,
                    &[n1, n2, q],
                    echo,
                    a.out.seed,
                    &[("quantity", a.quantity.clone())],
                )?;
                for (i, row) in hm.values.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        t.row(&[hm.axis1.1[i].into(), hm.axis2.1[j].into(), (*v).into()])?;
                    }
                }
            }
        }
        Ok(())
    })?;
    if let Some((v, i, j)) = hm.argmax() {
        eprintln!(
            "max {} = {} at {}={}, {}={}",
            a.quantity,
            fmt_num(v),
            n1,
            fmt_num(hm.axis1.1[i]),
            n2,
            fmt_num(hm.axis2.1[j])
        );
    }
    Ok(EXIT_OK)
}

fn cmd_validate(a: &ValidateArgs, echo: &Echo) -> Result<i32> {
    let e = a.ensemble.ensemble()?;
    let r = a.ensemble.noise()?;
    let opts = ValidationOptions {
        alpha_points: a.alpha_points,
        p_points: a.p_points,
        gamma_points: a.gamma_points,
        tolerance: a.tolerance,
        compare_optimum: !a.no_optimum,
        ..ValidationOptions::default()
    };
    let rep = validate_closed_forms(&e, r, &opts)?;
    with_output(a.output.as_deref(), |w| {
        let config: BTreeMap<&str, &str> = echo
            .options
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        let meta = json!({"meta": {
            "tool": "qprotect",
            "version": env!("CARGO_PKG_VERSION"),
            "command": echo.command,
            "config": config,
            "seed": a.seed,
        }});
        serde_json::to_writer(&mut *w, &meta)?;
        w.write_all(b"\n")?;
        rep.write_json_lines(w)
    })?;
    if let Some(best) = rep.best_fit() {
        eprintln!(
            "best map {} (rms {}, max gap {}); {} itemized discrepancies",
            best.label(),
            fmt_num(best.rms),
            fmt_num(best.max_gap),
            rep.entries.len()
        );
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let rep = oracle::verify(a.draws, a.seed);
    let ok = rep.passed(a.tolerance);
    println!("draws={} seed={} degenerate={}", rep.draws, a.seed, rep.degenerate);
    println!("max |protect - superoperator_protect| = {:e}", rep.max_gap);
    println!("min Choi eigenvalue = {:e}", rep.min_choi_eigenvalue);
    println!("max trace excess = {:e}", rep.max_trace_excess);
    println!("{}", if ok { "ok" } else { "FAILED" });
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(-0.25), "-0.25");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_num(1e-9), "1e-9");
        assert_eq!(fmt_num(1.5e13), "1.5e13");
        assert_eq!(fmt_num(123456.0), "123456");
        assert_eq!(fmt_num(-1e-20), "-1e-20");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(0.0), "0");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_text("plain"), "plain");
        assert_eq!(csv_text("a,b"), "\"a,b\"");
        assert_eq!(csv_text("say \"x\""), "\"say \"\"x\"\"\"");
    }

    #[test]
    fn config_parsing() {
        let e = config_entries("# comment\n\ntheta = 0.5\nr=1\n").unwrap();
        assert_eq!(e, vec![("theta".into(), "0.5".into()), ("r".into(), "1".into())]);
        assert!(config_entries("theta 0.5").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
