//! Command-line front end: scenario files, subcommands and output.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::coupling::{transverse_profile, AtomParams};
use crate::error::Error;
use crate::model::{enumerate_tm_modes, te_cutoffs, WaveguideGeometry};
use crate::numerics::ToleranceSpec;
use crate::rates::{
    emitted_frequency_at_rest, energy_shell_roots, fixed_atom_rate, golden_rule_oracle_extrapolated,
    rate_at_rest_exact, rate_moving_exact, recoil_coefficient, Branch, EmissionReport, Method, RecoilRate,
};
use crate::resolvent::{level_shift_onshell, SurvivalSolver};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_numerical() { EXIT_NON_CONVERGENCE } else { EXIT_INVALID_INPUT },
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// One self-describing run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: WaveguideGeometry,
    pub atom: AtomParams,
    pub omega_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let scenario: Self =
            serde_json::from_str(text).map_err(|e| CliError::invalid(format!("cannot parse scenario: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        self.geometry.validate()?;
        self.atom.validate(&self.geometry)?;
        if !(self.omega_max > 0.0) || !self.omega_max.is_finite() {
            return Err(CliError::invalid(format!("omega_max must be positive, got {}", self.omega_max)));
        }
        if let Some(t) = &self.tolerances {
            t.validate().map_err(|e| CliError::invalid(e.to_string()))?;
        }
        Ok(())
    }

    fn tolerance(&self) -> ToleranceSpec {
        self.tolerances.unwrap_or_default()
    }
}

#[derive(Debug, Parser)]
#[command(name = "waveguide-se", version, about = "Spontaneous emission of a recoiling atom in a rectangular waveguide")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output file, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub output: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Multiplies every output frequency and rate (times are divided).
    #[arg(long, default_value_t = 1.0)]
    pub unit_scale: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List guided modes and their coupling to the atom.
    Modes(Common),
    /// Emission rates and emitted frequencies.
    Rates(Common),
    /// Rates along a one-parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of atom.omega_A, atom.p_z, atom.rest_energy, geometry.a, geometry.b.
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Survival probability of the excited state.
    Dynamics {
        #[command(flatten)]
        common: Common,
        /// Defaults to five golden-rule lifetimes.
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
    /// Cross-check rates, level shift and dynamics against each other.
    Verify(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Modes(c) | Command::Rates(c) | Command::Verify(c) => c,
            Command::Sweep { common, .. } | Command::Dynamics { common, .. } => common,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(command: &Command) -> CliResult<i32> {
    let common = command.common();
    if !(common.unit_scale > 0.0) || !common.unit_scale.is_finite() {
        return Err(CliError::invalid(format!("--unit-scale must be positive, got {}", common.unit_scale)));
    }
    let text = fs::read_to_string(&common.scenario)
        .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", common.scenario.display())))?;
    let scenario = Scenario::from_json(&text)?;
    let scale = common.unit_scale;
    let (body, code) = match command {
        Command::Modes(_) => (cmd_modes(&scenario, common.format, scale), EXIT_OK),
        Command::Rates(_) => (cmd_rates(&scenario, common.format, scale)?, EXIT_OK),
        Command::Sweep {
            param, from, to, steps, ..
        } => (cmd_sweep(&scenario, param, *from, *to, *steps, common.format, scale)?, EXIT_OK),
        Command::Dynamics { t_max, steps, .. } => (cmd_dynamics(&scenario, *t_max, *steps, common.format, scale)?, EXIT_OK),
        Command::Verify(_) => {
            let report = cmd_verify(&scenario)?;
            eprint!("{}", report.render_text());
            let code = if report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED };
            (report.render(common.format), code)
        }
    };
    write_output(&common.output, &body)?;
    Ok(code)
}

fn write_output(target: &str, body: &str) -> CliResult<()> {
    if target == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::invalid(format!("cannot write output: {e}")))
    } else {
        fs::write(target, body).map_err(|e| CliError::invalid(format!("cannot write {target}: {e}")))
    }
}

/// A table cell; empty cells mark quantities that do not exist.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Default)]
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let map: Map<String, Value> =
                        self.header.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                    Value::Object(map)
                })
                .collect(),
        )
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

pub fn cmd_modes(s: &Scenario, format: Format, scale: f64) -> String {
    let mut tm = Table::new(&["m", "n", "cutoff", "coupled", "profile"]);
    for mode in enumerate_tm_modes(&s.geometry, s.omega_max) {
        let profile = transverse_profile(&s.atom, &mode, &s.geometry);
        tm.rows.push(vec![
            mode.m.into(),
            mode.n.into(),
            (mode.cutoff * scale).into(),
            (profile != 0.0).into(),
            profile.into(),
        ]);
    }
    let mut te = Table::new(&["m", "n", "cutoff", "coupled"]);
    for (m, n, cutoff) in te_cutoffs(&s.geometry, s.omega_max) {
        te.rows.push(vec![m.into(), n.into(), (cutoff * scale).into(), false.into()]);
    }
    let mut warnings = Vec::new();
    if tm.rows.is_empty() {
        warnings.push(format!("omega_max = {} lies below every TM cutoff", s.omega_max));
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    match format {
        Format::Json => {
            let mut map = Map::new();
            map.insert("tm_modes".into(), tm.json_rows());
            map.insert("te_modes".into(), te.json_rows());
            map.insert("warnings".into(), Value::from(warnings));
            to_json(&Value::Object(map))
        }
        Format::Csv => {
            let mut all = Table::new(&["family", "m", "n", "cutoff", "coupled", "profile"]);
            for row in tm.rows {
                all.rows.push(std::iter::once(Cell::from("TM")).chain(row).collect());
            }
            for row in te.rows {
                all.rows
                    .push(std::iter::once(Cell::from("TE")).chain(row).chain([Cell::Empty]).collect());
            }
            all.csv()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct RateTotals {
    gamma_exact: f64,
    gamma_first_order: f64,
    gamma_paper_form: f64,
    paper_discrepancy: f64,
    recoil_shift: f64,
}

impl RateTotals {
    fn from_report(r: &EmissionReport, scale: f64) -> Self {
        Self {
            gamma_exact: r.gamma_total_exact * scale,
            gamma_first_order: r.gamma_total_first_order * scale,
            gamma_paper_form: r.gamma_total_paper_form * scale,
            paper_discrepancy: r.paper_discrepancy,
            recoil_shift: r.recoil_shift * scale,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct ModeRates {
    m: u32,
    n: u32,
    cutoff: f64,
    omega_rest: Option<f64>,
    omega_plus: Option<f64>,
    omega_minus: Option<f64>,
    jacobian_plus: Option<f64>,
    jacobian_minus: Option<f64>,
    gamma_plus: Option<f64>,
    gamma_minus: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct RatesOutput {
    gamma_fixed: f64,
    trusted: bool,
    no_active_channel: bool,
    at_rest: RateTotals,
    moving: RateTotals,
    modes: Vec<ModeRates>,
}

fn mode_rates(rest: &EmissionReport, moving: &EmissionReport, scale: f64) -> Vec<ModeRates> {
    let mut modes: Vec<_> = moving.entries_by(Method::ExactRoot).map(|e| e.mode).collect();
    modes.extend(rest.entries_by(Method::ExactRoot).map(|e| e.mode));
    modes.sort_by(|a, b| a.cutoff.total_cmp(&b.cutoff).then((a.m, a.n).cmp(&(b.m, b.n))));
    modes.dedup();
    modes
        .into_iter()
        .map(|mode| {
            let pick = |branch: Branch| {
                moving
                    .entries_by(Method::ExactRoot)
                    .filter(|e| e.mode == mode && e.branch == branch)
                    .max_by(|a, b| a.omega_emitted.total_cmp(&b.omega_emitted))
            };
            let (plus, minus) = (pick(Branch::Right), pick(Branch::Left));
            let branch_gamma = |branch: Branch| {
                let total: f64 = moving
                    .entries_by(Method::ExactRoot)
                    .filter(|e| e.mode == mode && e.branch == branch)
                    .map(|e| e.gamma_contribution)
                    .sum();
                (total > 0.0).then_some(total * scale)
            };
            ModeRates {
                m: mode.m,
                n: mode.n,
                cutoff: mode.cutoff * scale,
                omega_rest: rest
                    .entries_by(Method::ExactRoot)
                    .find(|e| e.mode == mode)
                    .map(|e| e.omega_emitted * scale),
                omega_plus: plus.map(|e| e.omega_emitted * scale),
                omega_minus: minus.map(|e| e.omega_emitted * scale),
                jacobian_plus: plus.map(|e| e.jacobian),
                jacobian_minus: minus.map(|e| e.jacobian),
                gamma_plus: branch_gamma(Branch::Right),
                gamma_minus: branch_gamma(Branch::Left),
            }
        })
        .collect()
}

pub fn cmd_rates(s: &Scenario, format: Format, scale: f64) -> CliResult<String> {
    let rest = rate_at_rest_exact(&s.atom.at_rest(), &s.geometry)?;
    let moving = rate_moving_exact(&s.atom, &s.geometry)?;
    let out = RatesOutput {
        gamma_fixed: moving.gamma_fixed * scale,
        trusted: moving.trusted,
        no_active_channel: moving.no_active_channel,
        at_rest: RateTotals::from_report(&rest, scale),
        moving: RateTotals::from_report(&moving, scale),
        modes: mode_rates(&rest, &moving, scale),
    };
    Ok(match format {
        Format::Json => to_json(&out),
        Format::Csv => {
            let mut t = Table::new(&[
                "m",
                "n",
                "cutoff",
                "omega_rest",
                "omega_plus",
                "omega_minus",
                "jacobian_plus",
                "jacobian_minus",
                "gamma_plus",
                "gamma_minus",
            ]);
            for m in &out.modes {
                t.rows.push(vec![
                    m.m.into(),
                    m.n.into(),
                    m.cutoff.into(),
                    m.omega_rest.into(),
                    m.omega_plus.into(),
                    m.omega_minus.into(),
                    m.jacobian_plus.into(),
                    m.jacobian_minus.into(),
                    m.gamma_plus.into(),
                    m.gamma_minus.into(),
                ]);
            }
            let totals = RatesOutput { modes: Vec::new(), ..out };
            format!("{}# {}\n", t.csv(), serde_json::to_string(&totals).expect("totals serialize"))
        }
    })
}

pub const SWEEP_PARAMS: [&str; 5] = ["atom.omega_A", "atom.p_z", "atom.rest_energy", "geometry.a", "geometry.b"];

fn with_param(s: &Scenario, param: &str, value: f64) -> Scenario {
    let mut out = s.clone();
    match param {
        "atom.omega_A" => out.atom.omega_a = value,
        "atom.p_z" => out.atom.p_z = value,
        "atom.rest_energy" => out.atom.rest_energy = value,
        "geometry.a" => out.geometry.a = value,
        "geometry.b" => out.geometry.b = value,
        _ => unreachable!("parameter path checked by caller"),
    }
    out
}

const SWEEP_COLUMNS: [&str; 8] = [
    "gamma_fixed",
    "gamma_rest_exact",
    "gamma_rest_first_order",
    "gamma_moving_exact",
    "omega_rest",
    "omega_plus",
    "omega_minus",
    "trusted",
];

fn sweep_row(s: &Scenario, scale: f64) -> CliResult<Vec<Cell>> {
    s.validate()?;
    let fixed = fixed_atom_rate(&s.atom, &s.geometry)?;
    let rest = rate_at_rest_exact(&s.atom.at_rest(), &s.geometry)?;
    let moving = rate_moving_exact(&s.atom, &s.geometry)?;
    let active = |flag: bool, v: f64| (!flag).then_some(v * scale);
    Ok(vec![
        active(fixed.no_active_channel, fixed.gamma).into(),
        active(rest.no_active_channel, rest.gamma_total_exact).into(),
        active(fixed.no_active_channel, rest.gamma_total_first_order).into(),
        active(moving.no_active_channel, moving.gamma_total_exact).into(),
        rest.lowest_mode_frequency(Branch::Right).map(|w| w * scale).into(),
        moving.lowest_mode_frequency(Branch::Right).map(|w| w * scale).into(),
        moving.lowest_mode_frequency(Branch::Left).map(|w| w * scale).into(),
        moving.trusted.into(),
    ])
}

pub fn cmd_sweep(
    s: &Scenario,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    format: Format,
    scale: f64,
) -> CliResult<String> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(CliError::invalid(format!(
            "unknown parameter path {param:?}; expected one of {}",
            SWEEP_PARAMS.join(", ")
        )));
    }
    if steps < 2 {
        return Err(CliError::invalid(format!("--steps must be >= 2, got {steps}")));
    }
    if !(from.is_finite() && to.is_finite()) {
        return Err(CliError::invalid("--from and --to must be finite"));
    }
    let grid: Vec<f64> = (0..steps)
        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
        .collect();
    let rows = grid
        .par_iter()
        .map(|&v| {
            let cells = sweep_row(&with_param(s, param, v), scale)?;
            Ok(std::iter::once(Cell::Num(v)).chain(cells).collect())
        })
        .collect::<CliResult<Vec<Vec<Cell>>>>()?;
    let mut header = vec![param];
    header.extend(SWEEP_COLUMNS);
    let table = Table {
        header: header.iter().map(|h| h.to_string()).collect(),
        rows,
    };
    Ok(match format {
        Format::Csv => table.csv(),
        Format::Json => {
            let mut map = Map::new();
            map.insert("param".into(), Value::from(param));
            map.insert("rows".into(), table.json_rows());
            to_json(&Value::Object(map))
        }
    })
}

#[derive(Debug, Clone, Serialize)]
struct DynamicsSummary {
    fitted_rate: f64,
    fit_window: (f64, f64),
    fit_residual: f64,
    fit_points: usize,
    resonance_width: f64,
    golden_rule_rate: f64,
    non_exponential: bool,
    low_signal: bool,
    contour_offset: f64,
}

pub fn cmd_dynamics(s: &Scenario, t_max: Option<f64>, steps: usize, format: Format, scale: f64) -> CliResult<String> {
    let gamma = rate_moving_exact(&s.atom, &s.geometry)?.gamma_total_exact;
    let t_max = match t_max {
        Some(t) => t,
        None if gamma > 0.0 => 5.0 / gamma,
        None => return Err(CliError::invalid("--t-max is required when the golden-rule rate vanishes")),
    };
    let solver = SurvivalSolver::with_tolerance(&s.atom, &s.geometry, s.omega_max, s.tolerance())?;
    let trace = solver.trace(t_max, steps)?;
    let summary = DynamicsSummary {
        fitted_rate: trace.fitted_rate * scale,
        fit_window: (trace.fit_window.0 / scale, trace.fit_window.1 / scale),
        fit_residual: trace.fit_residual,
        fit_points: trace.fit_points,
        resonance_width: trace.resonance_width * scale,
        golden_rule_rate: gamma * scale,
        non_exponential: trace.non_exponential,
        low_signal: trace.low_signal,
        contour_offset: trace.contour_offset * scale,
    };
    let mut table = Table::new(&["t", "P_A"]);
    for (t, p) in trace.times.iter().zip(&trace.survival) {
        table.rows.push(vec![(t / scale).into(), (*p).into()]);
    }
    Ok(match format {
        Format::Csv => format!("{}# {}\n", table.csv(), serde_json::to_string(&summary).expect("summary serializes")),
        Format::Json => {
            let mut map = Map::new();
            map.insert(
                "times".into(),
                Value::from(trace.times.iter().map(|t| t / scale).collect::<Vec<_>>()),
            );
            map.insert("survival".into(), Value::from(trace.survival.clone()));
            if let Value::Object(extra) = serde_json::to_value(&summary).expect("summary serializes") {
                map.extend(extra);
            }
            to_json(&Value::Object(map))
        }
    })
}

/// Outcome of one consistency check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Hard checks decide the exit code; the rest are reported only.
    pub hard: bool,
    /// `None` when the check does not apply to the scenario.
    pub passed: Option<bool>,
    pub measured: Option<f64>,
    pub reference: Option<f64>,
    pub discrepancy: Option<f64>,
    pub tolerance: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub trusted: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => to_json(self),
            Format::Csv => {
                let mut t = Table::new(&[
                    "check",
                    "kind",
                    "status",
                    "measured",
                    "reference",
                    "discrepancy",
                    "tolerance",
                    "note",
                ]);
                for c in &self.checks {
                    t.rows.push(vec![
                        c.name.as_str().into(),
                        c.kind().into(),
                        c.status().into(),
                        c.measured.into(),
                        c.reference.into(),
                        c.discrepancy.into(),
                        c.tolerance.into(),
                        Cell::Text(c.note.replace(',', ";")),
                    ]);
                }
                t.csv()
            }
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let measured = c.measured.map_or("-".to_string(), |v| format!("{v:.6e}"));
            let reference = c.reference.map_or("-".to_string(), |v| format!("{v:.6e}"));
            let discrepancy = c.discrepancy.map_or("-".to_string(), |v| format!("{v:.2e}"));
            out.push_str(&format!(
                "{:<6} {:<13} {:<34} measured {measured:>13}  reference {reference:>13}  discrepancy {discrepancy:>9}  {}\n",
                c.status(),
                c.kind(),
                c.name,
                c.note
            ));
        }
        out.push_str(if self.passed { "all hard checks passed\n" } else { "hard check failure\n" });
        out
    }
}

impl Check {
    fn kind(&self) -> &'static str {
        if self.hard {
            "hard"
        } else {
            "informational"
        }
    }

    fn status(&self) -> &'static str {
        match self.passed {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "skip",
        }
    }

    fn compare(name: &str, hard: bool, measured: f64, reference: f64, tolerance: f64, note: &str) -> Self {
        let discrepancy = if reference != 0.0 {
            (measured - reference).abs() / reference.abs()
        } else {
            (measured - reference).abs()
        };
        Self {
            name: name.into(),
            hard,
            passed: Some(discrepancy <= tolerance),
            measured: Some(measured),
            reference: Some(reference),
            discrepancy: Some(discrepancy),
            tolerance: Some(tolerance),
            note: note.into(),
        }
    }

    fn skipped(name: &str, hard: bool, note: &str) -> Self {
        Self {
            name: name.into(),
            hard,
            passed: None,
            measured: None,
            reference: None,
            discrepancy: None,
            tolerance: None,
            note: note.into(),
        }
    }
}

/// Weak coupling, well above the nearest open cutoff and a heavy atom.
fn in_markov_regime(s: &Scenario, gamma_fixed: f64) -> bool {
    let atom = &s.atom;
    let nearest = fixed_atom_rate(atom, &s.geometry)
        .map(|f| f.active_modes.iter().map(|m| m.cutoff).fold(0.0, f64::max))
        .unwrap_or(0.0);
    atom.is_trusted()
        && atom.rest_energy >= 50.0 * atom.omega_a
        && atom.omega_a >= 1.1 * nearest
        && gamma_fixed < 0.1 * atom.omega_a
}

pub fn cmd_verify(s: &Scenario) -> CliResult<VerifyReport> {
    let (atom, geom) = (&s.atom, &s.geometry);
    let trusted = atom.is_trusted();
    let mut checks = Vec::new();

    // Kinematic identities hold for every scenario.
    let energy = atom.initial_energy();
    let mut worst = 0.0_f64;
    for mode in enumerate_tm_modes(geom, energy) {
        for r in energy_shell_roots(atom, &mode, energy)? {
            let after = r.omega + (atom.p_z - r.k).powi(2) / (2.0 * atom.rest_energy);
            worst = worst.max((after - energy).abs() / energy);
        }
    }
    checks.push(Check::compare(
        "energy_conservation_on_shell",
        true,
        worst,
        0.0,
        1e-10,
        "max relative violation over emission roots",
    ));
    let rest_atom = atom.at_rest();
    let mut worst = 0.0_f64;
    for mode in enumerate_tm_modes(geom, rest_atom.omega_a) {
        if let Ok(w) = emitted_frequency_at_rest(&rest_atom, &mode) {
            if mode.cutoff < rest_atom.omega_a {
                let c = mode.cutoff;
                let residual = rest_atom.omega_a - w - (w - c) * (w + c) / (2.0 * rest_atom.rest_energy);
                worst = worst.max(residual.abs() / w);
            }
        }
    }
    checks.push(Check::compare(
        "rest_frequency_residual",
        true,
        worst,
        0.0,
        1e-12,
        "closed-form recoil frequency in the resonance condition",
    ));

    let moving = rate_moving_exact(atom, geom)?;
    let gamma = moving.gamma_total_exact;
    let physics_hard = trusted;
    let gate = if trusted { "" } else { "outside the nonrelativistic region" };
    if moving.no_active_channel {
        for name in ["quadrature_oracle", "onshell_width", "dynamics_fit", "recoil_coefficient"] {
            checks.push(Check::skipped(name, physics_hard, "no active emission channel"));
        }
    } else {
        let oracle = golden_rule_oracle_extrapolated(atom, geom, 1e-3 * atom.omega_a)?;
        checks.push(Check::compare(
            "quadrature_oracle",
            physics_hard,
            oracle.value,
            gamma,
            1e-3,
            if trusted { "nascent-delta quadrature vs delta roots" } else { gate },
        ));
        let shift = level_shift_onshell(atom, geom, energy, s.omega_max)?;
        checks.push(Check::compare(
            "onshell_width",
            physics_hard,
            -2.0 * shift.value.im,
            gamma,
            1e-3,
            if trusted { "-2 Im B(E0 + i0) vs golden rule" } else { gate },
        ));
        if trusted {
            let markov = in_markov_regime(s, moving.gamma_fixed);
            let solver = SurvivalSolver::with_tolerance(atom, geom, s.omega_max, s.tolerance())?;
            let trace = solver.trace(5.0 / gamma, 200)?;
            let note = match (markov, trace.non_exponential) {
                (true, false) => "fitted decay of P_A(t) vs golden rule".to_string(),
                (true, true) => "fitted decay of P_A(t) vs golden rule; non-exponential".to_string(),
                (false, flag) => format!("outside the weak-coupling window; non_exponential = {flag}"),
            };
            checks.push(Check::compare("dynamics_fit", markov, trace.fitted_rate, gamma, 0.02, &note));
        } else {
            checks.push(Check::skipped("dynamics_fit", false, gate));
        }

        if moving.gamma_fixed > 0.0 {
            for (name, rate, derived, printed) in [
                ("recoil_coefficient_rest", RecoilRate::AtRest, -0.5, -0.75),
                ("recoil_coefficient_moving", RecoilRate::Moving, -0.5, 0.5),
            ] {
                let c = recoil_coefficient(atom, geom, rate, 0.02, 4)?;
                checks.push(Check::compare(
                    name,
                    physics_hard,
                    c.coefficient,
                    derived,
                    0.05,
                    "first-order coefficient of w_A/Mc^2 vs derived expansion",
                ));
                checks.push(Check::compare(
                    &format!("{name}_printed"),
                    false,
                    c.coefficient,
                    printed,
                    0.05,
                    "vs printed first-order coefficient",
                ));
            }
        } else {
            checks.push(Check::skipped("recoil_coefficient", false, "no channel below the transition"));
        }
    }
    let passed = checks.iter().all(|c| !c.hard || c.passed != Some(false));
    Ok(VerifyReport { passed, trusted, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn canonical() -> Scenario {
        let w = 1.5 * PI * 5f64.sqrt();
        Scenario {
            geometry: WaveguideGeometry::new(1.0, 0.5).unwrap(),
            atom: AtomParams {
                omega_a: w,
                rest_energy: 100.0 * w,
                dipole: 0.1,
                x0: 0.5,
                y0: 0.25,
                p_z: 0.0,
            },
            omega_max: 11.0,
            tolerances: None,
        }
    }

    #[test]
    fn scenario_round_trip_is_idempotent() {
        let text = r#"{"geometry":{"a":1,"b":0.5},"atom":{"omega_A":10.5,"rest_energy":1000,"dipole":0.1,"x0":0.5,"y0":0.25,"p_z":0},"omega_max":11}"#;
        let first = Scenario::from_json(text).unwrap().to_json();
        let second = Scenario::from_json(&first).unwrap().to_json();
        assert_eq!(first, second);
    }

    #[test]
    fn scenario_rejects_bad_input() {
        assert_eq!(Scenario::from_json("{").unwrap_err().code, EXIT_INVALID_INPUT);
        let mut s = canonical();
        s.atom.x0 = 2.0;
        assert_eq!(s.validate().unwrap_err().code, EXIT_INVALID_INPUT);
        let mut s = canonical();
        s.omega_max = -1.0;
        assert!(s.validate().is_err());
        let extra = r#"{"geometry":{"a":1,"b":0.5},"atom":{"omega_A":10.5,"rest_energy":1000,"dipole":0.1,"x0":0.5,"y0":0.25,"p_z":0},"omega_max":11,"colour":1}"#;
        assert!(Scenario::from_json(extra).is_err());
    }

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn modes_selection_rule() {
        let mut s = canonical();
        s.omega_max = 3.0 * PI;
        let out = cmd_modes(&s, Format::Csv, 1.0);
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[1].starts_with("TM,1,1,") && lines[1].contains(",true,"));
        assert!(lines[2].starts_with("TM,2,1,") && lines[2].contains(",false,"));
    }

    #[test]
    fn sweep_marks_inactive_channels_empty() {
        let s = canonical();
        let c = PI * 5f64.sqrt();
        let out = cmd_sweep(&s, "atom.omega_A", 0.9 * c, 1.2 * c, 2, Format::Csv, 1.0).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "atom.omega_A,gamma_fixed,gamma_rest_exact,gamma_rest_first_order,gamma_moving_exact,omega_rest,omega_plus,omega_minus,trusted");
        assert!(lines[1].contains(",,,,,,,"));
        assert!(!lines[2].contains(",,"));
        assert!(cmd_sweep(&s, "atom.mass", 1.0, 2.0, 3, Format::Csv, 1.0).is_err());
    }

    #[test]
    fn unit_scale_multiplies_rates() {
        let s = canonical();
        let base: Value = serde_json::from_str(&cmd_rates(&s, Format::Json, 1.0).unwrap()).unwrap();
        let scaled: Value = serde_json::from_str(&cmd_rates(&s, Format::Json, 2.0).unwrap()).unwrap();
        let g0 = base["gamma_fixed"].as_f64().unwrap();
        assert!((scaled["gamma_fixed"].as_f64().unwrap() - 2.0 * g0).abs() < 1e-15);
        assert!((g0 - 0.50265).abs() < 1e-4);
    }

    #[test]
    fn verify_canonical_passes() {
        let report = cmd_verify(&canonical()).unwrap();
        assert!(report.passed, "{}", report.render_text());
        assert!(report.checks.iter().any(|c| !c.hard && c.passed == Some(false)));
    }

    #[test]
    fn verify_relativistic_limits_hard_checks() {
        let mut s = canonical();
        s.atom.p_z = 0.5 * s.atom.rest_energy;
        let report = cmd_verify(&s).unwrap();
        assert!(!report.trusted);
        let hard: Vec<&str> = report.checks.iter().filter(|c| c.hard).map(|c| c.name.as_str()).collect();
        assert_eq!(hard, ["energy_conservation_on_shell", "rest_frequency_residual"]);
    }
}
