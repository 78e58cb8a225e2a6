//! Experiment runner behind the `crtsim` binary: named presets, a flat
//! `key = value` config format, `--set` overrides, and deterministic CSV
//! emission for external plotting.
//!
//! Configs are flat maps with dotted section keys (`model.omega_ghz = 8.0`);
//! the same keys work in a `--config` file and in repeatable `--set key=value`
//! overrides. Merge order is: built-in defaults for the subcommand, then the
//! `--preset`, then the `--config` file, then `--set` flags. After merging,
//! every key must belong to the chosen subcommand's accepted set — anything
//! else is a config error naming the offending key.
//!
//! Units are fixed: every dimensioned column name carries a `_GHz` or `_ns`
//! suffix, probabilities/correlations/ratios are dimensionless, and the
//! photon flux Θ = κ⟨X⁻X⁺⟩ is in photons/ns. Floats are printed with 12
//! significant digits, so identical configs give byte-identical files.
//! When `--out PATH` is given, the effective config is echoed to a
//! `PATH.config` sidecar; re-running with `--config PATH.config` (and no
//! other flags) reproduces the output byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::model::{derived, ModelParams, DrivePulse};
use crate::dynamics::{lindblad_evolve, lz_sweep, SweepSpec};
use crate::qops::{basis_state, eigh, DensityMatrix, Level};
use crate::spectra::{interference_scan, scan_delta1, AblationVariant};
use crate::{invalid, Result, SimError};

/// Command-line surface of the `crtsim` binary.
#[derive(Debug, clap::Parser)]
#[command(name = "crtsim", version, about = "Two flux qubits longitudinally coupled to a resonator: spectra, Landau-Zener sweeps, and dissipative one-photon/two-qubit dynamics", long_about = None)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Eigenspectrum vs Δ₁ with rotating/counter-rotating ablations
    SpectrumScan(RunArgs),
    /// Landau-Zener sweep of Δ₁ across the |1,g,g⟩/|0,e,e⟩ anticrossing
    Lz(RunArgs),
    /// Driven, dissipative Rabi dynamics of photon and pair observables
    Rabi(RunArgs),
    /// Minimal anticrossing gap vs the coupling ratio g₂/g₁
    Interference(RunArgs),
    /// Effective couplings and timescales implied by the model parameters
    Derived(RunArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Named parameter bundle: fig2 | fig4 | fig5 | fig6a | fig6b
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Flat `key = value` config file (same dotted keys as --set)
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. --set model.g2_ghz=-0.2 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output CSV path (stdout when omitted); also writes a PATH.config sidecar
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// The five experiment kinds, used to select key sets and defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    SpectrumScan,
    Lz,
    Rabi,
    Interference,
    Derived,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::SpectrumScan => "spectrum-scan",
            CommandKind::Lz => "lz",
            CommandKind::Rabi => "rabi",
            CommandKind::Interference => "interference",
            CommandKind::Derived => "derived",
        }
    }

    /// Keys the subcommand accepts (anything else is a config error).
    fn allowed_keys(&self) -> Vec<&'static str> {
        let mut keys: Vec<&'static str> = MODEL_KEYS.to_vec();
        match self {
            CommandKind::SpectrumScan => keys.extend_from_slice(SCAN_KEYS),
            CommandKind::Lz => {
                keys.extend_from_slice(SWEEP_KEYS);
                keys.extend_from_slice(&["run.dt_ns", "run.tol"]);
            }
            CommandKind::Rabi => {
                keys.extend_from_slice(PULSE_KEYS);
                keys.extend_from_slice(&["run.t_end_ns", "run.dt_ns", "run.tol"]);
                keys.push("initial.state");
            }
            CommandKind::Interference => keys.extend_from_slice(INTERFERENCE_KEYS),
            // sweep.* is optional context here: only the rate enters (the
            // adiabaticity column), but accepting the full sweep section lets
            // `derived` consume the sweep part of an lz config or preset.
            CommandKind::Derived => keys.extend_from_slice(SWEEP_KEYS),
        }
        keys
    }

    /// Keys that must be present after merging (defaults normally cover them).
    fn required_keys(&self) -> Vec<&'static str> {
        match self {
            CommandKind::Derived => MODEL_KEYS.to_vec(),
            _ => self.allowed_keys(),
        }
    }
}

const MODEL_KEYS: &[&str] = &[
    "model.omega_ghz",
    "model.delta1_ghz",
    "model.delta2_ghz",
    "model.g1_ghz",
    "model.g2_ghz",
    "model.j_ghz",
    "model.chi3_ghz",
    "model.kappa_ghz",
    "model.gamma1_ghz",
    "model.gamma2_ghz",
    "model.n_max",
];
const SCAN_KEYS: &[&str] = &[
    "scan.delta1_start_ghz",
    "scan.delta1_stop_ghz",
    "scan.delta1_step_ghz",
    "scan.k_levels",
    "scan.variants",
];
const SWEEP_KEYS: &[&str] = &["sweep.delta1_start_ghz", "sweep.rate_ghz2", "sweep.t_end_ns"];
const PULSE_KEYS: &[&str] =
    &["pulse.enabled", "pulse.area", "pulse.t0_ns", "pulse.tau_ns", "pulse.omega_d_ghz"];
const INTERFERENCE_KEYS: &[&str] =
    &["interference.ratio_start", "interference.ratio_stop", "interference.ratio_step"];

/// Reference closed-system working point (ω = 2Δ = 8 GHz, g = 0.2, J = 0.1).
const MODEL_DEFAULTS: &[(&str, &str)] = &[
    ("model.omega_ghz", "8.0"),
    ("model.delta1_ghz", "4.0"),
    ("model.delta2_ghz", "4.0"),
    ("model.g1_ghz", "0.2"),
    ("model.g2_ghz", "0.2"),
    ("model.j_ghz", "0.1"),
    ("model.chi3_ghz", "0.0"),
    ("model.kappa_ghz", "0.0"),
    ("model.gamma1_ghz", "0.0"),
    ("model.gamma2_ghz", "0.0"),
    ("model.n_max", "5"),
];

/// Anticrossing scan: Δ₁ from 3.8 to 4.2 GHz in 2 MHz steps, six levels,
/// all three dipole-term variants.
const FIG2: &[(&str, &str)] = &[
    ("scan.delta1_start_ghz", "3.8"),
    ("scan.delta1_stop_ghz", "4.2"),
    ("scan.delta1_step_ghz", "0.002"),
    ("scan.k_levels", "6"),
    ("scan.variants", "full,drop_hcr,drop_hr"),
];

/// Landau-Zener sweep: Δ₁ from 3.84 GHz at v = 6×10⁻⁵ GHz² until 4.16 GHz.
const FIG4: &[(&str, &str)] = &[
    ("sweep.delta1_start_ghz", "3.84"),
    ("sweep.rate_ghz2", "6e-5"),
    ("sweep.t_end_ns", "5333.333333333333"),
    ("run.dt_ns", "4.0"),
    ("run.tol", "1e-4"),
];

/// Driven dissipative Rabi: κ = 0.4 MHz, Γⱼ = 0.2 MHz, Kerr χ₃ = 120 MHz,
/// Gaussian pulse with τ = 20 ns centered at t₀ = 0. Only the t ≥ 0 half of
/// the pulse acts, so the delivered area is A/2; A = π makes that a π/2
/// area — a full 0 ↔ 1 inversion of the Kerr-blockaded resonator (peak
/// amplitude π/(√(2π)·20) ≈ 62.7 MHz), after which the photon converts into
/// the two-qubit excitation through the G_s Rabi oscillation.
const FIG5: &[(&str, &str)] = &[
    ("model.kappa_ghz", "4e-4"),
    ("model.gamma1_ghz", "2e-4"),
    ("model.gamma2_ghz", "2e-4"),
    ("model.chi3_ghz", "0.12"),
    ("pulse.enabled", "true"),
    ("pulse.area", "3.141592653589793"),
    ("pulse.t0_ns", "0.0"),
    ("pulse.tau_ns", "20.0"),
    ("pulse.omega_d_ghz", "8.0"),
    ("run.t_end_ns", "400.0"),
    ("run.dt_ns", "0.5"),
    ("run.tol", "1e-8"),
    ("initial.state", "0gg"),
];

/// Interference scan: g₂/g₁ from −1.5 to 1.5 in 0.05 steps.
const FIG6A: &[(&str, &str)] = &[
    ("interference.ratio_start", "-1.5"),
    ("interference.ratio_stop", "1.5"),
    ("interference.ratio_step", "0.05"),
];

/// Same run as fig5 with the second coupling flipped (g₂ = −g₁).
const FIG6B_EXTRA: &[(&str, &str)] = &[("model.g2_ghz", "-0.2")];

/// Preset names in the order they are documented.
pub const PRESET_NAMES: [&str; 5] = ["fig2", "fig4", "fig5", "fig6a", "fig6b"];

fn preset_pairs(name: &str) -> Result<(CommandKind, Vec<(&'static str, &'static str)>)> {
    match name {
        "fig2" => Ok((CommandKind::SpectrumScan, FIG2.to_vec())),
        "fig4" => Ok((CommandKind::Lz, FIG4.to_vec())),
        "fig5" => Ok((CommandKind::Rabi, FIG5.to_vec())),
        "fig6a" => Ok((CommandKind::Interference, FIG6A.to_vec())),
        "fig6b" => {
            let mut pairs = FIG5.to_vec();
            pairs.extend_from_slice(FIG6B_EXTRA);
            Ok((CommandKind::Rabi, pairs))
        }
        other => Err(invalid(format!(
            "unknown preset '{other}' (available: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

fn base_defaults(kind: CommandKind) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    overlay(&mut map, MODEL_DEFAULTS.iter().copied());
    let extra: &[(&str, &str)] = match kind {
        CommandKind::SpectrumScan => FIG2,
        CommandKind::Lz => FIG4,
        CommandKind::Rabi => FIG5,
        CommandKind::Interference => FIG6A,
        CommandKind::Derived => &[],
    };
    overlay(&mut map, extra.iter().copied());
    map
}

fn overlay<'a>(map: &mut BTreeMap<String, String>, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) {
    for (k, v) in pairs {
        map.insert(k.to_string(), v.to_string());
    }
}

/// Parses flat `key = value` text: one pair per line, `#` starts a comment,
/// blank lines ignored.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            invalid(format!("config line {}: expected 'key = value', got '{raw}'", lineno + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(invalid(format!("config line {}: empty key or value", lineno + 1)));
        }
        pairs.push((k.to_string(), v.to_string()));
    }
    Ok(pairs)
}

/// Canonical serialization used for the sidecar echo and the config hash:
/// sorted `key = value` lines.
pub fn serialize_config(cfg: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in cfg {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// First 16 hex chars of the SHA-256 of the canonical serialization.
pub fn config_hash(cfg: &BTreeMap<String, String>) -> String {
    let digest = Sha256::digest(serialize_config(cfg).as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Merges defaults ← preset ← config file ← `--set` overrides, then checks
/// that every key is accepted and every required key is present.
///
/// Presets are bound to their subcommand (`fig4` belongs to `lz`, …); the
/// exception is `derived`, which accepts any preset and keeps only the
/// model/sweep keys, so `derived --preset fig4` reports that sweep's
/// adiabaticity parameter.
pub fn effective_config(
    kind: CommandKind,
    preset: Option<&str>,
    config_text: Option<&str>,
    overrides: &[String],
) -> Result<BTreeMap<String, String>> {
    let mut map = base_defaults(kind);
    if let Some(name) = preset {
        let (preset_kind, pairs) = preset_pairs(name)?;
        if kind == CommandKind::Derived {
            let allowed = kind.allowed_keys();
            overlay(&mut map, pairs.into_iter().filter(|(k, _)| allowed.contains(k)));
        } else if preset_kind == kind {
            overlay(&mut map, pairs);
        } else {
            return Err(invalid(format!(
                "preset '{name}' belongs to subcommand '{}', not '{}'",
                preset_kind.name(),
                kind.name()
            )));
        }
    }
    if let Some(text) = config_text {
        for (k, v) in parse_config_text(text)? {
            map.insert(k, v);
        }
    }
    for spec in overrides {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| invalid(format!("--set expects KEY=VALUE, got '{spec}'")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(invalid(format!("--set expects KEY=VALUE, got '{spec}'")));
        }
        map.insert(k.to_string(), v.to_string());
    }
    let allowed = kind.allowed_keys();
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(invalid(format!(
                "key '{key}' is not accepted by subcommand '{}' (accepted: {})",
                kind.name(),
                allowed.join(", ")
            )));
        }
    }
    for key in kind.required_keys() {
        if !map.contains_key(key) {
            return Err(invalid(format!(
                "missing required key '{key}' for subcommand '{}'",
                kind.name()
            )));
        }
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Typed extraction from the flat map
// ---------------------------------------------------------------------------

struct Cfg<'a>(&'a BTreeMap<String, String>);

impl<'a> Cfg<'a> {
    fn raw(&self, key: &str) -> Result<&'a str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| invalid(format!("missing required key '{key}'")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let s = self.raw(key)?;
        s.parse::<f64>()
            .map_err(|_| invalid(format!("key '{key}': expected a number, got '{s}'")))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(_) => self.f64(key).map(Some),
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let s = self.raw(key)?;
        s.parse::<usize>()
            .map_err(|_| invalid(format!("key '{key}': expected a nonnegative integer, got '{s}'")))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self.raw(key)? {
            "true" => Ok(true),
            "false" => Ok(false),
            s => Err(invalid(format!("key '{key}': expected true or false, got '{s}'"))),
        }
    }
}

fn model_from(cfg: &Cfg) -> Result<ModelParams> {
    let p = ModelParams {
        omega: cfg.f64("model.omega_ghz")?,
        delta1: cfg.f64("model.delta1_ghz")?,
        delta2: cfg.f64("model.delta2_ghz")?,
        g1: cfg.f64("model.g1_ghz")?,
        g2: cfg.f64("model.g2_ghz")?,
        j: cfg.f64("model.j_ghz")?,
        chi3: cfg.f64("model.chi3_ghz")?,
        kappa: cfg.f64("model.kappa_ghz")?,
        gamma1: cfg.f64("model.gamma1_ghz")?,
        gamma2: cfg.f64("model.gamma2_ghz")?,
        n_max: cfg.usize("model.n_max")?,
    };
    p.validate()?;
    Ok(p)
}

fn pulse_from(cfg: &Cfg) -> Result<Option<DrivePulse>> {
    if !cfg.bool("pulse.enabled")? {
        return Ok(None);
    }
    let pulse = DrivePulse {
        area: cfg.f64("pulse.area")?,
        t0: cfg.f64("pulse.t0_ns")?,
        tau: cfg.f64("pulse.tau_ns")?,
        omega_d: cfg.f64("pulse.omega_d_ghz")?,
    };
    pulse.validate()?;
    Ok(Some(pulse))
}

fn initial_from(cfg: &Cfg, p: &ModelParams) -> Result<DensityMatrix> {
    let space = p.space();
    let psi = match cfg.raw("initial.state")? {
        "0gg" => basis_state(&space, 0, Level::G, Level::G)?,
        "1gg" => basis_state(&space, 1, Level::G, Level::G)?,
        "0ee" => basis_state(&space, 0, Level::E, Level::E)?,
        "dressed_ground" => eigh(&crate::model::build_static(p))?.state(0),
        other => {
            return Err(invalid(format!(
                "key 'initial.state': expected 0gg, 1gg, 0ee or dressed_ground, got '{other}'"
            )))
        }
    };
    Ok(DensityMatrix::from_pure(&psi))
}

/// Inclusive grid from `start` to `stop` in steps of `step`.
///
/// When the span is an integer number of steps the points are placed
/// linspace-style (so interior values like a ratio of exactly 0.0 come out
/// bit-exact); otherwise regular steps are taken from `start` and the final
/// point snaps to `stop`. `start == stop` yields the single-point grid.
pub fn inclusive_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    for (name, v) in [("start", start), ("stop", stop), ("step", step)] {
        if !v.is_finite() {
            return Err(invalid(format!("grid {name} must be finite, got {v}")));
        }
    }
    if start == stop {
        return Ok(vec![start]);
    }
    if stop < start {
        return Err(invalid(format!("grid stop {stop} must be >= start {start}")));
    }
    if step <= 0.0 {
        return Err(invalid(format!("grid step must be positive, got {step}")));
    }
    let span = stop - start;
    let n_est = span / step;
    if n_est > 2e7 {
        return Err(invalid(format!("grid would have {n_est:.0} points; cap is 2e7")));
    }
    let n = n_est.round();
    if n >= 1.0 && (n_est - n).abs() <= 1e-6 * n {
        let n_steps = n as u64;
        return Ok((0..=n_steps).map(|i| start + span * (i as f64 / n)).collect());
    }
    let eps = 1e-9 * span.max(1.0);
    let mut xs = Vec::new();
    let mut i = 0u64;
    loop {
        let x = start + i as f64 * step;
        if x > stop - eps {
            break;
        }
        xs.push(x);
        i += 1;
    }
    xs.push(stop);
    Ok(xs)
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// A table cell: a number (printed with 12 significant digits) or a label.
#[derive(Debug, Clone)]
pub enum CsvValue {
    Num(f64),
    Text(String),
}

impl From<f64> for CsvValue {
    fn from(v: f64) -> Self {
        CsvValue::Num(v)
    }
}

#[derive(Debug, Clone)]
enum RowItem {
    /// Comment line between data rows (marks the start of a variant table).
    Section(String),
    Row(Vec<CsvValue>),
}

/// Rectangular, finite-only CSV with `#` comment lines.
#[derive(Debug, Clone)]
pub struct CsvTable {
    comments: Vec<String>,
    columns: Vec<String>,
    items: Vec<RowItem>,
    data_rows: usize,
}

impl CsvTable {
    pub fn new(columns: Vec<String>) -> CsvTable {
        CsvTable { comments: Vec::new(), columns, items: Vec::new(), data_rows: 0 }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn data_rows(&self) -> usize {
        self.data_rows
    }

    /// Adds a leading comment line (rendered before the header).
    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    /// Adds a comment line in row order (used to mark per-variant tables).
    pub fn section(&mut self, line: impl Into<String>) {
        self.items.push(RowItem::Section(line.into()));
    }

    /// Appends a data row, enforcing the column count and that every numeric
    /// cell is finite — a NaN/Inf cell aborts the run rather than reaching
    /// the output.
    pub fn push(&mut self, row: Vec<CsvValue>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(invalid(format!(
                "row {} has {} cells, header has {} columns",
                self.data_rows,
                row.len(),
                self.columns.len()
            )));
        }
        for (cell, name) in row.iter().zip(&self.columns) {
            if let CsvValue::Num(v) = cell {
                if !v.is_finite() {
                    return Err(SimError::NonFiniteOutput {
                        column: name.clone(),
                        row: self.data_rows,
                    });
                }
            }
        }
        self.items.push(RowItem::Row(row));
        self.data_rows += 1;
        Ok(())
    }

    /// The values of a numeric column, in row order (labels are an error).
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| invalid(format!("no column named '{name}'")))?;
        let mut out = Vec::with_capacity(self.data_rows);
        for item in &self.items {
            if let RowItem::Row(row) = item {
                match &row[idx] {
                    CsvValue::Num(v) => out.push(*v),
                    CsvValue::Text(s) => {
                        return Err(invalid(format!("column '{name}' holds label '{s}'")))
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.comments {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for item in &self.items {
            match item {
                RowItem::Section(line) => {
                    let _ = writeln!(out, "# {line}");
                }
                RowItem::Row(row) => {
                    let mut first = true;
                    for cell in row {
                        if !first {
                            out.push(',');
                        }
                        first = false;
                        match cell {
                            // 12 significant digits, fixed exponent form
                            CsvValue::Num(v) => {
                                let _ = write!(out, "{v:.11e}");
                            }
                            CsvValue::Text(s) => {
                                debug_assert!(!s.contains(',') && !s.contains('\n'));
                                out.push_str(s);
                            }
                        }
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// The five experiments
// ---------------------------------------------------------------------------

/// Diagonalizes each requested Hamiltonian variant along the Δ₁ grid.
/// Columns: `delta1_GHz, E1..Ek_GHz, gap_GHz, P1, P2, Ps_plus, Ps_minus,
/// variant`, one table (contiguous row block) per variant. `E1` is the
/// ground state; the anticrossing pair ψ₃/ψ₄ sits in `E4`/`E5` and
/// `gap_GHz` is their difference.
pub fn run_spectrum_scan(map: &BTreeMap<String, String>) -> Result<CsvTable> {
    let cfg = Cfg(map);
    let p = model_from(&cfg)?;
    let grid = inclusive_grid(
        cfg.f64("scan.delta1_start_ghz")?,
        cfg.f64("scan.delta1_stop_ghz")?,
        cfg.f64("scan.delta1_step_ghz")?,
    )?;
    let k = cfg.usize("scan.k_levels")?;
    let variants = cfg
        .raw("scan.variants")?
        .split(',')
        .map(AblationVariant::parse)
        .collect::<Result<Vec<_>>>()?;
    if variants.is_empty() {
        return Err(invalid("scan.variants selects no variant"));
    }
    let mut columns = vec!["delta1_GHz".to_string()];
    columns.extend((1..=k).map(|i| format!("E{i}_GHz")));
    columns.extend(
        ["gap_GHz", "P1", "P2", "Ps_plus", "Ps_minus", "variant"].map(str::to_string),
    );
    let mut table = CsvTable::new(columns);
    for variant in variants {
        table.section(format!("table: variant = {}", variant.label()));
        for pt in scan_delta1(&p, &grid, variant, k)? {
            let mut row: Vec<CsvValue> = vec![pt.delta1.into()];
            row.extend(pt.energies.iter().map(|&e| CsvValue::from(e)));
            row.extend([
                pt.gap.into(),
                pt.p1.into(),
                pt.p2.into(),
                pt.ps_plus.into(),
                pt.ps_minus.into(),
                CsvValue::Text(variant.label().to_string()),
            ]);
            table.push(row)?;
        }
    }
    Ok(table)
}

/// Sweeps Δ₁ linearly from `sweep.delta1_start_ghz` at `sweep.rate_ghz2`,
/// starting from bare |1,g,g⟩ (the sweep protocol's initial state), and
/// records the crossing populations. Columns: `t_ns, P_1gg, P_0ee,
/// delta1_GHz`. `sweep.t_end_ns = 0` yields the single initial-population
/// row.
pub fn run_lz(map: &BTreeMap<String, String>) -> Result<CsvTable> {
    let cfg = Cfg(map);
    let p = model_from(&cfg)?;
    let sweep = SweepSpec {
        delta1_0: cfg.f64("sweep.delta1_start_ghz")?,
        v: cfg.f64("sweep.rate_ghz2")?,
        t_end: cfg.f64("sweep.t_end_ns")?,
    };
    let t_grid = inclusive_grid(0.0, sweep.t_end, cfg.f64("run.dt_ns")?)?;
    let psi0 = basis_state(&p.space(), 1, Level::G, Level::G)?;
    let trace = lz_sweep(&p, &sweep, &psi0, &t_grid, cfg.f64("run.tol")?)?;
    let mut table =
        CsvTable::new(["t_ns", "P_1gg", "P_0ee", "delta1_GHz"].map(str::to_string).to_vec());
    for i in 0..trace.times.len() {
        table.push(vec![
            trace.times[i].into(),
            trace.p_1gg[i].into(),
            trace.p_0ee[i].into(),
            trace.delta1[i].into(),
        ])?;
    }
    Ok(table)
}

/// Integrates the dressed-basis master equation from `initial.state`, with
/// the Gaussian drive when `pulse.enabled`. Columns: `t_ns, photon_number,
/// gq2, flux, P_0gg, P_1gg, P_0ee, trace_error` (`flux` in photons/ns).
pub fn run_rabi(map: &BTreeMap<String, String>) -> Result<CsvTable> {
    let cfg = Cfg(map);
    let p = model_from(&cfg)?;
    let pulse = pulse_from(&cfg)?;
    let rho0 = initial_from(&cfg, &p)?;
    let t_grid = inclusive_grid(0.0, cfg.f64("run.t_end_ns")?, cfg.f64("run.dt_ns")?)?;
    let trace = lindblad_evolve(&p, pulse.as_ref(), &rho0, &t_grid, cfg.f64("run.tol")?)?;
    let mut table = CsvTable::new(
        ["t_ns", "photon_number", "gq2", "flux", "P_0gg", "P_1gg", "P_0ee", "trace_error"]
            .map(str::to_string)
            .to_vec(),
    );
    for i in 0..trace.times.len() {
        table.push(vec![
            trace.times[i].into(),
            trace.photon_number[i].into(),
            trace.gq2[i].into(),
            trace.flux[i].into(),
            trace.p_0gg[i].into(),
            trace.p_1gg[i].into(),
            trace.p_0ee[i].into(),
            trace.trace_error[i].into(),
        ])?;
    }
    Ok(table)
}

/// Relocates the anticrossing and its minimal gap for each coupling ratio
/// g₂/g₁ on the grid. Columns: `ratio, delta1_star_GHz, gap_GHz`.
pub fn run_interference(map: &BTreeMap<String, String>) -> Result<CsvTable> {
    let cfg = Cfg(map);
    let p = model_from(&cfg)?;
    let ratios = inclusive_grid(
        cfg.f64("interference.ratio_start")?,
        cfg.f64("interference.ratio_stop")?,
        cfg.f64("interference.ratio_step")?,
    )?;
    let mut table =
        CsvTable::new(["ratio", "delta1_star_GHz", "gap_GHz"].map(str::to_string).to_vec());
    for pt in interference_scan(&p, &ratios)? {
        table.push(vec![pt.ratio.into(), pt.delta1_star.into(), pt.gap.into()])?;
    }
    Ok(table)
}

/// One row of coupling-derived quantities: β₁, β₂, χ = 4g₁g₂/ω, G_s =
/// 2J(β₁+β₂), the half-Rabi time π/(2G_s), and — when a sweep rate is
/// configured — the adiabaticity parameter 2πG_s²/v. With G_s = 0 the
/// half-Rabi time is infinite and the run aborts on the finite-only rule.
pub fn run_derived(map: &BTreeMap<String, String>) -> Result<CsvTable> {
    let cfg = Cfg(map);
    let p = model_from(&cfg)?;
    let d = derived(&p);
    let half_rabi = std::f64::consts::PI / (2.0 * d.gs);
    let rate = cfg.opt_f64("sweep.rate_ghz2")?;
    if let Some(v) = rate {
        if !(v > 0.0) {
            return Err(invalid(format!("key 'sweep.rate_ghz2': must be positive, got {v}")));
        }
    }
    let mut columns =
        ["beta1", "beta2", "chi_GHz", "Gs_GHz", "half_rabi_time_ns"].map(str::to_string).to_vec();
    let mut row: Vec<CsvValue> =
        vec![d.beta1.into(), d.beta2.into(), d.chi.into(), d.gs.into(), half_rabi.into()];
    if let Some(v) = rate {
        columns.push("adiabaticity".to_string());
        row.push((2.0 * std::f64::consts::PI * d.gs * d.gs / v).into());
    }
    let mut table = CsvTable::new(columns);
    table.push(row)?;
    Ok(table)
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

fn dispatch(kind: CommandKind, map: &BTreeMap<String, String>) -> Result<CsvTable> {
    match kind {
        CommandKind::SpectrumScan => run_spectrum_scan(map),
        CommandKind::Lz => run_lz(map),
        CommandKind::Rabi => run_rabi(map),
        CommandKind::Interference => run_interference(map),
        CommandKind::Derived => run_derived(map),
    }
}

/// Process exit code for an error: 2 for config errors, 3 for integration
/// failures and non-finite output.
pub fn exit_code(e: &SimError) -> i32 {
    match e {
        SimError::InvalidArgument(_) => 2,
        SimError::IntegrationFailure { .. } | SimError::NonFiniteOutput { .. } => 3,
    }
}

/// Runs a parsed command line: merge config, run the experiment, write the
/// CSV (stdout or `--out`), and echo the effective config to the sidecar.
pub fn run(cli: &Cli) -> Result<()> {
    let (kind, args) = match &cli.command {
        Command::SpectrumScan(a) => (CommandKind::SpectrumScan, a),
        Command::Lz(a) => (CommandKind::Lz, a),
        Command::Rabi(a) => (CommandKind::Rabi, a),
        Command::Interference(a) => (CommandKind::Interference, a),
        Command::Derived(a) => (CommandKind::Derived, a),
    };
    let file_text = match &args.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| {
            invalid(format!("cannot read config file '{}': {e}", path.display()))
        })?),
        None => None,
    };
    let map = effective_config(kind, args.preset.as_deref(), file_text.as_deref(), &args.overrides)?;
    let mut table = dispatch(kind, &map)?;
    let mut comments = vec![
        format!("crtsim {}", kind.name()),
        format!("config_sha256: {}", config_hash(&map)),
        "units: _GHz columns in GHz, _ns columns in ns; probabilities, correlations and \
         ratios dimensionless; flux in photons/ns"
            .to_string(),
    ];
    comments.extend(map.iter().map(|(k, v)| format!("config: {k} = {v}")));
    comments.append(&mut table.comments);
    table.comments = comments;
    let text = table.render();
    match &args.out {
        None => print!("{text}"),
        Some(path) => {
            std::fs::write(path, &text)
                .map_err(|e| invalid(format!("cannot write '{}': {e}", path.display())))?;
            let mut sidecar = path.as_os_str().to_os_string();
            sidecar.push(".config");
            let sidecar = PathBuf::from(sidecar);
            std::fs::write(&sidecar, serialize_config(&map))
                .map_err(|e| invalid(format!("cannot write '{}': {e}", sidecar.display())))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg_for(kind: CommandKind, sets: &[&str]) -> Result<BTreeMap<String, String>> {
        let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        effective_config(kind, None, None, &sets)
    }

    #[test]
    fn unknown_and_misspelled_keys_are_rejected_by_name() {
        let err = cfg_for(CommandKind::Derived, &["model.omega=8.0"]).unwrap_err();
        assert!(err.to_string().contains("model.omega"), "{err}");
        let err = cfg_for(CommandKind::Lz, &["pulse.area=1.0"]).unwrap_err();
        assert!(err.to_string().contains("pulse.area"), "{err}");
        assert!(err.to_string().contains("lz"), "{err}");
        let err =
            effective_config(CommandKind::Rabi, Some("fig9"), None, &[]).unwrap_err();
        assert!(err.to_string().contains("fig9"), "{err}");
    }

    #[test]
    fn presets_bind_to_their_subcommand_except_derived() {
        let err = effective_config(CommandKind::Lz, Some("fig5"), None, &[]).unwrap_err();
        assert!(err.to_string().contains("rabi"), "{err}");
        // derived consumes the sweep part of the lz bundle
        let map = effective_config(CommandKind::Derived, Some("fig4"), None, &[]).unwrap();
        assert_eq!(map.get("sweep.rate_ghz2").map(String::as_str), Some("6e-5"));
        assert!(!map.contains_key("run.dt_ns"));
    }

    #[test]
    fn overrides_win_over_presets_and_files() {
        let file = "model.g1_ghz = 0.3\nmodel.g2_ghz = 0.3 # inline comment\n\n";
        let map = effective_config(
            CommandKind::Derived,
            None,
            Some(file),
            &["model.g2_ghz=-0.3".to_string()],
        )
        .unwrap();
        assert_eq!(map.get("model.g1_ghz").map(String::as_str), Some("0.3"));
        assert_eq!(map.get("model.g2_ghz").map(String::as_str), Some("-0.3"));
        // untouched keys keep their defaults
        assert_eq!(map.get("model.omega_ghz").map(String::as_str), Some("8.0"));
    }

    #[test]
    fn config_text_round_trips_through_the_sidecar_serialization() {
        let map = cfg_for(CommandKind::Rabi, &["model.g2_ghz=-0.2"]).unwrap();
        let echoed = serialize_config(&map);
        let reparsed: BTreeMap<String, String> =
            parse_config_text(&echoed).unwrap().into_iter().collect();
        assert_eq!(map, reparsed);
        assert_eq!(config_hash(&map), config_hash(&reparsed));
        // the hash is 16 hex chars and sensitive to any value change
        assert_eq!(config_hash(&map).len(), 16);
        let map2 = cfg_for(CommandKind::Rabi, &["model.g2_ghz=0.2"]).unwrap();
        assert_ne!(config_hash(&map), config_hash(&map2));
    }

    #[test]
    fn inclusive_grid_handles_divisible_spans_endpoints_and_degenerates() {
        let g = inclusive_grid(3.8, 4.2, 0.002).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 3.8);
        assert_eq!(*g.last().unwrap(), 4.2);
        // linspace placement makes interior round values exact
        let r = inclusive_grid(-1.5, 1.5, 0.05).unwrap();
        assert_eq!(r.len(), 61);
        assert_eq!(r[30], 0.0);
        // non-divisible span: regular steps, then the exact stop
        let t = inclusive_grid(0.0, 10.0, 3.0).unwrap();
        assert_eq!(t, vec![0.0, 3.0, 6.0, 9.0, 10.0]);
        assert_eq!(inclusive_grid(1.0, 1.0, 0.1).unwrap(), vec![1.0]);
        assert_eq!(inclusive_grid(0.0, 0.0, 4.0).unwrap(), vec![0.0]);
        assert!(inclusive_grid(0.0, 1.0, 0.0).is_err());
        assert!(inclusive_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn csv_rejects_non_finite_cells_and_ragged_rows() {
        let mut t = CsvTable::new(vec!["a".into(), "b".into()]);
        t.push(vec![1.0.into(), 2.0.into()]).unwrap();
        let err = t.push(vec![1.0.into(), f64::NAN.into()]).unwrap_err();
        match err {
            SimError::NonFiniteOutput { ref column, row } => {
                assert_eq!(column, "b");
                assert_eq!(row, 1);
            }
            other => panic!("expected NonFiniteOutput, got {other}"),
        }
        assert_eq!(exit_code(&err), 3);
        assert!(t.push(vec![1.0.into()]).is_err());
    }

    #[test]
    fn csv_renders_12_significant_digits_deterministically() {
        let mut t = CsvTable::new(vec!["x".into(), "label".into()]);
        t.comment("units: x in GHz");
        t.push(vec![3.84.into(), CsvValue::Text("full".into())]).unwrap();
        t.push(vec![std::f64::consts::PI.into(), CsvValue::Text("full".into())]).unwrap();
        let text = t.render();
        assert_eq!(
            text,
            "# units: x in GHz\nx,label\n3.84000000000e0,full\n3.14159265359e0,full\n"
        );
        assert_eq!(text, t.render());
    }

    #[test]
    fn derived_row_reports_the_frozen_coupling_constants() {
        let map = cfg_for(CommandKind::Derived, &["sweep.rate_ghz2=6e-5"]).unwrap();
        let table = run_derived(&map).unwrap();
        assert_eq!(table.data_rows(), 1);
        assert_relative_eq!(table.numeric_column("beta1").unwrap()[0], 0.025, epsilon = 1e-12);
        assert_relative_eq!(table.numeric_column("chi_GHz").unwrap()[0], 0.02, epsilon = 1e-12);
        assert_relative_eq!(table.numeric_column("Gs_GHz").unwrap()[0], 0.01, epsilon = 1e-12);
        assert_relative_eq!(
            table.numeric_column("half_rabi_time_ns").unwrap()[0],
            157.07963267948966,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            table.numeric_column("adiabaticity").unwrap()[0],
            10.471975511965976,
            epsilon = 1e-9
        );
        // no sweep key → no adiabaticity column
        let map = cfg_for(CommandKind::Derived, &[]).unwrap();
        let table = run_derived(&map).unwrap();
        assert!(table.numeric_column("adiabaticity").is_err());
        // Gs = 0 makes the half-Rabi time infinite: finite-only rule trips
        let map = cfg_for(CommandKind::Derived, &["model.j_ghz=0.0"]).unwrap();
        assert_eq!(exit_code(&run_derived(&map).unwrap_err()), 3);
    }

    #[test]
    fn spectrum_scan_single_point_emits_one_row_per_variant() {
        let map = cfg_for(
            CommandKind::SpectrumScan,
            &[
                "scan.delta1_start_ghz=4.0",
                "scan.delta1_stop_ghz=4.0",
                "scan.delta1_step_ghz=0.002",
                "scan.k_levels=5",
                "scan.variants=full,drop_hcr",
            ],
        )
        .unwrap();
        let table = run_spectrum_scan(&map).unwrap();
        assert_eq!(table.data_rows(), 2);
        assert_eq!(
            table.columns(),
            &[
                "delta1_GHz",
                "E1_GHz",
                "E2_GHz",
                "E3_GHz",
                "E4_GHz",
                "E5_GHz",
                "gap_GHz",
                "P1",
                "P2",
                "Ps_plus",
                "Ps_minus",
                "variant"
            ]
        );
        let text = table.render();
        assert!(text.contains("# table: variant = full"));
        assert!(text.contains("# table: variant = drop_hcr"));
        // at resonance the full gap is ~2Gs = 0.02 and the ablated one closes
        let gaps = table.numeric_column("gap_GHz").unwrap();
        assert!((gaps[0] - 0.02).abs() < 0.002, "full gap {}", gaps[0]);
        assert!(gaps[1] < 2e-3, "ablated gap {}", gaps[1]);
        // k > dim is a config error
        let map = cfg_for(
            CommandKind::SpectrumScan,
            &["scan.k_levels=100", "scan.delta1_start_ghz=4.0", "scan.delta1_stop_ghz=4.0"],
        )
        .unwrap();
        assert_eq!(exit_code(&run_spectrum_scan(&map).unwrap_err()), 2);
    }

    #[test]
    fn lz_with_zero_duration_reports_the_initial_populations() {
        let map = cfg_for(CommandKind::Lz, &["sweep.t_end_ns=0.0"]).unwrap();
        let table = run_lz(&map).unwrap();
        assert_eq!(table.data_rows(), 1);
        assert_relative_eq!(table.numeric_column("P_1gg").unwrap()[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(table.numeric_column("P_0ee").unwrap()[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(table.numeric_column("delta1_GHz").unwrap()[0], 3.84, epsilon = 1e-12);
    }

    #[test]
    fn rabi_accepts_the_closed_system_override_combination() {
        let map = cfg_for(
            CommandKind::Rabi,
            &[
                "pulse.enabled=false",
                "initial.state=1gg",
                "model.kappa_ghz=0.0",
                "model.gamma1_ghz=0.0",
                "model.gamma2_ghz=0.0",
                "model.chi3_ghz=0.0",
                "run.t_end_ns=1.0",
                "run.dt_ns=0.5",
                "run.tol=1e-6",
            ],
        )
        .unwrap();
        let table = run_rabi(&map).unwrap();
        assert_eq!(table.data_rows(), 3);
        let p1gg = table.numeric_column("P_1gg").unwrap();
        assert!(p1gg[0] > 0.99, "starts in |1,g,g⟩, got {}", p1gg[0]);
        let bad = cfg_for(CommandKind::Rabi, &["initial.state=2gg"]).unwrap();
        assert_eq!(exit_code(&run_rabi(&bad).unwrap_err()), 2);
    }

    #[test]
    fn interference_errors_cleanly_without_a_reference_coupling() {
        let map = cfg_for(
            CommandKind::Interference,
            &["model.g1_ghz=0.0", "interference.ratio_start=1.0", "interference.ratio_stop=1.0"],
        )
        .unwrap();
        let err = run_interference(&map).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("g1"), "{err}");
    }
}
