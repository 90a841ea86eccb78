//! Structured-text run configuration: parsing, validation, and canonical
//! serialization.
//!
//! A config file is line-oriented UTF-8. The first non-comment line names
//! the command (`command = spectrum`); the `[params]`, `[output]`, and
//! optional `[sweep]` sections hold `key = value` entries. Keys are
//! lowercase dotted paths (`field.magnitude`); values are numbers, unit
//! quantities (`48 GHz`, `-1 K`, `10 pi`), booleans, bare words
//! (`as-written`), or comma-separated lists. `#` starts a comment.
//!
//! Validation reports *every* violation with its key path, not just the
//! first. After validation all defaults are materialized into the tree, so
//! the canonical serialization is complete and byte-stable: serializing,
//! re-parsing, and serializing again reproduces identical bytes.
//!
//! Unit conventions: dimensioned keys require an explicit unit suffix.
//! Frequency-valued *model* parameters (splittings, Rabi and dephasing
//! frequencies, detunings) are stored internally as angular frequencies
//! (rad/s); a key documented as angular converts `48 GHz` to 2π·4.8e10.
//! Lifetimes are given as times and inverted where the core wants a rate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use sivsim_core::constants::{C_LIGHT, TWO_PI};
use sivsim_core::phonon::{self, PhononModel, RateMode};
use sivsim_core::photophysics::{FocusModel, PulseTrain, REFERENCE_REP_PERIOD};
use sivsim_core::protocols::{
    excited_coherence_rates, CptConfig, ExcitedBranch, MollowConfig, MwConfig, MwRamseyConfig,
    MwRelaxation, OdmrConfig, OpticalPumpingConfig, OpticalRabiConfig, OpticalRamseyConfig,
    RamanRabiConfig, RamanRamseyConfig, SpinT1Config,
};
use sivsim_core::spectrum::SivParameters;

/// One validation or parse failure, tagged with the key path it concerns.
#[derive(Debug, Clone)]
pub struct ConfigError {
    /// Dotted location, e.g. `params.field.magnitude`.
    pub path: String,
    /// Source line, when the failure points at file text.
    pub line: Option<usize>,
    /// What went wrong and what was expected.
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "{} (line {}): {}", self.path, n, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

fn err(path: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        line,
        message: message.into(),
    }
}

/// Physical dimension of a unit suffix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    /// Hz family; `si()` yields plain Hz.
    Frequency,
    /// Seconds family.
    Time,
    /// Tesla family.
    MagneticField,
    /// Kelvin family.
    Temperature,
    /// Watt family.
    Power,
    /// Metre family.
    Length,
    /// Radian family (`rad`, `deg`, `pi`).
    Angle,
}

impl Dim {
    fn family(self) -> &'static str {
        match self {
            Dim::Frequency => "Hz/kHz/MHz/GHz/THz",
            Dim::Time => "s/ms/us/ns/ps/fs",
            Dim::MagneticField => "T/mT/uT",
            Dim::Temperature => "K/mK",
            Dim::Power => "W/mW/uW/nW/pW",
            Dim::Length => "m/mm/um/nm",
            Dim::Angle => "rad/deg/pi",
        }
    }
}

/// A recognized unit suffix.
#[derive(Debug, PartialEq)]
pub struct Unit {
    /// Suffix as written in config text.
    pub name: &'static str,
    /// Multiplier to the SI base of its dimension.
    pub factor: f64,
    /// Dimension the suffix belongs to.
    pub dim: Dim,
}

static UNITS: &[Unit] = &[
    Unit { name: "Hz", factor: 1.0, dim: Dim::Frequency },
    Unit { name: "kHz", factor: 1e3, dim: Dim::Frequency },
    Unit { name: "MHz", factor: 1e6, dim: Dim::Frequency },
    Unit { name: "GHz", factor: 1e9, dim: Dim::Frequency },
    Unit { name: "THz", factor: 1e12, dim: Dim::Frequency },
    Unit { name: "s", factor: 1.0, dim: Dim::Time },
    Unit { name: "ms", factor: 1e-3, dim: Dim::Time },
    Unit { name: "us", factor: 1e-6, dim: Dim::Time },
    Unit { name: "ns", factor: 1e-9, dim: Dim::Time },
    Unit { name: "ps", factor: 1e-12, dim: Dim::Time },
    Unit { name: "fs", factor: 1e-15, dim: Dim::Time },
    Unit { name: "T", factor: 1.0, dim: Dim::MagneticField },
    Unit { name: "mT", factor: 1e-3, dim: Dim::MagneticField },
    Unit { name: "uT", factor: 1e-6, dim: Dim::MagneticField },
    Unit { name: "K", factor: 1.0, dim: Dim::Temperature },
    Unit { name: "mK", factor: 1e-3, dim: Dim::Temperature },
    Unit { name: "W", factor: 1.0, dim: Dim::Power },
    Unit { name: "mW", factor: 1e-3, dim: Dim::Power },
    Unit { name: "uW", factor: 1e-6, dim: Dim::Power },
    Unit { name: "nW", factor: 1e-9, dim: Dim::Power },
    Unit { name: "pW", factor: 1e-12, dim: Dim::Power },
    Unit { name: "m", factor: 1.0, dim: Dim::Length },
    Unit { name: "mm", factor: 1e-3, dim: Dim::Length },
    Unit { name: "um", factor: 1e-6, dim: Dim::Length },
    Unit { name: "nm", factor: 1e-9, dim: Dim::Length },
    Unit { name: "rad", factor: 1.0, dim: Dim::Angle },
    Unit { name: "deg", factor: std::f64::consts::PI / 180.0, dim: Dim::Angle },
    Unit { name: "pi", factor: std::f64::consts::PI, dim: Dim::Angle },
];

fn unit(name: &str) -> Option<&'static Unit> {
    UNITS.iter().find(|u| u.name == name)
}

/// A parsed config value.
#[derive(Debug, Clone, PartialEq)]
pub enum Raw {
    /// Bare number.
    Num(f64),
    /// Number with unit suffix.
    Quantity(f64, &'static Unit),
    /// `true` / `false`.
    Bool(bool),
    /// Bare token such as `cpt_scan` or `as-written`.
    Word(String),
    /// Comma-separated scalars.
    List(Vec<Raw>),
}

impl Raw {
    /// Canonical text form (what the serializer emits).
    pub fn format(&self) -> String {
        match self {
            Raw::Num(v) => format!("{v}"),
            Raw::Quantity(v, u) => format!("{v} {}", u.name),
            Raw::Bool(b) => format!("{b}"),
            Raw::Word(w) => w.clone(),
            Raw::List(items) => items
                .iter()
                .map(Raw::format)
                .collect::<Vec<_>>()
                .join(", "),
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            Raw::Num(_) => "number",
            Raw::Quantity(..) => "quantity",
            Raw::Bool(_) => "boolean",
            Raw::Word(_) => "word",
            Raw::List(_) => "list",
        }
    }
}

fn is_word(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '/' | '+'))
}

fn is_key(s: &str) -> bool {
    !s.is_empty()
        && s.split('.').all(|seg| {
            !seg.is_empty()
                && seg
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        })
}

fn parse_scalar(tok: &str) -> Result<Raw, String> {
    match tok {
        "true" => return Ok(Raw::Bool(true)),
        "false" => return Ok(Raw::Bool(false)),
        "inf" | "-inf" | "nan" | "NaN" | "infinity" => {
            return Err("non-finite numbers are not allowed".into())
        }
        _ => {}
    }
    let fields: Vec<&str> = tok.split_whitespace().collect();
    match fields.as_slice() {
        [one] => {
            if let Ok(v) = one.parse::<f64>() {
                if !v.is_finite() {
                    return Err("non-finite numbers are not allowed".into());
                }
                return Ok(Raw::Num(v));
            }
            if is_word(one) {
                Ok(Raw::Word((*one).into()))
            } else {
                Err(format!("cannot parse value '{tok}'"))
            }
        }
        [num, suffix] => {
            let v: f64 = num
                .parse()
                .map_err(|_| format!("'{num}' is not a number"))?;
            if !v.is_finite() {
                return Err("non-finite numbers are not allowed".into());
            }
            let u = unit(suffix).ok_or_else(|| format!("unknown unit '{suffix}'"))?;
            Ok(Raw::Quantity(v, u))
        }
        _ => Err(format!("cannot parse value '{tok}' (too many tokens)")),
    }
}

fn parse_value(text: &str) -> Result<Raw, String> {
    if text.contains(',') {
        let items = text
            .split(',')
            .map(|t| {
                let t = t.trim();
                if t.is_empty() {
                    Err("empty list element".to_string())
                } else {
                    parse_scalar(t)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Raw::List(items))
    } else {
        parse_scalar(text)
    }
}

/// One `key = value` entry with its source line (None for filled defaults).
#[derive(Debug, Clone)]
pub struct Entry {
    /// Parsed value.
    pub value: Raw,
    /// 1-based source line, when the entry came from file text.
    pub line: Option<usize>,
}

/// One section's entries, keyed by dotted path.
#[derive(Debug, Clone, Default)]
pub struct Tree {
    /// Sorted entries (canonical order).
    pub entries: BTreeMap<String, Entry>,
}

impl Tree {
    /// Insert or replace an entry.
    pub fn set(&mut self, key: &str, value: Raw, line: Option<usize>) {
        self.entries.insert(key.into(), Entry { value, line });
    }
}

/// A parsed (but not yet validated) configuration file.
#[derive(Debug, Clone)]
pub struct RawConfig {
    /// The command word.
    pub command: String,
    /// `[params]` section.
    pub params: Tree,
    /// `[output]` section.
    pub output: Tree,
    /// `[sweep]` section (empty when absent).
    pub sweep: Tree,
}

/// Parse config text into a raw tree, collecting every syntax error.
pub fn parse_text(text: &str) -> Result<RawConfig, Vec<ConfigError>> {
    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        Top,
        Params,
        Output,
        Sweep,
    }
    let mut errors = Vec::new();
    let mut command: Option<String> = None;
    let mut params = Tree::default();
    let mut output = Tree::default();
    let mut sweep = Tree::default();
    let mut section = Section::Top;

    for (idx, full_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match full_line.find('#') {
            Some(pos) => &full_line[..pos],
            None => full_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            match name.strip_suffix(']').map(str::trim) {
                Some("params") => section = Section::Params,
                Some("output") => section = Section::Output,
                Some("sweep") => section = Section::Sweep,
                Some(other) => errors.push(err(
                    format!("[{other}]"),
                    Some(line_no),
                    "unknown section (expected [params], [output], or [sweep])",
                )),
                None => errors.push(err(line, Some(line_no), "unterminated section header")),
            }
            continue;
        }
        let Some(eq) = line.find('=') else {
            errors.push(err(line, Some(line_no), "expected 'key = value'"));
            continue;
        };
        let key = line[..eq].trim();
        let vtext = line[eq + 1..].trim();
        if !is_key(key) {
            errors.push(err(
                key,
                Some(line_no),
                "keys are lowercase dotted paths of [a-z0-9_] segments",
            ));
            continue;
        }
        if vtext.is_empty() {
            errors.push(err(key, Some(line_no), "empty value"));
            continue;
        }
        let section_name = match section {
            Section::Top => {
                if key == "command" {
                    if command.is_some() {
                        errors.push(err("command", Some(line_no), "duplicate key"));
                    } else {
                        match parse_value(vtext) {
                            Ok(Raw::Word(w)) => command = Some(w),
                            Ok(_) => errors.push(err(
                                "command",
                                Some(line_no),
                                "expected a command word",
                            )),
                            Err(m) => errors.push(err("command", Some(line_no), m)),
                        }
                    }
                } else {
                    errors.push(err(
                        key,
                        Some(line_no),
                        "only 'command = ...' may appear before the first section",
                    ));
                }
                continue;
            }
            Section::Params => "params",
            Section::Output => "output",
            Section::Sweep => "sweep",
        };
        let tree = match section {
            Section::Params => &mut params,
            Section::Output => &mut output,
            Section::Sweep => &mut sweep,
            Section::Top => unreachable!(),
        };
        let path = format!("{section_name}.{key}");
        if tree.entries.contains_key(key) {
            errors.push(err(path, Some(line_no), "duplicate key"));
            continue;
        }
        match parse_value(vtext) {
            Ok(v) => tree.set(key, v, Some(line_no)),
            Err(m) => errors.push(err(path, Some(line_no), m)),
        }
    }

    let command = match command {
        Some(c) => c,
        None => {
            errors.push(err(
                "command",
                None,
                "missing (expected one of spectrum, zeeman-map, rates, protocol, photophysics)",
            ));
            String::new()
        }
    };
    if errors.is_empty() {
        Ok(RawConfig {
            command,
            params,
            output,
            sweep,
        })
    } else {
        Err(errors)
    }
}

fn section_text(out: &mut String, name: &str, tree: &Tree) {
    out.push('\n');
    out.push('[');
    out.push_str(name);
    out.push_str("]\n");
    for (k, e) in &tree.entries {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&e.value.format());
        out.push('\n');
    }
}

/// Canonical serialization of the full config (defaults included once the
/// config has been validated). Re-parsing and re-serializing this text
/// reproduces it byte-identically.
pub fn canonical_text(cfg: &RawConfig) -> String {
    let mut s = format!("command = {}\n", cfg.command);
    section_text(&mut s, "params", &cfg.params);
    section_text(&mut s, "output", &cfg.output);
    if !cfg.sweep.entries.is_empty() {
        section_text(&mut s, "sweep", &cfg.sweep);
    }
    s
}

/// The part of the canonical text that determines results: command, params,
/// and sweep — not the output section, so artifact names don't depend on
/// where they are written.
pub fn hash_input(cfg: &RawConfig) -> String {
    let mut s = format!("command = {}\n", cfg.command);
    section_text(&mut s, "params", &cfg.params);
    if !cfg.sweep.entries.is_empty() {
        section_text(&mut s, "sweep", &cfg.sweep);
    }
    s
}

/// Output serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// Comma-separated values, full double precision.
    Csv,
    /// Pretty-printed JSON.
    Json,
}

/// CLI-level overrides applied during extraction.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Force every phonon rate-mode key (`--mode`).
    pub mode: Option<RateMode>,
    /// Force the output format (`--format`).
    pub format: Option<Format>,
    /// Force the output directory (`--out`).
    pub out_dir: Option<String>,
}

/// Numeric range expected of a value.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Check {
    Any,
    Positive,
    NonNegative,
    Unit01,
    PlusMinusOne,
}

impl Check {
    fn accepts(self, v: f64) -> bool {
        match self {
            Check::Any => true,
            Check::Positive => v > 0.0,
            Check::NonNegative => v >= 0.0,
            Check::Unit01 => v > 0.0 && v <= 1.0,
            Check::PlusMinusOne => v == 1.0 || v == -1.0,
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Check::Any => "finite",
            Check::Positive => "> 0",
            Check::NonNegative => ">= 0",
            Check::Unit01 => "in (0, 1]",
            Check::PlusMinusOne => "+1 or -1",
        }
    }
}

/// Typed reader over one section: consumes keys, fills defaults into the
/// tree, and collects every violation instead of stopping at the first.
struct Params<'a> {
    tree: &'a mut Tree,
    section: &'static str,
    consumed: BTreeSet<String>,
    errors: Vec<ConfigError>,
    mode_override: Option<RateMode>,
}

impl<'a> Params<'a> {
    fn new(tree: &'a mut Tree, section: &'static str, mode_override: Option<RateMode>) -> Self {
        Params {
            tree,
            section,
            consumed: BTreeSet::new(),
            errors: Vec::new(),
            mode_override,
        }
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.section)
    }

    fn fail(&mut self, key: &str, line: Option<usize>, message: impl Into<String>) {
        let path = self.path(key);
        self.errors.push(err(path, line, message));
    }

    fn take(&mut self, key: &str) -> Option<(Raw, Option<usize>)> {
        self.consumed.insert(key.into());
        self.tree
            .entries
            .get(key)
            .map(|e| (e.value.clone(), e.line))
    }

    fn put_default(&mut self, key: &str, value: Raw) {
        self.consumed.insert(key.into());
        self.tree.set(key, value, None);
    }

    /// Quantity of dimension `dim`, returned in SI units.
    fn quantity(&mut self, key: &str, dim: Dim, default: Option<(f64, &str)>, check: Check) -> f64 {
        match self.take(key) {
            Some((Raw::Quantity(v, u), line)) => {
                if u.dim != dim {
                    self.fail(
                        key,
                        line,
                        format!("unit '{}' has the wrong dimension (expected {})", u.name, dim.family()),
                    );
                    return 0.0;
                }
                if !check.accepts(v) {
                    self.fail(
                        key,
                        line,
                        format!("must be {} (got {v} {})", check.describe(), u.name),
                    );
                    return 0.0;
                }
                v * u.factor
            }
            Some((other, line)) => {
                self.fail(
                    key,
                    line,
                    format!(
                        "expected a quantity with a {} unit, got a {}",
                        dim.family(),
                        other.type_name()
                    ),
                );
                0.0
            }
            None => match default {
                Some((v, uname)) => {
                    let u = unit(uname).expect("default unit is in the table");
                    debug_assert_eq!(u.dim, dim);
                    self.put_default(key, Raw::Quantity(v, u));
                    v * u.factor
                }
                None => {
                    self.fail(
                        key,
                        None,
                        format!("missing required key ({} quantity)", dim.family()),
                    );
                    0.0
                }
            },
        }
    }

    /// Frequency quantity converted to angular units (rad/s).
    fn angular(&mut self, key: &str, default: Option<(f64, &str)>, check: Check) -> f64 {
        self.quantity(key, Dim::Frequency, default, check) * TWO_PI
    }

    fn optional_angular(&mut self, key: &str, check: Check) -> Option<f64> {
        if self.tree.entries.contains_key(key) {
            Some(self.angular(key, None, check))
        } else {
            self.consumed.insert(key.into());
            None
        }
    }

    /// Bare dimensionless number.
    fn number(&mut self, key: &str, default: Option<f64>, check: Check) -> f64 {
        match self.take(key) {
            Some((Raw::Num(v), line)) => {
                if !check.accepts(v) {
                    self.fail(key, line, format!("must be {} (got {v})", check.describe()));
                    return default.unwrap_or(1.0);
                }
                v
            }
            Some((other, line)) => {
                self.fail(
                    key,
                    line,
                    format!("expected a bare number, got a {}", other.type_name()),
                );
                default.unwrap_or(1.0)
            }
            None => match default {
                Some(v) => {
                    self.put_default(key, Raw::Num(v));
                    v
                }
                None => {
                    self.fail(key, None, "missing required key (number)");
                    1.0
                }
            },
        }
    }

    /// Non-negative integer with a lower bound.
    fn integer(&mut self, key: &str, default: usize, min: usize) -> usize {
        match self.take(key) {
            Some((Raw::Num(v), line)) => {
                if v.fract() != 0.0 || v < min as f64 || v > u32::MAX as f64 {
                    self.fail(key, line, format!("must be an integer >= {min} (got {v})"));
                    return default;
                }
                v as usize
            }
            Some((other, line)) => {
                self.fail(
                    key,
                    line,
                    format!("expected an integer, got a {}", other.type_name()),
                );
                default
            }
            None => {
                self.put_default(key, Raw::Num(default as f64));
                default
            }
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.take(key) {
            Some((Raw::Bool(b), _)) => b,
            Some((other, line)) => {
                self.fail(
                    key,
                    line,
                    format!("expected true or false, got a {}", other.type_name()),
                );
                default
            }
            None => {
                self.put_default(key, Raw::Bool(default));
                default
            }
        }
    }

    /// Word restricted to `allowed` (any word when `allowed` is empty).
    fn word(&mut self, key: &str, allowed: &[&str], default: Option<&str>) -> String {
        match self.take(key) {
            Some((Raw::Word(w), line)) => {
                if allowed.is_empty() || allowed.contains(&w.as_str()) {
                    w
                } else {
                    self.fail(
                        key,
                        line,
                        format!("'{w}' is not one of: {}", allowed.join(", ")),
                    );
                    allowed[0].into()
                }
            }
            Some((other, line)) => {
                self.fail(key, line, format!("expected a word, got a {}", other.type_name()));
                default.or(allowed.first().copied()).unwrap_or("").into()
            }
            None => match default {
                Some(d) => {
                    self.put_default(key, Raw::Word(d.into()));
                    d.into()
                }
                None => {
                    let choices = allowed.join(", ");
                    self.fail(key, None, format!("missing required key (one of: {choices})"));
                    allowed.first().copied().unwrap_or("").into()
                }
            },
        }
    }

    /// Phonon rate-mode word; the `--mode` flag overrides and is written
    /// back into the tree so the canonical config reflects the actual run.
    fn rate_mode(&mut self, key: &str, default: RateMode) -> RateMode {
        if let Some(forced) = self.mode_override {
            let w = mode_name(forced);
            self.consumed.insert(key.into());
            self.tree.set(key, Raw::Word(w.into()), None);
            return forced;
        }
        let w = self.word(
            key,
            &["as-written", "detailed-balance"],
            Some(mode_name(default)),
        );
        match w.as_str() {
            "detailed-balance" => RateMode::DetailedBalance,
            _ => RateMode::AsWritten,
        }
    }

    /// List of exactly three bare numbers (a lab-frame direction).
    fn axis3(&mut self, key: &str, default: [f64; 3]) -> [f64; 3] {
        match self.take(key) {
            Some((Raw::List(items), line)) => {
                let mut out = [0.0; 3];
                if items.len() != 3 {
                    self.fail(key, line, format!("expected 3 components, got {}", items.len()));
                    return default;
                }
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Raw::Num(v) => out[i] = *v,
                        other => {
                            self.fail(
                                key,
                                line,
                                format!("component {} must be a bare number, got a {}", i + 1, other.type_name()),
                            );
                            return default;
                        }
                    }
                }
                if out.iter().all(|c| *c == 0.0) {
                    self.fail(key, line, "axis must not be the zero vector");
                    return default;
                }
                out
            }
            Some((other, line)) => {
                self.fail(
                    key,
                    line,
                    format!("expected a list of 3 numbers, got a {}", other.type_name()),
                );
                default
            }
            None => {
                self.put_default(
                    key,
                    Raw::List(default.iter().map(|v| Raw::Num(*v)).collect()),
                );
                default
            }
        }
    }

    /// Evenly spaced grid given as `key.start`, `key.stop`, `key.points`.
    ///
    /// Returns SI values (times the angular factor for angular frequencies).
    /// `points = 1` yields just the start value.
    fn grid(
        &mut self,
        key: &str,
        dim: Dim,
        angular: bool,
        default: Option<(f64, &'static str, f64, &'static str, usize)>,
    ) -> Vec<f64> {
        let (dstart, dstop, dpoints) = match default {
            Some((a, ua, b, ub, n)) => (Some((a, ua)), Some((b, ub)), n),
            None => (None, None, 0),
        };
        let kstart = format!("{key}.start");
        let kstop = format!("{key}.stop");
        let kpoints = format!("{key}.points");
        let before = self.errors.len();
        let start = self.quantity(&kstart, dim, dstart, Check::Any);
        let stop = self.quantity(&kstop, dim, dstop, Check::Any);
        let points = self.integer(&kpoints, dpoints.max(1), 1);
        if self.errors.len() > before {
            return Vec::new();
        }
        if points >= 2 && stop <= start {
            let path = self.path(&kstop);
            self.errors.push(err(path, None, "grid stop must exceed start"));
            return Vec::new();
        }
        let factor = if angular { TWO_PI } else { 1.0 };
        if points == 1 {
            return vec![start * factor];
        }
        (0..points)
            .map(|i| {
                let f = i as f64 / (points - 1) as f64;
                (start + (stop - start) * f) * factor
            })
            .collect()
    }

    /// A grid that may be absent entirely (`None`), without defaults.
    fn optional_grid(&mut self, key: &str, dim: Dim, angular: bool) -> Option<Vec<f64>> {
        let sub = [
            format!("{key}.start"),
            format!("{key}.stop"),
            format!("{key}.points"),
        ];
        if sub.iter().any(|k| self.tree.entries.contains_key(k)) {
            Some(self.grid(key, dim, angular, None))
        } else {
            for k in sub {
                self.consumed.insert(k);
            }
            None
        }
    }

    /// Flag every unconsumed key as unknown, then yield the collected
    /// violations.
    fn finish(mut self) -> Vec<ConfigError> {
        let unknown: Vec<(String, Option<usize>)> = self
            .tree
            .entries
            .iter()
            .filter(|(k, _)| !self.consumed.contains(*k))
            .map(|(k, e)| (k.clone(), e.line))
            .collect();
        for (k, line) in unknown {
            self.fail(&k, line, "unknown key");
        }
        self.errors
    }
}

fn mode_name(mode: RateMode) -> &'static str {
    match mode {
        RateMode::AsWritten => "as-written",
        RateMode::DetailedBalance => "detailed-balance",
    }
}

/// SivParameters read from `<prefix>lambda_g`, `<prefix>nu0`, etc.
fn siv_params(p: &mut Params<'_>, prefix: &str) -> SivParameters {
    let k = |name: &str| format!("{prefix}{name}");
    SivParameters {
        lambda_g: p.angular(&k("lambda_g"), Some((48.0, "GHz")), Check::Positive),
        lambda_e: p.angular(&k("lambda_e"), Some((259.0, "GHz")), Check::Positive),
        strain_g: (
            p.angular(&k("strain_g.alpha"), Some((0.0, "GHz")), Check::Any),
            p.angular(&k("strain_g.beta"), Some((0.0, "GHz")), Check::Any),
        ),
        strain_e: (
            p.angular(&k("strain_e.alpha"), Some((0.0, "GHz")), Check::Any),
            p.angular(&k("strain_e.beta"), Some((0.0, "GHz")), Check::Any),
        ),
        g_spin: p.number(&k("g_spin"), Some(2.0), Check::Positive),
        f_orbital: p.number(&k("f_orbital"), Some(0.1), Check::NonNegative),
        so_sign_g: p.number(&k("so_sign_g"), Some(-1.0), Check::PlusMinusOne),
        so_sign_e: p.number(&k("so_sign_e"), Some(-1.0), Check::PlusMinusOne),
        hyperfine_apar: p.quantity(&k("hyperfine_apar"), Dim::Frequency, Some((70.0, "MHz")), Check::Any),
        nu0: p.quantity(
            &k("nu0"),
            Dim::Frequency,
            Some((C_LIGHT / 737e-9 / 1e12, "THz")),
            Check::Positive,
        ),
        gamma_rad: 1.0
            / p.quantity(&k("radiative_lifetime"), Dim::Time, Some((1.85, "ns")), Check::Positive),
    }
}

/// Calibration point (`calibration.delta/.temperature/.t1` plus `mode`)
/// resolved into a phonon model.
fn calibration(
    p: &mut Params<'_>,
    defaults: (f64, f64, f64),
    errors: &mut Vec<ConfigError>,
) -> Option<PhononModel> {
    let (d_ghz, t_k, t1_ns) = defaults;
    let mode = p.rate_mode("mode", RateMode::AsWritten);
    let delta = p.angular("calibration.delta", Some((d_ghz, "GHz")), Check::Positive);
    let temp = p.quantity(
        "calibration.temperature",
        Dim::Temperature,
        Some((t_k, "K")),
        Check::Positive,
    );
    let t1 = p.quantity("calibration.t1", Dim::Time, Some((t1_ns, "ns")), Check::Positive);
    if !p.errors.is_empty() {
        return None;
    }
    match phonon::calibrate(delta, temp, t1, mode) {
        Ok(m) => Some(m),
        Err(e) => {
            errors.push(err("params.calibration", None, e.to_string()));
            None
        }
    }
}

/// Fully resolved run plan for one command.
#[derive(Debug, Clone)]
pub enum CommandSpec {
    /// Transition table at one field point.
    Spectrum {
        /// Center parameters.
        params: SivParameters,
        /// Field direction (lab frame).
        axis: [f64; 3],
        /// Field magnitude, T.
        tesla: f64,
        /// Include the 29Si nuclear spin.
        nuclear: bool,
    },
    /// Transition tables along a field ramp.
    ZeemanMap {
        /// Center parameters.
        params: SivParameters,
        /// Ramp direction.
        axis: [f64; 3],
        /// Ramp endpoint, T.
        b_max: f64,
        /// Number of ramp points (endpoints included).
        steps: usize,
    },
    /// Phonon rate/T1 table over splitting x temperature.
    Rates {
        /// Calibrated model.
        model: PhononModel,
        /// Orbital splittings, rad/s.
        deltas: Vec<f64>,
        /// Temperatures, K.
        temps: Vec<f64>,
    },
    /// One protocol run.
    Protocol(Box<ProtocolSpec>),
    /// Pulse-train dipole/efficiency chain.
    Photophysics {
        /// Pi-pulse average power, W.
        p_pi: f64,
        /// Excitation train.
        train: PulseTrain,
        /// Focal model.
        focus: FocusModel,
        /// ZPL frequency, Hz.
        nu: f64,
        /// Fluorescence lifetime, s.
        tau_fl: f64,
    },
}

/// Protocol variant with its fully resolved core configuration.
#[derive(Debug, Clone)]
pub enum ProtocolSpec {
    /// Two-pulse orbital T1 recovery.
    OpticalPumping(OpticalPumpingConfig),
    /// Spin relaxation vs field angle.
    SpinT1(SpinT1Config),
    /// Dark-resonance scan; optionally pre-calibrate the drive power so the
    /// isolated power-broadening contribution equals `power_target_hz`.
    Cpt {
        /// Scan configuration.
        cfg: CptConfig,
        /// Isolated power-broadening target, Hz.
        power_target_hz: Option<f64>,
    },
    /// Microwave spin resonance scan.
    Odmr(OdmrConfig),
    /// Resonant microwave Rabi oscillation.
    MwRabi {
        /// Ground-doublet setup.
        cfg: MwConfig,
        /// Drive durations, s.
        durations: Vec<f64>,
    },
    /// Microwave Ramsey interference.
    MwRamsey(MwRamseyConfig),
    /// Ultrafast optical Rabi area sweep.
    OpticalRabi(OpticalRabiConfig),
    /// Optical Ramsey on one excited branch.
    OpticalRamsey(OpticalRamseyConfig),
    /// Continuous two-leg Raman transfer.
    RamanRabi(RamanRabiConfig),
    /// Two-pulse Raman interferometer.
    RamanRamsey(RamanRamseyConfig),
    /// Driven-transient sideband spectroscopy.
    Mollow(MollowConfig),
}

impl ProtocolSpec {
    /// The variant word (also the artifact stem).
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolSpec::OpticalPumping(_) => "optical_pumping_t1",
            ProtocolSpec::SpinT1(_) => "spin_t1",
            ProtocolSpec::Cpt { .. } => "cpt_scan",
            ProtocolSpec::Odmr(_) => "odmr_scan",
            ProtocolSpec::MwRabi { .. } => "mw_rabi",
            ProtocolSpec::MwRamsey(_) => "mw_ramsey",
            ProtocolSpec::OpticalRabi(_) => "optical_rabi",
            ProtocolSpec::OpticalRamsey(_) => "optical_ramsey",
            ProtocolSpec::RamanRabi(_) => "raman_rabi",
            ProtocolSpec::RamanRamsey(_) => "raman_ramsey",
            ProtocolSpec::Mollow(_) => "mollow",
        }
    }
}

/// A validated sweep: re-run the command with `params.<key>` set to each
/// value in turn.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Params key to substitute.
    pub key: String,
    /// Values in input order.
    pub values: Vec<Raw>,
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Canonicalized tree (defaults and overrides materialized).
    pub raw: RawConfig,
    /// Base command plan.
    pub spec: CommandSpec,
    /// Per-sweep-value plans (empty without a `[sweep]` section).
    pub sweep: Option<(SweepSpec, Vec<CommandSpec>)>,
    /// Output format.
    pub format: Format,
    /// Output directory.
    pub out_dir: String,
    /// Artifact stem (command or protocol variant).
    pub stem: String,
}

const VARIANTS: &[&str] = &[
    "optical_pumping_t1",
    "spin_t1",
    "cpt_scan",
    "odmr_scan",
    "mw_rabi",
    "mw_ramsey",
    "optical_rabi",
    "optical_ramsey",
    "raman_rabi",
    "raman_ramsey",
    "mollow",
];

/// Validate the raw tree and resolve it into a run plan, reporting every
/// violation. Fills defaults (and the `--mode` override) into `raw`.
pub fn extract(mut raw: RawConfig, overrides: &Overrides) -> Result<RunConfig, Vec<ConfigError>> {
    // Output section first: independent of the command.
    let mut op = Params::new(&mut raw.output, "output", None);
    let format_word = op.word("format", &["csv", "json"], Some("csv"));
    let dir_word = op.word("dir", &[], Some("."));
    let mut errors = op.finish();

    let format = match overrides.format {
        Some(f) => {
            raw.output.set(
                "format",
                Raw::Word(match f {
                    Format::Csv => "csv".into(),
                    Format::Json => "json".into(),
                }),
                None,
            );
            f
        }
        None => match format_word.as_str() {
            "json" => Format::Json,
            _ => Format::Csv,
        },
    };
    let out_dir = overrides.out_dir.clone().unwrap_or(dir_word);

    let command = raw.command.clone();
    let spec = match build_spec(&command, &mut raw.params, overrides) {
        Ok(s) => Some(s),
        Err(mut e) => {
            errors.append(&mut e);
            None
        }
    };

    // Sweep section: validate the key/values shape, then pre-resolve one
    // spec per value by substituting into the (now default-filled) params.
    let mut sp = Params::new(&mut raw.sweep, "sweep", None);
    let has_sweep = !sp.tree.entries.is_empty();
    let mut sweep_def = None;
    if has_sweep {
        let key = sp.word("key", &[], None);
        let values = match sp.take("values") {
            Some((Raw::List(items), _)) => items,
            Some((scalar, _)) => vec![scalar],
            None => {
                sp.fail("values", None, "missing required key (value list)");
                Vec::new()
            }
        };
        let mut e = sp.finish();
        errors.append(&mut e);
        if errors.is_empty() && !values.is_empty() {
            sweep_def = Some(SweepSpec { key, values });
        } else if values.is_empty() && errors.is_empty() {
            errors.push(err("sweep.values", None, "value list is empty"));
        }
    } else {
        let mut e = sp.finish();
        errors.append(&mut e);
    }

    let mut sweep = None;
    if let (Some(def), true) = (&sweep_def, errors.is_empty()) {
        let mut specs = Vec::with_capacity(def.values.len());
        for (i, value) in def.values.iter().enumerate() {
            let mut tree = raw.params.clone();
            tree.set(&def.key, value.clone(), None);
            match build_spec(&command, &mut tree, overrides) {
                Ok(s) => specs.push(s),
                Err(e) => {
                    for mut one in e {
                        one.message = format!("(sweep value {}) {}", i + 1, one.message);
                        errors.push(one);
                    }
                }
            }
        }
        if errors.is_empty() {
            sweep = Some((sweep_def.take().expect("checked above"), specs));
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    let spec = spec.expect("errors are empty");
    let stem = match &spec {
        CommandSpec::Protocol(p) => p.name().to_string(),
        _ => command.replace('-', "_"),
    };
    Ok(RunConfig {
        raw,
        spec,
        sweep,
        format,
        out_dir,
        stem,
    })
}

fn build_spec(
    command: &str,
    params: &mut Tree,
    overrides: &Overrides,
) -> Result<CommandSpec, Vec<ConfigError>> {
    let mut p = Params::new(params, "params", overrides.mode);
    match command {
        "spectrum" => {
            let siv = siv_params(&mut p, "");
            let axis = p.axis3("field.axis", [0.0, 0.0, 1.0]);
            let tesla = p.quantity(
                "field.magnitude",
                Dim::MagneticField,
                Some((0.0, "T")),
                Check::NonNegative,
            );
            let nuclear = p.boolean("nuclear", false);
            let mut errors = p.finish();
            validate_siv(&siv, &mut errors);
            if errors.is_empty() {
                Ok(CommandSpec::Spectrum {
                    params: siv,
                    axis,
                    tesla,
                    nuclear,
                })
            } else {
                Err(errors)
            }
        }
        "zeeman-map" => {
            let siv = siv_params(&mut p, "");
            let axis = p.axis3("axis", [0.0, 0.0, 1.0]);
            let b_max = p.quantity("b_max", Dim::MagneticField, Some((4.0, "T")), Check::Positive);
            let steps = p.integer("steps", 81, 2);
            let mut errors = p.finish();
            validate_siv(&siv, &mut errors);
            if errors.is_empty() {
                Ok(CommandSpec::ZeemanMap {
                    params: siv,
                    axis,
                    b_max,
                    steps,
                })
            } else {
                Err(errors)
            }
        }
        "rates" => {
            let mut errors = Vec::new();
            let model = calibration(&mut p, (48.0, 5.0, 39.0), &mut errors);
            let deltas = p.grid("delta", Dim::Frequency, true, Some((48.0, "GHz", 48.0, "GHz", 1)));
            let temps = p.grid("temp", Dim::Temperature, false, Some((1.0, "K", 10.0, "K", 19)));
            let mut e = p.finish();
            errors.append(&mut e);
            match (model, errors.is_empty()) {
                (Some(model), true) => Ok(CommandSpec::Rates {
                    model,
                    deltas,
                    temps,
                }),
                _ => Err(errors),
            }
        }
        "protocol" => build_protocol(p).map(|s| CommandSpec::Protocol(Box::new(s))),
        "photophysics" => {
            let p_pi = p.quantity("p_pi", Dim::Power, Some((817.0, "nW")), Check::Positive);
            let p_avg = p.quantity("p_avg", Dim::Power, Some((817.0, "nW")), Check::Positive);
            let rep_period = p.quantity(
                "rep_period",
                Dim::Time,
                Some((REFERENCE_REP_PERIOD / 1e-9, "ns")),
                Check::Positive,
            );
            let w_pulse = p.quantity("w_pulse", Dim::Time, Some((12.0, "ps")), Check::Positive);
            let d_focus = p.quantity("d_focus", Dim::Length, Some((862.0, "nm")), Check::Positive);
            let t = p.number("t", Some(0.68), Check::Unit01);
            let s = p.number("s", Some(0.57), Check::Unit01);
            let n = p.number("n", Some(2.4), Check::Positive);
            let tau_fl = p.quantity("tau_fl", Dim::Time, Some((1.85, "ns")), Check::Positive);
            let nu = p.quantity(
                "nu",
                Dim::Frequency,
                Some((C_LIGHT / 737e-9 / 1e12, "THz")),
                Check::Positive,
            );
            let errors = p.finish();
            if errors.is_empty() {
                Ok(CommandSpec::Photophysics {
                    p_pi,
                    train: PulseTrain {
                        p_avg,
                        rep_period,
                        w_pulse,
                    },
                    focus: FocusModel {
                        d_focus,
                        t_transmission: t,
                        s_field_ratio: s,
                        n_index: n,
                    },
                    nu,
                    tau_fl,
                })
            } else {
                Err(errors)
            }
        }
        other => Err(vec![err(
            "command",
            None,
            format!(
                "'{other}' is not a command (expected one of spectrum, zeeman-map, rates, protocol, photophysics)"
            ),
        )]),
    }
}

fn validate_siv(siv: &SivParameters, errors: &mut Vec<ConfigError>) {
    if errors.is_empty() {
        if let Err(e) = siv.validate() {
            errors.push(err("params", None, e.to_string()));
        }
    }
}

fn build_protocol(mut p: Params<'_>) -> Result<ProtocolSpec, Vec<ConfigError>> {
    let variant = match p.take("variant") {
        Some((Raw::Word(w), line)) => {
            if VARIANTS.contains(&w.as_str()) {
                w
            } else {
                return Err(vec![err(
                    "params.variant",
                    line,
                    format!("'{w}' is not a protocol variant (expected one of: {})", VARIANTS.join(", ")),
                )]);
            }
        }
        Some((other, line)) => {
            return Err(vec![err(
                "params.variant",
                line,
                format!("expected a variant word, got a {}", other.type_name()),
            )])
        }
        None => {
            return Err(vec![err(
                "params.variant",
                None,
                format!("missing required key (one of: {})", VARIANTS.join(", ")),
            )])
        }
    };

    match variant.as_str() {
        "optical_pumping_t1" => {
            let mut errors = Vec::new();
            let model = calibration(&mut p, (48.0, 5.0, 39.0), &mut errors);
            let temperature = p.quantity("temperature", Dim::Temperature, Some((5.0, "K")), Check::NonNegative);
            let orbital_splitting = p.angular("orbital_splitting", Some((48.0, "GHz")), Check::Positive);
            let gamma_rad = 1.0
                / p.quantity("radiative_lifetime", Dim::Time, Some((1.85, "ns")), Check::Positive);
            let rabi = p.angular("rabi", Some((150.0, "MHz")), Check::Positive);
            let pulse_duration = p.quantity("pulse_duration", Dim::Time, Some((30.0, "ns")), Check::Positive);
            let readout_window = p.quantity("readout_window", Dim::Time, Some((2.0, "ns")), Check::Positive);
            let delays = p.grid("delays", Dim::Time, false, Some((12.0, "ns", 212.0, "ns", 34)));
            let tol = p.number("tol", Some(1e-9), Check::Positive);
            let mut e = p.finish();
            errors.append(&mut e);
            match (model, errors.is_empty()) {
                (Some(phonon), true) => Ok(ProtocolSpec::OpticalPumping(OpticalPumpingConfig {
                    phonon,
                    temperature,
                    orbital_splitting,
                    gamma_rad,
                    rabi,
                    pulse_duration,
                    readout_window,
                    delays,
                    tol,
                })),
                _ => Err(errors),
            }
        }
        "spin_t1" => {
            let mut errors = Vec::new();
            let siv = siv_params(&mut p, "siv.");
            let model = calibration(&mut p, (48.0, 2.0, 66.5), &mut errors);
            let field_tesla = p.quantity("field.magnitude", Dim::MagneticField, Some((1.0, "T")), Check::Positive);
            let tilt_rad = p.quantity("tilt", Dim::Angle, Some((10.0, "deg")), Check::NonNegative);
            let temperature = p.quantity("temperature", Dim::Temperature, Some((2.0, "K")), Check::Positive);
            let times = p.grid("times", Dim::Time, false, Some((0.0, "us", 12.0, "us", 121)));
            let tol = p.number("tol", Some(1e-9), Check::Positive);
            let mut e = p.finish();
            errors.append(&mut e);
            validate_siv(&siv, &mut errors);
            match (model, errors.is_empty()) {
                (Some(phonon), true) => Ok(ProtocolSpec::SpinT1(SpinT1Config {
                    params: siv,
                    field_tesla,
                    tilt_deg: tilt_rad * 180.0 / std::f64::consts::PI,
                    temperature,
                    phonon,
                    times,
                    tol,
                })),
                _ => Err(errors),
            }
        }
        "cpt_scan" => {
            let rabi = p.angular("rabi", Some((17.0, "MHz")), Check::Positive);
            let gamma_rad = 1.0
                / p.quantity("radiative_lifetime", Dim::Time, Some((1.85, "ns")), Check::Positive);
            let spin_linewidth = p.angular("spin_linewidth", Some((3.5, "MHz")), Check::NonNegative);
            let laser_linewidth = p.angular("laser_linewidth", Some((5.0, "MHz")), Check::NonNegative);
            let optical_linewidth = p.angular("optical_linewidth", Some((300.0, "MHz")), Check::NonNegative);
            let one_photon_detuning = p.angular("one_photon_detuning", Some((0.0, "MHz")), Check::Any);
            let detunings = p.grid(
                "detunings",
                Dim::Frequency,
                true,
                Some((-60.0, "MHz", 60.0, "MHz", 241)),
            );
            let power_target_hz = p
                .optional_angular("power_target", Check::Positive)
                .map(|w| w / TWO_PI);
            let errors = p.finish();
            if errors.is_empty() {
                Ok(ProtocolSpec::Cpt {
                    cfg: CptConfig {
                        rabi,
                        gamma_rad,
                        spin_linewidth,
                        laser_linewidth,
                        optical_linewidth,
                        one_photon_detuning,
                        detunings,
                    },
                    power_target_hz,
                })
            } else {
                Err(errors)
            }
        }
        "odmr_scan" => {
            let siv = siv_params(&mut p, "siv.");
            let field_tesla = p.quantity("field.magnitude", Dim::MagneticField, Some((0.1, "T")), Check::Positive);
            let hyperfine = p.boolean("hyperfine", true);
            let rabi = p.angular("rabi", Some((4.0, "MHz")), Check::Positive);
            let frequencies = p.optional_grid("frequencies", Dim::Frequency, false);
            let tol = p.number("tol", Some(1e-9), Check::Positive);
            let mut errors = p.finish();
            validate_siv(&siv, &mut errors);
            if errors.is_empty() {
                Ok(ProtocolSpec::Odmr(OdmrConfig {
                    params: siv,
                    field_tesla,
                    hyperfine,
                    rabi,
                    frequencies,
                    tol,
                }))
            } else {
                Err(errors)
            }
        }
        "mw_rabi" | "mw_ramsey" => {
            let ramsey = variant == "mw_ramsey";
            let siv = siv_params(&mut p, "siv.");
            let field_tesla = p.quantity("field.magnitude", Dim::MagneticField, Some((0.1, "T")), Check::Positive);
            let field_axis = p.axis3("field.axis", [0.0, 0.0, 1.0]);
            let relax_on = p.boolean("relaxation.enabled", ramsey);
            let relax_temp = p.quantity("relaxation.temperature", Dim::Temperature, Some((2.0, "K")), Check::Positive);
            let relax_t1 = p.quantity("relaxation.t1", Dim::Time, Some((66.5, "ns")), Check::Positive);
            let relax_mode = p.rate_mode("relaxation.mode", RateMode::AsWritten);
            let rabi = p.angular("rabi", Some((if ramsey { 50.0 } else { 15.0 }, "MHz")), Check::Positive);
            let tol = p.number("tol", Some(1e-9), Check::Positive);
            let relaxation = relax_on.then_some(MwRelaxation {
                temperature: relax_temp,
                t1_target: relax_t1,
                rate_mode: relax_mode,
            });
            let cfg = MwConfig {
                params: siv.clone(),
                field_tesla,
                field_axis,
                relaxation,
                rabi,
                tol,
            };
            if ramsey {
                let detuning = p.angular("detuning", Some((25.0, "MHz")), Check::Any);
                let delays = p.grid("delays", Dim::Time, false, Some((2.0, "ns", 402.0, "ns", 161)));
                let mut errors = p.finish();
                validate_siv(&siv, &mut errors);
                if errors.is_empty() {
                    Ok(ProtocolSpec::MwRamsey(MwRamseyConfig {
                        base: cfg,
                        detuning,
                        delays,
                    }))
                } else {
                    Err(errors)
                }
            } else {
                let durations = p.grid("durations", Dim::Time, false, Some((0.0, "ns", 400.0, "ns", 161)));
                let mut errors = p.finish();
                validate_siv(&siv, &mut errors);
                if errors.is_empty() {
                    Ok(ProtocolSpec::MwRabi { cfg, durations })
                } else {
                    Err(errors)
                }
            }
        }
        "optical_rabi" => {
            let gamma_rad = 1.0
                / p.quantity("radiative_lifetime", Dim::Time, Some((1.85, "ns")), Check::Positive);
            let pulse_width = p.quantity("pulse_width", Dim::Time, Some((12.0, "ps")), Check::Positive);
            let areas = p.grid("areas", Dim::Angle, false, Some((0.0, "pi", 10.0, "pi", 121)));
            let tol = p.number("tol", Some(1e-9), Check::Positive);
            let errors = p.finish();
            if errors.is_empty() {
                Ok(ProtocolSpec::OpticalRabi(OpticalRabiConfig {
                    gamma_rad,
                    pulse_width,
                    areas,
                    tol,
                }))
            } else {
                Err(errors)
            }
        }
        "optical_ramsey" => {
            let mut errors = Vec::new();
            let branch_word = p.word("branch", &["lower", "upper"], Some("lower"));
            let branch = match branch_word.as_str() {
                "upper" => ExcitedBranch::Upper,
                _ => ExcitedBranch::Lower,
            };
            let t2_lower = p.quantity("t2_lower", Dim::Time, Some((1044.0, "ps")), Check::Positive);
            let t2_upper = p.quantity("t2_upper", Dim::Time, Some((398.0, "ps")), Check::Positive);
            let gamma_rad = 1.0
                / p.quantity("radiative_lifetime", Dim::Time, Some((1.85, "ns")), Check::Positive);
            let excited_splitting = p.angular("excited_splitting", Some((259.0, "GHz")), Check::Positive);
            let (ddet, ddel) = match branch {
                ExcitedBranch::Lower => ((2.0, "GHz"), (48.0, "ps", 3048.0, "ps", 151)),
                ExcitedBranch::Upper => ((5.0, "GHz"), (24.0, "ps", 1224.0, "ps", 151)),
            };
            let detuning = p.angular("detuning", Some(ddet), Check::Any);
            let delays = p.grid("delays", Dim::Time, false, Some(ddel));
            let pulse_width = p.quantity("pulse_width", Dim::Time, Some((12.0, "ps")), Check::Positive);
            let tol = p.number("tol", Some(1e-9), Check::Positive);
            let mut e = p.finish();
            errors.append(&mut e);
            if !errors.is_empty() {
                return Err(errors);
            }
            match excited_coherence_rates(t2_lower, t2_upper, gamma_rad) {
                Ok((gamma_up, gamma_down)) => Ok(ProtocolSpec::OpticalRamsey(OpticalRamseyConfig {
                    branch,
                    gamma_rad,
                    gamma_up,
                    gamma_down,
                    excited_splitting,
                    detuning,
                    pulse_width,
                    delays,
                    tol,
                })),
                Err(e) => Err(vec![err("params.t2_lower", None, e.to_string())]),
            }
        }
        "raman_rabi" => {
            let omega = p.angular("omega", Some((2.0, "GHz")), Check::Positive);
            let delta = p.angular("delta", Some((100.0, "GHz")), Check::Positive);
            let gamma_rad = 1.0
                / p.quantity("radiative_lifetime", Dim::Time, Some((1.85, "ns")), Check::Positive);
            let times = p.grid("times", Dim::Time, false, Some((0.0, "ns", 125.0, "ns", 251)));
            let tol = p.number("tol", Some(1e-7), Check::Positive);
            let errors = p.finish();
            if errors.is_empty() {
                Ok(ProtocolSpec::RamanRabi(RamanRabiConfig {
                    omega,
                    delta,
                    gamma_rad,
                    times,
                    tol,
                }))
            } else {
                Err(errors)
            }
        }
        "raman_ramsey" => {
            let delta = p.angular("delta", Some((470.0, "GHz")), Check::Positive);
            let delta_g = p.angular("delta_g", Some((48.0, "GHz")), Check::Positive);
            let gamma_rad = 1.0
                / p.quantity("radiative_lifetime", Dim::Time, Some((1.85, "ns")), Check::Positive);
            let pulse_width = p.quantity("pulse_width", Dim::Time, Some((4.0, "ps")), Check::Positive);
            // Absent omega defaults to a two-photon pulse area of pi/2.
            let omega = p
                .optional_angular("omega", Check::Positive)
                .unwrap_or_else(|| (TWO_PI * std::f64::consts::LN_2 * delta / pulse_width).sqrt());
            let delays = p.grid("delays", Dim::Time, false, Some((30.0, "ps", 670.0, "ps", 161)));
            let tol = p.number("tol", Some(1e-9), Check::Positive);
            let errors = p.finish();
            if errors.is_empty() {
                Ok(ProtocolSpec::RamanRamsey(RamanRamseyConfig {
                    omega,
                    delta,
                    delta_g,
                    gamma_rad,
                    pulse_width,
                    delays,
                    tol,
                }))
            } else {
                Err(errors)
            }
        }
        "mollow" => {
            let rabi = p.angular("rabi", Some((1.0, "GHz")), Check::Positive);
            let gamma_rad = 1.0
                / p.quantity("radiative_lifetime", Dim::Time, Some((1.85, "ns")), Check::Positive);
            let detunings = p.grid("detunings", Dim::Frequency, true, Some((0.0, "GHz", 2.0, "GHz", 5)));
            let dt = p.quantity("dt", Dim::Time, Some((50.0, "ps")), Check::Positive);
            let samples = p.integer("samples", 4096, 64);
            let min_frequency = p.quantity("min_frequency", Dim::Frequency, Some((0.4, "GHz")), Check::Positive);
            let tol = p.number("tol", Some(1e-9), Check::Positive);
            let errors = p.finish();
            if errors.is_empty() {
                Ok(ProtocolSpec::Mollow(MollowConfig {
                    rabi,
                    gamma_rad,
                    detunings,
                    dt,
                    samples,
                    min_frequency,
                    tol,
                }))
            } else {
                Err(errors)
            }
        }
        _ => unreachable!("variant membership checked above"),
    }
}
