//! Experiment configuration, dispatch and report serialization.
//!
//! Every subcommand declares its parameters once in [`COMMANDS`]. A config is
//! resolved against that schema (defaults filled in, values typed and
//! validated) before any simulation starts, and the resolved config is
//! embedded in the report.
//!
//! Report JSON keys, in order: `subcommand`, `version`, `config`, `table`,
//! `fits`, `flags`, `assertions`, `detail`, `wall_time_s`, then `fit_point`
//! for single-point reports that feed a cross-report fit. The CSV output is
//! `table` alone, so it carries no timing and no worker count and is
//! byte-identical across reruns of the same config.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dynwalk::{
    chung_exponent_fit, chung_sweep, genest_sweep, invariance_experiment, recurrence_experiment,
    tightness_moment_experiment,
};
use crate::envelope::{
    delta_of_h_with, hdim_formula, j_zeta_partial, psi_partial_with, Envelope, Horizon, IntegralDiagnostic,
    IntegralOptions, Threshold, Verdict,
};
use crate::error::{Error, Result};
use crate::latticewalk::{
    green_function, local_time_distribution, pgp_inequality_check, ruin_probability, simple_walk_green,
    survival_probability, theta_of_z, LatticeWalkSpec,
};
use crate::ougauss::{ou_sup_sweep, sheet_covariance_experiment};
use crate::randvar::IncrementDistribution;
use crate::replicate::ReplicationPlan;
use crate::set_geometry::{kolmogorov_entropy, CompactSet1D, SetFamily};
use crate::stablerange::range_entropy_sweep;
use crate::stats::{ls_slope, KsResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Int,
    Real,
    /// Comma-separated integers.
    IntList,
    /// Comma-separated reals.
    RealList,
    Text,
    /// Whitespace-separated grammar strings (set specs contain commas).
    TextList,
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: &'static str,
    pub help: &'static str,
}

#[derive(Debug, Clone, Copy)]
pub struct CommandSpec {
    pub name: &'static str,
    pub about: &'static str,
    pub default_reps: u64,
    pub params: &'static [ParamSpec],
}

const fn p(name: &'static str, kind: ParamKind, default: &'static str, help: &'static str) -> ParamSpec {
    ParamSpec { name, kind, default, help }
}

use ParamKind::*;

const WALK_HELP: &str = "lattice walk: simple | lazy | pmf:v:p;v:p";
const DIST_HELP: &str = "increment law: normal | rademacher | pmf:v:p;v:p";
const SET_HELP: &str = "compact set: interval:a,b | points:p;q | cantor:L | sequence:EPS,KMAX | union:A|B";
const ENVELOPE_HELP: &str = "envelope: hrho:R | loglog:C | table:t=h,...";

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "genest",
        about: "P{sup over E of S_n >= z sqrt(n)} against the entropy bracket",
        default_reps: 10_000,
        params: &[
            p("n", Int, "4096", "walk length"),
            p("z", Real, "2.5", "level, at least 1"),
            p("set", TextList, "interval:0,1", SET_HELP),
            p("dist", Text, "normal", DIST_HELP),
        ],
    },
    CommandSpec {
        name: "invariance",
        about: "covariance and marginals of the rescaled dynamical walk field",
        default_reps: 10_000,
        params: &[
            p("n", Int, "2048", "walk length"),
            p("u", RealList, "0.5,1", "u grid in [0,1]"),
            p("t", RealList, "0,0.5,1", "t grid in [0,1]"),
            p("dist", Text, "rademacher", DIST_HELP),
        ],
    },
    CommandSpec {
        name: "recurrence",
        about: "minimum return counts to 0 over all dynamical times",
        default_reps: 100,
        params: &[p("n-max", Int, "4096", "largest walk length"), p("dist", Text, "rademacher", DIST_HELP)],
    },
    CommandSpec {
        name: "chung",
        about: "P{max_k sup_t |S_k(t)| <= eps sqrt(n)} and its exponent in 1/eps^2",
        default_reps: 2_000,
        params: &[p("n", Int, "1024", "walk length"), p("eps", RealList, "0.45,0.5,0.55,0.6", "eps grid")],
    },
    CommandSpec {
        name: "tightness",
        about: "E[max_k sup_u |S_k(u)|^2] against 64n",
        default_reps: 500,
        params: &[p("n", IntList, "64,256", "walk lengths"), p("dist", Text, "rademacher", DIST_HELP)],
    },
    CommandSpec {
        name: "ruin",
        about: "gambler's ruin P_0{T(z) <= T(0)}",
        default_reps: 100_000,
        params: &[
            p("walk", Text, "simple", WALK_HELP),
            p("z", IntList, "1,2,5,10", "target levels"),
            p("cap", Int, "1000000", "per-episode step cap"),
        ],
    },
    CommandSpec {
        name: "survival",
        about: "P_z{T(0) > n} scaled by sqrt(n)/(1+|z|) and sqrt(n)/|z|",
        default_reps: 20_000,
        params: &[
            p("walk", Text, "lazy", WALK_HELP),
            p("z", IntList, "1,2,5,10,20", "start levels"),
            p("n", IntList, "100,1000,10000", "horizons"),
        ],
    },
    CommandSpec {
        name: "localtime",
        about: "law of the number of visits to 0 before T(z)",
        default_reps: 100_000,
        params: &[
            p("walk", Text, "simple", WALK_HELP),
            p("z", Int, "1", "target level"),
            p("cap", Int, "1000000", "per-episode step cap"),
        ],
    },
    CommandSpec {
        name: "green",
        about: "exact Green function G(n) by dynamic programming",
        default_reps: 1,
        params: &[p("walk", Text, "simple", WALK_HELP), p("n", IntList, "10,100,1000,10000", "horizons")],
    },
    CommandSpec {
        name: "theta",
        about: "first n on a doubling grid with P_0{T(z) > n} <= 1/8",
        default_reps: 7_300,
        params: &[
            p("walk", Text, "simple", WALK_HELP),
            p("z", IntList, "2,4,8,16", "target levels"),
            p("max-n", Int, "16777216", "largest horizon tried"),
        ],
    },
    CommandSpec {
        name: "pgp",
        about: "both sides of P_z{T(0) > n} <= 1/(G(n) P_0{T(z) <= T(0)})",
        default_reps: 20_000,
        params: &[
            p("walk", Text, "lazy", WALK_HELP),
            p("z", IntList, "1,2,4", "levels"),
            p("n", IntList, "100,1000", "horizons"),
        ],
    },
    CommandSpec {
        name: "ou-sup",
        about: "P{max over E of the stationary OU process >= z}",
        default_reps: 100_000,
        params: &[p("set", TextList, "points:0;0.7", SET_HELP), p("z", RealList, "1", "levels, at least 1")],
    },
    CommandSpec {
        name: "sheet-cov",
        about: "covariance of the Brownian-sheet field e^{-t} beta(u, e^{2t})",
        default_reps: 100_000,
        params: &[p("u", RealList, "0.5,1", "u grid in [0,1]"), p("t", RealList, "0,0.5,1", "t grid in [0,1]")],
    },
    CommandSpec {
        name: "stable-range",
        about: "entropy moments of the symmetric stable range and their exponent",
        default_reps: 200,
        params: &[
            p("alpha", Real, "0.5", "stable index in (0,1)"),
            p("eps", RealList, "0.0625,0.03125,0.015625,0.0078125,0.00390625", "eps grid"),
            p("p", IntList, "1", "moment orders"),
            p("steps", Int, "100000", "grid steps on [1,2]"),
        ],
    },
    CommandSpec {
        name: "entropy",
        about: "packing numbers K_E(eps) and their log-log slope",
        default_reps: 1,
        params: &[p("set", Text, "cantor:12", SET_HELP), p("eps", RealList, "0.1,0.01,0.001,0.0001", "eps grid")],
    },
    CommandSpec {
        name: "delta",
        about: "convergence threshold delta(H) of the J_zeta integrals",
        default_reps: 1,
        params: &[
            p("envelope", Text, "hrho:2", ENVELOPE_HELP),
            p("zeta-lo", Real, "0.1", "lower end of the zeta bracket"),
            p("zeta-hi", Real, "10", "upper end of the zeta bracket"),
            p("tol", Real, "0.01", "bisection tolerance"),
            p("loglog-horizon", Real, "1e9", "lnln T of the last partial integral"),
            p("panels", Int, "256", "quadrature panels in the tail"),
        ],
    },
    CommandSpec {
        name: "jzeta",
        about: "partial integrals of H^zeta phi_bar(H) dt/t with a verdict",
        default_reps: 1,
        params: &[
            p("envelope", Text, "hrho:2", ENVELOPE_HELP),
            p("zeta", Real, "2", "power of H"),
            p("loglog-horizon", Real, "1e9", "lnln T of the last partial integral"),
            p("panels", Int, "256", "quadrature panels in the tail"),
        ],
    },
    CommandSpec {
        name: "psi",
        about: "partial integrals of H^2 K_E(1/H^2) phi_bar(H) dt/t with a verdict",
        default_reps: 1,
        params: &[
            p("envelope", Text, "hrho:2", ENVELOPE_HELP),
            p("set", Text, "interval:0,1", SET_HELP),
            p("loglog-horizon", Real, "1e6", "lnln T of the last partial integral"),
            p("panels", Int, "256", "quadrature panels in the tail"),
        ],
    },
];

pub fn command(name: &str) -> Result<&'static CommandSpec> {
    COMMANDS.iter().find(|c| c.name == name).ok_or_else(|| Error::invalid(format!("unknown subcommand `{name}`")))
}

/// A possibly partial config. CLI flags and a JSON file each produce one;
/// [`ExperimentConfig::overridden_by`] layers them.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subcommand: Option<String>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

impl ExperimentConfig {
    pub fn new(subcommand: &str) -> Self {
        Self { subcommand: Some(subcommand.to_string()), ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad config file: {e}")))
    }

    pub fn param(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn reps(mut self, reps: u64) -> Self {
        self.reps = Some(reps);
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    /// Fields set in `other` win.
    pub fn overridden_by(mut self, other: ExperimentConfig) -> Self {
        self.subcommand = other.subcommand.or(self.subcommand);
        self.seed = other.seed.or(self.seed);
        self.reps = other.reps.or(self.reps);
        self.workers = other.workers.or(self.workers);
        self.params.extend(other.params);
        self
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let name = self.subcommand.as_deref().ok_or_else(|| Error::invalid("no subcommand given"))?;
        let spec = command(name)?;
        if let Some(unknown) = self.params.keys().find(|k| !spec.params.iter().any(|p| p.name == k.as_str())) {
            return Err(Error::invalid(format!("`{name}` has no parameter `{unknown}`")));
        }
        let mut params = Map::new();
        for ps in spec.params {
            let raw = match self.params.get(ps.name) {
                Some(v) => v.clone(),
                None => Value::String(ps.default.to_string()),
            };
            let typed = typed_value(ps, &raw)?;
            params.insert(ps.name.to_string(), typed);
        }
        let reps = self.reps.unwrap_or(spec.default_reps);
        let workers =
            self.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        let plan = ReplicationPlan::new(self.seed.unwrap_or(DEFAULT_SEED), reps, workers)?;
        Ok(ResolvedConfig { subcommand: spec.name.to_string(), seed: plan.seed, reps, workers, params })
    }
}

fn typed_value(ps: &ParamSpec, raw: &Value) -> Result<Value> {
    let bad = |what: &str| Error::invalid(format!("parameter `{}`: {what}", ps.name));
    let as_text = |v: &Value| -> Result<String> {
        match v {
            Value::String(s) => Ok(s.trim().to_string()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(bad("expected a scalar")),
        }
    };
    let items = |v: &Value, sep: fn(&str) -> Vec<String>| -> Result<Vec<String>> {
        match v {
            Value::Array(a) => a.iter().map(as_text).collect(),
            other => Ok(sep(&as_text(other)?)),
        }
    };
    let commas = |s: &str| s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect();
    let spaces = |s: &str| s.split_whitespace().map(str::to_string).collect();
    let real = |s: &str| -> Result<f64> {
        let x: f64 = s.parse().map_err(|_| bad(&format!("`{s}` is not a number")))?;
        if x.is_nan() {
            return Err(bad("NaN is not allowed"));
        }
        Ok(x)
    };
    let int = |s: &str| -> Result<i64> {
        if let Ok(i) = s.parse::<i64>() {
            return Ok(i);
        }
        let x = real(s)?;
        if x.fract() != 0.0 || x.abs() > 9.0e15 {
            return Err(bad(&format!("`{s}` is not an integer")));
        }
        Ok(x as i64)
    };
    let nonempty = |v: Vec<String>| if v.is_empty() { Err(bad("empty list")) } else { Ok(v) };
    Ok(match ps.kind {
        Int => Value::from(int(&as_text(raw)?)?),
        Real => Value::from(real(&as_text(raw)?)?),
        IntList => Value::from(nonempty(items(raw, commas)?)?.iter().map(|s| int(s)).collect::<Result<Vec<_>>>()?),
        RealList => Value::from(nonempty(items(raw, commas)?)?.iter().map(|s| real(s)).collect::<Result<Vec<_>>>()?),
        Text => Value::from(as_text(raw)?),
        TextList => Value::from(nonempty(items(raw, spaces)?)?),
    })
}

/// A fully typed config, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub subcommand: String,
    pub seed: u64,
    pub reps: u64,
    pub workers: usize,
    /// In schema order.
    pub params: Map<String, Value>,
}

impl ResolvedConfig {
    pub fn plan(&self) -> Result<ReplicationPlan> {
        ReplicationPlan::new(self.seed, self.reps, self.workers)
    }

    fn get(&self, name: &str) -> &Value {
        self.params.get(name).expect("parameter declared in schema")
    }

    fn int(&self, name: &str) -> i64 {
        self.get(name).as_i64().expect("typed int")
    }

    fn count(&self, name: &str) -> Result<u64> {
        let v = self.int(name);
        u64::try_from(v).map_err(|_| Error::invalid(format!("parameter `{name}` must be non-negative, got {v}")))
    }

    fn real(&self, name: &str) -> f64 {
        self.get(name).as_f64().expect("typed real")
    }

    fn ints(&self, name: &str) -> Vec<i64> {
        self.get(name).as_array().expect("typed list").iter().map(|v| v.as_i64().expect("int")).collect()
    }

    fn counts(&self, name: &str) -> Result<Vec<u64>> {
        self.ints(name)
            .into_iter()
            .map(|v| u64::try_from(v).map_err(|_| Error::invalid(format!("parameter `{name}` must be non-negative"))))
            .collect()
    }

    fn reals(&self, name: &str) -> Vec<f64> {
        self.get(name).as_array().expect("typed list").iter().map(|v| v.as_f64().expect("real")).collect()
    }

    fn text(&self, name: &str) -> &str {
        self.get(name).as_str().expect("typed text")
    }

    fn texts(&self, name: &str) -> Vec<&str> {
        self.get(name).as_array().expect("typed list").iter().map(|v| v.as_str().expect("text")).collect()
    }
}

/// One table cell. Non-finite reals are written as `inf`, `-inf` or `nan`
/// in both CSV and JSON.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_real(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<i64> for Cell {
    fn from(i: i64) -> Self {
        Cell::Int(i)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        i64::try_from(i).map(Cell::Int).unwrap_or(Cell::Num(i as f64))
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::from(i as u64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map(Cell::Num).unwrap_or(Cell::Empty)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Num(x) if x.is_finite() => s.serialize_f64(*x),
            Cell::Num(x) => s.serialize_str(&format_real(*x)),
            Cell::Int(i) => s.serialize_i64(*i),
            Cell::Bool(b) => s.serialize_bool(*b),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Empty => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match Value::deserialize(d)? {
            Value::Null => Cell::Empty,
            Value::Bool(b) => Cell::Bool(b),
            Value::Number(n) => match n.as_i64() {
                Some(i) => Cell::Int(i),
                None => Cell::Num(n.as_f64().unwrap_or(f64::NAN)),
            },
            Value::String(t) => match t.as_str() {
                "inf" => Cell::Num(f64::INFINITY),
                "-inf" => Cell::Num(f64::NEG_INFINITY),
                "nan" => Cell::Num(f64::NAN),
                _ => Cell::Text(t),
            },
            other => Cell::Text(other.to_string()),
        })
    }
}

/// Shortest representation that parses back to the same double.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 || (1e-4..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Resource(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Resource(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// A least-squares slope across table rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub label: String,
    pub x: String,
    pub y: String,
    pub points: usize,
    pub slope: f64,
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub subcommand: String,
    pub version: String,
    pub config: ResolvedConfig,
    pub table: Table,
    pub fits: Vec<Fit>,
    pub flags: Vec<String>,
    pub assertions: Vec<Assertion>,
    /// The owning module's full report(s).
    pub detail: Value,
    pub wall_time_s: f64,
    /// Table columns for `--plotdata`.
    #[serde(skip)]
    pub plot: (usize, usize),
    /// `(x, y)` declared for cross-report log-log fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_point: Option<(f64, f64)>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> Result<String> {
        self.table.to_csv()
    }

    /// Two whitespace-separated columns, one row per table row with numeric
    /// entries in both plot columns.
    pub fn plot_data(&self) -> String {
        let (x, y) = self.plot;
        let mut out = format!("# {} {}\n", self.table.columns[x], self.table.columns[y]);
        for row in &self.table.rows {
            if let (Some(a), Some(b)) = (row[x].as_f64(), row[y].as_f64()) {
                out.push_str(&format!("{} {}\n", format_real(a), format_real(b)));
            }
        }
        out
    }

    /// 5 if a hard assertion failed, 0 otherwise. Flags never count.
    pub fn exit_code(&self) -> i32 {
        if self.assertions.iter().any(|a| !a.passed) {
            5
        } else {
            0
        }
    }
}

struct Outcome {
    table: Table,
    fits: Vec<Fit>,
    flags: Vec<String>,
    assertions: Vec<Assertion>,
    detail: Value,
    plot: (&'static str, &'static str),
    fit_point: Option<(f64, f64)>,
}

impl Outcome {
    fn new(table: Table, detail: impl Serialize, plot: (&'static str, &'static str)) -> Self {
        Self {
            table,
            fits: Vec::new(),
            flags: Vec::new(),
            assertions: Vec::new(),
            detail: serde_json::to_value(detail).expect("module report serializes"),
            plot,
            fit_point: None,
        }
    }

    fn flag(&mut self, cond: bool, text: impl Into<String>) {
        if cond {
            self.flags.push(text.into());
        }
    }

    fn assert(&mut self, passed: bool, name: impl Into<String>) {
        self.assertions.push(Assertion { name: name.into(), passed });
    }
}

/// Validates the config, dispatches to the owning module and assembles the report.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let resolved = config.resolve()?;
    run_resolved(resolved)
}

pub fn run_resolved(config: ResolvedConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let plan = config.plan()?;
    let outcome = match config.subcommand.as_str() {
        "genest" => run_genest(&config, &plan),
        "invariance" => run_invariance(&config, &plan),
        "recurrence" => run_recurrence(&config, &plan),
        "chung" => run_chung(&config, &plan),
        "tightness" => run_tightness(&config, &plan),
        "ruin" => run_ruin(&config, &plan),
        "survival" => run_survival(&config, &plan),
        "localtime" => run_localtime(&config, &plan),
        "green" => run_green(&config),
        "theta" => run_theta(&config, &plan),
        "pgp" => run_pgp(&config, &plan),
        "ou-sup" => run_ou_sup(&config, &plan),
        "sheet-cov" => run_sheet_cov(&config, &plan),
        "stable-range" => run_stable_range(&config, &plan),
        "entropy" => run_entropy(&config),
        "delta" => run_delta(&config),
        "jzeta" => run_jzeta(&config),
        "psi" => run_psi(&config),
        other => Err(Error::invalid(format!("unknown subcommand `{other}`"))),
    }?;
    let col = |name: &str| outcome.table.column(name).expect("plot column exists");
    let plot = (col(outcome.plot.0), col(outcome.plot.1));
    Ok(ExperimentReport {
        subcommand: config.subcommand.clone(),
        version: VERSION.to_string(),
        config,
        table: outcome.table,
        fits: outcome.fits,
        flags: outcome.flags,
        assertions: outcome.assertions,
        detail: outcome.detail,
        wall_time_s: start.elapsed().as_secs_f64(),
        plot,
        fit_point: outcome.fit_point,
    })
}

fn parse_sets(names: &[&str]) -> Result<Vec<CompactSet1D>> {
    names.iter().map(|s| s.parse()).collect()
}

fn usize_of(config: &ResolvedConfig, name: &str) -> Result<usize> {
    Ok(config.count(name)? as usize)
}

fn run_genest(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let names = c.texts("set");
    let sets = parse_sets(&names)?;
    let dist: IncrementDistribution = c.text("dist").parse()?;
    let (n, z) = (usize_of(c, "n")?, c.real("z"));
    let reports = genest_sweep(n, z, &sets, &dist, plan)?;
    let mut t = Table::new(&[
        "set",
        "n",
        "z",
        "estimate",
        "stderr",
        "ci_low",
        "ci_high",
        "theory_value",
        "ratio",
        "hits",
        "outside_regime",
    ]);
    for (name, r) in names.iter().zip(&reports) {
        t.push(vec![
            (*name).into(),
            n.into(),
            z.into(),
            r.estimate.into(),
            r.stderr.into(),
            r.ci_low.into(),
            r.ci_high.into(),
            r.theory_value.into(),
            r.ratio.into(),
            r.hits.into(),
            r.outside_regime.into(),
        ]);
    }
    let outside = reports.iter().any(|r| r.outside_regime);
    let mut o = Outcome::new(t, &reports, ("theory_value", "estimate"));
    o.flag(outside, "outside_regime");
    Ok(o)
}

fn ks_cells(ks: &Option<KsResult>) -> [Cell; 3] {
    match ks {
        Some(k) => [k.statistic.into(), k.critical_value(0.01).into(), k.passes(0.01).into()],
        None => [Cell::Empty, Cell::Empty, Cell::Empty],
    }
}

fn covariance_table(
    points: &[(f64, f64)],
    mean: Option<&[f64]>,
    cov: &[Vec<f64>],
    target: &[Vec<f64>],
    ks: &[Option<KsResult>],
) -> Table {
    let mut t = Table::new(&[
        "u",
        "t",
        "v",
        "s",
        "covariance",
        "target",
        "abs_error",
        "mean",
        "ks_statistic",
        "ks_critical_01",
        "ks_pass",
    ]);
    for a in 0..points.len() {
        for b in a..points.len() {
            let [ks_stat, ks_crit, ks_pass] = if a == b { ks_cells(&ks[a]) } else { ks_cells(&None) };
            t.push(vec![
                points[a].0.into(),
                points[a].1.into(),
                points[b].0.into(),
                points[b].1.into(),
                cov[a][b].into(),
                target[a][b].into(),
                (cov[a][b] - target[a][b]).abs().into(),
                if a == b { mean.map(|m| m[a]).into() } else { Cell::Empty },
                ks_stat,
                ks_crit,
                ks_pass,
            ]);
        }
    }
    t
}

fn run_invariance(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let dist: IncrementDistribution = c.text("dist").parse()?;
    let r = invariance_experiment(usize_of(c, "n")?, &c.reals("u"), &c.reals("t"), &dist, plan)?;
    let t = covariance_table(&r.points, Some(&r.mean), &r.covariance, &r.target_covariance, &r.ks);
    let rejected = r.ks.iter().flatten().any(|k| !k.passes(0.01));
    let mut o = Outcome::new(t, &r, ("target", "covariance"));
    o.flag(rejected, "ks_reject_01");
    Ok(o)
}

fn run_recurrence(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let dist: IncrementDistribution = c.text("dist").parse()?;
    let r = recurrence_experiment(usize_of(c, "n-max")?, &dist, plan)?;
    let mut t = Table::new(&["m", "mean_min_returns", "fraction_returned"]);
    for (ci, &m) in r.checkpoints.iter().enumerate() {
        let vals: Vec<u64> = r.min_returns.iter().map(|row| row[ci]).collect();
        let mean = vals.iter().sum::<u64>() as f64 / vals.len() as f64;
        let returned = vals.iter().filter(|&&v| v >= 1).count() as f64 / vals.len() as f64;
        t.push(vec![m.into(), mean.into(), returned.into()]);
    }
    Ok(Outcome::new(t, &r, ("m", "mean_min_returns")))
}

fn run_chung(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let eps = c.reals("eps");
    let reports = chung_sweep(usize_of(c, "n")?, &eps, plan)?;
    let mut t = Table::new(&[
        "eps",
        "inv_eps2",
        "estimate",
        "stderr",
        "ci_low",
        "ci_high",
        "hits",
        "static_estimate",
        "theory_low",
        "theory_high",
        "outside_regime",
    ]);
    for r in &reports {
        t.push(vec![
            r.eps.into(),
            (1.0 / (r.eps * r.eps)).into(),
            r.estimate.into(),
            r.stderr.into(),
            r.ci_low.into(),
            r.ci_high.into(),
            r.hits.into(),
            r.static_estimate.into(),
            r.theory_low.into(),
            r.theory_high.into(),
            r.outside_regime.into(),
        ]);
    }
    let outside = reports.iter().any(|r| r.outside_regime);
    let fit_point = match reports.as_slice() {
        [r] if r.estimate > 0.0 => Some((1.0 / (r.eps * r.eps), r.estimate.ln())),
        _ => None,
    };
    let mut o = Outcome::new(t, &reports, ("inv_eps2", "estimate"));
    if reports.len() >= 2 {
        match chung_exponent_fit(&reports) {
            Ok(slope) => o.fits.push(Fit {
                label: "chung_exponent".into(),
                x: "inv_eps2".into(),
                y: "ln_estimate".into(),
                points: reports.len(),
                slope,
                target: Some(-PI * PI / 8.0),
            }),
            Err(_) => o.flags.push("fit_failed".into()),
        }
    }
    o.flag(outside, "outside_regime");
    o.fit_point = fit_point;
    Ok(o)
}

fn run_tightness(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let dist: IncrementDistribution = c.text("dist").parse()?;
    let mut t = Table::new(&["n", "estimate", "stderr", "bound", "ratio_to_n", "endpoint_second_moment"]);
    let mut reports = Vec::new();
    for n in c.counts("n")? {
        reports.push(tightness_moment_experiment(n as usize, &dist, plan)?);
    }
    for r in &reports {
        t.push(vec![
            r.n.into(),
            r.estimate.into(),
            r.stderr.into(),
            r.bound.into(),
            r.ratio_to_n.into(),
            r.endpoint_second_moment.into(),
        ]);
    }
    let mut o = Outcome::new(t, &reports, ("n", "estimate"));
    for r in &reports {
        o.assert(r.estimate + 3.0 * r.stderr <= r.bound, format!("moment bound at n = {}", r.n));
    }
    Ok(o)
}

fn run_ruin(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let spec: LatticeWalkSpec = c.text("walk").parse()?;
    let cap = c.count("cap")?;
    let reports = c.ints("z").into_iter().map(|z| ruin_probability(&spec, z, cap, plan)).collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&[
        "z",
        "estimate",
        "stderr",
        "ci_low",
        "ci_high",
        "hits",
        "censored",
        "censored_fraction",
        "theory_value",
        "ratio",
        "flagged",
    ]);
    for r in &reports {
        t.push(vec![
            r.z.into(),
            r.estimate.into(),
            r.stderr.into(),
            r.ci_low.into(),
            r.ci_high.into(),
            r.hits.into(),
            r.censored.into(),
            r.censored_fraction.into(),
            r.theory_value.into(),
            r.ratio.into(),
            r.flagged.into(),
        ]);
    }
    let flagged = reports.iter().any(|r| r.flagged);
    let mut o = Outcome::new(t, &reports, ("z", "estimate"));
    o.flag(flagged, "censoring");
    Ok(o)
}

fn run_survival(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let spec: LatticeWalkSpec = c.text("walk").parse()?;
    let mut reports = Vec::new();
    for z in c.ints("z") {
        for n in c.counts("n")? {
            reports.push(survival_probability(&spec, z, n, plan)?);
        }
    }
    let mut t = Table::new(&["z", "n", "estimate", "stderr", "scaled_upper", "scaled_lower"]);
    for r in &reports {
        t.push(vec![
            r.z.into(),
            r.n.into(),
            r.estimate.into(),
            r.stderr.into(),
            r.scaled_upper.into(),
            r.scaled_lower.into(),
        ]);
    }
    Ok(Outcome::new(t, &reports, ("n", "estimate")))
}

fn run_localtime(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let spec: LatticeWalkSpec = c.text("walk").parse()?;
    let r = local_time_distribution(&spec, c.int("z"), c.count("cap")?, plan)?;
    let total: u64 = r.counts.iter().sum();
    let mut t = Table::new(&["visits", "count", "frequency"]);
    for (k, &n) in r.counts.iter().enumerate() {
        t.push(vec![(k as u64 + 1).into(), n.into(), (n as f64 / total.max(1) as f64).into()]);
    }
    let mut o = Outcome::new(t, &r, ("visits", "frequency"));
    o.flag(r.flagged, "censoring");
    o.flag(r.geometric_fit.as_ref().is_none_or(|g| g.p_value < 0.01), "geometric_fit_reject_01");
    Ok(o)
}

fn run_green(c: &ResolvedConfig) -> Result<Outcome> {
    let spec: LatticeWalkSpec = c.text("walk").parse()?;
    let simple = spec.is_simple();
    let mut t = Table::new(&["n", "green", "closed_form", "abs_error", "green_over_sqrt_n"]);
    let mut checks = Vec::new();
    for n in c.counts("n")? {
        let g = green_function(&spec, n)?;
        let closed = simple.then(|| simple_walk_green(n));
        let err = closed.map(|v| (g - v).abs());
        if let (Some(v), Some(e)) = (closed, err) {
            checks.push((n, e <= 1e-12 * v.max(1.0)));
        }
        t.push(vec![n.into(), g.into(), closed.into(), err.into(), (g / (n as f64).sqrt()).into()]);
    }
    let fit_point = match t.rows.as_slice() {
        [row] => match (row[0].as_f64(), row[1].as_f64()) {
            (Some(n), Some(g)) if n > 0.0 && g > 0.0 => Some((n.ln(), g.ln())),
            _ => None,
        },
        _ => None,
    };
    let mut o = Outcome::new(t, Value::Null, ("n", "green"));
    for (n, ok) in checks {
        o.assert(ok, format!("closed form at n = {n}"));
    }
    o.fit_point = fit_point;
    Ok(o)
}

fn run_theta(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let spec: LatticeWalkSpec = c.text("walk").parse()?;
    let max_n = c.count("max-n")?;
    let reports = c.ints("z").into_iter().map(|z| theta_of_z(&spec, z, max_n, plan)).collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["z", "theta", "theta_over_z2"]);
    for r in &reports {
        t.push(vec![r.z.into(), r.theta.into(), (r.theta as f64 / (r.z * r.z) as f64).into()]);
    }
    Ok(Outcome::new(t, &reports, ("z", "theta")))
}

fn run_pgp(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let spec: LatticeWalkSpec = c.text("walk").parse()?;
    let mut reports = Vec::new();
    for z in c.ints("z") {
        for n in c.counts("n")? {
            reports.push(pgp_inequality_check(&spec, z, n, plan)?);
        }
    }
    let mut t =
        Table::new(&["z", "n", "lhs", "lhs_stderr", "green", "ruin", "ruin_stderr", "rhs", "relative_ci", "holds"]);
    for r in &reports {
        t.push(vec![
            r.z.into(),
            r.n.into(),
            r.lhs.into(),
            r.lhs_stderr.into(),
            r.green.into(),
            r.ruin.into(),
            r.ruin_stderr.into(),
            r.rhs.into(),
            r.relative_ci.into(),
            r.holds.into(),
        ]);
    }
    let mut o = Outcome::new(t, &reports, ("rhs", "lhs"));
    for r in &reports {
        o.assert(r.holds, format!("lhs <= rhs (1 + 6 relative CI) at z = {}, n = {}", r.z, r.n));
    }
    Ok(o)
}

fn run_ou_sup(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let names = c.texts("set");
    let levels = c.reals("z");
    let mut t = Table::new(&[
        "set",
        "z",
        "estimate",
        "stderr",
        "ci_low",
        "ci_high",
        "theory_value",
        "ratio",
        "exact",
        "points_used",
        "mesh",
    ]);
    let mut all = Vec::new();
    for name in &names {
        let set: CompactSet1D = name.parse()?;
        // every set replays the same streams, so adding a set leaves the others unchanged
        let reports = ou_sup_sweep(&set, &levels, plan)?;
        for r in &reports {
            t.push(vec![
                (*name).into(),
                r.z.into(),
                r.estimate.into(),
                r.stderr.into(),
                r.ci_low.into(),
                r.ci_high.into(),
                r.theory_value.into(),
                r.ratio.into(),
                r.exact.into(),
                r.points_used.into(),
                r.mesh.into(),
            ]);
        }
        all.push(reports);
    }
    Ok(Outcome::new(t, &all, ("z", "estimate")))
}

fn run_sheet_cov(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let r = sheet_covariance_experiment(&c.reals("u"), &c.reals("t"), plan)?;
    let t = covariance_table(&r.points, None, &r.covariance, &r.target_covariance, &r.ks);
    let rejected = r.ks.iter().flatten().any(|k| !k.passes(0.01));
    let mut o = Outcome::new(t, &r, ("target", "covariance"));
    o.flag(rejected, "ks_reject_01");
    Ok(o)
}

fn run_stable_range(c: &ResolvedConfig, plan: &ReplicationPlan) -> Result<Outcome> {
    let powers = c
        .counts("p")?
        .into_iter()
        .map(|p| u32::try_from(p).map_err(|_| Error::invalid("moment order too large")))
        .collect::<Result<Vec<_>>>()?;
    let eps = c.reals("eps");
    let reports = range_entropy_sweep(c.real("alpha"), &eps, &powers, usize_of(c, "steps")?, plan)?;
    let mut t = Table::new(&["p", "eps", "ln_inv_eps", "moment", "stderr"]);
    for r in &reports {
        for i in 0..r.eps.len() {
            t.push(vec![
                (r.p as u64).into(),
                r.eps[i].into(),
                (-r.eps[i].ln()).into(),
                r.moment[i].into(),
                r.stderr[i].into(),
            ]);
        }
    }
    let mut o = Outcome::new(t, &reports, ("ln_inv_eps", "moment"));
    for r in &reports {
        o.fits.push(Fit {
            label: format!("moment_exponent_p{}", r.p),
            x: "ln_inv_eps".into(),
            y: "ln_moment".into(),
            points: r.eps.len(),
            slope: r.slope,
            target: Some(r.target),
        });
    }
    Ok(o)
}

fn run_entropy(c: &ResolvedConfig) -> Result<Outcome> {
    let set: CompactSet1D = c.text("set").parse()?;
    let eps = c.reals("eps");
    let min_eps = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    set.resolve(min_eps / 10.0)?;
    let mut t = Table::new(&["eps", "ln_inv_eps", "packing", "ln_packing"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &e in &eps {
        let k = kolmogorov_entropy(&set, e)?.value();
        let (x, y) = (-e.ln(), (k as f64).ln());
        xs.push(x);
        ys.push(y);
        t.push(vec![e.into(), x.into(), k.into(), y.into()]);
    }
    let mut o = Outcome::new(t, Value::Null, ("ln_inv_eps", "ln_packing"));
    if eps.len() >= 2 {
        o.fits.push(Fit {
            label: "entropy_exponent".into(),
            x: "ln_inv_eps".into(),
            y: "ln_packing".into(),
            points: eps.len(),
            slope: ls_slope(&xs, &ys)?,
            target: None,
        });
    } else {
        o.fit_point = Some((xs[0], ys[0]));
    }
    Ok(o)
}

fn integral_options(c: &ResolvedConfig) -> Result<IntegralOptions> {
    Ok(IntegralOptions { horizon: Horizon::from_loglog(c.real("loglog-horizon"))?, panels: usize_of(c, "panels")? })
}

fn run_delta(c: &ResolvedConfig) -> Result<Outcome> {
    let h: Envelope = c.text("envelope").parse()?;
    let delta = delta_of_h_with(&h, c.real("zeta-lo"), c.real("zeta-hi"), c.real("tol"), integral_options(c)?)?;
    let value = match delta {
        Threshold::Finite(d) => d,
        Threshold::Infinite => f64::INFINITY,
    };
    let mut t = Table::new(&["delta", "hdim"]);
    t.push(vec![value.into(), hdim_formula(delta).into()]);
    Ok(Outcome::new(t, delta.to_string(), ("delta", "hdim")))
}

fn diagnostic_outcome(d: IntegralDiagnostic) -> Outcome {
    let mut t = Table::new(&["loglog_T", "partial", "log_partial"]);
    for i in 0..d.horizon.len() {
        t.push(vec![d.horizon[i].into(), d.partial[i].into(), d.log_partial[i].into()]);
    }
    let inconclusive = d.verdict == Verdict::Inconclusive;
    let mut o = Outcome::new(t, &d, ("loglog_T", "log_partial"));
    o.flag(inconclusive, "inconclusive_verdict");
    o
}

fn run_jzeta(c: &ResolvedConfig) -> Result<Outcome> {
    let h: Envelope = c.text("envelope").parse()?;
    let opts = integral_options(c)?;
    Ok(diagnostic_outcome(j_zeta_partial(&h, c.real("zeta"), opts.horizon, opts.panels)?))
}

fn run_psi(c: &ResolvedConfig) -> Result<Outcome> {
    let h: Envelope = c.text("envelope").parse()?;
    let set: CompactSet1D = c.text("set").parse()?;
    let opts = integral_options(c)?;
    Ok(diagnostic_outcome(psi_partial_with(&h, &set, opts.horizon, opts.panels)?))
}

/// One row per report plus, when every report declares a log-log point, the
/// fitted slope across them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub subcommand: String,
    pub table: Table,
    pub slope: Option<f64>,
    pub flags: Vec<String>,
}

impl SummaryTable {
    pub fn to_csv(&self) -> Result<String> {
        self.table.to_csv()
    }
}

pub fn summarize(reports: &[ExperimentReport]) -> Result<SummaryTable> {
    let first = reports.first().ok_or_else(|| Error::invalid("nothing to summarize"))?;
    if reports.iter().any(|r| r.subcommand != first.subcommand) {
        return Err(Error::invalid("reports mix subcommands"));
    }
    if reports.iter().any(|r| r.table.columns != first.table.columns) {
        return Err(Error::invalid("reports have different table layouts"));
    }
    let points: Option<Vec<(f64, f64)>> = reports.iter().map(|r| r.fit_point).collect();
    let mut flags = Vec::new();
    let slope = match &points {
        Some(pts) if pts.len() >= 2 && pts.iter().any(|p| p.0 != pts[0].0) => {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().cloned().unzip();
            Some(ls_slope(&x, &y)?)
        }
        Some(_) => {
            flags.push("insufficient points".to_string());
            None
        }
        None => None,
    };
    let mut columns = vec!["report".to_string()];
    columns.extend(first.table.columns.iter().cloned());
    if slope.is_some() {
        columns.push("slope".into());
    }
    let mut table = Table { columns, rows: Vec::new() };
    for (i, r) in reports.iter().enumerate() {
        let mut row = vec![Cell::from(i)];
        match r.table.rows.first() {
            Some(first_row) => row.extend(first_row.iter().cloned()),
            None => row.extend(std::iter::repeat_n(Cell::Empty, r.table.columns.len())),
        }
        if let Some(s) = slope {
            row.push(s.into());
        }
        table.rows.push(row);
    }
    Ok(SummaryTable { subcommand: first.subcommand.clone(), table, slope, flags })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entropy_at(eps: f64) -> ExperimentReport {
        run(&ExperimentConfig::new("entropy").param("set", "cantor:14").param("eps", eps)).unwrap()
    }

    #[test]
    fn every_command_resolves_with_defaults() {
        for c in COMMANDS {
            let r = ExperimentConfig::new(c.name).workers(1).resolve().unwrap();
            assert_eq!(r.params.len(), c.params.len());
            assert_eq!(r.reps, c.default_reps);
        }
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(ExperimentConfig::new("nope").resolve(), Err(Error::InvalidArgument(_))));
        assert!(ExperimentConfig::new("genest").reps(0).resolve().is_err());
        assert!(ExperimentConfig::new("genest").param("bogus", 1).resolve().is_err());
        assert!(ExperimentConfig::new("genest").param("n", "1.5").resolve().is_err());
        assert!(ExperimentConfig::new("genest").param("z", "x").resolve().is_err());
        let e = run(&ExperimentConfig::new("genest").param("set", "interval:0").reps(1)).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn json_config_and_overrides() {
        let file =
            ExperimentConfig::from_json(r#"{"subcommand":"ruin","seed":7,"reps":10,"params":{"z":[1,2],"cap":1e4}}"#)
                .unwrap();
        let cli = ExperimentConfig::default().reps(20).param("z", "3");
        let r = file.overridden_by(cli).resolve().unwrap();
        assert_eq!((r.seed, r.reps), (7, 20));
        assert_eq!(r.params["z"], serde_json::json!([3]));
        assert_eq!(r.params["cap"], serde_json::json!(10000));
        assert!(ExperimentConfig::from_json(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn csv_and_json_carry_the_same_numbers() {
        let r = run(&ExperimentConfig::new("genest")
            .param("n", 64)
            .param("z", 1.5)
            .param("set", "interval:0,1 points:0.5")
            .reps(500)
            .seed(3))
        .unwrap();
        let csv = r.to_csv().unwrap();
        let json: Value = serde_json::from_str(&r.to_json()).unwrap();
        let mut rd = csv::Reader::from_reader(csv.as_bytes());
        let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
        assert_eq!(header, r.table.columns);
        let rows: Vec<csv::StringRecord> = rd.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows[0].get(0), Some("interval:0,1"));
        let est = r.table.column("estimate").unwrap();
        for (i, rec) in rows.iter().enumerate() {
            let from_csv: f64 = rec[est].parse().unwrap();
            let from_json = json["table"]["rows"][i][est].as_f64().unwrap();
            assert_eq!(from_csv.to_bits(), from_json.to_bits());
        }
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(
            keys,
            ["subcommand", "version", "config", "table", "fits", "flags", "assertions", "detail", "wall_time_s"]
        );
    }

    #[test]
    fn format_real_round_trips() {
        for &x in &[0.0, 1.0, -2.5, 0.0062096653257761, 1e-300, 3.3e20, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(format_real(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_real(f64::INFINITY), "inf");
    }

    #[test]
    fn worker_count_does_not_change_csv() {
        let base = ExperimentConfig::new("chung").param("n", 64).param("eps", "0.5,0.7").reps(300).seed(9);
        let one = run(&base.clone().workers(1)).unwrap().to_csv().unwrap();
        let many = run(&base.workers(8)).unwrap().to_csv().unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn summarize_cantor_sweep() {
        let reports: Vec<_> = [1e-2, 1e-3, 1e-4, 1e-5].iter().map(|&e| entropy_at(e)).collect();
        let s = summarize(&reports).unwrap();
        let target = 2f64.ln() / 3f64.ln();
        assert!((s.slope.unwrap() - target).abs() < 0.05, "{:?}", s.slope);
        assert_eq!(s.table.rows.len(), 4);
        assert_eq!(s.table.columns.last().unwrap(), "slope");

        let single = summarize(&reports[..1]).unwrap();
        assert_eq!(single.slope, None);
        assert_eq!(single.flags, ["insufficient points"]);
        assert!(summarize(&[]).is_err());
        let other = run(&ExperimentConfig::new("green").param("n", "10")).unwrap();
        assert!(summarize(&[reports[0].clone(), other]).is_err());
    }

    #[test]
    fn summarize_from_parsed_json() {
        let reports: Vec<_> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| serde_json::from_str::<ExperimentReport>(&entropy_at(e).to_json()).unwrap())
            .collect();
        assert_eq!(reports[0].table, entropy_at(1e-2).table);
        assert!(summarize(&reports).unwrap().slope.is_some());
    }

    #[test]
    fn failed_assertion_sets_exit_code() {
        let r = run(&ExperimentConfig::new("green").param("n", "10,100")).unwrap();
        assert_eq!(r.exit_code(), 0);
        let mut bad = r.clone();
        bad.assertions[0].passed = false;
        assert_eq!(bad.exit_code(), 5);
    }

    #[test]
    fn plot_data_has_two_columns() {
        let r = run(&ExperimentConfig::new("green").param("n", "10,100")).unwrap();
        let data = r.plot_data();
        let lines: Vec<&str> = data.lines().skip(1).collect();
        assert_eq!(lines.len(), 2);
        assert!(lines.iter().all(|l| l.split_whitespace().count() == 2));
    }
}
