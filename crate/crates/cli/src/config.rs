//! TOML run configuration for the `experiment`, `table` and `heatmap` subcommands.
//!
//! Each subcommand reads its own section (`[experiment]`, `[table]`,
//! `[heatmap]`). Every problem found while reading a section is collected, so
//! one run reports all offending keys at once.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mtkrr::experiments::{Axis, Pi2Scale};
use mtkrr::scenarios::{ScenarioKind, ScenarioSpec};
use toml::{Table, Value};

const SECTIONS: [&str; 3] = ["experiment", "table", "heatmap"];

/// Replication settings shared by every Monte Carlo subcommand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub sigma2: f64,
    pub n_rep: usize,
    pub pi2_scale: Pi2Scale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spec: ScenarioSpec,
    pub run: RunSettings,
    pub out_json: PathBuf,
    pub out_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableConfig {
    /// Rows in output order: `beta_or_m` outer, `c2` inner.
    pub specs: Vec<ScenarioSpec>,
    pub run: RunSettings,
    pub out_csv: PathBuf,
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapConfig {
    pub specs: Vec<ScenarioSpec>,
    pub rows: Axis,
    pub cols: Axis,
    pub run: RunSettings,
    pub out_csv: PathBuf,
    pub out_svg: PathBuf,
    pub out_json: Option<PathBuf>,
}

/// Reads one section and remembers which keys were consumed.
struct Section<'a> {
    name: &'static str,
    table: &'a Table,
    seen: BTreeSet<&'static str>,
    problems: Vec<String>,
}

fn describe(v: &Value) -> String {
    match v {
        Value::String(s) => format!("string {s:?}"),
        Value::Integer(i) => format!("integer {i}"),
        Value::Float(f) => format!("float {f}"),
        Value::Boolean(b) => format!("boolean {b}"),
        Value::Datetime(_) => "a datetime".into(),
        Value::Array(_) => "an array".into(),
        Value::Table(_) => "a table".into(),
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

impl<'a> Section<'a> {
    fn new(name: &'static str, table: &'a Table) -> Self {
        Self {
            name,
            table,
            seen: BTreeSet::new(),
            problems: Vec::new(),
        }
    }

    fn problem(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.problems.push(format!("{}.{key}: {msg}", self.name));
    }

    fn raw(&mut self, key: &'static str, required: bool) -> Option<&'a Value> {
        self.seen.insert(key);
        let v = self.table.get(key);
        if v.is_none() && required {
            self.problem(key, "missing");
        }
        v
    }

    fn float(&mut self, key: &'static str, default: Option<f64>) -> Option<f64> {
        match self.raw(key, default.is_none()) {
            None => default,
            Some(v) => match as_number(v) {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.problem(key, format!("expected a number, got {}", describe(v)));
                    None
                }
            },
        }
    }

    fn optional_float(&mut self, key: &'static str) -> Option<Option<f64>> {
        match self.raw(key, false) {
            None => Some(None),
            Some(_) => self.float(key, None).map(Some),
        }
    }

    fn uint(&mut self, key: &'static str, default: Option<u64>) -> Option<u64> {
        match self.raw(key, default.is_none()) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(v) => {
                self.problem(key, format!("expected a nonnegative integer, got {}", describe(v)));
                None
            }
        }
    }

    fn string(&mut self, key: &'static str, required: bool) -> Option<&'a str> {
        match self.raw(key, required) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(v) => {
                self.problem(key, format!("expected a string, got {}", describe(v)));
                None
            }
        }
    }

    fn path(&mut self, key: &'static str, required: bool) -> Option<PathBuf> {
        self.string(key, required).map(PathBuf::from)
    }

    fn floats(&mut self, key: &'static str) -> Option<Vec<f64>> {
        match self.raw(key, true)? {
            Value::Array(items) if !items.is_empty() => {
                let vals: Vec<Option<f64>> = items.iter().map(|v| as_number(v).filter(|x| x.is_finite())).collect();
                if vals.iter().all(Option::is_some) {
                    Some(vals.into_iter().flatten().collect())
                } else {
                    self.problem(key, "every entry must be a number");
                    None
                }
            }
            v => {
                self.problem(key, format!("expected a nonempty array of numbers, got {}", describe(v)));
                None
            }
        }
    }

    fn parsed<T: serde::de::DeserializeOwned>(&mut self, key: &'static str, default: Option<T>, expected: &str) -> Option<T> {
        match self.raw(key, default.is_none()) {
            None => default,
            Some(v) => match v.clone().try_into::<T>() {
                Ok(t) => Some(t),
                Err(_) => {
                    self.problem(key, format!("expected {expected}, got {}", describe(v)));
                    None
                }
            },
        }
    }

    fn run_settings(&mut self) -> Option<RunSettings> {
        let sigma2 = self.float("sigma2", Some(1.0));
        if matches!(sigma2, Some(s) if s <= 0.0) {
            self.problem("sigma2", "must be positive");
        }
        let n_rep = self.uint("n_rep", Some(100));
        if n_rep == Some(0) {
            self.problem("n_rep", "must be >= 1");
        }
        let pi2_scale = match self.string("pi2_scale", false) {
            None => Some(Pi2Scale::default()),
            Some(s) => match s.parse::<Pi2Scale>() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.problem("pi2_scale", format!("expected \"N\" or \"n\", got {s:?}"));
                    None
                }
            },
        };
        Some(RunSettings {
            sigma2: sigma2.filter(|s| *s > 0.0)?,
            n_rep: n_rep.filter(|n| *n > 0)? as usize,
            pi2_scale: pi2_scale?,
        })
    }

    /// Scenario fields; keys in `swept` are arrays and are returned separately.
    fn scenario(&mut self, swept: &[&'static str]) -> (Option<ScenarioSpec>, Vec<(&'static str, Vec<f64>)>) {
        let mut grids = Vec::new();
        for key in swept {
            if let Some(vals) = self.floats(key) {
                grids.push((*key, vals));
            }
        }
        let scalar = |s: &mut Self, key: &'static str, default: Option<f64>| {
            if swept.contains(&key) {
                Some(f64::NAN)
            } else {
                s.float(key, default)
            }
        };
        let kind = self.parsed::<ScenarioKind>(
            "kind",
            None,
            "one of h2points, h1out, setting_a, setting_b, setting_c, setting_d",
        );
        let n = self.uint("n", None);
        let p = self.uint("p", None);
        let c1 = scalar(self, "c1", Some(1.0));
        let c2 = scalar(self, "c2", None);
        let delta1 = scalar(self, "delta1", None);
        let delta2 = if swept.contains(&"delta2") {
            Some(Some(f64::NAN))
        } else {
            self.optional_float("delta2")
        };
        let beta_or_m = scalar(self, "beta_or_m", None);
        let seed = self.uint("seed", Some(0));
        let cluster_amplitude = self.optional_float("cluster_amplitude");
        let spec = (|| {
            Some(ScenarioSpec {
                kind: kind?,
                n: n? as usize,
                p: p? as usize,
                c1: c1?,
                c2: c2?,
                delta1: delta1?,
                delta2: delta2?,
                beta_or_m: beta_or_m?,
                seed: seed?,
                cluster_amplitude: cluster_amplitude?,
            })
        })();
        (spec, grids)
    }

    fn finish(mut self) -> Vec<String> {
        for key in self.table.keys() {
            if !self.seen.contains(key.as_str()) {
                self.problems.push(format!("{}.{key}: unknown key", self.name));
            }
        }
        self.problems
    }
}

fn set_axis(spec: &mut ScenarioSpec, key: &str, value: f64) {
    match key {
        "c2" => spec.c2 = value,
        "delta2" => spec.delta2 = Some(value),
        "beta_or_m" => spec.beta_or_m = value,
        other => unreachable!("not a sweepable key: {other}"),
    }
}

/// Validates every scenario of a sweep and collects distinct messages.
fn validate_all(section: &str, specs: &[ScenarioSpec], problems: &mut Vec<String>) {
    let mut seen = BTreeSet::new();
    for spec in specs {
        if let Err(e) = spec.validate() {
            let msg = format!("{section}: {e}");
            if seen.insert(msg.clone()) {
                problems.push(msg);
            }
        }
    }
}

fn report(path: &Path, problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = problems.iter().map(|p| format!("  - {p}")).collect();
    bail!("invalid config {}:\n{}", path.display(), list.join("\n"))
}

pub fn load_document(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut problems = Vec::new();
    for (k, v) in &doc {
        if !SECTIONS.contains(&k.as_str()) {
            problems.push(format!("{k}: unknown section (expected one of {})", SECTIONS.join(", ")));
        } else if !v.is_table() {
            problems.push(format!("{k}: expected a table"));
        }
    }
    report(path, problems)?;
    Ok(doc)
}

fn section<'a>(doc: &'a Table, name: &str, path: &Path) -> Result<&'a Table> {
    doc.get(name)
        .and_then(Value::as_table)
        .with_context(|| format!("{} has no [{name}] section", path.display()))
}

pub fn experiment(doc: &Table, path: &Path) -> Result<ExperimentConfig> {
    let mut sec = Section::new("experiment", section(doc, "experiment", path)?);
    let (spec, _) = sec.scenario(&[]);
    let run = sec.run_settings();
    let out_json = sec.path("out_json", true);
    let out_csv = sec.path("out_csv", false);
    let mut problems = sec.finish();
    if let Some(s) = &spec {
        validate_all("experiment", std::slice::from_ref(s), &mut problems);
    }
    report(path, problems)?;
    Ok(ExperimentConfig {
        spec: spec.expect("checked"),
        run: run.expect("checked"),
        out_json: out_json.expect("checked"),
        out_csv,
    })
}

pub fn table(doc: &Table, path: &Path) -> Result<TableConfig> {
    let mut sec = Section::new("table", section(doc, "table", path)?);
    let (base, grids) = sec.scenario(&["c2", "beta_or_m"]);
    let run = sec.run_settings();
    let out_csv = sec.path("out_csv", true);
    let out_json = sec.path("out_json", false);
    let mut problems = sec.finish();
    let mut specs = Vec::new();
    if let (Some(base), [(_, c2s), (_, betas)]) = (&base, grids.as_slice()) {
        for &b in betas {
            for &c2 in c2s {
                let mut s = base.clone();
                set_axis(&mut s, "c2", c2);
                set_axis(&mut s, "beta_or_m", b);
                specs.push(s);
            }
        }
        validate_all("table", &specs, &mut problems);
    }
    report(path, problems)?;
    Ok(TableConfig {
        specs,
        run: run.expect("checked"),
        out_csv: out_csv.expect("checked"),
        out_json,
    })
}

fn axis_key(axis: Axis) -> &'static str {
    match axis {
        Axis::C2 => "c2",
        Axis::Delta2 => "delta2",
        Axis::BetaOrM => "beta_or_m",
    }
}

pub fn heatmap(doc: &Table, path: &Path) -> Result<HeatmapConfig> {
    let mut sec = Section::new("heatmap", section(doc, "heatmap", path)?);
    let expected = "one of c2, delta2, beta_or_m";
    let rows = sec.parsed("rows", Some(Axis::C2), expected);
    let cols = sec.parsed("cols", Some(Axis::Delta2), expected);
    if rows.is_some() && rows == cols {
        sec.problem("cols", "must differ from rows");
    }
    let swept: Vec<&'static str> = [rows, cols].into_iter().flatten().map(axis_key).collect();
    let (base, grids) = sec.scenario(&swept);
    let run = sec.run_settings();
    let out_csv = sec.path("out_csv", true);
    let out_svg = sec.path("out_svg", true);
    let out_json = sec.path("out_json", false);
    let mut problems = sec.finish();
    let mut specs = Vec::new();
    if let (Some(base), [(rk, rvals), (ck, cvals)]) = (&base, grids.as_slice()) {
        for &r in rvals {
            for &c in cvals {
                let mut s = base.clone();
                set_axis(&mut s, rk, r);
                set_axis(&mut s, ck, c);
                specs.push(s);
            }
        }
        validate_all("heatmap", &specs, &mut problems);
    }
    report(path, problems)?;
    Ok(HeatmapConfig {
        specs,
        rows: rows.expect("checked"),
        cols: cols.expect("checked"),
        run: run.expect("checked"),
        out_csv: out_csv.expect("checked"),
        out_svg: out_svg.expect("checked"),
        out_json,
    })
}
