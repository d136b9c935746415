//! Monte Carlo comparison of the two oracles over seeded replicates.
//!
//! Each replicate draws a fresh ensemble from the scenario with seed
//! `replicate_seed(master, i)`, computes both oracle risks on the exact
//! spectral risk of that realization, and records `𝔯*_MT / 𝔯*_ST`.
//!
//! Two p-values summarize the evidence that multi-task wins:
//!
//! * `π₁ = exp(-2N(B̄ - ½)²)` when `B̄ ≥ ½`, else 0, where `B̄` is the
//!   fraction of replicates with ratio below one (Hoeffding);
//! * `π₂ = Φ(√N (mean - 1) / std)` (normal approximation).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::Statistics;

use crate::error::{Error, Result};
use crate::oracle::compare_oracles;
use crate::scenarios::{generate, replicate_seed, ScenarioSpec};

/// `z_{0.975}`, the two-sided 95% standard normal quantile.
pub const Z_975: f64 = 1.959964;

/// Which count scales the normal statistic in `π₂` and the confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Pi2Scale {
    /// Number of replicates `N`.
    #[default]
    #[serde(rename = "N")]
    Replicates,
    /// Sample size `n` of each replicate.
    #[serde(rename = "n")]
    SampleSize,
}

impl std::str::FromStr for Pi2Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" => Ok(Pi2Scale::Replicates),
            "n" => Ok(Pi2Scale::SampleSize),
            other => Err(Error::Domain(format!("pi2 scale must be \"N\" or \"n\", got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub pi2_scale: Pi2Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ScenarioSpec,
    pub sigma2: f64,
    pub n_rep: usize,
    pub ratios: Vec<f64>,
    pub b_bar: f64,
    pub pi1: f64,
    pub mean_ratio: f64,
    /// Sample standard deviation (denominator `N - 1`); zero when `N = 1`.
    pub std_ratio: f64,
    /// `None` when the ratios have zero spread.
    pub pi2: Option<f64>,
    /// `None` when `N = 1`: the interval width is undefined.
    pub ci95: Option<[f64; 2]>,
    pub pi2_scale: Pi2Scale,
}

impl ExperimentReport {
    /// Aggregates per-replicate ratios.
    pub fn from_ratios(
        spec: ScenarioSpec,
        sigma2: f64,
        ratios: Vec<f64>,
        options: ExperimentOptions,
    ) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::Domain("an experiment needs at least one replicate".into()));
        }
        let n_rep = ratios.len();
        let b_bar = fraction_below_one(&ratios);
        let mean_ratio = ratios.iter().mean();
        let std_ratio = if n_rep > 1 { ratios.iter().std_dev() } else { 0.0 };
        let count = match options.pi2_scale {
            Pi2Scale::Replicates => n_rep,
            Pi2Scale::SampleSize => spec.n,
        };
        let pi2 = match pvalue_pi2_scaled(mean_ratio, std_ratio, count) {
            Ok(v) => Some(v),
            Err(Error::DegenerateDistribution) => None,
            Err(e) => return Err(e),
        };
        let ci95 = (n_rep > 1).then(|| confidence_interval(mean_ratio, std_ratio, count));
        Ok(Self {
            spec,
            sigma2,
            n_rep,
            b_bar,
            pi1: pvalue_pi1(b_bar, n_rep),
            mean_ratio,
            std_ratio,
            pi2,
            ci95,
            pi2_scale: options.pi2_scale,
            ratios,
        })
    }

    pub fn ci95_half_width(&self) -> Option<f64> {
        self.ci95.map(|[lo, hi]| (hi - lo) / 2.0)
    }
}

fn fraction_below_one(ratios: &[f64]) -> f64 {
    ratios.iter().filter(|r| **r < 1.0).count() as f64 / ratios.len() as f64
}

/// Oracle ratio of one replicate.
pub fn replicate_ratio(spec: &ScenarioSpec, sigma2: f64, index: usize) -> Result<f64> {
    let s = spec.with_seed(replicate_seed(spec.seed, index as u64));
    let scenario = generate(&s)?;
    Ok(compare_oracles(&scenario.spectrum, &scenario.tasks, sigma2)?.rho)
}

pub fn run_experiment(spec: &ScenarioSpec, sigma2: f64, n_rep: usize) -> Result<ExperimentReport> {
    run_experiment_with(spec, sigma2, n_rep, ExperimentOptions::default())
}

/// Runs `n_rep` replicates in parallel; results are collected in replicate order,
/// so the report is identical for any thread count.
pub fn run_experiment_with(
    spec: &ScenarioSpec,
    sigma2: f64,
    n_rep: usize,
    options: ExperimentOptions,
) -> Result<ExperimentReport> {
    spec.validate()?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    if n_rep == 0 {
        return Err(Error::Domain("n_rep must be >= 1".into()));
    }
    let ratios = (0..n_rep)
        .into_par_iter()
        .map(|i| {
            replicate_ratio(spec, sigma2, i).map_err(|e| Error::Replicate {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ExperimentReport::from_ratios(spec.clone(), sigma2, ratios, options)
}

/// Hoeffding p-value for "multi-task wins more than half the time".
pub fn pvalue_pi1(b_bar: f64, n_rep: usize) -> f64 {
    if b_bar >= 0.5 {
        (-2.0 * n_rep as f64 * (b_bar - 0.5).powi(2)).exp()
    } else {
        0.0
    }
}

pub fn pvalue_pi2(mean_ratio: f64, std_ratio: f64, n_rep: usize) -> Result<f64> {
    pvalue_pi2_scaled(mean_ratio, std_ratio, n_rep)
}

/// `Φ(√count · (mean - 1) / std)`.
pub fn pvalue_pi2_scaled(mean_ratio: f64, std_ratio: f64, count: usize) -> Result<f64> {
    if std_ratio == 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    if !(std_ratio > 0.0) {
        return Err(Error::Domain(format!("std_ratio must be positive, got {std_ratio}")));
    }
    let z = (count as f64).sqrt() * (mean_ratio - 1.0) / std_ratio;
    Ok(Normal::standard().cdf(z))
}

/// `mean ± z_{0.975} std / √count`.
pub fn confidence_interval(mean: f64, std: f64, count: usize) -> [f64; 2] {
    let half = Z_975 * std / (count as f64).sqrt();
    [mean - half, mean + half]
}

// ---------------------------------------------------------------------------
// Artifacts

#[derive(Serialize)]
struct TableRow {
    #[serde(rename = "C2")]
    c2: f64,
    r: f64,
    beta_or_m: f64,
    b_bar: f64,
    pi1: f64,
    mean_ratio: f64,
    std_ratio: f64,
    pi2: Option<f64>,
}

fn same<T: PartialEq + std::fmt::Debug>(name: &str, values: impl Iterator<Item = T>) -> Result<()> {
    let mut it = values;
    if let Some(first) = it.next() {
        for v in it {
            if v != first {
                return Err(Error::InconsistentReports(format!("{name} differs: {first:?} vs {v:?}")));
            }
        }
    }
    Ok(())
}

fn check_common(reports: &[ExperimentReport]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InconsistentReports("no reports".into()));
    }
    same("kind", reports.iter().map(|r| r.spec.kind))?;
    same("n", reports.iter().map(|r| r.spec.n))?;
    same("p", reports.iter().map(|r| r.spec.p))?;
    same("c1", reports.iter().map(|r| r.spec.c1))?;
    same("delta1", reports.iter().map(|r| r.spec.delta1))?;
    same("sigma2", reports.iter().map(|r| r.sigma2))?;
    same("n_rep", reports.iter().map(|r| r.n_rep))?;
    same("pi2_scale", reports.iter().map(|r| r.pi2_scale))
}

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Output(e.to_string()))
}

/// One CSV row per report, in input order, with the columns
/// `C2, r, beta_or_m, b_bar, pi1, mean_ratio, std_ratio, pi2`.
pub fn emit_table(reports: &[ExperimentReport]) -> Result<String> {
    check_common(reports)?;
    csv_string(reports.iter().map(|rep| TableRow {
        c2: rep.spec.c2,
        r: rep.spec.c2 / rep.spec.c1,
        beta_or_m: rep.spec.beta_or_m,
        b_bar: rep.b_bar,
        pi1: rep.pi1,
        mean_ratio: rep.mean_ratio,
        std_ratio: rep.std_ratio,
        pi2: rep.pi2,
    }))
}

/// Scenario parameter swept along one heatmap axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    C2,
    Delta2,
    BetaOrM,
}

impl Axis {
    fn value(self, spec: &ScenarioSpec) -> Result<f64> {
        match self {
            Axis::C2 => Ok(spec.c2),
            Axis::BetaOrM => Ok(spec.beta_or_m),
            Axis::Delta2 => spec
                .delta2
                .ok_or_else(|| Error::InconsistentReports("delta2 axis on a scenario without delta2".into())),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::C2 => "C2",
            Axis::Delta2 => "delta2",
            Axis::BetaOrM => "beta_or_m",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub rows: Axis,
    pub cols: Axis,
    pub row_values: Vec<f64>,
    pub col_values: Vec<f64>,
    /// `cells[r][c]`: mean ratio and 95% half-width (`None` for single-replicate runs).
    pub cells: Vec<Vec<(f64, Option<f64>)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapArtifacts {
    pub csv: String,
    pub svg: String,
}

fn axis_values(reports: &[ExperimentReport], axis: Axis) -> Result<Vec<f64>> {
    let mut v = reports.iter().map(|r| axis.value(&r.spec)).collect::<Result<Vec<_>>>()?;
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Arranges reports on the `rows × cols` grid; every cell must be covered exactly once.
pub fn build_heatmap(reports: &[ExperimentReport], rows: Axis, cols: Axis) -> Result<Heatmap> {
    check_common(reports)?;
    if rows == cols {
        return Err(Error::InconsistentReports("heatmap axes must differ".into()));
    }
    for fixed in [Axis::C2, Axis::Delta2, Axis::BetaOrM] {
        if fixed != rows && fixed != cols {
            same(fixed.label(), reports.iter().map(|r| fixed.value(&r.spec).ok()))?;
        }
    }
    let row_values = axis_values(reports, rows)?;
    let col_values = axis_values(reports, cols)?;
    let mut by_cell = BTreeMap::new();
    for rep in reports {
        let key = (rows.value(&rep.spec)?.to_bits(), cols.value(&rep.spec)?.to_bits());
        if by_cell.insert(key, (rep.mean_ratio, rep.ci95_half_width())).is_some() {
            return Err(Error::InconsistentReports(format!(
                "duplicate cell {}={}, {}={}",
                rows.label(),
                f64::from_bits(key.0),
                cols.label(),
                f64::from_bits(key.1)
            )));
        }
    }
    let mut cells = Vec::with_capacity(row_values.len());
    for rv in &row_values {
        let mut row = Vec::with_capacity(col_values.len());
        for cv in &col_values {
            let cell = by_cell.get(&(rv.to_bits(), cv.to_bits())).ok_or_else(|| {
                Error::InconsistentReports(format!("missing cell {}={rv}, {}={cv}", rows.label(), cols.label()))
            })?;
            row.push(*cell);
        }
        cells.push(row);
    }
    Ok(Heatmap {
        rows,
        cols,
        row_values,
        col_values,
        cells,
    })
}

/// Long-format CSV (`row, col, mean_ratio, ci95_half_width`) and an SVG rendering.
pub fn emit_heatmap(reports: &[ExperimentReport], rows: Axis, cols: Axis) -> Result<HeatmapArtifacts> {
    let map = build_heatmap(reports, rows, cols)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let out = |e: csv::Error| Error::Output(e.to_string());
    w.write_record([rows.label(), cols.label(), "mean_ratio", "ci95_half_width"]).map_err(out)?;
    for (r, rv) in map.row_values.iter().enumerate() {
        for (c, cv) in map.col_values.iter().enumerate() {
            let (mean, half) = map.cells[r][c];
            w.serialize((rv, cv, mean, half)).map_err(out)?;
        }
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| Error::Output(e.to_string()))?)
        .map_err(|e| Error::Output(e.to_string()))?;
    Ok(HeatmapArtifacts {
        csv,
        svg: render_svg(&map),
    })
}

/// Diverging palette centred on ratio 1: blue where multi-task wins, red where it loses.
/// Saturates at ratios 1/2 and 2.
fn ratio_colour(ratio: f64) -> (u8, u8, u8) {
    let t = ratio.log2().clamp(-1.0, 1.0);
    let fade = |x: f64| (255.0 * (1.0 - x.abs())).round() as u8;
    if t < 0.0 {
        (fade(t), fade(t), 255)
    } else {
        (255, fade(t), fade(t))
    }
}

fn render_svg(map: &Heatmap) -> String {
    const CELL: usize = 64;
    const MARGIN: usize = 80;
    let width = MARGIN + CELL * map.col_values.len() + 20;
    let height = MARGIN + CELL * map.row_values.len() + 40;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">{} (columns) by {} (rows): mean MT/ST oracle ratio</text>"#,
        width / 2,
        map.cols.label(),
        map.rows.label()
    );
    for (c, cv) in map.col_values.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{cv}</text>"#,
            MARGIN + CELL * c + CELL / 2,
            MARGIN - 8
        );
    }
    for (r, rv) in map.row_values.iter().enumerate() {
        let y = MARGIN + CELL * r;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{rv}</text>"#,
            MARGIN - 8,
            y + CELL / 2 + 4
        );
        for (c, (mean, half)) in map.cells[r].iter().enumerate() {
            let x = MARGIN + CELL * c;
            let (red, green, blue) = ratio_colour(*mean);
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#{red:02x}{green:02x}{blue:02x}" stroke="#444"/>"##
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{mean:.3}</text>"#,
                x + CELL / 2,
                y + CELL / 2
            );
            if let Some(h) = half {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle" font-size="9">±{h:.3}</text>"#,
                    x + CELL / 2,
                    y + CELL / 2 + 13
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
