use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use log::info;
use mtkrr::experiments::{emit_heatmap, emit_table, run_experiment_with, ExperimentOptions, ExperimentReport, Pi2Scale};
use mtkrr::oracle::compare_oracles;
use mtkrr::risk::{
    alpha_constant, hm_condition, lb_condition, minimize_risk, risk_r_breakdown, s1, s1_integral_bound, s2,
    s2_integral_bound, Regime, RiskParams,
};
use mtkrr::scenarios::{generate, ScenarioSpec};
use serde::Serialize;

use crate::config::{ExperimentConfig, HeatmapConfig, RunSettings, TableConfig};

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub struct CurveArgs<'a> {
    pub params: RiskParams,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    pub out: &'a Path,
}

/// CSV of `(lambda, R, bias, variance)`: a `λ = 0` row, then a log-spaced grid.
pub fn risk_curve(args: &CurveArgs) -> Result<()> {
    args.params.validate()?;
    anyhow::ensure!(
        args.lambda_min > 0.0 && args.lambda_max > args.lambda_min,
        "need 0 < lambda-min < lambda-max, got {} and {}",
        args.lambda_min,
        args.lambda_max
    );
    anyhow::ensure!(args.points >= 2, "points must be >= 2");
    let (lo, hi) = (args.lambda_min.ln(), args.lambda_max.ln());
    let mut csv = String::from("lambda,R,bias,variance\n");
    let grid = (0..args.points).map(|k| (lo + (hi - lo) * k as f64 / (args.points - 1) as f64).exp());
    for lambda in std::iter::once(0.0).chain(grid) {
        let b = risk_r_breakdown(&args.params, lambda);
        csv.push_str(&format!("{lambda},{},{},{}\n", b.total, b.bias, b.variance));
    }
    let best = minimize_risk(&args.params)?;
    info!("R* = {} at lambda = {}", best.r_star, best.lambda_star);
    write(args.out, &csv)
}

pub fn oracle(spec: &ScenarioSpec, sigma2: f64, out: &Path) -> Result<()> {
    anyhow::ensure!(sigma2 > 0.0, "sigma2 must be positive, got {sigma2}");
    let scenario = generate(spec)?;
    let result = compare_oracles(&scenario.spectrum, &scenario.tasks, sigma2)?;
    info!("MT {} / ST {} = rho {}", result.mt_risk, result.st_risk, result.rho);
    write(out, &json(&result)?)
}

// ---------------------------------------------------------------------------
// verify-bounds

pub struct BoundGrid {
    pub n: Vec<usize>,
    pub p: Vec<usize>,
    pub c: Vec<f64>,
    pub beta_delta: Vec<(f64, f64)>,
    pub sigma2: f64,
    pub slack: f64,
    pub lower_min_snr: f64,
}

#[derive(Debug, Serialize)]
struct CellReport {
    n: usize,
    p: usize,
    c: f64,
    beta: f64,
    delta: f64,
    r_star: f64,
    #[serde(with = "mtkrr::oracle::inf_as_null")]
    lambda_star: f64,
    upper: Option<f64>,
    lower: Option<f64>,
    epsilon_cap: Option<f64>,
    regime: Regime,
}

#[derive(Debug, Serialize)]
struct CheckReport {
    name: &'static str,
    checked: usize,
    violations: Vec<String>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct BoundsReport {
    pass: bool,
    checks: Vec<CheckReport>,
    /// Counts of the regime classification; informative only, the thresholds being existential.
    regimes: std::collections::BTreeMap<String, usize>,
    alpha: Vec<(f64, f64, f64)>,
    cells: Vec<CellReport>,
}

struct Check {
    name: &'static str,
    checked: usize,
    violations: Vec<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            violations: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations.push(what());
        }
    }

    fn report(self) -> CheckReport {
        CheckReport {
            name: self.name,
            checked: self.checked,
            pass: self.violations.is_empty(),
            violations: self.violations,
        }
    }
}

/// Returns whether every check passed.
pub fn verify_bounds(grid: &BoundGrid, out: &Path) -> Result<bool> {
    let mut upper = Check::new("property 1: R* <= upper bound");
    let mut cap = Check::new("property 2: lambda* <= epsilon cap");
    let mut lower = Check::new("property 3: R* >= lower bound");
    let mut sums = Check::new("sum-integral bounds on S1 and S2");
    let mut alpha = Check::new("alpha constant in (0, 1)");
    let mut regimes = std::collections::BTreeMap::new();
    let mut cells = Vec::new();
    let mut alphas = Vec::new();

    for &(beta, delta) in &grid.beta_delta {
        if lb_condition(beta, delta) {
            let a = alpha_constant(beta, delta)?;
            alpha.record(a > 0.0 && a < 1.0, || format!("beta={beta} delta={delta}: alpha={a}"));
            alphas.push((beta, delta, a));
        }
        for &n in &grid.n {
            for k in 0..25 {
                let lambda = 10f64.powf(-6.0 + 7.0 * k as f64 / 24.0);
                let (v2, b2) = (s2(n, lambda, beta), s2_integral_bound(lambda, beta)?);
                sums.record(v2 <= b2 * (1.0 + 1e-10), || format!("S2 n={n} lambda={lambda} beta={beta}: {v2} > {b2}"));
                if hm_condition(beta, delta) {
                    let (v1, b1) = (s1(n, lambda, beta, delta), s1_integral_bound(lambda, beta, delta)?);
                    sums.record(v1 <= b1 * (1.0 + 1e-10), || {
                        format!("S1 n={n} lambda={lambda} beta={beta} delta={delta}: {v1} > {b1}")
                    });
                }
            }
        }
        for &n in &grid.n {
            for &p in &grid.p {
                for &c in &grid.c {
                    let params = RiskParams::new(n, p, grid.sigma2, beta, delta, c)?;
                    let rep = minimize_risk(&params)?;
                    let tag = || format!("n={n} p={p} C={c} beta={beta} delta={delta}");
                    if let Some(u) = rep.upper {
                        upper.record(rep.r_star <= u * (1.0 + grid.slack), || format!("{}: R*={} > {u}", tag(), rep.r_star));
                    }
                    if let Some(eps) = rep.epsilon_cap {
                        cap.record(rep.lambda_star <= eps, || format!("{}: lambda*={} > {eps}", tag(), rep.lambda_star));
                    }
                    if let (Some(l), true) = (rep.lower, params.snr() >= grid.lower_min_snr) {
                        lower.record(rep.r_star >= l, || format!("{}: R*={} < {l}", tag(), rep.r_star));
                    }
                    *regimes.entry(format!("{:?}", rep.regime)).or_insert(0) += 1;
                    cells.push(CellReport {
                        n,
                        p,
                        c,
                        beta,
                        delta,
                        r_star: rep.r_star,
                        lambda_star: rep.lambda_star,
                        upper: rep.upper,
                        lower: rep.lower,
                        epsilon_cap: rep.epsilon_cap,
                        regime: rep.regime,
                    });
                }
            }
        }
    }
    let checks: Vec<CheckReport> = [upper, cap, lower, sums, alpha].into_iter().map(Check::report).collect();
    for c in &checks {
        info!(
            "{} {} ({} checked, {} violations)",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.checked,
            c.violations.len()
        );
    }
    let pass = checks.iter().all(|c| c.pass);
    let report = BoundsReport {
        pass,
        checks,
        regimes,
        alpha: alphas,
        cells,
    };
    write(out, &json(&report)?)?;
    Ok(pass)
}

// ---------------------------------------------------------------------------
// Monte Carlo subcommands

fn options(run: &RunSettings, pi2_override: Option<Pi2Scale>) -> ExperimentOptions {
    ExperimentOptions {
        pi2_scale: pi2_override.unwrap_or(run.pi2_scale),
    }
}

fn run_all(specs: &[ScenarioSpec], run: &RunSettings, pi2_override: Option<Pi2Scale>) -> Result<Vec<ExperimentReport>> {
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            info!("scenario {}/{}: {:?} C2={} beta_or_m={} delta2={:?}", i + 1, specs.len(), spec.kind, spec.c2, spec.beta_or_m, spec.delta2);
            run_experiment_with(spec, run.sigma2, run.n_rep, options(run, pi2_override)).map_err(Into::into)
        })
        .collect()
}

pub fn experiment(cfg: &ExperimentConfig, pi2_override: Option<Pi2Scale>) -> Result<()> {
    let reports = run_all(std::slice::from_ref(&cfg.spec), &cfg.run, pi2_override)?;
    let rep = &reports[0];
    info!("mean ratio {} (std {}), B = {}", rep.mean_ratio, rep.std_ratio, rep.b_bar);
    write(&cfg.out_json, &json(rep)?)?;
    if let Some(path) = &cfg.out_csv {
        write(path, &emit_table(&reports)?)?;
    }
    Ok(())
}

pub fn table(cfg: &TableConfig, pi2_override: Option<Pi2Scale>) -> Result<()> {
    let reports = run_all(&cfg.specs, &cfg.run, pi2_override)?;
    write(&cfg.out_csv, &emit_table(&reports)?)?;
    if let Some(path) = &cfg.out_json {
        write(path, &json(&reports)?)?;
    }
    Ok(())
}

pub fn heatmap(cfg: &HeatmapConfig, pi2_override: Option<Pi2Scale>) -> Result<()> {
    let reports = run_all(&cfg.specs, &cfg.run, pi2_override)?;
    let art = emit_heatmap(&reports, cfg.rows, cfg.cols)?;
    write(&cfg.out_csv, &art.csv)?;
    write(&cfg.out_svg, &art.svg)?;
    if let Some(path) = &cfg.out_json {
        write(path, &json(&reports)?)?;
    }
    Ok(())
}
