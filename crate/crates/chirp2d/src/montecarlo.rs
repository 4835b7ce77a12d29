//! Replicated-experiment runner: average estimates, bias, mean squared error
//! and asymptotic-variance comparisons over a ladder of grid sizes and noise
//! levels.
//!
//! Each cell of a plan (one size, one sigma) runs `replications` independent
//! fits. The synthesis seed of replication `r` in cell `(s, g)` is
//! `split_seed(base_seed, &[s, g, r])`, so any single replication can be
//! regenerated without running the rest and the whole report is a pure
//! function of the plan. Replications may execute in parallel; statistics
//! are accumulated in replication order regardless of completion order.

use crate::error::{Error, Result};
use crate::estimator::{
    amplitude_variance, asymptotic_covariance, sequential_estimate, EstimatorConfig, EstimatorKind,
};
use crate::signal::{split_seed, ChirpComponent, ModelSpec, NoiseSpec, SignalGrid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Plan for one replicated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McPlan {
    /// True model; its noise seed is ignored (seeds come from the splitting
    /// rule) and its sigma is replaced cell by cell.
    pub spec: ModelSpec,
    /// Grid sizes `(M, N)` to sweep.
    pub sizes: Vec<(usize, usize)>,
    /// Noise standard deviations to sweep.
    pub sigmas: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub estimator: EstimatorKind,
}

/// Tabulated parameters, in report row order (nonlinear first, as the
/// reference tables print them).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parameter {
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "delta")]
    Delta,
    #[serde(rename = "A")]
    A,
    #[serde(rename = "B")]
    B,
}

pub const PARAMETERS: [Parameter; 6] = [
    Parameter::Alpha,
    Parameter::Beta,
    Parameter::Gamma,
    Parameter::Delta,
    Parameter::A,
    Parameter::B,
];

impl Parameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            Parameter::Alpha => "alpha",
            Parameter::Beta => "beta",
            Parameter::Gamma => "gamma",
            Parameter::Delta => "delta",
            Parameter::A => "A",
            Parameter::B => "B",
        }
    }

    fn from_str(s: &str) -> Option<Self> {
        PARAMETERS.iter().copied().find(|p| p.as_str() == s)
    }

    fn pick(&self, c: &ChirpComponent) -> f64 {
        match self {
            Parameter::Alpha => c.alpha,
            Parameter::Beta => c.beta,
            Parameter::Gamma => c.gamma,
            Parameter::Delta => c.delta,
            Parameter::A => c.a,
            Parameter::B => c.b,
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One report cell: the statistics of one parameter of one component at one
/// (size, sigma).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub size_m: usize,
    pub size_n: usize,
    pub sigma: f64,
    /// 1-based component index, matching extraction (and spec) order.
    pub component: usize,
    pub parameter: Parameter,
    pub average: f64,
    pub bias: f64,
    pub mse: f64,
    /// Closed-form asymptotic variance evaluated at the TRUE parameters.
    pub avar: f64,
    /// Failed replications in this (size, sigma) cell; failures are excluded
    /// from the statistics.
    pub failures: usize,
}

/// Full report: one row per (size, sigma, component, parameter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub rows: Vec<McRow>,
}

/// Output format of [`render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for McFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(McFormat::Csv),
            "json" => Ok(McFormat::Json),
            "markdown" | "md" => Ok(McFormat::Markdown),
            other => Err(Error::BadConfig { what: format!("unknown format '{other}'") }),
        }
    }
}

impl McPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::BadConfig { what: "replications must be >= 1".into() });
        }
        if self.sizes.is_empty() || self.sigmas.is_empty() {
            return Err(Error::BadConfig { what: "sizes and sigmas must be nonempty".into() });
        }
        if self.sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::BadConfig { what: "sigmas must be finite and >= 0".into() });
        }
        self.spec.validate()?;
        Ok(())
    }

    /// Synthesis seed of one replication; the documented splitting rule.
    pub fn seed_for(&self, size_index: usize, sigma_index: usize, replication: usize) -> u64 {
        split_seed(self.base_seed, &[size_index as u64, sigma_index as u64, replication as u64])
    }
}

/// Runs the plan and aggregates statistics.
///
/// A replication that fails to fit (degenerate configuration, grid too
/// small) is counted in the cell's failure tally and excluded from the
/// averages; the run itself keeps going. Identical plans produce identical
/// reports.
pub fn run(plan: &McPlan) -> Result<McReport> {
    plan.validate()?;
    let p = plan.spec.order();
    let truth = &plan.spec.components;
    let mut rows = Vec::new();

    for (si, &(m, n)) in plan.sizes.iter().enumerate() {
        for (gi, &sigma) in plan.sigmas.iter().enumerate() {
            let fits: Vec<Option<Vec<ChirpComponent>>> = (0..plan.replications)
                .into_par_iter()
                .map(|r| {
                    let spec = ModelSpec::new(
                        truth.clone(),
                        NoiseSpec::gaussian(sigma, plan.seed_for(si, gi, r)),
                    );
                    let cfg = EstimatorConfig::new(p).with_method(plan.estimator);
                    crate::signal::synthesize(&spec, m, n)
                        .and_then(|grid| sequential_estimate(&grid, &cfg))
                        .ok()
                        .map(|fit| fit.components.iter().map(|c| c.component).collect())
                })
                .collect();

            let failures = fits.iter().filter(|f| f.is_none()).count();
            let successes: Vec<&Vec<ChirpComponent>> = fits.iter().flatten().collect();
            let count = successes.len() as f64;

            for (k, true_c) in truth.iter().enumerate() {
                let sigma2 = sigma * sigma;
                let cov = asymptotic_covariance(true_c, sigma2, m, n);
                for param in PARAMETERS {
                    let (mut avg, mut mse) = (f64::NAN, f64::NAN);
                    if !successes.is_empty() {
                        let mut sum = 0.0;
                        let mut sq = 0.0;
                        let target = param.pick(true_c);
                        for est in &successes {
                            let v = param.pick(&est[k]);
                            sum += v;
                            sq += (v - target) * (v - target);
                        }
                        avg = sum / count;
                        mse = sq / count;
                    }
                    let avar = match (param, &cov) {
                        (Parameter::Alpha, Ok(c)) => c.var_alpha,
                        (Parameter::Beta, Ok(c)) => c.var_beta,
                        (Parameter::Gamma, Ok(c)) => c.var_gamma,
                        (Parameter::Delta, Ok(c)) => c.var_delta,
                        (Parameter::A | Parameter::B, _) => amplitude_variance(sigma2, m, n),
                        (_, Err(_)) => f64::NAN,
                    };
                    rows.push(McRow {
                        size_m: m,
                        size_n: n,
                        sigma,
                        component: k + 1,
                        parameter: param,
                        average: avg,
                        bias: avg - param.pick(true_c),
                        mse,
                        avar,
                        failures,
                    });
                }
            }
        }
    }
    Ok(McReport { rows })
}

const CSV_HEADER: &str = "size_m,size_n,sigma,component,parameter,average,bias,mse,avar,failures";

/// Renders a report as CSV, JSON or a markdown table.
pub fn render(report: &McReport, format: McFormat) -> String {
    match format {
        McFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in &report.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    r.size_m,
                    r.size_n,
                    r.sigma,
                    r.component,
                    r.parameter,
                    r.average,
                    r.bias,
                    r.mse,
                    r.avar,
                    r.failures
                ));
            }
            out
        }
        McFormat::Json => serde_json::to_string_pretty(report).expect("report serializes"),
        McFormat::Markdown => {
            let mut out = String::from(
                "| M | N | sigma | component | parameter | average | bias | mse | avar | failures |\n\
                 |---|---|-------|-----------|-----------|---------|------|-----|------|----------|\n",
            );
            for r in &report.rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {:.4} | {:.3e} | {:.3e} | {:.3e} | {} |\n",
                    r.size_m,
                    r.size_n,
                    r.sigma,
                    r.component,
                    r.parameter,
                    r.average,
                    r.bias,
                    r.mse,
                    r.avar,
                    r.failures
                ));
            }
            out
        }
    }
}

/// Parses a CSV document produced by [`render`]; the inverse for round
/// trips.
pub fn parse_csv(text: &str) -> Result<McReport> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::BadConfig {
                what: format!("bad CSV header: {:?}", other.unwrap_or("<empty>")),
            })
        }
    }
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::BadConfig {
                what: format!("line {}: expected 10 fields, got {}", ln + 2, fields.len()),
            });
        }
        let bad = |what: &str| Error::BadConfig { what: format!("line {}: bad {what}", ln + 2) };
        rows.push(McRow {
            size_m: fields[0].parse().map_err(|_| bad("size_m"))?,
            size_n: fields[1].parse().map_err(|_| bad("size_n"))?,
            sigma: fields[2].parse().map_err(|_| bad("sigma"))?,
            component: fields[3].parse().map_err(|_| bad("component"))?,
            parameter: Parameter::from_str(fields[4]).ok_or_else(|| bad("parameter"))?,
            average: fields[5].parse().map_err(|_| bad("average"))?,
            bias: fields[6].parse().map_err(|_| bad("bias"))?,
            mse: fields[7].parse().map_err(|_| bad("mse"))?,
            avar: fields[8].parse().map_err(|_| bad("avar"))?,
            failures: fields[9].parse().map_err(|_| bad("failures"))?,
        });
    }
    Ok(McReport { rows })
}

/// Replays one replication of a plan cell, returning the synthesized grid.
/// Exists so tests and downstream tools can audit individual replications.
pub fn replay_grid(plan: &McPlan, size_index: usize, sigma_index: usize, replication: usize) -> Result<SignalGrid> {
    let (m, n) = *plan
        .sizes
        .get(size_index)
        .ok_or_else(|| Error::BadConfig { what: format!("size index {size_index} out of range") })?;
    let sigma = *plan
        .sigmas
        .get(sigma_index)
        .ok_or_else(|| Error::BadConfig { what: format!("sigma index {sigma_index} out of range") })?;
    let spec = ModelSpec::new(
        plan.spec.components.clone(),
        NoiseSpec::gaussian(sigma, plan.seed_for(size_index, sigma_index, replication)),
    );
    crate::signal::synthesize(&spec, m, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_component_plan(reps: usize, sigma: f64, size: usize) -> McPlan {
        McPlan {
            spec: ModelSpec::new(
                vec![ChirpComponent::new(2.0, 3.0, 1.5, 0.5, 2.5, 0.75)],
                NoiseSpec::none(),
            ),
            sizes: vec![(size, size)],
            sigmas: vec![sigma],
            replications: reps,
            base_seed: 42,
            estimator: EstimatorKind::Proposed,
        }
    }

    fn row<'a>(report: &'a McReport, param: Parameter) -> &'a McRow {
        report.rows.iter().find(|r| r.parameter == param).unwrap()
    }

    #[test]
    fn noiseless_single_replication_has_no_bias() {
        let report = run(&one_component_plan(1, 0.0, 25)).unwrap();
        assert_eq!(report.rows.len(), 6);
        for param in [Parameter::Alpha, Parameter::Beta, Parameter::Gamma, Parameter::Delta] {
            let r = row(&report, param);
            assert!(r.bias.abs() < 1e-6, "{param:?} bias {}", r.bias);
            assert!(r.mse < 1e-12, "{param:?} mse {}", r.mse);
            assert_eq!(r.avar, 0.0);
            assert_eq!(r.failures, 0);
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let plan = one_component_plan(3, 0.5, 16);
        let a = run(&plan).unwrap();
        let b = run(&plan).unwrap();
        assert_eq!(a, b);
        assert_eq!(render(&a, McFormat::Csv), render(&b, McFormat::Csv));
    }

    #[test]
    fn mse_decomposes_into_bias_and_variance() {
        // Recompute the cell statistics from replayed fits and check
        // mse = bias^2 + empirical variance exactly.
        let plan = one_component_plan(5, 0.4, 16);
        let report = run(&plan).unwrap();
        let mut alphas = Vec::new();
        for r in 0..plan.replications {
            let grid = replay_grid(&plan, 0, 0, r).unwrap();
            let fit = sequential_estimate(&grid, &EstimatorConfig::new(1)).unwrap();
            alphas.push(fit.components[0].component.alpha);
        }
        let n = alphas.len() as f64;
        let mean = alphas.iter().sum::<f64>() / n;
        let var = alphas.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        let r = row(&report, Parameter::Alpha);
        assert!((r.average - mean).abs() < 1e-14);
        let recomposed = r.bias * r.bias + var;
        assert!(
            (r.mse - recomposed).abs() <= 1e-12 * r.mse.max(1e-30),
            "mse {} vs bias^2+var {}",
            r.mse,
            recomposed
        );
        assert!(r.mse >= r.bias * r.bias);
    }

    #[test]
    fn failed_cells_are_annotated_not_fatal() {
        // 4x4 grids are too small to fit; every replication fails.
        let mut plan = one_component_plan(2, 0.1, 25);
        plan.sizes = vec![(4, 4)];
        let report = run(&plan).unwrap();
        assert!(report.rows.iter().all(|r| r.failures == 2));
        assert!(report.rows[0].average.is_nan());
        let rendered = render(&report, McFormat::Csv);
        assert!(rendered.contains(",2\n"));
    }

    #[test]
    fn csv_round_trip() {
        let report = run(&one_component_plan(2, 0.3, 16)).unwrap();
        let csv = render(&report, McFormat::Csv);
        let parsed = parse_csv(&csv).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(parse_csv("nonsense\n1,2,3").is_err());
        let mut csv = String::from(CSV_HEADER);
        csv.push_str("\n1,2,3\n");
        assert!(parse_csv(&csv).is_err());
    }

    #[test]
    fn markdown_has_one_row_per_cell() {
        let report = run(&one_component_plan(1, 0.0, 16)).unwrap();
        let md = render(&report, McFormat::Markdown);
        assert_eq!(md.lines().count(), 2 + 6);
        assert!(md.contains("| alpha |"));
    }

    #[test]
    fn json_round_trip() {
        let report = run(&one_component_plan(2, 0.2, 16)).unwrap();
        let json = render(&report, McFormat::Json);
        let parsed: McReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn plan_validation() {
        let mut plan = one_component_plan(0, 0.1, 16);
        assert!(run(&plan).is_err());
        plan.replications = 1;
        plan.sigmas.clear();
        assert!(run(&plan).is_err());
    }

    #[test]
    fn plan_json_shape() {
        let plan = one_component_plan(2, 0.5, 25);
        let json = serde_json::to_string(&plan).unwrap();
        for key in ["\"spec\"", "\"sizes\"", "\"sigmas\"", "\"replications\"", "\"base_seed\"", "\"estimator\""] {
            assert!(json.contains(key), "missing {key}");
        }
        assert!(json.contains("\"proposed\""));
        let parsed: McPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, plan);
    }
}
