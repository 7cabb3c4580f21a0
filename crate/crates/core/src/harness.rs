//! Monte Carlo replication studies on synthetic panels.
//!
//! Replication `r` of every config uses seed `seed_base + r`, and all methods
//! see the same panel, so adding, removing or reordering methods never changes
//! another method's numbers. Aggregates are a pure fold over the stored
//! per-replication records.

use crate::baselines::{self, BaselineMethod};
use crate::divergence::js;
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorConfig, SearchGrid};
use crate::io::fmt12;
use crate::spectra::{covariance, empirical_density, symmetric_eigenvalues, BinGrid};
use crate::synth::{generate, generate_meanfield_pair, SyntheticConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SD")]
    Sd,
    #[serde(rename = "BIC3")]
    Bic3,
    #[serde(rename = "ED")]
    Ed,
    #[serde(rename = "ER")]
    Er,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sd, Method::Bic3, Method::Ed, Method::Er];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Sd => "SD",
            Method::Bic3 => "BIC3",
            Method::Ed => "ED",
            Method::Er => "ER",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub configs: Vec<SyntheticConfig>,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub seed_base: u64,
    pub search: SearchGrid,
    pub estimator: EstimatorConfig,
    /// Largest factor count the baselines consider.
    pub k_max: usize,
}

impl ExperimentSpec {
    pub fn new(configs: Vec<SyntheticConfig>, replications: usize, methods: Vec<Method>) -> Self {
        Self {
            configs,
            replications,
            methods,
            seed_base: 0,
            search: SearchGrid::default(),
            estimator: EstimatorConfig::default(),
            k_max: baselines::DEFAULT_K_MAX,
        }
    }

    pub fn with_seed_base(mut self, seed_base: u64) -> Self {
        self.seed_base = seed_base;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::param("replications", 0.0, "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::param("methods", 0.0, "need at least one method"));
        }
        self.configs.iter().try_for_each(SyntheticConfig::validate)
    }
}

/// One method on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub config_index: usize,
    pub replication: usize,
    pub seed: u64,
    pub method: Method,
    pub p_true: usize,
    pub p_hat: Option<usize>,
    pub b_hat: Option<f64>,
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub config_index: usize,
    pub config: SyntheticConfig,
    pub method: Method,
    pub successes: usize,
    pub failures: usize,
    pub mean_p_hat: f64,
    /// Only the spectral-distance method estimates `b`.
    pub mean_b_hat: Option<f64>,
    pub rmse_p: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub records: Vec<ReplicationRecord>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Folds replication records into per-(config, method) rows.
pub fn aggregate(configs: &[SyntheticConfig], methods: &[Method], records: &[ReplicationRecord]) -> Vec<ExperimentRow> {
    let mut rows = Vec::new();
    for (ci, config) in configs.iter().enumerate() {
        for &method in methods {
            let recs: Vec<&ReplicationRecord> = records
                .iter()
                .filter(|r| r.config_index == ci && r.method == method)
                .collect();
            let ok: Vec<(usize, Option<f64>, usize)> = recs
                .iter()
                .filter_map(|r| r.p_hat.map(|p| (p, r.b_hat, r.p_true)))
                .collect();
            let mse = mean(ok.iter().map(|&(p, _, t)| (p as f64 - t as f64).powi(2)));
            rows.push(ExperimentRow {
                config_index: ci,
                config: config.clone(),
                method,
                successes: ok.len(),
                failures: recs.len() - ok.len(),
                mean_p_hat: mean(ok.iter().map(|o| o.0 as f64)),
                mean_b_hat: (method == Method::Sd).then(|| mean(ok.iter().filter_map(|o| o.1))),
                rmse_p: mse.sqrt(),
                seconds: recs.iter().map(|r| r.seconds).sum(),
            });
        }
    }
    rows
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.configs.len())
        .flat_map(|c| (0..spec.replications).map(move |r| (c, r)))
        .collect();
    let records: Vec<ReplicationRecord> = jobs
        .par_iter()
        .flat_map_iter(|&(ci, r)| replicate(spec, ci, r))
        .collect();
    Ok(ExperimentReport {
        rows: aggregate(&spec.configs, &spec.methods, &records),
        records,
    })
}

fn replicate(spec: &ExperimentSpec, ci: usize, r: usize) -> Vec<ReplicationRecord> {
    let seed = spec.seed_base + r as u64;
    let config = spec.configs[ci].clone().with_seed(seed);
    let panel = generate(&config).map(|g| g.panel);
    spec.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let outcome = panel.as_ref().map_err(|e| e.to_string()).and_then(|panel| {
                run_method(method, panel, spec).map_err(|e| e.to_string())
            });
            let (p_hat, b_hat, error) = match outcome {
                Ok((p, b)) => (Some(p), b, None),
                Err(e) => (None, None, Some(e)),
            };
            ReplicationRecord {
                config_index: ci,
                replication: r,
                seed,
                method,
                p_true: config.p_true,
                p_hat,
                b_hat,
                error,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn run_method(
    method: Method,
    panel: &crate::spectra::ReturnPanel,
    spec: &ExperimentSpec,
) -> Result<(usize, Option<f64>)> {
    let baseline = |m| baselines::run(m, panel, spec.k_max).map(|r| (r.p_hat, None));
    match method {
        Method::Sd => estimate(panel, &spec.search, &spec.estimator).map(|r| (r.p_hat, Some(r.b_hat))),
        Method::Bic3 => baseline(BaselineMethod::Bic3),
        Method::Ed => baseline(BaselineMethod::Ed),
        Method::Er => baseline(BaselineMethod::Er),
    }
}

/// Weak-factor grid: one config per `(sigma, weak_count)`, in that nesting order.
pub fn weak_factor_configs(
    base: &SyntheticConfig,
    sigma_values: &[f64],
    weak_counts: &[usize],
) -> Vec<SyntheticConfig> {
    sigma_values
        .iter()
        .flat_map(|&s| weak_counts.iter().map(move |&k| base.clone().with_weak(k, s)))
        .collect()
}

pub fn run_weak_factor_sweep(
    base: &SyntheticConfig,
    sigma_values: &[f64],
    weak_counts: &[usize],
    template: &ExperimentSpec,
) -> Result<ExperimentReport> {
    let spec = ExperimentSpec {
        configs: weak_factor_configs(base, sigma_values, weak_counts),
        ..template.clone()
    };
    run_experiment(&spec)
}

impl ExperimentReport {
    /// Per-row summary; timings are left out so reruns give identical bytes.
    pub fn write_csv(&self, out: impl Write, with_timings: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "config", "method", "n", "t", "p_true", "inv_snr", "rho", "beta", "j", "sigma_weak",
            "weak_count", "successes", "failures", "mean_p_hat", "mean_b_hat", "rmse_p",
        ];
        if with_timings {
            header.push("seconds");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let c = &r.config;
            let mut rec = vec![
                r.config_index.to_string(),
                r.method.name().to_string(),
                c.n.to_string(),
                c.t.to_string(),
                c.p_true.to_string(),
                c.inv_snr.to_string(),
                c.rho.to_string(),
                c.beta.to_string(),
                c.j.to_string(),
                c.sigma_weak.to_string(),
                c.weak_count.to_string(),
                r.successes.to_string(),
                r.failures.to_string(),
                fmt12(r.mean_p_hat),
                r.mean_b_hat.map(fmt12).unwrap_or_default(),
                fmt12(r.rmse_p),
            ];
            if with_timings {
                rec.push(format!("{:.3}", r.seconds));
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// JSON with rows and records; timings zeroed unless requested.
    pub fn to_json(&self, with_timings: bool) -> serde_json::Value {
        let mut copy = self.clone();
        if !with_timings {
            copy.rows.iter_mut().for_each(|r| r.seconds = 0.0);
            copy.records.iter_mut().for_each(|r| r.seconds = 0.0);
        }
        serde_json::to_value(copy).expect("report serializes")
    }

    pub fn row(&self, config_index: usize, method: Method) -> Option<&ExperimentRow> {
        self.rows
            .iter()
            .find(|r| r.config_index == config_index && r.method == method)
    }
}

/// Divergence between the heterogeneous panel (coefficients uniform on
/// `[low, high]`) and a homogeneous panel for every candidate coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldPoint {
    pub b_bar: f64,
    pub js: f64,
}

pub const MEANFIELD_BINS: usize = 50;

pub fn run_meanfield_demo(
    n: usize,
    t: usize,
    candidates: &[f64],
    seed: u64,
) -> Result<Vec<MeanFieldPoint>> {
    run_meanfield_demo_with(n, t, 0.0, 1.0, candidates, seed, MEANFIELD_BINS)
}

pub fn run_meanfield_demo_with(
    n: usize,
    t: usize,
    low: f64,
    high: f64,
    candidates: &[f64],
    seed: u64,
    bins: usize,
) -> Result<Vec<MeanFieldPoint>> {
    if let Some(b) = candidates.iter().find(|b| !(0.0..1.0).contains(*b)) {
        return Err(Error::param("b_bar", *b, "candidates must lie in [0, 1)"));
    }
    candidates
        .par_iter()
        .map(|&b_bar| {
            // same seed: Y is identical across candidates, only Z changes
            let pair = generate_meanfield_pair(n, t, low, high, b_bar, seed)?;
            let ey = symmetric_eigenvalues(&covariance(&pair.y.normalize()?));
            let ez = symmetric_eigenvalues(&covariance(&pair.z.normalize()?));
            let top = ey[0].max(ez[0]);
            let grid = BinGrid::for_eigenvalues(&[top], bins)?;
            let dy = empirical_density(&ey, &grid, 0)?;
            let dz = empirical_density(&ez, &grid, 0)?;
            Ok(MeanFieldPoint {
                b_bar,
                js: js(&dy, &dz, crate::divergence::DEFAULT_EPSILON)?,
            })
        })
        .collect()
}
