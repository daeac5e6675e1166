//! Mean squared error of estimators against true tables drawn from a prior.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LdError, Result};
use crate::estimators::{
    bayes_estimates, naive_estimate, semi_naive_estimate, volume_dprime_estimate, EstimatorFamily, VolumeEtaTable,
};
use crate::measures::{Measure, MeasureId, MeasureValue};
use crate::simulation::config::{StudyConfig, MIN_MSE_REPLICATES};
use crate::simulation::rng::{mix, substream, tag};
use crate::simulation::samplers::{sample_multinomial, DirichletSampler};
use crate::tables::{CountTable, DirichletParams};

/// Replicates handed to the thread pool between cancellation checks.
const CHUNK: usize = 256;

/// One (measure, estimator) pair of the study with its resolved prior.
#[derive(Clone, Debug)]
struct Row {
    measure: usize,
    label: String,
    family: EstimatorFamily,
    alpha: Option<DirichletParams>,
    /// For Bayes rows: the shared draw group and the slot within it.
    bayes: Option<(usize, usize)>,
    /// For volume-eta rows: index into the per-N volume tables.
    volume: Option<usize>,
}

struct Plan {
    rows: Vec<Row>,
    /// Per Bayes group: prior and the measures evaluated on each draw.
    bayes_groups: Vec<(DirichletParams, Vec<usize>)>,
    volume_alphas: Vec<DirichletParams>,
}

fn same_alpha(a: &DirichletParams, b: &DirichletParams) -> bool {
    a.values() == b.values()
}

fn plan(cfg: &StudyConfig) -> Result<Plan> {
    let mut rows = Vec::new();
    let mut bayes_groups: Vec<(DirichletParams, Vec<usize>)> = Vec::new();
    let mut volume_alphas: Vec<DirichletParams> = Vec::new();
    for (mi, m) in cfg.measures.iter().enumerate() {
        for spec in &cfg.estimators {
            let mut spec = *spec;
            spec.mc_samples = cfg.mc_samples;
            let Ok(alpha) = spec.resolve(m) else { continue };
            if let (Measure::Eta(cal), Some(a)) = (m, alpha) {
                if cfg.eta_matched_only && a.symmetric_value() != Some(cal.alpha()) {
                    continue;
                }
            }
            let mut row = Row {
                measure: mi,
                label: spec.label(),
                family: spec.family,
                alpha,
                bayes: None,
                volume: None,
            };
            match spec.family {
                EstimatorFamily::Bayes => {
                    let a = alpha.expect("resolved");
                    let g = match bayes_groups.iter().position(|(p, _)| same_alpha(p, &a)) {
                        Some(g) => g,
                        None => {
                            bayes_groups.push((a, Vec::new()));
                            bayes_groups.len() - 1
                        }
                    };
                    bayes_groups[g].1.push(mi);
                    row.bayes = Some((g, bayes_groups[g].1.len() - 1));
                }
                EstimatorFamily::Volume if m.id() == MeasureId::Eta => {
                    let a = alpha.expect("resolved");
                    if let Some(&n) = cfg.sample_sizes.iter().find(|&&n| n > cfg.volume_cap) {
                        return Err(LdError::BudgetExceeded { n, cap: cfg.volume_cap });
                    }
                    let v = match volume_alphas.iter().position(|p| same_alpha(p, &a)) {
                        Some(v) => v,
                        None => {
                            volume_alphas.push(a);
                            volume_alphas.len() - 1
                        }
                    };
                    row.volume = Some(v);
                }
                _ => {}
            }
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(LdError::InvalidConfig("no valid measure/estimator combination".into()));
    }
    Ok(Plan {
        rows,
        bayes_groups,
        volume_alphas,
    })
}

/// Squared error of one estimate, `None` when the estimate was excluded.
#[derive(Clone, Copy, Debug)]
struct Outcome {
    sq_err: Option<f64>,
    inflated: bool,
}

fn outcome(v: Result<MeasureValue>, truth: f64) -> Outcome {
    match v {
        Ok(mv) if mv.defined && mv.value.is_finite() => {
            let e = mv.value - truth;
            Outcome {
                sq_err: Some(e * e),
                inflated: mv.inflated,
            }
        }
        _ => Outcome {
            sq_err: None,
            inflated: false,
        },
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Accumulator {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn std_error(&self) -> f64 {
        let n = self.n as f64;
        let mean = self.mean();
        (((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) / n).sqrt()
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Cell {
    all: Accumulator,
    interior: Accumulator,
    excluded: u64,
    inflated: u64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MseRow {
    pub measure: String,
    pub estimator: String,
    pub prior: String,
    pub n: u64,
    /// Mean squared error with boundary estimates kept as they are.
    pub mse: f64,
    pub std_error: f64,
    pub replicates: u64,
    /// Replicates whose estimate was undefined or failed.
    pub excluded: u64,
    /// Replicates whose estimate sat on the boundary because of zero cells.
    pub inflated: u64,
    /// Mean squared error with boundary estimates also left out.
    pub mse_interior: f64,
    pub std_error_interior: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MseReport {
    pub prior: String,
    pub seed: u64,
    pub replicates_requested: usize,
    pub replicates_completed: usize,
    pub interrupted: bool,
    pub mc_samples: usize,
    pub rows: Vec<MseRow>,
}

impl MseReport {
    pub fn row(&self, measure: &str, estimator: &str, n: u64) -> Option<&MseRow> {
        self.rows
            .iter()
            .find(|r| r.measure == measure && r.estimator == estimator && r.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "measure,estimator,prior,n,mse,std_error,replicates,excluded,inflated,mse_interior,std_error_interior\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{:.16e},{:.16e},{},{},{},{:.16e},{:.16e}\n",
                r.measure,
                r.estimator,
                r.prior,
                r.n,
                r.mse,
                r.std_error,
                r.replicates,
                r.excluded,
                r.inflated,
                r.mse_interior,
                r.std_error_interior
            ));
        }
        s
    }
}

fn replicate(
    cfg: &StudyConfig,
    plan: &Plan,
    prior: &DirichletSampler,
    volume: &[Vec<VolumeEtaTable>],
    i: usize,
) -> Vec<Outcome> {
    let mut rng = substream(cfg.seed, tag::REPLICATE, i as u64);
    let t = prior.sample(&mut rng);
    let truth: Vec<f64> = cfg.measures.iter().map(|m| m.of_table(&t)).collect();
    let mut out = Vec::with_capacity(cfg.sample_sizes.len() * plan.rows.len());
    for (ni, &n) in cfg.sample_sizes.iter().enumerate() {
        let counts: CountTable = sample_multinomial(&t, n, &mut rng);
        let bayes: Vec<Result<Vec<MeasureValue>>> = plan
            .bayes_groups
            .iter()
            .enumerate()
            .map(|(g, (alpha, ms))| {
                let measures: Vec<Measure> = ms.iter().map(|&k| cfg.measures[k].clone()).collect();
                let seed = mix(mix(cfg.seed, i as u64), ((ni as u64) << 16) | g as u64);
                bayes_estimates(&counts, &measures, alpha, cfg.mc_samples, seed)
            })
            .collect();
        for row in &plan.rows {
            let m = &cfg.measures[row.measure];
            let v = match row.family {
                EstimatorFamily::Naive => Ok(naive_estimate(&counts, m)),
                EstimatorFamily::SemiNaive => Ok(semi_naive_estimate(&counts, m, &row.alpha.expect("resolved"))),
                EstimatorFamily::Bayes => {
                    let (g, slot) = row.bayes.expect("planned");
                    match &bayes[g] {
                        Ok(vals) => Ok(vals[slot].clone()),
                        Err(e) => Err(LdError::InvalidEstimator(e.to_string())),
                    }
                }
                EstimatorFamily::Volume => match row.volume {
                    Some(v) => volume[ni][v].estimate(&counts).map(|x| MeasureValue::defined(MeasureId::Eta, x)),
                    None => volume_dprime_estimate(&counts),
                },
            };
            out.push(outcome(v, truth[row.measure]));
        }
    }
    out
}

/// Runs the study. Setting `cancel` stops it at the next chunk boundary and
/// returns the replicates finished so far with `interrupted = true`.
pub fn run_mse_study(cfg: &StudyConfig, cancel: Option<&AtomicBool>) -> Result<MseReport> {
    cfg.validate()?;
    if cfg.replicates < MIN_MSE_REPLICATES {
        return Err(LdError::InvalidConfig(format!(
            "an MSE study needs at least {MIN_MSE_REPLICATES} replicates (got {})",
            cfg.replicates
        )));
    }
    let plan = plan(cfg)?;
    if !plan.bayes_groups.is_empty() && cfg.mc_samples < crate::estimators::MIN_BAYES_SAMPLES {
        return Err(LdError::InvalidConfig(format!(
            "mc_samples must be at least {} for Bayes estimators",
            crate::estimators::MIN_BAYES_SAMPLES
        )));
    }
    let prior = DirichletSampler::new(&cfg.prior);
    let volume: Vec<Vec<VolumeEtaTable>> = cfg
        .sample_sizes
        .iter()
        .map(|&n| plan.volume_alphas.iter().map(|a| VolumeEtaTable::new(n, a)).collect())
        .collect();
    let width = plan.rows.len();
    let mut cells = vec![Cell::default(); cfg.sample_sizes.len() * width];
    let mut completed = 0;
    let mut interrupted = false;
    while completed < cfg.replicates {
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            interrupted = true;
            break;
        }
        let end = (completed + CHUNK).min(cfg.replicates);
        let chunk: Vec<Vec<Outcome>> = (completed..end)
            .into_par_iter()
            .map(|i| replicate(cfg, &plan, &prior, &volume, i))
            .collect();
        // Folding in replicate order keeps the sums independent of scheduling.
        for outcomes in chunk {
            for (cell, o) in cells.iter_mut().zip(outcomes) {
                match o.sq_err {
                    None => cell.excluded += 1,
                    Some(e) => {
                        cell.all.push(e);
                        if o.inflated {
                            cell.inflated += 1;
                        } else {
                            cell.interior.push(e);
                        }
                    }
                }
            }
        }
        completed = end;
    }
    let prior_label = cfg.prior_label();
    let mut rows = Vec::with_capacity(cells.len());
    for (ni, &n) in cfg.sample_sizes.iter().enumerate() {
        for (k, row) in plan.rows.iter().enumerate() {
            let c = &cells[ni * width + k];
            rows.push(MseRow {
                measure: cfg.measures[row.measure].name(),
                estimator: row.label.clone(),
                prior: prior_label.clone(),
                n,
                mse: c.all.mean(),
                std_error: c.all.std_error(),
                replicates: c.all.n,
                excluded: c.excluded,
                inflated: c.inflated,
                mse_interior: c.interior.mean(),
                std_error_interior: c.interior.std_error(),
            });
        }
    }
    Ok(MseReport {
        prior: prior_label,
        seed: cfg.seed,
        replicates_requested: cfg.replicates,
        replicates_completed: completed,
        interrupted,
        mc_samples: cfg.mc_samples,
        rows,
    })
}
