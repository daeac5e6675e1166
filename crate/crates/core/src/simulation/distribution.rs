//! Distributions of LD measures over tables drawn from a Dirichlet prior:
//! histograms on [-1, 1], uniformity statistics, a log-lambda density and
//! paired samples for scatter plots.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LdError, Result};
use crate::measures::{Measure, MeasureId};
use crate::simulation::config::{StudyConfig, MIN_DISTRIBUTION_DRAWS};
use crate::simulation::rng::{substream, tag};
use crate::simulation::samplers::DirichletSampler;

pub const HISTOGRAM_BINS: usize = 64;
pub const LOG_LAMBDA_RANGE: f64 = 12.0;
const CHUNK: usize = 10_000;

#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, values: &[f64]) -> Self {
        let mut counts = vec![0u64; HISTOGRAM_BINS];
        let (mut underflow, mut overflow) = (0, 0);
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        for &v in values {
            if v < lo {
                underflow += 1;
            } else if v > hi {
                overflow += 1;
            } else {
                let k = (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
                counts[k] += 1;
            }
        }
        Self {
            lo,
            hi,
            counts,
            underflow,
            overflow,
        }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// Count divided by total draws and bin width.
    pub fn density(&self, k: usize) -> f64 {
        let total = self.counts.iter().sum::<u64>() + self.underflow + self.overflow;
        self.counts[k] as f64 / (total as f64 * self.bin_width())
    }
}

/// Kolmogorov-Smirnov distance between the sample and the uniform law on [-1, 1].
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x + 1.0) / 2.0).clamp(0.0, 1.0);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let k = pos.floor() as usize;
    let frac = pos - k as f64;
    if k + 1 < sorted.len() {
        sorted[k] + frac * (sorted[k + 1] - sorted[k])
    } else {
        sorted[k]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureDistribution {
    pub measure: String,
    /// Absent for lambda, whose range is unbounded.
    pub histogram: Option<Histogram>,
    pub ks_uniform: Option<f64>,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl MeasureDistribution {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DistributionReport {
    pub prior: String,
    pub draws: usize,
    pub seed: u64,
    pub measures: Vec<MeasureDistribution>,
    pub log_lambda: Histogram,
    pub scatter_columns: Vec<String>,
    pub scatter: Vec<Vec<f64>>,
}

impl DistributionReport {
    pub fn measure(&self, name: &str) -> Option<&MeasureDistribution> {
        self.measures.iter().find(|m| m.measure == name)
    }

    /// Long-format histogram CSV: one row per measure and bin, log lambda included.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("measure,bin_lo,bin_hi,count,density\n");
        let mut emit = |name: &str, h: &Histogram| {
            let w = h.bin_width();
            for k in 0..h.counts.len() {
                let lo = h.lo + k as f64 * w;
                s.push_str(&format!(
                    "{name},{:.16e},{:.16e},{},{:.16e}\n",
                    lo,
                    lo + w,
                    h.counts[k],
                    h.density(k)
                ));
            }
        };
        for m in &self.measures {
            if let Some(h) = &m.histogram {
                emit(&m.measure, h);
            }
        }
        emit("log_lambda", &self.log_lambda);
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("measure,ks_uniform,q25,median,q75\n");
        for m in &self.measures {
            let ks = m.ks_uniform.map(|x| format!("{x:.16e}")).unwrap_or_default();
            s.push_str(&format!("{},{ks},{:.16e},{:.16e},{:.16e}\n", m.measure, m.q25, m.median, m.q75));
        }
        s
    }

    pub fn scatter_csv(&self) -> String {
        let mut s = self.scatter_columns.join(",");
        s.push('\n');
        for row in &self.scatter {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn run_distribution_study(cfg: &StudyConfig) -> Result<DistributionReport> {
    if cfg.draws < MIN_DISTRIBUTION_DRAWS {
        return Err(LdError::InsufficientSamples {
            got: cfg.draws,
            min: MIN_DISTRIBUTION_DRAWS,
        });
    }
    let measures: Vec<&Measure> = cfg.measures.iter().collect();
    let width = measures.len() + 1;
    let sampler = DirichletSampler::new(&cfg.prior);
    let chunks = cfg.draws.div_ceil(CHUNK);
    // Row-major: the measures in order, then log lambda.
    let rows: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(cfg.seed, tag::DISTRIBUTION, c as u64);
            let len = CHUNK.min(cfg.draws - c * CHUNK);
            let mut out = Vec::with_capacity(len * width);
            for _ in 0..len {
                let t = sampler.sample(&mut rng);
                for m in &measures {
                    out.push(m.of_table(&t));
                }
                out.push(t.log_odds_ratio());
            }
            out
        })
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let column = |j: usize| -> Vec<f64> { flat.iter().skip(j).step_by(width).copied().collect() };

    let mut dists = Vec::with_capacity(measures.len());
    for (j, m) in measures.iter().enumerate() {
        let values = column(j);
        let bounded = m.id() != MeasureId::Lambda;
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        dists.push(MeasureDistribution {
            measure: m.name(),
            histogram: bounded.then(|| Histogram::new(-1.0, 1.0, &values)),
            ks_uniform: bounded.then(|| ks_uniform(&values)),
            q25: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
        });
    }
    let log_lambda = Histogram::new(-LOG_LAMBDA_RANGE, LOG_LAMBDA_RANGE, &column(measures.len()));
    let keep = cfg.scatter.min(cfg.draws);
    let scatter = flat.chunks(width).take(keep).map(<[f64]>::to_vec).collect();
    let mut scatter_columns: Vec<String> = measures.iter().map(|m| m.name()).collect();
    scatter_columns.push("log_lambda".into());
    Ok(DistributionReport {
        prior: cfg.prior_label(),
        draws: cfg.draws,
        seed: cfg.seed,
        measures: dists,
        log_lambda,
        scatter_columns,
        scatter,
    })
}
