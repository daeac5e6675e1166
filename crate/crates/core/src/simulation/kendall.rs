//! Kendall's tau-b in O(n log n) and the binned D' versus lambda study.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LdError, Result};
use crate::measures::d_prime;
use crate::simulation::config::{BinRule, StudyConfig};
use crate::simulation::rng::{substream, tag};
use crate::simulation::samplers::DirichletSampler;

pub const MIN_BIN_COUNT: usize = 100;
const CHUNK: usize = 10_000;

fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for k in 1..=sorted.len() {
        if k < sorted.len() && sorted[k] == sorted[k - 1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total
}

/// Sorts `v` ascending and returns the number of inversions it removed.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b (Knight's algorithm). NaN if either variable is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "paired samples must have equal length");
    let n = x.len() as u64;
    if n < 2 {
        return f64::NAN;
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = n * (n - 1) / 2;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let n1 = tied_pairs(&xs);
    let n3 = tied_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);
    let s = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    s / ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct KendallBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub tau: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KendallReport {
    pub prior: String,
    pub draws: usize,
    pub seed: u64,
    pub bin_rule: BinRule,
    pub bins: Vec<KendallBin>,
}

impl KendallReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count,tau\n");
        for b in &self.bins {
            s.push_str(&format!("{},{},{},{:.16e}\n", b.lo, b.hi, b.count, b.tau));
        }
        s
    }
}

/// Index of the bin `(edges[k], edges[k + 1]]` holding `x`, if any.
fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    if !(x > edges[0]) || x > edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|&e| e < x) - 1)
}

/// Draws tables from the configured prior, bins them by minor marginal
/// frequency and correlates D' with lambda inside each bin.
pub fn run_kendall_study(cfg: &StudyConfig) -> Result<KendallReport> {
    cfg.validate()?;
    let sampler = DirichletSampler::new(&cfg.prior);
    let chunks = cfg.draws.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<(usize, f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(cfg.seed, tag::KENDALL, c as u64);
            let len = CHUNK.min(cfg.draws - c * CHUNK);
            let mut out = Vec::new();
            for _ in 0..len {
                let t = sampler.sample(&mut rng);
                let m = t.marginals();
                let (row, col) = (m.row_minor(), m.col_minor());
                let bin = match cfg.bin_rule {
                    BinRule::Both => match (bin_of(&cfg.bins, row), bin_of(&cfg.bins, col)) {
                        (Some(a), Some(b)) if a == b => Some(a),
                        _ => None,
                    },
                    BinRule::Row => bin_of(&cfg.bins, row),
                    BinRule::Min => bin_of(&cfg.bins, row.min(col)),
                };
                if let Some(b) = bin {
                    out.push((b, d_prime(&t), t.log_odds_ratio()));
                }
            }
            out
        })
        .collect();
    let nbins = cfg.bins.len() - 1;
    let mut xs = vec![Vec::new(); nbins];
    let mut ys = vec![Vec::new(); nbins];
    for (b, x, y) in per_chunk.into_iter().flatten() {
        xs[b].push(x);
        ys[b].push(y);
    }
    let mut bins = Vec::with_capacity(nbins);
    for b in 0..nbins {
        let (lo, hi) = (cfg.bins[b], cfg.bins[b + 1]);
        let count = xs[b].len();
        if count < MIN_BIN_COUNT {
            return Err(LdError::EmptyBin { lo, hi, count });
        }
        bins.push(KendallBin {
            lo,
            hi,
            count,
            tau: kendall_tau_b(&xs[b], &ys[b]),
        });
    }
    Ok(KendallReport {
        prior: cfg.prior_label(),
        draws: cfg.draws,
        seed: cfg.seed,
        bin_rule: cfg.bin_rule,
        bins,
    })
}
