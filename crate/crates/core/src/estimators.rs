//! Estimators of LD measures from observed count tables: naive plug-in,
//! semi-naive (posterior-mean plug-in), Bayes (posterior expectation) and the
//! volume estimators for eta and D'.

use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;

use crate::error::{LdError, Result};
use crate::measures::{Measure, MeasureId, MeasureValue};
use crate::simulation::rng::{substream, tag};
use crate::simulation::samplers::DirichletSampler;
use crate::tables::{CountTable, DirichletParams, ProbTable};

pub const DEFAULT_BAYES_SAMPLES: usize = 20_000;
pub const MIN_BAYES_SAMPLES: usize = 1_000;
pub const DEFAULT_VOLUME_CAP: u64 = 500;

/// Plug-in of relative frequencies; zero cells surface as undefined or boundary values.
pub fn naive_estimate(counts: &CountTable, measure: &Measure) -> MeasureValue {
    measure.of_cells(&counts.frequencies())
}

/// Posterior-mean table `(n_ij + a_ij) / (N + sum a)`, always in the open simplex.
pub fn posterior_mean_table(counts: &CountTable, alpha: &DirichletParams) -> ProbTable {
    let n = counts.cells();
    let a = alpha.values();
    ProbTable::from_weights([0, 1, 2, 3].map(|k| n[k] as f64 + a[k])).expect("pseudo-counts are positive")
}

pub fn semi_naive_estimate(counts: &CountTable, measure: &Measure, alpha: &DirichletParams) -> MeasureValue {
    let t = posterior_mean_table(counts, alpha);
    MeasureValue::defined(measure.id(), measure.of_table(&t))
}

/// Posterior expectation of `measure` under `D(alpha + n)` by Monte Carlo.
pub fn bayes_estimate(
    counts: &CountTable,
    measure: &Measure,
    alpha: &DirichletParams,
    mc_samples: usize,
    seed: u64,
) -> Result<MeasureValue> {
    let mut v = bayes_estimates(counts, std::slice::from_ref(measure), alpha, mc_samples, seed)?;
    Ok(v.remove(0))
}

/// Bayes estimates of several measures from one shared set of posterior draws.
pub fn bayes_estimates(
    counts: &CountTable,
    measures: &[Measure],
    alpha: &DirichletParams,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<MeasureValue>> {
    if mc_samples < MIN_BAYES_SAMPLES {
        return Err(LdError::InvalidEstimator(format!(
            "Bayes estimator needs at least {MIN_BAYES_SAMPLES} Monte Carlo samples (got {mc_samples})"
        )));
    }
    let sampler = DirichletSampler::new(&alpha.posterior(counts));
    let mut rng = substream(seed, tag::BAYES, 0);
    let mut sum = vec![0.0; measures.len()];
    let mut sum_sq = vec![0.0; measures.len()];
    for _ in 0..mc_samples {
        let t = sampler.sample(&mut rng);
        for (k, m) in measures.iter().enumerate() {
            let x = m.of_table(&t);
            sum[k] += x;
            sum_sq[k] += x * x;
        }
    }
    let n = mc_samples as f64;
    Ok(measures
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mean = sum[k] / n;
            let var = ((sum_sq[k] - n * mean * mean) / (n - 1.0)).max(0.0);
            MeasureValue {
                std_error: Some((var / n).sqrt()),
                ..MeasureValue::defined(m.id(), mean)
            }
        })
        .collect())
}

/// Probability of a count table under the Dirichlet-multinomial mixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableProbability {
    pub table: CountTable,
    pub weight: f64,
}

/// `ln(n B(n, x))`, with `n B(n, x) = 1` for `n = 0`.
fn ln_n_beta(n: u64, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    n.ln() + ln_gamma(n) + ln_gamma(x) - ln_gamma(n + x)
}

/// `w(t_N) = N B(N, sum a) / prod n_ij B(n_ij, a_ij)`.
pub fn table_probability(counts: &CountTable, alpha: &DirichletParams) -> TableProbability {
    let n = counts.cells();
    let a = alpha.values();
    let log_w = ln_n_beta(counts.total(), alpha.total()) - (0..4).map(|k| ln_n_beta(n[k], a[k])).sum::<f64>();
    TableProbability {
        table: *counts,
        weight: log_w.exp(),
    }
}

/// `g(n) = Gamma(n + a) / (Gamma(a) n!)` for `n = 0..=max`; the cell factor of
/// the table weight.
fn cell_factors(a: f64, max: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(max + 1);
    g.push(1.0);
    for n in 1..=max {
        let prev = g[n - 1];
        g.push(prev * (n as f64 - 1.0 + a) / n as f64);
    }
    g
}

/// Common denominator `q <= 1000` with every `a_ij q` integral, if one exists.
fn rational_scale(a: &[f64; 4]) -> Option<(u128, [u128; 4])> {
    'q: for q in 1..=1000u32 {
        let qf = f64::from(q);
        let mut num = [0u128; 4];
        for k in 0..4 {
            let x = a[k] * qf;
            let r = x.round();
            if r < 1.0 || (x - r).abs() > 1e-9 * x.max(1.0) {
                continue 'q;
            }
            num[k] = r as u128;
        }
        return Some((u128::from(q), num));
    }
    None
}

/// Exact comparison of semi-naive odds ratios, where possible.
enum OddsComparator {
    Exact { q: u128, p: [u128; 4] },
    Float { a: [f64; 4] },
}

impl OddsComparator {
    fn new(alpha: &DirichletParams) -> Self {
        match rational_scale(&alpha.values()) {
            Some((q, p)) => OddsComparator::Exact { q, p },
            None => OddsComparator::Float { a: alpha.values() },
        }
    }

    /// Ordering of `lambda_hat(x)` relative to `lambda_hat(y)`.
    fn compare(&self, x: [u64; 4], y: [u64; 4]) -> std::cmp::Ordering {
        match self {
            OddsComparator::Exact { q, p } => {
                let s = |n: [u64; 4], k: usize| q * u128::from(n[k]) + p[k];
                let lhs = s(x, 0) * s(x, 3) * s(y, 1) * s(y, 2);
                let rhs = s(y, 0) * s(y, 3) * s(x, 1) * s(x, 2);
                lhs.cmp(&rhs)
            }
            OddsComparator::Float { a } => {
                let s = |n: [u64; 4], k: usize| n[k] as f64 + a[k];
                let lhs = s(x, 0) * s(x, 3) * s(y, 1) * s(y, 2);
                let rhs = s(y, 0) * s(y, 3) * s(x, 1) * s(x, 2);
                if (lhs - rhs).abs() <= 1e-12 * lhs.max(rhs) {
                    std::cmp::Ordering::Equal
                } else {
                    lhs.total_cmp(&rhs)
                }
            }
        }
    }
}

/// Precomputed weights for volume estimates of eta at one sample size.
///
/// For fixed `(n00, n01)` the semi-naive odds ratio falls strictly as `n10`
/// grows, so the tables below, at and above the observed odds ratio form three
/// runs in `n10`. Suffix sums of `g10(k) g11(m - k)` give each run's weight in
/// constant time, which brings the triple sum down to `O(N^2)`.
pub struct VolumeEtaTable {
    n: u64,
    alpha: DirichletParams,
    g00: Vec<f64>,
    g01: Vec<f64>,
    /// `suffix[m][k] = sum_{k' >= k} g10(k') g11(m - k')`, with a trailing zero.
    suffix: Vec<Vec<f64>>,
    comparator: OddsComparator,
}

impl VolumeEtaTable {
    pub fn new(n: u64, alpha: &DirichletParams) -> Self {
        let size = n as usize;
        let a = alpha.values();
        let g = a.map(|x| cell_factors(x, size));
        let suffix = (0..=size)
            .map(|m| {
                let mut s = vec![0.0; m + 2];
                for k in (0..=m).rev() {
                    s[k] = s[k + 1] + g[2][k] * g[3][m - k];
                }
                s
            })
            .collect();
        Self {
            n,
            alpha: *alpha,
            g00: g[0].clone(),
            g01: g[1].clone(),
            suffix,
            comparator: OddsComparator::new(alpha),
        }
    }

    pub fn sample_size(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self, counts: &CountTable) -> Result<f64> {
        if counts.total() != self.n {
            return Err(LdError::InvalidEstimator(format!(
                "table has N = {} but the volume table was built for N = {}",
                counts.total(),
                self.n
            )));
        }
        let obs = counts.cells();
        let [a00, a01, a10, a11] = self.alpha.values();
        let c = counts.odds_ratio_hat(&self.alpha);
        let size = self.n as usize;
        let (mut less, mut greater, mut total) = (0.0, 0.0, 0.0);
        for i in 0..=size {
            let ai = i as f64 + a00;
            for j in 0..=size - i {
                let m = size - i - j;
                let s = &self.suffix[m];
                let w = self.g00[i] * self.g01[j];
                let bj = j as f64 + a01;
                // lambda_hat(k) = c exactly at k = (A (m + a11) - c B a10) / (A + c B).
                let root = (ai * (m as f64 + a11) - c * bj * a10) / (ai + c * bj);
                let near = root.round();
                let (first_not_greater, first_less) = if (root - near).abs() < 1e-7 && near >= 0.0 && near <= m as f64 {
                    let k = near as usize;
                    let cand = [i as u64, j as u64, k as u64, (m - k) as u64];
                    match self.comparator.compare(cand, obs) {
                        std::cmp::Ordering::Equal => (k, k + 1),
                        std::cmp::Ordering::Greater => (k + 1, k + 1),
                        std::cmp::Ordering::Less => (k, k),
                    }
                } else {
                    let k = if root < 0.0 {
                        0
                    } else {
                        ((root.floor() as usize) + 1).min(m + 1)
                    };
                    (k, k)
                };
                greater += w * (s[0] - s[first_not_greater]);
                less += w * s[first_less];
                total += w * s[0];
            }
        }
        Ok((less - greater) / total)
    }
}

pub fn volume_eta_estimate(counts: &CountTable, alpha: &DirichletParams) -> Result<MeasureValue> {
    volume_eta_estimate_with_cap(counts, alpha, DEFAULT_VOLUME_CAP)
}

pub fn volume_eta_estimate_with_cap(counts: &CountTable, alpha: &DirichletParams, cap: u64) -> Result<MeasureValue> {
    let n = counts.total();
    if n > cap {
        return Err(LdError::BudgetExceeded { n, cap });
    }
    let v = VolumeEtaTable::new(n, alpha).estimate(counts)?;
    Ok(MeasureValue::defined(MeasureId::Eta, v))
}

/// Signed volume estimate of D' over the tables sharing the observed margins,
/// all taken as equally likely; ties with the observed table count one half.
pub fn volume_dprime_estimate(counts: &CountTable) -> Result<MeasureValue> {
    if counts.has_zero_marginal() {
        return Err(LdError::DegenerateMarginals);
    }
    let n = i128::from(counts.total());
    let r0 = i128::from(counts.row0());
    let c0 = i128::from(counts.col0());
    let x_obs = i128::from(counts.cells()[0]);
    // N D = N n00 - r0 c0 up to the factor 1/N^2.
    let nd = |x: i128| n * x - r0 * c0;
    let d_obs = nd(x_obs);
    if d_obs == 0 {
        return Ok(MeasureValue::defined(MeasureId::DPrime, 0.0));
    }
    let lo = (r0 + c0 - n).max(0);
    let hi = r0.min(c0);
    let (mut same, mut less) = (0u64, 0u64);
    for x in lo..=hi {
        let d = nd(x);
        if d.signum() != d_obs.signum() {
            continue;
        }
        same += 1;
        if d.abs() < d_obs.abs() {
            less += 1;
        }
    }
    let v = d_obs.signum() as f64 * (less as f64 + 0.5) / same as f64;
    Ok(MeasureValue::defined(MeasureId::DPrime, v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorFamily {
    Naive,
    SemiNaive,
    Bayes,
    Volume,
}

/// An estimator with its parameters.
///
/// `alpha = None` for semi-naive, Bayes and volume estimators means "use the
/// alpha of the eta measure being estimated".
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorSpec {
    pub family: EstimatorFamily,
    pub alpha: Option<DirichletParams>,
    pub mc_samples: usize,
    pub seed: u64,
    pub volume_cap: u64,
}

impl EstimatorSpec {
    fn with(family: EstimatorFamily, alpha: Option<DirichletParams>) -> Self {
        Self {
            family,
            alpha,
            mc_samples: DEFAULT_BAYES_SAMPLES,
            seed: 0,
            volume_cap: DEFAULT_VOLUME_CAP,
        }
    }

    pub fn naive() -> Self {
        Self::with(EstimatorFamily::Naive, None)
    }

    pub fn semi_naive(alpha: DirichletParams) -> Self {
        Self::with(EstimatorFamily::SemiNaive, Some(alpha))
    }

    pub fn bayes(alpha: DirichletParams, mc_samples: usize, seed: u64) -> Self {
        Self {
            mc_samples,
            seed,
            ..Self::with(EstimatorFamily::Bayes, Some(alpha))
        }
    }

    pub fn volume() -> Self {
        Self::with(EstimatorFamily::Volume, None)
    }

    /// Checks the spec against a measure and resolves the prior it will use.
    pub fn resolve(&self, measure: &Measure) -> Result<Option<DirichletParams>> {
        if self.family == EstimatorFamily::Bayes && self.mc_samples < MIN_BAYES_SAMPLES {
            return Err(LdError::InvalidEstimator(format!(
                "Bayes estimator needs at least {MIN_BAYES_SAMPLES} Monte Carlo samples (got {})",
                self.mc_samples
            )));
        }
        let eta_alpha = match measure {
            Measure::Eta(cal) => Some(DirichletParams::symmetric(cal.alpha())?),
            _ => None,
        };
        match self.family {
            EstimatorFamily::Naive => Ok(None),
            EstimatorFamily::Volume => match measure.id() {
                MeasureId::Eta => Ok(self.alpha.or(eta_alpha)),
                MeasureId::DPrime => Ok(None),
                other => Err(LdError::InvalidEstimator(format!(
                    "volume estimator is only defined for eta and D' (not {other})"
                ))),
            },
            EstimatorFamily::SemiNaive | EstimatorFamily::Bayes => self.alpha.or(eta_alpha).map(Some).ok_or_else(|| {
                LdError::InvalidEstimator(format!("{} needs an alpha for measure {}", self.label(), measure.name()))
            }),
        }
    }

    /// Short label such as `NE`, `SNE:0.5`, `BE:1` or `VE`.
    pub fn label(&self) -> String {
        let fam = match self.family {
            EstimatorFamily::Naive => "NE",
            EstimatorFamily::SemiNaive => "SNE",
            EstimatorFamily::Bayes => "BE",
            EstimatorFamily::Volume => "VE",
        };
        match self.alpha {
            Some(a) if self.family != EstimatorFamily::Naive => match a.symmetric_value() {
                Some(x) => format!("{fam}:{x}"),
                None => {
                    let v = a.values();
                    format!("{fam}:{}/{}/{}/{}", v[0], v[1], v[2], v[3])
                }
            },
            _ => fam.to_string(),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for EstimatorSpec {
    type Err = LdError;

    /// Parses `ne`, `sne[:alpha]`, `be[:alpha]`, `ve[:alpha]`; alpha is a scalar
    /// or four slash-separated values.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (fam, alpha) = match lower.split_once(':') {
            Some((f, a)) => (f.to_string(), Some(a.to_string())),
            None => (lower.clone(), None),
        };
        let family = match fam.as_str() {
            "ne" | "naive" => EstimatorFamily::Naive,
            "sne" | "semi-naive" => EstimatorFamily::SemiNaive,
            "be" | "bayes" => EstimatorFamily::Bayes,
            "ve" | "volume" => EstimatorFamily::Volume,
            _ => return Err(LdError::InvalidEstimator(format!("unknown estimator '{s}'"))),
        };
        let alpha = match alpha {
            None => None,
            Some(_) if family == EstimatorFamily::Naive => {
                return Err(LdError::InvalidEstimator("the naive estimator takes no alpha".into()))
            }
            Some(a) => Some(parse_alpha(&a)?),
        };
        Ok(Self::with(family, alpha))
    }
}

/// Parses a scalar concentration or four slash-separated ones.
pub fn parse_alpha(s: &str) -> Result<DirichletParams> {
    let parts: Vec<&str> = s.split('/').collect();
    let nums = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| LdError::Parse(format!("bad alpha '{s}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    match nums.as_slice() {
        [a] => DirichletParams::symmetric(*a),
        [a, b, c, d] => DirichletParams::new([*a, *b, *c, *d]),
        _ => Err(LdError::Parse(format!("alpha needs 1 or 4 values (got '{s}')"))),
    }
}

/// Applies one estimator to one measure.
pub fn estimate(counts: &CountTable, measure: &Measure, spec: &EstimatorSpec) -> Result<MeasureValue> {
    let alpha = spec.resolve(measure)?;
    match spec.family {
        EstimatorFamily::Naive => Ok(naive_estimate(counts, measure)),
        EstimatorFamily::SemiNaive => Ok(semi_naive_estimate(counts, measure, &alpha.expect("resolved"))),
        EstimatorFamily::Bayes => bayes_estimate(counts, measure, &alpha.expect("resolved"), spec.mc_samples, spec.seed),
        EstimatorFamily::Volume => match alpha {
            Some(a) => volume_eta_estimate_with_cap(counts, &a, spec.volume_cap),
            None => volume_dprime_estimate(counts),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eta::EtaCalibration;
    use crate::tables::SymmetryElement;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn counts(n: [u64; 4]) -> CountTable {
        CountTable::from_cells(n).unwrap()
    }

    fn sym(a: f64) -> DirichletParams {
        DirichletParams::symmetric(a).unwrap()
    }

    fn eta(a: f64) -> Measure {
        Measure::Eta(Arc::new(EtaCalibration::for_alpha(a).unwrap()))
    }

    fn all_tables(n: u64) -> impl Iterator<Item = CountTable> {
        (0..=n).flat_map(move |i| {
            (0..=n - i).flat_map(move |j| (0..=n - i - j).map(move |k| counts([i, j, k, n - i - j - k])))
        })
    }

    /// O(N^3) volume estimate with float weights from the log-gamma form.
    fn brute_volume(t: &CountTable, alpha: &DirichletParams) -> f64 {
        let cmp = OddsComparator::new(alpha);
        let mut acc = 0.0;
        for u in all_tables(t.total()) {
            let w = table_probability(&u, alpha).weight;
            acc += w * match cmp.compare(u.cells(), t.cells()) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Greater => -1.0,
            };
        }
        acc
    }

    #[test]
    fn naive_examples() {
        let dp = naive_estimate(&counts([3, 1, 1, 3]), &Measure::DPrime);
        assert!((dp.value - 0.5).abs() < 1e-15 && dp.defined && !dp.inflated);
        assert!(!naive_estimate(&counts([5, 0, 0, 5]), &Measure::Lambda).defined);
        let b = naive_estimate(&counts([5, 0, 0, 5]), &Measure::DPrime);
        assert!(b.defined && b.inflated && b.value == 1.0);
    }

    #[test]
    fn semi_naive_examples() {
        for m in [Measure::Q, Measure::Lambda, eta(0.5), eta(1.0)] {
            let v = semi_naive_estimate(&counts([1, 1, 1, 1]), &m, &sym(0.5)).value;
            let expected = if m.id() == MeasureId::Lambda { 1.0 } else { 0.0 };
            assert_eq!(v, expected, "{m}");
        }
        let l = semi_naive_estimate(&counts([5, 0, 0, 5]), &Measure::Lambda, &sym(0.5)).value;
        assert!((l - 121.0).abs() < 1e-12);
    }

    #[test]
    fn semi_naive_tends_to_naive() {
        let c = counts([7, 3, 2, 9]);
        for m in [Measure::DPrime, Measure::R, Measure::Q, eta(1.0)] {
            let ne = naive_estimate(&c, &m).value;
            let sne = semi_naive_estimate(&c, &m, &sym(1e-6)).value;
            assert!((ne - sne).abs() < 1e-4);
        }
    }

    #[test]
    fn bayes_symmetric_posterior() {
        let c = counts([1, 1, 1, 1]);
        let ms = [Measure::D, eta(1.0)];
        let v = bayes_estimates(&c, &ms, &sym(1.0), 20_000, 4).unwrap();
        for x in v {
            let se = x.std_error.unwrap();
            assert!(se > 0.0 && x.value.abs() < 3.0 * se, "{x:?}");
        }
        assert!(bayes_estimate(&c, &Measure::D, &sym(1.0), 999, 0).is_err());
        let a = bayes_estimate(&c, &Measure::D, &sym(1.0), 2000, 9).unwrap();
        let b = bayes_estimate(&c, &Measure::D, &sym(1.0), 2000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn theorem_five_normalization() {
        for n in [5, 10, 20, 30] {
            for a in [0.5, 1.0, 2.0] {
                let s: f64 = all_tables(n).map(|t| table_probability(&t, &sym(a)).weight).sum();
                assert!((s - 1.0).abs() < 1e-10, "N {n} alpha {a}: {s}");
            }
        }
        // Under the uniform prior every table has weight 1 / C(N + 3, 3).
        for n in [3u64, 50] {
            let exact = 6.0 / ((n + 3) * (n + 2) * (n + 1)) as f64;
            for t in [[n, 0, 0, 0], [1, 0, 2, n - 3], [0, n - 1, 1, 0]] {
                let w = table_probability(&counts(t), &sym(1.0)).weight;
                assert!((w / exact - 1.0).abs() < 1e-12, "N {n} {t:?}: {w}");
            }
        }
    }

    #[test]
    fn volume_eta_matches_brute_force() {
        for a in [sym(0.5), sym(1.0), sym(2.0), DirichletParams::new([0.5, 1.0, 1.5, 2.0]).unwrap()] {
            for t in [[9, 1, 1, 1], [0, 3, 4, 5], [2, 2, 2, 2], [12, 0, 0, 0], [1, 4, 4, 3]] {
                let c = counts(t);
                let fast = volume_eta_estimate(&c, &a).unwrap().value;
                let slow = brute_volume(&c, &a);
                assert!((fast - slow).abs() < 1e-12, "{t:?} {a:?}: {fast} vs {slow}");
            }
        }
    }

    /// Exact rational volume estimate for rational symmetric alpha `p / q`.
    fn rational_volume(t: &CountTable, p: i64, q: i64) -> f64 {
        use num_bigint::BigInt;
        use num_rational::BigRational;
        use num_traits::{One, ToPrimitive, Zero};
        let a = BigRational::new(BigInt::from(p), BigInt::from(q));
        // Gamma(n + a) / (Gamma(a) n!) as an exact product.
        let g = |n: u64| {
            let mut acc = BigRational::one();
            for k in 0..n {
                acc *= (a.clone() + BigRational::from_integer(BigInt::from(k)))
                    / BigRational::from_integer(BigInt::from(k + 1));
            }
            acc
        };
        let lam = |n: [u64; 4]| {
            let c = |k: usize| BigRational::from_integer(BigInt::from(n[k])) + a.clone();
            c(0) * c(3) / (c(1) * c(2))
        };
        let obs = lam(t.cells());
        let (mut signed, mut total) = (BigRational::zero(), BigRational::zero());
        for u in all_tables(t.total()) {
            let n = u.cells();
            let w = g(n[0]) * g(n[1]) * g(n[2]) * g(n[3]);
            let l = lam(n);
            if l < obs {
                signed += w.clone();
            } else if l > obs {
                signed -= w.clone();
            }
            total += w;
        }
        (signed / total).to_f64().unwrap()
    }

    #[test]
    fn volume_eta_matches_exact_rational_oracle() {
        for (p, q) in [(1, 2), (1, 1), (3, 2)] {
            let a = sym(p as f64 / q as f64);
            for t in [[9, 1, 1, 1], [3, 3, 3, 3], [0, 5, 7, 0], [4, 1, 6, 1], [12, 0, 0, 0]] {
                let c = counts(t);
                let exact = rational_volume(&c, p, q);
                let fast = volume_eta_estimate(&c, &a).unwrap().value;
                assert!((fast - exact).abs() < 1e-13, "{t:?} alpha {p}/{q}: {fast} vs {exact}");
            }
        }
    }

    #[test]
    fn volume_eta_symmetry() {
        for k in 1..5 {
            let v = volume_eta_estimate(&counts([k, k, k, k]), &sym(0.5)).unwrap().value;
            assert!(v.abs() < 1e-15);
        }
        let c = counts([6, 2, 3, 1]);
        let v = volume_eta_estimate(&c, &sym(0.5)).unwrap().value;
        let w = volume_eta_estimate(&c.apply_symmetry(SymmetryElement::SwapRows), &sym(0.5))
            .unwrap()
            .value;
        assert!((v + w).abs() < 1e-14);
        assert!(matches!(
            volume_eta_estimate(&counts([501, 0, 0, 0]), &sym(1.0)),
            Err(LdError::BudgetExceeded { n: 501, cap: 500 })
        ));
    }

    #[test]
    fn volume_eta_uniform_weights_for_alpha_one() {
        let c = counts([5, 1, 2, 4]);
        let n = c.total();
        let w = 1.0 / ((n + 3) * (n + 2) * (n + 1) / 6) as f64;
        let cmp = OddsComparator::new(&sym(1.0));
        let v: f64 = all_tables(n)
            .map(|u| match cmp.compare(u.cells(), c.cells()) {
                std::cmp::Ordering::Less => w,
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Greater => -w,
            })
            .sum();
        let fast = volume_eta_estimate(&c, &sym(1.0)).unwrap().value;
        assert!((fast - v).abs() < 1e-14);
    }

    #[test]
    fn volume_dprime_examples() {
        let v = volume_dprime_estimate(&counts([9, 1, 1, 1])).unwrap().value;
        assert_eq!(v, 0.25);
        let v = volume_dprime_estimate(&counts([5, 0, 0, 5])).unwrap().value;
        assert!((v - 2.5 / 3.0).abs() < 1e-15);
        assert!(v < 1.0 && naive_estimate(&counts([5, 0, 0, 5]), &Measure::DPrime).value == 1.0);
        assert_eq!(volume_dprime_estimate(&counts([1, 1, 1, 1])).unwrap().value, 0.0);
        assert!(matches!(
            volume_dprime_estimate(&counts([3, 2, 0, 0])),
            Err(LdError::DegenerateMarginals)
        ));
    }

    #[test]
    fn spec_parsing_and_validation() {
        let s: EstimatorSpec = "sne:0.5".parse().unwrap();
        assert_eq!(s.label(), "SNE:0.5");
        assert_eq!("ne".parse::<EstimatorSpec>().unwrap().label(), "NE");
        assert_eq!("be:1/1/1/2".parse::<EstimatorSpec>().unwrap().label(), "BE:1/1/1/2");
        assert!("ne:1".parse::<EstimatorSpec>().is_err());
        assert!("xe".parse::<EstimatorSpec>().is_err());
        let ve = EstimatorSpec::volume();
        assert!(ve.resolve(&Measure::R).is_err());
        assert!(ve.resolve(&Measure::DPrime).is_ok());
        assert_eq!(ve.resolve(&eta(0.5)).unwrap(), Some(sym(0.5)));
        assert!("sne".parse::<EstimatorSpec>().unwrap().resolve(&Measure::Q).is_err());
        let be = EstimatorSpec::bayes(sym(1.0), 500, 0);
        assert!(be.resolve(&Measure::D).is_err());
    }

    fn small_counts() -> impl Strategy<Value = CountTable> {
        prop::array::uniform4(0u64..15).prop_filter_map("non-empty", |n| CountTable::from_cells(n).ok())
    }

    proptest! {
        #[test]
        fn dihedral_equivariance_of_estimators(c in small_counts(), s_idx in 0usize..8) {
            let s = SymmetryElement::ALL[s_idx];
            let cs = c.apply_symmetry(s);
            for m in [Measure::D, Measure::DPrime, Measure::R, Measure::Q, eta(0.5), Measure::MutualInformation] {
                let ne = naive_estimate(&c, &m);
                let ne_s = naive_estimate(&cs, &m);
                prop_assert_eq!(ne.defined, ne_s.defined);
                if ne.defined {
                    prop_assert!((ne_s.value - m.transform(ne.value, s)).abs() < 1e-12);
                }
                let sne = semi_naive_estimate(&c, &m, &sym(0.5)).value;
                let sne_s = semi_naive_estimate(&cs, &m, &sym(0.5)).value;
                prop_assert!((sne_s - m.transform(sne, s)).abs() < 1e-12);
            }
            let ve = volume_eta_estimate(&c, &sym(0.5)).unwrap().value;
            let ve_s = volume_eta_estimate(&cs, &sym(0.5)).unwrap().value;
            prop_assert!((ve_s - s.sign() as f64 * ve).abs() < 1e-12);
            if let (Ok(d), Ok(ds)) = (volume_dprime_estimate(&c), volume_dprime_estimate(&cs)) {
                prop_assert!((ds.value - s.sign() as f64 * d.value).abs() < 1e-15);
            }
        }
    }
}
