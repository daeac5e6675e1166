//! The canonical measure `eta_alpha = 2 L(lambda) - 1`, where `L` is the CDF of
//! the odds ratio under the symmetric Dirichlet distribution with concentration
//! `alpha`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{LdError, Result};
use crate::interp::MonotoneCdf;
use crate::measures::q_from_log_lambda;
use crate::quadrature::{integrate_best_effort, QuadOptions};
use crate::simulation::rng::{substream, tag};
use crate::simulation::samplers::dirichlet_log_odds;
use crate::special::dilog;
use crate::tables::{DirichletParams, ProbTable};

/// Below this distance from 1 the closed forms for eta switch to their Taylor expansions.
pub const TAYLOR_SWITCH: f64 = 1e-4;

/// Series switch for the alpha = 1 density, whose closed form cancels as `eps^-2`.
const DENSITY_SERIES_SWITCH: f64 = 1e-2;

/// Smallest tail probability a calibration reports; keeps |eta| <= 1 - 2^-52.
const MIN_TAIL: f64 = f64::EPSILON / 2.0;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MC_SAMPLES: usize = 200_000;
pub const MIN_MC_SAMPLES: usize = 10_000;
const MC_KNOTS: usize = 512;
const MC_CHUNK: usize = 10_000;

/// Knot spacing in log lambda for tabulated quadrature calibrations.
const QUAD_STEP: f64 = 1.0 / 16.0;
/// Knot spacing in log lambda for written calibration files.
const FILE_STEP: f64 = 1.0 / 64.0;
/// Tail mass below which written calibration files stop.
const FILE_TAIL: f64 = 1e-13;

const FILE_MAGIC: &str = "# ldcanon-calibration v1";

/// `eta_1(lambda) = 2 (lambda^2 - lambda - lambda ln lambda) / (lambda - 1)^2 - 1`.
pub fn eta1(lambda: f64) -> f64 {
    if (lambda - 1.0).abs() < TAYLOR_SWITCH {
        eta1_taylor(lambda)
    } else {
        eta1_closed(lambda)
    }
}

/// The closed form of `eta_1`, evaluated without the Taylor guard.
pub fn eta1_closed(lambda: f64) -> f64 {
    if !(lambda >= 0.0) {
        return f64::NAN;
    }
    if lambda > 1.0 {
        return -eta1_closed(1.0 / lambda);
    }
    if lambda == 1.0 {
        return 0.0;
    }
    if lambda == 0.0 {
        return -1.0;
    }
    // L = lambda (eps - ln(1 + eps)) / eps^2 with eps = lambda - 1.
    let eps = lambda - 1.0;
    let l = lambda * ((eps - eps.ln_1p()) / eps) / eps;
    2.0 * l - 1.0
}

/// `eta_1(1 + eps) = (2 eps - eps^2) / 6 + O(eps^3)`.
pub fn eta1_taylor(lambda: f64) -> f64 {
    let eps = lambda - 1.0;
    (2.0 * eps - eps * eps) / 6.0
}

/// `eta_1/2` through the dilogarithm closed form.
pub fn eta_half(lambda: f64) -> f64 {
    if (lambda - 1.0).abs() < TAYLOR_SWITCH {
        eta_half_taylor(lambda)
    } else {
        eta_half_closed(lambda)
    }
}

/// `(4/pi^2) {ln s ln|(s-1)/(s+1)| + dilog(s) - dilog(-s)} - 1` with `s = sqrt(lambda)`.
pub fn eta_half_closed(lambda: f64) -> f64 {
    if !(lambda >= 0.0) {
        return f64::NAN;
    }
    if lambda > 1.0 {
        return -eta_half_closed(1.0 / lambda);
    }
    if lambda == 1.0 {
        return 0.0;
    }
    let s = lambda.sqrt();
    if s == 0.0 {
        return -1.0;
    }
    let ls = s.ln();
    let bracket = if s > 0.5 {
        // Reflection of dilog(s) cancels the ln(1 - s) singularity analytically.
        PI * PI / 6.0 - ls * s.ln_1p() - dilog(1.0 - s) - dilog(-s)
    } else {
        ls * ((1.0 - s) / (1.0 + s)).ln() + dilog(s) - dilog(-s)
    };
    4.0 / (PI * PI) * bracket - 1.0
}

/// `eta_1/2(1 + eps) = (2 eps - eps^2) / pi^2 + O(eps^3)`.
pub fn eta_half_taylor(lambda: f64) -> f64 {
    let eps = lambda - 1.0;
    (2.0 * eps - eps * eps) / (PI * PI)
}

/// Density of lambda under the uniform Dirichlet distribution:
/// `(2 - 2 lambda + ln lambda + lambda ln lambda) / (lambda - 1)^3`.
pub fn density_alpha1(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return if lambda == 0.0 { f64::INFINITY } else { f64::NAN };
    }
    let eps = lambda - 1.0;
    if eps.abs() < DENSITY_SERIES_SWITCH {
        // sum_{k>=3} (-1)^(k+1) (k-2) / (k (k-1)) eps^(k-3)
        let mut sum = 0.0;
        let mut pow = 1.0;
        for k in 3..30 {
            let k = f64::from(k);
            let sign = if (k as i32) % 2 == 0 { -1.0 } else { 1.0 };
            sum += sign * (k - 2.0) / (k * (k - 1.0)) * pow;
            pow *= eps;
        }
        return sum;
    }
    let ln = lambda.ln();
    (2.0 - 2.0 * lambda + ln + lambda * ln) / (eps * eps * eps)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

fn ln_beta2(x: f64, y: f64) -> f64 {
    ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)
}

/// The odds-ratio density in one-dimensional form.
///
/// Writing `p00 = rho c`, `p01 = rho (1 - c)` separates the double integral:
/// the `rho` part is a Beta function and the `c` part, after `c = 1/(1 + e^-z)`,
/// is a smooth integral over the real line evaluated here.
#[derive(Clone, Debug)]
struct LogLambdaDensity {
    a11: f64,
    p: f64,
    r: f64,
    s: f64,
    log_pref: f64,
}

impl LogLambdaDensity {
    fn new(alpha: &DirichletParams) -> Self {
        let [a00, a01, a10, a11] = alpha.values();
        Self {
            a11,
            p: a00 + a10,
            r: a01 + a11,
            s: a10 + a11,
            log_pref: ln_beta2(a00 + a01, a10 + a11) - alpha.ln_beta(),
        }
    }

    fn log_integrand(&self, z: f64, u: f64) -> f64 {
        -self.p * softplus(-z) + (self.s - self.r) * softplus(z) - self.s * log_add_exp(z, u)
    }

    /// Density of `u = ln lambda`, i.e. `lambda l(lambda)`. The inner integral is
    /// solved to the relative tolerance `rel`, or to absolute tolerance `abs`
    /// on the returned value, whichever is looser.
    fn eval(&self, u: f64, rel: f64, abs: f64) -> (f64, bool) {
        let lo = u.min(0.0);
        let hi = u.max(0.0);
        let g_max = [lo, hi, 0.5 * (lo + hi)]
            .iter()
            .map(|&z| self.log_integrand(z, u))
            .fold(f64::NEG_INFINITY, f64::max);
        let log_scale = self.a11 * u + self.log_pref + g_max;
        let scale = log_scale.exp();
        if scale == 0.0 {
            return (0.0, true);
        }
        let points = [lo - 40.0 / self.p, lo, hi, hi + 40.0 / self.r];
        let opts = QuadOptions {
            abs_tol: abs / scale,
            rel_tol: rel,
            max_intervals: 400,
        };
        let (r, ok) = integrate_best_effort(|z| (self.log_integrand(z, u) - g_max).exp(), &points, opts);
        (scale * r.value, ok)
    }
}

/// Density `l(lambda)` of the odds ratio under the Dirichlet distribution `alpha`,
/// to absolute tolerance `tol`.
pub fn lambda_density(lambda: f64, alpha: &DirichletParams, tol: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(LdError::NonPositiveLambda(lambda));
    }
    let f = LogLambdaDensity::new(alpha);
    let (v, ok) = f.eval(lambda.ln(), 1e-13, tol * lambda);
    if !ok {
        return Err(LdError::QuadratureFailure {
            tolerance: tol,
            estimate: f64::NAN,
        });
    }
    Ok(v / lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMethod {
    #[serde(rename = "analytic-1")]
    Analytic1,
    AnalyticHalf,
    Quadrature,
    MonteCarlo,
}

impl CalibrationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CalibrationMethod::Analytic1 => "analytic-1",
            CalibrationMethod::AnalyticHalf => "analytic-half",
            CalibrationMethod::Quadrature => "quadrature",
            CalibrationMethod::MonteCarlo => "monte-carlo",
        }
    }
}

impl fmt::Display for CalibrationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CalibrationMethod {
    type Err = LdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "analytic-1" | "analytic1" => Ok(CalibrationMethod::Analytic1),
            "analytic-half" => Ok(CalibrationMethod::AnalyticHalf),
            "quadrature" => Ok(CalibrationMethod::Quadrature),
            "monte-carlo" | "mc" => Ok(CalibrationMethod::MonteCarlo),
            other => Err(LdError::Parse(format!("unknown calibration method '{other}'"))),
        }
    }
}

/// How to build a calibration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationSpec {
    pub method: CalibrationMethod,
    /// Absolute tolerance of the quadrature CDF.
    pub tolerance: f64,
    /// Dirichlet draws for the Monte Carlo method.
    pub samples: usize,
    pub seed: u64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            method: CalibrationMethod::Quadrature,
            tolerance: DEFAULT_TOLERANCE,
            samples: DEFAULT_MC_SAMPLES,
            seed: 0,
        }
    }
}

impl CalibrationSpec {
    pub fn quadrature(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            method: CalibrationMethod::MonteCarlo,
            samples,
            seed,
            ..Self::default()
        }
    }
}

/// CDF of `ln lambda` under a symmetric Dirichlet prior, tabulated as upper-tail
/// masses on a grid in `u >= 0` and refined on demand between knots.
#[derive(Clone, Debug)]
struct QuadratureCdf {
    density: LogLambdaDensity,
    step: f64,
    /// `tails[k]` is the mass of `u > k * step`; the last entry covers everything
    /// beyond the grid.
    tails: Vec<f64>,
    reach: f64,
    tolerance: f64,
}

impl QuadratureCdf {
    fn build(alpha: f64, tolerance: f64) -> Result<Self> {
        let density = LogLambdaDensity::new(&DirichletParams::symmetric(alpha)?);
        // The density of u decays like u exp(-alpha u).
        let reach = 45.0 / alpha;
        let intervals = ((reach / QUAD_STEP).ceil() as usize).clamp(256, 16_384);
        let step = reach / intervals as f64;
        let piece_tol = tolerance / (4.0 * intervals as f64);
        let piece = |a: f64, b: f64| -> (f64, bool) {
            let mut inner_ok = true;
            let (r, ok) = integrate_best_effort(
                |u| {
                    let (v, ok) = density.eval(u, 1e-11, 0.0);
                    inner_ok &= ok;
                    v
                },
                &[a, b],
                QuadOptions {
                    abs_tol: piece_tol,
                    rel_tol: 1e-10,
                    max_intervals: 200,
                },
            );
            (r.value, ok && inner_ok)
        };
        let pieces: Vec<(f64, bool)> = (0..=intervals)
            .into_par_iter()
            .map(|k| {
                let a = k as f64 * step;
                let b = if k == intervals { a + reach } else { a + step };
                piece(a, b)
            })
            .collect();
        if pieces.iter().any(|&(_, ok)| !ok) {
            return Err(LdError::QuadratureFailure {
                tolerance,
                estimate: f64::NAN,
            });
        }
        let mut tails = vec![0.0; intervals + 1];
        let mut acc = 0.0;
        for k in (0..=intervals).rev() {
            acc += pieces[k].0;
            tails[k] = acc;
        }
        // Half the mass lies above u = 0 by symmetry; anything else means the
        // integration went wrong.
        let deviation = (tails[0] - 0.5).abs();
        if deviation > tolerance {
            return Err(LdError::QuadratureFailure {
                tolerance,
                estimate: deviation,
            });
        }
        Ok(Self {
            density,
            step,
            tails,
            reach,
            tolerance,
        })
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let opts = QuadOptions {
            abs_tol: 0.01 * self.tolerance,
            rel_tol: 1e-10,
            max_intervals: 200,
        };
        integrate_best_effort(|u| self.density.eval(u, 1e-11, 0.0).0, &[a, b], opts)
            .0
            .value
    }

    /// Mass of `ln lambda > u` for `u >= 0`.
    fn upper_tail(&self, u: f64) -> f64 {
        if u == f64::INFINITY {
            return 0.0;
        }
        let last = self.tails.len() - 1;
        let k = ((u / self.step).floor() as usize).min(last);
        let tail = if k == last {
            self.integral(u, u + self.reach)
        } else {
            let knot = k as f64 * self.step;
            if u == knot {
                self.tails[k]
            } else {
                self.tails[k] - self.integral(knot, u)
            }
        };
        tail.clamp(0.0, 0.5)
    }
}

#[derive(Clone, Debug)]
enum Source {
    Analytic1,
    AnalyticHalf,
    Quadrature(QuadratureCdf),
    Table(MonotoneCdf),
}

/// A CDF of the odds ratio under `D(alpha)`, which defines `eta_alpha`.
#[derive(Clone, Debug)]
pub struct EtaCalibration {
    alpha: f64,
    method: CalibrationMethod,
    samples: Option<usize>,
    seed: Option<u64>,
    tolerance: Option<f64>,
    source: Source,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(LdError::InvalidAlpha(alpha))
    }
}

impl EtaCalibration {
    pub fn analytic_one() -> Self {
        Self {
            alpha: 1.0,
            method: CalibrationMethod::Analytic1,
            samples: None,
            seed: None,
            tolerance: None,
            source: Source::Analytic1,
        }
    }

    pub fn analytic_half() -> Self {
        Self {
            alpha: 0.5,
            method: CalibrationMethod::AnalyticHalf,
            samples: None,
            seed: None,
            tolerance: None,
            source: Source::AnalyticHalf,
        }
    }

    /// The closed form when one exists, otherwise quadrature at the default tolerance.
    pub fn for_alpha(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if alpha == 1.0 {
            Ok(Self::analytic_one())
        } else if alpha == 0.5 {
            Ok(Self::analytic_half())
        } else {
            Self::calibrate(alpha, CalibrationSpec::default())
        }
    }

    pub fn calibrate(alpha: f64, spec: CalibrationSpec) -> Result<Self> {
        check_alpha(alpha)?;
        let base = |method, source| Self {
            alpha,
            method,
            samples: None,
            seed: None,
            tolerance: None,
            source,
        };
        match spec.method {
            CalibrationMethod::Analytic1 if alpha == 1.0 => Ok(Self::analytic_one()),
            CalibrationMethod::AnalyticHalf if alpha == 0.5 => Ok(Self::analytic_half()),
            CalibrationMethod::Analytic1 | CalibrationMethod::AnalyticHalf => Err(LdError::InvalidConfig(format!(
                "no closed form for alpha = {alpha} with method {}",
                spec.method
            ))),
            CalibrationMethod::Quadrature => {
                if !(spec.tolerance > 0.0) {
                    return Err(LdError::InvalidConfig("quadrature tolerance must be positive".into()));
                }
                let q = QuadratureCdf::build(alpha, spec.tolerance)?;
                Ok(Self {
                    tolerance: Some(spec.tolerance),
                    ..base(CalibrationMethod::Quadrature, Source::Quadrature(q))
                })
            }
            CalibrationMethod::MonteCarlo => {
                let table = monte_carlo_cdf(alpha, spec.samples, spec.seed)?;
                Ok(Self {
                    samples: Some(spec.samples),
                    seed: Some(spec.seed),
                    ..base(CalibrationMethod::MonteCarlo, Source::Table(table))
                })
            }
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn method(&self) -> CalibrationMethod {
        self.method
    }

    /// True when backed by interpolated knots (Monte Carlo or loaded from a file).
    pub fn is_tabulated(&self) -> bool {
        matches!(self.source, Source::Table(_))
    }

    /// `eta` as a function of `u = ln lambda`.
    pub fn eta_log(&self, u: f64) -> f64 {
        if u.is_nan() {
            return f64::NAN;
        }
        if u == 0.0 {
            return 0.0;
        }
        let bound = 1.0 - 2.0 * MIN_TAIL;
        let v = match &self.source {
            // Evaluating at -|u| and reflecting keeps eta exactly odd in u.
            Source::Analytic1 => -u.signum() * eta1((-u.abs()).exp()),
            Source::AnalyticHalf => -u.signum() * eta_half((-u.abs()).exp()),
            Source::Quadrature(q) => u.signum() * (1.0 - 2.0 * q.upper_tail(u.abs())),
            Source::Table(t) => 2.0 * t.eval(u) - 1.0,
        };
        v.clamp(-bound, bound)
    }

    pub fn eta(&self, lambda: f64) -> f64 {
        self.eta_log(lambda.ln())
    }

    /// CDF of `ln lambda`, clamped to `[2^-53, 1 - 2^-53]`.
    pub fn cdf_log(&self, u: f64) -> f64 {
        let c = match &self.source {
            Source::Quadrature(q) if u >= 0.0 => 1.0 - q.upper_tail(u),
            Source::Quadrature(q) => q.upper_tail(-u),
            Source::Table(t) => t.eval(u),
            _ if u <= 0.0 => 0.5 * (1.0 + self.eta_log(u)),
            _ => 1.0 - 0.5 * (1.0 - self.eta_log(u)),
        };
        c.clamp(MIN_TAIL, 1.0 - MIN_TAIL)
    }

    pub fn cdf(&self, lambda: f64) -> f64 {
        self.cdf_log(lambda.ln())
    }

    /// Upper tail `P(ln lambda > u)` for `u >= 0`, accurate where the CDF is near 1.
    fn upper_tail(&self, u: f64) -> f64 {
        match &self.source {
            Source::Quadrature(q) => q.upper_tail(u),
            Source::Table(t) => 1.0 - t.eval(u),
            _ => 0.5 * (1.0 - self.eta_log(u)),
        }
    }

    /// `max |Q - eta|` over the given odds ratios.
    pub fn q_gap(&self, lambdas: &[f64]) -> f64 {
        lambdas
            .par_iter()
            .map(|&l| {
                let u = l.ln();
                (q_from_log_lambda(u) - self.eta_log(u)).abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Knots written to a calibration file.
    fn file_knots(&self) -> (Vec<f64>, Vec<f64>) {
        if let Source::Table(t) = &self.source {
            let (x, y) = t.knots();
            return (x.to_vec(), y.to_vec());
        }
        let mut u_lim = 1.0;
        while self.upper_tail(u_lim) >= FILE_TAIL && u_lim < 1e4 {
            u_lim *= 2.0;
        }
        let step = FILE_STEP.max(u_lim / 16_384.0);
        let n = (u_lim / step).ceil() as usize;
        let tails: Vec<f64> = (1..=n).into_par_iter().map(|j| self.upper_tail(j as f64 * step)).collect();
        let mut upper = Vec::new();
        for (j, &tail) in tails.iter().enumerate() {
            if tail < FILE_TAIL {
                break;
            }
            upper.push(((j + 1) as f64 * step, tail));
        }
        let mut x = Vec::with_capacity(2 * upper.len() + 1);
        let mut y = Vec::with_capacity(2 * upper.len() + 1);
        for &(u, tail) in upper.iter().rev() {
            x.push(-u);
            y.push(tail);
        }
        x.push(0.0);
        y.push(0.5);
        for &(u, tail) in &upper {
            x.push(u);
            y.push(1.0 - tail);
        }
        strictly_increasing(x, y)
    }

    /// Writes the versioned calibration file.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let (x, y) = self.file_knots();
        write!(w, "{FILE_MAGIC} alpha={} method={}", self.alpha, self.method)?;
        if let Some(tol) = self.tolerance {
            write!(w, " tolerance={tol:e}")?;
        }
        if let (Some(n), Some(seed)) = (self.samples, self.seed) {
            write!(w, " samples={n} seed={seed}")?;
        }
        writeln!(w)?;
        writeln!(w, "log_lambda,cdf")?;
        for (a, b) in x.iter().zip(&y) {
            writeln!(w, "{a:.16e},{b:.16e}")?;
        }
        Ok(())
    }

    /// Reads a calibration file, re-validating monotonicity of the knots.
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| LdError::InvalidCalibration("empty file".into()))?;
        let rest = header
            .strip_prefix(FILE_MAGIC)
            .ok_or_else(|| LdError::InvalidCalibration(format!("unrecognized header '{header}'")))?;
        let (mut alpha, mut method, mut samples, mut seed, mut tolerance) = (None, None, None, None, None);
        for field in rest.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| LdError::InvalidCalibration(format!("bad header field '{field}'")))?;
            let bad = || LdError::InvalidCalibration(format!("bad value in header field '{field}'"));
            match k {
                "alpha" => alpha = Some(v.parse::<f64>().map_err(|_| bad())?),
                "method" => method = Some(v.parse::<CalibrationMethod>()?),
                "samples" => samples = Some(v.parse::<usize>().map_err(|_| bad())?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad())?),
                "tolerance" => tolerance = Some(v.parse::<f64>().map_err(|_| bad())?),
                _ => {}
            }
        }
        let alpha = alpha.ok_or_else(|| LdError::InvalidCalibration("header lacks alpha".into()))?;
        check_alpha(alpha)?;
        let method = method.ok_or_else(|| LdError::InvalidCalibration("header lacks method".into()))?;
        match lines.next().transpose()? {
            Some(l) if l.trim() == "log_lambda,cdf" => {}
            _ => return Err(LdError::InvalidCalibration("missing 'log_lambda,cdf' column header".into())),
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| LdError::InvalidCalibration(format!("knot line {} lacks a comma", i + 3)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| LdError::InvalidCalibration(format!("bad number on knot line {}", i + 3)))
            };
            x.push(parse(a)?);
            y.push(parse(b)?);
        }
        let table = MonotoneCdf::new(x, y)?;
        Ok(Self {
            alpha,
            method,
            samples,
            seed,
            tolerance,
            source: Source::Table(table),
        })
    }
}

fn strictly_increasing(x: Vec<f64>, y: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut ox: Vec<f64> = Vec::with_capacity(x.len());
    let mut oy: Vec<f64> = Vec::with_capacity(y.len());
    for (a, b) in x.into_iter().zip(y) {
        if ox.last().is_none_or(|&p| a > p) && oy.last().is_none_or(|&p| b > p) {
            ox.push(a);
            oy.push(b);
        }
    }
    (ox, oy)
}

/// Empirical CDF of `ln lambda` from symmetrized Dirichlet draws, interpolated
/// monotonically between quantile knots.
fn monte_carlo_cdf(alpha: f64, samples: usize, seed: u64) -> Result<MonotoneCdf> {
    if samples < MIN_MC_SAMPLES {
        return Err(LdError::InsufficientSamples {
            got: samples,
            min: MIN_MC_SAMPLES,
        });
    }
    let params = DirichletParams::symmetric(alpha)?;
    let chunks = samples.div_ceil(MC_CHUNK);
    let draws: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, tag::CALIBRATION, c as u64);
            let n = MC_CHUNK.min(samples - c * MC_CHUNK);
            (0..n).map(|_| dirichlet_log_odds(&params, &mut rng)).collect()
        })
        .collect();
    // Row swaps map lambda to 1/lambda and preserve the prior, so pooling u
    // with -u halves the variance and makes the CDF exactly symmetric.
    let mut pooled: Vec<f64> = draws.into_iter().flatten().flat_map(|u| [u, -u]).collect();
    pooled.sort_unstable_by(f64::total_cmp);
    let m = pooled.len() as f64;
    let quantile = |level: f64| {
        let pos = level * m - 0.5;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        pooled[i] + frac * (pooled[i + 1] - pooled[i])
    };
    let mut x = Vec::with_capacity(MC_KNOTS + 1);
    let mut y = Vec::with_capacity(MC_KNOTS + 1);
    for k in 1..=MC_KNOTS {
        let level = k as f64 / (MC_KNOTS + 1) as f64;
        if k == MC_KNOTS / 2 + 1 {
            x.push(0.0);
            y.push(0.5);
        }
        x.push(quantile(level));
        y.push(level);
    }
    MonotoneCdf::new(x, y)
}

/// `eta(t) = 2 L(lambda(t)) - 1`.
pub fn eta_of_table(t: &ProbTable, cal: &EtaCalibration) -> f64 {
    cal.eta_log(t.log_odds_ratio())
}

/// The default search grid for [`q_eta_gap`]: 10,000 log-spaced points in [1e-6, 1e6].
pub fn default_gap_grid() -> Vec<f64> {
    log_grid(1e-6, 1e6, 10_000)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `max |Q(lambda) - eta_alpha(lambda)|` over `grid`.
pub fn q_eta_gap(alpha: f64, grid: &[f64]) -> Result<f64> {
    Ok(EtaCalibration::for_alpha(alpha)?.q_gap(grid))
}
