//! Classical LD measures and the measure registry used by estimators and the CLI.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LdError, Result};
use crate::eta::EtaCalibration;
use crate::tables::{ProbTable, SymmetryElement};

/// Values within this distance of ±1 are reported as boundary (inflated) values.
const BOUNDARY_EPS: f64 = 1e-12;

/// `D = p00 - p0. p.0`.
pub fn d_coeff(t: &ProbTable) -> f64 {
    d_cells(&t.cells())
}

/// `D' = D / D_max` with `D_max = min(p0. p.1, p.0 p1.)` for `D >= 0` and
/// `min(p0. p.0, p1. p.1)` for `D < 0`.
pub fn d_prime(t: &ProbTable) -> f64 {
    d_prime_cells(&t.cells()).unwrap_or(f64::NAN)
}

/// Pearson correlation of the two allele indicators.
pub fn correlation_r(t: &ProbTable) -> f64 {
    r_cells(&t.cells()).unwrap_or(f64::NAN)
}

/// Yule's `Q = (lambda - 1) / (lambda + 1)`.
pub fn yules_q(t: &ProbTable) -> f64 {
    q_from_log_lambda(t.log_odds_ratio())
}

/// Mutual information in bits.
pub fn mutual_information(t: &ProbTable) -> f64 {
    mi_cells(&t.cells())
}

/// `tanh(u / 2)` is `(e^u - 1) / (e^u + 1)` without overflow.
pub(crate) fn q_from_log_lambda(log_lambda: f64) -> f64 {
    (0.5 * log_lambda).tanh()
}

pub(crate) fn d_cells(p: &[f64; 4]) -> f64 {
    let [a, b, c, d] = *p;
    // Equal to p00 - p0. p.0 on the simplex, with less cancellation.
    a * d - b * c
}

fn margins(p: &[f64; 4]) -> [f64; 4] {
    let [a, b, c, d] = *p;
    [a + b, c + d, a + c, b + d]
}

pub(crate) fn has_zero_margin(p: &[f64; 4]) -> bool {
    margins(p).contains(&0.0)
}

pub(crate) fn d_prime_cells(p: &[f64; 4]) -> Option<f64> {
    if has_zero_margin(p) {
        return None;
    }
    let d = d_cells(p);
    if d == 0.0 {
        return Some(0.0);
    }
    let [r0, r1, c0, c1] = margins(p);
    let d_max = if d > 0.0 { (r0 * c1).min(c0 * r1) } else { (r0 * c0).min(r1 * c1) };
    Some((d / d_max).clamp(-1.0, 1.0))
}

pub(crate) fn r_cells(p: &[f64; 4]) -> Option<f64> {
    if has_zero_margin(p) {
        return None;
    }
    let [r0, r1, c0, c1] = margins(p);
    let r = d_cells(p) / ((r0 * c0).sqrt() * (r1 * c1).sqrt());
    Some(r.clamp(-1.0, 1.0))
}

pub(crate) fn mi_cells(p: &[f64; 4]) -> f64 {
    let xlogx = |x: f64| if x > 0.0 { x * x.log2() } else { 0.0 };
    let [r0, r1, c0, c1] = margins(p);
    let joint: f64 = p.iter().map(|&x| xlogx(x)).sum();
    let mi = joint - xlogx(r0) - xlogx(r1) - xlogx(c0) - xlogx(c1);
    mi.max(0.0)
}

/// Identifier of a measure kind, independent of any calibration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MeasureId {
    D,
    #[serde(rename = "DPRIME")]
    DPrime,
    R,
    Lambda,
    Q,
    #[serde(rename = "MI")]
    MutualInformation,
    Eta,
}

impl MeasureId {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureId::D => "D",
            MeasureId::DPrime => "DPRIME",
            MeasureId::R => "R",
            MeasureId::Lambda => "LAMBDA",
            MeasureId::Q => "Q",
            MeasureId::MutualInformation => "MI",
            MeasureId::Eta => "ETA",
        }
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A measure evaluation with in-band definedness and boundary flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub measure: MeasureId,
    pub value: f64,
    pub defined: bool,
    /// The value sits on the boundary of the measure's range because of zero cells.
    pub inflated: bool,
    /// Monte Carlo standard error, for estimators that have one.
    pub std_error: Option<f64>,
}

impl MeasureValue {
    pub fn defined(measure: MeasureId, value: f64) -> Self {
        Self {
            measure,
            value,
            defined: true,
            inflated: false,
            std_error: None,
        }
    }

    pub fn undefined(measure: MeasureId) -> Self {
        Self {
            measure,
            value: f64::NAN,
            defined: false,
            inflated: false,
            std_error: None,
        }
    }

    pub fn boundary(measure: MeasureId, value: f64) -> Self {
        Self {
            inflated: true,
            ..Self::defined(measure, value)
        }
    }
}

/// A measure together with whatever it needs to be evaluated.
#[derive(Clone, Debug)]
pub enum Measure {
    D,
    DPrime,
    R,
    Lambda,
    Q,
    MutualInformation,
    Eta(Arc<EtaCalibration>),
}

impl Measure {
    /// Parses `d`, `dprime`, `r`, `lambda`, `q`, `mi`, `eta:<alpha>`, or bare
    /// `eta` (which takes `default_alpha`).
    pub fn parse(token: &str, default_alpha: Option<f64>) -> Result<Self> {
        let token = token.trim();
        let lower = token.to_ascii_lowercase();
        Ok(match lower.as_str() {
            "d" => Measure::D,
            "dprime" | "d'" => Measure::DPrime,
            "r" => Measure::R,
            "lambda" => Measure::Lambda,
            "q" => Measure::Q,
            "mi" => Measure::MutualInformation,
            "eta" => {
                let alpha = default_alpha.ok_or_else(|| {
                    LdError::InvalidConfig("measure 'eta' needs an alpha (use eta:<alpha> or --alpha)".into())
                })?;
                Measure::Eta(Arc::new(EtaCalibration::for_alpha(alpha)?))
            }
            other => match other.strip_prefix("eta:") {
                Some(a) => {
                    let alpha: f64 = a
                        .parse()
                        .map_err(|_| LdError::Parse(format!("bad alpha in measure '{token}'")))?;
                    Measure::Eta(Arc::new(EtaCalibration::for_alpha(alpha)?))
                }
                None => return Err(LdError::Parse(format!("unknown measure '{token}'"))),
            },
        })
    }

    /// Parses a comma-separated list, sharing calibrations between repeated alphas.
    pub fn parse_list(list: &str, default_alpha: Option<f64>) -> Result<Vec<Self>> {
        let mut out: Vec<Measure> = Vec::new();
        for token in list.split(',').filter(|s| !s.trim().is_empty()) {
            let m = Measure::parse(token, default_alpha)?;
            if let Some(prev) = out.iter().find(|p| p.name() == m.name()) {
                out.push(prev.clone());
            } else {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(LdError::InvalidConfig("empty measure list".into()));
        }
        Ok(out)
    }

    /// The default comparison set: eta_1/2, eta_1, D', r, Q, lambda, MI.
    pub fn default_set() -> Vec<Self> {
        vec![
            Measure::Eta(Arc::new(EtaCalibration::analytic_half())),
            Measure::Eta(Arc::new(EtaCalibration::analytic_one())),
            Measure::DPrime,
            Measure::R,
            Measure::Q,
            Measure::Lambda,
            Measure::MutualInformation,
        ]
    }

    pub fn id(&self) -> MeasureId {
        match self {
            Measure::D => MeasureId::D,
            Measure::DPrime => MeasureId::DPrime,
            Measure::R => MeasureId::R,
            Measure::Lambda => MeasureId::Lambda,
            Measure::Q => MeasureId::Q,
            Measure::MutualInformation => MeasureId::MutualInformation,
            Measure::Eta(_) => MeasureId::Eta,
        }
    }

    /// Token that round-trips through [`Measure::parse`].
    pub fn name(&self) -> String {
        match self {
            Measure::D => "d".into(),
            Measure::DPrime => "dprime".into(),
            Measure::R => "r".into(),
            Measure::Lambda => "lambda".into(),
            Measure::Q => "q".into(),
            Measure::MutualInformation => "mi".into(),
            Measure::Eta(cal) => format!("eta:{}", cal.alpha()),
        }
    }

    /// Evaluates the measure on a point of the open simplex.
    pub fn of_table(&self, t: &ProbTable) -> f64 {
        match self {
            Measure::D => d_coeff(t),
            Measure::DPrime => d_prime(t),
            Measure::R => correlation_r(t),
            Measure::Lambda => t.odds_ratio(),
            Measure::Q => yules_q(t),
            Measure::MutualInformation => mutual_information(t),
            Measure::Eta(cal) => cal.eta_log(t.log_odds_ratio()),
        }
    }

    /// Evaluates the measure on raw frequencies that may contain zeros.
    pub fn of_cells(&self, p: &[f64; 4]) -> MeasureValue {
        let id = self.id();
        let bounded = |v: Option<f64>| match v {
            None => MeasureValue::undefined(id),
            Some(x) if x.abs() >= 1.0 - BOUNDARY_EPS => MeasureValue::boundary(id, x),
            Some(x) => MeasureValue::defined(id, x),
        };
        match self {
            Measure::D => MeasureValue::defined(id, d_cells(p)),
            Measure::MutualInformation => MeasureValue::defined(id, mi_cells(p)),
            Measure::DPrime => bounded(d_prime_cells(p)),
            Measure::R => bounded(r_cells(p)),
            Measure::Lambda | Measure::Q | Measure::Eta(_) => {
                if has_zero_margin(p) {
                    return MeasureValue::undefined(id);
                }
                let [a, b, c, d] = *p;
                let num_zero = a == 0.0 || d == 0.0;
                let den_zero = b == 0.0 || c == 0.0;
                if num_zero || den_zero {
                    // Positive margins leave exactly one of the two products zero.
                    return match self {
                        Measure::Lambda => MeasureValue::undefined(id),
                        _ => MeasureValue::boundary(id, if den_zero { 1.0 } else { -1.0 }),
                    };
                }
                let log_lambda = (a.ln() + d.ln()) - (b.ln() + c.ln());
                let v = match self {
                    Measure::Lambda => log_lambda.exp(),
                    Measure::Q => q_from_log_lambda(log_lambda),
                    Measure::Eta(cal) => cal.eta_log(log_lambda),
                    _ => unreachable!(),
                };
                MeasureValue::defined(id, v)
            }
        }
    }

    /// How the measure transforms when the table is acted on by `s`.
    pub fn transform(&self, value: f64, s: SymmetryElement) -> f64 {
        match (self, s.sign()) {
            (Measure::MutualInformation, _) | (_, 1) => value,
            (Measure::Lambda, _) => 1.0 / value,
            _ => -value,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
