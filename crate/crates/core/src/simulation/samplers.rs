//! Dirichlet and multinomial samplers for 2x2 tables.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Open01};

use crate::tables::{CountTable, DirichletParams, ProbTable};

/// Draws `ln G` for `G ~ Gamma(shape, 1)`.
///
/// Shapes below one use `G = G' U^(1/shape)` with `G' ~ Gamma(shape + 1)`, kept
/// in log space so tiny draws never underflow to zero.
pub fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape");
        let u: f64 = Open01.sample(rng);
        g.sample(rng).ln() + u.ln() / shape
    } else {
        let g = Gamma::new(shape, 1.0).expect("positive shape");
        g.sample(rng).ln()
    }
}

/// Log-weights of one Dirichlet draw, up to a common additive constant.
pub fn dirichlet_log_weights<R: Rng + ?Sized>(alpha: &DirichletParams, rng: &mut R) -> [f64; 4] {
    alpha.values().map(|a| ln_gamma_draw(a, rng))
}

/// Log odds ratio of one Dirichlet draw; needs no normalization.
pub fn dirichlet_log_odds<R: Rng + ?Sized>(alpha: &DirichletParams, rng: &mut R) -> f64 {
    let [a, b, c, d] = dirichlet_log_weights(alpha, rng);
    (a + d) - (b + c)
}

pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &DirichletParams, rng: &mut R) -> ProbTable {
    table_from_log_weights(dirichlet_log_weights(alpha, rng))
}

/// Dirichlet sampler with the gamma distributions built once.
#[derive(Clone, Debug)]
pub struct DirichletSampler {
    /// Per cell: the gamma law and, for shapes below one, the shape used in the boost.
    cells: [(Gamma<f64>, Option<f64>); 4],
}

impl DirichletSampler {
    pub fn new(alpha: &DirichletParams) -> Self {
        let cells = alpha.values().map(|a| {
            if a < 1.0 {
                (Gamma::new(a + 1.0, 1.0).expect("positive shape"), Some(a))
            } else {
                (Gamma::new(a, 1.0).expect("positive shape"), None)
            }
        });
        Self { cells }
    }

    pub fn log_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, (g, boost)) in self.cells.iter().enumerate() {
            out[k] = match boost {
                Some(a) => {
                    let u: f64 = Open01.sample(rng);
                    g.sample(rng).ln() + u.ln() / a
                }
                None => g.sample(rng).ln(),
            };
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ProbTable {
        table_from_log_weights(self.log_weights(rng))
    }
}

fn table_from_log_weights(lw: [f64; 4]) -> ProbTable {
    let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // A weight more than ~745 nats below the largest would round to zero; the
    // floor keeps the table on the open simplex in that practically unreachable case.
    let w = lw.map(|x| (x - top).exp().max(f64::MIN_POSITIVE));
    ProbTable::from_weights(w).expect("weights are positive and finite")
}

/// Multinomial counts by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(t: &ProbTable, n: u64, rng: &mut R) -> CountTable {
    let p = t.cells();
    let mut counts = [0u64; 4];
    let mut left = n;
    let mut mass = 1.0;
    for k in 0..3 {
        if left == 0 {
            break;
        }
        let q = (p[k] / mass).clamp(0.0, 1.0);
        let x = Binomial::new(left, q).expect("valid binomial").sample(rng);
        counts[k] = x;
        left -= x;
        mass -= p[k];
    }
    counts[3] = left;
    CountTable::from_cells(counts).expect("n >= 1")
}
