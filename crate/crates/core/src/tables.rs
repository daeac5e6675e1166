//! 2x2 haplotype tables, their dihedral symmetries and the selection group action.
//!
//! Cells are stored row-major as `[p00, p01, p10, p11]`: the first index is the
//! allele of the first marker, the second index the allele of the second marker.

use crate::error::{LdError, Result};

/// Largest deviation of the cell sum from 1 that the constructor silently renormalizes.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Cells below this value switch odds-ratio evaluation to log space.
const LOG_SPACE_THRESHOLD: f64 = 1e-12;

/// A point of the open simplex of 2x2 probability tables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbTable {
    p: [f64; 4],
}

impl ProbTable {
    /// Builds a table from probabilities that already sum to one (up to
    /// [`SUM_TOLERANCE`]); small deviations are renormalized away.
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        let p = [p00, p01, p10, p11];
        check_positive(&p)?;
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(LdError::SumMismatch(sum));
        }
        Ok(Self { p: p.map(|x| x / sum) })
    }

    /// Builds a table proportional to four positive weights.
    pub fn from_weights(w: [f64; 4]) -> Result<Self> {
        check_positive(&w)?;
        let sum: f64 = w.iter().sum();
        if !sum.is_finite() {
            return Err(LdError::NonPositiveEntry(sum));
        }
        Ok(Self { p: w.map(|x| x / sum) })
    }

    /// Table with all marginals 1/2 and odds ratio `lambda`: the canonical
    /// representative of the selection orbit of every table with that odds ratio.
    pub fn canonical_representative(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(LdError::NonPositiveLambda(lambda));
        }
        let s = lambda.sqrt();
        let off = 1.0 / (2.0 * (1.0 + s));
        let diag = s / (2.0 * (1.0 + s));
        Ok(Self { p: [diag, off, off, diag] })
    }

    pub fn cells(&self) -> [f64; 4] {
        self.p
    }

    pub fn p00(&self) -> f64 {
        self.p[0]
    }

    pub fn p01(&self) -> f64 {
        self.p[1]
    }

    pub fn p10(&self) -> f64 {
        self.p[2]
    }

    pub fn p11(&self) -> f64 {
        self.p[3]
    }

    /// Row and column sums `(p0., p1., p.0, p.1)`.
    pub fn marginals(&self) -> Marginals {
        let [a, b, c, d] = self.p;
        Marginals {
            row0: a + b,
            row1: c + d,
            col0: a + c,
            col1: b + d,
        }
    }

    /// Odds ratio `p00 p11 / (p01 p10)`.
    pub fn odds_ratio(&self) -> f64 {
        let [a, b, c, d] = self.p;
        if self.p.iter().any(|&x| x < LOG_SPACE_THRESHOLD) {
            return ((a.ln() + d.ln()) - (b.ln() + c.ln())).exp();
        }
        (a / b) * (d / c)
    }

    /// Natural log of the odds ratio; consistent with [`ProbTable::odds_ratio`] so
    /// that tables with bitwise-equal odds ratios above one get equal log odds
    /// ratios, and exactly negated by a row or column swap.
    pub fn log_odds_ratio(&self) -> f64 {
        let [a, b, c, d] = self.p;
        if self.p.iter().any(|&x| x < LOG_SPACE_THRESHOLD) {
            return (a.ln() + d.ln()) - (b.ln() + c.ln());
        }
        let r = (a / b) * (d / c);
        if r >= 1.0 {
            r.ln()
        } else {
            -((b / a) * (c / d)).ln()
        }
    }

    /// Applies one of the eight dihedral symmetries of the table.
    pub fn apply_symmetry(&self, s: SymmetryElement) -> Self {
        Self { p: s.permute(self.p) }
    }

    /// Selection action `g(mu, nu)`: scales the first row by `mu`, the first
    /// column by `nu`, and renormalizes.
    pub fn selection_act(&self, mu: f64, nu: f64) -> Result<Self> {
        if !(mu > 0.0 && nu > 0.0) || !mu.is_finite() || !nu.is_finite() {
            return Err(LdError::NonPositiveScale { mu, nu });
        }
        let [a, b, c, d] = self.p;
        Self::from_weights([mu * nu * a, mu * b, nu * c, d])
    }

    /// Scale factors that map this table onto its canonical representative.
    pub fn canonical_scales(&self) -> (f64, f64) {
        let [a, b, c, d] = self.p;
        ((d * c / (a * b)).sqrt(), (d * b / (a * c)).sqrt())
    }
}

fn check_positive(p: &[f64; 4]) -> Result<()> {
    match p.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        Some(&x) => Err(LdError::NonPositiveEntry(x)),
        None => Ok(()),
    }
}

/// Allele frequencies of the two markers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marginals {
    pub row0: f64,
    pub row1: f64,
    pub col0: f64,
    pub col1: f64,
}

impl Marginals {
    /// Minor allele frequency of the row marker.
    pub fn row_minor(&self) -> f64 {
        self.row0.min(self.row1)
    }

    /// Minor allele frequency of the column marker.
    pub fn col_minor(&self) -> f64 {
        self.col0.min(self.col1)
    }
}

/// Observed haplotype counts `[n00, n01, n10, n11]` with at least one observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CountTable {
    n: [u64; 4],
}

impl CountTable {
    pub fn new(n00: u64, n01: u64, n10: u64, n11: u64) -> Result<Self> {
        Self::from_cells([n00, n01, n10, n11])
    }

    pub fn from_cells(n: [u64; 4]) -> Result<Self> {
        if n.iter().sum::<u64>() == 0 {
            return Err(LdError::EmptyCountTable);
        }
        Ok(Self { n })
    }

    pub fn cells(&self) -> [u64; 4] {
        self.n
    }

    pub fn total(&self) -> u64 {
        self.n.iter().sum()
    }

    pub fn row0(&self) -> u64 {
        self.n[0] + self.n[1]
    }

    pub fn col0(&self) -> u64 {
        self.n[0] + self.n[2]
    }

    pub fn has_zero_cell(&self) -> bool {
        self.n.contains(&0)
    }

    pub fn has_zero_marginal(&self) -> bool {
        let [a, b, c, d] = self.n;
        a + b == 0 || c + d == 0 || a + c == 0 || b + d == 0
    }

    pub fn frequencies(&self) -> [f64; 4] {
        let total = self.total() as f64;
        self.n.map(|x| x as f64 / total)
    }

    pub fn apply_symmetry(&self, s: SymmetryElement) -> Self {
        Self { n: s.permute(self.n) }
    }

    /// Semi-naive odds ratio with pseudo-counts:
    /// `(n00 + a00)(n11 + a11) / ((n01 + a01)(n10 + a10))`.
    pub fn odds_ratio_hat(&self, alpha: &DirichletParams) -> f64 {
        let [a, b, c, d] = self.n.map(|x| x as f64);
        let [aa, ab, ac, ad] = alpha.values();
        ((a + aa) / (b + ab)) * ((d + ad) / (c + ac))
    }
}

/// Dirichlet concentrations `[a00, a01, a10, a11]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirichletParams {
    a: [f64; 4],
}

impl DirichletParams {
    pub fn new(a: [f64; 4]) -> Result<Self> {
        if let Some(&x) = a.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return Err(LdError::InvalidAlpha(x));
        }
        Ok(Self { a })
    }

    pub fn symmetric(alpha: f64) -> Result<Self> {
        Self::new([alpha; 4])
    }

    pub fn values(&self) -> [f64; 4] {
        self.a
    }

    pub fn total(&self) -> f64 {
        self.a.iter().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.a.iter().all(|&x| x == self.a[0])
    }

    /// The common concentration when symmetric.
    pub fn symmetric_value(&self) -> Option<f64> {
        self.is_symmetric().then_some(self.a[0])
    }

    /// `ln B(alpha) = sum ln Gamma(a_ij) - ln Gamma(sum a_ij)`.
    pub fn ln_beta(&self) -> f64 {
        use statrs::function::gamma::ln_gamma;
        self.a.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(self.total())
    }

    /// Posterior parameters `alpha + n`.
    pub fn posterior(&self, counts: &CountTable) -> Self {
        let n = counts.cells();
        Self {
            a: [0, 1, 2, 3].map(|k| self.a[k] + n[k] as f64),
        }
    }
}

/// The eight symmetries of a 2x2 table generated by transposition (swapping
/// the markers) and row/column swaps (swapping the alleles of one marker).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymmetryElement {
    Identity,
    Transpose,
    SwapRows,
    SwapCols,
    SwapBoth,
    /// Reflection across the anti-diagonal.
    AntiTranspose,
    /// Quarter turn: transpose, then swap columns.
    RotateCw,
    /// Quarter turn: transpose, then swap rows.
    RotateCcw,
}

impl SymmetryElement {
    pub const ALL: [SymmetryElement; 8] = [
        SymmetryElement::Identity,
        SymmetryElement::Transpose,
        SymmetryElement::SwapRows,
        SymmetryElement::SwapCols,
        SymmetryElement::SwapBoth,
        SymmetryElement::AntiTranspose,
        SymmetryElement::RotateCw,
        SymmetryElement::RotateCcw,
    ];

    /// Source cell for each destination cell: `out[k] = in[perm[k]]`.
    fn permutation(self) -> [usize; 4] {
        match self {
            SymmetryElement::Identity => [0, 1, 2, 3],
            SymmetryElement::Transpose => [0, 2, 1, 3],
            SymmetryElement::SwapRows => [2, 3, 0, 1],
            SymmetryElement::SwapCols => [1, 0, 3, 2],
            SymmetryElement::SwapBoth => [3, 2, 1, 0],
            SymmetryElement::AntiTranspose => [3, 1, 2, 0],
            SymmetryElement::RotateCw => [2, 0, 3, 1],
            SymmetryElement::RotateCcw => [1, 3, 0, 2],
        }
    }

    fn from_permutation(perm: [usize; 4]) -> Self {
        Self::ALL
            .into_iter()
            .find(|s| s.permutation() == perm)
            .expect("dihedral group is closed under composition")
    }

    pub fn permute<T: Copy>(self, cells: [T; 4]) -> [T; 4] {
        let perm = self.permutation();
        [0, 1, 2, 3].map(|k| cells[perm[k]])
    }

    /// `self.compose(other)` applies `other` first, then `self`.
    pub fn compose(self, other: SymmetryElement) -> SymmetryElement {
        let a = self.permutation();
        let b = other.permutation();
        Self::from_permutation([0, 1, 2, 3].map(|k| b[a[k]]))
    }

    pub fn inverse(self) -> SymmetryElement {
        Self::ALL
            .into_iter()
            .find(|&s| s.compose(self) == SymmetryElement::Identity)
            .expect("every group element has an inverse")
    }

    /// +1 for elements that keep allele orientation, -1 for those that swap
    /// the alleles of exactly one marker.
    pub fn sign(self) -> i8 {
        match self {
            SymmetryElement::Identity
            | SymmetryElement::Transpose
            | SymmetryElement::SwapBoth
            | SymmetryElement::AntiTranspose => 1,
            SymmetryElement::SwapRows
            | SymmetryElement::SwapCols
            | SymmetryElement::RotateCw
            | SymmetryElement::RotateCcw => -1,
        }
    }
}
