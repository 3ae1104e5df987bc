//! Shared vocabulary: the PCA local rule (a transition tensor stochastic in
//! its last index), Markov kernels, probability vectors, and plain nonnegative
//! matrices, together with their validation rules.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. Cell values live in `E_kappa = {0, 1, ..., kappa}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for stochasticity checks (row sums, vector sums).
pub const EPS_STOCH: f64 = 1e-12;
/// Target residual for eigenpair computations.
pub const EPS_EIG: f64 = 1e-12;
/// Tolerance for algebraic condition residuals.
pub const EPS_COND: f64 = 1e-9;
/// Tolerance for comparisons against exact enumeration oracles.
pub const EPS_ORACLE: f64 = 1e-10;
/// Relative threshold separating numerical rank from noise.
pub const EPS_RANK: f64 = 1e-8;
/// Iteration cap for power iterations.
pub const MAX_EIG_ITER: usize = 100_000;
/// Largest explicit state space the enumeration routines will allocate.
pub const DEFAULT_STATE_BUDGET: usize = 65_536;

/// Row sums this close to 1 are left untouched by validation, so that
/// re-validating an already-normalized object is bit-identical. The bound is
/// a small multiple of the machine epsilon accumulated over one row.
fn renorm_skip_tol(len: usize) -> f64 {
    16.0 * len as f64 * f64::EPSILON
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("transition tensor shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("t[{a}][{b}][{c}] = {value} is negative")]
    NegativeEntry { a: usize, b: usize, c: usize, value: f64 },
    #[error("t[{a}][{b}][{c}] = {value} is not finite")]
    NonFiniteEntry { a: usize, b: usize, c: usize, value: f64 },
    #[error("row ({a},{b}) sums to {sum}, outside the stochastic tolerance")]
    RowSumViolation { a: usize, b: usize, sum: f64 },
    #[error("kernel row {row} sums to {sum}, outside the stochastic tolerance")]
    KernelRowSum { row: usize, sum: f64 },
    #[error("kernel entry ({row},{col}) = {value} is negative or not finite")]
    KernelBadEntry { row: usize, col: usize, value: f64 },
    #[error("probability vector sums to {sum}, outside the stochastic tolerance")]
    VectorSum { sum: f64 },
    #[error("probability vector entry {index} = {value} is negative or not finite")]
    VectorBadEntry { index: usize, value: f64 },
    #[error("matrix entry ({row},{col}) = {value} is negative or not finite")]
    MatrixBadEntry { row: usize, col: usize, value: f64 },
    #[error("matrix is not primitive: {detail}")]
    NotPrimitive { detail: String },
    #[error("power iteration did not converge within {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("all principal minors of I - P vanish; stationary distribution not identifiable")]
    SingularNormalization,
    #[error("eta[{index}] = 0: the weight vector must have full support")]
    EtaNotFullSupport { index: usize },
    #[error("zero denominator at (a,b,c) = ({a},{b},{c}) while building kernels")]
    ZeroDenominator { a: usize, b: usize, c: usize },
    #[error("(D U)[{a}][{b}] = 0: cannot divide out the pair probability")]
    ZeroPairProbability { a: usize, b: usize },
    #[error("rho is not stationary for M (residual {residual:.3e})")]
    RhoNotStationary { residual: f64 },
    #[error("rho[{index}] = 0: need full support")]
    RhoNotFullSupport { index: usize },
    #[error("expected kappa = {expected}, got {got}")]
    KappaMismatch { expected: usize, got: usize },
    #[error("transition matrix is not positive-rate")]
    NotPositiveRate,
    #[error("state space of size {required} exceeds the budget of {budget}")]
    BudgetExceeded { required: usize, budget: usize },
    #[error("configuration {index} has zero probability; distribution fits need full support")]
    ZeroProbabilityConfig { index: usize },
    #[error("pattern window {k} exceeds ring width {width}")]
    WindowTooLarge { k: usize, width: usize },
    #[error("generator gave up after {attempts} resampling attempts")]
    ResamplingExhausted { attempts: usize },
    #[error("{0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// The local rule of a PCA with two-cell neighborhood: `t(a, b, c)` is the
/// probability that a cell becomes `c` when its left parent reads `a` and its
/// right parent reads `b`. Stored dense row-major; alphabets are tiny.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    kappa: usize,
    t: Vec<f64>,
}

/// Serde image of the on-disk JSON format `{"kappa": k, "t": [[[...]]]}`.
/// Unknown keys are ignored so files may carry auxiliary payloads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawTransitionMatrix {
    pub kappa: usize,
    pub t: Vec<Vec<Vec<f64>>>,
}

/// Validates a raw tensor: shape `(κ+1)^3`, finite nonnegative entries, every
/// `(a,b)` row summing to 1 within `eps_stoch`. Rows inside tolerance are
/// renormalized to sum to 1 exactly (so downstream identities hold to machine
/// precision); validating the output again returns it bit-identically.
pub fn validate_tm(raw: &RawTransitionMatrix, eps_stoch: f64) -> Result<TransitionMatrix> {
    let s = raw.kappa + 1;
    if raw.kappa < 1 {
        return Err(Error::ShapeMismatch(format!(
            "kappa must be at least 1, got {}",
            raw.kappa
        )));
    }
    if raw.t.len() != s {
        return Err(Error::ShapeMismatch(format!(
            "expected {} outer slices, got {}",
            s,
            raw.t.len()
        )));
    }
    let mut flat = Vec::with_capacity(s * s * s);
    for (a, plane) in raw.t.iter().enumerate() {
        if plane.len() != s {
            return Err(Error::ShapeMismatch(format!(
                "slice t[{}] has {} rows, expected {}",
                a,
                plane.len(),
                s
            )));
        }
        for (b, row) in plane.iter().enumerate() {
            if row.len() != s {
                return Err(Error::ShapeMismatch(format!(
                    "row t[{}][{}] has {} entries, expected {}",
                    a,
                    b,
                    row.len(),
                    s
                )));
            }
            flat.extend_from_slice(row);
        }
    }
    TransitionMatrix::new(raw.kappa, flat, eps_stoch)
}

impl TransitionMatrix {
    /// Builds from a flat row-major tensor of length `(κ+1)^3`, applying the
    /// same validation and renormalization policy as [`validate_tm`].
    pub fn new(kappa: usize, mut t: Vec<f64>, eps_stoch: f64) -> Result<Self> {
        let s = kappa + 1;
        if kappa < 1 {
            return Err(Error::ShapeMismatch(format!(
                "kappa must be at least 1, got {kappa}"
            )));
        }
        if t.len() != s * s * s {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                s * s * s,
                t.len()
            )));
        }
        for a in 0..s {
            for b in 0..s {
                for c in 0..s {
                    let v = t[(a * s + b) * s + c];
                    if !v.is_finite() {
                        return Err(Error::NonFiniteEntry { a, b, c, value: v });
                    }
                    if v < 0.0 {
                        return Err(Error::NegativeEntry { a, b, c, value: v });
                    }
                }
            }
        }
        let skip = renorm_skip_tol(s);
        for a in 0..s {
            for b in 0..s {
                let row = &mut t[(a * s + b) * s..(a * s + b + 1) * s];
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() <= skip {
                    continue;
                }
                if (sum - 1.0).abs() < eps_stoch {
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                } else {
                    return Err(Error::RowSumViolation { a, b, sum });
                }
            }
        }
        Ok(TransitionMatrix { kappa, t })
    }

    /// Builds by evaluating `f(a, b, c)` over the whole tensor.
    pub fn from_fn(
        kappa: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
        eps_stoch: f64,
    ) -> Result<Self> {
        let s = kappa + 1;
        let mut t = Vec::with_capacity(s * s * s);
        for a in 0..s {
            for b in 0..s {
                for c in 0..s {
                    t.push(f(a, b, c));
                }
            }
        }
        Self::new(kappa, t, eps_stoch)
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// Alphabet size κ+1.
    pub fn size(&self) -> usize {
        self.kappa + 1
    }

    #[inline]
    pub fn t(&self, a: usize, b: usize, c: usize) -> f64 {
        let s = self.kappa + 1;
        self.t[(a * s + b) * s + c]
    }

    #[inline]
    pub fn row(&self, a: usize, b: usize) -> &[f64] {
        let s = self.kappa + 1;
        &self.t[(a * s + b) * s..(a * s + b + 1) * s]
    }

    pub fn entries(&self) -> &[f64] {
        &self.t
    }

    /// True iff every entry is strictly positive. Structural test, no epsilon:
    /// rule entries are declared parameters, not measurements.
    pub fn is_positive_rate(&self) -> bool {
        self.t.iter().all(|&v| v > 0.0)
    }

    /// True iff `t(a,b,0) > 0` for all parents and `t(0,0,c) > 0` for all
    /// outputs — the weaker positivity floor under which the zigzag analysis
    /// still decides Markovianity.
    pub fn check_cond_tauxg(&self) -> bool {
        let s = self.kappa + 1;
        for a in 0..s {
            for b in 0..s {
                if self.t(a, b, 0) <= 0.0 {
                    return false;
                }
            }
        }
        for c in 0..s {
            if self.t(0, 0, c) <= 0.0 {
                return false;
            }
        }
        true
    }

    /// The rule with the two parents swapped: `t'(a,b,c) = t(b,a,c)`.
    pub fn mirror(&self) -> TransitionMatrix {
        let s = self.kappa + 1;
        let mut t = vec![0.0; s * s * s];
        for a in 0..s {
            for b in 0..s {
                for c in 0..s {
                    t[(a * s + b) * s + c] = self.t(b, a, c);
                }
            }
        }
        TransitionMatrix { kappa: self.kappa, t }
    }

    pub fn to_raw(&self) -> RawTransitionMatrix {
        let s = self.kappa + 1;
        let t = (0..s)
            .map(|a| (0..s).map(|b| self.row(a, b).to_vec()).collect())
            .collect();
        RawTransitionMatrix { kappa: self.kappa, t }
    }

    pub fn to_json(&self) -> String {
        // RawTransitionMatrix has no map keys that could collide and contains
        // only finite floats, so serialization cannot fail.
        serde_json::to_string_pretty(&self.to_raw()).expect("tensor serializes")
    }

    pub fn from_json(s: &str) -> Result<TransitionMatrix> {
        let raw: RawTransitionMatrix = serde_json::from_str(s)
            .map_err(|e| Error::ShapeMismatch(format!("bad transition-matrix JSON: {e}")))?;
        validate_tm(&raw, EPS_STOCH)
    }
}

/// A Markov kernel on `E_kappa`: square matrix with rows summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticKernel {
    kappa: usize,
    m: Vec<f64>,
}

impl StochasticKernel {
    /// Validates a flat row-major matrix of shape `(κ+1)²` under the same
    /// renormalization policy as transition matrices.
    pub fn new(kappa: usize, mut m: Vec<f64>, eps_stoch: f64) -> Result<Self> {
        let s = kappa + 1;
        if m.len() != s * s {
            return Err(Error::ShapeMismatch(format!(
                "expected {} kernel entries, got {}",
                s * s,
                m.len()
            )));
        }
        for row in 0..s {
            for col in 0..s {
                let v = m[row * s + col];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::KernelBadEntry { row, col, value: v });
                }
            }
        }
        let skip = renorm_skip_tol(s);
        for row in 0..s {
            let r = &mut m[row * s..(row + 1) * s];
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() <= skip {
                continue;
            }
            if (sum - 1.0).abs() < eps_stoch {
                for v in r.iter_mut() {
                    *v /= sum;
                }
            } else {
                return Err(Error::KernelRowSum { row, sum });
            }
        }
        Ok(StochasticKernel { kappa, m })
    }

    /// The product kernel with every row equal to `rho`.
    pub fn rank_one(rho: &ProbVector) -> StochasticKernel {
        let s = rho.len();
        let mut m = Vec::with_capacity(s * s);
        for _ in 0..s {
            m.extend_from_slice(rho.as_slice());
        }
        StochasticKernel { kappa: s - 1, m }
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn size(&self) -> usize {
        self.kappa + 1
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[row * (self.kappa + 1) + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        let s = self.kappa + 1;
        &self.m[row * s..(row + 1) * s]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.m
    }

    /// Kernel composition: `(self · other)[i][j] = Σ_c self[i][c]·other[c][j]`.
    pub fn compose(&self, other: &StochasticKernel) -> StochasticKernel {
        let s = self.kappa + 1;
        let m = crate::linalg::mat_mul(&self.m, &other.m, s);
        StochasticKernel { kappa: self.kappa, m }
    }

    /// Entrywise max-norm distance, e.g. for comparing a recovered kernel
    /// against ground truth.
    pub fn inf_distance(&self, other: &StochasticKernel) -> f64 {
        self.m
            .iter()
            .zip(&other.m)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_positive(&self) -> bool {
        self.m.iter().all(|&v| v > 0.0)
    }
}

/// A probability distribution on `E_kappa`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbVector {
    p: Vec<f64>,
}

impl ProbVector {
    pub fn new(mut p: Vec<f64>, eps_stoch: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::ShapeMismatch("empty probability vector".into()));
        }
        for (index, &v) in p.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::VectorBadEntry { index, value: v });
            }
        }
        let sum: f64 = p.iter().sum();
        let skip = renorm_skip_tol(p.len());
        if (sum - 1.0).abs() > skip {
            if (sum - 1.0).abs() < eps_stoch {
                for v in p.iter_mut() {
                    *v /= sum;
                }
            } else {
                return Err(Error::VectorSum { sum });
            }
        }
        Ok(ProbVector { p })
    }

    /// Normalizes an arbitrary nonnegative, not-all-zero vector to sum 1.
    /// Used where the mass comes out of a computation rather than an input.
    pub fn normalized(p: Vec<f64>) -> Result<Self> {
        for (index, &v) in p.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::VectorBadEntry { index, value: v });
            }
        }
        let sum: f64 = p.iter().sum();
        if sum <= 0.0 {
            return Err(Error::VectorSum { sum });
        }
        Ok(ProbVector {
            p: p.into_iter().map(|v| v / sum).collect(),
        })
    }

    pub fn uniform(len: usize) -> ProbVector {
        ProbVector {
            p: vec![1.0 / len as f64; len],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn full_support(&self) -> bool {
        self.p.iter().all(|&v| v > 0.0)
    }

    pub fn inf_distance(&self, other: &ProbVector) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// A square matrix with nonnegative entries; the natural habitat of
/// Perron-Frobenius theory. No stochasticity is assumed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonnegMatrix {
    n: usize,
    a: Vec<f64>,
}

impl NonnegMatrix {
    pub fn new(n: usize, a: Vec<f64>) -> Result<Self> {
        if n == 0 || a.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "expected {}x{} = {} entries, got {}",
                n,
                n,
                n * n,
                a.len()
            )));
        }
        for row in 0..n {
            for col in 0..n {
                let v = a[row * n + col];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::MatrixBadEntry { row, col, value: v });
                }
            }
        }
        Ok(NonnegMatrix { n, a })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut a = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                a.push(f(row, col));
            }
        }
        Self::new(n, a)
    }

    pub fn from_kernel(k: &StochasticKernel) -> NonnegMatrix {
        NonnegMatrix {
            n: k.size(),
            a: k.matrix().to_vec(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.a[row * self.n + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.a[row * self.n..(row + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.a
    }

    pub fn scale(&self, c: f64) -> Result<NonnegMatrix> {
        NonnegMatrix::new(self.n, self.a.iter().map(|v| v * c).collect())
    }
}
