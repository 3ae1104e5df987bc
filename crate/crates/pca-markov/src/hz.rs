//! Markovianity of the invariant law on the horizontal zigzag.
//!
//! A PCA rule T leaves a zigzag Markov law with kernels (D, U) invariant
//! exactly when T factors through the pair,
//!
//! ```text
//! T(a,b,c) = D[a,c]·U[c,b] / (DU)[a,b]   wherever T(a,b,c) > 0,     (i)
//! DU = UD,                                                          (ii)
//! ```
//!
//! and under a mild positivity floor (`check_cond_tauxg`) the existence of
//! such a pair is decided by a single algebraic identity on T — the
//! single-site Gibbs factorization checked by `check_cond_gibbs1` — plus the
//! commutation of two kernels built canonically from T's spectral data. This
//! module implements that decision pipeline:
//!
//! ```text
//! ν  = stochastic left Perron vector of Y,  Y[i,j] = T(i,i,j)
//! X[d,a] = T(a,a,0)·ν_a / T(a,d,0)
//! (λ, γ, μ) = Perron data of X
//! (D^γ, U^γ) = weighted kernels below with weights η = γ
//! ```
//!
//! and the law itself, when it exists, has one-cell marginal ρ = γ ⊙ μ.

use crate::linalg;
use crate::spectral::{perron, SpectralData};
use crate::types::{
    Error, NonnegMatrix, ProbVector, Result, StochasticKernel, TransitionMatrix, EPS_STOCH,
    MAX_EIG_ITER,
};

/// Floor under which both sides of a product identity count as zero.
const RESIDUAL_FLOOR: f64 = 1e-300;

/// A constructed invariant zigzag law: the kernel pair, its one-cell marginal
/// ρ, and the spectral diagnostics that produced them. `commutator_norm` is
/// ‖D·U − U·D‖_∞ for the returned pair (small iff the law is invariant on the
/// infinite zigzag; the cyclic analysis tolerates larger values).
#[derive(Debug, Clone)]
pub struct HzSolution {
    pub d: StochasticKernel,
    pub u: StochasticKernel,
    pub rho: ProbVector,
    pub gamma: ProbVector,
    pub nu: ProbVector,
    pub lambda: f64,
    pub commutator_norm: f64,
}

/// Why a rule was proven non-Markov.
#[derive(Debug, Clone, PartialEq)]
pub enum NotMarkovReason {
    /// The single-site factorization identity fails; `witness` is the
    /// maximizing triple (a, b, c).
    Gibbs1 {
        residual: f64,
        witness: (usize, usize, usize),
    },
    /// The canonical kernels do not commute.
    Commutation { commutator_norm: f64 },
    /// Some diagonal of (DU)^k disagrees with (UD)^k at the reported k.
    DiagPowers { residual: f64, k: usize },
}

impl std::fmt::Display for NotMarkovReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NotMarkovReason::Gibbs1 { residual, witness } => write!(
                f,
                "single-site factorization fails at (a,b,c)=({},{},{}), residual {residual:e}",
                witness.0, witness.1, witness.2
            ),
            NotMarkovReason::Commutation { commutator_norm } => {
                write!(f, "kernels do not commute, |DU-UD| = {commutator_norm:e}")
            }
            NotMarkovReason::DiagPowers { residual, k } => write!(
                f,
                "diagonal of (DU)^{k} differs from (UD)^{k} by {residual:e}"
            ),
        }
    }
}

/// Outcome of the zigzag analysis. `Inconclusive` is reserved for inputs
/// outside the hypotheses of the decision criteria (the positivity floor
/// fails), where neither verdict would be justified.
#[derive(Debug, Clone)]
pub enum HzVerdict {
    Markov(HzSolution),
    NotMarkov(NotMarkovReason),
    Inconclusive(String),
}

impl HzVerdict {
    pub fn solution(&self) -> Option<&HzSolution> {
        match self {
            HzVerdict::Markov(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_markov(&self) -> bool {
        matches!(self, HzVerdict::Markov(_))
    }
}

fn rel_residual(lhs: f64, rhs: f64) -> f64 {
    let denom = lhs.max(rhs);
    if denom < RESIDUAL_FLOOR {
        0.0
    } else {
        (lhs - rhs).abs() / denom
    }
}

/// Single-site Gibbs factorization test: T is determined by its boundary
/// slices through
///
///   T(a,b,c) · T(a,0,0)·T(0,b,0)·T(0,0,c) = T(0,0,0)·T(a,b,0)·T(a,0,c)·T(0,b,c).
///
/// Returns (pass, worst relative residual, maximizing triple on failure).
/// Needs the positivity floor so the left factors are nonzero.
pub fn check_cond_gibbs1(
    tm: &TransitionMatrix,
    eps_cond: f64,
) -> Result<(bool, f64, Option<(usize, usize, usize)>)> {
    let s = tm.size();
    // all of T(a,0,0), T(0,b,0) are instances of T(a,b,0); T(0,0,c) is its own clause
    for a in 0..s {
        for b in 0..s {
            if tm.t(a, b, 0) <= 0.0 {
                return Err(Error::ZeroDenominator { a, b, c: 0 });
            }
        }
    }
    for c in 0..s {
        if tm.t(0, 0, c) <= 0.0 {
            return Err(Error::ZeroDenominator { a: 0, b: 0, c });
        }
    }
    let t000 = tm.t(0, 0, 0);
    let mut worst = 0.0f64;
    let mut witness = (0, 0, 0);
    for a in 0..s {
        for b in 0..s {
            for c in 0..s {
                // cross-multiplied form keeps both sides polynomial in T
                let lhs = tm.t(a, b, c) * tm.t(a, 0, 0) * tm.t(0, b, 0) * tm.t(0, 0, c);
                let rhs = t000 * tm.t(a, b, 0) * tm.t(a, 0, c) * tm.t(0, b, c);
                let r = rel_residual(lhs, rhs);
                if r > worst {
                    worst = r;
                    witness = (a, b, c);
                }
            }
        }
    }
    let pass = worst <= eps_cond;
    Ok((pass, worst, if pass { None } else { Some(witness) }))
}

/// The general Gibbs factorization: for all a,a',b,b',c,c',
///
///   T(a',b',c')·T(a,b',c)·T(a,b,c')·T(a',b,c)
/// ```text
/// = T(a,b,c)·T(a,b',c')·T(a',b',c)·T(a',b,c').
/// ```
///
/// Evaluable with no positivity assumption; equivalent to the single-site
/// form on positive-rate rules. Returns (pass, worst relative residual).
pub fn check_cond_gibbs_g(tm: &TransitionMatrix, eps_cond: f64) -> (bool, f64) {
    let s = tm.size();
    let mut worst = 0.0f64;
    for a in 0..s {
        for ap in 0..s {
            for b in 0..s {
                for bp in 0..s {
                    for c in 0..s {
                        for cp in 0..s {
                            let lhs = tm.t(ap, bp, cp)
                                * tm.t(a, bp, c)
                                * tm.t(a, b, cp)
                                * tm.t(ap, b, c);
                            let rhs = tm.t(a, b, c)
                                * tm.t(a, bp, cp)
                                * tm.t(ap, bp, c)
                                * tm.t(ap, b, cp);
                            let r = rel_residual(lhs, rhs);
                            if r > worst {
                                worst = r;
                            }
                        }
                    }
                }
            }
        }
    }
    (worst <= eps_cond, worst)
}

/// Stationary law ν of the diagonal-reading chain Y[i,j] = T(i,i,j).
pub fn build_nu(tm: &TransitionMatrix) -> Result<ProbVector> {
    let s = tm.size();
    let y = NonnegMatrix::from_fn(s, |i, j| tm.t(i, i, j))?;
    let sd = perron(&y, crate::types::EPS_EIG, MAX_EIG_ITER)?;
    Ok(sd.left)
}

/// The weight matrix X[d,a] = T(a,a,0)·ν_a / T(a,d,0) whose left Perron
/// vector γ solves Σ_d γ_d/T(a,d,0) = λ·γ_a/(T(a,a,0)·ν_a).
pub fn build_x(tm: &TransitionMatrix, nu: &ProbVector) -> Result<NonnegMatrix> {
    let s = tm.size();
    if nu.len() != s {
        return Err(Error::KappaMismatch {
            expected: tm.kappa(),
            got: nu.len() - 1,
        });
    }
    for a in 0..s {
        for d in 0..s {
            if tm.t(a, d, 0) <= 0.0 {
                return Err(Error::ZeroDenominator { a, b: d, c: 0 });
            }
        }
    }
    NonnegMatrix::from_fn(s, |d, a| tm.t(a, a, 0) * nu.get(a) / tm.t(a, d, 0))
}

/// The η-weighted kernel pair
///
///   D^η[a,c] = Σ_ℓ (η_ℓ/T(a,ℓ,0))·T(a,ℓ,c)  /  Σ_b' η_b'/T(a,b',0)
///   U^η[c,b] = (η_b/T(0,b,0))·T(0,b,c)  /  Σ_b' (η_b'/T(0,b',0))·T(0,b',c)
///
/// Every full-support η yields a pair satisfying the factorization (i) when
/// the single-site Gibbs identity holds; η = γ is the only candidate that can
/// also commute. Rows sum to 1 by construction. A vanishing U-row denominator
/// means T(0,·,c) ≡ 0 against the positivity floor, which is reported rather
/// than patched: the floor already guarantees it cannot happen for validated
/// inputs, and entire zero columns of T surface as exact zero entries of U^η
/// with the rest of the row correctly renormalized by the shared denominator.
pub fn build_kernels_eta(
    tm: &TransitionMatrix,
    eta: &ProbVector,
) -> Result<(StochasticKernel, StochasticKernel)> {
    let s = tm.size();
    if eta.len() != s {
        return Err(Error::KappaMismatch {
            expected: tm.kappa(),
            got: eta.len() - 1,
        });
    }
    for (index, &v) in eta.as_slice().iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::EtaNotFullSupport { index });
        }
    }

    // weights η_ℓ / T(a,ℓ,0) per left parent a
    let mut w = vec![0.0; s * s];
    for a in 0..s {
        for l in 0..s {
            let t = tm.t(a, l, 0);
            if t <= 0.0 {
                return Err(Error::ZeroDenominator { a, b: l, c: 0 });
            }
            w[a * s + l] = eta.get(l) / t;
        }
    }

    let mut d = vec![0.0; s * s];
    for a in 0..s {
        let denom: f64 = (0..s).map(|l| w[a * s + l]).sum();
        for c in 0..s {
            let num: f64 = (0..s).map(|l| w[a * s + l] * tm.t(a, l, c)).sum();
            d[a * s + c] = num / denom;
        }
    }

    let mut u = vec![0.0; s * s];
    for c in 0..s {
        let num: Vec<f64> = (0..s).map(|b| w[b] * tm.t(0, b, c)).collect(); // w row a=0
        let denom: f64 = num.iter().sum();
        if denom <= 0.0 {
            return Err(Error::ZeroDenominator { a: 0, b: 0, c });
        }
        for b in 0..s {
            u[c * s + b] = num[b] / denom;
        }
    }

    Ok((
        StochasticKernel::new(tm.kappa(), d, EPS_STOCH)?,
        StochasticKernel::new(tm.kappa(), u, EPS_STOCH)?,
    ))
}

/// The rule driven by a kernel pair: T(a,b,c) = D[a,c]·U[c,b]/(DU)[a,b].
/// Defined whenever DU has no zero entry.
pub fn kernel_pair_to_tm(d: &StochasticKernel, u: &StochasticKernel) -> Result<TransitionMatrix> {
    if d.kappa() != u.kappa() {
        return Err(Error::KappaMismatch {
            expected: d.kappa(),
            got: u.kappa(),
        });
    }
    let s = d.size();
    let du = d.compose(u);
    for a in 0..s {
        for b in 0..s {
            if du.get(a, b) <= 0.0 {
                return Err(Error::ZeroPairProbability { a, b });
            }
        }
    }
    TransitionMatrix::from_fn(
        d.kappa(),
        |a, b, c| d.get(a, c) * u.get(c, b) / du.get(a, b),
        EPS_STOCH,
    )
}

/// The reversed-role rule T'(a,b,c) = U[a,c]·D[c,b]/(UD)[a,b]: if (D,U,T) is
/// an invariant triple then so is (U,D,T').
pub fn time_reversal_tm(d: &StochasticKernel, u: &StochasticKernel) -> Result<TransitionMatrix> {
    kernel_pair_to_tm(u, d)
}

/// Worst residual of the factorization condition (i) alone: relative where
/// T(a,b,c) > 0, and the absolute size of D[a,c]·U[c,b] where T(a,b,c) = 0.
pub fn cond1_residual(
    tm: &TransitionMatrix,
    d: &StochasticKernel,
    u: &StochasticKernel,
) -> Result<f64> {
    if tm.kappa() != d.kappa() || d.kappa() != u.kappa() {
        return Err(Error::KappaMismatch {
            expected: tm.kappa(),
            got: d.kappa().min(u.kappa()),
        });
    }
    let s = tm.size();
    let du = d.compose(u);
    for a in 0..s {
        for b in 0..s {
            if du.get(a, b) <= 0.0 {
                return Err(Error::ZeroPairProbability { a, b });
            }
        }
    }
    let mut worst = 0.0f64;
    for a in 0..s {
        for b in 0..s {
            for c in 0..s {
                let t = tm.t(a, b, c);
                let prod = d.get(a, c) * u.get(c, b);
                let r = if t > 0.0 {
                    rel_residual(t, prod / du.get(a, b))
                } else {
                    prod
                };
                if r > worst {
                    worst = r;
                }
            }
        }
    }
    Ok(worst)
}

pub fn commutator_norm(d: &StochasticKernel, u: &StochasticKernel) -> f64 {
    let s = d.size();
    let du = d.compose(u);
    let ud = u.compose(d);
    linalg::mat_inf_distance(&du.matrix()[..s * s], &ud.matrix()[..s * s])
}

/// Checks that (d, u) is an invariant pair for tm on the infinite zigzag:
/// the factorization condition (i) and commutation (ii), both within
/// eps_cond.
pub fn verify_invariant_pair(
    tm: &TransitionMatrix,
    d: &StochasticKernel,
    u: &StochasticKernel,
    eps_cond: f64,
) -> Result<bool> {
    let c1 = cond1_residual(tm, d, u)?;
    Ok(c1 <= eps_cond && commutator_norm(d, u) <= eps_cond)
}

/// Everything the γ-pipeline produces, whether or not the commutation test
/// ultimately passes. Useful on its own: the diagonal identity
/// (D^γU^γ)_{a,a} = (U^γD^γ)_{a,a} holds whenever the single-site Gibbs
/// identity does, even for non-commuting pairs.
#[derive(Debug, Clone)]
pub struct GammaPipeline {
    pub nu: ProbVector,
    pub x: NonnegMatrix,
    pub spectral: SpectralData,
    pub gamma: ProbVector,
    pub mu: Vec<f64>,
    pub lambda: f64,
    pub d: StochasticKernel,
    pub u: StochasticKernel,
    pub rho: ProbVector,
    pub commutator_norm: f64,
}

/// Runs ν → X → (λ, γ, μ) → (D^γ, U^γ) and assembles ρ = γ ⊙ μ.
/// Requires the positivity floor; does not itself test any condition.
pub fn gamma_pipeline(tm: &TransitionMatrix, eps_eig: f64) -> Result<GammaPipeline> {
    let nu = build_nu(tm)?;
    let x = build_x(tm, &nu)?;
    let sd = perron(&x, eps_eig, MAX_EIG_ITER)?;
    let gamma = sd.left.clone();
    let mu = sd.right.clone();
    let lambda = sd.lambda;
    let (d, u) = build_kernels_eta(tm, &gamma)?;
    // left·right = 1 from the eigensolver, so γ ⊙ μ sums to 1 already
    let rho = ProbVector::new(
        gamma
            .as_slice()
            .iter()
            .zip(&mu)
            .map(|(g, m)| g * m)
            .collect(),
        EPS_STOCH,
    )?;
    let commutator_norm = commutator_norm(&d, &u);
    Ok(GammaPipeline {
        nu,
        x,
        spectral: sd,
        gamma,
        mu,
        lambda,
        d,
        u,
        rho,
        commutator_norm,
    })
}

/// Decides whether tm admits an invariant zigzag Markov law, and constructs
/// it when it does.
///
/// Outside the positivity floor the verdict is `Inconclusive` (zero-rate
/// rules can have Markov invariants this pipeline cannot see). Inside it,
/// the law exists iff the single-site Gibbs identity holds and the canonical
/// kernels commute, so the verdict is exact.
pub fn analyze_hz(tm: &TransitionMatrix, eps_cond: f64, eps_eig: f64) -> Result<HzVerdict> {
    if !tm.check_cond_tauxg() {
        return Ok(HzVerdict::Inconclusive(
            "positivity floor fails: some T(a,b,0) or T(0,0,c) is zero; \
             the zigzag criteria do not apply"
                .into(),
        ));
    }
    let (pass, residual, witness) = check_cond_gibbs1(tm, eps_cond)?;
    if !pass {
        return Ok(HzVerdict::NotMarkov(NotMarkovReason::Gibbs1 {
            residual,
            witness: witness.unwrap_or((0, 0, 0)),
        }));
    }
    let p = gamma_pipeline(tm, eps_eig)?;
    if p.commutator_norm > eps_cond {
        return Ok(HzVerdict::NotMarkov(NotMarkovReason::Commutation {
            commutator_norm: p.commutator_norm,
        }));
    }
    Ok(HzVerdict::Markov(HzSolution {
        d: p.d,
        u: p.u,
        rho: p.rho,
        gamma: p.gamma,
        nu: p.nu,
        lambda: p.lambda,
        commutator_norm: p.commutator_norm,
    }))
}
