//! Markovianity on the cyclic zigzag of finite circumference n.
//!
//! On a cycle the full commutation DU = UD is more than is needed: the
//! invariance of the (D,U)-law only constrains the diagonals of the first
//! few alternating products,
//!
//! ```text
//! Diagonal((DU)^k) = Diagonal((UD)^k)   for 1 ≤ k ≤ min(κ+1, n),
//! ```
//!
//! and κ+1 values of k suffice to cover every n at once. Note the trace
//! identity Trace((DU)^k) = Trace((UD)^k) holds for *any* pair by cyclicity
//! of the trace, so matching traces prove nothing — the per-entry diagonal
//! comparison here is strictly stronger.

use crate::hz::{
    check_cond_gibbs1, cond1_residual, gamma_pipeline, HzSolution, HzVerdict, NotMarkovReason,
};
use crate::types::{Error, Result, StochasticKernel, TransitionMatrix};

/// Compares the diagonals of (DU)^k and (UD)^k for 1 ≤ k ≤ kmax.
/// Returns (pass, worst absolute residual, k attaining it).
///
/// Panics if the kernels disagree on κ or kmax = 0 (caller bugs).
pub fn check_diag_powers(
    d: &StochasticKernel,
    u: &StochasticKernel,
    kmax: usize,
    eps_cond: f64,
) -> (bool, f64, usize) {
    assert_eq!(d.kappa(), u.kappa(), "kernel sizes must match");
    assert!(kmax >= 1, "need at least one power to compare");
    let s = d.size();
    let du = d.compose(u);
    let ud = u.compose(d);
    let mut pow_du = du.clone();
    let mut pow_ud = ud.clone();
    let mut worst = 0.0f64;
    let mut worst_k = 1;
    for k in 1..=kmax {
        if k > 1 {
            pow_du = pow_du.compose(&du);
            pow_ud = pow_ud.compose(&ud);
        }
        let mut diag_gap = 0.0f64;
        for a in 0..s {
            diag_gap = diag_gap.max((pow_du.get(a, a) - pow_ud.get(a, a)).abs());
        }
        if diag_gap > worst {
            worst = diag_gap;
            worst_k = k;
        }
    }
    (worst <= eps_cond, worst, worst_k)
}

/// Decides whether tm admits an invariant cyclic-zigzag Markov law.
///
/// Same spectral pipeline as the infinite-zigzag analysis, but the
/// commutation test is replaced by the diagonal-power comparison with
/// kmax = κ+1, or min(κ+1, n) when a specific circumference n is given.
/// The returned solution's `commutator_norm` may legitimately exceed
/// eps_cond here: cyclic invariance does not require commutation.
pub fn analyze_hz_cyclic(
    tm: &TransitionMatrix,
    n: Option<usize>,
    eps_cond: f64,
    eps_eig: f64,
) -> Result<HzVerdict> {
    if n == Some(0) {
        return Err(Error::InvalidParameter(
            "cycle length must be at least 1".into(),
        ));
    }
    if !tm.check_cond_tauxg() {
        return Ok(HzVerdict::Inconclusive(
            "positivity floor fails: some T(a,b,0) or T(0,0,c) is zero; \
             the cyclic zigzag criteria do not apply"
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
    let kmax = match n {
        Some(n) => n.min(tm.kappa() + 1),
        None => tm.kappa() + 1,
    };
    let (ok, worst, worst_k) = check_diag_powers(&p.d, &p.u, kmax, eps_cond);
    if !ok {
        return Ok(HzVerdict::NotMarkov(NotMarkovReason::DiagPowers {
            residual: worst,
            k: worst_k,
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

/// Checks that (d, u) is an invariant pair for tm on the cycle of length n:
/// the factorization condition plus diagonal powers up to min(κ+1, n).
pub fn verify_invariant_pair_cyclic(
    tm: &TransitionMatrix,
    d: &StochasticKernel,
    u: &StochasticKernel,
    n: usize,
    eps_cond: f64,
) -> Result<bool> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "cycle length must be at least 1".into(),
        ));
    }
    let c1 = cond1_residual(tm, d, u)?;
    let kmax = n.min(tm.kappa() + 1);
    let (diag_ok, _, _) = check_diag_powers(d, u, kmax, eps_cond);
    Ok(c1 <= eps_cond && diag_ok)
}
