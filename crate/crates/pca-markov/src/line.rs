//! Markov invariance of the PCA on the line H and the cycle H(n).
//!
//! The workhorse is the family of weighted matrices
//!
//! ```text
//! Q_x[i,j] = sqrt(ρ_i)/sqrt(ρ_j) · M[i,j] · T(i,j,x),
//! ```
//!
//! through which invariance of the (ρ, M) Markov law becomes a family of
//! scalar identities: on the line,
//!
//! ```text
//! ρ_{x_1} · Π_j M[x_j, x_{j+1}]  =  ρ^{1/2} · Q_{x_1}···Q_{x_m} · ᵗρ^{1/2}
//! ```
//!
//! for every finite word, and on the cycle of length n the cyclic product
//! Π M[x_j, x_{j+1 mod n}] must equal Trace(Q_{x_1}···Q_{x_n}) — where the
//! ρ-factors telescope away entirely. A dimension-counting argument — the
//! span of the partial products stabilizes after at most κ+2 letters — caps
//! the word length that ever needs checking, which makes the line test
//! finite.

use crate::hz::analyze_hz;
use crate::linalg;
use crate::spectral::perron;
use crate::types::{
    Error, NonnegMatrix, ProbVector, Result, StochasticKernel, TransitionMatrix,
    DEFAULT_STATE_BUDGET, EPS_COND, EPS_EIG, EPS_RANK, EPS_STOCH, MAX_EIG_ITER,
};

/// ρ produced by the spectral pipeline carries a few hundred ulps of
/// eigensolver drift, so the stationarity gate sits at condition tolerance,
/// not eigen tolerance.
const RHO_STATIONARY_TOL: f64 = 1e-9;

/// The matrices Q_x together with the square-root weights that build them.
#[derive(Debug, Clone)]
pub struct QFamily {
    pub kappa: usize,
    pub rho: ProbVector,
    pub rho_half: Vec<f64>,
    pub q: Vec<NonnegMatrix>,
}

pub fn build_q_family(
    tm: &TransitionMatrix,
    m: &StochasticKernel,
    rho: &ProbVector,
) -> Result<QFamily> {
    let s = tm.size();
    if m.size() != s || rho.len() != s {
        return Err(Error::KappaMismatch {
            expected: tm.kappa(),
            got: m.size().min(rho.len()) - 1,
        });
    }
    for (index, &v) in rho.as_slice().iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::RhoNotFullSupport { index });
        }
    }
    let rho_half: Vec<f64> = rho.as_slice().iter().map(|v| v.sqrt()).collect();
    let q = (0..s)
        .map(|x| {
            NonnegMatrix::from_fn(s, |i, j| rho_half[i] / rho_half[j] * m.get(i, j) * tm.t(i, j, x))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QFamily {
        kappa: tm.kappa(),
        rho: rho.clone(),
        rho_half,
        q,
    })
}

/// Result of a word scan: the verdict, the lexicographically first word
/// attaining the worst residual, and that residual.
#[derive(Debug, Clone, PartialEq)]
pub struct LineCheck {
    pub pass: bool,
    pub worst_word: Vec<usize>,
    pub worst_residual: f64,
}

fn stationarity_residual(m: &StochasticKernel, rho: &ProbVector) -> f64 {
    let s = m.size();
    let img = linalg::vec_mat(rho.as_slice(), m.matrix(), s);
    linalg::inf_norm_diff(&img, rho.as_slice())
}

/// Line invariance of the (ρ, M) law, words up to length κ+2 — enough, by
/// the dimension argument, to decide all lengths.
pub fn check_line_invariance(
    tm: &TransitionMatrix,
    m: &StochasticKernel,
    rho: &ProbVector,
    eps_cond: f64,
) -> Result<LineCheck> {
    check_line_invariance_to_depth(tm, m, rho, eps_cond, tm.kappa() + 2)
}

/// Same scan with an explicit word-length cap, used to witness that longer
/// words add no violations.
///
/// Evaluated in the residual form: for the word (x_1, ..., x_m), m ≥ 2,
///
/// ```text
/// v = ρ^{1/2}·Q_{x_1}/ρ_{x_1} − (M[x_1,x_2]/ρ_{x_2})·ρ^{1/2}
/// residual = | v · Q_{x_2}···Q_{x_m} · ᵗρ^{1/2} |
/// ```
///
/// plus the m = 1 base case |ρ^{1/2}·Q_x·ᵗρ^{1/2} − ρ_x|. Zero residuals at
/// every depth are algebraically equivalent to the direct product identity
/// (induction on m), with better conditioning: each residual is measured
/// against the previous depth rather than against an accumulating product.
pub fn check_line_invariance_to_depth(
    tm: &TransitionMatrix,
    m: &StochasticKernel,
    rho: &ProbVector,
    eps_cond: f64,
    max_len: usize,
) -> Result<LineCheck> {
    let st = stationarity_residual(m, rho);
    if st > RHO_STATIONARY_TOL {
        return Err(Error::RhoNotStationary { residual: st });
    }
    let fam = build_q_family(tm, m, rho)?;
    let s = tm.size();
    let rh = &fam.rho_half;

    let mut worst = f64::NEG_INFINITY;
    let mut worst_word: Vec<usize> = Vec::new();
    let mut word: Vec<usize> = Vec::new();

    // depth-first in lexicographic order, prefixes before extensions, so the
    // first strict maximum is the lexicographically first maximizer
    fn extend(
        fam: &QFamily,
        s: usize,
        rh: &[f64],
        cur: &[f64],
        depth_left: usize,
        word: &mut Vec<usize>,
        worst: &mut f64,
        worst_word: &mut Vec<usize>,
    ) {
        if depth_left == 0 {
            return;
        }
        for x in 0..s {
            let nxt = linalg::vec_mat(cur, fam.q[x].entries(), s);
            word.push(x);
            let r = linalg::dot(&nxt, rh).abs();
            if r > *worst {
                *worst = r;
                *worst_word = word.clone();
            }
            extend(fam, s, rh, &nxt, depth_left - 1, word, worst, worst_word);
            word.pop();
        }
    }

    for x1 in 0..s {
        let w1 = linalg::vec_mat(rh, fam.q[x1].entries(), s);
        word.push(x1);
        let base = (linalg::dot(&w1, rh) - rho.get(x1)).abs();
        if base > worst {
            worst = base;
            worst_word = word.clone();
        }
        if max_len >= 2 {
            for x2 in 0..s {
                let v: Vec<f64> = (0..s)
                    .map(|j| w1[j] / rho.get(x1) - m.get(x1, x2) / rho.get(x2) * rh[j])
                    .collect();
                let cur = linalg::vec_mat(&v, fam.q[x2].entries(), s);
                word.push(x2);
                let r = linalg::dot(&cur, rh).abs();
                if r > worst {
                    worst = r;
                    worst_word = word.clone();
                }
                extend(
                    &fam,
                    s,
                    rh,
                    &cur,
                    max_len.saturating_sub(2),
                    &mut word,
                    &mut worst,
                    &mut worst_word,
                );
                word.pop();
            }
        }
        word.pop();
    }

    Ok(LineCheck {
        pass: worst <= eps_cond,
        worst_word,
        worst_residual: worst,
    })
}

/// The direct (unreduced) form of the same identity, kept as an independent
/// evaluation path: |ρ^{1/2}·Q_{x_1}···Q_{x_m}·ᵗρ^{1/2} − ρ_{x_1}·Π M|.
pub fn check_line_invariance_direct(
    tm: &TransitionMatrix,
    m: &StochasticKernel,
    rho: &ProbVector,
    eps_cond: f64,
    max_len: usize,
) -> Result<LineCheck> {
    let st = stationarity_residual(m, rho);
    if st > RHO_STATIONARY_TOL {
        return Err(Error::RhoNotStationary { residual: st });
    }
    let fam = build_q_family(tm, m, rho)?;
    let s = tm.size();
    let rh = &fam.rho_half;

    let mut worst = f64::NEG_INFINITY;
    let mut worst_word: Vec<usize> = Vec::new();
    let mut word: Vec<usize> = Vec::new();

    fn go(
        fam: &QFamily,
        m: &StochasticKernel,
        s: usize,
        rh: &[f64],
        vec: &[f64],
        lhs: f64,
        last: usize,
        depth_left: usize,
        word: &mut Vec<usize>,
        worst: &mut f64,
        worst_word: &mut Vec<usize>,
    ) {
        if depth_left == 0 {
            return;
        }
        for x in 0..s {
            let nvec = linalg::vec_mat(vec, fam.q[x].entries(), s);
            let nlhs = lhs * m.get(last, x);
            word.push(x);
            let r = (linalg::dot(&nvec, rh) - nlhs).abs();
            if r > *worst {
                *worst = r;
                *worst_word = word.clone();
            }
            go(fam, m, s, rh, &nvec, nlhs, x, depth_left - 1, word, worst, worst_word);
            word.pop();
        }
    }

    for x1 in 0..s {
        let vec = linalg::vec_mat(rh, fam.q[x1].entries(), s);
        let lhs = rho.get(x1);
        word.push(x1);
        let r = (linalg::dot(&vec, rh) - lhs).abs();
        if r > worst {
            worst = r;
            worst_word = word.clone();
        }
        go(
            &fam,
            m,
            s,
            rh,
            &vec,
            lhs,
            x1,
            max_len.saturating_sub(1),
            &mut word,
            &mut worst,
            &mut worst_word,
        );
        word.pop();
    }

    Ok(LineCheck {
        pass: worst <= eps_cond,
        worst_word,
        worst_residual: worst,
    })
}

/// Cycle invariance of the M-weighted cyclic law: for every word of length n,
///
/// ```text
/// Π_j M[x_j, x_{j+1 mod n}]  =  Trace(R_{x_1}···R_{x_n}),
/// R_x[i,j] = M[i,j]·T(i,j,x).
/// ```
///
/// (The ρ-weights of the Q-matrices cancel around a cycle, so R_x is used
/// directly and no marginal is needed.) Exhaustive over (κ+1)^n words.
pub fn check_cyclic_line_invariance(
    tm: &TransitionMatrix,
    m: &StochasticKernel,
    n: usize,
    eps_cond: f64,
) -> Result<LineCheck> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "cycle length must be at least 1".into(),
        ));
    }
    let s = tm.size();
    if m.size() != s {
        return Err(Error::KappaMismatch {
            expected: tm.kappa(),
            got: m.size() - 1,
        });
    }
    let words = (s as u64).checked_pow(n as u32);
    match words {
        Some(w) if w <= DEFAULT_STATE_BUDGET as u64 => {}
        _ => {
            return Err(Error::BudgetExceeded {
                required: words.map(|w| w as usize).unwrap_or(usize::MAX),
                budget: DEFAULT_STATE_BUDGET,
            })
        }
    }

    let r: Vec<Vec<f64>> = (0..s)
        .map(|x| {
            let mut mat = vec![0.0; s * s];
            for i in 0..s {
                for j in 0..s {
                    mat[i * s + j] = m.get(i, j) * tm.t(i, j, x);
                }
            }
            mat
        })
        .collect();

    let mut worst = f64::NEG_INFINITY;
    let mut worst_word: Vec<usize> = Vec::new();
    let mut word: Vec<usize> = Vec::new();

    fn go(
        r: &[Vec<f64>],
        m: &StochasticKernel,
        s: usize,
        n: usize,
        prefix: &[f64],
        word: &mut Vec<usize>,
        worst: &mut f64,
        worst_word: &mut Vec<usize>,
        eprod: f64, // Π M over the open part of the word
    ) {
        if word.len() == n {
            let lhs = eprod * m.get(word[n - 1], word[0]); // close the cycle
            let trace: f64 = (0..s).map(|i| prefix[i * s + i]).sum();
            let res = (lhs - trace).abs();
            if res > *worst {
                *worst = res;
                *worst_word = word.clone();
            }
            return;
        }
        for x in 0..s {
            let nprefix = if word.is_empty() {
                r[x].clone()
            } else {
                linalg::mat_mul(prefix, &r[x], s)
            };
            let neprod = if word.is_empty() {
                1.0
            } else {
                eprod * m.get(word[word.len() - 1], x)
            };
            word.push(x);
            go(r, m, s, n, &nprefix, word, worst, worst_word, neprod);
            word.pop();
        }
    }

    go(
        &r,
        m,
        s,
        n,
        &[],
        &mut word,
        &mut worst,
        &mut worst_word,
        1.0,
    );

    Ok(LineCheck {
        pass: worst <= eps_cond,
        worst_word,
        worst_residual: worst,
    })
}

/// Spectral sanity of a candidate (ρ, M) solution: for each letter the
/// dominant eigenvalue of Q_x must be M[x,x] (and for pairs, that of Q_xQ_y
/// must be M[x,y]·M[y,x]); any Q_x of numerical rank ≥ 2 bars cyclic
/// invariance on more than finitely many cycle lengths.
#[derive(Debug, Clone)]
pub struct LetterNecessity {
    pub x: usize,
    /// dominant eigenvalue of Q_x, when the matrix is primitive
    pub perron_eig: Option<f64>,
    pub m_diag: f64,
    pub residual: Option<f64>,
    pub eig_pass: Option<bool>,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PairNecessity {
    pub x: usize,
    pub y: usize,
    pub perron_eig: Option<f64>,
    pub m_cycle: f64,
    pub residual: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct SpectralNecessityReport {
    pub letters: Vec<LetterNecessity>,
    pub pairs: Vec<PairNecessity>,
    /// every eigenvalue necessity evaluable and satisfied
    pub all_pass: bool,
}

pub fn spectral_necessity_report(
    tm: &TransitionMatrix,
    m: &StochasticKernel,
    rho: &ProbVector,
) -> Result<SpectralNecessityReport> {
    if !tm.is_positive_rate() {
        return Err(Error::NotPositiveRate);
    }
    let fam = build_q_family(tm, m, rho)?;
    let s = tm.size();

    let mut letters = Vec::with_capacity(s);
    for x in 0..s {
        let q = &fam.q[x];
        let sv = linalg::singular_values(q.entries(), s);
        let rank = linalg::numerical_rank(&sv, EPS_RANK);
        let (perron_eig, residual, eig_pass) = match perron(q, EPS_EIG, MAX_EIG_ITER) {
            Ok(sd) => {
                let r = (sd.lambda - m.get(x, x)).abs();
                (Some(sd.lambda), Some(r), Some(r <= EPS_COND))
            }
            Err(_) => (None, None, None),
        };
        letters.push(LetterNecessity {
            x,
            perron_eig,
            m_diag: m.get(x, x),
            residual,
            eig_pass,
            rank,
            singular_values: sv,
        });
    }

    let mut pairs = Vec::new();
    for x in 0..s {
        for y in x + 1..s {
            let prod = NonnegMatrix::new(
                s,
                linalg::mat_mul(fam.q[x].entries(), fam.q[y].entries(), s),
            )?;
            let m_cycle = m.get(x, y) * m.get(y, x);
            let (perron_eig, residual, pass) = match perron(&prod, EPS_EIG, MAX_EIG_ITER) {
                Ok(sd) => {
                    let r = (sd.lambda - m_cycle).abs();
                    (Some(sd.lambda), Some(r), Some(r <= EPS_COND))
                }
                Err(_) => (None, None, None),
            };
            pairs.push(PairNecessity {
                x,
                y,
                perron_eig,
                m_cycle,
                residual,
                pass,
            });
        }
    }

    let all_pass = letters.iter().all(|l| l.eig_pass == Some(true))
        && pairs.iter().all(|p| p.pass == Some(true));
    Ok(SpectralNecessityReport {
        letters,
        pairs,
        all_pass,
    })
}

/// The one-line sufficient condition for an i.i.d. invariant law:
/// Σ_i ρ_i·T(i,j,x) = ρ_x for every j and x, stated here in its weighted
/// form ρ^{1/2}·Q_x^ρ = ρ_x·ρ^{1/2} with M = rank-one(ρ).
pub fn check_iid_sufficient(
    tm: &TransitionMatrix,
    rho: &ProbVector,
    eps_cond: f64,
) -> Result<bool> {
    let s = tm.size();
    if rho.len() != s {
        return Err(Error::KappaMismatch {
            expected: tm.kappa(),
            got: rho.len() - 1,
        });
    }
    let m = StochasticKernel::rank_one(rho);
    let fam = build_q_family(tm, &m, rho)?;
    let rh = &fam.rho_half;
    for x in 0..s {
        let img = linalg::vec_mat(rh, fam.q[x].entries(), s);
        for j in 0..s {
            if (img[j] - rho.get(x) * rh[j]).abs() > eps_cond {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Which binary-alphabet invariance class a positive rule falls in.
///
/// With T_ab0 abbreviating t(a,b,0): a Markov law exists on the line iff
/// either the four-corner product identity (i)
///
/// ```text
/// t000·t110·t101·t011 = t111·t001·t010·t100
/// ```
///
/// holds (this is the single-site Gibbs identity specialized to κ=1, and the
/// invariant law is a genuine Markov chain), or one of the linear-in-slices
/// identities (ii)
///
/// ```text
/// (a)  t011·t100 = t110·t001        (b)  t101·t010 = t110·t001
/// ```
///
/// holds, in which case the invariant law is the product measure with
///
/// ```text
/// ρ_0 = (t000·t110 − t010·t100)/(t000 + t110 − t010 − t100),
/// ```
///
/// falling back to ρ_0 = t110/(1 + t110 − t010) when the denominator
/// vanishes.
#[derive(Debug, Clone)]
pub struct Kappa1Classification {
    pub cond_i: bool,
    pub cond_i_residual: f64,
    pub cond_ii_a: bool,
    pub cond_ii_a_residual: f64,
    pub cond_ii_b: bool,
    pub cond_ii_b_residual: f64,
    /// (i) or (ii): some Markov law is invariant on the line
    pub markov_invariant_exists: bool,
    /// product marginal for case (ii), when the formula lands in (0,1)
    pub rho: Option<ProbVector>,
    /// Markov witness for case (i): M = D^γ·U^γ from the zigzag pipeline
    pub m_witness: Option<StochasticKernel>,
    /// residuals of the two defining relations of the case-(i) witness:
    /// t010·t100·M[1,0]·M[0,1] = t000·t110·M[0,0]·M[1,1] and
    /// M[0,0]·t001 = M[1,1]·t110
    pub witness_relations: Option<(f64, f64)>,
}

fn rel_gap(lhs: f64, rhs: f64) -> f64 {
    let d = lhs.max(rhs);
    if d < 1e-300 {
        0.0
    } else {
        (lhs - rhs).abs() / d
    }
}

pub fn classify_kappa1(tm: &TransitionMatrix) -> Result<Kappa1Classification> {
    if tm.kappa() != 1 {
        return Err(Error::KappaMismatch {
            expected: 1,
            got: tm.kappa(),
        });
    }
    if !tm.is_positive_rate() {
        return Err(Error::NotPositiveRate);
    }
    let t = |a: usize, b: usize, c: usize| tm.t(a, b, c);

    let i_lhs = t(0, 0, 0) * t(1, 1, 0) * t(1, 0, 1) * t(0, 1, 1);
    let i_rhs = t(1, 1, 1) * t(0, 0, 1) * t(0, 1, 0) * t(1, 0, 0);
    let cond_i_residual = rel_gap(i_lhs, i_rhs);
    let cond_i = cond_i_residual <= EPS_COND;

    let a_lhs = t(0, 1, 1) * t(1, 0, 0);
    let b_lhs = t(1, 0, 1) * t(0, 1, 0);
    let ii_rhs = t(1, 1, 0) * t(0, 0, 1);
    let cond_ii_a_residual = rel_gap(a_lhs, ii_rhs);
    let cond_ii_b_residual = rel_gap(b_lhs, ii_rhs);
    let cond_ii_a = cond_ii_a_residual <= EPS_COND;
    let cond_ii_b = cond_ii_b_residual <= EPS_COND;

    let mut rho = None;
    if cond_ii_a || cond_ii_b {
        let denom = t(0, 0, 0) + t(1, 1, 0) - t(0, 1, 0) - t(1, 0, 0);
        let rho0 = if denom.abs() > 1e-12 {
            (t(0, 0, 0) * t(1, 1, 0) - t(0, 1, 0) * t(1, 0, 0)) / denom
        } else {
            t(1, 1, 0) / (1.0 + t(1, 1, 0) - t(0, 1, 0))
        };
        if rho0 > 0.0 && rho0 < 1.0 {
            rho = Some(ProbVector::new(vec![rho0, 1.0 - rho0], EPS_STOCH)?);
        }
    }

    let mut m_witness = None;
    let mut witness_relations = None;
    if cond_i {
        if let Ok(verdict) = analyze_hz(tm, EPS_COND, EPS_EIG) {
            if let Some(sol) = verdict.solution() {
                let m = sol.d.compose(&sol.u);
                let r1 = rel_gap(
                    t(0, 1, 0) * t(1, 0, 0) * m.get(1, 0) * m.get(0, 1),
                    t(0, 0, 0) * t(1, 1, 0) * m.get(0, 0) * m.get(1, 1),
                );
                let r2 = rel_gap(m.get(0, 0) * t(0, 0, 1), m.get(1, 1) * t(1, 1, 0));
                witness_relations = Some((r1, r2));
                m_witness = Some(m);
            }
        }
    }

    Ok(Kappa1Classification {
        cond_i,
        cond_i_residual,
        cond_ii_a,
        cond_ii_a_residual,
        cond_ii_b,
        cond_ii_b_residual,
        markov_invariant_exists: cond_i || cond_ii_a || cond_ii_b,
        rho,
        m_witness,
        witness_relations,
    })
}

/// The memory-2 zigzag representation of an invariant line law (ρ, M):
/// a down-kernel D[a,c] = Σ_i M[a,i]·T(a,i,c) and a conditional up-tensor
/// U[a,c,b] = M[a,b]·T(a,b,c)/D[a,c], so that D[a,c]·U[a,c,b] recovers
/// M[a,b]·T(a,b,c) identically.
#[derive(Debug, Clone)]
pub struct Markov2Lift {
    pub d: StochasticKernel,
    /// row-major tensor indexed [a][c][b]
    pub u3: Vec<f64>,
    /// (a, c) pairs with D[a,c] = 0, whose u3 rows are zero rows
    pub zero_rows: Vec<(usize, usize)>,
}

pub fn markov2_lift(tm: &TransitionMatrix, m: &StochasticKernel) -> Result<Markov2Lift> {
    let s = tm.size();
    if m.size() != s {
        return Err(Error::KappaMismatch {
            expected: tm.kappa(),
            got: m.size() - 1,
        });
    }
    let mut d = vec![0.0; s * s];
    for a in 0..s {
        for c in 0..s {
            d[a * s + c] = (0..s).map(|i| m.get(a, i) * tm.t(a, i, c)).sum();
        }
    }
    let mut u3 = vec![0.0; s * s * s];
    let mut zero_rows = Vec::new();
    for a in 0..s {
        for c in 0..s {
            let dac = d[a * s + c];
            if dac > 0.0 {
                for b in 0..s {
                    u3[(a * s + c) * s + b] = m.get(a, b) * tm.t(a, b, c) / dac;
                }
            } else {
                zero_rows.push((a, c));
            }
        }
    }
    Ok(Markov2Lift {
        d: StochasticKernel::new(tm.kappa(), d, EPS_STOCH)?,
        u3,
        zero_rows,
    })
}
