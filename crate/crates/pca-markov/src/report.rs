//! One-stop analysis: run every applicable criterion on a transition matrix
//! and collect the results into a serializable report with one verdict per
//! structure (zigzag, cyclic zigzag, line, cycle).
//!
//! Verdict semantics are deliberately three-valued. The algebraic criteria
//! are exact characterizations only on their home turf — positive selected
//! slices, and for the binary classification a fully positive rule — so
//! outside those hypotheses the honest answer is INCONCLUSIVE, not a guess.

use serde::Serialize;

use crate::cyclic::check_diag_powers;
use crate::hz::{check_cond_gibbs1, check_cond_gibbs_g, gamma_pipeline};
use crate::line::classify_kappa1;
use crate::types::{StochasticKernel, TransitionMatrix};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    MarkovProven,
    NotMarkovProven,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct CondCheck {
    pub pass: bool,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub nu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSummary {
    pub d: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub commutator_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagCheck {
    pub pass: bool,
    pub residual: f64,
    pub worst_k: usize,
    pub max_k: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Kappa1Summary {
    pub four_corner: bool,
    pub four_corner_residual: f64,
    pub linear_a: bool,
    pub linear_a_residual: f64,
    pub linear_b: bool,
    pub linear_b_residual: f64,
    pub markov_invariant_exists: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_relations: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub schema_version: u32,
    pub kappa: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_length: Option<usize>,
    pub eps_cond: f64,
    pub eps_eig: f64,
    pub positive_rate: bool,
    pub cond_tauxg: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gibbs_single: Option<CondCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gibbs_general: Option<CondCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernels: Option<KernelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diag_powers: Option<DiagCheck>,
    pub verdict_zigzag: Verdict,
    pub verdict_cyclic_zigzag: Verdict,
    pub verdict_line: Verdict,
    pub verdict_cycle: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<Kappa1Summary>,
    pub notes: Vec<String>,
}

fn kernel_rows(k: &StochasticKernel) -> Vec<Vec<f64>> {
    (0..k.size()).map(|a| k.row(a).to_vec()).collect()
}

/// Run the full criterion battery. `n` fixes the cycle length for the
/// cyclic checks; without it the diagonal-power depth defaults to κ+1,
/// which covers every cycle length at once.
pub fn analyze_full(
    tm: &TransitionMatrix,
    n: Option<usize>,
    eps_cond: f64,
    eps_eig: f64,
) -> ConditionReport {
    let kappa = tm.kappa();
    let positive_rate = tm.is_positive_rate();
    let cond_tauxg = tm.check_cond_tauxg();
    let mut notes = Vec::new();

    let mut gibbs_single = None;
    let mut spectral = None;
    let mut kernels = None;
    let mut diag_powers = None;
    let mut verdict_zigzag = Verdict::Inconclusive;
    let mut verdict_cyclic_zigzag = Verdict::Inconclusive;

    match check_cond_gibbs1(tm, eps_cond) {
        Ok((pass, residual, witness)) => {
            gibbs_single = Some(CondCheck {
                pass,
                residual,
                witness: witness.map(|(a, b, c)| vec![a, b, c]),
            });
        }
        Err(e) => notes.push(format!("single-site Gibbs check unavailable: {e}")),
    }
    let gibbs_general = {
        let (pass, residual) = check_cond_gibbs_g(tm, eps_cond);
        Some(CondCheck {
            pass,
            residual,
            witness: None,
        })
    };

    if cond_tauxg {
        match gamma_pipeline(tm, eps_eig) {
            Ok(p) => {
                let max_k = n.map(|n| n.min(kappa + 1)).unwrap_or(kappa + 1);
                let (diag_pass, diag_res, worst_k) =
                    check_diag_powers(&p.d, &p.u, max_k, eps_cond);
                let cond4 = p.commutator_norm <= eps_cond;
                let gibbs_pass = gibbs_single.as_ref().map(|g| g.pass).unwrap_or(false);
                verdict_zigzag = if gibbs_pass && cond4 {
                    Verdict::MarkovProven
                } else {
                    Verdict::NotMarkovProven
                };
                verdict_cyclic_zigzag = if gibbs_pass && diag_pass {
                    Verdict::MarkovProven
                } else {
                    Verdict::NotMarkovProven
                };
                spectral = Some(SpectralSummary {
                    nu: p.nu.as_slice().to_vec(),
                    gamma: p.gamma.as_slice().to_vec(),
                    mu: p.mu.clone(),
                    lambda: p.lambda,
                });
                kernels = Some(KernelSummary {
                    d: kernel_rows(&p.d),
                    u: kernel_rows(&p.u),
                    rho: p.rho.as_slice().to_vec(),
                    commutator_norm: p.commutator_norm,
                });
                diag_powers = Some(DiagCheck {
                    pass: diag_pass,
                    residual: diag_res,
                    worst_k,
                    max_k,
                });
            }
            Err(e) => {
                notes.push(format!("spectral pipeline failed: {e}"));
                // a failed Gibbs check still decides the negative direction
                if gibbs_single.as_ref().map(|g| !g.pass).unwrap_or(false) {
                    verdict_zigzag = Verdict::NotMarkovProven;
                    verdict_cyclic_zigzag = Verdict::NotMarkovProven;
                }
            }
        }
    } else {
        notes.push(
            "selected slices t(·,·,0) or t(0,0,·) carry zeros: the algebraic \
             criteria do not apply"
                .into(),
        );
    }

    let mut kappa1 = None;
    let mut verdict_line = if verdict_zigzag == Verdict::MarkovProven {
        Verdict::MarkovProven
    } else {
        Verdict::Inconclusive
    };
    if kappa == 1 && positive_rate {
        match classify_kappa1(tm) {
            Ok(c) => {
                verdict_line = if c.markov_invariant_exists {
                    Verdict::MarkovProven
                } else {
                    Verdict::NotMarkovProven
                };
                kappa1 = Some(Kappa1Summary {
                    four_corner: c.cond_i,
                    four_corner_residual: c.cond_i_residual,
                    linear_a: c.cond_ii_a,
                    linear_a_residual: c.cond_ii_a_residual,
                    linear_b: c.cond_ii_b,
                    linear_b_residual: c.cond_ii_b_residual,
                    markov_invariant_exists: c.markov_invariant_exists,
                    rho0: c.rho.as_ref().map(|r| r.get(0)),
                    m: c.m_witness.as_ref().map(kernel_rows),
                    witness_relations: c.witness_relations,
                });
            }
            Err(e) => notes.push(format!("binary classification failed: {e}")),
        }
    }

    let verdict_cycle = if verdict_cyclic_zigzag == Verdict::MarkovProven {
        Verdict::MarkovProven
    } else {
        Verdict::Inconclusive
    };

    ConditionReport {
        schema_version: SCHEMA_VERSION,
        kappa,
        cycle_length: n,
        eps_cond,
        eps_eig,
        positive_rate,
        cond_tauxg,
        gibbs_single,
        gibbs_general,
        spectral,
        kernels,
        diag_powers,
        verdict_zigzag,
        verdict_cyclic_zigzag,
        verdict_line,
        verdict_cycle,
        kappa1,
        notes,
    }
}
