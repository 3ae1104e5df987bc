//! Seeded construction of test instances.
//!
//! Every generator is a pure function of (κ, seed): the same inputs produce
//! bit-identical outputs. Rejection loops draw from the same stream, so
//! resampling stays deterministic too.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::types::{
    Error, ProbVector, Result, StochasticKernel, TransitionMatrix, EPS_STOCH,
};

const MAX_RESAMPLES: usize = 1000;

/// Entries bounded away from zero so every generated object is comfortably
/// positive-rate.
fn positive_row(rng: &mut ChaCha8Rng, s: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= sum;
    }
    row
}

/// Uniformly random positive-rate transition matrix: each parent pair gets
/// an independent normalized row.
pub fn gen_random_tm(kappa: usize, seed: u64) -> Result<TransitionMatrix> {
    let s = kappa + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::with_capacity(s * s * s);
    for _ in 0..s * s {
        t.extend(positive_row(&mut rng, s));
    }
    TransitionMatrix::new(kappa, t, EPS_STOCH)
}

/// Uniformly random positive stochastic kernel.
pub fn gen_random_kernel(kappa: usize, seed: u64) -> Result<StochasticKernel> {
    let s = kappa + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Vec::with_capacity(s * s);
    for _ in 0..s {
        m.extend(positive_row(&mut rng, s));
    }
    StochasticKernel::new(kappa, m, EPS_STOCH)
}

/// Commuting kernel pair D = αI + (1−α)K, U = βI + (1−β)K for one shared
/// positive kernel K: the commutator vanishes identically (both are
/// polynomials in K), and DU is entrywise positive because (1−α)(1−β)K²
/// already is.
pub fn gen_commuting_pair(kappa: usize, seed: u64) -> Result<(StochasticKernel, StochasticKernel)> {
    let s = kappa + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = Vec::with_capacity(s * s);
    for _ in 0..s {
        k.extend(positive_row(&mut rng, s));
    }
    let alpha = rng.gen_range(0.05..0.95);
    let beta = rng.gen_range(0.05..0.95);
    let mix = |w: f64| -> Vec<f64> {
        (0..s * s)
            .map(|idx| {
                let id = if idx / s == idx % s { 1.0 } else { 0.0 };
                w * id + (1.0 - w) * k[idx]
            })
            .collect()
    };
    Ok((
        StochasticKernel::new(kappa, mix(alpha), EPS_STOCH)?,
        StochasticKernel::new(kappa, mix(beta), EPS_STOCH)?,
    ))
}

/// Transition matrix satisfying the single-site Gibbs condition exactly:
/// draw the boundary rows t(·,0,·) and t(0,·,·) freely, then complete every
/// interior row proportionally to t(a,0,c)·t(0,b,c)/t(0,0,c). Cross-
/// multiplying shows the completed tensor satisfies
///
/// ```text
/// t(a,b,c)·t(a,0,0)·t(0,b,0)·t(0,0,c) = t(0,0,0)·t(a,b,0)·t(a,0,c)·t(0,b,c)
/// ```
///
/// identically — both sides reduce to the same product over the drawn
/// slices — so the residual is pure rounding. The commutation condition,
/// by contrast, fails generically for κ ≥ 2.
pub fn gen_cond3_tm(kappa: usize, seed: u64) -> Result<TransitionMatrix> {
    let s = kappa + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); s * s];
    rows[0] = positive_row(&mut rng, s);
    for a in 1..s {
        rows[a * s] = positive_row(&mut rng, s);
    }
    for b in 1..s {
        rows[b] = positive_row(&mut rng, s);
    }
    for a in 1..s {
        for b in 1..s {
            let mut attempts = 0;
            loop {
                let w: Vec<f64> = (0..s)
                    .map(|c| rows[a * s][c] * rows[b][c] / rows[0][c])
                    .collect();
                let sum: f64 = w.iter().sum();
                if sum.is_finite() && sum > 0.0 {
                    rows[a * s + b] = w.iter().map(|v| v / sum).collect();
                    break;
                }
                // cannot happen for positive draws, but the rejection path
                // stays deterministic: redraw the offending boundary rows
                attempts += 1;
                if attempts >= MAX_RESAMPLES {
                    return Err(Error::ResamplingExhausted {
                        attempts: MAX_RESAMPLES,
                    });
                }
                rows[a * s] = positive_row(&mut rng, s);
                rows[b] = positive_row(&mut rng, s);
            }
        }
    }
    let mut t = Vec::with_capacity(s * s * s);
    for row in rows {
        t.extend(row);
    }
    TransitionMatrix::new(kappa, t, EPS_STOCH)
}

/// Positive-rate rule with t(a,b,·) = t(b,a,·) exactly: the symmetrized raw
/// weights for (a,b) and (b,a) are the same floating-point numbers, so the
/// normalized rows match bit for bit.
pub fn gen_symmetric_tm(kappa: usize, seed: u64) -> Result<TransitionMatrix> {
    let s = kappa + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..s * s * s).map(|_| rng.gen_range(0.05..1.0)).collect();
    let mut t = vec![0.0; s * s * s];
    for a in 0..s {
        for b in 0..s {
            let mut row: Vec<f64> = (0..s)
                .map(|c| (raw[(a * s + b) * s + c] + raw[(b * s + a) * s + c]) / 2.0)
                .collect();
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
            t[(a * s + b) * s..(a * s + b) * s + s].copy_from_slice(&row);
        }
    }
    TransitionMatrix::new(kappa, t, EPS_STOCH)
}

/// Binary rule with a product-form invariant law but (generically) no Markov
/// zigzag: with rows t(a,b,·) = (t_ab, 1−t_ab), enforce
///
/// ```text
/// (1 − t01)·t10 = t11·(1 − t00)
/// ```
///
/// by solving for t11, and report the invariant marginal
///
/// ```text
/// ρ_0 = (t00·t11 − t01·t10)/(t00 + t11 − t01 − t10).
/// ```
///
/// Rejection keeps the instance away from three degeneracies: t11 leaving
/// (0.05, 0.95), the ρ_0 denominator within 0.02 of zero (where the formula
/// switches branches), and the four-corner Gibbs identity within 1e-3 of
/// holding (where a genuine Markov law would exist too, spoiling the
/// separation this generator exists to exhibit).
pub fn gen_kappa1_case2(seed: u64) -> Result<(TransitionMatrix, ProbVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RESAMPLES {
        let t00: f64 = rng.gen_range(0.1..0.9);
        let t01: f64 = rng.gen_range(0.1..0.9);
        let t10: f64 = rng.gen_range(0.1..0.9);
        let t11 = (1.0 - t01) * t10 / (1.0 - t00);
        if !(0.05..=0.95).contains(&t11) {
            continue;
        }
        let denom = t00 + t11 - t01 - t10;
        if denom.abs() <= 0.02 {
            continue;
        }
        let gibbs_lhs = t00 * t11 * (1.0 - t10) * (1.0 - t01);
        let gibbs_rhs = (1.0 - t11) * (1.0 - t00) * t01 * t10;
        if (gibbs_lhs - gibbs_rhs).abs() <= 1e-3 * gibbs_lhs.max(gibbs_rhs) {
            continue;
        }
        let rho0 = (t00 * t11 - t01 * t10) / denom;
        if !(0.05..=0.95).contains(&rho0) {
            continue;
        }
        let p = [[t00, t01], [t10, t11]];
        let tm = TransitionMatrix::from_fn(
            1,
            |a, b, c| if c == 0 { p[a][b] } else { 1.0 - p[a][b] },
            EPS_STOCH,
        )?;
        let rho = ProbVector::new(vec![rho0, 1.0 - rho0], EPS_STOCH)?;
        return Ok((tm, rho));
    }
    Err(Error::ResamplingExhausted {
        attempts: MAX_RESAMPLES,
    })
}
