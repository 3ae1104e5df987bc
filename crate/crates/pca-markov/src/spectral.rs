//! Perron-Frobenius machinery: the dominant eigenpair of a primitive
//! nonnegative matrix, and a closed-form stationary distribution for Markov
//! kernels via determinants of minors. The two routes are independent on
//! purpose — they cross-check each other in the test suite.

use crate::linalg;
use crate::types::{Error, NonnegMatrix, ProbVector, Result, StochasticKernel, EPS_STOCH};

/// Dominant eigendata of a primitive nonnegative matrix.
///
/// `left` is stochastic (sums to 1); `right` is rescaled so `left·right = 1`.
/// `residual` is `max(‖left·A − λ·left‖_∞, ‖A·right − λ·right‖_∞)` evaluated
/// on exactly the returned triple.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub lambda: f64,
    pub left: ProbVector,
    pub right: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// One inverse-iteration sweep on both sides: solve (A − λI)ᵗ l' = l and
/// (A − λI) r' = r, renormalize, and recompute λ as the Rayleigh quotient.
/// Near-singularity of the shifted matrix is the working principle, not a
/// failure mode; `None` only when the solve degenerates outright (exactly
/// singular LU, non-finite or non-positive result), in which case the
/// caller keeps its current pair.
fn inverse_refine(
    a: &NonnegMatrix,
    lambda: f64,
    left: &[f64],
    right: &[f64],
) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let n = a.size();
    let shifted = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        a.get(i, j) - if i == j { lambda } else { 0.0 }
    });
    let lu_r = shifted.clone().lu();
    let lu_l = shifted.transpose().lu();
    let r_new = lu_r.solve(&nalgebra::DVector::from_column_slice(right))?;
    let l_new = lu_l.solve(&nalgebra::DVector::from_column_slice(left))?;

    // the solves blow the Perron component up by 1/(λ − λ̂); flip the sign
    // if the overflow came out negative, then renormalize
    let mut l: Vec<f64> = l_new.iter().copied().collect();
    let mut r: Vec<f64> = r_new.iter().copied().collect();
    if l.iter().sum::<f64>() < 0.0 {
        l.iter_mut().for_each(|v| *v = -*v);
    }
    if r.iter().sum::<f64>() < 0.0 {
        r.iter_mut().for_each(|v| *v = -*v);
    }
    let ls: f64 = l.iter().sum();
    if !(ls.is_finite() && ls > 0.0) || l.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return None;
    }
    l.iter_mut().for_each(|v| *v /= ls);
    let xr = linalg::mat_vec(a.entries(), &r, n);
    let lr = linalg::dot(&l, &r);
    if !(lr.is_finite() && lr != 0.0) {
        return None;
    }
    let lambda_new = linalg::dot(&l, &xr) / lr;
    if !lambda_new.is_finite() {
        return None;
    }
    r.iter_mut().for_each(|v| *v /= lr);
    if r.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return None;
    }
    Some((lambda_new, l, r))
}

/// Residual max(‖l·A − λl‖_∞, ‖A·r − λr‖_∞) for a candidate triple.
fn pair_residual(a: &NonnegMatrix, lambda: f64, left: &[f64], right: &[f64]) -> f64 {
    let n = a.size();
    let xl = linalg::vec_mat(left, a.entries(), n);
    let xr = linalg::mat_vec(a.entries(), right, n);
    let res_l = (0..n)
        .map(|i| (xl[i] - lambda * left[i]).abs())
        .fold(0.0, f64::max);
    let res_r = (0..n)
        .map(|i| (xr[i] - lambda * right[i]).abs())
        .fold(0.0, f64::max);
    res_l.max(res_r)
}

/// Power iteration on `A` and its transpose simultaneously, polished by
/// inverse iteration once the tolerance is met.
///
/// For a primitive matrix the dominant eigenvalue is simple and strictly
/// larger in modulus than the rest of the spectrum, so the iteration
/// converges geometrically and no deflation is needed. A clustered
/// subdominant spectrum can still leave the eigenvectors several digits
/// short of the eigen-equation residual; the inverse-iteration polish
/// divides that error by the spectral gap and lands at machine precision.
/// Primitivity is checked up front on the support pattern; degenerate
/// spectra are refused rather than answered arbitrarily.
pub fn perron(a: &NonnegMatrix, eps_eig: f64, max_iter: usize) -> Result<SpectralData> {
    let n = a.size();
    let support: Vec<bool> = a.entries().iter().map(|&v| v > 0.0).collect();
    if !linalg::is_primitive_support(&support, n) {
        return Err(Error::NotPrimitive {
            detail: "no boolean matrix power up to n^2 is entrywise positive".into(),
        });
    }

    // Invariant kept across iterations: sum(left) = 1 and left·right = 1, so
    // the pair that passes the residual test is the pair returned.
    let mut left = vec![1.0 / n as f64; n];
    let mut right = vec![1.0; n];
    let mut last_residual = f64::INFINITY;

    for it in 1..=max_iter {
        let xl = linalg::vec_mat(&left, a.entries(), n);
        let xr = linalg::mat_vec(a.entries(), &right, n);
        let lr = linalg::dot(&left, &right);
        let lambda = linalg::dot(&xl, &right) / lr; // Rayleigh quotient
        let res_l = (0..n)
            .map(|i| (xl[i] - lambda * left[i]).abs())
            .fold(0.0, f64::max);
        let res_r = (0..n)
            .map(|i| (xr[i] - lambda * right[i]).abs())
            .fold(0.0, f64::max);
        let residual = res_l.max(res_r);
        last_residual = residual;

        if residual <= eps_eig {
            if lambda <= 0.0 {
                return Err(Error::NotPrimitive {
                    detail: format!("dominant eigenvalue {lambda} is not positive"),
                });
            }
            if left.iter().any(|&v| v <= 0.0) || right.iter().any(|&v| v <= 0.0) {
                return Err(Error::NotPrimitive {
                    detail: "converged eigenvector is not strictly positive".into(),
                });
            }
            let mut best = (lambda, left, right, residual);
            for _ in 0..2 {
                match inverse_refine(a, best.0, &best.1, &best.2) {
                    Some((l2, lv, rv)) => {
                        let r2 = pair_residual(a, l2, &lv, &rv);
                        if r2 < best.3 && l2 > 0.0 {
                            best = (l2, lv, rv, r2);
                        } else {
                            break;
                        }
                    }
                    None => break,
                }
            }
            let (lambda, left, right, residual) = best;
            let left = ProbVector::new(left, EPS_STOCH)?;
            return Ok(SpectralData {
                lambda,
                left,
                right,
                iterations: it,
                residual,
            });
        }

        let sl: f64 = xl.iter().sum();
        if sl <= 0.0 || !sl.is_finite() {
            return Err(Error::NotPrimitive {
                detail: "power iteration collapsed to the zero vector".into(),
            });
        }
        left = xl.iter().map(|v| v / sl).collect();
        let c = linalg::dot(&left, &xr);
        if c > 0.0 {
            right = xr.iter().map(|v| v / c).collect();
        } else {
            // early iterations may still carry zero overlap; fall back to a
            // plain sum normalization for this step
            let sr: f64 = xr.iter().sum();
            if sr <= 0.0 || !sr.is_finite() {
                return Err(Error::NotPrimitive {
                    detail: "power iteration collapsed to the zero vector".into(),
                });
            }
            right = xr.iter().map(|v| v / sr).collect();
        }
    }

    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: last_residual,
    })
}

/// Stationary distribution of a Markov kernel by the determinant formula
///
///   π_y ∝ det( (I − P) with row y and column y removed ),
///
/// the principal minors of I − P. Each minor expands as a sum over spanning
/// in-trees rooted at y (all edge weights ≥ 0), so for a primitive kernel all
/// minors are strictly positive and the normalized vector is the unique
/// stationary law. Direct computation, no iteration — deliberately a
/// different algorithm from `perron`.
pub fn stationary_det(p: &StochasticKernel) -> Result<ProbVector> {
    let n = p.size();
    let support: Vec<bool> = p.matrix().iter().map(|&v| v > 0.0).collect();
    if !linalg::is_primitive_support(&support, n) {
        return Err(Error::NotPrimitive {
            detail: "kernel support is not primitive; stationary law may not be unique".into(),
        });
    }

    let mut minors = vec![0.0; n];
    let mut scratch = vec![0.0; (n - 1) * (n - 1)];
    for y in 0..n {
        let m = n - 1;
        let mut r = 0;
        for i in 0..n {
            if i == y {
                continue;
            }
            let mut c = 0;
            for j in 0..n {
                if j == y {
                    continue;
                }
                let idm = if i == j { 1.0 } else { 0.0 };
                scratch[r * m + c] = idm - p.get(i, j);
                c += 1;
            }
            r += 1;
        }
        minors[y] = linalg::det(&scratch[..m * m], m);
    }

    let total: f64 = minors.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::SingularNormalization);
    }
    // exact minors are positive here; shave off any rounding-level negatives
    let cleaned: Vec<f64> = minors
        .iter()
        .map(|&v| if v < 0.0 && v > -1e-12 * total { 0.0 } else { v })
        .collect();
    if cleaned.iter().any(|&v| v < 0.0) {
        return Err(Error::SingularNormalization);
    }
    ProbVector::normalized(cleaned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{NonnegMatrix, EPS_EIG, MAX_EIG_ITER};

    fn two_state() -> NonnegMatrix {
        NonnegMatrix::new(2, vec![0.9, 0.1, 0.2, 0.8]).unwrap()
    }

    #[test]
    fn two_state_chain_eigenpair() {
        // pi A = pi with A = [[.9,.1],[.2,.8]] solves to pi = (2/3, 1/3)
        let sd = perron(&two_state(), EPS_EIG, MAX_EIG_ITER).unwrap();
        assert!((sd.lambda - 1.0).abs() <= 1e-12);
        assert!((sd.left.get(0) - 2.0 / 3.0).abs() <= 1e-11);
        assert!((sd.left.get(1) - 1.0 / 3.0).abs() <= 1e-11);
        assert!(sd.residual <= EPS_EIG);
        // left·right = 1 by the normalization contract
        let lr: f64 = sd
            .left
            .as_slice()
            .iter()
            .zip(&sd.right)
            .map(|(a, b)| a * b)
            .sum();
        assert!((lr - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn identity_is_refused() {
        let id = NonnegMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            perron(&id, EPS_EIG, MAX_EIG_ITER),
            Err(Error::NotPrimitive { .. })
        ));
    }

    #[test]
    fn rank_one_matrix_converges_immediately() {
        // all rows equal to rho: left eigenvector is rho itself
        let rho = [0.3, 0.7];
        let a = NonnegMatrix::from_fn(2, |_, j| rho[j]).unwrap();
        let sd = perron(&a, EPS_EIG, MAX_EIG_ITER).unwrap();
        assert!((sd.lambda - 1.0).abs() <= 1e-12);
        assert!((sd.left.get(0) - 0.3).abs() <= 1e-12);
        assert!((sd.left.get(1) - 0.7).abs() <= 1e-12);
        assert!((sd.right[0] - 1.0).abs() <= 1e-12);
        assert!((sd.right[1] - 1.0).abs() <= 1e-12);
        assert!(sd.iterations <= 3);
    }

    #[test]
    fn scale_covariance() {
        let a = two_state();
        let sd1 = perron(&a, EPS_EIG, MAX_EIG_ITER).unwrap();
        let sd3 = perron(&a.scale(3.0).unwrap(), EPS_EIG, MAX_EIG_ITER).unwrap();
        assert!((sd3.lambda - 3.0 * sd1.lambda).abs() <= 1e-11);
        assert!(sd1.left.inf_distance(&sd3.left) <= 1e-11);
    }

    #[test]
    fn stationary_det_two_state() {
        let p = StochasticKernel::new(1, vec![0.9, 0.1, 0.2, 0.8], EPS_STOCH).unwrap();
        let pi = stationary_det(&p).unwrap();
        assert!((pi.get(0) - 2.0 / 3.0).abs() <= 1e-14);
        assert!((pi.get(1) - 1.0 / 3.0).abs() <= 1e-14);
    }

    #[test]
    fn stationary_det_product_kernel() {
        let rho = ProbVector::new(vec![0.3, 0.7], EPS_STOCH).unwrap();
        let p = StochasticKernel::rank_one(&rho);
        let pi = stationary_det(&p).unwrap();
        assert!(pi.inf_distance(&rho) <= 1e-14);
    }

    #[test]
    fn stationary_det_doubly_stochastic() {
        let p = StochasticKernel::new(
            2,
            vec![0.5, 0.3, 0.2, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5],
            EPS_STOCH,
        )
        .unwrap();
        let pi = stationary_det(&p).unwrap();
        for i in 0..3 {
            assert!((pi.get(i) - 1.0 / 3.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn periodic_kernel_is_refused() {
        let p = StochasticKernel::new(1, vec![0.0, 1.0, 1.0, 0.0], EPS_STOCH).unwrap();
        assert!(matches!(
            stationary_det(&p),
            Err(Error::NotPrimitive { .. })
        ));
    }

    #[test]
    fn perron_agrees_with_determinant_formula() {
        for seed in 0..25u64 {
            let k = crate::gen::gen_random_kernel(3, seed).unwrap();
            let sd = perron(&NonnegMatrix::from_kernel(&k), EPS_EIG, MAX_EIG_ITER).unwrap();
            let pi = stationary_det(&k).unwrap();
            assert!((sd.lambda - 1.0).abs() <= 1e-11);
            assert!(sd.left.inf_distance(&pi) <= 10.0 * EPS_EIG);
        }
    }
}
