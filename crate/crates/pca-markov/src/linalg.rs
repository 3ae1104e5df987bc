//! Small dense helpers for (κ+1)-sized matrices stored flat row-major.
//! Nothing here is clever; the matrices are tiny and clarity wins.

pub(crate) fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub(crate) fn mat_vec(a: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                acc += a[i * n + j] * x[j];
            }
            acc
        })
        .collect()
}

pub(crate) fn vec_mat(x: &[f64], a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        for j in 0..n {
            out[j] += xi * a[i * n + j];
        }
    }
    out
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn inf_norm_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn mat_inf_distance(a: &[f64], b: &[f64]) -> f64 {
    inf_norm_diff(a, b)
}

/// Determinant by LU with partial pivoting. Destroys its copy of the input.
pub(crate) fn det(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 1.0; // empty product convention, used by 1-state minors
    }
    let mut m = a.to_vec();
    let mut sign = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            sign = -sign;
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[r * n + j] -= f * m[col * n + j];
            }
        }
    }
    let mut prod = sign;
    for i in 0..n {
        prod *= m[i * n + i];
    }
    prod
}

/// Singular values by one-sided Jacobi (Hestenes): rotate column pairs until
/// all are mutually orthogonal; the singular values are the column norms.
/// Plenty for numerical-rank questions on matrices this small.
pub(crate) fn singular_values(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let col_dot = |m: &[f64], p: usize, q: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            acc += m[i * n + p] * m[i * n + q];
        }
        acc
    };
    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let app = col_dot(&m, p, p);
                let aqq = col_dot(&m, q, q);
                let apq = col_dot(&m, p, q);
                if apq.abs() <= 1e-300 || apq.abs() <= 1e-17 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let vp = m[i * n + p];
                    let vq = m[i * n + q];
                    m[i * n + p] = c * vp - s * vq;
                    m[i * n + q] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|j| col_dot(&m, j, j).sqrt()).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Count of singular values above `eps_rank` relative to the largest.
pub(crate) fn numerical_rank(sv: &[f64], eps_rank: f64) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > eps_rank * top).count()
}

/// Primitivity of a nonnegative matrix from its support pattern: some boolean
/// power up to the classical index bound n² must be all-ones.
pub(crate) fn is_primitive_support(support: &[bool], n: usize) -> bool {
    let all = |m: &[bool]| m.iter().all(|&v| v);
    let mut cur = support.to_vec();
    if all(&cur) {
        return true;
    }
    // Wielandt: a primitive matrix has positive power by exponent (n-1)²+1 ≤ n².
    for _ in 1..n * n {
        let mut next = vec![false; n * n];
        for i in 0..n {
            for k in 0..n {
                if cur[i * n + k] {
                    for j in 0..n {
                        if support[k * n + j] {
                            next[i * n + j] = true;
                        }
                    }
                }
            }
        }
        if all(&next) {
            return true;
        }
        if next == cur {
            return false; // support pattern reached a fixed point short of full
        }
        cur = next;
    }
    false
}
