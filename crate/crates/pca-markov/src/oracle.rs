//! Exact finite-cycle oracles, independent of the algebraic machinery.
//!
//! Everything here works by brute enumeration over the (κ+1)^n cell
//! configurations of a length-n cycle: build the full transition operator of
//! the induced Markov chain, solve for its stationary law by dense linear
//! algebra, and fit candidate Markov / zigzag-Markov shapes to the result by
//! nothing more than ratios of probabilities. These routines know nothing
//! about the spectral pipeline, which is exactly what makes them useful as a
//! second opinion on it.

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::spectral::perron;
use crate::types::{
    Error, NonnegMatrix, Result, StochasticKernel, TransitionMatrix, DEFAULT_STATE_BUDGET,
    EPS_EIG, EPS_ORACLE, MAX_EIG_ITER,
};

/// Encode cells as Σ cells[i]·(κ+1)^i.
pub fn config_code(cells: &[usize], s: usize) -> usize {
    let mut code = 0;
    for &c in cells.iter().rev() {
        code = code * s + c;
    }
    code
}

/// Inverse of [`config_code`].
pub fn decode_config(code: usize, n: usize, s: usize) -> Vec<usize> {
    let mut cells = Vec::with_capacity(n);
    let mut rest = code;
    for _ in 0..n {
        cells.push(rest % s);
        rest /= s;
    }
    cells
}

fn check_budget(s: usize, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "cycle length must be at least 1".into(),
        ));
    }
    match (s as u64).checked_pow(n as u32) {
        Some(states) if states <= DEFAULT_STATE_BUDGET as u64 => Ok(states as usize),
        other => Err(Error::BudgetExceeded {
            required: other.map(|v| v as usize).unwrap_or(usize::MAX),
            budget: DEFAULT_STATE_BUDGET,
        }),
    }
}

/// One synchronous update of the whole cycle, as a dense stochastic matrix
/// over configurations: P(w → w') = Π_i T(w_i, w_{i+1 mod n}, w'_i).
#[derive(Debug, Clone)]
pub struct CylinderOperator {
    pub n: usize,
    pub kappa: usize,
    pub states: usize,
    /// row-major, p[w·states + w']
    pub p: Vec<f64>,
}

impl CylinderOperator {
    pub fn get(&self, w: usize, wp: usize) -> f64 {
        self.p[w * self.states + wp]
    }
}

pub fn pca_cylinder_operator(tm: &TransitionMatrix, n: usize) -> Result<CylinderOperator> {
    let s = tm.size();
    let states = check_budget(s, n)?;
    let mut p = vec![0.0; states * states];
    let mut cells = vec![0usize; n];
    for w in 0..states {
        let mut rest = w;
        for cell in cells.iter_mut() {
            *cell = rest % s;
            rest /= s;
        }
        // fill row w over all images by running one digit counter per site
        let mut image = vec![0usize; n];
        loop {
            let mut prob = 1.0;
            for i in 0..n {
                prob *= tm.t(cells[i], cells[(i + 1) % n], image[i]);
                if prob == 0.0 {
                    break;
                }
            }
            p[w * states + config_code(&image, s)] = prob;
            // increment the image counter
            let mut k = 0;
            while k < n {
                image[k] += 1;
                if image[k] < s {
                    break;
                }
                image[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    Ok(CylinderOperator {
        n,
        kappa: tm.kappa(),
        states,
        p,
    })
}

/// A probability vector over length-n cell configurations.
#[derive(Debug, Clone)]
pub struct CylinderDistribution {
    pub n: usize,
    pub kappa: usize,
    pub states: usize,
    pub p: Vec<f64>,
}

impl CylinderDistribution {
    pub fn get(&self, code: usize) -> f64 {
        self.p[code]
    }

    pub fn prob(&self, cells: &[usize]) -> f64 {
        self.p[config_code(cells, self.kappa + 1)]
    }

    /// Largest discrepancy under rotation of the cycle — zero for any law
    /// arising as the unique stationary distribution of the (rotation-
    /// covariant) cycle dynamics.
    pub fn shift_residual(&self) -> f64 {
        let s = self.kappa + 1;
        let mut worst = 0.0f64;
        for code in 0..self.states {
            let mut cells = decode_config(code, self.n, s);
            cells.rotate_left(1);
            let d = (self.p[code] - self.p[config_code(&cells, s)]).abs();
            worst = worst.max(d);
        }
        worst
    }

    /// Marginal of a single site (any site, by shift symmetry of callers'
    /// distributions; this one marginalizes site 0).
    pub fn site_marginal(&self) -> Vec<f64> {
        let s = self.kappa + 1;
        let mut out = vec![0.0; s];
        for code in 0..self.states {
            out[code % s] += self.p[code];
        }
        out
    }
}

/// Closed-class / period diagnostics for a support graph given as adjacency
/// lists. Returns None when the chain is primitive, otherwise a description.
fn primitivity_defect(adj: &[Vec<usize>]) -> Option<String> {
    let n = adj.len();
    // Kosaraju: first pass for finishing order, second on the reverse graph
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        seen[start] = true;
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            if *i < adj[v].len() {
                let w = adj[v][*i];
                *i += 1;
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut radj = vec![Vec::new(); n];
    for (v, out) in adj.iter().enumerate() {
        for &w in out {
            radj[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut ncomp = 0;
    for &start in order.iter().rev() {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = ncomp;
        while let Some(v) = stack.pop() {
            for &w in &radj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = ncomp;
                    stack.push(w);
                }
            }
        }
        ncomp += 1;
    }

    if ncomp > 1 {
        let mut sizes = vec![0usize; ncomp];
        let mut closed = vec![true; ncomp];
        for v in 0..n {
            sizes[comp[v]] += 1;
            for &w in &adj[v] {
                if comp[w] != comp[v] {
                    closed[comp[v]] = false;
                }
            }
        }
        let closed_sizes: Vec<usize> = (0..ncomp).filter(|&c| closed[c]).map(|c| sizes[c]).collect();
        return Some(format!(
            "reducible support: {} closed communicating classes (sizes {:?}) out of {} classes",
            closed_sizes.len(),
            closed_sizes,
            ncomp
        ));
    }

    // single class: period = gcd of (level[u] + 1 - level[v]) over edges
    let mut level = vec![i64::MIN; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == i64::MIN {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let mut period = 0i64;
    for v in 0..n {
        for &w in &adj[v] {
            period = gcd(period, level[v] + 1 - level[w]);
        }
    }
    if period == 1 {
        None
    } else {
        Some(format!("irreducible support with period {period}"))
    }
}

/// Stationary law of the cycle dynamics by dense linear solve, with a
/// primitivity gate so the answer is the unique stationary law rather than
/// an arbitrary member of a family.
pub fn exact_stationary(tm: &TransitionMatrix, n: usize) -> Result<CylinderDistribution> {
    let op = pca_cylinder_operator(tm, n)?;
    let states = op.states;

    if !tm.is_positive_rate() {
        let adj: Vec<Vec<usize>> = (0..states)
            .map(|w| {
                (0..states)
                    .filter(|&wp| op.p[w * states + wp] > 0.0)
                    .collect()
            })
            .collect();
        if let Some(detail) = primitivity_defect(&adj) {
            return Err(Error::NotPrimitive { detail });
        }
    }

    // solve πᵗ(I - P) = 0 with Σπ = 1: transpose, replace last equation
    let mut a = DMatrix::from_fn(states, states, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - op.p[c * states + r]
    });
    for c in 0..states {
        a[(states - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(states);
    b[states - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or(Error::SingularNormalization)?;

    let mut p: Vec<f64> = pi.iter().copied().collect();
    for v in p.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SingularNormalization);
    }
    for v in p.iter_mut() {
        *v /= total;
    }

    // hold the solve to the advertised tolerance (iterations: 0 marks a
    // direct solve rather than an iterative one)
    let mut residual = 0.0f64;
    for wp in 0..states {
        let img: f64 = (0..states).map(|w| p[w] * op.p[w * states + wp]).sum();
        residual = residual.max((img - p[wp]).abs());
    }
    if residual > EPS_ORACLE {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual,
        });
    }

    Ok(CylinderDistribution {
        n,
        kappa: tm.kappa(),
        states,
        p,
    })
}

/// Joint law of two consecutive time slices under the stationary regime:
/// p(w, w') = π(w)·P(w → w').
#[derive(Debug, Clone)]
pub struct HzJointDistribution {
    pub n: usize,
    pub kappa: usize,
    pub states: usize,
    /// row-major, p[w·states + w']
    pub p: Vec<f64>,
}

impl HzJointDistribution {
    pub fn get(&self, w: usize, wp: usize) -> f64 {
        self.p[w * self.states + wp]
    }

    /// Marginals of the two slices; equal for a stationary joint law.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let mut row = vec![0.0; self.states];
        let mut col = vec![0.0; self.states];
        for w in 0..self.states {
            for wp in 0..self.states {
                let v = self.p[w * self.states + wp];
                row[w] += v;
                col[wp] += v;
            }
        }
        (row, col)
    }
}

pub fn exact_hz_distribution(tm: &TransitionMatrix, n: usize) -> Result<HzJointDistribution> {
    let pi = exact_stationary(tm, n)?;
    let op = pca_cylinder_operator(tm, n)?;
    let states = op.states;
    let mut p = vec![0.0; states * states];
    for w in 0..states {
        for wp in 0..states {
            p[w * states + wp] = pi.p[w] * op.p[w * states + wp];
        }
    }
    Ok(HzJointDistribution {
        n,
        kappa: tm.kappa(),
        states,
        p,
    })
}

/// Cyclic Markov law Π_j M[x_j, x_{j+1 mod n}] / Trace(M^n), materialized as
/// an explicit distribution.
pub fn cmc_distribution(m: &StochasticKernel, n: usize) -> Result<CylinderDistribution> {
    let s = m.size();
    let states = check_budget(s, n)?;
    let mut pw = vec![0.0; states];
    for code in 0..states {
        let cells = decode_config(code, n, s);
        let mut prod = 1.0;
        for i in 0..n {
            prod *= m.get(cells[i], cells[(i + 1) % n]);
        }
        pw[code] = prod;
    }
    let z: f64 = pw.iter().sum();
    if !(z > 0.0) {
        return Err(Error::SingularNormalization);
    }
    for v in pw.iter_mut() {
        *v /= z;
    }
    Ok(CylinderDistribution {
        n,
        kappa: s - 1,
        states,
        p: pw,
    })
}

/// Zigzag cyclic Markov law on two slices:
/// p(w, w') = Π_i D[w_i, w'_i]·U[w'_i, w_{i+1 mod n}] / Trace((DU)^n).
pub fn hzcmc_joint(
    d: &StochasticKernel,
    u: &StochasticKernel,
    n: usize,
) -> Result<HzJointDistribution> {
    let s = d.size();
    if u.size() != s {
        return Err(Error::KappaMismatch {
            expected: s - 1,
            got: u.size() - 1,
        });
    }
    let states = check_budget(s, n)?;
    let mut p = vec![0.0; states * states];
    let mut total = 0.0;
    for w in 0..states {
        let wc = decode_config(w, n, s);
        for wp in 0..states {
            let wpc = decode_config(wp, n, s);
            let mut prod = 1.0;
            for i in 0..n {
                prod *= d.get(wc[i], wpc[i]) * u.get(wpc[i], wc[(i + 1) % n]);
            }
            p[w * states + wp] = prod;
            total += prod;
        }
    }
    if !(total > 0.0) {
        return Err(Error::SingularNormalization);
    }
    for v in p.iter_mut() {
        *v /= total;
    }
    Ok(HzJointDistribution {
        n,
        kappa: s - 1,
        states,
        p,
    })
}

/// Markov-field screen on a cycle of length `len` over digits base `s`:
/// the conditional law of each site given everything else may depend only on
/// the two neighbors.
fn markov_field_screen(p: &[f64], len: usize, s: usize, eps: f64) -> bool {
    let contexts = p.len() / s;
    let mut refs: Vec<Option<Vec<f64>>> = vec![None; s * s];
    for i in 0..len {
        let stride = s.pow(i as u32);
        for r in refs.iter_mut() {
            *r = None;
        }
        for ctx in 0..contexts {
            // expand ctx into a full code with digit i = 0
            let high = ctx / stride;
            let low = ctx % stride;
            let base = high * stride * s + low;
            let left = base / s.pow(((i + len - 1) % len) as u32) % s;
            let right = base / s.pow(((i + 1) % len) as u32) % s;
            let mut cond: Vec<f64> = (0..s).map(|x| p[base + x * stride]).collect();
            let z: f64 = cond.iter().sum();
            for v in cond.iter_mut() {
                *v /= z;
            }
            let slot = &mut refs[left * s + right];
            match slot {
                None => *slot = Some(cond),
                Some(reference) => {
                    if linalg::inf_norm_diff(reference, &cond) > eps {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Decide whether `pi` is a cyclic Markov law, and if so return its
/// row-stochastic kernel.
///
/// Fit by probability ratios against the all-zeros configuration:
/// B[a,b] = π(a,b,0,…)/π(0,…) collapses to M[a,b]·M[b,0]·M[0,a]/M[0,0]³, and
/// dividing by h_a·h_b with h_a = sqrt(π(a,0,…)/π(0,…)) leaves a matrix
/// similar to M up to scale. Its dominant right eigenvector then rescales it
/// back to the unique row-stochastic representative, which for an exactly
/// cyclic-Markov π is M itself. Candidate acceptance is by full product-form
/// verification on every configuration, on top of a conditional-independence
/// screen.
pub fn is_cmc(pi: &CylinderDistribution, eps: f64) -> Result<(bool, Option<StochasticKernel>)> {
    let s = pi.kappa + 1;
    let n = pi.n;
    if n < 3 {
        return Err(Error::InvalidParameter(
            "cyclic Markov fit needs a cycle of length at least 3".into(),
        ));
    }
    for (index, &v) in pi.p.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::ZeroProbabilityConfig { index });
        }
    }

    if !markov_field_screen(&pi.p, n, s, eps) {
        return Ok((false, None));
    }

    let z = pi.p[0];
    let h: Vec<f64> = (0..s).map(|a| (pi.p[a] / z).sqrt()).collect();
    let mut g = vec![0.0; s * s];
    for a in 0..s {
        for b in 0..s {
            g[a * s + b] = pi.p[a + b * s] / z / (h[a] * h[b]);
        }
    }
    let sd = perron(&NonnegMatrix::new(s, g.clone())?, EPS_EIG, MAX_EIG_ITER)?;
    let mut m = vec![0.0; s * s];
    for a in 0..s {
        for b in 0..s {
            m[a * s + b] = g[a * s + b] * sd.right[b] / (sd.lambda * sd.right[a]);
        }
    }
    let kernel = StochasticKernel::new(pi.kappa, m, 1e-9)?;

    let predicted = cmc_distribution(&kernel, n)?;
    let ok = pi
        .p
        .iter()
        .zip(predicted.p.iter())
        .all(|(a, b)| (a - b).abs() <= eps);
    if ok {
        Ok((true, Some(kernel)))
    } else {
        Ok((false, None))
    }
}

/// Decide whether a two-slice joint law is a zigzag cyclic Markov law, and
/// if so return its row-stochastic kernel pair.
///
/// The two slices interleave into a single cycle of length 2n carrying D on
/// even→odd steps and U on odd→even steps. Single- and double-excitation
/// ratios against the all-zeros zigzag determine D and U up to a diagonal
/// gauge and scale; the dominant eigenvector of the fitted product fixes the
/// gauge so both kernels come out row-stochastic — exactly the original pair
/// whenever the law is exactly of zigzag product form. Acceptance is again
/// by full verification plus the conditional screen on the 2n-cycle.
pub fn is_hzcmc(
    joint: &HzJointDistribution,
    eps: f64,
) -> Result<(bool, Option<(StochasticKernel, StochasticKernel)>)> {
    let s = joint.kappa + 1;
    let n = joint.n;
    if n < 2 {
        return Err(Error::InvalidParameter(
            "zigzag cyclic fit needs a cycle of length at least 2".into(),
        ));
    }
    for (index, &v) in joint.p.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::ZeroProbabilityConfig { index });
        }
    }

    // interleave (w, w') into zigzag codes: digit 2i is w_i, digit 2i+1 is w'_i
    let zlen = 2 * n;
    let mut q = vec![0.0; joint.p.len()];
    for w in 0..joint.states {
        let wc = decode_config(w, n, s);
        for wp in 0..joint.states {
            let wpc = decode_config(wp, n, s);
            let mut zc = vec![0usize; zlen];
            for i in 0..n {
                zc[2 * i] = wc[i];
                zc[2 * i + 1] = wpc[i];
            }
            q[config_code(&zc, s)] = joint.p[w * joint.states + wp];
        }
    }

    if !markov_field_screen(&q, zlen, s, eps) {
        return Ok((false, None));
    }

    let z0 = q[0];
    let ha: Vec<f64> = (0..s).map(|a| q[a] / z0).collect();
    let hb: Vec<f64> = (0..s).map(|b| q[b * s] / z0).collect();
    let mut dt = vec![0.0; s * s];
    let mut ut = vec![0.0; s * s];
    for a in 0..s {
        for b in 0..s {
            dt[a * s + b] = q[a + b * s] / z0 / (ha[a] * hb[b]).sqrt();
            ut[b * s + a] = q[b * s + a * s * s] / z0 / (hb[b] * ha[a]).sqrt();
        }
    }
    let prod = linalg::mat_mul(&dt, &ut, s);
    let sd = perron(&NonnegMatrix::new(s, prod)?, EPS_EIG, MAX_EIG_ITER)?;
    let sv = linalg::mat_vec(&ut, &sd.right, s);
    let mut d = vec![0.0; s * s];
    let mut u = vec![0.0; s * s];
    for a in 0..s {
        for b in 0..s {
            d[a * s + b] = dt[a * s + b] * sv[b] / (sd.lambda * sd.right[a]);
            u[b * s + a] = ut[b * s + a] * sd.right[a] / sv[b];
        }
    }
    let dk = StochasticKernel::new(joint.kappa, d, 1e-9)?;
    let uk = StochasticKernel::new(joint.kappa, u, 1e-9)?;

    let predicted = hzcmc_joint(&dk, &uk, n)?;
    let ok = joint
        .p
        .iter()
        .zip(predicted.p.iter())
        .all(|(a, b)| (a - b).abs() <= eps);
    if ok {
        Ok((true, Some((dk, uk))))
    } else {
        Ok((false, None))
    }
}
