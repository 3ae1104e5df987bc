//! Monte Carlo simulation of the space-time diagram on a cylinder.
//!
//! All randomness comes from a counter-based stream: the variate that
//! updates cell i from row t is a pure function of (seed, t, i). That makes
//! diagrams reproducible by construction and bit-exact under any work
//! split — a row can be filled serially or by eight threads and every byte
//! comes out the same.

use std::thread;

use crate::types::{
    Error, ProbVector, Result, TransitionMatrix, DEFAULT_STATE_BUDGET,
};

/// Domain tag for the initial row, disjoint from every step index.
const INIT_DOMAIN: u64 = u64::MAX;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The (seed, t, i) stream: three finalizer rounds with the key material
/// folded in between, so neighboring counters land far apart.
fn cell_u64(seed: u64, t: u64, i: u64) -> u64 {
    mix64(mix64(mix64(seed ^ 0x6A09_E667_F3BC_C909) ^ t.wrapping_mul(GOLDEN)) ^ i.wrapping_mul(GOLDEN))
}

/// Uniform in [0, 1) from the top 53 bits.
fn unit_f64(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF sampling along a probability row.
fn sample_row(row: &[f64], r: f64) -> u8 {
    let mut acc = 0.0;
    for (c, &p) in row.iter().enumerate() {
        acc += p;
        if r < acc {
            return c as u8;
        }
    }
    (row.len() - 1) as u8
}

#[derive(Debug, Clone)]
pub enum InitialCondition {
    /// i.i.d. cells drawn from the given marginal (stream index t = 2⁶⁴−1)
    Iid(ProbVector),
    /// explicit first row
    Row(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceTimeDiagram {
    pub width: usize,
    pub steps: usize,
    pub kappa: usize,
    pub seed: u64,
    /// steps+1 rows of width cells each; rows[0] is the initial condition
    pub rows: Vec<Vec<u8>>,
}

fn default_threads() -> usize {
    let hw = thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("PCA_MARKOV_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        Some(cap) if cap >= 1 => hw.min(cap),
        _ => hw,
    }
}

pub fn simulate(
    tm: &TransitionMatrix,
    width: usize,
    steps: usize,
    seed: u64,
    init: &InitialCondition,
) -> Result<SpaceTimeDiagram> {
    simulate_with_threads(tm, width, steps, seed, init, default_threads())
}

pub fn simulate_with_threads(
    tm: &TransitionMatrix,
    width: usize,
    steps: usize,
    seed: u64,
    init: &InitialCondition,
    threads: usize,
) -> Result<SpaceTimeDiagram> {
    if width < 2 {
        return Err(Error::InvalidParameter(
            "cylinder width must be at least 2".into(),
        ));
    }
    if tm.kappa() > u8::MAX as usize {
        return Err(Error::InvalidParameter(
            "cell states beyond 255 are not representable in diagrams".into(),
        ));
    }
    let threads = threads.clamp(1, width);
    let s = tm.size();

    let first: Vec<u8> = match init {
        InitialCondition::Iid(rho) => {
            if rho.len() != s {
                return Err(Error::KappaMismatch {
                    expected: tm.kappa(),
                    got: rho.len() - 1,
                });
            }
            (0..width)
                .map(|i| sample_row(rho.as_slice(), unit_f64(cell_u64(seed, INIT_DOMAIN, i as u64))))
                .collect()
        }
        InitialCondition::Row(row) => {
            if row.len() != width {
                return Err(Error::InvalidParameter(format!(
                    "initial row has {} cells, expected {width}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&c| c as usize >= s) {
                return Err(Error::InvalidParameter(format!(
                    "initial cell value {bad} outside the alphabet"
                )));
            }
            row.clone()
        }
    };

    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(first);
    let chunk = width.div_ceil(threads);
    for t in 0..steps {
        let prev = rows.last().unwrap();
        let mut next = vec![0u8; width];
        thread::scope(|scope| {
            for (ci, slice) in next.chunks_mut(chunk).enumerate() {
                let lo = ci * chunk;
                let prev = &prev;
                scope.spawn(move || {
                    for (off, cell) in slice.iter_mut().enumerate() {
                        let i = lo + off;
                        let a = prev[i] as usize;
                        let b = prev[(i + 1) % width] as usize;
                        let r = unit_f64(cell_u64(seed, t as u64, i as u64));
                        *cell = sample_row(tm.row(a, b), r);
                    }
                });
            }
        });
        rows.push(next);
    }

    Ok(SpaceTimeDiagram {
        width,
        steps,
        kappa: tm.kappa(),
        seed,
        rows,
    })
}

impl SpaceTimeDiagram {
    /// One row per line, cells as space-separated integers.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let mut first = true;
            for &c in row {
                if !first {
                    out.push(' ');
                }
                out.push_str(&c.to_string());
                first = false;
            }
            out.push('\n');
        }
        out
    }

    /// Header of four little-endian u64 words (width, steps, kappa, seed),
    /// then row-major cell bytes.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + (self.steps + 1) * self.width);
        for word in [
            self.width as u64,
            self.steps as u64,
            self.kappa as u64,
            self.seed,
        ] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        for row in &self.rows {
            out.extend_from_slice(row);
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 32 {
            return Err(Error::InvalidParameter(
                "diagram binary shorter than its header".into(),
            ));
        }
        let word = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
        let width = word(0) as usize;
        let steps = word(1) as usize;
        let kappa = word(2) as usize;
        let seed = word(3);
        let expected = 32 + (steps + 1) * width;
        if width == 0 || bytes.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "diagram binary has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let mut rows = Vec::with_capacity(steps + 1);
        for t in 0..=steps {
            let row = bytes[32 + t * width..32 + (t + 1) * width].to_vec();
            if let Some(&bad) = row.iter().find(|&&c| c as usize > kappa) {
                return Err(Error::InvalidParameter(format!(
                    "cell value {bad} outside the alphabet in row {t}"
                )));
            }
            rows.push(row);
        }
        Ok(SpaceTimeDiagram {
            width,
            steps,
            kappa,
            seed,
            rows,
        })
    }
}

/// Counts of cyclic length-k windows over all rows after the burn-in.
#[derive(Debug, Clone)]
pub struct PatternStats {
    pub kappa: usize,
    pub window: usize,
    pub burn_in: usize,
    pub sampled_rows: usize,
    pub width: usize,
    pub counts: Vec<u64>,
}

impl PatternStats {
    pub fn total(&self) -> u64 {
        (self.sampled_rows * self.width) as u64
    }

    pub fn freq(&self, pattern: &[usize]) -> f64 {
        let s = self.kappa + 1;
        let code = crate::oracle::config_code(pattern, s);
        self.counts[code] as f64 / self.total() as f64
    }
}

pub fn pattern_stats(diagram: &SpaceTimeDiagram, k: usize, burn_in: usize) -> Result<PatternStats> {
    if k == 0 {
        return Err(Error::InvalidParameter("window must be at least 1".into()));
    }
    if k > diagram.width {
        return Err(Error::WindowTooLarge {
            k,
            width: diagram.width,
        });
    }
    if burn_in >= diagram.steps {
        return Err(Error::InvalidParameter(format!(
            "burn-in {burn_in} leaves no rows out of {} steps",
            diagram.steps
        )));
    }
    let s = diagram.kappa + 1;
    let patterns = match (s as u64).checked_pow(k as u32) {
        Some(p) if p <= DEFAULT_STATE_BUDGET as u64 => p as usize,
        other => {
            return Err(Error::BudgetExceeded {
                required: other.map(|v| v as usize).unwrap_or(usize::MAX),
                budget: DEFAULT_STATE_BUDGET,
            })
        }
    };
    let mut counts = vec![0u64; patterns];
    for row in &diagram.rows[burn_in + 1..] {
        for i in 0..diagram.width {
            let mut code = 0usize;
            for j in (0..k).rev() {
                code = code * s + row[(i + j) % diagram.width] as usize;
            }
            counts[code] += 1;
        }
    }
    Ok(PatternStats {
        kappa: diagram.kappa,
        window: k,
        burn_in,
        sampled_rows: diagram.steps - burn_in,
        width: diagram.width,
        counts,
    })
}

/// Adjacent-pair frequencies with batch-means error bars: consecutive rows
/// are correlated, so the variance estimate comes from means over blocks of
/// rows rather than from cell counts.
#[derive(Debug, Clone)]
pub struct PairStats {
    pub kappa: usize,
    pub burn_in: usize,
    pub block_rows: usize,
    pub blocks: usize,
    /// mean frequency of the ordered pair (a, b), indexed a·(κ+1)+b
    pub freq: Vec<f64>,
    /// standard error of each mean, from the spread of block means
    pub se: Vec<f64>,
}

pub const DEFAULT_BLOCK_ROWS: usize = 50;

pub fn pair_stats(
    diagram: &SpaceTimeDiagram,
    burn_in: usize,
    block_rows: usize,
) -> Result<PairStats> {
    if block_rows == 0 {
        return Err(Error::InvalidParameter("block size must be positive".into()));
    }
    if burn_in >= diagram.steps {
        return Err(Error::InvalidParameter(format!(
            "burn-in {burn_in} leaves no rows out of {} steps",
            diagram.steps
        )));
    }
    let s = diagram.kappa + 1;
    let rows = &diagram.rows[burn_in + 1..];
    let blocks = rows.len() / block_rows;
    if blocks < 2 {
        return Err(Error::InvalidParameter(format!(
            "{} rows after burn-in give {blocks} complete blocks of {block_rows}; \
             need at least 2 for batch means",
            rows.len()
        )));
    }

    let dim = s * s;
    let mut block_means = vec![vec![0.0f64; dim]; blocks];
    for (bi, chunk) in rows.chunks(block_rows).take(blocks).enumerate() {
        let mean = &mut block_means[bi];
        for row in chunk {
            for i in 0..diagram.width {
                let a = row[i] as usize;
                let b = row[(i + 1) % diagram.width] as usize;
                mean[a * s + b] += 1.0;
            }
        }
        let norm = (block_rows * diagram.width) as f64;
        for v in mean.iter_mut() {
            *v /= norm;
        }
    }

    let mut freq = vec![0.0; dim];
    for mean in &block_means {
        for (f, &v) in freq.iter_mut().zip(mean.iter()) {
            *f += v;
        }
    }
    for f in freq.iter_mut() {
        *f /= blocks as f64;
    }
    let mut se = vec![0.0; dim];
    for mean in &block_means {
        for (e, (&v, &f)) in se.iter_mut().zip(mean.iter().zip(freq.iter())) {
            *e += (v - f) * (v - f);
        }
    }
    for e in se.iter_mut() {
        *e = (*e / (blocks as f64 * (blocks as f64 - 1.0))).sqrt();
    }

    Ok(PairStats {
        kappa: diagram.kappa,
        burn_in,
        block_rows,
        blocks,
        freq,
        se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{EPS_STOCH, StochasticKernel};

    fn product_tm(rho: &[f64]) -> TransitionMatrix {
        TransitionMatrix::from_fn(rho.len() - 1, |_, _, c| rho[c], EPS_STOCH).unwrap()
    }

    #[test]
    fn deterministic_rule_reproduces_the_automaton() {
        // xor rule: next cell = left ^ right
        let tm = TransitionMatrix::from_fn(
            1,
            |a, b, c| if c == a ^ b { 1.0 } else { 0.0 },
            EPS_STOCH,
        )
        .unwrap();
        let init = vec![1u8, 0, 0, 1, 1, 0, 1, 0];
        let d = simulate(&tm, 8, 5, 99, &InitialCondition::Row(init.clone())).unwrap();
        let mut row = init;
        for t in 1..=5 {
            let next: Vec<u8> = (0..8).map(|i| row[i] ^ row[(i + 1) % 8]).collect();
            assert_eq!(d.rows[t], next, "row {t}");
            row = next;
        }
    }

    #[test]
    fn reproducible_and_thread_invariant() {
        let tm = crate::gen::gen_random_tm(2, 31).unwrap();
        let init = InitialCondition::Iid(ProbVector::uniform(3));
        let a = simulate_with_threads(&tm, 64, 40, 7, &init, 1).unwrap();
        let b = simulate_with_threads(&tm, 64, 40, 7, &init, 4).unwrap();
        let c = simulate_with_threads(&tm, 64, 40, 7, &init, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let again = simulate_with_threads(&tm, 64, 40, 7, &init, 3).unwrap();
        assert_eq!(a, again);
        // a different seed must actually change something
        let other = simulate_with_threads(&tm, 64, 40, 8, &init, 3).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn product_rule_rows_are_iid() {
        let rho = [0.3, 0.7];
        let tm = product_tm(&rho);
        let rv = ProbVector::new(rho.to_vec(), EPS_STOCH).unwrap();
        let d = simulate(&tm, 512, 50, 1234, &InitialCondition::Iid(rv)).unwrap();
        // all cells from row 1 on are i.i.d. ρ by construction
        let n = (512 * 50) as f64;
        let ones: u64 = d.rows[1..]
            .iter()
            .map(|r| r.iter().filter(|&&c| c == 1).count() as u64)
            .sum();
        let se = (0.7 * 0.3 / n).sqrt();
        assert!(
            (ones as f64 / n - 0.7).abs() <= 4.0 * se,
            "one-frequency {} vs 0.7 ± {}",
            ones as f64 / n,
            4.0 * se
        );
    }

    #[test]
    fn constant_rule_concentrates_pattern_mass() {
        let tm = TransitionMatrix::from_fn(1, |_, _, c| if c == 0 { 1.0 } else { 0.0 }, EPS_STOCH)
            .unwrap();
        let d = simulate(
            &tm,
            16,
            10,
            5,
            &InitialCondition::Row(vec![1; 16]),
        )
        .unwrap();
        let stats = pattern_stats(&d, 3, 2).unwrap();
        assert_eq!(stats.total(), 16 * 8);
        assert_eq!(stats.counts[0], 16 * 8);
        assert_eq!(stats.freq(&[0, 0, 0]), 1.0);
    }

    #[test]
    fn pattern_stats_validates_window() {
        let tm = product_tm(&[0.5, 0.5]);
        let d = simulate(&tm, 8, 10, 1, &InitialCondition::Iid(ProbVector::uniform(2))).unwrap();
        assert!(matches!(
            pattern_stats(&d, 9, 2),
            Err(Error::WindowTooLarge { k: 9, width: 8 })
        ));
        assert!(pattern_stats(&d, 8, 2).is_ok());
        assert!(matches!(
            pattern_stats(&d, 2, 10),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn product_rule_pair_frequencies() {
        let rho = [0.4, 0.6];
        let tm = product_tm(&rho);
        let rv = ProbVector::new(rho.to_vec(), EPS_STOCH).unwrap();
        let d = simulate(&tm, 256, 400, 77, &InitialCondition::Iid(rv)).unwrap();
        let stats = pair_stats(&d, 100, DEFAULT_BLOCK_ROWS).unwrap();
        assert_eq!(stats.blocks, 6);
        for a in 0..2 {
            for b in 0..2 {
                let expect = rho[a] * rho[b];
                let got = stats.freq[a * 2 + b];
                let se = stats.se[a * 2 + b];
                assert!(
                    (got - expect).abs() <= 4.0 * se,
                    "pair ({a},{b}): {got} vs {expect} ± {}",
                    4.0 * se
                );
            }
        }
    }

    #[test]
    fn zigzag_instance_pair_frequencies_match_kernel_product() {
        let (dk, uk) = crate::gen::gen_commuting_pair(1, 321).unwrap();
        let tm = crate::hz::kernel_pair_to_tm(&dk, &uk).unwrap();
        let m = dk.compose(&uk);
        let rho = crate::spectral::stationary_det(&m).unwrap();
        let d = simulate(&tm, 256, 600, 2024, &InitialCondition::Iid(rho.clone())).unwrap();
        let stats = pair_stats(&d, 200, DEFAULT_BLOCK_ROWS).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let expect = rho.get(a) * m.get(a, b);
                let got = stats.freq[a * 2 + b];
                let se = stats.se[a * 2 + b].max(1e-6);
                assert!(
                    (got - expect).abs() <= 4.0 * se,
                    "pair ({a},{b}): {got} vs {expect} ± {}",
                    4.0 * se
                );
            }
        }
    }

    #[test]
    fn triple_frequencies_match_markov_chain() {
        let (dk, uk) = crate::gen::gen_commuting_pair(1, 55).unwrap();
        let tm = crate::hz::kernel_pair_to_tm(&dk, &uk).unwrap();
        let m = dk.compose(&uk);
        let rho = crate::spectral::stationary_det(&m).unwrap();
        let (width, burn_in) = (256usize, 300usize);
        let d = simulate(&tm, width, 1300, 31337, &InitialCondition::Iid(rho.clone())).unwrap();
        let stats = pattern_stats(&d, 3, burn_in).unwrap();
        // slow-mixing rule: consecutive rows and overlapping windows are
        // strongly correlated, so error bars come from block means over
        // 50-row blocks, not from per-window counts
        let sampled: &[Vec<u8>] = &d.rows[burn_in + 1..];
        let blocks: Vec<&[Vec<u8>]> = sampled.chunks(DEFAULT_BLOCK_ROWS).collect();
        assert_eq!(blocks.len(), 20);
        for a in 0..2usize {
            for b in 0..2usize {
                for c in 0..2usize {
                    let expect = rho.get(a) * m.get(a, b) * m.get(b, c);
                    let got = stats.freq(&[a, b, c]);
                    let means: Vec<f64> = blocks
                        .iter()
                        .map(|rows| {
                            let hits: usize = rows
                                .iter()
                                .map(|row| {
                                    (0..width)
                                        .filter(|&i| {
                                            row[i] as usize == a
                                                && row[(i + 1) % width] as usize == b
                                                && row[(i + 2) % width] as usize == c
                                        })
                                        .count()
                                })
                                .sum();
                            hits as f64 / (rows.len() * width) as f64
                        })
                        .collect();
                    let mean = means.iter().sum::<f64>() / means.len() as f64;
                    let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                        / (means.len() * (means.len() - 1)) as f64;
                    let se = var.sqrt().max(1e-6);
                    assert!(
                        (got - mean).abs() <= 1e-12,
                        "pattern_stats frequency must equal the block-mean average"
                    );
                    assert!(
                        (got - expect).abs() <= 4.0 * se,
                        "triple ({a},{b},{c}): {got} vs {expect} ± {}",
                        4.0 * se
                    );
                }
            }
        }
    }

    #[test]
    fn binary_round_trip_and_text_shape() {
        let tm = crate::gen::gen_random_tm(2, 13).unwrap();
        let d = simulate(&tm, 10, 6, 3, &InitialCondition::Iid(ProbVector::uniform(3))).unwrap();
        let bytes = d.to_binary();
        assert_eq!(bytes.len(), 32 + 7 * 10);
        let back = SpaceTimeDiagram::from_binary(&bytes).unwrap();
        assert_eq!(d, back);

        let text = d.to_text();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().all(|l| l.split(' ').count() == 10));

        assert!(SpaceTimeDiagram::from_binary(&bytes[..20]).is_err());
        let mut corrupt = bytes.clone();
        corrupt[40] = 9; // cell value outside kappa=2 alphabet
        assert!(SpaceTimeDiagram::from_binary(&corrupt).is_err());
    }

    #[test]
    fn simulate_validates_inputs() {
        let tm = product_tm(&[0.5, 0.5]);
        assert!(matches!(
            simulate(&tm, 1, 5, 0, &InitialCondition::Iid(ProbVector::uniform(2))),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            simulate(&tm, 8, 5, 0, &InitialCondition::Iid(ProbVector::uniform(3))),
            Err(Error::KappaMismatch { .. })
        ));
        assert!(matches!(
            simulate(&tm, 8, 5, 0, &InitialCondition::Row(vec![0, 1, 2, 0, 1, 0, 1, 0])),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            simulate(&tm, 8, 5, 0, &InitialCondition::Row(vec![0, 1])),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn kernel_product_row_sums_for_doc() {
        // guard: compose() used in tests above really is matrix product
        let (dk, uk) = crate::gen::gen_commuting_pair(1, 9).unwrap();
        let m: StochasticKernel = dk.compose(&uk);
        for a in 0..2 {
            let sum: f64 = (0..2).map(|b| m.get(a, b)).sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }
}
