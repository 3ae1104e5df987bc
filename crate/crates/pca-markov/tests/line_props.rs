//! Properties of the line-invariance machinery: the conditioned residual
//! scan agrees with the direct product comparison, passing instances stay
//! clean at longer word depths, symmetric rules reduce product invariance
//! to the single-letter criterion, and the binary product-invariant family
//! separates the line from the zigzag and from small cycles.

use pca_markov::gen::{
    gen_commuting_pair, gen_kappa1_case2, gen_random_kernel, gen_random_tm, gen_symmetric_tm,
};
use pca_markov::hz::{analyze_hz, kernel_pair_to_tm};
use pca_markov::line::{
    check_cyclic_line_invariance, check_iid_sufficient, check_line_invariance,
    check_line_invariance_direct, check_line_invariance_to_depth, classify_kappa1, markov2_lift,
    spectral_necessity_report,
};
use pca_markov::types::{ProbVector, StochasticKernel, TransitionMatrix, EPS_COND, EPS_EIG, EPS_STOCH};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Binary rule with T(1,0,1)·T(0,1,0) = T(1,1,0)·T(0,0,1), the mirrored
/// product-invariant family, with the stationary marginal from the
/// four-corner ratio formula.
fn mirrored_product_family(seed: u64) -> (TransitionMatrix, ProbVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let q00: f64 = rng.gen_range(0.1..0.9);
        let q01: f64 = rng.gen_range(0.1..0.9);
        let q10: f64 = rng.gen_range(0.1..0.9);
        let q11 = 1.0 - q10 * (1.0 - q01) / q00;
        if !(0.05..=0.95).contains(&q11) {
            continue;
        }
        let (t000, t110, t010, t100) = (1.0 - q00, 1.0 - q11, 1.0 - q01, 1.0 - q10);
        let den = t000 + t110 - t010 - t100;
        if den.abs() <= 0.02 {
            continue;
        }
        let rho0 = (t000 * t110 - t010 * t100) / den;
        if !(0.05..=0.95).contains(&rho0) {
            continue;
        }
        let q = [[q00, q01], [q10, q11]];
        let tm = TransitionMatrix::from_fn(
            1,
            |a, b, c| if c == 1 { q[a][b] } else { 1.0 - q[a][b] },
            EPS_STOCH,
        )
        .unwrap();
        let rho = ProbVector::new(vec![rho0, 1.0 - rho0], EPS_STOCH).unwrap();
        return (tm, rho);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The conditioned residual scan and the direct product comparison are
    /// algebraically equivalent; they must agree on accept/reject.
    #[test]
    fn residual_and_direct_forms_agree(seed in any::<u64>(), kappa in 1usize..=2) {
        let (d, u) = gen_commuting_pair(kappa, seed).unwrap();
        let tm = kernel_pair_to_tm(&d, &u).unwrap();
        let sol = analyze_hz(&tm, EPS_COND, EPS_EIG).unwrap();
        let sol = sol.solution().unwrap();
        let m = sol.d.compose(&sol.u);
        let depth = kappa + 2;
        let a = check_line_invariance_to_depth(&tm, &m, &sol.rho, EPS_COND, depth).unwrap();
        let b = check_line_invariance_direct(&tm, &m, &sol.rho, EPS_COND, depth).unwrap();
        prop_assert!(a.pass && b.pass);

        let free = gen_random_tm(kappa, seed).unwrap();
        let uni = ProbVector::uniform(kappa + 1);
        let mu = StochasticKernel::rank_one(&uni);
        let fa = check_line_invariance_to_depth(&free, &mu, &uni, EPS_COND, depth).unwrap();
        let fb = check_line_invariance_direct(&free, &mu, &uni, EPS_COND, depth).unwrap();
        prop_assert_eq!(fa.pass, fb.pass);
    }

    /// Accepted instances stay violation-free three word-lengths past the
    /// decision depth.
    #[test]
    fn longer_words_add_no_violation(seed in any::<u64>(), kappa in 1usize..=2) {
        let (d, u) = gen_commuting_pair(kappa, seed).unwrap();
        let tm = kernel_pair_to_tm(&d, &u).unwrap();
        let sol = analyze_hz(&tm, EPS_COND, EPS_EIG).unwrap();
        let sol = sol.solution().unwrap();
        let m = sol.d.compose(&sol.u);
        prop_assert!(check_line_invariance(&tm, &m, &sol.rho, EPS_COND).unwrap().pass);
        let deep = check_line_invariance_to_depth(&tm, &m, &sol.rho, 1e-9, kappa + 5).unwrap();
        prop_assert!(deep.pass, "depth {} worst {:?} residual {}", kappa + 5, deep.worst_word, deep.worst_residual);
    }

    /// For left-right symmetric rules, product invariance on the line is
    /// equivalent to the single-letter criterion — the checks agree on
    /// every (rule, marginal) pair.
    #[test]
    fn symmetric_rules_reduce_to_single_letter_test(seed in any::<u64>(), rho_seed in any::<u64>(), kappa in 1usize..=2) {
        let tm = gen_symmetric_tm(kappa, seed).unwrap();
        let row = gen_random_kernel(kappa, rho_seed).unwrap();
        for rho in [ProbVector::uniform(kappa + 1), ProbVector::new(row.row(0).to_vec(), EPS_STOCH).unwrap()] {
            let m = StochasticKernel::rank_one(&rho);
            let line = check_line_invariance(&tm, &m, &rho, EPS_COND).unwrap();
            let single = check_iid_sufficient(&tm, &rho, EPS_COND).unwrap();
            prop_assert_eq!(line.pass, single, "marginal {:?}", rho.as_slice());
        }
    }

    /// The memory-2 lift factorizes M_{a,b}·T(a,b,c) exactly for arbitrary
    /// inputs, and its first component matches the zigzag kernel when one
    /// exists.
    #[test]
    fn memory_two_lift_identity(seed in any::<u64>(), mseed in any::<u64>(), kappa in 1usize..=3) {
        let tm = gen_random_tm(kappa, seed).unwrap();
        let m = gen_random_kernel(kappa, mseed).unwrap();
        let lift = markov2_lift(&tm, &m).unwrap();
        let s = kappa + 1;
        for a in 0..s {
            for c in 0..s {
                let dac = lift.d.get(a, c);
                if dac > 0.0 {
                    let row_sum: f64 = (0..s).map(|b| lift.u3[(a * s + c) * s + b]).sum();
                    prop_assert!((row_sum - 1.0).abs() <= 1e-12);
                }
                for b in 0..s {
                    let lhs = dac * lift.u3[(a * s + c) * s + b];
                    let rhs = m.get(a, b) * tm.t(a, b, c);
                    prop_assert!((lhs - rhs).abs() <= 1e-13);
                }
            }
        }

        let (d, u) = gen_commuting_pair(kappa, seed).unwrap();
        let ctm = kernel_pair_to_tm(&d, &u).unwrap();
        let sol = analyze_hz(&ctm, EPS_COND, EPS_EIG).unwrap();
        let sol = sol.solution().unwrap();
        let du = sol.d.compose(&sol.u);
        let clift = markov2_lift(&ctm, &du).unwrap();
        prop_assert!(clift.d.inf_distance(&sol.d) <= 1e-9);
    }
}

/// The mirrored product-invariant family: invariant on the line, but both
/// letter matrices have rank 2, which excludes the same product law from
/// all but finitely many cycle lengths — and empirically from every small
/// one.
#[test]
fn mirrored_family_line_yes_cycles_no() {
    for seed in 0..25u64 {
        let (tm, rho) = mirrored_product_family(seed);
        let m = StochasticKernel::rank_one(&rho);
        let line = check_line_invariance(&tm, &m, &rho, 1e-9).unwrap();
        assert!(
            line.pass,
            "seed {seed}: worst {:?} residual {}",
            line.worst_word, line.worst_residual
        );

        let rep = spectral_necessity_report(&tm, &m, &rho).unwrap();
        for l in &rep.letters {
            assert_eq!(l.rank, 2, "seed {seed} letter {}", l.x);
        }

        // The product law is not invariant on short cycles, and the
        // deviation scale shrinks geometrically with circumference (the
        // trace defect is a power of a subdominant factor), so a fixed
        // tolerance only separates reliably at small n: n = 2 sits near
        // 1e-5 and n = 3 near 1e-7 across this seed range, while n = 4 can
        // dip below 1e-9 without being an exact solution. Assert the two
        // robust lengths and the no-two-multiples consequence of the rank
        // obstruction.
        let c2 = check_cyclic_line_invariance(&tm, &m, 2, EPS_COND).unwrap();
        let c3 = check_cyclic_line_invariance(&tm, &m, 3, EPS_COND).unwrap();
        let c4 = check_cyclic_line_invariance(&tm, &m, 4, EPS_COND).unwrap();
        assert!(!c2.pass, "seed {seed}: residual {}", c2.worst_residual);
        assert!(!c3.pass, "seed {seed}: residual {}", c3.worst_residual);
        assert!(
            !(c2.pass && c4.pass),
            "seed {seed}: invariance at two multiples of 2 would force rank-1 letter matrices"
        );
    }
}

/// The product-invariant family in its unmirrored form: the line law is a
/// product measure, yet the zigzag analysis correctly rejects — the two
/// structures genuinely separate. The binary classifier agrees on every
/// count.
#[test]
fn product_family_separates_line_from_zigzag() {
    for seed in 0..25u64 {
        let (tm, rho) = gen_kappa1_case2(seed).unwrap();
        let m = StochasticKernel::rank_one(&rho);
        assert!(check_line_invariance(&tm, &m, &rho, 1e-9).unwrap().pass);
        assert!(check_iid_sufficient(&tm, &rho, EPS_COND).unwrap());

        let verdict = analyze_hz(&tm, EPS_COND, EPS_EIG).unwrap();
        assert!(
            !verdict.is_markov(),
            "seed {seed}: the zigzag law of this family is never Markov"
        );

        let rep = spectral_necessity_report(&tm, &m, &rho).unwrap();
        assert!(rep.all_pass, "eigenvalue necessities hold for an invariant law");

        let cls = classify_kappa1(&tm).unwrap();
        assert!(cls.cond_ii_a);
        assert!(cls.markov_invariant_exists);
        let r = cls.rho.expect("family carries its marginal");
        assert!((r.get(0) - rho.get(0)).abs() <= 1e-12);
    }
}

/// Random binary rules: the classifier's verdict is the disjunction of its
/// branch flags, and generically no branch holds.
#[test]
fn binary_classifier_is_branch_disjunction() {
    let mut invariant_found = 0;
    for seed in 0..60u64 {
        let tm = gen_random_tm(1, seed).unwrap();
        let cls = classify_kappa1(&tm).unwrap();
        assert_eq!(
            cls.markov_invariant_exists,
            cls.cond_i || cls.cond_ii_a || cls.cond_ii_b
        );
        if cls.markov_invariant_exists {
            invariant_found += 1;
        }
    }
    assert!(
        invariant_found <= 3,
        "free draws should almost never satisfy the algebraic constraints, got {invariant_found}"
    );
}
