use proptest::prelude::*;
use rand::Rng;
use spoofsim_core::finite_math::{MatrixModP, PrimeModulus};
use spoofsim_core::learner::{permanent_learning, LearnerConfig, OracleRegistry};
use spoofsim_core::oracle::{
    make_oracle, max_tester_calls, permanent_computation_test, self_correct, ExactOracle, FailureStage, OracleSpec,
    PermanentOracle,
};
use spoofsim_core::permanent::{cofactor_expand, permanent_bruteforce, permanent_ryser};
use spoofsim_core::rng::seeded;

fn p101() -> PrimeModulus {
    PrimeModulus::new(101).unwrap()
}

#[test]
fn exact_oracle_passes_with_exactly_the_call_bound() {
    let mut rng = seeded(1);
    for m in 1..=3 {
        let oracle = ExactOracle::new(m, p101());
        let v = permanent_computation_test(m, 2, p101(), &oracle, &mut rng).unwrap();
        assert!(v.accepted);
        assert_eq!(v.failure_stage, FailureStage::None);
        assert_eq!(v.calls_made, max_tester_calls(m, 2));
    }
}

#[test]
fn faulty_oracles_are_caught() {
    let mut rng = seeded(2);
    let zero = make_oracle(&OracleSpec::ConstantZero, 3, p101(), &[]).unwrap();
    let v = permanent_computation_test(3, 2, p101(), zero.as_ref(), &mut rng).unwrap();
    assert!(!v.accepted);
    assert_eq!(v.failure_stage, FailureStage::BaseCase);

    let noisy = make_oracle(&OracleSpec::EpsilonFaulty { epsilon: 0.3 }, 3, p101(), &[]).unwrap();
    let rejected = (0..20)
        .filter(|_| !permanent_computation_test(3, 4, p101(), noisy.as_ref(), &mut rng).unwrap().accepted)
        .count();
    assert_eq!(rejected, 20);
}

#[test]
fn self_correction_repairs_a_lightly_faulty_oracle() {
    let mut rng = seeded(3);
    let m = 3;
    let noisy = make_oracle(&OracleSpec::EpsilonFaulty { epsilon: 0.02 }, m, p101(), &[]).unwrap();
    for _ in 0..100 {
        let x = MatrixModP::random(m, p101(), &mut rng);
        assert_eq!(self_correct(noisy.as_ref(), &x, 15, &mut rng).unwrap(), permanent_ryser(&x).unwrap());
    }
}

#[test]
fn learner_stops_where_the_registry_runs_out() {
    let mut rng = seeded(4);
    let config = LearnerConfig::new(1, 32);
    let cheap = OracleRegistry::parse(&["constant-zero", "sample-lookup"]).unwrap();
    let alg = permanent_learning(&config, PrimeModulus::new(5).unwrap(), &cheap, &mut rng).unwrap();
    assert_eq!(alg.m, 2);
    assert!(alg.evaluator.is_fallback());
    for _ in 0..50 {
        let x = MatrixModP::random(2, alg.p, &mut rng);
        assert_eq!(alg.evaluator.evaluate(&x, &mut rng), permanent_ryser(&x).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ryser_matches_brute_force(seed in any::<u64>(), m in 1usize..7, p in prop::sample::select(vec![2u64, 3, 101, 65537])) {
        let p = PrimeModulus::new(p).unwrap();
        let x = MatrixModP::random(m, p, &mut seeded(seed));
        prop_assert_eq!(permanent_ryser(&x).unwrap(), permanent_bruteforce(&x).unwrap());
    }

    #[test]
    fn cofactor_expansion_reproduces_permanent(seed in any::<u64>(), m in 2usize..6) {
        let mut rng = seeded(seed);
        let x = MatrixModP::random(m, p101(), &mut rng);
        let minors: Vec<u64> = (1..=m).map(|j| permanent_ryser(&x.first_row_minor(j)).unwrap()).collect();
        prop_assert_eq!(cofactor_expand(&x, &minors).unwrap(), permanent_ryser(&x).unwrap());
    }

    #[test]
    fn permanent_is_invariant_under_row_swaps(seed in any::<u64>(), m in 2usize..6) {
        let mut rng = seeded(seed);
        let x = MatrixModP::random(m, p101(), &mut rng);
        let (a, b) = (rng.gen_range(0..m), rng.gen_range(0..m));
        let mut rows: Vec<Vec<u64>> = (0..m).map(|i| x.row(i).to_vec()).collect();
        rows.swap(a, b);
        let swapped = MatrixModP::from_rows(&rows, p101()).unwrap();
        prop_assert_eq!(permanent_ryser(&swapped).unwrap(), permanent_ryser(&x).unwrap());
    }
}
