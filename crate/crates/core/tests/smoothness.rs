mod common;

use auctionlab_core::engine::{run_auction, MechanismKind};
use auctionlab_core::equilibrium::GameInstance;
use auctionlab_core::gen::{self, Lattice};
use auctionlab_core::rational::{bucketing_beta, int, ratio};
use auctionlab_core::smoothness::{
    check_payment_identity, check_smoothness, check_smoothness_via_extension, poa_bound, Approximator, DeviationFamily,
    ProfileDomain, Verdict,
};
use auctionlab_core::strategies::PlanFamily;
use auctionlab_core::{optimal_welfare, Valuation};
use common::{draft_instance, lower_matrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FAMILIES: [PlanFamily; 4] = [
    PlanFamily::Abstain,
    PlanFamily::Target,
    PlanFamily::UntilWinBest,
    PlanFamily::ConstantTake(2),
];

#[test]
fn poa_bound_values() {
    assert_eq!(poa_bound(ratio(1, 2), int(2)).unwrap(), int(4));
    assert_eq!(poa_bound(ratio(1, 4), int(2)).unwrap(), int(8));
    assert_eq!(poa_bound(int(1), int(1)).unwrap(), int(1));
}

#[test]
fn lower_instance_unit_demand_certificate() {
    let inst = draft_instance(lower_matrix(), MechanismKind::SingleItemDraft, int(30), 4, &FAMILIES[..3]);
    let cert = check_smoothness(&inst, DeviationFamily::UnitDemand, ratio(1, 2), int(2), ProfileDomain::Exhaustive).unwrap();
    assert!(cert.exhaustive);
    assert!(cert.all_checks_pass(), "{}", cert.report());
    assert!(cert.worst_margin.unwrap() >= int(0));
}

#[test]
fn concave_extension_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..8 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=3);
        let vals = (0..n)
            .map(|_| gen::concave_symmetric(&mut rng, m, Lattice::new(1, 4)).unwrap())
            .collect();
        let inst = draft_instance(vals, MechanismKind::Draft, int(1), 4, &FAMILIES);
        let cert = check_smoothness_via_extension(&inst, Approximator::ConcaveSymmetric, ratio(1, 4), int(2), ProfileDomain::Exhaustive)
            .unwrap();
        assert_eq!(cert.lambda, ratio(1, 4));
        assert!(cert.all_checks_pass(), "{}", cert.report());
    }
}

#[test]
fn xos_extension_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..8 {
        let n = rng.gen_range(1..=2);
        let m = rng.gen_range(1..=4);
        let vals = (0..n)
            .map(|_| gen::xos(&mut rng, m, 3, Lattice::new(1, 6)).unwrap())
            .collect();
        let inst = draft_instance(vals, MechanismKind::Draft, int(1), 4, &FAMILIES);
        let cert = check_smoothness_via_extension(&inst, Approximator::Xos, ratio(1, 4), int(2), ProfileDomain::Exhaustive).unwrap();
        assert_eq!(cert.lambda, ratio(1, 4) / bucketing_beta(m));
        assert!(cert.all_checks_pass(), "{}", cert.report());
    }
}

#[test]
fn sampled_domain_is_labelled_and_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let vals = (0..3)
        .map(|_| gen::constraint_homogeneous(&mut rng, 4, Lattice::new(1, 4)).unwrap())
        .collect();
    let inst = draft_instance(vals, MechanismKind::Draft, int(1), 10, &FAMILIES);
    let domain = ProfileDomain::Auto { count: 500, seed: 9 };
    assert!(inst.profile_count() > 100_000);
    let a = check_smoothness(&inst, DeviationFamily::Core, ratio(1, 4), int(2), domain).unwrap();
    let b = check_smoothness(&inst, DeviationFamily::Core, ratio(1, 4), int(2), domain).unwrap();
    assert!(!a.exhaustive);
    assert_eq!(a.profiles_checked, 500);
    assert_eq!(a.worst_margin, b.worst_margin);
    assert!(a.all_checks_pass(), "{}", a.report());
    assert!(check_smoothness(&inst, DeviationFamily::Core, ratio(1, 4), int(2), ProfileDomain::Exhaustive).is_err());
}

fn unit_instance(rows: &[Vec<i128>]) -> GameInstance {
    let vals: Vec<Valuation> = rows
        .iter()
        .map(|r| Valuation::unit_demand(r.iter().map(|&x| int(x)).collect()).unwrap())
        .collect();
    draft_instance(vals, MechanismKind::Draft, int(1), 4, &FAMILIES[..3])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Counterexamples replay to the recorded margin, and the verdict agrees
    /// with the sign of the worst margin.
    #[test]
    fn certificates_are_sound(
        rows in (1usize..=2, 1usize..=2).prop_flat_map(|(n, m)| prop::collection::vec(prop::collection::vec(0i128..=3, m), n)),
        lambda_num in 1i128..=8,
    ) {
        let inst = unit_instance(&rows);
        let lambda = ratio(lambda_num, 4);
        let cert = check_smoothness(&inst, DeviationFamily::UnitDemand, lambda, int(0), ProfileDomain::Exhaustive).unwrap();
        let worst = cert.worst_margin.unwrap();
        match &cert.verdict {
            Verdict::HoldsEverywhere => prop_assert!(worst >= int(0)),
            Verdict::Counterexample { margin, .. } => {
                prop_assert!(worst < int(0));
                prop_assert_eq!(*margin, worst);
                prop_assert_eq!(cert.replay(&inst).unwrap(), Some(worst));
            }
        }
    }

    #[test]
    fn payment_identities(
        rows in (1usize..=3).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(1i128..=3, n), n)),
        picks in prop::collection::vec(0usize..100, 3),
    ) {
        let inst = unit_instance(&rows);
        let (opt, _) = optimal_welfare(&inst.valuations, 1000).unwrap();
        let profile: Vec<_> = inst.plan_spaces.iter().zip(&picks).map(|(s, &k)| s[k % s.len()].clone()).collect();
        let out = run_auction(&inst.config, &profile, None).unwrap();
        let id = check_payment_identity(&out, &opt);
        prop_assert!(id.conservation);
        // positive square matrices: the optimum is a perfect matching
        prop_assert_eq!(id.partition, Some(true));
    }
}
