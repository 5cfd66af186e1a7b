mod common;

use auctionlab_core::engine::{run_auction, Bid, MechanismConfig, MechanismKind};
use auctionlab_core::equilibrium::{
    enumerate_pure_nash, is_pure_nash, solve_spe, spe_report, spe_root_alternatives, verify_correlated_equilibrium,
    welfare_ratio, GameInstance, SpeOptions, StagePin, DEFAULT_PROFILE_CAP,
};
use auctionlab_core::gen::{self, Lattice};
use auctionlab_core::rational::{int, ratio};
use auctionlab_core::strategies::{generate_plan_space, uniform_grid, Plan, PlanFamily, StateKey};
use auctionlab_core::{optimal_welfare, ItemSet, Rational, Valuation};
use common::{intro_valuations, lower_matrix, non_unique_valuations, stability_valuations};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FAMILIES: [PlanFamily; 4] = [
    PlanFamily::Abstain,
    PlanFamily::Target,
    PlanFamily::UntilWinBest,
    PlanFamily::ConstantTake(1),
];

fn single_item(n: usize, m: usize) -> MechanismConfig {
    MechanismConfig::with_default_ties(MechanismKind::SingleItemDraft, n, m).unwrap()
}

#[test]
fn lower_instance_equilibrium_with_pinned_supporter() {
    let vals = lower_matrix();
    let config = single_item(3, 3);
    let grid = uniform_grid(int(1), int(100), true).unwrap();
    let root = StateKey {
        round: 0,
        bundles: vec![ItemSet::EMPTY; 3],
    };
    let options = SpeOptions::from_bids(&grid).pin(
        root,
        StagePin {
            winner: None,
            supporter: Some(0),
        },
    );
    let sol = solve_spe(&config, &vals, &options).unwrap();
    assert_eq!(sol.opt_welfare, int(209));
    assert_eq!(sol.welfare, Some(int(171)));
    assert_eq!(sol.ratio, Some(ratio(209, 171)));
    let first = &sol.path[0];
    assert_eq!((first.winner, first.supporter, first.price, first.item), (1, Some(0), int(51), 2));

    let spaces = vals
        .iter()
        .map(|v| generate_plan_space(v, &grid, &FAMILIES, true))
        .collect();
    let mut instance = GameInstance::new(config, vals, spaces).unwrap();
    instance.include_profile(&sol.policies);
    let check = is_pure_nash(&instance, &sol.policies).unwrap();
    assert!(check.is_nash, "{:?}", check.witness);
}

#[test]
fn intro_sequential_equilibrium_and_draft_profile() {
    let eps = ratio(1, 10);
    let vals = intro_valuations(eps);
    let grid = uniform_grid(eps, int(1), true).unwrap();
    // items A, C, B
    let seq = MechanismConfig::with_default_ties(MechanismKind::SequentialItem { order: vec![0, 2, 1] }, 4, 3).unwrap();
    let sol = solve_spe(&seq, &vals, &SpeOptions::from_bids(&grid)).unwrap();
    assert_eq!(sol.welfare, Some(int(2) + eps));
    assert_eq!(sol.opt_welfare, int(3) - eps);

    let until = |bid, prefs: &[usize]| Plan::UntilWin {
        bid,
        prefs: prefs.to_vec(),
    };
    let profile = vec![
        until(Bid::above(int(0)), &[0, 1, 2]),
        until(Bid::above(eps), &[0, 1, 2]),
        until(Bid::above(eps), &[1, 2, 0]),
        until(Bid::above(eps), &[2, 0, 1]),
    ];
    let families = [
        PlanFamily::Abstain,
        PlanFamily::Target,
        PlanFamily::UntilWinBest,
        PlanFamily::ConstantTake(1),
        PlanFamily::ConstantTake(2),
        PlanFamily::ConstantTake(3),
    ];
    let spaces = vals
        .iter()
        .map(|v| generate_plan_space(v, &grid, &families, false))
        .collect();
    let draft = MechanismConfig::with_default_ties(MechanismKind::Draft, 4, 3).unwrap();
    let mut instance = GameInstance::new(draft, vals.clone(), spaces).unwrap();
    instance.include_profile(&profile);
    assert!(is_pure_nash(&instance, &profile).unwrap().is_nash);
    let (out, _) = instance.utilities(&profile).unwrap();
    assert_eq!(out.welfare(&vals).unwrap(), int(3) - eps);
}

#[test]
fn non_unique_instance_has_two_equilibria() {
    let vals = non_unique_valuations();
    let config = single_item(3, 2);
    let grid = uniform_grid(int(1), int(2), true).unwrap();
    let sols = spe_root_alternatives(&config, &vals, &SpeOptions::from_bids(&grid)).unwrap();
    let winners: Vec<usize> = sols.iter().map(|s| s.path[0].winner).collect();
    assert_eq!(winners, vec![1, 2]);
    for s in &sols {
        assert_eq!(s.path[0].price, int(1));
        assert_eq!(s.path[0].item, 0);
    }

    let spaces = vals
        .iter()
        .map(|v| generate_plan_space(v, &grid, &FAMILIES, true))
        .collect();
    let mut instance = GameInstance::new(config, vals.clone(), spaces).unwrap();
    for s in &sols {
        instance.include_profile(&s.policies);
    }
    for s in &sols {
        assert!(is_pure_nash(&instance, &s.policies).unwrap().is_nash);
    }
    let mix: Vec<(Rational, Vec<Plan>)> = sols.iter().map(|s| (ratio(1, 2), s.policies.clone())).collect();
    assert!(verify_correlated_equilibrium(&instance, &mix).unwrap().holds);

    let report = spe_report(&vals, &sols).unwrap();
    assert_eq!(report.equilibria.len(), 2);
    assert_eq!(report.poa, Some(int(1)));
}

#[test]
fn correlated_point_masses() {
    let vals = vec![Valuation::unit_demand(vec![int(2)]).unwrap(), Valuation::unit_demand(vec![int(1)]).unwrap()];
    let grid = uniform_grid(int(1), int(2), true).unwrap();
    let spaces = vals
        .iter()
        .map(|v| generate_plan_space(v, &grid, &FAMILIES, false))
        .collect();
    let instance = GameInstance::new(single_item(2, 1), vals, spaces).unwrap();
    let report = enumerate_pure_nash(&instance, DEFAULT_PROFILE_CAP).unwrap();
    let eq = report.equilibria[0].plans.clone();
    assert!(verify_correlated_equilibrium(&instance, &[(int(1), eq)]).unwrap().holds);
    // the low bidder paying 2 for an item worth 1
    let bad = vec![
        Plan::Abstain,
        Plan::Target {
            bid: Bid::at(int(2)),
            item: 0,
        },
    ];
    let check = verify_correlated_equilibrium(&instance, &[(int(1), bad.clone())]).unwrap();
    assert!(!check.holds);
    assert!(!is_pure_nash(&instance, &bad).unwrap().is_nash);
}

#[test]
fn stability_instance_every_root_equilibrium_is_inefficient() {
    let vals = stability_valuations();
    let config = single_item(4, 4);
    let grid = uniform_grid(ratio(1, 20), int(2), true).unwrap();
    let options = SpeOptions::from_bids(&grid);
    let (alloc, opt) = optimal_welfare(&vals, 10_000).unwrap();
    assert_eq!(opt, ratio(31, 10));
    assert_eq!(alloc.bundles, (0..4).map(ItemSet::singleton).collect::<Vec<_>>());
    let sol = solve_spe(&config, &vals, &options).unwrap();
    assert!(sol.welfare.unwrap() < opt);
    assert!(sol.ratio.unwrap() > int(1));
    let alts = spe_root_alternatives(&config, &vals, &options).unwrap();
    assert!(!alts.is_empty());
    assert!(alts.iter().all(|s| s.welfare.unwrap() < opt));
    // the bidder that would take the first item in the optimum never does
    assert!(alts.iter().all(|s| s.path[0].winner != 0));
}

#[test]
fn enumerated_equilibria_pass_the_nash_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let vals: Vec<Valuation> = (0..2)
            .map(|_| gen::unit_demand(&mut rng, 2, Lattice::new(2, 4)).unwrap())
            .collect();
        let grid = uniform_grid(ratio(1, 2), int(2), true).unwrap();
        let spaces = vals
            .iter()
            .map(|v| generate_plan_space(v, &grid, &FAMILIES[..3], false))
            .collect();
        let config = MechanismConfig::with_default_ties(MechanismKind::Draft, 2, 2).unwrap();
        let instance = GameInstance::new(config, vals, spaces).unwrap();
        let report = enumerate_pure_nash(&instance, DEFAULT_PROFILE_CAP).unwrap();
        for e in &report.equilibria {
            assert!(is_pure_nash(&instance, &e.plans).unwrap().is_nash);
        }
        if let (Some(poa), Some(pos)) = (report.poa, report.pos) {
            assert!(poa >= pos && pos >= int(1));
        }
    }
}

fn small_unit_profile() -> impl Strategy<Value = Vec<Vec<i128>>> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(n, m)| prop::collection::vec(prop::collection::vec(0i128..=4, m), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Replaying the solver's policies reproduces its welfare exactly.
    #[test]
    fn spe_replay_matches(rows in small_unit_profile(), sequential in any::<bool>()) {
        let n = rows.len();
        let m = rows[0].len();
        let vals: Vec<Valuation> = rows.iter().map(|r| Valuation::unit_demand(r.iter().map(|&x| int(x)).collect()).unwrap()).collect();
        let kind = if sequential {
            MechanismKind::SequentialItem { order: (0..m).rev().collect() }
        } else {
            MechanismKind::SingleItemDraft
        };
        let config = MechanismConfig::with_default_ties(kind, n, m).unwrap();
        let grid = uniform_grid(int(1), int(4), true).unwrap();
        let sol = solve_spe(&config, &vals, &SpeOptions::from_bids(&grid)).unwrap();
        if let Some(w) = sol.welfare {
            let out = run_auction(&config, &sol.policies, None).unwrap();
            prop_assert_eq!(out.welfare(&vals).unwrap(), w);
            prop_assert_eq!(sol.ratio, welfare_ratio(sol.opt_welfare, w));
        }
    }

    /// A profile that is an equilibrium in a plan space stays one in any
    /// subspace containing it.
    #[test]
    fn equilibria_survive_restriction(rows in small_unit_profile()) {
        let n = rows.len();
        let m = rows[0].len();
        prop_assume!(n <= 2);
        let vals: Vec<Valuation> = rows.iter().map(|r| Valuation::unit_demand(r.iter().map(|&x| int(x)).collect()).unwrap()).collect();
        let config = MechanismConfig::with_default_ties(MechanismKind::Draft, n, m).unwrap();
        let fine = uniform_grid(int(1), int(4), true).unwrap();
        let coarse = uniform_grid(int(2), int(4), true).unwrap();
        let space = |grid: &[Bid]| vals.iter().map(|v| generate_plan_space(v, grid, &FAMILIES[..3], false)).collect::<Vec<_>>();
        let big = GameInstance::new(config.clone(), vals.clone(), space(&fine)).unwrap();
        let small = GameInstance::new(config, vals.clone(), space(&coarse)).unwrap();
        let big_report = enumerate_pure_nash(&big, DEFAULT_PROFILE_CAP).unwrap();
        let small_report = enumerate_pure_nash(&small, DEFAULT_PROFILE_CAP).unwrap();
        for e in &big_report.equilibria {
            let inside = e.plans.iter().zip(&small.plan_spaces).all(|(p, s)| s.contains(p));
            if inside {
                prop_assert!(small_report.equilibria.iter().any(|f| f.plans == e.plans));
            }
        }
    }
}
