//! Acceptance gate: one line per criterion, nonzero exit if any fails.
//!
//! Each criterion recomputes its quantities through the public API and,
//! where practical, an independent route (brute-force matchings, direct
//! per-profile inequality checks, f64 formulas for the constants).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use auctionlab::commands::sweep_instance;
use auctionlab::corpus;
use auctionlab_core::engine::{run_auction, utility, Bid, MechanismConfig, MechanismKind, Outcome};
use auctionlab_core::equilibrium::{enumerate_pure_nash, is_pure_nash, solve_spe, GameInstance, DEFAULT_PROFILE_CAP};
use auctionlab_core::gen::{self, Lattice};
use auctionlab_core::rational::{fmt_rational, int, ratio, to_f64};
use auctionlab_core::smoothness::{
    check_smoothness, check_smoothness_via_extension, poa_bound, Approximator, DeviationFamily, ProfileDomain,
};
use auctionlab_core::strategies::{core_deviation, core_target_units, generate_plan_space, uniform_grid, Plan, PlanFamily};
use auctionlab_core::valuations::{
    approx_additive, approx_concave_symmetric, approx_subadditive, approx_xos, check_pointwise_approx, ApproxResult,
};
use auctionlab_core::{optimal_welfare, ItemSet, Rational, Valuation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const BASIC: [PlanFamily; 3] = [PlanFamily::Abstain, PlanFamily::Target, PlanFamily::UntilWinBest];
const WITH_BUNDLES: [PlanFamily; 4] = [
    PlanFamily::Abstain,
    PlanFamily::Target,
    PlanFamily::UntilWinBest,
    PlanFamily::ConstantTake(2),
];

/// `{0, step, 2 step, 3 step}` without plus bids.
fn four_point_instance(vals: Vec<Valuation>, kind: MechanismKind, families: &[PlanFamily]) -> GameInstance {
    let n = vals.len();
    let m = vals[0].m();
    let config = MechanismConfig::with_default_ties(kind, n, m).unwrap();
    let grid = uniform_grid(int(1), int(3), false).unwrap();
    let spaces = vals
        .iter()
        .map(|v| generate_plan_space(v, &grid, families, false))
        .collect();
    GameInstance::new(config, vals, spaces).unwrap()
}

/// Best unit-demand assignment by trying every item (or none) per bidder.
fn matching_opt(vals: &[Valuation]) -> Rational {
    fn go(rows: &[Vec<Rational>], i: usize, used: ItemSet) -> Rational {
        if i == rows.len() {
            return int(0);
        }
        let mut best = go(rows, i + 1, used);
        for (j, &v) in rows[i].iter().enumerate() {
            if !used.contains(j) {
                let mut next = used;
                next.insert(j);
                best = best.max(v + go(rows, i + 1, next));
            }
        }
        best
    }
    let rows: Vec<Vec<Rational>> = vals.iter().map(Valuation::item_values).collect();
    go(&rows, 0, ItemSet::EMPTY)
}

fn lower_reproduction() -> Check {
    let s = corpus::load("lower_209_171").map_err(err)?;
    let (_, opt) = optimal_welfare(&s.valuations, 1_000).map_err(err)?;
    ensure(opt == int(209), || format!("OPT {opt}"))?;
    ensure(matching_opt(&s.valuations) == int(209), || "matching oracle disagrees".into())?;

    let scripted = run_auction(&s.config, &s.profile, None).map_err(err)?;
    let welfare = scripted.welfare(&s.valuations).map_err(err)?;
    let revenue: Rational = scripted.payments.iter().sum();
    ensure(welfare == int(171) && revenue == int(51), || format!("scripted welfare {welfare}, revenue {revenue}"))?;

    let grid = s.plans.as_ref().unwrap().grid().map_err(err)?;
    ensure(grid.contains(&Bid::at(int(51))) && grid.contains(&Bid::above(int(51))), || "grid misses 51 / 51+".into())?;
    ensure(s.plans.as_ref().unwrap().undominated, || "undominated filter off".into())?;
    let options = s.spe_options(None).map_err(err)?;
    ensure(options.pins.values().any(|p| p.supporter == Some(0)), || "A is not pinned as supporter".into())?;
    let sol = solve_spe(&s.config, &s.valuations, &options).map_err(err)?;
    ensure(sol.path[0].supporter == Some(0), || "round-1 supporter is not A".into())?;
    let mut instance = s.instance(None).map_err(err)?;
    instance.include_profile(&sol.policies);
    let nash = is_pure_nash(&instance, &sol.policies).map_err(err)?;
    ensure(nash.is_nash, || format!("not nash: {:?}", nash.witness))?;
    ensure(sol.welfare == Some(int(171)), || format!("equilibrium welfare {:?}", sol.welfare))?;
    let r = sol.ratio.ok_or("no ratio")?;
    ensure(r == ratio(209, 171), || format!("ratio {r}"))?;
    let alternatives: usize = instance.plan_spaces.iter().map(Vec::len).sum();
    Ok(format!("OPT 209, SW 171, revenue 51, nash against {alternatives} unilateral plans, ratio 209/171"))
}

fn intro_contrast() -> Check {
    let mut errors = Vec::new();
    for eps in [ratio(1, 10), ratio(1, 100)] {
        let s = corpus::intro_scenario(eps).map_err(err)?;
        let grid = s.plans.as_ref().unwrap().grid().map_err(err)?;
        ensure(grid.contains(&Bid::at(eps)) && grid.contains(&Bid::above(eps)), || "grid misses eps".into())?;

        let seq = MechanismConfig::with_default_ties(MechanismKind::SequentialItem { order: vec![0, 2, 1] }, 4, 3).map_err(err)?;
        let sol = solve_spe(&seq, &s.valuations, &s.spe_options(None).map_err(err)?).map_err(err)?;
        let seq_welfare = sol.welfare.ok_or("sequential solver found no equilibrium")?;
        ensure(seq_welfare == int(2) + eps, || format!("sequential SW {seq_welfare} at eps {eps}"))?;

        let instance = s.instance(None).map_err(err)?;
        let nash = is_pure_nash(&instance, &s.profile).map_err(err)?;
        ensure(nash.is_nash, || format!("draft profile not nash at eps {eps}: {:?}", nash.witness))?;
        let draft = run_auction(&s.config, &s.profile, None).map_err(err)?;
        let draft_welfare = draft.welfare(&s.valuations).map_err(err)?;
        ensure(draft_welfare == int(3) - eps, || format!("draft SW {draft_welfare}"))?;

        let gap = to_f64(&(draft_welfare / seq_welfare)) - 1.5;
        ensure(gap.abs() <= 2.0 * to_f64(&eps), || format!("ratio off 3/2 by {gap} at eps {eps}"))?;
        errors.push(gap.abs());
    }
    ensure(errors[1] < errors[0], || format!("error does not shrink: {errors:?}"))?;
    Ok(format!("|ratio - 3/2| = {:.4} at eps 1/10, {:.5} at eps 1/100", errors[0], errors[1]))
}

fn unit_demand_smoothness() -> Check {
    let bound = poa_bound(ratio(1, 2), int(2)).map_err(err)?;
    ensure(bound == int(4), || format!("poa_bound {bound}"))?;
    let mut profiles = 0u128;
    for k in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3_000 + k);
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=3);
        let vals = (0..n)
            .map(|_| gen::unit_demand(&mut rng, m, Lattice::new(1, 4)).unwrap())
            .collect();
        let instance = four_point_instance(vals, MechanismKind::Draft, &BASIC);
        let cert = check_smoothness(&instance, DeviationFamily::UnitDemand, ratio(1, 2), int(2), ProfileDomain::Exhaustive)
            .map_err(err)?;
        ensure(cert.exhaustive && cert.all_checks_pass(), || format!("instance {k}:\n{}", cert.report()))?;
        profiles += cert.profiles_checked;
    }
    Ok(format!("50 instances, {profiles} profiles exhaustively, poa_bound(1/2, 2) = 4"))
}

/// Prices of `set` in `out`, unsold items at 0, ascending.
fn sorted_prices(out: &Outcome, set: ItemSet) -> Vec<Rational> {
    let mut prices: Vec<Rational> = set
        .iter()
        .map(|j| if out.sold.contains(j) { out.item_prices[j] } else { int(0) })
        .collect();
    prices.sort();
    prices
}

fn profiles(instance: &GameInstance) -> impl Iterator<Item = Vec<Plan>> + '_ {
    let sizes: Vec<usize> = instance.plan_spaces.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product();
    (0..total).map(move |mut code| {
        instance
            .plan_spaces
            .iter()
            .zip(&sizes)
            .map(|(space, &len)| {
                let plan = space[code % len].clone();
                code /= len;
                plan
            })
            .collect()
    })
}

fn core_deviation_lemma() -> Check {
    let mut checked = 0u64;
    for k in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4_000 + k);
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=4);
        let vals: Vec<Valuation> = (0..n)
            .map(|_| gen::constraint_homogeneous(&mut rng, m, Lattice::new(1, 6)).unwrap())
            .collect();
        let instance = four_point_instance(vals.clone(), MechanismKind::Draft, &WITH_BUNDLES);

        let cert = check_smoothness(&instance, DeviationFamily::Core, ratio(1, 4), int(2), ProfileDomain::Exhaustive).map_err(err)?;
        ensure(cert.violations.is_empty(), || format!("instance {k}:\n{}", cert.report()))?;

        // the same inequalities, recomputed profile by profile
        let (opt, _) = optimal_welfare(&vals, 100_000).map_err(err)?;
        for profile in profiles(&instance) {
            let base = run_auction(&instance.config, &profile, None).map_err(err)?;
            for (i, v) in vals.iter().enumerate() {
                let Valuation::ConstraintHomogeneous { interest, per_unit, .. } = v else {
                    unreachable!()
                };
                let target = interest.intersection(opt.bundles[i]);
                if target.is_empty() {
                    continue;
                }
                let mut dev = profile.clone();
                dev[i] = core_deviation(profile[i].clone(), target, *per_unit).map_err(err)?;
                let out = run_auction(&instance.config, &dev, None).map_err(err)?;
                let u = utility(&out, i, v).map_err(err)?;
                let prices = sorted_prices(&base, target);
                let price_sum: Rational = prices.iter().sum();
                let rhs = *per_unit * int(target.len() as i128) / int(4) - price_sum - base.payments[i];
                ensure(u >= rhs, || format!("instance {k}, bidder {i}: u {u} < {rhs}"))?;
                let s_star = core_target_units(target);
                let acquired = out.allocation.bundles[i].intersection(target).len();
                ensure(acquired >= s_star || prices[s_star - 1] >= *per_unit / int(2), || {
                    format!("instance {k}, bidder {i}: {acquired} < {s_star} units and cheap pivot")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("50 instances, {checked} bidder-profile pairs, inequality and case split hold"))
}

fn extension_chain() -> Check {
    for k in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5_000 + k);
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=5);
        let vals = (0..n)
            .map(|_| gen::additive(&mut rng, m, Lattice::new(1, 8)).unwrap())
            .collect();
        let instance = four_point_instance(vals, MechanismKind::Draft, &WITH_BUNDLES);
        let cert = check_smoothness_via_extension(&instance, Approximator::Additive, ratio(1, 4), int(2), ProfileDomain::Exhaustive)
            .map_err(err)?;
        let expected = 1.0 / (8.0 * (((m - 1) as f64).log2() + 1.0));
        let lambda = to_f64(&cert.lambda);
        ensure(lambda >= expected * (1.0 - 1e-12) && lambda <= expected * (1.0 + 1e-4), || format!("additive m={m}: lambda {lambda} vs {expected}"))?;
        ensure(cert.all_checks_pass(), || format!("additive instance {k}:\n{}", cert.report()))?;
    }
    for k in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5_500 + k);
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=4);
        let vals = (0..n)
            .map(|_| gen::subadditive_table(&mut rng, m, m, Lattice::new(1, 8)).unwrap())
            .collect();
        let instance = four_point_instance(vals, MechanismKind::Draft, &WITH_BUNDLES);
        let cert = check_smoothness_via_extension(&instance, Approximator::Subadditive, ratio(1, 4), int(2), ProfileDomain::Exhaustive)
            .map_err(err)?;
        let h: f64 = (1..=m).map(|x| 1.0 / x as f64).sum();
        let expected = 1.0 / (8.0 * h * (((m - 1) as f64).log2() + 1.0));
        let lambda = to_f64(&cert.lambda);
        ensure(lambda >= expected * (1.0 - 1e-12) && lambda <= expected * (1.0 + 1e-4), || format!("subadditive m={m}: lambda {lambda} vs {expected}"))?;
        ensure(cert.all_checks_pass(), || format!("subadditive instance {k}:\n{}", cert.report()))?;
    }
    Ok("30 additive and 20 subadditive instances hold everywhere at the stated lambda".into())
}

/// `v'(T) <= v(T)` for every `T`, and `beta v'(S) >= v(S)`.
fn pointwise_by_hand(v: &Valuation, res: &ApproxResult, set: ItemSet) -> bool {
    let m = v.m();
    let below = ItemSet::full(m)
        .subsets()
        .all(|t| res.approx.value(t).unwrap() <= v.value(t).unwrap());
    below && res.beta * res.approx.value(set).unwrap() >= v.value(set).unwrap()
}

fn approximation_constructors() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6_000);
    let lat = Lattice::new(1, 10);
    for case in 0..100 {
        let m = rng.gen_range(1..=6);
        let set = loop {
            let s = ItemSet::from_bits(rng.gen_range(1..(1u32 << m)));
            if !s.is_empty() {
                break s;
            }
        };
        let inputs = [
            ("concave", gen::concave_symmetric(&mut rng, m, lat).unwrap()),
            ("additive", gen::additive(&mut rng, m, lat).unwrap()),
            ("xos", gen::xos(&mut rng, m, 3, lat).unwrap()),
            ("subadditive", gen::subadditive_table(&mut rng, m, m, lat).unwrap()),
        ];
        for (name, v) in &inputs {
            let res = match *name {
                "concave" => approx_concave_symmetric(v, set),
                "additive" => approx_additive(v, set),
                "xos" => approx_xos(v, set),
                _ => approx_subadditive(v, set),
            }
            .map_err(err)?;
            let beta_ok = match *name {
                "additive" => {
                    let Valuation::Additive { values } = v else { unreachable!() };
                    let k = set.iter().filter(|&j| values[j] > int(0)).count();
                    let expected = if k <= 1 { 1.0 } else { 2.0 * (((k - 1) as f64).log2() + 1.0) };
                    let b = to_f64(&res.beta);
                    b <= expected && b >= expected * (1.0 - 1e-4)
                }
                "subadditive" => res.beta == (1..=set.len() as i128).map(|x| ratio(1, x)).sum::<Rational>(),
                _ => res.beta == int(1),
            };
            ensure(beta_ok, || format!("case {case} {name}: beta {}", fmt_rational(&res.beta)))?;
            let api = check_pointwise_approx(v, &res.approx, set, res.beta).map_err(err)?;
            ensure(api && pointwise_by_hand(v, &res, set), || format!("case {case} {name}: not a pointwise approximation at {set}"))?;
        }
    }
    Ok("100 inputs per constructor pass exhaustively with the stated beta".into())
}

fn pure_poa_two() -> Check {
    let s = corpus::load("unit_demand_poa2").map_err(err)?;
    let spec = s.sweep.clone().ok_or("corpus sweep missing")?;
    let delta = s.plans.as_ref().unwrap().step;
    ensure(delta == ratio(1, 8), || format!("grid step {delta}"))?;
    ensure(spec.instances == 100 && spec.n.1 <= 3 && spec.m.1 <= 3, || "sweep shape".into())?;
    let mut equilibria = 0;
    let mut worst = 0.0f64;
    for k in 0..spec.instances {
        let instance = sweep_instance(&s, &spec, spec.seed.unwrap_or(0), k, None).map_err(err)?;
        let vals = &instance.valuations;
        ensure(
            vals.iter().flat_map(Valuation::item_values).all(|x| x >= int(0) && x <= int(1)),
            || format!("instance {k}: values outside [0, 1]"),
        )?;
        let opt = matching_opt(vals);
        let report = enumerate_pure_nash(&instance, DEFAULT_PROFILE_CAP).map_err(err)?;
        let n = int(vals.len() as i128);
        for e in &report.equilibria {
            ensure(opt <= int(2) * e.welfare + int(2) * n * delta, || {
                format!("instance {k}: OPT {opt} > 2 * {} + 2n delta", e.welfare)
            })?;
            if e.welfare > int(0) {
                worst = worst.max(to_f64(&(opt / e.welfare)));
            }
        }
        equilibria += report.equilibria.len();
    }
    Ok(format!("{equilibria} equilibria over 100 instances, max OPT/SW {worst:.4}"))
}

fn non_uniqueness() -> Check {
    let out = corpus::reproduce("non_unique", &Default::default()).map_err(err)?;
    ensure(out.passed, || out.report.clone())?;

    let s = corpus::load("non_unique").map_err(err)?;
    let sols = auctionlab_core::equilibrium::spe_root_alternatives(&s.config, &s.valuations, &s.spe_options(None).map_err(err)?)
        .map_err(err)?;
    let mut instance = s.instance(None).map_err(err)?;
    for sol in &sols {
        instance.include_profile(&sol.policies);
    }
    let report = enumerate_pure_nash(&instance, DEFAULT_PROFILE_CAP).map_err(err)?;
    let mut winners: Vec<usize> = report
        .equilibria
        .iter()
        .filter_map(|e| e.outcome.allocation.bundles.iter().position(|b| b.contains(0)))
        .collect();
    winners.sort_unstable();
    winners.dedup();
    ensure(winners.len() >= 2, || format!("winners of A*: {winners:?}"))?;
    Ok(format!(
        "{} pure equilibria enumerated, A* won by bidders {winners:?}",
        report.equilibria.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, u64, fn() -> Check); 8] = [
        (1, "lower-bound instance 209/171", 1, lower_reproduction),
        (2, "3/2 contrast with sequential sales", 30, intro_contrast),
        (3, "unit-demand smoothness (1/2, 2)", 120, unit_demand_smoothness),
        (4, "core deviation inequalities", 120, core_deviation_lemma),
        (5, "extension chain certificates", 180, extension_chain),
        (6, "approximation constructors", 60, approximation_constructors),
        (7, "pure-equilibrium bound OPT <= 2 SW + 2n delta", 180, pure_poa_two),
        (8, "non-unique equilibria", 5, non_uniqueness),
    ];
    let mut failed = 0;
    for (id, title, limit, run) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let (status, detail) = match (&result, in_time) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("{d}; over the {limit}s limit")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {id} {status}: {title} ({:.2}s, limit {limit}s) {detail}", elapsed.as_secs_f64());
    }
    if failed == 0 {
        println!("acceptance: all 8 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 8 criteria fail");
        ExitCode::FAILURE
    }
}
