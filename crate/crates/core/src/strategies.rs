//! Bid plans: deterministic maps from the public history to a round action,
//! the two deviation constructions, and finite plan spaces for search.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::engine::{remaining_items, won_by, Announcement, Bid, History};
use crate::error::{Error, Result};
use crate::items::ItemSet;
use crate::rational::{fmt_rational, int, Rational};
use crate::valuations::Valuation;

/// What a plan sees when asked for its action.
#[derive(Clone, Copy, Debug)]
pub struct RoundContext<'a> {
    pub bidder: usize,
    pub history: &'a [Announcement],
    /// Items on offer this round: all unsold items in a draft, the current
    /// item in a sequential auction.
    pub available: ItemSet,
    pub round: usize,
    pub n: usize,
    pub m: usize,
    /// The winner takes at most one item.
    pub single: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action {
    pub bid: Bid,
    /// Bundle taken on a win; empty means sitting the round out.
    pub demand: ItemSet,
}

impl Action {
    pub fn abstain() -> Self {
        Action {
            bid: Bid::zero(),
            demand: ItemSet::EMPTY,
        }
    }

    pub fn new(bid: Bid, demand: ItemSet) -> Self {
        Action { bid, demand }
    }

    pub fn participates(&self) -> bool {
        !self.demand.is_empty()
    }
}

/// Game state as seen by a policy: round index and every bidder's bundle.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateKey {
    pub round: usize,
    pub bundles: Vec<ItemSet>,
}

impl StateKey {
    pub fn from_history(round: usize, n: usize, history: &[Announcement]) -> Self {
        let mut bundles = vec![ItemSet::EMPTY; n];
        for a in history {
            bundles[a.winner] = bundles[a.winner].union(a.bundle);
        }
        StateKey { round, bundles }
    }
}

pub type PolicyTable = BTreeMap<StateKey, Action>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Plan {
    Abstain,
    /// Bid for `item` until it is sold or the bidder wins anything.
    Target { bid: Bid, item: usize },
    /// Bid for the first available item of `prefs` until the first win.
    UntilWin { bid: Bid, prefs: Vec<usize> },
    /// Every round, bid for the first `take` available items of `prefs`.
    Constant { bid: Bid, prefs: Vec<usize>, take: usize },
    /// Bid the best per-item marginal value for the bundle attaining it.
    TruthfulMarginal { valuation: Valuation },
    /// Exact-history lookup, then `fallback`.
    Scripted {
        table: BTreeMap<History, Action>,
        fallback: Box<Plan>,
    },
    /// State-keyed actions; abstains in states not in the table.
    Policy { table: Arc<PolicyTable> },
    UnitDemandDeviation {
        original: Box<Plan>,
        item: usize,
        value: Rational,
    },
    CoreDeviation {
        original: Box<Plan>,
        interest: ItemSet,
        per_unit: Rational,
    },
    /// Probability-weighted pure plans, resolved once per auction.
    Mixed { support: Vec<(Rational, Plan)> },
}

fn first_available(prefs: &[usize], available: ItemSet, take: usize) -> ItemSet {
    prefs
        .iter()
        .copied()
        .filter(|&j| available.contains(j))
        .take(take)
        .collect()
}

fn has_won(bidder: usize, history: &[Announcement]) -> bool {
    history.iter().any(|a| a.winner == bidder)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CoreMode {
    Active,
    Completed,
    Reverted,
}

impl Plan {
    /// Action for this round. Mixed plans must be resolved first; an
    /// unresolved mixture plays its first support entry.
    pub fn act(&self, ctx: &RoundContext) -> Action {
        match self {
            Plan::Abstain => Action::abstain(),
            Plan::Target { bid, item } => {
                if ctx.available.contains(*item) && !has_won(ctx.bidder, ctx.history) {
                    Action::new(*bid, ItemSet::singleton(*item))
                } else {
                    Action::abstain()
                }
            }
            Plan::UntilWin { bid, prefs } => {
                if has_won(ctx.bidder, ctx.history) {
                    return Action::abstain();
                }
                let demand = first_available(prefs, ctx.available, 1);
                if demand.is_empty() {
                    Action::abstain()
                } else {
                    Action::new(*bid, demand)
                }
            }
            Plan::Constant { bid, prefs, take } => {
                let take = if ctx.single { (*take).min(1) } else { *take };
                let demand = first_available(prefs, ctx.available, take);
                if demand.is_empty() {
                    Action::abstain()
                } else {
                    Action::new(*bid, demand)
                }
            }
            Plan::TruthfulMarginal { valuation } => truthful_marginal(valuation, ctx),
            Plan::Scripted { table, fallback } => match table.get(ctx.history) {
                Some(action) => *action,
                None => fallback.act(ctx),
            },
            Plan::Policy { table } => table
                .get(&StateKey::from_history(ctx.round, ctx.n, ctx.history))
                .copied()
                .unwrap_or_else(Action::abstain),
            Plan::UnitDemandDeviation {
                original,
                item,
                value,
            } => {
                if !ctx.available.contains(*item) || has_won(ctx.bidder, ctx.history) {
                    return Action::abstain();
                }
                let floor = Bid::at(*value / int(2));
                let own = original.act(ctx);
                let bid = if own.participates() { own.bid.max(floor) } else { floor };
                Action::new(bid, ItemSet::singleton(*item))
            }
            Plan::CoreDeviation {
                original,
                interest,
                per_unit,
            } => core_deviation_act(original, *interest, *per_unit, ctx),
            Plan::Mixed { support } => support
                .first()
                .map(|(_, p)| p.act(ctx))
                .unwrap_or_else(Action::abstain),
        }
    }

    pub fn is_mixed(&self) -> bool {
        match self {
            Plan::Mixed { .. } => true,
            Plan::Scripted { fallback, .. } => fallback.is_mixed(),
            Plan::UnitDemandDeviation { original, .. } | Plan::CoreDeviation { original, .. } => {
                original.is_mixed()
            }
            _ => false,
        }
    }

    /// Replaces every mixture by one draw from it.
    pub fn resolve<R: Rng>(&self, rng: &mut R) -> Result<Plan> {
        Ok(match self {
            Plan::Mixed { support } => {
                check_distribution(support.iter().map(|(p, _)| *p))?;
                let denom = support
                    .iter()
                    .fold(1i128, |acc, (p, _)| acc.lcm(p.denom()));
                let draw = rng.gen_range(0..denom);
                let mut cumulative = 0i128;
                let mut chosen = &support[support.len() - 1].1;
                for (p, plan) in support {
                    cumulative += p.numer() * (denom / p.denom());
                    if draw < cumulative {
                        chosen = plan;
                        break;
                    }
                }
                chosen.resolve(rng)?
            }
            Plan::Scripted { table, fallback } => Plan::Scripted {
                table: table.clone(),
                fallback: Box::new(fallback.resolve(rng)?),
            },
            Plan::UnitDemandDeviation {
                original,
                item,
                value,
            } => Plan::UnitDemandDeviation {
                original: Box::new(original.resolve(rng)?),
                item: *item,
                value: *value,
            },
            Plan::CoreDeviation {
                original,
                interest,
                per_unit,
            } => Plan::CoreDeviation {
                original: Box::new(original.resolve(rng)?),
                interest: *interest,
                per_unit: *per_unit,
            },
            other => other.clone(),
        })
    }
}

/// Checks that weights are nonnegative and sum to exactly one.
pub fn check_distribution<I: IntoIterator<Item = Rational>>(weights: I) -> Result<()> {
    let mut total = Rational::zero();
    let mut count = 0;
    for w in weights {
        if w < Rational::zero() {
            return Err(Error::Distribution(format!("negative weight {}", fmt_rational(&w))));
        }
        total += w;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Distribution("empty support".into()));
    }
    if total != Rational::one() {
        return Err(Error::Distribution(format!("weights sum to {}", fmt_rational(&total))));
    }
    Ok(())
}

fn truthful_marginal(valuation: &Valuation, ctx: &RoundContext) -> Action {
    let owned = won_by(ctx.bidder, ctx.history);
    let base = valuation.value_unchecked(owned);
    let mut best: Option<(Rational, ItemSet)> = None;
    for x in ctx.available.subsets() {
        if x.is_empty() || (ctx.single && x.len() > 1) {
            continue;
        }
        let per_item = (valuation.value_unchecked(owned.union(x)) - base) / int(x.len() as i128);
        if best.map_or(true, |(b, _)| per_item > b) {
            best = Some((per_item, x));
        }
    }
    match best {
        Some((per_item, x)) if per_item > Rational::zero() => Action::new(Bid::at(per_item), x),
        _ => Action::abstain(),
    }
}

/// `⌈|S|/2⌉`.
pub fn core_target_units(interest: ItemSet) -> usize {
    interest.len().div_ceil(2)
}

/// One round of the core deviation given the deviator's internal state.
/// Returns the action and whether it is a completion bid at `v̂/2`.
fn core_round(
    original: &Plan,
    interest: ItemSet,
    per_unit: Rational,
    ctx: &RoundContext,
    mode: &mut CoreMode,
    units: usize,
) -> (Action, bool) {
    let target = core_target_units(interest);
    if *mode == CoreMode::Active {
        let left = ctx.available.intersection(interest).len();
        if units >= target || left < target - units {
            *mode = CoreMode::Reverted;
        }
    }
    match *mode {
        CoreMode::Completed => (Action::abstain(), false),
        CoreMode::Reverted => (original.act(ctx), false),
        CoreMode::Active => {
            let star = Bid::at(per_unit / int(2));
            let own = original.act(ctx);
            if own.participates() && own.bid >= star {
                (own, false)
            } else {
                let take = if ctx.single { 1 } else { target - units };
                let demand = ctx.available.intersection(interest).lowest(take);
                (Action::new(star, demand), true)
            }
        }
    }
}

fn core_deviation_act(original: &Plan, interest: ItemSet, per_unit: Rational, ctx: &RoundContext) -> Action {
    if interest.is_empty() {
        return original.act(ctx);
    }
    let mut mode = CoreMode::Active;
    let mut units = 0usize;
    let target = core_target_units(interest);
    // the internal state is a function of the public history, so replay it
    // (draft formats only: every past round offered all unsold items)
    for r in 0..ctx.history.len() {
        let past = &ctx.history[..r];
        let sub = RoundContext {
            history: past,
            available: remaining_items(ctx.m, past),
            round: r,
            ..*ctx
        };
        let (_, star) = core_round(original, interest, per_unit, &sub, &mut mode, units);
        let a = &ctx.history[r];
        if a.winner == ctx.bidder {
            units += a.bundle.intersection(interest).len();
            if star && units >= target {
                mode = CoreMode::Completed;
            }
        }
    }
    core_round(original, interest, per_unit, ctx, &mut mode, units).0
}

/// Deviation toward a single target item at value `v_star`.
pub fn unit_demand_deviation(original: Plan, j_star: usize, v_star: Rational) -> Result<Plan> {
    if v_star < Rational::zero() {
        return Err(Error::Precondition("target value must be nonnegative".into()));
    }
    Ok(Plan::UnitDemandDeviation {
        original: Box::new(original),
        item: j_star,
        value: v_star,
    })
}

/// Deviation securing `⌈|S|/2⌉` units of `interest` at `v̂/2` each.
pub fn core_deviation(original: Plan, interest: ItemSet, v_hat: Rational) -> Result<Plan> {
    if v_hat < Rational::zero() {
        return Err(Error::Precondition("per-unit value must be nonnegative".into()));
    }
    Ok(Plan::CoreDeviation {
        original: Box::new(original),
        interest,
        per_unit: v_hat,
    })
}

/// A plan that replays `table` exactly and abstains everywhere else.
pub fn scripted(table: BTreeMap<History, Action>) -> Plan {
    Plan::Scripted {
        table,
        fallback: Box::new(Plan::Abstain),
    }
}

pub fn constant_zero(prefs: Vec<usize>) -> Plan {
    Plan::Constant {
        bid: Bid::zero(),
        prefs,
        take: 1,
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[usize]| v.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Plan::Abstain => write!(f, "abstain"),
            Plan::Target { bid, item } => write!(f, "target({item}@{bid})"),
            Plan::UntilWin { bid, prefs } => write!(f, "until_win({bid};[{}])", list(prefs)),
            Plan::Constant { bid, prefs, take } => {
                write!(f, "constant({bid};[{}];take {take})", list(prefs))
            }
            Plan::TruthfulMarginal { .. } => write!(f, "truthful_marginal"),
            Plan::Scripted { table, fallback } => {
                write!(f, "scripted({} entries; else {fallback})", table.len())
            }
            Plan::Policy { table } => write!(f, "policy({} states)", table.len()),
            Plan::UnitDemandDeviation {
                original,
                item,
                value,
            } => write!(f, "unit_dev({item},{}|{original})", fmt_rational(value)),
            Plan::CoreDeviation {
                original,
                interest,
                per_unit,
            } => write!(f, "core_dev({interest},{}|{original})", fmt_rational(per_unit)),
            Plan::Mixed { support } => {
                write!(f, "mixed(")?;
                for (k, (p, plan)) in support.iter().enumerate() {
                    if k > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{}:{plan}", fmt_rational(p))?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Selection rules used to build finite plan spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlanFamily {
    Abstain,
    /// One `Target` plan per item.
    Target,
    /// `UntilWin` over the bidder's own item ranking.
    UntilWinBest,
    /// `Constant` over the bidder's own ranking, taking `k` items per win.
    ConstantTake(usize),
}

/// `0, step, 2·step, ...` up to `max`, each optionally with its plus twin.
pub fn uniform_grid(step: Rational, max: Rational, with_plus: bool) -> Result<Vec<Bid>> {
    if step <= Rational::zero() {
        return Err(Error::InvalidConfig("grid step must be positive".into()));
    }
    if max < Rational::zero() {
        return Err(Error::InvalidConfig("grid maximum must be nonnegative".into()));
    }
    let points = (max / step).floor().to_integer();
    if points > 100_000 {
        return Err(Error::CapExceeded {
            needed: points as u128,
            cap: 100_000,
        });
    }
    let mut bids = Vec::new();
    for k in 0..=points {
        let amount = step * int(k);
        bids.push(Bid::at(amount));
        if with_plus {
            bids.push(Bid::above(amount));
        }
    }
    Ok(bids)
}

/// Plans for one bidder: every family crossed with every grid bid.
///
/// With `undominated` set, a plan is dropped when its bid exceeds what the
/// bidder could value the items it may take: `v({j})` for a target plan,
/// the best per-item average otherwise.
pub fn generate_plan_space(
    valuation: &Valuation,
    grid: &[Bid],
    families: &[PlanFamily],
    undominated: bool,
) -> Vec<Plan> {
    let m = valuation.m();
    let order = valuation.preference_order();
    let singles = valuation.item_values();
    let ceiling = valuation.max_average_value();
    let mut plans = Vec::new();
    for family in families {
        match family {
            PlanFamily::Abstain => plans.push(Plan::Abstain),
            PlanFamily::Target => {
                for item in 0..m {
                    for bid in grid {
                        if undominated && bid.amount > singles[item] {
                            continue;
                        }
                        plans.push(Plan::Target { bid: *bid, item });
                    }
                }
            }
            PlanFamily::UntilWinBest => {
                for bid in grid {
                    if undominated && bid.amount > ceiling {
                        continue;
                    }
                    plans.push(Plan::UntilWin {
                        bid: *bid,
                        prefs: order.clone(),
                    });
                }
            }
            PlanFamily::ConstantTake(take) => {
                for bid in grid {
                    if undominated && bid.amount > ceiling {
                        continue;
                    }
                    plans.push(Plan::Constant {
                        bid: *bid,
                        prefs: order.clone(),
                        take: *take,
                    });
                }
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    plans.retain(|p| seen.insert(p.clone()));
    plans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_auction, utility, MechanismConfig, MechanismKind};
    use crate::rational::ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx<'a>(history: &'a [Announcement], m: usize) -> RoundContext<'a> {
        RoundContext {
            bidder: 0,
            history,
            available: remaining_items(m, history),
            round: history.len(),
            n: 2,
            m,
            single: false,
        }
    }

    #[test]
    fn unit_deviation_bids_half_value() {
        let dev = unit_demand_deviation(constant_zero(vec![0]), 1, int(10)).unwrap();
        let a = dev.act(&ctx(&[], 2));
        assert_eq!(a, Action::new(Bid::at(int(5)), ItemSet::singleton(1)));
        let sold = [Announcement {
            winner: 1,
            bid: Bid::at(int(6)),
            bundle: ItemSet::singleton(1),
        }];
        assert_eq!(dev.act(&ctx(&sold, 2)), Action::abstain());
    }

    #[test]
    fn unit_deviation_zero_value_mirrors_bid() {
        let original = Plan::Target {
            bid: Bid::above(int(3)),
            item: 0,
        };
        let dev = unit_demand_deviation(original, 1, int(0)).unwrap();
        assert_eq!(
            dev.act(&ctx(&[], 2)),
            Action::new(Bid::above(int(3)), ItemSet::singleton(1))
        );
    }

    #[test]
    fn core_deviation_opens_with_completion_bid() {
        let dev = core_deviation(Plan::Abstain, ItemSet::full(4), int(6)).unwrap();
        let a = dev.act(&ctx(&[], 4));
        assert_eq!(a, Action::new(Bid::at(int(3)), ItemSet::from_bits(0b0011)));
        // after the completion win it drops out
        let won = [Announcement {
            winner: 0,
            bid: Bid::at(int(3)),
            bundle: ItemSet::from_bits(0b0011),
        }];
        assert_eq!(dev.act(&ctx(&won, 4)), Action::abstain());
    }

    #[test]
    fn core_deviation_follows_higher_original_bid() {
        let original = Plan::Constant {
            bid: Bid::at(int(5)),
            prefs: vec![3, 0],
            take: 1,
        };
        let dev = core_deviation(original, ItemSet::from_bits(0b0011), int(4)).unwrap();
        assert_eq!(
            dev.act(&ctx(&[], 4)),
            Action::new(Bid::at(int(5)), ItemSet::singleton(3))
        );
    }

    #[test]
    fn core_deviation_reverts_when_units_run_out() {
        let original = Plan::Constant {
            bid: Bid::at(int(1)),
            prefs: vec![2],
            take: 1,
        };
        let dev = core_deviation(original.clone(), ItemSet::from_bits(0b011), int(10)).unwrap();
        let history = [Announcement {
            winner: 1,
            bid: Bid::at(int(9)),
            bundle: ItemSet::from_bits(0b011),
        }];
        assert_eq!(dev.act(&ctx(&history, 3)), original.act(&ctx(&history, 3)));
    }

    #[test]
    fn constant_zero_never_beats_positive_bid() {
        let config = MechanismConfig::with_default_ties(MechanismKind::Draft, 2, 1).unwrap();
        let plans = [
            constant_zero(vec![0]),
            Plan::Target {
                bid: Bid::at(ratio(1, 100)),
                item: 0,
            },
        ];
        let out = run_auction(&config, &plans, None).unwrap();
        assert_eq!(out.transcript[0].winner, 1);
    }

    #[test]
    fn truthful_marginal_picks_best_ratio() {
        let v = Valuation::additive(vec![int(4), int(2)]).unwrap();
        let plan = Plan::TruthfulMarginal { valuation: v.clone() };
        let a = plan.act(&ctx(&[], 2));
        assert_eq!(a, Action::new(Bid::at(int(4)), ItemSet::singleton(0)));
        let config = MechanismConfig::with_default_ties(MechanismKind::Draft, 1, 2).unwrap();
        let out = run_auction(&config, &[plan], None).unwrap();
        assert_eq!(utility(&out, 0, &v).unwrap(), int(0));
    }

    #[test]
    fn mixed_resolution_is_seeded() {
        let mixed = Plan::Mixed {
            support: vec![(ratio(1, 2), Plan::Abstain), (ratio(1, 2), constant_zero(vec![0]))],
        };
        let a = mixed.resolve(&mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = mixed.resolve(&mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        let bad = Plan::Mixed {
            support: vec![(ratio(1, 3), Plan::Abstain)],
        };
        assert!(bad.resolve(&mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn grid_and_plan_space() {
        let grid = uniform_grid(ratio(1, 2), int(1), true).unwrap();
        assert_eq!(grid.len(), 6);
        let v = Valuation::unit_demand(vec![ratio(1, 2), int(1)]).unwrap();
        let space = generate_plan_space(
            &v,
            &grid,
            &[PlanFamily::Abstain, PlanFamily::Target, PlanFamily::UntilWinBest],
            true,
        );
        // abstain + target(0): 4 bids + target(1): 6 bids + until_win: 6 bids
        assert_eq!(space.len(), 1 + 4 + 6 + 6);
        assert!(space.contains(&Plan::UntilWin {
            bid: Bid::above(int(1)),
            prefs: vec![1, 0],
        }));
    }
}
