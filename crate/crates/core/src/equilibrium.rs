//! Brute-force equilibrium search over finite plan spaces, backward
//! induction for single-item drafts and sequential auctions, and
//! correlated-equilibrium verification.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::Zero;

use crate::engine::{revenue, run_auction, utility, Bid, MechanismConfig, MechanismKind, Outcome};
use crate::error::{Error, Result};
use crate::items::ItemSet;
use crate::rational::{fmt_rational, Rational};
use crate::strategies::{check_distribution, Action, Plan, PolicyTable, StateKey};
use crate::valuations::{optimal_welfare, Allocation, Valuation, DEFAULT_WELFARE_CAP};

/// Default cap on the number of profiles `enumerate_pure_nash` visits.
pub const DEFAULT_PROFILE_CAP: u128 = 1_000_000;

/// Default cap on backward-induction states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct GameInstance {
    pub config: MechanismConfig,
    pub valuations: Vec<Valuation>,
    pub plan_spaces: Vec<Vec<Plan>>,
}

impl GameInstance {
    pub fn new(config: MechanismConfig, valuations: Vec<Valuation>, plan_spaces: Vec<Vec<Plan>>) -> Result<Self> {
        if valuations.len() != config.n {
            return Err(Error::DimensionMismatch(config.n, valuations.len()));
        }
        if plan_spaces.len() != config.n {
            return Err(Error::DimensionMismatch(config.n, plan_spaces.len()));
        }
        if let Some(v) = valuations.iter().find(|v| v.m() != config.m) {
            return Err(Error::DimensionMismatch(config.m, v.m()));
        }
        if let Some(i) = plan_spaces.iter().position(Vec::is_empty) {
            return Err(Error::InvalidConfig(format!("bidder {i} has an empty plan space")));
        }
        Ok(GameInstance {
            config,
            valuations,
            plan_spaces,
        })
    }

    pub fn profile_count(&self) -> u128 {
        self.plan_spaces
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    pub fn utilities(&self, plans: &[Plan]) -> Result<(Outcome, Vec<Rational>)> {
        let outcome = run_auction(&self.config, plans, None)?;
        let utils = (0..self.config.n)
            .map(|i| utility(&outcome, i, &self.valuations[i]))
            .collect::<Result<Vec<_>>>()?;
        Ok((outcome, utils))
    }

    pub fn optimum(&self) -> Result<(Allocation, Rational)> {
        optimal_welfare(&self.valuations, DEFAULT_WELFARE_CAP)
    }

    /// Adds each plan of `profile` to the matching plan space if missing.
    pub fn include_profile(&mut self, profile: &[Plan]) {
        for (space, plan) in self.plan_spaces.iter_mut().zip(profile) {
            if !space.contains(plan) {
                space.push(plan.clone());
            }
        }
    }
}

/// `OPT / SW`; `None` when `SW = 0 < OPT`.
pub fn welfare_ratio(opt: Rational, welfare: Rational) -> Option<Rational> {
    if welfare.is_zero() {
        opt.is_zero().then(|| Rational::from_integer(1))
    } else {
        Some(opt / welfare)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deviation {
    pub bidder: usize,
    pub plan: Plan,
    pub gain: Rational,
}

#[derive(Clone, Debug)]
pub struct NashCheck {
    pub is_nash: bool,
    pub witness: Option<Deviation>,
}

/// Checks every unilateral switch within the instance's plan spaces and
/// returns the most profitable one as a witness.
pub fn is_pure_nash(instance: &GameInstance, profile: &[Plan]) -> Result<NashCheck> {
    if profile.len() != instance.config.n {
        return Err(Error::DimensionMismatch(instance.config.n, profile.len()));
    }
    let (_, base) = instance.utilities(profile)?;
    let mut best: Option<Deviation> = None;
    let mut trial = profile.to_vec();
    for i in 0..instance.config.n {
        for alt in &instance.plan_spaces[i] {
            if *alt == profile[i] {
                continue;
            }
            trial[i] = alt.clone();
            let outcome = run_auction(&instance.config, &trial, None)?;
            let gain = utility(&outcome, i, &instance.valuations[i])? - base[i];
            if gain > Rational::zero() && best.as_ref().map_or(true, |d| gain > d.gain) {
                best = Some(Deviation {
                    bidder: i,
                    plan: alt.clone(),
                    gain,
                });
            }
        }
        trial[i] = profile[i].clone();
    }
    Ok(NashCheck {
        is_nash: best.is_none(),
        witness: best,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquilibriumKind {
    PureNash,
    SubgamePerfect,
    Correlated,
}

impl EquilibriumKind {
    pub fn name(self) -> &'static str {
        match self {
            EquilibriumKind::PureNash => "pure_nash",
            EquilibriumKind::SubgamePerfect => "spe",
            EquilibriumKind::Correlated => "correlated",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EquilibriumEntry {
    pub plans: Vec<Plan>,
    pub outcome: Outcome,
    pub welfare: Rational,
    pub revenue: Rational,
}

#[derive(Clone, Debug)]
pub struct EquilibriumReport {
    pub kind: EquilibriumKind,
    pub equilibria: Vec<EquilibriumEntry>,
    pub opt_welfare: Rational,
    pub opt_allocation: Allocation,
    /// OPT over the worst equilibrium; `None` with no equilibria or an
    /// equilibrium of zero welfare against positive OPT.
    pub poa: Option<Rational>,
    /// OPT over the best equilibrium.
    pub pos: Option<Rational>,
    pub profiles_checked: u128,
}

impl EquilibriumReport {
    fn build(
        kind: EquilibriumKind,
        equilibria: Vec<EquilibriumEntry>,
        optimum: (Allocation, Rational),
        profiles_checked: u128,
    ) -> Self {
        let (opt_allocation, opt_welfare) = optimum;
        let worst = equilibria.iter().map(|e| e.welfare).min();
        let best = equilibria.iter().map(|e| e.welfare).max();
        EquilibriumReport {
            kind,
            poa: worst.and_then(|w| welfare_ratio(opt_welfare, w)),
            pos: best.and_then(|w| welfare_ratio(opt_welfare, w)),
            equilibria,
            opt_welfare,
            opt_allocation,
            profiles_checked,
        }
    }
}

fn entry(instance: &GameInstance, plans: Vec<Plan>) -> Result<EquilibriumEntry> {
    let outcome = run_auction(&instance.config, &plans, None)?;
    Ok(EquilibriumEntry {
        welfare: outcome.welfare(&instance.valuations)?,
        revenue: revenue(&outcome),
        plans,
        outcome,
    })
}

/// Every pure Nash profile of the instance.
///
/// Utilities of all profiles are tabulated once; a profile is an
/// equilibrium when each bidder's utility matches the best reply to the
/// others' plans.
pub fn enumerate_pure_nash(instance: &GameInstance, cap: u128) -> Result<EquilibriumReport> {
    let total = instance.profile_count();
    if total > cap {
        return Err(Error::CapExceeded { needed: total, cap });
    }
    let n = instance.config.n;
    let total = total as usize;
    let sizes: Vec<usize> = instance.plan_spaces.iter().map(Vec::len).collect();
    // stride[i]: index step for bidder i's plan (bidder 0 varies fastest)
    let mut stride = vec![1usize; n];
    for i in 1..n {
        stride[i] = stride[i - 1] * sizes[i - 1];
    }

    let mut utils = vec![Rational::zero(); total * n];
    let mut digits = vec![0usize; n];
    let mut plans: Vec<Plan> = instance.plan_spaces.iter().map(|s| s[0].clone()).collect();
    for idx in 0..total {
        let (_, u) = instance.utilities(&plans)?;
        utils[idx * n..(idx + 1) * n].clone_from_slice(&u);
        for i in 0..n {
            digits[i] += 1;
            if digits[i] < sizes[i] {
                plans[i] = instance.plan_spaces[i][digits[i]].clone();
                break;
            }
            digits[i] = 0;
            plans[i] = instance.plan_spaces[i][0].clone();
        }
    }

    let mut stable = vec![true; total];
    for i in 0..n {
        for base in 0..total {
            if (base / stride[i]) % sizes[i] != 0 {
                continue;
            }
            let best = (0..sizes[i])
                .map(|k| utils[(base + k * stride[i]) * n + i])
                .max()
                .unwrap_or_default();
            for k in 0..sizes[i] {
                let idx = base + k * stride[i];
                if utils[idx * n + i] < best {
                    stable[idx] = false;
                }
            }
        }
    }

    let mut equilibria = Vec::new();
    for (idx, ok) in stable.iter().enumerate() {
        if *ok {
            let plans = (0..n)
                .map(|i| instance.plan_spaces[i][(idx / stride[i]) % sizes[i]].clone())
                .collect();
            equilibria.push(entry(instance, plans)?);
        }
    }
    Ok(EquilibriumReport::build(
        EquilibriumKind::PureNash,
        equilibria,
        instance.optimum()?,
        total as u128,
    ))
}

/// Forces the stage outcome at one state of the backward induction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StagePin {
    pub winner: Option<usize>,
    pub supporter: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SpeOptions {
    /// Candidate prices, ascending.
    pub prices: Vec<Rational>,
    pub pins: BTreeMap<StateKey, StagePin>,
    /// Require the supporter to weakly prefer winning at the price over the
    /// winner's win, so that its supporting bid is undominated.
    pub credible_support: bool,
    pub state_cap: usize,
}

impl SpeOptions {
    pub fn new(mut prices: Vec<Rational>) -> Self {
        prices.sort();
        prices.dedup();
        SpeOptions {
            prices,
            pins: BTreeMap::new(),
            credible_support: true,
            state_cap: DEFAULT_STATE_CAP,
        }
    }

    /// Prices taken from the amounts of a bid grid.
    pub fn from_bids(grid: &[Bid]) -> Self {
        Self::new(grid.iter().map(|b| b.amount).collect())
    }

    pub fn pin(mut self, state: StateKey, pin: StagePin) -> Self {
        self.pins.insert(state, pin);
        self
    }
}

/// Outcome of one stage: `winner` bids `price⁺` and takes `item`;
/// `supporter` bids `price` as the fallback winner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub state: StateKey,
    pub winner: usize,
    pub supporter: Option<usize>,
    pub price: Rational,
    pub item: usize,
    /// Item the supporter takes if the winner steps aside.
    pub supporter_item: Option<usize>,
}

#[derive(Clone, Debug)]
struct Solved {
    values: Vec<Rational>,
    stage: Option<Stage>,
}

#[derive(Clone, Debug)]
pub struct SpeSolution {
    pub policies: Vec<Plan>,
    /// Stages along the equilibrium path.
    pub path: Vec<Stage>,
    /// Replay of the policies through the engine; `None` when the root
    /// has no stage equilibrium on the price grid.
    pub outcome: Option<Outcome>,
    pub welfare: Option<Rational>,
    pub opt_welfare: Rational,
    pub ratio: Option<Rational>,
    pub states_solved: usize,
    /// States with no stage equilibrium on the grid.
    pub unsolved: Vec<StateKey>,
}

struct Solver<'a> {
    config: &'a MechanismConfig,
    valuations: &'a [Valuation],
    options: &'a SpeOptions,
    memo: HashMap<StateKey, Option<Solved>>,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    winner: usize,
    price: usize,
    supporter: Option<usize>,
}

impl<'a> Solver<'a> {
    fn new(config: &'a MechanismConfig, valuations: &'a [Valuation], options: &'a SpeOptions) -> Result<Self> {
        match config.kind {
            MechanismKind::SingleItemDraft | MechanismKind::SequentialItem { .. } => {}
            MechanismKind::Draft => {
                return Err(Error::Precondition(
                    "backward induction covers single-item drafts and sequential auctions".into(),
                ))
            }
        }
        if valuations.len() != config.n {
            return Err(Error::DimensionMismatch(config.n, valuations.len()));
        }
        if options.prices.is_empty() {
            return Err(Error::InvalidConfig("empty price grid".into()));
        }
        Ok(Solver {
            config,
            valuations,
            options,
            memo: HashMap::new(),
        })
    }

    fn root(&self) -> StateKey {
        StateKey {
            round: 0,
            bundles: vec![ItemSet::EMPTY; self.config.n],
        }
    }

    /// Items on offer at `key`, or `None` at the end of the game.
    fn offer(&self, key: &StateKey) -> Option<ItemSet> {
        match &self.config.kind {
            MechanismKind::SequentialItem { order } => order.get(key.round).map(|&j| ItemSet::singleton(j)),
            _ => {
                let sold = key.bundles.iter().fold(ItemSet::EMPTY, |a, b| a.union(*b));
                let left = ItemSet::full(self.config.m).difference(sold);
                (!left.is_empty()).then_some(left)
            }
        }
    }

    fn child(&self, key: &StateKey, winner: usize, item: usize) -> StateKey {
        let mut bundles = key.bundles.clone();
        bundles[winner].insert(item);
        StateKey {
            round: key.round + 1,
            bundles,
        }
    }

    fn solve(&mut self, key: &StateKey) -> Result<Option<Solved>> {
        if let Some(hit) = self.memo.get(key) {
            return Ok(hit.clone());
        }
        if self.memo.len() >= self.options.state_cap {
            return Err(Error::CapExceeded {
                needed: self.memo.len() as u128 + 1,
                cap: self.options.state_cap as u128,
            });
        }
        let solved = self.solve_fresh(key)?;
        self.memo.insert(key.clone(), solved.clone());
        Ok(solved)
    }

    fn solve_fresh(&mut self, key: &StateKey) -> Result<Option<Solved>> {
        let n = self.config.n;
        let Some(offer) = self.offer(key) else {
            let values = (0..n)
                .map(|j| self.valuations[j].value(key.bundles[j]))
                .collect::<Result<Vec<_>>>()?;
            return Ok(Some(Solved { values, stage: None }));
        };
        if n == 1 && matches!(self.config.kind, MechanismKind::SequentialItem { .. }) {
            // reachable when the lone bidder passes on an item
            let skip = StateKey {
                round: key.round + 1,
                bundles: key.bundles.clone(),
            };
            self.solve(&skip)?;
        }

        // each bidder's pick on winning, and everyone's continuation values
        let mut picks = Vec::with_capacity(n);
        let mut conts: Vec<Vec<Rational>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut best: Option<(usize, Vec<Rational>)> = None;
            for x in offer.iter() {
                let Some(sub) = self.solve(&self.child(key, i, x))? else {
                    return Ok(None);
                };
                if best.as_ref().map_or(true, |(_, v)| sub.values[i] > v[i]) {
                    best = Some((x, sub.values));
                }
            }
            let (x, values) = best.expect("offer is nonempty");
            picks.push(x);
            conts.push(values);
        }
        // w[j][i]: j's continuation value when i wins this stage
        let w = |j: usize, i: usize| conts[i][j];

        let Some(c) = self.first_candidate(key, &w) else {
            return Ok(None);
        };
        let price = self.options.prices[c.price];
        let mut values: Vec<Rational> = (0..n).map(|j| w(j, c.winner)).collect();
        values[c.winner] -= price;
        Ok(Some(Solved {
            values,
            stage: Some(Stage {
                state: key.clone(),
                winner: c.winner,
                supporter: c.supporter,
                price,
                item: picks[c.winner],
                supporter_item: c.supporter.map(|k| picks[k]),
            }),
        }))
    }

    /// Valid (winner, price, supporter) triples in selection order: winner
    /// by priority, then lowest price, then supporter by priority.
    fn candidates(&self, key: &StateKey, w: &dyn Fn(usize, usize) -> Rational, first_only: bool) -> Vec<Candidate> {
        let n = self.config.n;
        let pin = self.options.pins.get(key).copied().unwrap_or_default();
        let mut found = Vec::new();
        if n == 1 {
            found.push(Candidate {
                winner: 0,
                price: 0,
                supporter: None,
            });
            return found;
        }
        for &i in &self.config.tie_break {
            if pin.winner.is_some_and(|p| p != i) {
                continue;
            }
            'price: for (pi, &p) in self.options.prices.iter().enumerate() {
                // nobody else gains by taking the stage at price p
                if (0..n).any(|j| j != i && w(j, j) - p > w(j, i)) {
                    continue;
                }
                for &k in &self.config.tie_break {
                    if k == i || pin.supporter.is_some_and(|s| s != k) {
                        continue;
                    }
                    if self.options.credible_support && w(k, k) - p < w(k, i) {
                        continue;
                    }
                    // the winner prefers paying p to letting k win
                    if w(i, i) - p >= w(i, k) {
                        found.push(Candidate {
                            winner: i,
                            price: pi,
                            supporter: Some(k),
                        });
                        if first_only {
                            return found;
                        }
                        break 'price;
                    }
                }
            }
        }
        found
    }

    fn first_candidate(&self, key: &StateKey, w: &dyn Fn(usize, usize) -> Rational) -> Option<Candidate> {
        self.candidates(key, w, true).into_iter().next()
    }

    fn policies(&self) -> Vec<Plan> {
        let n = self.config.n;
        let mut tables: Vec<PolicyTable> = vec![BTreeMap::new(); n];
        for solved in self.memo.values().flatten() {
            let Some(stage) = &solved.stage else { continue };
            let bid = Bid::new(stage.price, stage.supporter.is_some());
            tables[stage.winner].insert(stage.state.clone(), Action::new(bid, ItemSet::singleton(stage.item)));
            if let (Some(k), Some(x)) = (stage.supporter, stage.supporter_item) {
                tables[k].insert(
                    stage.state.clone(),
                    Action::new(Bid::at(stage.price), ItemSet::singleton(x)),
                );
            }
        }
        tables
            .into_iter()
            .map(|t| Plan::Policy { table: Arc::new(t) })
            .collect()
    }

    fn unsolved(&self) -> Vec<StateKey> {
        let mut keys: Vec<StateKey> = self
            .memo
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| k.clone())
            .collect();
        keys.sort();
        keys
    }

    fn finish(&mut self) -> Result<SpeSolution> {
        let root = self.root();
        let top = self.solve(&root)?;
        let (_, opt) = optimal_welfare(self.valuations, DEFAULT_WELFARE_CAP)?;
        let policies = self.policies();
        let mut solution = SpeSolution {
            policies,
            path: Vec::new(),
            outcome: None,
            welfare: None,
            opt_welfare: opt,
            ratio: None,
            states_solved: self.memo.values().filter(|v| v.is_some()).count(),
            unsolved: self.unsolved(),
        };
        let Some(top) = top else { return Ok(solution) };

        let outcome = run_auction(self.config, &solution.policies, None)?;
        for (i, v) in self.valuations.iter().enumerate() {
            let u = utility(&outcome, i, v)?;
            if u != top.values[i] {
                return Err(Error::GuaranteeViolated(format!(
                    "replayed utility {} of bidder {i} differs from backward induction {}",
                    fmt_rational(&u),
                    fmt_rational(&top.values[i])
                )));
            }
        }
        let mut key = root;
        while let Some(Some(Solved { stage: Some(stage), .. })) = self.memo.get(&key) {
            let next = self.child(&key, stage.winner, stage.item);
            solution.path.push(stage.clone());
            key = next;
        }
        let welfare = outcome.welfare(self.valuations)?;
        solution.ratio = welfare_ratio(opt, welfare);
        solution.welfare = Some(welfare);
        solution.outcome = Some(outcome);
        Ok(solution)
    }
}

/// Subgame perfect equilibrium by backward induction over
/// `(round, bundles)` states, for single-item drafts and sequential
/// auctions.
///
/// Each stage is a first-price auction with externalities: the winner bids
/// `p⁺`, a supporter bids `p`, everyone else sits out. A triple is valid
/// when the winner weakly prefers paying `p` to the supporter winning, and
/// no other bidder would gain by winning the stage at `p`.
pub fn solve_spe(config: &MechanismConfig, valuations: &[Valuation], options: &SpeOptions) -> Result<SpeSolution> {
    Solver::new(config, valuations, options)?.finish()
}

/// One equilibrium per valid root winner (each at its lowest valid price),
/// with every subgame solved by the default selection.
pub fn spe_root_alternatives(
    config: &MechanismConfig,
    valuations: &[Valuation],
    options: &SpeOptions,
) -> Result<Vec<SpeSolution>> {
    let mut probe = Solver::new(config, valuations, options)?;
    let root = probe.root();
    let Some(offer) = probe.offer(&root) else {
        return Ok(vec![probe.finish()?]);
    };
    let n = config.n;
    let mut conts = Vec::with_capacity(n);
    for i in 0..n {
        let mut best: Option<Vec<Rational>> = None;
        for x in offer.iter() {
            let Some(sub) = probe.solve(&probe.child(&root, i, x))? else {
                return Ok(Vec::new());
            };
            if best.as_ref().map_or(true, |v| sub.values[i] > v[i]) {
                best = Some(sub.values);
            }
        }
        conts.push(best.expect("offer is nonempty"));
    }
    let w = |j: usize, i: usize| conts[i][j];
    let candidates = probe.candidates(&root, &w, false);

    let mut out = Vec::new();
    for c in candidates {
        let pinned = options.clone().pin(
            root.clone(),
            StagePin {
                winner: Some(c.winner),
                supporter: c.supporter,
            },
        );
        out.push(Solver::new(config, valuations, &pinned)?.finish()?);
    }
    Ok(out)
}

/// Report over one or more SPE solutions.
pub fn spe_report(valuations: &[Valuation], solutions: &[SpeSolution]) -> Result<EquilibriumReport> {
    let mut equilibria = Vec::new();
    for s in solutions {
        if let (Some(outcome), Some(welfare)) = (&s.outcome, s.welfare) {
            equilibria.push(EquilibriumEntry {
                plans: s.policies.clone(),
                revenue: revenue(outcome),
                outcome: outcome.clone(),
                welfare,
            });
        }
    }
    Ok(EquilibriumReport::build(
        EquilibriumKind::SubgamePerfect,
        equilibria,
        optimal_welfare(valuations, DEFAULT_WELFARE_CAP)?,
        solutions.len() as u128,
    ))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelatedViolation {
    pub bidder: usize,
    pub suggested: Plan,
    pub deviation: Plan,
    pub gain: Rational,
}

#[derive(Clone, Debug)]
pub struct CorrelatedCheck {
    pub holds: bool,
    pub witness: Option<CorrelatedViolation>,
}

/// Checks that no bidder gains in expectation by replacing a suggested
/// plan with any plan of its space, conditional on that suggestion.
pub fn verify_correlated_equilibrium(instance: &GameInstance, distribution: &[(Rational, Vec<Plan>)]) -> Result<CorrelatedCheck> {
    check_distribution(distribution.iter().map(|(p, _)| *p))?;
    let n = instance.config.n;
    if let Some((_, profile)) = distribution.iter().find(|(_, prof)| prof.len() != n) {
        return Err(Error::DimensionMismatch(n, profile.len()));
    }
    let base: Vec<Vec<Rational>> = distribution
        .iter()
        .map(|(_, prof)| instance.utilities(prof).map(|(_, u)| u))
        .collect::<Result<_>>()?;

    let mut worst: Option<CorrelatedViolation> = None;
    for i in 0..n {
        let mut suggestions: Vec<&Plan> = Vec::new();
        for (_, prof) in distribution {
            if !suggestions.contains(&&prof[i]) {
                suggestions.push(&prof[i]);
            }
        }
        for s in suggestions {
            for alt in &instance.plan_spaces[i] {
                let mut gain = Rational::zero();
                for (k, (p, prof)) in distribution.iter().enumerate() {
                    if prof[i] != *s || p.is_zero() {
                        continue;
                    }
                    let mut trial = prof.clone();
                    trial[i] = alt.clone();
                    let outcome = run_auction(&instance.config, &trial, None)?;
                    gain += *p * (utility(&outcome, i, &instance.valuations[i])? - base[k][i]);
                }
                if gain > Rational::zero() && worst.as_ref().map_or(true, |w| gain > w.gain) {
                    worst = Some(CorrelatedViolation {
                        bidder: i,
                        suggested: s.clone(),
                        deviation: alt.clone(),
                        gain,
                    });
                }
            }
        }
    }
    Ok(CorrelatedCheck {
        holds: worst.is_none(),
        witness: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use crate::strategies::{generate_plan_space, uniform_grid, PlanFamily};

    fn ints(xs: &[i128]) -> Vec<Rational> {
        xs.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn first_price_single_item() {
        let config = MechanismConfig::with_default_ties(MechanismKind::SingleItemDraft, 2, 1).unwrap();
        let vals = vec![
            Valuation::unit_demand(ints(&[5])).unwrap(),
            Valuation::unit_demand(ints(&[3])).unwrap(),
        ];
        let grid = uniform_grid(int(1), int(6), true).unwrap();
        let sol = solve_spe(&config, &vals, &SpeOptions::from_bids(&grid)).unwrap();
        assert_eq!(sol.path.len(), 1);
        assert_eq!(sol.path[0].winner, 0);
        assert_eq!(sol.path[0].price, int(3));
        assert_eq!(sol.welfare, Some(int(5)));
        assert_eq!(sol.ratio, Some(int(1)));
    }

    #[test]
    fn single_bidder_spe_is_free() {
        let config = MechanismConfig::with_default_ties(MechanismKind::SingleItemDraft, 1, 2).unwrap();
        let vals = vec![Valuation::additive(ints(&[1, 2])).unwrap()];
        let sol = solve_spe(&config, &vals, &SpeOptions::new(vec![int(0), int(1)])).unwrap();
        assert_eq!(sol.welfare, Some(int(3)));
        assert_eq!(sol.outcome.unwrap().payments, vec![int(0)]);
    }

    #[test]
    fn draft_rejected_by_backward_induction() {
        let config = MechanismConfig::with_default_ties(MechanismKind::Draft, 1, 1).unwrap();
        let vals = vec![Valuation::additive(ints(&[1])).unwrap()];
        assert!(solve_spe(&config, &vals, &SpeOptions::new(vec![int(0)])).is_err());
    }

    #[test]
    fn zero_value_winner_is_not_nash() {
        let config = MechanismConfig::with_default_ties(MechanismKind::Draft, 2, 1).unwrap();
        let vals = vec![
            Valuation::unit_demand(ints(&[0])).unwrap(),
            Valuation::unit_demand(ints(&[1])).unwrap(),
        ];
        let grid = uniform_grid(ratio(1, 2), int(1), false).unwrap();
        let spaces = vals
            .iter()
            .map(|v| generate_plan_space(v, &grid, &[PlanFamily::Abstain, PlanFamily::Target], false))
            .collect();
        let instance = GameInstance::new(config, vals, spaces).unwrap();
        let profile = vec![
            Plan::Target {
                bid: Bid::at(int(1)),
                item: 0,
            },
            Plan::Abstain,
        ];
        let check = is_pure_nash(&instance, &profile).unwrap();
        assert!(!check.is_nash);
        assert_eq!(check.witness.unwrap().bidder, 0);
    }

    #[test]
    fn single_bidder_equilibria_are_optimal() {
        let config = MechanismConfig::with_default_ties(MechanismKind::Draft, 1, 2).unwrap();
        let vals = vec![Valuation::unit_demand(ints(&[2, 1])).unwrap()];
        let grid = uniform_grid(int(1), int(2), true).unwrap();
        let spaces = vec![generate_plan_space(
            &vals[0],
            &grid,
            &[PlanFamily::Abstain, PlanFamily::Target, PlanFamily::UntilWinBest],
            false,
        )];
        let instance = GameInstance::new(config, vals, spaces).unwrap();
        let report = enumerate_pure_nash(&instance, DEFAULT_PROFILE_CAP).unwrap();
        assert!(!report.equilibria.is_empty());
        assert_eq!(report.poa, Some(int(1)));
        assert_eq!(report.pos, Some(int(1)));
    }

    #[test]
    fn correlated_rejects_bad_distribution() {
        let config = MechanismConfig::with_default_ties(MechanismKind::Draft, 1, 1).unwrap();
        let vals = vec![Valuation::unit_demand(ints(&[1])).unwrap()];
        let instance = GameInstance::new(config, vals, vec![vec![Plan::Abstain]]).unwrap();
        let dist = vec![(ratio(1, 2), vec![Plan::Abstain])];
        assert!(matches!(
            verify_correlated_equilibrium(&instance, &dist),
            Err(Error::Distribution(_))
        ));
    }
}
