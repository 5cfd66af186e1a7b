//! Round-by-round execution of draft, single-item draft and sequential item
//! auctions.
//!
//! Every round each bidder submits a bid and a demanded bundle. A bidder
//! with an empty demand sits the round out. The highest bid among the
//! participants wins (ties go to the earliest bidder in `tie_break`) and the
//! winner pays the bid amount for every item taken. When nobody
//! participates the auction stops and the remaining items go unsold.

use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::items::ItemSet;
use crate::rational::{fmt_rational, int, parse_rational, Rational};
use crate::strategies::{Action, Plan, RoundContext};
use crate::valuations::{Allocation, Valuation};

/// A bid amount with an optional "just above" marker. Ordered by amount,
/// then marker; the marker never changes the payment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bid {
    pub amount: Rational,
    pub plus: bool,
}

impl Bid {
    pub fn new(amount: Rational, plus: bool) -> Self {
        Bid { amount, plus }
    }

    pub fn zero() -> Self {
        Bid::new(Rational::zero(), false)
    }

    pub fn at(amount: Rational) -> Self {
        Bid::new(amount, false)
    }

    pub fn above(amount: Rational) -> Self {
        Bid::new(amount, true)
    }
}

impl fmt::Display for Bid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", fmt_rational(&self.amount), if self.plus { "+" } else { "" })
    }
}

/// Parses `3/4` or `3/4+`.
impl FromStr for Bid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, plus) = match s.strip_suffix('+') {
            Some(rest) => (rest, true),
            None => (s, false),
        };
        let amount = parse_rational(body)?;
        if amount < Rational::zero() {
            return Err(Error::Parse(format!("negative bid `{s}`")));
        }
        Ok(Bid::new(amount, plus))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MechanismKind {
    Draft,
    /// Draft in which every winner takes exactly one item.
    SingleItemDraft,
    /// One first-price auction per item, in `order`.
    SequentialItem { order: Vec<usize> },
}

impl MechanismKind {
    pub fn name(&self) -> &'static str {
        match self {
            MechanismKind::Draft => "draft",
            MechanismKind::SingleItemDraft => "single_item_draft",
            MechanismKind::SequentialItem { .. } => "sequential",
        }
    }

    pub fn is_draft(&self) -> bool {
        !matches!(self, MechanismKind::SequentialItem { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MechanismConfig {
    pub kind: MechanismKind,
    pub n: usize,
    pub m: usize,
    /// Bidders in decreasing tie-break priority.
    pub tie_break: Vec<usize>,
}

fn is_permutation(order: &[usize], len: usize) -> bool {
    let mut seen = vec![false; len];
    order.len() == len
        && order.iter().all(|&x| {
            x < len && !std::mem::replace(&mut seen[x], true)
        })
}

impl MechanismConfig {
    pub fn new(kind: MechanismKind, n: usize, m: usize, tie_break: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("at least one bidder required".into()));
        }
        if m > crate::items::MAX_ITEMS {
            return Err(Error::InvalidConfig(format!("{m} items is too many")));
        }
        if !is_permutation(&tie_break, n) {
            return Err(Error::InvalidConfig(format!(
                "tie_break {tie_break:?} is not a permutation of 0..{n}"
            )));
        }
        if let MechanismKind::SequentialItem { order } = &kind {
            if !is_permutation(order, m) {
                return Err(Error::InvalidConfig(format!(
                    "item order {order:?} is not a permutation of 0..{m}"
                )));
            }
        }
        Ok(MechanismConfig { kind, n, m, tie_break })
    }

    /// Index order tie-breaking.
    pub fn with_default_ties(kind: MechanismKind, n: usize, m: usize) -> Result<Self> {
        Self::new(kind, n, m, (0..n).collect())
    }

    /// Position of each bidder in the tie-break order (0 = highest priority).
    pub fn ranks(&self) -> Vec<usize> {
        let mut rank = vec![0; self.n];
        for (pos, &i) in self.tie_break.iter().enumerate() {
            rank[i] = pos;
        }
        rank
    }

    fn round_cap(&self) -> usize {
        2 * self.m.max(1)
    }
}

/// Public information released after a round.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Announcement {
    pub winner: usize,
    pub bid: Bid,
    pub bundle: ItemSet,
}

pub type History = Vec<Announcement>;

/// Items not yet sold in a draft after `history`.
pub fn remaining_items(m: usize, history: &[Announcement]) -> ItemSet {
    history
        .iter()
        .fold(ItemSet::full(m), |acc, a| acc.difference(a.bundle))
}

/// Items won by `bidder` so far.
pub fn won_by(bidder: usize, history: &[Announcement]) -> ItemSet {
    history
        .iter()
        .filter(|a| a.winner == bidder)
        .fold(ItemSet::EMPTY, |acc, a| acc.union(a.bundle))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RoundRecord {
    pub round: usize,
    pub winner: usize,
    pub bid: Bid,
    pub bundle: ItemSet,
    pub price: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub transcript: Vec<RoundRecord>,
    pub allocation: Allocation,
    pub payments: Vec<Rational>,
    /// Per-item price; 0 for unsold items.
    pub item_prices: Vec<Rational>,
    pub sold: ItemSet,
}

impl Outcome {
    pub fn history(&self) -> History {
        self.transcript
            .iter()
            .map(|r| Announcement {
                winner: r.winner,
                bid: r.bid,
                bundle: r.bundle,
            })
            .collect()
    }

    pub fn welfare(&self, profile: &[Valuation]) -> Result<Rational> {
        self.allocation.welfare(profile)
    }
}

fn choose_winner(actions: &[Action], ranks: &[usize]) -> Option<usize> {
    (0..actions.len())
        .filter(|&i| !actions[i].demand.is_empty())
        .max_by(|&a, &b| {
            actions[a]
                .bid
                .cmp(&actions[b].bid)
                .then(ranks[b].cmp(&ranks[a]))
        })
}

/// Runs the mechanism. Mixed plans are resolved once, before the first
/// round, from `seed` (0 when absent).
pub fn run_auction(config: &MechanismConfig, plans: &[Plan], seed: Option<u64>) -> Result<Outcome> {
    if plans.len() != config.n {
        return Err(Error::DimensionMismatch(config.n, plans.len()));
    }
    if plans.iter().any(Plan::is_mixed) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
        let resolved = plans
            .iter()
            .map(|p| p.resolve(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        return run_pure(config, &resolved);
    }
    run_pure(config, plans)
}

fn run_pure(config: &MechanismConfig, plans: &[Plan]) -> Result<Outcome> {
    let n = config.n;
    let m = config.m;
    let ranks = config.ranks();
    let single = !matches!(config.kind, MechanismKind::Draft);

    let mut history: History = Vec::new();
    let mut transcript = Vec::new();
    let mut bundles = vec![ItemSet::EMPTY; n];
    let mut payments = vec![Rational::zero(); n];
    let mut item_prices = vec![Rational::zero(); m];
    let mut unsold = ItemSet::full(m);

    let order = match &config.kind {
        MechanismKind::SequentialItem { order } => Some(order),
        _ => None,
    };

    let mut round = 0usize;
    loop {
        let available = match order {
            Some(order) => match order.get(round) {
                Some(&item) => ItemSet::singleton(item),
                None => break,
            },
            None => {
                if unsold.is_empty() {
                    break;
                }
                if round >= config.round_cap() {
                    return Err(Error::NonTerminating(round));
                }
                unsold
            }
        };

        let mut actions = Vec::with_capacity(n);
        for (bidder, plan) in plans.iter().enumerate() {
            let ctx = RoundContext {
                bidder,
                history: &history,
                available,
                round,
                n,
                m,
                single,
            };
            let action = plan.act(&ctx);
            let bad_size = single && action.demand.len() > 1;
            if !action.demand.is_subset(available) || bad_size {
                return Err(Error::MalformedDemand {
                    bidder,
                    round,
                    demand: action.demand.to_string(),
                    available: available.to_string(),
                });
            }
            actions.push(action);
        }

        match choose_winner(&actions, &ranks) {
            Some(winner) => {
                let Action { bid, demand } = actions[winner];
                let price = bid.amount * int(demand.len() as i128);
                for j in demand.iter() {
                    item_prices[j] = bid.amount;
                }
                bundles[winner] = bundles[winner].union(demand);
                payments[winner] += price;
                unsold = unsold.difference(demand);
                transcript.push(RoundRecord {
                    round,
                    winner,
                    bid,
                    bundle: demand,
                    price,
                });
                history.push(Announcement {
                    winner,
                    bid,
                    bundle: demand,
                });
            }
            None if order.is_some() => {}
            None => break,
        }
        round += 1;
    }

    Ok(Outcome {
        transcript,
        allocation: Allocation { bundles },
        payments,
        item_prices,
        sold: ItemSet::full(m).difference(unsold),
    })
}

/// `v_i(S_i) - P_i`.
pub fn utility(outcome: &Outcome, bidder: usize, valuation: &Valuation) -> Result<Rational> {
    let bundle = outcome
        .allocation
        .bundles
        .get(bidder)
        .ok_or(Error::DimensionMismatch(outcome.payments.len(), bidder + 1))?;
    Ok(valuation.value(*bundle)? - outcome.payments[bidder])
}

pub fn revenue(outcome: &Outcome) -> Rational {
    outcome.payments.iter().sum()
}

/// One line per round: `t winner amount plus bundle_bitmask price`.
pub fn export_transcript(outcome: &Outcome) -> String {
    let mut out = String::new();
    for r in &outcome.transcript {
        out.push_str(&format!(
            "{} {} {} {} {} {}\n",
            r.round,
            r.winner,
            fmt_rational(&r.bid.amount),
            u8::from(r.bid.plus),
            r.bundle.bits(),
            fmt_rational(&r.price)
        ));
    }
    out
}

pub fn parse_transcript(text: &str) -> Result<Vec<RoundRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("transcript line {}: {what}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let plus = match fields[3] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("plus flag must be 0 or 1")),
        };
        records.push(RoundRecord {
            round: fields[0].parse().map_err(|_| bad("round"))?,
            winner: fields[1].parse().map_err(|_| bad("winner"))?,
            bid: Bid::new(parse_rational(fields[2])?, plus),
            bundle: ItemSet::from_bits(fields[4].parse().map_err(|_| bad("bundle"))?),
            price: parse_rational(fields[5])?,
        });
    }
    Ok(records)
}
