//! TOML scenarios: mechanism, valuations, plan space, an optional explicit
//! profile, and the experiment to run. Rationals are strings such as
//! `"3/4"`; plain integers are accepted too.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use auctionlab_core::engine::{Announcement, Bid, History, MechanismConfig, MechanismKind};
use auctionlab_core::equilibrium::{GameInstance, SpeOptions, StagePin};
use auctionlab_core::rational::{fmt_rational, parse_rational};
use auctionlab_core::smoothness::{Approximator, DeviationFamily};
use auctionlab_core::strategies::{generate_plan_space, uniform_grid, Action, Plan, PlanFamily, StateKey};
use auctionlab_core::{ItemSet, Rational, Valuation};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A rational written as a string or an integer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Text(String),
}

impl Num {
    fn parse(&self, field: &str) -> Result<Rational, CliError> {
        match self {
            Num::Int(x) => Ok(Rational::from_integer(*x as i128)),
            Num::Text(s) => parse_rational(s).map_err(|e| invalid(field, e)),
        }
    }

    fn from_rational(r: &Rational) -> Num {
        Num::Text(fmt_rational(r))
    }
}

fn invalid(field: &str, e: impl fmt::Display) -> CliError {
    CliError::Invalid(format!("{field}: {e}"))
}

fn nums(values: &[Num], field: &str) -> Result<Vec<Rational>, CliError> {
    values
        .iter()
        .enumerate()
        .map(|(k, v)| v.parse(&format!("{field}[{k}]")))
        .collect()
}

fn to_nums(values: &[Rational]) -> Vec<Num> {
    values.iter().map(Num::from_rational).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub mechanism: MechanismDto,
    /// May be left out when a `[sweep]` section generates the bidders.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub valuations: Vec<ValuationDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plans: Option<PlansDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepDto>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profile: Vec<PlanDto>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismDto {
    /// `draft`, `single_item_draft` or `sequential`.
    pub kind: String,
    pub n: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ValuationDto {
    UnitDemand {
        values: Vec<Num>,
    },
    Additive {
        values: Vec<Num>,
    },
    Xos {
        clauses: Vec<Vec<Num>>,
    },
    /// `2^m` entries in bitmask order.
    Table {
        values: Vec<Num>,
        #[serde(default)]
        subadditive: bool,
    },
    ConstraintHomogeneous {
        interest: Vec<usize>,
        per_unit: Num,
    },
    ConcaveSymmetric {
        f: Vec<Num>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlansDto {
    pub step: Num,
    pub max: Num,
    #[serde(default = "yes")]
    pub plus: bool,
    /// `abstain`, `target`, `until_win_best`, `constant_take:<k>`.
    pub families: Vec<String>,
    #[serde(default)]
    pub undominated: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntryDto {
    /// Announcements `winner@bid{items}` joined by `;`; empty for the root.
    pub history: String,
    pub bid: String,
    pub demand: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedEntryDto {
    pub p: Num,
    pub plan: PlanDto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanDto {
    Abstain,
    Target { bid: String, item: usize },
    UntilWin { bid: String, prefs: Vec<usize> },
    Constant { bid: String, prefs: Vec<usize>, take: usize },
    TruthfulMarginal { bidder: usize },
    Scripted { entries: Vec<ScriptEntryDto> },
    Mixed { support: Vec<MixedEntryDto> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinDto {
    pub round: usize,
    pub bundles: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supporter: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDto {
    /// `run`, `nash`, `spe`, `smoothness`, `approx`, `reproduce` or `sweep`.
    pub directive: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    /// Smoothness: `unit_demand`, `core`, or `extension:<approximator>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Approx: `concave_symmetric`, `additive`, `xos` or `subadditive`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approximator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub alternatives: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credible_support: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pins: Vec<PinDto>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDto {
    /// Valuation class of the generated instances.
    pub class: String,
    /// Inclusive `[low, high]` ranges.
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub instances: usize,
    pub denom: i64,
    pub max_units: i64,
    /// Any of `nash`, `smoothness`.
    pub directives: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Directive {
    Run,
    Nash,
    Spe,
    Smoothness,
    Approx,
    Reproduce,
    Sweep,
}

impl Directive {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "run" => Directive::Run,
            "nash" => Directive::Nash,
            "spe" => Directive::Spe,
            "smoothness" => Directive::Smoothness,
            "approx" => Directive::Approx,
            "reproduce" => Directive::Reproduce,
            "sweep" => Directive::Sweep,
            other => return Err(invalid("experiment.directive", format!("unknown directive `{other}`"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Directive::Run => "run",
            Directive::Nash => "nash",
            Directive::Spe => "spe",
            Directive::Smoothness => "smoothness",
            Directive::Approx => "approx",
            Directive::Reproduce => "reproduce",
            Directive::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SmoothnessFamily {
    Direct(DeviationFamily),
    Extension(Approximator),
}

pub fn parse_approximator(s: &str, field: &str) -> Result<Approximator, CliError> {
    Ok(match s {
        "concave_symmetric" => Approximator::ConcaveSymmetric,
        "additive" => Approximator::Additive,
        "xos" => Approximator::Xos,
        "subadditive" => Approximator::Subadditive,
        other => return Err(invalid(field, format!("unknown approximator `{other}`"))),
    })
}

impl SmoothnessFamily {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let field = "experiment.family";
        Ok(match s {
            "unit_demand" => SmoothnessFamily::Direct(DeviationFamily::UnitDemand),
            "core" => SmoothnessFamily::Direct(DeviationFamily::Core),
            other => match other.strip_prefix("extension:") {
                Some(rest) => SmoothnessFamily::Extension(parse_approximator(rest, field)?),
                None => return Err(invalid(field, format!("unknown family `{other}`"))),
            },
        })
    }

    pub fn name(&self) -> String {
        match self {
            SmoothnessFamily::Direct(f) => f.name().to_string(),
            SmoothnessFamily::Extension(a) => format!("extension:{}", a.name()),
        }
    }
}

pub fn parse_family(s: &str) -> Result<PlanFamily, CliError> {
    Ok(match s {
        "abstain" => PlanFamily::Abstain,
        "target" => PlanFamily::Target,
        "until_win_best" => PlanFamily::UntilWinBest,
        other => match other.strip_prefix("constant_take:").map(str::parse::<usize>) {
            Some(Ok(k)) if k >= 1 => PlanFamily::ConstantTake(k),
            _ => return Err(invalid("plans.families", format!("unknown family `{other}`"))),
        },
    })
}

pub fn family_name(f: PlanFamily) -> String {
    match f {
        PlanFamily::Abstain => "abstain".into(),
        PlanFamily::Target => "target".into(),
        PlanFamily::UntilWinBest => "until_win_best".into(),
        PlanFamily::ConstantTake(k) => format!("constant_take:{k}"),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanSpace {
    pub step: Rational,
    pub max: Rational,
    pub plus: bool,
    pub families: Vec<PlanFamily>,
    pub undominated: bool,
}

impl PlanSpace {
    pub fn grid(&self) -> Result<Vec<Bid>, CliError> {
        Ok(uniform_grid(self.step, self.max, self.plus)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub directive: Directive,
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub cap: Option<u64>,
    pub family: Option<SmoothnessFamily>,
    pub lambda: Option<Rational>,
    pub mu: Option<Rational>,
    pub samples: Option<usize>,
    pub approximator: Option<Approximator>,
    pub set: Option<ItemSet>,
    pub alternatives: bool,
    pub credible_support: Option<bool>,
    pub pins: Vec<(StateKey, StagePin)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub class: String,
    pub n: (usize, usize),
    pub m: (usize, usize),
    pub instances: usize,
    pub denom: i64,
    pub max_units: i64,
    pub directives: Vec<Directive>,
    pub seed: Option<u64>,
}

pub const SWEEP_CLASSES: [&str; 6] = [
    "unit_demand",
    "additive",
    "constraint_homogeneous",
    "concave_symmetric",
    "xos",
    "subadditive",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub config: MechanismConfig,
    pub valuations: Vec<Valuation>,
    pub plans: Option<PlanSpace>,
    pub profile: Vec<Plan>,
    pub experiment: Option<Experiment>,
    pub sweep: Option<SweepSpec>,
}

fn items(list: &[usize], m: usize, field: &str) -> Result<ItemSet, CliError> {
    ItemSet::from_items(list, m).map_err(|e| invalid(field, e))
}

fn item_list(set: ItemSet) -> Vec<usize> {
    set.iter().collect()
}

fn parse_bid(s: &str, field: &str) -> Result<Bid, CliError> {
    s.parse::<Bid>().map_err(|e| invalid(field, e))
}

fn fmt_bid(b: &Bid) -> String {
    format!("{}{}", fmt_rational(&b.amount), if b.plus { "+" } else { "" })
}

fn parse_history(s: &str, m: usize, field: &str) -> Result<History, CliError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|part| {
            let (winner, rest) = part
                .split_once('@')
                .ok_or_else(|| invalid(field, format!("announcement `{part}` lacks `@`")))?;
            let brace = rest
                .find('{')
                .ok_or_else(|| invalid(field, format!("announcement `{part}` lacks a bundle")))?;
            let winner = winner
                .trim()
                .parse::<usize>()
                .map_err(|_| invalid(field, format!("bad winner in `{part}`")))?;
            let bid = parse_bid(&rest[..brace], field)?;
            let bundle: ItemSet = rest[brace..].parse().map_err(|e| invalid(field, e))?;
            bundle.check_fits(m).map_err(|e| invalid(field, e))?;
            Ok(Announcement { winner, bid, bundle })
        })
        .collect()
}

fn fmt_history(h: &History) -> String {
    h.iter()
        .map(|a| format!("{}@{}{}", a.winner, fmt_bid(&a.bid), a.bundle))
        .collect::<Vec<_>>()
        .join(";")
}

fn check_prefs(prefs: &[usize], m: usize, field: &str) -> Result<(), CliError> {
    if let Some(&j) = prefs.iter().find(|&&j| j >= m) {
        return Err(invalid(field, format!("item {j} out of range for {m} items")));
    }
    Ok(())
}

fn plan_from_dto(dto: &PlanDto, valuations: &[Valuation], m: usize, field: &str) -> Result<Plan, CliError> {
    Ok(match dto {
        PlanDto::Abstain => Plan::Abstain,
        PlanDto::Target { bid, item } => {
            if *item >= m {
                return Err(invalid(&format!("{field}.item"), format!("item {item} out of range")));
            }
            Plan::Target {
                bid: parse_bid(bid, &format!("{field}.bid"))?,
                item: *item,
            }
        }
        PlanDto::UntilWin { bid, prefs } => {
            check_prefs(prefs, m, &format!("{field}.prefs"))?;
            Plan::UntilWin {
                bid: parse_bid(bid, &format!("{field}.bid"))?,
                prefs: prefs.clone(),
            }
        }
        PlanDto::Constant { bid, prefs, take } => {
            check_prefs(prefs, m, &format!("{field}.prefs"))?;
            Plan::Constant {
                bid: parse_bid(bid, &format!("{field}.bid"))?,
                prefs: prefs.clone(),
                take: *take,
            }
        }
        PlanDto::TruthfulMarginal { bidder } => Plan::TruthfulMarginal {
            valuation: valuations
                .get(*bidder)
                .ok_or_else(|| invalid(&format!("{field}.bidder"), format!("no bidder {bidder}")))?
                .clone(),
        },
        PlanDto::Scripted { entries } => {
            let mut table = BTreeMap::new();
            for (k, e) in entries.iter().enumerate() {
                let f = format!("{field}.entries[{k}]");
                let history = parse_history(&e.history, m, &format!("{f}.history"))?;
                let action = Action::new(parse_bid(&e.bid, &format!("{f}.bid"))?, items(&e.demand, m, &format!("{f}.demand"))?);
                table.insert(history, action);
            }
            auctionlab_core::strategies::scripted(table)
        }
        PlanDto::Mixed { support } => Plan::Mixed {
            support: support
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let f = format!("{field}.support[{k}]");
                    Ok((e.p.parse(&format!("{f}.p"))?, plan_from_dto(&e.plan, valuations, m, &format!("{f}.plan"))?))
                })
                .collect::<Result<_, CliError>>()?,
        },
    })
}

fn plan_to_dto(plan: &Plan, valuations: &[Valuation]) -> Result<PlanDto, CliError> {
    Ok(match plan {
        Plan::Abstain => PlanDto::Abstain,
        Plan::Target { bid, item } => PlanDto::Target {
            bid: fmt_bid(bid),
            item: *item,
        },
        Plan::UntilWin { bid, prefs } => PlanDto::UntilWin {
            bid: fmt_bid(bid),
            prefs: prefs.clone(),
        },
        Plan::Constant { bid, prefs, take } => PlanDto::Constant {
            bid: fmt_bid(bid),
            prefs: prefs.clone(),
            take: *take,
        },
        Plan::TruthfulMarginal { valuation } => PlanDto::TruthfulMarginal {
            bidder: valuations
                .iter()
                .position(|v| v == valuation)
                .ok_or_else(|| CliError::Invalid("truthful plan for a valuation outside the profile".into()))?,
        },
        Plan::Scripted { table, fallback } if **fallback == Plan::Abstain => PlanDto::Scripted {
            entries: table
                .iter()
                .map(|(h, a)| ScriptEntryDto {
                    history: fmt_history(h),
                    bid: fmt_bid(&a.bid),
                    demand: item_list(a.demand),
                })
                .collect(),
        },
        Plan::Mixed { support } => PlanDto::Mixed {
            support: support
                .iter()
                .map(|(p, plan)| {
                    Ok(MixedEntryDto {
                        p: Num::from_rational(p),
                        plan: plan_to_dto(plan, valuations)?,
                    })
                })
                .collect::<Result<_, CliError>>()?,
        },
        other => return Err(CliError::Invalid(format!("plan `{other}` has no scenario form"))),
    })
}

fn valuation_from_dto(dto: &ValuationDto, m: usize, field: &str) -> Result<Valuation, CliError> {
    let check_len = |len: usize, what: &str| {
        if len != m {
            Err(invalid(&format!("{field}.{what}"), format!("expected {m} entries, got {len}")))
        } else {
            Ok(())
        }
    };
    let v = match dto {
        ValuationDto::UnitDemand { values } => {
            check_len(values.len(), "values")?;
            Valuation::unit_demand(nums(values, &format!("{field}.values"))?)
        }
        ValuationDto::Additive { values } => {
            check_len(values.len(), "values")?;
            Valuation::additive(nums(values, &format!("{field}.values"))?)
        }
        ValuationDto::Xos { clauses } => {
            let mut parsed = Vec::new();
            for (k, c) in clauses.iter().enumerate() {
                check_len(c.len(), &format!("clauses[{k}]"))?;
                parsed.push(nums(c, &format!("{field}.clauses[{k}]"))?);
            }
            Valuation::xos(parsed)
        }
        ValuationDto::Table { values, subadditive } => {
            Valuation::table(m, nums(values, &format!("{field}.values"))?, *subadditive)
        }
        ValuationDto::ConstraintHomogeneous { interest, per_unit } => Valuation::constraint_homogeneous(
            m,
            items(interest, m, &format!("{field}.interest"))?,
            per_unit.parse(&format!("{field}.per_unit"))?,
        ),
        ValuationDto::ConcaveSymmetric { f } => {
            if f.len() != m + 1 {
                return Err(invalid(&format!("{field}.f"), format!("expected {} entries, got {}", m + 1, f.len())));
            }
            Valuation::concave_symmetric(nums(f, &format!("{field}.f"))?)
        }
    };
    v.map_err(|e| invalid(field, e))
}

fn valuation_to_dto(v: &Valuation) -> ValuationDto {
    match v {
        Valuation::UnitDemand { values } => ValuationDto::UnitDemand { values: to_nums(values) },
        Valuation::Additive { values } => ValuationDto::Additive { values: to_nums(values) },
        Valuation::Xos { clauses } => ValuationDto::Xos {
            clauses: clauses.iter().map(|c| to_nums(c)).collect(),
        },
        Valuation::Table {
            values, subadditive, ..
        } => ValuationDto::Table {
            values: to_nums(values),
            subadditive: *subadditive,
        },
        Valuation::ConstraintHomogeneous { interest, per_unit, .. } => ValuationDto::ConstraintHomogeneous {
            interest: item_list(*interest),
            per_unit: Num::from_rational(per_unit),
        },
        Valuation::ConcaveSymmetric { f } => ValuationDto::ConcaveSymmetric { f: to_nums(f) },
    }
}

fn range(v: &[usize], field: &str) -> Result<(usize, usize), CliError> {
    match v {
        [lo, hi] if lo <= hi && *lo >= 1 => Ok((*lo, *hi)),
        _ => Err(invalid(field, "expected [low, high] with 1 <= low <= high")),
    }
}

impl Scenario {
    pub fn from_file(file: &ScenarioFile) -> Result<Self, CliError> {
        let mech = &file.mechanism;
        let kind = match mech.kind.as_str() {
            "draft" => MechanismKind::Draft,
            "single_item_draft" => MechanismKind::SingleItemDraft,
            "sequential" => MechanismKind::SequentialItem {
                order: mech.order.clone().unwrap_or_else(|| (0..mech.m).collect()),
            },
            other => return Err(invalid("mechanism.kind", format!("unknown mechanism `{other}`"))),
        };
        if mech.order.is_some() && !matches!(kind, MechanismKind::SequentialItem { .. }) {
            return Err(invalid("mechanism.order", "only sequential auctions take an item order"));
        }
        let ties = mech.tie_break.clone().unwrap_or_else(|| (0..mech.n).collect());
        let config = MechanismConfig::new(kind, mech.n, mech.m, ties).map_err(|e| invalid("mechanism", e))?;

        let template = file.sweep.is_some() && file.valuations.is_empty();
        if !template && file.valuations.len() != mech.n {
            return Err(invalid(
                "valuations",
                format!("mechanism has {} bidders but {} valuations are given", mech.n, file.valuations.len()),
            ));
        }
        let valuations = file
            .valuations
            .iter()
            .enumerate()
            .map(|(i, v)| valuation_from_dto(v, mech.m, &format!("valuations[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;

        let plans = file
            .plans
            .as_ref()
            .map(|p| {
                let step = p.step.parse("plans.step")?;
                let max = p.max.parse("plans.max")?;
                uniform_grid(step, max, p.plus).map_err(|e| invalid("plans", e))?;
                Ok::<_, CliError>(PlanSpace {
                    step,
                    max,
                    plus: p.plus,
                    families: p.families.iter().map(|f| parse_family(f)).collect::<Result<_, _>>()?,
                    undominated: p.undominated,
                })
            })
            .transpose()?;

        if !file.profile.is_empty() && file.profile.len() != mech.n {
            return Err(invalid(
                "profile",
                format!("expected one plan per bidder ({}), got {}", mech.n, file.profile.len()),
            ));
        }
        let profile = file
            .profile
            .iter()
            .enumerate()
            .map(|(i, p)| plan_from_dto(p, &valuations, mech.m, &format!("profile[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;

        let experiment = file
            .experiment
            .as_ref()
            .map(|e| {
                let pins = e
                    .pins
                    .iter()
                    .enumerate()
                    .map(|(k, p)| {
                        let f = format!("experiment.pins[{k}]");
                        if p.bundles.len() != mech.n {
                            return Err(invalid(&format!("{f}.bundles"), "expected one bundle per bidder"));
                        }
                        let bundles = p
                            .bundles
                            .iter()
                            .map(|b| items(b, mech.m, &format!("{f}.bundles")))
                            .collect::<Result<_, _>>()?;
                        for who in [p.winner, p.supporter].into_iter().flatten() {
                            if who >= mech.n {
                                return Err(invalid(&f, format!("no bidder {who}")));
                            }
                        }
                        Ok((
                            StateKey { round: p.round, bundles },
                            StagePin {
                                winner: p.winner,
                                supporter: p.supporter,
                            },
                        ))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                Ok::<_, CliError>(Experiment {
                    directive: Directive::parse(&e.directive)?,
                    name: e.name.clone(),
                    seed: e.seed,
                    cap: e.cap,
                    family: e.family.as_deref().map(SmoothnessFamily::parse).transpose()?,
                    lambda: e.lambda.as_ref().map(|x| x.parse("experiment.lambda")).transpose()?,
                    mu: e.mu.as_ref().map(|x| x.parse("experiment.mu")).transpose()?,
                    samples: e.samples,
                    approximator: e
                        .approximator
                        .as_deref()
                        .map(|a| parse_approximator(a, "experiment.approximator"))
                        .transpose()?,
                    set: e.set.as_ref().map(|s| items(s, mech.m, "experiment.set")).transpose()?,
                    alternatives: e.alternatives,
                    credible_support: e.credible_support,
                    pins,
                })
            })
            .transpose()?;

        let sweep = file
            .sweep
            .as_ref()
            .map(|s| {
                if !SWEEP_CLASSES.contains(&s.class.as_str()) {
                    return Err(invalid("sweep.class", format!("unknown class `{}`", s.class)));
                }
                if s.denom < 1 || s.max_units < 1 {
                    return Err(invalid("sweep", "denom and max_units must be positive"));
                }
                let directives = s
                    .directives
                    .iter()
                    .map(|d| match Directive::parse(d)? {
                        ok @ (Directive::Nash | Directive::Smoothness) => Ok(ok),
                        _ => Err(invalid("sweep.directives", format!("`{d}` cannot be swept"))),
                    })
                    .collect::<Result<_, _>>()?;
                Ok(SweepSpec {
                    class: s.class.clone(),
                    n: range(&s.n, "sweep.n")?,
                    m: range(&s.m, "sweep.m")?,
                    instances: s.instances,
                    denom: s.denom,
                    max_units: s.max_units,
                    directives,
                    seed: s.seed,
                })
            })
            .transpose()?;

        Ok(Scenario {
            config,
            valuations,
            plans,
            profile,
            experiment,
            sweep,
        })
    }

    pub fn to_file(&self) -> Result<ScenarioFile, CliError> {
        let c = &self.config;
        let (kind, order) = match &c.kind {
            MechanismKind::Draft => ("draft", None),
            MechanismKind::SingleItemDraft => ("single_item_draft", None),
            MechanismKind::SequentialItem { order } => ("sequential", Some(order.clone())),
        };
        let experiment = self.experiment.as_ref().map(|e| ExperimentDto {
            directive: e.directive.name().into(),
            name: e.name.clone(),
            seed: e.seed,
            cap: e.cap,
            family: e.family.as_ref().map(SmoothnessFamily::name),
            lambda: e.lambda.as_ref().map(Num::from_rational),
            mu: e.mu.as_ref().map(Num::from_rational),
            samples: e.samples,
            approximator: e.approximator.map(|a| a.name().into()),
            set: e.set.map(item_list),
            alternatives: e.alternatives,
            credible_support: e.credible_support,
            pins: e
                .pins
                .iter()
                .map(|(state, pin)| PinDto {
                    round: state.round,
                    bundles: state.bundles.iter().map(|b| item_list(*b)).collect(),
                    winner: pin.winner,
                    supporter: pin.supporter,
                })
                .collect(),
        });
        Ok(ScenarioFile {
            mechanism: MechanismDto {
                kind: kind.into(),
                n: c.n,
                m: c.m,
                tie_break: Some(c.tie_break.clone()),
                order,
            },
            valuations: self.valuations.iter().map(valuation_to_dto).collect(),
            plans: self.plans.as_ref().map(|p| PlansDto {
                step: Num::from_rational(&p.step),
                max: Num::from_rational(&p.max),
                plus: p.plus,
                families: p.families.iter().map(|f| family_name(*f)).collect(),
                undominated: p.undominated,
            }),
            experiment,
            sweep: self.sweep.as_ref().map(|s| SweepDto {
                class: s.class.clone(),
                n: vec![s.n.0, s.n.1],
                m: vec![s.m.0, s.m.1],
                instances: s.instances,
                denom: s.denom,
                max_units: s.max_units,
                directives: s.directives.iter().map(|d| d.name().into()).collect(),
                seed: s.seed,
            }),
            profile: self
                .profile
                .iter()
                .map(|p| plan_to_dto(p, &self.valuations))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(&self.to_file()?).map_err(|e| CliError::Invalid(format!("cannot serialize scenario: {e}")))
    }

    pub fn directive(&self) -> Option<Directive> {
        self.experiment.as_ref().map(|e| e.directive)
    }

    /// Plan spaces from the scenario's grid, with `step` overriding the
    /// grid step. The explicit profile, if any, is added to the spaces.
    pub fn instance(&self, step: Option<Rational>) -> Result<GameInstance, CliError> {
        let mut space = self
            .plans
            .clone()
            .ok_or_else(|| CliError::Invalid("plans: this directive needs a [plans] section".into()))?;
        if let Some(step) = step {
            space.step = step;
        }
        let grid = space.grid()?;
        let spaces = self
            .valuations
            .iter()
            .map(|v| generate_plan_space(v, &grid, &space.families, space.undominated))
            .collect();
        let mut instance = GameInstance::new(self.config.clone(), self.valuations.clone(), spaces)?;
        if !self.profile.is_empty() {
            instance.include_profile(&self.profile);
        }
        Ok(instance)
    }

    pub fn spe_options(&self, step: Option<Rational>) -> Result<SpeOptions, CliError> {
        let mut space = self
            .plans
            .clone()
            .ok_or_else(|| CliError::Invalid("plans: the solver needs a [plans] grid".into()))?;
        if let Some(step) = step {
            space.step = step;
        }
        let mut options = SpeOptions::from_bids(&space.grid()?);
        if let Some(e) = &self.experiment {
            for (state, pin) in &e.pins {
                options = options.pin(state.clone(), *pin);
            }
            if let Some(c) = e.credible_support {
                options.credible_support = c;
            }
        }
        Ok(options)
    }
}

/// Parses scenario text; `origin` names the source in diagnostics.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Parse {
            origin: origin.into(),
            message: "scenario is empty".into(),
        });
    }
    let file: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Parse {
        origin: origin.into(),
        message: e.to_string(),
    })?;
    Scenario::from_file(&file).map_err(|e| match e {
        CliError::Invalid(message) => CliError::Parse {
            origin: origin.into(),
            message,
        },
        other => other,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text, &path.display().to_string())
}
