//! Checks of the `(λ, μ)` smoothness inequality
//!
//! ```text
//! Σ_i u_i(b'_i(b_i), b_-i) >= λ · OPT - μ · Σ_i P_i(b)
//! ```
//!
//! over finite profile domains, with the deviations built from each
//! bidder's own valuation, its optimal bundle and its own plan.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{run_auction, utility, Outcome};
use crate::equilibrium::GameInstance;
use crate::error::{Error, Result};
use crate::items::ItemSet;
use crate::rational::{bucketing_beta, fmt_rational, harmonic, int, max_of, Rational};
use crate::strategies::{core_target_units, Plan};
use crate::valuations::{
    approx_additive, approx_concave_symmetric, approx_subadditive, approx_xos, check_pointwise_approx,
    optimal_welfare, Allocation, ApproxResult, Valuation, DEFAULT_WELFARE_CAP,
};

/// Largest profile product checked exhaustively under [`ProfileDomain::Auto`].
pub const EXHAUSTIVE_PROFILE_CAP: u128 = 100_000;

/// Per-bidder deviation, fixed before any profile is seen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeviationSpec {
    /// Keep the original plan (bidder gets nothing in the optimum).
    Identity,
    UnitDemand { item: usize, value: Rational },
    Core { interest: ItemSet, per_unit: Rational },
}

impl DeviationSpec {
    pub fn apply(&self, original: &Plan) -> Plan {
        match self {
            DeviationSpec::Identity => original.clone(),
            DeviationSpec::UnitDemand { item, value } => Plan::UnitDemandDeviation {
                original: Box::new(original.clone()),
                item: *item,
                value: *value,
            },
            DeviationSpec::Core { interest, per_unit } => Plan::CoreDeviation {
                original: Box::new(original.clone()),
                interest: *interest,
                per_unit: *per_unit,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeviationFamily {
    /// Bid at least half the value of the best item of the optimal bundle.
    UnitDemand,
    /// Core deviation on the interest units inside the optimal bundle;
    /// constraint-homogeneous valuations only.
    Core,
}

impl DeviationFamily {
    pub fn name(self) -> &'static str {
        match self {
            DeviationFamily::UnitDemand => "unit_demand",
            DeviationFamily::Core => "core",
        }
    }
}

/// Deviations for `family` against the optimal allocation `opt`.
pub fn build_deviations(family: DeviationFamily, valuations: &[Valuation], opt: &Allocation) -> Result<Vec<DeviationSpec>> {
    valuations
        .iter()
        .zip(&opt.bundles)
        .map(|(v, &bundle)| {
            if bundle.is_empty() {
                return Ok(DeviationSpec::Identity);
            }
            match family {
                DeviationFamily::UnitDemand => {
                    let values = v.item_values();
                    let item = bundle
                        .iter()
                        .max_by(|&a, &b| values[a].cmp(&values[b]).then(b.cmp(&a)))
                        .expect("bundle is nonempty");
                    Ok(DeviationSpec::UnitDemand {
                        item,
                        value: values[item],
                    })
                }
                DeviationFamily::Core => match v {
                    Valuation::ConstraintHomogeneous { interest, per_unit, .. } => {
                        let target = interest.intersection(bundle);
                        Ok(if target.is_empty() {
                            DeviationSpec::Identity
                        } else {
                            DeviationSpec::Core {
                                interest: target,
                                per_unit: *per_unit,
                            }
                        })
                    }
                    other => Err(Error::Precondition(format!(
                        "core deviation needs constraint-homogeneous valuations, got {}",
                        other.class_name()
                    ))),
                },
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileDomain {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
    /// Exhaustive up to [`EXHAUSTIVE_PROFILE_CAP`] profiles, sampled above.
    Auto { count: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    HoldsEverywhere,
    Counterexample { profile: Vec<Plan>, margin: Rational },
}

/// A per-bidder inequality that failed on some profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BidderViolation {
    pub check: &'static str,
    pub bidder: usize,
    pub profile: Vec<Plan>,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct SmoothnessCertificate {
    pub lambda: Rational,
    pub mu: Rational,
    pub family: String,
    pub deviations: Vec<DeviationSpec>,
    pub opt_welfare: Rational,
    pub exhaustive: bool,
    pub profiles_checked: u128,
    pub verdict: Verdict,
    /// Minimum over checked profiles of `Σu' - λ·OPT + μ·ΣP`.
    pub worst_margin: Option<Rational>,
    pub bidder_checks: u128,
    pub violations: Vec<BidderViolation>,
}

impl SmoothnessCertificate {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::HoldsEverywhere
    }

    /// The aggregate inequality and every per-bidder check passed.
    pub fn all_checks_pass(&self) -> bool {
        self.holds() && self.violations.is_empty()
    }

    pub fn poa_bound(&self) -> Result<Rational> {
        poa_bound(self.lambda, self.mu)
    }

    /// Recomputes the margin of the recorded counterexample.
    pub fn replay(&self, instance: &GameInstance) -> Result<Option<Rational>> {
        match &self.verdict {
            Verdict::HoldsEverywhere => Ok(None),
            Verdict::Counterexample { profile, .. } => {
                let base = run_auction(&instance.config, profile, None)?;
                let eval = evaluate(instance, &self.deviations, profile, &base)?;
                Ok(Some(margin(&eval, self.lambda, self.mu, self.opt_welfare)))
            }
        }
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("family: {}\n", self.family));
        out.push_str(&format!("lambda: {}\n", fmt_rational(&self.lambda)));
        out.push_str(&format!("mu: {}\n", fmt_rational(&self.mu)));
        if let Ok(b) = self.poa_bound() {
            out.push_str(&format!("poa_bound: {}\n", fmt_rational(&b)));
        }
        out.push_str(&format!("opt_welfare: {}\n", fmt_rational(&self.opt_welfare)));
        out.push_str(&format!(
            "domain: {} profiles ({})\n",
            self.profiles_checked,
            if self.exhaustive { "exhaustive" } else { "sampled" }
        ));
        match &self.worst_margin {
            Some(m) => out.push_str(&format!("worst_margin: {}\n", fmt_rational(m))),
            None => out.push_str("worst_margin: none\n"),
        }
        match &self.verdict {
            Verdict::HoldsEverywhere => out.push_str("verdict: holds\n"),
            Verdict::Counterexample { profile, margin } => {
                out.push_str(&format!("verdict: counterexample (margin {})\n", fmt_rational(margin)));
                for (i, p) in profile.iter().enumerate() {
                    out.push_str(&format!("  bidder {i}: {p}\n"));
                }
            }
        }
        out.push_str(&format!(
            "bidder_checks: {} run, {} failed\n",
            self.bidder_checks,
            self.violations.len()
        ));
        for v in self.violations.iter().take(5) {
            out.push_str(&format!("  {} bidder {}: {}\n", v.check, v.bidder, v.detail));
        }
        out
    }
}

/// `max(1, μ) / λ`.
pub fn poa_bound(lambda: Rational, mu: Rational) -> Result<Rational> {
    if lambda <= Rational::zero() {
        return Err(Error::Precondition("lambda must be positive".into()));
    }
    Ok(max_of(Rational::one(), mu) / lambda)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaymentIdentity {
    /// `Σ_j p_j = Σ_i P_i`.
    pub conservation: bool,
    /// `Σ_i Σ_{j in S*_i} p_j = Σ_j p_j`; `None` when the optimum leaves
    /// some item unassigned.
    pub partition: Option<bool>,
}

pub fn check_payment_identity(outcome: &Outcome, optimal: &Allocation) -> PaymentIdentity {
    let by_item: Rational = outcome.item_prices.iter().sum();
    let by_bidder: Rational = outcome.payments.iter().sum();
    let m = outcome.item_prices.len();
    let partition = (optimal.allocated() == ItemSet::full(m)).then(|| {
        let regrouped: Rational = optimal
            .bundles
            .iter()
            .flat_map(|b| b.iter())
            .map(|j| outcome.item_prices[j])
            .sum();
        regrouped == by_item
    });
    PaymentIdentity {
        conservation: by_item == by_bidder,
        partition,
    }
}

struct Evaluation {
    deviated: Vec<Outcome>,
    utilities: Vec<Rational>,
    total_payment: Rational,
}

fn evaluate(instance: &GameInstance, specs: &[DeviationSpec], profile: &[Plan], base: &Outcome) -> Result<Evaluation> {
    let mut trial = profile.to_vec();
    let mut deviated = Vec::with_capacity(profile.len());
    let mut utilities = Vec::with_capacity(profile.len());
    for (i, spec) in specs.iter().enumerate() {
        trial[i] = spec.apply(&profile[i]);
        let out = run_auction(&instance.config, &trial, None)?;
        utilities.push(utility(&out, i, &instance.valuations[i])?);
        deviated.push(out);
        trial[i] = profile[i].clone();
    }
    Ok(Evaluation {
        deviated,
        utilities,
        total_payment: base.payments.iter().sum(),
    })
}

fn margin(eval: &Evaluation, lambda: Rational, mu: Rational, opt: Rational) -> Rational {
    eval.utilities.iter().sum::<Rational>() - lambda * opt + mu * eval.total_payment
}

/// `k`-th lowest price over `set` (1-based); unsold items count as 0.
fn kth_lowest_price(outcome: &Outcome, set: ItemSet, k: usize) -> Rational {
    let mut prices: Vec<Rational> = set
        .iter()
        .map(|j| {
            if outcome.sold.contains(j) {
                outcome.item_prices[j]
            } else {
                Rational::zero()
            }
        })
        .collect();
    prices.sort();
    prices[k - 1]
}

/// Per-bidder inequalities behind the aggregate bound. `surrogates[i]`
/// is the valuation the deviation was built for.
fn bidder_checks(
    specs: &[DeviationSpec],
    surrogates: &[Valuation],
    true_vals: &[Valuation],
    base: &Outcome,
    eval: &Evaluation,
    profile: &[Plan],
    violations: &mut Vec<BidderViolation>,
) -> Result<u128> {
    let mut count = 0u128;
    let mut fail = |check: &'static str, bidder: usize, detail: String| {
        violations.push(BidderViolation {
            check,
            bidder,
            profile: profile.to_vec(),
            detail,
        });
    };
    for (i, spec) in specs.iter().enumerate() {
        let dev = &eval.deviated[i];
        let own_payment = base.payments[i];
        let u_surrogate = utility(dev, i, &surrogates[i])?;
        let u_true = utility(dev, i, &true_vals[i])?;
        count += 1;
        if u_true < u_surrogate {
            fail(
                "bridge_utility",
                i,
                format!("u(v) {} < u(v') {}", fmt_rational(&u_true), fmt_rational(&u_surrogate)),
            );
        }
        match spec {
            DeviationSpec::Identity => {}
            DeviationSpec::UnitDemand { item, value } => {
                count += 1;
                let bound = *value / int(2) - base.item_prices[*item] - own_payment;
                if u_surrogate < bound {
                    fail(
                        "unit_demand",
                        i,
                        format!("u {} < bound {}", fmt_rational(&u_surrogate), fmt_rational(&bound)),
                    );
                }
            }
            DeviationSpec::Core { interest, per_unit } => {
                count += 2;
                let size = int(interest.len() as i128);
                let prices: Rational = interest.iter().map(|j| base.item_prices[j]).sum();
                let bound = *per_unit * size / int(4) - prices - own_payment;
                if u_surrogate < bound {
                    fail(
                        "core_lemma",
                        i,
                        format!("u {} < bound {}", fmt_rational(&u_surrogate), fmt_rational(&bound)),
                    );
                }
                let target = core_target_units(*interest);
                count += 1;
                let cap = int(target as i128) * *per_unit / int(2) + own_payment;
                if dev.payments[i] > cap {
                    fail(
                        "core_payment",
                        i,
                        format!("paid {} > {}", fmt_rational(&dev.payments[i]), fmt_rational(&cap)),
                    );
                }
                let acquired = dev.allocation.bundles[i].intersection(*interest).len();
                let pivot = kth_lowest_price(base, *interest, target);
                if acquired < target && pivot < *per_unit / int(2) {
                    fail(
                        "core_cases",
                        i,
                        format!(
                            "acquired {acquired} < {target} units and price {} < {}",
                            fmt_rational(&pivot),
                            fmt_rational(&(*per_unit / int(2)))
                        ),
                    );
                }
            }
        }
    }
    Ok(count)
}

fn profiles(instance: &GameInstance, domain: ProfileDomain) -> Result<(bool, Vec<Vec<usize>>)> {
    let total = instance.profile_count();
    let sizes: Vec<usize> = instance.plan_spaces.iter().map(Vec::len).collect();
    let exhaustive = match domain {
        ProfileDomain::Exhaustive => {
            if total > EXHAUSTIVE_PROFILE_CAP {
                return Err(Error::CapExceeded {
                    needed: total,
                    cap: EXHAUSTIVE_PROFILE_CAP,
                });
            }
            true
        }
        ProfileDomain::Sampled { .. } => false,
        ProfileDomain::Auto { .. } => total <= EXHAUSTIVE_PROFILE_CAP,
    };
    if exhaustive {
        let mut all = Vec::with_capacity(total as usize);
        let mut digits = vec![0usize; sizes.len()];
        for _ in 0..total {
            all.push(digits.clone());
            for (d, &s) in digits.iter_mut().zip(&sizes) {
                *d += 1;
                if *d < s {
                    break;
                }
                *d = 0;
            }
        }
        return Ok((true, all));
    }
    let (count, seed) = match domain {
        ProfileDomain::Sampled { count, seed } | ProfileDomain::Auto { count, seed } => (count, seed),
        ProfileDomain::Exhaustive => unreachable!(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((
        false,
        (0..count)
            .map(|_| sizes.iter().map(|&s| rng.gen_range(0..s)).collect())
            .collect(),
    ))
}

fn run_check(
    instance: &GameInstance,
    specs: Vec<DeviationSpec>,
    surrogates: &[Valuation],
    family: String,
    lambda: Rational,
    mu: Rational,
    opt: Rational,
    domain: ProfileDomain,
) -> Result<SmoothnessCertificate> {
    let (exhaustive, domain) = profiles(instance, domain)?;
    let mut worst: Option<(Rational, Vec<Plan>)> = None;
    let mut violations = Vec::new();
    let mut bidder_count = 0u128;
    for digits in &domain {
        let profile: Vec<Plan> = digits
            .iter()
            .enumerate()
            .map(|(i, &k)| instance.plan_spaces[i][k].clone())
            .collect();
        let base = run_auction(&instance.config, &profile, None)?;
        let eval = evaluate(instance, &specs, &profile, &base)?;
        let m = margin(&eval, lambda, mu, opt);
        if worst.as_ref().map_or(true, |(w, _)| m < *w) {
            worst = Some((m, profile.clone()));
        }
        bidder_count += bidder_checks(
            &specs,
            surrogates,
            &instance.valuations,
            &base,
            &eval,
            &profile,
            &mut violations,
        )?;
    }
    let verdict = match &worst {
        Some((m, profile)) if *m < Rational::zero() => Verdict::Counterexample {
            profile: profile.clone(),
            margin: *m,
        },
        _ => Verdict::HoldsEverywhere,
    };
    Ok(SmoothnessCertificate {
        lambda,
        mu,
        family,
        deviations: specs,
        opt_welfare: opt,
        exhaustive,
        profiles_checked: domain.len() as u128,
        verdict,
        worst_margin: worst.map(|(m, _)| m),
        bidder_checks: bidder_count,
        violations,
    })
}

/// Checks the inequality with the deviations of `family` built against
/// the instance's optimal allocation.
pub fn check_smoothness(
    instance: &GameInstance,
    family: DeviationFamily,
    lambda: Rational,
    mu: Rational,
    domain: ProfileDomain,
) -> Result<SmoothnessCertificate> {
    let (opt_alloc, opt) = optimal_welfare(&instance.valuations, DEFAULT_WELFARE_CAP)?;
    let specs = build_deviations(family, &instance.valuations, &opt_alloc)?;
    run_check(
        instance,
        specs,
        &instance.valuations,
        family.name().to_string(),
        lambda,
        mu,
        opt,
        domain,
    )
}

/// Pointwise approximation chains ending in constraint-homogeneous
/// valuations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Approximator {
    ConcaveSymmetric,
    /// Bucketing of an additive valuation.
    Additive,
    /// Best clause, then bucketing.
    Xos,
    /// Largest additive minorant (LP), then bucketing.
    Subadditive,
}

impl Approximator {
    pub fn name(self) -> &'static str {
        match self {
            Approximator::ConcaveSymmetric => "concave_symmetric",
            Approximator::Additive => "additive",
            Approximator::Xos => "xos",
            Approximator::Subadditive => "subadditive",
        }
    }

    /// Approximation factor of the chain for `m` items.
    pub fn class_beta(self, m: usize) -> Rational {
        match self {
            Approximator::ConcaveSymmetric => Rational::one(),
            Approximator::Additive | Approximator::Xos => bucketing_beta(m),
            Approximator::Subadditive => harmonic(m) * bucketing_beta(m),
        }
    }

    /// Runs the chain at `set`, returning the final approximation and the
    /// product of the factors.
    pub fn approximate(self, v: &Valuation, set: ItemSet) -> Result<ApproxResult> {
        match self {
            Approximator::ConcaveSymmetric => approx_concave_symmetric(v, set),
            Approximator::Additive => approx_additive(v, set),
            Approximator::Xos => {
                let first = approx_xos(v, set)?;
                let second = approx_additive(&first.approx, set)?;
                Ok(ApproxResult {
                    beta: first.beta * second.beta,
                    ..second
                })
            }
            Approximator::Subadditive => {
                let first = approx_subadditive(v, set)?;
                let second = approx_additive(&first.approx, set)?;
                Ok(ApproxResult {
                    beta: first.beta * second.beta,
                    ..second
                })
            }
        }
    }
}

/// Extends a constraint-homogeneous certificate to the approximator's
/// class: each bidder runs the core deviation for its approximation at its
/// optimal bundle, and the inequality is checked at `(λ/β, μ)` against the
/// true valuations.
pub fn check_smoothness_via_extension(
    instance: &GameInstance,
    approximator: Approximator,
    base_lambda: Rational,
    mu: Rational,
    domain: ProfileDomain,
) -> Result<SmoothnessCertificate> {
    let m = instance.config.m;
    let beta = approximator.class_beta(m);
    let (opt_alloc, opt) = optimal_welfare(&instance.valuations, DEFAULT_WELFARE_CAP)?;

    let mut specs = Vec::with_capacity(instance.config.n);
    let mut surrogates = Vec::with_capacity(instance.config.n);
    for (v, &bundle) in instance.valuations.iter().zip(&opt_alloc.bundles) {
        if bundle.is_empty() {
            specs.push(DeviationSpec::Identity);
            surrogates.push(Valuation::zero(m));
            continue;
        }
        let result = approximator.approximate(v, bundle)?;
        if result.beta > beta {
            return Err(Error::GuaranteeViolated(format!(
                "approximation factor {} exceeds class factor {}",
                fmt_rational(&result.beta),
                fmt_rational(&beta)
            )));
        }
        if !check_pointwise_approx(v, &result.approx, bundle, result.beta)? {
            return Err(Error::GuaranteeViolated(format!(
                "{} approximation at {bundle} fails the pointwise check",
                approximator.name()
            )));
        }
        let Valuation::ConstraintHomogeneous { interest, per_unit, .. } = &result.approx else {
            return Err(Error::GuaranteeViolated("approximation chain must end constraint-homogeneous".into()));
        };
        specs.push(if interest.is_empty() {
            DeviationSpec::Identity
        } else {
            DeviationSpec::Core {
                interest: *interest,
                per_unit: *per_unit,
            }
        });
        surrogates.push(result.approx.clone());
    }

    let (_, opt_surrogate) = optimal_welfare(&surrogates, DEFAULT_WELFARE_CAP)?;
    if beta * opt_surrogate < opt {
        return Err(Error::GuaranteeViolated(format!(
            "beta * OPT(v') = {} below OPT(v) = {}",
            fmt_rational(&(beta * opt_surrogate)),
            fmt_rational(&opt)
        )));
    }

    run_check(
        instance,
        specs,
        &surrogates,
        format!("core via {}", approximator.name()),
        base_lambda / beta,
        mu,
        opt,
        domain,
    )
}
