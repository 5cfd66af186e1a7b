//! Valuation classes over a small set of heterogeneous items.

mod approx;
mod lp;

pub use approx::{
    approx_additive, approx_concave_symmetric, approx_subadditive, approx_xos,
    check_pointwise_approx, ApproxResult, APPROX_SUBSET_CAP,
};
pub use lp::{maximize_packing, PackingSolution};

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::items::{ItemSet, MAX_ITEMS};
use crate::rational::{fmt_rational, int, Rational};

/// Default cap on `n^m` for [`optimal_welfare`].
pub const DEFAULT_WELFARE_CAP: u128 = 10_000_000;

/// Largest item count for which an explicit table is accepted.
pub const MAX_TABLE_ITEMS: usize = 20;

/// A bidder's value for every bundle of items.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Valuation {
    /// `v(T) = max_{j in T} values[j]`.
    UnitDemand { values: Vec<Rational> },
    /// `v(T) = sum_{j in T} values[j]`.
    Additive { values: Vec<Rational> },
    /// Maximum over additive clauses.
    Xos { clauses: Vec<Vec<Rational>> },
    /// One entry per subset, indexed by bitmask.
    Table {
        m: usize,
        values: Vec<Rational>,
        subadditive: bool,
    },
    /// `v(T) = per_unit * |T ∩ interest|`.
    ConstraintHomogeneous {
        m: usize,
        interest: ItemSet,
        per_unit: Rational,
    },
    /// `v(T) = f[|T|]` for concave nondecreasing `f` with `f[0] = 0`.
    ConcaveSymmetric { f: Vec<Rational> },
}

fn check_nonnegative(values: &[Rational], what: &str) -> Result<()> {
    match values.iter().find(|v| v.is_negative()) {
        Some(v) => Err(Error::InvalidValuation(format!(
            "{what} has negative value {}",
            fmt_rational(v)
        ))),
        None => Ok(()),
    }
}

fn check_item_count(m: usize) -> Result<()> {
    if m > MAX_ITEMS {
        return Err(Error::InvalidValuation(format!("{m} items exceeds {MAX_ITEMS}")));
    }
    Ok(())
}

impl Valuation {
    pub fn unit_demand(values: Vec<Rational>) -> Result<Self> {
        check_item_count(values.len())?;
        check_nonnegative(&values, "unit-demand valuation")?;
        Ok(Valuation::UnitDemand { values })
    }

    pub fn additive(values: Vec<Rational>) -> Result<Self> {
        check_item_count(values.len())?;
        check_nonnegative(&values, "additive valuation")?;
        Ok(Valuation::Additive { values })
    }

    pub fn xos(clauses: Vec<Vec<Rational>>) -> Result<Self> {
        let first = clauses
            .first()
            .ok_or_else(|| Error::InvalidValuation("XOS valuation needs a clause".into()))?;
        let m = first.len();
        check_item_count(m)?;
        for clause in &clauses {
            if clause.len() != m {
                return Err(Error::DimensionMismatch(m, clause.len()));
            }
            check_nonnegative(clause, "XOS clause")?;
        }
        Ok(Valuation::Xos { clauses })
    }

    /// Explicit table in bitmask order. Checks `v(∅) = 0` and monotonicity,
    /// and subadditivity when `subadditive` is set.
    pub fn table(m: usize, values: Vec<Rational>, subadditive: bool) -> Result<Self> {
        if m > MAX_TABLE_ITEMS {
            return Err(Error::CapExceeded {
                needed: 1u128 << m,
                cap: 1u128 << MAX_TABLE_ITEMS,
            });
        }
        if values.len() != 1usize << m {
            return Err(Error::InvalidValuation(format!(
                "table for {m} items needs {} entries, got {}",
                1usize << m,
                values.len()
            )));
        }
        if !values[0].is_zero() {
            return Err(Error::InvalidValuation("table value of empty set must be 0".into()));
        }
        check_nonnegative(&values, "table")?;
        for mask in 0..values.len() {
            for j in 0..m {
                let bigger = mask | (1 << j);
                if values[bigger] < values[mask] {
                    return Err(Error::InvalidValuation(format!(
                        "table not monotone: v({}) < v({})",
                        ItemSet::from_bits(bigger as u32),
                        ItemSet::from_bits(mask as u32)
                    )));
                }
            }
        }
        if subadditive {
            for s in 1..values.len() {
                for t in 1..values.len() {
                    if values[s | t] > values[s] + values[t] {
                        return Err(Error::InvalidValuation(format!(
                            "table not subadditive on {} and {}",
                            ItemSet::from_bits(s as u32),
                            ItemSet::from_bits(t as u32)
                        )));
                    }
                }
            }
        }
        Ok(Valuation::Table {
            m,
            values,
            subadditive,
        })
    }

    pub fn constraint_homogeneous(m: usize, interest: ItemSet, per_unit: Rational) -> Result<Self> {
        check_item_count(m)?;
        interest.check_fits(m)?;
        check_nonnegative(&[per_unit], "per-unit value")?;
        Ok(Valuation::ConstraintHomogeneous {
            m,
            interest,
            per_unit,
        })
    }

    /// `f` has `m + 1` entries `f(0)..f(m)`.
    pub fn concave_symmetric(f: Vec<Rational>) -> Result<Self> {
        if f.is_empty() {
            return Err(Error::InvalidValuation("concave function needs f(0)".into()));
        }
        check_item_count(f.len() - 1)?;
        if !f[0].is_zero() {
            return Err(Error::InvalidValuation("f(0) must be 0".into()));
        }
        for k in 1..f.len() {
            if f[k] < f[k - 1] {
                return Err(Error::InvalidValuation(format!("f decreases at {k}")));
            }
            if k >= 2 && f[k] - f[k - 1] > f[k - 1] - f[k - 2] {
                return Err(Error::InvalidValuation(format!("f not concave at {k}")));
            }
        }
        Ok(Valuation::ConcaveSymmetric { f })
    }

    /// The all-zero valuation over `m` items.
    pub fn zero(m: usize) -> Self {
        Valuation::Additive {
            values: vec![Rational::zero(); m],
        }
    }

    /// Number of items the valuation is defined over.
    pub fn m(&self) -> usize {
        match self {
            Valuation::UnitDemand { values } | Valuation::Additive { values } => values.len(),
            Valuation::Xos { clauses } => clauses[0].len(),
            Valuation::Table { m, .. } | Valuation::ConstraintHomogeneous { m, .. } => *m,
            Valuation::ConcaveSymmetric { f } => f.len() - 1,
        }
    }

    pub fn class_name(&self) -> &'static str {
        match self {
            Valuation::UnitDemand { .. } => "unit_demand",
            Valuation::Additive { .. } => "additive",
            Valuation::Xos { .. } => "xos",
            Valuation::Table { .. } => "table",
            Valuation::ConstraintHomogeneous { .. } => "constraint_homogeneous",
            Valuation::ConcaveSymmetric { .. } => "concave_symmetric",
        }
    }

    /// `v(T)`.
    pub fn value(&self, set: ItemSet) -> Result<Rational> {
        set.check_fits(self.m())?;
        Ok(self.value_unchecked(set))
    }

    pub(crate) fn value_unchecked(&self, set: ItemSet) -> Rational {
        match self {
            Valuation::UnitDemand { values } => set
                .iter()
                .map(|j| values[j])
                .max()
                .unwrap_or_else(Rational::zero),
            Valuation::Additive { values } => set.iter().map(|j| values[j]).sum(),
            Valuation::Xos { clauses } => clauses
                .iter()
                .map(|c| set.iter().map(|j| c[j]).sum::<Rational>())
                .max()
                .unwrap_or_else(Rational::zero),
            Valuation::Table { values, .. } => values[set.bits() as usize],
            Valuation::ConstraintHomogeneous {
                interest, per_unit, ..
            } => *per_unit * int(set.intersection(*interest).len() as i128),
            Valuation::ConcaveSymmetric { f } => f[set.len()],
        }
    }

    /// Value of each single item.
    pub fn item_values(&self) -> Vec<Rational> {
        (0..self.m())
            .map(|j| self.value_unchecked(ItemSet::singleton(j)))
            .collect()
    }

    /// Items ordered by decreasing single-item value, index order on ties.
    pub fn preference_order(&self) -> Vec<usize> {
        let values = self.item_values();
        let mut order: Vec<usize> = (0..self.m()).collect();
        order.sort_by(|&a, &b| values[b].cmp(&values[a]).then(a.cmp(&b)));
        order
    }

    /// Largest per-item average value over nonempty bundles.
    pub fn max_average_value(&self) -> Rational {
        ItemSet::full(self.m())
            .subsets()
            .filter(|s| !s.is_empty())
            .map(|s| self.value_unchecked(s) / int(s.len() as i128))
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Exhaustive check of `v(∅) = 0` and monotonicity over all subsets.
    pub fn check_monotone(&self) -> Result<()> {
        let m = self.m();
        if m > MAX_TABLE_ITEMS {
            return Err(Error::CapExceeded {
                needed: 1u128 << m,
                cap: 1u128 << MAX_TABLE_ITEMS,
            });
        }
        if !self.value_unchecked(ItemSet::EMPTY).is_zero() {
            return Err(Error::InvalidValuation("v(∅) != 0".into()));
        }
        for t in ItemSet::full(m).subsets() {
            let vt = self.value_unchecked(t);
            for j in ItemSet::full(m).difference(t).iter() {
                let mut bigger = t;
                bigger.insert(j);
                if self.value_unchecked(bigger) < vt {
                    return Err(Error::InvalidValuation(format!("not monotone at {t} + {j}")));
                }
            }
        }
        Ok(())
    }
}

/// One bundle per bidder.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Allocation {
    pub bundles: Vec<ItemSet>,
}

impl Allocation {
    pub fn new(bundles: Vec<ItemSet>, m: usize) -> Result<Self> {
        let mut seen = ItemSet::EMPTY;
        for b in &bundles {
            b.check_fits(m)?;
            if !b.is_disjoint(seen) {
                return Err(Error::Precondition(format!("bundle {b} overlaps another bundle")));
            }
            seen = seen.union(*b);
        }
        Ok(Allocation { bundles })
    }

    pub fn empty(n: usize) -> Self {
        Allocation {
            bundles: vec![ItemSet::EMPTY; n],
        }
    }

    pub fn allocated(&self) -> ItemSet {
        self.bundles
            .iter()
            .fold(ItemSet::EMPTY, |acc, b| acc.union(*b))
    }

    pub fn welfare(&self, profile: &[Valuation]) -> Result<Rational> {
        if profile.len() != self.bundles.len() {
            return Err(Error::DimensionMismatch(profile.len(), self.bundles.len()));
        }
        profile
            .iter()
            .zip(&self.bundles)
            .map(|(v, b)| v.value(*b))
            .sum()
    }
}

/// Common item count of a profile.
pub fn profile_items(profile: &[Valuation]) -> Result<usize> {
    let first = profile
        .first()
        .ok_or_else(|| Error::Precondition("empty valuation profile".into()))?;
    let m = first.m();
    for v in profile {
        if v.m() != m {
            return Err(Error::DimensionMismatch(m, v.m()));
        }
    }
    Ok(m)
}

/// Welfare-maximizing allocation, with unsold items allowed.
///
/// Exhaustive dynamic program over (bidder, remaining items): every
/// assignment of items to bidders or to nobody is covered. Ties go to the
/// first maximizer in submask order, so the result is deterministic.
pub fn optimal_welfare(profile: &[Valuation], cap: u128) -> Result<(Allocation, Rational)> {
    let m = profile_items(profile)?;
    let n = profile.len();
    let needed = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    if m > MAX_TABLE_ITEMS {
        return Err(Error::CapExceeded {
            needed: 1u128 << m,
            cap: 1u128 << MAX_TABLE_ITEMS,
        });
    }
    let size = 1usize << m;
    let values: Vec<Vec<Rational>> = profile
        .iter()
        .map(|v| {
            (0..size)
                .map(|mask| v.value_unchecked(ItemSet::from_bits(mask as u32)))
                .collect()
        })
        .collect();

    // best[i][mask]: max welfare of bidders i.. using only items in mask
    let mut best = vec![vec![Rational::zero(); size]; n + 1];
    let mut choice = vec![vec![0u32; size]; n];
    for i in (0..n).rev() {
        for mask in 0..size {
            let full = ItemSet::from_bits(mask as u32);
            let mut top: Option<Rational> = None;
            let mut arg = 0u32;
            for sub in full.subsets() {
                let rest = full.difference(sub);
                let w = values[i][sub.bits() as usize] + best[i + 1][rest.bits() as usize];
                if top.map_or(true, |t| w > t) {
                    top = Some(w);
                    arg = sub.bits();
                }
            }
            best[i][mask] = top.unwrap_or_else(Rational::zero);
            choice[i][mask] = arg;
        }
    }

    let mut bundles = Vec::with_capacity(n);
    let mut mask = size - 1;
    for row in &choice {
        let sub = row[mask];
        bundles.push(ItemSet::from_bits(sub));
        mask &= !(sub as usize);
    }
    Ok((Allocation { bundles }, best[0][size - 1]))
}
