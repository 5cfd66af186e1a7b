//! Pointwise approximation of a valuation by a simpler class.
//!
//! `v'` approximates `v` at `S` with factor `beta` when `v' <= v` on every
//! bundle and `beta * v'(S) >= v(S)`.

use num_traits::{One, Zero};

use super::lp::maximize_packing;
use super::Valuation;
use crate::error::{Error, Result};
use crate::items::ItemSet;
use crate::rational::{bucketing_beta, fmt_rational, halving_index, harmonic, int, Rational};

/// `check_pointwise_approx` enumerates all `2^m` bundles; `m` is capped at 20.
pub const APPROX_SUBSET_CAP: u128 = 1 << 20;

/// Largest target set accepted by [`approx_subadditive`].
pub const SUBADDITIVE_LP_ITEMS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproxResult {
    pub approx: Valuation,
    pub beta: Rational,
    pub target_set: ItemSet,
}

pub fn check_pointwise_approx(v: &Valuation, v_prime: &Valuation, set: ItemSet, beta: Rational) -> Result<bool> {
    let m = v.m();
    if v_prime.m() != m {
        return Err(Error::DimensionMismatch(m, v_prime.m()));
    }
    set.check_fits(m)?;
    let needed = 1u128 << m;
    if needed > APPROX_SUBSET_CAP {
        return Err(Error::CapExceeded {
            needed,
            cap: APPROX_SUBSET_CAP,
        });
    }
    if beta * v_prime.value_unchecked(set) < v.value_unchecked(set) {
        return Ok(false);
    }
    Ok(ItemSet::full(m)
        .subsets()
        .all(|t| v_prime.value_unchecked(t) <= v.value_unchecked(t)))
}

fn require_nonempty(set: ItemSet, m: usize) -> Result<()> {
    set.check_fits(m)?;
    if set.is_empty() {
        return Err(Error::Precondition("approximation target set is empty".into()));
    }
    Ok(())
}

pub fn approx_concave_symmetric(v: &Valuation, set: ItemSet) -> Result<ApproxResult> {
    let Valuation::ConcaveSymmetric { f } = v else {
        return Err(Error::Precondition(format!("expected concave_symmetric, got {}", v.class_name())));
    };
    let m = v.m();
    require_nonempty(set, m)?;
    let k = set.len();
    let approx = Valuation::constraint_homogeneous(m, set, f[k] / int(k as i128))?;
    Ok(ApproxResult {
        approx,
        beta: Rational::one(),
        target_set: set,
    })
}

/// Bucketing construction: the positive items of `S` are grouped by halving
/// thresholds below the top value, items under `v_1/(k-1)` form a tail, and
/// the heaviest non-tail bucket becomes the interest set.
pub fn approx_additive(v: &Valuation, set: ItemSet) -> Result<ApproxResult> {
    let Valuation::Additive { values } = v else {
        return Err(Error::Precondition(format!("expected additive, got {}", v.class_name())));
    };
    let m = v.m();
    require_nonempty(set, m)?;

    let positive: Vec<usize> = set.iter().filter(|&j| values[j] > Rational::zero()).collect();
    let k = positive.len();
    if k == 0 {
        return Ok(ApproxResult {
            approx: Valuation::constraint_homogeneous(m, ItemSet::EMPTY, Rational::zero())?,
            beta: Rational::one(),
            target_set: set,
        });
    }
    let top = positive.iter().map(|&j| values[j]).max().unwrap_or_default();
    if k == 1 {
        return Ok(ApproxResult {
            approx: Valuation::constraint_homogeneous(m, ItemSet::singleton(positive[0]), top)?,
            beta: Rational::one(),
            target_set: set,
        });
    }

    let tail_threshold = top / int(k as i128 - 1);
    let mut tail = ItemSet::EMPTY;
    let mut buckets: Vec<ItemSet> = Vec::new();
    for &j in &positive {
        if values[j] < tail_threshold {
            tail.insert(j);
            continue;
        }
        let t = halving_index(&values[j], &top) as usize;
        if buckets.len() < t {
            buckets.resize(t, ItemSet::EMPTY);
        }
        buckets[t - 1].insert(j);
    }

    let weight = |bucket: ItemSet| bucket.iter().map(|j| values[j]).sum::<Rational>();
    let first_weight = weight(buckets[0]);
    if !(weight(tail) < top && top <= first_weight) {
        return Err(Error::GuaranteeViolated(format!(
            "bucketing tail {} not below top value {} <= {}",
            fmt_rational(&weight(tail)),
            fmt_rational(&top),
            fmt_rational(&first_weight)
        )));
    }

    let mut best = 0;
    for (t, bucket) in buckets.iter().enumerate() {
        if weight(*bucket) > weight(buckets[best]) {
            best = t;
        }
    }
    let chosen = buckets[best];
    let per_unit = chosen.iter().map(|j| values[j]).min().unwrap_or_default();
    Ok(ApproxResult {
        approx: Valuation::constraint_homogeneous(m, chosen, per_unit)?,
        beta: bucketing_beta(k),
        target_set: set,
    })
}

/// The clause attaining `v(S)`, zeroed outside `S`.
pub fn approx_xos(v: &Valuation, set: ItemSet) -> Result<ApproxResult> {
    let Valuation::Xos { clauses } = v else {
        return Err(Error::Precondition(format!("expected xos, got {}", v.class_name())));
    };
    let m = v.m();
    set.check_fits(m)?;
    let clause_value = |c: &Vec<Rational>| set.iter().map(|j| c[j]).sum::<Rational>();
    let mut best = &clauses[0];
    for c in clauses {
        if clause_value(c) > clause_value(best) {
            best = c;
        }
    }
    let restricted = (0..m)
        .map(|j| if set.contains(j) { best[j] } else { Rational::zero() })
        .collect();
    Ok(ApproxResult {
        approx: Valuation::additive(restricted)?,
        beta: Rational::one(),
        target_set: set,
    })
}

/// Largest additive valuation below `v` on subsets of `S`, found by exact LP.
/// The `H_|S|` guarantee is checked on the result, not assumed.
pub fn approx_subadditive(v: &Valuation, set: ItemSet) -> Result<ApproxResult> {
    let Valuation::Table { subadditive: true, .. } = v else {
        return Err(Error::Precondition(format!(
            "expected subadditive table, got {}",
            v.class_name()
        )));
    };
    let m = v.m();
    require_nonempty(set, m)?;
    if set.len() > SUBADDITIVE_LP_ITEMS {
        return Err(Error::CapExceeded {
            needed: 1u128 << set.len(),
            cap: 1u128 << SUBADDITIVE_LP_ITEMS,
        });
    }

    let members: Vec<usize> = set.iter().collect();
    let k = members.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for t in set.subsets().filter(|t| !t.is_empty()) {
        rows.push(members.iter().map(|&j| if t.contains(j) { int(1) } else { int(0) }).collect());
        rhs.push(v.value_unchecked(t));
    }
    let solution = maximize_packing(&vec![int(1); k], &rows, &rhs)?;

    let mut weights = vec![Rational::zero(); m];
    for (slot, &j) in members.iter().enumerate() {
        weights[j] = solution.x[slot];
    }
    let approx = Valuation::additive(weights)?;
    let beta = harmonic(k);
    if !check_pointwise_approx(v, &approx, set, beta)? {
        return Err(Error::GuaranteeViolated(format!(
            "additive approximation at {set} misses the H_{k} bound: sum {} vs v(S) {}",
            fmt_rational(&solution.objective),
            fmt_rational(&v.value_unchecked(set))
        )));
    }
    Ok(ApproxResult {
        approx,
        beta,
        target_set: set,
    })
}
