//! Seeded random valuations on a rational lattice `{0, 1/d, ..., max}`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::items::ItemSet;
use crate::rational::{ratio, Rational};
use crate::valuations::Valuation;

/// Value lattice: multiples of `1/denom` up to `max_units/denom`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub denom: i128,
    pub max_units: i128,
}

impl Lattice {
    pub const fn new(denom: i128, max_units: i128) -> Self {
        Lattice { denom, max_units }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Rational {
        ratio(rng.gen_range(0..=self.max_units), self.denom)
    }

    fn sample_positive<R: Rng + ?Sized>(&self, rng: &mut R) -> Rational {
        ratio(rng.gen_range(1..=self.max_units.max(1)), self.denom)
    }

    fn values<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> Vec<Rational> {
        (0..m).map(|_| self.sample(rng)).collect()
    }
}

pub fn unit_demand<R: Rng + ?Sized>(rng: &mut R, m: usize, lattice: Lattice) -> Result<Valuation> {
    Valuation::unit_demand(lattice.values(rng, m))
}

pub fn additive<R: Rng + ?Sized>(rng: &mut R, m: usize, lattice: Lattice) -> Result<Valuation> {
    Valuation::additive(lattice.values(rng, m))
}

/// Nonempty random interest set and a positive per-unit value.
pub fn constraint_homogeneous<R: Rng + ?Sized>(rng: &mut R, m: usize, lattice: Lattice) -> Result<Valuation> {
    let mut interest = ItemSet::EMPTY;
    while interest.is_empty() {
        interest = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
    }
    Valuation::constraint_homogeneous(m, interest, lattice.sample_positive(rng))
}

/// Concave `f` from nonincreasing random marginals.
pub fn concave_symmetric<R: Rng + ?Sized>(rng: &mut R, m: usize, lattice: Lattice) -> Result<Valuation> {
    let mut marginals = lattice.values(rng, m);
    marginals.sort_by(|a, b| b.cmp(a));
    let mut f = vec![Rational::from_integer(0)];
    for d in marginals {
        f.push(f[f.len() - 1] + d);
    }
    Valuation::concave_symmetric(f)
}

pub fn xos<R: Rng + ?Sized>(rng: &mut R, m: usize, clauses: usize, lattice: Lattice) -> Result<Valuation> {
    Valuation::xos((0..clauses.max(1)).map(|_| lattice.values(rng, m)).collect())
}

/// Subadditive table: the cheapest cover of each set by a random priced
/// family that contains every singleton. Cover costs are monotone and
/// subadditive, and generally not XOS.
pub fn subadditive_table<R: Rng + ?Sized>(rng: &mut R, m: usize, extra_sets: usize, lattice: Lattice) -> Result<Valuation> {
    let full = 1u32 << m;
    let mut family: Vec<(u32, Rational)> = (0..m).map(|j| (1u32 << j, lattice.sample(rng))).collect();
    let mut masks: Vec<u32> = (1..full).filter(|s| s.count_ones() >= 2).collect();
    masks.shuffle(rng);
    for &mask in masks.iter().take(extra_sets) {
        family.push((mask, lattice.sample(rng)));
    }
    let mut values = vec![Rational::from_integer(0); full as usize];
    for s in 1..full {
        // Cover the lowest item of `s` first; every optimal cover has a set doing that.
        let low = s & s.wrapping_neg();
        values[s as usize] = family
            .iter()
            .filter(|(t, _)| t & low != 0)
            .map(|(t, c)| *c + values[(s & !t) as usize])
            .min()
            .expect("singletons cover every item");
    }
    Valuation::table(m, values, true)
}
