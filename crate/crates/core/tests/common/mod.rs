#![allow(dead_code)]

use auctionlab_core::engine::{MechanismConfig, MechanismKind};
use auctionlab_core::equilibrium::GameInstance;
use auctionlab_core::rational::{int, ratio};
use auctionlab_core::strategies::{generate_plan_space, uniform_grid, PlanFamily};
use auctionlab_core::{ItemSet, Rational, Valuation};

pub fn ints(xs: &[i128]) -> Vec<Rational> {
    xs.iter().map(|&x| int(x)).collect()
}

pub fn unit_rows(rows: &[&[i128]]) -> Vec<Valuation> {
    rows.iter().map(|r| Valuation::unit_demand(ints(r)).unwrap()).collect()
}

/// Three bidders, three items; optimum 209 on the diagonal.
pub fn lower_matrix() -> Vec<Valuation> {
    unit_rows(&[&[32, 31, 83], &[9, 84, 97], &[2, 42, 93]])
}

/// Four bidders a..d over items A, B, C.
pub fn intro_valuations(eps: Rational) -> Vec<Valuation> {
    let (one, zero) = (int(1), int(0));
    vec![
        Valuation::unit_demand(vec![eps, zero, zero]).unwrap(),
        Valuation::unit_demand(vec![one, one, zero]).unwrap(),
        Valuation::unit_demand(vec![zero, one, one]).unwrap(),
        Valuation::unit_demand(vec![zero, zero, one - eps]).unwrap(),
    ]
}

/// Shared item ranking; the only subgame-perfect outcome misses the optimum.
pub fn stability_valuations() -> Vec<Valuation> {
    let rows: [[i128; 4]; 4] = [[20, 16, 16, 0], [24, 22, 9, 0], [20, 19, 18, 3], [19, 18, 5, 2]];
    rows.iter()
        .map(|r| Valuation::unit_demand(r.iter().map(|&x| ratio(x, 20)).collect()).unwrap())
        .collect()
}

pub fn non_unique_valuations() -> Vec<Valuation> {
    unit_rows(&[&[1, 0], &[2, 2], &[2, 2]])
}

pub fn draft_instance(valuations: Vec<Valuation>, kind: MechanismKind, step: Rational, points: usize, families: &[PlanFamily]) -> GameInstance {
    let n = valuations.len();
    let m = valuations[0].m();
    let config = MechanismConfig::with_default_ties(kind, n, m).unwrap();
    let grid = uniform_grid(step, step * int(points as i128 - 1), false).unwrap();
    let spaces = valuations
        .iter()
        .map(|v| generate_plan_space(v, &grid, families, false))
        .collect();
    GameInstance::new(config, valuations, spaces).unwrap()
}

/// Best assignment by trying every bidder order, each bidder taking one
/// remaining item or nothing. Unit-demand only.
pub fn matching_oracle(rows: &[Vec<Rational>]) -> Rational {
    fn go(rows: &[Vec<Rational>], bidder: usize, used: ItemSet) -> Rational {
        if bidder == rows.len() {
            return int(0);
        }
        let mut best = go(rows, bidder + 1, used);
        for (j, &v) in rows[bidder].iter().enumerate() {
            if !used.contains(j) {
                let mut next = used;
                next.insert(j);
                best = best.max(v + go(rows, bidder + 1, next));
            }
        }
        best
    }
    go(rows, 0, ItemSet::EMPTY)
}
