//! Exact simplex for packing programs `max c·x  s.t.  A x <= b, x >= 0`
//! with `b >= 0`, so the origin is a feasible starting basis.
//!
//! Pivoting runs in arbitrary-precision rationals (degenerate pivots on the
//! subset constraints inflate denominators fast) and uses Bland's rule,
//! which rules out cycling.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackingSolution {
    pub x: Vec<Rational>,
    pub objective: Rational,
    pub pivots: usize,
}

fn big(r: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn small(r: &BigRational) -> Result<Rational> {
    match (r.numer().to_i128(), r.denom().to_i128()) {
        (Some(p), Some(q)) => Ok(Rational::new(p, q)),
        _ => Err(Error::Lp(format!("solution component {r} exceeds 128-bit range"))),
    }
}

pub fn maximize_packing(c: &[Rational], a: &[Vec<Rational>], b: &[Rational]) -> Result<PackingSolution> {
    let n = c.len();
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    if let Some(row) = a.iter().find(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(n, row.len()));
    }
    if b.iter().any(|v| v.is_negative()) {
        return Err(Error::Lp("right-hand side must be nonnegative".into()));
    }

    // basic[r] = rhs[r] - sum_j coef[r][j] * nonbasic[j];  z = z0 + sum_j obj[j] * nonbasic[j]
    let rows = a.len();
    let mut basic: Vec<usize> = (n..n + rows).collect();
    let mut nonbasic: Vec<usize> = (0..n).collect();
    let mut coef: Vec<Vec<BigRational>> = a.iter().map(|row| row.iter().map(big).collect()).collect();
    let mut rhs: Vec<BigRational> = b.iter().map(big).collect();
    let mut obj: Vec<BigRational> = c.iter().map(big).collect();
    let mut z0 = BigRational::zero();
    let mut pivots = 0usize;

    loop {
        let entering = (0..n)
            .filter(|&j| obj[j].is_positive())
            .min_by_key(|&j| nonbasic[j]);
        let Some(e) = entering else { break };

        let mut leaving: Option<(usize, BigRational)> = None;
        for r in 0..rows {
            if !coef[r][e].is_positive() {
                continue;
            }
            let bound = &rhs[r] / &coef[r][e];
            let better = match &leaving {
                None => true,
                Some((l, best)) => bound < *best || (bound == *best && basic[r] < basic[*l]),
            };
            if better {
                leaving = Some((r, bound));
            }
        }
        let Some((l, _)) = leaving else {
            return Err(Error::Lp("objective is unbounded".into()));
        };

        let pivot = coef[l][e].clone();
        rhs[l] = &rhs[l] / &pivot;
        for j in 0..n {
            coef[l][j] = if j == e {
                BigRational::from_integer(1.into()) / &pivot
            } else {
                &coef[l][j] / &pivot
            };
        }
        let pivot_row = coef[l].clone();
        let pivot_rhs = rhs[l].clone();
        for r in 0..rows {
            if r == l || coef[r][e].is_zero() {
                continue;
            }
            let factor = coef[r][e].clone();
            rhs[r] -= &factor * &pivot_rhs;
            for j in 0..n {
                coef[r][j] = if j == e {
                    -(&factor * &pivot_row[j])
                } else {
                    &coef[r][j] - &factor * &pivot_row[j]
                };
            }
        }
        let factor = obj[e].clone();
        z0 += &factor * &pivot_rhs;
        for j in 0..n {
            obj[j] = if j == e {
                -(&factor * &pivot_row[j])
            } else {
                &obj[j] - &factor * &pivot_row[j]
            };
        }
        std::mem::swap(&mut basic[l], &mut nonbasic[e]);
        pivots += 1;
    }

    let mut x = vec![Rational::zero(); n];
    for (r, &label) in basic.iter().enumerate() {
        if label < n {
            x[label] = small(&rhs[r])?;
        }
    }
    Ok(PackingSolution {
        x,
        objective: small(&z0)?,
        pivots,
    })
}
