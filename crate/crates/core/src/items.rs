use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest item count supported by the bitmask representation.
pub const MAX_ITEMS: usize = 30;

/// A set of item indices, stored as a bitmask (bit `j` = item `j`).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ItemSet(u32);

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    pub fn from_bits(bits: u32) -> Self {
        ItemSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// All items `0..m`.
    pub fn full(m: usize) -> Self {
        assert!(m <= MAX_ITEMS, "too many items: {m}");
        if m == 0 {
            ItemSet(0)
        } else {
            ItemSet(u32::MAX >> (32 - m))
        }
    }

    pub fn singleton(item: usize) -> Self {
        assert!(item < MAX_ITEMS);
        ItemSet(1 << item)
    }

    /// Builds a set from indices, rejecting indices `>= m` and duplicates.
    pub fn from_items(items: &[usize], m: usize) -> Result<Self> {
        let mut bits = 0u32;
        for &item in items {
            if item >= m || item >= MAX_ITEMS {
                return Err(Error::ItemOutOfRange { item, m });
            }
            if bits & (1 << item) != 0 {
                return Err(Error::Precondition(format!("duplicate item {item} in set")));
            }
            bits |= 1 << item;
        }
        Ok(ItemSet(bits))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, item: usize) -> bool {
        item < MAX_ITEMS && self.0 & (1 << item) != 0
    }

    pub fn insert(&mut self, item: usize) {
        self.0 |= 1 << item;
    }

    pub fn remove(&mut self, item: usize) {
        self.0 &= !(1 << item);
    }

    pub fn union(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 & other.0)
    }

    pub fn difference(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: ItemSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: ItemSet) -> bool {
        self.0 & other.0 == 0
    }

    /// True if every member is `< m`.
    pub fn fits(self, m: usize) -> bool {
        self.is_subset(ItemSet::full(m))
    }

    pub fn check_fits(self, m: usize) -> Result<()> {
        match self.iter().find(|&j| j >= m) {
            Some(item) => Err(Error::ItemOutOfRange { item, m }),
            None => Ok(()),
        }
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(j)
            }
        })
    }

    /// The `count` smallest members.
    pub fn lowest(self, count: usize) -> ItemSet {
        let mut out = ItemSet::EMPTY;
        for j in self.iter().take(count) {
            out.insert(j);
        }
        out
    }

    /// Every subset of `self`, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = ItemSet> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full {
                None
            } else {
                Some((cur.wrapping_sub(full)) & full)
            };
            Some(ItemSet(cur))
        })
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<usize> for ItemSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = ItemSet::EMPTY;
        for j in iter {
            s.insert(j);
        }
        s
    }
}

/// Parses `{0,2}` or a bare comma list `0,2`.
impl FromStr for ItemSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('{').trim_end_matches('}').trim();
        let mut set = ItemSet::EMPTY;
        if body.is_empty() {
            return Ok(set);
        }
        for part in body.split(',') {
            let j: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid item `{part}` in `{s}`")))?;
            if j >= MAX_ITEMS {
                return Err(Error::ItemOutOfRange { item: j, m: MAX_ITEMS });
            }
            set.insert(j);
        }
        Ok(set)
    }
}
