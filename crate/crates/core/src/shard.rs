//! Finite arithmetic start sets and contiguous sharding.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `first, first + stride, ..., first + (count - 1) * stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartSet {
    pub first: u64,
    pub stride: u64,
    pub count: u64,
}

impl StartSet {
    pub fn new(first: u64, stride: u64, count: u64) -> Result<StartSet> {
        if first == 0 {
            return Err(Error::InvalidRange("starts must be positive".into()));
        }
        if stride == 0 {
            return Err(Error::InvalidRange("stride must be positive".into()));
        }
        let last = (count.max(1) - 1)
            .checked_mul(stride)
            .and_then(|d| d.checked_add(first));
        if last.is_none() {
            return Err(Error::InvalidRange("range overflows 64 bits".into()));
        }
        Ok(StartSet {
            first,
            stride,
            count,
        })
    }

    /// The odd integers in `[lo, hi]`.
    pub fn odd_range(lo: u64, hi: u64) -> Result<StartSet> {
        if lo == 0 || hi < lo {
            return Err(Error::InvalidRange(format!("{lo}:{hi}")));
        }
        let first = lo | 1;
        let count = if first > hi { 0 } else { (hi - first) / 2 + 1 };
        StartSet::new(first, 2, count)
    }

    /// The first `count` odd integers strictly greater than `above`.
    pub fn odd_above(above: u64, count: u64) -> Result<StartSet> {
        StartSet::new((above + 1) | 1, 2, count)
    }

    /// All integers in `[lo, hi]`.
    pub fn range(lo: u64, hi: u64) -> Result<StartSet> {
        if lo == 0 || hi < lo {
            return Err(Error::InvalidRange(format!("{lo}:{hi}")));
        }
        StartSet::new(lo, 1, hi - lo + 1)
    }

    pub fn get(&self, i: u64) -> u64 {
        self.first + i * self.stride
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.count).map(move |i| self.get(i))
    }

    pub fn last(&self) -> Option<u64> {
        (self.count > 0).then(|| self.get(self.count - 1))
    }

    /// Splits into at most `shards` contiguous, non-empty pieces in order.
    pub fn split(&self, shards: usize) -> Vec<StartSet> {
        let shards = (shards.max(1) as u64).min(self.count.max(1));
        let base = self.count / shards;
        let extra = self.count % shards;
        let mut out = Vec::with_capacity(shards as usize);
        let mut offset = 0;
        for s in 0..shards {
            let count = base + u64::from(s < extra);
            out.push(StartSet {
                first: self.get(offset),
                stride: self.stride,
                count,
            });
            offset += count;
        }
        out
    }
}

impl fmt::Display for StartSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.last() {
            None => write!(f, "empty"),
            Some(last) => write!(
                f,
                "{} integers from {} to {} step {}",
                self.count, self.first, last, self.stride
            ),
        }
    }
}

/// Runs `work` on each shard in parallel and returns results in shard order.
pub fn map_shards<T, F>(set: &StartSet, shards: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&StartSet) -> T + Sync,
{
    set.split(shards).par_iter().map(&work).collect()
}

pub fn default_shards() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn odd_sets() {
        let s = StartSet::odd_range(1, 10).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), [1, 3, 5, 7, 9]);
        let s = StartSet::odd_above(20_000, 3).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), [20_001, 20_003, 20_005]);
        assert!(StartSet::odd_range(0, 5).is_err());
        assert!(StartSet::odd_range(9, 5).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(first in 1u64..1000, stride in 1u64..5, count in 0u64..500, shards in 1usize..40) {
            let s = StartSet::new(first, stride, count).unwrap();
            let joined: Vec<u64> = s.split(shards).iter().flat_map(|p| p.iter().collect::<Vec<_>>()).collect();
            prop_assert_eq!(joined, s.iter().collect::<Vec<_>>());
        }
    }
}
