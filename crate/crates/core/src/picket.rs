//! Picket-fence numbers `(4^k - 1)/3` (binary `10101...1`) and the exit
//! census of the original map.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factor::{small_factorization, Factorization};
use crate::num::Num;
use crate::program::{p1, Program};
use crate::shard::{map_shards, StartSet};
use crate::trajectory::{positive, walk, Caps, WalkEnd};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PicketFenceNumber {
    pub k: u32,
    #[serde(with = "crate::decimal")]
    pub value: BigUint,
    pub binary: String,
    pub divisible_by_3: bool,
    #[serde(serialize_with = "factor_text")]
    pub small_factors: Factorization,
}

fn factor_text<S: serde::Serializer>(f: &Factorization, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(f)
}

impl PicketFenceNumber {
    pub fn new(k: u32) -> Result<PicketFenceNumber> {
        let value = picket_fence_value(k)?;
        Ok(PicketFenceNumber {
            k,
            binary: value.to_str_radix(2),
            divisible_by_3: k.is_multiple_of(3),
            small_factors: small_factorization(&value),
            value,
        })
    }
}

pub fn picket_fence_value(k: u32) -> Result<BigUint> {
    if k < 1 {
        return Err(Error::InvalidRange("picket-fence index must be at least 1".into()));
    }
    Ok(((BigUint::one() << (2 * k as usize)) - 1u32) / 3u32)
}

pub fn is_picket_fence(n: &BigUint) -> bool {
    is_picket_num(&Num::from(n))
}

fn is_power_of_two_big(b: &BigUint) -> bool {
    b.bits() > 0 && b.trailing_zeros() == Some(b.bits() - 1)
}

pub(crate) fn is_picket_num(n: &Num) -> bool {
    if n.is_even() {
        return false;
    }
    match n {
        Num::Small(v) => match v.checked_mul(3).and_then(|t| t.checked_add(1)) {
            Some(t) => t.is_power_of_two(),
            None => is_power_of_two_big(&(BigUint::from(*v) * 3u32 + 1u32)),
        },
        Num::Big(b) => is_power_of_two_big(&(b * 3u32 + 1u32)),
    }
}

/// Index `k` of a picket-fence value.
pub fn picket_index(v: &BigUint) -> Option<u32> {
    is_picket_fence(v).then(|| v.bits().div_ceil(2) as u32)
}

fn exit_num(program: &Program, n0: Num, caps: Caps) -> Result<Num> {
    match walk(program, n0.clone(), caps, is_picket_num, |_, _| {}) {
        WalkEnd::Hit { value, .. } => Ok(value),
        _ => Err(Error::NotConverged(format!("no exit point found for {n0}"))),
    }
}

/// First picket-fence value on the orbit of `n0` under the original map,
/// `n0` included.
pub fn exit_point(n0: &BigUint) -> Result<BigUint> {
    positive(n0)?;
    exit_num(&p1(), Num::from(n0), Caps::default()).map(Num::into_big)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExitTally {
    pub count: u64,
    pub first_start: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExitCensus {
    pub starts: StartSet,
    pub exits: BTreeMap<BigUint, ExitTally>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CensusRow {
    #[serde(flatten)]
    pub number: PicketFenceNumber,
    pub first_to_exit: Option<u64>,
    pub exit_count: u64,
}

impl ExitCensus {
    pub fn total(&self) -> u64 {
        self.exits.values().map(|t| t.count).sum()
    }

    pub fn count(&self, v: u64) -> u64 {
        self.exits.get(&BigUint::from(v)).map_or(0, |t| t.count)
    }

    /// One row per index `k` up to the largest exit seen.
    pub fn rows(&self) -> Result<Vec<CensusRow>> {
        let top = self.exits.keys().filter_map(picket_index).max().unwrap_or(1);
        (1..=top)
            .map(|k| {
                let number = PicketFenceNumber::new(k)?;
                let tally = self.exits.get(&number.value);
                Ok(CensusRow {
                    first_to_exit: tally.map(|t| t.first_start),
                    exit_count: tally.map_or(0, |t| t.count),
                    number,
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::from("binary,decimal,factorization,first_to_exit,exit_count\n");
        for r in self.rows()? {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.number.binary,
                r.number.value,
                r.number.small_factors,
                r.first_to_exit.map(|v| v.to_string()).unwrap_or_default(),
                r.exit_count
            ));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc {
            starts: u64,
            total: u64,
            rows: Vec<CensusRow>,
        }
        let doc = Doc {
            starts: self.starts.count,
            total: self.total(),
            rows: self.rows()?,
        };
        Ok(serde_json::to_string_pretty(&doc).expect("census serializes"))
    }
}

/// Exit points of the first `count` odd integers `1, 3, 5, ...`.
pub fn exit_census(count: u64, shards: usize) -> Result<ExitCensus> {
    let starts = StartSet::new(1, 2, count)?;
    exit_census_over(&starts, shards)
}

pub fn exit_census_over(starts: &StartSet, shards: usize) -> Result<ExitCensus> {
    let program = p1();
    let parts = map_shards(starts, shards, |set| -> Result<BTreeMap<BigUint, ExitTally>> {
        let mut local: BTreeMap<BigUint, ExitTally> = BTreeMap::new();
        for n in set.iter() {
            let v = exit_num(&program, Num::from(n), Caps::default())?.into_big();
            local
                .entry(v)
                .and_modify(|t| t.count += 1)
                .or_insert(ExitTally { count: 1, first_start: n });
        }
        Ok(local)
    });
    let mut exits: BTreeMap<BigUint, ExitTally> = BTreeMap::new();
    // shards are in increasing start order, so the first tally seen wins
    for part in parts {
        for (v, t) in part? {
            exits
                .entry(v)
                .and_modify(|e| e.count += t.count)
                .or_insert(t);
        }
    }
    Ok(ExitCensus {
        starts: *starts,
        exits,
    })
}

/// Smallest `n0 <= bound` whose exit point is `v`.
pub fn first_to_exit(v: &BigUint, bound: u64) -> Result<u64> {
    if !is_picket_fence(v) {
        return Err(Error::InvalidRange(format!("{v} is not a picket-fence number")));
    }
    let program = p1();
    // ordered blocks keep early hits cheap
    const BLOCK: u64 = 1 << 16;
    let target = Num::from(v);
    let mut lo = 1u64;
    while lo <= bound {
        let hi = bound.min(lo.saturating_add(BLOCK * 16 - 1));
        let found = (lo..=hi)
            .into_par_iter()
            .find_first(|&n| {
                exit_num(&program, Num::from(n), Caps::default()).is_ok_and(|e| e == target)
            });
        if let Some(n) = found {
            return Ok(n);
        }
        lo = hi.saturating_add(1);
        if hi == u64::MAX {
            break;
        }
    }
    Err(Error::NotFound {
        bound: bound.to_string(),
    })
}
