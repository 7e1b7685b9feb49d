//! Sequence lengths over exponential families `c * b^k + d` and islands of
//! persistence in them.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{Pow, Signed};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nullmodel::{predict_length, LengthModel};
use crate::program::Program;
use crate::shard::{map_shards, StartSet};
use crate::trajectory::{merge_with_indices, resolve_length, Caps, StopPolicy};

pub const DEFAULT_MIN_RUN: usize = 5;
pub const DEFAULT_MAX_EXCEPTIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FamilySpec {
    pub base: u64,
    pub k_lo: u32,
    pub k_hi: u32,
    pub mult: u64,
    pub offset: i64,
    pub parity: Option<Parity>,
}

impl FamilySpec {
    pub fn new(base: u64, k_lo: u32, k_hi: u32, mult: u64, offset: i64) -> Result<FamilySpec> {
        let spec = FamilySpec {
            base,
            k_lo,
            k_hi,
            mult,
            offset,
            parity: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `b^k` for `k` in `lo..=hi`.
    pub fn powers(base: u64, k_lo: u32, k_hi: u32) -> Result<FamilySpec> {
        FamilySpec::new(base, k_lo, k_hi, 1, 0)
    }

    pub fn with_parity(mut self, parity: Parity) -> FamilySpec {
        self.parity = Some(parity);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.base < 2 {
            return Err(Error::InvalidRange("base must be at least 2".into()));
        }
        if self.mult < 1 {
            return Err(Error::InvalidRange("multiplier must be at least 1".into()));
        }
        if self.k_hi < self.k_lo {
            return Err(Error::InvalidRange(format!("exponent range {}:{}", self.k_lo, self.k_hi)));
        }
        // the smallest member sits at k_lo
        self.member(self.k_lo).map(|_| ())
    }

    pub fn member(&self, k: u32) -> Result<BigUint> {
        let v = BigInt::from(self.mult) * BigInt::from(self.base).pow(k) + self.offset;
        match v.sign() {
            Sign::Plus => Ok(v.abs().to_biguint().expect("positive")),
            _ => Err(Error::InvalidRange(format!(
                "{}*{}^{k}{:+} is not positive",
                self.mult, self.base, self.offset
            ))),
        }
    }

    pub fn exponents(&self) -> std::ops::RangeInclusive<u32> {
        self.k_lo..=self.k_hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FamilyPoint {
    pub k: u32,
    pub n0_digits: usize,
    /// `None` when the member hit a cap.
    pub length: Option<u64>,
    #[serde(with = "crate::decimal::option")]
    pub loop_min: Option<BigUint>,
}

impl FamilyPoint {
    /// Sequence terms including `n0`, one more than the step count.
    pub fn terms(&self) -> Option<u64> {
        self.length.map(|l| l + 1)
    }
}

/// Lengths of every member in `k` order; members filtered out by parity are
/// skipped.
pub fn family_lengths(
    program: &Program,
    spec: &FamilySpec,
    policy: &StopPolicy,
    shards: usize,
) -> Result<Vec<FamilyPoint>> {
    spec.validate()?;
    let ks = StartSet::range(u64::from(spec.k_lo) + 1, u64::from(spec.k_hi) + 1)?;
    let parts = map_shards(&ks, shards, |set| -> Result<Vec<FamilyPoint>> {
        let mut out = Vec::new();
        for shifted in set.iter() {
            let k = (shifted - 1) as u32;
            let n0 = spec.member(k)?;
            let odd = n0.bit(0);
            match spec.parity {
                Some(Parity::Odd) if !odd => continue,
                Some(Parity::Even) if odd => continue,
                _ => {}
            }
            let (length, loop_min) = match resolve_length(program, &n0, policy) {
                Ok((l, m)) => (Some(l), Some(m)),
                Err(Error::NotConverged(_)) => (None, None),
                Err(e) => return Err(e),
            };
            out.push(FamilyPoint {
                k,
                n0_digits: n0.to_string().len(),
                length,
                loop_min,
            });
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

pub fn family_csv(spec: &FamilySpec, points: &[FamilyPoint]) -> Result<String> {
    let mut out = String::from("k,n0_digits,length,model_low,model_mid,model_high\n");
    for p in points {
        let n0 = spec.member(p.k)?;
        out.push_str(&format!(
            "{},{},{},{:.3},{:.3},{:.3}\n",
            p.k,
            p.n0_digits,
            p.length.map(|l| l.to_string()).unwrap_or_default(),
            predict_length(LengthModel::Low, &n0)?,
            predict_length(LengthModel::Mid, &n0)?,
            predict_length(LengthModel::High, &n0)?,
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Island {
    pub k_start: u32,
    pub k_end: u32,
    pub common_length: u64,
    /// Members inside the island whose length differs; `None` is capped.
    pub exceptions: Vec<(u32, Option<u64>)>,
}

impl Island {
    pub fn span(&self) -> usize {
        (self.k_end - self.k_start + 1) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IslandReport {
    pub min_run: usize,
    pub max_exceptions: usize,
    pub islands: Vec<Island>,
}

/// Greedy scan over points sorted by `k`. An island starts at a resolved
/// length, absorbs up to `max_exceptions` deviating members, and ends on
/// the furthest member with the common length where that length still
/// outnumbers the exceptions. It is kept when it spans at least `min_run`
/// points.
pub fn find_islands(points: &[(u32, Option<u64>)], min_run: usize, max_exceptions: usize) -> IslandReport {
    let mut islands = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let Some(common) = points[i].1 else {
            i += 1;
            continue;
        };
        // furthest common member at which the common length still
        // outnumbers the exceptions so far
        let mut last_common = i;
        let (mut modal, mut exceptions) = (1, 0);
        let mut j = i + 1;
        while j < points.len() {
            if points[j].1 == Some(common) {
                modal += 1;
                if modal > exceptions {
                    last_common = j;
                }
            } else {
                exceptions += 1;
                if exceptions > max_exceptions {
                    break;
                }
            }
            j += 1;
        }
        let members = &points[i..=last_common];
        let excepted: Vec<(u32, Option<u64>)> = members
            .iter()
            .filter(|(_, l)| *l != Some(common))
            .copied()
            .collect();
        if members.len() >= min_run.max(2) {
            islands.push(Island {
                k_start: points[i].0,
                k_end: points[last_common].0,
                common_length: common,
                exceptions: excepted,
            });
            i = last_common + 1;
        } else {
            i += 1;
        }
    }
    IslandReport {
        min_run,
        max_exceptions,
        islands,
    }
}

pub fn island_input(points: &[FamilyPoint]) -> Vec<(u32, Option<u64>)> {
    points.iter().map(|p| (p.k, p.length)).collect()
}

/// Most frequent resolved length, smallest on ties.
pub fn modal_length(points: &[(u32, Option<u64>)]) -> Option<u64> {
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for l in points.iter().filter_map(|p| p.1) {
        *counts.entry(l).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommonBranch {
    #[serde(with = "crate::decimal")]
    pub merge: BigUint,
    /// Steps from each start to the merge value.
    pub prefix_a: u64,
    pub prefix_b: u64,
    /// Length from the merge value to its loop minimum.
    pub shared_tail: u64,
    pub length_a: u64,
    pub length_b: u64,
    pub lengths_equal: bool,
}

pub fn verify_common_branch(program: &Program, a: &BigUint, b: &BigUint, policy: &StopPolicy) -> Result<CommonBranch> {
    let caps: Caps = policy.caps;
    let (merge, prefix_a, prefix_b) = merge_with_indices(program, a, b, caps)?.ok_or_else(|| Error::NotFound {
        bound: format!("orbits of {a} and {b} end in different loops"),
    })?;
    let (length_a, _) = resolve_length(program, a, policy)?;
    let (length_b, _) = resolve_length(program, b, policy)?;
    let (shared_tail, _) = resolve_length(program, &merge, policy)?;
    Ok(CommonBranch {
        merge,
        prefix_a,
        prefix_b,
        shared_tail,
        length_a,
        length_b,
        lengths_equal: length_a == length_b,
    })
}
