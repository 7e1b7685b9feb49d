//! Loop discovery, exit basins and the interestingness measurements.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Num, NumMap, NumSet};
use crate::program::Program;
use crate::shard::{map_shards, StartSet};
use crate::trajectory::{cycle_members, iterate, walk, Caps, Outcome, StopPolicy, WalkEnd};

/// A cycle of the map, rotated so its minimum comes first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Loop {
    #[serde(with = "crate::decimal::vec")]
    pub members: Vec<BigUint>,
    #[serde(with = "crate::decimal")]
    pub min: BigUint,
    #[serde(with = "crate::decimal")]
    pub max: BigUint,
    pub length: u64,
}

impl Loop {
    /// Rotates a cycle listed in orbit order. The caller guarantees it is one.
    pub(crate) fn from_members_unchecked(mut members: Vec<BigUint>) -> Loop {
        let (pos, _) = members
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .expect("cycle is non-empty");
        members.rotate_left(pos);
        let max = members.iter().max().cloned().expect("cycle is non-empty");
        Loop {
            min: members[0].clone(),
            max,
            length: members.len() as u64,
            members,
        }
    }

    /// Stepping `length` times from the minimum visits the members in order
    /// and returns to the minimum.
    pub fn verify(&self, program: &Program) -> bool {
        if self.members.is_empty() || self.members[0] != self.min {
            return false;
        }
        let mut v = Num::from(&self.min);
        for i in 0..self.members.len() {
            if v.to_big() != self.members[i] {
                return false;
            }
            program.step_in_place(&mut v);
        }
        v.to_big() == self.min
    }

    pub(crate) fn member_set(&self) -> NumSet {
        self.members.iter().map(Num::from).collect()
    }
}

pub fn canonicalize_loop(program: &Program, raw: &[BigUint]) -> Result<Loop> {
    if raw.is_empty() {
        return Err(Error::NotACycle("empty".into()));
    }
    let distinct: BTreeSet<&BigUint> = raw.iter().collect();
    if distinct.len() != raw.len() {
        return Err(Error::NotACycle("values repeat".into()));
    }
    for (i, v) in raw.iter().enumerate() {
        let next = &raw[(i + 1) % raw.len()];
        if &program.step(v)? != next {
            return Err(Error::NotACycle(format!("step({v}) is not {next}")));
        }
    }
    Ok(Loop::from_members_unchecked(raw.to_vec()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopEntry {
    #[serde(rename = "loop")]
    pub cycle: Loop,
    #[serde(with = "crate::decimal::option")]
    pub lowest_root_node: Option<BigUint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopRegistry {
    pub program: String,
    pub scan_bound: u64,
    pub loops: BTreeMap<BigUint, LoopEntry>,
    /// Odd starts whose walks hit a cap, ascending.
    pub capped_starts: Vec<u64>,
}

/// One row of the registry file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryRecord {
    pub program: String,
    #[serde(with = "crate::decimal")]
    pub min: BigUint,
    pub length: u64,
    #[serde(with = "crate::decimal")]
    pub max: BigUint,
    #[serde(
        with = "crate::decimal::option_vec",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub members: Option<Vec<BigUint>>,
    #[serde(with = "crate::decimal::option")]
    pub lowest_root_node: Option<BigUint>,
}

impl LoopRegistry {
    pub fn minima(&self) -> Vec<BigUint> {
        self.loops.keys().cloned().collect()
    }

    pub fn get(&self, min: u64) -> Option<&LoopEntry> {
        self.loops.get(&BigUint::from(min))
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// Every loop member mapped to its loop minimum.
    pub(crate) fn member_map(&self) -> NumMap<Num> {
        let mut map = NumMap::default();
        for (min, entry) in &self.loops {
            let min = Num::from(min);
            for m in &entry.cycle.members {
                map.insert(Num::from(m), min.clone());
            }
        }
        map
    }

    pub fn records(&self, with_members: bool) -> Vec<RegistryRecord> {
        self.loops
            .values()
            .map(|e| RegistryRecord {
                program: self.program.clone(),
                min: e.cycle.min.clone(),
                length: e.cycle.length,
                max: e.cycle.max.clone(),
                members: with_members.then(|| e.cycle.members.clone()),
                lowest_root_node: e.lowest_root_node.clone(),
            })
            .collect()
    }

    pub fn to_json(&self, with_members: bool) -> String {
        serde_json::to_string_pretty(&self.records(with_members)).expect("registry serializes")
    }
}

/// Per-shard classification of starts by exit loop.
#[derive(Debug, Default)]
struct ShardScan {
    /// loop min -> (exit count, first start that exits there)
    exits: BTreeMap<BigUint, (u64, u64)>,
    loops: BTreeMap<BigUint, Loop>,
    capped: Vec<u64>,
}

fn scan_shard(program: &Program, shard: &StartSet, caps: Caps, seed: &NumMap<Num>) -> ShardScan {
    let mut members = seed.clone();
    let mut out = ShardScan::default();
    for n0 in shard.iter() {
        let end = walk(program, Num::from(n0), caps, |v| members.contains_key(v), |_, _| {});
        let min = match end {
            WalkEnd::Hit { value, .. } => members.get(&value).expect("stopped on a member").clone(),
            WalkEnd::Cycle { value, period, .. } => {
                let cycle = cycle_members(program, &value, period);
                let lp = Loop::from_members_unchecked(cycle.iter().map(Num::to_big).collect());
                let min = Num::from(&lp.min);
                for m in cycle {
                    members.insert(m, min.clone());
                }
                out.loops.insert(lp.min.clone(), lp);
                min
            }
            WalkEnd::IterationCapped { .. } | WalkEnd::BitCapped { .. } => {
                out.capped.push(n0);
                continue;
            }
        };
        out.exits
            .entry(min.into_big())
            .and_modify(|(count, _)| *count += 1)
            .or_insert((1, n0));
    }
    out
}

/// Merges shard results in shard order: counts add, first starts take the
/// minimum, loops union by minimum.
fn merge_scans(parts: Vec<ShardScan>) -> ShardScan {
    let mut acc = ShardScan::default();
    for part in parts {
        for (min, (count, first)) in part.exits {
            acc.exits
                .entry(min)
                .and_modify(|(c, f)| {
                    *c += count;
                    *f = (*f).min(first);
                })
                .or_insert((count, first));
        }
        acc.loops.extend(part.loops);
        acc.capped.extend(part.capped);
    }
    acc.capped.sort_unstable();
    acc
}

/// Runs cycle detection from every odd start up to `scan_bound`. Because the
/// scan is ascending, the first start seen exiting into a loop is its lowest
/// root node.
pub fn find_loops(program: &Program, scan_bound: u64, caps: Caps, shards: usize) -> Result<LoopRegistry> {
    let starts = StartSet::odd_range(1, scan_bound)?;
    let seed = NumMap::default();
    let scan = merge_scans(map_shards(&starts, shards, |s| {
        scan_shard(program, s, caps, &seed)
    }));
    let loops = scan
        .loops
        .into_iter()
        .map(|(min, cycle)| {
            let root = scan.exits.get(&min).map(|&(_, first)| BigUint::from(first));
            (
                min,
                LoopEntry {
                    cycle,
                    lowest_root_node: root,
                },
            )
        })
        .collect();
    Ok(LoopRegistry {
        program: program.id().to_string(),
        scan_bound,
        loops,
        capped_starts: scan.capped,
    })
}

/// Smallest start whose orbit enters `cycle`, scanning odd values upward.
/// Even starts halve onto smaller values in the same basin, so they never win.
pub fn lowest_root_node(program: &Program, cycle: &Loop, search_bound: &BigUint, caps: Caps) -> Result<BigUint> {
    let members = cycle.member_set();
    let bound: u64 = search_bound
        .try_into()
        .map_err(|_| Error::InvalidRange("search bound must fit in 64 bits".into()))?;
    for n0 in StartSet::odd_range(1, bound.max(1))?.iter() {
        let end = walk(program, Num::from(n0), caps, |v| members.contains(v), |_, _| {});
        if matches!(end, WalkEnd::Hit { .. }) {
            return Ok(BigUint::from(n0));
        }
    }
    Err(Error::NotFound {
        bound: search_bound.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasinRow {
    #[serde(with = "crate::decimal")]
    pub loop_min: BigUint,
    pub count: u64,
    /// Share of resolved starts, two decimals, rounded half-up.
    pub percent: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasinReport {
    pub description: String,
    pub counts: BTreeMap<BigUint, u64>,
    pub total: u64,
    pub capped: u64,
    /// Listed only when there are at most 100 of them.
    pub capped_starts: Vec<u64>,
}

pub const MAX_LISTED_CAPPED: usize = 100;

/// `100 * part / whole` in hundredths of a percent, rounded half-up.
pub fn percent_hundredths(part: u64, whole: u64) -> u64 {
    if whole == 0 {
        return 0;
    }
    let num = 2 * u128::from(part) * 10_000 + u128::from(whole);
    (num / (2 * u128::from(whole))) as u64
}

pub fn format_hundredths(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

impl BasinReport {
    pub fn resolved(&self) -> u64 {
        self.total - self.capped
    }

    pub fn percent(&self, min: u64) -> f64 {
        let count = self.counts.get(&BigUint::from(min)).copied().unwrap_or(0);
        100.0 * count as f64 / self.resolved().max(1) as f64
    }

    pub fn rows(&self) -> Vec<BasinRow> {
        let resolved = self.resolved();
        self.counts
            .iter()
            .map(|(min, &count)| BasinRow {
                loop_min: min.clone(),
                count,
                percent: format_hundredths(percent_hundredths(count, resolved)),
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("loop_min,count,percent\n");
        for r in self.rows() {
            out.push_str(&format!("{},{},{}\n", r.loop_min, r.count, r.percent));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let capped: Vec<String> = self.capped_starts.iter().map(u64::to_string).collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "starts": self.description,
            "total": self.total,
            "capped": self.capped,
            "capped_starts": capped,
            "rows": self.rows(),
        }))
        .expect("report serializes")
    }
}

/// Classifies every start by the loop it exits into. Loops absent from
/// `registry` are detected along the way and reported under their minimum.
pub fn basin_scan(
    program: &Program,
    starts: &StartSet,
    registry: &LoopRegistry,
    caps: Caps,
    shards: usize,
) -> BasinReport {
    let seed = registry.member_map();
    let scan = merge_scans(map_shards(starts, shards, |s| {
        scan_shard(program, s, caps, &seed)
    }));
    let capped = scan.capped.len() as u64;
    BasinReport {
        description: starts.to_string(),
        counts: scan.exits.into_iter().map(|(k, (c, _))| (k, c)).collect(),
        total: starts.count,
        capped,
        capped_starts: if scan.capped.len() <= MAX_LISTED_CAPPED {
            scan.capped
        } else {
            Vec::new()
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecadeSpread {
    /// Starts in `[10^decade, 10^(decade+1))`.
    pub decade: u32,
    pub count: u64,
    pub mean_length: f64,
    pub std_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interestingness {
    pub program: String,
    pub sampled: u64,
    /// Criterion 1: share of starts that hit a cap.
    pub capped_fraction: f64,
    /// Criterion 2: share of trajectories with at least one increasing step.
    pub non_monotone_fraction: f64,
    /// Criterion 3: spread of sequence length at fixed magnitude.
    pub length_dispersion: Vec<DecadeSpread>,
    /// Criterion 4.
    pub loop_count: usize,
}

fn decade(n: u64) -> u32 {
    n.checked_ilog10().unwrap_or(0)
}

/// Measures the four interestingness criteria over a finite sample. Capped
/// trajectories count as non-monotone: a run that never rises either halts at
/// a fixed point or sinks, so only rising runs reach a cap.
pub fn interestingness_report(program: &Program, sample: &StartSet, caps: Caps, shards: usize) -> Interestingness {
    let scan = merge_scans(map_shards(sample, shards, |s| {
        scan_shard(program, s, caps, &NumMap::default())
    }));
    let minima: NumSet = scan.loops.keys().map(Num::from).collect();
    let capped: HashSet<u64> = scan.capped.iter().copied().collect();

    let per_start: Vec<Vec<(u64, u64, bool)>> = map_shards(sample, shards, |s| {
        s.iter()
            .filter(|n| !capped.contains(n))
            .filter_map(|n0| {
                let mut prev = Num::from(n0);
                let mut rose = false;
                let end = walk(
                    program,
                    Num::from(n0),
                    caps,
                    |v| minima.contains(v),
                    |v, _| {
                        if !rose {
                            rose = *v > prev;
                            prev = v.clone();
                        }
                    },
                );
                match end {
                    WalkEnd::Hit { steps, .. } => Some((n0, steps, rose)),
                    _ => None,
                }
            })
            .collect()
    });

    let mut by_decade: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut rising = scan.capped.len() as u64;
    for (n0, len, rose) in per_start.into_iter().flatten() {
        by_decade.entry(decade(n0)).or_default().push(len as f64);
        rising += u64::from(rose);
    }
    let length_dispersion = by_decade
        .into_iter()
        .map(|(decade, lens)| {
            let n = lens.len() as f64;
            let mean = lens.iter().sum::<f64>() / n;
            let var = lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
            DecadeSpread {
                decade,
                count: lens.len() as u64,
                mean_length: mean,
                std_length: var.sqrt(),
            }
        })
        .collect();
    let sampled = sample.count.max(1) as f64;
    Interestingness {
        program: program.id().to_string(),
        sampled: sample.count,
        capped_fraction: scan.capped.len() as f64 / sampled,
        non_monotone_fraction: rising as f64 / sampled,
        length_dispersion,
        loop_count: scan.loops.len(),
    }
}

/// Exit-loop minimum of every start in `starts`, or `None` if capped.
pub fn exit_loops(program: &Program, starts: &StartSet, registry: &LoopRegistry, caps: Caps) -> Vec<(u64, Option<BigUint>)> {
    let minima = registry.minima();
    starts
        .iter()
        .map(|n0| {
            let policy = StopPolicy::with_minima(minima.iter().cloned()).caps(caps);
            let min = iterate(program, &BigUint::from(n0), &policy)
                .ok()
                .and_then(|t| match t.outcome {
                    Outcome::Converged { loop_min, .. } => Some(loop_min),
                    Outcome::CycleFound { cycle } => Some(cycle.min),
                    _ => None,
                });
            (n0, min)
        })
        .collect()
}
