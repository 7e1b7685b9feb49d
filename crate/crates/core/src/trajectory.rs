//! Iterating a program from a start value.
//!
//! Every walk runs Brent's cycle finder alongside the caller's stop test, so
//! orbits that close into an unknown cycle terminate without remembering the
//! path. The hare is the trajectory itself: step counts, rule tallies and
//! peaks are measured along it.

use std::cell::Cell;
use std::collections::{BTreeSet, HashMap, HashSet};

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::census::Loop;
use crate::error::{Error, Result};
use crate::num::{Num, NumSet};
use crate::program::Program;

pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000_000;
pub const DEFAULT_MAX_BITS: u64 = 40_000;

/// Iteration and bit-length limits for one walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub max_iterations: u64,
    pub max_bits: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_bits: DEFAULT_MAX_BITS,
        }
    }
}

impl Caps {
    pub fn new(max_iterations: u64, max_bits: u64) -> Result<Caps> {
        if max_iterations < 1 {
            return Err(Error::InvalidRange("max_iterations must be at least 1".into()));
        }
        if max_bits < 64 {
            return Err(Error::InvalidRange("max_bits must be at least 64".into()));
        }
        Ok(Caps {
            max_iterations,
            max_bits,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopPolicy {
    pub known_loop_minima: BTreeSet<BigUint>,
    pub caps: Caps,
    pub record_full_path: bool,
}

impl StopPolicy {
    pub fn with_minima<I, T>(minima: I) -> StopPolicy
    where
        I: IntoIterator<Item = T>,
        T: Into<BigUint>,
    {
        StopPolicy {
            known_loop_minima: minima.into_iter().map(Into::into).collect(),
            ..StopPolicy::default()
        }
    }

    pub fn caps(mut self, caps: Caps) -> StopPolicy {
        self.caps = caps;
        self
    }

    pub fn record_path(mut self) -> StopPolicy {
        self.record_full_path = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Converged {
        #[serde(with = "crate::decimal")]
        loop_min: BigUint,
        length: u64,
    },
    CycleFound {
        #[serde(rename = "loop")]
        cycle: Loop,
    },
    IterationCapped,
    BitCapped,
}

impl Outcome {
    pub fn is_capped(&self) -> bool {
        matches!(self, Outcome::IterationCapped | Outcome::BitCapped)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(with = "crate::decimal")]
    pub n0: BigUint,
    pub outcome: Outcome,
    pub length: u64,
    #[serde(with = "crate::decimal")]
    pub max_value: BigUint,
    pub max_bits: u64,
    pub rule_fire_counts: Vec<u64>,
    pub leading_up_steps: u64,
    #[serde(
        with = "crate::decimal::option_vec",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub path: Option<Vec<BigUint>>,
}

impl Trajectory {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trajectory serializes")
    }
}

/// How a walk ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum WalkEnd {
    /// The stop predicate accepted the value reached after `steps` steps.
    Hit { steps: u64, value: Num },
    /// The orbit closed: `value` lies on a cycle of length `period`.
    Cycle { steps: u64, value: Num, period: u64 },
    IterationCapped { steps: u64, value: Num },
    BitCapped { steps: u64, value: Num },
}

/// Walks the orbit of `start`, calling `visit(value_after_step, rule)` after
/// every step, until `stop` accepts the current value, the orbit provably
/// repeats, or a cap is reached. `stop` is consulted before cycle detection,
/// so a stop value on a cycle always wins.
pub(crate) fn walk<S, V>(program: &Program, start: Num, caps: Caps, mut stop: S, mut visit: V) -> WalkEnd
where
    S: FnMut(&Num) -> bool,
    V: FnMut(&Num, usize),
{
    let mut cur = start;
    let mut steps = 0u64;
    let mut tortoise = cur.clone();
    let mut power = 1u64;
    let mut lam = 0u64;
    loop {
        if stop(&cur) {
            return WalkEnd::Hit { steps, value: cur };
        }
        if cur.bits() > caps.max_bits {
            return WalkEnd::BitCapped { steps, value: cur };
        }
        if steps >= caps.max_iterations {
            return WalkEnd::IterationCapped { steps, value: cur };
        }
        let rule = program.step_in_place(&mut cur);
        steps += 1;
        visit(&cur, rule);
        lam += 1;
        if cur == tortoise {
            if stop(&cur) {
                return WalkEnd::Hit { steps, value: cur };
            }
            return WalkEnd::Cycle {
                steps,
                value: cur,
                period: lam,
            };
        }
        if lam == power {
            tortoise = cur.clone();
            power *= 2;
            lam = 0;
        }
    }
}

/// The `period` values of the cycle through `on_cycle`, starting there.
pub(crate) fn cycle_members(program: &Program, on_cycle: &Num, period: u64) -> Vec<Num> {
    let mut members = Vec::with_capacity(period as usize);
    let mut v = on_cycle.clone();
    for _ in 0..period {
        members.push(v.clone());
        program.step_in_place(&mut v);
    }
    members
}

pub(crate) fn positive(n: &BigUint) -> Result<()> {
    if n.is_zero() {
        Err(Error::NonPositive)
    } else {
        Ok(())
    }
}

pub fn iterate(program: &Program, n0: &BigUint, policy: &StopPolicy) -> Result<Trajectory> {
    positive(n0)?;
    let minima: NumSet = policy.known_loop_minima.iter().map(Num::from).collect();
    let start = Num::from(n0);
    let mut max = start.clone();
    let mut fire = vec![0u64; program.rule_count()];
    let mut leading = 0u64;
    let mut leading_open = true;
    let mut path = policy.record_full_path.then(|| vec![n0.clone()]);

    let end = walk(
        program,
        start,
        policy.caps,
        |v| minima.contains(v),
        |v, rule| {
            fire[rule] += 1;
            if leading_open {
                if rule == 0 {
                    leading_open = false;
                } else {
                    leading += 1;
                }
            }
            if *v > max {
                max = v.clone();
            }
            if let Some(p) = path.as_mut() {
                p.push(v.to_big());
            }
        },
    );

    let (length, outcome) = match end {
        WalkEnd::Hit { steps, value } => (
            steps,
            Outcome::Converged {
                loop_min: value.into_big(),
                length: steps,
            },
        ),
        WalkEnd::Cycle {
            steps,
            value,
            period,
        } => {
            let members = cycle_members(program, &value, period);
            (
                steps,
                Outcome::CycleFound {
                    cycle: Loop::from_members_unchecked(
                        members.into_iter().map(Num::into_big).collect(),
                    ),
                },
            )
        }
        WalkEnd::IterationCapped { steps, .. } => (steps, Outcome::IterationCapped),
        WalkEnd::BitCapped { steps, .. } => (steps, Outcome::BitCapped),
    };
    let max_bits = max.bits();
    Ok(Trajectory {
        n0: n0.clone(),
        outcome,
        length,
        max_value: max.into_big(),
        max_bits,
        rule_fire_counts: fire,
        leading_up_steps: leading,
        path,
    })
}

/// Steps from `n0` to the first arrival at the minimum of the loop it enters,
/// together with that minimum. Loops missing from `policy` are discovered on
/// the way.
pub fn resolve_length(program: &Program, n0: &BigUint, policy: &StopPolicy) -> Result<(u64, BigUint)> {
    let t = iterate(program, n0, policy)?;
    match t.outcome {
        Outcome::Converged { loop_min, length } => Ok((length, loop_min)),
        Outcome::CycleFound { cycle } => {
            let mut retry = policy.clone();
            retry.record_full_path = false;
            retry.known_loop_minima.insert(cycle.min.clone());
            resolve_length(program, n0, &retry)
        }
        Outcome::IterationCapped => Err(Error::NotConverged(format!(
            "{n0}: iteration cap {} reached",
            policy.caps.max_iterations
        ))),
        Outcome::BitCapped => Err(Error::NotConverged(format!(
            "{n0}: bit cap {} exceeded",
            policy.caps.max_bits
        ))),
    }
}

/// Sequence length s(n0) under the default caps.
pub fn sequence_length<T: Into<BigUint> + Clone>(
    program: &Program,
    n0: &BigUint,
    known_loop_minima: &[T],
) -> Result<u64> {
    let policy = StopPolicy::with_minima(known_loop_minima.iter().cloned());
    resolve_length(program, n0, &policy).map(|(len, _)| len)
}

/// A trajectory in progress that can be advanced in bounded slices and
/// resumed from its fields alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunState {
    pub n0: BigUint,
    pub iterations: u64,
    pub current: BigUint,
    pub max_bits: u64,
    pub rule_fire_counts: Vec<u64>,
}

impl RunState {
    pub fn new(program: &Program, n0: &BigUint) -> Result<RunState> {
        positive(n0)?;
        Ok(RunState {
            n0: n0.clone(),
            iterations: 0,
            current: n0.clone(),
            max_bits: n0.bits(),
            rule_fire_counts: vec![0; program.rule_count()],
        })
    }

    /// Runs at most `budget` more steps. Returns the outcome once the run is
    /// over; `Converged` lengths count from `n0`. Cycle detection restarts
    /// with every slice, so slices should be long compared with any loop.
    pub fn advance(&mut self, program: &Program, policy: &StopPolicy, budget: u64) -> Option<Outcome> {
        let minima: NumSet = policy.known_loop_minima.iter().map(Num::from).collect();
        let left = policy.caps.max_iterations.saturating_sub(self.iterations);
        let slice = Caps {
            max_iterations: budget.min(left),
            max_bits: policy.caps.max_bits,
        };
        let fire = &mut self.rule_fire_counts;
        let max_bits = &mut self.max_bits;
        let end = walk(
            program,
            Num::from(&self.current),
            slice,
            |v| minima.contains(v),
            |v, rule| {
                fire[rule] += 1;
                let b = v.bits();
                if b > *max_bits {
                    *max_bits = b;
                }
            },
        );
        let (steps, cur, outcome) = match end {
            WalkEnd::Hit { steps, value } => {
                let outcome = Outcome::Converged {
                    loop_min: value.to_big(),
                    length: self.iterations + steps,
                };
                (steps, value, Some(outcome))
            }
            WalkEnd::Cycle { steps, value, period } => {
                let members = cycle_members(program, &value, period);
                let cycle = Loop::from_members_unchecked(members.into_iter().map(Num::into_big).collect());
                (steps, value, Some(Outcome::CycleFound { cycle }))
            }
            WalkEnd::IterationCapped { steps, value } => {
                let capped = self.iterations + steps >= policy.caps.max_iterations;
                (steps, value, capped.then_some(Outcome::IterationCapped))
            }
            WalkEnd::BitCapped { steps, value } => (steps, value, Some(Outcome::BitCapped)),
        };
        self.iterations += steps;
        self.current = cur.into_big();
        outcome
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CycleSearch {
    /// `tail_length` steps lead from the start to the first cycle value.
    Found { cycle: Loop, tail_length: u64 },
    Capped { iterations: u64, bit_capped: bool },
}

impl CycleSearch {
    pub fn cycle(&self) -> Option<&Loop> {
        match self {
            CycleSearch::Found { cycle, .. } => Some(cycle),
            CycleSearch::Capped { .. } => None,
        }
    }
}

/// Finds the cycle the orbit of `n0` falls into, with its exact entry index.
pub fn detect_cycle(program: &Program, n0: &BigUint, caps: Caps) -> Result<CycleSearch> {
    positive(n0)?;
    let start = Num::from(n0);
    let period = match walk(program, start.clone(), caps, |_| false, |_, _| {}) {
        WalkEnd::Cycle { period, .. } => period,
        WalkEnd::IterationCapped { steps, .. } => {
            return Ok(CycleSearch::Capped {
                iterations: steps,
                bit_capped: false,
            })
        }
        WalkEnd::BitCapped { steps, .. } => {
            return Ok(CycleSearch::Capped {
                iterations: steps,
                bit_capped: true,
            })
        }
        WalkEnd::Hit { .. } => unreachable!("stop predicate never fires"),
    };
    // Second pass: a hare `period` steps ahead meets the tortoise exactly at
    // the first cycle value.
    let mut tortoise = start.clone();
    let mut hare = start;
    for _ in 0..period {
        program.step_in_place(&mut hare);
    }
    let mut tail = 0u64;
    while tortoise != hare {
        program.step_in_place(&mut tortoise);
        program.step_in_place(&mut hare);
        tail += 1;
    }
    let members = cycle_members(program, &tortoise, period);
    Ok(CycleSearch::Found {
        cycle: Loop::from_members_unchecked(members.into_iter().map(Num::into_big).collect()),
        tail_length: tail,
    })
}

/// Full forward orbit (tail and one turn of the cycle), value -> index.
fn index_orbit(program: &Program, n0: &BigUint, caps: Caps) -> Result<HashMap<Num, u64>> {
    let mut seen = HashMap::new();
    let mut v = Num::from(n0);
    let mut i = 0u64;
    while !seen.contains_key(&v) {
        if i >= caps.max_iterations || v.bits() > caps.max_bits {
            return Err(Error::NotConverged(format!("orbit of {n0} exceeded caps")));
        }
        seen.insert(v.clone(), i);
        program.step_in_place(&mut v);
        i += 1;
    }
    Ok(seen)
}

/// First value on the orbit of the larger start that also lies on the orbit
/// of the smaller one, with its step index in each orbit `(a, b)`.
pub(crate) fn merge_with_indices(
    program: &Program,
    a: &BigUint,
    b: &BigUint,
    caps: Caps,
) -> Result<Option<(BigUint, u64, u64)>> {
    positive(a)?;
    positive(b)?;
    let swapped = b < a;
    let (small, large) = if swapped { (b, a) } else { (a, b) };
    let index = index_orbit(program, small, caps)?;
    let mut own = HashSet::new();
    let mut v = Num::from(large);
    let mut j = 0u64;
    loop {
        if let Some(&i) = index.get(&v) {
            let (ia, ib) = if swapped { (j, i) } else { (i, j) };
            return Ok(Some((v.into_big(), ia, ib)));
        }
        if !own.insert(v.clone()) {
            return Ok(None);
        }
        if j >= caps.max_iterations || v.bits() > caps.max_bits {
            return Err(Error::NotConverged(format!("orbit of {large} exceeded caps")));
        }
        program.step_in_place(&mut v);
        j += 1;
    }
}

/// The first value shared by both orbits, or `None` when they end in
/// different loops.
pub fn merge_point(program: &Program, a: &BigUint, b: &BigUint, caps: Caps) -> Result<Option<BigUint>> {
    Ok(merge_with_indices(program, a, b, caps)?.map(|(v, _, _)| v))
}

/// Length of the initial run of odd-branch steps. Stops early if that run
/// closes into a cycle of odd-branch steps.
pub fn leading_up_steps(program: &Program, n0: &BigUint) -> Result<u64> {
    positive(n0)?;
    let mut count = 0u64;
    let open = Cell::new(true);
    walk(
        program,
        Num::from(n0),
        Caps::default(),
        |_| !open.get(),
        |_, rule| {
            if rule == 0 {
                open.set(false);
            } else {
                count += 1;
            }
        },
    );
    Ok(count)
}
