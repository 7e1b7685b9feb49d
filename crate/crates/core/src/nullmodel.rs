//! Closed-form length predictors, window decay factors, and the measured
//! statistics they are compared against.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::{ln_big, Num};
use crate::program::{Guard, Program};
use crate::shard::{map_shards, StartSet};
use crate::trajectory::{detect_cycle, positive, resolve_length, Caps, CycleSearch, StopPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthModel {
    Low,
    Mid,
    High,
}

impl FromStr for LengthModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(LengthModel::Low),
            "mid" => Ok(LengthModel::Mid),
            "high" => Ok(LengthModel::High),
            _ => Err(Error::Model(format!("unknown length model `{s}`"))),
        }
    }
}

impl fmt::Display for LengthModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LengthModel::Low => "low",
            LengthModel::Mid => "mid",
            LengthModel::High => "high",
        })
    }
}

fn ln_four_thirds() -> f64 {
    (4.0f64 / 3.0).ln()
}

/// `low`: pure halving. `mid`: a 3/4 drop every two steps. `high`: `k` rising
/// 3/2 steps first (`k` the bit length), then `mid` from the peak.
pub fn predict_length(model: LengthModel, n0: &BigUint) -> Result<f64> {
    positive(n0)?;
    let ln = ln_big(n0);
    Ok(match model {
        LengthModel::Low => ln / LN_2,
        LengthModel::Mid => 2.0 * ln / ln_four_thirds(),
        LengthModel::High => {
            let k = n0.bits() as f64;
            k + 2.0 * (ln + k * 1.5f64.ln()) / ln_four_thirds()
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    /// Expected number of steps of this kind per window.
    pub count: f64,
    #[serde(serialize_with = "ratio_text")]
    pub factor: Ratio<u64>,
}

fn ratio_text<S: serde::Serializer>(r: &Ratio<u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayProfile {
    pub name: String,
    pub window: u32,
    pub components: Vec<Component>,
}

fn c(count: f64, num: u64, den: u64) -> Component {
    Component {
        count,
        factor: Ratio::new(num, den),
    }
}

impl DecayProfile {
    pub fn new(name: impl Into<String>, window: u32, components: Vec<Component>) -> Result<DecayProfile> {
        let total: f64 = components.iter().map(|c| c.count).sum();
        if (total - f64::from(window)).abs() > 1e-9 {
            return Err(Error::Model(format!("step counts sum to {total}, window is {window}")));
        }
        if components.iter().any(|c| *c.factor.numer() == 0 || c.count < 0.0) {
            return Err(Error::Model("factors must be positive and counts non-negative".into()));
        }
        Ok(DecayProfile {
            name: name.into(),
            window,
            components,
        })
    }

    /// Half of the steps halve; odd steps are split by the density of odd
    /// integers each guard claims.
    pub fn naive(program: &Program, window: u32) -> DecayProfile {
        let half = f64::from(window) / 2.0;
        let mut remaining = 1.0;
        let mut components = vec![c(half, 1, 2)];
        for rule in &program.rules()[1..] {
            let share = match rule.guard {
                Guard::DivisibleBy(d) => remaining / d as f64,
                _ => remaining,
            };
            remaining -= share;
            components.push(Component {
                count: half * share,
                factor: rule.growth_factor(),
            });
        }
        DecayProfile {
            name: format!("naive:{}", program.id()),
            window,
            components,
        }
    }

    pub fn p1() -> DecayProfile {
        DecayProfile::new("p1", 10, vec![c(5.0, 1, 2), c(5.0, 3, 2)]).unwrap()
    }

    pub fn p2_simple() -> DecayProfile {
        DecayProfile::new("p2-simple", 6, vec![c(3.0, 1, 2), c(1.0, 7, 6), c(2.0, 5, 2)]).unwrap()
    }

    /// Multiples of 3 enriched by a quarter among odd terms.
    pub fn p2_enriched() -> DecayProfile {
        DecayProfile::new("p2-enriched", 10, vec![c(5.0, 1, 2), c(2.08, 7, 6), c(2.92, 5, 2)]).unwrap()
    }

    pub fn p4_eta1(m: u64) -> DecayProfile {
        DecayProfile::new(
            format!("p4-eta1:{m}"),
            10,
            vec![c(5.0, 1, 2), c(1.0, m, 10), c(4.0, 3, 2)],
        )
        .unwrap()
    }

    pub fn p4_eta2(m: u64) -> DecayProfile {
        DecayProfile::new(
            format!("p4-eta2:{m}"),
            10,
            vec![c(5.0, 1, 2), c(1.35, m, 10), c(3.65, 3, 2)],
        )
        .unwrap()
    }

    pub fn p6_7() -> DecayProfile {
        DecayProfile::new(
            "p6-7",
            10,
            vec![c(5.0, 1, 2), c(5.0 / 3.0, 7, 6), c(2.0 / 3.0, 7, 10), c(8.0 / 3.0, 7, 2)],
        )
        .unwrap()
    }
}

impl FromStr for DecayProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let m_of = |rest: &str| -> Result<u64> {
            rest.parse::<u64>()
                .ok()
                .filter(|&m| m >= 1)
                .ok_or_else(|| Error::Model(format!("bad m in profile `{s}`")))
        };
        match s {
            "p1" => Ok(DecayProfile::p1()),
            "p2-simple" => Ok(DecayProfile::p2_simple()),
            "p2-enriched" => Ok(DecayProfile::p2_enriched()),
            "p6-7" => Ok(DecayProfile::p6_7()),
            _ => {
                if let Some(rest) = s.strip_prefix("p4-eta1:") {
                    Ok(DecayProfile::p4_eta1(m_of(rest)?))
                } else if let Some(rest) = s.strip_prefix("p4-eta2:") {
                    Ok(DecayProfile::p4_eta2(m_of(rest)?))
                } else {
                    Err(Error::Model(format!("unknown profile `{s}`")))
                }
            }
        }
    }
}

fn ratio_f64(r: &Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Expected multiplicative change over one window.
pub fn window_factor(profile: &DecayProfile) -> f64 {
    profile
        .components
        .iter()
        .map(|c| ratio_f64(&c.factor).powf(c.count))
        .product()
}

/// Steps to decay from `n0` to `loop_min` at `factor` per `window` steps.
pub fn predicted_length_from_factor(factor: f64, window: f64, n0: &BigUint, loop_min: &BigUint) -> Result<f64> {
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::Model(format!(
            "factor {factor} does not decay; the model diverges"
        )));
    }
    positive(n0)?;
    positive(loop_min)?;
    Ok(window * (ln_big(n0) - ln_big(loop_min)) / -factor.ln())
}

/// Decay families parameterized by a real `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MFamily {
    Eta1,
    Eta2,
    /// Every step halves; no dependence on `m`.
    AllHalves,
}

impl MFamily {
    pub fn factor_at(self, m: f64) -> f64 {
        let halves = 0.5f64.powi(5);
        match self {
            MFamily::Eta1 => halves * (m / 10.0) * 1.5f64.powi(4),
            MFamily::Eta2 => halves * (m / 10.0).powf(1.35) * 1.5f64.powf(3.65),
            MFamily::AllHalves => 0.5f64.powi(10),
        }
    }
}

pub const BOUNDARY_BRACKET: (f64, f64) = (7.0, 200.0);
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// The `m` at which the window factor crosses 1, by bisection.
pub fn stability_boundary(family: MFamily) -> Result<f64> {
    bisect(|m| family.factor_at(m) - 1.0, BOUNDARY_BRACKET, BOUNDARY_TOLERANCE)
}

fn bisect(f: impl Fn(f64) -> f64, (mut lo, mut hi): (f64, f64), tol: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Model(format!("no root in [{lo}, {hi}]")));
    }
    let rising = fhi > flo;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidueProfile {
    pub fractions: BTreeMap<u64, f64>,
    /// Odd interior terms pooled over the sample.
    pub odd_terms: u64,
    pub sampled: usize,
    pub capped: usize,
}

#[derive(Default)]
struct ResidueTally {
    hits: Vec<u64>,
    odd: u64,
    capped: usize,
}

/// Fraction of odd interior terms divisible by each divisor. Interior means
/// after the start and before the first loop member.
pub fn residue_enrichment(
    program: &Program,
    starts: &[BigUint],
    divisors: &[u64],
    caps: Caps,
) -> Result<ResidueProfile> {
    if let Some(d) = divisors.iter().find(|&&d| d < 3 || d % 2 == 0) {
        return Err(Error::Model(format!("divisor {d} must be odd and at least 3")));
    }
    let tallies: Vec<Result<ResidueTally>> = starts
        .par_iter()
        .map(|n0| {
            let mut t = ResidueTally {
                hits: vec![0; divisors.len()],
                ..Default::default()
            };
            match detect_cycle(program, n0, caps)? {
                CycleSearch::Capped { .. } => t.capped = 1,
                CycleSearch::Found { tail_length, .. } => {
                    let mut v = Num::from(n0);
                    for _ in 1..tail_length {
                        program.step_in_place(&mut v);
                        if !v.is_even() {
                            t.odd += 1;
                            for (h, &d) in t.hits.iter_mut().zip(divisors) {
                                *h += u64::from(v.rem_small(d) == 0);
                            }
                        }
                    }
                }
            }
            Ok(t)
        })
        .collect();
    let mut total = ResidueTally {
        hits: vec![0; divisors.len()],
        ..Default::default()
    };
    for t in tallies {
        let t = t?;
        total.odd += t.odd;
        total.capped += t.capped;
        for (a, b) in total.hits.iter_mut().zip(t.hits) {
            *a += b;
        }
    }
    if total.capped == starts.len() {
        return Err(Error::Model("every start in the sample hit a cap".into()));
    }
    let fractions = divisors
        .iter()
        .zip(&total.hits)
        .map(|(&d, &h)| (d, if total.odd == 0 { 0.0 } else { h as f64 / total.odd as f64 }))
        .collect();
    Ok(ResidueProfile {
        fractions,
        odd_terms: total.odd,
        sampled: starts.len(),
        capped: total.capped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Persistence {
    pub rate: f64,
    /// Adjacent pairs with both lengths resolved.
    pub pairs: u64,
    pub equal: u64,
    /// Starts whose length could not be resolved.
    pub excluded: u64,
}

/// Fraction of `n0` in `lo..=hi` with `s(n0 + 1) = s(n0)`.
pub fn persistence_rate(
    program: &Program,
    lo: u64,
    hi: u64,
    policy: &StopPolicy,
    shards: usize,
) -> Result<Persistence> {
    let all = StartSet::range(lo, hi.checked_add(1).ok_or_else(|| Error::InvalidRange("range overflows".into()))?)?;
    let lengths: Vec<Option<u64>> = map_shards(&all, shards, |set| {
        set.iter()
            .map(|n| resolve_length(program, &BigUint::from(n), policy).ok().map(|(len, _)| len))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let excluded = lengths[..lengths.len() - 1].iter().filter(|l| l.is_none()).count() as u64;
    let (mut pairs, mut equal) = (0u64, 0u64);
    for w in lengths.windows(2) {
        if let (Some(a), Some(b)) = (w[0], w[1]) {
            pairs += 1;
            equal += u64::from(a == b);
        }
    }
    Ok(Persistence {
        rate: if pairs == 0 { 0.0 } else { equal as f64 / pairs as f64 },
        pairs,
        equal,
        excluded,
    })
}

/// `model,n0,predicted_length` rows, one series per model.
pub fn model_curve_csv(models: &[LengthModel], starts: &[BigUint]) -> Result<String> {
    let mut out = String::from("model,n0,predicted_length\n");
    for &m in models {
        for n in starts {
            out.push_str(&format!("{m},{n},{:.6}\n", predict_length(m, n)?));
        }
    }
    Ok(out)
}
