//! Hybrid integer used on the hot paths.
//!
//! Values that fit in 128 bits stay native; anything wider lives in a
//! `BigUint`. The invariant `Big(b)` implies `b > u128::MAX` is maintained by
//! every constructor, so derived equality, ordering and hashing agree with the
//! numeric value.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Num {
    Small(u128),
    Big(BigUint),
}

impl Num {
    pub fn from_big(b: BigUint) -> Num {
        if b.bits() <= 128 {
            Num::Small(b.to_u128().expect("fits in 128 bits"))
        } else {
            Num::Big(b)
        }
    }

    pub fn to_big(&self) -> BigUint {
        match self {
            Num::Small(v) => BigUint::from(*v),
            Num::Big(b) => b.clone(),
        }
    }

    pub fn into_big(self) -> BigUint {
        match self {
            Num::Small(v) => BigUint::from(v),
            Num::Big(b) => b,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Num::Small(v) => *v == 0,
            Num::Big(b) => b.is_zero(),
        }
    }

    pub fn is_even(&self) -> bool {
        match self {
            Num::Small(v) => v & 1 == 0,
            Num::Big(b) => !b.bit(0),
        }
    }

    pub fn bits(&self) -> u64 {
        match self {
            Num::Small(v) => 128 - u64::from(v.leading_zeros()),
            Num::Big(b) => b.bits(),
        }
    }

    /// Remainder modulo a small divisor without allocating.
    pub fn rem_small(&self, d: u64) -> u64 {
        match self {
            Num::Small(v) => (*v % u128::from(d)) as u64,
            Num::Big(b) => rem_big(b, d),
        }
    }

    pub fn as_u128(&self) -> Option<u128> {
        match self {
            Num::Small(v) => Some(*v),
            Num::Big(_) => None,
        }
    }

    /// Natural logarithm, accurate to double precision for any size.
    pub fn ln(&self) -> f64 {
        match self {
            Num::Small(v) => (*v as f64).ln(),
            Num::Big(b) => ln_big(b),
        }
    }
}

impl From<u64> for Num {
    fn from(v: u64) -> Num {
        Num::Small(u128::from(v))
    }
}

impl From<u128> for Num {
    fn from(v: u128) -> Num {
        Num::Small(v)
    }
}

impl From<BigUint> for Num {
    fn from(b: BigUint) -> Num {
        Num::from_big(b)
    }
}

impl From<&BigUint> for Num {
    fn from(b: &BigUint) -> Num {
        Num::from_big(b.clone())
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Small(v) => write!(f, "{v}"),
            Num::Big(b) => write!(f, "{b}"),
        }
    }
}

/// Hash set that turns away values wider than its widest member before
/// hashing, so probing with a huge value costs nothing.
#[derive(Debug, Clone, Default)]
pub(crate) struct NumSet {
    set: HashSet<Num>,
    max_bits: u64,
}

impl NumSet {
    pub(crate) fn contains(&self, v: &Num) -> bool {
        v.bits() <= self.max_bits && self.set.contains(v)
    }
}

impl FromIterator<Num> for NumSet {
    fn from_iter<I: IntoIterator<Item = Num>>(iter: I) -> NumSet {
        let set: HashSet<Num> = iter.into_iter().collect();
        let max_bits = set.iter().map(Num::bits).max().unwrap_or(0);
        NumSet { set, max_bits }
    }
}

/// Map keyed by values, with the same width pre-check as [`NumSet`].
#[derive(Debug, Clone)]
pub(crate) struct NumMap<V> {
    map: HashMap<Num, V>,
    max_bits: u64,
}

impl<V> Default for NumMap<V> {
    fn default() -> Self {
        NumMap {
            map: HashMap::new(),
            max_bits: 0,
        }
    }
}

impl<V> NumMap<V> {
    pub(crate) fn insert(&mut self, k: Num, v: V) {
        self.max_bits = self.max_bits.max(k.bits());
        self.map.insert(k, v);
    }

    pub(crate) fn get(&self, k: &Num) -> Option<&V> {
        if k.bits() > self.max_bits {
            return None;
        }
        self.map.get(k)
    }

    pub(crate) fn contains_key(&self, k: &Num) -> bool {
        self.get(k).is_some()
    }
}

pub(crate) fn rem_big(b: &BigUint, d: u64) -> u64 {
    if d <= u64::from(u32::MAX) {
        // 32-bit halves keep every division in hardware u64
        let mut r = 0u64;
        for digit in b.iter_u64_digits().rev() {
            r = ((r << 32) | (digit >> 32)) % d;
            r = ((r << 32) | (digit & 0xffff_ffff)) % d;
        }
        return r;
    }
    let d = u128::from(d);
    let mut r: u128 = 0;
    for digit in b.iter_u64_digits().rev() {
        r = ((r << 64) | u128::from(digit)) % d;
    }
    r as u64
}

pub fn ln_big(b: &BigUint) -> f64 {
    let bits = b.bits();
    if bits <= 1000 {
        return b.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (b >> shift).to_f64().expect("64-bit mantissa");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}
