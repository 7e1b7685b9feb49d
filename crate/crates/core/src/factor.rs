use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use crate::num::rem_big;

pub const TRIAL_BOUND: u64 = 1_000_000;

/// Prime factors found by trial division, with any cofactor left over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    /// Nondecreasing, with multiplicity.
    pub primes: Vec<u64>,
    /// Greater than `TRIAL_BOUND^2` and free of small factors: prime or
    /// composite, undecided.
    pub cofactor: Option<BigUint>,
}

impl Factorization {
    pub fn is_complete(&self) -> bool {
        self.cofactor.is_none()
    }
}

/// `5^2*11*31*41`; `1` for the empty product; an unresolved cofactor is
/// appended as `*[c]`.
impl fmt::Display for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let mut i = 0;
        while i < self.primes.len() {
            let p = self.primes[i];
            let mut e = 0;
            while i < self.primes.len() && self.primes[i] == p {
                e += 1;
                i += 1;
            }
            parts.push(if e == 1 { p.to_string() } else { format!("{p}^{e}") });
        }
        if let Some(c) = &self.cofactor {
            parts.push(format!("[{c}]"));
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

pub fn small_factorization(n: &BigUint) -> Factorization {
    let mut rest = n.clone();
    let mut primes = Vec::new();
    let mut d = 2u64;
    while d <= TRIAL_BOUND {
        if let Some(r) = rest.to_u128() {
            if u128::from(d) * u128::from(d) > r {
                break;
            }
        }
        while rem_big(&rest, d) == 0 {
            rest /= d;
            primes.push(d);
        }
        d += if d == 2 { 1 } else { 2 };
    }
    let mut cofactor = None;
    if !rest.is_one() && rest != BigUint::from(0u32) {
        let limit = u128::from(TRIAL_BOUND) * u128::from(TRIAL_BOUND);
        match rest.to_u128() {
            // no factor up to sqrt(rest): prime
            Some(r) if r <= limit || u128::from(d) * u128::from(d) > r => {
                primes.push(r as u64);
            }
            _ => cofactor = Some(rest),
        }
    }
    Factorization { primes, cofactor }
}
