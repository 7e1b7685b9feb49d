//! Guarded affine rules and the single-step map.
//!
//! A program is an ordered list of rules. The first is always the halving
//! rule for even inputs, the last is the catch-all `else`, and in between sit
//! `mod d` rules that fire on odd multiples of `d`. Every odd-branch rule maps
//! `n` to `(q * (n / r) + c) / 2`.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::Num;

/// Multipliers and divisors are kept below this so native arithmetic on
/// 64-bit trajectory values cannot overflow 128 bits.
pub const MAX_COEFFICIENT: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Guard {
    Even,
    DivisibleBy(u64),
    Else,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StepRule {
    pub guard: Guard,
    /// q
    pub multiplier: u64,
    /// r, either 1 or the guard divisor
    pub divisor: u64,
    /// c, +1 or -1 for odd-branch rules
    pub offset: i64,
}

impl StepRule {
    pub const fn halve() -> StepRule {
        StepRule {
            guard: Guard::Even,
            multiplier: 1,
            divisor: 1,
            offset: 0,
        }
    }

    pub const fn divisible(d: u64, multiplier: u64, divisor: u64, offset: i64) -> StepRule {
        StepRule {
            guard: Guard::DivisibleBy(d),
            multiplier,
            divisor,
            offset,
        }
    }

    pub const fn otherwise(multiplier: u64, offset: i64) -> StepRule {
        StepRule {
            guard: Guard::Else,
            multiplier,
            divisor: 1,
            offset,
        }
    }

    /// Asymptotic growth of one application: 1/2 for halving, q/(2r) otherwise.
    pub fn growth_factor(&self) -> Ratio<u64> {
        match self.guard {
            Guard::Even => Ratio::new(1, 2),
            _ => Ratio::new(self.multiplier, 2 * self.divisor),
        }
    }

    fn apply_big(&self, n: &mut BigUint) {
        if self.guard == Guard::Even {
            *n >>= 1u32;
            return;
        }
        if self.divisor > 1 {
            *n /= self.divisor;
        }
        *n *= self.multiplier;
        if self.offset > 0 {
            *n += 1u32;
        } else {
            *n -= 1u32;
        }
        *n >>= 1u32;
    }
}

/// A single violated invariant, with the index of the offending rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    FirstRuleNotEven,
    MissingElse,
    RuleAfterElse { index: usize },
    MisplacedEven { index: usize },
    HalvingAction { index: usize },
    DivisorTooSmall { index: usize, divisor: u64 },
    EvenGuardDivisor { index: usize, divisor: u64 },
    DuplicateDivisor { index: usize, divisor: u64 },
    EvenMultiplier { index: usize, multiplier: u64 },
    DenominatorNotAllowed { index: usize, divisor: u64 },
    OffsetNotUnit { index: usize, offset: i64 },
    MapsToZero { index: usize },
    CoefficientTooLarge { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            Empty => write!(f, "program has no rules"),
            FirstRuleNotEven => write!(f, "first rule must be `even:/2`"),
            MissingElse => write!(f, "last rule must be an `else` rule"),
            RuleAfterElse { index } => write!(f, "rule {index}: no rule may follow `else`"),
            MisplacedEven { index } => write!(f, "rule {index}: `even` is only allowed first"),
            HalvingAction { index } => write!(f, "rule {index}: the even rule must halve"),
            DivisorTooSmall { index, divisor } => {
                write!(f, "rule {index}: guard divisor {divisor} must be at least 3")
            }
            EvenGuardDivisor { index, divisor } => {
                write!(f, "rule {index}: guard divisor {divisor} must be odd")
            }
            DuplicateDivisor { index, divisor } => {
                write!(f, "rule {index}: guard divisor {divisor} is used twice")
            }
            EvenMultiplier { index, multiplier } => {
                write!(f, "rule {index}: multiplier must be odd, got {multiplier}")
            }
            DenominatorNotAllowed { index, divisor } => write!(
                f,
                "rule {index}: r must be 1 or the guard divisor, got {divisor}"
            ),
            OffsetNotUnit { index, offset } => {
                write!(f, "rule {index}: offset must be +1 or -1, got {offset}")
            }
            MapsToZero { index } => write!(f, "rule {index}: (1n-1)/2 maps some inputs to 0"),
            CoefficientTooLarge { index } => {
                write!(f, "rule {index}: coefficients must be below {MAX_COEFFICIENT}")
            }
        }
    }
}

/// Returns every violated invariant; an empty list means `step` is total and
/// integer-valued on the positive integers.
pub fn validate_rules(rules: &[StepRule]) -> Vec<Violation> {
    let mut out = Vec::new();
    if rules.is_empty() {
        out.push(Violation::Empty);
        return out;
    }
    if rules[0].guard != Guard::Even {
        out.push(Violation::FirstRuleNotEven);
    }
    if rules.last().map(|r| r.guard) != Some(Guard::Else) {
        out.push(Violation::MissingElse);
    }
    let mut seen_else = false;
    let mut divisors = Vec::new();
    for (index, rule) in rules.iter().enumerate() {
        if seen_else {
            out.push(Violation::RuleAfterElse { index });
        }
        match rule.guard {
            Guard::Even => {
                if index != 0 {
                    out.push(Violation::MisplacedEven { index });
                }
                if *rule != StepRule::halve() {
                    out.push(Violation::HalvingAction { index });
                }
                continue;
            }
            Guard::Else => seen_else = true,
            Guard::DivisibleBy(d) => {
                if d < 3 {
                    out.push(Violation::DivisorTooSmall { index, divisor: d });
                } else if d % 2 == 0 {
                    out.push(Violation::EvenGuardDivisor { index, divisor: d });
                }
                if divisors.contains(&d) {
                    out.push(Violation::DuplicateDivisor { index, divisor: d });
                }
                divisors.push(d);
            }
        }
        if rule.multiplier >= MAX_COEFFICIENT || rule.divisor >= MAX_COEFFICIENT {
            out.push(Violation::CoefficientTooLarge { index });
        }
        if rule.multiplier % 2 == 0 {
            out.push(Violation::EvenMultiplier {
                index,
                multiplier: rule.multiplier,
            });
        }
        let allowed = match rule.guard {
            Guard::DivisibleBy(d) => rule.divisor == 1 || rule.divisor == d,
            _ => rule.divisor == 1,
        };
        if !allowed {
            out.push(Violation::DenominatorNotAllowed {
                index,
                divisor: rule.divisor,
            });
        }
        if rule.offset != 1 && rule.offset != -1 {
            out.push(Violation::OffsetNotUnit {
                index,
                offset: rule.offset,
            });
        } else if rule.multiplier == 1 && rule.offset == -1 {
            out.push(Violation::MapsToZero { index });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    id: String,
    rules: Vec<StepRule>,
    /// Common multiple of the guard divisors, when one remainder can stand
    /// in for all of them.
    guard_modulus: Option<u64>,
}

fn guard_modulus(rules: &[StepRule]) -> Option<u64> {
    let mut m = 1u64;
    let mut guards = 0;
    for rule in rules {
        if let Guard::DivisibleBy(d) = rule.guard {
            m = m.lcm(&d);
            guards += 1;
            if m > u64::from(u32::MAX) {
                return None;
            }
        }
    }
    (guards > 1).then_some(m)
}

impl Program {
    pub fn new(id: impl Into<String>, rules: Vec<StepRule>) -> Result<Program> {
        let violations = validate_rules(&rules);
        if !violations.is_empty() {
            return Err(Error::InvalidProgram(
                violations.iter().map(ToString::to_string).collect(),
            ));
        }
        Ok(Program::new_unchecked(id, rules))
    }

    /// Builds a program without checking it. Only `validate_program` and
    /// tests should see such values.
    pub fn new_unchecked(id: impl Into<String>, rules: Vec<StepRule>) -> Program {
        Program {
            id: id.into(),
            guard_modulus: guard_modulus(&rules),
            rules,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn rules(&self) -> &[StepRule] {
        &self.rules
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Index of the rule that fires on `n`.
    pub fn rule_for(&self, n: &Num) -> usize {
        if n.is_even() {
            return 0;
        }
        let last = self.rules.len() - 1;
        let residue = self.guard_modulus.map(|m| n.rem_small(m));
        for (i, rule) in self.rules[1..last].iter().enumerate() {
            if let Guard::DivisibleBy(d) = rule.guard {
                let r = match residue {
                    Some(r) => r % d,
                    None => n.rem_small(d),
                };
                if r == 0 {
                    return i + 1;
                }
            }
        }
        last
    }

    /// Applies one step in place and returns the index of the fired rule.
    pub fn step_in_place(&self, n: &mut Num) -> usize {
        match n {
            Num::Small(v) => {
                let v = *v;
                if v & 1 == 0 {
                    *n = Num::Small(v >> 1);
                    return 0;
                }
                if v >> 64 == 0 {
                    let (index, rule) = self.match_odd_u64(v as u64);
                    let quotient = u128::from(v as u64 / rule.divisor);
                    let t = u128::from(rule.multiplier) * quotient;
                    let t = if rule.offset > 0 { t + 1 } else { t - 1 };
                    *n = Num::Small(t >> 1);
                    return index;
                }
                let index = self.rule_for(n);
                let rule = &self.rules[index];
                let quotient = v / u128::from(rule.divisor);
                let next = u128::from(rule.multiplier)
                    .checked_mul(quotient)
                    .and_then(|t| {
                        if rule.offset > 0 {
                            t.checked_add(1)
                        } else {
                            Some(t - 1)
                        }
                    })
                    .map(|t| t >> 1);
                match next {
                    Some(t) => *n = Num::Small(t),
                    None => {
                        let mut big = BigUint::from(v);
                        rule.apply_big(&mut big);
                        *n = Num::from_big(big);
                    }
                }
                index
            }
            Num::Big(_) => {
                let index = self.rule_for(n);
                let Num::Big(b) = n else { unreachable!() };
                let mut big = std::mem::take(b);
                self.rules[index].apply_big(&mut big);
                *n = Num::from_big(big);
                index
            }
        }
    }

    fn match_odd_u64(&self, v: u64) -> (usize, &StepRule) {
        let last = self.rules.len() - 1;
        for (i, rule) in self.rules[1..last].iter().enumerate() {
            if let Guard::DivisibleBy(d) = rule.guard {
                if v.is_multiple_of(d) {
                    return (i + 1, rule);
                }
            }
        }
        (last, &self.rules[last])
    }

    /// One application of the map to a positive integer.
    pub fn step(&self, n: &BigUint) -> Result<BigUint> {
        if n.is_zero() {
            return Err(Error::NonPositive);
        }
        let mut v = Num::from(n);
        self.step_in_place(&mut v);
        Ok(v.into_big())
    }

    /// Which rule fires on `n` and its growth factor.
    pub fn classify_step(&self, n: &BigUint) -> Result<(usize, Ratio<u64>)> {
        if n.is_zero() {
            return Err(Error::NonPositive);
        }
        let index = self.rule_for(&Num::from(n));
        Ok((index, self.rules[index].growth_factor()))
    }
}

pub fn validate_program(program: &Program) -> std::result::Result<(), Vec<Violation>> {
    let v = validate_rules(program.rules());
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Sign order for the p9 family: which offset the `mod p` rule uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignOrder {
    /// `mod p: (3n-1)/2`, `else: (3n+1)/2`
    MinusPlus,
    /// `mod p: (3n+1)/2`, `else: (3n-1)/2`
    PlusMinus,
}

impl SignOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            SignOrder::MinusPlus => "-+",
            SignOrder::PlusMinus => "+-",
        }
    }
}

impl fmt::Display for SignOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SignOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<SignOrder> {
        match s {
            "-+" => Ok(SignOrder::MinusPlus),
            "+-" => Ok(SignOrder::PlusMinus),
            _ => Err(Error::InvalidParameter {
                program: "p9".into(),
                reason: format!("sign order must be -+ or +-, got `{s}`"),
            }),
        }
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d <= n / d {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn bad(program: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        program: program.into(),
        reason: reason.into(),
    }
}

fn expect_params(name: &str, params: &[i64], n: usize) -> Result<()> {
    if params.len() != n {
        return Err(bad(
            name,
            format!("expected {n} parameter(s), got {}", params.len()),
        ));
    }
    Ok(())
}

pub fn p1() -> Program {
    Program::new("p1", vec![StepRule::halve(), StepRule::otherwise(3, 1)]).expect("valid")
}

pub fn p1m() -> Program {
    Program::new("p1m", vec![StepRule::halve(), StepRule::otherwise(3, -1)]).expect("valid")
}

pub fn p2() -> Program {
    Program::new(
        "p2",
        vec![
            StepRule::halve(),
            StepRule::divisible(3, 7, 3, 1),
            StepRule::otherwise(5, 1),
        ],
    )
    .expect("valid")
}

pub fn p4(m: u64) -> Result<Program> {
    if m.is_multiple_of(2) {
        return Err(bad("p4", format!("m must be odd, got {m}")));
    }
    if m < 7 {
        return Err(bad("p4", format!("m must be at least 7, got {m}")));
    }
    Program::new(
        format!("p4:{m}"),
        vec![
            StepRule::halve(),
            StepRule::divisible(5, m, 5, 1),
            StepRule::otherwise(3, 1),
        ],
    )
}

/// The program that excludes the prime `p` from its sequences: every odd
/// prime below `p` divides out before the `p`-multiply.
pub fn p6(p: u64) -> Result<Program> {
    if ![5, 7, 11, 13].contains(&p) {
        return Err(bad(
            "p6",
            format!("excluded prime must be one of 5, 7, 11, 13, got {p}"),
        ));
    }
    let mut rules = vec![StepRule::halve()];
    rules.extend(
        (3..p)
            .filter(|&d| is_prime(d))
            .map(|d| StepRule::divisible(d, p, d, 1)),
    );
    rules.push(StepRule::otherwise(p, 1));
    Program::new(format!("p6:{p}"), rules)
}

pub fn p9(p: u64, order: SignOrder) -> Result<Program> {
    if p < 5 || !is_prime(p) {
        return Err(bad("p9", format!("p must be a prime >= 5, got {p}")));
    }
    let (guarded, other) = match order {
        SignOrder::MinusPlus => (-1, 1),
        SignOrder::PlusMinus => (1, -1),
    };
    Program::new(
        format!("p9:{p}:{}", order.as_str()),
        vec![
            StepRule::halve(),
            StepRule::divisible(p, 3, 1, guarded),
            StepRule::otherwise(3, other),
        ],
    )
}

/// Canonical named programs. `p9` takes the prime followed by `+1` for the
/// `-+` order or `-1` for `+-` (the sign of the `else` offset).
pub fn canonical_program(name: &str, params: &[i64]) -> Result<Program> {
    let positive = |v: i64| -> Result<u64> {
        u64::try_from(v).map_err(|_| bad(name, format!("parameter must be positive, got {v}")))
    };
    match name {
        "p1" => expect_params(name, params, 0).map(|_| p1()),
        "p1m" => expect_params(name, params, 0).map(|_| p1m()),
        "p2" => expect_params(name, params, 0).map(|_| p2()),
        "p4" => {
            expect_params(name, params, 1)?;
            p4(positive(params[0])?)
        }
        "p6" => {
            expect_params(name, params, 1)?;
            p6(positive(params[0])?)
        }
        "p9" => {
            expect_params(name, params, 2)?;
            let order = match params[1] {
                1 => SignOrder::MinusPlus,
                -1 => SignOrder::PlusMinus,
                s => return Err(bad(name, format!("sign must be +1 or -1, got {s}"))),
            };
            p9(positive(params[0])?, order)
        }
        _ => Err(Error::UnknownProgram(name.to_string())),
    }
}

/// Resolves a CLI program id: `p1`, `p1m`, `p2`, `p4:<m>`, `p6:<prime>`,
/// `p9:<p>:<-+|+->`, or `dsl:<rules>`.
pub fn program_from_id(id: &str) -> Result<Program> {
    if let Some(text) = id.strip_prefix("dsl:") {
        return crate::dsl::parse_program_dsl(text);
    }
    let parts: Vec<&str> = id.split(':').collect();
    let int = |s: &str| -> Result<u64> {
        s.parse::<u64>()
            .map_err(|_| bad(parts[0], format!("expected a positive integer, got `{s}`")))
    };
    match parts.as_slice() {
        ["p1"] => Ok(p1()),
        ["p1m"] => Ok(p1m()),
        ["p2"] => Ok(p2()),
        ["p4", m] => p4(int(m)?),
        ["p6", p] => p6(int(p)?),
        ["p9", p, order] => p9(int(p)?, order.parse()?),
        ["p4" | "p6" | "p9", ..] => Err(bad(parts[0], "wrong number of parameters")),
        _ => Err(Error::UnknownProgram(id.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(p: &Program, n: u64) -> u64 {
        p.step(&BigUint::from(n)).unwrap().try_into().unwrap()
    }

    #[test]
    fn canonical_shapes() {
        assert_eq!(
            canonical_program("p2", &[]).unwrap().rules(),
            &[
                StepRule::halve(),
                StepRule::divisible(3, 7, 3, 1),
                StepRule::otherwise(5, 1)
            ]
        );
        assert_eq!(
            canonical_program("p4", &[53]).unwrap().rules()[1],
            StepRule::divisible(5, 53, 5, 1)
        );
        assert_eq!(p6(7).unwrap().rules().len(), 4);
        assert_eq!(p6(13).unwrap().rules().len(), 6);
        assert_eq!(
            p9(11, SignOrder::PlusMinus).unwrap().rules()[1],
            StepRule::divisible(11, 3, 1, 1)
        );
    }

    #[test]
    fn p4_15_only_differs_by_redundant_clause() {
        let a = p4(15).unwrap();
        let b = p1();
        assert_eq!(a.rules().len(), 3);
        assert_eq!(a.rules()[0], b.rules()[0]);
        assert_eq!(a.rules()[2], b.rules()[1]);
    }

    #[test]
    fn canonical_errors() {
        assert!(matches!(
            canonical_program("p7", &[]),
            Err(Error::UnknownProgram(_))
        ));
        let err = canonical_program("p4", &[14]).unwrap_err();
        assert!(err.to_string().contains("m must be odd"), "{err}");
        assert!(canonical_program("p9", &[9, 1]).is_err());
        assert!(canonical_program("p6", &[17]).is_err());
        assert!(program_from_id("p4:14").is_err());
        assert!(program_from_id("p9:7:++").is_err());
        assert_eq!(program_from_id("p9:7:-+").unwrap().id(), "p9:7:-+");
    }

    #[test]
    fn step_examples() {
        assert_eq!(step(&p1(), 29), 44);
        assert_eq!(step(&p1(), 4), 2);
        assert_eq!(step(&p2(), 85), 213);
        assert_eq!(step(&p4(53).unwrap(), 25), 133);
        assert_eq!(p1().step(&BigUint::zero()), Err(Error::NonPositive));
    }

    #[test]
    fn classify_examples() {
        let c = |p: &Program, n: u64| p.classify_step(&BigUint::from(n)).unwrap();
        assert_eq!(c(&p1(), 29), (1, Ratio::new(3, 2)));
        assert_eq!(c(&p2(), 213), (1, Ratio::new(7, 6)));
        assert_eq!(c(&p4(53).unwrap(), 25), (1, Ratio::new(53, 10)));
        assert_eq!(c(&p1(), 8), (0, Ratio::new(1, 2)));
    }

    #[test]
    fn validation_reports_violations() {
        assert_eq!(validate_program(&p2()), Ok(()));
        let bad_offset =
            Program::new_unchecked("x", vec![StepRule::halve(), StepRule::otherwise(3, 2)]);
        let v = validate_program(&bad_offset).unwrap_err();
        assert_eq!(v, vec![Violation::OffsetNotUnit { index: 1, offset: 2 }]);
        assert!(v[0].to_string().contains("offset must be +1 or -1"));

        let bad_r = Program::new_unchecked(
            "x",
            vec![
                StepRule::halve(),
                StepRule::divisible(3, 7, 5, 1),
                StepRule::otherwise(5, 1),
            ],
        );
        let v = validate_program(&bad_r).unwrap_err();
        assert_eq!(
            v,
            vec![Violation::DenominatorNotAllowed {
                index: 1,
                divisor: 5
            }]
        );
        assert!(v[0].to_string().contains("r must be 1 or the guard divisor"));

        let shape = Program::new_unchecked(
            "x",
            vec![
                StepRule::otherwise(3, 1),
                StepRule::halve(),
                StepRule::divisible(3, 4, 3, 1),
                StepRule::divisible(3, 5, 3, 1),
            ],
        );
        let v = validate_program(&shape).unwrap_err();
        assert!(v.contains(&Violation::FirstRuleNotEven));
        assert!(v.contains(&Violation::MissingElse));
        assert!(v.contains(&Violation::MisplacedEven { index: 1 }));
        assert!(v.contains(&Violation::RuleAfterElse { index: 1 }));
        assert!(v.contains(&Violation::EvenMultiplier {
            index: 2,
            multiplier: 4
        }));
        assert!(v.contains(&Violation::DuplicateDivisor {
            index: 3,
            divisor: 3
        }));
    }

    #[test]
    fn zero_image_rejected() {
        let p = Program::new_unchecked("x", vec![StepRule::halve(), StepRule::otherwise(1, -1)]);
        assert_eq!(
            validate_program(&p).unwrap_err(),
            vec![Violation::MapsToZero { index: 1 }]
        );
    }

    #[test]
    fn overflow_promotes_to_big() {
        let n = BigUint::from(u128::MAX);
        let expected = (&n * 3u32 + 1u32) >> 1u32;
        assert_eq!(p1().step(&n).unwrap(), expected);
        let mut v = Num::Small(u128::MAX);
        p1().step_in_place(&mut v);
        assert!(matches!(v, Num::Big(_)));
        assert_eq!(v.to_big(), expected);
    }
}
