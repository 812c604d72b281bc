//! Ring-axiom verification for 8-bit intensities under wrapping arithmetic.
//!
//! Operation tables are checked through [`RingOps`], whose operations
//! return `u32` so that closure (every result in `0..256`) is a real check
//! and a corrupted table can be detected. [`Z256`] is the actual intensity
//! ring; [`MutatedOps`] overrides one table entry of another implementation.

use std::fmt;
use std::ops::{Add, Mul, Neg};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

/// An intensity treated as an element of Z/256.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct IntensityElement(pub u8);

impl Add for IntensityElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0.wrapping_add(rhs.0))
    }
}

impl Mul for IntensityElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0.wrapping_mul(rhs.0))
    }
}

impl Neg for IntensityElement {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.wrapping_neg())
    }
}

pub fn add(a: IntensityElement, b: IntensityElement) -> IntensityElement {
    a + b
}

pub fn mul(a: IntensityElement, b: IntensityElement) -> IntensityElement {
    a * b
}

pub fn neg(a: IntensityElement) -> IntensityElement {
    -a
}

pub trait RingOps: Sync {
    fn add(&self, a: u8, b: u8) -> u32;
    fn mul(&self, a: u8, b: u8) -> u32;
    fn neg(&self, a: u8) -> u32;
    fn zero(&self) -> u8 {
        0
    }
    fn one(&self) -> u8 {
        1
    }
}

/// Z/256 with operations reduced modulo 256.
#[derive(Debug, Clone, Copy, Default)]
pub struct Z256;

impl RingOps for Z256 {
    fn add(&self, a: u8, b: u8) -> u32 {
        (u32::from(a) + u32::from(b)) % 256
    }
    fn mul(&self, a: u8, b: u8) -> u32 {
        (u32::from(a) * u32::from(b)) % 256
    }
    fn neg(&self, a: u8) -> u32 {
        (256 - u32::from(a)) % 256
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableOp {
    Add,
    Mul,
}

/// Wraps a ring with one overridden entry, `op(a, b) = value`.
#[derive(Debug, Clone)]
pub struct MutatedOps<R> {
    pub base: R,
    pub op: TableOp,
    pub a: u8,
    pub b: u8,
    pub value: u32,
}

impl<R: RingOps> RingOps for MutatedOps<R> {
    fn add(&self, a: u8, b: u8) -> u32 {
        if self.op == TableOp::Add && (a, b) == (self.a, self.b) {
            self.value
        } else {
            self.base.add(a, b)
        }
    }
    fn mul(&self, a: u8, b: u8) -> u32 {
        if self.op == TableOp::Mul && (a, b) == (self.a, self.b) {
            self.value
        } else {
            self.base.mul(a, b)
        }
    }
    fn neg(&self, a: u8) -> u32 {
        self.base.neg(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    AdditiveClosure,
    AdditiveAssociativity,
    AdditiveCommutativity,
    AdditiveIdentity,
    AdditiveInverse,
    MultiplicativeClosure,
    MultiplicativeAssociativity,
    LeftDistributivity,
    RightDistributivity,
    MultiplicativeIdentity,
    MultiplicativeCommutativity,
}

impl Axiom {
    pub const ALL: [Axiom; 11] = [
        Axiom::AdditiveClosure,
        Axiom::AdditiveAssociativity,
        Axiom::AdditiveCommutativity,
        Axiom::AdditiveIdentity,
        Axiom::AdditiveInverse,
        Axiom::MultiplicativeClosure,
        Axiom::MultiplicativeAssociativity,
        Axiom::LeftDistributivity,
        Axiom::RightDistributivity,
        Axiom::MultiplicativeIdentity,
        Axiom::MultiplicativeCommutativity,
    ];

    /// Part of the ring definition. Identity and commutativity of
    /// multiplication are extra properties Z/256 happens to have.
    pub fn required(self) -> bool {
        !matches!(
            self,
            Axiom::MultiplicativeIdentity | Axiom::MultiplicativeCommutativity
        )
    }

    pub fn arity(self) -> usize {
        match self {
            Axiom::AdditiveIdentity | Axiom::AdditiveInverse | Axiom::MultiplicativeIdentity => 1,
            Axiom::AdditiveClosure
            | Axiom::AdditiveCommutativity
            | Axiom::MultiplicativeClosure
            | Axiom::MultiplicativeCommutativity => 2,
            Axiom::AdditiveAssociativity
            | Axiom::MultiplicativeAssociativity
            | Axiom::LeftDistributivity
            | Axiom::RightDistributivity => 3,
        }
    }

    fn holds<R: RingOps + ?Sized>(self, ring: &R, a: u8, b: u8, c: u8) -> bool {
        let e = |x: u32| u8::try_from(x).ok();
        let add = |x: u8, y: u8| e(ring.add(x, y));
        let mul = |x: u8, y: u8| e(ring.mul(x, y));
        let (zero, one) = (ring.zero(), ring.one());
        let eval = || -> Option<bool> {
            Some(match self {
                Axiom::AdditiveClosure => ring.add(a, b) < 256,
                Axiom::MultiplicativeClosure => ring.mul(a, b) < 256,
                Axiom::AdditiveAssociativity => add(add(a, b)?, c)? == add(a, add(b, c)?)?,
                Axiom::AdditiveCommutativity => add(a, b)? == add(b, a)?,
                Axiom::AdditiveIdentity => add(a, zero)? == a && add(zero, a)? == a,
                Axiom::AdditiveInverse => {
                    let n = e(ring.neg(a))?;
                    add(a, n)? == zero && add(n, a)? == zero
                }
                Axiom::MultiplicativeAssociativity => mul(mul(a, b)?, c)? == mul(a, mul(b, c)?)?,
                Axiom::LeftDistributivity => mul(a, add(b, c)?)? == add(mul(a, b)?, mul(a, c)?)?,
                Axiom::RightDistributivity => mul(add(a, b)?, c)? == add(mul(a, c)?, mul(b, c)?)?,
                Axiom::MultiplicativeIdentity => mul(a, one)? == a && mul(one, a)? == a,
                Axiom::MultiplicativeCommutativity => mul(a, b)? == mul(b, a)?,
            })
        };
        // An out-of-range intermediate cannot be fed back in; count it as a failure.
        eval().unwrap_or(false)
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).expect("unit variant serializes");
        f.write_str(name.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckMode {
    /// Every element, pair and triple.
    Exhaustive,
    /// `n` random triples; unary and binary axioms use their prefixes.
    Sampled { n: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub required: bool,
    pub checked: u64,
    pub failures: u64,
    /// First failing tuple in lexicographic (exhaustive) or draw (sampled) order.
    pub first_counterexample: Option<Vec<u8>>,
}

impl AxiomCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub mode: CheckMode,
    pub checks: Vec<AxiomCheck>,
    /// Every required axiom passed.
    pub is_ring: bool,
}

impl AxiomReport {
    pub fn check(&self, axiom: Axiom) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.axiom == axiom)
    }

    pub fn total_counterexamples(&self) -> u64 {
        self.checks.iter().map(|c| c.failures).sum()
    }
}

#[derive(Default, Clone)]
struct Tally {
    checked: u64,
    failures: u64,
    first: Option<Vec<u8>>,
}

impl Tally {
    fn record(&mut self, ok: bool, tuple: &[u8]) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(tuple.to_vec());
            }
        }
    }

    /// Combines tallies of consecutive shards, keeping the earliest failure.
    fn merge(mut self, later: Tally) -> Tally {
        self.checked += later.checked;
        self.failures += later.failures;
        if self.first.is_none() {
            self.first = later.first;
        }
        self
    }
}

fn exhaustive<R: RingOps + ?Sized>(ring: &R, axiom: Axiom) -> Tally {
    let shards: Vec<Tally> = (0..=255u8)
        .into_par_iter()
        .map(|a| {
            let mut t = Tally::default();
            match axiom.arity() {
                1 => t.record(axiom.holds(ring, a, 0, 0), &[a]),
                2 => {
                    for b in 0..=255u8 {
                        t.record(axiom.holds(ring, a, b, 0), &[a, b]);
                    }
                }
                _ => {
                    for b in 0..=255u8 {
                        for c in 0..=255u8 {
                            t.record(axiom.holds(ring, a, b, c), &[a, b, c]);
                        }
                    }
                }
            }
            t
        })
        .collect();
    shards.into_iter().fold(Tally::default(), Tally::merge)
}

fn sampled<R: RingOps + ?Sized>(ring: &R, axiom: Axiom, triples: &[[u8; 3]]) -> Tally {
    let mut t = Tally::default();
    for &[a, b, c] in triples {
        let tuple = &[a, b, c][..axiom.arity()];
        t.record(axiom.holds(ring, a, b, c), tuple);
    }
    t
}

pub fn verify_with<R: RingOps + ?Sized>(ring: &R, mode: CheckMode) -> AxiomReport {
    let triples: Vec<[u8; 3]> = match mode {
        CheckMode::Exhaustive => Vec::new(),
        CheckMode::Sampled { n, seed } => {
            let mut rng = SplitMix64::new(seed);
            (0..n)
                .map(|_| {
                    let x = rng.next_u64();
                    [x as u8, (x >> 8) as u8, (x >> 16) as u8]
                })
                .collect()
        }
    };
    let checks: Vec<AxiomCheck> = Axiom::ALL
        .iter()
        .map(|&axiom| {
            let tally = match mode {
                CheckMode::Exhaustive => exhaustive(ring, axiom),
                CheckMode::Sampled { .. } => sampled(ring, axiom, &triples),
            };
            AxiomCheck {
                axiom,
                required: axiom.required(),
                checked: tally.checked,
                failures: tally.failures,
                first_counterexample: tally.first,
            }
        })
        .collect();
    let is_ring = checks.iter().filter(|c| c.required).all(AxiomCheck::passed);
    AxiomReport {
        mode,
        checks,
        is_ring,
    }
}

/// Checks the intensity ring Z/256.
pub fn verify_ring_axioms(mode: CheckMode) -> AxiomReport {
    verify_with(&Z256, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_examples() {
        assert_eq!(
            add(IntensityElement(200), IntensityElement(100)),
            IntensityElement(44)
        );
        for v in 0..=255u8 {
            let a = IntensityElement(v);
            assert_eq!(add(a, neg(a)), IntensityElement(0));
            assert_eq!(mul(a, IntensityElement(1)), a);
        }
    }

    #[test]
    fn elements_agree_with_table() {
        for a in 0..=255u8 {
            for b in (0..=255u8).step_by(7) {
                let (x, y) = (IntensityElement(a), IntensityElement(b));
                assert_eq!(u32::from((x + y).0), Z256.add(a, b));
                assert_eq!(u32::from((x * y).0), Z256.mul(a, b));
            }
            assert_eq!(u32::from((-IntensityElement(a)).0), Z256.neg(a));
        }
    }

    #[test]
    fn sampled_passes() {
        let report = verify_ring_axioms(CheckMode::Sampled { n: 1000, seed: 17 });
        assert!(report.is_ring);
        assert_eq!(report.total_counterexamples(), 0);
        assert!(report.checks.iter().all(|c| c.checked == 1000));
    }

    #[test]
    fn mutated_add_entry_is_pinpointed() {
        let ring = MutatedOps {
            base: Z256,
            op: TableOp::Add,
            a: 3,
            b: 5,
            value: 9,
        };
        let report = verify_with(&ring, CheckMode::Exhaustive);
        assert!(!report.is_ring);
        let comm = report.check(Axiom::AdditiveCommutativity).unwrap();
        assert_eq!(comm.failures, 2);
        assert_eq!(comm.first_counterexample.as_deref(), Some(&[3u8, 5][..]));
        assert!(report.check(Axiom::AdditiveClosure).unwrap().passed());
        // (1 + 2) + 5 goes through the bad entry, 1 + (2 + 5) does not. With
        // a = 0 both sides agree, so (1, 2, 5) is the first failing triple.
        let assoc = report.check(Axiom::AdditiveAssociativity).unwrap();
        assert_eq!(
            assoc.first_counterexample.as_deref(),
            Some(&[1u8, 2, 5][..])
        );
    }

    #[test]
    fn out_of_range_entry_breaks_closure() {
        let ring = MutatedOps {
            base: Z256,
            op: TableOp::Mul,
            a: 200,
            b: 7,
            value: 300,
        };
        let report = verify_with(&ring, CheckMode::Exhaustive);
        let closure = report.check(Axiom::MultiplicativeClosure).unwrap();
        assert_eq!(closure.failures, 1);
        assert_eq!(
            closure.first_counterexample.as_deref(),
            Some(&[200u8, 7][..])
        );
    }

    #[test]
    fn display_names() {
        assert_eq!(Axiom::LeftDistributivity.to_string(), "left_distributivity");
    }
}
