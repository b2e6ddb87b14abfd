//! Number-theoretic classification of exclusion distances.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{diophantine_solutions, LatticeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "case")]
pub enum CaseLabel {
    TA1,
    TA2,
    TB,
    HA1,
    HA2,
    HB,
    HC { dstar2: u64 },
    HExceptional,
    ZGeneric,
    NotAttainable,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseLabel::TA1 => "TA1",
            CaseLabel::TA2 => "TA2",
            CaseLabel::TB => "TB",
            CaseLabel::HA1 => "HA1",
            CaseLabel::HA2 => "HA2",
            CaseLabel::HB => "HB",
            CaseLabel::HC { .. } => "HC",
            CaseLabel::HExceptional => "HExceptional",
            CaseLabel::ZGeneric => "ZGeneric",
            CaseLabel::NotAttainable => "NotAttainable",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusSource {
    Lookup,
    Verified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlidingStatus {
    pub sliding: bool,
    pub source: StatusSource,
}

/// H2 values whose maximal packings are not (necessarily) sub-lattice packings.
pub const H2_EXCEPTIONAL: [u64; 10] = [1, 13, 16, 28, 49, 64, 67, 97, 157, 256];

pub const H2_SLIDING: [u64; 4] = [4, 7, 31, 133];

pub const Z2_SLIDING: [u64; 39] = [
    4, 8, 9, 18, 20, 29, 45, 72, 80, 90, 106, 121, 157, 160, 218, 281, 392, 521, 698, 821, 1042,
    1325, 1348, 1517, 1565, 2005, 2792, 3034, 3709, 4453, 4756, 6865, 11449, 12740, 13225, 15488,
    22784, 29890, 37970,
];

/// Prime factorization by trial division, ascending primes with exponents.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn is_loeschian(n: u64) -> bool {
    !diophantine_solutions(LatticeKind::A2, n).is_empty()
}

pub fn is_attainable(kind: LatticeKind, d2: u64) -> bool {
    d2 >= 1 && !diophantine_solutions(kind, d2).is_empty()
}

fn triangular_case(d2: u64) -> u8 {
    let split: Vec<u32> = factorize(d2)
        .into_iter()
        .filter(|&(p, _)| p % 3 == 1)
        .map(|(_, e)| e)
        .collect();
    match split.as_slice() {
        [] => 1,
        [1] => 2,
        _ => 3,
    }
}

pub fn classify(kind: LatticeKind, d2: u64) -> CaseLabel {
    if !is_attainable(kind, d2) {
        return CaseLabel::NotAttainable;
    }
    match kind {
        LatticeKind::A2 => match triangular_case(d2) {
            1 => CaseLabel::TA1,
            2 => CaseLabel::TA2,
            _ => CaseLabel::TB,
        },
        LatticeKind::H2 => {
            if H2_EXCEPTIONAL.contains(&d2) {
                CaseLabel::HExceptional
            } else if d2 % 3 == 0 {
                match triangular_case(d2) {
                    1 => CaseLabel::HA1,
                    2 => CaseLabel::HA2,
                    _ => CaseLabel::HB,
                }
            } else {
                CaseLabel::HC {
                    dstar2: next_loeschian_multiple_of_3(d2),
                }
            }
        }
        LatticeKind::Z2 => CaseLabel::ZGeneric,
    }
}

fn next_loeschian_multiple_of_3(d2: u64) -> u64 {
    let mut n = d2 + 1;
    while n % 3 != 0 || !is_loeschian(n) {
        n += 1;
    }
    n
}

/// Smallest Löschian number strictly above `d2` and divisible by 3.
pub fn dstar(d2: u64) -> Result<u64> {
    if d2 == 0 || !is_loeschian(d2) || d2 % 3 == 0 {
        return Err(Error::Domain(format!(
            "D*^2 is defined for attainable honeycomb values not divisible by 3, got {d2}"
        )));
    }
    Ok(next_loeschian_multiple_of_3(d2))
}

pub fn sliding_status(kind: LatticeKind, d2: u64) -> SlidingStatus {
    let sliding = match kind {
        LatticeKind::A2 => false,
        LatticeKind::H2 => H2_SLIDING.contains(&d2),
        LatticeKind::Z2 => Z2_SLIDING.contains(&d2),
    };
    SlidingStatus {
        sliding,
        source: StatusSource::Lookup,
    }
}

/// Short remark attached to reports for values with known peculiarities.
pub fn case_remark(kind: LatticeKind, d2: u64) -> Option<&'static str> {
    match (kind, d2) {
        (LatticeKind::H2, 67) => Some("two PGS classes, one of which is non-lattice"),
        (LatticeKind::H2, _) if H2_EXCEPTIONAL.contains(&d2) => {
            Some("unique PGS class, non-lattice; analysis limited to detection")
        }
        _ => None,
    }
}
