//! Laws for the increments `ξ_k`: the standard normal and symmetric discrete
//! variables whose moments agree with `N(0, 1)` up to a given index.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};
use statrs::function::erf::erfc_inv;
use thiserror::Error;

use crate::rng::PathStream;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IncrementError {
    #[error("weak order must be 1, 2 or 3, got {0}")]
    UnsupportedOrder(u32),
    #[error("unknown increment distribution `{0}` (expected gaussian, zero, d3, d5 or d7)")]
    UnknownName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IncrementDistribution {
    Gaussian,
    /// Point mass at zero.
    MatchUpTo1,
    /// `±1` with probability 1/2 each.
    MatchUpTo3,
    /// `±√3` with probability 1/6 each, `0` with probability 2/3.
    MatchUpTo5,
    /// `±√6` w.p. 1/30, `±1` w.p. 3/10, `0` w.p. 1/3.
    MatchUpTo7,
}

/// One atom of a discrete law. The value is `sign · √square`, which keeps the
/// surds `√3` and `√6` exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Atom {
    pub sign: i8,
    pub square: u32,
    pub probability: Ratio<i64>,
}

impl Atom {
    const fn new(sign: i8, square: u32, num: i64, den: i64) -> Self {
        Self {
            sign,
            square,
            probability: Ratio::new_raw(num, den),
        }
    }

    pub fn value(&self) -> f64 {
        f64::from(self.sign) * f64::from(self.square).sqrt()
    }
}

const ATOMS_1: [Atom; 1] = [Atom::new(0, 0, 1, 1)];
const ATOMS_3: [Atom; 2] = [Atom::new(-1, 1, 1, 2), Atom::new(1, 1, 1, 2)];
const ATOMS_5: [Atom; 3] = [
    Atom::new(-1, 3, 1, 6),
    Atom::new(0, 0, 2, 3),
    Atom::new(1, 3, 1, 6),
];
const ATOMS_7: [Atom; 5] = [
    Atom::new(-1, 6, 1, 30),
    Atom::new(-1, 1, 3, 10),
    Atom::new(0, 0, 1, 3),
    Atom::new(1, 1, 3, 10),
    Atom::new(1, 6, 1, 30),
];

// Cumulative probabilities for inverse-CDF sampling of the discrete laws.
const CDF_3: [f64; 1] = [0.5];
const CDF_5: [f64; 2] = [1.0 / 6.0, 5.0 / 6.0];
const CDF_7: [f64; 4] = [1.0 / 30.0, 1.0 / 3.0, 2.0 / 3.0, 29.0 / 30.0];

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const SQRT_6: f64 = 2.449_489_742_783_178;

/// The `k`-th moment of `N(0, 1)`: `(k-1)!!` for even `k`, zero for odd `k`.
pub fn normal_moment(k: u32) -> BigInt {
    if k % 2 == 1 {
        return BigInt::zero();
    }
    (1..k).step_by(2).fold(BigInt::one(), |acc, j| acc * j)
}

impl IncrementDistribution {
    pub const ALL: [IncrementDistribution; 5] = [
        IncrementDistribution::Gaussian,
        IncrementDistribution::MatchUpTo1,
        IncrementDistribution::MatchUpTo3,
        IncrementDistribution::MatchUpTo5,
        IncrementDistribution::MatchUpTo7,
    ];

    /// Atoms of a discrete law; empty for the Gaussian.
    pub fn atoms(&self) -> &'static [Atom] {
        match self {
            IncrementDistribution::Gaussian => &[],
            IncrementDistribution::MatchUpTo1 => &ATOMS_1,
            IncrementDistribution::MatchUpTo3 => &ATOMS_3,
            IncrementDistribution::MatchUpTo5 => &ATOMS_5,
            IncrementDistribution::MatchUpTo7 => &ATOMS_7,
        }
    }

    /// Highest index up to which all moments agree with `N(0, 1)`; `None` for the
    /// Gaussian itself.
    pub fn matched_up_to(&self) -> Option<u32> {
        match self {
            IncrementDistribution::Gaussian => None,
            IncrementDistribution::MatchUpTo1 => Some(1),
            IncrementDistribution::MatchUpTo3 => Some(3),
            IncrementDistribution::MatchUpTo5 => Some(5),
            IncrementDistribution::MatchUpTo7 => Some(7),
        }
    }

    /// Exact `k`-th moment. Odd moments vanish by symmetry; even moments of the
    /// discrete laws are `Σ p_i (v_i²)^{k/2}`, a rational number.
    pub fn moment(&self, k: u32) -> BigRational {
        if k == 0 {
            return BigRational::one();
        }
        if k % 2 == 1 {
            return BigRational::zero();
        }
        match self {
            IncrementDistribution::Gaussian => BigRational::from_integer(normal_moment(k)),
            _ => self
                .atoms()
                .iter()
                .map(|atom| {
                    let p = BigRational::new(
                        BigInt::from(*atom.probability.numer()),
                        BigInt::from(*atom.probability.denom()),
                    );
                    p * BigRational::from_integer(BigInt::from(atom.square).pow(k / 2))
                })
                .fold(BigRational::zero(), |acc, x| acc + x),
        }
    }

    /// One draw, consuming exactly one uniform variate from the stream. The
    /// Gaussian uses the inverse normal CDF `-√2 · erfc⁻¹(2u)`.
    #[inline]
    pub fn sample(&self, stream: &mut PathStream) -> f64 {
        match self {
            IncrementDistribution::Gaussian => {
                let u = stream.next_uniform();
                -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
            }
            IncrementDistribution::MatchUpTo1 => 0.0,
            IncrementDistribution::MatchUpTo3 => {
                if stream.next_uniform() < CDF_3[0] {
                    -1.0
                } else {
                    1.0
                }
            }
            IncrementDistribution::MatchUpTo5 => {
                let u = stream.next_uniform();
                if u < CDF_5[0] {
                    -SQRT_3
                } else if u < CDF_5[1] {
                    0.0
                } else {
                    SQRT_3
                }
            }
            IncrementDistribution::MatchUpTo7 => {
                let u = stream.next_uniform();
                if u < CDF_7[0] {
                    -SQRT_6
                } else if u < CDF_7[1] {
                    -1.0
                } else if u < CDF_7[2] {
                    0.0
                } else if u < CDF_7[3] {
                    1.0
                } else {
                    SQRT_6
                }
            }
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            IncrementDistribution::Gaussian => "gaussian",
            IncrementDistribution::MatchUpTo1 => "zero",
            IncrementDistribution::MatchUpTo3 => "d3",
            IncrementDistribution::MatchUpTo5 => "d5",
            IncrementDistribution::MatchUpTo7 => "d7",
        }
    }
}

impl fmt::Display for IncrementDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for IncrementDistribution {
    type Err = IncrementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(IncrementDistribution::Gaussian),
            "zero" | "d1" => Ok(IncrementDistribution::MatchUpTo1),
            "d3" => Ok(IncrementDistribution::MatchUpTo3),
            "d5" => Ok(IncrementDistribution::MatchUpTo5),
            "d7" => Ok(IncrementDistribution::MatchUpTo7),
            other => Err(IncrementError::UnknownName(other.to_string())),
        }
    }
}

/// Laws for the two blocks of increments, `ξ_1..ξ_m` and `ξ_{m+1}..ξ_{2m}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncrementPair {
    pub first: IncrementDistribution,
    pub second: IncrementDistribution,
}

impl IncrementPair {
    pub const GAUSSIAN: IncrementPair = IncrementPair {
        first: IncrementDistribution::Gaussian,
        second: IncrementDistribution::Gaussian,
    };

    pub fn new(first: IncrementDistribution, second: IncrementDistribution) -> Self {
        Self { first, second }
    }

    /// The pair selected by a single CLI name: `gaussian` and `zero` apply to both
    /// blocks, `dK` selects the minimal discrete pair whose first block is `dK`.
    pub fn from_selector(name: &str) -> Result<Self, IncrementError> {
        let first: IncrementDistribution = name.parse()?;
        Ok(match first {
            IncrementDistribution::MatchUpTo3 => required_distributions(1)?,
            IncrementDistribution::MatchUpTo5 => required_distributions(2)?,
            IncrementDistribution::MatchUpTo7 => required_distributions(3)?,
            other => IncrementPair::new(other, other),
        })
    }
}

/// Minimal discrete laws for weak order `p`: the first block must match `N(0,1)`
/// up to moment `2p+1`, the second up to `2p-1`.
pub fn required_distributions(p: u32) -> Result<IncrementPair, IncrementError> {
    use IncrementDistribution::*;
    match p {
        1 => Ok(IncrementPair::new(MatchUpTo3, MatchUpTo1)),
        2 => Ok(IncrementPair::new(MatchUpTo5, MatchUpTo3)),
        3 => Ok(IncrementPair::new(MatchUpTo7, MatchUpTo5)),
        other => Err(IncrementError::UnsupportedOrder(other)),
    }
}
