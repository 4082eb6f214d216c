use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Node index: 1, 2 or 3.
pub type User = u8;

/// Directed message `src -> dst`, written `R_{dst,src}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction {
    pub dst: User,
    pub src: User,
}

impl Direction {
    /// Canonical order: R21, R31, R12, R32, R13, R23.
    pub const ALL: [Direction; 6] = [
        Direction { dst: 2, src: 1 },
        Direction { dst: 3, src: 1 },
        Direction { dst: 1, src: 2 },
        Direction { dst: 3, src: 2 },
        Direction { dst: 1, src: 3 },
        Direction { dst: 2, src: 3 },
    ];

    pub fn new(dst: User, src: User) -> Result<Self> {
        if !(1..=3).contains(&dst) || !(1..=3).contains(&src) || dst == src {
            return Err(Error::domain(format!("no direction {src}->{dst}")));
        }
        Ok(Direction { dst, src })
    }

    /// Position in the canonical order.
    pub fn index(self) -> usize {
        match (self.dst, self.src) {
            (2, 1) => 0,
            (3, 1) => 1,
            (1, 2) => 2,
            (3, 2) => 3,
            (1, 3) => 4,
            (2, 3) => 5,
            _ => unreachable!("directions are validated on construction"),
        }
    }

    pub fn from_index(i: usize) -> Direction {
        Direction::ALL[i]
    }

    /// Rate label such as `R21`.
    pub fn label(self) -> String {
        format!("R{}{}", self.dst, self.src)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}{}", self.dst, self.src)
    }
}

/// Which ordering the SNR triple follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    /// 3-way channel: g3 >= g2 >= g1.
    ThreeWay,
    /// Y-channel obtained by the delta-Y transformation: g1 >= g2 >= g3.
    Ystar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct SnrTriple<T> {
    pub g1: T,
    pub g2: T,
    pub g3: T,
    pub tag: Convention,
}

impl<T: Scalar> SnrTriple<T> {
    pub fn new(g1: T, g2: T, g3: T, tag: Convention) -> Result<Self> {
        validate_snr(g1, g2, g3, tag)
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.g1, self.g2, self.g3]
    }

    pub(crate) fn expect(&self, tag: Convention) -> Result<()> {
        if self.tag != tag {
            return Err(Error::Ordering {
                convention: tag,
                detail: format!("triple is tagged {:?}", self.tag),
            });
        }
        validate_snr(self.g1, self.g2, self.g3, tag).map(|_| ())
    }
}

pub fn validate_snr<T: Scalar>(g1: T, g2: T, g3: T, tag: Convention) -> Result<SnrTriple<T>> {
    for (name, g) in [("g1", g1), ("g2", g2), ("g3", g3)] {
        if !(g > T::zero()) || !g.is_finite() {
            return Err(Error::domain(format!("{name} must be positive and finite, got {g}")));
        }
    }
    let ok = match tag {
        Convention::ThreeWay => g3 >= g2 && g2 >= g1,
        Convention::Ystar => g1 >= g2 && g2 >= g3,
    };
    if !ok {
        let detail = match tag {
            Convention::ThreeWay => format!("need g3 >= g2 >= g1, got ({g1}, {g2}, {g3})"),
            Convention::Ystar => format!("need g1 >= g2 >= g3, got ({g1}, {g2}, {g3})"),
        };
        return Err(Error::Ordering {
            convention: tag,
            detail,
        });
    }
    Ok(SnrTriple { g1, g2, g3, tag })
}

/// Six nonnegative directed rates in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct RateTuple<T>(pub [T; 6]);

impl<T: Scalar> RateTuple<T> {
    pub fn new(r: [T; 6]) -> Result<Self> {
        if let Some(x) = r.iter().find(|x| !(**x >= T::zero()) || !x.is_finite()) {
            return Err(Error::domain(format!("rate {x} is not a nonnegative number")));
        }
        Ok(RateTuple(r))
    }

    pub fn zero() -> Self {
        RateTuple([T::zero(); 6])
    }

    pub fn get(&self, d: Direction) -> T {
        self.0[d.index()]
    }
}
