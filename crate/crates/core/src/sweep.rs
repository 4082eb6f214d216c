//! SNR sweeps of the gap between the outer bound and the 3WC achievable
//! region, grouped and ungrouped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::cap_hat_unchecked as chat;
use crate::error::{Error, Result};
use crate::polytope::{per_dimension_gap, GapReport};
use crate::regions::{admissible_n3, lemma1_outer, prop2_3wc_region, prop2_counts};
use crate::scalar::Scalar;
use crate::types::{Convention, SnrTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum N3Policy {
    MinInWindow,
    MaxInWindow,
    All,
}

impl std::str::FromStr for N3Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" | "min-in-window" => Ok(N3Policy::MinInWindow),
            "max" | "max-in-window" => Ok(N3Policy::MaxInWindow),
            "all" => Ok(N3Policy::All),
            _ => Err(Error::config(format!("unknown N3 policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct SweepPoint<T> {
    pub s: SnrTriple<T>,
    pub n3_choices: Vec<i64>,
    /// `None` on a skipped point.
    pub n3: Option<u32>,
    pub gap_grouped: Option<GapReport<T>>,
    pub gap_ungrouped: Option<GapReport<T>>,
    pub ungrouped_prediction: Option<T>,
    pub skipped: bool,
}

/// Largest per-bound loss over bound order when nothing clamps: the outer
/// slack plus `N·Ĉ(3)` per matched bound, divided by the number of rates.
pub fn ungrouped_prediction<T: Scalar>(s: &SnrTriple<T>, n3: u32) -> T {
    let (_, [n1, n2, n3]) = prop2_counts(s, n3);
    let c3 = chat(T::lit(3.0));
    let k = |x: u32| T::lit(x as f64);
    let losses = [k(n2), k(n2), k(n3), k(n3), k(n3 + n2 - n1), k(n3), k(n3), k(n3 + n2 - n1)];
    let slack = [1.5, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0];
    let order = [2.0, 2.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0];
    (0..8)
        .map(|i| (T::lit(slack[i]) + losses[i] * c3) / T::lit(order[i]))
        .fold(T::zero(), T::max)
}

/// Worst case of the grouped loss formulas: `max{(3/2 + 6Ĉ(3))/2, (2 + 9Ĉ(3))/3}`.
pub fn grouped_bound<T: Scalar>() -> T {
    let c3 = chat(T::lit(3.0));
    ((T::lit(1.5) + T::lit(6.0) * c3) / T::lit(2.0)).max((T::lit(2.0) + T::lit(9.0) * c3) / T::lit(3.0))
}

pub fn sweep_point<T: Scalar>(s: &SnrTriple<T>, n3: u32) -> Result<SweepPoint<T>> {
    let outer = lemma1_outer(s)?;
    let g = per_dimension_gap(&outer, &prop2_3wc_region(s, n3, true)?)?;
    let u = per_dimension_gap(&outer, &prop2_3wc_region(s, n3, false)?)?;
    Ok(SweepPoint {
        s: *s,
        n3_choices: admissible_n3(s),
        n3: Some(n3),
        gap_grouped: Some(g),
        gap_ungrouped: Some(u),
        ungrouped_prediction: Some(ungrouped_prediction(s, n3)),
        skipped: false,
    })
}

/// One point per (triple, chosen N3), in input order. Triples with an
/// empty window give a single skipped point.
pub fn sweep<T: Scalar>(grid: &[SnrTriple<T>], policy: N3Policy) -> Result<Vec<SweepPoint<T>>> {
    for s in grid {
        s.expect(Convention::ThreeWay)?;
    }
    let per: Vec<Result<Vec<SweepPoint<T>>>> = grid
        .par_iter()
        .map(|s| {
            let w = admissible_n3(s);
            let chosen: Vec<i64> = match policy {
                N3Policy::MinInWindow => w.first().copied().into_iter().collect(),
                N3Policy::MaxInWindow => w.last().copied().into_iter().collect(),
                N3Policy::All => w.clone(),
            };
            if chosen.is_empty() {
                return Ok(vec![SweepPoint {
                    s: *s,
                    n3_choices: w,
                    n3: None,
                    gap_grouped: None,
                    gap_ungrouped: None,
                    ungrouped_prediction: None,
                    skipped: true,
                }]);
            }
            chosen.into_iter().map(|n| sweep_point(s, n as u32)).collect()
        })
        .collect();
    let mut out = Vec::new();
    for p in per {
        out.extend(p?);
    }
    Ok(out)
}

/// Flat row for CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct SweepRow<T> {
    pub g1: T,
    pub g2: T,
    pub g3: T,
    #[serde(rename = "N3")]
    pub n3: Option<u32>,
    pub grouped: Option<bool>,
    pub exact_gap: Option<T>,
    pub sufficient_gap: Option<T>,
    pub skipped: bool,
}

/// Grouped row then ungrouped row per point; one row for a skipped point.
pub fn rows<T: Scalar>(points: &[SweepPoint<T>]) -> Vec<SweepRow<T>> {
    let mut out = Vec::new();
    for p in points {
        let base = SweepRow {
            g1: p.s.g1,
            g2: p.s.g2,
            g3: p.s.g3,
            n3: p.n3,
            grouped: None,
            exact_gap: None,
            sufficient_gap: None,
            skipped: p.skipped,
        };
        if p.skipped {
            out.push(base);
            continue;
        }
        for (grouped, g) in [(true, &p.gap_grouped), (false, &p.gap_ungrouped)] {
            let g = g.as_ref().expect("computed point has both gaps");
            out.push(SweepRow {
                grouped: Some(grouped),
                exact_gap: Some(g.exact_gap),
                sufficient_gap: g.sufficient_gap,
                ..base.clone()
            });
        }
    }
    out
}
