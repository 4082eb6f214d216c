//! Rate regions as explicit lists of linear bounds over the six directed rates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{cap_hat_unchecked as chat, cap_unchecked as cap};
use crate::error::{Error, Result};
use crate::scalar::{guarded_floor_ratio, Scalar};
use crate::types::{Convention, RateTuple, SnrTriple};

/// Coefficient patterns shared by every region, in this order:
/// R31+R32, R13+R23, R12+R13+R32, R12+R13+R23,
/// R21+R23+R13, R21+R23+R31, R31+R32+R21, R31+R32+R12.
pub const PATTERNS: [[u8; 6]; 8] = [
    [0, 1, 0, 1, 0, 0],
    [0, 0, 0, 0, 1, 1],
    [0, 0, 1, 1, 1, 0],
    [0, 0, 1, 0, 1, 1],
    [1, 0, 0, 0, 1, 1],
    [1, 1, 0, 0, 0, 1],
    [1, 1, 0, 1, 0, 0],
    [0, 1, 1, 1, 0, 0],
];

pub const PATTERN_LABELS: [&str; 8] = [
    "R31+R32",
    "R13+R23",
    "R12+R13+R32",
    "R12+R13+R23",
    "R21+R23+R13",
    "R21+R23+R31",
    "R31+R32+R21",
    "R31+R32+R12",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct LinearBound<T> {
    pub coeffs: [u8; 6],
    pub rhs: T,
    pub label: String,
}

impl<T: Scalar> LinearBound<T> {
    pub fn new(coeffs: [u8; 6], rhs: T, label: impl Into<String>) -> Result<Self> {
        if coeffs.iter().all(|&c| c == 0) || coeffs.iter().any(|&c| c > 1) {
            return Err(Error::domain("bound coefficients must be 0/1 and not all zero"));
        }
        if !rhs.is_finite() {
            return Err(Error::domain("bound rhs must be finite"));
        }
        Ok(LinearBound {
            coeffs,
            rhs,
            label: label.into(),
        })
    }

    /// Number of unit coefficients.
    pub fn order(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c == 1).count()
    }

    pub fn eval(&self, r: &[T; 6]) -> T {
        self.coeffs
            .iter()
            .zip(r)
            .fold(T::zero(), |acc, (&c, &x)| if c == 1 { acc + x } else { acc })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    Outer,
    Approx,
    Achievable,
    Parametrized,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionMeta {
    #[serde(rename = "N3", skip_serializing_if = "Option::is_none", default)]
    pub n3: Option<u32>,
    #[serde(rename = "N1_tilde", skip_serializing_if = "Option::is_none", default)]
    pub n1_tilde: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grouped: Option<bool>,
    /// Per-user sub-channel counts `(N1, N2, N3)` or `(Ñ1, Ñ2, Ñ3)`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<[u32; 3]>,
    /// Set when rhs constants are this crate's derivation rather than closed
    /// forms stated with the region.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub derived_constants: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Region<T> {
    pub snr: SnrTriple<T>,
    pub kind: RegionKind,
    pub bounds: Vec<LinearBound<T>>,
    pub meta: RegionMeta,
}

impl<T: Scalar> Region<T> {
    fn from_rhs(snr: SnrTriple<T>, kind: RegionKind, rhs: [T; 8], meta: RegionMeta) -> Self {
        let bounds = PATTERNS
            .iter()
            .zip(PATTERN_LABELS)
            .zip(rhs)
            .map(|((c, l), r)| LinearBound {
                coeffs: *c,
                rhs: r,
                label: l.to_string(),
            })
            .collect();
        Region {
            snr,
            kind,
            bounds,
            meta,
        }
    }

    pub fn rhs(&self) -> Vec<T> {
        self.bounds.iter().map(|b| b.rhs).collect()
    }

    pub fn contains(&self, r: &RateTuple<T>) -> bool {
        crate::polytope::contains(self, r)
    }

    /// Bound with the given coefficient pattern, if present.
    pub fn bound_for(&self, coeffs: &[u8; 6]) -> Option<&LinearBound<T>> {
        self.bounds.iter().find(|b| &b.coeffs == coeffs)
    }
}

fn clamp0<T: Scalar>(x: T) -> T {
    x.max(T::zero())
}

pub fn theorem1_region<T: Scalar>(s: &SnrTriple<T>) -> Result<Region<T>> {
    s.expect(Convention::ThreeWay)?;
    let c2 = chat(s.g2);
    let c3 = chat(s.g3);
    let c321 = chat(s.g3 * s.g2 / s.g1);
    Ok(Region::from_rhs(
        *s,
        RegionKind::Approx,
        [c2, c2, c3, c3, c321, c3, c3, c321],
        RegionMeta::default(),
    ))
}

pub fn lemma1_outer<T: Scalar>(s: &SnrTriple<T>) -> Result<Region<T>> {
    let t1 = theorem1_region(s)?;
    let slack = [1.5, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0];
    let mut rhs = [T::zero(); 8];
    for (i, b) in t1.bounds.iter().enumerate() {
        rhs[i] = b.rhs + T::lit(slack[i]);
    }
    Ok(Region::from_rhs(*s, RegionKind::Outer, rhs, RegionMeta::default()))
}

/// Integers strictly inside `(lo, hi)`, with a small guard so exact
/// integer endpoints stay excluded.
pub(crate) fn open_window_integers(lo: f64, hi: f64) -> Vec<i64> {
    const G: f64 = 1e-9;
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Vec::new();
    }
    let first = (lo + G).floor() as i64 + 1;
    let last = (hi - G).ceil() as i64 - 1;
    (first.max(1)..=last).collect()
}

/// Open window for Ñ1 in the Y-channel region.
pub fn prop1_window<T: Scalar>(s: &SnrTriple<T>) -> (f64, f64) {
    let [g1, _, g3] = s.as_array().map(|g| g.to_f64_lossy());
    (g1.ln() / g3.ln(), g1.log2())
}

/// Open window for N3 in the 3WC region.
pub fn prop2_window<T: Scalar>(s: &SnrTriple<T>) -> (f64, f64) {
    let [g1, _, g3] = s.as_array().map(|g| g.to_f64_lossy());
    (g3.ln() / g1.ln(), g3.ln() / 3f64.ln())
}

/// Every integer N3 strictly inside the 3WC window. May be empty.
pub fn admissible_n3<T: Scalar>(s: &SnrTriple<T>) -> Vec<i64> {
    let (lo, hi) = prop2_window(s);
    open_window_integers(lo, hi)
}

pub fn admissible_n1_tilde<T: Scalar>(s: &SnrTriple<T>) -> Vec<i64> {
    let (lo, hi) = prop1_window(s);
    open_window_integers(lo, hi)
}

/// Level counts `floor(log g_i / log gamma)` for a triple, given the level
/// count `n_top` of `top`.
pub(crate) fn level_counts<T: Scalar>(gs: [T; 3], top: T, n_top: u32) -> (T, [u32; 3]) {
    let gamma = top.powf(T::one() / T::lit(n_top as f64));
    let lg = gamma.ln();
    let counts = gs.map(|g| guarded_floor_ratio(g.ln(), lg).max(0) as u32);
    (gamma, counts)
}

pub fn prop1_y_region<T: Scalar>(s: &SnrTriple<T>, n1_tilde: u32) -> Result<Region<T>> {
    s.expect(Convention::Ystar)?;
    let (lo, hi) = prop1_window(s);
    let admissible = open_window_integers(lo, hi);
    if !admissible.contains(&(n1_tilde as i64)) {
        return Err(Error::Feasibility {
            param: "N1_tilde".into(),
            value: n1_tilde as i64,
            lo,
            hi,
            admissible,
        });
    }
    let (gamma, n) = level_counts(s.as_array(), s.g1, n1_tilde);
    if !(gamma > T::lit(2.0)) || n[1] < 1 || n[2] < 1 {
        return Err(Error::Internal {
            what: format!("window admitted N1_tilde={n1_tilde} but gamma={gamma}, counts={n:?}"),
        });
    }
    let half = T::lit(0.5);
    let a = clamp0(chat(s.g3) - half * T::lit(n[2] as f64));
    let b = clamp0(chat(s.g2) - half * T::lit(n[1] as f64));
    let c = clamp0(chat(s.g1) - half * T::lit(n[0] as f64));
    Ok(Region::from_rhs(
        *s,
        RegionKind::Achievable,
        [a, a, b, b, c, b, b, c],
        RegionMeta {
            n1_tilde: Some(n1_tilde),
            counts: Some(n),
            ..Default::default()
        },
    ))
}

/// Level counts `(N1, N2, N3)` and gamma for the 3WC region.
pub fn prop2_counts<T: Scalar>(s: &SnrTriple<T>, n3: u32) -> (T, [u32; 3]) {
    level_counts(s.as_array(), s.g3, n3)
}

pub fn prop2_3wc_region<T: Scalar>(s: &SnrTriple<T>, n3: u32, grouped: bool) -> Result<Region<T>> {
    s.expect(Convention::ThreeWay)?;
    let (lo, hi) = prop2_window(s);
    let admissible = open_window_integers(lo, hi);
    if !admissible.contains(&(n3 as i64)) {
        return Err(Error::Feasibility {
            param: "N3".into(),
            value: n3 as i64,
            lo,
            hi,
            admissible,
        });
    }
    let (_, [n1, n2, _]) = prop2_counts(s, n3);
    let c3 = chat(T::lit(3.0));
    let k = |x: u32| T::lit(x as f64);
    let (l2, l3, lx) = if grouped {
        (k(6), k(9), k(9))
    } else {
        (k(n2), k(n3), k(n3 + n2 - n1))
    };
    let a = clamp0(chat(s.g2) - l2 * c3);
    let b = clamp0(chat(s.g3) - l3 * c3);
    let c = clamp0(chat(s.g3 * s.g2 / s.g1) - lx * c3);
    Ok(Region::from_rhs(
        *s,
        RegionKind::Achievable,
        [a, a, b, b, c, b, b, c],
        RegionMeta {
            n3: Some(n3),
            grouped: Some(grouped),
            counts: Some([n1, n2, n3]),
            derived_constants: grouped,
            ..Default::default()
        },
    ))
}

/// Delta-Y transformation of a 3WC triple.
pub fn y_of_3wc<T: Scalar>(s: &SnrTriple<T>) -> Result<SnrTriple<T>> {
    s.expect(Convention::ThreeWay)?;
    Ok(SnrTriple {
        g1: s.g3 * s.g2 / s.g1,
        g2: s.g3,
        g3: s.g2,
        tag: Convention::Ystar,
    })
}

/// `max(0, Ĉ(g2) − C(g1))`. Pass `g1 = 0` for the no-direct-link limit.
pub fn adaptation_gap<T: Scalar>(g1: T, g2: T) -> Result<T> {
    if !(g1 >= T::zero()) || !(g2 > T::zero()) {
        return Err(Error::domain(format!("adaptation_gap needs g1 >= 0, g2 > 0; got {g1}, {g2}")));
    }
    Ok(clamp0(chat(g2) - cap(g1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecialKind {
    MacConferencing,
    MacInband,
    BcCoop,
}

impl std::str::FromStr for SpecialKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mac-conferencing" | "MacConferencing" => Ok(SpecialKind::MacConferencing),
            "mac-inband" | "MacInband" => Ok(SpecialKind::MacInband),
            "bc-coop" | "BcCoop" => Ok(SpecialKind::BcCoop),
            other => Err(Error::config(format!("unknown special-case kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct SpecialCaseResult<T> {
    pub kind: SpecialKind,
    /// Nondominated `(R1, R2)` pairs, sorted by increasing R1.
    pub frontier: Vec<(T, T)>,
    /// `R1 + R2 <= Ĉ(g2)` with R1 = R31 and R2 = R32.
    pub comparator: Region<T>,
    pub max_sum_rate: T,
    /// `|max_sum_rate − Ĉ(g2)|`.
    pub sum_rate_gap: T,
}

/// Corner points of `{R1 <= a, R2 <= b, R1 + R2 <= s}`.
fn box_sum_corners<T: Scalar>(a: T, b: T, s: T) -> [(T, T); 2] {
    let (a, b, s) = (clamp0(a), clamp0(b), clamp0(s));
    let r1 = a.min(s);
    let r2 = b.min(s);
    [(r1, clamp0(b.min(s - r1))), (clamp0(a.min(s - r2)), r2)]
}

/// Corners of the conferencing-MAC polytope for one `(β1, β2)`.
pub fn mac_conferencing_corners<T: Scalar>(
    s: &SnrTriple<T>,
    beta1: T,
    beta2: T,
    c12: T,
    c21: T,
) -> [(T, T); 2] {
    let (g1, g2) = (s.g1, s.g2);
    let (nb1, nb2) = (T::one() - beta1, T::one() - beta2);
    let a = cap(beta1 * g2) + c21;
    let b = cap(beta2 * g1) + c12;
    let s1 = cap(beta1 * g2 + beta2 * g1) + c21 + c12;
    let s2 = cap(g1 + g2 + T::lit(2.0) * (nb1 * nb2 * g1 * g2).sqrt());
    box_sum_corners(a, b, s1.min(s2))
}

/// Corners of the in-band cooperative MAC polytope. `b1`, `b2` are
/// `(β_i1, β_i2, β_i3)`.
pub fn mac_inband_corners<T: Scalar>(s: &SnrTriple<T>, b1: [T; 3], b2: [T; 3]) -> [(T, T); 2] {
    let (g1, g2, g3) = (s.g1, s.g2, s.g3);
    let coop = |b: [T; 3]| cap(b[0] * g3 / (T::one() + b[1] * g3));
    let a = coop(b1) + cap(b1[1] * g1);
    let b = coop(b2) + cap(b2[1] * g2);
    let s1 = cap(g2 + g1 + T::lit(2.0) * (b1[2] * b2[2] * g1 * g2).sqrt());
    let s2 = cap(b1[1] * g2 + b2[1] * g1) + coop(b1) + coop(b2);
    box_sum_corners(a, b, s1.min(s2))
}

/// Corner of the cooperative BC rectangle for `(β2, β3)`.
pub fn bc_coop_corner<T: Scalar>(s: &SnrTriple<T>, beta2: T, b3: [T; 3]) -> (T, T) {
    let (g1, g2, g3) = (s.g1, s.g2, s.g3);
    let r1 = cap(b3[0] * g2 + b3[0] * beta2 * g1 * g3 / (T::one() + beta2 * g3 + b3[0] * (g1 + g2)));
    let r2a = cap(((b3[2] + b3[1]) * g1 + g3 + T::lit(2.0) * (b3[1] * g1 * g3).sqrt()) / (T::one() + b3[0] * g1));
    let r2b = cap(b3[2] * g2 / (T::one() + b3[0] * g2 + beta2 * g3));
    (r1, r2a.min(r2b))
}

fn grid<T: Scalar>(n: usize) -> Vec<T> {
    (0..n).map(|i| T::lit(i as f64 / (n - 1) as f64)).collect()
}

/// Points `(x, y, 1-x-y)` of the 2-simplex on an `n`-point grid.
fn simplex_grid<T: Scalar>(n: usize) -> Vec<[T; 3]> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n - i {
            let x = T::lit(i as f64 / (n - 1) as f64);
            let y = T::lit(j as f64 / (n - 1) as f64);
            out.push([x, y, clamp0(T::one() - x - y)]);
        }
    }
    out
}

pub(crate) fn pareto<T: Scalar>(mut pts: Vec<(T, T)>) -> Vec<(T, T)> {
    pts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.partial_cmp(&a.1).unwrap()));
    let mut out: Vec<(T, T)> = Vec::new();
    let mut best = T::neg_infinity();
    for p in pts {
        if p.1 > best {
            best = p.1;
            out.push(p);
        }
    }
    out.reverse();
    out
}

/// Samples the parametrized union of a special case on a uniform grid
/// with `grid_resolution` points per parameter axis.
///
/// The power share left over by the other parameters (β_i3 for the
/// in-band MAC, β33 for the BC) is set to use the full budget: every bound
/// is nondecreasing in it.
pub fn special_case_region<T: Scalar>(
    kind: SpecialKind,
    s: &SnrTriple<T>,
    grid_resolution: usize,
) -> Result<SpecialCaseResult<T>> {
    s.expect(Convention::ThreeWay)?;
    if grid_resolution < 2 {
        return Err(Error::config("grid_resolution must be at least 2"));
    }
    let n = grid_resolution;
    let pts: Vec<(T, T)> = match kind {
        SpecialKind::MacConferencing => {
            let c = cap(s.g3);
            let g = grid::<T>(n);
            g.par_iter()
                .flat_map_iter(|&b1| {
                    let g = &g;
                    g.iter().flat_map(move |&b2| mac_conferencing_corners(s, b1, b2, c, c))
                })
                .collect()
        }
        SpecialKind::MacInband => {
            let simp = simplex_grid::<T>(n);
            let parts: Vec<Vec<(T, T)>> = simp
                .par_iter()
                .map(|&b1| {
                    let pts = simp
                        .iter()
                        .flat_map(|&b2| mac_inband_corners(s, b1, b2))
                        .collect();
                    pareto(pts)
                })
                .collect();
            parts.into_iter().flatten().collect()
        }
        SpecialKind::BcCoop => {
            let simp = simplex_grid::<T>(n);
            grid::<T>(n)
                .par_iter()
                .flat_map_iter(|&b2| {
                    let simp = &simp;
                    simp.iter().map(move |&b3| bc_coop_corner(s, b2, b3))
                })
                .collect()
        }
    };
    let frontier = pareto(pts);
    let max_sum_rate = frontier
        .iter()
        .map(|p| p.0 + p.1)
        .fold(T::zero(), T::max);
    let c2 = chat(s.g2);
    let comparator = Region {
        snr: *s,
        kind: RegionKind::Parametrized,
        bounds: vec![LinearBound {
            coeffs: PATTERNS[0],
            rhs: c2,
            label: PATTERN_LABELS[0].to_string(),
        }],
        meta: RegionMeta::default(),
    };
    Ok(SpecialCaseResult {
        kind,
        frontier,
        comparator,
        max_sum_rate,
        sum_rate_gap: (max_sum_rate - c2).abs(),
    })
}
