//! Membership, vertex enumeration and per-dimension gaps for regions.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::regions::{LinearBound, Region};
use crate::scalar::Scalar;
use crate::types::{Direction, RateTuple};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Vertex<T> {
    pub point: RateTuple<T>,
    pub active_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct GapReport<T> {
    /// Smallest g such that every outer point with all rates >= g, moved
    /// down by g in every coordinate, lies in the inner region.
    pub exact_gap: T,
    /// Largest matched-bound rhs difference divided by the bound order.
    /// `None` if some inner bound has no outer bound with the same pattern.
    pub sufficient_gap: Option<T>,
    /// Same as `exact_gap` but shifting every outer point and clamping at 0.
    pub clamped_gap: T,
    pub per_bound: BTreeMap<String, T>,
    /// Vertex of the shifted outer region that last violated an inner bound
    /// during bisection, in original (unshifted) coordinates.
    pub certificate: Option<Vertex<T>>,
}

pub fn contains<T: Scalar>(region: &Region<T>, r: &RateTuple<T>) -> bool {
    let tol = T::feas_tol();
    r.0.iter().all(|&x| x >= -tol) && region.bounds.iter().all(|b| b.eval(&r.0) <= b.rhs + tol)
}

/// Solves `m x = rhs` in place by Gaussian elimination with partial pivoting.
fn solve6<T: Scalar>(mut m: [[T; 6]; 6], mut rhs: [T; 6]) -> Option<[T; 6]> {
    let eps = T::lit(1e-12);
    for col in 0..6 {
        let piv = (col..6).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[piv][col].abs() < eps {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..6 {
            let f = m[row][col] / m[col][col];
            if f != T::zero() {
                for k in col..6 {
                    m[row][k] = m[row][k] - f * m[col][k];
                }
                rhs[row] = rhs[row] - f * rhs[col];
            }
        }
    }
    let mut x = [T::zero(); 6];
    for row in (0..6).rev() {
        let mut acc = rhs[row];
        for k in row + 1..6 {
            acc = acc - m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Calls `f` with every 6-subset of `0..n` in lexicographic order.
fn for_each_6subset(n: usize, mut f: impl FnMut(&[usize; 6])) {
    if n < 6 {
        return;
    }
    let mut idx = [0, 1, 2, 3, 4, 5];
    loop {
        f(&idx);
        let mut i = 5;
        loop {
            if idx[i] < n - 6 + i {
                break;
            }
            if i == 0 {
                return;
            }
            i -= 1;
        }
        idx[i] += 1;
        for j in i + 1..6 {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Vertices of `{R >= 0 : coeffs·R <= rhs}` with rhs overridden by `rhs`.
fn vertices_with_rhs<T: Scalar>(bounds: &[LinearBound<T>], rhs: &[T]) -> Vec<Vertex<T>> {
    let nb = bounds.len();
    let n = nb + 6;
    let row = |k: usize| -> ([T; 6], T) {
        if k < nb {
            (bounds[k].coeffs.map(|c| T::lit(c as f64)), rhs[k])
        } else {
            let mut a = [T::zero(); 6];
            a[k - nb] = -T::one();
            (a, T::zero())
        }
    };
    let tol = T::feas_tol();
    let dedup = T::lit(T::DEDUP_TOL);
    let mut out: Vec<Vertex<T>> = Vec::new();
    for_each_6subset(n, |sel| {
        let mut m = [[T::zero(); 6]; 6];
        let mut b = [T::zero(); 6];
        for (i, &k) in sel.iter().enumerate() {
            let (a, r) = row(k);
            m[i] = a;
            b[i] = r;
        }
        let Some(x) = solve6(m, b) else { return };
        if x.iter().any(|&v| v < -tol) {
            return;
        }
        let mut active = Vec::new();
        for k in 0..nb {
            let lhs = bounds[k].eval(&x);
            if lhs > rhs[k] + tol {
                return;
            }
            if (lhs - rhs[k]).abs() <= tol {
                active.push(bounds[k].label.clone());
            }
        }
        let x = x.map(|v| if v.abs() <= tol { T::zero() } else { v });
        if out
            .iter()
            .any(|v| v.point.0.iter().zip(&x).all(|(a, b)| (*a - *b).abs() <= dedup))
        {
            return;
        }
        for (i, &v) in x.iter().enumerate() {
            if v == T::zero() {
                active.push(format!("{}>=0", Direction::from_index(i).label()));
            }
        }
        out.push(Vertex {
            point: RateTuple(x),
            active_labels: active,
        });
    });
    out
}

/// All extreme points of a region, deduplicated.
pub fn vertices<T: Scalar>(region: &Region<T>) -> Result<Vec<Vertex<T>>> {
    // Downward closed with 0/1 coefficients: bounded iff every rate appears
    // in some bound.
    for i in 0..6 {
        if !region.bounds.iter().any(|b| b.coeffs[i] == 1) {
            return Err(Error::domain(format!(
                "region unbounded along {}",
                Direction::from_index(i).label()
            )));
        }
    }
    if region.bounds.iter().any(|b| b.rhs < -T::feas_tol()) {
        return Ok(Vec::new());
    }
    Ok(vertices_with_rhs(&region.bounds, &region.rhs()))
}

fn max_violation<T: Scalar>(inner: &Region<T>, y: &[T; 6]) -> T {
    inner
        .bounds
        .iter()
        .map(|b| b.eval(y) - b.rhs)
        .fold(T::neg_infinity(), T::max)
}

/// Worst inner-bound violation over the shifted outer region, with the
/// vertex attaining it. `None` when the shifted region is empty.
fn shifted_worst<T: Scalar>(outer: &Region<T>, inner: &Region<T>, g: T) -> Option<(T, Vertex<T>)> {
    let rhs: Vec<T> = outer
        .bounds
        .iter()
        .map(|b| b.rhs - T::lit(b.order() as f64) * g)
        .collect();
    if rhs.iter().any(|&r| r < -T::feas_tol()) {
        return None;
    }
    let rhs: Vec<T> = rhs.into_iter().map(|r| r.max(T::zero())).collect();
    vertices_with_rhs(&outer.bounds, &rhs)
        .into_iter()
        .map(|v| (max_violation(inner, &v.point.0), v))
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
}

fn bisect<T: Scalar>(mut lo: T, mut hi: T, mut ok: impl FnMut(T) -> bool) -> T {
    let tol = T::lit(T::BISECT_TOL);
    while hi - lo > tol {
        let mid = (lo + hi) * T::lit(0.5);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn per_dimension_gap<T: Scalar>(outer: &Region<T>, inner: &Region<T>) -> Result<GapReport<T>> {
    let mut per_bound = BTreeMap::new();
    let mut sufficient = Some(T::zero());
    for ib in &inner.bounds {
        match outer.bound_for(&ib.coeffs) {
            Some(ob) => {
                let d = ob.rhs - ib.rhs;
                per_bound.insert(ib.label.clone(), d);
                sufficient = sufficient.map(|s| s.max(d / T::lit(ib.order() as f64)));
            }
            None => sufficient = None,
        }
    }

    let tol = T::feas_tol();
    let ok = |g: T| match shifted_worst(outer, inner, g) {
        None => true,
        Some((v, _)) => v <= tol,
    };
    // Above this every shifted outer region is empty.
    let top = outer
        .bounds
        .iter()
        .map(|b| b.rhs)
        .fold(T::zero(), T::max)
        + T::one();
    let hi = match sufficient {
        Some(s) if ok(s) => s,
        _ => top,
    };
    let exact = if ok(T::zero()) { T::zero() } else { bisect(T::zero(), hi, ok) };
    let certificate = if exact > T::zero() {
        let g = (exact - T::lit(T::BISECT_TOL)).max(T::zero());
        shifted_worst(outer, inner, g).map(|(_, mut v)| {
            v.point.0 = v.point.0.map(|x| x + g);
            v
        })
    } else {
        None
    };

    let outer_vertices = vertices(outer)?;
    let clamp_ok = |g: T| {
        outer_vertices.iter().all(|v| {
            let y = v.point.0.map(|x| (x - g).max(T::zero()));
            max_violation(inner, &y) <= tol
        })
    };
    let clamped = if clamp_ok(T::zero()) { T::zero() } else { bisect(T::zero(), top, clamp_ok) };

    Ok(GapReport {
        exact_gap: exact,
        sufficient_gap: sufficient,
        clamped_gap: clamped,
        per_bound,
        certificate,
    })
}
