//! Independent allocation oracle for tests: window matching by Hall's
//! condition, a dense mod-p rebuild of the relay protocol, and a rank test
//! for decodability. Shares no code with `alloc` or `sim` beyond the types.

#![allow(dead_code)]

use std::collections::HashMap;

use triway_core::alloc::{Allocation, CaseCounts, ChannelShape, CycleSlot, DemandTuple, Pair, Slot, UsageCase};
use triway_core::Direction;

const P: u64 = 2_147_483_647;

/// Every split of a demand into case counts.
pub fn splits(d: &DemandTuple) -> Vec<CaseCounts> {
    let [r21, r31, r12, r32, r13, r23] = d.0;
    let mut out = Vec::new();
    for a in 0..=r21.min(r32).min(r13) {
        for c in 0..=r31.min(r12).min(r23) {
            for x12 in 0..=(r21 - a).min(r12 - c) {
                for x13 in 0..=(r31 - c).min(r13 - a) {
                    for x23 in 0..=(r32 - a).min(r23 - c) {
                        let uni = [
                            r21 - a - x12,
                            r31 - c - x13,
                            r12 - c - x12,
                            r32 - a - x23,
                            r13 - a - x13,
                            r23 - c - x23,
                        ];
                        out.push(CaseCounts {
                            bi: [x12, x13, x23],
                            cyclic: [a, c],
                            uni,
                        });
                    }
                }
            }
        }
    }
    out
}

fn slot_list(c: &CaseCounts) -> Vec<(UsageCase, u32)> {
    let mut v = Vec::new();
    let mut inst = 0;
    for (p, &n) in [Pair::P12, Pair::P13, Pair::P23].iter().zip(&c.bi) {
        for _ in 0..n {
            v.push((UsageCase::Bi(*p), inst));
            inst += 1;
        }
    }
    for _ in 0..c.cyclic[0] {
        v.push((UsageCase::CyclicA(CycleSlot::First), inst));
        v.push((UsageCase::CyclicA(CycleSlot::Second), inst));
        inst += 1;
    }
    for _ in 0..c.cyclic[1] {
        v.push((UsageCase::CyclicB(CycleSlot::First), inst));
        v.push((UsageCase::CyclicB(CycleSlot::Second), inst));
        inst += 1;
    }
    for (i, &n) in c.uni.iter().enumerate() {
        for _ in 0..n {
            v.push((UsageCase::Uni(Direction::from_index(i)), inst));
            inst += 1;
        }
    }
    v
}

fn senders(c: UsageCase) -> Vec<u8> {
    let mut t: Vec<u8> = c.messages().iter().map(|d| d.src).collect();
    t.sort_unstable();
    t.dedup();
    t
}

fn up_limit(sh: &ChannelShape, c: UsageCase) -> u32 {
    senders(c).iter().map(|&u| sh.n_tilde[u as usize - 1]).min().unwrap()
}

fn down_floor(sh: &ChannelShape, c: UsageCase) -> u32 {
    let m = c.receivers().iter().map(|&u| sh.n_tilde[u as usize - 1]).min().unwrap();
    sh.n_tilde[0] - m + 1
}

/// Whether some split has a window-respecting placement. Uplink windows are
/// prefixes and downlink windows suffixes, so Hall's condition on nested
/// intervals decides each side independently.
pub fn window_placement_exists(d: &DemandTuple, sh: &ChannelShape) -> bool {
    let n = sh.n_tilde[0];
    // A slot carries at most two messages.
    if d.0.iter().sum::<u32>() > 2 * n {
        return false;
    }
    splits(d).iter().any(|c| {
        if c.slots() > n {
            return false;
        }
        let s = slot_list(c);
        if s.len() as u32 > n {
            return false;
        }
        (1..=n).all(|x| s.iter().filter(|(k, _)| up_limit(sh, *k) <= x).count() as u32 <= x)
            && (1..=n).all(|x| s.iter().filter(|(k, _)| down_floor(sh, *k) > n - x).count() as u32 <= x)
    })
}

fn inv(a: u64) -> u64 {
    let (mut r, mut b, mut e) = (1u64, a % P, P - 2);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % P;
        }
        b = b * b % P;
        e >>= 1;
    }
    r
}

/// Rebuilds every signal as a vector over message atoms and checks, per
/// user, that each wanted atom lies in the span of its observations and
/// its own atoms.
pub fn decodable(a: &Allocation, blocks: u32) -> bool {
    let sh = a.shape;
    let nt = sh.n_tilde;
    let top = nt[0];
    let bb = blocks as usize;

    // Stream ids; the shared message of a cyclic instance is one stream.
    let mut streams: Vec<Direction> = Vec::new();
    let mut shared: HashMap<(u8, u32, Direction), usize> = HashMap::new();
    let mut on_slot: Vec<Vec<usize>> = Vec::new();
    for s in &a.slots {
        let fam = match s.case {
            UsageCase::CyclicA(_) => 1,
            UsageCase::CyclicB(_) => 2,
            _ => 0,
        };
        let ids = s
            .case
            .messages()
            .into_iter()
            .map(|d| {
                let fresh = |streams: &mut Vec<Direction>| {
                    streams.push(d);
                    streams.len() - 1
                };
                let cross_slot = matches!((fam, d.dst, d.src), (1, 3, 2) | (2, 3, 1));
                if cross_slot {
                    *shared.entry((fam, s.instance, d)).or_insert_with(|| fresh(&mut streams))
                } else {
                    fresh(&mut streams)
                }
            })
            .collect();
        on_slot.push(ids);
    }
    let w = streams.len() * bb;
    let atom = |st: usize, b: u32| st * bb + b as usize - 1;
    let dst_of = |col: usize| streams[col / bb].dst;
    let src_of = |col: usize| streams[col / bb].src;

    let slot_down = |dl: u32| a.slots.iter().position(|s| s.downlink == dl);

    // tx[(user, uplink, block)]
    let mut tx: HashMap<(u8, u32, u32), Vec<u64>> = HashMap::new();
    for (i, s) in a.slots.iter().enumerate() {
        for u in 1..=3u8 {
            for b in 1..=blocks + 1 {
                let mut v = vec![0u64; w];
                if b <= blocks {
                    for &st in &on_slot[i] {
                        if streams[st].src == u {
                            v[atom(st, b)] = 1;
                        }
                    }
                }
                tx.insert((u, s.uplink, b), v);
            }
        }
    }
    let zero = vec![0u64; w];
    let get = |tx: &HashMap<(u8, u32, u32), Vec<u64>>, u: u8, l: u32, b: u32| -> Vec<u64> {
        tx.get(&(u, l, b)).cloned().unwrap_or_else(|| zero.clone())
    };

    // Interference: victim v's m-th lowest downlink hears t's uplink nt[t]-N1+m.
    let mut hits: Vec<(u8, u8, u32, u32)> = Vec::new();
    for (v, t) in [(2u8, 3u8), (3, 2)] {
        for m in 1..=sh.n1 {
            hits.push((v, t, top - nt[v as usize - 1] + m, nt[t as usize - 1] - sh.n1 + m));
        }
    }

    for b in (1..blocks).rev() {
        for &(v, t, dl, ul) in &hits {
            let Some(i) = slot_down(dl) else { continue };
            let lp = a.slots[i].uplink;
            if lp > nt[t as usize - 1] {
                continue;
            }
            let src = get(&tx, t, ul, b + 1);
            let row = tx.get_mut(&(t, lp, b)).expect("slot uplink");
            for (col, &c) in src.iter().enumerate() {
                if c != 0 && dst_of(col) != v {
                    row[col] = (row[col] + P - c) % P;
                }
            }
        }
    }

    for v in 1..=3u8 {
        let mut rows: Vec<Vec<u64>> = Vec::new();
        for col in 0..w {
            if src_of(col) == v {
                let mut e = vec![0; w];
                e[col] = 1;
                rows.push(e);
            }
        }
        for b in 2..=blocks + 1 {
            for dl in (top - nt[v as usize - 1] + 1)..=top {
                let mut y = match slot_down(dl) {
                    Some(i) => {
                        let l = a.slots[i].uplink;
                        let mut acc = vec![0u64; w];
                        for u in 1..=3 {
                            for (x, c) in acc.iter_mut().zip(get(&tx, u, l, b - 1)) {
                                *x = (*x + c) % P;
                            }
                        }
                        acc
                    }
                    None => vec![0; w],
                };
                if let Some(&(_, t, _, ul)) = hits.iter().find(|h| h.0 == v && h.2 == dl) {
                    for (x, c) in y.iter_mut().zip(get(&tx, t, ul, b)) {
                        *x = (*x + c) % P;
                    }
                }
                rows.push(y);
            }
        }
        let basis = echelon(rows, w);
        for col in 0..w {
            if dst_of(col) == v {
                let mut e = vec![0; w];
                e[col] = 1;
                if !reduces_to_zero(&basis, e) {
                    return false;
                }
            }
        }
    }
    true
}

/// Rows of a reduced basis, each with its pivot column.
fn echelon(rows: Vec<Vec<u64>>, w: usize) -> Vec<(usize, Vec<u64>)> {
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    for r in rows {
        let mut r = r;
        for (p, b) in &basis {
            let c = r[*p];
            if c != 0 {
                for j in 0..w {
                    r[j] = (r[j] + (P - c) * b[j]) % P;
                }
            }
        }
        if let Some(p) = (0..w).find(|&j| r[j] != 0) {
            let k = inv(r[p]);
            r.iter_mut().for_each(|x| *x = *x * k % P);
            for (_, b) in basis.iter_mut() {
                let c = b[p];
                if c != 0 {
                    for j in 0..w {
                        b[j] = (b[j] + (P - c) * r[j]) % P;
                    }
                }
            }
            basis.push((p, r));
        }
    }
    basis
}

fn reduces_to_zero(basis: &[(usize, Vec<u64>)], mut e: Vec<u64>) -> bool {
    for (p, b) in basis {
        let c = e[*p];
        if c != 0 {
            for j in 0..e.len() {
                e[j] = (e[j] + (P - c) * b[j]) % P;
            }
        }
    }
    e.iter().all(|&x| x == 0)
}

pub fn oracle_blocks(sh: &ChannelShape) -> Vec<u32> {
    vec![2, 3, sh.n_tilde[0] + 2]
}

pub fn valid(a: &Allocation) -> bool {
    let sh = a.shape;
    let n = sh.n_tilde[0];
    let mut up = vec![false; n as usize + 1];
    let mut down = vec![false; n as usize + 1];
    for s in &a.slots {
        if s.uplink < 1 || s.uplink > up_limit(&sh, s.case) || s.downlink < down_floor(&sh, s.case) || s.downlink > n {
            return false;
        }
        if std::mem::replace(&mut up[s.uplink as usize], true) || std::mem::replace(&mut down[s.downlink as usize], true) {
            return false;
        }
    }
    oracle_blocks(&sh).into_iter().all(|b| decodable(a, b))
}

/// Exhaustive placement search over every split, every uplink assignment up
/// to reordering of identical slots, and every downlink assignment.
pub fn brute_force(d: &DemandTuple, sh: &ChannelShape) -> Option<Allocation> {
    let n = sh.n_tilde[0];
    for c in splits(d) {
        let list = slot_list(&c);
        if list.len() as u32 > n {
            continue;
        }
        let mut slots: Vec<Slot> = list
            .iter()
            .map(|&(case, instance)| Slot {
                case,
                instance,
                uplink: 0,
                downlink: 0,
            })
            .collect();
        // Slot i must take a larger uplink than `twin[i]` when both are
        // interchangeable.
        let twin: Vec<Option<usize>> = (0..list.len())
            .map(|i| {
                (0..i).rev().find(|&j| match (list[i].0, list[j].0) {
                    (UsageCase::CyclicA(CycleSlot::Second), _) | (UsageCase::CyclicB(CycleSlot::Second), _) => false,
                    (x, y) => x == y,
                })
            })
            .collect();
        let mut used_up = vec![false; n as usize + 1];
        let mut used_down = vec![false; n as usize + 1];
        if let Some(a) = place_up(0, &mut slots, &twin, sh, &mut used_up, &mut used_down) {
            return Some(a);
        }
    }
    None
}

fn place_up(
    i: usize,
    slots: &mut Vec<Slot>,
    twin: &[Option<usize>],
    sh: &ChannelShape,
    used: &mut Vec<bool>,
    used_down: &mut Vec<bool>,
) -> Option<Allocation> {
    if i == slots.len() {
        return place_down(0, slots, sh, used_down);
    }
    let lo = twin[i].map_or(1, |j| slots[j].uplink + 1);
    for l in lo..=up_limit(sh, slots[i].case) {
        if used[l as usize] {
            continue;
        }
        used[l as usize] = true;
        slots[i].uplink = l;
        let r = place_up(i + 1, slots, twin, sh, used, used_down);
        used[l as usize] = false;
        if r.is_some() {
            return r;
        }
    }
    None
}

fn place_down(i: usize, slots: &mut Vec<Slot>, sh: &ChannelShape, used: &mut Vec<bool>) -> Option<Allocation> {
    if i == slots.len() {
        let a = Allocation {
            shape: *sh,
            slots: slots.clone(),
        };
        return valid(&a).then_some(a);
    }
    for d in down_floor(sh, slots[i].case)..=sh.n_tilde[0] {
        if used[d as usize] {
            continue;
        }
        used[d as usize] = true;
        slots[i].downlink = d;
        let r = place_down(i + 1, slots, sh, used);
        used[d as usize] = false;
        if r.is_some() {
            return r;
        }
    }
    None
}

/// All Δ–Y-consistent shapes with `Ñ1 <= max`.
pub fn shapes(max: u32) -> Vec<ChannelShape> {
    let mut out = Vec::new();
    for a in 1..=max {
        for b in 1..=a {
            for c in 1..=b {
                if b + c >= a {
                    if let Ok(s) = ChannelShape::new([a, b, c], b + c - a) {
                        out.push(s);
                    }
                }
            }
        }
    }
    out
}

/// Every demand with entries `<= n`.
pub fn demands(n: u32) -> impl Iterator<Item = DemandTuple> {
    let m = n + 1;
    (0..m.pow(6)).map(move |mut i| {
        let mut r = [0u32; 6];
        for x in r.iter_mut() {
            *x = i % m;
            i /= m;
        }
        DemandTuple(r)
    })
}
