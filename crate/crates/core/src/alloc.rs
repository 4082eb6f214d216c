//! Sub-channel allocation for the extended Y-channel.
//!
//! A demand counts sub-channels per directed message. It is split into
//! usage cases (bidirectional pairs, the two cyclic schemes, uni-directional
//! messages); each case occupies one uplink and one downlink index.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::capacity::cap_hat_unchecked as chat;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim;
use crate::types::{Direction, User};

/// Sub-channel counts per direction, canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DemandTuple(pub [u32; 6]);

impl DemandTuple {
    pub fn get(&self, d: Direction) -> u32 {
        self.0[d.index()]
    }
}

/// Sub-channel counts `(Ñ1, Ñ2, Ñ3)` of the extended Y-channel and the
/// cross-interference depth `N1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelShape {
    pub n_tilde: [u32; 3],
    pub n1: u32,
}

impl ChannelShape {
    pub fn new(n_tilde: [u32; 3], n1: u32) -> Result<Self> {
        let [a, b, c] = n_tilde;
        if !(a >= b && b >= c && c >= 1) {
            return Err(Error::config(format!("need Ñ1 >= Ñ2 >= Ñ3 >= 1, got {n_tilde:?}")));
        }
        if n1 > c {
            return Err(Error::config(format!("N1 = {n1} exceeds Ñ3 = {c}")));
        }
        if a + n1 != b + c {
            return Err(Error::config(format!(
                "counts {n_tilde:?} with N1 = {n1} break Ñ1 - Ñ2 = Ñ3 - N1"
            )));
        }
        Ok(ChannelShape { n_tilde, n1 })
    }

    /// From a Y-channel plan (counts strongest first) and N1.
    pub fn from_plan<T: Scalar>(plan: &crate::scd::SubChannelPlan<T>, n1: u32) -> Result<Self> {
        match plan.counts[..] {
            [a, b, c] => ChannelShape::new([a, b, c], n1),
            _ => Err(Error::config("plan must have three users")),
        }
    }

    pub fn count(&self, u: User) -> u32 {
        self.n_tilde[u as usize - 1]
    }

    pub fn top(&self) -> u32 {
        self.n_tilde[0]
    }

    /// Largest uplink index every user in `users` can reach.
    pub fn uplink_limit(&self, users: &[User]) -> u32 {
        users.iter().map(|&u| self.count(u)).min().unwrap_or(self.top())
    }

    /// Smallest downlink index every user in `users` receives.
    pub fn downlink_floor(&self, users: &[User]) -> u32 {
        self.top() - self.uplink_limit(users) + 1
    }

    pub fn receives(&self, u: User, d: u32) -> bool {
        d > self.top() - self.count(u) && d <= self.top()
    }

    /// Downlink indices of `victim` (2 or 3) hit by the other user's uplink.
    pub fn interfered(&self, victim: User) -> std::ops::RangeInclusive<u32> {
        let lo = self.top() - self.count(victim) + 1;
        lo..=lo + self.n1 - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pair {
    P12,
    P13,
    P23,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CycleSlot {
    First,
    Second,
}

/// One of the 13 ways a sub-channel can carry traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UsageCase {
    Bi(Pair),
    /// λ21 + λ32, then λ32 + λ13.
    CyclicA(CycleSlot),
    /// λ31 + λ12, then λ31 + λ23.
    CyclicB(CycleSlot),
    Uni(Direction),
}

const fn dir(dst: User, src: User) -> Direction {
    Direction { dst, src }
}

impl UsageCase {
    pub fn all() -> [UsageCase; 13] {
        use CycleSlot::*;
        use UsageCase::*;
        let d = Direction::ALL;
        [
            Bi(Pair::P12),
            Bi(Pair::P13),
            Bi(Pair::P23),
            CyclicA(First),
            CyclicA(Second),
            CyclicB(First),
            CyclicB(Second),
            Uni(d[0]),
            Uni(d[1]),
            Uni(d[2]),
            Uni(d[3]),
            Uni(d[4]),
            Uni(d[5]),
        ]
    }

    /// Messages whose codewords are summed on this sub-channel.
    pub fn messages(&self) -> Vec<Direction> {
        use CycleSlot::*;
        match *self {
            UsageCase::Bi(Pair::P12) => vec![dir(2, 1), dir(1, 2)],
            UsageCase::Bi(Pair::P13) => vec![dir(3, 1), dir(1, 3)],
            UsageCase::Bi(Pair::P23) => vec![dir(3, 2), dir(2, 3)],
            UsageCase::CyclicA(First) => vec![dir(2, 1), dir(3, 2)],
            UsageCase::CyclicA(Second) => vec![dir(3, 2), dir(1, 3)],
            UsageCase::CyclicB(First) => vec![dir(3, 1), dir(1, 2)],
            UsageCase::CyclicB(Second) => vec![dir(3, 1), dir(2, 3)],
            UsageCase::Uni(d) => vec![d],
        }
    }

    pub fn transmitters(&self) -> Vec<User> {
        let mut t: Vec<User> = self.messages().iter().map(|d| d.src).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    /// Users that must decode from this downlink sub-channel.
    pub fn receivers(&self) -> Vec<User> {
        use CycleSlot::*;
        match *self {
            UsageCase::Bi(_) => self.transmitters(),
            UsageCase::CyclicA(First) | UsageCase::CyclicB(First) => vec![1, 2],
            UsageCase::CyclicA(Second) => vec![1, 3],
            UsageCase::CyclicB(Second) => vec![2, 3],
            UsageCase::Uni(d) => vec![d.dst],
        }
    }

    pub fn label(&self) -> String {
        match *self {
            UsageCase::Bi(Pair::P12) => "bi(1,2)".into(),
            UsageCase::Bi(Pair::P13) => "bi(1,3)".into(),
            UsageCase::Bi(Pair::P23) => "bi(2,3)".into(),
            UsageCase::CyclicA(CycleSlot::First) => "cycA.1".into(),
            UsageCase::CyclicA(CycleSlot::Second) => "cycA.2".into(),
            UsageCase::CyclicB(CycleSlot::First) => "cycB.1".into(),
            UsageCase::CyclicB(CycleSlot::Second) => "cycB.2".into(),
            UsageCase::Uni(d) => format!("uni({})", d.label()),
        }
    }
}

impl fmt::Display for UsageCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// One used sub-channel: the relay decodes on `uplink` and forwards on
/// `downlink`. Both slots of a cyclic scheme share `instance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub case: UsageCase,
    pub instance: u32,
    pub uplink: u32,
    pub downlink: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Allocation {
    pub shape: ChannelShape,
    pub slots: Vec<Slot>,
}

/// Message stream `k` of a direction, carried by one case instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Stream {
    pub dir: Direction,
    pub k: u32,
}

impl Allocation {
    pub fn empty(shape: ChannelShape) -> Self {
        Allocation { shape, slots: Vec::new() }
    }

    /// Streams carried by each slot. A cyclic instance reuses the same
    /// stream for its shared message on both slots.
    pub fn slot_streams(&self) -> Vec<Vec<Stream>> {
        let mut next = [0u32; 6];
        let mut seen: BTreeMap<(u8, u32, Direction), Stream> = BTreeMap::new();
        self.slots
            .iter()
            .map(|s| {
                let fam = match s.case {
                    UsageCase::CyclicA(_) => 1,
                    UsageCase::CyclicB(_) => 2,
                    _ => 0,
                };
                s.case
                    .messages()
                    .into_iter()
                    .map(|d| {
                        let mk = |next: &mut [u32; 6]| {
                            let k = next[d.index()];
                            next[d.index()] += 1;
                            Stream { dir: d, k }
                        };
                        if fam == 0 {
                            mk(&mut next)
                        } else {
                            *seen.entry((fam, s.instance, d)).or_insert_with(|| mk(&mut next))
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Per-direction stream counts.
    pub fn demand(&self) -> DemandTuple {
        let mut r = [0u32; 6];
        for st in self.slot_streams().into_iter().flatten() {
            r[st.dir.index()] = r[st.dir.index()].max(st.k + 1);
        }
        DemandTuple(r)
    }

    pub fn slot_on_uplink(&self, l: u32) -> Option<&Slot> {
        self.slots.iter().find(|s| s.uplink == l)
    }

    pub fn slot_on_downlink(&self, d: u32) -> Option<&Slot> {
        self.slots.iter().find(|s| s.downlink == d)
    }
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    index: u32,
    case: String,
    instance: u32,
    users: Vec<User>,
}

#[derive(Serialize, Deserialize)]
struct PairEntry {
    uplink: u32,
    downlink: u32,
}

#[derive(Serialize, Deserialize)]
struct AllocationDoc {
    n_tilde: [u32; 3],
    n1: u32,
    uplink: Vec<IndexEntry>,
    downlink: Vec<IndexEntry>,
    pairing: Vec<PairEntry>,
}

impl Serialize for Allocation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut up: Vec<&Slot> = self.slots.iter().collect();
        up.sort_by_key(|s| s.uplink);
        let mut down: Vec<&Slot> = self.slots.iter().collect();
        down.sort_by_key(|s| s.downlink);
        AllocationDoc {
            n_tilde: self.shape.n_tilde,
            n1: self.shape.n1,
            uplink: up
                .iter()
                .map(|s| IndexEntry {
                    index: s.uplink,
                    case: s.case.label(),
                    instance: s.instance,
                    users: s.case.transmitters(),
                })
                .collect(),
            downlink: down
                .iter()
                .map(|s| IndexEntry {
                    index: s.downlink,
                    case: s.case.label(),
                    instance: s.instance,
                    users: s.case.receivers(),
                })
                .collect(),
            pairing: up
                .iter()
                .map(|s| PairEntry {
                    uplink: s.uplink,
                    downlink: s.downlink,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Allocation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = AllocationDoc::deserialize(d)?;
        let shape = ChannelShape::new(doc.n_tilde, doc.n1).map_err(D::Error::custom)?;
        let by_label: BTreeMap<String, UsageCase> =
            UsageCase::all().into_iter().map(|c| (c.label(), c)).collect();
        let mut slots = Vec::new();
        for e in &doc.uplink {
            let case = *by_label
                .get(&e.case)
                .ok_or_else(|| D::Error::custom(format!("unknown case {}", e.case)))?;
            let p = doc
                .pairing
                .iter()
                .find(|p| p.uplink == e.index)
                .ok_or_else(|| D::Error::custom(format!("uplink {} has no pairing", e.index)))?;
            slots.push(Slot {
                case,
                instance: e.instance,
                uplink: e.index,
                downlink: p.downlink,
            });
        }
        Ok(Allocation { shape, slots })
    }
}

/// The eight counting inequalities on a demand.
pub fn feasible(d: &DemandTuple, n_tilde: [u32; 3]) -> bool {
    let [r21, r31, r12, r32, r13, r23] = d.0;
    let [n1, n2, n3] = n_tilde;
    r31 + r32 <= n3
        && r13 + r23 <= n3
        && r12 + r13 + r32 <= n2
        && r12 + r13 + r23 <= n2
        && r21 + r23 + r13 <= n1
        && r21 + r23 + r31 <= n2
        && r31 + r32 + r21 <= n2
        && r31 + r32 + r12 <= n1
}

/// How many instances of each case a demand is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CaseCounts {
    /// Pairs (1,2), (1,3), (2,3).
    pub bi: [u32; 3],
    /// Cyclic schemes A and B.
    pub cyclic: [u32; 2],
    /// Canonical direction order.
    pub uni: [u32; 6],
}

impl CaseCounts {
    pub fn slots(&self) -> u32 {
        self.bi.iter().sum::<u32>() + 2 * self.cyclic.iter().sum::<u32>() + self.uni.iter().sum::<u32>()
    }

    pub fn demand(&self) -> DemandTuple {
        let [b12, b13, b23] = self.bi;
        let [ca, cb] = self.cyclic;
        let u = self.uni;
        DemandTuple([
            u[0] + b12 + ca,
            u[1] + b13 + cb,
            u[2] + b12 + cb,
            u[3] + b23 + ca,
            u[4] + b13 + ca,
            u[5] + b23 + cb,
        ])
    }

    /// Case list, one entry per slot, with instance numbers.
    pub fn cases(&self) -> Vec<(UsageCase, u32)> {
        use CycleSlot::*;
        let mut out = Vec::new();
        let mut inst = 0;
        for (p, &n) in [Pair::P12, Pair::P13, Pair::P23].iter().zip(&self.bi) {
            for _ in 0..n {
                out.push((UsageCase::Bi(*p), inst));
                inst += 1;
            }
        }
        for (fam, &n) in self.cyclic.iter().enumerate() {
            let (a, b) = if fam == 0 {
                (UsageCase::CyclicA(First), UsageCase::CyclicA(Second))
            } else {
                (UsageCase::CyclicB(First), UsageCase::CyclicB(Second))
            };
            for _ in 0..n {
                out.push((a, inst));
                out.push((b, inst));
                inst += 1;
            }
        }
        for (i, &n) in self.uni.iter().enumerate() {
            for _ in 0..n {
                out.push((UsageCase::Uni(Direction::from_index(i)), inst));
                inst += 1;
            }
        }
        out
    }
}

/// Bidirectional pairs first, then the two cyclic schemes, then the rest
/// as uni-directional.
pub fn greedy_decomposition(d: &DemandTuple) -> CaseCounts {
    let mut r = d.0;
    let mut c = CaseCounts::default();
    for (p, (i, j)) in [(0, 2), (1, 4), (3, 5)].into_iter().enumerate() {
        let m = r[i].min(r[j]);
        c.bi[p] = m;
        r[i] -= m;
        r[j] -= m;
    }
    for (fam, idx) in [[0usize, 3, 4], [1, 2, 5]].into_iter().enumerate() {
        let m = idx.iter().map(|&i| r[i]).min().unwrap();
        c.cyclic[fam] = m;
        for i in idx {
            r[i] -= m;
        }
    }
    c.uni = r;
    c
}

/// Every split of `d` into cases using at most `max_slots` slots, greedy
/// split first, then by slot count and descending pair/cyclic counts.
pub fn decompositions(d: &DemandTuple, max_slots: u32) -> Vec<CaseCounts> {
    let r = d.0;
    let mut out = Vec::new();
    for b12 in 0..=r[0].min(r[2]) {
        for b13 in 0..=r[1].min(r[4]) {
            for b23 in 0..=r[3].min(r[5]) {
                let ca_max = (r[0] - b12).min(r[3] - b23).min(r[4] - b13);
                let cb_max = (r[1] - b13).min(r[2] - b12).min(r[5] - b23);
                for ca in 0..=ca_max {
                    for cb in 0..=cb_max {
                        let uni = [
                            r[0] - b12 - ca,
                            r[1] - b13 - cb,
                            r[2] - b12 - cb,
                            r[3] - b23 - ca,
                            r[4] - b13 - ca,
                            r[5] - b23 - cb,
                        ];
                        let c = CaseCounts {
                            bi: [b12, b13, b23],
                            cyclic: [ca, cb],
                            uni,
                        };
                        if c.slots() <= max_slots {
                            out.push(c);
                        }
                    }
                }
            }
        }
    }
    let g = greedy_decomposition(d);
    out.sort_by(|a, b| {
        (b == &g)
            .cmp(&(a == &g))
            .then(a.slots().cmp(&b.slots()))
            .then(b.bi.cmp(&a.bi))
            .then(b.cyclic.cmp(&a.cyclic))
    });
    out
}

/// A broken allocation invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UplinkWindow { case: String, index: u32, limit: u32 },
    DownlinkWindow { case: String, index: u32, floor: u32 },
    DuplicateUplink { index: u32 },
    DuplicateDownlink { index: u32 },
    /// Backward decoding leaves a user with an unresolved symbol.
    Residual { user: User, block: u32, subchannel: u32 },
}

/// Index windows only.
pub fn window_violations(a: &Allocation) -> Vec<Violation> {
    let sh = &a.shape;
    let mut v = Vec::new();
    let mut ups = std::collections::BTreeSet::new();
    let mut downs = std::collections::BTreeSet::new();
    for s in &a.slots {
        let lim = sh.uplink_limit(&s.case.transmitters());
        if s.uplink < 1 || s.uplink > lim {
            v.push(Violation::UplinkWindow {
                case: s.case.label(),
                index: s.uplink,
                limit: lim,
            });
        }
        let floor = sh.downlink_floor(&s.case.receivers());
        if s.downlink < floor || s.downlink > sh.top() {
            v.push(Violation::DownlinkWindow {
                case: s.case.label(),
                index: s.downlink,
                floor,
            });
        }
        if !ups.insert(s.uplink) {
            v.push(Violation::DuplicateUplink { index: s.uplink });
        }
        if !downs.insert(s.downlink) {
            v.push(Violation::DuplicateDownlink { index: s.downlink });
        }
    }
    v
}

/// Block counts used when certifying that an allocation decodes for any
/// number of blocks.
fn probe_blocks(sh: &ChannelShape) -> Vec<u32> {
    // Residuals only grow with the number of blocks; short runs are cheap
    // and already expose most of them.
    let mut b = vec![2, 3, sh.top() + 2, 1];
    b.dedup();
    b
}

/// Window and neutralization check. An allocation passes when every
/// message is recovered by backward decoding after the interfering users
/// apply every pre-transmission they can.
pub fn check(a: &Allocation) -> Vec<Violation> {
    let mut v = window_violations(a);
    if !v.is_empty() {
        return v;
    }
    for b in probe_blocks(&a.shape) {
        if let Some(r) = sim::symbolic_residual(a, b) {
            v.push(Violation::Residual {
                user: r.user,
                block: r.block,
                subchannel: r.subchannel,
            });
            break;
        }
    }
    v
}

/// The two literal placement rules for forwarded signals.
///
/// Rule 1: a uni-directional 1→3 signal goes to a downlink index of user 3
/// outside its interfered set. Rule 2: a signal decoded above Ñ3 and
/// destined to user 2 goes to a downlink index of user 2 outside its
/// interfered set. Returned as labels of the offending slots. These rules
/// are sufficient, not necessary; [`check`] is the acceptance test.
pub fn literal_rule_violations(a: &Allocation) -> Vec<String> {
    let sh = &a.shape;
    let mut out = Vec::new();
    for s in &a.slots {
        if s.case == UsageCase::Uni(dir(3, 1)) && sh.interfered(3).contains(&s.downlink) {
            out.push(format!("rule1:{}@{}->{}", s.case, s.uplink, s.downlink));
        }
        let to2 = s.case.messages().iter().any(|d| d.dst == 2);
        if to2 && s.uplink > sh.count(3) && sh.interfered(2).contains(&s.downlink) {
            out.push(format!("rule2:{}@{}->{}", s.case, s.uplink, s.downlink));
        }
    }
    out
}

/// Groups indices into placement types. Interfered indices are types of
/// their own; the rest only matter through which users reach them, so
/// indices reached by the same number of users are interchangeable.
fn index_types(sh: &ChannelShape, uplink: bool) -> Vec<Vec<u32>> {
    let special: Vec<u32> = [2, 3].iter().flat_map(|&v| sh.interfered(v)).collect();
    let mut classes: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    let mut out = Vec::new();
    for i in 1..=sh.top() {
        if special.contains(&i) {
            out.push(vec![i]);
        } else {
            let reach = (1..=3)
                .filter(|&u| if uplink { i <= sh.count(u) } else { sh.receives(u, i) })
                .count();
            classes.entry(reach).or_default().push(i);
        }
    }
    out.extend(classes.into_values());
    out.sort();
    out
}

fn family(c: UsageCase) -> u8 {
    match c {
        UsageCase::CyclicA(_) => 1,
        UsageCase::CyclicB(_) => 2,
        _ => 0,
    }
}

/// Search over index assignments for one case split, up to the symmetries
/// above and permutations of identical slots. Each leaf takes uplinks
/// lowest first and downlinks highest first within a type.
pub(crate) fn assign(
    sh: &ChannelShape,
    cases: &[(UsageCase, u32)],
    mut accept: impl FnMut(&Allocation) -> bool,
) -> Option<Allocation> {
    if cases.len() > sh.top() as usize {
        return None;
    }
    // Runs of identical slots (whole instances for cyclic schemes), most
    // constrained run first.
    let mut runs: Vec<Vec<(UsageCase, u32)>> = Vec::new();
    for &c in cases {
        let same = runs.last().is_some_and(|r: &Vec<(UsageCase, u32)>| {
            let p = r[0].0;
            if family(c.0) != 0 { family(p) == family(c.0) } else { p == c.0 }
        });
        if same {
            runs.last_mut().unwrap().push(c);
        } else {
            runs.push(vec![c]);
        }
    }
    let tight = |c: UsageCase| sh.uplink_limit(&c.transmitters()) + sh.top() + 1 - sh.downlink_floor(&c.receivers());
    runs.sort_by_key(|r| r.iter().map(|c| tight(c.0)).min());
    let order: Vec<(UsageCase, u32)> = runs.concat();

    // Symmetry links: slot i must not sort below slot `prev`, or for a
    // cyclic second slot, its instance must not sort below the previous one.
    let k = order.len();
    let mut prev = vec![None; k];
    for i in 1..k {
        let (c, inst) = order[i];
        if family(c) == 0 {
            if order[i - 1].0 == c {
                prev[i] = Some(i - 1);
            }
        } else if i >= 3 && order[i - 1].1 == inst && order[i - 2].1 != inst && family(order[i - 2].0) == family(c) {
            prev[i] = Some(i - 2);
        }
    }

    let up_types = index_types(sh, true);
    let down_types = index_types(sh, false);
    let up_ok: Vec<Vec<bool>> = order
        .iter()
        .map(|(c, _)| {
            let lim = sh.uplink_limit(&c.transmitters());
            up_types.iter().map(|t| t[0] <= lim).collect()
        })
        .collect();
    let down_ok: Vec<Vec<bool>> = order
        .iter()
        .map(|(c, _)| {
            let fl = sh.downlink_floor(&c.receivers());
            down_types.iter().map(|t| t[0] >= fl).collect()
        })
        .collect();

    struct St<'a> {
        sh: &'a ChannelShape,
        order: &'a [(UsageCase, u32)],
        prev: &'a [Option<usize>],
        up_types: &'a [Vec<u32>],
        down_types: &'a [Vec<u32>],
        up_ok: &'a [Vec<bool>],
        down_ok: &'a [Vec<bool>],
        up_left: Vec<usize>,
        down_left: Vec<usize>,
        pick: Vec<(usize, usize)>,
    }

    fn leaf(st: &St) -> Allocation {
        let mut up_next = vec![0usize; st.up_types.len()];
        let mut down_next = vec![0usize; st.down_types.len()];
        let mut slots: Vec<Slot> = st
            .order
            .iter()
            .zip(&st.pick)
            .map(|(&(case, instance), &(u, d))| {
                let ui = st.up_types[u][up_next[u]];
                up_next[u] += 1;
                let dt = &st.down_types[d];
                let di = dt[dt.len() - 1 - down_next[d]];
                down_next[d] += 1;
                Slot {
                    case,
                    instance,
                    uplink: ui,
                    downlink: di,
                }
            })
            .collect();
        slots.sort_by_key(|s| s.uplink);
        Allocation { shape: *st.sh, slots }
    }

    fn dfs(i: usize, st: &mut St, accept: &mut dyn FnMut(&Allocation) -> bool) -> Option<Allocation> {
        if i == st.order.len() {
            let a = leaf(st);
            return accept(&a).then_some(a);
        }
        let floor = match st.prev[i] {
            None => None,
            Some(p) if p + 1 == i => Some(st.pick[p]),
            // Cyclic: compare (first, second) of this instance against
            // the previous instance.
            Some(p) => Some(st.pick[p]).filter(|_| st.pick[i - 1] == st.pick[p - 1]),
        };
        let cyc_gt = matches!(st.prev[i], Some(p) if p + 1 != i) && st.pick[i - 1] < st.pick[st.prev[i].unwrap() - 1];
        if cyc_gt {
            return None;
        }
        for u in 0..st.up_types.len() {
            if st.up_left[u] == 0 || !st.up_ok[i][u] {
                continue;
            }
            // Same-index pairing first: the interfering user can then
            // always reach the uplink it has to alter.
            let same = st.down_types.iter().position(|t| t.len() == 1 && st.up_types[u] == *t);
            let downs = same.into_iter().chain((0..st.down_types.len()).rev().filter(|&d| Some(d) != same));
            for d in downs {
                if st.down_left[d] == 0 || !st.down_ok[i][d] {
                    continue;
                }
                if floor.is_some_and(|f| (u, d) < f) {
                    continue;
                }
                st.up_left[u] -= 1;
                st.down_left[d] -= 1;
                st.pick.push((u, d));
                let r = dfs(i + 1, st, accept);
                st.pick.pop();
                st.up_left[u] += 1;
                st.down_left[d] += 1;
                if r.is_some() {
                    return r;
                }
            }
        }
        None
    }

    let mut st = St {
        sh,
        order: &order,
        prev: &prev,
        up_types: &up_types,
        down_types: &down_types,
        up_ok: &up_ok,
        down_ok: &down_ok,
        up_left: up_types.iter().map(|t| t.len()).collect(),
        down_left: down_types.iter().map(|t| t.len()).collect(),
        pick: Vec::with_capacity(k),
    };
    dfs(0, &mut st, &mut accept)
}

/// Splits the demand into cases and places them so that [`check`] passes.
/// Deterministic: case splits and indices are tried in a fixed order.
pub fn allocate(d: &DemandTuple, shape: &ChannelShape) -> Result<Allocation> {
    if !feasible(d, shape.n_tilde) {
        return Err(Error::Infeasible {
            what: format!("demand {:?} violates the counting bounds for {:?}", d.0, shape.n_tilde),
        });
    }
    let splits = decompositions(d, shape.top());
    for c in &splits {
        if let Some(a) = assign(shape, &c.cases(), |a| check(a).is_empty()) {
            return Ok(a);
        }
    }
    let cases = splits
        .first()
        .map(|c| c.cases().iter().map(|(c, _)| c.label()).collect())
        .unwrap_or_default();
    Err(Error::Placement { cases })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Group<T> {
    pub case: UsageCase,
    pub size: u32,
    /// Levels `(a, b]` the group occupies after reordering.
    pub levels: (u32, u32),
    /// `gamma^b - gamma^a`.
    pub power: T,
    pub rate: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct GroupedAllocation<T> {
    pub groups: Vec<Group<T>>,
    pub grouped_rate: T,
    pub ungrouped_rate: T,
}

/// Merges all sub-channels of the same case into one contiguous group.
/// Each sub-channel on its own loses `½log₂(kappa_plus_mu)`; a group pays
/// that loss once.
pub fn group<T: Scalar>(a: &Allocation, gamma: T, kappa_plus_mu: u32) -> GroupedAllocation<T> {
    let loss = T::lit(0.5) * T::lit(kappa_plus_mu.max(1) as f64).log2();
    let per = chat(gamma);
    let mut sizes: BTreeMap<UsageCase, u32> = BTreeMap::new();
    for s in &a.slots {
        *sizes.entry(s.case).or_default() += 1;
    }
    let mut groups = Vec::new();
    let mut at = 0;
    let mut grouped = T::zero();
    let mut ungrouped = T::zero();
    for (case, size) in sizes {
        let sz = T::lit(size as f64);
        let rate = (sz * per - loss).max(T::zero());
        grouped = grouped + rate;
        ungrouped = ungrouped + sz * (per - loss).max(T::zero());
        groups.push(Group {
            case,
            size,
            levels: (at, at + size),
            power: gamma.powi((at + size) as i32) - gamma.powi(at as i32),
            rate,
        });
        at += size;
    }
    GroupedAllocation {
        groups,
        grouped_rate: grouped,
        ungrouped_rate: ungrouped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDemand {
    pub demand: DemandTuple,
    pub value: f64,
    /// True when found by exhaustive search.
    pub optimal: bool,
}

/// Integer demand maximizing `Σ w·r` under the counting bounds. Exhaustive
/// for Ñ1 <= 12, greedy above.
pub fn max_weighted_demand(weights: [f64; 6], n_tilde: [u32; 3]) -> Result<WeightedDemand> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::domain("weights must be nonnegative"));
    }
    let [n1, n2, n3] = n_tilde;
    if !(n1 >= n2 && n2 >= n3 && n3 >= 1) {
        return Err(Error::config(format!("need Ñ1 >= Ñ2 >= Ñ3 >= 1, got {n_tilde:?}")));
    }
    let value = |r: &[u32; 6]| r.iter().zip(&weights).map(|(&x, w)| x as f64 * w).sum::<f64>();
    if n1 > 12 {
        let mut r = [0u32; 6];
        loop {
            let best = (0..6)
                .filter(|&i| weights[i] > 0.0)
                .filter(|&i| {
                    let mut t = r;
                    t[i] += 1;
                    feasible(&DemandTuple(t), n_tilde)
                })
                .max_by(|&a, &b| weights[a].partial_cmp(&weights[b]).unwrap().then(b.cmp(&a)));
            match best {
                Some(i) => r[i] += 1,
                None => break,
            }
        }
        return Ok(WeightedDemand {
            demand: DemandTuple(r),
            value: value(&r),
            optimal: false,
        });
    }
    // Every bound is a sum of nonnegative entries, so a partial tuple that
    // already breaks one can be pruned with the remaining entries at zero.
    fn search(r: &mut [u32; 6], i: usize, n: [u32; 3], value: &dyn Fn(&[u32; 6]) -> f64, best: &mut ([u32; 6], f64)) {
        if i == 6 {
            let v = value(r);
            if v > best.1 {
                *best = (*r, v);
            }
            return;
        }
        for x in 0..=n[0] {
            r[i] = x;
            if !feasible(&DemandTuple(*r), n) {
                break;
            }
            search(r, i + 1, n, value, best);
        }
        r[i] = 0;
    }
    let mut best = ([0u32; 6], 0.0f64);
    search(&mut [0; 6], 0, n_tilde, &value, &mut best);
    Ok(WeightedDemand {
        demand: DemandTuple(best.0),
        value: best.1,
        optimal: true,
    })
}
