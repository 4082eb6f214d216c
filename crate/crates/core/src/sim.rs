//! Symbolic mod-q run of the extended Y-channel protocol.
//!
//! Each user-active block `b = 1..=B` carries one symbol per used uplink
//! sub-channel. The relay decodes the mod-q sum on uplink `ℓ'` in block
//! `b` and forwards it on the paired downlink in block `b+1`. Users 2 and
//! 3 also hear each other's uplink on `N1` downlink indices; they cancel
//! that by subtracting, one block ahead, the part the victim cannot
//! resolve. Decoding peels known symbols from block `B+1` down to `2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

use crate::alloc::{Allocation, ChannelShape, Stream};
use crate::error::{Error, Result};
use crate::types::{Direction, User};

/// Interference link: `from`'s uplink index `uplink` lands on `to`'s
/// downlink index `downlink` (absolute) as local index `local`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossLink {
    pub from: User,
    pub uplink: u32,
    pub to: User,
    pub local: u32,
    pub downlink: u32,
}

/// User 3's top `N1` uplink indices hit user 2's lowest `N1` downlink
/// indices in order, and symmetrically.
pub fn cross_map(n1: u32, n_tilde: [u32; 3]) -> Result<Vec<CrossLink>> {
    let [a, b, c] = n_tilde;
    if n1 > c {
        return Err(Error::config(format!("N1 = {n1} exceeds Ñ3 = {c}")));
    }
    if !(a >= b && b >= c) {
        return Err(Error::config(format!("need Ñ1 >= Ñ2 >= Ñ3, got {n_tilde:?}")));
    }
    let mut out = Vec::new();
    for (from, to) in [(3u8, 2u8), (2, 3)] {
        let nf = n_tilde[from as usize - 1];
        let nt = n_tilde[to as usize - 1];
        for m in 1..=n1 {
            out.push(CrossLink {
                from,
                uplink: nf - n1 + m,
                to,
                local: m,
                downlink: a - nt + m,
            });
        }
    }
    Ok(out)
}

/// `((a - b) mod q + b) mod q == a mod q`.
pub fn neutralization_identity_check(a: u64, b: u64, q: u64) -> bool {
    assert!(q >= 2, "modulus must be at least 2");
    let (a, b) = (a % q, b % q);
    ((a + q - b) % q + b) % q == a
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub q: u64,
    pub blocks: u32,
    pub allocation: Allocation,
    /// Must equal the allocation's depth.
    pub n1: u32,
    /// Per direction label (`R21`, ...), stream-major: index `k·B + b - 1`.
    #[serde(default)]
    pub messages: BTreeMap<String, Vec<u64>>,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    /// Config with uniformly random messages drawn from `seed`.
    pub fn random(allocation: Allocation, q: u64, blocks: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let demand = allocation.demand();
        let mut messages = BTreeMap::new();
        for d in Direction::ALL {
            let n = (demand.get(d) * blocks) as usize;
            if n > 0 {
                messages.insert(d.label(), (0..n).map(|_| rng.gen_range(0..q)).collect());
            }
        }
        SimConfig {
            q,
            blocks,
            n1: allocation.shape.n1,
            allocation,
            messages,
            seed,
        }
    }
}

/// Symbol `λ` of stream `k` of `dir` in block `block`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub dir: Direction,
    pub k: u32,
    pub block: u32,
}

impl std::fmt::Display for Atom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "λ{}{}[{}]({})", self.dir.dst, self.dir.src, self.k, self.block)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub atom: String,
    pub coeff: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// User symbol on an uplink sub-channel.
    Tx,
    /// Relay symbol on a downlink sub-channel.
    Relay,
    /// What a user hears on a downlink sub-channel.
    Rx,
}

/// One (block, sub-channel, node) entry. `node` 0 is the relay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub block: u32,
    pub subchannel: u32,
    pub node: u8,
    pub role: Role,
    pub symbol: u64,
    pub terms: Vec<Term>,
    /// Rx only: the part contributed by the other user's uplink.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interference: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeStep {
    pub user: User,
    pub block: u32,
    pub subchannel: u32,
    pub atom: String,
    pub value: u64,
}

/// A pre-subtraction applied by user `by` on uplink `uplink` in `block`
/// to protect `victim` on downlink `downlink`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alteration {
    pub by: User,
    pub victim: User,
    pub block: u32,
    pub uplink: u32,
    pub downlink: u32,
    pub removed: Vec<String>,
}

/// The relay forwards on a downlink the victim hears as interfered, but
/// the interfering user cannot reach the paired uplink.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocked {
    pub by: User,
    pub victim: User,
    pub uplink: u32,
    pub downlink: u32,
}

/// First observation a user needs but cannot resolve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub user: User,
    pub block: u32,
    pub subchannel: u32,
    pub unresolved: Vec<String>,
    /// Whether the other user's uplink contributes to this observation.
    pub interfered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub q: u64,
    pub blocks: u32,
    pub records: Vec<TraceRecord>,
    pub alterations: Vec<Alteration>,
    pub blocked: Vec<Blocked>,
    pub decode_log: Vec<DecodeStep>,
}

impl SimTrace {
    /// One JSON object per line, records first.
    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_decode_log(&self, mut w: impl Write) -> std::io::Result<()> {
        for s in &self.decode_log {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub trace: SimTrace,
    /// Per direction label; `None` where the destination failed.
    pub decoded: BTreeMap<String, Vec<Option<u64>>>,
    pub success: bool,
    pub residual: Option<ResidualReport>,
}

/// Sparse linear form: `(atom id, coefficient mod q)`, sorted by id.
type Form = Vec<(usize, u64)>;

fn inverse(c: u64, q: u64) -> Option<u64> {
    let (mut r0, mut r1) = (q as i128, (c % q) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let k = r0 / r1;
        (r0, r1) = (r1, r0 - k * r1);
        (t0, t1) = (t1, t0 - k * t1);
    }
    (r0 == 1).then(|| t0.rem_euclid(q as i128) as u64)
}

struct Observation {
    user: User,
    block: u32,
    downlink: u32,
    /// Ranges into the shared term arena.
    form: std::ops::Range<usize>,
    cross: std::ops::Range<usize>,
    needed: bool,
}

struct Observations {
    list: Vec<Observation>,
    terms: Form,
}

impl Observations {
    fn form(&self, o: &Observation) -> &[(usize, u64)] {
        &self.terms[o.form.clone()]
    }

    fn cross(&self, o: &Observation) -> &[(usize, u64)] {
        &self.terms[o.cross.clone()]
    }
}

/// Protocol algebra shared by the simulator and the allocation checker.
/// Signals are dense coefficient rows over all atoms.
struct Engine<'a> {
    sh: ChannelShape,
    a: &'a Allocation,
    q: u64,
    blocks: u32,
    atoms: Vec<Atom>,
    atom_id: BTreeMap<(Direction, u32), usize>,
    /// Rows indexed by (user, uplink, block), blocks 0..=B+1.
    tx: Vec<u64>,
    /// Rows indexed by (downlink, block).
    relay: Vec<u64>,
    /// Slot index forwarded on each downlink.
    on_downlink: Vec<Option<usize>>,
    /// Slot index decoded on each uplink.
    up_slot: Vec<Option<usize>>,
    zero: Vec<u64>,
    links: Vec<CrossLink>,
    alterations: Vec<Alteration>,
    blocked: Vec<Blocked>,
    /// Record alterations and decode steps for the trace.
    record: bool,
}

impl<'a> Engine<'a> {
    fn new(a: &'a Allocation, q: u64, blocks: u32) -> Result<Self> {
        let sh = a.shape;
        let n = sh.top() as usize;
        let streams: Vec<Vec<Stream>> = a.slot_streams();
        let mut atom_id = BTreeMap::new();
        let mut atoms = Vec::new();
        for st in streams.iter().flatten() {
            if let std::collections::btree_map::Entry::Vacant(e) = atom_id.entry((st.dir, st.k)) {
                e.insert(atoms.len());
                for b in 1..=blocks {
                    atoms.push(Atom {
                        dir: st.dir,
                        k: st.k,
                        block: b,
                    });
                }
            }
        }
        let w = atoms.len();
        let nb = blocks as usize + 2;
        let k = a.slots.len();
        let mut on_downlink = vec![None; n + 1];
        let mut up_slot = vec![None; n + 1];
        for (i, s) in a.slots.iter().enumerate() {
            on_downlink[s.downlink as usize] = Some(i);
            up_slot[s.uplink as usize] = Some(i);
        }
        let mut e = Engine {
            sh,
            a,
            q,
            blocks,
            atoms,
            atom_id,
            tx: vec![0; 3 * k * nb * w],
            relay: vec![0; k * nb * w],
            on_downlink,
            up_slot,
            zero: vec![0; w],
            links: cross_map(sh.n1, sh.n_tilde)?,
            alterations: Vec::new(),
            blocked: Vec::new(),
            record: true,
        };
        for (s, sts) in a.slots.iter().zip(&streams) {
            for st in sts {
                let base = e.atom_id[&(st.dir, st.k)];
                for b in 1..=blocks {
                    let r = e.tx_at(st.dir.src, s.uplink, b).expect("slot uplink");
                    e.tx[r + base + b as usize - 1] += 1;
                }
            }
        }
        Ok(e)
    }

    fn width(&self) -> usize {
        self.atoms.len()
    }

    /// Row offset of a user's signal; unused uplinks carry nothing.
    fn tx_at(&self, u: User, l: u32, b: u32) -> Option<usize> {
        let nb = self.blocks as usize + 2;
        let k = self.a.slots.len();
        self.up_slot[l as usize].map(|i| (((u as usize - 1) * k + i) * nb + b as usize) * self.width())
    }

    fn relay_at(&self, d: u32, b: u32) -> Option<usize> {
        let nb = self.blocks as usize + 2;
        self.on_downlink[d as usize].map(|i| (i * nb + b as usize) * self.width())
    }

    fn tx_row(&self, u: User, l: u32, b: u32) -> &[u64] {
        match self.tx_at(u, l, b) {
            Some(r) => &self.tx[r..r + self.width()],
            None => &self.zero,
        }
    }

    fn relay_row(&self, d: u32, b: u32) -> &[u64] {
        match self.relay_at(d, b) {
            Some(r) => &self.relay[r..r + self.width()],
            None => &self.zero,
        }
    }

    fn label(&self, id: usize) -> String {
        self.atoms[id].to_string()
    }

    fn slot_on_downlink(&self, d: u32) -> Option<&crate::alloc::Slot> {
        self.on_downlink[d as usize].map(|i| &self.a.slots[i])
    }

    /// Pre-subtractions, latest block first so that each one sees the
    /// already altered signal of the next block.
    fn neutralize(&mut self) {
        let q = self.q;
        let links = self.links.clone();
        for link in &links {
            let Some(slot) = self.slot_on_downlink(link.downlink).copied() else {
                continue;
            };
            if slot.uplink > self.sh.count(link.from) {
                self.blocked.push(Blocked {
                    by: link.from,
                    victim: link.to,
                    uplink: slot.uplink,
                    downlink: link.downlink,
                });
            }
        }
        let mut u: Form = Vec::new();
        for b in (1..self.blocks).rev() {
            for link in &links {
                let Some(slot) = self.slot_on_downlink(link.downlink).copied() else {
                    continue;
                };
                let (t, v) = (link.from, link.to);
                if slot.uplink > self.sh.count(t) {
                    continue;
                }
                u.clear();
                u.extend(
                    self.tx_row(t, link.uplink, b + 1)
                        .iter()
                        .enumerate()
                        .filter(|&(id, &c)| c != 0 && self.atoms[id].dir.dst != v)
                        .map(|(id, &c)| (id, c)),
                );
                if u.is_empty() {
                    continue;
                }
                let r = self.tx_at(t, slot.uplink, b).expect("slot uplink");
                for &(id, c) in &u {
                    let x = &mut self.tx[r + id];
                    *x = (*x + q - c) % q;
                }
                if self.record {
                    let removed = u.iter().map(|&(id, _)| self.label(id)).collect();
                    self.alterations.push(Alteration {
                        by: t,
                        victim: v,
                        block: b,
                        uplink: slot.uplink,
                        downlink: link.downlink,
                        removed,
                    });
                }
            }
        }
    }

    fn forward(&mut self) {
        let w = self.width();
        for s in &self.a.slots {
            for b in 2..=self.blocks + 1 {
                let r = self.relay_at(s.downlink, b).expect("slot downlink");
                for u in 1..=3 {
                    let t = self.tx_at(u, s.uplink, b - 1).expect("slot uplink");
                    for i in 0..w {
                        self.relay[r + i] = (self.relay[r + i] + self.tx[t + i]) % self.q;
                    }
                }
            }
        }
    }

    fn observations(&self) -> Observations {
        let w = self.width();
        let mut list = Vec::new();
        let mut terms: Form = Vec::new();
        let push = |terms: &mut Form, row: &mut dyn Iterator<Item = u64>| {
            let start = terms.len();
            terms.extend(row.enumerate().filter(|&(_, c)| c != 0));
            start..terms.len()
        };
        for b in (2..=self.blocks + 1).rev() {
            for d in 1..=self.sh.top() {
                let needers = self.slot_on_downlink(d).map(|s| s.case.receivers()).unwrap_or_default();
                let relay = self.relay_row(d, b);
                let mut plain = None;
                for v in 1..=3u8 {
                    if !self.sh.receives(v, d) {
                        continue;
                    }
                    let link = self.links.iter().find(|l| l.to == v && l.downlink == d);
                    let (form, cross) = match link {
                        Some(l) if b <= self.blocks => {
                            let c = self.tx_row(l.from, l.uplink, b);
                            let cross = push(&mut terms, &mut c.iter().copied());
                            let form = push(&mut terms, &mut (0..w).map(|i| (relay[i] + c[i]) % self.q));
                            (form, cross)
                        }
                        _ => {
                            let form = plain.get_or_insert_with(|| push(&mut terms, &mut relay.iter().copied())).clone();
                            (form, 0..0)
                        }
                    };
                    list.push(Observation {
                        user: v,
                        block: b,
                        downlink: d,
                        form,
                        cross,
                        needed: needers.contains(&v),
                    });
                }
            }
        }
        Observations { list, terms }
    }

    fn eval(&self, f: &[(usize, u64)], values: &[u64]) -> u64 {
        f.iter().fold(0, |acc, &(id, c)| (acc + c % self.q * values[id]) % self.q)
    }

    fn eval_row(&self, row: &[u64], values: &[u64]) -> u64 {
        row.iter().zip(values).fold(0, |acc, (&c, &x)| (acc + c * x) % self.q)
    }

    /// Peels observations to a fixpoint, latest block first. Returns the
    /// values each user knows (indexed by atom id) and the decode log.
    fn decode(&self, obs: &Observations, values: &[u64]) -> (Vec<Vec<Option<u64>>>, Vec<DecodeStep>) {
        let q = self.q;
        let mut known = vec![vec![None; self.atoms.len()]; 4];
        for (id, at) in self.atoms.iter().enumerate() {
            known[at.dir.src as usize][id] = Some(values[id]);
        }
        let symbols: Vec<u64> = obs.list.iter().map(|o| self.eval(obs.form(o), values)).collect();
        let mut log = Vec::new();
        for v in 1..=3usize {
            loop {
                let mut progress = false;
                for (o, &y) in obs.list.iter().zip(&symbols) {
                    if o.user as usize != v {
                        continue;
                    }
                    let mut unknown = None;
                    let mut count = 0;
                    let mut rest = y;
                    for &(id, c) in obs.form(o) {
                        match known[v][id] {
                            Some(x) => rest = (rest + q - c * x % q) % q,
                            None => {
                                count += 1;
                                unknown = Some((id, c));
                            }
                        }
                    }
                    if count != 1 {
                        continue;
                    }
                    let (id, c) = unknown.unwrap();
                    let Some(inv) = inverse(c, q) else { continue };
                    let x = rest * inv % q;
                    known[v][id] = Some(x);
                    progress = true;
                    if self.record {
                        log.push(DecodeStep {
                            user: v as User,
                            block: o.block,
                            subchannel: o.downlink,
                            atom: self.label(id),
                            value: x,
                        });
                    }
                }
                if !progress {
                    break;
                }
            }
        }
        (known, log)
    }

    fn residual(&self, obs: &Observations, known: &[Vec<Option<u64>>]) -> Option<ResidualReport> {
        let missing: Vec<bool> = (0..4)
            .map(|v| {
                self.atoms
                    .iter()
                    .enumerate()
                    .any(|(id, at)| at.dir.dst as usize == v && known[v][id].is_none())
            })
            .collect();
        if !missing.iter().any(|&m| m) {
            return None;
        }
        let mut best: Option<&Observation> = None;
        for o in &obs.list {
            let v = o.user as usize;
            if !o.needed || !missing[v] || obs.form(o).iter().all(|&(id, _)| known[v][id].is_some()) {
                continue;
            }
            let key = (o.block, o.downlink, o.user);
            if best.is_none_or(|b| key < (b.block, b.downlink, b.user)) {
                best = Some(o);
            }
        }
        if let Some(o) = best {
            let v = o.user as usize;
            return Some(ResidualReport {
                user: o.user,
                block: o.block,
                subchannel: o.downlink,
                unresolved: obs
                    .form(o)
                    .iter()
                    .filter(|&&(id, _)| known[v][id].is_none())
                    .map(|&(id, _)| self.label(id))
                    .collect(),
                interfered: !o.cross.is_empty(),
            });
        }
        // A destination misses a symbol that no needed observation holds.
        let (v, at) = (1..=3usize).find_map(|v| {
            self.atoms
                .iter()
                .enumerate()
                .find(|(id, at)| at.dir.dst as usize == v && known[v][*id].is_none())
                .map(|(_, at)| (v, at))
        })?;
        Some(ResidualReport {
            user: v as User,
            block: at.block,
            subchannel: 0,
            unresolved: vec![at.to_string()],
            interfered: false,
        })
    }
}

/// Large prime used when only the symbolic structure matters.
const PROBE_Q: u64 = 2_147_483_647;

/// Runs the protocol with generic symbol values and returns the first
/// unresolved observation, if any.
pub(crate) fn symbolic_residual(a: &Allocation, blocks: u32) -> Option<ResidualReport> {
    let mut e = Engine::new(a, PROBE_Q, blocks).ok()?;
    e.record = false;
    e.neutralize();
    e.forward();
    let obs = e.observations();
    // Peeling depends only on which atoms appear, not on their values.
    let values = vec![0; e.atoms.len()];
    let (known, _) = e.decode(&obs, &values);
    e.residual(&obs, &known)
}

fn validate(cfg: &SimConfig) -> Result<()> {
    if !(2..=PROBE_Q).contains(&cfg.q) {
        return Err(Error::config(format!("q = {} must lie in 2..={PROBE_Q}", cfg.q)));
    }
    if cfg.blocks < 1 {
        return Err(Error::config("need at least one block"));
    }
    if cfg.n1 != cfg.allocation.shape.n1 {
        return Err(Error::config(format!(
            "N1 = {} differs from the allocation's {}",
            cfg.n1, cfg.allocation.shape.n1
        )));
    }
    let w = crate::alloc::window_violations(&cfg.allocation);
    if !w.is_empty() {
        return Err(Error::config(format!("allocation breaks index windows: {w:?}")));
    }
    let demand = cfg.allocation.demand();
    for d in Direction::ALL {
        let want = (demand.get(d) * cfg.blocks) as usize;
        let got = cfg.messages.get(&d.label()).map_or(0, |m| m.len());
        if want != got {
            return Err(Error::config(format!("{} needs {want} symbols, got {got}", d.label())));
        }
    }
    if let Some(k) = cfg.messages.keys().find(|k| !Direction::ALL.iter().any(|d| &d.label() == *k)) {
        return Err(Error::config(format!("unknown direction {k}")));
    }
    if cfg.messages.values().flatten().any(|&x| x >= cfg.q) {
        return Err(Error::config(format!("message symbols must lie in 0..{}", cfg.q)));
    }
    Ok(())
}

fn terms(e: &Engine, row: &[u64]) -> Vec<Term> {
    row.iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(id, &c)| Term {
            atom: e.label(id),
            coeff: c,
        })
        .collect()
}

/// Full run: transmission, relaying, neutralization and backward decoding.
pub fn run(cfg: &SimConfig) -> Result<SimOutcome> {
    validate(cfg)?;
    let a = &cfg.allocation;
    let q = cfg.q;
    let mut e = Engine::new(a, q, cfg.blocks)?;
    e.neutralize();
    e.forward();
    let mut values = vec![0u64; e.atoms.len()];
    for (id, at) in e.atoms.iter().enumerate() {
        values[id] = cfg.messages[&at.dir.label()][(at.k * cfg.blocks + at.block - 1) as usize];
    }
    let obs = e.observations();
    let (known, log) = e.decode(&obs, &values);
    let residual = e.residual(&obs, &known);

    let mut records = Vec::new();
    for b in 1..=cfg.blocks + 1 {
        for l in 1..=e.sh.top() {
            for u in 1..=3u8 {
                if l > e.sh.count(u) {
                    continue;
                }
                let f = e.tx_row(u, l, b);
                records.push(TraceRecord {
                    block: b,
                    subchannel: l,
                    node: u,
                    role: Role::Tx,
                    symbol: e.eval_row(f, &values),
                    terms: terms(&e, f),
                    interference: None,
                });
            }
        }
        if b >= 2 {
            for d in 1..=e.sh.top() {
                let f = e.relay_row(d, b);
                records.push(TraceRecord {
                    block: b,
                    subchannel: d,
                    node: 0,
                    role: Role::Relay,
                    symbol: e.eval_row(f, &values),
                    terms: terms(&e, f),
                    interference: None,
                });
            }
            let mut rx: Vec<&Observation> = obs.list.iter().filter(|o| o.block == b).collect();
            rx.sort_by_key(|o| (o.downlink, o.user));
            for o in rx {
                records.push(TraceRecord {
                    block: b,
                    subchannel: o.downlink,
                    node: o.user,
                    role: Role::Rx,
                    symbol: e.eval(obs.form(o), &values),
                    terms: obs
                        .form(o)
                        .iter()
                        .map(|&(id, c)| Term {
                            atom: e.label(id),
                            coeff: c,
                        })
                        .collect(),
                    interference: (!o.cross.is_empty()).then(|| e.eval(obs.cross(o), &values)),
                });
            }
        }
    }

    let demand = a.demand();
    let mut decoded = BTreeMap::new();
    for d in Direction::ALL {
        let n = demand.get(d);
        if n == 0 {
            continue;
        }
        let mut seq = Vec::new();
        for k in 0..n {
            let base = e.atom_id[&(d, k)];
            for b in 0..cfg.blocks as usize {
                seq.push(known[d.dst as usize][base + b]);
            }
        }
        decoded.insert(d.label(), seq);
    }
    let success = cfg.messages.iter().all(|(k, m)| {
        decoded
            .get(k)
            .is_some_and(|got| got.len() == m.len() && got.iter().zip(m).all(|(g, &x)| *g == Some(x)))
    });
    Ok(SimOutcome {
        trace: SimTrace {
            q,
            blocks: cfg.blocks,
            records,
            alterations: e.alterations,
            blocked: e.blocked,
            decode_log: log,
        },
        decoded,
        success,
        residual,
    })
}

/// Runs a configuration expected to fail and returns where it fails.
pub fn negative_run(cfg: &SimConfig) -> Result<ResidualReport> {
    let out = run(cfg)?;
    match out.residual {
        Some(r) if !out.success => Ok(r),
        _ => Err(Error::Internal {
            what: "expected residual interference, but every message decoded".into(),
        }),
    }
}
