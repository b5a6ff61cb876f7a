#![allow(dead_code)]

use kvshare_sim::kv::{BlockId, KvError, Namespace, Pool};
use kvshare_sim::model::{
    AgentProfile, ContextMode, ModelId, SessionId, SessionSpec, SimTime, Token,
};
use kvshare_sim::SimConfig;

// ---------------------------------------------------------------------------
// Flat-list + LRU-queue oracle for the prefix pool.
//
// Every cached block is a flat record holding the full token path from the
// namespace root. Lookups scan for the longest run of present paths, and
// eviction scans for the unpinned record with no extension in the list,
// ordered by (last_access, id).

#[derive(Debug, Clone)]
struct Rec {
    ns: Namespace,
    path: Vec<Token>,
    id: u64,
    refs: u32,
    last: u64,
}

#[derive(Debug, Clone)]
pub struct Oracle {
    bs: usize,
    cap: usize,
    recs: Vec<Rec>,
    next_id: u64,
    pub evicted: Vec<(u64, u32)>,
    pub matched: u64,
    pub lookups: u64,
}

impl Oracle {
    pub fn new(bs: usize, cap: usize) -> Self {
        Self {
            bs,
            cap,
            recs: Vec::new(),
            next_id: 0,
            evicted: Vec::new(),
            matched: 0,
            lookups: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.recs.len()
    }

    fn rec(&mut self, id: u64) -> &mut Rec {
        self.recs.iter_mut().find(|r| r.id == id).unwrap()
    }

    fn prefix_ids(&self, ns: Namespace, q: &[Token]) -> Vec<u64> {
        let mut out = Vec::new();
        for d in 1..=q.len() / self.bs {
            match self.recs.iter().find(|r| r.ns == ns && r.path == q[..d * self.bs]) {
                Some(r) => out.push(r.id),
                None => break,
            }
        }
        out
    }

    pub fn lookup(&mut self, ns: Namespace, q: &[Token], now: u64) -> (usize, Vec<u64>) {
        let ids = self.prefix_ids(ns, q);
        for &id in &ids {
            let r = self.rec(id);
            r.refs += 1;
            r.last = now;
        }
        self.lookups += q.len() as u64;
        self.matched += (ids.len() * self.bs) as u64;
        (ids.len() * self.bs, ids)
    }

    fn has_extension(&self, r: &Rec) -> bool {
        self.recs
            .iter()
            .any(|c| c.ns == r.ns && c.path.len() == r.path.len() + self.bs && c.path.starts_with(&r.path))
    }

    pub fn evict_until(&mut self, need: usize) -> Result<usize, (usize, usize)> {
        let mut n = 0;
        while self.cap - self.recs.len() < need {
            let victim = self
                .recs
                .iter()
                .filter(|r| r.refs == 0 && !self.has_extension(r))
                .min_by_key(|r| (r.last, r.id))
                .map(|r| r.id);
            let Some(id) = victim else {
                return Err((need, self.cap - self.recs.len()));
            };
            self.recs.retain(|r| r.id != id);
            self.evicted.push((id, 0));
            n += 1;
        }
        Ok(n)
    }

    pub fn insert(&mut self, ns: Namespace, seq: &[Token], now: u64) -> Result<Vec<u64>, (usize, usize)> {
        let total = seq.len() / self.bs;
        let existing = self.prefix_ids(ns, seq);
        let need = total - existing.len();
        for &id in &existing {
            self.rec(id).refs += 1;
        }
        let room = if self.cap - self.recs.len() < need {
            self.evict_until(need).map(|_| ())
        } else {
            Ok(())
        };
        for &id in &existing {
            let r = self.rec(id);
            r.refs -= 1;
            r.last = now;
        }
        room?;
        let mut new = Vec::new();
        for d in existing.len() + 1..=total {
            let id = self.next_id;
            self.next_id += 1;
            self.recs.push(Rec {
                ns,
                path: seq[..d * self.bs].to_vec(),
                id,
                refs: 0,
                last: now,
            });
            new.push(id);
        }
        Ok(new)
    }

    pub fn pin(&mut self, ids: &[u64]) {
        for &id in ids {
            self.rec(id).refs += 1;
        }
    }

    pub fn release(&mut self, ids: &[u64]) {
        for &id in ids {
            self.rec(id).refs -= 1;
        }
    }

    pub fn footprint(&self) -> std::collections::BTreeMap<Namespace, u64> {
        let mut m = std::collections::BTreeMap::new();
        for r in &self.recs {
            *m.entry(r.ns).or_insert(0) += self.bs as u64;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub enum Op {
    Lookup { ns: u8, seq: Vec<Token> },
    Insert { ns: u8, seq: Vec<Token>, pin: bool },
    Release { pick: usize },
    Evict { need: usize },
    Tick { dt: u64 },
}

pub fn ns_of(n: u8) -> Namespace {
    match n % 3 {
        0 => Namespace::Shared,
        k => Namespace::PerModel(ModelId(u32::from(k))),
    }
}

fn ids(v: &[BlockId]) -> Vec<u64> {
    v.iter().map(|b| b.0).collect()
}

fn to_blocks(v: &[u64]) -> Vec<BlockId> {
    v.iter().map(|&b| BlockId(b)).collect()
}

/// Replays `ops` against a real pool and the oracle and panics on the first
/// divergence. Returns the number of ops applied.
pub fn check_against_oracle(bs: usize, cap: usize, ops: &[Op]) -> usize {
    let mut pool = Pool::new(bs, cap).with_eviction_log();
    let mut oracle = Oracle::new(bs, cap);
    let mut pins: Vec<Vec<u64>> = Vec::new();
    let mut now = 0u64;
    for (i, op) in ops.iter().enumerate() {
        match op {
            Op::Lookup { ns, seq } => {
                let m = pool.longest_prefix_match(ns_of(*ns), seq, SimTime(now));
                let (len, o) = oracle.lookup(ns_of(*ns), seq, now);
                assert_eq!(m.matched_tokens, len, "op {i}: {op:?}");
                assert_eq!(ids(&m.blocks), o, "op {i}: {op:?}");
                pins.push(o);
            }
            Op::Insert { ns, seq, pin } => {
                let got = pool.insert(ns_of(*ns), seq, SimTime(now));
                let want = oracle.insert(ns_of(*ns), seq, now);
                match (&got, &want) {
                    (Ok(g), Ok(w)) => {
                        assert_eq!(&ids(g), w, "op {i}: {op:?}");
                        if *pin {
                            pool.pin(g).unwrap();
                            oracle.pin(w);
                            pins.push(w.clone());
                        }
                    }
                    (Err(KvError::CapacityExhausted { need, available }), Err((n, a))) => {
                        assert_eq!((*need, *available), (*n, *a), "op {i}: {op:?}");
                    }
                    _ => panic!("op {i}: {op:?}: pool {got:?} vs oracle {want:?}"),
                }
            }
            Op::Release { pick } => {
                if !pins.is_empty() {
                    let set = pins.swap_remove(pick % pins.len());
                    pool.release(&to_blocks(&set)).unwrap();
                    oracle.release(&set);
                }
            }
            Op::Evict { need } => {
                let got = pool.evict_until(*need);
                let want = oracle.evict_until(*need);
                match (&got, &want) {
                    (Ok(g), Ok(w)) => assert_eq!(g, w, "op {i}: {op:?}"),
                    (Err(KvError::CapacityExhausted { need, available }), Err((n, a))) => {
                        assert_eq!((*need, *available), (*n, *a), "op {i}: {op:?}");
                    }
                    _ => panic!("op {i}: {op:?}: pool {got:?} vs oracle {want:?}"),
                }
            }
            Op::Tick { dt } => now += dt,
        }
        let log: Vec<(u64, u32)> = pool.eviction_log().iter().map(|&(b, r)| (b.0, r)).collect();
        assert_eq!(log, oracle.evicted, "eviction trace after op {i}");
        assert_eq!(pool.used_blocks(), oracle.len(), "after op {i}");
        assert_eq!(pool.footprint_tokens(), oracle.footprint(), "after op {i}");
        let st = pool.stats();
        assert_eq!((st.matched_tokens, st.lookup_tokens), (oracle.matched, oracle.lookups));
    }
    ops.len()
}

/// Deterministic op generator for bulk runs. Tokens come from a tiny
/// alphabet so prefixes collide often.
pub fn random_ops(rng: &mut impl rand_xoshiro::rand_core::RngCore, n: usize, bs: usize) -> Vec<Op> {
    let mut below = |k: u64| rng.next_u64() % k;
    let mut ops = Vec::with_capacity(n);
    for _ in 0..n {
        let ns = below(3) as u8;
        let len = below(6 * bs as u64 + 1) as usize;
        let alphabet = 1 + below(3);
        let seq: Vec<Token> = (0..len).map(|_| below(alphabet)).collect();
        ops.push(match below(10) {
            0..=2 => Op::Lookup { ns, seq },
            3..=5 => Op::Insert { ns, seq, pin: below(3) == 0 },
            6 | 7 => Op::Release { pick: below(64) as usize },
            8 => Op::Evict { need: below(8) as usize },
            _ => Op::Tick { dt: below(3) },
        });
    }
    ops
}

// ---------------------------------------------------------------------------
// Straight-line schedule calculator for one session running alone.
//
// Costs are recomputed here from the default constants rather than through
// the library so the check is independent of `CostParams`.

pub const BS: u64 = 16;

fn half_up(num: u128, den: u128) -> u64 {
    ((2 * num + den) / (2 * den)) as u64
}

/// prefill_time with overhead 2 ms and 8000 tok/s.
pub fn prefill_us(new_tokens: u64) -> u64 {
    2_000 + half_up(u128::from(new_tokens) * 1_000_000, 8_000)
}

/// decode_step_time with base 10 ms, 0.5 ms per request, 50 us per 1000 KV tokens.
pub fn step_us(batch: u64, kv: u64) -> u64 {
    // 10_000 + 500 b + 0.05 kv, all in units of 1/20 us.
    half_up(u128::from(200_000 + 10_000 * batch + kv), 20)
}

/// Unstaged handoff: 256 KiB per token over 64 GiB/s.
pub fn handoff_us(tokens: u64) -> u64 {
    half_up(u128::from(tokens) * 262_144 * 1_000_000, 64 * (1u128 << 30))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepTiming {
    pub context: u64,
    pub matched: u64,
    pub prefill: u64,
    pub handoff: u64,
    pub ttft: u64,
    pub e2e: u64,
}

/// Expected timings of every request of a lone chained session, in order.
/// `shared` selects one cache namespace for all agents instead of one per model.
pub fn lone_session_schedule(
    prompt: u64,
    turns: u32,
    agents: &[(u32, u64, u64)],
    shared: bool,
) -> Vec<StepTiming> {
    let mut cached: std::collections::BTreeMap<u32, u64> = Default::default();
    let mut ctx = prompt;
    let mut out = Vec::new();
    for _ in 0..turns {
        for &(model, ext, output) in agents {
            ctx += ext;
            let key = if shared { u32::MAX } else { model };
            let matched = cached.get(&key).copied().unwrap_or(0);
            let prefill = prefill_us(ctx - matched);
            cached.insert(key, ctx / BS * BS);
            let handoff = handoff_us(ctx);
            let mut t = prefill + handoff;
            let mut ttft = 0;
            for j in 0..output {
                t += step_us(1, ctx + j);
                if j == 0 {
                    ttft = t;
                }
            }
            out.push(StepTiming {
                context: ctx,
                matched,
                prefill,
                handoff,
                ttft,
                e2e: t,
            });
            ctx += output;
        }
    }
    out
}

pub fn lone_session(prompt: u32, turns: u32, agents: &[(u32, u64, u64)]) -> SessionSpec {
    SessionSpec {
        session_id: SessionId(0),
        arrival_time: SimTime(0),
        initial_prompt_len: prompt,
        turns,
        agent_chain: agents
            .iter()
            .map(|&(m, ext, out)| AgentProfile {
                model_id: ModelId(m),
                input_extension_len: ext as u32,
                output_len: out as u32,
            })
            .collect(),
        context_mode: ContextMode::Chained,
    }
}

/// Default-cost config with an unbounded prefill pool.
pub fn plain_config() -> SimConfig {
    SimConfig::from_toml_str(
        r#"
[cache]
prefill_capacity_blocks = "unbounded"

[workload]
pattern = "react"
arrival_rate = 1.0
duration_s = 1.0
"#,
    )
    .unwrap()
}

pub fn reference_config(name: &str) -> SimConfig {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    SimConfig::load(&path).unwrap()
}
