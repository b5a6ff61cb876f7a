use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::FxHashMap as HashMap;

use super::{BlockId, KvBlock, KvError, Namespace, PoolStats, PrefixMatch};
use crate::model::{SimTime, Token};

type Children = HashMap<Box<[Token]>, BlockId>;

#[derive(Debug)]
pub(super) struct Node {
    pub(super) namespace: Namespace,
    pub(super) parent: Option<BlockId>,
    pub(super) span: Box<[Token]>,
    pub(super) children: Children,
    pub(super) depth: usize,
    pub(super) ref_count: u32,
    pub(super) last_access: SimTime,
}

impl Node {
    fn evictable(&self) -> bool {
        self.ref_count == 0 && self.children.is_empty()
    }
}

/// A single worker's KV block pool.
#[derive(Debug)]
pub struct Pool {
    block_size: usize,
    capacity: usize,
    pub(super) nodes: HashMap<BlockId, Node>,
    pub(super) roots: BTreeMap<Namespace, Children>,
    /// Exactly the unpinned leaves, keyed for LRU order.
    evictable: BTreeSet<(SimTime, BlockId)>,
    ns_blocks: BTreeMap<Namespace, u64>,
    next_id: u64,
    matched_tokens: u64,
    lookup_tokens: u64,
    eviction_count: u64,
    eviction_log: Option<Vec<(BlockId, u32)>>,
}

impl Pool {
    pub fn new(block_size: usize, capacity_blocks: usize) -> Self {
        assert!(block_size > 0, "block_size must be positive");
        Self {
            block_size,
            capacity: capacity_blocks,
            nodes: HashMap::default(),
            roots: BTreeMap::new(),
            evictable: BTreeSet::new(),
            ns_blocks: BTreeMap::new(),
            next_id: 0,
            matched_tokens: 0,
            lookup_tokens: 0,
            eviction_count: 0,
            eviction_log: None,
        }
    }

    pub fn unbounded(block_size: usize) -> Self {
        Self::new(block_size, usize::MAX)
    }

    /// Records `(block, ref_count at eviction)` for every eviction.
    pub fn with_eviction_log(mut self) -> Self {
        self.eviction_log = Some(Vec::new());
        self
    }

    pub fn eviction_log(&self) -> &[(BlockId, u32)] {
        self.eviction_log.as_deref().unwrap_or(&[])
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn capacity_blocks(&self) -> usize {
        self.capacity
    }

    pub fn used_blocks(&self) -> usize {
        self.nodes.len()
    }

    pub fn free_blocks(&self) -> usize {
        self.capacity - self.nodes.len()
    }

    pub fn stats(&self) -> PoolStats {
        PoolStats {
            capacity_blocks: self.capacity,
            used_blocks: self.used_blocks(),
            free_blocks: self.free_blocks(),
            matched_tokens: self.matched_tokens,
            lookup_tokens: self.lookup_tokens,
            eviction_count: self.eviction_count,
        }
    }

    pub fn block(&self, id: BlockId) -> Option<KvBlock> {
        self.nodes.get(&id).map(|n| KvBlock {
            block_id: id,
            namespace: n.namespace,
            depth: n.depth,
            ref_count: n.ref_count,
            last_access: n.last_access,
        })
    }

    fn children(&self, ns: Namespace, parent: Option<BlockId>) -> Option<&Children> {
        match parent {
            None => self.roots.get(&ns),
            Some(p) => Some(&self.nodes[&p].children),
        }
    }

    /// Cached path for the full blocks of `seq`, without touching any state.
    fn cached_path(&self, ns: Namespace, seq: &[Token]) -> Vec<BlockId> {
        let mut path = Vec::new();
        let mut parent = None;
        for chunk in seq.chunks_exact(self.block_size) {
            let Some(next) = self.children(ns, parent).and_then(|c| c.get(chunk)) else {
                break;
            };
            path.push(*next);
            parent = Some(*next);
        }
        path
    }

    /// Block-aligned cached prefix length of `query`, without pinning or
    /// counting a lookup.
    pub fn peek_prefix_len(&self, ns: Namespace, query: &[Token]) -> usize {
        self.cached_path(ns, query).len() * self.block_size
    }

    /// Applies `f` to a node while keeping the evictable index consistent.
    fn update(&mut self, id: BlockId, f: impl FnOnce(&mut Node)) {
        let node = self.nodes.get_mut(&id).expect("live block");
        if node.evictable() {
            self.evictable.remove(&(node.last_access, id));
        }
        f(node);
        if node.evictable() {
            self.evictable.insert((node.last_access, id));
        }
    }

    /// Longest cached block-aligned prefix of `query` in `ns`. Returned blocks
    /// are pinned and their `last_access` set to `now`.
    pub fn longest_prefix_match(
        &mut self,
        ns: Namespace,
        query: &[Token],
        now: SimTime,
    ) -> PrefixMatch {
        let blocks = self.cached_path(ns, query);
        for &id in &blocks {
            self.update(id, |n| {
                n.ref_count += 1;
                n.last_access = now;
            });
        }
        let matched_tokens = blocks.len() * self.block_size;
        self.lookup_tokens += query.len() as u64;
        self.matched_tokens += matched_tokens as u64;
        PrefixMatch {
            matched_tokens,
            blocks,
        }
    }

    /// Caches every full block of `seq` in `ns`. Already cached prefix blocks
    /// are reused and touched; the returned list holds only newly allocated
    /// blocks (unpinned). Tail tokens past the last full block are ignored.
    pub fn insert(
        &mut self,
        ns: Namespace,
        seq: &[Token],
        now: SimTime,
    ) -> Result<Vec<BlockId>, KvError> {
        let total = seq.len() / self.block_size;
        let existing = self.cached_path(ns, seq);
        let need = total - existing.len();

        // Hold the existing path while making room so it cannot be trimmed.
        for &id in &existing {
            self.update(id, |n| n.ref_count += 1);
        }
        let room = if self.free_blocks() < need {
            self.evict_until(need).map(|_| ())
        } else {
            Ok(())
        };
        for &id in &existing {
            self.update(id, |n| {
                n.ref_count -= 1;
                n.last_access = now;
            });
        }
        room?;

        let mut parent = existing.last().copied();
        let mut allocated = Vec::with_capacity(need);
        for (i, chunk) in seq
            .chunks_exact(self.block_size)
            .enumerate()
            .skip(existing.len())
        {
            let id = BlockId(self.next_id);
            self.next_id += 1;
            let span: Box<[Token]> = chunk.into();
            match parent {
                None => {
                    self.roots.entry(ns).or_default().insert(span.clone(), id);
                }
                Some(p) => self.update(p, |n| {
                    n.children.insert(span.clone(), id);
                }),
            }
            self.nodes.insert(
                id,
                Node {
                    namespace: ns,
                    parent,
                    span,
                    children: Children::default(),
                    depth: i + 1,
                    ref_count: 0,
                    last_access: now,
                },
            );
            self.evictable.insert((now, id));
            *self.ns_blocks.entry(ns).or_default() += 1;
            allocated.push(id);
            parent = Some(id);
        }
        Ok(allocated)
    }

    /// Adds one pin to each listed block.
    pub fn pin(&mut self, blocks: &[BlockId]) -> Result<(), KvError> {
        if let Some(&missing) = blocks.iter().find(|b| !self.nodes.contains_key(b)) {
            return Err(KvError::UnknownBlock(missing));
        }
        for &id in blocks {
            self.update(id, |n| n.ref_count += 1);
        }
        Ok(())
    }

    /// Drops one pin from each listed block. Validated up front: on error
    /// nothing is changed.
    pub fn release(&mut self, blocks: &[BlockId]) -> Result<(), KvError> {
        let mut wanted = blocks.to_vec();
        wanted.sort_unstable();
        for run in wanted.chunk_by(|a, b| a == b) {
            let id = run[0];
            let node = self.nodes.get(&id).ok_or(KvError::UnknownBlock(id))?;
            if (node.ref_count as usize) < run.len() {
                return Err(KvError::RefUnderflow(id));
            }
        }
        for &id in blocks {
            self.update(id, |n| n.ref_count -= 1);
        }
        Ok(())
    }

    /// Evicts unpinned leaves in LRU order until at least `need` blocks are
    /// free. Blocks evicted before an unsatisfiable request fails stay evicted.
    pub fn evict_until(&mut self, need: usize) -> Result<usize, KvError> {
        let mut evicted = 0;
        while self.free_blocks() < need {
            let Some(&(_, victim)) = self.evictable.first() else {
                return Err(KvError::CapacityExhausted {
                    need,
                    available: self.free_blocks(),
                });
            };
            self.remove_leaf(victim);
            evicted += 1;
        }
        Ok(evicted)
    }

    fn remove_leaf(&mut self, id: BlockId) {
        let node = self.nodes.remove(&id).expect("live block");
        debug_assert!(node.children.is_empty() && node.ref_count == 0);
        self.evictable.remove(&(node.last_access, id));
        match node.parent {
            None => {
                let root = self.roots.get_mut(&node.namespace).expect("namespace root");
                root.remove(&node.span);
                if root.is_empty() {
                    self.roots.remove(&node.namespace);
                }
            }
            Some(p) => self.update(p, |n| {
                n.children.remove(&node.span);
            }),
        }
        if let Some(count) = self.ns_blocks.get_mut(&node.namespace) {
            *count -= 1;
            if *count == 0 {
                self.ns_blocks.remove(&node.namespace);
            }
        }
        self.eviction_count += 1;
        if let Some(log) = self.eviction_log.as_mut() {
            log.push((id, node.ref_count));
        }
    }

    /// Indexed token slots per namespace.
    pub fn footprint_tokens(&self) -> BTreeMap<Namespace, u64> {
        self.ns_blocks
            .iter()
            .map(|(&ns, &blocks)| (ns, blocks * self.block_size as u64))
            .collect()
    }

    pub fn total_footprint_tokens(&self) -> u64 {
        self.nodes.len() as u64 * self.block_size as u64
    }

    pub(super) fn sorted_children(&self, children: &Children) -> Vec<BlockId> {
        let mut v: Vec<(&Box<[Token]>, BlockId)> =
            children.iter().map(|(k, &id)| (k, id)).collect();
        v.sort();
        v.into_iter().map(|(_, id)| id).collect()
    }
}
