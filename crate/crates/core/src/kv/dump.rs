use std::fmt::Write as _;

use super::{BlockId, Pool};
use crate::model::Token;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, tokens: &[Token]) -> u64 {
    for t in tokens {
        for byte in t.to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(FNV_PRIME);
        }
    }
    hash
}

impl Pool {
    /// Deterministic text dump of the prefix index, one line per block:
    /// `<namespace> <path-prefix-hash> <block_id> <ref_count> <last_access>`,
    /// indented two spaces per depth level. The hash is FNV-1a over the
    /// little-endian bytes of every token on the root-to-block path.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (ns, root) in &self.roots {
            let mut stack: Vec<(BlockId, u64)> = self
                .sorted_children(root)
                .into_iter()
                .rev()
                .map(|id| (id, FNV_OFFSET))
                .collect();
            while let Some((id, parent_hash)) = stack.pop() {
                let node = &self.nodes[&id];
                let hash = fnv1a(parent_hash, &node.span);
                let _ = writeln!(
                    out,
                    "{:indent$}{} {:016x} {} {} {}",
                    "",
                    ns,
                    hash,
                    id,
                    node.ref_count,
                    node.last_access,
                    indent = 2 * (node.depth - 1)
                );
                for child in self.sorted_children(&node.children).into_iter().rev() {
                    stack.push((child, hash));
                }
            }
        }
        out
    }
}
