//! Drives a single KV pool by hand: two agents share a prompt, a third
//! model lives in its own namespace, and a small capacity forces LRU
//! eviction of unpinned leaves.

use kvshare_sim::kv::{Namespace, Pool};
use kvshare_sim::model::{ModelId, SimTime};

fn main() {
    let mut pool = Pool::new(4, 8);
    let prompt: Vec<u64> = (0..10).collect();
    let shared = Namespace::Shared;

    // Agent 1: cold. Ten tokens index two full blocks; the tail of two is ignored.
    let m = pool.longest_prefix_match(shared, &prompt, SimTime(0));
    println!("agent 1 cold: matched {} of {}", m.matched_tokens, prompt.len());
    let new = pool.insert(shared, &prompt, SimTime(10)).unwrap();
    println!("  inserted {} blocks", new.len());
    pool.release(&m.blocks).unwrap();

    // Agent 2 extends the same context by six tokens.
    let ctx2: Vec<u64> = (0..16).collect();
    let m = pool.longest_prefix_match(shared, &ctx2, SimTime(20));
    println!("agent 2 warm: matched {} of {}", m.matched_tokens, ctx2.len());
    pool.insert(shared, &ctx2, SimTime(30)).unwrap();
    pool.release(&m.blocks).unwrap();

    // Same tokens under a per-model namespace share nothing.
    let own = Namespace::PerModel(ModelId(2));
    let m = pool.longest_prefix_match(own, &ctx2, SimTime(40));
    println!("model 2 namespace: matched {}", m.matched_tokens);
    pool.release(&m.blocks).unwrap();

    // Fill past capacity; the oldest unpinned leaf goes first.
    let other: Vec<u64> = (100..124).collect();
    match pool.insert(own, &other, SimTime(50)) {
        Ok(b) => println!("inserted {} blocks for model 2", b.len()),
        Err(e) => println!("insert failed: {e}"),
    }
    let st = pool.stats();
    println!(
        "used {}/{} blocks, evictions {}, hit ratio {:.3}",
        st.used_blocks,
        st.capacity_blocks,
        st.eviction_count,
        st.hit_ratio()
    );
    for (ns, t) in pool.footprint_tokens() {
        println!("  {ns}: {t} tokens");
    }
    print!("{}", pool.dump());
}
