//! Prints the analytic latencies of the default cost parameters.

use kvshare_sim::cost::CostParams;

fn main() {
    let c = CostParams::default();
    println!("prefill (us)");
    for n in [0u64, 64, 512, 1024, 4096] {
        println!("  {n:>5} new tokens  {:>8}", c.prefill_time(n));
    }
    println!("decode step (us)");
    for (b, kv) in [(1usize, 1024u64), (8, 8192), (64, 65536), (256, 262144)] {
        println!("  batch {b:>3}, {kv:>6} kv tokens  {:>8}", c.decode_step_time(b, kv));
    }
    println!("handoff of 1024 tokens (us)");
    for f in [0.5, 0.9, 0.95] {
        let staged = if c.is_staged(f) { " staged" } else { "" };
        println!("  resident {f:.2}  {:>6}{staged}", c.handoff_time(1024, f));
    }
}
