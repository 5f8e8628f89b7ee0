//! Walks a sharded table through its phases: batched counting, atomic
//! claims, cached reads and owner-local access.

use deskmer::shardstore::{AtomicOp, Phase, Shard, ShardedMap, SoftCache};
use deskmer::workers::Workers;

fn add(shard: &mut Shard<u64, u64, ()>, key: u64, delta: u64) {
    *shard.table.entry(key).or_insert(0) += delta;
}

fn main() {
    let workers = Workers::new(4);
    let mut counts: ShardedMap<u64, u64> = ShardedMap::new(workers.count(), 16);

    // every worker counts the residues of its own range mod 100
    counts.begin_phase(Phase::UpdateOnly).unwrap();
    workers.run(|w| {
        let mut u = counts.updater(add).unwrap();
        for x in (w as u64 * 10_000)..((w as u64 + 1) * 10_000) {
            u.batched_update(x % 100, 1);
        }
        u.finish();
    });
    println!(
        "{} keys after counting, {} batches applied",
        counts.len(),
        counts.batches_applied()
    );

    // workers race to claim each key; exactly one wins per key
    counts.begin_phase(Phase::ReadWrite).unwrap();
    let mut claims: ShardedMap<u64, u64> = ShardedMap::new(workers.count(), 16);
    claims.begin_phase(Phase::ReadWrite).unwrap();
    let won: Vec<usize> = workers.run(|w| {
        (0..100u64)
            .filter(|&k| {
                claims
                    .atomic_rw(
                        k,
                        AtomicOp::CompareAndSwap {
                            expected: None,
                            new: w as u64,
                        },
                    )
                    .unwrap()
                    .succeeded()
            })
            .count()
    });
    println!(
        "claims won per worker: {won:?} (total {})",
        won.iter().sum::<usize>()
    );

    counts.begin_phase(Phase::ReadOnly).unwrap();
    let rates = workers.run(|_| {
        let mut cache = SoftCache::new(32);
        for i in 0..2_000u64 {
            counts.cached_get(&mut cache, &(i % 20)).unwrap();
        }
        cache.hit_rate()
    });
    println!("soft-cache hit rates: {rates:.3?}");
    println!(
        "writes in ReadOnly: {}",
        counts.atomic_rw(1, AtomicOp::FetchOr(1)).unwrap_err()
    );

    counts.begin_phase(Phase::LocalOnly).unwrap();
    let owned: Vec<usize> = workers.run(|w| {
        let local = counts.local_table(w).unwrap();
        let mut n = 0;
        local.for_each_owned(|_, shard| n += shard.table.len());
        n
    });
    println!("keys owned per worker: {owned:?}");
}
