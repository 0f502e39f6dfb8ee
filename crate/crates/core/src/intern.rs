//! Hash-consing for process and tuple nodes.
//!
//! Every structurally distinct node exists at most once while it is alive, so
//! equality of interned values is pointer equality and hashing is a stored
//! word. Buckets hold weak references; dead entries are swept lazily.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, Weak};

const SHARDS: usize = 64;

pub(crate) trait ShallowEq {
    /// Structural equality assuming children are already interned.
    fn shallow_eq(&self, other: &Self) -> bool;
}

struct Shard<T> {
    buckets: HashMap<u64, Vec<Weak<T>>>,
    sweep_at: usize,
}

pub(crate) struct Interner<T> {
    shards: Vec<Mutex<Shard<T>>>,
}

impl<T: ShallowEq> Interner<T> {
    pub(crate) fn new() -> Self {
        Interner {
            shards: (0..SHARDS)
                .map(|_| {
                    Mutex::new(Shard {
                        buckets: HashMap::new(),
                        sweep_at: 4096,
                    })
                })
                .collect(),
        }
    }

    pub(crate) fn intern(&self, hash: u64, value: T) -> Arc<T> {
        let mut shard = self.shards[(hash as usize) % SHARDS]
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        if shard.buckets.len() > shard.sweep_at {
            shard.buckets.retain(|_, bucket| {
                bucket.retain(|w| w.strong_count() > 0);
                !bucket.is_empty()
            });
            shard.sweep_at = (shard.buckets.len() * 2).max(4096);
        }
        let bucket = shard.buckets.entry(hash).or_default();
        let mut i = 0;
        while i < bucket.len() {
            match bucket[i].upgrade() {
                Some(existing) => {
                    if existing.shallow_eq(&value) {
                        return existing;
                    }
                    i += 1;
                }
                None => {
                    bucket.swap_remove(i);
                }
            }
        }
        let fresh = Arc::new(value);
        bucket.push(Arc::downgrade(&fresh));
        fresh
    }
}

/// splitmix64 finalizer; deterministic across runs and platforms.
pub(crate) fn mix(h: u64, x: u64) -> u64 {
    let mut z = h ^ x.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}
