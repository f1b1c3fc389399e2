//! Seed derivation for independent random streams.
//!
//! `split(root, parts)` hashes the root seed together with a list of labels
//! using SHA-256 and takes the first eight bytes, little-endian. Each label is
//! length-prefixed so `["ab", "c"]` and `["a", "bc"]` give different streams.
//! Episode seeds are `split(seed_root, [task_id, trial])`; inside an episode
//! the simulator, planner and generator streams are further split by role.

use sha2::{Digest, Sha256};

pub fn split(root: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}

pub fn episode_seed(root: u64, task_id: &str, trial: u32) -> u64 {
    split(root, &[task_id, &trial.to_string()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_length_prefixed() {
        assert_ne!(split(1, &["ab", "c"]), split(1, &["a", "bc"]));
        assert_eq!(split(7, &["x"]), split(7, &["x"]));
        assert_ne!(split(7, &["x"]), split(8, &["x"]));
    }
}
