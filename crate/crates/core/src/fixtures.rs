//! Small hand-checkable logs and seeded random logs for tests.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::MemoryLog;

/// Four examples, two classes, checkpoints at epochs 1, 2 and 3.
///
/// Predictions are `[0,1,1,1]`, `[0,0,0,1]` and `[0,0,0,1]` against labels
/// `[0,1,0,1]`, so the final model misses only example 1 and example 1 was
/// correct at epoch 1.
pub fn t4() -> MemoryLog {
    MemoryLog::from_matrices(
        2,
        vec![1, 2, 3],
        vec![0, 1, 0, 1],
        None,
        vec![
            vec![0.9, 0.1, 0.2, 0.8, 0.4, 0.6, 0.3, 0.7],
            vec![0.8, 0.2, 0.6, 0.4, 0.7, 0.3, 0.1, 0.9],
            vec![0.7, 0.3, 0.55, 0.45, 0.6, 0.4, 0.4, 0.6],
        ],
    )
    .expect("fixture is well formed")
}

/// Random log whose entries are drawn from a coarse lattice (`v / sum` with
/// `v` in `0..5`), so ties and exact 50/50 rows appear often. With
/// `with_clean`, about 30% of examples get a redrawn clean label. Epoch ids are
/// `3, 5, 7, ...`.
pub fn random_log(n: usize, classes: usize, checkpoints: usize, seed: u64, with_clean: bool) -> MemoryLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..classes as u32)).collect();
    let clean = with_clean.then(|| {
        labels
            .iter()
            .map(|&y| if rng.gen_bool(0.3) { rng.gen_range(0..classes as u32) } else { y })
            .collect()
    });
    let matrices = (0..checkpoints)
        .map(|_| {
            let mut m = Vec::with_capacity(n * classes);
            let mut row = vec![0u32; classes];
            for _ in 0..n {
                row.iter_mut().for_each(|v| *v = rng.gen_range(0..5));
                if row.iter().all(|&v| v == 0) {
                    row[rng.gen_range(0..classes)] = 1;
                }
                let sum: u32 = row.iter().sum();
                m.extend(row.iter().map(|&v| v as f32 / sum as f32));
            }
            m
        })
        .collect();
    let epochs = (1..=checkpoints as u64).map(|k| k * 2 + 1).collect();
    MemoryLog::from_matrices(classes, epochs, labels, clean, matrices).expect("lattice rows are well formed")
}
