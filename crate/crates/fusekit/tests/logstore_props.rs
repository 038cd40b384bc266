use fusekit::logstore::{open_log, validate_log, write_log, Violation};
use fusekit_core::checkpoint::check_header;
use fusekit_core::metrics::forget_learn_curve;
use fusekit_core::{CheckpointSource, MemoryLog, SubsetMask};
use proptest::prelude::*;

/// Rows with arbitrary positive weights, normalized in single precision.
fn matrix(n: usize, c: usize) -> impl Strategy<Value = Vec<f32>> {
    proptest::collection::vec(proptest::collection::vec(1e-6f32..1.0, c), n).prop_map(|rows| {
        rows.into_iter()
            .flat_map(|row| {
                let sum: f32 = row.iter().sum();
                row.into_iter().map(move |v| v / sum)
            })
            .collect()
    })
}

fn log_parts() -> impl Strategy<Value = (usize, Vec<u64>, Vec<u32>, Vec<Vec<f32>>)> {
    (1usize..12, 2usize..6, 1usize..6).prop_flat_map(|(n, c, e)| {
        (
            Just(c),
            proptest::collection::btree_set(0u64..1000, e).prop_map(|s| s.into_iter().collect::<Vec<_>>()),
            proptest::collection::vec(0..c as u32, n),
            proptest::collection::vec(matrix(n, c), e),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_is_bit_exact((c, epochs, labels, matrices) in log_parts(), with_clean: bool) {
        let clean: Option<Vec<u32>> = with_clean.then(|| labels.iter().map(|&y| (y + 1) % c as u32).collect());
        let tmp = tempfile::tempdir().unwrap();
        write_log(tmp.path(), c, &epochs, &labels, clean.as_deref(), &matrices).unwrap();
        prop_assert!(validate_log(tmp.path()).is_valid());
        let log = open_log(tmp.path()).unwrap();
        prop_assert_eq!(log.epochs(), &epochs[..]);
        prop_assert_eq!(log.labels(), &labels[..]);
        prop_assert_eq!(log.clean_labels(), clean.as_deref());
        for (k, m) in matrices.iter().enumerate() {
            let bits: Vec<u32> = log.with_checkpoint(k, |cp| cp.raw().iter().map(|v| v.to_bits()).collect()).unwrap();
            prop_assert_eq!(bits, m.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
        // the disk log and the in-memory log are interchangeable
        let mem = MemoryLog::from_matrices(c, epochs.clone(), labels.clone(), clean, matrices).unwrap();
        let all = SubsetMask::all(labels.len());
        prop_assert_eq!(forget_learn_curve(&log, &all).unwrap(), forget_learn_curve(&mem, &all).unwrap());
        prop_assert!(log.meter().peak_bytes() <= log.manifest().slab_bytes());
    }

    #[test]
    fn any_flipped_byte_is_detected((c, epochs, labels, matrices) in log_parts(), pick: usize, bit in 0u8..8) {
        let tmp = tempfile::tempdir().unwrap();
        write_log(tmp.path(), c, &epochs, &labels, None, &matrices).unwrap();
        let mut files: Vec<_> = std::fs::read_dir(tmp.path()).unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "bin"))
            .collect();
        files.sort();
        let path = &files[pick % files.len()];
        let mut bytes = std::fs::read(path).unwrap();
        let at = pick % bytes.len();
        bytes[at] ^= 1 << bit;
        std::fs::write(path, &bytes).unwrap();
        let report = validate_log(tmp.path());
        let detected = report.violations.iter().any(|v| matches!(v, Violation::ChecksumMismatch { .. }));
        prop_assert!(detected);
        prop_assert!(open_log(tmp.path()).is_err());
    }
}

#[test]
fn header_checks_match_core() {
    assert!(check_header(2, 2, &[1, 2], &[0, 1], None).is_ok());
    let tmp = tempfile::tempdir().unwrap();
    assert!(write_log(tmp.path(), 2, &[2, 1], &[0], None, &[vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
}
