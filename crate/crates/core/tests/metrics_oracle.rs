//! Metrics against naive enumeration on random logs.

mod support;

use fusekit_core::metrics::*;
use fusekit_core::{CheckpointSource, DenseProbs, SubsetMask};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::*;

fn subset_from_bits(n: usize, bits: u64) -> SubsetMask {
    let idx: Vec<usize> = (0..n).filter(|i| bits >> (i % 64) & 1 == 1).collect();
    if idx.is_empty() {
        SubsetMask::all(n)
    } else {
        SubsetMask::from_indices(n, idx).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn curves_match_enumeration(n in 1usize..=32, c in 2usize..=4, e in 1usize..=8, seed: u64, bits: u64) {
        let log = random_log(n, c, e, seed, true);
        let s = subset_from_bits(n, bits);
        let correct = naive_correct(&log);
        let last = e - 1;
        let total = s.len() as f64;
        let members: Vec<usize> = s.iter().collect();

        let curve = forget_learn_curve(&log, &s).unwrap();
        for k in 0..e {
            let acc = members.iter().filter(|&&i| correct[k][i]).count();
            let m_final: Vec<usize> = members.iter().copied().filter(|&i| !correct[last][i]).collect();
            let m_k: Vec<usize> = members.iter().copied().filter(|&i| !correct[k][i]).collect();
            let f = m_final.iter().filter(|&&i| correct[k][i]).count();
            let l = m_k.iter().filter(|&&i| correct[last][i]).count();
            prop_assert_eq!(curve.acc[k], acc as f64 / total);
            prop_assert_eq!(curve.forget[k], f as f64 / total);
            prop_assert_eq!(curve.learn[k], l as f64 / total);
            // F_e = acc(e, M_E) |M_E| / |T| written literally
            if !m_final.is_empty() {
                let literal = (f as f64 / m_final.len() as f64) * (m_final.len() as f64 / total);
                prop_assert!((literal - curve.forget[k]).abs() < 1e-12);
            }
            prop_assert!((curve.acc[last] - curve.acc[k] - curve.learn[k] + curve.forget[k]).abs() < 1e-12);
            prop_assert_eq!(accuracy(&log, k, &s).unwrap(), acc as f64 / total);
            let mistakes = mistake_set(&log, k, &s).unwrap();
            prop_assert_eq!(mistakes.examples.indices(), &m_k[..]);
        }
        prop_assert_eq!(curve.forget[last], 0.0);
        prop_assert_eq!(curve.learn[last], 0.0);

        // retention
        let retention = retention_curve(&log, &s).unwrap();
        for k in 0..e {
            let right: Vec<usize> = members.iter().copied().filter(|&i| correct[k][i]).collect();
            let kept = right.iter().filter(|&&i| correct[last][i]).count();
            let expected = (!right.is_empty()).then(|| kept as f64 / right.len() as f64);
            prop_assert_eq!(retention[k], expected);
        }

        // histograms
        let persistence = persistence_histogram(&log, &s).unwrap();
        let last_correct = last_correct_histogram(&log, &s).unwrap();
        let mut p_expected = std::collections::BTreeMap::new();
        let mut l_expected = std::collections::BTreeMap::new();
        let mut never = 0;
        for &i in members.iter().filter(|&&i| !correct[last][i]) {
            let times: Vec<usize> = (0..e).filter(|&k| correct[k][i]).collect();
            *p_expected.entry(times.len()).or_insert(0usize) += 1;
            match times.last() {
                Some(&k) => *l_expected.entry(k).or_insert(0usize) += 1,
                None => never += 1,
            }
        }
        prop_assert_eq!(&persistence.bins, &p_expected);
        prop_assert_eq!(persistence.bins.values().sum::<usize>(), persistence.total);
        prop_assert_eq!(&last_correct.bins, &l_expected);
        prop_assert_eq!(last_correct.never, never);
        prop_assert!(last_correct.bins.keys().all(|&k| k < last));
    }

    #[test]
    fn generalized_forget_matches_enumeration(n in 1usize..=32, c in 2usize..=4, e in 1usize..=8, seed: u64, cur_seed: u64) {
        let log = random_log(n, c, e, seed, false);
        let s = SubsetMask::all(n);
        let current_log = random_log(n, c, 1, cur_seed, false);
        let cur = DenseProbs::from_checkpoint(&current_log, 0, &s).unwrap();
        let correct = naive_correct(&log);
        let cur_wrong: Vec<usize> = (0..n).filter(|&i| naive_argmax(cur.row(i)) != log.labels()[i]).collect();
        let got = generalized_forget(&cur, &log, &s).unwrap();
        for k in 0..e {
            let hits = cur_wrong.iter().filter(|&&i| correct[k][i]).count();
            prop_assert_eq!(got[k], hits as f64 / n as f64);
        }
        // reduction to the forget fraction when current is the final checkpoint
        let fin = DenseProbs::from_checkpoint(&log, e - 1, &s).unwrap();
        prop_assert_eq!(generalized_forget(&fin, &log, &s).unwrap(), forget_learn_curve(&log, &s).unwrap().forget);
    }

    #[test]
    fn loss_balance_matches_enumeration(n in 1usize..=32, c in 2usize..=4, e in 1usize..=6, seed: u64, t in 0.0f64..3.0) {
        let log = random_log(n, c, e, seed, true);
        let s = SubsetMask::all(n);
        let clean = log.clean_labels().unwrap();
        let got = large_loss_balance(&log, t, &s).unwrap();
        for (k, cp) in log.checkpoints().iter().enumerate() {
            let mut expected = 0i64;
            for i in 0..n {
                let y = log.labels()[i] as usize;
                let loss = -naive_row(cp, i)[y].ln();
                if loss > t {
                    expected += if log.labels()[i] == clean[i] { 1 } else { -1 };
                }
            }
            prop_assert_eq!(got[k], expected);
        }
    }

    #[test]
    fn amplification_bias_matches_enumeration(
        a in proptest::collection::vec(0u32..5, 0..40),
        b in proptest::collection::vec(0u32..5, 1..40),
    ) {
        let got = amplification_bias(&a, &b, 5).unwrap();
        let mut terms = Vec::new();
        for class in 0..5u32 {
            let ca = a.iter().filter(|&&p| p == class).count();
            let cb = b.iter().filter(|&&p| p == class).count();
            if ca + cb > 0 {
                terms.push(ca.max(cb) as f64 / (ca + cb) as f64);
            }
        }
        let expected = terms.iter().sum::<f64>() / terms.len() as f64 - 0.5;
        prop_assert!((got - expected).abs() < 1e-15);
        prop_assert!((0.0..=0.5).contains(&got));
        prop_assert_eq!(amplification_bias(&b, &b, 5).unwrap(), 0.0);
    }

    #[test]
    fn metrics_are_permutation_equivariant(n in 2usize..=32, c in 2usize..=4, e in 1usize..=6, seed: u64, perm_seed: u64) {
        let log = random_log(n, c, e, seed, true);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let shuffled = permute(&log, &perm);
        let s = SubsetMask::all(n);
        prop_assert_eq!(forget_learn_curve(&log, &s).unwrap(), forget_learn_curve(&shuffled, &s).unwrap());
        prop_assert_eq!(retention_curve(&log, &s).unwrap(), retention_curve(&shuffled, &s).unwrap());
        prop_assert_eq!(persistence_histogram(&log, &s).unwrap(), persistence_histogram(&shuffled, &s).unwrap());
        let a = last_correct_histogram(&log, &s).unwrap();
        let b = last_correct_histogram(&shuffled, &s).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(large_loss_balance(&log, 1.0, &s).unwrap(), large_loss_balance(&shuffled, 1.0, &s).unwrap());
        // a sub-subset maps through the permutation
        let inverse = { let mut inv = vec![0; n]; for (j, &i) in perm.iter().enumerate() { inv[i] = j; } inv };
        let sub = SubsetMask::from_indices(n, (0..n).step_by(2)).unwrap();
        let sub_perm = SubsetMask::from_indices(n, sub.iter().map(|i| inverse[i])).unwrap();
        prop_assert_eq!(forget_learn_curve(&log, &sub).unwrap(), forget_learn_curve(&shuffled, &sub_perm).unwrap());
    }
}
