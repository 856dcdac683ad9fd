use cmrl::history::{HistoryStore, SampleRule, StepRecord};
use cmrl::rng::{stream, StreamRng};
use proptest::prelude::*;
use rand::Rng;

fn record(t: u64, rng: &mut StreamRng, nonneg: bool) -> StepRecord {
    let lo = if nonneg { 0.0 } else { -1.0 };
    StepRecord {
        t,
        in_vec: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        r_vec: vec![rng.random_range(lo..1.0), rng.random_range(lo..1.0)],
        out_vec: vec![rng.random_range(-1.0..1.0)],
        intrinsic: 0.0,
    }
}

/// A store of trials with the given lengths.
fn store(lengths: &[usize], seed: u64, nonneg: bool) -> HistoryStore {
    let mut rng = stream(seed, "history-test", &[]);
    let mut h = HistoryStore::new(2, 2, 1, seed);
    for (i, &len) in lengths.iter().enumerate() {
        let base = h.len();
        let records = (1..=len as u64).map(|k| record(base + k, &mut rng, nonneg)).collect();
        h.append_trial(&format!("task{}", i % 3), records).unwrap();
    }
    h
}

#[test]
fn ten_thousand_appends_read_back_unchanged() {
    let mut rng = stream(1, "appends", &[]);
    let mut h = HistoryStore::new(2, 2, 1, 1);
    let mut kept = Vec::new();
    for t in 1..=10_000u64 {
        let r = record(t, &mut rng, false);
        kept.push(r.clone());
        h.append(r).unwrap();
        if t % 100 == 0 {
            h.close_trial("chunk").unwrap();
        }
    }
    assert_eq!(h.records(), &kept[..]);
    let mut buf = Vec::new();
    h.write_to(&mut buf).unwrap();
    let back = HistoryStore::read_from(&buf[..]).unwrap();
    assert_eq!(back.records(), &kept[..]);
    assert_eq!(back.trials().len(), 100);
}

#[test]
fn cumulative_reward_matches_brute_force_sum() {
    let h = store(&[7, 30, 1, 42, 20], 9, false);
    assert_eq!(h.len(), 100);
    let brute: f64 = h.records().iter().flat_map(|r| r.r_vec.iter()).sum();
    let cr = h.cumulative_reward(100).unwrap();
    assert!((cr - brute).abs() <= 1e-12 * brute.abs().max(1.0));
}

#[test]
fn uniform_sampling_includes_each_trial_thirty_percent_of_the_time() {
    let h = store(&[3; 10], 2, false);
    let mut rng = stream(2, "sampling", &[]);
    let mut counts = [0usize; 10];
    for _ in 0..10_000 {
        let spans = h.sample_trials(3, SampleRule::UniformRandom, &mut rng).unwrap();
        assert_eq!(spans.len(), 3);
        for s in spans {
            counts[s.trial_id - 1] += 1;
        }
    }
    for c in counts {
        let freq = c as f64 / 10_000.0;
        assert!((freq - 0.3).abs() <= 0.02, "frequency {freq}");
    }
}

proptest! {
    #[test]
    fn spans_partition_time(lengths in prop::collection::vec(1usize..20, 1..15), seed in any::<u64>()) {
        let h = store(&lengths, seed, false);
        let mut next = 1;
        for (span, &len) in h.trials().iter().zip(&lengths) {
            prop_assert_eq!(span.t_a, next);
            prop_assert!(span.t_a <= span.t_b);
            prop_assert_eq!(span.len(), len);
            next = span.t_b + 1;
        }
        prop_assert_eq!(next, h.len() + 1);
    }

    #[test]
    fn cumulative_reward_never_falls_for_non_negative_rewards(
        lengths in prop::collection::vec(1usize..10, 1..8),
        seed in any::<u64>(),
    ) {
        let h = store(&lengths, seed, true);
        let mut last = 0.0;
        for t in 1..=h.len() {
            let cr = h.cumulative_reward(t).unwrap();
            prop_assert!(cr >= last);
            last = cr;
        }
    }

    #[test]
    fn saved_store_replays_bit_identically(lengths in prop::collection::vec(1usize..10, 1..6), seed in any::<u64>()) {
        let h = store(&lengths, seed, false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.txt");
        h.save(&path).unwrap();
        let back = HistoryStore::load(&path).unwrap();
        prop_assert_eq!(&back, &h);
        for span in h.trials() {
            let a: Vec<u64> = h.replay(span).unwrap().iter().flat_map(|r| r.all()).map(f64::to_bits).collect();
            let b: Vec<u64> = back.replay(span).unwrap().iter().flat_map(|r| r.all()).map(f64::to_bits).collect();
            prop_assert_eq!(a, b);
        }
    }
}
