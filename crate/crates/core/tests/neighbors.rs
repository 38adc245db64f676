use physreg_core::{select_neighbors, NeighborConfig, Sample, Snapshot, SpatioTemporalPoint};
use proptest::prelude::*;

fn data_set() -> impl Strategy<Value = Vec<Snapshot>> {
    // small integer lattice coordinates make exact distance ties common
    proptest::collection::vec(proptest::collection::btree_set((0u8..6, 0u8..6), 3..12), 1..4).prop_map(|snaps| {
        snaps
            .into_iter()
            .enumerate()
            .map(|(k, pts)| {
                let t = 0.1 * k as f64;
                let samples = pts
                    .into_iter()
                    .map(|(a, b)| Sample::new(a as f64, b as f64, t, (a as f64) - 2.0 * (b as f64) + t))
                    .collect();
                Snapshot::new(k, t, samples).unwrap()
            })
            .collect()
    })
}

fn query() -> impl Strategy<Value = SpatioTemporalPoint> {
    (0u8..10, 0u8..10, 0u8..3).prop_map(|(a, b, c)| SpatioTemporalPoint::new(a as f64 * 0.5, b as f64 * 0.5, c as f64 * 0.1))
}

fn keys(samples: &[Sample]) -> Vec<[u64; 3]> {
    samples.iter().map(|s| [s.point.p1.to_bits(), s.point.p2.to_bits(), s.point.t.to_bits()]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn shuffling_the_data_keeps_the_selection(data in data_set(), q in query(), k in 4usize..12, seed in any::<u64>()) {
        let cfg = NeighborConfig { k, metric: None };
        let base = select_neighbors(&q, &data, &cfg);
        let mut shuffled = data.clone();
        // deterministic Fisher-Yates driven by the seed
        let mut state = seed | 1;
        let mut next = |n: usize| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % n as u64) as usize
        };
        for snap in &mut shuffled {
            for i in (1..snap.samples.len()).rev() {
                let j = next(i + 1);
                snap.samples.swap(i, j);
            }
        }
        let other = select_neighbors(&q, &shuffled, &cfg);
        prop_assert_eq!(keys(&base.samples), keys(&other.samples));
    }

    #[test]
    fn growing_k_only_adds_samples(data in data_set(), q in query(), k in 4usize..12) {
        let small = select_neighbors(&q, &data, &NeighborConfig { k, metric: None });
        let large = select_neighbors(&q, &data, &NeighborConfig { k: k + 1, metric: None });
        let big = keys(&large.samples);
        for key in keys(&small.samples) {
            prop_assert!(big.contains(&key));
        }
        prop_assert_eq!(&big[..small.samples.len()], &keys(&small.samples)[..]);
    }

    #[test]
    fn selection_is_sorted_by_distance(data in data_set(), q in query(), k in 4usize..12) {
        let sel = select_neighbors(&q, &data, &NeighborConfig { k, metric: None });
        let total: usize = data.iter().map(|s| s.len()).sum();
        prop_assert_eq!(sel.samples.len(), k.min(total));
        prop_assert_eq!(sel.undersized, total < k);
        for w in sel.distances.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }
}
