mod common;

use atoms_lab::panel::{self, CsvSchema, Observation, Panel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mix(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Training positions of one period, re-derived from the documented recipe.
fn oracle_train(seed: u64, period: usize, b: usize, m: usize) -> Vec<usize> {
    const SPLIT: u64 = 0x5350_4C49_5400_0001;
    let key = mix(mix(mix(seed) ^ SPLIT) ^ period as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let mut idx: Vec<usize> = (0..b).collect();
    for i in 0..m {
        let k = rng.random_range(i..b);
        idx.swap(i, k);
    }
    let mut t = idx[..m].to_vec();
    t.sort_unstable();
    t
}

fn arb_panel() -> impl Strategy<Value = Panel> {
    (1usize..4, prop::collection::vec(2usize..15, 1..12)).prop_flat_map(|(d, sizes)| {
        let periods: Vec<_> = sizes
            .into_iter()
            .map(|b| {
                prop::collection::vec(
                    (prop::collection::vec(-1e3f64..1e3, d), -1e3f64..1e3).prop_map(|(x, y)| Observation::new(x, y)),
                    b,
                )
            })
            .collect();
        periods.prop_map(move |batches| Panel::new(d, batches).unwrap())
    })
}

#[test]
fn split_matches_documented_shuffle() {
    let mut r = common::rng(1);
    for _ in 0..50 {
        let sizes: Vec<usize> = (0..r.random_range(1..10)).map(|_| r.random_range(2..30)).collect();
        let batches = sizes
            .iter()
            .map(|&b| (0..b).map(|i| Observation::new(vec![i as f64], 0.0)).collect())
            .collect();
        let p = Panel::new(1, batches).unwrap();
        let seed = r.random::<u64>();
        let fraction = r.random_range(0.05..0.95);
        let s = panel::split(&p, fraction, seed).unwrap();
        for (j, &b) in sizes.iter().enumerate() {
            let m = ((fraction * b as f64) - 1e-9).ceil().clamp(1.0, (b - 1) as f64) as usize;
            assert_eq!(s.train_index(j + 1), oracle_train(seed, j + 1, b, m).as_slice());
        }
    }
}

#[test]
fn four_fifths_of_twenty() {
    let p = Panel::new(1, vec![(0..20).map(|i| Observation::new(vec![i as f64], 1.0)).collect()]).unwrap();
    let s = panel::split(&p, 0.8, 3).unwrap();
    assert_eq!((s.train(1).len(), s.validation(1).len()), (16, 4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_partition(p in arb_panel(), fraction in 0.01f64..0.99, seed in any::<u64>()) {
        let s = panel::split(&p, fraction, seed).unwrap();
        for j in 1..=p.num_periods() {
            prop_assert!(!s.validation(j).is_empty());
            let mut all: Vec<usize> = s.train_index(j).iter().chain(s.validation_index(j)).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..p.period(j).len()).collect::<Vec<_>>());
            for (&i, o) in s.train_index(j).iter().zip(s.train(j)) {
                prop_assert_eq!(&p.period(j).observations[i], o);
            }
        }
        prop_assert_eq!(&s, &panel::split(&p, fraction, seed).unwrap());
    }

    #[test]
    fn split_is_stable_under_truncation(p in arb_panel(), seed in any::<u64>()) {
        let keep = p.num_periods().div_ceil(2);
        let head = Panel::new(p.dim(), p.periods()[..keep].iter().map(|b| b.observations.clone()).collect()).unwrap();
        let a = panel::split(&p, 0.7, seed).unwrap();
        let b = panel::split(&head, 0.7, seed).unwrap();
        for j in 1..=keep {
            prop_assert_eq!(a.train_index(j), b.train_index(j));
        }
    }

    #[test]
    fn csv_round_trip(p in arb_panel()) {
        let mut buf = Vec::new();
        panel::write_csv(&p, &mut buf, &CsvSchema::default()).unwrap();
        let back = panel::read_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        prop_assert_eq!(back.periods(), p.periods());
        prop_assert_eq!(back.dim(), p.dim());
    }
}
