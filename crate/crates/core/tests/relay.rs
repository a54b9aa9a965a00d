mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use ringqkd_core::relay::{
    adversary_can_recover, build_paths, forward, generate_link_keys, recover, run_protocol,
    BitVec, CompromiseScenario, Segment,
};

/// Position of satellite `sat` on a segment that starts at `i`, or None.
fn position(n: usize, i: usize, k: usize, seg: Segment, sat: usize) -> Option<usize> {
    let (off, len) = match seg {
        Segment::Plus => ((sat + n - i) % n, (k + n - i) % n),
        Segment::Minus => ((i + n - sat) % n, (i + n - k) % n),
    };
    (off <= len).then_some(off + 1)
}

fn instance() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (4usize..=24).prop_flat_map(|n| {
        (Just(n), 0..n, 1..n).prop_flat_map(move |(n, i, dk)| {
            let plus = dk + 1;
            let minus = n - dk + 1;
            (Just(n), Just(i), Just((i + dk) % n), 2..=plus.min(minus))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn forwarding_round_trips(
        (n, i, k, r) in instance(),
        rings in 1usize..=2,
        key_len in 1usize..=256,
        seed in any::<u64>(),
    ) {
        let path = build_paths(n, i, k, r, rings).unwrap();
        let keys = generate_link_keys(&path, key_len, seed).unwrap();
        for seg in Segment::BOTH {
            let mut x = BitVec::zeros(key_len);
            for b in 0..key_len {
                x.set(b, (seed >> (b % 64)) & 1 == 1);
            }
            let t = forward(&path, 0, seg, &x, &keys).unwrap();
            prop_assert_eq!(recover(&path, &t, &keys).unwrap(), x);
        }
        let (per_ring, total) = run_protocol(&path, &keys, seed).unwrap();
        let mut acc = BitVec::zeros(key_len);
        for (a, b) in &per_ring {
            prop_assert_eq!(a, b);
            acc.xor_assign(a);
        }
        prop_assert_eq!(acc, total);
    }

    #[test]
    fn verdict_matches_oracle(
        (n, i, k, r) in instance(),
        picks in proptest::collection::vec(any::<prop::sample::Index>(), 0..6),
    ) {
        let path = build_paths(n, i, k, r, 1).unwrap();
        let set: BTreeSet<usize> = picks.iter().map(|p| p.index(n)).collect();
        let sats: Vec<usize> = set.iter().copied().collect();
        let v = adversary_can_recover(&path, &CompromiseScenario::single_ring(&sats)).unwrap();
        let mut all = true;
        for seg in Segment::BOTH {
            let m = path.satellites(seg).len();
            let pos: Vec<usize> = sats.iter().filter_map(|s| position(n, i, k, seg, *s)).collect();
            let expect = common::oracle_segment_exposed(m, r, &pos);
            prop_assert_eq!(v.segment(0, seg).unwrap().recoverable, expect);
            all &= expect;
        }
        prop_assert_eq!(v.recoverable, all);
    }
}

#[test]
fn witness_reconstructs_the_secret() {
    use ringqkd_core::relay::Knowledge;

    let path = build_paths(12, 0, 6, 2, 1).unwrap();
    let keys = generate_link_keys(&path, 64, 3).unwrap();
    let secret = {
        let mut x = BitVec::zeros(64);
        for b in (0..64).step_by(3) {
            x.set(b, true);
        }
        x
    };
    let t = forward(&path, 0, Segment::Plus, &secret, &keys).unwrap();
    let v = adversary_can_recover(&path, &CompromiseScenario::single_ring(&[2, 3])).unwrap();
    let w = v.segment(0, Segment::Plus).unwrap().witness.clone().unwrap();
    let mut got = BitVec::zeros(64);
    for item in w {
        match item {
            Knowledge::Message { hop, .. } => got.xor_assign(&t.messages[hop].1),
            Knowledge::Key(id) => got.xor_assign(&keys.get(&id).unwrap().bits),
        }
    }
    assert_eq!(got, secret);
}
