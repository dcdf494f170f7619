use nucache::combinatorics::{binom, chain_rank, chain_unrank, enumerate_chains};
use nucache::converse::converse_at;
use nucache::delivery::{decode, encode_delivery, DemandVector};
use nucache::numeric::{int, ratio, Rational};
use nucache::optimizer::optimal_allocation;
use nucache::placement::{place, random_files, PlacementConfig};
use nucache::rates::expected_rate;
use nucache::scheme::{plan_expected_rate, share_plan, JointScheme};
use nucache::{PrimeField, Profile};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn profile_strategy(max_k: usize) -> impl Strategy<Value = (usize, usize, usize)> {
    (1..=max_k).prop_flat_map(|k| (Just(k), 0..=k)).prop_flat_map(|(k, r1)| (Just(k), Just(r1), 0..=r1))
}

fn demand_strategy(k: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(1..=2usize, k)
}

// Allocation (t1, t2) with t2 <= t1 <= K on a grid of step 1/den.
fn allocation_strategy(max_k: usize, den: i64) -> impl Strategy<Value = (usize, Rational, Rational)> {
    (1..=max_k)
        .prop_flat_map(move |k| (Just(k), 0..=k as i64 * den))
        .prop_flat_map(move |(k, a)| (Just(k), Just(a), 0..=a))
        .prop_map(move |(k, a, b)| (k, ratio(a, den), ratio(b, den)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_rank_round_trips((k, r1, r2) in profile_strategy(7), pick in any::<u64>()) {
        let profile = Profile::new(vec![r1, r2]).unwrap();
        let chains = enumerate_chains(k, &profile).unwrap();
        let s = chains.len() as u64;
        prop_assert_eq!(s as u128, binom(k as i64, r1 as i64) * binom(r1 as i64, r2 as i64));
        let idx = pick % s;
        let chain = chain_unrank(idx, k, &profile).unwrap();
        prop_assert_eq!(&chain, &chains[idx as usize]);
        prop_assert_eq!(chain_rank(&chain, k, &profile).unwrap(), idx);
    }

    #[test]
    fn random_demands_decode((k, r1, r2) in profile_strategy(5), seed in any::<u64>(), d in demand_strategy(5)) {
        let field = PrimeField::default();
        let cfg = PlacementConfig::new(k, Profile::new(vec![r1, r2]).unwrap(), 2, field).unwrap();
        let files = random_files(2, cfg.file_len().unwrap(), field, seed);
        let map = place(&cfg, &files).unwrap();
        let demand = DemandVector::new(d[..k].to_vec(), 2).unwrap();
        let msg = encode_delivery(&demand, &files, &cfg).unwrap();
        for u in 1..=k {
            prop_assert_eq!(&decode(u, map.user(u).unwrap(), &msg).unwrap(), &files[demand.of(u) - 1]);
        }
        let cached = map.user(1).unwrap().symbols(cfg.subfile_len);
        prop_assert_eq!(cached * k, cfg.file_len().unwrap() * (r1 + r2));
    }

    #[test]
    fn share_plan_matches_allocation((k, t1, t2) in allocation_strategy(8, 10)) {
        let plan = share_plan(k, &t1, &t2).unwrap();
        prop_assert_eq!(plan.average(), (t1.clone(), t2.clone()));
        let total: Rational = plan.points.iter().map(|p| p.weight.clone()).sum();
        prop_assert_eq!(total, int(1));
        prop_assert!(plan.points.len() <= 3);
        for p1 in [ratio(1, 2), ratio(7, 10), ratio(19, 20)] {
            prop_assert_eq!(plan_expected_rate(&plan, &p1).unwrap(), expected_rate(k, &p1, &t1, &t2).unwrap());
        }
    }

    #[test]
    fn converse_and_optimum_bound_any_allocation((k, t1, t2) in allocation_strategy(6, 8), p100 in 50i64..100) {
        let p1 = ratio(p100, 100);
        let m = (&t1 + &t2) / int(k as i64);
        let p = [p1.clone(), int(1) - &p1];
        let lower = converse_at(&[t1.clone(), t2.clone()], &p, k).unwrap();
        let opt = optimal_allocation(k, &p1, &m).unwrap();
        let here = expected_rate(k, &p1, &t1, &t2).unwrap();
        prop_assert!(lower <= here.clone());
        prop_assert!(opt.rbar <= here);
    }
}

#[test]
fn fractional_allocations_round_trip() {
    let field = PrimeField::default();
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let mut done = 0;
    while done < 100 {
        let (k, t1, t2) = allocation_strategy(4, 5).new_tree(&mut runner).unwrap().current();
        let plan = share_plan(k, &t1, &t2).unwrap();
        let f = plan.minimal_file_len().unwrap();
        if f > 600 {
            continue;
        }
        let scheme = JointScheme::new(plan.clone(), f, field).unwrap();
        let files = random_files(2, f as usize, field, done as u64);
        let maps = scheme.place(&files).unwrap();
        let cached = JointScheme::cache_symbols(&maps, 1).unwrap();
        assert_eq!(int(cached as i64), (&t1 + &t2) * int(f as i64) / int(k as i64));
        let d: Vec<usize> = (0..k).map(|u| 1 + (done + u) % 2).collect();
        let demand = DemandVector::new(d, 2).unwrap();
        let msgs = scheme.deliver(&demand, &files).unwrap();
        for u in 1..=k {
            assert_eq!(scheme.decode(u, &maps, &msgs).unwrap(), files[demand.of(u) - 1], "t=({t1},{t2}) user {u}");
        }
        assert_eq!(scheme.realized_rate(&msgs), plan.class_rate(&demand.requested()).unwrap());
        done += 1;
    }
}
