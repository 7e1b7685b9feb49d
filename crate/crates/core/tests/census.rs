use std::collections::BTreeMap;

use collatz_core::census::{basin_scan, find_loops, percent_hundredths, LoopRegistry};
use collatz_core::program::{canonical_program, p2, p4, p6, p9, SignOrder};
use collatz_core::trajectory::Caps;
use collatz_core::{Program, StartSet};
use num_bigint::BigUint;
use proptest::prelude::*;

fn minima(reg: &LoopRegistry) -> Vec<u64> {
    reg.loops.keys().map(|m| u64::try_from(m).unwrap()).collect()
}

fn lengths(reg: &LoopRegistry) -> BTreeMap<u64, u64> {
    reg.loops
        .iter()
        .map(|(m, e)| (u64::try_from(m).unwrap(), e.cycle.length))
        .collect()
}

#[test]
fn every_registry_loop_reverifies() {
    let programs: Vec<Program> = vec![
        p2(),
        p4(13).unwrap(),
        p4(23).unwrap(),
        p4(53).unwrap(),
        p6(7).unwrap(),
        canonical_program("p1m", &[]).unwrap(),
    ];
    for program in programs {
        let reg = find_loops(&program, 5_000, Caps::default(), 4).unwrap();
        assert!(!reg.is_empty());
        for (min, entry) in &reg.loops {
            assert!(entry.cycle.verify(&program), "{} L{min}", program.id());
            assert_eq!(&entry.cycle.min, min);
            assert_eq!(entry.cycle.members[0], *min);
            assert_eq!(entry.cycle.length as usize, entry.cycle.members.len());
        }
    }
}

#[test]
fn p9_loop_cells() {
    use SignOrder::{MinusPlus as MP, PlusMinus as PM};
    let cells: [(u64, SignOrder, &[u64]); 12] = [
        (5, MP, &[1, 5]),
        (5, PM, &[1]),
        (7, MP, &[1]),
        (7, PM, &[1]),
        (11, MP, &[1]),
        (11, PM, &[1, 5, 17, 125]),
        (13, MP, &[1, 11]),
        (13, PM, &[1, 5]),
        (17, MP, &[1, 11]),
        (17, PM, &[1, 5]),
        (19, MP, &[1]),
        (19, PM, &[1, 5, 17]),
    ];
    for (p, order, want) in cells {
        let reg = find_loops(&p9(p, order).unwrap(), 10_000, Caps::default(), 4).unwrap();
        assert_eq!(minima(&reg), want, "p9({p}, {order})");
    }
    let reg = find_loops(&p9(11, PM).unwrap(), 10_000, Caps::default(), 4).unwrap();
    assert_eq!(reg.get(125).unwrap().cycle.max, BigUint::from(946u32));
}

#[test]
fn p4_compendium_rows() {
    let rows: [(u64, &[(u64, u64)]); 5] = [
        (13, &[(1, 2), (5, 8), (23, 3), (25, 3)]),
        (15, &[(1, 2)]),
        (17, &[(1, 2), (5, 10)]),
        (31, &[(1, 2)]),
        (63, &[(1, 2), (95, 10), (191, 20), (203, 10)]),
    ];
    for (m, want) in rows {
        let reg = find_loops(&p4(m).unwrap(), 20_000, Caps::default(), 4).unwrap();
        assert_eq!(lengths(&reg), want.iter().copied().collect(), "m={m}");
        assert!(reg.capped_starts.is_empty());
    }
}

#[test]
fn p6_5_has_a_single_fixed_point() {
    let reg = find_loops(&p6(5).unwrap(), 10_000, Caps::default(), 4).unwrap();
    assert_eq!(lengths(&reg), BTreeMap::from([(3, 1)]));
}

#[test]
fn basin_is_shard_invariant_and_complete() {
    let program = p2();
    let reg = find_loops(&program, 2_000, Caps::default(), 2).unwrap();
    let starts = StartSet::odd_range(1, 40_001).unwrap();
    let one = basin_scan(&program, &starts, &reg, Caps::default(), 1);
    for shards in [4, 16] {
        let many = basin_scan(&program, &starts, &reg, Caps::default(), shards);
        assert_eq!(one.to_csv(), many.to_csv());
        assert_eq!(one.to_json(), many.to_json());
    }
    assert_eq!(one.counts.values().sum::<u64>(), one.resolved());
    assert_eq!(one.resolved() + one.capped, one.total);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn basin_percentages_cover_resolved_starts(lo in 1u64..200_000, count in 1u64..3_000, shards in 1usize..9) {
        let program = p4(53).unwrap();
        let reg = find_loops(&program, 200, Caps::default(), 1).unwrap();
        let starts = StartSet::odd_above(lo, count).unwrap();
        let report = basin_scan(&program, &starts, &reg, Caps::default(), shards);
        prop_assert_eq!(report.counts.values().sum::<u64>(), report.resolved());
        // half-up rounding leaves at most half a hundredth per row
        let sum: u64 = report.counts.values().map(|&c| percent_hundredths(c, report.resolved())).sum();
        let slack = report.counts.len() as u64;
        prop_assert!(sum + slack >= 10_000 && sum <= 10_000 + slack, "sum {}", sum);
        prop_assert_eq!(report.to_csv(), basin_scan(&program, &starts, &reg, Caps::default(), 1).to_csv());
    }
}
