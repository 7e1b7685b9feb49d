//! Acceptance checks. Prints one `criterion N: pass|FAIL` line per
//! criterion and exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Debug;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use collatz_cli::{read_checkpoint, run_cli};
use collatz_core::census::{basin_scan, find_loops, interestingness_report, LoopRegistry};
use collatz_core::family::{family_lengths, find_islands, island_input, FamilySpec};
use collatz_core::nullmodel::{persistence_rate, residue_enrichment, stability_boundary, window_factor};
use collatz_core::program::{p1, p1m, p2, p4, p6, p9, SignOrder};
use collatz_core::trajectory::{detect_cycle, iterate, Caps, CycleSearch, StopPolicy};
use collatz_core::tree::{build_exit_tree, predecessors};
use collatz_core::{program_from_id, DecayProfile, MFamily, Program, StartSet};
use num_bigint::BigUint;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn eq<T: PartialEq + Debug>(&mut self, label: &str, got: T, want: T) {
        if got != want {
            self.failed.push(format!("{label}: got {got:?}, want {want:?}"));
        }
    }

    fn within(&mut self, label: &str, got: f64, lo: f64, hi: f64) {
        if !(lo..=hi).contains(&got) {
            self.failed.push(format!("{label}: got {got}, want [{lo}, {hi}]"));
        }
    }

    fn near(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        if (got - want).abs() > tol {
            self.failed.push(format!("{label}: got {got:.6}, want {want} +/- {tol}"));
        }
    }

    fn holds(&mut self, label: &str, ok: bool) {
        if !ok {
            self.failed.push(label.to_string());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn big(n: u64) -> BigUint {
    BigUint::from(n)
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_cli(std::iter::once("collatz").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn registry_rows(reg: &LoopRegistry) -> Vec<(u64, u64, u64, u64)> {
    reg.loops
        .iter()
        .map(|(min, e)| {
            let root = e.lowest_root_node.as_ref().map_or(0, |r| u64::try_from(r).unwrap());
            (
                u64::try_from(min).unwrap(),
                e.cycle.length,
                u64::try_from(&e.cycle.max).unwrap(),
                root,
            )
        })
        .collect()
}

fn check_rows(c: &mut Checks, reg: &LoopRegistry, want: &[(u64, u64, u64, u64)]) {
    let got = registry_rows(reg);
    let minima: Vec<u64> = got.iter().map(|r| r.0).collect();
    c.eq("minima", minima, want.iter().map(|r| r.0).collect());
    for w in want {
        match got.iter().find(|g| g.0 == w.0) {
            Some(g) => {
                c.eq(&format!("L{} length", w.0), g.1, w.1);
                c.eq(&format!("L{} max", w.0), g.2, w.2);
                c.eq(&format!("L{} root", w.0), g.3, w.3);
            }
            None => c.holds(&format!("L{} present", w.0), false),
        }
    }
}

fn check_basin(c: &mut Checks, program: &Program, reg: &LoopRegistry, starts: &StartSet, want: &[(u64, f64)]) {
    let report = basin_scan(program, starts, reg, Caps::default(), 4);
    c.eq("capped starts", report.capped, 0);
    for &(min, pct) in want {
        c.near(&format!("L{min} share"), report.percent(min), pct, 0.5);
    }
}

fn criterion_1(c: &mut Checks) {
    let policy = StopPolicy::with_minima([1u32]).record_path();
    let start = Instant::now();
    let t = iterate(&p1(), &big(29), &policy).unwrap();
    let elapsed = start.elapsed();
    let want: Vec<BigUint> = [29u64, 44, 22, 11, 17, 26, 13, 20, 10, 5, 8, 4, 2, 1]
        .into_iter()
        .map(big)
        .collect();
    c.eq("path", t.path.unwrap(), want);
    c.eq("length", t.length, 13);
    c.holds(&format!("under 1 ms (took {elapsed:?})"), elapsed < Duration::from_millis(1));
}

fn criterion_2(c: &mut Checks) {
    let start = Instant::now();
    let (code, csv, _) = cli(&["picket", "--count", "1000001", "--format", "csv"]);
    c.eq("exit status", code, 0);
    let rows: BTreeMap<u64, (Option<u64>, u64)> = csv
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (f[1].parse().unwrap(), (f[3].parse().ok(), f[4].parse().unwrap()))
        })
        .collect();
    let counts = [
        (1, 1),
        (5, 938_003),
        (21, 1),
        (85, 23_743),
        (341, 37_687),
        (1365, 1),
        (5461, 78),
        (21845, 448),
        (87381, 1),
        (349_525, 36),
        (1_398_101, 2),
    ];
    for (v, n) in counts {
        c.eq(&format!("exits at {v}"), rows.get(&v).map(|r| r.1), Some(n));
    }
    let firsts = [
        (5, 3),
        (85, 75),
        (341, 151),
        (5461, 5461),
        (21845, 14563),
        (349_525, 184_111),
        (1_398_101, 932_067),
    ];
    for (v, f) in firsts {
        c.eq(&format!("first to exit at {v}"), rows.get(&v).and_then(|r| r.0), Some(f));
    }
    c.eq("total", rows.values().map(|r| r.1).sum::<u64>(), 1_000_001);
    c.holds("under 5 min", start.elapsed() < Duration::from_secs(300));
}

fn p2_registry() -> LoopRegistry {
    find_loops(&p2(), 100_000, Caps::default(), 4).unwrap()
}

fn criterion_3(c: &mut Checks) {
    let reg = p2_registry();
    check_rows(
        c,
        &reg,
        &[
            (1, 4, 4, 1),
            (7, 6, 28, 7),
            (21, 310, 16_443_858, 5),
            (85, 6, 340, 85),
            (121, 6, 354, 113),
            (141, 6, 564, 77),
            (1303, 33, 53_764, 521),
            (69721, 44, 4_228_008, 20981),
        ],
    );
}

fn criterion_4(c: &mut Checks) {
    let reg = p2_registry();
    let starts = StartSet::odd_range(1, 999_999).unwrap();
    let want = [
        (1, 10.94),
        (7, 16.04),
        (21, 58.06),
        (85, 1.96),
        (121, 10.21),
        (141, 1.37),
        (1303, 1.31),
        (69721, 0.11),
    ];
    check_basin(c, &p2(), &reg, &starts, &want);
}

fn criterion_5(c: &mut Checks) {
    let program = p4(53).unwrap();
    let reg = find_loops(&program, 25_000, Caps::default(), 4).unwrap();
    check_rows(
        c,
        &reg,
        &[
            (1, 2, 2, 1),
            (25, 5, 200, 25),
            (35, 5, 186, 23),
            (43, 199, 4_239_444, 43),
            (55, 5, 292, 3),
            (63, 5, 504, 63),
            (2125, 814, 946_605_753_764_320, 2125),
            (15871, 179, 45_323_252, 8359),
        ],
    );
    let starts = StartSet::odd_above(20_000, 50_000).unwrap();
    let want = [
        (1, 0.16),
        (25, 5.73),
        (35, 0.62),
        (43, 23.90),
        (55, 58.4),
        (63, 10.0),
        (2125, 0.43),
        (15871, 0.15),
    ];
    check_basin(c, &program, &reg, &starts, &want);
}

fn loop_lengths(program: &Program, bound: u64) -> BTreeMap<u64, u64> {
    let reg = find_loops(program, bound, Caps::default(), 4).unwrap();
    registry_rows(&reg).into_iter().map(|r| (r.0, r.1)).collect()
}

fn criterion_6(c: &mut Checks) {
    let rows: [(u64, &[(u64, u64)]); 4] = [
        (13, &[(1, 2), (5, 8), (23, 3), (25, 3)]),
        (15, &[(1, 2)]),
        (31, &[(1, 2)]),
        (17, &[(1, 2), (5, 10)]),
    ];
    for (m, want) in rows {
        let got = loop_lengths(&p4(m).unwrap(), 20_000);
        c.eq(&format!("m={m}"), got, want.iter().copied().collect());
    }
    let got: Vec<u64> = loop_lengths(&p4(63).unwrap(), 20_000).into_keys().collect();
    c.eq("m=63 minima", got, vec![1, 95, 191, 203]);
}

fn criterion_7(c: &mut Checks) {
    c.eq("p6(5)", loop_lengths(&p6(5).unwrap(), 10_000), BTreeMap::from([(3, 1)]));
    let p67 = loop_lengths(&p6(7).unwrap(), 10_000);
    c.eq("p6(7) minima", p67.keys().copied().collect::<Vec<_>>(), vec![1, 23]);
    c.eq("p6(7) L23 length", p67.get(&23).copied(), Some(15));
    let sample = StartSet::odd_range(1, 999).unwrap();
    let report = interestingness_report(&p6(11).unwrap(), &sample, Caps::default(), 4);
    c.note(format!("p6(11) capped fraction {:.3}", report.capped_fraction));
    c.holds(
        &format!("p6(11) capped fraction {} > 0.9", report.capped_fraction),
        report.capped_fraction > 0.9,
    );
}

fn criterion_8(c: &mut Checks) {
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
        let got: Vec<u64> = loop_lengths(&p9(p, order).unwrap(), 10_000).into_keys().collect();
        c.eq(&format!("p9({p},{order}) minima"), got, want.to_vec());
    }
    let reg = find_loops(&p9(11, PM).unwrap(), 10_000, Caps::default(), 4).unwrap();
    let l125 = reg.get(125).map(|e| (e.cycle.length, u64::try_from(&e.cycle.max).unwrap()));
    c.eq("p9(11,+-) L125 (length, max)", l125, Some((18, 946)));
    let got: Vec<u64> = loop_lengths(&p1m(), 10_000).into_keys().collect();
    c.eq("p1m minima", got, vec![1, 5, 17]);
}

fn criterion_9(c: &mut Checks) {
    let start = Instant::now();
    c.near("p1 per 10", window_factor(&DecayProfile::p1()), 0.237, 0.0005);
    c.near("p2 simple per 6", window_factor(&DecayProfile::p2_simple()), 0.91, 0.005);
    c.near("p2 enriched per 10", window_factor(&DecayProfile::p2_enriched()), 0.62, 0.005);
    c.near("p6(7) per 10", window_factor(&DecayProfile::p6_7()), 0.90, 0.005);
    c.near("eta1 boundary", stability_boundary(MFamily::Eta1).unwrap(), 63.21, 0.01);
    c.near("eta2 boundary", stability_boundary(MFamily::Eta2).unwrap(), 43.53, 0.01);
    c.holds("under 1 s", start.elapsed() < Duration::from_secs(1));
}

fn criterion_10(c: &mut Checks) {
    let mut rng = StdRng::seed_from_u64(20_240_601);
    let starts: Vec<BigUint> = (0..100)
        .map(|_| big(rng.gen_range(500_000..500_000_000u64) * 2 + 1))
        .collect();
    let p2_profile = residue_enrichment(&p2(), &starts, &[3, 5], Caps::default()).unwrap();
    c.eq("p2 capped", p2_profile.capped, 0);
    c.within("p2 mod-3 fraction", p2_profile.fractions[&3], 0.35, 0.45);
    c.within("p2 mod-5 fraction", p2_profile.fractions[&5], 0.02, 0.08);
    c.note(format!(
        "p2 mod 3 {:.4}, mod 5 {:.4}",
        p2_profile.fractions[&3], p2_profile.fractions[&5]
    ));
    let p1_profile = residue_enrichment(&p1(), &starts, &[3], Caps::default()).unwrap();
    c.eq("p1 mod-3 fraction", p1_profile.fractions[&3], 0.0);
    c.holds("p1 interior has odd terms", p1_profile.odd_terms > 0);
}

fn criterion_11(c: &mut Checks) {
    let spec = FamilySpec::powers(3, 1, 1000).unwrap();
    let policy = StopPolicy::with_minima([1u32]);
    let points = family_lengths(&p1(), &spec, &policy, 4).unwrap();
    let at = |k: u32| points.iter().find(|p| p.k == k).unwrap();
    for (k, terms) in [(130, 1144), (160, 1144), (188, 1144), (202, 1155)] {
        c.eq(&format!("terms at k={k}"), at(k).terms(), Some(terms));
        c.eq(&format!("steps at k={k}"), at(k).length, Some(terms - 1));
    }
    let window: Vec<(u32, Option<u64>)> = island_input(&points)
        .into_iter()
        .filter(|&(k, _)| (869..=981).contains(&k))
        .collect();
    let report = find_islands(&window, 5, 10);
    c.eq("islands on 869..981", report.islands.len(), 1);
    if let Some(island) = report.islands.first() {
        c.eq("island bounds", (island.k_start, island.k_end), (869, 981));
        c.eq("modal terms", island.common_length + 1, 6842);
        let mut want: Vec<(u32, Option<u64>)> = (886..=892).map(|k| (k, Some(6310))).collect();
        want.push((971, Some(7803)));
        c.eq("exceptions (steps)", island.exceptions.clone(), want);
    }
}

fn criterion_12(c: &mut Checks) {
    let policy = StopPolicy::with_minima([1u32]);
    let p = persistence_rate(&p1(), 1, 100_000, &policy, 4).unwrap();
    c.note(format!("rate {:.4}", p.rate));
    c.eq("excluded", p.excluded, 0);
    c.holds(&format!("rate {} in (0.3, 0.55)", p.rate), p.rate > 0.3 && p.rate < 0.55);
}

fn criterion_13(c: &mut Checks) {
    let program = p4(53).unwrap();
    let exits_55 = (1..20u64)
        .step_by(2)
        .filter(|&n| match detect_cycle(&program, &big(n), Caps::default()).unwrap() {
            CycleSearch::Found { cycle, .. } => cycle.min == big(55),
            CycleSearch::Capped { .. } => false,
        })
        .count();
    c.eq("first 10 odd integers exiting L55", exits_55, 9);
    let l35 = match detect_cycle(&program, &big(35), Caps::default()).unwrap() {
        CycleSearch::Found { cycle, .. } => cycle,
        other => panic!("35 does not close a loop: {other:?}"),
    };
    let forest = build_exit_tree(&program, &l35, 10, Caps::default(), 10_000_000, 1_000_000).unwrap();
    c.eq("L35 exiters found", forest.highlighted.len(), 10);
    c.eq(
        "L35 exiters above 35",
        forest.highlighted.iter().filter(|&v| *v > big(35)).count(),
        8,
    );
    c.holds("exit tree edges are map steps", forest.check(&program));
}

fn hunt_args<'a>(checkpoint: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "--program",
        "p4:73",
        "--format",
        "json",
        "hunt",
        "--n0",
        "665",
        "--checkpoint",
        checkpoint,
        "--checkpoint-every",
        "250000",
    ];
    args.extend_from_slice(extra);
    args
}

fn criterion_14(c: &mut Checks) {
    let dir = tempfile::tempdir().unwrap();
    let path_of = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let whole = path_of("whole.json");
    let (code, reference, _) = cli(&hunt_args(&whole, &[]));
    c.eq("exit status", code, 0);
    let v: serde_json::Value = serde_json::from_str(&reference).unwrap();
    c.eq("outcome", v["outcome"]["kind"].as_str(), Some("converged"));
    c.eq("loop", v["outcome"]["loop_min"].as_str(), Some("5"));
    c.eq("terms", v["terms"].as_u64(), Some(7_052_259));
    c.eq("steps", v["iterations"].as_u64(), Some(7_052_258));
    let peak = v["peak_bits"].as_u64().unwrap();
    c.note(format!("peak {peak} bits"));
    c.within("peak bits", peak as f64, 2255.0, 2262.0);

    for stop in ["1000000", "3500017"] {
        let ckpt = path_of(&format!("stop{stop}.json"));
        let (code, _, _) = cli(&hunt_args(&ckpt, &["--stop-after", stop]));
        c.eq(&format!("stop at {stop} exit status"), code, 0);
        let rec = read_checkpoint(Path::new(&ckpt)).unwrap();
        c.eq(&format!("stop at {stop} checkpoint"), rec.iterations_done.to_string(), stop.to_string());
        let (code, resumed, _) = cli(&hunt_args(&ckpt, &[]));
        c.eq(&format!("resume from {stop} exit status"), code, 0);
        c.holds(&format!("resume from {stop} matches"), resumed == reference);
    }

    // Kill a real process once a mid-run checkpoint exists.
    let killed = path_of("killed.json");
    let mut child = Command::new(env!("CARGO_BIN_EXE_collatz"))
        .args(hunt_args(&killed, &[]))
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(120);
    let mut done_at_kill = None;
    while Instant::now() < deadline {
        if let Ok(rec) = read_checkpoint(Path::new(&killed)) {
            if rec.iterations_done >= 500_000 {
                done_at_kill = Some(rec.iterations_done);
                break;
            }
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    let still_running = child.try_wait().unwrap().is_none();
    child.kill().ok();
    child.wait().unwrap();
    let rec = read_checkpoint(Path::new(&killed)).unwrap();
    c.note(format!(
        "killed at checkpoint {} (running: {still_running})",
        done_at_kill.unwrap_or(0)
    ));
    c.holds("killed mid-run", still_running && rec.iterations_done < 7_052_258);
    let (code, resumed, _) = cli(&hunt_args(&killed, &[]));
    c.eq("resume after kill exit status", code, 0);
    c.holds("resume after kill matches", resumed == reference);
}

/// Every value mapped from a start up to `bound`, keyed by image.
fn preimage_table(program: &Program, bound: u64) -> HashMap<BigUint, BTreeSet<BigUint>> {
    let mut pre: HashMap<BigUint, BTreeSet<BigUint>> = HashMap::new();
    for n in 1..=bound {
        pre.entry(program.step(&big(n)).unwrap()).or_default().insert(big(n));
    }
    pre
}

/// Remember-all cycle search, independent of the engine's detector.
fn oracle_cycle(program: &Program, n0: u64) -> (u64, BigUint, u64) {
    let mut seen: HashMap<BigUint, u64> = HashMap::new();
    let mut order = Vec::new();
    let mut v = big(n0);
    while !seen.contains_key(&v) {
        seen.insert(v.clone(), order.len() as u64);
        order.push(v.clone());
        v = program.step(&v).unwrap();
    }
    let tail = seen[&v];
    let cycle = &order[tail as usize..];
    (tail, cycle.iter().min().unwrap().clone(), cycle.len() as u64)
}

fn criterion_15(c: &mut Checks) {
    for id in ["p1", "p1m", "p2", "p4:53"] {
        let program = program_from_id(id).unwrap();
        let mismatches = (1..=10_000u64)
            .filter(|&n0| {
                let want = oracle_cycle(&program, n0);
                match detect_cycle(&program, &big(n0), Caps::default()).unwrap() {
                    CycleSearch::Found { cycle, tail_length } => (tail_length, cycle.min, cycle.length) != want,
                    CycleSearch::Capped { .. } => true,
                }
            })
            .count();
        c.eq(&format!("{id} detector vs oracle mismatches"), mismatches, 0);
    }

    for id in ["p1", "p2", "p4:53", "p6:7", "p9:11:+-"] {
        let program = program_from_id(id).unwrap();
        let bound = 100_000u64;
        let mut table = preimage_table(&program, bound);
        let wrong = (1..=10_000u64)
            .filter(|&v| predecessors(&program, &big(v), &big(bound)) != table.remove(&big(v)).unwrap_or_default())
            .count();
        c.eq(&format!("{id} preimage mismatches"), wrong, 0);
    }

    let scans: [&[&str]; 3] = [
        &["--program", "p2", "basin", "--odd-range", "1:60001", "--format", "csv"],
        &["picket", "--count", "60001", "--format", "csv"],
        &["family", "--base", "3", "--exp", "1:300", "--format", "csv"],
    ];
    for args in scans {
        let outputs: Vec<(i32, String)> = ["1", "4", "16"]
            .iter()
            .map(|s| {
                let mut a = args.to_vec();
                a.extend(["--shards", s]);
                let (code, out, _) = cli(&a);
                (code, out)
            })
            .collect();
        let name = args.iter().find(|a| ["basin", "picket", "family"].contains(a)).unwrap();
        c.eq(&format!("{name} exit status"), outputs[0].0, 0);
        c.holds(
            &format!("{name} output identical across 1, 4, 16 shards"),
            outputs.iter().all(|o| o == &outputs[0]),
        );
    }

    let program = p4(53).unwrap();
    let reg = find_loops(&program, 200, Caps::default(), 1).unwrap();
    let report = basin_scan(&program, &StartSet::odd_range(1, 40_001).unwrap(), &reg, Caps::default(), 4);
    c.eq("basin counts sum to resolved", report.counts.values().sum::<u64>(), report.resolved());
    let pct: f64 = report.counts.keys().map(|m| report.percent(u64::try_from(m).unwrap())).sum();
    c.near("basin percentages sum", pct, 100.0, 1e-9);
}

type Criterion = fn(&mut Checks);

fn main() {
    let criteria: [(u32, &str, Criterion); 15] = [
        (1, "trajectory of 29", criterion_1),
        (2, "picket-fence census", criterion_2),
        (3, "P2 loop census", criterion_3),
        (4, "P2 basin percentages", criterion_4),
        (5, "P4(53) census and basin", criterion_5),
        (6, "P4 compendium rows", criterion_6),
        (7, "P6 fixtures", criterion_7),
        (8, "P9 and p1m fixtures", criterion_8),
        (9, "null-model factors", criterion_9),
        (10, "residue enrichment", criterion_10),
        (11, "islands over 3^k", criterion_11),
        (12, "persistence rate", criterion_12),
        (13, "exit trees", criterion_13),
        (14, "long hunt with resume", criterion_14),
        (15, "property suites", criterion_15),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failures = 0;
    for (n, name, run) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let mut checks = Checks::default();
        let result = catch_unwind(AssertUnwindSafe(|| run(&mut checks)));
        let secs = start.elapsed().as_secs_f64();
        if let Err(panic) = result {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            checks.failed.push(format!("panicked: {msg}"));
        }
        let notes = if checks.notes.is_empty() {
            String::new()
        } else {
            format!(" [{}]", checks.notes.join("; "))
        };
        if checks.failed.is_empty() {
            println!("criterion {n}: pass ({name}, {secs:.2}s){notes}");
        } else {
            failures += 1;
            println!(
                "criterion {n}: FAIL ({name}, {secs:.2}s){notes}: {}",
                checks.failed.join("; ")
            );
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
