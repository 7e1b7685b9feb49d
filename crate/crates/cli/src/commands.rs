use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use collatz_core::census::{basin_scan, find_loops, LoopRegistry};
use collatz_core::family::{family_csv, family_lengths, find_islands, island_input, FamilySpec};
use collatz_core::nullmodel::{
    predict_length, predicted_length_from_factor, stability_boundary, window_factor, DecayProfile, LengthModel,
    MFamily,
};
use collatz_core::picket::exit_census;
use collatz_core::shard::default_shards;
use collatz_core::trajectory::{detect_cycle, iterate, Caps, CycleSearch, Outcome, StopPolicy, Trajectory};
use collatz_core::tree::{build_exit_tree, build_reverse_tree, export_graph, GraphFormat};
use collatz_core::{print_program, program_from_id, Program, StartSet};
use num_bigint::BigUint;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::{Cli, Command, Format};

pub(crate) struct Ctx {
    pub program: Program,
    pub max_iter: Option<u64>,
    pub max_bits: Option<u64>,
    pub shards: usize,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

impl Ctx {
    pub fn caps(&self) -> CliResult<Caps> {
        self.caps_or(Caps::default())
    }

    pub fn caps_or(&self, defaults: Caps) -> CliResult<Caps> {
        Caps::new(
            self.max_iter.unwrap_or(defaults.max_iterations),
            self.max_bits.unwrap_or(defaults.max_bits),
        )
        .map_err(CliError::usage)
    }

    pub fn format(&self, allowed: &[Format], default: Format) -> CliResult<Format> {
        let f = self.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(CliError::Usage(format!(
                "--format {} is not supported here",
                format!("{f:?}").to_lowercase()
            )))
        }
    }

    pub fn emit(&self, out: &mut dyn Write, text: &str) -> CliResult<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text)?,
            None => out.write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

pub(crate) fn parse_positive(flag: &str, s: &str) -> CliResult<BigUint> {
    let v = collatz_core::decimal::parse(s.trim()).map_err(|e| CliError::Usage(format!("{flag}: {e}")))?;
    if v == BigUint::from(0u32) {
        return Err(CliError::Usage(format!("{flag} must be positive")));
    }
    Ok(v)
}

fn parse_pair<T: std::str::FromStr>(flag: &str, s: &str) -> CliResult<(T, T)> {
    let bad = || CliError::Usage(format!("{flag} expects LO:HI, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Minima of the loops reached from small odd starts, with tight caps so
/// slow starts do not stall the seed.
pub(crate) fn seed_minima(program: &Program, bound: u64, shards: usize) -> CliResult<Vec<BigUint>> {
    if bound == 0 {
        return Ok(Vec::new());
    }
    let caps = Caps::new(100_000, 4096).expect("valid caps");
    Ok(find_loops(program, bound, caps, shards)?.minima())
}

pub(crate) fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let program = program_from_id(&cli.common.program).map_err(CliError::usage)?;
    let shards = match cli.common.shards {
        Some(0) => return Err(CliError::Usage("--shards must be at least 1".into())),
        Some(k) => k,
        None => default_shards(),
    };
    let ctx = Ctx {
        program,
        max_iter: cli.common.max_iter,
        max_bits: cli.common.max_bits,
        shards,
        format: cli.common.format,
        out: cli.common.out,
    };
    match cli.command {
        Command::Traj { n0, path } => traj(&ctx, &n0, path, out),
        Command::Loops { scan_to, members } => loops(&ctx, scan_to, members, out, err),
        Command::Basin { odd_range } => basin(&ctx, &odd_range, out, err),
        Command::Picket { count } => picket(&ctx, &cli.common.program, count, out, err),
        Command::Family {
            base,
            exp,
            mult,
            offset,
            min_run,
            max_exceptions,
        } => {
            let (lo, hi) = parse_pair::<u32>("--exp", &exp)?;
            let spec = FamilySpec::new(base, lo, hi, mult, offset).map_err(CliError::usage)?;
            family(&ctx, &spec, min_run, max_exceptions, out, err)
        }
        Command::Nullmodel {
            profile,
            n0,
            loop_min,
        } => nullmodel(&ctx, &profile, n0.as_deref(), &loop_min, out),
        Command::Tree {
            loop_min,
            first_exiters,
            scan_cap,
            root,
            depth,
            bound,
            node_cap,
        } => {
            let format = match ctx.format(&[Format::Dot, Format::Json], Format::Dot)? {
                Format::Json => GraphFormat::Json,
                _ => GraphFormat::Dot,
            };
            let forest = match (loop_min, root) {
                (Some(min), None) => {
                    let min = parse_positive("--loop", &min)?;
                    let cycle = match detect_cycle(&ctx.program, &min, ctx.caps()?)? {
                        CycleSearch::Found { cycle, .. } if cycle.min == min => cycle,
                        _ => {
                            return Err(CliError::Domain(format!(
                                "{min} is not the minimum of a loop of {}",
                                ctx.program.id()
                            )))
                        }
                    };
                    if first_exiters == 0 {
                        return Err(CliError::Usage("--first-exiters must be at least 1".into()));
                    }
                    build_exit_tree(&ctx.program, &cycle, first_exiters, ctx.caps()?, scan_cap, node_cap)?
                }
                (None, Some(root)) => {
                    let root = parse_positive("--root", &root)?;
                    let bound = parse_positive("--bound", &bound)?;
                    build_reverse_tree(&ctx.program, &root, depth, &bound, node_cap)?
                }
                _ => return Err(CliError::Usage("tree needs --loop MIN or --root V".into())),
            };
            ctx.emit(out, &export_graph(&forest, format))
        }
        Command::Hunt {
            n0,
            checkpoint,
            checkpoint_every,
            stop_after,
            seed_scan,
        } => {
            let n0 = parse_positive("--n0", &n0)?;
            if checkpoint_every < 10_000 {
                return Err(CliError::Usage("--checkpoint-every must be at least 10000".into()));
            }
            crate::hunt::hunt(
                &ctx,
                &crate::hunt::HuntConfig {
                    n0,
                    checkpoint,
                    checkpoint_every,
                    stop_after,
                    seed_scan,
                },
                out,
                err,
            )
        }
    }
}

fn rule_counts(program: &Program, counts: &[u64]) -> String {
    program
        .rules()
        .iter()
        .zip(counts)
        .map(|(r, c)| format!("{r}={c}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn outcome_text(o: &Outcome) -> String {
    match o {
        Outcome::Converged { loop_min, .. } => format!("converged to L{loop_min}"),
        Outcome::CycleFound { cycle } => format!("entered unlisted loop L{} (length {})", cycle.min, cycle.length),
        Outcome::IterationCapped => "iteration cap reached".into(),
        Outcome::BitCapped => "bit cap exceeded".into(),
    }
}

/// Iterates, rerunning once with the loop's minimum if the orbit closed
/// into a loop first, so the length counts to the minimum.
fn resolved_trajectory(program: &Program, n0: &BigUint, policy: &StopPolicy) -> CliResult<Trajectory> {
    let t = iterate(program, n0, policy)?;
    match &t.outcome {
        Outcome::CycleFound { cycle } => {
            let mut again = policy.clone();
            again.known_loop_minima.insert(cycle.min.clone());
            Ok(iterate(program, n0, &again)?)
        }
        _ => Ok(t),
    }
}

fn traj(ctx: &Ctx, n0: &str, path: bool, out: &mut dyn Write) -> CliResult<()> {
    let n0 = parse_positive("--n0", n0)?;
    let format = ctx.format(&[Format::Text, Format::Csv, Format::Json], Format::Text)?;
    let mut policy = StopPolicy::default().caps(ctx.caps()?);
    if path {
        policy = policy.record_path();
    }
    let t = resolved_trajectory(&ctx.program, &n0, &policy)?;
    let text = match format {
        Format::Json => t.to_json() + "\n",
        Format::Csv if path => {
            let mut s = String::from("step,value\n");
            for (i, v) in t.path.iter().flatten().enumerate() {
                writeln!(s, "{i},{v}").unwrap();
            }
            s
        }
        Format::Csv => {
            let loop_min = match &t.outcome {
                Outcome::Converged { loop_min, .. } => loop_min.to_string(),
                _ => String::new(),
            };
            let kind = serde_json::to_value(&t.outcome).unwrap()["kind"].as_str().unwrap_or_default().to_string();
            format!(
                "program,n0,outcome,loop_min,length,max_value,max_bits,leading_up_steps\n{},{},{},{},{},{},{},{}\n",
                ctx.program.id(),
                t.n0,
                kind,
                loop_min,
                t.length,
                t.max_value,
                t.max_bits,
                t.leading_up_steps
            )
        }
        _ => {
            let mut s = String::new();
            writeln!(s, "program: {}", print_program(&ctx.program)).unwrap();
            writeln!(s, "n0: {}", t.n0).unwrap();
            writeln!(s, "outcome: {}", outcome_text(&t.outcome)).unwrap();
            writeln!(s, "length: {}", t.length).unwrap();
            writeln!(s, "max: {} ({} bits)", t.max_value, t.max_bits).unwrap();
            writeln!(s, "leading up-steps: {}", t.leading_up_steps).unwrap();
            writeln!(s, "rules fired: {}", rule_counts(&ctx.program, &t.rule_fire_counts)).unwrap();
            if let Some(p) = &t.path {
                let values: Vec<String> = p.iter().map(ToString::to_string).collect();
                writeln!(s, "path: {}", values.join(" -> ")).unwrap();
            }
            s
        }
    };
    ctx.emit(out, &text)
}

fn loops(ctx: &Ctx, scan_to: u64, members: bool, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let format = ctx.format(&[Format::Text, Format::Csv, Format::Json], Format::Text)?;
    if scan_to == 0 {
        return Err(CliError::Usage("--scan-to must be positive".into()));
    }
    let _ = writeln!(err, "loops: scanning odd starts up to {scan_to} on {} shards", ctx.shards);
    let reg = find_loops(&ctx.program, scan_to, ctx.caps()?, ctx.shards)?;
    if !reg.capped_starts.is_empty() {
        let _ = writeln!(err, "loops: {} starts hit a cap", reg.capped_starts.len());
    }
    let text = match format {
        Format::Json => reg.to_json(members) + "\n",
        Format::Csv => {
            let mut s = String::from("min,length,max,lowest_root_node\n");
            for r in reg.records(false) {
                let root = r.lowest_root_node.map(|v| v.to_string()).unwrap_or_default();
                writeln!(s, "{},{},{},{}", r.min, r.length, r.max, root).unwrap();
            }
            s
        }
        _ => {
            let mut s = format!("{} loops of {} from odd starts <= {scan_to}\n", reg.len(), ctx.program.id());
            for r in reg.records(false) {
                let root = r.lowest_root_node.map(|v| v.to_string()).unwrap_or_default();
                writeln!(s, "L{}  length {}  max {}  root {}", r.min, r.length, r.max, root).unwrap();
            }
            s
        }
    };
    ctx.emit(out, &text)
}

fn basin(ctx: &Ctx, range: &str, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let format = ctx.format(&[Format::Text, Format::Csv, Format::Json], Format::Text)?;
    let (a, b) = parse_pair::<u64>("--odd-range", range)?;
    let starts = StartSet::odd_range(a, b).map_err(CliError::usage)?;
    let _ = writeln!(err, "basin: {starts} on {} shards", ctx.shards);
    let empty = LoopRegistry {
        program: ctx.program.id().to_string(),
        scan_bound: 0,
        loops: BTreeMap::new(),
        capped_starts: Vec::new(),
    };
    let report = basin_scan(&ctx.program, &starts, &empty, ctx.caps()?, ctx.shards);
    let text = match format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv(),
        _ => {
            let mut s = format!("{}\n", report.description);
            for r in report.rows() {
                writeln!(s, "L{}  {}  {}%", r.loop_min, r.count, r.percent).unwrap();
            }
            writeln!(s, "capped {}", report.capped).unwrap();
            s
        }
    };
    ctx.emit(out, &text)
}

fn picket(ctx: &Ctx, program_id: &str, count: u64, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    if program_id != "p1" {
        return Err(CliError::Usage("picket always runs the original map; drop --program".into()));
    }
    let format = ctx.format(&[Format::Text, Format::Csv, Format::Json], Format::Text)?;
    if count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let _ = writeln!(err, "picket: {count} odd starts on {} shards", ctx.shards);
    let census = exit_census(count, ctx.shards)?;
    let text = match format {
        Format::Json => census.to_json()? + "\n",
        Format::Csv => census.to_csv()?,
        _ => {
            let mut s = format!("{:<24} {:>10} {:<16} {:>12} {:>10}\n", "binary", "decimal", "factors", "first", "exits");
            for r in census.rows()? {
                writeln!(
                    s,
                    "{:<24} {:>10} {:<16} {:>12} {:>10}",
                    r.number.binary,
                    r.number.value,
                    r.number.small_factors.to_string(),
                    r.first_to_exit.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                    r.exit_count
                )
                .unwrap();
            }
            writeln!(s, "total {}", census.total()).unwrap();
            s
        }
    };
    ctx.emit(out, &text)
}

fn family(
    ctx: &Ctx,
    spec: &FamilySpec,
    min_run: usize,
    max_exceptions: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let format = ctx.format(&[Format::Text, Format::Csv, Format::Json], Format::Text)?;
    let _ = writeln!(
        err,
        "family: {}*{}^k{:+} for k in {}..={} on {} shards",
        spec.mult, spec.base, spec.offset, spec.k_lo, spec.k_hi, ctx.shards
    );
    let policy = StopPolicy::with_minima(seed_minima(&ctx.program, 100, 1)?).caps(ctx.caps()?);
    let points = family_lengths(&ctx.program, spec, &policy, ctx.shards)?;
    let report = find_islands(&island_input(&points), min_run, max_exceptions);
    let text = match format {
        Format::Csv => family_csv(spec, &points)?,
        Format::Json => {
            serde_json::to_string_pretty(&json!({
                "program": ctx.program.id(),
                "spec": spec,
                "points": points,
                "islands": report,
            }))
            .expect("family serializes")
                + "\n"
        }
        _ => {
            let mut s = String::new();
            for p in &points {
                match p.length {
                    Some(l) => writeln!(s, "k={}  digits {}  length {}  terms {}", p.k, p.n0_digits, l, l + 1),
                    None => writeln!(s, "k={}  digits {}  capped", p.k, p.n0_digits),
                }
                .unwrap();
            }
            for i in &report.islands {
                let ex: Vec<String> = i
                    .exceptions
                    .iter()
                    .map(|(k, l)| format!("{k}:{}", l.map(|v| v.to_string()).unwrap_or_else(|| "capped".into())))
                    .collect();
                writeln!(
                    s,
                    "island k={}..{}  length {}  exceptions [{}]",
                    i.k_start,
                    i.k_end,
                    i.common_length,
                    ex.join(", ")
                )
                .unwrap();
            }
            s
        }
    };
    ctx.emit(out, &text)
}

fn nullmodel(ctx: &Ctx, name: &str, n0: Option<&str>, loop_min: &str, out: &mut dyn Write) -> CliResult<()> {
    let format = ctx.format(&[Format::Text, Format::Csv, Format::Json], Format::Text)?;
    let profile: DecayProfile = name.parse().map_err(CliError::usage)?;
    let factor = window_factor(&profile);
    let family = if name.starts_with("p4-eta1:") {
        Some(MFamily::Eta1)
    } else if name.starts_with("p4-eta2:") {
        Some(MFamily::Eta2)
    } else {
        None
    };
    let boundary = family.map(stability_boundary).transpose()?;
    let mut predictions = BTreeMap::new();
    if let Some(n0) = n0 {
        let n0 = parse_positive("--n0", n0)?;
        let min = parse_positive("--loop-min", loop_min)?;
        for m in [LengthModel::Low, LengthModel::Mid, LengthModel::High] {
            predictions.insert(m.to_string(), Some(predict_length(m, &n0)?));
        }
        predictions.insert(
            "window".into(),
            predicted_length_from_factor(factor, f64::from(profile.window), &n0, &min).ok(),
        );
    }
    let components: Vec<String> = profile
        .components
        .iter()
        .map(|c| format!("{} x {}", c.count, c.factor))
        .collect();
    let text = match format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({
                "profile": profile,
                "window_factor": factor,
                "stability_boundary": boundary,
                "predictions": predictions,
            }))
            .expect("profile serializes")
                + "\n"
        }
        Format::Csv => format!(
            "profile,window,factor,stability_boundary\n{},{},{:.6},{}\n",
            profile.name,
            profile.window,
            factor,
            boundary.map(|b| format!("{b:.6}")).unwrap_or_default()
        ),
        _ => {
            let mut s = String::new();
            writeln!(s, "profile: {}", profile.name).unwrap();
            writeln!(s, "window: {} steps", profile.window).unwrap();
            writeln!(s, "components: {}", components.join(", ")).unwrap();
            writeln!(s, "window factor: {factor:.6}").unwrap();
            if let Some(b) = boundary {
                writeln!(s, "stability boundary: m = {b:.6}").unwrap();
            }
            for (k, v) in &predictions {
                match v {
                    Some(v) => writeln!(s, "predicted length ({k}): {v:.3}").unwrap(),
                    None => writeln!(s, "predicted length ({k}): diverges").unwrap(),
                }
            }
            s
        }
    };
    ctx.emit(out, &text)
}
