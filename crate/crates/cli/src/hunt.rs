use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use collatz_core::trajectory::{Caps, Outcome, RunState, StopPolicy};
use num_bigint::BigUint;
use serde_json::json;

use crate::checkpoint::{read_checkpoint, write_checkpoint, CheckpointRecord, CHECKPOINT_VERSION};
use crate::commands::{outcome_text, seed_minima, Ctx};
use crate::error::{CliError, CliResult};
use crate::Format;

pub(crate) const HUNT_MAX_ITERATIONS: u64 = 1_000_000_000_000;
pub(crate) const HUNT_MAX_BITS: u64 = 1_000_000;

pub(crate) struct HuntConfig {
    pub n0: BigUint,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: u64,
    pub stop_after: Option<u64>,
    pub seed_scan: u64,
}

fn record(program: &str, state: &RunState) -> CheckpointRecord {
    CheckpointRecord {
        format_version: CHECKPOINT_VERSION,
        program: program.to_string(),
        n0: state.n0.clone(),
        iterations_done: state.iterations,
        current: state.current.clone(),
        max_bits_seen: state.max_bits,
        rule_fire_counts: state.rule_fire_counts.clone(),
    }
}

fn resume(ctx: &Ctx, cfg: &HuntConfig, err: &mut dyn Write) -> CliResult<RunState> {
    let fresh = RunState::new(&ctx.program, &cfg.n0)?;
    let Some(path) = cfg.checkpoint.as_deref().filter(|p| p.exists()) else {
        return Ok(fresh);
    };
    let rec = read_checkpoint(path)?;
    let id = ctx.program.id();
    if rec.program != id || rec.n0 != cfg.n0 || rec.rule_fire_counts.len() != ctx.program.rule_count() {
        return Err(CliError::Domain(format!(
            "checkpoint {} is for {} from {}, not {id} from {}; refusing to resume",
            path.display(),
            rec.program,
            rec.n0,
            cfg.n0
        )));
    }
    let _ = writeln!(err, "hunt: resuming at {} iterations", rec.iterations_done);
    Ok(RunState {
        n0: rec.n0,
        iterations: rec.iterations_done,
        current: rec.current,
        max_bits: rec.max_bits_seen,
        rule_fire_counts: rec.rule_fire_counts,
    })
}

pub(crate) fn hunt(ctx: &Ctx, cfg: &HuntConfig, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let format = ctx.format(&[Format::Text, Format::Json], Format::Text)?;
    let caps = ctx.caps_or(Caps {
        max_iterations: HUNT_MAX_ITERATIONS,
        max_bits: HUNT_MAX_BITS,
    })?;
    let minima = seed_minima(&ctx.program, cfg.seed_scan, ctx.shards)?;
    let _ = writeln!(err, "hunt: {} known loops from odd starts <= {}", minima.len(), cfg.seed_scan);
    let policy = StopPolicy::with_minima(minima).caps(caps);
    let mut state = resume(ctx, cfg, err)?;

    let outcome = loop {
        let budget = match cfg.stop_after {
            Some(stop) if state.iterations >= stop => break None,
            Some(stop) => cfg.checkpoint_every.min(stop - state.iterations),
            None => cfg.checkpoint_every,
        };
        let outcome = state.advance(&ctx.program, &policy, budget);
        if let Some(path) = &cfg.checkpoint {
            write_checkpoint(&record(ctx.program.id(), &state), path)?;
        }
        let _ = writeln!(err, "hunt: {} iterations, {} bits", state.iterations, state.current.bits());
        if outcome.is_some() {
            break outcome;
        }
    };

    let outcome_label = match &outcome {
        Some(o) => outcome_text(o),
        None => format!("interrupted after {} iterations", state.iterations),
    };
    let text = match format {
        Format::Json => {
            let outcome_json = match &outcome {
                Some(o) => serde_json::to_value(o).expect("outcome serializes"),
                None => json!({"kind": "interrupted"}),
            };
            let terms = match &outcome {
                Some(Outcome::Converged { length, .. }) => Some(length + 1),
                _ => None,
            };
            serde_json::to_string_pretty(&json!({
                "program": ctx.program.id(),
                "n0": state.n0.to_string(),
                "outcome": outcome_json,
                "iterations": state.iterations,
                "terms": terms,
                "current": state.current.to_string(),
                "peak_bits": state.max_bits,
                "rule_fire_counts": state.rule_fire_counts,
            }))
            .expect("hunt serializes")
                + "\n"
        }
        _ => {
            let mut s = String::new();
            writeln!(s, "program: {}", ctx.program.id()).unwrap();
            writeln!(s, "n0: {}", state.n0).unwrap();
            writeln!(s, "outcome: {outcome_label}").unwrap();
            writeln!(s, "iterations: {}", state.iterations).unwrap();
            writeln!(s, "peak bits: {}", state.max_bits).unwrap();
            let counts: Vec<String> = state.rule_fire_counts.iter().map(ToString::to_string).collect();
            writeln!(s, "rules fired: {}", counts.join(", ")).unwrap();
            s
        }
    };
    ctx.emit(out, &text)
}
