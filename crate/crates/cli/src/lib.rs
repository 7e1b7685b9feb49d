//! The `collatz` command line.
//!
//! Data goes to the output writer (or `--out`), progress and diagnostics to
//! the error writer. Exit status is 0 on success, 1 when a computation
//! fails, 2 for bad arguments.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod checkpoint;
mod commands;
pub mod error;
mod hunt;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointRecord, CHECKPOINT_VERSION};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "collatz", version, about = "Iterate and analyze Collatz-like residue-rule maps")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
    Dot,
}

#[derive(Debug, Args)]
struct Common {
    /// Program id (p1, p1m, p2, p4:M, p6:P, p9:P:-+ / p9:P:+-) or `dsl:<rules>`
    #[arg(long, global = true, default_value = "p1")]
    program: String,
    /// Iteration cap per trajectory
    #[arg(long = "max-iter", global = true)]
    max_iter: Option<u64>,
    /// Bit-length cap per trajectory
    #[arg(long = "max-bits", global = true)]
    max_bits: Option<u64>,
    /// Worker shards for scans (default: available parallelism)
    #[arg(long, global = true)]
    shards: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write data here instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Iterate one start value
    Traj {
        #[arg(long)]
        n0: String,
        /// Include every value (csv: one row per step)
        #[arg(long)]
        path: bool,
    },
    /// Find loops from odd starts up to a bound
    Loops {
        #[arg(long = "scan-to", default_value_t = 10_000)]
        scan_to: u64,
        /// List loop members in json output
        #[arg(long)]
        members: bool,
    },
    /// Count which loop each odd start in a range exits into
    Basin {
        /// Inclusive range A:B
        #[arg(long = "odd-range")]
        odd_range: String,
    },
    /// Picket-fence exit census of the first N odd integers
    Picket {
        #[arg(long, default_value_t = 1_000_001)]
        count: u64,
    },
    /// Sequence lengths over mult * base^k + offset
    Family {
        #[arg(long)]
        base: u64,
        /// Inclusive exponent range LO:HI
        #[arg(long)]
        exp: String,
        #[arg(long, default_value_t = 1)]
        mult: u64,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        offset: i64,
        #[arg(long = "min-run", default_value_t = collatz_core::family::DEFAULT_MIN_RUN)]
        min_run: usize,
        #[arg(long = "max-exceptions", default_value_t = collatz_core::family::DEFAULT_MAX_EXCEPTIONS)]
        max_exceptions: usize,
    },
    /// Window decay factor of a null-model profile
    Nullmodel {
        /// p1, p2-simple, p2-enriched, p4-eta1:M, p4-eta2:M or p6-7
        #[arg(long)]
        profile: String,
        /// Also predict the length from this start
        #[arg(long)]
        n0: Option<String>,
        #[arg(long = "loop-min", default_value = "1")]
        loop_min: String,
    },
    /// Exit tree of a loop, or reverse tree of a value
    Tree {
        /// Minimum of the loop whose first exiters are drawn
        #[arg(long = "loop", conflicts_with = "root")]
        loop_min: Option<String>,
        #[arg(long = "first-exiters", default_value_t = 10)]
        first_exiters: usize,
        /// Odd starts scanned for exiters
        #[arg(long = "scan-cap", default_value_t = 10_000_000)]
        scan_cap: u64,
        /// Expand preimages of this value instead
        #[arg(long)]
        root: Option<String>,
        #[arg(long, default_value_t = 6)]
        depth: u32,
        /// Largest preimage kept
        #[arg(long, default_value = "1000000")]
        bound: String,
        #[arg(long = "node-cap", default_value_t = collatz_core::tree::DEFAULT_NODE_CAP)]
        node_cap: usize,
    },
    /// Long single run with checkpoints
    Hunt {
        #[arg(long)]
        n0: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long = "checkpoint-every", default_value_t = 1_000_000)]
        checkpoint_every: u64,
        /// Stop (leaving a checkpoint) once this many iterations are done
        #[arg(long = "stop-after")]
        stop_after: Option<u64>,
        /// Loops are seeded from odd starts up to this bound
        #[arg(long = "seed-scan", default_value_t = 1_000)]
        seed_scan: u64,
    },
}

/// Runs one invocation and returns its exit status.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    match commands::dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
