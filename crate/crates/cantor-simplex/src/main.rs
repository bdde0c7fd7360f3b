//! Command-line front end: build chains, check them, divide clopen sets,
//! amalgamate algebras, match chains, and replay certificates byte for byte.
//!
//! Exit codes: 0 verified, 1 failed, 2 malformed input, 3 incomplete within
//! the given budgets. `CANTOR_SIMPLEX_THREADS` caps the worker pool.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use cantor_simplex::algebra::{AtomId, Embedding};
use cantor_simplex::amalgam::{amalgamate, AmalgamationError, AmalgamationResult, CouplingStrategy};
use cantor_simplex::backforth::{
    back_and_forth_extend, BackForthError, PartialIso, Side, TargetAtom,
};
use cantor_simplex::cert::{exit_code, Certificate};
use cantor_simplex::chain::{build_limit, ChainError, LimitChain};
use cantor_simplex::face::{limit_isomorphism_h, FaceError, LimitIsomorphism};
use cantor_simplex::io::{self, IoError, CHAIN_SCHEMA, CLOPEN_SCHEMA, EMBEDDING_SCHEMA};
use cantor_simplex::measure::MeasureVector;
use cantor_simplex::partition::{approx_divide, DivisionReport, PartitionError};
use cantor_simplex::prefix_map::{SwapMode, SwapRegistry};
use cantor_simplex::rational::Rat;
use cantor_simplex::verify::{verify_dynamical_simplex, Verdict};
use cantor_simplex::words::ClopenSet;

#[derive(Parser)]
#[command(
    name = "cantor-simplex",
    about = "Exact-arithmetic toolkit for simplices of measures on Cantor space",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Build a refinement chain from the deterministic task schedule.
    LimitBuild {
        /// Number of measures.
        #[arg(long, value_parser = clap::value_parser!(usize))]
        k: usize,
        /// Denominator budget for the scheduled algebras.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        denoms: u64,
        /// Stage budget; a schedule cut short marks the chain truncated.
        #[arg(long, value_parser = clap::value_parser!(usize))]
        stages: usize,
        /// Permutes schedule entries of equal denominator.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search a chain for dynamical-simplex witnesses.
    Check {
        #[arg(long)]
        chain: PathBuf,
        /// Denominator bound for the vectors under test.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        denoms: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Divide a clopen set into n nearly equal clopen pieces.
    Divide {
        /// Clopen set file (clopen.v1).
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        n: usize,
        /// Allowed slack, e.g. 1/5.
        #[arg(long)]
        eps: String,
        #[arg(long, value_enum, default_value_t = ModeArg::All)]
        mode: ModeArg,
        /// Bernoulli parameters for weight mode, e.g. 1/2,1/3.
        #[arg(long, value_delimiter = ',')]
        measures: Vec<String>,
        /// Cylinder depth budget for the cover search.
        #[arg(long, default_value_t = 16)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Amalgamate two embeddings over their common source algebra.
    Amalgamate {
        /// Left embedding file (embedding.v1).
        #[arg(long)]
        left: PathBuf,
        /// Right embedding file (embedding.v1).
        #[arg(long)]
        right: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::Product)]
        strategy: StrategyArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Match the last stages of two chains by back-and-forth extension.
    Backforth {
        /// Left chain file (chain.v1).
        #[arg(long)]
        left: PathBuf,
        /// Right chain file (chain.v1).
        #[arg(long)]
        right: PathBuf,
        /// Stage budget for splitting tasks on either side.
        #[arg(long, default_value_t = 16)]
        stages: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Permute the vertex measures of a chain and emit the isomorphism germ
    /// with its per-atom pushforward certificate.
    SpeedupDemo {
        #[arg(long)]
        chain: PathBuf,
        /// Vertex permutation, e.g. 2,0,1.
        #[arg(long, value_delimiter = ',', required = true)]
        perm: Vec<usize>,
        /// Stage budget for the matching tasks.
        #[arg(long, default_value_t = 16)]
        stages: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the command pinned in a certificate and compare the bytes.
    Replay {
        /// Certificate file (cert.v1).
        cert: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    All,
    Weight,
}

impl From<ModeArg> for SwapMode {
    fn from(mode: ModeArg) -> SwapMode {
        match mode {
            ModeArg::All => SwapMode::AllSwaps,
            ModeArg::Weight => SwapMode::WeightPreserving,
        }
    }
}

impl ModeArg {
    fn name(self) -> &'static str {
        match self {
            ModeArg::All => "all",
            ModeArg::Weight => "weight",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Product,
    Northwest,
}

impl From<StrategyArg> for CouplingStrategy {
    fn from(strategy: StrategyArg) -> CouplingStrategy {
        match strategy {
            StrategyArg::Product => CouplingStrategy::Product,
            StrategyArg::Northwest => CouplingStrategy::Northwest,
        }
    }
}

impl StrategyArg {
    fn name(self) -> &'static str {
        match self {
            StrategyArg::Product => "product",
            StrategyArg::Northwest => "northwest",
        }
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid rational {0:?}")]
    BadRational(String),
    #[error("invalid chain: {0}")]
    BadChain(ChainError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Amalgam(#[from] AmalgamationError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Face(#[from] FaceError),
    #[error(transparent)]
    BackForth(#[from] BackForthError),
    #[error("chains disagree on the vertex count: {0} vs {1}")]
    VertexMismatch(usize, usize),
    #[error("pinned command does not parse: {0}")]
    BadReplayCommand(String),
    #[error("certificates cannot pin another replay")]
    NestedReplay,
}

/// What a subcommand produces: canonical artifact bytes, the verdict that
/// becomes the exit code, and a line for stdout.
struct Outcome {
    status: Verdict,
    bytes: Vec<u8>,
    summary: String,
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("CANTOR_SIMPLEX_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    if let Command::Replay { cert } = &command {
        return replay(cert);
    }
    let out = out_path(&command);
    let outcome = build_outcome(&command)?;
    if let Some(path) = out {
        fs::write(&path, &outcome.bytes).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        })?;
    }
    println!("{}", outcome.summary);
    Ok(ExitCode::from(exit_code(outcome.status) as u8))
}

fn out_path(command: &Command) -> Option<PathBuf> {
    match command {
        Command::LimitBuild { out, .. }
        | Command::Check { out, .. }
        | Command::Divide { out, .. }
        | Command::Amalgamate { out, .. }
        | Command::Backforth { out, .. }
        | Command::SpeedupDemo { out, .. } => out.clone(),
        Command::Replay { .. } => None,
    }
}

fn parse_rat(text: &str) -> Result<Rat, CliError> {
    text.parse()
        .map_err(|_| CliError::BadRational(text.to_string()))
}

fn load_chain(path: &Path) -> Result<LimitChain, CliError> {
    let chain: LimitChain = io::load(path, CHAIN_SCHEMA)?;
    chain.validate().map_err(CliError::BadChain)?;
    Ok(chain)
}

fn build_outcome(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::LimitBuild {
            k,
            denoms,
            stages,
            seed,
            out: _,
        } => {
            let chain = build_limit(*k, *stages, *denoms, *seed)?;
            let status = if chain.is_truncated() {
                Verdict::Incomplete
            } else {
                Verdict::Verified
            };
            let summary = format!(
                "{status}: {} stages, {} atoms at the top{}",
                chain.stage_count(),
                chain.last_stage().atoms().len(),
                if chain.is_truncated() {
                    " (schedule truncated)"
                } else {
                    ""
                },
            );
            Ok(Outcome {
                status,
                bytes: io::to_json_bytes(CHAIN_SCHEMA, &chain),
                summary,
            })
        }
        Command::Check {
            chain,
            denoms,
            out: _,
        } => {
            let loaded: LimitChain = io::load(chain, CHAIN_SCHEMA)?;
            let report = verify_dynamical_simplex(&loaded, *denoms);
            let status = report.verdict;
            let summary = format!(
                "{status}: {} vectors, {} subdivision / {} inclusion / {} separation witnesses",
                report.realized.len(),
                report.subdivisions.iter().filter(|w| w.found.is_some()).count(),
                report.inclusions.iter().filter(|w| w.found.is_some()).count(),
                report.separations.iter().filter(|w| w.found.is_some()).count(),
            );
            let cert = Certificate {
                command: vec![
                    "check".to_string(),
                    "--chain".to_string(),
                    chain.display().to_string(),
                    "--denoms".to_string(),
                    denoms.to_string(),
                ],
                inputs: BTreeMap::from([(
                    "--chain".to_string(),
                    io::digest_file(chain)?,
                )]),
                seed: None,
                status,
                payload: report,
            };
            Ok(Outcome {
                status,
                bytes: cert.to_bytes(),
                summary,
            })
        }
        Command::Divide {
            set,
            n,
            eps,
            mode,
            measures,
            budget,
            out: _,
        } => {
            let clopen: ClopenSet = io::load(set, CLOPEN_SCHEMA)?;
            let eps_value = parse_rat(eps)?;
            let measure_values = measures
                .iter()
                .map(|m| parse_rat(m))
                .collect::<Result<Vec<Rat>, CliError>>()?;
            let mut registry = SwapRegistry::new((*mode).into());
            let (status, payload, detail) = match approx_divide(
                &clopen,
                *n,
                &eps_value,
                &mut registry,
                &measure_values,
                *budget,
            ) {
                Ok(report) => {
                    let status = if report.all_hold() {
                        Verdict::Verified
                    } else {
                        Verdict::Failed
                    };
                    let detail = format!(
                        "n={} pieces of {} words each",
                        report.b_sets.len(),
                        report.b().words().len(),
                    );
                    (status, DividePayload::Report(Box::new(report)), detail)
                }
                Err(PartitionError::BudgetExhausted { detail }) => (
                    Verdict::Incomplete,
                    DividePayload::BudgetExhausted {
                        detail: detail.clone(),
                    },
                    detail,
                ),
                Err(other) => return Err(other.into()),
            };
            let mut command_echo = vec![
                "divide".to_string(),
                "--set".to_string(),
                set.display().to_string(),
                "--n".to_string(),
                n.to_string(),
                "--eps".to_string(),
                eps_value.to_string(),
                "--mode".to_string(),
                mode.name().to_string(),
            ];
            if !measure_values.is_empty() {
                command_echo.push("--measures".to_string());
                command_echo.push(
                    measure_values
                        .iter()
                        .map(Rat::to_string)
                        .collect::<Vec<_>>()
                        .join(","),
                );
            }
            command_echo.push("--budget".to_string());
            command_echo.push(budget.to_string());
            let cert = Certificate {
                command: command_echo,
                inputs: BTreeMap::from([("--set".to_string(), io::digest_file(set)?)]),
                seed: None,
                status,
                payload,
            };
            Ok(Outcome {
                status,
                bytes: cert.to_bytes(),
                summary: format!("{status}: {detail}"),
            })
        }
        Command::Amalgamate {
            left,
            right,
            strategy,
            out: _,
        } => {
            let alpha: Embedding = io::load(left, EMBEDDING_SCHEMA)?;
            let beta: Embedding = io::load(right, EMBEDDING_SCHEMA)?;
            let result = amalgamate(&alpha, &beta, (*strategy).into())?;
            let square_commutes = alpha.compose(&result.alpha_prime)
                == beta.compose(&result.beta_prime);
            let legs_embed =
                result.alpha_prime.is_embedding() && result.beta_prime.is_embedding();
            let status = if square_commutes && legs_embed {
                Verdict::Verified
            } else {
                Verdict::Failed
            };
            let summary = format!(
                "{status}: amalgam of {} atoms over {} + {}",
                result.amalgam.atoms().len(),
                alpha.target.atoms().len(),
                beta.target.atoms().len(),
            );
            let cert = Certificate {
                command: vec![
                    "amalgamate".to_string(),
                    "--left".to_string(),
                    left.display().to_string(),
                    "--right".to_string(),
                    right.display().to_string(),
                    "--strategy".to_string(),
                    strategy.name().to_string(),
                ],
                inputs: BTreeMap::from([
                    ("--left".to_string(), io::digest_file(left)?),
                    ("--right".to_string(), io::digest_file(right)?),
                ]),
                seed: None,
                status,
                payload: AmalgamatePayload {
                    square_commutes,
                    legs_embed,
                    result,
                },
            };
            Ok(Outcome {
                status,
                bytes: cert.to_bytes(),
                summary,
            })
        }
        Command::Backforth {
            left,
            right,
            stages,
            out: _,
        } => {
            let mut m = load_chain(left)?;
            let mut n = load_chain(right)?;
            if m.k() != n.k() {
                return Err(CliError::VertexMismatch(m.k(), n.k()));
            }
            let (status, iso, note) = match match_last_stages(&mut m, &mut n, *stages) {
                Ok(iso) => (Verdict::Verified, iso, None),
                Err(MatchOutcome::Budget { partial, budget }) => (
                    Verdict::Incomplete,
                    partial,
                    Some(format!("stage budget {budget} reached")),
                ),
                Err(MatchOutcome::Other(err)) => return Err(err.into()),
            };
            let matched = iso.pairs().len();
            let summary = match &note {
                Some(note) => format!("{status}: {matched} pairs, {note}"),
                None => format!("{status}: {matched} matched pairs"),
            };
            let cert = Certificate {
                command: vec![
                    "backforth".to_string(),
                    "--left".to_string(),
                    left.display().to_string(),
                    "--right".to_string(),
                    right.display().to_string(),
                    "--stages".to_string(),
                    stages.to_string(),
                ],
                inputs: BTreeMap::from([
                    ("--left".to_string(), io::digest_file(left)?),
                    ("--right".to_string(), io::digest_file(right)?),
                ]),
                seed: None,
                status,
                payload: BackforthPayload {
                    pairs: iso,
                    left: m,
                    right: n,
                    note,
                },
            };
            Ok(Outcome {
                status,
                bytes: cert.to_bytes(),
                summary,
            })
        }
        Command::SpeedupDemo {
            chain,
            perm,
            stages,
            out: _,
        } => {
            let loaded = load_chain(chain)?;
            let (status, payload, summary) =
                match limit_isomorphism_h(&loaded, perm, *stages) {
                    Ok(h) => {
                        let rows = h.pushforward_checks().map_err(CliError::Face)?;
                        let summary = format!(
                            "VERIFIED: {} matched pairs, pushforward exact on all",
                            rows.len(),
                        );
                        (
                            Verdict::Verified,
                            SpeedupPayload {
                                isomorphism: Some(Box::new(h)),
                                pushforward: rows,
                                note: None,
                            },
                            summary,
                        )
                    }
                    Err(FaceError::BackForth(BackForthError::StageBudget { budget })) => {
                        let note = format!("stage budget {budget} reached");
                        (
                            Verdict::Incomplete,
                            SpeedupPayload {
                                isomorphism: None,
                                pushforward: Vec::new(),
                                note: Some(note.clone()),
                            },
                            format!("INCOMPLETE: {note}"),
                        )
                    }
                    Err(other) => return Err(other.into()),
                };
            let cert = Certificate {
                command: vec![
                    "speedup-demo".to_string(),
                    "--chain".to_string(),
                    chain.display().to_string(),
                    "--perm".to_string(),
                    perm.iter()
                        .map(usize::to_string)
                        .collect::<Vec<_>>()
                        .join(","),
                    "--stages".to_string(),
                    stages.to_string(),
                ],
                inputs: BTreeMap::from([(
                    "--chain".to_string(),
                    io::digest_file(chain)?,
                )]),
                seed: None,
                status,
                payload,
            };
            Ok(Outcome {
                status,
                bytes: cert.to_bytes(),
                summary,
            })
        }
        Command::Replay { .. } => unreachable!("replay is dispatched before build_outcome"),
    }
}

enum MatchOutcome {
    Budget { partial: PartialIso, budget: usize },
    Other(BackForthError),
}

/// Extends the empty matching until it covers every atom of both current
/// last stages, in atom-id order, left side first.
fn match_last_stages(
    m: &mut LimitChain,
    n: &mut LimitChain,
    max_stages: usize,
) -> Result<PartialIso, MatchOutcome> {
    let mut iso = PartialIso::empty();
    let left_stage = m.stage_count() - 1;
    let left_atoms: Vec<AtomId> = m.last_stage().atom_ids().cloned().collect();
    let right_stage = n.stage_count() - 1;
    let right_atoms: Vec<AtomId> = n.last_stage().atom_ids().cloned().collect();
    let targets = left_atoms
        .into_iter()
        .map(|atom| TargetAtom {
            side: Side::Left,
            stage: left_stage,
            atom,
        })
        .chain(right_atoms.into_iter().map(|atom| TargetAtom {
            side: Side::Right,
            stage: right_stage,
            atom,
        }));
    for target in targets {
        iso = match back_and_forth_extend(m, n, &iso, &target, max_stages) {
            Ok(next) => next,
            Err(BackForthError::StageBudget { budget }) => {
                return Err(MatchOutcome::Budget {
                    partial: iso,
                    budget,
                })
            }
            Err(other) => return Err(MatchOutcome::Other(other)),
        };
    }
    Ok(iso)
}

#[derive(Serialize, Deserialize)]
enum DividePayload {
    #[serde(rename = "report")]
    Report(Box<DivisionReport>),
    #[serde(rename = "budget_exhausted")]
    BudgetExhausted { detail: String },
}

#[derive(Serialize, Deserialize)]
struct AmalgamatePayload {
    square_commutes: bool,
    legs_embed: bool,
    result: AmalgamationResult,
}

#[derive(Serialize, Deserialize)]
struct BackforthPayload {
    pairs: PartialIso,
    left: LimitChain,
    right: LimitChain,
    note: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct SpeedupPayload {
    isomorphism: Option<Box<LimitIsomorphism>>,
    pushforward: Vec<(MeasureVector, MeasureVector)>,
    note: Option<String>,
}

fn replay(path: &Path) -> Result<ExitCode, CliError> {
    let recorded = fs::read(path).map_err(|source| CliError::Io(IoError::File {
        path: path.display().to_string(),
        source,
    }))?;
    let cert: Certificate<serde_json::Value> = Certificate::load(path)?;
    let argv = std::iter::once("cantor-simplex".to_string()).chain(cert.command.iter().cloned());
    let cli = Cli::try_parse_from(argv)
        .map_err(|err| CliError::BadReplayCommand(err.to_string()))?;
    if matches!(cli.command, Command::Replay { .. }) {
        return Err(CliError::NestedReplay);
    }
    let outcome = build_outcome(&cli.command)?;
    if outcome.bytes == recorded {
        println!("replay: certificate is byte-identical ({})", outcome.status);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("replay: certificate bytes differ");
        Ok(ExitCode::from(1))
    }
}
