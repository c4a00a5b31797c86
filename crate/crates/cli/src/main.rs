//! `sosg`: generate corpora, build state graphs, query them and detect
//! anomalous VMs.

mod output;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use thiserror::Error;

use sosg_core::anomaly::{self, AnomalyError, DetectionConfig};
use sosg_core::builder::{self, BuildError, IdentifierPolicy};
use sosg_core::graph::{GraphError, StateGraph};
use sosg_core::ingest::{self, IngestError, SourceEntry};
use sosg_core::query::{EntitySelector, PathQuery, QueryEngine, QueryError, Target};
use sosg_core::synth::{self, FaultKind, FaultRequest, FleetSpec, SynthError};
use sosg_core::time::{parse_instant, Micros};

use output::Format;

/// Exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_QUERY: u8 = 4;
pub const EXIT_ANOMALY: u8 = 5;
pub const EXIT_INTERNAL: u8 = 10;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Query(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Query(_) => EXIT_QUERY,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Config(_) => CliError::Config(e.to_string()),
            IngestError::Io { .. } | IngestError::NotFound(_) => CliError::Input(e.to_string()),
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Policy(_) => CliError::Config(e.to_string()),
            BuildError::Graph(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<QueryError> for CliError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Invalid(_) => CliError::Config(e.to_string()),
            QueryError::NotFound(_) | QueryError::Ambiguous { .. } => CliError::Query(e.to_string()),
        }
    }
}

impl From<AnomalyError> for CliError {
    fn from(e: AnomalyError) -> Self {
        match e {
            AnomalyError::NoRoots(_) | AnomalyError::TooFewRoots(_) => CliError::Query(e.to_string()),
            AnomalyError::Params(_) => CliError::Config(e.to_string()),
            AnomalyError::BadRoot(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io { .. } => CliError::Input(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sosg", version, about = "System operation state graph toolkit")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with ground truth.
    Gen(GenArgs),
    /// Ingest a corpus and write its state graph.
    Build(BuildArgs),
    /// Run a query against a built graph.
    Query(QueryArgs),
    /// Find VMs whose dependency subgraphs have few similar peers.
    Detect(DetectArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FaultArg {
    OrphanOvsPorts,
    DbPhysicalMismatch,
    FailedMigration,
}

impl From<FaultArg> for FaultKind {
    fn from(f: FaultArg) -> Self {
        match f {
            FaultArg::OrphanOvsPorts => FaultKind::OrphanOvsPorts,
            FaultArg::DbPhysicalMismatch => FaultKind::DbPhysicalMismatch,
            FaultArg::FailedMigration => FaultKind::FailedMigration,
        }
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Output corpus directory.
    #[arg(long)]
    corpus: PathBuf,
    /// Fleet spec (JSON); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_hosts: Option<usize>,
    #[arg(long)]
    n_vms: Option<usize>,
    #[arg(long)]
    n_subnets: Option<usize>,
    #[arg(long)]
    duration_hours: Option<f64>,
    #[arg(long)]
    period_scale: Option<f64>,
    /// Fault to inject on a random long-running VM; repeatable.
    #[arg(long = "fault", value_enum)]
    faults: Vec<FaultArg>,
    /// Replace an existing corpus directory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output graph directory.
    #[arg(long)]
    graph: PathBuf,
    /// Source mapping (JSON list); defaults to `<corpus>/sources.json`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Identifier policy (JSON).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Always treat this key as an identifier; repeatable.
    #[arg(long = "include-key")]
    include: Vec<String>,
    /// Never treat this key as an identifier; repeatable.
    #[arg(long = "exclude-key")]
    exclude: Vec<String>,
    /// Number of record partitions built in parallel.
    #[arg(long)]
    partitions: Option<usize>,
    /// Replace an existing graph directory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(subcommand)]
    query: QueryCommand,
}

#[derive(Debug, Args)]
struct TimeArg {
    /// Evaluate as of this instant (RFC 3339).
    #[arg(long)]
    at: Option<String>,
}

impl TimeArg {
    fn micros(&self) -> Result<Option<Micros>, CliError> {
        self.at
            .as_deref()
            .map(|s| parse_instant(s).ok_or_else(|| CliError::Config(format!("--at: `{s}` is not an RFC 3339 instant"))))
            .transpose()
    }
}

#[derive(Debug, Subcommand)]
enum QueryCommand {
    /// Shortest entity paths between two entities or to an identifier key.
    Path {
        /// Start entity, `key=value` or a bare value.
        #[arg(long)]
        from: String,
        /// Target entity, `key=value` or a bare value.
        #[arg(long, conflicts_with = "to_dtype")]
        to: Option<String>,
        /// Target every entity with this identifier key.
        #[arg(long)]
        to_dtype: Option<String>,
        #[arg(long, default_value_t = sosg_core::query::DEFAULT_MAX_DEPTH)]
        max_depth: usize,
        /// Allowed bridge dtypes per hop, e.g. `DB,Ovs|Libvirt`.
        #[arg(long)]
        via: Option<String>,
        #[arg(long, default_value_t = sosg_core::query::DEFAULT_LIMIT)]
        limit: usize,
        #[command(flatten)]
        time: TimeArg,
    },
    /// Most recent state or event of a dtype attached to an entity.
    Latest {
        #[arg(long)]
        entity: String,
        #[arg(long)]
        dtype: String,
        #[command(flatten)]
        time: TimeArg,
    },
    /// Entities of an identifier key related to an entity.
    Related {
        #[arg(long)]
        entity: String,
        #[arg(long)]
        dtype: String,
        #[arg(long, default_value_t = sosg_core::query::DEFAULT_MAX_DEPTH)]
        max_depth: usize,
        #[arg(long)]
        via: Option<String>,
        #[command(flatten)]
        time: TimeArg,
    },
    /// VMs running on or storing blocks on a host.
    AffectedVms {
        #[arg(long)]
        host: String,
        #[command(flatten)]
        time: TimeArg,
    },
    /// Ceph blocks backing a VM.
    CephfilesForVm {
        #[arg(long)]
        vm: String,
        #[command(flatten)]
        time: TimeArg,
    },
    /// VMs with a port in a subnet.
    VmsInSubnet {
        #[arg(long)]
        subnet: String,
        #[command(flatten)]
        time: TimeArg,
    },
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Detection config (JSON); flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Minimum number of neighbors within `r` for a VM to be normal.
    #[arg(long)]
    k: Option<usize>,
    /// Neighborhood radius in generalized Jaccard distance.
    #[arg(long)]
    r: Option<f64>,
    /// BFS depth bound for subgraph extraction.
    #[arg(long)]
    max_depth: Option<u32>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with code 5 when any VM is flagged.
    #[arg(long)]
    fail_on_anomaly: bool,
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("invalid {what} {}: {e}", path.display())))
}

fn load_graph(dir: &Path) -> Result<StateGraph, CliError> {
    if !dir.join("manifest.json").is_file() {
        return Err(CliError::Input(format!("no graph at {}", dir.display())));
    }
    StateGraph::load(dir).map_err(|e| match e {
        GraphError::Io { .. } | GraphError::Corrupt { .. } => CliError::Input(e.to_string()),
        other => CliError::Internal(other.to_string()),
    })
}

fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Internal(format!("writing output: {e}")))
}

fn sibling_tmp(dir: &Path) -> PathBuf {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    dir.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Moves a fully written `tmp` directory to `dest`, replacing it when `force`.
fn publish(tmp: &Path, dest: &Path, force: bool) -> Result<(), CliError> {
    if dest.exists() {
        if !force {
            let _ = fs::remove_dir_all(tmp);
            return Err(CliError::Input(format!("{} exists; pass --force to replace it", dest.display())));
        }
        fs::remove_dir_all(dest).map_err(|e| CliError::Input(format!("removing {}: {e}", dest.display())))?;
    }
    fs::rename(tmp, dest).map_err(|e| CliError::Internal(format!("moving output into {}: {e}", dest.display())))
}

fn refuse_existing(dest: &Path, force: bool) -> Result<(), CliError> {
    if dest.exists() && !force {
        return Err(CliError::Input(format!("{} exists; pass --force to replace it", dest.display())));
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs, format: Format) -> Result<u8, CliError> {
    refuse_existing(&a.corpus, a.force)?;
    let mut spec: FleetSpec = match &a.config {
        Some(p) => read_json(p, "fleet spec")?,
        None => FleetSpec::default(),
    };
    if let Some(v) = a.n_hosts {
        spec.n_hosts = v;
    }
    if let Some(v) = a.n_vms {
        spec.n_vms = v;
    }
    if let Some(v) = a.n_subnets {
        spec.n_subnets = v;
    }
    if let Some(v) = a.duration_hours {
        spec.duration_hours = v;
    }
    if let Some(v) = a.period_scale {
        spec.period_scale = v;
    }
    spec.faults.extend(a.faults.iter().map(|&f| FaultRequest {
        kind: f.into(),
        target_vm: None,
    }));
    let corpus = synth::generate(&spec, a.seed)?;
    let tmp = sibling_tmp(&a.corpus);
    let _ = fs::remove_dir_all(&tmp);
    if let Err(e) = corpus.write_to(&tmp) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e.into());
    }
    publish(&tmp, &a.corpus, a.force)?;
    emit(&output::gen_summary(&corpus, &a.corpus, format))?;
    Ok(EXIT_OK)
}

fn cmd_build(a: &BuildArgs, format: Format) -> Result<u8, CliError> {
    if !a.corpus.is_dir() {
        return Err(CliError::Input(format!("input not found: {}", a.corpus.display())));
    }
    refuse_existing(&a.graph, a.force)?;
    let config = a.config.clone().unwrap_or_else(|| a.corpus.join("sources.json"));
    let entries: Vec<SourceEntry> = read_json(&config, "source mapping")?;
    let mut policy: IdentifierPolicy = match &a.policy {
        Some(p) => read_json(p, "identifier policy")?,
        None => IdentifierPolicy::default(),
    };
    policy.include.extend(a.include.iter().cloned());
    policy.exclude.extend(a.exclude.iter().cloned());
    policy.validate()?;
    if a.partitions == Some(0) {
        return Err(CliError::Config("--partitions must be at least 1".into()));
    }

    let (records, ingest_report) = ingest::ingest_corpus(&a.corpus, &entries)?;
    let partitions = a.partitions.unwrap_or_else(rayon::current_num_threads).max(1);
    let chunk = records.len().div_ceil(partitions).max(1);
    let parts: Vec<&[_]> = records.chunks(chunk).collect();
    let (graph, report) = builder::build_partitioned(&parts, &policy)?;

    let tmp = sibling_tmp(&a.graph);
    let _ = fs::remove_dir_all(&tmp);
    if let Err(e) = graph.save(&tmp) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(CliError::Internal(e.to_string()));
    }
    publish(&tmp, &a.graph, a.force)?;
    emit(&output::build_summary(&report, &ingest_report, format))?;
    Ok(EXIT_OK)
}

fn parse_via(via: &Option<String>) -> Option<Vec<String>> {
    via.as_ref().map(|v| v.split(',').map(|s| s.trim().to_string()).collect())
}

fn cmd_query(a: &QueryArgs, format: Format) -> Result<u8, CliError> {
    let graph = load_graph(&a.graph)?;
    let qe = QueryEngine::new(&graph);
    let text = match &a.query {
        QueryCommand::Path {
            from,
            to,
            to_dtype,
            max_depth,
            via,
            limit,
            time,
        } => {
            let target = match (to, to_dtype) {
                (Some(t), _) => Target::Entity(EntitySelector::parse(t, &graph)),
                (None, Some(d)) => Target::Dtype(d.clone()),
                (None, None) => return Err(CliError::Config("path needs --to or --to-dtype".into())),
            };
            let mut q = PathQuery::new(EntitySelector::parse(from, &graph), target)
                .with_max_depth(*max_depth)
                .with_limit(*limit)
                .at(time.micros()?);
            if let Some(hops) = parse_via(via) {
                q = q.with_constraints(hops);
            }
            let result = qe.find_paths(&q)?;
            output::paths(&graph, &result, format)
        }
        QueryCommand::Latest { entity, dtype, time } => {
            let sel = EntitySelector::parse(entity, &graph);
            let v = qe.latest_state(&sel, dtype, time.micros()?)?;
            output::latest(&graph, v, format)
        }
        QueryCommand::Related {
            entity,
            dtype,
            max_depth,
            via,
            time,
        } => {
            let sel = EntitySelector::parse(entity, &graph);
            let constraints = parse_via(via).map(|hops| {
                hops.iter()
                    .map(|h| h.split('|').map(str::to_string).collect::<BTreeSet<String>>())
                    .collect()
            });
            let found = qe.list_related(&sel, dtype, *max_depth, constraints, time.micros()?)?;
            output::vertices(&graph, &found, format)
        }
        QueryCommand::AffectedVms { host, time } => {
            output::vertices(&graph, &qe.affected_vms(host, time.micros()?)?, format)
        }
        QueryCommand::CephfilesForVm { vm, time } => {
            output::vertices(&graph, &qe.cephfiles_for_vm(vm, time.micros()?)?, format)
        }
        QueryCommand::VmsInSubnet { subnet, time } => {
            output::vertices(&graph, &qe.vms_in_subnet(subnet, time.micros()?)?, format)
        }
    };
    emit(&text)?;
    Ok(EXIT_OK)
}

fn cmd_detect(a: &DetectArgs, format: Format) -> Result<u8, CliError> {
    let mut config: DetectionConfig = match &a.config {
        Some(p) => read_json(p, "detection config")?,
        None => DetectionConfig::default(),
    };
    if a.k.is_some() {
        config.k = a.k;
    }
    if a.r.is_some() {
        config.r = a.r;
    }
    if let Some(d) = a.max_depth {
        config.max_bfs_depth = d;
    }
    config.validate()?;
    let graph = load_graph(&a.graph)?;
    let report = anomaly::analyze(&graph, &config)?;
    let text = output::detect(&graph, &report, format);
    match &a.out {
        Some(path) => fs::write(path, &text).map_err(|e| CliError::Input(format!("writing {}: {e}", path.display())))?,
        None => emit(&text)?,
    }
    if a.fail_on_anomaly && !report.flagged.is_empty() {
        return Ok(EXIT_ANOMALY);
    }
    Ok(EXIT_OK)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SOSG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SOSG_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, cli.format),
        Command::Build(a) => cmd_build(a, cli.format),
        Command::Query(a) => cmd_query(a, cli.format),
        Command::Detect(a) => cmd_detect(a, cli.format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
