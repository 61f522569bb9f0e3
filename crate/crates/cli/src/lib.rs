//! `cohortflow` command line. Every artifact starts with `#` metadata lines
//! (tool version, command, seed, parameters); JSON artifacts carry the same
//! data in a `meta` object.

use clap::{Args, Parser, Subcommand, ValueEnum};
use cohortflow::agglomeration::progression_graph;
use cohortflow::clustering::{ClusterAssignment, ClusterMethod};
use cohortflow::data::synth::{generate_synthetic, SynthSpec};
use cohortflow::data::{parse_cohort, Arm, Cohort, CohortConfig, SeverityCoding};
use cohortflow::explain::write_heatmap_csv;
use cohortflow::graph::{
    latent_embed, load_checkpoint, train_autoencoder, write_training_log, Checkpoint, GTParams, PatientGraph, TrainState,
};
use cohortflow::pipeline::{
    explain_pipeline, graph_assignment, group_stats, group_sequences, parse_assignment_csv, ward_assignment,
    write_assignment_csv, AnalysisConfig,
};
use cohortflow::stats::{write_box_csv, write_incidence_csv, write_km_csv};
use cohortflow::Error;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cohortflow", version, about = "Temporal event-sequence analytics for trial cohorts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort with archetype labels.
    Synth(SynthArgs),
    /// Parse and validate cohort files.
    Validate(CohortArgs),
    /// Cluster patients and write an assignment file.
    Cluster {
        #[command(flatten)]
        cohort: CohortArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Ward)]
        method: MethodArg,
        /// Model checkpoint; required for `--method graph`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the graph autoencoder and write a checkpoint plus loss log.
    Train {
        #[command(flatten)]
        cohort: CohortArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long, default_value = "checkpoint.json")]
        out: PathBuf,
        #[arg(long, default_value = "training_log.csv")]
        log: PathBuf,
    },
    /// Write the cluster-by-feature importance heatmap.
    Explain {
        #[command(flatten)]
        cohort: CohortArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        assignment: PathBuf,
        /// Method recorded for the assignment file.
        #[arg(long, value_enum, default_value_t = MethodArg::Ward)]
        method: MethodArg,
        #[arg(long, default_value = "importance.csv")]
        out: PathBuf,
    },
    /// Agglomerate trajectories into a progression graph (JSON and DOT).
    Agglomerate {
        #[command(flatten)]
        cohort: CohortArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Restrict to one cluster of this assignment file.
        #[arg(long, requires = "cluster")]
        assignment: Option<PathBuf>,
        #[arg(long, requires = "assignment")]
        cluster: Option<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::Ward)]
        method: MethodArg,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Export survival, box and incidence tables.
    Stats {
        #[command(flatten)]
        cohort: CohortArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Group by the clusters of this assignment file; arms otherwise.
        #[arg(long)]
        assignment: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MethodArg::Ward)]
        method: MethodArg,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Serve the HTTP JSON API.
    Serve {
        #[command(flatten)]
        cohort: CohortArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Run the full chain and write every export.
    Pipeline {
        #[command(flatten)]
        cohort: CohortArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Ward,
    Graph,
}

impl From<MethodArg> for ClusterMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ward => ClusterMethod::WardKnowledge,
            MethodArg::Graph => ClusterMethod::GraphAi,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 147)]
    n: usize,
    /// Patients in arm A; defaults to half, rounded down.
    #[arg(long)]
    arm_a: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1.5)]
    separation: f64,
    #[arg(long, default_value_t = 180)]
    horizon: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Cohort files. Missing paths default to `baseline.csv`, `events.csv` and
/// `cohort.toml` inside `--input`.
#[derive(Debug, Args)]
struct CohortArgs {
    #[arg(long, default_value = ".")]
    input: PathBuf,
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Analysis parameters. A `--settings` TOML file supplies values; explicit
/// flags take precedence over it.
#[derive(Debug, Args)]
struct AnalysisArgs {
    #[arg(long)]
    settings: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    neighbors: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    latent: Option<usize>,
    /// Treat liver transplant as censoring rather than an event.
    #[arg(long)]
    censor_transplant: bool,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type CliResult<T> = Result<T, CliError>;

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(Error::Divergence { .. }) => EXIT_DIVERGENCE,
            CliError::Core(e) if e.is_validation() => EXIT_VALIDATION,
            CliError::Core(Error::Checkpoint(_) | Error::InvalidK { .. }) => EXIT_VALIDATION,
            CliError::Core(_) => EXIT_FAILURE,
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Core(err) => eprintln!("error: {err}"),
            }
            e.exit_code()
        }
    }
}

struct Loaded {
    cohort: Cohort,
    coding: SeverityCoding,
}

impl CohortArgs {
    fn load(&self) -> CliResult<Loaded> {
        let pick = |p: &Option<PathBuf>, name: &str| p.clone().unwrap_or_else(|| self.input.join(name));
        let config_path = pick(&self.config, "cohort.toml");
        let config = if config_path.exists() || self.config.is_some() {
            CohortConfig::load(&config_path)?
        } else {
            CohortConfig::default()
        };
        let cohort = parse_cohort(&pick(&self.baseline, "baseline.csv"), &pick(&self.events, "events.csv"), &config)?;
        Ok(Loaded { coding: config.coding()?, cohort })
    }
}

impl AnalysisArgs {
    fn resolve(&self) -> CliResult<AnalysisConfig> {
        let mut c = match &self.settings {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
            }
            None => AnalysisConfig::default(),
        };
        macro_rules! apply {
            ($($flag:ident => $($field:ident).+;)*) => {$(
                if let Some(v) = self.$flag {
                    c.$($field).+ = v;
                }
            )*};
        }
        apply! {
            k => k;
            neighbors => neighbors;
            seed => seed;
            delta => delta;
            sigma => sigma;
            confidence => confidence;
            epochs => train.epochs;
            lr => train.lr;
            batch => train.batch_size;
            hidden => train.hidden;
            latent => train.latent;
        }
        if self.censor_transplant {
            c.transplant_is_event = false;
        }
        c.validate()?;
        Ok(c)
    }
}

/// `#` header lines for an artifact.
fn header(command: &str, c: &AnalysisConfig, extra: &[String]) -> Vec<String> {
    let mut h = vec![
        format!("cohortflow {} {command}", env!("CARGO_PKG_VERSION")),
        format!("seed={}", c.seed),
        format!(
            "k={} neighbors={} delta={} sigma={} confidence={} transplant_is_event={}",
            c.k, c.neighbors, c.delta, c.sigma, c.confidence, c.transplant_is_event
        ),
        format!(
            "epochs={} lr={} batch={} hidden={} latent={} mlp_hidden={} mlp_lr={} mlp_epochs={}",
            c.train.epochs, c.train.lr, c.train.batch_size, c.train.hidden, c.train.latent, c.mlp.hidden, c.mlp.lr, c.mlp.epochs
        ),
    ];
    h.extend_from_slice(extra);
    h
}

fn meta_json(lines: &[String]) -> serde_json::Value {
    serde_json::Value::Array(lines.iter().map(|l| serde_json::Value::String(l.clone())).collect())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> cohortflow::Result<()>) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    f(&mut out)?;
    Ok(out)
}

fn load_params(path: &Path, graph: &PatientGraph) -> CliResult<GTParams> {
    let ck = load_checkpoint(path)?;
    if ck.params.input_dim() != graph.features.cols() {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects {} input features, cohort provides {}",
            ck.params.input_dim(),
            graph.features.cols()
        ))
        .into());
    }
    Ok(ck.params)
}

fn assign(l: &Loaded, c: &AnalysisConfig, method: ClusterMethod, graph_params: Option<(&PatientGraph, &GTParams)>) -> CliResult<ClusterAssignment> {
    Ok(match method {
        ClusterMethod::WardKnowledge => ward_assignment(&l.cohort, &l.coding, c.k)?,
        ClusterMethod::GraphAi => {
            let (graph, params) = graph_params.ok_or_else(|| CliError::Usage("--method graph needs --checkpoint".into()))?;
            graph_assignment(&latent_embed(params, graph)?, c.k, c.seed)?
        }
    })
}

fn read_assignment(path: &Path, cohort: &Cohort, method: ClusterMethod) -> CliResult<ClusterAssignment> {
    Ok(parse_assignment_csv(&std::fs::read_to_string(path)?, cohort, method)?)
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => synth(&a),
        Command::Validate(cohort) => {
            let l = cohort.load()?;
            let c = &l.cohort;
            println!(
                "ok: {} patients ({} arm A, {} arm B), {} features, {} raw events, horizon {}, {} patients with imputed values",
                c.len(),
                c.patients.iter().filter(|p| p.arm == Arm::A).count(),
                c.patients.iter().filter(|p| p.arm == Arm::B).count(),
                c.features.len(),
                c.raw_events.len(),
                c.horizon,
                c.patients.iter().filter(|p| p.has_imputed()).count()
            );
            Ok(())
        }
        Command::Cluster { cohort, analysis, method, checkpoint, out } => {
            let l = cohort.load()?;
            let c = analysis.resolve()?;
            let method = ClusterMethod::from(method);
            let model = match &checkpoint {
                Some(path) => {
                    let graph = PatientGraph::from_cohort(&l.cohort, &l.coding, c.neighbors)?;
                    let params = load_params(path, &graph)?;
                    Some((graph, params))
                }
                None => None,
            };
            let a = assign(&l, &c, method, model.as_ref().map(|(g, p)| (g, p)))?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("assignment_{}.csv", method.key())));
            let h = header("cluster", &c, &[format!("method={}", method.key())]);
            write(&out, write_assignment_csv(&l.cohort, &a, &h))?;
            println!("{} clusters, sizes {:?} -> {}", a.k, a.sizes(), out.display());
            Ok(())
        }
        Command::Train { cohort, analysis, out, log } => {
            let l = cohort.load()?;
            let c = analysis.resolve()?;
            let graph = PatientGraph::from_cohort(&l.cohort, &l.coding, c.neighbors)?;
            let state = train_autoencoder(&graph, &c.train, c.seed)?;
            save_training(&state, &header("train", &c, &[]), &out, &log)?;
            println!(
                "train MSE {:.6} -> {:.6} over {} epochs -> {}",
                state.initial_train_mse,
                state.final_train_mse(),
                state.history.len(),
                out.display()
            );
            Ok(())
        }
        Command::Explain { cohort, analysis, checkpoint, assignment, method, out } => {
            let l = cohort.load()?;
            let c = analysis.resolve()?;
            let a = read_assignment(&assignment, &l.cohort, method.into())?;
            let graph = PatientGraph::from_cohort(&l.cohort, &l.coding, c.neighbors)?;
            let params = load_params(&checkpoint, &graph)?;
            let h = header("explain", &c, &[format!("method={}", ClusterMethod::from(method).key())]);
            write(&out, heatmap_csv(graph, params, &a, &c, &h)?)?;
            println!("importance for {} clusters -> {}", a.k, out.display());
            Ok(())
        }
        Command::Agglomerate { cohort, analysis, assignment, cluster, method, out_dir } => {
            let l = cohort.load()?;
            let c = analysis.resolve()?;
            let (members, name): (Vec<usize>, String) = match (&assignment, &cluster) {
                (Some(path), Some(name)) => {
                    let a = read_assignment(path, &l.cohort, method.into())?;
                    let idx = a
                        .cluster_names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| CliError::Usage(format!("no cluster `{name}` in {}", path.display())))?;
                    (a.members(idx), name.clone())
                }
                _ => ((0..l.cohort.len()).collect(), "all".into()),
            };
            let h = header("agglomerate", &c, &[format!("group={name}")]);
            let (json, dot) = progression_files(&l.cohort, &members, &c, &h)?;
            write(&out_dir.join(format!("progression_{name}.json")), json)?;
            write(&out_dir.join(format!("progression_{name}.dot")), dot)?;
            println!("progression for {name} ({} patients) -> {}", members.len(), out_dir.display());
            Ok(())
        }
        Command::Stats { cohort, analysis, assignment, method, out_dir } => {
            let l = cohort.load()?;
            let c = analysis.resolve()?;
            let groups = match &assignment {
                Some(path) => cluster_groups(&read_assignment(path, &l.cohort, method.into())?),
                None => arm_groups(&l.cohort),
            };
            let label = if assignment.is_some() { ClusterMethod::from(method).key() } else { "arm" };
            let h = header("stats", &c, &[format!("groups={label}")]);
            write_stats(&l.cohort, &groups, &c, &h, &out_dir, label)?;
            println!("statistics for {} groups -> {}", groups.len(), out_dir.display());
            Ok(())
        }
        Command::Serve { cohort, analysis, checkpoint, addr } => {
            let l = cohort.load()?;
            let c = analysis.resolve()?;
            let params = match &checkpoint {
                Some(path) => Some(load_checkpoint(path)?.params),
                None => None,
            };
            let session = Arc::new(cohortflow_service::Session::new(l.cohort, l.coding, c, params)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                cohortflow_service::serve(listener, session).await
            })?;
            Ok(())
        }
        Command::Pipeline { cohort, analysis, out_dir } => {
            let l = cohort.load()?;
            let c = analysis.resolve()?;
            let files = run_pipeline(&l, &c, &out_dir)?;
            println!("wrote {} files to {}", files.len(), out_dir.display());
            Ok(())
        }
    }
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    let spec = SynthSpec {
        n: a.n,
        arm_a: a.arm_a.unwrap_or(a.n / 2),
        separation: a.separation,
        horizon: a.horizon,
        ..SynthSpec::default()
    };
    let s = generate_synthetic(&spec, a.seed)?;
    write(&a.out_dir.join("baseline.csv"), &s.baseline_csv)?;
    write(&a.out_dir.join("events.csv"), &s.events_csv)?;
    write(&a.out_dir.join("labels.csv"), &s.labels_csv)?;
    write(&a.out_dir.join("cohort.toml"), &s.config_toml)?;
    println!("{} patients, {} raw events -> {}", s.cohort.len(), s.cohort.raw_events.len(), a.out_dir.display());
    Ok(())
}

fn save_training(state: &TrainState, h: &[String], checkpoint: &Path, log: &Path) -> CliResult<()> {
    write(checkpoint, Checkpoint::from_state(state).to_json())?;
    write(log, buffer(|out| write_training_log(state, h, out))?)?;
    Ok(())
}

fn heatmap_csv(graph: PatientGraph, params: GTParams, a: &ClusterAssignment, c: &AnalysisConfig, h: &[String]) -> CliResult<Vec<u8>> {
    let names: Vec<String> = graph.layout.baseline.iter().map(|b| b.name.clone()).collect();
    let pipeline = explain_pipeline(graph, params, a, &c.mlp, c.seed)?;
    let rows = pipeline.heatmap(a)?;
    let mut h = h.to_vec();
    if let Some(m) = &pipeline.mlp {
        h.push(format!("classifier_train_accuracy={}", m.train_accuracy));
    }
    buffer(|out| write_heatmap_csv(&names, &a.cluster_names, &rows, &h, out))
}

fn progression_files(cohort: &Cohort, members: &[usize], c: &AnalysisConfig, h: &[String]) -> CliResult<(String, String)> {
    let g = progression_graph(&group_sequences(cohort, members), c.delta, c.sigma)?;
    let json = serde_json::json!({ "meta": meta_json(h), "graph": g });
    let mut dot = String::new();
    for line in h {
        let _ = writeln!(dot, "// {line}");
    }
    dot.push_str(&g.to_dot());
    Ok((serde_json::to_string_pretty(&json).expect("graph serializes") + "\n", dot))
}

fn cluster_groups(a: &ClusterAssignment) -> Vec<(String, Vec<usize>)> {
    (0..a.k).map(|g| (a.cluster_names[g].clone(), a.members(g))).collect()
}

fn arm_groups(cohort: &Cohort) -> Vec<(String, Vec<usize>)> {
    [Arm::A, Arm::B]
        .into_iter()
        .map(|arm| {
            let m: Vec<usize> = cohort.patients.iter().enumerate().filter(|(_, p)| p.arm == arm).map(|(i, _)| i).collect();
            (arm.label().to_string(), m)
        })
        .filter(|(_, m)| !m.is_empty())
        .collect()
}

fn write_stats(cohort: &Cohort, groups: &[(String, Vec<usize>)], c: &AnalysisConfig, h: &[String], dir: &Path, label: &str) -> CliResult<Vec<PathBuf>> {
    let opts = c.survival_options();
    let mut km = Vec::new();
    let mut boxes = Vec::new();
    let mut incidence = Vec::new();
    for (name, members) in groups {
        let g = group_stats(cohort, members, name, c.confidence, opts)?;
        km.push(g.km);
        boxes.extend(g.boxes);
        incidence.push(g.incidence);
    }
    let files = [
        (dir.join(format!("km_{label}.csv")), buffer(|o| write_km_csv(&km, h, o))?),
        (dir.join(format!("box_{label}.csv")), buffer(|o| write_box_csv(&boxes, h, o))?),
        (dir.join(format!("incidence_{label}.csv")), buffer(|o| write_incidence_csv(&incidence, h, o))?),
    ];
    let mut written = Vec::new();
    for (path, body) in files {
        write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

/// Trains, clusters with both methods, and writes every export into
/// `out_dir`. Returns the paths written, in order.
fn run_pipeline(l: &Loaded, c: &AnalysisConfig, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    fn emit(files: &mut Vec<PathBuf>, path: PathBuf, body: Vec<u8>) -> CliResult<()> {
        write(&path, body)?;
        files.push(path);
        Ok(())
    }
    let graph = PatientGraph::from_cohort(&l.cohort, &l.coding, c.neighbors)?;
    let state = train_autoencoder(&graph, &c.train, c.seed)?;
    let h = header("pipeline", c, &[]);
    emit(&mut files, out_dir.join("checkpoint.json"), Checkpoint::from_state(&state).to_json().into_bytes())?;
    emit(&mut files, out_dir.join("training_log.csv"), buffer(|o| write_training_log(&state, &h, o))?)?;

    for method in [ClusterMethod::WardKnowledge, ClusterMethod::GraphAi] {
        let key = method.key();
        let hm = header("pipeline", c, &[format!("method={key}")]);
        let a = assign(l, c, method, Some((&graph, &state.params)))?;
        emit(&mut files, out_dir.join(format!("assignment_{key}.csv")), write_assignment_csv(&l.cohort, &a, &hm).into_bytes())?;
        emit(&mut files, out_dir.join(format!("importance_{key}.csv")), heatmap_csv(graph.clone(), state.params.clone(), &a, c, &hm)?)?;
        for (name, members) in cluster_groups(&a) {
            let hg = header("pipeline", c, &[format!("method={key}"), format!("group={name}")]);
            let (json, dot) = progression_files(&l.cohort, &members, c, &hg)?;
            emit(&mut files, out_dir.join(format!("progression_{key}_{name}.json")), json.into_bytes())?;
            emit(&mut files, out_dir.join(format!("progression_{key}_{name}.dot")), dot.into_bytes())?;
        }
        files.extend(write_stats(&l.cohort, &cluster_groups(&a), c, &hm, out_dir, key)?);
    }
    let ha = header("pipeline", c, &["groups=arm".into()]);
    files.extend(write_stats(&l.cohort, &arm_groups(&l.cohort), c, &ha, out_dir, "arm")?);
    Ok(files)
}
