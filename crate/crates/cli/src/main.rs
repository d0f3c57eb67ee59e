//! `idaudit` command-line driver.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 audit violation,
//! 4 data error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use idaudit::cloud::{split_by_label, LayerStack};
use idaudit::dump::{read_csv, read_dump, read_nrep, write_dump};
use idaudit::estimators::{
    diagnose_support, interior_queries, pointwise_oracle_mean, EstimatorConfig, IdEstimate, SupportDiagnosis,
    SupportVerdict,
};
use idaudit::knn::knn_distances;
use idaudit::lipschitz::{
    audit_monotonicity, build_random_net, pushforward, random_net_spec, AuditConfig, LipschitzNetwork, NetError,
    NetworkSpec, DEFAULT_INNER_FRACTION, DEFAULT_ORACLE_QUERIES, DEFAULT_ORACLE_TOLERANCE,
};
use idaudit::metrics::{csv_header, csv_record, layer_metrics, LayerMetricsConfig};
use idaudit::sweep::{sweep_ambient, sweep_bias, AmbientSweepConfig, BiasSweepConfig, SweepRow};
use idaudit::synth::{ManifoldSpec, SynthError};
use idaudit::{Error, PointCloud};

const EXIT_USAGE: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_DATA: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "idaudit", version, about = "Intrinsic-dimension estimation and layer-wise geometry audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic dataset from a JSON spec and write it as a dump.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the intrinsic dimension of one or all layers.
    Estimate(EstimateArgs),
    /// Estimated vs true dimension on uniform balls.
    SweepBias(SweepBiasArgs),
    /// Fixed true dimension embedded in several ambient dimensions.
    SweepAmbient(SweepAmbientArgs),
    /// Per-layer metric table (CSV) plus the same data as JSON.
    LayerAnalyze(LayerAnalyzeArgs),
    /// Check that layer-wise estimates never increase.
    Audit(AuditArgs),
    /// Push a sampled dataset through a network and dump every layer.
    Push {
        #[command(flatten)]
        source: NetSource,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a random network spec as JSON.
    NetSpec {
        #[arg(long)]
        input_dim: usize,
        #[arg(long, default_value_t = 16)]
        width: usize,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// Only orthogonal (isometric) linear layers.
        #[arg(long)]
        orthogonal: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Dump directory, `.nrep` file or `.csv` file.
    #[arg(long)]
    input: PathBuf,
    /// Estimator, e.g. `twonn`, `twonn:f=0`, `mle:k=20`, `gride:k=2`, `gride-ms`, `oracle:q=50`.
    #[arg(long, default_value = "twonn")]
    method: MethodArg,
    /// Only this layer index (default: every layer).
    #[arg(long)]
    layer: Option<usize>,
    /// Estimate each label class separately.
    #[arg(long)]
    by_label: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepBiasArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,20,50")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "twonn,mle:k=20")]
    methods: Vec<EstimatorConfig>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RotateArg {
    On,
    Off,
    Both,
}

#[derive(Debug, Args)]
struct SweepAmbientArgs {
    #[arg(long, default_value_t = 50)]
    true_dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "64,512,2048")]
    ambient: Vec<usize>,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "twonn,mle:k=20")]
    methods: Vec<EstimatorConfig>,
    #[arg(long, value_enum, default_value = "on")]
    rotate: RotateArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LayerAnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    exclude_last: bool,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    scales: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
    orders: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    discard_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_ORACLE_QUERIES)]
    queries: usize,
    /// Skip column centering before the spectral metrics.
    #[arg(long)]
    no_center: bool,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = false)]
struct NetSource {
    /// Network spec JSON.
    #[arg(long, requires = "ball")]
    net: Option<PathBuf>,
    /// Dataset spec JSON pushed through `--net`.
    #[arg(long, requires = "net")]
    ball: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Dump directory to audit (alternative to `--net` + `--ball`).
    #[arg(long, conflicts_with_all = ["net", "ball"])]
    input: Option<PathBuf>,
    #[command(flatten)]
    source: NetSource,
    #[arg(long, default_value = "twonn")]
    method: EstimatorConfig,
    /// Allowed increase between consecutive layer estimates.
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_ORACLE_TOLERANCE)]
    oracle_tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_ORACLE_QUERIES)]
    queries: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
enum MethodArg {
    Estimator(EstimatorConfig),
    Oracle { method: &'static str, queries: usize, inner_fraction: f64 },
}

impl FromStr for MethodArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let Some(rest) = s.strip_prefix("oracle") else {
            return s.parse().map(Self::Estimator);
        };
        let mut queries = DEFAULT_ORACLE_QUERIES;
        for part in rest.split(':').filter(|p| !p.is_empty()) {
            match part.split_once('=') {
                Some(("q", v)) => queries = v.parse().map_err(|e| format!("bad value for q: {e}"))?,
                _ => return Err(format!("unknown oracle parameter {part:?}")),
            }
        }
        if queries == 0 {
            return Err("oracle needs q >= 1".into());
        }
        Ok(Self::Oracle { method: "oracle", queries, inner_fraction: DEFAULT_INNER_FRACTION })
    }
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Synth(SynthError::InvalidSpec(_)) | Error::Net(NetError::InvalidSpec(_)) => {
                EXIT_USAGE
            }
            Error::Synth(SynthError::AmbientTooSmall { .. } | SynthError::OverlappingComponents { .. }) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self { code, message: e.to_string() }
    }
}

macro_rules! impl_from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}

impl_from_core!(
    idaudit::cloud::CloudError,
    idaudit::dump::DumpError,
    idaudit::knn::KnnError,
    idaudit::estimators::EstimateError,
    SynthError,
    NetError
);

type CliResult<T = ()> = Result<T, Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::data(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::data(e.to_string()))
        }
    }
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::data(e.to_string()))?;
    text.push('\n');
    emit(out, &text)
}

fn csv_text(header: &[String], records: impl IntoIterator<Item = Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Failure::data(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in records {
        w.write_record(&r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::data(e.to_string()))
}

/// Reads a dump directory, a single `.nrep` file or a `.csv` file.
fn load_stack(path: &Path) -> CliResult<LayerStack> {
    if !path.exists() {
        return Err(Failure::data(format!("{}: no such file or directory", path.display())));
    }
    if path.is_dir() {
        return Ok(read_dump(path)?);
    }
    let cloud = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_csv(path)?,
        Some("nrep") => read_nrep(path)?,
        _ => return Err(Failure::usage(format!("{}: expected a dump directory, .nrep or .csv", path.display()))),
    };
    Ok(LayerStack::from_clouds(path.display().to_string(), vec![cloud])?)
}

fn generate(spec: &Path, out: &Path) -> CliResult {
    let spec: ManifoldSpec = read_json(spec)?;
    let cloud = spec.generate()?;
    let model = serde_json::to_value(spec.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let stack = LayerStack::from_clouds(model, vec![cloud])?;
    write_dump(&stack, out)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct EstimateResult {
    layer: usize,
    layer_name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    n_points: usize,
    support: SupportDiagnosis,
    estimate: Option<IdEstimate>,
}

fn estimate_one(cloud: &PointCloud, method: &MethodArg) -> CliResult<(SupportDiagnosis, Option<IdEstimate>)> {
    let k = match method {
        MethodArg::Estimator(m) => m.required_k(),
        MethodArg::Oracle { .. } => 2,
    };
    let table = knn_distances(cloud, k)?;
    let support = diagnose_support(&table);
    if support.verdict == SupportVerdict::FiniteSupportSuspected {
        return Ok((support, None));
    }
    let estimate = match method {
        MethodArg::Estimator(m) => m.estimate(&table, cloud.dim())?,
        MethodArg::Oracle { queries, inner_fraction, .. } => {
            pointwise_oracle_mean(cloud, &interior_queries(cloud, *queries, *inner_fraction))?
        }
    };
    Ok((support, Some(estimate)))
}

fn estimate(args: &EstimateArgs) -> CliResult {
    let stack = load_stack(&args.input)?;
    let indices: Vec<usize> = match args.layer {
        Some(l) if l >= stack.len() => {
            return Err(Failure::usage(format!("layer {l} out of range (stack has {})", stack.len())))
        }
        Some(l) => vec![l],
        None => (0..stack.len()).collect(),
    };
    let mut results = Vec::new();
    for i in indices {
        let layer = &stack.layers()[i];
        let parts = if args.by_label {
            split_by_label(&layer.cloud)?.into_iter().map(|(l, c)| (Some(l), c)).collect()
        } else {
            vec![(None, layer.cloud.clone())]
        };
        for (label, cloud) in parts {
            let (support, estimate) = estimate_one(&cloud, &args.method)?;
            results.push(EstimateResult {
                layer: i,
                layer_name: layer.name.clone(),
                label,
                n_points: cloud.n_points(),
                support,
                estimate,
            });
        }
    }
    let report = json!({
        "config": {
            "input": args.input,
            "method": args.method,
            "method_text": method_text(&args.method),
            "layer": args.layer,
            "by_label": args.by_label,
        },
        "results": results,
    });
    emit_json(args.out.as_deref(), &report)
}

fn method_text(m: &MethodArg) -> String {
    match m {
        MethodArg::Estimator(e) => e.to_string(),
        MethodArg::Oracle { queries, .. } => format!("oracle:q={queries}"),
    }
}

fn sweep_csv(rows: &[SweepRow], ambient: bool) -> CliResult<String> {
    let header: Vec<String> = if ambient {
        ["ambient_dim", "method", "rotate", "mean", "ci_low", "ci_high"].map(String::from).to_vec()
    } else {
        ["true_dim", "method", "mean", "ci_low", "ci_high"].map(String::from).to_vec()
    };
    csv_text(
        &header,
        rows.iter().map(|r| {
            let mut rec = if ambient {
                vec![r.ambient_dim.to_string(), r.method.clone(), r.rotate.to_string()]
            } else {
                vec![r.true_dim.to_string(), r.method.clone()]
            };
            rec.extend([r.mean, r.ci_low, r.ci_high].map(|v| v.to_string()));
            rec
        }),
    )
}

fn sweep_bias_cmd(a: &SweepBiasArgs) -> CliResult {
    let config = BiasSweepConfig { dims: a.dims.clone(), n: a.n, reps: a.reps, methods: a.methods.clone(), seed: a.seed };
    let rows = sweep_bias(&config)?;
    emit(a.out.as_deref(), &sweep_csv(&rows, false)?)
}

fn sweep_ambient_cmd(a: &SweepAmbientArgs) -> CliResult {
    let rotate = match a.rotate {
        RotateArg::On => vec![true],
        RotateArg::Off => vec![false],
        RotateArg::Both => vec![false, true],
    };
    let config = AmbientSweepConfig {
        true_dim: a.true_dim,
        ambient: a.ambient.clone(),
        n: a.n,
        reps: a.reps,
        methods: a.methods.clone(),
        rotate,
        seed: a.seed,
    };
    let rows = sweep_ambient(&config)?;
    emit(a.out.as_deref(), &sweep_csv(&rows, true)?)
}

fn layer_analyze(a: &LayerAnalyzeArgs) -> CliResult {
    let stack = load_stack(&a.input)?;
    let config = LayerMetricsConfig {
        gride_scales: a.scales.clone(),
        nn_orders: a.orders.clone(),
        twonn_discard: a.discard_fraction,
        center_entropy: !a.no_center,
        exclude_last: a.exclude_last,
        oracle_queries: a.queries,
        ..LayerMetricsConfig::default()
    };
    if config.gride_scales.contains(&0) || config.nn_orders.contains(&0) || config.oracle_queries == 0 {
        return Err(Failure::usage("scales, orders and queries must be positive"));
    }
    let rows = layer_metrics(&stack, &config)?;
    let csv = csv_text(&csv_header(&config), rows.iter().map(csv_record))?;
    emit(a.out_csv.as_deref(), &csv)?;
    if let Some(path) = &a.out_json {
        let report = json!({ "config": config, "input": a.input, "model": stack.model(), "layers": rows });
        emit_json(Some(path), &report)?;
    }
    Ok(())
}

fn net_stack(source: &NetSource) -> CliResult<Option<(LipschitzNetwork, LayerStack)>> {
    let (Some(net), Some(ball)) = (&source.net, &source.ball) else {
        return Ok(None);
    };
    let spec: NetworkSpec = read_json(net)?;
    let data: ManifoldSpec = read_json(ball)?;
    let net = build_random_net(&spec)?;
    let cloud = data.generate()?;
    let stack = pushforward(&net, &cloud)?;
    Ok(Some((net, stack)))
}

fn audit(a: &AuditArgs) -> CliResult<u8> {
    let (stack, bound) = match (&a.input, net_stack(&a.source)?) {
        (Some(path), None) => (load_stack(path)?, None),
        (None, Some((net, stack))) => (stack, Some(net.lipschitz_bound())),
        _ => return Err(Failure::usage("audit needs --input, or --net together with --ball")),
    };
    let config = AuditConfig {
        estimator: a.method.clone(),
        tolerance: a.tolerance,
        oracle_tolerance: a.oracle_tolerance,
        oracle_queries: a.queries,
        ..AuditConfig::default()
    };
    let report = audit_monotonicity(&stack, &config, bound)?;
    let passed = report.passed();
    let output = json!({
        "config": { "input": a.input, "net": a.source.net, "ball": a.source.ball, "audit": config },
        "report": report,
        "passed": passed,
    });
    emit_json(a.out.as_deref(), &output)?;
    Ok(if passed { 0 } else { EXIT_VIOLATION })
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Generate { spec, out } => generate(&spec, &out)?,
        Command::Estimate(a) => estimate(&a)?,
        Command::SweepBias(a) => sweep_bias_cmd(&a)?,
        Command::SweepAmbient(a) => sweep_ambient_cmd(&a)?,
        Command::LayerAnalyze(a) => layer_analyze(&a)?,
        Command::Audit(a) => return audit(&a),
        Command::Push { source, out } => {
            let (_, stack) = net_stack(&source)?.ok_or_else(|| Failure::usage("push needs --net and --ball"))?;
            write_dump(&stack, &out)?;
        }
        Command::NetSpec { input_dim, width, depth, orthogonal, seed } => {
            if input_dim == 0 || width == 0 {
                return Err(Failure::usage("input-dim and width must be positive"));
            }
            emit_json(None, &random_net_spec(input_dim, width, depth, orthogonal, seed))?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
