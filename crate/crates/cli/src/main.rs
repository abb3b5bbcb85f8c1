use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cpse_core::archgraph::linearize_topological;
use cpse_core::container::read_manifest;
use cpse_core::report::{emit, omega_tsv, Format, Mode, ReportDocument, TOOL_NAME, TOOL_VERSION};
use cpse_core::stats::{read_records, table1};
use cpse_core::surrogate::SizeList;
use cpse_core::{
    analyze_ensemble, branched_cpse, build_ensemble, correlate, ergodicity_trend, generate_stack, parse_graph,
    Container, DivergenceError, EligibilityPolicy, Error, GraphDocument, Grouping, RunConfig, SurrogateSpec,
    TrendReport,
};

#[derive(Parser)]
#[command(
    name = "cpse",
    version,
    about = "Cascading periodic spectral ergodicity of network weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute cPSE for the weights in an LMEC container.
    Analyze(AnalyzeArgs),
    /// Generate a Gaussian layer stack and report how D_pse evolves with depth.
    Surrogate(SurrogateArgs),
    /// Correlate cPSE with classification error per architecture family.
    Correlate(CorrelateArgs),
    /// Print the manifest of an LMEC container.
    Inspect { container: PathBuf },
}

#[derive(Args)]
struct ConfigArgs {
    /// Number of histogram bins B.
    #[arg(long, default_value_t = cpse_core::config::DEFAULT_BINS)]
    bins: usize,
    /// Smoothing added to every bin before normalization.
    #[arg(long, default_value_t = cpse_core::divergence::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Lower clamp applied to D_pse before taking log10.
    #[arg(long, default_value_t = cpse_core::divergence::DEFAULT_LOG_FLOOR)]
    log_floor: f64,
    /// Histogram log10(eigenvalue) instead of the eigenvalue.
    #[arg(long)]
    log_eigs: bool,
    /// Leave the l = 1 term out of the cPSE sum.
    #[arg(long)]
    skip_first: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    container: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the D_pse series as CSV.
    #[arg(long)]
    series: Option<PathBuf>,
    /// Write the series as `layer<TAB>log10_D_pse` for plotting.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Write every Ω^L as `layer<TAB>bin_centre<TAB>value`.
    #[arg(long)]
    dump_omega: Option<PathBuf>,
    /// Architecture graph (JSON); overrides a graph embedded in the container.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Flatten the graph to a single sequence instead of composing branches.
    #[arg(long, value_enum)]
    linearize: Option<Linearize>,
    /// Use square 2-D weights directly instead of their Gram matrix (experimental).
    #[arg(long)]
    no_gram_2d: bool,
    /// Exclude tensors with more than two dimensions.
    #[arg(long)]
    no_conv: bool,
    /// Exclude 2-D tensors.
    #[arg(long)]
    no_linear: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Linearize {
    Topological,
}

#[derive(Args)]
struct SurrogateArgs {
    /// Layer shapes, e.g. `16x16,32x32,64x64`.
    #[arg(long)]
    sizes: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArgs,
    /// Also write the generated weights as an LMEC container.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the JSON trend report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    /// CSV with columns `architecture,top1,top5,cpse`; the bundled table when omitted.
    records: Option<PathBuf>,
    /// `prefix` groups by architecture family, `all` pools every record.
    #[arg(long, default_value = "prefix")]
    group: Grouping,
    #[arg(long, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with its exit code: 1 for bad input, 2 when the computation fails.
enum Failure {
    Input(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Spectral(_) | Error::Divergence(_) if !too_few_layers(&e) => Failure::Compute(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn too_few_layers(e: &Error) -> bool {
    matches!(e, Error::Divergence(DivergenceError::TooFewLayers(_)))
}

fn input(e: impl ToString) -> Failure {
    Failure::Input(e.to_string())
}

impl ConfigArgs {
    fn run_config(&self, eligibility: EligibilityPolicy) -> Result<RunConfig, Failure> {
        let cfg = RunConfig {
            bins: self.bins,
            epsilon: self.epsilon,
            log_floor: self.log_floor,
            eligibility,
            log_eigs: self.log_eigs,
            skip_first: self.skip_first,
        };
        cfg.validate().map_err(input)?;
        Ok(cfg)
    }
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::Input(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(input),
    }
}

fn read_graph(path: &Path) -> Result<GraphDocument, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("graph {}: {e}", path.display())))
}

fn analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let eligibility = EligibilityPolicy {
        include_conv: !args.no_conv,
        include_linear: !args.no_linear,
        gram_2d: !args.no_gram_2d,
    };
    let cfg = args.config.run_config(eligibility)?;
    let container = Container::read_file(&args.container).map_err(input)?;
    let graph = match &args.graph {
        Some(p) => Some(read_graph(p)?),
        None => container.graph.clone(),
    };
    let all = build_ensemble(&container, &cfg.eligibility).map_err(Error::from)?;
    for s in all.skipped() {
        eprintln!("{s}");
    }
    let skipped: Vec<String> = all.skipped().iter().map(ToString::to_string).collect();

    // a graph either reorders the layers into one sequence or is composed branch by branch
    let (sequence, mode) = match (&graph, args.linearize) {
        (None, _) => (None, Mode::Feedforward),
        (Some(doc), Some(Linearize::Topological)) => {
            (Some(linearize_topological(doc).map_err(Error::from)?), Mode::Linearized)
        }
        (Some(doc), None) => {
            let g = parse_graph(doc).map_err(Error::from)?;
            let dec = g.decompose();
            if dec.paths.len() == 1 {
                (dec.paths.into_iter().next(), Mode::Feedforward)
            } else {
                if args.series.is_some() || args.plot.is_some() || args.dump_omega.is_some() {
                    return Err(Failure::Input(
                        "--series, --plot and --dump-omega need a single layer sequence; use --linearize".into(),
                    ));
                }
                let report = branched_cpse(&g, &all, &cfg)?;
                let layers = g.names().to_vec();
                let doc = ReportDocument::branched(&report, layers, &cfg, skipped);
                return write_out(args.out.as_deref(), &emit(&doc, Format::Json).map_err(input)?);
            }
        }
    };
    let ensemble = match &sequence {
        Some(names) => all.select(names).map_err(Error::from)?,
        None => all,
    };
    let analysis = analyze_ensemble(&ensemble, &cfg)?;
    let doc = ReportDocument::feedforward(&analysis, &cfg, mode, skipped);
    if let Some(p) = &args.series {
        write_out(Some(p), &emit(&doc, Format::Csv).map_err(input)?)?;
    }
    if let Some(p) = &args.plot {
        write_out(Some(p), &emit(&doc, Format::TsvPlot).map_err(input)?)?;
    }
    if let Some(p) = &args.dump_omega {
        write_out(Some(p), omega_tsv(&analysis.omegas).as_bytes())?;
    }
    write_out(args.out.as_deref(), &emit(&doc, Format::Json).map_err(input)?)
}

#[derive(Serialize)]
struct SurrogateDocument<'a> {
    tool: &'static str,
    version: &'static str,
    spec: &'a SurrogateSpec,
    config: &'a RunConfig,
    #[serde(flatten)]
    trend: &'a TrendReport,
}

fn surrogate(args: SurrogateArgs) -> Result<(), Failure> {
    let sizes: SizeList = args.sizes.parse().map_err(input)?;
    let spec = SurrogateSpec::gaussian(sizes.0, args.seed);
    let cfg = args.config.run_config(EligibilityPolicy::default())?;
    let container = generate_stack(&spec).map_err(input)?;
    if let Some(p) = &args.out {
        container.write_file(p).map_err(input)?;
    }
    let trend = ergodicity_trend(&container, &cfg)?;
    let doc = SurrogateDocument {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        spec: &spec,
        config: &cfg,
        trend: &trend,
    };
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(input)?;
    bytes.push(b'\n');
    write_out(args.report.as_deref(), &bytes)
}

fn correlate_cmd(args: CorrelateArgs) -> Result<(), Failure> {
    let records = match &args.records {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| Failure::Input(format!("cannot open {}: {e}", p.display())))?;
            read_records(file).map_err(input)?
        }
        None => table1(),
    };
    let reports = correlate(&records, args.group).map_err(input)?;
    write_out(
        args.out.as_deref(),
        &emit(reports.as_slice(), args.format).map_err(input)?,
    )
}

fn inspect(path: &Path) -> Result<(), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Input(format!("cannot open {}: {e}", path.display())))?;
    let (manifest, _) = read_manifest(&bytes).map_err(input)?;
    let mut out = serde_json::to_vec_pretty(&manifest).map_err(input)?;
    out.push(b'\n');
    write_out(None, &out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Surrogate(a) => surrogate(a),
        Command::Correlate(a) => correlate_cmd(a),
        Command::Inspect { container } => inspect(&container),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
