use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rdslab::estimators::{self, Estimator, VarianceEstimate, DEFAULT_BOOTSTRAP};
use rdslab::fomtest::{self, FomLevel};
use rdslab::graph::{self, DyadSampling, EdgeListOptions, Graph};
use rdslab::harness::{self, ExperimentConfig};
use rdslab::sampler::{self, QueueDiscipline, RdsConfig, RecruitmentForest, Replacement, SeedMode};
use rdslab::spectral::{self, ProjectionCoefficients, VarianceMethod};
use rdslab::synth::{self, BlockModelSpec, ContrastParams};
use rdslab::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Cell size is irrelevant to the chains; any valid value will do.
const CHAIN_CELL_SIZE: usize = 50;

/// Respondent-driven sampling laboratory.
#[derive(Debug, Parser)]
#[command(name = "rdslab", version)]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic networks or category chains.
    Synth {
        #[command(subcommand)]
        what: SynthCommand,
    },
    /// Draw an RDS or random-walk sample and write its recruitment forest.
    Sample(SampleArgs),
    /// Point estimate and variance estimates from a recruitment forest.
    Estimate(EstimateArgs),
    /// First-order Markov regression test on a network or a sample.
    Fomtest(FomArgs),
    /// Exact random-walk sampling variance of a graph or a chain.
    Exact(ExactArgs),
    /// Node-independent path counts between node pairs.
    Cohesion(CohesionArgs),
    /// Run a replication experiment described by a TOML file.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Four-cell block network with exact edge counts.
    Block {
        #[command(flatten)]
        counts: BlockCounts,
        /// Nodes per cell.
        #[arg(long, default_value_t = 50)]
        cell_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Edge list output (stdout when omitted).
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Attribute CSV output (columns Y and Z).
        #[arg(long)]
        attributes: Option<PathBuf>,
    },
    /// The 4-state cell chain and 2-state category chain of a block model.
    Chain {
        #[command(flatten)]
        counts: BlockCounts,
        /// Also report exact variances at this sample size.
        #[arg(long)]
        size: Option<usize>,
    },
    /// A FOM / non-FOM graph pair sharing degrees and category transitions.
    Contrast {
        #[arg(long, default_value_t = 200)]
        group_size: usize,
        #[arg(long, default_value_t = 12)]
        degree: usize,
        #[arg(long, default_value_t = 1)]
        bridge: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for fom.edges, fom.csv, nonfom.edges, nonfom.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct BlockCounts {
    #[arg(long)]
    e: usize,
    #[arg(long)]
    f: usize,
    #[arg(long)]
    h: usize,
    /// Defaults to F + H.
    #[arg(long)]
    d: Option<usize>,
}

impl BlockCounts {
    fn spec(&self, cell_size: usize) -> BlockModelSpec {
        let mut spec = BlockModelSpec::new(self.e, self.f, self.h, cell_size);
        if let Some(d) = self.d {
            spec.d = d;
        }
        spec
    }
}

#[derive(Debug, Args)]
struct GraphInput {
    /// Edge list: two node ids per line, whitespace or comma separated.
    #[arg(long)]
    edges: PathBuf,
    /// Attribute CSV with header `node,attr1,...`.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Treat input lines as directed arcs (reciprocated pairs are merged).
    #[arg(long)]
    directed: bool,
}

impl GraphInput {
    fn load(&self) -> rdslab::Result<Graph> {
        let opts = EdgeListOptions {
            directed_input: self.directed,
            ..Default::default()
        };
        let (mut g, report) = graph::load_edge_list(&self.edges, opts)?;
        log::info!("loaded {}: {report:?}", self.edges.display());
        if let Some(a) = &self.attributes {
            graph::load_attributes(&mut g, a)?;
        }
        Ok(g)
    }

    /// The largest connected component of the input.
    fn load_connected(&self) -> rdslab::Result<Graph> {
        let g = self.load()?;
        let lcc = g.largest_connected_component();
        if lcc.node_count() < g.node_count() {
            log::warn!(
                "using the largest connected component: {} of {} nodes",
                lcc.node_count(),
                g.node_count()
            );
        }
        Ok(lcc)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SeedModeArg {
    Equilibrium,
    Uniform,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QueueArg {
    Fifo,
    Lifo,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    graph: GraphInput,
    #[arg(long, default_value_t = 200)]
    size: usize,
    /// Probabilities of 0, 1, 2, ... recruits, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0])]
    branching: Vec<f64>,
    /// Simple random walk (exactly one recruit each).
    #[arg(long, conflicts_with = "branching")]
    walk: bool,
    #[arg(long)]
    without_replacement: bool,
    #[arg(long, value_enum, default_value = "equilibrium")]
    seed_mode: SeedModeArg,
    #[arg(long, default_value_t = 1)]
    initial_seeds: usize,
    #[arg(long, value_enum, default_value = "fifo")]
    queue: QueueArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Forest CSV output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Vhe,
    Vhewbc,
    Vhehom2,
    Vhehom3,
    Sbe,
    All,
}

impl EstimatorArg {
    fn expand(self) -> Vec<Estimator> {
        match self {
            EstimatorArg::Vhe => vec![Estimator::Vhe],
            EstimatorArg::Vhewbc => vec![Estimator::VheWbc],
            EstimatorArg::Vhehom2 => vec![Estimator::VheHom2],
            EstimatorArg::Vhehom3 => vec![Estimator::VheHom3],
            EstimatorArg::Sbe => vec![Estimator::Sbe],
            EstimatorArg::All => Estimator::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Recruitment forest CSV.
    #[arg(long)]
    forest: PathBuf,
    #[arg(long)]
    attribute: String,
    #[arg(long, value_enum, default_value = "all")]
    estimator: EstimatorArg,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LevelArg {
    Network,
    Sample,
}

#[derive(Debug, Args)]
struct FomArgs {
    #[arg(long, value_enum)]
    level: LevelArg,
    #[arg(long)]
    attribute: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Network level: edge list.
    #[arg(long, required_if_eq("level", "network"))]
    edges: Option<PathBuf>,
    /// Network level: attribute CSV.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Sample level: recruitment forest CSV.
    #[arg(long, required_if_eq("level", "sample"))]
    forest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExactArgs {
    /// Graph edge list (with --attributes and --attribute).
    #[arg(long, conflicts_with_all = ["chain", "block"])]
    edges: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    attributes: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    attribute: Option<String>,
    /// JSON chain: {"matrix": [[...]], "values": [...], "stationary": [...]?}.
    #[arg(long, conflicts_with = "block")]
    chain: Option<PathBuf>,
    /// Block model counts E,F,H (D = F + H); reports both chains.
    #[arg(long, value_delimiter = ',')]
    block: Option<Vec<usize>>,
    /// Sample size S.
    #[arg(long, default_value_t = 100)]
    size: usize,
}

#[derive(Debug, Args)]
struct CohesionArgs {
    #[command(flatten)]
    graph: GraphInput,
    /// Dyads to evaluate; all dyads when the graph has no more than this.
    #[arg(long, default_value_t = 1000)]
    dyads: usize,
    #[arg(long)]
    with_replacement: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the CSV reports and manifest.
    #[arg(long, default_value = "rdslab-report")]
    out: PathBuf,
}

/// Command failure with its exit status.
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Synth { what } => synth_cmd(what),
        Command::Sample(a) => sample_cmd(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Fomtest(a) => fom_cmd(a),
        Command::Exact(a) => exact_cmd(a),
        Command::Cohesion(a) => cohesion_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_DATA })
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Lib(Error::Io {
            path: path.to_path_buf(),
            source: e,
        }))
}

fn write_json<T: Serialize>(value: &T) -> CmdResult {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
    writeln!(out).map_err(|e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    })?;
    Ok(())
}

fn synth_cmd(what: SynthCommand) -> CmdResult {
    match what {
        SynthCommand::Block {
            counts,
            cell_size,
            seed,
            edges,
            attributes,
        } => {
            let spec = counts.spec(cell_size);
            let g = synth::generate_block_network(&spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
            match edges {
                Some(p) => graph::write_edge_list(&g, create(&p)?)?,
                None => graph::write_edge_list(&g, io::stdout().lock())?,
            }
            if let Some(p) = attributes {
                graph::write_attributes(&g, create(&p)?)?;
            }
            Ok(())
        }
        SynthCommand::Chain { counts, size } => {
            #[derive(Serialize)]
            struct ChainReport {
                spec: BlockModelSpec,
                a: f64,
                b: f64,
                cell_chain: Vec<Vec<f64>>,
                category_chain: Vec<Vec<f64>>,
                cell_eigenvalues: Vec<f64>,
                category_eigenvalues: Vec<f64>,
                closed_form: synth::ClosedFormEigenvalues<f64>,
                exact: Option<[spectral::RwsVariance<f64>; 2]>,
            }
            let spec = counts.spec(CHAIN_CELL_SIZE);
            let (m, c) = synth::build_category_chain::<f64>(&spec)?;
            let (a, b) = spec.parameters::<f64>();
            let rows = |x: &nalgebra::DMatrix<f64>| {
                (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
            };
            let exact = match size {
                Some(s) => Some([m.exact_variance(s)?, c.exact_variance(s)?]),
                None => None,
            };
            write_json(&ChainReport {
                spec,
                a,
                b,
                cell_chain: rows(m.matrix()),
                category_chain: rows(c.matrix()),
                cell_eigenvalues: m.decompose()?.eigenvalues().iter().copied().collect(),
                category_eigenvalues: c.decompose()?.eigenvalues().iter().copied().collect(),
                closed_form: synth::closed_form_eigenvalues(a, b),
                exact,
            })
        }
        SynthCommand::Contrast {
            group_size,
            degree,
            bridge,
            seed,
            out_dir,
        } => {
            let params = ContrastParams {
                group_size,
                degree,
                bridge,
            };
            let (fom, nonfom) = synth::make_contrast_pair(&params, &mut ChaCha8Rng::seed_from_u64(seed))?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            for (name, g) in [("fom", &fom), ("nonfom", &nonfom)] {
                graph::write_edge_list(g, create(&out_dir.join(format!("{name}.edges")))?)?;
                graph::write_attributes(g, create(&out_dir.join(format!("{name}.csv")))?)?;
            }
            Ok(())
        }
    }
}

fn sample_cmd(a: SampleArgs) -> CmdResult {
    let g = a.graph.load_connected()?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let cfg = RdsConfig {
        sample_size: a.size,
        branching: if a.walk { vec![0.0, 1.0] } else { a.branching },
        replacement: if a.without_replacement {
            Replacement::Without
        } else {
            Replacement::With
        },
        seed_mode: match a.seed_mode {
            SeedModeArg::Equilibrium => SeedMode::Equilibrium,
            SeedModeArg::Uniform => SeedMode::Uniform,
        },
        initial_seeds: a.initial_seeds,
        queue: match a.queue {
            QueueArg::Fifo => QueueDiscipline::Fifo,
            QueueArg::Lifo => QueueDiscipline::Lifo,
        },
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let forest = sampler::rds_sample(&g, &cfg, &mut rng)?;
    match a.out {
        Some(p) => forest.write_csv(create(&p)?)?,
        None => forest.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn read_forest(path: &Path) -> Result<RecruitmentForest, Failure> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(RecruitmentForest::read_csv(io::BufReader::new(file))?)
}

fn estimate_cmd(a: EstimateArgs) -> CmdResult {
    #[derive(Serialize)]
    struct EstimateReport {
        attribute: String,
        records: usize,
        mean: f64,
        estimates: Vec<VarianceEstimate<f64>>,
        /// 95% interval per estimator: `mean -/+ half_width`.
        intervals: Vec<(Estimator, [f64; 2])>,
    }
    let forest = read_forest(&a.forest)?;
    let mean = estimators::vh_mean::<f64>(&forest, &a.attribute)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut estimates = Vec::new();
    for e in a.estimator.expand() {
        estimates.push(estimators::estimate::<f64, _>(&forest, &a.attribute, e, a.bootstrap, &mut rng)?);
    }
    let intervals = estimates
        .iter()
        .map(|v| (v.estimator, [mean - v.half_width, mean + v.half_width]))
        .collect();
    write_json(&EstimateReport {
        attribute: a.attribute,
        records: forest.len(),
        mean,
        estimates,
        intervals,
    })
}

fn fom_cmd(a: FomArgs) -> CmdResult {
    let level = match a.level {
        LevelArg::Network => FomLevel::Network,
        LevelArg::Sample => FomLevel::Sample,
    };
    let result = match level {
        FomLevel::Network => {
            let input = GraphInput {
                edges: a.edges.expect("required by clap"),
                attributes: a.attributes,
                directed: false,
            };
            fomtest::network_fom_test(&input.load_connected()?, &a.attribute, a.alpha)?
        }
        FomLevel::Sample => {
            let forest = read_forest(&a.forest.expect("required by clap"))?;
            fomtest::sample_fom_test(&forest, &a.attribute, a.alpha)?
        }
    };
    write_json(&result)
}

#[derive(Debug, Deserialize)]
struct ChainFile {
    matrix: Vec<Vec<f64>>,
    values: Vec<f64>,
    #[serde(default)]
    stationary: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct ExactReport {
    label: String,
    states: usize,
    sample_size: usize,
    /// Descending; absent when the chain is not reversible.
    eigenvalues: Option<Vec<f64>>,
    second_largest: Option<f64>,
    mean: f64,
    gamma0: f64,
    variance: f64,
    sd: f64,
    design_effect: Option<f64>,
}

fn exact_report(
    label: &str,
    matrix: nalgebra::DMatrix<f64>,
    stationary: nalgebra::DVector<f64>,
    values: &[f64],
    s: usize,
) -> Result<ExactReport, Failure> {
    let mean = stationary.iter().zip(values).map(|(p, y)| p * y).sum();
    match spectral::decompose(&matrix, &stationary) {
        Ok(d) => {
            let proj = ProjectionCoefficients::new(&d, values)?;
            let v = spectral::exact_rws_variance(&proj, &d, s, VarianceMethod::Auto)?;
            Ok(ExactReport {
                label: label.into(),
                states: d.dim(),
                sample_size: s,
                eigenvalues: Some(d.eigenvalues().iter().copied().collect()),
                second_largest: d.second_largest(),
                mean,
                gamma0: proj.gamma0,
                variance: v.variance,
                sd: v.sd,
                design_effect: v.design_effect,
            })
        }
        Err(Error::NonReversible { violation }) => {
            log::info!("{label}: not reversible (violation {violation:e}); using direct lag sums");
            let v = spectral::exact_chain_variance(&matrix, &stationary, values, s)?;
            let gamma0 = spectral::chain_autocovariances(&matrix, &stationary, values, 0)?[0];
            Ok(ExactReport {
                label: label.into(),
                states: matrix.nrows(),
                sample_size: s,
                eigenvalues: None,
                second_largest: None,
                mean,
                gamma0,
                variance: v.variance,
                sd: v.sd,
                design_effect: v.design_effect,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn exact_cmd(a: ExactArgs) -> CmdResult {
    let s = a.size;
    if let Some(edges) = a.edges {
        let attribute = a
            .attribute
            .ok_or_else(|| Failure::Usage("--attribute is required with --edges".into()))?;
        let g = GraphInput {
            edges,
            attributes: a.attributes,
            directed: false,
        }
        .load_connected()?;
        let col = g.require_attribute(&attribute)?;
        if col.iter().any(Option::is_none) {
            return Err(Error::InvalidInput(format!("`{attribute}` is missing on some nodes")).into());
        }
        let values: Vec<f64> = col.iter().map(|v| v.unwrap_or(0) as f64).collect();
        let m = g.transition_matrix::<f64>()?.into_inner();
        let pi = g.stationary_distribution::<f64>()?;
        return write_json(&exact_report("graph", m, pi, &values, s)?);
    }
    if let Some(path) = a.chain {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let cf: ChainFile = serde_json::from_str(&text).map_err(Error::from)?;
        let k = cf.matrix.len();
        if cf.matrix.iter().any(|r| r.len() != k) || cf.values.len() != k {
            return Err(Error::InvalidInput("chain matrix must be square and match values".into()).into());
        }
        let m = nalgebra::DMatrix::from_fn(k, k, |i, j| cf.matrix[i][j]);
        let pi = match cf.stationary {
            Some(p) => nalgebra::DVector::from_vec(p),
            None => spectral::stationary_of(&m)?,
        };
        return write_json(&exact_report("chain", m, pi, &cf.values, s)?);
    }
    if let Some(b) = a.block {
        if b.len() != 3 {
            return Err(Failure::Usage("--block takes exactly three counts: E,F,H".into()));
        }
        let spec = BlockModelSpec::new(b[0], b[1], b[2], CHAIN_CELL_SIZE);
        let (m, c) = synth::build_category_chain::<f64>(&spec)?;
        let reports = [
            exact_report("cell-chain", m.matrix().clone(), m.stationary().clone(), m.values(), s)?,
            exact_report("category-chain", c.matrix().clone(), c.stationary().clone(), c.values(), s)?,
        ];
        return write_json(&reports);
    }
    Err(Failure::Usage("one of --edges, --chain or --block is required".into()))
}

fn cohesion_cmd(a: CohesionArgs) -> CmdResult {
    let g = a.graph.load()?;
    let sampling = if a.with_replacement {
        DyadSampling::WithReplacement
    } else {
        DyadSampling::WithoutReplacement
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let est = graph::estimate_node_independent_paths(&g, a.dyads, sampling, &mut rng)?;
    write_json(&est)
}

fn experiment_cmd(a: ExperimentArgs) -> CmdResult {
    let cfg = ExperimentConfig::load(&a.config)?;
    let report = harness::run_experiment(&cfg)?;
    harness::write_reports(&report, &cfg, &a.out)?;
    for f in &report.failures {
        eprintln!(
            "warning: {}{}: {}",
            f.network,
            f.attribute.as_deref().map(|x| format!("/{x}")).unwrap_or_default(),
            f.error
        );
    }
    println!(
        "{} cells, {} failures; reports in {}",
        report.cells.len(),
        report.failures.len(),
        a.out.display()
    );
    if report.cells.is_empty() {
        return Err(Error::InvalidInput("every network failed".into()).into());
    }
    Ok(())
}
