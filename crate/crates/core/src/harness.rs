//! Replication driver: repeated RDS samples per network and attribute,
//! scored against the population truth.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimators::{self, Estimator, DEFAULT_BOOTSTRAP};
use crate::fomtest::{self, Verdict};
use crate::graph::{self, EdgeListOptions, Graph};
use crate::sampler::{self, RdsConfig};
use crate::synth::{self, BlockModelSpec, ContrastParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContrastVariant {
    Fom,
    NonFom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetworkSource {
    /// Edge list plus optional attribute CSV; reduced to its largest
    /// connected component.
    File {
        edges: PathBuf,
        #[serde(default)]
        attributes: Option<PathBuf>,
    },
    Block {
        #[serde(flatten)]
        spec: BlockModelSpec,
    },
    Contrast {
        #[serde(flatten)]
        params: ContrastParams,
        variant: ContrastVariant,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: NetworkSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub networks: Vec<NetworkConfig>,
    pub attributes: Vec<String>,
    pub replications: usize,
    pub rds: RdsConfig,
    pub estimators: Vec<Estimator>,
    pub bootstrap: usize,
    /// Interval multiplier for coverage.
    pub z: f64,
    pub alphas: Vec<f64>,
    pub master_seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            networks: Vec::new(),
            attributes: vec!["Y".into()],
            replications: 500,
            rds: RdsConfig::default(),
            estimators: Estimator::ALL.to_vec(),
            bootstrap: DEFAULT_BOOTSTRAP,
            z: 1.96,
            alphas: vec![0.05, 0.01, 0.001],
            master_seed: 0,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML document; relative file paths are resolved against `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base {
            for n in &mut cfg.networks {
                if let NetworkSource::File { edges, attributes } = &mut n.source {
                    if edges.is_relative() {
                        *edges = base.join(&*edges);
                    }
                    if let Some(a) = attributes.as_mut().filter(|a| a.is_relative()) {
                        *a = base.join(&*a);
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replications < 2 {
            return bad(format!("replications must be at least 2, got {}", self.replications));
        }
        if self.networks.is_empty() {
            return bad("no networks configured".into());
        }
        if self.attributes.is_empty() {
            return bad("no attributes configured".into());
        }
        let mut names: Vec<&str> = self.networks.iter().map(|n| n.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("network names must be unique".into());
        }
        if self.estimators.contains(&Estimator::Sbe) && self.bootstrap < 2 {
            return bad("bootstrap must be at least 2".into());
        }
        if !(self.z > 0.0) {
            return bad("z must be positive".into());
        }
        if self.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return bad("every alpha must lie in (0, 1)".into());
        }
        self.rds.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// Mean squared deviation of the replicate means about the true mean.
pub fn population_sampling_variance(estimates: &[f64], mu: f64) -> Result<f64> {
    if estimates.len() < 2 {
        return Err(Error::Precondition("at least two replications are required".into()));
    }
    Ok(estimates.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / estimates.len() as f64)
}

/// Variance of the replicate means about their own average (divisor R).
pub fn replicate_variance(estimates: &[f64]) -> f64 {
    let n = estimates.len() as f64;
    let avg = estimates.iter().sum::<f64>() / n;
    estimates.iter().map(|m| (m - avg) * (m - avg)).sum::<f64>() / n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasRatio {
    pub mean_estimate: f64,
    pub bias: f64,
    /// Undefined when the population variance is 0.
    pub ratio: Option<f64>,
}

pub fn bias_ratio(variance_estimates: &[f64], population_variance: f64) -> Result<BiasRatio> {
    if variance_estimates.is_empty() {
        return Err(Error::Precondition("no variance estimates".into()));
    }
    let mean_estimate = variance_estimates.iter().sum::<f64>() / variance_estimates.len() as f64;
    Ok(BiasRatio {
        mean_estimate,
        bias: mean_estimate - population_variance,
        ratio: (population_variance > 0.0).then(|| mean_estimate / population_variance),
    })
}

/// Pearson correlation; `None` below three pairs or with a constant side.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Fraction of `(mean, variance)` replicates with `|mean - mu| <= z sqrt(variance)`.
pub fn coverage_rate(replicates: &[(f64, f64)], mu: f64, z: f64) -> Result<f64> {
    if replicates.is_empty() {
        return Err(Error::Precondition("no replications to score".into()));
    }
    let hit = replicates
        .iter()
        .filter(|(m, v)| (m - mu).abs() <= z * v.max(0.0).sqrt())
        .count();
    Ok(hit as f64 / replicates.len() as f64)
}

/// Sampling variance relative to the with-replacement SRS variance `mu(1-mu)/S`.
pub fn design_effect(variance: f64, mu: f64, s: usize) -> Option<f64> {
    let srs = mu * (1.0 - mu) / s as f64;
    (srs > 0.0).then(|| variance / srs)
}

/// Stable per-replication seed from the run coordinates.
pub fn replication_seed(master: u64, network: &str, attribute: &str, replication: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(network.as_bytes());
    h.update([0]);
    h.update(attribute.as_bytes());
    h.update([0]);
    h.update((replication as u64).to_le_bytes());
    h.finalize().into()
}

fn generation_seed(master: u64, tag: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(b"generate\0");
    h.update(tag.as_bytes());
    h.finalize().into()
}

/// Materializes a configured network.
pub fn build_network(cfg: &NetworkConfig, master_seed: u64) -> Result<Graph> {
    match &cfg.source {
        NetworkSource::File { edges, attributes } => {
            let (mut g, report) = graph::load_edge_list(edges, EdgeListOptions::default())?;
            log::info!("{}: {report:?}", cfg.name);
            if let Some(a) = attributes {
                graph::load_attributes(&mut g, a)?;
            }
            let lcc = g.largest_connected_component();
            if lcc.node_count() < g.node_count() {
                log::info!(
                    "{}: kept largest component, {} of {} nodes",
                    cfg.name,
                    lcc.node_count(),
                    g.node_count()
                );
            }
            Ok(lcc)
        }
        NetworkSource::Block { spec } => {
            let mut rng = ChaCha8Rng::from_seed(generation_seed(master_seed, &format!("block/{}", cfg.name)));
            synth::generate_block_network(spec, &mut rng)
        }
        NetworkSource::Contrast { params, variant } => {
            // Both variants of one parameter set come from the same draw.
            let tag = format!("contrast/{}/{}/{}", params.group_size, params.degree, params.bridge);
            let mut rng = ChaCha8Rng::from_seed(generation_seed(master_seed, &tag));
            let (fom, nonfom) = synth::make_contrast_pair(params, &mut rng)?;
            Ok(match variant {
                ContrastVariant::Fom => fom,
                ContrastVariant::NonFom => nonfom,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    pub mean: f64,
    /// Variance estimate per configured estimator; `None` if it failed.
    pub variances: Vec<Option<f64>>,
    pub fom_p_value: Option<f64>,
    pub fom_verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub mean_estimate: f64,
    pub bias: f64,
    pub ratio: Option<f64>,
    pub coverage: f64,
    pub mean_estimated_de: Option<f64>,
    /// Replications where the estimator could not be computed.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumEstimator {
    pub estimator: Estimator,
    pub mean_estimated_de: Option<f64>,
    pub coverage: Option<f64>,
}

/// Replications sharing one sample-level FOM verdict at one alpha.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stratum {
    pub alpha: f64,
    pub verdict: Verdict,
    pub count: usize,
    pub empirical_de: Option<f64>,
    pub estimators: Vec<StratumEstimator>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkFomSummary {
    pub p_value: Option<f64>,
    /// Verdict at each configured alpha.
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub network: String,
    pub attribute: String,
    pub nodes: usize,
    pub edges: usize,
    pub mu: f64,
    pub sample_size: usize,
    pub replications: usize,
    /// About the true mean.
    pub population_sampling_variance: f64,
    /// About the average of the replicate means.
    pub replicate_variance: f64,
    pub empirical_de: Option<f64>,
    pub network_fom: NetworkFomSummary,
    pub estimators: Vec<EstimatorSummary>,
    pub strata: Vec<Stratum>,
    #[serde(skip)]
    pub replicates: Vec<Replication>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEntry {
    pub attribute: String,
    pub estimator: Estimator,
    pub networks: usize,
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub network: String,
    pub attribute: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellReport>,
    pub correlations: Vec<CorrelationEntry>,
    pub failures: Vec<Failure>,
}

fn mean_of(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn replicate(cfg: &ExperimentConfig, g: &Graph, network: &str, attribute: &str, index: usize) -> Result<Replication> {
    let mut rng = ChaCha8Rng::from_seed(replication_seed(cfg.master_seed, network, attribute, index));
    let forest = sampler::rds_sample(g, &cfg.rds, &mut rng)?;
    let mean = estimators::vh_mean::<f64>(&forest, attribute)?;
    let variances = cfg
        .estimators
        .iter()
        .map(|&e| match estimators::estimate::<f64, _>(&forest, attribute, e, cfg.bootstrap, &mut rng) {
            Ok(v) => Some(v.variance),
            Err(err) => {
                log::debug!("{network}/{attribute} replication {index}: {e} failed: {err}");
                None
            }
        })
        .collect();
    let fom = fomtest::sample_fom_test(&forest, attribute, 0.05)?;
    let fom_verdicts = cfg
        .alphas
        .iter()
        .map(|&a| match fom.p_value {
            Some(p) if p < a => Verdict::NotFom,
            Some(_) => Verdict::MayBeFom,
            None => Verdict::Inconclusive,
        })
        .collect();
    Ok(Replication {
        index,
        mean,
        variances,
        fom_p_value: fom.p_value,
        fom_verdicts,
    })
}

fn summarize(
    cfg: &ExperimentConfig,
    g: &Graph,
    network: &str,
    attribute: &str,
    replicates: Vec<Replication>,
) -> Result<CellReport> {
    let mu = g.attribute_mean(attribute)?;
    let s = cfg.rds.sample_size;
    let means: Vec<f64> = replicates.iter().map(|r| r.mean).collect();
    let pop = population_sampling_variance(&means, mu)?;

    let mut summaries = Vec::new();
    for (k, &e) in cfg.estimators.iter().enumerate() {
        let ok: Vec<(f64, f64)> = replicates
            .iter()
            .filter_map(|r| r.variances[k].map(|v| (r.mean, v)))
            .collect();
        let failures = replicates.len() - ok.len();
        if ok.is_empty() {
            summaries.push(EstimatorSummary {
                estimator: e,
                mean_estimate: f64::NAN,
                bias: f64::NAN,
                ratio: None,
                coverage: f64::NAN,
                mean_estimated_de: None,
                failures,
            });
            continue;
        }
        let vars: Vec<f64> = ok.iter().map(|p| p.1).collect();
        let br = bias_ratio(&vars, pop)?;
        summaries.push(EstimatorSummary {
            estimator: e,
            mean_estimate: br.mean_estimate,
            bias: br.bias,
            ratio: br.ratio,
            coverage: coverage_rate(&ok, mu, cfg.z)?,
            mean_estimated_de: design_effect(br.mean_estimate, mu, s),
            failures,
        });
    }

    let mut strata = Vec::new();
    for (ai, &alpha) in cfg.alphas.iter().enumerate() {
        for verdict in [Verdict::NotFom, Verdict::MayBeFom, Verdict::Inconclusive] {
            let members: Vec<&Replication> =
                replicates.iter().filter(|r| r.fom_verdicts[ai] == verdict).collect();
            let empirical_de = if members.is_empty() {
                None
            } else {
                let m: Vec<f64> = members.iter().map(|r| r.mean).collect();
                design_effect(m.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / m.len() as f64, mu, s)
            };
            let estimators = cfg
                .estimators
                .iter()
                .enumerate()
                .map(|(k, &e)| {
                    let ok: Vec<(f64, f64)> = members
                        .iter()
                        .filter_map(|r| r.variances[k].map(|v| (r.mean, v)))
                        .collect();
                    StratumEstimator {
                        estimator: e,
                        mean_estimated_de: mean_of(ok.iter().map(|p| p.1))
                            .and_then(|v| design_effect(v, mu, s)),
                        coverage: coverage_rate(&ok, mu, cfg.z).ok(),
                    }
                })
                .collect();
            strata.push(Stratum {
                alpha,
                verdict,
                count: members.len(),
                empirical_de,
                estimators,
            });
        }
    }

    let net_fom = fomtest::network_fom_test(g, attribute, 0.05)?;
    let network_fom = NetworkFomSummary {
        p_value: net_fom.p_value,
        verdicts: cfg
            .alphas
            .iter()
            .map(|&a| match net_fom.p_value {
                Some(p) if p < a => Verdict::NotFom,
                Some(_) => Verdict::MayBeFom,
                None => Verdict::Inconclusive,
            })
            .collect(),
    };

    Ok(CellReport {
        network: network.to_string(),
        attribute: attribute.to_string(),
        nodes: g.node_count(),
        edges: g.edge_count(),
        mu,
        sample_size: s,
        replications: replicates.len(),
        population_sampling_variance: pop,
        replicate_variance: replicate_variance(&means),
        empirical_de: design_effect(pop, mu, s),
        network_fom,
        estimators: summaries,
        strata,
        replicates,
    })
}

fn run_cell(cfg: &ExperimentConfig, g: &Graph, network: &str, attribute: &str) -> Result<CellReport> {
    g.require_attribute(attribute)?;
    let replicates = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replicate(cfg, g, network, attribute, r))
        .collect::<Result<Vec<_>>>()?;
    summarize(cfg, g, network, attribute, replicates)
}

fn run_all(cfg: &ExperimentConfig) -> ExperimentReport {
    let per_network: Vec<(Vec<CellReport>, Vec<Failure>)> = cfg
        .networks
        .par_iter()
        .map(|net| {
            let mut cells = Vec::new();
            let mut failures = Vec::new();
            let g = match build_network(net, cfg.master_seed) {
                Ok(g) => g,
                Err(e) => {
                    log::error!("{}: {e}", net.name);
                    failures.push(Failure {
                        network: net.name.clone(),
                        attribute: None,
                        error: e.to_string(),
                    });
                    return (cells, failures);
                }
            };
            for attr in &cfg.attributes {
                match run_cell(cfg, &g, &net.name, attr) {
                    Ok(c) => cells.push(c),
                    Err(e) => {
                        log::error!("{}/{attr}: {e}", net.name);
                        failures.push(Failure {
                            network: net.name.clone(),
                            attribute: Some(attr.clone()),
                            error: e.to_string(),
                        });
                    }
                }
            }
            (cells, failures)
        })
        .collect();
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (c, f) in per_network {
        cells.extend(c);
        failures.extend(f);
    }

    let mut correlations = Vec::new();
    for attr in &cfg.attributes {
        for (k, &e) in cfg.estimators.iter().enumerate() {
            let (xs, ys): (Vec<f64>, Vec<f64>) = cells
                .iter()
                .filter(|c| &c.attribute == attr && c.estimators[k].mean_estimate.is_finite())
                .map(|c| (c.estimators[k].mean_estimate, c.population_sampling_variance))
                .unzip();
            correlations.push(CorrelationEntry {
                attribute: attr.clone(),
                estimator: e,
                networks: xs.len(),
                correlation: correlation(&xs, &ys),
            });
        }
    }
    ExperimentReport {
        cells,
        correlations,
        failures,
    }
}

/// Runs the full sweep. Per-network failures are logged and recorded in the
/// report rather than aborting the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.threads == 0 {
        return Ok(run_all(cfg));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| run_all(cfg)))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per (network, attribute, estimator).
pub fn write_summary_csv<W: std::io::Write>(report: &ExperimentReport, alphas: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "network",
        "attribute",
        "estimator",
        "nodes",
        "edges",
        "mu",
        "sample_size",
        "replications",
        "population_sampling_variance",
        "replicate_variance",
        "empirical_de",
        "mean_estimate",
        "bias",
        "ratio",
        "coverage",
        "mean_estimated_de",
        "failures",
        "network_fom_p",
    ]
    .map(String::from)
    .to_vec();
    for a in alphas {
        header.push(format!("sample_not_fom_rate_{a}"));
    }
    w.write_record(&header)?;
    for c in &report.cells {
        for e in &c.estimators {
            let mut row = vec![
                c.network.clone(),
                c.attribute.clone(),
                e.estimator.to_string(),
                c.nodes.to_string(),
                c.edges.to_string(),
                c.mu.to_string(),
                c.sample_size.to_string(),
                c.replications.to_string(),
                c.population_sampling_variance.to_string(),
                c.replicate_variance.to_string(),
                opt(c.empirical_de),
                e.mean_estimate.to_string(),
                e.bias.to_string(),
                opt(e.ratio),
                e.coverage.to_string(),
                opt(e.mean_estimated_de),
                e.failures.to_string(),
                opt(c.network_fom.p_value),
            ];
            for ai in 0..alphas.len() {
                let rejected = c.replicates.iter().filter(|r| r.fom_verdicts[ai] == Verdict::NotFom).count();
                row.push((rejected as f64 / c.replications as f64).to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<summary csv>", e))?;
    Ok(())
}

/// One row per (network, attribute, alpha, verdict, estimator).
pub fn write_strata_csv<W: std::io::Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "network",
        "attribute",
        "alpha",
        "verdict",
        "count",
        "empirical_de",
        "estimator",
        "mean_estimated_de",
        "coverage",
    ])?;
    for c in &report.cells {
        for s in &c.strata {
            let verdict = serde_json::to_value(s.verdict)?;
            for e in &s.estimators {
                w.write_record([
                    c.network.clone(),
                    c.attribute.clone(),
                    s.alpha.to_string(),
                    verdict.as_str().unwrap_or_default().to_string(),
                    s.count.to_string(),
                    opt(s.empirical_de),
                    e.estimator.to_string(),
                    opt(e.mean_estimated_de),
                    opt(e.coverage),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<strata csv>", e))?;
    Ok(())
}

/// One row per replication with every estimator's variance.
pub fn write_replications_csv<W: std::io::Write>(
    report: &ExperimentReport,
    estimators: &[Estimator],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["network", "attribute", "replication", "mean", "fom_p"]
        .map(String::from)
        .to_vec();
    header.extend(estimators.iter().map(|e| e.to_string()));
    w.write_record(&header)?;
    for c in &report.cells {
        for r in &c.replicates {
            let mut row = vec![
                c.network.clone(),
                c.attribute.clone(),
                r.index.to_string(),
                r.mean.to_string(),
                opt(r.fom_p_value),
            ];
            row.extend(r.variances.iter().map(|v| opt(*v)));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<replications csv>", e))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    seed_derivation: &'static str,
    files: BTreeMap<&'static str, &'static str>,
    report: &'a ExperimentReport,
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const STRATA_FILE: &str = "strata.csv";
pub const REPLICATIONS_FILE: &str = "replications.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes the CSV reports and the JSON manifest into `dir`.
pub fn write_reports(report: &ExperimentReport, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        fs::File::create(&p).map(std::io::BufWriter::new).map_err(|e| Error::io(p, e))
    };
    write_summary_csv(report, &cfg.alphas, create(SUMMARY_FILE)?)?;
    write_strata_csv(report, create(STRATA_FILE)?)?;
    write_replications_csv(report, &cfg.estimators, create(REPLICATIONS_FILE)?)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        seed_derivation: "replication rng = ChaCha8(SHA-256(master_seed LE || network || 0 || attribute || 0 || replication LE))",
        files: BTreeMap::from([
            ("summary", SUMMARY_FILE),
            ("strata", STRATA_FILE),
            ("replications", REPLICATIONS_FILE),
        ]),
        report,
    };
    let mut out = create(MANIFEST_FILE)?;
    serde_json::to_writer_pretty(&mut out, &manifest)?;
    std::io::Write::flush(&mut out).map_err(|e| Error::io(dir.join(MANIFEST_FILE), e))?;
    Ok(())
}
