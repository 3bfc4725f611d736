//! Random-walk and respondent-driven samples on graphs and category chains.
//!
//! Recruitment proceeds from a frontier of respondents holding coupons. A
//! dequeued respondent draws a recruit count from the branching
//! distribution and recruits that many uniformly chosen neighbors. When the
//! frontier empties before the target size is reached, a fresh seed starts
//! a new tree.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Real;
use crate::synth::CategoryChain;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Replacement {
    #[default]
    With,
    Without,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    /// Probability `d_i / 2m`.
    #[default]
    Equilibrium,
    Uniform,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueueDiscipline {
    /// Wave order.
    #[default]
    Fifo,
    Lifo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RdsConfig {
    pub sample_size: usize,
    /// Probability of handing out 0, 1, 2, ... recruits.
    pub branching: Vec<f64>,
    pub replacement: Replacement,
    pub seed_mode: SeedMode,
    pub initial_seeds: usize,
    pub queue: QueueDiscipline,
}

impl Default for RdsConfig {
    fn default() -> Self {
        RdsConfig {
            sample_size: 200,
            branching: vec![1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0],
            replacement: Replacement::With,
            seed_mode: SeedMode::Equilibrium,
            initial_seeds: 1,
            queue: QueueDiscipline::Fifo,
        }
    }
}

impl RdsConfig {
    /// Non-branching, with-replacement recruitment: a simple random walk.
    pub fn random_walk(sample_size: usize) -> Self {
        RdsConfig {
            sample_size,
            branching: vec![0.0, 1.0],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 {
            return Err(Error::InvalidInput("sample size must be at least 1".into()));
        }
        if self.initial_seeds == 0 {
            return Err(Error::InvalidInput("at least one initial seed is required".into()));
        }
        if self.branching.is_empty() || self.branching.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("branching probabilities must be non-negative".into()));
        }
        let total: f64 = self.branching.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "branching probabilities sum to {total}, not 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecruitmentRecord {
    pub sample_index: usize,
    /// Dense node index in the sampled graph, when known.
    #[serde(skip)]
    pub node: usize,
    pub node_id: String,
    pub degree: usize,
    pub parent: Option<usize>,
    pub tree: usize,
    pub wave: usize,
    /// One value per forest attribute name.
    pub attributes: Vec<Option<u8>>,
}

/// Ordered sample records with recruiter links.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecruitmentForest {
    attribute_names: Vec<String>,
    records: Vec<RecruitmentRecord>,
}

impl RecruitmentForest {
    pub fn new(attribute_names: Vec<String>, records: Vec<RecruitmentRecord>) -> Result<Self> {
        let f = RecruitmentForest {
            attribute_names,
            records,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[RecruitmentRecord] {
        &self.records
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.attribute_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    /// Values of one attribute in sample order.
    pub fn attribute_values(&self, name: &str) -> Result<Vec<Option<u8>>> {
        let k = self.attribute_index(name)?;
        Ok(self.records.iter().map(|r| r.attributes[k]).collect())
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        self.records.iter().map(|r| r.parent).collect()
    }

    pub fn tree_count(&self) -> usize {
        self.records.iter().map(|r| r.tree + 1).max().unwrap_or(0)
    }

    /// Structural invariants: indices are positions, parents precede
    /// children in the same tree one wave up, seeds start trees in order.
    pub fn validate(&self) -> Result<()> {
        let mut next_tree = 0;
        for (i, r) in self.records.iter().enumerate() {
            let bad = |msg: &str| Err(Error::InvalidInput(format!("record {i}: {msg}")));
            if r.sample_index != i {
                return bad("sample index out of order");
            }
            if r.attributes.len() != self.attribute_names.len() {
                return bad("attribute count mismatch");
            }
            match r.parent {
                None => {
                    if r.wave != 0 || r.tree != next_tree {
                        return bad("seed must open the next tree at wave 0");
                    }
                    next_tree += 1;
                }
                Some(p) => {
                    if p >= i {
                        return bad("parent does not precede child");
                    }
                    let parent = &self.records[p];
                    if parent.tree != r.tree || parent.wave + 1 != r.wave {
                        return bad("tree or wave inconsistent with parent");
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks that every recruit is a network neighbor of its recruiter.
    pub fn check_against(&self, g: &Graph) -> Result<()> {
        for r in &self.records {
            if let Some(p) = r.parent {
                if !g.has_edge(self.records[p].node, r.node) {
                    return Err(Error::InvalidInput(format!(
                        "record {} is not a neighbor of its recruiter",
                        r.sample_index
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> =
            vec!["sample_index", "node_id", "parent_index", "tree_id", "wave", "degree"];
        header.extend(self.attribute_names.iter().map(String::as_str));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.sample_index.to_string(),
                r.node_id.clone(),
                r.parent.map(|p| p.to_string()).unwrap_or_default(),
                r.tree.to_string(),
                r.wave.to_string(),
                r.degree.to_string(),
            ];
            row.extend(
                r.attributes
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<forest output>", e))?;
        Ok(())
    }

    /// Reads the CSV form written by [`write_csv`](Self::write_csv). Node
    /// indices are assigned in order of first appearance of each node id.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers()?.clone();
        let fixed = ["sample_index", "node_id", "parent_index", "tree_id", "wave", "degree"];
        if headers.len() < fixed.len() || headers.iter().zip(fixed).any(|(h, f)| h != f) {
            return Err(Error::Parse {
                file: "forest".into(),
                line: 1,
                message: format!("forest header must start with {}", fixed.join(",")),
            });
        }
        let attribute_names: Vec<String> = headers.iter().skip(fixed.len()).map(String::from).collect();
        let mut node_ids = std::collections::HashMap::new();
        let mut records = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let field = |k: usize| -> Result<usize> {
                rec[k].parse().map_err(|_| Error::Parse {
                    file: "forest".into(),
                    line,
                    message: format!("column `{}` is not a non-negative integer", fixed[k]),
                })
            };
            let parent = if rec[2].is_empty() { None } else { Some(field(2)?) };
            let next = node_ids.len();
            let node = *node_ids.entry(rec[1].to_string()).or_insert(next);
            records.push(RecruitmentRecord {
                sample_index: field(0)?,
                node,
                node_id: rec[1].to_string(),
                degree: field(5)?,
                parent,
                tree: field(3)?,
                wave: field(4)?,
                attributes: (fixed.len()..rec.len())
                    .map(|k| match &rec[k] {
                        "0" => Some(0),
                        "1" => Some(1),
                        _ => None,
                    })
                    .collect(),
            });
        }
        RecruitmentForest::new(attribute_names, records)
    }
}

/// Draws a seed node; `exclude` marks nodes that are not eligible.
fn draw_node<R: Rng + ?Sized>(
    g: &Graph,
    mode: SeedMode,
    exclude: Option<&[bool]>,
    rng: &mut R,
) -> Option<usize> {
    let eligible = |i: usize| exclude.is_none_or(|ex| !ex[i]);
    let weight = |i: usize| match mode {
        SeedMode::Equilibrium => g.degree(i),
        SeedMode::Uniform => 1,
    };
    let total: usize = (0..g.node_count()).filter(|&i| eligible(i)).map(weight).sum();
    if total == 0 {
        return None;
    }
    let mut target = rng.random_range(0..total);
    for i in 0..g.node_count() {
        if !eligible(i) {
            continue;
        }
        let w = weight(i);
        if target < w {
            return Some(i);
        }
        target -= w;
    }
    None
}

/// Seed draw: probability `d_i / 2m` in equilibrium mode, `1/N` in uniform mode.
pub fn draw_seed<R: Rng + ?Sized>(g: &Graph, mode: SeedMode, rng: &mut R) -> Result<usize> {
    if g.node_count() == 0 {
        return Err(Error::Precondition("cannot seed an empty graph".into()));
    }
    draw_node(g, mode, None, rng)
        .ok_or_else(|| Error::Precondition("graph has no edges to weight seeds by".into()))
}

struct ForestBuilder<'g> {
    g: &'g Graph,
    columns: Vec<&'g [Option<u8>]>,
    names: Vec<String>,
    records: Vec<RecruitmentRecord>,
    trees: usize,
}

impl<'g> ForestBuilder<'g> {
    fn new(g: &'g Graph) -> Self {
        let names: Vec<String> = g.attribute_names().map(String::from).collect();
        let columns = names.iter().map(|n| g.attribute(n).expect("listed attribute")).collect();
        ForestBuilder {
            g,
            columns,
            names,
            records: Vec::new(),
            trees: 0,
        }
    }

    fn push(&mut self, node: usize, parent: Option<usize>) -> usize {
        let (tree, wave) = match parent {
            None => {
                self.trees += 1;
                (self.trees - 1, 0)
            }
            Some(p) => (self.records[p].tree, self.records[p].wave + 1),
        };
        let idx = self.records.len();
        self.records.push(RecruitmentRecord {
            sample_index: idx,
            node,
            node_id: self.g.id(node).to_string(),
            degree: self.g.degree(node),
            parent,
            tree,
            wave,
            attributes: self.columns.iter().map(|c| c[node]).collect(),
        });
        idx
    }

    fn finish(self) -> RecruitmentForest {
        RecruitmentForest {
            attribute_names: self.names,
            records: self.records,
        }
    }
}

/// Respondent-driven sample of exactly `cfg.sample_size` records.
pub fn rds_sample<R: Rng + ?Sized>(g: &Graph, cfg: &RdsConfig, rng: &mut R) -> Result<RecruitmentForest> {
    cfg.validate()?;
    if g.node_count() == 0 {
        return Err(Error::Precondition("cannot sample an empty graph".into()));
    }
    let without = cfg.replacement == Replacement::Without;
    if without && g.node_count() < cfg.sample_size {
        return Err(Error::Precondition(format!(
            "without-replacement sample of {} from {} nodes",
            cfg.sample_size,
            g.node_count()
        )));
    }
    let branching = WeightedIndex::new(&cfg.branching)
        .map_err(|e| Error::InvalidInput(format!("branching distribution: {e}")))?;
    let mut sampled = vec![false; g.node_count()];
    let mut builder = ForestBuilder::new(g);
    let mut frontier: VecDeque<usize> = VecDeque::new();
    let target = cfg.sample_size;

    let add_seed = |builder: &mut ForestBuilder, sampled: &mut Vec<bool>, rng: &mut R| -> Result<usize> {
        let node = draw_node(g, cfg.seed_mode, without.then_some(sampled.as_slice()), rng)
            .ok_or_else(|| Error::Exhausted("no eligible node left to seed a new tree".into()))?;
        sampled[node] = true;
        Ok(builder.push(node, None))
    };

    for _ in 0..cfg.initial_seeds.min(target) {
        let idx = add_seed(&mut builder, &mut sampled, rng)?;
        frontier.push_back(idx);
    }
    let mut eligible: Vec<usize> = Vec::new();
    while builder.records.len() < target {
        let next = match cfg.queue {
            QueueDiscipline::Fifo => frontier.pop_front(),
            QueueDiscipline::Lifo => frontier.pop_back(),
        };
        let Some(recruiter) = next else {
            let idx = add_seed(&mut builder, &mut sampled, rng)?;
            frontier.push_back(idx);
            continue;
        };
        let mut coupons = branching.sample(rng);
        let node = builder.records[recruiter].node;
        let neighbors = g.neighbors(node);
        while coupons > 0 && builder.records.len() < target {
            let recruit = if without {
                eligible.clear();
                eligible.extend(neighbors.iter().copied().filter(|&v| !sampled[v]));
                if eligible.is_empty() {
                    break;
                }
                eligible[rng.random_range(0..eligible.len())]
            } else {
                if neighbors.is_empty() {
                    break;
                }
                neighbors[rng.random_range(0..neighbors.len())]
            };
            sampled[recruit] = true;
            let idx = builder.push(recruit, Some(recruiter));
            frontier.push_back(idx);
            coupons -= 1;
        }
    }
    Ok(builder.finish())
}

/// Simple random walk of `s` steps. Starts at `start`, or at an
/// equilibrium draw when `start` is `None`.
pub fn random_walk_sample<R: Rng + ?Sized>(
    g: &Graph,
    s: usize,
    start: Option<usize>,
    rng: &mut R,
) -> Result<RecruitmentForest> {
    if s == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let mut node = match start {
        Some(i) if i < g.node_count() => i,
        Some(i) => return Err(Error::InvalidInput(format!("start node {i} out of range"))),
        None => draw_seed(g, SeedMode::Equilibrium, rng)?,
    };
    let mut builder = ForestBuilder::new(g);
    let mut prev = builder.push(node, None);
    for _ in 1..s {
        let nb = g.neighbors(node);
        if nb.is_empty() {
            return Err(Error::Precondition(format!("walk reached isolated node `{}`", g.id(node))));
        }
        node = nb[rng.random_range(0..nb.len())];
        prev = builder.push(node, Some(prev));
    }
    Ok(builder.finish())
}

/// State sequence of length `s` from a category chain, started from its
/// stationary distribution.
pub fn chain_sample<T: Real, R: Rng + ?Sized>(
    chain: &CategoryChain<T>,
    s: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let k = chain.states();
    let rows: Vec<WeightedIndex<f64>> = (0..k)
        .map(|i| {
            WeightedIndex::new(chain.matrix().row(i).iter().map(|p| p.as_f64().max(0.0)))
                .map_err(|e| Error::InvalidInput(format!("row {i}: {e}")))
        })
        .collect::<Result<_>>()?;
    let start = WeightedIndex::new(chain.stationary().iter().map(|p| p.as_f64().max(0.0)))
        .map_err(|e| Error::InvalidInput(format!("stationary distribution: {e}")))?;
    let mut out = Vec::with_capacity(s);
    if s == 0 {
        return Ok(out);
    }
    let mut state = start.sample(rng);
    out.push(state);
    for _ in 1..s {
        state = rows[state].sample(rng);
        out.push(state);
    }
    Ok(out)
}

/// A single-tree forest (a path) carrying one binary attribute `name`,
/// for feeding category-level sequences to the estimators.
pub fn path_forest(name: &str, labels: &[u8], degrees: Option<&[usize]>) -> RecruitmentForest {
    let records = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| RecruitmentRecord {
            sample_index: i,
            node: i,
            node_id: i.to_string(),
            degree: degrees.map_or(1, |d| d[i]),
            parent: i.checked_sub(1),
            tree: 0,
            wave: i,
            attributes: vec![Some(y)],
        })
        .collect();
    RecruitmentForest {
        attribute_names: vec![name.to_string()],
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::graph_from;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k3() -> Graph {
        let mut g = graph_from(3, &[(0, 1), (1, 2), (0, 2)]);
        g.set_attribute("y", vec![Some(0), Some(1), None]).unwrap();
        g
    }

    #[test]
    fn size_one_is_a_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = RdsConfig { sample_size: 1, ..Default::default() };
        let f = rds_sample(&k3(), &cfg, &mut rng).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.records()[0].parent, None);
    }

    #[test]
    fn non_branching_is_a_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = graph_from(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let f = rds_sample(&g, &RdsConfig::random_walk(50), &mut rng).unwrap();
        assert_eq!(f.tree_count(), 1);
        for (i, r) in f.records().iter().enumerate() {
            assert_eq!(r.parent, i.checked_sub(1));
            assert_eq!(r.wave, i);
        }
        f.check_against(&g).unwrap();
    }

    #[test]
    fn walk_from_path_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = graph_from(3, &[(0, 1), (1, 2)]);
        for _ in 0..20 {
            let f = random_walk_sample(&g, 2, Some(0), &mut rng).unwrap();
            assert_eq!(f.records()[1].node, 1);
        }
    }

    #[test]
    fn forest_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = graph_from(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]);
        for seed in 0..50 {
            let cfg = RdsConfig { sample_size: 30 + seed % 7, ..Default::default() };
            let f = rds_sample(&g, &cfg, &mut rng).unwrap();
            assert_eq!(f.len(), cfg.sample_size);
            f.validate().unwrap();
            f.check_against(&g).unwrap();
        }
    }

    #[test]
    fn without_replacement_visits_distinct_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = graph_from(8, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 0)]);
        let cfg = RdsConfig { sample_size: 8, replacement: Replacement::Without, ..Default::default() };
        let f = rds_sample(&g, &cfg, &mut rng).unwrap();
        let mut nodes: Vec<usize> = f.records().iter().map(|r| r.node).collect();
        nodes.sort_unstable();
        assert_eq!(nodes, (0..8).collect::<Vec<_>>());
        let cfg = RdsConfig { sample_size: 9, ..cfg };
        assert!(rds_sample(&g, &cfg, &mut rng).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let g = graph_from(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]);
        let cfg = RdsConfig::default();
        let a = rds_sample(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = rds_sample(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip_keeps_missing() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = rds_sample(&k3(), &RdsConfig { sample_size: 25, ..Default::default() }, &mut rng).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sample_index,node_id,parent_index,tree_id,wave,degree,y\n"));
        let back = RecruitmentForest::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), f.len());
        for (a, b) in back.records().iter().zip(f.records()) {
            assert_eq!((a.parent, a.tree, a.wave, a.degree), (b.parent, b.tree, b.wave, b.degree));
            assert_eq!(a.attributes, b.attributes);
            assert_eq!(a.node_id, b.node_id);
        }
    }

    #[test]
    fn bad_branching_rejected() {
        let cfg = RdsConfig { branching: vec![0.5, 0.4], ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
