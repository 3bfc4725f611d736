//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

mod common;

use std::fs;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use rdslab::estimators::{self, Estimator};
use rdslab::fomtest::{self, Verdict};
use rdslab::graph::{estimate_node_independent_paths, node_independent_paths, DyadSampling};
use rdslab::harness::{self, ExperimentConfig, NetworkConfig, NetworkSource};
use rdslab::sampler::{self, path_forest, RdsConfig, RecruitmentForest, RecruitmentRecord, Replacement};
use rdslab::synth::{self, BlockModelSpec, ContrastParams};
use rdslab::{CategoryChain, Graph};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng_for(stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    rng.set_stream(stream);
    rng
}

fn example_chains(e: usize, f: usize, h: usize) -> (CategoryChain, CategoryChain) {
    synth::build_category_chain(&BlockModelSpec::new(e, f, h, 50)).unwrap()
}

fn lambda2(chain: &CategoryChain) -> f64 {
    chain.decompose().unwrap().second_largest().unwrap()
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn criterion_1() -> Outcome {
    let (m1, c1) = example_chains(10, 10, 10);
    let (m2, c2) = example_chains(10, 100, 100);
    let l = [lambda2(&m1), lambda2(&c1), lambda2(&m2), lambda2(&c2)];
    let pass = within(l[0], 0.8047, 0.001)
        && within(l[1], 0.6667, 0.0005)
        && within(l[2], 0.9548, 0.001)
        && within(l[3], 0.5238, 0.001);
    outcome(
        pass,
        format!(
            "example 1: M {:.4}, C {:.4}; example 2: M {:.4}, C {:.4}",
            l[0], l[1], l[2], l[3]
        ),
    )
}

fn criterion_2() -> Outcome {
    let (m1, c1) = example_chains(10, 10, 10);
    let (m2, c2) = example_chains(10, 100, 100);
    // (chain, sd, sd tol, de, de tol)
    let cases = [
        (&m1, 0.138, 0.002, 7.64, 0.2),
        (&c1, 0.110, 0.002, 4.88, 0.15),
        (&m2, 0.219, 0.003, 19.12, 0.5),
        (&c2, 0.0887, 0.002, 3.15, 0.1),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (chain, sd, sd_tol, de, de_tol) in cases {
        let v = chain.exact_variance(100).unwrap();
        let got_de = v.design_effect.unwrap_or(f64::NAN);
        pass &= within(v.sd, sd, sd_tol) && within(got_de, de, de_tol);
        parts.push(format!("SD {:.4} DE {:.2}", v.sd, got_de));
    }
    outcome(pass, format!("M1 {}; C1 {}; M2 {}; C2 {}", parts[0], parts[1], parts[2], parts[3]))
}

fn criterion_3() -> Outcome {
    const R: usize = 200_000;
    const S: usize = 100;
    let (m, _) = example_chains(10, 10, 10);
    let exact = m.exact_variance(S).unwrap().sd;
    let means: Vec<f64> = (0..R as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(r);
            let states = sampler::chain_sample(&m, S, &mut rng).unwrap();
            states.iter().map(|&s| m.values()[s]).sum::<f64>() / S as f64
        })
        .collect();
    let mu = common::mean(&means);
    let s2 = common::var(&means);
    let sd = s2.sqrt();
    let m4 = means.iter().map(|x| (x - mu).powi(4)).sum::<f64>() / R as f64;
    // Delta method: Var(s^2) ~ (m4 - s^4) / R, SE(s) = SE(s^2) / (2 s).
    let se = ((m4 - s2 * s2) / R as f64).sqrt() / (2.0 * sd);
    let z = (sd - exact) / se;
    outcome(
        z.abs() <= 3.0,
        format!("empirical SD {sd:.5} vs exact {exact:.5}, MC SE {se:.5} (z = {z:+.2})"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = rng_for(4);
    let mut failures = 0;
    let mut closest = f64::INFINITY;
    for _ in 0..1000 {
        let (a, b) = loop {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            if a > 0.0 && b > 0.0 && a + b <= 1.0 {
                break (a, b);
            }
        };
        let (m, c) = synth::chains_from_parameters::<f64>(a, b).unwrap();
        let gap = lambda2(&m) - lambda2(&c);
        closest = closest.min(gap);
        if gap <= 0.0 {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("{failures} of 1000 draws violate the ordering; smallest gap {closest:.3e}"),
    )
}

/// Variance estimates and VH means of `reps` samples.
fn replicate_estimates(
    g: &Graph,
    cfg: &RdsConfig,
    which: &[Estimator],
    reps: usize,
    stream: u64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let rows: Vec<(f64, Vec<f64>)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(stream * 1_000_000 + r);
            let forest = sampler::rds_sample(g, cfg, &mut rng).unwrap();
            let mean = estimators::vh_mean::<f64>(&forest, "Y").unwrap();
            let vars = which
                .iter()
                .map(|&e| estimators::estimate::<f64, _>(&forest, "Y", e, 0, &mut rng).unwrap().variance)
                .collect();
            (mean, vars)
        })
        .collect();
    let means = rows.iter().map(|r| r.0).collect();
    let vars = (0..which.len()).map(|k| rows.iter().map(|r| r.1[k]).collect()).collect();
    (means, vars)
}

fn criterion_5() -> Outcome {
    const R: usize = 2000;
    let spec = BlockModelSpec::new(250, 250, 250, 50);
    let g = synth::generate_block_network(&spec, &mut rng_for(5)).unwrap();
    let mu = g.attribute_mean("Y").unwrap();
    let cfg = RdsConfig {
        sample_size: 100,
        ..RdsConfig::default()
    };
    let (means, vars) = replicate_estimates(&g, &cfg, &[Estimator::Vhe, Estimator::VheHom2], R, 5);
    let pop = harness::population_sampling_variance(&means, mu).unwrap();
    let ratio_vhe = common::mean(&vars[0]) / pop;
    let ratio_hom = common::mean(&vars[1]) / pop;
    let mean_sd_vhe = common::mean(&vars[0].iter().map(|v| v.sqrt()).collect::<Vec<_>>());
    let pass = mean_sd_vhe < pop.sqrt() && ratio_vhe < 0.75 && (ratio_hom - 1.0).abs() < (ratio_vhe - 1.0).abs();
    outcome(
        pass,
        format!(
            "empirical SD {:.4}, mean VHE SD {:.4}; variance ratio VHE {:.3}, VHEhom2 {:.3}",
            pop.sqrt(),
            mean_sd_vhe,
            ratio_vhe,
            ratio_hom
        ),
    )
}

fn criterion_6() -> Outcome {
    const R: usize = 2000;
    let (fom, non_fom) = synth::make_contrast_pair(&ContrastParams::default(), &mut rng_for(6)).unwrap();
    let cfg = RdsConfig::random_walk(500);
    let mut popvar = Vec::new();
    let mut vhe = Vec::new();
    for (k, g) in [&fom, &non_fom].into_iter().enumerate() {
        let mu = g.attribute_mean("Y").unwrap();
        let (means, vars) = replicate_estimates(g, &cfg, &[Estimator::Vhe], R, 60 + k as u64);
        popvar.push(harness::population_sampling_variance(&means, mu).unwrap());
        vhe.push(common::mean(&vars[0]));
    }
    let vhe_gap = (vhe[0] - vhe[1]).abs() / vhe[0].min(vhe[1]);
    let factor = popvar[1] / popvar[0];
    outcome(
        vhe_gap < 0.05 && factor >= 3.0,
        format!(
            "mean VHE {:.3e} vs {:.3e} ({:.1}% apart); empirical variance {:.3e} vs {:.3e} (x{:.2})",
            vhe[0],
            vhe[1],
            100.0 * vhe_gap,
            popvar[0],
            popvar[1],
            factor
        ),
    )
}

fn criterion_7() -> Outcome {
    const TRIALS: usize = 1000;
    const ALPHA: f64 = 0.05;
    let base = common::gnp(500, 0.04, &mut rng_for(7));
    let ones = base.node_count() / 2;
    let cfg = RdsConfig {
        replacement: Replacement::Without,
        ..RdsConfig::default()
    };
    // Size: the sample-level test on without-replacement samples, where the
    // recruit's label is independent of the grand-recruiter's under random labels.
    let (sample_rejections, network_rejections): (usize, usize) = (0..TRIALS as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(70_000 + k);
            let mut g = base.clone();
            common::permuted_labels(&mut g, ones, &mut rng);
            let forest = sampler::rds_sample(&g, &cfg, &mut rng).unwrap();
            let s = fomtest::sample_fom_test(&forest, "Y", ALPHA).unwrap().verdict == Verdict::NotFom;
            let n = fomtest::network_fom_test(&g, "Y", ALPHA).unwrap().verdict == Verdict::NotFom;
            (usize::from(s), usize::from(n))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let size = sample_rejections as f64 / TRIALS as f64;
    let network_size = network_rejections as f64 / TRIALS as f64;
    let (lo, hi) = common::size_band(ALPHA, TRIALS);

    // Power on a block network of 400 nodes.
    let block = synth::generate_block_network(&BlockModelSpec::new(500, 500, 500, 100), &mut rng_for(71)).unwrap();
    let power = fomtest::network_fom_test(&block, "Y", 0.001).unwrap();
    let p = power.p_value.unwrap_or(1.0);
    let pass = (lo..=hi).contains(&size) && p < 0.001 && power.verdict == Verdict::NotFom;
    outcome(
        pass,
        format!(
            "sample-level size {size:.3} in [{lo:.3}, {hi:.3}]; block network ({} nodes) p = {p:.2e}; \
             network-level rejection under random labels {network_size:.3} (walk backtracking makes Y second-order there)",
            block.node_count()
        ),
    )
}

fn random_forest(rng: &mut ChaCha8Rng) -> RecruitmentForest {
    let n = rng.random_range(2..=120);
    let p1: f64 = rng.random_range(0.0..=1.0);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let parent = if i == 0 || rng.random::<f64>() < 0.05 {
            None
        } else {
            Some(rng.random_range(0..i))
        };
        let (tree, wave) = match parent {
            None => (records.iter().filter(|r: &&RecruitmentRecord| r.parent.is_none()).count(), 0),
            Some(p) => {
                let pr: &RecruitmentRecord = &records[p];
                (pr.tree, pr.wave + 1)
            }
        };
        let y = if rng.random::<f64>() < 0.03 {
            None
        } else {
            Some(u8::from(rng.random::<f64>() < p1))
        };
        records.push(RecruitmentRecord {
            sample_index: i,
            node: i,
            node_id: format!("n{i}"),
            degree: rng.random_range(1..=40),
            parent,
            tree,
            wave,
            attributes: vec![y],
        });
    }
    RecruitmentForest::new(vec!["Y".into()], records).unwrap()
}

fn swapped(forest: &RecruitmentForest) -> RecruitmentForest {
    let records = forest
        .records()
        .iter()
        .map(|r| RecruitmentRecord {
            attributes: r.attributes.iter().map(|a| a.map(|y| 1 - y)).collect(),
            ..r.clone()
        })
        .collect();
    RecruitmentForest::new(forest.attribute_names().to_vec(), records).unwrap()
}

fn order2_fixture() -> (DMatrix<f64>, CategoryChain) {
    // State = (y_{t-1}, y_t) as a two-bit number; row s gives Pr(y_{t+1} | s).
    let p_one = [0.1, 0.7, 0.4, 0.85];
    let mut m = DMatrix::zeros(4, 4);
    for s in 0..4 {
        m[(s, (s << 1) & 3)] = 1.0 - p_one[s];
        m[(s, ((s << 1) | 1) & 3)] = p_one[s];
    }
    let chain = CategoryChain::new(m.clone(), vec![0.0, 1.0, 0.0, 1.0]).unwrap();
    (m, chain)
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // Label swap and nonnegativity over random forests.
    let (swap_bad, neg_bad, errors) = (0..10_000u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(80_000 + k);
            let f = random_forest(&mut rng);
            let g = swapped(&f);
            let e = Estimator::ALL[k as usize % Estimator::ALL.len()];
            let a = estimators::estimate::<f64, _>(&f, "Y", e, 50, &mut rng_for(k));
            let b = estimators::estimate::<f64, _>(&g, "Y", e, 50, &mut rng_for(k));
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let swap = (a.variance - b.variance).abs() > 1e-9 * a.variance.max(1e-12);
                    let neg = !(a.variance >= 0.0 && a.variance.is_finite());
                    (usize::from(swap), usize::from(neg), 0)
                }
                (Err(_), Err(_)) => (0, 0, 1),
                _ => (1, 0, 0),
            }
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    pass &= swap_bad == 0 && neg_bad == 0;
    notes.push(format!(
        "swap mismatches {swap_bad}, invalid variances {neg_bad} over 1e4 forests ({errors} rejected as input)"
    ));

    // Branching correction is inert without branching.
    let mut wbc_bad = 0;
    for k in 0..200u64 {
        let mut rng = rng_for(81_000 + k);
        let n = rng.random_range(2..300);
        let ys: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        let f = path_forest("Y", &ys, None);
        let a = estimators::vhe_variance::<f64>(&f, "Y").unwrap().variance;
        let b = estimators::vhe_wbc_variance::<f64>(&f, "Y").unwrap().variance;
        if a.to_bits() != b.to_bits() {
            wbc_bad += 1;
        }
    }
    pass &= wbc_bad == 0;
    notes.push(format!("VHEwbc != VHE on {wbc_bad}/200 paths"));

    // Order-p estimates converge on order-q data for p >= q.
    const LONG: usize = 200_000;
    let (_, c1) = example_chains(10, 10, 10);
    let (m2, chain2) = order2_fixture();
    let exact1 = c1.exact_variance(LONG).unwrap().variance;
    let exact2 = rdslab::spectral::exact_chain_variance(&m2, chain2.stationary(), chain2.values(), LONG)
        .unwrap()
        .variance;
    let worst = (0..4u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(82_000 + k);
            let s1 = sampler::chain_sample(&c1, LONG, &mut rng).unwrap();
            let y1: Vec<u8> = s1.iter().map(|&s| c1.values()[s] as u8).collect();
            let f1 = path_forest("Y", &y1, None);
            let s2 = sampler::chain_sample(&chain2, LONG, &mut rng).unwrap();
            let y2: Vec<u8> = s2.iter().map(|&s| (s & 1) as u8).collect();
            let f2 = path_forest("Y", &y2, None);
            let rel = |v: f64, exact: f64| (v / exact - 1.0).abs();
            [
                rel(estimators::vhe_variance::<f64>(&f1, "Y").unwrap().variance, exact1),
                rel(estimators::vhe_hom_variance::<f64>(&f1, "Y", 2).unwrap().variance, exact1),
                rel(estimators::vhe_hom_variance::<f64>(&f2, "Y", 2).unwrap().variance, exact2),
                rel(estimators::vhe_hom_variance::<f64>(&f2, "Y", 3).unwrap().variance, exact2),
            ]
            .into_iter()
            .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    pass &= worst < 0.05;
    notes.push(format!("order-p worst relative error {:.2}% at S = {LONG}", 100.0 * worst));

    // Bootstrap on iid labels.
    let mut sbe_worst: f64 = 0.0;
    for (k, p) in [0.3, 0.5].into_iter().enumerate() {
        let mut rng = rng_for(83_000 + k as u64);
        let s = 1000;
        let ys: Vec<u8> = (0..s).map(|_| u8::from(rng.random::<f64>() < p)).collect();
        let f = path_forest("Y", &ys, None);
        let v = estimators::sbe_variance::<f64, _>(&f, "Y", 4000, &mut rng).unwrap().variance;
        sbe_worst = sbe_worst.max((v / (p * (1.0 - p) / s as f64) - 1.0).abs());
    }
    pass &= sbe_worst < 0.10;
    notes.push(format!("SBE vs p(1-p)/S off by {:.1}%", 100.0 * sbe_worst));

    // Coverage of an exactly calibrated normal estimator.
    let mut rng = rng_for(84);
    let (mu, sigma) = (0.3, 0.02);
    let normal = Normal::new(mu, sigma).unwrap();
    let reps: Vec<(f64, f64)> = (0..100_000).map(|_| (normal.sample(&mut rng), sigma * sigma)).collect();
    let coverage = harness::coverage_rate(&reps, mu, 1.96).unwrap();
    let band = 3.0 * (0.95 * 0.05 / 1e5f64).sqrt();
    pass &= (coverage - 0.95).abs() <= band;
    notes.push(format!("coverage {coverage:.4}"));

    // Byte-identical reports, also across thread counts.
    let identical = reports_identical();
    pass &= identical;
    notes.push(format!("reports identical: {identical}"));

    outcome(pass, notes.join("; "))
}

fn reports_identical() -> bool {
    let cfg = |threads| ExperimentConfig {
        networks: vec![NetworkConfig {
            name: "block".into(),
            source: NetworkSource::Block {
                spec: BlockModelSpec::new(250, 250, 250, 50),
            },
        }],
        replications: 40,
        bootstrap: 50,
        master_seed: 2024,
        threads,
        ..ExperimentConfig::default()
    };
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip([1, 1, 4]) {
        let c = cfg(threads);
        let report = harness::run_experiment(&c).unwrap();
        harness::write_reports(&report, &c, dir.path()).unwrap();
    }
    let files = [
        harness::SUMMARY_FILE,
        harness::STRATA_FILE,
        harness::REPLICATIONS_FILE,
        harness::MANIFEST_FILE,
    ];
    // The manifest records the config, thread count included, so it is
    // compared only between identical configs.
    let same = |a: usize, b: usize, name: &str| {
        fs::read(dirs[a].path().join(name)).unwrap() == fs::read(dirs[b].path().join(name)).unwrap()
    };
    files.iter().all(|name| same(0, 1, name))
        && files[..3].iter().all(|name| same(0, 2, name))
        && !fs::read(dirs[0].path().join(harness::SUMMARY_FILE)).unwrap().is_empty()
}

fn criterion_9() -> Outcome {
    let mut rng = rng_for(9);
    let exact = |g: &Graph| {
        estimate_node_independent_paths(g, usize::MAX, DyadSampling::WithoutReplacement, &mut rng_for(90))
            .unwrap()
    };
    let k4 = exact(&common::complete(4));
    let c4 = exact(&common::cycle(4));
    let p3 = exact(&common::path(3));
    let small = k4.mean == 3.0 && c4.mean == 2.0 && p3.mean == 1.0 && k4.exhaustive;

    let g = common::gnp(200, 0.05, &mut rng);
    let n = g.node_count();
    let all: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let g = &g;
            ((i + 1)..n).map(move |j| node_independent_paths(g, i, j) as f64)
        })
        .collect();
    let total = all.len();
    let truth = common::mean(&all);
    let spread = (all.iter().map(|x| (x - truth).powi(2)).sum::<f64>() / total as f64).sqrt();
    let dyads = 1000;
    let est = estimate_node_independent_paths(&g, dyads, DyadSampling::WithoutReplacement, &mut rng).unwrap();
    // Finite-population correction for sampling dyads without replacement.
    let fpc = ((total - dyads) as f64 / (total - 1) as f64).sqrt();
    let se = spread / (dyads as f64).sqrt() * fpc;
    let sampled_ok = (est.mean - truth).abs() <= 3.0 * se;
    outcome(
        small && sampled_ok,
        format!(
            "K4 {}, C4 {}, P3 {}; {n}-node graph: sampled {:.3} vs exhaustive {truth:.3} (3 SE = {:.3})",
            k4.mean,
            c4.mean,
            p3.mean,
            est.mean,
            3.0 * se
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (id, run) in criteria {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {id}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
