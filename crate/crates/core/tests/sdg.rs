use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthmia::data::{Dataset, Domain};
use synthmia::dp::DpParams;
use synthmia::marginals::MarginalTable;
use synthmia::sdg::{
    fit_mst, fit_privbayes, sample_bayes, sample_tree, tree_density, FittedModel, GeneratorConfig,
    GeneratorRegistry, Method, TreeModel,
};
use synthmia::structure::TreeStructure;

fn random_data(seed: u64, cards: &[usize], n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            let mut r: Vec<u32> = Vec::with_capacity(cards.len());
            for (i, &c) in cards.iter().enumerate() {
                let v = if i > 0 && rng.random::<f64>() < 0.6 {
                    r[i - 1] % c as u32
                } else {
                    rng.random_range(0..c as u32)
                };
                r.push(v);
            }
            r
        })
        .collect();
    Dataset::from_rows(Domain::from_cardinalities(cards).unwrap(), &rows).unwrap()
}

fn mst(eps: f64, seed: u64) -> GeneratorConfig {
    GeneratorConfig::new(Method::Mst, DpParams::new(eps, 1e-9, seed))
}

fn pb(eps: f64, seed: u64) -> GeneratorConfig {
    GeneratorConfig::new(Method::PrivBayes, DpParams::new(eps, 0.0, seed))
}

#[test]
fn spanning_tree_for_every_seed() {
    let ds = random_data(1, &[3, 2, 4, 2, 5, 3], 200);
    for seed in 0..1000 {
        let m = fit_mst(&ds, &mst(0.5, seed)).unwrap();
        // re-validating rejects cycles and missing nodes
        TreeStructure::new(6, m.structure().edges().iter().copied()).unwrap();
        assert!(m.ledger().unwrap().within_budget());
    }
}

#[test]
fn acyclic_network_for_every_seed() {
    let ds = random_data(2, &[3, 2, 4, 2, 5], 200);
    for seed in 0..1000 {
        let m = fit_privbayes(&ds, &pb(5.0, seed)).unwrap();
        let mut placed = HashSet::new();
        for (child, parents) in m.structure().order() {
            assert!(parents.iter().all(|p| placed.contains(p)));
            assert!(placed.insert(*child));
        }
        assert_eq!(placed.len(), 5);
        assert!(m.ledger().unwrap().within_budget());
    }
}

#[test]
fn tables_are_consistent_after_noise() {
    let ds = random_data(3, &[3, 4, 2, 3], 300);
    let m = fit_mst(&ds, &mst(0.3, 9)).unwrap();
    for (&(i, j), t) in m.structure().edges().iter().zip(m.edge_tables()) {
        for (node, axis) in [(i, 0), (j, 1)] {
            let projected = t.project(&[t.attrs()[axis]]).unwrap();
            for (a, b) in projected.probs().iter().zip(m.node_tables()[node].probs()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn sampled_pairs_match_edge_tables() {
    let ds = random_data(4, &[3, 4, 2], 500);
    let m = fit_mst(&ds, &mst(2.0, 1)).unwrap();
    let s = sample_tree(&m, 1_000_000, 7).unwrap();
    for (&(i, j), t) in m.structure().edges().iter().zip(m.edge_tables()) {
        let emp = MarginalTable::estimate(&s, &[i, j]).unwrap();
        let tv: f64 = 0.5 * emp.probs().iter().zip(t.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 0.01, "edge ({i}, {j}) tv {tv}");
    }
}

#[test]
fn sampling_is_seed_deterministic() {
    let ds = random_data(5, &[2, 3, 2], 100);
    let m = fit_mst(&ds, &mst(1.0, 0)).unwrap();
    assert_eq!(sample_tree(&m, 5000, 3).unwrap(), sample_tree(&m, 5000, 3).unwrap());
    let b = fit_privbayes(&ds, &pb(1.0, 0)).unwrap();
    assert_eq!(sample_bayes(&b, 5000, 3).unwrap(), sample_bayes(&b, 5000, 3).unwrap());
    assert_ne!(sample_bayes(&b, 5000, 3).unwrap(), sample_bayes(&b, 5000, 4).unwrap());
}

#[test]
fn fits_are_seed_deterministic() {
    let ds = random_data(6, &[3, 3, 2, 4], 300);
    assert_eq!(fit_mst(&ds, &mst(1.0, 5)).unwrap(), fit_mst(&ds, &mst(1.0, 5)).unwrap());
    assert_eq!(fit_privbayes(&ds, &pb(1.0, 5)).unwrap(), fit_privbayes(&ds, &pb(1.0, 5)).unwrap());
}

#[test]
fn three_node_binary_tree_normalizes() {
    let ds = random_data(7, &[2, 2, 2], 50);
    let t = TreeStructure::new(3, [(0, 1), (0, 2)]).unwrap();
    let m = TreeModel::from_data(&ds, &t, None).unwrap();
    let mut total = 0.0;
    for x in 0..8u32 {
        total += tree_density(&m, &[x & 1, (x >> 1) & 1, (x >> 2) & 1]).unwrap();
    }
    assert!((total - 1.0).abs() < 1e-9);
}

/// Chain 0 -> 1 -> ... -> 4, each value copied from the predecessor with
/// probability 0.9.
fn chain(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            let mut r = vec![rng.random_range(0..3u32)];
            for _ in 1..5 {
                let prev = *r.last().unwrap();
                r.push(if rng.random::<f64>() < 0.9 { prev } else { rng.random_range(0..3) });
            }
            r
        })
        .collect();
    Dataset::from_rows(Domain::from_cardinalities(&[3; 5]).unwrap(), &rows).unwrap()
}

#[test]
fn noiseless_network_respects_chain_ancestry() {
    let ds = chain(100_000, 1);
    let mut rooted = 0;
    for seed in 0..40 {
        let m = fit_privbayes(&ds, &pb(f64::INFINITY, seed)).unwrap();
        let order = m.structure().order();
        if order[0].0 != 0 {
            continue;
        }
        rooted += 1;
        for (child, parents) in order {
            assert!(parents.iter().all(|p| p < child), "{child} given {parents:?}");
        }
    }
    assert!(rooted > 0);
}

#[test]
fn single_parent_search_follows_chain_links() {
    let ds = chain(100_000, 2);
    for seed in 0..20 {
        let mut cfg = pb(f64::INFINITY, seed);
        cfg.max_parents = Some(1);
        let m = fit_privbayes(&ds, &cfg).unwrap();
        for (child, parents) in &m.structure().order()[1..] {
            assert_eq!(parents.len(), 1);
            assert_eq!(child.abs_diff(parents[0]), 1, "{child} given {parents:?}");
        }
    }
}

#[test]
fn registry_dispatches_by_name() {
    let reg = GeneratorRegistry::default();
    assert_eq!(reg.names().collect::<Vec<_>>(), vec!["mst", "privbayes"]);
    let ds = random_data(8, &[2, 3, 2], 100);
    let fitted = reg.get("privbayes").unwrap().fit(&ds, &pb(1.0, 0)).unwrap();
    assert_eq!(fitted.method(), Method::PrivBayes);
    let json = serde_json::to_string(&fitted).unwrap();
    assert!(json.contains("\"method\":\"privbayes\""));
    assert_eq!(serde_json::from_str::<FittedModel>(&json).unwrap(), fitted);
    assert!(reg.get("ctgan").is_err());
}

#[test]
fn noiseless_model_serializes_infinite_epsilon() {
    let ds = random_data(9, &[2, 3], 50);
    let m = FittedModel::Tree(fit_mst(&ds, &mst(f64::INFINITY, 0)).unwrap());
    let json = serde_json::to_string(&m).unwrap();
    assert!(json.contains("\"inf\""));
    assert_eq!(serde_json::from_str::<FittedModel>(&json).unwrap(), m);
}
