//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use kidney_exchange::graph::{generate_pair, CompatibilityGraph, Cycle, GeneratorConfig, KeyedCrossmatch};
use nalgebra::Vector3;
use rand::Rng;

/// Random digraph on `n` vertices (ids `0..n`) as an adjacency matrix.
pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, density: f64) -> Vec<Vec<bool>> {
    (0..n)
        .map(|u| (0..n).map(|v| u != v && rng.random::<f64>() < density).collect())
        .collect()
}

/// Every simple cycle of length `2..=max_len`, found by trying all vertex
/// sequences that start at their smallest vertex.
pub fn cycles_by_permutation(adj: &[Vec<bool>], max_len: usize) -> Vec<Vec<u64>> {
    fn extend(adj: &[Vec<bool>], path: &mut Vec<usize>, max_len: usize, out: &mut Vec<Vec<u64>>) {
        let last = *path.last().unwrap();
        if path.len() >= 2 && adj[last][path[0]] {
            out.push(path.iter().map(|&v| v as u64).collect());
        }
        if path.len() == max_len {
            return;
        }
        for next in path[0] + 1..adj.len() {
            if adj[last][next] && !path.contains(&next) {
                path.push(next);
                extend(adj, path, max_len, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    for start in 0..adj.len() {
        extend(adj, &mut vec![start], max_len, &mut out);
    }
    out.sort();
    out
}

/// Best `(cardinality, weight)` over all vertex-disjoint packings with
/// cardinality at least `floor`, plus the largest cardinality overall.
pub struct PackingOracle {
    pub max_cardinality: usize,
    pub best_weight: Option<f64>,
}

pub fn exhaustive_packings(cycles: &[Vec<u64>], weights: &[f64], floor: usize) -> PackingOracle {
    fn walk(
        i: usize,
        cycles: &[Vec<u64>],
        weights: &[f64],
        used: &mut Vec<u64>,
        weight: f64,
        floor: usize,
        out: &mut PackingOracle,
    ) {
        if i == cycles.len() {
            out.max_cardinality = out.max_cardinality.max(used.len());
            if used.len() >= floor && out.best_weight.is_none_or(|b| weight > b) {
                out.best_weight = Some(weight);
            }
            return;
        }
        walk(i + 1, cycles, weights, used, weight, floor, out);
        if cycles[i].iter().all(|v| !used.contains(v)) {
            let before = used.len();
            used.extend(&cycles[i]);
            walk(i + 1, cycles, weights, used, weight + weights[i], floor, out);
            used.truncate(before);
        }
    }
    let mut out = PackingOracle {
        max_cardinality: 0,
        best_weight: None,
    };
    walk(0, cycles, weights, &mut Vec::new(), 0.0, floor, &mut out);
    out
}

pub fn to_cycles(raw: &[Vec<u64>]) -> Vec<Cycle> {
    raw.iter().map(|c| Cycle::new(c.clone())).collect()
}

/// A freshly generated pool of `n` pairs with crossmatch, and a beta per pair.
pub fn random_pool<R: Rng>(
    rng: &mut R,
    n: u64,
    crossmatch_key: u64,
    beta_of: impl Fn(&mut R) -> Vector3<f64>,
) -> (CompatibilityGraph, BTreeMap<u64, Vector3<f64>>) {
    let config = GeneratorConfig::default();
    let mut graph = CompatibilityGraph::with_crossmatch(true);
    let mut crossmatch = KeyedCrossmatch::new(crossmatch_key);
    let mut betas = BTreeMap::new();
    for id in 0..n {
        let pair = generate_pair(rng, &config, id, 0).unwrap();
        graph.add_pair(pair, &mut crossmatch).unwrap();
        betas.insert(id, beta_of(rng));
    }
    (graph, betas)
}
