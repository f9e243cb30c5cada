//! Exact clearing of a cycle set.
//!
//! Both programs are solved by one branch-and-bound over cycle activations:
//!
//! - maximum cardinality: maximize the number of covered vertices;
//! - weighted with a floor: maximize total cycle weight among vertex-disjoint
//!   cycle sets that cover at least `Q` vertices.
//!
//! The search branches on a vertex: each available cycle through it, or leave it
//! uncovered. A node is pruned when the vertices still coverable cannot reach the
//! floor, when a cheap fractional bound (every coverable vertex earns the best
//! per-vertex share `w_c / |c|` of any cycle through it) cannot beat the
//! incumbent, or when the linear relaxation of the remaining program (floor row
//! included) is infeasible or cannot beat it.
//!
//! Ties are broken by adding a seeded perturbation in `[0, eps)` to each cycle's
//! objective, `eps = 1e-7 * (1 + max |w_c|)`. Reported weights never include it.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Cycle;
use crate::lp::{maximize, LpOutcome, Row};
use crate::rng::Stream;

/// Largest cycle set [`brute_force_clear`] accepts.
pub const BRUTE_FORCE_CAP: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedCycleSet {
    cycles: Vec<Cycle>,
    weights: Vec<f64>,
}

impl WeightedCycleSet {
    /// Weights each cycle by the sum of `edge_weight(donor, recipient)` over its donations.
    pub fn new(cycles: Vec<Cycle>, mut edge_weight: impl FnMut(u64, u64) -> f64) -> Self {
        let weights = cycles
            .iter()
            .map(|c| c.edges().map(|(u, v)| edge_weight(u, v)).sum())
            .collect();
        WeightedCycleSet { cycles, weights }
    }

    /// Unit edge weights: each cycle is worth its length.
    pub fn unit(cycles: Vec<Cycle>) -> Self {
        Self::new(cycles, |_, _| 1.0)
    }

    pub fn from_cycle_weights(cycles: Vec<Cycle>, weights: Vec<f64>) -> Result<Self> {
        if cycles.len() != weights.len() {
            return Err(Error::Domain(format!(
                "{} cycles but {} weights",
                cycles.len(),
                weights.len()
            )));
        }
        Ok(WeightedCycleSet { cycles, weights })
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn cycles(&self) -> &[Cycle] {
        &self.cycles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn size(&self, i: usize) -> usize {
        self.cycles[i].len()
    }

    /// Debug dump: a `# Q=<q>` header, then `cycle_id,v1 v2 ..,weight` per cycle.
    pub fn dump<W: Write>(&self, q: usize, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# Q={q}")?;
        writeln!(out, "cycle_id,vertices,weight")?;
        for (i, (c, w)) in self.cycles.iter().zip(&self.weights).enumerate() {
            let vs: Vec<String> = c.vertices().iter().map(u64::to_string).collect();
            writeln!(out, "{i},{},{w}", vs.join(" "))?;
        }
        Ok(())
    }

    fn matching(&self, mut ids: Vec<usize>) -> Matching {
        ids.sort_unstable();
        Matching {
            cycles: ids.iter().map(|&i| self.cycles[i].clone()).collect(),
            cardinality: ids.iter().map(|&i| self.size(i)).sum(),
            total_weight: ids.iter().map(|&i| self.weights[i]).sum(),
            cycle_ids: ids,
        }
    }
}

/// A set of vertex-disjoint cycles.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub cycles: Vec<Cycle>,
    /// Positions of the chosen cycles in the source set, ascending.
    pub cycle_ids: Vec<usize>,
    /// Number of vertices covered.
    pub cardinality: usize,
    pub total_weight: f64,
}

impl Matching {
    pub fn empty() -> Self {
        Matching {
            cycles: Vec::new(),
            cycle_ids: Vec::new(),
            cardinality: 0,
            total_weight: 0.0,
        }
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.cycles.iter().flat_map(|c| c.vertices()).all(|v| seen.insert(*v))
    }

    pub fn covered(&self) -> impl Iterator<Item = u64> + '_ {
        self.cycles.iter().flat_map(|c| c.vertices().iter().copied())
    }

    pub fn donations(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.cycles.iter().flat_map(Cycle::edges)
    }
}

fn tie_perturbation(values: &[f64], seed: u64) -> Vec<f64> {
    let max_abs = values.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let eps = 1e-7 * (1.0 + max_abs);
    let mut rng = Stream::Ties.rng(seed);
    values.iter().map(|_| rng.random::<f64>() * eps).collect()
}

/// Maximum-cardinality clearing; returns the matching and `Q`, its cardinality.
/// Co-optimal matchings are chosen between at random under `seed`.
pub fn solve_max_cardinality(cycles: &WeightedCycleSet, seed: u64) -> (Matching, usize) {
    let sizes: Vec<f64> = (0..cycles.len()).map(|i| cycles.size(i) as f64).collect();
    let noise = tie_perturbation(&sizes, seed);
    let objective: Vec<f64> = sizes.iter().zip(&noise).map(|(s, e)| s + e).collect();
    let chosen = BranchAndBound::new(cycles, &objective, 0)
        .solve()
        .expect("the empty matching satisfies a zero floor");
    let m = cycles.matching(chosen);
    let q = m.cardinality;
    (m, q)
}

/// Weighted clearing subject to covering at least `floor` vertices.
pub fn solve_weighted_with_floor(cycles: &WeightedCycleSet, floor: usize, seed: u64) -> Result<Matching> {
    if let Some(w) = cycles.weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::Domain(format!("cycle weight {w} is not finite")));
    }
    let noise = tie_perturbation(&cycles.weights, seed);
    let objective: Vec<f64> = cycles.weights.iter().zip(&noise).map(|(w, e)| w + e).collect();
    match BranchAndBound::new(cycles, &objective, floor).solve() {
        Some(chosen) => Ok(cycles.matching(chosen)),
        None => {
            let (_, best) = solve_max_cardinality(cycles, seed);
            Err(Error::Infeasible { floor, best })
        }
    }
}

/// Exhaustive reference solver over all subsets of at most [`BRUTE_FORCE_CAP`]
/// cycles. Ties go to the lexicographically smallest sorted cycle-id list.
pub fn brute_force_clear(cycles: &WeightedCycleSet, floor: usize) -> Result<Matching> {
    let n = cycles.len();
    if n > BRUTE_FORCE_CAP {
        return Err(Error::TooManyCycles {
            count: n,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut best_card = 0;
    for mask in 0u32..(1u32 << n) {
        let ids: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let mut seen = std::collections::BTreeSet::new();
        let disjoint = ids
            .iter()
            .flat_map(|&i| cycles.cycles[i].vertices())
            .all(|v| seen.insert(*v));
        if !disjoint {
            continue;
        }
        let card = seen.len();
        best_card = best_card.max(card);
        if card < floor {
            continue;
        }
        let weight: f64 = ids.iter().map(|&i| cycles.weights[i]).sum();
        let better = match &best {
            None => true,
            Some((bw, bids)) => weight > *bw || (weight == *bw && ids < *bids),
        };
        if better {
            best = Some((weight, ids));
        }
    }
    best.map(|(_, ids)| cycles.matching(ids))
        .ok_or(Error::Infeasible {
            floor,
            best: best_card,
        })
}

struct BranchAndBound<'a> {
    // cycle -> dense vertex indices
    members: Vec<Vec<usize>>,
    sizes: Vec<usize>,
    objective: &'a [f64],
    floor: usize,
    nv: usize,
    used: Vec<bool>,
    chosen: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl<'a> BranchAndBound<'a> {
    fn new(set: &WeightedCycleSet, objective: &'a [f64], floor: usize) -> Self {
        let mut index = BTreeMap::new();
        let members: Vec<Vec<usize>> = set
            .cycles
            .iter()
            .map(|c| {
                c.vertices()
                    .iter()
                    .map(|v| {
                        let next = index.len();
                        *index.entry(*v).or_insert(next)
                    })
                    .collect()
            })
            .collect();
        let nv = index.len();
        BranchAndBound {
            sizes: members.iter().map(Vec::len).collect(),
            members,
            objective,
            floor,
            nv,
            used: vec![false; nv],
            chosen: Vec::new(),
            best: None,
        }
    }

    fn solve(mut self) -> Option<Vec<usize>> {
        let all: Vec<usize> = (0..self.members.len()).collect();
        self.search(&all, 0.0, 0);
        self.best.map(|(_, ids)| ids)
    }

    fn improves(&self, bound: f64) -> bool {
        match &self.best {
            None => true,
            Some((best, _)) => bound > best + 1e-12 * (1.0 + best.abs()),
        }
    }

    /// Whether the linear relaxation over `available` can still reach the
    /// floor and beat the incumbent.
    fn relaxation_admits(&self, available: &[usize], value: f64, card: usize) -> bool {
        let mut row_of = vec![usize::MAX; self.nv];
        let mut rows: Vec<Row> = Vec::new();
        for (k, &c) in available.iter().enumerate() {
            for &v in &self.members[c] {
                if row_of[v] == usize::MAX {
                    row_of[v] = rows.len();
                    rows.push(Row {
                        coeffs: Vec::new(),
                        rhs: 1.0,
                    });
                }
                rows[row_of[v]].coeffs.push((k, 1.0));
            }
        }
        let need = self.floor.saturating_sub(card);
        if need > 0 {
            rows.push(Row {
                coeffs: available.iter().enumerate().map(|(k, &c)| (k, -(self.sizes[c] as f64))).collect(),
                rhs: -(need as f64),
            });
        }
        let objective: Vec<f64> = available.iter().map(|&c| self.objective[c]).collect();
        match maximize(&objective, &rows) {
            LpOutcome::Infeasible => false,
            LpOutcome::Optimal(lp) => self.improves(value + lp + 1e-9 * (1.0 + lp.abs())),
        }
    }

    fn search(&mut self, available: &[usize], value: f64, card: usize) {
        // per-vertex count of available cycles and best share of the objective
        let mut count = vec![0u32; self.nv];
        let mut share = vec![f64::NEG_INFINITY; self.nv];
        for &c in available {
            let s = self.objective[c] / self.sizes[c] as f64;
            for &v in &self.members[c] {
                count[v] += 1;
                if s > share[v] {
                    share[v] = s;
                }
            }
        }
        let mut coverable = 0;
        let mut bound = value;
        let mut pivot = None;
        for v in 0..self.nv {
            if count[v] > 0 {
                coverable += 1;
                bound += share[v].max(0.0);
                if pivot.is_none_or(|p: usize| count[v] > count[p]) {
                    pivot = Some(v);
                }
            }
        }
        if card + coverable < self.floor || !self.improves(bound) {
            return;
        }
        if available.len() > 1 && !self.relaxation_admits(available, value, card) {
            return;
        }
        let Some(pivot) = pivot else {
            // leaf: nothing more can be added
            if card >= self.floor && self.improves(value) {
                self.best = Some((value, self.chosen.clone()));
            }
            return;
        };

        let mut through: Vec<usize> = available
            .iter()
            .copied()
            .filter(|&c| self.members[c].contains(&pivot))
            .collect();
        through.sort_by(|&a, &b| self.objective[b].total_cmp(&self.objective[a]).then(a.cmp(&b)));

        for &c in &through {
            // cheap bound: parent shares are valid upper bounds inside the child
            let removed: f64 = self.members[c].iter().map(|&v| share[v].max(0.0)).sum();
            if !self.improves(bound - removed + self.objective[c]) {
                continue;
            }
            for &v in &self.members[c] {
                self.used[v] = true;
            }
            let rest: Vec<usize> = available
                .iter()
                .copied()
                .filter(|&d| !self.members[d].iter().any(|&v| self.used[v]))
                .collect();
            self.chosen.push(c);
            self.search(&rest, value + self.objective[c], card + self.sizes[c]);
            self.chosen.pop();
            for &v in &self.members[c] {
                self.used[v] = false;
            }
        }

        // leave the pivot uncovered
        let rest: Vec<usize> = available
            .iter()
            .copied()
            .filter(|&d| !self.members[d].contains(&pivot))
            .collect();
        self.search(&rest, value, card);
    }
}
