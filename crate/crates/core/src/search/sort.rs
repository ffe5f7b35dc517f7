//! Non-dominated sorting and crowding distance under constrained domination.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Objective values (minimized) and constraint violation (0 = feasible).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objectives: Vec<f64>,
    pub violation: f64,
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.violation <= 0.0
    }
}

/// Plain Pareto dominance on objective vectors.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Feasible beats infeasible; two infeasible compare by violation; two feasible by dominance.
pub fn constrained_dominates(a: &Evaluation, b: &Evaluation) -> bool {
    match (a.feasible(), b.feasible()) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => dominates(&a.objectives, &b.objectives),
    }
}

/// Fronts of indices, best first. Indices inside a front are ascending.
pub fn non_dominated_sort(pop: &[Evaluation]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if constrained_dominates(&pop[i], &pop[j]) {
                dominated_by_me[i].push(j);
                count[j] += 1;
            } else if constrained_dominates(&pop[j], &pop[i]) {
                dominated_by_me[j].push(i);
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front` (same order). Extremes get infinity.
pub fn crowding_distance(pop: &[Evaluation], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = pop[front[0]].objectives.len();
    for k in 0..m {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            pop[front[a]].objectives[k]
                .total_cmp(&pop[front[b]].objectives[k])
                .then(a.cmp(&b))
        });
        let lo = pop[front[order[0]]].objectives[k];
        let hi = pop[front[order[n - 1]]].objectives[k];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..n - 1 {
                let prev = pop[front[order[w - 1]]].objectives[k];
                let next = pop[front[order[w + 1]]].objectives[k];
                dist[order[w]] += (next - prev) / (hi - lo);
            }
        }
    }
    dist
}

/// Rank and crowding of every individual.
pub fn rank_and_crowd(pop: &[Evaluation]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, front) in non_dominated_sort(pop).iter().enumerate() {
        for (&i, d) in front.iter().zip(crowding_distance(pop, front)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

/// Crowded-comparison order: lower rank first, then larger crowding.
pub fn crowded_cmp(rank: &[usize], crowd: &[f64], a: usize, b: usize) -> Ordering {
    rank[a]
        .cmp(&rank[b])
        .then_with(|| crowd[b].total_cmp(&crowd[a]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feas(o: &[f64]) -> Evaluation {
        Evaluation {
            objectives: o.to_vec(),
            violation: 0.0,
        }
    }

    /// Front index by repeated peeling of the undominated set.
    fn peel(pop: &[Evaluation]) -> Vec<Vec<usize>> {
        let mut left: Vec<usize> = (0..pop.len()).collect();
        let mut out = Vec::new();
        while !left.is_empty() {
            let front: Vec<usize> = left
                .iter()
                .copied()
                .filter(|&i| !left.iter().any(|&j| constrained_dominates(&pop[j], &pop[i])))
                .collect();
            left.retain(|i| !front.contains(i));
            out.push(front);
        }
        out
    }

    #[test]
    fn four_point_example() {
        let pop = [feas(&[1.0, 1.0]), feas(&[1.0, 2.0]), feas(&[2.0, 1.0]), feas(&[2.0, 2.0])];
        assert_eq!(non_dominated_sort(&pop), vec![vec![0], vec![1, 2], vec![3]]);
    }

    #[test]
    fn extremes_are_infinitely_crowded() {
        let pop = [feas(&[0.0, 3.0]), feas(&[1.0, 2.0]), feas(&[2.0, 1.0]), feas(&[3.0, 0.0])];
        let d = crowding_distance(&pop, &[0, 1, 2, 3]);
        assert!(d[0].is_infinite() && d[3].is_infinite());
        assert!((d[1] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn feasible_beats_infeasible() {
        let good = feas(&[9.0, 9.0]);
        let late = Evaluation {
            objectives: vec![0.0, 0.0],
            violation: 2.0,
        };
        let early = Evaluation {
            objectives: vec![0.0, 0.0],
            violation: 10.0,
        };
        assert!(constrained_dominates(&good, &late));
        assert!(constrained_dominates(&late, &early));
        assert!(!constrained_dominates(&early, &late));
    }

    proptest! {
        #[test]
        fn matches_peeling(pts in prop::collection::vec((0u8..5, 0u8..5, 0u8..3, prop::bool::ANY), 1..30)) {
            let pop: Vec<Evaluation> = pts
                .iter()
                .map(|(a, b, c, f)| Evaluation {
                    objectives: vec![*a as f64, *b as f64, *c as f64],
                    violation: if *f { 0.0 } else { (*a + *c) as f64 + 1.0 },
                })
                .collect();
            prop_assert_eq!(non_dominated_sort(&pop), peel(&pop));
        }
    }
}
