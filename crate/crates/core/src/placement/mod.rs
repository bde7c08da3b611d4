//! Cardinality-constrained max-det selection over per-candidate covariances.

mod mads;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ecc::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::netmodel::BusId;

pub use mads::{solve_mads, MadsConfig, MadsStart};

/// Relative eigenvalue floor below which a sum is treated as singular.
pub const SINGULAR_FLOOR: f64 = 1e-12;
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementProblem {
    /// Sorted ascending.
    pub candidate_ids: Vec<BusId>,
    pub covariances: Vec<CovarianceMatrix>,
    pub v: usize,
    ridge: f64,
}

impl PlacementProblem {
    /// Pairs are sorted by bus id.
    pub fn new(mut entries: Vec<(BusId, CovarianceMatrix)>, v: usize) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("duplicate candidate in placement problem".into()));
        }
        let l = entries.len();
        if v == 0 || v > l {
            return Err(Error::InvalidInput(format!("need 1 <= v <= L, got v = {v}, L = {l}")));
        }
        let index = &entries[0].1.bus_index;
        if entries.iter().any(|e| &e.1.bus_index != index) {
            return Err(Error::InvalidInput("covariances use different bus indices".into()));
        }
        let dim = index.len();
        let mean_diag = entries.iter().map(|e| e.1.trace()).sum::<f64>() / (dim.max(1) as f64);
        let ridge = if mean_diag > 0.0 { 1e-9 * mean_diag } else { 1e-300 };
        let (candidate_ids, covariances) = entries.into_iter().unzip();
        Ok(PlacementProblem { candidate_ids, covariances, v, ridge })
    }

    pub fn l(&self) -> usize {
        self.candidate_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.covariances[0].dim()
    }

    fn sum(&self, selection: &[usize]) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for &i in selection {
            m += &self.covariances[i].matrix;
        }
        (&m + m.transpose()) * 0.5
    }

    /// −log det Σ W_i over candidate positions; +∞ when singular or empty.
    pub fn objective_idx(&self, selection: &[usize]) -> f64 {
        if selection.is_empty() {
            return f64::INFINITY;
        }
        neg_log_det(&self.sum(selection))
    }

    /// −log det(Σ W_i + εI) with a small ridge; finite, used to order
    /// selections that are all singular.
    pub fn regularized_idx(&self, selection: &[usize]) -> f64 {
        let mut m = self.sum(selection);
        for k in 0..m.nrows() {
            m[(k, k)] += self.ridge;
        }
        -m.symmetric_eigenvalues().iter().map(|l| l.max(f64::MIN_POSITIVE).ln()).sum::<f64>()
    }

    pub fn positions(&self, ids: &[BusId]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|b| {
                self.candidate_ids
                    .binary_search(b)
                    .map_err(|_| Error::InvalidInput(format!("bus {b} is not a candidate")))
            })
            .collect()
    }

    pub fn ids(&self, positions: &[usize]) -> Vec<BusId> {
        let mut ids: Vec<BusId> = positions.iter().map(|&i| self.candidate_ids[i]).collect();
        ids.sort_unstable();
        ids
    }
}

/// −Σ log λ_i of a symmetric matrix; +∞ if λ_min ≤ 1e-12·λ_max or λ_max ≤ 0.
pub fn neg_log_det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let ev = m.clone().symmetric_eigenvalues();
    let hi = ev.max();
    let lo = ev.min();
    if !(hi > 0.0) || lo <= SINGULAR_FLOOR * hi {
        return f64::INFINITY;
    }
    -ev.iter().map(|l| l.ln()).sum::<f64>()
}

/// −log det of the covariance sum for a set of candidate bus ids.
pub fn objective(selection: &[BusId], problem: &PlacementProblem) -> Result<f64> {
    let pos = problem.positions(selection)?;
    Ok(problem.objective_idx(&pos))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Exhaustive,
    Greedy,
    Mads,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub evaluations: usize,
    pub event: String,
    #[serde(with = "extended_real")]
    pub objective: f64,
    pub selected: Vec<BusId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSolution {
    pub selected: Vec<BusId>,
    #[serde(with = "extended_real")]
    pub objective: f64,
    pub solver: Solver,
    pub evaluations: usize,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceEntry>>,
}

/// JSON has no infinity; +∞ is written as the string "inf".
pub mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad extended real {other:?}"))),
            },
        }
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Advances `c` to the next k-combination of 0..n in lexicographic order.
pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Global optimum by enumeration; ties go to the lexicographically smallest set.
pub fn solve_exhaustive(problem: &PlacementProblem) -> Result<PlacementSolution> {
    let (l, v) = (problem.l(), problem.v);
    let count = binomial(l, v);
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::TooManyCombinations { count, limit: EXHAUSTIVE_LIMIT });
    }
    let mut comb: Vec<usize> = (0..v).collect();
    let mut best = comb.clone();
    let mut best_f = problem.objective_idx(&comb);
    let mut evaluations = 1;
    while next_combination(&mut comb, l) {
        let f = problem.objective_idx(&comb);
        evaluations += 1;
        if f < best_f {
            best_f = f;
            best.copy_from_slice(&comb);
        }
    }
    Ok(PlacementSolution {
        selected: problem.ids(&best),
        objective: best_f,
        solver: Solver::Exhaustive,
        evaluations,
        seed: None,
        trace: None,
    })
}

pub(crate) fn greedy_positions(problem: &PlacementProblem) -> (Vec<usize>, usize) {
    let mut chosen: Vec<usize> = Vec::with_capacity(problem.v);
    let mut evaluations = 0;
    while chosen.len() < problem.v {
        let mut best: Option<(f64, f64, usize)> = None;
        for i in 0..problem.l() {
            if chosen.contains(&i) {
                continue;
            }
            let mut trial = chosen.clone();
            trial.push(i);
            let key = (problem.objective_idx(&trial), problem.regularized_idx(&trial), i);
            evaluations += 1;
            let better = match best {
                None => true,
                Some(b) => key.0.total_cmp(&b.0).then(key.1.total_cmp(&b.1)).then(key.2.cmp(&b.2)).is_lt(),
            };
            if better {
                best = Some(key);
            }
        }
        chosen.push(best.expect("v <= L").2);
    }
    chosen.sort_unstable();
    (chosen, evaluations)
}

/// Adds one candidate at a time, each time the one with the lowest
/// objective. While every partial sum is singular the ridge-regularized
/// value decides, then the bus id.
pub fn solve_greedy(problem: &PlacementProblem) -> Result<PlacementSolution> {
    let (chosen, evaluations) = greedy_positions(problem);
    Ok(PlacementSolution {
        selected: problem.ids(&chosen),
        objective: problem.objective_idx(&chosen),
        solver: Solver::Greedy,
        evaluations,
        seed: None,
        trace: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cov(m: DMatrix<f64>) -> CovarianceMatrix {
        CovarianceMatrix { bus_index: (1..=m.nrows() as u32).collect(), matrix: m }
    }

    fn diag(v: &[f64]) -> CovarianceMatrix {
        cov(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v)))
    }

    #[test]
    fn rank_deficiency() {
        let p = PlacementProblem::new(vec![(1, diag(&[1.0, 0.0])), (2, diag(&[0.0, 1.0]))], 1).unwrap();
        assert_eq!(objective(&[1, 2], &p).unwrap(), 0.0);
        assert_eq!(objective(&[1], &p).unwrap(), f64::INFINITY);
        assert_eq!(objective(&[], &p).unwrap(), f64::INFINITY);
    }

    #[test]
    fn diagonal_determinants() {
        let p = PlacementProblem::new(vec![(4, diag(&[1.0, 1.0, 1.0])), (5, diag(&[2.0, 2.0, 2.0]))], 1).unwrap();
        assert_eq!(objective(&[4], &p).unwrap(), 0.0);
        assert!((objective(&[5], &p).unwrap() + 3.0 * 2f64.ln()).abs() < 1e-14);
        assert!(objective(&[9], &p).is_err());
    }

    #[test]
    fn exhaustive_trivial_cases() {
        let ws = vec![(1, diag(&[1.0, 0.5])), (2, diag(&[3.0, 0.2])), (3, diag(&[0.1, 2.0]))];
        let full = solve_exhaustive(&PlacementProblem::new(ws.clone(), 3).unwrap()).unwrap();
        assert_eq!(full.selected, vec![1, 2, 3]);
        let single = solve_exhaustive(&PlacementProblem::new(ws.clone(), 1).unwrap()).unwrap();
        let p = PlacementProblem::new(ws, 1).unwrap();
        let scan = [1, 2, 3].map(|b| objective(&[b], &p).unwrap());
        let best = scan.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(single.objective, best);
    }

    #[test]
    fn exhaustive_ties_are_lexicographic() {
        let ws = vec![(7, diag(&[1.0, 1.0])), (3, diag(&[1.0, 1.0])), (5, diag(&[1.0, 1.0]))];
        let s = solve_exhaustive(&PlacementProblem::new(ws, 2).unwrap()).unwrap();
        assert_eq!(s.selected, vec![3, 5]);
    }

    #[test]
    fn guard_rejects_large_enumeration() {
        let ws: Vec<_> = (0..40).map(|i| (i, diag(&[1.0]))).collect();
        let p = PlacementProblem::new(ws, 20).unwrap();
        assert!(matches!(solve_exhaustive(&p), Err(Error::TooManyCombinations { .. })));
    }

    #[test]
    fn greedy_finds_basis() {
        let ws: Vec<_> = (0..4)
            .map(|i| {
                let mut d = [0.0; 4];
                d[i] = 1.0;
                (i as u32 + 1, diag(&d))
            })
            .collect();
        let s = solve_greedy(&PlacementProblem::new(ws, 4).unwrap()).unwrap();
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn invalid_problems() {
        assert!(PlacementProblem::new(vec![(1, diag(&[1.0]))], 2).is_err());
        assert!(PlacementProblem::new(vec![(1, diag(&[1.0]))], 0).is_err());
        assert!(PlacementProblem::new(vec![(1, diag(&[1.0])), (2, diag(&[1.0, 1.0]))], 1).is_err());
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn infinite_objective_round_trips() {
        let s = PlacementSolution {
            selected: vec![1],
            objective: f64::INFINITY,
            solver: Solver::Greedy,
            evaluations: 1,
            seed: None,
            trace: None,
        };
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"inf\""));
        let back: PlacementSolution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
