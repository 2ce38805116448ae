//! Exhaustive enumeration of the feasible assignment polytope.
//!
//! This is the reference oracle for the other solvers: it visits every
//! integer matrix satisfying both marginals, so it is only usable behind a
//! size guard. Besides the coherence maximum it also tracks the minimum
//! implied mistake count over *all* feasible matrices, which the optimal-H
//! figure is compared against in the validation experiments.

use crate::error::{Error, Result};
use crate::occupancy::{ClassSizes, InstanceSpec};

use super::{AssignmentMatrix, BoundResult, SolverKind};

/// Feasible-set size guard for the brute-force solver.
#[derive(Debug, Clone)]
pub struct BruteforceGuard {
    pub max_classes: u32,
    pub max_cell: u64,
    pub max_total: u64,
}

impl Default for BruteforceGuard {
    fn default() -> Self {
        BruteforceGuard {
            max_classes: 5,
            max_cell: 8,
            max_total: 24,
        }
    }
}

impl BruteforceGuard {
    pub fn admits(&self, spec: &InstanceSpec) -> bool {
        spec.reduced_class_count <= self.max_classes
            && spec.largest_cell() <= self.max_cell
            && spec.reduced_total() <= self.max_total
    }
}

/// Upper bound on the number of leaf matrices: product over cells of the
/// number of weak compositions of c_i into K parts.
fn enumeration_estimate(spec: &InstanceSpec) -> u128 {
    let k = spec.reduced_class_count as u128;
    let mut est: u128 = 1;
    for &c in &spec.reduced_cell_sizes {
        let mut comps: u128 = 1;
        // C(c + K - 1, K - 1)
        for j in 1..k {
            comps = comps.saturating_mul(c as u128 + j) / j;
        }
        est = est.saturating_mul(comps);
    }
    est
}

pub fn solve_bruteforce(spec: &InstanceSpec) -> Result<BoundResult> {
    solve_bruteforce_guarded(spec, &BruteforceGuard::default())
}

pub fn solve_bruteforce_guarded(
    spec: &InstanceSpec,
    guard: &BruteforceGuard,
) -> Result<BoundResult> {
    spec.validate()?;
    if !guard.admits(spec) {
        return Err(Error::GuardExceeded {
            reason: format!(
                "K_r={} (max {}), largest cell {} (max {}), total {} (max {})",
                spec.reduced_class_count,
                guard.max_classes,
                spec.largest_cell(),
                guard.max_cell,
                spec.reduced_total(),
                guard.max_total
            ),
            estimate: enumeration_estimate(spec),
        });
    }
    if spec.reduced_class_count == 0 {
        return Ok(BoundResult::empty(SolverKind::Bruteforce));
    }

    let k = spec.reduced_class_count as usize;
    let cells = &spec.reduced_cell_sizes;
    let mut caps: Vec<u64> = (0..k)
        .map(|class| spec.class_sizes.size_of(class as u32))
        .collect();
    let mut matrix = vec![vec![0u64; cells.len()]; k];

    let mut search = Search {
        cells,
        best: None,
        min_mistakes: u64::MAX,
        total: spec.reduced_total(),
    };
    search.visit_cell(0, &mut caps, &mut matrix);

    let (best_matrix, best_coherence) = search
        .best
        .expect("feasible set of a validated instance is never empty");
    let mut witness = AssignmentMatrix::new(
        spec.reduced_class_count,
        spec.class_sizes.clone(),
        cells.clone(),
    );
    for (class, row) in best_matrix.iter().enumerate() {
        for (position, &count) in row.iter().enumerate() {
            witness.add(class as u32, position, count);
        }
    }
    let mut result = BoundResult::from_witness(witness, SolverKind::Bruteforce, true);
    debug_assert_eq!(result.coherence, best_coherence);
    result.oracle_min_mistakes = Some(search.min_mistakes);
    Ok(result)
}

struct Search<'a> {
    cells: &'a [u64],
    /// Best matrix so far with its coherence; ties prefer the larger sum of
    /// row maxima (tightest mistake bound among optima), then the
    /// lexicographically smaller flattened matrix.
    best: Option<(Vec<Vec<u64>>, u64)>,
    min_mistakes: u64,
    total: u64,
}

impl Search<'_> {
    fn visit_cell(&mut self, cell: usize, caps: &mut Vec<u64>, matrix: &mut Vec<Vec<u64>>) {
        if cell == self.cells.len() {
            self.take_leaf(matrix);
            return;
        }
        self.compose(cell, 0, self.cells[cell], caps, matrix);
    }

    /// Distribute `remaining` samples of `cell` over classes `class..`.
    fn compose(
        &mut self,
        cell: usize,
        class: usize,
        remaining: u64,
        caps: &mut Vec<u64>,
        matrix: &mut Vec<Vec<u64>>,
    ) {
        let class_count = caps.len();
        if class == class_count - 1 {
            if remaining <= caps[class] {
                caps[class] -= remaining;
                matrix[class][cell] = remaining;
                self.visit_cell(cell + 1, caps, matrix);
                matrix[class][cell] = 0;
                caps[class] += remaining;
            }
            return;
        }
        let top = remaining.min(caps[class]);
        // Largest share first keeps the first-found optimum concentrated.
        for take in (0..=top).rev() {
            caps[class] -= take;
            matrix[class][cell] = take;
            self.compose(cell, class + 1, remaining - take, caps, matrix);
            matrix[class][cell] = 0;
            caps[class] += take;
        }
    }

    fn take_leaf(&mut self, matrix: &Vec<Vec<u64>>) {
        let mut coherence: u64 = 0;
        let mut covered: u64 = 0;
        for row in matrix {
            let mut row_max = 0u64;
            for &v in row {
                coherence += v * v;
                row_max = row_max.max(v);
            }
            covered += row_max;
        }
        let mistakes = self.total - covered;
        self.min_mistakes = self.min_mistakes.min(mistakes);

        let replace = match &self.best {
            None => true,
            Some((best_matrix, best_coherence)) => {
                if coherence != *best_coherence {
                    coherence > *best_coherence
                } else {
                    let best_covered: u64 = best_matrix
                        .iter()
                        .map(|row| row.iter().copied().max().unwrap_or(0))
                        .sum();
                    if covered != best_covered {
                        covered > best_covered
                    } else {
                        flat_less(matrix, best_matrix)
                    }
                }
            }
        };
        if replace {
            self.best = Some((matrix.clone(), coherence));
        }
    }
}

fn flat_less(a: &[Vec<u64>], b: &[Vec<u64>]) -> bool {
    for (ra, rb) in a.iter().zip(b) {
        for (va, vb) in ra.iter().zip(rb) {
            match va.cmp(vb) {
                std::cmp::Ordering::Less => return true,
                std::cmp::Ordering::Greater => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
    }
    false
}
