//! Largest-first greedy approximation.
//!
//! Cells are processed in descending size order; each goes to the class
//! with the most remaining capacity, splitting across classes when it
//! does not fit. Sorting uses a counting sort keyed by cell size and the
//! capacity tracker is a bucket array whose cursor only moves down, so
//! the whole pass is linear in the number of samples.

use crate::error::{Error, Result};
use crate::occupancy::{ClassSizes, InstanceSpec};

use super::{AssignmentMatrix, BoundResult, SolverKind};

pub fn solve_greedy(spec: &InstanceSpec) -> Result<BoundResult> {
    spec.validate()?;
    let s = match &spec.class_sizes {
        ClassSizes::Uniform(s) => *s,
        ClassSizes::PerClass(_) => return Err(Error::PerClassUnsupported { solver: "greedy" }),
    };
    if spec.reduced_class_count == 0 {
        return Ok(BoundResult::empty(SolverKind::Greedy));
    }

    let cells = &spec.reduced_cell_sizes;
    let order = sort_positions_desc(cells);
    let mut capacities = CapacityBuckets::new(spec.reduced_class_count, s);
    let mut witness = AssignmentMatrix::new(
        spec.reduced_class_count,
        spec.class_sizes.clone(),
        cells.clone(),
    );

    for position in order {
        let mut left = cells[position];
        while left > 0 {
            let (class, cap) = capacities.pop_max().ok_or(Error::Infeasible {
                cells_total: cells.iter().sum(),
                class_total: spec.reduced_total(),
            })?;
            let take = left.min(cap);
            witness.add(class, position, take);
            left -= take;
            if cap > take {
                capacities.push(class, cap - take);
            }
        }
    }

    let exact = spec.reduced_total() == 0;
    Ok(BoundResult::from_witness(witness, SolverKind::Greedy, exact))
}

/// Positions of `sizes` in descending size order, ties by position.
/// Counting sort when the value range is dense enough, comparison sort as
/// the fallback for sparse ranges.
pub(crate) fn sort_positions_desc(sizes: &[u64]) -> Vec<usize> {
    let max = sizes.iter().copied().max().unwrap_or(0);
    if max as usize <= sizes.len().saturating_mul(16).max(1024) {
        counting_sort_positions_desc(sizes, max)
    } else {
        comparison_sort_positions_desc(sizes)
    }
}

pub(crate) fn counting_sort_positions_desc(sizes: &[u64], max: u64) -> Vec<usize> {
    let mut counts = vec![0usize; max as usize + 2];
    for &size in sizes {
        counts[size as usize + 1] += 1;
    }
    // Offsets for descending order: bucket for size v starts after all
    // larger sizes.
    let mut offsets = vec![0usize; max as usize + 1];
    let mut running = 0usize;
    for v in (0..=max as usize).rev() {
        offsets[v] = running;
        running += counts[v + 1];
    }
    let mut out = vec![0usize; sizes.len()];
    let mut cursor = offsets;
    for (position, &size) in sizes.iter().enumerate() {
        out[cursor[size as usize]] = position;
        cursor[size as usize] += 1;
    }
    out
}

pub(crate) fn comparison_sort_positions_desc(sizes: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    order
}

/// Classes bucketed by remaining capacity. The max cursor never moves up,
/// so all pops are amortized constant time.
struct CapacityBuckets {
    buckets: Vec<Vec<u32>>,
    cursor: usize,
}

impl CapacityBuckets {
    fn new(class_count: u32, class_size: u64) -> Self {
        let cap = class_size as usize;
        let mut buckets = vec![Vec::new(); cap + 1];
        buckets[cap] = (0..class_count).rev().collect();
        CapacityBuckets {
            buckets,
            cursor: cap,
        }
    }

    fn pop_max(&mut self) -> Option<(u32, u64)> {
        loop {
            if let Some(class) = self.buckets[self.cursor].pop() {
                return Some((class, self.cursor as u64));
            }
            if self.cursor == 0 {
                return None;
            }
            self.cursor -= 1;
        }
    }

    fn push(&mut self, class: u32, capacity: u64) {
        // Re-inserted capacities are below the current cursor by
        // construction (take > 0).
        self.buckets[capacity as usize].push(class);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::solve_bruteforce;
    use crate::occupancy::InstanceSpec;

    fn uniform(cells: &[u64], k: u32, s: u64) -> InstanceSpec {
        InstanceSpec::from_cells(cells.to_vec(), k, s).unwrap()
    }

    #[test]
    fn splits_leftover_cell() {
        // 4 -> A whole, 3 -> B, 3 -> C, and the 2-cell splits 1+1 into B, C.
        let spec = uniform(&[4, 3, 3, 2], 3, 4);
        let result = solve_greedy(&spec).unwrap();
        assert_eq!(result.coherence, 16 + 9 + 1 + 9 + 1);
        assert!(!result.exact);
        result.witness.validate().unwrap();
        // Optimal on this instance.
        let oracle = solve_bruteforce(&spec).unwrap();
        assert_eq!(result.coherence, oracle.coherence);
    }

    #[test]
    fn perfect_cells_score_full() {
        let spec = uniform(&[3, 3, 3, 3], 4, 3);
        let result = solve_greedy(&spec).unwrap();
        assert_eq!(result.coherence, 4 * 9);
        assert_eq!(result.mistake_bound, 0);
    }

    #[test]
    fn matches_oracle_on_split_cell() {
        let spec = uniform(&[3, 1], 2, 2);
        let result = solve_greedy(&spec).unwrap();
        assert_eq!(result.coherence, 6);
    }

    #[test]
    fn rejects_infeasible_totals() {
        assert!(InstanceSpec::from_cells(vec![3, 1], 2, 3).is_err());
    }

    #[test]
    fn sort_fallback_agrees_with_counting() {
        let sizes = vec![4, 1, 9, 4, 0, 7, 4];
        let max = 9;
        assert_eq!(
            counting_sort_positions_desc(&sizes, max),
            comparison_sort_positions_desc(&sizes)
        );
        let sparse = vec![1_000_000, 3, 1_000_000, 12];
        assert_eq!(
            sort_positions_desc(&sparse),
            comparison_sort_positions_desc(&sparse)
        );
    }
}
