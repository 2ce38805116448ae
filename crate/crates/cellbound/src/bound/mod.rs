//! Solvers for the cell-coherence maximization and the mistake lower bound.
//!
//! Given cell sizes c_i and class size S, the coherence of an assignment
//! H (classes x cells, row sums S, column sums c_i) is the sum of squared
//! entries; it counts same-class pairs that land in the same cell. The
//! maximum over all feasible integer H is the bound's objective. From an
//! optimal H we read phi* (each class's heaviest cell) and the mistake
//! lower bound: samples the best explanation still places outside their
//! class's phi* cell.

mod bruteforce;
mod dp;
mod greedy;

pub use bruteforce::{solve_bruteforce, solve_bruteforce_guarded, BruteforceGuard};
pub use dp::{dp_memory_estimate, solve_exact_dp};
pub use greedy::solve_greedy;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::occupancy::{reduce_table, CellIndex, ClassSizes, InstanceSpec, OccupancyTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Bruteforce,
    ExactDp,
    Greedy,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverKind::Bruteforce => write!(f, "bruteforce"),
            SolverKind::ExactDp => write!(f, "exact_dp"),
            SolverKind::Greedy => write!(f, "greedy"),
        }
    }
}

/// Sparse integer matrix H: (class, cell position) -> count, together with
/// the marginals it must satisfy. Entries of zero are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMatrix {
    pub class_count: u32,
    pub class_sizes: ClassSizes,
    pub cell_sizes: Vec<u64>,
    entries: BTreeMap<(u32, usize), u64>,
}

impl AssignmentMatrix {
    pub fn new(class_count: u32, class_sizes: ClassSizes, cell_sizes: Vec<u64>) -> Self {
        Self {
            class_count,
            class_sizes,
            cell_sizes,
            entries: BTreeMap::new(),
        }
    }

    /// Add `count` samples of `class` to the cell at `position`.
    pub fn add(&mut self, class: u32, position: usize, count: u64) {
        if count == 0 {
            return;
        }
        *self.entries.entry((class, position)).or_insert(0) += count;
    }

    pub fn get(&self, class: u32, position: usize) -> u64 {
        self.entries.get(&(class, position)).copied().unwrap_or(0)
    }

    /// Entries sorted by (class, cell position).
    pub fn iter(&self) -> impl Iterator<Item = (u32, usize, u64)> + '_ {
        self.entries.iter().map(|(&(k, i), &v)| (k, i, v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Check both marginals exactly, naming the first violation.
    pub fn validate(&self) -> Result<()> {
        let mut row = vec![0u64; self.class_count as usize];
        let mut col = vec![0u64; self.cell_sizes.len()];
        for (&(class, position), &count) in &self.entries {
            if class >= self.class_count || position >= self.cell_sizes.len() {
                return Err(Error::InvalidParameter(format!(
                    "entry ({class},{position}) outside a {}x{} matrix",
                    self.class_count,
                    self.cell_sizes.len()
                )));
            }
            row[class as usize] += count;
            col[position] += count;
        }
        for (k, &sum) in row.iter().enumerate() {
            let expected = self.class_sizes.size_of(k as u32);
            if sum != expected {
                return Err(Error::RowMarginal {
                    class: k as u32,
                    found: sum,
                    expected,
                });
            }
        }
        for (i, &sum) in col.iter().enumerate() {
            if sum != self.cell_sizes[i] {
                return Err(Error::ColumnMarginal {
                    cell: i,
                    found: sum,
                    expected: self.cell_sizes[i],
                });
            }
        }
        Ok(())
    }

    /// Per-class (argmax position, max entry); ties take the earliest
    /// position. Classes with no entries report (0, 0).
    pub fn row_maxima(&self) -> Vec<(usize, u64)> {
        let mut best = vec![(0usize, 0u64); self.class_count as usize];
        for (&(class, position), &count) in &self.entries {
            let slot = &mut best[class as usize];
            if count > slot.1 || (count == slot.1 && count > 0 && position < slot.0) {
                *slot = (position, count);
            }
        }
        best
    }

    pub fn sum_of_row_maxima(&self) -> u64 {
        self.row_maxima().iter().map(|&(_, v)| v).sum()
    }

    pub fn sum_of_squares(&self) -> u64 {
        self.entries.values().map(|&v| v * v).sum()
    }
}

/// Validated coherence of an assignment: sum over entries of H^2.
pub fn coherence_of(assignment: &AssignmentMatrix) -> Result<u64> {
    assignment.validate()?;
    Ok(assignment.sum_of_squares())
}

/// A solver's answer over one (reduced) instance.
#[derive(Debug, Clone)]
pub struct BoundResult {
    pub coherence: u64,
    pub mistake_bound: u64,
    /// Class index -> argmax cell position in the witness.
    pub phi_star: Vec<usize>,
    pub witness: AssignmentMatrix,
    pub solver: SolverKind,
    pub exact: bool,
    /// Brute force only: minimum over every feasible H of the implied
    /// mistake count, independent of which H maximizes coherence.
    pub oracle_min_mistakes: Option<u64>,
}

impl BoundResult {
    pub(crate) fn empty(solver: SolverKind) -> Self {
        BoundResult {
            coherence: 0,
            mistake_bound: 0,
            phi_star: Vec::new(),
            witness: AssignmentMatrix::new(0, ClassSizes::Uniform(0), Vec::new()),
            solver,
            exact: true,
            oracle_min_mistakes: if solver == SolverKind::Bruteforce {
                Some(0)
            } else {
                None
            },
        }
    }

    pub(crate) fn from_witness(witness: AssignmentMatrix, solver: SolverKind, exact: bool) -> Self {
        let coherence = witness.sum_of_squares();
        let total: u64 = witness.cell_sizes.iter().sum();
        let maxima = witness.row_maxima();
        let covered: u64 = maxima.iter().map(|&(_, v)| v).sum();
        BoundResult {
            coherence,
            mistake_bound: total - covered,
            phi_star: maxima.into_iter().map(|(p, _)| p).collect(),
            witness,
            solver,
            exact,
            oracle_min_mistakes: None,
        }
    }
}

/// Mistakes implied by a result's witness: N_reduced minus the samples
/// sitting in their class's phi* cell. Pairs eliminated by the equal-size
/// reduction are perfectly matched and contribute zero, so `removed_pairs`
/// does not change the figure.
pub fn mistake_bound_of(
    result: &BoundResult,
    spec: &InstanceSpec,
    _removed_pairs: u32,
) -> Result<u64> {
    if result.witness.cell_sizes != spec.reduced_cell_sizes
        || result.witness.class_count != spec.reduced_class_count
    {
        return Err(Error::InvalidParameter(
            "witness does not match instance dimensions".into(),
        ));
    }
    result.witness.validate()?;
    Ok(spec.reduced_total() - result.witness.sum_of_row_maxima())
}

/// Which solver the pipeline should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Brute force when the guard allows, else the exact DP when it fits
    /// in memory, else greedy.
    Auto,
    Bruteforce,
    ExactDp,
    Greedy,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "bruteforce" => Ok(Strategy::Bruteforce),
            "dp" | "exact_dp" => Ok(Strategy::ExactDp),
            "greedy" => Ok(Strategy::Greedy),
            other => Err(Error::InvalidParameter(format!(
                "unknown solver strategy {other:?} (expected auto|bruteforce|dp|greedy)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub strategy: Strategy,
    pub memory_budget: u64,
    pub guard: BruteforceGuard,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            strategy: Strategy::Auto,
            memory_budget: 256 << 20,
            guard: BruteforceGuard::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiEntry {
    pub class: u32,
    pub cell: CellIndex,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub class: u32,
    pub cell: CellIndex,
    pub count: u64,
}

/// Full pipeline output over a table: reduction, solve, and the derived
/// mistake bound, with cells named by their coordinates again.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub coherence: u64,
    pub mistake_bound: u64,
    pub solver: SolverKind,
    pub exact: bool,
    pub phi_star: Vec<PhiEntry>,
    pub witness: Vec<WitnessEntry>,
    pub class_count: u32,
    pub class_size: u64,
    pub removed_pairs: u32,
    pub reduced_class_count: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_min_mistakes: Option<u64>,
}

/// Reduce the table, dispatch a solver, and derive the mistake bound.
///
/// Removed (cell, class) pairs re-enter the report as whole-cell
/// assignments: they add S^2 each to the coherence and zero mistakes.
pub fn bound_pipeline(
    table: &OccupancyTable,
    class_count: u32,
    class_size: u64,
    strategy: Strategy,
) -> Result<BoundReport> {
    bound_pipeline_with(
        table,
        class_count,
        class_size,
        &PipelineOptions {
            strategy,
            ..PipelineOptions::default()
        },
    )
}

pub fn bound_pipeline_with(
    table: &OccupancyTable,
    class_count: u32,
    class_size: u64,
    options: &PipelineOptions,
) -> Result<BoundReport> {
    if table.is_empty() {
        return Err(Error::InvalidParameter(
            "occupancy table is empty; nothing to bound".into(),
        ));
    }
    let reduction = reduce_table(table, class_count, class_size)?;
    let spec = &reduction.spec;

    let (inner, solver) = match options.strategy {
        Strategy::Bruteforce => (
            solve_bruteforce_guarded(spec, &options.guard)?,
            SolverKind::Bruteforce,
        ),
        Strategy::ExactDp => (
            solve_exact_dp(spec, options.memory_budget)?,
            SolverKind::ExactDp,
        ),
        Strategy::Greedy => (solve_greedy(spec)?, SolverKind::Greedy),
        Strategy::Auto => {
            if options.guard.admits(spec) {
                (
                    solve_bruteforce_guarded(spec, &options.guard)?,
                    SolverKind::Bruteforce,
                )
            } else if dp_memory_estimate(spec) <= options.memory_budget as u128 {
                (
                    solve_exact_dp(spec, options.memory_budget)?,
                    SolverKind::ExactDp,
                )
            } else {
                (solve_greedy(spec)?, SolverKind::Greedy)
            }
        }
    };

    Ok(assemble_report(&reduction, class_count, class_size, inner, solver))
}

fn assemble_report(
    reduction: &crate::occupancy::Reduction,
    class_count: u32,
    class_size: u64,
    inner: BoundResult,
    solver: SolverKind,
) -> BoundReport {
    let removed = reduction.spec.removed_pairs;
    let mut witness: Vec<WitnessEntry> = Vec::new();
    let mut phi_star: Vec<PhiEntry> = Vec::new();

    // Removed pairs: class i owns removed cell i outright.
    for (i, cell) in reduction.removed_cells.iter().enumerate() {
        phi_star.push(PhiEntry {
            class: i as u32,
            cell: cell.clone(),
        });
        witness.push(WitnessEntry {
            class: i as u32,
            cell: cell.clone(),
            count: class_size,
        });
    }

    // Reduced classes: map solver positions back to cell coordinates and
    // re-resolve phi* ties by lexicographic cell order.
    let mut row_best: Vec<Option<(CellIndex, u64)>> =
        vec![None; inner.witness.class_count as usize];
    for (class, position, count) in inner.witness.iter() {
        let cell = reduction.kept_cells[position].clone();
        let slot = &mut row_best[class as usize];
        let replace = match slot {
            None => true,
            Some((best_cell, best_count)) => {
                count > *best_count || (count == *best_count && cell < *best_cell)
            }
        };
        if replace {
            *slot = Some((cell.clone(), count));
        }
        witness.push(WitnessEntry {
            class: removed + class,
            cell,
            count,
        });
    }
    for (class, slot) in row_best.into_iter().enumerate() {
        if let Some((cell, _)) = slot {
            phi_star.push(PhiEntry {
                class: removed + class as u32,
                cell,
            });
        }
    }

    witness.sort_by(|a, b| a.class.cmp(&b.class).then_with(|| a.cell.cmp(&b.cell)));
    phi_star.sort_by_key(|e| e.class);

    let removed_coherence = removed as u64 * class_size * class_size;
    BoundReport {
        coherence: removed_coherence + inner.coherence,
        mistake_bound: inner.mistake_bound,
        solver,
        exact: inner.exact,
        phi_star,
        witness,
        class_count,
        class_size,
        removed_pairs: removed,
        reduced_class_count: reduction.spec.reduced_class_count,
        oracle_min_mistakes: inner.oracle_min_mistakes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::{build_occupancy, PredictionRecord};

    fn uniform_matrix(entries: &[(u32, usize, u64)], k: u32, s: u64, cells: &[u64]) -> AssignmentMatrix {
        let mut m = AssignmentMatrix::new(k, ClassSizes::Uniform(s), cells.to_vec());
        for &(class, pos, count) in entries {
            m.add(class, pos, count);
        }
        m
    }

    #[test]
    fn coherence_of_hand_matrix() {
        // H = [[2,0],[1,1]] over cells {3,1}: 4 + 1 + 1 = 6.
        let m = uniform_matrix(&[(0, 0, 2), (1, 0, 1), (1, 1, 1)], 2, 2, &[3, 1]);
        assert_eq!(coherence_of(&m).unwrap(), 6);
    }

    #[test]
    fn coherence_of_diagonal() {
        let k = 4u32;
        let s = 3u64;
        let cells = vec![s; k as usize];
        let mut m = AssignmentMatrix::new(k, ClassSizes::Uniform(s), cells);
        for class in 0..k {
            m.add(class, class as usize, s);
        }
        assert_eq!(coherence_of(&m).unwrap(), k as u64 * s * s);
    }

    #[test]
    fn coherence_of_forced_split() {
        // Single cell of size 4, two classes of size 2.
        let m = uniform_matrix(&[(0, 0, 2), (1, 0, 2)], 2, 2, &[4]);
        assert_eq!(coherence_of(&m).unwrap(), 8);
    }

    #[test]
    fn coherence_of_rejects_bad_row() {
        let m = uniform_matrix(&[(0, 0, 3), (1, 0, 1)], 2, 2, &[4]);
        match coherence_of(&m).unwrap_err() {
            Error::RowMarginal { class, found, expected } => {
                assert_eq!((class, found, expected), (0, 3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coherence_of_rejects_bad_column() {
        let m = uniform_matrix(&[(0, 0, 2), (1, 1, 2)], 2, 2, &[3, 1]);
        match coherence_of(&m).unwrap_err() {
            Error::ColumnMarginal { cell, found, expected } => {
                assert_eq!((cell, found, expected), (0, 2, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pipeline_perfect_table_reports_full_coherence() {
        let records: Vec<PredictionRecord> = (0..6)
            .flat_map(|class| {
                (0..2).map(move |i| {
                    PredictionRecord::new(format!("s{class}_{i}"), vec![class, class], None)
                })
            })
            .collect();
        let table = build_occupancy(records, 2, 6).unwrap();
        let report = bound_pipeline(&table, 6, 2, Strategy::Auto).unwrap();
        assert_eq!(report.mistake_bound, 0);
        assert_eq!(report.coherence, 6 * 4);
        assert_eq!(report.removed_pairs, 6);
        assert_eq!(report.reduced_class_count, 0);
        assert!(report.exact);
    }

    #[test]
    fn pipeline_split_class_forces_mistakes() {
        // Fig-1-shaped: one class split across two cells, all others whole.
        // K=6, S=2, Q=2, L=3: five cells of size 2 plus two cells of size 1.
        let mut records = Vec::new();
        for class in 0..5u32 {
            let cell = vec![class % 3, class / 3];
            records.push(PredictionRecord::new(format!("a{class}"), cell.clone(), None));
            records.push(PredictionRecord::new(format!("b{class}"), cell, None));
        }
        records.push(PredictionRecord::new("split0", vec![2, 1], None));
        records.push(PredictionRecord::new("split1", vec![2, 2], None));
        let table = build_occupancy(records, 2, 3).unwrap();
        let report = bound_pipeline(&table, 6, 2, Strategy::Auto).unwrap();
        assert!(report.mistake_bound >= 1, "split class must cost a mistake");
    }

    #[test]
    fn pipeline_oversized_cell_pigeonhole() {
        // One cell larger than S forces at least (size - S) mistakes when
        // every other cell fits a class exactly.
        let mut records = Vec::new();
        for i in 0..5 {
            records.push(PredictionRecord::new(format!("big{i}"), vec![0, 0], None));
        }
        for i in 0..3 {
            records.push(PredictionRecord::new(format!("odd{i}"), vec![1, 1], None));
        }
        let table = build_occupancy(records, 2, 2).unwrap();
        let report = bound_pipeline(&table, 2, 4, Strategy::Auto).unwrap();
        assert!(report.mistake_bound >= 1);
    }

    #[test]
    fn report_serializes_with_spec_keys() {
        let records = vec![
            PredictionRecord::new("a", vec![0, 0], None),
            PredictionRecord::new("b", vec![0, 0], None),
            PredictionRecord::new("c", vec![0, 0], None),
            PredictionRecord::new("d", vec![1, 1], None),
        ];
        let table = build_occupancy(records, 2, 2).unwrap();
        let report = bound_pipeline(&table, 2, 2, Strategy::Bruteforce).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for key in ["coherence", "mistake_bound", "solver", "exact", "phi_star", "witness"] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(json["mistake_bound"], 1);
        assert_eq!(json["solver"], "bruteforce");
    }
}
