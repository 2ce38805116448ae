//! Joint cell-occupancy counting.
//!
//! Every sample is mapped by the ensemble's Q classifiers to a tuple of Q
//! labels (a *cell*). The occupancy table counts samples per cell and is the
//! only observable the bound ever sees: labels on the records are carried for
//! validation but never read on the bound path.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sample's ensemble outputs. `true_label` is validation-only metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub outputs: Vec<u32>,
    pub true_label: Option<u32>,
}

impl PredictionRecord {
    pub fn new(sample_id: impl Into<String>, outputs: Vec<u32>, true_label: Option<u32>) -> Self {
        Self {
            sample_id: sample_id.into(),
            outputs,
            true_label,
        }
    }

    pub fn cell(&self) -> CellIndex {
        CellIndex::new(self.outputs.clone())
    }
}

/// A tuple of Q label indices identifying one cell of the joint partition.
///
/// Ordering is lexicographic on the coordinates, which fixes the iteration
/// order of tables and the tie-breaking order used by the solvers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellIndex(pub Vec<u32>);

impl CellIndex {
    pub fn new(coords: Vec<u32>) -> Self {
        CellIndex(coords)
    }

    pub fn coords(&self) -> &[u32] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }
}

impl std::fmt::Display for CellIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Sparse count of samples per joint output cell.
///
/// Stored counts are always >= 1; `total` is the number of ingested samples.
/// Dense `L^Q` storage is never allocated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyTable {
    arity: usize,
    label_count: u32,
    cells: std::collections::BTreeMap<CellIndex, u64>,
    total: u64,
}

impl OccupancyTable {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn label_count(&self) -> u32 {
        self.label_count
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn count(&self, cell: &CellIndex) -> u64 {
        self.cells.get(cell).copied().unwrap_or(0)
    }

    /// Cells in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&CellIndex, u64)> {
        self.cells.iter().map(|(k, &v)| (k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Rebuild a table from explicit cells, validating every invariant.
    /// Used by the deserializers; `build_occupancy` is the ingestion path.
    pub fn from_cells(
        arity: usize,
        label_count: u32,
        cells: impl IntoIterator<Item = (CellIndex, u64)>,
    ) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        let mut total: u64 = 0;
        for (cell, count) in cells {
            if cell.arity() != arity {
                return Err(Error::ArityMismatch {
                    sample_id: cell.to_string(),
                    expected: arity,
                    found: cell.arity(),
                });
            }
            if let Some(&bad) = cell.coords().iter().find(|&&c| c >= label_count) {
                return Err(Error::LabelOutOfRange {
                    sample_id: cell.to_string(),
                    label: bad,
                    label_count,
                });
            }
            if count == 0 {
                return Err(Error::InvalidParameter(format!(
                    "cell {cell} has explicit zero count"
                )));
            }
            total += count;
            if map.insert(cell.clone(), count).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate cell {cell}")));
            }
        }
        Ok(OccupancyTable {
            arity,
            label_count,
            cells: map,
            total,
        })
    }

    /// Merge two tables built over disjoint shards of one record stream.
    /// Counts add; the merge is associative and commutative.
    pub fn merge(mut self, other: OccupancyTable) -> Result<OccupancyTable> {
        if self.arity != other.arity || self.label_count != other.label_count {
            return Err(Error::TableShapeMismatch {
                arity_a: self.arity,
                arity_b: other.arity,
                labels_a: self.label_count,
                labels_b: other.label_count,
            });
        }
        for (cell, count) in other.cells {
            *self.cells.entry(cell).or_insert(0) += count;
        }
        self.total += other.total;
        Ok(self)
    }

    /// Fraction of samples on the diagonal of a Q=2 table: sum of c_(i,i) / N.
    /// 1.0 means both classifiers agree on every sample; an empty table gives 0.
    pub fn diagonal_mass(&self) -> Result<f64> {
        if self.arity != 2 {
            return Err(Error::ArityNotTwo { arity: self.arity });
        }
        if self.total == 0 {
            return Ok(0.0);
        }
        let diag: u64 = self
            .cells
            .iter()
            .filter(|(cell, _)| cell.coords()[0] == cell.coords()[1])
            .map(|(_, &count)| count)
            .sum();
        Ok(diag as f64 / self.total as f64)
    }
}

/// Incremental table construction. Shards may each fill their own builder;
/// `merge` combines them independent of order.
#[derive(Debug, Clone)]
pub struct OccupancyBuilder {
    arity: usize,
    label_count: u32,
    counts: HashMap<CellIndex, u64>,
    total: u64,
}

impl OccupancyBuilder {
    pub fn new(arity: usize, label_count: u32) -> Self {
        Self {
            arity,
            label_count,
            counts: HashMap::new(),
            total: 0,
        }
    }

    pub fn push(&mut self, record: &PredictionRecord) -> Result<()> {
        if record.outputs.len() != self.arity {
            return Err(Error::ArityMismatch {
                sample_id: record.sample_id.clone(),
                expected: self.arity,
                found: record.outputs.len(),
            });
        }
        if let Some(&bad) = record.outputs.iter().find(|&&l| l >= self.label_count) {
            return Err(Error::LabelOutOfRange {
                sample_id: record.sample_id.clone(),
                label: bad,
                label_count: self.label_count,
            });
        }
        *self
            .counts
            .entry(CellIndex::new(record.outputs.clone()))
            .or_insert(0) += 1;
        self.total += 1;
        Ok(())
    }

    pub fn merge(mut self, other: OccupancyBuilder) -> Result<Self> {
        if self.arity != other.arity || self.label_count != other.label_count {
            return Err(Error::TableShapeMismatch {
                arity_a: self.arity,
                arity_b: other.arity,
                labels_a: self.label_count,
                labels_b: other.label_count,
            });
        }
        for (cell, count) in other.counts {
            *self.counts.entry(cell).or_insert(0) += count;
        }
        self.total += other.total;
        Ok(self)
    }

    pub fn finish(self) -> OccupancyTable {
        OccupancyTable {
            arity: self.arity,
            label_count: self.label_count,
            cells: self.counts.into_iter().collect(),
            total: self.total,
        }
    }
}

/// Count samples per cell over a record stream.
///
/// The result is independent of stream order: any permutation of the input
/// yields an identical table.
pub fn build_occupancy<I>(records: I, arity: usize, label_count: u32) -> Result<OccupancyTable>
where
    I: IntoIterator<Item = PredictionRecord>,
{
    let mut builder = OccupancyBuilder::new(arity, label_count);
    for record in records {
        builder.push(&record)?;
    }
    Ok(builder.finish())
}

/// Outcome of the L-vs-K resolution check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolutionAdvisory {
    pub ok: bool,
    /// L^Q, saturated at u128::MAX.
    pub joint_cells: u128,
    pub class_count: u32,
    pub message: Option<String>,
}

/// Advise whether L labels give the joint partition enough resolution.
///
/// OK means strictly more cells than classes (L^Q > K). At or below the
/// boundary a perfect classification could fill every cell, so misplaced
/// samples would not have to change any count.
pub fn check_resolution(class_count: u32, arity: usize, label_count: u32) -> ResolutionAdvisory {
    let mut cells: u128 = 1;
    for _ in 0..arity {
        cells = cells.saturating_mul(label_count as u128);
    }
    let ok = cells > class_count as u128;
    ResolutionAdvisory {
        ok,
        joint_cells: cells,
        class_count,
        message: if ok {
            None
        } else {
            Some(format!(
                "{label_count}^{arity} = {cells} cells is not strictly more than {class_count} \
                 classes; a perfect classification could occupy every cell and hide all errors"
            ))
        },
    }
}

/// Class sizes of an instance. `Uniform` is the core model; per-class sizes
/// are experimental and only the brute-force solver accepts them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassSizes {
    Uniform(u64),
    PerClass(Vec<u64>),
}

impl ClassSizes {
    pub fn total(&self, class_count: u32) -> u64 {
        match self {
            ClassSizes::Uniform(s) => s * class_count as u64,
            ClassSizes::PerClass(v) => v.iter().sum(),
        }
    }

    pub fn size_of(&self, class: u32) -> u64 {
        match self {
            ClassSizes::Uniform(s) => *s,
            ClassSizes::PerClass(v) => v[class as usize],
        }
    }
}

/// Problem dimensions handed to the solvers: the reduced cell-size multiset
/// plus how much was stripped by the equal-size reduction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub class_sizes: ClassSizes,
    pub reduced_class_count: u32,
    /// Sorted descending; ties follow the lexicographic order of the cells
    /// they came from (when built from a table).
    pub reduced_cell_sizes: Vec<u64>,
    pub removed_pairs: u32,
}

impl InstanceSpec {
    /// An unreduced instance over explicit cell sizes (uniform class size).
    pub fn from_cells(cell_sizes: Vec<u64>, class_count: u32, class_size: u64) -> Result<Self> {
        let cells_total: u64 = cell_sizes.iter().sum();
        let class_total = class_count as u64 * class_size;
        if cells_total != class_total {
            return Err(Error::Infeasible {
                cells_total,
                class_total,
            });
        }
        let mut sizes = cell_sizes;
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        Ok(InstanceSpec {
            class_sizes: ClassSizes::Uniform(class_size),
            reduced_class_count: class_count,
            reduced_cell_sizes: sizes,
            removed_pairs: 0,
        })
    }

    /// An unreduced instance with per-class sizes (brute-force only).
    pub fn from_cells_per_class(cell_sizes: Vec<u64>, class_sizes: Vec<u64>) -> Result<Self> {
        let cells_total: u64 = cell_sizes.iter().sum();
        let class_total: u64 = class_sizes.iter().sum();
        if cells_total != class_total {
            return Err(Error::Infeasible {
                cells_total,
                class_total,
            });
        }
        let count = class_sizes.len() as u32;
        let mut sizes = cell_sizes;
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        Ok(InstanceSpec {
            class_sizes: ClassSizes::PerClass(class_sizes),
            reduced_class_count: count,
            reduced_cell_sizes: sizes,
            removed_pairs: 0,
        })
    }

    pub fn uniform_class_size(&self) -> Option<u64> {
        match self.class_sizes {
            ClassSizes::Uniform(s) => Some(s),
            ClassSizes::PerClass(_) => None,
        }
    }

    /// N over the reduced instance: what the solvers must account for.
    pub fn reduced_total(&self) -> u64 {
        self.class_sizes.total(self.reduced_class_count)
    }

    pub fn largest_cell(&self) -> u64 {
        self.reduced_cell_sizes.first().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let cells_total: u64 = self.reduced_cell_sizes.iter().sum();
        let class_total = self.reduced_total();
        if cells_total != class_total {
            return Err(Error::Infeasible {
                cells_total,
                class_total,
            });
        }
        if self.largest_cell() > class_total && class_total > 0 {
            return Err(Error::Infeasible {
                cells_total,
                class_total,
            });
        }
        Ok(())
    }
}

/// A reduction with enough bookkeeping to map solver output back to cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub spec: InstanceSpec,
    /// Cells surviving reduction, aligned with `spec.reduced_cell_sizes`.
    pub kept_cells: Vec<CellIndex>,
    /// Cells removed by pairing with a class, in lexicographic order.
    pub removed_cells: Vec<CellIndex>,
}

/// Strip (size-S cell, class) pairs from the table before solving.
///
/// Every cell whose count is exactly S is matched with one class and removed;
/// the solvers then only see the leftover multiset. Requires N == K*S: with
/// real data the caller must pass an effective K = round(N/S) instead, this
/// function refuses to guess.
pub fn reduce_table(table: &OccupancyTable, class_count: u32, class_size: u64) -> Result<Reduction> {
    let class_total = class_count as u64 * class_size;
    if table.total() != class_total {
        return Err(Error::SizeMismatch {
            total: table.total(),
            class_count,
            class_size,
        });
    }
    let mut removed_cells = Vec::new();
    let mut kept: Vec<(CellIndex, u64)> = Vec::new();
    for (cell, count) in table.iter() {
        if count == class_size && (removed_cells.len() as u32) < class_count {
            removed_cells.push(cell.clone());
        } else {
            kept.push((cell.clone(), count));
        }
    }
    // Descending size; lexicographic cell order breaks ties.
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let removed_pairs = removed_cells.len() as u32;
    let spec = InstanceSpec {
        class_sizes: ClassSizes::Uniform(class_size),
        reduced_class_count: class_count - removed_pairs,
        reduced_cell_sizes: kept.iter().map(|(_, c)| *c).collect(),
        removed_pairs,
    };
    spec.validate()?;
    Ok(Reduction {
        spec,
        kept_cells: kept.into_iter().map(|(c, _)| c).collect(),
        removed_cells,
    })
}

/// `reduce_table` without the cell bookkeeping.
pub fn reduce_instance(
    table: &OccupancyTable,
    class_count: u32,
    class_size: u64,
) -> Result<InstanceSpec> {
    reduce_table(table, class_count, class_size).map(|r| r.spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, outputs: &[u32]) -> PredictionRecord {
        PredictionRecord::new(id, outputs.to_vec(), None)
    }

    fn table_from(counts: &[(&[u32], u64)], arity: usize, labels: u32) -> OccupancyTable {
        OccupancyTable::from_cells(
            arity,
            labels,
            counts
                .iter()
                .map(|(coords, n)| (CellIndex::new(coords.to_vec()), *n)),
        )
        .unwrap()
    }

    #[test]
    fn build_counts_duplicates() {
        let records = vec![
            rec("a", &[0, 0]),
            rec("b", &[0, 0]),
            rec("c", &[1, 2]),
            rec("d", &[0, 0]),
        ];
        let table = build_occupancy(records, 2, 3).unwrap();
        assert_eq!(table.total(), 4);
        assert_eq!(table.cell_count(), 2);
        assert_eq!(table.count(&CellIndex::new(vec![0, 0])), 3);
        assert_eq!(table.count(&CellIndex::new(vec![1, 2])), 1);
    }

    #[test]
    fn build_empty_stream() {
        let table = build_occupancy(std::iter::empty(), 2, 3).unwrap();
        assert_eq!(table.total(), 0);
        assert_eq!(table.cell_count(), 0);
    }

    #[test]
    fn build_rejects_out_of_range_label() {
        let err = build_occupancy(vec![rec("bad", &[0, 3])], 2, 3).unwrap_err();
        match err {
            Error::LabelOutOfRange { sample_id, label, .. } => {
                assert_eq!(sample_id, "bad");
                assert_eq!(label, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn build_rejects_inconsistent_arity() {
        let err = build_occupancy(vec![rec("x", &[0, 1, 2])], 2, 3).unwrap_err();
        assert!(matches!(err, Error::ArityMismatch { .. }));
    }

    #[test]
    fn merge_is_order_independent() {
        let shard_a = build_occupancy(vec![rec("a", &[0, 0]), rec("b", &[1, 1])], 2, 2).unwrap();
        let shard_b = build_occupancy(vec![rec("c", &[0, 0])], 2, 2).unwrap();
        let ab = shard_a.clone().merge(shard_b.clone()).unwrap();
        let ba = shard_b.merge(shard_a).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab.total(), 3);
        assert_eq!(ab.count(&CellIndex::new(vec![0, 0])), 2);
    }

    #[test]
    fn resolution_fig1_dimensions_ok() {
        let adv = check_resolution(6, 2, 3);
        assert!(adv.ok);
        assert_eq!(adv.joint_cells, 9);
    }

    #[test]
    fn resolution_boundary_warns() {
        assert!(!check_resolution(9, 2, 3).ok);
        // 100^3 == 10^6 exactly: not strictly greater.
        assert!(!check_resolution(1_000_000, 3, 100).ok);
        assert!(check_resolution(999_999, 3, 100).ok);
    }

    #[test]
    fn reduce_perfect_partition_fully_reduces() {
        let table = table_from(&[(&[0, 0], 2), (&[1, 1], 2)], 2, 2);
        let spec = reduce_instance(&table, 2, 2).unwrap();
        assert!(spec.reduced_cell_sizes.is_empty());
        assert_eq!(spec.reduced_class_count, 0);
        assert_eq!(spec.removed_pairs, 2);
    }

    #[test]
    fn reduce_removes_only_matching_sizes() {
        let table = table_from(&[(&[0, 0], 3), (&[0, 1], 2), (&[1, 0], 1)], 2, 2);
        let spec = reduce_instance(&table, 3, 2).unwrap();
        assert_eq!(spec.reduced_cell_sizes, vec![3, 1]);
        assert_eq!(spec.reduced_class_count, 2);
        assert_eq!(spec.removed_pairs, 1);
    }

    #[test]
    fn reduce_single_match_of_class_size() {
        let table = table_from(&[(&[0, 0], 4), (&[0, 1], 3), (&[1, 0], 3), (&[1, 1], 2)], 2, 2);
        let spec = reduce_instance(&table, 3, 4).unwrap();
        assert_eq!(spec.reduced_cell_sizes, vec![3, 3, 2]);
        assert_eq!(spec.reduced_class_count, 2);
        assert_eq!(spec.removed_pairs, 1);
    }

    #[test]
    fn reduce_rejects_size_mismatch() {
        let table = table_from(&[(&[0, 0], 3)], 2, 2);
        let err = reduce_instance(&table, 2, 2).unwrap_err();
        match err {
            Error::SizeMismatch { total, class_count, class_size } => {
                assert_eq!((total, class_count, class_size), (3, 2, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn diagonal_mass_examples() {
        let full = table_from(&[(&[0, 0], 3), (&[1, 1], 3)], 2, 2);
        assert_eq!(full.diagonal_mass().unwrap(), 1.0);
        let none = table_from(&[(&[0, 1], 4)], 2, 2);
        assert_eq!(none.diagonal_mass().unwrap(), 0.0);
        let mixed = table_from(&[(&[0, 0], 3), (&[0, 1], 1)], 2, 2);
        assert_eq!(mixed.diagonal_mass().unwrap(), 0.75);
    }

    #[test]
    fn diagonal_mass_requires_arity_two() {
        let table = table_from(&[(&[0, 0, 0], 1)], 3, 2);
        assert!(matches!(
            table.diagonal_mass(),
            Err(Error::ArityNotTwo { arity: 3 })
        ));
    }

    #[test]
    fn reduction_is_idempotent() {
        let table = table_from(&[(&[0, 0], 3), (&[0, 1], 2), (&[1, 0], 1)], 2, 2);
        let first = reduce_table(&table, 3, 2).unwrap();
        // Rebuild a table holding only the kept cells and reduce again with K_r.
        let rebuilt = OccupancyTable::from_cells(
            2,
            2,
            first
                .kept_cells
                .iter()
                .cloned()
                .zip(first.spec.reduced_cell_sizes.iter().copied()),
        )
        .unwrap();
        let second = reduce_table(&rebuilt, first.spec.reduced_class_count, 2).unwrap();
        assert_eq!(second.spec.removed_pairs, 0);
        assert_eq!(second.spec.reduced_cell_sizes, first.spec.reduced_cell_sizes);
    }
}
