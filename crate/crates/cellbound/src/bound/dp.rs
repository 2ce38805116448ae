//! Exact dynamic program over remaining class capacities.
//!
//! Cells are consumed in a fixed order; the state after t cells is the
//! vector of remaining capacities of the first K_r - 1 classes (the last
//! class is implied by conservation). Cells may be split between classes
//! and classes between cells, so every state transition enumerates the
//! bounded compositions of one cell size. All layers are retained so the
//! witness can be reconstructed by replaying the argmax transitions.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::occupancy::{ClassSizes, InstanceSpec};

use super::{AssignmentMatrix, BoundResult, SolverKind};

/// Bytes the layered state store may need, estimated before any allocation.
///
/// Reachable capacity vectors are bounded by (min(C_m, S) + 1)^(K_r - 1)
/// per layer (capacities never exceed S, and a single cell can lower one
/// coordinate by at most C_m), and one layer is kept per cell for witness
/// reconstruction.
pub fn dp_memory_estimate(spec: &InstanceSpec) -> u128 {
    let k = spec.reduced_class_count;
    if k <= 1 {
        return 64;
    }
    let s = match spec.class_sizes {
        ClassSizes::Uniform(s) => s,
        // Per-class sizes are rejected before this matters.
        ClassSizes::PerClass(_) => return u128::MAX,
    };
    let side = spec.largest_cell().min(s) as u128 + 1;
    let mut states: u128 = 1;
    for _ in 0..(k - 1) {
        states = states.saturating_mul(side);
    }
    let record = 64 + 8 * (k as u128 - 1);
    states
        .saturating_mul(record)
        .saturating_mul(spec.reduced_cell_sizes.len().max(1) as u128)
}

pub fn solve_exact_dp(spec: &InstanceSpec, memory_budget: u64) -> Result<BoundResult> {
    spec.validate()?;
    let s = match &spec.class_sizes {
        ClassSizes::Uniform(s) => *s,
        ClassSizes::PerClass(_) => {
            return Err(Error::PerClassUnsupported { solver: "exact_dp" })
        }
    };
    if spec.reduced_class_count == 0 {
        return Ok(BoundResult::empty(SolverKind::ExactDp));
    }
    let estimate = dp_memory_estimate(spec);
    if estimate > memory_budget as u128 {
        return Err(Error::MemoryBudget {
            estimate,
            budget: memory_budget,
        });
    }
    if s > u32::MAX as u64 {
        return Err(Error::InvalidParameter(format!(
            "class size {s} too large for the capacity-vector state space"
        )));
    }

    let k = spec.reduced_class_count as usize;
    let cells = &spec.reduced_cell_sizes;
    let mut witness = AssignmentMatrix::new(
        spec.reduced_class_count,
        spec.class_sizes.clone(),
        cells.clone(),
    );

    if k == 1 {
        // Everything belongs to the only class.
        for (position, &c) in cells.iter().enumerate() {
            witness.add(0, position, c);
        }
        return Ok(BoundResult::from_witness(witness, SolverKind::ExactDp, true));
    }

    // Remaining capacity across *all* classes before processing cell t.
    let mut remaining_total = vec![0u64; cells.len() + 1];
    for t in (0..cells.len()).rev() {
        remaining_total[t] = remaining_total[t + 1] + cells[t];
    }

    type State = Vec<u32>;
    // layers[t]: best coherence achievable from cell t onward, per state.
    let mut layers: Vec<HashMap<State, u64>> = Vec::with_capacity(cells.len() + 1);

    let start: State = vec![s as u32; k - 1];
    let mut frontier: HashMap<State, u64> = HashMap::new();
    frontier.insert(start.clone(), 0);

    // Forward reachability: which states exist at each layer.
    let mut reachable: Vec<Vec<State>> = Vec::with_capacity(cells.len() + 1);
    reachable.push(vec![start.clone()]);
    for (t, &cell) in cells.iter().enumerate() {
        let mut next: HashMap<State, ()> = HashMap::new();
        for state in &reachable[t] {
            let implied = remaining_total[t] - state.iter().map(|&c| c as u64).sum::<u64>();
            for_each_composition(cell, state, implied.min(s), &mut |prefix_take, _| {
                let mut succ = state.clone();
                for (slot, take) in succ.iter_mut().zip(prefix_take) {
                    *slot -= *take as u32;
                }
                next.entry(succ).or_insert(());
            });
        }
        reachable.push(next.into_keys().collect());
    }

    // Backward values: V[t](state) = best coherence over cells t.. .
    layers.resize(cells.len() + 1, HashMap::new());
    for state in &reachable[cells.len()] {
        layers[cells.len()].insert(state.clone(), 0);
    }
    for t in (0..cells.len()).rev() {
        let cell = cells[t];
        let (lo, hi) = layers.split_at_mut(t + 1);
        let next_layer = &hi[0];
        let layer = &mut lo[t];
        for state in &reachable[t] {
            let implied = remaining_total[t] - state.iter().map(|&c| c as u64).sum::<u64>();
            let mut best: Option<u64> = None;
            for_each_composition(cell, state, implied.min(s), &mut |prefix_take, last_take| {
                let mut succ = state.clone();
                for (slot, take) in succ.iter_mut().zip(prefix_take) {
                    *slot -= *take as u32;
                }
                if let Some(&tail) = next_layer.get(&succ) {
                    let gain: u64 =
                        prefix_take.iter().map(|&h| h * h).sum::<u64>() + last_take * last_take;
                    let value = gain + tail;
                    if best.map_or(true, |b| value > b) {
                        best = Some(value);
                    }
                }
            });
            if let Some(value) = best {
                layer.insert(state.clone(), value);
            }
        }
    }

    let coherence = *layers[0]
        .get(&start)
        .ok_or_else(|| Error::Infeasible {
            cells_total: cells.iter().sum(),
            class_total: spec.reduced_total(),
        })?;

    // Replay: at each cell pick the first composition (largest shares
    // first) whose gain plus tail value meets the layer value.
    let mut state = start;
    for (t, &cell) in cells.iter().enumerate() {
        let implied = remaining_total[t] - state.iter().map(|&c| c as u64).sum::<u64>();
        let want = layers[t][&state];
        let mut chosen: Option<(Vec<u64>, u64)> = None;
        for_each_composition(cell, &state, implied.min(s), &mut |prefix_take, last_take| {
            if chosen.is_some() {
                return;
            }
            let mut succ = state.clone();
            for (slot, take) in succ.iter_mut().zip(prefix_take) {
                *slot -= *take as u32;
            }
            if let Some(&tail) = layers[t + 1].get(&succ) {
                let gain: u64 =
                    prefix_take.iter().map(|&h| h * h).sum::<u64>() + last_take * last_take;
                if gain + tail == want {
                    chosen = Some((prefix_take.to_vec(), last_take));
                }
            }
        });
        let (prefix_take, last_take) =
            chosen.expect("value table admits at least one optimal transition");
        for (class, &take) in prefix_take.iter().enumerate() {
            witness.add(class as u32, t, take);
            state[class] -= take as u32;
        }
        witness.add(k as u32 - 1, t, last_take);
    }

    Ok(BoundResult::from_witness(witness, SolverKind::ExactDp, true))
}

/// Enumerate ways to split `cell` samples over the prefix classes (bounded
/// by `caps`) and the implied last class (bounded by `last_cap`). Prefix
/// shares are visited largest-first. The callback receives the prefix
/// takes and the last class's take.
fn for_each_composition(
    cell: u64,
    caps: &[u32],
    last_cap: u64,
    callback: &mut dyn FnMut(&[u64], u64),
) {
    let mut takes = vec![0u64; caps.len()];
    fn descend(
        cell_left: u64,
        class: usize,
        caps: &[u32],
        last_cap: u64,
        takes: &mut Vec<u64>,
        callback: &mut dyn FnMut(&[u64], u64),
    ) {
        if class == caps.len() {
            if cell_left <= last_cap {
                callback(takes, cell_left);
            }
            return;
        }
        let top = cell_left.min(caps[class] as u64);
        for take in (0..=top).rev() {
            takes[class] = take;
            descend(cell_left - take, class + 1, caps, last_cap, takes, callback);
        }
        takes[class] = 0;
    }
    descend(cell, 0, caps, last_cap, &mut takes, callback);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::solve_bruteforce;
    use crate::occupancy::InstanceSpec;

    fn uniform(cells: &[u64], k: u32, s: u64) -> InstanceSpec {
        InstanceSpec::from_cells(cells.to_vec(), k, s).unwrap()
    }

    const BUDGET: u64 = 64 << 20;

    #[test]
    fn matches_oracle_on_split_cell() {
        let spec = uniform(&[3, 1], 2, 2);
        let result = solve_exact_dp(&spec, BUDGET).unwrap();
        assert_eq!(result.coherence, 6);
        assert!(result.exact);
    }

    #[test]
    fn split_of_even_cell_between_two_classes() {
        // Cells {3,3,2}, K_r=2, S=4: both classes take a 3-cell and one
        // sample of the 2-cell, scoring 9+9+1+1.
        let spec = uniform(&[3, 3, 2], 2, 4);
        let result = solve_exact_dp(&spec, BUDGET).unwrap();
        assert_eq!(result.coherence, 20);
        let oracle = solve_bruteforce(&spec).unwrap();
        assert_eq!(result.coherence, oracle.coherence);
    }

    #[test]
    fn fully_reduced_instance_is_empty() {
        let spec = uniform(&[], 0, 7);
        let result = solve_exact_dp(&spec, BUDGET).unwrap();
        assert_eq!(result.coherence, 0);
        assert_eq!(result.mistake_bound, 0);
        assert!(result.witness.is_empty());
    }

    #[test]
    fn single_class_takes_everything() {
        let spec = uniform(&[4, 2, 1], 1, 7);
        let result = solve_exact_dp(&spec, BUDGET).unwrap();
        assert_eq!(result.coherence, 16 + 4 + 1);
        // phi* is the largest cell; the rest are implied mistakes.
        assert_eq!(result.mistake_bound, 3);
    }

    #[test]
    fn refuses_when_budget_too_small() {
        let spec = uniform(&[6; 10], 10, 6);
        let err = solve_exact_dp(&spec, 128).unwrap_err();
        match err {
            Error::MemoryBudget { estimate, budget } => {
                assert!(estimate > 128);
                assert_eq!(budget, 128);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_per_class_sizes() {
        let spec = InstanceSpec::from_cells_per_class(vec![3, 1], vec![3, 1]).unwrap();
        assert!(matches!(
            solve_exact_dp(&spec, BUDGET),
            Err(Error::PerClassUnsupported { .. })
        ));
    }

    #[test]
    fn witness_is_feasible_and_consistent() {
        let spec = uniform(&[5, 4, 2, 1], 3, 4);
        let result = solve_exact_dp(&spec, BUDGET).unwrap();
        result.witness.validate().unwrap();
        assert_eq!(result.witness.sum_of_squares(), result.coherence);
    }
}
