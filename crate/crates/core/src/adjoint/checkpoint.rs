use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which forward states are retained for the backward pass.
///
/// States between two stored indices are regenerated from the earlier one
/// when the backward sweep reaches that segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointPlan {
    pub total_steps: usize,
    pub segment_length: usize,
    pub stored_indices: Vec<usize>,
}

impl CheckpointPlan {
    /// Keep every step's input state.
    pub fn full_storage(total_steps: usize) -> Self {
        Self::with_segment(total_steps, 1)
    }

    fn with_segment(total_steps: usize, segment_length: usize) -> Self {
        let stored_indices = if total_steps == 0 {
            vec![0]
        } else {
            (0..total_steps).step_by(segment_length).collect()
        };
        CheckpointPlan {
            total_steps,
            segment_length,
            stored_indices,
        }
    }

    /// `(start, end)` step ranges, one per stored checkpoint.
    pub fn segments(&self) -> impl DoubleEndedIterator<Item = (usize, usize)> + '_ {
        self.stored_indices
            .iter()
            .map(|&s| (s, (s + self.segment_length).min(self.total_steps)))
    }
}

/// Equal-spaced plan with segment length `ceil(T / budget)`.
pub fn make_plan(total_steps: usize, budget: usize) -> Result<CheckpointPlan> {
    if budget == 0 {
        return Err(Error::Usage("checkpoint budget must be >= 1".into()));
    }
    let segment = total_steps.div_ceil(budget).max(1);
    Ok(CheckpointPlan::with_segment(total_steps, segment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_horizon_stores_everything() {
        let p = make_plan(10, 10).unwrap();
        assert_eq!(p.segment_length, 1);
        assert_eq!(p.stored_indices, (0..10).collect::<Vec<_>>());
        assert_eq!(make_plan(10, 50).unwrap(), p);
    }

    #[test]
    fn hundred_steps_ten_segments() {
        let p = make_plan(100, 10).unwrap();
        assert_eq!(p.segment_length, 10);
        assert_eq!(
            p.stored_indices,
            vec![0, 10, 20, 30, 40, 50, 60, 70, 80, 90]
        );
    }

    #[test]
    fn single_step_single_checkpoint() {
        for b in [1, 3, 1000] {
            assert_eq!(make_plan(1, b).unwrap().stored_indices, vec![0]);
        }
    }

    #[test]
    fn zero_budget_is_rejected() {
        assert!(make_plan(5, 0).is_err());
    }

    proptest! {
        #[test]
        fn plan_invariants(t in 1usize..2000, b in 1usize..300) {
            let p = make_plan(t, b).unwrap();
            prop_assert_eq!(p.stored_indices[0], 0);
            prop_assert!(p.stored_indices.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= p.segment_length));
            prop_assert!(p.stored_indices.len() <= t.div_ceil(p.segment_length) + 1);
            prop_assert!(p.stored_indices.len() <= b);
            prop_assert!(t - p.stored_indices.last().unwrap() <= p.segment_length);
        }
    }
}
