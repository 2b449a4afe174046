use serde::{Deserialize, Serialize};

use super::{GraphError, Result};

/// Month cutoffs: training is `1..=train_cutoff`, validation
/// `train_cutoff+1..=val_cutoff`, test `val_cutoff+1..=test_end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Split {
    pub train_cutoff: usize,
    pub val_cutoff: usize,
    pub test_end: usize,
}

impl Split {
    /// 2/3 train, 1/6 validation, 1/6 test; (24, 30, 36) for 36 months.
    pub fn default_for(months: usize) -> Result<Split> {
        let train = (months * 2 / 3).max(1);
        let val = (months * 5 / 6).max(train + 1);
        temporal_split(months, train, val, months)
    }

    pub fn train_months(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.train_cutoff
    }

    pub fn val_months(&self) -> std::ops::RangeInclusive<usize> {
        self.train_cutoff + 1..=self.val_cutoff
    }

    pub fn test_months(&self) -> std::ops::RangeInclusive<usize> {
        self.val_cutoff + 1..=self.test_end
    }
}

pub fn temporal_split(
    months: usize,
    train_cutoff: usize,
    val_cutoff: usize,
    test_end: usize,
) -> Result<Split> {
    if !(1 <= train_cutoff && train_cutoff < val_cutoff && val_cutoff < test_end) {
        return Err(GraphError::InvalidSplit(format!(
            "need 1 <= train ({train_cutoff}) < val ({val_cutoff}) < test end ({test_end})"
        )));
    }
    if test_end != months {
        return Err(GraphError::InvalidSplit(format!(
            "test end {test_end} must equal the number of months {months}"
        )));
    }
    Ok(Split {
        train_cutoff,
        val_cutoff,
        test_end,
    })
}
