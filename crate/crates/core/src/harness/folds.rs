// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};
use crate::hv::SeededStream;

/// Train/test row indices of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold split.
///
/// Each class's rows are shuffled with the sub-stream `(folds, class)` and
/// dealt round-robin onto the folds, continuing the deal where the previous
/// class stopped. Every fold therefore receives `floor` or `ceil` of each
/// class's share and fold sizes differ by at most one.
///
/// Every class needs at least `folds` rows, except for leave-one-out
/// (`folds == rows`).
pub fn stratified_folds(
    classes: &[usize],
    num_classes: usize,
    folds: usize,
    stream: &SeededStream,
) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::Config(format!("fold count {folds} must be at least 2")));
    }
    if folds > classes.len() {
        return Err(Error::Config(format!(
            "{folds} folds requested for {} rows",
            classes.len()
        )));
    }
    let mut members = vec![Vec::new(); num_classes];
    for (i, &j) in classes.iter().enumerate() {
        members[j].push(i);
    }
    let leave_one_out = folds == classes.len();
    if !leave_one_out {
        if let Some((j, m)) = members.iter().enumerate().find(|(_, m)| m.len() < folds) {
            return Err(Error::Config(format!(
                "class {j} has {} rows, fewer than {folds} folds",
                m.len()
            )));
        }
    }
    let mut tests = vec![Vec::new(); folds];
    let mut deal = 0usize;
    for (j, mut rows) in members.into_iter().enumerate() {
        stream.split("folds", j as u64).shuffle(&mut rows);
        for i in rows {
            tests[deal % folds].push(i);
            deal += 1;
        }
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; classes.len()];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..classes.len()).filter(|&i| !in_test[i]).collect();
            Fold { train, test }
        })
        .collect())
}
