use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cubes::CubeTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingTimeRegion {
    pub top: usize,
    pub members: BTreeSet<usize>,
    pub minimal: Vec<usize>,
    /// Points of Q(S) outside every minimal cube.
    pub residual: Vec<usize>,
}

impl StoppingTimeRegion {
    pub fn contains(&self, id: usize) -> bool {
        self.members.contains(&id)
    }
}

/// Grow from `top`: the children of a member join together iff every one of them satisfies `keep`.
pub fn build_stopping_time<F>(tree: &CubeTree, top: usize, keep: F) -> StoppingTimeRegion
where
    F: Fn(usize) -> bool,
{
    let mut members = BTreeSet::new();
    members.insert(top);
    let mut minimal = Vec::new();
    let mut stack = vec![top];
    while let Some(q) = stack.pop() {
        let kids = &tree.cubes[q].children;
        if !kids.is_empty() && kids.iter().all(|&c| keep(c)) {
            for &c in kids {
                members.insert(c);
                stack.push(c);
            }
        } else {
            minimal.push(q);
        }
    }
    minimal.sort_unstable();
    let mut covered = vec![false; tree.cloud().len()];
    for &m in &minimal {
        for &p in &tree.cubes[m].members {
            covered[p] = true;
        }
    }
    let residual = tree.cubes[top].members.iter().copied().filter(|&p| !covered[p]).collect();
    StoppingTimeRegion { top, members, minimal, residual }
}
