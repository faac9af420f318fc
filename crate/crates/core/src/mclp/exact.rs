use serde::{Deserialize, Serialize};

use super::{greedy, AreaSet, Certificate, MclpInstance, MclpSolution};
use crate::error::{Error, Result};

pub const DEFAULT_EXACT_CAP: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactOptions {
    /// Largest candidate count solved without an explicit override.
    pub cap: usize,
    pub allow_large: bool,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { cap: DEFAULT_EXACT_CAP, allow_large: false }
    }
}

struct Search<'a> {
    inst: &'a MclpInstance,
    free: Vec<usize>,
    need: usize,
    best_z: u64,
    best: Vec<usize>,
    /// False while `best` is the greedy incumbent rather than a search result.
    best_from_search: bool,
    stack: Vec<usize>,
}

/// Provably optimal selection by depth-first branch and bound.
///
/// Free candidates are branched in id order, so combinations are visited
/// lexicographically and the first optimum reached is the lexicographically
/// smallest id set. A node is pruned when its bound (current coverage plus
/// the best remaining single gains for every open slot) cannot beat the
/// incumbent; coverage is submodular, so that sum bounds any completion.
pub fn solve_exact(inst: &MclpInstance, p: usize, opts: ExactOptions) -> Result<MclpSolution> {
    inst.check_p(p)?;
    let n = inst.sites().len();
    if n > opts.cap && !opts.allow_large {
        return Err(Error::SolverRefused(format!(
            "{n} candidates exceed the exact-solver cap of {}; use the greedy+swap solver or raise the cap",
            opts.cap
        )));
    }
    let fixed = inst.fixed_sites();
    let mut covered = AreaSet::new(inst.areas().len());
    let mut z = 0;
    for &j in &fixed {
        z += inst.gain(j, &covered);
        inst.cover_with(j, &mut covered);
    }
    let free: Vec<usize> = (0..n).filter(|j| !inst.sites()[*j].fixed_open).collect();
    let need = p - fixed.len();

    let incumbent = greedy::improve_swap(inst, &greedy::solve_greedy(inst, p)?);
    let mut search = Search {
        inst,
        need,
        best_z: incumbent.z,
        best: incumbent.selected_idx,
        best_from_search: false,
        stack: Vec::with_capacity(need),
        free,
    };
    search.dfs(0, z, &covered);

    let mut selected = fixed;
    if search.best_from_search {
        selected.extend(search.best.iter().copied());
    } else if need > 0 {
        // The root bound always admits an optimum, so this is unreachable in practice.
        selected = search.best;
    }
    Ok(inst.solution(selected, Certificate::Optimal, Vec::new()))
}

impl Search<'_> {
    fn dfs(&mut self, start: usize, z: u64, covered: &AreaSet) {
        let depth = self.stack.len();
        if depth == self.need {
            if z > self.best_z || (z == self.best_z && !self.best_from_search) {
                self.best_z = z;
                self.best = self.stack.clone();
                self.best_from_search = true;
            }
            return;
        }
        let open = self.need - depth;
        if self.free.len() - start < open {
            return;
        }
        let gains: Vec<u64> = self.free[start..]
            .iter()
            .map(|&j| self.inst.gain(j, covered))
            .collect();
        let mut top = gains.clone();
        top.sort_unstable_by(|a, b| b.cmp(a));
        let bound = z + top[..open].iter().sum::<u64>();
        if bound < self.best_z || (bound == self.best_z && self.best_from_search) {
            return;
        }
        for pos in start..=(self.free.len() - open) {
            let j = self.free[pos];
            let gain = gains[pos - start];
            let mut next = covered.clone();
            self.inst.cover_with(j, &mut next);
            self.stack.push(j);
            self.dfs(pos + 1, z + gain, &next);
            self.stack.pop();
        }
    }
}
