use super::{AreaSet, Certificate, MclpInstance, MclpSolution};
use crate::error::Result;

/// Adds, `p` times, the site with the largest marginal covered population
/// (ties to the smallest id). Fixed-open sites are placed first and do not
/// count as rounds. The gain of each round is recorded.
pub fn solve_greedy(inst: &MclpInstance, p: usize) -> Result<MclpSolution> {
    inst.check_p(p)?;
    let n = inst.sites().len();
    let mut covered = AreaSet::new(inst.areas().len());
    let mut chosen = vec![false; n];
    let mut selected = inst.fixed_sites();
    for &j in &selected {
        chosen[j] = true;
        inst.cover_with(j, &mut covered);
    }
    let mut gains = Vec::with_capacity(p - selected.len());
    while selected.len() < p {
        let (j, gain) = (0..n)
            .filter(|&j| !chosen[j])
            .map(|j| (j, inst.gain(j, &covered)))
            .fold(None, |best: Option<(usize, u64)>, (j, g)| match best {
                Some((_, bg)) if bg >= g => best,
                _ => Some((j, g)),
            })
            .expect("p <= number of sites");
        chosen[j] = true;
        inst.cover_with(j, &mut covered);
        selected.push(j);
        gains.push(gain);
    }
    Ok(inst.solution(selected, Certificate::Heuristic, gains))
}

/// Best-improvement single swaps until no swap strictly raises coverage.
///
/// Each pass scans (outgoing, incoming) pairs in id order and applies the
/// first pair reaching the largest improvement. Fixed-open sites never leave.
pub fn improve_swap(inst: &MclpInstance, sol: &MclpSolution) -> MclpSolution {
    let n = inst.sites().len();
    let m = inst.areas().len();
    let mut selected = sol.selected_idx.clone();
    let mut in_sel = vec![false; n];
    let mut counts = vec![0u32; m];
    for &j in &selected {
        in_sel[j] = true;
        for &i in inst.covers(j) {
            counts[i] += 1;
        }
    }
    let mut z = inst.evaluate(&selected);
    let pop = |i: usize| inst.areas()[i].population;

    loop {
        let mut best: Option<(usize, usize, u64)> = None;
        for (pos, &out) in selected.iter().enumerate() {
            if inst.sites()[out].fixed_open {
                continue;
            }
            let lost: u64 = inst.covers(out).iter().filter(|&&i| counts[i] == 1).map(|&i| pop(i)).sum();
            let mut out_covers = AreaSet::new(m);
            inst.cover_with(out, &mut out_covers);
            for inc in (0..n).filter(|&j| !in_sel[j]) {
                let won: u64 = inst
                    .covers(inc)
                    .iter()
                    .filter(|&&i| counts[i] == 0 || (counts[i] == 1 && out_covers.contains(i)))
                    .map(|&i| pop(i))
                    .sum();
                let candidate = z - lost + won;
                if candidate > best.map_or(z, |b| b.2) {
                    best = Some((pos, inc, candidate));
                }
            }
        }
        let Some((pos, inc, new_z)) = best else { break };
        let out = selected[pos];
        for &i in inst.covers(out) {
            counts[i] -= 1;
        }
        for &i in inst.covers(inc) {
            counts[i] += 1;
        }
        in_sel[out] = false;
        in_sel[inc] = true;
        selected[pos] = inc;
        z = new_z;
        // Keep id order so the next pass scans deterministically.
        selected.sort_unstable();
    }
    inst.solution(selected, Certificate::Heuristic, sol.marginal_gains.clone())
}
