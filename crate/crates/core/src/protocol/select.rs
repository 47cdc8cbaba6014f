use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::metrics::{CrossPlayMatrix, UpperBound};

/// Largest number of candidate subsets searched exhaustively.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Exhaustive when the subset count is within [`EXHAUSTIVE_LIMIT`].
    #[default]
    Auto,
    Exhaustive,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartnerSelection {
    /// Chosen partners in lexicographic id order.
    pub ids: Vec<String>,
    pub c_stars: Vec<f64>,
    pub strength: f64,
    pub diversity: f64,
    pub k: usize,
    pub strength_min: f64,
    pub diversity_target: f64,
    pub upper_bound: String,
    pub method: String,
    pub candidates: usize,
}

/// Diversity of the agents `members` of `matrix`, summing cells in the given
/// member order.
pub fn subset_diversity(matrix: &CrossPlayMatrix, members: &[usize]) -> f64 {
    let n = members.len();
    let mut off = 0.0;
    for &i in members {
        for &j in members {
            if i != j {
                off += matrix.mean[i][j];
            }
        }
    }
    1.0 - off / ((n * n - n) as f64 * matrix.max_score)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Picks `k` partners whose strengths are all at least `strength_min` and
/// whose diversity is closest to `diversity_target`. Candidates are ordered by
/// id; among equally close subsets the lexicographically first wins, which
/// makes the result independent of the pool order.
pub fn select_partners(
    matrix: &CrossPlayMatrix,
    k: usize,
    strength_min: f64,
    diversity_target: f64,
    upper_bound: &UpperBound,
    mode: SearchMode,
) -> Result<PartnerSelection, ProtocolError> {
    if k < 2 || k > matrix.len() {
        return Err(ProtocolError::InvalidArgument(format!("k = {k} must lie in [2, {}]", matrix.len())));
    }
    let mut candidates: Vec<usize> = Vec::new();
    for j in 0..matrix.len() {
        if upper_bound.c_star(matrix, j)? / matrix.max_score >= strength_min {
            candidates.push(j);
        }
    }
    candidates.sort_by(|&a, &b| matrix.ids[a].cmp(&matrix.ids[b]));
    if candidates.len() < k {
        return Err(ProtocolError::Infeasible(format!(
            "{} agents reach strength {strength_min}, {k} needed",
            candidates.len()
        )));
    }
    let exhaustive = match mode {
        SearchMode::Auto => binomial(candidates.len(), k) <= EXHAUSTIVE_LIMIT,
        SearchMode::Exhaustive => true,
        SearchMode::Greedy => false,
    };
    let positions = if exhaustive {
        exhaustive_search(matrix, &candidates, k, diversity_target)
    } else {
        greedy_search(matrix, &candidates, k, diversity_target)
    };
    let members: Vec<usize> = positions.iter().map(|&p| candidates[p]).collect();
    let c_stars = members.iter().map(|&j| upper_bound.c_star(matrix, j)).collect::<Result<Vec<_>, _>>()?;
    let strength = c_stars.iter().map(|c| c / matrix.max_score).sum::<f64>() / k as f64;
    Ok(PartnerSelection {
        ids: members.iter().map(|&j| matrix.ids[j].clone()).collect(),
        diversity: subset_diversity(matrix, &members),
        c_stars,
        strength,
        k,
        strength_min,
        diversity_target,
        upper_bound: upper_bound.label().to_string(),
        method: if exhaustive { "exhaustive" } else { "greedy" }.to_string(),
        candidates: candidates.len(),
    })
}

fn distance(matrix: &CrossPlayMatrix, candidates: &[usize], positions: &[usize], target: f64) -> f64 {
    let members: Vec<usize> = positions.iter().map(|&p| candidates[p]).collect();
    (subset_diversity(matrix, &members) - target).abs()
}

fn exhaustive_search(matrix: &CrossPlayMatrix, candidates: &[usize], k: usize, target: f64) -> Vec<usize> {
    let m = candidates.len();
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best = combo.clone();
    let mut best_d = distance(matrix, candidates, &combo, target);
    loop {
        // Advance to the next combination in lexicographic order.
        let mut i = k;
        while i > 0 && combo[i - 1] == m - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        combo[i - 1] += 1;
        for j in i..k {
            combo[j] = combo[j - 1] + 1;
        }
        let d = distance(matrix, candidates, &combo, target);
        if d < best_d {
            best_d = d;
            best = combo.clone();
        }
    }
}

/// Best-improvement swap search from two starts: the first `k` candidates, and
/// a constructive pass that grows the set one agent at a time.
fn greedy_search(matrix: &CrossPlayMatrix, candidates: &[usize], k: usize, target: f64) -> Vec<usize> {
    let m = candidates.len();
    let mut starts = vec![(0..k).collect::<Vec<usize>>()];

    let mut best_pair = (0, 1);
    let mut best_d = f64::INFINITY;
    for a in 0..m {
        for b in a + 1..m {
            let d = distance(matrix, candidates, &[a, b], target);
            if d < best_d {
                best_d = d;
                best_pair = (a, b);
            }
        }
    }
    let mut grown = vec![best_pair.0, best_pair.1];
    while grown.len() < k {
        let mut pick = None;
        let mut pick_d = f64::INFINITY;
        for c in (0..m).filter(|c| !grown.contains(c)) {
            let mut trial = grown.clone();
            trial.push(c);
            trial.sort_unstable();
            let d = distance(matrix, candidates, &trial, target);
            if d < pick_d {
                pick_d = d;
                pick = Some(c);
            }
        }
        grown.push(pick.unwrap());
        grown.sort_unstable();
    }
    starts.push(grown);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for start in starts {
        let result = swap_improve(matrix, candidates, start, target);
        let d = distance(matrix, candidates, &result, target);
        let better = match &best {
            None => true,
            Some((bd, bs)) => d < *bd || (d == *bd && result < *bs),
        };
        if better {
            best = Some((d, result));
        }
    }
    best.unwrap().1
}

fn swap_improve(matrix: &CrossPlayMatrix, candidates: &[usize], mut set: Vec<usize>, target: f64) -> Vec<usize> {
    let m = candidates.len();
    let mut current = distance(matrix, candidates, &set, target);
    loop {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for slot in 0..set.len() {
            for c in (0..m).filter(|c| !set.contains(c)) {
                let mut trial = set.clone();
                trial[slot] = c;
                trial.sort_unstable();
                let d = distance(matrix, candidates, &trial, target);
                if d < current && best.as_ref().is_none_or(|(bd, bs)| d < *bd || (d == *bd && trial < *bs)) {
                    best = Some((d, trial));
                }
            }
        }
        match best {
            Some((d, trial)) => {
                current = d;
                set = trial;
            }
            None => return set,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(ids: &[&str], mean: Vec<Vec<f64>>) -> CrossPlayMatrix {
        let n = ids.len();
        CrossPlayMatrix {
            ids: ids.iter().map(|s| s.to_string()).collect(),
            mean,
            stderr: vec![vec![0.0; n]; n],
            games_per_cell: 1,
            max_score: 10.0,
        }
    }

    #[test]
    fn finds_mutually_incompatible_agents() {
        // a, c, e never score together; b and d play well with everyone.
        let ids = ["a", "b", "c", "d", "e"];
        let zero = [0usize, 2, 4];
        let mean = (0..5)
            .map(|i| {
                (0..5)
                    .map(|j| if i == j { 9.0 } else if zero.contains(&i) && zero.contains(&j) { 0.0 } else { 7.0 })
                    .collect()
            })
            .collect();
        let m = matrix(&ids, mean);
        let s = select_partners(&m, 3, 0.5, 1.0, &UpperBound::SelfPlay, SearchMode::Auto).unwrap();
        assert_eq!(s.ids, vec!["a", "c", "e"]);
        assert_eq!(s.diversity, 1.0);
        let g = select_partners(&m, 3, 0.5, 1.0, &UpperBound::SelfPlay, SearchMode::Greedy).unwrap();
        assert_eq!(g.ids, s.ids);
        let all = select_partners(&m, 5, 0.0, 0.3, &UpperBound::SelfPlay, SearchMode::Auto).unwrap();
        assert_eq!(all.ids.len(), 5);
    }

    #[test]
    fn infeasible_strength() {
        let m = matrix(&["a", "b", "c"], vec![vec![3.0, 1.0, 1.0], vec![1.0, 9.0, 1.0], vec![1.0, 1.0, 9.0]]);
        let err = select_partners(&m, 3, 0.5, 0.5, &UpperBound::SelfPlay, SearchMode::Auto);
        assert!(matches!(err, Err(ProtocolError::Infeasible(_))));
        assert!(select_partners(&m, 1, 0.0, 0.5, &UpperBound::SelfPlay, SearchMode::Auto).is_err());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(8, 5), 56);
        assert_eq!(binomial(40, 5), 658_008);
        assert_eq!(binomial(50, 5), 2_118_760);
    }
}
