use super::{parallel_map, AgentPool, ProtocolError};
use crate::agents::Policy;
use crate::metrics::CrossPlayMatrix;
use crate::play::{evaluate_pair, std_error};

/// Greedy cross-play of every pair of pool members, self-pairs included.
/// Each cell plays `games_per_pair` deals in both seat orders and averages all
/// of them; the same deals are used for every cell.
pub fn compute_crossplay(
    pool: &AgentPool,
    games_per_pair: usize,
    base_seed: u64,
    workers: usize,
) -> Result<CrossPlayMatrix, ProtocolError> {
    if games_per_pair == 0 {
        return Err(ProtocolError::InvalidArgument("games_per_pair must be at least 1".into()));
    }
    let n = pool.len();
    let config = pool.config();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let cells = parallel_map(&pairs, workers, |&(i, j)| -> Result<(f64, f64), ProtocolError> {
        let a: &dyn Policy = pool.entries()[i].policy.as_ref();
        let b: &dyn Policy = pool.entries()[j].policy.as_ref();
        let mut scores = evaluate_pair(config, [a, b], games_per_pair, base_seed)?;
        scores.extend(evaluate_pair(config, [b, a], games_per_pair, base_seed)?);
        let values: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
        Ok((values.iter().sum::<f64>() / values.len() as f64, std_error(&values)))
    });
    let mut mean = vec![vec![0.0; n]; n];
    let mut stderr = vec![vec![0.0; n]; n];
    for (&(i, j), cell) in pairs.iter().zip(cells) {
        let (m, s) = cell?;
        mean[i][j] = m;
        mean[j][i] = m;
        stderr[i][j] = s;
        stderr[j][i] = s;
    }
    Ok(CrossPlayMatrix { ids: pool.ids(), mean, stderr, games_per_cell: games_per_pair, max_score: config.max_score() as f64 })
}
