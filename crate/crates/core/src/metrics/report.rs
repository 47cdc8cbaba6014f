use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{aggregate, expand_trace, regret_curve, strength, Aggregator, CrossPlayMatrix, MetricsError};

/// How episodes between two evaluations are scored when integrating regret.
pub const INTERPOLATION_RULE: &str =
    "piecewise constant: episode t is scored by the latest evaluation at an episode index <= t";

/// Reference score `C*_j` each partner's regret is measured against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", content = "values")]
pub enum UpperBound {
    #[default]
    MaxScore,
    SelfPlay,
    /// Externally supplied best-response scores keyed by partner id.
    BestResponse(BTreeMap<String, f64>),
}

impl UpperBound {
    pub fn label(&self) -> &'static str {
        match self {
            UpperBound::MaxScore => "max_score",
            UpperBound::SelfPlay => "self_play",
            UpperBound::BestResponse(_) => "best_response",
        }
    }

    /// `C*` of agent `j` of `matrix`.
    pub fn c_star(&self, matrix: &CrossPlayMatrix, j: usize) -> Result<f64, MetricsError> {
        let value = match self {
            UpperBound::MaxScore => matrix.max_score,
            UpperBound::SelfPlay => matrix.self_play(j),
            UpperBound::BestResponse(values) => *values
                .get(&matrix.ids[j])
                .ok_or_else(|| MetricsError::OutOfRange(format!("no best-response score for {}", matrix.ids[j])))?,
        };
        if !(0.0..=matrix.max_score).contains(&value) {
            return Err(MetricsError::OutOfRange(format!("upper bound {value} outside [0, {}]", matrix.max_score)));
        }
        Ok(value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolMetrics {
    pub ids: Vec<String>,
    pub upper_bound: UpperBound,
    pub c_stars: Vec<f64>,
    pub strengths: Vec<f64>,
    pub strength: f64,
    pub diversity: f64,
}

/// Strength and diversity of every agent of `matrix` taken as one pool.
pub fn pool_metrics(matrix: &CrossPlayMatrix, upper_bound: &UpperBound) -> Result<PoolMetrics, MetricsError> {
    let c_stars = (0..matrix.len()).map(|j| upper_bound.c_star(matrix, j)).collect::<Result<Vec<_>, _>>()?;
    let (strengths, s) = strength(&c_stars, matrix.max_score)?;
    Ok(PoolMetrics {
        ids: matrix.ids.clone(),
        upper_bound: upper_bound.clone(),
        c_stars,
        strengths,
        strength: s,
        diversity: matrix.diversity()?,
    })
}

/// Adaptation curves of the learner against one partner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartnerAdaptation {
    pub partner_id: String,
    pub c_star: f64,
    /// Evaluated score and perfect rate at each evaluation episode.
    pub score: Vec<f64>,
    pub perfect_rate: Vec<f64>,
    /// Regret after each horizon of the report.
    pub total_regret: Vec<f64>,
    pub average_regret: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurves {
    pub score: Vec<f64>,
    pub perfect_rate: Vec<f64>,
    pub total_regret: Vec<f64>,
    pub average_regret: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationReport {
    pub learner_id: String,
    pub budget: usize,
    pub seeds_per_pair: usize,
    pub upper_bound: String,
    pub aggregator: Aggregator,
    pub interpolation: String,
    /// Episode indices of the score and perfect-rate curves.
    pub eval_episodes: Vec<usize>,
    /// Horizons `T` of the regret curves.
    pub regret_horizons: Vec<usize>,
    pub partners: Vec<PartnerAdaptation>,
    pub mean: AggregateCurves,
    pub iqm: AggregateCurves,
    pub pool: Option<PoolMetrics>,
    pub matrix: Option<CrossPlayMatrix>,
    pub provenance: serde_json::Value,
}

impl AdaptationReport {
    /// Curves of the declared aggregator.
    pub fn aggregated(&self) -> &AggregateCurves {
        match self.aggregator {
            Aggregator::Mean => &self.mean,
            Aggregator::Iqm => &self.iqm,
        }
    }
}

/// Per-partner input of [`build_report`]: evaluation points
/// `(episode, score, perfect_rate)` starting at episode 0.
pub struct PartnerInput {
    pub partner_id: String,
    pub c_star: f64,
    pub points: Vec<(usize, f64, f64)>,
}

/// Assembles curves for all partners. Regret is reported at every nonzero
/// evaluation episode and at the budget.
pub fn build_report(
    learner_id: &str,
    partners: Vec<PartnerInput>,
    budget: usize,
    seeds_per_pair: usize,
    upper_bound: &UpperBound,
    aggregator: Aggregator,
) -> Result<AdaptationReport, MetricsError> {
    let first = partners.first().ok_or(MetricsError::Empty)?;
    let eval_episodes: Vec<usize> = first.points.iter().map(|p| p.0).collect();
    if partners.iter().any(|p| p.points.iter().map(|q| q.0).ne(eval_episodes.iter().copied())) {
        return Err(MetricsError::Misaligned("partners were evaluated at different episodes".into()));
    }
    let mut horizons: Vec<usize> = eval_episodes.iter().copied().filter(|&e| e > 0 && e <= budget).collect();
    if budget > 0 && horizons.last() != Some(&budget) {
        horizons.push(budget);
    }

    let mut out = Vec::with_capacity(partners.len());
    for p in partners {
        let scores: Vec<(usize, f64)> = p.points.iter().map(|q| (q.0, q.1)).collect();
        let dense = expand_trace(&scores, budget)?;
        let curve = regret_curve(&dense, p.c_star);
        out.push(PartnerAdaptation {
            partner_id: p.partner_id,
            c_star: p.c_star,
            score: p.points.iter().map(|q| q.1).collect(),
            perfect_rate: p.points.iter().map(|q| q.2).collect(),
            total_regret: horizons.iter().map(|&t| curve[t - 1].0).collect(),
            average_regret: horizons.iter().map(|&t| curve[t - 1].1).collect(),
        });
    }

    let agg = |mode: Aggregator| -> Result<AggregateCurves, MetricsError> {
        let collect = |f: &dyn Fn(&PartnerAdaptation) -> &Vec<f64>| -> Vec<Vec<f64>> { out.iter().map(|p| f(p).clone()).collect() };
        Ok(AggregateCurves {
            score: aggregate(&collect(&|p| &p.score), mode)?,
            perfect_rate: aggregate(&collect(&|p| &p.perfect_rate), mode)?,
            total_regret: aggregate(&collect(&|p| &p.total_regret), mode)?,
            average_regret: aggregate(&collect(&|p| &p.average_regret), mode)?,
        })
    };
    Ok(AdaptationReport {
        learner_id: learner_id.to_string(),
        budget,
        seeds_per_pair,
        upper_bound: upper_bound.label().to_string(),
        aggregator,
        interpolation: INTERPOLATION_RULE.to_string(),
        mean: agg(Aggregator::Mean)?,
        iqm: agg(Aggregator::Iqm)?,
        eval_episodes,
        regret_horizons: horizons,
        partners: out,
        pool: None,
        matrix: None,
        provenance: serde_json::Value::Null,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(id: &str, c_star: f64, pts: &[(usize, f64)]) -> PartnerInput {
        PartnerInput { partner_id: id.into(), c_star, points: pts.iter().map(|&(e, s)| (e, s, 0.0)).collect() }
    }

    #[test]
    fn report_regret_matches_dense_formula() {
        let r = build_report(
            "l",
            vec![input("a", 10.0, &[(0, 4.0), (2, 6.0), (4, 8.0)]), input("b", 10.0, &[(0, 2.0), (2, 2.0), (4, 2.0)])],
            5,
            1,
            &UpperBound::MaxScore,
            Aggregator::Mean,
        )
        .unwrap();
        assert_eq!(r.regret_horizons, vec![2, 4, 5]);
        // a: dense 4,4,6,6,8
        assert_eq!(r.partners[0].total_regret, vec![12.0, 20.0, 22.0]);
        assert_eq!(r.partners[1].total_regret, vec![16.0, 32.0, 40.0]);
        assert_eq!(r.mean.total_regret, vec![14.0, 26.0, 31.0]);
    }

    #[test]
    fn zero_budget_has_no_regret_points() {
        let r = build_report("l", vec![input("a", 10.0, &[(0, 4.0)])], 0, 1, &UpperBound::MaxScore, Aggregator::Iqm)
            .unwrap();
        assert!(r.regret_horizons.is_empty() && r.partners[0].total_regret.is_empty());
        assert_eq!(r.aggregated().score, vec![4.0]);
    }

    #[test]
    fn best_response_needs_every_partner() {
        let m = CrossPlayMatrix {
            ids: vec!["a".into(), "b".into()],
            mean: vec![vec![8.0, 1.0], vec![1.0, 6.0]],
            stderr: vec![vec![0.0; 2]; 2],
            games_per_cell: 1,
            max_score: 10.0,
        };
        let br = UpperBound::BestResponse([("a".to_string(), 9.0)].into_iter().collect());
        assert_eq!(br.c_star(&m, 0).unwrap(), 9.0);
        assert!(br.c_star(&m, 1).is_err());
        assert_eq!(UpperBound::SelfPlay.c_star(&m, 1).unwrap(), 6.0);
        let p = pool_metrics(&m, &UpperBound::SelfPlay).unwrap();
        assert_eq!(p.strength, 0.7);
        assert_eq!(p.diversity, 0.9);
    }
}
