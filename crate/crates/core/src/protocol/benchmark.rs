use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{parallel_map, AgentPool, ProtocolError};
use crate::metrics::{build_report, pool_metrics, AdaptationReport, Aggregator, CrossPlayMatrix, PartnerInput, UpperBound};
use crate::play::{evaluate_pair, mean};
use crate::training::{finetune_with_partner, AdaptationTrace, TrainConfig, EVAL_SEED_BASE};

/// One adaptation benchmark: a learner fine-tuned against each partner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub learner_id: String,
    pub partner_ids: Vec<String>,
    pub tconfig: TrainConfig,
    pub budget: usize,
    /// Independent fine-tuning runs per partner, averaged pointwise.
    pub seeds_per_pair: usize,
    pub base_seed: u64,
    pub upper_bound: UpperBound,
    pub aggregator: Aggregator,
    /// Concurrent fine-tuning runs.
    pub workers: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            learner_id: String::new(),
            partner_ids: Vec::new(),
            tconfig: TrainConfig::default(),
            budget: 10_000,
            seeds_per_pair: 1,
            base_seed: 0,
            upper_bound: UpperBound::MaxScore,
            aggregator: Aggregator::Mean,
            workers: 1,
        }
    }
}

fn run_seed(base: u64, partner: usize, seed: usize) -> u64 {
    crate::training::splitmix_seed(base ^ ((partner as u64) << 32) ^ seed as u64)
}

/// Fine-tunes the learner against every partner `seeds_per_pair` times and
/// assembles the report. `matrix`, when given, supplies self-play upper
/// bounds and is embedded (restricted to the partners) with its strength and
/// diversity.
pub fn run_benchmark(
    pool: &AgentPool,
    matrix: Option<&CrossPlayMatrix>,
    spec: &BenchmarkSpec,
) -> Result<AdaptationReport, ProtocolError> {
    if spec.partner_ids.is_empty() || spec.seeds_per_pair == 0 {
        return Err(ProtocolError::InvalidArgument("need at least one partner and one seed".into()));
    }
    if spec.partner_ids.contains(&spec.learner_id) {
        return Err(ProtocolError::InvalidArgument(format!("learner {} is also a partner", spec.learner_id)));
    }
    let learner = pool.get(&spec.learner_id)?;
    let partners = spec.partner_ids.iter().map(|id| pool.get(id)).collect::<Result<Vec<_>, _>>()?;
    let config = pool.config();
    let max_score = config.max_score() as f64;

    let partner_matrix = match matrix {
        Some(m) => {
            let idx = spec
                .partner_ids
                .iter()
                .map(|id| m.index_of(id).ok_or_else(|| ProtocolError::UnknownAgent(id.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            Some(m.submatrix(&idx))
        }
        None => None,
    };
    let mut c_stars = Vec::with_capacity(partners.len());
    for (k, p) in partners.iter().enumerate() {
        let c = match (&spec.upper_bound, &partner_matrix) {
            (_, Some(m)) => spec.upper_bound.c_star(m, k)?,
            (UpperBound::MaxScore, None) => max_score,
            (UpperBound::BestResponse(values), None) => {
                *values.get(&p.id).ok_or_else(|| ProtocolError::UnknownAgent(p.id.clone()))?
            }
            (UpperBound::SelfPlay, None) => {
                let games = spec.tconfig.eval_games;
                mean(&evaluate_pair(config, [p.policy.as_ref(), p.policy.as_ref()], games, EVAL_SEED_BASE)?)
            }
        };
        c_stars.push(c);
    }

    let jobs: Vec<(usize, usize)> =
        (0..partners.len()).flat_map(|p| (0..spec.seeds_per_pair).map(move |s| (p, s))).collect();
    let traces = parallel_map(&jobs, spec.workers, |&(p, s)| -> Result<AdaptationTrace, ProtocolError> {
        let partner = partners[p];
        let (trace, _) = finetune_with_partner(
            &learner.checkpoint,
            partner.policy.clone(),
            &partner.id,
            &spec.tconfig,
            spec.budget,
            run_seed(spec.base_seed, p, s),
        )?;
        Ok(trace)
    });
    let traces = traces.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut inputs = Vec::with_capacity(partners.len());
    for (p, partner) in partners.iter().enumerate() {
        let runs = &traces[p * spec.seeds_per_pair..(p + 1) * spec.seeds_per_pair];
        let n = runs.len() as f64;
        let points = (0..runs[0].points.len())
            .map(|i| {
                let episode = runs[0].points[i].episode;
                let score = runs.iter().map(|r| r.points[i].score).sum::<f64>() / n;
                let perfect = runs.iter().map(|r| r.points[i].perfect_rate).sum::<f64>() / n;
                (episode, score, perfect)
            })
            .collect();
        inputs.push(PartnerInput { partner_id: partner.id.clone(), c_star: c_stars[p], points });
    }

    let mut report =
        build_report(&spec.learner_id, inputs, spec.budget, spec.seeds_per_pair, &spec.upper_bound, spec.aggregator)?;
    if let Some(m) = &partner_matrix {
        if m.len() >= 2 {
            report.pool = Some(pool_metrics(m, &spec.upper_bound)?);
        }
    }
    report.matrix = partner_matrix;
    report.provenance = json!({
        "game": config,
        "benchmark": spec,
        "learner": learner.provenance(),
        "partners": partners.iter().map(|p| json!({"id": p.id, "provenance": p.provenance()})).collect::<Vec<_>>(),
    });
    Ok(report)
}
