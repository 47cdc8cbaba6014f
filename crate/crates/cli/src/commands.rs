use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use fsc_core::agents::{load_checkpoint, save_checkpoint, Checkpoint, Convention, RuleParams};
use fsc_core::metrics::{pool_metrics, AdaptationReport, CrossPlayMatrix, PoolMetrics, UpperBound};
use fsc_core::protocol::{
    compute_crossplay, run_benchmark, run_hp_sweep, select_partners, AgentPool, BenchmarkSpec, PartnerSelection,
    SweepReport,
};
use fsc_core::training::{run_selfplay_training, write_log_csv};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::spec::{Overrides, RunSpec, SpecError};

/// Every JSON artifact: what it is, the run spec that produced it, and the data.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: String,
    pub run_spec: Value,
    pub data: Value,
}

pub fn write_json(path: &Path, kind: &str, spec: &RunSpec, data: impl Serialize) -> Result<()> {
    let env = Envelope { kind: kind.to_string(), run_spec: spec.to_json(), data: serde_json::to_value(data)? };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_envelope(path: &Path) -> Result<Envelope> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!(SpecError(format!("{}: {e}", path.display()))))
}

/// Header lines for CSV artifacts: the resolved spec, one TOML line each.
pub fn spec_header(spec_toml: &str) -> Vec<String> {
    let mut lines = vec!["run_spec (TOML):".to_string()];
    lines.extend(spec_toml.lines().map(str::to_string));
    lines
}

fn prepend_header(path: &Path, header: &[String]) -> Result<()> {
    let body = fs::read_to_string(path)?;
    let mut text: String = header.iter().map(|l| format!("# {l}\n")).collect();
    text.push_str(&body);
    fs::write(path, text)?;
    Ok(())
}

pub struct RunContext {
    pub spec: RunSpec,
    pub max_workers: Option<usize>,
}

impl RunContext {
    pub fn new(spec_path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut spec = match spec_path {
            Some(p) => RunSpec::load(p)?,
            None => RunSpec::default(),
        };
        spec.apply(overrides);
        spec.validate()?;
        Ok(Self { spec, max_workers: overrides.max_workers })
    }

    fn out(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.spec.out_dir)
            .with_context(|| format!("creating output directory {}", self.spec.out_dir.display()))?;
        Ok(self.spec.out_dir.join(name))
    }

    fn workers(&self, n: usize) -> usize {
        self.spec.capped(n, self.max_workers)
    }

    fn load_pool(&self) -> Result<AgentPool> {
        if self.spec.pool.agents.is_empty() {
            return Err(anyhow!(SpecError("[pool] lists no agents".into())));
        }
        let mut members = Vec::new();
        for a in &self.spec.pool.agents {
            let ckpt = match a.source.strip_prefix("rule:") {
                Some(conv) => {
                    let c = Convention::from_id(conv)
                        .ok_or_else(|| SpecError(format!("unknown convention {conv} for agent {}", a.id)))?;
                    Checkpoint::for_rule(&self.spec.game, c, RuleParams::default())
                }
                None => load_checkpoint(&a.source).with_context(|| format!("loading agent {} from {}", a.id, a.source))?,
            };
            members.push((a.id.clone(), ckpt));
        }
        Ok(AgentPool::new(members)?)
    }

    fn matrix_for(&self, pool: &AgentPool) -> Result<CrossPlayMatrix> {
        let path = self.spec.out_dir.join("crossplay.json");
        if path.exists() {
            let env = read_envelope(&path)?;
            let matrix: CrossPlayMatrix = serde_json::from_value(env.data["matrix"].clone())?;
            let ids = pool.ids();
            if ids.iter().all(|id| matrix.index_of(id).is_some()) {
                return Ok(matrix);
            }
        }
        let c = &self.spec.crossplay;
        Ok(compute_crossplay(pool, c.games_per_pair, c.base_seed, self.workers(c.workers))?)
    }
}

pub fn cmd_train(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let spec = &ctx.spec;
    let mut train = spec.train.clone();
    train.num_threads = ctx.workers(train.num_threads);
    let (mut ckpt, log) = run_selfplay_training(&spec.game, &train, spec.architecture, spec.seed)?;
    ckpt.meta.provenance = Some(json!({ "run_spec": spec.to_json() }));
    let name = format!("{}-{}-s{}", ckpt.meta.algorithm.tag().to_lowercase().replace('+', "-"), spec.architecture, spec.seed);
    let ckpt_path = ctx.out(&format!("{name}.fscb"))?;
    save_checkpoint(&ckpt, &ckpt_path)?;
    let log_path = ctx.out(&format!("{name}.log.csv"))?;
    write_log_csv(&log_path, &log)?;
    prepend_header(&log_path, &spec_header(&spec.to_toml()))?;
    println!("self-play score {:.3}", ckpt.meta.self_play_score.unwrap_or(f64::NAN));
    Ok(vec![ckpt_path, log_path])
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CrossplayData {
    pub matrix: CrossPlayMatrix,
    pub pool: Option<PoolMetrics>,
    pub provenance: Value,
}

pub fn cmd_crossplay(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let spec = &ctx.spec;
    let pool = ctx.load_pool()?;
    let c = &spec.crossplay;
    let matrix = compute_crossplay(&pool, c.games_per_pair, c.base_seed, ctx.workers(c.workers))?;
    let metrics = if matrix.len() >= 2 { Some(pool_metrics(&matrix, &spec.select.upper_bound)?) } else { None };
    let provenance: Value = pool.entries().iter().map(|e| json!({"id": e.id, "provenance": e.provenance()})).collect();
    let json_path = ctx.out("crossplay.json")?;
    write_json(&json_path, "crossplay", spec, CrossplayData { matrix: matrix.clone(), pool: metrics, provenance })?;
    let (mean, stderr) = (ctx.out("crossplay_mean.csv")?, ctx.out("crossplay_stderr.csv")?);
    matrix.write_csv(&mean, &stderr, &spec_header(&spec.to_toml()))?;
    Ok(vec![json_path, mean, stderr])
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionData {
    pub selection: PartnerSelection,
    pub matrix: CrossPlayMatrix,
}

pub fn cmd_select(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let spec = &ctx.spec;
    let pool = ctx.load_pool()?;
    let matrix = ctx.matrix_for(&pool)?;
    let s = &spec.select;
    let selection = select_partners(&matrix, s.k, s.strength_min, s.diversity_target, &s.upper_bound, s.search)?;
    println!("selected {} (S = {:.4}, D = {:.4})", selection.ids.join(", "), selection.strength, selection.diversity);
    let path = ctx.out("selection.json")?;
    write_json(&path, "selection", spec, SelectionData { selection, matrix })?;
    Ok(vec![path])
}

fn benchmark_spec(ctx: &RunContext) -> Result<BenchmarkSpec> {
    let spec = &ctx.spec;
    let a = &spec.adapt;
    let partner_ids = if a.partners.is_empty() {
        let path = spec.out_dir.join("selection.json");
        let env = read_envelope(&path).context("adapt.partners is empty and no selection.json is available")?;
        let sel: SelectionData = serde_json::from_value(env.data)?;
        sel.selection.ids
    } else {
        a.partners.clone()
    };
    let mut tconfig = spec.train.clone();
    tconfig.num_threads = ctx.workers(tconfig.num_threads);
    Ok(BenchmarkSpec {
        learner_id: a.learner.clone(),
        partner_ids,
        tconfig,
        budget: a.budget,
        seeds_per_pair: a.seeds_per_pair,
        base_seed: a.base_seed,
        upper_bound: a.upper_bound.clone(),
        aggregator: a.aggregator,
        workers: ctx.workers(a.workers),
    })
}

fn partner_matrix(ctx: &RunContext, pool: &AgentPool, bench: &BenchmarkSpec) -> Result<Option<CrossPlayMatrix>> {
    if bench.partner_ids.len() < 2 && bench.upper_bound != UpperBound::SelfPlay {
        return Ok(None);
    }
    Ok(Some(ctx.matrix_for(pool)?))
}

pub fn cmd_adapt(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let pool = ctx.load_pool()?;
    let bench = benchmark_spec(ctx)?;
    let matrix = partner_matrix(ctx, &pool, &bench)?;
    let report = run_benchmark(&pool, matrix.as_ref(), &bench)?;
    crate::report::check_adaptation(&report).map_err(|e| anyhow!(e))?;
    let path = ctx.out("report.json")?;
    write_json(&path, "adaptation", &ctx.spec, &report)?;
    Ok(vec![path])
}

pub fn cmd_sweep(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let pool = ctx.load_pool()?;
    let bench = benchmark_spec(ctx)?;
    let matrix = partner_matrix(ctx, &pool, &bench)?;
    let sweep: SweepReport = run_hp_sweep(&pool, matrix.as_ref(), &bench, &ctx.spec.sweep)?;
    for p in &sweep.points {
        crate::report::check_adaptation(&p.report).map_err(|e| anyhow!(e))?;
        println!(
            "{:<40} average regret {:>8.4}  perfect rate {:.3}",
            p.label,
            p.final_average_regret.unwrap_or(f64::NAN),
            p.final_perfect_rate
        );
    }
    let path = ctx.out("sweep.json")?;
    write_json(&path, "sweep", &ctx.spec, &sweep)?;
    Ok(vec![path])
}

/// Parses an adaptation report envelope.
pub fn adaptation_of(env: &Envelope) -> Result<AdaptationReport> {
    serde_json::from_value(env.data.clone()).map_err(|e| anyhow!(SpecError(format!("malformed adaptation report: {e}"))))
}
