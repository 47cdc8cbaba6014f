//! Rendering of JSON artifacts into SVG charts and CSV tables, with the
//! self-consistency checks every report must pass.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use fsc_core::metrics::{pool_metrics, AdaptationReport, CrossPlayMatrix};
use fsc_core::protocol::SweepReport;

use crate::commands::{adaptation_of, read_envelope, spec_header, CrossplayData, Envelope, SelectionData};
use crate::plot::{bar_chart, heatmap, line_chart, Series};

/// A report whose numbers do not agree with each other.
#[derive(Debug)]
pub struct ConsistencyError(pub String);

impl std::fmt::Display for ConsistencyError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "self-consistency check failed: {}", self.0)
    }
}

impl std::error::Error for ConsistencyError {}

/// Average regret equals total over the horizon, scores stay in range, and
/// the embedded strength and diversity recompute from the embedded matrix.
pub fn check_adaptation(report: &AdaptationReport) -> Result<(), ConsistencyError> {
    let fail = |m: String| Err(ConsistencyError(m));
    for p in &report.partners {
        for ((&t, &total), &avg) in report.regret_horizons.iter().zip(&p.total_regret).zip(&p.average_regret) {
            if avg != total / t as f64 {
                return fail(format!("average regret of {} at T = {t} is not total / T", p.partner_id));
            }
        }
        if p.total_regret.len() != report.regret_horizons.len() || p.score.len() != report.eval_episodes.len() {
            return fail(format!("curve lengths of {} do not match the report axes", p.partner_id));
        }
    }
    if let (Some(pool), Some(matrix)) = (&report.pool, &report.matrix) {
        if matrix.validate().is_err() {
            return fail("embedded matrix is out of range".into());
        }
        match pool_metrics(matrix, &pool.upper_bound) {
            Ok(recomputed) if recomputed == *pool => {}
            _ => return fail("strength and diversity do not recompute from the embedded matrix".into()),
        }
    }
    Ok(())
}

struct Writer {
    dir: PathBuf,
    stem: String,
    metadata: String,
    header: Vec<String>,
    written: Vec<PathBuf>,
}

impl Writer {
    fn file(&mut self, suffix: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(format!("{}_{suffix}", self.stem));
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, suffix: &str, head: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut text: String = self.header.iter().map(|l| format!("# {l}\n")).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(head)?;
        for r in rows {
            w.write_record(&r)?;
        }
        text.push_str(std::str::from_utf8(&w.into_inner().map_err(|e| anyhow!(e.to_string()))?)?);
        self.file(suffix, &text)
    }
}

/// Renders every artifact in `paths` into `out_dir` (or next to the input).
pub fn cmd_report(paths: &[PathBuf], out_dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for path in paths {
        let env = read_envelope(path)?;
        let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).to_path_buf());
        fs::create_dir_all(&dir)?;
        let spec_toml = toml_of(&env);
        let mut w = Writer {
            dir,
            stem: path.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_string(),
            metadata: serde_json::to_string(&env.run_spec)?,
            header: spec_header(&spec_toml),
            written: Vec::new(),
        };
        match env.kind.as_str() {
            "crossplay" => {
                let data: CrossplayData = serde_json::from_value(env.data.clone())?;
                render_matrix(&mut w, &data.matrix)?;
            }
            "selection" => {
                let data: SelectionData = serde_json::from_value(env.data.clone())?;
                let idx: Vec<usize> = data.selection.ids.iter().filter_map(|id| data.matrix.index_of(id)).collect();
                render_matrix(&mut w, &data.matrix.submatrix(&idx))?;
            }
            "adaptation" => {
                let report = adaptation_of(&env)?;
                check_adaptation(&report)?;
                render_adaptation(&mut w, &report)?;
            }
            "sweep" => {
                let sweep: SweepReport = serde_json::from_value(env.data.clone())?;
                for p in &sweep.points {
                    check_adaptation(&p.report)?;
                }
                render_sweep(&mut w, &sweep)?;
            }
            other => return Err(anyhow!(crate::spec::SpecError(format!("unknown artifact kind {other}")))),
        }
        written.extend(w.written);
    }
    Ok(written)
}

fn toml_of(env: &Envelope) -> String {
    serde_json::from_value::<crate::spec::RunSpec>(env.run_spec.clone())
        .map(|s| s.to_toml())
        .unwrap_or_else(|_| env.run_spec.to_string())
}

fn render_matrix(w: &mut Writer, m: &CrossPlayMatrix) -> Result<()> {
    let svg = heatmap("Cross-play scores", &m.ids, &m.mean, m.max_score, &w.metadata);
    w.file("heatmap.svg", &svg)
}

fn render_adaptation(w: &mut Writer, r: &AdaptationReport) -> Result<()> {
    if let Some(m) = &r.matrix {
        render_matrix(w, m)?;
    }
    let agg_name = format!("{:?}", r.aggregator).to_lowercase();
    let agg = r.aggregated();
    let eval_x: Vec<f64> = r.eval_episodes.iter().map(|&e| e as f64).collect();
    let horizon_x: Vec<f64> = r.regret_horizons.iter().map(|&t| t as f64).collect();
    let curves = |x: &[f64], per: &dyn Fn(usize) -> Vec<f64>, agg_values: &[f64]| -> Vec<Series> {
        let mut s: Vec<Series> = r
            .partners
            .iter()
            .enumerate()
            .map(|(i, p)| Series { name: p.partner_id.clone(), points: x.iter().copied().zip(per(i)).collect(), emphasis: false })
            .collect();
        s.push(Series { name: agg_name.clone(), points: x.iter().copied().zip(agg_values.iter().copied()).collect(), emphasis: true });
        s
    };

    let scores = curves(&eval_x, &|i| r.partners[i].score.clone(), &agg.score);
    w.file("scores.svg", &line_chart("Evaluated score during adaptation", "episode", "score", &scores, &w.metadata))?;
    let perfect = curves(&eval_x, &|i| r.partners[i].perfect_rate.clone(), &agg.perfect_rate);
    w.file("perfect_rate.svg", &line_chart("Perfect-score rate", "episode", "fraction of games", &perfect, &w.metadata))?;

    if !r.regret_horizons.is_empty() {
        let total = curves(&horizon_x, &|i| r.partners[i].total_regret.clone(), &agg.total_regret);
        w.file("total_regret.svg", &line_chart("Total adaptation regret", "episodes T", "regret", &total, &w.metadata))?;
        let avg = curves(&horizon_x, &|i| r.partners[i].average_regret.clone(), &agg.average_regret);
        w.file(
            "average_regret.svg",
            &line_chart("Average adaptation regret (total / T)", "episodes T", "regret per episode", &avg, &w.metadata),
        )?;
    }

    // Scores at up to four evaluation points: start, two interior, end.
    let n = r.eval_episodes.len();
    let mut picks: Vec<usize> = vec![0, n / 3, 2 * n / 3, n - 1];
    picks.dedup();
    let categories: Vec<String> = picks.iter().map(|&i| format!("t={}", r.eval_episodes[i])).collect();
    let mut bars: Vec<(String, Vec<f64>)> =
        r.partners.iter().map(|p| (p.partner_id.clone(), picks.iter().map(|&i| p.score[i]).collect())).collect();
    bars.push((agg_name.clone(), picks.iter().map(|&i| agg.score[i]).collect()));
    w.file("score_checkpoints.svg", &bar_chart("Score at checkpoints", "score", &categories, &bars, &w.metadata))?;

    let mut rows = Vec::new();
    for (i, &e) in r.eval_episodes.iter().enumerate() {
        for p in &r.partners {
            rows.push(vec![e.to_string(), p.partner_id.clone(), p.score[i].to_string(), p.perfect_rate[i].to_string()]);
        }
        rows.push(vec![e.to_string(), agg_name.clone(), agg.score[i].to_string(), agg.perfect_rate[i].to_string()]);
    }
    w.csv("scores.csv", &["episode", "partner", "score", "perfect_rate"], rows)?;
    let mut rows = Vec::new();
    for (i, &t) in r.regret_horizons.iter().enumerate() {
        for p in &r.partners {
            rows.push(vec![t.to_string(), p.partner_id.clone(), p.total_regret[i].to_string(), p.average_regret[i].to_string()]);
        }
        rows.push(vec![t.to_string(), agg_name.clone(), agg.total_regret[i].to_string(), agg.average_regret[i].to_string()]);
    }
    w.csv("regret.csv", &["T", "partner", "total_regret", "average_regret"], rows)
}

/// Stacks charts vertically into one SVG.
fn stack(charts: &[String], metadata: &str) -> String {
    let height = 440.0 * charts.len() as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"{height}\" viewBox=\"0 0 720 {height}\">\n<metadata>{}</metadata>\n",
        metadata.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
    );
    for (i, c) in charts.iter().enumerate() {
        let inner = c.replacen("<svg ", &format!("<svg y=\"{}\" ", 440.0 * i as f64), 1);
        out.push_str(&inner);
    }
    out.push_str("</svg>\n");
    out
}

fn render_sweep(w: &mut Writer, sweep: &SweepReport) -> Result<()> {
    for panel in &sweep.panels {
        let regret: Vec<Series> = panel
            .series
            .iter()
            .map(|s| Series {
                name: format!("{}={}", panel.hp, s.value),
                points: s.regret_horizons.iter().map(|&t| t as f64).zip(s.average_regret.iter().copied()).collect(),
                emphasis: false,
            })
            .collect();
        let perfect: Vec<Series> = panel
            .series
            .iter()
            .map(|s| Series {
                name: format!("{}={}", panel.hp, s.value),
                points: s.eval_episodes.iter().map(|&t| t as f64).zip(s.perfect_rate.iter().copied()).collect(),
                emphasis: false,
            })
            .collect();
        let charts = [
            line_chart(&format!("Average adaptation regret by {}", panel.hp), "episodes T", "regret per episode", &regret, ""),
            line_chart(&format!("Perfect score rate by {}", panel.hp), "episode", "fraction of games", &perfect, ""),
        ];
        w.file(&format!("{}.svg", panel.hp), &stack(&charts, &w.metadata))?;
        let mut rows = Vec::new();
        for s in &panel.series {
            for (i, &t) in s.regret_horizons.iter().enumerate() {
                rows.push(vec![s.value.clone(), "average_regret".into(), t.to_string(), s.average_regret[i].to_string()]);
            }
            for (i, &e) in s.eval_episodes.iter().enumerate() {
                rows.push(vec![s.value.clone(), "perfect_rate".into(), e.to_string(), s.perfect_rate[i].to_string()]);
                rows.push(vec![s.value.clone(), "score".into(), e.to_string(), s.score[i].to_string()]);
            }
        }
        w.csv(&format!("{}.csv", panel.hp), &[panel.hp.as_str(), "series", "x", "value"], rows)?;
    }
    let rows = sweep
        .points
        .iter()
        .map(|p| {
            vec![
                p.label.clone(),
                p.final_average_regret.map(|v| v.to_string()).unwrap_or_default(),
                p.final_perfect_rate.to_string(),
            ]
        })
        .collect();
    w.csv("points.csv", &["point", "final_average_regret", "final_perfect_rate"], rows)
}
