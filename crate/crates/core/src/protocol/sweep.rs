use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::benchmark::{run_benchmark, BenchmarkSpec};
use super::{AgentPool, ProtocolError};
use crate::metrics::{AdaptationReport, CrossPlayMatrix};
use crate::training::TrainConfig;

/// Values tried per hyper-parameter. An empty axis keeps the base value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub lr: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub replay_buffer_size: Vec<usize>,
    /// `[num_threads, num_games_per_thread]` pairs.
    pub workers: Vec<[usize; 2]>,
}

#[derive(Clone, Debug)]
enum Setting {
    Lr(f64),
    BatchSize(usize),
    ReplayBufferSize(usize),
    Workers([usize; 2]),
}

impl Setting {
    fn name(&self) -> &'static str {
        match self {
            Setting::Lr(_) => "lr",
            Setting::BatchSize(_) => "batch_size",
            Setting::ReplayBufferSize(_) => "replay_buffer_size",
            Setting::Workers(_) => "workers",
        }
    }

    fn value(&self) -> String {
        match self {
            Setting::Lr(v) => format!("{v}"),
            Setting::BatchSize(v) | Setting::ReplayBufferSize(v) => v.to_string(),
            Setting::Workers([t, g]) => format!("{t}x{g}"),
        }
    }

    fn apply(&self, t: &mut TrainConfig) {
        match *self {
            Setting::Lr(v) => t.lr = v,
            Setting::BatchSize(v) => t.batch_size = v,
            Setting::ReplayBufferSize(v) => t.replay_buffer_size = v,
            Setting::Workers([a, b]) => {
                t.num_threads = a;
                t.num_games_per_thread = b;
            }
        }
    }
}

impl SweepGrid {
    fn axes(&self) -> Vec<Vec<Setting>> {
        let axes = vec![
            self.lr.iter().map(|&v| Setting::Lr(v)).collect::<Vec<_>>(),
            self.batch_size.iter().map(|&v| Setting::BatchSize(v)).collect(),
            self.replay_buffer_size.iter().map(|&v| Setting::ReplayBufferSize(v)).collect(),
            self.workers.iter().map(|&v| Setting::Workers(v)).collect(),
        ];
        axes.into_iter().filter(|a| !a.is_empty()).collect()
    }

    /// Number of grid points (1 for an empty grid).
    pub fn size(&self) -> usize {
        self.axes().iter().map(Vec::len).product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub values: BTreeMap<String, String>,
    pub tconfig: TrainConfig,
    pub final_average_regret: Option<f64>,
    pub final_perfect_rate: f64,
    pub report: AdaptationReport,
}

/// Aggregated curves of all grid points sharing one value of a parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub value: String,
    pub eval_episodes: Vec<usize>,
    pub regret_horizons: Vec<usize>,
    pub average_regret: Vec<f64>,
    pub perfect_rate: Vec<f64>,
    pub score: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPanel {
    pub hp: String,
    pub series: Vec<SweepSeries>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: SweepGrid,
    pub points: Vec<SweepPoint>,
    pub panels: Vec<SweepPanel>,
}

fn mean_curves(curves: &[&Vec<f64>]) -> Vec<f64> {
    let n = curves.len() as f64;
    (0..curves[0].len()).map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / n).collect()
}

/// Runs the benchmark at every point of the Cartesian product of `grid`.
pub fn run_hp_sweep(
    pool: &AgentPool,
    matrix: Option<&CrossPlayMatrix>,
    base: &BenchmarkSpec,
    grid: &SweepGrid,
) -> Result<SweepReport, ProtocolError> {
    let axes = grid.axes();
    let mut combos: Vec<Vec<Setting>> = vec![Vec::new()];
    for axis in &axes {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                axis.iter().map(move |s| {
                    let mut next = c.clone();
                    next.push(s.clone());
                    next
                })
            })
            .collect();
    }

    let mut points = Vec::with_capacity(combos.len());
    for combo in &combos {
        let mut spec = base.clone();
        for s in combo {
            s.apply(&mut spec.tconfig);
        }
        spec.tconfig.validate().map_err(crate::training::TrainError::from)?;
        let report = run_benchmark(pool, matrix, &spec)?;
        let values: BTreeMap<String, String> = combo.iter().map(|s| (s.name().to_string(), s.value())).collect();
        let label = combo.iter().map(|s| format!("{}={}", s.name(), s.value())).collect::<Vec<_>>().join(",");
        let agg = report.aggregated();
        points.push(SweepPoint {
            label: if label.is_empty() { "base".into() } else { label },
            values,
            tconfig: spec.tconfig.clone(),
            final_average_regret: agg.average_regret.last().copied(),
            final_perfect_rate: agg.perfect_rate.last().copied().unwrap_or(0.0),
            report,
        });
    }

    let panels = axes
        .iter()
        .map(|axis| {
            let hp = axis[0].name().to_string();
            let series = axis
                .iter()
                .map(|setting| {
                    let value = setting.value();
                    let members: Vec<&SweepPoint> = points.iter().filter(|p| p.values[&hp] == value).collect();
                    let first = &members[0].report;
                    let pick = |f: &dyn Fn(&AdaptationReport) -> &Vec<f64>| {
                        mean_curves(&members.iter().map(|p| f(&p.report)).collect::<Vec<_>>())
                    };
                    SweepSeries {
                        value,
                        eval_episodes: first.eval_episodes.clone(),
                        regret_horizons: first.regret_horizons.clone(),
                        average_regret: pick(&|r| &r.aggregated().average_regret),
                        perfect_rate: pick(&|r| &r.aggregated().perfect_rate),
                        score: pick(&|r| &r.aggregated().score),
                    }
                })
                .collect();
            SweepPanel { hp, series }
        })
        .collect();
    Ok(SweepReport { grid: grid.clone(), points, panels })
}
