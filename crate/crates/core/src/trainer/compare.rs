//! Regime comparison over several seeds.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::pipeline::{run_pipeline, PreparedData};
use super::report::TrainingReport;
use super::{Regime, TrainConfig};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub regime: Regime,
    /// One report per seed, in seed order.
    pub runs: Vec<TrainingReport>,
    /// `None` where the run never reached the threshold.
    pub steps_to_threshold: Vec<Option<usize>>,
    /// `None` stands for infinity.
    pub median_steps: Option<f64>,
    /// Median over seeds of the selected checkpoint's validation ROUGE-L.
    pub median_final_rouge_l: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    /// Regime whose converged score sets the threshold.
    pub reference: Regime,
    pub threshold: f64,
    pub rows: Vec<ComparisonRow>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median where `None` is infinity.
pub fn median_steps(steps: &[Option<usize>]) -> Option<f64> {
    if steps.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = steps
        .iter()
        .map(|s| s.map_or(f64::INFINITY, |s| s as f64))
        .collect();
    Some(median(&mut v)).filter(|m| m.is_finite())
}

/// Trains every `(regime, seed)` pair on the same data, in parallel, and
/// tabulates convergence. The threshold is the median converged
/// validation ROUGE-L of the first non-curriculum regime listed (or of the
/// first regime if all use the curriculum).
pub fn run_comparison(
    data: &PreparedData,
    model_config: &ModelConfig,
    base: &TrainConfig,
    regimes: &[Regime],
    seeds: &[u64],
) -> Result<ComparisonTable> {
    if regimes.is_empty() || seeds.is_empty() {
        return Err(Error::Argument(
            "comparison needs at least one regime and one seed".into(),
        ));
    }
    let jobs: Vec<(usize, u64)> = (0..regimes.len())
        .flat_map(|r| seeds.iter().map(move |&s| (r, s)))
        .collect();
    let results: Vec<Result<TrainingReport>> = jobs
        .par_iter()
        .map(|&(r, seed)| {
            let config = TrainConfig {
                regime: regimes[r],
                seed,
                ..base.clone()
            };
            run_pipeline(data, model_config, &config).map(|o| o.report)
        })
        .collect();
    let mut reports = results.into_iter();
    let mut per_regime: Vec<Vec<TrainingReport>> = Vec::with_capacity(regimes.len());
    for _ in regimes {
        per_regime.push(reports.by_ref().take(seeds.len()).collect::<Result<_>>()?);
    }

    let ref_index = regimes.iter().position(|r| !r.uses_curriculum()).unwrap_or(0);
    let mut best: Vec<f64> = per_regime[ref_index].iter().map(|r| r.best_rouge_l).collect();
    let threshold = median(&mut best);

    let rows = regimes
        .iter()
        .zip(per_regime)
        .map(|(&regime, runs)| {
            let steps: Vec<Option<usize>> =
                runs.iter().map(|r| r.steps_to_threshold(threshold)).collect();
            let mut finals: Vec<f64> = runs.iter().map(|r| r.best_rouge_l).collect();
            ComparisonRow {
                regime,
                median_steps: median_steps(&steps),
                median_final_rouge_l: median(&mut finals),
                steps_to_threshold: steps,
                runs,
            }
        })
        .collect();
    Ok(ComparisonTable {
        reference: regimes[ref_index],
        threshold,
        rows,
    })
}

impl ComparisonTable {
    pub fn row(&self, regime: Regime) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.regime == regime)
    }

    /// One line per regime:
    /// `regime,seeds,threshold,median_steps_to_threshold,median_final_rougeL`.
    /// Unreached thresholds are written as `inf`.
    pub fn summary_csv(&self) -> String {
        let mut out =
            String::from("regime,seeds,threshold,median_steps_to_threshold,median_final_rougeL\n");
        for row in &self.rows {
            let steps = row.median_steps.map_or("inf".to_string(), |s| s.to_string());
            writeln!(
                out,
                "{},{},{:e},{},{:e}",
                row.regime,
                row.runs.len(),
                self.threshold,
                steps,
                row.median_final_rouge_l
            )
            .unwrap();
        }
        out
    }

    /// Every run's curves: `regime,seed,step,split,metric,value`.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("regime,seed,step,split,metric,value\n");
        for row in &self.rows {
            for run in &row.runs {
                run.write_rows(&mut out, &format!("{},{},", row.regime, run.seed));
            }
        }
        out
    }
}
