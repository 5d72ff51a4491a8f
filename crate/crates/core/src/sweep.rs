//! Temperature selection over a grid of τ values.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Metrics;
use crate::noisegen::NoisyDataset;
use crate::prob_head::McConfig;
use crate::train::{fit, predict_dataset, HetModel, ModelSpec, TrainConfig, TrainingLog};

pub const SWEEP_FORMAT_VERSION: u32 = 1;

/// 0.1, 0.2, …, 0.9, then 1, 2, …, 10.
pub fn default_grid() -> Vec<f64> {
    (1..10)
        .map(|i| i as f64 / 10.0)
        .chain((1..=10).map(f64::from))
        .collect()
}

/// Grid must be nonempty, positive, finite and strictly increasing.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid_config("temperature grid is empty"));
    }
    if grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::invalid_config("temperatures must be finite and positive"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_config("temperature grid must be strictly increasing"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    F1,
    #[default]
    Auprc,
    ValLoss,
}

impl SelectionMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMetric::F1 => "f1",
            SelectionMetric::Auprc => "auprc",
            SelectionMetric::ValLoss => "val_loss",
        }
    }

    fn lower_is_better(self) -> bool {
        self == SelectionMetric::ValLoss
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(SelectionMetric::F1),
            "auprc" => Ok(SelectionMetric::Auprc),
            "val_loss" => Ok(SelectionMetric::ValLoss),
            _ => Err(Error::invalid_config(format!("unknown selection metric `{s}`"))),
        }
    }
}

/// Validation outcome at one temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauOutcome {
    pub tau: f64,
    pub f1: Option<f64>,
    pub auprc: Option<f64>,
    pub val_loss: Option<f64>,
    /// `ok`, or the reason the run failed.
    pub status: String,
}

impl TauOutcome {
    pub fn ok(tau: f64, m: &Metrics) -> Self {
        Self {
            tau,
            f1: Some(m.f1),
            auprc: m.auprc,
            val_loss: Some(m.mean_loss),
            status: "ok".into(),
        }
    }

    pub fn failed(tau: f64, err: &Error) -> Self {
        Self {
            tau,
            f1: None,
            auprc: None,
            val_loss: None,
            status: format!("failed: {err}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn metric(&self, metric: SelectionMetric) -> Option<f64> {
        if !self.is_ok() {
            return None;
        }
        match metric {
            SelectionMetric::F1 => self.f1,
            SelectionMetric::Auprc => self.auprc,
            SelectionMetric::ValLoss => self.val_loss,
        }
        .filter(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub format_version: u32,
    pub grid: Vec<f64>,
    pub per_tau: Vec<TauOutcome>,
    pub tau_star: f64,
    pub selection_metric: SelectionMetric,
}

impl SweepResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.format_version != SWEEP_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported sweep format_version {}", r.format_version)));
        }
        Ok(r)
    }
}

/// Best temperature of a metric table. Failed or undefined entries are
/// skipped; ties go to the τ closest to 1, then to the smaller τ.
pub fn select_tau(table: &[TauOutcome], metric: SelectionMetric) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for row in table {
        let Some(v) = row.metric(metric) else { continue };
        let better = match best {
            None => true,
            Some((bt, bv)) => {
                let strictly = if metric.lower_is_better() { v < bv } else { v > bv };
                let closer = (row.tau - 1.0).abs() < (bt - 1.0).abs()
                    || ((row.tau - 1.0).abs() == (bt - 1.0).abs() && row.tau < bt);
                strictly || (v == bv && closer)
            }
        };
        if better {
            best = Some((row.tau, v));
        }
    }
    best.map(|(t, _)| t)
        .ok_or_else(|| Error::Sweep(format!("no temperature produced a usable {metric}")))
}

/// Everything a sweep produces, including the winning model.
#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub result: SweepResult,
    pub model: HetModel,
    pub log: TrainingLog,
}

/// Trains one model per τ from the same initialization and picks τ* on the
/// validation split. `seed` drives both initialization and evaluation draws;
/// shuffles and training draws follow `train_cfg.seed`. Metrics are measured
/// against the validation split's noisy labels.
pub fn run_sweep(
    train: &NoisyDataset,
    val: &NoisyDataset,
    template: &ModelSpec,
    train_cfg: &TrainConfig,
    grid: &[f64],
    metric: SelectionMetric,
    seed: u64,
) -> Result<SweepOutput> {
    validate_grid(grid)?;
    if !template.head_mode.is_probabilistic() {
        return Err(Error::invalid_config("temperature sweeps need a probabilistic head"));
    }
    if val.is_empty() {
        return Err(Error::invalid_input("validation split is empty"));
    }
    train_cfg.validate()?;

    let runs: Vec<std::result::Result<(Metrics, HetModel, TrainingLog), Error>> = grid
        .par_iter()
        .map(|&tau| {
            let mc = McConfig {
                temperature: tau,
                seed,
                ..template.mc_config
            };
            let spec = ModelSpec {
                mc_config: mc,
                ..template.clone()
            };
            let model = HetModel::new(&spec, seed)?;
            let (model, log) = fit(model, train, train_cfg)?;
            let preds = predict_dataset(&model, val, &mc)?;
            Ok((Metrics::compute(&preds)?, model, log))
        })
        .collect();

    let per_tau: Vec<TauOutcome> = grid
        .iter()
        .zip(&runs)
        .map(|(&tau, r)| match r {
            Ok((m, _, _)) => TauOutcome::ok(tau, m),
            Err(e) => TauOutcome::failed(tau, e),
        })
        .collect();
    let tau_star = select_tau(&per_tau, metric)?;
    let idx = grid.iter().position(|&t| t == tau_star).expect("tau_star is drawn from the grid");
    let (_, model, log) = runs.into_iter().nth(idx).expect("index in range").expect("selected run succeeded");
    Ok(SweepOutput {
        result: SweepResult {
            format_version: SWEEP_FORMAT_VERSION,
            grid: grid.to_vec(),
            per_tau,
            tau_star,
            selection_metric: metric,
        },
        model,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tau: f64, v: f64) -> TauOutcome {
        TauOutcome {
            tau,
            f1: Some(v),
            auprc: Some(v),
            val_loss: Some(v),
            status: "ok".into(),
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 19);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[18], 10.0);
        assert_eq!(g.iter().filter(|&&t| t == 1.0).count(), 1);
        assert!(validate_grid(&g).is_ok());
    }

    #[test]
    fn bad_grids() {
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[0.0, 1.0]).is_err());
        assert!(validate_grid(&[-1.0]).is_err());
        assert!(validate_grid(&[2.0, 1.0]).is_err());
        assert!(validate_grid(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn unique_maximum_wins() {
        let t = [row(0.1, 0.5), row(0.2, 0.9), row(1.0, 0.7)];
        assert_eq!(select_tau(&t, SelectionMetric::Auprc).unwrap(), 0.2);
        assert_eq!(select_tau(&t, SelectionMetric::ValLoss).unwrap(), 0.1);
    }

    #[test]
    fn ties_prefer_one_then_smaller() {
        let t = [row(0.5, 0.9), row(1.0, 0.9), row(2.0, 0.1)];
        assert_eq!(select_tau(&t, SelectionMetric::F1).unwrap(), 1.0);
        let t = [row(0.5, 0.9), row(1.5, 0.9)];
        assert_eq!(select_tau(&t, SelectionMetric::F1).unwrap(), 0.5);
        let t = [row(3.0, 0.9), row(0.8, 0.9)];
        assert_eq!(select_tau(&t, SelectionMetric::F1).unwrap(), 0.8);
    }

    #[test]
    fn failures_are_skipped() {
        let mut bad = row(0.3, 1.0);
        bad.status = "failed: boom".into();
        let t = [bad.clone(), row(2.0, 0.4)];
        assert_eq!(select_tau(&t, SelectionMetric::Auprc).unwrap(), 2.0);
        assert!(matches!(select_tau(&[bad], SelectionMetric::Auprc), Err(Error::Sweep(_))));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in [SelectionMetric::F1, SelectionMetric::Auprc, SelectionMetric::ValLoss] {
            assert_eq!(m.as_str().parse::<SelectionMetric>().unwrap(), m);
        }
        assert!("accuracy".parse::<SelectionMetric>().is_err());
    }
}
