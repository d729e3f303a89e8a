use serde::Serialize;

use super::{run, ExecConfig};
use crate::operators::ScanOp;
use crate::{Error, Result};

/// Mean, sample standard deviation and normal-approximation 95% confidence
/// half-width of repeated measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub mean: f64,
    pub sd: f64,
    pub ci95: f64,
}

impl Summary {
    /// # Panics
    ///
    /// With fewer than two samples.
    pub fn from_samples(samples: &[f64]) -> Self {
        let k = samples.len();
        assert!(k >= 2, "need at least two samples");
        let mean = samples.iter().sum::<f64>() / k as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        let sd = var.sqrt();
        Self {
            runs: k,
            mean,
            sd,
            ci95: 1.96 * sd / (k as f64).sqrt(),
        }
    }
}

/// Runs `config` `k` times and summarizes the wall time in seconds.
pub fn repeat_and_summarize<O: ScanOp>(op: &O, xs: &[O::Value], config: &ExecConfig, k: usize) -> Result<Summary> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("{k} repetitions: need at least 2")));
    }
    let mut walls = Vec::with_capacity(k);
    for _ in 0..k {
        let (_, stats) = run(op, xs, config)?;
        walls.push(stats.wall.as_secs_f64());
    }
    Ok(Summary::from_samples(&walls))
}
