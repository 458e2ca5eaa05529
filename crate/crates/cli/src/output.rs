use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use seqbed::agents::CurvePoint;
use seqbed::bounds::{BoundEstimate, BoundKind, RolloutBounds};

pub const RESULTS_HEADER: [&str; 7] = ["algorithm", "override", "bound", "mean", "stderr", "n", "seconds"];
pub const CURVE_HEADER: [&str; 5] = ["iteration", "spce_train_L", "critic_loss", "actor_loss", "alpha"];

/// One line of `results.csv`; `summary.json` also carries `L` and `T`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub algorithm: String,
    #[serde(rename = "override")]
    pub override_label: String,
    pub bound: BoundKind,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seconds: f64,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
}

impl ResultRow {
    pub fn new(algorithm: &str, override_label: &str, est: &BoundEstimate, seconds: f64) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            override_label: override_label.to_string(),
            bound: est.kind,
            mean: est.mean,
            stderr: est.stderr,
            n: est.n,
            seconds,
            l: est.l,
            horizon: est.horizon,
        }
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    create_parent(path)?;
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.override_label.clone(),
            r.bound.to_string(),
            r.mean.to_string(),
            r.stderr.to_string(),
            r.n.to_string(),
            format!("{:.3}", r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[ResultRow]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, serde_json::to_string_pretty(rows)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Per-step rows for every rollout; `seed` identifies the agent (or the
/// baseline seed) the rollout belongs to.
pub fn write_rollouts<'a, I>(path: &Path, design_dim: usize, rollouts: I) -> Result<()>
where
    I: IntoIterator<Item = (u64, &'a RolloutBounds)>,
{
    let mut w = writer(path)?;
    let mut header: Vec<String> = vec!["rollout_id".into(), "seed".into(), "step".into()];
    header.extend((0..design_dim).map(|j| format!("design_{j}")));
    header.extend(["outcome".into(), "reward".into(), "cumulative_reward".into()]);
    w.write_record(&header)?;
    for (seed, rb) in rollouts {
        let rewards = rb.rewards();
        for (t, xi) in rb.trace.designs.chunks_exact(design_dim).enumerate() {
            let mut rec = vec![rb.trace.rollout_id.to_string(), seed.to_string(), t.to_string()];
            rec.extend(xi.iter().map(f64::to_string));
            rec.push(rb.trace.outcomes[t].to_string());
            rec.push(rewards[t].to_string());
            rec.push(rb.spce[t].to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub struct CurveWriter {
    inner: csv::Writer<fs::File>,
}

impl CurveWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = writer(path)?;
        inner.write_record(CURVE_HEADER)?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, p: &CurvePoint) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        self.inner.write_record([
            p.iteration.to_string(),
            p.spce_train_l.to_string(),
            opt(p.critic_loss),
            opt(p.actor_loss),
            p.alpha.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
