use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use seqbed::agents::{train, AgentConfig, Checkpoint, EnsemblePolicy, EvalMethod};
use seqbed::bounds::{evaluate, BoundEstimate, DesignPolicy, EvalSpec, Evaluation, RandomDesigns};
use seqbed::envs::{DesignProblem, Override, ProblemConfig};

use crate::config::{parse_json, parse_overrides, sha256_hex, EvalConfig, RunConfig};
use crate::output::{write_results, write_rollouts, write_summary, CurveWriter, ResultRow};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CURVE_FILE: &str = "curve.csv";

/// Evaluation streams are offset from the training seed so that no
/// evaluation ever replays the parameters drawn during training.
pub const EVAL_SEED_OFFSET: u64 = 1 << 32;

pub fn eval_seed(seed: u64) -> u64 {
    seed.wrapping_add(EVAL_SEED_OFFSET)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub algorithm: String,
    pub seed: u64,
    pub config_hash: String,
    pub checkpoint_sha256: String,
    pub iterations: u64,
    pub train_seconds: f64,
    pub problem: ProblemConfig,
    pub agent: AgentConfig,
    pub eval: EvalConfig,
    pub chunk: usize,
}

#[derive(Clone, Debug)]
pub struct TrainedSeed {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub overrides: Option<String>,
    pub rollouts: usize,
    pub l: usize,
    pub chunk: usize,
    pub method: EvalMethod,
}

impl EvalOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            overrides: cfg.eval.overrides.clone(),
            rollouts: cfg.eval.rollouts,
            l: cfg.eval.l,
            chunk: cfg.chunk,
            method: cfg.eval.sunrise_method,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rollouts == 0 || self.l == 0 || self.chunk == 0 {
            bail!("rollouts, L and chunk must all be >= 1");
        }
        Ok(())
    }
}

fn override_label(ov: &Override) -> String {
    ov.to_string()
}

/// Trains one agent per seed, writing `<out>/<seed>/{checkpoint.json,
/// manifest.json, curve.csv}`. Seeds run on separate threads.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<Vec<TrainedSeed>> {
    cfg.validate()?;
    let results: Vec<Result<TrainedSeed>> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg.seeds.iter().map(|&seed| s.spawn(move || train_seed(cfg, seed, out))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(anyhow!("training thread panicked")))).collect()
    });
    results.into_iter().collect()
}

pub fn train_seed(cfg: &RunConfig, seed: u64, out: &Path) -> Result<TrainedSeed> {
    let agent = cfg.agent_config()?;
    let algorithm = cfg.algorithm()?;
    let problem = cfg.problem.build()?;
    let dir = out.join(seed.to_string());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut curve = CurveWriter::create(&dir.join(CURVE_FILE))?;
    let mut write_err = None;
    let mut last_decile = 0;
    let start = Instant::now();
    let outcome = train(&problem, cfg.problem.l_train, &agent, seed, cfg.iterations, |p| {
        if write_err.is_none() {
            write_err = curve.push(p).err();
        }
        let decile = p.iteration * 10 / cfg.iterations.max(1);
        if decile > last_decile {
            last_decile = decile;
            eprintln!("[{algorithm} seed {seed}] iteration {} sPCE(L_train) {:.3} alpha {:.4}", p.iteration, p.spce_train_l, p.alpha);
        }
    })
    .map_err(|e| anyhow!("{algorithm} seed {seed}: {e}"))?;
    let train_seconds = start.elapsed().as_secs_f64();
    if let Some(e) = write_err {
        return Err(e);
    }
    curve.finish()?;

    let json = Checkpoint::capture(&outcome.ensemble).to_json()?;
    fs::write(dir.join(CHECKPOINT_FILE), &json)?;
    let manifest = Manifest {
        algorithm,
        seed,
        config_hash: cfg.config_hash()?,
        checkpoint_sha256: sha256_hex(json.as_bytes()),
        iterations: cfg.iterations,
        train_seconds,
        problem: cfg.problem.clone(),
        agent,
        eval: cfg.eval.clone(),
        chunk: cfg.chunk,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(TrainedSeed { dir, manifest })
}

/// Paired estimates for one policy on one (possibly overridden) problem.
fn eval_policy<D, P>(policy: &D, problem: &P, seed: u64, opts: &EvalOptions) -> Result<Evaluation>
where
    D: DesignPolicy + ?Sized,
    P: DesignProblem + ?Sized,
{
    let spec = EvalSpec { n_rollouts: opts.rollouts, l: opts.l, horizon: problem.horizon(), chunk: opts.chunk, seed: eval_seed(seed) };
    let ev = evaluate(policy, problem, &spec)?;
    if !ev.spce.mean.is_finite() || !ev.snmc.mean.is_finite() {
        bail!("non-finite bound estimate for seed {seed}");
    }
    Ok(ev)
}

/// Rollouts of several seeds under one algorithm and one override.
pub struct Pool {
    pub algorithm: String,
    pub override_label: String,
    pub design_dim: usize,
    pub runs: Vec<(u64, Evaluation)>,
    pub seconds: f64,
}

impl Pool {
    fn new(algorithm: &str, ov: &Override, design_dim: usize) -> Self {
        Self { algorithm: algorithm.to_string(), override_label: override_label(ov), design_dim, runs: Vec::new(), seconds: 0.0 }
    }

    pub fn rows(&self) -> Result<Vec<ResultRow>> {
        let spce: Vec<BoundEstimate> = self.runs.iter().map(|(_, e)| e.spce.clone()).collect();
        let snmc: Vec<BoundEstimate> = self.runs.iter().map(|(_, e)| e.snmc.clone()).collect();
        Ok(vec![
            ResultRow::new(&self.algorithm, &self.override_label, &BoundEstimate::pooled(&spce)?, self.seconds),
            ResultRow::new(&self.algorithm, &self.override_label, &BoundEstimate::pooled(&snmc)?, self.seconds),
        ])
    }

    pub fn write_rollouts(&self, path: &Path) -> Result<()> {
        write_rollouts(path, self.design_dim, self.runs.iter().flat_map(|(s, e)| e.rollouts.iter().map(move |r| (*s, r))))
    }
}

pub struct LoadedAgent {
    pub path: PathBuf,
    pub manifest: Manifest,
    pub checkpoint: Checkpoint,
}

/// Accepts a checkpoint file or the directory holding it.
pub fn load_agent(path: &Path) -> Result<LoadedAgent> {
    let file = if path.is_dir() { path.join(CHECKPOINT_FILE) } else { path.to_path_buf() };
    let dir = file.parent().unwrap_or(Path::new("."));
    let json = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest = parse_json(
        &fs::read_to_string(&manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?,
        &format!("manifest {}", manifest_path.display()),
    )?;
    if sha256_hex(json.as_bytes()) != manifest.checkpoint_sha256 {
        bail!("{} does not match the hash recorded in its manifest", file.display());
    }
    let checkpoint = Checkpoint::from_json(&json).with_context(|| format!("parsing {}", file.display()))?;
    Ok(LoadedAgent { path: file, manifest, checkpoint })
}

/// Expands each pattern with glob semantics; every pattern must match.
pub fn expand_checkpoints(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for pat in patterns {
        let before = out.len();
        for entry in glob::glob(pat).with_context(|| format!("bad checkpoint pattern {pat}"))? {
            out.push(entry?);
        }
        if out.len() == before {
            bail!("checkpoint pattern {pat} matched nothing");
        }
    }
    Ok(out)
}

/// Evaluates agents grouped by algorithm label, pooling rollouts across
/// seeds for every override.
pub fn eval_agents(agents: &[LoadedAgent], opts: &EvalOptions) -> Result<Vec<Pool>> {
    opts.validate()?;
    let overrides = parse_overrides(opts.overrides.as_deref())?;
    let mut groups: Vec<(String, Vec<&LoadedAgent>)> = Vec::new();
    for a in agents {
        match groups.iter_mut().find(|(name, _)| *name == a.manifest.algorithm) {
            Some((_, members)) => members.push(a),
            None => groups.push((a.manifest.algorithm.clone(), vec![a])),
        }
    }
    let mut pools = Vec::new();
    for (algorithm, members) in &groups {
        for ov in &overrides {
            let mut pool = None;
            for a in members {
                let problem = a.manifest.problem.build_with(ov).with_context(|| format!("agent {}", a.path.display()))?;
                let pool = pool.get_or_insert_with(|| Pool::new(algorithm, ov, problem.design_dim()));
                let ensemble = a.checkpoint.restore()?;
                let policy = EnsemblePolicy { ensemble: &ensemble, method: opts.method };
                let start = Instant::now();
                let ev = eval_policy(&policy, &problem, a.manifest.seed, opts)?;
                pool.seconds += start.elapsed().as_secs_f64();
                pool.runs.push((a.manifest.seed, ev));
            }
            pools.extend(pool);
        }
    }
    Ok(pools)
}

pub fn baseline_pools(problem: &ProblemConfig, seeds: &[u64], opts: &EvalOptions) -> Result<Vec<Pool>> {
    opts.validate()?;
    if seeds.is_empty() {
        bail!("baseline needs at least one seed");
    }
    let mut pools = Vec::new();
    for ov in parse_overrides(opts.overrides.as_deref())? {
        let p = problem.build_with(&ov)?;
        let policy = RandomDesigns { dim: p.design_dim() };
        let mut pool = Pool::new("random", &ov, p.design_dim());
        for &seed in seeds {
            let start = Instant::now();
            let ev = eval_policy(&policy, &p, seed, opts)?;
            pool.seconds += start.elapsed().as_secs_f64();
            pool.runs.push((seed, ev));
        }
        pools.push(pool);
    }
    Ok(pools)
}

fn dir_name(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || "=.-_".contains(c) { c } else { '_' }).collect()
}

/// Writes `results.csv` and `summary.json` under `out`, and each pool's
/// rollouts under `<out>/<algorithm>/<override>/rollouts.csv`.
pub fn write_pools(out: &Path, pools: &[Pool]) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for pool in pools {
        pool.write_rollouts(&out.join(dir_name(&pool.algorithm)).join(dir_name(&pool.override_label)).join("rollouts.csv"))?;
        rows.extend(pool.rows()?);
    }
    write_results(&out.join("results.csv"), &rows)?;
    write_summary(&out.join("summary.json"), &rows)?;
    Ok(rows)
}

pub fn cmd_eval(patterns: &[String], opts: &EvalOptions, out: &Path) -> Result<Vec<ResultRow>> {
    let agents = expand_checkpoints(patterns)?.iter().map(|p| load_agent(p)).collect::<Result<Vec<_>>>()?;
    let pools = eval_agents(&agents, opts)?;
    write_pools(out, &pools)
}

pub fn cmd_baseline(problem: &ProblemConfig, seeds: &[u64], opts: &EvalOptions, out: &Path) -> Result<Vec<ResultRow>> {
    let pools = baseline_pools(problem, seeds, opts)?;
    write_pools(out, &pools)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepMatrix {
    base: serde_json::Value,
    variants: Vec<SweepVariant>,
    #[serde(default)]
    baseline: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepVariant {
    name: String,
    #[serde(default)]
    agent: serde_json::Map<String, serde_json::Value>,
}

/// The run configuration of one sweep cell: the base document with the
/// variant's agent keys laid over it.
fn variant_config(base: &serde_json::Value, v: &SweepVariant) -> Result<RunConfig> {
    let mut doc = base.as_object().cloned().ok_or_else(|| anyhow!("sweep key `base` must be an object"))?;
    doc.insert("name".into(), v.name.clone().into());
    let mut agent = match doc.remove("agent") {
        Some(serde_json::Value::Object(m)) => m,
        None => serde_json::Map::new(),
        Some(_) => bail!("sweep key `base.agent` must be an object"),
    };
    agent.extend(v.agent.clone());
    doc.insert("agent".into(), agent.into());
    let cfg: RunConfig = parse_json(&serde_json::Value::Object(doc).to_string(), &format!("sweep variant {}", v.name))?;
    cfg.validate().with_context(|| format!("sweep variant {}", v.name))?;
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRun {
    pub algorithm: String,
    pub seed: u64,
    pub train_seconds: f64,
    pub eval_seconds: f64,
}

/// Trains and evaluates every (variant, seed) cell in order. Each run gets
/// its own `results.csv` in `<out>/<variant>/<seed>/`; the top-level table
/// pools seeds per variant, and `runs.csv` records wall-clock per run.
pub fn cmd_sweep(matrix_path: &Path, out_override: Option<&Path>) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(matrix_path).with_context(|| format!("reading {}", matrix_path.display()))?;
    let matrix: SweepMatrix = parse_json(&text, &format!("sweep matrix {}", matrix_path.display()))?;
    if matrix.variants.is_empty() {
        bail!("sweep key `variants` is empty");
    }
    let configs = matrix.variants.iter().map(|v| variant_config(&matrix.base, v)).collect::<Result<Vec<_>>>()?;
    let out = out_override.map(Path::to_path_buf).unwrap_or_else(|| configs[0].out.clone());

    let mut pools = Vec::new();
    let mut runs = Vec::new();
    for (v, cfg) in matrix.variants.iter().zip(&configs) {
        let opts = EvalOptions::from_config(cfg);
        let mut merged: Vec<Pool> = Vec::new();
        for &seed in &cfg.seeds {
            let trained = train_seed(cfg, seed, &out.join(dir_name(&v.name)))?;
            let agent = load_agent(&trained.dir)?;
            let run_pools = eval_agents(std::slice::from_ref(&agent), &opts)?;
            let mut rows = Vec::new();
            for p in &run_pools {
                rows.extend(p.rows()?);
            }
            write_results(&trained.dir.join("results.csv"), &rows)?;
            runs.push(SweepRun {
                algorithm: v.name.clone(),
                seed,
                train_seconds: trained.manifest.train_seconds,
                eval_seconds: run_pools.iter().map(|p| p.seconds).sum(),
            });
            if merged.is_empty() {
                merged = run_pools;
            } else {
                for (m, p) in merged.iter_mut().zip(run_pools) {
                    m.runs.extend(p.runs);
                    m.seconds += p.seconds;
                }
            }
        }
        pools.extend(merged);
    }
    if matrix.baseline {
        pools.extend(baseline_pools(&configs[0].problem, &configs[0].seeds, &EvalOptions::from_config(&configs[0]))?);
    }
    let rows = write_pools(&out, &pools)?;
    let mut w = csv::Writer::from_path(out.join("runs.csv"))?;
    for r in &runs {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}
