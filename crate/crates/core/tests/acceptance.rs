//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Positional arguments filter checks by substring,
//! e.g. `cargo test --test acceptance -- reductions`.

use std::error::Error;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use seqbed::agents::{
    droq_configure, init_stream, sunrise_eval_select, sunrise_learn, sunrise_targets, train, AgentConfig, AgentEnsemble,
    EncodedBatch, EnsemblePolicy, EvalMethod, Member, ReplayBuffer, Transition, Variant,
};
use seqbed::bounds::{evaluate, EvalSpec, Evaluation, RandomDesigns};
use seqbed::envs::{direct_spce_integrand, env_reset, env_step, Ces, DesignProblem, Override, Problem, ProblemConfig, ProblemKind};
use seqbed::numkit::{sigmoid, Activation, LayerSpec, Matrix, Mlp, Mode};
use seqbed::policy::{PolicyNet, PolicyWidths};
use seqbed::prob::{sample_beta, sample_dirichlet, sample_lognormal, RngState, TanhNormal};

type Outcome = Result<String, Box<dyn Error>>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*).into());
        }
    };
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<(), Box<dyn Error>> {
    let spent = start.elapsed();
    ensure!(spent <= limit, "{what} took {:.1}s, limit {:.0}s", spent.as_secs_f64(), limit.as_secs_f64());
    Ok(())
}

fn location(l_train: usize) -> ProblemConfig {
    ProblemConfig { l_train, ..ProblemConfig::location_finding() }
}

fn tiny(variant: Variant) -> AgentConfig {
    AgentConfig {
        policy_widths: PolicyWidths { encoder_hidden: vec![8], summary: 5, emitter_hidden: vec![8] },
        critic_hidden: vec![8],
        batch_size: 16,
        utd: 2,
        ..AgentConfig::preset(variant, ProblemKind::LocationFinding)
    }
}

/// Random-design episodes pushed into a buffer.
fn filled_buffer(problem: &Problem, episodes: u64, seed: u64) -> Result<ReplayBuffer, Box<dyn Error>> {
    let d = problem.design_dim();
    let mut buf = ReplayBuffer::new(100_000, d + 1)?;
    let mut rng = RngState::new(seed);
    for episode in 0..episodes {
        let mut state = env_reset(problem, 20, &mut rng)?;
        while !state.is_done() {
            let step = state.step_index();
            let action: Vec<f64> = (0..d).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            let res = env_step(problem, &mut state, &action, &mut rng)?;
            buf.push(Transition {
                episode,
                step,
                action: state.actions()[step * d..].to_vec(),
                reward: res.reward,
                next_outcome: problem.scale_observation(res.outcome),
                done: res.done,
            })?;
        }
    }
    Ok(buf)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn bound_invariant() -> Outcome {
    let start = Instant::now();
    let problem = location(100).build()?;
    let l = 100;
    let spec = EvalSpec { n_rollouts: 1000, l, horizon: 30, chunk: 64, seed: 11 };
    let ev = evaluate(&RandomDesigns { dim: 2 }, &problem, &spec)?;
    let cap = ((l + 1) as f64).ln();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for r in &ev.rollouts {
        for &g in &r.spce {
            worst = worst.max(g);
            if g > cap {
                violations += 1;
            }
        }
    }
    ensure!(violations == 0, "{violations} integrands exceed ln(101) = {cap}");
    within(Duration::from_secs(120), start, "bound invariant")?;
    Ok(format!("1000 rollouts, max integrand {worst:.5} <= {cap:.5}, mean {:.3}", ev.spce.mean))
}

fn telescoping() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let problems = [location(100).build()?, ProblemConfig { l_train: 100, ..ProblemConfig::ces() }.build()?];
    for (p, problem) in problems.iter().enumerate() {
        let d = problem.design_dim();
        for i in 0..100u64 {
            let mut rng = RngState::with_stream(21, i + 1000 * p as u64);
            let mut state = env_reset(problem, 100, &mut rng)?;
            let mut total = 0.0;
            while !state.is_done() {
                let action: Vec<f64> = (0..d).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
                total += env_step(problem, &mut state, &action, &mut rng)?.reward;
            }
            let g = direct_spce_integrand(problem, state.thetas(), state.designs(), state.outcomes())?;
            worst = worst.max((total - g).abs());
        }
    }
    ensure!(worst <= 1e-9, "largest |sum r - g| is {worst:e}");
    within(Duration::from_secs(60), start, "telescoping")?;
    Ok(format!("200 rollouts over location finding and CES, max deviation {worst:.1e}"))
}

/// Tolerance shared by every finite-difference comparison.
fn fd_close(fd: f64, an: f64) -> bool {
    (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()) + 1e-7
}

fn weighted_sum(y: &Matrix, w: &Matrix) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn mlp_gradients(seed: u64) -> Result<usize, Box<dyn Error>> {
    let mut rng = RngState::new(500 + seed);
    let mut checked = 0;
    for (dropout, ln) in [(0.0, false), (0.0, true), (0.3, false), (0.3, true)] {
        let mut net = Mlp::kaiming(Mlp::stack(3, &[7, 6], 2, dropout, ln), &mut rng)?;
        for p in net.params_mut() {
            *p += rng.uniform_range(-0.3, 0.3);
        }
        let x = Matrix::from_vec(4, 3, (0..12).map(|_| rng.uniform_range(-1.0, 1.0)).collect())?;
        let (y, cache) = net.forward(&x, Mode::Train, Some(&mut rng))?;
        let w = Matrix::from_vec(y.rows(), y.cols(), (0..y.data().len()).map(|_| rng.normal()).collect())?;
        let (grads, dx) = net.backward(&cache, &w)?;
        let masks = cache.masks().to_vec();
        let f = |n: &Mlp, x: &Matrix| -> Result<f64, Box<dyn Error>> { Ok(weighted_sum(&n.forward_with_masks(x, &masks)?.0, &w)) };
        let h = 1e-5;
        for k in 0..net.param_count() {
            let (mut p, mut q) = (net.clone(), net.clone());
            p.params_mut()[k] += h;
            q.params_mut()[k] -= h;
            let fd = (f(&p, &x)? - f(&q, &x)?) / (2.0 * h);
            ensure!(fd_close(fd, grads[k]), "MLP seed {seed} (p={dropout}, ln={ln}) param {k}: fd {fd} vs {}", grads[k]);
            checked += 1;
        }
        for k in 0..x.data().len() {
            let (mut p, mut q) = (x.clone(), x.clone());
            p.data_mut()[k] += h;
            q.data_mut()[k] -= h;
            let fd = (f(&net, &p)? - f(&net, &q)?) / (2.0 * h);
            ensure!(fd_close(fd, dx.data()[k]), "MLP seed {seed} input {k}: fd {fd} vs {}", dx.data()[k]);
            checked += 1;
        }
    }
    Ok(checked)
}

fn policy_gradients(seed: u64) -> Result<usize, Box<dyn Error>> {
    let mut rng = RngState::new(600 + seed);
    let widths = PolicyWidths { encoder_hidden: vec![9, 8], summary: 6, emitter_hidden: vec![7] };
    let mut net = PolicyNet::init(&mut rng, 2, 1, &widths)?;
    for p in net.encoder_mut().params_mut() {
        *p = 0.5 * *p + rng.uniform_range(-0.2, 0.2);
    }
    for p in net.emitter_mut().params_mut() {
        *p = 0.5 * *p + rng.uniform_range(-0.2, 0.2);
    }
    let pairs = Matrix::from_vec(3, 3, (0..9).map(|_| rng.uniform_range(-1.0, 1.0)).collect())?;
    let noise = [rng.normal(), rng.normal()];
    let w = [rng.normal(), rng.normal()];
    let c = rng.uniform_range(-1.0, 1.0);
    let g = net.pathwise_gradients(&pairs, &noise, &w, c)?;
    let f = |n: &PolicyNet| -> Result<f64, Box<dyn Error>> {
        let r = n.pathwise_gradients(&pairs, &noise, &w, c)?;
        Ok(w[0] * r.action[0] + w[1] * r.action[1] + c * r.log_prob)
    };
    let h = 1e-5;
    let mut checked = 0;
    for (which, analytic) in [("encoder", &g.encoder), ("emitter", &g.emitter)] {
        for k in 0..analytic.len() {
            let (mut p, mut q) = (net.clone(), net.clone());
            let (pp, qp) = if which == "encoder" {
                (p.encoder_mut().params_mut(), q.encoder_mut().params_mut())
            } else {
                (p.emitter_mut().params_mut(), q.emitter_mut().params_mut())
            };
            pp[k] += h;
            qp[k] -= h;
            let fd = (f(&p)? - f(&q)?) / (2.0 * h);
            ensure!(fd_close(fd, analytic[k]), "policy seed {seed} {which} param {k}: fd {fd} vs {}", analytic[k]);
            checked += 1;
        }
    }
    Ok(checked)
}

/// A linear emitter with zero weights outputs its bias, so the bias gradient
/// is the squashed Gaussian's pathwise gradient in (mean, log_std).
fn tanh_normal_gradients(seed: u64) -> Result<usize, Box<dyn Error>> {
    let mut rng = RngState::new(700 + seed);
    let d = 3;
    let mean: Vec<f64> = (0..d).map(|_| rng.uniform_range(-1.5, 1.5)).collect();
    let log_std: Vec<f64> = (0..d).map(|_| rng.uniform_range(-1.5, 0.5)).collect();
    let noise: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let w: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let c = rng.uniform_range(-1.0, 1.0);

    let encoder = Mlp::kaiming(Mlp::stack(d + 1, &[4], 5, 0.0, false), &mut rng)?;
    let mut emitter = Mlp::new(vec![LayerSpec::dense(5, 2 * d, Activation::None)])?;
    emitter.params_mut().fill(0.0);
    let bias = emitter.param_slots().into_iter().find(|s| s.name.ends_with("bias")).ok_or("emitter has no bias")?;
    let head: Vec<f64> = mean.iter().chain(&log_std).copied().collect();
    emitter.params_mut()[bias.range.clone()].copy_from_slice(&head);
    let net = PolicyNet::from_parts(d, 1, encoder, emitter)?;
    let g = net.pathwise_gradients(&Matrix::zeros(0, d + 1), &noise, &w, c)?;
    let analytic = &g.emitter[bias.range.clone()];

    let f = |head: &[f64]| -> Result<f64, Box<dyn Error>> {
        let s = TanhNormal::new(head[..d].to_vec(), head[d..].to_vec())?.sample_with_noise(noise.clone());
        Ok(s.action.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + c * s.log_prob)
    };
    let h = 1e-6;
    for k in 0..2 * d {
        let (mut p, mut q) = (head.clone(), head.clone());
        p[k] += h;
        q[k] -= h;
        let fd = (f(&p)? - f(&q)?) / (2.0 * h);
        ensure!(fd_close(fd, analytic[k]), "tanh-normal seed {seed} head {k}: fd {fd} vs {}", analytic[k]);
    }
    Ok(2 * d)
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let (mut mlp, mut pol, mut tn) = (0, 0, 0);
    for seed in 0..5 {
        mlp += mlp_gradients(seed)?;
        pol += policy_gradients(seed)?;
        tn += tanh_normal_gradients(seed)?;
    }
    within(Duration::from_secs(60), start, "gradient suite")?;
    Ok(format!("5 seeds: {mlp} MLP, {pol} policy, {tn} tanh-normal partials within 1e-4 rel"))
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Interior density integrated in logit space by Simpson's rule, plus both atoms.
fn ces_total_mass(p: &Ces, theta: &[f64], xi: &[f64]) -> Result<f64, Box<dyn Error>> {
    let (mu, sd) = p.obs_params(theta, xi);
    let eps = p.epsilon();
    let lo = logit(eps).max(mu - 12.0 * sd);
    let hi = logit(1.0 - eps).min(mu + 12.0 * sd);
    let mut interior = 0.0;
    if lo < hi {
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let f = |z: f64| -> Result<f64, Box<dyn Error>> {
            let y = sigmoid(z);
            if y <= eps || y >= 1.0 - eps {
                return Ok(0.0);
            }
            Ok((p.log_lik(y, theta, xi)? + y.ln() + (-y).ln_1p()).exp())
        };
        let mut s = f(lo)? + f(hi)?;
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h)?;
        }
        interior = s * h / 3.0;
    }
    Ok(interior + p.log_lik(eps, theta, xi)?.exp() + p.log_lik(1.0 - eps, theta, xi)?.exp())
}

fn distribution_suite() -> Outcome {
    let start = Instant::now();
    let n = 100_000;
    let mut rng = RngState::new(31);
    let beta_mean = (0..n).map(|_| sample_beta(&mut rng, 1.0, 1.0)).sum::<Result<f64, _>>()? / n as f64;
    ensure!((beta_mean - 0.5).abs() <= 0.005, "Beta(1,1) mean {beta_mean}");

    let mut dir = [0.0; 3];
    for _ in 0..n {
        for (acc, v) in dir.iter_mut().zip(sample_dirichlet(&mut rng, &[1.0, 1.0, 1.0])?) {
            *acc += v / n as f64;
        }
    }
    ensure!(dir.iter().all(|m| (m - 1.0 / 3.0).abs() <= 0.005), "Dirichlet means {dir:?}");

    let mut ln: Vec<f64> = (0..n).map(|_| sample_lognormal(&mut rng, 1.0, 3.0)).collect::<Result<_, _>>()?;
    ln.sort_by(f64::total_cmp);
    let median = 0.5 * (ln[n / 2 - 1] + ln[n / 2]);
    let e = std::f64::consts::E;
    ensure!((median - e).abs() <= 0.05 * e, "LogNormal(1, 3^2) median {median}");

    let Problem::Ces(ces) = ProblemConfig::ces().build()? else {
        return Err("CES config built another problem".into());
    };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut theta = vec![0.0; ces.theta_dim()];
        ces.sample_prior(&mut rng, &mut theta);
        let xi: Vec<f64> = (0..ces.design_dim()).map(|_| rng.uniform_range(0.0, 100.0)).collect();
        worst = worst.max((ces_total_mass(&ces, &theta, &xi)? - 1.0).abs());
    }
    ensure!(worst <= 1e-4, "CES censored mass deviates by {worst:e}");
    within(Duration::from_secs(120), start, "distribution suite")?;
    Ok(format!(
        "Beta mean {beta_mean:.4}, Dirichlet {:.4}/{:.4}/{:.4}, LogNormal median {median:.3}, CES mass err {worst:.1e}",
        dir[0], dir[1], dir[2]
    ))
}

fn estimator_equivalence() -> Outcome {
    let problem = location(1000).build()?;
    let policy = RandomDesigns { dim: 2 };
    let base = EvalSpec { n_rollouts: 8, l: 200_000, horizon: 30, chunk: 64, seed: 41 };
    let runs: Vec<Evaluation> =
        [64, 1000, 100_000].iter().map(|&chunk| evaluate(&policy, &problem, &EvalSpec { chunk, ..base })).collect::<Result<_, _>>()?;
    let mut worst = 0.0f64;
    for other in &runs[1..] {
        for (a, b) in runs[0].rollouts.iter().zip(&other.rollouts) {
            worst = worst.max(max_abs_diff(&a.spce, &b.spce)).max(max_abs_diff(&a.snmc, &b.snmc));
        }
    }
    ensure!(worst <= 1e-9, "chunked estimates differ by {worst:e}");

    let paired = evaluate(&policy, &problem, &EvalSpec { n_rollouts: 500, l: 1000, horizon: 30, chunk: 1000, seed: 42 })?;
    let gap = paired.snmc.mean - paired.spce.mean;
    ensure!(gap >= -0.05, "mean sNMC {} below mean sPCE {} by more than 0.05", paired.snmc.mean, paired.spce.mean);
    Ok(format!("chunks 64/1e3/1e5 at L=2e5 agree to {worst:.1e}; sNMC - sPCE = {gap:.3} at n=500, L=1e3"))
}

/// Manual clipped double-Q soft target from the public building blocks.
fn manual_target(m: &Member, enc: &EncodedBatch, batch: &[&Transition], gamma: f64, rng: &mut RngState) -> Result<Vec<f64>, Box<dyn Error>> {
    let next = m.policy.sample_batch(&enc.next, rng)?;
    let input = enc.next.hcat(&next.actions)?;
    let mut min_q = vec![f64::INFINITY; batch.len()];
    for c in &m.critics {
        for (mq, q) in min_q.iter_mut().zip(c.target_values(&input, rng)?) {
            *mq = mq.min(q);
        }
    }
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| if t.done { t.reward } else { t.reward + gamma * (min_q[i] - m.alpha() * next.log_probs[i]) })
        .collect())
}

fn same_params(a: &Member, b: &Member) -> f64 {
    let mut worst = max_abs_diff(a.policy.encoder().params(), b.policy.encoder().params());
    worst = worst.max(max_abs_diff(a.policy.emitter().params(), b.policy.emitter().params()));
    for (x, y) in a.critics.iter().zip(&b.critics) {
        worst = worst.max(max_abs_diff(x.online.params(), y.online.params()));
        worst = worst.max(max_abs_diff(x.target.params(), y.target.params()));
    }
    worst.max((a.log_alpha - b.log_alpha).abs())
}

fn reduction_redq_sac(problem: &Problem, buf: &ReplayBuffer) -> Result<f64, Box<dyn Error>> {
    let redq = AgentConfig { n: 2, m: 2, ..tiny(Variant::Redq) };
    let sac = tiny(Variant::Sac);
    let mut ens = AgentEnsemble::new(redq.clone(), problem.design_dim(), 5)?;
    let mut rng = RngState::new(6);
    for _ in 0..3 {
        ens.update_step(buf, &mut rng)?;
    }
    let m = &ens.members[0];
    let batch = buf.sample(64, &mut rng)?;
    let enc = EncodedBatch::build(&m.policy, buf, &batch)?;
    let a = m.critic_target(&enc, &batch, &redq, &mut RngState::new(9))?;
    let b = m.critic_target(&enc, &batch, &sac, &mut RngState::new(9))?;
    let c = manual_target(m, &enc, &batch, redq.gamma, &mut RngState::new(9))?;
    Ok(max_abs_diff(&a, &b).max(max_abs_diff(&a, &c)))
}

fn reduction_sunrise(problem: &Problem, buf: &ReplayBuffer) -> Result<f64, Box<dyn Error>> {
    let cfg = AgentConfig { n: 3, ..tiny(Variant::Sunrise) };
    let mut ens = AgentEnsemble::new(cfg.clone(), problem.design_dim(), 7)?;
    let first = ens.members[0].clone();
    for m in &mut ens.members[1..] {
        *m = first.clone();
    }
    let batch = buf.sample(32, &mut RngState::new(8))?;

    let mut manual = ens.members.clone();
    let mut rng = RngState::new(10);
    let encs: Vec<EncodedBatch> = manual.iter().map(|m| EncodedBatch::build(&m.policy, buf, &batch)).collect::<Result<_, _>>()?;
    let mut targets = Vec::new();
    for (i, m) in manual.iter().enumerate() {
        let next = m.policy.sample_batch(&encs[i].next, &mut rng)?;
        let mut own = Vec::new();
        for (j, other) in manual.iter().enumerate() {
            let q = other.critics[0].target_values(&encs[j].next.hcat(&next.actions)?, &mut rng)?;
            if j == i {
                own = q;
            }
        }
        targets.push(
            batch
                .iter()
                .enumerate()
                .map(|(r, t)| if t.done { t.reward } else { t.reward + cfg.gamma * (own[r] - m.alpha() * next.log_probs[r]) })
                .collect::<Vec<f64>>(),
        );
    }
    let reported = sunrise_targets(&ens, buf, &batch, &mut RngState::new(10))?;
    let mut worst = 0.0f64;
    for (i, w) in reported.weights.iter().enumerate() {
        worst = worst.max(w.iter().map(|w| (w - 1.0).abs()).fold(0.0, f64::max));
        worst = worst.max(max_abs_diff(&reported.targets[i], &targets[i]));
    }
    for (i, m) in manual.iter_mut().enumerate() {
        m.learn(&encs[i], &batch, &targets[i], None, &cfg, &mut rng)?;
    }
    sunrise_learn(&mut ens, buf, &batch, &mut RngState::new(10))?;
    for (a, b) in ens.members.iter().zip(&manual) {
        worst = worst.max(same_params(a, b));
    }
    Ok(worst)
}

fn reduction_droq(problem_cfg: &ProblemConfig) -> Result<f64, Box<dyn Error>> {
    let problem = problem_cfg.build()?;
    let droq = droq_configure(tiny(Variant::Droq), 0.0);
    let redq = AgentConfig { variant: Variant::Redq, m: droq.n, layer_norm: true, ..droq.clone() };
    let a = train(&problem, problem_cfg.l_train, &droq, 3, 60, |_| {})?;
    let b = train(&problem, problem_cfg.l_train, &redq, 3, 60, |_| {})?;
    if a.curve != b.curve {
        return Err("DroQ(p=0) and REDQ(M=N, layer norm) training curves differ".into());
    }
    Ok(same_params(&a.ensemble.members[0], &b.ensemble.members[0]))
}

fn reduction_sbr(problem: &Problem, buf: &ReplayBuffer) -> Result<(), Box<dyn Error>> {
    let cfg = AgentConfig { reset_interval: Some(6), utd: 3, ..tiny(Variant::Sbr) };
    let seed = 13;
    let mut ens = AgentEnsemble::new(cfg.clone(), problem.design_dim(), seed)?;
    let mut control = ens.clone();
    control.cfg.reset_interval = None;
    control.next_reset = None;
    let before = buf.clone();
    let (mut r1, mut r2) = (RngState::new(14), RngState::new(14));
    for _ in 0..2 {
        ens.update_step(buf, &mut r1)?;
        control.update_step(buf, &mut r2)?;
    }
    ensure!(ens.resets == 1 && ens.next_reset == Some(12), "expected one reset, got {} (next {:?})", ens.resets, ens.next_reset);
    for (i, (m, c)) in ens.members.iter().zip(&control.members).enumerate() {
        let fresh = Member::init(&cfg, problem.design_dim(), &mut init_stream(seed, 1, i))?;
        ensure!(m.policy == fresh.policy, "member {i}: policy differs from a fresh initialisation");
        ensure!(m.critics == fresh.critics, "member {i}: critics differ from a fresh initialisation");
        ensure!(m.encoder_adam == fresh.encoder_adam && m.emitter_adam == fresh.emitter_adam, "member {i}: policy optimisers not reset");
        ensure!(m.log_alpha == c.log_alpha && m.alpha_adam == c.alpha_adam, "member {i}: temperature not preserved");
        ensure!(m.log_alpha != fresh.log_alpha, "member {i}: temperature never moved, check is vacuous");
    }
    ensure!(*buf == before, "replay buffer changed across the reset");
    Ok(())
}

fn algorithm_reductions() -> Outcome {
    let problem_cfg = ProblemConfig { horizon: 6, ..location(20) };
    let problem = problem_cfg.build()?;
    let buf = filled_buffer(&problem, 20, 4)?;
    let redq = reduction_redq_sac(&problem, &buf)?;
    ensure!(redq <= 1e-12, "REDQ(2,2) target differs from the clipped double-Q target by {redq:e}");
    let sunrise = reduction_sunrise(&problem, &buf)?;
    ensure!(sunrise <= 1e-12, "SUNRISE at zero spread differs from per-member SAC by {sunrise:e}");
    let droq = reduction_droq(&problem_cfg)?;
    ensure!(droq <= 1e-12, "DroQ(p=0) differs from REDQ(M=N, layer norm) by {droq:e}");
    reduction_sbr(&problem, &buf)?;
    Ok(format!("REDQ {redq:.0e}, SUNRISE {sunrise:.0e}, DroQ {droq:.0e}, SBR reset bit-identical"))
}

const DESK_SEED: u64 = 0;
const DESK_ITERATIONS: u64 = 1500;
const EVAL_SEED: u64 = 1 << 32;

fn desk_problem() -> ProblemConfig {
    location(1000)
}

fn desk_eval(l: usize) -> EvalSpec {
    EvalSpec { n_rollouts: 200, l, horizon: 30, chunk: 10_000, seed: EVAL_SEED }
}

fn desk_config(variant: Variant) -> AgentConfig {
    AgentConfig { batch_size: 256, utd: 16, ..AgentConfig::preset(variant, ProblemKind::LocationFinding) }
}

struct DeskAgent {
    ensemble: AgentEnsemble,
    seconds: f64,
}

fn desk_train(variant: Variant) -> Result<DeskAgent, Box<dyn Error>> {
    let cfg = desk_problem();
    let start = Instant::now();
    let out = train(&cfg.build()?, cfg.l_train, &desk_config(variant), DESK_SEED, DESK_ITERATIONS, |_| {})?;
    Ok(DeskAgent { ensemble: out.ensemble, seconds: start.elapsed().as_secs_f64() })
}

fn redq_agent() -> Result<&'static DeskAgent, Box<dyn Error>> {
    static AGENT: OnceLock<Result<DeskAgent, String>> = OnceLock::new();
    AGENT.get_or_init(|| desk_train(Variant::Redq).map_err(|e| e.to_string())).as_ref().map_err(|e| e.clone().into())
}

/// Agent and random-design sPCE on the same evaluation streams.
fn versus_random(agent: &AgentEnsemble, problem: &Problem, spec: &EvalSpec) -> Result<(f64, f64, f64, f64), Box<dyn Error>> {
    let policy = EnsemblePolicy { ensemble: agent, method: EvalMethod::B };
    let a = evaluate(&policy, problem, spec)?.spce;
    let r = evaluate(&RandomDesigns { dim: problem.design_dim() }, problem, spec)?.spce;
    Ok((a.mean, a.stderr, r.mean, r.stderr))
}

fn desk_learning(agent: &DeskAgent) -> Outcome {
    let (a, ase, r, rse) = versus_random(&agent.ensemble, &desk_problem().build()?, &desk_eval(10_000))?;
    ensure!(agent.seconds <= 3600.0, "training took {:.0}s, over 60 min", agent.seconds);
    ensure!(a >= r + 0.5, "agent sPCE {a:.3} +- {ase:.3} vs random {r:.3} +- {rse:.3}: gap {:.3} < 0.5", a - r);
    Ok(format!("sPCE {a:.3} +- {ase:.3} vs random {r:.3} +- {rse:.3} (gap {:.2}), trained in {:.0}s", a - r, agent.seconds))
}

fn desk_redq() -> Outcome {
    desk_learning(redq_agent()?)
}

fn desk_droq() -> Outcome {
    let agent = desk_train(Variant::Droq)?;
    ensure!(agent.ensemble.cfg.dropout == 0.01, "DroQ preset dropout is {}", agent.ensemble.cfg.dropout);
    desk_learning(&agent)
}

fn generalization() -> Outcome {
    let agent = redq_agent()?;
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for k in [1, 3] {
        let problem = desk_problem().build_with(&Override::K(k))?;
        let (a, _, r, _) = versus_random(&agent.ensemble, &problem, &desk_eval(10_000))?;
        parts.push(format!("K={k}: {a:.3} vs {r:.3}"));
        if a < r + 0.2 {
            failures.push(format!("K={k} gap {:.3} < 0.2", a - r));
        }
    }
    ensure!(failures.is_empty(), "{} ({})", failures.join(", "), parts.join("; "));
    Ok(parts.join("; "))
}

/// Two-sample Kolmogorov-Smirnov distance.
fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn sunrise_methods() -> Outcome {
    let problem = location(100).build()?;
    let d = problem.design_dim();
    let cfg = AgentConfig { n: 2, ..tiny(Variant::Sunrise) };
    let mut ens = AgentEnsemble::new(cfg, d, 17)?;
    for (m, centre) in ens.members.iter_mut().zip([-1.0, 1.2]) {
        let width = m.policy.summary_width();
        let mut emitter = Mlp::new(vec![LayerSpec::dense(width, 2 * d, Activation::None)])?;
        emitter.params_mut().fill(0.0);
        let bias = emitter.param_slots().into_iter().find(|s| s.name.ends_with("bias")).ok_or("emitter has no bias")?;
        let head = [centre, 0.5 * centre, 0.3f64.ln(), 0.3f64.ln()];
        emitter.params_mut()[bias.range].copy_from_slice(&head);
        m.policy = PolicyNet::from_parts(d, 1, m.policy.encoder().clone(), emitter)?;
    }
    let cursor = ens.start();
    let n = 10_000;
    let draws = |method: EvalMethod, seed: u64| -> Result<Vec<Vec<f64>>, Box<dyn Error>> {
        let mut rng = RngState::new(seed);
        (0..n).map(|_| Ok(sunrise_eval_select(&ens, &cursor, method, &mut rng)?)).collect()
    };
    let a = draws(EvalMethod::A, 1)?;
    let a2 = draws(EvalMethod::A, 2)?;
    ensure!(a.iter().chain(&a2).all(|x| *x == a[0]), "method A is not deterministic");
    let b = draws(EvalMethod::B, 3)?;
    let c = draws(EvalMethod::C, 4)?;
    let (lo, hi) = (problem.design_lo().to_vec(), problem.design_hi().to_vec());
    let mut design = vec![0.0; d];
    for x in a.iter().chain(&b).chain(&c) {
        problem.scale_action(x, &mut design);
        ensure!(design.iter().zip(&lo).zip(&hi).all(|((v, l), h)| (l..=h).contains(&v)), "design {design:?} out of bounds");
    }
    let first = |xs: &[Vec<f64>]| xs.iter().map(|x| x[0]).collect::<Vec<f64>>();
    let (fa, fb, fc) = (first(&a), first(&b), first(&c));
    let (ab, ac, bc) = (ks_distance(&fa, &fb), ks_distance(&fa, &fc), ks_distance(&fb, &fc));
    ensure!(ab > 0.05 && ac > 0.05 && bc > 0.05, "KS distances A-B {ab:.3}, A-C {ac:.3}, B-C {bc:.3}");
    Ok(format!("A deterministic; KS A-B {ab:.3}, A-C {ac:.3}, B-C {bc:.3} on 1e4 draws"))
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("bound_invariant", bound_invariant),
        ("telescoping_oracle", telescoping),
        ("gradient_suite", gradient_suite),
        ("distribution_suite", distribution_suite),
        ("estimator_equivalence", estimator_equivalence),
        ("algorithm_reductions", algorithm_reductions),
        ("sunrise_eval_methods", sunrise_methods),
        ("desk_learning_redq", desk_redq),
        ("desk_learning_droq", desk_droq),
        ("generalization_k1_k3", generalization),
    ];
    let (mut passed, mut failed) = (0, 0);
    for (name, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => {
                passed += 1;
                println!("PASS {name:<24} {detail} [{secs:.1}s]");
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {name:<24} {e} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
